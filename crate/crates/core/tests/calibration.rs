use bohrsom::actions::SignCalibration;
use bohrsom::quantization::{calibrate_signs, default_suite};

#[test]
fn default_suite_reproduces_frozen_signs() {
    let cal = calibrate_signs(&default_suite(0.1, 0.05)).unwrap();
    println!("{cal:#?}");
    assert_eq!(cal.signs(), SignCalibration::default().signs());
}
