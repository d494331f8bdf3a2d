//! Command-line front end: `spectrum`, `verify` and `sweep`.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::actions::{action_series, stokes_check, SignCalibration};
use crate::charts::{
    chart_overlap_check, d1_direct, d1_fourier, default_xi_interval, eikonal_fourier_on,
    re_telescoping, spatial_chart_on, Branch,
};
use crate::numeric::loglog_slope;
use crate::oracle::{oracle_spectrum, OracleOptions};
use crate::orbit::find_orbit;
use crate::quantization::{calibrate_signs, default_suite, levels_in_band, quantize, spectrum};
use crate::quasimode::{inner_residual, QuasimodeOptions};
use crate::symbol::{parse_symbol_config, Polynomial, SymbolModel};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{module}: {message}")]
    Solver { module: &'static str, message: String },
    #[error("{0} check(s) violated their tolerance")]
    Violations(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Violations(_) => 1,
            CliError::Config(_) => 2,
            CliError::Solver { .. } => 3,
        }
    }
}

fn solver<E: std::fmt::Display>(module: &'static str) -> impl Fn(E) -> CliError {
    move |e| CliError::Solver {
        module,
        message: e.to_string(),
    }
}

#[derive(Debug, Parser)]
#[command(name = "bohrsom", version, about = "Second-order Bohr–Sommerfeld spectra and checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bohr–Sommerfeld eigenvalues for a range of levels.
    Spectrum(RunArgs),
    /// Run a verification suite.
    Verify {
        #[arg(long, value_enum)]
        suite: Suite,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Compare against the oracle over several h and fit convergence orders.
    Sweep(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Stokes,
    Charts,
    Residual,
    Calibration,
    OracleCompare,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Symbol config (TOML).
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, conflicts_with = "h_list")]
    pub h: Option<f64>,
    /// Comma-separated h values.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub h_list: Option<Vec<f64>>,
    /// One or more orders, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "2")]
    pub order: Vec<u8>,
    /// Inclusive level range `A..B`.
    #[arg(long, default_value = "0..4")]
    pub n_range: String,
    #[arg(long)]
    pub oracle_n: Option<usize>,
    /// Sweep only: compare the levels with energies in `LO..HI` instead of
    /// fixed level numbers, and fit the band maximum of the error.
    #[arg(long, allow_hyphen_values = true)]
    pub band: Option<String>,
    /// Oracle domain `LO..HI`.
    #[arg(long, allow_hyphen_values = true)]
    pub domain: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// `default`, `auto`, or a path to a calibration JSON file.
    #[arg(long, default_value = "default")]
    pub calibration: String,
    /// Energy for the charts and residual suites; defaults to the order-0
    /// level at the top of the n-range.
    #[arg(long, allow_hyphen_values = true)]
    pub energy: Option<f64>,
    /// Stokes identity residual bound.
    #[arg(long, default_value_t = 1e-6)]
    pub tol_stokes: f64,
    /// Chart overlap deviation bound.
    #[arg(long, default_value_t = 1e-6)]
    pub tol_overlap: f64,
    /// Re-part telescoping bound.
    #[arg(long, default_value_t = 1e-8)]
    pub tol_telescope: f64,
    /// Direct vs reduced D1 bound.
    #[arg(long, default_value_t = 1e-7)]
    pub tol_reduction: f64,
    /// Minimum log-log slope of the quasimode residual.
    #[arg(long, default_value_t = 1.8)]
    pub min_residual_slope: f64,
    /// Bound on |E_BS - E_oracle| in oracle-compare.
    #[arg(long, default_value_t = 1e-7)]
    pub tol_oracle: f64,
    /// Oracle convergence tolerance.
    #[arg(long, default_value_t = 1e-7)]
    pub oracle_tol: f64,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CalibrationSource {
    Default,
    Auto,
    File(PathBuf),
}

/// Validated run description; echoed into every output header.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub suite: Option<Suite>,
    pub config_path: PathBuf,
    pub h_list: Vec<f64>,
    pub orders: Vec<u8>,
    pub n_range: (usize, usize),
    pub band: Option<(f64, f64)>,
    pub oracle_n: Option<usize>,
    pub oracle_domain: Option<(f64, f64)>,
    pub oracle_count: usize,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub calibration: CalibrationSource,
    pub energy: Option<f64>,
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Tolerances {
    pub stokes: f64,
    pub overlap: f64,
    pub telescope: f64,
    pub reduction: f64,
    pub residual_slope: f64,
    pub oracle: f64,
    pub oracle_convergence: f64,
}

fn parse_range<T: std::str::FromStr>(s: &str, what: &str) -> Result<(T, T), CliError> {
    let bad = || CliError::Config(format!("{what} must look like A..B, got {s:?}"));
    let (a, b) = s.split_once("..").ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

impl RunManifest {
    pub fn from_args(command: &str, suite: Option<Suite>, a: &RunArgs) -> Result<Self, CliError> {
        let h_list = match (&a.h, &a.h_list) {
            (Some(h), None) => vec![*h],
            (None, Some(l)) => l.clone(),
            (None, None) => vec![0.1],
            (Some(_), Some(_)) => return Err(CliError::Config("--h and --h-list are exclusive".into())),
        };
        if h_list.is_empty() || h_list.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
            return Err(CliError::Config(format!("h must be positive, got {h_list:?}")));
        }
        if a.order.is_empty() || a.order.iter().any(|&o| o > 2) {
            return Err(CliError::Config(format!("orders must be 0, 1 or 2, got {:?}", a.order)));
        }
        let n_range: (usize, usize) = parse_range(&a.n_range, "--n-range")?;
        if n_range.1 < n_range.0 {
            return Err(CliError::Config(format!("empty n-range {}", a.n_range)));
        }
        let oracle_domain = match &a.domain {
            Some(d) => {
                let r: (f64, f64) = parse_range(d, "--domain")?;
                if r.1 <= r.0 {
                    return Err(CliError::Config(format!("empty domain {d}")));
                }
                Some(r)
            }
            None => None,
        };
        let band = match &a.band {
            Some(b) => {
                let r: (f64, f64) = parse_range(b, "--band")?;
                if r.1 <= r.0 {
                    return Err(CliError::Config(format!("empty band {b}")));
                }
                Some(r)
            }
            None => None,
        };
        let calibration = match a.calibration.as_str() {
            "default" => CalibrationSource::Default,
            "auto" => CalibrationSource::Auto,
            p => CalibrationSource::File(PathBuf::from(p)),
        };
        if let Some(out) = &a.out {
            let dir = out.parent().filter(|p| !p.as_os_str().is_empty());
            if dir.is_some_and(|d| !d.is_dir()) {
                return Err(CliError::Config(format!("output directory for {} does not exist", out.display())));
            }
        }
        Ok(RunManifest {
            command: command.into(),
            suite,
            config_path: a.config.clone(),
            h_list,
            orders: a.order.clone(),
            n_range,
            band,
            oracle_n: a.oracle_n,
            oracle_domain,
            oracle_count: n_range.1 + 1,
            format: a.format,
            out: a.out.clone(),
            calibration,
            energy: a.energy,
            tolerances: Tolerances {
                stokes: a.tol_stokes,
                overlap: a.tol_overlap,
                telescope: a.tol_telescope,
                reduction: a.tol_reduction,
                residual_slope: a.min_residual_slope,
                oracle: a.tol_oracle,
                oracle_convergence: a.oracle_tol,
            },
        })
    }

    fn oracle_options(&self) -> OracleOptions {
        OracleOptions {
            grid_size: self.oracle_n,
            domain: self.oracle_domain,
            tolerance: self.tolerances.oracle_convergence,
            ..OracleOptions::default()
        }
    }

    fn levels(&self) -> std::ops::RangeInclusive<usize> {
        self.n_range.0..=self.n_range.1
    }
}

/// A value in an output row.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Num(v) => format!("{v:e}"),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(v) => json!(v),
            Cell::Num(v) if v.is_finite() => json!(v),
            Cell::Num(v) => json!(v.to_string()),
            Cell::Text(s) => json!(s),
            Cell::Empty => Value::Null,
        }
    }
}

/// Result table plus metadata.
#[derive(Debug, Clone)]
pub struct Report {
    pub meta: Vec<(String, Value)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub violations: usize,
}

impl Report {
    fn new(manifest: &RunManifest, columns: &[&str]) -> Self {
        Report {
            meta: vec![
                ("tool".into(), json!(format!("bohrsom {}", env!("CARGO_PKG_VERSION")))),
                ("manifest".into(), serde_json::to_value(manifest).expect("serializable")),
            ],
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            violations: 0,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.meta {
            let _ = writeln!(s, "# {k}: {v}");
        }
        let _ = writeln!(s, "{}", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }

    pub fn to_json(&self) -> String {
        let meta: Map<String, Value> = self.meta.iter().cloned().collect();
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                let m: Map<String, Value> = self
                    .columns
                    .iter()
                    .cloned()
                    .zip(r.iter().map(Cell::json))
                    .collect();
                Value::Object(m)
            })
            .collect();
        let mut out = serde_json::to_string_pretty(&json!({ "meta": meta, "rows": rows }))
            .expect("serializable");
        out.push('\n');
        out
    }
}

fn load_model(path: &PathBuf) -> Result<SymbolModel, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_symbol_config(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn load_calibration(source: &CalibrationSource) -> Result<SignCalibration, CliError> {
    match source {
        CalibrationSource::Default => Ok(SignCalibration::default()),
        CalibrationSource::Auto => calibrate_signs(&default_suite(0.1, 0.05)).map_err(solver("quantization")),
        CalibrationSource::File(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            let cal: SignCalibration = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            for s in [cal.sigma_gamma, cal.sigma_p1sq, cal.sigma_p2] {
                if s.abs() != 1.0 {
                    return Err(CliError::Config(format!("calibration signs must be ±1, got {s}")));
                }
            }
            Ok(cal)
        }
    }
}

fn calibration_meta(report: &mut Report, cal: &SignCalibration) {
    report.meta.push((
        "calibration".into(),
        serde_json::to_value(cal).expect("serializable"),
    ));
}

pub fn cmd_spectrum(m: &RunManifest) -> Result<Report, CliError> {
    let model = load_model(&m.config_path)?;
    let cal = load_calibration(&m.calibration)?;
    if m.h_list.len() != 1 {
        return Err(CliError::Config("spectrum takes a single --h".into()));
    }
    let h = m.h_list[0];
    let mut cols = vec!["n".to_string()];
    for o in &m.orders {
        cols.push(format!("energy_order{o}"));
        cols.push(format!("bs_residual_order{o}"));
    }
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut report = Report::new(m, &col_refs);
    calibration_meta(&mut report, &cal);
    let mut per_order = Vec::new();
    for &o in &m.orders {
        let r = spectrum(&model, h, m.levels(), o, &cal).map_err(solver("quantization"))?;
        if let Some((n, why)) = r.failures.first() {
            return Err(CliError::Solver {
                module: "quantization",
                message: format!("level {n} at order {o}: {why}"),
            });
        }
        per_order.push(r.entries);
    }
    for (k, n) in m.levels().enumerate() {
        let mut row = vec![Cell::Int(n as i64)];
        for levels in &per_order {
            row.push(Cell::Num(levels[k].energy));
            row.push(Cell::Num(levels[k].bs_residual));
        }
        report.rows.push(row);
    }
    Ok(report)
}

fn check_row(report: &mut Report, name: String, measured: f64, bound: f64, pass: bool) {
    if !pass {
        report.violations += 1;
    }
    report.rows.push(vec![
        Cell::Text(name),
        Cell::Num(measured),
        Cell::Num(bound),
        Cell::Text(if pass { "PASS" } else { "FAIL" }.into()),
    ]);
}

fn default_energy(m: &RunManifest, model: &SymbolModel) -> Result<f64, CliError> {
    if let Some(e) = m.energy {
        return Ok(e);
    }
    quantize(model, m.h_list[0], m.n_range.1, 0, &SignCalibration::default())
        .map(|l| l.energy)
        .map_err(solver("quantization"))
}

/// Forms `(f, g)` for the Stokes suite: the period identity plus mixed monomials.
pub fn stokes_forms() -> Vec<(Polynomial, Polynomial)> {
    use crate::symbol::Monomial as M;
    vec![
        (Polynomial(vec![M::new(1.0, 0, 1)]), Polynomial(vec![])),
        (Polynomial(vec![M::new(1.0, 2, 1)]), Polynomial(vec![M::new(1.0, 1, 1)])),
        (Polynomial(vec![M::new(0.5, 0, 3)]), Polynomial(vec![M::new(-1.0, 3, 0)])),
        (Polynomial(vec![M::new(1.0, 1, 2), M::new(0.3, 0, 0)]), Polynomial(vec![M::new(1.0, 2, 0)])),
        (Polynomial(vec![]), Polynomial(vec![M::new(0.7, 2, 2), M::new(-0.2, 1, 0)])),
    ]
}

pub fn cmd_verify(m: &RunManifest, suite: Suite) -> Result<Report, CliError> {
    let model = load_model(&m.config_path)?;
    let cal = load_calibration(&m.calibration)?;
    let mut report = Report::new(m, &["check", "measured", "bound", "status"]);
    calibration_meta(&mut report, &cal);
    let t = m.tolerances;
    let h = m.h_list[0];
    match suite {
        Suite::Stokes => {
            for n in m.levels() {
                let e = quantize(&model, h, n, 0, &cal).map_err(solver("quantization"))?.energy;
                for (k, (f, g)) in stokes_forms().iter().enumerate() {
                    let r = stokes_check(&model, e, f, g).map_err(solver("actions"))?;
                    check_row(&mut report, format!("stokes form{k} E={e:.6}"), r, t.stokes, r <= t.stokes);
                }
            }
        }
        Suite::Charts => {
            let e = default_energy(m, &model)?;
            let orbit = find_orbit(&model, e).map_err(solver("orbit"))?;
            for branch in [Branch::Right, Branch::Left] {
                let iv = default_xi_interval(&orbit, branch, 0.9);
                let chart = eikonal_fourier_on(&model, &orbit, iv, branch, 161).map_err(solver("charts"))?;
                let mut worst: f64 = 0.0;
                for &xi in chart.xi_grid.iter().step_by(8) {
                    let a = d1_fourier(&chart, &model, xi).map_err(solver("charts"))?;
                    let b = d1_direct(&chart, &model, xi).map_err(solver("charts"))?;
                    worst = worst.max((a - b).norm());
                }
                check_row(&mut report, format!("D1 reduction {branch:?}"), worst, t.reduction, worst <= t.reduction);
                let stops = [iv.0, 0.6 * iv.0 + 0.4 * iv.1, 0.3 * iv.0 + 0.7 * iv.1, iv.1];
                let tel = re_telescoping(&model, &orbit, branch, &stops, 161).map_err(solver("charts"))?;
                let v = tel.bracket_sum.abs().max(tel.direct_sum.abs()).max(tel.max_mismatch);
                check_row(&mut report, format!("Re telescoping {branch:?}"), v, t.telescope, v <= t.telescope);
            }
            let (xl, xr) = orbit.x_range();
            let w = xr - xl;
            let iv = default_xi_interval(&orbit, Branch::Right, 0.9);
            let chart = eikonal_fourier_on(&model, &orbit, iv, Branch::Right, 161).map_err(solver("charts"))?;
            let xie = chart.xi_anchor;
            for sign in [1.0, -1.0] {
                // Spatial arc on the same side of the focal point as the Fourier arc.
                let lo = xl + 0.5 * w;
                let s = spatial_chart_on(&model, &orbit, sign, (lo, xr - 0.05 * w), 41).map_err(solver("charts"))?;
                let r = chart_overlap_check(&chart, &s, &model).map_err(solver("charts"))?;
                let name = format!("Im overlap sign={sign:+} (xi_E={xie:.3e}, {} samples)", r.samples);
                check_row(&mut report, name, r.im_deviation, t.overlap, r.im_deviation <= t.overlap);
            }
        }
        Suite::Residual => {
            if m.h_list.len() < 3 {
                return Err(CliError::Config("residual suite needs --h-list with at least 3 values".into()));
            }
            let e = default_energy(m, &model)?;
            for amp in [
                crate::quasimode::AmplitudeCorrection::Verbatim,
                crate::quasimode::AmplitudeCorrection::Alternative,
            ] {
                let opts = QuasimodeOptions {
                    amplitude: amp,
                    ..QuasimodeOptions::default()
                };
                let mut rs = Vec::new();
                for &hh in &m.h_list {
                    let r = inner_residual(&model, e, hh, &opts).map_err(solver("quasimode"))?;
                    report.rows.push(vec![
                        Cell::Text(format!("residual {amp:?} h={hh}")),
                        Cell::Num(r),
                        Cell::Empty,
                        Cell::Text("INFO".into()),
                    ]);
                    rs.push(r);
                }
                let slope = loglog_slope(&m.h_list, &rs);
                let name = format!("residual slope {amp:?} E={e:.6}");
                check_row(&mut report, name, slope, t.residual_slope, slope >= t.residual_slope);
            }
        }
        Suite::Calibration => {
            let found = calibrate_signs(&default_suite(h, 0.05)).map_err(solver("quantization"))?;
            let frozen = SignCalibration::default();
            let p = &found.provenance;
            for (name, s, f, note) in [
                ("sigma_gamma", found.sigma_gamma, frozen.sigma_gamma, &p.gamma),
                ("sigma_p1sq", found.sigma_p1sq, frozen.sigma_p1sq, &p.p1sq),
                ("sigma_p2", found.sigma_p2, frozen.sigma_p2, &p.p2),
            ] {
                check_row(&mut report, format!("{name}: {note}"), s, f, s == f);
            }
            report.meta.push((
                "calibrated".into(),
                serde_json::to_value(&found).expect("serializable"),
            ));
        }
        Suite::OracleCompare => {
            let spec = oracle_spectrum(&model, h, m.oracle_count, &m.oracle_options()).map_err(solver("oracle"))?;
            for n in m.levels() {
                let reference = spec.eigenvalues[n];
                // Ties are allowed within the oracle error bar plus the BS
                // level's own: the action error over T = dS/dE.
                let mut slack = spec.error_estimates[n];
                let mut errs = Vec::new();
                for o in 0..=2u8 {
                    let lvl = quantize(&model, h, n, o, &cal).map_err(solver("quantization"))?;
                    let series = action_series(&model, lvl.energy, &cal).map_err(solver("actions"))?;
                    let mut ds = lvl.bs_residual;
                    if o == 2 {
                        ds += h * h * (series.d2_gamma.error_estimate() / 48.0 + 0.5 * series.d_p1sq.error_estimate());
                    }
                    slack += ds / series.integrals.period;
                    errs.push((lvl.energy - reference).abs());
                }
                check_row(&mut report, format!("n={n} order2 vs oracle"), errs[2], t.oracle, errs[2] <= t.oracle);
                let excess = (errs[2] - errs[1]).max(errs[1] - errs[0]);
                check_row(&mut report, format!("n={n} order dominance"), excess, slack, excess <= slack);
            }
        }
    }
    if report.violations > 0 {
        report.meta.push(("violations".into(), json!(report.violations)));
    }
    Ok(report)
}

/// Errors below this are reported as exact in a sweep.
pub const EXACT: f64 = 1e-8;

pub fn cmd_sweep(m: &RunManifest) -> Result<Report, CliError> {
    if m.h_list.len() < 3 {
        return Err(CliError::Config(format!(
            "sweep needs at least 3 h values to fit an order, got {}",
            m.h_list.len()
        )));
    }
    if m.orders.len() != 1 {
        return Err(CliError::Config("sweep takes a single --order".into()));
    }
    let model = load_model(&m.config_path)?;
    let cal = load_calibration(&m.calibration)?;
    let order = m.orders[0];
    let mut report = Report::new(m, &["h", "n", "energy_bs", "energy_oracle", "error", "convergence_order"]);
    calibration_meta(&mut report, &cal);
    if let Some(band) = m.band {
        return sweep_band(m, &model, &cal, order, band, report);
    }
    let count = m.oracle_count;
    let mut errors: Vec<Vec<f64>> = vec![Vec::new(); count];
    for &h in &m.h_list {
        let spec = oracle_spectrum(&model, h, count, &m.oracle_options()).map_err(solver("oracle"))?;
        let bs = spectrum(&model, h, m.levels(), order, &cal).map_err(solver("quantization"))?;
        if let Some((n, why)) = bs.failures.first() {
            return Err(CliError::Solver {
                module: "quantization",
                message: format!("level {n} at h = {h}: {why}"),
            });
        }
        for lvl in &bs.entries {
            let err = (lvl.energy - spec.eigenvalues[lvl.n]).abs();
            errors[lvl.n].push(err);
            report.rows.push(sweep_row(h, lvl.n, lvl.energy, spec.eigenvalues[lvl.n]));
        }
    }
    for n in m.levels() {
        report.rows.push(fit_row(Cell::Int(n as i64), &m.h_list, &errors[n]));
    }
    Ok(report)
}

fn sweep_row(h: f64, n: usize, bs: f64, oracle: f64) -> Vec<Cell> {
    vec![
        Cell::Num(h),
        Cell::Int(n as i64),
        Cell::Num(bs),
        Cell::Num(oracle),
        Cell::Num((bs - oracle).abs()),
        Cell::Empty,
    ]
}

fn fit_row(label: Cell, hs: &[f64], errs: &[f64]) -> Vec<Cell> {
    let fit = if errs.iter().all(|&e| e < EXACT) {
        Cell::Text("exact".into())
    } else {
        Cell::Num(loglog_slope(hs, errs))
    };
    vec![
        Cell::Text("fit".into()),
        label,
        Cell::Empty,
        Cell::Empty,
        Cell::Num(errs.iter().copied().fold(0.0, f64::max)),
        fit,
    ]
}

/// Fixed level numbers drift through the spectrum as h shrinks; for symbols
/// homogeneous in (x, ξ) their error falls only like the level spacing. Here
/// each h contributes the worst error over the levels inside the energy band.
fn sweep_band(
    m: &RunManifest,
    model: &SymbolModel,
    cal: &SignCalibration,
    order: u8,
    band: (f64, f64),
    mut report: Report,
) -> Result<Report, CliError> {
    let mut worst = Vec::with_capacity(m.h_list.len());
    for &h in &m.h_list {
        let ns = levels_in_band(model, h, band).map_err(solver("quantization"))?;
        let spec = oracle_spectrum(model, h, ns.end() + 1, &m.oracle_options()).map_err(solver("oracle"))?;
        let bs = spectrum(model, h, ns, order, cal).map_err(solver("quantization"))?;
        if let Some((n, why)) = bs.failures.first() {
            return Err(CliError::Solver {
                module: "quantization",
                message: format!("level {n} at h = {h}: {why}"),
            });
        }
        let mut w: f64 = 0.0;
        let mut any = false;
        for lvl in bs.entries.iter().filter(|l| (band.0..=band.1).contains(&l.energy)) {
            let exact = spec.eigenvalues[lvl.n];
            w = w.max((lvl.energy - exact).abs());
            any = true;
            report.rows.push(sweep_row(h, lvl.n, lvl.energy, exact));
        }
        if !any {
            return Err(CliError::Config(format!("no level inside the band at h = {h}")));
        }
        worst.push(w);
    }
    report.rows.push(fit_row(Cell::Text("band".into()), &m.h_list, &worst));
    Ok(report)
}

/// Runs a parsed command line; returns the rendered output.
pub fn execute(cli: &Cli) -> Result<(RunManifest, Report), CliError> {
    let (manifest, report) = match &cli.command {
        Command::Spectrum(a) => {
            let m = RunManifest::from_args("spectrum", None, a)?;
            let r = cmd_spectrum(&m)?;
            (m, r)
        }
        Command::Verify { suite, run } => {
            let m = RunManifest::from_args("verify", Some(*suite), run)?;
            let r = cmd_verify(&m, *suite)?;
            (m, r)
        }
        Command::Sweep(a) => {
            let m = RunManifest::from_args("sweep", None, a)?;
            let r = cmd_sweep(&m)?;
            (m, r)
        }
    };
    Ok((manifest, report))
}

fn emit(m: &RunManifest, report: &Report) -> Result<(), CliError> {
    let text = match m.format {
        Format::Csv => report.to_csv(),
        Format::Json => report.to_json(),
    };
    match &m.out {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Entry point shared by the binary; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = execute(&cli).and_then(|(m, report)| {
        emit(&m, &report)?;
        if report.violations > 0 {
            Err(CliError::Violations(report.violations))
        } else {
            Ok(())
        }
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("bohrsom: {e}");
            e.exit_code()
        }
    }
}
