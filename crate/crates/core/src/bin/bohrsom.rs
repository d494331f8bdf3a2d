fn main() {
    std::process::exit(bohrsom::cli::run(std::env::args_os()));
}
