fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    std::process::exit(polar_scf::shell::run_cli(&args));
}
