fn main() {
    std::process::exit(riesz_dre_cli::run(std::env::args_os()));
}
