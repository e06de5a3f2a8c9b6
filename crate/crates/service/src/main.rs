fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("VOCALIZE_LOG", "info")).init();
    let code = vocalize_service::cli::run(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code);
}
