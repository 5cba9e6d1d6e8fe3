fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CSRL_LOG", "warn")).init();
    std::process::exit(csrl_core::harness::cli::main_with_args(std::env::args_os()));
}
