fn main() {
    std::process::exit(hemiwidth_cli::app::run(std::env::args_os()));
}
