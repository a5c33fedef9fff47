fn main() {
    std::process::exit(evdrive_cli::run(std::env::args_os()));
}
