fn main() {
    std::process::exit(sharecache_cli::main_with_args(std::env::args_os()));
}
