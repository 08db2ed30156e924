fn main() {
    std::process::exit(jdisk::cli::main_with_args(std::env::args_os()));
}
