fn main() {
    std::process::exit(ppsv::cli::main_exit_code());
}
