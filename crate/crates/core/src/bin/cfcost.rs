fn main() {
    std::process::exit(cfcost::cli::main_with_args(std::env::args_os()));
}
