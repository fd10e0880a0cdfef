fn main() {
    std::process::exit(plan_cl::cli::main_with_args(std::env::args_os()));
}
