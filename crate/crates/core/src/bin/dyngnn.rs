fn main() {
    std::process::exit(dyngnn::cli::main_with_args(std::env::args_os()));
}
