fn main() {
    std::process::exit(commodity_slv::cli::main_with_args(std::env::args_os()));
}
