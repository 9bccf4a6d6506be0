fn main() {
    std::process::exit(phytoagg::cli::main_with_args(std::env::args_os()));
}
