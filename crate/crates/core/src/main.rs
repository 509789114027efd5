fn main() {
    std::process::exit(acl_beam::cli::main_with_args(std::env::args_os()));
}
