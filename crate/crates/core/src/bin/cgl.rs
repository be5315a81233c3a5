fn main() {
    std::process::exit(cgl_core::cli::main_entry());
}
