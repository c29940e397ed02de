fn main() {
    fharm_core::cli::main()
}
