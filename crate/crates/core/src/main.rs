fn main() {
    std::process::exit(gtpga::harness::cli_run(std::env::args_os()));
}
