fn main() {
    std::process::exit(negf_spectra::io::run(std::env::args_os()));
}
