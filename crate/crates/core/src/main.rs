fn main() {
    std::process::exit(snrsel::cli::run(std::env::args_os()));
}
