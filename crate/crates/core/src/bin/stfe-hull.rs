fn main() {
    std::process::exit(stfe_hull::cli::run(std::env::args_os()));
}
