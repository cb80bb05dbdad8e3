fn main() {
    std::process::exit(vqa_logic::cli::run(std::env::args_os()));
}
