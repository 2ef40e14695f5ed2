fn main() {
    std::process::exit(chemotax::run(std::env::args_os()));
}
