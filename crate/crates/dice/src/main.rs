fn main() {
    let code = dice_rl::cli::main_with_args(std::env::args_os().skip(1), &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code);
}
