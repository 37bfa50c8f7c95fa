fn main() {
    std::process::exit(bmgrw_cli::dispatch(std::env::args_os()) as i32);
}
