fn main() {
    std::process::exit(narrative_forecast::cli::dispatch(std::env::args_os()));
}
