use std::process;

fn main() {
    process::exit(cluster_sig::cli::run_from(std::env::args()));
}
