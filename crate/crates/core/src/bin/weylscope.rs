use clap::Parser;
use weylscope::cli_report::{run, thread_cap, Cli};

fn main() {
    let cli = Cli::parse();
    if let Some(n) = thread_cap() {
        // Only fails if a global pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    std::process::exit(run(&cli));
}
