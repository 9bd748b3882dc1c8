//! Runs the command-line front end in-process: the DtN map of v = 0 at E = −1, written to a temporary directory.
//!
//! cargo run --release --example cli_dtn

fn main() {
    let dir = std::env::temp_dir().join("dbarlab-cli-example");
    let out = dir.to_string_lossy().to_string();
    let code = dbarlab::cli::run(["dbarlab", "dtn", "--zero-potential", "-E", "-1", "--no-stamp", "--out", &out]);
    println!("exit code {code}");
    if let Ok(text) = std::fs::read_to_string(dir.join("dtn.csv")) {
        let row = text.lines().find(|l| l.starts_with("0,0,")).unwrap_or("");
        println!("n = 0 diagonal row: {row}");
    }
}
