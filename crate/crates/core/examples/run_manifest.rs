//! Drives the CLI in-process and checks the manifest it writes.

fn main() {
    let out = std::env::temp_dir().join("bgcoh-example-run");
    let dir = out.to_str().expect("utf-8 temp path");
    let code = bgcoh::cli::run(["bgcoh", "index", "--weights", "2,3", "--m", "0..12", "--out", dir]);
    assert_eq!(code, 0);
    print!("{}", std::fs::read_to_string(out.join("index.csv")).expect("index.csv"));
    assert_eq!(bgcoh::cli::run(["bgcoh", "verify-manifest", dir]), 0);
}
