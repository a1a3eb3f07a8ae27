//! The quick examples run to completion (cargo builds them for `cargo test`).

use std::path::PathBuf;
use std::process::Command;

fn example_binary(name: &str) -> Option<PathBuf> {
    // target/<profile>/deps/<this test> → target/<profile>/examples/<name>
    let exe = std::env::current_exe().ok()?;
    let path = exe.parent()?.parent()?.join("examples").join(name);
    path.exists().then_some(path)
}

#[test]
fn quick_examples_run() {
    for (name, needle) in [("bessel", "wronskian"), ("graf_translation", "translation error")] {
        let Some(bin) = example_binary(name) else {
            eprintln!("example {name} not built; skipping");
            continue;
        };
        let out = Command::new(&bin).output().unwrap();
        assert!(out.status.success(), "{name} failed");
        assert!(String::from_utf8_lossy(&out.stdout).contains(needle));
    }
}
