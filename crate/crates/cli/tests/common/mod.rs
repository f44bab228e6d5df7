#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use combtrack_cli::{run, EXIT_OK};

/// Fresh scratch directory under cargo's per-target temp dir.
pub fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

pub fn combtrack(args: &[&str]) -> i32 {
    run(std::iter::once("combtrack").chain(args.iter().copied()))
}

pub fn ok(args: &[&str]) {
    assert_eq!(combtrack(args), EXIT_OK, "combtrack {}", args.join(" "));
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Every file below `root` except run manifests, keyed by relative path.
pub fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else if path.file_name().unwrap() != combtrack_cli::RUN_MANIFEST {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

/// Small simulated dataset: 2 sequences of 6 frames at 128 x 128.
pub fn tiny_dataset(out: &Path, seed: u64) {
    let seed = seed.to_string();
    ok(&[
        "simulate", "--out", s(out), "--seed", &seed, "--sequences", "2", "--frames", "6", "--agents", "3",
        "--width", "128", "--height", "128", "--min-separation", "50",
    ]);
}

pub fn tiny_train(data: &Path, out: &Path, mode: &str, extra: &[&str]) {
    let mut args = vec![
        "train", "--data", s(data), "--out", s(out), "--mode", mode, "--epochs", "2", "--base", "2", "--depth",
        "2", "--crop", "64", "--batch", "2", "--seed", "3",
    ];
    args.extend_from_slice(extra);
    ok(&args);
}
