//! Helpers shared by the command-line test suites: fixture CSV writers,
//! binary invocation, JSON flattening, and daemon lifecycle guards.
#![allow(dead_code)] // each test binary uses its own subset

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// The compiled `ppkm` binary, with the seed environment variable scrubbed
/// so an outer environment cannot leak into a test.
pub fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ppkm"));
    cmd.env_remove("PPKM_SEED");
    cmd
}

/// Runs the binary and panics on spawn failure (not on non-zero exit).
pub fn run_cli(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary spawns")
}

pub fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("process exited normally")
}

pub fn stdout_str(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("stdout is UTF-8")
}

pub fn stderr_str(output: &Output) -> String {
    String::from_utf8(output.stderr.clone()).expect("stderr is UTF-8")
}

pub fn stdout_json(output: &Output) -> serde_json::Value {
    serde_json::from_str(&stdout_str(output)).unwrap_or_else(|err| {
        panic!(
            "stdout is not JSON ({err}); stdout: {} stderr: {}",
            stdout_str(output),
            stderr_str(output)
        )
    })
}

pub fn read_json(path: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(path)
        .unwrap_or_else(|err| panic!("read {}: {err}", path.display()));
    serde_json::from_str(&text)
        .unwrap_or_else(|err| panic!("parse {}: {err}", path.display()))
}

/// Writes well-separated blob data as a headerless coordinate CSV and
/// returns the path. Full-precision formatting keeps the parsed values
/// bit-identical to the generated ones.
pub fn write_blob_csv(dir: &Path, name: &str, seed: u64, n: usize, d: usize, blobs: usize) -> PathBuf {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let cores: Vec<Vec<f64>> = (0..blobs)
        .map(|b| (0..d).map(|_| 20.0 * b as f64 + rng.gen_range(2.0..6.0)).collect())
        .collect();
    let mut text = String::new();
    for i in 0..n {
        let core = &cores[i % blobs];
        let row: Vec<String> =
            core.iter().map(|c| format!("{:?}", c + rng.gen_range(-1.0..1.0))).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    let path = dir.join(name);
    std::fs::write(&path, text).expect("fixture written");
    path
}

/// Flattens a JSON document to sorted leaf key paths: object keys join with
/// `.`, arrays contribute `[]` and descend into their first element.
pub fn flatten_keys(value: &serde_json::Value) -> Vec<String> {
    fn walk(value: &serde_json::Value, prefix: &str, out: &mut Vec<String>) {
        match value {
            serde_json::Value::Object(map) => {
                for (key, child) in map {
                    let path =
                        if prefix.is_empty() { key.clone() } else { format!("{prefix}.{key}") };
                    walk(child, &path, out);
                }
            }
            serde_json::Value::Array(items) => {
                let path = format!("{prefix}[]");
                match items.first() {
                    Some(first) => walk(first, &path, out),
                    None => out.push(path),
                }
            }
            _ => out.push(prefix.to_string()),
        }
    }
    let mut out = Vec::new();
    walk(value, "", &mut out);
    out.sort();
    out
}

/// A spawned `serve` daemon; killed (and reaped) on drop so a failing test
/// cannot leak listeners.
pub struct Daemon {
    child: Child,
    pub addr: String,
}

impl Daemon {
    /// Starts `ppkm serve` for `role` on an OS-assigned port and reads the
    /// bound address off the daemon's first stdout line.
    pub fn spawn(role: &str) -> Daemon {
        let mut child = bin()
            .args(["serve", "--role", role, "--listen", "127.0.0.1:0"])
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .expect("daemon spawns");
        let stdout = child.stdout.take().expect("stdout piped");
        let mut line = String::new();
        BufReader::new(stdout).read_line(&mut line).expect("daemon announces its address");
        let addr = line
            .strip_prefix("listening ")
            .unwrap_or_else(|| panic!("unexpected announcement {line:?}"))
            .trim()
            .to_string();
        Daemon { child, addr }
    }
}

impl Drop for Daemon {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
