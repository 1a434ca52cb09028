#![allow(dead_code)]

use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

pub fn gripcast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gripcast"))
        .args(args)
        .output()
        .expect("failed to launch gripcast")
}

pub fn gripcast_stdin(args: &[&str], input: &[u8]) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_gripcast"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("failed to launch gripcast");
    let mut stdin = child.stdin.take().unwrap();
    let data = input.to_vec();
    let writer = std::thread::spawn(move || stdin.write_all(&data));
    let out = child.wait_with_output().unwrap();
    writer.join().unwrap().unwrap();
    out
}

pub fn ok(out: &Output) -> &Output {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Parses one forecast line of `stream` output: `t_ms,g1,...,g70`.
pub fn parse_stream_line(line: &str) -> (f64, Vec<f64>) {
    let mut it = line.split(',').map(|v| v.parse::<f64>().unwrap());
    let t = it.next().unwrap();
    (t, it.collect())
}
