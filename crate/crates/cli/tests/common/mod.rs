#![allow(dead_code)]

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::time::{Duration, Instant};

use bridge_core::transcript::read_transcript;

pub const BIN: &str = env!("CARGO_BIN_EXE_chatbridge");

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn chatbridge(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("run chatbridge")
}

/// Waits for `child` up to `limit`, killing it on timeout.
pub fn wait_for(mut child: Child, limit: Duration) -> Output {
    let start = Instant::now();
    loop {
        if child.try_wait().expect("poll child").is_some() {
            return child.wait_with_output().expect("collect output");
        }
        if start.elapsed() > limit {
            let _ = child.kill();
            let out = child.wait_with_output().expect("collect output");
            panic!("chatbridge timed out; stderr: {}", String::from_utf8_lossy(&out.stderr));
        }
        std::thread::sleep(Duration::from_millis(10));
    }
}

pub struct GoldenRun {
    /// Transcript re-serialized with timing fields zeroed.
    pub transcript: String,
    pub console: String,
    pub elapsed: Duration,
}

/// Runs `bridge --mock-inline` against a scripted `guest` in a fresh share
/// directory under `work`.
pub fn golden_session(work: &Path) -> GoldenRun {
    let start = Instant::now();
    let share = work.join("share");
    std::fs::create_dir_all(&share).unwrap();
    let transcript = work.join("transcript.jsonl");
    let share_s = share.to_str().unwrap();

    let bridge = Command::new(BIN)
        .args(["bridge", "--mock-inline", "--share-dir", share_s, "--poll-ms", "5", "--max-turns", "3"])
        .arg("--mock-fixture")
        .arg(fixture("mock_replies.json"))
        .arg("--transcript")
        .arg(&transcript)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("spawn bridge");

    let mut guest = Command::new(BIN)
        .args(["guest", "--share-dir", share_s, "--attempt-ms", "50", "--attempts", "100"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("spawn guest");
    let script = std::fs::read(fixture("guest_script.txt")).unwrap();
    guest.stdin.take().unwrap().write_all(&script).unwrap();

    let guest_out = wait_for(guest, Duration::from_secs(20));
    assert!(guest_out.status.success(), "guest failed: {}", String::from_utf8_lossy(&guest_out.stderr));
    let bridge_out = wait_for(bridge, Duration::from_secs(20));
    assert!(bridge_out.status.success(), "bridge failed: {}", String::from_utf8_lossy(&bridge_out.stderr));

    let text = std::fs::read_to_string(&transcript).unwrap();
    let mut masked = String::new();
    for entry in read_transcript(&text).unwrap() {
        masked.push_str(&serde_json::to_string(&entry.masked()).unwrap());
        masked.push('\n');
    }
    GoldenRun { transcript: masked, console: String::from_utf8(guest_out.stdout).unwrap(), elapsed: start.elapsed() }
}
