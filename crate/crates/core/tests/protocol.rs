// SPDX-License-Identifier: Apache-2.0

mod common;

use std::path::PathBuf;
use std::time::Duration;

use common::{script, PATH_SCORER};
use forgebench::error::Error;
use forgebench::scorer::ScorerProcess;

const T: Duration = Duration::from_secs(10);

fn spawn(body: &str) -> (tempfile::TempDir, forgebench::Result<ScorerProcess>) {
    let dir = tempfile::tempdir().unwrap();
    let s = script(dir.path(), "scorer.sh", body);
    let p = ScorerProcess::spawn(&format!("sh {}", s.display()), T);
    (dir, p)
}

fn frames(names: &[&str]) -> Vec<PathBuf> {
    names.iter().map(|n| PathBuf::from(format!("/data/{n}/000000.png"))).collect()
}

#[test]
fn well_behaved_scorer() {
    let (_d, p) = spawn(PATH_SCORER);
    let mut p = p.unwrap();
    assert_eq!(p.name(), "path-scorer");
    let s = p.score_frames("7", &frames(&["fake_001", "real_002", "fake_003"])).unwrap();
    assert_eq!(s, vec![0.9, 0.1, 0.9]);
    assert_eq!(p.score_frames("8", &frames(&["real_000"])).unwrap(), vec![0.1]);
    p.close().unwrap();
}

#[test]
fn bad_handshake() {
    let (_d, p) = spawn("read l; echo 'HI there'; sleep 5\n");
    assert!(matches!(p, Err(Error::Protocol { .. })), "{p:?}");
}

#[test]
fn missing_program() {
    let err = ScorerProcess::spawn("/nonexistent/scorer --x", T).unwrap_err();
    assert!(matches!(err, Error::ToolNotFound { .. }), "{err}");
}

fn one_request(reply: &str) -> forgebench::Error {
    let body = format!("read l; echo 'READY m'; read v; read f1; read f2; printf '{reply}'; sleep 5\n");
    let (_d, p) = spawn(&body);
    let mut p = p.unwrap();
    p.score_frames("1", &frames(&["a", "b"])).unwrap_err()
}

#[test]
fn wrong_count_is_rejected() {
    let e = one_request("SCORES 1 1\\nS 0.5\\n");
    assert!(e.to_string().contains("count mismatch"), "{e}");
}

#[test]
fn wrong_request_id_is_rejected() {
    let e = one_request("SCORES 2 2\\nS 0.5\\nS 0.5\\n");
    assert!(e.to_string().contains("request id"), "{e}");
}

#[test]
fn out_of_range_and_malformed_scores() {
    for reply in ["SCORES 1 2\\nS 1.5\\nS 0.5\\n", "SCORES 1 2\\nS nan\\nS 0.5\\n", "SCORES 1 2\\nS 0,5\\nS 0.5\\n"] {
        let e = one_request(reply);
        assert!(matches!(e, Error::Protocol { .. }), "{reply}: {e}");
    }
}

#[test]
fn scorer_side_error_is_fatal() {
    let e = one_request("ERR model failed\\n");
    assert!(matches!(e, Error::Protocol { .. }), "{e}");
}

#[test]
fn crash_reports_stderr() {
    let (_d, p) = spawn("read l; echo 'READY m'; read v; echo 'CUDA out of memory' >&2; exit 9\n");
    let e = p.unwrap().score_frames("1", &frames(&["a"])).unwrap_err();
    let msg = e.to_string();
    assert!(msg.contains("crashed") && msg.contains("CUDA out of memory"), "{msg}");
}

#[test]
fn silent_scorer_times_out() {
    let dir = tempfile::tempdir().unwrap();
    let s = script(dir.path(), "s.sh", "read l; echo 'READY m'; sleep 30\n");
    let mut p = ScorerProcess::spawn(&format!("sh {}", s.display()), Duration::from_millis(300)).unwrap();
    let start = std::time::Instant::now();
    let e = p.score_frames("1", &frames(&["a"])).unwrap_err();
    assert!(e.to_string().contains("did not answer"), "{e}");
    assert!(start.elapsed() < Duration::from_secs(5));
}

#[test]
fn nonzero_exit_after_bye() {
    let (_d, p) = spawn("read l; echo 'READY m'; read bye; exit 2\n");
    assert!(p.unwrap().close().is_err());
}

#[test]
fn request_id_must_be_a_token() {
    let (_d, p) = spawn(PATH_SCORER);
    let mut p = p.unwrap();
    assert!(matches!(p.score_frames("a b", &frames(&["x"])), Err(Error::InvalidArgument(_))));
}
