use std::time::Duration;

use ncode_core::rank::{LlmEndpointConfig, LlmRanker, RankError, Ranker};
use ncode_core::record::{ArchRecord, Direction, Measurement, Provenance};
use ncode_core::rng::indexed;
use ncode_core::testing::{StubReply, StubServer};
use ncode_core::NCode;

fn pool() -> Vec<NCode> {
    ["33513501", "63225362", "41625214"]
        .iter()
        .map(|s| s.parse().unwrap())
        .collect()
}

fn history() -> Vec<ArchRecord> {
    [("43212502", 89.47), ("03255564", 94.28)]
        .iter()
        .map(|&(c, v)| {
            ArchRecord::new(
                c.parse().unwrap(),
                Measurement::new(v, Direction::Maximize, Default::default()).unwrap(),
                Provenance::Seed,
            )
        })
        .collect()
}

fn ranker(server: &StubServer, retries: u32, timeout_ms: u64) -> LlmRanker {
    let mut cfg = LlmEndpointConfig::new(server.base_url(), "searcher-8b");
    cfg.max_retries = retries;
    cfg.timeout_secs = timeout_ms as f64 / 1000.0;
    LlmRanker::with_api_key(cfg, "secret".into()).unwrap()
}

#[test]
fn clean_reply_is_chosen() {
    let server = StubServer::constant(StubReply::Content("63225362".into()));
    let d = ranker(&server, 3, 2000)
        .rank(&history(), &pool(), &mut indexed(0, 0))
        .unwrap();
    assert_eq!(d.chosen.to_string(), "63225362");
    assert!(!d.fallback_used);
    assert_eq!(d.raw_reply.as_deref(), Some("63225362"));
    assert_eq!(server.requests().len(), 1);
}

#[test]
fn request_carries_rendered_prompt() {
    let server = StubServer::constant(StubReply::Content("63225362".into()));
    ranker(&server, 0, 2000)
        .rank(&history(), &pool(), &mut indexed(0, 0))
        .unwrap();
    let body: serde_json::Value = serde_json::from_str(&server.requests()[0]).unwrap();
    assert_eq!(body["model"], "searcher-8b");
    assert_eq!(body["temperature"], 0.0);
    let messages = body["messages"].as_array().unwrap();
    assert_eq!(messages.len(), 1);
    assert_eq!(messages[0]["role"], "user");
    let prompt = messages[0]["content"].as_str().unwrap();
    // History is rendered best first.
    let first = prompt.find("NCode: 03255564, accuracy: 94.28;").unwrap();
    let second = prompt.find("NCode: 43212502, accuracy: 89.47;").unwrap();
    assert!(first < second);
    assert!(prompt.ends_with("Candidate:\n33513501\n63225362\n41625214\n"));
}

#[test]
fn prose_reply_is_parsed() {
    let server = StubServer::constant(StubReply::Content("The best is 63225362.".into()));
    let d = ranker(&server, 3, 2000)
        .rank(&history(), &pool(), &mut indexed(0, 0))
        .unwrap();
    assert_eq!(d.chosen.to_string(), "63225362");
    assert!(!d.fallback_used);
}

#[test]
fn invalid_reply_falls_back_after_retries() {
    let server = StubServer::constant(StubReply::Content("12345678".into()));
    let d = ranker(&server, 2, 2000)
        .rank(&history(), &pool(), &mut indexed(0, 0))
        .unwrap();
    assert!(d.fallback_used);
    assert!(pool().contains(&d.chosen));
    assert_eq!(server.requests().len(), 3);
    assert_eq!(d.raw_reply.as_deref(), Some("12345678"));
}

#[test]
fn retry_recovers_after_bad_replies() {
    let server = StubServer::start(|i, _| match i {
        0 => StubReply::Status(500),
        1 => StubReply::Content("no idea".into()),
        _ => StubReply::Content("41625214".into()),
    });
    let d = ranker(&server, 3, 2000)
        .rank(&history(), &pool(), &mut indexed(0, 0))
        .unwrap();
    assert_eq!(d.chosen.to_string(), "41625214");
    assert!(!d.fallback_used);
    assert_eq!(server.requests().len(), 3);
}

#[test]
fn timeout_falls_back() {
    let server = StubServer::constant(StubReply::Delayed(Duration::from_millis(800), "63225362".into()));
    let d = ranker(&server, 1, 150)
        .rank(&history(), &pool(), &mut indexed(0, 0))
        .unwrap();
    assert!(d.fallback_used);
    assert!(pool().contains(&d.chosen));
}

#[test]
fn empty_pool_is_an_error() {
    let server = StubServer::constant(StubReply::Content("1".into()));
    assert!(matches!(
        ranker(&server, 0, 1000).rank(&history(), &[], &mut indexed(0, 0)),
        Err(RankError::EmptyCandidates)
    ));
}
