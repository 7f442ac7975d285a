mod common;

use std::time::Duration;

use common::mock_server::{MockServer, Reply};
use cote_core::builder::{example_id, ExampleMeta};
use cote_core::refiner::{RefineConfig, RefineSource, Refiner};
use cote_core::{CoTExample, Error, ExplanationKind, Split};

const KEY_VAR: &str = "COTE_REFINER_TEST_KEY";

fn config(server: &MockServer, cache: &std::path::Path) -> RefineConfig {
    std::env::set_var(KEY_VAR, "sk-test");
    RefineConfig {
        endpoint_url: server.url().to_string(),
        api_key_env_var: KEY_VAR.into(),
        cache_dir: cache.to_path_buf(),
        backoff_base: Duration::from_millis(1),
        max_retries: 3,
        ..Default::default()
    }
}

fn example(i: usize, explanation: &str) -> CoTExample {
    CoTExample {
        example_id: example_id(&format!("d{i:02}"), 1, "hotel-name"),
        input_text: format!("prompt {i}"),
        target_value: if explanation.is_empty() {
            "none".into()
        } else {
            format!("value {i}")
        },
        explanation: explanation.into(),
        explanation_kind: if explanation.is_empty() {
            ExplanationKind::None
        } else {
            ExplanationKind::Coarse
        },
        meta: ExampleMeta {
            dialogue_id: format!("d{i:02}"),
            split: Split::Train,
            query_turn: 1,
            slot_id: "hotel-name".into(),
            step_count: 1,
            dialogue_turns: 1,
            avg_utterance_len: 3.0,
        },
    }
}

#[test]
fn cache_hit_makes_no_request() {
    let server = MockServer::start();
    let cache = tempfile::tempdir().unwrap();
    let refiner = Refiner::new(config(&server, cache.path())).unwrap();
    let first = refiner
        .refine_one("system: The York is 5-star. user: Book it.")
        .unwrap();
    assert_eq!(first.source, RefineSource::Api);
    assert_eq!(first.refined, "The narrator says: The York is 5-star. Book it.");
    let second = refiner
        .refine_one("system: The York is 5-star. user: Book it.")
        .unwrap();
    assert_eq!(second.source, RefineSource::Cache);
    assert_eq!(second.refined, first.refined);
    assert_eq!(second.request_fingerprint, first.request_fingerprint);
    assert_eq!(server.requests(), 1);

    let cached = std::fs::read_to_string(cache.path().join(&first.request_fingerprint)).unwrap();
    assert_eq!(cached, first.refined);
}

#[test]
fn rate_limited_twice_then_success() {
    let server = MockServer::start();
    server.script([Reply::Status(429), Reply::Status(429)]);
    let cache = tempfile::tempdir().unwrap();
    let refiner = Refiner::new(config(&server, cache.path())).unwrap();
    let r = refiner.refine_one("system: a user: b").unwrap();
    assert_eq!(r.source, RefineSource::Api);
    assert_eq!(server.requests(), 3);
}

#[test]
fn retries_exhausted_is_network_error() {
    let server = MockServer::start();
    server.script(vec![Reply::Status(503); 4]);
    let cache = tempfile::tempdir().unwrap();
    let refiner = Refiner::new(config(&server, cache.path())).unwrap();
    assert!(matches!(
        refiner.refine_one("system: a user: b"),
        Err(Error::Network(_))
    ));
    assert_eq!(server.requests(), 4);
}

#[test]
fn rejected_key_is_not_retried() {
    let server = MockServer::start();
    server.script([Reply::Status(401)]);
    let cache = tempfile::tempdir().unwrap();
    let refiner = Refiner::new(config(&server, cache.path())).unwrap();
    assert!(matches!(refiner.refine_one("system: a user: b"), Err(Error::Auth(_))));
    assert_eq!(server.requests(), 1);
}

#[test]
fn empty_completion_is_not_cached() {
    let server = MockServer::start();
    server.script([Reply::Completion("  \n ".into())]);
    let cache = tempfile::tempdir().unwrap();
    let refiner = Refiner::new(config(&server, cache.path())).unwrap();
    assert!(matches!(
        refiner.refine_one("system: a user: b"),
        Err(Error::EmptyCompletion)
    ));
    assert_eq!(std::fs::read_dir(cache.path()).map(|d| d.count()).unwrap_or(0), 0);
    assert_eq!(
        refiner.refine_one("system: a user: b").unwrap().source,
        RefineSource::Api
    );
    assert_eq!(server.requests(), 2);
}

#[test]
fn request_body_and_auth() {
    let server = MockServer::start();
    let cache = tempfile::tempdir().unwrap();
    let cfg = config(&server, cache.path());
    let refiner = Refiner::new(cfg.clone()).unwrap();
    refiner.refine_one("system: a user: b").unwrap();
    let body = &server.bodies()[0];
    assert_eq!(body["model"], cfg.model_name.as_str());
    assert_eq!(body["temperature"], 0.0);
    assert_eq!(body["max_tokens"], cfg.max_tokens);
    assert_eq!(body["prompt"], cfg.render_prompt("system: a user: b").as_str());
    assert_eq!(server.auth_headers()[0], "Bearer sk-test");
}

#[test]
fn batch_respects_parallelism_and_order() {
    let server = MockServer::start();
    server.set_delay(Duration::from_millis(60));
    let cache = tempfile::tempdir().unwrap();
    let cfg = RefineConfig {
        max_parallel: 3,
        ..config(&server, cache.path())
    };
    let refiner = Refiner::new(cfg).unwrap();
    let input: Vec<_> = (0..10)
        .map(|i| example(i, &format!("system: q{i} user: a{i}")))
        .collect();
    let out = refiner.refine_batch(input.clone());
    assert!(out.is_complete());
    assert_eq!(server.requests(), 10);
    assert!(server.peak_in_flight() <= 3, "peak {}", server.peak_in_flight());
    let ids: Vec<_> = out.examples.iter().map(|e| &e.example_id).collect();
    let expected: Vec<_> = input.iter().map(|e| &e.example_id).collect();
    assert_eq!(ids, expected);
    for (e, i) in out.examples.iter().zip(0..) {
        assert_eq!(e.explanation_kind, ExplanationKind::Refined);
        assert_eq!(e.explanation, format!("The narrator says: q{i} a{i}"));
    }

    // Warm cache: nothing is sent, and refining the refined batch is a fixed point.
    let again = refiner.refine_batch(input);
    assert_eq!(server.requests(), 10);
    assert_eq!(again.examples, out.examples);
    let fixed = refiner.refine_batch(out.examples.clone());
    assert_eq!(fixed.examples, out.examples);
    assert_eq!(server.requests(), 10);
}

#[test]
fn duplicate_texts_are_refined_once_and_none_targets_pass_through() {
    let server = MockServer::start();
    let cache = tempfile::tempdir().unwrap();
    let refiner = Refiner::new(config(&server, cache.path())).unwrap();
    let input = vec![
        example(0, "system: x user: y"),
        example(1, ""),
        example(2, "system: x user: y"),
    ];
    let out = refiner.refine_batch(input.clone());
    assert_eq!(server.requests(), 1);
    assert_eq!(out.examples[1], input[1]);
    assert_eq!(out.examples[0].explanation, out.examples[2].explanation);
}

#[test]
fn partial_failure_keeps_item_unchanged() {
    let server = MockServer::start();
    server.script([Reply::Completion(" ".into())]);
    let cache = tempfile::tempdir().unwrap();
    let cfg = RefineConfig {
        max_parallel: 1,
        ..config(&server, cache.path())
    };
    let refiner = Refiner::new(cfg).unwrap();
    let input: Vec<_> = (0..3)
        .map(|i| example(i, &format!("system: q{i} user: a{i}")))
        .collect();
    let out = refiner.refine_batch(input.clone());
    assert_eq!(out.failures.len(), 1);
    assert_eq!(out.failures[0].example_id, input[0].example_id);
    assert_eq!(out.examples[0], input[0]);
    assert_eq!(out.examples[1].explanation_kind, ExplanationKind::Refined);
    assert_eq!(out.examples.len(), 3);
}

#[test]
fn selection_predicate_limits_refinement() {
    let server = MockServer::start();
    let cache = tempfile::tempdir().unwrap();
    let refiner = Refiner::new(config(&server, cache.path())).unwrap();
    let mut input: Vec<_> = (0..4)
        .map(|i| example(i, &format!("system: q{i} user: a{i}")))
        .collect();
    input[1].meta.split = Split::Test;
    let out = refiner.refine_batch_where(input.clone(), |e| e.meta.split == Split::Train);
    assert_eq!(server.requests(), 3);
    assert_eq!(out.examples[1], input[1]);
}
