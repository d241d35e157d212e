#![cfg(feature = "http")]

mod common;

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

use kgfuse::filter::{score_rules, FilterError, HttpNliScorer, NliRequest, NliScores};
use kgfuse::pipeline::{Pipeline, RunConfig, Stage, FILTERED_RULES_FILE};
use kgfuse::rules::RuleId;
use kgfuse::sentence::SentencePair;
use serde_json::Value;

/// Minimal HTTP server: answers every POST with `respond(body)`, one
/// connection per request. Returns the endpoint URL and the request log.
fn serve<F>(respond: F) -> (String, Arc<Mutex<Vec<Value>>>)
where
    F: Fn(&Value) -> (u16, String) + Send + 'static,
{
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/score", listener.local_addr().unwrap());
    let log = Arc::new(Mutex::new(Vec::new()));
    let seen = Arc::clone(&log);
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut length = 0;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap() == 0 || line == "\r\n" {
                    break;
                }
                if let Some((k, v)) = line.split_once(':') {
                    if k.eq_ignore_ascii_case("content-length") {
                        length = v.trim().parse().unwrap();
                    }
                }
            }
            let mut body = vec![0; length];
            reader.read_exact(&mut body).unwrap();
            let request: Value = serde_json::from_slice(&body).unwrap();
            let (status, reply) = respond(&request);
            seen.lock().unwrap().push(request);
            let _ = write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
                reply.len()
            );
        }
    });
    (url, log)
}

fn request(id: usize) -> NliRequest {
    NliRequest::new(
        RuleId(id),
        &SentencePair {
            premise: format!("premise {id}."),
            hypothesis: format!("hypothesis {id}."),
        },
    )
}

fn uniform(request: &Value) -> (u16, String) {
    let n = request.as_array().unwrap().len();
    let one = serde_json::to_value(NliScores::new(0.5, 0.3, 0.2)).unwrap();
    (200, serde_json::to_string(&vec![one; n]).unwrap())
}

#[test]
fn batches_are_posted_as_json_arrays() {
    let (url, log) = serve(uniform);
    let scorer = HttpNliScorer::new(url);
    let requests: Vec<NliRequest> = (0..5).map(request).collect();
    let table = score_rules(&scorer, &requests, 2).unwrap();
    assert_eq!(table.len(), 5);
    assert_eq!(table.get(RuleId(4)), Some(&NliScores::new(0.5, 0.3, 0.2)));
    let log = log.lock().unwrap();
    let sizes: Vec<usize> = log.iter().map(|b| b.as_array().unwrap().len()).collect();
    assert_eq!(sizes, [2, 2, 1]);
    assert_eq!(log[0][1]["rule_id"], 1);
    assert_eq!(log[0][1]["premise"], "premise 1.");
    assert_eq!(log[0][1]["hypothesis"], "hypothesis 1.");
}

#[test]
fn server_error_surfaces() {
    let (url, _) = serve(|_| (500, "{}".into()));
    let err = score_rules(&HttpNliScorer::new(url), &[request(0)], 8).unwrap_err();
    assert!(matches!(err, FilterError::Scorer(_)), "{err:?}");
}

#[test]
fn wrong_result_count_is_rejected() {
    let (url, _) = serve(|_| (200, "[]".into()));
    let err = score_rules(&HttpNliScorer::new(url), &[request(0)], 8).unwrap_err();
    assert!(matches!(err, FilterError::Scorer(_)), "{err:?}");
}

#[test]
fn invalid_probabilities_are_rejected() {
    let (url, _) = serve(|_| (200, r#"[{"entailment":0.9,"neutral":0.9,"contradiction":0.9}]"#.into()));
    let err = score_rules(&HttpNliScorer::new(url), &[request(0)], 8).unwrap_err();
    assert!(matches!(err, FilterError::BadProbabilities { .. }), "{err:?}");
}

#[test]
fn filter_stage_can_use_a_scorer_endpoint() {
    // the service contradicts every rule whose premise involves a friendship
    let (url, log) = serve(|req| {
        let scores: Vec<NliScores> = req
            .as_array()
            .unwrap()
            .iter()
            .map(|r| {
                if r["premise"].as_str().unwrap().contains("friend") {
                    NliScores::new(0.05, 0.15, 0.8)
                } else {
                    NliScores::new(0.8, 0.15, 0.05)
                }
            })
            .collect();
        (200, serde_json::to_string(&scores).unwrap())
    });
    let dir = tempfile::tempdir().unwrap();
    let mut c = RunConfig::load(&common::fixture("config.toml")).unwrap();
    c.output.dir = Some(dir.path().to_path_buf());
    c.filter.nli = None;
    c.filter.nli_endpoint = Some(url);
    let p = Pipeline::new(c).unwrap();
    p.run(Stage::Ingest).unwrap();
    p.run(Stage::Filter).unwrap();
    let kept = std::fs::read_to_string(p.out_path(FILTERED_RULES_FILE)).unwrap();
    assert_eq!(kept.lines().count(), 4);
    assert!(!kept.contains("friend"));
    // only the two rules of the filtered relation were sent
    let ids: Vec<u64> = log.lock().unwrap()[0]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["rule_id"].as_u64().unwrap())
        .collect();
    assert_eq!(ids, [0, 4]);
}
