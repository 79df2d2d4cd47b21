//! The remote client against a scripted local HTTP server.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::thread;

use cfprobe_core::cf_gen::{generate_pairs, CounterfactualPair, Problem};
use cfprobe_core::datasets::{ingest, DatasetFormat};
use cfprobe_core::harness::{evaluate, EndpointError, EndpointKind, EvalSettings, ModelEndpoint, RecordStore, Sandbox, SandboxPolicy, Side};
use cfprobe_core::mutations::MutationKind;
use serde_json::{json, Value};

#[derive(Debug, Clone)]
struct Seen {
    auth: Option<String>,
    body: Value,
}

/// Serves requests on a background thread. `respond` maps the request
/// number and body to (status, body).
fn serve<F>(respond: F) -> (String, Arc<Mutex<Vec<Seen>>>)
where
    F: Fn(usize, &Value) -> (u16, String) + Send + 'static,
{
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/completions", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    thread::spawn(move || {
        for (n, stream) in listener.incoming().enumerate() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0usize;
            let mut auth = None;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
                let lower = line.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                if lower.starts_with("authorization:") {
                    auth = Some(line["authorization:".len()..].trim().to_string());
                }
            }
            let mut body = vec![0u8; len];
            reader.read_exact(&mut body).unwrap();
            let body: Value = serde_json::from_slice(&body).unwrap_or(Value::Null);
            let (status, text) = respond(n, &body);
            log.lock().unwrap().push(Seen { auth, body });
            let resp = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
                text.len()
            );
            let _ = stream.write_all(resp.as_bytes());
        }
    });
    (url, seen)
}

fn remote(url: &str) -> ModelEndpoint {
    ModelEndpoint {
        name: "mock".into(),
        kind: EndpointKind::Remote,
        url: Some(url.into()),
        max_retries: 2,
        timeout_s: 10.0,
        ..ModelEndpoint::default()
    }
}

fn data(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn fixture_pairs() -> (Sandbox, Vec<Problem>, Vec<CounterfactualPair>) {
    let sb = Sandbox::new(SandboxPolicy::default());
    let problems = ingest(&data("mbpp_sample.jsonl"), DatasetFormat::Mbpp, Some(&sb), None).unwrap().problems;
    let g = generate_pairs(&sb, &problems, &MutationKind::ALL, 3);
    assert!(!g.pairs.is_empty());
    (sb, problems, g.pairs)
}

#[test]
fn retries_rate_limits_and_sends_the_prompt() {
    let (_, _, pairs) = fixture_pairs();
    let (url, seen) = serve(|n, _| match n {
        0 => (429, "{}".into()),
        1 => (503, "{}".into()),
        _ => (200, json!({"choices": [{"text": "    return 1\n"}]}).to_string()),
    });
    std::env::set_var("CFPROBE_TEST_TOKEN", "sekret");
    let ep = ModelEndpoint {
        token_env: Some("CFPROBE_TEST_TOKEN".into()),
        model: Some("m-1".into()),
        ..remote(&url)
    };
    let c = ep.complete(None, &pairs[0], Side::Mutated).unwrap();
    assert_eq!(c.text, "    return 1\n");
    let seen = seen.lock().unwrap().clone();
    assert_eq!(seen.len(), 3);
    let last = &seen[2];
    assert_eq!(last.auth.as_deref(), Some("Bearer sekret"));
    assert_eq!(last.body["prompt"], pairs[0].prefix_mutated.as_str());
    assert_eq!(last.body["temperature"], 0.0);
    assert_eq!(last.body["max_tokens"], 512);
    assert_eq!(last.body["model"], "m-1");
}

#[test]
fn client_errors_fail_fast_and_retries_are_bounded() {
    let (_, _, pairs) = fixture_pairs();
    let (url, seen) = serve(|_, _| (400, "{}".into()));
    let err = remote(&url).complete(None, &pairs[0], Side::Original).unwrap_err();
    assert!(matches!(err, EndpointError::Exhausted { attempts: 1, .. }), "{err}");
    assert_eq!(seen.lock().unwrap().len(), 1);

    let (url, seen) = serve(|_, _| (500, "{}".into()));
    let err = remote(&url).complete(None, &pairs[0], Side::Original).unwrap_err();
    assert!(matches!(err, EndpointError::Exhausted { attempts: 3, .. }), "{err}");
    assert_eq!(seen.lock().unwrap().len(), 3);

    let (url, _) = serve(|_, _| (200, json!({"unexpected": true}).to_string()));
    assert!(matches!(remote(&url).complete(None, &pairs[0], Side::Original), Err(EndpointError::Schema(_))));

    let ep = ModelEndpoint {
        token_env: Some("CFPROBE_TEST_UNSET_TOKEN".into()),
        ..remote("http://127.0.0.1:9/")
    };
    assert!(matches!(ep.complete(None, &pairs[0], Side::Original), Err(EndpointError::Config(_))));
}

/// A server that answers every prompt with the true continuation of that
/// side scores like the perfect oracle.
#[test]
fn remote_pipeline_matches_the_perfect_oracle() {
    let (sb, problems, pairs) = fixture_pairs();
    let mut answers: BTreeMap<String, String> = BTreeMap::new();
    for p in &pairs {
        answers.insert(p.prefix_original.clone(), p.suffix_original.clone());
        answers.insert(p.prefix_mutated.clone(), p.suffix_mutated.clone());
    }
    let (url, seen) = serve(move |_, body| {
        let text = answers.get(body["prompt"].as_str().unwrap_or("")).cloned().unwrap_or_default();
        (200, json!({"choices": [{"message": {"content": text}}]}).to_string())
    });
    let by_id: BTreeMap<String, Problem> = problems.into_iter().map(|p| (p.id.clone(), p)).collect();
    let dir = tempfile::tempdir().unwrap();
    let settings = EvalSettings {
        repeat: 1,
        stop_markers: Vec::new(),
        config_hash: "h".into(),
        seed: 3,
    };
    let store = RecordStore::open(dir.path().join("completions.jsonl")).unwrap();
    let out = evaluate(&pairs, &by_id, &remote(&url), &sb, &store, &settings).unwrap();
    assert!(out.failed.is_empty() && out.indeterminate.is_empty());
    assert_eq!(out.effects.len(), pairs.len());
    assert!(out.effects.iter().all(|e| e.a_original == 1 && e.a_mutated == 1 && e.me == 0));
    assert_eq!(seen.lock().unwrap().len(), 2 * pairs.len());

    // Resuming from the store sends nothing new.
    let store = RecordStore::open(dir.path().join("completions.jsonl")).unwrap();
    let again = evaluate(&pairs, &by_id, &remote(&url), &sb, &store, &settings).unwrap();
    assert_eq!(again.effects, out.effects);
    assert_eq!(seen.lock().unwrap().len(), 2 * pairs.len());
}
