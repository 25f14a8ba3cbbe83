//! Remote clients against a throwaway local HTTP server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};

use feclust::corpus::{ExtractorClient, Review, Source};
use feclust::embed::{embed_texts, hashing_embed, EmbedOptions, EmbeddingProvider, RemoteEmbedder};
use feclust::http::RetryPolicy;
use feclust::pipeline::{run_pipeline, EmbeddingMode, ExtractorSpec, PipelineConfig, API_KEY_ENV};
use feclust::taxonomy::{ChatLabeler, Labeler, LabelerConfig, LabelerMode};
use serde_json::{json, Value};

#[derive(Debug, Clone)]
struct Seen {
    path: String,
    auth: Option<String>,
    body: Value,
}

type Handler = dyn Fn(&str, &Value, usize) -> (u16, String) + Send + Sync;

/// Serve forever on an ephemeral port; one request per connection. The
/// handler gets the path, the JSON body and the running request count.
fn serve(handler: Box<Handler>) -> (String, Arc<Mutex<Vec<Seen>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = format!("http://{}", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let mut stream = stream.unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            let path = line.split_whitespace().nth(1).unwrap_or("/").to_string();
            let (mut len, mut auth) = (0usize, None);
            loop {
                let mut h = String::new();
                reader.read_line(&mut h).unwrap();
                let h = h.trim_end();
                if h.is_empty() {
                    break;
                }
                let (k, v) = h.split_once(':').unwrap();
                match k.to_ascii_lowercase().as_str() {
                    "content-length" => len = v.trim().parse().unwrap(),
                    "authorization" => auth = Some(v.trim().to_string()),
                    _ => {}
                }
            }
            let mut buf = vec![0u8; len];
            reader.read_exact(&mut buf).unwrap();
            let body: Value = serde_json::from_slice(&buf).unwrap_or(Value::Null);
            let n = {
                let mut l = log.lock().unwrap();
                l.push(Seen {
                    path: path.clone(),
                    auth,
                    body: body.clone(),
                });
                l.len()
            };
            let (status, out) = handler(&path, &body, n);
            let reply = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{out}",
                out.len()
            );
            let _ = stream.write_all(reply.as_bytes());
        }
    });
    (addr, seen)
}

fn fast_retry() -> RetryPolicy {
    RetryPolicy {
        max_retries: 2,
        base_delay: std::time::Duration::from_millis(1),
        max_delay: std::time::Duration::from_millis(5),
    }
}

fn reviews(n: usize) -> Vec<Review> {
    (0..n)
        .map(|i| Review {
            review_id: format!("r{i}"),
            app_id: "app".into(),
            body: format!("the dark mode is great {i}"),
            submitted_at: None,
        })
        .collect()
}

/// Echo one feature per review: the first three words of its text.
fn extract_reply(body: &Value) -> String {
    let feats: Vec<Value> = body["reviews"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| {
            let words: Vec<&str> = r["text"].as_str().unwrap().split_whitespace().skip(1).take(2).collect();
            json!({"review_id": r["id"], "text": words.join(" ")})
        })
        .collect();
    json!({ "features": feats }).to_string()
}

#[test]
fn extractor_batches_and_collects() {
    let (url, seen) = serve(Box::new(|_, body, _| (200, extract_reply(body))));
    let client = ExtractorClient::new(url, Source::Llm, RetryPolicy::none()).with_batch_size(2);
    let out = client.fetch(&reviews(5));
    assert!(out.is_complete(), "{:?}", out.failed);
    assert_eq!(seen.lock().unwrap().len(), 3);
    let by = out.features.by_review();
    assert_eq!(by.len(), 5);
    assert!(by.iter().all(|(_, fs)| fs.len() == 1 && fs[0].surface() == "dark mode"));
}

#[test]
fn extractor_reports_failed_batches() {
    let (url, _) = serve(Box::new(|_, body, _| {
        if body["reviews"][0]["id"] == "r0" {
            (500, "{}".into())
        } else {
            (200, extract_reply(body))
        }
    }));
    let client = ExtractorClient::new(url, Source::Syntactic, RetryPolicy::none()).with_batch_size(2);
    let out = client.fetch(&reviews(4));
    assert_eq!(out.failed.len(), 1);
    assert_eq!(out.failed[0].review_ids, vec!["r0", "r1"]);
    assert_eq!(out.features.by_review().len(), 2);
}

#[test]
fn embedder_retries_and_reorders() {
    let (url, seen) = serve(Box::new(|_, body, n| {
        if n == 1 {
            return (503, "busy".into());
        }
        let input = body["input"].as_array().unwrap();
        let data: Vec<Value> = input
            .iter()
            .enumerate()
            .rev()
            .map(|(i, t)| json!({"index": i, "embedding": hashing_embed(t.as_str().unwrap(), 16, 0)}))
            .collect();
        (200, json!({ "data": data }).to_string())
    }));
    let e = RemoteEmbedder::new(format!("{url}/v1/embeddings"), "mini", Some("k3y".into()), fast_retry());
    assert_eq!(e.tag(), "remote:mini");
    let texts = vec!["dark mode".to_string(), "voice input".to_string(), "sync".to_string()];
    let rows = embed_texts(&e, &texts, EmbedOptions::default()).unwrap();
    for (t, r) in texts.iter().zip(&rows) {
        let want = hashing_embed(t, 16, 0);
        assert!(r.iter().zip(&want).all(|(a, b)| (a - b).abs() < 1e-12));
    }
    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 2);
    assert_eq!(seen[1].auth.as_deref(), Some("Bearer k3y"));
    assert_eq!(seen[1].body["model"], "mini");
    assert_eq!(seen[1].path, "/v1/embeddings");
}

#[test]
fn embedder_gives_up_on_bad_payload() {
    let (url, seen) = serve(Box::new(|_, _, _| (200, r#"{"data":[]}"#.into())));
    let e = RemoteEmbedder::new(url, "mini", None, fast_retry());
    assert!(embed_texts(&e, &["x".to_string()], EmbedOptions::default()).is_err());
    // Malformed bodies are not retried.
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn chat_labeler_prompt_and_cleanup() {
    let (url, seen) = serve(Box::new(|_, _, _| {
        (200, json!({"choices": [{"message": {"role": "assistant", "content": "Label: \"Dark Mode\".\nextra"}}]}).to_string())
    }));
    let cfg = LabelerConfig {
        mode: LabelerMode::RemoteLlm,
        endpoint: Some(url),
        ..LabelerConfig::default()
    };
    let l = ChatLabeler::new(&cfg, Some("s3cret".into()), RetryPolicy::none()).unwrap();
    let out = l.label(&["dark theme", "night mode"]);
    assert_eq!(out.label, "dark mode");
    assert!(out.fallback.is_none());
    let seen = seen.lock().unwrap();
    let body = &seen[0].body;
    assert_eq!(body["temperature"], 0.0);
    let msgs = body["messages"].as_array().unwrap();
    assert_eq!(msgs.len(), 2 + 2 * cfg.few_shot.len());
    assert_eq!(msgs.last().unwrap()["content"], "Features: dark theme, night mode");
    assert_eq!(seen[0].auth.as_deref(), Some("Bearer s3cret"));
}

#[test]
fn chat_labeler_falls_back_on_garbage() {
    let (url, _) = serve(Box::new(|_, _, _| (200, r#"{"choices":[{"message":{"content":"  "}}]}"#.into())));
    let cfg = LabelerConfig {
        mode: LabelerMode::RemoteLlm,
        endpoint: Some(url),
        ..LabelerConfig::default()
    };
    let l = ChatLabeler::new(&cfg, None, RetryPolicy::none()).unwrap();
    let out = l.label(&["voice input", "voice notes"]);
    assert_eq!(out.label, "voice input");
    assert!(out.fallback.is_some());
}

#[test]
fn pipeline_with_remote_backends() {
    let (url, seen) = serve(Box::new(|path, body, _| match path {
        "/extract" => (200, extract_reply(body)),
        "/embed" => {
            let data: Vec<Value> = body["input"]
                .as_array()
                .unwrap()
                .iter()
                .enumerate()
                .map(|(i, t)| json!({"index": i, "embedding": hashing_embed(t.as_str().unwrap(), 64, 3)}))
                .collect();
            (200, json!({ "data": data }).to_string())
        }
        _ => (200, json!({"choices": [{"message": {"content": "display settings"}}]}).to_string()),
    }));
    let dir = tempfile::tempdir().unwrap();
    let rpath = dir.path().join("reviews.jsonl");
    let words = ["dark mode", "night theme", "voice input", "voice notes", "cloud sync", "sync devices"];
    let text: String = (0..12)
        .map(|i| {
            json!({"review_id": format!("r{i}"), "app_id": "a", "body": format!("the {} works {i}", words[i % 6])})
                .to_string()
                + "\n"
        })
        .collect();
    std::fs::write(&rpath, text).unwrap();

    let mut cfg = PipelineConfig::default();
    cfg.inputs.reviews = Some(rpath);
    cfg.extractors.push(ExtractorSpec {
        endpoint: format!("{url}/extract"),
        source: Source::Llm,
        batch_size: 5,
    });
    cfg.embedding.mode = EmbeddingMode::Remote;
    cfg.embedding.endpoint = Some(format!("{url}/embed"));
    cfg.embedding.cache_path = Some(dir.path().join("cache.jsonl"));
    cfg.labeler.mode = LabelerMode::RemoteLlm;
    cfg.labeler.endpoint = Some(format!("{url}/chat"));
    cfg.output_dir = dir.path().join("out");
    std::env::set_var(API_KEY_ENV, "env-key");

    let m = run_pipeline(&cfg).unwrap();
    assert!(!m.partial);
    assert_eq!(m.providers["embedding"], "remote:all-MiniLM-L6-v2");
    assert_eq!(m.providers["labeler"], "chat:gpt-4o-mini");
    assert!(dir.path().join("cache.jsonl").is_file());
    let seen = seen.lock().unwrap();
    assert!(seen.iter().any(|s| s.path == "/chat" && s.auth.as_deref() == Some("Bearer env-key")));
    let tax = std::fs::read_to_string(dir.path().join("out/taxonomies.json")).unwrap();
    assert!(tax.contains("display settings"), "{tax}");
}
