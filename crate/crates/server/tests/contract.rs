use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use axum::Router;
use facta_core::kb::KnowledgeBase;
use facta_server::{router, AppState};
use serde_json::Value;
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tower::ServiceExt;

fn fixture_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/kb.jsonl")
}

fn app() -> Router {
    let kb = KnowledgeBase::load(fixture_path()).unwrap();
    router(AppState::new(kb, 200), &[])
}

async fn raw(app: &Router, req: Request<Body>) -> (StatusCode, axum::http::HeaderMap, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let body = to_bytes(resp.into_body(), usize::MAX).await.unwrap().to_vec();
    (status, headers, body)
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    let (status, headers, body) = raw(app, Request::get(uri).body(Body::empty()).unwrap()).await;
    assert_eq!(headers["content-type"], "application/json", "{uri}");
    (status, serde_json::from_slice(&body).unwrap())
}

fn assert_error(v: &Value, code: &str) {
    let obj = v.as_object().unwrap();
    assert_eq!(obj.len(), 2, "{v}");
    assert_eq!(v["code"], code);
    assert!(!v["message"].as_str().unwrap().is_empty());
}

/// Fact rows of the fixture file, read without the KB code.
fn fixture_rows() -> Vec<(String, String, String, String, u64)> {
    let key = |s: &str| {
        let mut w: Vec<String> = s.split_whitespace().map(str::to_lowercase).collect();
        while w.len() > 1 && ["a", "an", "the", "said"].contains(&w[0].as_str()) {
            w.remove(0);
        }
        w.join(" ")
    };
    std::fs::read_to_string(fixture_path())
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| serde_json::from_str::<Value>(l).unwrap())
        .filter(|v| v.get("head").is_some())
        .map(|v| {
            let rel: Vec<&str> = v["rel"].as_array().unwrap().iter().map(|r| r.as_str().unwrap()).collect();
            (
                key(v["head"].as_str().unwrap()),
                rel.join(" ").to_lowercase(),
                key(v["tail"].as_str().unwrap()),
                v["patent"].as_str().unwrap().to_string(),
                v["sent"].as_u64().unwrap(),
            )
        })
        .collect()
}

type EdgeKey = (String, String, String);

fn edge_set(v: &Value) -> BTreeMap<EdgeKey, Vec<String>> {
    v["edges"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| {
            let s = |k: &str| e[k].as_str().unwrap().to_string();
            let patents = e["patents"].as_array().unwrap().iter().map(|p| p.as_str().unwrap().to_string()).collect();
            ((s("head"), s("rel"), s("tail")), patents)
        })
        .collect()
}

#[tokio::test]
async fn stats_match_hand_count() {
    let app = app();
    let (status, v) = get(&app, "/api/stats").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["n_patents"], 3);
    assert_eq!(v["n_sentences"], 10);
    assert_eq!(v["n_facts"], 25);
    assert_eq!(v["n_unique_entities"], 21);
    assert_eq!(v["n_unique_relationships"], 18);
    assert_eq!(v["avg_facts_per_sentence"], 2.5);

    let rows = fixture_rows();
    assert_eq!(rows.len(), 25);
    let entities: BTreeSet<_> = rows.iter().flat_map(|r| [&r.0, &r.2]).collect();
    let relations: BTreeSet<_> = rows.iter().map(|r| &r.1).filter(|r| !r.is_empty()).collect();
    assert_eq!(entities.len(), 21);
    assert_eq!(relations.len(), 18);

    let (_, again) = get(&app, "/api/stats").await;
    assert_eq!(v, again);
}

#[tokio::test]
async fn stats_on_empty_kb_are_zero() {
    let app = router(AppState::new(KnowledgeBase::new(), 200), &[]);
    let (status, v) = get(&app, "/api/stats").await;
    assert_eq!(status, StatusCode::OK);
    for k in ["n_patents", "n_sentences", "n_facts", "n_unique_entities", "n_unique_relationships"] {
        assert_eq!(v[k], 0, "{k}");
    }
    assert_eq!(v["avg_facts_per_sentence"], 0.0);
}

#[tokio::test]
async fn search_ranks_exact_key_first() {
    let app = app();
    let (status, v) = get(&app, "/api/search?q=pressure%20drop").await;
    assert_eq!(status, StatusCode::OK);
    let keys: Vec<&str> = v["results"].as_array().unwrap().iter().map(|m| m["key"].as_str().unwrap()).collect();
    assert_eq!(keys, ["pressure drop", "low pressure drop"]);
    assert_eq!(v["total"], 2);
    assert_eq!(v["query"], "pressure drop");
    let first = &v["results"][0];
    assert_eq!(first["freq"], 3);
    let forms: Vec<&str> = first["surface_forms"].as_array().unwrap().iter().map(|s| s.as_str().unwrap()).collect();
    assert!(forms.contains(&"the pressure drop") && forms.contains(&"a pressure drop"), "{forms:?}");
}

#[tokio::test]
async fn search_paginates() {
    let app = app();
    let (_, all) = get(&app, "/api/search?q=o&limit=1000").await;
    let all = all["results"].as_array().unwrap().clone();
    assert!(all.len() > 5);
    let (status, one) = get(&app, "/api/search?q=o&limit=1").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(one["results"].as_array().unwrap().len(), 1);
    assert_eq!(one["total"], all.len());
    let mut paged = Vec::new();
    for offset in (0..all.len() + 3).step_by(3) {
        let (_, page) = get(&app, &format!("/api/search?q=o&limit=3&offset={offset}")).await;
        paged.extend(page["results"].as_array().unwrap().iter().cloned());
    }
    assert_eq!(paged, all);
    let (_, none) = get(&app, "/api/search?q=zeppelin").await;
    assert_eq!(none["results"], Value::Array(vec![]));
    assert_eq!(none["total"], 0);
}

#[tokio::test]
async fn search_rejects_bad_input() {
    let app = app();
    for uri in [
        "/api/search",
        "/api/search?q=",
        "/api/search?q=%20%20",
        "/api/search?q=fan&limit=-1",
        "/api/search?q=fan&limit=many",
        "/api/search?q=fan&offset=x",
        "/api/search?q=fan&limit=100000",
    ] {
        let (status, v) = get(&app, uri).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{uri}");
        assert_error(&v, "bad_request");
    }
}

#[tokio::test]
async fn search_on_empty_kb_is_unprocessable() {
    let app = router(AppState::new(KnowledgeBase::new(), 200), &[]);
    let (status, v) = get(&app, "/api/search?q=fan").await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_error(&v, "empty_kb");
    let (status, _) = get(&app, "/api/search").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn neighborhood_matches_scan() {
    let app = app();
    let rows = fixture_rows();
    for center in ["housing", "filter", "motor", "space", "chamber"] {
        let (status, v) = get(&app, &format!("/api/entity/{center}/neighborhood?depth=1")).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(v["center"], center);
        assert_eq!(v["depth"], 1);
        let mut expected: BTreeMap<EdgeKey, BTreeSet<String>> = BTreeMap::new();
        for r in rows.iter().filter(|r| r.0 == center || r.2 == center) {
            expected.entry((r.0.clone(), r.1.clone(), r.2.clone())).or_default().insert(r.3.clone());
        }
        let got: BTreeMap<EdgeKey, BTreeSet<String>> =
            edge_set(&v).into_iter().map(|(k, p)| (k, p.into_iter().collect())).collect();
        assert_eq!(got, expected, "{center}");
        let nodes: BTreeSet<&str> = v["nodes"].as_array().unwrap().iter().map(|n| n["key"].as_str().unwrap()).collect();
        for (h, _, t) in got.keys() {
            assert!(nodes.contains(h.as_str()) && nodes.contains(t.as_str()));
        }
        for n in v["nodes"].as_array().unwrap() {
            assert!(n["freq"].as_u64().unwrap() >= 1);
            assert!(!n["surface_forms"].as_array().unwrap().is_empty());
        }
    }
    let (_, housing) = get(&app, "/api/entity/housing/neighborhood").await;
    assert_eq!(housing["edges"].as_array().unwrap().len(), 4);
    let encloses = edge_set(&housing)[&("housing".into(), "encloses".into(), "motor".into())].clone();
    assert_eq!(encloses, ["US7000001", "US7000003"]);
}

#[tokio::test]
async fn neighborhood_depth_two_contains_depth_one() {
    let app = app();
    let (_, d1) = get(&app, "/api/entity/filter/neighborhood?depth=1").await;
    let (_, d2) = get(&app, "/api/entity/filter/neighborhood?depth=2").await;
    let (e1, e2) = (edge_set(&d1), edge_set(&d2));
    assert!(e2.len() > e1.len());
    assert!(e1.keys().all(|k| e2.contains_key(k)));
}

#[tokio::test]
async fn neighborhood_normalizes_the_key() {
    let app = app();
    let (status, v) = get(&app, "/api/entity/The%20Housing/neighborhood").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["center"], "housing");
}

#[tokio::test]
async fn neighborhood_errors() {
    let app = app();
    let (status, v) = get(&app, "/api/entity/zeppelin/neighborhood").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_error(&v, "not_found");
    for uri in [
        "/api/entity/housing/neighborhood?depth=0",
        "/api/entity/housing/neighborhood?depth=x",
        "/api/entity/housing/neighborhood?depth=99",
    ] {
        let (status, v) = get(&app, uri).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{uri}");
        assert_error(&v, "bad_request");
    }
}

#[tokio::test]
async fn sentence_graph_of_known_sentence() {
    let app = app();
    let (status, v) = get(&app, "/api/sentence-graph?patent=US7000001&sent=0").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["empty"], false);
    assert!(v["sentence"].as_str().unwrap().starts_with("The space provided between"));
    let edges = edge_set(&v);
    assert_eq!(edges.len(), 5);
    assert!(edges.contains_key(&("space".into(), "allows".into(), "mounting strip".into())));
    assert!(edges.contains_key(&("brush members".into(), "".into(), "4 a".into())));

    let rows = fixture_rows();
    for (patent, sent) in [("US7000002", 1), ("US7000003", 2)] {
        let (_, v) = get(&app, &format!("/api/sentence-graph?patent={patent}&sent={sent}")).await;
        let expected: BTreeSet<EdgeKey> = rows
            .iter()
            .filter(|r| r.3 == patent && r.4 == sent)
            .map(|r| (r.0.clone(), r.1.clone(), r.2.clone()))
            .collect();
        assert_eq!(edge_set(&v).into_keys().collect::<BTreeSet<_>>(), expected);
    }
}

#[tokio::test]
async fn sentence_graph_unknown_and_bad_input() {
    let app = app();
    let (status, v) = get(&app, "/api/sentence-graph?patent=US9&sent=4").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["empty"], true);
    assert_eq!(v["edges"], Value::Array(vec![]));
    assert_eq!(v["nodes"], Value::Array(vec![]));
    for uri in [
        "/api/sentence-graph",
        "/api/sentence-graph?patent=US7000001",
        "/api/sentence-graph?sent=0",
        "/api/sentence-graph?patent=US7000001&sent=first",
    ] {
        let (status, v) = get(&app, uri).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{uri}");
        assert_error(&v, "bad_request");
    }
}

#[tokio::test]
async fn unknown_route_and_method_are_json() {
    let app = app();
    let (status, v) = get(&app, "/api/nothing").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_error(&v, "not_found");
    let (status, _, body) = raw(&app, Request::post("/api/stats").body(Body::empty()).unwrap()).await;
    assert_eq!(status, StatusCode::METHOD_NOT_ALLOWED);
    assert_error(&serde_json::from_slice(&body).unwrap(), "method_not_allowed");
}

#[tokio::test]
async fn responses_are_deterministic_under_concurrency() {
    let app = app();
    let uris = [
        "/api/stats",
        "/api/search?q=motor",
        "/api/entity/motor/neighborhood?depth=2",
        "/api/sentence-graph?patent=US7000003&sent=2",
    ];
    let mut baseline = Vec::new();
    for uri in uris {
        baseline.push(raw(&app, Request::get(uri).body(Body::empty()).unwrap()).await.2);
    }
    let mut handles = Vec::new();
    for round in 0..32 {
        let app = app.clone();
        let uri = uris[round % uris.len()];
        handles.push(tokio::spawn(async move {
            (round % uris.len(), raw(&app, Request::get(uri).body(Body::empty()).unwrap()).await.2)
        }));
    }
    for h in handles {
        let (i, body) = h.await.unwrap();
        assert_eq!(body, baseline[i]);
    }
}

#[tokio::test]
async fn cors_follows_allowlist() {
    let kb = KnowledgeBase::load(fixture_path()).unwrap();
    let allowed = router(AppState::new(kb.clone(), 200), &["http://localhost:5173".to_string()]);
    let req = |origin: &str| {
        Request::get("/api/stats")
            .header("origin", origin)
            .body(Body::empty())
            .unwrap()
    };
    let (_, headers, _) = raw(&allowed, req("http://localhost:5173")).await;
    assert_eq!(headers["access-control-allow-origin"], "http://localhost:5173");
    let (_, headers, _) = raw(&allowed, req("http://evil.example")).await;
    assert!(headers.get("access-control-allow-origin").is_none());
    let closed = router(AppState::new(kb, 200), &[]);
    let (_, headers, _) = raw(&closed, req("http://localhost:5173")).await;
    assert!(headers.get("access-control-allow-origin").is_none());
}

#[tokio::test]
async fn serves_over_tcp_and_shuts_down() {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(facta_server::run(listener, app(), async {
        let _ = rx.await;
    }));
    let mut stream = tokio::net::TcpStream::connect(addr).await.unwrap();
    stream
        .write_all(b"GET /api/stats HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n")
        .await
        .unwrap();
    let mut response = String::new();
    stream.read_to_string(&mut response).await.unwrap();
    assert!(response.starts_with("HTTP/1.1 200"), "{response}");
    assert!(response.contains("\"n_facts\":25"));
    tx.send(()).unwrap();
    server.await.unwrap().unwrap();
}
