mod common;

use std::time::Duration;

use common::*;
use dataloop::orchestrator::TurnEventKind;
use serde_json::json;

#[test]
fn upload_and_session_routes() {
    let s = start(|c| c.upload_limit = 4096);
    let id = s.new_session();
    let r = s.upload(&id, "toy.csv", TOY_CSV.as_bytes());
    assert_eq!(r.status, 200, "{}", r.body);
    let p = r.json();
    assert_eq!((p["n_rows"].as_u64(), p["n_cols"].as_u64()), (Some(4), Some(3)));
    assert_eq!(p["columns"][2]["missing_count"], 1);

    // Same name again conflicts; too big is 413; ragged rows are 422.
    assert_eq!(s.upload(&id, "toy.csv", TOY_CSV.as_bytes()).status, 409);
    assert_eq!(s.upload(&id, "big.csv", &vec![b'1'; 5000]).status, 413);
    let bad = s.upload(&id, "bad.csv", b"a,b\n1,2\n3\n");
    assert_eq!(bad.status, 422, "{}", bad.body);
    assert_eq!(bad.json()["error"], "ingest_error");

    let rec = s.get(&format!("/sessions/{id}"));
    assert_eq!(rec.status, 200);
    assert_eq!(rec.json()["dataset_path"], "toy.csv");
    assert_eq!(s.get(&format!("/sessions/{id}/artifacts/toy.csv")).body, TOY_CSV);

    assert_eq!(s.get("/sessions/ffffffffffffffffffffffffffffffff").status, 404);
    assert_eq!(s.get(&format!("/sessions/{id}/artifacts/nothing.png")).status, 404);
    assert_eq!(s.upload("ffffffffffffffffffffffffffffffff", "x.csv", b"a,b\n1,2\n").status, 404);
    let listed = s.get("/sessions").json();
    assert!(listed.as_array().unwrap().iter().any(|x| x["id"] == id.as_str()));
}

#[test]
fn turn_stream_replay_and_report() {
    let s = start(|_| {});
    let id = s.new_session();
    assert_eq!(s.upload(&id, "toy.csv", TOY_CSV.as_bytes()).status, 200);

    let r = s.post_json(&format!("/sessions/{id}/messages"), json!({ "text": "plot a histogram of value" }));
    assert_eq!(r.status, 200, "{}", r.body);
    let events = sse_events(&r.body);
    assert!(gapless_single_terminal(&events), "{events:?}");
    assert_eq!(events.last().unwrap().kind, TurnEventKind::FinalResponse);
    assert!(r.body.contains("event: final_response"));

    let record = s.get(&format!("/sessions/{id}")).json();
    let logged: Vec<dataloop::orchestrator::TurnEvent> =
        serde_json::from_value(record["turns"][0]["events"].clone()).unwrap();
    assert_eq!(logged, events);
    let png = s.get(&format!("/sessions/{id}/artifacts/hist.png"));
    assert_eq!(png.status, 200);
    assert_eq!(&png.bytes[..4], b"\x89PNG");

    let rep = s.post_json(&format!("/sessions/{id}/report"), json!({ "template": "standard analysis" }));
    assert_eq!(rep.status, 200, "{}", rep.body);
    let doc = rep.json();
    assert!(doc["markdown_text"].as_str().unwrap().contains("![histogram](hist.png)"));
    assert_eq!(doc["referenced_artifacts"], json!(["hist.png"]));
    let saved = s.get(&format!("/sessions/{id}/artifacts/{}", doc["artifact_name"].as_str().unwrap()));
    assert_eq!(saved.body, doc["markdown_text"].as_str().unwrap());
    assert_eq!(s.post_json(&format!("/sessions/{id}/report"), json!({ "template": "nope" })).status, 404);

    // Nothing to intervene on after a successful turn.
    assert_eq!(s.post_json(&format!("/sessions/{id}/intervention"), json!({ "code": "print(1)" })).status, 409);
}

#[test]
fn report_needs_history() {
    let s = start(|_| {});
    let id = s.new_session();
    let r = s.post_empty(&format!("/sessions/{id}/report"));
    assert_eq!(r.status, 422, "{}", r.body);
}

#[test]
fn concurrent_turn_is_rejected() {
    let s = std::sync::Arc::new(start(|_| {}));
    let id = s.new_session();
    let worker = {
        let (s, id) = (s.clone(), id.clone());
        std::thread::spawn(move || s.post_json(&format!("/sessions/{id}/messages"), json!({ "text": "sleep please" })))
    };
    std::thread::sleep(Duration::from_millis(400));
    let second = s.post_json(&format!("/sessions/{id}/messages"), json!({ "text": "plot a histogram" }));
    assert_eq!(second.status, 409, "{}", second.body);
    let first = worker.join().unwrap();
    assert!(gapless_single_terminal(&sse_events(&first.body)));
    // Free again afterwards; empty text is refused.
    assert_eq!(s.post_json(&format!("/sessions/{id}/messages"), json!({ "text": " " })).status, 422);
}

#[test]
fn intervention_stream() {
    let s = start(|_| {});
    let id = s.new_session();
    let r = s.post_json(&format!("/sessions/{id}/messages"), json!({ "text": "always fail" }));
    let events = sse_events(&r.body);
    assert!(gapless_single_terminal(&events));
    assert_eq!(events.last().unwrap().kind, TurnEventKind::NeedsIntervention);
    assert_eq!(events.last().unwrap().payload["code"], "raise RuntimeError('nope')");

    let r = s.post_json(&format!("/sessions/{id}/intervention"), json!({ "code": "1/0" }));
    let events = sse_events(&r.body);
    assert!(gapless_single_terminal(&events));
    assert_eq!(events.last().unwrap().kind, TurnEventKind::NeedsIntervention);

    let r = s.post_json(&format!("/sessions/{id}/intervention"), json!({ "code": "print('fixed by hand')" }));
    let events = sse_events(&r.body);
    assert!(gapless_single_terminal(&events));
    assert_eq!(events.last().unwrap().kind, TurnEventKind::FinalResponse);
    let record = s.get(&format!("/sessions/{id}")).json();
    assert_eq!(record["turns"][0]["interventions"].as_array().unwrap().len(), 2);
}

#[test]
fn knowledge_crud() {
    let s = start(|_| {});
    let r = s.post_json("/knowledge", json!({ "description": "train a random forest classifier", "code": "RandomForestClassifier()" }));
    assert_eq!(r.status, 201, "{}", r.body);
    let id = r.json()["id"].as_str().unwrap().to_string();
    assert_eq!(s.get("/knowledge").json().as_array().unwrap().len(), 1);

    let m = s.post_json("/knowledge/match", json!({ "instruction": "train a random forest classifier" })).json();
    assert_eq!(m["matched"]["entry"]["id"], id.as_str());
    assert!((m["matched"]["score"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    let u = finish_put(&s, &format!("/knowledge/{id}"), json!({ "description": "plot data", "code": "plt.plot()" }));
    assert_eq!(u, 200);
    assert_eq!(s.delete(&format!("/knowledge/{id}")).status, 204);
    assert_eq!(s.delete(&format!("/knowledge/{id}")).status, 404);
    assert!(s.get("/knowledge").json().as_array().unwrap().is_empty());
}

fn finish_put(s: &Server, path: &str, body: serde_json::Value) -> u16 {
    s.agent.put(format!("{}{path}", s.base)).send_json(body).unwrap().status().as_u16()
}
