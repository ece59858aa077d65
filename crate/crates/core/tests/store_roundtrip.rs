use dataloop::llm::Role;
use dataloop::orchestrator::{TurnEvent, TurnEventKind};
use dataloop::store::{FsSessionStore, SessionEvent, SessionRecord, SessionStore};
use proptest::prelude::*;
use serde_json::json;

fn event_strategy() -> impl Strategy<Value = SessionEvent> {
    let text = "\\PC{0,40}";
    prop_oneof![
        (any::<bool>(), text).prop_map(|(user, text)| SessionEvent::Message {
            role: if user { Role::User } else { Role::Assistant },
            text
        }),
        (0usize..4, text).prop_map(|(turn, instruction)| SessionEvent::TurnStarted { turn, instruction, knowledge_id: None }),
        (0usize..4, 0u64..50, text, -1e9f64..1e9).prop_map(|(turn, seq, t, x)| SessionEvent::TurnEvent {
            turn,
            intervention: None,
            event: TurnEvent { seq, kind: TurnEventKind::AgentText, payload: json!({ "text": t, "x": x }) },
        }),
        text.prop_map(|reason| SessionEvent::KernelReset { reason }),
        Just(SessionEvent::KernelResetAcknowledged),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn log_round_trips(events in proptest::collection::vec(event_strategy(), 0..25)) {
        let root = tempfile::tempdir().unwrap();
        let store = FsSessionStore::open(root.path()).unwrap();
        let id = store.create_session().unwrap();
        for e in &events {
            store.append_event(&id, e.clone()).unwrap();
        }
        let logged = store.load_events(&id).unwrap();
        prop_assert_eq!(logged.len(), events.len() + 1);
        let reloaded: Vec<SessionEvent> = logged[1..].iter().map(|l| l.event.clone()).collect();
        prop_assert_eq!(&reloaded, &events);
        prop_assert!(logged.windows(2).all(|w| w[0].ts <= w[1].ts));
        prop_assert!(logged.iter().all(|l| l.v == 1));

        // A fresh store over the same root sees the same record.
        let again = FsSessionStore::open(root.path()).unwrap();
        let record = again.load_session(&id).unwrap();
        prop_assert_eq!(&record, &SessionRecord::from_events(&logged).unwrap());
        prop_assert_eq!(record, store.load_session(&id).unwrap());
    }
}

#[test]
fn log_lines_are_versioned_json() {
    let root = tempfile::tempdir().unwrap();
    let store = FsSessionStore::open(root.path()).unwrap();
    let id = store.create_session().unwrap();
    store.append_event(&id, SessionEvent::Message { role: Role::User, text: "hi".into() }).unwrap();
    let raw = std::fs::read_to_string(root.path().join(&id).join("events.jsonl")).unwrap();
    let lines: Vec<serde_json::Value> = raw.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["kind"], "created");
    assert_eq!(lines[1]["kind"], "message");
    assert_eq!(lines[1]["role"], "user");
    assert!(lines.iter().all(|l| l["v"] == 1 && l["ts"].is_string()));
    assert_eq!(id.len(), 32);
    assert!(id.chars().all(|c| c.is_ascii_hexdigit()));
}
