//! Wire messages exchanged with the shim, one JSON object per line.

use serde::{Deserialize, Serialize};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ShimMessage {
    Hello {
        version: u32,
    },
    Execute {
        id: i64,
        code: String,
    },
    Result {
        id: i64,
        status: WireStatus,
        stdout: String,
        stderr: String,
        traceback: Option<String>,
        new_files: Vec<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WireStatus {
    Success,
    Error,
}

impl ShimMessage {
    pub fn to_line(&self) -> String {
        let mut line = serde_json::to_string(self).expect("wire messages always serialize");
        line.push('\n');
        line
    }

    pub fn parse(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line.trim_end_matches(['\r', '\n']))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn execute_is_bit_exact() {
        let line = ShimMessage::Execute { id: 7, code: "print(\"hi\")\n".into() }.to_line();
        assert_eq!(line, "{\"type\":\"execute\",\"id\":7,\"code\":\"print(\\\"hi\\\")\\n\"}\n");
        assert_eq!(ShimMessage::Hello { version: 1 }.to_line(), "{\"type\":\"hello\",\"version\":1}\n");
    }

    #[test]
    fn result_ignores_unknown_fields() {
        let line = r#"{"type":"result","id":3,"status":"error","stdout":"","stderr":"","traceback":"boom","new_files":["a.png"],"extra":42}"#;
        match ShimMessage::parse(line).unwrap() {
            ShimMessage::Result { id, status, traceback, new_files, .. } => {
                assert_eq!(id, 3);
                assert_eq!(status, WireStatus::Error);
                assert_eq!(traceback.as_deref(), Some("boom"));
                assert_eq!(new_files, vec!["a.png"]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_type_is_rejected() {
        assert!(ShimMessage::parse(r#"{"type":"display","id":1}"#).is_err());
        assert!(ShimMessage::parse("not json").is_err());
    }
}
