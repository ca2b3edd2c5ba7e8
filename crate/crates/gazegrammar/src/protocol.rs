//! Wire schema, version 1. Every message is one JSON object
//! `{"v": 1, "type": ..., "seq"?: n, "payload": {...}}`.

use gazegrammar_core::fsm::FsmState;
use gazegrammar_core::geometry::RigidTransform;
use gazegrammar_core::pipeline::{Command, SessionEvent};
use gazegrammar_core::scene::SceneDocument;
use serde::{Deserialize, Serialize};

use crate::config::Config;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub v: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seq: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
    #[serde(flatten)]
    pub body: T,
}

impl<T> Envelope<T> {
    pub fn new(body: T) -> Self {
        Self {
            v: PROTOCOL_VERSION,
            seq: None,
            session_id: None,
            body,
        }
    }

    pub fn with_seq(mut self, seq: Option<u64>) -> Self {
        self.seq = seq;
        self
    }

    pub fn with_session(mut self, id: &str) -> Self {
        self.session_id = Some(id.to_string());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpenSession {
    #[serde(default)]
    pub scene: Option<SceneDocument>,
    #[serde(default)]
    pub config: Option<Config>,
    /// Multiplier on simulated action durations; the server fills it in
    /// (0 under `--fast`) so a recorded open message is self-contained.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionRef {
    pub session_id: String,
}

/// A gaze sample as sent by a client. Pixels are centre-origin, y up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleMsg {
    pub t: f64,
    pub px: f64,
    pub py: f64,
    pub depth_m: f64,
    /// Camera → world; the configured head pose when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head_pose: Option<RigidTransform>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestGaze {
    pub session_id: String,
    pub sample: SampleMsg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inject {
    pub session_id: String,
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload", rename_all = "snake_case")]
pub enum ClientMessage {
    OpenSession(OpenSession),
    Subscribe(SessionRef),
    IngestGaze(IngestGaze),
    Inject(Inject),
}

impl ClientMessage {
    pub fn session_id(&self) -> Option<&str> {
        match self {
            ClientMessage::OpenSession(_) => None,
            ClientMessage::Subscribe(r) => Some(&r.session_id),
            ClientMessage::IngestGaze(g) => Some(&g.session_id),
            ClientMessage::Inject(i) => Some(&i.session_id),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionOpened {
    pub session_id: String,
    pub fsm_state: FsmState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReply {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload", rename_all = "snake_case")]
pub enum ServerMessage {
    SessionOpened(SessionOpened),
    /// Acknowledges the client message whose `seq` the envelope echoes.
    Ack {},
    Error(ErrorReply),
    Event(SessionEvent),
    Heartbeat {},
}

pub type ClientEnvelope = Envelope<ClientMessage>;
pub type ServerEnvelope = Envelope<ServerMessage>;

pub fn error_reply(code: &str, message: impl ToString) -> ServerMessage {
    ServerMessage::Error(ErrorReply {
        code: code.to_string(),
        message: message.to_string(),
    })
}

/// Parse a client message, checking the protocol version.
/// On failure the `seq` of the offending message is returned when it can
/// still be read, so the reply can echo it.
pub fn parse_client(text: &str) -> Result<ClientEnvelope, (Option<u64>, ErrorReply)> {
    let seq_of = || {
        serde_json::from_str::<serde_json::Value>(text)
            .ok()
            .and_then(|v| v.get("seq").and_then(|s| s.as_u64()))
    };
    let env: ClientEnvelope = serde_json::from_str(text).map_err(|e| {
        (
            seq_of(),
            ErrorReply {
                code: "bad_message".into(),
                message: e.to_string(),
            },
        )
    })?;
    if env.v != PROTOCOL_VERSION {
        return Err((
            env.seq,
            ErrorReply {
                code: "unsupported_version".into(),
                message: format!("protocol version {} not supported (expected {PROTOCOL_VERSION})", env.v),
            },
        ));
    }
    Ok(env)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ingest_wire_shape() {
        let text = r#"{"v":1,"type":"ingest_gaze","seq":7,"payload":{"session_id":"s1","sample":{"t":0.1,"px":10,"py":-5,"depth_m":0.8}}}"#;
        let env = parse_client(text).unwrap();
        assert_eq!(env.seq, Some(7));
        match env.body {
            ClientMessage::IngestGaze(g) => {
                assert_eq!(g.session_id, "s1");
                assert_eq!(g.sample.px, 10.0);
                assert!(g.sample.head_pose.is_none());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn inject_commands_parse() {
        for cmd in [
            r#"{"kind":"reset"}"#,
            r#"{"kind":"randomize_grid","seed":3}"#,
            r#"{"kind":"set_failure_profile","p_grasp_fail":1,"p_drop_during_pour":0,"seed":1}"#,
            r#"{"kind":"calibrate_wrist","palm_point_robot":{"x":0.4,"y":0.4,"z":0.5,"frame":"robot"}}"#,
        ] {
            let text = format!(r#"{{"v":1,"type":"inject","payload":{{"session_id":"s1","command":{cmd}}}}}"#);
            assert!(parse_client(&text).is_ok(), "{cmd}");
        }
        let bad = r#"{"v":1,"type":"inject","payload":{"session_id":"s1","command":{"kind":"explode"}}}"#;
        assert_eq!(parse_client(bad).unwrap_err().1.code, "bad_message");
    }

    #[test]
    fn version_checked() {
        let text = r#"{"v":2,"type":"subscribe","seq":9,"payload":{"session_id":"s1"}}"#;
        let (seq, e) = parse_client(text).unwrap_err();
        assert_eq!((seq, e.code.as_str()), (Some(9), "unsupported_version"));
    }

    #[test]
    fn server_messages_have_type_and_payload() {
        let hb = serde_json::to_value(Envelope::new(ServerMessage::Heartbeat {})).unwrap();
        assert_eq!(hb["type"], "heartbeat");
        assert_eq!(hb["v"], 1);
        let ack = serde_json::to_value(Envelope::new(ServerMessage::Ack {}).with_seq(Some(4))).unwrap();
        assert_eq!(ack["seq"], 4);
    }
}
