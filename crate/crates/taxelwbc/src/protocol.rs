//! JSON messages of the live session socket.
//!
//! Every server frame carries `"protocol": PROTOCOL_VERSION` and a `type`
//! tag. Clients may send `protocol` too; a mismatch is answered with an
//! error frame. An optional client `id` is echoed in the matching ack or
//! error.
//!
//! ```text
//! -> {"type":"apply_force","target":6,"magnitude":30,"duration":2}
//! -> {"type":"apply_force","target":"ee","magnitude":15,"direction":[1,0,0],"duration":1}
//! -> {"type":"set_controller","controller":"follow_me","id":7}
//! -> {"type":"set_gains","gains":{"weights":{"eta_base":2.0}}}
//! <- {"protocol":1,"type":"hello",...}
//! <- {"protocol":1,"type":"snapshot","t":1.234,"base":[...],...}
//! <- {"protocol":1,"type":"ack","id":7,"command":"set_controller","t":1.235}
//! <- {"protocol":1,"type":"error","id":null,"message":"..."}
//! ```

use serde::{Deserialize, Serialize};

use crate::config::{ControllerName, GainsUpdate, TargetSpec};
use crate::logs::JsonRow;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    ApplyForce {
        /// Taxel index or `"ee"`.
        target: TargetSpec,
        magnitude: f64,
        /// World-frame direction, end-effector only.
        #[serde(default)]
        direction: Option<[f64; 3]>,
        /// Seconds of simulated time.
        duration: f64,
    },
    SetController {
        controller: ControllerName,
    },
    SetGains {
        gains: GainsUpdate,
    },
}

impl ClientMessage {
    pub fn kind(&self) -> &'static str {
        match self {
            ClientMessage::ApplyForce { .. } => "apply_force",
            ClientMessage::SetController { .. } => "set_controller",
            ClientMessage::SetGains { .. } => "set_gains",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientEnvelope {
    #[serde(default)]
    pub protocol: Option<u32>,
    #[serde(default)]
    pub id: Option<u64>,
    #[serde(flatten)]
    pub message: ClientMessage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxelInfo {
    pub index: usize,
    pub x: f64,
    pub y: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub controller: ControllerName,
    /// End-effector position error (m).
    pub tracking_error: f64,
    #[serde(flatten)]
    pub row: JsonRow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Hello {
        scenario: String,
        controller: ControllerName,
        dt: f64,
        snapshot_hz: f64,
        footprint: [f64; 2],
        taxels: Vec<TaxelInfo>,
        /// Force that saturates the taxel calibration (N).
        max_taxel_force: f64,
    },
    Snapshot(Snapshot),
    Ack {
        id: Option<u64>,
        command: String,
        /// Simulated time of the control step the command takes effect at.
        t: f64,
    },
    Error {
        id: Option<u64>,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerEnvelope {
    pub protocol: u32,
    #[serde(flatten)]
    pub message: ServerMessage,
}

impl ServerEnvelope {
    pub fn new(message: ServerMessage) -> Self {
        ServerEnvelope { protocol: PROTOCOL_VERSION, message }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages serialize")
    }
}

/// Parses one client frame, checking the protocol version.
pub fn parse_client(text: &str) -> Result<ClientEnvelope, (Option<u64>, String)> {
    let env: ClientEnvelope = serde_json::from_str(text).map_err(|e| {
        let id = serde_json::from_str::<serde_json::Value>(text).ok().and_then(|v| v.get("id")?.as_u64());
        (id, format!("malformed message: {e}"))
    })?;
    match env.protocol {
        Some(v) if v != PROTOCOL_VERSION => {
            Err((env.id, format!("unsupported protocol {v}, server speaks {PROTOCOL_VERSION}")))
        }
        _ => Ok(env),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_examples() {
        let m = parse_client(r#"{"type":"apply_force","target":6,"magnitude":30,"duration":2}"#).unwrap();
        assert_eq!(
            m.message,
            ClientMessage::ApplyForce { target: TargetSpec::Taxel(6), magnitude: 30.0, direction: None, duration: 2.0 }
        );
        let m = parse_client(r#"{"type":"set_controller","controller":"follow_me","id":7,"protocol":1}"#).unwrap();
        assert_eq!(m.id, Some(7));
        assert_eq!(m.message, ClientMessage::SetController { controller: ControllerName::FollowMe });
        let m = parse_client(r#"{"type":"set_gains","gains":{"weights":{"eta_base":2.0}}}"#).unwrap();
        assert_eq!(m.message.kind(), "set_gains");
    }

    #[test]
    fn rejects_bad_frames() {
        for bad in [
            "not json",
            r#"{"type":"warp"}"#,
            r#"{"type":"apply_force","target":6}"#,
            r#"{"type":"set_controller","controller":"rigid"}"#,
        ] {
            assert!(parse_client(bad).is_err(), "{bad}");
        }
        let (id, msg) =
            parse_client(r#"{"type":"set_controller","controller":"impedance","protocol":9,"id":3}"#).unwrap_err();
        assert_eq!(id, Some(3));
        assert!(msg.contains("protocol 9"));
        let (id, _) = parse_client(r#"{"type":"nope","id":4}"#).unwrap_err();
        assert_eq!(id, Some(4));
    }

    #[test]
    fn server_frames_carry_version_and_tag() {
        let ack = ServerEnvelope::new(ServerMessage::Ack { id: Some(1), command: "set_gains".into(), t: 0.5 });
        let v: serde_json::Value = serde_json::from_str(&ack.to_json()).unwrap();
        assert_eq!(v["protocol"], 1);
        assert_eq!(v["type"], "ack");
        let back: ServerEnvelope = serde_json::from_str(&ack.to_json()).unwrap();
        assert_eq!(back, ack);
    }
}
