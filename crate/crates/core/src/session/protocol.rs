//! JSON message protocol between the editor (or any other client) and a
//! session. Every message is an envelope `{"kind", "seq", "payload"}`.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::analysis::DimensionKind;
use crate::level::format::{DungeonDoc, RoomDoc};
use crate::level::TileKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seq: Option<u64>,
    #[serde(default)]
    pub payload: Value,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("message is not a valid envelope: {0}")]
    Malformed(String),
    #[error("unknown message kind {0:?}")]
    UnknownKind(String),
    #[error("invalid payload for {kind}: {message}")]
    Schema { kind: String, message: String },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase", deny_unknown_fields)]
pub struct StartPayload {
    pub seed: Option<u64>,
    pub dungeon: Option<DungeonDoc>,
    pub active_room: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EditPayload {
    /// Defaults to the active room.
    #[serde(default)]
    pub room: Option<String>,
    pub x: usize,
    pub y: usize,
    pub kind: TileKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LockPayload {
    #[serde(default)]
    pub room: Option<String>,
    pub x: usize,
    pub y: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SelectPayload {
    room: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ApplyPayload {
    cell: (usize, usize),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct NamePayload {
    name: Option<String>,
}

/// A parsed client request.
#[derive(Debug, Clone, PartialEq)]
pub enum Inbound {
    SessionStart(StartPayload),
    RoomEdit(EditPayload),
    RoomLock(LockPayload),
    RoomSelect(String),
    DimsSet((DimensionKind, DimensionKind)),
    SuggestionApply((usize, usize)),
    SessionSave(Option<String>),
    SessionLoad(String),
}

impl Inbound {
    pub fn kind(&self) -> &'static str {
        match self {
            Inbound::SessionStart(_) => "session/start",
            Inbound::RoomEdit(_) => "room/edit",
            Inbound::RoomLock(_) => "room/lock",
            Inbound::RoomSelect(_) => "room/select",
            Inbound::DimsSet(_) => "dims/set",
            Inbound::SuggestionApply(_) => "suggestion/apply",
            Inbound::SessionSave(_) => "session/save",
            Inbound::SessionLoad(_) => "session/load",
        }
    }

    pub fn to_envelope(&self, seq: Option<u64>) -> Envelope {
        let payload = match self {
            Inbound::SessionStart(p) => serde_json::to_value(p).unwrap(),
            Inbound::RoomEdit(p) => serde_json::to_value(p).unwrap(),
            Inbound::RoomLock(p) => serde_json::to_value(p).unwrap(),
            Inbound::RoomSelect(room) => json!({ "room": room }),
            Inbound::DimsSet((a, b)) => json!([a, b]),
            Inbound::SuggestionApply((i, j)) => json!({ "cell": [i, j] }),
            Inbound::SessionSave(name) => json!({ "name": name }),
            Inbound::SessionLoad(name) => json!({ "name": name }),
        };
        Envelope {
            kind: self.kind().to_string(),
            seq,
            payload,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    pub seq: Option<u64>,
    pub message: Inbound,
}

fn payload<T: DeserializeOwned>(kind: &str, value: Value) -> Result<T, ProtocolError> {
    serde_json::from_value(value).map_err(|e| ProtocolError::Schema {
        kind: kind.to_string(),
        message: e.to_string(),
    })
}

fn optional<T: DeserializeOwned + Default>(kind: &str, value: Value) -> Result<T, ProtocolError> {
    if value.is_null() {
        Ok(T::default())
    } else {
        payload(kind, value)
    }
}

/// Parses one inbound text frame. On failure the sequence number, when it
/// could be read, is returned alongside the error.
pub fn parse_request(text: &str) -> Result<Request, (Option<u64>, ProtocolError)> {
    let envelope: Envelope = serde_json::from_str(text).map_err(|e| (None, ProtocolError::Malformed(e.to_string())))?;
    let seq = envelope.seq;
    parse_envelope(envelope).map_err(|e| (seq, e))
}

pub fn parse_envelope(envelope: Envelope) -> Result<Request, ProtocolError> {
    let Envelope {
        kind,
        seq,
        payload: body,
    } = envelope;
    let k = kind.as_str();
    let message = match k {
        "session/start" => Inbound::SessionStart(optional(k, body)?),
        "room/edit" => Inbound::RoomEdit(payload(k, body)?),
        "room/lock" => Inbound::RoomLock(payload(k, body)?),
        "room/select" => Inbound::RoomSelect(payload::<SelectPayload>(k, body)?.room),
        "dims/set" => {
            let dims: (DimensionKind, DimensionKind) = payload(k, body)?;
            Inbound::DimsSet(dims)
        }
        "suggestion/apply" => Inbound::SuggestionApply(payload::<ApplyPayload>(k, body)?.cell),
        "session/save" => Inbound::SessionSave(optional::<NamePayload>(k, body)?.name),
        "session/load" => {
            let name = payload::<NamePayload>(k, body)?
                .name
                .ok_or_else(|| ProtocolError::Schema {
                    kind: kind.clone(),
                    message: "missing field `name`".into(),
                })?;
            Inbound::SessionLoad(name)
        }
        _ => return Err(ProtocolError::UnknownKind(kind)),
    };
    Ok(Request { seq, message })
}

/// One elite in the published grid pane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EliteView {
    pub cell: (usize, usize),
    pub tiles: String,
    pub objective: f64,
    pub combined: f64,
}

/// One entry of the preference pane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RankedView {
    pub cell: (usize, usize),
    pub tiles: String,
    pub predicted_pref: f64,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PanesPayload {
    pub generation: u64,
    pub dims: (DimensionKind, DimensionKind),
    pub granularity: (usize, usize),
    pub width: usize,
    pub height: usize,
    /// Row-major; `null` marks an empty cell.
    pub elite_grid: Vec<Option<EliteView>>,
    pub top_preference: Vec<RankedView>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ModelStatus {
    pub test_acc: f64,
    pub episodes: u64,
    #[serde(rename = "meanW1")]
    pub mean_w1: f64,
}

/// Messages sent back to the client.
#[derive(Debug, Clone, PartialEq)]
pub enum Outbound {
    /// Acknowledges the request with the same `seq`, reporting the generation
    /// boundary at which it took effect.
    Ack {
        of: String,
        generation: u64,
        detail: Value,
    },
    SessionStarted {
        id: String,
        seed: u64,
        active_room: String,
    },
    RoomState {
        id: String,
        room: RoomDoc,
    },
    Published(Box<PanesPayload>),
    ModelStatus(ModelStatus),
    Error {
        code: String,
        message: String,
    },
}

impl Outbound {
    pub fn kind(&self) -> &'static str {
        match self {
            Outbound::Ack { .. } => "ack",
            Outbound::SessionStarted { .. } => "session/started",
            Outbound::RoomState { .. } => "room/state",
            Outbound::Published(_) => "suggestions/published",
            Outbound::ModelStatus(_) => "model/status",
            Outbound::Error { .. } => "error",
        }
    }

    pub fn to_envelope(&self, seq: Option<u64>) -> Envelope {
        let payload = match self {
            Outbound::Ack { of, generation, detail } => json!({ "of": of, "generation": generation, "detail": detail }),
            Outbound::SessionStarted { id, seed, active_room } => {
                json!({ "id": id, "seed": seed, "activeRoom": active_room })
            }
            Outbound::RoomState { id, room } => json!({ "id": id, "room": room }),
            Outbound::Published(p) => serde_json::to_value(p).unwrap(),
            Outbound::ModelStatus(s) => serde_json::to_value(s).unwrap(),
            Outbound::Error { code, message } => json!({ "code": code, "message": message }),
        };
        Envelope {
            kind: self.kind().to_string(),
            seq,
            payload,
        }
    }

    pub fn to_json(&self, seq: Option<u64>) -> String {
        serde_json::to_string(&self.to_envelope(seq)).expect("envelope serializes")
    }
}

impl From<&ProtocolError> for Outbound {
    fn from(e: &ProtocolError) -> Outbound {
        let code = match e {
            ProtocolError::Malformed(_) => "Malformed",
            ProtocolError::UnknownKind(_) => "UnknownKind",
            ProtocolError::Schema { .. } => "SchemaViolation",
        };
        Outbound::Error {
            code: code.into(),
            message: e.to_string(),
        }
    }
}
