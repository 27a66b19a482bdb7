//! The designer event log: the persistence source of truth of a session.

use serde::{Deserialize, Serialize};

use crate::analysis::DimensionKind;
use crate::level::TileKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EventKind {
    Edit {
        room: String,
        x: usize,
        y: usize,
        tile: TileKind,
    },
    Lock {
        room: String,
        x: usize,
        y: usize,
    },
    SelectRoom {
        room: String,
    },
    SetDims {
        dims: (DimensionKind, DimensionKind),
    },
    /// `episode` is `None` when no training episode could be scheduled.
    ApplySuggestion {
        cell: (usize, usize),
        episode: Option<u64>,
    },
    Publish {
        digest: String,
    },
    TrainDone {
        episode: u64,
        #[serde(rename = "testAcc")]
        test_acc: f64,
    },
    Save {
        name: String,
    },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::Edit { .. } => "EDIT",
            EventKind::Lock { .. } => "LOCK",
            EventKind::SelectRoom { .. } => "SELECT_ROOM",
            EventKind::SetDims { .. } => "SET_DIMS",
            EventKind::ApplySuggestion { .. } => "APPLY_SUGGESTION",
            EventKind::Publish { .. } => "PUBLISH",
            EventKind::TrainDone { .. } => "TRAIN_DONE",
            EventKind::Save { .. } => "SAVE",
        }
    }

    /// Whether replay must re-apply this event to reproduce engine state.
    pub fn changes_state(&self) -> bool {
        !matches!(self, EventKind::Publish { .. } | EventKind::Save { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignerEvent {
    pub seq: u64,
    /// Milliseconds since the session started; informational only.
    #[serde(rename = "timestampMs")]
    pub timestamp_ms: u64,
    /// Generation boundary at which the event took effect.
    pub generation: u64,
    #[serde(flatten)]
    pub event: EventKind,
}

/// Append-only, strictly sequenced list of events.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EventLog {
    events: Vec<DesignerEvent>,
}

impl EventLog {
    pub fn append(&mut self, timestamp_ms: u64, generation: u64, event: EventKind) -> &DesignerEvent {
        let seq = self.events.last().map_or(1, |e| e.seq + 1);
        self.events.push(DesignerEvent {
            seq,
            timestamp_ms,
            generation,
            event,
        });
        self.events.last().unwrap()
    }

    pub fn events(&self) -> &[DesignerEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Checks that sequence numbers strictly increase.
    pub fn is_ordered(&self) -> bool {
        self.events.windows(2).all(|w| w[0].seq < w[1].seq)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn event_json_shape_round_trips() {
        let mut log = EventLog::default();
        log.append(
            5,
            12,
            EventKind::ApplySuggestion {
                cell: (2, 3),
                episode: Some(1),
            },
        );
        log.append(
            9,
            40,
            EventKind::TrainDone {
                episode: 1,
                test_acc: 0.25,
            },
        );
        let text = serde_json::to_string(&log).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v[0]["kind"], "APPLY_SUGGESTION");
        assert_eq!(v[0]["payload"]["cell"], serde_json::json!([2, 3]));
        assert_eq!(v[1]["seq"], 2);
        assert_eq!(v[1]["payload"]["testAcc"], 0.25);
        let back: EventLog = serde_json::from_str(&text).unwrap();
        assert_eq!(back, log);
        assert!(back.is_ordered());
    }
}
