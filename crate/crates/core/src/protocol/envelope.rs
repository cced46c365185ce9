use std::fmt;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use chrono::{DateTime, SecondsFormat, TimeZone, Utc};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};
use uuid::Uuid;

use super::{Channel, MessageKind, Role};

pub const PROTOCOL_VERSION: u64 = 1;

/// UTC wall-clock time at millisecond precision. Informational only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(i64);

impl Timestamp {
    pub fn from_millis(ms: i64) -> Self {
        Timestamp(ms)
    }

    pub fn now() -> Self {
        Timestamp(Utc::now().timestamp_millis())
    }

    pub fn millis(self) -> i64 {
        self.0
    }

    fn to_datetime(self) -> Option<DateTime<Utc>> {
        Utc.timestamp_millis_opt(self.0).single()
    }

    pub fn parse(s: &str) -> Option<Self> {
        DateTime::parse_from_rfc3339(s)
            .ok()
            .map(|dt| Timestamp(dt.timestamp_millis()))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.to_datetime() {
            Some(dt) => f.write_str(&dt.to_rfc3339_opts(SecondsFormat::Millis, true)),
            None => write!(f, "@{}ms", self.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Primitive {
    Translate,
    Rotate,
    Halt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellState {
    Free,
    Occupied,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MapCell {
    pub cx: i32,
    pub cy: i32,
    pub state: CellState,
}

fn as_base64<S: Serializer>(data: &[u8], s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&BASE64.encode(data))
}

fn as_uuid_hex<S: Serializer>(id: &Uuid, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&id.simple().to_string())
}

/// Kind-specific body of an envelope. The variant determines the kind.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Payload {
    Chat {
        text: String,
    },
    Command {
        text: String,
    },
    Motion {
        primitive: Primitive,
        magnitude: f64,
    },
    MapDelta {
        cells: Vec<MapCell>,
    },
    Pose {
        x: f64,
        y: f64,
        theta: f64,
    },
    Image {
        format: String,
        #[serde(serialize_with = "as_base64")]
        data: Vec<u8>,
    },
    LiveView {
        format: String,
        #[serde(serialize_with = "as_base64")]
        data: Vec<u8>,
    },
    Scan {
        ranges: Vec<f64>,
    },
    Status {
        code: String,
        detail: String,
    },
    Error {
        code: String,
        detail: String,
    },
    Join {
        role: Role,
    },
    Ack {
        #[serde(serialize_with = "as_uuid_hex")]
        of: Uuid,
    },
}

impl Payload {
    pub fn kind(&self) -> MessageKind {
        match self {
            Payload::Chat { .. } => MessageKind::Chat,
            Payload::Command { .. } => MessageKind::Command,
            Payload::Motion { .. } => MessageKind::Motion,
            Payload::MapDelta { .. } => MessageKind::MapDelta,
            Payload::Pose { .. } => MessageKind::Pose,
            Payload::Image { .. } => MessageKind::Image,
            Payload::LiveView { .. } => MessageKind::LiveView,
            Payload::Scan { .. } => MessageKind::Scan,
            Payload::Status { .. } => MessageKind::Status,
            Payload::Error { .. } => MessageKind::Error,
            Payload::Join { .. } => MessageKind::Join,
            Payload::Ack { .. } => MessageKind::Ack,
        }
    }

    pub fn chat(text: impl Into<String>) -> Self {
        Payload::Chat { text: text.into() }
    }

    pub fn status(code: impl Into<String>, detail: impl Into<String>) -> Self {
        Payload::Status {
            code: code.into(),
            detail: detail.into(),
        }
    }

    pub fn error(code: impl Into<String>, detail: impl Into<String>) -> Self {
        Payload::Error {
            code: code.into(),
            detail: detail.into(),
        }
    }

    /// Text of chat or command payloads.
    pub fn text(&self) -> Option<&str> {
        match self {
            Payload::Chat { text } | Payload::Command { text } => Some(text),
            _ => None,
        }
    }
}

/// The universal wire message.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub id: Uuid,
    pub session: String,
    pub seq: u64,
    pub ts: Timestamp,
    pub from: Role,
    pub channel: Channel,
    pub payload: Payload,
}

impl Envelope {
    /// A fresh envelope with a random id, seq 0 and the current time.
    pub fn new(session: impl Into<String>, from: Role, channel: Channel, payload: Payload) -> Self {
        Envelope {
            id: Uuid::new_v4(),
            session: session.into(),
            seq: 0,
            ts: Timestamp::now(),
            from,
            channel,
            payload,
        }
    }

    pub fn kind(&self) -> MessageKind {
        self.payload.kind()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecodeError {
    #[error("not_json: {0}")]
    NotJson(String),
    #[error("missing_field({0})")]
    MissingField(String),
    #[error("invalid_field({field}): expected {expected}")]
    InvalidField { field: String, expected: &'static str },
    #[error("unknown_enum({field}): {value:?}")]
    UnknownEnum { field: String, value: String },
    #[error("unsupported_version({0})")]
    UnsupportedVersion(String),
}

impl DecodeError {
    pub fn code(&self) -> &'static str {
        match self {
            DecodeError::NotJson(_) => "not_json",
            DecodeError::MissingField(_) => "missing_field",
            DecodeError::InvalidField { .. } => "invalid_field",
            DecodeError::UnknownEnum { .. } => "unknown_enum",
            DecodeError::UnsupportedVersion(_) => "unsupported_version",
        }
    }

    /// The offending field, when one can be named.
    pub fn field(&self) -> Option<&str> {
        match self {
            DecodeError::NotJson(_) => None,
            DecodeError::MissingField(f) => Some(f),
            DecodeError::InvalidField { field, .. } | DecodeError::UnknownEnum { field, .. } => {
                Some(field)
            }
            DecodeError::UnsupportedVersion(_) => Some("version"),
        }
    }
}

#[derive(Serialize)]
struct WireFrame<'a> {
    v: u64,
    id: String,
    session: &'a str,
    seq: u64,
    ts: String,
    from: Role,
    channel: Channel,
    kind: MessageKind,
    payload: &'a Payload,
}

impl<'a> From<&'a Envelope> for WireFrame<'a> {
    fn from(e: &'a Envelope) -> Self {
        WireFrame {
            v: PROTOCOL_VERSION,
            id: e.id.simple().to_string(),
            session: &e.session,
            seq: e.seq,
            ts: e.ts.to_string(),
            from: e.from,
            channel: e.channel,
            kind: e.kind(),
            payload: &e.payload,
        }
    }
}

/// Canonical JSON frame for an envelope.
pub fn encode(envelope: &Envelope) -> Vec<u8> {
    serde_json::to_vec(&WireFrame::from(envelope)).expect("envelope serialization is infallible")
}

pub fn decode(bytes: &[u8]) -> Result<Envelope, DecodeError> {
    let value: Value =
        serde_json::from_slice(bytes).map_err(|e| DecodeError::NotJson(e.to_string()))?;
    decode_value(&value)
}

struct Fields<'a> {
    obj: &'a Map<String, Value>,
    prefix: &'static str,
}

impl<'a> Fields<'a> {
    fn name(&self, key: &str) -> String {
        format!("{}{}", self.prefix, key)
    }

    fn get(&self, key: &str) -> Result<&'a Value, DecodeError> {
        self.obj
            .get(key)
            .ok_or_else(|| DecodeError::MissingField(self.name(key)))
    }

    fn invalid(&self, key: &str, expected: &'static str) -> DecodeError {
        DecodeError::InvalidField {
            field: self.name(key),
            expected,
        }
    }

    fn str(&self, key: &str) -> Result<&'a str, DecodeError> {
        self.get(key)?
            .as_str()
            .ok_or_else(|| self.invalid(key, "string"))
    }

    fn f64(&self, key: &str) -> Result<f64, DecodeError> {
        self.get(key)?
            .as_f64()
            .ok_or_else(|| self.invalid(key, "number"))
    }

    fn u64(&self, key: &str) -> Result<u64, DecodeError> {
        self.get(key)?
            .as_u64()
            .ok_or_else(|| self.invalid(key, "non-negative integer"))
    }

    fn i32(&self, key: &str) -> Result<i32, DecodeError> {
        self.get(key)?
            .as_i64()
            .and_then(|v| i32::try_from(v).ok())
            .ok_or_else(|| self.invalid(key, "32-bit integer"))
    }

    fn array(&self, key: &str) -> Result<&'a Vec<Value>, DecodeError> {
        self.get(key)?
            .as_array()
            .ok_or_else(|| self.invalid(key, "array"))
    }

    fn wire_enum<T: std::str::FromStr>(&self, key: &str) -> Result<T, DecodeError> {
        let raw = self.str(key)?;
        raw.parse().map_err(|_| DecodeError::UnknownEnum {
            field: self.name(key),
            value: raw.to_string(),
        })
    }

    fn serde_enum<T: serde::de::DeserializeOwned>(&self, key: &str) -> Result<T, DecodeError> {
        let raw = self.str(key)?;
        serde_json::from_value(Value::String(raw.to_string())).map_err(|_| {
            DecodeError::UnknownEnum {
                field: self.name(key),
                value: raw.to_string(),
            }
        })
    }
}

/// Decode an already-parsed JSON value. Fields are checked in frame order,
/// so the first offending field is the one reported.
pub fn decode_value(value: &Value) -> Result<Envelope, DecodeError> {
    let obj = value.as_object().ok_or_else(|| DecodeError::InvalidField {
        field: "frame".into(),
        expected: "object",
    })?;
    let top = Fields { obj, prefix: "" };

    let version = obj
        .get("v")
        .ok_or_else(|| DecodeError::MissingField("version".into()))?;
    match version.as_u64() {
        Some(PROTOCOL_VERSION) => {}
        Some(_) => return Err(DecodeError::UnsupportedVersion(version.to_string())),
        None => {
            return Err(DecodeError::InvalidField {
                field: "version".into(),
                expected: "integer 1",
            })
        }
    }

    let id = Uuid::parse_str(top.str("id")?).map_err(|_| top.invalid("id", "uuid hex"))?;
    let session = top.str("session")?.to_string();
    let seq = top.u64("seq")?;
    let ts = Timestamp::parse(top.str("ts")?).ok_or_else(|| top.invalid("ts", "ISO-8601 timestamp"))?;
    let from: Role = top.wire_enum("from")?;
    let channel: Channel = top.wire_enum("channel")?;
    let kind: MessageKind = top.wire_enum("kind")?;
    let body = top
        .get("payload")?
        .as_object()
        .ok_or_else(|| top.invalid("payload", "object"))?;
    let payload = decode_payload(kind, &Fields { obj: body, prefix: "payload." })?;

    Ok(Envelope {
        id,
        session,
        seq,
        ts,
        from,
        channel,
        payload,
    })
}

fn decode_payload(kind: MessageKind, p: &Fields<'_>) -> Result<Payload, DecodeError> {
    let payload = match kind {
        MessageKind::Chat => Payload::Chat {
            text: p.str("text")?.to_string(),
        },
        MessageKind::Command => Payload::Command {
            text: p.str("text")?.to_string(),
        },
        MessageKind::Motion => Payload::Motion {
            primitive: p.serde_enum("primitive")?,
            magnitude: p.f64("magnitude")?,
        },
        MessageKind::MapDelta => {
            let mut cells = Vec::new();
            for item in p.array("cells")? {
                let obj = item.as_object().ok_or_else(|| p.invalid("cells", "array of objects"))?;
                let cell = Fields { obj, prefix: "payload.cells[]." };
                cells.push(MapCell {
                    cx: cell.i32("cx")?,
                    cy: cell.i32("cy")?,
                    state: cell.serde_enum("state")?,
                });
            }
            Payload::MapDelta { cells }
        }
        MessageKind::Pose => Payload::Pose {
            x: p.f64("x")?,
            y: p.f64("y")?,
            theta: p.f64("theta")?,
        },
        MessageKind::Image | MessageKind::LiveView => {
            let format = p.str("format")?.to_string();
            let data = BASE64
                .decode(p.str("data")?)
                .map_err(|_| p.invalid("data", "base64"))?;
            if kind == MessageKind::Image {
                Payload::Image { format, data }
            } else {
                Payload::LiveView { format, data }
            }
        }
        MessageKind::Scan => {
            let ranges = p
                .array("ranges")?
                .iter()
                .map(|v| v.as_f64().ok_or_else(|| p.invalid("ranges", "array of numbers")))
                .collect::<Result<Vec<_>, _>>()?;
            Payload::Scan { ranges }
        }
        MessageKind::Status => Payload::Status {
            code: p.str("code")?.to_string(),
            detail: p.str("detail")?.to_string(),
        },
        MessageKind::Error => Payload::Error {
            code: p.str("code")?.to_string(),
            detail: p.str("detail")?.to_string(),
        },
        MessageKind::Join => Payload::Join {
            role: p.wire_enum("role")?,
        },
        MessageKind::Ack => Payload::Ack {
            of: Uuid::parse_str(p.str("of")?).map_err(|_| p.invalid("of", "uuid hex"))?,
        },
    };
    Ok(payload)
}

impl Serialize for Envelope {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        WireFrame::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Envelope {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let value = Value::deserialize(d)?;
        decode_value(&value).map_err(D::Error::custom)
    }
}
