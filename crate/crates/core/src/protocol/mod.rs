//! Shared wire vocabulary: roles, channels, message kinds, the envelope
//! codec and the routing allow-table.

mod envelope;
mod routing;

pub use envelope::{
    decode, decode_value, encode, CellState, DecodeError, Envelope, MapCell, Payload, Primitive, Timestamp,
    PROTOCOL_VERSION,
};
pub use routing::{validate_route, DenialReason, RouteDecision, RoutingMatrix};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Raised when a wire string does not name a known enum value.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown {field} value {value:?}")]
pub struct UnknownValue {
    pub field: &'static str,
    pub value: String,
}

macro_rules! wire_enum {
    (
        $(#[$meta:meta])*
        $name:ident, $field:literal { $($variant:ident => $wire:literal),+ $(,)? }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $wire)] $variant,)+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $wire,)+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = UnknownValue;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($wire => Ok($name::$variant),)+
                    other => Err(UnknownValue { field: $field, value: other.to_string() }),
                }
            }
        }
    };
}

wire_enum! {
    /// A participant in a session. `Sim` and `Server` are system roles.
    Role, "role" {
        Participant => "participant",
        Dm => "dm",
        Rn => "rn",
        Sim => "sim",
        Server => "server",
    }
}

impl Role {
    /// Roles a client connection may attach as.
    pub const HUMAN: [Role; 3] = [Role::Participant, Role::Dm, Role::Rn];

    pub fn is_human(self) -> bool {
        matches!(self, Role::Participant | Role::Dm | Role::Rn)
    }

    pub fn is_wizard(self) -> bool {
        matches!(self, Role::Dm | Role::Rn)
    }
}

wire_enum! {
    /// A one-way message stream with a single permitted sender.
    Channel, "channel" {
        PDmSpeech => "p_dm_speech",
        DmPChat => "dm_p_chat",
        DmRnChat => "dm_rn_chat",
        RnDmSpeech => "rn_dm_speech",
        RnSimCmd => "rn_sim_cmd",
        SimSensor => "sim_sensor",
        ServerCtrl => "server_ctrl",
    }
}

impl Channel {
    /// The only role allowed to send on this channel.
    pub fn sender(self) -> Role {
        match self {
            Channel::PDmSpeech => Role::Participant,
            Channel::DmPChat | Channel::DmRnChat => Role::Dm,
            Channel::RnDmSpeech | Channel::RnSimCmd => Role::Rn,
            Channel::SimSensor => Role::Sim,
            Channel::ServerCtrl => Role::Server,
        }
    }
}

wire_enum! {
    MessageKind, "kind" {
        Chat => "chat",
        Command => "command",
        Motion => "motion",
        MapDelta => "map_delta",
        Pose => "pose",
        Image => "image",
        LiveView => "live_view",
        Scan => "scan",
        Status => "status",
        Error => "error",
        Join => "join",
        Ack => "ack",
    }
}

impl MessageKind {
    /// Kinds produced by the simulator and fanned out by the sensor sub-table.
    pub fn is_sensor(self) -> bool {
        matches!(
            self,
            MessageKind::MapDelta
                | MessageKind::Pose
                | MessageKind::Image
                | MessageKind::LiveView
                | MessageKind::Scan
        )
    }
}

/// Hands out the per-session total order over every logged message.
///
/// Not thread-safe on its own; the session's event queue serializes calls.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SeqCounter {
    next: u64,
}

impl SeqCounter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Resume after `last` has already been issued.
    pub fn resume_after(last: u64) -> Self {
        Self { next: last + 1 }
    }

    pub fn next_seq(&mut self) -> u64 {
        let seq = self.next;
        self.next += 1;
        seq
    }

    /// Number of values issued so far.
    pub fn issued(&self) -> u64 {
        self.next
    }
}
