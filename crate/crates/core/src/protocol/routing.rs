use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{Channel, MessageKind, Role};

/// Why a (sender, channel, kind) triple was refused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenialReason {
    WrongSender,
    KindNotAllowedOnChannel,
}

impl DenialReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DenialReason::WrongSender => "wrong_sender",
            DenialReason::KindNotAllowedOnChannel => "kind_not_allowed_on_channel",
        }
    }
}

impl fmt::Display for DenialReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RouteDecision {
    Allowed(BTreeSet<Role>),
    Denied(DenialReason),
}

impl RouteDecision {
    pub fn is_allowed(&self) -> bool {
        matches!(self, RouteDecision::Allowed(_))
    }

    pub fn receivers(&self) -> Option<&BTreeSet<Role>> {
        match self {
            RouteDecision::Allowed(r) => Some(r),
            RouteDecision::Denied(_) => None,
        }
    }
}

/// The channel topology as an explicit allow-table.
///
/// Each channel has one permitted sender; each kind legal on a channel maps
/// to its receiver set. `sim_sensor` entries form the sensor fan-out
/// sub-table. `server_ctrl` carries no routable kinds: frames the server
/// originates (join acks, errors, suggestions) are direct replies and never
/// pass through the matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoutingMatrix {
    table: BTreeMap<Channel, BTreeMap<MessageKind, BTreeSet<Role>>>,
}

fn roles(list: &[Role]) -> BTreeSet<Role> {
    list.iter().copied().collect()
}

impl RoutingMatrix {
    pub fn standard() -> Self {
        use Channel::*;
        use MessageKind as K;
        use Role::*;

        let mut table: BTreeMap<Channel, BTreeMap<MessageKind, BTreeSet<Role>>> = BTreeMap::new();
        let mut allow = |channel: Channel, kind: MessageKind, to: &[Role]| {
            table.entry(channel).or_default().insert(kind, roles(to));
        };

        allow(PDmSpeech, K::Chat, &[Dm]);
        allow(DmPChat, K::Chat, &[Participant]);
        allow(DmRnChat, K::Chat, &[Rn]);
        allow(DmRnChat, K::Command, &[Rn]);
        allow(RnDmSpeech, K::Chat, &[Dm]);
        allow(RnSimCmd, K::Motion, &[Sim]);
        // capture requests ride as status {code: "capture_image"}
        allow(RnSimCmd, K::Status, &[Sim]);

        allow(SimSensor, K::MapDelta, &[Participant, Dm, Rn]);
        allow(SimSensor, K::Pose, &[Participant, Dm, Rn]);
        allow(SimSensor, K::Image, &[Participant, Dm, Rn]);
        allow(SimSensor, K::LiveView, &[Dm, Rn]);
        allow(SimSensor, K::Scan, &[Rn]);
        // primitive outcomes and sim-side refusals go back to the navigator
        allow(SimSensor, K::Status, &[Rn]);
        allow(SimSensor, K::Error, &[Rn]);

        Self { table }
    }

    pub fn validate(&self, from: Role, channel: Channel, kind: MessageKind) -> RouteDecision {
        if channel.sender() != from {
            return RouteDecision::Denied(DenialReason::WrongSender);
        }
        match self.table.get(&channel).and_then(|kinds| kinds.get(&kind)) {
            Some(receivers) => RouteDecision::Allowed(receivers.clone()),
            None => RouteDecision::Denied(DenialReason::KindNotAllowedOnChannel),
        }
    }

    /// Every allowed (sender, channel, kind) triple with its receivers.
    pub fn allowed(&self) -> impl Iterator<Item = (Role, Channel, MessageKind, &BTreeSet<Role>)> {
        self.table.iter().flat_map(|(channel, kinds)| {
            kinds
                .iter()
                .map(move |(kind, to)| (channel.sender(), *channel, *kind, to))
        })
    }

    /// Directed role-to-role edges implied by the allow-table.
    pub fn edges(&self) -> BTreeSet<(Role, Role)> {
        self.allowed()
            .flat_map(|(from, _, _, to)| to.iter().map(move |r| (from, *r)))
            .collect()
    }

    /// Roles reachable from `start` by following allowed edges, excluding
    /// paths that pass through `avoid`.
    pub fn reachable_avoiding(&self, start: Role, avoid: Role) -> BTreeSet<Role> {
        let edges = self.edges();
        let mut seen = BTreeSet::new();
        let mut stack = vec![start];
        while let Some(node) = stack.pop() {
            for (a, b) in &edges {
                if *a == node && *b != avoid && seen.insert(*b) {
                    stack.push(*b);
                }
            }
        }
        seen
    }
}

/// Route check against the standard matrix.
pub fn validate_route(from: Role, channel: Channel, kind: MessageKind) -> RouteDecision {
    static MATRIX: OnceLock<RoutingMatrix> = OnceLock::new();
    MATRIX
        .get_or_init(RoutingMatrix::standard)
        .validate(from, channel, kind)
}
