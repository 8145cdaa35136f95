//! Deterministic discrete-event simulation of the RAN topology, its links and
//! the interface-to-protocol migration policy.

mod world;

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::suite::ProtectionMode;

pub use world::{
    ChannelMeasurement, Endpoint, EndpointStatus, EventKind, LogEvent, World, DEFAULT_TIME_LIMIT,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetsimError {
    #[error("unknown interface {0}")]
    UnknownInterface(String),
    #[error("interface {interface} references undefined node {node}")]
    DanglingEndpoint { interface: String, node: String },
    #[error("unknown link profile {0}")]
    UnknownLink(String),
    #[error("invalid link profile: {0}")]
    InvalidLink(&'static str),
    #[error("simulation time limit exceeded")]
    TimeLimitExceeded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NodeRole {
    Smo,
    NonRtRic,
    NearRtRic,
    OCuCp,
    OCuUp,
    ODu,
    ORu,
    Amf,
    Upf,
    OCloud,
    Y1Consumer,
    Rapp,
}

impl NodeRole {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeRole::Smo => "SMO",
            NodeRole::NonRtRic => "NON_RT_RIC",
            NodeRole::NearRtRic => "NEAR_RT_RIC",
            NodeRole::OCuCp => "O_CU_CP",
            NodeRole::OCuUp => "O_CU_UP",
            NodeRole::ODu => "O_DU",
            NodeRole::ORu => "O_RU",
            NodeRole::Amf => "AMF",
            NodeRole::Upf => "UPF",
            NodeRole::OCloud => "O_CLOUD",
            NodeRole::Y1Consumer => "Y1_CONSUMER",
            NodeRole::Rapp => "RAPP",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId {
    pub role: NodeRole,
    #[serde(default)]
    pub instance: u16,
}

impl NodeId {
    pub const fn new(role: NodeRole, instance: u16) -> Self {
        NodeId { role, instance }
    }
}

impl core::fmt::Display for NodeId {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}#{}", self.role.as_str(), self.instance)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum InterfaceName {
    F1AP,
    E1AP,
    NGAP,
    E2,
    Xn,
    N3,
    #[serde(rename = "OFH_M_PLANE")]
    OfhMPlane,
    A1,
    O1,
    O2,
    Y1,
    R1,
}

impl InterfaceName {
    pub const ALL: [InterfaceName; 12] = [
        InterfaceName::F1AP,
        InterfaceName::E1AP,
        InterfaceName::NGAP,
        InterfaceName::E2,
        InterfaceName::Xn,
        InterfaceName::N3,
        InterfaceName::OfhMPlane,
        InterfaceName::A1,
        InterfaceName::O1,
        InterfaceName::O2,
        InterfaceName::Y1,
        InterfaceName::R1,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            InterfaceName::F1AP => "F1AP",
            InterfaceName::E1AP => "E1AP",
            InterfaceName::NGAP => "NGAP",
            InterfaceName::E2 => "E2",
            InterfaceName::Xn => "Xn",
            InterfaceName::N3 => "N3",
            InterfaceName::OfhMPlane => "OFH_M_PLANE",
            InterfaceName::A1 => "A1",
            InterfaceName::O1 => "O1",
            InterfaceName::O2 => "O2",
            InterfaceName::Y1 => "Y1",
            InterfaceName::R1 => "R1",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|n| n.as_str().eq_ignore_ascii_case(s))
    }

    /// Protocols permitted on this interface after migration.
    ///
    /// The M-Plane row also permits PQ-SSH, which is not modelled.
    pub fn allowed_protocols(self) -> &'static [SecProtocol] {
        use SecProtocol::*;
        match self {
            InterfaceName::F1AP
            | InterfaceName::E1AP
            | InterfaceName::NGAP
            | InterfaceName::E2
            | InterfaceName::Xn => &[PqIpsec, PqDtls],
            InterfaceName::N3 => &[PqIpsec],
            _ => &[PqMtls],
        }
    }

    /// Classical protection this interface used before migration.
    pub fn legacy_protection(self) -> &'static str {
        match self {
            InterfaceName::F1AP
            | InterfaceName::E1AP
            | InterfaceName::NGAP
            | InterfaceName::E2
            | InterfaceName::Xn => "IPsec or DTLS",
            InterfaceName::N3 => "IPsec",
            InterfaceName::OfhMPlane => "mTLS, SSHv2",
            _ => "mTLS",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SecProtocol {
    PqIpsec,
    PqDtls,
    PqMtls,
}

impl SecProtocol {
    pub fn as_str(self) -> &'static str {
        match self {
            SecProtocol::PqIpsec => "PQ_IPSEC",
            SecProtocol::PqDtls => "PQ_DTLS",
            SecProtocol::PqMtls => "PQ_MTLS",
        }
    }

    /// Whether the protocol runs over a reliable byte stream.
    pub fn is_stream(self) -> bool {
        self == SecProtocol::PqMtls
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkProfile {
    pub mtu: usize,
    #[serde(default)]
    pub loss_rate: f64,
    /// One-way latency in simulated milliseconds.
    pub latency_ms: f64,
    #[serde(default)]
    pub reorder_rate: f64,
    /// Bytes per simulated millisecond; `None` is unlimited.
    #[serde(default)]
    pub bandwidth_bytes_per_ms: Option<f64>,
}

impl LinkProfile {
    pub const FRONTHAUL: LinkProfile = LinkProfile::lossless(1500, 0.1);
    pub const MIDHAUL: LinkProfile = LinkProfile::lossless(1500, 1.0);
    pub const BACKHAUL: LinkProfile = LinkProfile::lossless(1500, 5.0);

    pub const fn lossless(mtu: usize, latency_ms: f64) -> Self {
        LinkProfile {
            mtu,
            loss_rate: 0.0,
            latency_ms,
            reorder_rate: 0.0,
            bandwidth_bytes_per_ms: None,
        }
    }

    pub fn validate(&self) -> Result<(), NetsimError> {
        if self.mtu < 256 {
            return Err(NetsimError::InvalidLink("mtu below 256"));
        }
        if !(0.0..=1.0).contains(&self.loss_rate) || !(0.0..=1.0).contains(&self.reorder_rate) {
            return Err(NetsimError::InvalidLink("rate outside [0, 1]"));
        }
        if !(self.latency_ms >= 0.0) || self.bandwidth_bytes_per_ms.is_some_and(|b| !(b > 0.0)) {
            return Err(NetsimError::InvalidLink("negative latency or bandwidth"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamTransportConfig {
    pub init_cwnd: u32,
    pub mss: u32,
    /// Round-trip time in simulated microseconds.
    pub rtt_us: u64,
}

impl StreamTransportConfig {
    pub const DEFAULT_INIT_CWND: u32 = 10;
    pub const DEFAULT_MSS: u32 = 1460;

    pub fn for_link(link: &LinkProfile) -> Self {
        StreamTransportConfig {
            init_cwnd: Self::DEFAULT_INIT_CWND,
            mss: Self::DEFAULT_MSS.min(link.mtu.saturating_sub(40) as u32),
            rtt_us: (link.latency_ms * 2000.0) as u64,
        }
    }
}

/// Round trips to deliver `flight_bytes` when the window starts at
/// `init_cwnd * mss` and doubles every round.
pub fn stream_rounds(cfg: &StreamTransportConfig, flight_bytes: u64) -> u32 {
    let first = (cfg.init_cwnd.max(1) as u64) * (cfg.mss.max(1) as u64);
    let mut window = first;
    let mut delivered = 0u64;
    let mut rounds = 0;
    while delivered < flight_bytes {
        delivered = delivered.saturating_add(window);
        window = window.saturating_mul(2);
        rounds += 1;
    }
    rounds
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterfaceBinding {
    pub name: InterfaceName,
    pub endpoints: (NodeId, NodeId),
    pub allowed_protocols: Vec<SecProtocol>,
    pub link: LinkProfile,
    pub link_name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PolicyVerdict {
    Allowed,
    Violation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Topology {
    pub nodes: Vec<NodeId>,
    pub interfaces: Vec<InterfaceBinding>,
}

impl Topology {
    pub fn query(&self, name: InterfaceName) -> Option<&InterfaceBinding> {
        self.interfaces.iter().find(|b| b.name == name)
    }

    pub fn policy_check(
        &self,
        name: InterfaceName,
        protocol: SecProtocol,
    ) -> Result<PolicyVerdict, NetsimError> {
        let b = self
            .query(name)
            .ok_or_else(|| NetsimError::UnknownInterface(name.as_str().to_string()))?;
        Ok(if b.allowed_protocols.contains(&protocol) {
            PolicyVerdict::Allowed
        } else {
            PolicyVerdict::Violation
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterfaceSpec {
    pub name: InterfaceName,
    pub endpoints: (NodeId, NodeId),
    pub link: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologySpec {
    pub nodes: Vec<NodeId>,
    #[serde(default)]
    pub links: BTreeMap<String, LinkProfile>,
    pub interfaces: Vec<InterfaceSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub interface: InterfaceName,
    pub protocol: SecProtocol,
    pub mode: ProtectionMode,
    /// TEST-ONLY size class used for every certificate on this channel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size_class: Option<String>,
    #[serde(default = "default_true")]
    pub mutual_auth: bool,
    /// Overrides the interface's link for this channel only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link: Option<LinkProfile>,
}

fn default_true() -> bool {
    true
}

fn default_repetitions() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    /// `None` selects the built-in topology.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology: Option<TopologySpec>,
    pub channels: Vec<ChannelSpec>,
    #[serde(default = "default_repetitions")]
    pub repetitions: u32,
}

const fn n(role: NodeRole, instance: u16) -> NodeId {
    NodeId::new(role, instance)
}

/// Built-in topology: one of each network function plus a second O-CU-CP as
/// the Xn peer.
pub fn default_topology_spec() -> TopologySpec {
    use InterfaceName::*;
    use NodeRole::*;
    let nodes = alloc::vec![
        n(Smo, 0),
        n(NonRtRic, 0),
        n(NearRtRic, 0),
        n(OCuCp, 0),
        n(OCuCp, 1),
        n(OCuUp, 0),
        n(ODu, 0),
        n(ORu, 0),
        n(Amf, 0),
        n(Upf, 0),
        n(OCloud, 0),
        n(Y1Consumer, 0),
        n(Rapp, 0),
    ];
    let mut links = BTreeMap::new();
    links.insert("fronthaul".to_string(), LinkProfile::FRONTHAUL);
    links.insert("midhaul".to_string(), LinkProfile::MIDHAUL);
    links.insert("backhaul".to_string(), LinkProfile::BACKHAUL);
    let spec = |name, a, b, link: &str| InterfaceSpec {
        name,
        endpoints: (a, b),
        link: link.to_string(),
    };
    let interfaces = alloc::vec![
        spec(F1AP, n(OCuCp, 0), n(ODu, 0), "midhaul"),
        spec(E1AP, n(OCuCp, 0), n(OCuUp, 0), "midhaul"),
        spec(NGAP, n(OCuCp, 0), n(Amf, 0), "backhaul"),
        spec(E2, n(NearRtRic, 0), n(OCuCp, 0), "midhaul"),
        spec(Xn, n(OCuCp, 0), n(OCuCp, 1), "backhaul"),
        spec(N3, n(OCuUp, 0), n(Upf, 0), "backhaul"),
        spec(OfhMPlane, n(ODu, 0), n(ORu, 0), "fronthaul"),
        spec(A1, n(NonRtRic, 0), n(NearRtRic, 0), "backhaul"),
        spec(O1, n(Smo, 0), n(ODu, 0), "backhaul"),
        spec(O2, n(Smo, 0), n(OCloud, 0), "backhaul"),
        spec(Y1, n(NearRtRic, 0), n(Y1Consumer, 0), "backhaul"),
        spec(R1, n(Rapp, 0), n(NonRtRic, 0), "midhaul"),
    ];
    TopologySpec {
        nodes,
        links,
        interfaces,
    }
}

/// Protocol each interface uses in the built-in scenario.
pub fn default_protocol(name: InterfaceName) -> SecProtocol {
    match name {
        InterfaceName::F1AP | InterfaceName::E2 => SecProtocol::PqDtls,
        other => other.allowed_protocols()[0],
    }
}

pub fn default_scenario() -> ScenarioConfig {
    ScenarioConfig {
        name: "default".to_string(),
        seed: 0,
        topology: None,
        channels: InterfaceName::ALL
            .into_iter()
            .map(|i| ChannelSpec {
                interface: i,
                protocol: default_protocol(i),
                mode: ProtectionMode::Hybrid,
                size_class: None,
                mutual_auth: true,
                link: None,
            })
            .collect(),
        repetitions: 1,
    }
}

pub fn build_topology(scenario: &ScenarioConfig) -> Result<Topology, NetsimError> {
    let spec = scenario
        .topology
        .clone()
        .unwrap_or_else(default_topology_spec);
    let mut links = default_topology_spec().links;
    links.extend(spec.links);
    let mut interfaces = Vec::with_capacity(spec.interfaces.len());
    for i in &spec.interfaces {
        for node in [i.endpoints.0, i.endpoints.1] {
            if !spec.nodes.contains(&node) {
                return Err(NetsimError::DanglingEndpoint {
                    interface: i.name.as_str().to_string(),
                    node: node.to_string(),
                });
            }
        }
        let link = *links
            .get(&i.link)
            .ok_or_else(|| NetsimError::UnknownLink(i.link.clone()))?;
        link.validate()?;
        interfaces.push(InterfaceBinding {
            name: i.name,
            endpoints: i.endpoints,
            allowed_protocols: i.name.allowed_protocols().to_vec(),
            link,
            link_name: i.link.clone(),
        });
    }
    for c in &scenario.channels {
        if !interfaces.iter().any(|b| b.name == c.interface) {
            return Err(NetsimError::UnknownInterface(
                c.interface.as_str().to_string(),
            ));
        }
        if let Some(l) = &c.link {
            l.validate()?;
        }
    }
    Ok(Topology {
        nodes: spec.nodes,
        interfaces,
    })
}
