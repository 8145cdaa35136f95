//! Run reports and their JSON / markdown renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use qran_core::crypto::suite::ProtectionMode;
use qran_core::netsim::{PolicyVerdict, ScenarioConfig, SecProtocol, Topology};
use serde::{Deserialize, Serialize};

use crate::compare::{size_table, SizeRow};
use crate::kat::KatSummary;

pub const TOOL: &str = "qran";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const HEADER_NOTE: &str = "All channels run between simulated endpoints over a simulated \
link. No radio units, UEs or 5G core are involved.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageStat {
    pub bytes: u64,
    pub fragments: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelResult {
    pub id: usize,
    pub repetition: u32,
    pub interface: String,
    pub endpoints: [String; 2],
    pub protocol: SecProtocol,
    pub allowed_protocols: Vec<SecProtocol>,
    pub policy: PolicyVerdict,
    pub mode: ProtectionMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size_class: Option<String>,
    pub signature: String,
    pub link: String,
    pub mtu: usize,
    pub success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub negotiated: Option<String>,
    pub handshake_bytes: u64,
    pub datagrams: u64,
    pub retransmissions: u64,
    pub flights: u32,
    pub sim_time_us: u64,
    /// Encoded size of the responder's chain.
    pub chain_bytes: usize,
    /// Responder's Certificate message (TLS) or IKE_AUTH response (IKE).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub server_auth: Option<MessageStat>,
    pub probe_delivered: bool,
    pub log_digest: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Aggregate {
    pub protocol: SecProtocol,
    pub mode: ProtectionMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size_class: Option<String>,
    pub runs: usize,
    pub succeeded: usize,
    pub total_handshake_bytes: u64,
    pub mean_handshake_bytes: u64,
    pub max_sim_time_us: u64,
    pub retransmissions: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub channel: usize,
    pub interface: String,
    pub protocol: SecProtocol,
    pub allowed: Vec<SecProtocol>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub interface: String,
    pub endpoints: [String; 2],
    pub legacy_protection: String,
    pub allowed_protocols: Vec<SecProtocol>,
    pub link: String,
    pub channels: Vec<usize>,
    pub status: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub runs: usize,
    pub succeeded: usize,
    pub failed: usize,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub note: String,
    pub scenario: String,
    pub seed: u64,
    pub repetitions: u32,
    pub summary: Summary,
    pub channels: Vec<ChannelResult>,
    pub aggregates: Vec<Aggregate>,
    pub violations: Vec<Violation>,
    pub coverage: Vec<CoverageRow>,
    pub size_classes: Vec<SizeRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kat: Option<KatSummary>,
}

pub mod exit {
    pub const PASS: i32 = 0;
    pub const PROTOCOL_FAILURE: i32 = 1;
    pub const POLICY_VIOLATION: i32 = 2;
    pub const CONFIG_ERROR: i32 = 3;
}

fn status_word(r: &ChannelResult) -> &'static str {
    match (r.policy, r.success) {
        (PolicyVerdict::Violation, _) => "VIOLATION",
        (_, true) => "OK",
        (_, false) => "FAILED",
    }
}

impl Report {
    pub fn assemble(
        config: &ScenarioConfig,
        topo: &Topology,
        channels: Vec<ChannelResult>,
    ) -> Report {
        let mut groups: BTreeMap<(SecProtocol, ProtectionMode, Option<String>), Aggregate> =
            BTreeMap::new();
        for c in &channels {
            let a = groups
                .entry((c.protocol, c.mode, c.size_class.clone()))
                .or_insert_with(|| Aggregate {
                    protocol: c.protocol,
                    mode: c.mode,
                    size_class: c.size_class.clone(),
                    runs: 0,
                    succeeded: 0,
                    total_handshake_bytes: 0,
                    mean_handshake_bytes: 0,
                    max_sim_time_us: 0,
                    retransmissions: 0,
                });
            a.runs += 1;
            a.succeeded += c.success as usize;
            a.total_handshake_bytes += c.handshake_bytes;
            a.max_sim_time_us = a.max_sim_time_us.max(c.sim_time_us);
            a.retransmissions += c.retransmissions;
        }
        let aggregates = groups
            .into_values()
            .map(|mut a| {
                a.mean_handshake_bytes = a.total_handshake_bytes / a.runs as u64;
                a
            })
            .collect();
        let violations: Vec<Violation> = channels
            .iter()
            .filter(|c| c.repetition == 0 && c.policy == PolicyVerdict::Violation)
            .map(|c| Violation {
                channel: c.id,
                interface: c.interface.clone(),
                protocol: c.protocol,
                allowed: c.allowed_protocols.clone(),
            })
            .collect();
        let coverage = topo
            .interfaces
            .iter()
            .map(|b| {
                let mine: Vec<&ChannelResult> = channels
                    .iter()
                    .filter(|c| c.interface == b.name.as_str())
                    .collect();
                let mut ids: Vec<usize> = mine.iter().map(|c| c.id).collect();
                ids.dedup();
                let status = if mine.is_empty() {
                    "NOT RUN"
                } else if let Some(bad) = mine.iter().map(|c| status_word(c)).find(|s| *s != "OK") {
                    bad
                } else {
                    "OK"
                };
                CoverageRow {
                    interface: b.name.as_str().to_string(),
                    endpoints: [b.endpoints.0.to_string(), b.endpoints.1.to_string()],
                    legacy_protection: b.name.legacy_protection().to_string(),
                    allowed_protocols: b.allowed_protocols.clone(),
                    link: b.link_name.clone(),
                    channels: ids,
                    status: status.to_string(),
                }
            })
            .collect();
        let succeeded = channels.iter().filter(|c| c.success).count();
        Report {
            tool: TOOL.to_string(),
            version: VERSION.to_string(),
            note: HEADER_NOTE.to_string(),
            scenario: config.name.clone(),
            seed: config.seed,
            repetitions: config.repetitions,
            summary: Summary {
                runs: channels.len(),
                succeeded,
                failed: channels.len() - succeeded,
                violations: violations.len(),
            },
            channels,
            aggregates,
            violations,
            coverage,
            size_classes: size_table().to_vec(),
            kat: None,
        }
    }

    /// Exit code under the 0/1/2 contract; violations outrank failures.
    pub fn exit_code(&self) -> i32 {
        let kat_failed = self.kat.as_ref().is_some_and(|k| !k.passed);
        if !self.violations.is_empty() {
            exit::POLICY_VIOLATION
        } else if self.summary.failed > 0 || kat_failed {
            exit::PROTOCOL_FAILURE
        } else {
            exit::PASS
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Report> {
        serde_json::from_str(s)
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# {} report: {}\n", self.tool, self.scenario);
        let _ = writeln!(s, "> {}\n", self.note);
        let _ = writeln!(
            s,
            "- version: {}\n- seed: {}\n- repetitions: {}\n- runs: {} ({} succeeded, {} failed)\n- policy violations: {}\n",
            self.version,
            self.seed,
            self.repetitions,
            self.summary.runs,
            self.summary.succeeded,
            self.summary.failed,
            self.summary.violations
        );

        let _ = writeln!(s, "## Interface migration coverage\n");
        let _ = writeln!(
            s,
            "| Interface | Endpoints | Legacy protection | Allowed | Channel | Mode | Status |"
        );
        let _ = writeln!(s, "|---|---|---|---|---|---|---|");
        for row in &self.coverage {
            let first = self.channels.iter().find(|c| c.interface == row.interface);
            let allowed: Vec<&str> = row.allowed_protocols.iter().map(|p| p.as_str()).collect();
            let _ = writeln!(
                s,
                "| {} | {} / {} | {} | {} | {} | {} | {} |",
                row.interface,
                row.endpoints[0],
                row.endpoints[1],
                row.legacy_protection,
                allowed.join(", "),
                first.map_or("-", |c| c.protocol.as_str()),
                first.map_or("-", |c| c.mode.as_str()),
                row.status
            );
        }

        let _ = writeln!(s, "\n## Channels\n");
        let _ = writeln!(
            s,
            "| # | Rep | Interface | Protocol | Mode | Signature | Negotiated | Bytes | Datagrams | Retx | Time (us) | Result |"
        );
        let _ = writeln!(s, "|---|---|---|---|---|---|---|---|---|---|---|---|");
        for c in &self.channels {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} |",
                c.id,
                c.repetition,
                c.interface,
                c.protocol.as_str(),
                c.mode.as_str(),
                c.signature,
                c.negotiated.as_deref().unwrap_or("-"),
                c.handshake_bytes,
                c.datagrams,
                c.retransmissions,
                c.sim_time_us,
                match &c.error {
                    Some(e) => format!("{}: {e}", status_word(c)),
                    None => status_word(c).to_string(),
                }
            );
        }

        if !self.violations.is_empty() {
            let _ = writeln!(s, "\n## Policy violations\n");
            for v in &self.violations {
                let allowed: Vec<&str> = v.allowed.iter().map(|p| p.as_str()).collect();
                let _ = writeln!(
                    s,
                    "- channel {}: {} on {} (allowed: {})",
                    v.channel,
                    v.protocol.as_str(),
                    v.interface,
                    allowed.join(", ")
                );
            }
        }

        let _ = writeln!(s, "\n## Profile aggregates\n");
        let _ = writeln!(
            s,
            "| Protocol | Mode | Size class | Runs | OK | Mean bytes | Max time (us) |"
        );
        let _ = writeln!(s, "|---|---|---|---|---|---|---|");
        for a in &self.aggregates {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {} | {} | {} |",
                a.protocol.as_str(),
                a.mode.as_str(),
                a.size_class.as_deref().unwrap_or("-"),
                a.runs,
                a.succeeded,
                a.mean_handshake_bytes,
                a.max_sim_time_us
            );
        }

        let _ = writeln!(s, "\n## Signature size classes\n");
        let _ = writeln!(
            s,
            "| Class | Key + signature (KB) | Chain bytes | Certificate fragments @ MTU 1500 |"
        );
        let _ = writeln!(s, "|---|---|---|---|");
        for r in &self.size_classes {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} |",
                r.class, r.key_plus_signature_kb, r.chain_bytes, r.fragments_at_1500
            );
        }

        if let Some(k) = &self.kat {
            let _ = writeln!(s, "\n## Known-answer tests\n");
            for f in &k.files {
                let detail = match (&f.mismatch, &f.error) {
                    (Some(m), _) => format!("FAIL ({m})"),
                    (None, Some(e)) => format!("FAIL ({e})"),
                    _ => "PASS".to_string(),
                };
                let _ = writeln!(
                    s,
                    "- {} ({}, {} vectors): {}",
                    f.file, f.alg, f.vectors, detail
                );
            }
        }
        s
    }
}
