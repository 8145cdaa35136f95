//! Handshake-size comparison across signature size classes and modes.

use std::sync::OnceLock;

use qran_core::channel::compress::compressed_len;
use qran_core::channel::fragment::fragment_count;
use qran_core::channel::{CertCompression, Transport};
use qran_core::crypto::sizeclass::SIZE_CLASSES;
use qran_core::crypto::suite::ProtectionMode;
use qran_core::entropy::EntropySource;
use qran_core::netsim::{
    build_topology, default_scenario, ChannelSpec, InterfaceName, LinkProfile, ScenarioConfig,
    SecProtocol,
};
use serde::{Deserialize, Serialize};

use crate::report::ChannelResult;
use crate::runner::{
    channel_profile, issue_credentials, parallel_map, run_channel, validate, ChannelJob,
    HarnessError, RunOptions,
};

pub const SIZE_STUDY_MTU: usize = 1500;

/// Analytic sizes for one class: the responder chain as the Certificate
/// message body and its fragment count at [`SIZE_STUDY_MTU`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeRow {
    pub class: String,
    pub alg: String,
    pub key_plus_signature_kb: f64,
    pub artifact_bytes: usize,
    pub chain_bytes: usize,
    pub fragments_at_1500: usize,
}

pub fn max_fragment_body(mtu: usize) -> usize {
    Transport::Datagram { mtu }
        .max_fragment_body()
        .expect("datagram transport")
}

pub fn size_table() -> &'static [SizeRow] {
    static T: OnceLock<Vec<SizeRow>> = OnceLock::new();
    T.get_or_init(|| {
        SIZE_CLASSES
            .iter()
            .map(|c| {
                let mut e = EntropySource::qrng_sim("size-table", [0; 32]);
                let creds = issue_credentials(&mut e, c.alg_name(), "CN=initiator", "CN=responder")
                    .expect("size-class credentials");
                let body = compressed_len(&creds.responder.1, CertCompression::None);
                SizeRow {
                    class: c.name.to_string(),
                    alg: c.alg_name().to_string(),
                    key_plus_signature_kb: c.key_plus_signature_kb,
                    artifact_bytes: c.total_bytes(),
                    chain_bytes: body,
                    fragments_at_1500: fragment_count(body, max_fragment_body(SIZE_STUDY_MTU)),
                }
            })
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassRun {
    pub class: String,
    pub mode: ProtectionMode,
    pub success: bool,
    pub handshake_bytes: u64,
    pub datagrams: u64,
    pub cert_message_bytes: u64,
    pub cert_fragments: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ranking {
    pub mode: ProtectionMode,
    /// Class names by ascending handshake bytes.
    pub order: Vec<String>,
    /// Strictly increasing bytes in the table's class order.
    pub matches_table: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterfaceRun {
    pub channel: usize,
    pub interface: String,
    pub protocol: SecProtocol,
    pub classical_bytes: u64,
    pub hybrid_bytes: u64,
    pub pure_pq_bytes: u64,
    pub all_succeeded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub seed: u64,
    pub size_table: Vec<SizeRow>,
    pub classes: Vec<ClassRun>,
    pub rankings: Vec<Ranking>,
    pub interfaces: Vec<InterfaceRun>,
    pub classical_below_hybrid: bool,
}

impl Comparison {
    pub fn ranking(&self, mode: ProtectionMode) -> Option<&Ranking> {
        self.rankings.iter().find(|r| r.mode == mode)
    }

    pub fn ranking_reproduced(&self) -> bool {
        !self.rankings.is_empty() && self.rankings.iter().all(|r| r.matches_table)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("comparison serializes")
    }

    pub fn to_markdown(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::new();
        let _ = writeln!(s, "# Signature size-class comparison\n");
        let _ = writeln!(
            s,
            "PQ-DTLS over a lossless {SIZE_STUDY_MTU}-byte MTU link, mutual authentication, every certificate in the chain of the given class.\n"
        );
        let modes: Vec<ProtectionMode> = self.rankings.iter().map(|r| r.mode).collect();
        let _ = write!(s, "| Class | Key + signature (KB) |");
        for m in &modes {
            let _ = write!(s, " {} bytes | {} rank |", m.as_str(), m.as_str());
        }
        let _ = writeln!(s, " Certificate fragments |");
        let _ = writeln!(s, "|---|---|{}---|", "---|---|".repeat(modes.len()));
        for row in &self.size_table {
            let _ = write!(s, "| {} | {} |", row.class, row.key_plus_signature_kb);
            let mut frags = 0;
            for m in &modes {
                let run = self
                    .classes
                    .iter()
                    .find(|c| c.class == row.class && c.mode == *m);
                let rank = self
                    .ranking(*m)
                    .and_then(|r| r.order.iter().position(|c| *c == row.class))
                    .map_or("-".to_string(), |p| (p + 1).to_string());
                let _ = write!(s, " {} | {} |", run.map_or(0, |r| r.handshake_bytes), rank);
                frags = run.map_or(frags, |r| r.cert_fragments);
            }
            let _ = writeln!(s, " {frags} |");
        }
        let _ = writeln!(s, "\nRanking reproduced: {}\n", self.ranking_reproduced());
        let _ = writeln!(s, "## Modes per interface\n");
        let _ = writeln!(s, "| Interface | Protocol | CLASSICAL | HYBRID | PURE_PQ |");
        let _ = writeln!(s, "|---|---|---|---|---|");
        for r in &self.interfaces {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {} |",
                r.interface,
                r.protocol.as_str(),
                r.classical_bytes,
                r.hybrid_bytes,
                r.pure_pq_bytes
            );
        }
        let _ = writeln!(
            s,
            "\nCLASSICAL below HYBRID everywhere: {}",
            self.classical_below_hybrid
        );
        s
    }
}

const STUDY_MODES: [ProtectionMode; 2] = [ProtectionMode::Classical, ProtectionMode::Hybrid];

fn class_spec(class: &str, mode: ProtectionMode) -> ChannelSpec {
    ChannelSpec {
        interface: InterfaceName::F1AP,
        protocol: SecProtocol::PqDtls,
        mode,
        size_class: Some(class.to_string()),
        mutual_auth: true,
        link: Some(LinkProfile::lossless(SIZE_STUDY_MTU, 1.0)),
    }
}

/// Runs the size-class study plus CLASSICAL / HYBRID / PURE_PQ variants of
/// every channel in `config`.
pub fn compare_profiles(
    config: &ScenarioConfig,
    opts: &RunOptions,
) -> Result<Comparison, HarnessError> {
    let opts = RunOptions {
        comparison_mode: true,
        ..*opts
    };
    let study_cfg = default_scenario();
    let study_topo = build_topology(&study_cfg)?;
    let (topo, _) = validate(config, &opts)?;

    let mut jobs: Vec<(bool, ChannelJob)> = Vec::new();
    for mode in STUDY_MODES {
        for c in SIZE_CLASSES.iter() {
            let spec = class_spec(c.name, mode);
            let binding = study_topo
                .query(spec.interface)
                .expect("F1AP bound")
                .clone();
            jobs.push((
                true,
                ChannelJob {
                    id: jobs.len(),
                    repetition: 0,
                    profile: channel_profile(&spec, true)?,
                    spec,
                    binding,
                },
            ));
        }
    }
    for (i, base) in config.channels.iter().enumerate() {
        for mode in ProtectionMode::ALL {
            let spec = ChannelSpec {
                mode,
                size_class: None,
                ..base.clone()
            };
            let binding = topo
                .query(spec.interface)
                .expect("validated interface")
                .clone();
            jobs.push((
                false,
                ChannelJob {
                    id: i,
                    repetition: 0,
                    profile: channel_profile(&spec, true)?,
                    spec,
                    binding,
                },
            ));
        }
    }
    let results: Vec<ChannelResult> = parallel_map(&jobs, opts.threads, |(study, j)| {
        run_channel(config.seed, if *study { &study_topo } else { &topo }, j)
    });

    let n_study = STUDY_MODES.len() * SIZE_CLASSES.len();
    let classes: Vec<ClassRun> = results[..n_study]
        .iter()
        .map(|r| {
            let auth = r.server_auth.unwrap_or(crate::report::MessageStat {
                bytes: 0,
                fragments: 0,
            });
            ClassRun {
                class: r
                    .size_class
                    .as_deref()
                    .and_then(qran_core::crypto::sizeclass::lookup)
                    .map_or_else(String::new, |c| c.name.to_string()),
                mode: r.mode,
                success: r.success,
                handshake_bytes: r.handshake_bytes,
                datagrams: r.datagrams,
                cert_message_bytes: auth.bytes,
                cert_fragments: auth.fragments,
            }
        })
        .collect();
    let rankings = STUDY_MODES
        .iter()
        .map(|&mode| {
            let mine: Vec<&ClassRun> = classes.iter().filter(|c| c.mode == mode).collect();
            let mut sorted = mine.clone();
            sorted.sort_by_key(|c| c.handshake_bytes);
            let ok = mine.iter().all(|c| c.success)
                && mine
                    .windows(2)
                    .all(|w| w[0].handshake_bytes < w[1].handshake_bytes);
            Ranking {
                mode,
                order: sorted.iter().map(|c| c.class.clone()).collect(),
                matches_table: ok,
            }
        })
        .collect();
    let interfaces: Vec<InterfaceRun> = results[n_study..]
        .chunks(ProtectionMode::ALL.len())
        .map(|rs| {
            let by = |m| {
                rs.iter()
                    .find(|r| r.mode == m)
                    .map_or(0, |r| r.handshake_bytes)
            };
            InterfaceRun {
                channel: rs[0].id,
                interface: rs[0].interface.clone(),
                protocol: rs[0].protocol,
                classical_bytes: by(ProtectionMode::Classical),
                hybrid_bytes: by(ProtectionMode::Hybrid),
                pure_pq_bytes: by(ProtectionMode::PurePq),
                all_succeeded: rs.iter().all(|r| r.success),
            }
        })
        .collect();
    let classical_below_hybrid = !interfaces.is_empty()
        && interfaces
            .iter()
            .all(|r| r.all_succeeded && r.classical_bytes < r.hybrid_bytes);
    Ok(Comparison {
        seed: config.seed,
        size_table: size_table().to_vec(),
        classes,
        rankings,
        interfaces,
        classical_below_hybrid,
    })
}
