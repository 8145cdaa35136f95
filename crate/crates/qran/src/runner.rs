//! Scenario execution: one simulated world per (channel, repetition).

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use qran_core::channel::{start_handshake, HandshakeConfig, HandshakeDriver, Role, Transport};
use qran_core::crypto::sig::SigKeyPair;
use qran_core::crypto::sizeclass;
use qran_core::crypto::suite::{ProfileOptions, SuiteProfile};
use qran_core::entropy::EntropySource;
use qran_core::ike::{ExchangeType, IkeConfig, IkeSa};
use qran_core::netsim::{
    build_topology, ChannelSpec, Endpoint, InterfaceBinding, LinkProfile, NetsimError,
    PolicyVerdict, ScenarioConfig, SecProtocol, StreamTransportConfig, Topology, World,
};
use qran_core::pki::{CaState, CertChain, Certificate, KeyUsage, KeyUsages, PkiError};
use qran_core::time::SimTime;
use thiserror::Error;

use crate::report::{ChannelResult, MessageStat, Report};

pub const PROBE: &[u8] = b"qran-probe";
pub const ROOT_CA: &str = "CN=SMO PQ-CA";
pub const ISSUING_CA: &str = "CN=SMO PQ-CA issuing";
pub const LEAF_DAYS: u32 = 30;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
}

impl From<NetsimError> for HarnessError {
    fn from(e: NetsimError) -> Self {
        HarnessError::ConfigInvalid(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub threads: usize,
    /// Admits TEST-ONLY size-class signatures on channels.
    pub comparison_mode: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
            comparison_mode: false,
        }
    }
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, HarnessError> {
    let io = |msg: String| HarnessError::Io {
        path: path.display().to_string(),
        msg,
    };
    let text = std::fs::read_to_string(path).map_err(|e| io(e.to_string()))?;
    serde_json::from_str(&text)
        .map_err(|e| HarnessError::ConfigInvalid(format!("{}: {e}", path.display())))
}

/// Suite for one channel. Size classes are only admitted in comparison mode.
pub fn channel_profile(
    spec: &ChannelSpec,
    comparison_mode: bool,
) -> Result<SuiteProfile, HarnessError> {
    let std = SuiteProfile::standard(spec.mode);
    let Some(name) = &spec.size_class else {
        return Ok(std);
    };
    let class = sizeclass::lookup(name)
        .ok_or_else(|| HarnessError::ConfigInvalid(format!("unknown size class {name}")))?;
    SuiteProfile::with_options(
        &format!("{}/{}", spec.mode.as_str(), class.name),
        spec.mode,
        std.kem.name,
        class.alg_name(),
        std.aead.name,
        std.hash.name,
        ProfileOptions { comparison_mode },
    )
    .map_err(|e| HarnessError::ConfigInvalid(format!("{} channel: {e}", spec.interface.as_str())))
}

/// Checks the scenario and returns its topology and per-channel suites.
pub fn validate(
    config: &ScenarioConfig,
    opts: &RunOptions,
) -> Result<(Topology, Vec<SuiteProfile>), HarnessError> {
    if config.repetitions == 0 {
        return Err(HarnessError::ConfigInvalid(
            "repetitions must be at least 1".into(),
        ));
    }
    if config.channels.is_empty() {
        return Err(HarnessError::ConfigInvalid(
            "scenario has no channels".into(),
        ));
    }
    let topo = build_topology(config)?;
    let profiles = config
        .channels
        .iter()
        .map(|c| channel_profile(c, opts.comparison_mode))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((topo, profiles))
}

pub struct Credentials {
    pub anchor: Certificate,
    pub initiator: (SigKeyPair, CertChain),
    pub responder: (SigKeyPair, CertChain),
}

/// Root, issuing CA and two leaves, all under `profile`.
pub fn issue_credentials(
    entropy: &mut EntropySource,
    profile: &str,
    initiator: &str,
    responder: &str,
) -> Result<Credentials, PkiError> {
    let now = SimTime::ZERO;
    let mut root = CaState::init(entropy, profile, ROOT_CA, now)?;
    let mut ca = root.issue_intermediate(entropy, profile, ISSUING_CA, 365, now)?;
    let usage = KeyUsages::of(&[KeyUsage::TlsAuth]);
    let (ik, ic) = ca.issue_leaf(entropy, profile, initiator, usage, LEAF_DAYS, now)?;
    let (rk, rc) = ca.issue_leaf(entropy, profile, responder, usage, LEAF_DAYS, now)?;
    let inter = ca.certificate.clone();
    Ok(Credentials {
        anchor: root.certificate,
        initiator: (ik, CertChain(vec![ic, inter.clone()])),
        responder: (rk, CertChain(vec![rc, inter])),
    })
}

/// One unit of work.
#[derive(Debug, Clone)]
pub struct ChannelJob {
    pub id: usize,
    pub repetition: u32,
    pub spec: ChannelSpec,
    pub binding: InterfaceBinding,
    pub profile: SuiteProfile,
}

impl ChannelJob {
    pub fn label(&self) -> String {
        format!("channel-{}-rep-{}", self.id, self.repetition)
    }

    pub fn link(&self) -> LinkProfile {
        self.spec.link.unwrap_or(self.binding.link)
    }

    fn stream_id(&self) -> u64 {
        ((self.id as u64) << 32) | self.repetition as u64
    }
}

fn build_world(seed: u64, job: &ChannelJob, creds: Credentials) -> Result<World, String> {
    let label = job.label();
    let link = job.link();
    let ea = EntropySource::qrng_sim_labeled("initiator", seed, &label);
    let eb = EntropySource::qrng_sim_labeled("responder", seed, &label);
    let Credentials {
        anchor,
        initiator: (ik, ic),
        responder: (rk, rc),
    } = creds;
    let (a, b, stream): (Box<dyn Endpoint>, Box<dyn Endpoint>, _) = match job.spec.protocol {
        SecProtocol::PqIpsec => {
            let mut ci = IkeConfig::new(Role::Client, job.spec.mode, ic, ik, anchor.clone());
            let mut cr = IkeConfig::new(Role::Server, job.spec.mode, rc, rk, anchor);
            ci.mtu = link.mtu;
            cr.mtu = link.mtu;
            let a = IkeSa::new(ci, ea).map_err(|e| e.to_string())?;
            let b = IkeSa::new(cr, eb).map_err(|e| e.to_string())?;
            (Box::new(a), Box::new(b), None)
        }
        p => {
            let transport = if p.is_stream() {
                Transport::Stream
            } else {
                Transport::Datagram { mtu: link.mtu }
            };
            let mk = |role, chain, key| {
                let mut h = HandshakeConfig::new(role, job.spec.mode, chain, key, anchor.clone());
                h.require_client_cert = job.spec.mutual_auth;
                h
            };
            let a = start_handshake(mk(Role::Client, ic, ik), transport, ea)
                .map_err(|e| e.to_string())?;
            let b = start_handshake(mk(Role::Server, rc, rk), transport, eb)
                .map_err(|e| e.to_string())?;
            let stream = p
                .is_stream()
                .then(|| StreamTransportConfig::for_link(&link));
            (Box::new(a), Box::new(b), stream)
        }
    };
    Ok(World::new(link, stream, seed, job.stream_id(), a, b))
}

fn server_auth_message(w: &World) -> Option<MessageStat> {
    if let Some(d) = w.downcast::<HandshakeDriver>(1) {
        return d
            .log()
            .iter()
            .find(|e| e.name == "Certificate" && e.direction == qran_core::channel::Direction::Sent)
            .map(|e| MessageStat {
                bytes: e.length as u64,
                fragments: e.fragments as u32,
            });
    }
    let sa = w.downcast::<IkeSa>(1)?;
    sa.log()
        .iter()
        .rev()
        .find(|e| {
            e.exchange == ExchangeType::IkeAuth
                && e.direction == qran_core::channel::Direction::Sent
        })
        .map(|e| MessageStat {
            bytes: e.bytes as u64,
            fragments: e.fragments as u32,
        })
}

fn negotiated(w: &World) -> Option<String> {
    if let Some(d) = w.downcast::<HandshakeDriver>(0) {
        return d.negotiated_group().map(str::to_string);
    }
    w.downcast::<IkeSa>(0)?.negotiated().map(|p| p.to_string())
}

/// Runs one channel to completion and probes it with one application message.
pub fn run_channel(seed: u64, topo: &Topology, job: &ChannelJob) -> ChannelResult {
    let link = job.link();
    let policy = topo
        .policy_check(job.spec.interface, job.spec.protocol)
        .unwrap_or(PolicyVerdict::Violation);
    let (na, nb) = job.binding.endpoints;
    let mut out = ChannelResult {
        id: job.id,
        repetition: job.repetition,
        interface: job.spec.interface.as_str().to_string(),
        endpoints: [na.to_string(), nb.to_string()],
        protocol: job.spec.protocol,
        allowed_protocols: job.binding.allowed_protocols.clone(),
        policy,
        mode: job.spec.mode,
        size_class: job.spec.size_class.clone(),
        signature: job.profile.sig.name.to_string(),
        link: job
            .spec
            .link
            .map_or_else(|| job.binding.link_name.clone(), |_| "custom".to_string()),
        mtu: link.mtu,
        success: false,
        error: None,
        negotiated: None,
        handshake_bytes: 0,
        datagrams: 0,
        retransmissions: 0,
        flights: 0,
        sim_time_us: 0,
        chain_bytes: 0,
        server_auth: None,
        probe_delivered: false,
        log_digest: String::new(),
    };
    let mut pki = EntropySource::qrng_sim_labeled("pki", seed, &job.label());
    let creds = match issue_credentials(
        &mut pki,
        job.profile.sig.name,
        &format!("CN={na}"),
        &format!("CN={nb}"),
    ) {
        Ok(c) => c,
        Err(e) => {
            out.error = Some(format!("credentials: {e}"));
            return out;
        }
    };
    out.chain_bytes = creds.responder.1.encoded_len();
    let mut w = match build_world(seed, job, creds) {
        Ok(w) => w,
        Err(e) => {
            out.error = Some(e);
            return out;
        }
    };
    let mut err = w.run().err().map(|e| e.to_string());
    let established = (0..2).all(|i| w.endpoint(i).status().succeeded());
    if established && err.is_none() {
        err = match w.endpoint_mut(0).send_app(PROBE) {
            Ok(()) => w.flush().err().map(|e| e.to_string()),
            Err(e) => Some(format!("probe: {e}")),
        };
        out.probe_delivered = w.endpoint_mut(1).recv_app().as_deref() == Some(PROBE);
        if err.is_none() && !out.probe_delivered {
            err = Some("probe not delivered".to_string());
        }
    }
    if err.is_none() {
        err = (0..2).find_map(|i| match w.endpoint(i).status() {
            qran_core::netsim::EndpointStatus::Failed(e) => Some(format!(
                "{}: {e}",
                if i == 0 { "initiator" } else { "responder" }
            )),
            _ => None,
        });
    }
    let m = w.measure();
    out.success = established && err.is_none();
    out.error = err;
    out.negotiated = negotiated(&w);
    out.handshake_bytes = m.handshake_bytes;
    out.datagrams = m.datagrams_sent;
    out.retransmissions = m.retransmissions;
    out.flights = m.flights;
    out.sim_time_us = m.sim_time_us;
    out.server_auth = server_auth_message(&w);
    out.log_digest = hex::encode(w.log_digest());
    out
}

/// Expands the scenario into jobs ordered by (channel, repetition).
pub fn jobs(
    config: &ScenarioConfig,
    topo: &Topology,
    profiles: &[SuiteProfile],
) -> Vec<ChannelJob> {
    let mut out = Vec::new();
    for (id, (spec, profile)) in config.channels.iter().zip(profiles).enumerate() {
        let binding = topo
            .query(spec.interface)
            .expect("validated interface")
            .clone();
        for repetition in 0..config.repetitions {
            out.push(ChannelJob {
                id,
                repetition,
                spec: spec.clone(),
                binding: binding.clone(),
                profile: profile.clone(),
            });
        }
    }
    out
}

/// Runs `f` over `items` on up to `threads` workers; results keep input order.
pub fn parallel_map<T: Sync, R: Send>(
    items: &[T],
    threads: usize,
    f: impl Fn(&T) -> R + Sync,
) -> Vec<R> {
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = threads.clamp(1, items.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(item) = items.get(i) else { break };
                let r = f(item);
                *slots[i].lock().expect("result slot") = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("result slot").expect("every job ran"))
        .collect()
}

pub fn run_scenario(config: &ScenarioConfig, opts: &RunOptions) -> Result<Report, HarnessError> {
    let (topo, profiles) = validate(config, opts)?;
    let jobs = jobs(config, &topo, &profiles);
    let seed = config.seed;
    let channels = parallel_map(&jobs, opts.threads, |j| run_channel(seed, &topo, j));
    Ok(Report::assemble(config, &topo, channels))
}
