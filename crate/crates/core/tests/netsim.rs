use qran_core::channel::{start_handshake, HandshakeConfig, HandshakeDriver, Role, Transport};
use qran_core::crypto::registry;
use qran_core::crypto::sig::SigKeyPair;
use qran_core::crypto::suite::ProtectionMode;
use qran_core::entropy::EntropySource;
use qran_core::netsim::{
    build_topology, default_scenario, EndpointStatus, InterfaceName, LinkProfile, PolicyVerdict,
    SecProtocol, StreamTransportConfig, World,
};
use qran_core::pki::{CaState, CertChain, Certificate, KeyUsage, KeyUsages};
use qran_core::time::SimTime;

use std::sync::OnceLock;

struct Creds {
    anchor: Certificate,
    client: (SigKeyPair, CertChain),
    server: (SigKeyPair, CertChain),
}

fn creds() -> &'static Creds {
    static C: OnceLock<Creds> = OnceLock::new();
    C.get_or_init(|| {
        let p = registry::ED448_ML_DSA_65;
        let mut e = EntropySource::qrng_sim("netsim-pki", [31; 32]);
        let mut root = CaState::init(&mut e, p, "CN=root", SimTime::ZERO).unwrap();
        let mut inter = root
            .issue_intermediate(&mut e, p, "CN=inter", 365, SimTime::ZERO)
            .unwrap();
        let u = KeyUsages::of(&[KeyUsage::TlsAuth]);
        let (ck, cc) = inter
            .issue_leaf(&mut e, p, "CN=du", u, 30, SimTime::ZERO)
            .unwrap();
        let (sk, sc) = inter
            .issue_leaf(&mut e, p, "CN=cu", u, 30, SimTime::ZERO)
            .unwrap();
        let ic = inter.certificate.clone();
        Creds {
            anchor: root.certificate.clone(),
            client: (ck, CertChain(vec![cc, ic.clone()])),
            server: (sk, CertChain(vec![sc, ic])),
        }
    })
}

fn world(mode: ProtectionMode, link: LinkProfile, stream: bool, seed: u64) -> World {
    let c = creds();
    let mk = |role, (k, ch): &(SigKeyPair, CertChain)| {
        let mut h = HandshakeConfig::new(role, mode, ch.clone(), k.clone(), c.anchor.clone());
        h.require_client_cert = true;
        h
    };
    let t = if stream {
        Transport::Stream
    } else {
        Transport::Datagram { mtu: link.mtu }
    };
    let cl = start_handshake(
        mk(Role::Client, &c.client),
        t,
        EntropySource::qrng_sim_labeled("w", seed, "c"),
    )
    .unwrap();
    let sv = start_handshake(
        mk(Role::Server, &c.server),
        t,
        EntropySource::qrng_sim_labeled("w", seed, "s"),
    )
    .unwrap();
    let st = stream.then(|| StreamTransportConfig::for_link(&link));
    World::new(link, st, seed, 0, Box::new(cl), Box::new(sv))
}

fn lossy() -> LinkProfile {
    LinkProfile {
        loss_rate: 0.1,
        reorder_rate: 0.05,
        mtu: 1200,
        ..LinkProfile::MIDHAUL
    }
}

#[test]
fn same_seed_same_log() {
    let digest = |seed| {
        let mut w = world(ProtectionMode::Hybrid, lossy(), false, seed);
        w.run().unwrap();
        (w.log_digest(), w.log_jsonl())
    };
    let (a, la) = digest(4);
    let (b, lb) = digest(4);
    assert_eq!(a, b);
    assert_eq!(la, lb);
    assert_ne!(digest(5).0, a);
}

#[test]
fn dead_link_never_completes() {
    let mut w = world(
        ProtectionMode::Hybrid,
        LinkProfile {
            loss_rate: 1.0,
            ..LinkProfile::MIDHAUL
        },
        false,
        1,
    );
    w.run().unwrap();
    let m = w.measure();
    assert!(!m.complete);
    assert_eq!(m.bytes_delivered, 0);
    assert!(matches!(w.endpoint(0).status(), EndpointStatus::Failed(_)));
}

#[test]
fn hybrid_costs_more_than_classical() {
    for stream in [false, true] {
        let bytes = |mode| {
            let mut w = world(mode, LinkProfile::MIDHAUL, stream, 2);
            w.run().unwrap();
            let m = w.measure();
            assert!(m.complete);
            m.handshake_bytes
        };
        assert!(bytes(ProtectionMode::Classical) < bytes(ProtectionMode::Hybrid));
    }
}

#[test]
fn datagrams_respect_mtu() {
    let link = LinkProfile {
        mtu: 1200,
        ..LinkProfile::MIDHAUL
    };
    let mut w = world(ProtectionMode::Hybrid, link, false, 3);
    w.run().unwrap();
    let m = w.measure();
    assert!(m.complete);
    assert!(m.datagrams_sent >= m.handshake_bytes.div_ceil(1200));
    assert!(w.log().iter().all(|e| e.len.is_none_or(|l| l <= 1200)));
    assert!(w.downcast::<HandshakeDriver>(0).is_some());
}

#[test]
fn stream_rounds_follow_slow_start() {
    let mut w = world(ProtectionMode::Hybrid, LinkProfile::BACKHAUL, true, 6);
    w.run().unwrap();
    let m = w.measure();
    assert!(m.complete);
    assert_eq!(m.retransmissions, 0);
    // Three flights plus slow-start rounds for the certificate flight.
    assert!(m.sim_time_us >= 3 * 5_000);
}

#[test]
fn default_scenario_binds_table_rows() {
    let s = default_scenario();
    let topo = build_topology(&s).unwrap();
    assert_eq!(topo.interfaces.len(), 12);
    assert_eq!(s.channels.len(), 12);
    for ch in &s.channels {
        assert_eq!(
            topo.policy_check(ch.interface, ch.protocol),
            Ok(PolicyVerdict::Allowed)
        );
    }
    assert!(matches!(
        topo.policy_check(InterfaceName::N3, SecProtocol::PqMtls),
        Ok(PolicyVerdict::Violation)
    ));
}
