use qran_core::channel::Role;
use qran_core::crypto::aead;
use qran_core::crypto::registry;
use qran_core::crypto::sig::SigKeyPair;
use qran_core::crypto::suite::ProtectionMode;
use qran_core::entropy::EntropySource;
use qran_core::ike::message::{self, Body, FLAG_INITIATOR};
use qran_core::ike::{
    recompute_child_keys, DirectionKeys, ExchangeType, IkeConfig, IkeError, IkeSa, Message,
    Payload, Phase, PpkEntry, Proposal, EXCHANGE_ORDER, INVALID_SYNTAX,
};
use qran_core::netsim::{EndpointStatus, LinkProfile, World};
use qran_core::pki::{CaState, CertChain, Certificate, KeyUsage, KeyUsages};
use qran_core::time::{SimDuration, SimTime};

use std::sync::OnceLock;

struct Creds {
    anchor: Certificate,
    i: (SigKeyPair, CertChain),
    r: (SigKeyPair, CertChain),
}

fn creds() -> &'static Creds {
    static C: OnceLock<Creds> = OnceLock::new();
    C.get_or_init(|| {
        let profile = registry::ED448_ML_DSA_65;
        let mut e = EntropySource::qrng_sim("ike-test-pki", [21; 32]);
        let mut root = CaState::init(&mut e, profile, "CN=root", SimTime::ZERO).unwrap();
        let usage = KeyUsages::of(&[KeyUsage::TlsAuth]);
        let (ik, ic) = root
            .issue_leaf(&mut e, profile, "CN=gnb-cu", usage, 30, SimTime::ZERO)
            .unwrap();
        let (rk, rc) = root
            .issue_leaf(&mut e, profile, "CN=amf", usage, 30, SimTime::ZERO)
            .unwrap();
        Creds {
            anchor: root.certificate.clone(),
            i: (ik, CertChain(vec![ic])),
            r: (rk, CertChain(vec![rc])),
        }
    })
}

fn configs(mode: ProtectionMode) -> (IkeConfig, IkeConfig) {
    let c = creds();
    (
        IkeConfig::new(
            Role::Client,
            mode,
            c.i.1.clone(),
            c.i.0.clone(),
            c.anchor.clone(),
        ),
        IkeConfig::new(
            Role::Server,
            mode,
            c.r.1.clone(),
            c.r.0.clone(),
            c.anchor.clone(),
        ),
    )
}

fn ppk(id: &str, byte: u8) -> PpkEntry {
    PpkEntry::new(id, &[byte; 32]).unwrap()
}

fn pair(ic: IkeConfig, rc: IkeConfig, seed: u8) -> (IkeSa, IkeSa) {
    (
        IkeSa::new(ic, EntropySource::qrng_sim("ike-i", [seed; 32])).unwrap(),
        IkeSa::new(rc, EntropySource::qrng_sim("ike-r", [seed ^ 0x55; 32])).unwrap(),
    )
}

/// Lockstep delivery with 1 ms per hop. `hook` sees every batch before
/// delivery; its last argument is true for initiator-to-responder.
fn exchange(i: &mut IkeSa, r: &mut IkeSa, mut hook: impl FnMut(&IkeSa, &mut Vec<Vec<u8>>, bool)) {
    let mut now = SimTime::ZERO;
    let mut to_r: Vec<Vec<u8>> = i.drive(&[], now).into_iter().map(|o| o.bytes).collect();
    for _ in 0..1000 {
        hook(i, &mut to_r, true);
        now = now + SimDuration::from_millis(1);
        let mut to_i: Vec<Vec<u8>> = r.drive(&to_r, now).into_iter().map(|o| o.bytes).collect();
        hook(i, &mut to_i, false);
        now = now + SimDuration::from_millis(1);
        to_r = i.drive(&to_i, now).into_iter().map(|o| o.bytes).collect();
        if to_r.is_empty() && to_i.is_empty() && !i.wants_drive() {
            match i.next_timer() {
                Some(t) => {
                    now = t.max(now);
                    to_r = i.drive(&[], now).into_iter().map(|o| o.bytes).collect();
                }
                None => return,
            }
        }
    }
    panic!("exchange did not settle");
}

fn run(i: &mut IkeSa, r: &mut IkeSa) {
    exchange(i, r, |_, _, _| {});
}

fn established(mode: ProtectionMode, with_ppk: bool) -> (IkeSa, IkeSa) {
    let (mut ic, mut rc) = configs(mode);
    if with_ppk {
        ic.ppk = Some(ppk("ppk-7", 0xa7));
        rc.ppk_store = vec![ppk("ppk-1", 0x11), ppk("ppk-7", 0xa7)];
    }
    let (mut i, mut r) = pair(ic, rc, 3);
    run(&mut i, &mut r);
    assert_eq!(i.phase(), Phase::Established, "{:?}", i.error());
    assert_eq!(r.phase(), Phase::Established, "{:?}", r.error());
    (i, r)
}

fn sent_requests(sa: &IkeSa) -> Vec<ExchangeType> {
    let mut v: Vec<ExchangeType> = sa
        .log()
        .iter()
        .filter(|e| !e.response)
        .map(|e| e.exchange)
        .collect();
    v.dedup();
    v
}

#[test]
fn five_exchanges_in_order() {
    let (mut i, mut r) = established(ProtectionMode::Hybrid, true);
    i.rekey_child(None, Some(registry::ML_KEM_768)).unwrap();
    run(&mut i, &mut r);
    i.delete().unwrap();
    run(&mut i, &mut r);
    assert_eq!(sent_requests(&i), EXCHANGE_ORDER.to_vec());
    let labels = |x: ExchangeType, response: bool| {
        i.log()
            .iter()
            .find(|e| e.exchange == x && e.response == response)
            .unwrap()
            .payloads
            .clone()
    };
    assert_eq!(
        labels(ExchangeType::IkeSaInit, false),
        ["SA", "KE", "Nonce", "N(INTERMEDIATE_EXCHANGE_SUPPORTED)"]
    );
    assert_eq!(
        labels(ExchangeType::IkeSaInit, true),
        [
            "SA",
            "KE",
            "Nonce",
            "CERTREQ",
            "N(INTERMEDIATE_EXCHANGE_SUPPORTED)"
        ]
    );
    assert_eq!(labels(ExchangeType::IkeIntermediate, false), ["KE"]);
    assert_eq!(
        labels(ExchangeType::IkeAuth, false),
        ["IDi", "CERT", "AUTH", "SA", "TSi", "TSr", "N(PPK_IDENTITY)"]
    );
    assert_eq!(
        labels(ExchangeType::IkeAuth, true),
        ["IDr", "CERT", "AUTH", "SA", "TSi", "TSr", "N(PPK_IDENTITY)"]
    );
    assert_eq!(
        labels(ExchangeType::CreateChildSa, false),
        ["SA", "Nonce", "KE", "TSi", "TSr"]
    );
    assert_eq!(
        labels(ExchangeType::Informational, false),
        ["DELETE", "N(NAT_DETECTION_SOURCE_IP)"]
    );
    assert_eq!(labels(ExchangeType::Informational, true), ["DELETE"]);
    assert_eq!(i.phase(), Phase::Closed);
    assert_eq!(r.phase(), Phase::Closed);
}

#[test]
fn intermediate_carries_ml_kem_768() {
    let (i, r) = established(ProtectionMode::Hybrid, false);
    let ke = |x: ExchangeType, response: bool| {
        i.log()
            .iter()
            .find(|e| e.exchange == x && e.response == response)
            .unwrap()
            .ke_len
    };
    assert_eq!(ke(ExchangeType::IkeIntermediate, false), Some(1184));
    assert_eq!(ke(ExchangeType::IkeIntermediate, true), Some(1088));
    assert_eq!(ke(ExchangeType::IkeSaInit, false), Some(32));
    assert!(i
        .log()
        .iter()
        .filter(|e| e.exchange == ExchangeType::IkeIntermediate)
        .all(|e| e.encrypted));
    assert!(i.pq_key_exchange() && r.pq_key_exchange());
    assert_eq!(i.ike_keys().unwrap().sk_d, r.ike_keys().unwrap().sk_d);
    assert_eq!(i.child().unwrap().keys(), r.child().unwrap().keys());
    assert!(i.message_id() >= 3);
}

#[test]
fn kem_secret_changes_child_keys() {
    let (i, _) = established(ProtectionMode::Hybrid, false);
    let inputs = i.key_inputs();
    assert_eq!(
        Some(&recompute_child_keys(&inputs, None)),
        i.child().unwrap().keys()
    );
    let mut without = inputs.clone();
    without.kem_shared = None;
    assert_ne!(
        &recompute_child_keys(&without, None),
        i.child().unwrap().keys().unwrap()
    );
    let mut flipped = inputs;
    flipped.kem_shared.as_mut().unwrap()[0] ^= 1;
    assert_ne!(
        &recompute_child_keys(&flipped, None),
        i.child().unwrap().keys().unwrap()
    );
}

#[test]
fn responder_without_intermediate_goes_classical() {
    let (ic, mut rc) = configs(ProtectionMode::Hybrid);
    rc.intermediate_supported = false;
    let (mut i, mut r) = pair(ic, rc, 4);
    run(&mut i, &mut r);
    assert_eq!(i.phase(), Phase::Established);
    assert!(!i.peer_supports_intermediate());
    assert!(!i.pq_key_exchange());
    assert_eq!(i.negotiated().unwrap().ke1, None);
    assert_eq!(
        sent_requests(&i),
        [ExchangeType::IkeSaInit, ExchangeType::IkeAuth]
    );
}

#[test]
fn strict_ke1_refuses_downgrade() {
    let (mut ic, mut rc) = configs(ProtectionMode::Hybrid);
    ic.ike_proposals = Proposal::parse_list("aes256gcm16-sha384-x25519-ke1_mlkem768!").unwrap();
    rc.intermediate_supported = false;
    let (mut i, mut r) = pair(ic, rc, 5);
    run(&mut i, &mut r);
    assert_eq!(i.phase(), Phase::Failed);
    assert_eq!(i.error(), Some(&IkeError::NoProposalChosen));
}

#[test]
fn proposal_mismatch_is_no_proposal_chosen() {
    let (mut ic, rc) = configs(ProtectionMode::Hybrid);
    ic.ike_proposals = Proposal::parse_list("aes256gcm16-sha384-ecp384-ke1_mlkem768").unwrap();
    let (mut i, mut r) = pair(ic, rc, 6);
    run(&mut i, &mut r);
    assert_eq!(i.error(), Some(&IkeError::NoProposalChosen));
    assert_eq!(r.error(), Some(&IkeError::NoProposalChosen));
}

#[test]
fn ecp384_sa_init() {
    let (mut ic, mut rc) = configs(ProtectionMode::Hybrid);
    ic.ike_proposals = Proposal::parse_list("aes256-sha384-ecp384-ke1_mlkem768!").unwrap();
    rc.ike_proposals = ic.ike_proposals.clone();
    let (mut i, mut r) = pair(ic, rc, 7);
    run(&mut i, &mut r);
    assert_eq!(i.phase(), Phase::Established, "{:?}", i.error());
    assert!(i.pq_key_exchange());
}

#[test]
fn ppk_is_mixed_into_child_keys() {
    let (i, r) = established(ProtectionMode::Hybrid, true);
    assert!(i.ppk_used() && r.ppk_used());
    let honest = i.child().unwrap().keys().unwrap().clone();
    assert_eq!(Some(&honest), r.child().unwrap().keys());
    let inputs = i.key_inputs();
    assert_eq!(recompute_child_keys(&inputs, Some(&[0xa7; 32])), honest);
    assert_ne!(recompute_child_keys(&inputs, None), honest);
    let mut e = EntropySource::qrng_sim("wrong-ppk", [9; 32]);
    for _ in 0..100 {
        let wrong = e.draw(32).unwrap();
        if wrong == [0xa7; 32] {
            continue;
        }
        assert_ne!(recompute_child_keys(&inputs, Some(&wrong)), honest);
    }
}

#[test]
fn same_transcript_with_and_without_ppk() {
    let (a, _) = established(ProtectionMode::Hybrid, false);
    let inputs = a.key_inputs();
    assert_ne!(
        recompute_child_keys(&inputs, Some(&[1; 32])),
        recompute_child_keys(&inputs, None)
    );
}

#[test]
fn unknown_ppk_id_tears_down() {
    let (mut ic, mut rc) = configs(ProtectionMode::Hybrid);
    ic.ppk = Some(ppk("ppk-missing", 1));
    rc.ppk_store = vec![ppk("ppk-1", 1)];
    let (mut i, mut r) = pair(ic, rc, 8);
    run(&mut i, &mut r);
    assert_eq!(r.error(), Some(&IkeError::UnknownPpkId));
    assert_eq!(i.error(), Some(&IkeError::UnknownPpkId));
    assert!(i.child().is_none() && r.ike_keys().is_none());
}

#[test]
fn wrong_ppk_secret_fails_auth() {
    let (mut ic, mut rc) = configs(ProtectionMode::Hybrid);
    ic.ppk = Some(ppk("ppk-1", 2));
    rc.ppk_store = vec![ppk("ppk-1", 1)];
    let (mut i, mut r) = pair(ic, rc, 9);
    run(&mut i, &mut r);
    assert_eq!(r.error(), Some(&IkeError::AuthenticationFailed));
    assert_eq!(i.error(), Some(&IkeError::AuthenticationFailed));
}

#[test]
fn ppk_required_but_absent() {
    let (ic, mut rc) = configs(ProtectionMode::Hybrid);
    rc.require_ppk = true;
    let (mut i, mut r) = pair(ic, rc, 10);
    run(&mut i, &mut r);
    assert_eq!(i.error(), Some(&IkeError::AuthenticationFailed));
}

#[test]
fn ppk_length_is_checked() {
    assert_eq!(
        PpkEntry::new("x", &[0; 16]).unwrap_err(),
        IkeError::BadPpkLength
    );
    let mut e = EntropySource::qrng_sim("ppk", [1; 32]);
    assert_eq!(PpkEntry::generate("x", &mut e).unwrap().secret().len(), 32);
}

/// Re-seals the initiator's AUTH request with one AUTH byte flipped.
fn tamper_auth(i: &IkeSa, batch: &mut [Vec<u8>]) -> bool {
    let Some(keys) = i.ike_keys() else {
        return false;
    };
    let key = DirectionKeys::from_bytes(&keys.sk_ei);
    for d in batch.iter_mut() {
        let p = message::parse(d).unwrap();
        if p.header.exchange != ExchangeType::IkeAuth || p.header.is_response() {
            continue;
        }
        assert!(matches!(p.body, Body::Sealed { frag: None, .. }));
        let mut payloads =
            message::decode_payloads(&message::open_sealed(&p.body, &key).unwrap()).unwrap();
        for pl in payloads.iter_mut() {
            if let Payload::Auth { data, .. } = pl {
                data[10] ^= 1;
            }
        }
        let h = p.header;
        let m = Message::new(
            h.exchange,
            h.spi_i,
            h.spi_r,
            h.message_id,
            FLAG_INITIATOR,
            payloads,
        );
        *d = message::seal_message(&m, &key, None).unwrap().remove(0);
        return true;
    }
    false
}

#[test]
fn tampered_auth_is_rejected() {
    let (mut ic, mut rc) = configs(ProtectionMode::Hybrid);
    ic.mtu = 65_000;
    rc.mtu = 65_000;
    let (mut i, mut r) = pair(ic, rc, 11);
    let mut done = false;
    exchange(&mut i, &mut r, |sa, batch, to_r| {
        if to_r && !done {
            done = tamper_auth(sa, batch);
        }
    });
    assert!(done);
    assert_eq!(r.error(), Some(&IkeError::AuthenticationFailed));
    assert_eq!(i.error(), Some(&IkeError::AuthenticationFailed));
}

#[test]
fn corrupted_sk_payload_is_dropped_and_retransmitted() {
    let (ic, rc) = configs(ProtectionMode::Hybrid);
    let (mut i, mut r) = pair(ic, rc, 12);
    let mut done = false;
    exchange(&mut i, &mut r, |_, batch, to_r| {
        if to_r && !done {
            if let Some(d) = batch
                .iter_mut()
                .find(|d| d[4 + 18] == ExchangeType::IkeIntermediate.code())
            {
                let n = d.len();
                d[n - 1] ^= 0x40;
                done = true;
            }
        }
    });
    assert!(done);
    assert_eq!(i.phase(), Phase::Established, "{:?}", i.error());
    assert_eq!(r.stats().sk_dropped, 1);
    assert!(i.stats().retransmitted_datagrams >= 1);
}

#[test]
fn tampered_kem_payload() {
    let (mut ic, mut rc) = configs(ProtectionMode::Hybrid);
    ic.mtu = 65_000;
    rc.mtu = 65_000;
    let (mut i, mut r) = pair(ic, rc, 13);
    let mut done = false;
    exchange(&mut i, &mut r, |sa, batch, to_r| {
        let Some(keys) = sa.ike_keys() else { return };
        if !to_r || done {
            return;
        }
        let key = DirectionKeys::from_bytes(&keys.sk_ei);
        for d in batch.iter_mut() {
            let p = message::parse(d).unwrap();
            if p.header.exchange != ExchangeType::IkeIntermediate {
                continue;
            }
            let mut ps =
                message::decode_payloads(&message::open_sealed(&p.body, &key).unwrap()).unwrap();
            if let Payload::Ke { data, .. } = &mut ps[0] {
                data.truncate(1000);
            }
            let h = p.header;
            let m = Message::new(
                h.exchange,
                h.spi_i,
                h.spi_r,
                h.message_id,
                FLAG_INITIATOR,
                ps,
            );
            *d = message::seal_message(&m, &key, None).unwrap().remove(0);
            done = true;
        }
    });
    assert!(done);
    assert_eq!(r.error(), Some(&IkeError::DecapsulationStructureError));
    assert_eq!(i.error(), Some(&IkeError::PeerError(INVALID_SYNTAX)));
}

#[test]
fn large_auth_is_fragmented_only_when_encrypted() {
    let (mut ic, mut rc) = configs(ProtectionMode::Hybrid);
    ic.mtu = 1200;
    rc.mtu = 1200;
    let (mut i, mut r) = pair(ic, rc, 14);
    run(&mut i, &mut r);
    assert_eq!(i.phase(), Phase::Established);
    let auth = i
        .log()
        .iter()
        .find(|e| e.exchange == ExchangeType::IkeAuth && !e.response)
        .unwrap();
    assert!(auth.fragments > 1, "{auth:?}");
    for sa in [&i, &r] {
        assert!(sa
            .log()
            .iter()
            .filter(|e| !e.encrypted)
            .all(|e| e.fragments == 1));
    }
}

fn esp_round_trip(i: &mut IkeSa, r: &mut IkeSa, data: &[u8]) -> Vec<u8> {
    i.send_esp(data).unwrap();
    let pkts: Vec<Vec<u8>> = i
        .drive(&[], SimTime::ZERO)
        .into_iter()
        .map(|o| o.bytes)
        .collect();
    r.drive(&pkts, SimTime::ZERO);
    assert_eq!(r.recv_esp().as_deref(), Some(data));
    pkts.into_iter().next().unwrap()
}

fn opens_with(keys: &DirectionKeys, pkt: &[u8]) -> bool {
    let seq = u32::from_be_bytes(pkt[4..8].try_into().unwrap()) as u64;
    aead::open(&keys.key[..], &keys.nonce(seq), &pkt[..8], &pkt[8..]).is_ok()
}

#[test]
fn esp_traffic_and_replay() {
    let (mut i, mut r) = established(ProtectionMode::Hybrid, false);
    let pkt = esp_round_trip(&mut i, &mut r, b"user plane");
    r.drive(&[pkt], SimTime::ZERO);
    assert_eq!(r.recv_esp(), None);
    assert_eq!(r.stats().esp_dropped, 1);
    r.send_esp(b"downlink").unwrap();
    let back: Vec<Vec<u8>> = r
        .drive(&[], SimTime::ZERO)
        .into_iter()
        .map(|o| o.bytes)
        .collect();
    i.drive(&back, SimTime::ZERO);
    assert_eq!(i.recv_esp().as_deref(), Some(&b"downlink"[..]));
}

#[test]
fn rekey_without_kem_gives_fresh_keys() {
    let (mut i, mut r) = established(ProtectionMode::Hybrid, false);
    let old = i.child().unwrap().keys().unwrap().clone();
    i.rekey_child(None, None).unwrap();
    run(&mut i, &mut r);
    let new = i.child().unwrap().keys().unwrap().clone();
    assert_ne!(new, old);
    assert_eq!(Some(&new), r.child().unwrap().keys());
    let pkt = esp_round_trip(&mut i, &mut r, b"after rekey");
    assert!(opens_with(&new.i_to_r, &pkt));
    assert!(!opens_with(&old.i_to_r, &pkt));
}

#[test]
fn rekey_with_ml_kem_grows_transcript() {
    let (mut ic, mut rc) = configs(ProtectionMode::Hybrid);
    ic.mtu = 65_000;
    rc.mtu = 65_000;
    let (mut i, mut r) = pair(ic, rc, 15);
    run(&mut i, &mut r);
    let old = i.child().unwrap().keys().unwrap().clone();
    i.rekey_child(None, None).unwrap();
    run(&mut i, &mut r);
    i.rekey_child(None, Some(registry::ML_KEM_768)).unwrap();
    run(&mut i, &mut r);
    let rekeys: Vec<_> = i
        .log()
        .iter()
        .filter(|e| e.exchange == ExchangeType::CreateChildSa)
        .collect();
    assert_eq!(rekeys.len(), 4);
    assert_eq!(rekeys[2].ke_len, Some(1184));
    assert_eq!(rekeys[3].ke_len, Some(1088));
    let plain = rekeys[0].bytes + rekeys[1].bytes;
    let with_kem = rekeys[2].bytes + rekeys[3].bytes;
    // A KE payload adds its 1184/1088-byte data plus a 6-byte header.
    assert_eq!(with_kem - plain, 1184 + 1088 + 2 * 6);
    let new = i.child().unwrap().keys().unwrap().clone();
    let pkt = esp_round_trip(&mut i, &mut r, b"pq rekeyed");
    assert!(!opens_with(&old.i_to_r, &pkt));
    assert!(opens_with(&new.i_to_r, &pkt));
}

#[test]
fn aes128_rekey_is_refused() {
    let (mut i, mut r) = established(ProtectionMode::PurePq, false);
    let before = i.child().unwrap().keys().unwrap().clone();
    i.rekey_child(
        Some(Proposal::parse_list("aes128gcm16-sha384").unwrap()),
        None,
    )
    .unwrap();
    run(&mut i, &mut r);
    assert_eq!(i.last_error(), Some(&IkeError::NoProposalChosen));
    assert_eq!(r.last_error(), Some(&IkeError::NoProposalChosen));
    assert_eq!(i.phase(), Phase::Established);
    assert_eq!(i.child().unwrap().keys(), Some(&before));
    esp_round_trip(&mut i, &mut r, b"still up");
}

#[test]
fn delete_closes_both_sides() {
    let (mut i, mut r) = established(ProtectionMode::Hybrid, false);
    i.delete().unwrap();
    i.delete().unwrap();
    run(&mut i, &mut r);
    assert_eq!(
        i.log()
            .iter()
            .filter(|e| e.exchange == ExchangeType::Informational)
            .count(),
        2
    );
    for sa in [&mut i, &mut r] {
        assert_eq!(sa.phase(), Phase::Closed);
        assert!(sa.ike_keys().is_none());
        assert!(sa.child().unwrap().keys().is_none());
        assert_eq!(sa.send_esp(b"late"), Err(IkeError::SaClosed));
        assert_eq!(
            sa.child_mut().unwrap().seal(b"late"),
            Err(IkeError::SaClosed)
        );
    }
    i.delete().unwrap();
    assert_eq!(i.drive(&[], SimTime::ZERO).len(), 0);
    assert_eq!(i.rekey_child(None, None), Err(IkeError::SaClosed));
}

fn world(link: LinkProfile, seed: u64) -> World {
    let (ic, rc) = configs(ProtectionMode::Hybrid);
    let (i, r) = pair(ic, rc, seed as u8);
    World::new(link, None, seed, 0, Box::new(i), Box::new(r))
}

#[test]
fn lossy_link_recovers_by_retransmission() {
    let link = LinkProfile {
        loss_rate: 0.15,
        ..LinkProfile::MIDHAUL
    };
    let mut retransmitted = 0;
    for seed in 0..10 {
        let mut w = world(link, seed);
        w.run().unwrap();
        let m = w.measure();
        assert!(m.complete, "seed {seed}: {:?}", w.endpoint(0).status());
        retransmitted += m.retransmissions;
        assert_eq!(
            w.downcast::<IkeSa>(0).unwrap().child().unwrap().keys(),
            w.downcast::<IkeSa>(1).unwrap().child().unwrap().keys()
        );
    }
    assert!(retransmitted > 0);
}

#[test]
fn dead_link_times_out() {
    let mut w = world(
        LinkProfile {
            loss_rate: 1.0,
            ..LinkProfile::MIDHAUL
        },
        1,
    );
    w.run().unwrap();
    assert!(matches!(w.endpoint(0).status(), EndpointStatus::Failed(_)));
    assert_eq!(
        w.downcast::<IkeSa>(0).unwrap().error(),
        Some(&IkeError::Timeout)
    );
}

#[test]
fn esp_over_world_and_delete() {
    let mut w = world(LinkProfile::MIDHAUL, 2);
    w.run().unwrap();
    assert_eq!(w.endpoint(1).peer_identity().as_deref(), Some("CN=gnb-cu"));
    w.endpoint_mut(0).send_app(b"gtp-u").unwrap();
    w.flush().unwrap();
    assert_eq!(w.endpoint_mut(1).recv_app().as_deref(), Some(&b"gtp-u"[..]));
    w.downcast_mut::<IkeSa>(0).unwrap().delete().unwrap();
    w.flush().unwrap();
    assert_eq!(w.endpoint(0).status(), EndpointStatus::Closed);
    assert_eq!(w.endpoint(1).status(), EndpointStatus::Closed);
}
