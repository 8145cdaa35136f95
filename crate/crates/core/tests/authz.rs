use qran_core::authz::{
    run_token_flow, validate_token, AccessToken, AuthServer, FlowConfig, ResourceConfig,
    TokenReject, DEFAULT_TTL, KID_LIFETIME,
};
use qran_core::crypto::registry;
use qran_core::entropy::EntropySource;
use qran_core::hybrid::composite::CompositeSignature;
use qran_core::time::{SimDuration, SimTime};

const PM_READ: &str = "o-ran-smo:performance-data:read";
const A1_WRITE: &str = "o-ran-a1:policy:write";

fn server() -> AuthServer {
    let mut s = AuthServer::new(
        "smo-auth",
        registry::ED448_ML_DSA_65,
        EntropySource::qrng_sim("as", [8; 32]),
        SimTime::ZERO,
    )
    .unwrap();
    s.policy
        .allow("CN=rapp-1", PM_READ)
        .allow("CN=rapp-1", A1_WRITE);
    s
}

#[test]
fn end_to_end_flow() {
    let out = run_token_flow(&FlowConfig::default()).unwrap();
    assert!(out.succeeded(), "{out:#?}");
    let names: Vec<_> = out.steps.iter().map(|s| s.name).collect();
    assert_eq!(
        names,
        [
            "onboard",
            "mtls-client-as",
            "token",
            "mtls-rs-as",
            "jwks",
            "mtls-client-rs",
            "resource"
        ]
    );
    let claims = out.accepted.unwrap();
    assert_eq!(claims.sub, "CN=rapp-1");
    assert_eq!(claims.scope, PM_READ);
    assert!(out.steps.windows(2).all(|w| w[0].at_us <= w[1].at_us));
    assert_eq!(out.steps.last().unwrap().detail, "200 OK CN=rapp-1");
}

#[test]
fn flow_is_deterministic() {
    let a = run_token_flow(&FlowConfig::default()).unwrap();
    let b = run_token_flow(&FlowConfig::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn flow_rejections_are_named() {
    let cases: [(FlowConfig, TokenReject); 4] = [
        (
            FlowConfig {
                use_delay: DEFAULT_TTL,
                ..Default::default()
            },
            TokenReject::Expired,
        ),
        (
            FlowConfig {
                token_audience: "a1-policy".into(),
                ..Default::default()
            },
            TokenReject::AudienceMismatch,
        ),
        (
            FlowConfig {
                action_scope: A1_WRITE.into(),
                ..Default::default()
            },
            TokenReject::ScopeMissing,
        ),
        (
            FlowConfig {
                classical_only_signature: true,
                ..Default::default()
            },
            TokenReject::BadSignature,
        ),
    ];
    for (cfg, want) in cases {
        let out = run_token_flow(&cfg).unwrap();
        assert_eq!(out.reject, Some(want));
        assert_eq!(out.steps.last().unwrap().detail, format!("401 {want}"));
    }
}

#[test]
fn flow_scope_denied_at_issuance() {
    let out = run_token_flow(&FlowConfig {
        requested_scope: A1_WRITE.into(),
        ..Default::default()
    })
    .unwrap();
    assert!(out.token.is_none());
    assert!(out.issuance_error.unwrap().contains(A1_WRITE));
}

#[test]
fn expiry_boundary() {
    let mut s = server();
    let t = s
        .issue_token(
            "CN=rapp-1",
            &[PM_READ],
            "smo-pm",
            SimDuration::from_secs(60),
            SimTime::ZERO,
        )
        .unwrap();
    let jwks = s.jwks(SimTime::ZERO);
    let cfg = ResourceConfig::new("smo-pm");
    let at = |s| validate_token(&cfg, &t.compact(), PM_READ, SimTime::from_secs(s), &jwks);
    assert!(at(59).is_ok());
    assert_eq!(at(60), Err(TokenReject::Expired));
}

#[test]
fn single_component_signatures_reject() {
    let mut s = server();
    let t = s
        .issue_token(
            "CN=rapp-1",
            &[PM_READ],
            "smo-pm",
            DEFAULT_TTL,
            SimTime::ZERO,
        )
        .unwrap();
    let jwks = s.jwks(SimTime::ZERO);
    let cfg = ResourceConfig::new("smo-pm");
    let sig = CompositeSignature::decode(&t.signature).unwrap();
    let variants = [
        sig.classical_sig.clone(),
        sig.pq_sig.clone(),
        CompositeSignature {
            classical_sig: sig.classical_sig.clone(),
            pq_sig: vec![],
        }
        .encode(),
        CompositeSignature {
            classical_sig: vec![],
            pq_sig: sig.pq_sig.clone(),
        }
        .encode(),
        CompositeSignature {
            classical_sig: sig.classical_sig.clone(),
            pq_sig: vec![0; sig.pq_sig.len()],
        }
        .encode(),
    ];
    for v in variants {
        let forged = t.with_signature(v).compact();
        assert_eq!(
            validate_token(&cfg, &forged, PM_READ, SimTime::ZERO, &jwks),
            Err(TokenReject::BadSignature)
        );
    }
}

#[test]
fn any_header_or_claims_byte_change_rejects() {
    let mut s = server();
    let t = s
        .issue_token(
            "CN=rapp-1",
            &[PM_READ],
            "smo-pm",
            DEFAULT_TTL,
            SimTime::ZERO,
        )
        .unwrap();
    let jwks = s.jwks(SimTime::ZERO);
    let cfg = ResourceConfig::new("smo-pm");
    let compact = t.compact();
    let body_len = t.signing_input().len();
    assert!(validate_token(&cfg, &compact, PM_READ, SimTime::ZERO, &jwks).is_ok());
    let alphabet = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_";
    for i in 0..body_len {
        let mut b = compact.clone().into_bytes();
        if b[i] == b'.' {
            continue;
        }
        b[i] = alphabet[(alphabet.iter().position(|c| *c == b[i]).unwrap() + 1 + i % 7) % 64];
        let m = String::from_utf8(b).unwrap();
        assert!(
            validate_token(&cfg, &m, PM_READ, SimTime::ZERO, &jwks).is_err(),
            "byte {i}"
        );
    }
}

#[test]
fn rotation_retains_old_kid_until_not_after() {
    let mut s = server();
    let kid1 = s.active_kid().to_string();
    let old = s
        .issue_token(
            "CN=rapp-1",
            &[PM_READ],
            "smo-pm",
            DEFAULT_TTL,
            SimTime::ZERO,
        )
        .unwrap();
    let kid2 = s.rotate(SimTime::from_secs(100)).unwrap();
    assert_ne!(kid1, kid2);
    let new = s
        .issue_token(
            "CN=rapp-1",
            &[PM_READ],
            "smo-pm",
            DEFAULT_TTL,
            SimTime::from_secs(100),
        )
        .unwrap();
    assert_eq!(old.header.kid, kid1);
    assert_eq!(new.header.kid, kid2);
    let cfg = ResourceConfig::new("smo-pm");
    let now = SimTime::from_secs(200);
    let jwks = s.jwks(now);
    assert_eq!(jwks.keys.len(), 2);
    assert!(validate_token(&cfg, &old.compact(), PM_READ, now, &jwks).is_ok());
    assert!(validate_token(&cfg, &new.compact(), PM_READ, now, &jwks).is_ok());
    let late = SimTime::ZERO + KID_LIFETIME;
    assert!(s.jwks(late).find(&kid1, late).is_none());
    assert_eq!(
        validate_token(&cfg, &old.compact(), PM_READ, late, &jwks),
        Err(TokenReject::UnknownKid)
    );
}

#[test]
fn foreign_key_set_is_unknown_kid() {
    let mut s = server();
    let other = AuthServer::new(
        "evil",
        registry::ED448_ML_DSA_65,
        EntropySource::qrng_sim("as2", [9; 32]),
        SimTime::ZERO,
    )
    .unwrap();
    let t = s
        .issue_token(
            "CN=rapp-1",
            &[PM_READ],
            "smo-pm",
            DEFAULT_TTL,
            SimTime::ZERO,
        )
        .unwrap();
    let cfg = ResourceConfig::new("smo-pm");
    assert_eq!(
        validate_token(
            &cfg,
            &t.compact(),
            PM_READ,
            SimTime::ZERO,
            &other.jwks(SimTime::ZERO)
        ),
        Err(TokenReject::UnknownKid)
    );
    let mut jwks = other.jwks(SimTime::ZERO);
    jwks.keys[0].kid = t.header.kid.clone();
    assert_eq!(
        validate_token(&cfg, &t.compact(), PM_READ, SimTime::ZERO, &jwks),
        Err(TokenReject::BadSignature)
    );
}

#[test]
fn compact_form_round_trips() {
    let mut s = server();
    let t = s
        .issue_token(
            "CN=rapp-1",
            &[PM_READ, A1_WRITE],
            "smo-pm",
            DEFAULT_TTL,
            SimTime::ZERO,
        )
        .unwrap();
    let p = AccessToken::parse(&t.compact()).unwrap();
    assert_eq!(p, t);
    assert_eq!(p.header.typ, "JWT");
    assert_eq!(p.claims.scope, format!("{PM_READ} {A1_WRITE}"));
    assert_eq!(AccessToken::parse("a.b"), Err(TokenReject::Malformed));
}
