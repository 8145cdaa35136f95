//! SMO authorization sequence over simulated PQ-mTLS: onboard the client
//! certificate, obtain a token from the authorization server, fetch the JWKS
//! and present the token to a resource server.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{
    validate_parsed, AccessToken, AuthServer, Claims, Jwks, ResourceConfig, TokenReject,
    DEFAULT_TTL,
};
use crate::channel::{start_handshake, HandshakeConfig, Role, Transport};
use crate::crypto::registry;
use crate::crypto::sig::SigKeyPair;
use crate::crypto::suite::ProtectionMode;
use crate::entropy::EntropySource;
use crate::hybrid::composite::CompositeSignature;
use crate::netsim::{LinkProfile, StreamTransportConfig, World};
use crate::pki::{CaState, CertChain, Certificate, KeyUsage, KeyUsages};
use crate::time::{SimDuration, SimTime};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenRequest {
    pub scope: String,
    pub aud: String,
    pub ttl_s: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenResponse {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub access_token: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct FlowConfig {
    pub seed: u64,
    pub link: LinkProfile,
    pub mode: ProtectionMode,
    pub profile: &'static str,
    pub client: String,
    /// Scope the policy grants the client.
    pub granted_scope: String,
    /// Scope requested in the token request.
    pub requested_scope: String,
    /// Scope the resource action needs.
    pub action_scope: String,
    pub token_audience: String,
    pub resource_audience: String,
    pub ttl: SimDuration,
    /// Extra simulated time between issuance and use.
    pub use_delay: SimDuration,
    /// Replace the token signature with only its classical component.
    pub classical_only_signature: bool,
}

impl Default for FlowConfig {
    fn default() -> Self {
        let scope = "o-ran-smo:performance-data:read".to_string();
        FlowConfig {
            seed: 0,
            link: LinkProfile::BACKHAUL,
            mode: ProtectionMode::Hybrid,
            profile: registry::ED448_ML_DSA_65,
            client: "CN=rapp-1".into(),
            granted_scope: scope.clone(),
            requested_scope: scope.clone(),
            action_scope: scope,
            token_audience: "smo-pm".into(),
            resource_audience: "smo-pm".into(),
            ttl: DEFAULT_TTL,
            use_delay: SimDuration::ZERO,
            classical_only_signature: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FlowStep {
    pub name: &'static str,
    pub ok: bool,
    pub detail: String,
    pub bytes: u64,
    pub at_us: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FlowOutcome {
    pub steps: Vec<FlowStep>,
    pub token: Option<String>,
    pub accepted: Option<Claims>,
    pub reject: Option<TokenReject>,
    pub issuance_error: Option<String>,
}

impl FlowOutcome {
    pub fn succeeded(&self) -> bool {
        self.accepted.is_some() && self.steps.iter().all(|s| s.ok)
    }
}

const AS_NAME: &str = "CN=smo-auth";
const RS_NAME: &str = "CN=smo-pm";

struct Party {
    key: SigKeyPair,
    chain: CertChain,
}

struct Net<'a> {
    cfg: &'a FlowConfig,
    anchor: Certificate,
    clock: SimTime,
    stream_id: u64,
    steps: Vec<FlowStep>,
}

impl Net<'_> {
    /// PQ-mTLS session between `client` and `server`; returns the world
    /// with both endpoints established.
    fn connect(
        &mut self,
        name: &'static str,
        client: &Party,
        server: &Party,
    ) -> Result<World, String> {
        let mk = |role, p: &Party| {
            let mut h = HandshakeConfig::new(
                role,
                self.cfg.mode,
                p.chain.clone(),
                p.key.clone(),
                self.anchor.clone(),
            );
            h.require_client_cert = true;
            h
        };
        let label = format!("flow-{}-{}", self.cfg.seed, self.stream_id);
        let entropy = |side: &str| EntropySource::qrng_sim_labeled(&label, self.cfg.seed, side);
        let c = start_handshake(
            mk(Role::Client, client),
            Transport::Stream,
            entropy("client"),
        )
        .map_err(|e| e.to_string())?;
        let s = start_handshake(
            mk(Role::Server, server),
            Transport::Stream,
            entropy("server"),
        )
        .map_err(|e| e.to_string())?;
        let stream = StreamTransportConfig::for_link(&self.cfg.link);
        let mut w = World::new(
            self.cfg.link,
            Some(stream),
            self.cfg.seed,
            self.stream_id,
            Box::new(c),
            Box::new(s),
        );
        self.stream_id += 1;
        w.run().map_err(|e| e.to_string())?;
        let m = w.measure();
        let detail = format!(
            "{} <-> {}",
            w.endpoint(1).peer_identity().unwrap_or_default(),
            w.endpoint(0).peer_identity().unwrap_or_default()
        );
        self.push(
            name,
            m.complete,
            if m.complete {
                detail
            } else {
                format!("{:?}", w.endpoint(0).status())
            },
            m.handshake_bytes,
            w.now(),
        );
        if !m.complete {
            return Err(format!("{name} handshake failed"));
        }
        Ok(w)
    }

    /// Sends `req` from endpoint 0, lets `serve` answer on endpoint 1 and
    /// returns the reply.
    fn round_trip(
        &mut self,
        w: &mut World,
        req: &[u8],
        serve: impl FnOnce(&[u8], &str, SimTime) -> Vec<u8>,
    ) -> Result<Vec<u8>, String> {
        w.endpoint_mut(0).send_app(req)?;
        w.flush().map_err(|e| e.to_string())?;
        let got = w
            .endpoint_mut(1)
            .recv_app()
            .ok_or("request not delivered")?;
        let peer = w.endpoint(1).peer_identity().ok_or("no peer identity")?;
        let reply = serve(&got, &peer, self.clock + w.now().since(SimTime::ZERO));
        w.endpoint_mut(1).send_app(&reply)?;
        w.flush().map_err(|e| e.to_string())?;
        w.endpoint_mut(0)
            .recv_app()
            .ok_or_else(|| "reply not delivered".to_string())
    }

    fn push(&mut self, name: &'static str, ok: bool, detail: String, bytes: u64, at: SimTime) {
        self.steps.push(FlowStep {
            name,
            ok,
            detail,
            bytes,
            at_us: (self.clock + at.since(SimTime::ZERO)).0,
        });
    }

    fn finish(&mut self, w: &World) {
        self.clock = self.clock + w.now().since(SimTime::ZERO);
    }
}

fn party(
    ca: &mut CaState,
    e: &mut EntropySource,
    profile: &str,
    name: &str,
) -> Result<Party, String> {
    let usage = KeyUsages::of(&[KeyUsage::TlsAuth]);
    let (key, cert) = ca
        .issue_leaf(e, profile, name, usage, 30, SimTime::ZERO)
        .map_err(|e| e.to_string())?;
    Ok(Party {
        key,
        chain: CertChain(alloc::vec![cert, ca.certificate.clone()]),
    })
}

/// Runs the full sequence. Protocol failures end the run early with the
/// failing step recorded; token rejections are reported, not raised.
pub fn run_token_flow(cfg: &FlowConfig) -> Result<FlowOutcome, String> {
    let mut e = EntropySource::qrng_sim_labeled("flow-pki", cfg.seed, "pki");
    let mut root = CaState::init(&mut e, cfg.profile, "CN=network-root", SimTime::ZERO)
        .map_err(|e| e.to_string())?;
    let mut ca = root
        .issue_intermediate(&mut e, cfg.profile, "CN=smo-ca", 365, SimTime::ZERO)
        .map_err(|e| e.to_string())?;
    let as_party = party(&mut ca, &mut e, cfg.profile, AS_NAME)?;
    let rs_party = party(&mut ca, &mut e, cfg.profile, RS_NAME)?;
    let client = party(&mut ca, &mut e, cfg.profile, &cfg.client)?;
    let mut net = Net {
        cfg,
        anchor: root.certificate.clone(),
        clock: SimTime::ZERO,
        stream_id: 1,
        steps: Vec::new(),
    };
    net.push(
        "onboard",
        true,
        format!("{} issued by CN=smo-ca", cfg.client),
        client.chain.encoded_len() as u64,
        SimTime::ZERO,
    );

    let mut auth = AuthServer::new(
        "smo-auth",
        cfg.profile,
        EntropySource::qrng_sim_labeled("flow-as", cfg.seed, "as"),
        SimTime::ZERO,
    )
    .map_err(|e| e.to_string())?;
    auth.policy.allow(&cfg.client, &cfg.granted_scope);
    let mut outcome = FlowOutcome {
        steps: Vec::new(),
        token: None,
        accepted: None,
        reject: None,
        issuance_error: None,
    };

    // Client to authorization server.
    let mut w = net.connect("mtls-client-as", &client, &as_party)?;
    let req = TokenRequest {
        scope: cfg.requested_scope.clone(),
        aud: cfg.token_audience.clone(),
        ttl_s: cfg.ttl.as_micros() / 1_000_000,
    };
    let body = serde_json::to_vec(&req).map_err(|e| e.to_string())?;
    let mut issue = |raw: &[u8], peer: &str, now: SimTime| {
        let resp = match serde_json::from_slice::<TokenRequest>(raw) {
            Ok(r) => {
                let scopes: Vec<&str> = r.scope.split_ascii_whitespace().collect();
                match auth.issue_token(peer, &scopes, &r.aud, SimDuration::from_secs(r.ttl_s), now)
                {
                    Ok(t) => TokenResponse {
                        access_token: Some(t.compact()),
                        error: None,
                    },
                    Err(e) => TokenResponse {
                        access_token: None,
                        error: Some(e.to_string()),
                    },
                }
            }
            Err(_) => TokenResponse {
                access_token: None,
                error: Some("invalid_request".into()),
            },
        };
        serde_json::to_vec(&resp).expect("response serializes")
    };
    let reply = net.round_trip(&mut w, &body, &mut issue)?;
    net.finish(&w);
    let resp: TokenResponse = serde_json::from_slice(&reply).map_err(|e| e.to_string())?;
    let Some(compact) = resp.access_token else {
        let err = resp.error.unwrap_or_default();
        net.push(
            "token",
            false,
            err.clone(),
            reply.len() as u64,
            SimTime::ZERO,
        );
        outcome.issuance_error = Some(err);
        outcome.steps = net.steps;
        return Ok(outcome);
    };
    net.push(
        "token",
        true,
        format!("kid {}", auth.active_kid()),
        reply.len() as u64,
        SimTime::ZERO,
    );

    // Resource server fetches the JWKS from the authorization server.
    let mut w = net.connect("mtls-rs-as", &rs_party, &as_party)?;
    let server_identity = w.endpoint(0).peer_identity();
    let jwks_doc = net.round_trip(&mut w, b"GET /jwks", |_, _, now| {
        auth.jwks(now).to_json().into_bytes()
    })?;
    net.finish(&w);
    let jwks = if server_identity.as_deref() == Some(AS_NAME) {
        Jwks::from_json(core::str::from_utf8(&jwks_doc).unwrap_or_default())
            .map_err(|e| e.to_string())?
    } else {
        Jwks::default()
    };
    net.push(
        "jwks",
        !jwks.keys.is_empty(),
        format!("{} key(s)", jwks.keys.len()),
        jwks_doc.len() as u64,
        SimTime::ZERO,
    );

    let mut presented = compact.clone();
    if cfg.classical_only_signature {
        let t = AccessToken::parse(&compact).map_err(|e| e.to_string())?;
        let sig = CompositeSignature::decode(&t.signature).map_err(|e| e.to_string())?;
        presented = t.with_signature(sig.classical_sig).compact();
    }
    net.clock = net.clock + cfg.use_delay;

    // Client presents the bearer token.
    let mut w = net.connect("mtls-client-rs", &client, &rs_party)?;
    let rc = ResourceConfig {
        issuer: Some("smo-auth".into()),
        ..ResourceConfig::new(&cfg.resource_audience)
    };
    let request = format!("GET /pm-data\r\nAuthorization: Bearer {presented}\r\n");
    let mut verdict: Option<Result<Claims, TokenReject>> = None;
    let reply = net.round_trip(&mut w, request.as_bytes(), |raw, _, now| {
        let text = core::str::from_utf8(raw).unwrap_or_default();
        let bearer = text
            .lines()
            .find_map(|l| l.strip_prefix("Authorization: Bearer "))
            .unwrap_or_default();
        let v = AccessToken::parse(bearer)
            .and_then(|t| validate_parsed(&rc, &t, &cfg.action_scope, now, &jwks));
        let body = match &v {
            Ok(c) => format!("200 OK {}", c.sub),
            Err(r) => format!("401 {r}"),
        };
        verdict = Some(v);
        body.into_bytes()
    })?;
    net.finish(&w);
    let status = String::from_utf8_lossy(&reply).into_owned();
    let v = verdict.ok_or("no verdict")?;
    net.push(
        "resource",
        v.is_ok(),
        status,
        reply.len() as u64,
        SimTime::ZERO,
    );
    outcome.token = Some(presented);
    match v {
        Ok(c) => outcome.accepted = Some(c),
        Err(r) => outcome.reject = Some(r),
    }
    outcome.steps = net.steps;
    Ok(outcome)
}
