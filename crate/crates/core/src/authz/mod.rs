//! PQ-OAuth: composite-signed JWT access tokens, JWKS with key rotation and a
//! deny-by-default scope policy.

mod flow;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::hash::sha256;
use crate::crypto::sig::{self, SigKeyPair};
use crate::crypto::{registry, CryptoError};
use crate::entropy::{EntropyError, EntropySource, SeedOperation};
use crate::hybrid::composite;
use crate::time::{SimDuration, SimTime};

pub use flow::{run_token_flow, FlowConfig, FlowOutcome, FlowStep, TokenRequest, TokenResponse};

pub const DEFAULT_TTL: SimDuration = SimDuration::from_secs(3600);
pub const MAX_TTL: SimDuration = SimDuration::from_secs(3600);
pub const KID_LIFETIME: SimDuration = SimDuration::from_days(30);
pub const CLOCK_SKEW: SimDuration = SimDuration::from_secs(30);
pub const TOKEN_TYPE: &str = "JWT";
const SIGNING_CONTEXT: &[u8] = b"qran JWT";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AuthzError {
    #[error("scope {0:?} not permitted for this client")]
    ScopeDenied(String),
    #[error("token lifetime exceeds {} s", MAX_TTL.as_micros() / 1_000_000)]
    TtlTooLong,
    #[error("no scopes requested")]
    NoScopes,
    #[error("{0} is not a composite signature profile")]
    NotComposite(String),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
}

/// Why a resource server refused a token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TokenReject {
    Malformed,
    UnsupportedAlgorithm,
    UnknownKid,
    BadSignature,
    Expired,
    NotYetValid,
    IssuerMismatch,
    AudienceMismatch,
    ScopeMissing,
}

impl TokenReject {
    pub fn as_str(self) -> &'static str {
        match self {
            TokenReject::Malformed => "MALFORMED",
            TokenReject::UnsupportedAlgorithm => "UNSUPPORTED_ALGORITHM",
            TokenReject::UnknownKid => "UNKNOWN_KID",
            TokenReject::BadSignature => "BAD_SIGNATURE",
            TokenReject::Expired => "EXPIRED",
            TokenReject::NotYetValid => "NOT_YET_VALID",
            TokenReject::IssuerMismatch => "ISSUER_MISMATCH",
            TokenReject::AudienceMismatch => "AUDIENCE_MISMATCH",
            TokenReject::ScopeMissing => "SCOPE_MISSING",
        }
    }
}

impl core::fmt::Display for TokenReject {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JwtHeader {
    pub alg: String,
    pub kid: String,
    pub typ: String,
}

/// `exp` and `iat` are simulated seconds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claims {
    pub iss: String,
    pub sub: String,
    pub aud: String,
    pub exp: u64,
    pub iat: u64,
    pub scope: String,
}

impl Claims {
    pub fn scopes(&self) -> impl Iterator<Item = &str> {
        self.scope.split_ascii_whitespace()
    }

    pub fn has_scope(&self, scope: &str) -> bool {
        self.scopes().any(|s| s == scope)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessToken {
    pub header: JwtHeader,
    pub claims: Claims,
    /// Encoded composite signature.
    pub signature: Vec<u8>,
    header_b64: String,
    claims_b64: String,
}

impl AccessToken {
    pub fn signing_input(&self) -> String {
        format!("{}.{}", self.header_b64, self.claims_b64)
    }

    pub fn compact(&self) -> String {
        format!(
            "{}.{}",
            self.signing_input(),
            URL_SAFE_NO_PAD.encode(&self.signature)
        )
    }

    pub fn parse(compact: &str) -> Result<Self, TokenReject> {
        let mut parts = compact.split('.');
        let (Some(h), Some(c), Some(s), None) =
            (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(TokenReject::Malformed);
        };
        let dec = |p: &str| {
            URL_SAFE_NO_PAD
                .decode(p)
                .map_err(|_| TokenReject::Malformed)
        };
        let header: JwtHeader =
            serde_json::from_slice(&dec(h)?).map_err(|_| TokenReject::Malformed)?;
        let claims: Claims =
            serde_json::from_slice(&dec(c)?).map_err(|_| TokenReject::Malformed)?;
        Ok(AccessToken {
            header,
            claims,
            signature: dec(s)?,
            header_b64: h.to_string(),
            claims_b64: c.to_string(),
        })
    }

    /// Replaces the signature segment, leaving header and claims untouched.
    pub fn with_signature(&self, signature: Vec<u8>) -> Self {
        AccessToken {
            signature,
            ..self.clone()
        }
    }

    fn encode_parts(header: &JwtHeader, claims: &Claims) -> (String, String) {
        (
            URL_SAFE_NO_PAD.encode(serde_json::to_vec(header).expect("header serializes")),
            URL_SAFE_NO_PAD.encode(serde_json::to_vec(claims).expect("claims serialize")),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Jwk {
    pub kid: String,
    /// Composite profile name.
    pub alg: String,
    pub kty: String,
    /// base64url composite public key (`classical || ML-DSA`).
    pub x: String,
    /// Simulated seconds after which the key is dropped.
    pub not_after: u64,
}

impl Jwk {
    pub fn public_key(&self) -> Option<Vec<u8>> {
        URL_SAFE_NO_PAD.decode(&self.x).ok()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Jwks {
    pub keys: Vec<Jwk>,
}

impl Jwks {
    /// Key `kid`, provided it is still within its lifetime.
    pub fn find(&self, kid: &str, now: SimTime) -> Option<&Jwk> {
        self.keys
            .iter()
            .find(|k| k.kid == kid && now.as_secs() < k.not_after)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("jwks serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// Deny-by-default map of client subject to allowed scopes.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyTable {
    pub clients: BTreeMap<String, BTreeSet<String>>,
}

impl PolicyTable {
    pub fn allow(&mut self, client: &str, scope: &str) -> &mut Self {
        self.clients
            .entry(client.to_string())
            .or_default()
            .insert(scope.to_string());
        self
    }

    pub fn revoke(&mut self, client: &str, scope: &str) {
        if let Some(s) = self.clients.get_mut(client) {
            s.remove(scope);
        }
    }

    pub fn permits(&self, client: &str, scope: &str) -> bool {
        self.clients.get(client).is_some_and(|s| s.contains(scope))
    }
}

struct SigningKey {
    kid: String,
    key: SigKeyPair,
    not_after: SimTime,
}

/// Authorization server state: signing keys, policy and an entropy source.
pub struct AuthServer {
    pub issuer: String,
    pub policy: PolicyTable,
    profile: &'static str,
    keys: Vec<SigningKey>,
    entropy: EntropySource,
}

impl core::fmt::Debug for AuthServer {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("AuthServer")
            .field("issuer", &self.issuer)
            .field("profile", &self.profile)
            .field("active_kid", &self.active_kid())
            .finish_non_exhaustive()
    }
}

fn composite_name(profile: &str) -> Result<&'static str, AuthzError> {
    let name = sig::canonical_name(profile)?;
    composite::profile(name)
        .map(|p| p.name)
        .ok_or_else(|| AuthzError::NotComposite(profile.to_string()))
}

impl AuthServer {
    pub fn new(
        issuer: &str,
        profile: &str,
        entropy: EntropySource,
        now: SimTime,
    ) -> Result<Self, AuthzError> {
        let mut s = AuthServer {
            issuer: issuer.to_string(),
            policy: PolicyTable::default(),
            profile: composite_name(profile)?,
            keys: Vec::new(),
            entropy,
        };
        s.rotate(now)?;
        Ok(s)
    }

    pub fn with_default_profile(
        issuer: &str,
        entropy: EntropySource,
        now: SimTime,
    ) -> Result<Self, AuthzError> {
        Self::new(issuer, registry::ED448_ML_DSA_65, entropy, now)
    }

    pub fn profile(&self) -> &'static str {
        self.profile
    }

    pub fn active_kid(&self) -> &str {
        self.keys.last().map(|k| k.kid.as_str()).unwrap_or_default()
    }

    /// Generates a new signing key and makes it active. Earlier keys stay
    /// published until their `not_after`.
    pub fn rotate(&mut self, now: SimTime) -> Result<String, AuthzError> {
        let seed = self.entropy.seed_for(self.profile, SeedOperation::Keygen)?;
        let key = sig::sig_keygen(self.profile, &seed)?;
        let fp = sha256(&[&key.public_key]);
        let kid = format!("{}-{}", self.keys.len() + 1, hex::encode(&fp[..6]));
        self.keys.push(SigningKey {
            kid: kid.clone(),
            key,
            not_after: now + KID_LIFETIME,
        });
        Ok(kid)
    }

    pub fn jwks(&self, now: SimTime) -> Jwks {
        Jwks {
            keys: self
                .keys
                .iter()
                .filter(|k| now < k.not_after)
                .map(|k| Jwk {
                    kid: k.kid.clone(),
                    alg: self.profile.to_string(),
                    kty: "COMPOSITE".into(),
                    x: URL_SAFE_NO_PAD.encode(&k.key.public_key),
                    not_after: k.not_after.as_secs(),
                })
                .collect(),
        }
    }

    /// Issues a token to `client`, which must be the identity of a verified
    /// PQ-mTLS peer.
    pub fn issue_token(
        &mut self,
        client: &str,
        scopes: &[&str],
        aud: &str,
        ttl: SimDuration,
        now: SimTime,
    ) -> Result<AccessToken, AuthzError> {
        if ttl > MAX_TTL {
            return Err(AuthzError::TtlTooLong);
        }
        if scopes.is_empty() {
            return Err(AuthzError::NoScopes);
        }
        if let Some(s) = scopes.iter().find(|s| !self.policy.permits(client, s)) {
            return Err(AuthzError::ScopeDenied(s.to_string()));
        }
        let header = JwtHeader {
            alg: self.profile.to_string(),
            kid: self.active_kid().to_string(),
            typ: TOKEN_TYPE.into(),
        };
        let iat = now.as_secs();
        let claims = Claims {
            iss: self.issuer.clone(),
            sub: client.to_string(),
            aud: aud.to_string(),
            exp: iat + ttl.as_micros().div_ceil(1_000_000).max(1),
            iat,
            scope: scopes.join(" "),
        };
        let (header_b64, claims_b64) = AccessToken::encode_parts(&header, &claims);
        let input = format!("{header_b64}.{claims_b64}");
        let rnd = self
            .entropy
            .optional_seed(self.profile, SeedOperation::Sign)?;
        let key = &self.keys.last().expect("at least one key").key;
        let signature = key.sign(input.as_bytes(), SIGNING_CONTEXT, rnd.as_deref())?;
        Ok(AccessToken {
            header,
            claims,
            signature,
            header_b64,
            claims_b64,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResourceConfig {
    pub audience: String,
    /// Expected `iss`; `None` accepts any issuer present in the JWKS.
    pub issuer: Option<String>,
    pub clock_skew: SimDuration,
}

impl ResourceConfig {
    pub fn new(audience: &str) -> Self {
        ResourceConfig {
            audience: audience.to_string(),
            issuer: None,
            clock_skew: CLOCK_SKEW,
        }
    }
}

/// Resource-server check: kid, both signature components, time bounds,
/// audience and the scope needed for the requested action.
pub fn validate_token(
    cfg: &ResourceConfig,
    compact: &str,
    required_scope: &str,
    now: SimTime,
    jwks: &Jwks,
) -> Result<Claims, TokenReject> {
    let token = AccessToken::parse(compact)?;
    validate_parsed(cfg, &token, required_scope, now, jwks)
}

pub fn validate_parsed(
    cfg: &ResourceConfig,
    token: &AccessToken,
    required_scope: &str,
    now: SimTime,
    jwks: &Jwks,
) -> Result<Claims, TokenReject> {
    if token.header.typ != TOKEN_TYPE {
        return Err(TokenReject::Malformed);
    }
    let alg = composite_name(&token.header.alg).map_err(|_| TokenReject::UnsupportedAlgorithm)?;
    let jwk = jwks
        .find(&token.header.kid, now)
        .ok_or(TokenReject::UnknownKid)?;
    if composite_name(&jwk.alg).ok() != Some(alg) {
        return Err(TokenReject::BadSignature);
    }
    let pk = jwk.public_key().ok_or(TokenReject::Malformed)?;
    if !sig::sig_verify(
        alg,
        &pk,
        token.signing_input().as_bytes(),
        SIGNING_CONTEXT,
        &token.signature,
    ) {
        return Err(TokenReject::BadSignature);
    }
    let c = &token.claims;
    let t = now.as_secs();
    if c.exp <= c.iat || t >= c.exp {
        return Err(TokenReject::Expired);
    }
    if c.iat > t + cfg.clock_skew.as_micros() / 1_000_000 {
        return Err(TokenReject::NotYetValid);
    }
    if cfg.issuer.as_ref().is_some_and(|i| *i != c.iss) {
        return Err(TokenReject::IssuerMismatch);
    }
    if c.aud != cfg.audience {
        return Err(TokenReject::AudienceMismatch);
    }
    if !c.has_scope(required_scope) {
        return Err(TokenReject::ScopeMissing);
    }
    Ok(c.clone())
}
