//! Entropy sources, two-source mixing, per-algorithm seed dispensing and
//! online health tests.
//!
//! `QRNG_SIM` is a seeded ChaCha20 stream standing in for a quantum source.
//! OS sources are supplied by the std crate through [`EntropyBackend`].
//! Fixed test sources exist only in test builds or with the `test-sources`
//! feature.

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::hash::shake256;
use crate::crypto::{registry, sig};

pub const MAX_DRAW: usize = 1 << 20;
pub const MIX_LABEL: &[u8] = b"qran-entropy-mix-v1";
pub const MIN_HEALTH_WINDOW: usize = 1024;
/// Repetition-count cutoff: this many identical consecutive bytes fails.
pub const RCT_CUTOFF: usize = 41;
pub const APT_WINDOW: usize = 512;
/// Adaptive-proportion cutoff: more than this many copies of one value in a
/// window fails.
pub const APT_CUTOFF: usize = APT_WINDOW / 2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EntropyError {
    #[error("entropy source {0} is poisoned by a failed health test")]
    SourcePoisoned(String),
    #[error("draw of {requested} bytes exceeds the {limit}-byte limit")]
    DrawTooLarge { requested: usize, limit: usize },
    #[error("no seed size defined for {alg} {op:?}")]
    NoSeedSpec { alg: String, op: SeedOperation },
    #[error("health window of {0} bytes is below the 1024-byte minimum")]
    WindowTooSmall(usize),
    #[error("entropy backend failure: {0}")]
    Backend(String),
}

pub type Result<T> = core::result::Result<T, EntropyError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SourceKind {
    QrngSim,
    Os,
    FixedTest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SeedOperation {
    Keygen,
    Encaps,
    Sign,
}

/// Byte producer behind an [`EntropySource`].
pub trait EntropyBackend: Send {
    fn fill(&mut self, out: &mut [u8]) -> core::result::Result<(), String>;
}

struct ChaChaBackend(ChaCha20Rng);

impl EntropyBackend for ChaChaBackend {
    fn fill(&mut self, out: &mut [u8]) -> core::result::Result<(), String> {
        self.0.fill_bytes(out);
        Ok(())
    }
}

#[cfg(any(test, feature = "test-sources"))]
struct PatternBackend {
    pattern: Vec<u8>,
    pos: usize,
}

#[cfg(any(test, feature = "test-sources"))]
impl EntropyBackend for PatternBackend {
    fn fill(&mut self, out: &mut [u8]) -> core::result::Result<(), String> {
        for b in out {
            *b = self.pattern[self.pos];
            self.pos = (self.pos + 1) % self.pattern.len();
        }
        Ok(())
    }
}

pub struct EntropySource {
    source_id: String,
    kind: SourceKind,
    draw_count: u64,
    poisoned: bool,
    backend: Box<dyn EntropyBackend>,
}

impl core::fmt::Debug for EntropySource {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("EntropySource")
            .field("source_id", &self.source_id)
            .field("kind", &self.kind)
            .field("draw_count", &self.draw_count)
            .field("poisoned", &self.poisoned)
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HealthReport {
    pub repetition_count_ok: bool,
    pub adaptive_proportion_ok: bool,
    pub window_bytes: usize,
}

impl HealthReport {
    pub fn passed(&self) -> bool {
        self.repetition_count_ok && self.adaptive_proportion_ok
    }
}

impl EntropySource {
    /// Simulated QRNG seeded with `seed`.
    pub fn qrng_sim(source_id: &str, seed: [u8; 32]) -> Self {
        Self::with_backend(
            source_id,
            SourceKind::QrngSim,
            Box::new(ChaChaBackend(ChaCha20Rng::from_seed(seed))),
        )
    }

    /// Simulated QRNG keyed by a 64-bit seed and a label, for derived streams.
    pub fn qrng_sim_labeled(source_id: &str, seed: u64, label: &str) -> Self {
        let key = shake256(
            &[b"qran-qrng-sim", &seed.to_le_bytes(), label.as_bytes()],
            32,
        );
        Self::qrng_sim(source_id, key.try_into().expect("32 bytes"))
    }

    pub fn os(source_id: &str, backend: Box<dyn EntropyBackend>) -> Self {
        Self::with_backend(source_id, SourceKind::Os, backend)
    }

    /// Repeats `pattern` forever.
    #[cfg(any(test, feature = "test-sources"))]
    pub fn fixed_test(source_id: &str, pattern: &[u8]) -> Self {
        assert!(!pattern.is_empty(), "fixed pattern must be non-empty");
        let pattern = pattern.to_vec();
        Self::with_backend(
            source_id,
            SourceKind::FixedTest,
            Box::new(PatternBackend { pattern, pos: 0 }),
        )
    }

    fn with_backend(source_id: &str, kind: SourceKind, backend: Box<dyn EntropyBackend>) -> Self {
        EntropySource {
            source_id: source_id.to_string(),
            kind,
            draw_count: 0,
            poisoned: false,
            backend,
        }
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn kind(&self) -> SourceKind {
        self.kind
    }

    pub fn draw_count(&self) -> u64 {
        self.draw_count
    }

    pub fn is_poisoned(&self) -> bool {
        self.poisoned
    }

    pub fn reset(&mut self) {
        self.poisoned = false;
    }

    fn raw(&mut self, n: usize) -> Result<Vec<u8>> {
        let mut out = vec![0u8; n];
        self.backend.fill(&mut out).map_err(EntropyError::Backend)?;
        Ok(out)
    }

    pub fn draw(&mut self, n: usize) -> Result<Vec<u8>> {
        if self.poisoned {
            return Err(EntropyError::SourcePoisoned(self.source_id.clone()));
        }
        if n > MAX_DRAW {
            return Err(EntropyError::DrawTooLarge {
                requested: n,
                limit: MAX_DRAW,
            });
        }
        self.draw_count += 1;
        self.raw(n)
    }

    /// Draws `window` bytes, runs both health tests and poisons the source on
    /// failure.
    pub fn health_check(&mut self, window: usize) -> Result<HealthReport> {
        if window < MIN_HEALTH_WINDOW {
            return Err(EntropyError::WindowTooSmall(window));
        }
        if window > MAX_DRAW {
            return Err(EntropyError::DrawTooLarge {
                requested: window,
                limit: MAX_DRAW,
            });
        }
        if self.poisoned {
            return Err(EntropyError::SourcePoisoned(self.source_id.clone()));
        }
        let sample = self.raw(window)?;
        let report = health_test(&sample);
        if !report.passed() {
            self.poisoned = true;
        }
        Ok(report)
    }

    /// Seed of the size registered for `(alg, op)`.
    pub fn seed_for(&mut self, alg: &str, op: SeedOperation) -> Result<Vec<u8>> {
        let n = seed_len(alg, op)?;
        self.draw(n)
    }

    /// Like [`seed_for`](Self::seed_for) but `None` when `alg` takes no seed for `op`.
    pub fn optional_seed(&mut self, alg: &str, op: SeedOperation) -> Result<Option<Vec<u8>>> {
        match seed_len(alg, op) {
            Ok(n) => self.draw(n).map(Some),
            Err(EntropyError::NoSeedSpec { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }
}

pub fn seed_len(alg: &str, op: SeedOperation) -> Result<usize> {
    let d = registry::lookup(alg).or_else(|_| sig::descriptor(alg));
    let missing = || EntropyError::NoSeedSpec {
        alg: alg.to_string(),
        op,
    };
    let seeds = d.map_err(|_| missing())?.seeds;
    match op {
        SeedOperation::Keygen => seeds.keygen,
        SeedOperation::Encaps => seeds.encaps,
        SeedOperation::Sign => seeds.sign,
    }
    .ok_or_else(missing)
}

/// Repetition-count and adaptive-proportion tests over `sample`.
pub fn health_test(sample: &[u8]) -> HealthReport {
    let mut longest = 0usize;
    let mut run = 0usize;
    let mut prev = None;
    for &b in sample {
        run = if Some(b) == prev { run + 1 } else { 1 };
        prev = Some(b);
        longest = longest.max(run);
    }
    let apt_ok = sample
        .chunks(APT_WINDOW)
        .filter(|w| w.len() == APT_WINDOW)
        .all(|w| {
            let mut counts = [0usize; 256];
            for &b in w {
                counts[b as usize] += 1;
            }
            counts.iter().all(|&c| c <= APT_CUTOFF)
        });
    HealthReport {
        repetition_count_ok: longest < RCT_CUTOFF,
        adaptive_proportion_ok: apt_ok,
        window_bytes: sample.len(),
    }
}

/// `SHAKE256(MIX_LABEL || draw(a, n) || draw(b, n))` truncated to `n`.
pub fn mix_sources(a: &mut EntropySource, b: &mut EntropySource, n: usize) -> Result<Vec<u8>> {
    let da = a.draw(n)?;
    let db = b.draw(n)?;
    Ok(mix_bytes(&da, &db, n))
}

pub fn mix_bytes(a: &[u8], b: &[u8], n: usize) -> Vec<u8> {
    shake256(&[MIX_LABEL, a, b], n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_source_draws_pattern() {
        let mut s = EntropySource::fixed_test("zero", &[0]);
        assert_eq!(s.draw(4).unwrap(), [0, 0, 0, 0]);
        assert_eq!(s.draw_count(), 1);
    }

    #[test]
    fn draw_limit() {
        let mut s = EntropySource::qrng_sim("q", [0; 32]);
        assert_eq!(
            s.draw(MAX_DRAW + 1),
            Err(EntropyError::DrawTooLarge {
                requested: MAX_DRAW + 1,
                limit: MAX_DRAW
            })
        );
    }

    #[test]
    fn zero_sources_mix_to_frozen_constant() {
        let mut a = EntropySource::fixed_test("a", &[0]);
        let mut b = EntropySource::fixed_test("b", &[0]);
        let out = mix_sources(&mut a, &mut b, 32).unwrap();
        assert_eq!(
            hex::encode(out),
            "7936e12657e212d0f5ccd62a9926dc7c14dd1e5e16cafb38eba4dc6c19304fc1"
        );
    }

    #[test]
    fn mixing_is_order_sensitive() {
        let mut a = EntropySource::fixed_test("a", &[0]);
        let mut b = EntropySource::fixed_test("b", &[1]);
        let ab = mix_sources(&mut a, &mut b, 32).unwrap();
        assert_eq!(
            hex::encode(&ab),
            "cb7912079bd4fcd9c47d4130388720e5cbe13f9c68fb2e6d835eb209fe33b6de"
        );
        let ba = mix_sources(&mut b, &mut a, 32).unwrap();
        assert_ne!(ab, ba);
        assert!(mix_sources(&mut a, &mut b, 0).unwrap().is_empty());
    }

    #[test]
    fn seed_sizes() {
        let mut s = EntropySource::qrng_sim("q", [1; 32]);
        assert_eq!(
            s.seed_for(registry::ML_KEM_768, SeedOperation::Keygen)
                .unwrap()
                .len(),
            64
        );
        assert_eq!(
            s.seed_for(registry::ML_KEM_768, SeedOperation::Encaps)
                .unwrap()
                .len(),
            32
        );
        assert_eq!(
            s.seed_for(registry::ML_DSA_65, SeedOperation::Keygen)
                .unwrap()
                .len(),
            32
        );
        assert_eq!(
            s.seed_for(registry::ML_DSA_65, SeedOperation::Sign)
                .unwrap()
                .len(),
            32
        );
        assert_eq!(
            s.seed_for(registry::X_WING, SeedOperation::Keygen)
                .unwrap()
                .len(),
            32
        );
        assert_eq!(
            s.seed_for(registry::X_WING, SeedOperation::Encaps)
                .unwrap()
                .len(),
            32
        );
        assert_eq!(
            s.seed_for(registry::ED448_ML_DSA_65, SeedOperation::Keygen)
                .unwrap()
                .len(),
            57
        );
        assert_eq!(
            s.seed_for(registry::ED448_ML_DSA_65, SeedOperation::Sign)
                .unwrap()
                .len(),
            32
        );
        assert!(matches!(
            s.seed_for(registry::AES_256_GCM, SeedOperation::Sign),
            Err(EntropyError::NoSeedSpec { .. })
        ));
    }

    #[test]
    fn health_tests() {
        let zero = health_test(&[0u8; 2048]);
        assert!(!zero.repetition_count_ok && !zero.adaptive_proportion_ok);
        let counter: Vec<u8> = (0..4096).map(|i| i as u8).collect();
        let r = health_test(&counter);
        assert!(r.repetition_count_ok && r.adaptive_proportion_ok);
        let mut q = EntropySource::qrng_sim("q", [2; 32]);
        assert!(q.health_check(64 * 1024).unwrap().passed());
    }

    #[test]
    fn failed_health_poisons_until_reset() {
        let mut s = EntropySource::fixed_test("zero", &[0]);
        assert_eq!(s.health_check(100), Err(EntropyError::WindowTooSmall(100)));
        assert!(!s.health_check(1024).unwrap().passed());
        assert_eq!(s.draw(1), Err(EntropyError::SourcePoisoned("zero".into())));
        s.reset();
        assert!(s.draw(1).is_ok());
    }
}
