//! OS entropy backend and environment-driven source selection.

use qran_core::entropy::{EntropyBackend, EntropySource};

/// Name of the variable that picks the default source: `qrng-sim` or `os`.
pub const ENTROPY_ENV: &str = "QRAN_ENTROPY";

pub struct OsBackend;

impl EntropyBackend for OsBackend {
    fn fill(&mut self, out: &mut [u8]) -> Result<(), String> {
        getrandom::getrandom(out).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceChoice {
    QrngSim,
    Os,
}

impl SourceChoice {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "" | "qrng-sim" | "qrng_sim" | "sim" => Some(SourceChoice::QrngSim),
            "os" => Some(SourceChoice::Os),
            _ => None,
        }
    }

    pub fn from_env() -> Result<Self, String> {
        match std::env::var(ENTROPY_ENV) {
            Ok(v) => {
                Self::parse(&v).ok_or_else(|| format!("{ENTROPY_ENV}={v} is not qrng-sim or os"))
            }
            Err(_) => Ok(SourceChoice::QrngSim),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SourceChoice::QrngSim => "qrng-sim",
            SourceChoice::Os => "os",
        }
    }

    /// Builds a source. `seed` and `label` only matter for the simulator.
    pub fn source(self, id: &str, seed: u64, label: &str) -> EntropySource {
        match self {
            SourceChoice::QrngSim => EntropySource::qrng_sim_labeled(id, seed, label),
            SourceChoice::Os => EntropySource::os(id, Box::new(OsBackend)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_names() {
        assert_eq!(SourceChoice::parse("OS"), Some(SourceChoice::Os));
        assert_eq!(SourceChoice::parse("qrng-sim"), Some(SourceChoice::QrngSim));
        assert_eq!(SourceChoice::parse("dice"), None);
    }

    #[test]
    fn os_source_draws() {
        let mut e = SourceChoice::Os.source("t", 0, "");
        let a = e.draw(32).unwrap();
        let b = e.draw(32).unwrap();
        assert_ne!(a, b);
    }
}
