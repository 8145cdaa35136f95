//! PEM-style text armor for certificates and CRLs.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;

pub const CERTIFICATE: &str = "QRAN CERTIFICATE";
pub const CRL: &str = "QRAN CRL";

pub fn encode(label: &str, der: &[u8]) -> String {
    let b64 = STANDARD.encode(der);
    let mut s = format!("-----BEGIN {label}-----\n");
    for chunk in b64.as_bytes().chunks(64) {
        s.push_str(std::str::from_utf8(chunk).expect("base64 is ascii"));
        s.push('\n');
    }
    s.push_str(&format!("-----END {label}-----\n"));
    s
}

/// Every block with `label`, in file order.
pub fn decode_all(label: &str, text: &str) -> Result<Vec<Vec<u8>>, String> {
    let begin = format!("-----BEGIN {label}-----");
    let end = format!("-----END {label}-----");
    let mut out = Vec::new();
    let mut body: Option<String> = None;
    for line in text.lines().map(str::trim) {
        if line == begin {
            if body.is_some() {
                return Err(format!("nested {label} block"));
            }
            body = Some(String::new());
        } else if line == end {
            let b = body.take().ok_or_else(|| format!("stray end of {label}"))?;
            out.push(STANDARD.decode(b).map_err(|e| format!("{label}: {e}"))?);
        } else if let Some(b) = body.as_mut() {
            b.push_str(line);
        }
    }
    if body.is_some() {
        return Err(format!("unterminated {label} block"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let data: Vec<u8> = (0..200u8).collect();
        let text = encode(CERTIFICATE, &data) + &encode(CERTIFICATE, b"x");
        assert_eq!(
            decode_all(CERTIFICATE, &text).unwrap(),
            vec![data, b"x".to_vec()]
        );
        assert!(decode_all(CRL, &text).unwrap().is_empty());
        assert!(decode_all(CERTIFICATE, "-----BEGIN QRAN CERTIFICATE-----\nAA\n").is_err());
    }
}
