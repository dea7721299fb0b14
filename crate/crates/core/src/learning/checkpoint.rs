//! Binary checkpoint format.
//!
//! Layout: the magic `RVFLY1`, a little-endian `u64` byte length, that many
//! bytes of UTF-8 manifest text, then every parameter as a little-endian
//! `f64`. The manifest's first line is the [`NetworkSpec`] line; each later
//! line is `name rows cols offset`.

use std::io::{Read, Write};
use std::path::Path;

use super::network::{Network, NetworkSpec};
use super::policy::PolicyParams;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 6] = b"RVFLY1";

pub fn manifest_text(net: &Network) -> String {
    let mut s = net.spec.to_line();
    s.push('\n');
    for e in net.manifest() {
        s.push_str(&format!("{} {} {} {}\n", e.name, e.rows, e.cols, e.offset));
    }
    s
}

pub fn to_bytes(policy: &PolicyParams) -> Vec<u8> {
    let manifest = manifest_text(&policy.net);
    let mut out = Vec::with_capacity(14 + manifest.len() + 8 * policy.values.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(manifest.len() as u64).to_le_bytes());
    out.extend_from_slice(manifest.as_bytes());
    for v in &policy.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn from_bytes(bytes: &[u8]) -> Result<PolicyParams> {
    let bad = |msg: &str| Error::Checkpoint(msg.to_string());
    if bytes.len() < 14 || &bytes[..6] != MAGIC {
        return Err(bad("missing RVFLY1 header"));
    }
    let len = u64::from_le_bytes(bytes[6..14].try_into().unwrap()) as usize;
    let body = bytes.get(14..14usize.saturating_add(len)).ok_or_else(|| bad("truncated manifest"))?;
    let text = std::str::from_utf8(body).map_err(|_| bad("manifest is not UTF-8"))?;
    let mut lines = text.lines();
    let spec = NetworkSpec::from_line(lines.next().ok_or_else(|| bad("empty manifest"))?)?;
    let net = Network::new(spec);
    let stored: Vec<&str> = lines.filter(|l| !l.is_empty()).collect();
    let expected = manifest_text(&net);
    if stored.len() != net.manifest().len() || !expected.lines().skip(1).zip(&stored).all(|(a, b)| a == *b) {
        return Err(bad("manifest does not match the network spec"));
    }
    let data = &bytes[14 + len..];
    if data.len() != 8 * net.n_params {
        return Err(Error::Layout {
            expected: net.n_params,
            got: data.len() / 8,
        });
    }
    let values = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(PolicyParams { net, values })
}

pub fn save(policy: &PolicyParams, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&to_bytes(policy))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<PolicyParams> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    from_bytes(&buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::RngStream;

    fn spec() -> NetworkSpec {
        NetworkSpec {
            present: 4,
            hist_in: 3,
            prev_in: 0,
            enc_hist: 2,
            enc_prev: 8,
            hidden: vec![5],
            act_dim: 2,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = RngStream::new(9);
        let mut p = PolicyParams::new(spec(), &mut rng, -0.7);
        p.values[0] = -0.0;
        p.values[1] = f64::MIN_POSITIVE / 3.0;
        let q = from_bytes(&to_bytes(&p)).unwrap();
        assert_eq!(q.net, p.net);
        for (a, b) in p.values.iter().zip(&q.values) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn rejects_corruption() {
        let mut rng = RngStream::new(1);
        let p = PolicyParams::new(spec(), &mut rng, 0.0);
        let bytes = to_bytes(&p);
        assert!(from_bytes(&bytes[..bytes.len() - 3]).is_err());
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(from_bytes(&wrong).is_err());
    }
}
