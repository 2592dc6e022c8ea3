//! Binary ATF container.
//!
//! Little-endian layout:
//!
//! ```text
//! magic      8 bytes   "PSZATF1\0"
//! stage      u32       0..=3
//! K, M, L    u32 × 3   listeners, points per ear, loudspeakers
//! n_fft      u64
//! fs         f64
//! digest     32 bytes  scene SHA-256 (zeros when unknown)
//! values     f64 × 2 × K·2·M·L·(n_fft/2+1), (re, im) in (k, e, m, ℓ, bin) order
//! checksum   32 bytes  SHA-256 of everything above
//! ```

use std::path::Path;

use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::atf::{AtfSet, FrequencyGrid, Stage};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"PSZATF1\0";
const HEADER_LEN: usize = 8 + 4 * 4 + 8 + 8 + 32;

pub fn encode(set: &AtfSet) -> Vec<u8> {
    let mut buf = Vec::with_capacity(HEADER_LEN + set.data.len() * 16 + 32);
    buf.extend_from_slice(MAGIC);
    for v in [set.stage.index(), set.n_listeners, set.points_per_ear, set.n_speakers] {
        buf.extend_from_slice(&(v as u32).to_le_bytes());
    }
    buf.extend_from_slice(&(set.grid.n_fft as u64).to_le_bytes());
    buf.extend_from_slice(&set.grid.fs.to_le_bytes());
    let mut digest = [0u8; 32];
    if let Ok(bytes) = hex::decode(&set.scene_digest) {
        if bytes.len() == 32 {
            digest.copy_from_slice(&bytes);
        }
    }
    buf.extend_from_slice(&digest);
    for c in &set.data {
        buf.extend_from_slice(&c.re.to_le_bytes());
        buf.extend_from_slice(&c.im.to_le_bytes());
    }
    let sum = Sha256::digest(&buf);
    buf.extend_from_slice(&sum);
    buf
}

pub fn decode(bytes: &[u8]) -> std::result::Result<AtfSet, String> {
    if bytes.len() < HEADER_LEN + 32 {
        return Err(format!("{} bytes is too short for an ATF archive", bytes.len()));
    }
    if &bytes[..8] != MAGIC {
        return Err("not an ATF archive (bad magic)".into());
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != trailer {
        return Err("checksum mismatch, the file is damaged or truncated".into());
    }
    let u32_at = |o: usize| u32::from_le_bytes(body[o..o + 4].try_into().unwrap()) as usize;
    let stage = *Stage::ALL
        .get(u32_at(8))
        .ok_or_else(|| format!("unknown stage index {}", u32_at(8)))?;
    let (k, m, l) = (u32_at(12), u32_at(16), u32_at(20));
    let n_fft = u64::from_le_bytes(body[24..32].try_into().unwrap()) as usize;
    let fs = f64::from_le_bytes(body[32..40].try_into().unwrap());
    let grid = FrequencyGrid::new(fs, n_fft).map_err(|e| e.to_string())?;
    let digest = &body[40..72];
    let scene_digest = if digest.iter().all(|&b| b == 0) {
        String::new()
    } else {
        hex::encode(digest)
    };

    let count = k
        .checked_mul(2 * m)
        .and_then(|v| v.checked_mul(l))
        .and_then(|v| v.checked_mul(grid.n_bins()))
        .ok_or("dimensions overflow")?;
    let values = &body[HEADER_LEN..];
    if values.len() != count * 16 {
        return Err(format!(
            "payload holds {} bytes, dimensions K={k} M={m} L={l} n_fft={n_fft} need {}",
            values.len(),
            count * 16
        ));
    }
    let data = values
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect();
    Ok(AtfSet {
        stage,
        n_listeners: k,
        points_per_ear: m,
        n_speakers: l,
        grid,
        scene_digest,
        data,
    })
}

pub fn write_atf(set: &AtfSet, path: &Path) -> Result<()> {
    std::fs::write(path, encode(set)).map_err(|e| Error::io(path, e))
}

pub fn read_atf(path: &Path) -> Result<AtfSet> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|reason| Error::Archive {
        path: path.to_path_buf(),
        reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> AtfSet {
        let grid = FrequencyGrid::new(44_100.0, 16).unwrap();
        let mut set = AtfSet::zeros(Stage::C2, 2, 1, 3, grid);
        for (i, v) in set.data.iter_mut().enumerate() {
            *v = Complex64::new((i as f64).sin(), -(i as f64 * 0.3).cos() / 7.0);
        }
        set.scene_digest = "ab".repeat(32);
        set
    }

    #[test]
    fn roundtrip_is_exact() {
        let set = sample();
        assert_eq!(decode(&encode(&set)).unwrap(), set);
        let mut anonymous = sample();
        anonymous.scene_digest.clear();
        assert_eq!(decode(&encode(&anonymous)).unwrap(), anonymous);
    }

    #[test]
    fn corruption_is_detected() {
        let mut bytes = encode(&sample());
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        assert!(decode(&bytes).unwrap_err().contains("checksum"));
        let bytes = encode(&sample());
        assert!(decode(&bytes[..bytes.len() - 5]).unwrap_err().contains("checksum"));
        assert!(decode(b"hello").is_err());
    }

    #[test]
    fn file_errors_name_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.atf");
        let mut bytes = encode(&sample());
        bytes.truncate(200);
        std::fs::write(&path, bytes).unwrap();
        let msg = read_atf(&path).unwrap_err().to_string();
        assert!(msg.contains("x.atf") && msg.contains("checksum"), "{msg}");
    }
}
