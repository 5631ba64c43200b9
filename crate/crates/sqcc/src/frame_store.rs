//! Raw frame store: little-endian binary.
//!
//! ```text
//! "SQC1" | N: u32 | N_cp: u32 | symbols_per_frame: u32 | (I: f64, Q: f64)*
//! ```
//!
//! The sample payload holds one or more whole frames back to back.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use sqcc_core::{Complex64, OfdmParams};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SQC1";
const HEADER_LEN: usize = 16;

pub fn encode(params: &OfdmParams, samples: &[Complex64]) -> Vec<u8> {
    let mut buf = Vec::with_capacity(HEADER_LEN + samples.len() * 16);
    buf.extend_from_slice(MAGIC);
    for v in [params.n_subcarriers, params.cp_len, params.symbols_per_frame] {
        buf.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for s in samples {
        buf.extend_from_slice(&s.re.to_le_bytes());
        buf.extend_from_slice(&s.im.to_le_bytes());
    }
    buf
}

/// Parses a frame store, returning its parameters and the frames it holds.
pub fn decode(bytes: &[u8]) -> std::result::Result<(OfdmParams, Vec<Vec<Complex64>>), String> {
    if bytes.len() < HEADER_LEN {
        return Err(format!("truncated header ({} bytes)", bytes.len()));
    }
    if &bytes[..4] != MAGIC {
        return Err("bad magic, expected SQC1".into());
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().expect("4 bytes")) as usize;
    let params = OfdmParams {
        n_subcarriers: word(0),
        cp_len: word(1),
        symbols_per_frame: word(2),
    };
    params.validate().map_err(|e| e.to_string())?;
    let payload = &bytes[HEADER_LEN..];
    let frame_bytes = params.frame_len() * 16;
    if payload.is_empty() || payload.len() % frame_bytes != 0 {
        return Err(format!(
            "payload of {} bytes is not a whole number of {}-byte frames",
            payload.len(),
            frame_bytes
        ));
    }
    let frames = payload
        .chunks_exact(frame_bytes)
        .map(|frame| {
            frame
                .chunks_exact(16)
                .map(|iq| {
                    let re = f64::from_le_bytes(iq[..8].try_into().expect("8 bytes"));
                    let im = f64::from_le_bytes(iq[8..].try_into().expect("8 bytes"));
                    Complex64::new(re, im)
                })
                .collect()
        })
        .collect();
    Ok((params, frames))
}

pub fn write_frames<'a, I>(path: &Path, params: &OfdmParams, frames: I) -> Result<()>
where
    I: IntoIterator<Item = &'a [Complex64]>,
{
    let mut samples = Vec::new();
    for f in frames {
        if f.len() != params.frame_len() {
            return Err(Error::Precondition(format!(
                "frame of {} samples does not match {} expected",
                f.len(),
                params.frame_len()
            )));
        }
        samples.extend_from_slice(f);
    }
    let mut file = io::BufWriter::new(fs::File::create(path).map_err(|e| Error::io(path, e))?);
    file.write_all(&encode(params, &samples))
        .and_then(|_| file.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_frames(path: &Path) -> Result<(OfdmParams, Vec<Vec<Complex64>>)> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|msg| Error::format(path, "frame store", msg))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> OfdmParams {
        OfdmParams {
            n_subcarriers: 4,
            cp_len: 1,
            symbols_per_frame: 2,
        }
    }

    #[test]
    fn header_layout() {
        let samples: Vec<Complex64> = (0..10).map(|i| Complex64::new(i as f64, -0.5)).collect();
        let bytes = encode(&tiny(), &samples);
        assert_eq!(&bytes[..4], b"SQC1");
        assert_eq!(&bytes[4..16], &[4, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(&bytes[16..24], &0.0f64.to_le_bytes());
        assert_eq!(&bytes[24..32], &(-0.5f64).to_le_bytes());
        assert_eq!(bytes.len(), 16 + 10 * 16);
        let (p, frames) = decode(&bytes).unwrap();
        assert_eq!(p, tiny());
        assert_eq!(frames, vec![samples]);
    }

    #[test]
    fn truncation_and_bad_magic_rejected() {
        let samples = vec![Complex64::new(1.0, 2.0); 20];
        let bytes = encode(&tiny(), &samples);
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode(&bytes[..10]).is_err());
        assert!(decode(&bytes[..16]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
        assert_eq!(decode(&bytes).unwrap().1.len(), 2);
    }
}
