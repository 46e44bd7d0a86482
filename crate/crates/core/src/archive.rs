//! Versioned, checksummed binary container shared by checkpoints and noise
//! mask pools.
//!
//! Layout (little endian):
//! `magic[8] | version u32 | header_len u64 | header (JSON) | payload_len u64 | payload | sha256[32]`
//! where the trailing digest covers every preceding byte.

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const DIGEST_LEN: usize = 32;

pub(crate) fn write_archive(
    magic: &[u8; 8],
    version: u32,
    header: &serde_json::Value,
    payload: &[u8],
) -> Result<Vec<u8>> {
    let header = serde_json::to_vec(header)?;
    let mut out = Vec::with_capacity(8 + 4 + 16 + header.len() + payload.len() + DIGEST_LEN);
    out.extend_from_slice(magic);
    out.extend_from_slice(&version.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(payload);
    let digest = Sha256::digest(&out);
    out.extend_from_slice(digest.as_slice());
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Integrity("archive truncated".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Returns `(version, header, payload)` after verifying magic and checksum.
/// The caller decides which versions it accepts.
pub(crate) fn read_archive_any_version(
    magic: &[u8; 8],
    bytes: &[u8],
) -> Result<(u32, serde_json::Value, Vec<u8>)> {
    if bytes.len() < 8 + 4 + 16 + DIGEST_LEN {
        return Err(Error::Integrity("archive truncated".into()));
    }
    let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::Integrity("checksum mismatch".into()));
    }
    let mut r = Reader { buf: body, pos: 0 };
    if r.take(8)? != magic {
        return Err(Error::Integrity("bad magic".into()));
    }
    let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
    let header_len = r.u64()? as usize;
    let header: serde_json::Value = serde_json::from_slice(r.take(header_len)?)?;
    let payload_len = r.u64()? as usize;
    let payload = r.take(payload_len)?.to_vec();
    if r.pos != body.len() {
        return Err(Error::Integrity("trailing bytes after payload".into()));
    }
    Ok((version, header, payload))
}

pub(crate) fn read_archive(
    magic: &[u8; 8],
    expected_version: u32,
    bytes: &[u8],
) -> Result<(serde_json::Value, Vec<u8>)> {
    let (version, header, payload) = read_archive_any_version(magic, bytes)?;
    if version != expected_version {
        return Err(Error::UnsupportedVersion { found: version, expected: expected_version });
    }
    Ok((header, payload))
}

pub(crate) fn f32s_to_bytes(values: &[f32]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub(crate) fn bytes_to_f32s(bytes: &[u8]) -> Result<Vec<f32>> {
    if bytes.len() % 4 != 0 {
        return Err(Error::Integrity("payload not a whole number of f32 values".into()));
    }
    Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect())
}
