//! HSIC v1: a little-endian container for a hyperspectral cube and its labels.
//!
//! ```text
//! offset  size        field
//! 0       4           magic "HSIC"
//! 4       1           version (0x01)
//! 5       1           flags (bit 0: labels present, other bits zero)
//! 6       4           u32 height
//! 10      4           u32 width
//! 14      4           u32 bands
//! 18      4*h*w*d     f32 values, (h, w, d) row-major
//! ...     2*h*w       u16 labels, (h, w) row-major, only if flagged
//! ```
//!
//! No padding, no checksum, no trailing bytes.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::HsiCube;
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"HSIC";
pub const VERSION: u8 = 0x01;
pub const FLAG_LABELS: u8 = 0x01;
pub const HEADER_LEN: usize = 18;

fn format_err(offset: usize, msg: impl Into<String>) -> Error {
    Error::Format {
        offset: offset as u64,
        msg: msg.into(),
    }
}

pub fn encode(cube: &HsiCube) -> Result<Vec<u8>> {
    let to_u32 = |v: usize, what: &str| {
        u32::try_from(v).map_err(|_| Error::param(format!("{what} {v} does not fit in u32")))
    };
    let (h, w, d) = (
        to_u32(cube.height, "height")?,
        to_u32(cube.width, "width")?,
        to_u32(cube.bands, "bands")?,
    );
    cube.check()?;

    let label_bytes = cube.labels.as_ref().map_or(0, |l| 2 * l.len());
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * cube.values.len() + label_bytes);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(if cube.labels.is_some() {
        FLAG_LABELS
    } else {
        0
    });
    out.extend_from_slice(&h.to_le_bytes());
    out.extend_from_slice(&w.to_le_bytes());
    out.extend_from_slice(&d.to_le_bytes());
    for v in &cube.values {
        out.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    if let Some(labels) = &cube.labels {
        for l in labels {
            out.extend_from_slice(&l.to_le_bytes());
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                format_err(
                    self.bytes.len(),
                    format!(
                        "truncated while reading {what}: need {n} bytes at offset {}",
                        self.pos
                    ),
                )
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn decode(bytes: &[u8]) -> Result<HsiCube> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4, "magic")? != MAGIC {
        return Err(format_err(0, "bad magic, expected \"HSIC\""));
    }
    let version = cur.take(1, "version")?[0];
    if version != VERSION {
        return Err(format_err(4, format!("unsupported version {version:#04x}")));
    }
    let flags = cur.take(1, "flags")?[0];
    if flags & !FLAG_LABELS != 0 {
        return Err(format_err(
            5,
            format!("reserved flag bits set: {flags:#04x}"),
        ));
    }
    let h = cur.u32("height")? as usize;
    let w = cur.u32("width")? as usize;
    let d = cur.u32("bands")? as usize;

    let count = h
        .checked_mul(w)
        .and_then(|p| p.checked_mul(d))
        .ok_or_else(|| format_err(6, "cube size overflows"))?;
    let value_bytes = count
        .checked_mul(4)
        .ok_or_else(|| format_err(6, "cube size overflows"))?;
    let raw = cur.take(value_bytes, "values")?;
    let values = raw
        .chunks_exact(4)
        .map(|c| f32::from_bits(u32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect();

    let labels = if flags & FLAG_LABELS != 0 {
        let raw = cur.take(2 * h * w, "labels")?;
        Some(
            raw.chunks_exact(2)
                .map(|c| u16::from_le_bytes([c[0], c[1]]))
                .collect(),
        )
    } else {
        None
    };

    if cur.pos != bytes.len() {
        return Err(format_err(
            cur.pos,
            format!("{} trailing bytes after payload", bytes.len() - cur.pos),
        ));
    }
    Ok(HsiCube {
        height: h,
        width: w,
        bands: d,
        values,
        labels,
        band_map: (0..d).collect(),
    })
}

pub fn read_hsic(path: impl AsRef<Path>) -> Result<HsiCube> {
    decode(&fs::read(path)?)
}

/// Writes through a sibling temp file and renames it into place.
pub fn write_hsic(cube: &HsiCube, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode(cube)?;
    write_atomic(path.as_ref(), &bytes)
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube(labels: bool) -> HsiCube {
        HsiCube::new(
            2,
            2,
            3,
            (0..12).map(|v| v as f32 * 0.5).collect(),
            labels.then(|| vec![0, 1, 2, 65535]),
        )
        .unwrap()
    }

    #[test]
    fn zero_cube_round_trips() {
        let c = HsiCube::new(2, 2, 3, vec![0.0; 12], None).unwrap();
        let bytes = encode(&c).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN + 48);
        let back = decode(&bytes).unwrap();
        assert_eq!(back.values.len(), 12);
        assert_eq!(encode(&back).unwrap(), bytes);
    }

    #[test]
    fn labels_are_preserved() {
        let c = cube(true);
        let back = decode(&encode(&c).unwrap()).unwrap();
        assert_eq!(back.labels, Some(vec![0, 1, 2, 65535]));
        assert_eq!(back.values, c.values);
    }

    #[test]
    fn header_layout() {
        let bytes = encode(&cube(true)).unwrap();
        assert_eq!(&bytes[..4], b"HSIC");
        assert_eq!(bytes[4], 1);
        assert_eq!(bytes[5], 1);
        assert_eq!(&bytes[6..10], &2u32.to_le_bytes());
        assert_eq!(&bytes[14..18], &3u32.to_le_bytes());
        assert_eq!(bytes.len(), HEADER_LEN + 48 + 8);
    }

    #[test]
    fn truncation_reports_offset_and_no_cube() {
        let bytes = encode(&cube(true)).unwrap();
        for cut in [0, 3, 5, 12, HEADER_LEN + 10, bytes.len() - 1] {
            match decode(&bytes[..cut]) {
                Err(Error::Format { offset, .. }) => assert_eq!(offset, cut as u64),
                other => panic!("cut {cut}: {other:?}"),
            }
        }
    }

    #[test]
    fn bad_magic_version_flags_and_trailing() {
        let good = encode(&cube(false)).unwrap();

        let mut b = good.clone();
        b[0] = b'X';
        assert!(matches!(decode(&b), Err(Error::Format { offset: 0, .. })));

        let mut b = good.clone();
        b[4] = 2;
        assert!(matches!(decode(&b), Err(Error::Format { offset: 4, .. })));

        let mut b = good.clone();
        b[5] = 0x80;
        assert!(matches!(decode(&b), Err(Error::Format { offset: 5, .. })));

        let mut b = good.clone();
        b.push(0);
        assert!(matches!(decode(&b), Err(Error::Format { .. })));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.hsic");
        let c = cube(true);
        write_hsic(&c, &p).unwrap();
        let back = read_hsic(&p).unwrap();
        assert_eq!(back.labels, c.labels);
        assert_eq!(fs::read(&p).unwrap(), encode(&c).unwrap());
    }
}
