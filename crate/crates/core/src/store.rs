//! Binary container for Green-function pairs.
//!
//! Layout (little endian): magic `OPAGREEN`, format version `u32`, number of
//! grid points `u64`, grid center and span `f64` (rad/fs), picture tag and
//! free-form metadata as `u32` length + UTF-8 bytes, then the entries of `C`
//! and `S` (unweighted, 1/(rad/fs)) in column-major order as `(re, im)` pairs.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::green::{GreenPair, GreenSource, Picture};
use crate::grid::make_grid;
use crate::spectral::KernelMatrix;

pub const MAGIC: &[u8; 8] = b"OPAGREEN";
pub const VERSION: u32 = 1;

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

pub fn encode_green(g: &GreenPair, metadata: &str) -> Vec<u8> {
    let grid = g.grid();
    let n = grid.len();
    let mut out = Vec::with_capacity(64 + metadata.len() + 32 * n * n);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&grid.center().to_le_bytes());
    out.extend_from_slice(&grid.span().to_le_bytes());
    put_str(&mut out, g.picture.tag());
    put_str(&mut out, metadata);
    for m in [g.c.entries(), g.s.entries()] {
        for v in m.iter() {
            out.extend_from_slice(&v.re.to_le_bytes());
            out.extend_from_slice(&v.im.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() < n {
            return Err(Error::Format("truncated Green-function file".into()));
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        String::from_utf8(self.take(len)?.to_vec()).map_err(|_| Error::Format("metadata is not UTF-8".into()))
    }
}

/// Decodes a container; the metadata text is returned as the pair's source.
pub fn decode_green(bytes: &[u8]) -> Result<GreenPair> {
    let mut r = Reader { bytes };
    if r.take(8)? != MAGIC {
        return Err(Error::Format("not a Green-function file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported container version {version}")));
    }
    let n = usize::try_from(r.u64()?).map_err(|_| Error::Format("grid size overflows".into()))?;
    let (center, span) = (r.f64()?, r.f64()?);
    let tag = r.string()?;
    let picture = Picture::from_tag(&tag).ok_or_else(|| Error::Format(format!("unknown picture tag `{tag}`")))?;
    let metadata = r.string()?;
    let grid = make_grid(center, span, n)?;
    let expected = n.checked_mul(n).and_then(|m| m.checked_mul(32));
    if expected != Some(r.bytes.len()) {
        return Err(Error::Format(format!(
            "expected {} bytes of matrix data for {n} points, found {}",
            expected.map_or("overflowing".to_string(), |e| e.to_string()),
            r.bytes.len()
        )));
    }
    let mut matrix = || -> Result<DMatrix<Complex64>> {
        let mut data = Vec::with_capacity(n * n);
        for _ in 0..n * n {
            data.push(Complex64::new(r.f64()?, r.f64()?));
        }
        Ok(DMatrix::from_vec(n, n, data))
    };
    let c = matrix()?;
    let s = matrix()?;
    GreenPair::new(
        KernelMatrix::new(grid, c)?,
        KernelMatrix::new(grid, s)?,
        picture,
        GreenSource::Stored(metadata),
    )
}

/// Writes `bytes` to a temporary file next to `path` and renames it into
/// place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidParameter(format!("`{}` is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

pub fn save_green(path: &Path, g: &GreenPair, metadata: &str) -> Result<()> {
    write_atomic(path, &encode_green(g, metadata))
}

pub fn load_green(path: &Path) -> Result<GreenPair> {
    decode_green(&fs::read(path)?)
}
