//! Field files (`.hdr` text header + `.bin` little-endian data) and run manifests.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fields::{MultiTimeField, MultiTimeGrid};

pub const FORMAT: &str = "mtve-field 1";
pub const MANIFEST_NAME: &str = "manifest.toml";
pub const SCENARIO_NAME: &str = "scenario.toml";

pub fn grid_descriptor(grid: &MultiTimeGrid) -> String {
    format!(
        "time: n={} horizon={:?}; space: {:?} n={}",
        grid.time().len(),
        grid.time().horizon(),
        grid.space().layout(),
        grid.space().len()
    )
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

impl FileRecord {
    pub fn of(name: &str, bytes: &[u8]) -> Self {
        Self {
            name: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        }
    }

    /// Compares the file on disk with this record.
    pub fn check(&self, dir: &Path) -> Result<()> {
        let fail = |reason: String| Error::Verification {
            file: self.name.clone(),
            reason,
        };
        let data = fs::read(dir.join(&self.name)).map_err(|e| fail(format!("cannot read: {e}")))?;
        if data.len() as u64 != self.bytes {
            return Err(fail(format!(
                "length {} differs from recorded {}",
                data.len(),
                self.bytes
            )));
        }
        if sha256_hex(&data) != self.sha256 {
            return Err(fail("checksum mismatch".into()));
        }
        Ok(())
    }
}

/// Header text and binary payload of a field, ready to be written.
pub fn encode_field(stem: &str, field: &MultiTimeField) -> (String, Vec<u8>) {
    let mut bin = Vec::with_capacity(16 * field.values().len());
    for v in field.values() {
        bin.extend_from_slice(&v.re.to_le_bytes());
        bin.extend_from_slice(&v.im.to_le_bytes());
    }
    let g = field.grid();
    let hdr = format!(
        "format: {FORMAT}\n\
         endianness: little\n\
         value: f64 pairs (re, im)\n\
         order: eta1, x1, eta2, x2 (eta1 outermost)\n\
         n_t: {}\n\
         n_space: {}\n\
         grid: {}\n\
         scale_exponent: {:?}\n\
         data: {stem}.bin\n\
         bytes: {}\n",
        g.time().len(),
        g.space().len(),
        grid_descriptor(g),
        field.scale_exponent(),
        bin.len()
    );
    (hdr, bin)
}

fn parse_header(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .filter_map(|l| {
            l.split_once(':')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

/// Reads `<stem>.hdr` and its data file and checks them against `grid`.
pub fn read_field(dir: &Path, stem: &str, grid: Arc<MultiTimeGrid>) -> Result<MultiTimeField> {
    let hdr_name = format!("{stem}.hdr");
    let fail = |file: &str, reason: String| Error::Verification {
        file: file.to_string(),
        reason,
    };
    let text = fs::read_to_string(dir.join(&hdr_name))
        .map_err(|e| fail(&hdr_name, format!("cannot read: {e}")))?;
    let h = parse_header(&text);
    let get = |k: &str| {
        h.get(k)
            .ok_or_else(|| fail(&hdr_name, format!("missing key {k}")))
    };
    if get("format")? != FORMAT || get("endianness")? != "little" {
        return Err(fail(&hdr_name, "unsupported format".into()));
    }
    if get("grid")? != &grid_descriptor(&grid) {
        return Err(fail(
            &hdr_name,
            "grid descriptor does not match the scenario".into(),
        ));
    }
    let exponent: f64 = get("scale_exponent")?
        .parse()
        .map_err(|_| fail(&hdr_name, "bad scale_exponent".into()))?;
    let data_name = get("data")?.clone();
    let bin = fs::read(dir.join(&data_name))
        .map_err(|e| fail(&data_name, format!("cannot read: {e}")))?;
    if bin.len() != 16 * grid.len() {
        return Err(fail(
            &data_name,
            format!("expected {} bytes, found {}", 16 * grid.len(), bin.len()),
        ));
    }
    let values = bin
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            Complex64::new(re, im)
        })
        .collect();
    MultiTimeField::with_exponent(grid, values, exponent)
        .map_err(|e| fail(&data_name, e.to_string()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub scenario_sha256: String,
    pub grid: String,
    pub iterations: usize,
    pub converged: bool,
    /// bnorm(χ − χ_free − Aχ) of the stored χ.
    pub residual: f64,
    pub residual_history: Vec<f64>,
    pub lambda_re: f64,
    pub lambda_im: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_bound: Option<f64>,
    pub warnings: Vec<String>,
    pub elapsed_seconds: f64,
    pub files: Vec<FileRecord>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let fail = |reason: String| Error::Verification {
            file: path.display().to_string(),
            reason,
        };
        let text = fs::read_to_string(path).map_err(|e| fail(format!("cannot read: {e}")))?;
        toml::from_str(&text).map_err(|e| fail(e.to_string()))
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_round_trip_is_exact() {
        let g = Arc::new(MultiTimeGrid::flat(1, 1.0, 3, 0.0).unwrap());
        let f = MultiTimeField::from_fn(g.clone(), |a, b| {
            Complex64::new(0.1 * a as f64 - 1.0 / 3.0, (b as f64).sqrt())
        })
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (hdr, bin) = encode_field("chi", &f);
        fs::write(dir.path().join("chi.hdr"), hdr).unwrap();
        fs::write(dir.path().join("chi.bin"), &bin).unwrap();
        let back = read_field(dir.path(), "chi", g.clone()).unwrap();
        assert_eq!(back.sub(&f).unwrap().bnorm(), 0.0);
        assert_eq!(back.values(), f.values());

        let rec = FileRecord::of("chi.bin", &bin);
        rec.check(dir.path()).unwrap();
        fs::write(dir.path().join("chi.bin"), &bin[..bin.len() - 1]).unwrap();
        let err = rec.check(dir.path()).unwrap_err().to_string();
        assert!(err.contains("chi.bin"), "{err}");
        assert!(read_field(dir.path(), "chi", g).is_err());
    }
}
