use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ProblemGeometry;
use crate::error::{Error, Result};
use crate::lattice::{dual_norm, op_norm, SobolevGram};
use crate::linalg::asymmetry;
use crate::provenance::hash_f64s;

/// Bilinear-form matrix `(f, g) -> <Lambda f, g>` on the W node indicators.
#[derive(Debug, Clone)]
pub struct DtnMatrix {
    geometry: Arc<ProblemGeometry>,
    entries: DMatrix<f64>,
    gram: Arc<SobolevGram>,
    q_descriptor: String,
    realization: String,
}

impl DtnMatrix {
    pub fn new(
        geometry: Arc<ProblemGeometry>,
        entries: DMatrix<f64>,
        gram: Arc<SobolevGram>,
        q_descriptor: String,
        realization: String,
    ) -> Self {
        Self { geometry, entries, gram, q_descriptor, realization }
    }

    pub fn geometry(&self) -> &ProblemGeometry {
        &self.geometry
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn gram(&self) -> &Arc<SobolevGram> {
        &self.gram
    }

    /// Hash of the potential on Omega (or a composite tag for differences).
    pub fn q_descriptor(&self) -> &str {
        &self.q_descriptor
    }

    pub fn realization(&self) -> &str {
        &self.realization
    }

    pub fn asymmetry(&self) -> f64 {
        asymmetry(&self.entries)
    }

    /// `H~^s(W) -> H^{-s}(W)` operator norm.
    pub fn op_norm(&self) -> Result<f64> {
        op_norm(&self.entries, &self.gram)
    }

    /// Functional `g -> <Lambda f, g>` as a vector on W.
    pub fn apply(&self, f: &DVector<f64>) -> DVector<f64> {
        &self.entries * f
    }

    /// `||Lambda f||_{H^{-s}(W)}`.
    pub fn dual_norm_of(&self, f: &DVector<f64>) -> Result<f64> {
        dual_norm(self.apply(f).as_slice(), &self.gram)
    }

    /// Entrywise difference; both operands must share geometry and realization.
    pub fn sub(&self, other: &DtnMatrix) -> Result<DtnMatrix> {
        if self.geometry.hash() != other.geometry.hash() {
            return Err(Error::InvalidArgument("DtN matrices live on different geometries".into()));
        }
        if self.realization != other.realization {
            return Err(Error::InvalidArgument("DtN matrices use different realizations".into()));
        }
        Ok(DtnMatrix {
            geometry: self.geometry.clone(),
            entries: &self.entries - &other.entries,
            gram: self.gram.clone(),
            q_descriptor: format!("{}-{}", &self.q_descriptor[..16.min(self.q_descriptor.len())], &other.q_descriptor[..16.min(other.q_descriptor.len())]),
            realization: self.realization.clone(),
        })
    }

    /// Same metadata with different entries (e.g. an exact difference form).
    pub fn with_entries(&self, entries: DMatrix<f64>, q_descriptor: String) -> DtnMatrix {
        DtnMatrix { entries, q_descriptor, ..self.clone() }
    }

    pub fn record(&self) -> DtnRecord {
        DtnRecord {
            geometry_hash: self.geometry.hash().to_string(),
            q_hash: self.q_descriptor.clone(),
            gram_hash: hash_f64s(self.gram.matrix().as_slice()),
            realization: self.realization.clone(),
            s: self.geometry.s(),
            size: self.entries.nrows(),
            entries: self.entries.transpose().as_slice().to_vec(),
        }
    }
}

const MAGIC: &[u8; 4] = b"DTN1";

/// Serializable form of a DtN matrix with provenance hashes. Entries are row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtnRecord {
    pub geometry_hash: String,
    pub q_hash: String,
    pub gram_hash: String,
    pub realization: String,
    pub s: f64,
    pub size: usize,
    pub entries: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct BinaryHeader {
    geometry_hash: String,
    q_hash: String,
    gram_hash: String,
    realization: String,
    s: f64,
    size: usize,
}

impl DtnRecord {
    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.size, self.size, &self.entries)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let r: DtnRecord = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        r.validate()?;
        Ok(r)
    }

    /// `DTN1`, header length (u32 LE), JSON header, then `size^2` f64 LE values.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let header = serde_json::to_vec(&BinaryHeader {
            geometry_hash: self.geometry_hash.clone(),
            q_hash: self.q_hash.clone(),
            gram_hash: self.gram_hash.clone(),
            realization: self.realization.clone(),
            s: self.s,
            size: self.size,
        })?;
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        out.write_all(MAGIC)?;
        out.write_all(&(header.len() as u32).to_le_bytes())?;
        out.write_all(&header)?;
        for v in &self.entries {
            out.write_all(&v.to_le_bytes())?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        if bytes.len() < 8 || &bytes[..4] != MAGIC {
            return Err(Error::Config("not a DtN binary file".into()));
        }
        let hlen = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let header: BinaryHeader = serde_json::from_slice(
            bytes.get(8..8 + hlen).ok_or_else(|| Error::Config("truncated DtN header".into()))?,
        )?;
        let body = &bytes[8 + hlen..];
        if body.len() != header.size * header.size * 8 {
            return Err(Error::Config("DtN body length does not match header".into()));
        }
        let entries = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(DtnRecord {
            geometry_hash: header.geometry_hash,
            q_hash: header.q_hash,
            gram_hash: header.gram_hash,
            realization: header.realization,
            s: header.s,
            size: header.size,
            entries,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.entries.len() != self.size * self.size {
            return Err(Error::DimensionMismatch { expected: self.size * self.size, got: self.entries.len() });
        }
        Ok(())
    }
}
