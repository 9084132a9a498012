use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::ProblemGeometry;
use crate::instability::{SweepConfig, Variant};
use crate::lattice::{GeometryFile, GridField};
use crate::provenance::sha256_hex;

/// Background potential presets, applied on Omega.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum QbarPreset {
    Zero,
    Constant { value: f64 },
    /// `amplitude (1 - r^2 / radius^2)^3` around the origin.
    Bump { amplitude: f64, radius: f64 },
}

impl QbarPreset {
    pub fn field(&self, geometry: &ProblemGeometry) -> Result<GridField> {
        let lat = geometry.lattice();
        let full = match self {
            QbarPreset::Zero => GridField::zeros(lat),
            QbarPreset::Constant { value } => GridField::constant(lat, *value),
            QbarPreset::Bump { amplitude, radius } => {
                if !(*radius > 0.0) {
                    return Err(Error::Config(format!("bump radius must be positive, got {radius}")));
                }
                GridField::from_fn(lat, |x| {
                    let r2 = x.iter().map(|v| v * v).sum::<f64>() / (radius * radius);
                    if r2 < 1.0 {
                        amplitude * (1.0 - r2).powi(3)
                    } else {
                        0.0
                    }
                })
            }
        };
        if let QbarPreset::Bump { .. } = self {
            if (0..lat.num_nodes()).any(|i| full.values()[i] != 0.0 && !geometry.omega().contains(i)) {
                return Err(Error::Config("background bump leaves Omega".into()));
            }
        }
        Ok(full.masked(geometry.omega()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrid {
    pub r0: f64,
    /// `None` starts at the largest feasible separation.
    pub eps0: Option<f64>,
    pub points: usize,
    pub basis_size: usize,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self { r0: 1.0, eps0: None, points: 6, basis_size: 60 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub sweep: u64,
    pub data: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self { sweep: 7, data: 1 }
    }
}

/// Check thresholds; every one is multiplied by `scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub scale: f64,
    pub heat_roundtrip: f64,
    pub reduction_identity: f64,
    pub liouville_chain: f64,
    pub caccioppoli_max: f64,
    pub entropy_exponent: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            scale: 1.0,
            heat_roundtrip: 1e-6,
            reduction_identity: 1e-8,
            liouville_chain: 0.02,
            caccioppoli_max: 50.0,
            entropy_exponent: 0.15,
        }
    }
}

impl Tolerances {
    pub fn scaled(&self, value: f64) -> f64 {
        value * self.scale
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSettings {
    /// Rectangle side lengths of the cylinder cross-section.
    pub sides: Vec<f64>,
    pub height: f64,
    pub count: usize,
    /// 1-based inclusive index range of the fits.
    pub fit_range: [usize; 2],
}

impl Default for SpectrumSettings {
    fn default() -> Self {
        Self { sides: vec![1.0, 1.0], height: 1.0, count: 2000, fit_range: [100, 2000] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForwardSettings {
    /// Random potentials `q - qbar` in Omega'.
    pub samples: usize,
    /// Random data vectors on W.
    pub data: usize,
    pub amplitude: f64,
}

impl Default for ForwardSettings {
    fn default() -> Self {
        Self { samples: 4, data: 8, amplitude: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySettings {
    /// Random potential pairs for the reduction identity.
    pub trials: usize,
    /// Solved extensions for the Caccioppoli check.
    pub extensions: usize,
}

impl Default for VerifySettings {
    fn default() -> Self {
        Self { trials: 2, extensions: 4 }
    }
}

/// Deliberate faults for exercising the checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inject {
    /// Factor applied to the multiplier symbol in the heat roundtrip.
    pub symbol_scale: f64,
}

impl Default for Inject {
    fn default() -> Self {
        Self { symbol_scale: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Geometry JSON file; `None` uses the built-in reference layout.
    pub geometry: Option<PathBuf>,
    /// Resolution of the built-in layout.
    pub pts_per_side: usize,
    pub s: f64,
    pub delta: f64,
    /// `None` uses the critical `n / (2s)`.
    pub p: Option<f64>,
    pub qbar: QbarPreset,
    pub variant: Variant,
    pub sweep: SweepGrid,
    pub seeds: Seeds,
    pub out_dir: PathBuf,
    pub tolerances: Tolerances,
    pub spectrum: SpectrumSettings,
    pub forward: ForwardSettings,
    pub verify: VerifySettings,
    pub inject: Inject,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            geometry: None,
            pts_per_side: 48,
            s: 0.5,
            delta: 0.5,
            p: None,
            qbar: QbarPreset::Zero,
            variant: Variant::Schrodinger,
            sweep: SweepGrid::default(),
            seeds: Seeds::default(),
            out_dir: PathBuf::from("out"),
            tolerances: Tolerances::default(),
            spectrum: SpectrumSettings::default(),
            forward: ForwardSettings::default(),
            verify: VerifySettings::default(),
            inject: Inject::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Err(Error::Config("empty configuration".into()));
        }
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Pretty JSON with a trailing newline; parsing it gives back the same bytes.
    pub fn canonical(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("config serializes");
        text.push('\n');
        text
    }

    /// Hash of the canonical form with `out_dir` blanked, so relocating a run keeps its identity.
    pub fn hash(&self) -> String {
        let located = Self { out_dir: PathBuf::new(), ..self.clone() };
        sha256_hex(located.canonical().as_bytes())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.s > 0.0 && self.s < 1.0) {
            return bad(format!("s must lie in (0, 1), got {}", self.s));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if self.p.is_some_and(|p| !(p >= 1.0)) {
            return bad("p must be at least 1".into());
        }
        if !(self.tolerances.scale > 0.0) {
            return bad("tolerance scale must be positive".into());
        }
        if self.sweep.points < 2 || self.sweep.basis_size == 0 || !(self.sweep.r0 > 0.0) {
            return bad("sweep needs points >= 2, basis_size >= 1 and r0 > 0".into());
        }
        if self.spectrum.count < 3 || self.spectrum.fit_range[0] == 0 || self.spectrum.fit_range[0] > self.spectrum.fit_range[1] {
            return bad("spectrum needs count >= 3 and a nonempty 1-based fit range".into());
        }
        if !(self.inject.symbol_scale > 0.0) {
            return bad("inject.symbol_scale must be positive".into());
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<ProblemGeometry> {
        let file = match &self.geometry {
            Some(path) => GeometryFile::load(path)?,
            None => GeometryFile::reference_with(self.pts_per_side),
        };
        ProblemGeometry::from_file(&file, self.s)
    }

    pub fn sweep_config(&self) -> SweepConfig {
        SweepConfig {
            variant: self.variant.clone(),
            delta: self.delta,
            p: self.p,
            r0: self.sweep.r0,
            eps0: self.sweep.eps0,
            points: self.sweep.points,
            basis_size: self.sweep.basis_size,
            seed: self.seeds.sweep,
        }
    }
}
