//! JSON geometry files: a lattice plus labelled regions.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LatticeSpec, RegionLabel, RegionMask};
use crate::error::{Error, Result};

/// Shape of one region, rasterized with the center-in rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", content = "params", rename_all = "lowercase")]
pub enum ShapeSpec {
    Rect { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Mask { nodes: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub label: RegionLabel,
    #[serde(flatten)]
    pub shape: ShapeSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryFile {
    pub n: usize,
    pub box_len: f64,
    pub pts_per_side: usize,
    pub regions: Vec<RegionSpec>,
}

impl GeometryFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn lattice(&self) -> Result<LatticeSpec> {
        LatticeSpec::new(self.n, self.box_len, self.pts_per_side)
    }

    pub fn rasterize(&self) -> Result<Vec<RegionMask>> {
        let lat = self.lattice()?;
        self.regions
            .iter()
            .map(|r| match &r.shape {
                ShapeSpec::Rect { lo, hi } => RegionMask::rect(&lat, lo, hi, r.label.clone()),
                ShapeSpec::Ball { center, radius } => RegionMask::ball(&lat, center, *radius, r.label.clone()),
                ShapeSpec::Mask { nodes } => RegionMask::from_nodes(&lat, nodes.clone(), r.label.clone()),
            })
            .collect()
    }

    /// The rasterized region with the given label.
    pub fn region(&self, label: &RegionLabel) -> Result<RegionMask> {
        let lat = self.lattice()?;
        let spec = self
            .regions
            .iter()
            .find(|r| &r.label == label)
            .ok_or_else(|| Error::InvalidRegion(format!("no region labelled '{label}'")))?;
        match &spec.shape {
            ShapeSpec::Rect { lo, hi } => RegionMask::rect(&lat, lo, hi, label.clone()),
            ShapeSpec::Ball { center, radius } => RegionMask::ball(&lat, center, *radius, label.clone()),
            ShapeSpec::Mask { nodes } => RegionMask::from_nodes(&lat, nodes.clone(), label.clone()),
        }
    }

    /// Reference configuration: L = 4, M = 48, Omega = (-0.75, 0.75)^2,
    /// Omega' = (-0.5, 0.5)^2, W = (1, 1.5) x (-0.75, 0.75).
    pub fn reference() -> Self {
        Self::reference_with(48)
    }

    pub fn reference_with(pts_per_side: usize) -> Self {
        GeometryFile {
            n: 2,
            box_len: 4.0,
            pts_per_side,
            regions: vec![
                RegionSpec {
                    label: RegionLabel::Omega,
                    shape: ShapeSpec::Rect { lo: vec![-0.75, -0.75], hi: vec![0.75, 0.75] },
                },
                RegionSpec {
                    label: RegionLabel::OmegaPrime,
                    shape: ShapeSpec::Rect { lo: vec![-0.5, -0.5], hi: vec![0.5, 0.5] },
                },
                RegionSpec {
                    label: RegionLabel::W,
                    shape: ShapeSpec::Rect { lo: vec![1.0, -0.75], hi: vec![1.5, 0.75] },
                },
            ],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_geometry_sizes() {
        let g = GeometryFile::reference();
        let masks = g.rasterize().unwrap();
        let sizes: Vec<usize> = masks.iter().map(|m| m.len()).collect();
        assert_eq!(sizes, vec![324, 144, 108]);
    }

    #[test]
    fn json_shape_tags() {
        let text = r#"{"n":2,"box_len":2.0,"pts_per_side":8,"regions":[
            {"label":"omega","shape":"ball","params":{"center":[0.0,0.0],"radius":0.5}},
            {"label":"w","shape":"mask","params":{"nodes":[0,1]}}]}"#;
        let g: GeometryFile = serde_json::from_str(text).unwrap();
        let masks = g.rasterize().unwrap();
        assert_eq!(masks[0].label(), &RegionLabel::Omega);
        assert_eq!(masks[0].len(), 12);
        assert_eq!(masks[1].nodes(), &[0, 1]);
        let back: GeometryFile = serde_json::from_str(&serde_json::to_string(&g).unwrap()).unwrap();
        assert_eq!(back, g);
    }
}
