use crate::entropy::{fit_decay_at, DecayFit, DecayModel};
use crate::error::{Error, Result};
use crate::lattice::{fft_forward, GridField, RegionMask};

/// Radially binned spectral envelope of a windowed field.
#[derive(Debug, Clone)]
pub struct DecaySpectrum {
    /// Integer wavenumber radius of each bin.
    pub radii: Vec<f64>,
    /// Largest coefficient modulus in the bin, normalized by the global maximum.
    pub amplitudes: Vec<f64>,
}

/// Relative floor below which a bin is treated as roundoff.
const USABLE_FLOOR: f64 = 1e-11;

impl DecaySpectrum {
    /// Restricts `u` to `region`, multiplies by the analytic window
    /// `sech(|x - c| / w)` centered on the region with `w = width_frac` times the
    /// region half-width, and bins `|DFT|` by the nearest integer `|k|`.
    ///
    /// The window's own spectrum decays exactly exponentially, so the
    /// envelope decays exponentially whenever `u` is analytic near the region.
    pub fn of(u: &GridField, region: &RegionMask, width_frac: f64) -> Result<Self> {
        let lat = u.lattice();
        lat.check_same(region.lattice())?;
        let n = lat.dim();
        let mut center = vec![0.0; n];
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        for &node in region.nodes() {
            for (a, x) in lat.coord(node).into_iter().enumerate() {
                center[a] += x;
                lo[a] = lo[a].min(x);
                hi[a] = hi[a].max(x);
            }
        }
        center.iter_mut().for_each(|c| *c /= region.len() as f64);
        let half = (0..n).map(|a| 0.5 * (hi[a] - lo[a] + lat.spacing())).fold(f64::INFINITY, f64::min);
        let sigma = width_frac * half;
        let mut windowed = vec![0.0; lat.num_nodes()];
        for &node in region.nodes() {
            let r2: f64 = lat.coord(node).iter().zip(&center).map(|(x, c)| (x - c) * (x - c)).sum();
            windowed[node] = u.values()[node] / (r2.sqrt() / sigma).cosh();
        }
        let hat = fft_forward(lat, &windowed);
        let kmax = lat.pts_per_side() / 2;
        let mut env = vec![0.0f64; kmax];
        for (k, c) in hat.iter().enumerate() {
            let r2: f64 = lat.multi_index(k).iter().map(|&i| (lat.wavenumber(i) as f64).powi(2)).sum();
            let bin = r2.sqrt().round() as usize;
            if bin < kmax {
                env[bin] = env[bin].max(c.norm());
            }
        }
        let top = env.iter().cloned().fold(0.0, f64::max);
        if top == 0.0 {
            return Err(Error::DegenerateFit("windowed field vanishes".into()));
        }
        let radii = (0..kmax).map(|r| r as f64).collect();
        let amplitudes = env.iter().map(|v| v / top).collect();
        Ok(Self { radii, amplitudes })
    }

    /// Bins with positive radius above the roundoff floor, up to the first one below it.
    pub fn usable(&self) -> (Vec<f64>, Vec<f64>) {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (&r, &a) in self.radii.iter().zip(&self.amplitudes).skip(1) {
            if a <= USABLE_FLOOR {
                break;
            }
            xs.push(r);
            ys.push(a);
        }
        (xs, ys)
    }
}

/// Fits `|c_k| ~ C exp(-rho |k|)` to the windowed spectrum of `u` on `region`;
/// the fitted `rate` is `rho` in units of the integer wavenumber.
pub fn tangential_coefficient_decay(u: &GridField, region: &RegionMask) -> Result<DecayFit> {
    let spectrum = DecaySpectrum::of(u, region, 0.15)?;
    let (xs, ys) = spectrum.usable();
    if xs.len() < 8 {
        return Err(Error::DegenerateFit(format!("only {} usable spectral bins", xs.len())));
    }
    fit_decay_at(&xs, &ys, DecayModel::FixedExponent { mu: 1.0 }, 8)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{LatticeSpec, RegionLabel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (LatticeSpec, RegionMask) {
        let lat = LatticeSpec::new(2, 4.0, 48).unwrap();
        let r = RegionMask::rect(&lat, &[-0.5, -0.5], &[0.5, 0.5], RegionLabel::OmegaPrime).unwrap();
        (lat, r)
    }

    #[test]
    fn gaussian_sample_decays_exponentially() {
        let (lat, r) = setup();
        let u = GridField::from_fn(&lat, |x| (-3.0 * (x[0] * x[0] + x[1] * x[1])).exp());
        let fit = tangential_coefficient_decay(&u, &r).unwrap();
        assert!(fit.rate.unwrap() > 0.0);
        assert!(fit.residual < 0.2, "residual {}", fit.residual);
    }

    #[test]
    fn white_noise_shows_no_decay() {
        let (lat, r) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = GridField::new(&lat, (0..lat.num_nodes()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        match tangential_coefficient_decay(&u, &r) {
            Err(Error::DegenerateFit(_)) => {}
            Ok(fit) => {
                let smooth = GridField::from_fn(&lat, |x| (-3.0 * (x[0] * x[0] + x[1] * x[1])).exp());
                let reference = tangential_coefficient_decay(&smooth, &r).unwrap();
                assert!(fit.rate.unwrap() < 0.25 * reference.rate.unwrap(), "noise rate {:?}", fit.rate);
            }
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn too_few_bins_is_degenerate() {
        let lat = LatticeSpec::new(2, 4.0, 12).unwrap();
        let r = RegionMask::rect(&lat, &[-1.0, -1.0], &[1.0, 1.0], RegionLabel::OmegaPrime).unwrap();
        let u = GridField::constant(&lat, 1.0);
        assert!(matches!(tangential_coefficient_decay(&u, &r), Err(Error::DegenerateFit(_))));
    }
}
