//! Two-photon conditional interference behind a multi-slit aperture, synthetic
//! detector scans, and least-squares estimation of the dephasing parameter.
//!
//! All lengths are in millimetres.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::rng;
use crate::state::{DensityMatrix, Subsystem};

/// Unnormalized `sin(x)/x` with `sinc(0) = 1`.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Slit, lens and detector constants of the detection arms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalGeometry {
    pub wavelength: f64,
    /// Half the slit width, `a`.
    pub half_slit_width: f64,
    /// Centre-to-centre slit separation, `d`.
    pub slit_separation: f64,
    pub focal_length: f64,
    /// Half the detector width, `b`.
    pub half_detector_width: f64,
    /// Magnification of the signal arm relative to the idler arm.
    pub beta: f64,
}

impl Default for OpticalGeometry {
    fn default() -> Self {
        OpticalGeometry {
            wavelength: 710e-6,
            half_slit_width: 0.05,
            slit_separation: 0.25,
            focal_length: 200.0,
            half_detector_width: 0.05,
            beta: 0.62,
        }
    }
}

impl OpticalGeometry {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("wavelength", self.wavelength),
            ("half_slit_width", self.half_slit_width),
            ("slit_separation", self.slit_separation),
            ("focal_length", self.focal_length),
            ("half_detector_width", self.half_detector_width),
            ("beta", self.beta),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        if 2.0 * self.half_slit_width >= self.slit_separation {
            return Err(Error::InvalidParameter(
                "slit width must be smaller than the slit separation".into(),
            ));
        }
        Ok(())
    }

    pub fn wave_number(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    /// Phase per unit length of the first fringe order in the idler plane.
    fn idler_frequency(&self) -> f64 {
        self.wave_number() * self.slit_separation / self.focal_length
    }

    fn signal_frequency(&self) -> f64 {
        self.idler_frequency() / self.beta
    }

    /// Single-slit diffraction envelope `sinc²(kax_i/f)·sinc²(kax_s/(fβ))`.
    pub fn envelope(&self, x_i: f64, x_s: f64) -> f64 {
        let ka = self.wave_number() * self.half_slit_width / self.focal_length;
        sinc(ka * x_i).powi(2) * sinc(ka * x_s / self.beta).powi(2)
    }

    /// Fringe phase of first order at detector positions `(x_i, x_s)`.
    pub fn fringe_phase(&self, x_i: f64, x_s: f64) -> f64 {
        self.idler_frequency() * x_i - self.signal_frequency() * x_s
    }

    /// Fringe period when scanning the detector of `arm`.
    pub fn fringe_period(&self, arm: Subsystem) -> f64 {
        match arm {
            Subsystem::Idler => 2.0 * PI / self.idler_frequency(),
            Subsystem::Signal => 2.0 * PI / self.signal_frequency(),
        }
    }
}

/// Signal position that shifts the conditional fringes by half a period,
/// `k d x_π / (f β) = π`.
pub fn x_pi(geom: &OpticalGeometry) -> f64 {
    PI * geom.focal_length * geom.beta / (geom.wave_number() * geom.slit_separation)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct FringeTerm {
    order: f64,
    magnitude: f64,
    phase: f64,
    detector_factor: f64,
}

/// Conditional coincidence pattern for a fixed anti-correlated pair state,
/// factored as `A · envelope · [1 + (1 − p) · fringe]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalPattern {
    geom: OpticalGeometry,
    terms: Vec<FringeTerm>,
}

impl ConditionalPattern {
    /// `rho0[(l, m)]` is the pair-state element `<ℓ,−ℓ|ρ|m,−m>` with slit
    /// labels ordered by level.
    pub fn new(geom: &OpticalGeometry, rho0: &DensityMatrix) -> Result<Self> {
        geom.validate()?;
        let k = geom.wave_number();
        let kd = k * geom.slit_separation;
        let idler_b = kd * geom.half_detector_width / geom.focal_length;
        let signal_b = idler_b / geom.beta;
        let d = rho0.dim();
        let mut terms = Vec::new();
        for l in 0..d {
            for m in 0..l {
                let z = rho0.get(l, m);
                let order = (l - m) as f64;
                terms.push(FringeTerm {
                    order,
                    magnitude: z.norm(),
                    phase: z.arg(),
                    detector_factor: sinc(order * idler_b) * sinc(order * signal_b),
                });
            }
        }
        Ok(ConditionalPattern { geom: *geom, terms })
    }

    pub fn geometry(&self) -> &OpticalGeometry {
        &self.geom
    }

    pub fn envelope(&self, x_i: f64, x_s: f64) -> f64 {
        self.geom.envelope(x_i, x_s)
    }

    /// Pair-interference sum multiplying `(1 − p)`.
    pub fn fringe(&self, x_i: f64, x_s: f64) -> f64 {
        let theta = self.geom.fringe_phase(x_i, x_s);
        self.terms
            .iter()
            .map(|t| t.magnitude * t.detector_factor * (t.order * theta + t.phase).cos())
            .sum()
    }

    /// Unclamped `A · envelope · [1 + (1 − p) · fringe]`.
    pub fn raw_intensity(&self, p: f64, x_i: f64, x_s: f64, scale: f64) -> f64 {
        scale * self.envelope(x_i, x_s) * (1.0 + (1.0 - p) * self.fringe(x_i, x_s))
    }

    /// Intensity clamped at zero; a negative bracket is logged.
    pub fn intensity(&self, p: f64, x_i: f64, x_s: f64, scale: f64) -> f64 {
        let v = self.raw_intensity(p, x_i, x_s, scale);
        if v < 0.0 {
            log::warn!("pattern intensity {v:e} clamped to 0 at x_i={x_i}, x_s={x_s}");
            0.0
        } else {
            v
        }
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("p = {p} outside [0, 1]")));
    }
    Ok(())
}

/// Coincidence rate at detector positions `(x_i, x_s)` for pair state `rho0`
/// after dephasing with parameter `p`.
pub fn pattern_intensity(
    geom: &OpticalGeometry,
    rho0: &DensityMatrix,
    p: f64,
    x_i: f64,
    x_s: f64,
    scale: f64,
) -> Result<f64> {
    check_p(p)?;
    Ok(ConditionalPattern::new(geom, rho0)?.intensity(p, x_i, x_s, scale))
}

/// Coincidences recorded while one detector scans and the other is fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternScan {
    pub fixed_arm: Subsystem,
    pub fixed_position: f64,
    /// `(position of the scanned detector, counts)`.
    pub samples: Vec<(f64, f64)>,
    pub p_true: Option<f64>,
}

impl PatternScan {
    pub fn scanned_arm(&self) -> Subsystem {
        match self.fixed_arm {
            Subsystem::Signal => Subsystem::Idler,
            Subsystem::Idler => Subsystem::Signal,
        }
    }

    /// `(x_i, x_s)` of sample `k`.
    pub fn coordinates(&self, k: usize) -> (f64, f64) {
        let x = self.samples[k].0;
        match self.fixed_arm {
            Subsystem::Signal => (x, self.fixed_position),
            Subsystem::Idler => (self.fixed_position, x),
        }
    }

    pub fn validate(&self, geom: &OpticalGeometry) -> Result<()> {
        if self.samples.len() < 8 {
            return Err(Error::InvalidParameter(format!(
                "scan needs at least 8 samples, got {}",
                self.samples.len()
            )));
        }
        if self
            .samples
            .iter()
            .any(|(x, n)| !x.is_finite() || !n.is_finite() || *n < 0.0)
        {
            return Err(Error::InvalidParameter(
                "scan has non-finite or negative entries".into(),
            ));
        }
        let (lo, hi) = self
            .samples
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (x, _)| {
                (lo.min(*x), hi.max(*x))
            });
        let period = geom.fringe_period(self.scanned_arm());
        if hi - lo < period {
            return Err(Error::InvalidParameter(format!(
                "scan spans {:.4} mm, less than one fringe period {:.4} mm",
                hi - lo,
                period
            )));
        }
        Ok(())
    }
}

/// Counting statistics for synthetic scans.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScanNoise {
    /// Exact expected counts.
    Noiseless { peak_counts: f64 },
    /// Independent Poisson draws around the expected counts.
    Poisson { peak_counts: f64 },
}

impl ScanNoise {
    fn peak_counts(self) -> f64 {
        match self {
            ScanNoise::Noiseless { peak_counts } | ScanNoise::Poisson { peak_counts } => peak_counts,
        }
    }
}

/// Default scanned positions: 41 points over ±1 mm.
pub fn default_scan_positions() -> Vec<f64> {
    (0..41).map(|k| -1.0 + 0.05 * k as f64).collect()
}

/// Synthetic scan whose brightest sample has mean `peak_counts`.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_scan(
    geom: &OpticalGeometry,
    rho0: &DensityMatrix,
    p: f64,
    fixed_arm: Subsystem,
    fixed_position: f64,
    positions: &[f64],
    noise: ScanNoise,
    seed: u64,
) -> Result<PatternScan> {
    check_p(p)?;
    let peak = noise.peak_counts();
    if !peak.is_finite() || peak <= 0.0 {
        return Err(Error::InvalidParameter(format!("peak counts {peak} must be > 0")));
    }
    let pattern = ConditionalPattern::new(geom, rho0)?;
    let mut scan = PatternScan {
        fixed_arm,
        fixed_position,
        samples: Vec::new(),
        p_true: Some(p),
    };
    let ideal: Vec<f64> = positions
        .iter()
        .map(|&x| {
            let (x_i, x_s) = match fixed_arm {
                Subsystem::Signal => (x, fixed_position),
                Subsystem::Idler => (fixed_position, x),
            };
            pattern.intensity(p, x_i, x_s, 1.0)
        })
        .collect();
    let max = ideal.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return Err(Error::Degenerate(
            "pattern vanishes at every scanned position".into(),
        ));
    }
    let mut rng = rng::stream(seed, 0);
    for (&x, &v) in positions.iter().zip(&ideal) {
        let mean = peak * v / max;
        let counts = match noise {
            ScanNoise::Noiseless { .. } => mean,
            ScanNoise::Poisson { .. } if mean > 0.0 => {
                Poisson::new(mean).expect("positive mean").sample(&mut rng)
            }
            ScanNoise::Poisson { .. } => 0.0,
        };
        scan.samples.push((x, counts));
    }
    Ok(scan)
}

/// Result of fitting `p` and the scale `A` to one scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PFit {
    pub p: f64,
    pub sigma_p: f64,
    pub scale: f64,
}

/// Least-squares estimate of `p` and `A` with geometry and `rho0` fixed.
///
/// The model `A·e·(1 + (1 − p)·f)` is linear in `(A, A(1 − p))`, so the
/// unconstrained minimum is solved directly; if it falls outside `p ∈ [0, 1]`
/// the better of the two boundary fits is taken. `sigma_p` is the Gauss
/// approximation `s²·(JᵀJ)⁻¹` at the minimum with `s² = RSS/(n − 2)`.
pub fn fit_p(scan: &PatternScan, geom: &OpticalGeometry, rho0: &DensityMatrix) -> Result<PFit> {
    scan.validate(geom)?;
    let pattern = ConditionalPattern::new(geom, rho0)?;
    let n = scan.samples.len();
    let y: Vec<f64> = scan.samples.iter().map(|s| s.1).collect();
    let mut env = Vec::with_capacity(n);
    let mut fr = Vec::with_capacity(n);
    for k in 0..n {
        let (x_i, x_s) = scan.coordinates(k);
        env.push(pattern.envelope(x_i, x_s));
        fr.push(pattern.fringe(x_i, x_s));
    }
    if y.iter().all(|&v| v == 0.0) {
        return Err(Error::Degenerate("scan has no counts".into()));
    }
    let env_max = env.iter().copied().fold(0.0, f64::max);
    let fringe_max = env
        .iter()
        .zip(&fr)
        .map(|(e, f)| (e * f).abs())
        .fold(0.0, f64::max);
    if env_max <= 0.0 || fringe_max <= 1e-9 * env_max {
        return Err(Error::Degenerate(
            "scan carries no fringe information; p is unidentifiable".into(),
        ));
    }

    // Normal equations for y ≈ A·e + B·e·f.
    let u: Vec<f64> = env.clone();
    let v: Vec<f64> = env.iter().zip(&fr).map(|(e, f)| e * f).collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let gram = Matrix2::new(dot(&u, &u), dot(&u, &v), dot(&u, &v), dot(&v, &v));
    let rhs = Vector2::new(dot(&u, &y), dot(&v, &y));

    let profile = |p: f64| -> Option<(f64, f64)> {
        let g: Vec<f64> = env
            .iter()
            .zip(&fr)
            .map(|(e, f)| e * (1.0 + (1.0 - p) * f))
            .collect();
        let gg = dot(&g, &g);
        if gg <= 0.0 {
            return None;
        }
        let a = dot(&g, &y) / gg;
        let rss = g.iter().zip(&y).map(|(g, y)| (y - a * g).powi(2)).sum();
        Some((a, rss))
    };

    let interior = gram
        .try_inverse()
        .map(|inv| inv * rhs)
        .filter(|s| s[0] > 0.0)
        .map(|s| 1.0 - s[1] / s[0])
        .map(snap_to_bounds)
        .filter(|p| (0.0..=1.0).contains(p));
    let p_hat = match interior {
        Some(p) => p,
        None => {
            let at0 = profile(0.0).map(|r| r.1).unwrap_or(f64::INFINITY);
            let at1 = profile(1.0).map(|r| r.1).unwrap_or(f64::INFINITY);
            if at0 <= at1 {
                0.0
            } else {
                1.0
            }
        }
    };
    let (scale, rss) = profile(p_hat).ok_or_else(|| Error::Degenerate("zero model".into()))?;
    if scale <= 0.0 {
        return Err(Error::Degenerate(format!("fitted scale {scale} is not positive")));
    }

    let mut jtj = Matrix2::zeros();
    for k in 0..n {
        let dp = -scale * env[k] * fr[k];
        let da = env[k] * (1.0 + (1.0 - p_hat) * fr[k]);
        jtj += Matrix2::new(dp * dp, dp * da, dp * da, da * da);
    }
    let cov = jtj
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("singular curvature at the minimum".into()))?;
    let s2 = if n > 2 { rss / (n - 2) as f64 } else { 0.0 };
    let sigma_p = (s2 * cov[(0, 0)]).max(0.0).sqrt();
    Ok(PFit {
        p: p_hat,
        sigma_p,
        scale,
    })
}

/// Round-off below this distance from 0 or 1 is treated as the bound itself.
const BOUND_SNAP: f64 = 1e-12;

fn snap_to_bounds(p: f64) -> f64 {
    if p.abs() < BOUND_SNAP {
        0.0
    } else if (p - 1.0).abs() < BOUND_SNAP {
        1.0
    } else {
        p
    }
}

/// Independent fits of two scans, one per fixed signal position.
pub fn fit_p_joint(
    scan_at_0: &PatternScan,
    scan_at_xpi: &PatternScan,
    geom: &OpticalGeometry,
    rho0: &DensityMatrix,
) -> Result<(PFit, PFit)> {
    Ok((fit_p(scan_at_0, geom, rho0)?, fit_p(scan_at_xpi, geom, rho0)?))
}

/// Visibility of the fundamental fringe order: the envelope-divided counts
/// are decomposed into harmonics of the first-order fringe phase and the
/// first-harmonic amplitude is divided by the constant term.
pub fn harmonic_visibility(scan: &PatternScan, geom: &OpticalGeometry, orders: usize) -> Result<f64> {
    scan.validate(geom)?;
    geom.validate()?;
    let n = scan.samples.len();
    let cols = 1 + 2 * orders;
    if n < cols {
        return Err(Error::InvalidParameter(
            "too few samples for the harmonic model".into(),
        ));
    }
    let mut design = DMatrix::zeros(n, cols);
    let mut rhs = DVector::zeros(n);
    for k in 0..n {
        let (x_i, x_s) = scan.coordinates(k);
        let e = geom.envelope(x_i, x_s);
        if e <= 0.0 {
            return Err(Error::Degenerate("sample on an envelope zero".into()));
        }
        let theta = geom.fringe_phase(x_i, x_s);
        design[(k, 0)] = 1.0;
        for q in 1..=orders {
            design[(k, 2 * q - 1)] = (q as f64 * theta).cos();
            design[(k, 2 * q)] = (q as f64 * theta).sin();
        }
        rhs[k] = scan.samples[k].1 / e;
    }
    let coeffs = design
        .svd(true, true)
        .solve(&rhs, 1e-12)
        .map_err(|e| Error::Degenerate(e.to_string()))?;
    if coeffs[0] <= 0.0 {
        return Err(Error::Degenerate("non-positive mean level".into()));
    }
    Ok(coeffs[1].hypot(coeffs[2]) / coeffs[0])
}
