//! Model of the two-photon slit experiment: partially entangled state
//! preparation, the Sagnac amplitude filter, coincidence counting and state
//! estimation from count tables.
//!
//! Slit labels `ℓ ∈ {−ℓ_d, …, ℓ_d}` map to levels `l = ℓ + ℓ_d`, so the
//! anti-correlated pair `|ℓ>_s |−ℓ>_i` is the level pair `(l, d−1−l)`.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};

use crate::dynamics::DampingConvention;
use crate::error::{Error, Result};
use crate::rng;
use crate::state::{CMatrix, DensityMatrix, PureBipartiteState, C64};

/// Coincidence counts transcribed from the qutrit damping measurement, one
/// block per evolution time.
pub const TABLE2_COUNTS: &str = include_str!("../data/table2_counts.txt");

/// Default number of bootstrap resamples for concurrence uncertainties.
pub const BOOTSTRAP_RESAMPLES: usize = 2000;

/// Per-slit transmission amplitudes imposed on the pair source.
#[derive(Debug, Clone, PartialEq)]
pub struct SlitStatePrep {
    amplitudes: Vec<f64>,
}

impl SlitStatePrep {
    pub fn new(amplitudes: Vec<f64>) -> Result<Self> {
        if amplitudes.len() < 2 {
            return Err(Error::InvalidDimension(format!(
                "need at least 2 slits, got {}",
                amplitudes.len()
            )));
        }
        if let Some(a) = amplitudes.iter().find(|a| !a.is_finite() || **a < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "slit amplitude {a} must be >= 0"
            )));
        }
        let norm = amplitudes.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroNorm);
        }
        Ok(SlitStatePrep {
            amplitudes: amplitudes.iter().map(|a| a / norm).collect(),
        })
    }

    pub fn uniform(d: usize) -> Result<Self> {
        SlitStatePrep::new(vec![1.0; d])
    }

    pub fn d(&self) -> usize {
        self.amplitudes.len()
    }

    /// Normalized amplitudes, `Σ a² = 1`.
    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }
}

/// `Σ_l a_l |l>_s |d−1−l>_i`.
pub fn prepare_state(prep: &SlitStatePrep) -> PureBipartiteState {
    let d = prep.d();
    let amps = CMatrix::from_fn(d, d, |l, m| {
        if l + m == d - 1 {
            C64::new(prep.amplitudes[l], 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    PureBipartiteState::normalized(amps).expect("normalized prep amplitudes")
}

/// Keeps only the anti-correlated amplitudes of a square state and
/// renormalizes, giving the Schmidt-form state closest to a measured one.
pub fn anti_correlated_part(psi: &PureBipartiteState) -> Result<PureBipartiteState> {
    let (ds, di) = psi.dims();
    if ds != di {
        return Err(Error::DimensionMismatch {
            expected: ds,
            found: di,
        });
    }
    let amps = CMatrix::from_fn(ds, di, |l, m| {
        if l + m == ds - 1 {
            psi.amplitude(l, m)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    PureBipartiteState::normalized(amps)
}

/// Slit-space density `ρ0(l, m) = a_l a_m*` of a Schmidt-form pair state,
/// with `a_l` the amplitude on `|l>_s |d−1−l>_i`.
pub fn pair_density(psi: &PureBipartiteState) -> Result<DensityMatrix> {
    let (ds, di) = psi.dims();
    if ds != di {
        return Err(Error::DimensionMismatch {
            expected: ds,
            found: di,
        });
    }
    let a: Vec<C64> = (0..ds).map(|l| psi.amplitude(l, ds - 1 - l)).collect();
    let norm: f64 = a.iter().map(|z| z.norm_sqr()).sum();
    if norm <= 0.0 {
        return Err(Error::ZeroNorm);
    }
    DensityMatrix::new(CMatrix::from_fn(ds, ds, |l, m| a[l] * a[m].conj() / norm))
}

/// Per-level settings of the Sagnac filter for one evolution time.
#[derive(Debug, Clone, PartialEq)]
pub struct SagnacSchedule {
    gamma_t: f64,
    transmissions: [f64; 3],
    phases: [f64; 3],
}

impl SagnacSchedule {
    pub fn gamma_t(&self) -> f64 {
        self.gamma_t
    }

    /// Amplitude transmission `t_ℓ = sin(φ_ℓ/2)` per signal level.
    pub fn transmissions(&self) -> [f64; 3] {
        self.transmissions
    }

    /// SLM phase difference `φ_ℓ ∈ [0, π]` per signal level.
    pub fn phases(&self) -> [f64; 3] {
        self.phases
    }
}

/// Filter settings realizing the no-jump map at `gamma_t`: level `ℓ` is
/// transmitted with the convention's decay factor and the SLM phase is
/// `2·arcsin(t_ℓ)`.
pub fn sagnac_schedule(gamma_t: f64, convention: DampingConvention) -> Result<SagnacSchedule> {
    if !gamma_t.is_finite() || gamma_t < 0.0 {
        return Err(Error::InvalidParameter(format!("gamma_t {gamma_t} must be >= 0")));
    }
    let transmissions: [f64; 3] = std::array::from_fn(|l| convention.level_factor(l, gamma_t));
    let phases = transmissions.map(|t| 2.0 * t.asin());
    Ok(SagnacSchedule {
        gamma_t,
        transmissions,
        phases,
    })
}

/// Passes the signal photon through the filter. Returns the post-selected
/// state and the probability that the pair survives.
pub fn apply_sagnac(psi: &PureBipartiteState, sched: &SagnacSchedule) -> Result<(PureBipartiteState, f64)> {
    if psi.dim_s() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            found: psi.dim_s(),
        });
    }
    let mut amps = psi.amplitudes().clone();
    for (l, t) in sched.transmissions.iter().enumerate() {
        for m in 0..psi.dim_i() {
            amps[(l, m)] *= *t;
        }
    }
    let success = amps.norm_squared();
    if success == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok((PureBipartiteState::normalized(amps)?, success))
}

/// Coincidences for the nine slit-image detector pairs `(l_s, m_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountsTable {
    pub gamma_t: f64,
    counts: [[u64; 3]; 3],
    pub metadata: Option<String>,
}

impl CountsTable {
    pub fn new(gamma_t: f64, counts: [[u64; 3]; 3]) -> Result<Self> {
        if !gamma_t.is_finite() {
            return Err(Error::InvalidParameter("gamma_t must be finite".into()));
        }
        if counts.iter().flatten().all(|&n| n == 0) {
            return Err(Error::InvalidParameter(
                "counts table has no positive entry".into(),
            ));
        }
        Ok(CountsTable {
            gamma_t,
            counts,
            metadata: None,
        })
    }

    pub fn with_metadata(mut self, metadata: impl Into<String>) -> Self {
        self.metadata = Some(metadata.into());
        self
    }

    pub fn counts(&self) -> &[[u64; 3]; 3] {
        &self.counts
    }

    pub fn get(&self, l: usize, m: usize) -> u64 {
        self.counts[l][m]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Every count multiplied by `factor`.
    pub fn scaled(&self, factor: u64) -> Result<CountsTable> {
        let mut counts = self.counts;
        for n in counts.iter_mut().flatten() {
            *n = n
                .checked_mul(factor)
                .ok_or_else(|| Error::InvalidParameter("scaled count overflows".into()))?;
        }
        CountsTable::new(self.gamma_t, counts).map(|t| CountsTable {
            metadata: self.metadata.clone(),
            ..t
        })
    }
}

/// Multinomial sample of `total_pairs` detections over `|c[l][m]|²`.
pub fn simulate_counts(psi: &PureBipartiteState, total_pairs: u64, seed: u64) -> Result<CountsTable> {
    if psi.dims() != (3, 3) {
        return Err(Error::DimensionMismatch {
            expected: 3,
            found: psi.dim_s().max(psi.dim_i()),
        });
    }
    if total_pairs == 0 {
        return Err(Error::InvalidParameter("total_pairs must be positive".into()));
    }
    let mut rng = rng::stream(seed, 0);
    let probs: Vec<f64> = (0..9).map(|k| psi.amplitude(k / 3, k % 3).norm_sqr()).collect();
    let mut counts = [[0u64; 3]; 3];
    let mut remaining = total_pairs;
    let mut mass_left = 1.0;
    for (k, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        let n = if k == 8 || (p > 0.0 && mass_left <= p) {
            remaining
        } else {
            let q = (p / mass_left).clamp(0.0, 1.0);
            Binomial::new(remaining, q).expect("q in [0, 1]").sample(&mut rng)
        };
        counts[k / 3][k % 3] = n;
        remaining -= n;
        mass_left -= p;
    }
    CountsTable::new(0.0, counts)
}

/// Real, non-negative amplitudes `√(N_lm / ΣN)`; phases are not measured.
pub fn reconstruct_state(table: &CountsTable) -> PureBipartiteState {
    reconstruct_from_counts(&table.counts.map(|r| r.map(|n| n as f64)))
        .expect("validated table has a positive entry")
}

fn reconstruct_from_counts(counts: &[[f64; 3]; 3]) -> Result<PureBipartiteState> {
    let total: f64 = counts.iter().flatten().sum();
    if total <= 0.0 {
        return Err(Error::ZeroNorm);
    }
    let amps = CMatrix::from_fn(3, 3, |l, m| C64::new((counts[l][m] / total).sqrt(), 0.0));
    PureBipartiteState::normalized(amps)
}

/// Level populations of each photon estimated from a counts table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Populations {
    pub signal: [f64; 3],
    pub idler: [f64; 3],
}

pub fn populations(table: &CountsTable) -> Populations {
    let total = table.total() as f64;
    let signal = std::array::from_fn(|l| table.counts[l].iter().sum::<u64>() as f64 / total);
    let idler = std::array::from_fn(|m| (0..3).map(|l| table.counts[l][m]).sum::<u64>() as f64 / total);
    Populations { signal, idler }
}

/// Parametric-bootstrap standard deviation of the reconstructed concurrence:
/// each count is resampled as Poisson with its observed value as mean.
/// Resample `k` uses stream `k` of `seed`.
pub fn concurrence_uncertainty(table: &CountsTable, resamples: usize, seed: u64) -> Result<f64> {
    if resamples < 2 {
        return Err(Error::InvalidParameter(
            "need at least 2 bootstrap resamples".into(),
        ));
    }
    let mut values = Vec::with_capacity(resamples);
    for k in 0..resamples {
        let mut rng = rng::stream(seed, k as u64);
        let counts: [[f64; 3]; 3] = table
            .counts
            .map(|row| row.map(|n| if n == 0 { 0.0 } else { poisson(&mut rng, n as f64) }));
        if let Ok(psi) = reconstruct_from_counts(&counts) {
            values.push(psi.i_concurrence()?);
        }
    }
    if values.len() < 2 {
        return Err(Error::Degenerate("too few non-empty bootstrap resamples".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(var.sqrt())
}

fn poisson(rng: &mut impl Rng, mean: f64) -> f64 {
    Poisson::new(mean).expect("positive mean").sample(rng)
}
