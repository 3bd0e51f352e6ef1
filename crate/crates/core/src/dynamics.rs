//! Continuous-time open-system evolution: Lindblad integration, jump/no-jump
//! trajectory unraveling, and amplitude damping of a truncated oscillator.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;
use crate::state::{
    check_dim, CMatrix, DensityMatrix, Operator, PureBipartiteState, StateVector, C64, NORM_TOL,
};

/// Upper bound on `rate · dim · dt` for integration and trajectory steps.
pub const STEP_BOUND: f64 = 1e-2;

/// How the damping rate `γ` maps onto the evolution.
///
/// `AmplitudeDecay` is `ρ̇ = 2γ aρa† − γ{a†a, ρ}`: the no-jump amplitude of
/// level `n` decays as `e^{−nγt}`. `PopulationDecay` halves the rate so that
/// the no-jump population of level `n` decays as `e^{−nγt}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum DampingConvention {
    #[default]
    AmplitudeDecay,
    PopulationDecay,
}

impl DampingConvention {
    /// Rate multiplying the Lindblad dissipator for operator `a`.
    pub fn lindblad_rate(self, gamma: f64) -> f64 {
        match self {
            DampingConvention::AmplitudeDecay => 2.0 * gamma,
            DampingConvention::PopulationDecay => gamma,
        }
    }

    /// Exponent `κ` such that the no-jump amplitude of level `n` is scaled by
    /// `e^{−κ n γ t}`.
    pub fn amplitude_exponent(self) -> f64 {
        match self {
            DampingConvention::AmplitudeDecay => 1.0,
            DampingConvention::PopulationDecay => 0.5,
        }
    }

    /// No-jump amplitude factor of `level` after dimensionless time `gamma_t`.
    pub fn level_factor(self, level: usize, gamma_t: f64) -> f64 {
        (-self.amplitude_exponent() * level as f64 * gamma_t).exp()
    }
}

/// Hamiltonian (already divided by ħ) plus weighted Lindblad operators.
#[derive(Debug, Clone, PartialEq)]
pub struct LindbladModel {
    hamiltonian: Operator,
    lindblad_ops: Vec<(Operator, f64)>,
}

impl LindbladModel {
    pub fn new(hamiltonian: Operator, lindblad_ops: Vec<(Operator, f64)>) -> Result<Self> {
        let dim = hamiltonian.dim();
        for (op, rate) in &lindblad_ops {
            check_dim(dim, op.dim())?;
            if !rate.is_finite() || *rate < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "Lindblad rate {rate} must be >= 0"
                )));
            }
        }
        Ok(LindbladModel {
            hamiltonian,
            lindblad_ops,
        })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.hamiltonian
    }

    pub fn lindblad_ops(&self) -> &[(Operator, f64)] {
        &self.lindblad_ops
    }

    pub fn max_rate(&self) -> f64 {
        self.lindblad_ops.iter().map(|(_, r)| *r).fold(0.0, f64::max)
    }

    fn check_step(&self, dt: f64) -> Result<()> {
        let value = self.max_rate() * self.dim() as f64 * dt;
        if value > STEP_BOUND {
            return Err(Error::StepTooLarge {
                value,
                bound: STEP_BOUND,
            });
        }
        Ok(())
    }

    fn rhs_matrix(&self, rho: &CMatrix) -> CMatrix {
        let h = self.hamiltonian.matrix();
        let i = C64::new(0.0, 1.0);
        let mut out = (h * rho - rho * h) * (-i);
        for (a, rate) in &self.lindblad_ops {
            if *rate == 0.0 {
                continue;
            }
            let a = a.matrix();
            let ad = a.adjoint();
            let ada = &ad * a;
            let term = a * rho * &ad - (&ada * rho + rho * &ada) * C64::new(0.5, 0.0);
            out += term * C64::new(*rate, 0.0);
        }
        out
    }
}

/// Truncated cavity mode losing photons at rate `γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampingModel {
    dim: usize,
    gamma: f64,
    convention: DampingConvention,
}

impl DampingModel {
    pub fn new(dim: usize, gamma: f64) -> Result<Self> {
        Self::with_convention(dim, gamma, DampingConvention::default())
    }

    pub fn with_convention(dim: usize, gamma: f64, convention: DampingConvention) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDimension(format!(
                "damping needs dim >= 2, got {dim}"
            )));
        }
        if !gamma.is_finite() || gamma < 0.0 {
            return Err(Error::InvalidParameter(format!("gamma {gamma} must be >= 0")));
        }
        Ok(DampingModel {
            dim,
            gamma,
            convention,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn convention(&self) -> DampingConvention {
        self.convention
    }

    /// Dissipator rate in front of `aρa†`.
    pub fn jump_rate(&self) -> f64 {
        self.convention.lindblad_rate(self.gamma)
    }

    pub fn to_lindblad(&self) -> LindbladModel {
        let a = annihilation(self.dim).expect("dim >= 2 checked at construction");
        LindbladModel {
            hamiltonian: Operator::new(CMatrix::zeros(self.dim, self.dim)).expect("zero matrix"),
            lindblad_ops: vec![(a, self.jump_rate())],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryConfig {
    pub n_trajectories: usize,
    pub dt: f64,
    pub seed: u64,
}

impl TrajectoryConfig {
    pub fn new(n_trajectories: usize, dt: f64, seed: u64) -> Result<Self> {
        if n_trajectories == 0 {
            return Err(Error::InvalidParameter("n_trajectories must be positive".into()));
        }
        if !dt.is_finite() || dt <= 0.0 {
            return Err(Error::InvalidParameter(format!("dt {dt} must be > 0")));
        }
        Ok(TrajectoryConfig {
            n_trajectories,
            dt,
            seed,
        })
    }

    /// Largest `dt` allowed for `model`.
    pub fn max_dt(model: &DampingModel) -> f64 {
        STEP_BOUND / (model.jump_rate() * model.dim() as f64)
    }

    pub fn validate_for(&self, model: &DampingModel) -> Result<()> {
        let value = model.jump_rate() * model.dim() as f64 * self.dt;
        if value > STEP_BOUND {
            return Err(Error::StepTooLarge {
                value,
                bound: STEP_BOUND,
            });
        }
        Ok(())
    }
}

/// Truncated annihilation operator, `a|n> = √n |n−1>`.
pub fn annihilation(dim: usize) -> Result<Operator> {
    if dim < 2 {
        return Err(Error::InvalidDimension(format!(
            "annihilation needs dim >= 2, got {dim}"
        )));
    }
    let m = CMatrix::from_fn(dim, dim, |r, c| {
        if c == r + 1 {
            C64::new((c as f64).sqrt(), 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    Operator::new(m)
}

/// `ρ̇ = −i[H, ρ] + Σ γ_j (A_j ρ A_j† − ½{A_j†A_j, ρ})`.
pub fn lindblad_rhs(model: &LindbladModel, rho: &DensityMatrix) -> Result<Operator> {
    check_dim(model.dim(), rho.dim())?;
    Operator::new(model.rhs_matrix(rho.matrix()))
}

/// Fixed-step fourth-order Runge–Kutta integration of the master equation up
/// to time `t`, using the largest step `≤ dt` that divides `t` evenly.
pub fn integrate_master(
    model: &LindbladModel,
    rho0: &DensityMatrix,
    t: f64,
    dt: f64,
) -> Result<DensityMatrix> {
    check_dim(model.dim(), rho0.dim())?;
    if !t.is_finite() || t < 0.0 {
        return Err(Error::InvalidParameter(format!("t {t} must be >= 0")));
    }
    if !dt.is_finite() || dt <= 0.0 {
        return Err(Error::InvalidParameter(format!("dt {dt} must be > 0")));
    }
    model.check_step(dt)?;
    if t == 0.0 {
        return Ok(rho0.clone());
    }
    let steps = (t / dt).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let half = C64::new(0.5 * h, 0.0);
    let full = C64::new(h, 0.0);
    let sixth = C64::new(h / 6.0, 0.0);
    let two = C64::new(2.0, 0.0);
    let mut rho = rho0.matrix().clone();
    for _ in 0..steps {
        let k1 = model.rhs_matrix(&rho);
        let k2 = model.rhs_matrix(&(&rho + &k1 * half));
        let k3 = model.rhs_matrix(&(&rho + &k2 * half));
        let k4 = model.rhs_matrix(&(&rho + &k3 * full));
        rho += (k1 + k2 * two + k3 * two + k4) * sixth;
    }
    DensityMatrix::new(rho).map_err(|e| match e {
        Error::InvalidDensityMatrix(msg) => {
            Error::InvalidDensityMatrix(format!("{msg} after integration; dt may be too large"))
        }
        other => other,
    })
}

fn check_normalized(psi: &StateVector) -> Result<()> {
    let n2 = psi.norm_squared();
    if (n2 - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized(n2));
    }
    Ok(())
}

/// Conditional evolution over `dt` given that no photon was lost. Returns the
/// renormalized state and the squared norm before renormalization.
pub fn no_jump_step(model: &DampingModel, psi: &StateVector, dt: f64) -> Result<(StateVector, f64)> {
    check_dim(model.dim, psi.len())?;
    check_normalized(psi)?;
    let gamma_t = model.gamma * dt;
    let mut out = psi.clone();
    for (n, z) in out.iter_mut().enumerate() {
        *z *= model.convention.level_factor(n, gamma_t);
    }
    let survival = out.norm_squared();
    if survival == 0.0 || !survival.is_finite() {
        return Err(Error::ZeroNorm);
    }
    out /= C64::new(survival.sqrt(), 0.0);
    Ok((out, survival))
}

/// State after a detected photon loss, `a|ψ>` renormalized.
pub fn jump_step(model: &DampingModel, psi: &StateVector) -> Result<StateVector> {
    check_dim(model.dim, psi.len())?;
    let mut out = StateVector::zeros(model.dim);
    for n in 1..model.dim {
        out[n - 1] = psi[n] * (n as f64).sqrt();
    }
    let norm = out.norm();
    if norm == 0.0 {
        return Err(Error::GroundState);
    }
    out /= C64::new(norm, 0.0);
    Ok(out)
}

fn mean_excitation(psi: &[C64]) -> f64 {
    psi.iter().enumerate().map(|(n, z)| n as f64 * z.norm_sqr()).sum()
}

/// Ensemble average of jump/no-jump unravelings. Trajectory `k` draws from
/// stream `k` of `cfg.seed`; the average is summed in trajectory order.
pub fn run_trajectories(
    model: &DampingModel,
    psi0: &StateVector,
    t: f64,
    cfg: &TrajectoryConfig,
) -> Result<DensityMatrix> {
    check_dim(model.dim, psi0.len())?;
    check_normalized(psi0)?;
    if !t.is_finite() || t < 0.0 {
        return Err(Error::InvalidParameter(format!("t {t} must be >= 0")));
    }
    let start = DensityMatrix::from_pure(psi0)?;
    if model.gamma == 0.0 || t == 0.0 {
        return Ok(start);
    }
    cfg.validate_for(model)?;
    let steps = (t / cfg.dt).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let rate = model.jump_rate();
    let decay: Vec<f64> = (0..model.dim)
        .map(|n| model.convention.level_factor(n, model.gamma * h))
        .collect();

    let dim = model.dim;
    let mut acc = CMatrix::zeros(dim, dim);
    let mut psi = vec![C64::new(0.0, 0.0); dim];
    for k in 0..cfg.n_trajectories {
        let mut rng = rng::stream(cfg.seed, k as u64);
        psi.copy_from_slice(psi0.as_slice());
        for _ in 0..steps {
            let jump_prob = h * rate * mean_excitation(&psi);
            let u: f64 = rng.gen();
            if u < jump_prob {
                for n in 1..dim {
                    psi[n - 1] = psi[n] * (n as f64).sqrt();
                }
                psi[dim - 1] = C64::new(0.0, 0.0);
            } else {
                for (z, f) in psi.iter_mut().zip(&decay) {
                    *z *= *f;
                }
            }
            let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            for z in psi.iter_mut() {
                *z /= norm;
            }
        }
        for r in 0..dim {
            for c in 0..dim {
                acc[(r, c)] += psi[r] * psi[c].conj();
            }
        }
    }
    acc /= C64::new(cfg.n_trajectories as f64, 0.0);
    DensityMatrix::new(acc)
}

/// Whether `psi` is square with support only on `|l>_s |d−1−l>_i`.
pub fn is_anti_correlated(psi: &PureBipartiteState, tol: f64) -> bool {
    let (ds, di) = psi.dims();
    ds == di && (0..ds).all(|l| (0..di).all(|m| l + m == ds - 1 || psi.amplitude(l, m).norm() <= tol))
}

/// No-jump evolution of a Schmidt-form pair state under `H_eff ⊗ I`: the
/// amplitude on `|l>_s |d−1−l>_i` is scaled by the level-`l` decay factor and
/// the result renormalized.
pub fn no_jump_conditional_state(
    psi0: &PureBipartiteState,
    gamma_t: f64,
    convention: DampingConvention,
) -> Result<PureBipartiteState> {
    if !gamma_t.is_finite() || gamma_t < 0.0 {
        return Err(Error::InvalidParameter(format!("gamma_t {gamma_t} must be >= 0")));
    }
    if !is_anti_correlated(psi0, 1e-12) {
        return Err(Error::NotAntiCorrelated);
    }
    let mut amps = psi0.amplitudes().clone();
    for l in 0..psi0.dim_s() {
        let f = convention.level_factor(l, gamma_t);
        for m in 0..psi0.dim_i() {
            amps[(l, m)] *= f;
        }
    }
    PureBipartiteState::normalized(amps)
}
