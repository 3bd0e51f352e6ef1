//! Dense operators, density matrices and pure bipartite states for small
//! qudit systems.
//!
//! Bipartite vectors are indexed as `l * dim_i + m` for the basis state
//! `|l>_s |m>_i`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type StateVector = DVector<C64>;

/// Hermiticity tolerance, entry-wise.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Unit-trace tolerance.
pub const TRACE_TOL: f64 = 1e-10;
/// Smallest eigenvalue accepted as positive semidefinite.
pub const PSD_TOL: f64 = 1e-9;
/// Normalization tolerance for pure states.
pub const NORM_TOL: f64 = 1e-10;

/// A square complex matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    m: CMatrix,
}

impl Operator {
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidDimension(format!(
                "operator must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidDimension(
                "operator dimension must be positive".into(),
            ));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Operator { m })
    }

    pub fn identity(dim: usize) -> Self {
        Operator {
            m: CMatrix::identity(dim, dim),
        }
    }

    pub fn from_diagonal(diag: &[C64]) -> Result<Self> {
        Operator::new(CMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Result<Self> {
        let d: Vec<C64> = diag.iter().map(|&x| C64::new(x, 0.0)).collect();
        Operator::from_diagonal(&d)
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn adjoint(&self) -> Operator {
        Operator { m: self.m.adjoint() }
    }

    pub fn mul(&self, other: &Operator) -> Result<Operator> {
        check_dim(self.dim(), other.dim())?;
        Ok(Operator {
            m: &self.m * &other.m,
        })
    }

    pub fn apply(&self, v: &StateVector) -> Result<StateVector> {
        check_dim(self.dim(), v.len())?;
        Ok(&self.m * v)
    }

    /// Largest entry-wise deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        max_abs_diff(&self.m, &self.m.adjoint())
    }

    pub fn trace(&self) -> C64 {
        self.m.trace()
    }
}

/// Kronecker product `a ⊗ b`.
pub fn tensor(a: &Operator, b: &Operator) -> Operator {
    Operator {
        m: a.m.kronecker(&b.m),
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

pub(crate) fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub(crate) fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Unit-trace Hermitian positive semidefinite operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    m: CMatrix,
}

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        let op = Operator::new(m)?;
        let m = op.m;
        let herm = max_abs_diff(&m, &m.adjoint());
        if herm > HERMITIAN_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "not Hermitian (max deviation {herm:e})"
            )));
        }
        let tr = m.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(Error::InvalidDensityMatrix(format!("trace is {tr}, expected 1")));
        }
        let min_ev = hermitian_eigenvalues(&m)[0];
        if min_ev < -PSD_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "negative eigenvalue {min_ev:e}"
            )));
        }
        Ok(DensityMatrix { m })
    }

    pub(crate) fn new_unchecked(m: CMatrix) -> Self {
        DensityMatrix { m }
    }

    /// Projector onto a normalized pure state.
    pub fn from_pure(psi: &StateVector) -> Result<Self> {
        if psi.is_empty() {
            return Err(Error::InvalidDimension("empty state vector".into()));
        }
        let n2 = psi.norm_squared();
        if (n2 - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(n2));
        }
        Ok(DensityMatrix {
            m: psi * psi.adjoint(),
        })
    }

    /// Maximally mixed state `I/dim`.
    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix {
            m: CMatrix::identity(dim, dim) / C64::new(dim as f64, 0.0),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.m[(row, col)]
    }

    pub fn purity(&self) -> f64 {
        purity(self)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.m)
    }

    /// `½‖ρ − σ‖₁`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        check_dim(self.dim(), other.dim())?;
        let diff = &self.m - &other.m;
        Ok(0.5 * hermitian_eigenvalues(&diff).iter().map(|x| x.abs()).sum::<f64>())
    }

    pub fn as_operator(&self) -> Operator {
        Operator { m: self.m.clone() }
    }
}

/// `Tr(ρ²)`.
pub fn purity(rho: &DensityMatrix) -> f64 {
    // Tr(ρ²) = Σ |ρ_ij|² for Hermitian ρ.
    rho.m.iter().map(|z| z.norm_sqr()).sum()
}

/// Which half of a signal/idler bipartition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Subsystem {
    Signal,
    Idler,
}

/// Reduced state of the `keep` subsystem of a bipartite density matrix with
/// local dimensions `(dim_s, dim_i)`.
pub fn partial_trace(rho: &DensityMatrix, dims: (usize, usize), keep: Subsystem) -> Result<DensityMatrix> {
    let (ds, di) = dims;
    check_dim(ds * di, rho.dim())?;
    let m = &rho.m;
    let reduced = match keep {
        Subsystem::Signal => CMatrix::from_fn(ds, ds, |l, lp| {
            (0..di).map(|k| m[(l * di + k, lp * di + k)]).sum()
        }),
        Subsystem::Idler => CMatrix::from_fn(di, di, |k, kp| {
            (0..ds).map(|l| m[(l * di + k, l * di + kp)]).sum()
        }),
    };
    DensityMatrix::new(reduced)
}

/// Pure state of a signal/idler photon pair, stored as the amplitude matrix
/// `c[l][m]` of `Σ c[l][m] |l>_s |m>_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PureBipartiteState {
    amps: CMatrix,
}

impl PureBipartiteState {
    /// Wraps an amplitude matrix that is already normalized.
    pub fn new(amps: CMatrix) -> Result<Self> {
        Self::check_shape(&amps)?;
        let n2 = amps.norm_squared();
        if (n2 - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(n2));
        }
        Ok(PureBipartiteState { amps })
    }

    /// Normalizes the amplitude matrix before wrapping it.
    pub fn normalized(amps: CMatrix) -> Result<Self> {
        Self::check_shape(&amps)?;
        let n = amps.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::ZeroNorm);
        }
        Ok(PureBipartiteState {
            amps: amps / C64::new(n, 0.0),
        })
    }

    fn check_shape(amps: &CMatrix) -> Result<()> {
        if amps.nrows() == 0 || amps.ncols() == 0 {
            return Err(Error::InvalidDimension(
                "bipartite dimensions must be positive".into(),
            ));
        }
        if amps.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(())
    }

    /// `|l>_s |m>_i`.
    pub fn basis(dim_s: usize, dim_i: usize, l: usize, m: usize) -> Result<Self> {
        if l >= dim_s {
            return Err(Error::IndexOutOfRange { index: l, len: dim_s });
        }
        if m >= dim_i {
            return Err(Error::IndexOutOfRange { index: m, len: dim_i });
        }
        let mut amps = CMatrix::zeros(dim_s, dim_i);
        amps[(l, m)] = C64::new(1.0, 0.0);
        PureBipartiteState::new(amps)
    }

    pub fn dim_s(&self) -> usize {
        self.amps.nrows()
    }

    pub fn dim_i(&self) -> usize {
        self.amps.ncols()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.dim_s(), self.dim_i())
    }

    pub fn amplitudes(&self) -> &CMatrix {
        &self.amps
    }

    pub fn amplitude(&self, l: usize, m: usize) -> C64 {
        self.amps[(l, m)]
    }

    /// Flattened state vector, index `l * dim_i + m`.
    pub fn to_vector(&self) -> StateVector {
        let (ds, di) = self.dims();
        StateVector::from_fn(ds * di, |k, _| self.amps[(k / di, k % di)])
    }

    pub fn to_density_matrix(&self) -> DensityMatrix {
        let v = self.to_vector();
        DensityMatrix::new_unchecked(&v * v.adjoint())
    }

    /// Reduced density matrix of one photon.
    pub fn reduced(&self, keep: Subsystem) -> DensityMatrix {
        let c = &self.amps;
        let m = match keep {
            Subsystem::Signal => c * c.adjoint(),
            Subsystem::Idler => (c.adjoint() * c).transpose(),
        };
        DensityMatrix::new_unchecked(m)
    }

    pub fn schmidt_coefficients(&self) -> Vec<f64> {
        schmidt_coefficients(self)
    }

    pub fn i_concurrence(&self) -> Result<f64> {
        i_concurrence(self)
    }
}

/// Squared singular values of the amplitude matrix, descending.
pub fn schmidt_coefficients(psi: &PureBipartiteState) -> Vec<f64> {
    let sv = psi.amps.clone().svd(false, false).singular_values;
    let mut coeffs: Vec<f64> = sv.iter().map(|s| s * s).collect();
    coeffs.sort_by(|a, b| b.total_cmp(a));
    coeffs
}

/// I-concurrence normalized to `[0, 1]` by `Ω = √(2(d−1)/d)`.
pub fn i_concurrence(psi: &PureBipartiteState) -> Result<f64> {
    let (ds, di) = psi.dims();
    check_dim(ds, di)?;
    if ds < 2 {
        return Err(Error::InvalidDimension("concurrence needs d >= 2".into()));
    }
    let d = ds as f64;
    let omega = (2.0 * (d - 1.0) / d).sqrt();
    let p = psi.reduced(Subsystem::Idler).purity();
    Ok(((2.0 * (1.0 - p)).max(0.0)).sqrt() / omega)
}
