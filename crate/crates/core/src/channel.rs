//! Weighted Kraus channels and the diagonal dephasing family.

use crate::error::{Error, Result};
use crate::state::{check_dim, hermitian_eigenvalues, max_abs_diff, CMatrix, DensityMatrix, Operator, C64};

/// Tolerance on `Σ p_i = 1` and on dephasing weight ranges.
pub const WEIGHT_TOL: f64 = 1e-12;
/// Tolerance on the completeness relation `Σ p_i K_i†K_i = I`.
pub const COMPLETENESS_TOL: f64 = 1e-10;

/// A mixture `ρ ↦ Σ p_i K_i ρ K_i†`.
///
/// With `trace_preserving == false` the set describes a filter
/// (`Σ p_i K_i†K_i ≤ I`) and application renormalizes the output.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedKrausSet {
    dim: usize,
    operators: Vec<Operator>,
    weights: Vec<f64>,
    trace_preserving: bool,
}

impl WeightedKrausSet {
    pub fn new(operators: Vec<Operator>, weights: Vec<f64>, trace_preserving: bool) -> Result<Self> {
        if operators.is_empty() {
            return Err(Error::InvalidChannel("no operators".into()));
        }
        if operators.len() != weights.len() {
            return Err(Error::InvalidChannel(format!(
                "{} operators but {} weights",
                operators.len(),
                weights.len()
            )));
        }
        let dim = operators[0].dim();
        for op in &operators {
            check_dim(dim, op.dim())?;
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::WeightOutOfRange(format!(
                "weight {w} is negative or not finite"
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::WeightOutOfRange(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        let set = WeightedKrausSet {
            dim,
            operators,
            weights,
            trace_preserving,
        };
        let gap = CMatrix::identity(dim, dim) - set.completeness_sum();
        if trace_preserving {
            let err = max_abs_diff(&gap, &CMatrix::zeros(dim, dim));
            if err > COMPLETENESS_TOL {
                return Err(Error::InvalidChannel(format!(
                    "Σ p K†K deviates from identity by {err:e}"
                )));
            }
        } else {
            let min_ev = hermitian_eigenvalues(&gap)[0];
            if min_ev < -COMPLETENESS_TOL {
                return Err(Error::InvalidChannel(format!(
                    "Σ p K†K exceeds identity (eigenvalue of I − Σ is {min_ev:e})"
                )));
            }
        }
        Ok(set)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn operators(&self) -> &[Operator] {
        &self.operators
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_trace_preserving(&self) -> bool {
        self.trace_preserving
    }

    /// `Σ p_i K_i†K_i`.
    pub fn completeness_sum(&self) -> CMatrix {
        let mut acc = CMatrix::zeros(self.dim, self.dim);
        for (k, &w) in self.operators.iter().zip(&self.weights) {
            acc += (k.matrix().adjoint() * k.matrix()) * C64::new(w, 0.0);
        }
        acc
    }

    /// `Σ p_i K_i ρ K_i†` without normalization.
    pub fn apply_unnormalized(&self, rho: &DensityMatrix) -> Result<CMatrix> {
        check_dim(self.dim, rho.dim())?;
        let mut acc = CMatrix::zeros(self.dim, self.dim);
        for (k, &w) in self.operators.iter().zip(&self.weights) {
            if w == 0.0 {
                continue;
            }
            let km = k.matrix();
            acc += (km * rho.matrix() * km.adjoint()) * C64::new(w, 0.0);
        }
        Ok(acc)
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        apply_channel(self, rho)
    }
}

/// Applies the channel; filtering sets are renormalized by the surviving trace.
pub fn apply_channel(chan: &WeightedKrausSet, rho: &DensityMatrix) -> Result<DensityMatrix> {
    let out = chan.apply_unnormalized(rho)?;
    if chan.trace_preserving {
        return DensityMatrix::new(out);
    }
    let tr = out.trace().re;
    if tr <= 0.0 {
        return Err(Error::ZeroNorm);
    }
    DensityMatrix::new(out / C64::new(tr, 0.0))
}

/// The `d + 1` dephasing operators: `K_j` flips the sign of level `j`
/// (`j < d`), and `K_d` is the identity.
pub fn dephasing_kraus(d: usize) -> Result<Vec<Operator>> {
    if d < 2 {
        return Err(Error::InvalidDimension(format!(
            "dephasing needs d >= 2, got {d}"
        )));
    }
    let mut ops = Vec::with_capacity(d + 1);
    for j in 0..d {
        let diag: Vec<f64> = (0..d).map(|i| if i == j { -1.0 } else { 1.0 }).collect();
        ops.push(Operator::from_real_diagonal(&diag)?);
    }
    ops.push(Operator::identity(d));
    Ok(ops)
}

fn validate_dephasing_weights(d: usize, weights: &[f64]) -> Result<f64> {
    if weights.len() != d {
        return Err(Error::WeightOutOfRange(format!(
            "expected {d} dephasing weights, got {}",
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(Error::WeightOutOfRange(format!(
            "weight {w} is negative or not finite"
        )));
    }
    let total: f64 = weights.iter().sum();
    if total > 1.0 + WEIGHT_TOL {
        return Err(Error::WeightOutOfRange(format!("weights sum to {total} > 1")));
    }
    Ok((1.0 - total).max(0.0))
}

/// Dephasing channel with weights `p_0..p_{d-1}` on the sign flips; the
/// identity receives the remaining weight `1 − Σ p_i`.
pub fn dephasing_channel(d: usize, weights: &[f64]) -> Result<WeightedKrausSet> {
    let ops = dephasing_kraus(d)?;
    let identity_weight = validate_dephasing_weights(d, weights)?;
    let mut all = weights.to_vec();
    all.push(identity_weight);
    WeightedKrausSet::new(ops, all, true)
}

/// Single-parameter channel with `p_i = p / d`; off-diagonals scale by `1 − p`
/// when `d = 4`.
pub fn uniform_dephasing(d: usize, p: f64) -> Result<WeightedKrausSet> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::WeightOutOfRange(format!("p = {p} outside [0, 1]")));
    }
    dephasing_channel(d, &vec![p / d as f64; d])
}

/// Element-wise form of the dephasing channel: populations are kept and
/// `ρ_ij` is scaled by `1 − 2p_i − 2p_j`.
pub fn dephasing_closed_form(rho: &DensityMatrix, weights: &[f64]) -> Result<DensityMatrix> {
    let d = rho.dim();
    if d < 2 {
        return Err(Error::InvalidDimension(format!(
            "dephasing needs d >= 2, got {d}"
        )));
    }
    validate_dephasing_weights(d, weights)?;
    let m = CMatrix::from_fn(d, d, |i, j| {
        let r = rho.get(i, j);
        if i == j {
            r
        } else {
            r * (1.0 - 2.0 * weights[i] - 2.0 * weights[j])
        }
    });
    DensityMatrix::new(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn coherent(d: usize) -> DensityMatrix {
        DensityMatrix::new(CMatrix::from_element(d, d, C64::new(1.0 / d as f64, 0.0))).unwrap()
    }

    fn random_density(rng: &mut impl Rng, d: usize) -> DensityMatrix {
        let g = CMatrix::from_fn(d, d, |_, _| {
            C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let m = &g * g.adjoint();
        let tr = m.trace();
        DensityMatrix::new(m / tr).unwrap()
    }

    fn random_weights(rng: &mut impl Rng, d: usize) -> Vec<f64> {
        let budget: f64 = rng.gen();
        let raw: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
        let s: f64 = raw.iter().sum();
        raw.iter().map(|x| x / s * budget).collect()
    }

    #[test]
    fn kraus_operators_have_sign_flip_at_j() {
        let ops = dephasing_kraus(3).unwrap();
        assert_eq!(ops.len(), 4);
        assert_eq!(ops[1], Operator::from_real_diagonal(&[1.0, -1.0, 1.0]).unwrap());
        let ops4 = dephasing_kraus(4).unwrap();
        assert_eq!(ops4[4], Operator::identity(4));
        for k in &ops4 {
            assert_eq!(k.adjoint().mul(k).unwrap(), Operator::identity(4));
        }
        assert!(dephasing_kraus(1).is_err());
    }

    #[test]
    fn zero_weights_act_as_identity() {
        let chan = dephasing_channel(4, &[0.0; 4]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = random_density(&mut rng, 4);
        assert_eq!(apply_channel(&chan, &rho).unwrap(), rho);
    }

    #[test]
    fn uniform_weights_scale_by_one_minus_p() {
        let chan = uniform_dephasing(4, 0.3).unwrap();
        assert!(chan.weights()[..4].iter().all(|&w| (w - 0.075).abs() < 1e-15));
        let out = apply_channel(&chan, &coherent(4)).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expected = if i == j { 0.25 } else { 0.25 * 0.7 };
                assert!((out.get(i, j).re - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn single_flip_weight_substitution() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rho = random_density(&mut rng, 3);
        let out = dephasing_closed_form(&rho, &[0.5, 0.0, 0.0]).unwrap();
        assert!(out.get(0, 1).norm() < 1e-15);
        assert!((out.get(1, 2) - rho.get(1, 2)).norm() < 1e-15);
    }

    #[test]
    fn full_uniform_dephasing_diagonalizes() {
        let out = apply_channel(&uniform_dephasing(4, 1.0).unwrap(), &coherent(4)).unwrap();
        let expected = DensityMatrix::maximally_mixed(4);
        assert!(max_abs_diff(out.matrix(), expected.matrix()) < 1e-15);
    }

    #[test]
    fn half_dephasing_halves_coherence() {
        let mut m = CMatrix::identity(2, 2) * C64::new(0.5, 0.0);
        m[(0, 1)] = C64::new(0.3, 0.0);
        m[(1, 0)] = C64::new(0.3, 0.0);
        let rho = DensityMatrix::new(m).unwrap();
        let out = apply_channel(&uniform_dephasing(4, 0.5).unwrap(), &embed(&rho, 4)).unwrap();
        assert!((out.get(0, 1).re - 0.15).abs() < 1e-15);
    }

    fn embed(rho: &DensityMatrix, d: usize) -> DensityMatrix {
        let mut m = CMatrix::zeros(d, d);
        let k = rho.dim();
        m.view_mut((0, 0), (k, k)).copy_from(rho.matrix());
        DensityMatrix::new(m).unwrap()
    }

    #[test]
    fn weight_validation() {
        assert!(dephasing_channel(3, &[0.5, 0.6, 0.0]).is_err());
        assert!(dephasing_channel(3, &[-0.1, 0.0, 0.0]).is_err());
        assert!(dephasing_channel(3, &[0.1, 0.0]).is_err());
        assert!(uniform_dephasing(4, 1.5).is_err());
        let chan = dephasing_channel(3, &[0.5, 0.25, 0.25]).unwrap();
        assert_eq!(chan.weights()[3], 0.0);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let chan = uniform_dephasing(4, 0.5).unwrap();
        assert!(matches!(
            apply_channel(&chan, &coherent(3)),
            Err(Error::DimensionMismatch {
                expected: 4,
                found: 3
            })
        ));
    }

    #[test]
    fn invalid_kraus_sets_are_rejected() {
        let half = Operator::from_real_diagonal(&[0.5, 0.5]).unwrap();
        assert!(WeightedKrausSet::new(vec![half.clone()], vec![1.0], true).is_err());
        let filter = WeightedKrausSet::new(vec![half], vec![1.0], false).unwrap();
        let out = apply_channel(&filter, &DensityMatrix::maximally_mixed(2)).unwrap();
        assert!((out.get(0, 0).re - 0.5).abs() < 1e-15);
        let big = Operator::from_real_diagonal(&[2.0, 1.0]).unwrap();
        assert!(WeightedKrausSet::new(vec![big], vec![1.0], false).is_err());
    }

    #[test]
    fn completeness_holds_for_random_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let d = rng.gen_range(2..=6);
            let chan = dephasing_channel(d, &random_weights(&mut rng, d)).unwrap();
            let err = max_abs_diff(&chan.completeness_sum(), &CMatrix::identity(d, d));
            assert!(err < 1e-12);
        }
    }

    #[test]
    fn closed_form_matches_channel() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let d = rng.gen_range(2..=6);
            let rho = random_density(&mut rng, d);
            let w = random_weights(&mut rng, d);
            let a = apply_channel(&dephasing_channel(d, &w).unwrap(), &rho).unwrap();
            let b = dephasing_closed_form(&rho, &w).unwrap();
            assert!(max_abs_diff(a.matrix(), b.matrix()) < 1e-12);
            let min_ev = a.eigenvalues()[0];
            assert!(min_ev >= -1e-10);
        }
    }

    #[test]
    fn uniform_channels_compose_multiplicatively() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let rho = random_density(&mut rng, 4);
        let (p, q) = (0.3, 0.45);
        let twice = apply_channel(
            &uniform_dephasing(4, q).unwrap(),
            &apply_channel(&uniform_dephasing(4, p).unwrap(), &rho).unwrap(),
        )
        .unwrap();
        let combined = 1.0 - (1.0 - p) * (1.0 - q);
        let once = apply_channel(&uniform_dephasing(4, combined).unwrap(), &rho).unwrap();
        assert!(max_abs_diff(twice.matrix(), once.matrix()) < 1e-12);
        let diag: DVector<C64> = twice.matrix().diagonal();
        assert!((diag - rho.matrix().diagonal()).norm() < 1e-15);
    }
}
