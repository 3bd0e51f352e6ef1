//! Time-multiplexed SLM "films": a dephasing channel is realized by cycling
//! per-slit phase masks over equal time slices of one acquisition window, so
//! each Kraus operator's weight is its share of the frames.

use std::f64::consts::PI;

use crate::channel::{dephasing_kraus, WeightedKrausSet};
use crate::error::{Error, Result};
use crate::state::{Operator, C64};

/// Frames per acquisition used in the ququart experiment.
pub const DEFAULT_FRAMES: usize = 32;

const REPRESENTABLE_TOL: f64 = 1e-9;

/// Ordered list of frames, each naming a dephasing operator `0..=d`
/// (`d` is the identity).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilmSchedule {
    d: usize,
    frames: Vec<usize>,
}

impl FilmSchedule {
    pub fn new(d: usize, frames: Vec<usize>) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidDimension(format!("film needs d >= 2, got {d}")));
        }
        if frames.is_empty() {
            return Err(Error::InvalidParameter("film has no frames".into()));
        }
        if let Some(&k) = frames.iter().find(|&&k| k > d) {
            return Err(Error::IndexOutOfRange { index: k, len: d + 1 });
        }
        Ok(FilmSchedule { d, frames })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn frames(&self) -> &[usize] {
        &self.frames
    }

    /// Number of frames per operator index `0..=d`.
    pub fn operator_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.d + 1];
        for &k in &self.frames {
            counts[k] += 1;
        }
        counts
    }

    pub fn identity_frames(&self) -> usize {
        self.operator_counts()[self.d]
    }
}

/// Film realizing uniform dephasing `p` on a `d`-slit qudit: every sign-flip
/// operator gets `p·n/d` frames, placed after the identity block in
/// ascending order.
pub fn compile_film(d: usize, p: f64, n_frames: usize) -> Result<FilmSchedule> {
    if d < 2 {
        return Err(Error::InvalidDimension(format!("film needs d >= 2, got {d}")));
    }
    if n_frames == 0 {
        return Err(Error::InvalidParameter("n_frames must be positive".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("p = {p} outside [0, 1]")));
    }
    let step = d as f64 / n_frames as f64;
    let per_op = p / step;
    let rounded = per_op.round();
    if (per_op - rounded).abs() > REPRESENTABLE_TOL || rounded as usize * d > n_frames {
        let max_count = (n_frames / d) as f64;
        let lower = per_op.floor().min(max_count) * step;
        let upper = per_op.ceil().min(max_count) * step;
        return Err(Error::NotRepresentable { p, lower, upper });
    }
    let per_op = rounded as usize;
    let mut frames = vec![d; n_frames - per_op * d];
    for j in 0..d {
        frames.extend(std::iter::repeat_n(j, per_op));
    }
    FilmSchedule::new(d, frames)
}

/// Time-averaged channel: operator `i` weighted by its frame share.
pub fn effective_channel(film: &FilmSchedule) -> Result<WeightedKrausSet> {
    let n = film.n_frames() as f64;
    let weights = film.operator_counts().iter().map(|&c| c as f64 / n).collect();
    WeightedKrausSet::new(dephasing_kraus(film.d)?, weights, true)
}

/// Per-slit SLM phases of frame `frame_index`: `π` on slit `j` for `K_j`,
/// all zero for the identity.
pub fn mask_phases(film: &FilmSchedule, frame_index: usize) -> Result<Vec<f64>> {
    let &op = film.frames.get(frame_index).ok_or(Error::IndexOutOfRange {
        index: frame_index,
        len: film.n_frames(),
    })?;
    Ok((0..film.d)
        .map(|slit| if slit == op { PI } else { 0.0 })
        .collect())
}

/// Diagonal operator `diag(e^{iφ_ℓ})` imposed by a phase mask.
pub fn mask_operator(phases: &[f64]) -> Result<Operator> {
    let diag: Vec<C64> = phases.iter().map(|&phi| C64::from_polar(1.0, phi)).collect();
    Operator::from_diagonal(&diag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{apply_channel, dephasing_channel};
    use crate::state::{max_abs_diff, CMatrix, DensityMatrix};

    #[test]
    fn layout_for_small_p() {
        let film = compile_film(4, 0.125, 32).unwrap();
        let mut expected = vec![4; 28];
        expected.extend([0, 1, 2, 3]);
        assert_eq!(film.frames(), expected.as_slice());
    }

    #[test]
    fn layout_for_full_dephasing() {
        let film = compile_film(4, 1.0, 32).unwrap();
        assert_eq!(film.identity_frames(), 0);
        assert_eq!(film.operator_counts(), vec![8, 8, 8, 8, 0]);
        assert!(film.frames().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn layout_without_dephasing() {
        let film = compile_film(4, 0.0, 32).unwrap();
        assert_eq!(film.frames(), vec![4; 32].as_slice());
    }

    #[test]
    fn non_representable_p_names_neighbours() {
        match compile_film(4, 0.13, 32) {
            Err(Error::NotRepresentable { lower, upper, .. }) => {
                assert_eq!(lower, 0.125);
                assert_eq!(upper, 0.25);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(compile_film(3, 1.0, 32).is_err());
        assert!(compile_film(4, 1.5, 32).is_err());
    }

    #[test]
    fn half_dephasing_film() {
        let chan = effective_channel(&compile_film(4, 0.5, 32).unwrap()).unwrap();
        assert_eq!(chan.weights(), &[0.125, 0.125, 0.125, 0.125, 0.5]);
        let coherent = DensityMatrix::new(CMatrix::from_element(4, 4, C64::new(0.25, 0.0))).unwrap();
        let out = apply_channel(&chan, &coherent).unwrap();
        assert_eq!(out.get(0, 3), C64::new(0.125, 0.0));
        assert_eq!(out.get(2, 2), C64::new(0.25, 0.0));
    }

    #[test]
    fn identity_film_is_identity_channel() {
        let film = FilmSchedule::new(3, vec![3; 10]).unwrap();
        let chan = effective_channel(&film).unwrap();
        assert_eq!(chan.weights(), &[0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn round_trip_matches_uniform_channel() {
        for (d, n) in [(2, 8), (3, 12), (4, 32), (5, 20)] {
            for k in 0..=n / d {
                let p = (k * d) as f64 / n as f64;
                let film = compile_film(d, p, n).unwrap();
                let a = effective_channel(&film).unwrap();
                let b = dephasing_channel(d, &vec![k as f64 / n as f64; d]).unwrap();
                assert_eq!(a.weights(), b.weights());
            }
        }
    }

    #[test]
    fn permutation_invariance() {
        let film = compile_film(4, 0.375, 32).unwrap();
        let mut shuffled = film.frames().to_vec();
        shuffled.reverse();
        shuffled.rotate_left(5);
        let other = FilmSchedule::new(4, shuffled).unwrap();
        assert_eq!(
            effective_channel(&film).unwrap(),
            effective_channel(&other).unwrap()
        );
    }

    #[test]
    fn frame_conservation() {
        for k in 0..=8 {
            let film = compile_film(4, k as f64 / 8.0, 32).unwrap();
            assert_eq!(film.operator_counts().iter().sum::<usize>(), 32);
        }
    }

    #[test]
    fn masks_realize_kraus_operators() {
        let film = compile_film(4, 1.0, 32).unwrap();
        let ops = dephasing_kraus(4).unwrap();
        assert_eq!(mask_phases(&film, 16).unwrap(), vec![0.0, 0.0, PI, 0.0]);
        for i in 0..32 {
            let op = mask_operator(&mask_phases(&film, i).unwrap()).unwrap();
            assert!(max_abs_diff(op.matrix(), ops[film.frames()[i]].matrix()) < 1e-15);
        }
        let id = compile_film(4, 0.0, 32).unwrap();
        assert_eq!(mask_phases(&id, 0).unwrap(), vec![0.0; 4]);
        assert!(mask_phases(&id, 32).is_err());
    }

    #[test]
    fn rejects_bad_frame_indices() {
        assert!(FilmSchedule::new(4, vec![5]).is_err());
        assert!(FilmSchedule::new(4, vec![]).is_err());
    }
}
