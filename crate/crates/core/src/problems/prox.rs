use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use super::Point;
use crate::error::{Error, Result};

/// Convex penalty `psi` with a closed-form proximal operator.
#[derive(Debug, Clone, PartialEq)]
pub enum Penalty {
    Zero,
    /// `weight * ||x||_1`
    L1 {
        weight: f64,
    },
    /// `weight * ||X||_*` on a column-major `rows x cols` matrix.
    Nuclear {
        weight: f64,
        rows: usize,
        cols: usize,
    },
    /// Indicator of the box `[lo, hi]^n`.
    Box {
        lo: f64,
        hi: f64,
    },
}

impl Penalty {
    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        match *self {
            Penalty::L1 { weight } | Penalty::Nuclear { weight, .. } if weight < 0.0 => Err(
                Error::invalid(format!("penalty weight {weight} is negative")),
            ),
            Penalty::Nuclear { rows, cols, .. } if rows * cols != dim => Err(Error::invalid(
                format!("nuclear shape {rows}x{cols} does not match dimension {dim}"),
            )),
            Penalty::Box { lo, hi } if lo > hi => {
                Err(Error::invalid(format!("box bounds inverted: {lo} > {hi}")))
            }
            _ => Ok(()),
        }
    }

    /// `psi(x)`; `+inf` outside the domain.
    pub fn value(&self, x: &Point) -> f64 {
        match *self {
            Penalty::Zero => 0.0,
            Penalty::L1 { weight } => weight * x.iter().map(|v| v.abs()).sum::<f64>(),
            Penalty::Nuclear { weight, rows, cols } => {
                let m = DMatrix::from_column_slice(rows, cols, x.as_slice());
                match m.try_svd(false, false, f64::EPSILON, 0) {
                    Some(svd) => weight * svd.singular_values.sum(),
                    None => f64::NAN,
                }
            }
            Penalty::Box { lo, hi } => {
                if x.iter().all(|&v| v >= lo && v <= hi) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// `argmin_x psi(x) + (step / 2) ||x - v||^2`.
    pub fn prox(&self, v: &Point, step: f64) -> Result<Point> {
        if !(step > 0.0) {
            return Err(Error::invalid(format!(
                "prox step must be positive, got {step}"
            )));
        }
        match *self {
            Penalty::Zero => Ok(v.clone()),
            Penalty::L1 { weight } => prox_l1(v, weight / step),
            Penalty::Nuclear { weight, rows, cols } => prox_nuclear(v, rows, cols, weight / step),
            Penalty::Box { lo, hi } => prox_box(v, lo, hi),
        }
    }

    pub(crate) fn fingerprint(&self, hasher: &mut Sha256) {
        match *self {
            Penalty::Zero => hasher.update(b"zero"),
            Penalty::L1 { weight } => {
                hasher.update(b"l1");
                hasher.update(weight.to_le_bytes());
            }
            Penalty::Nuclear { weight, rows, cols } => {
                hasher.update(b"nuclear");
                hasher.update(weight.to_le_bytes());
                hasher.update((rows as u64).to_le_bytes());
                hasher.update((cols as u64).to_le_bytes());
            }
            Penalty::Box { lo, hi } => {
                hasher.update(b"box");
                hasher.update(lo.to_le_bytes());
                hasher.update(hi.to_le_bytes());
            }
        }
    }
}

/// Coordinatewise soft threshold `sign(v) max(|v| - threshold, 0)`.
pub fn prox_l1(v: &Point, threshold: f64) -> Result<Point> {
    if !(threshold >= 0.0) {
        return Err(Error::invalid(format!(
            "threshold must be nonnegative, got {threshold}"
        )));
    }
    Ok(v.map(|x| x.signum() * (x.abs() - threshold).max(0.0)))
}

/// Singular value soft threshold of `v` viewed as a column-major matrix.
pub fn prox_nuclear(v: &Point, rows: usize, cols: usize, threshold: f64) -> Result<Point> {
    if !(threshold >= 0.0) {
        return Err(Error::invalid(format!(
            "threshold must be nonnegative, got {threshold}"
        )));
    }
    if rows * cols != v.len() {
        return Err(Error::invalid(format!(
            "shape {rows}x{cols} does not match length {}",
            v.len()
        )));
    }
    let m = DMatrix::from_column_slice(rows, cols, v.as_slice());
    let mut svd = m
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
    svd.singular_values
        .apply(|s| *s = (*s - threshold).max(0.0));
    let out = svd
        .recompose()
        .map_err(|e| Error::Numerical(format!("SVD recomposition failed: {e}")))?;
    Ok(Point::from_column_slice(out.as_slice()))
}

/// Coordinatewise clamp to `[lo, hi]`.
pub fn prox_box(v: &Point, lo: f64, hi: f64) -> Result<Point> {
    if lo > hi {
        return Err(Error::invalid(format!("box bounds inverted: {lo} > {hi}")));
    }
    Ok(v.map(|x| x.clamp(lo, hi)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    fn pt(v: &[f64]) -> Point {
        Point::from_row_slice(v)
    }

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(
            prox_l1(&pt(&[2.0, -0.5, 0.0]), 1.0).unwrap(),
            pt(&[1.0, 0.0, 0.0])
        );
        let v = pt(&[1.5, -3.0, 0.25]);
        assert_eq!(prox_l1(&v, 0.0).unwrap(), v);
        assert_eq!(prox_l1(&pt(&[0.3]), 0.7).unwrap(), pt(&[0.0]));
        assert!(prox_l1(&v, -0.1).is_err());
    }

    #[test]
    fn nuclear_on_diagonal_matrix() {
        let mut v = DMatrix::zeros(3, 3);
        v[(0, 0)] = 3.0;
        v[(1, 1)] = 1.0;
        v[(2, 2)] = 0.2;
        let out = prox_nuclear(&Point::from_column_slice(v.as_slice()), 3, 3, 0.5).unwrap();
        let expected = [2.5, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0];
        for (a, b) in out.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{out}");
        }
    }

    #[test]
    fn nuclear_of_zero_is_zero() {
        let out = prox_nuclear(&Point::zeros(12), 3, 4, 0.7).unwrap();
        assert!(out.iter().all(|&x| x == 0.0));
        assert!(prox_nuclear(&Point::zeros(12), 5, 4, 0.1).is_err());
    }

    #[test]
    fn box_examples() {
        assert_eq!(
            prox_box(&pt(&[-1.0, 0.5, 2.0]), 0.0, 1.0).unwrap(),
            pt(&[0.0, 0.5, 1.0])
        );
        let inside = pt(&[0.1, 0.9]);
        assert_eq!(prox_box(&inside, 0.0, 1.0).unwrap(), inside);
        assert_eq!(prox_box(&pt(&[5.0]), 0.0, 1.0).unwrap(), pt(&[1.0]));
        assert!(prox_box(&inside, 1.0, 0.0).is_err());
    }

    #[test]
    fn nuclear_matches_factorized_oracle_on_random_5x5() {
        let mut r = rng::seeded(11);
        let v = rng::gaussian_vector(&mut r, 25);
        let t = 0.1;
        let p = prox_nuclear(&v, 5, 5, t).unwrap();
        let objective = |x: &Point| {
            0.5 * (x - &v).norm_squared()
                + Penalty::Nuclear {
                    weight: t,
                    rows: 5,
                    cols: 5,
                }
                .value(x)
        };
        let oracle = crate::verification::oracles::nuclear_prox_objective_oracle(&v, 5, 5, t, 3);
        assert!(
            (objective(&p) - oracle).abs() < 1e-8,
            "{} vs {}",
            objective(&p),
            oracle
        );
    }

    fn prox_objective(pen: &Penalty, x: &Point, v: &Point, step: f64) -> f64 {
        pen.value(x) + 0.5 * step * (x - v).norm_squared()
    }

    proptest! {
        #[test]
        fn prox_output_beats_perturbations(
            seed in 0u64..1000,
            kind in 0usize..3,
            step in 0.1f64..10.0,
        ) {
            let mut r = rng::seeded(seed);
            let v = rng::gaussian_vector(&mut r, 9) * 2.0;
            let pen = match kind {
                0 => Penalty::L1 { weight: 0.7 },
                1 => Penalty::Nuclear { weight: 0.7, rows: 3, cols: 3 },
                _ => Penalty::Box { lo: -0.5, hi: 1.0 },
            };
            let p = pen.prox(&v, step).unwrap();
            let at_p = prox_objective(&pen, &p, &v, step);
            for _ in 0..50 {
                let delta = rng::gaussian_vector(&mut r, 9) * 0.05;
                let q = &p + delta;
                let q = if let Penalty::Box { lo, hi } = pen { q.map(|x| x.clamp(lo, hi)) } else { q };
                prop_assert!(at_p <= prox_objective(&pen, &q, &v, step) + 1e-12);
            }
        }
    }
}
