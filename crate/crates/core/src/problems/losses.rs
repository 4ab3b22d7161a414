use nalgebra::{DMatrix, DVector};
use sha2::{Digest, Sha256};

use super::{hash_slice, Point, SmoothFunction};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
enum Hessian {
    Diagonal(DVector<f64>),
    Dense(DMatrix<f64>),
}

/// `offset + (x - center)^T H (x - center) / 2` with `H` symmetric PSD.
#[derive(Debug, Clone)]
pub struct Quadratic {
    hessian: Hessian,
    center: Point,
    offset: f64,
}

impl Quadratic {
    pub fn diagonal(diag: DVector<f64>, center: Point, offset: f64) -> Self {
        assert_eq!(
            diag.len(),
            center.len(),
            "hessian and center dimensions differ"
        );
        Self {
            hessian: Hessian::Diagonal(diag),
            center,
            offset,
        }
    }

    pub fn dense(hessian: DMatrix<f64>, center: Point, offset: f64) -> Result<Self> {
        if !hessian.is_square() || hessian.nrows() != center.len() {
            return Err(Error::invalid(
                "hessian must be square and match the center",
            ));
        }
        Ok(Self {
            hessian: Hessian::Dense(hessian),
            center,
            offset,
        })
    }

    pub fn apply_hessian(&self, d: &Point) -> Point {
        match &self.hessian {
            Hessian::Diagonal(diag) => diag.component_mul(d),
            Hessian::Dense(h) => h * d,
        }
    }

    pub fn center(&self) -> &Point {
        &self.center
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }
}

impl SmoothFunction for Quadratic {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, x: &Point) -> f64 {
        let d = x - &self.center;
        self.offset + 0.5 * d.dot(&self.apply_hessian(&d))
    }

    fn gradient(&self, x: &Point) -> Point {
        self.apply_hessian(&(x - &self.center))
    }

    fn value_and_gradient(&self, x: &Point) -> (f64, Point) {
        let d = x - &self.center;
        let g = self.apply_hessian(&d);
        (self.offset + 0.5 * d.dot(&g), g)
    }

    fn fingerprint(&self, hasher: &mut Sha256) {
        hasher.update(b"quadratic");
        match &self.hessian {
            Hessian::Diagonal(d) => hash_slice(hasher, d.as_slice()),
            Hessian::Dense(h) => hash_slice(hasher, h.as_slice()),
        }
        hash_slice(hasher, self.center.as_slice());
        hasher.update(self.offset.to_le_bytes());
    }
}

/// `||A x - b||^2 / 2`
#[derive(Debug, Clone)]
pub struct LeastSquares {
    a: DMatrix<f64>,
    b: DVector<f64>,
}

impl LeastSquares {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::invalid(format!(
                "design has {} rows, target has {}",
                a.nrows(),
                b.len()
            )));
        }
        Ok(Self { a, b })
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn target(&self) -> &DVector<f64> {
        &self.b
    }
}

impl SmoothFunction for LeastSquares {
    fn dim(&self) -> usize {
        self.a.ncols()
    }

    fn value(&self, x: &Point) -> f64 {
        0.5 * (&self.a * x - &self.b).norm_squared()
    }

    fn gradient(&self, x: &Point) -> Point {
        self.a.tr_mul(&(&self.a * x - &self.b))
    }

    fn value_and_gradient(&self, x: &Point) -> (f64, Point) {
        let r = &self.a * x - &self.b;
        (0.5 * r.norm_squared(), self.a.tr_mul(&r))
    }

    fn fingerprint(&self, hasher: &mut Sha256) {
        hasher.update(b"least-squares");
        hasher.update((self.a.nrows() as u64).to_le_bytes());
        hash_slice(hasher, self.a.as_slice());
        hash_slice(hasher, self.b.as_slice());
    }
}

/// `sum_i log(1 + exp(-y_i x_i^T w)) + ridge ||w||^2` with labels in `{-1, +1}`.
#[derive(Debug, Clone)]
pub struct Logistic {
    x: DMatrix<f64>,
    labels: DVector<f64>,
    ridge: f64,
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl Logistic {
    pub fn new(x: DMatrix<f64>, labels: DVector<f64>, ridge: f64) -> Result<Self> {
        if x.nrows() != labels.len() {
            return Err(Error::invalid("labels and design rows differ"));
        }
        if ridge < 0.0 {
            return Err(Error::invalid("ridge weight must be nonnegative"));
        }
        Ok(Self { x, labels, ridge })
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }
}

impl SmoothFunction for Logistic {
    fn dim(&self) -> usize {
        self.x.ncols()
    }

    fn value(&self, w: &Point) -> f64 {
        let margins = &self.x * w;
        let loss: f64 = margins
            .iter()
            .zip(self.labels.iter())
            .map(|(m, y)| softplus(-y * m))
            .sum();
        loss + self.ridge * w.norm_squared()
    }

    fn gradient(&self, w: &Point) -> Point {
        let margins = &self.x * w;
        let coef = DVector::from_iterator(
            margins.len(),
            margins
                .iter()
                .zip(self.labels.iter())
                .map(|(m, y)| -y * sigmoid(-y * m)),
        );
        self.x.tr_mul(&coef) + w * (2.0 * self.ridge)
    }

    fn fingerprint(&self, hasher: &mut Sha256) {
        hasher.update(b"logistic");
        hasher.update((self.x.nrows() as u64).to_le_bytes());
        hash_slice(hasher, self.x.as_slice());
        hash_slice(hasher, self.labels.as_slice());
        hasher.update(self.ridge.to_le_bytes());
    }
}

/// Dual of the L2-regularized hinge loss:
/// `||X^T diag(y) alpha||^2 / (2C) - 1^T alpha`, paired with a `[0, 1]` box.
#[derive(Debug, Clone)]
pub struct DualSvm {
    /// Rows of the design scaled by their labels.
    signed: DMatrix<f64>,
    c: f64,
}

impl DualSvm {
    pub fn new(x: &DMatrix<f64>, labels: &DVector<f64>, c: f64) -> Result<Self> {
        if x.nrows() != labels.len() {
            return Err(Error::invalid("labels and design rows differ"));
        }
        if !(c > 0.0) {
            return Err(Error::invalid("C must be positive"));
        }
        let mut signed = x.clone();
        for (mut row, y) in signed.row_iter_mut().zip(labels.iter()) {
            row *= *y;
        }
        Ok(Self { signed, c })
    }

    pub fn signed_design(&self) -> &DMatrix<f64> {
        &self.signed
    }

    pub fn c(&self) -> f64 {
        self.c
    }
}

impl SmoothFunction for DualSvm {
    fn dim(&self) -> usize {
        self.signed.nrows()
    }

    fn value(&self, alpha: &Point) -> f64 {
        let w = self.signed.tr_mul(alpha);
        w.norm_squared() / (2.0 * self.c) - alpha.sum()
    }

    fn gradient(&self, alpha: &Point) -> Point {
        let w = self.signed.tr_mul(alpha);
        (&self.signed * w) / self.c - Point::from_element(alpha.len(), 1.0)
    }

    fn value_and_gradient(&self, alpha: &Point) -> (f64, Point) {
        let w = self.signed.tr_mul(alpha);
        let value = w.norm_squared() / (2.0 * self.c) - alpha.sum();
        let grad = (&self.signed * w) / self.c - Point::from_element(alpha.len(), 1.0);
        (value, grad)
    }

    fn fingerprint(&self, hasher: &mut Sha256) {
        hasher.update(b"dual-svm");
        hasher.update((self.signed.nrows() as u64).to_le_bytes());
        hash_slice(hasher, self.signed.as_slice());
        hasher.update(self.c.to_le_bytes());
    }
}

/// `sum_{(i,j) in Omega} (X_ij - Y_ij)^2` over a column-major `rows x cols`
/// matrix. The Hessian is `2 P_Omega`, so the smoothness constant is 2.
#[derive(Debug, Clone)]
pub struct ObservedSquares {
    rows: usize,
    cols: usize,
    /// (flat column-major index, observed value)
    observed: Vec<(usize, f64)>,
}

impl ObservedSquares {
    pub fn new(rows: usize, cols: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        let mut observed = Vec::with_capacity(entries.len());
        for &(i, j, y) in entries {
            if i >= rows || j >= cols {
                return Err(Error::invalid(format!(
                    "entry ({i}, {j}) outside {rows}x{cols}"
                )));
            }
            observed.push((j * rows + i, y));
        }
        let mut idx: Vec<usize> = observed.iter().map(|e| e.0).collect();
        idx.sort_unstable();
        if idx.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("observed entries must be unique"));
        }
        Ok(Self {
            rows,
            cols,
            observed,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn observed_len(&self) -> usize {
        self.observed.len()
    }
}

impl SmoothFunction for ObservedSquares {
    fn dim(&self) -> usize {
        self.rows * self.cols
    }

    fn value(&self, x: &Point) -> f64 {
        self.observed.iter().map(|&(k, y)| (x[k] - y).powi(2)).sum()
    }

    fn gradient(&self, x: &Point) -> Point {
        let mut g = Point::zeros(self.dim());
        for &(k, y) in &self.observed {
            g[k] = 2.0 * (x[k] - y);
        }
        g
    }

    fn fingerprint(&self, hasher: &mut Sha256) {
        hasher.update(b"observed-squares");
        hasher.update((self.rows as u64).to_le_bytes());
        hasher.update((self.cols as u64).to_le_bytes());
        for &(k, y) in &self.observed {
            hasher.update((k as u64).to_le_bytes());
            hasher.update(y.to_le_bytes());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::verification::finite_diff_grad;

    fn check_gradient(f: &dyn SmoothFunction, seed: u64) {
        let mut r = rng::seeded(seed);
        for _ in 0..20 {
            let x = rng::gaussian_vector(&mut r, f.dim());
            let h = 1e-6 * (1.0 + x.norm());
            let fd = finite_diff_grad(f, &x, h);
            let g = f.gradient(&x);
            let rel = (&fd - &g).norm() / g.norm().max(1e-8);
            assert!(rel <= 1e-4, "relative gradient error {rel}");
        }
    }

    fn random_design(seed: u64, m: usize, n: usize) -> (DMatrix<f64>, DVector<f64>) {
        let mut r = rng::seeded(seed);
        let x = DMatrix::from_fn(m, n, |_, _| rng::gaussian(&mut r));
        let y = DVector::from_fn(m, |_, _| {
            if rng::gaussian(&mut r) > 0.0 {
                1.0
            } else {
                -1.0
            }
        });
        (x, y)
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (x, y) = random_design(1, 15, 6);
        check_gradient(&LeastSquares::new(x.clone(), y.clone()).unwrap(), 2);
        check_gradient(&Logistic::new(x.clone(), y.clone(), 0.3).unwrap(), 3);
        check_gradient(&DualSvm::new(&x, &y, 2.0).unwrap(), 4);
        let entries = [(0, 0, 1.0), (1, 2, -0.5), (2, 1, 2.0)];
        check_gradient(&ObservedSquares::new(3, 3, &entries).unwrap(), 5);
        let h = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        check_gradient(
            &Quadratic::dense(h, Point::from_vec(vec![1.0, -1.0]), 0.3).unwrap(),
            6,
        );
    }

    #[test]
    fn logistic_is_stable_for_large_margins() {
        let x = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let y = DVector::from_vec(vec![1.0, 1.0]);
        let f = Logistic::new(x, y, 0.0).unwrap();
        let w = Point::from_vec(vec![800.0]);
        let v = f.value(&w);
        assert!(v.is_finite());
        assert!((v - 800.0).abs() < 1e-9);
        assert!(f.gradient(&w).iter().all(|g| g.is_finite()));
    }

    #[test]
    fn observed_squares_rejects_duplicates() {
        assert!(ObservedSquares::new(2, 2, &[(0, 0, 1.0), (0, 0, 2.0)]).is_err());
        assert!(ObservedSquares::new(2, 2, &[(2, 0, 1.0)]).is_err());
    }
}
