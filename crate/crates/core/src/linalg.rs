//! Growable lower-triangular Cholesky factor.
//!
//! Rows are appended one at a time, so a factor built by repeated
//! [`Cholesky::push`] is bitwise identical to one built by [`Cholesky::factor`]
//! over the same matrix. Forward substitution uses the same row kernel, which
//! keeps incrementally extended solves identical to fresh ones.

use nalgebra::DMatrix;

/// Dot product with a fixed 4-lane accumulation order.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks_a = a.chunks_exact(4);
    let chunks_b = b.chunks_exact(4);
    let tail_a = chunks_a.remainder();
    let tail_b = chunks_b.remainder();
    for (x, y) in chunks_a.zip(chunks_b) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in tail_a.iter().zip(tail_b) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Cholesky {
    n: usize,
    /// Row `i` occupies `data[i(i+1)/2 .. (i+1)(i+2)/2]`.
    data: Vec<f64>,
}

impl Cholesky {
    pub fn new() -> Self {
        Cholesky::default()
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let start = i * (i + 1) / 2;
        &self.data[start..start + i + 1]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.row(i)[j]
        }
    }

    /// Appends the row of a new point with cross-covariances `cross` against
    /// the existing points and prior variance `diag`. Returns the offending
    /// squared pivot if it is not positive.
    pub fn push(&mut self, cross: &[f64], diag: f64) -> Result<(), f64> {
        assert_eq!(cross.len(), self.n, "cross-covariance length mismatch");
        let mut row = Vec::with_capacity(self.n + 1);
        self.extend_solve(&mut row, |i| cross[i]);
        self.push_solved(&row, diag)
    }

    /// Appends a row whose off-diagonal part `solved = L⁻¹ k` is already
    /// known, e.g. from [`Cholesky::extend_solve`].
    pub fn push_solved(&mut self, solved: &[f64], diag: f64) -> Result<(), f64> {
        assert_eq!(solved.len(), self.n, "solved row length mismatch");
        let pivot = diag - dot(solved, solved);
        if !(pivot > 0.0) || !pivot.is_finite() {
            return Err(pivot);
        }
        self.data.extend_from_slice(solved);
        self.data.push(pivot.sqrt());
        self.n += 1;
        Ok(())
    }

    /// Factors the symmetric matrix whose entries `entry(i, j)` (`j <= i`)
    /// are supplied on demand.
    pub fn factor(n: usize, entry: impl Fn(usize, usize) -> f64) -> Result<Self, (usize, f64)> {
        let mut chol = Cholesky {
            n: 0,
            data: Vec::with_capacity(n * (n + 1) / 2),
        };
        let mut cross = Vec::with_capacity(n);
        for i in 0..n {
            cross.clear();
            cross.extend((0..i).map(|j| entry(i, j)));
            chol.push(&cross, entry(i, i)).map_err(|p| (i, p))?;
        }
        Ok(chol)
    }

    /// Extends a partial forward solution `x` of `L x = b` to full length,
    /// reading the missing right-hand side entries from `b`.
    pub fn extend_solve(&self, x: &mut Vec<f64>, b: impl Fn(usize) -> f64) {
        for i in x.len()..self.n {
            let row = self.row(i);
            let value = (b(i) - dot(&row[..i], &x[..i])) / row[i];
            x.push(value);
        }
    }

    /// Solves `L x = b`.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut x = Vec::with_capacity(self.n);
        self.extend_solve(&mut x, |i| b[i]);
        x
    }

    /// Solves `Lᵀ x = b`.
    pub fn solve_upper(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut x = b.to_vec();
        for i in (0..self.n).rev() {
            x[i] /= self.row(i)[i];
            let xi = x[i];
            let row = self.row(i);
            for j in 0..i {
                x[j] -= row[j] * xi;
            }
        }
        x
    }

    /// Solves `L Lᵀ x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.solve_upper(&self.solve_lower(b))
    }

    pub fn to_lower(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// `L Lᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let l = self.to_lower();
        &l * l.transpose()
    }
}
