//! Small dense matrices and vectors with stack storage.
//!
//! Every tensor in this crate lives on a Lie algebra of dimension at most
//! [`MAX_DIM`], and the simulation hot loop multiplies such matrices a few
//! dozen times per step. Heap-backed matrices made that loop allocation bound,
//! so the per-step work uses these fixed-capacity types and converts to
//! `nalgebra` only for eigen and least-squares work in `geometry`.

use nalgebra::DMatrix;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

/// Largest supported algebra (and matrix realization) dimension.
pub const MAX_DIM: usize = 6;
const CAP: usize = MAX_DIM * MAX_DIM;

/// Row-major matrix with at most `MAX_DIM` rows and columns.
#[derive(Clone, Copy, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    a: [f64; CAP],
}

/// Vector with at most `MAX_DIM` entries.
#[derive(Clone, Copy, PartialEq)]
pub struct Vect {
    n: usize,
    v: [f64; MAX_DIM],
}

impl std::fmt::Debug for Mat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "Mat {}x{}", self.rows, self.cols)?;
        for r in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|c| format!("{:+.6e}", self[(r, c)])).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl std::fmt::Debug for Vect {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.as_slice()).finish()
    }
}

#[inline(always)]
fn mm_kernel<const N: usize>(a: &[f64; CAP], b: &[f64; CAP], out: &mut [f64; CAP]) {
    for i in 0..N {
        let oi = i * MAX_DIM;
        let mut row = [0.0; N];
        for k in 0..N {
            let x = a[oi + k];
            let ok = k * MAX_DIM;
            for j in 0..N {
                row[j] += x * b[ok + j];
            }
        }
        out[oi..oi + N].copy_from_slice(&row);
    }
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows <= MAX_DIM && cols <= MAX_DIM, "matrix {rows}x{cols} exceeds MAX_DIM");
        Mat { rows, cols, a: [0.0; CAP] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.a[i * MAX_DIM + i] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Mat::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.a[r * MAX_DIM + c] = f(r, c);
            }
        }
        m
    }

    /// Builds from a row-major slice of length `rows * cols`.
    pub fn from_row_slice(rows: usize, cols: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), rows * cols);
        Mat::from_fn(rows, cols, |r, c| data[r * cols + c])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Row-major copy of the entries.
    pub fn to_row_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.rows * self.cols);
        for r in 0..self.rows {
            out.extend_from_slice(&self.a[r * MAX_DIM..r * MAX_DIM + self.cols]);
        }
        out
    }

    pub fn transpose(&self) -> Self {
        Mat::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn scale(&self, s: f64) -> Self {
        // padding stays zero, so whole-array loops are exact
        let mut m = *self;
        for x in m.a.iter_mut() {
            *x *= s;
        }
        m
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: f64, other: &Mat) {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (x, y) in self.a.iter_mut().zip(other.a.iter()) {
            *x += s * y;
        }
    }

    pub fn matmul(&self, b: &Mat) -> Mat {
        debug_assert_eq!(self.cols, b.rows, "matmul shape mismatch");
        // padding entries are zero, so a fixed-size kernel covering the
        // shape is exact and vectorizes better than shape-dependent loops
        let mut out = Mat::zeros(self.rows, b.cols);
        match self.rows.max(self.cols).max(b.cols) {
            0..=2 => mm_kernel::<2>(&self.a, &b.a, &mut out.a),
            3 => mm_kernel::<3>(&self.a, &b.a, &mut out.a),
            4 => mm_kernel::<4>(&self.a, &b.a, &mut out.a),
            _ => mm_kernel::<MAX_DIM>(&self.a, &b.a, &mut out.a),
        }
        out
    }

    /// `selfᵀ b` without forming the transpose.
    pub fn tr_matmul(&self, b: &Mat) -> Mat {
        debug_assert_eq!(self.rows, b.rows);
        let mut out = Mat::zeros(self.cols, b.cols);
        for k in 0..self.rows {
            let ok = k * MAX_DIM;
            for i in 0..self.cols {
                let x = self.a[ok + i];
                if x == 0.0 {
                    continue;
                }
                for j in 0..b.cols {
                    out.a[i * MAX_DIM + j] += x * b.a[ok + j];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &Vect) -> Vect {
        debug_assert_eq!(self.cols, v.n);
        let mut out = Vect::zeros(self.rows);
        for r in 0..self.rows {
            let o = r * MAX_DIM;
            let mut s = 0.0;
            for c in 0..self.cols {
                s += self.a[o + c] * v.v[c];
            }
            out.v[r] = s;
        }
        out
    }

    /// `selfᵀ v`
    pub fn tr_mul_vec(&self, v: &Vect) -> Vect {
        debug_assert_eq!(self.rows, v.n);
        let mut out = Vect::zeros(self.cols);
        for r in 0..self.rows {
            let x = v.v[r];
            if x == 0.0 {
                continue;
            }
            let o = r * MAX_DIM;
            for c in 0..self.cols {
                out.v[c] += self.a[o + c] * x;
            }
        }
        out
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        let mut m = 0.0f64;
        for r in 0..self.rows {
            for c in 0..self.cols {
                m = m.max(self.a[r * MAX_DIM + c].abs());
            }
        }
        m
    }

    pub fn norm_fro(&self) -> f64 {
        let mut s = 0.0;
        for r in 0..self.rows {
            for c in 0..self.cols {
                let x = self.a[r * MAX_DIM + c];
                s += x * x;
            }
        }
        s.sqrt()
    }

    /// Induced 1-norm (max column sum).
    pub fn norm_1(&self) -> f64 {
        let mut best = 0.0f64;
        for c in 0..self.cols {
            let mut s = 0.0;
            for r in 0..self.rows {
                s += self.a[r * MAX_DIM + c].abs();
            }
            best = best.max(s);
        }
        best
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn column(&self, c: usize) -> Vect {
        Vect::from_fn(self.rows, |r| self[(r, c)])
    }

    pub fn set_column(&mut self, c: usize, v: &Vect) {
        for r in 0..self.rows {
            self[(r, c)] = v[r];
        }
    }

    /// Copy of the block `[r0, r0+rows) x [c0, c0+cols)`.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Mat {
        Mat::from_fn(rows, cols, |r, c| self[(r0 + r, c0 + c)])
    }

    /// Matrix exponential by scaling and squaring with a Taylor kernel.
    ///
    /// Accurate to a few ulps for the step-sized arguments the integrators
    /// produce, and still correct (if slower) for large arguments.
    pub fn exp(&self) -> Mat {
        self.exp_pair().0
    }

    /// `(exp(X), exp(−X))` from one shared power series.
    ///
    /// Degree-13 Taylor split into even and odd parts in `Y = X²`, each
    /// evaluated Paterson–Stockmeyer style, so both signs cost six products.
    /// Inputs are scaled to 1-norm ≤ 0.4, where the truncation is below
    /// `0.4¹⁴/14! < 1e-16`.
    pub fn exp_pair(&self) -> (Mat, Mat) {
        debug_assert!(self.is_square());
        let n = self.rows;
        let norm = self.norm_1();
        if norm == 0.0 {
            return (Mat::identity(n), Mat::identity(n));
        }
        let mut squarings = 0u32;
        let mut x = *self;
        if norm > 0.4 {
            squarings = (norm / 0.4).log2().ceil() as u32;
            x = x.scale(0.5f64.powi(squarings as i32));
        }
        let id = Mat::identity(n);
        let y = x.matmul(&x);
        let y2 = y.matmul(&y);
        if squarings == 0 && y2.is_zero() {
            // nilpotent of order ≤ 3: the series stops at X²/2
            let even = id + y.scale(0.5);
            return (even + x, even - x);
        }
        let y3 = y2.matmul(&y);
        // c[k] = 1/k!
        let mut c = [1.0; 14];
        for k in 1..14 {
            c[k] = c[k - 1] / k as f64;
        }
        let comb = |w0: f64, w1: f64, w2: f64, w3: f64| {
            let mut m = id.scale(w0);
            m.axpy(w1, &y);
            m.axpy(w2, &y2);
            m.axpy(w3, &y3);
            m
        };
        let even = comb(c[0], c[2], c[4], c[6]) + y3.matmul(&comb(0.0, c[8], c[10], c[12]));
        let odd = comb(c[1], c[3], c[5], c[7]) + y3.matmul(&comb(0.0, c[9], c[11], c[13]));
        let xo = x.matmul(&odd);
        let mut plus = even + xo;
        let mut minus = even - xo;
        for _ in 0..squarings {
            plus = plus.matmul(&plus);
            minus = minus.matmul(&minus);
        }
        (plus, minus)
    }

    pub fn is_zero(&self) -> bool {
        self.max_abs() == 0.0
    }

    /// Principal logarithm of a matrix close to the identity.
    ///
    /// Returns `None` when `‖self − I‖₁ > 0.5`, where the Mercator series is
    /// no longer a trustworthy chart.
    pub fn log_near_identity(&self) -> Option<Mat> {
        debug_assert!(self.is_square());
        let n = self.rows;
        let x = *self - Mat::identity(n);
        let xn = x.norm_1();
        if xn > 0.5 {
            return None;
        }
        let mut out = Mat::zeros(n, n);
        let mut power = x;
        let mut bound = xn;
        for k in 1..=80 {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            out.axpy(sign / k as f64, &power);
            bound *= xn;
            if bound < 1e-18 {
                break;
            }
            power = power.matmul(&x);
        }
        Some(out)
    }

    /// Inverse by Gauss-Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Option<Mat> {
        debug_assert!(self.is_square());
        let n = self.rows;
        let mut a = *self;
        let mut inv = Mat::identity(n);
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        for col in 0..n {
            let mut piv = col;
            for r in col + 1..n {
                if a[(r, col)].abs() > a[(piv, col)].abs() {
                    piv = r;
                }
            }
            if a[(piv, col)].abs() <= 1e-14 * scale {
                return None;
            }
            if piv != col {
                for c in 0..n {
                    a.a.swap(piv * MAX_DIM + c, col * MAX_DIM + c);
                    inv.a.swap(piv * MAX_DIM + c, col * MAX_DIM + c);
                }
            }
            let p = 1.0 / a[(col, col)];
            for c in 0..n {
                a[(col, c)] *= p;
                inv[(col, c)] *= p;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a[(r, col)];
                if f == 0.0 {
                    continue;
                }
                for c in 0..n {
                    a.a[r * MAX_DIM + c] -= f * a.a[col * MAX_DIM + c];
                    inv.a[r * MAX_DIM + c] -= f * inv.a[col * MAX_DIM + c];
                }
            }
        }
        Some(inv)
    }

    /// Solves `self x = b` for square `self`.
    pub fn solve(&self, b: &Vect) -> Option<Vect> {
        debug_assert!(self.is_square() && b.n == self.rows);
        let n = self.rows;
        let mut a = *self;
        let mut x = *b;
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        for col in 0..n {
            let mut piv = col;
            for r in col + 1..n {
                if a[(r, col)].abs() > a[(piv, col)].abs() {
                    piv = r;
                }
            }
            if a[(piv, col)].abs() <= 1e-14 * scale {
                return None;
            }
            if piv != col {
                for c in col..n {
                    a.a.swap(piv * MAX_DIM + c, col * MAX_DIM + c);
                }
                x.v.swap(piv, col);
            }
            for r in col + 1..n {
                let f = a[(r, col)] / a[(col, col)];
                if f == 0.0 {
                    continue;
                }
                for c in col..n {
                    a.a[r * MAX_DIM + c] -= f * a.a[col * MAX_DIM + c];
                }
                x.v[r] -= f * x.v[col];
            }
        }
        for r in (0..n).rev() {
            let s: f64 = (r + 1..n).map(|c| a[(r, c)] * x.v[c]).sum();
            x.v[r] = (x.v[r] - s) / a[(r, r)];
        }
        Some(x)
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |r, c| self[(r, c)])
    }

    pub fn from_dmatrix(m: &DMatrix<f64>) -> Mat {
        Mat::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)])
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.a[r * MAX_DIM + c]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.a[r * MAX_DIM + c]
    }
}

impl Add for Mat {
    type Output = Mat;
    fn add(mut self, rhs: Mat) -> Mat {
        self.axpy(1.0, &rhs);
        self
    }
}

impl Sub for Mat {
    type Output = Mat;
    fn sub(mut self, rhs: Mat) -> Mat {
        self.axpy(-1.0, &rhs);
        self
    }
}

impl AddAssign for Mat {
    fn add_assign(&mut self, rhs: Mat) {
        self.axpy(1.0, &rhs);
    }
}

impl SubAssign for Mat {
    fn sub_assign(&mut self, rhs: Mat) {
        self.axpy(-1.0, &rhs);
    }
}

impl Neg for Mat {
    type Output = Mat;
    fn neg(self) -> Mat {
        self.scale(-1.0)
    }
}

impl Mul for Mat {
    type Output = Mat;
    fn mul(self, rhs: Mat) -> Mat {
        self.matmul(&rhs)
    }
}

impl Mul<Vect> for Mat {
    type Output = Vect;
    fn mul(self, rhs: Vect) -> Vect {
        self.mul_vec(&rhs)
    }
}

impl Vect {
    pub fn zeros(n: usize) -> Self {
        assert!(n <= MAX_DIM, "vector of length {n} exceeds MAX_DIM");
        Vect { n, v: [0.0; MAX_DIM] }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize) -> f64) -> Self {
        let mut out = Vect::zeros(n);
        for i in 0..n {
            out.v[i] = f(i);
        }
        out
    }

    pub fn from_slice(s: &[f64]) -> Self {
        Vect::from_fn(s.len(), |i| s[i])
    }

    /// Unit vector `e_i` in dimension `n`.
    pub fn basis(n: usize, i: usize) -> Self {
        let mut out = Vect::zeros(n);
        out.v[i] = 1.0;
        out
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.v[..self.n]
    }

    pub fn dot(&self, o: &Vect) -> f64 {
        debug_assert_eq!(self.n, o.n);
        let mut s = 0.0;
        for i in 0..self.n {
            s += self.v[i] * o.v[i];
        }
        s
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn max_abs(&self) -> f64 {
        self.as_slice().iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn scale(&self, s: f64) -> Vect {
        let mut out = *self;
        for i in 0..self.n {
            out.v[i] *= s;
        }
        out
    }

    pub fn axpy(&mut self, s: f64, o: &Vect) {
        debug_assert_eq!(self.n, o.n);
        for i in 0..self.n {
            self.v[i] += s * o.v[i];
        }
    }

    /// First `d` entries.
    pub fn head(&self, d: usize) -> Vect {
        Vect::from_fn(d, |i| self.v[i])
    }

    /// Embeds into dimension `n` by zero padding.
    pub fn padded(&self, n: usize) -> Vect {
        let mut out = Vect::zeros(n);
        out.v[..self.n].copy_from_slice(&self.v[..self.n]);
        out
    }

    /// Outer product `self ⊗ o` as a matrix.
    pub fn outer(&self, o: &Vect) -> Mat {
        Mat::from_fn(self.n, o.n, |r, c| self.v[r] * o.v[c])
    }
}

impl Index<usize> for Vect {
    type Output = f64;
    #[inline]
    fn index(&self, i: usize) -> &f64 {
        debug_assert!(i < self.n);
        &self.v[i]
    }
}

impl IndexMut<usize> for Vect {
    #[inline]
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        debug_assert!(i < self.n);
        &mut self.v[i]
    }
}

impl Add for Vect {
    type Output = Vect;
    fn add(mut self, rhs: Vect) -> Vect {
        self.axpy(1.0, &rhs);
        self
    }
}

impl Sub for Vect {
    type Output = Vect;
    fn sub(mut self, rhs: Vect) -> Vect {
        self.axpy(-1.0, &rhs);
        self
    }
}

impl AddAssign for Vect {
    fn add_assign(&mut self, rhs: Vect) {
        self.axpy(1.0, &rhs);
    }
}

impl SubAssign for Vect {
    fn sub_assign(&mut self, rhs: Vect) {
        self.axpy(-1.0, &rhs);
    }
}

impl Neg for Vect {
    type Output = Vect;
    fn neg(self) -> Vect {
        self.scale(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rot(theta: f64) -> Mat {
        Mat::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()])
    }

    #[test]
    fn exp_of_rotation_generator() {
        for &t in &[1e-3, 0.3, 2.0, 17.0] {
            let g = Mat::from_row_slice(2, 2, &[0.0, -t, t, 0.0]);
            assert!((g.exp() - rot(t)).max_abs() < 1e-13 * (1.0 + t));
        }
    }

    #[test]
    fn exp_of_nilpotent_is_polynomial() {
        let n = Mat::from_row_slice(3, 3, &[0.0, 1.0, 2.0, 0.0, 0.0, 3.0, 0.0, 0.0, 0.0]);
        let expected = Mat::identity(3) + n + n.matmul(&n).scale(0.5);
        assert!((n.exp() - expected).max_abs() < 1e-15);
    }

    #[test]
    fn log_inverts_exp_near_identity() {
        let x = Mat::from_row_slice(3, 3, &[0.01, -0.2, 0.05, 0.2, 0.0, 0.1, -0.05, -0.1, 0.03]);
        let back = x.exp().log_near_identity().unwrap();
        assert!((back - x).max_abs() < 1e-14);
        assert!(Mat::identity(2).scale(3.0).log_near_identity().is_none());
    }

    #[test]
    fn inverse_with_pivoting() {
        let m = Mat::from_row_slice(3, 3, &[0.0, 2.0, 1.0, 1.0, 0.0, 0.0, 3.0, 1.0, 4.0]);
        let inv = m.inverse().unwrap();
        assert!((m.matmul(&inv) - Mat::identity(3)).max_abs() < 1e-14);
        assert!(Mat::zeros(2, 2).inverse().is_none());
    }

    #[test]
    fn transposed_products_match() {
        let a = Mat::from_fn(3, 2, |r, c| (r * 2 + c) as f64 - 1.5);
        let b = Mat::from_fn(3, 4, |r, c| (r as f64 + 0.5) * (c as f64 - 1.0));
        assert!((a.tr_matmul(&b) - a.transpose().matmul(&b)).max_abs() < 1e-15);
        let v = Vect::from_slice(&[1.0, -2.0, 0.5]);
        assert_eq!(a.tr_mul_vec(&v), a.transpose().mul_vec(&v));
    }
}
