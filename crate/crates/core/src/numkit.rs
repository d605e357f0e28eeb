//! Dense f64 linear algebra, a counter-based RNG, and finite-difference
//! utilities shared by every other module.
//!
//! Everything here is deliberately small: row-major `Matrix`, flat `Vector`,
//! and a splittable `Rng` whose output is a pure function of
//! `(seed, stream, draw index)` so that parallel experiment sweeps are
//! reproducible regardless of scheduling.
//!
//! Shape mismatches are programmer errors and panic via `assert!`; operational
//! failures (bad config values, corrupt files, divergence) use `crate::Error`.

use serde::{Deserialize, Serialize};

// ── Matrix ───────────────────────────────────────────────────────────────────

/// Row-major dense matrix of f64.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Default for Matrix {
    fn default() -> Self {
        Matrix::zeros(0, 0)
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(
            data.len(),
            rows * cols,
            "data length {} != {}x{}",
            data.len(),
            rows,
            cols
        );
        Matrix { rows, cols, data }
    }

    /// Build from nested row slices; handy in tests.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Matrix { rows: r, cols: c, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn fill(&mut self, v: f64) {
        self.data.fill(v);
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// self += alpha * other
    pub fn add_scaled(&mut self, other: &Matrix, alpha: f64) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        let mut c = Matrix::zeros(self.rows, other.cols);
        gemm_into(&mut c, 0.0, 1.0, self, false, other, false);
        c
    }

    /// self · otherᵀ
    pub fn matmul_nt(&self, other: &Matrix) -> Matrix {
        let mut c = Matrix::zeros(self.rows, other.rows);
        gemm_into(&mut c, 0.0, 1.0, self, false, other, true);
        c
    }

    /// selfᵀ · other
    pub fn matmul_tn(&self, other: &Matrix) -> Matrix {
        let mut c = Matrix::zeros(self.cols, other.cols);
        gemm_into(&mut c, 0.0, 1.0, self, true, other, false);
        c
    }
}

/// c = beta*c + alpha * op(a) · op(b), where op transposes when the flag is set.
///
/// Thin wrapper over `matrixmultiply::dgemm`; transposition is expressed via
/// strides so no copies are made.
pub fn gemm_into(
    c: &mut Matrix,
    beta: f64,
    alpha: f64,
    a: &Matrix,
    trans_a: bool,
    b: &Matrix,
    trans_b: bool,
) {
    let (am, ak) = if trans_a { (a.cols, a.rows) } else { (a.rows, a.cols) };
    let (bk, bn) = if trans_b { (b.cols, b.rows) } else { (b.rows, b.cols) };
    assert_eq!(ak, bk, "gemm inner dimension mismatch: {} vs {}", ak, bk);
    assert_eq!((c.rows, c.cols), (am, bn), "gemm output shape mismatch");
    let (rsa, csa) = if trans_a {
        (1isize, a.cols as isize)
    } else {
        (a.cols as isize, 1isize)
    };
    let (rsb, csb) = if trans_b {
        (1isize, b.cols as isize)
    } else {
        (b.cols as isize, 1isize)
    };
    unsafe {
        matrixmultiply::dgemm(
            am,
            ak,
            bn,
            alpha,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            beta,
            c.data.as_mut_ptr(),
            c.cols as isize,
            1,
        );
    }
}

// ── Vector ───────────────────────────────────────────────────────────────────

/// Flat f64 vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vector {
    data: Vec<f64>,
}

impl Vector {
    pub fn zeros(n: usize) -> Self {
        Vector { data: vec![0.0; n] }
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        Vector { data }
    }

    pub fn from_slice(s: &[f64]) -> Self {
        Vector { data: s.to_vec() }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        assert_eq!(self.len(), other.len(), "dot length mismatch");
        dot(&self.data, &other.data)
    }

    /// Euclidean norm.
    pub fn norm2(&self) -> f64 {
        norm2(&self.data)
    }

    /// self += alpha * other
    pub fn add_scaled(&mut self, other: &Vector, alpha: f64) {
        assert_eq!(self.len(), other.len(), "axpy length mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl std::ops::Index<usize> for Vector {
    type Output = f64;
    #[inline]
    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

impl std::ops::IndexMut<usize> for Vector {
    #[inline]
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.data[i]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

// ── Core operations ──────────────────────────────────────────────────────────

/// Standard matrix-vector product m·v.
pub fn matvec(m: &Matrix, v: &Vector) -> Vector {
    assert_eq!(
        m.cols(),
        v.len(),
        "matvec dimension mismatch: {}x{} · {}",
        m.rows(),
        m.cols(),
        v.len()
    );
    let mut out = Vector::zeros(m.rows());
    for i in 0..m.rows() {
        out[i] = dot(m.row(i), v.as_slice());
    }
    out
}

/// mᵀ·v without materializing the transpose.
pub fn matvec_t(m: &Matrix, v: &Vector) -> Vector {
    assert_eq!(
        m.rows(),
        v.len(),
        "matvec_t dimension mismatch: ({}x{})ᵀ · {}",
        m.rows(),
        m.cols(),
        v.len()
    );
    let mut out = Vector::zeros(m.cols());
    for i in 0..m.rows() {
        let vi = v[i];
        if vi != 0.0 {
            for (o, w) in out.as_mut_slice().iter_mut().zip(m.row(i)) {
                *o += vi * w;
            }
        }
    }
    out
}

/// Gram matrix mᵀm. Exactly symmetric: the upper triangle is computed and
/// mirrored entry-for-entry into the lower triangle.
pub fn gram(m: &Matrix) -> Matrix {
    let n = m.cols();
    let mut g = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let mut acc = 0.0;
            for r in 0..m.rows() {
                acc += m.get(r, i) * m.get(r, j);
            }
            g.set(i, j, acc);
            g.set(j, i, acc);
        }
    }
    g
}

/// Central-difference gradient of a scalar function: (f(x+h·eᵢ) − f(x−h·eᵢ)) / 2h.
pub fn finite_diff_grad(f: impl Fn(&Vector) -> f64, x: &Vector, h: f64) -> Vector {
    assert!(h > 0.0, "finite difference step must be positive");
    let mut grad = Vector::zeros(x.len());
    let mut probe = x.clone();
    for i in 0..x.len() {
        let xi = x[i];
        probe[i] = xi + h;
        let fp = f(&probe);
        probe[i] = xi - h;
        let fm = f(&probe);
        probe[i] = xi;
        grad[i] = (fp - fm) / (2.0 * h);
    }
    grad
}

// ── Rng ──────────────────────────────────────────────────────────────────────

/// Counter-based pseudorandom generator.
///
/// Construction (documented so the stream is reproducible from this text
/// alone): the generator is SplitMix64. The internal state starts at
/// `fin(seed) + fin(stream · GOLDEN + 0x5851F42D4C957F2D)` and each draw
/// advances it by the golden-ratio increment `GOLDEN = 0x9E3779B97F4A7C15`,
/// returning `fin(state)`, where `fin` is the SplitMix64 finalizer
/// (xor-shift 30 / mul 0xBF58476D1CE4E5B9 / xor-shift 27 /
/// mul 0x94D049BB133111EB / xor-shift 31).
///
/// Distinct `(seed, stream)` pairs start at hashed offsets of one underlying
/// period-2⁶⁴ sequence; collisions within the draw counts used here are
/// negligible.
///
/// Derived samplers:
/// - `uniform_open01`: `((u >> 12) + 0.5) · 2⁻⁵²`, strictly inside (0,1).
/// - `gaussian`: Box–Muller transform on a pair of open-interval uniforms;
///   `fill_gaussian` consumes both halves of each pair.
#[derive(Debug, Clone)]
pub struct Rng {
    state: u64,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn fin(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable 64-bit mix of two values; used to derive per-row / per-purpose seeds.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    fin(fin(a).wrapping_add(b.wrapping_mul(GOLDEN)))
}

impl Rng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let state = fin(seed).wrapping_add(fin(stream.wrapping_mul(GOLDEN).wrapping_add(0x5851_F42D_4C95_7F2D)));
        Rng { state }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        fin(self.state)
    }

    /// Uniform draw strictly inside (0, 1).
    #[inline]
    pub fn uniform_open01(&mut self) -> f64 {
        ((self.next_u64() >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
    }

    /// Uniform draw in [lo, hi).
    #[inline]
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform_open01()
    }

    /// Standard normal via Box–Muller (consumes two uniforms, returns the
    /// cosine half; the sine half is discarded for scalar draws).
    pub fn gaussian(&mut self) -> f64 {
        let u1 = self.uniform_open01();
        let u2 = self.uniform_open01();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Fill a slice with N(mean, std²) draws, using both Box–Muller halves.
    pub fn fill_gaussian(&mut self, out: &mut [f64], mean: f64, std: f64) {
        let mut i = 0;
        while i + 1 < out.len() {
            let u1 = self.uniform_open01();
            let u2 = self.uniform_open01();
            let r = (-2.0 * u1.ln()).sqrt();
            let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
            out[i] = mean + std * r * c;
            out[i + 1] = mean + std * r * s;
            i += 2;
        }
        if i < out.len() {
            out[i] = mean + std * self.gaussian();
        }
    }

    /// Uniform point on the unit sphere in `n` dimensions (normalized
    /// Gaussian; redrawn in the measure-zero case of a zero vector).
    pub fn unit_sphere(&mut self, n: usize) -> Vector {
        loop {
            let mut v = Vector::zeros(n);
            self.fill_gaussian(v.as_mut_slice(), 0.0, 1.0);
            let norm = v.norm2();
            if norm > 0.0 {
                for x in v.as_mut_slice() {
                    *x /= norm;
                }
                return v;
            }
        }
    }
}

// ── Tests ────────────────────────────────────────────────────────────────────
