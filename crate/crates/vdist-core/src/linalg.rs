//! Dense complex linear algebra and state plumbing shared by all modules.
//!
//! Everything here is sized for desk-scale experiments: qubit registers up to
//! n = 6 (dimension 64) and their vacuum-extended lossy counterparts up to
//! 3^8. Storage is dense and row-major; no sparsity or tensor factorization
//! is attempted.
//!
//! Conventions fixed once and used everywhere:
//!
//! * per-qubit basis order is (|0⟩, |1⟩, |vac⟩), so |vac⟩ ≙ (0,0,1)ᵀ on the
//!   three-dimensional local space,
//! * tensor factors are row-major with qubit 1 as the leftmost (most
//!   significant) factor,
//! * qubit indices in public APIs are 1-based, matching how the dilution
//!   formulas are usually written.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex;

use crate::error::{CoreError, Result};

/// Complex scalar used throughout the crate.
pub type C64 = Complex<f64>;

/// Hermiticity tolerance used by density-operator constructors.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Eigenvalues in `[-PSD_CLAMP, 0)` are treated as floating-point dust and
/// clamped to zero; anything more negative is a genuine invariant violation.
pub const PSD_CLAMP: f64 = 1e-10;
/// Unitarity tolerance (max-abs entrywise deviation of U†U from identity).
pub const UNITARITY_TOL: f64 = 1e-10;
/// Largest total dimension the dense kernel accepts (3^8).
pub const MAX_TOTAL_DIM: usize = 6561;

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMat {
    /// Zero matrix of the given shape.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![C64::new(0.0, 0.0); rows * cols] }
    }

    /// Identity matrix of dimension `dim`.
    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    /// Build a matrix by evaluating `f(row, col)`.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Build from a row-major slice of real entries (test convenience).
    pub fn from_real_rows(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(CoreError::DimensionMismatch { expected: rows * cols, found: entries.len() });
        }
        Ok(Self {
            rows,
            cols,
            data: entries.iter().map(|&x| C64::new(x, 0.0)).collect(),
        })
    }

    /// Diagonal matrix from real entries.
    pub fn diag(entries: &[f64]) -> Self {
        let d = entries.len();
        let mut m = Self::zeros(d, d);
        for (i, &x) in entries.iter().enumerate() {
            m[(i, i)] = C64::new(x, 0.0);
        }
        m
    }

    /// Rank-one projector |v⟩⟨v| (the vector need not be normalized).
    pub fn outer(v: &[C64]) -> Self {
        let d = v.len();
        Self::from_fn(d, d, |i, j| v[i] * v[j].conj())
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

    /// Row-major access to the raw data.
    pub fn data(&self) -> &[C64] {
        &self.data
    }

    /// Matrix sum; panics on shape mismatch (internal arithmetic only).
    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    /// Matrix difference; panics on shape mismatch.
    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    /// Scalar multiple.
    pub fn scale(&self, factor: C64) -> Self {
        let data = self.data.iter().map(|a| a * factor).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    /// Scalar multiple by a real factor.
    pub fn scale_re(&self, factor: f64) -> Self {
        self.scale(C64::new(factor, 0.0))
    }

    /// Matrix product `self · other`; panics on shape mismatch.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        // i-k-j loop order keeps the inner accumulation streaming over
        // contiguous rows of `other`, which matters at dimension 729.
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                let orow = &other.data[k * other.cols..(k + 1) * other.cols];
                let urow = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (u, &b) in urow.iter_mut().zip(orow) {
                    *u += a * b;
                }
            }
        }
        out
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    /// Matrix trace.
    pub fn trace(&self) -> C64 {
        assert!(self.is_square());
        (0..self.rows).map(|i| self[(i, i)]).sum()
    }

    /// tr[self · other] without forming the product.
    pub fn trace_product(&self, other: &Self) -> C64 {
        assert_eq!(self.cols, other.rows);
        assert_eq!(self.rows, other.cols);
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..self.rows {
            for k in 0..self.cols {
                acc += self.data[i * self.cols + k] * other.data[k * other.cols + i];
            }
        }
        acc
    }

    /// Apply to a vector: `self · v`.
    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len());
        let mut out = vec![C64::new(0.0, 0.0); self.rows];
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            out[i] = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
        out
    }

    /// Largest entrywise modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Squared Frobenius norm Σ|a_ij|².
    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Largest deviation from Hermiticity, max |a_ij - conj(a_ji)|.
    pub fn hermiticity_deviation(&self) -> f64 {
        assert!(self.is_square());
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in i..self.cols {
                let dev = (self[(i, j)] - self[(j, i)].conj()).norm();
                worst = worst.max(dev);
            }
        }
        worst
    }

    /// Replace the matrix by its Hermitian part (A + A†)/2, removing
    /// floating-point asymmetry accumulated by long map compositions.
    pub fn hermitize(&mut self) {
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let avg = 0.5 * (self[(i, j)] + self[(j, i)].conj());
                self[(i, j)] = avg;
                self[(j, i)] = avg.conj();
            }
            let d = self[(i, i)];
            self[(i, i)] = C64::new(d.re, 0.0);
        }
    }
}

impl core::ops::Index<(usize, usize)> for CMat {
    type Output = C64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for CMat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Kronecker product a ⊗ b; output dimensions multiply.
pub fn tensor(a: &CMat, b: &CMat) -> CMat {
    let (ra, ca) = (a.rows(), a.cols());
    let (rb, cb) = (b.rows(), b.cols());
    let mut out = CMat::zeros(ra * rb, ca * cb);
    for i in 0..ra {
        for j in 0..ca {
            let f = a[(i, j)];
            if f == C64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..rb {
                for l in 0..cb {
                    out[(i * rb + k, j * cb + l)] = f * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Registers of n qubits with local dimension 2 (Pauli runs) or 3 (loss runs,
/// where each qubit basis is extended by |vac⟩).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HilbertSpace {
    n_qubits: usize,
    local_dim: usize,
}

impl HilbertSpace {
    /// n-qubit space with local dimension 2.
    pub fn qubits(n_qubits: usize) -> Result<Self> {
        Self::new(n_qubits, 2)
    }

    /// Vacuum-extended n-qubit space with local dimension 3.
    pub fn lossy(n_qubits: usize) -> Result<Self> {
        Self::new(n_qubits, 3)
    }

    fn new(n_qubits: usize, local_dim: usize) -> Result<Self> {
        if n_qubits == 0 {
            return Err(CoreError::EmptyInput);
        }
        let space = Self { n_qubits, local_dim };
        let dim = space.checked_dim()?;
        if dim > MAX_TOTAL_DIM {
            return Err(CoreError::ResourceLimit { dim, max: MAX_TOTAL_DIM });
        }
        Ok(space)
    }

    fn checked_dim(&self) -> Result<usize> {
        let mut dim = 1usize;
        for _ in 0..self.n_qubits {
            dim = dim
                .checked_mul(self.local_dim)
                .ok_or(CoreError::ResourceLimit { dim: usize::MAX, max: MAX_TOTAL_DIM })?;
        }
        Ok(dim)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    /// local_dim^n_qubits.
    pub fn total_dim(&self) -> usize {
        self.local_dim.pow(self.n_qubits as u32)
    }

    /// Space with one qubit removed (for partial traces).
    pub fn drop_one(&self) -> Result<Self> {
        Self::new(self.n_qubits - 1, self.local_dim)
    }
}

/// Density operator: Hermitian PSD matrix on a [`HilbertSpace`], tracking its
/// trace (which may be < 1 in lossy pipelines before renormalization).
#[derive(Debug, Clone)]
pub struct DensityOp {
    space: HilbertSpace,
    mat: CMat,
    trace_hint: f64,
}

impl DensityOp {
    /// Construct with full invariant validation: shape, Hermiticity within
    /// `1e-12`, and positive semidefiniteness (min eigenvalue ≥ -1e-10).
    ///
    /// The PSD check performs a full eigendecomposition, so this constructor
    /// is meant for states entering from outside (configs, tests, generators),
    /// not for per-layer pipeline internals, which preserve positivity by
    /// construction.
    pub fn new(space: HilbertSpace, mat: CMat) -> Result<Self> {
        let op = Self::new_unvalidated_psd(space, mat)?;
        let (evals, _) = hermitian_eig(op.mat())?;
        let min = evals.last().copied().unwrap_or(0.0);
        if min < -PSD_CLAMP {
            return Err(CoreError::NotPositive { min_eigenvalue: min });
        }
        Ok(op)
    }

    /// Construct checking shape and Hermiticity only.
    ///
    /// Used by channel and pipeline internals whose outputs are positive by
    /// construction (compositions of completely positive maps on validated
    /// inputs); the crate-level invariant tests exercise the PSD property on
    /// random channel outputs separately.
    pub fn new_unvalidated_psd(space: HilbertSpace, mat: CMat) -> Result<Self> {
        let dim = space.total_dim();
        if mat.rows() != dim || mat.cols() != dim {
            return Err(CoreError::DimensionMismatch { expected: dim, found: mat.rows() });
        }
        let dev = mat.hermiticity_deviation();
        if dev > HERMITICITY_TOL {
            return Err(CoreError::NotHermitian { deviation: dev });
        }
        let tr = mat.trace();
        if tr.im.abs() > HERMITICITY_TOL {
            return Err(CoreError::NotHermitian { deviation: tr.im.abs() });
        }
        Ok(Self { space, mat, trace_hint: tr.re })
    }

    /// Pure state |ψ⟩⟨ψ| from a (normalized) state vector.
    pub fn pure(space: HilbertSpace, psi: &[C64]) -> Result<Self> {
        if psi.len() != space.total_dim() {
            return Err(CoreError::DimensionMismatch { expected: space.total_dim(), found: psi.len() });
        }
        Self::new_unvalidated_psd(space, CMat::outer(psi))
    }

    /// Computational basis state |index⟩⟨index|.
    pub fn basis_state(space: HilbertSpace, index: usize) -> Result<Self> {
        let dim = space.total_dim();
        if index >= dim {
            return Err(CoreError::QubitOutOfRange { index, n_qubits: dim });
        }
        let mut psi = vec![C64::new(0.0, 0.0); dim];
        psi[index] = C64::new(1.0, 0.0);
        Self::pure(space, &psi)
    }

    pub fn space(&self) -> HilbertSpace {
        self.space
    }

    pub fn mat(&self) -> &CMat {
        &self.mat
    }

    pub fn dim(&self) -> usize {
        self.space.total_dim()
    }

    /// The tracked trace; equals the numerical trace within `1e-12`.
    pub fn trace_hint(&self) -> f64 {
        self.trace_hint
    }

    /// Trace-normalized copy.
    pub fn renormalized(&self) -> Result<Self> {
        if self.trace_hint.abs() < 1e-300 {
            return Err(CoreError::DegenerateInput);
        }
        Self::new_unvalidated_psd(self.space, self.mat.scale_re(1.0 / self.trace_hint))
    }

    /// Purity tr[ρ²] / (tr ρ)².
    pub fn purity(&self) -> f64 {
        self.mat.trace_product(&self.mat).re / (self.trace_hint * self.trace_hint)
    }

    /// Smallest eigenvalue (full decomposition; used by validation paths).
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let (evals, _) = hermitian_eig(&self.mat)?;
        Ok(evals.last().copied().unwrap_or(0.0))
    }
}

/// Unitary operator with construction-time unitarity validation.
#[derive(Debug, Clone)]
pub struct UnitaryOp {
    mat: CMat,
}

impl UnitaryOp {
    /// Validates U†U = 1 within `1e-10` max-abs.
    pub fn new(mat: CMat) -> Result<Self> {
        if !mat.is_square() {
            return Err(CoreError::DimensionMismatch { expected: mat.rows(), found: mat.cols() });
        }
        let gram = mat.dagger().matmul(&mat);
        let dev = gram.max_abs_diff(&CMat::identity(mat.rows()));
        if dev > UNITARITY_TOL {
            return Err(CoreError::NotUnitary { deviation: dev });
        }
        Ok(Self { mat })
    }

    pub fn identity(dim: usize) -> Self {
        Self { mat: CMat::identity(dim) }
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn mat(&self) -> &CMat {
        &self.mat
    }

    /// Unitary conjugation U X U†.
    pub fn conjugate(&self, x: &CMat) -> CMat {
        self.mat.matmul(x).matmul(&self.mat.dagger())
    }

    /// Composition `self · other` (apply `other` first).
    pub fn compose(&self, other: &Self) -> Self {
        // Product of unitaries stays unitary; revalidation would only pick up
        // float dust, so compose directly.
        Self { mat: self.mat.matmul(&other.mat) }
    }
}

/// Hermitian eigendecomposition by cyclic complex Jacobi rotations.
///
/// Returns eigenvalues in descending order and the unitary of eigenvectors as
/// columns, so that `m = V diag(λ) V†`. Jacobi is quadratically convergent
/// and, at the dimensions this crate handles (≤ 3^8), both fast enough and
/// very accurate for degenerate clusters, which the error-spectrum analysis
/// relies on.
pub fn hermitian_eig(m: &CMat) -> Result<(Vec<f64>, UnitaryOp)> {
    if !m.is_square() {
        return Err(CoreError::DimensionMismatch { expected: m.rows(), found: m.cols() });
    }
    let dev = m.hermiticity_deviation();
    if dev > 1e-9 {
        return Err(CoreError::NotHermitian { deviation: dev });
    }
    let d = m.rows();
    let mut a = m.clone();
    a.hermitize();
    let mut v = CMat::identity(d);

    let scale = a.frobenius_sq().max(1e-300);
    let tol_sq = scale * 1e-28; // off-diagonal mass target, (1e-14 relative)²

    let max_sweeps = 60;
    let mut converged = false;
    for _ in 0..max_sweeps {
        let mut off_sq = 0.0;
        for p in 0..d {
            for q in (p + 1)..d {
                off_sq += 2.0 * a[(p, q)].norm_sqr();
            }
        }
        if off_sq <= tol_sq {
            converged = true;
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let g = a[(p, q)];
                let x = g.norm();
                if x == 0.0 {
                    continue;
                }
                let phase = g / x; // e^{iφ} of the pivot entry
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                // Unitary pivot J (identity outside rows/cols p,q):
                //   J[p][p] =  c, J[p][q] = -s·e^{iφ}
                //   J[q][p] =  s·e^{-iφ}, J[q][q] = c
                // Annihilating the (p,q) entry of J†AJ requires
                //   t² - 2τt - 1 = 0, τ = (a_qq - a_pp)/(2|g|),
                // and we take the smaller-magnitude root for stability.
                let tau = (aqq - app) / (2.0 * x);
                let t = {
                    let r = libm::sqrt(1.0 + tau * tau);
                    if tau >= 0.0 {
                        -1.0 / (tau + r)
                    } else {
                        1.0 / (-tau + r)
                    }
                };
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = t * c;
                let se_pos = phase.conj().scale(s); // s·e^{-iφ}
                let se_neg = phase.scale(s); // s·e^{+iφ}

                // Row update (J†A): rows p and q.
                for j in 0..d {
                    let apj = a[(p, j)];
                    let aqj = a[(q, j)];
                    a[(p, j)] = apj.scale(c) + se_neg * aqj;
                    a[(q, j)] = aqj.scale(c) - se_pos * apj;
                }
                // Column update (AJ): columns p and q.
                for i in 0..d {
                    let aip = a[(i, p)];
                    let aiq = a[(i, q)];
                    a[(i, p)] = aip.scale(c) + se_pos * aiq;
                    a[(i, q)] = aiq.scale(c) - se_neg * aip;
                }
                // Accumulate eigenvectors: V ← V·J.
                for i in 0..d {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = vip.scale(c) + se_pos * viq;
                    v[(i, q)] = viq.scale(c) - se_neg * vip;
                }
            }
        }
    }
    if !converged {
        // Final re-check: the last sweep may have reached tolerance.
        let mut off_sq = 0.0;
        for p in 0..d {
            for q in (p + 1)..d {
                off_sq += 2.0 * a[(p, q)].norm_sqr();
            }
        }
        if off_sq > tol_sq {
            return Err(CoreError::NoConvergence { iterations: max_sweeps });
        }
    }

    let mut order: Vec<usize> = (0..d).collect();
    let evals_raw: Vec<f64> = (0..d).map(|i| a[(i, i)].re).collect();
    order.sort_by(|&i, &j| evals_raw[j].partial_cmp(&evals_raw[i]).unwrap());
    let evals: Vec<f64> = order.iter().map(|&i| evals_raw[i]).collect();
    let vecs = CMat::from_fn(d, d, |i, j| v[(i, order[j])]);
    Ok((evals, UnitaryOp { mat: vecs }))
}

/// ρ^M for a density operator, by eigendecomposition.
///
/// Eigenvalues in `[-1e-10, 0)` are clamped to zero before powering (they are
/// floating-point dust on a PSD matrix); more negative eigenvalues are a hard
/// error. `M = 1` returns the input unchanged. The independent
/// repeated-squaring route is [`matrix_power_by_squaring`]; tests hold the
/// two to ≤ 1e-10 of each other.
pub fn matrix_power(m: &DensityOp, order: u32) -> Result<DensityOp> {
    if order == 0 {
        return Err(CoreError::InvalidOrder);
    }
    if order == 1 {
        return Ok(m.clone());
    }
    let (evals, v) = hermitian_eig(m.mat())?;
    let mut powered = Vec::with_capacity(evals.len());
    for &lambda in &evals {
        if lambda < -PSD_CLAMP {
            return Err(CoreError::NotPositive { min_eigenvalue: lambda });
        }
        let clamped = if lambda < 0.0 { 0.0 } else { lambda };
        powered.push(pow_f64(clamped, order));
    }
    let mat = v.conjugate(&CMat::diag(&powered));
    let mut mat = mat;
    mat.hermitize();
    DensityOp::new_unvalidated_psd(m.space(), mat)
}

/// ρ^M by binary powering (repeated squaring), no eigendecomposition.
///
/// This is the distillation hot path; [`matrix_power`] is the reference
/// route. Negative floating-point dust is handled implicitly (squares are
/// PSD up to roundoff).
pub fn matrix_power_by_squaring(m: &DensityOp, order: u32) -> Result<DensityOp> {
    if order == 0 {
        return Err(CoreError::InvalidOrder);
    }
    if order == 1 {
        return Ok(m.clone());
    }
    let mut result: Option<CMat> = None;
    let mut base = m.mat().clone();
    let mut k = order;
    loop {
        if k & 1 == 1 {
            result = Some(match result {
                None => base.clone(),
                Some(r) => r.matmul(&base),
            });
        }
        k >>= 1;
        if k == 0 {
            break;
        }
        base = base.matmul(&base);
    }
    let mut mat = result.expect("order >= 1");
    mat.hermitize();
    DensityOp::new_unvalidated_psd(m.space(), mat)
}

fn pow_f64(base: f64, exp: u32) -> f64 {
    let mut acc = 1.0;
    let mut b = base;
    let mut e = exp;
    while e > 0 {
        if e & 1 == 1 {
            acc *= b;
        }
        b *= b;
        e >>= 1;
    }
    acc
}

/// Insert digit `s` at position `pos` (0-based from the left) into an index
/// over `n-1` remaining positions, producing an index over `n` positions.
#[inline]
fn insert_digit(reduced: usize, pos: usize, s: usize, n: usize, ld: usize) -> usize {
    let stride = ld.pow((n - 1 - pos) as u32);
    let high = reduced / stride;
    let low = reduced % stride;
    (high * ld + s) * stride + low
}

/// Partial trace over qubit `j` (1-based); the result lives on n−1 qubits
/// with the same local dimension and preserves the trace.
pub fn partial_trace(rho: &DensityOp, j: usize) -> Result<DensityOp> {
    let n = rho.space().n_qubits();
    if j == 0 || j > n {
        return Err(CoreError::QubitOutOfRange { index: j, n_qubits: n });
    }
    if n == 1 {
        // Tracing the only qubit yields the scalar trace; a 0-qubit space is
        // not representable, so callers use `trace_hint` for that case.
        return Err(CoreError::QubitOutOfRange { index: j, n_qubits: n });
    }
    let ld = rho.space().local_dim();
    let out_space = rho.space().drop_one()?;
    let out_dim = out_space.total_dim();
    let pos = j - 1;
    let mut out = CMat::zeros(out_dim, out_dim);
    for r in 0..out_dim {
        for c in 0..out_dim {
            let mut acc = C64::new(0.0, 0.0);
            for s in 0..ld {
                let rr = insert_digit(r, pos, s, n, ld);
                let cc = insert_digit(c, pos, s, n, ld);
                acc += rho.mat()[(rr, cc)];
            }
            out[(r, c)] = acc;
        }
    }
    DensityOp::new_unvalidated_psd(out_space, out)
}

/// Projector P onto the qubit sector of a vacuum-extended space: the span of
/// basis kets containing no |vac⟩ factor. Diagonal with rank 2^n.
pub fn qubit_sector_projector(space: HilbertSpace) -> Result<CMat> {
    if space.local_dim() != 3 {
        return Err(CoreError::WrongLocalDim { expected: 3, found: space.local_dim() });
    }
    let dim = space.total_dim();
    let n = space.n_qubits();
    let mut p = CMat::zeros(dim, dim);
    for idx in 0..dim {
        if !index_has_vacuum(idx, n) {
            p[(idx, idx)] = C64::new(1.0, 0.0);
        }
    }
    Ok(p)
}

/// Whether a base-3 index contains the |vac⟩ digit (2) in any position.
#[inline]
pub(crate) fn index_has_vacuum(mut idx: usize, n: usize) -> bool {
    for _ in 0..n {
        if idx % 3 == 2 {
            return true;
        }
        idx /= 3;
    }
    false
}

/// Map a 2^n basis index (bits, qubit 1 most significant) to the base-3 index
/// of the same bit pattern in the vacuum-extended space.
#[inline]
pub(crate) fn qubit_index_to_lossy(bits: usize, n: usize) -> usize {
    let mut t = 0usize;
    for k in 0..n {
        let bit = (bits >> (n - 1 - k)) & 1;
        t = t * 3 + bit;
    }
    t
}

/// Embed a 2^n-dimensional operator into the 3^n vacuum-extended space: the
/// result acts as `op` on the qubit sector and as zero on its complement.
pub fn embed_qubit_op(op: &CMat, space: HilbertSpace) -> Result<CMat> {
    if space.local_dim() != 3 {
        return Err(CoreError::WrongLocalDim { expected: 3, found: space.local_dim() });
    }
    let n = space.n_qubits();
    let qdim = 1usize << n;
    if op.rows() != qdim || op.cols() != qdim {
        return Err(CoreError::DimensionMismatch { expected: qdim, found: op.rows() });
    }
    let dim = space.total_dim();
    let mut out = CMat::zeros(dim, dim);
    for r in 0..qdim {
        let tr = qubit_index_to_lossy(r, n);
        for c in 0..qdim {
            let tc = qubit_index_to_lossy(c, n);
            out[(tr, tc)] = op[(r, c)];
        }
    }
    Ok(out)
}

/// Embed a 2^n density operator into the 3^n space (qubit sector).
pub fn embed_density(rho: &DensityOp, space: HilbertSpace) -> Result<DensityOp> {
    let mat = embed_qubit_op(rho.mat(), space)?;
    DensityOp::new_unvalidated_psd(space, mat)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn tensor_identity_dims_multiply() {
        let i2 = CMat::identity(2);
        let i4 = tensor(&i2, &i2);
        assert_eq!(i4.max_abs_diff(&CMat::identity(4)), 0.0);
        let a = CMat::zeros(3, 3);
        let b = CMat::zeros(3, 3);
        let t = tensor(&a, &b);
        assert_eq!((t.rows(), t.cols()), (9, 9));
    }

    #[test]
    fn tensor_zz_on_00_is_plus_one() {
        let z = CMat::from_real_rows(2, 2, &[1.0, 0.0, 0.0, -1.0]).unwrap();
        let zz = tensor(&z, &z);
        let e00 = [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)];
        let out = zz.matvec(&e00);
        assert!((out[0] - c(1.0, 0.0)).norm() < 1e-15);
        assert!(out[1..].iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn eig_diagonal_orders_descending() {
        let m = CMat::diag(&[0.4, 0.6]);
        let (evals, _) = hermitian_eig(&m).unwrap();
        assert!((evals[0] - 0.6).abs() < 1e-15);
        assert!((evals[1] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn eig_rank_one_plus_state() {
        let s = 1.0 / libm::sqrt(2.0);
        let plus = [c(s, 0.0), c(s, 0.0)];
        let m = CMat::outer(&plus);
        let (evals, v) = hermitian_eig(&m).unwrap();
        assert!((evals[0] - 1.0).abs() < 1e-12);
        assert!(evals[1].abs() < 1e-12);
        // First eigenvector is |+⟩ up to a phase.
        let overlap = (v.mat()[(0, 0)].conj() * plus[0] + v.mat()[(1, 0)].conj() * plus[1]).norm();
        assert!((overlap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eig_reconstructs_random_hermitian_8x8() {
        // Deterministic pseudo-random Hermitian from a simple LCG so this
        // test does not depend on the rng module.
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
        };
        let d = 8;
        let mut m = CMat::zeros(d, d);
        for i in 0..d {
            for j in i..d {
                let z = if i == j { c(next(), 0.0) } else { c(next(), next()) };
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        let (evals, v) = hermitian_eig(&m).unwrap();
        let recon = v.conjugate(&CMat::diag(&evals));
        assert!(m.max_abs_diff(&recon) < 1e-10);
        // Eigenvectors unitary.
        let gram = v.mat().dagger().matmul(v.mat());
        assert!(gram.max_abs_diff(&CMat::identity(d)) < 1e-12);
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let m = CMat::from_real_rows(2, 2, &[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(hermitian_eig(&m), Err(CoreError::NotHermitian { .. })));
    }

    #[test]
    fn matrix_power_m1_is_exact_identity_of_input() {
        let space = HilbertSpace::qubits(1).unwrap();
        let rho = DensityOp::new(space, CMat::diag(&[0.6, 0.4])).unwrap();
        let p1 = matrix_power(&rho, 1).unwrap();
        assert_eq!(rho.mat().max_abs_diff(p1.mat()), 0.0);
    }

    #[test]
    fn matrix_power_diagonal_squares() {
        let space = HilbertSpace::qubits(1).unwrap();
        let rho = DensityOp::new(space, CMat::diag(&[0.6, 0.4])).unwrap();
        let p2 = matrix_power(&rho, 2).unwrap();
        let expect = CMat::diag(&[0.36, 0.16]);
        assert!(p2.mat().max_abs_diff(&expect) < 1e-14);
    }

    #[test]
    fn matrix_power_zero_order_rejected() {
        let space = HilbertSpace::qubits(1).unwrap();
        let rho = DensityOp::new(space, CMat::diag(&[1.0, 0.0])).unwrap();
        assert!(matches!(matrix_power(&rho, 0), Err(CoreError::InvalidOrder)));
    }

    #[test]
    fn matrix_power_paths_agree_on_random_psd() {
        let mut state = 0xdeadbeefcafef00du64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
        };
        let d = 4;
        // PSD via B†B, normalized.
        let b = CMat::from_fn(d, d, |_, _| c(next(), next()));
        let mut psd = b.dagger().matmul(&b);
        let tr = psd.trace().re;
        psd = psd.scale_re(1.0 / tr);
        psd.hermitize();
        let space = HilbertSpace::qubits(2).unwrap();
        let rho = DensityOp::new(space, psd).unwrap();
        let by_eig = matrix_power(&rho, 3).unwrap();
        let by_sq = matrix_power_by_squaring(&rho, 3).unwrap();
        assert!(by_eig.mat().max_abs_diff(by_sq.mat()) < 1e-10);
    }

    #[test]
    fn partial_trace_bell_state_is_maximally_mixed() {
        let space = HilbertSpace::qubits(2).unwrap();
        let s = 1.0 / libm::sqrt(2.0);
        let bell = [c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)];
        let rho = DensityOp::pure(space, &bell).unwrap();
        let reduced = partial_trace(&rho, 1).unwrap();
        let half = CMat::diag(&[0.5, 0.5]);
        assert!(reduced.mat().max_abs_diff(&half) < 1e-15);
    }

    #[test]
    fn partial_trace_product_state_keeps_first_factor() {
        let q1 = CMat::diag(&[0.7, 0.3]);
        let q2 = CMat::diag(&[0.2, 0.8]);
        let space = HilbertSpace::qubits(2).unwrap();
        let rho = DensityOp::new(space, tensor(&q1, &q2)).unwrap();
        let reduced = partial_trace(&rho, 2).unwrap();
        assert!(reduced.mat().max_abs_diff(&q1) < 1e-15);
    }

    #[test]
    fn partial_trace_preserves_trace_for_all_qubits() {
        let space = HilbertSpace::qubits(3).unwrap();
        let mut state = 0x123456789abcdefu64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
        };
        let mut psi: Vec<C64> = (0..8).map(|_| c(next(), next())).collect();
        let norm = libm::sqrt(psi.iter().map(|z| z.norm_sqr()).sum::<f64>());
        psi.iter_mut().for_each(|z| *z /= norm);
        let rho = DensityOp::pure(space, &psi).unwrap();
        for j in 1..=3 {
            let red = partial_trace(&rho, j).unwrap();
            assert!((red.trace_hint() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn partial_trace_rejects_out_of_range() {
        let space = HilbertSpace::qubits(2).unwrap();
        let rho = DensityOp::basis_state(space, 0).unwrap();
        assert!(partial_trace(&rho, 0).is_err());
        assert!(partial_trace(&rho, 3).is_err());
    }

    #[test]
    fn sector_projector_single_qubit_matches_basis_order() {
        let space = HilbertSpace::lossy(1).unwrap();
        let p = qubit_sector_projector(space).unwrap();
        let expect = CMat::diag(&[1.0, 1.0, 0.0]);
        assert_eq!(p.max_abs_diff(&expect), 0.0);
    }

    #[test]
    fn sector_projector_rank_is_2_to_n() {
        for n in 1..=4 {
            let space = HilbertSpace::lossy(n).unwrap();
            let p = qubit_sector_projector(space).unwrap();
            assert!((p.trace().re - (1u64 << n) as f64).abs() < 1e-15);
            // Projector: P² = P, P† = P.
            assert!(p.matmul(&p).max_abs_diff(&p) < 1e-15);
            assert_eq!(p.hermiticity_deviation(), 0.0);
        }
    }

    #[test]
    fn sector_projector_rejects_qubit_space() {
        let space = HilbertSpace::qubits(2).unwrap();
        assert!(matches!(
            qubit_sector_projector(space),
            Err(CoreError::WrongLocalDim { .. })
        ));
    }

    #[test]
    fn embed_identity_gives_projector() {
        let space = HilbertSpace::lossy(2).unwrap();
        let emb = embed_qubit_op(&CMat::identity(4), space).unwrap();
        let p = qubit_sector_projector(space).unwrap();
        assert_eq!(emb.max_abs_diff(&p), 0.0);
    }

    #[test]
    fn embed_x_swaps_qubit_kets_annihilates_vacuum() {
        let space = HilbertSpace::lossy(1).unwrap();
        let x = CMat::from_real_rows(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        let emb = embed_qubit_op(&x, space).unwrap();
        // Basis order (|0⟩, |1⟩, |vac⟩): embedded X maps |0⟩→|1⟩, |1⟩→|0⟩,
        // |vac⟩→0.
        let v0 = emb.matvec(&[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!((v0[1] - c(1.0, 0.0)).norm() < 1e-15);
        let vv = emb.matvec(&[c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(vv.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn space_dimension_guard() {
        assert!(HilbertSpace::lossy(8).is_ok()); // 3^8 = 6561, the cap
        assert!(HilbertSpace::lossy(9).is_err());
    }

    #[test]
    fn density_constructor_rejects_negative_spectrum() {
        let space = HilbertSpace::qubits(1).unwrap();
        let bad = CMat::diag(&[1.1, -0.1]);
        assert!(matches!(
            DensityOp::new(space, bad),
            Err(CoreError::NotPositive { .. })
        ));
    }
}
