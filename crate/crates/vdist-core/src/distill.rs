//! Virtual distillation, its figure of merit, and error-component
//! extraction.
//!
//! Distillation suppresses noise by powering the noisy state: ρ'^M/tr[ρ'^M].
//! As M grows, the normalized power converges to the projector onto the
//! dominant eigenvector of ρ', which for weak noise is a slightly rotated
//! version of the ideal output. The figure of merit throughout is the
//! squared Hilbert–Schmidt distance MSE = tr[(ρ − ρ'^M/tr ρ'^M)²] between
//! the distilled state and the noiseless target.
//!
//! Powers are evaluated by repeated squaring with per-step trace
//! renormalization: every intermediate is kept at unit trace and the true
//! scale is tracked in log space, so tr[ρ'^M] is reported accurately even
//! where the bare matrix product would underflow.

use alloc::vec;
use alloc::vec::Vec;

use crate::channel::{pauli_on, NoiseSpec, PauliAxis};
use crate::error::{CoreError, Result};
use crate::linalg::{embed_density, qubit_sector_projector, CMat, DensityOp, C64};
use crate::pipeline::PipelineOutput;

/// Outcome of powering a noisy state.
#[derive(Debug, Clone)]
pub struct DistillationResult {
    /// Distillation order M.
    pub m: u32,
    /// ρ'^M / tr[ρ'^M], unit trace.
    pub state: DensityOp,
    /// tr[ρ'^M] of the input as given (0.0 if it underflows f64).
    pub trace_of_power: f64,
}

/// A matrix with unit trace and a separate log-scale: represents X̂·e^s.
struct Scaled {
    mat: CMat,
    log_scale: f64,
}

impl Scaled {
    fn normalize(mut mat: CMat, extra_log: f64) -> Result<Self> {
        mat.hermitize();
        let tr = mat.trace().re;
        if !(tr > 0.0) {
            return Err(CoreError::DegenerateInput);
        }
        Ok(Self { mat: mat.scale_re(1.0 / tr), log_scale: extra_log + libm::log(tr) })
    }

    fn times(&self, other: &Self) -> Result<Self> {
        Self::normalize(self.mat.matmul(&other.mat), self.log_scale + other.log_scale)
    }
}

/// Distill a noisy state at order M: ρ'^M / tr[ρ'^M].
pub fn distill(rho_noisy: &DensityOp, m: u32) -> Result<DistillationResult> {
    if m == 0 {
        return Err(CoreError::InvalidOrder);
    }
    if !(rho_noisy.trace_hint() > 1e-300) {
        return Err(CoreError::DegenerateInput);
    }
    let mut base = Scaled::normalize(rho_noisy.mat().clone(), 0.0)?;
    let mut acc: Option<Scaled> = None;
    let mut k = m;
    loop {
        if k & 1 == 1 {
            acc = Some(match acc {
                None => Scaled { mat: base.mat.clone(), log_scale: base.log_scale },
                Some(a) => a.times(&base)?,
            });
        }
        k >>= 1;
        if k == 0 {
            break;
        }
        base = base.times(&base)?;
    }
    let result = acc.expect("m >= 1");
    let trace_of_power = libm::exp(result.log_scale);
    if !(trace_of_power > 1e-300) {
        return Err(CoreError::DegenerateInput);
    }
    let state = DensityOp::new_unvalidated_psd(rho_noisy.space(), result.mat)?;
    Ok(DistillationResult { m, state, trace_of_power })
}

/// Projector onto the dominant eigenvector of a noisy state — the M → ∞
/// limit of distillation — found by power iteration.
///
/// Iterates v ← ρ'v/‖ρ'v‖ from the basis vector with the largest diagonal
/// entry until the fidelity |⟨v_k|v_{k+1}⟩|² between successive iterates
/// reaches 1 − tol; on stagnation the iteration restarts deterministically
/// from the next basis vector. Errors if the top of the spectrum is
/// degenerate (gap < 1e−8, estimated by a deflated second iteration), since
/// the limit state is then ill-defined.
pub fn dominant_eigenstate(rho_noisy: &DensityOp, tol: f64) -> Result<DensityOp> {
    let dim = rho_noisy.dim();
    if !(rho_noisy.trace_hint() > 1e-300) {
        return Err(CoreError::DegenerateInput);
    }
    let mat = rho_noisy.mat().scale_re(1.0 / rho_noisy.trace_hint());
    if dim == 1 {
        return DensityOp::new_unvalidated_psd(rho_noisy.space(), CMat::identity(1));
    }
    let tol = tol.max(1e-15);

    // Deterministic start: the basis vector with the largest diagonal entry.
    let start = (0..dim)
        .max_by(|&a, &b| {
            mat[(a, a)]
                .re
                .partial_cmp(&mat[(b, b)].re)
                .expect("diagonal entries are finite")
        })
        .expect("dim >= 1");

    const MAX_ITERS: usize = 100_000;
    for attempt in 0..dim {
        let k = (start + attempt) % dim;
        let mut v = basis_vec(dim, k);
        let mut converged = false;
        for _ in 0..MAX_ITERS {
            let mut w = mat.matvec(&v);
            let norm = libm::sqrt(w.iter().map(|z| z.norm_sqr()).sum::<f64>());
            if norm < 1e-300 {
                break; // ρ' annihilates this start vector; restart
            }
            w.iter_mut().for_each(|z| *z /= norm);
            let fid = inner(&v, &w).norm_sqr();
            v = w;
            if fid >= 1.0 - tol {
                converged = true;
                break;
            }
        }
        if !converged {
            continue; // stagnation → deterministic restart from next basis vector
        }

        let lambda1 = rayleigh(&mat, &v);
        let lambda2 = deflated_second_eigenvalue(&mat, &v, tol);
        let gap = lambda1 - lambda2;
        if gap < 1e-8 {
            return Err(CoreError::DegenerateSpectrum { gap });
        }
        return DensityOp::new_unvalidated_psd(rho_noisy.space(), CMat::outer(&v));
    }
    Err(CoreError::NoConvergence { iterations: MAX_ITERS })
}

fn basis_vec(dim: usize, k: usize) -> Vec<C64> {
    let mut v = vec![C64::new(0.0, 0.0); dim];
    v[k] = C64::new(1.0, 0.0);
    v
}

fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn rayleigh(mat: &CMat, v: &[C64]) -> f64 {
    inner(v, &mat.matvec(v)).re
}

/// Largest eigenvalue of ρ' restricted to the complement of `top`: power
/// iteration with re-orthogonalization against the converged dominant
/// vector.
fn deflated_second_eigenvalue(mat: &CMat, top: &[C64], tol: f64) -> f64 {
    let dim = top.len();
    // Start from the basis vector least aligned with the dominant vector.
    let k = (0..dim)
        .min_by(|&a, &b| {
            top[a]
                .norm_sqr()
                .partial_cmp(&top[b].norm_sqr())
                .expect("finite")
        })
        .expect("dim >= 1");
    let mut v = basis_vec(dim, k);
    orthogonalize(&mut v, top);
    for _ in 0..10_000 {
        let mut w = mat.matvec(&v);
        orthogonalize(&mut w, top);
        let norm = libm::sqrt(w.iter().map(|z| z.norm_sqr()).sum::<f64>());
        if norm < 1e-300 {
            return 0.0; // complement is annihilated: λ₂ = 0
        }
        w.iter_mut().for_each(|z| *z /= norm);
        let fid = inner(&v, &w).norm_sqr();
        v = w;
        if fid >= 1.0 - tol {
            break;
        }
    }
    rayleigh(mat, &v)
}

fn orthogonalize(v: &mut [C64], against: &[C64]) {
    let overlap = inner(against, v);
    for (x, a) in v.iter_mut().zip(against) {
        *x -= a * overlap;
    }
}

/// Squared Hilbert–Schmidt distance tr[(ρ − σ)²].
///
/// If exactly one argument lives on a vacuum-extended space and the other on
/// the matching qubit space, the qubit-space state is embedded first (its
/// error component is orthogonal to the qubit sector, so vacuum terms
/// contribute in full).
pub fn mse(target: &DensityOp, candidate: &DensityOp) -> Result<f64> {
    let (a, b) = match (target.space().local_dim(), candidate.space().local_dim()) {
        (2, 3) if target.space().n_qubits() == candidate.space().n_qubits() => {
            (embed_density(target, candidate.space())?, candidate.clone())
        }
        (3, 2) if target.space().n_qubits() == candidate.space().n_qubits() => {
            (target.clone(), embed_density(candidate, target.space())?)
        }
        _ if target.space() == candidate.space() => (target.clone(), candidate.clone()),
        _ => {
            return Err(CoreError::DimensionMismatch {
                expected: target.dim(),
                found: candidate.dim(),
            })
        }
    };
    // For Hermitian Δ, tr[Δ²] = Σ|Δ_ij|².
    Ok(a.mat().sub(b.mat()).frobenius_sq())
}

/// The propagated single-error operator T_j^(a) = Σ_{k=1}^{L} S_k P_j^(a)
/// ρ_k P_j^(a) S_k†, where S_k = W_L···W_{k+1} propagates layer k's output
/// through the remaining subcircuits and P_j^(a) is the Pauli `axis` on
/// qubit j. tr T = L_err (each summand is a conjugated unit-trace state).
pub fn t_operator(
    circuits: &[crate::linalg::UnitaryOp],
    layer_states: &[DensityOp],
    j: usize,
    axis: PauliAxis,
) -> Result<CMat> {
    if circuits.is_empty() || circuits.len() != layer_states.len() {
        return Err(CoreError::DimensionMismatch {
            expected: circuits.len(),
            found: layer_states.len(),
        });
    }
    let l_err = circuits.len();
    let dim = circuits[0].dim();
    let n = dim.trailing_zeros() as usize;
    let p = pauli_on(n, j, axis)?;
    // Suffix propagators: S_L = 1, S_k = S_{k+1} W_{k+1}.
    let mut suffix = CMat::identity(dim);
    let mut total = CMat::zeros(dim, dim);
    for k in (0..l_err).rev() {
        if k < l_err - 1 {
            suffix = suffix.matmul(circuits[k + 1].mat());
        }
        let flipped = p.matmul(layer_states[k].mat()).matmul(&p);
        let term = if k == l_err - 1 {
            flipped
        } else {
            suffix.matmul(&flipped).matmul(&suffix.dagger())
        };
        total = total.add(&term);
    }
    Ok(total)
}

/// First-order error component ρ_err of a pipeline run, the unit-trace state
/// such that ρ' ≅ (1 − w)ρ + w·ρ_err for small total error weight w.
///
/// Loss: error terms live entirely in the vacuum-containing sector, so
/// ρ_err = Qρ'Q / tr[Qρ'Q] with Q = 1 − P is exact at every order.
/// Pauli: ρ_err = Σ_{j,a} ε_a T_j^(a) / (n·ε·L_err), built from the cached
/// layer states (a first-order construction).
pub fn extract_error_component(
    output: &PipelineOutput,
    noise: &NoiseSpec,
) -> Result<DensityOp> {
    if noise.total_rate() == 0.0 {
        return Err(CoreError::DegenerateInput);
    }
    match *noise {
        NoiseSpec::Loss { .. } => {
            let space = output.noisy.space();
            if space.local_dim() != 3 {
                return Err(CoreError::WrongLocalDim { expected: 3, found: space.local_dim() });
            }
            let p = qubit_sector_projector(space)?;
            let q = CMat::identity(space.total_dim()).sub(&p);
            let mut err = q.matmul(output.noisy.mat()).matmul(&q);
            err.hermitize();
            let weight = err.trace().re;
            if !(weight > 1e-300) {
                return Err(CoreError::DegenerateInput);
            }
            DensityOp::new_unvalidated_psd(space, err.scale_re(1.0 / weight))
        }
        NoiseSpec::Pauli { eps1, eps2, eps3 } => {
            let space = output.target.space();
            let n = space.n_qubits();
            let l_err = output.circuits.len();
            let eps = eps1 + eps2 + eps3;
            let dim = space.total_dim();
            let mut err = CMat::zeros(dim, dim);
            for j in 1..=n {
                for (axis, w) in
                    [(PauliAxis::X, eps1), (PauliAxis::Y, eps2), (PauliAxis::Z, eps3)]
                {
                    if w == 0.0 {
                        continue;
                    }
                    let t = t_operator(&output.circuits, &output.layer_states, j, axis)?;
                    err = err.add(&t.scale_re(w));
                }
            }
            err.hermitize();
            let norm = n as f64 * eps * l_err as f64;
            DensityOp::new_unvalidated_psd(space, err.scale_re(1.0 / norm))
        }
    }
}
