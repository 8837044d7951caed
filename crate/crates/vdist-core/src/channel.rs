//! Exact application of the i.i.d. loss and Pauli channels, plus delay-time
//! to error-rate conversions.
//!
//! Both channels act qubit-by-qubit and commute across qubit indices, so a
//! "layer" is the composition of the single-qubit map over every qubit.
//!
//! The loss channel lives on vacuum-extended registers (local dimension 3,
//! basis |0⟩, |1⟩, |vac⟩). With probability ε a qubit's population is moved
//! to |vac⟩; qubit–qubit coherences survive with factor 1−ε and qubit–vacuum
//! coherences with factor √(1−ε), exactly the action of the Kraus set
//! {√(1−ε)(|0⟩⟨0|+|1⟩⟨1|) + |vac⟩⟨vac|, √ε|vac⟩⟨0|, √ε|vac⟩⟨1|}.
//!
//! The Pauli channel is applied exactly as (1−ε)ρ + ε₁XρX + ε₂YρY + ε₃ZρZ
//! per qubit — not the first-order-in-ε expansion used by the closed-form
//! analysis. Monte Carlo runs must provide ground truth against which that
//! analysis is tested, so truncating here would be circular.

use crate::error::{CoreError, Result};
use crate::linalg::{CMat, DensityOp, C64};

/// Noise channel selection with total error rate(s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseSpec {
    /// i.i.d. loss at rate `eps` per qubit.
    Loss { eps: f64 },
    /// i.i.d. Pauli noise with flip rates (ε₁, ε₂, ε₃) for (X, Y, Z).
    Pauli { eps1: f64, eps2: f64, eps3: f64 },
}

impl NoiseSpec {
    /// Loss channel; requires 0 ≤ ε ≤ 1.
    pub fn loss(eps: f64) -> Result<Self> {
        check_rate(eps)?;
        Ok(NoiseSpec::Loss { eps })
    }

    /// Pauli channel; requires εₗ ≥ 0 and ε₁+ε₂+ε₃ ≤ 1.
    pub fn pauli(eps1: f64, eps2: f64, eps3: f64) -> Result<Self> {
        for e in [eps1, eps2, eps3] {
            if !(0.0..=1.0).contains(&e) || e.is_nan() {
                return Err(CoreError::InvalidRate { value: e });
            }
        }
        let total = eps1 + eps2 + eps3;
        if total > 1.0 {
            return Err(CoreError::InvalidRate { value: total });
        }
        Ok(NoiseSpec::Pauli { eps1, eps2, eps3 })
    }

    /// Depolarizing channel: εₗ = ε/3 on each Pauli axis.
    pub fn depolarizing(eps: f64) -> Result<Self> {
        check_rate(eps)?;
        Self::pauli(eps / 3.0, eps / 3.0, eps / 3.0)
    }

    /// Total error rate ε (for Pauli: ε₁+ε₂+ε₃).
    pub fn total_rate(&self) -> f64 {
        match *self {
            NoiseSpec::Loss { eps } => eps,
            NoiseSpec::Pauli { eps1, eps2, eps3 } => eps1 + eps2 + eps3,
        }
    }

    /// The same channel diluted over `l_err` layers (every rate divided by
    /// `l_err`).
    pub fn per_layer(&self, l_err: usize) -> Result<Self> {
        if l_err == 0 {
            return Err(CoreError::InvalidOrder);
        }
        let f = 1.0 / l_err as f64;
        Ok(match *self {
            NoiseSpec::Loss { eps } => NoiseSpec::Loss { eps: eps * f },
            NoiseSpec::Pauli { eps1, eps2, eps3 } => NoiseSpec::Pauli {
                eps1: eps1 * f,
                eps2: eps2 * f,
                eps3: eps3 * f,
            },
        })
    }
}

fn check_rate(eps: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eps) || eps.is_nan() {
        return Err(CoreError::InvalidRate { value: eps });
    }
    Ok(())
}

/// Physical decay law converting a delay time τ into an error rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecayModel {
    /// Fiber loss: ε = 1 − 10^(−γτ/10), γ in dB per time unit.
    LossDecay { gamma_db: f64 },
    /// Exponential depolarization: ε = 1 − e^(−γτ).
    DepolDecay { gamma: f64 },
}

/// Error rate accumulated over delay `tau` under the given decay model.
/// γ and τ carry opaque, mutually consistent time units; only the product
/// enters the formulas.
pub fn eps_from_delay(model: DecayModel, tau: f64) -> Result<f64> {
    if tau < 0.0 || tau.is_nan() {
        return Err(CoreError::InvalidRate { value: tau });
    }
    match model {
        DecayModel::LossDecay { gamma_db } => {
            if gamma_db < 0.0 {
                return Err(CoreError::InvalidRate { value: gamma_db });
            }
            Ok(1.0 - libm::pow(10.0, -gamma_db * tau / 10.0))
        }
        DecayModel::DepolDecay { gamma } => {
            if gamma < 0.0 {
                return Err(CoreError::InvalidRate { value: gamma });
            }
            Ok(1.0 - libm::exp(-gamma * tau))
        }
    }
}

/// Base-3 digit of `idx` at qubit position `j` (1-based, leftmost = most
/// significant).
#[inline]
fn lossy_digit(idx: usize, j: usize, n: usize) -> (usize, usize) {
    let stride = 3usize.pow((n - j) as u32);
    ((idx / stride) % 3, stride)
}

/// Apply the loss channel at rate `eps` to qubit `j` of a vacuum-extended
/// state. Trace-preserving.
pub fn apply_loss_single(rho: &DensityOp, j: usize, eps: f64) -> Result<DensityOp> {
    check_rate(eps)?;
    let space = rho.space();
    if space.local_dim() != 3 {
        return Err(CoreError::WrongLocalDim { expected: 3, found: space.local_dim() });
    }
    let n = space.n_qubits();
    if j == 0 || j > n {
        return Err(CoreError::QubitOutOfRange { index: j, n_qubits: n });
    }
    let dim = space.total_dim();
    let keep = 1.0 - eps;
    let coherence = libm::sqrt(keep);
    let mut out = CMat::zeros(dim, dim);
    for r in 0..dim {
        let (dr, stride) = lossy_digit(r, j, n);
        for c in 0..dim {
            let z = rho.mat()[(r, c)];
            if z == C64::new(0.0, 0.0) {
                continue;
            }
            let (dc, _) = lossy_digit(c, j, n);
            match (dr < 2, dc < 2) {
                (true, true) => {
                    // Qubit-sector block: survives with 1−ε; diagonal local
                    // population additionally feeds the vacuum level.
                    out[(r, c)] += z.scale(keep);
                    if dr == dc {
                        let rv = r + (2 - dr) * stride;
                        let cv = c + (2 - dc) * stride;
                        out[(rv, cv)] += z.scale(eps);
                    }
                }
                (true, false) | (false, true) => {
                    // Qubit–vacuum coherence: single √(1−ε) factor.
                    out[(r, c)] += z.scale(coherence);
                }
                (false, false) => {
                    // Vacuum is a fixed point.
                    out[(r, c)] += z;
                }
            }
        }
    }
    DensityOp::new_unvalidated_psd(space, out)
}

/// Apply the loss channel at rate `eps` to every qubit (one noise layer).
pub fn apply_loss_layer(rho: &DensityOp, eps: f64) -> Result<DensityOp> {
    let mut state = rho.clone();
    for j in 1..=rho.space().n_qubits() {
        state = apply_loss_single(&state, j, eps)?;
    }
    Ok(state)
}

/// Pauli axes in the conventional order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

impl PauliAxis {
    pub const ALL: [PauliAxis; 3] = [PauliAxis::X, PauliAxis::Y, PauliAxis::Z];
}

/// Single-qubit Pauli matrix.
pub fn pauli_1q(axis: PauliAxis) -> CMat {
    let mut m = CMat::zeros(2, 2);
    match axis {
        PauliAxis::X => {
            m[(0, 1)] = C64::new(1.0, 0.0);
            m[(1, 0)] = C64::new(1.0, 0.0);
        }
        PauliAxis::Y => {
            m[(0, 1)] = C64::new(0.0, -1.0);
            m[(1, 0)] = C64::new(0.0, 1.0);
        }
        PauliAxis::Z => {
            m[(0, 0)] = C64::new(1.0, 0.0);
            m[(1, 1)] = C64::new(-1.0, 0.0);
        }
    }
    m
}

/// Pauli matrix on qubit `j` (1-based) of an n-qubit register, identity
/// elsewhere.
pub fn pauli_on(n: usize, j: usize, axis: PauliAxis) -> Result<CMat> {
    if j == 0 || j > n {
        return Err(CoreError::QubitOutOfRange { index: j, n_qubits: n });
    }
    let dim = 1usize << n;
    let mask = 1usize << (n - j);
    let mut m = CMat::zeros(dim, dim);
    for col in 0..dim {
        let bit = (col >> (n - j)) & 1;
        match axis {
            PauliAxis::X => m[(col ^ mask, col)] = C64::new(1.0, 0.0),
            PauliAxis::Y => {
                // Y|0⟩ = i|1⟩, Y|1⟩ = −i|0⟩.
                let phase = if bit == 0 { C64::new(0.0, 1.0) } else { C64::new(0.0, -1.0) };
                m[(col ^ mask, col)] = phase;
            }
            PauliAxis::Z => {
                let sign = if bit == 0 { 1.0 } else { -1.0 };
                m[(col, col)] = C64::new(sign, 0.0);
            }
        }
    }
    Ok(m)
}

/// Apply (1−ε)ρ + ε₁X_jρX_j + ε₂Y_jρY_j + ε₃Z_jρZ_j exactly on qubit `j` of
/// a qubit register. Trace-preserving.
pub fn apply_pauli_single(
    rho: &DensityOp,
    j: usize,
    eps1: f64,
    eps2: f64,
    eps3: f64,
) -> Result<DensityOp> {
    let spec = NoiseSpec::pauli(eps1, eps2, eps3)?;
    let eps = spec.total_rate();
    let space = rho.space();
    if space.local_dim() != 2 {
        return Err(CoreError::WrongLocalDim { expected: 2, found: space.local_dim() });
    }
    let n = space.n_qubits();
    if j == 0 || j > n {
        return Err(CoreError::QubitOutOfRange { index: j, n_qubits: n });
    }
    let dim = space.total_dim();
    let mask = 1usize << (n - j);
    let mut out = CMat::zeros(dim, dim);
    // Conjugation by a Pauli on qubit j is an index/sign map, which composes
    // the four Kraus branches without any matrix products:
    //   XρX:  (r,c) ← (r⊕m, c⊕m)
    //   YρY:  (r,c) ← ±(r⊕m, c⊕m), + when the j-bits of r and c agree
    //   ZρZ:  (r,c) ← ±(r, c), same sign rule.
    for r in 0..dim {
        let br = (r & mask) != 0;
        for c in 0..dim {
            let bc = (c & mask) != 0;
            let sign = if br == bc { 1.0 } else { -1.0 };
            let same = rho.mat()[(r, c)];
            let flipped = rho.mat()[(r ^ mask, c ^ mask)];
            out[(r, c)] =
                same.scale(1.0 - eps + sign * eps3) + flipped.scale(eps1 + sign * eps2);
        }
    }
    DensityOp::new_unvalidated_psd(space, out)
}

/// Apply the Pauli channel to every qubit (one noise layer).
pub fn apply_pauli_layer(rho: &DensityOp, eps1: f64, eps2: f64, eps3: f64) -> Result<DensityOp> {
    let mut state = rho.clone();
    for j in 1..=rho.space().n_qubits() {
        state = apply_pauli_single(&state, j, eps1, eps2, eps3)?;
    }
    Ok(state)
}

/// Apply one noise layer of either kind at the rates the NoiseSpec carries.
pub fn apply_noise_layer(rho: &DensityOp, noise: &NoiseSpec) -> Result<DensityOp> {
    match *noise {
        NoiseSpec::Loss { eps } => apply_loss_layer(rho, eps),
        NoiseSpec::Pauli { eps1, eps2, eps3 } => apply_pauli_layer(rho, eps1, eps2, eps3),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{embed_density, qubit_sector_projector, DensityOp, HilbertSpace};
    use crate::rng::RngStream;
    use crate::unitary::{haar_state, haar_unitary};

    fn lossy_basis(n: usize, index: usize) -> DensityOp {
        DensityOp::basis_state(HilbertSpace::lossy(n).unwrap(), index).unwrap()
    }

    #[test]
    fn loss_moves_population_to_vacuum() {
        let eps = 0.3;
        let rho = lossy_basis(1, 0); // |0⟩⟨0|
        let out = apply_loss_single(&rho, 1, eps).unwrap();
        let expect = CMat::diag(&[1.0 - eps, 0.0, eps]);
        assert!(out.mat().max_abs_diff(&expect) < 1e-15);
        assert!((out.trace_hint() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn loss_fixes_vacuum() {
        let rho = lossy_basis(1, 2); // |vac⟩⟨vac|
        for eps in [0.0, 0.3, 1.0] {
            let out = apply_loss_single(&rho, 1, eps).unwrap();
            assert_eq!(out.mat().max_abs_diff(rho.mat()), 0.0);
        }
    }

    #[test]
    fn loss_scales_coherences_correctly() {
        // |ψ⟩ = (|0⟩ + |1⟩ + |vac⟩)/√3: qubit–qubit coherence picks up 1−ε,
        // qubit–vacuum coherence √(1−ε).
        let s = 1.0 / libm::sqrt(3.0);
        let psi = [C64::new(s, 0.0); 3];
        let rho = DensityOp::pure(HilbertSpace::lossy(1).unwrap(), &psi).unwrap();
        let eps = 0.19;
        let out = apply_loss_single(&rho, 1, eps).unwrap();
        let third = 1.0 / 3.0;
        assert!((out.mat()[(0, 1)].re - (1.0 - eps) * third).abs() < 1e-15);
        assert!((out.mat()[(0, 2)].re - libm::sqrt(1.0 - eps) * third).abs() < 1e-15);
        assert!((out.trace_hint() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn loss_zero_rate_is_identity_map() {
        let mut rng = RngStream::from_seed(31);
        let space = HilbertSpace::lossy(2).unwrap();
        let psi = haar_state(9, &mut rng);
        let rho = DensityOp::pure(space, &psi).unwrap();
        let out = apply_loss_layer(&rho, 0.0).unwrap();
        assert!(out.mat().max_abs_diff(rho.mat()) < 1e-14);
    }

    #[test]
    fn loss_layer_sector_weight_is_keep_probability_squared() {
        // For a state supported on the 2-qubit sector, the no-loss branch
        // after one layer has weight (1−ε)².
        let mut rng = RngStream::from_seed(32);
        let qspace = HilbertSpace::qubits(2).unwrap();
        let lspace = HilbertSpace::lossy(2).unwrap();
        let psi = haar_state(4, &mut rng);
        let rho = embed_density(&DensityOp::pure(qspace, &psi).unwrap(), lspace).unwrap();
        let eps = 0.07;
        let out = apply_loss_layer(&rho, eps).unwrap();
        let p = qubit_sector_projector(lspace).unwrap();
        let sector_weight = p.matmul(out.mat()).matmul(&p).trace().re;
        assert!((sector_weight - (1.0 - eps) * (1.0 - eps)).abs() < 1e-12);
        assert!((out.trace_hint() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn loss_total_rate_sends_everything_to_vacuum() {
        let mut rng = RngStream::from_seed(33);
        let lspace = HilbertSpace::lossy(2).unwrap();
        let psi = haar_state(9, &mut rng);
        let rho = DensityOp::pure(lspace, &psi).unwrap();
        let out = apply_loss_layer(&rho, 1.0).unwrap();
        // Only the all-vacuum diagonal entry survives.
        let vac_idx = 8; // base-3 digits (2,2)
        for r in 0..9 {
            for c in 0..9 {
                if (r, c) != (vac_idx, vac_idx) {
                    assert!(out.mat()[(r, c)].norm() < 1e-14, "entry ({r},{c}) nonzero");
                }
            }
        }
        assert!((out.mat()[(vac_idx, vac_idx)].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn loss_qubit_order_does_not_matter() {
        let mut rng = RngStream::from_seed(34);
        let lspace = HilbertSpace::lossy(2).unwrap();
        let psi = haar_state(9, &mut rng);
        let rho = DensityOp::pure(lspace, &psi).unwrap();
        let a = apply_loss_single(&apply_loss_single(&rho, 1, 0.11).unwrap(), 2, 0.11).unwrap();
        let b = apply_loss_single(&apply_loss_single(&rho, 2, 0.11).unwrap(), 1, 0.11).unwrap();
        assert!(a.mat().max_abs_diff(b.mat()) < 1e-13);
    }

    #[test]
    fn loss_rejects_bad_rate_and_space() {
        let rho = lossy_basis(1, 0);
        assert!(apply_loss_single(&rho, 1, -0.1).is_err());
        assert!(apply_loss_single(&rho, 1, 1.1).is_err());
        let qrho = DensityOp::basis_state(HilbertSpace::qubits(1).unwrap(), 0).unwrap();
        assert!(matches!(
            apply_loss_single(&qrho, 1, 0.1),
            Err(CoreError::WrongLocalDim { .. })
        ));
    }

    #[test]
    fn pauli_bit_flip_action() {
        let space = HilbertSpace::qubits(1).unwrap();
        let rho = DensityOp::basis_state(space, 0).unwrap();
        let eps = 0.2;
        let out = apply_pauli_single(&rho, 1, eps, 0.0, 0.0).unwrap();
        let expect = CMat::diag(&[1.0 - eps, eps]);
        assert!(out.mat().max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn pauli_fixes_maximally_mixed() {
        for n in 1..=3 {
            let space = HilbertSpace::qubits(n).unwrap();
            let dim = space.total_dim();
            let mixed = DensityOp::new(
                space,
                CMat::identity(dim).scale_re(1.0 / dim as f64),
            )
            .unwrap();
            let out = apply_pauli_layer(&mixed, 0.01, 0.02, 0.03).unwrap();
            assert!(out.mat().max_abs_diff(mixed.mat()) < 1e-15);
        }
    }

    #[test]
    fn pauli_quarter_rates_fully_depolarize() {
        // ε₁=ε₂=ε₃=1/4 makes the single-qubit map ρ ↦ I/2 for every input.
        let mut rng = RngStream::from_seed(35);
        let space = HilbertSpace::qubits(1).unwrap();
        let psi = haar_state(2, &mut rng);
        let rho = DensityOp::pure(space, &psi).unwrap();
        let out = apply_pauli_single(&rho, 1, 0.25, 0.25, 0.25).unwrap();
        let half = CMat::diag(&[0.5, 0.5]);
        assert!(out.mat().max_abs_diff(&half) < 1e-14);
    }

    #[test]
    fn pauli_matches_explicit_kraus_conjugation() {
        // Dual route: the index/sign map vs literal matrix conjugation.
        let mut rng = RngStream::from_seed(36);
        let n = 3;
        let space = HilbertSpace::qubits(n).unwrap();
        let psi = haar_state(8, &mut rng);
        let rho = DensityOp::pure(space, &psi).unwrap();
        let (e1, e2, e3) = (0.02, 0.01, 0.035);
        let j = 2;
        let fast = apply_pauli_single(&rho, j, e1, e2, e3).unwrap();
        let mut slow = rho.mat().scale_re(1.0 - e1 - e2 - e3);
        for (axis, w) in [(PauliAxis::X, e1), (PauliAxis::Y, e2), (PauliAxis::Z, e3)] {
            let p = pauli_on(n, j, axis).unwrap();
            slow = slow.add(&p.matmul(rho.mat()).matmul(&p).scale_re(w));
        }
        assert!(fast.mat().max_abs_diff(&slow) < 1e-14);
    }

    #[test]
    fn pauli_layer_richardson_truncation_order() {
        // First-order expansion: ρ' ≅ ρ + Σ_j Σ_a ε_a (P_a^j ρ P_a^j − ρ).
        // The residual must scale as ε², i.e. quarter when ε halves.
        let mut rng = RngStream::from_seed(37);
        let n = 2;
        let space = HilbertSpace::qubits(n).unwrap();
        let w = haar_unitary(4, &mut rng).unwrap();
        let rho = DensityOp::new_unvalidated_psd(
            space,
            w.conjugate(DensityOp::basis_state(space, 0).unwrap().mat()),
        )
        .unwrap();
        let residual = |eps: f64| -> f64 {
            let exact = apply_pauli_layer(&rho, eps / 3.0, eps / 3.0, eps / 3.0).unwrap();
            let mut first = rho.mat().clone();
            for j in 1..=n {
                for axis in PauliAxis::ALL {
                    let p = pauli_on(n, j, axis).unwrap();
                    let conj = p.matmul(rho.mat()).matmul(&p);
                    first = first.add(&conj.sub(rho.mat()).scale_re(eps / 3.0));
                }
            }
            exact
                .mat()
                .sub(&first)
                .data()
                .iter()
                .map(|z| z.norm())
                .sum()
        };
        let r1 = residual(2e-3);
        let r2 = residual(1e-3);
        let ratio = r1 / r2;
        assert!((ratio - 4.0).abs() < 0.1, "residual ratio {ratio}, want ≈ 4");
    }

    #[test]
    fn pauli_layer_order_independent_and_trace_preserving() {
        let mut rng = RngStream::from_seed(38);
        let space = HilbertSpace::qubits(2).unwrap();
        let psi = haar_state(4, &mut rng);
        let rho = DensityOp::pure(space, &psi).unwrap();
        let a = apply_pauli_single(&apply_pauli_single(&rho, 1, 0.02, 0.01, 0.03).unwrap(), 2, 0.02, 0.01, 0.03).unwrap();
        let b = apply_pauli_single(&apply_pauli_single(&rho, 2, 0.02, 0.01, 0.03).unwrap(), 1, 0.02, 0.01, 0.03).unwrap();
        assert!(a.mat().max_abs_diff(b.mat()) < 1e-13);
        assert!((a.trace_hint() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn channels_preserve_trace_and_positivity_on_random_inputs() {
        // CPTP smoke test over many random mixed states on both channels.
        let mut rng = RngStream::from_seed(39);
        let trials = 1000;
        for t in 0..trials {
            // Random rank-2 mixed state via two Haar states.
            let lspace = HilbertSpace::lossy(2).unwrap();
            let qspace = HilbertSpace::qubits(2).unwrap();
            let w = 0.3 + 0.4 * rng.uniform();

            let mix = |d: usize, rng: &mut RngStream| -> CMat {
                let a = CMat::outer(&haar_state(d, rng));
                let b = CMat::outer(&haar_state(d, rng));
                a.scale_re(w).add(&b.scale_re(1.0 - w))
            };

            let lrho = DensityOp::new_unvalidated_psd(lspace, mix(9, &mut rng)).unwrap();
            let lout = apply_loss_layer(&lrho, 0.15).unwrap();
            assert!((lout.trace_hint() - 1.0).abs() < 1e-12, "loss trace, trial {t}");

            let qrho = DensityOp::new_unvalidated_psd(qspace, mix(4, &mut rng)).unwrap();
            let qout = apply_pauli_layer(&qrho, 0.05, 0.02, 0.03).unwrap();
            assert!((qout.trace_hint() - 1.0).abs() < 1e-12, "pauli trace, trial {t}");

            // Positivity: check min eigenvalue on a subsample (eig on every
            // trial would dominate runtime without adding information).
            if t % 50 == 0 {
                assert!(lout.min_eigenvalue().unwrap() >= -1e-10);
                assert!(qout.min_eigenvalue().unwrap() >= -1e-10);
            }
        }
    }

    #[test]
    fn delay_conversions_match_formulas() {
        let loss = DecayModel::LossDecay { gamma_db: 6.0 };
        assert_eq!(eps_from_delay(loss, 0.0).unwrap(), 0.0);
        let e = eps_from_delay(loss, 0.5).unwrap();
        assert!((e - (1.0 - libm::pow(10.0, -0.3))).abs() < 1e-15);
        assert!((e - 0.4988).abs() < 1e-4);

        let depol = DecayModel::DepolDecay { gamma: 1.0 };
        for gt in [0.001, 0.005, 0.01] {
            let e = eps_from_delay(depol, gt).unwrap();
            assert!((e - gt).abs() / gt < 0.01, "small-γτ linearization at {gt}");
        }
        assert!(eps_from_delay(depol, -1.0).is_err());
    }

    #[test]
    fn noise_spec_validation_and_dilution() {
        assert!(NoiseSpec::loss(1.2).is_err());
        assert!(NoiseSpec::pauli(0.5, 0.4, 0.2).is_err());
        let spec = NoiseSpec::depolarizing(0.03).unwrap();
        assert!((spec.total_rate() - 0.03).abs() < 1e-15);
        let diluted = spec.per_layer(3).unwrap();
        assert!((diluted.total_rate() - 0.01).abs() < 1e-15);
        match diluted {
            NoiseSpec::Pauli { eps1, .. } => assert!((eps1 - 0.01 / 3.0).abs() < 1e-15),
            _ => panic!("kind changed"),
        }
    }
}
