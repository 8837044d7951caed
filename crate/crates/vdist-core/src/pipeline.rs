//! The noise-dilution pipeline: interleave noise layers with subcircuits.
//!
//! A circuit U is decomposed into L_err subcircuits, U = W_L …W₂W₁, and the
//! total error budget ε is spread across L_err i.i.d. noise layers at rate
//! ε/L_err each, one firing after every subcircuit:
//!
//! ```text
//! ρ' = Φ_{ε/L}[ W_L … Φ_{ε/L}[ W₂ Φ_{ε/L}[ W₁|0…0⟩⟨0…0|W₁† ] W₂† ] … W_L† ]
//! ```
//!
//! For Pauli noise everything stays on the 2^n qubit space and the trace is
//! preserved. For loss the state lives on the 3^n vacuum-extended space and
//! circuit layers act as X ↦ Ŵ(PXP)Ŵ† with P the qubit-sector projector and
//! Ŵ the embedded subcircuit: population that leaked to |vac⟩ is invisible
//! to later circuit operations and is annihilated by them, which makes the
//! trace decay by (1−ε/L)^n per *subsequent* circuit layer. The run records
//! the pre-renormalization trace so callers can verify that decay exactly.

use alloc::vec;
use alloc::vec::Vec;

use crate::channel::{apply_loss_layer, apply_noise_layer, NoiseSpec};
use crate::error::{CoreError, Result};
use crate::linalg::{embed_qubit_op, CMat, DensityOp, HilbertSpace, UnitaryOp, C64};
use crate::rng::RngStream;
use crate::unitary::CircuitSpec;

/// A fully realized dilution experiment: the subcircuits W₁…W_{L_err} (in
/// application order) and the total noise budget.
#[derive(Debug, Clone)]
pub struct DilutionPlan {
    noise: NoiseSpec,
    circuits: Vec<UnitaryOp>,
    renormalize_loss: bool,
}

impl DilutionPlan {
    /// Build a plan from realized unitaries. All circuits must share one
    /// power-of-two dimension; L_err is the number of circuits.
    pub fn new(noise: NoiseSpec, circuits: Vec<UnitaryOp>) -> Result<Self> {
        if circuits.is_empty() {
            return Err(CoreError::EmptyInput);
        }
        let dim = circuits[0].dim();
        if !dim.is_power_of_two() || dim < 2 {
            return Err(CoreError::DimensionMismatch { expected: 2, found: dim });
        }
        for c in &circuits {
            if c.dim() != dim {
                return Err(CoreError::DimensionMismatch { expected: dim, found: c.dim() });
            }
        }
        Ok(Self { noise, circuits, renormalize_loss: true })
    }

    /// Draw the plan's circuits from specs using the given stream.
    pub fn realize(
        noise: NoiseSpec,
        specs: &[CircuitSpec],
        rng: &mut RngStream,
    ) -> Result<Self> {
        let circuits = specs
            .iter()
            .map(|s| s.realize(rng))
            .collect::<Result<Vec<_>>>()?;
        Self::new(noise, circuits)
    }

    /// Disable the final trace renormalization of lossy runs (the raw state
    /// is then sub-normalized). Distillation renormalizes anyway, so this
    /// only affects reported traces.
    pub fn without_loss_renormalization(mut self) -> Self {
        self.renormalize_loss = false;
        self
    }

    pub fn noise(&self) -> &NoiseSpec {
        &self.noise
    }

    pub fn circuits(&self) -> &[UnitaryOp] {
        &self.circuits
    }

    /// Number of noise layers (= number of subcircuits).
    pub fn l_err(&self) -> usize {
        self.circuits.len()
    }

    pub fn n_qubits(&self) -> usize {
        self.circuits[0].dim().trailing_zeros() as usize
    }

    /// Per-layer noise, total rate divided by L_err.
    pub fn layer_noise(&self) -> NoiseSpec {
        self.noise
            .per_layer(self.l_err())
            .expect("l_err >= 1 by construction")
    }

    /// Run the pipeline appropriate to the noise kind.
    pub fn run(&self) -> Result<PipelineOutput> {
        match self.noise {
            NoiseSpec::Loss { .. } => run_loss(self),
            NoiseSpec::Pauli { .. } => run_pauli(self),
        }
    }
}

/// Everything a single pipeline execution produces.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    /// Noiseless output ρ = U|0…0⟩⟨0…0|U† on the qubit space.
    pub target: DensityOp,
    /// Noisy output ρ'; on the qubit space for Pauli noise, on the
    /// vacuum-extended space for loss (renormalized unless disabled).
    pub noisy: DensityOp,
    /// Intermediate noiseless states ρ_l = W_l…W₁|0…0⟩⟨0…0|W₁†…W_l†,
    /// l = 1…L_err (the last one equals `target`).
    pub layer_states: Vec<DensityOp>,
    /// The subcircuits the run was built from (needed downstream to
    /// reconstruct error components layer by layer).
    pub circuits: Vec<UnitaryOp>,
    /// tr ρ' before any renormalization; 1 for Pauli, (1−ε/L)^((L−1)n) for
    /// loss.
    pub trace_before_renorm: f64,
    /// Whether `noisy` was divided by `trace_before_renorm`.
    pub renormalized: bool,
}

fn zero_ket(dim: usize) -> Vec<C64> {
    let mut v = vec![C64::new(0.0, 0.0); dim];
    v[0] = C64::new(1.0, 0.0);
    v
}

/// The noiseless layer kets ψ_l = W_l…W₁|0…0⟩ for l = 1…L_err.
pub fn layer_kets(circuits: &[UnitaryOp]) -> Result<Vec<Vec<C64>>> {
    if circuits.is_empty() {
        return Err(CoreError::EmptyInput);
    }
    let dim = circuits[0].dim();
    let mut psi = zero_ket(dim);
    let mut kets = Vec::with_capacity(circuits.len());
    for w in circuits {
        psi = w.mat().matvec(&psi);
        kets.push(psi.clone());
    }
    Ok(kets)
}

/// Noiseless output state of a circuit sequence (applied left to right, so
/// the composed unitary is W_L···W₂W₁).
pub fn target_of(circuits: &[UnitaryOp]) -> Result<DensityOp> {
    let kets = layer_kets(circuits)?;
    let dim = circuits[0].dim();
    let n = dim.trailing_zeros() as usize;
    let space = HilbertSpace::qubits(n)?;
    DensityOp::pure(space, kets.last().expect("nonempty"))
}

fn layer_states_of(circuits: &[UnitaryOp], space: HilbertSpace) -> Result<Vec<DensityOp>> {
    layer_kets(circuits)?
        .into_iter()
        .map(|k| DensityOp::pure(space, &k))
        .collect()
}

/// Execute a Pauli-noise dilution run.
pub fn run_pauli(plan: &DilutionPlan) -> Result<PipelineOutput> {
    let NoiseSpec::Pauli { .. } = plan.noise else {
        return Err(CoreError::WrongLocalDim { expected: 2, found: 3 });
    };
    let n = plan.n_qubits();
    let space = HilbertSpace::qubits(n)?;
    let layer_noise = plan.layer_noise();
    let target = target_of(&plan.circuits)?;

    let noisy = if plan.noise.total_rate() == 0.0 {
        // Zero-rate channel is the identity map: ρ' = ρ exactly. Taking the
        // shortcut keeps the equality bit-exact instead of
        // floating-point-close.
        target.clone()
    } else {
        let mut state = DensityOp::basis_state(space, 0)?;
        for w in &plan.circuits {
            let conj = w.conjugate(state.mat());
            state = DensityOp::new_unvalidated_psd(space, hermitized(conj))?;
            state = apply_noise_layer(&state, &layer_noise)?;
        }
        state
    };

    Ok(PipelineOutput {
        target,
        noisy,
        layer_states: layer_states_of(&plan.circuits, space)?,
        circuits: plan.circuits.clone(),
        trace_before_renorm: 1.0,
        renormalized: false,
    })
}

/// Execute a loss-noise dilution run on the vacuum-extended space.
pub fn run_loss(plan: &DilutionPlan) -> Result<PipelineOutput> {
    let NoiseSpec::Loss { eps } = plan.noise else {
        return Err(CoreError::WrongLocalDim { expected: 3, found: 2 });
    };
    let n = plan.n_qubits();
    let qspace = HilbertSpace::qubits(n)?;
    let lspace = HilbertSpace::lossy(n)?;
    let eps_layer = eps / plan.l_err() as f64;

    let target = target_of(&plan.circuits)?;

    let (noisy, trace_before_renorm, renormalized) = if eps == 0.0 {
        // Zero-rate loss is the identity map on the qubit sector: the noisy
        // state is the (embedded) target exactly and no weight ever reaches
        // the vacuum levels.
        (crate::linalg::embed_density(&target, lspace)?, 1.0, false)
    } else {
        let mut state = DensityOp::basis_state(lspace, 0)?; // all-|0⟩ ket is index 0 in base 3 too
        for w in &plan.circuits {
            // Circuit layers act as X ↦ Ŵ(PXP)Ŵ†. Since Ŵ = embed(W) is zero
            // on the complement, ŴP = Ŵ and the projections are implicit in
            // the conjugation; vacuum branches of earlier layers are
            // annihilated.
            let w_embedded = embed_qubit_op(w.mat(), lspace)?;
            let conj = w_embedded.matmul(state.mat()).matmul(&w_embedded.dagger());
            state = DensityOp::new_unvalidated_psd(lspace, hermitized(conj))?;
            state = apply_loss_layer(&state, eps_layer)?;
        }
        let trace_before_renorm = state.trace_hint();
        let renormalized = plan.renormalize_loss;
        if renormalized {
            state = state.renormalized()?;
        }
        (state, trace_before_renorm, renormalized)
    };

    Ok(PipelineOutput {
        target,
        noisy,
        layer_states: layer_states_of(&plan.circuits, qspace)?,
        circuits: plan.circuits.clone(),
        trace_before_renorm,
        renormalized,
    })
}

fn hermitized(mut m: CMat) -> CMat {
    m.hermitize();
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::NoiseSpec;
    use crate::linalg::qubit_sector_projector;
    use crate::unitary::haar_unitary;

    fn haar_plan(noise: NoiseSpec, n: usize, l_err: usize, seed: u64) -> DilutionPlan {
        let mut rng = RngStream::from_seed(seed);
        let circuits = (0..l_err)
            .map(|_| haar_unitary(1 << n, &mut rng).unwrap())
            .collect();
        DilutionPlan::new(noise, circuits).unwrap()
    }

    #[test]
    fn pauli_zero_rate_reproduces_target() {
        let plan = haar_plan(NoiseSpec::depolarizing(0.0).unwrap(), 2, 3, 41);
        let out = run_pauli(&plan).unwrap();
        assert_eq!(out.noisy.mat().max_abs_diff(out.target.mat()), 0.0);
        assert_eq!(out.trace_before_renorm, 1.0);
    }

    #[test]
    fn pauli_dephasing_through_hadamard() {
        // W = H, ε₃ = ε, L_err = 1: |+⟩ dephases to (1−ε)|+⟩⟨+| + ε|−⟩⟨−|.
        let s = 1.0 / libm::sqrt(2.0);
        let h = UnitaryOp::new(CMat::from_real_rows(2, 2, &[s, s, s, -s]).unwrap()).unwrap();
        let eps = 0.23;
        let plan =
            DilutionPlan::new(NoiseSpec::pauli(0.0, 0.0, eps).unwrap(), vec![h]).unwrap();
        let out = run_pauli(&plan).unwrap();
        let plus = [C64::new(s, 0.0), C64::new(s, 0.0)];
        let minus = [C64::new(s, 0.0), C64::new(-s, 0.0)];
        let expect = CMat::outer(&plus)
            .scale_re(1.0 - eps)
            .add(&CMat::outer(&minus).scale_re(eps));
        assert!(out.noisy.mat().max_abs_diff(&expect) < 1e-14);
    }

    #[test]
    fn pauli_trace_stays_one() {
        let plan = haar_plan(NoiseSpec::depolarizing(0.05).unwrap(), 3, 4, 42);
        let out = run_pauli(&plan).unwrap();
        assert!((out.noisy.trace_hint() - 1.0).abs() < 1e-12);
        assert_eq!(out.layer_states.len(), 4);
    }

    #[test]
    fn pauli_overlap_deficit_scales_linearly() {
        // tr[ρρ'] = 1 − c·ε + O(ε²): deficit/ε must converge as ε → 0.
        let mut slopes = [0.0; 3];
        for (i, eps) in [4e-3, 2e-3, 1e-3].into_iter().enumerate() {
            let plan = haar_plan(NoiseSpec::depolarizing(eps).unwrap(), 2, 2, 43);
            let out = run_pauli(&plan).unwrap();
            let overlap = out.target.mat().trace_product(out.noisy.mat()).re;
            slopes[i] = (1.0 - overlap) / eps;
        }
        // Successive slope differences shrink by ~2 (first-order residual
        // halves with ε).
        let d1 = (slopes[1] - slopes[0]).abs();
        let d2 = (slopes[2] - slopes[1]).abs();
        assert!(d2 < 0.75 * d1, "slopes {slopes:?} not converging");
    }

    #[test]
    fn loss_trace_identity_and_factorization() {
        // tr ρ' = (1−ε/L)^((L−1)n) exactly, and the unrenormalized output
        // factorizes as that trace times one loss layer on the target.
        for (n, l_err) in [(1usize, 2usize), (2, 3), (3, 2)] {
            let eps = 0.05;
            let plan = haar_plan(NoiseSpec::loss(eps).unwrap(), n, l_err, 44 + n as u64)
                .without_loss_renormalization();
            let out = run_loss(&plan).unwrap();
            let x = eps / l_err as f64;
            let expect_trace =
                libm::pow(1.0 - x, ((l_err - 1) * n) as f64);
            assert!(
                (out.trace_before_renorm - expect_trace).abs() < 1e-12,
                "trace at n={n} L={l_err}"
            );

            let lspace = HilbertSpace::lossy(n).unwrap();
            let target_emb = crate::linalg::embed_density(&out.target, lspace).unwrap();
            let one_layer = apply_loss_layer(&target_emb, x).unwrap();
            let predicted = one_layer.mat().scale_re(expect_trace);
            assert!(
                out.noisy.mat().max_abs_diff(&predicted) < 1e-12,
                "factorization at n={n} L={l_err}"
            );
        }
    }

    #[test]
    fn loss_single_layer_identity_circuit() {
        let eps = 0.4;
        let plan = DilutionPlan::new(
            NoiseSpec::loss(eps).unwrap(),
            vec![UnitaryOp::identity(2)],
        )
        .unwrap();
        let out = run_loss(&plan).unwrap();
        let expect = CMat::diag(&[1.0 - eps, 0.0, eps]);
        assert!(out.noisy.mat().max_abs_diff(&expect) < 1e-15);
        assert_eq!(out.trace_before_renorm, 1.0); // single layer: no deficit
    }

    #[test]
    fn loss_renormalized_overlap_first_order() {
        // Renormalized: tr[ρ̂ρ'] = 1 − nε/L + O(ε²); halving ε must shrink
        // the second-order residual by ≈ 4.
        let n = 2;
        let l_err = 2;
        let residual = |eps: f64| {
            let plan = haar_plan(NoiseSpec::loss(eps).unwrap(), n, l_err, 45);
            let out = run_loss(&plan).unwrap();
            let lspace = HilbertSpace::lossy(n).unwrap();
            let temb = crate::linalg::embed_density(&out.target, lspace).unwrap();
            let overlap = temb.mat().trace_product(out.noisy.mat()).re;
            overlap - (1.0 - n as f64 * eps / l_err as f64)
        };
        let r1 = residual(2e-2);
        let r2 = residual(1e-2);
        assert!(
            (r1 / r2 - 4.0).abs() < 0.3,
            "residual ratio {} not ≈ 4 (r1={r1:.3e}, r2={r2:.3e})",
            r1 / r2
        );
    }

    #[test]
    fn loss_noisy_state_has_no_sector_crossing_coherence() {
        let plan = haar_plan(NoiseSpec::loss(0.08).unwrap(), 2, 3, 46);
        let out = run_loss(&plan).unwrap();
        let lspace = HilbertSpace::lossy(2).unwrap();
        let p = qubit_sector_projector(lspace).unwrap();
        let q = CMat::identity(9).sub(&p);
        let crossing = p.matmul(out.noisy.mat()).matmul(&q);
        assert!(crossing.max_abs() < 1e-12);
    }

    #[test]
    fn target_of_identity_circuits_is_ground_state() {
        let circuits = vec![UnitaryOp::identity(4); 3];
        let t = target_of(&circuits).unwrap();
        let expect = DensityOp::basis_state(HilbertSpace::qubits(2).unwrap(), 0).unwrap();
        assert_eq!(t.mat().max_abs_diff(expect.mat()), 0.0);
    }

    #[test]
    fn target_is_pure_for_random_circuits() {
        let plan = haar_plan(NoiseSpec::loss(0.1).unwrap(), 3, 4, 47);
        let t = target_of(plan.circuits()).unwrap();
        assert!((t.purity() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn target_of_composes_in_application_order() {
        let mut rng = RngStream::from_seed(48);
        let w1 = haar_unitary(4, &mut rng).unwrap();
        let w2 = haar_unitary(4, &mut rng).unwrap();
        let t = target_of(&[w1.clone(), w2.clone()]).unwrap();
        let composed = w2.compose(&w1); // W₂W₁
        let space = HilbertSpace::qubits(2).unwrap();
        let expect = DensityOp::new_unvalidated_psd(
            space,
            composed.conjugate(DensityOp::basis_state(space, 0).unwrap().mat()),
        )
        .unwrap();
        assert!(t.mat().max_abs_diff(expect.mat()) < 1e-13);
    }

    #[test]
    fn layer_states_match_prefix_products() {
        let plan = haar_plan(NoiseSpec::depolarizing(0.02).unwrap(), 2, 3, 49);
        let out = run_pauli(&plan).unwrap();
        let w = plan.circuits();
        let u21 = w[1].compose(&w[0]);
        let space = HilbertSpace::qubits(2).unwrap();
        let rho2 = DensityOp::new_unvalidated_psd(
            space,
            u21.conjugate(DensityOp::basis_state(space, 0).unwrap().mat()),
        )
        .unwrap();
        assert!(out.layer_states[1].mat().max_abs_diff(rho2.mat()) < 1e-13);
        assert!(out.layer_states[2].mat().max_abs_diff(out.target.mat()) < 1e-14);
    }

    #[test]
    fn plan_validation() {
        assert!(DilutionPlan::new(NoiseSpec::loss(0.1).unwrap(), vec![]).is_err());
        let mixed_dims = vec![UnitaryOp::identity(2), UnitaryOp::identity(4)];
        assert!(DilutionPlan::new(NoiseSpec::loss(0.1).unwrap(), mixed_dims).is_err());
        let not_pow2 = vec![UnitaryOp::identity(3)];
        assert!(DilutionPlan::new(NoiseSpec::loss(0.1).unwrap(), not_pow2).is_err());
    }

    #[test]
    fn run_dispatches_on_noise_kind() {
        let plan = haar_plan(NoiseSpec::loss(0.05).unwrap(), 2, 2, 50);
        let out = plan.run().unwrap();
        assert_eq!(out.noisy.space().local_dim(), 3);
        let plan = haar_plan(NoiseSpec::depolarizing(0.05).unwrap(), 2, 2, 50);
        let out = plan.run().unwrap();
        assert_eq!(out.noisy.space().local_dim(), 2);
    }
}
