//! Minimal end-to-end use of the core library: build a two-layer diluted
//! depolarizing pipeline, distill the noisy output at a few orders, and
//! print the mean squared error against the noiseless target.

use vdist_core::channel::NoiseSpec;
use vdist_core::distill::{distill, mse};
use vdist_core::pipeline::{target_of, DilutionPlan};
use vdist_core::rng::RngStream;
use vdist_core::unitary::haar_unitary;

fn main() -> vdist_core::Result<()> {
    let mut rng = RngStream::from_seed(7);
    // Two Haar subcircuits on 2 qubits with a depolarizing layer of rate
    // eps/2 after each one.
    let circuits = vec![haar_unitary(4, &mut rng)?, haar_unitary(4, &mut rng)?];
    let target = target_of(&circuits)?;
    let plan = DilutionPlan::new(NoiseSpec::depolarizing(0.02)?, circuits)?;
    let noisy = plan.run()?;
    for m in [1, 2, 3] {
        let distilled = distill(&noisy.noisy, m)?;
        println!("M={m}: mse={:.3e}", mse(&target, &distilled.state)?);
    }
    Ok(())
}
