//! Half-chain entanglement of eigenstates against energy; mid-spectrum states
//! approach the maximal value.

use ethlab::eth::{eigenstate_scatter, ScatterQuantity};
use ethlab::lattice::HamiltonianSpec;
use ethlab::sectors::Symmetry;
use ethlab::spectral::Spectrum;

fn main() -> ethlab::Result<()> {
    let l = 10;
    let spectrum = Spectrum::build(&HamiltonianSpec::qubit(l), &[Symmetry::Parity])?;
    let half: Vec<usize> = (1..=l / 2).collect();
    let points = eigenstate_scatter(&spectrum, ScatterQuantity::Entropy(&half))?;
    let stride = points.len() / 16;
    for p in points.iter().step_by(stride) {
        println!("E = {:+.4}  S = {:.3} bits", p.energy, p.value);
    }
    println!("maximum possible: {} bits", l / 2);
    Ok(())
}
