//! Ratio of diagonal to off-diagonal matrix elements of a local operator in
//! the energy eigenbasis, for growing chains.

use ethlab::cli::operator_selector;
use ethlab::eth::{diag_offdiag_ratio, energy_basis_elements, scaling_fit};
use ethlab::lattice::HamiltonianSpec;
use ethlab::sectors::Symmetry;
use ethlab::spectral::Spectrum;

fn main() -> ethlab::Result<()> {
    let mut points = Vec::new();
    for l in 6..=10 {
        let spectrum = Spectrum::build(&HamiltonianSpec::qubit(l), &[Symmetry::Parity])?;
        let op = operator_selector("sz(1)*sz(2)", l, 2, None)?;
        let r = diag_offdiag_ratio(&energy_basis_elements(&spectrum, &op)?)?;
        println!("L = {l:2}  ratio = {:.3}", r.ratio);
        points.push((l as f64, r.ratio));
    }
    let fit = scaling_fit(&points, true)?;
    println!("ln ratio grows by {:.3} per site", fit.slope);
    Ok(())
}
