//! Nearest-neighbour spacing statistics of the chaotic qubit chain, one
//! parity sector at a time.

use ethlab::lattice::HamiltonianSpec;
use ethlab::sectors::Symmetry;
use ethlab::spectral::{classify_spacing, SpacingDistribution, Spectrum, UnfoldOptions};

fn main() -> ethlab::Result<()> {
    let spectrum = Spectrum::build(&HamiltonianSpec::qubit(12), &[Symmetry::Parity])?;
    for block in &spectrum.blocks {
        let dist = SpacingDistribution::from_levels(&block.eigenvalues, UnfoldOptions::default())?;
        let c = classify_spacing(&dist);
        println!(
            "{:?}: {} levels, chi2 wigner-dyson {:.4}, chi2 poisson {:.4} -> {:?}",
            block.sector.unwrap(),
            dist.levels,
            c.chi2_wigner,
            c.chi2_poisson,
            c.class
        );
    }

    // without resolving parity the two sectors overlap and level repulsion
    // is washed out
    let all = spectrum.energies();
    let c = classify_spacing(&SpacingDistribution::from_levels(&all, UnfoldOptions::default())?);
    println!("full spectrum -> {:?}", c.class);
    Ok(())
}
