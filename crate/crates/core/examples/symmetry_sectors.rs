//! Block-diagonalizes the qutrit chain by total charge and checks the block
//! sizes against the counting formula.

use ethlab::lattice::HamiltonianSpec;
use ethlab::sectors::{charge_sector_dim, decompose, Symmetry};

fn main() -> ethlab::Result<()> {
    let spec = HamiltonianSpec::qutrit(5, 1.0, 7);
    let blocks = decompose(&spec.build()?, spec.sites, 3, &[Symmetry::Charge])?;
    for b in &blocks {
        let n = b.label.charge.unwrap();
        assert_eq!(b.dim(), charge_sector_dim(spec.sites, n));
        println!("Q = {n}: dim {}", b.dim());
    }
    println!("total {} = 3^5", blocks.iter().map(|b| b.dim()).sum::<usize>());

    // the random charge-spreading couplings break reflection symmetry, so
    // parity only splits the blocks further when they are switched off
    let spec = HamiltonianSpec::qutrit(5, 0.0, 7);
    let blocks = decompose(&spec.build()?, spec.sites, 3, &[Symmetry::Charge, Symmetry::Parity])?;
    for b in &blocks {
        println!("a = 0, Q = {}, P = {:+}: dim {}", b.label.charge.unwrap(), b.label.parity.unwrap(), b.dim());
    }
    let parity = decompose(&HamiltonianSpec::qutrit(5, 1.0, 7).build()?, 5, 3, &[Symmetry::Parity]);
    println!("parity with a = 1: {}", parity.unwrap_err());
    Ok(())
}
