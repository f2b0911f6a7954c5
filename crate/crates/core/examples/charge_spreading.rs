//! Charge placed on one site of the qutrit chain spreads over the whole chain
//! while the total stays fixed.

use ethlab::dynamics::{charge_profile, uniform_grid, StateVector};
use ethlab::lattice::HamiltonianSpec;
use ethlab::sectors::Symmetry;
use ethlab::spectral::Spectrum;

fn main() -> ethlab::Result<()> {
    let l = 6;
    let spectrum = Spectrum::build(&HamiltonianSpec::qutrit(l, 1.0, 11), &[Symmetry::Charge])?;
    let psi = StateVector::basis(&[2, 0, 0, 0, 0, 0], 3)?;
    let times = uniform_grid(0.0, 100.0, 10.0)?;
    let profile = charge_profile(&psi, &spectrum, &times)?;
    for (k, t) in times.iter().enumerate() {
        let row: Vec<f64> = profile.iter().map(|s| s.values[k]).collect();
        let cells: Vec<String> = row.iter().map(|q| format!("{q:.3}")).collect();
        println!("t = {t:5.0}  [{}]  total {:.6}", cells.join(" "), row.iter().sum::<f64>());
    }
    Ok(())
}
