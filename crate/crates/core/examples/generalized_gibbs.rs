//! Finds the inverse temperature and charge chemical potential that
//! reproduce a given energy and charge on the qutrit chain.

use ethlab::ensembles::{gibbs_weights, solve_beta_gamma, weighted_mean, ThermalSurface, SurfaceField};
use ethlab::lattice::HamiltonianSpec;
use ethlab::sectors::Symmetry;
use ethlab::spectral::Spectrum;

fn main() -> ethlab::Result<()> {
    let spectrum = Spectrum::build(&HamiltonianSpec::qutrit(5, 1.0, 9), &[Symmetry::Charge])?;
    let e = spectrum.energies();
    let q = spectrum.charges().expect("charge-resolved spectrum");

    for (target_e, target_q) in [(0.0, 5.0 / 3.0), (-0.3, 1.0), (0.2, 3.0)] {
        let p = solve_beta_gamma(&e, &q, target_e, target_q)?;
        let w = gibbs_weights(&e, Some(&q), p)?;
        println!(
            "E = {target_e:+.2}, Q = {target_q:.3}  ->  beta {:+.4}, gamma {:+.4}, mu {:+.4}  (check E {:+.2e}, Q {:+.2e})",
            p.beta,
            p.gamma.unwrap_or(0.0),
            p.mu().unwrap_or(0.0),
            weighted_mean(&w, &e) - target_e,
            weighted_mean(&w, &q) - target_q,
        );
    }

    let surface = ThermalSurface::compute(&spectrum, &[-1.0, 0.0, 1.0], &[-1.0, 0.0, 1.0], 1)?;
    let s = surface.interpolate(SurfaceField::Entropy, 0.5, 0.5).unwrap();
    println!("single-site entropy at beta 0.5, mu 0.5: {s:.4} bits");
    Ok(())
}
