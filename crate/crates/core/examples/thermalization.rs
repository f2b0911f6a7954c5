//! A random product state relaxes to the thermal value fixed by its energy.

use ethlab::cli::operator_selector;
use ethlab::dynamics::{evolve_expectation, random_product_state, time_average, uniform_grid, ProductStateSpec};
use ethlab::ensembles::{gibbs_state, solve_beta, weighted_mean, GibbsParams};
use ethlab::lattice::HamiltonianSpec;
use ethlab::spectral::Spectrum;

fn main() -> ethlab::Result<()> {
    let l = 10;
    let spec = HamiltonianSpec::qubit(l);
    let spectrum = Spectrum::build(&spec, &[])?;
    let terms = spec.terms()?;

    let psi = random_product_state(&ProductStateSpec::qubit(l, 3).with_target(0.0, 0.02), Some(&terms))?;
    let h = spec.build()?;
    let e = h.expectation(&psi.amplitudes).re;

    let op = operator_selector("sx(5)", l, 2, None)?;
    let times = uniform_grid(0.0, 200.0, 10.0)?;
    let series = evolve_expectation(&psi, &spectrum, &op, &times)?;
    for (t, v) in series.times.iter().zip(&series.values) {
        println!("t = {t:5.0}  <sx(5)> = {v:+.4}");
    }

    let beta = solve_beta(&spectrum.energies(), e)?;
    let w = gibbs_state(&spectrum, GibbsParams::beta(beta))?;
    let gibbs = weighted_mean(&w, &spectrum.diagonal_elements(&op)?);
    let avg = time_average(&psi, &spectrum, &op)?;
    println!("energy {e:+.4}, beta {beta:+.4}");
    println!("infinite-time average {:+.4}, Gibbs {:+.4}", avg.value, gibbs);
    Ok(())
}
