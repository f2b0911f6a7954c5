//! Builds operators from text expressions.

use ethlab::cli::{operator_selector, Observable};

fn main() -> ethlab::Result<()> {
    for (expr, l, d) in [
        ("sz(1)", 4, 2),
        ("sx(2)*sx(3) + 0.5*sz(4)", 4, 2),
        ("sx(*)", 4, 2),
        ("Q", 3, 3),
        ("lambda4(1)*lambda4(2) + lambda5(1)*lambda5(2)", 3, 3),
    ] {
        let op = operator_selector(expr, l, d, None)?;
        println!(
            "{expr:48} dim {:3}  nnz {:3}  trace {:+.1}  hermitian {}",
            op.dim(),
            op.nnz(),
            op.trace().re,
            op.is_hermitian(1e-12)
        );
    }
    if let Observable::Entropy(sites) = Observable::parse("S(1,2)", 4, 2, None)? {
        println!("S(1,2) -> entropy of sites {sites:?}");
    }
    match operator_selector("sx(9)", 4, 2, None) {
        Err(e) => println!("sx(9) on 4 sites: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
