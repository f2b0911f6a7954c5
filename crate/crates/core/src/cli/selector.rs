//! Observable expressions.
//!
//! ```text
//! expr    := term ('+' term)*
//! term    := factor ('*' factor)*
//! factor  := number | 'Q' | 'H' | name '(' site ')' | name '(*)'
//! name    := sx | sy | sz | lambda1 .. lambda8 | q
//! ```
//!
//! `name(*)` is the product over every site. On qutrit chains `sx`, `sy`, `sz`
//! act on the embedded qubit levels (lambda1, lambda2, lambda3). Entropies are
//! written `S(i,j,...)` and are handled by [`Observable`].

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{embed_at_site, product_operator, LocalOperator, OperatorMatrix};

/// A quantity recorded along trajectories or in eigenstates.
#[derive(Clone, Debug)]
pub enum Observable {
    Operator(OperatorMatrix),
    Entropy(Vec<usize>),
}

impl Observable {
    pub fn parse(expr: &str, sites: usize, d: usize, h: Option<&OperatorMatrix>) -> Result<Self> {
        let e = expr.trim();
        if let Some(inner) = e.strip_prefix("S(").and_then(|r| r.strip_suffix(')')) {
            let list = inner
                .split(',')
                .map(|s| parse_site(s.trim(), sites))
                .collect::<Result<Vec<_>>>()?;
            return Ok(Observable::Entropy(list));
        }
        operator_selector(e, sites, d, h).map(Observable::Operator)
    }
}

fn parse_site(s: &str, sites: usize) -> Result<usize> {
    let r: usize = s
        .parse()
        .map_err(|_| Error::Selector(format!("bad site index '{s}'")))?;
    if r == 0 || r > sites {
        return Err(Error::Selector(format!("site {r} out of range 1..={sites}")));
    }
    Ok(r)
}

fn local(name: &str, d: usize) -> Result<LocalOperator> {
    let qubit_level = |k: usize| {
        if d == 2 {
            [LocalOperator::sigma_x(), LocalOperator::sigma_y(), LocalOperator::sigma_z()][k - 1].clone()
        } else {
            LocalOperator::gell_mann(k)
        }
    };
    match name {
        "sx" => Ok(qubit_level(1)),
        "sy" => Ok(qubit_level(2)),
        "sz" => Ok(qubit_level(3)),
        "q" if d == 3 => Ok(LocalOperator::charge()),
        _ => {
            if let Some(k) = name.strip_prefix("lambda").and_then(|k| k.parse::<usize>().ok()) {
                if d == 3 && (1..=8).contains(&k) {
                    return Ok(LocalOperator::gell_mann(k));
                }
            }
            Err(Error::Selector(format!("unknown operator '{name}' for local dimension {d}")))
        }
    }
}

fn factor(tok: &str, sites: usize, d: usize, h: Option<&OperatorMatrix>) -> Result<OperatorMatrix> {
    let dim = d.pow(sites as u32);
    match tok {
        "H" => return h.cloned().ok_or_else(|| Error::Selector("H is not available here".into())),
        "Q" => {
            let q = local("q", d)?;
            let mut acc = OperatorMatrix::zeros(dim);
            for r in 1..=sites {
                acc = acc.add(&embed_at_site(&q, r, sites, d)?);
            }
            return Ok(acc);
        }
        _ => {}
    }
    if let Ok(c) = tok.parse::<f64>() {
        return Ok(OperatorMatrix::identity(dim).scale(Complex64::new(c, 0.0)));
    }
    let open = tok
        .find('(')
        .filter(|_| tok.ends_with(')'))
        .ok_or_else(|| Error::Selector(format!("cannot parse '{tok}'")))?;
    let name = &tok[..open];
    let arg = tok[open + 1..tok.len() - 1].trim();
    let op = local(name, d)?;
    if arg == "all" {
        let f: Vec<(usize, &LocalOperator)> = (1..=sites).map(|r| (r, &op)).collect();
        return product_operator(&f, sites, d);
    }
    embed_at_site(&op, parse_site(arg, sites)?, sites, d)
}

/// Assembles the operator named by `expr` on an `L`-site chain of local
/// dimension `d`. `h` supplies the Hamiltonian for the `H` keyword.
pub fn operator_selector(expr: &str, sites: usize, d: usize, h: Option<&OperatorMatrix>) -> Result<OperatorMatrix> {
    if !(d == 2 || d == 3) {
        return Err(Error::Selector(format!("local dimension {d} is not supported")));
    }
    let compact: String = expr.chars().filter(|c| !c.is_whitespace()).collect();
    let compact = compact.replace("(*)", "(all)");
    if compact.is_empty() {
        return Err(Error::Selector("empty expression".into()));
    }
    let mut total: Option<OperatorMatrix> = None;
    for term in compact.split('+') {
        let mut prod: Option<OperatorMatrix> = None;
        for tok in term.split('*') {
            if tok.is_empty() {
                return Err(Error::Selector(format!("empty factor in '{expr}'")));
            }
            let f = factor(tok, sites, d, h)?;
            prod = Some(match prod {
                None => f,
                Some(p) => p.matmul(&f),
            });
        }
        let p = prod.ok_or_else(|| Error::Selector(format!("empty term in '{expr}'")))?;
        total = Some(match total {
            None => p,
            Some(t) => t.add(&p),
        });
    }
    Ok(total.unwrap())
}
