//! Local operators, lattice embedding and the qubit/qutrit chain Hamiltonians.
//!
//! Basis convention: index = sum_r s_r * d^(L - r), so site 1 is the most
//! significant digit. Qutrit levels are ordered |0>, |1>, |2> and the local
//! charge counts occupation of |2>.

mod hamiltonian;
mod local;
mod operator;

pub use hamiltonian::{
    build_charge_operators, build_charge_spread, build_charge_spread_from_rows, build_qubit_hamiltonian,
    build_qutrit_hamiltonian, charge_of_index, digits, embed_at_site, index_of, product_operator, ChainKind,
    HamiltonianSpec, OperatorSum, ProductTerm,
};
pub use local::LocalOperator;
pub use operator::OperatorMatrix;
