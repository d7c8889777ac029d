//! Fixtures shared by the benchmarks.

use trussprox::{
    barrel_vault, barrel_vault_top_nodes, initial_state, HardeningLaw, StateSnapshot, TrussModel,
};

/// Barrel vault `(n, n)` with vertical `250/n` kN on every top node,
/// `h = 0.1 k` and `R⁰ = 100` kN.
pub fn vault_case(n: usize) -> (TrussModel, StateSnapshot, HardeningLaw, Vec<f64>) {
    let model = barrel_vault(n, n).expect("valid vault size");
    let law = HardeningLaw::isotropic_ratio(&model, 0.1);
    let state = initial_state(&model, &vec![100e3; model.num_members()]).expect("positive radius");
    let f = model.nodal_load(barrel_vault_top_nodes(n, n), [0.0, 0.0, -250e3 / n as f64]);
    (model, state, law, f)
}
