#![allow(dead_code)]

use lpir_core::rng::{stream, Purpose};
use lpir_core::tabular::TabularMdp;

/// Random MDP number `i` of a family keyed by `seed`: 2..=max_states
/// states, up to `max_actions` actions, α uniform on [0.5, 0.95].
pub fn random_mdp(seed: u64, i: u64, max_states: usize, max_actions: usize) -> TabularMdp {
    use lpir_core::rng::Rng;
    let mut rng = stream(seed, Purpose::Instance, i, 0);
    let n = rng.gen_range(2..=max_states);
    let alpha = rng.gen_range(0.5..0.95);
    TabularMdp::random(n, max_actions, alpha, &mut rng).unwrap()
}

pub fn random_mdp_with(seed: u64, i: u64, n: usize, actions: usize, alpha: f64) -> TabularMdp {
    let mut rng = stream(seed, Purpose::Instance, i, 0);
    TabularMdp::random(n, actions, alpha, &mut rng).unwrap()
}

/// Single state, single action, g = 1.
pub fn unit_cost_state(alpha: f64) -> TabularMdp {
    TabularMdp::new(alpha, vec![vec![vec![1.0]]], vec![vec![vec![1.0]]]).unwrap()
}
