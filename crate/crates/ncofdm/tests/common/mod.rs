//! Shared oracles for integration tests. These stay independent of the
//! library's analytic evaluation paths.

use ncofdm::C64;

/// Finite-difference weights for derivatives up to `max_order` evaluated at
/// `x0` from the given nodes, by the stable Fornberg recursion.
/// Returns `weights[j][k]` = weight of node j for the k-th derivative.
pub fn fornberg_weights(x0: f64, nodes: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = nodes.len() - 1;
    let m = max_order;
    let mut d = vec![vec![vec![0.0f64; m + 1]; n + 1]; n + 1];
    d[0][0][0] = 1.0;
    let mut c1 = 1.0;
    for nn in 1..=n {
        let mut c2 = 1.0;
        for nu in 0..nn {
            let c3 = nodes[nn] - nodes[nu];
            c2 *= c3;
            for k in 0..=m.min(nn) {
                let prev = d[nn - 1][nu][k];
                let prev_lower = if k > 0 { d[nn - 1][nu][k - 1] } else { 0.0 };
                d[nn][nu][k] =
                    ((nodes[nn] - x0) * prev - k as f64 * prev_lower) / c3;
            }
        }
        for k in 0..=m.min(nn) {
            let prev = d[nn - 1][nn - 1][k];
            let prev_lower = if k > 0 { d[nn - 1][nn - 1][k - 1] } else { 0.0 };
            d[nn][nn][k] = c1 / c2 * (k as f64 * prev_lower - (nodes[nn - 1] - x0) * prev);
        }
        c1 = c2;
    }
    (0..=n).map(|j| (0..=m).map(|k| d[n][j][k]).collect()).collect()
}

/// Weights for the `order`-th derivative at `x0` from `nodes`.
pub fn fd_weights_at(order: usize, nodes: &[f64]) -> Vec<f64> {
    assert!(nodes.len() > order);
    fornberg_weights(0.0, nodes, order).iter().map(|per_node| per_node[order]).collect()
}

/// One-sided derivative estimates at the junction time `at` (a sample
/// index): the right limit uses samples `at, at+1, ...`; the left limit uses
/// samples `at-1, at-2, ...` with the evaluation point still at `at`.
pub fn fd_one_sided(samples: &[C64], at: usize, order: usize, points: usize, right: bool) -> C64 {
    let nodes: Vec<f64> = if right {
        (0..points).map(|j| j as f64).collect()
    } else {
        (0..points).map(|j| -(j as f64) - 1.0).collect()
    };
    let w = fd_weights_at(order, &nodes);
    let mut acc = C64::new(0.0, 0.0);
    for (j, &c) in w.iter().enumerate() {
        let idx = if right { at + j } else { at - 1 - j };
        acc += samples[idx] * c;
    }
    acc
}
