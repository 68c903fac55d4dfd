//! Log-space dynamic programming over the label lattice.

use crate::error::{Error, Result};

/// Per-position label marginals and the log partition function.
#[derive(Debug, Clone)]
pub struct MarginalTable {
    /// `|sentence| × |labels|`, rows sum to 1.
    pub node: Vec<Vec<f64>>,
    pub sentence_log_z: f64,
}

pub(crate) fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = xs.iter().map(|x| (x - m).exp()).sum();
    m + sum.ln()
}

/// Forward and backward tables plus `log Z`; shared by marginals and the
/// gradient computation.
pub(crate) fn forward_backward_tables(
    node: &[Vec<f64>],
    trans: &[Vec<f64>],
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, f64) {
    let t_len = node.len();
    let l = node[0].len();
    let mut alpha = vec![vec![0.0; l]; t_len];
    alpha[0].clone_from(&node[0]);
    let mut scratch = vec![0.0; l];
    for t in 1..t_len {
        for y in 0..l {
            for (y_prev, s) in scratch.iter_mut().enumerate() {
                *s = alpha[t - 1][y_prev] + trans[y_prev][y];
            }
            alpha[t][y] = node[t][y] + logsumexp(&scratch);
        }
    }
    let log_z = logsumexp(&alpha[t_len - 1]);

    let mut beta = vec![vec![0.0; l]; t_len];
    for t in (0..t_len.saturating_sub(1)).rev() {
        for y in 0..l {
            for (y_next, s) in scratch.iter_mut().enumerate() {
                *s = trans[y][y_next] + node[t + 1][y_next] + beta[t + 1][y_next];
            }
            beta[t][y] = logsumexp(&scratch);
        }
    }
    (alpha, beta, log_z)
}

/// Node marginals `p(y_t | x)` and the log partition function, computed in
/// log space. Rows are normalized to sum exactly to 1.
pub fn forward_backward(node: &[Vec<f64>], trans: &[Vec<f64>]) -> MarginalTable {
    let (alpha, beta, log_z) = forward_backward_tables(node, trans);
    let marginals = alpha
        .iter()
        .zip(&beta)
        .map(|(a_row, b_row)| {
            let mut row: Vec<f64> = a_row
                .iter()
                .zip(b_row)
                .map(|(a, b)| (a + b - log_z).exp())
                .collect();
            let sum: f64 = row.iter().sum();
            if sum > 0.0 {
                for p in &mut row {
                    *p /= sum;
                }
            }
            row
        })
        .collect();
    MarginalTable {
        node: marginals,
        sentence_log_z: log_z,
    }
}

/// Highest-scoring label path. Among equal-scoring paths, returns the
/// lexicographically smallest label-id sequence (lowest id wins at the
/// leftmost differing position), which makes repeated calls deterministic.
pub fn viterbi(node: &[Vec<f64>], trans: &[Vec<f64>]) -> Vec<u32> {
    let t_len = node.len();
    let l = node[0].len();
    // Backward best-suffix scores, so the forward trace can pick the lowest
    // label id first at every tie.
    let mut delta = vec![vec![0.0; l]; t_len];
    delta[t_len - 1].clone_from(&node[t_len - 1]);
    for t in (0..t_len.saturating_sub(1)).rev() {
        for y in 0..l {
            let mut best = f64::NEG_INFINITY;
            for y_next in 0..l {
                let s = trans[y][y_next] + delta[t + 1][y_next];
                if s > best {
                    best = s;
                }
            }
            delta[t][y] = node[t][y] + best;
        }
    }

    let mut path = Vec::with_capacity(t_len);
    let mut best_y = 0usize;
    let mut best = f64::NEG_INFINITY;
    for (y, &score) in delta[0].iter().enumerate() {
        if score > best {
            best = score;
            best_y = y;
        }
    }
    path.push(best_y as u32);
    for t in 1..t_len {
        let prev = *path.last().unwrap() as usize;
        let mut next_y = 0usize;
        let mut best = f64::NEG_INFINITY;
        for y in 0..l {
            let s = trans[prev][y] + delta[t][y];
            if s > best {
                best = s;
                next_y = y;
            }
        }
        path.push(next_y as u32);
    }
    path
}

/// Smallest probability admitted before taking logs; propagation can emit
/// exact zeros.
pub const MARGINAL_FLOOR: f64 = 1e-12;

/// Viterbi over `log p̂(y_t) + transition_scores[y_{t-1}, y_t]`, where `p̂`
/// are interpolated per-position label distributions.
///
/// Each row must be a distribution: entries non-negative, summing to 1
/// within `1e-6`. Zero entries are floored at `1e-12` before the log.
pub fn constrained_viterbi(marginals: &[Vec<f64>], trans: &[Vec<f64>]) -> Result<Vec<u32>> {
    let mut node = Vec::with_capacity(marginals.len());
    for (row_idx, row) in marginals.iter().enumerate() {
        let sum: f64 = row.iter().sum();
        if !(sum - 1.0).abs().is_finite() || (sum - 1.0).abs() > 1e-6 {
            return Err(Error::MarginalRow { row: row_idx, sum });
        }
        if row.iter().any(|&p| p < -1e-9) {
            return Err(Error::Contract(format!(
                "negative probability in marginal row {row_idx}"
            )));
        }
        node.push(
            row.iter()
                .map(|&p| p.max(MARGINAL_FLOOR).ln())
                .collect::<Vec<f64>>(),
        );
    }
    Ok(viterbi(&node, trans))
}


#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_marginals_for_flat_scores() {
        let node = vec![vec![0.0; 3]];
        let trans = vec![vec![0.0; 3]; 3];
        let m = forward_backward(&node, &trans);
        for &p in &m.node[0] {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
        assert!((m.sentence_log_z - 3.0_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn two_position_marginals_match_enumeration() {
        let node = vec![vec![0.3, -0.7], vec![1.1, 0.4]];
        let trans = vec![vec![0.2, -0.1], vec![0.5, 0.9]];
        let got = forward_backward(&node, &trans);
        let (want, want_log_z) = enumeration::marginals(&node, &trans);
        assert!((got.sentence_log_z - want_log_z).abs() < 1e-12);
        for (g_row, w_row) in got.node.iter().zip(&want) {
            for (g, w) in g_row.iter().zip(w_row) {
                assert!((g - w).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn viterbi_tie_break_returns_all_zeros() {
        let node = vec![vec![0.0; 4]; 3];
        let trans = vec![vec![0.0; 4]; 4];
        assert_eq!(viterbi(&node, &trans), vec![0, 0, 0]);
    }

    #[test]
    fn viterbi_decomposes_without_transitions() {
        let node = vec![vec![0.0, 2.0, 0.0], vec![3.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]];
        let trans = vec![vec![0.0; 3]; 3];
        assert_eq!(viterbi(&node, &trans), vec![1, 0, 2]);
    }

    #[test]
    fn viterbi_prefers_lexicographically_smallest_tie() {
        // Paths [0,1] and [1,0] both score 1; the lexicographically smaller
        // one must win.
        let node = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        let trans = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert_eq!(viterbi(&node, &trans), vec![0, 1]);
        assert_eq!(enumeration::argmax_path(&node, &trans), vec![0, 1]);
    }

    #[test]
    fn constrained_viterbi_decomposes_without_transitions() {
        let marginals = vec![vec![0.2, 0.8], vec![0.9, 0.1]];
        let trans = vec![vec![0.0; 2]; 2];
        assert_eq!(constrained_viterbi(&marginals, &trans).unwrap(), vec![1, 0]);
    }

    #[test]
    fn constrained_viterbi_reduces_to_transition_viterbi_on_uniform_rows() {
        let marginals = vec![vec![0.5, 0.5]; 3];
        let trans = vec![vec![0.1, 0.9], vec![0.8, 0.2]];
        let plain = viterbi(&vec![vec![0.0; 2]; 3], &trans);
        assert_eq!(constrained_viterbi(&marginals, &trans).unwrap(), plain);
    }

    #[test]
    fn constrained_viterbi_rejects_unnormalized_rows() {
        let marginals = vec![vec![0.7, 0.7]];
        let trans = vec![vec![0.0; 2]; 2];
        match constrained_viterbi(&marginals, &trans) {
            Err(Error::MarginalRow { row, .. }) => assert_eq!(row, 0),
            other => panic!("expected MarginalRow error, got {other:?}"),
        }
    }

    #[test]
    fn constrained_viterbi_floors_exact_zeros() {
        let marginals = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let trans = vec![vec![0.0; 2]; 2];
        assert_eq!(constrained_viterbi(&marginals, &trans).unwrap(), vec![0, 1]);
    }

    /// Quarter-integer scores keep every path sum exact in f64, so argmax
    /// comparisons and tie-breaks agree bit-for-bit with the oracle.
    fn quarter_scores(t_len: usize, l: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let node = (0..t_len)
            .map(|_| (0..l).map(|_| rng.gen_range(-8..=8) as f64 * 0.25).collect())
            .collect();
        let trans = (0..l)
            .map(|_| (0..l).map(|_| rng.gen_range(-8..=8) as f64 * 0.25).collect())
            .collect();
        (node, trans)
    }

    proptest! {
        #[test]
        fn random_marginals_match_enumeration(
            t_len in 1usize..5,
            l in 1usize..4,
            seed in 0u64..500,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let node: Vec<Vec<f64>> = (0..t_len)
                .map(|_| (0..l).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect();
            let trans: Vec<Vec<f64>> = (0..l)
                .map(|_| (0..l).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect();
            let got = forward_backward(&node, &trans);
            let (want, want_log_z) = enumeration::marginals(&node, &trans);
            prop_assert!((got.sentence_log_z - want_log_z).abs() < 1e-9);
            for (g_row, w_row) in got.node.iter().zip(&want) {
                let row_sum: f64 = g_row.iter().sum();
                prop_assert!((row_sum - 1.0).abs() < 1e-9);
                for (g, w) in g_row.iter().zip(w_row) {
                    prop_assert!((g - w).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn random_viterbi_matches_enumeration(
            t_len in 1usize..6,
            l in 1usize..5,
            seed in 0u64..500,
        ) {
            let (node, trans) = quarter_scores(t_len, l, seed);
            prop_assert_eq!(viterbi(&node, &trans), enumeration::argmax_path(&node, &trans));
        }

        #[test]
        fn shifting_one_position_leaves_marginals_and_path_unchanged(
            t_len in 2usize..5,
            l in 2usize..4,
            seed in 0u64..200,
            shift in -3.0f64..3.0,
        ) {
            let (node, trans) = quarter_scores(t_len, l, seed);
            let pos = (seed as usize) % t_len;
            let mut shifted = node.clone();
            for y in 0..l {
                shifted[pos][y] += shift;
            }
            let a = forward_backward(&node, &trans);
            let b = forward_backward(&shifted, &trans);
            for (ra, rb) in a.node.iter().zip(&b.node) {
                for (pa, pb) in ra.iter().zip(rb) {
                    prop_assert!((pa - pb).abs() < 1e-9);
                }
            }
            prop_assert!((b.sentence_log_z - a.sentence_log_z - shift).abs() < 1e-9);
            // Viterbi path also unchanged: use quarter shifts for exactness.
            let quarter_shift = (shift * 4.0).round() / 4.0;
            let mut shifted_q = node.clone();
            for y in 0..l {
                shifted_q[pos][y] += quarter_shift;
            }
            prop_assert_eq!(viterbi(&node, &trans), viterbi(&shifted_q, &trans));
        }
    }
}
