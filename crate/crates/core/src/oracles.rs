//! Brute-force reference computations used by the test suites.
//!
//! Nothing here shares code with the solvers it is used to check.

use std::collections::HashMap;

/// Exact minimum of the transportation LP with integer marginals.
///
/// `p_counts` and `q_counts` must have equal totals `K`; the marginals are
/// `p_counts / K` and `q_counts / K`. Every vertex of the transportation
/// polytope is produced by repeatedly picking a cell `(i, j)`, shipping
/// `min(r_i, s_j)` and retiring the exhausted line(s), so the minimum over
/// all such elimination sequences is the LP optimum. Residual states are
/// memoized; masses stay integral so no rounding enters the search.
pub fn transport_lp_oracle(cost: &[Vec<f64>], p_counts: &[u64], q_counts: &[u64]) -> f64 {
    let total: u64 = p_counts.iter().sum();
    assert_eq!(total, q_counts.iter().sum::<u64>(), "marginal totals differ");
    assert!(total > 0);
    let n = p_counts.len();
    let mut state: Vec<u64> = p_counts.to_vec();
    state.extend_from_slice(q_counts);
    let mut memo = HashMap::new();
    let best = eliminate(cost, n, &mut state, &mut memo);
    best / total as f64
}

fn eliminate(cost: &[Vec<f64>], n: usize, state: &mut Vec<u64>, memo: &mut HashMap<Vec<u64>, f64>) -> f64 {
    if state.iter().all(|&v| v == 0) {
        return 0.0;
    }
    if let Some(&v) = memo.get(state.as_slice()) {
        return v;
    }
    let m = state.len() - n;
    let mut best = f64::INFINITY;
    for i in 0..n {
        if state[i] == 0 {
            continue;
        }
        for j in 0..m {
            if state[n + j] == 0 {
                continue;
            }
            let amount = state[i].min(state[n + j]);
            state[i] -= amount;
            state[n + j] -= amount;
            let v = cost[i][j] * amount as f64 + eliminate(cost, n, state, memo);
            state[i] += amount;
            state[n + j] += amount;
            if v < best {
                best = v;
            }
        }
    }
    memo.insert(state.clone(), best);
    best
}

/// Minimum assignment cost over all permutations (Heap's algorithm).
pub fn assignment_brute_force(cost: &[Vec<f64>]) -> f64 {
    let n = cost.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let eval = |perm: &[usize]| perm.iter().enumerate().map(|(i, &j)| cost[i][j]).sum::<f64>();
    let mut best = eval(&perm);
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(eval(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best
}

/// Average ranks (1-based), ties sharing their mean rank.
pub fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut k = 0;
    while k < idx.len() {
        let mut l = k;
        while l + 1 < idx.len() && xs[idx[l + 1]] == xs[idx[k]] {
            l += 1;
        }
        let r = (k + l) as f64 / 2.0 + 1.0;
        for &i in &idx[k..=l] {
            out[i] = r;
        }
        k = l + 1;
    }
    out
}

/// Spearman rank correlation (Pearson correlation of average ranks).
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let ra = ranks(a);
    let rb = ranks(b);
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}
