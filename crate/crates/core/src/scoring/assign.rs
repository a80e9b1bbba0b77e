//! Dense Hungarian algorithm (shortest augmenting path with potentials), O(n^3).

/// Minimum-cost perfect assignment on a square matrix; `result[row] = col`.
pub(crate) fn min_cost_assignment(costs: &[Vec<f64>]) -> Vec<usize> {
    let n = costs.len();
    if n == 0 {
        return Vec::new();
    }
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = costs[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            out[p[j] - 1] = j - 1;
        }
    }
    out
}

/// Injective row-to-column matching maximizing total `weights`, for a
/// rectangular matrix. Rows left unmatched, or matched with zero weight,
/// map to `None`.
pub(crate) fn max_weight_matching(weights: &[Vec<f64>], ncols: usize) -> Vec<Option<usize>> {
    let nrows = weights.len();
    let n = nrows.max(ncols);
    let max = weights.iter().flatten().cloned().fold(0.0, f64::max);
    let costs: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| max - if i < nrows && j < ncols { weights[i][j] } else { 0.0 })
                .collect()
        })
        .collect();
    let assign = min_cost_assignment(&costs);
    (0..nrows)
        .map(|i| {
            let j = assign[i];
            (j < ncols && weights[i][j] > 0.0).then_some(j)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(weights: &[Vec<f64>], ncols: usize) -> f64 {
        fn go(w: &[Vec<f64>], row: usize, used: &mut Vec<bool>) -> f64 {
            if row == w.len() {
                return 0.0;
            }
            let mut best = go(w, row + 1, used);
            for j in 0..used.len() {
                if !used[j] {
                    used[j] = true;
                    best = best.max(w[row][j] + go(w, row + 1, used));
                    used[j] = false;
                }
            }
            best
        }
        go(weights, 0, &mut vec![false; ncols])
    }

    #[test]
    fn small_square() {
        let costs = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let a = min_cost_assignment(&costs);
        let total: f64 = a.iter().enumerate().map(|(i, &j)| costs[i][j]).sum();
        assert_eq!(total, 5.0);
    }

    proptest! {
        #[test]
        fn matches_brute_force(r in 1usize..6, c in 1usize..6, seed in proptest::collection::vec(0u32..50, 36)) {
            let w: Vec<Vec<f64>> = (0..r).map(|i| (0..c).map(|j| seed[i * 6 + j] as f64 / 7.0).collect()).collect();
            let m = max_weight_matching(&w, c);
            let mut used = vec![false; c];
            let mut total = 0.0;
            for (i, mj) in m.iter().enumerate() {
                if let Some(j) = *mj {
                    prop_assert!(!used[j]);
                    used[j] = true;
                    total += w[i][j];
                }
            }
            prop_assert!((total - brute(&w, c)).abs() < 1e-9);
        }
    }
}
