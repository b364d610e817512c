//! Label permutations: exhaustive enumeration and the assignment problem.

use nalgebra::DMatrix;

/// Largest `k` for which `k!` candidates are scanned exhaustively.
pub const MAX_EXHAUSTIVE_K: usize = 8;

/// All permutations of `0..k` in lexicographic order.
pub fn permutations(k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut p: Vec<usize> = (0..k).collect();
    loop {
        out.push(p.clone());
        // Next lexicographic permutation.
        let Some(i) = (1..k).rev().find(|&i| p[i - 1] < p[i]) else {
            return out;
        };
        let j = (i..k).rev().find(|&j| p[j] > p[i - 1]).unwrap();
        p.swap(i - 1, j);
        p[i..].reverse();
    }
}

/// Minimum-cost perfect assignment on a square cost matrix.
///
/// Returns `assign` with row `r` matched to column `assign[r]`. Shortest
/// augmenting path formulation with row and column potentials, `O(k³)`.
pub fn hungarian(cost: &DMatrix<f64>) -> Vec<usize> {
    let n = cost.nrows();
    assert_eq!(n, cost.ncols(), "assignment needs a square cost matrix");
    // 1-based arrays; column 0 is a virtual source.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r = owner[col0];
            let mut delta = f64::INFINITY;
            let mut next = 0;
            for c in 1..=n {
                if used[c] {
                    continue;
                }
                let reduced = cost[(r - 1, c - 1)] - u[r] - v[c];
                if reduced < minv[c] {
                    minv[c] = reduced;
                    way[c] = col0;
                }
                if minv[c] < delta {
                    delta = minv[c];
                    next = c;
                }
            }
            for c in 0..=n {
                if used[c] {
                    u[owner[c]] += delta;
                    v[c] -= delta;
                } else {
                    minv[c] -= delta;
                }
            }
            col0 = next;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            owner[col0] = owner[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for c in 1..=n {
        if owner[c] > 0 {
            assign[owner[c] - 1] = c - 1;
        }
    }
    assign
}

/// Permutation `p` maximizing `Σ_r score[(r, p[r])]`; exhaustive for small
/// `k` (first maximum in lexicographic order), assignment solver above.
pub fn best_assignment(score: &DMatrix<f64>) -> Vec<usize> {
    let k = score.nrows();
    if k <= MAX_EXHAUSTIVE_K {
        let mut best = (f64::NEG_INFINITY, Vec::new());
        for p in permutations(k) {
            let s: f64 = p.iter().enumerate().map(|(r, &c)| score[(r, c)]).sum();
            if s > best.0 {
                best = (s, p);
            }
        }
        best.1
    } else {
        hungarian(&score.map(|s| -s))
    }
}

/// Inverse permutation.
pub fn invert(p: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; p.len()];
    for (i, &j) in p.iter().enumerate() {
        inv[j] = i;
    }
    inv
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumerates_factorial() {
        assert_eq!(permutations(0), vec![Vec::<usize>::new()]);
        assert_eq!(permutations(3).len(), 6);
        assert_eq!(permutations(3)[1], vec![0, 2, 1]);
        assert_eq!(permutations(5).len(), 120);
    }

    #[test]
    fn hungarian_matches_exhaustive() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for k in 1..=6 {
            for _ in 0..20 {
                let c = DMatrix::from_fn(k, k, |_, _| rng.random_range(0..10) as f64);
                let h = hungarian(&c);
                let h_cost: f64 = h.iter().enumerate().map(|(r, &j)| c[(r, j)]).sum();
                let best = permutations(k)
                    .iter()
                    .map(|p| p.iter().enumerate().map(|(r, &j)| c[(r, j)]).sum::<f64>())
                    .fold(f64::INFINITY, f64::min);
                assert_eq!(h_cost, best);
            }
        }
    }

    #[test]
    fn invert_roundtrip() {
        let p = vec![2, 0, 3, 1];
        let inv = invert(&p);
        assert!((0..4).all(|i| inv[p[i]] == i));
    }
}
