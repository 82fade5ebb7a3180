//! Exact linear assignment by shortest augmenting paths with dual
//! potentials (Hungarian / Jonker-Volgenant style), `O(n³)`.

use crate::eot::CostMatrix;
use crate::perm::Permutation;

/// Minimizes `Σ_i C(i, π(i))` over permutations. The returned permutation
/// maps each row to its assigned column. Ties resolve deterministically
/// toward smaller column indices.
pub fn lap_solve(c: &CostMatrix) -> (Permutation, f64) {
    let n = c.n();
    if n == 0 {
        return (Permutation::identity(0), 0.0);
    }
    // 1-based arrays with a virtual column 0
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut col_owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        col_owner[0] = row;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = c.get(i0 - 1, j - 1) - u[i0] - v[j];
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
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; n];
    for j in 1..=n {
        assign[col_owner[j] - 1] = j - 1;
    }
    let total = assign.iter().enumerate().map(|(i, &j)| c.get(i, j)).sum();
    let p = Permutation::from_vec(assign).expect("assignment is a bijection");
    (p, total)
}
