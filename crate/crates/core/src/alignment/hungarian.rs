//! Dense O(n^3) Hungarian algorithm (shortest augmenting path with potentials).

use super::CostMatrix;
use crate::geometry::Permutation;

/// Optimal assignment for a square cost matrix.
///
/// The returned permutation `p` minimizes `sum_j c[p(j), j]`, i.e. column `j`
/// is matched to row `p(j)`. Ties resolve deterministically.
pub fn hungarian(cost: &CostMatrix) -> Permutation {
    let n = cost.n();
    if n == 0 {
        return Permutation::identity(0);
    }

    // 1-based potentials; row_of[j] is the row matched to column j, 0 = free.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0f64; n + 1];
    let mut used = vec![false; n + 1];

    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0usize;
        minv.fill(f64::INFINITY);
        used.fill(false);

        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = cost.get(i0 - 1, j - 1) - u[i0] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }

        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let map = (1..=n).map(|j| row_of[j] - 1).collect();
    Permutation::new(map).expect("hungarian produced a bijection")
}
