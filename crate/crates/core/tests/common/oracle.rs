//! Brute-force inverse shortest path by vertex enumeration over explicit path
//! comparisons. Independent of the LP kernel and of node potentials.
//!
//! With `base_a = fixed_a + p_a`, an adjustable link on the observed route can
//! only usefully fall (`d_a` in `[0, p_a]`) and one off it only rise (`u_a >= 0`):
//! clipping any other move toward the prior keeps every comparison satisfied
//! and lowers the L1 distance. So per competing route `Q`
//!
//! ```text
//! sum_{P\Q} (base - d) <= sum_{Q\P} (base + u)
//! ```
//!
//! and the objective `sum d + sum u` is minimized over vertices.
#![allow(dead_code, clippy::needless_range_loop)]

use netlearn::graph::{LinkId, Path};
use netlearn::price::PriceVector;

/// Solves `m x = rhs` by Gaussian elimination; `None` when singular.
fn solve_square(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = m[r][col] / m[col][col];
                if f != 0.0 {
                    for c in col..n {
                        m[r][c] -= f * m[col][c];
                    }
                    rhs[r] -= f * rhs[col];
                }
            }
        }
    }
    Some((0..n).map(|i| rhs[i] / m[i][i]).collect())
}

fn combinations(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..=n - (k - cur.len()) {
            cur.push(i);
            go(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    if k <= n {
        go(0, n, k, &mut Vec::with_capacity(k), f);
    }
}

/// Minimum of `sum x` over `{a x <= b}` (which must include `x >= 0` rows), or
/// `None` when the polyhedron is empty.
pub fn min_sum_over_vertices(a: &[Vec<f64>], b: &[f64], dim: usize) -> Option<f64> {
    if dim == 0 {
        return b.iter().all(|&v| v >= -1e-9).then_some(0.0);
    }
    let mut best: Option<f64> = None;
    combinations(a.len(), dim, &mut |rows| {
        let m = rows.iter().map(|&r| a[r].clone()).collect();
        let rhs = rows.iter().map(|&r| b[r]).collect();
        if let Some(x) = solve_square(m, rhs) {
            let feasible = a
                .iter()
                .zip(b)
                .all(|(row, &bi)| row.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() <= bi + 1e-9);
            if feasible {
                let obj: f64 = x.iter().sum();
                best = Some(best.map_or(obj, |v: f64| v.min(obj)));
            }
        }
    });
    best
}

/// Smallest L1 move of `prior` (on the adjustable links) making `observed` no
/// longer than any route in `routes`. Link `a` costs `fixed_a + x_a`; links
/// missing from `prior` are not adjustable. `None` when no move works.
pub fn brute_inverse(
    routes: &[Path],
    observed: &Path,
    fixed: &PriceVector,
    prior: &PriceVector,
) -> Option<f64> {
    let base = |l: LinkId| fixed.get(l).unwrap_or(0.0) + prior.get(l).unwrap_or(0.0);
    let vars: Vec<LinkId> = prior.links().collect();
    let dim = vars.len();
    let mut a = Vec::new();
    let mut b = Vec::new();
    for q in routes {
        let mut row = vec![0.0; dim];
        let mut rhs = 0.0;
        for &l in &observed.links {
            if !q.links.contains(&l) {
                rhs -= base(l);
                if let Some(i) = vars.iter().position(|&v| v == l) {
                    row[i] -= 1.0;
                }
            }
        }
        for &l in &q.links {
            if !observed.links.contains(&l) {
                rhs += base(l);
                if let Some(i) = vars.iter().position(|&v| v == l) {
                    row[i] -= 1.0;
                }
            }
        }
        a.push(row);
        b.push(rhs);
    }
    for (i, &l) in vars.iter().enumerate() {
        let mut lo = vec![0.0; dim];
        lo[i] = -1.0;
        a.push(lo);
        b.push(0.0);
        if observed.links.contains(&l) {
            let mut hi = vec![0.0; dim];
            hi[i] = 1.0;
            a.push(hi);
            b.push(prior.get(l).unwrap());
        }
    }
    min_sum_over_vertices(&a, &b, dim)
}
