//! The simplex solver against brute-force vertex enumeration.

use choicerm::lp::{solve_lp, LinearProgram, LpStatus};
use proptest::prelude::*;

/// Solves the square system `a x = b`; `None` when singular.
#[allow(clippy::needless_range_loop)]
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in 0..n {
            if row != col {
                let f = a[row][col] / a[col][col];
                for j in col..n {
                    a[row][j] -= f * a[col][j];
                }
                b[row] -= f * b[col];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if n < k {
        return vec![];
    }
    let mut out = subsets(n - 1, k);
    for mut s in subsets(n - 1, k - 1) {
        s.push(n - 1);
        out.push(s);
    }
    out
}

/// Maximum over basic feasible points; the feasible region must be bounded
/// and nonempty.
fn vertex_optimum(lp: &LinearProgram) -> f64 {
    let n = lp.num_vars();
    // Rows 0..m are the constraints; rows m.. are `-x_j <= 0`.
    let mut rows: Vec<(Vec<f64>, f64)> = lp
        .constraints
        .iter()
        .map(|c| (c.coefficients.clone(), c.rhs))
        .collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = -1.0;
        rows.push((e, 0.0));
    }
    let mut best = f64::NEG_INFINITY;
    for tight in subsets(rows.len(), n) {
        let a = tight.iter().map(|&i| rows[i].0.clone()).collect();
        let b = tight.iter().map(|&i| rows[i].1).collect();
        let Some(x) = solve_square(a, b) else {
            continue;
        };
        let feasible = rows
            .iter()
            .all(|(a, b)| a.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() <= b + 1e-7);
        if feasible {
            let value: f64 = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
            best = best.max(value);
        }
    }
    best
}

/// Random bounded LP with the origin feasible.
fn bounded_lp() -> impl Strategy<Value = LinearProgram> {
    (1usize..=4, 1usize..=4).prop_flat_map(|(n, m)| {
        (
            prop::collection::vec(-1.0f64..3.0, n),
            prop::collection::vec(prop::collection::vec(-1.0f64..2.0, n), m),
            prop::collection::vec(0.0f64..5.0, m),
            prop::collection::vec(0.5f64..4.0, n),
        )
            .prop_map(|(objective, rows, rhs, caps)| {
                let n = objective.len();
                let mut lp = LinearProgram::new(objective);
                for (row, b) in rows.into_iter().zip(rhs) {
                    lp.add_le(row, b);
                }
                for (j, cap) in caps.into_iter().enumerate() {
                    let mut e = vec![0.0; n];
                    e[j] = 1.0;
                    lp.add_le(e, cap);
                }
                lp
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn simplex_matches_vertex_enumeration(lp in bounded_lp()) {
        let sol = solve_lp(&lp).unwrap();
        prop_assert_eq!(sol.status, LpStatus::Optimal);
        let oracle = vertex_optimum(&lp);
        prop_assert!((sol.objective_value - oracle).abs() <= 1e-7 * (1.0 + oracle.abs()),
            "simplex {} vs vertices {}", sol.objective_value, oracle);
    }

    #[test]
    fn duals_certify_optimality(lp in bounded_lp()) {
        let sol = solve_lp(&lp).unwrap();
        let tol = 1e-7 * (1.0 + sol.objective_value.abs());
        // Primal feasibility.
        for c in &lp.constraints {
            let lhs: f64 = c.coefficients.iter().zip(&sol.primal).map(|(a, x)| a * x).sum();
            prop_assert!(lhs <= c.rhs + tol);
        }
        prop_assert!(sol.primal.iter().all(|&x| x >= -tol));
        // Dual feasibility: y >= 0 and A'y >= c.
        prop_assert!(sol.duals.iter().all(|&y| y >= -tol));
        for j in 0..lp.num_vars() {
            let reduced: f64 = lp.constraints.iter().zip(&sol.duals)
                .map(|(c, y)| c.coefficients[j] * y).sum::<f64>() - lp.objective[j];
            prop_assert!(reduced >= -tol, "column {} reduced cost {}", j, reduced);
        }
        // Strong duality.
        prop_assert!((sol.dual_objective(&lp) - sol.objective_value).abs() <= tol);
    }
}

#[test]
fn detects_infeasible_and_unbounded() {
    let mut infeasible = LinearProgram::new(vec![1.0]);
    infeasible.add_le(vec![1.0], -1.0);
    assert_eq!(solve_lp(&infeasible).unwrap().status, LpStatus::Infeasible);

    let mut unbounded = LinearProgram::new(vec![1.0, 1.0]);
    unbounded.add_le(vec![1.0, -1.0], 1.0);
    assert_eq!(solve_lp(&unbounded).unwrap().status, LpStatus::Unbounded);
}

#[test]
fn degenerate_vertex_still_optimal() {
    // Three constraints tight at (1, 1).
    let mut lp = LinearProgram::new(vec![1.0, 1.0]);
    lp.add_le(vec![1.0, 0.0], 1.0)
        .add_le(vec![0.0, 1.0], 1.0)
        .add_le(vec![1.0, 1.0], 2.0);
    let sol = solve_lp(&lp).unwrap();
    assert!((sol.objective_value - 2.0).abs() < 1e-12);
    assert!((sol.dual_objective(&lp) - 2.0).abs() < 1e-12);
}
