//! Dense two-phase primal simplex for small `max c'x, Ax <= b, x >= 0`
//! programs.
//!
//! Column generation prices new assortments with the dual values of the
//! restricted master, so the solver returns exact basis duals rather than
//! an approximate certificate. Pivoting follows Bland's rule (lowest
//! eligible index enters, ratio ties leave by lowest basic index), which
//! makes every solve deterministic and cycle free. After the pivots the
//! final basis is refactored from the original data so that primal and
//! dual values carry no accumulated tableau error.

use std::fmt;

use thiserror::Error;

/// Solver tolerances.
pub mod tol {
    /// Primal and dual feasibility.
    pub const FEASIBILITY: f64 = 1e-9;
    /// A reduced cost above this lets a column enter.
    pub const OPTIMALITY: f64 = 1e-9;
    /// Smallest admissible pivot magnitude.
    pub const PIVOT: f64 = 1e-11;
    /// Certificate check after refactoring; failures beyond this are
    /// reported as numerical breakdown.
    pub(crate) const CERTIFICATE: f64 = 1e-7;
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("constraint {row} has {got} coefficients, expected {expected}")]
    DimensionMismatch {
        row: usize,
        expected: usize,
        got: usize,
    },
    #[error("non-finite coefficient in program")]
    NonFinite,
    #[error("simplex did not terminate within {0} pivots")]
    IterationLimit(usize),
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
}

/// One `coefficients . x <= rhs` row.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coefficients: Vec<f64>,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearProgram {
    /// Maximized.
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        LinearProgram {
            objective,
            constraints: Vec::new(),
        }
    }

    pub fn add_le(&mut self, coefficients: Vec<f64>, rhs: f64) -> &mut Self {
        self.constraints.push(Constraint { coefficients, rhs });
        self
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.constraints.len()
    }

    fn check(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        for (row, c) in self.constraints.iter().enumerate() {
            if c.coefficients.len() != n {
                return Err(LpError::DimensionMismatch {
                    row,
                    expected: n,
                    got: c.coefficients.len(),
                });
            }
            if !c.rhs.is_finite() || c.coefficients.iter().any(|a| !a.is_finite()) {
                return Err(LpError::NonFinite);
            }
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(LpError::NonFinite);
        }
        Ok(())
    }
}

impl fmt::Display for LinearProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn terms(f: &mut fmt::Formatter<'_>, coeffs: &[f64]) -> fmt::Result {
            let mut first = true;
            for (j, &a) in coeffs.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                if !first {
                    write!(f, " + ")?;
                }
                write!(f, "{a} x{j}")?;
                first = false;
            }
            if first {
                write!(f, "0")?;
            }
            Ok(())
        }
        write!(f, "max ")?;
        terms(f, &self.objective)?;
        writeln!(f)?;
        for (i, c) in self.constraints.iter().enumerate() {
            write!(f, "  r{i}: ")?;
            terms(f, &c.coefficients)?;
            writeln!(f, " <= {}", c.rhs)?;
        }
        write!(f, "  x >= 0")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub primal: Vec<f64>,
    /// One value per constraint; empty unless optimal.
    pub duals: Vec<f64>,
    /// `-inf` when infeasible, `+inf` when unbounded.
    pub objective_value: f64,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// `b . y` for the stored duals.
    pub fn dual_objective(&self, lp: &LinearProgram) -> f64 {
        lp.constraints
            .iter()
            .zip(&self.duals)
            .map(|(c, y)| c.rhs * y)
            .sum()
    }
}

struct Tableau {
    rows: usize,
    width: usize,
    data: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.data[i * self.width + self.width - 1]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let p = self.data[r * w + c];
        for j in 0..w {
            self.data[r * w + j] /= p;
        }
        self.data[r * w + c] = 1.0;
        let pivot_row: Vec<f64> = self.data[r * w..(r + 1) * w].to_vec();
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let factor = self.data[i * w + c];
            if factor == 0.0 {
                continue;
            }
            let row = &mut self.data[i * w..(i + 1) * w];
            for (x, &pr) in row.iter_mut().zip(&pivot_row) {
                *x -= factor * pr;
            }
            row[c] = 0.0;
        }
        self.basis[r] = c;
    }

    fn reduced_cost(&self, cost: &[f64], j: usize) -> f64 {
        let mut rc = cost[j];
        for i in 0..self.rows {
            let a = self.at(i, j);
            if a != 0.0 {
                rc -= cost[self.basis[i]] * a;
            }
        }
        rc
    }

    /// Bland's-rule primal simplex over the columns accepted by `allowed`.
    fn optimize(
        &mut self,
        cost: &[f64],
        allowed: impl Fn(usize) -> bool,
        budget: &mut usize,
        limit: usize,
    ) -> Result<bool, LpError> {
        let cols = self.width - 1;
        loop {
            let entering = (0..cols)
                .filter(|&j| allowed(j) && !self.basis.contains(&j))
                .find(|&j| self.reduced_cost(cost, j) > tol::OPTIMALITY);
            let Some(c) = entering else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let a = self.at(i, c);
                if a <= tol::PIVOT {
                    continue;
                }
                let ratio = self.rhs(i).max(0.0) / a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        let tie = (ratio - br).abs() <= 1e-12 * (1.0 + br.abs());
                        if (!tie && ratio < br) || (tie && self.basis[i] < self.basis[bi]) {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
            let Some((r, _)) = leave else {
                return Ok(false);
            };
            if *budget == 0 {
                return Err(LpError::IterationLimit(limit));
            }
            *budget -= 1;
            self.pivot(r, c);
        }
    }
}

/// Solves `a z = b` by Gaussian elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for i in col + 1..n {
            let f = a[i][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                a[i][j] -= f * a[col][j];
            }
            b[i] -= f * b[col];
        }
    }
    let mut z = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * z[j]).sum();
        z[i] = (b[i] - s) / a[i][i];
    }
    Some(z)
}

pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    lp.check()?;
    let n = lp.num_vars();
    let m = lp.num_rows();

    let flipped: Vec<bool> = lp.constraints.iter().map(|c| c.rhs < 0.0).collect();
    let n_art = flipped.iter().filter(|&&f| f).count();
    let cols = n + m + n_art;
    let width = cols + 1;
    let mut data = vec![0.0; m * width];
    let mut basis = Vec::with_capacity(m);
    let mut art_col = vec![None; m];
    let mut next_art = n + m;
    for (i, c) in lp.constraints.iter().enumerate() {
        let sign = if flipped[i] { -1.0 } else { 1.0 };
        let row = &mut data[i * width..(i + 1) * width];
        for (x, a) in row.iter_mut().zip(&c.coefficients) {
            *x = sign * a;
        }
        row[n + i] = sign;
        row[cols] = sign * c.rhs;
        if flipped[i] {
            row[next_art] = 1.0;
            art_col[i] = Some(next_art);
            basis.push(next_art);
            next_art += 1;
        } else {
            basis.push(n + i);
        }
    }
    let mut tab = Tableau {
        rows: m,
        width,
        data,
        basis,
    };
    let limit = 10_000 + 50 * (m + cols);
    let mut budget = limit;
    let is_art = |j: usize| j >= n + m;

    if n_art > 0 {
        let cost: Vec<f64> = (0..cols)
            .map(|j| if is_art(j) { -1.0 } else { 0.0 })
            .collect();
        tab.optimize(&cost, |_| true, &mut budget, limit)?;
        let infeasibility: f64 = (0..m)
            .filter(|&i| is_art(tab.basis[i]))
            .map(|i| tab.rhs(i).max(0.0))
            .sum();
        let scale = 1.0
            + lp.constraints
                .iter()
                .map(|c| c.rhs.abs())
                .fold(0.0, f64::max);
        if infeasibility > tol::FEASIBILITY * scale {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                primal: vec![0.0; n],
                duals: Vec::new(),
                objective_value: f64::NEG_INFINITY,
            });
        }
        // Drive zero-level artificials out of the basis where possible; rows
        // where no pivot exists are redundant and keep their artificial.
        for i in 0..m {
            if !is_art(tab.basis[i]) {
                continue;
            }
            if let Some(j) = (0..n + m).find(|&j| tab.at(i, j).abs() > tol::PIVOT) {
                tab.pivot(i, j);
            }
        }
    }

    let mut cost = vec![0.0; cols];
    cost[..n].copy_from_slice(&lp.objective);
    let bounded = tab.optimize(&cost, |j| !is_art(j), &mut budget, limit)?;

    let mut primal = vec![0.0; n];
    for i in 0..m {
        if tab.basis[i] < n {
            primal[tab.basis[i]] = tab.rhs(i).max(0.0);
        }
    }
    if !bounded {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            primal,
            duals: Vec::new(),
            objective_value: f64::INFINITY,
        });
    }

    // Refactor the optimal basis from the original data.
    let column = |j: usize| -> Vec<f64> {
        if j < n {
            lp.constraints.iter().map(|c| c.coefficients[j]).collect()
        } else if j < n + m {
            (0..m).map(|r| if r == j - n { 1.0 } else { 0.0 }).collect()
        } else {
            let row = art_col.iter().position(|&a| a == Some(j)).unwrap();
            (0..m).map(|r| if r == row { -1.0 } else { 0.0 }).collect()
        }
    };
    let bcols: Vec<Vec<f64>> = tab.basis.iter().map(|&j| column(j)).collect();
    let b_mat: Vec<Vec<f64>> = (0..m)
        .map(|r| bcols.iter().map(|c| c[r]).collect())
        .collect();
    let rhs: Vec<f64> = lp.constraints.iter().map(|c| c.rhs).collect();
    let c_b: Vec<f64> = tab.basis.iter().map(|&j| cost[j]).collect();
    let mut duals: Vec<f64> = (0..m).map(|i| -tab.reduced_cost(&cost, n + i)).collect();
    if let (Some(x_b), Some(y)) = (solve_dense(b_mat.clone(), rhs), solve_dense(bcols, c_b)) {
        primal.iter_mut().for_each(|x| *x = 0.0);
        for (&j, &v) in tab.basis.iter().zip(&x_b) {
            if j < n {
                primal[j] = v;
            }
        }
        duals = y;
    }
    for v in primal.iter_mut().chain(duals.iter_mut()) {
        if *v < 0.0 {
            if *v < -tol::CERTIFICATE {
                return Err(LpError::NumericalBreakdown(format!(
                    "negative value {v} in optimal certificate"
                )));
            }
            *v = 0.0;
        }
    }

    let objective_value: f64 = lp.objective.iter().zip(&primal).map(|(c, x)| c * x).sum();
    let sol = LpSolution {
        status: LpStatus::Optimal,
        primal,
        duals,
        objective_value,
    };
    verify_certificate(lp, &sol)?;
    Ok(sol)
}

fn verify_certificate(lp: &LinearProgram, sol: &LpSolution) -> Result<(), LpError> {
    let t = tol::CERTIFICATE;
    for (i, c) in lp.constraints.iter().enumerate() {
        let lhs: f64 = c
            .coefficients
            .iter()
            .zip(&sol.primal)
            .map(|(a, x)| a * x)
            .sum();
        let scale: f64 = 1.0 + c.rhs.abs() + c.coefficients.iter().map(|a| a.abs()).sum::<f64>();
        if lhs - c.rhs > t * scale {
            return Err(LpError::NumericalBreakdown(format!(
                "row {i} violated by {}",
                lhs - c.rhs
            )));
        }
    }
    for j in 0..lp.num_vars() {
        let aty: f64 = lp
            .constraints
            .iter()
            .zip(&sol.duals)
            .map(|(c, y)| c.coefficients[j] * y)
            .sum();
        let c = lp.objective[j];
        if c - aty > t * (1.0 + c.abs() + aty.abs()) {
            return Err(LpError::NumericalBreakdown(format!(
                "dual constraint {j} violated by {}",
                c - aty
            )));
        }
    }
    let gap = (sol.objective_value - sol.dual_objective(lp)).abs();
    if gap > t * (1.0 + sol.objective_value.abs()) {
        return Err(LpError::NumericalBreakdown(format!("duality gap {gap}")));
    }
    Ok(())
}
