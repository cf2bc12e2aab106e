//! Small dense linear programs: maximise `c·x` subject to `A x ≤ b`, `x ≥ 0`.
//!
//! Two-phase tableau simplex with Bland's rule for both the entering column
//! and the leaving row, which makes pivoting deterministic and cycle free.
//! Rows with a negative right-hand side get an artificial variable for
//! phase one.

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-10;
const FEASIBILITY_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    n_vars: usize,
    objective: Vec<f64>,
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { value: f64, x: Vec<f64> },
    Infeasible,
    Unbounded,
}

impl LinearProgram {
    pub fn new(n_vars: usize) -> Self {
        LinearProgram { n_vars, objective: vec![0.0; n_vars], rows: Vec::new(), rhs: Vec::new() }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn n_constraints(&self) -> usize {
        self.rows.len()
    }

    /// Sets the objective to maximise.
    pub fn maximize(&mut self, objective: Vec<f64>) -> &mut Self {
        assert_eq!(objective.len(), self.n_vars);
        self.objective = objective;
        self
    }

    /// Adds `Σ coeffs[j]·x_j ≤ rhs` from sparse `(j, coeff)` terms.
    pub fn add_le(&mut self, terms: &[(usize, f64)], rhs: f64) -> &mut Self {
        let mut row = vec![0.0; self.n_vars];
        for &(j, a) in terms {
            row[j] += a;
        }
        self.rows.push(row);
        self.rhs.push(rhs);
        self
    }

    /// Solves with at most `max_pivots` pivots across both phases.
    pub fn solve(&self, max_pivots: usize) -> Result<LpOutcome> {
        Tableau::build(self).run(&self.objective, max_pivots)
    }
}

struct Tableau {
    n_vars: usize,
    /// Column layout: structural, slack, artificial; last entry of each row is the rhs.
    cells: Vec<Vec<f64>>,
    basis: Vec<usize>,
    n_cols: usize,
    first_artificial: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Tableau {
        let m = lp.rows.len();
        let n = lp.n_vars;
        let n_art = lp.rhs.iter().filter(|b| **b < 0.0).count();
        let first_artificial = n + m;
        let n_cols = n + m + n_art;
        let mut cells = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let mut next_art = first_artificial;
        for (r, (row, b)) in lp.rows.iter().zip(&lp.rhs).enumerate() {
            let mut cells_row = vec![0.0; n_cols + 1];
            let sign = if *b < 0.0 { -1.0 } else { 1.0 };
            for (j, a) in row.iter().enumerate() {
                cells_row[j] = sign * a;
            }
            cells_row[n + r] = sign;
            cells_row[n_cols] = sign * b;
            if *b < 0.0 {
                cells_row[next_art] = 1.0;
                basis.push(next_art);
                next_art += 1;
            } else {
                basis.push(n + r);
            }
            cells.push(cells_row);
        }
        Tableau { n_vars: n, cells, basis, n_cols, first_artificial }
    }

    fn run(mut self, objective: &[f64], max_pivots: usize) -> Result<LpOutcome> {
        let mut pivots = 0usize;
        if self.first_artificial < self.n_cols {
            let mut phase_one = vec![0.0; self.n_cols];
            for c in &mut phase_one[self.first_artificial..] {
                *c = -1.0;
            }
            match self.optimise(&phase_one, self.n_cols, &mut pivots, max_pivots)? {
                Some(value) if value < -FEASIBILITY_EPS => return Ok(LpOutcome::Infeasible),
                Some(_) => {}
                None => unreachable!("phase one objective is bounded by zero"),
            }
            self.expel_artificials();
        }
        let mut costs = vec![0.0; self.n_cols];
        costs[..self.n_vars].copy_from_slice(objective);
        match self.optimise(&costs, self.first_artificial, &mut pivots, max_pivots)? {
            None => Ok(LpOutcome::Unbounded),
            Some(value) => {
                let mut x = vec![0.0; self.n_vars];
                for (r, &b) in self.basis.iter().enumerate() {
                    if b < self.n_vars {
                        x[b] = self.cells[r][self.n_cols];
                    }
                }
                Ok(LpOutcome::Optimal { value, x })
            }
        }
    }

    /// Maximises `costs` over columns `< allowed`. `None` means unbounded.
    fn optimise(
        &mut self,
        costs: &[f64],
        allowed: usize,
        pivots: &mut usize,
        max_pivots: usize,
    ) -> Result<Option<f64>> {
        loop {
            let reduced = self.reduced_costs(costs);
            let Some(entering) = (0..allowed).find(|&j| reduced[j] > PIVOT_EPS) else {
                let value = self.basis.iter().enumerate().map(|(r, &b)| costs[b] * self.cells[r][self.n_cols]).sum();
                return Ok(Some(value));
            };
            let mut leaving: Option<(usize, f64)> = None;
            for (r, row) in self.cells.iter().enumerate() {
                let a = row[entering];
                if a > PIVOT_EPS {
                    let ratio = row[self.n_cols] / a;
                    leaving = match leaving {
                        None => Some((r, ratio)),
                        Some((best, best_ratio)) => {
                            let tie = (ratio - best_ratio).abs() <= PIVOT_EPS;
                            if ratio < best_ratio - PIVOT_EPS || (tie && self.basis[r] < self.basis[best]) {
                                Some((r, ratio))
                            } else {
                                Some((best, best_ratio))
                            }
                        }
                    };
                }
            }
            let Some((row, _)) = leaving else {
                return Ok(None);
            };
            if *pivots >= max_pivots {
                return Err(Error::NumericalFailure(format!("pivot limit {max_pivots} reached")));
            }
            *pivots += 1;
            self.pivot(row, entering);
        }
    }

    fn reduced_costs(&self, costs: &[f64]) -> Vec<f64> {
        let mut reduced = costs.to_vec();
        for (r, &b) in self.basis.iter().enumerate() {
            let cb = costs[b];
            if cb != 0.0 {
                for (j, red) in reduced.iter_mut().enumerate() {
                    *red -= cb * self.cells[r][j];
                }
            }
        }
        reduced
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.cells[row][col];
        for v in self.cells[row].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.cells[row].clone();
        for (r, other) in self.cells.iter_mut().enumerate() {
            if r == row {
                continue;
            }
            let factor = other[col];
            if factor != 0.0 {
                for (v, pv) in other.iter_mut().zip(&pivot_row) {
                    *v -= factor * pv;
                }
                other[col] = 0.0;
            }
        }
        self.basis[row] = col;
    }

    /// Pivots zero-valued artificial variables out of the basis; drops rows that are redundant.
    fn expel_artificials(&mut self) {
        let mut r = 0;
        while r < self.cells.len() {
            if self.basis[r] >= self.first_artificial {
                match (0..self.first_artificial).find(|&j| self.cells[r][j].abs() > PIVOT_EPS) {
                    Some(col) => self.pivot(r, col),
                    None => {
                        self.cells.remove(r);
                        self.basis.remove(r);
                        continue;
                    }
                }
            }
            r += 1;
        }
    }
}
