//! Dense two-phase primal simplex with Bland's anti-cycling rule.
//!
//! Solves  max c'x  s.t.  A x <= b,  x >= 0  (b may be negative; phase one
//! drives artificial variables out of the basis when the slack basis is
//! infeasible). Instances here are tiny (at most ~100 structural variables),
//! so a dense tableau is the right tool.

use num_traits::Float;

/// Terminal state of the solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Fractional solution of the relaxation.
#[derive(Debug, Clone)]
pub struct LpSolution<F> {
    pub status: LpStatus,
    pub objective: F,
    pub values: Vec<F>,
}

/// One-shot solver over rows of `A x <= b`.
#[derive(Debug, Clone)]
pub struct SimplexSolver<F> {
    objective: Vec<F>,
    rows: Vec<Vec<F>>,
    rhs: Vec<F>,
    eps: F,
}

impl<F: Float> SimplexSolver<F> {
    /// `objective` is maximized; every row is `rows[i] . x <= rhs[i]`.
    pub fn new(objective: Vec<F>) -> Self {
        Self {
            objective,
            rows: Vec::new(),
            rhs: Vec::new(),
            eps: F::from(1e-9).expect("epsilon fits in scalar"),
        }
    }

    pub fn add_row(&mut self, coeffs: Vec<F>, rhs: F) {
        assert_eq!(coeffs.len(), self.objective.len());
        self.rows.push(coeffs);
        self.rhs.push(rhs);
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Two-phase solve. Returns an optimal basic feasible solution, or the
    /// infeasible/unbounded status.
    pub fn solve(&self) -> LpSolution<F> {
        let n = self.n_vars();
        let m = self.n_rows();
        if n == 0 {
            return LpSolution {
                status: LpStatus::Optimal,
                objective: F::zero(),
                values: vec![],
            };
        }

        // Tableau columns: structural | slack | artificial | rhs.
        // Artificial variables are added only for rows with negative rhs
        // (after negation those rows read >=, needing an artificial start).
        let needs_artificial: Vec<bool> = self.rhs.iter().map(|&b| b < F::zero()).collect();
        let n_art = needs_artificial.iter().filter(|&&x| x).count();
        let total = n + m + n_art;

        let mut tab = vec![vec![F::zero(); total + 1]; m];
        let mut basis = vec![0usize; m];
        let mut art_idx = 0usize;
        for i in 0..m {
            let flip = needs_artificial[i];
            for (j, cell) in tab[i][..n].iter_mut().enumerate() {
                *cell = if flip { -self.rows[i][j] } else { self.rows[i][j] };
            }
            // Slack: +1 normally, -1 on flipped (>=) rows.
            tab[i][n + i] = if flip { -F::one() } else { F::one() };
            tab[i][total] = if flip { -self.rhs[i] } else { self.rhs[i] };
            if flip {
                let col = n + m + art_idx;
                tab[i][col] = F::one();
                basis[i] = col;
                art_idx += 1;
            } else {
                basis[i] = n + i;
            }
        }

        if n_art > 0 {
            // Phase one: minimize the sum of artificials.
            let mut cost = vec![F::zero(); total];
            // Maximize -(sum of artificials).
            cost[(n + m)..total].fill(-F::one());
            if !self.run_phase(&mut tab, &mut basis, &cost, total) {
                return LpSolution {
                    status: LpStatus::Unbounded,
                    objective: F::zero(),
                    values: vec![],
                };
            }
            let phase1: F = basis
                .iter()
                .enumerate()
                .filter(|(_, &b)| b >= n + m)
                .map(|(i, _)| tab[i][total])
                .fold(F::zero(), |a, v| a + v);
            if phase1 > self.eps {
                return LpSolution {
                    status: LpStatus::Infeasible,
                    objective: F::zero(),
                    values: vec![],
                };
            }
            // Pivot any residual artificial out of the basis at zero level.
            for i in 0..m {
                if basis[i] >= n + m {
                    if let Some(j) = (0..n + m).find(|&j| tab[i][j].abs() > self.eps) {
                        Self::pivot(&mut tab, &mut basis, i, j, total);
                    }
                }
            }
        }

        // Phase two on the original objective (artificial columns frozen out).
        let mut cost = vec![F::zero(); total];
        cost[..n].copy_from_slice(&self.objective);
        if !self.run_phase_limited(&mut tab, &mut basis, &cost, total, n + m) {
            return LpSolution {
                status: LpStatus::Unbounded,
                objective: F::zero(),
                values: vec![],
            };
        }

        let mut values = vec![F::zero(); n];
        for (i, &b) in basis.iter().enumerate() {
            if b < n {
                values[b] = tab[i][total];
            }
        }
        let objective = values
            .iter()
            .zip(&self.objective)
            .fold(F::zero(), |acc, (&x, &cj)| acc + x * cj);
        LpSolution {
            status: LpStatus::Optimal,
            objective,
            values,
        }
    }

    fn run_phase(&self, tab: &mut [Vec<F>], basis: &mut [usize], cost: &[F], total: usize) -> bool {
        self.run_phase_limited(tab, basis, cost, total, total)
    }

    /// Simplex iterations with Bland's rule; entering columns restricted to
    /// `0..col_limit`. Returns false on unboundedness.
    fn run_phase_limited(
        &self,
        tab: &mut [Vec<F>],
        basis: &mut [usize],
        cost: &[F],
        total: usize,
        col_limit: usize,
    ) -> bool {
        let m = tab.len();
        loop {
            // Reduced costs: c_j - c_B B^-1 A_j, computed from the tableau.
            let mut entering = None;
            for j in 0..col_limit {
                if basis.contains(&j) {
                    continue;
                }
                let mut reduced = cost[j];
                for i in 0..m {
                    reduced = reduced - cost[basis[i]] * tab[i][j];
                }
                if reduced > self.eps {
                    entering = Some(j); // Bland: smallest improving index
                    break;
                }
            }
            let Some(j) = entering else { return true };

            // Ratio test, ties broken by smallest basis index (Bland).
            let mut leaving: Option<(usize, F)> = None;
            for i in 0..m {
                if tab[i][j] > self.eps {
                    let ratio = tab[i][total] / tab[i][j];
                    match leaving {
                        None => leaving = Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - self.eps
                                || (ratio < lr + self.eps && basis[i] < basis[li])
                            {
                                leaving = Some((i, ratio));
                            }
                        }
                    }
                }
            }
            let Some((r, _)) = leaving else { return false };
            Self::pivot(tab, basis, r, j, total);
        }
    }

    fn pivot(tab: &mut [Vec<F>], basis: &mut [usize], row: usize, col: usize, total: usize) {
        let pivot = tab[row][col];
        for v in tab[row].iter_mut() {
            *v = *v / pivot;
        }
        let pivot_row = tab[row].clone();
        for (i, current) in tab.iter_mut().enumerate() {
            if i != row {
                let factor = current[col];
                if factor != F::zero() {
                    for (cell, &p) in current[..=total].iter_mut().zip(&pivot_row) {
                        *cell = *cell - factor * p;
                    }
                }
            }
        }
        basis[row] = col;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_variable_capacity() {
        // max 2n s.t. n <= 3: n = 3, objective 6.
        let mut lp = SimplexSolver::new(vec![2.0f64]);
        lp.add_row(vec![1.0], 3.0);
        let sol = lp.solve();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.values[0] - 3.0).abs() < 1e-9);
        assert!((sol.objective - 6.0).abs() < 1e-9);
    }

    #[test]
    fn zero_objective() {
        let mut lp = SimplexSolver::new(vec![0.0f64, 0.0]);
        lp.add_row(vec![1.0, 1.0], 5.0);
        let sol = lp.solve();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_eq!(sol.objective, 0.0);
        assert!(sol.values.iter().all(|&v| v >= -1e-9));
    }

    #[test]
    fn two_variable_vertex() {
        // max 3x + 2y, x + y <= 4, x <= 2 -> x=2, y=2, obj=10.
        let mut lp = SimplexSolver::new(vec![3.0f64, 2.0]);
        lp.add_row(vec![1.0, 1.0], 4.0);
        lp.add_row(vec![1.0, 0.0], 2.0);
        let sol = lp.solve();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - 10.0).abs() < 1e-9);
        assert!((sol.values[0] - 2.0).abs() < 1e-9);
        assert!((sol.values[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn detects_infeasibility() {
        // x <= -1 with x >= 0 is infeasible.
        let mut lp = SimplexSolver::new(vec![1.0f64]);
        lp.add_row(vec![1.0], -1.0);
        assert_eq!(lp.solve().status, LpStatus::Infeasible);
    }

    #[test]
    fn detects_unboundedness() {
        // max x with only -x <= 0.
        let mut lp = SimplexSolver::new(vec![1.0f64]);
        lp.add_row(vec![-1.0], 0.0);
        assert_eq!(lp.solve().status, LpStatus::Unbounded);
    }

    #[test]
    fn phase_one_handles_negative_rhs() {
        // max -x s.t. -x <= -2 (i.e. x >= 2) -> x = 2.
        let mut lp = SimplexSolver::new(vec![-1.0f64]);
        lp.add_row(vec![-1.0], -2.0);
        let sol = lp.solve();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.values[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn generic_over_f32() {
        let mut lp = SimplexSolver::new(vec![1.0f32, 1.0]);
        lp.add_row(vec![1.0, 2.0], 4.0);
        lp.add_row(vec![2.0, 1.0], 4.0);
        let sol = lp.solve();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - 8.0 / 3.0).abs() < 1e-4);
    }

    #[test]
    fn matches_brute_force_on_random_instances() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            // Random instances with box constraints so a grid search is exact
            // enough: integer optimum is a lower bound on the LP optimum.
            let nv = rng.gen_range(1..4usize);
            let obj: Vec<f64> = (0..nv).map(|_| rng.gen_range(0..5) as f64).collect();
            let mut lp = SimplexSolver::new(obj.clone());
            let caps: Vec<f64> = (0..nv).map(|_| rng.gen_range(1..6) as f64).collect();
            for (j, &cap) in caps.iter().enumerate() {
                let mut row = vec![0.0; nv];
                row[j] = 1.0;
                lp.add_row(row, cap);
            }
            let budget: f64 = rng.gen_range(3..10) as f64;
            lp.add_row(vec![1.0; nv], budget);
            let sol = lp.solve();
            assert_eq!(sol.status, LpStatus::Optimal);

            // Brute force over integer points of the box.
            let mut best = 0.0f64;
            let mut point = vec![0usize; nv];
            loop {
                let total: usize = point.iter().sum();
                if total as f64 <= budget {
                    let val: f64 = point.iter().zip(&obj).map(|(&x, c)| x as f64 * c).sum();
                    best = best.max(val);
                }
                let mut k = 0;
                loop {
                    if k == nv {
                        break;
                    }
                    point[k] += 1;
                    if point[k] as f64 <= caps[k] {
                        break;
                    }
                    point[k] = 0;
                    k += 1;
                }
                if k == nv {
                    break;
                }
            }
            assert!(sol.objective >= best - 1e-7, "LP {} < ILP {}", sol.objective, best);
        }
    }
}
