//! Linear programs and a deterministic two-phase primal simplex solver.
//!
//! The solver runs in both arithmetic modes of [`crate::scalar::Scalar`]:
//! exact rationals (no tolerances) and `f64` (feasibility and optimality
//! tolerance [`crate::scalar::F64_FEAS_TOL`]).  Pivoting uses Bland's rule —
//! entering variable of smallest index with negative reduced cost, leaving
//! row of smallest basis ordinal among minimum ratios — so runs are
//! deterministic and exact mode cannot cycle.  Optimal solutions are vertex
//! solutions (basic feasible solutions).
//!
//! Internally a problem is rewritten in standard form: lower bounds shifted
//! to zero, upper bounds turned into inequality rows, inequality rows given
//! slacks, right sides made nonnegative, and one artificial variable added
//! per row for phase one.  Artificials left basic at zero after phase one
//! are pivoted out, or their (redundant) rows dropped.
//!
//! Exact solves are float-guided: a fast `f64` pass locates a candidate
//! optimal basis, which is then factorized and verified in rationals, with
//! warm-started exact pivoting finishing the job.  Every verdict in exact
//! mode is still established by rational arithmetic alone; the float pass
//! only chooses where to start, and any snag (singular basis, infeasible
//! basic point, float breakdown) falls back to the cold exact two-phase
//! path.

use std::cmp::Ordering;

use thiserror::Error;

use crate::scalar::{dot, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("numeric breakdown: {0}")]
    NumericBreakdown(String),
}

/// Sparse constraint row: `(variable index, coefficient)` pairs.
pub type SparseRow<S> = Vec<(u32, S)>;

/// A linear program over variables `x_0 .. x_{n-1}`.
///
/// Every variable has a lower bound (default 0) and an optional upper
/// bound; constraints are equality rows `a·x = b` and inequality rows
/// `a·x ≤ b`.
#[derive(Debug, Clone)]
pub struct LpProblem<S> {
    n_vars: usize,
    sense: Sense,
    objective: Vec<S>,
    eq_rows: Vec<SparseRow<S>>,
    eq_rhs: Vec<S>,
    le_rows: Vec<SparseRow<S>>,
    le_rhs: Vec<S>,
    lower: Vec<S>,
    upper: Vec<Option<S>>,
}

impl<S: Scalar> LpProblem<S> {
    pub fn new(n_vars: usize, sense: Sense) -> Self {
        LpProblem {
            n_vars,
            sense,
            objective: vec![S::zero(); n_vars],
            eq_rows: Vec::new(),
            eq_rhs: Vec::new(),
            le_rows: Vec::new(),
            le_rhs: Vec::new(),
            lower: vec![S::zero(); n_vars],
            upper: vec![None; n_vars],
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }
    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn set_objective(&mut self, var: usize, coeff: S) {
        self.objective[var] = coeff;
    }
    pub fn objective(&self) -> &[S] {
        &self.objective
    }
    pub fn add_eq(&mut self, row: SparseRow<S>, rhs: S) {
        self.eq_rows.push(row);
        self.eq_rhs.push(rhs);
    }
    pub fn add_le(&mut self, row: SparseRow<S>, rhs: S) {
        self.le_rows.push(row);
        self.le_rhs.push(rhs);
    }
    pub fn set_lower(&mut self, var: usize, bound: S) {
        self.lower[var] = bound;
    }
    pub fn set_upper(&mut self, var: usize, bound: S) {
        self.upper[var] = Some(bound);
    }

    fn to_f64_problem(&self) -> LpProblem<f64> {
        let conv_row = |row: &SparseRow<S>| -> SparseRow<f64> {
            row.iter().map(|(v, c)| (*v, c.to_f64())).collect()
        };
        LpProblem {
            n_vars: self.n_vars,
            sense: self.sense,
            objective: self.objective.iter().map(Scalar::to_f64).collect(),
            eq_rows: self.eq_rows.iter().map(conv_row).collect(),
            eq_rhs: self.eq_rhs.iter().map(Scalar::to_f64).collect(),
            le_rows: self.le_rows.iter().map(conv_row).collect(),
            le_rhs: self.le_rhs.iter().map(Scalar::to_f64).collect(),
            lower: self.lower.iter().map(Scalar::to_f64).collect(),
            upper: self
                .upper
                .iter()
                .map(|u| u.as_ref().map(Scalar::to_f64))
                .collect(),
        }
    }

    fn validate(&self) -> Result<(), LpError> {
        if self.objective.len() != self.n_vars {
            return Err(LpError::DimensionMismatch(format!(
                "objective has {} coefficients for {} variables",
                self.objective.len(),
                self.n_vars
            )));
        }
        let all_rows = self.eq_rows.iter().chain(&self.le_rows);
        for row in all_rows {
            for (var, coeff) in row {
                if *var as usize >= self.n_vars {
                    return Err(LpError::DimensionMismatch(format!(
                        "constraint references variable {var} of {}",
                        self.n_vars
                    )));
                }
                if !coeff.is_finite() {
                    return Err(LpError::NumericBreakdown("non-finite coefficient".into()));
                }
            }
        }
        for v in self.eq_rhs.iter().chain(&self.le_rhs).chain(&self.objective) {
            if !v.is_finite() {
                return Err(LpError::NumericBreakdown("non-finite value".into()));
            }
        }
        for (l, u) in self.lower.iter().zip(&self.upper) {
            if !l.is_finite() || u.as_ref().is_some_and(|u| !u.is_finite()) {
                return Err(LpError::NumericBreakdown("non-finite bound".into()));
            }
        }
        Ok(())
    }
}

/// Solver switches; `trace` records one line per pivot.
#[derive(Debug, Clone, Copy, Default)]
pub struct SolveOptions {
    pub trace: bool,
}

/// Outcome of a solve.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution<S> {
    pub status: LpStatus,
    /// Objective value in the problem's own sense; `None` unless optimal.
    pub objective: Option<S>,
    /// Optimal vertex in original variable coordinates.
    pub x: Option<Vec<S>>,
    /// Witness re-checked against every constraint (exact mode: always
    /// true for optimal results; infeasibility is certified only in exact
    /// mode).
    pub certified: bool,
    pub pivots: usize,
    /// Original objective at the first feasible point (end of phase one);
    /// bounds the optimum from the feasible side (weak-duality check).
    pub phase_one_objective: Option<S>,
    pub trace: Option<Vec<String>>,
}

/// Solves with default options.
pub fn solve<S: Scalar>(problem: &LpProblem<S>) -> Result<LpSolution<S>, LpError> {
    solve_with(problem, SolveOptions::default())
}

/// Solves, optionally tracing pivots.
pub fn solve_with<S: Scalar>(
    problem: &LpProblem<S>,
    options: SolveOptions,
) -> Result<LpSolution<S>, LpError> {
    problem.validate()?;
    // Float-guided warm start for exact solves; tracing wants the full
    // pivot story, so it stays on the cold path.
    if S::EXACT && !options.trace {
        if let Some(basis) = float_guidance(problem, true) {
            let mut simplex = Simplex::standardize(problem, false);
            if simplex.install_basis(&basis) {
                return finish(simplex, problem);
            }
            // Degenerate optima routinely fail exact installation; pivoting
            // toward the hinted columns still skips most of the cold search.
            let mut simplex = Simplex::standardize(problem, false);
            simplex.crash_toward(&basis);
            return finish(simplex, problem);
        }
    }
    let simplex = Simplex::standardize(problem, options.trace);
    finish(simplex, problem)
}

/// Runs both phases from the simplex's current state and assembles the
/// solution.
fn finish<S: Scalar>(
    mut simplex: Simplex<S>,
    problem: &LpProblem<S>,
) -> Result<LpSolution<S>, LpError> {
    let gap = simplex.run_phase_one()?;
    if gap > S::feas_tol() {
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            objective: None,
            x: None,
            certified: S::EXACT,
            pivots: simplex.pivots,
            phase_one_objective: None,
            trace: simplex.trace,
        });
    }
    let phase_one_point = simplex.current_x(problem);
    let phase_one_objective = dot(&problem.objective, &phase_one_point);
    simplex.cleanup_artificials()?;
    let status = simplex.run_phase_two()?;
    if status == LpStatus::Unbounded {
        return Ok(LpSolution {
            status,
            objective: None,
            x: None,
            certified: S::EXACT,
            pivots: simplex.pivots,
            phase_one_objective: Some(phase_one_objective),
            trace: simplex.trace,
        });
    }
    let x = simplex.current_x(problem);
    let objective = dot(&problem.objective, &x);
    let certified = certify(problem, &x)?;
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective: Some(objective),
        x: Some(x),
        certified,
        pivots: simplex.pivots,
        phase_one_objective: Some(phase_one_objective),
        trace: simplex.trace,
    })
}

/// Phase-one optimum: total infeasibility of the constraint set, zero iff
/// feasible.
pub fn phase_one_gap<S: Scalar>(problem: &LpProblem<S>) -> Result<S, LpError> {
    problem.validate()?;
    if S::EXACT {
        if let Some(basis) = float_guidance(problem, false) {
            let mut simplex = Simplex::standardize(problem, false);
            if simplex.install_basis(&basis) {
                return simplex.run_phase_one();
            }
            let mut simplex = Simplex::standardize(problem, false);
            simplex.crash_toward(&basis);
            return simplex.run_phase_one();
        }
    }
    let mut simplex = Simplex::standardize(problem, false);
    simplex.run_phase_one()
}

/// Runs the float solver on the converted problem and returns its final
/// basis as a warm-start hint, or `None` when the float pass breaks down.
fn float_guidance<S: Scalar>(
    problem: &LpProblem<S>,
    need_phase_two: bool,
) -> Option<Vec<BasisVar>> {
    let pf = problem.to_f64_problem();
    pf.validate().ok()?;
    let mut simplex = Simplex::<f64>::standardize(&pf, false);
    let gap = simplex.run_phase_one().ok()?;
    if gap > f64::feas_tol() || !need_phase_two {
        return Some(simplex.basis);
    }
    simplex.cleanup_artificials().ok()?;
    // Optimal and unbounded hints are both usable starting points.
    simplex.run_phase_two().ok()?;
    Some(simplex.basis)
}

/// True iff the constraint set is nonempty.
pub fn feasible<S: Scalar>(problem: &LpProblem<S>) -> Result<bool, LpError> {
    Ok(phase_one_gap(problem)? <= S::feas_tol())
}

/// Checks the witness against every original constraint.  Returns an error
/// if a residual exceeds the hard breakdown threshold (float mode).
fn certify<S: Scalar>(problem: &LpProblem<S>, x: &[S]) -> Result<bool, LpError> {
    let hard = if S::EXACT {
        S::zero()
    } else {
        S::from_exact(&num::BigRational::new(1.into(), 1_000_000.into()))
    };
    let tol = S::feas_tol();
    let mut ok = true;
    let mut check = |residual: S| -> Result<(), LpError> {
        let r = residual.abs_ref();
        if r > tol {
            ok = false;
            if !S::EXACT && r > hard {
                return Err(LpError::NumericBreakdown(format!(
                    "constraint residual {r} after solve"
                )));
            }
        }
        Ok(())
    };
    for (row, rhs) in problem.eq_rows.iter().zip(&problem.eq_rhs) {
        let mut acc = rhs.neg_ref();
        for (var, coeff) in row {
            acc.add_assign_ref(&coeff.mul_ref(&x[*var as usize]));
        }
        check(acc)?;
    }
    for (row, rhs) in problem.le_rows.iter().zip(&problem.le_rhs) {
        let mut acc = rhs.neg_ref();
        for (var, coeff) in row {
            acc.add_assign_ref(&coeff.mul_ref(&x[*var as usize]));
        }
        if acc.sign() == Ordering::Greater {
            check(acc)?;
        }
    }
    for (j, (l, u)) in problem.lower.iter().zip(&problem.upper).enumerate() {
        let below = l.sub_ref(&x[j]);
        if below.sign() == Ordering::Greater {
            check(below)?;
        }
        if let Some(u) = u {
            let above = x[j].sub_ref(u);
            if above.sign() == Ordering::Greater {
                check(above)?;
            }
        }
    }
    Ok(ok)
}

/// Basis member: a structural/slack column or the artificial of a row.
/// Artificials carry their creation row so Bland orderings stay stable
/// across row drops.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BasisVar {
    Col(usize),
    Art(usize),
}

struct Simplex<S> {
    /// Rows surviving redundancy drops.
    m: usize,
    /// Structural columns (shifted originals), then slacks.
    n_cols: usize,
    n_struct: usize,
    cols: Vec<SparseRow<S>>,
    b: Vec<S>,
    /// Phase-two cost per column, in minimize sense.
    cost: Vec<S>,
    binv: Vec<Vec<S>>,
    basis: Vec<BasisVar>,
    in_basis: Vec<bool>,
    xb: Vec<S>,
    pivots: usize,
    max_pivots: usize,
    trace: Option<Vec<String>>,
}

impl<S: Scalar> Simplex<S> {
    /// Rewrites the problem in standard form and installs the all-artificial
    /// starting basis.
    fn standardize(problem: &LpProblem<S>, trace: bool) -> Self {
        let n_struct = problem.n_vars;
        let shift = problem.lower.iter().any(|l| !l.is_zero());

        // Row-major assembly: equalities, inequalities, upper-bound rows.
        let mut rows: Vec<SparseRow<S>> = Vec::new();
        let mut rhs: Vec<S> = Vec::new();
        let mut slack_of_row: Vec<Option<usize>> = Vec::new();
        for (row, b) in problem.eq_rows.iter().zip(&problem.eq_rhs) {
            rows.push(row.clone());
            rhs.push(b.clone());
            slack_of_row.push(None);
        }
        let mut n_slack = 0;
        for (row, b) in problem.le_rows.iter().zip(&problem.le_rhs) {
            rows.push(row.clone());
            rhs.push(b.clone());
            slack_of_row.push(Some(n_slack));
            n_slack += 1;
        }
        for (j, u) in problem.upper.iter().enumerate() {
            if let Some(u) = u {
                rows.push(vec![(j as u32, S::one())]);
                rhs.push(u.clone());
                slack_of_row.push(Some(n_slack));
                n_slack += 1;
            }
        }

        // Shift x = lower + x': subtract row·lower from each right side.
        if shift {
            for (row, b) in rows.iter().zip(rhs.iter_mut()) {
                for (var, coeff) in row {
                    b.sub_mul_assign(coeff, &problem.lower[*var as usize]);
                }
            }
        }

        // Normalize b ≥ 0 by flipping rows.
        let mut flipped = vec![false; rows.len()];
        for (i, b) in rhs.iter_mut().enumerate() {
            if b.sign() == Ordering::Less {
                flipped[i] = true;
                *b = b.neg_ref();
                for (_, coeff) in rows[i].iter_mut() {
                    *coeff = coeff.neg_ref();
                }
            }
        }

        // Column-major with structural then slack columns.
        let n_cols = n_struct + n_slack;
        let mut cols: Vec<SparseRow<S>> = vec![Vec::new(); n_cols];
        for (i, row) in rows.iter().enumerate() {
            for (var, coeff) in row {
                if !coeff.is_zero() {
                    cols[*var as usize].push((i as u32, coeff.clone()));
                }
            }
            if let Some(s) = slack_of_row[i] {
                let coeff = if flipped[i] { S::one().neg_ref() } else { S::one() };
                cols[n_struct + s].push((i as u32, coeff));
            }
        }

        let mut cost = vec![S::zero(); n_cols];
        for (j, c) in problem.objective.iter().enumerate() {
            cost[j] = match problem.sense {
                Sense::Minimize => c.clone(),
                Sense::Maximize => c.neg_ref(),
            };
        }

        let m = rows.len();
        let binv = identity(m);
        let basis: Vec<BasisVar> = (0..m).map(BasisVar::Art).collect();
        let xb = rhs.clone();
        let max_pivots = 20_000 + 60 * (m + 1) + 4 * n_cols;
        Simplex {
            m,
            n_cols,
            n_struct,
            cols,
            b: rhs,
            cost,
            binv,
            basis,
            in_basis: vec![false; n_cols],
            xb,
            pivots: 0,
            max_pivots,
            trace: trace.then(Vec::new),
        }
    }

    /// Replaces the all-artificial start with a hinted basis, provided it
    /// is structurally valid, nonsingular in exact arithmetic, and its
    /// basic point is nonnegative.  Returns false (leaving the caller to
    /// take the cold path) otherwise.
    fn install_basis(&mut self, basis: &[BasisVar]) -> bool {
        if basis.len() != self.m {
            return false;
        }
        let mut seen_col = vec![false; self.n_cols];
        let mut seen_art = vec![false; self.m];
        for bv in basis {
            match bv {
                BasisVar::Col(j) => {
                    if *j >= self.n_cols || seen_col[*j] {
                        return false;
                    }
                    seen_col[*j] = true;
                }
                BasisVar::Art(k) => {
                    if *k >= self.m || seen_art[*k] {
                        return false;
                    }
                    seen_art[*k] = true;
                }
            }
        }
        let mut mat = vec![vec![S::zero(); self.m]; self.m];
        for (i, bv) in basis.iter().enumerate() {
            match bv {
                BasisVar::Col(j) => {
                    for (r, v) in &self.cols[*j] {
                        mat[*r as usize][i] = v.clone();
                    }
                }
                BasisVar::Art(k) => mat[*k][i] = S::one(),
            }
        }
        let Some(binv) = invert(&mat) else {
            return false;
        };
        let xb: Vec<S> = (0..self.m)
            .map(|i| {
                let mut acc = S::zero();
                for (k, bk) in self.b.iter().enumerate() {
                    acc.add_assign_ref(&binv[i][k].mul_ref(bk));
                }
                acc
            })
            .collect();
        if xb.iter().any(|v| v.sign() == Ordering::Less) {
            return false;
        }
        self.binv = binv;
        self.xb = xb;
        self.basis = basis.to_vec();
        self.in_basis = seen_col;
        true
    }

    /// Pivots toward a hinted basis from the current (artificial) start,
    /// keeping `xb ≥ 0` throughout.  Hints that cannot enter safely are
    /// skipped; the regular phases then finish from whatever state was
    /// reached.  Used when a float-guided basis fails exact installation,
    /// which happens on degenerate optima where exactly recomputed basic
    /// values stray below zero or the basis matrix turns out singular.
    fn crash_toward(&mut self, hint: &[BasisVar]) {
        for bv in hint {
            let BasisVar::Col(j) = *bv else { continue };
            if self.in_basis[j] {
                continue;
            }
            let u = self.direction(j);
            let mut best: Option<(S, usize)> = None;
            for (i, ui) in u.iter().enumerate() {
                // Positive direction entries bound the step as usual; a
                // negative entry on a zero-valued row permits a degenerate
                // pivot that installs the hint without moving.
                let candidate = match ui.sign() {
                    Ordering::Greater => Some(self.xb[i].div_ref(ui)),
                    Ordering::Less if self.xb[i].is_zero() => Some(S::zero()),
                    _ => None,
                };
                let Some(ratio) = candidate else { continue };
                let replace = match &best {
                    None => true,
                    Some((best_ratio, best_row)) => {
                        ratio < *best_ratio
                            || (ratio == *best_ratio
                                && matches!(self.basis[i], BasisVar::Art(_))
                                && matches!(self.basis[*best_row], BasisVar::Col(_)))
                    }
                };
                if replace {
                    best = Some((ratio, i));
                }
            }
            if let Some((_, row)) = best {
                self.pivot(row, BasisVar::Col(j), &u, 0);
            }
        }
    }

    fn basis_ordinal(&self, v: BasisVar) -> usize {
        match v {
            BasisVar::Col(j) => j,
            BasisVar::Art(row) => self.n_cols + row,
        }
    }

    /// Simplex multipliers `y = c_B · B⁻¹` for the given per-basis costs.
    fn multipliers(&self, basis_cost: impl Fn(BasisVar) -> S) -> Vec<S> {
        let mut y = vec![S::zero(); self.m];
        for (i, &bv) in self.basis.iter().enumerate() {
            let c = basis_cost(bv);
            if c.is_zero() {
                continue;
            }
            for (k, yk) in y.iter_mut().enumerate() {
                yk.add_assign_ref(&c.mul_ref(&self.binv[i][k]));
            }
        }
        y
    }

    fn reduced_cost(&self, j: usize, cost_j: &S, y: &[S]) -> S {
        let mut d = cost_j.clone();
        for (r, v) in &self.cols[j] {
            d.sub_mul_assign(&y[*r as usize], v);
        }
        d
    }

    /// `u = B⁻¹ · column_j`.
    fn direction(&self, j: usize) -> Vec<S> {
        let mut u = vec![S::zero(); self.m];
        for (i, ui) in u.iter_mut().enumerate() {
            for (r, v) in &self.cols[j] {
                ui.add_assign_ref(&self.binv[i][*r as usize].mul_ref(v));
            }
        }
        u
    }

    /// Minimum-ratio row with Bland tie-breaking; `None` when unbounded.
    ///
    /// Two passes in the style of the Harris test: the first finds the
    /// minimum of the relaxed bounds `(xb + tol) / u`, the second applies
    /// the Bland ordinal among rows whose true ratio fits that relaxed
    /// minimum, which keeps every basic value above `-tol` after the step.
    /// In exact mode the tolerance is zero and this reduces to the textbook
    /// rule; in float mode the fuzz keeps the ordinal rule engaged on
    /// degenerate steps, where bitwise-equal ratio comparisons would let
    /// the pivot sequence cycle.
    fn ratio_test(&self, u: &[S]) -> Option<usize> {
        let tol = S::feas_tol();
        let mut relaxed: Option<S> = None;
        for (i, ui) in u.iter().enumerate() {
            if *ui <= tol {
                continue;
            }
            let mut slack = self.xb[i].clone();
            slack.add_assign_ref(&tol);
            let bound = slack.div_ref(ui);
            if relaxed.as_ref().is_none_or(|m| bound < *m) {
                relaxed = Some(bound);
            }
        }
        let relaxed = relaxed?;
        let mut best: Option<usize> = None;
        for (i, ui) in u.iter().enumerate() {
            if *ui <= tol || self.xb[i].div_ref(ui) > relaxed {
                continue;
            }
            if best.is_none_or(|row| {
                self.basis_ordinal(self.basis[i]) < self.basis_ordinal(self.basis[row])
            }) {
                best = Some(i);
            }
        }
        best
    }

    fn pivot(&mut self, row: usize, entering: BasisVar, u: &[S], phase: u8) {
        let piv = u[row].clone();
        if let Some(trace) = &mut self.trace {
            trace.push(format!(
                "phase {phase} pivot {}: enter {}, leave {}, pivot element {}",
                self.pivots + 1,
                name_of(entering, self.n_struct),
                name_of(self.basis[row], self.n_struct),
                piv,
            ));
        }
        for k in 0..self.m {
            self.binv[row][k] = self.binv[row][k].div_ref(&piv);
        }
        self.xb[row] = self.xb[row].div_ref(&piv);
        for i in 0..self.m {
            if i == row || u[i].is_zero() {
                continue;
            }
            let factor = u[i].clone();
            // binv[i] -= factor * binv[row]; same for xb.
            for k in 0..self.m {
                let delta = factor.mul_ref(&self.binv[row][k]);
                self.binv[i][k].sub_assign_ref(&delta);
            }
            let delta = factor.mul_ref(&self.xb[row]);
            self.xb[i].sub_assign_ref(&delta);
        }
        if let BasisVar::Col(j) = self.basis[row] {
            self.in_basis[j] = false;
        }
        self.basis[row] = entering;
        if let BasisVar::Col(j) = entering {
            self.in_basis[j] = true;
        }
        self.pivots += 1;
    }

    /// One phase of Bland-rule iterations over the allowed columns.
    /// Returns `None` when optimal, or the unbounded entering column.
    fn iterate(
        &mut self,
        basis_cost: impl Fn(BasisVar) -> S + Copy,
        col_cost: impl Fn(usize) -> S + Copy,
        phase: u8,
    ) -> Result<Option<usize>, LpError> {
        let tol = S::feas_tol();
        let neg_tol = tol.neg_ref();
        loop {
            if self.pivots >= self.max_pivots {
                return Err(LpError::NumericBreakdown(format!(
                    "pivot limit {} reached",
                    self.max_pivots
                )));
            }
            let y = self.multipliers(basis_cost);
            let mut entering = None;
            for j in 0..self.n_cols {
                if self.in_basis[j] {
                    continue;
                }
                let d = self.reduced_cost(j, &col_cost(j), &y);
                if !d.is_finite() {
                    return Err(LpError::NumericBreakdown("non-finite reduced cost".into()));
                }
                if d < neg_tol {
                    entering = Some(j);
                    break;
                }
            }
            let Some(j) = entering else {
                return Ok(None);
            };
            let u = self.direction(j);
            match self.ratio_test(&u) {
                Some(row) => self.pivot(row, BasisVar::Col(j), &u, phase),
                None => return Ok(Some(j)),
            }
        }
    }

    /// Minimizes the artificial total; returns the optimal infeasibility.
    fn run_phase_one(&mut self) -> Result<S, LpError> {
        let art_cost = |bv: BasisVar| match bv {
            BasisVar::Art(_) => S::one(),
            BasisVar::Col(_) => S::zero(),
        };
        let unbounded = self.iterate(art_cost, |_| S::zero(), 1)?;
        if unbounded.is_some() {
            // The artificial total is bounded below by zero.
            return Err(LpError::NumericBreakdown(
                "phase one reported an unbounded direction".into(),
            ));
        }
        let mut gap = S::zero();
        for (i, bv) in self.basis.iter().enumerate() {
            if matches!(bv, BasisVar::Art(_)) {
                gap.add_assign_ref(&self.xb[i]);
            }
        }
        Ok(gap)
    }

    /// Pivots leftover artificials out of the basis or drops their rows.
    fn cleanup_artificials(&mut self) -> Result<(), LpError> {
        let tol = S::feas_tol();
        loop {
            let Some(row) = self
                .basis
                .iter()
                .position(|bv| matches!(bv, BasisVar::Art(_)))
            else {
                return Ok(());
            };
            // Any nonbasic column with a nonzero element in this row can
            // replace the artificial: the basic value is zero, so the pivot
            // is degenerate and feasibility is preserved.
            let mut replacement = None;
            for j in 0..self.n_cols {
                if self.in_basis[j] {
                    continue;
                }
                let mut elem = S::zero();
                for (r, v) in &self.cols[j] {
                    elem.add_assign_ref(&self.binv[row][*r as usize].mul_ref(v));
                }
                if elem.abs_ref() > tol {
                    replacement = Some(j);
                    break;
                }
            }
            match replacement {
                Some(j) => {
                    let u = self.direction(j);
                    self.pivot(row, BasisVar::Col(j), &u, 1);
                }
                None => self.drop_row(row)?,
            }
        }
    }

    /// Removes a redundant row and rebuilds the basis inverse.
    fn drop_row(&mut self, row: usize) -> Result<(), LpError> {
        if let Some(trace) = &mut self.trace {
            trace.push(format!("drop redundant row {row}"));
        }
        self.basis.remove(row);
        self.b.remove(row);
        self.m -= 1;
        for col in &mut self.cols {
            col.retain(|(r, _)| *r as usize != row);
            for (r, _) in col.iter_mut() {
                if *r as usize > row {
                    *r -= 1;
                }
            }
        }
        // Re-invert the surviving basis columns.
        let mut mat = vec![vec![S::zero(); self.m]; self.m];
        for (i, bv) in self.basis.iter().enumerate() {
            match bv {
                BasisVar::Col(j) => {
                    for (r, v) in &self.cols[*j] {
                        mat[*r as usize][i] = v.clone();
                    }
                }
                BasisVar::Art(_) => {
                    // A stuck artificial's unit column tracks its row through
                    // deletions, which is its current basis position.
                    mat[i][i] = S::one();
                }
            }
        }
        self.binv = invert(&mat).ok_or_else(|| {
            LpError::NumericBreakdown("singular basis after row drop".into())
        })?;
        // Recompute basic values from scratch.
        self.xb = (0..self.m)
            .map(|i| {
                let mut acc = S::zero();
                for (k, bk) in self.b.iter().enumerate() {
                    acc.add_assign_ref(&self.binv[i][k].mul_ref(bk));
                }
                acc
            })
            .collect();
        Ok(())
    }

    fn run_phase_two(&mut self) -> Result<LpStatus, LpError> {
        let cost = self.cost.clone();
        let basis_cost = {
            let cost = cost.clone();
            move |bv: BasisVar| match bv {
                BasisVar::Col(j) => cost[j].clone(),
                BasisVar::Art(_) => S::zero(),
            }
        };
        let col_cost = |j: usize| cost[j].clone();
        match self.iterate(&basis_cost, col_cost, 2)? {
            None => Ok(LpStatus::Optimal),
            Some(_) => Ok(LpStatus::Unbounded),
        }
    }

    /// Current point in original variable coordinates.
    fn current_x(&self, problem: &LpProblem<S>) -> Vec<S> {
        let mut x = vec![S::zero(); self.n_struct];
        for (i, bv) in self.basis.iter().enumerate() {
            if let BasisVar::Col(j) = bv {
                if *j < self.n_struct {
                    x[*j] = self.xb[i].clone();
                }
            }
        }
        for (xj, l) in x.iter_mut().zip(&problem.lower) {
            xj.add_assign_ref(l);
        }
        x
    }
}

fn name_of(v: BasisVar, n_struct: usize) -> String {
    match v {
        BasisVar::Col(j) if j < n_struct => format!("x{j}"),
        BasisVar::Col(j) => format!("s{}", j - n_struct),
        BasisVar::Art(row) => format!("a{row}"),
    }
}

fn identity<S: Scalar>(m: usize) -> Vec<Vec<S>> {
    let mut out = vec![vec![S::zero(); m]; m];
    for (i, row) in out.iter_mut().enumerate() {
        row[i] = S::one();
    }
    out
}

/// Gauss-Jordan inverse; `None` when singular (within tolerance).
fn invert<S: Scalar>(mat: &[Vec<S>]) -> Option<Vec<Vec<S>>> {
    let m = mat.len();
    let mut a: Vec<Vec<S>> = mat.to_vec();
    let mut inv = identity::<S>(m);
    let tol = S::feas_tol();
    for col in 0..m {
        let pivot_row = (col..m).max_by(|&r1, &r2| {
            a[r1][col]
                .abs_ref()
                .partial_cmp(&a[r2][col].abs_ref())
                .unwrap_or(Ordering::Equal)
        })?;
        if a[pivot_row][col].abs_ref() <= tol {
            return None;
        }
        a.swap(col, pivot_row);
        inv.swap(col, pivot_row);
        let piv = a[col][col].clone();
        for k in 0..m {
            a[col][k] = a[col][k].div_ref(&piv);
            inv[col][k] = inv[col][k].div_ref(&piv);
        }
        for r in 0..m {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let factor = a[r][col].clone();
            for k in 0..m {
                let d = factor.mul_ref(&a[col][k]);
                a[r][k].sub_assign_ref(&d);
                let d = factor.mul_ref(&inv[col][k]);
                inv[r][k].sub_assign_ref(&d);
            }
        }
    }
    Some(inv)
}
