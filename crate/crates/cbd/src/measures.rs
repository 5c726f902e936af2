//! Degree-of-(non)contextuality measures.
//!
//! Every measure is a linear program over the incidence matrices of
//! [`crate::space`].  Throughout, `x` is a probability vector over the
//! `2^N` deterministic couplings (the all-ones first reduced row forces
//! `1·x = 1`), `p* = (p_l*, p_b*, p_c*)` is the reduced vector of the
//! system, and `p(·)*` its complete vector.
//!
//! * [`is_contextual`]: the system is noncontextual iff `M x = p*` has a
//!   nonnegative solution.
//! * [`cnt1`]: L1 distance from `p_c*` to the feasibility polytope
//!   `P_c = {M_c x : x ≥ 0, M_l x = p_l*, M_b x = p_b*}`; since every
//!   achievable connection 2-marginal is dominated by the multimaximal one,
//!   this equals `1·p_c* −` max `1·M_c x`.
//! * [`cnt2`]: L1 distance from `p_b*` to the noncontextuality polytope
//!   `P_b = {M_b x : x ≥ 0, M_l x = p_l*, M_c x = p_c*}`.
//! * [`cnt3`]: minimal total variation of a *signed* measure reproducing
//!   `p*`, minus 1: minimize `1·y₋` s.t. `M(y₊ − y₋) = p*`, `y± ≥ 0`,
//!   reported as `1·|y₊* − y₋*| − 1`.
//! * [`ncnt2`]: for noncontextual systems, the largest single-coordinate
//!   displacement of `p_b*` in either direction that stays inside `P_b`,
//!   minimized over coordinates (2K LPs).
//! * [`ncnt1_probe`]: the analogous single-coordinate *increase* of `p_c*`;
//!   provably always 0 because `p_c*` is the Fréchet maximum — the
//!   operation exists to test that claim.
//! * [`cntf`]: contextual fraction, `1 −` the maximal subprobability mass
//!   `1·z` with `M(·) z ≤ p(·)*`.
//!
//! In float mode any contextuality decision closer than
//! [`crate::scalar::F64_DECISION_BAND`] to the boundary is re-verified in
//! exact arithmetic, so zero-set questions never depend on `f64` noise.

use num::BigRational;
use thiserror::Error;

use crate::lp::{self, LpProblem, LpStatus, Sense, SparseRow};
use crate::scalar::{sum, Scalar, F64_DECISION_BAND};
use crate::space::{
    complete_vector, reduced_vector, IncidenceMatrix, RowLabel, DEFAULT_MAX_VARS,
};
use crate::system::{System, SystemError};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MeasureError {
    #[error(transparent)]
    System(#[from] SystemError),
    #[error("system is contextual")]
    SystemIsContextual,
    #[error("bunch constraints infeasible: {0}")]
    InfeasibleBunches(String),
    #[error(transparent)]
    Lp(#[from] lp::LpError),
}

/// Measure computation settings.
#[derive(Debug, Clone, Copy)]
pub struct Options {
    /// Cap on the number of variables; `2^N` LP columns are materialized.
    pub max_vars: usize,
}

impl Default for Options {
    fn default() -> Self {
        Options { max_vars: DEFAULT_MAX_VARS }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    Cnt1,
    Cnt2,
    Cnt3,
    Ncnt2,
    Cntf,
}

impl Measure {
    pub fn name(self) -> &'static str {
        match self {
            Measure::Cnt1 => "cnt1",
            Measure::Cnt2 => "cnt2",
            Measure::Cnt3 => "cnt3",
            Measure::Ncnt2 => "ncnt2",
            Measure::Cntf => "cntf",
        }
    }
}

/// Per-coordinate displacement bounds found by the NCNT2 LPs.
#[derive(Debug, Clone, PartialEq)]
pub struct Displacement<S> {
    pub context: usize,
    /// Contents of the bunch coordinate, sorted ascending.
    pub contents: Vec<usize>,
    pub plus: S,
    pub minus: S,
}

/// Summary of the LP run behind a measure value.
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessSummary<S> {
    /// Raw LP optimum in the sense the measure poses it.
    pub objective: S,
    /// True when computed in exact arithmetic.
    pub exact: bool,
    pub pivots: usize,
    /// NCNT2 only: the 2K per-coordinate displacement bounds.
    pub displacements: Option<Vec<Displacement<S>>>,
    /// NCNT2 only: true when every displacement bound is zero, i.e. the
    /// noncontextuality polytope leaves no single-coordinate slack at all.
    pub empty_interior: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasureReport<S> {
    pub measure: Measure,
    /// Nonnegative by construction in exact mode; float values are clamped
    /// at zero within tolerance.
    pub value: S,
    pub contextual: bool,
    pub witness: WitnessSummary<S>,
}

/// Reduced matrix, stacked vector, and per-row LP columns of a system.
struct ReducedParts<S> {
    matrix: IncidenceMatrix,
    p: Vec<S>,
}

impl<S: Scalar> ReducedParts<S> {
    fn build(system: &System<S>, options: Options) -> Result<Self, MeasureError> {
        let matrix = IncidenceMatrix::reduced_with_cap(system.format(), options.max_vars)?;
        let p = reduced_vector(system).stacked();
        Ok(ReducedParts { matrix, p })
    }

    fn n_cols(&self) -> usize {
        self.matrix.n_cols()
    }

    /// Equality row `i` of `M x = p*` as an LP constraint.
    fn eq_row(&self, i: usize) -> (SparseRow<S>, S) {
        let row = (0..self.n_cols())
            .filter(|&j| self.matrix.entry(i, j))
            .map(|j| (j as u32, S::one()))
            .collect();
        (row, self.p[i].clone())
    }
}

fn expect_optimal<S: Scalar>(
    solution: &lp::LpSolution<S>,
    what: &str,
) -> Result<(), MeasureError> {
    match solution.status {
        LpStatus::Optimal => Ok(()),
        LpStatus::Infeasible => Err(MeasureError::InfeasibleBunches(format!(
            "{what} LP reported infeasible"
        ))),
        LpStatus::Unbounded => Err(MeasureError::InfeasibleBunches(format!(
            "{what} LP reported unbounded"
        ))),
    }
}

/// Clamps an exactly-nonnegative quantity computed in float mode.
fn clamp_value<S: Scalar>(value: S, what: &str) -> Result<S, MeasureError> {
    match value.sign() {
        std::cmp::Ordering::Less => {
            let band = S::from_exact(&BigRational::new(1.into(), 1_000_000.into()));
            if S::EXACT || value.neg_ref() > band {
                Err(MeasureError::InfeasibleBunches(format!(
                    "{what} produced negative value {value}"
                )))
            } else {
                Ok(S::zero())
            }
        }
        _ => Ok(value),
    }
}

/// Contextuality flag for a measure whose zero set is exactly the
/// noncontextual systems: exact mode decides by sign, float mode defers to
/// the exactly re-verified decision when within the boundary band.
fn contextual_flag<S: Scalar>(
    system: &System<S>,
    value: &S,
    options: Options,
) -> Result<bool, MeasureError> {
    if S::EXACT {
        return Ok(value.sign() == std::cmp::Ordering::Greater);
    }
    if value.to_f64() > F64_DECISION_BAND {
        return Ok(true);
    }
    is_contextual(system, options)
}

/// Decides noncontextuality: is there a nonnegative `x` with `M x = p*`?
pub fn is_contextual<S: Scalar>(
    system: &System<S>,
    options: Options,
) -> Result<bool, MeasureError> {
    let parts = ReducedParts::build(system, options)?;
    let mut problem = LpProblem::new(parts.n_cols(), Sense::Minimize);
    for i in 0..parts.matrix.n_rows() {
        let (row, rhs) = parts.eq_row(i);
        problem.add_eq(row, rhs);
    }
    let gap = lp::phase_one_gap(&problem)?;
    if S::EXACT {
        return Ok(gap.sign() == std::cmp::Ordering::Greater);
    }
    if gap.to_f64() > F64_DECISION_BAND {
        return Ok(true);
    }
    // Within the decision band of the boundary: settle the question in
    // exact arithmetic on the rational image of the same entries.
    is_contextual(&system.to_exact(), options)
}

/// CNT1: `1·p_c* −` max `1·M_c x` over `x ≥ 0`, `M_l x = p_l*`,
/// `M_b x = p_b*`.
pub fn cnt1<S: Scalar>(
    system: &System<S>,
    options: Options,
) -> Result<MeasureReport<S>, MeasureError> {
    let parts = ReducedParts::build(system, options)?;
    let mut problem = LpProblem::new(parts.n_cols(), Sense::Maximize);
    for i in parts.matrix.low_rows().chain(parts.matrix.bunch_rows()) {
        let (row, rhs) = parts.eq_row(i);
        problem.add_eq(row, rhs);
    }
    // Objective: number of connection rows hit by each column.
    let conn = parts.matrix.connection_rows();
    for j in 0..parts.n_cols() {
        let hits = conn.clone().filter(|&i| parts.matrix.entry(i, j)).count();
        if hits > 0 {
            problem.set_objective(j, S::from_int(hits as i64));
        }
    }
    let solution = lp::solve(&problem)?;
    expect_optimal(&solution, "cnt1")?;
    let optimum = solution.objective.clone().expect("optimal");
    let target = sum(&parts.p[conn.start..conn.end]);
    let value = clamp_value(target.sub_ref(&optimum), "cnt1")?;
    let contextual = contextual_flag(system, &value, options)?;
    Ok(MeasureReport {
        measure: Measure::Cnt1,
        value,
        contextual,
        witness: WitnessSummary {
            objective: optimum,
            exact: S::EXACT,
            pivots: solution.pivots,
            displacements: None,
            empty_interior: None,
        },
    })
}

/// CNT2: min `1·d` over `x, d ≥ 0`, `M_l x = p_l*`, `M_c x = p_c*`,
/// `−d ≤ p_b* − M_b x ≤ d`.
pub fn cnt2<S: Scalar>(
    system: &System<S>,
    options: Options,
) -> Result<MeasureReport<S>, MeasureError> {
    let parts = ReducedParts::build(system, options)?;
    let n_cols = parts.n_cols();
    let bunch: Vec<usize> = parts.matrix.bunch_rows().collect();
    let k = bunch.len();
    let mut problem = LpProblem::new(n_cols + k, Sense::Minimize);
    for i in parts.matrix.low_rows().chain(parts.matrix.connection_rows()) {
        let (row, rhs) = parts.eq_row(i);
        problem.add_eq(row, rhs);
    }
    for (coord, &i) in bunch.iter().enumerate() {
        let d = (n_cols + coord) as u32;
        let (row, rhs) = parts.eq_row(i);
        // (M_b x)_i − d_i ≤ p_i  and  −(M_b x)_i − d_i ≤ −p_i.
        let mut upper = row.clone();
        upper.push((d, S::one().neg_ref()));
        problem.add_le(upper, rhs.clone());
        let mut lower: SparseRow<S> =
            row.iter().map(|(j, _)| (*j, S::one().neg_ref())).collect();
        lower.push((d, S::one().neg_ref()));
        problem.add_le(lower, rhs.neg_ref());
        problem.set_objective(n_cols + coord, S::one());
    }
    let solution = lp::solve(&problem)?;
    expect_optimal(&solution, "cnt2")?;
    let optimum = solution.objective.clone().expect("optimal");
    let value = clamp_value(optimum.clone(), "cnt2")?;
    let contextual = contextual_flag(system, &value, options)?;
    Ok(MeasureReport {
        measure: Measure::Cnt2,
        value,
        contextual,
        witness: WitnessSummary {
            objective: optimum,
            exact: S::EXACT,
            pivots: solution.pivots,
            displacements: None,
            empty_interior: None,
        },
    })
}

/// CNT3: minimize `1·y₋` s.t. `M(y₊ − y₋) = p*`, `y± ≥ 0`; the value is
/// the total variation `1·|y₊* − y₋*|` minus 1.
pub fn cnt3<S: Scalar>(
    system: &System<S>,
    options: Options,
) -> Result<MeasureReport<S>, MeasureError> {
    let parts = ReducedParts::build(system, options)?;
    let n_cols = parts.n_cols();
    let mut problem = LpProblem::new(2 * n_cols, Sense::Minimize);
    for i in 0..parts.matrix.n_rows() {
        let (row, rhs) = parts.eq_row(i);
        let mut signed = Vec::with_capacity(2 * row.len());
        for (j, _) in &row {
            signed.push((*j, S::one()));
        }
        for (j, _) in &row {
            signed.push((j + n_cols as u32, S::one().neg_ref()));
        }
        problem.add_eq(signed, rhs);
    }
    for j in 0..n_cols {
        problem.set_objective(n_cols + j, S::one());
    }
    let solution = lp::solve(&problem)?;
    expect_optimal(&solution, "cnt3")?;
    let optimum = solution.objective.clone().expect("optimal");
    let x = solution.x.as_ref().expect("optimal");
    let mut variation = S::zero();
    for j in 0..n_cols {
        variation.add_assign_ref(&x[j].sub_ref(&x[n_cols + j]).abs_ref());
    }
    let value = clamp_value(variation.sub_ref(&S::one()), "cnt3")?;
    let contextual = contextual_flag(system, &value, options)?;
    Ok(MeasureReport {
        measure: Measure::Cnt3,
        value,
        contextual,
        witness: WitnessSummary {
            objective: optimum,
            exact: S::EXACT,
            pivots: solution.pivots,
            displacements: None,
            empty_interior: None,
        },
    })
}

/// NCNT2: for a noncontextual system, minimize over bunch coordinates the
/// smaller of the two maximal displacements `p_b* ± d·e_i` that keep the
/// bunch vector inside the noncontextuality polytope.
pub fn ncnt2<S: Scalar>(
    system: &System<S>,
    options: Options,
) -> Result<MeasureReport<S>, MeasureError> {
    if is_contextual(system, options)? {
        return Err(MeasureError::SystemIsContextual);
    }
    let parts = ReducedParts::build(system, options)?;
    let n_cols = parts.n_cols();
    let bunch: Vec<usize> = parts.matrix.bunch_rows().collect();
    let mut displacements = Vec::with_capacity(bunch.len());
    let mut pivots = 0;
    let mut best: Option<S> = None;
    for &i in &bunch {
        let mut bound = |direction: i64| -> Result<S, MeasureError> {
            let mut problem = LpProblem::new(n_cols + 1, Sense::Maximize);
            let t = n_cols as u32;
            problem.set_objective(n_cols, S::one());
            for r in 0..parts.matrix.n_rows() {
                let (mut row, rhs) = parts.eq_row(r);
                if r == i {
                    // (M_b x)_i = p_i ± t.
                    row.push((t, S::from_int(-direction)));
                }
                problem.add_eq(row, rhs);
            }
            let solution = lp::solve(&problem)?;
            expect_optimal(&solution, "ncnt2")?;
            pivots += solution.pivots;
            clamp_value(solution.objective.expect("optimal"), "ncnt2")
        };
        let plus = bound(1)?;
        let minus = bound(-1)?;
        let lesser = if plus <= minus { plus.clone() } else { minus.clone() };
        best = Some(match best {
            Some(b) if b <= lesser => b,
            _ => lesser,
        });
        let label = &parts.matrix.rows()[i].label;
        let RowLabel::BunchMarginal { context, contents } = label else {
            unreachable!("bunch rows carry bunch labels");
        };
        displacements.push(Displacement {
            context: *context,
            contents: contents.clone(),
            plus,
            minus,
        });
    }
    let value = best.unwrap_or_else(S::zero);
    let empty_interior = displacements
        .iter()
        .all(|d| d.plus.is_zero() && d.minus.is_zero());
    Ok(MeasureReport {
        measure: Measure::Ncnt2,
        value: value.clone(),
        contextual: false,
        witness: WitnessSummary {
            objective: value,
            exact: S::EXACT,
            pivots,
            displacements: Some(displacements),
            empty_interior: Some(empty_interior),
        },
    })
}

/// Maximal feasibility-preserving increase of any single `p_c*` coordinate
/// of a noncontextual system.  Always 0, because multimaximal 2-marginals
/// already sit at the Fréchet upper bound; exists to test that claim.
pub fn ncnt1_probe<S: Scalar>(
    system: &System<S>,
    options: Options,
) -> Result<S, MeasureError> {
    if is_contextual(system, options)? {
        return Err(MeasureError::SystemIsContextual);
    }
    let parts = ReducedParts::build(system, options)?;
    let n_cols = parts.n_cols();
    let mut best = S::zero();
    for i in parts.matrix.connection_rows() {
        let mut problem = LpProblem::new(n_cols + 1, Sense::Maximize);
        problem.set_objective(n_cols, S::one());
        for r in 0..parts.matrix.n_rows() {
            let (mut row, rhs) = parts.eq_row(r);
            if r == i {
                // (M_c x)_i = p_i + ε.
                row.push((n_cols as u32, S::one().neg_ref()));
            }
            problem.add_eq(row, rhs);
        }
        let solution = lp::solve(&problem)?;
        expect_optimal(&solution, "ncnt1 probe")?;
        let eps = clamp_value(solution.objective.expect("optimal"), "ncnt1 probe")?;
        if eps > best {
            best = eps;
        }
    }
    Ok(best)
}

/// CNTF, the contextual fraction: `1 −` max `1·z` over `z ≥ 0`,
/// `M(·) z ≤ p(·)*`, `1·z ≤ 1`.
pub fn cntf<S: Scalar>(
    system: &System<S>,
    options: Options,
) -> Result<MeasureReport<S>, MeasureError> {
    let matrix = IncidenceMatrix::complete_with_cap(system.format(), options.max_vars)?;
    let p = complete_vector(system).stacked();
    let n_cols = matrix.n_cols();
    let mut problem = LpProblem::new(n_cols, Sense::Maximize);
    for j in 0..n_cols {
        problem.set_objective(j, S::one());
    }
    for i in 0..matrix.n_rows() {
        let row: SparseRow<S> = (0..n_cols)
            .filter(|&j| matrix.entry(i, j))
            .map(|j| (j as u32, S::one()))
            .collect();
        problem.add_le(row, p[i].clone());
    }
    problem.add_le(
        (0..n_cols).map(|j| (j as u32, S::one())).collect(),
        S::one(),
    );
    let solution = lp::solve(&problem)?;
    expect_optimal(&solution, "cntf")?;
    let optimum = solution.objective.clone().expect("optimal");
    let value = clamp_value(S::one().sub_ref(&optimum), "cntf")?;
    let contextual = contextual_flag(system, &value, options)?;
    Ok(MeasureReport {
        measure: Measure::Cntf,
        value,
        contextual,
        witness: WitnessSummary {
            objective: optimum,
            exact: S::EXACT,
            pivots: solution.pivots,
            displacements: None,
            empty_interior: None,
        },
    })
}

/// CNT1 restated as the direct displacement LP: min `1·d` with
/// `−d ≤ p_c* − M_c x ≤ d` under the same bunch constraints.  Kept for the
/// equality test against [`cnt1`]; both are the L1 distance to `P_c`.
#[doc(hidden)]
pub fn cnt1_direct<S: Scalar>(
    system: &System<S>,
    options: Options,
) -> Result<S, MeasureError> {
    let parts = ReducedParts::build(system, options)?;
    let n_cols = parts.n_cols();
    let conn: Vec<usize> = parts.matrix.connection_rows().collect();
    let k = conn.len();
    let mut problem = LpProblem::new(n_cols + k, Sense::Minimize);
    for i in parts.matrix.low_rows().chain(parts.matrix.bunch_rows()) {
        let (row, rhs) = parts.eq_row(i);
        problem.add_eq(row, rhs);
    }
    for (coord, &i) in conn.iter().enumerate() {
        let d = (n_cols + coord) as u32;
        let (row, rhs) = parts.eq_row(i);
        let mut upper = row.clone();
        upper.push((d, S::one().neg_ref()));
        problem.add_le(upper, rhs.clone());
        let mut lower: SparseRow<S> =
            row.iter().map(|(j, _)| (*j, S::one().neg_ref())).collect();
        lower.push((d, S::one().neg_ref()));
        problem.add_le(lower, rhs.neg_ref());
        problem.set_objective(n_cols + coord, S::one());
    }
    let solution = lp::solve(&problem)?;
    expect_optimal(&solution, "cnt1 direct")?;
    clamp_value(solution.objective.expect("optimal"), "cnt1 direct")
}
