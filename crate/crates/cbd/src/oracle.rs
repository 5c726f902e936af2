//! Independent cross-checks for the LP pipeline.
//!
//! The measures in [`crate::measures`] all route through the simplex
//! solver; this module validates them on small instances by entirely
//! different means:
//!
//! * [`column_elimination_noncontextuality`] decides noncontextuality
//!   without any LP.  Every column of the complete incidence matrix that
//!   hits a zero entry of the complete vector is eliminated (its weight is
//!   forced to zero), and the remaining system `M x = p(·)*, x ≥ 0` is
//!   tested by an exhaustive search over supports: by the Carathéodory
//!   argument, a feasible point exists iff some linearly independent
//!   column subset carries a nonnegative solution, so a depth-first search
//!   over independent subsets with exact integer arithmetic settles the
//!   question.  The search is budgeted and raises [`OracleError::OracleTooSlow`]
//!   beyond the cap; the oracle is for tiny instances only.
//! * [`crosscheck_modes`] runs every measure in both arithmetic modes and
//!   reports the largest float-vs-rational discrepancy.
//! * [`random_system`] and [`random_cyclic_spec`] generate reproducible
//!   pseudo-random test systems with denominator-capped rational pmfs so
//!   exact LP stays fast.

use num::{BigInt, BigRational, Integer, One, Signed, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cyclic::{CyclicError, CyclicSpec};
use crate::measures::{self, MeasureError, Options};
use crate::scalar::Scalar;
use crate::space::{complete_vector, IncidenceMatrix};
use crate::system::{System, SystemError, SystemFormat};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum OracleError {
    #[error("support search exceeded budget of {budget} enumeration steps")]
    OracleTooSlow { budget: u64 },
    #[error("system too large for the oracle: {0}")]
    SystemTooLarge(String),
    #[error("integer overflow during exact elimination: {0}")]
    NumericOverflow(String),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// Cap on enumerated supports before the search gives up.
pub const SUPPORT_SEARCH_BUDGET: u64 = 10_000_000;

/// Variable cap for the elimination oracle.
pub const ORACLE_MAX_VARS: usize = 12;

/// Outcome of one cross-check batch.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub check: String,
    pub systems: usize,
    pub max_discrepancy: f64,
    pub passed: bool,
}

/// Format with a single context measuring `n` contents, `1 <= n`.
pub fn single_format(n: usize) -> Result<SystemFormat, SystemError> {
    let names: Vec<String> = (1..=n).map(|q| format!("q{q}")).collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    SystemFormat::new(&refs, &[("c1", &refs)])
}

/// The mixed-arity format the random cross-check suite exercises besides
/// the cyclic ranks: four contents measured by five overlapping contexts
/// of sizes 2 and 3, so connections span two to four contexts each.
pub fn overlap4_format() -> SystemFormat {
    SystemFormat::new(
        &["q1", "q2", "q3", "q4"],
        &[
            ("c1", &["q1", "q2"]),
            ("c2", &["q2", "q3", "q4"]),
            ("c3", &["q1", "q3"]),
            ("c4", &["q1", "q4"]),
            ("c5", &["q1", "q2", "q3"]),
        ],
    )
    .expect("well-formed by construction")
}

/// Reproducible random system on a format: each bunch pmf is drawn with
/// denominator 64 from a seeded generator.
pub fn random_system(format: &SystemFormat, seed: u64) -> System<BigRational> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bunches = Vec::with_capacity(format.n_contexts());
    for c in 0..format.n_contexts() {
        let patterns = 1usize << format.contents_of(c).len();
        bunches.push(random_pmf(&mut rng, patterns));
    }
    System::new(format.clone(), bunches).expect("generated pmfs are valid by construction")
}

fn random_pmf(rng: &mut ChaCha8Rng, patterns: usize) -> Vec<BigRational> {
    // Cut the integer range [0, 64] at `patterns − 1` sorted points; the
    // gaps are the numerators.
    let mut cuts: Vec<u32> = (0..patterns - 1).map(|_| rng.gen_range(0..=64)).collect();
    cuts.sort_unstable();
    cuts.push(64);
    let mut prev = 0u32;
    cuts.iter()
        .map(|&c| {
            let k = c - prev;
            prev = c;
            BigRational::new(BigInt::from(k), BigInt::from(64))
        })
        .collect()
}

/// Reproducible random ±1 description of a cyclic system of rank `n`.
///
/// Marginal expectations have denominator 32 and correlations denominator
/// 64, with each correlation drawn inside its Fréchet interval
/// `|α + β| − 1 ≤ γ ≤ 1 − |α − β|` so the derived pmfs are valid.  With
/// `consistent` set, the two expectations of each content coincide across
/// its contexts, making the system consistently connected.
pub fn random_cyclic_spec(
    n: usize,
    seed: u64,
    consistent: bool,
) -> Result<CyclicSpec<BigRational>, CyclicError> {
    if n < 2 {
        return Err(CyclicError::RankTooSmall(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q32 = |a: i64| BigRational::new(BigInt::from(a), BigInt::from(32));
    let slots: Vec<(i64, i64)> = if consistent {
        let per_content: Vec<i64> = (0..n).map(|_| rng.gen_range(-32..=32)).collect();
        (0..n)
            .map(|i| (per_content[i], per_content[(i + 1) % n]))
            .collect()
    } else {
        (0..n)
            .map(|_| (rng.gen_range(-32..=32), rng.gen_range(-32..=32)))
            .collect()
    };
    let mut correlations = Vec::with_capacity(n);
    let mut marginals = Vec::with_capacity(n);
    for &(a, b) in &slots {
        // In 64ths: γ ∈ [2|a+b| − 64, 64 − 2|a−b|], never empty.
        let lo = 2 * (a + b).abs() - 64;
        let hi = 64 - 2 * (a - b).abs();
        let k = rng.gen_range(lo..=hi);
        correlations.push(BigRational::new(BigInt::from(k), BigInt::from(64)));
        marginals.push((q32(a), q32(b)));
    }
    CyclicSpec::new(correlations, marginals)
}

/// Decides noncontextuality by zero-pattern column elimination followed by
/// an exhaustive support search, entirely without the simplex.  Returns
/// true iff the system is noncontextual.
pub fn column_elimination_noncontextuality(
    system: &System<BigRational>,
) -> Result<bool, OracleError> {
    column_elimination_noncontextuality_with_budget(system, SUPPORT_SEARCH_BUDGET)
}

/// [`column_elimination_noncontextuality`] with an explicit search budget.
pub fn column_elimination_noncontextuality_with_budget(
    system: &System<BigRational>,
    budget: u64,
) -> Result<bool, OracleError> {
    let n_vars = system.format().n_vars();
    if n_vars > ORACLE_MAX_VARS {
        return Err(OracleError::SystemTooLarge(format!(
            "{n_vars} variables exceed the oracle cap of {ORACLE_MAX_VARS}"
        )));
    }
    let matrix = IncidenceMatrix::complete_with_cap(system.format(), ORACLE_MAX_VARS)?;
    let p = complete_vector(system).stacked();

    // Keep only rows with positive target mass; eliminate every column
    // that hits a zero-mass row.
    let kept_rows: Vec<usize> = (0..matrix.n_rows()).filter(|&i| !p[i].is_zero()).collect();
    let survivors: Vec<usize> = (0..matrix.n_cols())
        .filter(|&j| (0..matrix.n_rows()).all(|i| !p[i].is_zero() || !matrix.entry(i, j)))
        .collect();

    // Scale the kept target entries to integers.
    let mut denom_lcm = BigInt::one();
    for &i in &kept_rows {
        denom_lcm = denom_lcm.lcm(p[i].denom());
    }
    let target: Vec<i128> = kept_rows
        .iter()
        .map(|&i| {
            let scaled = p[i].numer() * &denom_lcm / p[i].denom();
            scaled.to_i128().ok_or_else(|| {
                OracleError::NumericOverflow("scaled target exceeds i128".into())
            })
        })
        .collect::<Result<_, _>>()?;
    let rationals: Vec<BigRational> = kept_rows.iter().map(|&i| p[i].clone()).collect();

    let n_rows = kept_rows.len();
    let words = n_rows.div_ceil(64);
    let col_masks: Vec<Vec<u64>> = survivors
        .iter()
        .map(|&j| {
            let mut mask = vec![0u64; words];
            for (r, &i) in kept_rows.iter().enumerate() {
                if matrix.entry(i, j) {
                    mask[r / 64] |= 1 << (r % 64);
                }
            }
            mask
        })
        .collect();

    let mut needed = vec![0u64; words];
    for r in 0..n_rows {
        needed[r / 64] |= 1 << (r % 64);
    }
    if n_rows == 0 {
        return Ok(true);
    }
    let mut reachable = vec![0u64; words];
    for mask in &col_masks {
        for w in 0..words {
            reachable[w] |= mask[w];
        }
    }
    if (0..words).any(|w| needed[w] & !reachable[w] != 0) {
        // Some positive-mass row is unreachable by any surviving column.
        return Ok(false);
    }

    let n_survivors = survivors.len();
    let mut search = SupportSearch {
        n_rows,
        col_masks,
        cols: survivors
            .iter()
            .map(|&j| {
                (0..n_rows)
                    .map(|r| i128::from(matrix.entry(kept_rows[r], j)))
                    .collect()
            })
            .collect(),
        target_rational: rationals,
        pivots: Vec::new(),
        covered: vec![0u64; words],
        needed,
        excluded: vec![false; n_survivors],
        reduced_target: vec![target],
        budget,
        steps: 0,
    };
    search.dfs()
}

struct Pivot {
    col: usize,
    lead: usize,
    vec: Vec<i128>,
    lead_val: i128,
}

enum Branch {
    /// Candidate columns for the next pivot.  Entries carry the reduced
    /// pivot when the picker already computed it.
    Candidates(Vec<(usize, Option<Pivot>)>),
    /// Some row can no longer be handled by any remaining column.
    Dead,
}

struct SupportSearch {
    n_rows: usize,
    col_masks: Vec<Vec<u64>>,
    /// Raw 0/1 columns over kept rows.
    cols: Vec<Vec<i128>>,
    target_rational: Vec<BigRational>,
    pivots: Vec<Pivot>,
    covered: Vec<u64>,
    needed: Vec<u64>,
    /// Columns barred from the current subtree (branch deduplication).
    excluded: Vec<bool>,
    /// Stack of the target vector reduced against the pivot prefix, scaled
    /// fraction-free (one entry per depth).
    reduced_target: Vec<Vec<i128>>,
    budget: u64,
    steps: u64,
}

impl SupportSearch {
    /// Depth-first search over independent supports.  A branch ends when
    /// the reduced target hits zero: the target is in the span of the
    /// chosen columns and the unique coefficients decide it outright.
    /// Otherwise branch on a row that still constrains the search: an
    /// uncovered positive-mass row, or a nonzero row of the reduced target
    /// (any feasible extension must include a column with a nonzero reduced
    /// entry there).  Each branch takes one candidate and bars the
    /// previously tried ones from its subtree, so no support is visited
    /// twice.
    fn dfs(&mut self) -> Result<bool, OracleError> {
        if self.target_reduced_to_zero() {
            return Ok(self.solve_current());
        }
        let candidates = match self.pick_branch()? {
            Branch::Dead => return Ok(false),
            Branch::Candidates(c) => c,
        };
        let mut newly_excluded = Vec::new();
        let mut found = false;
        for (j, ready) in candidates {
            self.tick()?;
            let pivot = match ready {
                Some(pivot) => Some(pivot),
                None => self.reduce_column(j)?,
            };
            if let Some(pivot) = pivot {
                self.push(pivot)?;
                found = self.dfs()?;
                self.pop();
                if found {
                    break;
                }
            }
            self.excluded[j] = true;
            newly_excluded.push(j);
        }
        for &k in &newly_excluded {
            self.excluded[k] = false;
        }
        Ok(found)
    }

    fn tick(&mut self) -> Result<(), OracleError> {
        self.steps += 1;
        if self.steps > self.budget {
            return Err(OracleError::OracleTooSlow { budget: self.budget });
        }
        Ok(())
    }

    fn hits(&self, col: usize, row: usize) -> bool {
        self.col_masks[col][row / 64] & (1 << (row % 64)) != 0
    }

    fn target_reduced_to_zero(&self) -> bool {
        self.reduced_target.last().unwrap().iter().all(|&v| v == 0)
    }

    /// Chooses the next row to branch on, preferring the one with the
    /// fewest candidate columns.  While some positive-mass row is
    /// uncovered, candidates are the unexcluded columns hitting it.  Once
    /// every row is covered, candidates for a nonzero row of the reduced
    /// target are the unexcluded columns whose reduction against the
    /// current pivot prefix is nonzero at that row; a support extending the
    /// prefix must contain one, or the target stays outside its span.
    fn pick_branch(&mut self) -> Result<Branch, OracleError> {
        let mut best: Option<(usize, usize)> = None;
        for row in 0..self.n_rows {
            let w = row / 64;
            let bit = 1u64 << (row % 64);
            if self.needed[w] & bit == 0 || self.covered[w] & bit != 0 {
                continue;
            }
            let count = (0..self.cols.len())
                .filter(|&j| !self.excluded[j] && self.hits(j, row))
                .count();
            if count == 0 {
                return Ok(Branch::Dead);
            }
            best = match best {
                Some((c, r)) if c <= count => Some((c, r)),
                _ => Some((count, row)),
            };
        }
        if let Some((_, row)) = best {
            return Ok(Branch::Candidates(
                (0..self.cols.len())
                    .filter(|&j| !self.excluded[j] && self.hits(j, row))
                    .map(|j| (j, None))
                    .collect(),
            ));
        }

        // Coverage is complete but the target is not yet spanned: reduce
        // every remaining column once and branch on the residual row with
        // the fewest columns able to clear it.
        let mut reduced: Vec<(usize, Pivot)> = Vec::new();
        for j in 0..self.cols.len() {
            if self.excluded[j] {
                continue;
            }
            self.tick()?;
            if let Some(pivot) = self.reduce_column(j)? {
                reduced.push((j, pivot));
            }
        }
        let residual = self.reduced_target.last().unwrap();
        let mut best: Option<(usize, usize)> = None;
        for (row, &t) in residual.iter().enumerate() {
            if t == 0 {
                continue;
            }
            let count = reduced.iter().filter(|(_, p)| p.vec[row] != 0).count();
            if count == 0 {
                return Ok(Branch::Dead);
            }
            best = match best {
                Some((c, r)) if c <= count => Some((c, r)),
                _ => Some((count, row)),
            };
        }
        let (_, row) = best.expect("reduced target has a nonzero row");
        Ok(Branch::Candidates(
            reduced
                .into_iter()
                .filter(|(_, p)| p.vec[row] != 0)
                .map(|(j, p)| (j, Some(p)))
                .collect(),
        ))
    }

    /// Reduces raw column `j` against the pivot stack (fraction-free);
    /// `None` when it is linearly dependent on the prefix.
    fn reduce_column(&self, j: usize) -> Result<Option<Pivot>, OracleError> {
        let mut v = self.cols[j].clone();
        let mut prev_lead = 1i128;
        for pivot in &self.pivots {
            reduce_step(&mut v, pivot, prev_lead)?;
            prev_lead = pivot.lead_val;
        }
        match v.iter().position(|&x| x != 0) {
            Some(lead) => {
                let lead_val = v[lead];
                Ok(Some(Pivot { col: j, lead, vec: v, lead_val }))
            }
            None => Ok(None),
        }
    }

    fn push(&mut self, pivot: Pivot) -> Result<(), OracleError> {
        let prev_lead = self.pivots.last().map_or(1, |p| p.lead_val);
        let mut t = self.reduced_target.last().unwrap().clone();
        reduce_step(&mut t, &pivot, prev_lead)?;
        self.reduced_target.push(t);
        for w in 0..self.covered.len() {
            self.covered[w] |= self.col_masks[pivot.col][w];
        }
        self.pivots.push(pivot);
        Ok(())
    }

    fn pop(&mut self) {
        self.pivots.pop().expect("pop matches push");
        self.reduced_target.pop();
        // Re-derive cover from the remaining stack; cheap at these sizes.
        for w in 0..self.covered.len() {
            self.covered[w] = 0;
        }
        for p in &self.pivots {
            for w in 0..self.covered.len() {
                self.covered[w] |= self.col_masks[p.col][w];
            }
        }
    }

    /// The target lies in the span of the current pivot columns; solve the
    /// square system exactly and accept iff all coefficients are ≥ 0.
    fn solve_current(&self) -> bool {
        match self.solve_integer() {
            Some(verdict) => verdict,
            // Entry growth escaped i128; decide with big rationals instead.
            None => self.solve_rational(),
        }
    }

    /// Fraction-free Gauss-Jordan sign test on the span system.  Entries
    /// stay integral throughout (each elimination step divides exactly by
    /// the previous pivot), so every coefficient's sign is read off from
    /// `pivot * x = rhs` without any rational arithmetic.  `None` means an
    /// intermediate value escaped `i128` and the caller must fall back.
    fn solve_integer(&self) -> Option<bool> {
        let k = self.pivots.len();
        let mut rows: Vec<Vec<i128>> = (0..self.n_rows)
            .map(|r| {
                let mut row: Vec<i128> =
                    self.pivots.iter().map(|p| self.cols[p.col][r]).collect();
                row.push(self.reduced_target[0][r]);
                row
            })
            .collect();
        let mut prev = 1i128;
        let mut pivot_row_of = vec![usize::MAX; k];
        let mut used = vec![false; self.n_rows];
        for col in 0..k {
            let pr = (0..self.n_rows).find(|&r| !used[r] && rows[r][col] != 0)?;
            used[pr] = true;
            pivot_row_of[col] = pr;
            let piv = rows[pr][col];
            for r in 0..self.n_rows {
                if r == pr {
                    continue;
                }
                let f = rows[r][col];
                for c in 0..=k {
                    let num = piv
                        .checked_mul(rows[r][c])?
                        .checked_sub(f.checked_mul(rows[pr][c])?)?;
                    if num % prev != 0 {
                        return None;
                    }
                    rows[r][c] = num / prev;
                }
            }
            prev = piv;
        }
        for (r, row) in rows.iter().enumerate() {
            if !used[r] && row[k] != 0 {
                return Some(false);
            }
        }
        Some((0..k).all(|col| {
            let row = &rows[pivot_row_of[col]];
            row[k] == 0 || (row[k] < 0) == (row[col] < 0)
        }))
    }

    /// Big-rational fallback for the span sign test, for targets whose
    /// scaled entries drive the fraction-free elimination past `i128`.
    fn solve_rational(&self) -> bool {
        let k = self.pivots.len();
        let mut rows: Vec<Vec<BigRational>> = (0..self.n_rows)
            .map(|r| {
                let mut row: Vec<BigRational> = self
                    .pivots
                    .iter()
                    .map(|p| BigRational::from(BigInt::from(self.cols[p.col][r])))
                    .collect();
                row.push(self.target_rational[r].clone());
                row
            })
            .collect();
        // Forward elimination with exact pivoting.
        let mut pivot_row_of = vec![usize::MAX; k];
        let mut next_row = 0;
        for col in 0..k {
            let Some(pr) = (next_row..self.n_rows).find(|&r| !rows[r][col].is_zero()) else {
                // Cannot happen for independent columns; treat as reject.
                return false;
            };
            rows.swap(next_row, pr);
            let inv = rows[next_row][col].recip();
            for x in rows[next_row].iter_mut() {
                *x = &*x * &inv;
            }
            for r in 0..self.n_rows {
                if r != next_row && !rows[r][col].is_zero() {
                    let factor = rows[r][col].clone();
                    for c in col..=k {
                        let delta = &factor * &rows[next_row][c];
                        rows[r][c] = &rows[r][c] - &delta;
                    }
                }
            }
            pivot_row_of[col] = next_row;
            next_row += 1;
        }
        // Residual rows must vanish and coefficients must be nonnegative.
        for r in next_row..self.n_rows {
            if !rows[r][k].is_zero() {
                return false;
            }
        }
        (0..k).all(|col| !rows[pivot_row_of[col]][k].is_negative())
    }
}

/// One fraction-free elimination step: clear `v`'s entry at the pivot's
/// lead row.  Exactness of the division is a Sylvester-identity invariant;
/// a nonzero remainder would be a logic error and is reported as overflow.
fn reduce_step(v: &mut [i128], pivot: &Pivot, prev_lead: i128) -> Result<(), OracleError> {
    let coeff = v[pivot.lead];
    if coeff == 0 && pivot.lead_val == 1 && prev_lead == 1 {
        return Ok(());
    }
    for (x, w) in v.iter_mut().zip(&pivot.vec) {
        let a = pivot
            .lead_val
            .checked_mul(*x)
            .ok_or_else(overflow)?;
        let b = coeff.checked_mul(*w).ok_or_else(overflow)?;
        let num = a.checked_sub(b).ok_or_else(overflow)?;
        if num % prev_lead != 0 {
            return Err(OracleError::NumericOverflow(
                "fraction-free division left a remainder".into(),
            ));
        }
        *x = num / prev_lead;
    }
    Ok(())
}

fn overflow() -> OracleError {
    OracleError::NumericOverflow("i128 overflow in fraction-free elimination".into())
}

/// Runs every measure in float and rational modes and reports the largest
/// absolute discrepancy; passes iff ≤ 1e-7 and the contextuality decisions
/// agree.
pub fn crosscheck_modes(system: &System<BigRational>) -> Result<CheckReport, OracleError> {
    const MODE_CAP: usize = 16;
    if system.format().n_vars() > MODE_CAP {
        return Err(OracleError::SystemTooLarge(format!(
            "{} variables exceed the cross-check cap of {MODE_CAP}",
            system.format().n_vars()
        )));
    }
    let opts = Options { max_vars: MODE_CAP };
    let float_sys = system.to_f64();
    let mut max_disc = 0.0f64;
    let mut disc = |exact: &BigRational, float: f64| {
        let e = Scalar::to_f64(exact);
        let d = (e - float).abs();
        if d > max_disc {
            max_disc = d;
        }
    };
    let contextual = measures::is_contextual(system, opts)?;
    let contextual_float = measures::is_contextual(&float_sys, opts)?;
    let mut decisions_agree = contextual == contextual_float;

    macro_rules! both {
        ($f:path) => {{
            let e = $f(system, opts)?;
            let f = $f(&float_sys, opts)?;
            disc(&e.value, f.value);
            decisions_agree &= e.contextual == f.contextual;
        }};
    }
    both!(measures::cnt1);
    both!(measures::cnt2);
    both!(measures::cnt3);
    both!(measures::cntf);
    if !contextual {
        let e = measures::ncnt2(system, opts)?;
        let f = measures::ncnt2(&float_sys, opts)?;
        disc(&e.value, f.value);
    }
    Ok(CheckReport {
        check: "mode-agreement".into(),
        systems: 1,
        max_discrepancy: max_disc,
        passed: decisions_agree && max_disc <= 1e-7,
    })
}
