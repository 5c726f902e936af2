//! Cyclic systems of dichotomous variables.
//!
//! A cyclic system of rank `n` has contents `q1..qn` and contexts
//! `c1..cn`, where context `ci` measures the pair `(qi, q(i+1))` (indices
//! wrapping).  Such systems are conventionally described in ±1 terms by
//! the expectations `⟨R_i^i⟩`, `⟨R_{i+1}^i⟩`, and `⟨R_i^i R_{i+1}^i⟩`;
//! this module converts those to 0/1 bunch distributions via
//!
//! ```text
//! Pr[a, b] = (1 + a·⟨A⟩ + b·⟨B⟩ + ab·⟨AB⟩) / 4,   a, b ∈ {−1, +1},
//! ```
//!
//! and provides the closed-form CNT1 for cyclic systems, which on this
//! class coincides with CNT2.

use thiserror::Error;

use crate::scalar::Scalar;
use crate::system::{System, SystemError, SystemFormat};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CyclicError {
    #[error("cyclic rank must be at least 2, got {0}")]
    RankTooSmall(usize),
    #[error("expected {expected} values for {what}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("expectations produce a negative probability in context {context}: Pr[{pattern}] = {value}")]
    InvalidExpectations {
        context: usize,
        pattern: String,
        value: String,
    },
    #[error(transparent)]
    System(#[from] SystemError),
}

/// ±1 description of a cyclic system of rank `n`.
///
/// `correlations[i]` is `⟨R_i^i R_{i+1}^i⟩`; `marginals[i]` holds the pair
/// `(⟨R_i^i⟩, ⟨R_{i+1}^i⟩)` measured in context `ci`.  All expectations
/// must lie in `[−1, 1]` and every derived probability must be
/// nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct CyclicSpec<S> {
    pub correlations: Vec<S>,
    pub marginals: Vec<(S, S)>,
}

impl<S: Scalar> CyclicSpec<S> {
    pub fn new(correlations: Vec<S>, marginals: Vec<(S, S)>) -> Result<Self, CyclicError> {
        let n = correlations.len();
        if n < 2 {
            return Err(CyclicError::RankTooSmall(n));
        }
        if marginals.len() != n {
            return Err(CyclicError::DimensionMismatch {
                what: "marginals",
                expected: n,
                got: marginals.len(),
            });
        }
        Ok(CyclicSpec { correlations, marginals })
    }

    /// Rank of the system.
    pub fn rank(&self) -> usize {
        self.correlations.len()
    }

    /// Consistently connected variant: all marginal expectations zero.
    pub fn with_zero_marginals(correlations: Vec<S>) -> Result<Self, CyclicError> {
        let n = correlations.len();
        let zero = || (S::zero(), S::zero());
        Self::new(correlations, (0..n).map(|_| zero()).collect())
    }
}

/// The format of a rank-`n` cyclic system.
pub fn cyclic_format(n: usize) -> Result<SystemFormat, CyclicError> {
    if n < 2 {
        return Err(CyclicError::RankTooSmall(n));
    }
    let contents: Vec<String> = (1..=n).map(|i| format!("q{i}")).collect();
    let context_ids: Vec<String> = (1..=n).map(|i| format!("c{i}")).collect();
    let content_refs: Vec<&str> = contents.iter().map(String::as_str).collect();
    let pairs: Vec<Vec<&str>> = (0..n)
        .map(|i| vec![content_refs[i], content_refs[(i + 1) % n]])
        .collect();
    let contexts: Vec<(&str, &[&str])> = context_ids
        .iter()
        .zip(&pairs)
        .map(|(id, pair)| (id.as_str(), pair.as_slice()))
        .collect();
    Ok(SystemFormat::new(&content_refs, &contexts)?)
}

/// Builds the 0/1 system for a ±1 cyclic description.
pub fn make_cyclic<S: Scalar>(spec: &CyclicSpec<S>) -> Result<System<S>, CyclicError> {
    let n = spec.rank();
    let format = cyclic_format(n)?;
    let quarter = S::ratio(1, 4);
    let mut bunches = Vec::with_capacity(n);
    for i in 0..n {
        let (ea, eb) = &spec.marginals[i];
        let eab = &spec.correlations[i];
        // Patterns in block order 00, 01, 10, 11 where the first character
        // is the value of q_i and the second of q_{i+1}; outcome 1 maps to
        // +1 and outcome 0 to −1.
        let mut pmf = Vec::with_capacity(4);
        for pattern in 0..4u8 {
            let a = if pattern & 0b10 != 0 { S::one() } else { S::one().neg_ref() };
            let b = if pattern & 0b01 != 0 { S::one() } else { S::one().neg_ref() };
            let mut p = S::one();
            p.add_assign_ref(&a.mul_ref(ea));
            p.add_assign_ref(&b.mul_ref(eb));
            p.add_assign_ref(&a.mul_ref(&b).mul_ref(eab));
            let p = p.mul_ref(&quarter);
            if p.sign() == std::cmp::Ordering::Less && (S::EXACT || p.to_f64() < -1e-12) {
                return Err(CyclicError::InvalidExpectations {
                    context: i,
                    pattern: format!("{}{}", (pattern >> 1) & 1, pattern & 1),
                    value: format!("{p}"),
                });
            }
            pmf.push(if p.sign() == std::cmp::Ordering::Less { S::zero() } else { p });
        }
        bunches.push(pmf);
    }
    Ok(System::new(format, bunches)?)
}

/// Expectations of a cyclic system, back in ±1 terms: per context
/// `(⟨R_i^i⟩, ⟨R_{i+1}^i⟩, ⟨R_i^i R_{i+1}^i⟩)`.
pub fn expectations<S: Scalar>(system: &System<S>) -> Result<Vec<(S, S, S)>, SystemError> {
    let n = system.format().n_contexts();
    let mut out = Vec::with_capacity(n);
    for c in 0..n {
        if system.format().contents_of(c).len() != 2 {
            return Err(SystemError::DimensionMismatch(format!(
                "context {} measures {} contents, expected a pair",
                system.format().context_id(c),
                system.format().contents_of(c).len()
            )));
        }
        let b = system.bunch(c);
        // ⟨A⟩ = 2·Pr[A=1] − 1 and ⟨AB⟩ = 1 − 2·Pr[A≠B].
        let two = S::from_int(2);
        let pa = b[2].add_ref(&b[3]);
        let pb = b[1].add_ref(&b[3]);
        let disagree = b[1].add_ref(&b[2]);
        out.push((
            two.mul_ref(&pa).sub_ref(&S::one()),
            two.mul_ref(&pb).sub_ref(&S::one()),
            S::one().sub_ref(&two.mul_ref(&disagree)),
        ));
    }
    Ok(out)
}

/// Maximum of `Σ ι_i·a_i` over sign vectors `ι ∈ {−1,+1}^n` with an odd
/// number of `−1` entries.
///
/// Equals `Σ|a_i|` when some `a_i` is zero or an odd number are negative,
/// and `Σ|a_i| − 2·min|a_i|` otherwise.
pub fn odd_parity_max<S: Scalar>(values: &[S]) -> S {
    let mut total = S::zero();
    let mut negatives = 0usize;
    let mut any_zero = false;
    let mut min_abs: Option<S> = None;
    for v in values {
        let a = v.abs_ref();
        match v.sign() {
            std::cmp::Ordering::Less => negatives += 1,
            std::cmp::Ordering::Equal => any_zero = true,
            std::cmp::Ordering::Greater => {}
        }
        min_abs = Some(match min_abs {
            Some(m) if m <= a => m,
            _ => a.clone(),
        });
        total.add_assign_ref(&a);
    }
    if any_zero || negatives % 2 == 1 {
        total
    } else {
        total.sub_ref(&S::from_int(2).mul_ref(&min_abs.expect("nonempty")))
    }
}

/// Closed-form CNT1 of a cyclic system described in ±1 terms:
///
/// ```text
/// cnt1 = (1/4)·[ s_odd(⟨R_i^i R_{i+1}^i⟩) − n + 2 − Σ|⟨R_i^i⟩ − ⟨R_i^{i−1}⟩| ]
/// ```
///
/// where `s_odd` is [`odd_parity_max`] and the last sum ranges over
/// contents (the two expectations of content `q_i` in the two contexts
/// that measure it).  The result can be negative, in which case the
/// system is noncontextual; on cyclic systems `max(cnt1, 0)` equals CNT2.
pub fn cnt1_closed_form<S: Scalar>(spec: &CyclicSpec<S>) -> S {
    let n = spec.rank();
    let s_odd = odd_parity_max(&spec.correlations);
    let mut inconsistency = S::zero();
    for i in 0..n {
        // Content q_{i+1} is measured first in context c_i and again in
        // context c_{i+1}.
        let in_prev = &spec.marginals[i].1;
        let in_own = &spec.marginals[(i + 1) % n].0;
        inconsistency.add_assign_ref(&in_own.sub_ref(in_prev).abs_ref());
    }
    let mut bracket = s_odd;
    bracket.sub_assign_ref(&S::from_int(n as i64));
    bracket.add_assign_ref(&S::from_int(2));
    bracket.sub_assign_ref(&inconsistency);
    bracket.mul_ref(&S::ratio(1, 4))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::BigRational;

    fn q(n: i64, d: i64) -> BigRational {
        <BigRational as Scalar>::ratio(n, d)
    }

    fn qs(values: &[(i64, i64)]) -> Vec<BigRational> {
        values.iter().map(|&(n, d)| q(n, d)).collect()
    }

    #[test]
    fn format_wiring() {
        let f = cyclic_format(3).unwrap();
        assert_eq!(f.n_contents(), 3);
        assert_eq!(f.n_contexts(), 3);
        assert_eq!(f.contents_of(2), &[2, 0]);
        assert!(cyclic_format(1).is_err());
    }

    #[test]
    fn pr_box_distributions() {
        let spec = CyclicSpec::with_zero_marginals(qs(&[(1, 1), (1, 1), (1, 1), (-1, 1)])).unwrap();
        let sys = make_cyclic(&spec).unwrap();
        assert_eq!(sys.bunch(0), &[q(1, 2), q(0, 1), q(0, 1), q(1, 2)][..]);
        assert_eq!(sys.bunch(3), &[q(0, 1), q(1, 2), q(1, 2), q(0, 1)][..]);
        assert!(sys.is_consistently_connected());
    }

    #[test]
    fn expectation_round_trip() {
        let spec = CyclicSpec::new(
            qs(&[(1, 2), (-1, 4), (3, 8)]),
            vec![
                (q(1, 4), q(-1, 8)),
                (q(-1, 8), q(1, 2)),
                (q(1, 2), q(1, 4)),
            ],
        )
        .unwrap();
        let sys = make_cyclic(&spec).unwrap();
        let exps = expectations(&sys).unwrap();
        for (i, (ea, eb, eab)) in exps.iter().enumerate() {
            assert_eq!(*ea, spec.marginals[i].0, "context {i}");
            assert_eq!(*eb, spec.marginals[i].1, "context {i}");
            assert_eq!(*eab, spec.correlations[i], "context {i}");
        }
    }

    #[test]
    fn rejects_incompatible_expectations() {
        // Perfect correlation with opposite marginals is impossible.
        let spec = CyclicSpec::new(
            qs(&[(1, 1), (0, 1)]),
            vec![(q(1, 1), q(-1, 1)), (q(0, 1), q(0, 1))],
        )
        .unwrap();
        assert!(matches!(
            make_cyclic(&spec),
            Err(CyclicError::InvalidExpectations { context: 0, .. })
        ));
    }

    #[test]
    fn spec_validation() {
        assert!(matches!(
            CyclicSpec::new(qs(&[(1, 2)]), vec![(q(0, 1), q(0, 1))]),
            Err(CyclicError::RankTooSmall(1))
        ));
        assert!(matches!(
            CyclicSpec::new(qs(&[(1, 2), (1, 2)]), vec![(q(0, 1), q(0, 1))]),
            Err(CyclicError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn odd_parity_max_matches_brute_force() {
        let cases: Vec<Vec<BigRational>> = vec![
            qs(&[(1, 1), (1, 1), (1, 1), (-1, 1)]),
            qs(&[(1, 1), (1, 1), (1, 1), (1, 1)]),
            qs(&[(1, 2), (-1, 4), (3, 8)]),
            qs(&[(0, 1), (1, 2)]),
            qs(&[(-1, 2), (-1, 4), (-1, 8), (-1, 16), (1, 32)]),
            qs(&[(2, 3), (1, 3)]),
        ];
        for values in cases {
            let n = values.len();
            let mut best: Option<BigRational> = None;
            for mask in 0..1u32 << n {
                if mask.count_ones() % 2 != 1 {
                    continue;
                }
                let mut total = q(0, 1);
                for (i, v) in values.iter().enumerate() {
                    if mask & (1 << i) != 0 {
                        total.sub_assign_ref(v);
                    } else {
                        total.add_assign_ref(v);
                    }
                }
                best = Some(match best {
                    Some(b) if b >= total => b,
                    _ => total,
                });
            }
            assert_eq!(odd_parity_max(&values), best.unwrap(), "values {values:?}");
        }
    }

    #[test]
    fn closed_form_on_landmark_systems() {
        // PR box: s_odd = 4, n = 4, consistent: (4 − 4 + 2 − 0)/4 = 1/2.
        let pr = CyclicSpec::with_zero_marginals(qs(&[(1, 1), (1, 1), (1, 1), (-1, 1)])).unwrap();
        assert_eq!(cnt1_closed_form(&pr), q(1, 2));

        // Fully correlated rank 4: even negatives, s_odd = 2: (2 − 2)/4 = 0.
        let flat = CyclicSpec::with_zero_marginals(qs(&[(1, 1); 4])).unwrap();
        assert_eq!(cnt1_closed_form(&flat), q(0, 1));

        // Correlation/anticorrelation at rank 2: (2 − 2 + 2)/4 = 1/2.
        let ca = CyclicSpec::with_zero_marginals(qs(&[(1, 1), (-1, 1)])).unwrap();
        assert_eq!(cnt1_closed_form(&ca), q(1, 2));

        // Strongly noncontextual example: negative closed form.
        // s_odd(1/4, 1/4, 1/4) = 1/4, so the bracket is 1/4 − 3 + 2.
        let weak = CyclicSpec::with_zero_marginals(qs(&[(1, 4), (1, 4), (1, 4)])).unwrap();
        assert_eq!(cnt1_closed_form(&weak), q(-3, 16));
    }

    #[test]
    fn closed_form_matches_lp_on_sample_specs() {
        use crate::measures::{cnt1, cnt2, Options};
        let samples = vec![
            CyclicSpec::with_zero_marginals(qs(&[(1, 1), (1, 1), (1, 1), (-1, 1)])).unwrap(),
            CyclicSpec::with_zero_marginals(qs(&[(1, 1), (-1, 1)])).unwrap(),
            CyclicSpec::with_zero_marginals(qs(&[(3, 4), (-1, 2), (1, 4)])).unwrap(),
            CyclicSpec::new(
                qs(&[(1, 2), (-1, 4), (3, 8)]),
                vec![
                    (q(1, 4), q(-1, 8)),
                    (q(-1, 8), q(1, 2)),
                    (q(1, 2), q(1, 4)),
                ],
            )
            .unwrap(),
        ];
        for spec in samples {
            let sys = make_cyclic(&spec).unwrap();
            let closed = cnt1_closed_form(&spec);
            let zero = q(0, 1);
            let clamped = if closed < zero { zero } else { closed };
            let lp1 = cnt1(&sys, Options::default()).unwrap().value;
            let lp2 = cnt2(&sys, Options::default()).unwrap().value;
            assert_eq!(lp1, clamped, "closed form vs LP, rank {}", spec.rank());
            assert_eq!(lp1, lp2, "cyclic identity, rank {}", spec.rank());
        }
    }
}
