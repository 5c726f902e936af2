//! Systems of dichotomous random variables.
//!
//! A [`SystemFormat`] records which contents are measured in which contexts;
//! a [`System`] attaches to every context a joint distribution (a *bunch*)
//! over the 0/1 values of the variables measured there.  Variables of the
//! same content in different contexts form a *connection*; connections carry
//! no joint distribution of their own, but every connection of dichotomous
//! variables has a unique *multimaximal coupling*, computed here in closed
//! form via a common threshold on one uniform random variable.
//!
//! Conventions, used consistently by every module:
//!
//! * The global variable order lists contexts in declaration order and,
//!   within a context, contents in the context's declared order.
//! * A joint-value *pattern* over an ordered variable list is indexed by the
//!   bitstring whose character `k` is the value of the `k`-th variable, read
//!   as a binary number (first variable = most significant bit).

use std::fmt;

use num::BigRational;
use thiserror::Error;

use crate::scalar::{sum, Scalar};

/// Errors raised by system construction and marginal queries.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum SystemError {
    #[error("duplicate identifier {0:?}")]
    DuplicateIdentifier(String),
    #[error("context {0:?} measures no contents")]
    EmptyContext(String),
    #[error("context {context:?} references unknown content {content:?}")]
    UnknownContent { context: String, content: String },
    #[error("content {0:?} is not measured in any context")]
    UnmeasuredContent(String),
    #[error("negative probability in context {context:?} at pattern {pattern}")]
    NegativeProbability { context: String, pattern: String },
    #[error("distribution of context {context:?} sums to {sum}, expected 1")]
    PmfNotNormalized { context: String, sum: String },
    #[error("subset {subset} is not contained in context {context:?}")]
    SubsetNotInContext { context: String, subset: String },
    #[error("context {context:?} does not measure content {content:?}")]
    ContextDoesNotMeasureContent { context: String, content: String },
    #[error("empty selection: {0}")]
    EmptySelection(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("system too large: {0}")]
    SystemTooLarge(String),
}

/// Value of variable `pos` (0-based) in the pattern `pattern` over `width`
/// variables; the first variable is the most significant bit.
pub fn pattern_bit(pattern: usize, pos: usize, width: usize) -> bool {
    debug_assert!(pos < width);
    (pattern >> (width - 1 - pos)) & 1 == 1
}

/// Bitstring label of a pattern, e.g. pattern 2 of width 3 is `"010"`.
pub fn pattern_string(pattern: usize, width: usize) -> String {
    (0..width)
        .map(|pos| if pattern_bit(pattern, pos, width) { '1' } else { '0' })
        .collect()
}

/// Content-context incidence structure of a system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemFormat {
    contents: Vec<String>,
    contexts: Vec<String>,
    /// Per context, the measured contents as indices into `contents`.
    incidence: Vec<Vec<usize>>,
    /// Per content, the measuring contexts in increasing context order.
    measuring: Vec<Vec<usize>>,
    /// Global index of the first variable of each context.
    var_offset: Vec<usize>,
    n_vars: usize,
}

impl SystemFormat {
    /// Builds a format from content names and `(context id, measured
    /// contents)` rows, validating the structural invariants.
    pub fn new(contents: &[&str], contexts: &[(&str, &[&str])]) -> Result<Self, SystemError> {
        let mut content_names = Vec::with_capacity(contents.len());
        for &name in contents {
            if content_names.iter().any(|n| n == name) {
                return Err(SystemError::DuplicateIdentifier(name.to_string()));
            }
            content_names.push(name.to_string());
        }
        let mut context_ids = Vec::with_capacity(contexts.len());
        let mut incidence = Vec::with_capacity(contexts.len());
        for &(id, measured) in contexts {
            if context_ids.iter().any(|n| n == id) || content_names.iter().any(|n| n == id) {
                return Err(SystemError::DuplicateIdentifier(id.to_string()));
            }
            if measured.is_empty() {
                return Err(SystemError::EmptyContext(id.to_string()));
            }
            let mut row = Vec::with_capacity(measured.len());
            for &name in measured {
                let q = content_names.iter().position(|n| n == name).ok_or_else(|| {
                    SystemError::UnknownContent {
                        context: id.to_string(),
                        content: name.to_string(),
                    }
                })?;
                if row.contains(&q) {
                    return Err(SystemError::DuplicateIdentifier(format!("{id}:{name}")));
                }
                row.push(q);
            }
            context_ids.push(id.to_string());
            incidence.push(row);
        }
        let mut measuring = vec![Vec::new(); content_names.len()];
        for (c, row) in incidence.iter().enumerate() {
            for &q in row {
                measuring[q].push(c);
            }
        }
        if let Some(q) = measuring.iter().position(|m| m.is_empty()) {
            return Err(SystemError::UnmeasuredContent(content_names[q].clone()));
        }
        let mut var_offset = Vec::with_capacity(incidence.len());
        let mut n_vars = 0;
        for row in &incidence {
            var_offset.push(n_vars);
            n_vars += row.len();
        }
        Ok(SystemFormat {
            contents: content_names,
            contexts: context_ids,
            incidence,
            measuring,
            var_offset,
            n_vars,
        })
    }

    pub fn n_contents(&self) -> usize {
        self.contents.len()
    }
    pub fn n_contexts(&self) -> usize {
        self.contexts.len()
    }
    /// Total number of variables `N`.
    pub fn n_vars(&self) -> usize {
        self.n_vars
    }
    pub fn content_name(&self, q: usize) -> &str {
        &self.contents[q]
    }
    pub fn context_id(&self, c: usize) -> &str {
        &self.contexts[c]
    }
    pub fn content_index(&self, name: &str) -> Option<usize> {
        self.contents.iter().position(|n| n == name)
    }
    pub fn context_index(&self, id: &str) -> Option<usize> {
        self.contexts.iter().position(|n| n == id)
    }
    /// Contents measured in context `c`, in the context's declared order.
    pub fn contents_of(&self, c: usize) -> &[usize] {
        &self.incidence[c]
    }
    /// Contexts measuring content `q`, in increasing context order.
    pub fn contexts_measuring(&self, q: usize) -> &[usize] {
        &self.measuring[q]
    }
    /// Position of content `q` in context `c`'s variable list.
    pub fn position_in_context(&self, c: usize, q: usize) -> Option<usize> {
        self.incidence[c].iter().position(|&x| x == q)
    }
    /// Global variable index of `R_q^c`.
    pub fn var_index(&self, c: usize, q: usize) -> Option<usize> {
        Some(self.var_offset[c] + self.position_in_context(c, q)?)
    }
    /// All variables as `(context, content)` pairs in global order.
    pub fn variables(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.incidence
            .iter()
            .enumerate()
            .flat_map(|(c, row)| row.iter().map(move |&q| (c, q)))
    }
}

/// A system: a format plus one bunch distribution per context.
#[derive(Debug, Clone, PartialEq)]
pub struct System<S> {
    format: SystemFormat,
    /// `bunches[c]` has length `2^{n_c}` in pattern order.
    bunches: Vec<Vec<S>>,
}

impl<S: Scalar> System<S> {
    /// Validates and wraps bunch distributions.  Exact mode requires each
    /// bunch to sum to 1 exactly; float mode tolerates `feas_tol`.
    pub fn new(format: SystemFormat, bunches: Vec<Vec<S>>) -> Result<Self, SystemError> {
        if bunches.len() != format.n_contexts() {
            return Err(SystemError::DimensionMismatch(format!(
                "{} bunches for {} contexts",
                bunches.len(),
                format.n_contexts()
            )));
        }
        for (c, bunch) in bunches.iter().enumerate() {
            let width = format.contents_of(c).len();
            if width >= usize::BITS as usize - 1 {
                return Err(SystemError::SystemTooLarge(format!(
                    "context {:?} measures {} contents",
                    format.context_id(c),
                    width
                )));
            }
            if bunch.len() != 1 << width {
                return Err(SystemError::DimensionMismatch(format!(
                    "context {:?} needs {} probabilities, got {}",
                    format.context_id(c),
                    1usize << width,
                    bunch.len()
                )));
            }
            for (pattern, p) in bunch.iter().enumerate() {
                if !p.is_finite() || p.sign() == std::cmp::Ordering::Less {
                    return Err(SystemError::NegativeProbability {
                        context: format.context_id(c).to_string(),
                        pattern: pattern_string(pattern, width),
                    });
                }
            }
            let total = sum(bunch);
            let deviation = total.sub_ref(&S::one()).abs_ref();
            if deviation > S::feas_tol() {
                return Err(SystemError::PmfNotNormalized {
                    context: format.context_id(c).to_string(),
                    sum: total.to_string(),
                });
            }
        }
        Ok(System { format, bunches })
    }

    pub fn format(&self) -> &SystemFormat {
        &self.format
    }
    /// Bunch distribution of context `c` in pattern order.
    pub fn bunch(&self, c: usize) -> &[S] {
        &self.bunches[c]
    }

    /// `Pr[R_q^c = v ∀ (q,v) set to 1]`: probability that every content in
    /// `subset` takes value 1 in context `c`.  The empty subset yields 1.
    pub fn bunch_marginal(&self, c: usize, subset: &[usize]) -> Result<S, SystemError> {
        let width = self.format.contents_of(c).len();
        let mut mask = 0usize;
        for &q in subset {
            let pos = self.format.position_in_context(c, q).ok_or_else(|| {
                SystemError::SubsetNotInContext {
                    context: self.format.context_id(c).to_string(),
                    subset: format!("{:?}", subset),
                }
            })?;
            mask |= 1 << (width - 1 - pos);
        }
        let mut acc = S::zero();
        for (pattern, p) in self.bunches[c].iter().enumerate() {
            if pattern & mask == mask {
                acc.add_assign_ref(p);
            }
        }
        Ok(acc)
    }

    /// `Pr[R_q^c = 1]`.
    pub fn one_marginal(&self, c: usize, q: usize) -> Result<S, SystemError> {
        if self.format.position_in_context(c, q).is_none() {
            return Err(SystemError::ContextDoesNotMeasureContent {
                context: self.format.context_id(c).to_string(),
                content: self.format.content_name(q).to_string(),
            });
        }
        self.bunch_marginal(c, &[q])
    }

    /// Probability that all selected variables of connection `q` equal 1
    /// under the multimaximal coupling: the minimum of their one-marginals.
    pub fn multimaximal_marginal(&self, q: usize, contexts: &[usize]) -> Result<S, SystemError> {
        if contexts.is_empty() {
            return Err(SystemError::EmptySelection(format!(
                "no contexts selected for content {:?}",
                self.format.content_name(q)
            )));
        }
        let mut best: Option<S> = None;
        for &c in contexts {
            let p = self.one_marginal(c, q)?;
            best = Some(match best {
                Some(b) if b <= p => b,
                _ => p,
            });
        }
        Ok(best.unwrap())
    }

    /// The full multimaximal coupling of connection `q`, over all contexts
    /// measuring `q`.
    ///
    /// Couple through a single uniform `U` on `[0,1]` and thresholds
    /// `T_c = [U < Pr[R_q^c = 1]]`: every pair is then equal with the largest
    /// probability its marginals allow, which characterizes the multimaximal
    /// coupling of a dichotomous connection.  The support has at most
    /// `m + 1` atoms for `m` contexts.
    pub fn multimaximal_distribution(&self, q: usize) -> Result<ConnectionCoupling<S>, SystemError> {
        let contexts = self.format.contexts_measuring(q).to_vec();
        let m = contexts.len();
        if m >= usize::BITS as usize - 1 {
            return Err(SystemError::SystemTooLarge(format!(
                "connection {:?} spans {} contexts",
                self.format.content_name(q),
                m
            )));
        }
        let mut one_marginals = Vec::with_capacity(m);
        for &c in &contexts {
            one_marginals.push(self.one_marginal(c, q)?);
        }

        // Positions sorted by decreasing marginal; as U rises past each
        // distinct marginal the corresponding threshold variable drops to 0.
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| {
            one_marginals[b]
                .partial_cmp(&one_marginals[a])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });

        let mut distribution: Vec<(usize, S)> = Vec::with_capacity(m + 1);
        let mut push = |pattern: usize, mass: S| {
            if mass.sign() == std::cmp::Ordering::Greater {
                distribution.push((pattern, mass));
            }
        };
        // Pattern with the top-k sorted positions equal to 1.
        let pattern_top = |k: usize| -> usize {
            let mut pat = 0usize;
            for &pos in order.iter().take(k) {
                pat |= 1 << (m - 1 - pos);
            }
            pat
        };
        push(pattern_top(m), one_marginals[order[m - 1]].clone());
        for k in 1..m {
            let mass = one_marginals[order[k - 1]].sub_ref(&one_marginals[order[k]]);
            push(pattern_top(k), mass);
        }
        push(0, S::one().sub_ref(&one_marginals[order[0]]));
        distribution.sort_by_key(|&(pattern, _)| pattern);

        let mut pair_marginals = Vec::with_capacity(m * (m - 1) / 2);
        for j1 in 0..m {
            for j2 in j1 + 1..m {
                let p = if one_marginals[j1] <= one_marginals[j2] {
                    one_marginals[j1].clone()
                } else {
                    one_marginals[j2].clone()
                };
                pair_marginals.push(((j1, j2), p));
            }
        }
        Ok(ConnectionCoupling {
            content: q,
            contexts,
            one_marginals,
            pair_marginals,
            distribution,
        })
    }

    /// True when every connection has equal one-marginals across contexts.
    pub fn is_consistently_connected(&self) -> bool {
        (0..self.format.n_contents()).all(|q| {
            let ctxs = self.format.contexts_measuring(q);
            let first = self.one_marginal(ctxs[0], q).expect("measuring context");
            ctxs[1..]
                .iter()
                .all(|&c| self.one_marginal(c, q).expect("measuring context") == first)
        })
    }

    /// The same system with every probability converted to `f64`.
    pub fn to_f64(&self) -> System<f64> {
        System {
            format: self.format.clone(),
            bunches: self
                .bunches
                .iter()
                .map(|b| b.iter().map(Scalar::to_f64).collect())
                .collect(),
        }
    }

    /// The same system in exact arithmetic.  Bunches are renormalized by
    /// their exact sum, so float bunches that sum to `1 ± ε` become exact
    /// distributions; exact input is returned unchanged.
    pub fn to_exact(&self) -> System<BigRational> {
        let bunches = self
            .bunches
            .iter()
            .map(|bunch| {
                let exact: Vec<BigRational> = bunch
                    .iter()
                    .map(|p| p.to_exact().expect("validated bunch entry is finite"))
                    .collect();
                let total = sum(&exact);
                if Scalar::is_zero(&total) || total == Scalar::one() {
                    exact
                } else {
                    exact.iter().map(|p| p / &total).collect()
                }
            })
            .collect();
        System {
            format: self.format.clone(),
            bunches,
        }
    }
}

/// Multimaximal coupling of one connection.
///
/// `pair_marginals` and `distribution` index contexts by their position in
/// `contexts`; distribution patterns follow the crate-wide bit convention.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionCoupling<S> {
    pub content: usize,
    pub contexts: Vec<usize>,
    pub one_marginals: Vec<S>,
    /// `((j1, j2), Pr[T_{j1} = T_{j2} = 1])` for `j1 < j2`.
    pub pair_marginals: Vec<((usize, usize), S)>,
    /// Sparse pmf `(pattern, mass)` sorted by pattern; zero atoms omitted.
    pub distribution: Vec<(usize, S)>,
}

impl<S: Scalar> ConnectionCoupling<S> {
    /// `Pr[T_{j1} = T_{j2}]`, which equals `1 - |p_{j1} - p_{j2}|` under the
    /// multimaximal coupling.
    pub fn equality_probability(&self, j1: usize, j2: usize) -> S {
        let m = self.contexts.len();
        let mut acc = S::zero();
        for (pattern, mass) in &self.distribution {
            if pattern_bit(*pattern, j1, m) == pattern_bit(*pattern, j2, m) {
                acc.add_assign_ref(mass);
            }
        }
        acc
    }
}

impl<S: fmt::Display> fmt::Display for System<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (c, bunch) in self.bunches.iter().enumerate() {
            let names: Vec<&str> = self
                .format
                .contents_of(c)
                .iter()
                .map(|&q| self.format.content_name(q))
                .collect();
            writeln!(f, "{} [{}]:", self.format.context_id(c), names.join(", "))?;
            let width = self.format.contents_of(c).len();
            for (pattern, p) in bunch.iter().enumerate() {
                writeln!(f, "  {} {}", pattern_string(pattern, width), p)?;
            }
        }
        Ok(())
    }
}
