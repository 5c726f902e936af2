//! The space of deterministic couplings: incidence matrices and the
//! probability vectors a system induces over them.
//!
//! A deterministic coupling assigns a fixed 0/1 value to each of the `N`
//! variables of a format.  Column `j` of every matrix built here encodes the
//! assignment in which global variable `i` takes the value of bit `i` of `j`
//! (variable 0 = least significant bit).  Any probability distribution over
//! the columns is a coupling of the system's variables; the matrices below
//! map such a distribution to the marginal probabilities the system itself
//! prescribes.
//!
//! Two matrix kinds exist:
//!
//! * *reduced*: rows are events "all variables of this set equal 1" — the
//!   constant event, one-marginals, within-context subsets of size ≥ 2, and
//!   within-connection context pairs;
//! * *complete*: rows are full value patterns, one block of `2^{n_c}` rows
//!   per context and one block of `2^{m_q}` rows per connection spanning at
//!   least two contexts.
//!
//! Row orders are frozen (see the builder docs); [`ReducedVector`] and
//! [`CompleteVector`] use exactly the same orders, so matrix row `i` always
//! pairs with vector entry `i`.

use std::ops::Range;

use crate::scalar::Scalar;
use crate::system::{pattern_bit, System, SystemError, SystemFormat};

/// Default cap on the number of variables; `2^N` columns are materialized.
pub const DEFAULT_MAX_VARS: usize = 24;

/// Bijection between deterministic couplings and column indices.
#[derive(Debug, Clone)]
pub struct OutcomeIndexing {
    n_vars: usize,
}

impl OutcomeIndexing {
    pub fn new(format: &SystemFormat, max_vars: usize) -> Result<Self, SystemError> {
        let n = format.n_vars();
        if n > max_vars || n >= usize::BITS as usize - 1 {
            return Err(SystemError::SystemTooLarge(format!(
                "{n} variables exceed the cap of {max_vars}"
            )));
        }
        Ok(OutcomeIndexing { n_vars: n })
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }
    pub fn column_count(&self) -> usize {
        1 << self.n_vars
    }
    /// Value of global variable `var` in the assignment of column `j`.
    pub fn value(&self, j: usize, var: usize) -> bool {
        debug_assert!(var < self.n_vars);
        (j >> var) & 1 == 1
    }
    pub fn column_of(&self, assignment: &[bool]) -> usize {
        debug_assert_eq!(assignment.len(), self.n_vars);
        assignment
            .iter()
            .enumerate()
            .fold(0, |acc, (i, &v)| acc | ((v as usize) << i))
    }
    pub fn assignment(&self, j: usize) -> Vec<bool> {
        (0..self.n_vars).map(|i| self.value(j, i)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    Reduced,
    Complete,
}

/// What a matrix row measures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowLabel {
    /// The certain event; first reduced row.
    Unit,
    OneMarginal { context: usize, content: usize },
    /// `contents` sorted ascending, size ≥ 2.
    BunchMarginal { context: usize, contents: Vec<usize> },
    /// Both variables of the connection pair equal 1.
    ConnectionPair { content: usize, contexts: (usize, usize) },
    /// Full value pattern of one context's variables.
    BunchPattern { context: usize, pattern: usize },
    /// Full value pattern of one connection's variables.
    ConnectionPattern { content: usize, pattern: usize },
}

/// One row: the event's variables and, for complete rows, their required
/// values (reduced rows require all ones).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventRow {
    /// Global variable indices; reduced rows keep them sorted ascending,
    /// complete rows keep block order (declared content / context order).
    pub vars: Vec<usize>,
    /// Required values aligned with `vars`; `None` means all ones.
    pub values: Option<Vec<bool>>,
    pub label: RowLabel,
}

/// Boolean incidence matrix over all deterministic couplings of a format.
#[derive(Debug, Clone)]
pub struct IncidenceMatrix {
    kind: MatrixKind,
    indexing: OutcomeIndexing,
    rows: Vec<EventRow>,
    /// Dense row storage, 64 columns per word.
    words: Vec<Vec<u64>>,
    /// `(mask, want)` per row: entry `(i, j)` is `j & mask == want`.
    tests: Vec<(usize, usize)>,
    low: Range<usize>,
    bunch: Range<usize>,
    conn: Range<usize>,
    context_blocks: Vec<Range<usize>>,
    /// `(content, rows)` for contents measured in ≥ 2 contexts.
    connection_blocks: Vec<(usize, Range<usize>)>,
}

impl IncidenceMatrix {
    /// Reduced matrix `M = (M_l; M_b; M_c)` of a format.
    ///
    /// Row order: the all-ones unit row; one-marginals in global variable
    /// order; per context (declared order) the subsets of its contents of
    /// size ≥ 2, ordered by size then lexicographically by sorted content
    /// indices; per content (declared order) the measuring-context pairs in
    /// lexicographic order.
    pub fn reduced(format: &SystemFormat) -> Result<Self, SystemError> {
        Self::reduced_with_cap(format, DEFAULT_MAX_VARS)
    }

    pub fn reduced_with_cap(format: &SystemFormat, max_vars: usize) -> Result<Self, SystemError> {
        let indexing = OutcomeIndexing::new(format, max_vars)?;
        let mut builder = Builder::new(MatrixKind::Reduced, indexing);

        builder.push(Vec::new(), None, RowLabel::Unit);
        for (c, q) in format.variables() {
            let var = format.var_index(c, q).expect("variable exists");
            builder.push(vec![var], None, RowLabel::OneMarginal { context: c, content: q });
        }
        let low = 0..builder.len();

        for c in 0..format.n_contexts() {
            let mut contents = format.contents_of(c).to_vec();
            contents.sort_unstable();
            for subset in subsets_min_size(&contents, 2) {
                let vars: Vec<usize> = subset
                    .iter()
                    .map(|&q| format.var_index(c, q).expect("content in context"))
                    .collect();
                let mut vars = vars;
                vars.sort_unstable();
                builder.push(
                    vars,
                    None,
                    RowLabel::BunchMarginal { context: c, contents: subset },
                );
            }
        }
        let bunch = low.end..builder.len();

        for q in 0..format.n_contents() {
            let ctxs = format.contexts_measuring(q);
            for i in 0..ctxs.len() {
                for j in i + 1..ctxs.len() {
                    let vars = vec![
                        format.var_index(ctxs[i], q).expect("measuring"),
                        format.var_index(ctxs[j], q).expect("measuring"),
                    ];
                    builder.push(
                        vars,
                        None,
                        RowLabel::ConnectionPair { content: q, contexts: (ctxs[i], ctxs[j]) },
                    );
                }
            }
        }
        let conn = bunch.end..builder.len();

        Ok(builder.finish(low, bunch, conn, Vec::new(), Vec::new()))
    }

    /// Complete matrix `M(·)` of a format.
    ///
    /// Row order: per context in declared order, the `2^{n_c}` value
    /// patterns in pattern order; then per content in declared order (only
    /// contents measured in ≥ 2 contexts), the `2^{m_q}` patterns of its
    /// connection in pattern order over measuring contexts.
    pub fn complete(format: &SystemFormat) -> Result<Self, SystemError> {
        Self::complete_with_cap(format, DEFAULT_MAX_VARS)
    }

    pub fn complete_with_cap(format: &SystemFormat, max_vars: usize) -> Result<Self, SystemError> {
        let indexing = OutcomeIndexing::new(format, max_vars)?;
        let mut builder = Builder::new(MatrixKind::Complete, indexing);

        let mut context_blocks = Vec::with_capacity(format.n_contexts());
        for c in 0..format.n_contexts() {
            let start = builder.len();
            let vars: Vec<usize> = format
                .contents_of(c)
                .iter()
                .map(|&q| format.var_index(c, q).expect("content in context"))
                .collect();
            let width = vars.len();
            for pattern in 0..1usize << width {
                let values = (0..width).map(|pos| pattern_bit(pattern, pos, width)).collect();
                builder.push(
                    vars.clone(),
                    Some(values),
                    RowLabel::BunchPattern { context: c, pattern },
                );
            }
            context_blocks.push(start..builder.len());
        }

        let mut connection_blocks = Vec::new();
        for q in 0..format.n_contents() {
            let ctxs = format.contexts_measuring(q);
            if ctxs.len() < 2 {
                continue;
            }
            let start = builder.len();
            let vars: Vec<usize> = ctxs
                .iter()
                .map(|&c| format.var_index(c, q).expect("measuring"))
                .collect();
            let width = vars.len();
            for pattern in 0..1usize << width {
                let values = (0..width).map(|pos| pattern_bit(pattern, pos, width)).collect();
                builder.push(
                    vars.clone(),
                    Some(values),
                    RowLabel::ConnectionPattern { content: q, pattern },
                );
            }
            connection_blocks.push((q, start..builder.len()));
        }

        let end = builder.len();
        Ok(builder.finish(0..0, 0..0, end..end, context_blocks, connection_blocks))
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }
    pub fn indexing(&self) -> &OutcomeIndexing {
        &self.indexing
    }
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }
    pub fn n_cols(&self) -> usize {
        self.indexing.column_count()
    }
    pub fn rows(&self) -> &[EventRow] {
        &self.rows
    }

    pub fn entry(&self, row: usize, col: usize) -> bool {
        (self.words[row][col >> 6] >> (col & 63)) & 1 == 1
    }

    /// Indices of the rows with a 1 in column `col`.
    pub fn column_rows(&self, col: usize) -> Vec<usize> {
        self.tests
            .iter()
            .enumerate()
            .filter(|(_, &(mask, want))| col & mask == want)
            .map(|(i, _)| i)
            .collect()
    }

    /// Reduced kind: unit row plus one-marginal rows (`M_l`).
    pub fn low_rows(&self) -> Range<usize> {
        self.low.clone()
    }
    /// Reduced kind: within-context subset rows (`M_b`).
    pub fn bunch_rows(&self) -> Range<usize> {
        self.bunch.clone()
    }
    /// Reduced kind: connection pair rows (`M_c`).
    pub fn connection_rows(&self) -> Range<usize> {
        self.conn.clone()
    }
    /// Complete kind: rows of context `c`'s block.
    pub fn context_block(&self, c: usize) -> Range<usize> {
        self.context_blocks[c].clone()
    }
    /// Complete kind: `(content, rows)` per multi-context connection.
    pub fn connection_blocks(&self) -> &[(usize, Range<usize>)] {
        &self.connection_blocks
    }
}

struct Builder {
    kind: MatrixKind,
    indexing: OutcomeIndexing,
    rows: Vec<EventRow>,
    words: Vec<Vec<u64>>,
    tests: Vec<(usize, usize)>,
}

impl Builder {
    fn new(kind: MatrixKind, indexing: OutcomeIndexing) -> Self {
        Builder { kind, indexing, rows: Vec::new(), words: Vec::new(), tests: Vec::new() }
    }

    fn len(&self) -> usize {
        self.rows.len()
    }

    fn push(&mut self, vars: Vec<usize>, values: Option<Vec<bool>>, label: RowLabel) {
        let mask: usize = vars.iter().map(|&v| 1usize << v).sum();
        let want = match &values {
            None => mask,
            Some(vals) => vars
                .iter()
                .zip(vals)
                .filter(|(_, &v)| v)
                .map(|(&var, _)| 1usize << var)
                .sum(),
        };
        let n_cols = self.indexing.column_count();
        let mut bits = vec![0u64; n_cols.div_ceil(64)];
        for j in 0..n_cols {
            if j & mask == want {
                bits[j >> 6] |= 1 << (j & 63);
            }
        }
        self.rows.push(EventRow { vars, values, label });
        self.words.push(bits);
        self.tests.push((mask, want));
    }

    fn finish(
        self,
        low: Range<usize>,
        bunch: Range<usize>,
        conn: Range<usize>,
        context_blocks: Vec<Range<usize>>,
        connection_blocks: Vec<(usize, Range<usize>)>,
    ) -> IncidenceMatrix {
        IncidenceMatrix {
            kind: self.kind,
            indexing: self.indexing,
            rows: self.rows,
            words: self.words,
            tests: self.tests,
            low,
            bunch,
            conn,
            context_blocks,
            connection_blocks,
        }
    }
}

/// Subsets of `items` with at least `min_size` elements, ordered by size
/// then lexicographically by member sequence.  `items` must be sorted.
pub(crate) fn subsets_min_size(items: &[usize], min_size: usize) -> Vec<Vec<usize>> {
    let n = items.len();
    let mut out = Vec::new();
    for size in min_size..=n {
        let mut picks: Vec<usize> = (0..size).collect();
        loop {
            out.push(picks.iter().map(|&i| items[i]).collect());
            // Advance to the next combination of positions.
            let mut k = size;
            loop {
                if k == 0 {
                    break;
                }
                k -= 1;
                if picks[k] != k + n - size {
                    picks[k] += 1;
                    for j in k + 1..size {
                        picks[j] = picks[j - 1] + 1;
                    }
                    break;
                }
                if k == 0 {
                    picks.clear();
                    break;
                }
            }
            if picks.is_empty() {
                break;
            }
        }
    }
    out
}

/// Reduced probability vector `p = (p_l, p_b, p_c)` of a system, in the
/// exact row order of [`IncidenceMatrix::reduced`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedVector<S> {
    /// `1` followed by the `N` one-marginals in global variable order.
    pub low: Vec<S>,
    /// Within-context subset marginals, size ≥ 2.
    pub bunch: Vec<S>,
    /// Multimaximal 2-marginals per connection context pair.
    pub conn: Vec<S>,
}

impl<S: Scalar> ReducedVector<S> {
    pub fn len(&self) -> usize {
        self.low.len() + self.bunch.len() + self.conn.len()
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// All entries in matrix row order.
    pub fn stacked(&self) -> Vec<S> {
        let mut out = Vec::with_capacity(self.len());
        out.extend(self.low.iter().cloned());
        out.extend(self.bunch.iter().cloned());
        out.extend(self.conn.iter().cloned());
        out
    }
}

/// Builds the reduced vector of a system.
pub fn reduced_vector<S: Scalar>(system: &System<S>) -> ReducedVector<S> {
    let format = system.format();
    let mut low = Vec::with_capacity(1 + format.n_vars());
    low.push(S::one());
    for (c, q) in format.variables() {
        low.push(system.one_marginal(c, q).expect("variable of format"));
    }
    let mut bunch = Vec::new();
    for c in 0..format.n_contexts() {
        let mut contents = format.contents_of(c).to_vec();
        contents.sort_unstable();
        for subset in subsets_min_size(&contents, 2) {
            bunch.push(system.bunch_marginal(c, &subset).expect("subset of context"));
        }
    }
    let mut conn = Vec::new();
    for q in 0..format.n_contents() {
        let ctxs = format.contexts_measuring(q);
        for i in 0..ctxs.len() {
            for j in i + 1..ctxs.len() {
                conn.push(
                    system
                        .multimaximal_marginal(q, &[ctxs[i], ctxs[j]])
                        .expect("measuring contexts"),
                );
            }
        }
    }
    ReducedVector { low, bunch, conn }
}

/// Complete probability vector `p(·)` of a system, in the exact row order
/// of [`IncidenceMatrix::complete`].
#[derive(Debug, Clone, PartialEq)]
pub struct CompleteVector<S> {
    /// Concatenated bunch pmfs, one `2^{n_c}` block per context.
    pub bunch: Vec<S>,
    /// Concatenated multimaximal connection pmfs, one `2^{m_q}` block per
    /// content measured in ≥ 2 contexts.
    pub conn: Vec<S>,
    context_blocks: Vec<Range<usize>>,
    connection_blocks: Vec<(usize, Range<usize>)>,
}

impl<S: Scalar> CompleteVector<S> {
    pub fn len(&self) -> usize {
        self.bunch.len() + self.conn.len()
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn stacked(&self) -> Vec<S> {
        let mut out = Vec::with_capacity(self.len());
        out.extend(self.bunch.iter().cloned());
        out.extend(self.conn.iter().cloned());
        out
    }
    /// Rows of context `c`'s block in stacked coordinates.
    pub fn context_block(&self, c: usize) -> Range<usize> {
        self.context_blocks[c].clone()
    }
    /// `(content, rows)` per multi-context connection, stacked coordinates.
    pub fn connection_blocks(&self) -> &[(usize, Range<usize>)] {
        &self.connection_blocks
    }
}

/// Builds the complete vector of a system.
pub fn complete_vector<S: Scalar>(system: &System<S>) -> CompleteVector<S> {
    let format = system.format();
    let mut bunch = Vec::new();
    let mut context_blocks = Vec::with_capacity(format.n_contexts());
    for c in 0..format.n_contexts() {
        let start = bunch.len();
        bunch.extend(system.bunch(c).iter().cloned());
        context_blocks.push(start..bunch.len());
    }
    let mut conn = Vec::new();
    let mut connection_blocks = Vec::new();
    for q in 0..format.n_contents() {
        let ctxs = format.contexts_measuring(q);
        if ctxs.len() < 2 {
            continue;
        }
        let coupling = system.multimaximal_distribution(q).expect("measured content");
        let start = conn.len();
        let width = ctxs.len();
        let mut dense = vec![S::zero(); 1 << width];
        for (pattern, mass) in &coupling.distribution {
            dense[*pattern] = mass.clone();
        }
        conn.extend(dense);
        let offset = bunch.len();
        connection_blocks.push((q, offset + start..offset + conn.len()));
    }
    CompleteVector { bunch, conn, context_blocks, connection_blocks }
}
