//! Cross-module invariants on randomly generated systems: multimaximal
//! coupling laws, incidence-vector consistency, and measure range and
//! witness properties that no single module can check alone.

use cbd::cyclic::cyclic_format;
use cbd::measures::{self, Options};
use cbd::oracle::{overlap4_format, random_system, single_format};
use cbd::scalar::Scalar;
use cbd::space::{complete_vector, reduced_vector, IncidenceMatrix, RowLabel};
use cbd::system::{pattern_bit, System};
use cbd::BigRational;

fn q(numerator: i64, denominator: i64) -> BigRational {
    <BigRational as Scalar>::ratio(numerator, denominator)
}

fn one() -> BigRational {
    <BigRational as Scalar>::one()
}

fn zero() -> BigRational {
    <BigRational as Scalar>::zero()
}

/// A spread of formats: single contexts, the smallest cyclic ranks, and a
/// four-content format whose first content sits in four contexts.
fn sample_systems() -> Vec<System<BigRational>> {
    let formats = [
        single_format(2).expect("small"),
        single_format(3).expect("small"),
        cyclic_format(2).expect("small"),
        cyclic_format(3).expect("small"),
        overlap4_format(),
    ];
    let mut out = Vec::new();
    for (format_index, format) in formats.iter().enumerate() {
        for i in 0..8u64 {
            out.push(random_system(format, 300 * (format_index as u64 + 1) + i));
        }
    }
    out
}

#[test]
fn multimaximal_pair_marginals_dominate_feasible_couplings() {
    for system in &sample_systems() {
        let format = system.format();
        for content in 0..format.n_contents() {
            let contexts = format.contexts_measuring(content).to_vec();
            if contexts.len() < 2 {
                continue;
            }
            for (a, &ca) in contexts.iter().enumerate() {
                for &cb in &contexts[a + 1..] {
                    let p1 = system.one_marginal(ca, content).expect("measured");
                    let p2 = system.one_marginal(cb, content).expect("measured");
                    let joint = system
                        .multimaximal_marginal(content, &[ca, cb])
                        .expect("measured");
                    let lower = {
                        let s = p1.clone() + p2.clone() - one();
                        if s > zero() {
                            s
                        } else {
                            zero()
                        }
                    };
                    let upper = if p1 < p2 { p1.clone() } else { p2.clone() };
                    assert_eq!(
                        joint, upper,
                        "multimaximal 2-marginal must sit at the upper bound"
                    );
                    for step in 0..=6 {
                        let alternative = lower.clone()
                            + (upper.clone() - lower.clone()) * q(step, 6);
                        assert!(
                            alternative <= joint,
                            "a feasible coupling of the same one-marginals beat \
                             the multimaximal 2-marginal"
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn multimaximal_distribution_marginalizes_on_all_subsets() {
    let mut exercised = 0usize;
    for system in &sample_systems() {
        let format = system.format();
        for content in 0..format.n_contents() {
            let contexts = format.contexts_measuring(content).to_vec();
            let m = contexts.len();
            if !(2..=4).contains(&m) {
                continue;
            }
            let coupling = system.multimaximal_distribution(content).expect("measured");
            assert_eq!(coupling.contexts, contexts);
            for subset in 1..(1usize << m) {
                let chosen: Vec<usize> = (0..m)
                    .filter(|j| subset >> j & 1 == 1)
                    .map(|j| contexts[j])
                    .collect();
                let expected = system
                    .multimaximal_marginal(content, &chosen)
                    .expect("measured");
                let mut acc = zero();
                for (pattern, mass) in &coupling.distribution {
                    let all_ones = (0..m)
                        .filter(|j| subset >> j & 1 == 1)
                        .all(|j| pattern_bit(*pattern, j, m));
                    if all_ones {
                        acc = acc + mass.clone();
                    }
                }
                assert_eq!(acc, expected, "subset {subset:b} of content {content}");
                exercised += 1;
            }
        }
    }
    assert!(exercised > 0, "no multi-context connection was exercised");
}

#[test]
fn bunch_marginals_are_antitone_under_inclusion() {
    for system in &sample_systems() {
        let format = system.format();
        for c in 0..format.n_contexts() {
            let contents = format.contents_of(c).to_vec();
            let k = contents.len();
            for small_mask in 0..(1usize << k) {
                for large_mask in 0..(1usize << k) {
                    if small_mask & large_mask != small_mask {
                        continue;
                    }
                    let pick = |mask: usize| -> Vec<usize> {
                        (0..k)
                            .filter(|i| mask >> i & 1 == 1)
                            .map(|i| contents[i])
                            .collect()
                    };
                    let small = system.bunch_marginal(c, &pick(small_mask)).expect("in c");
                    let large = system.bunch_marginal(c, &pick(large_mask)).expect("in c");
                    assert!(
                        small >= large,
                        "marginal grew under inclusion in context {c}"
                    );
                }
            }
        }
    }
}

#[test]
fn equality_probability_complements_the_marginal_gap() {
    for system in &sample_systems() {
        let format = system.format();
        for content in 0..format.n_contents() {
            if format.contexts_measuring(content).len() < 2 {
                continue;
            }
            let coupling = system.multimaximal_distribution(content).expect("measured");
            let m = coupling.contexts.len();
            for j1 in 0..m {
                for j2 in (j1 + 1)..m {
                    let p1 = coupling.one_marginals[j1].clone();
                    let p2 = coupling.one_marginals[j2].clone();
                    let gap = if p1 >= p2 {
                        p1.clone() - p2.clone()
                    } else {
                        p2.clone() - p1.clone()
                    };
                    assert_eq!(
                        coupling.equality_probability(j1, j2),
                        one() - gap,
                        "content {content}, positions {j1},{j2}"
                    );
                }
            }
        }
    }
}

#[test]
fn complete_blocks_marginalize_to_reduced_entries() {
    for system in &sample_systems() {
        let format = system.format();
        let reduced = IncidenceMatrix::reduced(format).expect("within caps");
        let reduced_entries = reduced_vector(system).stacked();
        let complete = complete_vector(system);
        let stacked = complete.stacked();

        let block_sum = |range: std::ops::Range<usize>, positions: &[usize], width: usize| {
            let mut acc = zero();
            for (pattern, index) in range.enumerate() {
                if positions.iter().all(|&pos| pattern_bit(pattern, pos, width)) {
                    acc = acc + stacked[index].clone();
                }
            }
            acc
        };

        for (i, row) in reduced.rows().iter().enumerate() {
            let recomputed = match &row.label {
                RowLabel::Unit => one(),
                RowLabel::OneMarginal { context, content } => {
                    let width = format.contents_of(*context).len();
                    let pos = format
                        .position_in_context(*context, *content)
                        .expect("measured");
                    block_sum(complete.context_block(*context), &[pos], width)
                }
                RowLabel::BunchMarginal { context, contents } => {
                    let width = format.contents_of(*context).len();
                    let positions: Vec<usize> = contents
                        .iter()
                        .map(|&content| {
                            format
                                .position_in_context(*context, content)
                                .expect("measured")
                        })
                        .collect();
                    block_sum(complete.context_block(*context), &positions, width)
                }
                RowLabel::ConnectionPair { content, contexts } => {
                    let measuring = format.contexts_measuring(*content);
                    let width = measuring.len();
                    let block = complete
                        .connection_blocks()
                        .iter()
                        .find(|(q, _)| q == content)
                        .expect("multi-context content")
                        .1
                        .clone();
                    let positions: Vec<usize> = [contexts.0, contexts.1]
                        .iter()
                        .map(|c| measuring.iter().position(|x| x == c).expect("measures q"))
                        .collect();
                    block_sum(block, &positions, width)
                }
                other => panic!("unexpected reduced row label {other:?}"),
            };
            assert_eq!(
                recomputed, reduced_entries[i],
                "row {i} ({:?}) disagrees with the complete blocks",
                row.label
            );
        }
    }
}

#[test]
fn ncnt2_is_bounded_by_and_attained_at_displacements() {
    let opts = Options::default();
    let mut exercised = 0usize;
    for system in &sample_systems() {
        if system.format().n_vars() > 6 {
            continue;
        }
        if measures::is_contextual(system, opts).expect("within caps") {
            continue;
        }
        let report = measures::ncnt2(system, opts).expect("noncontextual");
        let displacements = report
            .witness
            .displacements
            .as_ref()
            .expect("ncnt2 reports displacements");
        let mut least: Option<BigRational> = None;
        for d in displacements {
            assert!(report.value <= d.plus, "value exceeds an upward bound");
            assert!(report.value <= d.minus, "value exceeds a downward bound");
            for bound in [&d.plus, &d.minus] {
                if least.as_ref().is_none_or(|cur| bound < cur) {
                    least = Some(bound.clone());
                }
            }
        }
        assert_eq!(
            report.value,
            least.expect("at least one displacement"),
            "ncnt2 not attained by any single coordinate"
        );
        exercised += 1;
    }
    assert!(exercised >= 5, "too few noncontextual samples: {exercised}");
}

#[test]
fn cntf_lies_in_the_unit_interval() {
    let opts = Options::default();
    for system in &sample_systems() {
        let report = measures::cntf(system, opts).expect("within caps");
        assert!(report.value >= zero(), "cntf negative");
        assert!(report.value <= one(), "cntf above one");
    }
}
