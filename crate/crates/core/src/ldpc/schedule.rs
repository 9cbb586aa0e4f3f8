//! Pseudo-tree encoding schedules (encoding stopping sets).
//!
//! An encoding stopping set turns the Tanner graph into a leveled schedule:
//! information bits sit at the leaves, and each scheduled parity bit is
//! determined by one check node whose other neighbors are already known at
//! that level. When the peeling stalls, an undetermined bit is promoted to
//! *reevaluated* status: it is assumed zero during the first encoding pass
//! and solved afterwards from the *key check nodes*, the checks left over by
//! the schedule. One key check per reevaluated bit remains, and the linear
//! system tying them together must be invertible over GF(2) for the second
//! pass to succeed.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::matrix::TannerGraph;
use super::LdpcError;

/// Budget on promotion backtracking during construction.
const MAX_CONSTRUCTION_ATTEMPTS: usize = 4096;

/// One scheduled parity derivation: `parity_bit` is the XOR of `inputs`,
/// forced by check node `check`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParityStep {
    pub parity_bit: usize,
    pub check: usize,
    pub inputs: Vec<usize>,
}

/// A complete two-pass encoding schedule for one parity-check matrix.
#[derive(Debug, Clone)]
pub struct EncodingStoppingSet {
    n: usize,
    m: usize,
    info_bits: Vec<usize>,
    reevaluated_bits: Vec<usize>,
    levels: Vec<Vec<ParityStep>>,
    key_checks: Vec<usize>,
    key_check_inputs: Vec<Vec<usize>>,
    /// Row i: mask over reevaluated bits that key check i depends on.
    dependence: Vec<u64>,
    /// Inverse of `dependence`, used to solve the reevaluated bits.
    solver: Vec<u64>,
    transmit_order: Vec<usize>,
    max_bit_degree: usize,
}

impl EncodingStoppingSet {
    /// Information-bit labels, ascending.
    pub fn info_bits(&self) -> &[usize] {
        &self.info_bits
    }

    /// Reevaluated-bit labels, in promotion order.
    pub fn reevaluated_bits(&self) -> &[usize] {
        &self.reevaluated_bits
    }

    /// Key check nodes, ascending; one per reevaluated bit.
    pub fn key_checks(&self) -> &[usize] {
        &self.key_checks
    }

    pub fn levels(&self) -> &[Vec<ParityStep>] {
        &self.levels
    }

    /// Scheduled parity bits in evaluation order.
    pub fn parity_bits(&self) -> Vec<usize> {
        self.levels
            .iter()
            .flat_map(|level| level.iter().map(|s| s.parity_bit))
            .collect()
    }

    /// Wire permutation: info bits, then reevaluated bits, then parity bits
    /// in schedule order.
    pub fn transmit_order(&self) -> &[usize] {
        &self.transmit_order
    }

    pub fn num_bits(&self) -> usize {
        self.n
    }

    pub fn num_checks(&self) -> usize {
        self.m
    }

    pub fn info_len(&self) -> usize {
        self.info_bits.len()
    }

    pub fn max_bit_degree(&self) -> usize {
        self.max_bit_degree
    }

    pub(super) fn key_check_inputs(&self) -> &[Vec<usize>] {
        &self.key_check_inputs
    }

    /// The reevaluation system: row i is the mask of reevaluated bits that
    /// key check i depends on. Invertible over GF(2) by construction.
    pub fn reevaluation_system(&self) -> &[u64] {
        &self.dependence
    }

    pub(super) fn solver_rows(&self) -> &[u64] {
        &self.solver
    }
}

/// Builds the encoding stopping set for a Tanner graph.
///
/// Derived bits (scheduled parity and reevaluated bits) are restricted to
/// bit nodes of degree at most `max_bit_degree`; columns above the bound can
/// only carry information bits. Construction is deterministic: dependent
/// (derivable) columns are chosen by elimination in ascending-degree,
/// descending-index order, peeling claims checks in ascending index order,
/// and stalls promote the lowest-index undetermined bit first, backtracking
/// if the reevaluation system degenerates.
pub fn build_stopping_set(
    graph: &TannerGraph,
    max_bit_degree: usize,
) -> Result<EncodingStoppingSet, LdpcError> {
    let n = graph.num_bits();
    let m = graph.num_checks();
    let eligible: Vec<usize> = (0..n)
        .filter(|&b| graph.bit_degree(b) <= max_bit_degree)
        .collect();

    // Pick the m derivable columns by elimination over the eligible set.
    let mut order = eligible.clone();
    order.sort_unstable_by_key(|&b| (graph.bit_degree(b), usize::MAX - b));
    let derived_pool = match pivot_columns(graph, &order) {
        Some(pool) => pool,
        None => {
            let reason = if pivot_columns(graph, &(0..n).collect::<Vec<_>>()).is_none() {
                String::from("check rows are linearly dependent")
            } else {
                format!("no information set leaves all derived bits within degree {max_bit_degree}")
            };
            return Err(LdpcError::ConstructionFailed(reason));
        }
    };
    let mut is_derived = alloc::vec![false; n];
    for &b in &derived_pool {
        is_derived[b] = true;
    }
    let info_bits: Vec<usize> = (0..n).filter(|&b| !is_derived[b]).collect();

    let mut determined = alloc::vec![false; n];
    for &b in &info_bits {
        determined[b] = true;
    }
    let mut attempts = MAX_CONSTRUCTION_ATTEMPTS;
    let state = PeelState {
        determined,
        used_checks: alloc::vec![false; m],
        levels: Vec::new(),
        reevaluated: Vec::new(),
    };
    let done = peel(graph, state, &mut attempts).ok_or_else(|| {
        LdpcError::ConstructionFailed(String::from(
            "no well-founded schedule with an invertible reevaluation system",
        ))
    })?;

    let key_checks: Vec<usize> = (0..m).filter(|&c| !done.state.used_checks[c]).collect();
    debug_assert_eq!(key_checks.len(), done.state.reevaluated.len());
    let key_check_inputs: Vec<Vec<usize>> = key_checks
        .iter()
        .map(|&c| graph.check_bits(c).to_vec())
        .collect();

    let mut transmit_order = info_bits.clone();
    transmit_order.extend(&done.state.reevaluated);
    for level in &done.state.levels {
        transmit_order.extend(level.iter().map(|s| s.parity_bit));
    }
    debug_assert_eq!(transmit_order.len(), n);

    Ok(EncodingStoppingSet {
        n,
        m,
        info_bits,
        reevaluated_bits: done.state.reevaluated,
        levels: done.state.levels,
        key_checks,
        key_check_inputs,
        dependence: done.dependence,
        solver: done.solver,
        transmit_order,
        max_bit_degree,
    })
}

/// Greedy elimination taking pivot candidates in `order`; returns the m
/// pivot columns (ascending) or None if they run out.
fn pivot_columns(graph: &TannerGraph, order: &[usize]) -> Option<Vec<usize>> {
    let m = graph.num_checks();
    let words = graph.num_bits().div_ceil(64);
    let mut rows: Vec<Vec<u64>> = (0..m)
        .map(|c| {
            let mut row = alloc::vec![0u64; words];
            for &b in graph.check_bits(c) {
                row[b / 64] |= 1 << (b % 64);
            }
            row
        })
        .collect();
    let mut pivots = Vec::new();
    for &col in order {
        let rank = pivots.len();
        let (w, bit) = (col / 64, col % 64);
        let Some(found) = (rank..m).find(|&i| (rows[i][w] >> bit) & 1 == 1) else {
            continue;
        };
        rows.swap(rank, found);
        let pivot_row = rows[rank].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i != rank && (row[w] >> bit) & 1 == 1 {
                for (x, y) in row.iter_mut().zip(pivot_row.iter()) {
                    *x ^= *y;
                }
            }
        }
        pivots.push(col);
        if pivots.len() == m {
            break;
        }
    }
    if pivots.len() == m {
        pivots.sort_unstable();
        Some(pivots)
    } else {
        None
    }
}

#[derive(Clone)]
struct PeelState {
    determined: Vec<bool>,
    used_checks: Vec<bool>,
    levels: Vec<Vec<ParityStep>>,
    reevaluated: Vec<usize>,
}

struct PeelDone {
    state: PeelState,
    dependence: Vec<u64>,
    solver: Vec<u64>,
}

/// Peels checks with exactly one undetermined neighbor into levels; when
/// stuck, tries promoting each undetermined bit (lowest index first) to
/// reevaluated status, backtracking on failure.
fn peel(graph: &TannerGraph, mut state: PeelState, attempts: &mut usize) -> Option<PeelDone> {
    let n = graph.num_bits();
    let m = graph.num_checks();
    loop {
        let mut level: Vec<ParityStep> = Vec::new();
        let mut newly = alloc::vec![false; n];
        for check in 0..m {
            if state.used_checks[check] {
                continue;
            }
            let undetermined: Vec<usize> = graph
                .check_bits(check)
                .iter()
                .copied()
                .filter(|&b| !state.determined[b] && !newly[b])
                .collect();
            if let [bit] = undetermined[..] {
                let inputs = graph
                    .check_bits(check)
                    .iter()
                    .copied()
                    .filter(|&b| b != bit)
                    .collect();
                level.push(ParityStep {
                    parity_bit: bit,
                    check,
                    inputs,
                });
                newly[bit] = true;
                state.used_checks[check] = true;
            }
        }
        if !level.is_empty() {
            for step in &level {
                state.determined[step.parity_bit] = true;
            }
            state.levels.push(level);
            continue;
        }
        if state.determined.iter().all(|&d| d) {
            return finish(graph, state);
        }
        // Stuck: promote one undetermined bit and recurse.
        let candidates: Vec<usize> = (0..n).filter(|&b| !state.determined[b]).collect();
        for candidate in candidates {
            if *attempts == 0 {
                return None;
            }
            *attempts -= 1;
            let mut branch = state.clone();
            branch.determined[candidate] = true;
            branch.reevaluated.push(candidate);
            if let Some(done) = peel(graph, branch, attempts) {
                return Some(done);
            }
        }
        return None;
    }
}

/// Validates a fully peeled state: the leftover checks must tie the
/// reevaluated bits into an invertible system.
fn finish(graph: &TannerGraph, state: PeelState) -> Option<PeelDone> {
    let n = graph.num_bits();
    let m = graph.num_checks();
    let r = state.reevaluated.len();
    if r > 64 {
        return None;
    }
    let key_checks: Vec<usize> = (0..m).filter(|&c| !state.used_checks[c]).collect();
    if key_checks.len() != r {
        return None;
    }
    // Dependence of every bit on the reevaluated bits, folded through the
    // schedule.
    let mut dep = alloc::vec![0u64; n];
    for (i, &b) in state.reevaluated.iter().enumerate() {
        dep[b] = 1 << i;
    }
    for level in &state.levels {
        for step in level {
            let mask = step.inputs.iter().fold(0u64, |acc, &b| acc ^ dep[b]);
            dep[step.parity_bit] = mask;
        }
    }
    let dependence: Vec<u64> = key_checks
        .iter()
        .map(|&c| graph.check_bits(c).iter().fold(0u64, |acc, &b| acc ^ dep[b]))
        .collect();
    let solver = invert_gf2(&dependence)?;
    Some(PeelDone {
        state,
        dependence,
        solver,
    })
}

/// Inverts an r x r GF(2) matrix given as row masks; None when singular.
fn invert_gf2(rows: &[u64]) -> Option<Vec<u64>> {
    let r = rows.len();
    let mut work: Vec<(u64, u64)> = rows
        .iter()
        .enumerate()
        .map(|(i, &row)| (row, 1u64 << i))
        .collect();
    for col in 0..r {
        let pivot = (col..r).find(|&i| (work[i].0 >> col) & 1 == 1)?;
        work.swap(col, pivot);
        let (prow, pinv) = work[col];
        for (i, entry) in work.iter_mut().enumerate() {
            if i != col && (entry.0 >> col) & 1 == 1 {
                entry.0 ^= prow;
                entry.1 ^= pinv;
            }
        }
    }
    Some(work.into_iter().map(|(_, inv)| inv).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ldpc::matrix::ParityCheckMatrix;

    #[test]
    fn builtin_schedule_structure() {
        let h = ParityCheckMatrix::builtin_8x16();
        let g = TannerGraph::from_matrix(&h);
        let s = build_stopping_set(&g, 3).unwrap();
        assert_eq!(s.info_bits(), &[0, 1, 2, 3, 4, 8, 10, 13]);
        assert_eq!(s.reevaluated_bits(), &[7, 9]);
        assert_eq!(s.key_checks(), &[1, 3]);
        assert_eq!(s.parity_bits(), alloc::vec![6, 5, 14, 11, 15, 12]);
        assert_eq!(s.levels().len(), 3);
        assert_eq!(
            s.transmit_order(),
            &[0, 1, 2, 3, 4, 8, 10, 13, 7, 9, 6, 5, 14, 11, 15, 12]
        );
        // On this matrix the reevaluation system happens to be diagonal, so
        // solving it degenerates to copying the key check values.
        assert_eq!(s.reevaluation_system(), &[0b01, 0b10]);
        // The two degree-4 columns can only be information bits.
        assert!(s.info_bits().contains(&10));
        assert!(s.info_bits().contains(&13));
        // Every derived bit honors the degree bound.
        for &b in s.reevaluated_bits() {
            assert!(g.bit_degree(b) <= 3);
        }
        for &b in &s.parity_bits() {
            assert!(g.bit_degree(b) <= 3);
        }
        // Schedule is well-founded: every step's inputs are info bits,
        // reevaluated bits, or parity bits evaluated by an earlier step.
        let mut known: alloc::vec::Vec<usize> = s.info_bits().to_vec();
        known.extend(s.reevaluated_bits());
        for level in s.levels() {
            for step in level {
                for input in &step.inputs {
                    assert!(known.contains(input), "step {step:?} input {input}");
                }
                known.push(step.parity_bit);
            }
        }
    }

    #[test]
    fn repetition_code_schedule() {
        let h = ParityCheckMatrix::parse_dense("1 2\n1 1\n").unwrap();
        let g = TannerGraph::from_matrix(&h);
        let s = build_stopping_set(&g, 1).unwrap();
        assert_eq!(s.info_len(), 1);
        assert_eq!(s.parity_bits().len(), 1);
        assert!(s.reevaluated_bits().is_empty());
        assert!(s.key_checks().is_empty());
    }

    #[test]
    fn degree_bound_can_make_construction_fail() {
        let h = ParityCheckMatrix::builtin_8x16();
        let g = TannerGraph::from_matrix(&h);
        let err = build_stopping_set(&g, 1).unwrap_err();
        assert!(matches!(err, LdpcError::ConstructionFailed(_)), "{err}");
        // Raising the bound rescues it.
        assert!(build_stopping_set(&g, 3).is_ok());
    }

    #[test]
    fn dependent_rows_are_rejected() {
        let h = ParityCheckMatrix::from_rows(&[
            alloc::vec![1, 1, 0, 0, 1],
            alloc::vec![0, 1, 1, 0, 1],
            alloc::vec![1, 0, 1, 0, 0],
            alloc::vec![0, 0, 0, 1, 1],
        ])
        .unwrap();
        let g = TannerGraph::from_matrix(&h);
        let err = build_stopping_set(&g, 5).unwrap_err();
        match err {
            LdpcError::ConstructionFailed(reason) => {
                assert!(reason.contains("dependent"), "{reason}")
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn gf2_inversion() {
        // Identity.
        assert_eq!(invert_gf2(&[1, 2]), Some(alloc::vec![1, 2]));
        // [[1,1],[0,1]] is its own inverse.
        assert_eq!(invert_gf2(&[0b11, 0b10]), Some(alloc::vec![0b11, 0b10]));
        // Singular.
        assert_eq!(invert_gf2(&[0b11, 0b11]), None);
        assert_eq!(invert_gf2(&[]), Some(alloc::vec![]));
    }
}
