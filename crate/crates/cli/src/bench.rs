//! Scaling benchmark: per-member group-key computation across group sizes,
//! for the totient-blinded protocol and the plain Diffie-Hellman baseline
//! on the identical tree.
//!
//! Wall times are hardware-dependent and reported without judgment; the
//! portable cost measure is the modular-exponentiation count per member,
//! which must equal the member's key-path internal-node count exactly.

use std::time::Instant;

use anyhow::{ensure, Result};
use keyfold_core::keytree::{Derivation, KeyTree};
use keyfold_core::modmath::{gen_secret_key, GroupParams, KeyMode, Natural};
use keyfold_core::rng::SplitMix64;
use keyfold_core::stats;

/// Wall-clock repetitions per member; the median is kept.
const REPS: usize = 5;

pub const VARIANT_LABELS: [&str; 2] = ["etf", "plain-dh-baseline"];

#[derive(Debug, Clone)]
pub struct BenchRow {
    pub group_size: usize,
    pub variant: &'static str,
    /// Mean over members of the median fold time.
    pub mean_fold_ns: u128,
    pub modexp_min: u64,
    pub modexp_max: u64,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub seed: u64,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    /// CSV with one row per (size, variant). Time columns are excluded from
    /// byte-stability expectations; everything else is deterministic per
    /// seed.
    pub fn render_csv(&self) -> String {
        let mut out = String::from("group_size,variant,mean_fold_ns,modexp_min,modexp_max\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                row.group_size, row.variant, row.mean_fold_ns, row.modexp_min, row.modexp_max
            ));
        }
        out
    }
}

pub fn default_sizes() -> Vec<usize> {
    (0..8).map(|i| 128 + 64 * i).collect()
}

fn bench_params() -> GroupParams {
    GroupParams::new(
        Natural::from(18446744073709551557u64),
        Natural::from(5u32),
    )
    .unwrap()
}

/// Grows a tree to `size` members by successive joins with seeded secrets.
fn grow_tree(params: &GroupParams, derivation: Derivation, size: usize, seed: u64) -> Result<KeyTree> {
    let mut stream = SplitMix64::new(seed);
    let mut tree = KeyTree::singleton(
        params.clone(),
        derivation,
        "m1".into(),
        gen_secret_key(params, stream.next_u64(), KeyMode::Prime),
    )?;
    for i in 2..=size {
        let secret = gen_secret_key(params, stream.next_u64(), KeyMode::Prime);
        let (next, _) = tree.join_full(format!("m{i}"), secret)?;
        tree = next;
    }
    Ok(tree)
}

/// Runs the benchmark. Sequential by design: the exponentiation counter is
/// process-global, and interleaved measurements would blur the per-member
/// deltas.
pub fn run_bench(sizes: &[usize], seed: u64) -> Result<BenchReport> {
    let params = bench_params();
    let mut rows = Vec::new();
    for &size in sizes {
        ensure!(size >= 2, "group sizes must be at least 2");
        for (vi, derivation) in [Derivation::Totient, Derivation::PlainDh].into_iter().enumerate() {
            let tree = grow_tree(&params, derivation, size, seed)?;
            let mut total_ns: u128 = 0;
            let mut modexp_min = u64::MAX;
            let mut modexp_max = 0u64;
            for (id, leaf) in tree.members().map(|(id, at)| (id.clone(), at)).collect::<Vec<_>>() {
                let mut view = tree.public_view();
                let secret = tree
                    .node(leaf)
                    .and_then(|n| n.secret.clone())
                    .expect("benchmark trees are full-knowledge");
                view.install_secret(leaf, secret)?;
                let internal_nodes = (tree.key_path(leaf)?.len() - 1) as u64;

                let before = stats::modexp_calls();
                view.compute_group_key(leaf, &[])?;
                let spent = stats::modexp_calls() - before;
                ensure!(
                    spent == internal_nodes,
                    "member {id}: {spent} exponentiations for {internal_nodes} internal path nodes"
                );
                modexp_min = modexp_min.min(spent);
                modexp_max = modexp_max.max(spent);

                let mut samples = [0u128; REPS];
                for sample in samples.iter_mut() {
                    let start = Instant::now();
                    std::hint::black_box(view.compute_group_key(leaf, &[])?);
                    *sample = start.elapsed().as_nanos();
                }
                samples.sort_unstable();
                total_ns += samples[REPS / 2];
            }
            rows.push(BenchRow {
                group_size: size,
                variant: VARIANT_LABELS[vi],
                mean_fold_ns: total_ns / size as u128,
                modexp_min,
                modexp_max,
            });
        }
    }
    Ok(BenchReport { seed, rows })
}
