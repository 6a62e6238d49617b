//! Scan benchmark harness: ADC vs tree vs forest on one dataset.
//!
//! Every timed method must first reproduce the ADC oracle on the same data;
//! a divergence aborts the run. Timing covers the scan only — distance
//! tables are shared by all methods and built outside the clock.

use std::fmt::Write as _;
use std::time::Instant;

use crate::codebook::Codebook;
use crate::dataset::EncodedDataset;
use crate::eforest::{EncodingForest, ForestConfig};
use crate::error::{Error, Result};
use crate::etree::{EncodingTree, TreeStats};
use crate::order::ChunkOrder;
use crate::table::{adc_scan, DistanceTable};
use crate::vecset::VectorSet;

/// Absolute tolerance for the pre-timing equivalence check (unit-scale data,
/// double-precision accumulation on both paths).
pub const EQUIVALENCE_TOLERANCE: f32 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Adc,
    ETree,
    EForest,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Adc => "adc",
            Method::ETree => "etree",
            Method::EForest => "eforest",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "adc" => Ok(Method::Adc),
            "etree" => Ok(Method::ETree),
            "eforest" => Ok(Method::EForest),
            other => Err(Error::ConfigError(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub methods: Vec<Method>,
    pub repetitions: usize,
    /// Trees in the forest method.
    pub forest_trees: usize,
    pub order: ChunkOrder,
    pub threads: usize,
}

#[derive(Debug, Clone)]
pub struct MethodReport {
    pub method: Method,
    /// Median wall time of one full-dataset scan, milliseconds.
    pub median_scan_ms: f64,
    /// Median scan time with `threads` workers; present when threads > 1.
    pub median_scan_ms_mt: Option<f64>,
    /// Table lookups per scan.
    pub lookups: u64,
    /// Bytes to store the dataset under this method.
    pub memory_bytes: u64,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub queries: usize,
    pub repetitions: usize,
    pub methods: Vec<MethodReport>,
    pub tree_stats: Vec<TreeStats>,
    pub forest_stats: Vec<TreeStats>,
}

impl BenchReport {
    fn method(&self, m: Method) -> Option<&MethodReport> {
        self.methods.iter().find(|r| r.method == m)
    }

    pub fn speedup_vs_adc(&self, m: Method) -> Option<f64> {
        let adc = self.method(Method::Adc)?;
        let other = self.method(m)?;
        Some(adc.median_scan_ms / other.median_scan_ms)
    }

    /// One key=value line per metric.
    pub fn machine(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "dataset.n={}", self.n);
        let _ = writeln!(out, "dataset.m={}", self.m);
        let _ = writeln!(out, "dataset.k={}", self.k);
        let _ = writeln!(out, "dataset.queries={}", self.queries);
        let _ = writeln!(out, "dataset.repetitions={}", self.repetitions);
        for r in &self.methods {
            let name = r.method.name();
            let _ = writeln!(out, "{name}.scan_ms_median={:.6}", r.median_scan_ms);
            if let Some(mt) = r.median_scan_ms_mt {
                let _ = writeln!(out, "{name}.scan_ms_median_mt={mt:.6}");
            }
            let _ = writeln!(out, "{name}.lookups={}", r.lookups);
            let _ = writeln!(out, "{name}.memory_bytes={}", r.memory_bytes);
            if r.method != Method::Adc {
                if let Some(s) = self.speedup_vs_adc(r.method) {
                    let _ = writeln!(out, "{name}.speedup_vs_adc={s:.4}");
                }
                if let Some(adc) = self.method(Method::Adc) {
                    let reduction = 1.0 - r.memory_bytes as f64 / adc.memory_bytes as f64;
                    let _ = writeln!(out, "{name}.memory_reduction={reduction:.4}");
                }
            }
        }
        for (i, s) in self.tree_stats.iter().enumerate() {
            let _ = write_stats(&mut out, &format!("etree.tree{i}"), s);
        }
        for (i, s) in self.forest_stats.iter().enumerate() {
            let _ = write_stats(&mut out, &format!("eforest.tree{i}"), s);
        }
        out
    }

    /// Short human-readable table. Memory figures follow the node-count
    /// formula, so they depend on how much prefix sharing the data offers.
    pub fn human(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "scan benchmark: n={} m={} k={} ({} queries x {} repetitions)",
            self.n, self.m, self.k, self.queries, self.repetitions
        );
        let _ = writeln!(
            out,
            "{:<8} {:>14} {:>14} {:>14} {:>10}",
            "method", "median ms", "lookups", "memory B", "vs adc"
        );
        for r in &self.methods {
            let speedup = self
                .speedup_vs_adc(r.method)
                .map(|s| format!("{s:.2}x"))
                .unwrap_or_else(|| "-".into());
            let _ = writeln!(
                out,
                "{:<8} {:>14.3} {:>14} {:>14} {:>10}",
                r.method.name(),
                r.median_scan_ms,
                r.lookups,
                r.memory_bytes,
                speedup
            );
        }
        out
    }
}

fn write_stats(out: &mut String, prefix: &str, s: &TreeStats) -> std::fmt::Result {
    writeln!(out, "{prefix}.internal_nodes={}", s.internal_nodes)?;
    writeln!(out, "{prefix}.leaf_records={}", s.leaf_records)?;
    writeln!(out, "{prefix}.total_postfix={}", s.total_postfix)?;
    writeln!(out, "{prefix}.avg_postfix={:.4}", s.avg_postfix)?;
    writeln!(out, "{prefix}.node_count={}", s.node_count)?;
    writeln!(out, "{prefix}.memory_bytes={}", s.memory_bytes)
}

fn median(mut samples: Vec<f64>) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        samples[n / 2]
    } else {
        0.5 * (samples[n / 2 - 1] + samples[n / 2])
    }
}

/// Flat storage cost of the encoded dataset: M code bytes plus a 4-byte id
/// per vector.
pub fn adc_memory_bytes(n: usize, m: usize) -> u64 {
    (n as u64) * (m as u64 + 4)
}

/// Times full-dataset scans for each requested method.
pub fn bench_scan(
    ds: &EncodedDataset,
    codebook: &Codebook,
    queries: &VectorSet,
    opts: &BenchOptions,
) -> Result<BenchReport> {
    if queries.is_empty() || opts.repetitions == 0 {
        return Err(Error::ConfigError(
            "benchmark needs at least one query and one repetition".into(),
        ));
    }
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if codebook.num_subspaces() != ds.num_subspaces() || codebook.codewords() != ds.codewords() {
        return Err(Error::ConfigError(
            "codebook and dataset disagree on m or K".into(),
        ));
    }

    let n = ds.len();
    let m = ds.num_subspaces();
    let slots = ds.slot_map();
    let tables: Vec<DistanceTable> = queries
        .iter()
        .map(|q| DistanceTable::build(codebook, q))
        .collect::<Result<_>>()?;

    let want_tree = opts.methods.contains(&Method::ETree);
    let want_forest = opts.methods.contains(&Method::EForest);
    let tree = want_tree
        .then(|| EncodingTree::build(ds, &opts.order, opts.threads))
        .transpose()?;
    let forest = want_forest
        .then(|| {
            EncodingForest::build(
                ds,
                &opts.order,
                &ForestConfig::even(m, opts.forest_trees)?,
                opts.threads,
            )
        })
        .transpose()?;

    // Correctness gate before any timing.
    let mut tree_lookups = 0u64;
    let mut forest_lookups = 0u64;
    {
        let mut buf = vec![0.0f32; n];
        for (qi, table) in tables.iter().enumerate() {
            let oracle = adc_scan(table, ds, 1)?;
            if let Some(tree) = &tree {
                tree_lookups = tree.traverse_distances_counted(table, &slots, &mut buf)?;
                check_equivalence("etree", qi, &buf, &oracle)?;
            }
            if let Some(forest) = &forest {
                forest_lookups = forest.scan_counted(table, &slots, &mut buf)?;
                check_equivalence("eforest", qi, &buf, &oracle)?;
            }
        }
    }

    let tree_stats = match &tree {
        Some(t) => vec![t.stats()?],
        None => Vec::new(),
    };
    let forest_stats = match &forest {
        Some(f) => f.stats()?.0,
        None => Vec::new(),
    };
    if let Some(s) = tree_stats.first() {
        debug_assert_eq!(
            tree_lookups,
            s.internal_nodes + s.leaf_records + s.total_postfix
        );
    }

    let mut out = vec![0.0f32; n];
    let mut forest_scratch = forest.as_ref().map(|f| f.scratch());
    let mut reports = Vec::new();
    for &method in &opts.methods {
        let mut run = |threads: usize| -> Result<Vec<f64>> {
            let mut samples = Vec::with_capacity(opts.repetitions * tables.len());
            for rep in 0..=opts.repetitions {
                for table in &tables {
                    let start = Instant::now();
                    match method {
                        Method::Adc => {
                            out = adc_scan(table, ds, threads)?;
                        }
                        Method::ETree => {
                            tree.as_ref()
                                .expect("tree built")
                                .traverse_distances(table, &slots, &mut out)?;
                        }
                        Method::EForest => {
                            forest.as_ref().expect("forest built").scan_into(
                                table,
                                &slots,
                                forest_scratch.as_mut().expect("scratch"),
                                &mut out,
                                threads,
                            )?;
                        }
                    }
                    let elapsed = start.elapsed().as_secs_f64() * 1e3;
                    if rep > 0 {
                        // rep 0 is the warm-up pass.
                        samples.push(elapsed);
                    }
                }
            }
            Ok(samples)
        };

        let single = median(run(1)?);
        let multi = if opts.threads > 1 {
            Some(median(run(opts.threads)?))
        } else {
            None
        };
        let (lookups, memory_bytes) = match method {
            Method::Adc => ((n * m) as u64, adc_memory_bytes(n, m)),
            Method::ETree => (tree_lookups, tree_stats[0].memory_bytes),
            Method::EForest => (
                forest_lookups,
                forest_stats.iter().map(|s| s.memory_bytes).sum(),
            ),
        };
        reports.push(MethodReport {
            method,
            median_scan_ms: single,
            median_scan_ms_mt: multi,
            lookups,
            memory_bytes,
        });
    }

    Ok(BenchReport {
        n,
        m,
        k: ds.codewords(),
        queries: queries.len(),
        repetitions: opts.repetitions,
        methods: reports,
        tree_stats,
        forest_stats,
    })
}

fn check_equivalence(method: &str, query: usize, got: &[f32], oracle: &[f32]) -> Result<()> {
    for (i, (g, o)) in got.iter().zip(oracle.iter()).enumerate() {
        if (g - o).abs() > EQUIVALENCE_TOLERANCE {
            return Err(Error::EquivalenceFailure(format!(
                "method {method}, query {query}, slot {i}: {g} vs oracle {o}"
            )));
        }
    }
    Ok(())
}
