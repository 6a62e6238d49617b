//! Command-line frontend for training, encoding, tree construction,
//! querying and benchmarking.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use etree::bench::{bench_scan, BenchOptions, Method};
use etree::io::{self, VecFormat};
use etree::ivf::{build_ivf, IvfIndex, ScanBackend, SearchProfile};
use etree::{
    ChunkOrder, Codebook, EncodedDataset, EncodingForest, EncodingTree, ForestConfig, SlotMap,
    SyntheticSpec, TopK, VectorSet,
};

#[derive(Parser)]
#[command(name = "etree", version, about = "Compressed-tree distance scans over quantized vectors")]
struct Cli {
    /// Seed for every random choice (training init, shuffles, synthesis).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; 1 keeps everything sequential.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a product-quantization codebook from a vector file.
    Train(TrainArgs),
    /// Encode a vector file with a trained codebook.
    Encode(EncodeArgs),
    /// Build an encoding tree (or forest) from a codes file.
    BuildTree(BuildTreeArgs),
    /// Print node statistics and the size-formula check for a tree file.
    Stats(StatsArgs),
    /// Scan a tree file for the top-k neighbors of each query.
    Query(QueryArgs),
    /// Time ADC, tree and forest scans over one dataset.
    Bench(BenchArgs),
    /// Generate clustered synthetic vectors.
    Gen(GenArgs),
    /// Build or search an inverted-file index.
    #[command(subcommand)]
    Ivf(IvfCommand),
}

#[derive(Args)]
struct TrainArgs {
    /// Training vectors (fvecs/bvecs/ivecs by extension).
    #[arg(long)]
    input: PathBuf,
    /// Number of subspaces.
    #[arg(long = "M")]
    m: usize,
    /// Codewords per subspace (at most 256).
    #[arg(long = "K")]
    k: usize,
    #[arg(long, default_value_t = 25)]
    iterations: usize,
    /// Output codebook file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    codebook: PathBuf,
    /// Output codes file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BuildTreeArgs {
    /// Codes file to build from.
    #[arg(long)]
    codes: PathBuf,
    /// Chunk ordering: keep the original layers or shuffle them.
    #[arg(long, value_parser = ["original", "random"], default_value = "original")]
    order: String,
    /// Number of trees; layers are split evenly across them.
    #[arg(long, default_value_t = 1)]
    trees: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    tree: PathBuf,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    tree: PathBuf,
    #[arg(long)]
    codebook: PathBuf,
    /// Query vectors (fvecs).
    #[arg(long)]
    queries: PathBuf,
    /// Neighbors per query.
    #[arg(long)]
    k: usize,
    /// Output basename; writes <out>.ivecs (ids) and <out>.fvecs (distances).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    codes: PathBuf,
    #[arg(long)]
    codebook: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    /// Comma-separated subset of adc,etree,eforest.
    #[arg(long, default_value = "adc,etree,eforest")]
    methods: String,
    /// Scan repetitions per query after one warm-up pass.
    #[arg(long, default_value_t = 10)]
    repetitions: usize,
    /// Trees in the forest method.
    #[arg(long, default_value_t = 2)]
    trees: usize,
    #[arg(long, value_parser = ["original", "random"], default_value = "original")]
    order: String,
    /// Also write the machine-readable report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    #[arg(long, default_value_t = 16)]
    clusters: usize,
    #[arg(long, default_value_t = 0.05)]
    stddev: f64,
    /// Output fvecs file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum IvfCommand {
    Build(IvfBuildArgs),
    Search(IvfSearchArgs),
}

#[derive(Args)]
struct IvfBuildArgs {
    #[arg(long)]
    input: PathBuf,
    /// Coarse cells.
    #[arg(long, default_value_t = 256)]
    kprime: u32,
    #[arg(long = "M")]
    m: usize,
    #[arg(long = "K")]
    k: usize,
    /// Trees per inverted list.
    #[arg(long, default_value_t = 1)]
    trees: usize,
    #[arg(long, default_value_t = 25)]
    iterations: usize,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct IvfSearchArgs {
    /// Index directory produced by `ivf build`.
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    /// Probed cells per query.
    #[arg(long, default_value_t = 8)]
    w: usize,
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Ground-truth neighbor ids (ivecs), first column = nearest.
    #[arg(long)]
    ground_truth: Option<PathBuf>,
    /// Print recall and per-phase timing.
    #[arg(long, default_value_t = false)]
    report: bool,
    /// Write per-query results to <out>.ivecs / <out>.fvecs.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if cli.threads > 1 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("error: cannot size the thread pool: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> etree::Result<()> {
    let seed = cli.seed;
    let threads = cli.threads.max(1);
    match cli.command {
        Command::Train(a) => train(a, seed, threads),
        Command::Encode(a) => encode(a, threads),
        Command::BuildTree(a) => build_tree(a, seed, threads),
        Command::Stats(a) => stats(a),
        Command::Query(a) => query(a, threads),
        Command::Bench(a) => bench(a, seed, threads),
        Command::Gen(a) => gen(a, seed),
        Command::Ivf(IvfCommand::Build(a)) => ivf_build(a, seed, threads),
        Command::Ivf(IvfCommand::Search(a)) => ivf_search(a, threads),
    }
}

fn read_input_vectors(path: &PathBuf) -> etree::Result<VectorSet> {
    io::read_vectors(path, VecFormat::from_path(path)?)
}

fn train(a: TrainArgs, seed: u64, threads: usize) -> etree::Result<()> {
    let data = read_input_vectors(&a.input)?;
    println!(
        "training on {} vectors of dim {} (M={}, K={}, {} iterations, seed {seed})",
        data.len(),
        data.dim(),
        a.m,
        a.k,
        a.iterations
    );
    let start = Instant::now();
    let cb = etree::train_pq(&data, a.m, a.k, a.iterations, seed, threads)?;
    io::write_codebook(&a.out, &cb)?;
    println!(
        "codebook written to {} in {:.2}s",
        a.out.display(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

fn encode(a: EncodeArgs, threads: usize) -> etree::Result<()> {
    let data = read_input_vectors(&a.input)?;
    let cb = io::read_codebook(&a.codebook)?;
    let ds = EncodedDataset::encode(&cb, &data, threads)?;
    io::write_codes(&a.out, &ds)?;
    println!(
        "encoded {} vectors into {} ({} bytes per code)",
        ds.len(),
        a.out.display(),
        ds.num_subspaces()
    );
    Ok(())
}

fn parse_order(kind: &str, m: usize, seed: u64) -> ChunkOrder {
    match kind {
        "random" => ChunkOrder::randomized(m, seed),
        _ => ChunkOrder::original(m),
    }
}

fn build_tree(a: BuildTreeArgs, seed: u64, threads: usize) -> etree::Result<()> {
    let ds = io::read_codes(&a.codes)?;
    let m = ds.num_subspaces();
    let order = parse_order(&a.order, m, seed);
    let start = Instant::now();
    let forest = EncodingForest::build(&ds, &order, &ForestConfig::even(m, a.trees)?, threads)?;
    io::write_tree(&a.out, &forest)?;
    let (per_tree, total) = forest.stats()?;
    println!(
        "built {} tree(s) over {} codes in {:.2}s; {} bytes total",
        per_tree.len(),
        ds.len(),
        start.elapsed().as_secs_f64(),
        total
    );
    Ok(())
}

fn stats(a: StatsArgs) -> etree::Result<()> {
    let forest = io::read_tree(&a.tree)?;
    let n = forest.len() as u64;
    let mut total_memory = 0u64;
    for (i, tree) in forest.trees().iter().enumerate() {
        let s = tree.stats()?;
        let formula = etree::TreeStats::formula_bytes(
            n,
            s.internal_nodes,
            s.leaf_records,
            s.total_postfix,
        );
        let ok = formula == tree.memory_bytes() as u64;
        total_memory += s.memory_bytes;
        let p = format!("tree{i}");
        println!("{p}.layers=[{}, {})", tree.layer_offset(), tree.layer_offset() + tree.layer_count());
        println!("{p}.internal_nodes={}", s.internal_nodes);
        println!("{p}.leaf_records={}", s.leaf_records);
        println!("{p}.total_postfix={}", s.total_postfix);
        println!("{p}.avg_postfix={:.4}", s.avg_postfix);
        println!("{p}.node_count={}", s.node_count);
        println!("{p}.memory_bytes={}", s.memory_bytes);
        println!("{p}.formula_check={}", if ok { "ok" } else { "MISMATCH" });
    }
    println!("n={n}");
    println!("trees={}", forest.tree_count());
    println!("memory_bytes_total={total_memory}");
    println!(
        "flat_bytes={}",
        etree::bench::adc_memory_bytes(forest.len(), forest.chunk_order().len())
    );
    Ok(())
}

/// Slot bookkeeping for a loaded tree file: slots follow ascending id order,
/// which is the identity for datasets encoded by this tool.
fn loaded_slots(forest: &EncodingForest) -> etree::Result<(SlotMap, Vec<u32>)> {
    let mut ids = forest.trees()[0].leaf_ids()?;
    ids.sort_unstable();
    Ok((SlotMap::new(&ids), ids))
}

fn query(a: QueryArgs, threads: usize) -> etree::Result<()> {
    let forest = io::read_tree(&a.tree)?;
    let cb = io::read_codebook(&a.codebook)?;
    if cb.num_subspaces() != forest.chunk_order().len() || cb.codewords() != forest.codewords() {
        return Err(etree::Error::ConfigError(
            "codebook and tree disagree on M or K".into(),
        ));
    }
    let queries = io::read_vectors(&a.queries, VecFormat::from_path(&a.queries)?)?;
    let (slots, ids_by_slot) = loaded_slots(&forest)?;

    let run_query = |q: &[f32]| -> etree::Result<Vec<etree::Neighbor>> {
        let table = etree::DistanceTable::build(&cb, q)?;
        let mut scratch = forest.scratch();
        let mut out = vec![0.0f32; forest.len()];
        forest.scan_into(&table, &slots, &mut scratch, &mut out, 1)?;
        let mut top = TopK::new(a.k);
        for (slot, &d) in out.iter().enumerate() {
            top.push(ids_by_slot[slot], d);
        }
        Ok(top.into_sorted())
    };

    let start = Instant::now();
    let results: Vec<Vec<etree::Neighbor>> = if threads > 1 {
        use rayon::prelude::*;
        (0..queries.len())
            .into_par_iter()
            .map(|i| run_query(queries.get(i)))
            .collect::<etree::Result<_>>()?
    } else {
        queries.iter().map(run_query).collect::<etree::Result<_>>()?
    };
    let elapsed = start.elapsed().as_secs_f64();

    write_results(&a.out, &results)?;
    println!(
        "{} queries in {:.3}s ({:.3} ms/query), results in {}.ivecs/.fvecs",
        queries.len(),
        elapsed,
        1e3 * elapsed / queries.len().max(1) as f64,
        a.out.display()
    );
    Ok(())
}

fn write_results(base: &PathBuf, results: &[Vec<etree::Neighbor>]) -> etree::Result<()> {
    let ids: Vec<Vec<i32>> = results
        .iter()
        .map(|r| r.iter().map(|n| n.id as i32).collect())
        .collect();
    let mut dists = VectorSet::new(results.iter().map(|r| r.len()).max().unwrap_or(1).max(1));
    let pad = dists.dim();
    for r in results {
        let mut row: Vec<f32> = r.iter().map(|n| n.distance).collect();
        row.resize(pad, f32::INFINITY);
        dists.push(&row);
    }
    io::write_ivecs(&base.with_extension("ivecs"), &ids)?;
    io::write_fvecs(&base.with_extension("fvecs"), &dists)?;
    Ok(())
}

fn bench(a: BenchArgs, seed: u64, threads: usize) -> etree::Result<()> {
    let ds = io::read_codes(&a.codes)?;
    let cb = io::read_codebook(&a.codebook)?;
    let queries = io::read_vectors(&a.queries, VecFormat::from_path(&a.queries)?)?;
    let methods = a
        .methods
        .split(',')
        .map(|s| Method::parse(s.trim()))
        .collect::<etree::Result<Vec<_>>>()?;
    let opts = BenchOptions {
        methods,
        repetitions: a.repetitions,
        forest_trees: a.trees,
        order: parse_order(&a.order, ds.num_subspaces(), seed),
        threads,
    };
    let report = bench_scan(&ds, &cb, &queries, &opts)?;
    print!("{}", report.human());
    print!("{}", report.machine());
    if let Some(path) = a.out {
        std::fs::write(&path, report.machine())?;
        println!("report written to {}", path.display());
    }
    Ok(())
}

fn gen(a: GenArgs, seed: u64) -> etree::Result<()> {
    let spec = SyntheticSpec {
        n: a.n,
        dim: a.d,
        cluster_count: a.clusters,
        cluster_stddev: a.stddev,
        seed,
    };
    let data = etree::gen_synthetic(&spec)?;
    io::write_fvecs(&a.out, &data)?;
    println!(
        "wrote {} vectors of dim {} ({} clusters, stddev {}) to {}",
        a.n,
        a.d,
        a.clusters,
        a.stddev,
        a.out.display()
    );
    Ok(())
}

fn ivf_build(a: IvfBuildArgs, seed: u64, threads: usize) -> etree::Result<()> {
    let data = read_input_vectors(&a.input)?;
    println!(
        "building ivf index: {} vectors, {} cells, M={}, K={}, {} tree(s) per list",
        data.len(),
        a.kprime,
        a.m,
        a.k,
        a.trees
    );
    let start = Instant::now();
    let index = build_ivf(
        &data,
        a.kprime as usize,
        a.m,
        a.k,
        a.iterations,
        seed,
        a.trees,
        threads,
    )?;
    index.save(&a.out)?;
    let sizes = index.bucket_sizes();
    let max = sizes.iter().copied().max().unwrap_or(0);
    let empty = sizes.iter().filter(|&&s| s == 0).count();
    println!(
        "index written to {} in {:.2}s (largest list {max}, {empty} empty)",
        a.out.display(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

fn ivf_search(a: IvfSearchArgs, threads: usize) -> etree::Result<()> {
    let index = IvfIndex::load(&a.index)?;
    let queries = io::read_vectors(&a.queries, VecFormat::from_path(&a.queries)?)?;
    if queries.is_empty() {
        return Err(etree::Error::ConfigError("no queries".into()));
    }

    let start = Instant::now();
    let outcomes: Vec<(Vec<etree::Neighbor>, SearchProfile)> = if threads > 1 {
        use rayon::prelude::*;
        (0..queries.len())
            .into_par_iter()
            .map(|i| index.search_profiled(queries.get(i), a.w, a.k, ScanBackend::Tree))
            .collect::<etree::Result<_>>()?
    } else {
        queries
            .iter()
            .map(|q| index.search_profiled(q, a.w, a.k, ScanBackend::Tree))
            .collect::<etree::Result<_>>()?
    };
    let elapsed = start.elapsed().as_secs_f64();
    let results: Vec<Vec<etree::Neighbor>> = outcomes.iter().map(|(r, _)| r.clone()).collect();

    println!("queries={}", queries.len());
    println!("w={} k={}", a.w, a.k);
    println!("mean_query_ms={:.4}", 1e3 * elapsed / queries.len() as f64);

    if a.report {
        let nq = queries.len() as f64;
        let sum = |f: fn(&SearchProfile) -> u64| -> f64 {
            outcomes.iter().map(|(_, p)| f(p)).sum::<u64>() as f64 / nq / 1e6
        };
        println!("phase.coarse_ms={:.4}", sum(|p| p.coarse_ns));
        println!("phase.table_ms={:.4}", sum(|p| p.table_ns));
        println!("phase.traversal_ms={:.4}", sum(|p| p.scan_ns));
        println!("phase.merge_ms={:.4}", sum(|p| p.merge_ns));
    }

    if let Some(gt_path) = &a.ground_truth {
        let truth = io::read_ivecs(gt_path)?;
        if truth.len() < queries.len() {
            return Err(etree::Error::ConfigError(format!(
                "{} ground-truth rows for {} queries",
                truth.len(),
                queries.len()
            )));
        }
        for r in [1usize, 10, 100] {
            println!(
                "recall@{r}={:.4}",
                IvfIndex::recall_at(&results, &truth[..queries.len()], r)
            );
        }
    }

    if let Some(base) = &a.out {
        write_results(base, &results)?;
        println!("results written to {}.ivecs/.fvecs", base.display());
    }
    Ok(())
}
