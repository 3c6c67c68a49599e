//! Benchmark CLI: dataset generation, single runs, and paired
//! comparisons with per-iteration metrics CSVs.

mod compare;
mod manifest;
mod runner;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use manifest::{DatasetManifest, RunManifest};
use mmcluster::io;
use mmcluster::synth::{generate_mixture, MixtureSpec};

#[derive(Parser)]
#[command(
    name = "mmcluster",
    version,
    about = "Parallel MM clustering: k-means family, hierarchical methods, \
             lossless pruning, and a semi-external-memory mode"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a seeded Gaussian-mixture dataset (matrix, labels, manifest)
    Gen(GenArgs),
    /// Run one algorithm; write centroids, assignments, metrics CSV, manifest
    Run(Box<RunArgs>),
    /// Run variants along one axis with identical seeds; emit a paired CSV
    Compare(Box<CompareArgs>),
}

#[derive(Args)]
struct GenArgs {
    /// Number of points
    #[arg(long)]
    n: usize,
    /// Dimensionality
    #[arg(long)]
    d: usize,
    /// Number of generating clusters
    #[arg(long)]
    k: usize,
    /// Minimum center separation in within-cluster standard deviations
    #[arg(long, default_value_t = 10.0)]
    sep: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output prefix: writes `<out>.bin`, `<out>.labels`, `<out>.json`
    #[arg(long)]
    out: PathBuf,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Alg {
    Kmeans,
    Skmeans,
    Kmeanspp,
    Mbkmeans,
    Fcmeans,
    Kmedoids,
    Hmeans,
    Xmeans,
    Gmeans,
}

impl Alg {
    fn name(self) -> &'static str {
        match self {
            Alg::Kmeans => "kmeans",
            Alg::Skmeans => "skmeans",
            Alg::Kmeanspp => "kmeanspp",
            Alg::Mbkmeans => "mbkmeans",
            Alg::Fcmeans => "fcmeans",
            Alg::Kmedoids => "kmedoids",
            Alg::Hmeans => "hmeans",
            Alg::Xmeans => "xmeans",
            Alg::Gmeans => "gmeans",
        }
    }
}

#[derive(Copy, Clone, ValueEnum)]
enum InitArg {
    Random,
    Forgy,
    Plusplus,
}

#[derive(Copy, Clone, ValueEnum)]
enum PruneArg {
    None,
    Mti,
    Ti,
}

#[derive(Copy, Clone, ValueEnum)]
enum SchedArg {
    Steal,
    Static,
    Fifo,
}

#[derive(Copy, Clone, ValueEnum)]
enum ConvArg {
    Fraction,
    Drift,
    Iters,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Im,
    Sem,
}

#[derive(Copy, Clone, ValueEnum)]
enum RcModeArg {
    Lazy,
    Lru,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Binary matrix file (little-endian f64, row-major, no header)
    #[arg(long, required_unless_present = "from_manifest")]
    data: Option<PathBuf>,
    /// Rows in the matrix file
    #[arg(long, required_unless_present = "from_manifest")]
    n: Option<usize>,
    /// Columns in the matrix file
    #[arg(long, required_unless_present = "from_manifest")]
    d: Option<usize>,
    #[arg(long, value_enum, default_value_t = Alg::Kmeans)]
    alg: Alg,
    #[arg(long, default_value_t = 8)]
    k: usize,
    #[arg(long, value_enum, default_value_t = InitArg::Forgy)]
    init: InitArg,
    #[arg(long, value_enum, default_value_t = PruneArg::Mti)]
    prune: PruneArg,
    #[arg(long, value_enum, default_value_t = SchedArg::Steal)]
    sched: SchedArg,
    /// Worker threads (default from MMCLUSTER_THREADS when set)
    #[arg(long, env = "MMCLUSTER_THREADS", default_value_t = 1)]
    threads: usize,
    /// Locality partitions; 0 follows the thread count
    #[arg(long, default_value_t = 0)]
    partitions: usize,
    #[arg(long, default_value_t = 8192)]
    task_size: usize,
    /// Iteration cap (flat) or inner 2-means cap per split (hierarchical)
    #[arg(long, default_value_t = 20)]
    max_iters: u32,
    #[arg(long, default_value_t = 0.0)]
    tol: f64,
    #[arg(long, value_enum, default_value_t = ConvArg::Fraction)]
    conv: ConvArg,
    /// im holds the matrix in memory; sem leaves it on disk
    #[arg(long, value_enum, default_value_t = ModeArg::Im)]
    mode: ModeArg,
    /// Row cache capacity in bytes (0 disables the cache)
    #[arg(long, default_value_t = 64 << 20)]
    rc_bytes: usize,
    #[arg(long, value_enum, default_value_t = RcModeArg::Lazy)]
    rc_mode: RcModeArg,
    /// Lazy cache refresh base interval
    #[arg(long, default_value_t = 5)]
    icache: u32,
    #[arg(long, default_value_t = 4096)]
    page_bytes: usize,
    /// Fuzzy c-means fuzziness
    #[arg(long, default_value_t = 2.0)]
    z: f64,
    /// Mini-batch fraction in (0, 1]
    #[arg(long, default_value_t = 0.2)]
    batch_frac: f64,
    /// CLARA sample percentage in (0, 100]
    #[arg(long, default_value_t = 20.0)]
    sample_pct: f64,
    /// k-means++ run count
    #[arg(long, default_value_t = 1)]
    runs: usize,
    /// Leaf cap for xmeans/gmeans
    #[arg(long, default_value_t = 32)]
    kmax: usize,
    /// Level cap for hmeans
    #[arg(long, default_value_t = 4)]
    lmax: u32,
    /// G-means Anderson-Darling significance
    #[arg(long, default_value_t = 0.0001)]
    alpha: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    /// Re-run the exact configuration recorded in a manifest
    #[arg(long)]
    from_manifest: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    base: RunArgs,
    /// Which knob to vary; everything else stays fixed
    #[arg(long, value_enum)]
    axis: compare::Axis,
    /// Comma-separated variant list (defaults per axis)
    #[arg(long)]
    variants: Option<String>,
}

fn init_name(i: InitArg) -> &'static str {
    match i {
        InitArg::Random => "random",
        InitArg::Forgy => "forgy",
        InitArg::Plusplus => "plusplus",
    }
}

fn build_manifest(a: &RunArgs) -> Result<RunManifest, String> {
    if let Some(path) = &a.from_manifest {
        return manifest::read_run_manifest(path);
    }
    let data = a.data.clone().expect("clap enforces --data");
    let (n, d) = (a.n.expect("--n"), a.d.expect("--d"));
    Ok(RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        algorithm: a.alg.name().to_string(),
        k: a.k,
        init: init_name(a.init).to_string(),
        prune: match a.prune {
            PruneArg::None => "none",
            PruneArg::Mti => "mti",
            PruneArg::Ti => "ti",
        }
        .to_string(),
        sched: match a.sched {
            SchedArg::Steal => "steal",
            SchedArg::Static => "static",
            SchedArg::Fifo => "fifo",
        }
        .to_string(),
        conv: match a.conv {
            ConvArg::Fraction => "fraction",
            ConvArg::Drift => "drift",
            ConvArg::Iters => "iters",
        }
        .to_string(),
        mode: match a.mode {
            ModeArg::Im => "im",
            ModeArg::Sem => "sem",
        }
        .to_string(),
        threads: a.threads,
        partitions: a.partitions,
        task_size: a.task_size,
        max_iters: a.max_iters,
        tol: a.tol,
        seed: a.seed,
        rc_bytes: a.rc_bytes,
        rc_mode: match a.rc_mode {
            RcModeArg::Lazy => "lazy",
            RcModeArg::Lru => "lru",
        }
        .to_string(),
        icache: a.icache,
        page_bytes: a.page_bytes,
        z: a.z,
        batch_frac: a.batch_frac,
        sample_pct: a.sample_pct,
        runs: a.runs,
        kmax: a.kmax,
        lmax: a.lmax,
        alpha: a.alpha,
        dataset: runner::dataset_info(&data, n, d)?,
    })
}

fn cmd_gen(a: &GenArgs) -> Result<(), String> {
    let spec = MixtureSpec {
        n: a.n,
        d: a.d,
        true_k: a.k,
        separation: a.sep,
        seed: a.seed,
    };
    let mix = generate_mixture(&spec).map_err(|e| e.to_string())?;
    let matrix_file = a.out.with_extension("bin");
    let labels_file = a.out.with_extension("labels");
    io::save_matrix(&matrix_file, &mix.matrix).map_err(|e| e.to_string())?;
    io::save_ids(&labels_file, &mix.labels).map_err(|e| e.to_string())?;
    let checksum = io::fingerprint(&matrix_file).map_err(|e| e.to_string())?;
    let m = DatasetManifest {
        kind: "mixture".to_string(),
        n: a.n,
        d: a.d,
        true_k: a.k,
        separation: a.sep,
        seed: a.seed,
        checksum: format!("{checksum:016x}"),
        matrix_file: matrix_file.display().to_string(),
        labels_file: labels_file.display().to_string(),
    };
    manifest::write_json(&a.out.with_extension("json"), &m).map_err(|e| e.to_string())?;
    println!(
        "wrote {} ({} x {}, checksum {:016x})",
        matrix_file.display(),
        a.n,
        a.d,
        checksum
    );
    Ok(())
}

fn cmd_run(a: &RunArgs) -> Result<bool, String> {
    let m = build_manifest(a)?;
    let out = runner::execute(&m)?;
    runner::write_outputs(&a.out, &m, &out)?;
    let sane = runner::counters_sane(&m, &out);
    println!(
        "{}: {} iterations, objective {}, {} x {} centroids, outputs in {}",
        m.algorithm,
        out.metrics.len(),
        out.final_objective,
        out.centroid_rows,
        out.d,
        a.out.display()
    );
    if !sane {
        eprintln!("counter sanity check failed");
    }
    Ok(sane)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Gen(a) => cmd_gen(a).map(|()| true),
        Cmd::Run(a) => cmd_run(a),
        Cmd::Compare(a) => compare::cmd_compare(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
