//! Paired comparison runs: vary exactly one axis, keep every other
//! setting (including seeds) fixed, and emit a long-format CSV with
//! per-variant summary rows. The losslessness and equivalence checks
//! gate the exit code.

use clap::ValueEnum;

use crate::manifest::RunManifest;
use crate::runner::{self, RunOutput};
use crate::CompareArgs;
use mmcluster::metrics::CSV_HEADER;

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    /// none, mti, ti (loselessness of pruning)
    Prune,
    /// steal, static, fifo (scheduling changes timing, not output)
    Scheduler,
    /// off, lazy, lru (row cache changes I/O, not math)
    Cache,
    /// thread counts (agreement on margin-safe data)
    Threads,
}

impl Axis {
    fn default_variants(self) -> Vec<String> {
        match self {
            Axis::Prune => vec!["none".into(), "mti".into(), "ti".into()],
            Axis::Scheduler => vec!["steal".into(), "static".into(), "fifo".into()],
            Axis::Cache => vec!["off".into(), "lazy".into(), "lru".into()],
            Axis::Threads => vec!["1".into(), "2".into(), "4".into()],
        }
    }

    fn apply(self, m: &mut RunManifest, variant: &str) -> Result<(), String> {
        match self {
            Axis::Prune => m.prune = variant.to_string(),
            Axis::Scheduler => m.sched = variant.to_string(),
            Axis::Cache => {
                m.mode = "sem".to_string();
                match variant {
                    "off" => m.rc_bytes = 0,
                    "lazy" | "lru" => m.rc_mode = variant.to_string(),
                    other => return Err(format!("unknown cache variant {other}")),
                }
            }
            Axis::Threads => {
                m.threads = variant
                    .parse()
                    .map_err(|_| format!("bad thread count {variant}"))?;
            }
        }
        Ok(())
    }
}

pub fn cmd_compare(args: &CompareArgs) -> Result<bool, String> {
    let base = crate::build_manifest(&args.base)?;
    let variants = match &args.variants {
        Some(list) => list.split(',').map(|s| s.trim().to_string()).collect(),
        None => args.axis.default_variants(),
    };
    if variants.len() < 2 {
        return Err("compare needs at least two variants".to_string());
    }
    if args.axis == Axis::Prune && !matches!(base.algorithm.as_str(), "kmeans" | "skmeans") {
        return Err("--axis prune applies to kmeans/skmeans".to_string());
    }

    let mut outputs: Vec<(String, RunOutput)> = Vec::new();
    for v in &variants {
        let mut m = base.clone();
        args.axis.apply(&mut m, v)?;
        let out = runner::execute(&m)?;
        if !runner::counters_sane(&m, &out) {
            eprintln!("variant {v}: counter sanity check failed");
            return Ok(false);
        }
        outputs.push((v.clone(), out));
    }

    std::fs::create_dir_all(&args.base.out).map_err(|e| e.to_string())?;
    let csv_path = args.base.out.join("compare.csv");
    let mut csv = String::new();
    csv.push_str("section,variant,");
    csv.push_str(CSV_HEADER);
    csv.push('\n');
    for (v, out) in &outputs {
        for it in &out.metrics {
            csv.push_str(&format!("iter,{v},{}\n", it.csv_row()));
        }
    }
    // Summary rows reuse the metric columns with column-wise totals
    // (aux_bytes is the peak, objective the final value).
    for (v, out) in &outputs {
        let total = |f: fn(&mmcluster::metrics::IterationMetrics) -> u64| -> u64 {
            out.metrics.iter().map(f).sum()
        };
        let wall: f64 = out.metrics.iter().map(|m| m.wall_ms).sum();
        let peak_aux = out.metrics.iter().map(|m| m.aux_bytes).max().unwrap_or(0);
        csv.push_str(&format!(
            "summary,{v},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            out.metrics.len(),
            wall,
            out.final_objective,
            total(|m| m.dist_comps),
            total(|m| m.prune_c1),
            total(|m| m.prune_c2),
            total(|m| m.prune_c3),
            total(|m| m.reassigned),
            total(|m| m.rows_req),
            total(|m| m.bytes_req),
            total(|m| m.bytes_read),
            total(|m| m.cache_hits),
            total(|m| m.cache_misses),
            peak_aux,
        ));
    }
    std::fs::write(&csv_path, csv).map_err(|e| e.to_string())?;

    // Axis-specific consistency checks.
    let mut pass = true;
    match args.axis {
        Axis::Prune => {
            let reference = &outputs[0].1;
            for (v, out) in &outputs[1..] {
                let same_iters = out.assign_hashes == reference.assign_hashes
                    && out.centroid_hashes == reference.centroid_hashes
                    && out.assignments == reference.assignments;
                if !same_iters {
                    pass = false;
                    eprintln!("losslessness violated by variant {v}");
                }
            }
            println!("losslessness: {}", if pass { "pass" } else { "fail" });
            let totals: Vec<(String, u64)> = outputs
                .iter()
                .map(|(v, o)| (v.clone(), o.metrics.iter().map(|m| m.dist_comps).sum()))
                .collect();
            for (v, t) in &totals {
                println!("dist_comps[{v}] = {t}");
            }
        }
        Axis::Scheduler | Axis::Threads => {
            let reference = &outputs[0].1;
            for (v, out) in &outputs[1..] {
                if out.assignments != reference.assignments {
                    pass = false;
                    eprintln!("variant {v} changed the assignment vector");
                }
            }
            println!(
                "output equivalence: {}",
                if pass { "pass" } else { "fail" }
            );
            for (v, out) in &outputs {
                let wall: f64 = out.metrics.iter().map(|m| m.wall_ms).sum();
                println!("wall_ms[{v}] = {wall:.3}");
            }
        }
        Axis::Cache => {
            let reference = &outputs[0].1;
            for (v, out) in &outputs[1..] {
                if out.assignments != reference.assignments {
                    pass = false;
                    eprintln!("variant {v} changed numeric results");
                }
            }
            println!(
                "backend neutrality: {}",
                if pass { "pass" } else { "fail" }
            );
            for (v, out) in &outputs {
                let bytes: u64 = out.metrics.iter().map(|m| m.bytes_read).sum();
                println!("bytes_read[{v}] = {bytes}");
            }
        }
    }
    println!("wrote {}", csv_path.display());
    Ok(pass)
}
