mod config;

use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use slablab::edgelist::EdgeList;
use slablab::limit_process::{gue_samples, z_samples, ZScheme};
use slablab::longest_path::{longest_free, slab_longest_free};
use slablab::regen_stats::{clt_check, estimate};
use slablab::sim_engine::{read_records, run, write_csv, Experiment, RunManifest, RunOptions};
use slablab::skeleton_scan::{buffer_for, scan_skeleton, scan_slab_skeleton};
use slablab::slab_analysis::{sandwich_check, SandwichVerdict};
use slablab::stats::{ks_critical, ks_two_sample, KsResult};
use slablab::*;

use config::{ConfigError, Format, Loaded, Overrides, Shape};

#[derive(Parser, Debug)]
#[command(name = "slablab", version, about = "Longest paths in random directed graphs on the line and on slabs")]
struct Cli {
    /// TOML config file; built-in defaults when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    replications: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, env = "SLABLAB_WORKERS")]
    workers: Option<usize>,
    #[arg(long, global = true)]
    window: Option<u64>,
    #[arg(long, global = true)]
    n: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample one window and write its edge list.
    Generate {
        #[arg(long)]
        slab: bool,
    },
    /// Longest free path per replication, or of one edge-list file.
    LongestPath {
        #[arg(long)]
        slab: bool,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Skeleton points and cycles per replication.
    Skeleton {
        #[arg(long)]
        slab: bool,
    },
    /// Exact Γ₀ traces, one JSON line per replication.
    Gamma0,
    /// Regenerative estimates of λ, C and σ².
    Estimate,
    /// Functional CLT check on the line.
    CltCheck,
    /// Sandwich bounds on slab windows.
    Slab,
    /// Limit functional of a chain against the GUE largest eigenvalue.
    GueCompare,
    /// Evaluate conditions C1, C2 and C3 for the model.
    CheckConditions,
}

enum Failure {
    Config(String),
    Verdict(String),
    Ceiling(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        let mut root = &e;
        while let Error::Replication { source, .. } = root {
            root = source;
        }
        match root {
            Error::IterationCeiling { .. }
            | Error::EigenNoConvergence { .. }
            | Error::WindowTooLarge { .. }
            | Error::NonconvergentCheck(_)
            | Error::Interrupted { .. } => Failure::Ceiling(msg),
            _ => Failure::Config(msg),
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (code, kind, msg) = match f {
                Failure::Config(m) => (1, "error", m),
                Failure::Verdict(m) => (2, "verdict", m),
                Failure::Ceiling(m) => (3, "ceiling", m),
            };
            eprintln!("slablab: {kind}: {msg}");
            ExitCode::from(code)
        }
    }
}

fn dispatch(cli: &Cli) -> Outcome {
    let overrides = Overrides {
        seed: cli.seed,
        replications: cli.replications,
        out: cli.out.clone(),
        workers: cli.workers,
        window: cli.window,
        n: cli.n,
    };
    let l = config::load(cli.config.as_deref(), &overrides)?;
    eprintln!(
        "conditions: C1 {} C2 {} C3 {}",
        mark(l.conditions.c1),
        mark(l.conditions.c2()),
        mark(l.conditions.c3())
    );
    match &cli.command {
        Command::Generate { slab } => generate(&l, *slab),
        Command::LongestPath { slab, input: Some(p) } => longest_path_file(&l, p, *slab),
        Command::LongestPath { slab, input: None } => batch(&l, &Paths { l: &l, slab: *slab }),
        Command::Skeleton { slab } => batch(&l, &Skeletons { l: &l, slab: *slab, buffer: skeleton_buffer(&l)? }),
        Command::Gamma0 => {
            if l.config.output.format == Format::Csv {
                return Err(Failure::Config("output.format: gamma0 traces hold lists; use jsonl".into()));
            }
            batch(&l, &Gamma0 { l: &l })
        }
        Command::Estimate => {
            let e = &l.config.experiment;
            let est = estimate(&l.line, e.window as usize, e.replications as usize, SeedTag::new(e.seed, 0), e.eps)?;
            emit(&l, "estimate", &est)
        }
        Command::CltCheck => clt(&l),
        Command::Slab => slab(&l),
        Command::GueCompare => gue_compare(&l),
        Command::CheckConditions => check_conditions(&l),
    }
}

fn mark(b: bool) -> &'static str {
    if b {
        "✓"
    } else {
        "✗"
    }
}

fn out_dir(l: &Loaded) -> Result<&Path> {
    let d = &l.config.output.dir;
    fs::create_dir_all(d)?;
    Ok(d)
}

fn emit<T: Serialize>(l: &Loaded, name: &str, value: &T) -> Outcome {
    let path = out_dir(l)?.join(format!("{name}.json"));
    let text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    fs::write(&path, format!("{text}\n")).map_err(Error::from)?;
    println!("{text}");
    Ok(())
}

fn skeleton_buffer(l: &Loaded) -> Result<u64> {
    let e = &l.config.experiment;
    match e.buffer {
        Some(b) => Ok(b),
        None => buffer_for(&l.line, e.eps, e.window),
    }
}

fn generate(l: &Loaded, slab: bool) -> Outcome {
    let e = &l.config.experiment;
    let seed = SeedTag::new(e.seed, 0);
    let hi = e.window as i64 - 1;
    let list = if slab {
        EdgeList::from_slab(&sample_slab_window(&l.slab, 0, hi, seed)?, &l.line.model_hash(), Some(seed))
    } else {
        EdgeList::from_line(&sample_window(&l.line, 0, hi, seed)?, &l.line.model_hash(), Some(seed))
    };
    let path = out_dir(l)?.join(if slab { "slab.edges" } else { "line.edges" });
    list.write(File::create(&path).map_err(Error::from)?)?;
    println!("{}", path.display());
    Ok(())
}

fn longest_path_file(l: &Loaded, input: &Path, slab: bool) -> Outcome {
    if slab {
        return Err(Failure::Config("--input reads line edge lists only".into()));
    }
    let list = EdgeList::read(BufReader::new(File::open(input).map_err(Error::from)?))?;
    let g = list.to_line_graph()?;
    emit(l, "longest-path", &longest_free(&g, true))
}

/// Runs an experiment through the checkpointed engine and converts to CSV on request.
fn batch<E: Experiment>(l: &Loaded, exp: &E) -> Outcome
where
    E::Record: Serialize,
{
    let e = &l.config.experiment;
    let manifest = RunManifest::new(exp.name(), &l.config, e.seed, e.replications)?;
    let dir = out_dir(l)?;
    let outcome = run(exp, &manifest, dir, &RunOptions { workers: l.config.output.workers, stop_after: None })?;
    let path = if l.config.output.format == Format::Csv {
        let rows: Vec<E::Record> = read_records(&outcome.records)?;
        let csv = outcome.records.with_extension("csv");
        write_csv(&csv, &rows)?;
        csv
    } else {
        outcome.records
    };
    println!("{} records in {}", outcome.completed, path.display());
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct PathRecord {
    replication: u64,
    length: u32,
}

struct Paths<'a> {
    l: &'a Loaded,
    slab: bool,
}

impl Experiment for Paths<'_> {
    type Record = PathRecord;

    fn name(&self) -> &str {
        "longest-path"
    }

    fn replicate(&self, seed: SeedTag) -> Result<PathRecord> {
        let hi = self.l.config.experiment.window as i64 - 1;
        let length = if self.slab {
            slab_longest_free(&sample_slab_window(&self.l.slab, 0, hi, seed)?, false).length
        } else {
            longest_free(&sample_window(&self.l.line, 0, hi, seed)?, false).length
        };
        Ok(PathRecord { replication: seed.replication, length })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SkeletonRecord {
    replication: u64,
    buffer: u64,
    core_lo: i64,
    core_hi: i64,
    points: usize,
    cycles: usize,
    rate: f64,
    first: Option<i64>,
    last: Option<i64>,
}

struct Skeletons<'a> {
    l: &'a Loaded,
    slab: bool,
    buffer: u64,
}

impl Experiment for Skeletons<'_> {
    type Record = SkeletonRecord;

    fn name(&self) -> &str {
        "skeleton"
    }

    fn replicate(&self, seed: SeedTag) -> Result<SkeletonRecord> {
        let hi = self.l.config.experiment.window as i64 - 1;
        let rep = if self.slab {
            scan_slab_skeleton(&sample_slab_window(&self.l.slab, 0, hi, seed)?, self.buffer)?.report
        } else {
            scan_skeleton(&sample_window(&self.l.line, 0, hi, seed)?, &self.l.line, self.buffer)?
        };
        Ok(SkeletonRecord {
            replication: seed.replication,
            buffer: rep.buffer,
            core_lo: rep.core.0,
            core_hi: rep.core.1,
            points: rep.points.len(),
            cycles: rep.cycles.len(),
            rate: rep.rate(),
            first: rep.points.first().copied(),
            last: rep.points.last().copied(),
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Gamma0Record {
    #[serde(rename = "K")]
    k: usize,
    sigmas: Vec<u64>,
    #[serde(rename = "M")]
    m: u64,
    #[serde(rename = "J")]
    j: usize,
    gamma0: i64,
}

struct Gamma0<'a> {
    l: &'a Loaded,
}

impl Experiment for Gamma0<'_> {
    type Record = Gamma0Record;

    fn name(&self) -> &str {
        "gamma0"
    }

    fn replicate(&self, seed: SeedTag) -> Result<Gamma0Record> {
        let t = construct_gamma0(&self.l.line, seed, self.l.config.gamma_options())?;
        Ok(Gamma0Record { k: t.k(), sigmas: t.sigmas.clone(), m: t.m, j: t.j, gamma0: t.gamma0 })
    }
}

fn clt(l: &Loaded) -> Outcome {
    let e = &l.config.experiment;
    let est = estimate(&l.line, e.window as usize, e.replications as usize, SeedTag::new(e.seed, 0), e.eps)?;
    let rep = clt_check(&l.line, e.n as usize, &e.t_grid, e.replications as usize, &est, SeedTag::new(e.seed, 1), e.alpha)?;
    emit(l, "clt-check", &rep)?;
    if rep.ks_pass && rep.ratio_pass {
        Ok(())
    } else {
        Err(Failure::Verdict(format!("CLT check failed (ks {}, variance ratio {})", rep.ks_pass, rep.ratio_pass)))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SlabRecord {
    replication: u64,
    /// `None` when the window had no skeleton point to bracket the range.
    verdict: Option<SandwichVerdict>,
}

struct Sandwich<'a> {
    l: &'a Loaded,
    h: HasseDiagram,
    buffer: u64,
}

impl Experiment for Sandwich<'_> {
    type Record = SlabRecord;

    fn name(&self) -> &str {
        "slab"
    }

    fn replicate(&self, seed: SeedTag) -> Result<SlabRecord> {
        let e = &self.l.config.experiment;
        let (w, m) = (e.window as i64, e.margin as i64);
        let g = sample_slab_window(&self.l.slab, -m, w + m, seed)?;
        let verdict = match sandwich_check(&g, (0, w), self.buffer, &self.h) {
            Ok(v) => Some(v),
            Err(Error::TooFewSkeletonPoints { .. }) => None,
            Err(e) => return Err(e),
        };
        Ok(SlabRecord { replication: seed.replication, verdict })
    }
}

fn slab(l: &Loaded) -> Outcome {
    if l.config.output.format == Format::Csv {
        return Err(Failure::Config("output.format: slab verdicts are nested; use jsonl".into()));
    }
    let exp = Sandwich { l, h: build_hasse(&l.slab.poset)?, buffer: skeleton_buffer(l)? };
    batch(l, &exp)?;
    let records: Vec<SlabRecord> = read_records(&l.config.output.dir.join("slab.jsonl"))?;
    let violations = records.iter().filter(|r| r.verdict.as_ref().is_some_and(|v| !v.holds())).count();
    let skipped = records.iter().filter(|r| r.verdict.is_none()).count();
    println!("{} samples, {violations} violations, {skipped} without bracketing points", records.len());
    if violations > 0 {
        return Err(Failure::Verdict(format!("sandwich bound violated on {violations} samples")));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct GueReport {
    dim: usize,
    samples: usize,
    grid_steps: u64,
    ks: KsResult,
    critical: f64,
    alpha: f64,
}

fn gue_compare(l: &Loaded) -> Outcome {
    if l.config.poset.shape != Shape::Chain {
        return Err(Failure::Config("poset.shape: the GUE comparison needs a chain".into()));
    }
    let e = &l.config.experiment;
    let levels = l.slab.poset.len();
    let dim = e.dim.unwrap_or(levels);
    let h = build_hasse(&l.slab.poset)?;
    let count = e.z_count as usize;
    let z = z_samples(&h, levels, 1.0, e.grid_steps as usize, ZScheme::BridgeRefined, count, SeedTag::new(e.seed, 0))?;
    let g = gue_samples(dim, count, SeedTag::new(e.seed, 1))?;
    let ks = ks_two_sample(&z, &g)?;
    let rep = GueReport { dim, samples: count, grid_steps: e.grid_steps, ks, critical: ks_critical(e.alpha, count, count), alpha: e.alpha };
    emit(l, "gue-compare", &rep)?;
    if rep.ks.statistic < rep.critical {
        Ok(())
    } else {
        Err(Failure::Verdict(format!("KS statistic {:.4} at or above {:.4}", rep.ks.statistic, rep.critical)))
    }
}

fn check_conditions(l: &Loaded) -> Outcome {
    let c = &l.conditions;
    println!("C1 {} C2 {} C3 {}", mark(c.c1), mark(c.c2()), mark(c.c3()));
    println!("{}", serde_json::to_string(c).map_err(Error::from)?);
    if c.c1 && c.c2() {
        Ok(())
    } else {
        Err(Failure::Verdict("the model fails C1 or C2".into()))
    }
}
