//! Replication orchestration: per-replication streams, a worker pool,
//! index-ordered merging, JSON-lines/CSV output and checkpointed resume.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::stream::SeedTag;

pub const WORKERS_ENV: &str = "SLABLAB_WORKERS";
pub const CHECKPOINT_EVERY: u64 = 64;
const MANIFEST_FILE: &str = "manifest.json";

/// One unit of work, a pure function of its stream.
pub trait Experiment: Sync {
    type Record: Serialize + DeserializeOwned + Send;

    fn name(&self) -> &str;

    fn replicate(&self, seed: SeedTag) -> Result<Self::Record>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: String,
    pub config_hash: String,
    pub seed: u64,
    pub replications: u64,
    pub versions: BTreeMap<String, String>,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(experiment: &str, config: &impl Serialize, seed: u64, replications: u64) -> Result<Self> {
        let bytes = serde_json::to_vec(config)?;
        let digest = Sha256::digest(&bytes);
        let config_hash = digest.iter().take(16).map(|b| format!("{b:02x}")).collect();
        let versions = ["graph_gen", "longest_path", "skeleton_scan", "gamma_zero", "regen_stats", "slab_analysis", "limit_process"]
            .into_iter()
            .map(|m| (m.to_string(), env!("CARGO_PKG_VERSION").to_string()))
            .collect();
        Ok(Self {
            experiment: experiment.to_string(),
            config_hash,
            seed,
            replications,
            versions,
            outputs: vec![PathBuf::from(format!("{experiment}.jsonl"))],
        })
    }

    pub fn records_path(&self, dir: &Path) -> PathBuf {
        dir.join(&self.outputs[0])
    }
}

/// Worker count from the environment, defaulting to the available parallelism.
pub fn workers_from_env() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs replications `range` on `workers` threads. Records come back in index
/// order; the error reported is the one with the smallest replication index.
pub fn replicate<E: Experiment>(exp: &E, seed: u64, range: std::ops::Range<u64>, workers: usize) -> Result<Vec<E::Record>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    let results: Vec<Result<E::Record>> = pool.install(|| {
        range
            .clone()
            .into_par_iter()
            .map(|r| exp.replicate(SeedTag::new(seed, r)))
            .collect()
    });
    results
        .into_iter()
        .zip(range)
        .map(|(res, r)| res.map_err(|e| Error::Replication { replication: r, source: Box::new(e) }))
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub workers: usize,
    /// Stop with [`Error::Interrupted`] once this many replications are on disk.
    pub stop_after: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOutcome {
    pub completed: u64,
    pub resumed_from: u64,
    pub records: PathBuf,
}

fn partial_path(records: &Path) -> PathBuf {
    let mut p = records.as_os_str().to_owned();
    p.push(".partial");
    PathBuf::from(p)
}

fn count_lines(path: &Path) -> Result<u64> {
    let f = File::open(path)?;
    let mut n = 0;
    for line in BufReader::new(f).lines() {
        line?;
        n += 1;
    }
    Ok(n)
}

/// Executes a manifest into `dir`, resuming from a matching checkpoint.
pub fn run<E: Experiment>(exp: &E, manifest: &RunManifest, dir: &Path, opts: &RunOptions) -> Result<RunOutcome> {
    fs::create_dir_all(dir)?;
    let manifest_path = dir.join(MANIFEST_FILE);
    let records = manifest.records_path(dir);
    let partial = partial_path(&records);
    let mut done = 0;
    if partial.exists() && manifest_path.exists() {
        let prev: RunManifest = serde_json::from_reader(File::open(&manifest_path)?)?;
        if &prev == manifest {
            done = count_lines(&partial)?;
        }
    }
    if done == 0 {
        File::create(&partial)?;
    }
    let resumed_from = done;
    write_manifest(manifest, &manifest_path)?;
    let workers = if opts.workers == 0 { workers_from_env() } else { opts.workers };
    while done < manifest.replications {
        if opts.stop_after.is_some_and(|s| done >= s) {
            return Err(Error::Interrupted { completed: done, total: manifest.replications });
        }
        let hi = (done + CHECKPOINT_EVERY).min(manifest.replications);
        let batch = replicate(exp, manifest.seed, done..hi, workers)?;
        let mut w = BufWriter::new(OpenOptions::new().append(true).open(&partial)?);
        for rec in &batch {
            serde_json::to_writer(&mut w, rec)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        done = hi;
    }
    fs::rename(&partial, &records)?;
    Ok(RunOutcome { completed: done, resumed_from, records })
}

fn write_manifest(m: &RunManifest, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, m)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_records<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    BufReader::new(File::open(path)?)
        .lines()
        .map(|l| Ok(serde_json::from_str(&l?)?))
        .collect()
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in rows {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Count, sum and sum of squares; merging is associative and commutative up to float rounding,
/// so merges are always taken in replication order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(self, other: Self) -> Self {
        Self { count: self.count + other.count, sum: self.sum + other.sum, sum_sq: self.sum_sq + other.sum_sq }
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.count as f64
    }

    pub fn variance(&self) -> f64 {
        let n = self.count as f64;
        (self.sum_sq - self.sum * self.sum / n) / (n - 1.0)
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Self::default();
        for x in iter {
            m.push(x);
        }
        m
    }
}
