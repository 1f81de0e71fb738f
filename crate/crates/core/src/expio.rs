//! Synthetic experiment runs: shuffled jobs, shot counts, aggregation and
//! the on-disk layout (`manifest.json` plus one `job-<k>.jsonl` per job).

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates::{Angle, CircuitSpec, GRID_INDICES, GRID_SIZE};
use crate::models::ModelConfig;
use crate::stats::{sample_counts_with, AngleSeries};

pub const SCHEMA_VERSION: u32 = 1;
pub const MAX_SHOTS: u64 = 100_000;
pub const MANIFEST_FILE: &str = "manifest.json";

/// One experiment protocol: every job sweeps the angle grid once in shuffled order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobSpec {
    pub n_gates: u32,
    pub shots_per_circuit: u64,
    pub circuits_per_angle: u64,
    /// Grid indices `j` of the angles `j pi / 8`.
    pub angle_grid: Vec<i32>,
    pub shuffle_seed: u64,
    pub sample_seed: u64,
    pub model: ModelConfig,
}

impl JobSpec {
    /// Full grid with both seeds split off `master_seed`.
    pub fn new(
        n_gates: u32,
        shots_per_circuit: u64,
        circuits_per_angle: u64,
        master_seed: u64,
        model: ModelConfig,
    ) -> Self {
        Self {
            n_gates,
            shots_per_circuit,
            circuits_per_angle,
            angle_grid: GRID_INDICES.collect(),
            shuffle_seed: derive_seed(master_seed, 0),
            sample_seed: derive_seed(master_seed, 1),
            model,
        }
    }

    pub fn validate(&self) -> Result<()> {
        CircuitSpec::new(self.n_gates, Angle::new(0.0))?;
        if !(1..=MAX_SHOTS).contains(&self.shots_per_circuit) {
            return Err(Error::invalid(format!(
                "shots_per_circuit = {} outside [1, {MAX_SHOTS}]",
                self.shots_per_circuit
            )));
        }
        if self.circuits_per_angle == 0 {
            return Err(Error::invalid("circuits_per_angle must be >= 1"));
        }
        if self.angle_grid.is_empty() {
            return Err(Error::invalid("angle grid is empty"));
        }
        let mut seen = [false; GRID_SIZE];
        for &j in &self.angle_grid {
            if !GRID_INDICES.contains(&j) {
                return Err(Error::invalid(format!("angle index {j} outside -7..=8")));
            }
            let slot = (j + 7) as usize;
            if seen[slot] {
                return Err(Error::invalid(format!("angle index {j} listed twice")));
            }
            seen[slot] = true;
        }
        self.model.validate()
    }

    pub fn trials_per_record(&self) -> u64 {
        self.shots_per_circuit * self.circuits_per_angle
    }
}

/// Counts of outcome 1 for one angle within one job.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountsRecord {
    pub job_id: String,
    pub n_gates: u32,
    pub theta_index: i32,
    pub ones: u64,
    pub total: u64,
    pub position_in_job: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorNotes {
    pub rng: String,
    pub sampler: String,
    pub normal_approximation: bool,
    pub seed_derivation: String,
}

impl Default for GeneratorNotes {
    fn default() -> Self {
        Self {
            rng: "chacha20".into(),
            sampler: "exact binomial, one draw of shots*circuits trials per angle and job".into(),
            normal_approximation: false,
            seed_derivation: "splitmix64(seed + job_index * 0x9e3779b97f4a7c15)".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub created: String,
    pub master_seed: u64,
    pub jobs: u32,
    pub job: JobSpec,
    pub generator: GeneratorNotes,
}

impl RunManifest {
    pub fn new(job: JobSpec, jobs: u32, master_seed: u64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            created: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            master_seed,
            jobs,
            job,
            generator: GeneratorNotes::default(),
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Counter-based split: stream `k` of `seed`.
pub fn derive_seed(seed: u64, k: u64) -> u64 {
    splitmix64(seed.wrapping_add(k.wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

pub fn job_id(job_index: u32) -> String {
    format!("job-{job_index}")
}

/// Execution order of the angle indices in one job.
pub fn shuffled_order(spec: &JobSpec, job_index: u32) -> Vec<i32> {
    let mut order = spec.angle_grid.clone();
    let mut rng = ChaCha20Rng::seed_from_u64(derive_seed(spec.shuffle_seed, job_index as u64));
    order.shuffle(&mut rng);
    order
}

/// Model probability for every angle of the grid, in `angle_grid` order.
pub fn probability_table(spec: &JobSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    spec.angle_grid
        .par_iter()
        .map(|&j| spec.model.probability(spec.n_gates, Angle::from_index(j)))
        .collect()
}

/// Records of one job given the precomputed [`probability_table`].
pub fn simulate_job_with_table(
    spec: &JobSpec,
    job_index: u32,
    table: &[f64],
) -> Result<Vec<CountsRecord>> {
    let order = shuffled_order(spec, job_index);
    let mut rng = ChaCha20Rng::seed_from_u64(derive_seed(spec.sample_seed, job_index as u64));
    let total = spec.trials_per_record();
    let id = job_id(job_index);
    order
        .iter()
        .enumerate()
        .map(|(position, &j)| {
            let slot = spec
                .angle_grid
                .iter()
                .position(|&x| x == j)
                .expect("order is a permutation of the grid");
            Ok(CountsRecord {
                job_id: id.clone(),
                n_gates: spec.n_gates,
                theta_index: j,
                ones: sample_counts_with(&mut rng, table[slot], total)?,
                total,
                position_in_job: position as u32,
            })
        })
        .collect()
}

/// Records of one job, in execution order. Deterministic in `(spec, job_index)`.
pub fn simulate_job(spec: &JobSpec, job_index: u32) -> Result<Vec<CountsRecord>> {
    let table = probability_table(spec)?;
    simulate_job_with_table(spec, job_index, &table)
}

/// All jobs of a run; the model is evaluated once and jobs are sampled in parallel.
pub fn simulate_run(spec: &JobSpec, jobs: u32) -> Result<Vec<Vec<CountsRecord>>> {
    let table = probability_table(spec)?;
    (0..jobs)
        .into_par_iter()
        .map(|k| simulate_job_with_table(spec, k, &table))
        .collect()
}

/// Pools records per angle over jobs into a full-grid series.
pub fn aggregate(records: &[CountsRecord]) -> Result<AngleSeries> {
    let first = records
        .first()
        .ok_or_else(|| Error::invalid("no counts records"))?;
    let mut ones = [0u64; GRID_SIZE];
    let mut totals = [0u64; GRID_SIZE];
    for r in records {
        if r.n_gates != first.n_gates {
            return Err(Error::MixedGates(first.n_gates, r.n_gates));
        }
        if !GRID_INDICES.contains(&r.theta_index) {
            return Err(Error::invalid(format!(
                "theta_index {} outside -7..=8",
                r.theta_index
            )));
        }
        if r.ones > r.total {
            return Err(Error::invalid(format!(
                "{}: ones {} exceeds total {}",
                r.job_id, r.ones, r.total
            )));
        }
        let slot = (r.theta_index + 7) as usize;
        ones[slot] += r.ones;
        totals[slot] += r.total;
    }
    let missing: Vec<i32> = GRID_INDICES
        .filter(|j| totals[(j + 7) as usize] == 0)
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingAngles(missing));
    }
    let angles = GRID_INDICES.map(Angle::from_index).collect();
    Ok(AngleSeries::from_counts(angles, &ones, &totals)?.with_n_gates(first.n_gates))
}

pub fn write_counts(records: &[CountsRecord], path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_counts(path: &Path) -> Result<Vec<CountsRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CountsRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: k + 1,
            message: e.to_string(),
        })?;
        if record.ones > record.total {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: k + 1,
                message: format!("ones {} exceeds total {}", record.ones, record.total),
            });
        }
        records.push(record);
    }
    Ok(records)
}

pub fn write_manifest(manifest: &RunManifest, dir: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest)?;
    fs::write(dir.join(MANIFEST_FILE), text + "\n")?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path)?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let found = value
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::Parse {
            path: path.display().to_string(),
            line: 1,
            message: "missing schema_version".into(),
        })?;
    if found != SCHEMA_VERSION as u64 {
        return Err(Error::SchemaMismatch {
            found: found as u32,
            expected: SCHEMA_VERSION,
        });
    }
    serde_json::from_value(value).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: 0,
        message: e.to_string(),
    })
}

pub fn job_file(dir: &Path, job_index: u32) -> PathBuf {
    dir.join(format!("{}.jsonl", job_id(job_index)))
}

/// Writes the manifest, then one counts file per job.
pub fn write_run(dir: &Path, manifest: &RunManifest, jobs: &[Vec<CountsRecord>]) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_manifest(manifest, dir)?;
    for (k, records) in jobs.iter().enumerate() {
        write_counts(records, &job_file(dir, k as u32))?;
    }
    Ok(())
}

/// Counts files of a run directory: `job-<k>.jsonl` in numeric order, then
/// any other `*.jsonl` by name.
pub fn counts_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<(Option<u64>, String, PathBuf)> = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("jsonl") {
            continue;
        }
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("")
            .to_string();
        let index = stem.strip_prefix("job-").and_then(|s| s.parse().ok());
        files.push((index, stem, path));
    }
    files.sort_by(|a, b| match (a.0, b.0) {
        (Some(x), Some(y)) => x.cmp(&y),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.1.cmp(&b.1),
    });
    Ok(files.into_iter().map(|f| f.2).collect())
}

/// A run read back from disk. The manifest is optional so externally
/// converted counts can be analysed.
#[derive(Clone, Debug)]
pub struct LoadedRun {
    pub manifest: Option<RunManifest>,
    pub records: Vec<CountsRecord>,
}

impl LoadedRun {
    pub fn series(&self) -> Result<AngleSeries> {
        aggregate(&self.records)
    }

    pub fn n_gates(&self) -> Option<u32> {
        self.records.first().map(|r| r.n_gates)
    }
}

pub fn read_run(dir: &Path) -> Result<LoadedRun> {
    if !dir.is_dir() {
        return Err(Error::invalid(format!(
            "{} is not a directory",
            dir.display()
        )));
    }
    let manifest = if dir.join(MANIFEST_FILE).exists() {
        Some(read_manifest(dir)?)
    } else {
        None
    };
    let files = counts_files(dir)?;
    if files.is_empty() {
        return Err(Error::invalid(format!(
            "no counts files in {}",
            dir.display()
        )));
    }
    let mut records = Vec::new();
    for f in files {
        records.extend(read_counts(&f)?);
    }
    if records.is_empty() {
        return Err(Error::invalid(format!(
            "no counts records in {}",
            dir.display()
        )));
    }
    Ok(LoadedRun { manifest, records })
}
