//! Monte Carlo driver: independent sample runs and expectation estimators.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{EstimateError, McError};
use crate::randfield::{
    derive_stream, sample_affine_uniform, sample_constant, sample_kl_field, ConductivityKind,
    ConductivitySample,
};
use crate::space::Spaces;
use crate::stepper::{run_sample_on, RunConfig};
use crate::verify::{
    build_affine_k_problem, build_constant_k_problem, error_norms, ManufacturedProblem, ReportRow,
};

/// How each sample's conductivity is drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SamplerSpec {
    Constant {
        k: f64,
    },
    AffineUniform {
        sigma: f64,
    },
    KlField {
        a0: f64,
        sigma: f64,
        n_f: usize,
        l_c: f64,
    },
}

impl SamplerSpec {
    /// Draws sample `j` from its own stream.
    pub fn draw(
        &self,
        base_seed: u64,
        j: usize,
    ) -> Result<ConductivitySample, crate::error::SampleError> {
        let mut rng = derive_stream(base_seed, j);
        let s = match *self {
            SamplerSpec::Constant { k } => sample_constant(k)?,
            SamplerSpec::AffineUniform { sigma } => sample_affine_uniform(sigma, &mut rng)?,
            SamplerSpec::KlField {
                a0,
                sigma,
                n_f,
                l_c,
            } => sample_kl_field(a0, sigma, n_f, l_c, &mut rng)?,
        };
        Ok(s.with_index(j))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McPlan {
    /// Number of samples `J`.
    pub samples: usize,
    pub base_seed: u64,
    pub sampler: SamplerSpec,
    pub run: RunConfig,
    /// Amplitude `a` of the manufactured solution.
    #[serde(default = "unit")]
    pub amplitude: f64,
}

fn unit() -> f64 {
    1.0
}

impl McPlan {
    pub fn validate(&self) -> Result<usize, McError> {
        if self.samples == 0 {
            return Err(McError::InvalidPlan(
                "sample count J must be at least 1".into(),
            ));
        }
        self.run
            .validate()
            .map_err(|e| McError::InvalidPlan(e.to_string()))
    }

    /// SHA-256 of the plan's JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("plan serializes");
        sha256_hex(&json)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Exact solution matched to a draw: constant `k` gives the constant-`k`
/// family, an affine draw gives the `λ`-dependent family.
pub fn matched_problem(
    sample: &ConductivitySample,
    a: f64,
) -> Result<ManufacturedProblem, McError> {
    match &sample.kind {
        ConductivityKind::Constant { k } => Ok(build_constant_k_problem(*k, a)),
        ConductivityKind::AffineUniform { sigma, lambda } => {
            Ok(build_affine_k_problem(*lambda, *sigma, a))
        }
        ConductivityKind::KlField { .. } => Err(McError::InvalidPlan(
            "no closed-form solution is available for series conductivity fields".into(),
        )),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub j: usize,
    pub seed: u64,
    pub k_min: f64,
    pub k_max: f64,
    pub lambda: Option<[f64; 2]>,
    /// L2 errors of `(u_f, p_f, θ_f, u_p, φ_p, θ_p)`.
    pub l2: [f64; 6],
    /// Energy errors, same order.
    pub energy: [f64; 6],
    pub hdiv_up: f64,
}

pub const RECORD_HEADER: &str = "j,seed,k_min,k_max,lambda1,lambda2,\
l2_uf,l2_pf,l2_thf,l2_up,l2_phip,l2_thp,\
en_uf,en_pf,en_thf,en_up,en_phip,en_thp,hdiv_up";

impl SampleRecord {
    pub fn csv_row(&self) -> String {
        let mut cells = vec![
            self.j.to_string(),
            self.seed.to_string(),
            format!("{:e}", self.k_min),
            format!("{:e}", self.k_max),
        ];
        match self.lambda {
            Some(l) => cells.extend(l.iter().map(|v| format!("{v:e}"))),
            None => cells.extend([String::new(), String::new()]),
        }
        cells.extend(
            self.l2
                .iter()
                .chain(self.energy.iter())
                .map(|v| format!("{v:e}")),
        );
        cells.push(format!("{:e}", self.hdiv_up));
        cells.join(",")
    }

    pub fn parse_row(line: &str) -> Result<Self, McError> {
        let bad = |what: &str| McError::Record(format!("{what} in `{line}`"));
        let cells: Vec<&str> = line.trim().split(',').collect();
        if cells.len() != 19 {
            return Err(bad("expected 19 cells"));
        }
        let num = |i: usize| {
            cells[i]
                .parse::<f64>()
                .map_err(|_| bad(&format!("bad number in column {i}")))
        };
        let lambda = match (cells[4].is_empty(), cells[5].is_empty()) {
            (true, true) => None,
            (false, false) => Some([num(4)?, num(5)?]),
            _ => return Err(bad("half-filled lambda")),
        };
        let mut l2 = [0.0; 6];
        let mut energy = [0.0; 6];
        for i in 0..6 {
            l2[i] = num(6 + i)?;
            energy[i] = num(12 + i)?;
        }
        Ok(Self {
            j: cells[0].parse().map_err(|_| bad("bad sample index"))?,
            seed: cells[1].parse().map_err(|_| bad("bad seed"))?,
            k_min: num(2)?,
            k_max: num(3)?,
            lambda,
            l2,
            energy,
            hdiv_up: num(18)?,
        })
    }
}

/// Root mean squares over the samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McAggregate {
    pub l2: [f64; 6],
    pub energy: [f64; 6],
    pub hdiv_up: f64,
}

impl McAggregate {
    pub fn from_records(records: &[SampleRecord]) -> Result<Self, EstimateError> {
        let col = |f: &dyn Fn(&SampleRecord) -> f64| {
            estimate_rms(&records.iter().map(|r| f(r).powi(2)).collect::<Vec<_>>())
        };
        let mut l2 = [0.0; 6];
        let mut energy = [0.0; 6];
        for i in 0..6 {
            l2[i] = col(&|r| r.l2[i])?;
            energy[i] = col(&|r| r.energy[i])?;
        }
        Ok(Self {
            l2,
            energy,
            hdiv_up: col(&|r| r.hdiv_up)?,
        })
    }

    /// Row in the table layout keyed by `key` (mesh size or step).
    pub fn report_row(&self, key: f64) -> ReportRow {
        let pick = |v: &[f64; 6]| crate::verify::TABLE_FIELDS.map(|i| v[i]);
        ReportRow {
            key,
            l2: pick(&self.l2),
            energy: pick(&self.energy),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McMetadata {
    pub base_seed: u64,
    pub samples: usize,
    pub config_hash: String,
    pub generator: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    /// Sorted by sample index.
    pub records: Vec<SampleRecord>,
    pub aggregate: McAggregate,
    pub metadata: McMetadata,
}

impl McResult {
    pub fn write_records_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{RECORD_HEADER}")?;
        for r in &self.records {
            writeln!(w, "{}", r.csv_row())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct McOptions {
    /// Worker threads; 0 uses the rayon default.
    pub jobs: usize,
    /// Directory for per-sample records; completed samples found there are skipped.
    pub records_dir: Option<PathBuf>,
}

const HASH_FILE: &str = "plan.sha256";

fn record_path(dir: &Path, j: usize) -> PathBuf {
    dir.join(format!("sample_{j:06}.csv"))
}

fn load_record(dir: &Path, j: usize, seed: u64) -> Result<Option<SampleRecord>, McError> {
    let path = record_path(dir, j);
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path)?;
    let mut lines = text.lines();
    if lines.next() != Some(RECORD_HEADER) {
        return Err(McError::Record(format!(
            "{} has an unexpected header",
            path.display()
        )));
    }
    let row = lines
        .next()
        .ok_or_else(|| McError::Record(format!("{} has no data row", path.display())))?;
    let rec = SampleRecord::parse_row(row)?;
    if rec.j != j || rec.seed != seed {
        return Err(McError::Record(format!(
            "{} belongs to another sample",
            path.display()
        )));
    }
    Ok(Some(rec))
}

fn store_record(dir: &Path, rec: &SampleRecord) -> Result<(), McError> {
    let path = record_path(dir, rec.j);
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, format!("{RECORD_HEADER}\n{}\n", rec.csv_row()))?;
    fs::rename(&tmp, &path)?;
    Ok(())
}

fn prepare_dir(dir: &Path, hash: &str) -> Result<(), McError> {
    fs::create_dir_all(dir)?;
    let marker = dir.join(HASH_FILE);
    if marker.exists() {
        let old = fs::read_to_string(&marker)?;
        if old.trim() != hash {
            return Err(McError::InvalidPlan(format!(
                "{} holds records of a different plan",
                dir.display()
            )));
        }
    } else {
        fs::write(&marker, format!("{hash}\n"))?;
    }
    Ok(())
}

/// One sample: draw, march to `T`, measure errors against the matched exact solution.
pub fn run_one(plan: &McPlan, spaces: &Spaces, j: usize) -> Result<SampleRecord, McError> {
    let wrap = |e: Box<dyn std::error::Error + Send + Sync>| McError::Sample { j, source: e };
    let sample = plan
        .sampler
        .draw(plan.base_seed, j)
        .map_err(|e| wrap(Box::new(e)))?;
    let problem = matched_problem(&sample, plan.amplitude)?.with_params(plan.run.params);
    let (state, _) =
        run_sample_on(spaces, &plan.run, &sample, &problem).map_err(|e| wrap(Box::new(e)))?;
    let err = error_norms(spaces, &state, &problem, state.t);
    Ok(SampleRecord {
        j,
        seed: plan.base_seed,
        k_min: sample.bounds.0,
        k_max: sample.bounds.1,
        lambda: sample.lambda(),
        l2: err.l2,
        energy: err.energy,
        hdiv_up: err.hdiv_up,
    })
}

/// Runs all `J` samples in parallel and aggregates after every sample has finished.
pub fn run_mc(plan: &McPlan, options: &McOptions) -> Result<McResult, McError> {
    plan.validate()?;
    let hash = plan.hash();
    if let Some(dir) = &options.records_dir {
        prepare_dir(dir, &hash)?;
    }
    let spaces = plan
        .run
        .spaces()
        .map_err(|e| McError::InvalidPlan(e.to_string()))?;
    let work = |j: usize| -> Result<SampleRecord, McError> {
        if let Some(dir) = &options.records_dir {
            if let Some(rec) = load_record(dir, j, plan.base_seed)? {
                return Ok(rec);
            }
        }
        let rec = run_one(plan, &spaces, j)?;
        if let Some(dir) = &options.records_dir {
            store_record(dir, &rec)?;
        }
        Ok(rec)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.jobs)
        .build()
        .map_err(|e| McError::InvalidPlan(format!("thread pool: {e}")))?;
    let outcomes: Vec<Result<SampleRecord, McError>> =
        pool.install(|| (0..plan.samples).into_par_iter().map(work).collect());
    let records = outcomes.into_iter().collect::<Result<Vec<_>, _>>()?;
    finish(plan, records, hash)
}

fn finish(
    plan: &McPlan,
    mut records: Vec<SampleRecord>,
    config_hash: String,
) -> Result<McResult, McError> {
    records.sort_by_key(|r| r.j);
    let aggregate =
        McAggregate::from_records(&records).map_err(|e| McError::Record(e.to_string()))?;
    Ok(McResult {
        records,
        aggregate,
        metadata: McMetadata {
            base_seed: plan.base_seed,
            samples: plan.samples,
            config_hash,
            generator: crate::randfield::GENERATOR.to_string(),
        },
    })
}

/// Rebuilds a result from stored records, in any order.
pub fn assemble_result(plan: &McPlan, records: Vec<SampleRecord>) -> Result<McResult, McError> {
    plan.validate()?;
    let mut seen: Vec<usize> = records.iter().map(|r| r.j).collect();
    seen.sort_unstable();
    if seen != (0..plan.samples).collect::<Vec<_>>() {
        return Err(McError::Record(
            "records do not cover samples 0..J exactly once".into(),
        ));
    }
    finish(plan, records, plan.hash())
}

/// `( (1/J) Σ v_j )^{1/2}` over squared norms `v_j`.
pub fn estimate_rms(squares: &[f64]) -> Result<f64, EstimateError> {
    if squares.is_empty() {
        return Err(EstimateError::Empty);
    }
    if let Some(&v) = squares.iter().find(|v| !(**v >= 0.0)) {
        return Err(EstimateError::NegativeSquare(v));
    }
    Ok((squares.iter().sum::<f64>() / squares.len() as f64).sqrt())
}

/// Componentwise mean of coefficient vectors.
pub fn estimate_mean_field(vectors: &[Vec<f64>]) -> Result<Vec<f64>, EstimateError> {
    let first = vectors.first().ok_or(EstimateError::Empty)?;
    let n = first.len();
    let mut acc = vec![0.0; n];
    for (index, v) in vectors.iter().enumerate() {
        if v.len() != n {
            return Err(EstimateError::LengthMismatch {
                index,
                expected: n,
                found: v.len(),
            });
        }
        acc.iter_mut().zip(v).for_each(|(a, b)| *a += b);
    }
    let j = vectors.len() as f64;
    acc.iter_mut().for_each(|a| *a /= j);
    Ok(acc)
}

#[cfg(test)]
mod tests;
