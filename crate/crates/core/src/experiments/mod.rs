//! Config-driven reproductions of the studies: the doubly periodic sheared
//! wave, the tokamak convergence scan, the filament problem, the mapping error
//! survey and the Cartesian comparisons.
//!
//! Every run writes `summary.json` (a [`RunResult`]), `config.toml` (the full
//! configuration, enough to rerun bit-identically), CSV tables and gridded
//! arrays, and `timings.json`, which is kept apart because wall-clock numbers
//! are the only non-reproducible output.

mod cartesian;
pub mod config;
pub mod fit;
mod mapping_error;
pub mod output;
mod periodic2d;
mod tokamak;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

pub use config::*;
pub use fit::{fit_power_law, PowerFit};
pub use output::{read_grid, GridAxis, Output};
pub use periodic2d::PeriodicPoint;

use crate::error::{Error, Result};
use crate::solver::SolveReport;
use crate::sparse::CsrMatrix;

/// Size and solve statistics of one system. Rows with a vanishing diagonal
/// (functions without support in the domain) are excluded from the counts.
#[derive(Debug, Clone, Serialize)]
pub struct MatrixStats {
    pub name: String,
    pub dofs: usize,
    pub active_dofs: usize,
    pub nnz: usize,
    pub mean_row_nnz: f64,
    pub solve: Option<SolveReport>,
}

impl MatrixStats {
    pub fn new(name: &str, a: &CsrMatrix, solve: Option<SolveReport>) -> Self {
        let diag = a.diagonal();
        let max = diag.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        let active: Vec<usize> = (0..a.n_rows()).filter(|&i| diag[i].abs() > 1e-14 * max).collect();
        let nnz: usize = active.iter().map(|&i| a.row(i).0.len()).sum();
        Self {
            name: name.to_owned(),
            dofs: a.n_rows(),
            active_dofs: active.len(),
            nnz,
            mean_row_nnz: nnz as f64 / active.len().max(1) as f64,
            solve,
        }
    }
}

/// One acceptance-style check evaluated by a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub pass: bool,
}

impl Check {
    pub fn band(name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            value,
            lo: Some(lo),
            hi: Some(hi),
            pass: value >= lo && value <= hi,
        }
    }

    pub fn at_most(name: impl Into<String>, value: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            value,
            lo: None,
            hi: Some(hi),
            pass: value <= hi,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, lo: f64) -> Self {
        Self {
            name: name.into(),
            value,
            lo: Some(lo),
            hi: None,
            pass: value >= lo,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunResult {
    pub problem: Problem,
    pub label: String,
    pub config: ExperimentConfig,
    pub metrics: BTreeMap<String, f64>,
    pub fits: BTreeMap<String, PowerFit>,
    pub matrices: Vec<MatrixStats>,
    pub checks: Vec<Check>,
    pub artifacts: Vec<String>,
    #[serde(skip)]
    pub timings: Vec<(String, f64)>,
}

impl RunResult {
    fn new(cfg: &ExperimentConfig) -> Self {
        Self {
            problem: cfg.problem,
            label: cfg.label(),
            config: cfg.clone(),
            metrics: BTreeMap::new(),
            fits: BTreeMap::new(),
            matrices: Vec::new(),
            checks: Vec::new(),
            artifacts: Vec::new(),
            timings: Vec::new(),
        }
    }

    pub fn metric(&self, key: &str) -> Option<f64> {
        self.metrics.get(key).copied()
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn set(&mut self, key: impl Into<String>, value: f64) {
        self.metrics.insert(key.into(), value);
    }
}

/// Wall-clock bookkeeping for the separate timings file.
pub(crate) struct Stopwatch {
    start: Instant,
    laps: Vec<(String, f64)>,
}

impl Stopwatch {
    pub(crate) fn new() -> Self {
        Self {
            start: Instant::now(),
            laps: Vec::new(),
        }
    }

    /// Records the time since the previous lap under `name`.
    pub(crate) fn lap(&mut self, name: impl Into<String>) {
        let now = self.start.elapsed().as_secs_f64();
        let prev: f64 = self.laps.iter().map(|l| l.1).sum();
        self.laps.push((name.into(), now - prev));
        log::debug!("{:>8.2}s  {}", now - prev, self.laps.last().unwrap().0);
    }
}

/// Runs one experiment. With `out_dir` set, all result files go there.
pub fn run(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<RunResult> {
    cfg.validate()?;
    let mut out = Output::new(out_dir)?;
    let mut res = RunResult::new(cfg);
    let mut clock = Stopwatch::new();
    match cfg.problem {
        Problem::Periodic2d => periodic2d::run(cfg, &mut out, &mut res, &mut clock)?,
        Problem::TokamakConvergence => tokamak::run_convergence(cfg, &mut out, &mut res, &mut clock)?,
        Problem::TokamakFilament => tokamak::run_filament(cfg, &mut out, &mut res, &mut clock)?,
        Problem::MappingError => mapping_error::run(cfg, &mut out, &mut res, &mut clock)?,
        Problem::CartesianCompare => cartesian::run(cfg, &mut out, &mut res, &mut clock)?,
    }
    if let Some((k, v)) = res.metrics.iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::Config(format!("metric `{k}` is not finite ({v})")));
    }
    out.text("config.toml", &cfg.to_toml())?;
    res.timings = clock.laps;
    let timings: BTreeMap<&str, f64> = res.timings.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    out.json("timings.json", &timings)?;
    res.artifacts = out.written().to_vec();
    res.artifacts.push("summary.json".into());
    res.artifacts.sort();
    let summary = res.clone();
    out.json("summary.json", &summary)?;
    for c in &res.checks {
        log::info!("[{}] {} = {:.4e}", if c.pass { "pass" } else { "FAIL" }, c.name, c.value);
    }
    Ok(res)
}

/// Relative and absolute RMS difference of two sample vectors.
pub(crate) fn rms_error(values: &[f64], reference: &[f64]) -> (f64, f64) {
    let n = values.len().max(1) as f64;
    let e2: f64 = values.iter().zip(reference).map(|(a, b)| (a - b).powi(2)).sum();
    let r2: f64 = reference.iter().map(|b| b * b).sum();
    ((e2 / r2.max(f64::MIN_POSITIVE)).sqrt(), (e2 / n).sqrt())
}

pub(crate) fn cells(values: &[f64]) -> Vec<String> {
    values.iter().map(|v| v.to_string()).collect()
}

/// Largest `|sum_a psi_a - 1|` of the field-aligned functions at `n` points
/// drawn uniformly from the box `lo..hi` with the given seed. Points not
/// covered by the space (some field-line image leaves the spline support) are
/// redrawn; the second value is the fraction of draws that were kept.
pub fn partition_of_unity_deviation(
    space: &crate::space::FcifemSpace,
    lo: [f64; 3],
    hi: [f64; 3],
    n: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    use crate::space::Discretization;
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let ones = vec![1.0; space.n_dofs()];
    let mut worst: f64 = 0.0;
    let (mut kept, mut draws) = (0usize, 0usize);
    while kept < n {
        if draws >= 100 * n.max(1) {
            return Err(Error::Config("too few sample points are covered by the space".into()));
        }
        draws += 1;
        let x: [f64; 3] = std::array::from_fn(|d| if hi[d] > lo[d] { rng.gen_range(lo[d]..hi[d]) } else { lo[d] });
        if !space.covers(x) {
            continue;
        }
        kept += 1;
        worst = worst.max((space.evaluate(&ones, x)? - 1.0).abs());
    }
    Ok((worst, kept as f64 / draws.max(1) as f64))
}

/// The blended tokamak space of `t` at scale factor `scale` (cells and planes
/// multiplied) with mapping `kind`.
pub fn tokamak_space(
    t: &TokamakConfig,
    scale: usize,
    kind: crate::mapping::MappingKind,
) -> Result<crate::blended::BlendedSpace> {
    tokamak::build_space(t, scale, kind)
}
