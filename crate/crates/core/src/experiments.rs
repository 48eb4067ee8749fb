//! Monte Carlo orchestration: grid sweeps over `(K, L)`, median-of-trials
//! aggregation, and phase-diagram artifacts.
//!
//! A sweep is a pure function of its [`SweepConfig`]: every trial derives
//! its ground-truth, ensemble, and noise seeds from
//! `(master_seed, K, L, trial)` and the stream tags in [`crate::rng`], so
//! trials may run in any order (they are parallelized with rayon) while
//! the aggregated records and emitted files are byte-identical across
//! runs.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::baselines::{gd_refine, spectral_column_space, spectral_init, GdConfig, GdError};
use crate::error::{Error, Result};
use crate::estimator::{estimate, EstimateError, EstimatorConfig};
use crate::linalg::{thin_svd, BlockMatrix};
use crate::norms::{dollar_norm, inf_frob_norm, DollarNormSolverConfig};
use crate::rng::{derive_seed, STREAM_ENSEMBLE, STREAM_NOISE, STREAM_TRUTH};
use crate::scalar::{from_f64, to_f64, Scalar};
use crate::sensing::{
    backproject, gen_ensemble, gen_ground_truth, measure, sigma_for_snr_db, ProblemDims,
};

/// Estimation method under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Convex,
    Spectral,
    Gd,
}

/// Error metric recorded per trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    SubspaceAngle,
    NormalizedError,
}

/// Where the estimator's `(alpha, beta)` come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaBetaSource {
    /// True norms of the ground truth.
    Oracle,
    /// Norms of the rank-`r` truncated backprojection.
    Estimated,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Convex => "convex",
            Method::Spectral => "spectral",
            Method::Gd => "gd",
        })
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "convex" => Ok(Method::Convex),
            "spectral" => Ok(Method::Spectral),
            "gd" => Ok(Method::Gd),
            other => Err(Error::InvalidConfig(format!("unknown method {other:?}"))),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::SubspaceAngle => "subspace_angle",
            Metric::NormalizedError => "normalized_error",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "subspace_angle" => Ok(Metric::SubspaceAngle),
            "normalized_error" => Ok(Metric::NormalizedError),
            other => Err(Error::InvalidConfig(format!("unknown metric {other:?}"))),
        }
    }
}

impl fmt::Display for AlphaBetaSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AlphaBetaSource::Oracle => "oracle",
            AlphaBetaSource::Estimated => "estimated",
        })
    }
}

impl FromStr for AlphaBetaSource {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(AlphaBetaSource::Oracle),
            "estimated" => Ok(AlphaBetaSource::Estimated),
            other => Err(Error::InvalidConfig(format!(
                "unknown alpha_beta_source {other:?}"
            ))),
        }
    }
}

/// Noise specification: a dB level or exactly noiseless. Serialized as a
/// number or the string `"noiseless"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SnrSpec<T> {
    Noiseless,
    Db(T),
}

impl<T: Serialize> Serialize for SnrSpec<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            SnrSpec::Noiseless => s.serialize_str("noiseless"),
            SnrSpec::Db(v) => v.serialize(s),
        }
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for SnrSpec<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr<T> {
            Num(T),
            Text(String),
        }
        match Repr::<T>::deserialize(d)? {
            Repr::Num(v) => Ok(SnrSpec::Db(v)),
            Repr::Text(s) if s == "noiseless" => Ok(SnrSpec::Noiseless),
            Repr::Text(s) => Err(serde::de::Error::custom(format!(
                "expected a number or \"noiseless\", found {s:?}"
            ))),
        }
    }
}

fn default_trials() -> usize {
    20
}

/// Full description of one Monte Carlo sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig<T> {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub r: usize,
    #[serde(rename = "K_values")]
    pub k_values: Vec<usize>,
    #[serde(rename = "L_values")]
    pub l_values: Vec<usize>,
    pub snr_db: SnrSpec<T>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub master_seed: u64,
    pub method: Method,
    pub metric: Metric,
    pub alpha_beta_source: AlphaBetaSource,
}

impl<T: Scalar> SweepConfig<T> {
    /// The desk-scale default grid: a scaled-down analog of the paper's
    /// full-size phase diagrams.
    pub fn desk_default(method: Method, metric: Metric, snr_db: SnrSpec<T>, master_seed: u64) -> Self {
        Self {
            m: 40,
            n: 4,
            r: 2,
            k_values: vec![4, 8, 16, 32],
            l_values: vec![8, 16, 32, 64, 128],
            snr_db,
            trials: 20,
            master_seed,
            method,
            metric,
            alpha_beta_source: AlphaBetaSource::Oracle,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 || self.r == 0 {
            return Err(Error::InvalidConfig("M, N, r must be positive".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        for (name, list) in [("K_values", &self.k_values), ("L_values", &self.l_values)] {
            if list.is_empty() {
                return Err(Error::InvalidConfig(format!("{name} must be nonempty")));
            }
            if list.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be strictly ascending"
                )));
            }
            if list[0] == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
        }
        let k_min = self.k_values[0];
        if self.r > self.m.min(self.n * k_min) {
            return Err(Error::InvalidConfig(format!(
                "rank {} exceeds min(M, N*K) = {} at the smallest K",
                self.r,
                self.m.min(self.n * k_min)
            )));
        }
        Ok(())
    }
}

/// One trial's outcome: a metric value or a failure note.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome<T> {
    pub trial: usize,
    pub value: Option<T>,
    pub error: Option<String>,
}

/// One `(K, L)` cell of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord<T> {
    pub k: usize,
    pub l: usize,
    pub trials: Vec<TrialOutcome<T>>,
    /// Median over successful trials; `None` when every trial failed.
    pub median: Option<T>,
    pub failures: usize,
}

/// Sine of the largest principal angle between the column spaces:
/// the spectral norm of `(I - U_est U_est^T) U_true`.
pub fn subspace_angle<T: Scalar>(u_true: &DMatrix<T>, u_est: &DMatrix<T>) -> Result<T> {
    if u_true.shape() != u_est.shape() {
        return Err(Error::dim_mismatch(
            format!("{}x{}", u_true.nrows(), u_true.ncols()),
            format!("{}x{}", u_est.nrows(), u_est.ncols()),
        ));
    }
    let r = u_true.ncols();
    let tol = from_f64::<T>(1e-8);
    for (name, u) in [("U_true", u_true), ("U_est", u_est)] {
        let gram_dev = (u.transpose() * u - DMatrix::identity(r, r)).norm();
        if gram_dev > tol {
            let _ = name;
            return Err(Error::NotOrthonormal {
                deviation: to_f64(gram_dev),
                tolerance: 1e-8,
            });
        }
    }
    let residual = u_true - u_est * (u_est.transpose() * u_true);
    let svd = thin_svd(&residual)?;
    Ok(svd.sigma[0])
}

/// Normalized squared reconstruction error `||X_hat - X||_F^2 / ||X||_F^2`.
pub fn normalized_error<T: Scalar>(x_hat: &BlockMatrix<T>, x: &BlockMatrix<T>) -> Result<T> {
    if x_hat.as_matrix().shape() != x.as_matrix().shape()
        || x_hat.block_cols() != x.block_cols()
    {
        return Err(Error::dim_mismatch(
            format!("{}x{}", x_hat.rows(), x_hat.block_cols() * x_hat.num_blocks()),
            format!("{}x{}", x.rows(), x.block_cols() * x.num_blocks()),
        ));
    }
    let denom = x.frobenius_norm();
    if denom == T::zero() {
        return Err(Error::ZeroMatrix);
    }
    let diff = (x_hat.as_matrix() - x.as_matrix()).norm();
    Ok(diff * diff / (denom * denom))
}

fn median_of<T: Scalar>(values: &[T]) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("metric values are finite"));
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        Some(sorted[mid])
    } else {
        Some((sorted[mid - 1] + sorted[mid]) * from_f64::<T>(0.5))
    }
}

fn run_trial<T: Scalar>(cfg: &SweepConfig<T>, k: usize, l: usize, trial: usize) -> std::result::Result<T, String> {
    let dims = ProblemDims {
        m: cfg.m,
        n: cfg.n,
        k,
        l,
        r: cfg.r,
    };
    let labels = [k as u64, l as u64, trial as u64];
    let seed_for = |stream: u64| {
        let mut parts = labels.to_vec();
        parts.push(stream);
        derive_seed(cfg.master_seed, &parts)
    };

    let run = || -> Result<T> {
        let gt = gen_ground_truth::<T>(dims, seed_for(STREAM_TRUTH))?;
        let ens = gen_ensemble::<T>(dims, seed_for(STREAM_ENSEMBLE))?;
        let sigma = match cfg.snr_db {
            SnrSpec::Noiseless => T::zero(),
            SnrSpec::Db(db) => sigma_for_snr_db(&gt.x, db)?,
        };
        let ms = measure(&gt.x, &ens, sigma, seed_for(STREAM_NOISE))?;
        let x0 = backproject(&ens, &ms)?;

        let x_est: BlockMatrix<T> = match cfg.method {
            Method::Spectral => {
                // the spectral method's matrix estimate is the rank-r
                // truncation of the backprojection
                let svd = thin_svd(x0.as_matrix())?;
                BlockMatrix::new(dims.m, dims.n, dims.k, svd.truncated(dims.r))?
            }
            Method::Convex => {
                let norm_cfg = DollarNormSolverConfig::default();
                let (alpha, beta) = match cfg.alpha_beta_source {
                    AlphaBetaSource::Oracle => (
                        inf_frob_norm(&gt.x),
                        dollar_norm(&gt.x, &norm_cfg)?.value,
                    ),
                    AlphaBetaSource::Estimated => {
                        crate::sensing::estimate_alpha_beta(&x0, dims.r, &norm_cfg)?
                    }
                };
                if !(alpha > T::zero()) || !(beta > T::zero()) {
                    return Err(Error::Domain("degenerate alpha/beta estimate".into()));
                }
                let mut est_cfg = EstimatorConfig::new(alpha, beta);
                est_cfg.init_rank = Some(dims.r);
                match estimate(&ens, &ms, &est_cfg) {
                    Ok(res) => res.x_hat,
                    Err(EstimateError::Core(e)) => return Err(e),
                    Err(e @ EstimateError::NonConvergence { .. }) => {
                        return Err(Error::Domain(e.to_string()))
                    }
                }
            }
            Method::Gd => {
                let init = spectral_init(&x0, dims.r)?;
                let sigma1 = thin_svd(x0.as_matrix())?.sigma[0];
                let gd_cfg = GdConfig::scaled(dims.l, sigma1);
                match gd_refine(&ens, &ms, init, &gd_cfg) {
                    Ok(it) => it.assemble()?,
                    Err(GdError::Core(e)) => return Err(e),
                    Err(e @ GdError::Stalled { .. }) => return Err(Error::Domain(e.to_string())),
                }
            }
        };

        match cfg.metric {
            Metric::NormalizedError => normalized_error(&x_est, &gt.x),
            Metric::SubspaceAngle => {
                let u_est = spectral_column_space(&x_est, dims.r)?;
                subspace_angle(&gt.u, &u_est)
            }
        }
    };
    run().map_err(|e| e.to_string())
}

/// Runs the full sweep. Deterministic in `cfg`; trials execute on the
/// ambient rayon pool.
pub fn run_sweep<T: Scalar + Send + Sync>(cfg: &SweepConfig<T>) -> Result<Vec<ExperimentRecord<T>>> {
    cfg.validate()?;
    let mut jobs = Vec::new();
    for &k in &cfg.k_values {
        for &l in &cfg.l_values {
            for t in 0..cfg.trials {
                jobs.push((k, l, t));
            }
        }
    }
    let outcomes: Vec<TrialOutcome<T>> = jobs
        .par_iter()
        .map(|&(k, l, t)| match run_trial(cfg, k, l, t) {
            Ok(v) => TrialOutcome {
                trial: t,
                value: Some(v),
                error: None,
            },
            Err(e) => TrialOutcome {
                trial: t,
                value: None,
                error: Some(e),
            },
        })
        .collect();

    let mut records = Vec::with_capacity(cfg.k_values.len() * cfg.l_values.len());
    let mut idx = 0;
    for &k in &cfg.k_values {
        for &l in &cfg.l_values {
            let trials: Vec<TrialOutcome<T>> = outcomes[idx..idx + cfg.trials].to_vec();
            idx += cfg.trials;
            let values: Vec<T> = trials.iter().filter_map(|t| t.value).collect();
            let failures = trials.len() - values.len();
            records.push(ExperimentRecord {
                k,
                l,
                median: median_of(&values),
                trials,
                failures,
            });
        }
    }
    Ok(records)
}

/// Writes the per-trial results CSV: `K,L,trial,metric,value,status`.
pub fn write_results_csv<T: Scalar, W: Write>(
    w: &mut W,
    records: &[ExperimentRecord<T>],
    metric: Metric,
) -> Result<()> {
    writeln!(w, "K,L,trial,metric,value,status")?;
    for rec in records {
        for t in &rec.trials {
            match t.value {
                Some(v) => writeln!(w, "{},{},{},{},{},ok", rec.k, rec.l, t.trial, metric, v)?,
                None => writeln!(w, "{},{},{},{},nan,failed", rec.k, rec.l, t.trial, metric)?,
            }
        }
    }
    Ok(())
}

/// Reads a results CSV back into records grouped by `(K, L)`.
pub fn read_results_csv<T: Scalar, R: BufRead>(
    r: &mut R,
) -> Result<(Vec<ExperimentRecord<T>>, String)> {
    let mut lines = r.lines();
    let header = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "missing results header".into(),
    })??;
    if header.trim() != "K,L,trial,metric,value,status" {
        return Err(Error::Parse {
            line: 1,
            message: format!("unexpected header {header:?}"),
        });
    }
    let mut metric_name = String::new();
    let mut cells: BTreeMap<(usize, usize), Vec<TrialOutcome<T>>> = BTreeMap::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 6 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 6 fields, found {}", parts.len()),
            });
        }
        let parse_idx = |s: &str, what: &str| -> Result<usize> {
            s.trim().parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("bad {what}: {s:?}"),
            })
        };
        let k = parse_idx(parts[0], "K")?;
        let l = parse_idx(parts[1], "L")?;
        let trial = parse_idx(parts[2], "trial")?;
        if metric_name.is_empty() {
            metric_name = parts[3].trim().to_string();
        }
        let status = parts[5].trim();
        let outcome = if status == "ok" {
            let v: f64 = parts[4].trim().parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("bad value {:?}", parts[4]),
            })?;
            TrialOutcome {
                trial,
                value: Some(from_f64(v)),
                error: None,
            }
        } else {
            TrialOutcome {
                trial,
                value: None,
                error: Some(status.to_string()),
            }
        };
        cells.entry((k, l)).or_default().push(outcome);
    }
    let records = cells
        .into_iter()
        .map(|((k, l), trials)| {
            let values: Vec<T> = trials.iter().filter_map(|t| t.value).collect();
            let failures = trials.len() - values.len();
            ExperimentRecord {
                k,
                l,
                median: median_of(&values),
                trials,
                failures,
            }
        })
        .collect();
    Ok((records, metric_name))
}

/// A `(K, L)` grid of log10-median metrics with a success mask.
#[derive(Debug, Clone)]
pub struct PhaseDiagram {
    pub k_values: Vec<usize>,
    pub l_values: Vec<usize>,
    /// `log10(median)` indexed `[l_idx][k_idx]`; `NaN` for invalid cells.
    pub log10_median: Vec<Vec<f64>>,
    pub threshold_log10: f64,
    /// `log10(median) <= threshold`, `false` for invalid cells.
    pub success: Vec<Vec<bool>>,
}

/// Builds the phase diagram from records covering a full `(K, L)` grid.
pub fn emit_phase_diagram<T: Scalar>(
    records: &[ExperimentRecord<T>],
    threshold_log10: f64,
) -> Result<PhaseDiagram> {
    let mut k_values: Vec<usize> = records.iter().map(|r| r.k).collect();
    k_values.sort_unstable();
    k_values.dedup();
    let mut l_values: Vec<usize> = records.iter().map(|r| r.l).collect();
    l_values.sort_unstable();
    l_values.dedup();

    let mut by_cell: BTreeMap<(usize, usize), &ExperimentRecord<T>> = BTreeMap::new();
    for rec in records {
        by_cell.insert((rec.k, rec.l), rec);
    }
    let mut missing = Vec::new();
    for &k in &k_values {
        for &l in &l_values {
            if !by_cell.contains_key(&(k, l)) {
                missing.push((k, l));
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::IncompleteGrid(missing));
    }

    let mut log10_median = Vec::with_capacity(l_values.len());
    let mut success = Vec::with_capacity(l_values.len());
    for &l in &l_values {
        let mut row = Vec::with_capacity(k_values.len());
        let mut srow = Vec::with_capacity(k_values.len());
        for &k in &k_values {
            match by_cell[&(k, l)].median {
                Some(m) => {
                    let v = to_f64(m).log10();
                    row.push(v);
                    srow.push(v <= threshold_log10);
                }
                None => {
                    row.push(f64::NAN);
                    srow.push(false);
                }
            }
        }
        log10_median.push(row);
        success.push(srow);
    }
    Ok(PhaseDiagram {
        k_values,
        l_values,
        log10_median,
        threshold_log10,
        success,
    })
}

impl PhaseDiagram {
    /// CSV grid: columns are `K` values, rows are `L` values.
    pub fn write_grid_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        let header: Vec<String> = self.k_values.iter().map(|k| k.to_string()).collect();
        writeln!(w, "L\\K,{}", header.join(","))?;
        for (i, &l) in self.l_values.iter().enumerate() {
            let row: Vec<String> = self.log10_median[i].iter().map(|v| format!("{v}")).collect();
            writeln!(w, "{l},{}", row.join(","))?;
        }
        Ok(())
    }

    /// Portable graymap (P2) mask: one pixel per cell, 0 = fail,
    /// 255 = succeed; rows follow ascending `L`, columns ascending `K`.
    pub fn write_mask_pgm<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "P2")?;
        writeln!(w, "{} {}", self.k_values.len(), self.l_values.len())?;
        writeln!(w, "255")?;
        for row in &self.success {
            let pixels: Vec<&str> = row.iter().map(|&s| if s { "255" } else { "0" }).collect();
            writeln!(w, "{}", pixels.join(" "))?;
        }
        Ok(())
    }
}

/// JSON run manifest: the full sweep config plus SHA-256 checksums of the
/// emitted artifacts.
pub fn run_manifest_json<T: Scalar + Serialize>(
    cfg: &SweepConfig<T>,
    artifacts: &[(&str, &[u8])],
) -> Result<String> {
    #[derive(Serialize)]
    struct Manifest<'a, T> {
        config: &'a SweepConfig<T>,
        artifacts: BTreeMap<&'a str, String>,
    }
    let mut sums = BTreeMap::new();
    for (name, bytes) in artifacts {
        let digest = Sha256::digest(bytes);
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        sums.insert(*name, hex);
    }
    serde_json::to_string_pretty(&Manifest {
        config: cfg,
        artifacts: sums,
    })
    .map_err(|e| Error::Domain(format!("manifest serialization failed: {e}")))
}
