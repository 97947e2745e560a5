//! Experiment pipeline: integrate STTs, factor every epoch, run the studies
//! and write CSVs plus a manifest.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::csv::Table;
use crate::dynamics::Model;
use crate::error::{Error, Result};
use crate::integrator::Stats;
use crate::moments::{
    covariance_error_metric, propagate_moments_r1, propagate_moments_stt_with, GaussianState, InitialMoments,
};
use crate::rank1::{
    angle_between, build_r1dstt, build_r1odstt, induced_2norm_with_starts, random_unit_vectors, Rank1Factors,
};
use crate::stt::{integrate_stts, SttHistory};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Study {
    Frobenius,
    Covariance,
    Bound,
}

impl Study {
    pub const ALL: [Study; 3] = [Study::Frobenius, Study::Covariance, Study::Bound];

    pub fn file_name(self) -> &'static str {
        match self {
            Study::Frobenius => "frobenius.csv",
            Study::Covariance => "covariance.csv",
            Study::Bound => "bound.csv",
        }
    }
}

/// Rank-1 factors of one epoch, indexed by order `m - 2`.
#[derive(Clone, Debug)]
pub struct EpochFactors {
    pub dstt: Vec<Rank1Factors>,
    pub odstt: Vec<Rank1Factors>,
}

/// Integrated history and per-epoch factors for a scenario.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub config: ScenarioConfig,
    pub model: Model,
    pub history: SttHistory,
    pub stats: Stats,
    /// One entry per epoch; epoch 0 included.
    pub factors: Vec<EpochFactors>,
}

impl Prepared {
    pub fn time_seconds(&self, k: usize) -> f64 {
        self.history.times[k] * self.model.time_unit()
    }

    pub fn dstt(&self, k: usize, m: usize) -> &Rank1Factors {
        &self.factors[k].dstt[m - 2]
    }

    pub fn odstt(&self, k: usize, m: usize) -> &Rank1Factors {
        &self.factors[k].odstt[m - 2]
    }
}

/// Integrate and factor the scenario. `order` overrides the configured STT
/// order.
pub fn prepare(cfg: &ScenarioConfig, order: Option<usize>) -> Result<Prepared> {
    let mut config = cfg.clone();
    if let Some(o) = order {
        config.stt_order = o;
    }
    config.validate()?;
    let model = config.build_model()?;
    let x0 = config.initial_state()?;
    let grid = config.grid()?;
    let (history, stats) = integrate_stts(&model, &x0, &grid, config.stt_order, &config.integrator)?;
    let factors = (0..history.len())
        .into_par_iter()
        .map(|k| {
            let mut f = EpochFactors {
                dstt: Vec::new(),
                odstt: Vec::new(),
            };
            for m in 2..=history.order {
                f.dstt.push(build_r1dstt(&history, k, m)?);
                f.odstt.push(build_r1odstt(&history, k, m, &config.eigen)?);
            }
            Ok(f)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Prepared {
        config,
        model,
        history,
        stats,
        factors,
    })
}

fn require_order(p: &Prepared, m: usize, what: &str) -> Result<()> {
    if p.history.order < m {
        return Err(Error::Config(format!("{what} needs STT order {m}, run has {}", p.history.order)));
    }
    Ok(())
}

/// Normalized Frobenius errors of both rank-1 variants and the angle between
/// their input directions, from the first positive-time epoch on.
pub fn run_frobenius_study(p: &Prepared) -> Result<Table> {
    require_order(p, 2, "frobenius study")?;
    let orders: Vec<usize> = (2..=p.history.order).collect();
    let mut header = vec!["k".to_string(), "t_nd".into(), "t_s".into()];
    for m in &orders {
        header.push(format!("frob_rel_dstt{m}"));
        header.push(format!("frob_rel_odstt{m}"));
        header.push(format!("angle{m}_deg"));
    }
    let rows = (1..p.history.len())
        .into_par_iter()
        .map(|k| {
            let mut row = vec![k as f64, p.history.times[k], p.time_seconds(k)];
            for &m in &orders {
                let phi = p.history.stt_ref(k, m)?;
                let norm = phi.frobenius_norm();
                let d = p.dstt(k, m);
                let o = p.odstt(k, m);
                row.push(d.frobenius_error(phi)? / norm);
                row.push(o.frobenius_error(phi)? / norm);
                row.push(angle_between(&d.v, &o.v));
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(header);
    rows.into_iter().for_each(|r| t.push(r));
    Ok(t)
}

fn metric_or_zero(p_stt: &nalgebra::DMatrix<f64>, p_r1: &nalgebra::DMatrix<f64>) -> Result<f64> {
    if p_stt.norm() == 0.0 && p_r1.norm() == 0.0 {
        return Ok(0.0);
    }
    covariance_error_metric(p_stt, p_r1)
}

/// Normalized covariance differences between rank-1 and full STT moment
/// propagation at second and (when available) third order.
pub fn run_covariance_study(p: &Prepared) -> Result<Table> {
    require_order(p, 2, "covariance study")?;
    let p0 = p
        .config
        .initial_covariance()?
        .ok_or_else(|| Error::Config("covariance study needs an initial covariance".into()))?;
    let g0 = GaussianState::zero_mean(p0)?;
    let max_m = p.history.order;
    let inits = (2..=max_m).map(|m| InitialMoments::new(&g0, m)).collect::<Result<Vec<_>>>()?;
    let mut header = vec!["k".to_string(), "t_nd".into(), "t_s".into()];
    for m in 2..=max_m {
        header.push(format!("cov{m}_rel_dstt"));
        header.push(format!("cov{m}_rel_odstt"));
    }
    let rows = (1..p.history.len())
        .into_par_iter()
        .map(|k| {
            let mut row = vec![k as f64, p.history.times[k], p.time_seconds(k)];
            for m in 2..=max_m {
                let full = propagate_moments_stt_with(&p.history, k, &inits[m - 2])?;
                for f in [&p.factors[k].dstt, &p.factors[k].odstt] {
                    let r1 = propagate_moments_r1(&p.history, k, &g0, &f[0], (m == 3).then(|| &f[1]))?;
                    row.push(metric_or_zero(&full.cov, &r1.cov)?);
                }
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(header);
    rows.into_iter().for_each(|r| t.push(r));
    Ok(t)
}

/// Unit-sphere samples from normalized standard normal draws.
pub fn bound_samples(n: usize, count: usize, seed: u64) -> Vec<DVector<f64>> {
    random_unit_vectors(n, count, seed)
}

/// Second-order rank-1 error per epoch: largest sampled `‖E δx²‖`, induced
/// 2-norm and Frobenius norm of `E = Φ² − u ⊗ v ⊗ v`.
pub fn run_bound_validation(p: &Prepared, nsamples: usize) -> Result<Table> {
    let samples = bound_samples(p.history.dim(), nsamples, p.config.rng_seed);
    bound_table(p, &samples)
}

/// [`run_bound_validation`] on caller-supplied unit samples. An empty sample
/// set leaves the max column blank.
pub fn bound_table(p: &Prepared, samples: &[DVector<f64>]) -> Result<Table> {
    require_order(p, 2, "bound validation")?;
    let rows = (1..p.history.len())
        .into_par_iter()
        .map(|k| {
            let phi = p.history.stt_ref(k, 2)?;
            let err = phi.sub(&p.odstt(k, 2).outer())?;
            let mut max = f64::NAN;
            let mut arg = None;
            for (i, x) in samples.iter().enumerate() {
                let e = err.contract_full(x)?.norm();
                if !(e <= max) {
                    max = e;
                    arg = Some(i);
                }
            }
            let starts: Vec<DVector<f64>> = arg.map(|i| samples[i].clone()).into_iter().collect();
            let induced = induced_2norm_with_starts(&err, &p.config.eigen, &starts)?;
            Ok(vec![k as f64, p.history.times[k], p.time_seconds(k), max, induced, err.frobenius_norm()])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(["k", "t_nd", "t_s", "eps2_max_sample", "induced_2norm", "frobenius_norm"]);
    rows.into_iter().for_each(|r| t.push(r));
    Ok(t)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub study: Study,
    pub file: String,
    pub rows: usize,
}

/// Everything needed to re-run an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: ScenarioConfig,
    pub studies: Vec<Study>,
    pub rng_seed: u64,
    pub eigen_seed: u64,
    pub integrator_steps: usize,
    pub integrator_rejected: usize,
    pub outputs: Vec<OutputFile>,
}

/// Run `studies` for `cfg`, writing CSVs and `manifest.json` into `out`.
pub fn run_scenario(cfg: &ScenarioConfig, studies: &[Study], out: &Path) -> Result<Manifest> {
    let p = prepare(cfg, None)?;
    fs::create_dir_all(out)?;
    let mut outputs = Vec::new();
    for &s in studies {
        let table = match s {
            Study::Frobenius => run_frobenius_study(&p)?,
            Study::Covariance => run_covariance_study(&p)?,
            Study::Bound => run_bound_validation(&p, p.config.bound_samples)?,
        };
        fs::write(out.join(s.file_name()), table.render())?;
        outputs.push(OutputFile {
            study: s,
            file: s.file_name().into(),
            rows: table.rows.len(),
        });
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: p.config.clone(),
        studies: studies.to_vec(),
        rng_seed: p.config.rng_seed,
        eigen_seed: p.config.eigen.rng_seed,
        integrator_steps: p.stats.accepted,
        integrator_rejected: p.stats.rejected,
        outputs,
    };
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    fs::write(out.join("manifest.json"), json)?;
    Ok(manifest)
}

/// Output directory: explicit, else the config's, else `out/<name>`.
pub fn resolve_out_dir(cfg: &ScenarioConfig, explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out").join(&cfg.name))
}

/// Worker pool honoring `DSTT_KIT_THREADS`.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("DSTT_KIT_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("DSTT_KIT_THREADS={v:?} is not a thread count")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Config(e.to_string()))
}
