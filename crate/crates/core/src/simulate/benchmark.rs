use std::path::Path;

use serde::{Deserialize, Serialize};

use super::baselines::{fit_baseline, BaselineMethod, MethodSettings};
use super::{friedman_unchecked, generate_dataset, SimulationConfig, FRIEDMAN_DIM};
use crate::error::{Error, Result};
use crate::link::{marginal_link, uniform_probes};
use crate::spatial::{mise, misclassification, relative_mse};
use crate::{par, seed};

pub const METRIC_MISE_P: &str = "MISE_p";
pub const METRIC_MISE_M: &str = "MISE_m";
pub const METRIC_RELATIVE_MSE: &str = "RelativeMSE";
pub const METRIC_MISCLASSIFICATION: &str = "Misclassification";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchmarkConfig {
    pub n: usize,
    pub test_fraction: f64,
    pub replicates: usize,
    pub seed: u64,
    pub sigma2: Vec<f64>,
    /// Effective-range fractions.
    pub f: Vec<f64>,
    pub methods: Vec<BaselineMethod>,
    /// Uniform covariate points for MISE.
    pub n_mise: usize,
    pub settings: MethodSettings,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            test_fraction: 0.2,
            replicates: 20,
            seed: 0,
            sigma2: (1..=10).map(f64::from).collect(),
            f: vec![0.25, 0.5, 0.75],
            methods: BaselineMethod::ALL.to_vec(),
            n_mise: 10_000,
            settings: MethodSettings::default(),
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sigma2.is_empty() || self.f.is_empty() || self.methods.is_empty() {
            return Err(Error::InvalidParameter("benchmark needs sigma2, f and methods".into()));
        }
        if self.n_mise == 0 {
            return Err(Error::InvalidParameter("n_mise must be >= 1".into()));
        }
        for s in self.scenarios() {
            s.validate()?;
        }
        self.settings.validate()
    }

    /// One simulation config per `(sigma2, f)` cell, sigma2-major.
    pub fn scenarios(&self) -> Vec<SimulationConfig> {
        self.sigma2
            .iter()
            .flat_map(|&sigma2| {
                self.f.iter().map(move |&f| SimulationConfig {
                    n: self.n,
                    sigma2,
                    f,
                    seed: self.seed,
                    test_fraction: self.test_fraction,
                    replicates: self.replicates,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub replicate: usize,
    pub method: BaselineMethod,
    pub metric: String,
    pub sigma2: f64,
    pub f: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: BaselineMethod,
    pub metric: String,
    pub sigma2: f64,
    pub f: f64,
    pub median: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub replicate: usize,
    pub method: BaselineMethod,
    pub sigma2: f64,
    pub f: f64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchmarkResults {
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
    pub failures: Vec<Failure>,
}

impl BenchmarkResults {
    /// Values of one metric for one method and cell, by replicate.
    pub fn values(&self, method: BaselineMethod, metric: &str, sigma2: f64, f: f64) -> Vec<(usize, f64)> {
        self.rows
            .iter()
            .filter(|r| r.method == method && r.metric == metric && r.sigma2 == sigma2 && r.f == f)
            .map(|r| (r.replicate, r.value))
            .collect()
    }

    pub fn median(&self, method: BaselineMethod, metric: &str, sigma2: f64, f: f64) -> Option<f64> {
        self.summary
            .iter()
            .find(|s| s.method == method && s.metric == metric && s.sigma2 == sigma2 && s.f == f)
            .map(|s| s.median)
    }

    pub fn write(&self, out_dir: &Path) -> Result<()> {
        std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
        let mut w = csv::Writer::from_path(out_dir.join("long_results.csv"))?;
        w.write_record(["replicate", "method", "metric", "sigma2", "f", "value"])?;
        for r in &self.rows {
            w.write_record([
                r.replicate.to_string(),
                r.method.to_string(),
                r.metric.clone(),
                r.sigma2.to_string(),
                r.f.to_string(),
                r.value.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(out_dir, e))?;
        let mut w = csv::Writer::from_path(out_dir.join("summary_medians.csv"))?;
        w.write_record(["method", "metric", "sigma2", "f", "median", "n"])?;
        for s in &self.summary {
            w.write_record([
                s.method.to_string(),
                s.metric.clone(),
                s.sigma2.to_string(),
                s.f.to_string(),
                s.median.to_string(),
                s.n.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(out_dir, e))?;
        if !self.failures.is_empty() {
            let mut w = csv::Writer::from_path(out_dir.join("failures.csv"))?;
            for f in &self.failures {
                w.serialize(f)?;
            }
            w.flush().map_err(|e| Error::io(out_dir, e))?;
        }
        Ok(())
    }
}

/// Median of the finite entries; `NaN` when there are none.
pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let h = v.len() / 2;
    if v.len() % 2 == 1 {
        v[h]
    } else {
        0.5 * (v[h - 1] + v[h])
    }
}

fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(BaselineMethod, String, f64, f64)> = Vec::new();
    for r in rows {
        let k = (r.method, r.metric.clone(), r.sigma2, r.f);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(method, metric, sigma2, f)| {
            let vals: Vec<f64> = rows
                .iter()
                .filter(|r| r.method == method && r.metric == metric && r.sigma2 == sigma2 && r.f == f)
                .map(|r| r.value)
                .collect();
            SummaryRow {
                median: median(&vals),
                n: vals.iter().filter(|v| v.is_finite()).count(),
                method,
                metric,
                sigma2,
                f,
            }
        })
        .collect()
}

fn run_replicate(
    config: &BenchmarkConfig,
    sim: &SimulationConfig,
    replicate: usize,
) -> Result<(Vec<ResultRow>, Vec<Failure>)> {
    let data = generate_dataset(sim, replicate)?;
    let rs = sim.replicate_seed(replicate);
    let probes = uniform_probes(&[(0.0, 1.0); FRIEDMAN_DIM], config.n_mise, seed::derive(rs, 4));
    let m_true: Vec<f64> = probes.rows().map(friedman_unchecked).collect();
    let p_true: Vec<f64> = m_true.iter().map(|&m| marginal_link(m, sim.sigma2)).collect();
    let settings = config.settings.reseeded(seed::derive(rs, 5));
    let eps = settings.effect.clip_epsilon;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for &method in &config.methods {
        let row = |metric: &str, value: f64| ResultRow {
            replicate,
            method,
            metric: metric.to_string(),
            sigma2: sim.sigma2,
            f: sim.f,
            value,
        };
        let outcome = (|| -> Result<Vec<ResultRow>> {
            let fitted = fit_baseline(method, &data.train, &settings)?;
            let mut out = Vec::new();
            if let Some(p) = fitted.estimate_p(&probes) {
                out.push(row(METRIC_MISE_P, mise(&p, &p_true)?.value));
            }
            if let Some(m) = fitted.estimate_m(&probes, eps) {
                out.push(row(METRIC_MISE_M, mise(&m, &m_true)?.value));
            }
            let pred = fitted.predict(data.test.covariates(), data.test.locations())?;
            out.push(row(METRIC_RELATIVE_MSE, relative_mse(&pred, &data.truth_test.p)?.value));
            out.push(row(METRIC_MISCLASSIFICATION, misclassification(&pred, data.test.labels(), 0.5)?.value));
            Ok(out)
        })();
        match outcome {
            Ok(r) => rows.extend(r),
            Err(e) => {
                log::warn!("replicate {replicate} {method} sigma2={} f={}: {e}", sim.sigma2, sim.f);
                failures.push(Failure {
                    replicate,
                    method,
                    sigma2: sim.sigma2,
                    f: sim.f,
                    error: e.to_string(),
                });
            }
        }
    }
    log::info!("replicate {replicate} sigma2={} f={} done", sim.sigma2, sim.f);
    Ok((rows, failures))
}

/// Runs every `(cell, replicate)` job; failures of single methods are
/// recorded and the run continues. Writes CSVs when `out_dir` is given.
pub fn run_benchmark(config: &BenchmarkConfig, out_dir: Option<&Path>) -> Result<BenchmarkResults> {
    config.validate()?;
    let scenarios = config.scenarios();
    let jobs: Vec<(usize, usize)> = (0..scenarios.len())
        .flat_map(|c| (0..config.replicates).map(move |r| (c, r)))
        .collect();
    let outputs = par::map_range(jobs.len(), |j| {
        let (c, r) = jobs[j];
        run_replicate(config, &scenarios[c], r)
    });
    let mut res = BenchmarkResults::default();
    for (j, out) in outputs.into_iter().enumerate() {
        match out {
            Ok((rows, failures)) => {
                res.rows.extend(rows);
                res.failures.extend(failures);
            }
            Err(e) => {
                let (c, r) = jobs[j];
                for &method in &config.methods {
                    res.failures.push(Failure {
                        replicate: r,
                        method,
                        sigma2: scenarios[c].sigma2,
                        f: scenarios[c].f,
                        error: e.to_string(),
                    });
                }
            }
        }
    }
    res.summary = summarize(&res.rows);
    if let Some(dir) = out_dir {
        res.write(dir)?;
    }
    Ok(res)
}
