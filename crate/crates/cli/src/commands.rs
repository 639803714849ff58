use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rfgp::link::estimate_spatial_params;
use rfgp::model::RfgpModel;
use rfgp::simulate::{generate_dataset, run_benchmark, write_truth, BenchmarkConfig, SimulationConfig};
use rfgp::spatial::{load_dataset, load_points, write_dataset, CsvSchema};

use crate::config::{at, invalid, read, CliError, FitConfig, PredictConfig};

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(io_error(dir, e)))
}

fn io_error(path: &Path, source: std::io::Error) -> rfgp::Error {
    rfgp::Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Pretty JSON copy of the effective config, for reproducing a run.
fn capture<T: serde::Serialize>(dir: &Path, config: &T) -> Result<(), CliError> {
    let path = dir.join("config.json");
    let text = serde_json::to_string_pretty(config).map_err(rfgp::Error::from)?;
    std::fs::write(&path, text + "\n").map_err(|e| CliError::Runtime(io_error(&path, e)))
}

fn write_rows(path: &Path, header: &str, rows: impl Iterator<Item = String>) -> Result<(), CliError> {
    let err = |e| CliError::Runtime(io_error(path, e));
    let mut w = BufWriter::new(File::create(path).map_err(err)?);
    writeln!(w, "{header}").map_err(err)?;
    for r in rows {
        writeln!(w, "{r}").map_err(err)?;
    }
    w.flush().map_err(err)
}

pub fn simulate(config: &Path, out: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let mut cfg: SimulationConfig = read(Some(config))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(invalid)?;
    create_dir(out)?;
    capture(out, &cfg)?;
    for r in 0..cfg.replicates {
        let data = generate_dataset(&cfg, r)?;
        let dir = out.join(format!("replicate_{r:03}"));
        create_dir(&dir)?;
        write_dataset(dir.join("train.csv"), &data.train)?;
        write_dataset(dir.join("test.csv"), &data.test)?;
        write_truth(dir.join("truth.csv"), &data)?;
        log::info!("replicate {r}: {} train, {} test", data.train.len(), data.test.len());
    }
    Ok(())
}

fn load_fit_config(config: Option<&Path>, seed: Option<u64>) -> Result<FitConfig, CliError> {
    let mut cfg: FitConfig = read(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.settings.validate().map_err(invalid)?;
    Ok(cfg)
}

/// `model.json` gets its CV table at `model.cv.csv`.
fn cv_table_path(model: &Path) -> std::path::PathBuf {
    model.with_extension("cv.csv")
}

pub fn fit(train: &Path, config: Option<&Path>, out: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let cfg = load_fit_config(config, seed)?;
    let data = load_dataset(train, &CsvSchema::Infer).map_err(at(train))?;
    log::info!("loaded {} training rows", data.len());
    let (mut model, table) = rfgp::model::fit_model(&data, &cfg.settings, cfg.seed)?;
    if let Some(t) = table {
        let path = cv_table_path(out);
        t.write_csv(&path)?;
        model.cv_table = path.file_name().map(|n| n.to_string_lossy().into_owned());
        log::info!("cv table written to {}", path.display());
    }
    model.save(out)?;
    log::info!(
        "model written to {} (sigma2={} phi={} zeta={})",
        out.display(),
        model.theta.sigma2,
        model.theta.phi,
        model.zeta
    );
    Ok(())
}

pub fn predict(
    model: &Path,
    test: &Path,
    config: Option<&Path>,
    out: &Path,
    seed: Option<u64>,
) -> Result<(), CliError> {
    let cfg: PredictConfig = read(config)?;
    let mut m = RfgpModel::load(model).map_err(at(model))?;
    if let Some(k) = cfg.k {
        if k == 0 {
            return Err(CliError::Config("k must be >= 1".into()));
        }
        m.k = k;
    }
    if let Some(q) = cfg.qmc {
        m.qmc = q;
    }
    if let Some(s) = seed {
        m.qmc.seed = s;
    }
    m.qmc.validate().map_err(invalid)?;
    let pts = load_points(test, &CsvSchema::Infer).map_err(at(test))?;
    let locs = match (&pts.locations, pts.is_empty()) {
        (Some(l), _) => l.clone(),
        (None, true) => Vec::new(),
        (None, false) => return Err(at(test)(rfgp::Error::MissingColumn("s1".into()))),
    };
    let est = m.predict(&pts.covariates, &locs).map_err(at(test))?;
    log::info!("predicted {} sites", est.len());
    write_rows(
        out,
        "p_hat,se,y_hat",
        est.iter()
            .map(|e| format!("{},{},{}", e.estimate, e.std_error, u8::from(e.estimate >= 0.5))),
    )
}

pub fn estimate_effect(model: &Path, points: &Path, out: &Path) -> Result<(), CliError> {
    let m = RfgpModel::load(model).map_err(at(model))?;
    let pts = load_points(points, &CsvSchema::Infer).map_err(at(points))?;
    let mh = m.m_hat(&pts.covariates).map_err(at(points))?;
    write_rows(out, "m_hat", mh.iter().map(f64::to_string))
}

pub fn cv(train: &Path, config: Option<&Path>, out: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let cfg = load_fit_config(config, seed)?;
    let data = load_dataset(train, &CsvSchema::Infer).map_err(at(train))?;
    let s = cfg.settings.reseeded(cfg.seed);
    let (params, table) = estimate_spatial_params(&data, &s.cv_grid, &s.forest, &s.cv)?;
    table.write_csv(out)?;
    println!("{}", serde_json::to_string(&params).map_err(rfgp::Error::from)?);
    Ok(())
}

pub fn benchmark(config: &Path, out: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let mut cfg: BenchmarkConfig = read(Some(config))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(invalid)?;
    create_dir(out)?;
    capture(out, &cfg)?;
    let res = run_benchmark(&cfg, Some(out))?;
    log::info!(
        "{} result rows, {} failures written to {}",
        res.rows.len(),
        res.failures.len(),
        out.display()
    );
    Ok(())
}
