//! Configuration parsing, study dispatch and file emission for `isac-sim`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use isac_core::experiments::{
    run_study, Architecture, EmpiricalCdf, ExperimentConfig, SnrSample, Study, StudyResult,
};
use serde::{Deserialize, Serialize};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_SIMULATION: i32 = 4;
pub const EXIT_IO: i32 = 5;
pub const EXIT_AUDIT: i32 = 6;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read config {path}: {source}")]
    ConfigRead { path: PathBuf, source: std::io::Error },
    #[error("config parse error: {0}")]
    ConfigParse(String),
    #[error("{0}")]
    Config(isac_core::Error),
    #[error("simulation failed: {0}")]
    Simulation(isac_core::Error),
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed {path}: {reason}")]
    Malformed { path: PathBuf, reason: String },
    #[error("audit mismatch: {0}")]
    Audit(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ConfigRead { .. } | CliError::ConfigParse(_) | CliError::Config(_) => EXIT_CONFIG,
            CliError::Simulation(_) => EXIT_SIMULATION,
            CliError::Io { .. } | CliError::Malformed { .. } => EXIT_IO,
            CliError::Audit(_) => EXIT_AUDIT,
        }
    }
}

impl From<isac_core::Error> for CliError {
    fn from(e: isac_core::Error) -> Self {
        match e {
            isac_core::Error::InvalidConfig { .. } => CliError::Config(e),
            other => CliError::Simulation(other),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

/// Parses and validates TOML config text; absent keys take defaults.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::ConfigParse(e.to_string()))?;
    cfg.validate().map_err(CliError::Config)?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|source| CliError::ConfigRead {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text)
}

pub fn serialize_config(cfg: &ExperimentConfig) -> String {
    toml::to_string(cfg).expect("config is always representable as TOML")
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub study: Option<Study>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub fixed_layout: bool,
    pub literal_steering: bool,
}

impl Overrides {
    pub fn apply(&self, mut cfg: ExperimentConfig) -> Result<ExperimentConfig> {
        if let Some(s) = self.study {
            cfg.experiment = s;
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if self.fixed_layout {
            cfg.layout = isac_core::experiments::Layout::Fixed;
        }
        if self.literal_steering {
            cfg.steering_norm = isac_core::transmit::SteeringNorm::Literal;
        }
        cfg.validate().map_err(CliError::Config)?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveFile {
    pub sweep_id: String,
    pub arch: Architecture,
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub seed: u64,
    pub workers: usize,
    pub config: ExperimentConfig,
    pub samples: String,
    pub summary: String,
    pub curves: Vec<CurveFile>,
    pub wall_clock_s: f64,
}

pub const SAMPLES_FILE: &str = "samples.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(io_err(path))
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii fields")
}

/// `trial,arch,sweep_id,gamma_linear,gamma_db` with round-trip precision.
pub fn samples_csv(samples: &[SnrSample]) -> String {
    csv_text(
        &["trial", "arch", "sweep_id", "gamma_linear", "gamma_db"],
        samples.iter().map(|s| {
            vec![
                s.trial.to_string(),
                s.arch.to_string(),
                s.sweep_id.clone(),
                s.gamma_linear.to_string(),
                s.gamma_db.to_string(),
            ]
        }),
    )
}

pub fn parse_samples_csv(path: &Path) -> Result<Vec<SnrSample>> {
    let malformed = |reason: String| CliError::Malformed { path: path.to_path_buf(), reason };
    let mut reader = csv::Reader::from_path(path).map_err(|e| malformed(e.to_string()))?;
    let mut out = Vec::new();
    for record in reader.records() {
        let r = record.map_err(|e| malformed(e.to_string()))?;
        if r.len() != 5 {
            return Err(malformed(format!("expected 5 fields, got {}", r.len())));
        }
        let arch = match &r[1] {
            "cf" => Architecture::Cf,
            "mc" => Architecture::Mc,
            other => return Err(malformed(format!("unknown architecture {other:?}"))),
        };
        let num = |i: usize| r[i].parse::<f64>().map_err(|e| malformed(format!("{}: {e}", &r[i])));
        out.push(SnrSample {
            trial: r[0].parse().map_err(|e| malformed(format!("trial: {e}")))?,
            arch,
            sweep_id: r[2].to_owned(),
            gamma_linear: num(3)?,
            gamma_db: num(4)?,
        });
    }
    Ok(out)
}

/// Plot data for one curve: a comment naming the curve, a header, then
/// `(snr_db, cumulative_probability)` rows rounded to 6 decimals.
pub fn cdf_text(arch: Architecture, sweep_id: &str, cdf: &EmpiricalCdf) -> String {
    let mut text = format!("# arch={arch}, sweep={sweep_id}\nsnr_db,cumulative_probability\n");
    for (v, p) in cdf.points() {
        text.push_str(&format!("{v:.6},{p:.6}\n"));
    }
    text
}

pub fn cdf_file_name(arch: Architecture, sweep_id: &str) -> String {
    format!("cdf_{arch}_{sweep_id}.csv")
}

/// Curves keyed by sweep id in first-appearance order.
fn group(samples: &[SnrSample]) -> Vec<(String, BTreeMap<Architecture, Vec<f64>>)> {
    let mut order: Vec<(String, BTreeMap<Architecture, Vec<f64>>)> = Vec::new();
    for s in samples {
        let idx = match order.iter().position(|(id, _)| *id == s.sweep_id) {
            Some(i) => i,
            None => {
                order.push((s.sweep_id.clone(), BTreeMap::new()));
                order.len() - 1
            }
        };
        order[idx].1.entry(s.arch).or_default().push(s.gamma_db);
    }
    order
}

/// Percentiles 5/50/95 per curve and the paired CF-over-MC fraction per
/// sweep point, recomputable from `samples.csv` alone.
pub fn summary_csv(samples: &[SnrSample]) -> Result<String> {
    let mut rows = Vec::new();
    for (sweep_id, curves) in group(samples) {
        let exceed = match (curves.get(&Architecture::Cf), curves.get(&Architecture::Mc)) {
            (Some(cf), Some(mc)) => isac_core::experiments::exceed_fraction(cf, mc)
                .map(|f| format!("{f:.6}"))
                .map_err(CliError::Simulation)?,
            _ => String::new(),
        };
        for (arch, values) in &curves {
            let cdf = EmpiricalCdf::new(values).map_err(CliError::Simulation)?;
            rows.push(vec![
                sweep_id.clone(),
                arch.to_string(),
                values.len().to_string(),
                format!("{:.6}", cdf.percentile(5.0)),
                format!("{:.6}", cdf.percentile(50.0)),
                format!("{:.6}", cdf.percentile(95.0)),
                exceed.clone(),
            ]);
        }
    }
    Ok(csv_text(&["sweep_id", "arch", "count", "p5", "p50", "p95", "cf_exceeds_mc"], rows))
}

/// Writes every CDF file for the study and returns their manifest entries.
pub fn emit_plot_data(result: &StudyResult, out_dir: &Path) -> Result<Vec<CurveFile>> {
    let mut files = Vec::new();
    for point in &result.points {
        for arch in [Architecture::Cf, Architecture::Mc] {
            let cdf = result.cdf(&point.id, arch).map_err(CliError::Simulation)?;
            let name = cdf_file_name(arch, &point.id);
            write_file(&out_dir.join(&name), &cdf_text(arch, &point.id, &cdf))?;
            files.push(CurveFile {
                sweep_id: point.id.clone(),
                arch,
                path: name,
            });
        }
    }
    Ok(files)
}

/// Runs the configured study and writes all outputs; the manifest goes last.
pub fn execute(cfg: &ExperimentConfig, workers: usize, out_dir: &Path) -> Result<RunManifest> {
    let started = Instant::now();
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let result = run_study(cfg, cfg.experiment, workers)?;
    write_file(&out_dir.join(SAMPLES_FILE), &samples_csv(&result.samples))?;
    let curves = emit_plot_data(&result, out_dir)?;
    write_file(&out_dir.join(SUMMARY_FILE), &summary_csv(&result.samples)?)?;
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_owned(),
        seed: cfg.seed,
        workers,
        config: cfg.clone(),
        samples: SAMPLES_FILE.into(),
        summary: SUMMARY_FILE.into(),
        curves,
        wall_clock_s: started.elapsed().as_secs_f64(),
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_file(&out_dir.join(MANIFEST_FILE), &json)?;
    Ok(manifest)
}

/// Recomputes `summary.csv` from `samples.csv` and compares byte for byte.
pub fn audit(out_dir: &Path) -> Result<()> {
    let manifest_path = out_dir.join(MANIFEST_FILE);
    if !manifest_path.exists() {
        return Err(CliError::Audit(format!("{} missing; run incomplete", manifest_path.display())));
    }
    let samples = parse_samples_csv(&out_dir.join(SAMPLES_FILE))?;
    let expected = summary_csv(&samples)?;
    let summary_path = out_dir.join(SUMMARY_FILE);
    let actual = fs::read_to_string(&summary_path).map_err(io_err(&summary_path))?;
    if expected != actual {
        let line = expected
            .lines()
            .zip(actual.lines())
            .position(|(a, b)| a != b)
            .map_or_else(|| "line count differs".to_owned(), |i| format!("first difference on line {}", i + 1));
        return Err(CliError::Audit(format!("summary.csv does not match samples.csv ({line})")));
    }
    Ok(())
}
