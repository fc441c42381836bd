use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use ddp_fpm::analyst::Strategy;
use ddp_fpm::data::{load_dataset_with, IdMapping};
use ddp_fpm::patterns::{exact_fpm_with_support, PatternKind, PatternUniverse, DEFAULT_MAX_LENGTH};
use ddp_fpm::runtime::{run_experiment, ExperimentError};
use rayon::prelude::*;

use crate::report::{write_rows, CsvRow, RunReport};
use crate::settings::{Overrides, Population, Settings};
use crate::CliError;

fn experiment_error(e: ExperimentError) -> CliError {
    CliError::Config(e.to_string())
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn execute(settings: &Settings, population: &Population) -> Result<RunReport, CliError> {
    let experiment = settings.experiment(population.universe, population.owners.len())?;
    let result = run_experiment(&experiment, &population.owners).map_err(experiment_error)?;
    Ok(RunReport::new(settings.clone(), experiment, population.owners.len(), result))
}

pub fn run(overrides: Overrides, out_dir: &Path, name: &str) -> Result<(), CliError> {
    let settings = overrides.resolve()?;
    let population = settings.load_population()?;
    let report = execute(&settings, &population)?;

    create_dir(out_dir)?;
    let json_path = out_dir.join(format!("{name}.json"));
    let csv_path = out_dir.join(format!("{name}.csv"));
    write_file(&json_path, report.to_json().as_bytes())?;
    let mut csv = Vec::new();
    write_rows(&mut csv, &[report.row()])?;
    write_file(&csv_path, &csv)?;

    let r = &report.result;
    println!(
        "mined {} patterns (truth {}), F1 {:.4}, precision {:.4}, recall {:.4}, owners {}, rounds {}",
        r.mined.len(),
        r.truth.len(),
        r.f1,
        r.precision,
        r.recall,
        r.owners_used,
        r.rounds
    );
    println!("wrote {} and {}", json_path.display(), csv_path.display());
    if r.exhausted {
        return Err(CliError::Exhausted);
    }
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct Grid {
    pub f: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub k: Vec<usize>,
    pub strategies: Vec<Strategy>,
    pub repeats: u64,
}

pub fn sweep(overrides: Overrides, grid: Grid, out_dir: &Path, name: &str) -> Result<(), CliError> {
    let base = overrides.resolve()?;
    if grid.repeats == 0 {
        return Err(CliError::Config("repeats must be at least 1".into()));
    }
    let or_base = |v: Vec<f64>, d: f64| if v.is_empty() { vec![d] } else { v };
    let fs_ = or_base(grid.f, base.f);
    let epsilons = or_base(grid.epsilon, base.epsilon);
    let ks = if grid.k.is_empty() { vec![base.k] } else { grid.k };
    let strategies = if grid.strategies.is_empty() { vec![base.strategy] } else { grid.strategies };
    let seeds: Vec<u64> = (0..grid.repeats).map(|i| base.seed.wrapping_add(i)).collect();

    let mut populations = BTreeMap::new();
    for &seed in &seeds {
        let settings = Settings { seed, ..base.clone() };
        populations.insert(seed, settings.load_population()?);
    }

    let mut jobs = Vec::new();
    for &f in &fs_ {
        for &epsilon in &epsilons {
            for &k in &ks {
                for &strategy in &strategies {
                    for &seed in &seeds {
                        jobs.push(Settings { f, epsilon, k, strategy, seed, ..base.clone() });
                    }
                }
            }
        }
    }
    let rows: Vec<CsvRow> = jobs
        .par_iter()
        .map(|settings| match execute(settings, &populations[&settings.seed]) {
            Ok(report) => report.row(),
            Err(e) => CsvRow {
                f: settings.f,
                epsilon: settings.epsilon,
                k: settings.k,
                p: settings.p,
                tau: settings.tau,
                strategy: settings.strategy.to_string(),
                f1: None,
                precision: None,
                recall: None,
                owners: None,
                rounds: None,
                seed: settings.seed,
                status: format!("error: {e}"),
            },
        })
        .collect();

    create_dir(out_dir)?;
    let path = out_dir.join(format!("{name}.csv"));
    let mut csv = Vec::new();
    write_rows(&mut csv, &rows)?;
    write_file(&path, &csv)?;
    let failed = rows.iter().filter(|r| r.status != "ok").count();
    println!("wrote {} rows to {} ({failed} not ok)", rows.len(), path.display());
    Ok(())
}

pub fn oracle(
    dataset: &Path,
    f: f64,
    kind: PatternKind,
    mapping: IdMapping,
    max_length: Option<usize>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    if !(f > 0.0 && f < 1.0) {
        return Err(CliError::Config(format!("f must lie in (0, 1), got {f}")));
    }
    let loaded = load_dataset_with(dataset, kind, mapping).map_err(|e| CliError::Io(format!("{}: {e}", dataset.display())))?;
    let universe = PatternUniverse::new(loaded.universe_size, kind, max_length.unwrap_or(DEFAULT_MAX_LENGTH))
        .map_err(|e| CliError::Config(e.to_string()))?;
    let mined = exact_fpm_with_support(&loaded.owners, f, &universe).map_err(|e| CliError::Config(e.to_string()))?;
    let mut text = String::new();
    for (pattern, support) in &mined {
        text.push_str(&format!("{pattern}\t{support}\n"));
    }
    match out {
        Some(path) => write_file(path, text.as_bytes()),
        None => io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::Io(e.to_string())),
    }
}

pub fn report(paths: &[PathBuf]) -> Result<(), CliError> {
    let mut rows = Vec::with_capacity(paths.len());
    for path in paths {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        rows.push(RunReport::from_json(&text)?.row());
    }
    write_rows(io::stdout().lock(), &rows)
}
