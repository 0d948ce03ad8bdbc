//! `mgpd`: simulate, fit and evaluate multivariate generalized Pareto models from the shell.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure. Failures
//! print a JSON object `{"error", "message", "exit_code"}` on stderr.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use mgpd::{
    cdf, diagnostics, fit, prob_event, simulate, threshold_stability, validate_model, DensityEvaluator, EventSpec,
    ExceedanceData, FitOptions, FitTemplate, GpModel, Method, ProbMethod, QuadratureConfig, RandomStream,
};
use serde::Serialize;

/// Seed used when `--seed` is not given.
const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Parser)]
#[command(name = "mgpd", version, about = "Multivariate generalized Pareto models")]
struct Cli {
    /// Worker threads for parallel sections (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Relative tolerance of the adaptive quadrature.
    #[arg(long, global = true, allow_negative_numbers = true)]
    tol: Option<f64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw excesses and write them as CSV plus a `<out>.meta.json` sidecar.
    Simulate {
        #[command(flatten)]
        model: ModelArg,
        /// Number of rows.
        #[arg(long, short = 'n', default_value_t = 10_000)]
        n: usize,
        #[command(flatten)]
        sampling: Sampling,
        #[arg(long)]
        out: PathBuf,
    },
    /// Maximum-likelihood fit; writes the fit result as JSON.
    Fit {
        /// Starting model, or a template `{"model": ..., "free": ...}` naming the free parameters.
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataArg,
        /// Estimate one shape shared by every component.
        #[arg(long)]
        shared_gamma: bool,
        /// Number of simplex starts.
        #[arg(long, default_value_t = 5)]
        starts: usize,
        /// Seed for the perturbed restarts.
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Density at each row of `--data`, appended as a `density` column.
    Density {
        #[command(flatten)]
        model: ModelArg,
        #[command(flatten)]
        data: DataArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cdf at each row of `--data`, appended as a `cdf` column.
    Cdf {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Probability of an event given as JSON.
    Prob {
        #[command(flatten)]
        model: ModelArg,
        /// Event file, e.g. `{"type": "halfspace", "weights": [1, 1], "level": 2}`.
        #[arg(long)]
        event: PathBuf,
        /// Estimate by simulation from this many draws instead of quadrature.
        #[arg(long)]
        mc: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Threshold-stability check: exceedance fractions and KS tests of rescaled excesses.
    ///
    /// Uses `--data` as the sample when given, otherwise simulates `n` rows; the reference
    /// sample is always a fresh simulation. `--out` ending in `.csv` gives a flat table.
    Diagnose {
        #[command(flatten)]
        model: ModelArg,
        /// Threshold levels, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        t: Vec<f64>,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Size of each simulated sample.
        #[arg(long, short = 'n', default_value_t = 100_000)]
        n: usize,
        #[command(flatten)]
        sampling: Sampling,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ModelArg {
    /// Model JSON.
    #[arg(long)]
    model: PathBuf,
}

#[derive(Args)]
struct DataArg {
    /// CSV with a header row and one column per component.
    #[arg(long)]
    data: PathBuf,
    /// Censoring thresholds `v_j <= 0`, comma separated.
    #[arg(long, allow_hyphen_values = true, value_delimiter = ',')]
    censor: Option<Vec<f64>>,
}

#[derive(Args)]
struct Sampling {
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// 1 spectral, 2 rejection, 3 Metropolis-Hastings, 4 truncated point process.
    /// Default: 1 for T models, 3 for U, 4 for R.
    #[arg(long)]
    method: Option<u8>,
}

impl Sampling {
    fn method(&self, model: &GpModel) -> Result<Method, Failure> {
        Ok(match self.method {
            Some(k) => Method::from_number(k)?,
            None => Method::default_for(model),
        })
    }
}

// ---------------------------------------------------------------------------------------------
// failures

#[derive(Debug)]
struct Failure {
    kind: &'static str,
    message: String,
    code: u8,
}

impl Failure {
    fn config(message: impl Into<String>) -> Failure {
        Failure {
            kind: "ConfigError",
            message: message.into(),
            code: 2,
        }
    }

    fn data(message: impl Into<String>) -> Failure {
        Failure {
            kind: "DataError",
            message: message.into(),
            code: 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

impl From<mgpd::Error> for Failure {
    fn from(e: mgpd::Error) -> Failure {
        use mgpd::Error::*;
        let code = if e.is_numerical() {
            4
        } else {
            match &e {
                Data(_) | Domain(_) => 3,
                Row { .. } => 3,
                _ => 2,
            }
        };
        Failure {
            kind: e.kind(),
            message: e.to_string(),
            code,
        }
    }
}

// ---------------------------------------------------------------------------------------------
// files

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))
}

fn read_model(path: &Path) -> Result<GpModel, Failure> {
    let model = GpModel::from_json(&read_text(path)?)?;
    check_model(&model)?;
    Ok(model)
}

fn check_model(model: &GpModel) -> Result<(), Failure> {
    let report = validate_model(model);
    if !report.passed() {
        let reasons: Vec<String> = report
            .failures()
            .iter()
            .map(|c| format!("component {}: {}", c.component, c.reason))
            .collect();
        return Err(Failure {
            kind: "ModelError",
            message: format!("model fails validation ({})", reasons.join("; ")),
            code: 2,
        });
    }
    Ok(())
}

/// A CSV table of reals with its header.
struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

fn read_csv(path: &Path) -> Result<Table, Failure> {
    let file = fs::File::open(path).map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Failure::data(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, s)| {
                s.parse::<f64>()
                    .map_err(|_| Failure::data(format!("{}: row {} column {}: '{s}' is not a number", path.display(), i + 1, j + 1)))
            })
            .collect::<Result<Vec<f64>, Failure>>()?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}

fn fmt_real(v: f64) -> String {
    // 17 significant digits round-trip every f64
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

fn csv_bytes(table: &Table) -> Result<Vec<u8>, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io_err = |e: csv::Error| Failure::config(format!("cannot format CSV: {e}"));
    w.write_record(&table.header).map_err(io_err)?;
    for r in &table.rows {
        w.write_record(r.iter().map(|v| fmt_real(*v))).map_err(io_err)?;
    }
    w.into_inner().map_err(|e| Failure::config(format!("cannot format CSV: {e}")))
}

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("output serializes");
    v.push(b'\n');
    v
}

/// Writes every file through a temporary in the same directory and renames only once all
/// of them are complete, so a failure leaves no partial output.
fn write_outputs(files: Vec<(PathBuf, Vec<u8>)>) -> Result<(), Failure> {
    let io_err = |p: &Path, e: io::Error| Failure::config(format!("cannot write {}: {e}", p.display()));
    let mut staged = Vec::with_capacity(files.len());
    for (path, bytes) in files {
        let dir = match path.parent() {
            Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
            _ => PathBuf::from("."),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| io_err(&path, e))?;
        tmp.write_all(&bytes).map_err(|e| io_err(&path, e))?;
        tmp.as_file().sync_all().map_err(|e| io_err(&path, e))?;
        staged.push((path, tmp));
    }
    for (path, tmp) in staged {
        tmp.persist(&path).map_err(|e| io_err(&path, e.error))?;
        info!("wrote {}", path.display());
    }
    Ok(())
}

fn emit(out: Option<PathBuf>, bytes: Vec<u8>) -> Result<(), Failure> {
    match out {
        Some(path) => write_outputs(vec![(path, bytes)]),
        None => io::stdout()
            .write_all(&bytes)
            .map_err(|e| Failure::config(format!("cannot write to stdout: {e}"))),
    }
}

fn exceedance_data(table: &Table, censor: Option<Vec<f64>>, dim: usize) -> Result<ExceedanceData, Failure> {
    if table.header.len() != dim {
        return Err(Failure::data(format!(
            "data has {} columns, model dimension is {dim}",
            table.header.len()
        )));
    }
    Ok(ExceedanceData::new(table.rows.clone(), censor)?)
}

// ---------------------------------------------------------------------------------------------
// commands

#[derive(Serialize)]
struct SimulationMeta<'a> {
    model: &'a GpModel,
    method: u8,
    seed: u64,
    stream: u64,
    n: usize,
    diagnostics: &'a mgpd::sim::SimDiagnostics,
}

fn component_names(d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("x{j}")).collect()
}

fn meta_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(".meta.json");
    out.with_file_name(name)
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(k) = cli.threads {
        if k == 0 {
            return Err(Failure::config("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Failure::config(format!("cannot start thread pool: {e}")))?;
    }
    let mut qc = QuadratureConfig::default();
    if let Some(t) = cli.tol {
        qc = qc.with_rel_tol(t);
    }
    qc.validate()?;

    match cli.command {
        Command::Simulate { model, n, sampling, out } => {
            let model = read_model(&model.model)?;
            let method = sampling.method(&model)?;
            let stream = RandomStream::new(sampling.seed, 0);
            let s = simulate(&model, n, stream, method, &qc)?;
            let table = Table {
                header: component_names(model.dim()),
                rows: s.rows,
            };
            let meta = SimulationMeta {
                model: &model,
                method: method.number(),
                seed: sampling.seed,
                stream: 0,
                n,
                diagnostics: &s.diagnostics,
            };
            write_outputs(vec![(meta_path(&out), json_bytes(&meta)), (out, csv_bytes(&table)?)])
        }
        Command::Fit {
            model,
            data,
            shared_gamma,
            starts,
            seed,
            out,
        } => {
            let text = read_text(&model)?;
            let mut template = match serde_json::from_str::<FitTemplate>(&text) {
                Ok(t) => t,
                Err(_) => FitTemplate::all_free(&GpModel::from_json(&text)?),
            };
            check_model(&template.model)?;
            if shared_gamma {
                template = template.with_shared_gamma();
            }
            let table = read_csv(&data.data)?;
            let ed = exceedance_data(&table, data.censor, template.model.dim())?;
            let opts = FitOptions {
                starts,
                seed,
                quadrature: qc,
                ..FitOptions::default()
            };
            let r = fit(&template, &ed, &opts)?;
            if !r.converged {
                warn!("the simplex search did not converge");
            }
            emit(out, json_bytes(&r))
        }
        Command::Density { model, data, out } => {
            let model = read_model(&model.model)?;
            let mut table = read_csv(&data.data)?;
            if table.header.len() != model.dim() {
                return Err(Failure::data(format!(
                    "data has {} columns, model dimension is {}",
                    table.header.len(),
                    model.dim()
                )));
            }
            if let Some(v) = &data.censor {
                // same validation as the likelihood uses
                ExceedanceData::new(Vec::new(), Some(v.clone()))?;
                if v.len() != model.dim() {
                    return Err(Failure::config(format!("--censor needs {} values", model.dim())));
                }
            }
            let ev = DensityEvaluator::new(&model, &qc)?;
            for (i, row) in table.rows.iter_mut().enumerate() {
                let value = match &data.censor {
                    None => ev.density(row),
                    Some(v) => {
                        let mask: Vec<bool> = row.iter().zip(v).map(|(x, t)| x <= t).collect();
                        let point: Vec<f64> = row.iter().zip(v).zip(&mask).map(|((x, t), c)| if *c { *t } else { *x }).collect();
                        if mask.iter().all(|c| *c) {
                            Ok(0.0)
                        } else {
                            ev.censored_density(&point, &mask)
                        }
                    }
                }
                .map_err(|e| Failure::from(mgpd::Error::Row {
                    row: i,
                    source: Box::new(e),
                }))?;
                row.push(value);
            }
            table.header.push("density".into());
            emit(out, csv_bytes(&table)?)
        }
        Command::Cdf { model, data, out } => {
            let model = read_model(&model.model)?;
            let mut table = read_csv(&data)?;
            if table.header.len() != model.dim() {
                return Err(Failure::data(format!(
                    "data has {} columns, model dimension is {}",
                    table.header.len(),
                    model.dim()
                )));
            }
            for (i, row) in table.rows.iter_mut().enumerate() {
                let value = cdf(&model, row, &qc).map_err(|e| {
                    Failure::from(mgpd::Error::Row {
                        row: i,
                        source: Box::new(e),
                    })
                })?;
                row.push(value);
            }
            table.header.push("cdf".into());
            emit(out, csv_bytes(&table)?)
        }
        Command::Prob {
            model,
            event,
            mc,
            seed,
            out,
        } => {
            let model = read_model(&model.model)?;
            let event: EventSpec = serde_json::from_str(&read_text(&event)?)
                .map_err(|e| Failure::config(format!("invalid event JSON: {e}")))?;
            let method = match mc {
                Some(n) => ProbMethod::MonteCarlo {
                    n,
                    stream: RandomStream::new(seed, 0),
                },
                None => ProbMethod::Quadrature,
            };
            let p = prob_event(&model, &event, method, &qc)?;
            emit(out, json_bytes(&p))
        }
        Command::Diagnose {
            model,
            t,
            data,
            n,
            sampling,
            out,
        } => {
            let model = read_model(&model.model)?;
            let method = sampling.method(&model)?;
            let rows = match data {
                Some(path) => {
                    let table = read_csv(&path)?;
                    exceedance_data(&table, None, model.dim())?;
                    table.rows
                }
                None => simulate(&model, n, RandomStream::new(sampling.seed, 0), method, &qc)?.rows,
            };
            let reference = simulate(&model, n, RandomStream::new(sampling.seed, 1), method, &qc)?.rows;
            let reports = threshold_stability(&rows, &reference, model.margins(), &t)?;
            let as_csv = out.as_ref().is_some_and(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")));
            let bytes = if as_csv {
                stability_table(&reports)?
            } else {
                json_bytes(&reports)
            };
            emit(out, bytes)
        }
    }
}

/// One row per `(t, component)`, ready for plotting.
fn stability_table(reports: &[diagnostics::StabilityReport]) -> Result<Vec<u8>, Failure> {
    let mut table = Table {
        header: ["t", "component", "exceedances", "fraction", "fraction_ratio", "ks_statistic", "ks_p_value"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        rows: Vec::new(),
    };
    for r in reports {
        for (j, ks) in r.margins.iter().enumerate() {
            table.rows.push(vec![
                r.t,
                (j + 1) as f64,
                r.exceedances as f64,
                r.fraction,
                r.fraction_ratio,
                ks.statistic,
                ks.p_value,
            ]);
        }
    }
    csv_bytes(&table)
}

fn fail(f: &Failure) -> ExitCode {
    let body = serde_json::json!({
        "error": f.kind,
        "message": f.message,
        "exit_code": f.code,
    });
    eprintln!("{body}");
    ExitCode::from(f.code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MGPD_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            return fail(&Failure::config(e.to_string().trim().to_string()));
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => fail(&f),
    }
}
