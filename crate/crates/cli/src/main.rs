use std::fs::{self, File};
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use truncvar_core::analytics::{self, BmParams, SeriesConfig};
use truncvar_core::approx::{build_adapted, build_f_c};
use truncvar_core::crossing::{self, linear_grid, tv_profile_in_c, variation_profile};
use truncvar_core::mc::{self, McConfig, Quantity};
use truncvar_core::path::{sup_distance, total_variation};
use truncvar_core::{csv_io, CadlagPath, Error, TruncationLevel};

mod verify;

#[derive(Parser)]
#[command(name = "truncvar", version, about = "Truncated variation of sampled paths and Brownian-motion analytics")]
struct Cli {
    /// Write the primary output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// TV^c, UTV^c and DTV^c of a path read from CSV.
    Tv {
        #[arg(long, allow_hyphen_values = true)]
        c: f64,
        #[arg(long = "in")]
        input: PathBuf,
        /// Include the running processes at every sample time.
        #[arg(long)]
        profile: bool,
    },
    /// Optimal approximants f^c, f^{i,c} and the adapted X~^c.
    Approx {
        #[arg(long, allow_hyphen_values = true)]
        c: f64,
        #[arg(long = "in")]
        input: PathBuf,
        /// Directory for f_c.csv, f_ic.csv and x_tilde_c.csv.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// TV^c as a function of c, as CSV.
    Profile {
        /// Inclusive grid `start:stop:count`.
        #[arg(long)]
        c_grid: String,
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Closed forms for Brownian motion with drift killed at an exponential time.
    Analytics {
        #[arg(long, allow_hyphen_values = true)]
        mu: f64,
        #[arg(long, allow_hyphen_values = true)]
        nu: f64,
        #[arg(long, allow_hyphen_values = true)]
        c: f64,
        #[arg(long, allow_hyphen_values = true)]
        lambda: Option<f64>,
        /// Also evaluate the fixed-time series at this horizon.
        #[arg(long = "T", allow_hyphen_values = true)]
        horizon: Option<f64>,
        #[arg(long, default_value_t = SeriesConfig::default().k_max)]
        k_max: usize,
        #[arg(long, default_value_t = SeriesConfig::default().quad_tol)]
        quad_tol: f64,
    },
    /// Monte Carlo estimate of one quantity, compared with its closed form.
    Mc {
        #[arg(long, value_enum)]
        quantity: McQuantity,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        mu: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = 1.0)]
        nu: f64,
        /// Truncation level; optional for `cor-trend` when `--c-list` is given.
        #[arg(long, allow_hyphen_values = true)]
        c: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        lambda: Option<f64>,
        /// Horizon for fixed-time quantities and the adaptedness test.
        #[arg(long = "T", allow_hyphen_values = true, default_value_t = 1.0)]
        horizon: f64,
        /// Comma-separated decreasing levels for `cor-trend`.
        #[arg(long, value_delimiter = ',')]
        c_list: Vec<f64>,
        #[arg(long, default_value_t = 10_000)]
        n_paths: usize,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        antithetic: bool,
        #[arg(long)]
        richardson: bool,
        #[arg(long)]
        strict: bool,
    },
    /// Streaming engine against brute-force enumeration.
    Verify {
        /// Longest lattice path enumerated exhaustively.
        #[arg(long, default_value_t = 6)]
        max_n: usize,
        /// Number of additional random paths.
        #[arg(long, default_value_t = 0)]
        random: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum McQuantity {
    MeanTv,
    MeanUtv,
    MeanDtv,
    SecondTv,
    SecondUtv,
    SecondDtv,
    CrossExp,
    CovExp,
    MgfTv,
    MeanUtvFixed,
    CrossFixed,
    CovFixed,
    CorFixed,
    CorTrend,
    Adaptedness,
}

enum Failure {
    Input(String, String),
    Verification(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Input(e.kind().into(), e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Input("io".into(), e.to_string())
    }
}

fn input_error(kind: &str, message: impl Into<String>) -> Failure {
    Failure::Input(kind.into(), message.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            report_error("usage", &e.render().to_string());
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(kind, message)) => {
            report_error(&kind, &message);
            ExitCode::from(1)
        }
        Err(Failure::Verification(message)) => {
            report_error("verification", &message);
            ExitCode::from(2)
        }
    }
}

fn report_error(kind: &str, message: &str) {
    let body = json!({ "error": { "kind": kind, "message": message.trim_end() } });
    eprintln!("{body}");
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("TRUNCVAR_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| input_error("config", format!("TRUNCVAR_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| input_error("config", e.to_string()))
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    let text = match cli.command {
        Command::Tv { c, input, profile } => tv(c, &input, profile)?,
        Command::Approx { c, input, out_dir } => approx(c, &input, &out_dir)?,
        Command::Profile { c_grid, input } => profile(&c_grid, &input)?,
        Command::Analytics {
            mu,
            nu,
            c,
            lambda,
            horizon,
            k_max,
            quad_tol,
        } => {
            let params = BmParams::new(mu, nu, c)?;
            let report = analytics::analytics_report(&params, lambda, horizon, &SeriesConfig { k_max, quad_tol })?;
            to_json(&report)
        }
        Command::Mc {
            quantity,
            mu,
            nu,
            c,
            lambda,
            horizon,
            c_list,
            n_paths,
            dt,
            seed,
            antithetic,
            richardson,
            strict,
        } => {
            let cfg = McConfig {
                n_paths,
                dt,
                horizon,
                seed,
                antithetic,
                richardson,
                strict,
            };
            monte_carlo(quantity, mu, nu, c, lambda, horizon, &c_list, &cfg)?
        }
        Command::Verify { max_n, random, seed, json } => {
            let outcome = verify::run(max_n, random, seed)?;
            let text = if json { to_json(&outcome) } else { outcome.table() };
            emit(cli.out.as_deref(), &text)?;
            if !outcome.passed {
                return Err(Failure::Verification("streaming results differ from the brute-force oracle".into()));
            }
            return Ok(());
        }
    };
    emit(cli.out.as_deref(), &text)
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn read_input(path: &Path) -> Result<CadlagPath, Failure> {
    let file = File::open(path).map_err(|e| input_error("io", format!("{}: {e}", path.display())))?;
    Ok(csv_io::read_path(BufReader::new(file))?)
}

#[derive(Serialize)]
struct TvReport {
    c: f64,
    n: usize,
    tv: f64,
    utv: f64,
    dtv: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    profile: Option<ProfileColumns>,
}

#[derive(Serialize)]
struct ProfileColumns {
    t: Vec<f64>,
    utv: Vec<f64>,
    dtv: Vec<f64>,
    tv: Vec<f64>,
}

fn tv(c: f64, input: &Path, with_profile: bool) -> Result<String, Failure> {
    let level = TruncationLevel::new(c)?;
    let path = read_input(input)?;
    let prof = variation_profile(&path, level);
    let last = prof.final_values();
    Ok(to_json(&TvReport {
        c,
        n: path.len(),
        tv: last.tv,
        utv: last.utv,
        dtv: last.dtv,
        profile: with_profile.then(|| ProfileColumns {
            t: path.times().to_vec(),
            utv: prof.utv,
            dtv: prof.dtv,
            tv: prof.tv,
        }),
    }))
}

fn approx(c: f64, input: &Path, out_dir: &Path) -> Result<String, Failure> {
    let level = TruncationLevel::new(c)?;
    let path = read_input(input)?;
    let bundle = build_f_c(&path, level);
    let adapted = build_adapted(&path, level);
    fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    for (name, p) in [("f_c.csv", &bundle.f_c), ("f_ic.csv", &bundle.f_ic), ("x_tilde_c.csv", &adapted.x_tilde_c)] {
        let target = out_dir.join(name);
        csv_io::write_path(File::create(&target)?, p)?;
        files.push(target.display().to_string());
    }
    let tv_c = crossing::truncated_variation(&path, level);
    Ok(to_json(&json!({
        "c": c,
        "n": path.len(),
        "branch": bundle.branch,
        "alpha": bundle.alpha,
        "alpha_0": bundle.alpha_0,
        "tv_c": tv_c,
        "tv_f_c": total_variation(&bundle.f_c),
        "tv_f_ic": total_variation(&bundle.f_ic),
        "tv_x_tilde_c": total_variation(&adapted.x_tilde_c),
        "sup_distance_f_c": sup_distance(&path, &bundle.f_c)?,
        "sup_distance_x_tilde_c": sup_distance(&path, &adapted.x_tilde_c)?,
        "stopping_indices": adapted.stopping_indices,
        "files": files,
    })))
}

fn parse_grid(spec: &str) -> Result<Vec<f64>, Failure> {
    let bad = || input_error("invalid_argument", format!("c grid must be start:stop:count, got {spec:?}"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [a, b, n] = parts[..] else {
        return Err(bad());
    };
    let a: f64 = a.trim().parse().map_err(|_| bad())?;
    let b: f64 = b.trim().parse().map_err(|_| bad())?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    Ok(linear_grid(a, b, n)?)
}

fn profile(grid: &str, input: &Path) -> Result<String, Failure> {
    let grid = parse_grid(grid)?;
    let path = read_input(input)?;
    let rows = tv_profile_in_c(&path, &grid)?;
    let mut out = String::from("c,tv\n");
    for (c, tv) in rows {
        out.push_str(&format!("{c},{tv}\n"));
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn monte_carlo(quantity: McQuantity, mu: f64, nu: f64, c: Option<f64>, lambda: Option<f64>, horizon: f64, c_list: &[f64], cfg: &McConfig) -> Result<String, Failure> {
    if let McQuantity::CorTrend = quantity {
        let levels = match (c_list.is_empty(), c) {
            (false, _) => c_list.to_vec(),
            (true, Some(c)) => vec![c],
            (true, None) => return Err(input_error("usage", "cor-trend needs --c-list or --c")),
        };
        let points = analytics::correlation_smallc_report(mu, &levels, horizon, cfg)?;
        return Ok(to_json(&json!({
            "quantity": "cor-trend",
            "mu": mu,
            "T": horizon,
            "config": cfg,
            "points": points,
        })));
    }
    let c = c.ok_or_else(|| input_error("usage", "--c is required"))?;
    let params = BmParams::new(mu, nu, c)?;
    let q = match quantity {
        McQuantity::MeanTv => Quantity::MeanTV,
        McQuantity::MeanUtv => Quantity::MeanUTV,
        McQuantity::MeanDtv => Quantity::MeanDTV,
        McQuantity::SecondTv => Quantity::SecondTV,
        McQuantity::SecondUtv => Quantity::SecondUTV,
        McQuantity::SecondDtv => Quantity::SecondDTV,
        McQuantity::CrossExp => Quantity::CrossExp,
        McQuantity::CovExp => Quantity::CovExp,
        McQuantity::MgfTv => Quantity::MgfTV(lambda.ok_or_else(|| input_error("usage", "mgf-tv needs --lambda"))?),
        McQuantity::MeanUtvFixed => Quantity::MeanUTVFixedT(horizon),
        McQuantity::CrossFixed => Quantity::CrossFixedT(horizon),
        McQuantity::CovFixed => Quantity::CovFixedT(horizon),
        McQuantity::CorFixed => Quantity::CorFixed(horizon),
        McQuantity::CorTrend => unreachable!("handled above"),
        McQuantity::Adaptedness => {
            let report = mc::adaptedness_test(&params, &McConfig { horizon, ..*cfg })?;
            return Ok(to_json(&json!({
                "quantity": "adaptedness",
                "params": params,
                "config": cfg,
                "report": report,
            })));
        }
    };
    let est = mc::estimate(q, &params, cfg)?;
    let closed = mc::closed_form(&q, &params, &SeriesConfig::default())?;
    Ok(to_json(&json!({
        "quantity": q,
        "params": params,
        "config": cfg,
        "estimate": est.mean,
        "se": est.std_error,
        "refined_estimate": est.refined_mean,
        "bias": est.bias,
        "closed_form": closed,
        "z_score": closed.map(|v| est.z_score(v)),
        "within_3se_plus_bias": closed.map(|v| est.within(v, 3.0)),
        "warnings": est.warnings,
    })))
}
