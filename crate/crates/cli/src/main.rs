//! `stepp`: simulate, fit, align and run intervention scenarios.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 data or model
//! error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use stepp_core::alignment::{align_sequence, PositionMap};
use stepp_core::format::{
    fixed_parameters, gof_csv_header, push_gof_rows, read_panel, scenario_csv, to_canonical_json, write_panel,
    FitReport, InitialSection, ModelSection, RunConfig, ThetaSection,
};
use stepp_core::inference::{deviance, fit_mle, gof_summaries, log_likelihood, rescale, Alternative, FitOptions};
use stepp_core::simulation::{random_seed_wave, run_scenario, simulate_replicates, Scenario, SeedStream};
use stepp_core::{ModelConfig64, Panel64, SteppError, WaveState64};

#[derive(Parser)]
#[command(name = "stepp", version, about = "Spatial temporal exponential-family point processes")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "STEPP_THREADS")]
    threads: Option<usize>,
    /// Suppress progress and summary output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Root random seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate panels from a configuration.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Number of replicates (overrides the config).
        #[arg(long)]
        replicates: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Fit a panel by maximum likelihood and write a report.
    Fit {
        #[arg(long)]
        panel: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// JSON parameter file for the null hypothesis.
        #[arg(long)]
        null_params: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Rigidly align every wave of one or more panels to a reference wave.
    Align {
        /// Panel file whose first wave is the reference.
        #[arg(long)]
        reference: PathBuf,
        /// Panel files to align; their waves are concatenated in order.
        #[arg(long, required = true)]
        panel: Vec<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Run control and intervention arms of a scenario.
    Intervene {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        replicates: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl From<SteppError> for Failure {
    fn from(e: SteppError) -> Self {
        let code = match e {
            SteppError::InvalidConfig(_) | SteppError::TooFewWaves | SteppError::InvalidScenario(_) => 2,
            _ => 3,
        };
        Failure { code, message: e.to_string() }
    }
}

fn usage(message: String) -> Failure {
    Failure { code: 2, message }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure { code: 3, message: format!("cannot create {}: {e}", dir.display()) })?;
    }
    fs::write(path, text).map_err(|e| Failure { code: 3, message: format!("cannot write {}: {e}", path.display()) })
}

fn load_config(path: &Path) -> Result<RunConfig, Failure> {
    RunConfig::parse(&read(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// `dir/stem{suffix}.ext`.
fn sibling(path: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}.{ext}"))
}

fn output(common: &Common, config: Option<&RunConfig>, base: Option<&Path>, default: &str) -> PathBuf {
    if let Some(p) = &common.out {
        return p.clone();
    }
    match config.and_then(|c| c.out.as_ref()) {
        Some(p) => base.map_or_else(|| PathBuf::from(p), |b| b.join(p)),
        None => PathBuf::from(default),
    }
}

fn config_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn seed_wave(config: &RunConfig, cfg: &ModelConfig64, base: &Path, seeds: SeedStream) -> Result<WaveState64, Failure> {
    match &config.initial {
        None => Err(usage("initial: required (either {\"random\": {...}} or {\"panel\": {...}})".into())),
        Some(InitialSection::Random(r)) => {
            let probs = match &r.covariate_probs {
                Some(p) => p.clone(),
                None => cfg.supports.iter().map(|s| vec![1.0 / s.len() as f64; s.len()]).collect(),
            };
            if probs.len() != cfg.q() || probs.iter().zip(&cfg.supports).any(|(p, s)| p.len() != s.len()) {
                return Err(usage("initial.random.covariate_probs: need one pmf per covariate over its support".into()));
            }
            if !(r.spread >= 0.0 && r.spread.is_finite()) {
                return Err(usage("initial.random.spread: must be nonnegative".into()));
            }
            Ok(random_seed_wave(r.actors, r.spread, &probs, cfg, seeds))
        }
        Some(InitialSection::Panel(p)) => {
            let path = base.join(&p.path);
            let panel = read_panel(&read(&path)?, &config.model)?;
            if panel.config.supports != cfg.supports || panel.config.d != cfg.d {
                return Err(usage("initial.panel: panel shape does not match the model".into()));
            }
            let idx = p.wave.unwrap_or(panel.waves.len().saturating_sub(1));
            panel
                .waves
                .get(idx)
                .cloned()
                .ok_or_else(|| usage(format!("initial.panel.wave: panel has {} waves", panel.waves.len())))
        }
    }
}

fn simulate(config_path: &Path, replicates: Option<usize>, common: &Common, quiet: bool) -> Result<(), Failure> {
    let config = load_config(config_path)?;
    let base = config_dir(config_path);
    let cfg = config.model.build(None)?;
    let theta = config.theta(&cfg)?;
    let horizon = config.horizon.ok_or_else(|| usage("horizon: required".into()))?;
    let replicates = replicates.or(config.replicates).unwrap_or(1);
    if replicates == 0 {
        return Err(usage("replicates: must be at least 1".into()));
    }
    let seeds = SeedStream::new(common.seed.or(config.seed).unwrap_or(0));
    let start = seed_wave(&config, &cfg, &base, seeds)?;
    let panels = simulate_replicates(&start, &theta, &cfg, horizon, replicates, seeds)?;

    let out = output(common, Some(&config), Some(&base), "panel.json");
    let mut gof = gof_csv_header(cfg.q());
    for (r, panel) in panels.iter().enumerate() {
        let path = if replicates == 1 { out.clone() } else { sibling(&out, &format!("_r{r:04}"), "json") };
        write(&path, &write_panel(panel)?)?;
        push_gof_rows(&mut gof, r, &gof_summaries(panel));
    }
    let gof_path = sibling(&out, "_gof", "csv");
    write(&gof_path, &gof)?;
    if !quiet {
        println!(
            "wrote {replicates} panel(s) of {} waves to {} and summaries to {}",
            horizon + 1,
            out.display(),
            gof_path.display()
        );
    }
    Ok(())
}

fn fit(panel_path: &Path, config_path: Option<&Path>, null_path: Option<&Path>, common: &Common, quiet: bool) -> Result<(), Failure> {
    let config = match config_path {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    let panel = read_panel(&read(panel_path)?, &config.model)?;
    let cfg = panel.config.clone();
    let section = config.fit.clone().unwrap_or_default();
    let null = match null_path {
        Some(p) => {
            let text = read(p)?;
            let t: ThetaSection =
                serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", p.display())))?;
            t.build(&cfg, stepp_core::MigrationParams::closed(&cfg), "null-params")?
        }
        None => config.null(&cfg)?,
    };
    let init = match &section.init {
        Some(t) => Some(t.build(&cfg, config.migration(&cfg)?, "fit.init")?),
        None => None,
    };
    let mut opts = FitOptions::<f64> {
        fixed: fixed_parameters(&section.fixed, &cfg)?,
        fit_migration: section.fit_migration,
        seed: common.seed.or(section.seed).or(config.seed).unwrap_or(0),
        ..Default::default()
    };
    if let Some(s) = section.starts {
        opts.starts = s;
    }
    if let Some(m) = section.max_iterations {
        opts.bfgs.max_iterations = m;
    }
    let result = fit_mle(&panel, init.as_ref(), &opts)?;
    let report = FitReport {
        fit: &result,
        config: &cfg,
        null: &null,
        null_log_lik: log_likelihood(&panel, &null)?,
        deviance: deviance(&panel, &result.theta_hat, &null),
        rescaled: rescale(&result.theta_hat),
        force_alternative: if section.one_sided { Alternative::Greater } else { Alternative::TwoSided },
    };
    let out = output(common, Some(&config), config_path.map(config_dir).as_deref(), "fit.json");
    let text = report.to_text();
    write(&out, &to_canonical_json(&report.to_json())?)?;
    write(&sibling(&out, "", "txt"), &text)?;
    if !quiet {
        print!("{text}");
    }
    Ok(())
}

fn align(reference: &Path, panels: &[PathBuf], config_path: Option<&Path>, common: &Common, quiet: bool) -> Result<(), Failure> {
    let model = match config_path {
        Some(p) => load_config(p)?.model,
        None => ModelSection::default(),
    };
    let reference = read_panel(&read(reference)?, &model)?;
    let target = reference.waves.first().ok_or_else(|| usage("reference panel has no waves".into()))?;
    let mut waves = Vec::new();
    let mut cfg = None;
    for path in panels {
        let p = read_panel(&read(path)?, &model)?;
        if p.config.d != reference.config.d {
            return Err(Failure { code: 3, message: format!("{}: dimension differs from the reference", path.display()) });
        }
        cfg.get_or_insert_with(|| p.config.clone());
        waves.extend(p.waves);
    }
    let cfg = cfg.expect("at least one panel");
    let maps: Vec<PositionMap<f64>> = waves.iter().map(|w| w.positions.clone()).collect();
    let aligned = align_sequence(&maps, &target.positions)?;
    let mut residual = 0.0;
    for (wave, a) in waves.iter_mut().zip(aligned) {
        wave.positions = a.aligned;
        residual += a.residual;
    }
    let panel = Panel64::validated(cfg, waves)?;
    let out = output(common, None, None, "aligned.json");
    write(&out, &write_panel(&panel)?)?;
    if !quiet {
        println!("aligned {} waves to {}; total residual {residual:.6e}", panel.waves.len(), out.display());
    }
    Ok(())
}

fn intervene(config_path: &Path, replicates: Option<usize>, common: &Common, quiet: bool) -> Result<(), Failure> {
    let config = load_config(config_path)?;
    let base = config_dir(config_path);
    let cfg = config.model.build(None)?;
    let seeds = SeedStream::new(common.seed.or(config.seed).unwrap_or(0));
    let scenario = Scenario {
        base: seed_wave(&config, &cfg, &base, seeds)?,
        theta: config.theta(&cfg)?,
        horizon: config.horizon.ok_or_else(|| usage("horizon: required".into()))?,
        replicates: replicates.or(config.replicates).unwrap_or(1),
        interventions: config.interventions(&cfg)?,
        config: cfg.clone(),
    };
    let report = run_scenario(&scenario, seeds)?;
    let out = output(common, Some(&config), Some(&base), "scenario.csv");
    write(&out, &scenario_csv(&report, &cfg))?;
    let meta = json!({
        "replicates": report.replicates,
        "horizon": scenario.horizon,
        "seed": seeds.root,
        "actors": scenario.base.len(),
        "interventions": config.interventions,
        "warnings": report.warnings,
        "table": out.file_name().map(|f| f.to_string_lossy().into_owned()),
    });
    write(&sibling(&out, "", "json"), &to_canonical_json(&meta)?)?;
    if !quiet {
        for w in &report.warnings {
            eprintln!("warning: {w}");
        }
        println!("wrote {} prevalence rows to {}", report.rows.len(), out.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| usage(format!("cannot start thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Simulate { config, replicates, common } => simulate(config, *replicates, common, cli.quiet),
        Command::Fit { panel, config, null_params, common } => {
            fit(panel, config.as_deref(), null_params.as_deref(), common, cli.quiet)
        }
        Command::Align { reference, panel, config, common } => align(reference, panel, config.as_deref(), common, cli.quiet),
        Command::Intervene { config, replicates, common } => intervene(config, *replicates, common, cli.quiet),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
