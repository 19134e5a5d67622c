mod config;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use std::f64::consts::PI;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use config::{Config, NoiseSpec};
use hybrident::bell::{chsh_empirical, chsh_exact, paper_settings, predicted_s_from_visibility};
use hybrident::budget::RateBudget;
use hybrident::elements::{Filtered, TransferMode};
use hybrident::measurement::{fit_fringe, fringe_scan, minmax_visibility, write_counts_csv, Projector};
use hybrident::source::{apply_noise, hybrid_state, hybrid_target, singlet, NoiseModel};
use hybrident::states::{BasisLabel, DensityMatrix};
use hybrident::tomography::{
    fidelity, metric_uncertainties, noise_fit_report, Resampling, TomographyData, TomographyRun,
};

/// Fiber coupling assumed by the deterministic-transferrer rate projection.
const PROJECTED_FIBER_COUPLING: f64 = 0.4;
const FRINGE_POINTS: usize = 24;

#[derive(Parser)]
#[command(
    name = "hybrident",
    version,
    about = "Simulate and analyze polarization-OAM hybrid entanglement"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// 36-setting tomography of the hybrid state.
    Tomography(Common),
    /// Coincidence fringes versus Alice's half-wave-plate angle.
    Fringe(Common),
    /// CHSH test with the standard hybrid settings.
    Chsh(Common),
    /// Coincidence-rate budget.
    Budget {
        #[command(flatten)]
        common: Common,
        /// Ignore the config budget and use the reference efficiencies.
        #[arg(long)]
        paper_defaults: bool,
    },
    /// Source, hybrid state, then every analysis.
    Pipeline(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Acquisition time per setting; for `pipeline` it sets every duration.
    #[arg(long)]
    duration_s: Option<f64>,
    /// Coincidence rate of a complete basis pair.
    #[arg(long)]
    rate_cps: Option<f64>,
    /// Preset (`ideal`, `paper-fit`) or inline JSON noise parameters.
    #[arg(long)]
    noise: Option<String>,
    #[arg(long)]
    deterministic_transferrers: bool,
    /// Use expected counts instead of Poisson draws.
    #[arg(long)]
    exact: bool,
    /// Bootstrap resamples for tomography uncertainties (0 skips).
    #[arg(long, default_value_t = 200)]
    resamples: usize,
}

/// Usage problems exit with 2, everything else with 1.
enum Failure {
    Usage(anyhow::Error),
    Run(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Run(e.into())
    }
}

struct Ctx {
    command: &'static str,
    cfg: Config,
    noise: NoiseModel,
    mode: TransferMode,
    exact: bool,
    resamples: usize,
    out: PathBuf,
}

impl Ctx {
    fn new(command: &'static str, c: &Common) -> Result<Self, Failure> {
        let usage = Failure::Usage;
        let mut cfg = match &c.config {
            Some(p) => Config::load(p).map_err(usage)?,
            None => Config::default(),
        };
        if let Some(s) = c.seed {
            cfg.seed = s;
        }
        if let Some(r) = c.rate_cps {
            cfg.rate_cps = r;
        }
        if let Some(n) = &c.noise {
            cfg.noise = NoiseSpec::parse(n).map_err(usage)?;
        }
        if let Some(d) = c.duration_s {
            match command {
                "tomography" => cfg.durations.tomography = d,
                "chsh" => cfg.durations.chsh = d,
                "fringe" => cfg.durations.fringe = d,
                _ => {
                    cfg.durations.tomography = d;
                    cfg.durations.chsh = d;
                    cfg.durations.fringe = d;
                }
            }
        }
        if c.deterministic_transferrers {
            cfg.budget.deterministic_prep = true;
            cfg.budget.deterministic_det = true;
        }
        cfg.check().map_err(usage)?;
        if c.resamples != 0 && c.resamples < 100 {
            return Err(Failure::Usage(anyhow::anyhow!(
                "--resamples must be 0 or at least 100, got {}",
                c.resamples
            )));
        }
        let noise = cfg.noise.model().map_err(|e| Failure::Usage(e.into()))?;
        Ok(Ctx {
            command,
            cfg,
            noise,
            mode: if c.deterministic_transferrers {
                TransferMode::Deterministic
            } else {
                TransferMode::Probabilistic
            },
            exact: c.exact,
            resamples: c.resamples,
            out: c.out.clone(),
        })
    }

    fn provenance(&self) -> Value {
        json!({
            "artifact": "hybrident",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "seed": self.cfg.seed,
            "config": self.cfg,
            "options": {
                "exact": self.exact,
                "transfer_mode": self.mode,
                "resamples": self.resamples,
            },
        })
    }

    fn mode_name(&self) -> &'static str {
        if self.exact {
            "exact"
        } else {
            "empirical"
        }
    }

    fn hybrid(&self) -> hybrident::Result<Filtered<DensityMatrix>> {
        hybrid_state(&apply_noise(&singlet(), &self.noise)?, self.mode)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> anyhow::Result<()> {
        let text = hybrident::report::to_string(value)?;
        fs::write(self.path(name), text).with_context(|| format!("writing {name}"))
    }
}

fn run_tomography(ctx: &Ctx, rho: &DensityMatrix) -> anyhow::Result<Value> {
    let duration = ctx.cfg.durations.tomography;
    let (data, records) = if ctx.exact {
        (TomographyData::expected(rho, ctx.cfg.rate_cps, duration)?, Vec::new())
    } else {
        TomographyData::simulate(rho, ctx.cfg.rate_cps, duration, ctx.cfg.seed)?
    };
    if !records.is_empty() {
        let f = BufWriter::new(File::create(ctx.path("tomography_counts.csv"))?);
        write_counts_csv(&records, f)?;
    }
    let run = TomographyRun::reconstruct(data.clone(), records)?;
    let metrics = if !ctx.exact && ctx.resamples > 0 {
        metric_uncertainties(&data, ctx.resamples, ctx.cfg.seed, Resampling::Poisson)?
    } else {
        run.metrics()?
    };
    let out = json!({
        "provenance": ctx.provenance(),
        "mode": ctx.mode_name(),
        "noise": ctx.noise,
        "rho_linear": run.rho_linear,
        "rho_mle": run.rho_mle,
        "metrics": metrics,
        "loglik": run.loglik,
        "converged": run.converged,
        "iterations": run.iterations,
        "noise_fit": noise_fit_report(ctx.noise)?,
    });
    ctx.write_json("tomography.json", &out)?;
    println!(
        "tomography: F = {:.6}  C = {:.6}  S_L = {:.6}  (σ_F = {:.4})",
        metrics.fidelity, metrics.concurrence, metrics.linear_entropy, metrics.uncertainties.fidelity
    );
    Ok(out)
}

fn run_fringe(ctx: &Ctx, rho: &DensityMatrix) -> anyhow::Result<Value> {
    let grid: Vec<f64> = (0..FRINGE_POINTS)
        .map(|k| 2.0 * PI * k as f64 / FRINGE_POINTS as f64)
        .collect();
    let mut csv = String::from("bob,theta,counts,expected\n");
    let mut scans = Vec::new();
    let mut visibilities = Vec::new();
    for (k, bob) in [BasisLabel::OamPlus2, BasisLabel::OamH].into_iter().enumerate() {
        // each Bob basis gets its own seed so the scans are independent
        let seed = ctx.cfg.seed.wrapping_add(k as u64);
        let points = fringe_scan(
            rho,
            &Projector::from_label(bob),
            &grid,
            ctx.cfg.rate_cps,
            ctx.cfg.durations.fringe,
            seed,
        )?;
        let xy: Vec<(f64, f64)> = points
            .iter()
            .map(|p| (p.theta, if ctx.exact { p.expected } else { p.counts as f64 }))
            .collect();
        for p in &points {
            csv.push_str(&format!(
                "{},{:.16e},{},{:.16e}\n",
                bob.name(),
                p.theta,
                p.counts,
                p.expected
            ));
        }
        let fit = fit_fringe(&xy)?;
        visibilities.push(fit.visibility);
        scans.push(json!({
            "bob": bob.name(),
            "fit": fit,
            "minmax_visibility": minmax_visibility(&xy),
            "points": points,
        }));
    }
    fs::write(ctx.path("fringe.csv"), csv)?;
    let mean_v = visibilities.iter().sum::<f64>() / visibilities.len() as f64;
    let out = json!({
        "provenance": ctx.provenance(),
        "mode": ctx.mode_name(),
        "scans": scans,
        "mean_visibility": mean_v,
        "predicted_S": predicted_s_from_visibility(mean_v),
    });
    ctx.write_json("fringe.json", &out)?;
    println!("fringe: V(+2) = {:.4}  V(h) = {:.4}", visibilities[0], visibilities[1]);
    Ok(out)
}

fn run_chsh(ctx: &Ctx, rho: &DensityMatrix) -> anyhow::Result<Value> {
    let settings = paper_settings();
    let result = if ctx.exact {
        chsh_exact(rho, &settings)?
    } else {
        let (r, records) = chsh_empirical(rho, &settings, ctx.cfg.rate_cps, ctx.cfg.durations.chsh, ctx.cfg.seed)?;
        let f = BufWriter::new(File::create(ctx.path("chsh_counts.csv"))?);
        write_counts_csv(&records, f)?;
        r
    };
    let mut out = serde_json::to_value(&result)?;
    out["provenance"] = ctx.provenance();
    ctx.write_json("chsh.json", &out)?;
    match result.sigma {
        Some(s) => println!("chsh: S = {:.4} ± {:.4}", result.s, s),
        None => println!("chsh: S = {:.12}", result.s),
    }
    Ok(out)
}

fn run_budget(ctx: &Ctx, budget: RateBudget) -> anyhow::Result<Value> {
    let report = budget.report();
    let projection = RateBudget::deterministic_projection(PROJECTED_FIBER_COUPLING)?.report();
    let out = json!({
        "provenance": ctx.provenance(),
        "report": report,
        "deterministic_projection": projection,
    });
    ctx.write_json("budget.json", &out)?;
    println!("{report}");
    Ok(out)
}

fn run_pipeline(ctx: &Ctx) -> anyhow::Result<()> {
    let hybrid = ctx.hybrid()?;
    let target = hybrid_target();
    ctx.write_json(
        "hybrid_state.json",
        &json!({
            "provenance": ctx.provenance(),
            "noise": ctx.noise,
            "success_probability": hybrid.success_probability,
            "rho": hybrid.state,
            "fidelity_to_target": fidelity(&hybrid.state, &target)?,
        }),
    )?;
    run_tomography(ctx, &hybrid.state)?;
    run_fringe(ctx, &hybrid.state)?;
    run_chsh(ctx, &hybrid.state)?;
    run_budget(ctx, ctx.cfg.budget)?;
    Ok(())
}

fn dispatch(cli: Cli) -> Result<PathBuf, (Failure, Option<PathBuf>)> {
    let (name, common, paper_defaults) = match &cli.command {
        Command::Tomography(c) => ("tomography", c, false),
        Command::Fringe(c) => ("fringe", c, false),
        Command::Chsh(c) => ("chsh", c, false),
        Command::Budget { common, paper_defaults } => ("budget", common, *paper_defaults),
        Command::Pipeline(c) => ("pipeline", c, false),
    };
    let ctx = Ctx::new(name, common).map_err(|f| (f, None))?;
    let out = ctx.out.clone();
    let run = || -> anyhow::Result<()> {
        fs::create_dir_all(&ctx.out).with_context(|| format!("creating {}", ctx.out.display()))?;
        match name {
            "tomography" => run_tomography(&ctx, &ctx.hybrid()?.state).map(drop),
            "fringe" => run_fringe(&ctx, &ctx.hybrid()?.state).map(drop),
            "chsh" => run_chsh(&ctx, &ctx.hybrid()?.state).map(drop),
            "budget" => {
                let mut b = if paper_defaults {
                    RateBudget::paper_defaults()
                } else {
                    ctx.cfg.budget
                };
                if ctx.mode == TransferMode::Deterministic {
                    b.deterministic_prep = true;
                    b.deterministic_det = true;
                }
                run_budget(&ctx, b).map(drop)
            }
            _ => run_pipeline(&ctx),
        }
    };
    run().map_err(|e| (Failure::Run(e), Some(out.clone())))?;
    Ok(out)
}

fn error_record(e: &anyhow::Error) -> Value {
    let kind = e
        .downcast_ref::<hybrident::Error>()
        .map(|h| h.kind())
        .unwrap_or("error");
    json!({"error": {"kind": kind, "message": format!("{e:#}")}})
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(_) => ExitCode::SUCCESS,
        Err((failure, out)) => {
            let (code, err, kind) = match failure {
                Failure::Usage(e) => (2, e, "usage"),
                Failure::Run(e) => (1, e, ""),
            };
            let mut record = error_record(&err);
            if !kind.is_empty() {
                record["error"]["kind"] = json!(kind);
            }
            let text = serde_json::to_string_pretty(&record).unwrap_or_default();
            let _ = writeln!(std::io::stderr(), "{text}");
            if let Some(dir) = out.as_deref().filter(|d| d.is_dir()) {
                let _ = fs::write(Path::new(dir).join("error.json"), text + "\n");
            }
            ExitCode::from(code)
        }
    }
}
