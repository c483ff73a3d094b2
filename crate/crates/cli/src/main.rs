use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use tiltload::control::{build_polytopic_model, synthesize_gain, verify_pole_regions, GainCertificate, LmiSpec};
use tiltload::harness::{rmse_from_csv, run_closed_loop, write_outputs, EstimatorKind, SimConfig, REGULATED_NAMES};
use tiltload::multibody_dynamics::{find_trim, Trim};
use tiltload_lmi::SolverOptions;

#[derive(Parser)]
#[command(name = "tiltload", version, about = "Tilt-rotor UAV with suspended load: trim, gain synthesis, simulation")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the hover equilibrium as JSON.
    Trim {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Solve the gain synthesis and write the certificate.
    Synthesize {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the closed loop and write log.csv, sets.jsonl, summary.json.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "zse")]
        estimator: EstimatorKind,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Certificate from `synthesize`; synthesized on the fly when absent.
        #[arg(long)]
        gain: Option<PathBuf>,
    },
    /// Tracking and estimation RMSE of a log.csv.
    Rmse { log: PathBuf },
}

fn load_config(path: &Option<PathBuf>) -> Result<SimConfig> {
    match path {
        None => Ok(SimConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(SimConfig::from_json(&text)?)
        }
    }
}

fn synthesize(cfg: &SimConfig, trim: &Trim) -> Result<GainCertificate> {
    let model = build_polytopic_model(&cfg.params, trim, cfg.bounds, cfg.ts)?;
    let spec = cfg.lmi.clone().unwrap_or_else(|| LmiSpec::airframe_default(&trim.u));
    let cert = synthesize_gain(&model, &spec, &SolverOptions::default())?;
    let (ok, _) = verify_pole_regions(&cert.k, &model, spec.eps.unwrap_or(0.0), spec.varpi, spec.tau.unwrap_or(1.0));
    if !ok {
        bail!("synthesized gain places poles outside the regions");
    }
    Ok(cert)
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Trim { config } => {
            let cfg = load_config(&config)?;
            let t = find_trim(&cfg.params)?;
            let out = serde_json::json!({
                "q": t.q.as_slice(),
                "u": t.u.as_slice(),
                "residual": t.residual,
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
        Cmd::Synthesize { config, out } => {
            let cfg = load_config(&config)?;
            let trim = find_trim(&cfg.params)?;
            let cert = synthesize(&cfg, &trim)?;
            std::fs::write(&out, cert.to_json())?;
            let worst = cert.margins.values().cloned().fold(f64::INFINITY, f64::min);
            println!("trace(Omega) = {:.6}, smallest margin = {:.3e}", cert.trace_omega(), worst);
        }
        Cmd::Simulate { config, estimator, seed, out, gain } => {
            let mut cfg = load_config(&config)?;
            cfg.estimator.kind = estimator;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let trim = find_trim(&cfg.params)?;
            let cert = match gain {
                Some(p) => GainCertificate::from_json(&std::fs::read_to_string(&p)?)?,
                None => synthesize(&cfg, &trim)?,
            };
            let log = run_closed_loop(&cfg, &trim, &cert)?;
            let s = write_outputs(&log, &out)?;
            println!("{}", serde_json::to_string_pretty(&s)?);
        }
        Cmd::Rmse { log } => {
            let r = rmse_from_csv(&std::fs::read_to_string(&log)?)?;
            println!("variable,tracking_rmse,estimation_rmse");
            for (j, n) in REGULATED_NAMES.iter().enumerate() {
                println!("{n},{},{}", r.tracking[j], r.estimation[j]);
            }
        }
    }
    Ok(())
}
