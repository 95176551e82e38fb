//! Experiment CLI: run configured simulations, check the scheme-equivalence
//! battery, benchmark the preconditioner, and sweep parameter variants.

use clap::{Parser, Subcommand};
use phasefield::analysis::{
    equivalence_report, precond_benchmark, run_experiment, EquivalenceConfig,
    ALL_EQUIVALENCE_PAIRS,
};
use phasefield::config::{override_key, parse_config, RunConfig};
use phasefield::error::{Error, Result};
use phasefield::fem::assemble;
use phasefield::io::{emit_snapshot, emit_timeseries, write_manifest};
use phasefield::mesh::generate_uniform;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "phasefield", version, about = "Finite-element phase-field experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configured experiment and write its time series, snapshots
    /// and manifest to the configured output directory.
    Run { config: PathBuf },
    /// Run the scheme-equivalence battery on the configured mesh; exits
    /// nonzero when any identity fails the 1e-9 nodewise bar.
    Equivalence { config: PathBuf },
    /// Tabulate CG vs preconditioned-CG iteration counts over nested meshes.
    PrecondBench { config: PathBuf },
    /// Run variants of a configuration concurrently, one per value of the
    /// varied key (respects PHASEFIELD_THREADS).
    Sweep {
        config: PathBuf,
        /// Variants as key=v1,v2,...
        #[arg(long)]
        vary: String,
    },
}

fn load_config(path: &Path) -> Result<(String, RunConfig)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let cfg = parse_config(&text)?;
    Ok((text, cfg))
}

fn run_one(cfg: &RunConfig) -> Result<bool> {
    let out_dir = &cfg.output_dir;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;
    write_manifest(cfg, &out_dir.join("manifest.txt"))?;
    let output = run_experiment(cfg)?;
    if !output.delaunay_ok {
        eprintln!("warning: mesh violates the Delaunay edge condition; the lumped maximum principle is not guaranteed");
    }
    emit_timeseries(&output.records, &out_dir.join("timeseries.csv"))?;
    let mesh = generate_uniform(cfg.nx, cfg.ny, cfg.domain)?;
    let space = assemble(mesh)?;
    for (i, (t, field)) in output.snapshots.iter().enumerate() {
        // Dots in the stem would be eaten by the extension handling.
        let stamp = format!("{t:.6}").replace('.', "p");
        let base = out_dir.join(format!("snapshot_{i:04}_t{stamp}"));
        emit_snapshot(&space, field, &base)?;
    }
    match &output.failure {
        Some((step, msg)) => {
            eprintln!("run failed at step {step}: {msg} (partial results written)");
            Ok(false)
        }
        None => {
            println!(
                "run complete: {} steps, outputs in {}",
                output.records.len().saturating_sub(1),
                out_dir.display()
            );
            Ok(true)
        }
    }
}

fn cmd_equivalence(cfg: &RunConfig) -> Result<bool> {
    let space = assemble(generate_uniform(cfg.nx.min(64), cfg.ny.min(64), cfg.domain)?)?;
    let mut eq_cfg = EquivalenceConfig::default();
    eq_cfg.solver = cfg.solver.clone();
    eq_cfg.solver.newton.tol = eq_cfg.solver.newton.tol.min(1e-12);
    eq_cfg.solver.newton.linear_tol = eq_cfg.solver.newton.linear_tol.min(1e-12);
    let reports = equivalence_report(&space, cfg.epsilon, &ALL_EQUIVALENCE_PAIRS, &eq_cfg)?;
    let mut all_pass = true;
    for r in &reports {
        println!(
            "{:<18} max nodewise diff {:>12.3e}  ({} trials)  {}",
            format!("{:?}", r.pair),
            r.max_diff,
            r.trials,
            if r.pass { "pass" } else { "FAIL" }
        );
        all_pass &= r.pass;
    }
    Ok(all_pass)
}

fn cmd_precond_bench(cfg: &RunConfig) -> Result<bool> {
    let k = match &cfg.schedule {
        phasefield::config::Schedule::Uniform { k, .. } => *k,
        phasefield::config::Schedule::Explicit(ks) => ks[0],
    };
    let gamma = k / (cfg.epsilon * cfg.epsilon);
    println!(
        "eps = {}, k = {k}, gamma = {gamma}, bound = {}",
        cfg.epsilon,
        (1.0 + 2.0 * gamma) / (1.0 - gamma)
    );
    let sizes = [8, 16, 32, 64, 128];
    let rows = precond_benchmark(&sizes, cfg.domain, cfg.epsilon, k, 1e-8, 7)?;
    let mut table = String::from("dof,cg_iters,pcg_iters,lanczos_min,lanczos_max,bound\n");
    println!("{:>8} {:>6} {:>6} {:>12} {:>12}", "DOF", "CG", "PCG", "lam_min", "lam_max");
    for r in &rows {
        println!(
            "{:>8} {:>6} {:>6} {:>12.6} {:>12.6}",
            r.dof, r.cg_iters, r.pcg_iters, r.lanczos_min, r.lanczos_max
        );
        let _ = writeln!(
            table,
            "{},{},{},{:.12e},{:.12e},{:.12e}",
            r.dof, r.cg_iters, r.pcg_iters, r.lanczos_min, r.lanczos_max, r.condition_bound
        );
    }
    std::fs::create_dir_all(&cfg.output_dir)
        .map_err(|e| Error::io(cfg.output_dir.display().to_string(), e))?;
    let path = cfg.output_dir.join("precond_bench.csv");
    std::fs::write(&path, table).map_err(|e| Error::io(path.display().to_string(), e))?;

    let pcg_max = rows.iter().map(|r| r.pcg_iters).max().unwrap_or(0);
    let pcg_min = rows.iter().map(|r| r.pcg_iters).min().unwrap_or(0);
    let cg_grows = rows.windows(2).all(|w| w[1].cg_iters > w[0].cg_iters);
    let spectrum_ok = rows.iter().all(|r| {
        r.lanczos_min >= 1.0 - 1e-6 && r.lanczos_max <= r.condition_bound + 1e-6
    });
    println!(
        "pcg flat: max {pcg_max}, spread {}; cg strictly increasing: {cg_grows}; spectrum within bound: {spectrum_ok}",
        pcg_max - pcg_min
    );
    Ok(pcg_max <= 12 && pcg_max - pcg_min <= 4 && cg_grows && spectrum_ok)
}

fn cmd_sweep(text: &str, cfg: &RunConfig, vary: &str) -> Result<bool> {
    let Some((key, values)) = vary.split_once('=') else {
        return Err(Error::Config(format!(
            "--vary expects key=v1,v2,..., got '{vary}'"
        )));
    };
    let key = key.trim();
    let values: Vec<&str> = values.split(',').map(str::trim).filter(|v| !v.is_empty()).collect();
    if values.is_empty() {
        return Err(Error::Config("--vary got an empty value list".into()));
    }

    // Validate every variant before launching any.
    let mut variants = Vec::new();
    for value in &values {
        let vtext = override_key(text, key, value);
        let vtext = override_key(
            &vtext,
            "output_dir",
            &format!("{}/{key}={value}", cfg.output_dir.display()),
        );
        let vcfg = parse_config(&vtext)?;
        variants.push((value.to_string(), vcfg));
    }

    let threads: usize = std::env::var("PHASEFIELD_THREADS")
        .ok()
        .and_then(|s| s.parse().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        });

    let mut all_ok = true;
    for chunk in variants.chunks(threads) {
        let results: Vec<(String, Result<bool>)> = std::thread::scope(|scope| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|(value, vcfg)| {
                    let label = format!("{key}={value}");
                    scope.spawn(move || (label, run_one(vcfg)))
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        for (label, result) in results {
            match result {
                Ok(true) => println!("variant {label}: ok"),
                Ok(false) => {
                    println!("variant {label}: failed step (partial results written)");
                    all_ok = false;
                }
                Err(e) => {
                    eprintln!("variant {label}: error: {e}");
                    all_ok = false;
                }
            }
        }
    }
    Ok(all_ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run { config } => load_config(config).and_then(|(_, cfg)| run_one(&cfg)),
        Command::Equivalence { config } => {
            load_config(config).and_then(|(_, cfg)| cmd_equivalence(&cfg))
        }
        Command::PrecondBench { config } => {
            load_config(config).and_then(|(_, cfg)| cmd_precond_bench(&cfg))
        }
        Command::Sweep { config, vary } => {
            load_config(config).and_then(|(text, cfg)| cmd_sweep(&text, &cfg, vary))
        }
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
