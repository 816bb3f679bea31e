//! Command-line driver: single runs from a config file, convergence
//! studies against the semianalytic circle solutions, and the verification
//! suite.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 numeric
//! failure, 3 unsupported topology event.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use stefan2d::config::{parse_config, ParsedConfig, ScenarioName, ScenarioSpec};
use stefan2d::diagnostics::{
    format_convergence_table, radii_overlay_to_string, two_circle_convergence_row, write_snapshot,
    write_timeseries, ConcentricOracle,
};
use stefan2d::evolution::{run, RunConfig, Scheme, Trajectory};
use stefan2d::exact::{ThreeCircleParams, TwoCircleParams};
use stefan2d::verify::{run_all, FaultInjection};
use stefan2d::Error;

const USAGE: &str = "\
usage:
  stefan2d run --config PATH [--out DIR]
  stefan2d converge --scenario NAME --levels LIST --scheme {linear|conservative}
                    [--t-end T] [--out DIR]
  stefan2d verify

The output directory defaults to $STEFAN2D_OUT or ./runs; every command
writes into a fresh run-stamped folder below it.";

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let code = match args.first().map(String::as_str) {
        Some("run") => cmd_run(&args[1..]),
        Some("converge") => cmd_converge(&args[1..]),
        Some("verify") => cmd_verify(),
        Some("--help") | Some("-h") => {
            println!("{USAGE}");
            return ExitCode::SUCCESS;
        }
        None => {
            eprintln!("{USAGE}");
            return ExitCode::from(1);
        }
        Some(other) => {
            eprintln!("unknown command '{other}'\n{USAGE}");
            return ExitCode::from(1);
        }
    };
    match code {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_of(&e))
        }
    }
}

fn exit_code_of(e: &Error) -> u8 {
    match e {
        Error::Parse { .. } | Error::Io(_) | Error::Topology(_) | Error::DimensionMismatch(_) => 1,
        Error::SurgeryUnsupported(_) => 3,
        // geometry failures are configuration problems unless they happened
        // mid-run (annotated with the step)
        Error::Geometry(m) => {
            if m.starts_with("step ") {
                2
            } else {
                1
            }
        }
        _ => 2,
    }
}

fn flag_value<'a>(args: &'a [String], name: &str) -> Option<&'a str> {
    args.iter()
        .position(|a| a == name)
        .and_then(|i| args.get(i + 1))
        .map(String::as_str)
}

fn out_base(args: &[String]) -> PathBuf {
    flag_value(args, "--out")
        .map(PathBuf::from)
        .or_else(|| std::env::var("STEFAN2D_OUT").ok().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn stamped_dir(base: &Path, label: &str) -> Result<PathBuf, Error> {
    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut dir = base.join(format!("{label}-{stamp}"));
    let mut suffix = 0;
    while dir.exists() {
        suffix += 1;
        dir = base.join(format!("{label}-{stamp}-{suffix}"));
    }
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_metadata(
    dir: &Path,
    command: &str,
    config: &RunConfig,
    scenario: Option<&ScenarioSpec>,
) -> Result<(), Error> {
    let mut text = String::new();
    text.push_str(&format!("stefan2d {}\n", env!("CARGO_PKG_VERSION")));
    text.push_str(&format!("command {command}\n"));
    text.push_str(&format!("scheme {}\n", config.scheme));
    text.push_str(&format!("tau {}\n", config.tau));
    text.push_str(&format!("t_end {}\n", config.t_end));
    text.push_str(&format!("h {}\n", config.h));
    text.push_str(&format!("n_coarse {}\n", config.n_coarse));
    text.push_str(&format!("n_fine {}\n", config.n_fine));
    text.push_str(&format!("mode {}\n", config.mode));
    text.push_str(&format!("fp_tol {}\n", config.fp_tol));
    text.push_str(&format!("max_fp_iter {}\n", config.max_fp_iter));
    match config.surgery_threshold {
        Some(s) => text.push_str(&format!("surgery_threshold {s}\n")),
        None => text.push_str("surgery_threshold off\n"),
    }
    text.push_str(&format!("output_every {}\n", config.output_every));
    if let Some(s) = scenario {
        text.push_str(&format!("scenario {}\n", s.name.as_str()));
        if let Some(b) = &s.betas {
            text.push_str(&format!("beta {b:?}\n"));
        }
        if let Some(t) = &s.tensions {
            text.push_str(&format!("sigma {t:?}\n"));
        }
        if let Some(r) = &s.radii {
            text.push_str(&format!("radii {r:?}\n"));
        }
        if let Some(k) = s.k_gamma {
            text.push_str(&format!("k_gamma {k}\n"));
        }
    }
    std::fs::write(dir.join("metadata.txt"), text)?;
    Ok(())
}

fn oracle_for(spec: &ScenarioSpec, parsed: &ParsedConfig) -> Option<ConcentricOracle> {
    match spec.name {
        ScenarioName::TwoCircles => {
            let betas = spec.betas.clone().unwrap_or_else(|| vec![-1.0, 0.0, 1.0]);
            let radii = spec.radii.clone().unwrap_or_else(|| vec![2.0, 3.0]);
            let params =
                TwoCircleParams::from_betas([betas[0], betas[1], betas[2]], radii[0], radii[1])
                    .ok()?;
            Some(ConcentricOracle::two(params, parsed.run.t_end))
        }
        ScenarioName::ThreeCircles => {
            let betas = spec.betas.clone().unwrap_or_else(|| vec![-1.0, 1.0, 0.0]);
            let radii = spec.radii.clone().unwrap_or_else(|| vec![1.0, 2.0, 3.0]);
            let params = ThreeCircleParams::from_betas(
                [betas[0], betas[1], betas[2]],
                [radii[0], radii[1], radii[2]],
            )
            .ok()?;
            Some(ConcentricOracle::three(params, parsed.run.t_end))
        }
        _ => None,
    }
}

fn cmd_run(args: &[String]) -> Result<(), Error> {
    let config_path = flag_value(args, "--config")
        .ok_or_else(|| Error::Parse { line: 0, message: "run requires --config PATH".into() })?;
    let text = std::fs::read_to_string(config_path)?;
    let parsed = parse_config(&text)?;
    let (topology, cluster) = parsed.scenario.build(parsed.k_default())?;

    let base = parsed.out_dir.clone().unwrap_or_else(|| out_base(args));
    let dir = stamped_dir(&base, &format!("run-{}", parsed.scenario.name.as_str()))?;
    write_metadata(&dir, "run", &parsed.run, Some(&parsed.scenario))?;

    println!(
        "running {} / {} to T = {} (tau = {}, N_f = {})",
        parsed.scenario.name.as_str(),
        parsed.run.scheme,
        parsed.run.t_end,
        parsed.run.tau,
        parsed.run.n_fine
    );
    let trajectory = run(&parsed.run, &topology, &cluster)?;
    report_and_write(&dir, &trajectory, oracle_for(&parsed.scenario, &parsed), &parsed.run)
}

fn report_and_write(
    dir: &Path,
    trajectory: &Trajectory,
    oracle: Option<ConcentricOracle>,
    config: &RunConfig,
) -> Result<(), Error> {
    write_timeseries(trajectory, &dir.join("timeseries.csv"))?;
    for snap in &trajectory.snapshots {
        write_snapshot(snap, &dir.join(format!("snapshot_{:06}.csv", snap.step)))?;
    }
    if let Some(oracle) = oracle {
        std::fs::write(
            dir.join("radii_overlay.csv"),
            radii_overlay_to_string(trajectory, &oracle),
        )?;
    }
    // final bulk mesh, for visualization
    let fin = trajectory.final_snapshot();
    if let Ok(bulk) =
        stefan2d::bulk::build_adaptive_mesh(config.h, config.n_coarse, config.n_fine, &fin.cluster)
    {
        std::fs::write(dir.join("bulk_mesh.csv"), stefan2d::diagnostics::bulk_mesh_to_string(&bulk))?;
    }
    for w in &trajectory.warnings {
        eprintln!("warning: {w}");
    }
    let first = trajectory.series.first().expect("nonempty series");
    let last = trajectory.series.last().expect("nonempty series");
    println!(
        "completed {} steps: E {} -> {}, |v_drift| = {:.3e}{}",
        last.step,
        first.energy,
        last.energy,
        (last.content - first.content - trajectory.surgery_content_jump).abs(),
        if trajectory.surgery_content_jump != 0.0 {
            format!(" (surgery content jump {:+.3e})", trajectory.surgery_content_jump)
        } else {
            String::new()
        }
    );
    println!("wrote {}", dir.display());
    Ok(())
}

fn cmd_converge(args: &[String]) -> Result<(), Error> {
    let scenario = flag_value(args, "--scenario").unwrap_or("two_circles");
    if ScenarioName::parse(scenario) != Some(ScenarioName::TwoCircles) {
        return Err(Error::Parse {
            line: 0,
            message: format!("convergence study supports the two_circles scenario, got '{scenario}'"),
        });
    }
    let scheme = match flag_value(args, "--scheme") {
        None | Some("linear") => Scheme::Linear,
        Some("conservative") => Scheme::Conservative,
        Some(other) => {
            return Err(Error::Parse { line: 0, message: format!("unknown scheme '{other}'") })
        }
    };
    let levels: Vec<u32> = flag_value(args, "--levels")
        .unwrap_or("0,1")
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<u32>()
                .map_err(|_| Error::Parse { line: 0, message: format!("bad level '{s}'") })
        })
        .collect::<Result<_, _>>()?;
    if levels.iter().any(|&l| l > 4) {
        return Err(Error::Parse { line: 0, message: "levels must lie in 0..=4".into() });
    }
    let t_end: f64 = match flag_value(args, "--t-end") {
        Some(s) => s
            .parse()
            .map_err(|_| Error::Parse { line: 0, message: format!("bad t-end '{s}'") })?,
        None => 1.0,
    };

    let base = out_base(args);
    let dir = stamped_dir(&base, &format!("converge-{scheme}"))?;

    // independent levels run concurrently
    let results: Vec<(u32, Result<_, Error>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = levels
            .iter()
            .map(|&level| {
                scope.spawn(move || {
                    (
                        level,
                        two_circle_convergence_row(scheme, level, [-1.0, 0.0, 1.0], [2.0, 3.0], t_end),
                    )
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("level thread")).collect()
    });

    let mut rows = Vec::new();
    let mut failure: Option<Error> = None;
    for (level, result) in results {
        match result {
            Ok((row, _)) => {
                println!(
                    "level {level}: h_f = {:.4e}, |W-w| = {:.4e}, |Gamma-Gamma| = {:.4e}, K_Omega = {}, K_Gamma = {}, |v_drift| = {:.3e}",
                    row.h_f,
                    row.w_error,
                    row.gamma_error,
                    row.k_bulk_final,
                    row.k_gamma_final,
                    row.content_drift
                );
                rows.push(row);
            }
            Err(e) => {
                eprintln!("level {level} failed: {e}");
                failure.get_or_insert(e);
            }
        }
    }
    rows.sort_by_key(|r| r.level);
    std::fs::write(dir.join("convergence.csv"), format_convergence_table(&rows))?;
    std::fs::write(
        dir.join("metadata.txt"),
        format!(
            "stefan2d {}\ncommand converge\nscheme {scheme}\nscenario two_circles\nlevels {levels:?}\nt_end {t_end}\nmode true\nerror sampling every step\n",
            env!("CARGO_PKG_VERSION")
        ),
    )?;
    println!("wrote {}", dir.display());
    match failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn cmd_verify() -> Result<(), Error> {
    let results = run_all(&FaultInjection::default());
    let mut failed = 0;
    for (name, result) in &results {
        match result {
            Ok(()) => println!("ok   {name}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL {name}: {msg}");
            }
        }
    }
    println!("{} checks, {} failed", results.len(), failed);
    if failed > 0 {
        return Err(Error::SolveFailure(format!("{failed} verification checks failed")));
    }
    Ok(())
}
