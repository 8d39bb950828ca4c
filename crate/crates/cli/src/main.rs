use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use log::{info, warn};

use racing_line::io::{self, RunRecords, RunTiming};
use racing_line::pipeline::{optimize_path, preview_plan, PipelineConfig, PipelineStatus};
use racing_line::sim::{simulate_partial, ControllerGains, SimOptions};
use racing_line::speed::{lap_time, SpeedProfile};
use racing_line::track::{estimate_centerline, CenterlineOptions};
use racing_line::{Error, VehicleParams};

#[derive(Parser)]
#[command(name = "racetraj", version, about = "Minimum-lap-time racing line generation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a centerline track file from two boundary files.
    Ingest {
        #[arg(long)]
        inner: PathBuf,
        #[arg(long)]
        outer: PathBuf,
        #[arg(long, default_value_t = 2.75)]
        ds: f64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Iterate speed profiling and curvature minimization on a track.
    Optimize {
        #[arg(long)]
        track: PathBuf,
        #[arg(long)]
        vehicle: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Drive an optimized trajectory with the closed-loop simulator.
    Simulate {
        /// Directory written by `optimize`.
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long)]
        vehicle: Option<PathBuf>,
        /// Iteration to drive; defaults to the fastest one.
        #[arg(long)]
        iteration: Option<usize>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Plan only the next `lookahead` metres from a station.
    Preview {
        #[arg(long)]
        track: PathBuf,
        #[arg(long)]
        start_s: f64,
        #[arg(long)]
        lookahead: f64,
        #[arg(long)]
        vehicle: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Print lap time per iteration and solver timing for a run.
    Report {
        #[arg(long)]
        run: PathBuf,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Solver(_) => 3,
        Error::OffTrack { .. } => 4,
        _ => 2,
    }
}

fn load_vehicle(path: Option<&Path>) -> racing_line::Result<VehicleParams> {
    match path {
        Some(p) => VehicleParams::from_json(&read_text(p)?),
        None => Ok(VehicleParams::default()),
    }
}

fn load_config(path: Option<&Path>) -> racing_line::Result<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::from_json(&read_text(p)?),
        None => Ok(PipelineConfig::default()),
    }
}

fn read_text(path: &Path) -> racing_line::Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

fn ingest(inner: &Path, outer: &Path, ds: f64, output: &Path) -> racing_line::Result<()> {
    let cloud = io::read_boundaries(inner, outer)?;
    let track = estimate_centerline(&cloud, &CenterlineOptions { ds, ..CenterlineOptions::default() })?;
    io::write_track_csv(output, &track)?;
    info!("{} stations, {:.1} m, closed: {}", track.len(), track.total_length(), track.closed);
    Ok(())
}

fn optimize(track: &Path, vehicle: Option<&Path>, config: Option<&Path>, output: &Path) -> racing_line::Result<()> {
    let path = io::read_track_csv(track)?;
    let params = load_vehicle(vehicle)?;
    let config = load_config(config)?;
    if config.lookahead.is_some() {
        warn!("lookahead is used by `preview` only; optimizing the whole track");
    }
    let t0 = Instant::now();
    let res = optimize_path(&path, &path.boundary_cloud(), &params, &config)?;
    io::write_run(output, &res, t0.elapsed().as_secs_f64())?;
    let best = &res.iterations[res.best].record;
    println!(
        "{:?} after {} iterations, best lap {:.3} s (iteration {})",
        res.status,
        res.iterations.len() - 1,
        best.lap_time_integrated,
        res.best
    );
    if res.status == PipelineStatus::SolverFailure {
        return Err(Error::Solver(res.failure.clone().unwrap_or_default()));
    }
    Ok(())
}

fn simulate(dir: &Path, vehicle: Option<&Path>, iteration: Option<usize>, output: &Path) -> racing_line::Result<()> {
    let records: RunRecords = io::read_json(&dir.join("records.json"))?;
    let i = iteration.unwrap_or(records.best_iteration);
    let path = io::read_track_csv(&dir.join(format!("path_{i}.csv")))?;
    let (stations, u_x) = io::read_profile_csv(&dir.join(format!("speed_{i}.csv")))?;
    if stations != path.stations {
        return Err(Error::Input(format!("speed_{i}.csv does not match the stations of path_{i}.csv")));
    }
    let params = load_vehicle(vehicle)?;
    let profile = SpeedProfile { lap_time: lap_time(&stations, &u_x)?, stations, u_x, traces: None, saturated_stations: 0 };
    let (res, err) = simulate_partial(&path, &profile, &params, &ControllerGains::default(), &SimOptions::default())?;
    io::write_sim_log_csv(output, &res.logs)?;
    if let Some(e) = err {
        return Err(e);
    }
    println!(
        "simulated lap {:.3} s, predicted {:.3} s ({:+.2}%), max |e| {:.3} m",
        res.lap_time,
        profile.lap_time,
        100.0 * (res.lap_time / profile.lap_time - 1.0),
        res.max_abs_e
    );
    Ok(())
}

fn preview(
    track: &Path,
    start_s: f64,
    lookahead: f64,
    vehicle: Option<&Path>,
    config: Option<&Path>,
    output: &Path,
) -> racing_line::Result<()> {
    let path = io::read_track_csv(track)?;
    let params = load_vehicle(vehicle)?;
    let config = load_config(config)?;
    let res = preview_plan(&path, &path.boundary_cloud(), start_s, lookahead, &params, &config)?;
    std::fs::create_dir_all(output)?;
    io::write_track_csv(&output.join("window.csv"), &res.window)?;
    io::write_profile_csv(&output.join("window_speed.csv"), &res.profile)?;
    io::write_track_csv(&output.join("plan.csv"), &res.planned)?;
    io::write_profile_csv(&output.join("plan_speed.csv"), &res.planned_profile)?;
    io::write_json(&output.join("qp.json"), &res.solution.diagnostics)?;
    println!(
        "{} stations{}, window {:.3} s -> plan {:.3} s, QP {} iterations in {:.2} s",
        res.window.len(),
        if res.truncated { " (truncated)" } else { "" },
        res.profile.lap_time,
        res.planned_profile.lap_time,
        res.solution.iterations,
        res.solution.wall_time
    );
    Ok(())
}

fn report(dir: &Path) -> racing_line::Result<()> {
    let records: RunRecords = io::read_json(&dir.join("records.json"))?;
    println!("status: {:?}", records.status);
    if let Some(f) = &records.failure {
        println!("failure: {f}");
    }
    println!("{:>4}  {:>10}  {:>10}  {:>8}  {:>12}", "iter", "lap (s)", "sim (s)", "dt (s)", "curvature");
    for r in &records.iterations {
        let sim = r.lap_time_simulated.map_or("-".to_string(), |t| format!("{t:.3}"));
        let dt = r.delta_t.map_or("-".to_string(), |t| format!("{t:.3}"));
        let mark = if r.index == records.best_iteration { " *" } else { "" };
        println!(
            "{:>4}  {:>10.3}  {:>10}  {:>8}  {:>12.5e}{mark}",
            r.index, r.lap_time_integrated, sim, dt, r.curvature_objective
        );
    }
    let timing_path = dir.join("timing.json");
    if timing_path.exists() {
        let timing: RunTiming = io::read_json(&timing_path)?;
        println!();
        println!("{:>4}  {:>8}  {:>10}  {:>10}", "iter", "stations", "QP iters", "QP (s)");
        for t in timing.iterations.iter().filter(|t| t.index > 0) {
            println!("{:>4}  {:>8}  {:>10}  {:>10.3}", t.index, t.stations, t.qp_iterations, t.qp_wall_time_s);
        }
        println!("total wall time {:.2} s", timing.total_wall_time_s);
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Ingest { inner, outer, ds, output } => ingest(inner, outer, *ds, output),
        Command::Optimize { track, vehicle, config, output } => {
            optimize(track, vehicle.as_deref(), config.as_deref(), output)
        }
        Command::Simulate { trajectory, vehicle, iteration, output } => {
            simulate(trajectory, vehicle.as_deref(), *iteration, output)
        }
        Command::Preview { track, start_s, lookahead, vehicle, config, output } => {
            preview(track, *start_s, *lookahead, vehicle.as_deref(), config.as_deref(), output)
        }
        Command::Report { run } => report(run),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
