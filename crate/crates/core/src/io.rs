//! CSV and JSON file formats shared by the command-line tool and the
//! plotting scripts.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a value
//! read back is bit-identical and repeated runs produce identical bytes.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{input_err, Error, Result};
use crate::pipeline::{IterationRecord, PipelineResult, PipelineStatus};
use crate::sim::SimLogRow;
use crate::speed::SpeedProfile;
use crate::track::{BoundaryCloud, Point, TrackPath};

/// Closing points of a stored closed path must coincide to this distance (m).
const CLOSURE_TOL: f64 = 1e-6;

fn open_reader(path: &Path) -> Result<csv::Reader<File>> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

fn check_headers<R: Read>(reader: &mut csv::Reader<R>, expected: &[&str], what: &str) -> Result<()> {
    let headers = reader.headers()?.clone();
    let got: Vec<&str> = headers.iter().collect();
    if got.len() < expected.len() || got[..expected.len()] != *expected {
        return input_err(format!("{what}: expected columns {}, found {}", expected.join(","), got.join(",")));
    }
    Ok(())
}

fn parse_rows<R: Read>(reader: &mut csv::Reader<R>, width: usize, what: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let mut row = Vec::with_capacity(width);
        for j in 0..width {
            let field = rec.get(j).unwrap_or("");
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Input(format!("{what}: row {} column {}: cannot parse {field:?}", i + 1, j + 1)))?;
            if !v.is_finite() {
                return input_err(format!("{what}: row {} column {} is not finite", i + 1, j + 1));
            }
            row.push(v);
        }
        rows.push(row);
    }
    Ok(rows)
}

fn create(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
}

fn write_row<W: Write>(w: &mut csv::Writer<W>, values: &[f64]) -> Result<()> {
    w.write_record(values.iter().map(|v| v.to_string()))?;
    Ok(())
}

pub const BOUNDARY_COLUMNS: [&str; 2] = ["east_m", "north_m"];
pub const TRACK_COLUMNS: [&str; 7] = ["s_m", "k_1pm", "w_in_m", "w_out_m", "east_m", "north_m", "psi_r_rad"];
pub const SIM_COLUMNS: [&str; 9] =
    ["t_s", "s_m", "e_m", "dpsi_rad", "ux_mps", "delta_rad", "fyf_n", "fyr_n", "fx_n"];

pub fn read_boundary_csv(path: &Path) -> Result<Vec<Point>> {
    let what = path.display().to_string();
    let mut r = open_reader(path)?;
    check_headers(&mut r, &BOUNDARY_COLUMNS, &what)?;
    Ok(parse_rows(&mut r, 2, &what)?.into_iter().map(|v| Point::new(v[0], v[1])).collect())
}

pub fn write_boundary_csv(path: &Path, points: &[Point]) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(BOUNDARY_COLUMNS)?;
    for p in points {
        write_row(&mut w, &[p.x, p.y])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_boundaries(inner: &Path, outer: &Path) -> Result<BoundaryCloud> {
    Ok(BoundaryCloud { inner: read_boundary_csv(inner)?, outer: read_boundary_csv(outer)? })
}

pub fn write_track_csv(path: &Path, track: &TrackPath) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(TRACK_COLUMNS)?;
    for k in 0..track.len() {
        write_row(
            &mut w,
            &[
                track.stations[k],
                track.curvature[k],
                track.w_in[k],
                track.w_out[k],
                track.east[k],
                track.north[k],
                track.heading[k],
            ],
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a track file. The path is taken as closed when its last point
/// repeats the first.
pub fn read_track_csv(path: &Path) -> Result<TrackPath> {
    let what = path.display().to_string();
    let mut r = open_reader(path)?;
    check_headers(&mut r, &TRACK_COLUMNS, &what)?;
    let rows = parse_rows(&mut r, TRACK_COLUMNS.len(), &what)?;
    let col = |j: usize| rows.iter().map(|v| v[j]).collect::<Vec<f64>>();
    let n = rows.len();
    if n < 2 {
        return input_err(format!("{what}: a track needs at least two rows"));
    }
    let gap = (Point::new(rows[0][4], rows[0][5]) - Point::new(rows[n - 1][4], rows[n - 1][5])).norm();
    let track = TrackPath {
        stations: col(0),
        curvature: col(1),
        w_in: col(2),
        w_out: col(3),
        east: col(4),
        north: col(5),
        heading: col(6),
        closed: n > 3 && gap <= CLOSURE_TOL,
    };
    track.validate().map_err(|e| Error::Input(format!("{what}: {e}")))?;
    Ok(track)
}

/// Speed profile with `steady_mps,forward_mps,backward_mps` appended when
/// the pass traces were kept.
pub fn write_profile_csv(path: &Path, profile: &SpeedProfile) -> Result<()> {
    let mut w = create(path)?;
    let mut header = vec!["s_m", "ux_mps"];
    if profile.traces.is_some() {
        header.extend(["steady_mps", "forward_mps", "backward_mps"]);
    }
    w.write_record(&header)?;
    for k in 0..profile.stations.len() {
        let mut row = vec![profile.stations[k], profile.u_x[k]];
        if let Some(t) = &profile.traces {
            row.extend([t.steady[k], t.forward[k], t.backward[k]]);
        }
        write_row(&mut w, &row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `s_m,ux_mps` back; extra columns are ignored.
pub fn read_profile_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let what = path.display().to_string();
    let mut r = open_reader(path)?;
    check_headers(&mut r, &["s_m", "ux_mps"], &what)?;
    let rows = parse_rows(&mut r, 2, &what)?;
    Ok((rows.iter().map(|v| v[0]).collect(), rows.iter().map(|v| v[1]).collect()))
}

pub fn write_sim_log_csv(path: &Path, rows: &[SimLogRow]) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(SIM_COLUMNS)?;
    for r in rows {
        write_row(&mut w, &[r.t_s, r.s_m, r.e_m, r.dpsi_rad, r.ux_mps, r.delta_rad, r.fyf_n, r.fyr_n, r.fx_n])?;
    }
    w.flush()?;
    Ok(())
}

/// Contents of `records.json`: everything about a run except wall-clock
/// timings, which live in `timing.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecords {
    pub status: PipelineStatus,
    pub failure: Option<String>,
    pub best_iteration: usize,
    pub iterations: Vec<IterationRecord>,
}

impl RunRecords {
    pub fn from_result(res: &PipelineResult) -> Self {
        RunRecords {
            status: res.status,
            failure: res.failure.clone(),
            best_iteration: res.best,
            iterations: res.records(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTiming {
    pub index: usize,
    pub stations: usize,
    pub qp_iterations: usize,
    pub qp_wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTiming {
    pub total_wall_time_s: f64,
    pub iterations: Vec<IterationTiming>,
}

impl RunTiming {
    pub fn from_result(res: &PipelineResult, total_wall_time_s: f64) -> Self {
        let iterations = res
            .iterations
            .iter()
            .map(|it| IterationTiming {
                index: it.record.index,
                stations: it.record.stations,
                qp_iterations: it.record.qp_iterations,
                qp_wall_time_s: it.record.qp_wall_time,
            })
            .collect();
        RunTiming { total_wall_time_s, iterations }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

/// Writes `path_i.csv` and `speed_i.csv` for every iteration plus
/// `records.json` and `timing.json` into `dir`.
pub fn write_run(dir: &Path, res: &PipelineResult, total_wall_time_s: f64) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for it in &res.iterations {
        let i = it.record.index;
        write_track_csv(&dir.join(format!("path_{i}.csv")), &it.path)?;
        write_profile_csv(&dir.join(format!("speed_{i}.csv")), &it.profile)?;
    }
    write_json(&dir.join("records.json"), &RunRecords::from_result(res))?;
    write_json(&dir.join("timing.json"), &RunTiming::from_result(res, total_wall_time_s))?;
    Ok(())
}
