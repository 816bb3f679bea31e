//! Error norms against the semianalytic solutions, convergence reports,
//! and all file formats (time series, snapshots, cluster descriptions,
//! mesh and system dumps).
//!
//! Floats are written with 17 significant digits so that files round-trip
//! bit exactly.

use crate::cluster::{
    BoundaryCycle, Chain, ChainEnd, ClusterMesh, ClusterTopology, Direction, Junction,
    JunctionEnd,
};
use crate::evolution::{RunConfig, Scheme, StateSnapshot, StepView, Trajectory};
use crate::exact::{
    exact_w_three, exact_w_two, radii_ode_three, radii_ode_two, RadiiTrajectory,
    ThreeCircleParams, TwoCircleParams, DEFAULT_ORACLE_DT,
};
use crate::geometry::Vec2;
use crate::scenario;
use crate::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Reference radii and potential for concentric-circle configurations.
#[derive(Debug, Clone)]
pub enum ConcentricOracle {
    Two { params: TwoCircleParams, trajectory: RadiiTrajectory },
    Three { params: ThreeCircleParams, trajectory: RadiiTrajectory },
}

impl ConcentricOracle {
    pub fn two(params: TwoCircleParams, t_end: f64) -> Self {
        let trajectory = radii_ode_two(&params, t_end, DEFAULT_ORACLE_DT);
        ConcentricOracle::Two { params, trajectory }
    }

    pub fn three(params: ThreeCircleParams, t_end: f64) -> Self {
        let trajectory = radii_ode_three(&params, t_end, DEFAULT_ORACLE_DT);
        ConcentricOracle::Three { params, trajectory }
    }

    pub fn num_circles(&self) -> usize {
        match self {
            ConcentricOracle::Two { .. } => 2,
            ConcentricOracle::Three { .. } => 3,
        }
    }

    /// Radii at time `t`, linearly interpolated on the stored trajectory.
    pub fn radii_at(&self, t: f64) -> Vec<f64> {
        match self {
            ConcentricOracle::Two { trajectory, .. } => trajectory.sample(t),
            ConcentricOracle::Three { trajectory, .. } => trajectory.sample(t),
        }
    }

    /// Exact potential at distance `r` from the center at time `t`.
    pub fn w_at(&self, r: f64, t: f64) -> f64 {
        match self {
            ConcentricOracle::Two { params, trajectory } => {
                let radii = trajectory.sample(t);
                exact_w_two(r, radii[0], radii[1], params)
            }
            ConcentricOracle::Three { params, trajectory } => {
                let radii = trajectory.sample(t);
                exact_w_three(r, [radii[0], radii[1], radii[2]], params)
            }
        }
    }

    /// True while the oracle trajectory covers `t`.
    pub fn covers(&self, t: f64) -> bool {
        let traj = match self {
            ConcentricOracle::Two { trajectory, .. } => trajectory,
            ConcentricOracle::Three { trajectory, .. } => trajectory,
        };
        t <= traj.end_time() * (1.0 + 1e-12)
    }
}

/// Streaming maximum errors against a concentric oracle, fed step by step.
#[derive(Debug, Clone)]
pub struct ErrorAccumulator {
    oracle: ConcentricOracle,
    pub gamma_error: f64,
    pub w_error: f64,
    /// Set when a step could not be compared (topology changed or the
    /// oracle stopped early).
    pub incomparable_steps: usize,
}

impl ErrorAccumulator {
    pub fn new(oracle: ConcentricOracle) -> Self {
        ErrorAccumulator { oracle, gamma_error: 0.0, w_error: 0.0, incomparable_steps: 0 }
    }

    /// Observes one completed step (step 0, which carries no potential,
    /// only enters the interface error).
    pub fn observe(&mut self, view: &StepView) {
        if view.cluster.num_curves() != self.oracle.num_circles() || !self.oracle.covers(view.time)
        {
            self.incomparable_steps += 1;
            return;
        }
        let radii = self.oracle.radii_at(view.time);
        if view.step > 0 {
            for (i, chain) in view.cluster.chains.iter().enumerate() {
                for p in &chain.points {
                    self.gamma_error = self.gamma_error.max((p.norm() - radii[i]).abs());
                }
            }
        }
        if let Some((vertices, w)) = view.bulk {
            for (x, wv) in vertices.iter().zip(w) {
                let exact = self.oracle.w_at(x.norm(), view.time);
                self.w_error = self.w_error.max((wv - exact).abs());
            }
        }
    }
}

/// Interface error `max_m max_i max_k dist(q, Gamma_i(t_m))` over the
/// stored snapshots of a concentric-circle run.
pub fn error_gamma(trajectory: &Trajectory, oracle: &ConcentricOracle) -> f64 {
    let mut acc = ErrorAccumulator::new(oracle.clone());
    for snap in &trajectory.snapshots {
        acc.observe(&StepView {
            step: snap.step,
            time: snap.time,
            topology: &snap.topology,
            cluster: &snap.cluster,
            bulk: None,
        });
    }
    acc.gamma_error
}

/// Potential error `max_m max_j |W^m(x_j) - w(x_j, t_m)|` over the stored
/// snapshots.
pub fn error_w(trajectory: &Trajectory, oracle: &ConcentricOracle) -> f64 {
    let mut acc = ErrorAccumulator::new(oracle.clone());
    for snap in &trajectory.snapshots {
        let bulk = snap.bulk.as_ref().map(|b| (b.vertices.as_slice(), b.w.as_slice()));
        acc.observe(&StepView {
            step: snap.step,
            time: snap.time,
            topology: &snap.topology,
            cluster: &snap.cluster,
            bulk,
        });
    }
    acc.w_error
}

/// One row of a convergence study.
#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub level: u32,
    pub h_f: f64,
    pub h_gamma_final: f64,
    pub w_error: f64,
    pub gamma_error: f64,
    pub k_bulk_final: usize,
    pub k_gamma_final: usize,
    pub content_drift: f64,
}

pub fn format_convergence_table(rows: &[ConvergenceRow]) -> String {
    let mut out = String::from("level,h_f,h_gamma_M,w_error,gamma_error,K_Omega_M,K_Gamma_M,v_drift\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.level,
            fmt_f64(r.h_f),
            fmt_f64(r.h_gamma_final),
            fmt_f64(r.w_error),
            fmt_f64(r.gamma_error),
            r.k_bulk_final,
            r.k_gamma_final,
            fmt_f64(r.content_drift),
        );
    }
    out
}

/// Runs the two-circle convergence configuration at one level and collects
/// the error report. Errors are sampled at every time step.
pub fn two_circle_convergence_row(
    scheme: Scheme,
    level: u32,
    betas: [f64; 3],
    radii: [f64; 2],
    t_end: f64,
) -> Result<(ConvergenceRow, Trajectory)> {
    let lp = scenario::level_params(level);
    let (topology, cluster) = scenario::two_circles(betas, [1.0, 1.0], radii, lp.k_gamma)?;
    let mut config = RunConfig::new(scheme, lp.tau, t_end, lp.n_coarse, lp.n_fine);
    config.output_every = usize::MAX; // streaming errors; keep only endpoints
    let params = TwoCircleParams::from_betas(betas, radii[0], radii[1])?;
    let oracle = ConcentricOracle::two(params, t_end);
    let mut acc = ErrorAccumulator::new(oracle);
    let mut k_bulk_final = 0usize;
    let trajectory = crate::evolution::run_with_observer(&config, &topology, &cluster, |view| {
        acc.observe(view);
        if let Some((vertices, _)) = view.bulk {
            k_bulk_final = vertices.len();
        }
    })?;
    let last = trajectory.series.last().expect("nonempty series");
    let first = &trajectory.series[0];
    let row = ConvergenceRow {
        level,
        h_f: 8.0 / lp.n_fine as f64,
        h_gamma_final: last.h_gamma_max,
        w_error: acc.w_error,
        gamma_error: acc.gamma_error,
        k_bulk_final,
        k_gamma_final: trajectory.final_snapshot().cluster.num_vertices(),
        content_drift: (last.content - first.content).abs(),
    };
    Ok((row, trajectory))
}

// ---------------------------------------------------------------------
// time series and snapshot files

pub fn timeseries_to_string(trajectory: &Trajectory) -> String {
    let phases = trajectory.series.first().map(|r| r.areas.len()).unwrap_or(0);
    let curves = trajectory
        .series
        .first()
        .map(|r| r.radial_extrema.len())
        .unwrap_or(0);
    let mut out = String::from("# stefan2d timeseries v1\n");
    out.push_str("step,time,energy,content,grad_w_sq,fp_iterations,max_speed,h_gamma_max");
    for p in 0..phases {
        let _ = write!(out, ",area_{p}");
    }
    for c in 0..curves {
        let _ = write!(out, ",rmin_{c},rmax_{c}");
    }
    out.push_str(",event\n");
    for row in &trajectory.series {
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{}",
            row.step,
            fmt_f64(row.time),
            fmt_f64(row.energy),
            fmt_f64(row.content),
            fmt_f64(row.grad_w_sq),
            row.fp_iterations,
            fmt_f64(row.max_speed),
            fmt_f64(row.h_gamma_max),
        );
        for p in 0..phases {
            match row.areas.get(p) {
                Some(a) => {
                    let _ = write!(out, ",{}", fmt_f64(*a));
                }
                None => out.push(','),
            }
        }
        for c in 0..curves {
            match row.radial_extrema.get(c) {
                Some((lo, hi)) => {
                    let _ = write!(out, ",{},{}", fmt_f64(*lo), fmt_f64(*hi));
                }
                None => out.push_str(",,"),
            }
        }
        match &row.surgery {
            Some(note) => {
                let _ = write!(out, ",{}", note.replace(',', ";"));
            }
            None => out.push(','),
        }
        out.push('\n');
    }
    out
}

pub fn write_timeseries(trajectory: &Trajectory, path: &Path) -> Result<()> {
    std::fs::write(path, timeseries_to_string(trajectory))?;
    Ok(())
}

/// Plain data content of a snapshot file.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotData {
    pub time: f64,
    /// Per curve: closed flag and rows `(x, y, kappa)`.
    pub curves: Vec<(bool, Vec<(f64, f64, Option<f64>)>)>,
    /// Bulk rows `(x, y, w)`, possibly empty.
    pub bulk: Vec<(f64, f64, f64)>,
}

impl SnapshotData {
    pub fn from_state(state: &StateSnapshot) -> Self {
        let curves = state
            .cluster
            .chains
            .iter()
            .enumerate()
            .map(|(i, chain)| {
                let rows = (0..chain.num_vertices())
                    .map(|k| {
                        let p = chain.points[k];
                        let kap = state
                            .kappa
                            .as_ref()
                            .map(|kv| kv[state.cluster.global_index(i, k)]);
                        (p.x, p.y, kap)
                    })
                    .collect();
                (chain.closed, rows)
            })
            .collect();
        let bulk = state
            .bulk
            .as_ref()
            .map(|b| {
                b.vertices
                    .iter()
                    .zip(&b.w)
                    .map(|(v, w)| (v.x, v.y, *w))
                    .collect()
            })
            .unwrap_or_default();
        SnapshotData { time: state.time, curves, bulk }
    }

    pub fn to_string_repr(&self) -> String {
        let mut out = String::from("# stefan2d snapshot v1\n");
        let _ = writeln!(out, "time,{}", fmt_f64(self.time));
        let _ = writeln!(out, "curves,{}", self.curves.len());
        for (i, (closed, rows)) in self.curves.iter().enumerate() {
            let _ = writeln!(out, "curve,{},{},{}", i, if *closed { 1 } else { 0 }, rows.len());
            for (x, y, kappa) in rows {
                match kappa {
                    Some(k) => {
                        let _ = writeln!(out, "{},{},{}", fmt_f64(*x), fmt_f64(*y), fmt_f64(*k));
                    }
                    None => {
                        let _ = writeln!(out, "{},{},", fmt_f64(*x), fmt_f64(*y));
                    }
                }
            }
        }
        let _ = writeln!(out, "bulk,{}", self.bulk.len());
        for (x, y, w) in &self.bulk {
            let _ = writeln!(out, "{},{},{}", fmt_f64(*x), fmt_f64(*y), fmt_f64(*w));
        }
        out
    }
}

pub fn write_snapshot(state: &StateSnapshot, path: &Path) -> Result<()> {
    std::fs::write(path, SnapshotData::from_state(state).to_string_repr())?;
    Ok(())
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>().map_err(|_| parse_err(line, format!("expected a number, got '{tok}'")))
}

fn parse_usize(tok: &str, line: usize) -> Result<usize> {
    tok.parse::<usize>()
        .map_err(|_| parse_err(line, format!("expected an integer, got '{tok}'")))
}

pub fn read_snapshot(path: &Path) -> Result<SnapshotData> {
    parse_snapshot(&std::fs::read_to_string(path)?)
}

pub fn parse_snapshot(text: &str) -> Result<SnapshotData> {
    let lines: Vec<&str> = text.lines().collect();
    let mut cursor = 0usize;
    let next_line = |cursor: &mut usize| -> Result<(usize, &str)> {
        let line = lines
            .get(*cursor)
            .ok_or_else(|| parse_err(*cursor, "unexpected end of file"))?;
        *cursor += 1;
        Ok((*cursor, line))
    };
    let expect = |cursor: &mut usize, prefix: &str| -> Result<(usize, String)> {
        let n = *cursor + 1;
        match lines.get(*cursor) {
            Some(l) if l.starts_with(prefix) => {
                *cursor += 1;
                Ok((n, l.to_string()))
            }
            Some(l) => Err(parse_err(n, format!("expected '{prefix}...', got '{l}'"))),
            None => Err(parse_err(n, format!("unexpected end of file, expected '{prefix}'"))),
        }
    };
    expect(&mut cursor, "# stefan2d snapshot v1")?;
    let (n, time_line) = expect(&mut cursor, "time,")?;
    let time = parse_f64(time_line.trim_start_matches("time,"), n)?;
    let (n, curves_line) = expect(&mut cursor, "curves,")?;
    let num_curves = parse_usize(curves_line.trim_start_matches("curves,"), n)?;
    let mut curves = Vec::with_capacity(num_curves);
    for _ in 0..num_curves {
        let (n, header) = expect(&mut cursor, "curve,")?;
        let parts: Vec<&str> = header.split(',').collect();
        if parts.len() != 4 {
            return Err(parse_err(n, "curve header needs 4 fields"));
        }
        let closed = parts[2] == "1";
        let count = parse_usize(parts[3], n)?;
        let mut rows = Vec::with_capacity(count);
        for _ in 0..count {
            let (n, line) = next_line(&mut cursor)?;
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 3 {
                return Err(parse_err(n, "vertex row needs 3 fields"));
            }
            let kappa = if parts[2].is_empty() { None } else { Some(parse_f64(parts[2], n)?) };
            rows.push((parse_f64(parts[0], n)?, parse_f64(parts[1], n)?, kappa));
        }
        curves.push((closed, rows));
    }
    let (n, bulk_line) = expect(&mut cursor, "bulk,")?;
    let num_bulk = parse_usize(bulk_line.trim_start_matches("bulk,"), n)?;
    let mut bulk = Vec::with_capacity(num_bulk);
    for _ in 0..num_bulk {
        let (n, line) = next_line(&mut cursor)?;
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(parse_err(n, "bulk row needs 3 fields"));
        }
        bulk.push((parse_f64(parts[0], n)?, parse_f64(parts[1], n)?, parse_f64(parts[2], n)?));
    }
    Ok(SnapshotData { time, curves, bulk })
}

// ---------------------------------------------------------------------
// cluster description files

/// Serializes a cluster (topology plus chains) to the text schema.
pub fn cluster_to_string(topology: &ClusterTopology, mesh: &ClusterMesh) -> String {
    let mut out = String::from("# stefan2d cluster v1\n");
    let _ = writeln!(out, "phases {} outer {}", topology.num_phases, topology.outer_phase);
    for (i, b) in topology.betas.iter().enumerate() {
        let _ = writeln!(out, "beta {} {}", i, fmt_f64(*b));
    }
    for (i, chain) in mesh.chains.iter().enumerate() {
        let (p, n) = topology.orientations[i];
        let _ = writeln!(
            out,
            "curve {} sigma {} plus {} minus {} closed {} vertices {}",
            i,
            fmt_f64(topology.tensions[i]),
            p,
            n,
            u8::from(chain.closed),
            chain.points.len()
        );
        for q in &chain.points {
            let _ = writeln!(out, "{} {}", fmt_f64(q.x), fmt_f64(q.y));
        }
    }
    for (k, junction) in topology.junctions.iter().enumerate() {
        let _ = write!(out, "junction {k}");
        for e in junction.ends {
            let tag = match e.end {
                ChainEnd::Start => "start",
                ChainEnd::End => "end",
            };
            let _ = write!(out, " {}:{}", e.curve, tag);
        }
        out.push('\n');
    }
    for cycle in &topology.cycles {
        let _ = write!(out, "cycle {}", cycle.phase);
        for (c, d) in &cycle.steps {
            let _ = write!(out, " {}:{}", c, if *d == Direction::Forward { '+' } else { '-' });
        }
        out.push('\n');
    }
    out
}

pub fn write_cluster(topology: &ClusterTopology, mesh: &ClusterMesh, path: &Path) -> Result<()> {
    std::fs::write(path, cluster_to_string(topology, mesh))?;
    Ok(())
}

/// Parses the cluster text schema and builds the validated mesh.
pub fn parse_cluster(text: &str) -> Result<(ClusterTopology, ClusterMesh)> {
    let mut num_phases = None;
    let mut outer_phase = 0usize;
    let mut betas: Vec<(usize, f64)> = Vec::new();
    struct CurveDecl {
        sigma: f64,
        plus: usize,
        minus: usize,
        closed: bool,
        points: Vec<Vec2>,
    }
    let mut curves: Vec<CurveDecl> = Vec::new();
    let mut junctions: Vec<Junction> = Vec::new();
    let mut cycles: Vec<BoundaryCycle> = Vec::new();
    let mut pending_points = 0usize;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if pending_points > 0 {
            let mut it = line.split_whitespace();
            let x = parse_f64(it.next().unwrap_or(""), line_no)?;
            let y = parse_f64(
                it.next().ok_or_else(|| parse_err(line_no, "vertex needs two coordinates"))?,
                line_no,
            )?;
            curves.last_mut().expect("points follow a curve header").points.push(Vec2::new(x, y));
            pending_points -= 1;
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens[0] {
            "phases" => {
                if tokens.len() != 4 || tokens[2] != "outer" {
                    return Err(parse_err(line_no, "expected 'phases <n> outer <p>'"));
                }
                num_phases = Some(parse_usize(tokens[1], line_no)?);
                outer_phase = parse_usize(tokens[3], line_no)?;
            }
            "beta" => {
                if tokens.len() != 3 {
                    return Err(parse_err(line_no, "expected 'beta <phase> <value>'"));
                }
                betas.push((parse_usize(tokens[1], line_no)?, parse_f64(tokens[2], line_no)?));
            }
            "curve" => {
                if tokens.len() != 12
                    || tokens[2] != "sigma"
                    || tokens[4] != "plus"
                    || tokens[6] != "minus"
                    || tokens[8] != "closed"
                    || tokens[10] != "vertices"
                {
                    return Err(parse_err(
                        line_no,
                        "expected 'curve <i> sigma <s> plus <p> minus <n> closed <0|1> vertices <k>'",
                    ));
                }
                let declared = parse_usize(tokens[1], line_no)?;
                if declared != curves.len() {
                    return Err(parse_err(line_no, "curve indices must be consecutive from 0"));
                }
                pending_points = parse_usize(tokens[11], line_no)?;
                curves.push(CurveDecl {
                    sigma: parse_f64(tokens[3], line_no)?,
                    plus: parse_usize(tokens[5], line_no)?,
                    minus: parse_usize(tokens[7], line_no)?,
                    closed: tokens[9] == "1",
                    points: Vec::with_capacity(pending_points),
                });
            }
            "junction" => {
                if tokens.len() != 5 {
                    return Err(parse_err(line_no, "expected 'junction <k> c:end c:end c:end'"));
                }
                let mut ends = [JunctionEnd { curve: 0, end: ChainEnd::Start }; 3];
                for (slot, tok) in tokens[2..].iter().enumerate() {
                    let (c, e) = tok
                        .split_once(':')
                        .ok_or_else(|| parse_err(line_no, "junction end must be 'curve:start|end'"))?;
                    let end = match e {
                        "start" => ChainEnd::Start,
                        "end" => ChainEnd::End,
                        _ => return Err(parse_err(line_no, format!("unknown chain end '{e}'"))),
                    };
                    ends[slot] = JunctionEnd { curve: parse_usize(c, line_no)?, end };
                }
                junctions.push(Junction { ends });
            }
            "cycle" => {
                if tokens.len() < 3 {
                    return Err(parse_err(line_no, "expected 'cycle <phase> c:+ c:- ...'"));
                }
                let phase = parse_usize(tokens[1], line_no)?;
                let mut steps = Vec::new();
                for tok in &tokens[2..] {
                    let (c, d) = tok
                        .split_once(':')
                        .ok_or_else(|| parse_err(line_no, "cycle step must be 'curve:+|-'"))?;
                    let dir = match d {
                        "+" => Direction::Forward,
                        "-" => Direction::Reverse,
                        _ => return Err(parse_err(line_no, format!("unknown direction '{d}'"))),
                    };
                    steps.push((parse_usize(c, line_no)?, dir));
                }
                cycles.push(BoundaryCycle { phase, steps });
            }
            other => {
                return Err(parse_err(line_no, format!("unknown directive '{other}'")));
            }
        }
    }
    if pending_points > 0 {
        return Err(parse_err(0, "file ended inside a vertex list"));
    }
    let num_phases =
        num_phases.ok_or_else(|| parse_err(0, "missing 'phases' declaration"))?;
    let mut beta_vec = vec![f64::NAN; num_phases];
    for (i, b) in betas {
        if i >= num_phases {
            return Err(parse_err(0, format!("beta index {i} out of range")));
        }
        beta_vec[i] = b;
    }
    if beta_vec.iter().any(|b| b.is_nan()) {
        return Err(parse_err(0, "missing beta value for some phase"));
    }
    let topology = ClusterTopology {
        num_phases,
        betas: beta_vec,
        tensions: curves.iter().map(|c| c.sigma).collect(),
        orientations: curves.iter().map(|c| (c.plus, c.minus)).collect(),
        closed: curves.iter().map(|c| c.closed).collect(),
        junctions,
        cycles,
        outer_phase,
    };
    let chains: Vec<Chain> = curves
        .into_iter()
        .map(|c| Chain { points: c.points, closed: c.closed })
        .collect();
    let mesh = crate::cluster::build_cluster(&topology, chains)?;
    Ok((topology, mesh))
}

pub fn read_cluster(path: &Path) -> Result<(ClusterTopology, ClusterMesh)> {
    parse_cluster(&std::fs::read_to_string(path)?)
}

// ---------------------------------------------------------------------
// auxiliary dumps

/// Vertex/triangle CSV of a bulk mesh, for visualization.
pub fn bulk_mesh_to_string(mesh: &crate::bulk::BulkMesh) -> String {
    let mut out = String::from("# stefan2d bulkmesh v1\n");
    let _ = writeln!(out, "vertices,{}", mesh.vertices.len());
    for v in &mesh.vertices {
        let _ = writeln!(out, "{},{}", fmt_f64(v.x), fmt_f64(v.y));
    }
    let _ = writeln!(out, "triangles,{}", mesh.triangles.len());
    for t in &mesh.triangles {
        let _ = writeln!(out, "{},{},{}", t[0], t[1], t[2]);
    }
    out
}

/// Triplet text dump of the condensed block system.
pub fn system_to_string(system: &crate::system::BlockSystem) -> String {
    let triplets = system.assemble_triplets();
    let mut out = String::from("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(out, "{} {} {}", system.dim(), system.dim(), triplets.len());
    for (r, c, v) in triplets {
        let _ = writeln!(out, "{} {} {}", r + 1, c + 1, fmt_f64(v));
    }
    out
}

/// Oracle-overlay radii table for concentric scenarios: per sampled step,
/// the discrete radial extrema of every curve next to the oracle radii.
pub fn radii_overlay_to_string(trajectory: &Trajectory, oracle: &ConcentricOracle) -> String {
    let curves = oracle.num_circles();
    let mut out = String::from("# stefan2d radii overlay v1\n");
    out.push_str("time");
    for c in 0..curves {
        let _ = write!(out, ",rmin_{c},rmax_{c},oracle_{c}");
    }
    out.push('\n');
    for row in &trajectory.series {
        if row.radial_extrema.len() != curves || !oracle.covers(row.time) {
            continue;
        }
        let radii = oracle.radii_at(row.time);
        let _ = write!(out, "{}", fmt_f64(row.time));
        for c in 0..curves {
            let (lo, hi) = row.radial_extrema[c];
            let _ = write!(out, ",{},{},{}", fmt_f64(lo), fmt_f64(hi), fmt_f64(radii[c]));
        }
        out.push('\n');
    }
    out
}
