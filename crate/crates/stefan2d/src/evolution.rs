//! Time stepping: the linear scheme, the conservative scheme with its
//! lagged fixed-point iteration, the run loop, and minimal topology
//! surgery for vanishing phases.
//!
//! One linear step solves the block system with the vertex normals of the
//! current mesh. The conservative step replaces them by the intermediate
//! normals of the interpolated mid-step surface, which depend on the
//! unknown displacement; the nonlinearity is resolved by lagging: the first
//! iterate uses the current normals (and therefore equals the linear
//! step), each further iterate re-evaluates the intermediate normals at the
//! latest displacement. At the fixed point the total energy content
//! `v = sum_l beta_l |Omega_l|` is conserved exactly.

use crate::bulk::{assemble_stiffness, build_adaptive_mesh};
use crate::cluster::{
    build_cluster, energy, intermediate_vertex_normals, lumped_vertex_masses, phase_areas,
    total_content, vertex_normals, Chain, ChainEnd, ClusterMesh, ClusterTopology, Direction,
    VertexNormalField,
};
use crate::coupling::{assemble_coupling, IntegrationMode};
use crate::geometry::Vec2;
use crate::system::{assemble_surface_blocks, build_system, junction_condensation, solve_system};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Linear,
    Conservative,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scheme::Linear => write!(f, "linear"),
            Scheme::Conservative => write!(f, "conservative"),
        }
    }
}

/// Spatial and quadrature parameters of a single step.
#[derive(Debug, Clone, Copy)]
pub struct StepParams {
    pub tau: f64,
    pub h: f64,
    pub n_coarse: u32,
    pub n_fine: u32,
    pub mode: IntegrationMode,
}

/// Everything one step produces.
#[derive(Debug, Clone)]
pub struct StepResult {
    pub cluster: ClusterMesh,
    pub w: Vec<f64>,
    pub kappa: Vec<f64>,
    pub bulk_vertices: Vec<Vec2>,
    /// `W^T A W`, the discrete Dirichlet energy of the potential.
    pub grad_w_sq: f64,
    pub delta_x: Vec<Vec2>,
    /// The normal field the final solve used (current normals for the
    /// linear scheme, converged intermediate normals for the conservative
    /// one).
    pub omega_used: VertexNormalField,
    pub fp_iterations: usize,
    /// Max-norm displacement change per lagged iteration (empty for the
    /// linear scheme).
    pub fp_updates: Vec<f64>,
    pub max_displacement: f64,
    pub warnings: Vec<String>,
}

fn displaced_positions(cluster: &ClusterMesh, delta_x: &[Vec2]) -> Vec<Vec<Vec2>> {
    cluster
        .chains
        .iter()
        .enumerate()
        .map(|(i, c)| {
            (0..c.num_vertices())
                .map(|k| c.points[k] + delta_x[cluster.global_index(i, k)])
                .collect()
        })
        .collect()
}

fn max_norm(delta_x: &[Vec2]) -> f64 {
    delta_x.iter().map(|d| d.norm()).fold(0.0, f64::max)
}

/// One step of the linear scheme: a single solve with the current vertex
/// normals, then `X_new = X + deltaX`.
pub fn step_linear(
    topology: &ClusterTopology,
    cluster: &ClusterMesh,
    p: &StepParams,
) -> Result<StepResult> {
    let bulk = build_adaptive_mesh(p.h, p.n_coarse, p.n_fine, cluster)?;
    let stiffness = assemble_stiffness(&bulk);
    let omega = vertex_normals(cluster);
    let coupling = assemble_coupling(&bulk, cluster, &omega, p.mode)?;
    let surface = assemble_surface_blocks(cluster, topology);
    let junctions = junction_condensation(topology, cluster);
    let system =
        build_system(p.tau, &stiffness, &coupling, &surface, topology, cluster, &junctions)?;
    let warnings = system.warnings.clone();
    let sol = solve_system(&system)?;
    let positions = displaced_positions(cluster, &sol.delta_x);
    let moved = cluster.with_positions(&positions);
    Ok(StepResult {
        cluster: moved,
        grad_w_sq: stiffness.quadratic_form(&sol.w),
        w: sol.w,
        kappa: sol.kappa,
        bulk_vertices: bulk.vertices.clone(),
        max_displacement: max_norm(&sol.delta_x),
        delta_x: sol.delta_x,
        omega_used: omega,
        fp_iterations: 1,
        fp_updates: Vec::new(),
        warnings,
    })
}

/// One step of the conservative scheme, resolved by lagged iteration: the
/// first iterate uses the current normals (identical to the linear step),
/// afterwards the intermediate normals are re-evaluated at the latest
/// displacement until the displacement update falls below `fp_tol`.
pub fn step_conservative(
    topology: &ClusterTopology,
    cluster: &ClusterMesh,
    p: &StepParams,
    fp_tol: f64,
    max_iter: usize,
) -> Result<StepResult> {
    let bulk = build_adaptive_mesh(p.h, p.n_coarse, p.n_fine, cluster)?;
    let stiffness = assemble_stiffness(&bulk);
    let omega_m = vertex_normals(cluster);
    let coupling = assemble_coupling(&bulk, cluster, &omega_m, p.mode)?;
    let surface = assemble_surface_blocks(cluster, topology);
    let junctions = junction_condensation(topology, cluster);

    let mut omega = omega_m;
    let mut warnings = Vec::new();
    let mut prev_delta: Option<Vec<Vec2>> = None;
    let mut fp_updates = Vec::new();
    for iteration in 1..=max_iter {
        let coupling_iter = if iteration == 1 {
            coupling.clone()
        } else {
            coupling.with_omega(cluster, omega.clone())
        };
        let system = build_system(
            p.tau,
            &stiffness,
            &coupling_iter,
            &surface,
            topology,
            cluster,
            &junctions,
        )?;
        if iteration == 1 {
            warnings = system.warnings.clone();
        }
        let sol = solve_system(&system)?;
        let update = match &prev_delta {
            Some(prev) => prev
                .iter()
                .zip(&sol.delta_x)
                .map(|(a, b)| (*a - *b).norm())
                .fold(0.0, f64::max),
            None => f64::INFINITY,
        };
        if prev_delta.is_some() {
            fp_updates.push(update);
        }
        let positions = displaced_positions(cluster, &sol.delta_x);
        if update <= fp_tol {
            let moved = cluster.with_positions(&positions);
            return Ok(StepResult {
                cluster: moved,
                grad_w_sq: stiffness.quadratic_form(&sol.w),
                w: sol.w,
                kappa: sol.kappa,
                bulk_vertices: bulk.vertices.clone(),
                max_displacement: max_norm(&sol.delta_x),
                delta_x: sol.delta_x,
                omega_used: coupling_iter.omega.clone(),
                fp_iterations: iteration,
                fp_updates,
                warnings,
            });
        }
        omega = intermediate_vertex_normals(cluster, &positions)?;
        prev_delta = Some(sol.delta_x);
    }
    Err(Error::FixedPointDivergence(format!(
        "lagged iteration did not reach {fp_tol:.1e} within {max_iter} iterations (last update {:.3e})",
        fp_updates.last().copied().unwrap_or(f64::INFINITY)
    )))
}

/// Per-phase residuals of the discrete area-change identity
/// `|Omega_l^new| - |Omega_l^old| + sum_i chi_{l,i} <I^h[dX . omega], 1>_h = 0`,
/// exact when `omega` is the converged intermediate normal field.
pub fn area_identity_residuals(
    topology: &ClusterTopology,
    cluster_old: &ClusterMesh,
    omega: &VertexNormalField,
    delta_x: &[Vec2],
    areas_old: &[f64],
    areas_new: &[f64],
) -> Vec<f64> {
    let mut fluxes = vec![0.0; cluster_old.num_curves()];
    for (i, flux) in fluxes.iter_mut().enumerate() {
        let masses = lumped_vertex_masses(cluster_old, i);
        *flux = (0..cluster_old.chains[i].num_vertices())
            .map(|k| masses[k] * delta_x[cluster_old.global_index(i, k)].dot(omega.at(i, k)))
            .sum();
    }
    (0..topology.num_phases)
        .map(|phase| {
            let mut residual = areas_new[phase] - areas_old[phase];
            for (i, &(p, n)) in topology.orientations.iter().enumerate() {
                if p == phase {
                    residual += fluxes[i];
                } else if n == phase {
                    residual -= fluxes[i];
                }
            }
            residual
        })
        .collect()
}

/// Run configuration: scheme, horizon, discretization and policies.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scheme: Scheme,
    pub tau: f64,
    pub t_end: f64,
    pub h: f64,
    pub n_coarse: u32,
    pub n_fine: u32,
    pub mode: IntegrationMode,
    pub fp_tol: f64,
    pub max_fp_iter: usize,
    /// Relative area threshold for surgery (fraction of a phase's initial
    /// area); `None` disables surgery and lets degenerate events abort.
    pub surgery_threshold: Option<f64>,
    /// Keep a full snapshot every this many steps (the final state is
    /// always kept).
    pub output_every: usize,
}

impl RunConfig {
    pub fn new(scheme: Scheme, tau: f64, t_end: f64, n_coarse: u32, n_fine: u32) -> Self {
        RunConfig {
            scheme,
            tau,
            t_end,
            h: 4.0,
            n_coarse,
            n_fine,
            mode: IntegrationMode::True,
            fp_tol: 1e-10,
            max_fp_iter: 50,
            surgery_threshold: Some(1e-3),
            output_every: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || !(self.t_end >= self.tau) || !(self.fp_tol > 0.0) {
            return Err(Error::DimensionMismatch(format!(
                "invalid run config: tau = {}, T = {}, fp_tol = {}",
                self.tau, self.t_end, self.fp_tol
            )));
        }
        Ok(())
    }

    pub fn step_params(&self, tau: f64) -> StepParams {
        StepParams {
            tau,
            h: self.h,
            n_coarse: self.n_coarse,
            n_fine: self.n_fine,
            mode: self.mode,
        }
    }
}

/// Bulk data kept in a snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct BulkSnapshot {
    pub vertices: Vec<Vec2>,
    pub w: Vec<f64>,
}

/// State after step `step` (step 0 is the initial data, with no potential).
#[derive(Debug, Clone)]
pub struct StateSnapshot {
    pub step: usize,
    pub time: f64,
    pub topology: ClusterTopology,
    pub cluster: ClusterMesh,
    pub kappa: Option<Vec<f64>>,
    pub bulk: Option<BulkSnapshot>,
    pub energy: f64,
    pub areas: Vec<f64>,
    pub content: f64,
    pub grad_w_sq: Option<f64>,
}

/// One row of per-step diagnostics (recorded every step).
#[derive(Debug, Clone)]
pub struct SeriesRow {
    pub step: usize,
    pub time: f64,
    pub energy: f64,
    pub content: f64,
    pub areas: Vec<f64>,
    pub grad_w_sq: f64,
    pub fp_iterations: usize,
    pub max_speed: f64,
    pub h_gamma_max: f64,
    /// Min and max vertex distance from the origin, per curve.
    pub radial_extrema: Vec<(f64, f64)>,
    pub surgery: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<StateSnapshot>,
    pub series: Vec<SeriesRow>,
    pub warnings: Vec<String>,
    /// Total content change booked to surgery events, so that
    /// `v^M - v^0 - surgery_content_jump` isolates the scheme drift.
    pub surgery_content_jump: f64,
}

impl Trajectory {
    pub fn final_snapshot(&self) -> &StateSnapshot {
        self.snapshots.last().expect("trajectory keeps the final state")
    }
}

/// Live view of a completed step, for streaming observers.
pub struct StepView<'a> {
    pub step: usize,
    pub time: f64,
    pub topology: &'a ClusterTopology,
    pub cluster: &'a ClusterMesh,
    /// Bulk vertices and potential values (absent at step 0).
    pub bulk: Option<(&'a [Vec2], &'a [f64])>,
}

fn radial_extrema(cluster: &ClusterMesh) -> Vec<(f64, f64)> {
    cluster
        .chains
        .iter()
        .map(|c| {
            let mut lo = f64::INFINITY;
            let mut hi = 0.0_f64;
            for p in &c.points {
                let r = p.norm();
                lo = lo.min(r);
                hi = hi.max(r);
            }
            (lo, hi)
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn make_snapshot(
    step: usize,
    time: f64,
    topology: &ClusterTopology,
    cluster: &ClusterMesh,
    result: Option<&StepResult>,
    areas: &[f64],
) -> StateSnapshot {
    StateSnapshot {
        step,
        time,
        topology: topology.clone(),
        cluster: cluster.clone(),
        kappa: result.map(|r| r.kappa.clone()),
        bulk: result.map(|r| BulkSnapshot { vertices: r.bulk_vertices.clone(), w: r.w.clone() }),
        energy: energy(cluster, topology),
        areas: areas.to_vec(),
        content: total_content(areas, &topology.betas),
        grad_w_sq: result.map(|r| r.grad_w_sq),
    }
}

/// Runs the configured scheme from the initial cluster to `t_end`,
/// recording per-step diagnostics and snapshots at the output cadence.
pub fn run(
    config: &RunConfig,
    topology: &ClusterTopology,
    initial: &ClusterMesh,
) -> Result<Trajectory> {
    run_with_observer(config, topology, initial, |_| {})
}

pub fn run_with_observer(
    config: &RunConfig,
    topology: &ClusterTopology,
    initial: &ClusterMesh,
    mut observe: impl FnMut(&StepView),
) -> Result<Trajectory> {
    config.validate()?;
    let mut topology = topology.clone();
    let mut cluster = initial.clone();

    let areas0 = phase_areas(&cluster, &topology, config.h)?;
    let surgery_floor: Option<Vec<f64>> = config
        .surgery_threshold
        .map(|rel| areas0.iter().map(|a| rel * a.max(1e-12)).collect());

    let mut snapshots = Vec::new();
    let mut series = Vec::new();
    let mut warnings: Vec<String> = Vec::new();
    let mut surgery_content_jump = 0.0;

    snapshots.push(make_snapshot(0, 0.0, &topology, &cluster, None, &areas0));
    series.push(SeriesRow {
        step: 0,
        time: 0.0,
        energy: energy(&cluster, &topology),
        content: total_content(&areas0, &topology.betas),
        areas: areas0.clone(),
        grad_w_sq: 0.0,
        fp_iterations: 0,
        max_speed: 0.0,
        h_gamma_max: cluster.max_segment_length(),
        radial_extrema: radial_extrema(&cluster),
        surgery: None,
    });
    observe(&StepView { step: 0, time: 0.0, topology: &topology, cluster: &cluster, bulk: None });

    let t_end = config.t_end;
    let mut t = 0.0;
    let mut step = 0usize;
    while t < t_end - 1e-12 * t_end.max(1.0) {
        let tau_m = config.tau.min(t_end - t);
        let params = config.step_params(tau_m);
        let result = match config.scheme {
            Scheme::Linear => step_linear(&topology, &cluster, &params),
            Scheme::Conservative => {
                step_conservative(&topology, &cluster, &params, config.fp_tol, config.max_fp_iter)
            }
        }
        .map_err(|e| annotate_step(e, step + 1))?;
        step += 1;
        t += tau_m;
        for w in &result.warnings {
            let tagged = format!("step {step}: {w}");
            if !warnings.contains(&tagged) {
                warnings.push(tagged);
            }
        }

        let mut new_cluster = result.cluster.clone();
        let mut areas =
            phase_areas(&new_cluster, &topology, config.h).map_err(|e| annotate_step(e, step))?;
        let mut surgery_note = None;

        if let Some(floors) = &surgery_floor {
            if let Some(outcome) = surgery_small_phase(&topology, &new_cluster, floors, config.h)
                .map_err(|e| annotate_step(e, step))?
            {
                let content_before = total_content(&areas, &topology.betas);
                topology = outcome.topology;
                new_cluster = outcome.cluster;
                areas = phase_areas(&new_cluster, &topology, config.h)
                    .map_err(|e| annotate_step(e, step))?;
                let content_after = total_content(&areas, &topology.betas);
                surgery_content_jump += content_after - content_before;
                surgery_note = Some(format!(
                    "{} (content jump {:+.3e})",
                    outcome.description,
                    content_after - content_before
                ));
            }
        }
        if surgery_note.is_none() {
            let h_f = 2.0 * config.h / config.n_fine as f64;
            let min_seg = new_cluster.min_segment_length();
            if min_seg < 1e-3 * h_f {
                return Err(annotate_step(
                    Error::DegenerateMesh(format!(
                        "segment collapsed to {min_seg:.3e} (resolution floor {:.3e})",
                        1e-3 * h_f
                    )),
                    step,
                ));
            }
        }

        series.push(SeriesRow {
            step,
            time: t,
            energy: energy(&new_cluster, &topology),
            content: total_content(&areas, &topology.betas),
            areas: areas.clone(),
            grad_w_sq: result.grad_w_sq,
            fp_iterations: result.fp_iterations,
            max_speed: result.max_displacement / tau_m,
            h_gamma_max: new_cluster.max_segment_length(),
            radial_extrema: radial_extrema(&new_cluster),
            surgery: surgery_note.clone(),
        });

        cluster = new_cluster;
        let emptied = cluster.num_curves() == 0;
        let last = t >= t_end - 1e-12 * t_end.max(1.0) || emptied;
        if step % config.output_every.max(1) == 0 || last || surgery_note.is_some() {
            snapshots.push(make_snapshot(step, t, &topology, &cluster, Some(&result), &areas));
        }
        observe(&StepView {
            step,
            time: t,
            topology: &topology,
            cluster: &cluster,
            bulk: Some((&result.bulk_vertices, &result.w)),
        });
        if emptied {
            warnings.push(format!(
                "step {step}: surgery removed the last curve; run finished at t = {t}"
            ));
            break;
        }
    }

    Ok(Trajectory { snapshots, series, warnings, surgery_content_jump })
}

fn annotate_step(e: Error, step: usize) -> Error {
    match e {
        Error::SolveFailure(m) => Error::SolveFailure(format!("step {step}: {m}")),
        Error::FixedPointDivergence(m) => Error::FixedPointDivergence(format!("step {step}: {m}")),
        Error::DegenerateMesh(m) => Error::DegenerateMesh(format!("step {step}: {m}")),
        Error::SurgeryUnsupported(m) => Error::SurgeryUnsupported(format!("step {step}: {m}")),
        Error::Geometry(m) => Error::Geometry(format!("step {step}: {m}")),
        other => other,
    }
}

/// Result of a surgery event.
pub struct SurgeryOutcome {
    pub topology: ClusterTopology,
    pub cluster: ClusterMesh,
    pub description: String,
}

/// Detects and performs at most one surgery event: a phase (or a region
/// enclosed by a single closed curve) whose area fell below its floor, or a
/// curve ground down to fewer than 4 vertices. Two cases are supported:
/// removal of a closed curve enclosing a vanishing region, and removal of
/// one curve of a junction-bounded phase with concatenation of the two
/// remaining curves. Everything else reports `SurgeryUnsupported`.
pub fn surgery_small_phase(
    topology: &ClusterTopology,
    cluster: &ClusterMesh,
    area_floor: &[f64],
    h: f64,
) -> Result<Option<SurgeryOutcome>> {
    // closed curves enclosing a vanishing region
    for (i, chain) in cluster.chains.iter().enumerate() {
        if !chain.closed {
            continue;
        }
        let enclosed = polygon_area(&chain.points).abs();
        let inside_phase = inside_phase_of(topology, cluster, i);
        let floor = area_floor.get(inside_phase).copied().unwrap_or(0.0);
        if enclosed < floor || chain.num_vertices() < 4 {
            if curve_contains_other_vertices(cluster, i) {
                return Err(Error::SurgeryUnsupported(format!(
                    "curve {i} encloses a vanishing region that still contains other curves"
                )));
            }
            return Ok(Some(remove_closed_curve(topology, cluster, i, inside_phase)?));
        }
    }
    // junction-bounded phases
    let areas = phase_areas(cluster, topology, h)?;
    for phase in 0..topology.num_phases {
        if phase == topology.outer_phase {
            continue;
        }
        let bounding: Vec<usize> = (0..topology.num_curves())
            .filter(|&i| {
                let (p, n) = topology.orientations[i];
                p == phase || n == phase
            })
            .collect();
        let open_bounding: Vec<usize> =
            bounding.iter().copied().filter(|&i| !topology.closed[i]).collect();
        if open_bounding.is_empty() {
            continue;
        }
        let tiny_open_curve =
            open_bounding.iter().any(|&i| cluster.chains[i].num_vertices() < 4);
        if areas[phase] < area_floor.get(phase).copied().unwrap_or(0.0) || tiny_open_curve {
            let removed = *open_bounding
                .iter()
                .min_by(|&&a, &&b| {
                    cluster.chains[a]
                        .length()
                        .partial_cmp(&cluster.chains[b].length())
                        .unwrap()
                })
                .expect("nonempty open bounding set");
            return Ok(Some(remove_junction_curve(topology, cluster, removed, phase)?));
        }
    }
    Ok(None)
}

fn polygon_area(points: &[Vec2]) -> f64 {
    let n = points.len();
    let mut twice = 0.0;
    for k in 0..n {
        twice += points[k].cross(points[(k + 1) % n]);
    }
    0.5 * twice
}

/// The phase on the enclosed side of a closed curve: counterclockwise
/// chains (positive area) have inward normals, so the enclosed side is the
/// `plus` phase; clockwise chains enclose the `minus` phase.
fn inside_phase_of(topology: &ClusterTopology, cluster: &ClusterMesh, i: usize) -> usize {
    let (p, n) = topology.orientations[i];
    if polygon_area(&cluster.chains[i].points) > 0.0 {
        p
    } else {
        n
    }
}

fn point_in_polygon(points: &[Vec2], q: Vec2) -> bool {
    let mut inside = false;
    let n = points.len();
    for k in 0..n {
        let a = points[k];
        let b = points[(k + 1) % n];
        if (a.y > q.y) != (b.y > q.y) {
            let x_cross = a.x + (q.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if q.x < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

fn curve_contains_other_vertices(cluster: &ClusterMesh, i: usize) -> bool {
    let poly = &cluster.chains[i].points;
    cluster
        .chains
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .any(|(_, c)| c.points.iter().any(|&q| point_in_polygon(poly, q)))
}

fn reindex_after_removal(index: usize, removed: &[usize]) -> usize {
    index - removed.iter().filter(|&&r| r < index).count()
}

/// Case 1: the vanishing region is enclosed by the single closed curve
/// `removed`; the curve is dropped and the region is absorbed by the
/// neighboring phase.
fn remove_closed_curve(
    topology: &ClusterTopology,
    cluster: &ClusterMesh,
    removed: usize,
    vanished_phase: usize,
) -> Result<SurgeryOutcome> {
    let mut new_topology = topology.clone();
    new_topology.tensions.remove(removed);
    new_topology.orientations.remove(removed);
    new_topology.closed.remove(removed);
    new_topology.cycles.retain(|cycle| cycle.steps.iter().all(|&(c, _)| c != removed));
    for cycle in &mut new_topology.cycles {
        for step in &mut cycle.steps {
            step.0 = reindex_after_removal(step.0, &[removed]);
        }
    }
    for junction in &mut new_topology.junctions {
        for end in &mut junction.ends {
            end.curve = reindex_after_removal(end.curve, &[removed]);
        }
    }
    let mut chains = cluster.chains.clone();
    chains.remove(removed);
    let mesh = build_cluster(&new_topology, chains)?;
    Ok(SurgeryOutcome {
        topology: new_topology,
        cluster: mesh,
        description: format!(
            "removed closed curve {removed} enclosing vanished region of phase {vanished_phase}"
        ),
    })
}

/// Case 2: a junction-bounded phase vanished. The given curve is removed;
/// its two junctions turn into plain joints and the two remaining curves
/// are concatenated into a single closed curve.
fn remove_junction_curve(
    topology: &ClusterTopology,
    cluster: &ClusterMesh,
    removed: usize,
    vanished_phase: usize,
) -> Result<SurgeryOutcome> {
    let touching: Vec<usize> = topology
        .junctions
        .iter()
        .enumerate()
        .filter(|(_, j)| j.ends.iter().any(|e| e.curve == removed))
        .map(|(k, _)| k)
        .collect();
    if touching.len() != 2 {
        return Err(Error::SurgeryUnsupported(format!(
            "curve {removed} touches {} junctions, need exactly 2",
            touching.len()
        )));
    }
    let partners: Vec<Vec<crate::cluster::JunctionEnd>> = touching
        .iter()
        .map(|&k| {
            topology.junctions[k]
                .ends
                .iter()
                .copied()
                .filter(|e| e.curve != removed)
                .collect()
        })
        .collect();
    let mut curves_a: Vec<usize> = partners[0].iter().map(|e| e.curve).collect();
    let mut curves_b: Vec<usize> = partners[1].iter().map(|e| e.curve).collect();
    curves_a.sort_unstable();
    curves_b.sort_unstable();
    if curves_a != curves_b || curves_a[0] == curves_a[1] {
        return Err(Error::SurgeryUnsupported(format!(
            "junctions of curve {removed} do not join the same pair of distinct curves"
        )));
    }
    let (first, second) = (curves_a[0], curves_a[1]);

    // walk `first` from junction 0 to junction 1, then `second` back
    let end_at = |ends: &[crate::cluster::JunctionEnd], curve: usize| -> ChainEnd {
        ends.iter().find(|e| e.curve == curve).expect("partner present").end
    };
    let first_start = end_at(&partners[0], first);
    let second_start = end_at(&partners[1], second);

    let oriented = |curve: usize, from: ChainEnd| -> (Vec<Vec2>, bool) {
        let pts = cluster.chains[curve].points.clone();
        match from {
            ChainEnd::Start => (pts, false),
            ChainEnd::End => {
                let mut r = pts;
                r.reverse();
                (r, true)
            }
        }
    };
    let (walk_a, a_reversed) = oriented(first, first_start);
    let (walk_b, b_reversed) = oriented(second, second_start);

    // effective orientation pairs along the walk, with the vanished phase
    // replaced by the phase beyond the removed curve
    let (rp, rn) = topology.orientations[removed];
    let absorbing = if rp == vanished_phase { rn } else { rp };
    let substitute = |phase: usize| if phase == vanished_phase { absorbing } else { phase };
    let effective = |curve: usize, reversed: bool| -> (usize, usize) {
        let (p, n) = topology.orientations[curve];
        let (p, n) = (substitute(p), substitute(n));
        if reversed {
            (n, p)
        } else {
            (p, n)
        }
    };
    let pair_a = effective(first, a_reversed);
    let pair_b = effective(second, b_reversed);
    if pair_a != pair_b {
        return Err(Error::SurgeryUnsupported(format!(
            "cannot merge curves {first} and {second}: inconsistent orientations {pair_a:?} vs {pair_b:?}"
        )));
    }

    let mut merged_points = walk_a;
    merged_points.extend_from_slice(&walk_b[1..walk_b.len() - 1]);
    let merged = Chain { points: merged_points, closed: true };

    // rebuild the topology: drop the removed curve and the two survivors,
    // append the merged curve, compact indices
    let dropped = {
        let mut d = vec![removed, first, second];
        d.sort_unstable();
        d
    };
    let mut new_topology = topology.clone();
    for &d in dropped.iter().rev() {
        new_topology.tensions.remove(d);
        new_topology.orientations.remove(d);
        new_topology.closed.remove(d);
    }
    new_topology.junctions = topology
        .junctions
        .iter()
        .enumerate()
        .filter(|(k, _)| !touching.contains(k))
        .map(|(_, j)| j.clone())
        .collect();
    for junction in &mut new_topology.junctions {
        for end in &mut junction.ends {
            end.curve = reindex_after_removal(end.curve, &dropped);
        }
    }
    new_topology
        .cycles
        .retain(|cycle| cycle.steps.iter().all(|&(c, _)| !dropped.contains(&c)));
    for cycle in &mut new_topology.cycles {
        for step in &mut cycle.steps {
            step.0 = reindex_after_removal(step.0, &dropped);
        }
    }
    // the merged curve keeps the tension of the longer surviving piece
    let merged_tension = if cluster.chains[first].length() >= cluster.chains[second].length() {
        topology.tensions[first]
    } else {
        topology.tensions[second]
    };
    let merged_index = new_topology.tensions.len();
    new_topology.tensions.push(merged_tension);
    new_topology.orientations.push(pair_a);
    new_topology.closed.push(true);
    let (mp, mn) = pair_a;
    if mp != new_topology.outer_phase {
        new_topology.cycles.push(crate::cluster::BoundaryCycle {
            phase: mp,
            steps: vec![(merged_index, Direction::Forward)],
        });
    }
    if mn != new_topology.outer_phase {
        new_topology.cycles.push(crate::cluster::BoundaryCycle {
            phase: mn,
            steps: vec![(merged_index, Direction::Reverse)],
        });
    }

    let mut chains: Vec<Chain> = Vec::new();
    for (i, c) in cluster.chains.iter().enumerate() {
        if !dropped.contains(&i) {
            chains.push(c.clone());
        }
    }
    chains.push(merged);
    let mesh = build_cluster(&new_topology, chains)?;
    Ok(SurgeryOutcome {
        topology: new_topology,
        cluster: mesh,
        description: format!(
            "removed curve {removed} of vanished phase {vanished_phase}; curves {first} and {second} concatenated"
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario;

    fn quick_params(n_fine: u32, tau: f64) -> StepParams {
        StepParams { tau, h: 4.0, n_coarse: 4, n_fine, mode: IntegrationMode::True }
    }

    #[test]
    fn two_circle_first_step_moves_radii_with_the_right_signs() {
        // betas (-1, 0, 1), radii (1, 2): dR1/dt ~ -0.7213, dR2/dt ~ +0.3607
        let (topology, cluster) =
            scenario::two_circles([-1.0, 0.0, 1.0], [1.0, 1.0], [1.0, 2.0], 256).unwrap();
        let tau = 1e-3;
        let result = step_linear(&topology, &cluster, &quick_params(64, tau)).unwrap();
        let mean_radius = |mesh: &ClusterMesh, i: usize| -> f64 {
            let c = &mesh.chains[i];
            c.points.iter().map(|p| p.norm()).sum::<f64>() / c.num_vertices() as f64
        };
        let dr1 = (mean_radius(&result.cluster, 0) - mean_radius(&cluster, 0)) / tau;
        let dr2 = (mean_radius(&result.cluster, 1) - mean_radius(&cluster, 1)) / tau;
        assert!((dr1 + 0.7213475).abs() < 0.1, "dR1/dt = {dr1}");
        assert!((dr2 - 0.3606738).abs() < 0.05, "dR2/dt = {dr2}");
    }

    #[test]
    fn displacement_scales_linearly_in_tau() {
        let (topology, cluster) =
            scenario::two_circles([-1.0, 0.0, 1.0], [1.0, 1.0], [1.0, 2.0], 128).unwrap();
        let full = step_linear(&topology, &cluster, &quick_params(64, 2e-3)).unwrap();
        let half = step_linear(&topology, &cluster, &quick_params(64, 1e-3)).unwrap();
        let ratio = full.max_displacement / half.max_displacement;
        assert!((ratio - 2.0).abs() < 0.2, "step-halving ratio {ratio}");
    }

    #[test]
    fn conservative_first_iterate_equals_linear_step() {
        let (topology, cluster) =
            scenario::two_circles([-1.0, 0.0, 1.0], [1.0, 1.0], [1.0, 2.0], 128).unwrap();
        let p = quick_params(64, 1e-3);
        let linear = step_linear(&topology, &cluster, &p).unwrap();
        // an infinite tolerance stops the lagged iteration after one solve
        let one_iter = step_conservative(&topology, &cluster, &p, f64::INFINITY, 50).unwrap();
        assert_eq!(one_iter.fp_iterations, 1);
        for (a, b) in linear.delta_x.iter().zip(&one_iter.delta_x) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn conservative_step_conserves_content_and_satisfies_area_identity() {
        let (topology, cluster) =
            scenario::two_circles([-1.0, 0.0, 1.0], [1.0, 1.0], [1.0, 2.0], 128).unwrap();
        let p = quick_params(64, 4e-3);
        let result = step_conservative(&topology, &cluster, &p, 1e-13, 50).unwrap();
        assert!(result.fp_iterations > 1);
        let areas_old = phase_areas(&cluster, &topology, 4.0).unwrap();
        let areas_new = phase_areas(&result.cluster, &topology, 4.0).unwrap();
        let v_old = total_content(&areas_old, &topology.betas);
        let v_new = total_content(&areas_new, &topology.betas);
        assert!(
            (v_new - v_old).abs() < 1e-10 * (1.0 + v_old.abs()),
            "content drift {:.3e} in one conservative step",
            v_new - v_old
        );
        let residuals = area_identity_residuals(
            &topology,
            &cluster,
            &result.omega_used,
            &result.delta_x,
            &areas_old,
            &areas_new,
        );
        for (phase, r) in residuals.iter().enumerate() {
            assert!(r.abs() < 1e-9 * 64.0, "area identity violated for phase {phase}: {r:.3e}");
        }
        // the lagged iteration contracts after the first correction
        for w in result.fp_updates.windows(2) {
            assert!(w[1] < w[0], "updates not decreasing: {:?}", result.fp_updates);
        }
    }

    #[test]
    fn linear_step_drifts_content_where_conservative_does_not() {
        let (topology, cluster) =
            scenario::two_circles([-1.0, 0.0, 1.0], [1.0, 1.0], [1.0, 2.0], 128).unwrap();
        let p = quick_params(64, 4e-3);
        let linear = step_linear(&topology, &cluster, &p).unwrap();
        let areas_old = phase_areas(&cluster, &topology, 4.0).unwrap();
        let areas_new = phase_areas(&linear.cluster, &topology, 4.0).unwrap();
        let drift = total_content(&areas_new, &topology.betas)
            - total_content(&areas_old, &topology.betas);
        assert!(drift.abs() > 1e-9, "linear drift unexpectedly tiny: {drift:.3e}");
    }

    #[test]
    fn run_truncates_the_final_step() {
        let (topology, cluster) = scenario::single_circle([-0.5, 0.5], 1.0, 1.0, 64).unwrap();
        let config = RunConfig::new(Scheme::Linear, 0.3, 1.0, 4, 32);
        let trajectory = run(&config, &topology, &cluster).unwrap();
        let times: Vec<f64> = trajectory.series.iter().map(|r| r.time).collect();
        assert_eq!(times.len(), 5); // t = 0, .3, .6, .9, 1.0
        assert!((times[4] - 1.0).abs() < 1e-12);
        let steps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
        assert!((steps[0] - 0.3).abs() < 1e-12);
        assert!((steps[3] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn energy_is_monotone_along_runs_of_both_schemes() {
        let (topology, cluster) =
            scenario::two_circles([-1.0, 0.0, 1.0], [1.0, 1.0], [1.0, 2.0], 96).unwrap();
        for scheme in [Scheme::Linear, Scheme::Conservative] {
            let config = RunConfig::new(scheme, 4e-3, 0.02, 4, 64);
            let trajectory = run(&config, &topology, &cluster).unwrap();
            for w in trajectory.series.windows(2) {
                assert!(
                    w[1].energy <= w[0].energy * (1.0 + 1e-8),
                    "{scheme}: energy rose from {} to {}",
                    w[0].energy,
                    w[1].energy
                );
                let tau_m = w[1].time - w[0].time;
                assert!(
                    w[1].energy + tau_m * w[1].grad_w_sq <= w[0].energy * (1.0 + 1e-8),
                    "{scheme}: stability inequality violated"
                );
            }
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let (topology, cluster) =
            scenario::two_circles([-1.0, 0.0, 1.0], [1.0, 1.0], [1.0, 2.0], 64).unwrap();
        let config = RunConfig::new(Scheme::Linear, 4e-3, 0.012, 4, 32);
        let t1 = run(&config, &topology, &cluster).unwrap();
        let t2 = run(&config, &topology, &cluster).unwrap();
        assert_eq!(t1.final_snapshot().cluster, t2.final_snapshot().cluster);
        for (a, b) in t1.series.iter().zip(&t2.series) {
            assert_eq!(a.energy, b.energy);
            assert_eq!(a.content, b.content);
        }
    }

    #[test]
    fn surgery_removes_vanished_inner_circle() {
        let (topology, cluster) =
            scenario::two_circles([-1.0, 0.0, 1.0], [1.0, 1.0], [0.02, 2.0], 96).unwrap();
        let floors = vec![0.01, 0.0, 0.0]; // inner area ~1.2e-3 < 0.01
        let outcome = surgery_small_phase(&topology, &cluster, &floors, 4.0)
            .unwrap()
            .expect("surgery should trigger");
        assert_eq!(outcome.topology.num_curves(), 1);
        assert_eq!(outcome.cluster.num_curves(), 1);
        // the annulus phase inherits the disk area
        let areas = phase_areas(&outcome.cluster, &outcome.topology, 4.0).unwrap();
        assert!(areas[0].abs() < 1e-12);
        assert!(areas[1] > 0.0);
    }

    #[test]
    fn surgery_noop_when_nothing_vanishes() {
        let (topology, cluster) =
            scenario::two_circles([-1.0, 0.0, 1.0], [1.0, 1.0], [1.0, 2.0], 96).unwrap();
        let floors = vec![1e-3; 3];
        assert!(surgery_small_phase(&topology, &cluster, &floors, 4.0).unwrap().is_none());
    }

    #[test]
    fn surgery_merges_double_bubble_when_lobe_vanishes() {
        // declare the left lobe vanished: its shortest bounding curve (the
        // chord) is removed and the two arcs merge into one closed curve
        let (topology, cluster) =
            scenario::standard_double_bubble(3.0, [-1.0, 0.0, 1.0], [1.0; 3], 24, 10).unwrap();
        let areas = phase_areas(&cluster, &topology, 4.0).unwrap();
        let floors = vec![0.0, areas[1] * 1.01, 0.0];
        let outcome = surgery_small_phase(&topology, &cluster, &floors, 4.0)
            .unwrap()
            .expect("surgery should trigger");
        assert_eq!(outcome.topology.num_curves(), 1);
        assert!(outcome.topology.closed[0]);
        assert!(outcome.topology.junctions.is_empty());
        assert_eq!(outcome.cluster.chains[0].num_vertices(), 24 + 24 - 2);
        let new_areas = phase_areas(&outcome.cluster, &outcome.topology, 4.0).unwrap();
        // phases 0 and 1 merged across the removed chord
        assert!((new_areas[0] - (areas[0] + areas[1])).abs() < 1e-9);
        outcome.topology.validate().unwrap();
    }

    #[test]
    fn run_ends_gracefully_when_surgery_empties_the_cluster() {
        // an absurdly high floor removes the only curve after the first
        // step; the run finishes early with zero energy
        let (topology, cluster) = scenario::single_circle([-0.5, 0.5], 1.0, 0.5, 32).unwrap();
        let mut config = RunConfig::new(Scheme::Linear, 1e-3, 0.01, 4, 32);
        config.surgery_threshold = Some(1e3);
        let trajectory = run(&config, &topology, &cluster).unwrap();
        let fin = trajectory.final_snapshot();
        assert_eq!(fin.cluster.num_curves(), 0);
        assert_eq!(fin.energy, 0.0);
        assert!(trajectory.warnings.iter().any(|w| w.contains("last curve")));
        let areas = phase_areas(&fin.cluster, &fin.topology, 4.0).unwrap();
        assert_eq!(areas[1], 64.0);
    }

    #[test]
    fn run_through_inner_circle_extinction() {
        // a small inner circle vanishes quickly; surgery removes it and the
        // run continues as a two-phase problem
        let (topology, cluster) =
            scenario::two_circles([-1.0, 0.0, 1.0], [1.0, 1.0], [0.35, 2.0], 128).unwrap();
        let mut config = RunConfig::new(Scheme::Linear, 2e-3, 0.08, 4, 64);
        config.surgery_threshold = Some(0.05);
        let trajectory = run(&config, &topology, &cluster).unwrap();
        let had_surgery = trajectory.series.iter().any(|r| r.surgery.is_some());
        assert!(had_surgery, "inner circle should have been removed");
        assert_eq!(trajectory.final_snapshot().topology.num_curves(), 1);
        assert!((trajectory.final_snapshot().time - 0.08).abs() < 1e-12);
    }
}
