//! The invariant suite behind `stefan2d verify`: fast, named checks of the
//! identities the discretization is built on. Fault-injection hooks let
//! tests confirm that each check actually bites.

use crate::bulk::{assemble_stiffness, build_adaptive_mesh};
use crate::cluster::{
    build_cluster, circle_chain, intermediate_vertex_normals, junction_project,
    lumped_vertex_masses, phase_areas, segment_normal, total_content, vertex_normals,
    BoundaryCycle, ClusterTopology, Direction,
};
use crate::coupling::{assemble_coupling, IntegrationMode};
use crate::evolution::{area_identity_residuals, step_conservative, StepParams};
use crate::exact::{radii_ode_two, radius_rootfind_two, TwoCircleParams};
use crate::geometry::Vec2;
use crate::scenario;
use crate::system::{
    assemble_surface_blocks, build_system, condensed_dense, junction_condensation, solve_system,
    solve_system_schur, surface_dirichlet_pairing,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Deliberate defects for mutation testing of the suite itself.
#[derive(Debug, Clone, Copy, Default)]
pub struct FaultInjection {
    /// Perturb one junction value after projecting; the projection
    /// idempotency check must fail.
    pub perturb_projection: bool,
    /// Flip the orientation bookkeeping of curve 0 in the area identity;
    /// the conservation identity check must fail.
    pub flip_jump_sign: bool,
}

pub type CheckResult = std::result::Result<(), String>;

fn fail(msg: impl Into<String>) -> CheckResult {
    Err(msg.into())
}

fn check_trapezoid_exactness() -> CheckResult {
    let (_, mesh) = scenario::single_circle([-0.5, 0.5], 1.0, 1.5, 48).map_err(|e| e.to_string())?;
    let chain = &mesh.chains[0];
    let g: Vec<f64> = chain.points.iter().map(|p| 1.3 * p.x - 0.4 * p.y + 2.0).collect();
    let ones = vec![1.0; chain.num_vertices()];
    let lumped = crate::cluster::lumped_inner_product(&mesh, 0, &ones, &g);
    let mut exact = 0.0;
    for j in 0..chain.num_segments() {
        let (a, b) = chain.segment_indices(j);
        exact += chain.segment_length(j) * 0.5 * (g[a] + g[b]);
    }
    if (lumped - exact).abs() > 1e-12 * exact.abs().max(1.0) {
        return fail(format!("lumped {lumped} vs exact {exact}"));
    }
    Ok(())
}

fn check_projection_duality() -> CheckResult {
    let (_, mesh) =
        scenario::standard_double_bubble(3.0, [-1.0, 0.0, 1.0], [1.0; 3], 16, 8)
            .map_err(|e| e.to_string())?;
    let omega = vertex_normals(&mesh);
    let mut rng = StdRng::seed_from_u64(3);
    for i in 0..mesh.num_curves() {
        let chain = &mesh.chains[i];
        let masses = lumped_vertex_masses(&mesh, i);
        let xi: Vec<Vec2> = (0..chain.num_vertices())
            .map(|_| Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let lhs: f64 = (0..chain.num_vertices())
            .map(|k| masses[k] * omega.per_curve[i][k].dot(xi[k]))
            .sum();
        let mut rhs = 0.0;
        for j in 0..chain.num_segments() {
            let (a, b) = chain.segment_indices(j);
            let nu = segment_normal(&mesh, i, j).map_err(|e| e.to_string())?;
            rhs += chain.segment_length(j) * 0.5 * (nu.dot(xi[a]) + nu.dot(xi[b]));
        }
        if (lhs - rhs).abs() > 1e-12 * rhs.abs().max(1.0) {
            return fail(format!("curve {i}: lumped {lhs} vs true {rhs}"));
        }
    }
    Ok(())
}

fn check_projection_idempotent(faults: &FaultInjection) -> CheckResult {
    let (topology, mesh) =
        scenario::standard_double_bubble(3.0, [-1.0, 0.0, 1.0], [1.0; 3], 16, 8)
            .map_err(|e| e.to_string())?;
    let mut rng = StdRng::seed_from_u64(17);
    let f: Vec<Vec2> = (0..mesh.num_vertices())
        .map(|_| Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let mut pf = junction_project(&topology, &mesh, &f);
    if faults.perturb_projection {
        let j = &topology.junctions[0].ends[0];
        let g = mesh.global_index(j.curve, mesh.chains[j.curve].end_vertex_index(j.end));
        pf[g] += Vec2::new(1e-3, 0.0);
    }
    let ppf = junction_project(&topology, &mesh, &pf);
    for (a, b) in pf.iter().zip(&ppf) {
        if (*a - *b).norm() > 1e-13 {
            return fail(format!("projection not idempotent: {a:?} vs {b:?}"));
        }
    }
    // self-adjointness on random pairs
    let g: Vec<Vec2> = (0..mesh.num_vertices())
        .map(|_| Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let pg = junction_project(&topology, &mesh, &g);
    let dot = |u: &[Vec2], v: &[Vec2]| -> f64 { u.iter().zip(v).map(|(a, b)| a.dot(*b)).sum() };
    let pf_clean = junction_project(&topology, &mesh, &f);
    if (dot(&pf_clean, &g) - dot(&f, &pg)).abs() > 1e-12 {
        return fail("projection not self-adjoint");
    }
    Ok(())
}

fn check_phase_areas_sum() -> CheckResult {
    let (topology, mesh) = scenario::double_bubble_with_disk(
        Vec2::new(-1.2, 0.0),
        3.139,
        Vec2::new(2.2, 0.0),
        0.625,
        [0.25, 0.0, -0.25],
        [1.0; 4],
        32,
        14,
        24,
    )
    .map_err(|e| e.to_string())?;
    let areas = phase_areas(&mesh, &topology, 4.0).map_err(|e| e.to_string())?;
    let total: f64 = areas.iter().sum();
    if (total - 64.0).abs() > 1e-9 * 64.0 {
        return fail(format!("areas sum to {total}, box has 64"));
    }
    if areas.iter().any(|a| *a < 0.0) {
        return fail(format!("negative phase area in {areas:?}"));
    }
    Ok(())
}

fn check_intermediate_normals_identity() -> CheckResult {
    let (_, mesh) =
        scenario::two_circles([-1.0, 0.0, 1.0], [1.0, 1.0], [1.0, 2.0], 64).map_err(|e| e.to_string())?;
    let standard = vertex_normals(&mesh);
    let inter = intermediate_vertex_normals(&mesh, &mesh.positions()).map_err(|e| e.to_string())?;
    for (a, b) in standard.per_curve.iter().zip(&inter.per_curve) {
        for (u, v) in a.iter().zip(b) {
            if u != v {
                return fail(format!("identity displacement changed a normal: {u:?} vs {v:?}"));
            }
        }
    }
    Ok(())
}

fn check_bulk_mesh_invariants() -> CheckResult {
    let (_, mesh) = scenario::single_circle([-0.5, 0.5], 1.0, 1.0, 96).map_err(|e| e.to_string())?;
    let bulk = build_adaptive_mesh(4.0, 2, 64, &mesh).map_err(|e| e.to_string())?;
    bulk.validate_conformity().map_err(|e| e.to_string())?;
    let a = assemble_stiffness(&bulk);
    for row in 0..a.n {
        let mut sum = 0.0;
        let mut maxabs = 0.0_f64;
        for (_, v) in a.row_entries(row) {
            sum += v;
            maxabs = maxabs.max(v.abs());
        }
        if sum.abs() > 1e-12 * maxabs.max(1.0) {
            return fail(format!("stiffness row {row} sums to {sum:.3e}"));
        }
    }
    let mut rng = StdRng::seed_from_u64(5);
    let mut x: Vec<f64> = (0..a.n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mean = x.iter().sum::<f64>() / a.n as f64;
    x.iter_mut().for_each(|v| *v -= mean);
    if a.quadratic_form(&x) <= 0.0 {
        return fail("stiffness not positive on a nonconstant vector");
    }
    Ok(())
}

fn check_coupling_partition_of_unity() -> CheckResult {
    let (_, mesh) =
        scenario::two_circles([-1.0, 0.0, 1.0], [1.0, 1.0], [1.0, 2.0], 96).map_err(|e| e.to_string())?;
    let bulk = build_adaptive_mesh(4.0, 2, 64, &mesh).map_err(|e| e.to_string())?;
    let omega = vertex_normals(&mesh);
    for mode in [IntegrationMode::True, IntegrationMode::Lumped] {
        let coupling =
            assemble_coupling(&bulk, &mesh, &omega, mode).map_err(|e| e.to_string())?;
        let mut g = 0;
        for i in 0..mesh.num_curves() {
            let masses = lumped_vertex_masses(&mesh, i);
            for &m in &masses {
                let sum = coupling.row_sum(g);
                if (sum - m).abs() > 1e-10 * m.max(1.0) {
                    return fail(format!("{mode}: row {g} sums to {sum}, mass {m}"));
                }
                g += 1;
            }
        }
    }
    Ok(())
}

fn check_uniqueness_small_cluster() -> CheckResult {
    let (topology, mesh) =
        scenario::standard_double_bubble(2.0, [-1.0, 0.0, 1.0], [1.0; 3], 8, 5)
            .map_err(|e| e.to_string())?;
    let bulk = build_adaptive_mesh(4.0, 4, 8, &mesh).map_err(|e| e.to_string())?;
    let a = assemble_stiffness(&bulk);
    let omega = vertex_normals(&mesh);
    let coupling = assemble_coupling(&bulk, &mesh, &omega, IntegrationMode::True)
        .map_err(|e| e.to_string())?;
    let surface = assemble_surface_blocks(&mesh, &topology);
    let jm = junction_condensation(&topology, &mesh);
    let system = build_system(0.01, &a, &coupling, &surface, &topology, &mesh, &jm)
        .map_err(|e| e.to_string())?;
    let dense = condensed_dense(&system);
    let svd = dense.svd().map_err(|e| format!("svd failed: {e:?}"))?;
    let s = svd.S();
    let (smax, smin) = (s[0], s[system.dim() - 1]);
    if smin <= 1e-10 * smax {
        return fail(format!("condensed system near-singular: {:.3e}", smin / smax));
    }
    Ok(())
}

fn check_solver_paths_agree() -> CheckResult {
    let topology = ClusterTopology {
        num_phases: 2,
        betas: vec![-0.5, 0.5],
        tensions: vec![1.0],
        orientations: vec![(1, 0)],
        closed: vec![true],
        junctions: vec![],
        cycles: vec![BoundaryCycle { phase: 0, steps: vec![(0, Direction::Reverse)] }],
        outer_phase: 1,
    };
    let mut chain = circle_chain(Vec2::ZERO, 1.3, 24, false);
    for (k, p) in chain.points.iter_mut().enumerate() {
        *p = *p * (1.0 + 0.1 * (4.0 * std::f64::consts::PI * k as f64 / 24.0).sin());
    }
    let mesh = build_cluster(&topology, vec![chain]).map_err(|e| e.to_string())?;
    let bulk = build_adaptive_mesh(4.0, 4, 16, &mesh).map_err(|e| e.to_string())?;
    let a = assemble_stiffness(&bulk);
    let omega = vertex_normals(&mesh);
    let coupling = assemble_coupling(&bulk, &mesh, &omega, IntegrationMode::True)
        .map_err(|e| e.to_string())?;
    let surface = assemble_surface_blocks(&mesh, &topology);
    let jm = junction_condensation(&topology, &mesh);
    let system = build_system(0.01, &a, &coupling, &surface, &topology, &mesh, &jm)
        .map_err(|e| e.to_string())?;
    let direct = solve_system(&system).map_err(|e| e.to_string())?;
    let schur = solve_system_schur(&system).map_err(|e| e.to_string())?;
    let scale = direct.delta_x.iter().map(|d| d.norm()).fold(0.0_f64, f64::max).max(1e-30);
    for (x, y) in direct.delta_x.iter().zip(&schur.delta_x) {
        if (*x - *y).norm() > 1e-8 * scale {
            return fail(format!("solver paths disagree: {x:?} vs {y:?}"));
        }
    }
    Ok(())
}

fn check_stability_identity() -> CheckResult {
    let (topology, mesh) =
        scenario::two_circles([-1.0, 0.0, 1.0], [1.0, 1.0], [1.0, 2.0], 64).map_err(|e| e.to_string())?;
    let bulk = build_adaptive_mesh(4.0, 4, 32, &mesh).map_err(|e| e.to_string())?;
    let a = assemble_stiffness(&bulk);
    let omega = vertex_normals(&mesh);
    let coupling = assemble_coupling(&bulk, &mesh, &omega, IntegrationMode::True)
        .map_err(|e| e.to_string())?;
    let surface = assemble_surface_blocks(&mesh, &topology);
    let jm = junction_condensation(&topology, &mesh);
    let system = build_system(0.004, &a, &coupling, &surface, &topology, &mesh, &jm)
        .map_err(|e| e.to_string())?;
    let sol = solve_system(&system).map_err(|e| e.to_string())?;
    let grad_sq = a.quadratic_form(&sol.w);
    let positions: Vec<Vec<Vec2>> = mesh
        .chains
        .iter()
        .enumerate()
        .map(|(i, c)| {
            (0..c.num_vertices())
                .map(|k| c.points[k] + sol.delta_x[mesh.global_index(i, k)])
                .collect()
        })
        .collect();
    let pairing = surface_dirichlet_pairing(&mesh, &topology, &positions);
    let identity = 0.004 * grad_sq + pairing;
    if identity.abs() > 1e-8 * (0.004 * grad_sq).abs().max(1e-12) {
        return fail(format!("identity residual {identity:.3e}"));
    }
    Ok(())
}

fn check_conservation_identity(faults: &FaultInjection) -> CheckResult {
    let (mut topology, mesh) =
        scenario::two_circles([-1.0, 0.0, 1.0], [1.0, 1.0], [1.0, 2.0], 96).map_err(|e| e.to_string())?;
    let p = StepParams {
        tau: 4e-3,
        h: 4.0,
        n_coarse: 4,
        n_fine: 64,
        mode: IntegrationMode::True,
    };
    let result = step_conservative(&topology, &mesh, &p, 1e-12, 50).map_err(|e| e.to_string())?;
    let areas_old = phase_areas(&mesh, &topology, 4.0).map_err(|e| e.to_string())?;
    let areas_new = phase_areas(&result.cluster, &topology, 4.0).map_err(|e| e.to_string())?;
    if faults.flip_jump_sign {
        // corrupt the orientation bookkeeping of curve 0
        let (p0, n0) = topology.orientations[0];
        topology.orientations[0] = (n0, p0);
    }
    let residuals = area_identity_residuals(
        &topology,
        &mesh,
        &result.omega_used,
        &result.delta_x,
        &areas_old,
        &areas_new,
    );
    for (phase, r) in residuals.iter().enumerate() {
        if r.abs() > 1e-9 * 64.0 {
            return fail(format!("area identity of phase {phase} off by {r:.3e}"));
        }
    }
    let drift = total_content(&areas_new, &topology.betas)
        - total_content(&areas_old, &topology.betas);
    if drift.abs() > 1e-10 {
        return fail(format!("content drifted by {drift:.3e} in one conservative step"));
    }
    Ok(())
}

fn check_oracle_cross_validation() -> CheckResult {
    let params =
        TwoCircleParams::from_betas([-1.0, 0.0, 1.0], 2.0, 3.0).map_err(|e| e.to_string())?;
    let traj = radii_ode_two(&params, 0.5, 1e-5);
    for &t in &[0.1, 0.25, 0.5] {
        let rk4 = traj.sample(t)[1];
        let root = radius_rootfind_two(&params, t).map_err(|e| e.to_string())?;
        if (rk4 - root).abs() > 1e-6 {
            return fail(format!("t = {t}: rk4 {rk4} vs rootfind {root}"));
        }
    }
    let d2 = params.conserved(2.0, 3.0);
    for row in &traj.radii {
        if (params.conserved(row[0], row[1]) - d2).abs() > 1e-8 * d2.abs().max(1.0) {
            return fail("conserved quantity drifted along the ODE trajectory".to_string());
        }
    }
    Ok(())
}

fn check_scenario_determinism() -> CheckResult {
    let spec = crate::config::ScenarioSpec::new(crate::config::ScenarioName::DoubleBubble);
    let (t1, m1) = spec.build(128).map_err(|e| e.to_string())?;
    let (t2, m2) = spec.build(128).map_err(|e| e.to_string())?;
    if t1 != t2 || m1 != m2 {
        return fail("scenario construction not deterministic");
    }
    Ok(())
}

/// Runs the whole suite, returning one named result per check.
pub fn run_all(faults: &FaultInjection) -> Vec<(&'static str, CheckResult)> {
    vec![
        ("trapezoid exactness", check_trapezoid_exactness()),
        ("lumped projection duality", check_projection_duality()),
        ("projection idempotent", check_projection_idempotent(faults)),
        ("phase areas sum to box", check_phase_areas_sum()),
        ("intermediate normals identity", check_intermediate_normals_identity()),
        ("bulk mesh conformity and stiffness", check_bulk_mesh_invariants()),
        ("coupling partition of unity", check_coupling_partition_of_unity()),
        ("uniqueness on a junction cluster", check_uniqueness_small_cluster()),
        ("solver path equivalence", check_solver_paths_agree()),
        ("stability identity", check_stability_identity()),
        ("conservation identity", check_conservation_identity(faults)),
        ("oracle cross-validation", check_oracle_cross_validation()),
        ("scenario determinism", check_scenario_determinism()),
    ]
}
