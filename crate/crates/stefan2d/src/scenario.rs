//! Built-in initial configurations.
//!
//! Each builder returns a validated `(topology, mesh)` pair. Orientation
//! bookkeeping per the perp convention: counterclockwise chains carry
//! inward normals, clockwise chains outward ones.

use crate::cluster::{
    build_cluster, circle_chain, BoundaryCycle, Chain, ChainEnd, ClusterMesh, ClusterTopology,
    Direction, Junction, JunctionEnd,
};
use crate::geometry::Vec2;
use crate::Result;

/// Discretization parameters of convergence level `i`:
/// `N_f = 2^(7+i)`, `N_c = 4^i`, `tau = 4^(3-i) * 1e-3`, and a total of
/// `K_Gamma = 2 N_f` curve vertices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelParams {
    pub level: u32,
    pub n_fine: u32,
    pub n_coarse: u32,
    pub tau: f64,
    pub k_gamma: usize,
}

pub fn level_params(level: u32) -> LevelParams {
    LevelParams {
        level,
        n_fine: 1 << (7 + level),
        n_coarse: 4u32.pow(level),
        tau: 4f64.powi(3 - level as i32) * 1e-3,
        k_gamma: 1 << (8 + level),
    }
}

/// Two concentric circles around the origin: disk (phase 0), annulus
/// (phase 1), exterior (phase 2). The inner normal points into the disk,
/// the outer one into the exterior. Vertices are split equally between the
/// circles.
pub fn two_circles(
    betas: [f64; 3],
    tensions: [f64; 2],
    radii: [f64; 2],
    k_total: usize,
) -> Result<(ClusterTopology, ClusterMesh)> {
    let topology = ClusterTopology {
        num_phases: 3,
        betas: betas.to_vec(),
        tensions: tensions.to_vec(),
        orientations: vec![(0, 1), (2, 1)],
        closed: vec![true, true],
        junctions: vec![],
        cycles: vec![
            BoundaryCycle { phase: 0, steps: vec![(0, Direction::Forward)] },
            BoundaryCycle { phase: 1, steps: vec![(1, Direction::Reverse)] },
            BoundaryCycle { phase: 1, steps: vec![(0, Direction::Reverse)] },
        ],
        outer_phase: 2,
    };
    let k = (k_total / 2).max(3);
    let chains = vec![
        circle_chain(Vec2::ZERO, radii[0], k, true),
        circle_chain(Vec2::ZERO, radii[1], k, false),
    ];
    let mesh = build_cluster(&topology, chains)?;
    Ok((topology, mesh))
}

/// Three concentric circles: inner disk plus exterior form the disconnected
/// phase 0, the annuli are phases 1 and 2.
pub fn three_circles(
    betas: [f64; 3],
    tensions: [f64; 3],
    radii: [f64; 3],
    k_total: usize,
) -> Result<(ClusterTopology, ClusterMesh)> {
    let topology = ClusterTopology {
        num_phases: 3,
        betas: betas.to_vec(),
        tensions: tensions.to_vec(),
        orientations: vec![(0, 1), (2, 1), (2, 0)],
        closed: vec![true, true, true],
        junctions: vec![],
        cycles: vec![
            BoundaryCycle { phase: 1, steps: vec![(1, Direction::Reverse)] },
            BoundaryCycle { phase: 1, steps: vec![(0, Direction::Reverse)] },
            BoundaryCycle { phase: 2, steps: vec![(2, Direction::Forward)] },
            BoundaryCycle { phase: 2, steps: vec![(1, Direction::Forward)] },
        ],
        outer_phase: 0,
    };
    let k = (k_total / 3).max(3);
    let chains = vec![
        circle_chain(Vec2::ZERO, radii[0], k, true),
        circle_chain(Vec2::ZERO, radii[1], k, false),
        circle_chain(Vec2::ZERO, radii[2], k, true),
    ];
    let mesh = build_cluster(&topology, chains)?;
    Ok((topology, mesh))
}

/// Two separate disks (phases 0 and 1) in an exterior phase 2; both disk
/// normals point outward. With betas `(0, -1, 1)` and radii `(1, 0.5)` this
/// is a stationary configuration.
pub fn two_disks(
    betas: [f64; 3],
    tensions: [f64; 2],
    radii: [f64; 2],
    centers: [Vec2; 2],
    k_total: usize,
) -> Result<(ClusterTopology, ClusterMesh)> {
    let topology = ClusterTopology {
        num_phases: 3,
        betas: betas.to_vec(),
        tensions: tensions.to_vec(),
        orientations: vec![(2, 0), (2, 1)],
        closed: vec![true, true],
        junctions: vec![],
        cycles: vec![
            BoundaryCycle { phase: 0, steps: vec![(0, Direction::Reverse)] },
            BoundaryCycle { phase: 1, steps: vec![(1, Direction::Reverse)] },
        ],
        outer_phase: 2,
    };
    let k = (k_total / 2).max(3);
    let chains = vec![
        circle_chain(centers[0], radii[0], k, false),
        circle_chain(centers[1], radii[1], k, false),
    ];
    let mesh = build_cluster(&topology, chains)?;
    Ok((topology, mesh))
}

/// Circular-arc radius of a standard double bubble with the given lobe
/// area: each outer arc spans 240 degrees, the straight chord meets both
/// arcs at 120 degrees.
pub fn double_bubble_arc_radius(lobe_area: f64) -> f64 {
    (lobe_area / (2.0 * std::f64::consts::PI / 3.0 + 3.0_f64.sqrt() / 4.0)).sqrt()
}

fn arc_points(center: Vec2, radius: f64, theta0: f64, theta1: f64, k: usize) -> Vec<Vec2> {
    (0..k)
        .map(|j| {
            let t = theta0 + (theta1 - theta0) * j as f64 / (k - 1) as f64;
            center + Vec2::new(radius * t.cos(), radius * t.sin())
        })
        .collect()
}

/// A standard symmetric double bubble centered at `center`: right bubble
/// (phase 0), left bubble (phase 1), exterior (phase 2). Curve 0 is the
/// right arc (normal outward), curve 1 the left arc (normal into the left
/// bubble), curve 2 the separating chord (normal into the right bubble).
/// Junction angles are exactly 120 degrees for equal tensions.
pub fn double_bubble_at(
    center: Vec2,
    lobe_area: f64,
    betas: [f64; 3],
    tensions: [f64; 3],
    k_arc: usize,
    k_chord: usize,
) -> Result<(ClusterTopology, ClusterMesh)> {
    let r = double_bubble_arc_radius(lobe_area);
    let third = 2.0 * std::f64::consts::PI / 3.0;
    let topology = ClusterTopology {
        num_phases: 3,
        betas: betas.to_vec(),
        tensions: tensions.to_vec(),
        orientations: vec![(2, 0), (1, 2), (0, 1)],
        closed: vec![false, false, false],
        junctions: vec![
            Junction {
                ends: [
                    JunctionEnd { curve: 0, end: ChainEnd::Start },
                    JunctionEnd { curve: 1, end: ChainEnd::Start },
                    JunctionEnd { curve: 2, end: ChainEnd::Start },
                ],
            },
            Junction {
                ends: [
                    JunctionEnd { curve: 0, end: ChainEnd::End },
                    JunctionEnd { curve: 1, end: ChainEnd::End },
                    JunctionEnd { curve: 2, end: ChainEnd::End },
                ],
            },
        ],
        cycles: vec![
            BoundaryCycle {
                phase: 0,
                steps: vec![(2, Direction::Forward), (0, Direction::Reverse)],
            },
            BoundaryCycle {
                phase: 1,
                steps: vec![(1, Direction::Forward), (2, Direction::Reverse)],
            },
        ],
        outer_phase: 2,
    };
    // right arc: clockwise from +120 to -120 degrees around (r/2, 0)
    let right = Chain {
        points: arc_points(center + Vec2::new(r / 2.0, 0.0), r, third, -third, k_arc),
        closed: false,
    };
    // left arc: counterclockwise from +60 to +300 degrees around (-r/2, 0)
    let left = Chain {
        points: arc_points(center + Vec2::new(-r / 2.0, 0.0), r, third / 2.0, third / 2.0 + 2.0 * third, k_arc),
        closed: false,
    };
    let half_sep = r * 3.0_f64.sqrt() / 2.0;
    let chord = Chain {
        points: (0..k_chord)
            .map(|j| {
                let t = j as f64 / (k_chord - 1) as f64;
                center + Vec2::new(0.0, half_sep - 2.0 * half_sep * t)
            })
            .collect(),
        closed: false,
    };
    let mesh = build_cluster(&topology, vec![right, left, chord])?;
    Ok((topology, mesh))
}

pub fn standard_double_bubble(
    lobe_area: f64,
    betas: [f64; 3],
    tensions: [f64; 3],
    k_arc: usize,
    k_chord: usize,
) -> Result<(ClusterTopology, ClusterMesh)> {
    double_bubble_at(Vec2::ZERO, lobe_area, betas, tensions, k_arc, k_chord)
}

/// A standard double bubble plus a separate disk enclosing the same phase
/// as the right bubble (phase 0). The disk boundary separates the same
/// phase pair as the right arc, so its orientation is normalized to match
/// (outward normal, clockwise chain).
#[allow(clippy::too_many_arguments)]
pub fn double_bubble_with_disk(
    bubble_center: Vec2,
    lobe_area: f64,
    disk_center: Vec2,
    disk_radius: f64,
    betas: [f64; 3],
    tensions: [f64; 4],
    k_arc: usize,
    k_chord: usize,
    k_disk: usize,
) -> Result<(ClusterTopology, ClusterMesh)> {
    let (bubble_topology, bubble_mesh) = double_bubble_at(
        bubble_center,
        lobe_area,
        betas,
        [tensions[0], tensions[1], tensions[2]],
        k_arc,
        k_chord,
    )?;
    let mut cycles = bubble_topology.cycles.clone();
    cycles.push(BoundaryCycle { phase: 0, steps: vec![(3, Direction::Reverse)] });
    let topology = ClusterTopology {
        num_phases: 3,
        betas: betas.to_vec(),
        tensions: tensions.to_vec(),
        orientations: vec![(2, 0), (1, 2), (0, 1), (2, 0)],
        closed: vec![false, false, false, true],
        junctions: bubble_topology.junctions.clone(),
        cycles,
        outer_phase: 2,
    };
    let mut chains = bubble_mesh.chains.clone();
    chains.push(circle_chain(disk_center, disk_radius, k_disk, false));
    let mesh = build_cluster(&topology, chains)?;
    Ok((topology, mesh))
}

/// A single circle separating an inner phase 0 from the exterior phase 1,
/// the two-phase special case. Counterclockwise, so the normal points
/// inward.
pub fn single_circle(
    betas: [f64; 2],
    tension: f64,
    radius: f64,
    k: usize,
) -> Result<(ClusterTopology, ClusterMesh)> {
    let topology = ClusterTopology {
        num_phases: 2,
        betas: betas.to_vec(),
        tensions: vec![tension],
        orientations: vec![(0, 1)],
        closed: vec![true],
        junctions: vec![],
        cycles: vec![BoundaryCycle { phase: 0, steps: vec![(0, Direction::Forward)] }],
        outer_phase: 1,
    };
    let mesh = build_cluster(&topology, vec![circle_chain(Vec2::ZERO, radius, k, true)])?;
    Ok((topology, mesh))
}
