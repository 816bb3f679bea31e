//! Assembly and solution of the coupled block system of one time step.
//!
//! Unknowns, in order: the bulk potential `W` (one value per bulk vertex),
//! the tension-weighted curvature `kappa` (one value per surface vertex,
//! independent copies at junction vertices), and the vertex displacement
//! `deltaX` (two values per junction-condensed surface vertex). The rows
//! are the motion law tested with bulk hats, the Gibbs-Thomson law tested
//! with surface hats, and the curvature relation tested with the
//! junction-constrained vector hats:
//!
//! ```text
//! tau A W              + N^T dX = 0
//! B W       + C kappa           = 0
//!             D kappa  + E dX   = -E X_old      (junction-condensed)
//! ```
//!
//! The junction constraint (equal displacement of the three coincident
//! vertices) is imposed by master-slave condensation, equivalent to the
//! orthogonal-projection form but keeping the system square and
//! nonsingular. The default solver is a sparse LU factorization of the
//! condensed system; a dense Schur-complement route (eliminate `kappa`,
//! then `W` with its constant mode deflated) is kept as an independent
//! path for cross-checking at small sizes.

use crate::bulk::StiffnessMatrix;
use crate::cluster::{ClusterMesh, ClusterTopology};
use crate::coupling::CouplingMatrices;
use crate::geometry::Vec2;
use crate::{Error, Result};

use faer::linalg::solvers::Solve;
use faer::prelude::Reborrow;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

/// Lumped surface mass (the diagonal of `C`) and the tension-scaled surface
/// stiffness (`E`) in global surface numbering.
#[derive(Debug, Clone)]
pub struct SurfaceBlocks {
    pub mass: Vec<f64>,
    /// Scalar stiffness triplets; applied to both displacement components.
    pub stiffness: Vec<(usize, usize, f64)>,
}

/// Assembles the per-curve lumped mass and the sigma-weighted 1D stiffness
/// (segment contributions `sigma/len [[1,-1],[-1,1]]`).
pub fn assemble_surface_blocks(cluster: &ClusterMesh, topology: &ClusterTopology) -> SurfaceBlocks {
    let mut mass = vec![0.0; cluster.num_vertices()];
    let mut stiffness = Vec::new();
    for (i, chain) in cluster.chains.iter().enumerate() {
        let sigma = topology.tensions[i];
        for j in 0..chain.num_segments() {
            let (a, b) = chain.segment_indices(j);
            let len = chain.segment_length(j);
            let (ga, gb) = (cluster.global_index(i, a), cluster.global_index(i, b));
            mass[ga] += 0.5 * len;
            mass[gb] += 0.5 * len;
            let w = sigma / len;
            stiffness.push((ga, ga, w));
            stiffness.push((gb, gb, w));
            stiffness.push((ga, gb, -w));
            stiffness.push((gb, ga, -w));
        }
    }
    SurfaceBlocks { mass, stiffness }
}

/// Master-slave map tying the three coincident vertices of each junction to
/// one displacement unknown.
#[derive(Debug, Clone)]
pub struct JunctionMap {
    pub master_of: Vec<usize>,
    pub num_masters: usize,
}

pub fn junction_condensation(topology: &ClusterTopology, cluster: &ClusterMesh) -> JunctionMap {
    let n = cluster.num_vertices();
    let mut group = (0..n).collect::<Vec<usize>>();
    for junction in &topology.junctions {
        let idx: Vec<usize> = junction
            .ends
            .iter()
            .map(|e| cluster.global_index(e.curve, cluster.chains[e.curve].end_vertex_index(e.end)))
            .collect();
        let root = *idx.iter().min().unwrap();
        for &g in &idx {
            group[g] = root;
        }
    }
    let mut master_of = vec![usize::MAX; n];
    let mut num_masters = 0;
    for g in 0..n {
        let root = group[g];
        if master_of[root] == usize::MAX {
            master_of[root] = num_masters;
            num_masters += 1;
        }
        master_of[g] = master_of[root];
    }
    JunctionMap { master_of, num_masters }
}

/// The assembled condensed system of one solve.
#[derive(Debug, Clone)]
pub struct BlockSystem {
    pub tau: f64,
    pub n_bulk: usize,
    pub n_surface: usize,
    pub num_masters: usize,
    pub master_of: Vec<usize>,
    /// Bulk stiffness triplets, unscaled by `tau`.
    a_triplets: Vec<(usize, usize, f64)>,
    /// Jump-scaled coupling rows over bulk columns.
    b_rows: Vec<Vec<(usize, f64)>>,
    /// Jump-scaled, normal-weighted coupling rows.
    n_rows: Vec<Vec<(usize, Vec2)>>,
    mass: Vec<f64>,
    omega: Vec<Vec2>,
    e_triplets: Vec<(usize, usize, f64)>,
    rhs: Vec<f64>,
    pub warnings: Vec<String>,
}

impl BlockSystem {
    pub fn dim(&self) -> usize {
        self.n_bulk + self.n_surface + 2 * self.num_masters
    }

    fn kappa_offset(&self) -> usize {
        self.n_bulk
    }

    fn x_offset(&self) -> usize {
        self.n_bulk + self.n_surface
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    #[cfg(test)]
    pub(crate) fn zero_rhs(&mut self) {
        self.rhs.iter_mut().for_each(|v| *v = 0.0);
    }

    /// All matrix triplets of the condensed system in deterministic order.
    pub fn assemble_triplets(&self) -> Vec<(usize, usize, f64)> {
        let koff = self.kappa_offset();
        let xoff = self.x_offset();
        let mut t: Vec<(usize, usize, f64)> = Vec::with_capacity(
            self.a_triplets.len()
                + 2 * self.n_rows.iter().map(Vec::len).sum::<usize>()
                + self.b_rows.iter().map(Vec::len).sum::<usize>()
                + 3 * self.n_surface
                + 2 * self.e_triplets.len(),
        );
        for &(r, c, v) in &self.a_triplets {
            t.push((r, c, self.tau * v));
        }
        for (k, row) in self.n_rows.iter().enumerate() {
            let m = self.master_of[k];
            for &(j, v) in row {
                t.push((j, xoff + 2 * m, v.x));
                t.push((j, xoff + 2 * m + 1, v.y));
            }
        }
        for (k, row) in self.b_rows.iter().enumerate() {
            for &(j, v) in row {
                t.push((koff + k, j, v));
            }
            t.push((koff + k, koff + k, self.mass[k]));
        }
        for (k, (&mass, &w)) in self.mass.iter().zip(&self.omega).enumerate() {
            let m = self.master_of[k];
            t.push((xoff + 2 * m, koff + k, mass * w.x));
            t.push((xoff + 2 * m + 1, koff + k, mass * w.y));
        }
        for &(r, c, v) in &self.e_triplets {
            let (mr, mc) = (self.master_of[r], self.master_of[c]);
            t.push((xoff + 2 * mr, xoff + 2 * mc, v));
            t.push((xoff + 2 * mr + 1, xoff + 2 * mc + 1, v));
        }
        t
    }

    /// Matrix-vector product of the condensed system, for residual checks.
    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        for (r, c, v) in self.assemble_triplets() {
            y[r] += v * z[c];
        }
        y
    }
}

/// Assembles the condensed block system for one solve.
///
/// `coupling` supplies both the scalar rows and the normal field (the
/// conservative scheme passes lagged intermediate normals through it);
/// the previous positions `X_old` are read from the cluster.
pub fn build_system(
    tau: f64,
    bulk_stiffness: &StiffnessMatrix,
    coupling: &CouplingMatrices,
    surface: &SurfaceBlocks,
    topology: &ClusterTopology,
    cluster: &ClusterMesh,
    junctions: &JunctionMap,
) -> Result<BlockSystem> {
    let n_surface = cluster.num_vertices();
    if coupling.b_rows.len() != n_surface
        || surface.mass.len() != n_surface
        || junctions.master_of.len() != n_surface
    {
        return Err(Error::DimensionMismatch(format!(
            "surface blocks disagree on vertex count (coupling {}, mass {}, junction map {}, cluster {})",
            coupling.b_rows.len(),
            surface.mass.len(),
            junctions.master_of.len(),
            n_surface
        )));
    }
    if !(tau > 0.0) {
        return Err(Error::DimensionMismatch(format!("time step must be positive, got {tau}")));
    }
    let n_bulk = bulk_stiffness.n;

    let mut warnings = Vec::new();
    if let Some(curve) = coupling.omega.has_degenerate_curve() {
        warnings.push(format!(
            "all vertex normals vanish on curve {curve}; the discrete system may be singular"
        ));
    }

    let mut jump = vec![0.0; n_surface];
    let mut omega = vec![Vec2::ZERO; n_surface];
    let mut positions = vec![Vec2::ZERO; n_surface];
    for i in 0..cluster.num_curves() {
        let j = topology.jump(i);
        for k in 0..cluster.chains[i].num_vertices() {
            let g = cluster.global_index(i, k);
            jump[g] = j;
            omega[g] = coupling.omega.at(i, k);
            positions[g] = cluster.chains[i].points[k];
        }
    }

    let b_rows: Vec<Vec<(usize, f64)>> = coupling
        .b_rows
        .iter()
        .enumerate()
        .map(|(k, row)| row.iter().map(|&(j, v)| (j, jump[k] * v)).collect())
        .collect();
    let n_rows: Vec<Vec<(usize, Vec2)>> = coupling
        .n_rows
        .iter()
        .enumerate()
        .map(|(k, row)| row.iter().map(|&(j, v)| (j, v * jump[k])).collect())
        .collect();

    // right-hand side: only the curvature rows are loaded, with -E X_old
    let xoff = n_bulk + n_surface;
    let mut rhs = vec![0.0; n_bulk + n_surface + 2 * junctions.num_masters];
    for &(r, c, v) in &surface.stiffness {
        let m = junctions.master_of[r];
        rhs[xoff + 2 * m] -= v * positions[c].x;
        rhs[xoff + 2 * m + 1] -= v * positions[c].y;
    }

    let a_triplets: Vec<(usize, usize, f64)> = (0..n_bulk)
        .flat_map(|r| bulk_stiffness.row_entries(r).map(move |(c, v)| (r, c, v)))
        .collect();

    Ok(BlockSystem {
        tau,
        n_bulk,
        n_surface,
        num_masters: junctions.num_masters,
        master_of: junctions.master_of.clone(),
        a_triplets,
        b_rows,
        n_rows,
        mass: surface.mass.clone(),
        omega,
        e_triplets: surface.stiffness.clone(),
        rhs,
        warnings,
    })
}

/// Solution of one step system.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub w: Vec<f64>,
    pub kappa: Vec<f64>,
    /// Per surface vertex; junction vertices carry their master's value.
    pub delta_x: Vec<Vec2>,
    /// Max-norm residual of the condensed system.
    pub residual: f64,
}

fn split_solution(system: &BlockSystem, z: &[f64]) -> SolveResult {
    let koff = system.kappa_offset();
    let xoff = system.x_offset();
    let w = z[..system.n_bulk].to_vec();
    let kappa = z[koff..koff + system.n_surface].to_vec();
    let delta_x = (0..system.n_surface)
        .map(|k| {
            let m = system.master_of[k];
            Vec2::new(z[xoff + 2 * m], z[xoff + 2 * m + 1])
        })
        .collect();
    SolveResult { w, kappa, delta_x, residual: 0.0 }
}

fn residual_inf(system: &BlockSystem, z: &[f64]) -> f64 {
    system
        .apply(z)
        .iter()
        .zip(system.rhs())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

const RESIDUAL_TOL: f64 = 1e-9;

/// Solves the condensed system with a sparse LU factorization.
pub fn solve_system(system: &BlockSystem) -> Result<SolveResult> {
    let n = system.dim();
    let triplets: Vec<Triplet<usize, usize, f64>> = system
        .assemble_triplets()
        .into_iter()
        .map(|(r, c, v)| Triplet::new(r, c, v))
        .collect();
    let mat: SparseColMat<usize, f64> = SparseColMat::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| Error::SolveFailure(format!("sparse assembly failed: {e:?}")))?;
    let symbolic = SymbolicLu::try_new(mat.symbolic())
        .map_err(|e| Error::SolveFailure(format!("symbolic factorization failed: {e:?}")))?;
    let lu = Lu::try_new_with_symbolic(symbolic, mat.rb())
        .map_err(|e| Error::SolveFailure(format!("numeric factorization failed: {e:?}")))?;
    let b = Mat::from_fn(n, 1, |i, _| system.rhs[i]);
    let x = lu.solve(&b);
    let z: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
    let rhs_norm = system.rhs.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let residual = residual_inf(system, &z);
    if !residual.is_finite() || residual > RESIDUAL_TOL * (rhs_norm + 1.0) {
        return Err(Error::SolveFailure(format!(
            "residual {residual:.3e} exceeds tolerance {:.3e}",
            RESIDUAL_TOL * (rhs_norm + 1.0)
        )));
    }
    let mut out = split_solution(system, &z);
    out.residual = residual;
    Ok(out)
}

/// Dense matrix of the condensed system, for null-space regressions.
pub fn condensed_dense(system: &BlockSystem) -> Mat<f64> {
    let n = system.dim();
    let mut m = Mat::<f64>::zeros(n, n);
    for (r, c, v) in system.assemble_triplets() {
        m[(r, c)] += v;
    }
    m
}

/// Solves by Schur complement: `kappa` is eliminated through the diagonal
/// mass, `W` through the bulk stiffness with its constant mode deflated by
/// a bordered factorization, leaving a dense system in the displacement
/// unknowns plus the potential's constant. Dense; intended for small
/// systems and as an independent cross-check of [`solve_system`].
pub fn solve_system_schur(system: &BlockSystem) -> Result<SolveResult> {
    let nb = system.n_bulk;
    let nm2 = 2 * system.num_masters;
    let xoff = system.x_offset();

    // coupling block of the motion law: tau A W + P Y = 0
    let mut p = Mat::<f64>::zeros(nb, nm2);
    for (k, row) in system.n_rows.iter().enumerate() {
        let m = system.master_of[k];
        for &(j, v) in row {
            p[(j, 2 * m)] += v.x;
            p[(j, 2 * m + 1)] += v.y;
        }
    }

    // bordered bulk operator pins the zero-mean component
    let mut a = Mat::<f64>::zeros(nb + 1, nb + 1);
    for &(r, c, v) in &system.a_triplets {
        a[(r, c)] += system.tau * v;
    }
    for i in 0..nb {
        a[(i, nb)] = 1.0;
        a[(nb, i)] = 1.0;
    }
    let a_lu = a.partial_piv_lu();

    // T = A_deflated^{-1} P, column by column
    let mut t = Mat::<f64>::zeros(nb, nm2);
    let mut b_col = Mat::<f64>::zeros(nb + 1, 1);
    for col in 0..nm2 {
        for i in 0..nb {
            b_col[(i, 0)] = p[(i, col)];
        }
        b_col[(nb, 0)] = 0.0;
        let sol = a_lu.solve(&b_col);
        for i in 0..nb {
            t[(i, col)] = sol[(i, 0)];
        }
    }

    // Schur complement S = E + P^T T on the displacement unknowns
    let mut s = Mat::<f64>::zeros(nm2, nm2);
    for &(r, c, v) in &system.e_triplets {
        let (mr, mc) = (system.master_of[r], system.master_of[c]);
        s[(2 * mr, 2 * mc)] += v;
        s[(2 * mr + 1, 2 * mc + 1)] += v;
    }
    for i in 0..nm2 {
        for j in 0..nm2 {
            let mut acc = 0.0;
            for r in 0..nb {
                acc += p[(r, i)] * t[(r, j)];
            }
            s[(i, j)] += acc;
        }
    }

    // g = P^T 1 couples the potential's additive constant; g^T Y = 0 is the
    // solvability condition of the singular bulk block
    let mut reduced = Mat::<f64>::zeros(nm2 + 1, nm2 + 1);
    for i in 0..nm2 {
        for j in 0..nm2 {
            reduced[(i, j)] = s[(i, j)];
        }
        let mut g = 0.0;
        for r in 0..nb {
            g += p[(r, i)];
        }
        reduced[(i, nm2)] = -g;
        reduced[(nm2, i)] = g;
    }
    let mut rhs = Mat::<f64>::zeros(nm2 + 1, 1);
    for i in 0..nm2 {
        rhs[(i, 0)] = system.rhs[xoff + i];
    }
    let yc = reduced.partial_piv_lu().solve(&rhs);

    // back substitution
    let mut z = vec![0.0; system.dim()];
    let w_const = yc[(nm2, 0)];
    for i in 0..nb {
        let mut acc = 0.0;
        for j in 0..nm2 {
            acc += t[(i, j)] * yc[(j, 0)];
        }
        z[i] = -acc + w_const;
    }
    let koff = system.kappa_offset();
    for k in 0..system.n_surface {
        let mut acc = 0.0;
        for &(j, v) in &system.b_rows[k] {
            acc += v * z[j];
        }
        z[koff + k] = -acc / system.mass[k];
    }
    for i in 0..nm2 {
        z[xoff + i] = yc[(i, 0)];
    }

    let rhs_norm = system.rhs.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let residual = residual_inf(system, &z);
    if !residual.is_finite() || residual > RESIDUAL_TOL * (rhs_norm + 1.0) {
        return Err(Error::SolveFailure(format!(
            "schur path residual {residual:.3e} exceeds tolerance"
        )));
    }
    let mut out = split_solution(system, &z);
    out.residual = residual;
    Ok(out)
}

/// The tension-weighted surface Dirichlet pairing
/// `<sigma grad_s X_new, grad_s (X_new - X_old)>` over the whole cluster,
/// the surface half of the discrete stability identity.
pub fn surface_dirichlet_pairing(
    cluster: &ClusterMesh,
    topology: &ClusterTopology,
    positions_new: &[Vec<Vec2>],
) -> f64 {
    let mut acc = 0.0;
    for (i, chain) in cluster.chains.iter().enumerate() {
        let sigma = topology.tensions[i];
        for j in 0..chain.num_segments() {
            let (a, b) = chain.segment_indices(j);
            let len = chain.segment_length(j);
            let d_new = positions_new[i][b] - positions_new[i][a];
            let d_old = chain.points[b] - chain.points[a];
            acc += sigma * d_new.dot(d_new - d_old) / len;
        }
    }
    acc
}
