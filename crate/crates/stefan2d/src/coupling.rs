//! Coupling between the bulk and surface finite element spaces.
//!
//! The bulk mesh is not fitted to the curves, so products of bulk and
//! surface basis functions must be integrated across element cuts. Each
//! curve segment is partitioned into sub-segments lying in single bulk
//! triangles; on each piece the integrand (linear x linear) is integrated
//! exactly with a two-point Gauss rule. A lumped variant that samples the
//! bulk basis at the surface vertices is kept for the mass-lumped flavor of
//! the scheme.

use crate::bulk::BulkMesh;
use crate::cluster::{lumped_vertex_masses, ClusterMesh, VertexNormalField};
use crate::geometry::Vec2;
use crate::{Error, Result};
use std::collections::BTreeMap;

/// One sub-segment of a clipped curve segment.
#[derive(Debug, Clone, Copy)]
pub struct ClipPiece {
    /// Parameter range along the original segment, `0 <= t0 < t1 <= 1`.
    pub t0: f64,
    pub t1: f64,
    pub triangle: usize,
}

/// Partitions the segment `p0 -> p1` into pieces lying in single bulk
/// triangles. Pieces are ordered, share endpoints, and their lengths sum to
/// the segment length. Pieces running along shared edges are assigned to
/// the lowest-index incident triangle by the half-open location rule.
pub fn clip_segment(bulk: &BulkMesh, p0: Vec2, p1: Vec2) -> Result<Vec<ClipPiece>> {
    if p0.x.abs() > bulk.h || p0.y.abs() > bulk.h || p1.x.abs() > bulk.h || p1.y.abs() > bulk.h {
        return Err(Error::OutOfDomain(format!(
            "segment ({}, {}) -> ({}, {}) leaves the box",
            p0.x, p0.y, p1.x, p1.y
        )));
    }
    let d = p1 - p0;
    let len = d.norm();
    if len == 0.0 {
        return Err(Error::Geometry("cannot clip a zero-length segment".into()));
    }
    let tol = 1e-12;

    // candidate triangles: all leaves overlapping the segment bounding box
    let pad = tol * len;
    let lo = Vec2::new(p0.x.min(p1.x) - pad, p0.y.min(p1.y) - pad);
    let hi = Vec2::new(p0.x.max(p1.x) + pad, p0.y.max(p1.y) + pad);
    let mut leaves = Vec::new();
    bulk.leaves_overlapping(lo, hi, &mut leaves);

    // cut parameters: every crossing of a candidate triangle's edges
    let mut cuts: Vec<f64> = vec![0.0, 1.0];
    for leaf in leaves {
        for t in bulk.leaf_triangles(leaf) {
            let tri = bulk.triangles[t];
            for e in 0..3 {
                let a = bulk.vertices[tri[e]];
                let b = bulk.vertices[tri[(e + 1) % 3]];
                let ab = b - a;
                let denom = d.cross(ab);
                if denom.abs() < 1e-300 {
                    continue; // parallel; collinear overlap ends come from other edges
                }
                let t_seg = (a - p0).cross(ab) / denom;
                let s_edge = (a - p0).cross(d) / denom;
                if t_seg > tol && t_seg < 1.0 - tol && (-tol..=1.0 + tol).contains(&s_edge) {
                    cuts.push(t_seg);
                }
            }
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() <= tol);

    // assign each interval to the triangle containing its midpoint, then
    // merge neighboring intervals that landed in the same triangle
    let mut pieces: Vec<ClipPiece> = Vec::new();
    for w in cuts.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        if t1 - t0 <= tol {
            continue;
        }
        let mid = p0 + d * (0.5 * (t0 + t1));
        let (tri, _) = bulk.locate_point(mid).map_err(|e| {
            Error::WalkStall(format!("midpoint of sub-segment [{t0}, {t1}] unlocatable: {e}"))
        })?;
        match pieces.last_mut() {
            Some(last) if last.triangle == tri => last.t1 = t1,
            _ => pieces.push(ClipPiece { t0, t1, triangle: tri }),
        }
    }
    if pieces.is_empty() {
        return Err(Error::WalkStall("clipping produced no pieces".into()));
    }
    pieces.first_mut().unwrap().t0 = 0.0;
    pieces.last_mut().unwrap().t1 = 1.0;
    let mut covered = 0.0;
    for (i, p) in pieces.iter().enumerate() {
        if i > 0 && (p.t0 - pieces[i - 1].t1).abs() > tol {
            return Err(Error::WalkStall(format!(
                "pieces {} and {i} do not share an endpoint",
                i - 1
            )));
        }
        covered += p.t1 - p.t0;
    }
    if (covered - 1.0).abs() > 1e-12 {
        return Err(Error::WalkStall(format!(
            "pieces cover parameter length {covered}, expected 1"
        )));
    }
    Ok(pieces)
}

/// Integration mode for the coupling terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegrationMode {
    /// Exact integration of bulk-basis x surface-basis products along cuts.
    True,
    /// Mass-lumped: surface vertex masses times bulk basis values at the
    /// surface vertices.
    Lumped,
}

impl std::fmt::Display for IntegrationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            IntegrationMode::True => write!(f, "true"),
            IntegrationMode::Lumped => write!(f, "lumped"),
        }
    }
}

/// The coupling matrices: for every surface vertex `k` (global surface
/// numbering) a sparse row over bulk vertices with entries
/// `b[k][j] = <phi_j, chi_k>` in the chosen mode, and the same row weighted
/// by the vertex normal, `n[k][j] = b[k][j] * omega_k`.
#[derive(Debug, Clone)]
pub struct CouplingMatrices {
    pub mode: IntegrationMode,
    pub b_rows: Vec<Vec<(usize, f64)>>,
    pub n_rows: Vec<Vec<(usize, Vec2)>>,
    /// The normal field weighting `n_rows`.
    pub omega: VertexNormalField,
}

impl CouplingMatrices {
    /// Rebuilds the normal-weighted rows for a different normal field while
    /// keeping the scalar rows (the lagged iteration of the conservative
    /// scheme changes only the normals).
    pub fn with_omega(&self, cluster: &ClusterMesh, omega: VertexNormalField) -> CouplingMatrices {
        let n_rows = weight_rows(&self.b_rows, cluster, &omega);
        CouplingMatrices { mode: self.mode, b_rows: self.b_rows.clone(), n_rows, omega }
    }

    pub fn row_sum(&self, k: usize) -> f64 {
        self.b_rows[k].iter().map(|(_, v)| v).sum()
    }
}

fn weight_rows(
    b_rows: &[Vec<(usize, f64)>],
    cluster: &ClusterMesh,
    omega: &VertexNormalField,
) -> Vec<Vec<(usize, Vec2)>> {
    let mut n_rows = Vec::with_capacity(b_rows.len());
    for i in 0..cluster.num_curves() {
        for k in 0..cluster.chains[i].num_vertices() {
            let g = cluster.global_index(i, k);
            let w = omega.at(i, k);
            n_rows.push(b_rows[g].iter().map(|&(j, v)| (j, v * w)).collect());
        }
    }
    n_rows
}

/// Assembles the coupling matrices between the bulk mesh and the cluster.
pub fn assemble_coupling(
    bulk: &BulkMesh,
    cluster: &ClusterMesh,
    omega: &VertexNormalField,
    mode: IntegrationMode,
) -> Result<CouplingMatrices> {
    let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); cluster.num_vertices()];
    // 2-point Gauss on [0, 1], exact for the quadratic integrand
    let gauss = [0.5 - 0.5 / 3.0_f64.sqrt(), 0.5 + 0.5 / 3.0_f64.sqrt()];
    for (i, chain) in cluster.chains.iter().enumerate() {
        match mode {
            IntegrationMode::True => {
                for j in 0..chain.num_segments() {
                    let (ka, kb) = chain.segment_indices(j);
                    let (pa, pb) = chain.segment(j);
                    let seg_len = (pb - pa).norm();
                    let (ga, gb) = (cluster.global_index(i, ka), cluster.global_index(i, kb));
                    for piece in clip_segment(bulk, pa, pb)? {
                        let piece_len = (piece.t1 - piece.t0) * seg_len;
                        let tri = bulk.triangles[piece.triangle];
                        for &gt in &gauss {
                            let t = piece.t0 + (piece.t1 - piece.t0) * gt;
                            let x = pa + (pb - pa) * t;
                            let bary = bulk.barycentric(piece.triangle, x);
                            let weight = 0.5 * piece_len;
                            for (local, &bulk_vertex) in tri.iter().enumerate() {
                                let phi = bary[local];
                                if phi == 0.0 {
                                    continue;
                                }
                                *rows[ga].entry(bulk_vertex).or_insert(0.0) +=
                                    weight * phi * (1.0 - t);
                                *rows[gb].entry(bulk_vertex).or_insert(0.0) += weight * phi * t;
                            }
                        }
                    }
                }
            }
            IntegrationMode::Lumped => {
                let masses = lumped_vertex_masses(cluster, i);
                for (k, &mass) in masses.iter().enumerate() {
                    let g = cluster.global_index(i, k);
                    let (t, bary) = bulk.locate_point(chain.points[k])?;
                    for (local, &bulk_vertex) in bulk.triangles[t].iter().enumerate() {
                        if bary[local] != 0.0 {
                            *rows[g].entry(bulk_vertex).or_insert(0.0) += mass * bary[local];
                        }
                    }
                }
            }
        }
    }
    let b_rows: Vec<Vec<(usize, f64)>> = rows.into_iter().map(|m| m.into_iter().collect()).collect();
    let n_rows = weight_rows(&b_rows, cluster, omega);
    Ok(CouplingMatrices { mode, b_rows, n_rows, omega: omega.clone() })
}
