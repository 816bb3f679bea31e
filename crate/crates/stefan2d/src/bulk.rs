//! Adaptive conforming triangulation of the box `(-H, H)^2`.
//!
//! A quadtree is refined to cell size `h_f = 2H/N_f` near the interface
//! (every cell whose closed square meets a curve segment's bounding box
//! inflated by `h_f`) and kept at `h_c = 2H/N_c` elsewhere, then 2:1
//! balanced. Cells without hanging midpoints are split along the SW-NE
//! diagonal; cells with finer neighbors are fanned from their center, which
//! closes the mesh conformingly. The mesh is rebuilt from scratch whenever
//! the interface moves; nothing is transferred between builds.

use crate::cluster::ClusterMesh;
use crate::geometry::Vec2;
use crate::{Error, Result};
use std::collections::HashMap;

#[derive(Debug, Clone)]
struct Node {
    level: u8,
    ix: u32,
    iy: u32,
    children: Option<[usize; 4]>,
    leaf: Option<usize>,
}

#[derive(Debug, Clone)]
struct Leaf {
    tri_start: usize,
    tri_end: usize,
}

/// P1 triangulation of the box, with the generating quadtree retained for
/// point location and segment clipping.
#[derive(Debug, Clone)]
pub struct BulkMesh {
    /// Box half-width.
    pub h: f64,
    pub n_coarse: u32,
    pub n_fine: u32,
    pub vertices: Vec<Vec2>,
    /// Positively oriented vertex index triples.
    pub triangles: Vec<[usize; 3]>,
    /// Quadtree level of the cell each triangle came from.
    pub tri_level: Vec<u8>,
    nodes: Vec<Node>,
    leaves: Vec<Leaf>,
    max_level: u8,
}

impl BulkMesh {
    pub fn h_fine(&self) -> f64 {
        2.0 * self.h / self.n_fine as f64
    }

    pub fn h_coarse(&self) -> f64 {
        2.0 * self.h / self.n_coarse as f64
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    fn cell_size(&self, level: u8) -> f64 {
        2.0 * self.h / (1u64 << level) as f64
    }

    fn cell_box(&self, level: u8, ix: u32, iy: u32) -> (Vec2, Vec2) {
        let s = self.cell_size(level);
        let lo = Vec2::new(-self.h + ix as f64 * s, -self.h + iy as f64 * s);
        (lo, lo + Vec2::new(s, s))
    }

    /// All leaves whose closed square contains `x` (up to four on cell
    /// corners), in DFS order, i.e. ascending triangle ranges.
    fn leaves_containing(&self, x: Vec2, out: &mut Vec<usize>) {
        out.clear();
        self.collect_leaves_point(0, x, out);
    }

    fn collect_leaves_point(&self, node: usize, x: Vec2, out: &mut Vec<usize>) {
        let n = &self.nodes[node];
        let (lo, hi) = self.cell_box(n.level, n.ix, n.iy);
        if x.x < lo.x || x.x > hi.x || x.y < lo.y || x.y > hi.y {
            return;
        }
        match n.children {
            Some(children) => {
                for c in children {
                    self.collect_leaves_point(c, x, out);
                }
            }
            None => out.push(n.leaf.expect("childless node is a leaf")),
        }
    }

    /// All leaves whose closed square overlaps the axis-aligned box.
    pub(crate) fn leaves_overlapping(&self, lo: Vec2, hi: Vec2, out: &mut Vec<usize>) {
        out.clear();
        self.collect_leaves_box(0, lo, hi, out);
    }

    fn collect_leaves_box(&self, node: usize, lo: Vec2, hi: Vec2, out: &mut Vec<usize>) {
        let n = &self.nodes[node];
        let (clo, chi) = self.cell_box(n.level, n.ix, n.iy);
        if lo.x > chi.x || hi.x < clo.x || lo.y > chi.y || hi.y < clo.y {
            return;
        }
        match n.children {
            Some(children) => {
                for c in children {
                    self.collect_leaves_box(c, lo, hi, out);
                }
            }
            None => out.push(n.leaf.expect("childless node is a leaf")),
        }
    }

    /// Triangle ids of a leaf, ascending.
    pub(crate) fn leaf_triangles(&self, leaf: usize) -> std::ops::Range<usize> {
        self.leaves[leaf].tri_start..self.leaves[leaf].tri_end
    }

    /// Barycentric coordinates of `x` in triangle `t`.
    pub fn barycentric(&self, t: usize, x: Vec2) -> [f64; 3] {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        let area2 = (pb - pa).cross(pc - pa);
        [
            (pb - x).cross(pc - x) / area2,
            (pc - x).cross(pa - x) / area2,
            (pa - x).cross(pb - x) / area2,
        ]
    }

    /// Containing triangle and barycentric coordinates. Points on shared
    /// edges resolve to the lowest-index incident triangle.
    pub fn locate_point(&self, x: Vec2) -> Result<(usize, [f64; 3])> {
        if x.x.abs() > self.h || x.y.abs() > self.h {
            return Err(Error::OutOfDomain(format!(
                "point ({}, {}) outside the box of half-width {}",
                x.x, x.y, self.h
            )));
        }
        let mut leaves = Vec::with_capacity(4);
        self.leaves_containing(x, &mut leaves);
        let mut best: Option<(usize, [f64; 3])> = None;
        for leaf in leaves {
            for t in self.leaf_triangles(leaf) {
                if best.is_some_and(|(bt, _)| bt <= t) {
                    continue;
                }
                let bary = self.barycentric(t, x);
                if bary.iter().all(|&l| l >= -1e-12) {
                    best = Some((t, bary));
                }
            }
        }
        best.ok_or_else(|| {
            Error::WalkStall(format!("no triangle found containing ({}, {})", x.x, x.y))
        })
    }

    pub fn triangle_diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        (pb - pa).norm().max((pc - pb).norm()).max((pa - pc).norm())
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        0.5 * (self.vertices[b] - self.vertices[a]).cross(self.vertices[c] - self.vertices[a])
    }

    /// Edge-use census: every edge must be shared by exactly two triangles
    /// or lie on the box boundary; all triangle areas must be positive.
    pub fn validate_conformity(&self) -> Result<()> {
        let mut edges: Vec<(usize, usize)> = Vec::with_capacity(3 * self.triangles.len());
        for (t, tri) in self.triangles.iter().enumerate() {
            if self.triangle_area(t) <= 0.0 {
                return Err(Error::Geometry(format!("triangle {t} is not positively oriented")));
            }
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                edges.push((a.min(b), a.max(b)));
            }
        }
        edges.sort_unstable();
        let mut i = 0;
        while i < edges.len() {
            let mut j = i + 1;
            while j < edges.len() && edges[j] == edges[i] {
                j += 1;
            }
            let uses = j - i;
            if uses > 2 {
                return Err(Error::Geometry(format!(
                    "edge {:?} used by {uses} triangles",
                    edges[i]
                )));
            }
            if uses == 1 {
                let (a, b) = edges[i];
                let (pa, pb) = (self.vertices[a], self.vertices[b]);
                let on_boundary = (pa.x.abs() == self.h && pa.x == pb.x)
                    || (pa.y.abs() == self.h && pa.y == pb.y);
                if !on_boundary {
                    return Err(Error::Geometry(format!(
                        "interior edge {:?} has a hanging side",
                        edges[i]
                    )));
                }
            }
            i = j;
        }
        Ok(())
    }
}

fn bbox_of_segment(a: Vec2, b: Vec2, inflate: f64) -> (Vec2, Vec2) {
    (
        Vec2::new(a.x.min(b.x) - inflate, a.y.min(b.y) - inflate),
        Vec2::new(a.x.max(b.x) + inflate, a.y.max(b.y) + inflate),
    )
}

fn boxes_overlap(alo: Vec2, ahi: Vec2, blo: Vec2, bhi: Vec2) -> bool {
    alo.x <= bhi.x && blo.x <= ahi.x && alo.y <= bhi.y && blo.y <= ahi.y
}

/// Builds the adaptive mesh for the current interface position. `n_coarse`
/// and `n_fine` must be powers of two with `n_coarse <= n_fine`, and the
/// cluster must stay inside the box with a margin of at least `h_f`.
pub fn build_adaptive_mesh(
    h: f64,
    n_coarse: u32,
    n_fine: u32,
    cluster: &ClusterMesh,
) -> Result<BulkMesh> {
    if !n_coarse.is_power_of_two() || !n_fine.is_power_of_two() || n_coarse > n_fine {
        return Err(Error::DimensionMismatch(format!(
            "mesh parameters must be powers of two with n_coarse <= n_fine, got ({n_coarse}, {n_fine})"
        )));
    }
    let h_f = 2.0 * h / n_fine as f64;
    if cluster.max_coordinate() > h - h_f {
        return Err(Error::Geometry(format!(
            "cluster reaches {:.6} but must stay {h_f:.6} inside the box of half-width {h}",
            cluster.max_coordinate()
        )));
    }
    let min_level = n_coarse.trailing_zeros() as u8;
    let max_level = n_fine.trailing_zeros() as u8;

    let mut seg_boxes: Vec<(Vec2, Vec2)> = Vec::new();
    for chain in &cluster.chains {
        for j in 0..chain.num_segments() {
            let (a, b) = chain.segment(j);
            seg_boxes.push(bbox_of_segment(a, b, h_f));
        }
    }

    let mut mesh = BulkMesh {
        h,
        n_coarse,
        n_fine,
        vertices: Vec::new(),
        triangles: Vec::new(),
        tri_level: Vec::new(),
        nodes: Vec::new(),
        leaves: Vec::new(),
        max_level,
    };

    // refinement pass: uniformly to min_level, near the interface to max_level
    let all: Vec<usize> = (0..seg_boxes.len()).collect();
    build_node(&mut mesh, &seg_boxes, 0, 0, 0, &all, min_level, max_level);

    // 2:1 balancing: split any leaf whose same-level neighbor has
    // grandchildren facing it
    loop {
        let mut to_split: Vec<usize> = Vec::new();
        for id in 0..mesh.nodes.len() {
            if mesh.nodes[id].children.is_none() && needs_balance_split(&mesh, id) {
                to_split.push(id);
            }
        }
        if to_split.is_empty() {
            break;
        }
        for id in to_split {
            if mesh.nodes[id].children.is_none() {
                split_node(&mut mesh, id);
            }
        }
    }

    triangulate(&mut mesh);
    mesh.validate_conformity()?;
    Ok(mesh)
}

#[allow(clippy::too_many_arguments)]
fn build_node(
    mesh: &mut BulkMesh,
    seg_boxes: &[(Vec2, Vec2)],
    level: u8,
    ix: u32,
    iy: u32,
    segs: &[usize],
    min_level: u8,
    max_level: u8,
) -> usize {
    let id = mesh.nodes.len();
    mesh.nodes.push(Node { level, ix, iy, children: None, leaf: None });
    let refine = level < min_level || (level < max_level && !segs.is_empty());
    if !refine {
        return id;
    }
    let mut children = [0usize; 4];
    for (slot, (dx, dy)) in CHILD_OFFSETS.iter().enumerate() {
        let (cx, cy) = (2 * ix + dx, 2 * iy + dy);
        let (clo, chi) = mesh.cell_box(level + 1, cx, cy);
        let child_segs: Vec<usize> = segs
            .iter()
            .copied()
            .filter(|&s| boxes_overlap(clo, chi, seg_boxes[s].0, seg_boxes[s].1))
            .collect();
        children[slot] =
            build_node(mesh, seg_boxes, level + 1, cx, cy, &child_segs, min_level, max_level);
    }
    mesh.nodes[id].children = Some(children);
    id
}

/// Child order SW, SE, NW, NE.
const CHILD_OFFSETS: [(u32, u32); 4] = [(0, 0), (1, 0), (0, 1), (1, 1)];

fn split_node(mesh: &mut BulkMesh, id: usize) {
    let (level, ix, iy) = {
        let n = &mesh.nodes[id];
        (n.level, n.ix, n.iy)
    };
    let mut children = [0usize; 4];
    for (slot, (dx, dy)) in CHILD_OFFSETS.iter().enumerate() {
        let cid = mesh.nodes.len();
        mesh.nodes.push(Node {
            level: level + 1,
            ix: 2 * ix + dx,
            iy: 2 * iy + dy,
            children: None,
            leaf: None,
        });
        children[slot] = cid;
    }
    mesh.nodes[id].children = Some(children);
}

/// Finds the node at exactly `(level, ix, iy)` if the tree is deep enough
/// there, or the leaf ancestor covering that cell. `None` outside the box.
fn find_node(mesh: &BulkMesh, level: u8, ix: u32, iy: u32) -> Option<usize> {
    if ix >= 1u32 << level || iy >= 1u32 << level {
        return None;
    }
    let mut cur = 0usize;
    for l in 1..=level {
        let children = match mesh.nodes[cur].children {
            Some(c) => c,
            None => return Some(cur),
        };
        let dx = (ix >> (level - l)) & 1;
        let dy = (iy >> (level - l)) & 1;
        cur = children[(dy * 2 + dx) as usize];
    }
    Some(cur)
}

/// Neighbor cell offsets per side: E, W, N, S.
const SIDES: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

/// Child slots of the neighbor facing us, per side (children ordered
/// SW, SE, NW, NE): the eastern neighbor faces us with SW and NW, and so on.
const FACING: [[usize; 2]; 4] = [[0, 2], [1, 3], [0, 1], [2, 3]];

fn needs_balance_split(mesh: &BulkMesh, id: usize) -> bool {
    let n = &mesh.nodes[id];
    for (side, (dx, dy)) in SIDES.iter().enumerate() {
        let nx = n.ix as i64 + dx;
        let ny = n.iy as i64 + dy;
        if nx < 0 || ny < 0 {
            continue;
        }
        let Some(nb) = find_node(mesh, n.level, nx as u32, ny as u32) else {
            continue;
        };
        if mesh.nodes[nb].level < n.level {
            continue; // neighbor is coarser; its own pass handles it
        }
        if let Some(children) = mesh.nodes[nb].children {
            for slot in FACING[side] {
                if mesh.nodes[children[slot]].children.is_some() {
                    return true;
                }
            }
        }
    }
    false
}

fn triangulate(mesh: &mut BulkMesh) {
    // integer lattice in units of h_f / 2 so that corners, side midpoints
    // and centers of every cell are exact lattice points
    let unit = 2.0 * mesh.h / (1u64 << (mesh.max_level + 1)) as f64;
    let mut vertex_ids: HashMap<(u32, u32), usize> = HashMap::new();
    let mut vertices: Vec<Vec2> = Vec::new();
    let mut triangles: Vec<[usize; 3]> = Vec::new();
    let mut tri_level: Vec<u8> = Vec::new();
    let h = mesh.h;

    let mut leaf_nodes: Vec<usize> = Vec::new();
    collect_leaves_dfs(mesh, 0, &mut leaf_nodes);

    let mut leaves: Vec<Leaf> = Vec::with_capacity(leaf_nodes.len());
    for node_id in leaf_nodes {
        let (level, ix, iy) = {
            let n = &mesh.nodes[node_id];
            (n.level, n.ix, n.iy)
        };
        let p = 1u32 << (mesh.max_level + 1 - level);
        let (gx, gy) = (ix * p, iy * p);
        let mut vid = |g: (u32, u32)| -> usize {
            *vertex_ids.entry(g).or_insert_with(|| {
                vertices.push(Vec2::new(-h + g.0 as f64 * unit, -h + g.1 as f64 * unit));
                vertices.len() - 1
            })
        };
        // corners counterclockwise: SW, SE, NE, NW
        let corners = [(gx, gy), (gx + p, gy), (gx + p, gy + p), (gx, gy + p)];
        // sides in the same ccw order: S, E, N, W; a side carries a hanging
        // midpoint when the same-level neighbor on that side is subdivided
        let side_offsets = [(0i64, -1i64), (1, 0), (0, 1), (-1, 0)];
        let mut marked = [false; 4];
        for (side, (dx, dy)) in side_offsets.iter().enumerate() {
            let nx = ix as i64 + dx;
            let ny = iy as i64 + dy;
            if nx < 0 || ny < 0 {
                continue;
            }
            if let Some(nb) = find_node(mesh, level, nx as u32, ny as u32) {
                marked[side] =
                    mesh.nodes[nb].level == level && mesh.nodes[nb].children.is_some();
            }
        }
        let tri_start = triangles.len();
        if marked.iter().any(|&m| m) {
            let center = vid((gx + p / 2, gy + p / 2));
            for side in 0..4 {
                let a = corners[side];
                let b = corners[(side + 1) % 4];
                let va = vid(a);
                let vb = vid(b);
                if marked[side] {
                    let mid = vid(((a.0 + b.0) / 2, (a.1 + b.1) / 2));
                    triangles.push([va, mid, center]);
                    triangles.push([mid, vb, center]);
                    tri_level.push(level);
                    tri_level.push(level);
                } else {
                    triangles.push([va, vb, center]);
                    tri_level.push(level);
                }
            }
        } else {
            let [sw, se, ne, nw] = corners;
            let (vsw, vse, vne, vnw) = (vid(sw), vid(se), vid(ne), vid(nw));
            triangles.push([vsw, vse, vne]);
            triangles.push([vsw, vne, vnw]);
            tri_level.push(level);
            tri_level.push(level);
        }
        mesh.nodes[node_id].leaf = Some(leaves.len());
        leaves.push(Leaf { tri_start, tri_end: triangles.len() });
    }
    mesh.vertices = vertices;
    mesh.triangles = triangles;
    mesh.tri_level = tri_level;
    mesh.leaves = leaves;
}

fn collect_leaves_dfs(mesh: &BulkMesh, node: usize, out: &mut Vec<usize>) {
    match mesh.nodes[node].children {
        Some(children) => {
            for c in children {
                collect_leaves_dfs(mesh, c, out);
            }
        }
        None => out.push(node),
    }
}

/// Element stiffness matrix of a P1 triangle.
pub fn element_stiffness(p0: Vec2, p1: Vec2, p2: Vec2) -> [[f64; 3]; 3] {
    let area2 = (p1 - p0).cross(p2 - p0);
    let b = [p1.y - p2.y, p2.y - p0.y, p0.y - p1.y];
    let c = [p2.x - p1.x, p0.x - p2.x, p1.x - p0.x];
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = (b[i] * b[j] + c[i] * c[j]) / (2.0 * area2);
        }
    }
    k
}

/// Sparse matrix in CSR form.
#[derive(Debug, Clone)]
pub struct StiffnessMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl StiffnessMatrix {
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for row in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            y[row] = acc;
        }
        y
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.mul_vec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn row_entries(&self, row: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[row]..self.row_ptr[row + 1]).map(move |k| (self.cols[k], self.vals[k]))
    }
}

/// Assembles the bulk P1 stiffness matrix (pure Neumann: symmetric positive
/// semidefinite with the constants as kernel).
pub fn assemble_stiffness(mesh: &BulkMesh) -> StiffnessMatrix {
    let n = mesh.vertices.len();
    let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(9 * mesh.triangles.len());
    for tri in &mesh.triangles {
        let k = element_stiffness(
            mesh.vertices[tri[0]],
            mesh.vertices[tri[1]],
            mesh.vertices[tri[2]],
        );
        for i in 0..3 {
            for j in 0..3 {
                triplets.push((tri[i], tri[j], k[i][j]));
            }
        }
    }
    triplets.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let mut row_ptr = vec![0usize; n + 1];
    let mut cols: Vec<usize> = Vec::new();
    let mut vals: Vec<f64> = Vec::new();
    let mut idx = 0;
    for r in 0..n {
        while idx < triplets.len() && triplets[idx].0 == r {
            let c = triplets[idx].1;
            let mut v = 0.0;
            while idx < triplets.len() && triplets[idx].0 == r && triplets[idx].1 == c {
                v += triplets[idx].2;
                idx += 1;
            }
            cols.push(c);
            vals.push(v);
        }
        row_ptr[r + 1] = cols.len();
    }
    StiffnessMatrix { n, row_ptr, cols, vals }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::{build_cluster, circle_chain, BoundaryCycle, ClusterTopology, Direction};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn circle_cluster(r: f64, k: usize) -> ClusterMesh {
        let topology = ClusterTopology {
            num_phases: 2,
            betas: vec![-0.5, 0.5],
            tensions: vec![1.0],
            orientations: vec![(0, 1)],
            closed: vec![true],
            junctions: vec![],
            cycles: vec![BoundaryCycle { phase: 0, steps: vec![(0, Direction::Forward)] }],
            outer_phase: 1,
        };
        build_cluster(&topology, vec![circle_chain(Vec2::ZERO, r, k, true)]).unwrap()
    }

    #[test]
    fn uniform_mesh_has_two_triangles_per_cell() {
        let mesh = build_adaptive_mesh(4.0, 4, 4, &circle_cluster(1.0, 16)).unwrap();
        assert_eq!(mesh.triangles.len(), 2 * 16);
        assert_eq!(mesh.vertices.len(), 25);
        let a0 = mesh.triangle_area(0);
        let d0 = mesh.triangle_diameter(0);
        for t in 0..mesh.triangles.len() {
            assert!((mesh.triangle_area(t) - a0).abs() < 1e-12);
            assert!((mesh.triangle_diameter(t) - d0).abs() < 1e-12);
        }
    }

    fn seg_point_dist(a: Vec2, b: Vec2, p: Vec2) -> f64 {
        let d = b - a;
        let t = ((p - a).dot(d) / d.norm_sq()).clamp(0.0, 1.0);
        (p - (a + t * d)).norm()
    }

    #[test]
    fn cut_triangles_are_fine() {
        let cluster = circle_cluster(1.0, 128);
        let mesh = build_adaptive_mesh(4.0, 1, 128, &cluster).unwrap();
        let h_f = mesh.h_fine();
        let limit = (1.0 + 1e-12) * h_f * 2.0_f64.sqrt();
        for chain in &cluster.chains {
            for j in 0..chain.num_segments() {
                let (a, b) = chain.segment(j);
                for s in 0..=10 {
                    let p = a + (b - a) * (s as f64 / 10.0);
                    let (t, _) = mesh.locate_point(p).unwrap();
                    assert!(
                        mesh.triangle_diameter(t) <= limit,
                        "triangle {t} at sample {s} of segment {j} has diameter {}",
                        mesh.triangle_diameter(t)
                    );
                }
            }
        }
    }

    #[test]
    fn far_triangles_are_coarse() {
        let cluster = circle_cluster(1.0, 64);
        let mesh = build_adaptive_mesh(4.0, 4, 64, &cluster).unwrap();
        let h_c = mesh.h_coarse();
        let chain = &cluster.chains[0];
        for t in 0..mesh.triangles.len() {
            let [a, b, c] = mesh.triangles[t];
            let centroid = (mesh.vertices[a] + mesh.vertices[b] + mesh.vertices[c]) / 3.0;
            let dist = (0..chain.num_segments())
                .map(|j| {
                    let (p, q) = chain.segment(j);
                    seg_point_dist(p, q, centroid)
                })
                .fold(f64::INFINITY, f64::min);
            if dist > h_c {
                assert!(
                    mesh.triangle_diameter(t) >= h_c / 2.0,
                    "far triangle {t} (dist {dist:.3}) has diameter {}",
                    mesh.triangle_diameter(t)
                );
            }
        }
    }

    #[test]
    fn cluster_touching_the_box_is_rejected() {
        let topology = ClusterTopology {
            num_phases: 2,
            betas: vec![-0.5, 0.5],
            tensions: vec![1.0],
            orientations: vec![(0, 1)],
            closed: vec![true],
            junctions: vec![],
            cycles: vec![],
            outer_phase: 1,
        };
        let cluster = build_cluster(
            &topology,
            vec![crate::cluster::Chain {
                points: vec![Vec2::new(4.0, 0.0), Vec2::new(0.0, 3.0), Vec2::new(-3.0, -3.0)],
                closed: true,
            }],
        )
        .unwrap();
        let err = build_adaptive_mesh(4.0, 4, 64, &cluster).unwrap_err();
        assert!(matches!(err, Error::Geometry(_)));
    }

    #[test]
    fn element_stiffness_of_reference_triangle() {
        let k = element_stiffness(Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0));
        let expected = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!(
                    (k[i][j] - expected[i][j]).abs() < 1e-14,
                    "K[{i}][{j}] = {}",
                    k[i][j]
                );
            }
        }
    }

    #[test]
    fn stiffness_rows_sum_to_zero() {
        let mesh = build_adaptive_mesh(4.0, 2, 32, &circle_cluster(1.0, 48)).unwrap();
        let a = assemble_stiffness(&mesh);
        for row in 0..a.n {
            let mut sum = 0.0;
            let mut maxabs = 0.0_f64;
            for (_, v) in a.row_entries(row) {
                sum += v;
                maxabs = maxabs.max(v.abs());
            }
            assert!(
                sum.abs() <= 1e-12 * maxabs.max(1.0),
                "row {row} sums to {sum:.3e}"
            );
        }
    }

    #[test]
    fn stiffness_positive_on_nonconstant_vectors() {
        let mesh = build_adaptive_mesh(4.0, 2, 16, &circle_cluster(1.0, 24)).unwrap();
        let a = assemble_stiffness(&mesh);
        let n = a.n;
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..20 {
            let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mean = x.iter().sum::<f64>() / n as f64;
            for v in &mut x {
                *v -= mean;
            }
            let q = a.quadratic_form(&x);
            assert!(q > 0.0, "quadratic form {q} on a nonconstant vector");
        }
    }

    #[test]
    fn mesh_is_deterministic() {
        let cluster = circle_cluster(1.3, 80);
        let m1 = build_adaptive_mesh(4.0, 2, 64, &cluster).unwrap();
        let m2 = build_adaptive_mesh(4.0, 2, 64, &cluster).unwrap();
        assert_eq!(m1.vertices, m2.vertices);
        assert_eq!(m1.triangles, m2.triangles);
    }

    #[test]
    fn locate_centroid_and_corner() {
        let mesh = build_adaptive_mesh(4.0, 2, 32, &circle_cluster(1.0, 48)).unwrap();
        for t in (0..mesh.triangles.len()).step_by(17) {
            let [a, b, c] = mesh.triangles[t];
            let centroid = (mesh.vertices[a] + mesh.vertices[b] + mesh.vertices[c]) / 3.0;
            let (found, bary) = mesh.locate_point(centroid).unwrap();
            assert_eq!(found, t);
            for l in bary {
                assert!((l - 1.0 / 3.0).abs() < 1e-12);
            }
        }
        // box corner: the unique incident triangle
        let (t, bary) = mesh.locate_point(Vec2::new(-4.0, -4.0)).unwrap();
        let verts = mesh.triangles[t];
        assert!(verts.iter().any(|&v| mesh.vertices[v] == Vec2::new(-4.0, -4.0)));
        assert!(bary.iter().any(|&l| (l - 1.0).abs() < 1e-12));
    }

    #[test]
    fn locate_shared_edge_midpoint_takes_lowest_triangle() {
        let mesh = build_adaptive_mesh(4.0, 2, 32, &circle_cluster(1.0, 48)).unwrap();
        let mut edge_tris: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (t, tri) in mesh.triangles.iter().enumerate() {
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                edge_tris.entry((a.min(b), a.max(b))).or_default().push(t);
            }
        }
        let mut checked = 0;
        for ((a, b), tris) in edge_tris {
            if tris.len() != 2 {
                continue;
            }
            let mid = (mesh.vertices[a] + mesh.vertices[b]) * 0.5;
            let (t, bary) = mesh.locate_point(mid).unwrap();
            assert_eq!(t, *tris.iter().min().unwrap());
            assert!(bary.iter().any(|&l| l.abs() < 1e-12));
            checked += 1;
            if checked > 50 {
                break;
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn out_of_box_point_rejected() {
        let mesh = build_adaptive_mesh(4.0, 2, 16, &circle_cluster(1.0, 24)).unwrap();
        assert!(matches!(
            mesh.locate_point(Vec2::new(4.5, 0.0)),
            Err(Error::OutOfDomain(_))
        ));
    }
}
