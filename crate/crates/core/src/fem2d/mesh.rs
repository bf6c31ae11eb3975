use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::{Error, Result};

/// Conforming triangulation with counter-clockwise triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<bool>,
}

impl TriMesh {
    pub fn new(nodes: Vec<[f64; 2]>, triangles: Vec<[usize; 3]>, boundary_nodes: &[usize]) -> Result<Self> {
        let mut boundary = vec![false; nodes.len()];
        for &b in boundary_nodes {
            *boundary
                .get_mut(b)
                .ok_or_else(|| Error::invalid(format!("boundary node {b} out of range")))? = true;
        }
        let mesh = Self { nodes, triangles, boundary };
        for (t, tri) in mesh.triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= mesh.nodes.len()) {
                return Err(Error::invalid(format!("triangle {t} references a missing node")));
            }
            if mesh.signed_area(t) <= 0.0 {
                return Err(Error::Internal(format!("triangle {t} is degenerate or clockwise")));
            }
        }
        Ok(mesh)
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary[node]
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| self.boundary[i]).collect()
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|i| self.nodes[i]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.signed_area(t)).sum()
    }

    /// Shortest edge length.
    pub fn h_min(&self) -> f64 {
        let mut h = f64::INFINITY;
        for tri in &self.triangles {
            for e in 0..3 {
                let p = self.nodes[tri[e]];
                let q = self.nodes[tri[(e + 1) % 3]];
                h = h.min(((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt());
            }
        }
        h
    }

    /// Containing triangle and barycentric coordinates of `(x, y)`.
    pub fn locate(&self, x: f64, y: f64) -> Option<(usize, [f64; 3])> {
        const TOL: f64 = 1e-12;
        for (t, tri) in self.triangles.iter().enumerate() {
            let [a, b, c] = tri.map(|i| self.nodes[i]);
            let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
            let l1 = ((x - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (y - a[1])) / det;
            let l2 = ((b[0] - a[0]) * (y - a[1]) - (x - a[0]) * (b[1] - a[1])) / det;
            let l0 = 1.0 - l1 - l2;
            if l0 >= -TOL && l1 >= -TOL && l2 >= -TOL {
                return Some((t, [l0, l1, l2]));
            }
        }
        None
    }

    /// Plain-text dump: a `nodes N` header followed by `x y` lines, then
    /// `triangles T` with `a b c` lines, then `boundary B` with one index per
    /// line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "nodes {}", self.nodes.len());
        for [x, y] in &self.nodes {
            let _ = writeln!(s, "{x:e} {y:e}");
        }
        let _ = writeln!(s, "triangles {}", self.triangles.len());
        for [a, b, c] in &self.triangles {
            let _ = writeln!(s, "{a} {b} {c}");
        }
        let bnd = self.boundary_nodes();
        let _ = writeln!(s, "boundary {}", bnd.len());
        for b in bnd {
            let _ = writeln!(s, "{b}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let all: Vec<(usize, &str)> = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .collect();
        let mut pos = 0;
        let mut section = |name: &str| -> Result<Vec<(usize, Vec<&str>)>> {
            let (ln, line) = *all
                .get(pos)
                .ok_or_else(|| Error::invalid(format!("missing `{name}` section")))?;
            let mut it = line.split_whitespace();
            let count: usize = match (it.next(), it.next().and_then(|v| v.parse().ok())) {
                (Some(n), Some(c)) if n == name => c,
                _ => return Err(Error::invalid(format!("line {}: expected `{name} <count>`", ln + 1))),
            };
            pos += 1;
            let body = all
                .get(pos..pos + count)
                .ok_or_else(|| Error::invalid(format!("section `{name}` is truncated")))?;
            pos += count;
            Ok(body.iter().map(|(l, s)| (*l, s.split_whitespace().collect())).collect())
        };
        let parse_err = |ln: usize| Error::invalid(format!("line {}: malformed record", ln + 1));

        let mut nodes = Vec::new();
        for (ln, fields) in section("nodes")? {
            let v: Vec<f64> = fields.iter().map(|f| f.parse()).collect::<Result<_, _>>().map_err(|_| parse_err(ln))?;
            if v.len() != 2 {
                return Err(parse_err(ln));
            }
            nodes.push([v[0], v[1]]);
        }
        let mut triangles = Vec::new();
        for (ln, fields) in section("triangles")? {
            let v: Vec<usize> = fields.iter().map(|f| f.parse()).collect::<Result<_, _>>().map_err(|_| parse_err(ln))?;
            if v.len() != 3 {
                return Err(parse_err(ln));
            }
            triangles.push([v[0], v[1], v[2]]);
        }
        let mut boundary = Vec::new();
        for (ln, fields) in section("boundary")? {
            match fields.as_slice() {
                [f] => boundary.push(f.parse().map_err(|_| parse_err(ln))?),
                _ => return Err(parse_err(ln)),
            }
        }
        TriMesh::new(nodes, triangles, &boundary)
    }
}

/// Uniform `n × n` grid of the unit square, each cell split along its
/// rising diagonal, with `n = round(√target)`.
pub fn mesh_square(target_nodes: usize) -> Result<TriMesh> {
    if target_nodes < 4 {
        return Err(Error::invalid(format!("need at least 4 nodes, got {target_nodes}")));
    }
    let n = ((target_nodes as f64).sqrt().round() as usize).max(2);
    let h = 1.0 / (n - 1) as f64;
    let idx = |i: usize, j: usize| j * n + i;
    let mut nodes = Vec::with_capacity(n * n);
    let mut boundary = Vec::new();
    for j in 0..n {
        for i in 0..n {
            // exact endpoints so boundary nodes sit on the edges
            let x = if i == n - 1 { 1.0 } else { i as f64 * h };
            let y = if j == n - 1 { 1.0 } else { j as f64 * h };
            nodes.push([x, y]);
            if i == 0 || j == 0 || i == n - 1 || j == n - 1 {
                boundary.push(idx(i, j));
            }
        }
    }
    let mut triangles = Vec::with_capacity(2 * (n - 1) * (n - 1));
    for j in 0..n - 1 {
        for i in 0..n - 1 {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    TriMesh::new(nodes, triangles, &boundary)
}

/// Concentric-ring triangulation of the unit disk: ring `i` (radius `i/R`)
/// carries `6i` nodes, giving `1 + 3R(R+1)` nodes and `6R²` triangles.
pub fn mesh_disk(target_nodes: usize) -> Result<TriMesh> {
    if target_nodes < 4 {
        return Err(Error::invalid(format!("need at least 4 nodes, got {target_nodes}")));
    }
    let count = |r: usize| 1 + 3 * r * (r + 1);
    let rings = (1..)
        .take_while(|&r| count(r - 1) < target_nodes)
        .min_by_key(|&r| count(r).abs_diff(target_nodes))
        .unwrap_or(1);

    let mut nodes = vec![[0.0, 0.0]];
    let mut ring_start = vec![0usize];
    for i in 1..=rings {
        ring_start.push(nodes.len());
        let radius = i as f64 / rings as f64;
        let m = 6 * i;
        for k in 0..m {
            let th = 2.0 * PI * k as f64 / m as f64;
            nodes.push([radius * th.cos(), radius * th.sin()]);
        }
    }
    let boundary: Vec<usize> = (ring_start[rings]..nodes.len()).collect();

    let mut triangles = Vec::with_capacity(6 * rings * rings);
    for i in 1..=rings {
        let outer = |k: usize| ring_start[i] + k % (6 * i);
        let n_out = 6 * i;
        if i == 1 {
            for k in 0..n_out {
                triangles.push([0, outer(k), outer(k + 1)]);
            }
            continue;
        }
        let n_in = 6 * (i - 1);
        let inner = |k: usize| ring_start[i - 1] + k % n_in;
        let (mut a, mut b) = (0usize, 0usize);
        while a < n_in || b < n_out {
            let next_in = (a + 1) as f64 / n_in as f64;
            let next_out = (b + 1) as f64 / n_out as f64;
            if b < n_out && (a == n_in || next_out <= next_in + 1e-12) {
                triangles.push([inner(a), outer(b), outer(b + 1)]);
                b += 1;
            } else {
                triangles.push([inner(a), outer(b), inner(a + 1)]);
                a += 1;
            }
        }
    }
    // fix orientation defensively: every triangle must be counter-clockwise
    for tri in triangles.iter_mut() {
        let [p, q, r] = tri.map(|i| nodes[i]);
        let det = (q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]);
        if det < 0.0 {
            tri.swap(1, 2);
        }
    }
    TriMesh::new(nodes, triangles, &boundary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_mesh_geometry() {
        let m = mesh_square(808).unwrap();
        let n = m.n_nodes() as f64;
        assert!((n - 808.0).abs() / 808.0 <= 0.15);
        assert!(m.nodes().iter().all(|&[x, y]| (0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y)));
        for b in m.boundary_nodes() {
            let [x, y] = m.nodes()[b];
            assert!(x == 0.0 || x == 1.0 || y == 0.0 || y == 1.0);
        }
        for (i, &[x, y]) in m.nodes().iter().enumerate() {
            let on_edge = x == 0.0 || x == 1.0 || y == 0.0 || y == 1.0;
            assert_eq!(on_edge, m.is_boundary(i));
        }
        assert!((m.total_area() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn disk_mesh_geometry() {
        let m = mesh_disk(549).unwrap();
        assert_eq!(m.n_nodes(), 547);
        assert_eq!(m.triangles().len(), 1014);
        let rmax = m.nodes().iter().map(|[x, y]| x.hypot(*y)).fold(0.0, f64::max);
        assert!(rmax <= 1.0 + 1e-12);
        for b in m.boundary_nodes() {
            let [x, y] = m.nodes()[b];
            assert!((x.hypot(y) - 1.0).abs() < 1e-12);
        }
        for t in 0..m.triangles().len() {
            assert!(m.signed_area(t) > 0.0);
        }
        // polygon area approaches π
        assert!((m.total_area() - PI).abs() < 0.05);
    }

    #[test]
    fn rejects_tiny_targets() {
        assert!(mesh_square(3).is_err());
        assert!(mesh_disk(2).is_err());
    }

    #[test]
    fn locate_returns_barycentrics() {
        let m = mesh_square(25).unwrap();
        let (t, bary) = m.locate(0.3, 0.6).unwrap();
        let tri = m.triangles()[t];
        let x: f64 = (0..3).map(|k| bary[k] * m.nodes()[tri[k]][0]).sum();
        let y: f64 = (0..3).map(|k| bary[k] * m.nodes()[tri[k]][1]).sum();
        assert!((x - 0.3).abs() < 1e-14 && (y - 0.6).abs() < 1e-14);
        assert!(m.locate(1.5, 0.5).is_none());
    }

    #[test]
    fn text_round_trip() {
        let m = mesh_disk(40).unwrap();
        let back = TriMesh::from_text(&m.to_text()).unwrap();
        assert_eq!(m, back);
        assert!(TriMesh::from_text("nodes 2\n0 0\n").is_err());
    }
}
