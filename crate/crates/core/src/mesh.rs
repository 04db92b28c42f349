//! Triangular meshes of the film cross-section: generation, ingestion, geometry.
//!
//! All coordinates are dimensionless (units of the exchange length). Vertex
//! indices are 0-based everywhere, including the file formats.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Immutable conforming triangulation with counter-clockwise triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<[usize; 2]>,
    boundary_vertices: Vec<usize>,
}

/// Geometry and quality summary of a mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshStats {
    pub h_max: f64,
    pub h_min: f64,
    /// Smallest interior angle over all triangles, radians.
    pub min_angle: f64,
    pub total_area: f64,
    pub n_vertices: usize,
    pub n_triangles: usize,
}

#[inline]
pub(crate) fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

#[inline]
fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

impl TriMesh {
    /// Validates and builds a mesh.
    ///
    /// Rejects out-of-range indices, unreferenced vertices, triangles with
    /// nonpositive signed area, and non-conforming connectivity (an edge used
    /// twice with the same orientation or by more than two triangles).
    pub fn new(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::EmptyMesh);
        }
        if let Some(p) = vertices.iter().find(|p| !(p[0].is_finite() && p[1].is_finite())) {
            return Err(Error::Topology(format!("non-finite vertex coordinate {p:?}")));
        }
        let n = vertices.len();
        let mut referenced = vec![false; n];
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= n {
                    return Err(Error::Topology(format!(
                        "triangle {t} references vertex {v}, but only {n} vertices exist"
                    )));
                }
                referenced[v] = true;
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::Topology(format!("triangle {t} repeats a vertex")));
            }
            let area = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if area <= 0.0 {
                return Err(Error::Topology(format!(
                    "triangle {t} has nonpositive signed area {area:e} (must be counter-clockwise)"
                )));
            }
        }
        if let Some(v) = referenced.iter().position(|r| !r) {
            return Err(Error::Topology(format!("vertex {v} is not referenced by any triangle")));
        }

        // Each directed edge may appear once; an interior edge appears once per direction.
        let mut directed: HashMap<(usize, usize), usize> = HashMap::with_capacity(3 * triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let e = (tri[k], tri[(k + 1) % 3]);
                if let Some(prev) = directed.insert(e, t) {
                    return Err(Error::Topology(format!(
                        "edge ({}, {}) is shared by triangles {prev} and {t} with the same orientation",
                        e.0, e.1
                    )));
                }
            }
        }
        let mut boundary_edges = Vec::new();
        for tri in &triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                if !directed.contains_key(&(b, a)) {
                    boundary_edges.push([a, b]);
                }
            }
        }
        let mut on_boundary = vec![false; n];
        for e in &boundary_edges {
            on_boundary[e[0]] = true;
            on_boundary[e[1]] = true;
        }
        let boundary_vertices = (0..n).filter(|&v| on_boundary[v]).collect();

        Ok(Self {
            vertices,
            triangles,
            boundary_edges,
            boundary_vertices,
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Sorted indices of vertices lying on the boundary.
    pub fn boundary_vertices(&self) -> &[usize] {
        &self.boundary_vertices
    }

    /// Boundary edges, oriented so that the mesh lies to their left.
    pub fn boundary_edges(&self) -> &[[usize; 2]] {
        &self.boundary_edges
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        signed_area(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.triangle_area(t)).sum()
    }

    /// Vertex adjacency lists (without the vertex itself), sorted ascending.
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_vertices()];
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    /// Boundary edges chained into closed loops of vertex indices.
    pub fn boundary_loops(&self) -> Vec<Vec<usize>> {
        let mut next: HashMap<usize, usize> = self.boundary_edges.iter().map(|e| (e[0], e[1])).collect();
        let mut starts: Vec<usize> = next.keys().copied().collect();
        starts.sort_unstable();
        let mut loops = Vec::new();
        for s in starts {
            let Some(mut cur) = next.remove(&s) else { continue };
            let mut lp = vec![s];
            while cur != s {
                lp.push(cur);
                match next.remove(&cur) {
                    Some(n) => cur = n,
                    None => break,
                }
            }
            loops.push(lp);
        }
        loops
    }

    /// Largest distance of a vertex from the origin.
    pub fn max_radius(&self) -> f64 {
        self.vertices.iter().map(|p| p[0].hypot(p[1])).fold(0.0, f64::max)
    }
}

/// Generates a quasi-uniform disk mesh centred at the origin.
///
/// Concentric rings at radii `j·Δr`, with `Δr ≤ target_h·√3/2` chosen so that
/// the outermost ring lies on the boundary circle. Ring `j` carries
/// `round(2π j)` equally spaced nodes; consecutive rings are stitched with a
/// two-pointer walk over the node angles.
pub fn generate_disk(diameter: f64, target_h: f64) -> Result<TriMesh> {
    if !(diameter.is_finite() && diameter > 0.0) {
        return Err(Error::invalid(format!("diameter must be positive, got {diameter}")));
    }
    if !(target_h.is_finite() && target_h > 0.0 && target_h < diameter / 2.0) {
        return Err(Error::invalid(format!(
            "target_h must lie in (0, diameter/2) = (0, {}), got {target_h}",
            diameter / 2.0
        )));
    }
    let radius = diameter / 2.0;
    let n_rings = (radius / (target_h * 3f64.sqrt() / 2.0)).ceil().max(1.0) as usize;
    let dr = radius / n_rings as f64;

    let mut vertices = vec![[0.0, 0.0]];
    // (first vertex index, node count) per ring
    let mut rings = vec![(0usize, 1usize)];
    for j in 1..=n_rings {
        let r = if j == n_rings { radius } else { j as f64 * dr };
        let count = ((2.0 * PI * j as f64).round() as usize).max(3);
        rings.push((vertices.len(), count));
        for k in 0..count {
            let theta = 2.0 * PI * k as f64 / count as f64;
            vertices.push([r * theta.cos(), r * theta.sin()]);
        }
    }

    let mut triangles = Vec::new();
    let (first, count) = rings[1];
    for k in 0..count {
        triangles.push([0, first + k, first + (k + 1) % count]);
    }
    for j in 2..=n_rings {
        stitch_rings(rings[j - 1], rings[j], &mut triangles);
    }
    TriMesh::new(vertices, triangles)
}

fn stitch_rings(inner: (usize, usize), outer: (usize, usize), out: &mut Vec<[usize; 3]>) {
    let (ia, p) = inner;
    let (ib, q) = outer;
    let a = |i: usize| ia + i % p;
    let b = |j: usize| ib + j % q;
    let ang_a = |i: usize| i as f64 / p as f64;
    let ang_b = |j: usize| j as f64 / q as f64;
    let (mut i, mut j) = (0, 0);
    while i < p || j < q {
        let advance_outer = j < q && (i == p || ang_b(j + 1) <= ang_a(i + 1));
        if advance_outer {
            out.push([a(i), b(j), b(j + 1)]);
            j += 1;
        } else {
            out.push([a(i), b(j), a(i + 1)]);
            i += 1;
        }
    }
}

/// Computes edge lengths, angles and area from the geometry.
pub fn mesh_stats(mesh: &TriMesh) -> MeshStats {
    let mut h_max: f64 = 0.0;
    let mut h_min = f64::INFINITY;
    let mut min_angle = f64::INFINITY;
    for t in 0..mesh.n_triangles() {
        let p = mesh.triangle_points(t);
        let len = [dist(p[1], p[2]), dist(p[2], p[0]), dist(p[0], p[1])];
        for k in 0..3 {
            h_max = h_max.max(len[k]);
            h_min = h_min.min(len[k]);
            // angle opposite to edge k
            let (a, b, c) = (len[k], len[(k + 1) % 3], len[(k + 2) % 3]);
            let cos = ((b * b + c * c - a * a) / (2.0 * b * c)).clamp(-1.0, 1.0);
            min_angle = min_angle.min(cos.acos());
        }
    }
    MeshStats {
        h_max,
        h_min,
        min_angle,
        total_area: mesh.total_area(),
        n_vertices: mesh.n_vertices(),
        n_triangles: mesh.n_triangles(),
    }
}

/// Shoelace area enclosed by the boundary loops.
pub fn boundary_polygon_area(mesh: &TriMesh) -> f64 {
    let v = mesh.vertices();
    mesh.boundary_loops()
        .iter()
        .map(|lp| {
            let n = lp.len();
            0.5 * (0..n)
                .map(|k| {
                    let (a, b) = (v[lp[k]], v[lp[(k + 1) % n]]);
                    a[0] * b[1] - b[0] * a[1]
                })
                .sum::<f64>()
        })
        .sum()
}

pub const NATIVE_HEADER: &str = "dmimesh 1";

/// Serializes a mesh in the native ASCII format.
///
/// Coordinates use the shortest decimal representation that round-trips, so
/// `write_native(&parse_native(&s)?) == s` for any `s` produced here.
pub fn write_native(mesh: &TriMesh) -> String {
    let mut s = String::with_capacity(32 * (mesh.n_vertices() + mesh.n_triangles()));
    writeln!(s, "{NATIVE_HEADER}").unwrap();
    writeln!(s, "vertices {}", mesh.n_vertices()).unwrap();
    for p in mesh.vertices() {
        writeln!(s, "{:?} {:?}", p[0], p[1]).unwrap();
    }
    writeln!(s, "triangles {}", mesh.n_triangles()).unwrap();
    for t in mesh.triangles() {
        writeln!(s, "{} {} {}", t[0], t[1], t[2]).unwrap();
    }
    s
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            inner: text.lines().enumerate(),
            last: 0,
        }
    }

    /// Next non-blank line with its 1-based number. At end of input the error
    /// points at the last line that was present.
    fn next_line(&mut self, what: &str) -> Result<(usize, &'a str)> {
        for (i, line) in self.inner.by_ref() {
            self.last = i + 1;
            if !line.trim().is_empty() {
                return Ok((i + 1, line.trim()));
            }
        }
        Err(Error::parse(
            self.last,
            format!("unexpected end of input, expected {what}"),
        ))
    }
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| Error::parse(line, format!("invalid {what} '{tok}'")))
}

fn parse_count(line: (usize, &str), keyword: &str) -> Result<usize> {
    let (no, text) = line;
    let mut tok = text.split_whitespace();
    match (tok.next(), tok.next(), tok.next()) {
        (Some(k), Some(n), None) if k == keyword => parse_num(n, no, "count"),
        _ => Err(Error::parse(
            no,
            format!("expected '{keyword} <count>', found '{text}'"),
        )),
    }
}

/// Parses the native ASCII mesh format.
pub fn parse_native(text: &str) -> Result<TriMesh> {
    let mut lines = Lines::new(text);
    let (no, header) = lines.next_line("header")?;
    if header != NATIVE_HEADER {
        return Err(Error::parse(
            no,
            format!("expected header '{NATIVE_HEADER}', found '{header}'"),
        ));
    }
    let nv = parse_count(lines.next_line("'vertices <count>'")?, "vertices")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (no, l) = lines.next_line("vertex coordinates")?;
        let tok: Vec<&str> = l.split_whitespace().collect();
        if tok.len() != 2 {
            return Err(Error::parse(no, format!("expected 'x y', found '{l}'")));
        }
        vertices.push([
            parse_num(tok[0], no, "coordinate")?,
            parse_num(tok[1], no, "coordinate")?,
        ]);
    }
    let nt = parse_count(lines.next_line("'triangles <count>'")?, "triangles")?;
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (no, l) = lines.next_line("triangle indices")?;
        let tok: Vec<&str> = l.split_whitespace().collect();
        if tok.len() != 3 {
            return Err(Error::parse(no, format!("expected 'i j k', found '{l}'")));
        }
        triangles.push([
            parse_num(tok[0], no, "vertex index")?,
            parse_num(tok[1], no, "vertex index")?,
            parse_num(tok[2], no, "vertex index")?,
        ]);
    }
    if let Ok((no, l)) = lines.next_line("") {
        return Err(Error::parse(no, format!("unexpected trailing content '{l}'")));
    }
    TriMesh::new(vertices, triangles)
}

/// Parses a Gmsh MSH 2.x ASCII file, keeping only 3-node triangles (type 2).
///
/// Vertices are renumbered densely in the file order of the nodes that some
/// triangle references. Clockwise triangles are reoriented.
pub fn parse_msh2(text: &str) -> Result<TriMesh> {
    let mut lines = Lines::new(text);
    let mut nodes: Vec<(u64, Point)> = Vec::new();
    let mut elements: Vec<[u64; 3]> = Vec::new();
    let mut seen_format = false;

    while let Ok((no, l)) = lines.next_line("section") {
        match l {
            "$MeshFormat" => {
                let (no, f) = lines.next_line("mesh format line")?;
                let tok: Vec<&str> = f.split_whitespace().collect();
                let version = tok.first().copied().unwrap_or("");
                if !version.starts_with("2.") {
                    return Err(Error::parse(
                        no,
                        format!("unsupported version '{version}' (need MSH 2.x)"),
                    ));
                }
                if tok.get(1) != Some(&"0") {
                    return Err(Error::parse(no, "binary MSH files are not supported"));
                }
                expect_end(&mut lines, "$EndMeshFormat")?;
                seen_format = true;
            }
            "$Nodes" => {
                let (no, c) = lines.next_line("node count")?;
                let count: usize = parse_num(c, no, "node count")?;
                nodes.reserve(count);
                for _ in 0..count {
                    let (no, l) = lines.next_line("node")?;
                    let tok: Vec<&str> = l.split_whitespace().collect();
                    if tok.len() < 3 {
                        return Err(Error::parse(no, format!("malformed node line '{l}'")));
                    }
                    let id = parse_num(tok[0], no, "node id")?;
                    nodes.push((
                        id,
                        [
                            parse_num(tok[1], no, "coordinate")?,
                            parse_num(tok[2], no, "coordinate")?,
                        ],
                    ));
                }
                expect_end(&mut lines, "$EndNodes")?;
            }
            "$Elements" => {
                let (no, c) = lines.next_line("element count")?;
                let count: usize = parse_num(c, no, "element count")?;
                for _ in 0..count {
                    let (no, l) = lines.next_line("element")?;
                    let tok: Vec<&str> = l.split_whitespace().collect();
                    if tok.len() < 3 {
                        return Err(Error::parse(no, format!("malformed element line '{l}'")));
                    }
                    let etype: u32 = parse_num(tok[1], no, "element type")?;
                    let ntags: usize = parse_num(tok[2], no, "tag count")?;
                    if etype != 2 {
                        continue;
                    }
                    if tok.len() != 3 + ntags + 3 {
                        return Err(Error::parse(no, format!("triangle element needs 3 nodes: '{l}'")));
                    }
                    let n = &tok[3 + ntags..];
                    elements.push([
                        parse_num(n[0], no, "node id")?,
                        parse_num(n[1], no, "node id")?,
                        parse_num(n[2], no, "node id")?,
                    ]);
                }
                expect_end(&mut lines, "$EndElements")?;
            }
            s if s.starts_with('$') && !s.starts_with("$End") => {
                let end = format!("$End{}", &s[1..]);
                loop {
                    let (_, l) = lines.next_line(&end)?;
                    if l == end {
                        break;
                    }
                }
            }
            other => return Err(Error::parse(no, format!("unexpected content '{other}'"))),
        }
    }
    if !seen_format {
        return Err(Error::parse(1, "missing $MeshFormat section"));
    }
    if elements.is_empty() {
        return Err(Error::EmptyMesh);
    }

    let position: HashMap<u64, usize> = nodes.iter().enumerate().map(|(k, (id, _))| (*id, k)).collect();
    let mut referenced = vec![false; nodes.len()];
    for e in &elements {
        for id in e {
            let k = *position
                .get(id)
                .ok_or_else(|| Error::Topology(format!("element references unknown node {id}")))?;
            referenced[k] = true;
        }
    }
    let mut new_index = vec![usize::MAX; nodes.len()];
    let mut vertices = Vec::new();
    for (k, (_, p)) in nodes.iter().enumerate() {
        if referenced[k] {
            new_index[k] = vertices.len();
            vertices.push(*p);
        }
    }
    let triangles = elements
        .iter()
        .map(|e| {
            let mut t = e.map(|id| new_index[position[&id]]);
            if signed_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]) < 0.0 {
                t.swap(1, 2);
            }
            t
        })
        .collect();
    TriMesh::new(vertices, triangles)
}

fn expect_end(lines: &mut Lines<'_>, end: &str) -> Result<()> {
    let (no, l) = lines.next_line(end)?;
    if l != end {
        return Err(Error::parse(no, format!("expected '{end}', found '{l}'")));
    }
    Ok(())
}

/// Structured `n × n` grid on `[0, side]²` with alternating diagonals.
pub fn generate_square(n: usize, side: f64) -> Result<TriMesh> {
    if n == 0 || !(side.is_finite() && side > 0.0) {
        return Err(Error::invalid(format!(
            "square grid needs n >= 1 and side > 0, got n = {n}, side = {side}"
        )));
    }
    let h = side / n as f64;
    let mut v = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            v.push([i as f64 * h, j as f64 * h]);
        }
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut t = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            if (i + j) % 2 == 0 {
                t.push([a, b, c]);
                t.push([a, c, d]);
            } else {
                t.push([a, b, d]);
                t.push([b, c, d]);
            }
        }
    }
    TriMesh::new(v, t)
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const EX_NM: f64 = 9.7348;

    #[test]
    fn disk_rejects_bad_parameters() {
        assert!(matches!(generate_disk(2.0, 2.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(generate_disk(0.0, 0.1), Err(Error::InvalidParameter(_))));
        assert!(matches!(generate_disk(2.0, -0.1), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn disk_100nm_triangle_count_in_range() {
        let mesh = generate_disk(100.0 / EX_NM, 4.45 / EX_NM).unwrap();
        let s = mesh_stats(&mesh);
        assert!((1000..=4500).contains(&s.n_triangles), "{}", s.n_triangles);
        assert!(s.h_max <= 1.5 * 4.45 / EX_NM);
        assert!(
            s.min_angle >= 20f64.to_radians(),
            "min angle {}",
            s.min_angle.to_degrees()
        );
    }

    #[test]
    fn disk_area_matches_inscribed_polygon() {
        let mesh = generate_disk(2.0, 0.5).unwrap();
        let area = mesh_stats(&mesh).total_area;
        // outer ring of n nodes on the unit circle: n/2·sin(2π/n)
        let rings = (1.0 / (0.5 * 3f64.sqrt() / 2.0)).ceil();
        let n = (2.0 * PI * rings).round();
        let polygon = 0.5 * n * (2.0 * PI / n).sin();
        assert_relative_eq!(area, polygon, max_relative = 1e-12);
        assert!((area - PI).abs() / PI < 0.02);
    }

    #[test]
    fn disk_is_deterministic() {
        let a = generate_disk(10.272, 0.4571).unwrap();
        let b = generate_disk(10.272, 0.4571).unwrap();
        assert_eq!(write_native(&a), write_native(&b));
    }

    #[test]
    fn experiment_diameters_are_conforming_and_shape_regular() {
        for d in [80.0, 90.0, 100.0, 120.0, 140.0, 160.0, 180.0, 200.0] {
            let mesh = generate_disk(d / EX_NM, 4.45 / EX_NM).unwrap();
            let s = mesh_stats(&mesh);
            assert!(s.min_angle >= 20f64.to_radians(), "d={d}: {}", s.min_angle.to_degrees());
            assert!(s.h_max <= 1.5 * 4.45 / EX_NM, "d={d}");
            assert_eq!(mesh.boundary_loops().len(), 1);
            assert_relative_eq!(s.total_area, boundary_polygon_area(&mesh), max_relative = 1e-12);
        }
    }

    #[test]
    fn stats_of_reference_triangle() {
        let s = mesh_stats(&unit_triangle());
        assert_relative_eq!(s.h_max, 2f64.sqrt());
        assert_relative_eq!(s.h_min, 1.0);
        assert_relative_eq!(s.total_area, 0.5);
        assert_relative_eq!(s.min_angle, PI / 4.0, epsilon = 1e-12);
        assert_relative_eq!(mesh_stats(&unit_square()).total_area, 1.0);
    }

    #[test]
    fn boundary_of_square() {
        let m = unit_square();
        assert_eq!(m.boundary_vertices(), &[0, 1, 2, 3]);
        assert_eq!(m.boundary_edges().len(), 4);
        let g = square_grid(3, 1.0);
        assert_eq!(g.boundary_vertices().len(), 12);
        assert_relative_eq!(boundary_polygon_area(&g), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn native_single_triangle() {
        let text = "dmimesh 1\nvertices 3\n0 0\n1 0\n0 1\ntriangles 1\n0 1 2\n";
        let m = parse_native(text).unwrap();
        assert_eq!(m.n_triangles(), 1);
        assert_relative_eq!(m.total_area(), 0.5);
    }

    #[test]
    fn native_rejects_clockwise_triangle() {
        let text = "dmimesh 1\nvertices 3\n0 0\n1 0\n0 1\ntriangles 1\n0 2 1\n";
        assert!(matches!(parse_native(text), Err(Error::Topology(_))));
    }

    #[test]
    fn native_truncated_reports_line() {
        let text = "dmimesh 1\nvertices 3\n0 0\n1 0\n";
        match parse_native(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        match parse_native("dmimesh 1\nvertices 3\n0 0\n1 x\n0 1\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn native_rejects_nonconforming() {
        // two triangles overlapping along the same directed edge
        let text = "dmimesh 1\nvertices 4\n0 0\n1 0\n0 1\n1 1\ntriangles 2\n0 1 2\n0 1 3\n";
        assert!(matches!(parse_native(text), Err(Error::Topology(_))));
        let unused = "dmimesh 1\nvertices 4\n0 0\n1 0\n0 1\n5 5\ntriangles 1\n0 1 2\n";
        assert!(matches!(parse_native(unused), Err(Error::Topology(_))));
        let range = "dmimesh 1\nvertices 3\n0 0\n1 0\n0 1\ntriangles 1\n0 1 7\n";
        assert!(matches!(parse_native(range), Err(Error::Topology(_))));
    }

    const MSH_ONE: &str = "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n3\n1 0 0 0\n2 1 0 0\n3 0 1 0\n$EndNodes\n$Elements\n2\n1 1 2 0 1 1 2\n2 2 2 0 1 1 2 3\n$EndElements\n";

    #[test]
    fn msh2_minimal_triangle() {
        let m = parse_msh2(MSH_ONE).unwrap();
        assert_eq!(m.n_triangles(), 1);
        assert_eq!(m.n_vertices(), 3);
    }

    #[test]
    fn msh2_renumbers_referenced_nodes_and_reorients() {
        let text = "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$PhysicalNames\n1\n2 1 \"disk\"\n$EndPhysicalNames\n\
$Nodes\n4\n10 5 5 0\n20 0 0 0\n30 0 1 0\n40 1 0 0\n$EndNodes\n$Elements\n1\n7 2 2 1 1 20 30 40\n$EndElements\n";
        let m = parse_msh2(text).unwrap();
        assert_eq!(m.vertices(), &[[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]]);
        assert!(m.triangle_area(0) > 0.0);
    }

    #[test]
    fn msh2_without_triangles_is_empty() {
        let text = "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n2\n1 0 0 0\n2 1 0 0\n$EndNodes\n$Elements\n1\n1 1 2 0 1 1 2\n$EndElements\n";
        assert!(matches!(parse_msh2(text), Err(Error::EmptyMesh)));
    }

    #[test]
    fn msh4_is_unsupported() {
        let text = "$MeshFormat\n4.1 0 8\n$EndMeshFormat\n";
        match parse_msh2(text) {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 2);
                assert!(msg.contains("unsupported version"));
            }
            other => panic!("{other:?}"),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn native_round_trip(d in 1.0f64..12.0, frac in 0.08f64..0.3) {
            let mesh = generate_disk(d, frac * d / 2.0).unwrap();
            let text = write_native(&mesh);
            let back = parse_native(&text).unwrap();
            prop_assert_eq!(&back, &mesh);
            prop_assert_eq!(write_native(&back), text);
        }

        #[test]
        fn disk_area_equals_boundary_shoelace(d in 0.5f64..25.0, frac in 0.05f64..0.45) {
            let mesh = generate_disk(d, frac * d / 2.0).unwrap();
            let s = mesh_stats(&mesh);
            prop_assert!((s.total_area - boundary_polygon_area(&mesh)).abs() <= 1e-12 * s.total_area);
            prop_assert!(s.h_min <= s.h_max);
            prop_assert!(s.min_angle > 0.0 && s.min_angle <= PI / 3.0 + 1e-12);
        }
    }
}
