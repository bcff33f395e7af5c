//! Triangulations of 2D domains and the Dirichlet/Neumann boundary partition.
//!
//! Structured meshes split each grid cell along its bottom-left to top-right
//! diagonal. Vertices are numbered row-major, `j * (nx + 1) + i`. Boundary
//! facets run counterclockwise around the domain, so the outer normal of a
//! facet `v0 -> v1` is the tangent rotated clockwise.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("invalid mesh configuration: {0}")]
    Config(String),
    #[error("mesh invariant violated: {0}")]
    Invariant(String),
    #[error("mesh file line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("could not read mesh file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn unit() -> Self {
        Self::new(0.0, 0.0, 1.0, 1.0)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
}

/// A boundary edge `v0 -> v1` (counterclockwise) and the triangle owning it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryFacet {
    pub vertices: [usize; 2],
    pub triangle: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_facets: Vec<BoundaryFacet>,
}

fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Structured triangulation of `rect` with `nx * ny` cells, two triangles each.
pub fn build_structured_mesh(nx: usize, ny: usize, rect: Rect) -> Result<Mesh, MeshError> {
    if nx == 0 || ny == 0 {
        return Err(MeshError::Config(format!(
            "subdivision counts must be positive (nx = {nx}, ny = {ny})"
        )));
    }
    if !(rect.width() > 0.0 && rect.height() > 0.0) || !rect.area().is_finite() {
        return Err(MeshError::Config(format!(
            "degenerate rectangle [{}, {}] x [{}, {}]",
            rect.x0, rect.x1, rect.y0, rect.y1
        )));
    }
    let hx = rect.width() / nx as f64;
    let hy = rect.height() / ny as f64;
    let id = |i: usize, j: usize| j * (nx + 1) + i;

    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            // Pin the far edges exactly so the area sum is not polluted.
            let x = if i == nx { rect.x1 } else { rect.x0 + i as f64 * hx };
            let y = if j == ny { rect.y1 } else { rect.y0 + j as f64 * hy };
            vertices.push([x, y]);
        }
    }

    let mut triangles = Vec::with_capacity(2 * nx * ny);
    // cell (i, j) owns triangles 2*(j*nx + i) (lower) and 2*(j*nx + i) + 1 (upper)
    for j in 0..ny {
        for i in 0..nx {
            let a = id(i, j);
            let b = id(i + 1, j);
            let c = id(i + 1, j + 1);
            let d = id(i, j + 1);
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    let lower = |i: usize, j: usize| 2 * (j * nx + i);
    let upper = |i: usize, j: usize| 2 * (j * nx + i) + 1;

    let mut boundary_facets = Vec::with_capacity(2 * (nx + ny));
    for i in 0..nx {
        boundary_facets.push(BoundaryFacet {
            vertices: [id(i, 0), id(i + 1, 0)],
            triangle: lower(i, 0),
        });
    }
    for j in 0..ny {
        boundary_facets.push(BoundaryFacet {
            vertices: [id(nx, j), id(nx, j + 1)],
            triangle: lower(nx - 1, j),
        });
    }
    for i in (0..nx).rev() {
        boundary_facets.push(BoundaryFacet {
            vertices: [id(i + 1, ny), id(i, ny)],
            triangle: upper(i, ny - 1),
        });
    }
    for j in (0..ny).rev() {
        boundary_facets.push(BoundaryFacet {
            vertices: [id(0, j + 1), id(0, j)],
            triangle: upper(0, j),
        });
    }

    let mesh = Mesh {
        vertices,
        triangles,
        boundary_facets,
    };
    mesh.validate()?;
    Ok(mesh)
}

impl Mesh {
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        signed_area(self.vertices[a], self.vertices[b], self.vertices[c])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.triangle_area(t)).sum()
    }

    pub fn facet_midpoint(&self, f: usize) -> [f64; 2] {
        let [a, b] = self.boundary_facets[f].vertices;
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]
    }

    pub fn facet_length(&self, f: usize) -> f64 {
        let [a, b] = self.boundary_facets[f].vertices;
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        (pb[0] - pa[0]).hypot(pb[1] - pa[1])
    }

    /// Unit outer normal of a counterclockwise boundary facet.
    pub fn facet_normal(&self, f: usize) -> [f64; 2] {
        let [a, b] = self.boundary_facets[f].vertices;
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        let len = self.facet_length(f);
        [(pb[1] - pa[1]) / len, -(pb[0] - pa[0]) / len]
    }

    /// Checks positive orientation, facet ownership and that the boundary
    /// facets are exactly the edges used by a single triangle, forming
    /// closed curves.
    pub fn validate(&self) -> Result<(), MeshError> {
        let nv = self.num_vertices();
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(MeshError::Invariant(format!(
                    "triangle {t} references a vertex out of range"
                )));
            }
            let area = self.triangle_area(t);
            if !(area > 0.0) {
                return Err(MeshError::Invariant(format!(
                    "triangle {t} has non-positive signed area {area:e}"
                )));
            }
        }

        let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                *edge_count
                    .entry(edge_key(tri[k], tri[(k + 1) % 3]))
                    .or_insert(0) += 1;
            }
        }
        let mut seen = HashMap::new();
        let mut out_degree = vec![0usize; nv];
        let mut in_degree = vec![0usize; nv];
        for (f, facet) in self.boundary_facets.iter().enumerate() {
            let [a, b] = facet.vertices;
            if a >= nv || b >= nv || facet.triangle >= self.num_triangles() {
                return Err(MeshError::Invariant(format!(
                    "boundary facet {f} references an entity out of range"
                )));
            }
            let key = edge_key(a, b);
            if edge_count.get(&key).copied() != Some(1) {
                return Err(MeshError::Invariant(format!(
                    "boundary facet {f} ({a}, {b}) is not an edge of exactly one triangle"
                )));
            }
            let tri = self.triangles[facet.triangle];
            let owned = (0..3).any(|k| tri[k] == a && tri[(k + 1) % 3] == b);
            if !owned {
                return Err(MeshError::Invariant(format!(
                    "boundary facet {f} is not a counterclockwise edge of triangle {}",
                    facet.triangle
                )));
            }
            if seen.insert(key, f).is_some() {
                return Err(MeshError::Invariant(format!("boundary facet {f} is duplicated")));
            }
            out_degree[a] += 1;
            in_degree[b] += 1;
        }
        let single = edge_count.values().filter(|&&c| c == 1).count();
        if single != self.boundary_facets.len() {
            return Err(MeshError::Invariant(format!(
                "{single} edges lie on the boundary but {} boundary facets are listed",
                self.boundary_facets.len()
            )));
        }
        if edge_count.values().any(|&c| c > 2) {
            return Err(MeshError::Invariant("an edge is shared by more than two triangles".into()));
        }
        if out_degree.iter().zip(&in_degree).any(|(&o, &i)| o != i || o > 1) {
            return Err(MeshError::Invariant("boundary facets do not form closed curves".into()));
        }
        Ok(())
    }

    /// Reads the plain-text mesh format (`VERTS n`, `TRIS m`, `BFACETS k`).
    pub fn from_text(text: &str) -> Result<Mesh, MeshError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        fn header<'a>(
            lines: &mut impl Iterator<Item = (usize, &'a str)>,
            key: &str,
        ) -> Result<usize, MeshError> {
            let (line, text) = lines.next().ok_or(MeshError::Parse {
                line: 0,
                msg: format!("missing `{key}` header"),
            })?;
            let mut parts = text.split_whitespace();
            if parts.next() != Some(key) {
                return Err(MeshError::Parse {
                    line,
                    msg: format!("expected `{key} <count>`"),
                });
            }
            parts
                .next()
                .and_then(|n| n.parse().ok())
                .ok_or(MeshError::Parse {
                    line,
                    msg: format!("bad count after `{key}`"),
                })
        }

        fn row<'a, T: std::str::FromStr, const N: usize>(
            lines: &mut impl Iterator<Item = (usize, &'a str)>,
        ) -> Result<[T; N], MeshError> {
            let (line, text) = lines.next().ok_or(MeshError::Parse {
                line: 0,
                msg: "unexpected end of file".into(),
            })?;
            let vals: Vec<T> = text
                .split_whitespace()
                .map(|s| s.parse::<T>())
                .collect::<Result<_, _>>()
                .map_err(|_| MeshError::Parse {
                    line,
                    msg: "malformed number".into(),
                })?;
            vals.try_into().map_err(|_| MeshError::Parse {
                line,
                msg: format!("expected {N} entries"),
            })
        }

        let nv = header(&mut lines, "VERTS")?;
        let vertices = (0..nv)
            .map(|_| row::<f64, 2>(&mut lines))
            .collect::<Result<Vec<_>, _>>()?;
        let nt = header(&mut lines, "TRIS")?;
        let triangles = (0..nt)
            .map(|_| row::<usize, 3>(&mut lines))
            .collect::<Result<Vec<_>, _>>()?;
        let nb = header(&mut lines, "BFACETS")?;
        let boundary_facets = (0..nb)
            .map(|_| {
                row::<usize, 3>(&mut lines).map(|[a, b, t]| BoundaryFacet {
                    vertices: [a, b],
                    triangle: t,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mesh = Mesh {
            vertices,
            triangles,
            boundary_facets,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn read(path: &Path) -> Result<Mesh, MeshError> {
        let text = std::fs::read_to_string(path).map_err(|source| MeshError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_text(&text)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("VERTS {}\n", self.vertices.len());
        for v in &self.vertices {
            s.push_str(&format!("{} {}\n", v[0], v[1]));
        }
        s.push_str(&format!("TRIS {}\n", self.triangles.len()));
        for t in &self.triangles {
            s.push_str(&format!("{} {} {}\n", t[0], t[1], t[2]));
        }
        s.push_str(&format!("BFACETS {}\n", self.boundary_facets.len()));
        for f in &self.boundary_facets {
            s.push_str(&format!("{} {} {}\n", f.vertices[0], f.vertices[1], f.triangle));
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcKind {
    Dirichlet,
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Field {
    Displacement,
    Potential,
    Polarization,
}

impl Field {
    pub const ALL: [Field; 3] = [Field::Displacement, Field::Potential, Field::Polarization];

    pub fn components(self) -> usize {
        match self {
            Field::Displacement | Field::Polarization => 2,
            Field::Potential => 1,
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Field::Displacement => "u",
            Field::Potential => "phi",
            Field::Polarization => "P",
        })
    }
}

/// Per-field tag of every boundary facet.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPartition {
    pub displacement: Vec<BcKind>,
    pub potential: Vec<BcKind>,
    pub polarization: Vec<BcKind>,
}

impl BoundaryPartition {
    pub fn tags(&self, field: Field) -> &[BcKind] {
        match field {
            Field::Displacement => &self.displacement,
            Field::Potential => &self.potential,
            Field::Polarization => &self.polarization,
        }
    }

    pub fn count(&self, field: Field, kind: BcKind) -> usize {
        self.tags(field).iter().filter(|&&k| k == kind).count()
    }

    pub fn facets(&self, field: Field, kind: BcKind) -> impl Iterator<Item = usize> + '_ {
        self.tags(field)
            .iter()
            .enumerate()
            .filter(move |(_, &k)| k == kind)
            .map(|(f, _)| f)
    }

    /// Vertices touched by a Dirichlet facet of `field`, sorted. Shared
    /// vertices at part interfaces count as Dirichlet (closed Dirichlet set).
    pub fn dirichlet_vertices(&self, mesh: &Mesh, field: Field) -> Vec<usize> {
        let mut flag = vec![false; mesh.num_vertices()];
        for f in self.facets(field, BcKind::Dirichlet) {
            for &v in &mesh.boundary_facets[f].vertices {
                flag[v] = true;
            }
        }
        flag.iter()
            .enumerate()
            .filter(|(_, &d)| d)
            .map(|(v, _)| v)
            .collect()
    }

    pub fn uniform(mesh: &Mesh, u: BcKind, phi: BcKind, p: BcKind) -> Self {
        let n = mesh.boundary_facets.len();
        Self {
            displacement: vec![u; n],
            potential: vec![phi; n],
            polarization: vec![p; n],
        }
    }
}

/// Edge of an axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Side {
    /// Side of `rect` containing `x`, if any (relative tolerance 1e-9).
    pub fn locate(rect: &Rect, x: [f64; 2]) -> Option<Side> {
        let tol = 1e-9 * rect.width().max(rect.height());
        let within_x = x[0] >= rect.x0 - tol && x[0] <= rect.x1 + tol;
        let within_y = x[1] >= rect.y0 - tol && x[1] <= rect.y1 + tol;
        if (x[0] - rect.x0).abs() <= tol && within_y {
            Some(Side::Left)
        } else if (x[0] - rect.x1).abs() <= tol && within_y {
            Some(Side::Right)
        } else if (x[1] - rect.y0).abs() <= tol && within_x {
            Some(Side::Bottom)
        } else if (x[1] - rect.y1).abs() <= tol && within_x {
            Some(Side::Top)
        } else {
            None
        }
    }
}

/// Rule deciding the boundary condition kind from a facet midpoint.
/// `None` means the rule is undefined there.
pub trait BoundaryRule {
    fn classify(&self, midpoint: [f64; 2]) -> Option<BcKind>;
}

impl<F: Fn([f64; 2]) -> Option<BcKind>> BoundaryRule for F {
    fn classify(&self, midpoint: [f64; 2]) -> Option<BcKind> {
        self(midpoint)
    }
}

/// Dirichlet on the listed sides of `rect`, Neumann on the remaining sides.
#[derive(Debug, Clone)]
pub struct SideRule {
    pub rect: Rect,
    pub dirichlet: Vec<Side>,
}

impl SideRule {
    pub fn all_dirichlet(rect: Rect) -> Self {
        Self {
            rect,
            dirichlet: vec![Side::Left, Side::Right, Side::Bottom, Side::Top],
        }
    }

    pub fn all_neumann(rect: Rect) -> Self {
        Self {
            rect,
            dirichlet: Vec::new(),
        }
    }
}

impl BoundaryRule for SideRule {
    fn classify(&self, midpoint: [f64; 2]) -> Option<BcKind> {
        Side::locate(&self.rect, midpoint).map(|s| {
            if self.dirichlet.contains(&s) {
                BcKind::Dirichlet
            } else {
                BcKind::Neumann
            }
        })
    }
}

/// Tags every boundary facet for all three fields from its midpoint.
pub fn tag_boundary(
    mesh: &Mesh,
    displacement: &dyn BoundaryRule,
    potential: &dyn BoundaryRule,
    polarization: &dyn BoundaryRule,
) -> Result<BoundaryPartition, MeshError> {
    let classify = |rule: &dyn BoundaryRule, field: Field| -> Result<Vec<BcKind>, MeshError> {
        (0..mesh.boundary_facets.len())
            .map(|f| {
                let m = mesh.facet_midpoint(f);
                rule.classify(m).ok_or_else(|| {
                    MeshError::Config(format!(
                        "boundary rule for {field} undefined at facet {f} midpoint ({}, {})",
                        m[0], m[1]
                    ))
                })
            })
            .collect()
    };
    Ok(BoundaryPartition {
        displacement: classify(displacement, Field::Displacement)?,
        potential: classify(potential, Field::Potential)?,
        polarization: classify(polarization, Field::Polarization)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_split() {
        let m = build_structured_mesh(1, 1, Rect::unit()).unwrap();
        assert_eq!(m.num_vertices(), 4);
        assert_eq!(m.num_triangles(), 2);
        assert_eq!(m.boundary_facets.len(), 4);
    }

    #[test]
    fn counts_2x2() {
        let m = build_structured_mesh(2, 2, Rect::unit()).unwrap();
        assert_eq!(m.num_vertices(), 9);
        assert_eq!(m.num_triangles(), 8);
    }

    #[test]
    fn area_sum_8x8() {
        let m = build_structured_mesh(8, 8, Rect::unit()).unwrap();
        assert!((m.total_area() - 1.0).abs() <= 1e-14);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            build_structured_mesh(0, 3, Rect::unit()),
            Err(MeshError::Config(_))
        ));
        assert!(matches!(
            build_structured_mesh(2, 2, Rect::new(0.0, 0.0, 0.0, 1.0)),
            Err(MeshError::Config(_))
        ));
        assert!(build_structured_mesh(2, 2, Rect::new(1.0, 0.0, 0.0, 1.0)).is_err());
    }

    #[test]
    fn normals_point_outward() {
        let m = build_structured_mesh(3, 2, Rect::new(-1.0, 0.0, 2.0, 1.0)).unwrap();
        for f in 0..m.boundary_facets.len() {
            let mid = m.facet_midpoint(f);
            let n = m.facet_normal(f);
            let probe = [mid[0] + 1e-3 * n[0], mid[1] + 1e-3 * n[1]];
            assert!(probe[0] < -1.0 || probe[0] > 2.0 || probe[1] < 0.0 || probe[1] > 1.0);
        }
    }

    #[test]
    fn all_dirichlet_partition() {
        let r = Rect::unit();
        let m = build_structured_mesh(3, 3, r).unwrap();
        let d = SideRule::all_dirichlet(r);
        let p = tag_boundary(&m, &d, &d, &d).unwrap();
        for field in Field::ALL {
            assert_eq!(p.count(field, BcKind::Neumann), 0);
        }
    }

    #[test]
    fn left_edge_dirichlet_for_u() {
        let r = Rect::unit();
        let m = build_structured_mesh(2, 2, r).unwrap();
        let left = SideRule {
            rect: r,
            dirichlet: vec![Side::Left],
        };
        let n = SideRule::all_neumann(r);
        let p = tag_boundary(&m, &left, &n, &n).unwrap();
        assert_eq!(p.count(Field::Displacement, BcKind::Dirichlet), 2);
        assert_eq!(p.count(Field::Displacement, BcKind::Neumann), 6);
        // the three left-edge vertices are Dirichlet, including both corners
        assert_eq!(p.dirichlet_vertices(&m, Field::Displacement), vec![0, 3, 6]);
    }

    #[test]
    fn pure_neumann_polarization_allowed() {
        let r = Rect::unit();
        let m = build_structured_mesh(4, 4, r).unwrap();
        let d = SideRule::all_dirichlet(r);
        let n = SideRule::all_neumann(r);
        let p = tag_boundary(&m, &d, &d, &n).unwrap();
        assert_eq!(p.count(Field::Polarization, BcKind::Dirichlet), 0);
        assert_eq!(p.count(Field::Polarization, BcKind::Neumann), m.boundary_facets.len());
        assert!(p.dirichlet_vertices(&m, Field::Polarization).is_empty());
    }

    #[test]
    fn undefined_rule_is_config_error() {
        let m = build_structured_mesh(2, 2, Rect::unit()).unwrap();
        let d = SideRule::all_dirichlet(Rect::unit());
        let partial = |x: [f64; 2]| (x[1] < 0.5).then_some(BcKind::Dirichlet);
        assert!(matches!(
            tag_boundary(&m, &d, &partial, &d),
            Err(MeshError::Config(_))
        ));
    }

    #[test]
    fn text_round_trip_and_validation() {
        let m = build_structured_mesh(3, 2, Rect::unit()).unwrap();
        let back = Mesh::from_text(&m.to_text()).unwrap();
        assert_eq!(back, m);

        let mut broken = m.clone();
        broken.triangles[0].swap(1, 2);
        assert!(matches!(broken.validate(), Err(MeshError::Invariant(_))));

        let mut missing = m.clone();
        missing.boundary_facets.pop();
        assert!(missing.validate().is_err());

        assert!(matches!(
            Mesh::from_text("VERTS 2\n0 0\n1\n"),
            Err(MeshError::Parse { line: 3, .. })
        ));
    }

    proptest::proptest! {
        #[test]
        fn structured_invariants(nx in 1usize..12, ny in 1usize..12,
                                 w in 0.1f64..5.0, h in 0.1f64..5.0, x0 in -3.0f64..3.0) {
            let rect = Rect::new(x0, -1.0, x0 + w, -1.0 + h);
            let m = build_structured_mesh(nx, ny, rect).unwrap();
            proptest::prop_assert_eq!(m.num_vertices(), (nx + 1) * (ny + 1));
            proptest::prop_assert_eq!(m.num_triangles(), 2 * nx * ny);
            proptest::prop_assert!((m.total_area() - rect.area()).abs() <= 1e-13 * rect.area());
            let left = SideRule { rect, dirichlet: vec![Side::Left, Side::Top] };
            let part = tag_boundary(&m, &left, &left, &left).unwrap();
            for field in Field::ALL {
                proptest::prop_assert_eq!(
                    part.count(field, BcKind::Dirichlet) + part.count(field, BcKind::Neumann),
                    m.boundary_facets.len()
                );
            }
            proptest::prop_assert_eq!(part.count(Field::Potential, BcKind::Dirichlet), nx + ny);
        }
    }
}
