//! Structured triangulations of the two-box channel: a porous box below and a
//! fluid box above, sharing one horizontal interface segment.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::MeshError;

/// Closed interval `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub min: f64,
    pub max: f64,
}

impl Interval {
    pub fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn length(&self) -> f64 {
        self.max - self.min
    }
}

/// Porous box `x_range × y_range_p` below the fluid box `x_range × y_range_f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelGeometry {
    pub x_range: Interval,
    pub y_range_p: Interval,
    pub y_range_f: Interval,
    pub interface_y: f64,
}

impl ChannelGeometry {
    pub fn new(
        x_range: Interval,
        y_range_p: Interval,
        y_range_f: Interval,
    ) -> Result<Self, MeshError> {
        let geom = Self {
            x_range,
            y_range_p,
            y_range_f,
            interface_y: y_range_p.max,
        };
        geom.validate()?;
        Ok(geom)
    }

    /// `Ω = (0,1)×(0,2)` with `Ω_p = (0,1)×(0,1)` and `Ω_f = (0,1)×(1,2)`.
    pub fn unit_channel() -> Self {
        Self {
            x_range: Interval::new(0.0, 1.0),
            y_range_p: Interval::new(0.0, 1.0),
            y_range_f: Interval::new(1.0, 2.0),
            interface_y: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        for (name, iv) in [
            ("x_range", self.x_range),
            ("y_range_p", self.y_range_p),
            ("y_range_f", self.y_range_f),
        ] {
            if !(iv.length() > 0.0) || !iv.min.is_finite() || !iv.max.is_finite() {
                return Err(MeshError::DegenerateGeometry(format!(
                    "{name} = [{}, {}] has no positive length",
                    iv.min, iv.max
                )));
            }
        }
        if self.y_range_p.max != self.y_range_f.min || self.interface_y != self.y_range_p.max {
            return Err(MeshError::DegenerateGeometry(format!(
                "subdomains must meet at the interface: porous top {}, fluid bottom {}, interface {}",
                self.y_range_p.max, self.y_range_f.min, self.interface_y
            )));
        }
        Ok(())
    }

    pub fn area(&self, sub: Subdomain) -> f64 {
        match sub {
            Subdomain::Fluid => self.x_range.length() * self.y_range_f.length(),
            Subdomain::Porous => self.x_range.length() * self.y_range_p.length(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Subdomain {
    Fluid,
    Porous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EdgeTag {
    Interior,
    Boundary(Side),
    Interface,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    /// Counter-clockwise vertex indices.
    pub vertices: [usize; 3],
    /// `edges[i]` is the edge opposite `vertices[i]`.
    pub edges: [usize; 3],
    pub subdomain: Subdomain,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    /// Sorted so that `vertices[0] < vertices[1]`; this is the global orientation.
    pub vertices: [usize; 2],
    pub tag: EdgeTag,
    /// One or two incident triangles.
    pub triangles: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceEdge {
    pub edge: usize,
    pub fluid_triangle: usize,
    pub porous_triangle: usize,
    pub length: f64,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub geometry: ChannelGeometry,
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<Triangle>,
    pub edges: Vec<Edge>,
    /// Grid spacing `x_range.length() / nx`; the `h` of convergence tables.
    pub h_grid: f64,
    /// Largest triangle diameter.
    pub h_max: f64,
    pub nx: usize,
    pub ny_f: usize,
    pub ny_p: usize,
}

/// Builds the uniform right-triangle mesh. Every grid cell is cut along its
/// lower-left to upper-right diagonal.
pub fn build_channel_mesh(
    geom: ChannelGeometry,
    nx: usize,
    ny_f: usize,
    ny_p: usize,
) -> Result<Mesh, MeshError> {
    geom.validate()?;
    if nx == 0 || ny_f == 0 || ny_p == 0 {
        return Err(MeshError::InvalidResolution { nx, ny_f, ny_p });
    }

    let rows = ny_p + ny_f;
    let hx = geom.x_range.length() / nx as f64;
    let hy_p = geom.y_range_p.length() / ny_p as f64;
    let hy_f = geom.y_range_f.length() / ny_f as f64;

    let row_y = |j: usize| -> f64 {
        if j < ny_p {
            geom.y_range_p.min + j as f64 * hy_p
        } else if j == ny_p {
            geom.interface_y
        } else if j == rows {
            geom.y_range_f.max
        } else {
            geom.interface_y + (j - ny_p) as f64 * hy_f
        }
    };
    let col_x = |i: usize| -> f64 {
        if i == nx {
            geom.x_range.max
        } else {
            geom.x_range.min + i as f64 * hx
        }
    };

    let mut vertices = Vec::with_capacity((nx + 1) * (rows + 1));
    for j in 0..=rows {
        for i in 0..=nx {
            vertices.push([col_x(i), row_y(j)]);
        }
    }
    let vid = |i: usize, j: usize| j * (nx + 1) + i;

    let mut tri_vertices = Vec::with_capacity(2 * nx * rows);
    for j in 0..rows {
        let sub = if j < ny_p {
            Subdomain::Porous
        } else {
            Subdomain::Fluid
        };
        for i in 0..nx {
            let (v00, v10, v11, v01) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
            tri_vertices.push(([v00, v10, v11], sub));
            tri_vertices.push(([v00, v11, v01], sub));
        }
    }

    // Edge discovery in deterministic order.
    let mut edge_lookup = std::collections::HashMap::new();
    let mut edges: Vec<Edge> = Vec::new();
    let mut triangles = Vec::with_capacity(tri_vertices.len());
    for (t, (vs, sub)) in tri_vertices.iter().enumerate() {
        let mut tri_edges = [0usize; 3];
        for (local, slot) in tri_edges.iter_mut().enumerate() {
            let a = vs[(local + 1) % 3];
            let b = vs[(local + 2) % 3];
            let key = (a.min(b), a.max(b));
            let id = *edge_lookup.entry(key).or_insert_with(|| {
                edges.push(Edge {
                    vertices: [key.0, key.1],
                    tag: EdgeTag::Interior,
                    triangles: Vec::with_capacity(2),
                });
                edges.len() - 1
            });
            edges[id].triangles.push(t);
            *slot = id;
        }
        triangles.push(Triangle {
            vertices: *vs,
            edges: tri_edges,
            subdomain: *sub,
        });
    }

    for edge in edges.iter_mut() {
        let [a, b] = edge.vertices;
        let (pa, pb) = (vertices[a], vertices[b]);
        edge.tag = if edge.triangles.len() == 2 {
            let s0 = triangles[edge.triangles[0]].subdomain;
            let s1 = triangles[edge.triangles[1]].subdomain;
            if s0 != s1 {
                EdgeTag::Interface
            } else {
                EdgeTag::Interior
            }
        } else if pa[0] == geom.x_range.min && pb[0] == geom.x_range.min {
            EdgeTag::Boundary(Side::Left)
        } else if pa[0] == geom.x_range.max && pb[0] == geom.x_range.max {
            EdgeTag::Boundary(Side::Right)
        } else if pa[1] == geom.y_range_p.min && pb[1] == geom.y_range_p.min {
            EdgeTag::Boundary(Side::Bottom)
        } else {
            EdgeTag::Boundary(Side::Top)
        };
    }

    let h_max = triangles
        .iter()
        .map(|t| {
            let p = t.vertices.map(|v| vertices[v]);
            (0..3)
                .map(|k| dist(p[k], p[(k + 1) % 3]))
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);

    Ok(Mesh {
        geometry: geom,
        vertices,
        triangles,
        edges,
        h_grid: hx,
        h_max,
        nx,
        ny_f,
        ny_p,
    })
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

impl Mesh {
    /// Uniform mesh of the unit channel with `n` cells per unit length in both
    /// directions, i.e. `h = 1/n`.
    pub fn unit_channel(n: usize) -> Result<Self, MeshError> {
        build_channel_mesh(ChannelGeometry::unit_channel(), n, n, n)
    }

    pub fn triangle_coords(&self, t: usize) -> [[f64; 2]; 3] {
        self.triangles[t].vertices.map(|v| self.vertices[v])
    }

    /// Signed area (positive for counter-clockwise ordering).
    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_coords(t);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e].vertices;
        dist(self.vertices[a], self.vertices[b])
    }

    pub fn triangles_in(&self, sub: Subdomain) -> impl Iterator<Item = usize> + '_ {
        self.triangles
            .iter()
            .enumerate()
            .filter(move |(_, t)| t.subdomain == sub)
            .map(|(i, _)| i)
    }

    /// Whether vertex `v` belongs to the closure of subdomain `sub`.
    pub fn vertex_in(&self, v: usize, sub: Subdomain) -> bool {
        let y = self.vertices[v][1];
        match sub {
            Subdomain::Fluid => y >= self.geometry.interface_y,
            Subdomain::Porous => y <= self.geometry.interface_y,
        }
    }

    /// Whether edge `e` lies on the closure of subdomain `sub`.
    pub fn edge_in(&self, e: usize, sub: Subdomain) -> bool {
        self.edges[e]
            .triangles
            .iter()
            .any(|&t| self.triangles[t].subdomain == sub)
    }

    /// `(V, E, F)` restricted to one subdomain's closure.
    pub fn entity_counts(&self, sub: Subdomain) -> (usize, usize, usize) {
        let v = (0..self.vertices.len())
            .filter(|&v| self.vertex_in(v, sub))
            .count();
        let e = (0..self.edges.len())
            .filter(|&e| self.edge_in(e, sub))
            .count();
        let f = self.triangles_in(sub).count();
        (v, e, f)
    }

    /// Writes the plain-text dump: a header line `vertices N`, one `x y` line
    /// per vertex, a header `triangles M`, then one `v0 v1 v2 tag` line per
    /// triangle with tag `fluid` or `porous`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "vertices {}", self.vertices.len());
        for p in &self.vertices {
            let _ = writeln!(out, "{:.17e} {:.17e}", p[0], p[1]);
        }
        let _ = writeln!(out, "triangles {}", self.triangles.len());
        for t in &self.triangles {
            let tag = match t.subdomain {
                Subdomain::Fluid => "fluid",
                Subdomain::Porous => "porous",
            };
            let [a, b, c] = t.vertices;
            let _ = writeln!(out, "{a} {b} {c} {tag}");
        }
        out
    }
}

/// Interface edges ordered by increasing x, each with its two incident
/// triangles.
pub fn interface_edges(mesh: &Mesh) -> Vec<InterfaceEdge> {
    let mut out: Vec<(f64, InterfaceEdge)> = mesh
        .edges
        .iter()
        .enumerate()
        .filter(|(_, e)| e.tag == EdgeTag::Interface)
        .map(|(id, e)| {
            let (mut fluid, mut porous) = (usize::MAX, usize::MAX);
            for &t in &e.triangles {
                match mesh.triangles[t].subdomain {
                    Subdomain::Fluid => fluid = t,
                    Subdomain::Porous => porous = t,
                }
            }
            let [a, b] = e.vertices;
            let xmid = 0.5 * (mesh.vertices[a][0] + mesh.vertices[b][0]);
            (
                xmid,
                InterfaceEdge {
                    edge: id,
                    fluid_triangle: fluid,
                    porous_triangle: porous,
                    length: mesh.edge_length(id),
                },
            )
        })
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out.into_iter().map(|(_, e)| e).collect()
}
