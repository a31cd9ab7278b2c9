//! Reference-element bases on triangles: P0, P1, the cubic MINI bubble and
//! the H(div) families BDM1 and RT0.
//!
//! Reference triangle vertices are `(0,0)`, `(1,0)`, `(0,1)`; a reference
//! point is given in barycentric coordinates `(λ0, λ1, λ2)` with
//! `(ξ, η) = (λ1, λ2)`.

mod hdiv;
mod quadrature;

pub use hdiv::{eval_hdiv, local_edge_vertices, HdivEval, HdivFamily};
pub use quadrature::{gauss_legendre, gauss_legendre_unit, quadrature, QuadratureRule, MAX_DEGREE};

use serde::{Deserialize, Serialize};

use crate::error::ElementError;

/// Quadrature degree for system assembly.
pub const ASSEMBLY_DEGREE: usize = 8;
/// Quadrature degree for error norms.
pub const ERROR_DEGREE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ElementFamily {
    P0,
    P1,
    /// P1 plus the cubic bubble, one scalar component of the MINI velocity.
    MiniBubble,
    Bdm1,
    Rt0,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueKind {
    Scalar,
    Vector,
}

/// Degrees of freedom attached to each mesh entity kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofsPerEntity {
    pub vertex: usize,
    pub edge: usize,
    pub cell: usize,
}

impl ElementFamily {
    pub fn dofs_per_entity(self) -> DofsPerEntity {
        let (vertex, edge, cell) = match self {
            ElementFamily::P0 => (0, 0, 1),
            ElementFamily::P1 => (1, 0, 0),
            ElementFamily::MiniBubble => (1, 0, 1),
            ElementFamily::Bdm1 => (0, 2, 0),
            ElementFamily::Rt0 => (0, 1, 0),
        };
        DofsPerEntity { vertex, edge, cell }
    }

    pub fn dofs_per_cell(self) -> usize {
        let d = self.dofs_per_entity();
        3 * d.vertex + 3 * d.edge + d.cell
    }

    pub fn value_kind(self) -> ValueKind {
        match self {
            ElementFamily::Bdm1 | ElementFamily::Rt0 => ValueKind::Vector,
            _ => ValueKind::Scalar,
        }
    }

    pub fn hdiv(self) -> Option<HdivFamily> {
        match self {
            ElementFamily::Bdm1 => Some(HdivFamily::Bdm1),
            ElementFamily::Rt0 => Some(HdivFamily::Rt0),
            _ => None,
        }
    }
}

/// Affine map from the reference triangle, `x = v0 + J ξ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellGeometry {
    pub vertices: [[f64; 2]; 3],
    /// Columns are `v1 - v0` and `v2 - v0`.
    pub jac: [[f64; 2]; 2],
    pub det: f64,
    inv_t: [[f64; 2]; 2],
}

impl CellGeometry {
    pub fn new(vertices: [[f64; 2]; 3]) -> Result<Self, ElementError> {
        let [v0, v1, v2] = vertices;
        let jac = [
            [v1[0] - v0[0], v2[0] - v0[0]],
            [v1[1] - v0[1], v2[1] - v0[1]],
        ];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let scale = jac.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
        if !(det.abs() > 1e-14 * scale * scale) {
            return Err(ElementError::DegenerateCell(0.5 * det));
        }
        let inv_t = [
            [jac[1][1] / det, -jac[1][0] / det],
            [-jac[0][1] / det, jac[0][0] / det],
        ];
        Ok(Self {
            vertices,
            jac,
            det,
            inv_t,
        })
    }

    pub fn area(&self) -> f64 {
        0.5 * self.det.abs()
    }

    pub fn map(&self, bary: &[f64; 3]) -> [f64; 2] {
        let [v0, v1, v2] = self.vertices;
        [
            bary[0] * v0[0] + bary[1] * v1[0] + bary[2] * v2[0],
            bary[0] * v0[1] + bary[1] * v1[1] + bary[2] * v2[1],
        ]
    }

    /// Physical gradient `J^{-T} ∇̂`.
    pub fn push_gradient(&self, g: [f64; 2]) -> [f64; 2] {
        [
            self.inv_t[0][0] * g[0] + self.inv_t[0][1] * g[1],
            self.inv_t[1][0] * g[0] + self.inv_t[1][1] * g[1],
        ]
    }

    /// Contravariant Piola map `J v̂ / det J`.
    pub fn piola(&self, v: [f64; 2]) -> [f64; 2] {
        [
            (self.jac[0][0] * v[0] + self.jac[0][1] * v[1]) / self.det,
            (self.jac[1][0] * v[0] + self.jac[1][1] * v[1]) / self.det,
        ]
    }

    /// Barycentric coordinates of a physical point.
    pub fn barycentric(&self, p: [f64; 2]) -> [f64; 3] {
        let d = [p[0] - self.vertices[0][0], p[1] - self.vertices[0][1]];
        // ξ = J^{-1} d, and J^{-1} is the transpose of inv_t
        let xi = self.inv_t[0][0] * d[0] + self.inv_t[1][0] * d[1];
        let eta = self.inv_t[0][1] * d[0] + self.inv_t[1][1] * d[1];
        [1.0 - xi - eta, xi, eta]
    }
}

pub const P1_REF_GRADIENTS: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];

/// P1 values (the barycentric coordinates) and reference gradients.
pub fn eval_p1(bary: &[f64; 3]) -> ([f64; 3], [[f64; 2]; 3]) {
    (*bary, P1_REF_GRADIENTS)
}

/// `27 λ0 λ1 λ2` and its reference gradient.
pub fn eval_bubble(bary: &[f64; 3]) -> (f64, [f64; 2]) {
    let [l0, l1, l2] = *bary;
    (
        27.0 * l0 * l1 * l2,
        [27.0 * l2 * (l0 - l1), 27.0 * l1 * (l0 - l2)],
    )
}

/// Scalar MINI basis (three P1 functions then the bubble) with physical
/// gradients on a given cell.
pub fn eval_mini(geom: &CellGeometry, bary: &[f64; 3]) -> ([f64; 4], [[f64; 2]; 4]) {
    let (b, gb) = eval_bubble(bary);
    let vals = [bary[0], bary[1], bary[2], b];
    let grads = [
        geom.push_gradient(P1_REF_GRADIENTS[0]),
        geom.push_gradient(P1_REF_GRADIENTS[1]),
        geom.push_gradient(P1_REF_GRADIENTS[2]),
        geom.push_gradient(gb),
    ];
    (vals, grads)
}

/// P1 physical gradients on a cell (constant).
pub fn p1_gradients(geom: &CellGeometry) -> [[f64; 2]; 3] {
    P1_REF_GRADIENTS.map(|g| geom.push_gradient(g))
}
