//! BDM1 and RT0 on triangles.
//!
//! Local edge `i` joins local vertices `local_edge_vertices(i)` (lower local
//! index first) and is opposite local vertex `i`. Its normal is the tangent
//! rotated clockwise, `n = (t_y, -t_x) / |t|`, and the edge parameter
//! `τ ∈ [0, 1]` runs from the first vertex to the second. The degrees of
//! freedom are the moments `∫_e (v·n) L_m(τ) ds` against `L_0 = 1` and
//! `L_1 = 2τ - 1`; BDM1 uses both, RT0 only `L_0`.
//!
//! A reference basis dual to these moments is built once by inverting the
//! moment matrix of a monomial basis, then mapped with the contravariant
//! Piola transform. Since Piola preserves `∫ (v·n) q ds` for positively
//! oriented cells, the mapped basis is dual to the physical moments in the
//! local orientation; [`crate::space::DofMap`] flips signs where the global
//! orientation differs.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{gauss_legendre_unit, CellGeometry};
use crate::error::ElementError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HdivFamily {
    Bdm1,
    Rt0,
}

impl HdivFamily {
    pub fn moments_per_edge(self) -> usize {
        match self {
            HdivFamily::Bdm1 => 2,
            HdivFamily::Rt0 => 1,
        }
    }

    pub fn ndofs(self) -> usize {
        3 * self.moments_per_edge()
    }
}

pub fn local_edge_vertices(edge: usize) -> [usize; 2] {
    match edge {
        0 => [1, 2],
        1 => [0, 2],
        2 => [0, 1],
        _ => panic!("local edge index {edge} out of range"),
    }
}

/// Values and divergences of the local basis at one point. Local dof
/// `2*i + m` (BDM1) or `i` (RT0) is moment `m` on local edge `i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HdivEval {
    pub n: usize,
    pub values: [[f64; 2]; 6],
    pub divs: [f64; 6],
}

const REF_VERTICES: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

// Vector monomials spanning the local spaces.
// BDM1: (1,0) (ξ,0) (η,0) (0,1) (0,ξ) (0,η)
// RT0:  (1,0) (0,1) (ξ,η)
fn monomial(family: HdivFamily, j: usize, xi: f64, eta: f64) -> ([f64; 2], f64) {
    match family {
        HdivFamily::Bdm1 => match j {
            0 => ([1.0, 0.0], 0.0),
            1 => ([xi, 0.0], 1.0),
            2 => ([eta, 0.0], 0.0),
            3 => ([0.0, 1.0], 0.0),
            4 => ([0.0, xi], 0.0),
            5 => ([0.0, eta], 1.0),
            _ => unreachable!(),
        },
        HdivFamily::Rt0 => match j {
            0 => ([1.0, 0.0], 0.0),
            1 => ([0.0, 1.0], 0.0),
            2 => ([xi, eta], 2.0),
            _ => unreachable!(),
        },
    }
}

/// Coefficients `c[j][k]`: reference basis `k` is `Σ_j c[j][k] m_j`.
fn reference_coefficients(family: HdivFamily) -> &'static [[f64; 6]; 6] {
    static BDM1: OnceLock<[[f64; 6]; 6]> = OnceLock::new();
    static RT0: OnceLock<[[f64; 6]; 6]> = OnceLock::new();
    let cell = match family {
        HdivFamily::Bdm1 => &BDM1,
        HdivFamily::Rt0 => &RT0,
    };
    cell.get_or_init(|| {
        let n = family.ndofs();
        let per_edge = family.moments_per_edge();
        let (tau, w) = gauss_legendre_unit(3);
        // moment matrix D[k][j] = ℓ_k(m_j)
        let mut d = vec![vec![0.0; n]; n];
        for edge in 0..3 {
            let [a, b] = local_edge_vertices(edge);
            let (pa, pb) = (REF_VERTICES[a], REF_VERTICES[b]);
            let t = [pb[0] - pa[0], pb[1] - pa[1]];
            // (v·n) ds = v·(t_y, -t_x) dτ
            let nt = [t[1], -t[0]];
            for m in 0..per_edge {
                let k = edge * per_edge + m;
                for j in 0..n {
                    let mut acc = 0.0;
                    for (tq, wq) in tau.iter().zip(&w) {
                        let p = [pa[0] + tq * t[0], pa[1] + tq * t[1]];
                        let (v, _) = monomial(family, j, p[0], p[1]);
                        let leg = if m == 0 { 1.0 } else { 2.0 * tq - 1.0 };
                        acc += wq * (v[0] * nt[0] + v[1] * nt[1]) * leg;
                    }
                    d[k][j] = acc;
                }
            }
        }
        let inv = invert_small(d);
        let mut out = [[0.0; 6]; 6];
        for j in 0..n {
            for k in 0..n {
                out[j][k] = inv[j][k];
            }
        }
        out
    })
}

/// Gauss–Jordan inverse with partial pivoting for the tiny moment matrices.
fn invert_small(mut a: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| f64::from(i == j)).collect())
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))
            .unwrap();
        assert!(a[piv][col].abs() > 1e-12, "singular moment matrix");
        a.swap(col, piv);
        inv.swap(col, piv);
        let p = a[col][col];
        for j in 0..n {
            a[col][j] /= p;
            inv[col][j] /= p;
        }
        for r in 0..n {
            if r != col {
                let f = a[r][col];
                if f != 0.0 {
                    for j in 0..n {
                        a[r][j] -= f * a[col][j];
                        inv[r][j] -= f * inv[col][j];
                    }
                }
            }
        }
    }
    inv
}

/// Reference-cell values and divergences.
fn eval_reference(family: HdivFamily, bary: &[f64; 3]) -> HdivEval {
    let c = reference_coefficients(family);
    let n = family.ndofs();
    let (xi, eta) = (bary[1], bary[2]);
    let mut out = HdivEval {
        n,
        values: [[0.0; 2]; 6],
        divs: [0.0; 6],
    };
    for j in 0..n {
        let (m, dm) = monomial(family, j, xi, eta);
        for k in 0..n {
            out.values[k][0] += c[j][k] * m[0];
            out.values[k][1] += c[j][k] * m[1];
            out.divs[k] += c[j][k] * dm;
        }
    }
    out
}

/// Physical basis values and divergences on a cell, in local orientation.
pub fn eval_hdiv(
    family: HdivFamily,
    geom: &CellGeometry,
    bary: &[f64; 3],
) -> Result<HdivEval, ElementError> {
    if !(geom.det > 0.0) {
        return Err(ElementError::DegenerateCell(0.5 * geom.det));
    }
    let mut r = eval_reference(family, bary);
    for k in 0..r.n {
        r.values[k] = geom.piola(r.values[k]);
        r.divs[k] /= geom.det;
    }
    Ok(r)
}
