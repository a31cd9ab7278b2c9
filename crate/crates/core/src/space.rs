//! Global degree-of-freedom numbering, interpolation and Dirichlet handling
//! for the discrete spaces on one subdomain.

use std::collections::BTreeMap;

use crate::elements::{
    eval_hdiv, eval_mini, gauss_legendre_unit, local_edge_vertices, p1_gradients, CellGeometry,
    ElementFamily,
};
use crate::error::SpaceError;
use crate::mesh::{interface_edges, EdgeTag, InterfaceEdge, Mesh, Side, Subdomain};

/// Analytic data used for interpolation and boundary values.
#[derive(Clone, Copy)]
pub enum Analytic<'a> {
    Scalar(&'a dyn Fn([f64; 2]) -> f64),
    Vector(&'a dyn Fn([f64; 2]) -> [f64; 2]),
}

pub fn cell_geometry(mesh: &Mesh, t: usize) -> CellGeometry {
    CellGeometry::new(mesh.triangle_coords(t)).expect("mesh triangles are nondegenerate")
}

#[derive(Debug, Clone)]
pub struct DofMap {
    pub family: ElementFamily,
    pub subdomain: Subdomain,
    /// Mesh triangle ids of the subdomain, in mesh order; position is the local cell index.
    pub cells: Vec<usize>,
    pub n_dofs: usize,
    /// Pinned Dirichlet values.
    pub constrained: BTreeMap<usize, f64>,
    per_cell: usize,
    cell_dofs: Vec<usize>,
    signs: Vec<f64>,
    vertex_dof: Vec<Option<usize>>,
    edge_dof: Vec<Option<usize>>,
    local_cell: Vec<Option<usize>>,
}

pub fn build_dofmap(mesh: &Mesh, family: ElementFamily, subdomain: Subdomain) -> DofMap {
    let cells: Vec<usize> = mesh.triangles_in(subdomain).collect();
    let mut local_cell = vec![None; mesh.triangles.len()];
    for (k, &t) in cells.iter().enumerate() {
        local_cell[t] = Some(k);
    }
    let per_cell = family.dofs_per_cell();
    let ent = family.dofs_per_entity();

    let mut next = 0usize;
    let mut vertex_dof = vec![None; mesh.vertices.len()];
    if ent.vertex > 0 {
        for (v, slot) in vertex_dof.iter_mut().enumerate() {
            if mesh.vertex_in(v, subdomain) {
                *slot = Some(next);
                next += 1;
            }
        }
    }
    let mut edge_dof = vec![None; mesh.edges.len()];
    if ent.edge > 0 {
        for (e, slot) in edge_dof.iter_mut().enumerate() {
            if mesh.edge_in(e, subdomain) {
                *slot = Some(next);
                next += ent.edge;
            }
        }
    }
    let cell_base = next;
    next += ent.cell * cells.len();

    let mut cell_dofs = Vec::with_capacity(per_cell * cells.len());
    let mut signs = Vec::with_capacity(per_cell * cells.len());
    for (k, &t) in cells.iter().enumerate() {
        let tri = &mesh.triangles[t];
        for v in tri.vertices.iter().take(if ent.vertex > 0 { 3 } else { 0 }) {
            cell_dofs.push(vertex_dof[*v].expect("cell vertex numbered"));
            signs.push(1.0);
        }
        if ent.edge > 0 {
            for i in 0..3 {
                let [a, b] = local_edge_vertices(i);
                let flipped = tri.vertices[a] > tri.vertices[b];
                let base = edge_dof[tri.edges[i]].expect("cell edge numbered");
                for m in 0..ent.edge {
                    cell_dofs.push(base + m);
                    signs.push(if flipped && m == 0 { -1.0 } else { 1.0 });
                }
            }
        }
        for c in 0..ent.cell {
            cell_dofs.push(cell_base + k * ent.cell + c);
            signs.push(1.0);
        }
    }

    DofMap {
        family,
        subdomain,
        cells,
        n_dofs: next,
        constrained: BTreeMap::new(),
        per_cell,
        cell_dofs,
        signs,
        vertex_dof,
        edge_dof,
        local_cell,
    }
}

/// Normal moments `∫_e g·n L_m(τ) ds` of `g` on mesh edge `e` in the
/// global orientation (lower vertex id to higher).
fn edge_moments(mesh: &Mesh, e: usize, g: &dyn Fn([f64; 2]) -> [f64; 2]) -> [f64; 2] {
    let [a, b] = mesh.edges[e].vertices;
    let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
    let t = [pb[0] - pa[0], pb[1] - pa[1]];
    // n ds = (t_y, -t_x) dτ
    let nt = [t[1], -t[0]];
    let (tau, w) = gauss_legendre_unit(6);
    let mut m = [0.0; 2];
    for (tq, wq) in tau.iter().zip(&w) {
        let v = g([pa[0] + tq * t[0], pa[1] + tq * t[1]]);
        let vn = v[0] * nt[0] + v[1] * nt[1];
        m[0] += wq * vn;
        m[1] += wq * vn * (2.0 * tq - 1.0);
    }
    m
}

impl DofMap {
    pub fn dofs_per_cell(&self) -> usize {
        self.per_cell
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_dofs(&self, cell: usize) -> &[usize] {
        &self.cell_dofs[cell * self.per_cell..(cell + 1) * self.per_cell]
    }

    /// Orientation signs (±1) of the local basis; all ones except for H(div).
    pub fn cell_signs(&self, cell: usize) -> &[f64] {
        &self.signs[cell * self.per_cell..(cell + 1) * self.per_cell]
    }

    pub fn local_cell_of(&self, triangle: usize) -> Option<usize> {
        self.local_cell[triangle]
    }

    pub fn vertex_dof(&self, v: usize) -> Option<usize> {
        self.vertex_dof[v]
    }

    pub fn edge_dof(&self, e: usize) -> Option<usize> {
        self.edge_dof[e]
    }

    pub fn free_dofs(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_dofs).filter(|d| !self.constrained.contains_key(d))
    }

    pub fn constraint_list(&self) -> Vec<(usize, f64)> {
        self.constrained.iter().map(|(&d, &v)| (d, v)).collect()
    }

    fn check_tags(&self, mesh: &Mesh, tags: &[EdgeTag]) -> Result<Vec<usize>, SpaceError> {
        for tag in tags {
            let present = mesh
                .edges
                .iter()
                .enumerate()
                .any(|(e, edge)| edge.tag == *tag && mesh.edge_in(e, self.subdomain));
            if !present {
                return Err(SpaceError::UnknownTag(format!("{tag:?}")));
            }
        }
        Ok(mesh
            .edges
            .iter()
            .enumerate()
            .filter(|(e, edge)| tags.contains(&edge.tag) && mesh.edge_in(*e, self.subdomain))
            .map(|(e, _)| e)
            .collect())
    }

    /// Dofs whose support touches the tagged boundary, in increasing order.
    pub fn boundary_dofs(&self, mesh: &Mesh, tags: &[EdgeTag]) -> Result<Vec<usize>, SpaceError> {
        let edges = self.check_tags(mesh, tags)?;
        let mut out = Vec::new();
        let ent = self.family.dofs_per_entity();
        for e in edges {
            if ent.vertex > 0 {
                for v in mesh.edges[e].vertices {
                    out.extend(self.vertex_dof[v]);
                }
            }
            if let Some(base) = self.edge_dof[e] {
                out.extend(base..base + ent.edge);
            }
        }
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    /// Values of `g` at every dof supported on the tagged boundary, without
    /// touching the constrained set. For H(div) spaces these are the normal
    /// moments of the tagged edges.
    pub fn dirichlet_values(
        &self,
        mesh: &Mesh,
        tags: &[EdgeTag],
        g: Analytic<'_>,
    ) -> Result<Vec<(usize, f64)>, SpaceError> {
        let edges = self.check_tags(mesh, tags)?;
        let ent = self.family.dofs_per_entity();
        let mut out = BTreeMap::new();
        for e in edges {
            match (self.family.hdiv(), g) {
                (Some(_), Analytic::Vector(f)) => {
                    let base = self.edge_dof[e].expect("edge in subdomain");
                    let m = edge_moments(mesh, e, f);
                    for k in 0..ent.edge {
                        out.insert(base + k, m[k]);
                    }
                }
                (Some(_), Analytic::Scalar(_)) => {
                    return Err(SpaceError::WrongValueKind { expected: "vector" })
                }
                (None, Analytic::Scalar(f)) => {
                    for v in mesh.edges[e].vertices {
                        if let Some(d) = self.vertex_dof[v] {
                            out.entry(d).or_insert_with(|| f(mesh.vertices[v]));
                        }
                    }
                }
                (None, Analytic::Vector(_)) => {
                    return Err(SpaceError::WrongValueKind { expected: "scalar" })
                }
            }
        }
        Ok(out.into_iter().collect())
    }

    /// Pins every dof supported on the tagged boundary to the interpolated
    /// value of `g`.
    pub fn apply_dirichlet(
        &mut self,
        mesh: &Mesh,
        tags: &[EdgeTag],
        g: Analytic<'_>,
    ) -> Result<(), SpaceError> {
        let vals = self.dirichlet_values(mesh, tags, g)?;
        self.constrained.extend(vals);
        Ok(())
    }

    /// Integrals of each basis function over the subdomain (scalar spaces).
    pub fn basis_integrals(&self, mesh: &Mesh) -> Vec<f64> {
        let mut out = vec![0.0; self.n_dofs];
        for (k, &t) in self.cells.iter().enumerate() {
            let area = cell_geometry(mesh, t).area();
            let dofs = self.cell_dofs(k);
            match self.family {
                ElementFamily::P0 => out[dofs[0]] += area,
                ElementFamily::P1 => dofs.iter().for_each(|&d| out[d] += area / 3.0),
                ElementFamily::MiniBubble => {
                    dofs[..3].iter().for_each(|&d| out[d] += area / 3.0);
                    // ∫ 27 λ0λ1λ2 = 27 · 2|T| / 5! = 9|T|/20
                    out[dofs[3]] += 0.45 * area;
                }
                ElementFamily::Bdm1 | ElementFamily::Rt0 => {}
            }
        }
        out
    }

    /// Value and physical gradient of a scalar field on a local cell.
    pub fn eval_scalar(
        &self,
        coeffs: &[f64],
        cell: usize,
        geom: &CellGeometry,
        bary: &[f64; 3],
    ) -> (f64, [f64; 2]) {
        let dofs = self.cell_dofs(cell);
        match self.family {
            ElementFamily::P0 => (coeffs[dofs[0]], [0.0, 0.0]),
            ElementFamily::P1 => {
                let g = p1_gradients(geom);
                let mut v = 0.0;
                let mut gr = [0.0; 2];
                for i in 0..3 {
                    let c = coeffs[dofs[i]];
                    v += c * bary[i];
                    gr[0] += c * g[i][0];
                    gr[1] += c * g[i][1];
                }
                (v, gr)
            }
            ElementFamily::MiniBubble => {
                let (vals, grads) = eval_mini(geom, bary);
                let mut v = 0.0;
                let mut gr = [0.0; 2];
                for i in 0..4 {
                    let c = coeffs[dofs[i]];
                    v += c * vals[i];
                    gr[0] += c * grads[i][0];
                    gr[1] += c * grads[i][1];
                }
                (v, gr)
            }
            ElementFamily::Bdm1 | ElementFamily::Rt0 => panic!("eval_scalar on an H(div) space"),
        }
    }

    /// Value and divergence of an H(div) field on a local cell.
    pub fn eval_hdiv_field(
        &self,
        coeffs: &[f64],
        cell: usize,
        geom: &CellGeometry,
        bary: &[f64; 3],
    ) -> ([f64; 2], f64) {
        let fam = self
            .family
            .hdiv()
            .expect("eval_hdiv_field on a scalar space");
        let e = eval_hdiv(fam, geom, bary).expect("positively oriented cell");
        let dofs = self.cell_dofs(cell);
        let signs = self.cell_signs(cell);
        let mut v = [0.0; 2];
        let mut d = 0.0;
        for k in 0..e.n {
            let c = signs[k] * coeffs[dofs[k]];
            v[0] += c * e.values[k][0];
            v[1] += c * e.values[k][1];
            d += c * e.divs[k];
        }
        (v, d)
    }
}

/// Interpolant coefficients: nodal values for P1, cell means for P0, edge
/// normal moments for H(div), and zero bubble coefficients for MINI.
pub fn interpolate(f: Analytic<'_>, dofmap: &DofMap, mesh: &Mesh) -> Result<Vec<f64>, SpaceError> {
    let mut out = vec![0.0; dofmap.n_dofs];
    match (dofmap.family, f) {
        (ElementFamily::P1 | ElementFamily::MiniBubble, Analytic::Scalar(g)) => {
            for (v, d) in dofmap.vertex_dof.iter().enumerate() {
                if let Some(d) = d {
                    out[*d] = g(mesh.vertices[v]);
                }
            }
        }
        (ElementFamily::P0, Analytic::Scalar(g)) => {
            let q = crate::elements::quadrature(crate::elements::ERROR_DEGREE)?;
            for (k, &t) in dofmap.cells.iter().enumerate() {
                let geom = cell_geometry(mesh, t);
                let s: f64 = q.iter().map(|(p, w)| w * g(geom.map(p))).sum();
                out[dofmap.cell_dofs(k)[0]] = 2.0 * s;
            }
        }
        (ElementFamily::Bdm1 | ElementFamily::Rt0, Analytic::Vector(g)) => {
            let per = dofmap.family.dofs_per_entity().edge;
            for (e, d) in dofmap.edge_dof.iter().enumerate() {
                if let Some(base) = d {
                    let m = edge_moments(mesh, e, g);
                    out[*base..*base + per].copy_from_slice(&m[..per]);
                }
            }
        }
        (ElementFamily::Bdm1 | ElementFamily::Rt0, Analytic::Scalar(_)) => {
            return Err(SpaceError::WrongValueKind { expected: "vector" })
        }
        (_, Analytic::Vector(_)) => return Err(SpaceError::WrongValueKind { expected: "scalar" }),
    }
    Ok(out)
}

/// `∫ u_h` over the subdomain of a scalar field.
pub fn integral(dofmap: &DofMap, mesh: &Mesh, coeffs: &[f64]) -> f64 {
    dofmap
        .basis_integrals(mesh)
        .iter()
        .zip(coeffs)
        .map(|(a, b)| a * b)
        .sum()
}

/// Boundary pieces carrying Dirichlet data for each unknown.
pub const FLUID_VELOCITY_TAGS: [EdgeTag; 4] = [
    EdgeTag::Boundary(Side::Left),
    EdgeTag::Boundary(Side::Right),
    EdgeTag::Boundary(Side::Top),
    EdgeTag::Interface,
];
pub const FLUID_TEMPERATURE_TAGS: [EdgeTag; 3] = [
    EdgeTag::Boundary(Side::Left),
    EdgeTag::Boundary(Side::Right),
    EdgeTag::Boundary(Side::Top),
];
pub const POROUS_VELOCITY_TAGS: [EdgeTag; 4] = [
    EdgeTag::Boundary(Side::Left),
    EdgeTag::Boundary(Side::Right),
    EdgeTag::Boundary(Side::Bottom),
    EdgeTag::Interface,
];
pub const POROUS_TEMPERATURE_TAGS: [EdgeTag; 3] = [
    EdgeTag::Boundary(Side::Left),
    EdgeTag::Boundary(Side::Right),
    EdgeTag::Boundary(Side::Bottom),
];

/// The six discrete spaces of the coupled problem on one mesh. The fluid
/// velocity uses one MINI scalar numbering per component.
#[derive(Debug, Clone)]
pub struct Spaces {
    pub mesh: Mesh,
    pub velocity_f: DofMap,
    pub pressure_f: DofMap,
    pub theta_f: DofMap,
    pub velocity_p: DofMap,
    pub pressure_p: DofMap,
    pub theta_p: DofMap,
    pub interface: Vec<InterfaceEdge>,
}

impl Spaces {
    pub fn new(mesh: Mesh, darcy_family: ElementFamily) -> Result<Self, SpaceError> {
        if darcy_family.hdiv().is_none() {
            return Err(SpaceError::WrongValueKind { expected: "vector" });
        }
        Ok(Self {
            velocity_f: build_dofmap(&mesh, ElementFamily::MiniBubble, Subdomain::Fluid),
            pressure_f: build_dofmap(&mesh, ElementFamily::P1, Subdomain::Fluid),
            theta_f: build_dofmap(&mesh, ElementFamily::P1, Subdomain::Fluid),
            velocity_p: build_dofmap(&mesh, darcy_family, Subdomain::Porous),
            pressure_p: build_dofmap(&mesh, ElementFamily::P0, Subdomain::Porous),
            theta_p: build_dofmap(&mesh, ElementFamily::P1, Subdomain::Porous),
            interface: interface_edges(&mesh),
            mesh,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_channel_mesh, ChannelGeometry};
    use rand::{Rng, SeedableRng};

    #[test]
    fn dof_counts() {
        let m = Mesh::unit_channel(1).unwrap();
        assert_eq!(
            build_dofmap(&m, ElementFamily::P1, Subdomain::Fluid).n_dofs,
            4
        );
        // one cell split in two triangles has 5 edges
        assert_eq!(
            build_dofmap(&m, ElementFamily::Bdm1, Subdomain::Porous).n_dofs,
            10
        );
        let m2 = Mesh::unit_channel(2).unwrap();
        let (v, _, f) = m2.entity_counts(Subdomain::Fluid);
        let mini = build_dofmap(&m2, ElementFamily::MiniBubble, Subdomain::Fluid);
        assert_eq!(mini.n_dofs, v + f);
        assert_eq!(mini.n_dofs, 17);
        assert_eq!(
            build_dofmap(&m2, ElementFamily::P0, Subdomain::Porous).n_dofs,
            8
        );
        assert_eq!(
            build_dofmap(&m2, ElementFamily::Rt0, Subdomain::Porous).n_dofs,
            16
        );
    }

    #[test]
    fn shared_entities_share_indices() {
        let m = Mesh::unit_channel(3).unwrap();
        let dm = build_dofmap(&m, ElementFamily::Bdm1, Subdomain::Porous);
        for (e, edge) in m.edges.iter().enumerate() {
            if edge.triangles.len() == 2 && edge.tag == EdgeTag::Interior {
                let mut seen = Vec::new();
                for &t in &edge.triangles {
                    if let Some(c) = dm.local_cell_of(t) {
                        let i = m.triangles[t].edges.iter().position(|&x| x == e).unwrap();
                        seen.push((dm.cell_dofs(c)[2 * i], dm.cell_dofs(c)[2 * i + 1]));
                    }
                }
                if seen.len() == 2 {
                    assert_eq!(seen[0], seen[1]);
                }
            }
        }
    }

    #[test]
    fn p1_reproduces_linears() {
        let m = Mesh::unit_channel(4).unwrap();
        let dm = build_dofmap(&m, ElementFamily::P1, Subdomain::Fluid);
        let f = |p: [f64; 2]| 0.3 + 2.0 * p[0] - 1.5 * p[1];
        let c = interpolate(Analytic::Scalar(&f), &dm, &m).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let k = rng.random_range(0..dm.n_cells());
            let geom = cell_geometry(&m, dm.cells[k]);
            let (a, b): (f64, f64) = (rng.random(), rng.random());
            let bary = if a + b > 1.0 {
                [a + b - 1.0, 1.0 - a, 1.0 - b]
            } else {
                [1.0 - a - b, a, b]
            };
            let (v, g) = dm.eval_scalar(&c, k, &geom, &bary);
            assert!((v - f(geom.map(&bary))).abs() < 1e-12);
            assert!((g[0] - 2.0).abs() < 1e-12 && (g[1] + 1.5).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_interpolates_to_zero() {
        let m = Mesh::unit_channel(2).unwrap();
        for fam in [
            ElementFamily::P1,
            ElementFamily::P0,
            ElementFamily::MiniBubble,
        ] {
            let dm = build_dofmap(&m, fam, Subdomain::Porous);
            let c = interpolate(Analytic::Scalar(&|_| 0.0), &dm, &m).unwrap();
            assert!(c.iter().all(|&v| v == 0.0));
        }
        let dm = build_dofmap(&m, ElementFamily::Bdm1, Subdomain::Porous);
        let c = interpolate(Analytic::Vector(&|_| [0.0, 0.0]), &dm, &m).unwrap();
        assert!(c.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bdm1_reproduces_linear_vector_fields() {
        let m = build_channel_mesh(ChannelGeometry::unit_channel(), 3, 2, 4).unwrap();
        let dm = build_dofmap(&m, ElementFamily::Bdm1, Subdomain::Porous);
        let f = |p: [f64; 2]| [1.0 + 2.0 * p[0] - p[1], -0.5 + 0.25 * p[0] + 3.0 * p[1]];
        let c = interpolate(Analytic::Vector(&f), &dm, &m).unwrap();
        for k in 0..dm.n_cells() {
            let geom = cell_geometry(&m, dm.cells[k]);
            for bary in [[0.2, 0.3, 0.5], [1.0, 0.0, 0.0], [0.0, 0.5, 0.5]] {
                let (v, d) = dm.eval_hdiv_field(&c, k, &geom, &bary);
                let e = f(geom.map(&bary));
                assert!((v[0] - e[0]).abs() < 1e-12 && (v[1] - e[1]).abs() < 1e-12);
                assert!((d - 5.0).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn hdiv_normal_trace_continuous_across_edges() {
        let m = Mesh::unit_channel(3).unwrap();
        for fam in [ElementFamily::Bdm1, ElementFamily::Rt0] {
            let dm = build_dofmap(&m, fam, Subdomain::Porous);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
            let c: Vec<f64> = (0..dm.n_dofs)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            for edge in m.edges.iter().filter(|e| e.tag == EdgeTag::Interior) {
                if !edge
                    .triangles
                    .iter()
                    .all(|&t| dm.local_cell_of(t).is_some())
                {
                    continue;
                }
                let (pa, pb) = (m.vertices[edge.vertices[0]], m.vertices[edge.vertices[1]]);
                let n = [pb[1] - pa[1], pa[0] - pb[0]];
                for s in [0.2, 0.7] {
                    let p = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
                    let vals: Vec<f64> = edge
                        .triangles
                        .iter()
                        .map(|&t| {
                            let g = cell_geometry(&m, t);
                            let (v, _) = dm.eval_hdiv_field(
                                &c,
                                dm.local_cell_of(t).unwrap(),
                                &g,
                                &g.barycentric(p),
                            );
                            v[0] * n[0] + v[1] * n[1]
                        })
                        .collect();
                    assert!((vals[0] - vals[1]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn dirichlet_on_fluid_boundary() {
        let m = Mesh::unit_channel(4).unwrap();
        let mut dm = build_dofmap(&m, ElementFamily::MiniBubble, Subdomain::Fluid);
        let tags = [
            EdgeTag::Boundary(Side::Left),
            EdgeTag::Boundary(Side::Right),
            EdgeTag::Boundary(Side::Top),
            EdgeTag::Interface,
        ];
        dm.apply_dirichlet(&m, &tags, Analytic::Scalar(&|_| 0.0))
            .unwrap();
        // all 5x5 grid vertices except the 3x3 interior ones
        assert_eq!(dm.constrained.len(), 25 - 9);
        assert!(dm.constrained.values().all(|&v| v == 0.0));
    }

    #[test]
    fn hdiv_no_flow_pins_boundary_edges_only() {
        let m = Mesh::unit_channel(4).unwrap();
        let mut dm = build_dofmap(&m, ElementFamily::Bdm1, Subdomain::Porous);
        let tags = [
            EdgeTag::Boundary(Side::Left),
            EdgeTag::Boundary(Side::Right),
            EdgeTag::Boundary(Side::Bottom),
            EdgeTag::Interface,
        ];
        dm.apply_dirichlet(&m, &tags, Analytic::Vector(&|_| [0.0, 0.0]))
            .unwrap();
        assert_eq!(dm.constrained.len(), 2 * 16);
    }

    #[test]
    fn empty_tag_list_is_noop_and_unknown_tag_rejected() {
        let m = Mesh::unit_channel(2).unwrap();
        let mut dm = build_dofmap(&m, ElementFamily::P1, Subdomain::Fluid);
        dm.apply_dirichlet(&m, &[], Analytic::Scalar(&|_| 1.0))
            .unwrap();
        assert!(dm.constrained.is_empty());
        let err = dm.apply_dirichlet(
            &m,
            &[EdgeTag::Boundary(Side::Bottom)],
            Analytic::Scalar(&|_| 1.0),
        );
        assert!(matches!(err, Err(SpaceError::UnknownTag(_))));
    }

    #[test]
    fn basis_integrals_sum_to_area() {
        let m = Mesh::unit_channel(3).unwrap();
        for fam in [ElementFamily::P1, ElementFamily::P0] {
            let dm = build_dofmap(&m, fam, Subdomain::Fluid);
            let s: f64 = dm.basis_integrals(&m).iter().sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
        // bubble integral against quadrature
        let dm = build_dofmap(&m, ElementFamily::MiniBubble, Subdomain::Fluid);
        let ints = dm.basis_integrals(&m);
        let q = crate::elements::quadrature(4).unwrap();
        let g = cell_geometry(&m, dm.cells[0]);
        let b: f64 = q
            .iter()
            .map(|(p, w)| w * crate::elements::eval_bubble(p).0)
            .sum::<f64>()
            * 2.0
            * g.area();
        assert!((ints[dm.cell_dofs(0)[3]] - b).abs() < 1e-15);
    }
}
