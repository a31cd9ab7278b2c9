//! Matrices and load vectors for the four sub-steps of the decoupled scheme.
//!
//! Unknown layouts:
//! - Navier–Stokes: `[u1 | u2 | p | λ]`, with `u1`, `u2` on the MINI
//!   numbering, `p` on fluid P1 and `λ` the zero-mean multiplier.
//! - fluid / porous temperature: the P1 numbering of the subdomain.
//! - Darcy: `[u | φ | λ]` with `u` on BDM1 or RT0 and `φ` on P0.
//!
//! The parts of each matrix that do not change between time levels are
//! assembled once by [`Assembler::new`]; per step only the lagged convection
//! is added onto the fixed sparsity pattern.

use serde::{Deserialize, Serialize};

use crate::elements::{
    eval_hdiv, eval_mini, gauss_legendre_unit, p1_gradients, quadrature, ASSEMBLY_DEGREE,
};
use crate::error::AssemblyError;
use crate::linalg::{CsrMatrix, SparseSystem, TripletBuilder};
use crate::mesh::Subdomain;
use crate::randfield::ConductivitySample;
use crate::space::{
    cell_geometry, Analytic, DofMap, Spaces, FLUID_TEMPERATURE_TAGS, FLUID_VELOCITY_TAGS,
    POROUS_TEMPERATURE_TAGS, POROUS_VELOCITY_TAGS,
};
use crate::stepper::ProblemData;

/// Dimensionless parameters of the coupled model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalParams {
    pub pr: f64,
    pub ra: f64,
    pub c_a: f64,
    pub l: f64,
    pub k_f: f64,
    pub k_p: f64,
    pub gamma: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self {
            pr: 1.0,
            ra: 1.0,
            c_a: 1.0,
            l: 1.0,
            k_f: 1.0,
            k_p: 1.0,
            gamma: 1e5,
        }
    }
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<(), AssemblyError> {
        let positive = [
            ("pr", self.pr),
            ("c_a", self.c_a),
            ("l", self.l),
            ("k_f", self.k_f),
            ("k_p", self.k_p),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(AssemblyError::InvalidParameter { name, value });
            }
        }
        // Ra = 0 switches buoyancy off
        for (name, value) in [("ra", self.ra), ("gamma", self.gamma)] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(AssemblyError::InvalidParameter { name, value });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FormContext<'a> {
    pub params: PhysicalParams,
    pub sample: &'a ConductivitySample,
    pub dt: f64,
    /// The `h` of the `γ/h` interface factor.
    pub h_penalty: f64,
}

impl<'a> FormContext<'a> {
    /// Context with `h_penalty` set to the grid spacing of `spaces`.
    pub fn new(
        params: PhysicalParams,
        sample: &'a ConductivitySample,
        dt: f64,
        spaces: &Spaces,
    ) -> Result<Self, AssemblyError> {
        let ctx = Self {
            params,
            sample,
            dt,
            h_penalty: spaces.mesh.h_grid,
        };
        ctx.validate()?;
        Ok(ctx)
    }

    pub fn validate(&self) -> Result<(), AssemblyError> {
        self.params.validate()?;
        for (name, value) in [("dt", self.dt), ("h_penalty", self.h_penalty)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(AssemblyError::InvalidParameter { name, value });
            }
        }
        Ok(())
    }

    fn penalty(&self) -> f64 {
        self.params.k_f * self.params.gamma / self.h_penalty
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NsLayout {
    pub nv: usize,
    pub np: usize,
}

impl NsLayout {
    pub fn u(&self, c: usize) -> usize {
        c * self.nv
    }
    pub fn p(&self) -> usize {
        2 * self.nv
    }
    pub fn lambda(&self) -> usize {
        2 * self.nv + self.np
    }
    pub fn dim(&self) -> usize {
        2 * self.nv + self.np + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DarcyLayout {
    pub nu: usize,
    pub nphi: usize,
}

impl DarcyLayout {
    pub fn phi(&self) -> usize {
        self.nu
    }
    pub fn lambda(&self) -> usize {
        self.nu + self.nphi
    }
    pub fn dim(&self) -> usize {
        self.nu + self.nphi + 1
    }
}

#[derive(Debug, Clone)]
struct FluidQp {
    w: f64,
    x: [f64; 2],
    mini: [f64; 4],
    dmini: [[f64; 2]; 4],
    bary: [f64; 3],
}

#[derive(Debug, Clone)]
struct PorousQp {
    w: f64,
    x: [f64; 2],
    bary: [f64; 3],
    k: f64,
    /// Signed basis values (orientation applied).
    hdiv: [[f64; 2]; 6],
}

/// Cached quadrature data, fixed matrices and scatter positions for one
/// sample and time step.
#[derive(Debug, Clone)]
pub struct Assembler<'a> {
    spaces: &'a Spaces,
    ctx: FormContext<'a>,
    nq: usize,
    fluid_qp: Vec<FluidQp>,
    fluid_dp1: Vec<[[f64; 2]; 3]>,
    porous_qp: Vec<PorousQp>,
    porous_dp1: Vec<[[f64; 2]; 3]>,
    porous_div: Vec<[f64; 6]>,
    ns_base: CsrMatrix,
    ns_conv: Vec<usize>,
    thf_base: CsrMatrix,
    thf_conv: Vec<usize>,
    thp_base: CsrMatrix,
    thp_conv: Vec<usize>,
    darcy: CsrMatrix,
}

fn check_len(field: &'static str, v: &[f64], expected: usize) -> Result<(), AssemblyError> {
    if v.len() != expected {
        return Err(AssemblyError::LengthMismatch {
            field,
            expected,
            found: v.len(),
        });
    }
    Ok(())
}

fn positions(m: &CsrMatrix, rows: &[usize], cols: &[usize], out: &mut Vec<usize>) {
    for &i in rows {
        for &j in cols {
            out.push(m.position(i, j).expect("convection entry in pattern"));
        }
    }
}

/// Two-point Gauss rule on `[0, 1]`, exact for the P1×P1 trace products.
fn edge_rule() -> (Vec<f64>, Vec<f64>) {
    gauss_legendre_unit(2)
}

impl<'a> Assembler<'a> {
    pub fn new(spaces: &'a Spaces, ctx: FormContext<'a>) -> Result<Self, AssemblyError> {
        ctx.validate()?;
        let q = quadrature(ASSEMBLY_DEGREE).expect("assembly degree supported");
        let nq = q.len();
        let mesh = &spaces.mesh;

        let mut fluid_qp = Vec::with_capacity(nq * spaces.velocity_f.n_cells());
        let mut fluid_dp1 = Vec::with_capacity(spaces.velocity_f.n_cells());
        for &t in &spaces.velocity_f.cells {
            let geom = cell_geometry(mesh, t);
            fluid_dp1.push(p1_gradients(&geom));
            for (p, w) in q.iter() {
                let (mini, dmini) = eval_mini(&geom, p);
                fluid_qp.push(FluidQp {
                    w: w * geom.det,
                    x: geom.map(p),
                    mini,
                    dmini,
                    bary: *p,
                });
            }
        }

        let fam = spaces
            .velocity_p
            .family
            .hdiv()
            .ok_or(AssemblyError::MissingSpace("Darcy velocity"))?;
        let mut porous_qp = Vec::with_capacity(nq * spaces.velocity_p.n_cells());
        let mut porous_dp1 = Vec::with_capacity(spaces.velocity_p.n_cells());
        let mut porous_div = Vec::with_capacity(spaces.velocity_p.n_cells());
        for (c, &t) in spaces.velocity_p.cells.iter().enumerate() {
            let geom = cell_geometry(mesh, t);
            porous_dp1.push(p1_gradients(&geom));
            let signs = spaces.velocity_p.cell_signs(c);
            let mut div = [0.0; 6];
            for (p, w) in q.iter() {
                let e = eval_hdiv(fam, &geom, p).expect("positively oriented cell");
                let mut hdiv = [[0.0; 2]; 6];
                for i in 0..e.n {
                    hdiv[i] = [signs[i] * e.values[i][0], signs[i] * e.values[i][1]];
                    div[i] = signs[i] * e.divs[i];
                }
                let x = geom.map(p);
                let k = ctx.sample.k(x);
                if !(k > 0.0) {
                    return Err(AssemblyError::NonpositiveConductivity {
                        value: k,
                        x: x[0],
                        y: x[1],
                    });
                }
                porous_qp.push(PorousQp {
                    w: w * geom.det,
                    x,
                    bary: *p,
                    k,
                    hdiv,
                });
            }
            porous_div.push(div);
        }

        let mut a = Self {
            spaces,
            ctx,
            nq,
            fluid_qp,
            fluid_dp1,
            porous_qp,
            porous_dp1,
            porous_div,
            ns_base: CsrMatrix::default(),
            ns_conv: Vec::new(),
            thf_base: CsrMatrix::default(),
            thf_conv: Vec::new(),
            thp_base: CsrMatrix::default(),
            thp_conv: Vec::new(),
            darcy: CsrMatrix::default(),
        };
        a.build_ns_base();
        a.thf_base = a.build_theta_base(Subdomain::Fluid);
        a.thp_base = a.build_theta_base(Subdomain::Porous);
        a.thf_conv = a.theta_positions(Subdomain::Fluid);
        a.thp_conv = a.theta_positions(Subdomain::Porous);
        a.darcy = a.build_darcy();
        Ok(a)
    }

    pub fn ns_layout(&self) -> NsLayout {
        NsLayout {
            nv: self.spaces.velocity_f.n_dofs,
            np: self.spaces.pressure_f.n_dofs,
        }
    }

    pub fn darcy_layout(&self) -> DarcyLayout {
        DarcyLayout {
            nu: self.spaces.velocity_p.n_dofs,
            nphi: self.spaces.pressure_p.n_dofs,
        }
    }

    pub fn context(&self) -> &FormContext<'a> {
        &self.ctx
    }

    fn fqp(&self, cell: usize) -> &[FluidQp] {
        &self.fluid_qp[cell * self.nq..(cell + 1) * self.nq]
    }

    fn pqp(&self, cell: usize) -> &[PorousQp] {
        &self.porous_qp[cell * self.nq..(cell + 1) * self.nq]
    }

    fn build_ns_base(&mut self) {
        let sp = self.spaces;
        let lay = self.ns_layout();
        let (dt, pr) = (self.ctx.dt, self.ctx.params.pr);
        let mut tb =
            TripletBuilder::with_capacity(lay.dim(), sp.velocity_f.n_cells() * 2 * (16 + 24));
        for c in 0..sp.velocity_f.n_cells() {
            let vd = sp.velocity_f.cell_dofs(c);
            let pd = sp.pressure_f.cell_dofs(c);
            let mut a = [[0.0; 4]; 4];
            let mut b = [[[0.0; 3]; 4]; 2];
            for q in self.fqp(c) {
                for i in 0..4 {
                    for j in 0..4 {
                        let grad = q.dmini[i][0] * q.dmini[j][0] + q.dmini[i][1] * q.dmini[j][1];
                        a[i][j] += q.w * (q.mini[i] * q.mini[j] / dt + pr * grad);
                    }
                    for (comp, bc) in b.iter_mut().enumerate() {
                        for j in 0..3 {
                            bc[i][j] += q.w * q.bary[j] * q.dmini[i][comp];
                        }
                    }
                }
            }
            for comp in 0..2 {
                let off = lay.u(comp);
                for i in 0..4 {
                    for j in 0..4 {
                        tb.push(off + vd[i], off + vd[j], a[i][j]);
                    }
                    for j in 0..3 {
                        // −(p, ∇·v) and +(q, ∇·u)
                        tb.push(off + vd[i], lay.p() + pd[j], -b[comp][i][j]);
                        tb.push(lay.p() + pd[j], off + vd[i], b[comp][i][j]);
                    }
                }
            }
        }
        for (d, m) in sp
            .pressure_f
            .basis_integrals(&sp.mesh)
            .into_iter()
            .enumerate()
        {
            tb.push(lay.p() + d, lay.lambda(), m);
            tb.push(lay.lambda(), lay.p() + d, m);
        }
        let m = tb.build();
        let mut pos = Vec::with_capacity(sp.velocity_f.n_cells() * 32);
        for c in 0..sp.velocity_f.n_cells() {
            let vd = sp.velocity_f.cell_dofs(c);
            for comp in 0..2 {
                let ids: Vec<usize> = vd.iter().map(|&d| lay.u(comp) + d).collect();
                positions(&m, &ids, &ids, &mut pos);
            }
        }
        self.ns_base = m;
        self.ns_conv = pos;
    }

    fn theta_space(&self, sub: Subdomain) -> &'a DofMap {
        match sub {
            Subdomain::Fluid => &self.spaces.theta_f,
            Subdomain::Porous => &self.spaces.theta_p,
        }
    }

    /// `(1/Δt) M + k ∇∇ + (k_f γ / h) ∫_Ι` on one temperature space.
    fn build_theta_base(&self, sub: Subdomain) -> CsrMatrix {
        let sp = self.theta_space(sub);
        let dt = self.ctx.dt;
        let kappa = match sub {
            Subdomain::Fluid => self.ctx.params.k_f,
            Subdomain::Porous => self.ctx.params.k_p,
        };
        let mut tb = TripletBuilder::with_capacity(sp.n_dofs, 9 * sp.n_cells());
        for c in 0..sp.n_cells() {
            let d = sp.cell_dofs(c);
            let (bary, w, g): (Vec<[f64; 3]>, Vec<f64>, [[f64; 2]; 3]) = match sub {
                Subdomain::Fluid => (
                    self.fqp(c).iter().map(|q| q.bary).collect(),
                    self.fqp(c).iter().map(|q| q.w).collect(),
                    self.fluid_dp1[c],
                ),
                Subdomain::Porous => (
                    self.pqp(c).iter().map(|q| q.bary).collect(),
                    self.pqp(c).iter().map(|q| q.w).collect(),
                    self.porous_dp1[c],
                ),
            };
            let area: f64 = w.iter().sum();
            for i in 0..3 {
                for j in 0..3 {
                    let mass: f64 = bary.iter().zip(&w).map(|(b, w)| w * b[i] * b[j]).sum();
                    let stiff = area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                    tb.push(d[i], d[j], mass / dt + kappa * stiff);
                }
            }
        }
        let pen = self.ctx.penalty();
        for (i, j, v) in self.interface_mass(sub, sub) {
            tb.push(i, j, pen * v);
        }
        tb.build()
    }

    fn theta_positions(&self, sub: Subdomain) -> Vec<usize> {
        let sp = self.theta_space(sub);
        let m = match sub {
            Subdomain::Fluid => &self.thf_base,
            Subdomain::Porous => &self.thp_base,
        };
        let mut pos = Vec::with_capacity(9 * sp.n_cells());
        for c in 0..sp.n_cells() {
            let d = sp.cell_dofs(c);
            positions(m, d, d, &mut pos);
        }
        pos
    }

    /// Triplets of `∫_Ι φ_i ψ_j dl` with `φ` on the `test` trace space and
    /// `ψ` on the `trial` trace space.
    pub fn interface_mass(&self, test: Subdomain, trial: Subdomain) -> Vec<(usize, usize, f64)> {
        let mesh = &self.spaces.mesh;
        let (ts, rs) = (self.theta_space(test), self.theta_space(trial));
        let (tau, w) = edge_rule();
        let mut out = Vec::with_capacity(4 * self.spaces.interface.len());
        for ie in &self.spaces.interface {
            let vs = mesh.edges[ie.edge].vertices;
            for (a, &va) in vs.iter().enumerate() {
                for (b, &vb) in vs.iter().enumerate() {
                    let v: f64 = tau
                        .iter()
                        .zip(&w)
                        .map(|(s, w)| {
                            let phi = [1.0 - s, *s];
                            w * phi[a] * phi[b]
                        })
                        .sum::<f64>()
                        * ie.length;
                    let i = ts.vertex_dof(va).expect("interface vertex in test space");
                    let j = rs.vertex_dof(vb).expect("interface vertex in trial space");
                    out.push((i, j, v));
                }
            }
        }
        out
    }

    fn build_darcy(&self) -> CsrMatrix {
        let sp = self.spaces;
        let lay = self.darcy_layout();
        let p = &self.ctx.params;
        let l2 = p.l * p.l;
        let mass_coef = p.c_a / (l2 * self.ctx.dt);
        let n = sp.velocity_p.dofs_per_cell();
        let mut tb =
            TripletBuilder::with_capacity(lay.dim(), sp.velocity_p.n_cells() * (n * n + 2 * n + 2));
        for c in 0..sp.velocity_p.n_cells() {
            let ud = sp.velocity_p.cell_dofs(c);
            let pd = sp.pressure_p.cell_dofs(c)[0];
            let div = self.porous_div[c];
            let mut kint = 0.0;
            let mut a = [[0.0; 6]; 6];
            for q in self.pqp(c) {
                kint += q.w * q.k;
                for i in 0..n {
                    for j in 0..n {
                        let dot = q.hdiv[i][0] * q.hdiv[j][0] + q.hdiv[i][1] * q.hdiv[j][1];
                        a[i][j] += q.w * (mass_coef * q.k + p.pr) * dot;
                    }
                }
            }
            for i in 0..n {
                for j in 0..n {
                    tb.push(ud[i], ud[j], a[i][j]);
                }
                // ∇·v is constant on the cell and ψ is its indicator
                let bij = kint * div[i] / l2;
                tb.push(ud[i], lay.phi() + pd, -bij);
                tb.push(lay.phi() + pd, ud[i], bij);
            }
        }
        for (d, m) in sp
            .pressure_p
            .basis_integrals(&sp.mesh)
            .into_iter()
            .enumerate()
        {
            tb.push(lay.phi() + d, lay.lambda(), m);
            tb.push(lay.lambda(), lay.phi() + d, m);
        }
        tb.build()
    }

    /// Fluid velocity `u_h` at every fluid quadrature point.
    fn fluid_velocity_at_qp(&self, u: &[f64]) -> Vec<[f64; 2]> {
        let sp = &self.spaces.velocity_f;
        let nv = sp.n_dofs;
        let mut out = Vec::with_capacity(self.fluid_qp.len());
        for c in 0..sp.n_cells() {
            let d = sp.cell_dofs(c);
            for q in self.fqp(c) {
                let mut w = [0.0; 2];
                for i in 0..4 {
                    w[0] += u[d[i]] * q.mini[i];
                    w[1] += u[nv + d[i]] * q.mini[i];
                }
                out.push(w);
            }
        }
        out
    }

    fn porous_velocity_at_qp(&self, u: &[f64]) -> Vec<[f64; 2]> {
        let sp = &self.spaces.velocity_p;
        let n = sp.dofs_per_cell();
        let mut out = Vec::with_capacity(self.porous_qp.len());
        for c in 0..sp.n_cells() {
            let d = sp.cell_dofs(c);
            for q in self.pqp(c) {
                let mut w = [0.0; 2];
                for i in 0..n {
                    w[0] += u[d[i]] * q.hdiv[i][0];
                    w[1] += u[d[i]] * q.hdiv[i][1];
                }
                out.push(w);
            }
        }
        out
    }

    /// Skew convection blocks `½(N − Nᵀ)` of `c(w, ·, ·)` on the MINI
    /// space, one 4×4 block per fluid cell.
    pub fn ns_convection_blocks(&self, u_old: &[f64]) -> Vec<[[f64; 4]; 4]> {
        let w = self.fluid_velocity_at_qp(u_old);
        (0..self.spaces.velocity_f.n_cells())
            .map(|c| {
                let mut nmat = [[0.0; 4]; 4];
                for (k, q) in self.fqp(c).iter().enumerate() {
                    let wq = w[c * self.nq + k];
                    for j in 0..4 {
                        let adv = wq[0] * q.dmini[j][0] + wq[1] * q.dmini[j][1];
                        for i in 0..4 {
                            nmat[i][j] += q.w * adv * q.mini[i];
                        }
                    }
                }
                skew(&nmat)
            })
            .collect()
    }

    /// Skew convection blocks of `t_f` or `t_p` on the P1 temperature space.
    pub fn theta_convection_blocks(&self, sub: Subdomain, velocity: &[f64]) -> Vec<[[f64; 3]; 3]> {
        let (w, ncell) = match sub {
            Subdomain::Fluid => (
                self.fluid_velocity_at_qp(velocity),
                self.spaces.theta_f.n_cells(),
            ),
            Subdomain::Porous => (
                self.porous_velocity_at_qp(velocity),
                self.spaces.theta_p.n_cells(),
            ),
        };
        (0..ncell)
            .map(|c| {
                let (g, ws, bs): ([[f64; 2]; 3], Vec<f64>, Vec<[f64; 3]>) = match sub {
                    Subdomain::Fluid => (
                        self.fluid_dp1[c],
                        self.fqp(c).iter().map(|q| q.w).collect(),
                        self.fqp(c).iter().map(|q| q.bary).collect(),
                    ),
                    Subdomain::Porous => (
                        self.porous_dp1[c],
                        self.pqp(c).iter().map(|q| q.w).collect(),
                        self.pqp(c).iter().map(|q| q.bary).collect(),
                    ),
                };
                let mut nmat = [[0.0; 3]; 3];
                for k in 0..self.nq {
                    let wq = w[c * self.nq + k];
                    for j in 0..3 {
                        let adv = wq[0] * g[j][0] + wq[1] * g[j][1];
                        for i in 0..3 {
                            nmat[i][j] += ws[k] * adv * bs[k][i];
                        }
                    }
                }
                skew(&nmat)
            })
            .collect()
    }

    fn velocity_constraints(&self, problem: &dyn ProblemData, t: f64) -> Vec<(usize, f64)> {
        let sp = self.spaces;
        let nv = sp.velocity_f.n_dofs;
        let mut out = Vec::new();
        for comp in 0..2 {
            let g = |x: [f64; 2]| problem.velocity_f(x, t)[comp];
            let vals = sp
                .velocity_f
                .dirichlet_values(&sp.mesh, &FLUID_VELOCITY_TAGS, Analytic::Scalar(&g))
                .expect("fluid boundary tags present");
            out.extend(vals.into_iter().map(|(d, v)| (comp * nv + d, v)));
        }
        out
    }

    /// Step 1 system at `t_next`.
    pub fn ns(
        &self,
        u_old: &[f64],
        theta_f_old: &[f64],
        problem: &dyn ProblemData,
        t_next: f64,
    ) -> Result<SparseSystem, AssemblyError> {
        let sp = self.spaces;
        let lay = self.ns_layout();
        check_len("u_f", u_old, 2 * lay.nv)?;
        check_len("theta_f", theta_f_old, sp.theta_f.n_dofs)?;
        let p = &self.ctx.params;
        let dt = self.ctx.dt;

        let mut m = self.ns_base.clone();
        let mut k = 0;
        for blk in self.ns_convection_blocks(u_old) {
            for _comp in 0..2 {
                for row in &blk {
                    for v in row {
                        m.values[self.ns_conv[k]] += v;
                        k += 1;
                    }
                }
            }
        }

        let mut rhs = vec![0.0; lay.dim()];
        let w = self.fluid_velocity_at_qp(u_old);
        for c in 0..sp.velocity_f.n_cells() {
            let vd = sp.velocity_f.cell_dofs(c);
            let td = sp.theta_f.cell_dofs(c);
            for (kq, q) in self.fqp(c).iter().enumerate() {
                let th: f64 = (0..3).map(|i| theta_f_old[td[i]] * q.bary[i]).sum();
                let f = problem.fluid_force(q.x, t_next);
                let uo = w[c * self.nq + kq];
                let load = [uo[0] / dt + f[0], uo[1] / dt + p.pr * p.ra * th + f[1]];
                for i in 0..4 {
                    rhs[lay.u(0) + vd[i]] += q.w * load[0] * q.mini[i];
                    rhs[lay.u(1) + vd[i]] += q.w * load[1] * q.mini[i];
                }
            }
        }
        let mut sys = SparseSystem::new(m, rhs).expect("layout dimensions agree");
        sys.apply_constraints(&self.velocity_constraints(problem, t_next));
        Ok(sys)
    }

    /// Step 2 system at `t_next`.
    pub fn theta_f(
        &self,
        u_f_old: &[f64],
        theta_f_old: &[f64],
        theta_p_old: &[f64],
        problem: &dyn ProblemData,
        t_next: f64,
    ) -> Result<SparseSystem, AssemblyError> {
        let sp = self.spaces;
        check_len("u_f", u_f_old, 2 * sp.velocity_f.n_dofs)?;
        check_len("theta_f", theta_f_old, sp.theta_f.n_dofs)?;
        check_len("theta_p", theta_p_old, sp.theta_p.n_dofs)?;
        let mut m = self.thf_base.clone();
        add_blocks(
            &mut m,
            &self.thf_conv,
            &self.theta_convection_blocks(Subdomain::Fluid, u_f_old),
        );

        let mut rhs = self.theta_load(Subdomain::Fluid, theta_f_old, &|x| {
            problem.fluid_heat(x, t_next)
        });
        let kf = self.ctx.params.k_f;
        for (r, g) in rhs.iter_mut().zip(interface_flux_vector(
            self.spaces,
            theta_f_old,
            Subdomain::Fluid,
        )) {
            *r += kf * g;
        }
        let pen = self.ctx.penalty();
        for (i, j, v) in self.interface_mass(Subdomain::Fluid, Subdomain::Porous) {
            rhs[i] += pen * v * theta_p_old[j];
        }
        let mut sys = SparseSystem::new(m, rhs).expect("layout dimensions agree");
        let g = |x: [f64; 2]| problem.theta_f(x, t_next);
        let bc = sp
            .theta_f
            .dirichlet_values(&sp.mesh, &FLUID_TEMPERATURE_TAGS, Analytic::Scalar(&g))
            .expect("fluid boundary tags present");
        sys.apply_constraints(&bc);
        Ok(sys)
    }

    /// Step 3 system at `t_next`. The matrix does not depend on the step.
    pub fn darcy(
        &self,
        u_p_old: &[f64],
        theta_p_old: &[f64],
        problem: &dyn ProblemData,
        t_next: f64,
    ) -> Result<SparseSystem, AssemblyError> {
        let sp = self.spaces;
        let lay = self.darcy_layout();
        check_len("u_p", u_p_old, lay.nu)?;
        check_len("theta_p", theta_p_old, sp.theta_p.n_dofs)?;
        let p = &self.ctx.params;
        let l2 = p.l * p.l;
        let mass_coef = p.c_a / (l2 * self.ctx.dt);
        let w = self.porous_velocity_at_qp(u_p_old);
        let n = sp.velocity_p.dofs_per_cell();
        let mut rhs = vec![0.0; lay.dim()];
        let with_load = problem.has_darcy_load();
        for c in 0..sp.velocity_p.n_cells() {
            let ud = sp.velocity_p.cell_dofs(c);
            let td = sp.theta_p.cell_dofs(c);
            for (kq, q) in self.pqp(c).iter().enumerate() {
                let th: f64 = (0..3).map(|i| theta_p_old[td[i]] * q.bary[i]).sum();
                let uo = w[c * self.nq + kq];
                let mut load = [
                    mass_coef * q.k * uo[0],
                    mass_coef * q.k * uo[1] + p.pr * p.ra * q.k * th / l2,
                ];
                if with_load {
                    let f = problem.darcy_load(q.x, t_next);
                    load[0] += f[0];
                    load[1] += f[1];
                }
                for i in 0..n {
                    rhs[ud[i]] += q.w * (load[0] * q.hdiv[i][0] + load[1] * q.hdiv[i][1]);
                }
            }
        }
        let mut sys = SparseSystem::new(self.darcy.clone(), rhs).expect("layout dimensions agree");
        let g = |x: [f64; 2]| problem.velocity_p(x, t_next);
        let bc = sp
            .velocity_p
            .dirichlet_values(&sp.mesh, &POROUS_VELOCITY_TAGS, Analytic::Vector(&g))
            .expect("porous boundary tags present");
        sys.apply_constraints(&bc);
        Ok(sys)
    }

    /// Step 4 system at `t_next`.
    #[allow(clippy::too_many_arguments)]
    pub fn theta_p(
        &self,
        u_p_old: &[f64],
        theta_p_old: &[f64],
        theta_f_new: &[f64],
        theta_f_old: &[f64],
        problem: &dyn ProblemData,
        t_next: f64,
    ) -> Result<SparseSystem, AssemblyError> {
        let sp = self.spaces;
        check_len("u_p", u_p_old, sp.velocity_p.n_dofs)?;
        check_len("theta_p", theta_p_old, sp.theta_p.n_dofs)?;
        check_len("theta_f", theta_f_new, sp.theta_f.n_dofs)?;
        check_len("theta_f", theta_f_old, sp.theta_f.n_dofs)?;
        let mut m = self.thp_base.clone();
        add_blocks(
            &mut m,
            &self.thp_conv,
            &self.theta_convection_blocks(Subdomain::Porous, u_p_old),
        );

        let mut rhs = self.theta_load(Subdomain::Porous, theta_p_old, &|x| {
            problem.porous_heat(x, t_next)
        });
        let kf = self.ctx.params.k_f;
        for (r, g) in rhs.iter_mut().zip(interface_flux_vector(
            self.spaces,
            theta_f_old,
            Subdomain::Porous,
        )) {
            *r -= kf * g;
        }
        let pen = self.ctx.penalty();
        for (i, j, v) in self.interface_mass(Subdomain::Porous, Subdomain::Fluid) {
            rhs[i] += pen * v * theta_f_new[j];
        }
        let mut sys = SparseSystem::new(m, rhs).expect("layout dimensions agree");
        let g = |x: [f64; 2]| problem.theta_p(x, t_next);
        let bc = sp
            .theta_p
            .dirichlet_values(&sp.mesh, &POROUS_TEMPERATURE_TAGS, Analytic::Scalar(&g))
            .expect("porous boundary tags present");
        sys.apply_constraints(&bc);
        Ok(sys)
    }

    /// `(1/Δt)(θ_old, φ) + (source, φ)` on one temperature space.
    fn theta_load(
        &self,
        sub: Subdomain,
        theta_old: &[f64],
        source: &dyn Fn([f64; 2]) -> f64,
    ) -> Vec<f64> {
        let sp = self.theta_space(sub);
        let dt = self.ctx.dt;
        let mut rhs = vec![0.0; sp.n_dofs];
        for c in 0..sp.n_cells() {
            let d = sp.cell_dofs(c);
            let pts: Vec<(f64, [f64; 2], [f64; 3])> = match sub {
                Subdomain::Fluid => self.fqp(c).iter().map(|q| (q.w, q.x, q.bary)).collect(),
                Subdomain::Porous => self.pqp(c).iter().map(|q| (q.w, q.x, q.bary)).collect(),
            };
            for (w, x, b) in pts {
                let th: f64 = (0..3).map(|i| theta_old[d[i]] * b[i]).sum();
                let f = th / dt + source(x);
                for i in 0..3 {
                    rhs[d[i]] += w * f * b[i];
                }
            }
        }
        rhs
    }
}

fn skew<const N: usize>(n: &[[f64; N]; N]) -> [[f64; N]; N] {
    let mut c = [[0.0; N]; N];
    for i in 0..N {
        for j in 0..N {
            c[i][j] = 0.5 * (n[i][j] - n[j][i]);
        }
    }
    c
}

fn add_blocks(m: &mut CsrMatrix, pos: &[usize], blocks: &[[[f64; 3]; 3]]) {
    let mut k = 0;
    for blk in blocks {
        for row in blk {
            for v in row {
                m.values[pos[k]] += v;
                k += 1;
            }
        }
    }
}

/// `∫_Ι (n_f·∇θ_f^h) φ dl` for every trace basis function `φ` of the fluid
/// or porous temperature space, with the one-sided gradient taken on the
/// fluid triangle of each interface edge.
pub fn interface_flux_vector(spaces: &Spaces, theta_f: &[f64], target: Subdomain) -> Vec<f64> {
    let mesh = &spaces.mesh;
    let tf = &spaces.theta_f;
    let ts = match target {
        Subdomain::Fluid => &spaces.theta_f,
        Subdomain::Porous => &spaces.theta_p,
    };
    let n_f = [0.0, -1.0];
    let mut out = vec![0.0; ts.n_dofs];
    for ie in &spaces.interface {
        let c = tf
            .local_cell_of(ie.fluid_triangle)
            .expect("fluid triangle in fluid space");
        let g = p1_gradients(&cell_geometry(mesh, ie.fluid_triangle));
        let d = tf.cell_dofs(c);
        let mut grad = [0.0; 2];
        for i in 0..3 {
            grad[0] += theta_f[d[i]] * g[i][0];
            grad[1] += theta_f[d[i]] * g[i][1];
        }
        let flux = n_f[0] * grad[0] + n_f[1] * grad[1];
        for v in mesh.edges[ie.edge].vertices {
            out[ts.vertex_dof(v).expect("interface vertex in target space")] +=
                flux * ie.length / 2.0;
        }
    }
    out
}

/// Step 1 system built from scratch; see [`Assembler::ns`].
pub fn assemble_ns(
    ctx: &FormContext<'_>,
    u_old: &[f64],
    theta_f_old: &[f64],
    t_next: f64,
    spaces: &Spaces,
    problem: &dyn ProblemData,
) -> Result<SparseSystem, AssemblyError> {
    Assembler::new(spaces, ctx.clone())?.ns(u_old, theta_f_old, problem, t_next)
}

/// Step 2 system built from scratch; see [`Assembler::theta_f`].
pub fn assemble_theta_f(
    ctx: &FormContext<'_>,
    u_f_old: &[f64],
    theta_f_old: &[f64],
    theta_p_old: &[f64],
    t_next: f64,
    spaces: &Spaces,
    problem: &dyn ProblemData,
) -> Result<SparseSystem, AssemblyError> {
    Assembler::new(spaces, ctx.clone())?.theta_f(u_f_old, theta_f_old, theta_p_old, problem, t_next)
}

/// Step 3 system built from scratch; see [`Assembler::darcy`].
pub fn assemble_darcy(
    ctx: &FormContext<'_>,
    u_p_old: &[f64],
    theta_p_old: &[f64],
    t_next: f64,
    spaces: &Spaces,
    problem: &dyn ProblemData,
) -> Result<SparseSystem, AssemblyError> {
    Assembler::new(spaces, ctx.clone())?.darcy(u_p_old, theta_p_old, problem, t_next)
}

/// Step 4 system built from scratch; see [`Assembler::theta_p`].
#[allow(clippy::too_many_arguments)]
pub fn assemble_theta_p(
    ctx: &FormContext<'_>,
    u_p_old: &[f64],
    theta_p_old: &[f64],
    theta_f_new: &[f64],
    theta_f_old: &[f64],
    t_next: f64,
    spaces: &Spaces,
    problem: &dyn ProblemData,
) -> Result<SparseSystem, AssemblyError> {
    Assembler::new(spaces, ctx.clone())?.theta_p(
        u_p_old,
        theta_p_old,
        theta_f_new,
        theta_f_old,
        problem,
        t_next,
    )
}

#[cfg(any(test, feature = "oracle"))]
pub mod oracle;

#[cfg(test)]
mod tests;
