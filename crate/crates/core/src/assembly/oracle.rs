//! Dense brute-force assembly used as a test oracle. Basis functions are
//! built directly in physical coordinates: P1 hats by inverting the vertex
//! Vandermonde matrix, the bubble as `27 λ0 λ1 λ2`, and H(div) bases by
//! inverting the edge-moment matrix of the full polynomial space.

use crate::assembly::FormContext;
use crate::elements::{quadrature, ElementFamily, ASSEMBLY_DEGREE};
use crate::mesh::Subdomain;
use crate::space::{
    Analytic, DofMap, Spaces, FLUID_TEMPERATURE_TAGS, FLUID_VELOCITY_TAGS, POROUS_TEMPERATURE_TAGS,
    POROUS_VELOCITY_TAGS,
};
use crate::stepper::{CoupledState, ProblemData};

pub type Dense = Vec<Vec<f64>>;

fn zeros(n: usize) -> Dense {
    vec![vec![0.0; n]; n]
}

fn inverse3(m: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
            let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
            inv[i][j] = (m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]) / det;
        }
    }
    inv
}

/// Gaussian elimination with partial pivoting.
pub fn dense_solve(a: &Dense, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Dense = a.clone();
    let mut x = b.to_vec();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs()))
            .unwrap();
        m.swap(k, p);
        x.swap(k, p);
        assert!(m[k][k] != 0.0, "oracle matrix singular at column {k}");
        for i in k + 1..n {
            let f = m[i][k] / m[k][k];
            if f != 0.0 {
                for j in k..n {
                    m[i][j] -= f * m[k][j];
                }
                x[i] -= f * x[k];
            }
        }
    }
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| m[k][j] * x[j]).sum();
        x[k] = (x[k] - s) / m[k][k];
    }
    x
}

/// Symmetric elimination: constrained rows become identity rows, and the
/// constrained columns move to the right-hand side.
pub fn constrain(a: &mut Dense, b: &mut [f64], fixed: &[(usize, f64)]) {
    let n = b.len();
    let mut val = vec![None; n];
    for &(d, g) in fixed {
        val[d] = Some(g);
    }
    for i in 0..n {
        if let Some(g) = val[i] {
            for j in 0..n {
                a[i][j] = if i == j { 1.0 } else { 0.0 };
            }
            b[i] = g;
        } else {
            for j in 0..n {
                if let Some(g) = val[j] {
                    b[i] -= a[i][j] * g;
                    a[i][j] = 0.0;
                }
            }
        }
    }
}

/// One cell in physical coordinates.
struct Cell {
    v: [[f64; 2]; 3],
    area: f64,
    /// Hat `i` is `c[i][0] + c[i][1] x + c[i][2] y`.
    hat: [[f64; 3]; 3],
}

impl Cell {
    fn new(spaces: &Spaces, tri: usize) -> Self {
        let v = spaces.mesh.triangle_coords(tri);
        let vander = [
            [1.0, v[0][0], v[0][1]],
            [1.0, v[1][0], v[1][1]],
            [1.0, v[2][0], v[2][1]],
        ];
        let inv = inverse3(vander);
        let hat = std::array::from_fn(|i| [inv[0][i], inv[1][i], inv[2][i]]);
        let area = 0.5
            * ((v[1][0] - v[0][0]) * (v[2][1] - v[0][1])
                - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]))
                .abs();
        Self { v, area, hat }
    }

    /// Physical quadrature points and weights.
    fn points(&self) -> Vec<([f64; 2], f64)> {
        let q = quadrature(ASSEMBLY_DEGREE).unwrap();
        q.iter()
            .map(|(b, w)| {
                let x = [
                    b[0] * self.v[0][0] + b[1] * self.v[1][0] + b[2] * self.v[2][0],
                    b[0] * self.v[0][1] + b[1] * self.v[1][1] + b[2] * self.v[2][1],
                ];
                (x, 2.0 * self.area * w)
            })
            .collect()
    }

    fn lambda(&self, x: [f64; 2]) -> [f64; 3] {
        self.hat.map(|c| c[0] + c[1] * x[0] + c[2] * x[1])
    }

    fn grad_lambda(&self) -> [[f64; 2]; 3] {
        self.hat.map(|c| [c[1], c[2]])
    }

    /// MINI values and gradients: three hats then the bubble.
    fn mini(&self, x: [f64; 2]) -> ([f64; 4], [[f64; 2]; 4]) {
        let l = self.lambda(x);
        let g = self.grad_lambda();
        let b = 27.0 * l[0] * l[1] * l[2];
        let gb = std::array::from_fn(|k| {
            27.0 * (g[0][k] * l[1] * l[2] + l[0] * g[1][k] * l[2] + l[0] * l[1] * g[2][k])
        });
        ([l[0], l[1], l[2], b], [g[0], g[1], g[2], gb])
    }
}

/// H(div) basis on a cell in global edge orientation, as `(dof, coeffs)` with
/// the field `(a0 + a1 x + a2 y, b0 + b1 x + b2 y)`.
fn hdiv_basis(spaces: &Spaces, dm: &DofMap, tri: usize) -> Vec<(usize, [f64; 6])> {
    let mesh = &spaces.mesh;
    let t = &mesh.triangles[tri];
    let bdm = dm.family == ElementFamily::Bdm1;
    // candidate spanning set
    let cands: Vec<[f64; 6]> = if bdm {
        (0..6)
            .map(|k| std::array::from_fn(|i| if i == k { 1.0 } else { 0.0 }))
            .collect()
    } else {
        vec![
            [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        ]
    };
    let mut dofs = Vec::new();
    // moment functionals: (edge, weight function index)
    let mut funcs = Vec::new();
    for &e in &t.edges {
        let base = dm.edge_dof(e).unwrap();
        for m in 0..if bdm { 2 } else { 1 } {
            dofs.push(base + m);
            funcs.push((e, m));
        }
    }
    let n = cands.len();
    let moment = |c: &[f64; 6], e: usize, m: usize| -> f64 {
        let [a, b] = mesh.edges[e].vertices;
        let (pa, pb) = (mesh.vertices[a.min(b)], mesh.vertices[a.max(b)]);
        let tv = [pb[0] - pa[0], pb[1] - pa[1]];
        let nt = [tv[1], -tv[0]];
        let f = |s: f64| {
            let x = [pa[0] + s * tv[0], pa[1] + s * tv[1]];
            let v = [
                c[0] + c[1] * x[0] + c[2] * x[1],
                c[3] + c[4] * x[0] + c[5] * x[1],
            ];
            let w = if m == 0 { 1.0 } else { 2.0 * s - 1.0 };
            (v[0] * nt[0] + v[1] * nt[1]) * w
        };
        // Simpson is exact for the quadratic integrand.
        (f(0.0) + 4.0 * f(0.5) + f(1.0)) / 6.0
    };
    // mat[r][k] = moment r of candidate k; basis j = Σ_k inv[k][j] cand_k
    let mat: Dense = (0..n)
        .map(|r| {
            (0..n)
                .map(|k| moment(&cands[k], funcs[r].0, funcs[r].1))
                .collect()
        })
        .collect();
    let mut inv: Dense = zeros(n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = dense_solve(&mat, &e);
        for k in 0..n {
            inv[k][j] = col[k];
        }
    }
    (0..n)
        .map(|j| {
            let mut c = [0.0; 6];
            for k in 0..n {
                for i in 0..6 {
                    c[i] += inv[k][j] * cands[k][i];
                }
            }
            (dofs[j], c)
        })
        .collect()
}

fn eval_field(c: &[f64; 6], x: [f64; 2]) -> [f64; 2] {
    [
        c[0] + c[1] * x[0] + c[2] * x[1],
        c[3] + c[4] * x[0] + c[5] * x[1],
    ]
}

fn tri_dofs(dm: &DofMap, spaces: &Spaces, tri: usize) -> Vec<usize> {
    let t = &spaces.mesh.triangles[tri];
    let mut d: Vec<usize> = t
        .vertices
        .iter()
        .map(|&v| dm.vertex_dof(v).unwrap())
        .collect();
    if dm.family == ElementFamily::MiniBubble {
        let c = dm.local_cell_of(tri).unwrap();
        d.push(*dm.cell_dofs(c).last().unwrap());
    }
    d
}

fn fluid_cells(spaces: &Spaces) -> Vec<usize> {
    spaces.mesh.triangles_in(Subdomain::Fluid).collect()
}

fn porous_cells(spaces: &Spaces) -> Vec<usize> {
    spaces.mesh.triangles_in(Subdomain::Porous).collect()
}

fn scalar_at(
    dm: &DofMap,
    spaces: &Spaces,
    coeffs: &[f64],
    tri: usize,
    cell: &Cell,
    x: [f64; 2],
) -> f64 {
    let d = tri_dofs(dm, spaces, tri);
    if dm.family == ElementFamily::MiniBubble {
        let (v, _) = cell.mini(x);
        (0..4).map(|i| coeffs[d[i]] * v[i]).sum()
    } else {
        let l = cell.lambda(x);
        (0..3).map(|i| coeffs[d[i]] * l[i]).sum()
    }
}

pub fn dense_ns(
    spaces: &Spaces,
    ctx: &FormContext<'_>,
    u_old: &[f64],
    theta_f_old: &[f64],
    problem: &dyn ProblemData,
    t: f64,
) -> (Dense, Vec<f64>) {
    let nv = spaces.velocity_f.n_dofs;
    let np = spaces.pressure_f.n_dofs;
    let n = 2 * nv + np + 1;
    let (pr, ra, dt) = (ctx.params.pr, ctx.params.ra, ctx.dt);
    let mut a = zeros(n);
    let mut b = vec![0.0; n];
    for tri in fluid_cells(spaces) {
        let cell = Cell::new(spaces, tri);
        let vd = tri_dofs(&spaces.velocity_f, spaces, tri);
        let pd = tri_dofs(&spaces.pressure_f, spaces, tri);
        for (x, w) in cell.points() {
            let (phi, dphi) = cell.mini(x);
            let psi = cell.lambda(x);
            let wu = [0, 1].map(|c| (0..4).map(|i| u_old[c * nv + vd[i]] * phi[i]).sum::<f64>());
            let th = scalar_at(&spaces.theta_f, spaces, theta_f_old, tri, &cell, x);
            let f = problem.fluid_force(x, t);
            for comp in 0..2 {
                let off = comp * nv;
                for i in 0..4 {
                    for j in 0..4 {
                        let conv_ji = (wu[0] * dphi[j][0] + wu[1] * dphi[j][1]) * phi[i];
                        let conv_ij = (wu[0] * dphi[i][0] + wu[1] * dphi[i][1]) * phi[j];
                        a[off + vd[i]][off + vd[j]] += w
                            * (phi[i] * phi[j] / dt
                                + pr * (dphi[i][0] * dphi[j][0] + dphi[i][1] * dphi[j][1])
                                + 0.5 * (conv_ji - conv_ij));
                    }
                    for j in 0..3 {
                        let v = w * psi[j] * dphi[i][comp];
                        a[off + vd[i]][2 * nv + pd[j]] -= v;
                        a[2 * nv + pd[j]][off + vd[i]] += v;
                    }
                    let load = wu[comp] / dt + f[comp] + if comp == 1 { pr * ra * th } else { 0.0 };
                    b[off + vd[i]] += w * load * phi[i];
                }
            }
            for j in 0..3 {
                a[2 * nv + pd[j]][n - 1] += w * psi[j];
                a[n - 1][2 * nv + pd[j]] += w * psi[j];
            }
        }
    }
    let mut fixed = Vec::new();
    for comp in 0..2 {
        let g = |x: [f64; 2]| problem.velocity_f(x, t)[comp];
        for (d, v) in spaces
            .velocity_f
            .dirichlet_values(&spaces.mesh, &FLUID_VELOCITY_TAGS, Analytic::Scalar(&g))
            .unwrap()
        {
            fixed.push((comp * nv + d, v));
        }
    }
    constrain(&mut a, &mut b, &fixed);
    (a, b)
}

/// Temperature system for either subdomain. `other` is the temperature on
/// the opposite side entering the penalty; `theta_f_flux` feeds the
/// consistency term.
#[allow(clippy::too_many_arguments)]
fn dense_theta(
    spaces: &Spaces,
    ctx: &FormContext<'_>,
    sub: Subdomain,
    velocity: &[f64],
    theta_old: &[f64],
    other: &[f64],
    theta_f_flux: &[f64],
    problem: &dyn ProblemData,
    t: f64,
) -> (Dense, Vec<f64>) {
    let (dm, odm, cells, kappa) = match sub {
        Subdomain::Fluid => (
            &spaces.theta_f,
            &spaces.theta_p,
            fluid_cells(spaces),
            ctx.params.k_f,
        ),
        Subdomain::Porous => (
            &spaces.theta_p,
            &spaces.theta_f,
            porous_cells(spaces),
            ctx.params.k_p,
        ),
    };
    let n = dm.n_dofs;
    let dt = ctx.dt;
    let mut a = zeros(n);
    let mut b = vec![0.0; n];
    for tri in cells {
        let cell = Cell::new(spaces, tri);
        let d = tri_dofs(dm, spaces, tri);
        let g = cell.grad_lambda();
        let (hb, vd) = match sub {
            Subdomain::Fluid => (Vec::new(), tri_dofs(&spaces.velocity_f, spaces, tri)),
            Subdomain::Porous => (hdiv_basis(spaces, &spaces.velocity_p, tri), Vec::new()),
        };
        for (x, w) in cell.points() {
            let l = cell.lambda(x);
            let vel = match sub {
                Subdomain::Fluid => {
                    let nv = spaces.velocity_f.n_dofs;
                    let (phi, _) = cell.mini(x);
                    [0, 1].map(|c| {
                        (0..4)
                            .map(|i| velocity[c * nv + vd[i]] * phi[i])
                            .sum::<f64>()
                    })
                }
                Subdomain::Porous => {
                    let mut u = [0.0; 2];
                    for (dof, c) in &hb {
                        let f = eval_field(c, x);
                        u[0] += velocity[*dof] * f[0];
                        u[1] += velocity[*dof] * f[1];
                    }
                    u
                }
            };
            let th: f64 = (0..3).map(|i| theta_old[d[i]] * l[i]).sum();
            let src = match sub {
                Subdomain::Fluid => problem.fluid_heat(x, t),
                Subdomain::Porous => problem.porous_heat(x, t),
            };
            for i in 0..3 {
                for j in 0..3 {
                    let adv_j = vel[0] * g[j][0] + vel[1] * g[j][1];
                    let adv_i = vel[0] * g[i][0] + vel[1] * g[i][1];
                    a[d[i]][d[j]] += w
                        * (l[i] * l[j] / dt
                            + kappa * (g[i][0] * g[j][0] + g[i][1] * g[j][1])
                            + 0.5 * (adv_j * l[i] - adv_i * l[j]));
                }
                b[d[i]] += w * (th / dt + src) * l[i];
            }
        }
    }
    let pen = ctx.penalty();
    let kf = ctx.params.k_f;
    let sign = if sub == Subdomain::Fluid { 1.0 } else { -1.0 };
    for ie in &spaces.interface {
        let vs = spaces.mesh.edges[ie.edge].vertices;
        let len = ie.length;
        // exact P1 trace mass: (ℓ/6)[[2,1],[1,2]]
        for (ia, &va) in vs.iter().enumerate() {
            for (ib, &vb) in vs.iter().enumerate() {
                let m = len / 6.0 * if ia == ib { 2.0 } else { 1.0 };
                a[dm.vertex_dof(va).unwrap()][dm.vertex_dof(vb).unwrap()] += pen * m;
                b[dm.vertex_dof(va).unwrap()] += pen * m * other[odm.vertex_dof(vb).unwrap()];
            }
        }
        let fc = Cell::new(spaces, ie.fluid_triangle);
        let fd = tri_dofs(&spaces.theta_f, spaces, ie.fluid_triangle);
        let gl = fc.grad_lambda();
        let dy: f64 = (0..3).map(|i| theta_f_flux[fd[i]] * gl[i][1]).sum();
        // n_f = (0, -1); each endpoint hat integrates to ℓ/2 on the edge
        for &va in &vs {
            b[dm.vertex_dof(va).unwrap()] += sign * kf * (-dy) * len / 2.0;
        }
    }
    let (tags, exact): (&[_], Box<dyn Fn([f64; 2]) -> f64>) = match sub {
        Subdomain::Fluid => (&FLUID_TEMPERATURE_TAGS, Box::new(|x| problem.theta_f(x, t))),
        Subdomain::Porous => (
            &POROUS_TEMPERATURE_TAGS,
            Box::new(|x| problem.theta_p(x, t)),
        ),
    };
    let fixed = dm
        .dirichlet_values(&spaces.mesh, tags, Analytic::Scalar(&*exact))
        .unwrap();
    constrain(&mut a, &mut b, &fixed);
    (a, b)
}

#[allow(clippy::too_many_arguments)]
pub fn dense_theta_f(
    spaces: &Spaces,
    ctx: &FormContext<'_>,
    u_f_old: &[f64],
    theta_f_old: &[f64],
    theta_p_old: &[f64],
    problem: &dyn ProblemData,
    t: f64,
) -> (Dense, Vec<f64>) {
    dense_theta(
        spaces,
        ctx,
        Subdomain::Fluid,
        u_f_old,
        theta_f_old,
        theta_p_old,
        theta_f_old,
        problem,
        t,
    )
}

#[allow(clippy::too_many_arguments)]
pub fn dense_theta_p(
    spaces: &Spaces,
    ctx: &FormContext<'_>,
    u_p_old: &[f64],
    theta_p_old: &[f64],
    theta_f_new: &[f64],
    theta_f_old: &[f64],
    problem: &dyn ProblemData,
    t: f64,
) -> (Dense, Vec<f64>) {
    dense_theta(
        spaces,
        ctx,
        Subdomain::Porous,
        u_p_old,
        theta_p_old,
        theta_f_new,
        theta_f_old,
        problem,
        t,
    )
}

pub fn dense_darcy(
    spaces: &Spaces,
    ctx: &FormContext<'_>,
    u_p_old: &[f64],
    theta_p_old: &[f64],
    problem: &dyn ProblemData,
    t: f64,
) -> (Dense, Vec<f64>) {
    let nu = spaces.velocity_p.n_dofs;
    let nphi = spaces.pressure_p.n_dofs;
    let n = nu + nphi + 1;
    let p = &ctx.params;
    let l2 = p.l * p.l;
    let mc = p.c_a / (l2 * ctx.dt);
    let mut a = zeros(n);
    let mut b = vec![0.0; n];
    for tri in porous_cells(spaces) {
        let cell = Cell::new(spaces, tri);
        let basis = hdiv_basis(spaces, &spaces.velocity_p, tri);
        let c = spaces.pressure_p.local_cell_of(tri).unwrap();
        let pd = nu + spaces.pressure_p.cell_dofs(c)[0];
        let td = tri_dofs(&spaces.theta_p, spaces, tri);
        for (x, w) in cell.points() {
            let k = ctx.sample.k(x);
            let vals: Vec<[f64; 2]> = basis.iter().map(|(_, c)| eval_field(c, x)).collect();
            let divs: Vec<f64> = basis.iter().map(|(_, c)| c[1] + c[5]).collect();
            let mut uo = [0.0; 2];
            for (bi, (dof, _)) in basis.iter().enumerate() {
                uo[0] += u_p_old[*dof] * vals[bi][0];
                uo[1] += u_p_old[*dof] * vals[bi][1];
            }
            let l = cell.lambda(x);
            let th: f64 = (0..3).map(|i| theta_p_old[td[i]] * l[i]).sum();
            let f = if problem.has_darcy_load() {
                problem.darcy_load(x, t)
            } else {
                [0.0; 2]
            };
            let load = [
                mc * k * uo[0] + f[0],
                mc * k * uo[1] + p.pr * p.ra * k * th / l2 + f[1],
            ];
            for (i, (di, _)) in basis.iter().enumerate() {
                for (j, (dj, _)) in basis.iter().enumerate() {
                    a[*di][*dj] +=
                        w * (mc * k + p.pr) * (vals[i][0] * vals[j][0] + vals[i][1] * vals[j][1]);
                }
                let bij = w * k * divs[i] / l2;
                a[*di][pd] -= bij;
                a[pd][*di] += bij;
                b[*di] += w * (load[0] * vals[i][0] + load[1] * vals[i][1]);
            }
            a[pd][n - 1] += w;
            a[n - 1][pd] += w;
        }
    }
    let g = |x: [f64; 2]| problem.velocity_p(x, t);
    let fixed = spaces
        .velocity_p
        .dirichlet_values(&spaces.mesh, &POROUS_VELOCITY_TAGS, Analytic::Vector(&g))
        .unwrap();
    constrain(&mut a, &mut b, &fixed);
    (a, b)
}

/// All four sequential solves with dense matrices.
pub fn dense_step(
    spaces: &Spaces,
    ctx: &FormContext<'_>,
    s: &CoupledState,
    problem: &dyn ProblemData,
    t: f64,
) -> CoupledState {
    let nv = spaces.velocity_f.n_dofs;
    let np = spaces.pressure_f.n_dofs;
    let nu = spaces.velocity_p.n_dofs;
    let nphi = spaces.pressure_p.n_dofs;
    let (a, b) = dense_ns(spaces, ctx, &s.u_f, &s.theta_f, problem, t);
    let x = dense_solve(&a, &b);
    let (a, b) = dense_theta_f(spaces, ctx, &s.u_f, &s.theta_f, &s.theta_p, problem, t);
    let theta_f = dense_solve(&a, &b);
    let (a, b) = dense_darcy(spaces, ctx, &s.u_p, &s.theta_p, problem, t);
    let y = dense_solve(&a, &b);
    let (a, b) = dense_theta_p(
        spaces, ctx, &s.u_p, &s.theta_p, &theta_f, &s.theta_f, problem, t,
    );
    let theta_p = dense_solve(&a, &b);
    CoupledState {
        t,
        u_f: x[..2 * nv].to_vec(),
        p_f: x[2 * nv..2 * nv + np].to_vec(),
        theta_f,
        u_p: y[..nu].to_vec(),
        phi_p: y[nu..nu + nphi].to_vec(),
        theta_p,
    }
}
