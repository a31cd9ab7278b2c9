//! Structural checks of the discretization, each reporting its worst
//! measured value against a tolerance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::oracle::{dense_darcy, dense_ns, dense_theta_f, dense_theta_p, Dense};
use crate::assembly::{Assembler, FormContext, PhysicalParams};
use crate::elements::{quadrature, ElementFamily, MAX_DEGREE};
use crate::linalg::SparseSystem;
use crate::mesh::{build_channel_mesh, ChannelGeometry, Interval, Mesh, Subdomain};
use crate::randfield::{affine_from_draws, kl_from_draws, sample_constant, ConductivitySample};
use crate::space::{cell_geometry, Spaces};
use crate::stepper::{field_norms, CoupledState, ProblemData, Stepper, ZeroProblem};
use crate::verify::{build_affine_k_problem, build_constant_k_problem, ManufacturedProblem};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub worst: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.worst <= self.tolerance
    }
}

fn unit_spaces(n: usize, fam: ElementFamily) -> Spaces {
    Spaces::new(Mesh::unit_channel(n).expect("valid level"), fam).expect("H(div) family")
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn random_state(s: &Spaces, rng: &mut ChaCha8Rng) -> CoupledState {
    CoupledState {
        t: 0.0,
        u_f: random_vec(rng, 2 * s.velocity_f.n_dofs),
        p_f: random_vec(rng, s.pressure_f.n_dofs),
        theta_f: random_vec(rng, s.theta_f.n_dofs),
        u_p: random_vec(rng, s.velocity_p.n_dofs),
        phi_p: random_vec(rng, s.pressure_p.n_dofs),
        theta_p: random_vec(rng, s.theta_p.n_dofs),
    }
}

/// Channel with random extents and cell counts.
pub fn random_mesh(rng: &mut ChaCha8Rng) -> Mesh {
    let x0 = rng.random_range(-1.0..1.0);
    let y0 = rng.random_range(-1.0..1.0);
    let w = rng.random_range(0.3..2.0);
    let hp = rng.random_range(0.3..2.0);
    let hf = rng.random_range(0.3..2.0);
    let geom = ChannelGeometry::new(
        Interval::new(x0, x0 + w),
        Interval::new(y0, y0 + hp),
        Interval::new(y0 + hp, y0 + hp + hf),
    )
    .expect("positive extents");
    build_channel_mesh(
        geom,
        rng.random_range(1..5),
        rng.random_range(1..5),
        rng.random_range(1..5),
    )
    .expect("positive counts")
}

fn quadratic<const N: usize>(blk: &[[f64; N]; N], w: &[f64; N]) -> (f64, f64) {
    let mut q = 0.0;
    let mut scale = 0.0;
    for i in 0..N {
        for j in 0..N {
            q += w[i] * blk[i][j] * w[j];
            scale += (w[i] * blk[i][j] * w[j]).abs();
        }
    }
    (q, scale)
}

/// `|wᵀCw| / Σ|w_i C_ij w_j|` for the three convection forms on one random mesh.
pub fn skew_defect(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = Spaces::new(random_mesh(&mut rng), ElementFamily::Bdm1).expect("BDM1");
    let k = sample_constant(1.0).expect("positive");
    let ctx = FormContext::new(PhysicalParams::default(), &k, 0.1, &s).expect("valid context");
    let asm = Assembler::new(&s, ctx).expect("assembler");
    let st = random_state(&s, &mut rng);
    let mut worst: f64 = 0.0;

    let w = random_vec(&mut rng, s.velocity_f.n_dofs);
    let (mut total, mut scale) = (0.0, 0.0);
    for (c, blk) in asm.ns_convection_blocks(&st.u_f).iter().enumerate() {
        let d = s.velocity_f.cell_dofs(c);
        let (q, sc) = quadratic(blk, &std::array::from_fn(|i| w[d[i]]));
        total += q;
        scale += sc;
    }
    worst = worst.max(total.abs() / f64::max(scale, 1.0));

    for (sub, vel, dm) in [
        (Subdomain::Fluid, &st.u_f, &s.theta_f),
        (Subdomain::Porous, &st.u_p, &s.theta_p),
    ] {
        let w = random_vec(&mut rng, dm.n_dofs);
        let (mut total, mut scale) = (0.0, 0.0);
        for (c, blk) in asm.theta_convection_blocks(sub, vel).iter().enumerate() {
            let d = dm.cell_dofs(c);
            let (q, sc) = quadratic(blk, &std::array::from_fn(|i| w[d[i]]));
            total += q;
            scale += sc;
        }
        worst = worst.max(total.abs() / f64::max(scale, 1.0));
    }
    worst
}

pub fn convection_skew(cases: u64) -> Check {
    Check {
        name: "skew-symmetric convection",
        worst: (0..cases).map(skew_defect).fold(0.0, f64::max),
        tolerance: 1e-13,
    }
}

/// `max_j |(ψ_j, ∇·u_f)|` over the fluid pressure basis.
pub fn weak_divergence(s: &Spaces, u: &[f64]) -> f64 {
    let q = quadrature(4).expect("degree 4");
    let nv = s.velocity_f.n_dofs;
    let mut r = vec![0.0; s.pressure_f.n_dofs];
    for (c, &t) in s.velocity_f.cells.iter().enumerate() {
        let g = cell_geometry(&s.mesh, t);
        let pd = s.pressure_f.cell_dofs(c);
        for (p, w) in q.iter() {
            let (_, d0) = s.velocity_f.eval_scalar(&u[..nv], c, &g, p);
            let (_, d1) = s.velocity_f.eval_scalar(&u[nv..], c, &g, p);
            for j in 0..3 {
                r[pd[j]] += w * g.det * p[j] * (d0[0] + d1[1]);
            }
        }
    }
    r.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Largest cellwise `|∇·u_p|`.
pub fn max_cell_divergence(s: &Spaces, u: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for (c, &t) in s.velocity_p.cells.iter().enumerate() {
        let g = cell_geometry(&s.mesh, t);
        let (_, d) = s.velocity_p.eval_hdiv_field(u, c, &g, &[1.0 / 3.0; 3]);
        worst = worst.max(d.abs());
    }
    worst
}

pub fn incompressibility(level: usize, steps: usize) -> Check {
    let mut worst: f64 = 0.0;
    for (problem, sample) in [
        (
            build_constant_k_problem(2.21, 1.0),
            sample_constant(2.21).expect("positive"),
        ),
        (
            build_affine_k_problem([0.7, -0.1], 0.1, 1.0),
            affine_from_draws(0.1, [0.7, -0.1]),
        ),
    ] {
        let s = unit_spaces(level, ElementFamily::Bdm1);
        let ctx =
            FormContext::new(PhysicalParams::default(), &sample, 0.01, &s).expect("valid context");
        let mut stepper = Stepper::new(&s, ctx).expect("stepper");
        let mut st = CoupledState::interpolated(&s, &problem, 0.0);
        for _ in 0..steps {
            st = stepper.advance(&st, &problem).expect("step");
            worst = worst
                .max(weak_divergence(&s, &st.u_f))
                .max(max_cell_divergence(&s, &st.u_p));
        }
    }
    Check {
        name: "discrete incompressibility",
        worst,
        tolerance: 1e-9,
    }
}

fn system_gap(sys: &SparseSystem, dense: &(Dense, Vec<f64>)) -> f64 {
    let (a, b) = dense;
    let m = sys.matrix.to_dense();
    if m.len() != a.len() {
        return f64::INFINITY;
    }
    let mut worst: f64 = 0.0;
    for i in 0..a.len() {
        for j in 0..a.len() {
            worst = worst.max((m[i][j] - a[i][j]).abs());
        }
        worst = worst.max((sys.rhs[i] - b[i]).abs());
    }
    worst
}

fn oracle_params() -> PhysicalParams {
    PhysicalParams {
        pr: 0.8,
        ra: 1.7,
        c_a: 1.3,
        l: 0.9,
        k_f: 1.1,
        k_p: 0.7,
        gamma: 3.0,
    }
}

/// Largest entrywise gap between sparse and dense assembly of the four systems.
pub fn dense_gap(fam: ElementFamily, n: usize, sample: &ConductivitySample, seed: u64) -> [f64; 4] {
    let s = unit_spaces(n, fam);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ctx = FormContext::new(oracle_params(), sample, 0.25, &s).expect("valid context");
    let problem = build_affine_k_problem([0.4, -0.2], 0.3, 1.0).with_params(oracle_params());
    let st = random_state(&s, &mut rng);
    let thf_new = random_vec(&mut rng, s.theta_f.n_dofs);
    let asm = Assembler::new(&s, ctx.clone()).expect("assembler");
    let t = 0.37;
    [
        system_gap(
            &asm.ns(&st.u_f, &st.theta_f, &problem, t).expect("ns"),
            &dense_ns(&s, &ctx, &st.u_f, &st.theta_f, &problem, t),
        ),
        system_gap(
            &asm.theta_f(&st.u_f, &st.theta_f, &st.theta_p, &problem, t)
                .expect("theta_f"),
            &dense_theta_f(&s, &ctx, &st.u_f, &st.theta_f, &st.theta_p, &problem, t),
        ),
        system_gap(
            &asm.darcy(&st.u_p, &st.theta_p, &problem, t).expect("darcy"),
            &dense_darcy(&s, &ctx, &st.u_p, &st.theta_p, &problem, t),
        ),
        system_gap(
            &asm.theta_p(&st.u_p, &st.theta_p, &thf_new, &st.theta_f, &problem, t)
                .expect("theta_p"),
            &dense_theta_p(
                &s,
                &ctx,
                &st.u_p,
                &st.theta_p,
                &thf_new,
                &st.theta_f,
                &problem,
                t,
            ),
        ),
    ]
}

pub fn dense_equivalence() -> Check {
    let k = affine_from_draws(0.4, [0.3, -0.9]);
    let worst = [
        dense_gap(ElementFamily::Bdm1, 1, &k, 1),
        dense_gap(ElementFamily::Rt0, 1, &k, 2),
    ]
    .iter()
    .flatten()
    .fold(0.0f64, |m, v| m.max(*v));
    Check {
        name: "dense assembly equivalence (two triangles per subdomain)",
        worst,
        tolerance: 1e-12,
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Largest relative error over monomials up to each rule's degree.
pub fn quadrature_exactness() -> Check {
    let mut worst: f64 = 0.0;
    for d in 1..=MAX_DEGREE {
        let q = quadrature(d).expect("supported degree");
        for a in 0..=d as u32 {
            for b in 0..=(d as u32 - a) {
                let v: f64 = q
                    .iter()
                    .map(|(p, w)| w * p[1].powi(a as i32) * p[2].powi(b as i32))
                    .sum();
                let e = factorial(a) * factorial(b) / factorial(a + b + 2);
                worst = worst.max(((v - e) / e).abs());
            }
        }
    }
    Check {
        name: "quadrature exactness",
        worst,
        tolerance: 1e-13,
    }
}

type Field<'a> = &'a dyn Fn([f64; 2], f64) -> f64;

// fourth-order central differences
fn d1(f: &dyn Fn(f64) -> f64, x: f64) -> f64 {
    let h = 1e-3;
    (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
}

fn d2(f: &dyn Fn(f64) -> f64, x: f64) -> f64 {
    let h = 2e-3;
    (-f(x + 2.0 * h) + 16.0 * f(x + h) - 30.0 * f(x) + 16.0 * f(x - h) - f(x - 2.0 * h))
        / (12.0 * h * h)
}

fn dx(f: Field, p: [f64; 2], t: f64) -> f64 {
    d1(&|s| f([s, p[1]], t), p[0])
}
fn dy(f: Field, p: [f64; 2], t: f64) -> f64 {
    d1(&|s| f([p[0], s], t), p[1])
}
fn dt(f: Field, p: [f64; 2], t: f64) -> f64 {
    d1(&|s| f(p, s), t)
}
fn lap(f: Field, p: [f64; 2], t: f64) -> f64 {
    d2(&|s| f([s, p[1]], t), p[0]) + d2(&|s| f([p[0], s], t), p[1])
}

pub fn random_params(rng: &mut ChaCha8Rng) -> PhysicalParams {
    PhysicalParams {
        pr: rng.random_range(0.5..2.0),
        ra: rng.random_range(0.0..3.0),
        c_a: rng.random_range(0.5..2.0),
        l: rng.random_range(0.5..2.0),
        k_f: rng.random_range(0.5..2.0),
        k_p: rng.random_range(0.5..2.0),
        gamma: 1e5,
    }
}

/// Largest strong-form residual of the manufactured fields, with derivatives
/// by finite differences, at `n` random space-time points per subdomain.
pub fn forcing_residual(problem: &ManufacturedProblem, rng: &mut ChaCha8Rng, n: usize) -> f64 {
    let pp = problem.params;
    let u0 = |p: [f64; 2], t: f64| problem.velocity_f(p, t)[0];
    let u1 = |p: [f64; 2], t: f64| problem.velocity_f(p, t)[1];
    let pf = |p: [f64; 2], t: f64| problem.pressure_f(p, t);
    let thf = |p: [f64; 2], t: f64| problem.theta_f(p, t);
    let v0 = |p: [f64; 2], t: f64| problem.velocity_p(p, t)[0];
    let v1 = |p: [f64; 2], t: f64| problem.velocity_p(p, t)[1];
    let php = |p: [f64; 2], t: f64| problem.pressure_p(p, t);
    let thp = |p: [f64; 2], t: f64| problem.theta_p(p, t);
    let l2 = pp.l * pp.l;
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let t = rng.random_range(0.0..1.0);
        let pfl = [rng.random_range(0.01..0.99), rng.random_range(1.01..1.99)];
        let ppo = [rng.random_range(0.01..0.99), rng.random_range(0.01..0.99)];

        let u = problem.velocity_f(pfl, t);
        let comps: [Field; 2] = [&u0, &u1];
        let f = problem.fluid_force(pfl, t);
        for (i, c) in comps.iter().enumerate() {
            let adv = u[0] * dx(*c, pfl, t) + u[1] * dy(*c, pfl, t);
            let gp = if i == 0 {
                dx(&pf, pfl, t)
            } else {
                dy(&pf, pfl, t)
            };
            let buoy = if i == 1 {
                pp.pr * pp.ra * thf(pfl, t)
            } else {
                0.0
            };
            let strong = dt(*c, pfl, t) - pp.pr * lap(*c, pfl, t) + adv + gp - buoy;
            worst = worst.max((strong - f[i]).abs());
        }
        worst = worst.max((dx(&u0, pfl, t) + dy(&u1, pfl, t)).abs());

        let heat_f = dt(&thf, pfl, t) - pp.k_f * lap(&thf, pfl, t)
            + u[0] * dx(&thf, pfl, t)
            + u[1] * dy(&thf, pfl, t);
        worst = worst.max((heat_f - problem.fluid_heat(pfl, t)).abs());

        let v = problem.velocity_p(ppo, t);
        let heat_p = dt(&thp, ppo, t) - pp.k_p * lap(&thp, ppo, t)
            + v[0] * dx(&thp, ppo, t)
            + v[1] * dy(&thp, ppo, t);
        worst = worst.max((heat_p - problem.porous_heat(ppo, t)).abs());

        let load = problem.darcy_load(ppo, t);
        let vc: [Field; 2] = [&v0, &v1];
        for (i, c) in vc.iter().enumerate() {
            let gphi = if i == 0 {
                dx(&php, ppo, t)
            } else {
                dy(&php, ppo, t)
            };
            let buoy = if i == 1 {
                pp.pr * pp.ra * problem.k / l2 * thp(ppo, t)
            } else {
                0.0
            };
            let strong =
                pp.c_a * problem.k / l2 * dt(*c, ppo, t) + pp.pr * v[i] + problem.k / l2 * gphi
                    - buoy;
            worst = worst.max((strong - load[i]).abs());
        }
        let div_p = dx(&v0, ppo, t) + dy(&v1, ppo, t);
        worst = worst.max(div_p.abs());
        worst = worst.max((div_p - problem.div_velocity_p(ppo, t)).abs());

        let gu = problem.grad_velocity_f(pfl, t);
        let gv = problem.grad_velocity_p(ppo, t);
        for i in 0..2 {
            worst = worst.max((gu[i][0] - dx(comps[i], pfl, t)).abs());
            worst = worst.max((gu[i][1] - dy(comps[i], pfl, t)).abs());
            worst = worst.max((gv[i][0] - dx(vc[i], ppo, t)).abs());
            worst = worst.max((gv[i][1] - dy(vc[i], ppo, t)).abs());
        }
        let gtf = problem.grad_theta_f(pfl, t);
        let gtp = problem.grad_theta_p(ppo, t);
        worst = worst.max(
            (gtf[0] - dx(&thf, pfl, t))
                .abs()
                .max((gtf[1] - dy(&thf, pfl, t)).abs()),
        );
        worst = worst.max(
            (gtp[0] - dx(&thp, ppo, t))
                .abs()
                .max((gtp[1] - dy(&thp, ppo, t)).abs()),
        );
    }
    worst
}

pub fn manufactured_forcing(points: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = forcing_residual(&build_constant_k_problem(2.21, 1.0), &mut rng, points);
    let params = random_params(&mut rng);
    worst = worst.max(forcing_residual(
        &build_affine_k_problem([0.3, -0.8], 0.1, 1.0).with_params(params),
        &mut rng,
        points,
    ));
    Check {
        name: "manufactured forcing residual",
        worst,
        tolerance: 1e-6,
    }
}

/// Largest coefficient magnitude after `steps` steps from zero data.
pub fn zero_data(steps: usize) -> Check {
    let s = unit_spaces(4, ElementFamily::Bdm1);
    let k = affine_from_draws(0.3, [0.2, -0.5]);
    let ctx = FormContext::new(PhysicalParams::default(), &k, 0.01, &s).expect("valid context");
    let mut stepper = Stepper::new(&s, ctx).expect("stepper");
    let mut st = CoupledState::zeros(&s);
    let mut worst: f64 = 0.0;
    for _ in 0..steps {
        st = stepper.advance(&st, &ZeroProblem).expect("step");
        for v in [
            &st.u_f,
            &st.p_f,
            &st.theta_f,
            &st.u_p,
            &st.phi_p,
            &st.theta_p,
        ] {
            worst = worst.max(v.iter().fold(0.0f64, |m, x| m.max(x.abs())));
        }
    }
    Check {
        name: "zero data stays zero",
        worst,
        tolerance: 0.0,
    }
}

/// Divergence-free `curl ψ` with `ψ = x²(1−x)²(y−1)²(2−y)²`, vanishing with
/// its gradient on the fluid boundary; no forcing.
pub struct Bump;

impl ProblemData for Bump {
    fn velocity_f(&self, p: [f64; 2], _t: f64) -> [f64; 2] {
        let (x, y) = (p[0], p[1] - 1.0);
        let fx = x * x * (1.0 - x) * (1.0 - x);
        let fy = y * y * (1.0 - y) * (1.0 - y);
        let dfx = 2.0 * x * (1.0 - x) * (1.0 - 2.0 * x);
        let dfy = 2.0 * y * (1.0 - y) * (1.0 - 2.0 * y);
        [fx * dfy, -dfx * fy]
    }
}

/// Largest step-to-step growth factor of `‖u_f‖` minus one, with `Ra = 0`.
pub fn unforced_energy_decay(steps: usize) -> Check {
    let s = unit_spaces(8, ElementFamily::Bdm1);
    let params = PhysicalParams {
        ra: 0.0,
        ..PhysicalParams::default()
    };
    let k = sample_constant(1.0).expect("positive");
    let ctx = FormContext::new(params, &k, 0.01, &s).expect("valid context");
    let mut stepper = Stepper::new(&s, ctx).expect("stepper");
    let mut st = CoupledState::interpolated(&s, &Bump, 0.0);
    let mut prev = field_norms(&s, &st)[0];
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..steps {
        st = stepper.advance(&st, &Bump).expect("step");
        let now = field_norms(&s, &st)[0];
        worst = worst.max(now / prev - 1.0);
        prev = now;
    }
    Check {
        name: "unforced kinetic energy non-increasing",
        worst,
        tolerance: 1e-12,
    }
}

/// Largest ratio of any field norm to its initial value under zero forcing at `γ = 1e5`.
pub fn penalty_boundedness(steps: usize) -> Check {
    let s = unit_spaces(8, ElementFamily::Bdm1);
    let k = sample_constant(2.21).expect("positive");
    let ctx = FormContext::new(PhysicalParams::default(), &k, 0.01, &s).expect("valid context");
    let mut stepper = Stepper::new(&s, ctx).expect("stepper");
    let init = CoupledState::interpolated(&s, &build_constant_k_problem(2.21, 1.0), 0.0);
    let n0 = field_norms(&s, &init);
    let mut st = init;
    let mut worst: f64 = 0.0;
    for _ in 0..steps {
        st = stepper.advance(&st, &ZeroProblem).expect("step");
        let n = field_norms(&s, &st);
        for i in 0..6 {
            worst = worst.max(n[i] / n0[i]);
        }
    }
    Check {
        name: "norms bounded under strong penalty",
        worst,
        tolerance: 10.0,
    }
}

/// Every check at the sizes used for acceptance.
pub fn run_all() -> Vec<Check> {
    vec![
        convection_skew(24),
        incompressibility(4, 10),
        dense_equivalence(),
        {
            let k = kl_from_draws(1.0, 0.2, 2, 0.5, vec![0.5, -1.0, 1.2, 0.3, -0.6]);
            let worst = dense_gap(ElementFamily::Bdm1, 2, &k, 3)
                .into_iter()
                .fold(0.0, f64::max);
            Check {
                name: "dense assembly equivalence (variable k, interior dofs)",
                worst,
                tolerance: 1e-12,
            }
        },
        quadrature_exactness(),
        manufactured_forcing(200),
        zero_data(5),
        unforced_energy_decay(100),
        penalty_boundedness(50),
    ]
}
