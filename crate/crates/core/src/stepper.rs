//! Time marching of one conductivity sample through the four sub-steps.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::assembly::{Assembler, FormContext, PhysicalParams};
use crate::elements::{quadrature, ElementFamily, ASSEMBLY_DEGREE};
use crate::error::{AssemblyError, LinalgError, StepError};
use crate::linalg::{solve_with_tolerance, Factorization, SparseSystem, SOLVE_TOLERANCE};
use crate::mesh::Mesh;
use crate::randfield::ConductivitySample;
use crate::space::{cell_geometry, interpolate, Analytic, Spaces};

/// Data of one problem instance: exact or boundary fields, initial data and
/// sources. Every method defaults to zero.
pub trait ProblemData: Sync {
    fn velocity_f(&self, _x: [f64; 2], _t: f64) -> [f64; 2] {
        [0.0; 2]
    }
    fn pressure_f(&self, _x: [f64; 2], _t: f64) -> f64 {
        0.0
    }
    fn theta_f(&self, _x: [f64; 2], _t: f64) -> f64 {
        0.0
    }
    fn velocity_p(&self, _x: [f64; 2], _t: f64) -> [f64; 2] {
        [0.0; 2]
    }
    fn pressure_p(&self, _x: [f64; 2], _t: f64) -> f64 {
        0.0
    }
    fn theta_p(&self, _x: [f64; 2], _t: f64) -> f64 {
        0.0
    }
    /// Momentum source `f_f`.
    fn fluid_force(&self, _x: [f64; 2], _t: f64) -> [f64; 2] {
        [0.0; 2]
    }
    /// Heat source `Υ_f`.
    fn fluid_heat(&self, _x: [f64; 2], _t: f64) -> f64 {
        0.0
    }
    /// Heat source `Υ_p`.
    fn porous_heat(&self, _x: [f64; 2], _t: f64) -> f64 {
        0.0
    }
    /// Extra Darcy load used only by manufactured-solution runs.
    fn has_darcy_load(&self) -> bool {
        false
    }
    fn darcy_load(&self, _x: [f64; 2], _t: f64) -> [f64; 2] {
        [0.0; 2]
    }
}

/// All data identically zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroProblem;

impl ProblemData for ZeroProblem {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DarcyFamily {
    #[default]
    Bdm1,
    Rt0,
}

impl DarcyFamily {
    pub fn element(self) -> ElementFamily {
        match self {
            DarcyFamily::Bdm1 => ElementFamily::Bdm1,
            DarcyFamily::Rt0 => ElementFamily::Rt0,
        }
    }
}

/// Coefficients of all six unknowns at one time level. `u_f` stores the
/// two MINI components one after the other.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledState {
    pub t: f64,
    pub u_f: Vec<f64>,
    pub p_f: Vec<f64>,
    pub theta_f: Vec<f64>,
    pub u_p: Vec<f64>,
    pub phi_p: Vec<f64>,
    pub theta_p: Vec<f64>,
}

impl CoupledState {
    pub fn zeros(spaces: &Spaces) -> Self {
        Self {
            t: 0.0,
            u_f: vec![0.0; 2 * spaces.velocity_f.n_dofs],
            p_f: vec![0.0; spaces.pressure_f.n_dofs],
            theta_f: vec![0.0; spaces.theta_f.n_dofs],
            u_p: vec![0.0; spaces.velocity_p.n_dofs],
            phi_p: vec![0.0; spaces.pressure_p.n_dofs],
            theta_p: vec![0.0; spaces.theta_p.n_dofs],
        }
    }

    /// Interpolant of the problem's fields at time `t`.
    pub fn interpolated(spaces: &Spaces, problem: &dyn ProblemData, t: f64) -> Self {
        let m = &spaces.mesh;
        let scalar = |f: &dyn Fn([f64; 2]) -> f64, dm| {
            interpolate(Analytic::Scalar(f), dm, m).expect("scalar space")
        };
        let mut u_f = scalar(&|x| problem.velocity_f(x, t)[0], &spaces.velocity_f);
        u_f.extend(scalar(&|x| problem.velocity_f(x, t)[1], &spaces.velocity_f));
        Self {
            t,
            u_f,
            p_f: scalar(&|x| problem.pressure_f(x, t), &spaces.pressure_f),
            theta_f: scalar(&|x| problem.theta_f(x, t), &spaces.theta_f),
            u_p: interpolate(
                Analytic::Vector(&|x| problem.velocity_p(x, t)),
                &spaces.velocity_p,
                m,
            )
            .expect("vector space"),
            phi_p: scalar(&|x| problem.pressure_p(x, t), &spaces.pressure_p),
            theta_p: scalar(&|x| problem.theta_p(x, t), &spaces.theta_p),
        }
    }

    pub fn is_zero(&self) -> bool {
        [
            &self.u_f,
            &self.p_f,
            &self.theta_f,
            &self.u_p,
            &self.phi_p,
            &self.theta_p,
        ]
        .iter()
        .all(|v| v.iter().all(|&x| x == 0.0))
    }
}

/// L2 norms of `(u_f, p_f, θ_f, u_p, φ_p, θ_p)`.
pub fn field_norms(spaces: &Spaces, s: &CoupledState) -> [f64; 6] {
    let q = quadrature(ASSEMBLY_DEGREE).expect("assembly degree supported");
    let m = &spaces.mesh;
    let nv = spaces.velocity_f.n_dofs;
    let mut acc = [0.0; 6];
    for (c, &t) in spaces.velocity_f.cells.iter().enumerate() {
        let g = cell_geometry(m, t);
        for (p, w) in q.iter() {
            let w = w * g.det;
            let u0 = spaces.velocity_f.eval_scalar(&s.u_f[..nv], c, &g, p).0;
            let u1 = spaces.velocity_f.eval_scalar(&s.u_f[nv..], c, &g, p).0;
            acc[0] += w * (u0 * u0 + u1 * u1);
            acc[1] += w * spaces.pressure_f.eval_scalar(&s.p_f, c, &g, p).0.powi(2);
            acc[2] += w * spaces.theta_f.eval_scalar(&s.theta_f, c, &g, p).0.powi(2);
        }
    }
    for (c, &t) in spaces.velocity_p.cells.iter().enumerate() {
        let g = cell_geometry(m, t);
        for (p, w) in q.iter() {
            let w = w * g.det;
            let (u, _) = spaces.velocity_p.eval_hdiv_field(&s.u_p, c, &g, p);
            acc[3] += w * (u[0] * u[0] + u[1] * u[1]);
            acc[4] += w * spaces.pressure_p.eval_scalar(&s.phi_p, c, &g, p).0.powi(2);
            acc[5] += w * spaces.theta_p.eval_scalar(&s.theta_p, c, &g, p).0.powi(2);
        }
    }
    acc.map(f64::sqrt)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub params: PhysicalParams,
    pub dt: f64,
    pub t_final: f64,
    /// Cells per unit length in each direction; `h = 1/level`.
    pub level: usize,
    #[serde(default)]
    pub darcy_family: DarcyFamily,
    #[serde(default = "default_tolerance")]
    pub solver_tolerance: f64,
}

fn default_tolerance() -> f64 {
    SOLVE_TOLERANCE
}

impl RunConfig {
    pub fn new(params: PhysicalParams, dt: f64, t_final: f64, level: usize) -> Self {
        Self {
            params,
            dt,
            t_final,
            level,
            darcy_family: DarcyFamily::Bdm1,
            solver_tolerance: SOLVE_TOLERANCE,
        }
    }

    /// `N = T/Δt`, rejected unless it is a positive integer.
    pub fn steps(&self) -> Result<usize, StepError> {
        if !(self.dt > 0.0) || !(self.t_final > 0.0) {
            return Err(StepError::Config(format!(
                "dt = {} and T = {} must be positive",
                self.dt, self.t_final
            )));
        }
        let r = self.t_final / self.dt;
        let n = r.round();
        if n < 1.0 || (r - n).abs() > 1e-9 * r.max(1.0) {
            return Err(StepError::Config(format!(
                "T/dt = {r} is not a positive integer (T = {}, dt = {})",
                self.t_final, self.dt
            )));
        }
        Ok(n as usize)
    }

    pub fn validate(&self) -> Result<usize, StepError> {
        self.params
            .validate()
            .map_err(|source| StepError::Assembly {
                step: 0,
                stage: "configuration",
                source,
            })?;
        if self.level == 0 {
            return Err(StepError::Config("mesh level must be positive".into()));
        }
        if !(self.solver_tolerance > 0.0) {
            return Err(StepError::Config(
                "solver tolerance must be positive".into(),
            ));
        }
        self.steps()
    }

    pub fn spaces(&self) -> Result<Spaces, StepError> {
        let mesh = Mesh::unit_channel(self.level)?;
        Ok(Spaces::new(mesh, self.darcy_family.element()).expect("H(div) family"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub step: usize,
    pub t: f64,
    /// L2 norms of `(u_f, p_f, θ_f, u_p, φ_p, θ_p)`.
    pub norms: [f64; 6],
}

pub fn write_diagnostics_csv<W: Write>(rows: &[StepDiagnostics], mut w: W) -> std::io::Result<()> {
    writeln!(
        w,
        "step,t,norm_uf,norm_pf,norm_thf,norm_up,norm_phip,norm_thp"
    )?;
    for r in rows {
        write!(w, "{},{}", r.step, r.t)?;
        for v in r.norms {
            write!(w, ",{v:e}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

const STAGES: [&str; 4] = [
    "navier-stokes",
    "fluid temperature",
    "darcy",
    "porous temperature",
];

/// Marches one sample. Holds the cached assembly data and the
/// factorizations: Darcy is factored once, the other three reuse their
/// symbolic analysis.
pub struct Stepper<'a> {
    asm: Assembler<'a>,
    tolerance: f64,
    step: usize,
    lu: [Option<Factorization>; 4],
}

impl<'a> Stepper<'a> {
    pub fn new(spaces: &'a Spaces, ctx: FormContext<'a>) -> Result<Self, StepError> {
        let asm = Assembler::new(spaces, ctx).map_err(|source| StepError::Assembly {
            step: 0,
            stage: "setup",
            source,
        })?;
        Ok(Self {
            asm,
            tolerance: SOLVE_TOLERANCE,
            step: 0,
            lu: [None, None, None, None],
        })
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn assembler(&self) -> &Assembler<'a> {
        &self.asm
    }

    fn assembled(
        &self,
        stage: usize,
        r: Result<SparseSystem, AssemblyError>,
    ) -> Result<SparseSystem, StepError> {
        r.map_err(|source| StepError::Assembly {
            step: self.step,
            stage: STAGES[stage],
            source,
        })
    }

    fn solve(&mut self, stage: usize, sys: &SparseSystem, t: f64) -> Result<Vec<f64>, StepError> {
        let wrap = |source: LinalgError| StepError::Solve {
            step: self.step,
            t,
            stage: STAGES[stage],
            source,
        };
        let (x, f) =
            solve_with_tolerance(sys, self.lu[stage].take(), self.tolerance).map_err(wrap)?;
        self.lu[stage] = Some(f);
        Ok(x)
    }

    /// Step 1: returns `(u_f, p_f)` at `t_next`.
    pub fn step1(
        &mut self,
        u_f_old: &[f64],
        theta_f_old: &[f64],
        problem: &dyn ProblemData,
        t_next: f64,
    ) -> Result<(Vec<f64>, Vec<f64>), StepError> {
        let sys = self.assembled(0, self.asm.ns(u_f_old, theta_f_old, problem, t_next))?;
        let x = self.solve(0, &sys, t_next)?;
        let lay = self.asm.ns_layout();
        Ok((x[..2 * lay.nv].to_vec(), x[lay.p()..lay.lambda()].to_vec()))
    }

    /// Step 2: fluid temperature at `t_next`; sees only level-`n` porous data.
    pub fn step2(
        &mut self,
        u_f_old: &[f64],
        theta_f_old: &[f64],
        theta_p_old: &[f64],
        problem: &dyn ProblemData,
        t_next: f64,
    ) -> Result<Vec<f64>, StepError> {
        let sys = self.assembled(
            1,
            self.asm
                .theta_f(u_f_old, theta_f_old, theta_p_old, problem, t_next),
        )?;
        self.solve(1, &sys, t_next)
    }

    /// Step 3: returns `(u_p, φ_p)` at `t_next`.
    pub fn step3(
        &mut self,
        u_p_old: &[f64],
        theta_p_old: &[f64],
        problem: &dyn ProblemData,
        t_next: f64,
    ) -> Result<(Vec<f64>, Vec<f64>), StepError> {
        let sys = self.assembled(2, self.asm.darcy(u_p_old, theta_p_old, problem, t_next))?;
        let x = self.solve(2, &sys, t_next)?;
        let lay = self.asm.darcy_layout();
        Ok((x[..lay.nu].to_vec(), x[lay.phi()..lay.lambda()].to_vec()))
    }

    /// Step 4: porous temperature at `t_next`, using the new fluid
    /// temperature in the penalty and the old one in the flux.
    pub fn step4(
        &mut self,
        u_p_old: &[f64],
        theta_p_old: &[f64],
        theta_f_new: &[f64],
        theta_f_old: &[f64],
        problem: &dyn ProblemData,
        t_next: f64,
    ) -> Result<Vec<f64>, StepError> {
        let sys = self.assembled(
            3,
            self.asm.theta_p(
                u_p_old,
                theta_p_old,
                theta_f_new,
                theta_f_old,
                problem,
                t_next,
            ),
        )?;
        self.solve(3, &sys, t_next)
    }

    /// Steps 1 to 4 from `s` to `t_next`.
    pub fn advance_to(
        &mut self,
        s: &CoupledState,
        problem: &dyn ProblemData,
        t_next: f64,
    ) -> Result<CoupledState, StepError> {
        self.step += 1;
        let (u_f, p_f) = self.step1(&s.u_f, &s.theta_f, problem, t_next)?;
        let theta_f = self.step2(&s.u_f, &s.theta_f, &s.theta_p, problem, t_next)?;
        let (u_p, phi_p) = self.step3(&s.u_p, &s.theta_p, problem, t_next)?;
        let theta_p = self.step4(&s.u_p, &s.theta_p, &theta_f, &s.theta_f, problem, t_next)?;
        Ok(CoupledState {
            t: t_next,
            u_f,
            p_f,
            theta_f,
            u_p,
            phi_p,
            theta_p,
        })
    }

    pub fn advance(
        &mut self,
        s: &CoupledState,
        problem: &dyn ProblemData,
    ) -> Result<CoupledState, StepError> {
        let t_next = s.t + self.asm.context().dt;
        self.advance_to(s, problem, t_next)
    }
}

/// One time step with freshly built operators.
pub fn advance(
    state: &CoupledState,
    ctx: &FormContext<'_>,
    problem: &dyn ProblemData,
    spaces: &Spaces,
) -> Result<CoupledState, StepError> {
    Stepper::new(spaces, ctx.clone())?.advance(state, problem)
}

/// Marches from the interpolated initial data to `T` on prebuilt spaces.
pub fn run_sample_on(
    spaces: &Spaces,
    config: &RunConfig,
    sample: &ConductivitySample,
    problem: &dyn ProblemData,
) -> Result<(CoupledState, Vec<StepDiagnostics>), StepError> {
    let n = config.validate()?;
    let ctx = FormContext::new(config.params, sample, config.dt, spaces).map_err(|source| {
        StepError::Assembly {
            step: 0,
            stage: "setup",
            source,
        }
    })?;
    let mut stepper = Stepper::new(spaces, ctx)?.with_tolerance(config.solver_tolerance);
    let mut state = CoupledState::interpolated(spaces, problem, 0.0);
    let mut diags = Vec::with_capacity(n + 1);
    diags.push(StepDiagnostics {
        step: 0,
        t: 0.0,
        norms: field_norms(spaces, &state),
    });
    for k in 1..=n {
        let t = k as f64 * config.dt;
        state = stepper.advance_to(&state, problem, t)?;
        diags.push(StepDiagnostics {
            step: k,
            t,
            norms: field_norms(spaces, &state),
        });
    }
    Ok((state, diags))
}

pub fn run_sample(
    config: &RunConfig,
    sample: &ConductivitySample,
    problem: &dyn ProblemData,
) -> Result<(CoupledState, Vec<StepDiagnostics>), StepError> {
    config.validate()?;
    let spaces = config.spaces()?;
    run_sample_on(&spaces, config, sample, problem)
}

#[cfg(test)]
mod tests;
