//! Manufactured solutions on the unit channel `Ω_p = (0,1)²`,
//! `Ω_f = (0,1)×(1,2)` with forcing derived by hand from the strong form.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::assembly::PhysicalParams;
use crate::stepper::ProblemData;

/// Which printed solution family the instance belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ProblemKind {
    /// Constant conductivity `k`; `u_f` scaled by `k`.
    ConstantK { k: f64 },
    /// `k = 3 + σ(λ1 + λ2)`; `u_f` scaled by `1/k`.
    AffineK { sigma: f64, lambda: [f64; 2] },
}

/// Closed-form fields and sources of one manufactured instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManufacturedProblem {
    pub kind: ProblemKind,
    pub a: f64,
    pub params: PhysicalParams,
    /// Amplitude factor of `u_f`.
    pub kappa: f64,
    /// Darcy conductivity.
    pub k: f64,
}

pub fn build_constant_k_problem(k_value: f64, a: f64) -> ManufacturedProblem {
    assert!(k_value > 0.0, "conductivity must be positive");
    ManufacturedProblem {
        kind: ProblemKind::ConstantK { k: k_value },
        a,
        params: PhysicalParams::default(),
        kappa: k_value,
        k: k_value,
    }
}

pub fn build_affine_k_problem(lambda: [f64; 2], sigma: f64, a: f64) -> ManufacturedProblem {
    assert!(
        lambda.iter().all(|l| (-1.0..=1.0).contains(l)),
        "draws must lie in [-1, 1]"
    );
    let k = 3.0 + sigma * (lambda[0] + lambda[1]);
    assert!(k > 0.0, "conductivity must be positive");
    ManufacturedProblem {
        kind: ProblemKind::AffineK { sigma, lambda },
        a,
        params: PhysicalParams::default(),
        kappa: 1.0 / k,
        k,
    }
}

// x²(x−1)², x(x−1)(2x−1) and their y counterparts, with derivatives.
fn x2(x: f64) -> [f64; 3] {
    [
        x * x * (x - 1.0).powi(2),
        2.0 * x3(x)[0],
        12.0 * x * x - 12.0 * x + 2.0,
    ]
}
fn x3(x: f64) -> [f64; 3] {
    [
        x * (x - 1.0) * (2.0 * x - 1.0),
        6.0 * x * x - 6.0 * x + 1.0,
        12.0 * x - 6.0,
    ]
}

impl ManufacturedProblem {
    pub fn with_params(mut self, params: PhysicalParams) -> Self {
        self.params = params;
        self
    }

    /// `X2(x), G(y), X3(x), Y2(y)` with first and second derivatives.
    fn uf_parts(&self, p: [f64; 2]) -> ([f64; 3], [f64; 3], [f64; 3], [f64; 3]) {
        let (x, y) = (p[0], p[1]);
        (x2(x), x3(y), x3(x), x2(y))
    }

    pub fn grad_velocity_f(&self, p: [f64; 2], t: f64) -> [[f64; 2]; 2] {
        let s = 10.0 * self.kappa * t.cos();
        let (xx2, g, xx3, y2) = self.uf_parts(p);
        [
            [s * xx2[1] * g[0], s * xx2[0] * g[1]],
            [-s * xx3[1] * y2[0], -s * xx3[0] * y2[1]],
        ]
    }

    pub fn grad_theta_f(&self, p: [f64; 2], t: f64) -> [f64; 2] {
        let (x, y) = (p[0], p[1]);
        let e = self.a * (-t).exp();
        [e * (1.0 - 2.0 * x) * (1.0 - y), -e * x * (1.0 - x)]
    }

    pub fn grad_theta_p(&self, p: [f64; 2], t: f64) -> [f64; 2] {
        let (x, y) = (p[0], p[1]);
        let e = self.a * (-t).exp();
        [
            e * (1.0 - 2.0 * x) * (y - y * y),
            e * x * (1.0 - x) * (1.0 - 2.0 * y),
        ]
    }

    pub fn grad_velocity_p(&self, p: [f64; 2], t: f64) -> [[f64; 2]; 2] {
        let c = 2.0 * PI * PI * t.cos();
        let (sx, cx) = (PI * p[0]).sin_cos();
        let (sy, cy) = (PI * p[1]).sin_cos();
        let c2y = (2.0 * PI * p[1]).cos();
        let c2x = (2.0 * PI * p[0]).cos();
        [
            [c * 2.0 * sx * cx * sy * cy, c * sx * sx * c2y],
            [-c * sy * sy * c2x, -c * 2.0 * sx * cx * sy * cy],
        ]
    }

    /// `∇·u_p`, identically zero.
    pub fn div_velocity_p(&self, _p: [f64; 2], _t: f64) -> f64 {
        0.0
    }

    fn laplace_velocity_f(&self, p: [f64; 2], t: f64) -> [f64; 2] {
        let s = 10.0 * self.kappa * t.cos();
        let (xx2, g, xx3, y2) = self.uf_parts(p);
        [
            s * (xx2[2] * g[0] + xx2[0] * g[2]),
            -s * (xx3[2] * y2[0] + xx3[0] * y2[2]),
        ]
    }

    fn grad_pressure_f(&self, p: [f64; 2], t: f64) -> [f64; 2] {
        let c = t.cos();
        [20.0 * (2.0 * p[1] - 1.0) * c, 20.0 * (2.0 * p[0] - 1.0) * c]
    }

    fn grad_pressure_p(&self, p: [f64; 2], t: f64) -> [f64; 2] {
        let c = t.cos();
        let (x, y) = (PI * p[0], PI * p[1]);
        [-PI * x.sin() * y.cos() * c, -PI * x.cos() * y.sin() * c]
    }
}

impl ProblemData for ManufacturedProblem {
    fn velocity_f(&self, p: [f64; 2], t: f64) -> [f64; 2] {
        let s = 10.0 * self.kappa * t.cos();
        let (xx2, g, xx3, y2) = self.uf_parts(p);
        [s * xx2[0] * g[0], -s * xx3[0] * y2[0]]
    }

    fn pressure_f(&self, p: [f64; 2], t: f64) -> f64 {
        10.0 * (2.0 * p[0] - 1.0) * (2.0 * p[1] - 1.0) * t.cos()
    }

    fn theta_f(&self, p: [f64; 2], t: f64) -> f64 {
        self.a * p[0] * (1.0 - p[0]) * (1.0 - p[1]) * (-t).exp()
    }

    fn velocity_p(&self, p: [f64; 2], t: f64) -> [f64; 2] {
        let c = t.cos();
        let (sx, cx) = (PI * p[0]).sin_cos();
        let (sy, cy) = (PI * p[1]).sin_cos();
        [
            2.0 * PI * sx * sx * sy * cy * c,
            -2.0 * PI * sx * sy * sy * cx * c,
        ]
    }

    fn pressure_p(&self, p: [f64; 2], t: f64) -> f64 {
        (PI * p[0]).cos() * (PI * p[1]).cos() * t.cos()
    }

    fn theta_p(&self, p: [f64; 2], t: f64) -> f64 {
        self.a * p[0] * (1.0 - p[0]) * (p[1] - p[1] * p[1]) * (-t).exp()
    }

    /// `u_t − PrΔu + (u·∇)u + ∇p − PrRa ξ θ_f`.
    fn fluid_force(&self, p: [f64; 2], t: f64) -> [f64; 2] {
        let pp = &self.params;
        let u = self.velocity_f(p, t);
        let g = self.grad_velocity_f(p, t);
        let lap = self.laplace_velocity_f(p, t);
        let gp = self.grad_pressure_f(p, t);
        let s = -10.0 * self.kappa * t.sin();
        let (xx2, gg, xx3, y2) = self.uf_parts(p);
        let ut = [s * xx2[0] * gg[0], -s * xx3[0] * y2[0]];
        let th = self.theta_f(p, t);
        let mut f = [0.0; 2];
        for i in 0..2 {
            let adv = u[0] * g[i][0] + u[1] * g[i][1];
            f[i] = ut[i] - pp.pr * lap[i] + adv + gp[i];
        }
        f[1] -= pp.pr * pp.ra * th;
        f
    }

    /// `θ_t − k_f Δθ_f + u_f·∇θ_f`.
    fn fluid_heat(&self, p: [f64; 2], t: f64) -> f64 {
        let th = self.theta_f(p, t);
        let lap = -2.0 * self.a * (1.0 - p[1]) * (-t).exp();
        let u = self.velocity_f(p, t);
        let g = self.grad_theta_f(p, t);
        -th - self.params.k_f * lap + u[0] * g[0] + u[1] * g[1]
    }

    /// `θ_t − k_p Δθ_p + u_p·∇θ_p`.
    fn porous_heat(&self, p: [f64; 2], t: f64) -> f64 {
        let (x, y) = (p[0], p[1]);
        let th = self.theta_p(p, t);
        let lap = -2.0 * self.a * ((y - y * y) + x * (1.0 - x)) * (-t).exp();
        let u = self.velocity_p(p, t);
        let g = self.grad_theta_p(p, t);
        -th - self.params.k_p * lap + u[0] * g[0] + u[1] * g[1]
    }

    fn has_darcy_load(&self) -> bool {
        true
    }

    /// `(C_a k/L²) u_t + Pr u + (k/L²)∇φ − (PrRa k/L²) ξ θ_p`.
    fn darcy_load(&self, p: [f64; 2], t: f64) -> [f64; 2] {
        let pp = &self.params;
        let l2 = pp.l * pp.l;
        let (sx, cx) = (PI * p[0]).sin_cos();
        let (sy, cy) = (PI * p[1]).sin_cos();
        let st = -t.sin();
        let ut = [
            2.0 * PI * sx * sx * sy * cy * st,
            -2.0 * PI * sx * sy * sy * cx * st,
        ];
        let u = self.velocity_p(p, t);
        let gphi = self.grad_pressure_p(p, t);
        let th = self.theta_p(p, t);
        let mut f = [0.0; 2];
        for i in 0..2 {
            f[i] = pp.c_a * self.k / l2 * ut[i] + pp.pr * u[i] + self.k / l2 * gphi[i];
        }
        f[1] -= pp.pr * pp.ra * self.k / l2 * th;
        f
    }
}
