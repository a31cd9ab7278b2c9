//! Manufactured solutions, discrete error norms and convergence estimators.

mod problems;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use problems::{
    build_affine_k_problem, build_constant_k_problem, ManufacturedProblem, ProblemKind,
};

use crate::elements::{p1_gradients, quadrature, CellGeometry, ERROR_DEGREE};
use crate::error::RateError;
use crate::space::{cell_geometry, Spaces};
use crate::stepper::{field_norms, CoupledState, ProblemData};

pub const FIELD_NAMES: [&str; 6] = ["u_f", "p_f", "theta_f", "u_p", "phi_p", "theta_p"];
/// Positions in six-field records of the four fields the tables report.
pub const TABLE_FIELDS: [usize; 4] = [0, 2, 3, 5];

/// Errors of the six fields: `l2` in L2, `energy` in H1 for `u_f`, `θ_f`,
/// `θ_p`, in the cellwise (broken) H1 norm for `u_p` and in L2 for the
/// pressures. `hdiv_up` is the H(div) norm of the `u_p` error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub l2: [f64; 6],
    pub energy: [f64; 6],
    pub hdiv_up: f64,
}

impl ErrorRecord {
    pub fn table_l2(&self) -> [f64; 4] {
        TABLE_FIELDS.map(|i| self.l2[i])
    }

    pub fn table_energy(&self) -> [f64; 4] {
        TABLE_FIELDS.map(|i| self.energy[i])
    }
}

/// Errors of `state` against the exact fields at time `t`, by degree-8
/// quadrature.
pub fn error_norms(
    spaces: &Spaces,
    state: &CoupledState,
    problem: &ManufacturedProblem,
    t: f64,
) -> ErrorRecord {
    debug_assert!(
        (t - state.t).abs() <= 1e-12 * t.abs().max(1.0),
        "error time differs from state time"
    );
    let q = quadrature(ERROR_DEGREE).expect("error degree supported");
    let m = &spaces.mesh;
    let nv = spaces.velocity_f.n_dofs;
    let mut l2 = [0.0; 6];
    let mut semi = [0.0; 6];
    for (c, &tri) in spaces.velocity_f.cells.iter().enumerate() {
        let g = cell_geometry(m, tri);
        for (p, w) in q.iter() {
            let w = w * g.det;
            let x = g.map(p);
            let ue = problem.velocity_f(x, t);
            let ge = problem.grad_velocity_f(x, t);
            for comp in 0..2 {
                let (v, d) =
                    spaces
                        .velocity_f
                        .eval_scalar(&state.u_f[comp * nv..(comp + 1) * nv], c, &g, p);
                l2[0] += w * (v - ue[comp]).powi(2);
                semi[0] += w * ((d[0] - ge[comp][0]).powi(2) + (d[1] - ge[comp][1]).powi(2));
            }
            let (pv, _) = spaces.pressure_f.eval_scalar(&state.p_f, c, &g, p);
            l2[1] += w * (pv - problem.pressure_f(x, t)).powi(2);
            let (tv, td) = spaces.theta_f.eval_scalar(&state.theta_f, c, &g, p);
            let tg = problem.grad_theta_f(x, t);
            l2[2] += w * (tv - problem.theta_f(x, t)).powi(2);
            semi[2] += w * ((td[0] - tg[0]).powi(2) + (td[1] - tg[1]).powi(2));
        }
    }
    let mut div_sq = 0.0;
    for (c, &tri) in spaces.velocity_p.cells.iter().enumerate() {
        let g = cell_geometry(m, tri);
        let du = hdiv_cell_gradient(spaces, &state.u_p, c, &g);
        for (p, w) in q.iter() {
            let w = w * g.det;
            let x = g.map(p);
            let (u, div) = spaces.velocity_p.eval_hdiv_field(&state.u_p, c, &g, p);
            let ue = problem.velocity_p(x, t);
            let ge = problem.grad_velocity_p(x, t);
            l2[3] += w * ((u[0] - ue[0]).powi(2) + (u[1] - ue[1]).powi(2));
            for i in 0..2 {
                semi[3] += w * ((du[i][0] - ge[i][0]).powi(2) + (du[i][1] - ge[i][1]).powi(2));
            }
            div_sq += w * (div - problem.div_velocity_p(x, t)).powi(2);
            let (pv, _) = spaces.pressure_p.eval_scalar(&state.phi_p, c, &g, p);
            l2[4] += w * (pv - problem.pressure_p(x, t)).powi(2);
            let (tv, td) = spaces.theta_p.eval_scalar(&state.theta_p, c, &g, p);
            let tg = problem.grad_theta_p(x, t);
            l2[5] += w * (tv - problem.theta_p(x, t)).powi(2);
            semi[5] += w * ((td[0] - tg[0]).powi(2) + (td[1] - tg[1]).powi(2));
        }
    }
    let energy = std::array::from_fn(|i| (l2[i] + semi[i]).sqrt());
    ErrorRecord {
        hdiv_up: (l2[3] + div_sq).sqrt(),
        l2: l2.map(f64::sqrt),
        energy,
    }
}

/// Gradient of an affine H(div) field on one cell, from its vertex values.
fn hdiv_cell_gradient(
    spaces: &Spaces,
    coeffs: &[f64],
    cell: usize,
    g: &CellGeometry,
) -> [[f64; 2]; 2] {
    let grads = p1_gradients(g);
    let mut du = [[0.0; 2]; 2];
    for (k, gl) in grads.iter().enumerate() {
        let mut b = [0.0; 3];
        b[k] = 1.0;
        let (v, _) = spaces.velocity_p.eval_hdiv_field(coeffs, cell, g, &b);
        for i in 0..2 {
            du[i][0] += v[i] * gl[0];
            du[i][1] += v[i] * gl[1];
        }
    }
    du
}

/// `ρ = log(e1/e2) / log(h1/h2)`.
pub fn rate(e1: f64, e2: f64, h1: f64, h2: f64) -> f64 {
    (e1 / e2).ln() / (h1 / h2).ln()
}

/// Rates between consecutive rows of a refinement sequence.
pub fn spatial_rates(h: &[f64], errors: &[f64]) -> Result<Vec<f64>, RateError> {
    if h.len() != errors.len() {
        return Err(RateError::LengthMismatch);
    }
    if h.len() < 2 {
        return Err(RateError::TooFewRows {
            needed: 2,
            found: h.len(),
        });
    }
    let mut out = Vec::with_capacity(h.len() - 1);
    for i in 1..h.len() {
        if !(h[i] < h[i - 1]) {
            return Err(RateError::NotRefining(i));
        }
        if errors[i] == 0.0 {
            return Err(RateError::ZeroError(i));
        }
        out.push(rate(errors[i - 1], errors[i], h[i - 1], h[i]));
    }
    Ok(out)
}

/// Successive-difference ratio `β` and the order `log2 β` it implies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemporalOrder {
    pub beta: f64,
    pub order: f64,
}

pub fn beta_ratio(coarse: f64, fine: f64) -> Result<TemporalOrder, RateError> {
    if fine == 0.0 || !fine.is_finite() {
        return Err(RateError::ZeroError(1));
    }
    let beta = coarse / fine;
    Ok(TemporalOrder {
        beta,
        order: beta.log2(),
    })
}

/// L2 norms of the field-wise difference of two states on the same spaces.
pub fn difference_norms(
    spaces: &Spaces,
    a: &CoupledState,
    b: &CoupledState,
) -> Result<[f64; 6], RateError> {
    let pairs = [
        (&a.u_f, &b.u_f),
        (&a.p_f, &b.p_f),
        (&a.theta_f, &b.theta_f),
        (&a.u_p, &b.u_p),
        (&a.phi_p, &b.phi_p),
        (&a.theta_p, &b.theta_p),
    ];
    if pairs.iter().any(|(x, y)| x.len() != y.len()) {
        return Err(RateError::LengthMismatch);
    }
    let sub =
        |x: &Vec<f64>, y: &Vec<f64>| x.iter().zip(y).map(|(p, q)| p - q).collect::<Vec<f64>>();
    let d = CoupledState {
        t: a.t,
        u_f: sub(pairs[0].0, pairs[0].1),
        p_f: sub(pairs[1].0, pairs[1].1),
        theta_f: sub(pairs[2].0, pairs[2].1),
        u_p: sub(pairs[3].0, pairs[3].1),
        phi_p: sub(pairs[4].0, pairs[4].1),
        theta_p: sub(pairs[5].0, pairs[5].1),
    };
    Ok(field_norms(spaces, &d))
}

/// `β = ‖v^{Δt} − v^{Δt/2}‖ / ‖v^{Δt/2} − v^{Δt/4}‖` for `u_f`, `θ_f`,
/// `u_p`, `θ_p` from final states computed with `Δt`, `Δt/2`, `Δt/4`.
pub fn temporal_order(
    spaces: &Spaces,
    states: [&CoupledState; 3],
) -> Result<[TemporalOrder; 4], RateError> {
    let d1 = difference_norms(spaces, states[0], states[1])?;
    let d2 = difference_norms(spaces, states[1], states[2])?;
    let mut out = [TemporalOrder {
        beta: 0.0,
        order: 0.0,
    }; 4];
    for (k, &i) in TABLE_FIELDS.iter().enumerate() {
        out[k] = beta_ratio(d1[i], d2[i])?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportKind {
    /// Rows keyed by `h`; the rate column is `ρ`.
    Spatial,
    /// Rows keyed by `Δt`; the rate column is the ratio `β` of consecutive
    /// rows.
    Temporal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub key: f64,
    /// `u_f`, `θ_f`, `u_p`, `θ_p`.
    pub l2: [f64; 4],
    pub energy: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub kind: ReportKind,
    pub rows: Vec<ReportRow>,
}

pub const L2_HEADER: &str = "h_or_dt,err_uf_L2,rate,err_thf_L2,rate,err_up_L2,rate,err_thp_L2,rate";
pub const ENERGY_HEADER: &str =
    "h_or_dt,err_uf_H1,rate,err_thf_H1,rate,err_up_Hdiv,rate,err_thp_H1,rate";

impl ConvergenceReport {
    pub fn new(kind: ReportKind) -> Self {
        Self {
            kind,
            rows: Vec::new(),
        }
    }

    fn rates_of(&self, pick: impl Fn(&ReportRow) -> [f64; 4]) -> Vec<Option<[f64; 4]>> {
        let mut out = vec![None];
        for w in self.rows.windows(2) {
            let (a, b) = (pick(&w[0]), pick(&w[1]));
            out.push(Some(std::array::from_fn(|i| match self.kind {
                ReportKind::Spatial => rate(a[i], b[i], w[0].key, w[1].key),
                ReportKind::Temporal => a[i] / b[i],
            })));
        }
        out.truncate(self.rows.len());
        out
    }

    pub fn l2_rates(&self) -> Vec<Option<[f64; 4]>> {
        self.rates_of(|r| r.l2)
    }

    pub fn energy_rates(&self) -> Vec<Option<[f64; 4]>> {
        self.rates_of(|r| r.energy)
    }

    fn write_table<W: Write>(&self, mut w: W, header: &str, energy: bool) -> std::io::Result<()> {
        writeln!(w, "{header}")?;
        let rates = if energy {
            self.energy_rates()
        } else {
            self.l2_rates()
        };
        for (row, r) in self.rows.iter().zip(rates) {
            write!(w, "{:e}", row.key)?;
            let e = if energy { row.energy } else { row.l2 };
            for i in 0..4 {
                match r {
                    Some(r) => write!(w, ",{:e},{:e}", e[i], r[i])?,
                    None => write!(w, ",{:e},", e[i])?,
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn write_l2_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        self.write_table(w, L2_HEADER, false)
    }

    pub fn write_energy_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        self.write_table(w, ENERGY_HEADER, true)
    }
}

/// Parsed body of a report CSV: per row the key, four errors and four
/// optional rates.
pub type ParsedTable = Vec<(f64, [f64; 4], [Option<f64>; 4])>;

pub fn parse_report_csv(text: &str) -> Result<ParsedTable, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty table")?;
    if header != L2_HEADER && header != ENERGY_HEADER {
        return Err(format!("unexpected header {header}"));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|e| format!("{s}: {e}"));
    let mut out = Vec::new();
    for line in lines.filter(|l| !l.is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(format!("row has {} fields: {line}", f.len()));
        }
        let mut e = [0.0; 4];
        let mut r = [None; 4];
        for i in 0..4 {
            e[i] = num(f[1 + 2 * i])?;
            r[i] = if f[2 + 2 * i].is_empty() {
                None
            } else {
                Some(num(f[2 + 2 * i])?)
            };
        }
        out.push((num(f[0])?, e, r));
    }
    Ok(out)
}
