//! Experiment execution and artifact writing.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use geotherm::mcm::{matched_problem, run_mc, McOptions, McPlan, McResult};
use geotherm::randfield::{ConductivityKind, GENERATOR};
use geotherm::stepper::{run_sample_on, write_diagnostics_csv, CoupledState};
use geotherm::verify::{
    build_constant_k_problem, difference_norms, error_norms, ConvergenceReport, ReportKind,
    ReportRow, FIELD_NAMES, TABLE_FIELDS,
};
use serde::Serialize;

use crate::config::{Experiment, ExperimentConfig};
use crate::CliError;

pub const PENALTY_HEADER: &str =
    "gamma,err_uf_L2,err_thf_L2,err_up_L2,err_thp_L2,err_uf_H1,err_thf_H1,err_up_Hdiv,err_thp_H1";
pub const ORDER_HEADER: &str = "dt,order_uf,order_thf,order_up,order_thp";

#[derive(Debug, Serialize)]
struct Metadata<'a> {
    experiment: &'a str,
    version: &'a str,
    generator: &'a str,
    config_hash: String,
    samples: usize,
    base_seed: u64,
}

/// Output of one experiment: the files written and the summary text.
#[derive(Debug)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

struct Sink {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Sink {
    fn put(&mut self, name: &str, body: impl AsRef<[u8]>) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, body)?;
        self.files.push(path);
        Ok(())
    }

    fn csv(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    ) -> Result<(), CliError> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.put(name, buf)
    }
}

/// Runs a resolved, valid config and writes its artifacts to `config.output`.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<Outcome, CliError> {
    let problems = cfg.violations();
    if !problems.is_empty() {
        return Err(CliError::Invalid(problems));
    }
    let dir = cfg.output.clone().expect("resolved");
    fs::create_dir_all(&dir)?;
    let mut sink = Sink {
        dir,
        files: Vec::new(),
    };
    let name = cfg.experiment.name();
    let mut summary = String::new();
    let _ = writeln!(summary, "experiment: {name}");
    let _ = writeln!(summary, "config hash: {}", cfg.hash());
    let _ = writeln!(
        summary,
        "T = {}, levels = {:?}, steps = {:?}, J = {}, seed = {}",
        cfg.t_final.unwrap(),
        cfg.levels.as_deref().unwrap(),
        cfg.time_steps(),
        cfg.samples.unwrap(),
        cfg.base_seed.unwrap()
    );
    summary.push('\n');
    match cfg.experiment {
        Experiment::DetConvergence | Experiment::StochConvergence => {
            spatial(cfg, jobs, &mut sink, &mut summary)?
        }
        Experiment::TemporalConvergence => temporal(cfg, &mut sink, &mut summary)?,
        Experiment::PenaltyStudy => penalty(cfg, jobs, &mut sink, &mut summary)?,
        Experiment::SingleRun => single(cfg, &mut sink, &mut summary)?,
    }
    let meta = Metadata {
        experiment: name,
        version: env!("CARGO_PKG_VERSION"),
        generator: GENERATOR,
        config_hash: cfg.hash(),
        samples: cfg.samples.unwrap(),
        base_seed: cfg.base_seed.unwrap(),
    };
    sink.put(
        "metadata.json",
        serde_json::to_string_pretty(&meta).expect("metadata serializes") + "\n",
    )?;
    sink.put(
        "config.resolved.json",
        serde_json::to_string_pretty(cfg).expect("config serializes") + "\n",
    )?;
    sink.put("summary.txt", &summary)?;
    Ok(Outcome {
        files: sink.files,
        summary,
    })
}

fn plan(cfg: &ExperimentConfig, level: usize, dt: f64) -> McPlan {
    McPlan {
        samples: cfg.samples.unwrap(),
        base_seed: cfg.base_seed.unwrap(),
        sampler: cfg.conductivity.clone().unwrap(),
        run: cfg.run_config(level, dt),
        amplitude: cfg.amplitude.unwrap(),
    }
}

fn monte_carlo(plan: &McPlan, jobs: usize, records: &Path) -> Result<McResult, CliError> {
    let t0 = std::time::Instant::now();
    let res = run_mc(
        plan,
        &McOptions {
            jobs,
            records_dir: Some(records.to_path_buf()),
        },
    )?;
    eprintln!(
        "  h = 1/{}, dt = {}, gamma = {}: {} sample(s) in {:.1} s",
        plan.run.level,
        plan.run.dt,
        plan.run.params.gamma,
        plan.samples,
        t0.elapsed().as_secs_f64()
    );
    Ok(res)
}

fn spatial(
    cfg: &ExperimentConfig,
    jobs: usize,
    sink: &mut Sink,
    summary: &mut String,
) -> Result<(), CliError> {
    let name = cfg.experiment.name();
    let dt = cfg.dt.unwrap();
    let mut report = ConvergenceReport::new(ReportKind::Spatial);
    for &level in cfg.levels.as_deref().unwrap() {
        let p = plan(cfg, level, dt);
        let res = monte_carlo(
            &p,
            jobs,
            &sink.dir.join("samples").join(format!("level_{level}")),
        )?;
        sink.csv(&format!("samples_level_{level}.csv"), |b| {
            res.write_records_csv(b)
        })?;
        report
            .rows
            .push(res.aggregate.report_row(1.0 / level as f64));
    }
    sink.csv(&format!("{name}_l2.csv"), |b| report.write_l2_csv(b))?;
    sink.csv(&format!("{name}_energy.csv"), |b| {
        report.write_energy_csv(b)
    })?;
    let label = if cfg.samples.unwrap() > 1 {
        "RMS error"
    } else {
        "error"
    };
    summary.push_str(&table(
        &format!("L2 {label}"),
        "h",
        &report.rows,
        |r| r.l2,
        &report.l2_rates(),
        "rate",
    ));
    summary.push('\n');
    summary.push_str(&table(
        &format!("energy {label} (H1; broken H1 for u_p)"),
        "h",
        &report.rows,
        |r| r.energy,
        &report.energy_rates(),
        "rate",
    ));
    Ok(())
}

fn temporal(cfg: &ExperimentConfig, sink: &mut Sink, summary: &mut String) -> Result<(), CliError> {
    let level = cfg.levels.as_deref().unwrap()[0];
    let dts = cfg.time_steps();
    let sampler = cfg.conductivity.clone().unwrap();
    let sample = sampler
        .draw(cfg.base_seed.unwrap(), 0)
        .map_err(|e| CliError::Run(format!("sample 0: {e}")))?;
    let problem = matched_problem(&sample, cfg.amplitude.unwrap())?.with_params(cfg.params);
    let spaces = cfg.run_config(level, dts[0]).spaces()?;
    let mut states: Vec<CoupledState> = Vec::new();
    let mut exact = ConvergenceReport::new(ReportKind::Temporal);
    for &dt in &dts {
        let t0 = std::time::Instant::now();
        let (st, _) = run_sample_on(&spaces, &cfg.run_config(level, dt), &sample, &problem)?;
        eprintln!(
            "  h = 1/{level}, dt = {dt}: {:.1} s",
            t0.elapsed().as_secs_f64()
        );
        let e = error_norms(&spaces, &st, &problem, st.t);
        exact.rows.push(ReportRow {
            key: dt,
            l2: e.table_l2(),
            energy: e.table_energy(),
        });
        states.push(st);
    }
    let mut diffs = ConvergenceReport::new(ReportKind::Temporal);
    for (i, w) in states.windows(2).enumerate() {
        let d = difference_norms(&spaces, &w[0], &w[1])?;
        let l2 = TABLE_FIELDS.map(|k| d[k]);
        diffs.rows.push(ReportRow {
            key: dts[i],
            l2,
            energy: l2,
        });
    }
    let mut orders = String::from(ORDER_HEADER);
    orders.push('\n');
    for (row, r) in diffs.rows.iter().zip(diffs.l2_rates()).skip(1) {
        let r = r.expect("ratio after the first row");
        let _ = writeln!(
            orders,
            "{:e},{:e},{:e},{:e},{:e}",
            row.key,
            r[0].log2(),
            r[1].log2(),
            r[2].log2(),
            r[3].log2()
        );
    }
    sink.csv("temporal_convergence_l2.csv", |b| diffs.write_l2_csv(b))?;
    sink.put("temporal_orders.csv", &orders)?;
    sink.csv("temporal_exact_l2.csv", |b| exact.write_l2_csv(b))?;
    summary.push_str(&table(
        "successive differences |v(dt) - v(dt/2)| (L2)",
        "dt",
        &diffs.rows,
        |r| r.l2,
        &diffs.l2_rates(),
        "beta",
    ));
    summary.push_str("orders log2(beta):\n");
    for line in orders.lines().skip(1) {
        let _ = writeln!(summary, "  {line}");
    }
    summary.push('\n');
    summary.push_str(&table(
        "error against the exact solution (L2)",
        "dt",
        &exact.rows,
        |r| r.l2,
        &exact.l2_rates(),
        "ratio",
    ));
    Ok(())
}

fn penalty(
    cfg: &ExperimentConfig,
    jobs: usize,
    sink: &mut Sink,
    summary: &mut String,
) -> Result<(), CliError> {
    let level = cfg.levels.as_deref().unwrap()[0];
    let dt = cfg.dt.unwrap();
    let mut csv = String::from(PENALTY_HEADER);
    csv.push('\n');
    let mut rows = Vec::new();
    for (i, &gamma) in cfg.gamma_list.as_deref().unwrap().iter().enumerate() {
        let mut p = plan(cfg, level, dt);
        p.run.params.gamma = gamma;
        let res = monte_carlo(
            &p,
            jobs,
            &sink.dir.join("samples").join(format!("gamma_{i}")),
        )?;
        sink.csv(&format!("samples_gamma_{i}.csv"), |b| {
            res.write_records_csv(b)
        })?;
        let row = res.aggregate.report_row(gamma);
        let cells: Vec<String> = row
            .l2
            .iter()
            .chain(row.energy.iter())
            .map(|v| format!("{v:e}"))
            .collect();
        let _ = writeln!(csv, "{gamma:e},{}", cells.join(","));
        rows.push(row);
    }
    sink.put("penalty_study.csv", &csv)?;
    let none = vec![None; rows.len()];
    summary.push_str(&table(
        "L2 error by penalty",
        "gamma",
        &rows,
        |r| r.l2,
        &none,
        "",
    ));
    summary.push('\n');
    summary.push_str(&table(
        "energy error by penalty",
        "gamma",
        &rows,
        |r| r.energy,
        &none,
        "",
    ));
    Ok(())
}

fn single(cfg: &ExperimentConfig, sink: &mut Sink, summary: &mut String) -> Result<(), CliError> {
    let level = cfg.levels.as_deref().unwrap()[0];
    let rc = cfg.run_config(level, cfg.dt.unwrap());
    let sample = cfg
        .conductivity
        .clone()
        .unwrap()
        .draw(cfg.base_seed.unwrap(), 0)
        .map_err(|e| CliError::Run(format!("sample 0: {e}")))?;
    let a = cfg.amplitude.unwrap();
    let (problem, exact) = match &sample.kind {
        // forcing of the constant-k family at the mean level; no exact solution
        ConductivityKind::KlField { a0, .. } => (build_constant_k_problem(*a0, a), false),
        _ => (matched_problem(&sample, a)?, true),
    };
    let problem = problem.with_params(cfg.params);
    let spaces = rc.spaces()?;
    let (st, diags) = run_sample_on(&spaces, &rc, &sample, &problem)?;
    sink.csv("diagnostics.csv", |b| write_diagnostics_csv(&diags, b))?;
    let _ = writeln!(
        summary,
        "k range over the probe grid: [{:e}, {:e}]",
        sample.bounds.0, sample.bounds.1
    );
    let last = diags.last().expect("initial row");
    let _ = writeln!(summary, "final L2 norms at t = {}:", last.t);
    for (n, v) in FIELD_NAMES.iter().zip(last.norms) {
        let _ = writeln!(summary, "  {n:>8} {v:.6e}");
    }
    if exact {
        let e = error_norms(&spaces, &st, &problem, st.t);
        let mut csv = String::from("field,err_L2,err_energy\n");
        for (i, n) in FIELD_NAMES.iter().enumerate() {
            let _ = writeln!(csv, "{n},{:e},{:e}", e.l2[i], e.energy[i]);
        }
        let _ = writeln!(csv, "u_p_hdiv,{:e},{:e}", e.l2[3], e.hdiv_up);
        sink.put("errors.csv", &csv)?;
        summary.push_str("errors against the exact solution:\n");
        for line in csv.lines().skip(1) {
            let _ = writeln!(summary, "  {line}");
        }
    }
    Ok(())
}

fn table(
    title: &str,
    key: &str,
    rows: &[ReportRow],
    pick: impl Fn(&ReportRow) -> [f64; 4],
    rates: &[Option<[f64; 4]>],
    rate_name: &str,
) -> String {
    let mut s = format!("{title}\n{key:>10}");
    for n in ["u_f", "theta_f", "u_p", "theta_p"] {
        let _ = write!(s, " {n:>12}");
        if !rate_name.is_empty() {
            let _ = write!(s, " {rate_name:>6}");
        }
    }
    s.push('\n');
    for (row, r) in rows.iter().zip(rates) {
        let _ = write!(s, "{:>10.4e}", row.key);
        let e = pick(row);
        for i in 0..4 {
            let _ = write!(s, " {:>12.4e}", e[i]);
            if !rate_name.is_empty() {
                match r {
                    Some(r) => {
                        let _ = write!(s, " {:>6.3}", r[i]);
                    }
                    None => {
                        let _ = write!(s, " {:>6}", "-");
                    }
                }
            }
        }
        s.push('\n');
    }
    s
}
