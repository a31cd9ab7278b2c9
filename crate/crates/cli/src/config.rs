//! Versioned JSON experiment configuration.

use std::path::PathBuf;

use geotherm::assembly::PhysicalParams;
use geotherm::mcm::SamplerSpec;
use geotherm::stepper::{DarcyFamily, RunConfig};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    DetConvergence,
    StochConvergence,
    TemporalConvergence,
    PenaltyStudy,
    SingleRun,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::DetConvergence => "det_convergence",
            Experiment::StochConvergence => "stoch_convergence",
            Experiment::TemporalConvergence => "temporal_convergence",
            Experiment::PenaltyStudy => "penalty_study",
            Experiment::SingleRun => "single_run",
        }
    }

    fn spatial(self) -> bool {
        matches!(
            self,
            Experiment::DetConvergence | Experiment::StochConvergence
        )
    }
}

/// Time settings filled in when the config leaves them out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// `T = 0.1`, `Δt = 0.005`.
    #[default]
    Scaled,
    /// `T = 0.5`, `Δt = 0.001`.
    Full,
}

impl Profile {
    pub fn t_final(self) -> f64 {
        match self {
            Profile::Scaled => 0.1,
            Profile::Full => 0.5,
        }
    }

    pub fn dt(self) -> f64 {
        match self {
            Profile::Scaled => 0.005,
            Profile::Full => 0.001,
        }
    }
}

/// Fields left out are filled by [`ExperimentConfig::resolve`]; the resolved
/// form has every field set and resolves to itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub experiment: Experiment,
    #[serde(default)]
    pub params: PhysicalParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<Profile>,
    /// Cells per unit length; `h = 1/level`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Step sizes of a temporal study, coarse to fine.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_list: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub darcy_family: Option<DarcyFamily>,
    /// Penalty values of a penalty study.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_list: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conductivity: Option<SamplerSpec>,
    /// Amplitude `a` of the manufactured solution.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| format!("config does not parse: {e}"))
    }

    /// Fills defaults and applies the command-line overrides.
    pub fn resolve(&self, overrides: &Overrides) -> Self {
        let mut c = self.clone();
        let e = c.experiment;
        let profile = if overrides.full {
            Profile::Full
        } else {
            c.profile.unwrap_or_default()
        };
        c.profile = Some(profile);
        c.levels.get_or_insert_with(|| match e {
            Experiment::DetConvergence | Experiment::StochConvergence => vec![4, 8, 16, 32],
            Experiment::TemporalConvergence => vec![32],
            Experiment::PenaltyStudy | Experiment::SingleRun => vec![8],
        });
        c.t_final.get_or_insert(profile.t_final());
        if e == Experiment::TemporalConvergence {
            c.dt_list
                .get_or_insert_with(|| vec![1.0 / 20.0, 1.0 / 40.0, 1.0 / 80.0, 1.0 / 160.0]);
        } else if c.dt_list.is_none() {
            c.dt.get_or_insert(profile.dt());
        }
        c.samples.get_or_insert(match e {
            Experiment::StochConvergence => 16,
            _ => 1,
        });
        if let Some(seed) = overrides.seed {
            c.base_seed = Some(seed);
        }
        c.base_seed.get_or_insert(0);
        c.darcy_family.get_or_insert_with(DarcyFamily::default);
        if e == Experiment::PenaltyStudy {
            c.gamma_list
                .get_or_insert_with(|| vec![0.0, 1e-3, 1.0, 1e3, 1e5]);
        }
        c.conductivity.get_or_insert(match e {
            Experiment::StochConvergence => SamplerSpec::AffineUniform { sigma: 0.1 },
            _ => SamplerSpec::Constant { k: 2.21 },
        });
        c.amplitude.get_or_insert(1.0);
        if let Some(out) = &overrides.out {
            c.output = Some(out.clone());
        }
        c.output
            .get_or_insert_with(|| PathBuf::from(format!("results/{}", e.name())));
        c
    }

    /// Every violated invariant of a resolved config.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let e = self.experiment;
        if self.version != SCHEMA_VERSION {
            v.push(format!(
                "version must be {SCHEMA_VERSION}, got {}",
                self.version
            ));
        }
        if let Err(err) = self.params.validate() {
            v.push(err.to_string());
        }
        let levels = self.levels.clone().unwrap_or_default();
        if levels.iter().any(|&l| l == 0) {
            v.push("mesh levels must be positive".into());
        }
        if e.spatial() {
            if levels.len() < 2 {
                v.push("a spatial study needs at least two mesh levels".into());
            }
            if levels.windows(2).any(|w| w[1] <= w[0]) {
                v.push(format!("mesh levels {levels:?} are not strictly refining"));
            }
        } else if levels.len() != 1 {
            v.push(format!(
                "{} takes exactly one mesh level, got {}",
                e.name(),
                levels.len()
            ));
        }
        let t = self.t_final.unwrap_or(f64::NAN);
        if !(t > 0.0 && t.is_finite()) {
            v.push(format!("final time T = {t} must be positive"));
        }
        let dts = self.time_steps();
        match (e, &self.dt, &self.dt_list) {
            (_, Some(_), Some(_)) => v.push("give either dt or dt_list, not both".into()),
            (Experiment::TemporalConvergence, _, Some(list)) => {
                if list.len() < 3 {
                    v.push(format!(
                        "a temporal study needs at least three step sizes, got {}",
                        list.len()
                    ));
                }
                if list.windows(2).any(|w| !(w[1] < w[0])) {
                    v.push(format!("step sizes {list:?} must strictly decrease"));
                }
            }
            (Experiment::TemporalConvergence, _, None) => {
                v.push("a temporal study needs dt_list".into())
            }
            (_, _, Some(_)) => v.push(format!("{} takes a single dt, not dt_list", e.name())),
            (_, None, None) => v.push("dt is missing".into()),
            _ => {}
        }
        if t > 0.0 {
            for dt in &dts {
                let rc = RunConfig::new(self.params, *dt, t, 1);
                if let Err(err) = rc.steps() {
                    v.push(err.to_string());
                }
            }
        }
        let samples = self.samples.unwrap_or(0);
        if samples == 0 {
            v.push("sample count J must be at least 1".into());
        }
        if matches!(e, Experiment::TemporalConvergence | Experiment::SingleRun) && samples > 1 {
            v.push(format!("{} runs sample 0 only; set samples to 1", e.name()));
        }
        match (e, &self.conductivity) {
            (Experiment::DetConvergence, Some(s)) if !matches!(s, SamplerSpec::Constant { .. }) => {
                v.push("det_convergence needs a constant conductivity".into())
            }
            (Experiment::DetConvergence, _) if samples > 1 => v.push(
                "det_convergence runs a single deterministic sample; set samples to 1".into(),
            ),
            (e, Some(SamplerSpec::KlField { .. })) if e != Experiment::SingleRun => v.push(
                "series conductivity fields have no exact solution; use them with single_run"
                    .into(),
            ),
            _ => {}
        }
        match &self.conductivity {
            Some(SamplerSpec::Constant { k }) if !(*k > 0.0 && k.is_finite()) => {
                v.push(format!("conductivity k = {k} must be positive"))
            }
            Some(SamplerSpec::AffineUniform { sigma }) if !(*sigma >= 0.0 && *sigma < 1.5) => {
                v.push(format!("sigma = {sigma} must lie in [0, 1.5)"))
            }
            None => v.push("conductivity is missing".into()),
            _ => {}
        }
        match (e, &self.gamma_list) {
            (Experiment::PenaltyStudy, Some(g)) => {
                if g.len() < 2 {
                    v.push(format!(
                        "penalty_study needs at least two gamma values, got {}",
                        g.len()
                    ));
                }
                if g.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
                    v.push(format!("gamma values {g:?} must be finite and nonnegative"));
                }
            }
            (Experiment::PenaltyStudy, None) => v.push("penalty_study needs gamma_list".into()),
            (_, Some(_)) => v.push(format!(
                "{} takes its penalty from params.gamma, not gamma_list",
                e.name()
            )),
            _ => {}
        }
        if !self.amplitude.is_some_and(f64::is_finite) {
            v.push("amplitude must be finite".into());
        }
        if self.output.is_none() {
            v.push("output directory is missing".into());
        }
        v
    }

    pub fn time_steps(&self) -> Vec<f64> {
        match (&self.dt, &self.dt_list) {
            (Some(dt), _) => vec![*dt],
            (None, Some(list)) => list.clone(),
            _ => Vec::new(),
        }
    }

    /// Run settings for one mesh level and step size.
    pub fn run_config(&self, level: usize, dt: f64) -> RunConfig {
        let mut rc = RunConfig::new(self.params, dt, self.t_final.expect("resolved"), level);
        rc.darcy_family = self.darcy_family.unwrap_or_default();
        rc
    }

    /// SHA-256 of the resolved JSON form without the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = None;
        geotherm::mcm::sha256_hex(&serde_json::to_vec(&c).expect("config serializes"))
    }
}

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub full: bool,
}
