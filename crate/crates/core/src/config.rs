//! Run configuration files (TOML).
//!
//! ```toml
//! engine = "exact"          # exact | tvmc | dicke
//! seed = 1
//!
//! [lattice]
//! geometry = "square"       # square | triangular
//! L = 4                     # Ly defaults to L
//! alpha = 3.0
//!
//! [schedule]
//! t_max = 30.0
//! dt_outer = 0.25           # spacing of recorded rows
//! ```
//!
//! Every field has a default; [`RunConfig::to_toml`] prints the effective
//! configuration, which is what run metadata records.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::MAX_SIZE_CAP;
use crate::lattice::{Geometry, LatticeSpec, Normalization};
use crate::pairproduct::SamplerOptions;
use crate::tvmc::{SolverMode, TdvpOptions, TvmcOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Exact,
    Tvmc,
    Dicke,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    pub geometry: Geometry,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "Ly", default, skip_serializing_if = "Option::is_none")]
    pub ly: Option<usize>,
    pub alpha: f64,
    pub normalization: Normalization,
    /// Overall coupling `𝒥`.
    pub coupling: f64,
}

impl Default for LatticeSection {
    fn default() -> Self {
        LatticeSection {
            geometry: Geometry::Square,
            l: 4,
            ly: None,
            alpha: 3.0,
            normalization: Normalization::Standard,
            coupling: 1.0,
        }
    }
}

impl LatticeSection {
    pub fn spec(&self) -> LatticeSpec {
        LatticeSpec::rectangular(self.geometry, self.l, self.ly.unwrap_or(self.l), self.alpha)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub t_max: f64,
    /// Spacing of recorded rows.
    pub dt_outer: f64,
    /// tVMC integration step; must divide `dt_outer`.
    pub dt: f64,
    /// Write a checkpoint every this many recorded rows (0 disables).
    pub checkpoint_every: usize,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        ScheduleSection { t_max: 30.0, dt_outer: 0.25, dt: 0.05, checkpoint_every: 20 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    pub walkers: usize,
    pub samples_per_stage: usize,
    /// Initial sweeps per walker (0 picks `10 N`).
    pub burn_in: usize,
    pub exchange_fraction: f64,
    /// Uniform configurations for fidelity estimates.
    pub fidelity_samples: usize,
}

impl Default for SamplerSection {
    fn default() -> Self {
        SamplerSection {
            walkers: 8,
            samples_per_stage: 10_000,
            burn_in: 0,
            exchange_fraction: 0.5,
            fidelity_samples: 10_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TdvpSection {
    pub epsilon: f64,
    pub epsilon0: f64,
    pub solver: SolverMode,
    pub rcond: f64,
    pub evolve_g: bool,
    pub max_residual: f64,
    pub energy_drift_bound: f64,
}

impl Default for TdvpSection {
    fn default() -> Self {
        let d = TdvpOptions::default();
        TdvpSection {
            epsilon: d.epsilon,
            epsilon0: d.epsilon0,
            solver: d.solver,
            rcond: d.rcond,
            evolve_g: d.evolve_g,
            max_residual: d.max_residual,
            energy_drift_bound: TvmcOptions::default().energy_drift_bound,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Output {
    /// Fidelities with `|CSS_±x>` and the GHZ state, and the coherence.
    Fidelities,
    /// `P(J^x)` tables (exact and Dicke engines).
    PJx,
    /// Overlaps with OAT `q`-cat snapshots.
    CatOverlaps,
    /// Pair-product parameters at every row (tVMC).
    Params,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetsSection {
    /// `q` values for cat-state overlaps and `P(J^x)` snapshots.
    pub q: Vec<usize>,
    /// Moment of inertia of the reference OAT model; by default the
    /// engine's own (`𝒩/𝒥`), which is exact only at `α = 0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inertia: Option<f64>,
}

impl Default for TargetsSection {
    fn default() -> Self {
        TargetsSection { q: vec![2, 4, 6], inertia: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    /// Eigenvalues per `J^z` sector.
    pub n_states: usize,
    pub tol: f64,
    /// Sectors with at most this many states are diagonalized densely.
    pub dense_limit: usize,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        SpectrumSection { n_states: 4, tol: 1e-9, dense_limit: 400 }
    }
}

/// A complete run description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub engine: Engine,
    pub seed: u64,
    pub threads: usize,
    /// Output directory.
    pub out: String,
    pub observables: Vec<Output>,
    pub lattice: LatticeSection,
    pub schedule: ScheduleSection,
    pub sampler: SamplerSection,
    pub tdvp: TdvpSection,
    pub targets: TargetsSection,
    pub spectrum: SpectrumSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            engine: Engine::Exact,
            seed: 1,
            threads: 1,
            out: "runs/default".into(),
            observables: vec![Output::Fidelities],
            lattice: LatticeSection::default(),
            schedule: ScheduleSection::default(),
            sampler: SamplerSection::default(),
            tdvp: TdvpSection::default(),
            targets: TargetsSection::default(),
            spectrum: SpectrumSection::default(),
        }
    }
}

impl RunConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn wants(&self, o: Output) -> bool {
        self.observables.contains(&o)
    }

    pub fn sampler_options(&self) -> SamplerOptions {
        SamplerOptions {
            n_samples: self.sampler.samples_per_stage,
            n_walkers: self.sampler.walkers,
            burn_in_sweeps: (self.sampler.burn_in > 0).then_some(self.sampler.burn_in),
            exchange_fraction: self.sampler.exchange_fraction,
            threads: self.threads.max(1),
            ..Default::default()
        }
    }

    pub fn tvmc_options(&self) -> TvmcOptions {
        let t = &self.tdvp;
        TvmcOptions {
            dt: self.schedule.dt,
            t_max: self.schedule.t_max,
            observe_every: self.observe_every(),
            sampler: self.sampler_options(),
            tdvp: TdvpOptions {
                epsilon: t.epsilon,
                epsilon0: t.epsilon0,
                solver: t.solver,
                rcond: t.rcond,
                evolve_g: t.evolve_g,
                max_residual: t.max_residual,
            },
            seed: self.seed,
            fidelity_samples: if self.wants(Output::Fidelities) { self.sampler.fidelity_samples } else { 0 },
            energy_drift_bound: t.energy_drift_bound,
            record_params: self.wants(Output::Params),
            cat_targets: if self.wants(Output::CatOverlaps) { self.targets.q.clone() } else { Vec::new() },
        }
    }

    /// tVMC steps per recorded row.
    pub fn observe_every(&self) -> usize {
        (self.schedule.dt_outer / self.schedule.dt).round().max(1.0) as usize
    }

    /// Recorded times `0, dt_outer, ..` up to `t_max`.
    pub fn output_times(&self) -> Vec<f64> {
        let n = (self.schedule.t_max / self.schedule.dt_outer).round() as usize;
        (0..=n).map(|k| k as f64 * self.schedule.dt_outer).collect()
    }
}

/// One rejected field.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigIssue {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

fn join(issues: &[ConfigIssue]) -> Error {
    Error::Config(issues.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; "))
}

const ENUMS: &[(&str, &[&str])] = &[
    ("engine", &["exact", "tvmc", "dicke"]),
    ("lattice.geometry", &["square", "triangular"]),
    ("lattice.normalization", &["standard", "unit", "sites", "kac"]),
    ("tdvp.solver", &["shift", "pinv"]),
];

/// Checks enumerated string fields up front so the message names the field.
fn check_enums(value: &toml::Value, issues: &mut Vec<ConfigIssue>) {
    for (path, allowed) in ENUMS {
        let mut v = Some(value);
        for key in path.split('.') {
            v = v.and_then(|v| v.get(key));
        }
        if let Some(toml::Value::String(s)) = v {
            if !allowed.contains(&s.as_str()) {
                issues.push(ConfigIssue {
                    path: path.to_string(),
                    message: format!("unknown value \"{s}\", expected one of {}", allowed.join(", ")),
                });
            }
        }
    }
}

/// Parses and validates configuration text, filling defaults. All violations
/// are reported together, each prefixed by its field path.
pub fn validate_config(text: &str) -> std::result::Result<RunConfig, Vec<ConfigIssue>> {
    let value: toml::Value = toml::from_str(text)
        .map_err(|e| vec![ConfigIssue { path: "<document>".into(), message: e.message().to_string() }])?;
    let mut issues = Vec::new();
    check_enums(&value, &mut issues);
    if !issues.is_empty() {
        return Err(issues);
    }
    let merged = merge_defaults(value);
    let cfg: RunConfig = match merged.try_into() {
        Ok(c) => c,
        Err(e) => {
            let e: toml::de::Error = e;
            return Err(vec![ConfigIssue { path: "<document>".into(), message: e.message().to_string() }]);
        }
    };
    check_ranges(&cfg, &mut issues);
    if issues.is_empty() {
        Ok(cfg)
    } else {
        Err(issues)
    }
}

/// [`validate_config`] with the issues folded into one error.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    validate_config(text).map_err(|i| join(&i))
}

pub fn load_config(path: &std::path::Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

fn merge_defaults(user: toml::Value) -> toml::Value {
    fn merge(base: &mut toml::Value, over: toml::Value) {
        match (base, over) {
            (toml::Value::Table(b), toml::Value::Table(o)) => {
                for (k, v) in o {
                    match b.get_mut(&k) {
                        Some(slot) => merge(slot, v),
                        None => {
                            b.insert(k, v);
                        }
                    }
                }
            }
            (slot, v) => *slot = v,
        }
    }
    let mut base = toml::Value::try_from(RunConfig::default()).expect("defaults serialize");
    merge(&mut base, user);
    base
}

fn check_ranges(c: &RunConfig, issues: &mut Vec<ConfigIssue>) {
    let mut bad = |path: &str, message: String| issues.push(ConfigIssue { path: path.into(), message });
    let l = &c.lattice;
    if l.l < 2 {
        bad("lattice.L", format!("must be at least 2, got {}", l.l));
    }
    if let Some(ly) = l.ly {
        if ly < 2 {
            bad("lattice.Ly", format!("must be at least 2, got {ly}"));
        }
    }
    if !(l.alpha >= 0.0) || !l.alpha.is_finite() {
        bad("lattice.alpha", format!("must be a finite non-negative number, got {}", l.alpha));
    }
    if !l.coupling.is_finite() {
        bad("lattice.coupling", "must be finite".into());
    }
    let n = l.l * l.ly.unwrap_or(l.l);
    if c.engine == Engine::Exact && n > MAX_SIZE_CAP {
        bad("lattice.L", format!("exact engine is limited to {MAX_SIZE_CAP} spins, lattice has {n}"));
    }
    let s = &c.schedule;
    if !(s.t_max >= 0.0) || !s.t_max.is_finite() {
        bad("schedule.t_max", format!("must be non-negative, got {}", s.t_max));
    }
    if !(s.dt_outer > 0.0) {
        bad("schedule.dt_outer", format!("must be positive, got {}", s.dt_outer));
    }
    if !(s.dt > 0.0) {
        bad("schedule.dt", format!("must be positive, got {}", s.dt));
    } else if s.dt_outer > 0.0 {
        let r = s.dt_outer / s.dt;
        if (r - r.round()).abs() > 1e-9 * r.max(1.0) || r.round() < 1.0 {
            bad("schedule.dt", format!("must divide dt_outer = {}", s.dt_outer));
        }
    }
    let sm = &c.sampler;
    if sm.walkers == 0 {
        bad("sampler.walkers", "must be positive".into());
    }
    if sm.samples_per_stage < 2 * sm.walkers.max(1) {
        bad("sampler.samples_per_stage", format!("need at least two per walker, got {}", sm.samples_per_stage));
    }
    if !(0.0..=1.0).contains(&sm.exchange_fraction) {
        bad("sampler.exchange_fraction", format!("must lie in [0, 1], got {}", sm.exchange_fraction));
    }
    let t = &c.tdvp;
    for (path, v) in [("tdvp.epsilon", t.epsilon), ("tdvp.epsilon0", t.epsilon0), ("tdvp.rcond", t.rcond)] {
        if !(v >= 0.0) || !v.is_finite() {
            bad(path, format!("must be finite and non-negative, got {v}"));
        }
    }
    if !(t.max_residual > 0.0) {
        bad("tdvp.max_residual", format!("must be positive, got {}", t.max_residual));
    }
    for (k, &q) in c.targets.q.iter().enumerate() {
        if q < 2 || q % 2 == 1 {
            bad(&format!("targets.q[{k}]"), format!("must be an even integer >= 2, got {q}"));
        }
    }
    if let Some(i) = c.targets.inertia {
        if !(i > 0.0) {
            bad("targets.inertia", format!("must be positive, got {i}"));
        }
    }
    if c.threads == 0 {
        bad("threads", "must be positive".into());
    }
    if c.spectrum.n_states == 0 {
        bad("spectrum.n_states", "must be positive".into());
    }
}
