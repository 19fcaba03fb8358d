//! Scenario files: a single JSON document describing customers, their load
//! source, the target profile, the game parameters and how to solve it.
//!
//! Energy quantities are in kWh; field names carry a `_kwh` suffix where the
//! unit applies. Relative CSV paths resolve against the scenario file's
//! directory.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DsmError, Result};
use crate::game::{ActionSet, MixedStrategyProfile, Mode, WeightingSpec, DEFAULT_TABLE_CAP};
use crate::ingest::{ingest_csv, read_columns, split_aggregate};
use crate::load_shift::{build_target, LoadProfile, ShiftParams, TargetProfile, DEFAULT_HORIZON};
use crate::solver::{Init, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LoadSource {
    /// Profiles written directly in the scenario.
    Inline { profiles_kwh: Vec<Vec<f64>> },
    /// One CSV column per customer.
    Csv { path: PathBuf, columns: Vec<String> },
    /// One aggregate CSV column split by fixed per-customer shares.
    CsvAggregate {
        path: PathBuf,
        column: String,
        shares: Vec<f64>,
    },
    /// Generated evening-peaked profiles, scaled by share with seeded jitter.
    Synthetic {
        seed: u64,
        shares: Vec<f64>,
        #[serde(default = "default_base")]
        base_kwh: f64,
        #[serde(default = "default_peak")]
        peak_kwh: f64,
        #[serde(default = "default_jitter")]
        jitter: f64,
    },
}

fn default_base() -> f64 {
    600.0
}
fn default_peak() -> f64 {
    900.0
}
fn default_jitter() -> f64 {
    0.25
}
fn default_horizon() -> usize {
    DEFAULT_HORIZON
}
fn default_price_scale() -> f64 {
    1.0
}
fn default_modes() -> Vec<ModeKind> {
    vec![ModeKind::Eut, ModeKind::Pt]
}

/// A scalar shared by every customer, or one value per customer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerCustomer {
    Shared(f64),
    Each(Vec<f64>),
}

impl PerCustomer {
    pub fn expand(&self, n: usize, what: &str) -> Result<Vec<f64>> {
        match self {
            PerCustomer::Shared(v) => Ok(vec![*v; n]),
            PerCustomer::Each(v) if v.len() == n => Ok(v.clone()),
            PerCustomer::Each(v) => Err(DsmError::dim(format!(
                "{} {what} values for {n} customers",
                v.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ActionSetsSpec {
    Shared(Vec<usize>),
    Each(Vec<Vec<usize>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Multiplier {
    pub hour: usize,
    pub factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    /// Historical hourly totals; defaults to the customers' summed demand.
    #[serde(default)]
    pub historical_kwh: Option<Vec<f64>>,
    #[serde(default)]
    pub multipliers: Vec<Multiplier>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeKind {
    Eut,
    Pt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitSpec {
    Uniform,
    /// Draws from the scenario `seed`.
    RandomSimplex,
    Explicit {
        profile: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSpec {
    pub lambda: f64,
    pub max_iter: usize,
    pub eps_stop: f64,
    pub check_every: usize,
    pub snapshot_every: usize,
    pub init: InitSpec,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let d = SolverConfig::default();
        SolverSpec {
            lambda: d.lambda,
            max_iter: d.max_iter,
            eps_stop: d.eps_stop,
            check_every: d.check_every,
            snapshot_every: d.snapshot_every,
            init: InitSpec::Uniform,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    pub load: LoadSource,
    #[serde(default)]
    pub customer_ids: Option<Vec<String>>,
    pub action_sets: ActionSetsSpec,
    pub target: TargetSpec,
    pub gamma: PerCustomer,
    #[serde(default = "default_price_scale")]
    pub price_scale: f64,
    /// Opt-out action; defaults to the last hour.
    #[serde(default)]
    pub sentinel_action: Option<usize>,
    pub alpha: PerCustomer,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default = "default_modes")]
    pub modes: Vec<ModeKind>,
    #[serde(default)]
    pub seed: u64,
    /// Customer (0-based) whose iterates go into trace.csv.
    #[serde(default)]
    pub trace_customer: usize,
    #[serde(default)]
    pub table_cap: Option<usize>,
    /// Directory that relative CSV paths resolve against; set by `load`.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| DsmError::io(path, e))?;
        let mut s: Scenario = serde_json::from_str(&text)?;
        s.base_dir = path.parent().map(Path::to_path_buf);
        Ok(s)
    }

    fn resolve_path(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        }
    }

    fn ids(&self, n: usize) -> Result<Vec<String>> {
        match &self.customer_ids {
            Some(ids) if ids.len() == n => Ok(ids.clone()),
            Some(ids) => Err(DsmError::dim(format!(
                "{} customer ids for {n} customers",
                ids.len()
            ))),
            None => Ok((1..=n).map(|i| format!("customer{i}")).collect()),
        }
    }

    fn profiles(&self) -> Result<Vec<LoadProfile>> {
        let h = self.horizon;
        match &self.load {
            LoadSource::Inline { profiles_kwh } => {
                let ids = self.ids(profiles_kwh.len())?;
                profiles_kwh
                    .iter()
                    .zip(ids)
                    .map(|(d, id)| {
                        if d.len() != h {
                            return Err(DsmError::dim(format!(
                                "profile {id} has {} hours, horizon is {h}",
                                d.len()
                            )));
                        }
                        LoadProfile::new(id, d.clone())
                    })
                    .collect()
            }
            LoadSource::Csv { path, columns } => {
                let mut ps = ingest_csv(&self.resolve_path(path), columns, h)?;
                if self.customer_ids.is_some() {
                    let ids = self.ids(ps.len())?;
                    ps = ps
                        .into_iter()
                        .zip(ids)
                        .map(|(p, id)| LoadProfile::new(id, p.demand().to_vec()))
                        .collect::<Result<_>>()?;
                }
                Ok(ps)
            }
            LoadSource::CsvAggregate {
                path,
                column,
                shares,
            } => {
                let agg = read_columns(&self.resolve_path(path), std::slice::from_ref(column), h)?
                    .remove(0);
                split_aggregate(&agg, shares, &self.ids(shares.len())?)
            }
            LoadSource::Synthetic {
                seed,
                shares,
                base_kwh,
                peak_kwh,
                jitter,
            } => synthetic_profiles(
                h,
                *seed,
                shares,
                *base_kwh,
                *peak_kwh,
                *jitter,
                &self.ids(shares.len())?,
            ),
        }
    }

    /// Validate everything and materialize the model inputs.
    pub fn resolve(&self) -> Result<ResolvedScenario> {
        let profiles = self.profiles()?;
        let n = profiles.len();
        if n == 0 {
            return Err(DsmError::invalid("scenario has no customers"));
        }
        let h = self.horizon;
        let sets = match &self.action_sets {
            ActionSetsSpec::Shared(s) => vec![s.clone(); n],
            ActionSetsSpec::Each(v) if v.len() == n => v.clone(),
            ActionSetsSpec::Each(v) => {
                return Err(DsmError::dim(format!(
                    "{} action sets for {n} customers",
                    v.len()
                )))
            }
        };
        let historical = match &self.target.historical_kwh {
            Some(g) if g.len() == h => g.clone(),
            Some(g) => {
                return Err(DsmError::dim(format!(
                    "historical target has {} hours, horizon is {h}",
                    g.len()
                )))
            }
            None => (0..h)
                .map(|t| profiles.iter().map(|p| p.demand()[t]).sum())
                .collect(),
        };
        let inputs = ModelInputs {
            customer_ids: profiles
                .iter()
                .map(|p| p.customer_id().to_string())
                .collect(),
            profiles_kwh: profiles.iter().map(|p| p.demand().to_vec()).collect(),
            target_kwh: build_target(
                &historical,
                &self
                    .target
                    .multipliers
                    .iter()
                    .map(|m| (m.hour, m.factor))
                    .collect::<Vec<_>>(),
            )?
            .values()
            .to_vec(),
            gamma: self.gamma.expand(n, "gamma")?,
            price_scale: self.price_scale,
            sentinel_action: self.sentinel_action,
            action_sets: sets,
        };
        let model = inputs.build()?;
        let alpha = WeightingSpec::new(self.alpha.expand(n, "alpha")?)?;
        if self.trace_customer >= n {
            return Err(DsmError::invalid(format!(
                "trace_customer {} out of range for {n} customers",
                self.trace_customer
            )));
        }
        let resolved = ResolvedScenario {
            name: self.name.clone(),
            inputs,
            model,
            alpha,
            solver: self.solver.clone(),
            modes: self.modes.clone(),
            seed: self.seed,
            trace_customer: self.trace_customer,
            table_cap: self.table_cap.unwrap_or(DEFAULT_TABLE_CAP),
        };
        resolved.solver_config(Mode::Eut)?.validate()?;
        Ok(resolved)
    }
}

/// Shape of a synthetic day: overnight trough, daytime plateau and an
/// evening peak around 19:00. Values in [0, 1].
fn day_shape(hour: usize) -> f64 {
    let h = hour as f64;
    let daytime = 0.5 * (1.0 - ((h - 4.0) / 24.0 * 2.0 * std::f64::consts::PI).cos());
    let evening = (-((h - 19.0) / 2.2).powi(2)).exp();
    (0.45 * daytime + 0.55 * evening).min(1.0)
}

/// Deterministic evening-peaked customers. Customer `i` gets
/// `share_i * (base + peak * shape(h)) * (1 + jitter * u)` with `u` uniform
/// in [-1, 1] from a generator seeded by `seed`.
pub fn synthetic_profiles(
    horizon: usize,
    seed: u64,
    shares: &[f64],
    base_kwh: f64,
    peak_kwh: f64,
    jitter: f64,
    ids: &[String],
) -> Result<Vec<LoadProfile>> {
    if !(0.0..1.0).contains(&jitter) {
        return Err(DsmError::invalid(format!(
            "jitter {jitter} must lie in [0, 1)"
        )));
    }
    if base_kwh < 0.0 || peak_kwh < 0.0 {
        return Err(DsmError::invalid("base_kwh and peak_kwh must be >= 0"));
    }
    let scale = DEFAULT_HORIZON as f64 / horizon as f64;
    let aggregate: Vec<f64> = (1..=horizon)
        .map(|h| {
            let hour = ((h as f64 * scale).round() as usize).clamp(1, DEFAULT_HORIZON);
            base_kwh + peak_kwh * day_shape(hour)
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let split = split_aggregate(&aggregate, shares, ids)?;
    split
        .into_iter()
        .map(|p| {
            let demand = p
                .demand()
                .iter()
                .map(|x| x * (1.0 + jitter * rng.random_range(-1.0..=1.0)))
                .collect();
            LoadProfile::new(p.customer_id(), demand)
        })
        .collect()
}

/// Plain-number model inputs, embedded in results so they can be re-verified
/// without the original CSV files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInputs {
    pub customer_ids: Vec<String>,
    pub profiles_kwh: Vec<Vec<f64>>,
    pub target_kwh: Vec<f64>,
    pub gamma: Vec<f64>,
    pub price_scale: f64,
    pub sentinel_action: Option<usize>,
    pub action_sets: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DsmModel {
    pub profiles: Vec<LoadProfile>,
    pub target: TargetProfile,
    pub params: ShiftParams,
    pub action_sets: Vec<ActionSet>,
}

impl DsmModel {
    pub fn horizon(&self) -> usize {
        self.target.horizon()
    }

    pub fn sentinel(&self) -> usize {
        self.params.sentinel(self.horizon())
    }
}

impl ModelInputs {
    pub fn build(&self) -> Result<DsmModel> {
        let n = self.profiles_kwh.len();
        if self.customer_ids.len() != n {
            return Err(DsmError::dim("customer ids and profiles differ in length"));
        }
        let profiles = self
            .customer_ids
            .iter()
            .zip(&self.profiles_kwh)
            .map(|(id, d)| LoadProfile::new(id.clone(), d.clone()))
            .collect::<Result<Vec<_>>>()?;
        let horizon = self.target_kwh.len();
        if profiles.iter().any(|p| p.horizon() != horizon) {
            return Err(DsmError::dim("profiles and target differ in horizon"));
        }
        let target = TargetProfile::new(self.target_kwh.clone())?;
        let params = ShiftParams::new(self.gamma.clone(), self.price_scale, self.sentinel_action)?;
        if params.gamma().len() != n {
            return Err(DsmError::dim(format!(
                "{} gamma values for {n} customers",
                params.gamma().len()
            )));
        }
        if self.action_sets.len() != n {
            return Err(DsmError::dim(format!(
                "{} action sets for {n} customers",
                self.action_sets.len()
            )));
        }
        let action_sets = self
            .action_sets
            .iter()
            .map(|s| ActionSet::new(s.clone(), horizon))
            .collect::<Result<Vec<_>>>()?;
        Ok(DsmModel {
            profiles,
            target,
            params,
            action_sets,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedScenario {
    pub name: String,
    pub inputs: ModelInputs,
    pub model: DsmModel,
    pub alpha: WeightingSpec,
    pub solver: SolverSpec,
    pub modes: Vec<ModeKind>,
    pub seed: u64,
    pub trace_customer: usize,
    pub table_cap: usize,
}

impl ResolvedScenario {
    pub fn mode(&self, kind: ModeKind) -> Mode {
        match kind {
            ModeKind::Eut => Mode::Eut,
            ModeKind::Pt => Mode::Pt(self.alpha.clone()),
        }
    }

    pub fn solver_config(&self, mode: Mode) -> Result<SolverConfig> {
        let init = match &self.solver.init {
            InitSpec::Uniform => Init::Uniform,
            InitSpec::RandomSimplex => Init::RandomSimplex { seed: self.seed },
            InitSpec::Explicit { profile } => Init::Explicit {
                profile: MixedStrategyProfile::new(profile.clone())?,
            },
        };
        let cfg = SolverConfig {
            lambda: self.solver.lambda,
            max_iter: self.solver.max_iter,
            eps_stop: self.solver.eps_stop,
            check_every: self.solver.check_every,
            snapshot_every: self.solver.snapshot_every,
            init,
            mode,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
