use std::path::{Path, PathBuf};

use nagumo_core::flow::{StepProfile, WeightPair};
use nagumo_core::itinerary::Itinerary;
use nagumo_core::manifolds::ConnectionKind;
use nagumo_core::ode::IntegratorOptions;
use nagumo_core::stretch::{EpsMode, Setup};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Rejected configuration; maps to the validation exit code.
#[derive(Debug, thiserror::Error)]
#[error("invalid config: {0}")]
pub struct ConfigError(pub String);

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

/// Switching times in original time `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Switches {
    /// `count` gaps of length `delta`; the count defaults to what the
    /// command needs.
    Uniform { delta: f64, count: Option<usize> },
    Gaps(Vec<f64>),
    Times { times: Vec<f64>, delta: Option<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Epsilon {
    Value(f64),
    Auto(AutoWord),
    Fraction { auto: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoWord {
    Auto,
}

pub const AUTO_FRACTION: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        let d = IntegratorOptions::default();
        Self { rtol: d.rtol, atol: d.atol, max_steps: d.max_steps }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PortraitConfig {
    /// Frozen weights to draw; `a₋` and `a₊` when empty.
    pub weights: Vec<f64>,
    /// Regular levels between the center and the upper saddle level.
    pub levels: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub a_minus: f64,
    pub a_plus: f64,
    #[serde(default)]
    pub switches: Option<Switches>,
    #[serde(default)]
    pub s0: f64,
    #[serde(default)]
    pub first_index: Option<i64>,
    #[serde(default)]
    pub epsilon: Option<Epsilon>,
    #[serde(rename = "M", default = "one")]
    pub m: u32,
    /// Number of random blocks when no itinerary is given.
    #[serde(rename = "K", default)]
    pub k: Option<usize>,
    /// Period in blocks; asks `chaos` for a periodic solution.
    #[serde(default)]
    pub ell: Option<usize>,
    #[serde(default)]
    pub itinerary: Option<Vec<(u32, u32)>>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub kind: Option<ConnectionKind>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_factor")]
    pub t1_factor: f64,
    /// Transfer and twist times as multiples of `T₁*` and `T₂*(M)`.
    #[serde(default = "default_factor")]
    pub time_factor: f64,
    #[serde(default = "default_budget")]
    pub path_budget: usize,
    #[serde(default = "yes")]
    pub compose: bool,
    #[serde(default)]
    pub portrait: PortraitConfig,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn one() -> u32 {
    1
}
fn default_factor() -> f64 {
    1.1
}
fn default_budget() -> usize {
    nagumo_core::stretch::DEFAULT_PATH_BUDGET
}
fn yes() -> bool {
    true
}

pub fn load(path: &Path) -> anyhow::Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

impl RunConfig {
    pub fn options(&self) -> anyhow::Result<IntegratorOptions> {
        let t = self.tolerances;
        if !(t.rtol > 0.0 && t.atol > 0.0 && t.max_steps > 0) {
            return Err(invalid("tolerances must be positive"));
        }
        Ok(IntegratorOptions { rtol: t.rtol, atol: t.atol, max_steps: t.max_steps, ..Default::default() })
    }

    pub fn weights(&self) -> anyhow::Result<WeightPair> {
        Ok(WeightPair::new(self.a_minus, self.a_plus)?)
    }

    pub fn setup(&self) -> anyhow::Result<Setup> {
        if !(self.t1_factor > 1.0) {
            return Err(invalid("t1_factor must exceed 1"));
        }
        Ok(Setup::new(self.weights()?, self.t1_factor, &self.options()?)?)
    }

    /// `δ` of the configured switches, 1 when none are given.
    pub fn delta(&self) -> anyhow::Result<f64> {
        let d = match &self.switches {
            None => 1.0,
            Some(Switches::Uniform { delta, .. }) => *delta,
            Some(Switches::Gaps(g)) => g.iter().copied().fold(f64::INFINITY, f64::min),
            Some(Switches::Times { times, delta }) => match delta {
                Some(d) => *d,
                None => times.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min),
            },
        };
        if !(d > 0.0 && d.is_finite()) {
            return Err(invalid(format!("delta = {d} must be positive")));
        }
        Ok(d)
    }

    /// The itinerary: explicit, or `K` blocks drawn uniformly from `1..=M`.
    pub fn itinerary(&self) -> anyhow::Result<Itinerary> {
        let blocks = match (&self.itinerary, self.k) {
            (Some(b), _) => b.clone(),
            (None, Some(k)) => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed.unwrap_or(0));
                (0..k).map(|_| (rng.gen_range(1..=self.m), rng.gen_range(1..=self.m))).collect()
            }
            (None, None) => Vec::new(),
        };
        if let Some(k) = self.k {
            if k != blocks.len() {
                return Err(invalid(format!("K = {k} but the itinerary has {} blocks", blocks.len())));
            }
        }
        Ok(Itinerary::new(blocks, self.m)?)
    }

    /// The profile with `count` gaps when the switches leave it open.
    /// `ε` is a placeholder until [`RunConfig::resolve_epsilon`].
    fn profile_with(&self, count: usize, first_index: i64, epsilon: f64) -> anyhow::Result<StepProfile> {
        let first = self.first_index.unwrap_or(first_index);
        let (a, b) = (self.a_minus, self.a_plus);
        let p = match &self.switches {
            None => StepProfile::from_gaps(a, b, self.s0, &vec![1.0; count], first, epsilon)?,
            Some(Switches::Uniform { delta, count: c }) => {
                StepProfile::from_gaps(a, b, self.s0, &vec![*delta; c.unwrap_or(count)], first, epsilon)?
            }
            Some(Switches::Gaps(g)) => StepProfile::from_gaps(a, b, self.s0, g, first, epsilon)?,
            Some(Switches::Times { times, .. }) => {
                StepProfile::new(a, b, times.clone(), first, self.delta()?, epsilon)?
            }
        };
        Ok(p)
    }

    /// Resolve `"auto"` to a fraction of `ε*(M)` in `mode`.
    fn resolve_epsilon(&self, delta: f64, mode: EpsMode) -> anyhow::Result<f64> {
        let frac = match self.epsilon {
            None => return Err(invalid("epsilon is required")),
            Some(Epsilon::Value(e)) => return Ok(e),
            Some(Epsilon::Auto(_)) => AUTO_FRACTION,
            Some(Epsilon::Fraction { auto }) => auto,
        };
        if !(frac > 0.0) {
            return Err(invalid(format!("epsilon fraction {frac} must be positive")));
        }
        let eps_star = self.setup()?.thresholds.eps_star(self.m, delta, mode)?;
        Ok(frac * eps_star)
    }

    /// Profile, itinerary and a copy of the config with every default and
    /// `"auto"` made explicit.
    pub fn resolve(&self, count: usize, first_index: i64, mode: EpsMode) -> anyhow::Result<Resolved> {
        let itinerary = self.itinerary()?;
        let draft = self.profile_with(count, first_index, 1.0)?;
        let epsilon = self.resolve_epsilon(draft.delta(), mode)?;
        let profile = draft.with_epsilon(epsilon)?;
        let mut config = self.clone();
        config.switches = Some(Switches::Times { times: profile.switch_times().to_vec(), delta: Some(profile.delta()) });
        config.first_index = Some(profile.first_index());
        config.epsilon = Some(Epsilon::Value(epsilon));
        config.itinerary = Some(itinerary.blocks.clone());
        config.k = Some(itinerary.len());
        config.out = None;
        Ok(Resolved { config, profile, itinerary })
    }

    pub fn connection_kind(&self) -> ConnectionKind {
        self.kind.unwrap_or(ConnectionKind::Heteroclinic)
    }
}

pub struct Resolved {
    pub config: RunConfig,
    pub profile: StepProfile,
    pub itinerary: Itinerary,
}
