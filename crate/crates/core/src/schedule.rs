//! Algorithm instances: which algorithm runs and what ends it.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default exhaustive-mode tolerance, in units of `eps0`.
pub const DEFAULT_DELTA: f64 = 1e-6;
/// Default cap on primitive steps.
pub const DEFAULT_MAX_STEPS: u64 = 5_000_000_000;
/// Default cap on iterations of a single recursion level in exhaustive mode.
pub const DEFAULT_MAX_LEVEL_ITERS: u64 = 10_000_000;

/// The cooling algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    /// 3B-Comp then RESET on three spins, repeated.
    Fernandez,
    Fibonacci,
    Tribonacci,
    /// `(k+1)`B-Comp based recursion, `2 <= k <= n - 1`.
    KBonacci(usize),
    /// k-bonacci with `k = n - 1`.
    AllBonacci,
    /// Practicable cooling with dedicated reset partners, to level `L`.
    Pac1(usize),
    /// Practicable cooling with a single reset spin, to level `L`.
    Pac2(usize),
    /// Partner pairing: alternating RESET of spin 0 and a full SORT.
    Ppa,
    /// One basic compression subroutine on `A` (flag), `B` and a chain.
    Bcs,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Fernandez => "fernandez",
            Algorithm::Fibonacci => "fibonacci",
            Algorithm::Tribonacci => "tribonacci",
            Algorithm::KBonacci(_) => "kbonacci",
            Algorithm::AllBonacci => "allbonacci",
            Algorithm::Pac1(_) => "pac1",
            Algorithm::Pac2(_) => "pac2",
            Algorithm::Ppa => "ppa",
            Algorithm::Bcs => "bcs",
        }
    }

    /// Builds an algorithm from its name plus the `k` and `L` parameters
    /// where they apply.
    pub fn from_parts(name: &str, k: Option<usize>, level: Option<usize>) -> Result<Self> {
        let need =
            |v: Option<usize>, flag: &str| v.ok_or_else(|| Error::Config(format!("algorithm {name} needs {flag}")));
        Ok(match name {
            "fernandez" => Algorithm::Fernandez,
            "fibonacci" => Algorithm::Fibonacci,
            "tribonacci" => Algorithm::Tribonacci,
            "kbonacci" => Algorithm::KBonacci(need(k, "k")?),
            "allbonacci" => Algorithm::AllBonacci,
            "pac1" => Algorithm::Pac1(need(level, "L")?),
            "pac2" => Algorithm::Pac2(need(level, "L")?),
            "ppa" => Algorithm::Ppa,
            "bcs" => Algorithm::Bcs,
            _ => return Err(Error::Config(format!("unknown algorithm {name:?}"))),
        })
    }

    /// The k of the k-bonacci family member, if this is one.
    pub fn bonacci_k(self, n: usize) -> Option<usize> {
        match self {
            Algorithm::Fernandez | Algorithm::Fibonacci => Some(2),
            Algorithm::Tribonacci => Some(3),
            Algorithm::KBonacci(k) => Some(k),
            Algorithm::AllBonacci => Some(n.saturating_sub(1)),
            _ => None,
        }
    }

    /// Reset spins used when the system does not designate any.
    pub fn default_reset_spins(self) -> Vec<usize> {
        match self {
            Algorithm::Fernandez
            | Algorithm::Fibonacci
            | Algorithm::Tribonacci
            | Algorithm::KBonacci(_)
            | Algorithm::AllBonacci => vec![0, 1],
            Algorithm::Pac2(_) | Algorithm::Ppa => vec![0],
            Algorithm::Pac1(_) | Algorithm::Bcs => Vec::new(),
        }
    }

    /// Smallest spin count the algorithm runs on.
    pub fn min_spins(self) -> usize {
        match self {
            Algorithm::Fernandez | Algorithm::Fibonacci | Algorithm::AllBonacci => 3,
            Algorithm::Tribonacci => 4,
            Algorithm::KBonacci(k) => k + 1,
            Algorithm::Pac1(l) | Algorithm::Pac2(l) => 2 * l + 1,
            Algorithm::Ppa => 1,
            Algorithm::Bcs => 2,
        }
    }

    /// Checks the algorithm's parameters against the spin count.
    pub fn check(self, n: usize) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        match self {
            Algorithm::Fernandez if n != 3 => fail(format!("fernandez runs on exactly 3 spins, got {n}")),
            Algorithm::KBonacci(k) if k < 2 || k + 1 > n => {
                fail(format!("kbonacci needs 2 <= k <= n - 1, got k = {k}, n = {n}"))
            }
            Algorithm::Pac1(0) | Algorithm::Pac2(0) => fail("PAC needs L >= 1".into()),
            _ if n < self.min_spins() => fail(format!("{} needs at least {} spins, got {n}", self, self.min_spins())),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algorithm::KBonacci(k) => write!(f, "kbonacci(k={k})"),
            Algorithm::Pac1(l) => write!(f, "pac1(L={l})"),
            Algorithm::Pac2(l) => write!(f, "pac2(L={l})"),
            other => f.write_str(other.name()),
        }
    }
}

/// What ends the repetition of each recursion level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Termination {
    /// Fixed repetition counts `m_n, ..., m_3` (outermost first). A single
    /// entry applies to every level. For PPA the single entry counts
    /// RESET+SORT rounds.
    Reps(Vec<usize>),
    /// Repeat each level until its target bias changes by less than
    /// `delta * eps0` over one repetition. For PPA: until one round changes
    /// no S&S entry by `delta` or more.
    Exhaustive { delta: f64 },
}

impl Default for Termination {
    fn default() -> Self {
        Termination::Exhaustive { delta: DEFAULT_DELTA }
    }
}

/// Repetition count of a level given `(level, parent_iteration)`; overrides
/// [`Termination::Reps`] so inner levels can vary between repetitions.
pub type InnerReps = Arc<dyn Fn(usize, u64) -> usize + Send + Sync>;

/// Starting state of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialState {
    /// Completely mixed for PPA, thermal for BCS, reset-primed otherwise.
    #[default]
    Default,
    CompletelyMixed,
    Thermal,
    /// Reset spins at `eps0`, every other spin completely mixed.
    ResetPrimed,
}

impl FromStr for InitialState {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "default" => Ok(Self::Default),
            "cms" | "completely-mixed" => Ok(Self::CompletelyMixed),
            "thermal" => Ok(Self::Thermal),
            "reset-primed" => Ok(Self::ResetPrimed),
            _ => Err(Error::Config(format!(
                "unknown initial state {s:?} (expected default, cms, thermal or reset-primed)"
            ))),
        }
    }
}

impl InitialState {
    pub fn as_str(self) -> &'static str {
        match self {
            InitialState::Default => "default",
            InitialState::CompletelyMixed => "cms",
            InitialState::Thermal => "thermal",
            InitialState::ResetPrimed => "reset-primed",
        }
    }

    /// Replaces `Default` by the concrete start used for `alg`.
    pub fn resolve(self, alg: Algorithm) -> InitialState {
        match (self, alg) {
            (InitialState::Default, Algorithm::Ppa) => InitialState::CompletelyMixed,
            (InitialState::Default, Algorithm::Bcs) => InitialState::Thermal,
            (InitialState::Default, _) => InitialState::ResetPrimed,
            (s, _) => s,
        }
    }
}

/// An algorithm together with its termination rule and safety caps.
#[derive(Clone)]
pub struct Schedule {
    pub algorithm: Algorithm,
    pub termination: Termination,
    /// Hard cap on primitive steps; the run stops and is marked truncated.
    pub max_steps: u64,
    /// Cap on iterations of one level in exhaustive mode.
    pub max_level_iters: u64,
    pub inner_reps: Option<InnerReps>,
}

impl fmt::Debug for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Schedule")
            .field("algorithm", &self.algorithm)
            .field("termination", &self.termination)
            .field("max_steps", &self.max_steps)
            .field("max_level_iters", &self.max_level_iters)
            .field("inner_reps", &self.inner_reps.as_ref().map(|_| "callback"))
            .finish()
    }
}

impl Schedule {
    pub fn new(algorithm: Algorithm, termination: Termination) -> Self {
        Self {
            algorithm,
            termination,
            max_steps: DEFAULT_MAX_STEPS,
            max_level_iters: DEFAULT_MAX_LEVEL_ITERS,
            inner_reps: None,
        }
    }

    pub fn exhaustive(algorithm: Algorithm, delta: f64) -> Self {
        Self::new(algorithm, Termination::Exhaustive { delta })
    }

    pub fn reps(algorithm: Algorithm, reps: Vec<usize>) -> Self {
        Self::new(algorithm, Termination::Reps(reps))
    }

    pub fn with_max_steps(mut self, max_steps: u64) -> Self {
        self.max_steps = max_steps;
        self
    }

    pub fn with_max_level_iters(mut self, iters: u64) -> Self {
        self.max_level_iters = iters;
        self
    }

    pub fn with_inner_reps(mut self, f: InnerReps) -> Self {
        self.inner_reps = Some(f);
        self
    }

    /// Checks the termination rule against an `n`-spin run.
    pub fn check(&self, n: usize) -> Result<()> {
        self.algorithm.check(n)?;
        match &self.termination {
            Termination::Exhaustive { delta } if !(*delta > 0.0 && delta.is_finite()) => {
                Err(Error::Config(format!("delta must be positive, got {delta}")))
            }
            Termination::Reps(r) if r.is_empty() => Err(Error::Config("empty repetition list".into())),
            Termination::Reps(r) => {
                let levels = match self.algorithm {
                    Algorithm::Ppa => 1,
                    a if a.bonacci_k(n).is_some() => n - 2,
                    _ => return Ok(()),
                };
                if r.len() == 1 || r.len() == levels {
                    Ok(())
                } else {
                    Err(Error::Config(format!(
                        "expected {levels} repetition counts (m_n..m_3) or a single count, got {}",
                        r.len()
                    )))
                }
            }
            _ => Ok(()),
        }
    }

    /// `m_level` for an `n`-spin reps-mode run.
    pub(crate) fn reps_for(&self, n: usize, level: usize, parent_iter: u64) -> Option<usize> {
        if let Some(f) = &self.inner_reps {
            return Some(f(level, parent_iter));
        }
        match &self.termination {
            Termination::Reps(r) if r.len() == 1 => Some(r[0]),
            Termination::Reps(r) => Some(r[n - level]),
            Termination::Exhaustive { .. } => None,
        }
    }
}
