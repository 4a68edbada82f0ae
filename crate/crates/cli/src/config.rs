//! Run configuration: flags, TOML files and `key=value` lists, all resolved
//! into one simulator setup.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use clap::Args;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use spincool::leading_order::Mode;
use spincool::schedule::DEFAULT_DELTA;
use spincool::{Algorithm, BackendKind, InitialState, RunOptions, Schedule, SpinSystem, Termination, TraceOptions};

use crate::CliError;

pub const DEFAULT_EPS0: f64 = 1e-5;

/// Which steps go into the trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceDepth {
    Level(usize),
    All,
    /// Initial and final state only.
    Ends,
}

impl FromStr for TraceDepth {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "all" => Ok(TraceDepth::All),
            "none" | "ends" => Ok(TraceDepth::Ends),
            _ => s
                .parse()
                .map(TraceDepth::Level)
                .map_err(|_| format!("trace depth must be a number, `all` or `none`, got {s:?}")),
        }
    }
}

impl fmt::Display for TraceDepth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceDepth::Level(d) => write!(f, "{d}"),
            TraceDepth::All => f.write_str("all"),
            TraceDepth::Ends => f.write_str("none"),
        }
    }
}

impl Serialize for TraceDepth {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            TraceDepth::Level(d) => s.serialize_u64(*d as u64),
            other => s.serialize_str(&other.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for TraceDepth {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(usize),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(v) => Ok(TraceDepth::Level(v)),
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Every setting of a run. All fields are optional so that a config file,
/// the command line and `key=value` lists can be layered.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    /// fernandez, fibonacci, tribonacci, kbonacci, allbonacci, pac1, pac2, ppa or bcs
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alg: Option<String>,
    /// Number of spins
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Compression width parameter of kbonacci
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// PAC purification level
    #[arg(long = "L", visible_alias = "level")]
    #[serde(rename = "L", alias = "level", skip_serializing_if = "Option::is_none")]
    pub level: Option<usize>,
    /// Heat-bath bias [default: 1e-5]
    #[arg(long, conflicts_with = "eps")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps0: Option<f64>,
    /// Heat-bath polarization parameter, eps0 = tanh(eps)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// bias, exact or rational [default: bias, exact for ppa and bcs]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backend: Option<String>,
    /// reps or exhaustive [default: reps when --reps is given]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    /// Repetitions m_n,...,m_3, or one count for every level
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reps: Option<Vec<usize>>,
    /// Exhaustive-mode tolerance in units of eps0 [default: 1e-6]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Stop after this many primitive steps
    #[arg(long, visible_alias = "steps")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<u64>,
    /// default, cms, thermal or reset-primed
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init: Option<String>,
    /// Reset spins, overriding the algorithm's default
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reset_spins: Option<Vec<usize>>,
    /// Deepest recursion level written to the trace: a number, `all` or
    /// `none` [default: 0 for the Fibonacci family, all otherwise]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_depth: Option<TraceDepth>,
    /// Compression update of the bias backend: approx or exact
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub update: Option<String>,
}

macro_rules! layer {
    ($base:expr, $over:expr, $($f:ident),*) => {
        RunConfig { $($f: $over.$f.or($base.$f)),* }
    };
}

impl RunConfig {
    /// Fields set in `over` win.
    pub fn layered(mut self, over: RunConfig) -> RunConfig {
        // eps0 and eps describe the same quantity; the overriding layer's
        // choice replaces both.
        if over.eps0.is_some() || over.eps.is_some() {
            self.eps0 = None;
            self.eps = None;
        }
        layer!(
            self,
            over,
            alg,
            n,
            k,
            level,
            eps0,
            eps,
            backend,
            mode,
            reps,
            delta,
            max_steps,
            init,
            reset_spins,
            trace_depth,
            update
        )
    }

    pub fn from_file(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Parses `alg=ppa,n=4,reps=5:4:3`. List values use `:` since `,`
    /// separates pairs.
    pub fn from_pairs(spec: &str) -> Result<RunConfig, CliError> {
        let mut c = RunConfig::default();
        for pair in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("expected key=value, got {pair:?}")))?;
            let bad = |what: &str| CliError::Config(format!("{key}: {what} {value:?}"));
            let num = || value.parse::<usize>().map_err(|_| bad("not an integer:"));
            let float = || value.parse::<f64>().map_err(|_| bad("not a number:"));
            let list = || {
                value
                    .split(':')
                    .map(|v| v.parse::<usize>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| bad("not an integer list:"))
            };
            match key.trim() {
                "alg" => c.alg = Some(value.into()),
                "n" => c.n = Some(num()?),
                "k" => c.k = Some(num()?),
                "L" | "level" => c.level = Some(num()?),
                "eps0" => c.eps0 = Some(float()?),
                "eps" => c.eps = Some(float()?),
                "backend" => c.backend = Some(value.into()),
                "mode" => c.mode = Some(value.into()),
                "reps" => c.reps = Some(list()?),
                "delta" => c.delta = Some(float()?),
                "max-steps" | "max_steps" | "steps" => {
                    c.max_steps = Some(value.parse().map_err(|_| bad("not an integer:"))?)
                }
                "init" => c.init = Some(value.into()),
                "reset-spins" | "reset_spins" => c.reset_spins = Some(list()?),
                "trace-depth" | "trace_depth" => c.trace_depth = Some(value.parse().map_err(CliError::Config)?),
                "update" => c.update = Some(value.into()),
                other => return Err(CliError::Config(format!("unknown key {other:?}"))),
            }
        }
        Ok(c)
    }

    /// Short `alg n=.. backend=..` label.
    pub fn label(&self) -> String {
        let mut s = self.alg.clone().unwrap_or_default();
        if let Some(k) = self.k {
            s += &format!(" k={k}");
        }
        if let Some(l) = self.level {
            s += &format!(" L={l}");
        }
        if let Some(n) = self.n {
            s += &format!(" n={n}");
        }
        if let Some(b) = &self.backend {
            s += &format!(" backend={b}");
        }
        s
    }
}

/// A configuration turned into simulator inputs.
#[derive(Debug, Clone)]
pub struct Resolved {
    /// The configuration with every default filled in.
    pub config: RunConfig,
    pub algorithm: Algorithm,
    pub system: SpinSystem,
    pub schedule: Schedule,
    pub backend: BackendKind,
    pub options: RunOptions,
}

fn is_family(alg: Algorithm) -> bool {
    matches!(
        alg,
        Algorithm::Fernandez
            | Algorithm::Fibonacci
            | Algorithm::Tribonacci
            | Algorithm::KBonacci(_)
            | Algorithm::AllBonacci
    )
}

pub fn resolve(cfg: &RunConfig) -> Result<Resolved, CliError> {
    let name = cfg
        .alg
        .as_deref()
        .ok_or_else(|| CliError::Config("--alg is required".into()))?;
    let algorithm = Algorithm::from_parts(name, cfg.k, cfg.level)?;
    let n = match (cfg.n, algorithm) {
        (Some(n), _) => n,
        (None, Algorithm::Fernandez) => 3,
        (None, Algorithm::Pac1(l) | Algorithm::Pac2(l)) => 2 * l + 1,
        (None, _) => return Err(CliError::Config(format!("--n is required for {name}"))),
    };
    let mut system = match (cfg.eps0, cfg.eps) {
        (Some(_), Some(_)) => return Err(CliError::Config("give --eps0 or --eps, not both".into())),
        (_, Some(eps)) => SpinSystem::from_epsilon(n, eps)?,
        (e, None) => SpinSystem::new(n, e.unwrap_or(DEFAULT_EPS0))?,
    };
    if let Some(r) = &cfg.reset_spins {
        system = system.with_reset_spins(r.iter().copied())?;
    }
    let backend: BackendKind = match &cfg.backend {
        Some(b) => b.parse()?,
        None if matches!(algorithm, Algorithm::Ppa | Algorithm::Bcs) => BackendKind::Exact,
        None => BackendKind::Bias,
    };
    let mode = match cfg.mode.as_deref() {
        Some(m @ ("reps" | "exhaustive")) => m,
        Some(m) => {
            return Err(CliError::Config(format!(
                "--mode must be reps or exhaustive, got {m:?}"
            )))
        }
        None if cfg.reps.is_some() => "reps",
        None => "exhaustive",
    };
    let fixed_sequence = matches!(algorithm, Algorithm::Pac1(_) | Algorithm::Pac2(_) | Algorithm::Bcs);
    let termination = if fixed_sequence {
        Termination::Reps(vec![1])
    } else if mode == "reps" {
        let reps = cfg
            .reps
            .clone()
            .ok_or_else(|| CliError::Config("--mode reps needs --reps".into()))?;
        Termination::Reps(reps)
    } else {
        Termination::Exhaustive {
            delta: cfg.delta.unwrap_or(DEFAULT_DELTA),
        }
    };
    let mut schedule = Schedule::new(algorithm, termination);
    if let Some(s) = cfg.max_steps {
        schedule = schedule.with_max_steps(s);
    }
    schedule.check(n)?;
    let init: InitialState = cfg.init.as_deref().unwrap_or("default").parse()?;
    let bias_mode = match cfg.update.as_deref() {
        None | Some("approx") => Mode::Approx,
        Some("exact") => Mode::Exact,
        Some(u) => return Err(CliError::Config(format!("--update must be approx or exact, got {u:?}"))),
    };
    let depth = cfg.trace_depth.unwrap_or(if is_family(algorithm) {
        TraceDepth::Level(0)
    } else {
        TraceDepth::All
    });
    let trace = TraceOptions {
        depth: match depth {
            TraceDepth::Level(d) => Some(d),
            TraceDepth::All => Some(usize::MAX),
            TraceDepth::Ends => None,
        },
        sands: true,
        monitor: backend != BackendKind::Bias,
    };
    let config = RunConfig {
        alg: Some(algorithm.name().into()),
        n: Some(n),
        k: cfg.k.filter(|_| matches!(algorithm, Algorithm::KBonacci(_))),
        level: cfg
            .level
            .filter(|_| matches!(algorithm, Algorithm::Pac1(_) | Algorithm::Pac2(_))),
        eps0: Some(system.epsilon0()),
        eps: Some(system.epsilon()),
        backend: Some(backend.as_str().into()),
        mode: Some(if fixed_sequence { "reps".into() } else { mode.into() }),
        reps: match &schedule.termination {
            Termination::Reps(r) => Some(r.clone()),
            Termination::Exhaustive { .. } => None,
        },
        delta: match schedule.termination {
            Termination::Exhaustive { delta } => Some(delta),
            Termination::Reps(_) => None,
        },
        max_steps: Some(schedule.max_steps),
        init: Some(init.resolve(algorithm).as_str().into()),
        reset_spins: cfg.reset_spins.clone(),
        trace_depth: Some(depth),
        update: (backend == BackendKind::Bias)
            .then(|| if bias_mode == Mode::Exact { "exact" } else { "approx" }.into()),
    };
    Ok(Resolved {
        config,
        algorithm,
        system,
        schedule,
        backend,
        options: RunOptions { trace, init, bias_mode },
    })
}
