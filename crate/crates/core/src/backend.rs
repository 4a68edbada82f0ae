//! Interchangeable simulation backends behind one trait.

use std::fmt;
use std::str::FromStr;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates::{GateKind, GateSpec};
use crate::leading_order::{comp_gain, Mode};
use crate::rational::{ratio_to_f64, RationalState};
use crate::state::{DiagonalState, SandSDiagonal};
use crate::system::{BiasVector, SpinSystem};

/// Largest spin count the exact floating-point backend accepts.
pub const MAX_EXACT_SPINS: usize = 20;

/// Absolute tolerance, in S&S units, of the first-order separability test
/// on floating-point diagonals.
pub const SEPARABLE_TOL: f64 = 1e-9;

/// A simulation engine that executes gates and reports biases.
pub trait Backend {
    fn name(&self) -> &'static str;
    fn system(&self) -> &SpinSystem;
    /// Validates `gate` against the system and applies it.
    fn apply(&mut self, gate: &GateSpec) -> Result<()>;
    /// Applies a gate the caller has already validated against
    /// [`Backend::system`]. Schedulers use this in their inner loops.
    fn apply_validated(&mut self, gate: &GateSpec) -> Result<()> {
        self.apply(gate)
    }
    fn bias(&self, spin: usize) -> f64;
    fn biases(&self) -> BiasVector;
    /// S&S diagonal, if the backend tracks the full state.
    fn sands(&self) -> Option<SandSDiagonal> {
        None
    }
    /// Exact S&S diagonal, if the backend is rational.
    fn exact_sands(&self) -> Option<Vec<BigRational>> {
        None
    }
    fn max_prob(&self) -> Option<f64> {
        None
    }
    fn total_prob(&self) -> Option<f64> {
        None
    }
    /// Whether the state is a tensor product to first order in `eps0`.
    fn separable(&self) -> Option<bool> {
        None
    }
}

/// Which backend to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    /// Leading-order bias updates.
    #[default]
    Bias,
    /// Full diagonal in `f64`.
    Exact,
    /// S&S diagonal in exact fractions, first-order RESET.
    Rational,
}

impl BackendKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BackendKind::Bias => "bias",
            BackendKind::Exact => "exact",
            BackendKind::Rational => "rational",
        }
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BackendKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bias" => Ok(Self::Bias),
            "exact" => Ok(Self::Exact),
            "rational" => Ok(Self::Rational),
            _ => Err(Error::Config(format!(
                "unknown backend {s:?} (expected bias, exact or rational)"
            ))),
        }
    }
}

/// Builds a backend of the given kind starting from a product state with
/// the given absolute biases.
pub fn make_backend(kind: BackendKind, sys: &SpinSystem, initial: &BiasVector) -> Result<Box<dyn Backend>> {
    if initial.len() != sys.n() {
        return Err(Error::LengthMismatch {
            expected: sys.n(),
            got: initial.len(),
        });
    }
    Ok(match kind {
        BackendKind::Bias => Box::new(BiasBackend::new(sys.clone(), initial.clone())),
        BackendKind::Exact => Box::new(ExactBackend::product(sys.clone(), initial)?),
        BackendKind::Rational => Box::new(RationalBackend::product(sys.clone(), initial)?),
    })
}

/// Tracks one bias per spin and applies the closed-form updates. Spins are
/// treated as uncorrelated, so gates that build correlations (CNOT, CSWAP,
/// NOT, BCS, SORT) are rejected.
#[derive(Debug, Clone)]
pub struct BiasBackend {
    sys: SpinSystem,
    biases: BiasVector,
    mode: Mode,
}

impl BiasBackend {
    pub fn new(sys: SpinSystem, biases: BiasVector) -> Self {
        Self::with_mode(sys, biases, Mode::Approx)
    }

    pub fn with_mode(sys: SpinSystem, biases: BiasVector, mode: Mode) -> Self {
        Self { sys, biases, mode }
    }
}

impl Backend for BiasBackend {
    fn name(&self) -> &'static str {
        "bias"
    }

    fn system(&self) -> &SpinSystem {
        &self.sys
    }

    fn apply(&mut self, gate: &GateSpec) -> Result<()> {
        gate.validate(&self.sys)?;
        self.apply_validated(gate)
    }

    fn apply_validated(&mut self, gate: &GateSpec) -> Result<()> {
        let ops = &gate.operands;
        let b = self.biases.as_mut_slice();
        match gate.kind {
            GateKind::CompExchange(_) => {
                let gain = comp_gain(b[ops[0]], ops[1..].iter().map(|&s| b[s]), self.mode);
                b[ops[0]] += gain;
                for &s in &ops[1..] {
                    b[s] -= gain;
                }
            }
            GateKind::Swap | GateKind::Transfer => b.swap(ops[0], ops[1]),
            GateKind::Reset | GateKind::PartnerRefresh => {
                for &s in ops {
                    b[s] = self.sys.epsilon0();
                }
            }
            GateKind::Wait => {}
            GateKind::Cnot | GateKind::Not | GateKind::Cswap | GateKind::Sort | GateKind::BcsStep => {
                return Err(Error::Unsupported {
                    what: gate.label(),
                    backend: "bias",
                })
            }
        }
        Ok(())
    }

    fn bias(&self, spin: usize) -> f64 {
        self.biases.as_slice()[spin]
    }

    fn biases(&self) -> BiasVector {
        self.biases.clone()
    }

    /// Largest basis-state probability of the product state with these
    /// marginals.
    fn max_prob(&self) -> Option<f64> {
        Some(self.biases.as_slice().iter().map(|b| (1.0 + b.abs()) / 2.0).product())
    }
}

/// Full diagonal state in `f64`.
#[derive(Debug, Clone)]
pub struct ExactBackend {
    sys: SpinSystem,
    state: DiagonalState,
}

impl ExactBackend {
    pub fn new(sys: SpinSystem, state: DiagonalState) -> Result<Self> {
        if sys.n() > MAX_EXACT_SPINS {
            return Err(Error::TooManySpins {
                backend: "exact",
                max: MAX_EXACT_SPINS,
                n: sys.n(),
            });
        }
        if state.n() != sys.n() {
            return Err(Error::LengthMismatch {
                expected: sys.n(),
                got: state.n(),
            });
        }
        Ok(Self { sys, state })
    }

    pub fn product(sys: SpinSystem, biases: &BiasVector) -> Result<Self> {
        if sys.n() > MAX_EXACT_SPINS {
            return Err(Error::TooManySpins {
                backend: "exact",
                max: MAX_EXACT_SPINS,
                n: sys.n(),
            });
        }
        let state = DiagonalState::product(biases.as_slice())?;
        Self::new(sys, state)
    }

    pub fn state(&self) -> &DiagonalState {
        &self.state
    }
}

impl Backend for ExactBackend {
    fn name(&self) -> &'static str {
        "exact"
    }

    fn system(&self) -> &SpinSystem {
        &self.sys
    }

    fn apply(&mut self, gate: &GateSpec) -> Result<()> {
        gate.apply(&mut self.state, &self.sys)
    }

    fn apply_validated(&mut self, gate: &GateSpec) -> Result<()> {
        gate.apply_unchecked(&mut self.state, self.sys.epsilon0());
        Ok(())
    }

    fn bias(&self, spin: usize) -> f64 {
        self.state.marginal_bias(spin).expect("spin in range")
    }

    fn biases(&self) -> BiasVector {
        self.state.biases()
    }

    fn sands(&self) -> Option<SandSDiagonal> {
        self.state.to_sands(self.sys.epsilon0()).ok()
    }

    fn max_prob(&self) -> Option<f64> {
        Some(self.state.max_prob())
    }

    fn total_prob(&self) -> Option<f64> {
        Some(self.state.total_prob())
    }

    fn separable(&self) -> Option<bool> {
        let d = self.sands()?;
        let scale = d.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        // Second-order terms of a genuine product state are O(eps0 * scale^2).
        Some(d.is_separable(SEPARABLE_TOL + self.sys.epsilon0() * scale * scale))
    }
}

/// S&S diagonal in exact fractions.
#[derive(Debug, Clone)]
pub struct RationalBackend {
    sys: SpinSystem,
    state: RationalState,
}

impl RationalBackend {
    pub fn new(sys: SpinSystem, state: RationalState) -> Result<Self> {
        if state.n() != sys.n() {
            return Err(Error::LengthMismatch {
                expected: sys.n(),
                got: state.n(),
            });
        }
        Ok(Self { sys, state })
    }

    /// First-order product state; biases are divided by `eps0` and
    /// converted exactly from their `f64` values.
    pub fn product(sys: SpinSystem, biases: &BiasVector) -> Result<Self> {
        let e = sys.epsilon0();
        let units = biases
            .as_slice()
            .iter()
            .map(|b| {
                BigRational::from_float(b / e).ok_or_else(|| Error::InvalidState(format!("bias {b} is not finite")))
            })
            .collect::<Result<Vec<_>>>()?;
        let state = RationalState::product(&units)?;
        Self::new(sys, state)
    }

    pub fn state(&self) -> &RationalState {
        &self.state
    }
}

impl Backend for RationalBackend {
    fn name(&self) -> &'static str {
        "rational"
    }

    fn system(&self) -> &SpinSystem {
        &self.sys
    }

    fn apply(&mut self, gate: &GateSpec) -> Result<()> {
        self.state.apply(gate, &self.sys)
    }

    fn bias(&self, spin: usize) -> f64 {
        ratio_to_f64(&self.state.marginal_over_eps0(spin).expect("spin in range")) * self.sys.epsilon0()
    }

    fn biases(&self) -> BiasVector {
        BiasVector::from_vec_unchecked((0..self.sys.n()).map(|i| self.bias(i)).collect())
    }

    fn sands(&self) -> Option<SandSDiagonal> {
        Some(self.state.to_f64())
    }

    fn exact_sands(&self) -> Option<Vec<BigRational>> {
        Some(self.state.sands().to_vec())
    }

    fn max_prob(&self) -> Option<f64> {
        let len = (1u64 << self.sys.n()) as f64;
        Some((1.0 + self.sys.epsilon0() * ratio_to_f64(&self.state.max_entry())) / len)
    }

    fn total_prob(&self) -> Option<f64> {
        // The first-order RESET and all permutations keep the S&S sum at
        // zero, so the trace is exactly one.
        let len = (1u64 << self.sys.n()) as f64;
        let sum: f64 = self.state.sands().iter().map(ratio_to_f64).sum();
        Some(1.0 + self.sys.epsilon0() * sum / len)
    }

    fn separable(&self) -> Option<bool> {
        Some(self.state.is_separable())
    }
}
