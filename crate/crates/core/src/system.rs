//! Static system configuration and the bias-level view of a state.
//!
//! Spins are indexed `0..n`. Spin 0 is the least significant bit of a
//! basis-state index; when algorithms name spins left to right as
//! `A_n, ..., A_1`, `A_1` is spin 0 and `A_n` is spin `n - 1`.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Human-readable name of a spin: `A` for spin 0, `B` for spin 1, and so on.
pub fn spin_name(spin: usize) -> String {
    if spin < 26 {
        char::from(b'A' + spin as u8).to_string()
    } else {
        format!("S{spin}")
    }
}

/// Number of spins, which of them thermalize quickly, and the equilibrium
/// bias they thermalize to.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinSystem {
    n: usize,
    reset_spins: BTreeSet<usize>,
    epsilon0: f64,
    epsilon: f64,
}

impl SpinSystem {
    /// A system with equilibrium bias `epsilon0` and no reset spins yet.
    pub fn new(n: usize, epsilon0: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("a spin system needs at least one spin".into()));
        }
        if !(epsilon0 > 0.0 && epsilon0 < 1.0) {
            return Err(Error::InvalidEpsilon(epsilon0));
        }
        Ok(Self {
            n,
            reset_spins: BTreeSet::new(),
            epsilon0,
            epsilon: epsilon0.atanh(),
        })
    }

    /// A system specified by the inverse-temperature parameter `epsilon`,
    /// with `epsilon0 = tanh(epsilon)`.
    pub fn from_epsilon(n: usize, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidEpsilon(epsilon));
        }
        let mut sys = Self::new(n, epsilon.tanh())?;
        sys.epsilon = epsilon;
        Ok(sys)
    }

    /// Designates the given spins as reset spins (replacing any previous set).
    pub fn with_reset_spins(mut self, spins: impl IntoIterator<Item = usize>) -> Result<Self> {
        let set: BTreeSet<usize> = spins.into_iter().collect();
        for &s in &set {
            self.check_spin(s)?;
        }
        self.reset_spins = set;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn epsilon0(&self) -> f64 {
        self.epsilon0
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn reset_spins(&self) -> &BTreeSet<usize> {
        &self.reset_spins
    }

    pub fn is_reset_spin(&self, spin: usize) -> bool {
        self.reset_spins.contains(&spin)
    }

    pub fn check_spin(&self, spin: usize) -> Result<()> {
        if spin < self.n {
            Ok(())
        } else {
            Err(Error::SpinOutOfRange { index: spin, n: self.n })
        }
    }

    pub fn check_reset_spin(&self, spin: usize) -> Result<()> {
        self.check_spin(spin)?;
        if self.is_reset_spin(spin) {
            Ok(())
        } else {
            Err(Error::NotResetSpin(spin))
        }
    }
}

/// One polarization bias per spin, indexed by spin. Values are absolute
/// (not divided by `eps0`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BiasVector(Vec<f64>);

impl BiasVector {
    pub fn new(biases: Vec<f64>) -> Result<Self> {
        if let Some(&b) = biases.iter().find(|b| !(-1.0..=1.0).contains(*b)) {
            return Err(Error::BiasOutOfRange(b));
        }
        Ok(Self(biases))
    }

    /// All spins at the same bias.
    pub fn uniform(n: usize, bias: f64) -> Result<Self> {
        Self::new(vec![bias; n])
    }

    pub(crate) fn from_vec_unchecked(biases: Vec<f64>) -> Self {
        Self(biases)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, spin: usize) -> Option<f64> {
        self.0.get(spin).copied()
    }

    pub(crate) fn set(&mut self, spin: usize, bias: f64) {
        self.0[spin] = bias;
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    /// Biases in units of `eps0`, still indexed by spin.
    pub fn in_units_of(&self, eps0: f64) -> Vec<f64> {
        self.0.iter().map(|b| b / eps0).collect()
    }

    /// `{2, 1, 1}`-style rendering in units of `eps0`, highest spin first.
    pub fn display_in_units(&self, eps0: f64) -> ConfigDisplay<'_> {
        ConfigDisplay { biases: self, eps0 }
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Helper returned by [`BiasVector::display_in_units`].
pub struct ConfigDisplay<'a> {
    biases: &'a BiasVector,
    eps0: f64,
}

impl fmt::Display for ConfigDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, b) in self.biases.0.iter().rev().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}", crate::format::sig(b / self.eps0, 6))?;
        }
        f.write_str("}")
    }
}
