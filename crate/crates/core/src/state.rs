//! Diagonal density matrices and their shifted-and-scaled (S&S) form.
//!
//! A [`DiagonalState`] stores, for every basis index `x`, the deviation
//! `d_x = 2^n p_x - 1` from the uniform distribution rather than `p_x`
//! itself. Near the completely mixed state the interesting information sits
//! in the `eps0`-sized deviations, and storing them directly keeps full
//! relative precision there. The S&S entry of the same index is `d_x / eps0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::{BiasVector, SpinSystem};

/// Tolerance on the probability sum accepted by [`DiagonalState::from_probs`].
pub const PROB_SUM_TOL: f64 = 1e-12;

/// `+1` if `spin` is `|0>` in basis state `index`, `-1` otherwise.
#[inline]
pub fn spin_sign(index: usize, spin: usize) -> f64 {
    if index >> spin & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn check_len(len: usize) -> Result<usize> {
    if len < 2 || !len.is_power_of_two() {
        return Err(Error::InvalidState(format!(
            "diagonal length {len} is not a power of two >= 2"
        )));
    }
    Ok(len.trailing_zeros() as usize)
}

/// Diagonal of an `n`-spin density matrix. Spin 0 is the least significant
/// bit of the basis index.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalState {
    n: usize,
    dev: Vec<f64>,
}

impl DiagonalState {
    /// The uniform distribution over all `2^n` basis states.
    pub fn completely_mixed(n: usize) -> Self {
        Self {
            n,
            dev: vec![0.0; 1 << n],
        }
    }

    /// Tensor product of single-spin states with the given biases.
    pub fn product(biases: &[f64]) -> Result<Self> {
        if biases.is_empty() {
            return Err(Error::InvalidState("a state needs at least one spin".into()));
        }
        if let Some(&b) = biases.iter().find(|b| !(-1.0..=1.0).contains(*b)) {
            return Err(Error::BiasOutOfRange(b));
        }
        let n = biases.len();
        let dev = (0..1usize << n)
            .map(|x| {
                let log: f64 = biases
                    .iter()
                    .enumerate()
                    .map(|(i, b)| (spin_sign(x, i) * b).ln_1p())
                    .sum();
                log.exp_m1()
            })
            .collect();
        Ok(Self { n, dev })
    }

    /// Every spin at the equilibrium bias of `sys`.
    pub fn thermal(sys: &SpinSystem) -> Self {
        Self::product(&vec![sys.epsilon0(); sys.n()]).expect("eps0 lies in (0, 1)")
    }

    /// Builds a state from raw probabilities, checking that they form a
    /// distribution.
    pub fn from_probs(probs: &[f64]) -> Result<Self> {
        let n = check_len(probs.len())?;
        if let Some(p) = probs.iter().find(|p| p.is_nan() || **p < 0.0) {
            return Err(Error::InvalidState(format!("negative probability {p}")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::InvalidState(format!("probabilities sum to {sum}, not 1")));
        }
        let scale = (1usize << n) as f64;
        let dev = probs.iter().map(|p| p * scale - 1.0).collect();
        Ok(Self { n, dev })
    }

    /// Builds a state from deviations `d_x = 2^n p_x - 1`.
    pub fn from_deviations(dev: Vec<f64>) -> Result<Self> {
        let n = check_len(dev.len())?;
        if let Some(d) = dev.iter().find(|d| d.is_nan() || **d < -1.0) {
            return Err(Error::InvalidState(format!(
                "deviation {d} gives a negative probability"
            )));
        }
        let sum: f64 = dev.iter().sum();
        if (sum / dev.len() as f64).abs() > PROB_SUM_TOL {
            return Err(Error::InvalidState(format!(
                "deviations sum to {sum}, probabilities would not sum to 1"
            )));
        }
        Ok(Self { n, dev })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.dev.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn deviations(&self) -> &[f64] {
        &self.dev
    }

    pub(crate) fn deviations_mut(&mut self) -> &mut [f64] {
        &mut self.dev
    }

    pub fn prob(&self, index: usize) -> f64 {
        (1.0 + self.dev[index]) / self.dev.len() as f64
    }

    pub fn probs(&self) -> Vec<f64> {
        (0..self.dev.len()).map(|x| self.prob(x)).collect()
    }

    /// `P(spin = 0) - P(spin = 1)`.
    pub fn marginal_bias(&self, spin: usize) -> Result<f64> {
        if spin >= self.n {
            return Err(Error::SpinOutOfRange { index: spin, n: self.n });
        }
        // The uniform part cancels, so only deviations enter the sum.
        let s: f64 = self.dev.iter().enumerate().map(|(x, d)| spin_sign(x, spin) * d).sum();
        Ok(s / self.dev.len() as f64)
    }

    pub fn biases(&self) -> BiasVector {
        BiasVector::from_vec_unchecked(
            (0..self.n)
                .map(|i| self.marginal_bias(i).expect("spin in range"))
                .collect(),
        )
    }

    pub fn max_prob(&self) -> f64 {
        let m = self.dev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (1.0 + m) / self.dev.len() as f64
    }

    pub fn total_prob(&self) -> f64 {
        1.0 + self.dev.iter().sum::<f64>() / self.dev.len() as f64
    }

    /// Shannon entropy of the full distribution, in bits.
    pub fn entropy(&self) -> f64 {
        self.probs()
            .into_iter()
            .filter(|p| *p > 0.0)
            .map(|p| -p * p.log2())
            .sum()
    }

    pub fn to_sands(&self, epsilon0: f64) -> Result<SandSDiagonal> {
        check_eps0(epsilon0)?;
        Ok(SandSDiagonal {
            values: self.dev.iter().map(|d| d / epsilon0).collect(),
        })
    }
}

fn check_eps0(epsilon0: f64) -> Result<()> {
    if epsilon0 > 0.0 && epsilon0.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidEpsilon(epsilon0))
    }
}

/// Free-function form of [`DiagonalState::marginal_bias`].
pub fn marginal_bias(state: &DiagonalState, spin: usize) -> Result<f64> {
    state.marginal_bias(spin)
}

/// `p' = 2^n (p - 2^-n) / eps0`, entrywise.
pub fn to_sands(state: &DiagonalState, epsilon0: f64) -> Result<SandSDiagonal> {
    state.to_sands(epsilon0)
}

/// Inverse of [`to_sands`]: `p = 2^-n (eps0 p' + 1)`.
pub fn from_sands(diag: &SandSDiagonal, epsilon0: f64) -> Result<DiagonalState> {
    check_eps0(epsilon0)?;
    DiagonalState::from_deviations(diag.values.iter().map(|v| v * epsilon0).collect())
}

/// Shifted-and-scaled diagonal `p' = 2^n (p - 2^-n) / eps0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SandSDiagonal {
    values: Vec<f64>,
}

impl SandSDiagonal {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_len(values.len())?;
        Ok(Self { values })
    }

    pub fn n(&self) -> usize {
        self.values.len().trailing_zeros() as usize
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Single-spin marginal biases in units of `eps0`. Exact for any
    /// `eps0`, because the marginal is linear in the diagonal.
    pub fn biases_over_eps0(&self) -> Vec<f64> {
        let len = self.values.len() as f64;
        (0..self.n())
            .map(|i| {
                self.values
                    .iter()
                    .enumerate()
                    .map(|(x, v)| spin_sign(x, i) * v)
                    .sum::<f64>()
                    / len
            })
            .collect()
    }

    /// Whether the diagonal equals, to first order in `eps0`, the diagonal of
    /// a tensor-product state: `p'_x = sum_i s_i(x) b_i` with `b` the
    /// marginal biases.
    pub fn is_separable(&self, tol: f64) -> bool {
        let b = self.biases_over_eps0();
        self.values.iter().enumerate().all(|(x, v)| {
            let lin: f64 = b.iter().enumerate().map(|(i, bi)| spin_sign(x, i) * bi).sum();
            (v - lin).abs() <= tol
        })
    }

    pub fn is_sorted_desc(&self) -> bool {
        self.values.windows(2).all(|w| w[0] >= w[1])
    }

    /// Largest entrywise difference to `other`.
    pub fn max_abs_diff(&self, other: &SandSDiagonal) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
