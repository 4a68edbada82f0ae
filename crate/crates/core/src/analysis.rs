//! Limits, bounds and checks on finished runs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates::{reset, sort_step};
use crate::schedule::Algorithm;
use crate::state::{from_sands, spin_sign, DiagonalState, SandSDiagonal};
use crate::system::SpinSystem;

/// First `len` terms `a_1, a_2, ...` of the k-step sequence with
/// `a_1 = a_2 = 1` and `a_j = a_{j-1} + ... + a_{j-k}` (missing terms
/// dropped). Saturates at `u128::MAX`.
pub fn kstep_sequence(k: usize, len: usize) -> Vec<u128> {
    let mut a: Vec<u128> = Vec::with_capacity(len);
    for j in 0..len {
        let v = if j < 2 {
            1
        } else {
            a[j.saturating_sub(k)..j]
                .iter()
                .fold(0u128, |s, x| s.saturating_add(*x))
        };
        a.push(v);
    }
    a
}

/// Limiting bias of every spin in units of `eps0`, indexed by spin, for the
/// Fibonacci family and PPA. `None` for algorithms without a fixed-point
/// configuration.
pub fn expected_limit(alg: Algorithm, n: usize) -> Option<Vec<f64>> {
    let k = match alg {
        Algorithm::Ppa => n.saturating_sub(1).max(2),
        a => a.bonacci_k(n)?,
    };
    Some(kstep_sequence(k, n).into_iter().map(|v| v as f64).collect())
}

/// Limiting bias of the target spin in units of `eps0`, to leading order.
pub fn expected_target(alg: Algorithm, n: usize) -> Option<f64> {
    match alg {
        Algorithm::Pac1(l) | Algorithm::Pac2(l) => Some(1.5f64.powi(l as i32)),
        a => expected_limit(a, n).and_then(|v| v.last().copied()),
    }
}

/// `|b_i - a_{i+1}| / a_{i+1}` for each spin, from biases in units of `eps0`.
pub fn fixed_point_residuals(alg: Algorithm, over_eps0: &[f64]) -> Option<Vec<f64>> {
    let limit = expected_limit(alg, over_eps0.len())?;
    Some(over_eps0.iter().zip(&limit).map(|(b, a)| (b - a).abs() / a).collect())
}

/// First-order S&S diagonal of the all-bonacci limit on `n` spins: the
/// product state with biases `(1, 1, 2, 4, ..., 2^{n-2})` in units of
/// `eps0`, spin 0 first.
pub fn allbonacci_limit_diagonal(n: usize) -> SandSDiagonal {
    let b = expected_limit(Algorithm::AllBonacci, n).unwrap_or_else(|| vec![1.0; n]);
    let values = (0..1usize << n)
        .map(|x| b.iter().enumerate().map(|(i, bi)| spin_sign(x, i) * bi).sum())
        .collect();
    SandSDiagonal::new(values).expect("length is a power of two")
}

/// Exact product state with the all-bonacci limiting biases.
pub fn allbonacci_limit_state(n: usize, eps0: f64) -> Result<DiagonalState> {
    let b: Vec<f64> = expected_limit(Algorithm::AllBonacci, n)
        .unwrap_or_else(|| vec![1.0; n])
        .into_iter()
        .map(|v| v * eps0)
        .collect();
    DiagonalState::product(&b)
}

/// How a first-order diagonal was turned into a state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lift {
    /// Product state with the diagonal's marginal biases.
    Product,
    /// `p_x = (1 + eps0 p'_x) / 2^n`.
    Affine,
}

/// Change of a diagonal under one exact RESET(A) + SORT round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    /// Largest S&S entry change over the round.
    pub drift: f64,
    /// Change of the top spin's bias, in units of `eps0`.
    pub top_progress: f64,
    pub lift: Lift,
    pub after: SandSDiagonal,
}

/// Applies one PPA round to `diag` and measures how far it moves. A fixed
/// point of PPA moves by `O(eps0)` only.
pub fn check_ppa_invariance(diag: &SandSDiagonal, eps0: f64) -> Result<DriftReport> {
    let n = diag.n();
    let sys = SpinSystem::new(n, eps0)?.with_reset_spins([0])?;
    let (state, lift) = if diag.is_separable(1e-9) {
        let b: Vec<f64> = diag.biases_over_eps0().iter().map(|b| b * eps0).collect();
        (DiagonalState::product(&b)?, Lift::Product)
    } else {
        (from_sands(diag, eps0)?, Lift::Affine)
    };
    let before = state.to_sands(eps0)?;
    let (after, _) = sort_step(&reset(&state, 0, &sys)?);
    let after = after.to_sands(eps0)?;
    let top = n - 1;
    Ok(DriftReport {
        drift: before.max_abs_diff(&after),
        top_progress: after.biases_over_eps0()[top] - before.biases_over_eps0()[top],
        lift,
        after,
    })
}

/// Upper bound `eps0 * sqrt(n)` on the bias any one spin can reach by
/// entropy-preserving compression of `n` spins of bias `eps0`.
pub fn shannon_bound(n: usize, eps0: f64) -> f64 {
    eps0 * (n as f64).sqrt()
}

/// Upper bound on any basis-state probability reachable with PPA,
/// `min(2^-n e^(2^n eps), 1)`.
pub fn theorem1_bound(n: usize, epsilon: f64) -> f64 {
    let scale = (n as f64).exp2();
    ((scale * epsilon).exp() / scale).min(1.0)
}

/// The loose maximum-probability bound and, if requested, the tighter
/// claimed form `2^-n e^(2^(n-1) eps)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbBound {
    pub loose: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub claimed: Option<f64>,
}

pub fn theorem1(n: usize, epsilon: f64, claimed: bool) -> ProbBound {
    let scale = (n as f64).exp2();
    ProbBound {
        loose: theorem1_bound(n, epsilon),
        claimed: claimed.then(|| ((scale / 2.0 * epsilon).exp() / scale).min(1.0)),
    }
}

/// Bias of `target` given that `cond_spin` reads `|1>` (`cond_set`) or
/// `|0>`.
pub fn conditional_bias(state: &DiagonalState, target: usize, cond_spin: usize, cond_set: bool) -> Result<f64> {
    let n = state.n();
    for s in [target, cond_spin] {
        if s >= n {
            return Err(Error::SpinOutOfRange { index: s, n });
        }
    }
    if target == cond_spin {
        return Err(Error::DuplicateSpin(target));
    }
    let (mut up, mut down) = (0.0, 0.0);
    for x in 0..state.len() {
        if (x >> cond_spin & 1 == 1) != cond_set {
            continue;
        }
        if x >> target & 1 == 0 {
            up += state.prob(x);
        } else {
            down += state.prob(x);
        }
    }
    if up + down == 0.0 {
        return Err(Error::InvalidState("conditioning event has probability zero".into()));
    }
    Ok((up - down) / (up + down))
}
