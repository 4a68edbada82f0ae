//! Closed-form bias updates.
//!
//! A compression exchange on spins `(top; o_1; ...; o_k)` moves probability
//! `q = p(10...0) - p(01...1)` so that the top spin's bias grows by `2q` and
//! every other operand's bias shrinks by `2q`. The leading-order engine
//! evaluates `2q` to first order in the biases; the exact mode evaluates it
//! from the product-state probabilities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::{BiasVector, SpinSystem};

/// Which form of a compression update to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Mode {
    /// Product-state probabilities, no truncation.
    Exact,
    /// First order in the biases.
    #[default]
    Approx,
}

fn check_bias(b: f64) -> Result<()> {
    if (-1.0..=1.0).contains(&b) {
        Ok(())
    } else {
        Err(Error::BiasOutOfRange(b))
    }
}

/// Gain of the top spin under a compression exchange of a product state.
pub(crate) fn comp_gain(e_top: f64, others: impl IntoIterator<Item = f64>, mode: Mode) -> f64 {
    match mode {
        Mode::Approx => {
            let (k, sum) = others.into_iter().fold((0u64, 0.0), |(k, s), b| (k + 1, s + b));
            // 2^-(k-1) built from its exponent bits; this sits in the hot loop.
            (sum - e_top) * f64::from_bits((1024 - k) << 52)
        }
        Mode::Exact => {
            // 2 (p(10...0) - p(01...1)) with p(pattern) = prod (1 ± b) / 2.
            let mut hi = (1.0 - e_top) / 2.0;
            let mut lo = (1.0 + e_top) / 2.0;
            for b in others {
                hi *= (1.0 + b) / 2.0;
                lo *= (1.0 - b) / 2.0;
            }
            2.0 * (hi - lo)
        }
    }
}

/// New bias of `C` after 3B-Comp(C;B;A).
pub fn comp3_update(e_c: f64, e_b: f64, e_a: f64, mode: Mode) -> Result<f64> {
    for b in [e_c, e_b, e_a] {
        check_bias(b)?;
    }
    Ok(match mode {
        Mode::Exact => (e_c + e_b + e_a - e_c * e_b * e_a) / 2.0,
        Mode::Approx => (e_c + e_b + e_a) / 2.0,
    })
}

/// Leading-order new bias of `D` after 4B-Comp(D;C;B;A).
pub fn comp4_update(e_d: f64, e_c: f64, e_b: f64, e_a: f64) -> Result<f64> {
    for b in [e_d, e_c, e_b, e_a] {
        check_bias(b)?;
    }
    Ok((e_a + e_b + e_c + 3.0 * e_d) / 4.0)
}

/// New bias of `D` after 4B-Comp(D;C;B;A) on a product state, without
/// truncation.
pub fn comp4_update_exact(e_d: f64, e_c: f64, e_b: f64, e_a: f64) -> Result<f64> {
    for b in [e_d, e_c, e_b, e_a] {
        check_bias(b)?;
    }
    Ok(e_d + comp_gain(e_d, [e_c, e_b, e_a], Mode::Exact))
}

/// Leading-order new bias of the top spin after `(k+1)`B-Comp with the `k`
/// other operands' biases in `others`.
pub fn compk_update(e_top: f64, others: &[f64], k: usize) -> Result<f64> {
    if k < 2 || others.len() != k {
        return Err(Error::Arity {
            gate: "(k+1)B-Comp update",
            expected: "k >= 2 other biases",
            got: others.len(),
        });
    }
    check_bias(e_top)?;
    for &b in others {
        check_bias(b)?;
    }
    Ok(e_top + comp_gain(e_top, others.iter().copied(), Mode::Approx))
}

/// Sets each listed reset spin to `eps0`.
pub fn reset_bias(vec: &BiasVector, spins: &[usize], sys: &SpinSystem) -> Result<BiasVector> {
    if vec.len() != sys.n() {
        return Err(Error::LengthMismatch {
            expected: sys.n(),
            got: vec.len(),
        });
    }
    let mut out = vec.clone();
    for &s in spins {
        sys.check_reset_spin(s)?;
        out.set(s, sys.epsilon0());
    }
    Ok(out)
}
