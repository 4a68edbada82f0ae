//! Gates acting on diagonal states.
//!
//! Every gate except RESET relabels basis states, so it is a permutation of
//! the diagonal. The kernels below are generic over the entry type so the
//! floating-point and rational backends share them.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::DiagonalState;
use crate::system::{spin_name, SpinSystem};

/// Calls `f(base)` for every basis index whose bits outside `fixed` range
/// over all values and whose bits inside `fixed` equal `set`.
#[inline]
fn for_each_with(len: usize, fixed: usize, set: usize, mut f: impl FnMut(usize)) {
    let free = (len - 1) & !fixed;
    let mut sub = free;
    loop {
        f(sub | set);
        if sub == 0 {
            break;
        }
        sub = (sub - 1) & free;
    }
}

fn bit(spin: usize) -> usize {
    1 << spin
}

pub(crate) fn comp_exchange_in_place<T>(data: &mut [T], spins: &[usize]) {
    let top = bit(spins[0]);
    let rest: usize = spins[1..].iter().map(|&s| bit(s)).sum();
    for_each_with(data.len(), top | rest, 0, |base| data.swap(base | top, base | rest));
}

pub(crate) fn cnot_in_place<T>(data: &mut [T], control: usize, target: usize) {
    let (c, t) = (bit(control), bit(target));
    for_each_with(data.len(), c | t, c, |i| data.swap(i, i | t));
}

pub(crate) fn not_in_place<T>(data: &mut [T], spin: usize) {
    let b = bit(spin);
    for_each_with(data.len(), b, 0, |i| data.swap(i, i | b));
}

pub(crate) fn swap_in_place<T>(data: &mut [T], s1: usize, s2: usize) {
    let (a, b) = (bit(s1), bit(s2));
    for_each_with(data.len(), a | b, a, |i| data.swap(i, i ^ (a | b)));
}

pub(crate) fn cswap_in_place<T>(data: &mut [T], control: usize, t1: usize, t2: usize) {
    let (c, a, b) = (bit(control), bit(t1), bit(t2));
    for_each_with(data.len(), c | a | b, c | a, |i| data.swap(i, i ^ (a | b)));
}

pub(crate) fn bcs_in_place<T>(data: &mut [T], x: usize, y: usize, chain: &[usize]) {
    cnot_in_place(data, y, x);
    not_in_place(data, x);
    let mut carrier = y;
    for (i, &c) in chain.iter().enumerate() {
        if i % 2 == 0 {
            cswap_in_place(data, x, carrier, c);
        } else {
            swap_in_place(data, carrier, c);
        }
        carrier = c;
    }
}

/// Replaces each pair of entries differing only in `spin` by `f(a, b)`,
/// where `a` has the spin in `|0>`.
pub(crate) fn pairwise_in_place<T>(data: &mut [T], spin: usize, mut f: impl FnMut(&T, &T) -> (T, T)) {
    let b = bit(spin);
    for_each_with(data.len(), b, 0, |i| {
        let (lo, hi) = f(&data[i], &data[i | b]);
        data[i] = lo;
        data[i | b] = hi;
    });
}

/// Stable descending sort; returns the permutation as `perm[old] = new`.
pub(crate) fn sort_in_place<T: Clone>(data: &mut [T], mut cmp: impl FnMut(&T, &T) -> std::cmp::Ordering) -> Vec<usize> {
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&a, &b| cmp(&data[b], &data[a]));
    let sorted: Vec<T> = order.iter().map(|&i| data[i].clone()).collect();
    data.clone_from_slice(&sorted);
    let mut perm = vec![0; order.len()];
    for (new, &old) in order.iter().enumerate() {
        perm[old] = new;
    }
    perm
}

/// Exact RESET on deviations `d = 2^n p - 1`: the pair's mass is split as
/// `(1 + eps0) / 2` and `(1 - eps0) / 2`.
pub(crate) fn reset_deviations(dev: &mut [f64], spin: usize, epsilon0: f64) {
    pairwise_in_place(dev, spin, |a, b| {
        let mean = 0.5 * (a + b);
        let shift = epsilon0 * (1.0 + mean);
        (mean + shift, mean - shift)
    });
}

/// Gate vocabulary of the cooling algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GateKind {
    /// `(l)B-Comp`: exchanges `|10...0>` and `|01...1>` on `l` spins; the
    /// first operand is the cooled spin.
    CompExchange(usize),
    /// Operands: control, target.
    Cnot,
    Not,
    /// Operands: control, first target, second target.
    Cswap,
    Swap,
    /// Polarization transfer: a SWAP written `PT(from→to)`.
    Transfer,
    /// Thermalizes the listed reset spins to `eps0`.
    Reset,
    /// Polarization transfer from a dedicated, freshly thermalized partner
    /// that is not simulated explicitly. Acts like RESET on the listed spins.
    PartnerRefresh,
    /// Descending sort of the whole diagonal.
    Sort,
    /// Operands: x, y, then the relocation chain.
    BcsStep,
    /// Lets dedicated reset partners rethermalize. No effect on simulated
    /// spins.
    Wait,
}

/// A gate together with the spins it acts on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateSpec {
    pub kind: GateKind,
    pub operands: Vec<usize>,
}

impl GateSpec {
    pub fn new(kind: GateKind, operands: Vec<usize>) -> Result<Self> {
        let g = Self { kind, operands };
        g.check_shape()?;
        Ok(g)
    }

    pub fn comp(spins: &[usize]) -> Result<Self> {
        Self::new(GateKind::CompExchange(spins.len()), spins.to_vec())
    }

    pub fn reset(spins: &[usize]) -> Result<Self> {
        Self::new(GateKind::Reset, spins.to_vec())
    }

    pub fn sort() -> Self {
        Self {
            kind: GateKind::Sort,
            operands: Vec::new(),
        }
    }

    pub fn wait() -> Self {
        Self {
            kind: GateKind::Wait,
            operands: Vec::new(),
        }
    }

    fn check_shape(&self) -> Result<()> {
        let got = self.operands.len();
        let ok = match self.kind {
            GateKind::CompExchange(l) => l >= 3 && got == l,
            GateKind::Cnot | GateKind::Swap | GateKind::Transfer => got == 2,
            GateKind::Not => got == 1,
            GateKind::Cswap => got == 3,
            GateKind::Reset | GateKind::PartnerRefresh => got >= 1,
            GateKind::Sort | GateKind::Wait => got == 0,
            GateKind::BcsStep => got >= 2,
        };
        if !ok {
            let (gate, expected) = match self.kind {
                GateKind::CompExchange(_) => ("compression exchange", "l >= 3 (matching l)"),
                GateKind::Cnot => ("CNOT", "2"),
                GateKind::Swap => ("SWAP", "2"),
                GateKind::Transfer => ("PT", "2"),
                GateKind::Not => ("NOT", "1"),
                GateKind::Cswap => ("CSWAP", "3"),
                GateKind::Reset => ("RESET", "at least 1"),
                GateKind::PartnerRefresh => ("partner PT", "at least 1"),
                GateKind::Sort => ("SORT", "0"),
                GateKind::Wait => ("WAIT", "0"),
                GateKind::BcsStep => ("BCS", "at least 2"),
            };
            return Err(Error::Arity { gate, expected, got });
        }
        for (i, &s) in self.operands.iter().enumerate() {
            if self.operands[..i].contains(&s) {
                return Err(Error::DuplicateSpin(s));
            }
        }
        Ok(())
    }

    /// Checks arity, distinctness, range and reset-spin membership.
    pub fn validate(&self, sys: &SpinSystem) -> Result<()> {
        self.check_shape()?;
        for &s in &self.operands {
            sys.check_spin(s)?;
        }
        if self.kind == GateKind::Reset {
            for &s in &self.operands {
                sys.check_reset_spin(s)?;
            }
        }
        Ok(())
    }

    /// Whether the gate is a relabeling of basis states.
    pub fn is_permutation(&self) -> bool {
        !matches!(self.kind, GateKind::Reset | GateKind::PartnerRefresh | GateKind::Wait)
    }

    /// Applies the gate to an exact state after validating it.
    pub fn apply(&self, state: &mut DiagonalState, sys: &SpinSystem) -> Result<()> {
        self.validate(sys)?;
        if state.n() != sys.n() {
            return Err(Error::LengthMismatch {
                expected: sys.n(),
                got: state.n(),
            });
        }
        self.apply_unchecked(state, sys.epsilon0());
        Ok(())
    }

    /// Applies a gate already checked with [`GateSpec::validate`].
    pub(crate) fn apply_unchecked(&self, state: &mut DiagonalState, epsilon0: f64) {
        let ops = &self.operands;
        let dev = state.deviations_mut();
        match self.kind {
            GateKind::CompExchange(_) => comp_exchange_in_place(dev, ops),
            GateKind::Cnot => cnot_in_place(dev, ops[0], ops[1]),
            GateKind::Not => not_in_place(dev, ops[0]),
            GateKind::Cswap => cswap_in_place(dev, ops[0], ops[1], ops[2]),
            GateKind::Swap | GateKind::Transfer => swap_in_place(dev, ops[0], ops[1]),
            GateKind::Reset | GateKind::PartnerRefresh => {
                for &s in ops {
                    reset_deviations(dev, s, epsilon0);
                }
            }
            GateKind::Sort => {
                sort_in_place(dev, f64::total_cmp);
            }
            GateKind::BcsStep => bcs_in_place(dev, ops[0], ops[1], &ops[2..]),
            GateKind::Wait => {}
        }
    }

    /// Trace label, e.g. `3B-Comp(C;B;A)`, `RESET(B;A)` or `PT(A→B)`.
    pub fn label(&self) -> String {
        self.to_string()
    }
}

fn names(spins: &[usize], sep: &str) -> String {
    spins.iter().map(|&s| spin_name(s)).collect::<Vec<_>>().join(sep)
}

impl fmt::Display for GateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ops = &self.operands;
        match self.kind {
            GateKind::CompExchange(l) => write!(f, "{l}B-Comp({})", names(ops, ";")),
            GateKind::Cnot => write!(f, "CNOT({}→{})", spin_name(ops[0]), spin_name(ops[1])),
            GateKind::Not => write!(f, "NOT({})", spin_name(ops[0])),
            GateKind::Cswap => write!(
                f,
                "CSWAP({};{},{})",
                spin_name(ops[0]),
                spin_name(ops[1]),
                spin_name(ops[2])
            ),
            GateKind::Swap => write!(f, "SWAP({},{})", spin_name(ops[0]), spin_name(ops[1])),
            GateKind::Transfer => write!(f, "PT({}→{})", spin_name(ops[0]), spin_name(ops[1])),
            GateKind::Reset => write!(f, "RESET({})", names(ops, ";")),
            GateKind::PartnerRefresh if ops.len() == 1 => {
                let x = spin_name(ops[0]);
                write!(f, "PT(r_{x}→{x})")
            }
            GateKind::PartnerRefresh => {
                let parts: Vec<String> = ops
                    .iter()
                    .map(|&s| {
                        let x = spin_name(s);
                        format!("(r_{x}→{x})")
                    })
                    .collect();
                write!(f, "PT({})", parts.join(";"))
            }
            GateKind::Sort => f.write_str("SORT"),
            GateKind::BcsStep => write!(
                f,
                "BCS({};{};{})",
                spin_name(ops[0]),
                spin_name(ops[1]),
                names(&ops[2..], ",")
            ),
            GateKind::Wait => f.write_str("WAIT"),
        }
    }
}

fn applied(state: &DiagonalState, gate: GateSpec) -> Result<DiagonalState> {
    let n = state.n();
    let sys = SpinSystem::new(n, 0.5)?;
    let mut out = state.clone();
    gate.apply(&mut out, &sys)?;
    Ok(out)
}

/// Exchanges `|10...0>` and `|01...1>` on `spins` (first operand most
/// significant), for every assignment of the remaining spins.
pub fn comp_exchange(state: &DiagonalState, spins: &[usize]) -> Result<DiagonalState> {
    applied(state, GateSpec::comp(spins)?)
}

pub fn cnot(state: &DiagonalState, control: usize, target: usize) -> Result<DiagonalState> {
    applied(state, GateSpec::new(GateKind::Cnot, vec![control, target])?)
}

pub fn not_gate(state: &DiagonalState, spin: usize) -> Result<DiagonalState> {
    applied(state, GateSpec::new(GateKind::Not, vec![spin])?)
}

pub fn cswap(state: &DiagonalState, control: usize, t1: usize, t2: usize) -> Result<DiagonalState> {
    applied(state, GateSpec::new(GateKind::Cswap, vec![control, t1, t2])?)
}

pub fn swap(state: &DiagonalState, s1: usize, s2: usize) -> Result<DiagonalState> {
    applied(state, GateSpec::new(GateKind::Swap, vec![s1, s2])?)
}

/// CNOT(y→x), NOT(x), then relocation of `y` along `chain` by alternating
/// CSWAP (controlled by `x`) and SWAP gates.
pub fn bcs_step(state: &DiagonalState, x: usize, y: usize, chain: &[usize]) -> Result<DiagonalState> {
    let mut ops = vec![x, y];
    ops.extend_from_slice(chain);
    applied(state, GateSpec::new(GateKind::BcsStep, ops)?)
}

/// Thermalizes `spin`, which must be a reset spin of `sys`.
pub fn reset(state: &DiagonalState, spin: usize, sys: &SpinSystem) -> Result<DiagonalState> {
    let mut out = state.clone();
    GateSpec::reset(&[spin])?.apply(&mut out, sys)?;
    Ok(out)
}

/// Sorts the diagonal into non-increasing order (ties keep index order) and
/// returns the permutation `perm[old] = new`.
pub fn sort_step(state: &DiagonalState) -> (DiagonalState, Vec<usize>) {
    let mut out = state.clone();
    let perm = sort_in_place(out.deviations_mut(), f64::total_cmp);
    (out, perm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::spin_sign;
    use proptest::prelude::*;

    fn random_state(n: usize) -> impl Strategy<Value = DiagonalState> {
        prop::collection::vec(0.01f64..1.0, 1 << n).prop_map(|w| {
            let s: f64 = w.iter().sum();
            let p: Vec<f64> = w.iter().map(|x| x / s).collect();
            DiagonalState::from_probs(&p).unwrap()
        })
    }

    fn sorted(v: &[f64]) -> Vec<f64> {
        let mut v = v.to_vec();
        v.sort_by(f64::total_cmp);
        v
    }

    fn all_gates(n: usize) -> Vec<GateSpec> {
        assert!(n >= 4);
        vec![
            GateSpec::comp(&[2, 1, 0]).unwrap(),
            GateSpec::comp(&[3, 0, 2, 1]).unwrap(),
            GateSpec::new(GateKind::Cnot, vec![1, 3]).unwrap(),
            GateSpec::new(GateKind::Not, vec![2]).unwrap(),
            GateSpec::new(GateKind::Cswap, vec![0, 3, 1]).unwrap(),
            GateSpec::new(GateKind::Swap, vec![3, 0]).unwrap(),
            GateSpec::new(GateKind::BcsStep, vec![0, 1, 2, 3]).unwrap(),
            GateSpec::sort(),
        ]
    }

    #[test]
    fn labels() {
        assert_eq!(GateSpec::comp(&[2, 1, 0]).unwrap().label(), "3B-Comp(C;B;A)");
        assert_eq!(GateSpec::reset(&[1, 0]).unwrap().label(), "RESET(B;A)");
        let pt = GateSpec::new(GateKind::Transfer, vec![0, 1]).unwrap();
        assert_eq!(pt.label(), "PT(A→B)");
        let refresh = GateSpec::new(GateKind::PartnerRefresh, vec![2, 1, 0]).unwrap();
        assert_eq!(refresh.label(), "PT((r_C→C);(r_B→B);(r_A→A))");
        let one = GateSpec::new(GateKind::PartnerRefresh, vec![4]).unwrap();
        assert_eq!(one.label(), "PT(r_E→E)");
    }

    #[test]
    fn shape_errors() {
        assert!(matches!(GateSpec::comp(&[1, 0]), Err(Error::Arity { got: 2, .. })));
        assert_eq!(GateSpec::comp(&[1, 0, 1]), Err(Error::DuplicateSpin(1)));
        let sys = SpinSystem::new(3, 0.1).unwrap().with_reset_spins([0]).unwrap();
        let mut s = DiagonalState::completely_mixed(3);
        assert_eq!(
            GateSpec::reset(&[1]).unwrap().apply(&mut s, &sys),
            Err(Error::NotResetSpin(1))
        );
        assert!(matches!(
            GateSpec::comp(&[3, 1, 0]).unwrap().apply(&mut s, &sys),
            Err(Error::SpinOutOfRange { index: 3, n: 3 })
        ));
    }

    #[test]
    fn comp_swaps_the_named_patterns() {
        // Mark every basis state by its own index and check the relabeling.
        let mut v: Vec<usize> = (0..16).collect();
        comp_exchange_in_place(&mut v, &[3, 1, 0]);
        // Spin 3 = 1, spins 1,0 = 0 (index 8 or 12) swaps with spin 3 = 0,
        // spins 1,0 = 1 (index 3 or 7).
        let mut want: Vec<usize> = (0..16).collect();
        want.swap(8, 3);
        want.swap(12, 7);
        assert_eq!(v, want);
    }

    #[test]
    fn reset_cms_matches_alternating_pattern() {
        let sys = SpinSystem::new(3, 1e-3).unwrap().with_reset_spins([0]).unwrap();
        let s = reset(&DiagonalState::completely_mixed(3), 0, &sys).unwrap();
        let d = s.to_sands(1e-3).unwrap();
        for (x, v) in d.values().iter().enumerate() {
            assert!((v - spin_sign(x, 0)).abs() < 1e-12);
        }
    }

    #[test]
    fn sort_already_sorted_is_identity() {
        let s = DiagonalState::from_probs(&[0.4, 0.3, 0.2, 0.1]).unwrap();
        let (out, perm) = sort_step(&s);
        assert_eq!(perm, vec![0, 1, 2, 3]);
        assert_eq!(out, s);
    }

    #[test]
    fn sort_ties_keep_index_order() {
        let mut v = vec![1.0, 3.0, 1.0, 3.0];
        let perm = sort_in_place(&mut v, f64::total_cmp);
        assert_eq!(v, vec![3.0, 3.0, 1.0, 1.0]);
        assert_eq!(perm, vec![2, 0, 3, 1]);
    }

    #[test]
    fn cnot_doubles_conditional_bias() {
        let e = 0.1;
        // Spin 0 is the target X, spin 1 the control Y.
        let s = DiagonalState::product(&[e, e]).unwrap();
        let out = cnot(&s, 1, 0).unwrap();
        let p = out.probs();
        // X = |0>: indices 0 (Y = 0) and 2 (Y = 1).
        let cond = p[0] / (p[0] + p[2]);
        let want = (1.0 + e).powi(2) / ((1.0 + e).powi(2) + (1.0 - e).powi(2));
        assert!((cond - want).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn permutation_gates_preserve_multiset_and_entropy(s in random_state(4)) {
            let sys = SpinSystem::new(4, 0.1).unwrap();
            for g in all_gates(4) {
                let mut out = s.clone();
                g.apply(&mut out, &sys).unwrap();
                prop_assert_eq!(sorted(out.deviations()), sorted(s.deviations()));
                prop_assert!((out.entropy() - s.entropy()).abs() <= 1e-12);
            }
        }

        #[test]
        fn involutions(s in random_state(4)) {
            let twice = |f: &dyn Fn(&DiagonalState) -> DiagonalState| f(&f(&s));
            prop_assert_eq!(&twice(&|x| comp_exchange(x, &[3, 2, 1, 0]).unwrap()), &s);
            prop_assert_eq!(&twice(&|x| comp_exchange(x, &[1, 3, 0]).unwrap()), &s);
            prop_assert_eq!(&twice(&|x| not_gate(x, 2).unwrap()), &s);
            prop_assert_eq!(&twice(&|x| cnot(x, 0, 3).unwrap()), &s);
            prop_assert_eq!(&twice(&|x| cswap(x, 1, 0, 2).unwrap()), &s);
        }

        #[test]
        fn sort_is_idempotent_and_descending(s in random_state(3)) {
            let (once, perm) = sort_step(&s);
            prop_assert!(once.deviations().windows(2).all(|w| w[0] >= w[1]));
            for (old, &new) in perm.iter().enumerate() {
                prop_assert_eq!(once.deviations()[new], s.deviations()[old]);
            }
            let (twice, _) = sort_step(&once);
            prop_assert_eq!(twice, once);
        }

        #[test]
        fn reset_sets_marginal_and_keeps_others(s in random_state(3), e in 0.001f64..0.9) {
            let sys = SpinSystem::new(3, e).unwrap().with_reset_spins([0]).unwrap();
            let out = reset(&s, 0, &sys).unwrap();
            prop_assert!((out.marginal_bias(0).unwrap() - e).abs() <= 1e-14);
            for i in 1..3 {
                prop_assert!((out.marginal_bias(i).unwrap() - s.marginal_bias(i).unwrap()).abs() <= 1e-14);
            }
            prop_assert!((out.total_prob() - 1.0).abs() <= 1e-12);
            let again = reset(&out, 0, &sys).unwrap();
            for (a, b) in again.deviations().iter().zip(out.deviations()) {
                prop_assert!((a - b).abs() <= 1e-15);
            }
        }
    }
}
