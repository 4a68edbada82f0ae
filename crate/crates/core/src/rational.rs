//! Exact rational evolution of the S&S diagonal in the small-bias limit.
//!
//! Entries are S&S values `p'` held as arbitrary-precision fractions. RESET
//! uses its first-order form, where each pair `(a, b)` becomes
//! `(m + 1, m - 1)` with `m = (a + b) / 2`; permutations are exact. This is
//! the `eps0 -> 0` limit of the floating-point exact backend, and it keeps
//! dyadic traces such as `(15, 7, 7, -1, 1, -7, -7, -15) / 4` exact.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::gates::{self, GateKind, GateSpec};
use crate::state::SandSDiagonal;
use crate::system::SpinSystem;

/// Largest spin count the rational backend accepts.
pub const MAX_RATIONAL_SPINS: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct RationalState {
    n: usize,
    sands: Vec<BigRational>,
}

fn sign(index: usize, spin: usize) -> bool {
    index >> spin & 1 == 0
}

impl RationalState {
    fn check_n(n: usize) -> Result<()> {
        if n == 0 || n > MAX_RATIONAL_SPINS {
            return Err(Error::TooManySpins {
                backend: "rational",
                max: MAX_RATIONAL_SPINS,
                n,
            });
        }
        Ok(())
    }

    pub fn completely_mixed(n: usize) -> Result<Self> {
        Self::check_n(n)?;
        Ok(Self {
            n,
            sands: vec![BigRational::zero(); 1 << n],
        })
    }

    /// First-order S&S diagonal of a product state whose biases, in units
    /// of `eps0`, are `biases[i]` for spin `i`: `p'_x = sum_i s_i(x) b_i`.
    pub fn product(biases: &[BigRational]) -> Result<Self> {
        let n = biases.len();
        Self::check_n(n)?;
        let sands = (0..1usize << n)
            .map(|x| {
                biases.iter().enumerate().fold(
                    BigRational::zero(),
                    |acc, (i, b)| {
                        if sign(x, i) {
                            acc + b
                        } else {
                            acc - b
                        }
                    },
                )
            })
            .collect();
        Ok(Self { n, sands })
    }

    pub fn from_sands(sands: Vec<BigRational>) -> Result<Self> {
        if sands.len() < 2 || !sands.len().is_power_of_two() {
            return Err(Error::InvalidState(format!(
                "diagonal length {} is not a power of two >= 2",
                sands.len()
            )));
        }
        let n = sands.len().trailing_zeros() as usize;
        Self::check_n(n)?;
        Ok(Self { n, sands })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sands(&self) -> &[BigRational] {
        &self.sands
    }

    /// Marginal bias of `spin` in units of `eps0`.
    pub fn marginal_over_eps0(&self, spin: usize) -> Result<BigRational> {
        if spin >= self.n {
            return Err(Error::SpinOutOfRange { index: spin, n: self.n });
        }
        let sum =
            self.sands.iter().enumerate().fold(
                BigRational::zero(),
                |acc, (x, v)| {
                    if sign(x, spin) {
                        acc + v
                    } else {
                        acc - v
                    }
                },
            );
        Ok(sum / BigRational::from_integer(BigInt::from(1u64 << self.n)))
    }

    pub fn biases_over_eps0(&self) -> Vec<BigRational> {
        (0..self.n)
            .map(|i| self.marginal_over_eps0(i).expect("spin in range"))
            .collect()
    }

    /// Whether the diagonal is exactly linear in the spin signs.
    pub fn is_separable(&self) -> bool {
        let b = self.biases_over_eps0();
        self.sands.iter().enumerate().all(|(x, v)| {
            let lin = b.iter().enumerate().fold(
                BigRational::zero(),
                |acc, (i, bi)| {
                    if sign(x, i) {
                        acc + bi
                    } else {
                        acc - bi
                    }
                },
            );
            &lin == v
        })
    }

    pub fn to_f64(&self) -> SandSDiagonal {
        SandSDiagonal::new(self.sands.iter().map(ratio_to_f64).collect()).expect("length is a power of two")
    }

    pub fn max_entry(&self) -> BigRational {
        self.sands.iter().max().cloned().expect("non-empty diagonal")
    }

    pub fn apply(&mut self, gate: &GateSpec, sys: &SpinSystem) -> Result<()> {
        gate.validate(sys)?;
        let ops = &gate.operands;
        let data = &mut self.sands;
        match gate.kind {
            GateKind::CompExchange(_) => gates::comp_exchange_in_place(data, ops),
            GateKind::Cnot => gates::cnot_in_place(data, ops[0], ops[1]),
            GateKind::Not => gates::not_in_place(data, ops[0]),
            GateKind::Cswap => gates::cswap_in_place(data, ops[0], ops[1], ops[2]),
            GateKind::Swap | GateKind::Transfer => gates::swap_in_place(data, ops[0], ops[1]),
            GateKind::Reset | GateKind::PartnerRefresh => {
                let one = BigRational::one();
                let two = BigRational::from_integer(BigInt::from(2));
                for &s in ops {
                    gates::pairwise_in_place(data, s, |a, b| {
                        let m = (a + b) / &two;
                        (&m + &one, m - &one)
                    });
                }
            }
            GateKind::Sort => {
                gates::sort_in_place(data, |a, b| a.cmp(b));
            }
            GateKind::BcsStep => gates::bcs_in_place(data, ops[0], ops[1], &ops[2..]),
            GateKind::Wait => {}
        }
        Ok(())
    }
}

/// Nearest `f64` to a fraction.
pub fn ratio_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        if r.is_positive() {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        }
    })
}

/// Renders a fraction as `a/b`, or `a` when the denominator is one.
pub fn ratio_to_string(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parses the output of [`ratio_to_string`].
pub fn parse_ratio(s: &str) -> Result<BigRational> {
    let bad = || Error::Config(format!("not a fraction: {s:?}"));
    match s.split_once('/') {
        Some((a, b)) => {
            let a: BigInt = a.trim().parse().map_err(|_| bad())?;
            let b: BigInt = b.trim().parse().map_err(|_| bad())?;
            if b.is_zero() {
                return Err(bad());
            }
            Ok(BigRational::new(a, b))
        }
        None => Ok(BigRational::from_integer(s.trim().parse().map_err(|_| bad())?)),
    }
}
