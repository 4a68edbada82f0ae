//! Acceptance criteria, one PASS/FAIL line each. Run with
//! `cargo test -p spincool --test acceptance`; exits non-zero if any fails.
//!
//! No libtest harness: the criteria run sequentially so the wall-clock limits
//! are not skewed by other tests sharing the CPU.

use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spincool::analysis::{allbonacci_limit_diagonal, fixed_point_residuals};
use spincool::gates::{cnot, comp_exchange, cswap, not_gate};
use spincool::state::spin_sign;
use spincool::*;

const EPS0: f64 = 1e-6;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn quiet() -> RunOptions {
    RunOptions {
        trace: TraceOptions::quiet(),
        ..Default::default()
    }
}

fn run(n: usize, eps0: f64, schedule: Schedule, kind: BackendKind) -> Outcome {
    let sys = SpinSystem::new(n, eps0).unwrap();
    simulate(&sys, &schedule, kind, &quiet()).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn within(t: Instant, limit: Duration) -> (bool, String) {
    let e = t.elapsed();
    (
        e < limit,
        format!("{:.2} s (limit {} s)", e.as_secs_f64(), limit.as_secs()),
    )
}

fn q(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Three-spin PPA from the completely mixed state, 13 steps, rational
/// backend. Each row is the S&S diagonal (numerators, shared denominator)
/// and the biases A, B, C in units of eps0 (`None` where the state is not
/// a product to first order).
#[allow(clippy::type_complexity)]
fn golden_ppa() -> Vec<(&'static str, [i64; 8], i64, Option<[(i64, i64); 3]>)> {
    vec![
        (
            "RESET(A)",
            [1, -1, 1, -1, 1, -1, 1, -1],
            1,
            Some([(1, 1), (0, 1), (0, 1)]),
        ),
        ("SORT", [1, 1, 1, 1, -1, -1, -1, -1], 1, Some([(0, 1), (0, 1), (1, 1)])),
        (
            "RESET(A)",
            [2, 0, 2, 0, 0, -2, 0, -2],
            1,
            Some([(1, 1), (0, 1), (1, 1)]),
        ),
        ("SORT", [2, 2, 0, 0, 0, 0, -2, -2], 1, Some([(0, 1), (1, 1), (1, 1)])),
        (
            "RESET(A)",
            [3, 1, 1, -1, 1, -1, -1, -3],
            1,
            Some([(1, 1), (1, 1), (1, 1)]),
        ),
        ("SORT", [3, 1, 1, 1, -1, -1, -1, -3], 1, None),
        (
            "RESET(A)",
            [3, 1, 2, 0, 0, -2, -1, -3],
            1,
            Some([(1, 1), (1, 2), (3, 2)]),
        ),
        ("SORT", [3, 2, 1, 0, 0, -1, -2, -3], 1, Some([(1, 2), (1, 1), (3, 2)])),
        (
            "RESET(A)",
            [7, 3, 3, -1, 1, -3, -3, -7],
            2,
            Some([(1, 1), (1, 1), (3, 2)]),
        ),
        ("SORT", [7, 3, 3, 1, -1, -3, -3, -7], 2, None),
        (
            "RESET(A)",
            [7, 3, 4, 0, 0, -4, -3, -7],
            2,
            Some([(1, 1), (3, 4), (7, 4)]),
        ),
        ("SORT", [7, 4, 3, 0, 0, -3, -4, -7], 2, Some([(3, 4), (1, 1), (7, 4)])),
        (
            "RESET(A)",
            [15, 7, 7, -1, 1, -7, -7, -15],
            4,
            Some([(1, 1), (1, 1), (7, 4)]),
        ),
    ]
}

fn exact_marginal(diag: &[BigRational], spin: usize) -> BigRational {
    let sum: BigRational = diag
        .iter()
        .enumerate()
        .map(|(x, v)| {
            if spin_sign(x, spin) > 0.0 {
                v.clone()
            } else {
                -v.clone()
            }
        })
        .sum();
    sum / BigRational::from_integer(BigInt::from(diag.len()))
}

fn criterion_1() -> Verdict {
    let t = Instant::now();
    let sys = SpinSystem::new(3, 1e-3).unwrap();
    let schedule = Schedule::exhaustive(Algorithm::Ppa, 1e-9).with_max_steps(13);
    let opts = RunOptions {
        trace: TraceOptions::all_steps(),
        ..Default::default()
    };
    let out = simulate(&sys, &schedule, BackendKind::Rational, &opts).unwrap();
    let rows = &out.trace.records[1..];
    let golden = golden_ppa();
    let mut bad = Vec::new();
    if rows.len() != golden.len() {
        bad.push(format!("{} rows", rows.len()));
    }
    for (i, (row, (label, num, den, biases))) in rows.iter().zip(&golden).enumerate() {
        let step = i + 1;
        let diag = row.sands_exact.as_ref().expect("rational trace carries exact S&S");
        let want: Vec<BigRational> = num.iter().map(|v| q(*v, *den)).collect();
        if row.label != *label || *diag != want || row.step_index != step as u64 {
            bad.push(format!("step {step} diagonal"));
        }
        match biases {
            Some(b) => {
                let ok = (0..3).all(|s| exact_marginal(diag, s) == q(b[s].0, b[s].1));
                if !ok || row.separable != Some(true) {
                    bad.push(format!("step {step} biases"));
                }
            }
            None => {
                if row.separable != Some(false) {
                    bad.push(format!("step {step} should not be separable"));
                }
            }
        }
    }
    let (fast, time) = within(t, Duration::from_secs(1));
    verdict(
        bad.is_empty() && fast,
        format!(
            "13 steps bit-exact ({}); {time}",
            if bad.is_empty() {
                "all match".into()
            } else {
                bad.join(", ")
            }
        ),
    )
}

fn criterion_2() -> Verdict {
    let t = Instant::now();
    // Dyadic eps0 keeps the leading-order iteration exact in binary.
    let e = 2f64.powi(-17);
    let sys = SpinSystem::new(3, e).unwrap();
    let mut exact = true;
    for m in 0..=30 {
        let out = fernandez(&sys, m, BackendKind::Bias).unwrap();
        let closed = (1.0 - 2f64.powi(-(m as i32))) * 2.0 * e;
        exact &= out.target_bias() == closed;
    }
    let out = run(
        3,
        EPS0,
        Schedule::exhaustive(Algorithm::Fernandez, 1e-5),
        BackendKind::Bias,
    );
    let reps = out.outer_history.len();
    let reached = out.final_over_eps0()[2];
    let (fast, time) = within(t, Duration::from_secs(1));
    verdict(
        exact && reps == 18 && reached >= 2.0 - 1e-5 && fast,
        format!(
            "closed form exact for m<=30: {exact}; delta=1e-5 stops after {reps} reps at {reached:.7} eps0; {time}"
        ),
    )
}

fn criterion_3() -> Verdict {
    let t = Instant::now();
    let fib = kstep_sequence(2, 12);
    let mut worst: f64 = 0.0;
    for n in 3..=12 {
        let out = run(
            n,
            EPS0,
            Schedule::exhaustive(Algorithm::Fibonacci, 1e-5),
            BackendKind::Bias,
        );
        worst = worst.max(rel(out.final_over_eps0()[n - 1], fib[n - 1] as f64));
    }
    let (fast, time) = within(t, Duration::from_secs(10));
    verdict(
        worst <= 1e-4 && fast,
        format!("n=3..12 top bias vs F_n, worst relative error {worst:.2e} (tol 1e-4); {time}"),
    )
}

fn criterion_4() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut cases = vec![(Algorithm::Tribonacci, 4, 4.0), (Algorithm::Tribonacci, 5, 7.0)];
    for k in 2..=6usize {
        cases.push((Algorithm::KBonacci(k), k + 1, (1u64 << (k - 1)) as f64));
        cases.push((Algorithm::KBonacci(k), k + 2, ((1u64 << k) - 1) as f64));
    }
    for &(alg, n, want) in &cases {
        let out = run(n, EPS0, Schedule::exhaustive(alg, 1e-5), BackendKind::Bias);
        worst = worst.max(rel(out.final_over_eps0()[n - 1], want));
    }
    verdict(
        worst <= 1e-4,
        format!(
            "{} tribonacci/k-bonacci limits, worst relative error {worst:.2e} (tol 1e-4)",
            cases.len()
        ),
    )
}

/// All-bonacci on the leading-order backend, n = 3..8; shared by criteria
/// 5 and 6.
fn allbonacci_runs() -> Vec<Outcome> {
    (3..=8)
        .map(|n| {
            run(
                n,
                EPS0,
                Schedule::exhaustive(Algorithm::AllBonacci, 1e-5),
                BackendKind::Bias,
            )
        })
        .collect()
}

fn criterion_5(runs: &[Outcome]) -> Verdict {
    let worst = runs
        .iter()
        .flat_map(|o| fixed_point_residuals(Algorithm::AllBonacci, &o.final_over_eps0()).unwrap())
        .fold(0.0, f64::max);
    verdict(
        worst <= 1e-4,
        format!("n=3..8 every spin vs (2^(n-2),...,2,1,1), worst relative error {worst:.2e} (tol 1e-4)"),
    )
}

fn criterion_6(bias_runs: &[Outcome], bias_time: Duration) -> Verdict {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    let mut drift: f64 = 0.0;
    for n in 3..=8usize {
        let ppa = run(n, EPS0, Schedule::exhaustive(Algorithm::Ppa, 1e-9), BackendKind::Exact);
        let allb = if n <= 7 {
            run(
                n,
                EPS0,
                Schedule::exhaustive(Algorithm::AllBonacci, 1e-5),
                BackendKind::Exact,
            )
        } else {
            bias_runs[n - 3].clone()
        };
        for (a, b) in ppa.final_biases.as_slice().iter().zip(allb.final_biases.as_slice()) {
            worst = worst.max(rel(*a, *b));
        }
        let r = check_ppa_invariance(&allbonacci_limit_diagonal(n), EPS0).unwrap();
        drift = drift.max(r.drift);
    }
    let elapsed = t.elapsed() + bias_time;
    let fast = elapsed < Duration::from_secs(60);
    verdict(
        worst <= 1e-4 && drift <= 1e-10 && fast,
        format!(
            "n=3..8 PPA vs all-bonacci worst per-spin discrepancy {worst:.2e} (tol 1e-4); limit drift {drift:.2e} (tol 1e-10); {:.2} s (limit 60 s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_7() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let b: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let s = DiagonalState::product(&b).unwrap();
        // A = spin 0, B = spin 1, C = spin 2.
        let two = cswap(&not_gate(&cnot(&s, 1, 0).unwrap(), 0).unwrap(), 0, 1, 2).unwrap();
        let three = comp_exchange(&s, &[2, 1, 0]).unwrap();
        worst = worst.max((two.marginal_bias(2).unwrap() - three.marginal_bias(2).unwrap()).abs());
    }
    verdict(
        worst <= 1e-12,
        format!("1000 random product states, max spin-C marginal difference {worst:.2e} (tol 1e-12)"),
    )
}

fn criterion_8() -> Verdict {
    let mut worst_equal: f64 = 0.0;
    for e in [0.01, 0.1, 0.5] {
        let s = DiagonalState::product(&[e, e, e]).unwrap();
        let c = comp_exchange(&s, &[2, 1, 0]).unwrap().marginal_bias(2).unwrap();
        worst_equal = worst_equal.max((c - (3.0 * e - e * e * e) / 2.0).abs());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (a, b, c): (f64, f64, f64) = (
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
        );
        let s = DiagonalState::product(&[a, b, c]).unwrap();
        let got = comp_exchange(&s, &[2, 1, 0]).unwrap().marginal_bias(2).unwrap();
        worst = worst.max((got - (c + b + a - c * b * a) / 2.0).abs());
    }
    verdict(
        worst_equal <= 1e-14 && worst <= 1e-14,
        format!("equal biases max error {worst_equal:.2e}; 1000 random triples max error {worst:.2e} (tol 1e-14)"),
    )
}

fn criterion_9() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = f64::NEG_INFINITY;
    let mut runs = 0;
    for i in 0..500 {
        let n = rng.random_range(3..=8usize);
        let eps = rng.random_range(1e-4..=0.2);
        let sys = SpinSystem::from_epsilon(n, eps).unwrap();
        let (schedule, init) = if i % 2 == 0 {
            let rounds = rng.random_range(1..=60usize);
            let init = if rng.random_bool(0.5) {
                InitialState::CompletelyMixed
            } else {
                InitialState::Thermal
            };
            (Schedule::reps(Algorithm::Ppa, vec![rounds]), init)
        } else {
            let m = rng.random_range(1..=3usize);
            (Schedule::reps(Algorithm::AllBonacci, vec![m]), InitialState::Default)
        };
        let opts = RunOptions {
            trace: TraceOptions::quiet().with_monitor(),
            init,
            ..Default::default()
        };
        let out = simulate(&sys, &schedule, BackendKind::Exact, &opts).unwrap();
        let seen = out.max_prob_seen.unwrap();
        worst = worst.max(seen - theorem1_bound(n, eps));
        runs += 1;
    }
    verdict(
        worst <= 1e-12,
        format!("{runs} runs (n<=8, eps<=0.2), max of (max probability - bound) = {worst:.3e} (tol 1e-12)"),
    )
}

fn criterion_10() -> Verdict {
    let t = Instant::now();
    let eps0 = 1e-4;
    let mut cases: Vec<(Schedule, usize)> = vec![(Schedule::exhaustive(Algorithm::Fernandez, 1e-3), 3)];
    for n in 4..=8 {
        cases.push((Schedule::exhaustive(Algorithm::Fibonacci, 1e-3), n));
        cases.push((Schedule::exhaustive(Algorithm::AllBonacci, 1e-3), n));
    }
    for n in 5..=8 {
        cases.push((Schedule::exhaustive(Algorithm::Tribonacci, 1e-3), n));
    }
    for n in 6..=8 {
        cases.push((Schedule::exhaustive(Algorithm::KBonacci(4), 1e-3), n));
    }
    for l in 1..=3 {
        cases.push((Schedule::reps(Algorithm::Pac1(l), vec![1]), 2 * l + 1));
        cases.push((Schedule::reps(Algorithm::Pac2(l), vec![1]), 2 * l + 1));
    }
    let mut worst: f64 = 0.0;
    let mut worst_case = String::new();
    for (schedule, n) in &cases {
        let a = run(*n, eps0, schedule.clone(), BackendKind::Bias);
        let b = run(*n, eps0, schedule.clone(), BackendKind::Exact);
        let r = rel(a.target_bias(), b.target_bias());
        if r > worst {
            worst = r;
            worst_case = format!("{} n={n}", schedule.algorithm);
        }
    }
    verdict(
        worst <= 50.0 * eps0,
        format!(
            "{} runs, worst relative gap {worst:.2e} = {:.2} eps0 at {worst_case} (tol 50 eps0); PPA/BCS have no leading-order form; {:.2} s",
            cases.len(),
            worst / eps0,
            t.elapsed().as_secs_f64()
        ),
    )
}

fn criterion_11() -> Verdict {
    let mut worst: f64 = 0.0;
    for l in 1..=6usize {
        for alg in [Algorithm::Pac1(l), Algorithm::Pac2(l)] {
            let out = run(2 * l + 1, EPS0, Schedule::reps(alg, vec![1]), BackendKind::Bias);
            worst = worst.max(rel(out.final_over_eps0()[2 * l], 1.5f64.powi(l as i32)));
        }
    }
    let big = run(
        13,
        EPS0,
        Schedule::reps(Algorithm::Pac2(6), vec![1]),
        BackendKind::Exact,
    );
    let reported = big.final_over_eps0()[12];
    verdict(
        worst <= 1e-12 && rel(reported, 1.5f64.powi(6)) <= 1e-3,
        format!("L=1..6 leading-order worst relative error {worst:.2e}; 13-spin PAC2 exact reports {reported:.4} eps0"),
    )
}

fn trace_bytes(n: usize, schedule: &Schedule, kind: BackendKind) -> (Vec<u8>, Vec<u8>) {
    let sys = SpinSystem::new(n, 1e-3).unwrap();
    let opts = RunOptions {
        trace: TraceOptions::all_steps(),
        ..Default::default()
    };
    let out = simulate(&sys, schedule, kind, &opts).unwrap();
    let (mut csv, mut json) = (Vec::new(), Vec::new());
    out.trace.write_csv(&mut csv).unwrap();
    out.trace.write_json(&mut json).unwrap();
    (csv, json)
}

fn criterion_12() -> Verdict {
    let configs = [
        (3, Schedule::reps(Algorithm::Ppa, vec![20]), BackendKind::Rational),
        (6, Schedule::exhaustive(Algorithm::Fibonacci, 1e-3), BackendKind::Bias),
        (5, Schedule::exhaustive(Algorithm::Tribonacci, 1e-3), BackendKind::Exact),
        (5, Schedule::reps(Algorithm::Pac2(2), vec![1]), BackendKind::Exact),
        (4, Schedule::reps(Algorithm::Bcs, vec![1]), BackendKind::Exact),
    ];
    let same = configs
        .iter()
        .all(|(n, s, k)| trace_bytes(*n, s, *k) == trace_bytes(*n, s, *k));
    verdict(
        same,
        format!("{} configs, CSV and JSON traces byte-identical: {same}", configs.len()),
    )
}

fn main() {
    let t = Instant::now();
    let allb = allbonacci_runs();
    let allb_time = t.elapsed();
    let results = [
        ("golden PPA trace", criterion_1()),
        ("Fernandez closed form", criterion_2()),
        ("Fibonacci limits", criterion_3()),
        ("tribonacci / k-bonacci limits", criterion_4()),
        ("all-bonacci configuration", criterion_5(&allb)),
        ("PPA matches all-bonacci", criterion_6(&allb, allb_time)),
        ("scheme equivalence", criterion_7()),
        ("exact compression formulas", criterion_8()),
        ("maximum-probability bound", criterion_9()),
        ("cross-backend agreement", criterion_10()),
        ("PAC target bias", criterion_11()),
        ("determinism", criterion_12()),
    ];
    let mut failed = Vec::new();
    for (i, (name, v)) in results.iter().enumerate() {
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} [{tag}] {name}: {}", i + 1, v.detail);
        if !v.pass {
            failed.push(i + 1);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria pass", results.len());
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
