//! Schedulers that turn each cooling algorithm into a gate sequence.
//!
//! The Fibonacci family shares one recursion. On `j` spins `A_j..A_1`
//! (spins `j-1..0`), `F_k` repeats: compress `A_j` with the next
//! `min(k, j-1)` spins below it, then run `F_k` on `A_{j-1}..A_1`. Two spins
//! are the base case, where the step is RESET of both reset spins. Fernandez
//! is the 3-spin instance, Fibonacci is `k = 2`, Tribonacci `k = 3`, and
//! all-bonacci `k = n - 1`.

use num_rational::BigRational;

use crate::analysis::conditional_bias;
use crate::backend::{Backend, BackendKind, BiasBackend, ExactBackend, RationalBackend};
use crate::error::{Error, Result};
use crate::gates::{GateKind, GateSpec};
use crate::leading_order::Mode;
use crate::schedule::{Algorithm, InitialState, Schedule, Termination};
use crate::state::{from_sands, SandSDiagonal};
use crate::system::{BiasVector, SpinSystem};
use crate::trace::{Trace, TraceHeader, TraceOptions, TraceRecord, MAX_SANDS_SPINS};

/// Options that do not change the gate sequence.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub trace: TraceOptions,
    pub init: InitialState,
    /// Compression update used by the bias backend.
    pub bias_mode: Mode,
}

/// Result of a scheduler run.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub algorithm: Algorithm,
    pub backend: BackendKind,
    /// The system actually simulated, with reset spins filled in.
    pub system: SpinSystem,
    pub trace: Trace,
    pub final_biases: BiasVector,
    pub final_sands: Option<SandSDiagonal>,
    pub final_sands_exact: Option<Vec<BigRational>>,
    /// The spin the algorithm cools.
    pub target_spin: usize,
    /// Primitive steps executed.
    pub steps: u64,
    /// Every loop met its termination rule.
    pub converged: bool,
    /// The run hit `max_steps`.
    pub truncated: bool,
    /// Target bias after each outer repetition (or PPA round).
    pub outer_history: Vec<f64>,
    /// Largest basis-state probability over all monitored steps.
    pub max_prob_seen: Option<f64>,
    /// Largest `|sum p - 1|` over all monitored steps.
    pub max_prob_sum_error: Option<f64>,
    /// BCS only: bias of the relocated spin conditioned on the flag being
    /// `|1>`.
    pub conditional_target_bias: Option<f64>,
}

impl Outcome {
    pub fn target_bias(&self) -> f64 {
        self.final_biases.as_slice()[self.target_spin]
    }

    /// Final biases in units of `eps0`, indexed by spin.
    pub fn final_over_eps0(&self) -> Vec<f64> {
        self.final_biases.in_units_of(self.system.epsilon0())
    }
}

struct Runner<'a, B: Backend> {
    be: &'a mut B,
    opts: TraceOptions,
    with_sands: bool,
    records: Vec<TraceRecord>,
    steps: u64,
    max_steps: u64,
    truncated: bool,
    converged: bool,
    history: Vec<f64>,
    max_prob_seen: Option<f64>,
    max_sum_err: Option<f64>,
}

impl<'a, B: Backend> Runner<'a, B> {
    fn new(be: &'a mut B, opts: TraceOptions, max_steps: u64) -> Self {
        let with_sands = opts.sands && be.system().n() <= MAX_SANDS_SPINS;
        let mut r = Self {
            be,
            opts,
            with_sands,
            records: Vec::new(),
            steps: 0,
            max_steps,
            truncated: false,
            converged: true,
            history: Vec::new(),
            max_prob_seen: None,
            max_sum_err: None,
        };
        r.monitor();
        r.records.push(TraceRecord::capture(
            &*r.be as &dyn Backend,
            0,
            "INIT".into(),
            r.with_sands,
        ));
        r
    }

    fn monitor(&mut self) {
        if !self.opts.monitor {
            return;
        }
        if let Some(p) = self.be.max_prob() {
            self.max_prob_seen = Some(self.max_prob_seen.map_or(p, |m| m.max(p)));
        }
        if let Some(t) = self.be.total_prob() {
            let e = (t - 1.0).abs();
            self.max_sum_err = Some(self.max_sum_err.map_or(e, |m| m.max(e)));
        }
    }

    /// Applies one validated gate. Returns `false` once `max_steps` is hit.
    fn step(&mut self, gate: &GateSpec, depth: usize) -> Result<bool> {
        if self.truncated {
            return Ok(false);
        }
        self.be.apply_validated(gate)?;
        self.steps += 1;
        self.monitor();
        if self.opts.depth.is_some_and(|d| depth <= d) {
            self.records.push(TraceRecord::capture(
                &*self.be as &dyn Backend,
                self.steps,
                gate.label(),
                self.with_sands,
            ));
        }
        if self.steps >= self.max_steps {
            self.truncated = true;
        }
        Ok(!self.truncated)
    }

    fn finish(mut self) -> (Vec<TraceRecord>, RunStats) {
        if self.records.last().map(|r| r.step_index) != Some(self.steps) {
            self.records.push(TraceRecord::capture(
                &*self.be as &dyn Backend,
                self.steps,
                "FINAL".into(),
                self.with_sands,
            ));
        }
        let stats = RunStats {
            steps: self.steps,
            truncated: self.truncated,
            converged: self.converged && !self.truncated,
            history: self.history,
            max_prob_seen: self.max_prob_seen,
            max_sum_err: self.max_sum_err,
        };
        (self.records, stats)
    }
}

struct RunStats {
    steps: u64,
    truncated: bool,
    converged: bool,
    history: Vec<f64>,
    max_prob_seen: Option<f64>,
    max_sum_err: Option<f64>,
}

fn validated(gate: GateSpec, sys: &SpinSystem) -> Result<GateSpec> {
    gate.validate(sys)?;
    Ok(gate)
}

/// The recursion shared by Fernandez, Fibonacci, Tribonacci, k-bonacci and
/// all-bonacci.
struct Bonacci<'s> {
    n: usize,
    comps: Vec<Option<GateSpec>>,
    reset: GateSpec,
    schedule: &'s Schedule,
    tol: f64,
}

impl<'s> Bonacci<'s> {
    fn new(sys: &SpinSystem, k: usize, schedule: &'s Schedule) -> Result<Self> {
        let n = sys.n();
        let mut comps = vec![None; n + 1];
        for (j, slot) in comps.iter_mut().enumerate().skip(3) {
            let k_eff = k.min(j - 1);
            let spins: Vec<usize> = (0..=k_eff).map(|i| j - 1 - i).collect();
            *slot = Some(validated(GateSpec::comp(&spins)?, sys)?);
        }
        let tol = match schedule.termination {
            Termination::Exhaustive { delta } => delta * sys.epsilon0(),
            Termination::Reps(_) => 0.0,
        };
        Ok(Self {
            n,
            comps,
            reset: validated(GateSpec::reset(&[1, 0])?, sys)?,
            schedule,
            tol,
        })
    }

    fn level<B: Backend>(&self, r: &mut Runner<B>, j: usize, parent_iter: u64) -> Result<bool> {
        let depth = self.n - j;
        if j == 2 {
            return r.step(&self.reset, depth);
        }
        let comp = self.comps[j].as_ref().expect("level >= 3");
        let top = j - 1;
        match self.schedule.reps_for(self.n, j, parent_iter) {
            Some(m) => {
                for it in 0..m as u64 {
                    if !r.step(comp, depth)? || !self.level(r, j - 1, it)? {
                        return Ok(false);
                    }
                    if j == self.n {
                        r.history.push(r.be.bias(top));
                    }
                }
            }
            None => {
                let mut prev = r.be.bias(top);
                let mut it = 0u64;
                loop {
                    if !r.step(comp, depth)? || !self.level(r, j - 1, it)? {
                        return Ok(false);
                    }
                    it += 1;
                    let b = r.be.bias(top);
                    if j == self.n {
                        r.history.push(b);
                    }
                    // The first repetition may act on spins the inner levels
                    // have not prepared yet, so convergence is judged from
                    // the second one on.
                    if it >= 2 && (b - prev).abs() < self.tol {
                        break;
                    }
                    if it >= self.schedule.max_level_iters {
                        r.converged = false;
                        break;
                    }
                    prev = b;
                }
            }
        }
        Ok(true)
    }
}

/// PAC recursion `M_j(k)`: cool computation spin `c_k` (spin `k - 1`) to
/// purification level `j` by running `M_{j-1}` on `c_k, c_{k-1}, c_{k-2}`
/// and compressing them.
struct Pac {
    dedicated: bool,
    levels: usize,
    pending: Vec<usize>,
    last_was_comp: bool,
    reset_fresh: bool,
    wait: GateSpec,
    reset_a: GateSpec,
}

impl Pac {
    fn m<B: Backend>(&mut self, r: &mut Runner<B>, sys: &SpinSystem, j: usize, k: usize) -> Result<bool> {
        let depth = self.levels - j;
        if j == 0 {
            return self.initialize(r, sys, k - 1, depth);
        }
        for kk in [k, k - 1, k - 2] {
            if !self.m(r, sys, j - 1, kk)? {
                return Ok(false);
            }
        }
        if !self.flush(r, sys, depth + 1)? {
            return Ok(false);
        }
        let comp = validated(GateSpec::comp(&[k - 1, k - 2, k - 3])?, sys)?;
        self.last_was_comp = true;
        if comp.operands.contains(&0) {
            self.reset_fresh = false;
        }
        r.step(&comp, depth)
    }

    /// `M_0` for one spin.
    fn initialize<B: Backend>(
        &mut self,
        r: &mut Runner<B>,
        sys: &SpinSystem,
        spin: usize,
        depth: usize,
    ) -> Result<bool> {
        if self.dedicated {
            // Grouped into one PT step with the other M_0 calls of this M_1.
            self.pending.push(spin);
            return Ok(true);
        }
        self.last_was_comp = false;
        if spin == 0 {
            if self.reset_fresh {
                return Ok(true);
            }
            self.reset_fresh = true;
            return r.step(&self.reset_a, depth);
        }
        for s in 0..spin {
            let pt = validated(GateSpec::new(GateKind::Transfer, vec![s, s + 1])?, sys)?;
            if !r.step(&pt, depth)? {
                return Ok(false);
            }
        }
        self.reset_fresh = true;
        r.step(&self.reset_a, depth)
    }

    fn flush<B: Backend>(&mut self, r: &mut Runner<B>, sys: &SpinSystem, depth: usize) -> Result<bool> {
        if self.pending.is_empty() {
            return Ok(true);
        }
        if self.last_was_comp && !r.step(&self.wait, depth)? {
            return Ok(false);
        }
        let spins = std::mem::take(&mut self.pending);
        let pt = validated(GateSpec::new(GateKind::PartnerRefresh, spins)?, sys)?;
        self.last_was_comp = false;
        r.step(&pt, depth)
    }
}

fn with_reset_spins(sys: &SpinSystem, alg: Algorithm) -> Result<SpinSystem> {
    let sys = if sys.reset_spins().is_empty() {
        sys.clone().with_reset_spins(alg.default_reset_spins())?
    } else {
        sys.clone()
    };
    if alg == Algorithm::Ppa && sys.reset_spins().iter().ne([0usize].iter()) {
        return Err(Error::Config(format!(
            "PPA needs exactly one reset spin, spin 0; got {:?}",
            sys.reset_spins()
        )));
    }
    Ok(sys)
}

fn initial_biases(sys: &SpinSystem, init: InitialState) -> BiasVector {
    let e = sys.epsilon0();
    let b = (0..sys.n())
        .map(|i| match init {
            InitialState::CompletelyMixed => 0.0,
            InitialState::Thermal => e,
            InitialState::ResetPrimed | InitialState::Default => {
                if sys.is_reset_spin(i) {
                    e
                } else {
                    0.0
                }
            }
        })
        .collect();
    BiasVector::new(b).expect("biases within [-1, 1]")
}

fn termination_label(t: &Termination) -> String {
    match t {
        Termination::Reps(r) => format!(
            "reps({})",
            r.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(",")
        ),
        Termination::Exhaustive { delta } => format!("exhaustive(delta={delta:e})"),
    }
}

/// Runs `schedule` on `sys` with the chosen backend.
///
/// If `sys` designates no reset spins the algorithm's defaults are used:
/// spins 0 and 1 for the Fibonacci family, spin 0 for PAC2 and PPA.
pub fn simulate(sys: &SpinSystem, schedule: &Schedule, kind: BackendKind, opts: &RunOptions) -> Result<Outcome> {
    let alg = schedule.algorithm;
    let n = sys.n();
    schedule.check(n)?;
    if kind == BackendKind::Bias && matches!(alg, Algorithm::Ppa | Algorithm::Bcs) {
        return Err(Error::Config(format!(
            "{alg} needs the exact or rational backend; the bias backend cannot represent SORT or controlled gates"
        )));
    }
    let sys = with_reset_spins(sys, alg)?;
    let init = opts.init.resolve(alg);
    let start = initial_biases(&sys, init);
    // Monomorphized per backend: exhaustive runs execute ~1e9 steps.
    match kind {
        BackendKind::Bias => {
            let mut be = BiasBackend::with_mode(sys.clone(), start, opts.bias_mode);
            drive(&mut be, sys, schedule, kind, init, opts)
        }
        BackendKind::Exact => {
            let mut be = ExactBackend::product(sys.clone(), &start)?;
            drive(&mut be, sys, schedule, kind, init, opts)
        }
        BackendKind::Rational => {
            let mut be = RationalBackend::product(sys.clone(), &start)?;
            drive(&mut be, sys, schedule, kind, init, opts)
        }
    }
}

fn drive<B: Backend>(
    backend: &mut B,
    sys: SpinSystem,
    schedule: &Schedule,
    kind: BackendKind,
    init: InitialState,
    opts: &RunOptions,
) -> Result<Outcome> {
    let alg = schedule.algorithm;
    let n = sys.n();
    let mut runner = Runner::new(backend, opts.trace, schedule.max_steps);
    let mut target_spin = n - 1;

    match alg {
        a if a.bonacci_k(n).is_some() => {
            let rec = Bonacci::new(&sys, a.bonacci_k(n).expect("family member"), schedule)?;
            rec.level(&mut runner, n, 0)?;
        }
        Algorithm::Pac1(l) | Algorithm::Pac2(l) => {
            target_spin = 2 * l;
            let mut pac = Pac {
                dedicated: matches!(alg, Algorithm::Pac1(_)),
                levels: l,
                pending: Vec::new(),
                last_was_comp: false,
                reset_fresh: sys.is_reset_spin(0) && init != InitialState::CompletelyMixed,
                wait: GateSpec::wait(),
                reset_a: if matches!(alg, Algorithm::Pac2(_)) {
                    validated(GateSpec::reset(&[0])?, &sys)?
                } else {
                    GateSpec::wait()
                },
            };
            if pac.m(&mut runner, &sys, l, 2 * l + 1)? {
                runner.history.push(runner.be.bias(target_spin));
            }
        }
        Algorithm::Ppa => run_ppa(&mut runner, &sys, schedule)?,
        Algorithm::Bcs => {
            let mut ops: Vec<usize> = (0..n).collect();
            if n > 2 {
                ops[2..].sort_unstable();
            }
            target_spin = if n > 2 { n - 1 } else { 1 };
            let g = validated(GateSpec::new(GateKind::BcsStep, ops)?, &sys)?;
            runner.step(&g, 0)?;
        }
        _ => unreachable!("every algorithm is handled"),
    }

    let (records, stats) = runner.finish();
    let final_sands = backend.sands();
    let conditional_target_bias = match (alg, &final_sands) {
        (Algorithm::Bcs, Some(d)) => {
            let state = from_sands(d, sys.epsilon0())?;
            Some(conditional_bias(&state, target_spin, 0, true)?)
        }
        _ => None,
    };
    let header = TraceHeader {
        algorithm: alg.to_string(),
        n,
        epsilon0: sys.epsilon0(),
        epsilon: sys.epsilon(),
        backend: kind.as_str().into(),
        reset_spins: sys.reset_spins().iter().copied().collect(),
        initial_state: init.as_str().into(),
        termination: termination_label(&schedule.termination),
    };
    Ok(Outcome {
        algorithm: alg,
        backend: kind,
        final_biases: backend.biases(),
        final_sands,
        final_sands_exact: backend.exact_sands(),
        system: sys,
        trace: Trace { header, records },
        target_spin,
        steps: stats.steps,
        converged: stats.converged,
        truncated: stats.truncated,
        outer_history: stats.history,
        max_prob_seen: stats.max_prob_seen,
        max_prob_sum_error: stats.max_sum_err,
        conditional_target_bias,
    })
}

fn run_ppa<B: Backend>(r: &mut Runner<B>, sys: &SpinSystem, schedule: &Schedule) -> Result<()> {
    let reset = validated(GateSpec::reset(&[0])?, sys)?;
    let sort = GateSpec::sort();
    let top = sys.n() - 1;
    let rounds = schedule.reps_for(sys.n(), sys.n(), 0);
    let delta = match schedule.termination {
        Termination::Exhaustive { delta } => delta,
        Termination::Reps(_) => 0.0,
    };
    let mut round = 0u64;
    loop {
        if rounds.is_some_and(|m| round >= m as u64) {
            return Ok(());
        }
        let before = if rounds.is_none() { r.be.sands() } else { None };
        if !r.step(&reset, 0)? || !r.step(&sort, 0)? {
            return Ok(());
        }
        round += 1;
        r.history.push(r.be.bias(top));
        if let (Some(before), Some(after)) = (before, r.be.sands()) {
            if before.max_abs_diff(&after) < delta {
                return Ok(());
            }
        }
        if rounds.is_none() && round >= schedule.max_level_iters {
            r.converged = false;
            return Ok(());
        }
    }
}

fn quick(sys: &SpinSystem, schedule: Schedule, kind: BackendKind) -> Result<Outcome> {
    simulate(sys, &schedule, kind, &RunOptions::default())
}

/// Example-6 loop: `m` times 3B-Comp(C;B;A) then RESET(B;A).
pub fn fernandez(sys: &SpinSystem, m: usize, kind: BackendKind) -> Result<Outcome> {
    quick(sys, Schedule::reps(Algorithm::Fernandez, vec![m]), kind)
}

pub fn fibonacci(sys: &SpinSystem, termination: Termination, kind: BackendKind) -> Result<Outcome> {
    quick(sys, Schedule::new(Algorithm::Fibonacci, termination), kind)
}

pub fn tribonacci(sys: &SpinSystem, termination: Termination, kind: BackendKind) -> Result<Outcome> {
    quick(sys, Schedule::new(Algorithm::Tribonacci, termination), kind)
}

pub fn kbonacci(sys: &SpinSystem, k: usize, termination: Termination, kind: BackendKind) -> Result<Outcome> {
    quick(sys, Schedule::new(Algorithm::KBonacci(k), termination), kind)
}

pub fn all_bonacci(sys: &SpinSystem, termination: Termination, kind: BackendKind) -> Result<Outcome> {
    quick(sys, Schedule::new(Algorithm::AllBonacci, termination), kind)
}

pub fn pac1(sys: &SpinSystem, level: usize, kind: BackendKind) -> Result<Outcome> {
    quick(sys, Schedule::reps(Algorithm::Pac1(level), vec![1]), kind)
}

pub fn pac2(sys: &SpinSystem, level: usize, kind: BackendKind) -> Result<Outcome> {
    quick(sys, Schedule::reps(Algorithm::Pac2(level), vec![1]), kind)
}

pub fn ppa(sys: &SpinSystem, termination: Termination, kind: BackendKind) -> Result<Outcome> {
    quick(sys, Schedule::new(Algorithm::Ppa, termination), kind)
}

pub fn bcs(sys: &SpinSystem, kind: BackendKind) -> Result<Outcome> {
    quick(sys, Schedule::reps(Algorithm::Bcs, vec![1]), kind)
}
