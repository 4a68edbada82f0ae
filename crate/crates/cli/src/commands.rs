use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use spincool::analysis::{expected_target, fixed_point_residuals, shannon_bound, theorem1};
use spincool::format::sig;
use spincool::{simulate, BackendKind, Outcome, Trace, TraceOptions};

use crate::config::{resolve, Resolved, RunConfig};
use crate::{CliError, Format};

const INVARIANT_TOL: f64 = 1e-12;

#[derive(Debug, Serialize)]
struct Bounds {
    shannon_over_eps0: f64,
    exceeds_shannon: bool,
    theorem1: f64,
    theorem1_claimed: Option<f64>,
    max_prob_final: Option<f64>,
    max_prob_seen: Option<f64>,
    within_theorem1: Option<bool>,
    max_prob_sum_error: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Summary {
    config: RunConfig,
    reset_spins: Vec<usize>,
    steps: u64,
    converged: bool,
    truncated: bool,
    target_spin: usize,
    /// Target spin bias in units of eps0.
    final_bias_over_eps0: f64,
    /// Every spin, indexed by spin.
    final_config_over_eps0: Vec<f64>,
    /// Every spin, highest spin first.
    final_config: String,
    expected_target_over_eps0: Option<f64>,
    target_relative_error: Option<f64>,
    fixed_point_residuals: Option<Vec<f64>>,
    separable: Option<bool>,
    conditional_target_bias_over_eps0: Option<f64>,
    bounds: Bounds,
    trace_rows: usize,
}

fn execute(r: &Resolved) -> Result<Outcome, CliError> {
    Ok(simulate(&r.system, &r.schedule, r.backend, &r.options)?)
}

fn summarize(r: &Resolved, out: &Outcome) -> Summary {
    let n = r.system.n();
    let eps0 = r.system.epsilon0();
    let over = out.final_over_eps0();
    let target = over[out.target_spin];
    let expected = expected_target(r.algorithm, n);
    let exact_backend = r.backend != BackendKind::Bias;
    let bound = theorem1(n, r.system.epsilon(), true);
    let max_prob_final = out.trace.records.last().and_then(|rec| rec.max_prob);
    let worst_prob = out.max_prob_seen.or(max_prob_final);
    Summary {
        config: r.config.clone(),
        reset_spins: out.system.reset_spins().iter().copied().collect(),
        steps: out.steps,
        converged: out.converged,
        truncated: out.truncated,
        target_spin: out.target_spin,
        final_bias_over_eps0: target,
        final_config: out.final_biases.display_in_units(eps0).to_string(),
        final_config_over_eps0: over.clone(),
        expected_target_over_eps0: expected,
        target_relative_error: expected.map(|e| (target - e).abs() / e),
        fixed_point_residuals: fixed_point_residuals(r.algorithm, &over),
        separable: out.trace.records.last().and_then(|rec| rec.separable),
        conditional_target_bias_over_eps0: out.conditional_target_bias.map(|b| b / eps0),
        bounds: Bounds {
            shannon_over_eps0: shannon_bound(n, eps0) / eps0,
            exceeds_shannon: target > shannon_bound(n, eps0) / eps0,
            theorem1: bound.loose,
            theorem1_claimed: bound.claimed,
            max_prob_final,
            max_prob_seen: out.max_prob_seen,
            within_theorem1: worst_prob
                .filter(|_| exact_backend)
                .map(|p| p <= bound.loose + INVARIANT_TOL),
            max_prob_sum_error: out.max_prob_sum_error,
        },
        trace_rows: out.trace.records.len(),
    }
}

/// Invariants a finished run must satisfy; violations exit with code 3.
fn breaches(s: &Summary) -> Vec<String> {
    let mut v = Vec::new();
    if s.bounds.within_theorem1 == Some(false) {
        v.push(format!(
            "max probability {:e} exceeds the bound {:e}",
            s.bounds.max_prob_seen.or(s.bounds.max_prob_final).unwrap_or(f64::NAN),
            s.bounds.theorem1
        ));
    }
    if let Some(e) = s.bounds.max_prob_sum_error.filter(|e| *e > INVARIANT_TOL) {
        v.push(format!("probabilities sum to 1 only within {e:e}"));
    }
    let eps0 = s.config.eps0.unwrap_or(1.0);
    if s.final_config_over_eps0
        .iter()
        .any(|b| (b * eps0).abs() > 1.0 + INVARIANT_TOL)
    {
        v.push("a final bias lies outside [-1, 1]".into());
    }
    v
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = BufWriter::new(fs::File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Io(e.to_string()))?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, CliError> {
    Ok(BufWriter::new(
        fs::File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
    ))
}

fn write_trace(trace: &Trace, dir: &Path, format: Format) -> Result<(), CliError> {
    if matches!(format, Format::Csv | Format::Both) {
        trace.write_csv(create(&dir.join("trace.csv"))?)?;
    }
    if matches!(format, Format::Json | Format::Both) {
        let mut w = create(&dir.join("trace.json"))?;
        trace.write_json(&mut w)?;
        w.flush()?;
    }
    Ok(())
}

pub fn run(cfg: &RunConfig, out_dir: &Path, format: Format) -> Result<(), CliError> {
    let r = resolve(cfg)?;
    let out = execute(&r)?;
    fs::create_dir_all(out_dir).map_err(|e| CliError::Io(format!("{}: {e}", out_dir.display())))?;
    write_trace(&out.trace, out_dir, format)?;
    let summary = summarize(&r, &out);
    write_json(&out_dir.join("summary.json"), &summary)?;
    println!(
        "{} n={} ({} backend): target spin {} at {} eps0 after {} steps{}",
        out.algorithm,
        r.system.n(),
        r.backend,
        spincool::spin_name(out.target_spin),
        sig(summary.final_bias_over_eps0, 8),
        out.steps,
        if out.truncated {
            ", truncated"
        } else if !out.converged {
            ", not converged"
        } else {
            ""
        }
    );
    println!("final configuration {} eps0", summary.final_config);
    let bad = breaches(&summary);
    if bad.is_empty() {
        Ok(())
    } else {
        Err(CliError::Invariant(bad.join("\n")))
    }
}

#[derive(Debug, Serialize)]
struct Side {
    config: RunConfig,
    target_spin: usize,
    final_bias_over_eps0: f64,
    final_config_over_eps0: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct Comparison {
    a: Side,
    b: Side,
    /// Target bias of `a` over target bias of `b`.
    target_ratio: f64,
    /// `a_i / b_i` over the spins both runs have.
    per_spin_ratio: Vec<f64>,
    max_ratio_deviation: f64,
    /// Largest S&S entry difference, when both runs carry a diagonal.
    max_sands_discrepancy: Option<f64>,
    identical: bool,
}

fn side(r: &Resolved, out: &Outcome) -> Side {
    let over = out.final_over_eps0();
    Side {
        config: r.config.clone(),
        target_spin: out.target_spin,
        final_bias_over_eps0: over[out.target_spin],
        final_config_over_eps0: over,
    }
}

fn quiet(mut r: Resolved) -> Resolved {
    r.options.trace = TraceOptions {
        depth: None,
        ..r.options.trace
    };
    r
}

pub fn compare(a: &RunConfig, b: &RunConfig, allow_n_mismatch: bool, out_dir: Option<&Path>) -> Result<(), CliError> {
    let (ra, rb) = (quiet(resolve(a)?), quiet(resolve(b)?));
    if ra.system.n() != rb.system.n() && !allow_n_mismatch {
        return Err(CliError::Config(format!(
            "runs have {} and {} spins; pass --allow-n-mismatch to compare their common spins",
            ra.system.n(),
            rb.system.n()
        )));
    }
    if ra.system.epsilon0() != rb.system.epsilon0() {
        return Err(CliError::Config(format!(
            "runs use different eps0 ({} and {})",
            ra.system.epsilon0(),
            rb.system.epsilon0()
        )));
    }
    let (oa, ob) = rayon::join(|| execute(&ra), || execute(&rb));
    let (oa, ob) = (oa?, ob?);
    let (sa, sb) = (side(&ra, &oa), side(&rb, &ob));
    let per_spin_ratio: Vec<f64> = sa
        .final_config_over_eps0
        .iter()
        .zip(&sb.final_config_over_eps0)
        .map(|(x, y)| x / y)
        .collect();
    let max_ratio_deviation = per_spin_ratio.iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max);
    let max_sands_discrepancy = match (&oa.final_sands, &ob.final_sands) {
        (Some(x), Some(y)) if x.n() == y.n() => Some(x.max_abs_diff(y)),
        _ => None,
    };
    let report = Comparison {
        target_ratio: sa.final_bias_over_eps0 / sb.final_bias_over_eps0,
        identical: oa.final_biases == ob.final_biases && oa.final_sands == ob.final_sands,
        a: sa,
        b: sb,
        per_spin_ratio,
        max_ratio_deviation,
        max_sands_discrepancy,
    };
    println!(
        "a: {}  target {} eps0",
        a.label(),
        sig(report.a.final_bias_over_eps0, 8)
    );
    println!(
        "b: {}  target {} eps0",
        b.label(),
        sig(report.b.final_bias_over_eps0, 8)
    );
    println!("target ratio a/b: {}", sig(report.target_ratio, 8));
    println!(
        "per-spin ratios (spin 0 first): {}",
        report
            .per_spin_ratio
            .iter()
            .map(|r| sig(*r, 8))
            .collect::<Vec<_>>()
            .join(", ")
    );
    if let Some(d) = report.max_sands_discrepancy {
        println!("max S&S discrepancy: {}", sig(d, 6));
    }
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        write_json(&dir.join("compare.json"), &report)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct SweepRow {
    n: usize,
    eps0: f64,
    steps: u64,
    converged: bool,
    truncated: bool,
    final_bias_over_eps0: f64,
    expected_over_eps0: Option<f64>,
    relative_error: Option<f64>,
}

pub fn sweep(base: &RunConfig, ns: &[usize], eps0s: &[f64], out_dir: Option<&Path>) -> Result<(), CliError> {
    let eps0s: Vec<Option<f64>> = if eps0s.is_empty() {
        vec![None]
    } else {
        eps0s.iter().copied().map(Some).collect()
    };
    let mut jobs = Vec::new();
    for &n in ns {
        for &e in &eps0s {
            let over = RunConfig {
                n: Some(n),
                eps0: e,
                ..Default::default()
            };
            jobs.push(quiet(resolve(&base.clone().layered(over))?));
        }
    }
    let rows: Vec<SweepRow> = jobs
        .par_iter()
        .map(|r| {
            let out = execute(r)?;
            let target = out.final_over_eps0()[out.target_spin];
            let expected = expected_target(r.algorithm, r.system.n());
            Ok(SweepRow {
                n: r.system.n(),
                eps0: r.system.epsilon0(),
                steps: out.steps,
                converged: out.converged,
                truncated: out.truncated,
                final_bias_over_eps0: target,
                expected_over_eps0: expected,
                relative_error: expected.map(|e| (target - e).abs() / e),
            })
        })
        .collect::<Result<_, CliError>>()?;
    let mut table = csv::Writer::from_writer(Vec::new());
    let opt = |v: Option<f64>| v.map(|x| sig(x, 8)).unwrap_or_default();
    table
        .write_record([
            "n",
            "eps0",
            "steps",
            "converged",
            "truncated",
            "final_bias_over_eps0",
            "expected_over_eps0",
            "relative_error",
        ])
        .map_err(|e| CliError::Io(e.to_string()))?;
    for row in &rows {
        table
            .write_record([
                row.n.to_string(),
                sig(row.eps0, 8),
                row.steps.to_string(),
                row.converged.to_string(),
                row.truncated.to_string(),
                sig(row.final_bias_over_eps0, 8),
                opt(row.expected_over_eps0),
                opt(row.relative_error),
            ])
            .map_err(|e| CliError::Io(e.to_string()))?;
    }
    let text = table.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    std::io::stdout().write_all(&text)?;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("sweep.csv"), &text)?;
        write_json(&dir.join("sweep.json"), &rows)?;
    }
    Ok(())
}

pub fn validate(path: &Path, tol: f64) -> Result<(), CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let trace = Trace::from_json(&text)?;
    let problems = check_trace(&trace, tol);
    if problems.is_empty() {
        println!("{}: {} records ok", path.display(), trace.records.len());
        Ok(())
    } else {
        Err(CliError::Invariant(problems.join("\n")))
    }
}

/// Re-checks the per-record invariants of a parsed trace.
fn check_trace(trace: &Trace, tol: f64) -> Vec<String> {
    let h = &trace.header;
    let mut bad = Vec::new();
    let exact_backend = h.backend != BackendKind::Bias.as_str();
    let bound = theorem1(h.n, h.epsilon, false).loose;
    let mut last_step = 0;
    for r in &trace.records {
        let at = format!("step {} ({})", r.step_index, r.label);
        if r.step_index < last_step {
            bad.push(format!("{at}: step index decreases"));
        }
        last_step = r.step_index;
        let b = r.bias_config.as_slice();
        if b.len() != h.n {
            bad.push(format!("{at}: {} biases for {} spins", b.len(), h.n));
            continue;
        }
        if let Some(v) = b.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            bad.push(format!("{at}: bias {v} outside [-1, 1]"));
        }
        if let Some(d) = &r.sands {
            if d.n() != h.n {
                bad.push(format!("{at}: diagonal has the wrong length"));
                continue;
            }
            let from_diag = d.biases_over_eps0();
            for (i, (m, v)) in from_diag.iter().zip(b).enumerate() {
                let want = v / h.epsilon0;
                if (m - want).abs() > tol * want.abs().max(1.0) {
                    bad.push(format!(
                        "{at}: spin {i} marginal {m} from the diagonal, {want} recorded"
                    ));
                }
            }
            if let Some(exact) = &r.sands_exact {
                let off = exact
                    .iter()
                    .zip(d.values())
                    .any(|(q, v)| (spincool::rational::ratio_to_f64(q) - v).abs() > tol * v.abs().max(1.0));
                if exact.len() != d.values().len() || off {
                    bad.push(format!("{at}: exact and floating diagonals disagree"));
                }
            }
            let sum: f64 = d.values().iter().sum::<f64>() * h.epsilon0 / d.values().len() as f64;
            if sum.abs() > tol {
                bad.push(format!("{at}: probabilities sum to 1 + {sum:e}"));
            }
        }
        if let Some(p) = r.max_prob {
            if p > 1.0 + tol || (exact_backend && p > bound + tol) {
                bad.push(format!("{at}: max probability {p} exceeds the bound {bound}"));
            }
        }
    }
    bad
}
