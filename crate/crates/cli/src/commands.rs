use std::time::Instant;

use rayon::prelude::*;
use serde_json::{json, Map, Value};

use singtrace_core::eccentric::{self, REPORT_K_MAX};
use singtrace_core::example4::{self, AqParams, Example4Report, Method};
use singtrace_core::states::{self, StructuredSet, WindowMode, WindowState};
use singtrace_core::traces::{self, TraceEstimate};
use singtrace_core::{Index, Result, SpectralSequence};

use crate::args::*;
use crate::report::{num, num_text, to_value, Report, Table};

fn diag(entries: Value) -> Map<String, Value> {
    match entries {
        Value::Object(m) => m,
        _ => unreachable!("diagnostics are objects"),
    }
}

/// `max - min` of the dyadic ratios `S_{2n}/S_n` over the final quarter of
/// the trajectory.
fn trajectory_oscillation(trajectory: &[(u64, f64)]) -> f64 {
    let tail = &trajectory[trajectory.len() - trajectory.len().div_ceil(4)..];
    let (lo, hi) = tail.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, r)| (lo.min(r), hi.max(r)));
    hi - lo
}

pub fn run(cli: &Cli) -> Result<Report> {
    let start = Instant::now();
    let mut report = match &cli.command {
        Command::Analyze(a) => analyze(a)?,
        Command::Pk(a) => pk(a)?,
        Command::Trace(TraceCommand::Dixmier(a)) => dixmier(a)?,
        Command::Trace(TraceCommand::Varga(a)) => varga(a)?,
        Command::Dilate(a) => dilate(a)?,
        Command::State(a) => state(a)?,
        Command::Example4(a) => example4_cmd(a, cli.timing)?,
        Command::Sweep(s) => sweep(s, cli.timing)?,
    };
    if cli.timing {
        report.diagnostics.insert("runtime_ms".into(), num(start.elapsed().as_secs_f64() * 1e3));
    }
    Ok(report)
}

fn analyze(a: &AnalyzeArgs) -> Result<Report> {
    let rep = eccentric::analyze_eccentricity(&a.seq, a.horizon, a.eps)?;
    let mut table = Table::new(vec!["n", "ratio"]);
    for &(n, r) in &rep.trajectory {
        table.push(vec![n.to_string(), num_text(r)]);
    }
    Ok(Report {
        command: "analyze".into(),
        params: json!({ "seq": a.seq.descriptor(), "horizon": a.horizon, "eps": a.eps }),
        diagnostics: diag(json!({
            "horizon": rep.horizon,
            "best_n": rep.best_n,
            "oscillation": num(trajectory_oscillation(&rep.trajectory)),
            "witness_kmax": REPORT_K_MAX,
            "witnesses_found": rep.witnesses.len(),
            "summability": to_value(&a.seq.summability()),
        })),
        results: to_value(&rep),
        table,
    })
}

fn pk(a: &PkArgs) -> Result<Report> {
    let w = eccentric::extract_pk(&a.seq, a.kmax, a.horizon)?;
    let mut table = Table::new(vec!["k", "p", "deviation", "derived_deviation", "derived_holds"]);
    for wi in &w {
        table.push(vec![
            wi.k.to_string(),
            wi.p.to_string(),
            num_text(wi.deviation),
            num_text(wi.derived_deviation),
            wi.derived_holds.to_string(),
        ]);
    }
    let missing: Vec<u32> = (2..=a.kmax).filter(|k| !w.iter().any(|wi| wi.k == *k)).collect();
    let mut trajectory = Vec::new();
    let mut n = 1u64;
    while n <= a.horizon {
        let ratio = a.seq.integral_ratio(Index::At(2 * n), Index::At(n))?;
        trajectory.push((n, ratio));
        n *= 2;
    }
    Ok(Report {
        command: "pk".into(),
        params: json!({ "seq": a.seq.descriptor(), "kmax": a.kmax, "horizon": a.horizon }),
        results: json!({ "witnesses": to_value(&w) }),
        diagnostics: diag(json!({
            "horizon": a.horizon,
            "missing_k": missing,
            "oscillation": num(trajectory_oscillation(&trajectory)),
        })),
        table,
    })
}

fn trace_report(command: &str, params: Value, est: &TraceEstimate, extra: Value) -> Report {
    let mut table = Table::new(vec!["omega", "mean"]);
    for (w, m) in traces::cesaro_rows(est) {
        table.push(vec![w.to_string(), num_text(m)]);
    }
    let mut diagnostics = diag(json!({
        "cutoff": est.cutoff,
        "oscillation": num(est.oscillation),
        "low_confidence": est.low_confidence,
    }));
    if let Value::Object(m) = extra {
        diagnostics.extend(m);
    }
    Report { command: command.into(), params, results: to_value(est), diagnostics, table }
}

fn dixmier(a: &DixmierArgs) -> Result<Report> {
    let est = traces::dixmier_estimate(&a.seq, &a.reference, a.omega)?;
    let params = json!({ "seq": a.seq.descriptor(), "ref": a.reference.descriptor(), "omega": a.omega });
    Ok(trace_report("trace dixmier", params, &est, json!({ "omega": a.omega })))
}

fn varga(a: &VargaArgs) -> Result<Report> {
    let est = traces::varga_estimate(&a.seq, &a.reference, a.kmax, a.horizon)?;
    let params = json!({
        "seq": a.seq.descriptor(), "ref": a.reference.descriptor(), "kmax": a.kmax, "horizon": a.horizon,
    });
    Ok(trace_report("trace varga", params, &est, json!({ "horizon": a.horizon })))
}

fn dilate(a: &DilateArgs) -> Result<Report> {
    // every mu_{k n}(S) up to the check horizon must be reachable
    let reach = a
        .k
        .checked_mul(a.horizon)
        .and_then(|x| x.checked_add(a.k))
        .ok_or_else(|| singtrace_core::Error::Overflow(format!("{} * {}", a.k, a.horizon)))?;
    let s = traces::averaged_operator(&a.seq, a.k, reach)?;
    let (pair, checks) = traces::k_dilation_with_checks(&s, a.k, a.horizon)?;
    let mut table = Table::new(vec!["n", "mu_s", "mu_s_tilde", "eigenvalue_gap", "dilation_gap"]);
    let (gap_fail, dil_fail) = (&checks.eigenvalue_gap.failures, &checks.dilation_gap.failures);
    for n in 2..=a.horizon {
        let idx = a.k * (n - 1) + 1;
        table.push(vec![
            n.to_string(),
            num_text(pair.s.ln_mu(n)?.exp()),
            num_text(pair.s_tilde.ln_mu(idx)?.exp()),
            gap_fail.binary_search(&n).is_err().to_string(),
            dil_fail.binary_search(&n).is_err().to_string(),
        ]);
    }
    Ok(Report {
        command: "dilate".into(),
        params: json!({ "seq": a.seq.descriptor(), "k": a.k, "horizon": a.horizon }),
        results: json!({
            "k": pair.k,
            "averaged": pair.s.descriptor(),
            "dilated": pair.s_tilde.descriptor(),
            "checks": to_value(&checks),
        }),
        diagnostics: diag(json!({
            "horizon": a.horizon,
            "averaged_reach": reach,
            "eigenvalue_gap_failures": gap_fail.len(),
            "dilation_gap_failures": dil_fail.len(),
            // pointwise checks, no window average to oscillate
            "oscillation": Value::Null,
        })),
        table,
    })
}

fn windows(a: &StateArgs) -> Result<Vec<WindowState>> {
    let mut out = Vec::new();
    for &(k, n) in &a.window {
        out.push(match a.mode {
            WindowMode::Translation => WindowState::translation(k, n)?,
            WindowMode::Dyadic => WindowState::dyadic(k, a.m, n)?,
        });
    }
    for &(r, s) in &a.window_square {
        out.push(WindowState::square(r, s)?);
    }
    Ok(out)
}

fn set_descriptor(set: &StructuredSet) -> String {
    match set {
        StructuredSet::Squares => "squares".into(),
        StructuredSet::DyadicBlocks => "dyadicblocks".into(),
        StructuredSet::Intervals { intervals } => format!("intervals[{}]", intervals.len()),
    }
}

fn state(a: &StateArgs) -> Result<Report> {
    let ws = windows(a)?;
    let rows = states::ergodicity_probe(&a.set, &ws)?;
    let mut table = Table::new(vec!["mode", "k", "m", "n", "mean", "hits", "oscillation", "invariance_defect", "closed_form"]);
    let mut sweeps = Vec::new();
    for row in &rows {
        let w = row.window;
        table.push(vec![
            to_value(&w.mode).as_str().unwrap_or_default().to_string(),
            w.k.to_string(),
            w.m.to_string(),
            w.n.to_string(),
            num_text(row.estimate.mean),
            row.estimate.hits.map(|h| h.to_string()).unwrap_or_default(),
            num_text(row.estimate.oscillation),
            num_text(row.invariance_defect),
            row.closed_form.map(num_text).unwrap_or_default(),
        ]);
        if a.sweep {
            sweeps.push(states::doubling_sweep(&a.set, &w, a.tol, a.max_steps)?);
        }
    }
    let max_osc = rows.iter().map(|r| r.estimate.oscillation).fold(0.0, f64::max);
    let mut results = json!({ "rows": to_value(&rows) });
    if a.sweep {
        results["sweeps"] = to_value(&sweeps);
    }
    Ok(Report {
        command: "state".into(),
        params: json!({
            "set": set_descriptor(&a.set),
            "mode": to_value(&a.mode),
            "m": a.m,
            "windows": a.window,
            "window_squares": a.window_square,
            "sweep": a.sweep,
            "tol": a.tol,
        }),
        results,
        diagnostics: diag(json!({
            "cutoff": rows.iter().map(|r| r.window.n).collect::<Vec<_>>(),
            "oscillation": num(max_osc),
        })),
        table,
    })
}

fn example4_row(rep: &Example4Report) -> Vec<String> {
    vec![
        rep.q.to_string(),
        rep.s.to_string(),
        rep.r.map(|r| r.to_string()).unwrap_or_default(),
        rep.p.to_string(),
        num_text(rep.estimate),
        num_text(rep.reference),
        num_text(rep.error),
    ]
}

const EXAMPLE4_COLUMNS: [&str; 7] = ["q", "s", "r", "p", "estimate", "reference", "error"];

fn strip_timing(mut rep: Example4Report, timing: bool) -> Example4Report {
    if !timing {
        rep.runtime_ms = None;
    }
    rep
}

fn example4_cmd(a: &Example4Args, timing: bool) -> Result<Report> {
    let params = AqParams::new(a.q)?;
    let reports: Vec<Example4Report> = if let Some(p) = a.p {
        vec![example4::reproduce_p(params, p, a.method)?]
    } else {
        let r = a.r.expect("clap requires r without p");
        let mut ss = a.sweep.clone();
        if let Some(s) = a.s {
            ss.push(s);
        }
        ss.sort_unstable();
        ss.dedup();
        ss.par_iter()
            .map(|&s| example4::reproduce(params, s, r, a.method))
            .collect::<Result<Vec<_>>>()?
    };
    let reports: Vec<_> = reports.into_iter().map(|r| strip_timing(r, timing)).collect();
    let mut table = Table::new(EXAMPLE4_COLUMNS.to_vec());
    reports.iter().for_each(|r| table.push(example4_row(r)));
    let results = if reports.len() == 1 { to_value(&reports[0]) } else { json!({ "sweep": to_value(&reports) }) };
    Ok(Report {
        command: "example4".into(),
        params: json!({ "q": a.q, "s": a.s, "r": a.r, "p": a.p, "method": to_value(&a.method), "sweep": a.sweep }),
        results,
        diagnostics: diag(json!({
            "cutoff": reports.iter().map(|r| r.p).collect::<Vec<_>>(),
            "t": reports.iter().map(|r| num(r.t)).collect::<Vec<_>>(),
            "oscillation": Value::Null,
        })),
        table,
    })
}

fn sweep(cmd: &SweepCommand, timing: bool) -> Result<Report> {
    match cmd {
        SweepCommand::Analyze { seq, horizon, eps } => sweep_analyze(seq, horizon, *eps),
        SweepCommand::Dixmier { seq, reference, omega } => sweep_dixmier(seq, reference, omega),
        SweepCommand::Example4 { q, s, r, method } => sweep_example4(q, s, r, *method, timing),
    }
}

fn grid<A: Clone + Send + Sync, B: Clone + Send + Sync>(a: &[A], b: &[B]) -> Vec<(usize, A, B)> {
    let mut out = Vec::new();
    for (i, x) in a.iter().enumerate() {
        for y in b {
            out.push((i, x.clone(), y.clone()));
        }
    }
    out
}

fn sweep_analyze(seqs: &[SpectralSequence], horizons: &[u64], eps: f64) -> Result<Report> {
    let mut hs = horizons.to_vec();
    hs.sort_unstable();
    hs.dedup();
    let points = grid(seqs, &hs);
    let mut rows = points
        .par_iter()
        .map(|(i, s, h)| eccentric::analyze_eccentricity(s, *h, eps).map(|r| (*i, s.descriptor(), r)))
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| (&a.1, a.2.horizon, a.0).cmp(&(&b.1, b.2.horizon, b.0)));
    let mut table = Table::new(vec!["seq", "horizon", "verdict", "best_deviation", "best_n", "witnesses"]);
    let mut results = Vec::new();
    for (_, desc, r) in &rows {
        table.push(vec![
            desc.clone(),
            r.horizon.to_string(),
            to_value(&r.verdict).as_str().unwrap_or_default().to_string(),
            num_text(r.best_deviation),
            r.best_n.to_string(),
            r.witnesses.len().to_string(),
        ]);
        results.push(json!({ "seq": desc, "report": to_value(r) }));
    }
    Ok(Report {
        command: "sweep analyze".into(),
        params: json!({
            "seq": seqs.iter().map(|s| s.descriptor()).collect::<Vec<_>>(),
            "horizon": hs,
            "eps": eps,
        }),
        results: Value::Array(results),
        diagnostics: diag(json!({
            "points": rows.len(),
            "horizon": hs,
            "oscillation": rows.iter().map(|r| num(trajectory_oscillation(&r.2.trajectory))).collect::<Vec<_>>(),
        })),
        table,
    })
}

fn sweep_dixmier(seqs: &[SpectralSequence], t: &SpectralSequence, omegas: &[u32]) -> Result<Report> {
    let mut ws = omegas.to_vec();
    ws.sort_unstable();
    ws.dedup();
    if ws.contains(&0) {
        return Err(singtrace_core::Error::Domain("omega must be >= 1".into()));
    }
    let points = grid(seqs, &ws);
    let mut rows = points
        .par_iter()
        .map(|(i, s, w)| traces::dixmier_estimate(s, t, *w).map(|e| (*i, s.descriptor(), *w, e)))
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| (&a.1, a.2, a.0).cmp(&(&b.1, b.2, b.0)));
    let mut table = Table::new(vec!["seq", "omega", "value", "oscillation", "infinite"]);
    let mut results = Vec::new();
    for (_, desc, w, e) in &rows {
        table.push(vec![desc.clone(), w.to_string(), num_text(e.value), num_text(e.oscillation), e.infinite.to_string()]);
        results.push(json!({ "seq": desc, "omega": w, "estimate": to_value(e) }));
    }
    Ok(Report {
        command: "sweep dixmier".into(),
        params: json!({
            "seq": seqs.iter().map(|s| s.descriptor()).collect::<Vec<_>>(),
            "ref": t.descriptor(),
            "omega": ws,
        }),
        results: Value::Array(results),
        diagnostics: diag(json!({
            "cutoff": ws,
            "oscillation": num(rows.iter().map(|r| r.3.oscillation).fold(0.0, f64::max)),
        })),
        table,
    })
}

fn sweep_example4(qs: &[u32], ss: &[u32], rs: &[u32], method: Method, timing: bool) -> Result<Report> {
    let mut points = Vec::new();
    for &q in qs {
        for &s in ss {
            for &r in rs {
                points.push((q, s, r));
            }
        }
    }
    points.sort_unstable();
    points.dedup();
    let reports = points
        .par_iter()
        .map(|&(q, s, r)| example4::reproduce(AqParams::new(q)?, s, r, method).map(|rep| strip_timing(rep, timing)))
        .collect::<Result<Vec<_>>>()?;
    let mut table = Table::new(EXAMPLE4_COLUMNS.to_vec());
    reports.iter().for_each(|r| table.push(example4_row(r)));
    Ok(Report {
        command: "sweep example4".into(),
        params: json!({ "q": qs, "s": ss, "r": rs, "method": to_value(&method) }),
        results: to_value(&reports),
        diagnostics: diag(json!({
            "cutoff": reports.iter().map(|r| r.p).collect::<Vec<_>>(),
            "oscillation": Value::Null,
        })),
        table,
    })
}
