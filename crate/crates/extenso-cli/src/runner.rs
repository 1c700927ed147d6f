//! Check execution: kind dispatch into the core library, a bounded worker
//! pool, and report rendering. Output order always follows declaration
//! order, whatever the completion order.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;

use extenso_core::extensivity::{
    check_extensive_function, check_form_extensive, check_integrability, check_scaling_law,
    check_transversal, check_vanishing_contraction, defining_function_scale, recover_entropy,
    SampleSpec,
};
use extenso_core::models::{
    check_conservative_work, check_nonconservative_work, vdw_work_wedge_reference,
    work_wedge_report,
};
use extenso_core::{CheckReport, Error, KForm, Verdict, Witness};

use crate::config::{glob_match, CheckKind, CheckSpec, Loaded, SystemKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Records,
}

pub struct RunOptions {
    pub filter: Option<String>,
    pub seed: Option<u64>,
    pub jobs: usize,
    pub format: Format,
    pub tol_scale: f64,
}

/// Run every check whose name matches the filter; stream reports to `out`
/// in declaration order. Returns the process exit code: 0 if everything
/// selected passed, 1 otherwise.
pub fn run_checks(loaded: &Loaded, opts: &RunOptions, out: &mut dyn Write) -> std::io::Result<i32> {
    let mut selected: Vec<CheckSpec> = loaded
        .checks
        .iter()
        .filter(|c| {
            opts.filter
                .as_deref()
                .map(|pat| glob_match(pat, &c.name))
                .unwrap_or(true)
        })
        .cloned()
        .collect();
    if selected.is_empty() {
        eprintln!("warning: no checks selected");
        return Ok(0);
    }
    for (i, spec) in selected.iter_mut().enumerate() {
        spec.tol *= opts.tol_scale;
        spec.rel_tol *= opts.tol_scale;
        if let Some(base) = opts.seed {
            spec.seed = base.wrapping_add(i as u64);
        }
    }

    let jobs = opts.jobs.clamp(1, selected.len());
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, CheckReport)>();
    let mut reports: Vec<CheckReport> = Vec::with_capacity(selected.len());
    let mut io_result = Ok(());
    thread::scope(|scope| {
        for _ in 0..jobs {
            let tx = tx.clone();
            let next = &next;
            let selected = &selected;
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= selected.len() {
                    break;
                }
                let report = execute_check(loaded, &selected[i]);
                if tx.send((i, report)).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        let mut buffer: BTreeMap<usize, CheckReport> = BTreeMap::new();
        let mut next_print = 0usize;
        for (i, report) in rx {
            buffer.insert(i, report);
            while let Some(ready) = buffer.remove(&next_print) {
                let line = match opts.format {
                    Format::Text => format!("{ready}"),
                    Format::Records => ready.to_record(),
                };
                if let Err(e) = writeln!(out, "{line}") {
                    io_result = Err(e);
                    return;
                }
                reports.push(ready);
                next_print += 1;
            }
        }
    });
    io_result?;

    let passed = reports.iter().filter(|r| r.passed()).count();
    if opts.format == Format::Text {
        writeln!(out, "{}: {passed}/{} checks passed", loaded.name, reports.len())?;
    }
    Ok(if passed == selected.len() { 0 } else { 1 })
}

fn failure_report(spec: &CheckSpec, err: &Error) -> CheckReport {
    CheckReport {
        name: spec.name.clone(),
        samples: 0,
        skipped: 0,
        max_residual: f64::INFINITY,
        tol: spec.tol,
        verdict: Verdict::Fail,
        witnesses: Vec::new(),
        note: Some(format!("error: {err}")),
    }
}

fn resolve_form<'a>(loaded: &'a Loaded, name: &str) -> Result<&'a KForm, Error> {
    match name {
        "theta" => Ok(loaded.system.heat_form()),
        "epsilon" => Ok(loaded.system.work_form()),
        other => loaded
            .forms
            .get(other)
            .ok_or_else(|| Error::InvalidArgument(format!("undefined form '{other}'"))),
    }
}

fn sample_spec(loaded: &Loaded, spec: &CheckSpec) -> Result<SampleSpec, Error> {
    let sub = spec
        .sample_box
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("check needs a sample box".into()))?;
    loaded.system.sample_spec(sub, spec.count, spec.seed)
}

/// Execute one check; errors come back as failed reports, never panics.
pub fn execute_check(loaded: &Loaded, spec: &CheckSpec) -> CheckReport {
    let sys = &loaded.system;
    let outcome: Result<CheckReport, Error> = (|| match spec.kind {
        CheckKind::ExtensiveFunction => {
            let s = sample_spec(loaded, spec)?;
            let f = spec.expr.as_ref().unwrap_or_else(|| sys.entropy());
            check_extensive_function(f, sys.rho(), &s, spec.tol)
        }
        CheckKind::FormExtensive => {
            let s = sample_spec(loaded, spec)?;
            check_form_extensive(resolve_form(loaded, &spec.form)?, sys.rho(), &s, spec.tol)
        }
        CheckKind::Integrability => {
            let s = sample_spec(loaded, spec)?;
            check_integrability(resolve_form(loaded, &spec.form)?, &s, spec.tol)
        }
        CheckKind::Transversal => {
            let s = sample_spec(loaded, spec)?;
            check_transversal(resolve_form(loaded, &spec.form)?, sys.rho(), &s, spec.min_abs)
        }
        CheckKind::VanishingContraction => {
            let s = sample_spec(loaded, spec)?;
            check_vanishing_contraction(resolve_form(loaded, &spec.form)?, sys.rho(), &s, spec.tol)
        }
        CheckKind::ConservativeWork => {
            let s = sample_spec(loaded, spec)?;
            check_conservative_work(sys, &s, spec.tol)
        }
        CheckKind::NonconservativeWork => {
            let s = sample_spec(loaded, spec)?;
            check_nonconservative_work(sys, &s, spec.min_abs)
        }
        CheckKind::WorkWedge => {
            let s = sample_spec(loaded, spec)?;
            work_wedge_report(sys, &s)
        }
        CheckKind::WorkReference => {
            if loaded.kind != SystemKind::VanDerWaals {
                return Err(Error::InvalidArgument(
                    "work_reference applies to the van_der_waals preset only".into(),
                ));
            }
            let consts = sys.constants();
            let get = |k: &str| consts.get(k).copied().unwrap_or(f64::NAN);
            vdw_work_wedge_reference(
                get("a"),
                get("b"),
                get("c"),
                get("K2"),
                get("R"),
                spec.point.as_deref().unwrap(),
            )
        }
        CheckKind::EntropyRecovery => {
            let from = spec.from.as_deref().unwrap();
            let to = spec.to.as_deref().unwrap();
            let s_from = sys.entropy().value_at(from)?;
            let direct = sys.entropy().value_at(to)?;
            let recovered = recover_entropy(sys.heat_form(), sys.rho(), from, s_from, to, spec.tol)?;
            let rel = ((recovered - direct) / direct).abs();
            let pass = rel <= spec.rel_tol;
            Ok(CheckReport {
                name: spec.name.clone(),
                samples: 1,
                skipped: 0,
                max_residual: rel,
                tol: spec.rel_tol,
                verdict: if pass { Verdict::Pass } else { Verdict::Fail },
                witnesses: if pass {
                    Vec::new()
                } else {
                    vec![Witness {
                        point: to.to_vec(),
                        residual: rel,
                    }]
                },
                note: Some(format!(
                    "recovered {recovered:.12e}, direct {direct:.12e}"
                )),
            })
        }
        CheckKind::ScalingLaw => {
            let p = spec.point.as_deref().unwrap();
            let form = resolve_form(loaded, &spec.form)?;
            let mut worst = 0.0_f64;
            let mut samples = 0usize;
            for &t in &spec.times {
                let r = check_scaling_law(form, sys.rho(), p, t, spec.tol)?;
                worst = worst.max(r.max_residual);
                samples += r.samples;
            }
            let pass = worst <= spec.tol;
            Ok(CheckReport {
                name: spec.name.clone(),
                samples,
                skipped: 0,
                max_residual: worst,
                tol: spec.tol,
                verdict: if pass { Verdict::Pass } else { Verdict::Fail },
                witnesses: if pass {
                    Vec::new()
                } else {
                    vec![Witness {
                        point: p.to_vec(),
                        residual: worst,
                    }]
                },
                note: Some(format!("times {:?}", spec.times)),
            })
        }
        CheckKind::ConformalFactor => {
            let s = sample_spec(loaded, spec)?;
            let g = spec.expr.as_ref().unwrap();
            match defining_function_scale(sys.entropy(), g, &s, spec.tol) {
                Ok(k) => Ok(CheckReport {
                    name: spec.name.clone(),
                    samples: spec.count,
                    skipped: 0,
                    max_residual: 0.0,
                    tol: spec.tol,
                    verdict: Verdict::Pass,
                    witnesses: Vec::new(),
                    note: Some(format!("expr = k·S with k = {k:.12e}")),
                }),
                Err(Error::NonConstantRatio { mean, spread }) => Ok(CheckReport {
                    name: spec.name.clone(),
                    samples: spec.count,
                    skipped: 0,
                    max_residual: spread,
                    tol: spec.tol,
                    verdict: Verdict::Fail,
                    witnesses: Vec::new(),
                    note: Some(format!(
                        "ratio expr/S is not constant: mean {mean:.6e}, spread {spread:.6e}"
                    )),
                }),
                Err(e) => Err(e),
            }
        }
    })();
    let mut report = outcome.unwrap_or_else(|e| failure_report(spec, &e));
    report.name = spec.name.clone();
    report
}
