use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use num_rational::BigRational;
use serde_json::{json, Value as Json};

use stability_core::approx::{compute_ag, connective_upper_bound, Connective};
use stability_core::certify::{
    check_half_graph, hilbert_matrix, max_half_graph, s_functional, CheckOptions, MarginMode, SearchMethod,
};
use stability_core::constructions::{
    build_shifted_witness, build_tree_witness, build_vc_witness, used_dimension, VcWitness, WitnessFamily,
};
use stability_core::linalg::{operator_norm, Mode};
use stability_core::predicates::{stability_bounds, Predicate};
use stability_core::scalar::{parse_rational, rational_to_f64, Value};
use stability_core::schema::{
    approx_report_json, halfgraph_report_json, parse_witness_str, rational_json, search_report_json, sfunctional_report_json,
    vc_report_json, vc_witness_to_json, witness_to_json, WitnessDocument,
};
use stability_core::vc::{
    averaging_upper_check, check_vc_graph, AveragingMethod, realizable_patterns, shattering_impossible, vc_dimension_formula,
    zaslavsky_cells,
};

use crate::manifest::RunManifest;
use crate::{ApproxCommand, Command, ConstructKind, Method, ModeArgs, Output, VcCommand};

/// Runs one command; `Ok(false)` means the checked property failed.
pub fn run(command: Command, manifest: &mut RunManifest) -> Result<bool> {
    match command {
        Command::Construct { kind } => construct(kind),
        Command::Certify {
            witness,
            predicate,
            epsilon,
            abs,
            sfunctional,
            tol,
            require_exact,
            out,
        } => {
            let opts = CheckOptions {
                mode: if abs { MarginMode::AbsoluteValue } else { MarginMode::Signed },
                tol,
                require_exact,
            };
            certify(manifest, &witness, &predicate, &epsilon, opts, sfunctional, &out)
        }
        Command::Search {
            witness,
            predicate,
            epsilon,
            method,
            min_k,
            tol,
            out,
        } => search(manifest, &witness, &predicate, &epsilon, method, min_k, tol, &out),
        Command::Scan { predicate, epsilon, out } => scan(&predicate, &epsilon, &out),
        Command::Vc { command } => vc(manifest, command),
        Command::HilbertNorm { n, tol, max_iters, out } => hilbert_norm(manifest, n, tol, max_iters, &out),
        Command::Approx { command } => approx(manifest, command),
    }
}

fn rational(s: &str) -> Result<BigRational> {
    parse_rational(s).with_context(|| format!("invalid number {s:?}"))
}

fn predicate(s: &str) -> Result<Predicate> {
    s.parse::<Predicate>().with_context(|| format!("invalid predicate {s:?}"))
}

fn mode(m: &ModeArgs) -> Mode {
    if m.float {
        Mode::Float
    } else {
        Mode::Exact
    }
}

/// Writes pretty JSON to the output path, or to stdout.
fn emit(out: &Output, doc: &Json) -> Result<()> {
    let text = serde_json::to_string_pretty(doc)? + "\n";
    match &out.output {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => Ok(std::io::stdout().write_all(text.as_bytes())?),
    }
}

/// Summary lines go to stdout when the document goes to a file.
fn summary(out: &Output, line: &str) {
    if out.output.is_some() {
        println!("{line}");
    } else {
        eprintln!("{line}");
    }
}

fn construct(kind: ConstructKind) -> Result<bool> {
    match kind {
        ConstructKind::Tree { m, mode: md, out } => {
            let w = build_tree_witness(m, mode(&md))?;
            write_family(&w, &out)
        }
        ConstructKind::Shifted { m, alpha, mode: md, out } => {
            let mut w = build_shifted_witness(m, mode(&md))?;
            if let Some(a) = alpha {
                w.set_alpha(a);
            }
            write_family(&w, &out)
        }
        ConstructKind::Vc { d, epsilon, out } => {
            let w = build_vc_witness(d, &rational(&epsilon)?)?;
            emit(&out, &vc_witness_to_json(&w))?;
            summary(
                &out,
                &format!(
                    "points={} realizers={} epsilon={} threshold={}",
                    w.points.len(),
                    w.realizers.len(),
                    w.epsilon,
                    w.threshold
                ),
            );
            Ok(true)
        }
    }
}

fn write_family(w: &WitnessFamily, out: &Output) -> Result<bool> {
    emit(out, &witness_to_json(w))?;
    summary(
        out,
        &format!(
            "n={} mode={} basis={} dimension_used={}",
            w.len(),
            w.mode().as_str(),
            w.basis().len(),
            used_dimension(w)
        ),
    );
    Ok(true)
}

fn load(manifest: &mut RunManifest, path: &Path) -> Result<WitnessDocument> {
    let text = manifest.read_input(path)?;
    parse_witness_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_family(manifest: &mut RunManifest, path: &Path) -> Result<WitnessFamily> {
    match load(manifest, path)? {
        WitnessDocument::Family(w) => Ok(w),
        WitnessDocument::Vc(_) => bail!("{} is a VC witness; use `vc check`", path.display()),
    }
}

fn load_vc(manifest: &mut RunManifest, path: &Path) -> Result<VcWitness> {
    match load(manifest, path)? {
        WitnessDocument::Vc(w) => Ok(w),
        WitnessDocument::Family(_) => bail!("{} is not a VC witness", path.display()),
    }
}

fn certify(
    manifest: &mut RunManifest,
    path: &Path,
    pred: &str,
    epsilon: &str,
    opts: CheckOptions,
    sfunctional: bool,
    out: &Output,
) -> Result<bool> {
    let w = load_family(manifest, path)?;
    let p = predicate(pred)?;
    let eps = Value::Exact(rational(epsilon)?);
    let report = check_half_graph(&w, &p, &eps, opts)?;
    let mut doc = halfgraph_report_json(&report);
    if sfunctional {
        let s = s_functional(&w)?;
        doc["sfunctional"] = sfunctional_report_json(&s, Some(&eps));
        doc["S"] = doc["sfunctional"]["S"].clone();
        doc["pi_n"] = json!(s.pi_n);
    }
    emit(out, &manifest.attach(doc))?;
    let margin = report.margin_min.as_ref().map_or("inf".to_string(), |m| m.to_string());
    summary(
        out,
        &format!("n={} margin_min={} half_graph={}", report.n, margin, report.is_half_graph),
    );
    Ok(report.is_half_graph)
}

#[allow(clippy::too_many_arguments)]
fn search(
    manifest: &mut RunManifest,
    path: &Path,
    pred: &str,
    epsilon: &str,
    method: Method,
    min_k: usize,
    tol: f64,
    out: &Output,
) -> Result<bool> {
    let w = load_family(manifest, path)?;
    let p = predicate(pred)?;
    let eps = Value::Exact(rational(epsilon)?);
    let method = match method {
        Method::Brute => SearchMethod::BruteForce,
        Method::Greedy => SearchMethod::Greedy,
    };
    let opts = CheckOptions {
        tol,
        ..CheckOptions::default()
    };
    let r = max_half_graph(w.pairs(), &p, &eps, method, opts)?;
    emit(out, &manifest.attach(search_report_json(&r, method)))?;
    summary(out, &format!("k={} ordering={:?}", r.k, r.ordering));
    Ok(r.k >= min_k)
}

fn scan(pred: &str, epsilons: &[String], out: &Output) -> Result<bool> {
    let p = predicate(pred)?;
    let sink: Box<dyn Write> = match &out.output {
        Some(path) => Box::new(std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?),
        None => Box::new(std::io::stdout()),
    };
    let mut csv = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(sink);
    csv.write_record(["epsilon", "k_lower_construction", "k_upper_bound", "ratio_log"])?;
    for e in epsilons {
        let eps = rational_to_f64(&rational(e)?);
        if !(eps > 0.0 && eps < 1.0) {
            bail!("epsilon {e} outside (0, 1)");
        }
        let b = stability_bounds(&p, eps)?;
        let ratio = b.ln_k_upper / b.ln_k_lower;
        csv.write_record([
            eps.to_string(),
            b.k_lower.to_string(),
            b.k_upper.to_string(),
            ratio.to_string(),
        ])?;
    }
    csv.flush()?;
    Ok(true)
}

fn vc(manifest: &mut RunManifest, command: VcCommand) -> Result<bool> {
    match command {
        VcCommand::Formula { dim, epsilon } => {
            println!("{}", vc_dimension_formula(dim, &rational(&epsilon)?)?);
            Ok(true)
        }
        VcCommand::Impossible { d, r } => {
            let impossible = shattering_impossible(d, r);
            println!("cells={} patterns=2^{d} impossible={impossible}", zaslavsky_cells(d, r));
            Ok(impossible)
        }
        VcCommand::Check { witness, tol, out } => {
            let w = load_vc(manifest, &witness)?;
            let r = check_vc_graph(&w.points, &w.realizers, &w.threshold, &w.epsilon, tol)?;
            emit(&out, &manifest.attach(vc_report_json(&r)))?;
            summary(
                &out,
                &format!("d={} realized={}/{} shattered={}", r.d, r.realized_patterns, r.total_patterns, r.shattered),
            );
            Ok(r.shattered)
        }
        VcCommand::Averaging {
            witness,
            epsilon,
            trials,
            seed,
            out,
        } => {
            let w = load_vc(manifest, &witness)?;
            let eps = match epsilon {
                Some(e) => rational(&e)?,
                None => w.epsilon.clone(),
            };
            let r = averaging_upper_check(&w.points, rational_to_f64(&eps), trials, seed);
            let method = match r.method {
                AveragingMethod::Exhaustive => json!("exhaustive"),
                AveragingMethod::MonteCarlo { trials, seed } => {
                    manifest.seed = Some(seed);
                    json!({"monte_carlo": {"trials": trials, "seed": seed}})
                }
            };
            let doc = json!({
                "schema": 1,
                "type": "vc_averaging",
                "d": r.d,
                "sum_norm_sq": r.sum_norm_sq,
                "mean_sq": r.mean_sq,
                "lower_bound": r.lower_bound,
                "method": method,
                "consistent": r.consistent(1e-9),
            });
            emit(&out, &manifest.attach(doc))?;
            summary(
                &out,
                &format!("mean_sq={} lower_bound={} sum_norm_sq={}", r.mean_sq, r.lower_bound, r.sum_norm_sq),
            );
            Ok(r.consistent(1e-9))
        }
        VcCommand::Count {
            witness,
            threshold,
            epsilon,
            tol,
            out,
        } => {
            let w = load_vc(manifest, &witness)?;
            let s = match threshold {
                Some(t) => rational(&t)?,
                None => w.threshold.clone(),
            };
            let eps = match epsilon {
                Some(e) => rational(&e)?,
                None => w.epsilon.clone(),
            };
            let count = realizable_patterns(&w.points, &s, &eps, tol)?;
            let total = 1u64 << w.points.len();
            let doc = json!({
                "schema": 1,
                "type": "vc_count",
                "d": w.points.len(),
                "threshold": rational_json(&s),
                "epsilon": rational_json(&eps),
                "realizable_patterns": count,
                "total_patterns": total,
                "shattered": count == total,
            });
            emit(&out, &manifest.attach(doc))?;
            summary(&out, &format!("realizable={count}/{total}"));
            Ok(count == total)
        }
    }
}

fn hilbert_norm(manifest: &mut RunManifest, n: usize, tol: f64, max_iters: usize, out: &Output) -> Result<bool> {
    let a = hilbert_matrix(n)?;
    let est = operator_norm(&a, tol, max_iters)?;
    let below = est.value <= PI + 1e-6;
    let doc = json!({
        "schema": 1,
        "type": "hilbert_norm",
        "n": n,
        "estimate": est.value,
        "residual": est.residual,
        "iterations": est.iterations,
        "converged": est.converged,
        "restarted": est.restarted,
        "pi": PI,
        "below_pi": below,
    });
    emit(out, &manifest.attach(doc))?;
    summary(
        out,
        &format!("n={n} estimate={} converged={} below_pi={below}", est.value, est.converged),
    );
    Ok(below && est.converged)
}

fn connective(manifest: &mut RunManifest, text: &str) -> Result<Connective> {
    if let Some(path) = text.strip_prefix("table:") {
        manifest.read_input(&PathBuf::from(path.trim()))?;
    }
    text.parse::<Connective>().with_context(|| format!("invalid connective {text:?}"))
}

fn grid_for(grid: usize, degree: usize) -> usize {
    if grid == 0 {
        (8 * degree + 1).max(201)
    } else {
        grid
    }
}

fn approx(manifest: &mut RunManifest, command: ApproxCommand) -> Result<bool> {
    match command {
        ApproxCommand::Ag {
            g,
            eta,
            degree,
            grid,
            out,
        } => {
            let c = connective(manifest, &g)?;
            let r = compute_ag(&c, eta, degree, grid_for(grid, degree))?;
            emit(&out, &manifest.attach(approx_report_json(&r, &c)))?;
            summary(
                &out,
                &format!("A={} sup_error_on_grid={} sup_error_bound={}", r.a_estimate, r.sup_error_on_grid, r.sup_error_bound),
            );
            Ok(r.sup_error_on_grid <= eta + 1e-9)
        }
        ApproxCommand::Bound {
            g,
            epsilon,
            degree,
            grid,
            out,
        } => {
            let c = connective(manifest, &g)?;
            let r = compute_ag(&c, epsilon / 4.0, degree, grid_for(grid, degree))?;
            let bound = connective_upper_bound(&r, epsilon)?;
            let mut doc = approx_report_json(&r, &c);
            doc["epsilon"] = json!(epsilon);
            doc["k_upper_bound"] = json!(bound);
            emit(&out, &manifest.attach(doc))?;
            summary(&out, &format!("A={} k_upper_bound={bound}", r.a_estimate));
            Ok(true)
        }
    }
}
