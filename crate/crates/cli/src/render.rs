//! Human-readable and CSV views of command results.

use std::fmt::Write;

use prefxfer_core::eval::{Condition, EvaluationSummary};
use prefxfer_core::features::FEATURE_NAMES;
use prefxfer_core::formats::{ReportRecord, WeightsRecord};
use prefxfer_core::{ActionId, PredictionReport, TaskSpec, WeightVector};

pub fn weights_text(rec: &WeightsRecord) -> String {
    let mut out = format!(
        "weights for {} (learned on {})\n",
        rec.user_id, rec.source_task
    );
    for (name, w) in FEATURE_NAMES.iter().zip(rec.weights.iter()) {
        writeln!(out, "  {name:<15} {w:>+9.4}").unwrap();
    }
    if let Some(d) = &rec.diagnostics {
        writeln!(
            out,
            "{} after {} iterations, gradient norm {:.2e}",
            if d.converged {
                "converged"
            } else {
                "NOT converged"
            },
            d.iterations,
            d.gradient_norm
        )
        .unwrap();
    }
    out
}

pub fn weights_csv(w: &WeightVector) -> String {
    let mut out = String::from("feature,weight\n");
    for (name, v) in FEATURE_NAMES.iter().zip(w.iter()) {
        writeln!(out, "{name},{v}").unwrap();
    }
    out
}

pub fn plan_text(spec: &TaskSpec, plan: &[ActionId]) -> String {
    let mut out = format!("planned sequence for {}\n", spec.task_id());
    for (t, &a) in plan.iter().enumerate() {
        let label = spec.action(a).map(|x| x.label.as_str()).unwrap_or("?");
        writeln!(out, "  {t:>3}  {a:>3}  {label}").unwrap();
    }
    out
}

pub fn plan_csv(plan: &[ActionId]) -> String {
    let mut out = String::from("step,action\n");
    for (t, a) in plan.iter().enumerate() {
        writeln!(out, "{t},{a}").unwrap();
    }
    out
}

pub fn report_text(rec: &ReportRecord) -> String {
    let r = &rec.report;
    let mut out = format!("predictions for {} on {}\n", rec.user_id, r.task_id);
    out.push_str("  step  predicted  actual  hit\n");
    for s in &r.steps {
        let tie = if s.tied > 1 {
            format!("  ({}-way tie)", s.tied)
        } else {
            String::new()
        };
        writeln!(
            out,
            "  {:>4}  {:>9}  {:>6}  {}{tie}",
            s.step,
            s.predicted,
            s.actual,
            if s.hit { "yes" } else { "no" }
        )
        .unwrap();
    }
    writeln!(
        out,
        "accuracy {}/{} = {:.3}",
        r.hits,
        r.steps.len(),
        r.accuracy
    )
    .unwrap();
    out
}

pub fn report_csv(r: &PredictionReport) -> String {
    let mut out = String::from("step,predicted,actual,hit,tied\n");
    for s in &r.steps {
        writeln!(
            out,
            "{},{},{},{},{}",
            s.step, s.predicted, s.actual, s.hit, s.tied
        )
        .unwrap();
    }
    out
}

pub fn summary_text(s: &EvaluationSummary) -> String {
    let converged = s.users.iter().filter(|u| u.diagnostics.converged).count();
    let mut out = format!(
        "{} users, {} steps; learning converged for {converged}\n\n",
        s.n_users, s.horizon
    );
    out.push_str("condition         accuracy   (se)\n");
    for c in &s.conditions {
        writeln!(
            out,
            "{:<16}  {:.4}    ({:.4})",
            c.condition.name(),
            c.overall_mean,
            c.overall_se
        )
        .unwrap();
    }
    out.push('\n');
    for t in &s.t_tests {
        let head = format!("{} vs {}", t.left.name(), t.right.name());
        match (&t.result, &t.note) {
            (Some(r), _) => {
                writeln!(out, "{head}: t({}) = {:.3}, p = {:.3e}", r.dof, r.t, r.p).unwrap()
            }
            (None, note) => {
                writeln!(out, "{head}: {}", note.as_deref().unwrap_or("not computed")).unwrap()
            }
        }
    }
    out.push_str("\nstep");
    for c in Condition::ALL {
        write!(out, "  {:>14}", c.name()).unwrap();
    }
    out.push('\n');
    for t in 0..s.horizon {
        write!(out, "{t:>4}").unwrap();
        for c in Condition::ALL {
            write!(out, "  {:>14.3}", s.curve(c).per_step_mean[t]).unwrap();
        }
        out.push('\n');
    }
    out
}
