use std::fmt::Write as _;

use renewal_asym::corpus::{estimate_label, tauberian_label, Artifacts, CorpusEntry, CorpusRun};
use renewal_asym::discrete::{CertificateStatus, DiscreteRun};
use renewal_asym::laplace::TauberianReport;
use renewal_asym::model::{Status, ValidationReport};
use renewal_asym::pipeline::{ContinuousPipeline, DiscretePipeline, TransformCheck};
use renewal_asym::volterra::{ContinuousTrace, VolterraRun};
use renewal_asym::Error;
use serde_json::{json, Map, Value};

pub const SCHEMA: u32 = 1;

pub fn header(command: &str, name: &str, status: &str) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("schema".into(), json!(SCHEMA));
    m.insert("command".into(), json!(command));
    m.insert("name".into(), json!(name));
    m.insert("status".into(), json!(status));
    m
}

fn error_value(e: &Error) -> Value {
    json!({ "status": "error", "message": e.to_string() })
}

pub fn validation_status(rep: &ValidationReport) -> &'static str {
    if rep.any_fail() {
        "fail"
    } else if rep.all_pass() {
        "pass"
    } else {
        "unknown"
    }
}

pub fn validation(rep: &renewal_asym::Result<ValidationReport>) -> Value {
    match rep {
        Ok(r) => json!({ "status": validation_status(r), "checks": r.checks }),
        Err(e) => error_value(e),
    }
}

pub fn validation_failed(rep: &renewal_asym::Result<ValidationReport>) -> bool {
    rep.as_ref().is_ok_and(|r| r.checks.iter().any(|c| c.status == Status::Fail))
}

fn certificate_label(s: CertificateStatus) -> &'static str {
    match s {
        CertificateStatus::Saturating => "saturating",
        CertificateStatus::Inconclusive => "inconclusive",
    }
}

pub fn discrete_run(run: &DiscreteRun) -> Value {
    let c = &run.certificate;
    let estimate = match &run.estimate {
        Ok(e) => json!({
            "status": estimate_label(e.status),
            "c_hat": e.c_hat,
            "window": [e.window.0, e.window.1],
            "dispersion": e.dispersion,
            "c_aitken": e.c_aitken,
            "loglog_slope": e.loglog_slope,
        }),
        Err(e) => error_value(e),
    };
    json!({
        "constants": run.constants,
        "precision": run.trace.mode.to_string(),
        "escalated": run.escalated,
        "n_max": run.trace.n_max,
        "positivity_horizon": run.positivity_horizon,
        "residual_tail_max": run.residual_tail_max,
        "certificate": {
            "status": certificate_label(c.status),
            "product_upper": c.product_upper,
            "product_lower": c.product_lower,
            "n_threshold": c.n_threshold,
            "lower_start": c.lower_start,
            "lower_bound": c.lower_bound,
            "block_ratio": c.block_ratio,
        },
        "estimate": estimate,
    })
}

pub fn discrete_pipeline(pipe: &DiscretePipeline) -> Value {
    let mut v = discrete_run(&pipe.run);
    v["validation"] = validation(&pipe.validation);
    v
}

pub fn discrete_csv(run: &DiscreteRun) -> String {
    let mut out = String::from("n,x_tilde,y,residual,s_upper\n");
    let tr = &run.trace;
    for i in 0..tr.x_tilde.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            i + 1,
            tr.x_tilde[i],
            tr.y[i],
            run.residual.get(i).copied().unwrap_or(f64::NAN),
            run.certificate.s_upper.get(i).copied().unwrap_or(f64::NAN),
        );
    }
    out
}

pub fn volterra_run(run: &VolterraRun) -> Value {
    let fit = match &run.fit {
        Ok(f) => json!({ "status": "ok", "gamma_hat": f.gamma_hat, "c_hat": f.c_hat, "r_squared": f.r_squared, "nodes": f.nodes }),
        Err(e) => error_value(e),
    };
    json!({
        "grid": run.trace.grid,
        "gamma": run.trace.gamma,
        "monotone": run.monotone,
        "fit": fit,
        "band": {
            "inf_h": run.band.inf_h,
            "sup_h": run.band.sup_h,
            "sup_all": run.band.sup_all,
            "ratio": run.band.ratio(),
        },
    })
}

pub fn volterra_csv(tr: &ContinuousTrace) -> String {
    let mut out = String::from("t,g,H\n");
    for (i, (g, h)) in tr.g.iter().zip(&tr.big_h).enumerate() {
        let _ = writeln!(out, "{},{},{}", tr.grid.node(i), g, h);
    }
    out
}

pub fn laplace_rows(rows: &[TransformCheck]) -> Value {
    json!(rows)
}

pub fn laplace_csv(rows: &[TransformCheck]) -> String {
    let mut out = String::from("s,A,B,R,L,Rstar,G\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{},{},{}", r.s, r.a, r.b, r.r, r.l, r.rstar, r.g.value);
    }
    out
}

pub fn tauberian(rep: &TauberianReport) -> Value {
    json!({
        "k": rep.k,
        "gamma": rep.gamma,
        "rho": rep.rho,
        "s_ladder": rep.s_ladder,
        "K_ladder": rep.k_ladder,
        "x_ladder": rep.x_ladder,
        "U_ratio_ladder": rep.u_ratio_ladder,
        "K_limit": rep.k_limit,
        "A_limit": rep.a_limit,
        "karamata_gap": rep.karamata_gap,
        "slow_osc_pass": rep.slow_osc_pass,
        "verdict": tauberian_label(rep.verdict),
    })
}

pub fn tauberian_csv(rep: &TauberianReport) -> String {
    let mut out = String::from("s,K,x,U_ratio\n");
    for i in 0..rep.s_ladder.len() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            rep.s_ladder[i], rep.k_ladder[i], rep.x_ladder[i], rep.u_ratio_ladder[i]
        );
    }
    out
}

pub fn continuous_pipeline(pipe: &ContinuousPipeline) -> Value {
    let mut v = volterra_run(&pipe.run);
    v["validation"] = validation(&pipe.validation);
    v["constants"] = json!(pipe.constants);
    v["laplace"] = match &pipe.transforms {
        Ok(rows) => laplace_rows(rows),
        Err(e) => error_value(e),
    };
    v["small_s_l"] = match &pipe.small_s_l {
        Ok(x) => json!(x),
        Err(e) => error_value(e),
    };
    v["tauberian"] = match &pipe.tauberian {
        Some(Ok(rep)) => tauberian(rep),
        Some(Err(e)) => error_value(e),
        None => Value::Null,
    };
    v
}

pub fn corpus_entry(entry: &CorpusEntry) -> Value {
    json!({
        "name": entry.name,
        "description": entry.description,
        "expected": entry.expected,
    })
}

pub fn corpus_run(run: &CorpusRun) -> (Value, String) {
    let (details, csv) = match &run.artifacts {
        Artifacts::Discrete(p) => (discrete_pipeline(p), discrete_csv(&p.run)),
        Artifacts::Continuous(p) => (continuous_pipeline(p), volterra_csv(&p.run.trace)),
        Artifacts::Sequence { y, residual, bound } => {
            let mut csv = String::from("n,y,residual,bound\n");
            for i in 0..y.len() {
                let _ = writeln!(csv, "{},{},{},{}", i + 1, y[i], residual[i], bound[i]);
            }
            (Value::Null, csv)
        }
    };
    let v = json!({
        "facts": run.facts,
        "observations": run.observations,
        "details": details,
    });
    (v, csv)
}
