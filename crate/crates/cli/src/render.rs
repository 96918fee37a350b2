//! Human-readable rendering of command envelopes.
//!
//! Numbers print with Rust's shortest round-trip formatting, the same
//! digits the JSON mode emits. Only the bound table rounds (to three
//! decimals) unless `--raw` is set.

use std::fmt::Write;

use serde_json::Value;

use crate::Envelope;

fn num(v: &Value) -> String {
    match v {
        Value::Number(n) => n.to_string(),
        Value::Null => "n/a".into(),
        other => other.to_string(),
    }
}

fn rows(out: &mut String, title: &str, v: &Value, keys: &[&str]) {
    let _ = writeln!(out, "{title}");
    for k in keys {
        let _ = writeln!(out, "  {:<10} {}", k, num(&v[*k]));
    }
}

fn inputs_line(env: &Envelope) -> String {
    let Value::Object(map) = &env.inputs else {
        return String::new();
    };
    map.iter()
        .filter(|(_, v)| !v.is_object())
        .map(|(k, v)| format!("{k}={}", num(v).trim_matches('"')))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn human(env: &Envelope) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "corbin {} {} ({})", env.command, env.version, inputs_line(env));
    let r = &env.results;
    match env.command {
        "solve" => {
            let _ = writeln!(out, "max correlation  {}", num(&r["max_correlation"]));
            rows(&mut out, "cells", &r["cells"], &["p1", "p2", "p3", "p4"]);
            rows(
                &mut out,
                "moments",
                &r["moments"],
                &["mean1", "mean2", "var1", "var2", "cov", "rho"],
            );
            rows(
                &mut out,
                "regression E(Y1|Y2=y) = intercept + slope*y",
                &r["regression"],
                &["alpha", "beta", "intercept", "slope"],
            );
            rows(
                &mut out,
                "conditional variance Var(Y1|Y2=y) = gamma + delta*y",
                &r["conditional_variance"],
                &["gamma", "delta"],
            );
        }
        "table" => render_table(&mut out, env),
        "sample" => {
            let _ = writeln!(out, "count          {}", num(&r["count"]));
            let _ = writeln!(out, "empirical rho  {}", num(&r["empirical_rho"]));
        }
        "verify" => render_verify(&mut out, r),
        _ => {
            let _ = writeln!(out, "{r:#}");
        }
    }
    out
}

fn render_table(out: &mut String, env: &Envelope) {
    let raw = env.inputs["raw"].as_bool().unwrap_or(false);
    let r = &env.results;
    let grid: Vec<String> = r["grid"]
        .as_array()
        .map(|g| g.iter().map(num).collect())
        .unwrap_or_default();
    let body = if raw { &r["raw"] } else { &r["rounded"] };
    let width = if raw { 20 } else { 6 };
    let _ = write!(out, "{:>6}", "pi1\\pi2");
    for g in &grid {
        let _ = write!(out, " {g:>width$}");
    }
    let _ = writeln!(out);
    for (i, row) in body.as_array().into_iter().flatten().enumerate() {
        let _ = write!(out, "{:>7}", grid[i]);
        for v in row.as_array().into_iter().flatten() {
            let cell = if raw {
                num(v)
            } else {
                format!("{:.3}", v.as_f64().unwrap_or(f64::NAN))
            };
            let _ = write!(out, " {cell:>width$}");
        }
        let _ = writeln!(out);
    }
}

fn render_verify(out: &mut String, r: &Value) {
    let _ = writeln!(out, "sample size  {}", num(&r["sample_size"]));
    let _ = writeln!(
        out,
        "{:<6} {:>22} {:>22} {:>22}",
        "stat", "theoretical", "empirical", "z"
    );
    for k in ["mean1", "mean2", "var1", "var2", "cov", "rho"] {
        let _ = writeln!(
            out,
            "{:<6} {:>22} {:>22} {:>22}",
            k,
            num(&r["theoretical"][k]),
            num(&r["empirical"][k]),
            num(&r["moment_z_scores"][k]),
        );
    }
    for (title, key) in [
        ("regression bins", "regression_bins"),
        ("conditional variance bins", "variance_bins"),
    ] {
        let bins = r[key]["bins"].as_array().cloned().unwrap_or_default();
        let ok = bins
            .iter()
            .filter(|b| b["z"].as_f64().is_some_and(|z| z.abs() < r[key]["bin_z"].as_f64().unwrap_or(0.0)))
            .count();
        let _ = writeln!(out, "{title}: {ok}/{} within |z| < {}", bins.len(), num(&r[key]["bin_z"]));
        for b in &bins {
            let _ = writeln!(
                out,
                "  y2={:<4} count={:<8} empirical={} predicted={} z={}",
                num(&b["y2"]),
                num(&b["count"]),
                num(&b["empirical"]),
                num(&b["predicted"]),
                num(&b["z"]),
            );
        }
    }
    match &r["gof"] {
        Value::Null => {
            let _ = writeln!(out, "goodness of fit: skipped (n above enumeration cap)");
        }
        g => {
            let _ = writeln!(
                out,
                "goodness of fit: chi2={} df={} p={}",
                num(&g["statistic"]),
                num(&g["df"]),
                num(&g["p_value"])
            );
        }
    }
    let t = &r["thresholds"];
    let _ = writeln!(
        out,
        "thresholds: max_moment_z={} bin_z={} min_bin_pass_rate={} gof_p_floor={} min_bin_count={}",
        num(&t["max_moment_z"]),
        num(&t["bin_z"]),
        num(&t["min_bin_pass_rate"]),
        num(&t["gof_p_floor"]),
        num(&t["min_bin_count"]),
    );
    let verdict = if r["passed"].as_bool() == Some(true) { "PASSED" } else { "FAILED" };
    let _ = writeln!(out, "verdict: {verdict}");
}
