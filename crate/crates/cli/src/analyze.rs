use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use windobs::models::{build_dynamics, build_sensors, Control, DynamicsModel, Param, SensorSet};
use windobs::observability::{build_algebra, operating_point, path_label, rank_at, ObservabilityError, Query, RankReport};

use crate::scenario::{Probe, ProbeExpect, Scenario};
use crate::{Check, CommandError};

#[derive(Clone, Debug, Serialize)]
pub struct ProbeResult {
    pub name: String,
    /// `None` when a sensor is undefined at the probe.
    pub report: Option<RankReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub singular: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AnalysisReport {
    pub scenario: String,
    pub active: Vec<Control>,
    pub terms: Vec<String>,
    pub base: RankReport,
    pub probes: Vec<ProbeResult>,
    pub checks: Vec<Check>,
}

/// Query texts from the scenario plus every label the expectations mention.
fn query_texts(sc: &Scenario, model: &DynamicsModel) -> Vec<String> {
    let mut out: Vec<String> = sc.queries.exprs.clone();
    if sc.queries.each_var {
        out.extend(model.vars().iter().map(|s| s.name().to_string()));
    }
    let e = &sc.expect;
    let mentioned = e
        .augmented
        .keys()
        .chain(&e.observable)
        .chain(&e.unobservable)
        .chain(e.probes.values().flat_map(|p| p.observable.iter().chain(&p.unobservable)));
    for q in mentioned {
        out.push(q.clone());
    }
    let mut seen = std::collections::HashSet::new();
    out.retain(|q| seen.insert(q.clone()));
    out
}

fn overrides(map: &indexmap::IndexMap<String, f64>) -> Vec<(String, f64)> {
    map.iter().map(|(k, v)| (k.clone(), *v)).collect()
}

fn run_probe(
    sc: &Scenario,
    model: &DynamicsModel,
    sensors: &SensorSet,
    queries: &[Query],
    probe: &Probe,
) -> Result<ProbeResult, CommandError> {
    let active = probe.active.clone().unwrap_or_else(|| sc.controls.active.clone());
    let algebra = build_algebra(model, sensors, &sc.algebra.spec(&active))?;
    let mut set = overrides(&sc.points.base);
    set.extend(overrides(&probe.set));
    let point = operating_point(model, &active, &set)?;
    match rank_at(&algebra, &point, queries, &sc.points.tolerance) {
        Ok(r) => Ok(ProbeResult { name: probe.name.clone(), report: Some(r), singular: None }),
        Err(ObservabilityError::SingularEvaluation(m)) => {
            Ok(ProbeResult { name: probe.name.clone(), report: None, singular: Some(m) })
        }
        Err(e) => Err(e.into()),
    }
}

fn verdict(report: &RankReport, label: &str) -> Option<bool> {
    report.query(label).map(|q| q.observable)
}

fn word(observable: Option<bool>) -> &'static str {
    match observable {
        Some(true) => "observable",
        Some(false) => "unobservable",
        None => "undefined",
    }
}

fn probe_checks(name: &str, exp: &ProbeExpect, res: &ProbeResult, checks: &mut Vec<Check>) {
    if let Some(s) = exp.singular {
        checks.push(Check::eq(format!("{name}: sensors undefined"), s, res.report.is_none()));
    }
    if let Some(r) = exp.rank {
        let actual = res.report.as_ref().map_or("undefined".to_string(), |x| x.rank.to_string());
        checks.push(Check::new(format!("{name}: rank"), r, &actual, actual == r.to_string()));
    }
    for q in &exp.observable {
        let v = res.report.as_ref().and_then(|r| verdict(r, q));
        checks.push(Check::new(format!("{name}: {q}"), "observable", word(v), v == Some(true)));
    }
    for q in &exp.unobservable {
        let v = res.report.as_ref().and_then(|r| verdict(r, q));
        // An undefined sensor counts as unobservable at that point.
        checks.push(Check::new(format!("{name}: {q}"), "unobservable", word(v), v != Some(true)));
    }
}

/// Rank tests at the base point and every probe, compared against the
/// scenario's expectations.
pub fn analyze(sc: &Scenario) -> Result<AnalysisReport, CommandError> {
    let model = build_dynamics(&sc.model)?;
    let sensors = build_sensors(&sc.sensors, &model)?;
    let queries: Vec<Query> =
        query_texts(sc, &model).iter().map(|q| Query::parse(q, &model)).collect::<Result<_, _>>()?;
    let active = sc.controls.active.clone();
    let algebra = build_algebra(&model, &sensors, &sc.algebra.spec(&active))?;
    let point = operating_point(&model, &active, &overrides(&sc.points.base))?;
    let base = rank_at(&algebra, &point, &queries, &sc.points.tolerance)?;

    let probes: Vec<ProbeResult> = sc
        .points
        .probes
        .par_iter()
        .map(|p| run_probe(sc, &model, &sensors, &queries, p))
        .collect::<Result<_, _>>()?;

    let e = &sc.expect;
    let mut checks = Vec::new();
    if let Some(r) = e.rank {
        checks.push(Check::eq("rank", r, base.rank));
    }
    if let Some(d) = e.dim {
        checks.push(Check::eq("dim", d, base.dim));
    }
    if e.rank.is_some() {
        checks.push(Check::new("singular-value gap", ">= 1e6", format!("{:.1e}", base.gap), base.conclusive));
    }
    for (q, r) in &e.augmented {
        let actual = base.query(q).map(|v| v.augmented_rank);
        checks.push(Check::new(
            format!("rank with {q}"),
            r,
            actual.map_or("-".into(), |a| a.to_string()),
            actual == Some(*r),
        ));
    }
    for q in &e.observable {
        let v = verdict(&base, q);
        checks.push(Check::new(q.clone(), "observable", word(v), v == Some(true)));
    }
    for q in &e.unobservable {
        let v = verdict(&base, q);
        checks.push(Check::new(q.clone(), "unobservable", word(v), v == Some(false)));
    }
    for (name, exp) in &e.probes {
        match probes.iter().find(|p| &p.name == name) {
            Some(res) => probe_checks(name, exp, res, &mut checks),
            None => checks.push(Check::new(format!("{name}: probe"), "declared", "missing", false)),
        }
    }
    Ok(AnalysisReport {
        scenario: sc.name.clone(),
        active,
        terms: {
            let mut t: Vec<String> = algebra.entries.iter().map(|e| path_label(&e.path)).collect();
            t.dedup();
            t
        },
        base,
        probes,
        checks,
    })
}

/// A plain-text summary laid out like the observability tables: dynamics,
/// parameters, sensors, actuation, state requirements, then verdicts.
pub fn render(sc: &Scenario, report: &AnalysisReport) -> String {
    let m = &sc.model;
    let mut dynamics = vec!["2D"];
    dynamics.push(if m.drag { "drag" } else { "no drag" });
    dynamics.push(if m.dynamic_wind { "dynamic wind" } else { "constant wind" });
    if m.absorb_mass {
        dynamics.push("m, I absorbed");
    }
    let unknown: Vec<&str> = m.unknown.iter().map(|p| p.name()).collect();
    let known: Vec<String> = Param::all()
        .filter(|p| p.is_body() && p.is_absorbed() == m.absorb_mass && !m.is_unknown(*p))
        .map(|p| format!("{} = {}", p.name(), m.value(p)))
        .collect();
    let mut sensors = sc.sensors.kind.to_string();
    if sc.sensors.phi_dot {
        sensors.push_str(", turn rate instead of heading");
    }
    if sc.sensors.augmented_phi_dot {
        sensors.push_str(", extra turn-rate channel");
    }
    let active: Vec<&str> = report.active.iter().map(|c| c.name()).collect();
    let lost: Vec<&str> = report
        .probes
        .iter()
        .filter(|p| p.report.as_ref().and_then(|r| verdict(r, "zeta")) != Some(true))
        .map(|p| p.name.as_str())
        .collect();

    let b = &report.base;
    let mut s = String::new();
    let _ = writeln!(s, "{}", report.scenario);
    if !sc.description.is_empty() {
        let _ = writeln!(s, "  {}", sc.description);
    }
    let row = |s: &mut String, k: &str, v: &str| {
        let _ = writeln!(s, "  {k:<22}{v}");
    };
    row(&mut s, "Dynamics", &dynamics.join(", "));
    row(&mut s, "Known parameters", &if known.is_empty() { "-".into() } else { known.join(", ") });
    row(&mut s, "Unknown parameters", &if unknown.is_empty() { "-".into() } else { unknown.join(", ") });
    row(&mut s, "Sensors", &sensors);
    row(&mut s, "Actuation", &if active.is_empty() { "none".into() } else { active.join(", ") });
    row(&mut s, "Algebra", &report.terms.join(", "));
    row(
        &mut s,
        "Rank",
        &format!("{} of {} (gap {:.1e}{})", b.rank, b.dim, b.gap, if b.conclusive { "" } else { ", inconclusive" }),
    );
    for q in &b.queries {
        row(&mut s, &format!("  {}", q.label), &format!("{} (augmented rank {})", word(Some(q.observable)), q.augmented_rank));
    }
    if !report.probes.is_empty() {
        row(&mut s, "zeta lost at", &if lost.is_empty() { "-".into() } else { lost.join(", ") });
    }
    for p in &report.probes {
        let v = match &p.report {
            Some(r) => format!("rank {} of {}, zeta {}", r.rank, r.dim, word(verdict(r, "zeta"))),
            None => "sensors undefined".into(),
        };
        let _ = writeln!(s, "    probe {}: {v}", p.name);
    }
    if !report.checks.is_empty() {
        let _ = writeln!(s, "Checks");
        s.push_str(&crate::render_checks(&report.checks));
    }
    s
}
