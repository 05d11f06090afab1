//! Runs bundled scenarios against their golden expectations and writes a
//! PASS/FAIL report.

use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;

use windobs::estimator::Metrics;

use crate::scenario::{bundled, resolve, Scenario};
use crate::{analyze, run, Check, CommandError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Analyze,
    Simulate,
    Filter,
}

impl Command {
    /// The command whose output the scenario's expectations describe.
    pub fn for_scenario(sc: &Scenario) -> Command {
        let e = &sc.expect;
        if e.final_zeta_error_max.is_some() || e.final_zeta_error_min.is_some() || e.converging.is_some() {
            Command::Filter
        } else if e.label.is_some() {
            Command::Simulate
        } else {
            Command::Analyze
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::Simulate => "simulate",
            Command::Filter => "filter",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Selection {
    All,
    Table(u32),
    Figure(u32),
    One(String),
}

#[derive(Clone, Debug, Serialize)]
pub struct ItemResult {
    pub name: String,
    pub command: Command,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip)]
    pub metrics: Option<Metrics>,
}

impl ItemResult {
    pub fn pass(&self) -> bool {
        self.error.is_none() && !self.checks.is_empty() && crate::all_pass(&self.checks)
    }
}

/// Scenario files picked by a selection, in name order.
pub fn select(sel: &Selection) -> Result<Vec<PathBuf>, CommandError> {
    let prefix = match sel {
        Selection::One(name) => return Ok(vec![resolve(name)]),
        Selection::All => String::new(),
        Selection::Table(n) => format!("table{n}-"),
        Selection::Figure(n) => format!("fig{n}-"),
    };
    let all = bundled().map_err(|e| CommandError::io(&crate::scenario::scenario_dir(), e))?;
    let picked: Vec<PathBuf> = all
        .into_iter()
        .filter(|p| p.file_name().and_then(|f| f.to_str()).is_some_and(|f| f.starts_with(&prefix)))
        .collect();
    if picked.is_empty() {
        return Err(CommandError::Invalid(format!("no bundled scenario matches {sel:?}")));
    }
    Ok(picked)
}

/// Runs one scenario with the command its expectations call for. Errors are
/// recorded as a failed item.
pub fn run_item(sc: &Scenario) -> ItemResult {
    let command = Command::for_scenario(sc);
    let mut item = ItemResult { name: sc.name.clone(), command, checks: Vec::new(), error: None, metrics: None };
    let outcome = match command {
        Command::Analyze => analyze::analyze(sc).map(|r| item.checks = r.checks),
        Command::Simulate => run::simulate(sc, None).map(|(_, r)| item.checks = r.checks),
        Command::Filter => run::filter(sc, None).map(|(_, r)| {
            item.checks = r.checks;
            item.metrics = Some(r.metrics);
        }),
    };
    if let Err(e) = outcome {
        item.error = Some(e.to_string());
    }
    item
}

/// Loads and runs every path on a pool of `workers` threads (0 picks the
/// rayon default). Results keep the input order.
pub fn reproduce(paths: &[PathBuf], workers: usize) -> Result<Vec<ItemResult>, CommandError> {
    let scenarios: Vec<Scenario> = paths.iter().map(|p| Scenario::load(p)).collect::<Result<_, _>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CommandError::Invalid(format!("thread pool: {e}")))?;
    Ok(pool.install(|| scenarios.par_iter().map(run_item).collect()))
}

/// Comparisons across items: more turns must not end with a worse wind
/// direction estimate.
pub fn cross_checks(items: &[ItemResult]) -> Vec<Check> {
    let metric = |name: &str| {
        items.iter().find(|i| i.name == name).and_then(|i| i.metrics.as_ref()).map(|m| m.final_zeta_error)
    };
    let mut out = Vec::new();
    if let (Some(many), Some(few)) = (metric("fig3-100turns"), metric("fig3-34turns")) {
        out.push(Check::new(
            "fig3: 100-turn error vs 34-turn error",
            format!("<= 1.1 x {few:.4}"),
            format!("{many:.4}"),
            many <= 1.1 * few,
        ));
    }
    out
}

fn cell(s: &str) -> String {
    s.replace('|', "\\|")
}

/// Markdown report: a summary table, then every check per item.
pub fn render_report(items: &[ItemResult], cross: &[Check]) -> String {
    let passed = items.iter().filter(|i| i.pass()).count() + cross.iter().filter(|c| c.pass).count();
    let total = items.len() + cross.len();
    let mut s = String::new();
    let _ = writeln!(s, "# windobs reproduction report\n");
    let _ = writeln!(s, "{passed} of {total} items pass.\n");
    let _ = writeln!(s, "| item | command | checks | result |");
    let _ = writeln!(s, "|---|---|---|---|");
    for i in items {
        let ok = i.checks.iter().filter(|c| c.pass).count();
        let tag = if i.pass() { "PASS" } else { "FAIL" };
        let _ = writeln!(s, "| {} | {} | {ok}/{} | {tag} |", i.name, i.command.name(), i.checks.len());
    }
    for c in cross {
        let tag = if c.pass { "PASS" } else { "FAIL" };
        let _ = writeln!(s, "| {} | cross-check | {}/1 | {tag} |", cell(&c.item), c.pass as u8);
    }
    for i in items {
        let _ = writeln!(s, "\n## {}\n", i.name);
        if let Some(e) = &i.error {
            let _ = writeln!(s, "FAIL: {e}\n");
        }
        if i.checks.is_empty() && i.error.is_none() {
            let _ = writeln!(s, "FAIL: scenario declares no expectations\n");
        }
        if !i.checks.is_empty() {
            let _ = writeln!(s, "| check | expected | actual | result |");
            let _ = writeln!(s, "|---|---|---|---|");
            for c in &i.checks {
                let tag = if c.pass { "PASS" } else { "FAIL" };
                let _ = writeln!(s, "| {} | {} | {} | {tag} |", cell(&c.item), cell(&c.expected), cell(&c.actual));
            }
        }
    }
    s
}

pub fn all_items_pass(items: &[ItemResult], cross: &[Check]) -> bool {
    items.iter().all(ItemResult::pass) && crate::all_pass(cross)
}
