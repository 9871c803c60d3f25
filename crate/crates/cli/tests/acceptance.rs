//! One PASS/FAIL line per acceptance criterion, each at its stated tolerance.
//!
//! Runs with `harness = false`; the process exits non-zero when any
//! criterion fails.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use lagmax::experiments::{run, ExperimentConfig, ExperimentReport, RunOutput, Scenario};

struct Criterion {
    name: &'static str,
    scenarios: &'static [Scenario],
    /// Checks that make up the criterion; empty means every check of the scenarios.
    checks: &'static [&'static str],
}

const CRITERIA: &[Criterion] = &[
    Criterion { name: "special-functions", scenarios: &[Scenario::Orthonormality], checks: &[] },
    Criterion {
        name: "semigroup-correctness",
        scenarios: &[Scenario::EigenDecay, Scenario::ChapmanKolmogorov],
        checks: &[],
    },
    Criterion { name: "kernel-envelopes", scenarios: &[Scenario::EnvelopeSandwich], checks: &[] },
    Criterion { name: "level-set-lemmas", scenarios: &[Scenario::LevelsetLemma], checks: &[] },
    Criterion {
        name: "one-dimensional-pencil",
        scenarios: &[Scenario::WeakType1d, Scenario::Proposition1d],
        checks: &["weak-type-p1-spread", "beyond-p1-growth", "proposition-fit", "proposition-violations"],
    },
    Criterion { name: "endpoint-sharpness", scenarios: &[Scenario::SharpnessCube], checks: &[] },
    Criterion {
        name: "high-dimensional-blowup",
        scenarios: &[Scenario::CounterexampleGrowth],
        checks: &["E_R-growth-law", "E_R-increasing", "F_N-slope"],
    },
    Criterion { name: "psi-and-damped-family", scenarios: &[Scenario::P0Endpoint], checks: &[] },
    Criterion { name: "divergence-witness", scenarios: &[Scenario::P0Witness], checks: &["canonical-probe-growth"] },
];

/// Scenarios whose CSV output is compared across two runs.
const DETERMINISM: &[Scenario] = &[Scenario::EnvelopeSandwich, Scenario::LevelsetLemma, Scenario::Proposition1d];

fn run_default(s: Scenario) -> RunOutput {
    run(&ExperimentConfig::default_for(s)).unwrap_or_else(|e| panic!("{s} failed to run: {e}"))
}

fn csv_bytes(out: &RunOutput) -> Vec<String> {
    out.tables.iter().map(|t| t.to_csv_string().expect("csv")).collect()
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut reports: BTreeMap<&str, (ExperimentReport, Vec<String>)> = BTreeMap::new();
    for c in CRITERIA {
        for &s in c.scenarios {
            reports.entry(s.id()).or_insert_with(|| {
                let out = run_default(s);
                let csv = csv_bytes(&out);
                (out.report, csv)
            });
        }
    }

    let mut all = true;
    for c in CRITERIA {
        let mut ok = true;
        let mut parts = Vec::new();
        for &s in c.scenarios {
            let report = &reports[s.id()].0;
            ok &= !report.budget_exceeded;
            for chk in &report.checks {
                if c.checks.is_empty() || c.checks.contains(&chk.name.as_str()) {
                    ok &= chk.passed;
                    parts.push(format!("{}={:.4e}[{}]", chk.name, chk.measured, chk.rule));
                }
            }
        }
        for name in c.checks {
            if !c.scenarios.iter().any(|&s| reports[s.id()].0.checks.iter().any(|k| k.name == *name)) {
                ok = false;
                parts.push(format!("{name}=missing"));
            }
        }
        all &= ok;
        println!("{} {}: {}", if ok { "PASS" } else { "FAIL" }, c.name, parts.join("; "));
    }

    let mut same = true;
    for &s in DETERMINISM {
        let first = match reports.get(s.id()) {
            Some((_, csv)) => csv.clone(),
            None => csv_bytes(&run_default(s)),
        };
        same &= first == csv_bytes(&run_default(s)) && !first.is_empty();
    }
    all &= same;
    let ids: Vec<&str> = DETERMINISM.iter().map(|s| s.id()).collect();
    println!("{} determinism: byte-identical CSV across two runs of {}", if same { "PASS" } else { "FAIL" }, ids.join(", "));

    println!("acceptance finished in {:.1} s", start.elapsed().as_secs_f64());
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
