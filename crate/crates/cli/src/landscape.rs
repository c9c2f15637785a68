use anyhow::{bail, Result};
use lcm_core::sim::analyze_sim_trace;
use lcm_core::{
    analyze_quadrilateral, MonitorVerdict, Point, RunConfig, Scenario, SchedulerClass, Trace,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::experiment::{algorithm, execute, monitor, scenario};
use crate::LandscapeArgs;

#[derive(Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Evidence {
    Solver,
    Adversary,
    #[serde(rename = "verifier-evidence")]
    Verifier,
}

impl Evidence {
    fn label(self) -> &'static str {
        match self {
            Evidence::Solver => "solver",
            Evidence::Adversary => "adversary",
            Evidence::Verifier => "verifier evidence",
        }
    }
}

struct Cell {
    model: &'static str,
    claim: &'static str,
    evidence: Evidence,
    check: fn(u64, &RunConfig) -> Result<(), String>,
}

#[derive(Serialize)]
struct Row {
    model: &'static str,
    claim: &'static str,
    evidence: Evidence,
    passed: u64,
    seeds: u64,
    pass: bool,
    /// First failing seed and why.
    failure: Option<(u64, String)>,
}

struct Experiment<'a> {
    scenario: Scenario,
    algo: &'a str,
    class: SchedulerClass,
    adversary: &'a str,
    horizon: u64,
}

impl Experiment<'_> {
    fn trace(&self, seed: u64, base: &RunConfig) -> Result<Trace, String> {
        let algo = algorithm(self.algo).map_err(|e| e.to_string())?;
        let cfg = RunConfig {
            horizon: self.horizon,
            seed,
            ..base.clone()
        };
        execute(&self.scenario, &algo, self.class, self.adversary, &cfg)
            .map(|(t, _)| t)
            .map_err(|e| e.to_string())
    }

    fn verdict(&self, seed: u64, base: &RunConfig, mon: &str) -> Result<MonitorVerdict, String> {
        let t = self.trace(seed, base)?;
        let v = monitor(mon, &t, 1e-9).map_err(|e| e.to_string())?;
        Ok(v.expect("a monitor was named"))
    }
}

fn named(name: &str) -> Scenario {
    scenario(name).expect("bundled scenario")
}

fn expect(v: MonitorVerdict, satisfied: bool) -> Result<(), String> {
    if (satisfied && v.is_satisfied()) || (!satisfied && v.is_violated()) {
        Ok(())
    } else {
        Err(v.to_string())
    }
}

/// Convex quadrilateral with a unique longest side CD on the x axis that is
/// not a trapezoid and whose angle is clear of a quarter turn.
fn random_tf_instance(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let c = Point::new(rng.gen_range(6.0..10.0), 0.0);
        let a = Point::new(rng.gen_range(0.5..4.5), rng.gen_range(1.0..4.0));
        let b = Point::new(rng.gen_range(a.x + 0.5..c.x), rng.gen_range(1.0..4.0));
        let pts = [a, b, c, Point::ORIGIN];
        if let Ok(q) = analyze_quadrilateral(&pts) {
            if !q.trapezoid && (q.alpha - std::f64::consts::FRAC_PI_4).abs() > 1e-6 {
                return Scenario::new(pts.to_vec());
            }
        }
    }
}

fn mlcv_solver(algo: &'static str) -> impl Fn(u64, &RunConfig) -> Result<(), String> {
    move |seed, cfg| {
        let e = Experiment {
            scenario: named("pair"),
            algo,
            class: SchedulerClass::Ssynch,
            adversary: "uniform-random-fair",
            horizon: 60,
        };
        expect(e.verdict(seed, cfg, "mlcv")?, true)
    }
}

fn adversary_wins(
    sc: &'static str,
    algo: &'static str,
    class: SchedulerClass,
    adv: &'static str,
    mon: &str,
    seed: u64,
    cfg: &RunConfig,
) -> Result<(), String> {
    let e = Experiment {
        scenario: named(sc),
        algo,
        class,
        adversary: adv,
        horizon: 200,
    };
    expect(e.verdict(seed, cfg, mon)?, false)
}

fn tf_solver(algo: &'static str, seed: u64, cfg: &RunConfig) -> Result<(), String> {
    let e = Experiment {
        scenario: random_tf_instance(seed),
        algo,
        class: SchedulerClass::MAtomic,
        adversary: "uniform-random-fair",
        horizon: 200,
    };
    expect(e.verdict(seed, cfg, "tf")?, true)
}

fn sim_evidence(class: SchedulerClass, seed: u64, cfg: &RunConfig) -> Result<(), String> {
    let n = 3 + (seed % 3) as usize;
    let e = Experiment {
        scenario: named(&format!("ring:{n}")),
        algo: "sim:color_cycler",
        class,
        adversary: "uniform-random-fair",
        horizon: 3000,
    };
    let t = e.trace(seed, cfg)?;
    let a = analyze_sim_trace(&t).map_err(|e| e.to_string())?;
    if !a.execution.is_valid() {
        return Err(format!(
            "{} atomicity violations",
            a.execution.violations.len()
        ));
    }
    if a.mega_cycles.completed.len() < 2 || !a.mega_cycles.all_counts_positive() {
        return Err(format!(
            "{} complete mega-cycles",
            a.mega_cycles.completed.len()
        ));
    }
    if class == SchedulerClass::LcAtomic && !a.lc_refinement_holds() {
        return Err("a phase-1 batch mixed snapshots".into());
    }
    Ok(())
}

fn cells() -> Vec<Cell> {
    use SchedulerClass::*;
    vec![
        Cell {
            model: "OBLOT",
            claim: "S solves MLCv",
            evidence: Evidence::Solver,
            check: |s, c| mlcv_solver("half_move")(s, c),
        },
        Cell {
            model: "OBLOT",
            claim: "A_M cannot solve MLCv",
            evidence: Evidence::Adversary,
            check: |s, c| {
                adversary_wins("pair", "half_move", MAtomic, "mlcv-oblot-m", "mlcv", s, c)
            },
        },
        Cell {
            model: "OBLOT",
            claim: "A_M solves TF",
            evidence: Evidence::Solver,
            check: |s, c| tf_solver("tf_rules", s, c),
        },
        Cell {
            model: "OBLOT",
            claim: "A cannot solve TF",
            evidence: Evidence::Adversary,
            check: |s, c| {
                adversary_wins(
                    "tf-below-quarter",
                    "tf_rules",
                    Asynch,
                    "tf-async",
                    "tf",
                    s,
                    c,
                )
            },
        },
        Cell {
            model: "FCOM",
            claim: "S solves MLCv",
            evidence: Evidence::Solver,
            check: |s, c| mlcv_solver("half_move_fcom")(s, c),
        },
        Cell {
            model: "FCOM",
            claim: "A_M cannot solve MLCv",
            evidence: Evidence::Adversary,
            check: |s, c| {
                adversary_wins(
                    "pair",
                    "half_move_fcom",
                    MAtomic,
                    "mlcv-fcom-m",
                    "mlcv",
                    s,
                    c,
                )
            },
        },
        Cell {
            model: "FCOM",
            claim: "A_CM equals A",
            evidence: Evidence::Verifier,
            check: |s, c| sim_evidence(Asynch, s, c),
        },
        Cell {
            model: "FCOM",
            claim: "A_LC equals S",
            evidence: Evidence::Verifier,
            check: |s, c| sim_evidence(LcAtomic, s, c),
        },
        Cell {
            model: "FSTA",
            claim: "S solves MLCv",
            evidence: Evidence::Solver,
            check: |s, c| mlcv_solver("half_move_fsta")(s, c),
        },
        Cell {
            model: "FSTA",
            claim: "A_M cannot solve MLCv",
            evidence: Evidence::Adversary,
            check: |s, c| {
                adversary_wins(
                    "pair",
                    "half_move_fsta",
                    MAtomic,
                    "mlcv-fsta-m",
                    "mlcv",
                    s,
                    c,
                )
            },
        },
        Cell {
            model: "FSTA",
            claim: "A_M solves TF",
            evidence: Evidence::Solver,
            check: |s, c| tf_solver("tf_rules_fsta", s, c),
        },
        Cell {
            model: "FSTA",
            claim: "A_LC cannot solve TF",
            evidence: Evidence::Adversary,
            check: |s, c| {
                adversary_wins(
                    "tf-below-quarter",
                    "tf_rules_fsta",
                    LcAtomic,
                    "tf-fsta-lc",
                    "tf",
                    s,
                    c,
                )
            },
        },
        Cell {
            model: "FSTA",
            claim: "A solves GCNCL",
            evidence: Evidence::Solver,
            check: |s, c| {
                let e = Experiment {
                    scenario: named("pair"),
                    algo: "gcncl_quarter",
                    class: Asynch,
                    adversary: "uniform-random-fair",
                    horizon: 300,
                };
                expect(e.verdict(s, c, "gcncl")?, true)
            },
        },
        Cell {
            model: "FCOM",
            claim: "S cannot solve GCNCL",
            evidence: Evidence::Adversary,
            check: |s, c| {
                adversary_wins(
                    "pair",
                    "naive_quarter_fcom",
                    Ssynch,
                    "gcncl-fcom-s",
                    "gcncl",
                    s,
                    c,
                )
            },
        },
    ]
}

fn evaluate(cell: &Cell, seeds: u64, cfg: &RunConfig) -> Row {
    let results: Vec<(u64, Result<(), String>)> = (0..seeds)
        .into_par_iter()
        .map(|s| (s, (cell.check)(s, cfg)))
        .collect();
    let passed = results.iter().filter(|(_, r)| r.is_ok()).count() as u64;
    let failure = results
        .into_iter()
        .find_map(|(s, r)| r.err().map(|e| (s, e)));
    Row {
        model: cell.model,
        claim: cell.claim,
        evidence: cell.evidence,
        passed,
        seeds,
        pass: passed == seeds,
        failure,
    }
}

pub fn cmd_landscape(a: &LandscapeArgs) -> Result<u8> {
    if a.seeds == 0 {
        bail!("--seeds must be at least 1");
    }
    let mut cfg = RunConfig::new(0, 0);
    cfg.color_delay = !a.no_color_delay;
    let rows: Vec<Row> = cells().iter().map(|c| evaluate(c, a.seeds, &cfg)).collect();
    if a.json {
        println!("{}", serde_json::to_string_pretty(&rows)?);
    } else {
        println!(
            "{:<6} {:<22} {:<18} {:>9}  result",
            "model", "claim", "evidence", "seeds"
        );
        for r in &rows {
            let verdict = if r.pass { "PASS" } else { "FAIL" };
            println!(
                "{:<6} {:<22} {:<18} {:>9}  {verdict}",
                r.model,
                r.claim,
                r.evidence.label(),
                format!("{}/{}", r.passed, r.seeds)
            );
            if let Some((seed, why)) = &r.failure {
                println!("       seed {seed}: {why}");
            }
        }
    }
    Ok(if rows.iter().all(|r| r.pass) { 0 } else { 2 })
}
