use std::fs::File;
use std::io::BufReader;

use anyhow::{Context, Result};
use lcm_core::sim::analyze_sim_trace;
use lcm_core::trace::default_window;
use lcm_core::{fairness_windows, validate_schedule, SchedulerClass, Trace};
use serde_json::{json, Value};

use crate::VerifyArgs;

/// JSON report on a trace; the flag is whether every check passed.
pub fn report(
    trace: &Trace,
    class: SchedulerClass,
    window: usize,
    sim: bool,
) -> Result<(Value, bool)> {
    let violations = validate_schedule(trace, class);
    let fairness = fairness_windows(trace, window);
    let mut ok = violations.is_empty() && fairness.is_fair();
    let mut out = json!({
        "schedule": {
            "class": class,
            "valid": violations.is_empty(),
            "violations": violations.iter().take(10).collect::<Vec<_>>(),
            "violation_count": violations.len(),
        },
        "fairness": {
            "window": fairness.window,
            "fair": fairness.is_fair(),
            "unfair_windows": fairness.unfair.len(),
            "first_unfair": fairness.unfair.first(),
        },
    });
    if sim {
        let a = analyze_sim_trace(trace)?;
        let counts_ok = a.mega_cycles.all_counts_positive();
        ok &= a.execution.is_valid() && counts_ok;
        out["sim"] = json!({
            "atomicity": if a.execution.is_valid() { "valid" } else { "invalid" },
            "embedded_executions": a.execution.instances.len(),
            "violations": a.execution.violations.iter().take(10).collect::<Vec<_>>(),
            "mega_cycles": a.mega_cycles.completed.len(),
            "mega_cycle_counts": a.mega_cycles.completed.iter().map(|m| &m.counts).collect::<Vec<_>>(),
            "all_counts_positive": counts_ok,
            "at_most_one_repeater": a.mega_cycles.at_most_one_repeater(),
            "partial_counts": a.mega_cycles.partial,
            "batches": a.batches.len(),
            "lc_refinement": a.lc_refinement_holds(),
        });
    }
    Ok((out, ok))
}

pub fn cmd_verify(a: &VerifyArgs) -> Result<u8> {
    let f = File::open(&a.trace).with_context(|| format!("opening {}", a.trace.display()))?;
    let trace = Trace::read_jsonl(BufReader::new(f))
        .with_context(|| format!("reading {}", a.trace.display()))?;
    let class = match &a.scheduler {
        Some(s) => s.parse()?,
        None => trace.header().scheduler,
    };
    let window = a.window.unwrap_or_else(|| default_window(trace.n()));
    let (out, ok) = report(&trace, class, window, a.sim)?;
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(if ok { 0 } else { 2 })
}
