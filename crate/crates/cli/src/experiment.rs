use std::fs;
use std::io::BufWriter;

use anyhow::{bail, Context, Result};
use lcm_core::adversaries::{target_class, tf_below_quarter_instance, tf_quarter_instance};
use lcm_core::{
    monitor_gcncl, monitor_mlcv, monitor_rdv, monitor_tf, registry, run_with, scripted_adversary,
    sim_wrap, AlgorithmBinding, EngineError, ModelClass, MonitorVerdict, Point, RunConfig,
    Scenario, SchedulerClass, SimConfig, Status, Trace,
};

use crate::RunArgs;

pub const EXIT_SATISFIED: u8 = 0;
pub const EXIT_VIOLATED: u8 = 2;
pub const EXIT_UNDETERMINED: u8 = 3;

pub fn scenario(name: &str) -> Result<Scenario> {
    match name {
        "pair" => Ok(Scenario::new(vec![Point::ORIGIN, Point::new(1.0, 0.0)])),
        "tf-quarter" => Ok(tf_quarter_instance()),
        "tf-below-quarter" => Ok(tf_below_quarter_instance()),
        _ => {
            if let Some(n) = name.strip_prefix("ring:") {
                let n: usize = n
                    .parse()
                    .with_context(|| format!("bad ring size in {name:?}"))?;
                if n < 2 {
                    bail!("a ring needs at least 2 robots");
                }
                let pts = (0..n)
                    .map(|i| {
                        let t = i as f64 * std::f64::consts::TAU / n as f64 + 0.1;
                        Point::new(t.cos() * (1.0 + 0.1 * i as f64), t.sin())
                    })
                    .collect();
                return Ok(Scenario::new(pts));
            }
            let text =
                fs::read_to_string(name).with_context(|| format!("reading scenario {name:?}"))?;
            Ok(Scenario::from_json(&text)?)
        }
    }
}

pub fn algorithm(name: &str) -> Result<AlgorithmBinding> {
    match name.strip_prefix("sim:") {
        Some(payload) => Ok(sim_wrap(&registry(payload)?, SimConfig::default())?),
        None => Ok(registry(name)?),
    }
}

pub fn monitor(name: &str, trace: &Trace, eps: f64) -> Result<Option<MonitorVerdict>> {
    Ok(Some(match name {
        "mlcv" => monitor_mlcv(trace, eps, false)?,
        "rdv" => monitor_rdv(trace, eps)?,
        "gcncl" => monitor_gcncl(trace)?,
        "tf" => monitor_tf(trace, eps)?,
        "none" => return Ok(None),
        other => bail!("unknown monitor {other:?} (expected mlcv, rdv, gcncl, tf or none)"),
    }))
}

pub fn exit_code(v: Option<&MonitorVerdict>) -> u8 {
    match v.map(|v| &v.status) {
        None | Some(Status::Satisfied) => EXIT_SATISFIED,
        Some(Status::ViolatedAt { .. }) => EXIT_VIOLATED,
        Some(Status::Undetermined) => EXIT_UNDETERMINED,
    }
}

/// Runs an experiment. An adversary that aborts still yields its partial
/// trace, returned with the reason.
pub fn execute(
    sc: &Scenario,
    algo: &AlgorithmBinding,
    class: SchedulerClass,
    adversary: &str,
    cfg: &RunConfig,
) -> Result<(Trace, Option<String>)> {
    if let Some(target) = target_class(adversary) {
        if !target.is_within(class) {
            bail!("adversary {adversary} produces {target} schedules, not valid under {class}");
        }
    }
    let mut adv = scripted_adversary(adversary, cfg.seed, None)?;
    match run_with(sc, algo, class, adv.as_mut(), cfg) {
        Ok(t) => Ok((t, None)),
        Err(EngineError::AdversaryAborted { error, trace }) => {
            Ok((*trace, Some(error.to_string())))
        }
        Err(e) => Err(e.into()),
    }
}

pub fn cmd_run(a: &RunArgs) -> Result<u8> {
    let sc = scenario(&a.scenario)?;
    let algo = algorithm(&a.algo)?;
    if let Some(m) = &a.model {
        let m: ModelClass = m.parse()?;
        if m != algo.model {
            bail!(
                "algorithm {} runs in the {:?} model, not {m:?}",
                algo.name,
                algo.model
            );
        }
    }
    let class: SchedulerClass = a.scheduler.parse()?;
    if a.eps.is_nan() || a.eps <= 0.0 {
        bail!("--eps must be positive");
    }
    let cfg = RunConfig::new(a.horizon, a.seed);
    let (trace, aborted) = execute(&sc, &algo, class, &a.adversary, &cfg)?;
    if let Some(path) = &a.trace_out {
        let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        trace.write_jsonl(BufWriter::new(f))?;
    }
    let verdict = monitor(&a.monitor, &trace, a.eps)?;
    if a.json {
        let out = serde_json::json!({
            "verdict": verdict,
            "events": trace.len(),
            "relevant_times": trace.last_time(),
            "adversary_aborted": aborted,
        });
        println!("{out}");
    } else {
        println!(
            "{} events over {} relevant times",
            trace.len(),
            trace.last_time()
        );
        if let Some(why) = &aborted {
            println!("adversary stopped: {why}");
        }
        match &verdict {
            Some(v) => println!("{v}"),
            None => println!("no monitor"),
        }
    }
    Ok(exit_code(verdict.as_ref()))
}
