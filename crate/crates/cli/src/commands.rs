use std::path::Path;

use anyhow::Context;
use nagumo_core::flow::Field;
use nagumo_core::itinerary::{periodic_solution, realize_finite, validate, FIXED_POINT_TOL};
use nagumo_core::manifolds::{connect, min_window_length, stable_continuum};
use nagumo_core::phase::{classify_level, critical_levels, orbit_graph, potential};
use nagumo_core::roots::bisect_secant;
use nagumo_core::stretch::{block_relation, standard_relations, verify_stretch, EpsMode, Relation, StretchReport};
use nagumo_core::{EnergyLevel, Error, LevelTag, PlanarPath, SystemParams};
use serde_json::{json, Value};

use crate::config::{ConfigError, RunConfig};
use crate::output::{report, write_json, write_with, Status};

/// Write the report for `outcome` (an error report when it failed) and pass
/// the status or the error on.
fn finish(out: &Path, command: &str, config: &RunConfig, outcome: anyhow::Result<(Status, Value)>) -> anyhow::Result<Status> {
    let file = out.join(format!("{}.json", command.replace('-', "_")));
    match outcome {
        Ok((status, result)) => {
            write_json(&file, &report(command, config, status, result)?)?;
            Ok(status)
        }
        Err(e) => {
            let result = json!({ "error": e.to_string(), "exit_code": crate::exit_code(&e) });
            write_json(&file, &report(command, config, Status::Error, result)?)?;
            Err(e)
        }
    }
}

fn status_of(passed: bool) -> Status {
    if passed {
        Status::Passed
    } else {
        Status::Failed
    }
}

// ---- portrait

/// `[x_lo, x_hi]` where the level `c` lies above the potential on `[0,1]`;
/// `None` below the center.
fn level_range(p: &SystemParams, c: f64) -> Option<(f64, f64)> {
    let crit = critical_levels(p);
    if c < crit.center.0 {
        return None;
    }
    let a = p.a();
    let g = |x: f64| potential(p, x) - c;
    let lo = if c >= 0.0 { 0.0 } else { bisect_secant(g, 0.0, a, 1e-15)? };
    let hi = if c >= crit.saddle1.0 { 1.0 } else { bisect_secant(g, a, 1.0, 1e-15)? };
    Some((lo, hi))
}

/// Critical levels plus `n` regular ones from the center to a quarter span
/// above the higher saddle level.
fn portrait_levels(p: &SystemParams, n: usize) -> Vec<f64> {
    let crit = critical_levels(p);
    let (lo, hi) = (crit.center.0, crit.saddle0.0.max(crit.saddle1.0));
    let span = hi - lo;
    let mut levels = vec![lo, crit.saddle0.0, crit.saddle1.0, hi + 0.25 * span];
    levels.extend((1..=n).map(|i| lo + span * i as f64 / (n + 1) as f64));
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    levels
}

fn write_curve(path: &Path, curve: &PlanarPath) -> anyhow::Result<()> {
    write_with(path, |w| {
        use std::io::Write;
        writeln!(w, "x,y")?;
        for q in curve.points() {
            writeln!(w, "{:.16e},{:.16e}", q.p.x, q.p.y)?;
        }
        Ok(())
    })
}

pub fn portrait(cfg: &RunConfig, out: &Path) -> anyhow::Result<Status> {
    let run = || -> anyhow::Result<(Status, Value)> {
        let weights = if cfg.portrait.weights.is_empty() { vec![cfg.a_minus, cfg.a_plus] } else { cfg.portrait.weights.clone() };
        let dir = out.join("curves");
        std::fs::create_dir_all(&dir)?;
        let mut systems = Vec::new();
        for (i, &a) in weights.iter().enumerate() {
            let p = SystemParams::new(a)?;
            let mut curves = Vec::new();
            for (j, c) in portrait_levels(&p, cfg.portrait.levels.unwrap_or(8)).into_iter().enumerate() {
                let class = classify_level(&p, EnergyLevel(c));
                let Some((lo, hi)) = level_range(&p, c) else { continue };
                let mut files = Vec::new();
                for (branch, name) in [(1.0, "upper"), (-1.0, "lower")] {
                    let curve = orbit_graph(&p, EnergyLevel(c), lo, hi, branch)?;
                    let rel = format!("curves/a{i}_level{j}_{name}.csv");
                    write_curve(&out.join(&rel), &curve)?;
                    files.push(rel);
                    if class.tag == LevelTag::CenterPoint {
                        break;
                    }
                }
                curves.push(json!({ "level": c, "class": class, "x_range": [lo, hi], "files": files }));
            }
            systems.push(json!({ "a": a, "critical_levels": critical_levels(&p), "curves": curves }));
        }
        Ok((Status::Passed, json!({ "systems": systems })))
    };
    finish(out, "portrait", cfg, run())
}

// ---- thresholds

pub fn thresholds(cfg: &RunConfig, out: &Path) -> anyhow::Result<Status> {
    let run = || -> anyhow::Result<(Status, Value)> {
        let setup = cfg.setup()?;
        let th = &setup.thresholds;
        let delta = cfg.delta()?;
        let eps = |m: u32, mode| match th.eps_star(m, delta, mode) {
            Ok(e) => json!(e),
            Err(e) => json!({ "unavailable": e.to_string() }),
        };
        let by_m: Vec<Value> = (1..=cfg.m)
            .map(|m| {
                json!({
                    "M": m,
                    "t2_star": th.t2_star(m),
                    "eps_star_chaos": eps(m, EpsMode::Chaos),
                    "eps_star_connection": eps(m, EpsMode::Connection),
                })
            })
            .collect();
        let result = json!({
            "delta": delta,
            "t1_star": th.t1_star,
            "t2_star": th.t2_star(cfg.m),
            "tau": th.tau.as_ref().map(|t| t.tau),
            "tau_prime": th.tau.as_ref().map(|t| t.tau_prime),
            "eps_star_chaos": eps(cfg.m, EpsMode::Chaos),
            "eps_star_connection": eps(cfg.m, EpsMode::Connection),
            "by_M": by_m,
            "setup": setup,
        });
        Ok((Status::Passed, result))
    };
    finish(out, "thresholds", cfg, run())
}

// ---- verify-stretch

fn relation_entry(rel: &Relation, r: Result<StretchReport, Error>) -> (bool, Value) {
    match r {
        Ok(rep) => (rep.passed, json!({ "name": rel.name, "status": status_of(rep.passed), "report": rep })),
        Err(e @ Error::Inconclusive(_)) => (false, json!({ "name": rel.name, "status": "inconclusive", "reason": e.to_string() })),
        Err(e) => (false, json!({ "name": rel.name, "status": "error", "reason": e.to_string() })),
    }
}

pub fn verify(cfg: &RunConfig, out: &Path) -> anyhow::Result<Status> {
    let run = || -> anyhow::Result<(Status, Value)> {
        if cfg.path_budget == 0 || !(cfg.time_factor > 0.0) {
            return Err(ConfigError("path_budget and time_factor must be positive".into()).into());
        }
        let setup = cfg.setup()?;
        let opts = cfg.options()?;
        let (w, k) = (setup.weights, setup.constants);
        let t1 = cfg.time_factor * setup.thresholds.t1_star;
        let t2 = cfg.time_factor * setup.thresholds.t2_star(cfg.m);
        let mut all = true;
        let mut relations = Vec::new();
        for rel in standard_relations(w, t1, t2, cfg.m) {
            let (ok, v) = relation_entry(&rel, verify_stretch(&w, &k, &rel, cfg.path_budget, &opts));
            all &= ok;
            relations.push(v);
        }
        let block = if cfg.compose {
            let rel = block_relation(w, [t1, t2, t1, t1, t2, t1], cfg.m, cfg.m);
            let (ok, v) = relation_entry(&rel, verify_stretch(&w, &k, &rel, cfg.path_budget, &opts));
            all &= ok;
            v
        } else {
            Value::Null
        };
        let result = json!({ "t1": t1, "t2": t2, "constants": k, "relations": relations, "block_map": block });
        Ok((status_of(all), result))
    };
    finish(out, "verify-stretch", cfg, run())
}

// ---- chaos / connect

fn write_trajectory(out: &Path, traj: &nagumo_core::flow::Trajectory) -> anyhow::Result<()> {
    write_with(&out.join("trajectory.csv"), |w| traj.write_csv(w))
}

/// `v` without the (large) dense trajectory under `key`.
fn strip_trajectory(mut v: Value, key: &str) -> Value {
    if let Some(obj) = v.get_mut(key).and_then(Value::as_object_mut) {
        obj.remove("trajectory");
    }
    v
}

pub fn chaos(cfg: &RunConfig, out: &Path) -> anyhow::Result<Status> {
    let resolved = cfg.resolve(6 * cfg.ell.or(cfg.k).unwrap_or(1), 0, EpsMode::Chaos);
    let config = match &resolved {
        Ok(r) => r.config.clone(),
        Err(_) => cfg.clone(),
    };
    let run = || -> anyhow::Result<(Status, Value)> {
        let r = resolved?;
        let opts = cfg.options()?;
        if let Some(ell) = cfg.ell {
            if r.itinerary.len() != ell {
                return Err(ConfigError(format!("ell = {ell} but the itinerary has {} blocks", r.itinerary.len())).into());
            }
            let sol = periodic_solution(&r.profile, &r.itinerary, &opts)?;
            write_trajectory(out, &sol.realization.trajectory)?;
            let check = validate(&sol.realization, &r.itinerary)?;
            let ok = check.passed && sol.certificate.residual < FIXED_POINT_TOL;
            let v = strip_trajectory(serde_json::to_value(&sol)?, "realization");
            return Ok((status_of(ok), json!({ "periodic": v, "validation": check, "trajectory": "trajectory.csv" })));
        }
        let real = realize_finite(&r.profile, &r.itinerary, &opts)?;
        write_trajectory(out, &real.trajectory)?;
        let check = validate(&real, &r.itinerary)?;
        let v = strip_trajectory(json!({ "realization": real }), "realization");
        Ok((status_of(check.passed), json!({ "realization": v["realization"], "validation": check, "trajectory": "trajectory.csv" })))
    };
    finish(out, "chaos", &config, run())
}

pub fn connect_cmd(cfg: &RunConfig, out: &Path) -> anyhow::Result<Status> {
    let resolved = cfg.resolve(6 * cfg.k.unwrap_or(0) + 2, -1, EpsMode::Connection);
    let config = match &resolved {
        Ok(r) => r.config.clone(),
        Err(_) => cfg.clone(),
    };
    let run = || -> anyhow::Result<(Status, Value)> {
        let r = resolved?;
        let opts = cfg.options()?;
        let kind = cfg.connection_kind();
        let c = connect(&r.profile, &r.itinerary, kind, &opts)?;
        write_trajectory(out, &c.realization.trajectory)?;
        let field = Field::Stepwise(&r.profile);
        let manifold = match stable_continuum(field, c.section_time, kind.target(), min_window_length(&field), &opts) {
            Ok(g) => {
                write_with(&out.join("stable_manifold.csv"), |w| g.write_csv(w)).context("stable manifold")?;
                json!({ "file": "stable_manifold.csv", "time": c.section_time, "kind": g.which })
            }
            Err(e) => json!({ "unavailable": e.to_string() }),
        };
        let v = strip_trajectory(serde_json::to_value(&c)?, "realization");
        Ok((status_of(c.passed), json!({ "connection": v, "stable_manifold": manifold, "trajectory": "trajectory.csv" })))
    };
    finish(out, "connect", &config, run())
}
