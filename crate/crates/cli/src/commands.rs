use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use tws_core::checks::run_checks;
use tws_core::conditions::{
    ap_constant, asym_ap, coarse_subset, doubling_gamma, dual_testing, forward_testing, grid_cubes, interval_family, maximal_norms,
    pivotal_search, poisson_search, strengthened_ap, strengthened_values, ap_value, verify_witness, Candidate,
    TestingReport,
};
use tws_core::corpus::weight_pair;
use tws_core::decomp::{self, cz_split, superlevel_set, tree_doubling, verify_cz, verify_whitney};
use tws_core::operators::t_natural_many;
use tws_core::poisson::{poisson_bold, poisson_std, DiniModulus};
use tws_core::{Interval, StepAtomicMeasure, StepFunction, WeightPair};

use crate::config::ExperimentConfig;
use crate::CliError;

pub struct Context<'a> {
    pub cfg: &'a ExperimentConfig,
    pub out: &'a Path,
    pub verify: bool,
}

impl Context<'_> {
    fn write_json(&self, default: &str, value: &impl Serialize) -> Result<(), CliError> {
        let name = self.cfg.outputs.report.as_deref().unwrap_or(default);
        let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
        text.push('\n');
        std::fs::write(self.out.join(name), text)?;
        Ok(())
    }

    fn write_csv(&self, text: &str) -> Result<(), CliError> {
        let name = self.cfg.outputs.csv.as_deref().unwrap_or("plotdata.csv");
        std::fs::write(self.out.join(name), text)?;
        Ok(())
    }
}

const WITNESS_TOL: f64 = 1e-9;

#[derive(Serialize)]
struct Verification {
    condition: String,
    estimate: f64,
    recomputed: f64,
    ok: bool,
}

fn verify_all(w: &WeightPair, reports: &[TestingReport]) -> Result<Vec<Verification>, CliError> {
    reports
        .iter()
        .map(|r| {
            let v = verify_witness(w, r)?;
            let ok = if r.estimate.is_finite() {
                (v - r.estimate).abs() <= WITNESS_TOL * r.estimate.abs().max(1.0)
            } else {
                v == r.estimate
            };
            Ok(Verification {
                condition: r.condition.clone(),
                estimate: r.estimate,
                recomputed: v,
                ok,
            })
        })
        .collect()
}

fn all_reports(cfg: &ExperimentConfig, w: &WeightPair) -> Result<Vec<TestingReport>, CliError> {
    let b = &cfg.budgets;
    let family = interval_family(w, &b.family);
    let coarse = coarse_subset(&family, b.testing_cubes);
    let (st, half) = strengthened_ap(w, &family)?;
    let (m, md) = maximal_norms(w, &coarse, &b.maximal)?;
    Ok(vec![
        ap_constant(w, &family),
        st,
        half,
        poisson_search(w, &b.partition),
        pivotal_search(w, &b.partition),
        forward_testing(w, &coarse, &b.forward),
        dual_testing(w, &coarse, &b.dual)?,
        doubling_gamma("doubling_sigma", &w.sigma, &family, None),
        doubling_gamma("doubling_omega", &w.omega, &family, None),
        m,
        md,
        asym_ap(w, b.asym_c0, &family)?,
    ])
}

fn estimate(reports: &[TestingReport], name: &str) -> f64 {
    reports
        .iter()
        .find(|r| r.condition == name)
        .map_or(f64::NAN, |r| r.estimate)
}

#[derive(Serialize)]
struct Chain {
    name: &'static str,
    lhs: f64,
    rhs: f64,
    holds: bool,
}

fn chains(w: &WeightPair, family: &[Candidate], reports: &[TestingReport]) -> Result<Vec<Chain>, CliError> {
    let (mut ap_gap, mut half_gap) = (true, true);
    for c in family {
        let (full, half) = strengthened_values(w, &c.interval)?;
        ap_gap &= ap_value(w, &c.interval) <= 2.25 * full * (1.0 + 1e-12);
        half_gap &= half <= 1.5 * full * (1.0 + 1e-12);
    }
    let ap = estimate(reports, "ap");
    let st = estimate(reports, "strengthened_ap");
    let half = estimate(reports, "half_strengthened_ap");
    Ok(vec![
        Chain {
            name: "ap_le_nine_quarters_strengthened",
            lhs: ap,
            rhs: 2.25 * st,
            holds: ap_gap && ap <= 2.25 * st * (1.0 + 1e-12),
        },
        Chain {
            name: "half_le_three_halves_strengthened",
            lhs: half,
            rhs: 1.5 * st,
            holds: half_gap && half <= 1.5 * st * (1.0 + 1e-12),
        },
    ])
}

pub fn constants(ctx: &Context) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let w = cfg.weight_pair()?;
    let reports = all_reports(cfg, &w)?;
    let family = interval_family(&w, &cfg.budgets.family);
    let chains = chains(&w, &family, &reports)?;
    let verification = if ctx.verify {
        Some(verify_all(&w, &reports)?)
    } else {
        None
    };
    let report = json!({
        "p": w.p(),
        "seed": cfg.seed,
        "reports": reports,
        "chains": chains,
        "verification": verification,
    });
    ctx.write_json("constants.json", &report)?;
    for r in &reports {
        let unbounded = r.witness.get("unbounded").and_then(|v| v.as_bool()) == Some(true);
        println!(
            "{:<22} {:>14.6e}  converged={}{}",
            r.condition,
            r.estimate,
            r.converged,
            if unbounded { "  unbounded" } else { "" }
        );
    }
    for c in &chains {
        println!("chain {:<26} {}", c.name, if c.holds { "holds" } else { "FAILS" });
    }
    if let Some(v) = &verification {
        let bad: Vec<&str> = v.iter().filter(|x| !x.ok).map(|x| x.condition.as_str()).collect();
        if !bad.is_empty() {
            return Err(CliError::Failed(format!("witnesses not reproduced: {}", bad.join(", "))));
        }
        println!("witnesses reproduced: {}", v.len());
    }
    if chains.iter().any(|c| !c.holds) {
        return Err(CliError::Failed("condition chain violated".into()));
    }
    Ok(())
}

pub fn check(ctx: &Context, suite: &str) -> Result<(), CliError> {
    let report = run_checks(suite, &ctx.cfg.check_config()).map_err(|e| match e {
        tws_core::Error::InvalidParameter(m) => CliError::Config(m),
        e => CliError::Core(e),
    })?;
    ctx.write_json("check.json", &report)?;
    for s in &report.suites {
        for a in &s.assertions {
            let verdict = match (a.hard, a.passed) {
                (_, true) => "PASS",
                (true, false) => "FAIL",
                (false, false) => "WARN",
            };
            println!("{verdict} {}/{} {}", s.suite, a.name, a.measured);
        }
    }
    if report.passed {
        Ok(())
    } else {
        Err(CliError::Failed("hard assertion failed".into()))
    }
}

fn pair_reports(target: &str, w: &WeightPair, cfg: &ExperimentConfig) -> Result<(f64, Vec<TestingReport>), CliError> {
    let b = &cfg.budgets;
    let family = interval_family(w, &b.family);
    let coarse: Vec<Candidate> = family.iter().filter(|c| c.coarse).cloned().collect();
    let ratio = |a: &TestingReport, b: &TestingReport| {
        if b.estimate > 0.0 {
            a.estimate / b.estimate
        } else {
            f64::INFINITY
        }
    };
    Ok(match target {
        "strengthened_ratio" => {
            let ap = ap_constant(w, &family);
            let (st, _) = strengthened_ap(w, &family)?;
            (ratio(&st, &ap), vec![st, ap])
        }
        "pivotal_vs_dual" => {
            let pv = pivotal_search(w, &b.partition);
            let du = dual_testing(w, &coarse, &b.dual)?;
            (ratio(&pv, &du), vec![pv, du])
        }
        "poisson_vs_ap" => {
            let po = poisson_search(w, &b.partition);
            let ap = ap_constant(w, &family);
            (ratio(&po, &ap), vec![po, ap])
        }
        "ap" => {
            let r = ap_constant(w, &family);
            (r.estimate, vec![r])
        }
        "pivotal" => {
            let r = pivotal_search(w, &b.partition);
            (r.estimate, vec![r])
        }
        "dual_testing" => {
            let r = dual_testing(w, &coarse, &b.dual)?;
            (r.estimate, vec![r])
        }
        "forward_testing" => {
            let r = forward_testing(w, &coarse, &b.forward);
            (r.estimate, vec![r])
        }
        t => return Err(CliError::Config(format!("unknown search target `{t}`"))),
    })
}

pub fn search(ctx: &Context) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let s = &cfg.search;
    let mut findings = Vec::new();
    if s.top_k > 0 {
        for i in 0..s.count as u64 {
            let w = weight_pair(&s.corpus, cfg.p, cfg.seed, i).map_err(|e| CliError::Config(e.to_string()))?;
            let (ratio, reports) = pair_reports(&s.target, &w, cfg)?;
            let verification = if ctx.verify {
                Some(verify_all(&w, &reports)?)
            } else {
                None
            };
            findings.push((i, ratio, reports, verification, w));
        }
    } else {
        // validate the target even when nothing is kept
        let w = weight_pair(&s.corpus, cfg.p, cfg.seed, 0).map_err(|e| CliError::Config(e.to_string()))?;
        let _ = pair_reports(&s.target, &w, cfg)?;
    }
    findings.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    findings.truncate(s.top_k);
    let failed: Vec<u64> = findings
        .iter()
        .filter(|f| f.3.as_ref().is_some_and(|v| v.iter().any(|x| !x.ok)))
        .map(|f| f.0)
        .collect();
    let out: Vec<Value> = findings
        .iter()
        .map(|(i, ratio, reports, ver, w)| {
            json!({
                "index": i,
                "ratio": ratio,
                "reports": reports,
                "verification": ver,
                "sigma": w.sigma.to_file(),
                "omega": w.omega.to_file(),
            })
        })
        .collect();
    for f in &findings {
        println!("pair {:>4}  {} = {:.6e}", f.0, s.target, f.1);
    }
    ctx.write_json(
        "search.json",
        &json!({ "target": s.target, "seed": cfg.seed, "count": s.count, "findings": out }),
    )?;
    if !failed.is_empty() {
        return Err(CliError::Failed(format!("witnesses not reproduced for pairs {failed:?}")));
    }
    Ok(())
}

fn chosen_measure<'a>(w: &'a WeightPair, name: &str) -> Result<&'a StepAtomicMeasure, CliError> {
    match name {
        "sigma" => Ok(&w.sigma),
        "omega" => Ok(&w.omega),
        m => Err(CliError::Config(format!("unknown measure `{m}` (expected sigma or omega)"))),
    }
}

fn grid(lo: f64, hi: f64, n: usize, log: bool) -> Result<Vec<f64>, CliError> {
    if !(lo < hi) || n < 2 || (log && lo <= 0.0) {
        return Err(CliError::Config(format!(
            "bad sample grid [{lo}, {hi}] with {n} points (log = {log})"
        )));
    }
    Ok((0..n)
        .map(|i| {
            let t = i as f64 / (n - 1) as f64;
            if log {
                (lo.ln() + t * (hi.ln() - lo.ln())).exp()
            } else {
                lo + t * (hi - lo)
            }
        })
        .collect())
}

pub fn plotdata(ctx: &Context) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let pl = &cfg.plot;
    let w = cfg.weight_pair()?;
    let mut csv = String::new();
    match pl.quantity.as_str() {
        "t_natural" => {
            let mu = chosen_measure(&w, &pl.measure)?;
            let xs = grid(pl.lo, pl.hi, pl.points, pl.log)?;
            let vals = t_natural_many(mu, &xs, &pl.search);
            csv.push_str("x,t_natural\n");
            for (x, v) in xs.iter().zip(vals) {
                writeln!(csv, "{x},{}", v.value).expect("string write");
            }
        }
        "poisson" => {
            let mu = chosen_measure(&w, &pl.measure)?;
            if !(pl.length > 0.0) {
                return Err(CliError::Config("plot.length must be positive".into()));
            }
            let xs = grid(pl.lo, pl.hi, pl.points, pl.log)?;
            csv.push_str("x,poisson_std,poisson_bold\n");
            for x in xs {
                let q = Interval::centered(x, pl.length)?;
                writeln!(
                    csv,
                    "{x},{},{}",
                    poisson_std(&q, mu),
                    poisson_bold(&q, mu, &DiniModulus::Linear)
                )
                .expect("string write");
            }
        }
        "superlevel" => {
            let mu = chosen_measure(&w, &pl.measure)?;
            let mesh = pl.mesh_scale.unwrap_or(mu.resolution() + 2);
            csv.push_str("level,left,right\n");
            for &k in &pl.levels {
                let set = superlevel_set(mu, k, mesh, &pl.search)?;
                for c in set.components() {
                    writeln!(csv, "{k},{},{}", c.left, c.right).expect("string write");
                }
            }
        }
        "condition_scale" => {
            csv.push_str("scale,ap,strengthened_ap\n");
            if let Some((lo, hi)) = w.support_bounds() {
                let top = (hi - lo).log2().ceil() as i32 + 1;
                for j in (-w.resolution()..=top).rev() {
                    let (mut a, mut s) = (0.0f64, 0.0f64);
                    for q in grid_cubes(tws_core::dyadic::Shift::Zero, lo, hi, j) {
                        let q = q.interval();
                        a = a.max(ap_value(&w, &q));
                        s = s.max(strengthened_values(&w, &q)?.0);
                    }
                    writeln!(csv, "{j},{a},{s}").expect("string write");
                }
            }
        }
        q => return Err(CliError::Config(format!("unknown plot quantity `{q}`"))),
    }
    ctx.write_csv(&csv)?;
    print!("{csv}");
    Ok(())
}

pub fn whitney(ctx: &Context) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let ws = &cfg.whitney;
    let w = cfg.weight_pair()?;
    let mu = chosen_measure(&w, &ws.measure)?;
    let mesh = ws.mesh_scale.unwrap_or(mu.resolution() + 2);
    let omega = superlevel_set(mu, ws.level, mesh, &ws.search)?;
    let wd = decomp::whitney(&omega, ws.level, &ws.params)?;
    let chk = verify_whitney(&wd);
    println!(
        "{} cubes, overlap {}, residual {}, properties {}",
        chk.cubes,
        chk.overlap,
        wd.residual,
        if chk.holds(64) { "hold" } else { "FAIL" }
    );
    ctx.write_json("whitney.json", &json!({ "decomposition": wd, "check": chk }))?;
    if chk.holds(64) {
        Ok(())
    } else {
        Err(CliError::Failed("Whitney properties violated".into()))
    }
}

pub fn cz(ctx: &Context) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let c = &cfg.cz;
    let w = cfg.weight_pair()?;
    let Some(src) = &c.f else {
        return Err(CliError::Config("cz needs `cz.f` with resolution and values".into()));
    };
    let f = StepFunction::new(src.resolution, src.values.iter().copied().collect());
    let gamma = match c.gamma {
        Some(g) => g,
        None => tree_doubling(&w.sigma, c.shift, -w.sigma.resolution())?,
    };
    let split = cz_split(&f, &w.sigma, gamma, c.t, c.shift, c.depth)?;
    let chk = verify_cz(&split, &f, &w.sigma);
    println!(
        "{} principal cubes above γ^t = {} ({} of them roots), unresolved {}, invariants {}",
        split.principal.len(),
        split.threshold,
        split.principal.iter().filter(|g| g.top).count(),
        split.unresolved,
        if chk.holds() { "hold" } else { "FAIL" }
    );
    ctx.write_json("cz.json", &json!({ "decomposition": split, "check": chk }))?;
    if chk.holds() {
        Ok(())
    } else {
        Err(CliError::Failed("CZ invariants violated".into()))
    }
}
