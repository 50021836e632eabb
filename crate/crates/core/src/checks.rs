//! Property and inequality suites over the seeded corpus. Every assertion
//! records the constants it measured; hard assertions decide the verdict.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::conditions::{
    ap_constant, ap_value, asym_ap, coarse_subset, doubling_gamma, dual_necessity_probe, dual_testing, forward_testing,
    interval_family, kernel_lower_bound, level_check, mass_cells, maximal_norms, neccinequ_check, pivotal_search,
    poisson_search, seeded, strengthened_ap, strengthened_values, verify_witness, DualBudget, FamilySpec,
    ForwardBudget, MaximalBudget, PartitionSearch, TestingReport,
};
use crate::corpus::{random_partition, spread_step_function, step_function, weight_pair, CorpusSpec};
use crate::decomp::{
    comparability, cz_split, good_lambda_check, max_principle_check, nested_good_ratio, nested_violations,
    principal_summability, root_height, shifted_chain, chain_params, superlevel_set, tree_doubling, verify_cz, verify_whitney, whitney,
    Ratio, WhitneyDecomposition, WhitneyParams,
};
use crate::dyadic::{besicovitch_maximal, locate, select_shifted_grid, smallest_covering, DyadicInterval, Shift};
use crate::error::{Error, Result};
use crate::measure::{pow2, Interval, Measure, StepAtomicMeasure, WeightPair};
use crate::operators::{
    dyadic_maximal, maximal_fn, t_flat, t_natural, t_trunc, Linearization, SearchBudget, TruncationParams,
};
use crate::poisson::{
    largest_grid_interval_in, m_sup, poisson_bold, poisson_dyadic, poisson_redef, poisson_std, DiniModulus,
};

pub const SUITES: [&str; 7] = [
    "measure",
    "dyadic",
    "operators",
    "poisson",
    "conditions",
    "decomp",
    "inequalities",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CheckConfig {
    pub seed: u64,
    pub p: f64,
    /// Weight pairs per assertion; sample counts scale with it.
    pub instances: usize,
    pub corpus: CorpusSpec,
    pub search: SearchBudget,
    pub whitney: WhitneyParams,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            p: 2.0,
            instances: 6,
            corpus: CorpusSpec::default(),
            search: SearchBudget::with_density(16),
            whitney: WhitneyParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    /// Hard assertions fail the run; soft ones only report constants.
    pub hard: bool,
    pub passed: bool,
    pub instances: usize,
    pub measured: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub passed: bool,
    pub assertions: Vec<Assertion>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub seed: u64,
    pub passed: bool,
    pub suites: Vec<SuiteReport>,
}

fn hard(name: &str, passed: bool, instances: usize, measured: Value) -> Assertion {
    Assertion {
        name: name.into(),
        hard: true,
        passed,
        instances,
        measured,
    }
}

fn soft(name: &str, passed: bool, instances: usize, measured: Value) -> Assertion {
    Assertion {
        hard: false,
        ..hard(name, passed, instances, measured)
    }
}

/// Runs one suite, or every suite for `"all"`.
pub fn run_checks(suite: &str, cfg: &CheckConfig) -> Result<CheckReport> {
    let names: Vec<&str> = match suite {
        "all" => SUITES.to_vec(),
        s if SUITES.contains(&s) => vec![s],
        s => return Err(Error::InvalidParameter(format!("unknown suite `{s}`"))),
    };
    cfg.corpus.validate()?;
    if !(cfg.p > 1.0 && cfg.p.is_finite()) {
        return Err(Error::InvalidExponent(cfg.p));
    }
    let mut suites = Vec::new();
    for name in names {
        let assertions = match name {
            "measure" => suite_measure(cfg)?,
            "dyadic" => suite_dyadic(cfg)?,
            "operators" => suite_operators(cfg)?,
            "poisson" => suite_poisson(cfg)?,
            "conditions" => suite_conditions(cfg)?,
            "decomp" => suite_decomp(cfg)?,
            _ => suite_inequalities(cfg)?,
        };
        suites.push(SuiteReport {
            suite: name.into(),
            passed: assertions.iter().all(|a| a.passed || !a.hard),
            assertions,
        });
    }
    Ok(CheckReport {
        seed: cfg.seed,
        passed: suites.iter().all(|s| s.passed),
        suites,
    })
}

fn pairs(cfg: &CheckConfig, salt: u64) -> Result<Vec<WeightPair>> {
    (0..cfg.instances as u64)
        .map(|i| weight_pair(&cfg.corpus, cfg.p, cfg.seed ^ salt, i))
        .collect()
}

/// A point of the `2^{−20}` lattice in `[lo, hi)`.
fn lattice_point(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let s = pow2(20);
    let a = (lo * s).ceil() as i64;
    let b = ((hi * s).floor() as i64).max(a + 1);
    rng.gen_range(a..b) as f64 / s
}

/// A lattice interval meeting `[lo − pad, hi + pad)`.
fn random_interval(rng: &mut ChaCha8Rng, lo: f64, hi: f64, pad: f64) -> Interval {
    let a = lattice_point(rng, lo - pad, hi + pad);
    let len = pow2(rng.gen_range(-8..=4)) * rng.gen_range(1..16) as f64 / 8.0;
    Interval::raw(a, a + len)
}

fn random_cube(rng: &mut ChaCha8Rng, shift: Shift, lo: f64, hi: f64) -> DyadicInterval {
    let x = rng.gen_range(lo..hi);
    locate(shift, x, rng.gen_range(-6..=3))
}

fn max_of(v: impl Iterator<Item = f64>) -> f64 {
    v.fold(0.0, f64::max)
}

fn rel_le(a: f64, b: f64, tol: f64) -> bool {
    a <= b + tol * b.abs().max(f64::MIN_POSITIVE)
}

fn suite_measure(cfg: &CheckConfig) -> Result<Vec<Assertion>> {
    let ws = pairs(cfg, 0x11)?;
    let mut rng = seeded(cfg.seed, 0x11);
    let mut out = Vec::new();

    let mut splits = 0;
    let mut exact = true;
    for w in &ws {
        let (lo, hi) = w.support_bounds().expect("corpus pairs are nonzero");
        for _ in 0..200 {
            let q = random_interval(&mut rng, lo, hi, 1.0);
            let c = lattice_point(&mut rng, q.left, q.right);
            if c <= q.left {
                continue;
            }
            for mu in [&w.sigma, &w.omega] {
                let whole = mu.mass(&q);
                let parts = mu.mass(&Interval::raw(q.left, c)) + mu.mass(&Interval::raw(c, q.right));
                exact &= whole.to_bits() == parts.to_bits();
            }
            splits += 1;
        }
    }
    out.push(hard("mass_additivity", exact, splits, json!({ "splits": splits })));

    let mut ok = true;
    let mut n = 0;
    for w in &ws {
        let (lo, hi) = w.support_bounds().expect("nonzero");
        let both = w.sigma.measure().add(w.omega.measure());
        for _ in 0..20 {
            let q = random_interval(&mut rng, lo, hi, 1.0);
            for e in [1.0, w.p(), w.p_dual()] {
                let a = w.sigma.integrate_power_kernel(&q, e)?;
                let b = both.integrate_power_kernel(&q, e)?;
                ok &= rel_le(a, b, 1e-12) && rel_le(a, w.sigma.total_mass(), 1e-12);
                n += 1;
            }
        }
    }
    out.push(hard("power_kernel_monotone_and_bounded", ok, n, json!({ "evaluations": n })));

    let mut ok = true;
    for w in &ws {
        let (lo, hi) = w.support_bounds().expect("nonzero");
        let cut = lattice_point(&mut rng, lo + (hi - lo) / 4.0, hi);
        let left = w.sigma.restrict(&[Interval::raw(lo - 1.0, cut)]);
        if left.is_zero() {
            continue;
        }
        let xs = [cut + 0.25, cut + 0.5, cut + 1.0];
        let h: Vec<f64> = xs
            .iter()
            .map(|&x| left.hilbert_off_support(x, 0.125).map(|v| -v))
            .collect::<Result<_>>()?;
        ok &= h[0] < h[1] && h[1] < h[2];
    }
    out.push(hard("hilbert_increasing_right_of_support", ok, ws.len(), json!({})));

    let mut worst: f64 = 0.0;
    let take = ws.len().min(2);
    for w in &ws[..take] {
        let (lo, hi) = w.support_bounds().expect("nonzero");
        let q = random_interval(&mut rng, lo, hi, 0.5);
        let e = w.p_dual();
        let exact = w.sigma.measure().integrate_power_kernel(&q, e)?;
        let brute = midpoint_power_kernel(&w.sigma, &q, e, 20);
        worst = worst.max((exact - brute).abs() / exact.abs().max(f64::MIN_POSITIVE));
    }
    out.push(hard(
        "power_kernel_vs_midpoint",
        worst <= 1e-6,
        take,
        json!({ "max_relative_error": worst }),
    ));
    Ok(out)
}

/// Midpoint rule at mesh `2^{−level}` for `∫ s_Q^e dμ`; atoms exactly.
fn midpoint_power_kernel(mu: &StepAtomicMeasure, q: &Interval, e: f64, level: i32) -> f64 {
    let s = |x: f64| q.length() / (q.length() + (x - q.center()).abs());
    let h = pow2(-level);
    let per_cell = 1usize << (level - mu.resolution()).max(0);
    let sub = mu.cell_length() / per_cell as f64;
    let cells: Vec<(i64, f64)> = mu.cells().iter().map(|(&k, &d)| (k, d)).collect();
    let dens: f64 = cells
        .par_iter()
        .map(|&(k, d)| {
            let left = k as f64 * mu.cell_length();
            let mut acc = 0.0;
            for i in 0..per_cell {
                acc += s(left + (i as f64 + 0.5) * sub).powf(e);
            }
            d * acc * sub
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    debug_assert!(sub <= h);
    dens + mu.atoms().iter().map(|a| a.mass * s(a.position).powf(e)).sum::<f64>()
}

fn suite_dyadic(cfg: &CheckConfig) -> Result<Vec<Assertion>> {
    let mut rng = seeded(cfg.seed, 0x22);
    let mut out = Vec::new();
    let samples = 500 * cfg.instances;

    let mut ok = true;
    for _ in 0..samples {
        let shift = Shift::ALL[rng.gen_range(0..3)];
        let a = random_cube(&mut rng, shift, -4.0, 4.0);
        let b = random_cube(&mut rng, shift, a.left() - 1.0, a.right() + 1.0);
        let (al, ar, bl, br) = (a.left_exact(), a.right_exact(), b.left_exact(), b.right_exact());
        let disjoint = ar <= bl || br <= al;
        let a_in_b = bl <= al && ar <= br;
        let b_in_a = al <= bl && br <= ar;
        ok &= disjoint || a_in_b || b_in_a;
    }
    out.push(hard("grid_property", ok, samples, json!({})));

    let mut ok = true;
    for _ in 0..samples {
        let shift = Shift::ALL[rng.gen_range(0..3)];
        let q = random_cube(&mut rng, shift, -4.0, 4.0);
        let (l1, l2) = (rng.gen_range(0..8), rng.gen_range(0..8));
        ok &= q.ancestor(l1 + l2) == q.ancestor(l1).ancestor(l2);
    }
    out.push(hard("ancestor_consistency", ok, samples, json!({})));

    let (ok, ratio, bound) = shifted_dilation(&mut rng, samples);
    out.push(hard(
        "shifted_grid_selection",
        ok && ratio.is_finite(),
        samples,
        json!({ "max_ratio": ratio, "max_dilation_bound": bound }),
    ));

    let (ok, worst) = besicovitch_trials(&mut rng, 10 * cfg.instances, 3)?;
    out.push(hard(
        "besicovitch_overlap",
        ok,
        10 * cfg.instances,
        json!({ "m": 3, "max_overlap": worst }),
    ));
    Ok(out)
}

/// `(3Q ⊆ Q̂ always, max |Q̂|/|Q|, max dilation bound)`.
pub fn shifted_dilation(rng: &mut ChaCha8Rng, samples: usize) -> (bool, f64, f64) {
    let mut ok = true;
    let (mut ratio, mut bound): (f64, f64) = (0.0, 0.0);
    for _ in 0..samples {
        let q = random_interval(rng, -8.0, 8.0, 0.0);
        let sel = select_shifted_grid(&q);
        ok &= sel.hat.contains_interval(&q.dilate(3.0));
        ratio = ratio.max(sel.ratio);
        bound = bound.max(sel.dilation_bound);
    }
    (ok, ratio, bound)
}

/// Random `D^0` families; the output dilates `m·Q` must overlap at most
/// `m` times at every point of a mesh finer than all cubes.
pub fn besicovitch_trials(rng: &mut ChaCha8Rng, trials: usize, m: u32) -> Result<(bool, usize)> {
    let mut worst = 0;
    for _ in 0..trials {
        let n = rng.gen_range(1..40);
        let cubes: Vec<DyadicInterval> = (0..n)
            .map(|_| locate(Shift::Zero, rng.gen_range(0.0..4.0), rng.gen_range(-7..=0)))
            .collect();
        let kept = besicovitch_maximal(&cubes, m)?;
        let dil: Vec<Interval> = kept.iter().map(|q| q.dilate(m as f64)).collect();
        let h = pow2(-10);
        let (lo, hi) = (-4.0, 8.0);
        let steps = ((hi - lo) / h) as usize;
        for i in 0..steps {
            let x = lo + (i as f64 + 0.5) * h;
            let c = dil.iter().filter(|d| d.contains(x)).count();
            worst = worst.max(c);
        }
    }
    Ok((worst <= m as usize, worst))
}

fn sample_points(rng: &mut ChaCha8Rng, w: &WeightPair, n: usize) -> Vec<f64> {
    let (lo, hi) = w.support_bounds().expect("nonzero");
    let span = hi - lo;
    (0..n)
        .map(|_| lattice_point(rng, lo - span / 2.0, hi + span / 2.0) + pow2(-22))
        .collect()
}

fn suite_operators(cfg: &CheckConfig) -> Result<Vec<Assertion>> {
    let ws = pairs(cfg, 0x33)?;
    let mut rng = seeded(cfg.seed, 0x33);
    let mut out = Vec::new();
    let budget = &cfg.search;

    let c_dom = domination_constant(&ws, &mut rng, 12, budget)?;
    out.push(soft(
        "maximal_dominated_by_t_natural",
        c_dom.is_finite(),
        ws.len(),
        json!({ "c_dom": c_dom }),
    ));

    let mut flat_ok = true;
    let mut trunc_ratio: f64 = 0.0;
    let mut gap: f64 = 0.0;
    let mut n = 0;
    for w in &ws {
        let nu = w.sigma.measure();
        let xs = sample_points(&mut rng, w, 8);
        let rows: Vec<(f64, f64, f64, f64)> = xs
            .par_iter()
            .map(|&x| {
                let nat = t_natural(nu, x, budget).value;
                let flat = t_flat(nu, x, budget).value;
                let m = maximal_fn(nu, x).map(|v| v.value).unwrap_or(0.0);
                let mut r = seeded(x.to_bits(), 0x33);
                let mut worst: f64 = 0.0;
                for _ in 0..8 {
                    let e1 = pow2(r.gen_range(-8..2)) * r.gen_range(1.0..2.0);
                    let e2 = e1 * r.gen_range(0.3..3.0);
                    let rr = e1.max(e2) * pow2(r.gen_range(1..8));
                    if let Ok(tp) = TruncationParams::new(e1, e2, rr) {
                        if tp.is_admissible() && nat > 0.0 {
                            worst = worst.max(t_trunc(nu, x, &tp).abs() / nat);
                        }
                    }
                }
                (nat, flat, m, worst)
            })
            .collect();
        for (nat, flat, m, worst) in rows {
            flat_ok &= flat <= nat;
            trunc_ratio = trunc_ratio.max(worst);
            if m > 0.0 {
                gap = gap.max((nat - flat).abs() / m);
            }
            n += 1;
        }
    }
    out.push(hard("t_flat_le_t_natural", flat_ok, n, json!({})));
    out.push(soft(
        "t_trunc_le_t_natural",
        trunc_ratio <= 1.0 + crate::conditions::CONVERGENCE_TOL,
        n,
        json!({ "max_ratio": trunc_ratio }),
    ));
    out.push(soft(
        "natural_flat_gap",
        gap.is_finite(),
        n,
        json!({ "c": gap }),
    ));

    let holder = lstar_holder_constant(&ws, &mut rng, budget)?;
    out.push(soft(
        "adjoint_holder_continuity",
        holder.is_finite(),
        ws.len(),
        json!({ "c": holder }),
    ));

    let (ok, worst, bound) = maximal_theorem(&ws, &mut rng)?;
    out.push(hard(
        "dyadic_maximal_theorem",
        ok,
        ws.len(),
        json!({ "max_ratio": worst, "bound": bound }),
    ));
    Ok(out)
}

/// `max 𝓜ν(x) / T♮ν(x)` over sample points, `ν = σ` of each pair.
pub fn domination_constant(
    ws: &[WeightPair],
    rng: &mut ChaCha8Rng,
    per_pair: usize,
    budget: &SearchBudget,
) -> Result<f64> {
    let mut c: f64 = 0.0;
    for w in ws {
        let nu = w.sigma.measure();
        let xs = sample_points(rng, w, per_pair);
        let r: Vec<f64> = xs
            .par_iter()
            .map(|&x| {
                let m = maximal_fn(nu, x)?.value;
                let t = t_natural(nu, x, budget).value;
                Ok(if m == 0.0 { 0.0 } else { m / t })
            })
            .collect::<Result<_>>()?;
        c = c.max(max_of(r.into_iter()));
    }
    Ok(c)
}

/// `max |L*μ(y) − L*μ(y′)| / (𝐏(Q,μ) |y − y′|/ℓ(Q))` for atomic `μ` off
/// `3Q` and selections from the `T♮σ` argmax.
fn lstar_holder_constant(ws: &[WeightPair], rng: &mut ChaCha8Rng, budget: &SearchBudget) -> Result<f64> {
    let mut c: f64 = 0.0;
    for w in ws {
        let (lo, hi) = w.support_bounds().expect("nonzero");
        let q = locate(Shift::Zero, rng.gen_range(lo..hi), rng.gen_range(-4..=0)).interval();
        let triple = q.dilate(3.0);
        let atoms: Vec<crate::measure::Atom> = (0..6)
            .map(|_| {
                let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                let d = triple.length() / 2.0 + rng.gen_range(0.01..4.0) * q.length();
                crate::measure::Atom {
                    position: q.center() + side * d,
                    mass: rng.gen_range(-1.0..1.0),
                }
            })
            .collect();
        let mu = Measure::new(Vec::new(), atoms.clone(), true)?;
        let points: Vec<f64> = atoms.iter().map(|a| a.position).collect();
        let lin = Linearization::from_argmax(w.sigma.measure(), points, budget);
        let pq = poisson_bold(&q, &mu, &DiniModulus::Linear);
        if pq == 0.0 {
            continue;
        }
        for _ in 0..8 {
            let y = rng.gen_range(q.left..q.right);
            let y2 = rng.gen_range(q.left..q.right);
            if y == y2 {
                continue;
            }
            let d = (lin.adjoint(&mu, y)? - lin.adjoint(&mu, y2)?).norm();
            c = c.max(d / (pq * (y - y2).abs() / q.length()));
        }
    }
    Ok(c)
}

/// `∫(𝓜^dy_σ f)^p dσ / ∫|f|^p dσ` against `2(p′)^p` in `D^0`. The maximal
/// function is constant on measure cells, so cell centers suffice.
pub fn maximal_theorem(ws: &[WeightPair], rng: &mut ChaCha8Rng) -> Result<(bool, f64, f64)> {
    let mut worst: f64 = 0.0;
    let mut bound: f64 = 0.0;
    for w in ws {
        let mu = &w.sigma;
        let f = step_function(rng, mu, 4.0, true);
        let p = w.p();
        let b = 2.0 * w.p_dual().powf(p);
        bound = bound.max(b);
        let den = f.lp_norm_pow(mu, p);
        if den == 0.0 {
            continue;
        }
        let h = mu.cell_length();
        let cells: Vec<i64> = mu.cells().keys().copied().collect();
        let terms: Vec<f64> = cells
            .par_iter()
            .map(|&k| {
                let x = (k as f64 + 0.5) * h;
                let m = dyadic_maximal(mu, &f, x, Shift::Zero)?;
                let cell = Interval::raw(k as f64 * h, (k + 1) as f64 * h);
                Ok(m.powf(p) * mu.mass(&cell))
            })
            .collect::<Result<_>>()?;
        let r = terms.iter().sum::<f64>() / den;
        if r > b {
            return Ok((false, r, b));
        }
        worst = worst.max(r);
    }
    Ok((true, worst, bound))
}

fn suite_poisson(cfg: &CheckConfig) -> Result<Vec<Assertion>> {
    let ws = pairs(cfg, 0x44)?;
    let mut rng = seeded(cfg.seed, 0x44);
    let mut out = Vec::new();
    let lin = DiniModulus::Linear;

    let mut c: f64 = 0.0;
    let (mut rmin, mut rmax) = (f64::INFINITY, 0.0f64);
    let mut homog = true;
    let mut mono = true;
    let mut n = 0;
    for w in &ws {
        let (lo, hi) = w.support_bounds().expect("nonzero");
        let nu = w.sigma.measure();
        let more = nu.add(w.omega.measure());
        let scaled = nu.scaled(4.0);
        for _ in 0..20 {
            let d = random_cube(&mut rng, Shift::Zero, lo, hi);
            let q = d.interval();
            let pb = poisson_bold(&q, nu, &lin);
            let ms = m_sup(&q, nu);
            if ms > 0.0 {
                c = c.max(pb / ms);
            }
            let ps = poisson_std(&q, nu);
            let dy: f64 = Shift::ALL
                .iter()
                .map(|&s| poisson_dyadic(&largest_grid_interval_in(&q, s), nu))
                .collect::<Result<Vec<f64>>>()?
                .iter()
                .sum();
            if dy > 0.0 && ps > 0.0 {
                rmin = rmin.min(ps / dy);
                rmax = rmax.max(ps / dy);
            }
            // endpoints off every atom position (atoms sit at quarter points)
            let i = Interval::raw(q.left + pow2(-24), q.right + pow2(-24));
            let values = |m: &Measure| -> Result<[f64; 4]> {
                Ok([
                    poisson_bold(&q, m, &lin),
                    poisson_std(&q, m),
                    poisson_dyadic(&d, m)?,
                    poisson_redef(&i, m)?,
                ])
            };
            let (v, v4, vm) = (values(nu)?, values(&scaled)?, values(&more)?);
            for k in 0..4 {
                homog &= v4[k] == 4.0 * v[k];
                mono &= rel_le(v[k], vm[k], 1e-12);
            }
            n += 1;
        }
    }
    out.push(soft(
        "bold_vs_sup_average",
        c.is_finite(),
        n,
        json!({ "c": c }),
    ));
    out.push(hard(
        "grid_comparability",
        rmin >= 1.0 / 64.0 && rmax <= 64.0,
        n,
        json!({ "min_ratio": rmin, "max_ratio": rmax }),
    ));
    out.push(hard("homogeneous_degree_one", homog, n, json!({ "factor": 4.0 })));
    out.push(hard("monotone_in_measure", mono, n, json!({})));
    Ok(out)
}

fn small_family(w: &WeightPair, seed: u64) -> Vec<crate::conditions::Candidate> {
    interval_family(
        w,
        &FamilySpec {
            depth: 6,
            random: 64,
            seed,
            shifted: true,
        },
    )
}

fn reports_for(w: &WeightPair, seed: u64) -> Result<Vec<TestingReport>> {
    let fam = small_family(w, seed);
    let (st, half) = strengthened_ap(w, &fam)?;
    let search = PartitionSearch {
        root_levels: 2,
        exhaustive_depth: 3,
        max_depth: 5,
        max_pieces: 32,
    };
    let coarse = coarse_subset(&fam, 16);
    let (m, md) = maximal_norms(
        w,
        &coarse,
        &MaximalBudget {
            probes: 2,
            max_cells: 16,
            seed,
        },
    )?;
    Ok(vec![
        ap_constant(w, &fam),
        st,
        half,
        pivotal_search(w, &search),
        poisson_search(w, &search),
        forward_testing(
            w,
            &coarse,
            &ForwardBudget {
                subsets: 2,
                greedy_steps: 0,
                max_cells: 8,
                search: SearchBudget::with_density(8),
                seed,
            },
        ),
        dual_testing(
            w,
            &coarse,
            &DualBudget {
                patterns: 2,
                perturbations: 1,
                max_cells: 8,
                search: SearchBudget::with_density(8),
                seed,
            },
        )?,
        doubling_gamma("doubling_sigma", &w.sigma, &fam, None),
        doubling_gamma("doubling_omega", &w.omega, &fam, None),
        m,
        md,
        asym_ap(w, 4.0, &fam)?,
    ])
}

fn suite_conditions(cfg: &CheckConfig) -> Result<Vec<Assertion>> {
    let ws = pairs(cfg, 0x55)?;
    let mut rng = seeded(cfg.seed, 0x55);
    let mut out = Vec::new();

    let take = ws.len().min(2);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for w in &ws[..take] {
        for r in reports_for(w, cfg.seed)? {
            let v = verify_witness(w, &r)?;
            let err = (v - r.estimate).abs() / r.estimate.abs().max(1.0);
            if r.estimate.is_finite() {
                worst = worst.max(err);
            }
            checked += 1;
        }
    }
    out.push(hard(
        "witness_reproducible",
        worst <= 1e-9,
        checked,
        json!({ "max_relative_error": worst }),
    ));

    let mut mono = true;
    for w in &ws {
        let mut last = 0.0;
        for depth in [4, 6, 8] {
            let fam = interval_family(
                w,
                &FamilySpec {
                    depth,
                    random: 0,
                    seed: 0,
                    shifted: true,
                },
            );
            let e = ap_constant(w, &fam).estimate;
            mono &= e >= last;
            last = e;
        }
    }
    out.push(hard("estimate_monotone_in_family", mono, ws.len(), json!({})));

    let mut chain_ap = true;
    let mut chain_half = true;
    let mut half_ratio: f64 = 0.0;
    let mut n = 0;
    for w in &ws {
        for c in small_family(w, cfg.seed) {
            let (full, half) = strengthened_values(w, &c.interval)?;
            chain_ap &= rel_le(ap_value(w, &c.interval), 2.25 * full, 1e-12);
            chain_half &= rel_le(half, 1.5 * full, 1e-12);
            if full > 0.0 {
                half_ratio = half_ratio.max(half / full);
            }
            n += 1;
        }
    }
    out.push(hard("ap_le_nine_quarters_strengthened", chain_ap, n, json!({})));
    out.push(hard(
        "half_le_three_halves_strengthened",
        chain_half,
        n,
        json!({ "max_half_over_full": half_ratio }),
    ));

    let (ok, ratio, probes) = dual_necessity_trials(&ws, &mut rng, &cfg.search);
    out.push(hard(
        "dual_testing_from_weak_type",
        ok,
        probes,
        json!({ "max_lhs_over_bound": ratio }),
    ));
    Ok(out)
}

/// Each probe `f` on a coarse family cube: `∫_Q T♮(χ_Q fσ) dω` against
/// `p′ C ω(Q)^{1/p′}‖f‖`.
pub fn dual_necessity_trials(ws: &[WeightPair], rng: &mut ChaCha8Rng, search: &SearchBudget) -> (bool, f64, usize) {
    let mut ok = true;
    let mut ratio: f64 = 0.0;
    let mut probes = 0;
    for w in ws {
        let fam: Vec<_> = small_family(w, 0).into_iter().filter(|c| c.coarse).collect();
        for _ in 0..3 {
            let q = fam[rng.gen_range(0..fam.len())].interval;
            let (res, cells) = mass_cells(&w.sigma, &q, 8);
            if cells.is_empty() {
                continue;
            }
            let f: Vec<(i64, f64)> = cells
                .iter()
                .map(|&k| (k, if rng.gen_bool(0.5) { 1.0 } else { -1.0 } * rng.gen_range(0.1..1.0)))
                .collect();
            let d = dual_necessity_probe(w, &q, res, &f, search);
            ok &= rel_le(d.lhs, d.bound, 1e-12);
            if d.bound > 0.0 {
                ratio = ratio.max(d.lhs / d.bound);
            }
            probes += 1;
        }
    }
    (ok, ratio, probes)
}

/// Center-sampled superlevel sets of `T♮σ` at three heights around the
/// mean density, on a mesh two scales finer than σ.
fn superlevels(w: &WeightPair, search: &SearchBudget) -> Result<Vec<(i32, crate::decomp::CellSet)>> {
    let (lo, hi) = w.support_bounds().expect("nonzero");
    let mean = w.sigma.total_mass() / (hi - lo);
    let k0 = mean.log2().round() as i32;
    let mesh = w.sigma.resolution() + 2;
    [k0, k0 + 1, k0 + 2]
        .iter()
        .map(|&k| Ok((k, superlevel_set(w.sigma.measure(), k, mesh, search)?)))
        .collect()
}

fn suite_decomp(cfg: &CheckConfig) -> Result<Vec<Assertion>> {
    let ws = pairs(cfg, 0x66)?;
    let mut rng = seeded(cfg.seed, 0x66);
    let mut out = Vec::new();

    let mut all_hold = true;
    let mut overlap = 0;
    let mut crowd = 0;
    let mut residual: f64 = 0.0;
    let mut nested = 0;
    let mut chain_ok = true;
    let mut required_n: f64 = 0.0;
    let mut chain_m = 0;
    let (mut chain_rw, mut chain_n) = (0, 0);
    let (mut cmin, mut cmax) = (f64::INFINITY, 0.0f64);
    let mut decomps = 0;
    let mut mp_c: f64 = 0.0;
    let mut mp_flagged = 0;
    for w in &ws {
        let sets = superlevels(w, &cfg.search)?;
        let mut built: Vec<WhitneyDecomposition> = Vec::new();
        for (k, omega) in &sets {
            if omega.is_empty() {
                continue;
            }
            let wd = whitney(omega, *k, &cfg.whitney)?;
            let chk = verify_whitney(&wd);
            all_hold &= chk.holds(64);
            overlap = overlap.max(chk.overlap);
            crowd = crowd.max(chk.crowd);
            residual = residual.max(wd.residual);
            let m = shifted_chain(&wd)?.m;
            let cp = chain_params(&cfg.whitney, m);
            let ch = shifted_chain(&whitney(omega, *k, &cp)?)?;
            chain_ok &= ch.holds() && ch.derived_n.is_some_and(|d| ch.required_n <= d as f64);
            required_n = required_n.max(ch.required_n);
            chain_m = chain_m.max(ch.m);
            chain_rw = chain_rw.max(cp.rw.num);
            chain_n = chain_n.max(cp.n.num);
            let (c0, c1) = cross_grid_comparability(&wd)?;
            cmin = cmin.min(c0);
            cmax = cmax.max(c1);
            decomps += 1;
            built.push(wd);
        }
        nested += nested_violations(&built);
        if let Some(wd) = built.first() {
            let r = max_principle_check(w.sigma.measure(), wd, 2, &cfg.search, &DiniModulus::Linear);
            mp_c = mp_c.max(r.c);
            mp_flagged += r.flagged;
        }
    }
    out.push(hard(
        "whitney_properties",
        all_hold && overlap <= 64,
        decomps,
        json!({ "n": cfg.whitney.n.value(), "max_overlap": overlap, "max_crowd": crowd, "max_residual": residual }),
    ));
    out.push(hard("whitney_nested", nested == 0, decomps, json!({ "violations": nested })));
    out.push(hard(
        "shifted_whitney_chain",
        chain_ok,
        decomps,
        json!({ "m": chain_m, "rw": chain_rw, "n": chain_n, "required_n": required_n }),
    ));
    out.push(hard(
        "whitney_comparability",
        decomps == 0 || (cmin >= 1.0 / 32.0 && cmax <= 32.0),
        decomps,
        json!({ "min_ratio": cmin, "max_ratio": cmax }),
    ));
    out.push(soft(
        "maximum_principle",
        mp_c.is_finite() && mp_flagged == 0,
        ws.len(),
        json!({ "c": mp_c, "flagged": mp_flagged }),
    ));

    let (cz_ok, cz_meas) = cz_trials(&ws, &mut rng, cfg.p)?;
    out.push(hard("cz_invariants", cz_ok, ws.len(), cz_meas));

    let mut gl = Vec::new();
    for w in ws.iter().take(2) {
        let f = step_function(&mut rng, &w.sigma, 2.0, false);
        let tstar = dual_testing(
            w,
            &coarse_subset(&small_family(w, cfg.seed), 16),
            &DualBudget {
                patterns: 2,
                perturbations: 1,
                max_cells: 8,
                search: SearchBudget::with_density(8),
                seed: cfg.seed,
            },
        )?
        .estimate;
        let k = (f.max_abs().log2().floor() as i32).max(-4);
        for beta in [0.25, 0.0625] {
            let g = good_lambda_check(w, &f, beta, k, w.resolution() + 2, &cfg.search)?;
            let comb = beta * tstar.powf(w.p()) * g.term1 + g.term2;
            let c = if comb > 0.0 { g.lhs / comb } else { 0.0 };
            gl.push(json!({ "beta": beta, "lhs": g.lhs, "term1": g.term1, "term2": g.term2, "t_star": tstar, "c": c }));
        }
    }
    out.push(soft("good_lambda", true, gl.len(), Value::Array(gl)));
    Ok(out)
}

/// `(min, max)` of `ℓ(Q)/ℓ(B)` between the `D^0` decomposition and the
/// `D^α` decompositions of the same set with `N < R_W/2`.
pub fn cross_grid_comparability(wd: &WhitneyDecomposition) -> Result<(f64, f64)> {
    let rw = wd.params.rw;
    // largest integer N with N < R_W/2
    let n = ((rw.num as u64).div_ceil(2 * rw.den as u64) as u32).saturating_sub(1).max(1);
    let base = WhitneyParams {
        n: Ratio::int(n),
        ..wd.params.clone()
    };
    let d0 = whitney(&wd.omega, wd.level, &base)?;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for shift in Shift::ALL {
        let other = whitney(&wd.omega, wd.level, &WhitneyParams { shift, ..base.clone() })?;
        if let Some((a, b)) = comparability(&d0, &other) {
            lo = lo.min(a);
            hi = hi.max(b);
        }
    }
    Ok((lo, hi))
}

/// CZ splits of random `f` on each σ, at a γ above the tree doubling
/// constant and three heights with principal cubes.
pub fn cz_trials(ws: &[WeightPair], rng: &mut ChaCha8Rng, p: f64) -> Result<(bool, Value)> {
    let mut ok = true;
    let mut good: f64 = 0.0;
    let mut defect: f64 = 0.0;
    let mut c_meas: f64 = 0.0;
    let mut c_bound: f64 = f64::INFINITY;
    let mut nested_good: f64 = 0.0;
    let mut splits = 0;
    for w in ws {
        let sigma = &w.sigma;
        let gamma = tree_doubling(sigma.measure(), Shift::Zero, -sigma.resolution())?.ceil();
        let f = spread_step_function(rng, sigma, gamma, 4.0);
        if f.max_abs() == 0.0 {
            continue;
        }
        let top = f.max_abs().log(gamma).floor() as i32;
        let low = root_height(&f, sigma, gamma, Shift::Zero)?.max(top - 2);
        for t in low..=top {
            let cz = cz_split(&f, sigma, gamma, t, Shift::Zero, 4)?;
            let chk = verify_cz(&cz, &f, sigma);
            ok &= chk.holds() && cz.unresolved == 0 && cz.principal.iter().all(|g| !g.top);
            splits += 1;
            good = good.max(chk.good_ratio);
            defect = defect.max(chk.mean_zero_defect);
            nested_good = nested_good.max(nested_good_ratio(&f, sigma, gamma, t, Shift::Zero, 4)?.0);
        }
        let s = principal_summability(&f, sigma, gamma, p, Shift::Zero, 4)?;
        ok &= s.measured_c <= s.bound;
        c_meas = c_meas.max(s.measured_c);
        c_bound = c_bound.min(s.bound);
    }
    Ok((
        ok,
        json!({
            "splits": splits,
            "max_good_over_cap": good,
            "max_mean_zero_defect": defect,
            "max_summability_c": c_meas,
            "min_summability_bound": c_bound,
            "two_level_good_over_cap": nested_good,
        }),
    ))
}

fn suite_inequalities(cfg: &CheckConfig) -> Result<Vec<Assertion>> {
    let mut rng = seeded(cfg.seed, 0x77);
    let mut out = Vec::new();

    let mut worst: f64 = f64::INFINITY;
    let mut ok = true;
    let mut families = 0;
    for &p in &[1.25, 1.5, 2.0] {
        let (pass, slack, n) = level_estimate_trials(cfg, p, cfg.instances, &mut rng)?;
        ok &= pass;
        worst = worst.min(slack);
        families += n;
    }
    out.push(hard(
        "level_estimate",
        ok,
        families,
        json!({ "min_relative_slack": worst, "levels": 12 }),
    ));

    let (ok, slack, n) = neccinequ_trials(cfg, 4 * cfg.instances, &mut rng)?;
    out.push(hard("neccinequ", ok, n, json!({ "min_slack": slack })));

    let (ok, worst) = besicovitch_trials(&mut rng, 4 * cfg.instances, 3)?;
    out.push(hard("besicovitch_overlap", ok, 4 * cfg.instances, json!({ "max_overlap": worst })));

    let ws = pairs(cfg, 0x77)?;
    let (ok, r, b) = maximal_theorem(&ws, &mut rng)?;
    out.push(hard("dyadic_maximal_theorem", ok, ws.len(), json!({ "max_ratio": r, "bound": b })));

    let n = 2000 * cfg.instances;
    let ok = kernel_trials(&mut rng, n);
    out.push(hard("kernel_lower_bound", ok, n, json!({})));
    Ok(out)
}

/// Random stopping partitions of the support's covering cube; every level
/// `ℓ ≤ 12` must satisfy `lhs ≤ p 2^{−pℓ} A^p rhs` up to `1e−6` relative.
/// Returns the verdict, the smallest `(bound − lhs)/bound`, and the count.
pub fn level_estimate_trials(cfg: &CheckConfig, p: f64, families: usize, rng: &mut ChaCha8Rng) -> Result<(bool, f64, usize)> {
    let mut ok = true;
    let mut slack = f64::INFINITY;
    for i in 0..families as u64 {
        let w = weight_pair(&cfg.corpus, p, cfg.seed ^ 0x7E7E, i)?;
        let (lo, hi) = w.support_bounds().expect("nonzero");
        let shift = Shift::ALL[rng.gen_range(0..3)];
        let root = smallest_covering(shift, lo, hi).unwrap_or_else(|_| locate(shift, lo, (hi - lo).log2().ceil() as i32 + 2));
        let parts = random_partition(rng, root, 6, 0.8);
        let fam = interval_family(
            &w,
            &FamilySpec {
                depth: 8,
                random: 0,
                seed: 0,
                shifted: true,
            },
        );
        let a = ap_constant(&w, &fam).estimate.powf(p);
        for level in 0..=12 {
            let c = level_check(&w, &parts, level, a);
            if c.bound > 0.0 {
                let s = (c.bound - c.lhs) / c.bound;
                slack = slack.min(s);
                ok &= s >= -1e-6;
            } else {
                ok &= c.lhs == 0.0;
            }
        }
    }
    Ok((ok, slack, families))
}

/// `ν = σ` off a random interval `I`; `ℙ(I;ν) ≤ 2|I| · min quotient` up to
/// `1e−9` relative.
pub fn neccinequ_trials(cfg: &CheckConfig, trials: usize, rng: &mut ChaCha8Rng) -> Result<(bool, f64, usize)> {
    let mut ok = true;
    let mut slack = f64::INFINITY;
    let mut n = 0;
    for i in 0..trials as u64 {
        let w = weight_pair(&cfg.corpus, 2.0, cfg.seed ^ 0x8E8E, i)?;
        let (lo, hi) = w.support_bounds().expect("nonzero");
        let a = lattice_point(rng, lo, hi) + pow2(-24);
        let len = pow2(rng.gen_range(-6..=1)) * rng.gen_range(1.0..2.0);
        let iv = Interval::raw(a, a + len);
        let nu = w.sigma.restrict_complement(&iv);
        if nu.is_zero() {
            continue;
        }
        let c = neccinequ_check(&nu, &iv)?;
        let s = (c.bound - c.poisson) / c.bound.abs().max(f64::MIN_POSITIVE);
        slack = slack.min(s);
        ok &= s >= -1e-9;
        n += 1;
    }
    Ok((ok, slack, n))
}

/// `1/(x−y) ≥ |Q|^{−1}s_Q(x)s_Q(y)` for random `y < x`.
pub fn kernel_trials(rng: &mut ChaCha8Rng, n: usize) -> bool {
    (0..n).all(|_| {
        let q = random_interval(rng, -8.0, 8.0, 0.0);
        let y = rng.gen_range(-32.0..32.0);
        let x = y + rng.gen_range(1e-9..64.0) * pow2(rng.gen_range(-20..=0));
        if x <= y {
            return true;
        }
        let (k, b) = kernel_lower_bound(&q, x, y);
        k >= b
    })
}

/// `T♮` values of `fσ` sampled at `xs`, used by plot data.
pub fn t_natural_profile(nu: &Measure, xs: &[f64], budget: &SearchBudget) -> Vec<f64> {
    xs.par_iter().map(|&x| t_natural(nu, x, budget).value).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_suite_rejected() {
        assert!(run_checks("nope", &CheckConfig::default()).is_err());
    }

    #[test]
    fn measure_and_dyadic_suites_pass() {
        let cfg = CheckConfig {
            instances: 2,
            ..CheckConfig::default()
        };
        for s in ["measure", "dyadic"] {
            let r = run_checks(s, &cfg).unwrap();
            assert!(r.passed, "{}", serde_json::to_string_pretty(&r).unwrap());
        }
    }
}
