//! Lower-bound estimators for the two-weight constants.
//!
//! Every estimator maximizes a functional over a finite search family and
//! returns the maximizing configuration as a JSON witness. `verify_witness`
//! recomputes the functional on that witness alone.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::dyadic::{locate, DyadicInterval, Shift};
use crate::error::{Error, Result};
use crate::measure::{pow2, Atom, Interval, Measure, StepAtomicMeasure, StepFunction, WeightPair};
use crate::operators::{maximal_fn, t_natural, Linearization, SearchBudget, Selection};
use crate::poisson::{poisson_std, tail_starts, PartitionData};
use crate::quadrature::{gauss3, integrate_panels, REL_TOL};

/// Relative gap between the full-budget and half-budget estimates below which
/// a report counts as converged.
pub const CONVERGENCE_TOL: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestingReport {
    pub condition: String,
    pub estimate: f64,
    pub witness: Value,
    pub budget: Value,
    pub converged: bool,
}

/// Dyadic cubes of one or all three grids at `depth` scales below the
/// covering scale, plus random intervals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FamilySpec {
    pub depth: u32,
    pub random: usize,
    pub seed: u64,
    pub shifted: bool,
}

impl Default for FamilySpec {
    fn default() -> Self {
        Self {
            depth: 14,
            random: 10_000,
            seed: 0,
            shifted: true,
        }
    }
}

/// A family member; `coarse` members form the half budget used for the
/// convergence diagnostic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Candidate {
    pub interval: Interval,
    pub coarse: bool,
}

pub(crate) fn seeded(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// The coarse members of `family`, evenly strided down to at most `max`.
pub fn coarse_subset(family: &[Candidate], max: usize) -> Vec<Candidate> {
    let coarse: Vec<Candidate> = family.iter().filter(|c| c.coarse).copied().collect();
    let step = coarse.len().div_ceil(max.max(1)).max(1);
    coarse.into_iter().step_by(step).collect()
}

/// `(top, finest)` scales for a family over `[lo, hi]`.
fn family_scales(lo: f64, hi: f64, depth: u32, resolution: i32) -> (i32, i32) {
    let span = (hi - lo).max(pow2(-resolution));
    let top = span.log2().ceil() as i32 + 1;
    let finest = (top - depth as i32).max(-resolution).min(top);
    (top, finest)
}

pub fn grid_cubes(shift: Shift, lo: f64, hi: f64, scale: i32) -> impl Iterator<Item = DyadicInterval> {
    let a = locate(shift, lo, scale);
    let b = locate(shift, hi, scale);
    (a.index..=b.index).map(move |k| DyadicInterval::new(scale, k, shift))
}

pub fn interval_family(w: &WeightPair, spec: &FamilySpec) -> Vec<Candidate> {
    let Some((lo, hi)) = w.support_bounds() else {
        return Vec::new();
    };
    let (top, finest) = family_scales(lo, hi, spec.depth, w.resolution());
    let shifts: &[Shift] = if spec.shifted { &Shift::ALL } else { &[Shift::Zero] };
    let mut out = Vec::new();
    for &shift in shifts {
        for j in (finest..=top).rev() {
            for q in grid_cubes(shift, lo, hi, j) {
                out.push(Candidate {
                    interval: q.interval(),
                    coarse: j > finest || finest == top,
                });
            }
        }
    }
    let span = (hi - lo).max(pow2(finest));
    let mut rng = seeded(spec.seed, 0xFA41);
    for i in 0..spec.random {
        let c = rng.gen_range(lo - 0.25 * span..=hi + 0.25 * span);
        let len = pow2(finest) * 2f64.powf(rng.gen_range(0.0..=(top - finest + 1) as f64));
        out.push(Candidate {
            interval: Interval::raw(c - 0.5 * len, c + 0.5 * len),
            coarse: i < spec.random / 2,
        });
    }
    out
}

fn family_budget(family: &[Candidate]) -> Value {
    json!({
        "family_size": family.len(),
        "coarse_size": family.iter().filter(|c| c.coarse).count(),
    })
}

struct Best {
    index: Option<usize>,
    value: f64,
    coarse_value: f64,
}

impl Best {
    /// First maximum in input order; non-finite values are ignored.
    fn of(values: &[f64], coarse: impl Fn(usize) -> bool) -> Self {
        let mut b = Best {
            index: None,
            value: 0.0,
            coarse_value: 0.0,
        };
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                continue;
            }
            if b.index.is_none() || v > b.value {
                b.index = Some(i);
                b.value = v;
            }
            if coarse(i) && v > b.coarse_value {
                b.coarse_value = v;
            }
        }
        b
    }

    fn converged(&self) -> bool {
        self.value - self.coarse_value <= CONVERGENCE_TOL * self.value
    }
}

fn interval_json(q: &Interval) -> Value {
    json!([q.left, q.right])
}

fn interval_from(v: &Value) -> Result<Interval> {
    let (Some(a), Some(b)) = (v.get(0).and_then(Value::as_f64), v.get(1).and_then(Value::as_f64)) else {
        return Err(Error::Parse(format!("expected an interval [left, right], got {v}")));
    };
    Interval::new(a, b)
}

fn field<'a>(v: &'a Value, key: &str) -> Result<&'a Value> {
    v.get(key)
        .ok_or_else(|| Error::Parse(format!("witness is missing `{key}`")))
}

fn interval_search<F>(condition: &str, family: &[Candidate], f: F) -> Result<TestingReport>
where
    F: Fn(&Interval) -> Result<f64> + Sync,
{
    let values = family
        .par_iter()
        .map(|c| f(&c.interval))
        .collect::<Result<Vec<f64>>>()?;
    let best = Best::of(&values, |i| family[i].coarse);
    Ok(TestingReport {
        condition: condition.into(),
        estimate: best.value,
        witness: best
            .index
            .map_or(Value::Null, |i| json!({ "interval": interval_json(&family[i].interval) })),
        budget: family_budget(family),
        converged: best.converged(),
    })
}

/// `(ω(Q)/|Q|)^{1/p} (σ(Q)/|Q|)^{1/p′}`.
pub fn ap_value(w: &WeightPair, q: &Interval) -> f64 {
    let len = q.length();
    (w.omega.mass(q) / len).powf(1.0 / w.p()) * (w.sigma.mass(q) / len).powf(1.0 / w.p_dual())
}

pub fn ap_constant(w: &WeightPair, family: &[Candidate]) -> TestingReport {
    interval_search("ap", family, |q| Ok(ap_value(w, q))).expect("A_p evaluation is infallible")
}

/// Strengthened and half-strengthened values at `q`.
pub fn strengthened_values(w: &WeightPair, q: &Interval) -> Result<(f64, f64)> {
    let (p, pd) = (w.p(), w.p_dual());
    let s = w.sigma.integrate_power_kernel(q, pd)?.powf(1.0 / pd);
    let full = w.omega.integrate_power_kernel(q, p)?.powf(1.0 / p) * s / q.length();
    let half = w.omega.mass(q).powf(1.0 / p) * s / q.length();
    Ok((full, half))
}

/// Reports for the strengthened and the half-strengthened condition.
pub fn strengthened_ap(w: &WeightPair, family: &[Candidate]) -> Result<(TestingReport, TestingReport)> {
    let full = interval_search("strengthened_ap", family, |q| Ok(strengthened_values(w, q)?.0))?;
    let half = interval_search("half_strengthened_ap", family, |q| Ok(strengthened_values(w, q)?.1))?;
    Ok((full, half))
}

/// `∫ F^p dω` for the step function `F = Σ_i v_i χ_{J_i}`.
fn step_power_integral(omega: &Measure, mut events: Vec<(crate::dyadic::GridPoint, f64)>, p: f64) -> f64 {
    events.sort_by(|a, b| a.0.cmp(&b.0));
    let mut total = 0.0;
    let mut level = 0.0;
    let mut i = 0;
    while i < events.len() {
        let x = events[i].0;
        while i < events.len() && events[i].0 == x {
            level += events[i].1;
            i += 1;
        }
        if i < events.len() && level > 0.0 {
            let (a, b) = (x.to_f64(), events[i].0.to_f64());
            if a < b {
                total += level.powf(p) * omega.mass(&Interval::raw(a, b));
            }
        }
    }
    total
}

fn push_cube(events: &mut Vec<(crate::dyadic::GridPoint, f64)>, q: &DyadicInterval, v: f64) {
    events.push((q.left_exact(), v));
    events.push((q.right_exact(), -v));
}

/// `c_r = |I_r|_σ |I_r|^{p′−2}`.
fn poisson_coefficient(w: &WeightPair, q: &DyadicInterval) -> f64 {
    w.sigma.mass(&q.interval()) * q.length().powf(w.p_dual() - 2.0)
}

fn poisson_rhs(w: &WeightPair, parts: &PartitionData) -> f64 {
    parts
        .pieces
        .iter()
        .map(|q| w.sigma.mass(&q.interval()) * q.length().powf(w.p_dual()))
        .sum()
}

/// `(∫ (Σ_r c_r Σ_ℓ 4^{−ℓ} χ_{I_r^{(ℓ)}})^p dω, Σ_r |I_r|_σ |I_r|^{p′})`.
pub fn poisson_condition(w: &WeightPair, parts: &PartitionData) -> Result<(f64, f64)> {
    let rhs = poisson_rhs(w, parts);
    let Some((lo, hi)) = w.omega.support_bounds() else {
        return Ok((0.0, rhs));
    };
    let mut events = Vec::new();
    for piece in &parts.pieces {
        let c = poisson_coefficient(w, piece);
        if c == 0.0 {
            continue;
        }
        let mut a = *piece;
        let mut l = 0;
        loop {
            if tail_starts(&a, lo, hi) {
                push_cube(&mut events, &a, 4.0 / 3.0 * pow2(-2 * l) * c);
                break;
            }
            push_cube(&mut events, &a, pow2(-2 * l) * c);
            a = a.parent();
            l += 1;
        }
    }
    Ok((step_power_integral(&w.omega, events, w.p()), rhs))
}

/// `∫ (Σ_r c_r 4^{−ℓ} χ_{I_r^{(ℓ)}})^p dω` for one level `ℓ`.
pub fn poisson_level(w: &WeightPair, parts: &PartitionData, level: u32) -> f64 {
    let mut events = Vec::new();
    for piece in &parts.pieces {
        let c = poisson_coefficient(w, piece);
        if c != 0.0 {
            push_cube(&mut events, &piece.ancestor(level), pow2(-2 * level as i32) * c);
        }
    }
    step_power_integral(&w.omega, events, w.p())
}

/// `ω(J) σ(J)^{p−1} / |J|^p`, the `p`-th power of `ap_value`.
pub fn ap_power(w: &WeightPair, q: &Interval) -> f64 {
    w.omega.mass(q) * w.sigma.mass(q).powf(w.p() - 1.0) / q.length().powf(w.p())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelCheck {
    pub level: u32,
    pub lhs: f64,
    /// `p 2^{−pℓ} A^p Σ_r |I_r|_σ |I_r|^{p′}`.
    pub bound: f64,
    pub ap_power: f64,
}

/// The level-`ℓ` estimate, with `A^p` the larger of `family_ap_power` and
/// the value over the level-`ℓ` ancestors of the pieces.
pub fn level_check(w: &WeightPair, parts: &PartitionData, level: u32, family_ap_power: f64) -> LevelCheck {
    let a = parts
        .pieces
        .iter()
        .map(|q| ap_power(w, &q.ancestor(level).interval()))
        .fold(family_ap_power, f64::max);
    let p = w.p();
    LevelCheck {
        level,
        lhs: poisson_level(w, parts, level),
        bound: p * 2f64.powf(-p * level as f64) * a * poisson_rhs(w, parts),
        ap_power: a,
    }
}

/// `σ(Q) 𝖯(Q, χ_{Q₀}ω)^{p′}` with `omega_q0 = χ_{Q₀}ω`.
fn pivotal_term(w: &WeightPair, omega_q0: &Measure, q: &DyadicInterval) -> f64 {
    let iv = q.interval();
    let s = w.sigma.mass(&iv);
    if s == 0.0 {
        return 0.0;
    }
    s * poisson_std(&iv, omega_q0).powf(w.p_dual())
}

/// `(Σ_r |Q_r|_σ 𝖯(Q_r, χ_{Q₀}ω)^{p′}, |Q₀|_ω)`.
pub fn pivotal_dual(w: &WeightPair, q0: &DyadicInterval, parts: &PartitionData) -> Result<(f64, f64)> {
    if parts.root != *q0 {
        return Err(Error::InvalidParameter("partition root differs from Q₀".into()));
    }
    let iv = q0.interval();
    let omega_q0 = w.omega.restrict(&[iv]);
    let lhs = parts.pieces.iter().map(|q| pivotal_term(w, &omega_q0, q)).sum();
    Ok((lhs, w.omega.mass(&iv)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PartitionSearch {
    /// Root cubes are taken this many scales below the covering scale.
    pub root_levels: u32,
    /// Partitions are enumerated exhaustively to this relative depth.
    pub exhaustive_depth: u32,
    /// Greedy refinement stops at this relative depth.
    pub max_depth: u32,
    pub max_pieces: usize,
}

impl Default for PartitionSearch {
    fn default() -> Self {
        Self {
            root_levels: 4,
            exhaustive_depth: 6,
            max_depth: 10,
            max_pieces: 64,
        }
    }
}

fn partition_roots(w: &WeightPair, levels: u32, weight: &Measure) -> Vec<DyadicInterval> {
    let Some((lo, hi)) = w.support_bounds() else {
        return Vec::new();
    };
    let (top, finest) = family_scales(lo, hi, levels, w.resolution());
    let mut out = Vec::new();
    for shift in Shift::ALL {
        for j in (finest..=top).rev() {
            out.extend(grid_cubes(shift, lo, hi, j).filter(|q| weight.mass(&q.interval()) > 0.0));
        }
    }
    out
}

fn partition_json(parts: &PartitionData) -> Value {
    serde_json::to_value(parts).expect("partitions serialize")
}

fn partition_from(v: &Value) -> Result<PartitionData> {
    let parts: PartitionData =
        serde_json::from_value(v.clone()).map_err(|e| Error::Parse(e.to_string()))?;
    PartitionData::new(parts.root, parts.pieces)
}

/// Best sum of `pivotal_term` over partitions of `q`: exhaustive for the
/// first `exhaustive` levels, greedy below.
fn pivotal_best(
    w: &WeightPair,
    omega_q0: &Measure,
    q: &DyadicInterval,
    depth: u32,
    search: &PartitionSearch,
    out: &mut Vec<DyadicInterval>,
) -> f64 {
    let here = pivotal_term(w, omega_q0, q);
    if depth >= search.max_depth {
        out.push(*q);
        return here;
    }
    let ch = q.children();
    if depth >= search.exhaustive_depth {
        let split = pivotal_term(w, omega_q0, &ch[0]) + pivotal_term(w, omega_q0, &ch[1]);
        if split <= here {
            out.push(*q);
            return here;
        }
    }
    let mut sub = Vec::new();
    let v = pivotal_best(w, omega_q0, &ch[0], depth + 1, search, &mut sub)
        + pivotal_best(w, omega_q0, &ch[1], depth + 1, search, &mut sub);
    if v > here {
        out.extend(sub);
        v
    } else {
        out.push(*q);
        here
    }
}

/// Maximizes `lhs/rhs` of `pivotal_dual` over roots and partitions.
pub fn pivotal_search(w: &WeightPair, search: &PartitionSearch) -> TestingReport {
    let roots = partition_roots(w, search.root_levels, &w.omega);
    let found: Vec<(f64, PartitionData)> = roots
        .par_iter()
        .map(|root| {
            let omega_q0 = w.omega.restrict(&[root.interval()]);
            let mut pieces = Vec::new();
            let lhs = pivotal_best(w, &omega_q0, root, 0, search, &mut pieces);
            let parts = PartitionData::new(*root, pieces).expect("search yields a partition");
            (lhs / w.omega.mass(&root.interval()), parts)
        })
        .collect();
    let values: Vec<f64> = found.iter().map(|f| f.0).collect();
    let best = Best::of(&values, |i| roots[i].scale > roots[0].scale - search.root_levels as i32);
    TestingReport {
        condition: "pivotal".into(),
        estimate: best.value,
        witness: best.index.map_or(Value::Null, |i| partition_json(&found[i].1)),
        budget: json!({ "roots": roots.len(), "search": search }),
        converged: best.converged(),
    }
}

fn poisson_ratio(w: &WeightPair, parts: &PartitionData) -> f64 {
    match poisson_condition(w, parts) {
        Ok((lhs, rhs)) if rhs > 0.0 => lhs / rhs,
        _ => 0.0,
    }
}

fn with_sigma_mass(w: &WeightPair, pieces: Vec<DyadicInterval>) -> Vec<DyadicInterval> {
    pieces
        .into_iter()
        .filter(|q| w.sigma.mass(&q.interval()) > 0.0)
        .collect()
}

/// Best Poisson ratio below one root: uniform partitions, then greedy splits.
fn poisson_best(w: &WeightPair, root: &DyadicInterval, search: &PartitionSearch) -> (f64, PartitionData) {
    let mut best = (0.0, PartitionData::trivial(*root));
    for d in 0..=search.exhaustive_depth.min(search.max_depth) {
        let pieces = with_sigma_mass(w, root.descendants(d));
        if pieces.is_empty() || pieces.len() > search.max_pieces {
            continue;
        }
        let parts = PartitionData::new(*root, pieces).expect("descendants partition the root");
        let r = poisson_ratio(w, &parts);
        if r > best.0 {
            best = (r, parts);
        }
    }
    loop {
        let mut improved = false;
        let current = best.1.pieces.clone();
        for (i, q) in current.iter().enumerate() {
            if q.scale <= root.scale - search.max_depth as i32 || current.len() + 1 > search.max_pieces {
                continue;
            }
            let mut pieces = current.clone();
            pieces.remove(i);
            pieces.extend(with_sigma_mass(w, q.children().to_vec()));
            let parts = PartitionData::new(*root, pieces).expect("refinement stays a partition");
            let r = poisson_ratio(w, &parts);
            if r > best.0 {
                best = (r, parts);
                improved = true;
                break;
            }
        }
        if !improved {
            return best;
        }
    }
}

/// Maximizes `lhs/rhs` of `poisson_condition` over stopping-time partitions.
pub fn poisson_search(w: &WeightPair, search: &PartitionSearch) -> TestingReport {
    let roots = partition_roots(w, search.root_levels, &w.sigma);
    let found: Vec<(f64, PartitionData)> = roots.par_iter().map(|r| poisson_best(w, r, search)).collect();
    let values: Vec<f64> = found.iter().map(|f| f.0).collect();
    let best = Best::of(&values, |i| roots[i].scale > roots[0].scale - search.root_levels as i32);
    TestingReport {
        condition: "poisson".into(),
        estimate: best.value,
        witness: best.index.map_or(Value::Null, |i| partition_json(&found[i].1)),
        budget: json!({ "roots": roots.len(), "search": search }),
        converged: best.converged(),
    }
}

/// Nodes and weights discretizing `χ_Q μ`: three Gauss points per cell
/// piece, atoms exactly.
pub fn measure_nodes(mu: &StepAtomicMeasure, q: &Interval) -> Vec<(f64, f64)> {
    let h = mu.cell_length();
    let kl = (q.left / h).floor() as i64;
    let kr = (q.right / h).ceil() as i64;
    let mut out = Vec::new();
    for (&k, &d) in mu.cells().range(kl..kr) {
        let a = (k as f64 * h).max(q.left);
        let b = ((k + 1) as f64 * h).min(q.right);
        if a < b {
            out.extend(gauss3(a, b).iter().map(|&(x, wt)| (x, wt * d)));
        }
    }
    out.extend(
        mu.atoms()
            .iter()
            .filter(|a| q.contains(a.position))
            .map(|a| (a.position, a.mass)),
    );
    out
}

/// Cells at resolution `res` or coarser (at most `max_cells` of them) that
/// carry σ-mass inside `q`.
pub fn mass_cells(mu: &StepAtomicMeasure, q: &Interval, max_cells: usize) -> (i32, Vec<i64>) {
    let mut res = mu.resolution();
    loop {
        let h = pow2(-res);
        let mut ks: Vec<i64> = Vec::new();
        let kl = (q.left / h).floor() as i64;
        let kr = (q.right / h).ceil() as i64;
        for p in mu.pieces() {
            if p.right <= q.left || p.left >= q.right {
                continue;
            }
            let a = ((p.left.max(q.left)) / h).floor() as i64;
            let b = ((p.right.min(q.right)) / h).ceil() as i64;
            ks.extend(a.max(kl)..b.min(kr));
        }
        ks.extend(
            mu.atoms()
                .iter()
                .filter(|a| q.contains(a.position))
                .map(|a| (a.position / h).floor() as i64),
        );
        ks.sort_unstable();
        ks.dedup();
        ks.retain(|&k| {
            cell_in(k, res, q).is_some_and(|c| mu.mass(&c) > 0.0)
        });
        if ks.len() <= max_cells.max(1) {
            return (res, ks);
        }
        res -= 1;
    }
}

fn cell_in(k: i64, res: i32, q: &Interval) -> Option<Interval> {
    let h = pow2(-res);
    Interval::raw(k as f64 * h, (k + 1) as f64 * h).intersect(q)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForwardBudget {
    pub subsets: usize,
    pub greedy_steps: usize,
    pub max_cells: usize,
    pub search: SearchBudget,
    pub seed: u64,
}

impl Default for ForwardBudget {
    fn default() -> Self {
        Self {
            subsets: 8,
            greedy_steps: 1,
            max_cells: 32,
            search: SearchBudget::with_density(16),
            seed: 0,
        }
    }
}

/// `∫_Q T♮(χ_E σ)^p dω / σ(Q)` with `E` the union of the listed cells.
pub fn forward_value(w: &WeightPair, q: &Interval, res: i32, cells: &[i64], search: &SearchBudget) -> f64 {
    let sq = w.sigma.mass(q);
    if sq == 0.0 || cells.is_empty() {
        return 0.0;
    }
    let set: Vec<Interval> = cells.iter().filter_map(|&k| cell_in(k, res, q)).collect();
    let nu = w.sigma.restrict(&set);
    let p = w.p();
    let nodes = measure_nodes(&w.omega, q);
    let total: f64 = nodes
        .par_iter()
        .map(|&(x, wt)| wt * t_natural(&nu, x, search).value.powf(p))
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    total / sq
}

fn forward_for_cube(w: &WeightPair, q: &Interval, salt: u64, budget: &ForwardBudget) -> (f64, i32, Vec<i64>) {
    let (res, cells) = mass_cells(&w.sigma, q, budget.max_cells);
    if cells.is_empty() || w.omega.mass(q) == 0.0 {
        return (0.0, res, Vec::new());
    }
    let eval = |set: &[i64]| forward_value(w, q, res, set, &budget.search);
    let mid = q.center();
    let h = pow2(-res);
    let mut candidates = vec![
        cells.clone(),
        cells.iter().copied().filter(|&k| (k as f64 + 0.5) * h < mid).collect(),
        cells.iter().copied().filter(|&k| (k as f64 + 0.5) * h >= mid).collect(),
    ];
    let mut rng = seeded(budget.seed, salt);
    for _ in 0..budget.subsets {
        candidates.push(cells.iter().copied().filter(|_| rng.gen_bool(0.5)).collect());
    }
    let mut best = (0.0, Vec::new());
    for set in candidates {
        let v = eval(&set);
        if v > best.0 {
            best = (v, set);
        }
    }
    for _ in 0..budget.greedy_steps {
        let mut step = best.clone();
        for &k in &cells {
            let mut set = best.1.clone();
            match set.binary_search(&k) {
                Ok(i) => {
                    set.remove(i);
                }
                Err(i) => set.insert(i, k),
            }
            let v = eval(&set);
            if v > step.0 {
                step = (v, set);
            }
        }
        if step.0 <= best.0 {
            break;
        }
        best = step;
    }
    (best.0, res, best.1)
}

/// `sup ∫_Q T♮(χ_E σ)^p dω / σ(Q)` over sampled cubes and cell unions `E`.
pub fn forward_testing(w: &WeightPair, family: &[Candidate], budget: &ForwardBudget) -> TestingReport {
    let found: Vec<(f64, i32, Vec<i64>)> = family
        .par_iter()
        .enumerate()
        .map(|(i, c)| forward_for_cube(w, &c.interval, i as u64, budget))
        .collect();
    let values: Vec<f64> = found.iter().map(|f| f.0).collect();
    let best = Best::of(&values, |i| family[i].coarse);
    TestingReport {
        condition: "forward_testing".into(),
        estimate: best.value,
        witness: best.index.map_or(Value::Null, |i| {
            json!({
                "interval": interval_json(&family[i].interval),
                "resolution": found[i].1,
                "cells": found[i].2,
            })
        }),
        budget: json!({ "family": family_budget(family), "subsets": budget }),
        converged: best.converged(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DualBudget {
    /// Random sign patterns and random cell unions per cube, each.
    pub patterns: usize,
    /// Randomly perturbed linearizations per cube.
    pub perturbations: usize,
    pub max_cells: usize,
    pub search: SearchBudget,
    pub seed: u64,
}

impl Default for DualBudget {
    fn default() -> Self {
        Self {
            patterns: 4,
            perturbations: 3,
            max_cells: 32,
            search: SearchBudget::with_density(16),
            seed: 0,
        }
    }
}

/// `(∫_Q T♮(χ_Q f σ) dω, ‖χ_Q f‖_{L^p(σ)})` for `f` given by cell values.
pub fn dual_probe(w: &WeightPair, q: &Interval, res: i32, f: &[(i64, f64)], search: &SearchBudget) -> (f64, f64) {
    let p = w.p();
    let mut norm = 0.0;
    for &(k, v) in f {
        if let Some(c) = cell_in(k, res, q) {
            norm += v.abs().powf(p) * w.sigma.mass(&c);
        }
    }
    if norm == 0.0 {
        return (0.0, 0.0);
    }
    let g = StepFunction::new(res, f.iter().copied().collect());
    let nu = w.sigma.restrict(&[*q]).times(&g);
    let nodes = measure_nodes(&w.omega, q);
    let total: f64 = nodes
        .par_iter()
        .map(|&(x, wt)| wt * t_natural(&nu, x, search).value)
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    (total, norm.powf(1.0 / p))
}

/// `∫_Q T♮(χ_Q f σ) dω / (‖f‖_{L^p(σ)} ω(Q)^{1/p′})`.
pub fn dual_primal_value(w: &WeightPair, q: &Interval, res: i32, f: &[(i64, f64)], search: &SearchBudget) -> f64 {
    let oq = w.omega.mass(q);
    if oq == 0.0 {
        return 0.0;
    }
    let (num, norm) = dual_probe(w, q, res, f, search);
    if norm == 0.0 {
        return 0.0;
    }
    num / (norm * oq.powf(1.0 / w.p_dual()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualNecessity {
    /// `∫_Q T♮(χ_Q f σ) dω`.
    pub lhs: f64,
    /// `sup_λ λ ω{x ∈ Q : T♮(χ_Q f σ)(x) > λ}^{1/p} / ‖f‖`.
    pub weak: f64,
    /// `p′ · weak · ω(Q)^{1/p′} ‖f‖`.
    pub bound: f64,
}

/// The weak-type route to dual testing: the layer-cake formula with
/// `ω_Q{g > λ} ≤ min(ω(Q), (C‖f‖/λ)^p)` and the optimal cut gives
/// `∫_Q g dω ≤ p′ C ω(Q)^{1/p′} ‖f‖` for the weak constant `C` of the probe.
/// Both sides use the same ω nodes, so the bound holds exactly for them.
pub fn dual_necessity_probe(
    w: &WeightPair,
    q: &Interval,
    res: i32,
    f: &[(i64, f64)],
    search: &SearchBudget,
) -> DualNecessity {
    let p = w.p();
    let mut norm = 0.0;
    for &(k, v) in f {
        if let Some(c) = cell_in(k, res, q) {
            norm += v.abs().powf(p) * w.sigma.mass(&c);
        }
    }
    let zero = DualNecessity {
        lhs: 0.0,
        weak: 0.0,
        bound: 0.0,
    };
    if norm == 0.0 {
        return zero;
    }
    let norm = norm.powf(1.0 / p);
    let g = StepFunction::new(res, f.iter().copied().collect());
    let nu = w.sigma.restrict(&[*q]).times(&g);
    let nodes = measure_nodes(&w.omega, q);
    let mut vals: Vec<(f64, f64)> = nodes
        .par_iter()
        .map(|&(x, wt)| (t_natural(&nu, x, search).value, wt))
        .collect();
    let lhs: f64 = vals.iter().map(|&(v, wt)| v * wt).sum();
    let oq: f64 = vals.iter().map(|v| v.1).sum();
    vals.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut cum = 0.0;
    let mut weak: f64 = 0.0;
    for &(v, wt) in &vals {
        cum += wt;
        weak = weak.max(v * cum.powf(1.0 / p));
    }
    weak /= norm;
    DualNecessity {
        lhs,
        weak,
        bound: w.p_dual() * weak * oq.powf(1.0 / w.p_dual()) * norm,
    }
}

/// Selections from the `T♮` argmax, rescaled at random when
/// `perturbation > 0`.
fn dual_linearization(
    w: &WeightPair,
    q: &Interval,
    points: Vec<f64>,
    perturbation: u64,
    budget: &DualBudget,
) -> Result<Linearization> {
    let sigma_q = w.sigma.restrict(&[*q]);
    let base = Linearization::from_argmax(&sigma_q, points, &budget.search);
    if perturbation == 0 {
        return Ok(base);
    }
    let mut rng = seeded(budget.seed ^ q.left.to_bits() ^ q.right.to_bits().rotate_left(17), perturbation);
    let selections = base
        .selections()
        .iter()
        .map(|s| {
            let mut t = s.params;
            t.eps1 *= 2f64.powf(rng.gen_range(-1.0..=1.0));
            t.eps2 = (t.eps2 * 2f64.powf(rng.gen_range(-1.0..=1.0))).clamp(0.25 * t.eps1, 4.0 * t.eps1);
            t.r = (t.r * 2f64.powf(rng.gen_range(-1.0..=1.0))).max(1.5 * t.eps1.max(t.eps2));
            Selection { params: t, theta: s.theta }
        })
        .collect();
    Linearization::new(base.points().to_vec(), selections, None)
}

/// `[∫_Q |L*(χ_Q ω)|^{p′} dσ / ω(Q)]^{1/p′}` with `χ_Q ω` discretized on
/// its quadrature nodes.
pub fn dual_adjoint_value(w: &WeightPair, q: &Interval, perturbation: u64, budget: &DualBudget) -> Result<f64> {
    let oq = w.omega.mass(q);
    if oq == 0.0 {
        return Ok(0.0);
    }
    let nodes = measure_nodes(&w.omega, q);
    let atoms: Vec<Atom> = nodes
        .iter()
        .map(|&(x, m)| Atom { position: x, mass: m })
        .collect();
    let omega_disc = Measure::new(Vec::new(), atoms, false)?;
    let points: Vec<f64> = omega_disc.atoms().iter().map(|a| a.position).collect();
    let l = dual_linearization(w, q, points, perturbation, budget)?;
    let pd = w.p_dual();
    let total = measure_nodes(&w.sigma, q)
        .par_iter()
        .map(|&(y, wt)| Ok(wt * l.adjoint(&omega_disc, y)?.norm().powf(pd)))
        .collect::<Result<Vec<f64>>>()?
        .iter()
        .sum::<f64>();
    Ok((total / oq).powf(1.0 / pd))
}

fn dual_for_cube(w: &WeightPair, q: &Interval, salt: u64, budget: &DualBudget) -> Result<(f64, Value)> {
    if w.omega.mass(q) == 0.0 {
        return Ok((0.0, Value::Null));
    }
    let (res, cells) = mass_cells(&w.sigma, q, budget.max_cells);
    let mut best = (0.0, Value::Null);
    if !cells.is_empty() {
        let mid = q.center();
        let h = pow2(-res);
        let left = |k: i64| (k as f64 + 0.5) * h < mid;
        let mut fs: Vec<Vec<(i64, f64)>> = vec![
            cells.iter().map(|&k| (k, 1.0)).collect(),
            cells.iter().map(|&k| (k, if left(k) { 1.0 } else { 0.0 })).collect(),
            cells.iter().map(|&k| (k, if left(k) { 0.0 } else { 1.0 })).collect(),
            cells.iter().map(|&k| (k, if left(k) { 1.0 } else { -1.0 })).collect(),
        ];
        let mut rng = seeded(budget.seed, salt);
        for _ in 0..budget.patterns {
            fs.push(cells.iter().map(|&k| (k, if rng.gen_bool(0.5) { 1.0 } else { -1.0 })).collect());
            fs.push(cells.iter().map(|&k| (k, if rng.gen_bool(0.5) { 1.0 } else { 0.0 })).collect());
        }
        for f in fs {
            let v = dual_primal_value(w, q, res, &f, &budget.search);
            if v > best.0 {
                best = (
                    v,
                    json!({ "branch": "primal", "interval": interval_json(q), "resolution": res, "f": f }),
                );
            }
        }
    }
    for k in 0..=budget.perturbations as u64 {
        let v = dual_adjoint_value(w, q, k, budget)?;
        if v > best.0 {
            best = (v, json!({ "branch": "adjoint", "interval": interval_json(q), "perturbation": k }));
        }
    }
    Ok(best)
}

/// The larger of the primal probe estimate and the linearized dual estimate.
pub fn dual_testing(w: &WeightPair, family: &[Candidate], budget: &DualBudget) -> Result<TestingReport> {
    let found = family
        .par_iter()
        .enumerate()
        .map(|(i, c)| dual_for_cube(w, &c.interval, i as u64, budget))
        .collect::<Result<Vec<(f64, Value)>>>()?;
    let values: Vec<f64> = found.iter().map(|f| f.0).collect();
    let best = Best::of(&values, |i| family[i].coarse);
    Ok(TestingReport {
        condition: "dual_testing".into(),
        estimate: best.value,
        witness: best.index.map_or(Value::Null, |i| found[i].1.clone()),
        budget: json!({ "family": family_budget(family), "probes": budget }),
        converged: best.converged(),
    })
}

fn contains_closed(outer: &Interval, inner: &Interval) -> bool {
    outer.left <= inner.left && inner.right <= outer.right
}

/// `μ(3Q)/μ(Q)`, infinite when only `3Q` carries mass.
pub fn doubling_ratio(mu: &Measure, q: &Interval) -> f64 {
    let (m, m3) = (mu.mass(q), mu.mass(&q.dilate(3.0)));
    if m > 0.0 {
        m3 / m
    } else if m3 > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// `sup μ(3Q)/μ(Q)` over family members with `3Q` inside `window` (default:
/// the hull of the density support), plus probes adjacent to every atom.
pub fn doubling_gamma(
    name: &str,
    mu: &StepAtomicMeasure,
    family: &[Candidate],
    window: Option<Interval>,
) -> TestingReport {
    let window = window.or_else(|| {
        let ps = mu.pieces();
        Some(Interval::raw(ps.first()?.left, ps.last()?.right))
    });
    let mut probes: Vec<Candidate> = family
        .iter()
        .filter(|c| window.is_some_and(|win| contains_closed(&win, &c.interval.dilate(3.0))))
        .copied()
        .collect();
    for a in mu.atoms() {
        for k in 0..8 {
            let h = mu.cell_length() * pow2(-k);
            for iv in [
                Interval::raw(a.position + h, a.position + 2.0 * h),
                Interval::raw(a.position - 2.0 * h, a.position - h),
            ] {
                probes.push(Candidate {
                    interval: iv,
                    coarse: true,
                });
            }
        }
    }
    let ratios: Vec<f64> = probes.par_iter().map(|c| doubling_ratio(mu, &c.interval)).collect();
    let best = Best::of(&ratios, |i| probes[i].coarse);
    let unbounded = ratios.iter().position(|r| r.is_infinite());
    TestingReport {
        condition: name.into(),
        estimate: best.value,
        witness: json!({
            "interval": best.index.map(|i| interval_json(&probes[i].interval)),
            "unbounded": unbounded.is_some(),
            "unbounded_at": unbounded.map(|i| interval_json(&probes[i].interval)),
        }),
        budget: json!({
            "family": family_budget(family),
            "window": window.map(|w| interval_json(&w)),
            "probes": probes.len(),
        }),
        converged: best.converged(),
    }
}

/// `[∫_Q 𝓜(χ_Q μ)^e dν / μ(Q)]^{1/e}`.
fn maximal_testing_value(mu: &StepAtomicMeasure, nu: &StepAtomicMeasure, q: &Interval, e: f64) -> Result<f64> {
    let mq = mu.mass(q);
    if mq == 0.0 {
        return Ok(0.0);
    }
    let restricted = mu.restrict(&[*q]);
    let mut total = 0.0;
    for (x, wt) in measure_nodes(nu, q) {
        total += wt * maximal_fn(&restricted, x)?.value.powf(e);
    }
    Ok((total / mq).powf(1.0 / e))
}

/// `‖𝓜(f σ)‖_{L^p(ω)} / ‖f‖_{L^p(σ)}` for `f` given by cell values.
pub fn maximal_probe_value(w: &WeightPair, res: i32, f: &[(i64, f64)]) -> Result<f64> {
    let p = w.p();
    let g = StepFunction::new(res, f.iter().copied().collect());
    let norm = g.lp_norm_pow(&w.sigma, p);
    let Some((lo, hi)) = w.omega.support_bounds() else {
        return Ok(0.0);
    };
    if norm == 0.0 {
        return Ok(0.0);
    }
    let nu = w.sigma.times(&g);
    let all = Interval::raw(lo, hi + w.omega.cell_length());
    let mut total = 0.0;
    for (x, wt) in measure_nodes(&w.omega, &all) {
        total += wt * maximal_fn(&nu, x)?.value.powf(p);
    }
    Ok((total / norm).powf(1.0 / p))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaximalBudget {
    pub probes: usize,
    pub max_cells: usize,
    pub seed: u64,
}

impl Default for MaximalBudget {
    fn default() -> Self {
        Self {
            probes: 8,
            max_cells: 64,
            seed: 0,
        }
    }
}

/// Lower bounds for `𝔐` and `𝔐*` from cube testing and random probes.
pub fn maximal_norms(
    w: &WeightPair,
    family: &[Candidate],
    budget: &MaximalBudget,
) -> Result<(TestingReport, TestingReport)> {
    let (p, pd) = (w.p(), w.p_dual());
    let mut primal = interval_search("maximal", family, |q| maximal_testing_value(&w.sigma, &w.omega, q, p))?;
    let dual = interval_search("maximal_dual", family, |q| maximal_testing_value(&w.omega, &w.sigma, q, pd))?;
    if let Some((lo, hi)) = w.sigma.support_bounds() {
        let all = Interval::raw(lo, hi + w.sigma.cell_length());
        let (res, cells) = mass_cells(&w.sigma, &all, budget.max_cells);
        let mut rng = seeded(budget.seed, 0x3A7);
        let fs: Vec<Vec<(i64, f64)>> = (0..budget.probes)
            .map(|_| cells.iter().map(|&k| (k, rng.gen_range(0.0..1.0))).collect())
            .collect();
        let values = fs
            .par_iter()
            .map(|f| maximal_probe_value(w, res, f))
            .collect::<Result<Vec<f64>>>()?;
        let best = Best::of(&values, |_| true);
        if let Some(i) = best.index {
            if best.value > primal.estimate {
                primal.estimate = best.value;
                primal.witness = json!({ "resolution": res, "f": fs[i] });
            }
        }
        primal.budget["probes"] = json!(budget);
    }
    Ok((primal, dual))
}

/// Partner of `q` at gap `c0·|Q|` on the given side.
fn asym_partner(q: &Interval, c0: f64, right: bool) -> Interval {
    let d = (1.0 + c0) * q.length();
    let s = if right { d } else { -d };
    Interval::raw(q.left + s, q.right + s)
}

/// `|Q|_ω |Q′|_σ^{p−1} / |Q|^p`.
pub fn asym_value(w: &WeightPair, q: &Interval, partner: &Interval) -> f64 {
    w.omega.mass(q) * w.sigma.mass(partner).powf(w.p() - 1.0) / q.length().powf(w.p())
}

pub fn asym_ap(w: &WeightPair, c0: f64, family: &[Candidate]) -> Result<TestingReport> {
    if !(c0 > 2.0 && c0.is_finite()) {
        return Err(Error::InvalidParameter(format!("separation C0 = {c0} must exceed 2")));
    }
    let values: Vec<(f64, bool)> = family
        .par_iter()
        .map(|c| {
            let l = asym_value(w, &c.interval, &asym_partner(&c.interval, c0, false));
            let r = asym_value(w, &c.interval, &asym_partner(&c.interval, c0, true));
            if r > l {
                (r, true)
            } else {
                (l, false)
            }
        })
        .collect();
    let vs: Vec<f64> = values.iter().map(|v| v.0).collect();
    let best = Best::of(&vs, |i| family[i].coarse);
    Ok(TestingReport {
        condition: "asym_ap".into(),
        estimate: best.value,
        witness: best.index.map_or(Value::Null, |i| {
            let q = family[i].interval;
            json!({
                "interval": interval_json(&q),
                "partner": interval_json(&asym_partner(&q, c0, values[i].1)),
            })
        }),
        budget: json!({ "family": family_budget(family), "c0": c0 }),
        converged: best.converged(),
    })
}

/// `s_Q(x) = |Q|/(|Q| + |x − x_Q|)`.
pub fn s_q(q: &Interval, x: f64) -> f64 {
    q.length() / (q.length() + (x - q.center()).abs())
}

/// Both sides of `1/(x−y) ≥ |Q|^{−1} s_Q(x) s_Q(y)` for `y < x`.
pub fn kernel_lower_bound(q: &Interval, x: f64, y: f64) -> (f64, f64) {
    (1.0 / (x - y), s_q(q, x) * s_q(q, y) / q.length())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NecessityProbe {
    /// `|Q|^{−p} ∫_{(a,∞)} s_Q^p dω · (∫_{(a−r,a)} s_Q^{p′} dσ)^p`.
    pub lhs: f64,
    /// `∫_{(a,∞)} |H(f_{a,r}σ)|^p dω`.
    pub h_integral: f64,
    /// `∫ |f_{a,r}|^p dσ = ∫_{(a−r,a)} s_Q^{p′} dσ`.
    pub f_norm: f64,
}

impl NecessityProbe {
    /// The operator-norm lower bound `∫|Hf σ|^p dω / ∫|f|^p dσ`.
    pub fn ratio(&self) -> f64 {
        if self.f_norm > 0.0 {
            self.h_integral / self.f_norm
        } else {
            0.0
        }
    }
}

/// The test function `f_{a,r} = χ_{(a−r,a)} s_Q^{p′−1}` applied to σ and
/// integrated against ω on `(a, ∞)`. The ω integral uses the same nodes on
/// both sides, so `lhs ≤ h_integral` holds node by node.
pub fn strengthened_ap_necessity_probe(w: &WeightPair, q: &Interval, a: f64, r: f64) -> Result<NecessityProbe> {
    if !(r > 0.0 && r.is_finite() && a.is_finite()) {
        return Err(Error::InvalidParameter(format!("need r > 0, got r = {r}")));
    }
    let (p, pd) = (w.p(), w.p_dual());
    let window = Interval::raw(a - r, a);
    let sigma = w.sigma.restrict(&[window]);
    let s_norm = sigma.integrate_power_kernel(q, pd)?;
    let zero = NecessityProbe {
        lhs: 0.0,
        h_integral: 0.0,
        f_norm: s_norm,
    };
    let Some((_, hi)) = w.omega.support_bounds() else {
        return Ok(zero);
    };
    if hi <= a || s_norm == 0.0 {
        return Ok(zero);
    }
    let right = Interval::raw(a, hi + w.omega.cell_length());
    let nodes: Vec<(f64, f64)> = measure_nodes(&w.omega, &right)
        .into_iter()
        .filter(|&(x, _)| x > a)
        .collect();
    let h = |x: f64| -> Result<f64> {
        let mut total = 0.0;
        for at in sigma.atoms() {
            total += at.mass * s_q(q, at.position).powf(pd - 1.0) / (x - at.position);
        }
        for pc in sigma.pieces() {
            let mut knots = vec![pc.left, pc.right];
            if pc.left < q.center() && q.center() < pc.right {
                knots.push(q.center());
            }
            let f = |y: f64| s_q(q, y).powf(pd - 1.0) / (x - y);
            total += pc.density * integrate_panels(&f, &knots, REL_TOL)?;
        }
        Ok(total)
    };
    let mut lhs = 0.0;
    let mut hint = 0.0;
    let scale = q.length().powf(-p) * s_norm.powf(p);
    for (x, wt) in nodes {
        lhs += wt * s_q(q, x).powf(p) * scale;
        hint += wt * h(x)?.abs().powf(p);
    }
    Ok(NecessityProbe {
        lhs,
        h_integral: hint,
        f_norm: s_norm,
    })
}

/// `∫ dν(z) / ((z − x)(z − y))`, the difference quotient
/// `[H(x) − H(y)]/(x − y)` of `H(x) = ∫ dν(z)/(z − x)`, for `x, y` off the
/// support of ν.
pub fn increment_quotient(nu: &Measure, x: f64, y: f64) -> f64 {
    let mut total = 0.0;
    for a in nu.atoms() {
        total += a.mass / ((a.position - x) * (a.position - y));
    }
    for pc in nu.pieces() {
        let (c, d) = (pc.left, pc.right);
        let direct = (d - c) / ((c - x) * (d - y));
        let u = direct * (x - y);
        let v = if u == 0.0 { direct } else { u.ln_1p() / (x - y) };
        total += pc.density * v;
    }
    total
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeccinequCheck {
    /// `ℙ(I;ν)`.
    pub poisson: f64,
    /// `ν(I)/|I| + 2|I| · min quotient`.
    pub bound: f64,
    pub min_quotient: f64,
}

pub const NECCINEQU_GRID: usize = 16;

/// Compares `ℙ(I;ν)` with the increment bound, the infimum taken over pairs
/// from a 16-point grid in `I`.
pub fn neccinequ_check(nu: &Measure, i: &Interval) -> Result<NeccinequCheck> {
    if nu.is_signed() {
        return Err(Error::SignedMeasure);
    }
    if nu.abs_mass(i) > 0.0 {
        return Err(Error::InvalidParameter("ν must be supported off I".into()));
    }
    let pts: Vec<f64> = (0..NECCINEQU_GRID)
        .map(|k| i.left + (k as f64 + 0.5) / NECCINEQU_GRID as f64 * i.length())
        .collect();
    let mut q = f64::INFINITY;
    for (a, &x) in pts.iter().enumerate() {
        for &y in &pts[a + 1..] {
            q = q.min(increment_quotient(nu, x, y));
        }
    }
    let poisson = crate::poisson::poisson_redef(i, nu)?;
    Ok(NeccinequCheck {
        poisson,
        bound: nu.mass(i) / i.length() + 2.0 * i.length() * q,
        min_quotient: q,
    })
}

fn f_from(v: &Value) -> Result<Vec<(i64, f64)>> {
    serde_json::from_value(v.clone()).map_err(|e| Error::Parse(e.to_string()))
}

fn budget_from<T: serde::de::DeserializeOwned>(v: Option<&Value>) -> Result<T> {
    serde_json::from_value(v.cloned().unwrap_or(Value::Null)).map_err(|e| Error::Parse(e.to_string()))
}

/// Recomputes a report's functional at its witness.
pub fn verify_witness(w: &WeightPair, report: &TestingReport) -> Result<f64> {
    let wit = &report.witness;
    if wit.is_null() {
        return Ok(0.0);
    }
    let interval = || interval_from(field(wit, "interval")?);
    match report.condition.as_str() {
        "ap" => Ok(ap_value(w, &interval()?)),
        "strengthened_ap" => Ok(strengthened_values(w, &interval()?)?.0),
        "half_strengthened_ap" => Ok(strengthened_values(w, &interval()?)?.1),
        "poisson" => Ok(poisson_ratio(w, &partition_from(wit)?)),
        "pivotal" => {
            let parts = partition_from(wit)?;
            let (lhs, rhs) = pivotal_dual(w, &parts.root, &parts)?;
            Ok(if rhs > 0.0 { lhs / rhs } else { 0.0 })
        }
        "forward_testing" => {
            let b: ForwardBudget = budget_from(report.budget.get("subsets"))?;
            let res = field(wit, "resolution")?.as_i64().unwrap_or(0) as i32;
            let cells: Vec<i64> =
                serde_json::from_value(field(wit, "cells")?.clone()).map_err(|e| Error::Parse(e.to_string()))?;
            Ok(forward_value(w, &interval()?, res, &cells, &b.search))
        }
        "dual_testing" => {
            let b: DualBudget = budget_from(report.budget.get("probes"))?;
            match field(wit, "branch")?.as_str() {
                Some("primal") => {
                    let res = field(wit, "resolution")?.as_i64().unwrap_or(0) as i32;
                    Ok(dual_primal_value(w, &interval()?, res, &f_from(field(wit, "f")?)?, &b.search))
                }
                _ => {
                    let k = field(wit, "perturbation")?.as_u64().unwrap_or(0);
                    dual_adjoint_value(w, &interval()?, k, &b)
                }
            }
        }
        "doubling_sigma" | "doubling_omega" => {
            let mu = if report.condition == "doubling_sigma" { &w.sigma } else { &w.omega };
            match wit.get("interval") {
                Some(v) if !v.is_null() => Ok(doubling_ratio(mu, &interval_from(v)?)),
                _ => Ok(0.0),
            }
        }
        "maximal" => match wit.get("f") {
            Some(f) => {
                let res = field(wit, "resolution")?.as_i64().unwrap_or(0) as i32;
                maximal_probe_value(w, res, &f_from(f)?)
            }
            None => maximal_testing_value(&w.sigma, &w.omega, &interval()?, w.p()),
        },
        "maximal_dual" => maximal_testing_value(&w.omega, &w.sigma, &interval()?, w.p_dual()),
        "asym_ap" => Ok(asym_value(w, &interval()?, &interval_from(field(wit, "partner")?)?)),
        other => Err(Error::InvalidParameter(format!("unknown condition `{other}`"))),
    }
}
