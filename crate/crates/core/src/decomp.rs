//! Superlevel sets of `T♮ν`, Whitney decompositions, Calderón–Zygmund
//! splits at a height `γ^t`, and the maximum-principle and good-λ monitors.
//!
//! Whitney geometry is decided exactly: every endpoint involved is an integer
//! multiple of a common unit `2^e/3`, and dilation constants are rationals.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::{locate, select_shifted_grid, smallest_covering, DyadicInterval, GridPoint, Shift};
use crate::error::{Error, Result};
use crate::measure::{pow2, Interval, Measure, StepAtomicMeasure, StepFunction, WeightPair};
use crate::operators::{maximal_fn, t_natural, t_natural_many, SearchBudget};
use crate::poisson::{poisson_bold, DiniModulus};

pub const MAX_MESH_CELLS: usize = 1 << 22;

/// A positive rational `num/den`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub num: u32,
    pub den: u32,
}

impl Ratio {
    pub const fn int(n: u32) -> Self {
        Self { num: n, den: 1 }
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

/// A finite union of mesh cells `[k 2^{−scale}, (k+1) 2^{−scale})`, read as
/// the open set formed by the interiors of its connected components.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellSet {
    pub scale: i32,
    pub cells: Vec<i64>,
}

impl CellSet {
    pub fn new(scale: i32, mut cells: Vec<i64>) -> Self {
        cells.sort_unstable();
        cells.dedup();
        Self { scale, cells }
    }

    pub fn cell_length(&self) -> f64 {
        pow2(-self.scale)
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Maximal runs `[k0, k1)` of consecutive cells.
    pub fn runs(&self) -> Vec<(i64, i64)> {
        let mut out: Vec<(i64, i64)> = Vec::new();
        for &k in &self.cells {
            match out.last_mut() {
                Some(r) if r.1 == k => r.1 = k + 1,
                _ => out.push((k, k + 1)),
            }
        }
        out
    }

    pub fn components(&self) -> Vec<Interval> {
        let h = self.cell_length();
        self.runs()
            .into_iter()
            .map(|(a, b)| Interval::raw(a as f64 * h, b as f64 * h))
            .collect()
    }

    pub fn contains(&self, x: f64) -> bool {
        let k = (x / self.cell_length()).floor() as i64;
        self.cells.binary_search(&k).is_ok()
    }

    pub fn measure(&self) -> f64 {
        self.cells.len() as f64 * self.cell_length()
    }

    /// Whether every cell lies in `other`; both must share a scale.
    pub fn is_subset_of(&self, other: &CellSet) -> bool {
        self.scale == other.scale && self.cells.iter().all(|k| other.cells.binary_search(k).is_ok())
    }
}

/// `{x : T♮ν(x) > 2^k}` sampled at the centers of mesh cells of length
/// `2^{−mesh_scale}`.
pub fn superlevel_set(nu: &Measure, k: i32, mesh_scale: i32, budget: &SearchBudget) -> Result<CellSet> {
    let Some((lo, hi)) = nu.support_bounds() else {
        return Ok(CellSet::new(mesh_scale, Vec::new()));
    };
    // |T_{ε,R}ν(x)| ≤ ‖ν‖ / dist(x, supp ν)
    let margin = nu.total_variation() / pow2(k);
    let h = pow2(-mesh_scale);
    let kl = ((lo - margin) / h).floor() as i64;
    let kr = ((hi + margin) / h).ceil() as i64;
    if kr - kl > MAX_MESH_CELLS as i64 {
        return Err(Error::InvalidParameter(format!(
            "superlevel mesh needs {} cells (limit {MAX_MESH_CELLS})",
            kr - kl
        )));
    }
    let ks: Vec<i64> = (kl..kr).collect();
    let centers: Vec<f64> = ks.iter().map(|&c| (c as f64 + 0.5) * h).collect();
    let values = t_natural_many(nu, &centers, budget);
    let level = pow2(k);
    let cells = ks
        .into_iter()
        .zip(values)
        .filter(|(_, v)| v.value > level)
        .map(|(c, _)| c)
        .collect();
    Ok(CellSet::new(mesh_scale, cells))
}

/// Integer coordinates in units of `2^ue / (3·2·m)`.
#[derive(Clone, Copy, Debug)]
struct Lattice {
    ue: i32,
    m: i128,
}

impl Lattice {
    fn new(ue: i32, ratios: &[Ratio]) -> Self {
        let m = ratios.iter().map(|r| r.den as i128).product();
        Self { ue, m }
    }

    fn point(&self, p: GridPoint) -> i128 {
        let n = if p.exp >= self.ue {
            p.num << (p.exp - self.ue)
        } else {
            let s = self.ue - p.exp;
            debug_assert_eq!(p.num & ((1i128 << s) - 1), 0, "point off the lattice");
            p.num >> s
        };
        2 * self.m * n
    }

    fn mesh(&self, k: i64, scale: i32) -> i128 {
        self.point(GridPoint::from_f64(k as f64 * pow2(-scale)))
    }

    /// Endpoints of `ρ·Q`.
    fn dilate(&self, q: &DyadicInterval, rho: Ratio) -> (i128, i128) {
        let l = q.left_exact();
        let base = if l.exp >= self.ue {
            l.num << (l.exp - self.ue)
        } else {
            l.num >> (self.ue - l.exp)
        };
        let len = 3i128 << (q.scale - self.ue);
        let c = (2 * base + len) * self.m;
        let h = rho.num as i128 * len * (self.m / rho.den as i128);
        (c - h, c + h)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WhitneyParams {
    pub rw: Ratio,
    pub n: Ratio,
    pub shift: Shift,
    /// Cubes stop this many scales below the mesh scale.
    pub depth: u32,
}

impl Default for WhitneyParams {
    fn default() -> Self {
        Self {
            rw: Ratio::int(12),
            n: Ratio::int(9),
            shift: Shift::Zero,
            depth: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WhitneyDecomposition {
    pub level: i32,
    pub omega: CellSet,
    pub params: WhitneyParams,
    pub min_scale: i32,
    /// Sorted left to right.
    pub cubes: Vec<DyadicInterval>,
    /// Length of Ω left uncovered by the scale cutoff.
    pub residual: f64,
}

impl WhitneyDecomposition {
    fn lattice(&self) -> Lattice {
        Lattice::new(self.min_scale - 2, &[self.params.rw, self.params.n])
    }

    fn components(&self, lat: &Lattice) -> Vec<(i128, i128)> {
        self.omega
            .runs()
            .into_iter()
            .map(|(a, b)| (lat.mesh(a, self.omega.scale), lat.mesh(b, self.omega.scale)))
            .collect()
    }
}

fn component_of(comps: &[(i128, i128)], lo: i128, hi: i128) -> Option<(i128, i128)> {
    let i = comps.partition_point(|c| c.1 <= lo);
    comps.get(i).copied().filter(|c| c.0 < hi)
}

/// Whether `[lo, hi)` lies in the open component `(a, b)`.
fn inside(lo: i128, hi: i128, c: (i128, i128)) -> bool {
    c.0 < lo && hi <= c.1
}

/// The maximal `D^α` cubes `Q` with `R_W·Q ⊆ Ω`, down to `depth` scales
/// below the mesh.
pub fn whitney(omega: &CellSet, level: i32, params: &WhitneyParams) -> Result<WhitneyDecomposition> {
    for r in [params.rw, params.n] {
        if r.den == 0 || r.num < r.den {
            return Err(Error::InvalidParameter(format!(
                "dilation {}/{} must be at least 1",
                r.num, r.den
            )));
        }
    }
    let min_scale = -(omega.scale + params.depth as i32);
    let mut wd = WhitneyDecomposition {
        level,
        omega: omega.clone(),
        params: params.clone(),
        min_scale,
        cubes: Vec::new(),
        residual: 0.0,
    };
    let lat = wd.lattice();
    let h = omega.cell_length();
    for (run, comp) in omega.runs().into_iter().zip(wd.components(&lat)) {
        let (af, bf) = (run.0 as f64 * h, run.1 as f64 * h);
        let j0 = ((bf - af) / params.rw.value()).log2().floor() as i32;
        let j0 = j0.max(min_scale);
        let first = locate(params.shift, af, j0);
        let last = locate(params.shift, bf, j0);
        let mut stack: Vec<DyadicInterval> = (first.index..=last.index)
            .rev()
            .map(|k| DyadicInterval::new(j0, k, params.shift))
            .collect();
        while let Some(q) = stack.pop() {
            let ql = lat.point(q.left_exact());
            let qr = lat.point(q.right_exact());
            if !(ql < comp.1 && comp.0 < qr) {
                continue;
            }
            let (dl, dr) = lat.dilate(&q, params.rw);
            if inside(dl, dr, comp) {
                wd.cubes.push(q);
            } else if q.scale > min_scale {
                let [c0, c1] = q.children();
                stack.push(c1);
                stack.push(c0);
            } else {
                let a = q.left().max(af);
                let b = q.right().min(bf);
                wd.residual += (b - a).max(0.0);
            }
        }
    }
    wd.cubes.sort_by_key(|q| q.left_exact());
    Ok(wd)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WhitneyCheck {
    pub cubes: usize,
    /// Pairwise disjoint and contained in Ω.
    pub disjoint: bool,
    /// `|Ω| − Σ|Q| − residual`.
    pub cover_defect: f64,
    /// `R_W·Q ⊆ Ω` for every cube.
    pub inner: bool,
    /// `3R_W·Q ∩ Ω^c ≠ ∅` for every cube.
    pub outer: bool,
    /// `max Σ χ_{N·Q}`.
    pub overlap: usize,
    /// `N·Q ⊆ Ω` for every cube, so the overlap sum vanishes off Ω.
    pub overlap_inside: bool,
    /// `max_Q #{Q_s : Q_s ∩ N·Q ≠ ∅}`.
    pub crowd: usize,
}

impl WhitneyCheck {
    pub fn holds(&self, overlap_max: usize) -> bool {
        self.disjoint
            && self.cover_defect.abs() <= 1e-12 * (1.0 + self.cover_defect.abs())
            && self.inner
            && self.outer
            && self.overlap_inside
            && self.overlap <= overlap_max
    }
}

pub fn verify_whitney(wd: &WhitneyDecomposition) -> WhitneyCheck {
    let lat = wd.lattice();
    let comps = wd.components(&lat);
    let p = &wd.params;
    let ends: Vec<(i128, i128)> = wd
        .cubes
        .iter()
        .map(|q| (lat.point(q.left_exact()), lat.point(q.right_exact())))
        .collect();
    let mut disjoint = ends.windows(2).all(|w| w[0].1 <= w[1].0);
    let mut inner = true;
    let mut outer = true;
    let mut overlap_inside = true;
    let mut covered = 0.0;
    for (q, &(l, r)) in wd.cubes.iter().zip(&ends) {
        covered += q.length();
        let Some(c) = component_of(&comps, l, r) else {
            disjoint = false;
            continue;
        };
        disjoint &= c.0 <= l && r <= c.1;
        let (dl, dr) = lat.dilate(q, p.rw);
        inner &= inside(dl, dr, c);
        let big = Ratio {
            num: 3 * p.rw.num,
            den: p.rw.den,
        };
        let (bl, br) = lat.dilate(q, big);
        outer &= !inside(bl, br, c);
        let (nl, nr) = lat.dilate(q, p.n);
        overlap_inside &= inside(nl, nr, c);
    }
    let mut events: Vec<(i128, i32)> = Vec::with_capacity(2 * wd.cubes.len());
    let dil: Vec<(i128, i128)> = wd.cubes.iter().map(|q| lat.dilate(q, p.n)).collect();
    for &(l, r) in &dil {
        events.push((l, 1));
        events.push((r, -1));
    }
    events.sort();
    let (mut cur, mut overlap) = (0i32, 0i32);
    for (_, d) in events {
        cur += d;
        overlap = overlap.max(cur);
    }
    let crowd = dil
        .iter()
        .map(|&(l, r)| {
            let a = ends.partition_point(|e| e.1 <= l);
            let b = ends.partition_point(|e| e.0 < r);
            b.saturating_sub(a)
        })
        .max()
        .unwrap_or(0);
    WhitneyCheck {
        cubes: wd.cubes.len(),
        disjoint,
        cover_defect: wd.omega.measure() - covered - wd.residual,
        inner,
        outer,
        overlap: overlap.max(0) as usize,
        overlap_inside,
        crowd,
    }
}

/// Pairs `(Q, B)` from two decompositions with `Q ⊊ B` and
/// `level(Q) ≤ level(B)`; the nested property says there are none.
pub fn nested_violations(decomps: &[WhitneyDecomposition]) -> usize {
    let mut bad = 0;
    for a in decomps {
        for b in decomps {
            if a.level > b.level || std::ptr::eq(a, b) {
                continue;
            }
            for q in &a.cubes {
                let i = b.cubes.partition_point(|c| c.right_exact() <= q.left_exact());
                if let Some(c) = b.cubes.get(i) {
                    if c.shift == q.shift && c.contains(q) && c != q {
                        bad += 1;
                    }
                }
            }
        }
    }
    bad
}

/// `(min, max)` of `ℓ(Q)/ℓ(B)` over `Q` in `grid_d`, `B` in `grid_alpha` with
/// `B ⊆ N·Q`.
pub fn comparability(grid_d: &WhitneyDecomposition, grid_alpha: &WhitneyDecomposition) -> Option<(f64, f64)> {
    let n = grid_d.params.n.value();
    let mut range: Option<(f64, f64)> = None;
    for q in &grid_d.cubes {
        let nq = q.dilate(n);
        let (gl, gr) = (GridPoint::from_f64(nq.left), GridPoint::from_f64(nq.right));
        let i = grid_alpha.cubes.partition_point(|b| b.left_exact() < gl);
        for b in &grid_alpha.cubes[i..] {
            if b.left_exact() >= gr {
                break;
            }
            if b.right_exact() <= gr {
                let r = q.length() / b.length();
                range = Some(range.map_or((r, r), |(lo, hi)| (lo.min(r), hi.max(r))));
            }
        }
    }
    range
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftedChainReport {
    pub pairs: usize,
    /// `M` with `Q̂ ⊆ M·Q` for every cube.
    pub m: u32,
    /// `R_W′ = R_W / M`.
    pub rw_prime: Ratio,
    /// No cube of the `D^α` decomposition contains `Q̂`.
    pub missing_tilde: usize,
    pub triple_in_hat: usize,
    pub triple_tilde_in_nq: usize,
    pub nq_in_omega: usize,
    /// Smallest `N` with `3Q̃ ⊆ N·Q` for every pair.
    pub required_n: f64,
    /// [`chain_constant`] for these parameters.
    pub derived_n: Option<u32>,
}

impl ShiftedChainReport {
    pub fn holds(&self) -> bool {
        self.missing_tilde == 0
            && self.triple_in_hat == 0
            && self.triple_tilde_in_nq == 0
            && self.nq_in_omega == 0
    }
}

/// Smallest `N` for which `3Q̃ ⊆ N·Q` follows from the construction alone:
/// `|Q̃|/|Q|` is a power of two below `(3R_W − 1)/(R_W/M − 1)`, and `3Q̃`
/// reaches `2|Q̃| − |Q|/2` from the centre of `Q`.
pub fn chain_constant(rw: Ratio, m: u32) -> Option<u32> {
    let rw_prime = rw.value() / m as f64;
    if rw_prime <= 1.0 {
        return None;
    }
    let bound = (3.0 * rw.value() - 1.0) / (rw_prime - 1.0);
    let r = 1u32 << (bound.log2().floor().max(0.0) as u32);
    Some(4 * r - 1)
}

/// Parameters under which the shifted chain closes: `R_W = 32M` and the
/// derived `N`, which stays below `R_W` so that `N·Q ⊆ Ω`.
pub fn chain_params(base: &WhitneyParams, m: u32) -> WhitneyParams {
    let rw = Ratio::int(32 * m.max(1));
    let n = chain_constant(rw, m.max(1)).expect("R_W/M = 32");
    WhitneyParams {
        rw,
        n: Ratio::int(n),
        ..base.clone()
    }
}

/// The chain `3Q ⊆ Q̂ ⊆ Q̃ ⊆ 3Q̃ ⊆ N·Q ⊆ Ω` for every cube of a `D^0`
/// decomposition, with `Q̃` the cube of the `D^α` decomposition (constant
/// `R_W/M`) containing `Q̂`. Failure counts per link.
pub fn shifted_chain(wd: &WhitneyDecomposition) -> Result<ShiftedChainReport> {
    let sels: Vec<_> = wd.cubes.iter().map(|q| select_shifted_grid(&q.interval())).collect();
    let m = sels
        .iter()
        .map(|s| s.dilation_bound.ceil() as u32)
        .max()
        .unwrap_or(1)
        .max(1);
    let rw_prime = Ratio {
        num: wd.params.rw.num,
        den: wd.params.rw.den * m,
    };
    let mut report = ShiftedChainReport {
        pairs: wd.cubes.len(),
        m,
        rw_prime,
        missing_tilde: 0,
        triple_in_hat: 0,
        triple_tilde_in_nq: 0,
        nq_in_omega: 0,
        required_n: 0.0,
        derived_n: chain_constant(wd.params.rw, m),
    };
    if rw_prime.num < rw_prime.den {
        report.missing_tilde = wd.cubes.len();
        return Ok(report);
    }
    let mut by_shift = Vec::new();
    for shift in Shift::ALL {
        let params = WhitneyParams {
            rw: rw_prime,
            shift,
            ..wd.params.clone()
        };
        by_shift.push(whitney(&wd.omega, wd.level, &params)?);
    }
    let lat = Lattice::new(wd.min_scale - 2, &[wd.params.rw, wd.params.n, rw_prime]);
    let comps: Vec<(i128, i128)> = wd
        .omega
        .runs()
        .into_iter()
        .map(|(a, b)| (lat.mesh(a, wd.omega.scale), lat.mesh(b, wd.omega.scale)))
        .collect();
    for (q, sel) in wd.cubes.iter().zip(&sels) {
        let hat = sel.hat;
        let (tl, tr) = lat.dilate(q, Ratio::int(3));
        let (hl, hr) = (lat.point(hat.left_exact()), lat.point(hat.right_exact()));
        if !(hl <= tl && tr <= hr) {
            report.triple_in_hat += 1;
        }
        let (nl, nr) = lat.dilate(q, wd.params.n);
        if component_of(&comps, nl, nr).is_none_or(|c| !inside(nl, nr, c)) {
            report.nq_in_omega += 1;
        }
        let bs = &by_shift[Shift::ALL.iter().position(|&s| s == hat.shift).expect("known shift")].cubes;
        let i = bs.partition_point(|b| b.right_exact() <= hat.left_exact());
        let Some(tilde) = bs.get(i).filter(|b| b.contains(&hat)) else {
            report.missing_tilde += 1;
            continue;
        };
        let (al, ar) = lat.dilate(tilde, Ratio::int(3));
        if !(nl <= al && ar <= nr) {
            report.triple_tilde_in_nq += 1;
        }
        let t3 = tilde.dilate(3.0);
        let c = q.center();
        report.required_n = report
            .required_n
            .max(2.0 * (c - t3.left).max(t3.right - c) / q.length());
    }
    Ok(report)
}

/// The error-free difference `a − b = hi + lo`.
pub fn two_diff(a: f64, b: f64) -> (f64, f64) {
    let s = a - b;
    let bb = s - a;
    let err = (a - (s - bb)) - (b + bb);
    (s, err)
}

fn neumaier(values: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for v in values {
        let t = s + v;
        if s.abs() >= v.abs() {
            c += (s - t) + v;
        } else {
            c += (v - t) + s;
        }
        s = t;
    }
    s + c
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Principal {
    pub cube: DyadicInterval,
    /// `A_G = ∫_G f dσ / |G|_σ`.
    pub average: f64,
    /// `∫_G |f| dσ / |G|_σ`.
    pub abs_average: f64,
    pub sigma_mass: f64,
    /// `|P(G)|_σ / |G|_σ`; infinite for a root.
    pub parent_ratio: f64,
    /// A root whose own average already exceeds the threshold.
    pub top: bool,
}

/// `b_r = (f − A_G) χ_G`, stored per `f`-cell as the unevaluated sum
/// `hi + lo`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BadPart {
    pub home: DyadicInterval,
    pub values: Vec<(i64, f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CzDecomposition {
    pub shift: Shift,
    pub gamma: f64,
    pub t: i32,
    pub threshold: f64,
    pub resolution: i32,
    pub roots: Vec<DyadicInterval>,
    pub principal: Vec<Principal>,
    pub bad: Vec<BadPart>,
    /// Cubes at the depth cutoff that still straddle an `f`-cell boundary.
    pub unresolved: usize,
    /// Some principal cube has `|P(G)|_σ > γ |G|_σ`.
    pub doubling_warning: bool,
}

impl CzDecomposition {
    fn principal_at(&self, x: f64) -> Option<&Principal> {
        let p = GridPoint::from_f64(x);
        let i = self.principal.partition_point(|g| g.cube.right_exact() <= p);
        self.principal.get(i).filter(|g| g.cube.left_exact() <= p)
    }

    /// `g(x)`: `A_G` on a principal cube `G`, `f(x)` elsewhere.
    pub fn good_at(&self, f: &StepFunction, x: f64) -> f64 {
        self.principal_at(x).map_or(f.value_at(x), |g| g.average)
    }

    /// `h(x) = Σ_r b_r(x)` as `(hi, lo)`.
    pub fn bad_at(&self, f: &StepFunction, x: f64) -> (f64, f64) {
        match self.principal_at(x) {
            Some(g) => two_diff(f.value_at(x), g.average),
            None => (0.0, 0.0),
        }
    }
}

/// `∫_{Q ∩ cell} |f|^e... ` helpers over the cells of a step function.
struct StepIntegrals<'a> {
    f: &'a StepFunction,
    sigma: &'a Measure,
}

impl StepIntegrals<'_> {
    fn cell(&self, k: i64) -> Interval {
        let h = self.f.cell_length();
        Interval::raw(k as f64 * h, (k + 1) as f64 * h)
    }

    /// `(∫_Q f dσ, ∫_Q |f| dσ)`.
    fn integrals(&self, q: &Interval) -> (f64, f64) {
        let h = self.f.cell_length();
        let kl = (q.left / h).floor() as i64;
        let kr = (q.right / h).ceil() as i64;
        let (mut s, mut a) = (0.0, 0.0);
        for (&k, &v) in self.f.values.range(kl..kr) {
            if let Some(part) = self.cell(k).intersect(q) {
                let m = self.sigma.mass(&part);
                s += v * m;
                a += v.abs() * m;
            }
        }
        (s, a)
    }

    /// `Q` lies inside one `f`-cell or meets none with a nonzero value.
    fn homogeneous(&self, q: &DyadicInterval) -> bool {
        let h = self.f.cell_length();
        let iv = q.interval();
        let kl = (iv.left / h).floor() as i64;
        let kr = (iv.right / h).ceil() as i64;
        if self.f.values.range(kl..kr).next().is_none() {
            return true;
        }
        let k = locate(Shift::Zero, iv.left, -self.f.resolution).index;
        let cell = DyadicInterval::new(-self.f.resolution, k, Shift::Zero);
        cell.contains(q)
    }
}

/// Top cubes of the grid covering the σ support: one cube, or in `D^0` one
/// per side of the origin when the support straddles it.
fn cz_roots(sigma: &Measure, shift: Shift) -> Result<Vec<DyadicInterval>> {
    let Some((lo, hi)) = sigma.support_bounds() else {
        return Ok(Vec::new());
    };
    match smallest_covering(shift, lo, hi) {
        Ok(q) => Ok(vec![q]),
        Err(Error::NoCoveringCube) if shift == Shift::Zero => {
            let mut v = Vec::new();
            if lo < 0.0 {
                v.push(smallest_covering(shift, lo, -f64::MIN_POSITIVE)?);
            }
            if hi >= 0.0 {
                v.push(smallest_covering(shift, 0.0, hi)?);
            }
            Ok(v)
        }
        Err(e) => Err(e),
    }
}

/// `max σ(P(Q))/σ(Q)` over the cubes of the tree below the roots down to
/// `min_scale`, at least 2: the γ for which every principal cube obeys the
/// average bound.
pub fn tree_doubling(sigma: &Measure, shift: Shift, min_scale: i32) -> Result<f64> {
    let mut gamma: f64 = 2.0;
    for root in cz_roots(sigma, shift)? {
        let mut stack = vec![root];
        while let Some(q) = stack.pop() {
            let m = sigma.mass(&q.interval());
            if m == 0.0 || q.scale <= min_scale {
                continue;
            }
            for c in q.children() {
                let mc = sigma.mass(&c.interval());
                if mc > 0.0 {
                    gamma = gamma.max(m / mc);
                    stack.push(c);
                }
            }
        }
    }
    Ok(gamma)
}


/// Smallest `t` with every root average of `|f|` at most `γ^t`; from there on
/// no root is principal.
pub fn root_height(f: &StepFunction, sigma: &StepAtomicMeasure, gamma: f64, shift: Shift) -> Result<i32> {
    let ints = StepIntegrals { f, sigma };
    let mut t = i32::MIN;
    for r in cz_roots(sigma.measure(), shift)? {
        let iv = r.interval();
        let m = sigma.mass(&iv);
        let a = ints.integrals(&iv).1 / m;
        if m > 0.0 && a > 0.0 {
            let mut k = a.log(gamma).ceil() as i32;
            while gamma.powi(k) < a {
                k += 1;
            }
            while gamma.powi(k - 1) >= a {
                k -= 1;
            }
            t = t.max(k);
        }
    }
    Ok(t)
}

/// Calderón–Zygmund split of `f` at height `γ^t` in `D^α`: principal cubes
/// are the maximal cubes with σ-average of `|f|` above `γ^t`; `g` replaces `f`
/// by its σ-average on each of them and `h = f − g = Σ_r b_r`.
pub fn cz_split(
    f: &StepFunction,
    sigma: &StepAtomicMeasure,
    gamma: f64,
    t: i32,
    shift: Shift,
    depth: u32,
) -> Result<CzDecomposition> {
    if !(gamma >= 2.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!("γ = {gamma} must be at least 2")));
    }
    if sigma.signed() {
        return Err(Error::SignedMeasure);
    }
    let threshold = gamma.powi(t);
    let ints = StepIntegrals { f, sigma };
    let roots = cz_roots(sigma, shift)?;
    let min_scale = -(f.resolution.max(sigma.resolution()) + depth as i32);
    let mut cz = CzDecomposition {
        shift,
        gamma,
        t,
        threshold,
        resolution: f.resolution,
        roots: roots.clone(),
        principal: Vec::new(),
        bad: Vec::new(),
        unresolved: 0,
        doubling_warning: false,
    };
    for root in &roots {
        let mut stack = vec![(*root, true)];
        while let Some((q, is_root)) = stack.pop() {
            let iv = q.interval();
            let sm = sigma.mass(&iv);
            if sm == 0.0 {
                continue;
            }
            let (s, a) = ints.integrals(&iv);
            if a / sm > threshold {
                let parent_ratio = if is_root {
                    f64::INFINITY
                } else {
                    sigma.mass(&q.parent().interval()) / sm
                };
                cz.doubling_warning |= !is_root && parent_ratio > gamma;
                cz.principal.push(Principal {
                    cube: q,
                    average: s / sm,
                    abs_average: a / sm,
                    sigma_mass: sm,
                    parent_ratio,
                    top: is_root,
                });
            } else if ints.homogeneous(&q) {
                continue;
            } else if q.scale > min_scale {
                let [c0, c1] = q.children();
                stack.push((c1, false));
                stack.push((c0, false));
            } else {
                cz.unresolved += 1;
            }
        }
    }
    cz.principal.sort_by_key(|g| g.cube.left_exact());
    let h = f.cell_length();
    for g in &cz.principal {
        let iv = g.cube.interval();
        let kl = (iv.left / h).floor() as i64;
        let kr = (iv.right / h).ceil() as i64;
        let mut values = Vec::new();
        for k in kl..kr {
            let Some(part) = ints.cell(k).intersect(&iv) else {
                continue;
            };
            if sigma.mass(&part) == 0.0 {
                continue;
            }
            let (hi, lo) = two_diff(f.values.get(&k).copied().unwrap_or(0.0), g.average);
            values.push((k, hi, lo));
        }
        cz.bad.push(BadPart { home: g.cube, values });
    }
    Ok(cz)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CzCheck {
    /// `max |g| / γ^{t+1}` over σ-charged cells outside principal roots.
    pub good_ratio: f64,
    /// `max_r |∫ b_r dσ| / ∫|f| dσ`.
    pub mean_zero_defect: f64,
    /// `f = g + h` on every stored cell, error-free.
    pub split_exact: bool,
    /// Averages in `(γ^t, γ^{t+1}]` and parents at most `γ^t`, roots aside.
    pub average_bounds: bool,
}

impl CzCheck {
    pub fn holds(&self) -> bool {
        self.good_ratio <= 1.0 && self.mean_zero_defect <= 1e-12 && self.split_exact && self.average_bounds
    }
}

pub fn verify_cz(cz: &CzDecomposition, f: &StepFunction, sigma: &StepAtomicMeasure) -> CzCheck {
    let ints = StepIntegrals { f, sigma };
    let cap = cz.gamma * cz.threshold;
    let mut good: f64 = 0.0;
    let mut average_bounds = true;
    for g in &cz.principal {
        if !g.top {
            good = good.max(g.average.abs() / cap);
            average_bounds &= g.abs_average > cz.threshold && g.abs_average <= cap;
            let piv = g.cube.parent().interval();
            let (_, a) = ints.integrals(&piv);
            average_bounds &= a / sigma.mass(&piv) <= cz.threshold;
        }
    }
    // off the principal cubes g = f
    for (&k, &v) in &f.values {
        let cell = ints.cell(k);
        let inside: f64 = cz
            .principal
            .iter()
            .filter_map(|g| g.cube.interval().intersect(&cell))
            .map(|part| sigma.mass(&part))
            .sum();
        let total = sigma.mass(&cell);
        if total - inside > 1e-12 * total {
            good = good.max(v.abs() / cap);
        }
    }
    let mass = ints
        .f
        .values
        .iter()
        .map(|(&k, &v)| v.abs() * sigma.mass(&ints.cell(k)))
        .sum::<f64>();
    let mut defect: f64 = 0.0;
    let mut split_exact = true;
    for (b, g) in cz.bad.iter().zip(&cz.principal) {
        let iv = b.home.interval();
        let integral = neumaier(b.values.iter().flat_map(|&(k, hi, lo)| {
            let m = ints.cell(k).intersect(&iv).map_or(0.0, |p| sigma.mass(&p));
            [hi * m, lo * m]
        }));
        if mass > 0.0 {
            defect = defect.max(integral.abs() / mass);
        }
        for &(k, hi, lo) in &b.values {
            let fk = f.values.get(&k).copied().unwrap_or(0.0);
            split_exact &= two_diff(fk, g.average) == (hi, lo);
        }
    }
    CzCheck {
        good_ratio: good,
        mean_zero_defect: defect,
        split_exact,
        average_bounds,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summability {
    /// `Σ_t γ^{pt} Σ_s |G_s^t|_σ` over all heights.
    pub sum: f64,
    /// `‖f‖^p_{L^p(σ)}`.
    pub norm_p: f64,
    pub measured_c: f64,
    /// `(p′)^p / (1 − γ^{−p})`, from the dyadic maximal theorem.
    pub bound: f64,
}

/// `Σ_t γ^{pt} |Γ_t|_σ` with `Γ_t = {𝓜^α_σ f > γ^t}`, summed over every
/// height; the levels below the point where every root exceeds the height
/// form a closed-form geometric tail.
pub fn principal_summability(
    f: &StepFunction,
    sigma: &StepAtomicMeasure,
    gamma: f64,
    p: f64,
    shift: Shift,
    depth: u32,
) -> Result<Summability> {
    let norm_p = f.lp_norm_pow(sigma, p);
    let pd = p / (p - 1.0);
    let bound = pd.powf(p) / (1.0 - gamma.powf(-p));
    let top = f.max_abs();
    if norm_p == 0.0 || top == 0.0 {
        return Ok(Summability {
            sum: 0.0,
            norm_p,
            measured_c: 0.0,
            bound,
        });
    }
    let ints = StepIntegrals { f, sigma };
    let roots = cz_roots(sigma, shift)?;
    let root_avgs: Vec<(f64, f64)> = roots
        .iter()
        .map(|r| {
            let iv = r.interval();
            let m = sigma.mass(&iv);
            (ints.integrals(&iv).1 / m, m)
        })
        .collect();
    let min_root = root_avgs
        .iter()
        .filter(|r| r.0 > 0.0)
        .map(|r| r.0)
        .fold(f64::INFINITY, f64::min);
    let mut t = top.log(gamma).ceil() as i32 + 1;
    let mut sum = 0.0;
    loop {
        let level = gamma.powi(t);
        if level < min_root {
            let charged: f64 = root_avgs.iter().filter(|r| r.0 > 0.0).map(|r| r.1).sum();
            sum += gamma.powf(p * t as f64) * charged / (1.0 - gamma.powf(-p));
            break;
        }
        let cz = cz_split(f, sigma, gamma, t, shift, depth)?;
        sum += gamma.powf(p * t as f64) * cz.principal.iter().map(|g| g.sigma_mass).sum::<f64>();
        t -= 1;
    }
    Ok(Summability {
        sum,
        norm_p,
        measured_c: sum / norm_p,
        bound,
    })
}

/// `(max |A_{G^{t+1}}| / γ^{t+1}, max |A_{G^{t+1}}| / γ^{t+2})` over the
/// principal cubes one height up: the bound on the good function when it
/// averages over the next generation inside each `G^t`.
pub fn nested_good_ratio(
    f: &StepFunction,
    sigma: &StepAtomicMeasure,
    gamma: f64,
    t: i32,
    shift: Shift,
    depth: u32,
) -> Result<(f64, f64)> {
    let cz = cz_split(f, sigma, gamma, t + 1, shift, depth)?;
    let m = cz
        .principal
        .iter()
        .filter(|g| !g.top)
        .map(|g| g.average.abs())
        .fold(0.0, f64::max);
    Ok((m / gamma.powi(t + 1), m / gamma.powi(t + 2)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxPrincipleReport {
    /// `max (sup_{x∈Q} T♮(χ_{(3Q)^c}ν)(x) − 2^k) / 𝐏(Q,ν)` over cubes.
    pub c: f64,
    pub cubes: usize,
    /// Cubes with positive excess but `𝐏(Q,ν) = 0`.
    pub flagged: usize,
}

pub fn max_principle_check(
    nu: &Measure,
    wd: &WhitneyDecomposition,
    samples_per_cube: usize,
    budget: &SearchBudget,
    delta: &DiniModulus,
) -> MaxPrincipleReport {
    let level = pow2(wd.level);
    let per_cube: Vec<(f64, bool)> = wd
        .cubes
        .par_iter()
        .map(|q| {
            let iv = q.interval();
            let outside = nu.restrict_complement(&q.dilate(3.0));
            let n = samples_per_cube.max(1);
            let sup = (0..n)
                .map(|i| {
                    let x = iv.left + (i as f64 + 0.5) / n as f64 * iv.length();
                    t_natural(&outside, x, budget).value
                })
                .fold(0.0, f64::max);
            let excess = sup - level;
            if excess <= 0.0 {
                return (0.0, false);
            }
            let pq = poisson_bold(&iv, nu, delta);
            if pq == 0.0 {
                (0.0, true)
            } else {
                (excess / pq, false)
            }
        })
        .collect();
    MaxPrincipleReport {
        c: per_cube.iter().map(|r| r.0).fold(0.0, f64::max),
        cubes: wd.cubes.len(),
        flagged: per_cube.iter().filter(|r| r.1).count(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoodLambda {
    /// `ω{T♮(fσ) > 2^{k+1}, 𝓜(fσ) ≤ β 2^k}`.
    pub lhs: f64,
    /// `ω{T♮(fσ) > 2^k}`.
    pub term1: f64,
    /// `β^{−p} 2^{−kp} ∫|f|^p dσ`.
    pub term2: f64,
}

/// The three good-λ quantities, sampled at centers of the mesh cells of
/// length `2^{−mesh_scale}` that carry ω-mass.
pub fn good_lambda_check(
    w: &WeightPair,
    f: &StepFunction,
    beta: f64,
    k: i32,
    mesh_scale: i32,
    budget: &SearchBudget,
) -> Result<GoodLambda> {
    let p = w.p();
    let term2 = beta.powf(-p) * pow2(-k).powf(p) * f.lp_norm_pow(&w.sigma, p);
    let nu = w.sigma.times(f);
    let zero = GoodLambda {
        lhs: 0.0,
        term1: 0.0,
        term2,
    };
    let (Some((lo, hi)), false) = (w.omega.support_bounds(), nu.is_zero()) else {
        return Ok(zero);
    };
    let h = pow2(-mesh_scale);
    let kl = (lo / h).floor() as i64;
    let kr = (hi / h).floor() as i64 + 1;
    if kr - kl > MAX_MESH_CELLS as i64 {
        return Err(Error::InvalidParameter(format!(
            "good-λ mesh needs {} cells (limit {MAX_MESH_CELLS})",
            kr - kl
        )));
    }
    let abs_nu = nu.abs();
    let cells: Vec<(f64, f64)> = (kl..kr)
        .filter_map(|c| {
            let iv = Interval::raw(c as f64 * h, (c + 1) as f64 * h);
            let m = w.omega.mass(&iv);
            (m > 0.0).then(|| (iv.center(), m))
        })
        .collect();
    let parts = cells
        .par_iter()
        .map(|&(x, m)| {
            let t = t_natural(&nu, x, budget).value;
            let mx = maximal_fn(&abs_nu, x)?.value;
            let big = t > pow2(k + 1) && mx <= beta * pow2(k);
            Ok((if big { m } else { 0.0 }, if t > pow2(k) { m } else { 0.0 }))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    Ok(GoodLambda {
        lhs: parts.iter().map(|p| p.0).sum(),
        term1: parts.iter().map(|p| p.1).sum(),
        term2,
    })
}
