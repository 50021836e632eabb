//! Smooth truncations of the Hilbert kernel, their suprema, maximal
//! functions, and linearizations.
//!
//! With the smoothstep cutoffs every truncated integral is a combination of
//! the moments `∫ t^k dν`, `k ∈ {−1, 0, 1, 2}`, over at most three windows in
//! the distance variable `t = |x − y|`. [`PointPotential`] stores these
//! moments as prefix sums for one evaluation point, so each truncation costs
//! `O(log n)` and the parameter searches stay cheap.
//!
//! [`t_trunc_quadrature`] evaluates the same integrals for an arbitrary
//! [`Kernel`] by adaptive quadrature and serves as the independent route.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::{locate, Shift};
use crate::error::{Error, Result};
use crate::measure::{Interval, Measure, StepFunction};
use crate::quadrature::{integrate_panels, REL_TOL};

#[inline]
fn smoothstep(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        u * u * (3.0 - 2.0 * u)
    }
}

/// `ζ(t) = s(2t − 1)` and `η(t) = 1 − s(t − 1)` with `s(u) = 3u² − 2u³`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CutoffProfile;

impl CutoffProfile {
    pub fn zeta(&self, t: f64) -> f64 {
        smoothstep(2.0 * t - 1.0)
    }

    pub fn eta(&self, t: f64) -> f64 {
        1.0 - smoothstep(t - 1.0)
    }

    pub fn zeta_eps(&self, t: f64, eps: f64) -> f64 {
        self.zeta(t / eps)
    }

    pub fn eta_r(&self, t: f64, r: f64) -> f64 {
        self.eta(t / r)
    }
}

/// A Calderón–Zygmund kernel with size and smoothness constants:
/// `|K(x,y)| ≤ C₁/|x−y|` and, for `|x−x′| ≤ |x−y|/2`,
/// `|K(x′,y) − K(x,y)| ≤ C₂ (|x−x′|/|x−y|)/|x−y|`.
pub trait Kernel: Sync {
    fn eval(&self, x: f64, y: f64) -> f64;
    fn size_bound(&self) -> f64;
    fn smoothness_bound(&self) -> f64;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct HilbertKernel;

impl Kernel for HilbertKernel {
    fn eval(&self, x: f64, y: f64) -> f64 {
        1.0 / (x - y)
    }

    fn size_bound(&self) -> f64 {
        1.0
    }

    fn smoothness_bound(&self) -> f64 {
        2.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationParams {
    pub eps1: f64,
    pub eps2: f64,
    pub r: f64,
}

impl TruncationParams {
    pub fn new(eps1: f64, eps2: f64, r: f64) -> Result<Self> {
        let p = Self { eps1, eps2, r };
        if !p.is_admissible() {
            return Err(Error::InvalidParameter(format!(
                "truncation (eps1={eps1}, eps2={eps2}, R={r}) violates 1/4 <= eps1/eps2 <= 4 or max(eps) < R"
            )));
        }
        Ok(p)
    }

    pub fn centered(eps: f64, r: f64) -> Result<Self> {
        Self::new(eps, eps, r)
    }

    pub fn is_admissible(&self) -> bool {
        let ratio = self.eps1 / self.eps2;
        self.eps1 > 0.0
            && self.eps2 > 0.0
            && self.r.is_finite()
            && (0.25..=4.0).contains(&ratio)
            && self.eps1.max(self.eps2) < self.r
    }

    /// Two-sided cutoff weight of the pair `(x, y)`.
    pub fn weight(&self, x: f64, y: f64) -> f64 {
        let c = CutoffProfile;
        if y < x {
            let t = x - y;
            c.zeta_eps(t, self.eps1) * c.eta_r(t, self.r)
        } else if y > x {
            let t = y - x;
            c.zeta_eps(t, self.eps2) * c.eta_r(t, self.r)
        } else {
            0.0
        }
    }
}

const DIRECT_LIMIT: usize = 32;

/// Moments of one side of `ν` in the distance variable.
#[derive(Clone, Debug, Default)]
struct SideMoments {
    ta: Vec<f64>,
    tb: Vec<f64>,
    w: Vec<f64>,
    cum: [Vec<f64>; 4],
    at: Vec<f64>,
    am: Vec<f64>,
    acum: [Vec<f64>; 4],
}

fn piece_moments(ta: f64, tb: f64, w: f64) -> [f64; 4] {
    let d = tb - ta;
    let log = if ta > 0.0 { (d / ta).ln_1p() } else { 0.0 };
    [
        w * log,
        w * d,
        w * d * (tb + ta) * 0.5,
        w * d * (tb * tb + tb * ta + ta * ta) / 3.0,
    ]
}

fn atom_moments(t: f64, m: f64) -> [f64; 4] {
    [m / t, m, m * t, m * t * t]
}

impl SideMoments {
    fn build(pieces: Vec<(f64, f64, f64)>, atoms: Vec<(f64, f64)>) -> Self {
        let mut s = SideMoments::default();
        for c in s.cum.iter_mut().chain(s.acum.iter_mut()) {
            c.push(0.0);
        }
        for (ta, tb, w) in pieces {
            let m = piece_moments(ta, tb, w);
            for k in 0..4 {
                let last = *s.cum[k].last().unwrap();
                s.cum[k].push(last + m[k]);
            }
            s.ta.push(ta);
            s.tb.push(tb);
            s.w.push(w);
        }
        for (t, mass) in atoms {
            let m = atom_moments(t, mass);
            for k in 0..4 {
                let last = *s.acum[k].last().unwrap();
                s.acum[k].push(last + m[k]);
            }
            s.at.push(t);
            s.am.push(mass);
        }
        s
    }

    /// `∫_{[a,b)} t^k dν` for `k = −1, 0, 1, 2`; requires `0 < a`.
    fn moments(&self, a: f64, b: f64) -> [f64; 4] {
        let mut out = [0.0; 4];
        if !(a < b) {
            return out;
        }
        let i0 = self.tb.partition_point(|&t| t <= a);
        let i1 = self.ta.partition_point(|&t| t < b);
        if i0 < i1 {
            if i1 - i0 <= DIRECT_LIMIT {
                for i in i0..i1 {
                    let m = piece_moments(self.ta[i].max(a), self.tb[i].min(b), self.w[i]);
                    for k in 0..4 {
                        out[k] += m[k];
                    }
                }
            } else {
                let first = piece_moments(self.ta[i0].max(a), self.tb[i0].min(b), self.w[i0]);
                let j = i1 - 1;
                let last = piece_moments(self.ta[j].max(a), self.tb[j].min(b), self.w[j]);
                for k in 0..4 {
                    out[k] += first[k] + last[k] + (self.cum[k][j] - self.cum[k][i0 + 1]);
                }
            }
        }
        let j0 = self.at.partition_point(|&t| t < a);
        let j1 = self.at.partition_point(|&t| t < b);
        if j1 - j0 <= DIRECT_LIMIT {
            for j in j0..j1 {
                let m = atom_moments(self.at[j], self.am[j]);
                for k in 0..4 {
                    out[k] += m[k];
                }
            }
        } else {
            for k in 0..4 {
                out[k] += self.acum[k][j1] - self.acum[k][j0];
            }
        }
        out
    }

    /// `∫ ζ(t/ε)/t dν` over `[ε/2, ε)`.
    fn zeta_window(&self, eps: f64) -> f64 {
        let m = self.moments(0.5 * eps, eps);
        let a = 2.0 / eps;
        5.0 * m[0] - 12.0 * a * m[1] + 9.0 * a * a * m[2] - 2.0 * a * a * a * m[3]
    }

    /// `∫ η(t/R)/t dν` over `[R, 2R)`.
    fn eta_window(&self, r: f64) -> f64 {
        let m = self.moments(r, 2.0 * r);
        let a = 1.0 / r;
        -4.0 * m[0] + 12.0 * a * m[1] - 9.0 * a * a * m[2] + 2.0 * a * a * a * m[3]
    }

    fn plateau(&self, a: f64, b: f64) -> f64 {
        if a < b {
            self.moments(a, b)[0]
        } else {
            -self.moments(b, a)[0]
        }
    }

    /// `∫ ζ(t/ε) η(t/R) / t dν`.
    fn truncated(&self, eps: f64, r: f64) -> f64 {
        self.zeta_window(eps) + self.plateau(eps, r) + self.eta_window(r)
    }
}

/// Precomputed moments of `ν` around one evaluation point.
#[derive(Clone, Debug)]
pub struct PointPotential {
    x: f64,
    left: SideMoments,
    right: SideMoments,
    nearest: f64,
    farthest: f64,
    on_breakpoint: bool,
    empty: bool,
}

impl PointPotential {
    pub fn new(nu: &Measure, x: f64) -> Self {
        let mut lp = Vec::new();
        let mut rp = Vec::new();
        for p in nu.pieces().iter().rev() {
            if p.left < x {
                lp.push((x - p.right.min(x), x - p.left, p.density));
            }
        }
        for p in nu.pieces() {
            if p.right > x {
                rp.push((p.left.max(x) - x, p.right - x, p.density));
            }
        }
        let la: Vec<(f64, f64)> = nu
            .atoms()
            .iter()
            .rev()
            .filter(|a| a.position < x)
            .map(|a| (x - a.position, a.mass))
            .collect();
        let ra: Vec<(f64, f64)> = nu
            .atoms()
            .iter()
            .filter(|a| a.position > x)
            .map(|a| (a.position - x, a.mass))
            .collect();
        let bps = nu.breakpoints();
        let mut nearest = f64::INFINITY;
        let mut on_breakpoint = false;
        for b in &bps {
            let d = (b - x).abs();
            if d == 0.0 {
                on_breakpoint = true;
            } else {
                nearest = nearest.min(d);
            }
        }
        let farthest = nu
            .support_bounds()
            .map(|(lo, hi)| (x - lo).abs().max((hi - x).abs()))
            .unwrap_or(0.0);
        let empty = lp.is_empty() && rp.is_empty() && la.is_empty() && ra.is_empty();
        Self {
            x,
            left: SideMoments::build(lp, la),
            right: SideMoments::build(rp, ra),
            nearest,
            farthest,
            on_breakpoint,
            empty,
        }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    /// `T_{ε,R} ν(x)`.
    pub fn eval(&self, p: &TruncationParams) -> f64 {
        self.left.truncated(p.eps1, p.r) - self.right.truncated(p.eps2, p.r)
    }

    fn eps_range(&self) -> (f64, f64) {
        let lo = if self.on_breakpoint || !self.nearest.is_finite() {
            self.nearest.min(self.farthest) * 2f64.powi(-30)
        } else {
            self.nearest / 8.0
        };
        (lo, 8.0 * self.farthest)
    }
}

/// `T_{ε,R} ν(x)` by the exact moment formulas.
pub fn t_trunc(nu: &Measure, x: f64, params: &TruncationParams) -> f64 {
    PointPotential::new(nu, x).eval(params)
}

/// `∫ K(x,y) {ζ_{ε₁}(x−y) + ζ_{ε₂}(y−x)} η_R(|x−y|) dν(y)` by adaptive
/// quadrature, cutoff knots as panel boundaries.
pub fn t_trunc_quadrature<K: Kernel>(
    kernel: &K,
    nu: &Measure,
    x: f64,
    params: &TruncationParams,
) -> Result<f64> {
    let mut total = 0.0;
    for a in nu.atoms() {
        let w = params.weight(x, a.position);
        if w != 0.0 {
            total += a.mass * w * kernel.eval(x, a.position);
        }
    }
    let lo = x - 2.0 * params.r;
    let hi = x + 2.0 * params.r;
    let knots_all = [
        x - 2.0 * params.r,
        x - params.r,
        x - params.eps1,
        x - 0.5 * params.eps1,
        x + 0.5 * params.eps2,
        x + params.eps2,
        x + params.r,
        x + 2.0 * params.r,
    ];
    for p in nu.pieces() {
        let (l, r) = (p.left.max(lo), p.right.min(hi));
        if l >= r {
            continue;
        }
        let mut knots = vec![l, r];
        knots.extend(knots_all.iter().copied().filter(|&k| l < k && k < r));
        let f = |y: f64| {
            let w = params.weight(x, y);
            if w == 0.0 {
                0.0
            } else {
                w * kernel.eval(x, y)
            }
        };
        total += p.density * integrate_panels(&f, &knots, REL_TOL)?;
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchBudget {
    pub points_per_decade: u32,
    pub refine: bool,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self {
            points_per_decade: 64,
            refine: true,
        }
    }
}

impl SearchBudget {
    pub fn with_density(points_per_decade: u32) -> Self {
        Self {
            points_per_decade,
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupResult {
    /// `|T_{ε,R} ν(x)|` at the witness parameters.
    pub value: f64,
    /// `T_{ε,R} ν(x)` at the witness parameters.
    pub signed: f64,
    pub params: TruncationParams,
}

impl SupResult {
    fn zero() -> Self {
        Self {
            value: 0.0,
            signed: 0.0,
            params: TruncationParams {
                eps1: 1.0,
                eps2: 1.0,
                r: 2.0,
            },
        }
    }
}

const RATIOS: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];
const GOLDEN_STEPS: usize = 30;

/// Log grid `10^{i/ppd}`; the index range is rounded outward at the odd part
/// of `ppd`, so the grid for `2·ppd` contains the grid for `ppd`.
fn log_grid(lo: f64, hi: f64, ppd: u32) -> (Vec<f64>, u32) {
    let tz = ppd.trailing_zeros();
    let base = (ppd >> tz) as f64;
    let i_lo = (base * lo.log10()).floor() as i64 * (1i64 << tz);
    let i_hi = (base * hi.log10()).ceil() as i64 * (1i64 << tz);
    let pts = (i_lo..=i_hi)
        .map(|i| 10f64.powf(i as f64 / ppd as f64))
        .collect();
    (pts, tz)
}

fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> (f64, f64) {
    const G: f64 = 0.618_033_988_749_895;
    let mut c = b - G * (b - a);
    let mut d = a + G * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let (mut best_u, mut best_v) = if fc >= fd { (c, fc) } else { (d, fd) };
    for _ in 0..GOLDEN_STEPS {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - G * (b - a);
            fc = f(c);
            if fc > best_v {
                best_u = c;
                best_v = fc;
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + G * (b - a);
            fd = f(d);
            if fd > best_v {
                best_u = d;
                best_v = fd;
            }
        }
    }
    (best_u, best_v)
}

impl PointPotential {
    fn eval_abs(&self, eps2: f64, ratio: f64, r: f64) -> (f64, Option<TruncationParams>) {
        let p = TruncationParams {
            eps1: ratio * eps2,
            eps2,
            r,
        };
        if !p.is_admissible() {
            return (0.0, None);
        }
        (self.eval(&p).abs(), Some(p))
    }

    fn refine_from(&self, start: TruncationParams, step: f64, ratios_free: bool) -> SupResult {
        let mut eps2 = start.eps2;
        let mut ratio = start.eps1 / start.eps2;
        let mut r = start.r;
        let obj = |e: f64, q: f64, rr: f64| self.eval_abs(e, q, rr).0;
        let (u, _) = golden_max(|u| obj(u.exp(), ratio, r), eps2.ln() - step, eps2.ln() + step);
        if obj(u.exp(), ratio, r) > obj(eps2, ratio, r) {
            eps2 = u.exp();
        }
        if ratios_free {
            let q0 = ratio.ln();
            let lo = (q0 - 2f64.ln()).max(0.25f64.ln());
            let hi = (q0 + 2f64.ln()).min(4f64.ln());
            let (u, _) = golden_max(|u| obj(eps2, u.exp(), r), lo, hi);
            if obj(eps2, u.exp(), r) > obj(eps2, ratio, r) {
                ratio = u.exp();
            }
        }
        let (u, _) = golden_max(|u| obj(eps2, ratio, u.exp()), r.ln() - step, r.ln() + step);
        if obj(eps2, ratio, u.exp()) > obj(eps2, ratio, r) {
            r = u.exp();
        }
        let p = TruncationParams {
            eps1: ratio * eps2,
            eps2,
            r,
        };
        let signed = self.eval(&p);
        SupResult {
            value: signed.abs(),
            signed,
            params: p,
        }
    }

    /// Lower bound for `sup |T_{ε,R} ν(x)|` over the admissible set.
    pub fn sup(&self, budget: &SearchBudget, centered: bool) -> SupResult {
        if self.empty || self.farthest == 0.0 {
            return SupResult::zero();
        }
        let ratios: &[f64] = if centered { &[1.0] } else { &RATIOS };
        let (lo, hi) = self.eps_range();
        let ppd = budget.points_per_decade.max(1);
        let (grid, tz) = log_grid(lo, hi, ppd);
        let n = grid.len();
        let s_ref = grid[0];
        // T = A_L(ε₁) − A_R(ε₂) + D(R)
        let a_side = |s: &SideMoments, e: f64| s.zeta_window(e) - s.plateau(s_ref, e);
        let b_side = |s: &SideMoments, r: f64| s.plateau(s_ref, r) + s.eta_window(r);
        let d: Vec<f64> = grid
            .iter()
            .map(|&r| b_side(&self.left, r) - b_side(&self.right, r))
            .collect();
        let a_right: Vec<f64> = grid.iter().map(|&e| a_side(&self.right, e)).collect();
        let a_left: Vec<Vec<f64>> = ratios
            .iter()
            .map(|&q| grid.iter().map(|&e| a_side(&self.left, q * e)).collect())
            .collect();
        let step = 10f64.ln() / ppd as f64;
        let mut best = SupResult::zero();
        let consider = |cand: SupResult, best: &mut SupResult| {
            if cand.value > best.value {
                *best = cand;
            }
        };
        for level in 0..=tz {
            let stride = 1usize << level;
            let start = (stride - (grid_index_offset(lo, ppd, tz) % stride)) % stride;
            let idx: Vec<usize> = (start..n).step_by(stride).collect();
            if idx.is_empty() {
                continue;
            }
            // suffix extrema of D over the level's R grid
            let mut suf_max = vec![f64::NEG_INFINITY; idx.len() + 1];
            let mut suf_min = vec![f64::INFINITY; idx.len() + 1];
            let mut suf_arg = vec![(0usize, 0usize); idx.len() + 1];
            for (pos, &i) in idx.iter().enumerate().rev() {
                let (mut amax, mut amin) = (suf_arg[pos + 1].0, suf_arg[pos + 1].1);
                suf_max[pos] = suf_max[pos + 1];
                suf_min[pos] = suf_min[pos + 1];
                if d[i] > suf_max[pos] {
                    suf_max[pos] = d[i];
                    amax = i;
                }
                if d[i] < suf_min[pos] {
                    suf_min[pos] = d[i];
                    amin = i;
                }
                suf_arg[pos] = (amax, amin);
            }
            let mut level_best: Option<(f64, f64, f64, usize)> = None;
            for &i in &idx {
                for (qi, &q) in ratios.iter().enumerate() {
                    let emax = grid[i].max(q * grid[i]);
                    let pos = idx.partition_point(|&j| grid[j] <= emax);
                    if pos >= idx.len() {
                        continue;
                    }
                    let a = a_left[qi][i] - a_right[i];
                    let (vmax, vmin) = ((a + suf_max[pos]).abs(), (a + suf_min[pos]).abs());
                    let (v, ri) = if vmax >= vmin {
                        (vmax, suf_arg[pos].0)
                    } else {
                        (vmin, suf_arg[pos].1)
                    };
                    if level_best.map_or(true, |b| v > b.0) {
                        level_best = Some((v, grid[i], q, ri));
                    }
                }
            }
            let Some((_, e2, q, ri)) = level_best else {
                continue;
            };
            let p = TruncationParams {
                eps1: q * e2,
                eps2: e2,
                r: grid[ri],
            };
            let signed = self.eval(&p);
            consider(
                SupResult {
                    value: signed.abs(),
                    signed,
                    params: p,
                },
                &mut best,
            );
            if budget.refine {
                consider(
                    self.refine_from(p, step * stride as f64, !centered),
                    &mut best,
                );
            }
        }
        best
    }
}

/// Index offset of the first grid point, so levels select the same points
/// regardless of where the grid starts.
fn grid_index_offset(lo: f64, ppd: u32, tz: u32) -> usize {
    let base = (ppd >> tz) as f64;
    let i_lo = (base * lo.log10()).floor() as i64 * (1i64 << tz);
    i_lo.rem_euclid(1i64 << tz) as usize
}

/// `T♮ν(x)`: sup over noncentered admissible truncations (lower bound).
pub fn t_natural(nu: &Measure, x: f64, budget: &SearchBudget) -> SupResult {
    PointPotential::new(nu, x).sup(budget, false)
}

/// `T♭ν(x)`: sup over centered truncations `ε₁ = ε₂` (lower bound).
pub fn t_flat(nu: &Measure, x: f64, budget: &SearchBudget) -> SupResult {
    PointPotential::new(nu, x).sup(budget, true)
}

/// `t_natural` at many points, in parallel, results in input order.
pub fn t_natural_many(nu: &Measure, xs: &[f64], budget: &SearchBudget) -> Vec<SupResult> {
    xs.par_iter().map(|&x| t_natural(nu, x, budget)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaximalValue {
    pub value: f64,
    /// Closed interval `[a, b]` realizing the value; `a == b` means the
    /// density limit at `x`.
    pub a: f64,
    pub b: f64,
}

/// `𝓜ν(x) = sup_{x ∈ Q} ν(Q)/|Q|` over closed intervals.
pub fn maximal_fn(nu: &Measure, x: f64) -> Result<MaximalValue> {
    sup_average_containing(nu, x, x)
}

/// `sup ν([a,b])/(b−a)` over closed `[a, b] ⊇ [lo, hi]`.
///
/// For fixed `b` the average is monotone in `a` between consecutive
/// breakpoints, and symmetrically in `b`, so the supremum is attained with
/// `a ∈ {breakpoints} ∪ {lo}` and `b ∈ {breakpoints} ∪ {hi}`, or, when
/// `lo = hi`, as the density limit there. The left candidates are reduced to
/// their lower convex hull and each right candidate queries its tangent.
pub fn sup_average_containing(nu: &Measure, lo: f64, hi: f64) -> Result<MaximalValue> {
    if nu.is_signed() {
        return Err(Error::SignedMeasure);
    }
    if lo == hi && nu.atom_mass_at(lo) > 0.0 {
        return Ok(MaximalValue {
            value: f64::INFINITY,
            a: lo,
            b: hi,
        });
    }
    let bps = nu.breakpoints();
    // ν((−∞, a))
    let below = |a: f64| nu.mass(&Interval::raw(f64::MIN, a));
    let upto = |b: f64| below(b) + nu.atom_mass_at(b);
    let lefts: Vec<(f64, f64)> = bps
        .iter()
        .copied()
        .filter(|&a| a < lo)
        .map(|a| (a, below(a)))
        .collect();
    let mut rights: Vec<f64> = bps.iter().copied().filter(|&b| b > hi).collect();
    rights.push(hi);

    let mut best = if lo == hi {
        MaximalValue {
            value: nu.density_left_of(lo).max(nu.density_at(lo)),
            a: lo,
            b: hi,
        }
    } else {
        MaximalValue {
            value: 0.0,
            a: lo,
            b: hi,
        }
    };
    let take = |a: f64, b: f64, best: &mut MaximalValue| {
        if a < b {
            let v = nu.abs_mass_closed(a, b) / (b - a);
            if v > best.value {
                *best = MaximalValue { value: v, a, b };
            }
        }
    };
    for &b in &rights {
        take(lo, b, &mut best);
    }
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(lefts.len());
    for &p in &lefts {
        while hull.len() >= 2 {
            let (o, a) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (a.0 - o.0) * (p.1 - o.1) - (a.1 - o.1) * (p.0 - o.0);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    if !hull.is_empty() {
        for &b in &rights {
            let fb = upto(b);
            let slope = |i: usize| (fb - hull[i].1) / (b - hull[i].0);
            let (mut l, mut h) = (0usize, hull.len() - 1);
            while l < h {
                let mid = (l + h) / 2;
                if slope(mid + 1) > slope(mid) {
                    l = mid + 1;
                } else {
                    h = mid;
                }
            }
            for i in l.saturating_sub(1)..(l + 2).min(hull.len()) {
                take(hull[i].0, b, &mut best);
            }
        }
    }
    Ok(best)
}

/// `𝓜^dy_μ f(x)` over the grid `D^α`: the largest `μ`-average of `|f|` over
/// grid cubes containing `x` with positive `μ` mass.
///
/// Below the finer of the two resolutions the averages repeat with period
/// two in the scale, so the scan starts four scales below it and stops once
/// the cube content no longer changes.
pub fn dyadic_maximal(mu: &Measure, f: &StepFunction, x: f64, shift: Shift) -> Result<f64> {
    dyadic_maximal_with(mu, &mu.times(&f.abs()), f.resolution, x, shift)
}

/// As [`dyadic_maximal`] with `|f|·μ` precomputed.
pub fn dyadic_maximal_with(
    mu: &Measure,
    f_mu: &Measure,
    resolution: i32,
    x: f64,
    shift: Shift,
) -> Result<f64> {
    if mu.is_signed() {
        return Err(Error::SignedMeasure);
    }
    let Some((lo, hi)) = mu.support_bounds() else {
        return Ok(0.0);
    };
    let fine = mu
        .breakpoints()
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(2f64.powi(-resolution), f64::min);
    let j0 = fine.log2().floor() as i32 - 4;
    let reach = lo.abs().max(hi.abs()).max(x.abs());
    let total = mu.total_mass();
    let mut best = 0.0f64;
    let mut q = locate(shift, x, j0);
    loop {
        let iv = q.interval();
        let m = mu.mass(&iv);
        if m > 0.0 {
            best = best.max(f_mu.mass(&iv) / m);
        }
        if (m == total && q.length() > hi - lo) || q.length() > 4.0 * reach + 4.0 * (hi - lo) {
            break;
        }
        q = q.parent();
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub params: TruncationParams,
    pub theta: f64,
}

/// A pointwise choice of truncation and phase on a finite evaluation set:
/// `L ν(x) = e^{iθ(x)} T_{ε(x),R(x)} ν(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linearization {
    points: Vec<f64>,
    selections: Vec<Selection>,
    localized: Option<f64>,
}

impl Linearization {
    /// `localized = Some(ℓ)` additionally requires `R(x) ≤ ℓ/2`.
    pub fn new(points: Vec<f64>, selections: Vec<Selection>, localized: Option<f64>) -> Result<Self> {
        if points.len() != selections.len() {
            return Err(Error::InvalidParameter(
                "one selection per evaluation point".into(),
            ));
        }
        for s in &selections {
            if !s.params.is_admissible() {
                return Err(Error::InvalidParameter(format!(
                    "inadmissible truncation {:?}",
                    s.params
                )));
            }
            if !(0.0..std::f64::consts::TAU).contains(&s.theta) {
                return Err(Error::InvalidParameter(format!("phase {} outside [0, 2π)", s.theta)));
            }
            if let Some(len) = localized {
                if s.params.r > 0.5 * len {
                    return Err(Error::InvalidParameter(format!(
                        "R = {} exceeds half the localizing length {len}",
                        s.params.r
                    )));
                }
            }
        }
        Ok(Self {
            points,
            selections,
            localized,
        })
    }

    /// Selections taken from the `t_natural` argmax at every point, with
    /// phase `θ = −arg T`.
    pub fn from_argmax(nu: &Measure, points: Vec<f64>, budget: &SearchBudget) -> Self {
        let selections = points
            .par_iter()
            .map(|&x| {
                let s = t_natural(nu, x, budget);
                Selection {
                    params: s.params,
                    theta: if s.signed < 0.0 { std::f64::consts::PI } else { 0.0 },
                }
            })
            .collect();
        Self {
            points,
            selections,
            localized: None,
        }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn selections(&self) -> &[Selection] {
        &self.selections
    }

    pub fn localized(&self) -> Option<f64> {
        self.localized
    }

    /// `L ν` at every evaluation point.
    pub fn apply(&self, nu: &Measure) -> Vec<Complex64> {
        self.points
            .par_iter()
            .zip(self.selections.par_iter())
            .map(|(&x, s)| Complex64::from_polar(1.0, s.theta) * t_trunc(nu, x, &s.params))
            .collect()
    }

    /// `L*μ(y) = Σ_x w_x(x,y) K(x,y) e^{iθ(x)} μ({x})`.
    pub fn adjoint(&self, mu: &Measure, y: f64) -> Result<Complex64> {
        if let Some(p) = mu.pieces().first() {
            return Err(Error::NotOnGrid(p.left));
        }
        let mut total = Complex64::new(0.0, 0.0);
        for a in mu.atoms() {
            let i = self
                .points
                .iter()
                .position(|&x| x == a.position)
                .ok_or(Error::NotOnGrid(a.position))?;
            let s = &self.selections[i];
            let w = s.params.weight(a.position, y);
            if w != 0.0 {
                total += Complex64::from_polar(a.mass * w / (a.position - y), s.theta);
            }
        }
        Ok(total)
    }
}

pub fn linearized_adjoint(l: &Linearization, mu: &Measure, y: f64) -> Result<Complex64> {
    l.adjoint(mu, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{Atom, Piece};

    fn dirac(x: f64, m: f64) -> Measure {
        Measure::dirac(x, m).unwrap()
    }

    #[test]
    fn cutoff_plateaus() {
        let c = CutoffProfile;
        assert_eq!(c.zeta(0.5), 0.0);
        assert_eq!(c.zeta(1.0), 1.0);
        assert_eq!(c.eta(1.0), 1.0);
        assert_eq!(c.eta(2.0), 0.0);
        for i in 0..=400 {
            let t = i as f64 / 100.0;
            let h = 1e-3;
            assert!(c.zeta(t + h) >= c.zeta(t));
            assert!(c.eta(t + h) <= c.eta(t));
        }
    }

    #[test]
    fn trunc_examples() {
        let p = TruncationParams::new(0.5, 0.5, 4.0).unwrap();
        assert!((t_trunc(&dirac(0.0, 1.0), 2.0, &p) - 0.5).abs() < 1e-15);
        assert_eq!(t_trunc(&dirac(0.0, 1.0), 0.2, &p), 0.0);
        let sym = Measure::uniform(-1.0, 1.0, 3.0).unwrap();
        assert!(t_trunc(&sym, 0.0, &TruncationParams::centered(0.25, 0.75).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn windows_match_quadrature() {
        let nu = Measure::new(
            vec![
                Piece {
                    left: -1.0,
                    right: 0.25,
                    density: 0.75,
                },
                Piece {
                    left: 0.25,
                    right: 2.0,
                    density: 2.5,
                },
            ],
            vec![Atom {
                position: 0.9,
                mass: 0.3,
            }],
            false,
        )
        .unwrap();
        for &(x, e1, e2, r) in &[
            (0.1, 0.1, 0.2, 0.7),
            (0.6, 0.4, 0.1, 0.45),
            (-0.3, 0.05, 0.05, 3.0),
            (2.5, 0.3, 1.0, 1.1),
        ] {
            let p = TruncationParams::new(e1, e2, r).unwrap();
            let fast = t_trunc(&nu, x, &p);
            let slow = t_trunc_quadrature(&HilbertKernel, &nu, x, &p).unwrap();
            assert!((fast - slow).abs() < 1e-9 * (1.0 + slow.abs()), "{fast} vs {slow}");
        }
    }

    #[test]
    fn natural_of_dirac_is_inverse_distance() {
        let nu = dirac(0.0, 1.0);
        let v = t_natural(&nu, 1.0, &SearchBudget::default());
        assert!((v.value - 1.0).abs() < 1e-12, "{v:?}");
        let f = t_flat(&nu, 1.0, &SearchBudget::default());
        assert!((f.value - 1.0).abs() < 1e-12);
        assert_eq!(t_natural(&Measure::zero(), 1.0, &SearchBudget::default()).value, 0.0);
    }

    #[test]
    fn natural_monotone_in_budget() {
        let nu = Measure::uniform(0.0, 1.0, 1.0).unwrap();
        let mut prev = 0.0;
        for ppd in [4, 8, 16, 32, 64] {
            let v = t_natural(&nu, 2.0, &SearchBudget::with_density(ppd)).value;
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn maximal_examples() {
        let v = maximal_fn(&dirac(0.0, 1.0), 2.0).unwrap();
        assert!((v.value - 0.5).abs() < 1e-15);
        let leb = Measure::uniform(0.0, 1.0, 1.0).unwrap();
        assert!((maximal_fn(&leb, 0.5).unwrap().value - 1.0).abs() < 1e-15);
        assert!(maximal_fn(&leb.scaled(-1.0), 0.5).is_err());
        assert!(maximal_fn(&dirac(0.0, 1.0), 0.0).unwrap().value.is_infinite());
    }

    #[test]
    fn dyadic_maximal_examples() {
        let leb = Measure::uniform(0.0, 1.0, 1.0).unwrap();
        let f = StepFunction::constant_on(1, [0], 1.0);
        let v = dyadic_maximal(&leb, &f, 0.75, Shift::Zero).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
        let v = dyadic_maximal(&leb, &f, 0.25, Shift::Zero).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        let c = StepFunction::constant_on(2, 0..4, 3.0);
        assert!((dyadic_maximal(&leb, &c, 0.4, Shift::Third).unwrap() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn adjoint_examples() {
        let p = TruncationParams::new(0.5, 0.5, 10.0).unwrap();
        let l = Linearization::new(
            vec![2.0],
            vec![Selection {
                params: p,
                theta: 1.0,
            }],
            None,
        )
        .unwrap();
        let v = l.adjoint(&dirac(2.0, 3.0), 0.0).unwrap();
        let want = Complex64::from_polar(3.0 / 2.0, 1.0);
        assert!((v - want).norm() < 1e-15);
        assert!(matches!(l.adjoint(&dirac(1.0, 1.0), 0.0), Err(Error::NotOnGrid(_))));
        assert!(Linearization::new(
            vec![0.0],
            vec![Selection {
                params: p,
                theta: 0.0
            }],
            Some(4.0)
        )
        .is_err());
    }

    #[test]
    fn kernel_constants_hold() {
        let k = HilbertKernel;
        for i in 1..50 {
            let y = -(i as f64) * 0.37;
            let x = 0.5;
            let d = (x - y).abs();
            assert!(k.eval(x, y).abs() <= k.size_bound() / d * (1.0 + 1e-15));
            let xp = x + 0.45 * d;
            let lhs = (k.eval(xp, y) - k.eval(x, y)).abs();
            assert!(lhs <= k.smoothness_bound() * ((xp - x).abs() / d) / d * (1.0 + 1e-12));
        }
    }
}
