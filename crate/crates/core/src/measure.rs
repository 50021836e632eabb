//! Locally finite measures on the line, represented as a piecewise-constant
//! density plus finitely many atoms.
//!
//! [`StepAtomicMeasure`] is the file-level type: a dyadic step density at a
//! fixed resolution plus atoms. Every operator in the crate works on the more
//! general [`Measure`], whose density pieces may have arbitrary breakpoints;
//! this is what restrictions `χ_E ν` and products `f·σ` produce.
//!
//! All intervals are half-open `[left, right)`. Masses are computed from
//! prefix sums, so with dyadic data (dyadic densities, dyadic endpoints of
//! bounded bit length) every mass query is exact in binary64.

use std::collections::BTreeMap;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `2^k` as an exact binary64 value.
#[inline]
pub fn pow2(k: i32) -> f64 {
    2f64.powi(k)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub left: f64,
    pub right: f64,
}

impl Interval {
    pub fn new(left: f64, right: f64) -> Result<Self> {
        if !(left.is_finite() && right.is_finite() && left < right) {
            return Err(Error::InvalidInterval { left, right });
        }
        Ok(Self { left, right })
    }

    /// Constructor for call sites where `left < right` is already known.
    pub(crate) fn raw(left: f64, right: f64) -> Self {
        debug_assert!(left < right, "degenerate interval [{left}, {right})");
        Self { left, right }
    }

    pub fn centered(center: f64, length: f64) -> Result<Self> {
        Self::new(center - 0.5 * length, center + 0.5 * length)
    }

    #[inline]
    pub fn center(&self) -> f64 {
        0.5 * (self.left + self.right)
    }

    #[inline]
    pub fn length(&self) -> f64 {
        self.right - self.left
    }

    /// The concentric dilate `factor · Q`.
    pub fn dilate(&self, factor: f64) -> Interval {
        let c = self.center();
        let h = 0.5 * factor * self.length();
        Interval::raw(c - h, c + h)
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        self.left <= x && x < self.right
    }

    #[inline]
    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.left <= other.left && other.right <= self.right
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let l = self.left.max(other.left);
        let r = self.right.min(other.right);
        (l < r).then(|| Interval::raw(l, r))
    }

    #[inline]
    pub fn intersects(&self, other: &Interval) -> bool {
        self.left.max(other.left) < self.right.min(other.right)
    }

    /// Distance from `x` to the closure of the interval.
    pub fn distance_to(&self, x: f64) -> f64 {
        if x < self.left {
            self.left - x
        } else if x > self.right {
            x - self.right
        } else {
            0.0
        }
    }
}

/// A density piece: constant density `density` on `[left, right)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Piece {
    pub left: f64,
    pub right: f64,
    pub density: f64,
}

impl Piece {
    #[inline]
    pub fn mass(&self) -> f64 {
        (self.right - self.left) * self.density
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub position: f64,
    pub mass: f64,
}

/// Piecewise-constant density plus atoms. Immutable after construction.
#[derive(Clone, Debug, Default)]
pub struct Measure {
    pieces: Vec<Piece>,
    atoms: Vec<Atom>,
    signed: bool,
    cum: Vec<f64>,
    abs_cum: Vec<f64>,
    atom_cum: Vec<f64>,
    atom_abs_cum: Vec<f64>,
}

impl Measure {
    /// Builds a measure, sorting pieces and merging atoms at equal positions.
    /// Zero-density pieces and zero-mass atoms are dropped.
    pub fn new(mut pieces: Vec<Piece>, mut atoms: Vec<Atom>, signed: bool) -> Result<Self> {
        for p in &pieces {
            if !(p.left.is_finite() && p.right.is_finite() && p.density.is_finite()) {
                return Err(Error::InvalidMeasure("non-finite piece".into()));
            }
            if p.left >= p.right {
                return Err(Error::InvalidMeasure(format!(
                    "empty piece [{}, {})",
                    p.left, p.right
                )));
            }
            if !signed && p.density < 0.0 {
                return Err(Error::InvalidMeasure(format!(
                    "negative density {} in unsigned measure",
                    p.density
                )));
            }
        }
        for a in &atoms {
            if !(a.position.is_finite() && a.mass.is_finite()) {
                return Err(Error::InvalidMeasure("non-finite atom".into()));
            }
            if !signed && a.mass < 0.0 {
                return Err(Error::InvalidMeasure(format!(
                    "negative atom mass {} in unsigned measure",
                    a.mass
                )));
            }
        }
        pieces.retain(|p| p.density != 0.0);
        pieces.sort_by(|a, b| a.left.total_cmp(&b.left));
        for w in pieces.windows(2) {
            if w[1].left < w[0].right {
                return Err(Error::InvalidMeasure(format!(
                    "overlapping pieces at {}",
                    w[1].left
                )));
            }
        }
        atoms.sort_by(|a, b| a.position.total_cmp(&b.position));
        let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
        for a in atoms {
            match merged.last_mut() {
                Some(last) if last.position == a.position => last.mass += a.mass,
                _ => merged.push(a),
            }
        }
        merged.retain(|a| a.mass != 0.0);
        Ok(Self::from_sorted(pieces, merged, signed))
    }

    fn from_sorted(pieces: Vec<Piece>, atoms: Vec<Atom>, signed: bool) -> Self {
        let mut cum = Vec::with_capacity(pieces.len() + 1);
        let mut abs_cum = Vec::with_capacity(pieces.len() + 1);
        let (mut s, mut sa) = (0.0, 0.0);
        cum.push(0.0);
        abs_cum.push(0.0);
        for p in &pieces {
            let m = p.mass();
            s += m;
            sa += m.abs();
            cum.push(s);
            abs_cum.push(sa);
        }
        let mut atom_cum = Vec::with_capacity(atoms.len() + 1);
        let mut atom_abs_cum = Vec::with_capacity(atoms.len() + 1);
        let (mut s, mut sa) = (0.0, 0.0);
        atom_cum.push(0.0);
        atom_abs_cum.push(0.0);
        for a in &atoms {
            s += a.mass;
            sa += a.mass.abs();
            atom_cum.push(s);
            atom_abs_cum.push(sa);
        }
        Self {
            pieces,
            atoms,
            signed,
            cum,
            abs_cum,
            atom_cum,
            atom_abs_cum,
        }
    }

    pub fn zero() -> Self {
        Self::from_sorted(Vec::new(), Vec::new(), false)
    }

    /// Uniform density on `[left, right)`.
    pub fn uniform(left: f64, right: f64, density: f64) -> Result<Self> {
        Self::new(
            vec![Piece {
                left,
                right,
                density,
            }],
            Vec::new(),
            density < 0.0,
        )
    }

    pub fn dirac(position: f64, mass: f64) -> Result<Self> {
        Self::new(Vec::new(), vec![Atom { position, mass }], mass < 0.0)
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn is_signed(&self) -> bool {
        self.signed
    }

    pub fn is_zero(&self) -> bool {
        self.pieces.is_empty() && self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.cum[self.pieces.len()] + self.atom_cum[self.atoms.len()]
    }

    pub fn total_variation(&self) -> f64 {
        self.abs_cum[self.pieces.len()] + self.atom_abs_cum[self.atoms.len()]
    }

    fn range_mass(&self, q: &Interval, cum: &[f64], atom_cum: &[f64], abs: bool) -> f64 {
        let (a, b) = (q.left, q.right);
        let i0 = self.pieces.partition_point(|p| p.right <= a);
        let i1 = self.pieces.partition_point(|p| p.left < b);
        let part = |p: &Piece| {
            let m = (b.min(p.right) - a.max(p.left)) * p.density;
            if abs {
                m.abs()
            } else {
                m
            }
        };
        let mut total = 0.0;
        if i0 < i1 {
            total += part(&self.pieces[i0]);
            if i1 - 1 > i0 {
                total += cum[i1 - 1] - cum[i0 + 1];
                total += part(&self.pieces[i1 - 1]);
            }
        }
        let j0 = self.atoms.partition_point(|t| t.position < a);
        let j1 = self.atoms.partition_point(|t| t.position < b);
        total + (atom_cum[j1] - atom_cum[j0])
    }

    /// `ν([left, right))`.
    pub fn mass(&self, q: &Interval) -> f64 {
        self.range_mass(q, &self.cum, &self.atom_cum, false)
    }

    /// `|ν|([left, right))`.
    pub fn abs_mass(&self, q: &Interval) -> f64 {
        if self.signed {
            self.range_mass(q, &self.abs_cum, &self.atom_abs_cum, true)
        } else {
            self.mass(q)
        }
    }

    /// `|ν|([a, b])`, closed on both ends.
    pub fn abs_mass_closed(&self, a: f64, b: f64) -> f64 {
        let mut m = if a < b {
            self.abs_mass(&Interval::raw(a, b))
        } else {
            0.0
        };
        let j0 = self.atoms.partition_point(|t| t.position < b);
        let j1 = self.atoms.partition_point(|t| t.position <= b);
        m += self.atom_abs_cum[j1] - self.atom_abs_cum[j0];
        m
    }

    /// Mass of an open-closed mixture used by quadrature helpers: the sum of
    /// atoms exactly at `x`.
    pub fn atom_mass_at(&self, x: f64) -> f64 {
        let j0 = self.atoms.partition_point(|t| t.position < x);
        let j1 = self.atoms.partition_point(|t| t.position <= x);
        self.atom_cum[j1] - self.atom_cum[j0]
    }

    /// Closed hull `[min, max]` of the support, if nonzero.
    pub fn support_bounds(&self) -> Option<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        if let (Some(f), Some(l)) = (self.pieces.first(), self.pieces.last()) {
            lo = lo.min(f.left);
            hi = hi.max(l.right);
        }
        if let (Some(f), Some(l)) = (self.atoms.first(), self.atoms.last()) {
            lo = lo.min(f.position);
            hi = hi.max(l.position);
        }
        (lo <= hi).then_some((lo, hi))
    }

    /// Distance from `x` to the closed support.
    pub fn distance_to_support(&self, x: f64) -> f64 {
        let mut d = f64::INFINITY;
        let i = self.pieces.partition_point(|p| p.right < x);
        for p in self.pieces[i.saturating_sub(1)..].iter().take(3) {
            d = d.min(Interval::raw(p.left, p.right).distance_to(x));
        }
        let j = self.atoms.partition_point(|t| t.position < x);
        for t in self.atoms[j.saturating_sub(1)..].iter().take(2) {
            d = d.min((t.position - x).abs());
        }
        d
    }

    /// Density of the absolutely continuous part at `x`.
    pub fn density_at(&self, x: f64) -> f64 {
        let i = self.pieces.partition_point(|p| p.right <= x);
        match self.pieces.get(i) {
            Some(p) if p.left <= x => p.density,
            _ => 0.0,
        }
    }

    /// Left limit of the density at `x`.
    pub fn density_left_of(&self, x: f64) -> f64 {
        let i = self.pieces.partition_point(|p| p.right < x);
        match self.pieces.get(i) {
            Some(p) if p.left < x => p.density,
            _ => 0.0,
        }
    }

    /// Sorted, deduplicated piece endpoints and atom positions.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .pieces
            .iter()
            .flat_map(|p| [p.left, p.right])
            .chain(self.atoms.iter().map(|a| a.position))
            .collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    /// `χ_E ν` for a finite union `E` of half-open intervals.
    pub fn restrict(&self, set: &[Interval]) -> Measure {
        let mut set: Vec<Interval> = set.to_vec();
        set.sort_by(|a, b| a.left.total_cmp(&b.left));
        let mut pieces = Vec::new();
        for e in &set {
            let i0 = self.pieces.partition_point(|p| p.right <= e.left);
            for p in &self.pieces[i0..] {
                if p.left >= e.right {
                    break;
                }
                let l = p.left.max(e.left);
                let r = p.right.min(e.right);
                if l < r {
                    pieces.push(Piece {
                        left: l,
                        right: r,
                        density: p.density,
                    });
                }
            }
        }
        let atoms: Vec<Atom> = self
            .atoms
            .iter()
            .filter(|a| set.iter().any(|e| e.contains(a.position)))
            .copied()
            .collect();
        Measure::new(pieces, atoms, self.signed).expect("restriction of a valid measure")
    }

    /// `χ_{ℝ∖Q} ν`.
    pub fn restrict_complement(&self, q: &Interval) -> Measure {
        let Some((lo, hi)) = self.support_bounds() else {
            return Measure::zero();
        };
        let mut set = Vec::new();
        if lo < q.left {
            set.push(Interval::raw(lo, q.left));
        }
        if q.right <= hi {
            set.push(Interval::raw(q.right, hi.max(q.right) + 1.0));
        }
        self.restrict(&set)
    }

    /// The measure `f·ν` for a step function `f`.
    pub fn times(&self, f: &StepFunction) -> Measure {
        let h = pow2(-f.resolution);
        let mut pieces = Vec::new();
        for p in &self.pieces {
            let k0 = (p.left / h).floor() as i64;
            let k1 = (p.right / h).ceil() as i64;
            for (&k, &v) in f.values.range(k0..k1) {
                let l = (k as f64 * h).max(p.left);
                let r = ((k + 1) as f64 * h).min(p.right);
                if l < r && v != 0.0 {
                    pieces.push(Piece {
                        left: l,
                        right: r,
                        density: p.density * v,
                    });
                }
            }
        }
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom {
                position: a.position,
                mass: a.mass * f.value_at(a.position),
            })
            .collect();
        let signed = self.signed || f.values.values().any(|&v| v < 0.0);
        Measure::new(pieces, atoms, signed).expect("product of valid measure and step function")
    }

    /// The total variation measure `|ν|`.
    pub fn abs(&self) -> Measure {
        if !self.signed {
            return self.clone();
        }
        let pieces = self
            .pieces
            .iter()
            .map(|p| Piece {
                density: p.density.abs(),
                ..*p
            })
            .collect();
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom {
                mass: a.mass.abs(),
                ..*a
            })
            .collect();
        Measure::from_sorted(pieces, atoms, false)
    }

    pub fn scaled(&self, c: f64) -> Measure {
        let pieces = self
            .pieces
            .iter()
            .map(|p| Piece {
                density: p.density * c,
                ..*p
            })
            .collect();
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom {
                mass: a.mass * c,
                ..*a
            })
            .collect();
        Measure::new(pieces, atoms, self.signed || c < 0.0).expect("scaling a valid measure")
    }

    /// Sum of two measures; pieces are split on the union of breakpoints.
    pub fn add(&self, other: &Measure) -> Measure {
        let mut cuts: Vec<f64> = self
            .pieces
            .iter()
            .chain(other.pieces.iter())
            .flat_map(|p| [p.left, p.right])
            .collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut pieces = Vec::new();
        for w in cuts.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let d = self.density_at(mid) + other.density_at(mid);
            if d != 0.0 {
                pieces.push(Piece {
                    left: w[0],
                    right: w[1],
                    density: d,
                });
            }
        }
        let mut atoms = self.atoms.clone();
        atoms.extend_from_slice(&other.atoms);
        Measure::new(pieces, atoms, self.signed || other.signed).expect("sum of valid measures")
    }

    /// `∫ s_Q(x)^e dμ(x)` with `s_Q(x) = |Q| / (|Q| + |x − x_Q|)`.
    ///
    /// Density pieces use the exact antiderivative of `(q/(q+u))^e`; atoms
    /// contribute `m·s_Q^e` directly.
    pub fn integrate_power_kernel(&self, q: &Interval, exponent: f64) -> Result<f64> {
        if !(exponent > 0.0 && exponent.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "power-kernel exponent {exponent} must be positive"
            )));
        }
        let ql = q.length();
        let c = q.center();
        // ∫_{u0}^{u1} (ql/(ql+u))^e du for 0 <= u0 <= u1
        let tail = |u0: f64, u1: f64| -> f64 {
            if exponent == 1.0 {
                ql * ((ql + u1) / (ql + u0)).ln()
            } else {
                let s0 = ql / (ql + u0);
                let s1 = ql / (ql + u1);
                ql / (exponent - 1.0) * (s0.powf(exponent - 1.0) - s1.powf(exponent - 1.0))
            }
        };
        let mut total = 0.0;
        for p in &self.pieces {
            let mut v = 0.0;
            if p.right > c {
                let l = p.left.max(c);
                v += tail(l - c, p.right - c);
            }
            if p.left < c {
                let r = p.right.min(c);
                v += tail(c - r, c - p.left);
            }
            total += p.density * v;
        }
        for a in &self.atoms {
            let s = ql / (ql + (a.position - c).abs());
            total += a.mass * s.powf(exponent);
        }
        Ok(total)
    }

    /// `∫_{ℝ∖I} |z − z_I|^{-2} dμ(z)`.
    pub fn integrate_inverse_square(&self, i: &Interval) -> Result<f64> {
        for a in &self.atoms {
            if a.position == i.left || a.position == i.right {
                return Err(Error::AtomOnBoundary {
                    position: a.position,
                });
            }
        }
        let c = i.center();
        // ∫_{u0}^{u1} u^{-2} du for 0 < u0 < u1
        let seg = |u0: f64, u1: f64| (u1 - u0) / (u0 * u1);
        let mut total = 0.0;
        for p in &self.pieces {
            let mut v = 0.0;
            if p.left < i.left {
                let r = p.right.min(i.left);
                v += seg(c - r, c - p.left);
            }
            if p.right > i.right {
                let l = p.left.max(i.right);
                v += seg(l - c, p.right - c);
            }
            total += p.density * v;
        }
        for a in &self.atoms {
            if !(i.left < a.position && a.position < i.right) {
                let d = a.position - c;
                total += a.mass / (d * d);
            }
        }
        Ok(total)
    }

    /// `∫ (x − z)^{-1} dμ(z)` for `x` at distance at least `gap` from the
    /// support.
    pub fn hilbert_off_support(&self, x: f64, gap: f64) -> Result<f64> {
        if !(gap > 0.0) {
            return Err(Error::InvalidParameter(format!("gap {gap} must be positive")));
        }
        let d = self.distance_to_support(x);
        if d < gap {
            return Err(Error::PointTooClose {
                x,
                distance: d,
                gap,
            });
        }
        let mut total = 0.0;
        for p in &self.pieces {
            // log|(x-l)/(x-r)| = log1p((r-l)/(x-r))
            total += p.density * ((p.right - p.left) / (x - p.right)).ln_1p();
        }
        for a in &self.atoms {
            total += a.mass / (x - a.position);
        }
        Ok(total)
    }
}

/// Step function on dyadic cells of length `2^{-resolution}`; zero off the
/// listed cells.
#[derive(Clone, Debug, PartialEq)]
pub struct StepFunction {
    pub resolution: i32,
    pub values: BTreeMap<i64, f64>,
}

impl StepFunction {
    pub fn new(resolution: i32, values: BTreeMap<i64, f64>) -> Self {
        Self { resolution, values }
    }

    pub fn constant_on(resolution: i32, cells: impl IntoIterator<Item = i64>, c: f64) -> Self {
        Self {
            resolution,
            values: cells.into_iter().map(|k| (k, c)).collect(),
        }
    }

    pub fn cell_length(&self) -> f64 {
        pow2(-self.resolution)
    }

    pub fn cell_of(&self, x: f64) -> i64 {
        (x * pow2(self.resolution)).floor() as i64
    }

    pub fn value_at(&self, x: f64) -> f64 {
        self.values.get(&self.cell_of(x)).copied().unwrap_or(0.0)
    }

    pub fn abs(&self) -> StepFunction {
        StepFunction {
            resolution: self.resolution,
            values: self.values.iter().map(|(&k, &v)| (k, v.abs())).collect(),
        }
    }

    /// `∫ |f|^p dμ`.
    pub fn lp_norm_pow(&self, mu: &Measure, p: f64) -> f64 {
        let fp = StepFunction {
            resolution: self.resolution,
            values: self
                .values
                .iter()
                .map(|(&k, &v)| (k, v.abs().powf(p)))
                .collect(),
        };
        mu.times(&fp).total_mass()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.values().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Dyadic step density at scale `2^{-resolution}` plus atoms.
#[derive(Clone, Debug)]
pub struct StepAtomicMeasure {
    resolution: i32,
    cells: BTreeMap<i64, f64>,
    measure: Measure,
}

impl Deref for StepAtomicMeasure {
    type Target = Measure;
    fn deref(&self) -> &Measure {
        &self.measure
    }
}

impl AsRef<Measure> for StepAtomicMeasure {
    fn as_ref(&self) -> &Measure {
        &self.measure
    }
}

impl AsRef<Measure> for Measure {
    fn as_ref(&self) -> &Measure {
        self
    }
}

pub const MAX_RESOLUTION: i32 = 60;

impl StepAtomicMeasure {
    /// `cells` maps a cell index `k` (cell `[k·2^{-L}, (k+1)·2^{-L})`) to its
    /// density.
    pub fn new(
        resolution: i32,
        cells: impl IntoIterator<Item = (i64, f64)>,
        atoms: Vec<Atom>,
        signed: bool,
    ) -> Result<Self> {
        if resolution.abs() > MAX_RESOLUTION {
            return Err(Error::InvalidMeasure(format!(
                "resolution {resolution} outside [-{MAX_RESOLUTION}, {MAX_RESOLUTION}]"
            )));
        }
        let mut map = BTreeMap::new();
        for (k, w) in cells {
            if !w.is_finite() {
                return Err(Error::InvalidMeasure(format!("non-finite weight at cell {k}")));
            }
            if w != 0.0 {
                *map.entry(k).or_insert(0.0) += w;
            }
        }
        map.retain(|_, w| *w != 0.0);
        let h = pow2(-resolution);
        let mut pieces: Vec<Piece> = Vec::new();
        let mut last_k = None;
        for (&k, &w) in &map {
            match pieces.last_mut() {
                Some(p) if last_k == Some(k - 1) && p.density == w => p.right = (k + 1) as f64 * h,
                _ => pieces.push(Piece {
                    left: k as f64 * h,
                    right: (k + 1) as f64 * h,
                    density: w,
                }),
            }
            last_k = Some(k);
        }
        let measure = Measure::new(pieces, atoms, signed)?;
        Ok(Self {
            resolution,
            cells: map,
            measure,
        })
    }

    /// Lebesgue measure on `[left, right)`; both ends must be multiples of
    /// `2^{-resolution}`.
    pub fn lebesgue(left: f64, right: f64, resolution: i32) -> Result<Self> {
        Self::uniform(left, right, resolution, 1.0)
    }

    pub fn uniform(left: f64, right: f64, resolution: i32, density: f64) -> Result<Self> {
        let s = pow2(resolution);
        let (kl, kr) = (left * s, right * s);
        if kl.fract() != 0.0 || kr.fract() != 0.0 || kl >= kr {
            return Err(Error::InvalidMeasure(format!(
                "[{left}, {right}) is not a union of cells at resolution {resolution}"
            )));
        }
        Self::new(
            resolution,
            (kl as i64..kr as i64).map(|k| (k, density)),
            Vec::new(),
            density < 0.0,
        )
    }

    pub fn atomic(atoms: Vec<Atom>) -> Result<Self> {
        let signed = atoms.iter().any(|a| a.mass < 0.0);
        Self::new(0, std::iter::empty(), atoms, signed)
    }

    pub fn resolution(&self) -> i32 {
        self.resolution
    }

    pub fn cell_length(&self) -> f64 {
        pow2(-self.resolution)
    }

    pub fn cells(&self) -> &BTreeMap<i64, f64> {
        &self.cells
    }

    pub fn measure(&self) -> &Measure {
        &self.measure
    }

    pub fn signed(&self) -> bool {
        self.measure.is_signed()
    }

    pub fn with_atoms(&self, extra: &[Atom]) -> Result<Self> {
        let mut atoms = self.atoms().to_vec();
        atoms.extend_from_slice(extra);
        Self::new(
            self.resolution,
            self.cells.clone(),
            atoms,
            self.signed(),
        )
    }

    pub fn to_file(&self) -> MeasureFile {
        MeasureFile {
            resolution: self.resolution,
            cells: self
                .cells
                .iter()
                .map(|(&k, &w)| CellEntry { k, w })
                .collect(),
            atoms: self
                .atoms()
                .iter()
                .map(|a| AtomEntry {
                    x: a.position,
                    m: a.mass,
                })
                .collect(),
            signed: self.signed(),
        }
    }

    pub fn from_file(file: &MeasureFile) -> Result<Self> {
        for a in &file.atoms {
            if !(a.x.is_finite() && a.m.is_finite()) {
                return Err(Error::InvalidMeasure("non-finite atom".into()));
            }
        }
        Self::new(
            file.resolution,
            file.cells.iter().map(|c| (c.k, c.w)),
            file.atoms
                .iter()
                .map(|a| Atom {
                    position: a.x,
                    mass: a.m,
                })
                .collect(),
            file.signed,
        )
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: MeasureFile = serde_json::from_str(text).map_err(|e| {
            Error::Parse(format!("line {}, column {}: {e}", e.line(), e.column()))
        })?;
        Self::from_file(&file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("measure file serializes")
    }
}

/// On-disk JSON layout of a [`StepAtomicMeasure`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureFile {
    pub resolution: i32,
    #[serde(default)]
    pub cells: Vec<CellEntry>,
    #[serde(default)]
    pub atoms: Vec<AtomEntry>,
    #[serde(default)]
    pub signed: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellEntry {
    pub k: i64,
    pub w: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomEntry {
    pub x: f64,
    pub m: f64,
}

/// `(σ, ω, p)`.
#[derive(Clone, Debug)]
pub struct WeightPair {
    pub sigma: StepAtomicMeasure,
    pub omega: StepAtomicMeasure,
    p: f64,
}

impl WeightPair {
    pub fn new(sigma: StepAtomicMeasure, omega: StepAtomicMeasure, p: f64) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::InvalidExponent(p));
        }
        if sigma.signed() || omega.signed() {
            return Err(Error::SignedMeasure);
        }
        Ok(Self { sigma, omega, p })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// The dual exponent `p' = p/(p−1)`.
    pub fn p_dual(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    /// Atoms of σ and ω at a common position.
    pub fn common_point_masses(&self) -> Vec<f64> {
        let om = self.omega.atoms();
        self.sigma
            .atoms()
            .iter()
            .filter(|a| {
                om.binary_search_by(|b| b.position.total_cmp(&a.position))
                    .is_ok()
            })
            .map(|a| a.position)
            .collect()
    }

    /// Closed hull of `supp σ ∪ supp ω`.
    pub fn support_bounds(&self) -> Option<(f64, f64)> {
        match (self.sigma.support_bounds(), self.omega.support_bounds()) {
            (Some(a), Some(b)) => Some((a.0.min(b.0), a.1.max(b.1))),
            (a, b) => a.or(b),
        }
    }

    /// Finest resolution of the two measures.
    pub fn resolution(&self) -> i32 {
        self.sigma.resolution().max(self.omega.resolution())
    }

    pub fn swapped(&self) -> WeightPair {
        WeightPair {
            sigma: self.omega.clone(),
            omega: self.sigma.clone(),
            p: self.p_dual(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(a: f64, b: f64) -> Interval {
        Interval::new(a, b).unwrap()
    }

    #[test]
    fn lebesgue_half() {
        let m = StepAtomicMeasure::lebesgue(0.0, 1.0, 3).unwrap();
        assert_eq!(m.mass(&iv(0.0, 0.5)), 0.5);
    }

    #[test]
    fn dirac_half_open() {
        let m = StepAtomicMeasure::atomic(vec![Atom {
            position: 0.0,
            mass: 1.0,
        }])
        .unwrap();
        assert_eq!(m.mass(&iv(0.0, 1.0)), 1.0);
        assert_eq!(m.mass(&iv(-1.0, 0.0)), 0.0);
    }

    #[test]
    fn partial_cells_by_summation() {
        // density 2 on [0, 1/2): oracle sums cell by cell at resolution 2
        let m = StepAtomicMeasure::uniform(0.0, 0.5, 1, 2.0).unwrap();
        let q = iv(0.25, 0.75);
        let oracle: f64 = (0..4)
            .map(|k| {
                let (l, r) = (k as f64 * 0.25, (k + 1) as f64 * 0.25);
                let w = if r <= 0.5 { 2.0 } else { 0.0 };
                w * (r.min(q.right) - l.max(q.left)).max(0.0)
            })
            .sum();
        assert_eq!(oracle, 0.5);
        assert_eq!(m.mass(&q), oracle);
    }

    #[test]
    fn power_kernel_examples() {
        let q = iv(-0.5, 0.5);
        let at_center = Measure::dirac(0.0, 3.0).unwrap();
        assert_eq!(at_center.integrate_power_kernel(&q, 2.5).unwrap(), 3.0);
        let at_edge = Measure::dirac(1.0, 2.0).unwrap();
        assert!((at_edge.integrate_power_kernel(&q, 2.0).unwrap() - 0.5).abs() < 1e-15);

        // ∫_{-T}^{T} (1+|u|)^{-2} du = 2 (1 - 1/(1+T))
        let t = 1024.0;
        let leb = Measure::uniform(-t, t, 1.0).unwrap();
        let v = leb.integrate_power_kernel(&q, 2.0).unwrap();
        let exact = 2.0 * (1.0 - 1.0 / (1.0 + t));
        assert!((v - exact).abs() < 1e-12 * exact);
    }

    #[test]
    fn power_kernel_rejects_bad_exponent() {
        let m = Measure::dirac(0.0, 1.0).unwrap();
        assert!(m.integrate_power_kernel(&iv(0.0, 1.0), 0.0).is_err());
    }

    #[test]
    fn inverse_square_examples() {
        let i = iv(-1.0, 1.0);
        assert_eq!(
            Measure::dirac(2.0, 1.0)
                .unwrap()
                .integrate_inverse_square(&i)
                .unwrap(),
            0.25
        );
        let leb = Measure::uniform(2.0, 3.0, 1.0).unwrap();
        let v = leb.integrate_inverse_square(&i).unwrap();
        assert!((v - 1.0 / 6.0).abs() < 1e-15);
        let inside = Measure::uniform(-0.5, 0.5, 4.0).unwrap();
        assert_eq!(inside.integrate_inverse_square(&i).unwrap(), 0.0);
        assert!(matches!(
            Measure::dirac(1.0, 1.0)
                .unwrap()
                .integrate_inverse_square(&i),
            Err(Error::AtomOnBoundary { .. })
        ));
    }

    #[test]
    fn hilbert_off_support_examples() {
        let d = Measure::dirac(2.0, 1.0).unwrap();
        assert_eq!(d.hilbert_off_support(0.0, 0.5).unwrap(), -0.5);
        let leb = Measure::uniform(1.0, 2.0, 1.0).unwrap();
        let v = leb.hilbert_off_support(0.0, 0.5).unwrap();
        assert!((v + 2f64.ln()).abs() < 1e-15);
        let sym = Measure::new(
            vec![
                Piece {
                    left: -3.0,
                    right: -1.0,
                    density: 0.5,
                },
                Piece {
                    left: 1.0,
                    right: 3.0,
                    density: 0.5,
                },
            ],
            vec![],
            false,
        )
        .unwrap();
        assert!(sym.hilbert_off_support(0.0, 0.5).unwrap().abs() < 1e-15);
        assert!(matches!(
            leb.hilbert_off_support(0.9, 0.5),
            Err(Error::PointTooClose { .. })
        ));
    }

    #[test]
    fn hilbert_off_support_is_monotone_right_of_support() {
        // positive mass to the left of I: z ↦ ∫(x−z)^{-1}dμ decreases on I,
        // i.e. the opposite-sign transform ∫(z−x)^{-1}dμ increases.
        let m = Measure::new(
            vec![Piece {
                left: -4.0,
                right: -2.0,
                density: 1.5,
            }],
            vec![Atom {
                position: -1.5,
                mass: 0.7,
            }],
            false,
        )
        .unwrap();
        let xs = [-1.0, 0.0, 1.0];
        let v: Vec<f64> = xs
            .iter()
            .map(|&x| m.hilbert_off_support(x, 0.25).unwrap())
            .collect();
        assert!(v[0] > v[1] && v[1] > v[2]);
    }

    #[test]
    fn json_roundtrip_and_validation() {
        let m = StepAtomicMeasure::new(
            2,
            [(0, 1.0), (3, 0.25)],
            vec![Atom {
                position: 0.125,
                mass: 2.0,
            }],
            false,
        )
        .unwrap();
        let back = StepAtomicMeasure::from_json(&m.to_json()).unwrap();
        assert_eq!(back.to_file(), m.to_file());
        assert!(StepAtomicMeasure::from_json(r#"{"resolution":0,"cells":[{"k":0,"w":-1}]}"#).is_err());
        assert!(StepAtomicMeasure::from_json(r#"{"resolution":0,"cells":[{"k":0,"w":1e999}]}"#).is_err());
        let err = StepAtomicMeasure::from_json("{\"resolution\": 0,\n \"cells\": [").unwrap_err();
        assert!(matches!(err, Error::Parse(msg) if msg.contains("line 2")));
    }

    #[test]
    fn restriction_and_product() {
        let m = StepAtomicMeasure::lebesgue(0.0, 4.0, 0).unwrap();
        let r = m.restrict(&[iv(0.5, 1.5), iv(3.0, 3.25)]);
        assert_eq!(r.total_mass(), 1.25);
        let c = m.restrict_complement(&iv(1.0, 3.0));
        assert_eq!(c.total_mass(), 2.0);
        let f = StepFunction::new(1, [(0, 2.0), (1, -1.0)].into_iter().collect());
        let fm = m.times(&f);
        assert!(fm.is_signed());
        assert_eq!(fm.total_mass(), 0.5);
        assert_eq!(fm.total_variation(), 1.5);
    }

    #[test]
    fn common_point_masses_reported() {
        let s = StepAtomicMeasure::atomic(vec![
            Atom {
                position: 1.0,
                mass: 1.0,
            },
            Atom {
                position: 2.0,
                mass: 1.0,
            },
        ])
        .unwrap();
        let o = StepAtomicMeasure::atomic(vec![Atom {
            position: 2.0,
            mass: 3.0,
        }])
        .unwrap();
        let w = WeightPair::new(s, o, 3.0).unwrap();
        assert_eq!(w.common_point_masses(), vec![2.0]);
        assert!((1.0 / w.p() + 1.0 / w.p_dual() - 1.0).abs() < 1e-15);
        assert!(WeightPair::new(w.sigma.clone(), w.omega.clone(), 1.0).is_err());
    }
}
