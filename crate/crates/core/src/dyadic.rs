//! Shifted dyadic grids `D^α = { 2^j (k + [0,1) + (−1)^j α) }` for
//! `α ∈ {0, 1/3, 2/3}`.
//!
//! Endpoints are kept as exact rationals `n·2^e/3` and every containment
//! test compares integers; binary64 only appears in the `Interval` views.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{pow2, Interval};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Shift {
    Zero,
    Third,
    TwoThirds,
}

impl Shift {
    pub const ALL: [Shift; 3] = [Shift::Zero, Shift::Third, Shift::TwoThirds];

    /// `3α`.
    pub fn thirds(self) -> i128 {
        match self {
            Shift::Zero => 0,
            Shift::Third => 1,
            Shift::TwoThirds => 2,
        }
    }

    pub fn value(self) -> f64 {
        self.thirds() as f64 / 3.0
    }
}

#[inline]
fn parity_sign(j: i32) -> i128 {
    if j.rem_euclid(2) == 0 {
        1
    } else {
        -1
    }
}

/// The rational `num · 2^exp / 3`. Equality and order compare values.
#[derive(Clone, Copy, Debug)]
pub struct GridPoint {
    pub num: i128,
    pub exp: i32,
}

impl GridPoint {
    /// Exact representation of a finite binary64 value.
    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            return Self { num: 0, exp: 0 };
        }
        let bits = x.to_bits();
        let sign: i128 = if bits >> 63 == 0 { 1 } else { -1 };
        let exp_bits = ((bits >> 52) & 0x7ff) as i32;
        let frac = (bits & ((1u64 << 52) - 1)) as i128;
        let (mant, exp) = if exp_bits == 0 {
            (frac, -1074)
        } else {
            (frac | (1i128 << 52), exp_bits - 1075)
        };
        Self {
            num: 3 * sign * mant,
            exp,
        }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 * pow2(self.exp) / 3.0
    }

    fn bit_len(n: i128) -> i32 {
        128 - n.unsigned_abs().leading_zeros() as i32
    }
}

impl PartialEq for GridPoint {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for GridPoint {}

impl PartialOrd for GridPoint {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for GridPoint {
    fn cmp(&self, other: &Self) -> Ordering {
        let (sa, sb) = (self.num.signum(), other.num.signum());
        if sa != sb || sa == 0 {
            return sa.cmp(&sb);
        }
        let ma = Self::bit_len(self.num) + self.exp;
        let mb = Self::bit_len(other.num) + other.exp;
        if ma != mb {
            let mag = ma.cmp(&mb);
            return if sa > 0 { mag } else { mag.reverse() };
        }
        // equal magnitudes: aligning costs at most the bit-length gap
        let e = self.exp.min(other.exp);
        let a = self.num << (self.exp - e);
        let b = other.num << (other.exp - e);
        a.cmp(&b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicInterval {
    pub scale: i32,
    pub index: i64,
    pub shift: Shift,
}

impl DyadicInterval {
    pub fn new(scale: i32, index: i64, shift: Shift) -> Self {
        Self {
            scale,
            index,
            shift,
        }
    }

    fn left_num(&self) -> i128 {
        3 * self.index as i128 + parity_sign(self.scale) * self.shift.thirds()
    }

    pub fn left_exact(&self) -> GridPoint {
        GridPoint {
            num: self.left_num(),
            exp: self.scale,
        }
    }

    pub fn right_exact(&self) -> GridPoint {
        GridPoint {
            num: self.left_num() + 3,
            exp: self.scale,
        }
    }

    pub fn left(&self) -> f64 {
        self.left_exact().to_f64()
    }

    pub fn right(&self) -> f64 {
        self.right_exact().to_f64()
    }

    pub fn length(&self) -> f64 {
        pow2(self.scale)
    }

    pub fn center(&self) -> f64 {
        GridPoint {
            num: 2 * self.left_num() + 3,
            exp: self.scale - 1,
        }
        .to_f64()
    }

    pub fn interval(&self) -> Interval {
        Interval::raw(self.left(), self.right())
    }

    /// Exact endpoints of the concentric dilate `m·Q`.
    pub fn dilate_exact(&self, m: u32) -> (GridPoint, GridPoint) {
        let c = 2 * self.left_num() + 3;
        let h = 3 * m as i128;
        (
            GridPoint {
                num: c - h,
                exp: self.scale - 1,
            },
            GridPoint {
                num: c + h,
                exp: self.scale - 1,
            },
        )
    }

    pub fn dilate(&self, m: f64) -> Interval {
        self.interval().dilate(m)
    }

    pub fn contains_point(&self, x: f64) -> bool {
        let p = GridPoint::from_f64(x);
        self.left_exact() <= p && p < self.right_exact()
    }

    /// `[left, right) ⊆ Q`.
    pub fn contains_interval(&self, q: &Interval) -> bool {
        self.left_exact() <= GridPoint::from_f64(q.left)
            && GridPoint::from_f64(q.right) <= self.right_exact()
    }

    /// Closed `[lo, hi] ⊆ Q` (half-open on the right of `Q`).
    pub fn covers_closed(&self, lo: f64, hi: f64) -> bool {
        self.left_exact() <= GridPoint::from_f64(lo) && GridPoint::from_f64(hi) < self.right_exact()
    }

    pub fn contains(&self, other: &DyadicInterval) -> bool {
        self.left_exact() <= other.left_exact() && other.right_exact() <= self.right_exact()
    }

    pub fn intersects(&self, other: &DyadicInterval) -> bool {
        self.left_exact() < other.right_exact() && other.left_exact() < self.right_exact()
    }

    pub fn parent(&self) -> DyadicInterval {
        let k = self.index as i128 + parity_sign(self.scale) * self.shift.thirds();
        DyadicInterval {
            scale: self.scale + 1,
            index: k.div_euclid(2) as i64,
            shift: self.shift,
        }
    }

    pub fn ancestor(&self, levels: u32) -> DyadicInterval {
        let mut q = *self;
        for _ in 0..levels {
            q = q.parent();
        }
        q
    }

    pub fn children(&self) -> [DyadicInterval; 2] {
        let s = parity_sign(self.scale - 1) * self.shift.thirds();
        let base = 2 * self.index as i128 - s;
        [base, base + 1].map(|k| DyadicInterval {
            scale: self.scale - 1,
            index: k as i64,
            shift: self.shift,
        })
    }

    /// All descendants exactly `levels` scales below, left to right.
    pub fn descendants(&self, levels: u32) -> Vec<DyadicInterval> {
        let mut v = vec![*self];
        for _ in 0..levels {
            v = v.iter().flat_map(|q| q.children()).collect();
        }
        v
    }

    pub fn is_descendant_of(&self, root: &DyadicInterval) -> bool {
        self.shift == root.shift && self.scale <= root.scale && {
            let levels = (root.scale - self.scale) as u32;
            self.ancestor(levels) == *root
        }
    }
}

/// The member of `D^α` at `scale` containing `x`.
pub fn locate(shift: Shift, x: f64, scale: i32) -> DyadicInterval {
    let s = parity_sign(scale) as f64 * shift.value();
    let mut k = (x / pow2(scale) - s).floor() as i64;
    let p = GridPoint::from_f64(x);
    loop {
        let q = DyadicInterval::new(scale, k, shift);
        if p < q.left_exact() {
            k -= 1;
        } else if p >= q.right_exact() {
            k += 1;
        } else {
            return q;
        }
    }
}

const MAX_CLIMB: i32 = 256;

/// Smallest cube of `D^α` containing the closed set `[lo, hi]`.
///
/// In `D^0` the point 0 is an endpoint at every scale, so a set straddling
/// it is never covered.
pub fn smallest_covering(shift: Shift, lo: f64, hi: f64) -> Result<DyadicInterval> {
    let width = (hi - lo).max(f64::MIN_POSITIVE);
    let mut q = locate(shift, lo, width.log2().floor() as i32);
    for _ in 0..MAX_CLIMB {
        if q.covers_closed(lo, hi) {
            return Ok(q);
        }
        q = q.parent();
    }
    Err(Error::NoCoveringCube)
}

/// Smallest ancestor of `q` (including `q`) covering `[lo, hi]`, if any.
pub fn covering_ancestor(q: &DyadicInterval, lo: f64, hi: f64) -> Option<DyadicInterval> {
    let mut a = *q;
    for _ in 0..MAX_CLIMB {
        if a.covers_closed(lo, hi) {
            return Some(a);
        }
        a = a.parent();
    }
    None
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSelection {
    pub base: Interval,
    pub alpha: Shift,
    pub hat: DyadicInterval,
    /// `|Q̂| / |Q|`.
    pub ratio: f64,
    /// Smallest `M` with `Q̂ ⊆ M·Q`.
    pub dilation_bound: f64,
}

/// Smallest cube `Q̂` over the three shifted grids with `3Q ⊆ Q̂`.
pub fn select_shifted_grid(q: &Interval) -> GridSelection {
    let triple = q.dilate(3.0);
    let start = triple.length().log2().floor() as i32;
    let mut best: Option<DyadicInterval> = None;
    for shift in Shift::ALL {
        let mut cube = locate(shift, triple.left, start);
        for _ in 0..MAX_CLIMB {
            if best.is_some_and(|b| cube.scale >= b.scale) {
                break;
            }
            if cube.contains_interval(&triple) {
                best = Some(cube);
                break;
            }
            cube = cube.parent();
        }
    }
    let hat = best.expect("shifted grids cover every interval");
    let c = q.center();
    let reach = (c - hat.left()).max(hat.right() - c);
    GridSelection {
        base: *q,
        alpha: hat.shift,
        hat,
        ratio: hat.length() / q.length(),
        dilation_bound: 2.0 * reach / q.length(),
    }
}

/// Among the dilates `m·Q`, those not strictly inside another listed dilate.
/// Duplicates are reported once; output is sorted by left endpoint.
pub fn besicovitch_maximal(cubes: &[DyadicInterval], m: u32) -> Result<Vec<DyadicInterval>> {
    if m % 2 == 0 {
        return Err(Error::EvenDilation(m));
    }
    if let Some(first) = cubes.first() {
        if cubes.iter().any(|c| c.shift != first.shift) {
            return Err(Error::MixedGrids);
        }
    }
    let mut v: Vec<DyadicInterval> = cubes.to_vec();
    v.sort_by_key(|c| (std::cmp::Reverse(c.scale), c.left_exact()));
    v.dedup();
    let dil: Vec<(GridPoint, GridPoint)> = v.iter().map(|c| c.dilate_exact(m)).collect();
    let mut out = Vec::new();
    for (i, c) in v.iter().enumerate() {
        let (l, r) = dil[i];
        let inside = dil.iter().enumerate().any(|(j, &(l2, r2))| {
            j != i && l2 <= l && r <= r2 && (l2 != l || r2 != r)
        });
        if !inside {
            out.push(*c);
        }
    }
    out.sort_by_key(|c| c.left_exact());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn locate_examples() {
        let q = locate(Shift::Zero, 0.7, 0);
        assert_eq!((q.left(), q.right()), (0.0, 1.0));
        let q = locate(Shift::Third, 0.0, 0);
        assert!((q.left() + 2.0 / 3.0).abs() < 1e-15 && (q.right() - 1.0 / 3.0).abs() < 1e-15);
        let q = locate(Shift::Zero, 0.7, -2);
        assert_eq!((q.left(), q.right()), (0.5, 0.75));
    }

    #[test]
    fn parent_contains_child() {
        for shift in Shift::ALL {
            for scale in -5..5 {
                for k in -7..7 {
                    let q = DyadicInterval::new(scale, k, shift);
                    let p = q.parent();
                    assert!(p.contains(&q), "{q:?} not in {p:?}");
                    assert!(p.children().contains(&q));
                    for c in p.children() {
                        assert!(p.contains(&c));
                        assert_eq!(c.parent(), p);
                    }
                }
            }
        }
    }

    #[test]
    fn exact_compare_handles_thirds() {
        // 1/3 is not a binary64 value: the nearest double lies on one side
        let q = locate(Shift::Third, 1.0 / 3.0, 0);
        let x = 1.0f64 / 3.0;
        assert!(q.contains_point(x));
        let exact_third = GridPoint { num: 1, exp: 0 };
        assert_ne!(GridPoint::from_f64(x), exact_third);
    }

    #[test]
    fn selection_examples() {
        let s = select_shifted_grid(&Interval::new(0.4, 0.6).unwrap());
        assert!(s.ratio <= 5.0 + 1e-12);
        let s = select_shifted_grid(&Interval::new(0.0, 1.0).unwrap());
        assert!(s.ratio <= 8.0);
        assert!(s.hat.contains_interval(&Interval::new(-1.0, 2.0).unwrap()));
    }

    #[test]
    fn zero_grid_never_covers_origin() {
        assert!(smallest_covering(Shift::Zero, -0.1, 0.1).is_err());
        let q = smallest_covering(Shift::Third, -0.1, 0.1).unwrap();
        assert!(q.covers_closed(-0.1, 0.1));
    }

    #[test]
    fn besicovitch_examples() {
        let big = locate(Shift::Zero, 0.0, 0);
        let small = locate(Shift::Zero, 0.0, -1);
        assert_eq!(besicovitch_maximal(&[big, small], 3).unwrap(), vec![big]);
        assert_eq!(besicovitch_maximal(&[small], 3).unwrap(), vec![small]);
        assert!(matches!(
            besicovitch_maximal(&[small], 4),
            Err(Error::EvenDilation(4))
        ));
    }
}
