//! Poisson-type averages of a measure relative to an interval and the
//! operators assembled from them.
//!
//! Every series stops at the first dilate or ancestor that covers the
//! support; the remaining terms form a geometric tail summed in closed form.

use serde::{Deserialize, Serialize};

use crate::dyadic::{locate, DyadicInterval, GridPoint, Shift};
use crate::error::{Error, Result};
use crate::measure::{pow2, Interval, Measure};
use crate::operators::sup_average_containing;

/// Modulus of continuity `δ` on `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DiniModulus {
    /// `δ(s) = s`.
    Linear,
    /// Piecewise linear through `(0, 0)` and the listed `(s, δ(s))` nodes;
    /// constant after the last node.
    Table(Vec<(f64, f64)>),
}

impl DiniModulus {
    pub fn table(mut nodes: Vec<(f64, f64)>) -> Result<Self> {
        nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut prev = (0.0, 0.0);
        for &(s, d) in &nodes {
            if !(s > prev.0 && s <= 1.0 && d >= prev.1 && d.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "modulus node ({s}, {d}) breaks monotonicity on (0, 1]"
                )));
            }
            prev = (s, d);
        }
        Ok(DiniModulus::Table(nodes))
    }

    pub fn eval(&self, s: f64) -> f64 {
        match self {
            DiniModulus::Linear => s,
            DiniModulus::Table(nodes) => {
                let mut prev = (0.0, 0.0);
                for &(x, d) in nodes {
                    if s <= x {
                        return prev.1 + (d - prev.1) * (s - prev.0) / (x - prev.0);
                    }
                    prev = (x, d);
                }
                prev.1
            }
        }
    }

    /// `∫₀¹ δ(s)/s ds`, exact for both kinds.
    pub fn dini_integral(&self) -> f64 {
        match self {
            DiniModulus::Linear => 1.0,
            DiniModulus::Table(nodes) => {
                let mut total = 0.0;
                let mut prev = (0.0, 0.0);
                for &(x, d) in nodes.iter().chain(std::iter::once(&(1.0, f64::NAN))) {
                    let x = x.min(1.0);
                    if x <= prev.0 {
                        continue;
                    }
                    let d = if d.is_nan() { prev.1 } else { d };
                    // δ(s) = a + b s on [prev.0, x]
                    let b = (d - prev.1) / (x - prev.0);
                    let a = prev.1 - b * prev.0;
                    if prev.0 > 0.0 {
                        total += a * (x / prev.0).ln();
                    }
                    total += b * (x - prev.0);
                    prev = (x, d);
                }
                total
            }
        }
    }
}

/// `𝐏(Q,ν) = |ν|(Q)/|Q| + Σ_ℓ δ(2^{−ℓ}) |ν|(2^{ℓ+1}Q ∖ 2^ℓQ)/|2^{ℓ+1}Q|`.
pub fn poisson_bold(q: &Interval, nu: &Measure, delta: &DiniModulus) -> f64 {
    let Some((lo, hi)) = nu.support_bounds() else {
        return 0.0;
    };
    let mut total = nu.abs_mass(q) / q.length();
    let mut l = 0;
    loop {
        let inner = q.dilate(pow2(l));
        let outer = q.dilate(pow2(l + 1));
        let ann = nu.abs_mass(&Interval::raw(outer.left, inner.left))
            + nu.abs_mass(&Interval::raw(inner.right, outer.right));
        total += delta.eval(pow2(-l)) / outer.length() * ann;
        if outer.left <= lo && hi < outer.right {
            return total;
        }
        l += 1;
    }
}

/// `𝖯(Q,ν) = Σ_ℓ 2^{−ℓ} |ν|(2^ℓQ)/|2^ℓQ|`.
pub fn poisson_std(q: &Interval, nu: &Measure) -> f64 {
    let Some((lo, hi)) = nu.support_bounds() else {
        return 0.0;
    };
    let mut total = 0.0;
    let mut l = 0;
    loop {
        let d = q.dilate(pow2(l));
        let m = nu.abs_mass(&d);
        if d.left <= lo && hi < d.right {
            // Σ_{m ≥ l} 4^{−m} = (4/3) 4^{−l}
            return total + 4.0 / 3.0 * pow2(-2 * l) * m / q.length();
        }
        total += pow2(-2 * l) * m / q.length();
        l += 1;
    }
}

/// `𝖯^dy_α(I,ν) = Σ_ℓ 2^{−ℓ} ν(I^{(ℓ)})/|I^{(ℓ)}|` over ancestors in the grid
/// of `I`.
pub fn poisson_dyadic(i: &DyadicInterval, nu: &Measure) -> Result<f64> {
    if nu.is_signed() {
        return Err(Error::SignedMeasure);
    }
    let Some((lo, hi)) = nu.support_bounds() else {
        return Ok(0.0);
    };
    let base = i.length();
    let mut total = 0.0;
    let mut a = *i;
    for l in 0..2048 {
        let m = nu.mass(&a.interval());
        if tail_starts(&a, lo, hi) {
            return Ok(total + 4.0 / 3.0 * pow2(-2 * l) * m / base);
        }
        total += pow2(-2 * l) * m / base;
        a = a.parent();
    }
    Ok(total)
}

/// Whether every ancestor of `a` (including `a`) meets `[lo, hi]` in the
/// same set as `a` does.
pub(crate) fn tail_starts(a: &DyadicInterval, lo: f64, hi: f64) -> bool {
    // in D^0 an ancestor with endpoint 0 keeps that endpoint forever
    let pinned = a.shift == Shift::Zero
        && (a.left_exact().num == 0 || a.right_exact().num == 0)
        && a.length() > lo.abs().max(hi.abs());
    a.covers_closed(lo, hi) || pinned
}

/// `ℙ(I;ν) = ν(I)/|I| + (|I|/2) ∫_{ℝ∖I} |z − z_I|^{−2} dν(z)`.
pub fn poisson_redef(i: &Interval, nu: &Measure) -> Result<f64> {
    Ok(nu.mass(i) / i.length() + 0.5 * i.length() * nu.integrate_inverse_square(i)?)
}

/// `M(Q,ν) = sup_{Q′ ⊇ Q} |ν|(Q′)/|Q′|`.
pub fn m_sup(q: &Interval, nu: &Measure) -> f64 {
    sup_average_containing(&nu.abs(), q.left, q.right)
        .expect("total variation is unsigned")
        .value
}

/// A root cube and pairwise disjoint descendants in one grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionData {
    pub root: DyadicInterval,
    pub pieces: Vec<DyadicInterval>,
}

impl PartitionData {
    pub fn new(root: DyadicInterval, mut pieces: Vec<DyadicInterval>) -> Result<Self> {
        for (i, p) in pieces.iter().enumerate() {
            if p.shift != root.shift {
                return Err(Error::MixedGrids);
            }
            if !p.is_descendant_of(&root) {
                return Err(Error::PieceOutsideRoot(i));
            }
        }
        let mut order: Vec<usize> = (0..pieces.len()).collect();
        order.sort_by_key(|&i| pieces[i].left_exact());
        for w in order.windows(2) {
            if pieces[w[0]].intersects(&pieces[w[1]]) {
                return Err(Error::OverlappingPieces(w[0], w[1]));
            }
        }
        pieces.sort_by_key(|p| p.left_exact());
        Ok(Self { root, pieces })
    }

    pub fn trivial(root: DyadicInterval) -> Self {
        Self {
            root,
            pieces: vec![root],
        }
    }

    pub fn piece_containing(&self, x: f64) -> Option<&DyadicInterval> {
        let i = self.pieces.partition_point(|p| p.right() <= x);
        self.pieces.get(i).filter(|p| p.contains_point(x))
    }
}

/// `ℙν(x) = Σ_r 𝖯(Q_r,ν) χ_{Q_r}(x)`.
pub fn poisson_operator_apply(parts: &PartitionData, nu: &Measure, x: f64) -> f64 {
    parts
        .piece_containing(x)
        .map_or(0.0, |p| poisson_std(&p.interval(), nu))
}

/// `𝐏ⱼᵏ(μ)(x) = Σ_r 𝐏(G_r, χ_E μ) χ_{G_r}(x)`.
pub fn pjk_operator(
    e: &[Interval],
    pieces: &[DyadicInterval],
    mu: &Measure,
    x: f64,
    delta: &DiniModulus,
) -> f64 {
    let restricted = mu.restrict(e);
    pieces
        .iter()
        .filter(|g| g.contains_point(x))
        .map(|g| poisson_bold(&g.interval(), &restricted, delta))
        .sum()
}

/// The maximal-length `D^α` interval inside `q`, leftmost on ties.
pub fn largest_grid_interval_in(q: &Interval, shift: Shift) -> DyadicInterval {
    let (l, r) = (GridPoint::from_f64(q.left), GridPoint::from_f64(q.right));
    let mut j = q.length().log2().floor() as i32;
    loop {
        let mut c = locate(shift, q.left, j);
        if c.left_exact() < l {
            c = DyadicInterval::new(j, c.index + 1, shift);
        }
        if c.right_exact() <= r {
            return c;
        }
        j -= 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(a: f64, b: f64) -> Interval {
        Interval::new(a, b).unwrap()
    }

    #[test]
    fn bold_examples() {
        let q = iv(-0.5, 0.5);
        let d = Measure::dirac(0.0, 1.0).unwrap();
        assert_eq!(poisson_bold(&q, &d, &DiniModulus::Linear), 1.0);
        let far = Measure::dirac(1.5, 1.0).unwrap();
        assert_eq!(poisson_bold(&q, &far, &DiniModulus::Linear), 0.125);
        assert_eq!(poisson_bold(&q, &Measure::zero(), &DiniModulus::Linear), 0.0);
    }

    #[test]
    fn std_examples() {
        let q = iv(0.0, 2.0);
        let d = Measure::dirac(1.5, 1.0).unwrap();
        assert!((poisson_std(&q, &d) - 4.0 / 3.0 / 2.0).abs() < 1e-15);
        assert_eq!(poisson_std(&q, &Measure::zero()), 0.0);
    }

    #[test]
    fn dyadic_examples() {
        let i = locate(Shift::Zero, 0.3, 0);
        let big = Measure::uniform(-pow2(41), pow2(41), 1.0).unwrap();
        let v = poisson_dyadic(&i, &big).unwrap();
        // every term up to ℓ = 40 equals 2^{−ℓ}
        assert!((v - 2.0).abs() < 1e-11, "{v}");
        assert_eq!(poisson_dyadic(&i, &Measure::zero()).unwrap(), 0.0);
    }

    #[test]
    fn redef_examples() {
        let i = iv(-1.0, 1.0);
        let v = poisson_redef(&i, &Measure::dirac(2.0, 1.0).unwrap()).unwrap();
        assert_eq!(v, 0.25);
        let v = poisson_redef(&i, &Measure::dirac(0.0, 1.0).unwrap()).unwrap();
        assert_eq!(v, 0.5);
        let v = poisson_redef(&i, &Measure::uniform(2.0, 3.0, 1.0).unwrap()).unwrap();
        assert!((v - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn table_modulus() {
        let t = DiniModulus::table(vec![(0.5, 0.5), (1.0, 1.0)]).unwrap();
        assert!((t.eval(0.25) - 0.25).abs() < 1e-15);
        assert!((t.dini_integral() - 1.0).abs() < 1e-15);
        assert!(DiniModulus::table(vec![(0.5, 0.5), (0.7, 0.1)]).is_err());
    }

    #[test]
    fn partition_validation() {
        let root = locate(Shift::Zero, 0.1, 0);
        let [a, b] = root.children();
        assert!(PartitionData::new(root, vec![a, b]).is_ok());
        assert!(matches!(
            PartitionData::new(root, vec![a, a.children()[0]]),
            Err(Error::OverlappingPieces(..))
        ));
        let outside = locate(Shift::Zero, 3.0, -1);
        assert!(matches!(
            PartitionData::new(root, vec![outside]),
            Err(Error::PieceOutsideRoot(0))
        ));
        let other = locate(Shift::Third, 0.1, -1);
        assert!(matches!(PartitionData::new(root, vec![other]), Err(Error::MixedGrids)));
    }

    #[test]
    fn operator_apply_examples() {
        let root = locate(Shift::Zero, 0.1, 0);
        let parts = PartitionData::new(root, vec![root.children()[0]]).unwrap();
        let nu = Measure::dirac(0.2, 1.0).unwrap();
        assert_eq!(poisson_operator_apply(&parts, &nu, 0.75), 0.0);
        let v = poisson_operator_apply(&parts, &nu, 0.25);
        assert!((v - 4.0 / 3.0 / 0.5).abs() < 1e-15);
    }

    #[test]
    fn largest_grid_interval() {
        let q = iv(0.1, 0.9);
        let c = largest_grid_interval_in(&q, Shift::Zero);
        assert_eq!((c.left(), c.right()), (0.25, 0.5));
        let c = largest_grid_interval_in(&iv(0.0, 1.0), Shift::Zero);
        assert_eq!((c.left(), c.right()), (0.0, 1.0));
    }
}
