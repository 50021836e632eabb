//! Seeded random weights: dyadic multiplicative cascades with bounded child
//! ratios, quantized densities and optional atoms.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::conditions::seeded;
use crate::error::{Error, Result};
use crate::dyadic::DyadicInterval;
use crate::measure::{pow2, Atom, StepAtomicMeasure, StepFunction, WeightPair};
use crate::poisson::PartitionData;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusSpec {
    /// Cells have length `2^{−L}` with `L` drawn from this range.
    pub resolution: (i32, i32),
    /// The support has length `2^s` with `s` drawn from this range.
    pub support_log2: (i32, i32),
    /// Child-to-parent density factors lie in `[1/r, r]` (renormalized).
    pub cascade_ratio: f64,
    /// Densities are multiples of `2^{−q}`.
    pub quantum_log2: i32,
    pub atom_probability: f64,
    pub max_atoms: usize,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            resolution: (3, 6),
            support_log2: (0, 2),
            cascade_ratio: 3.0,
            quantum_log2: 10,
            atom_probability: 0.25,
            max_atoms: 2,
        }
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = self.resolution.0 <= self.resolution.1
            && self.support_log2.0 <= self.support_log2.1
            && self.support_log2.1 <= 4
            && self.resolution.1 + self.support_log2.1 <= 12
            && self.cascade_ratio >= 1.0
            && (0..=30).contains(&self.quantum_log2)
            && (0.0..=1.0).contains(&self.atom_probability);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("corpus spec out of range: {self:?}")))
        }
    }
}

/// Layout shared by the two measures of a pair.
#[derive(Clone, Copy, Debug)]
struct Layout {
    resolution: i32,
    first: i64,
    levels: u32,
}

fn layout(rng: &mut ChaCha8Rng, spec: &CorpusSpec) -> Layout {
    let resolution = rng.gen_range(spec.resolution.0..=spec.resolution.1);
    let s = rng.gen_range(spec.support_log2.0..=spec.support_log2.1);
    let levels = (resolution + s) as u32;
    let cells = 1i64 << levels;
    Layout {
        resolution,
        first: -rng.gen_range(0..=cells),
        levels,
    }
}

fn quantize(x: f64, q: i32) -> f64 {
    let s = pow2(q);
    ((x * s).round() / s).max(1.0 / s)
}

fn cascade(rng: &mut ChaCha8Rng, lay: Layout, spec: &CorpusSpec) -> Vec<(i64, f64)> {
    let mut dens = vec![1.0f64];
    let ln_r = spec.cascade_ratio.ln();
    for _ in 0..lay.levels {
        let mut next = Vec::with_capacity(2 * dens.len());
        for &d in &dens {
            let a = (rng.gen_range(-1.0..=1.0) * ln_r).exp();
            let b = (rng.gen_range(-1.0..=1.0) * ln_r).exp();
            let norm = 2.0 / (a + b);
            next.push(d * a * norm);
            next.push(d * b * norm);
        }
        dens = next;
    }
    dens.into_iter()
        .enumerate()
        .map(|(i, d)| (lay.first + i as i64, quantize(d, spec.quantum_log2)))
        .collect()
}

fn atoms(rng: &mut ChaCha8Rng, lay: Layout, spec: &CorpusSpec) -> Vec<Atom> {
    if spec.max_atoms == 0 || !rng.gen_bool(spec.atom_probability) {
        return Vec::new();
    }
    let n = rng.gen_range(1..=spec.max_atoms);
    let h = pow2(-lay.resolution);
    let cells = 1i64 << lay.levels;
    (0..n)
        .map(|_| {
            let k = lay.first + rng.gen_range(0..cells);
            // quarter points avoid every shifted grid's endpoints at cell scale
            Atom {
                position: (k as f64 + 0.25) * h,
                mass: quantize(rng.gen_range(0.05..1.0) * h, spec.quantum_log2),
            }
        })
        .collect()
}

pub fn cascade_measure(rng: &mut ChaCha8Rng, spec: &CorpusSpec) -> Result<StepAtomicMeasure> {
    let lay = layout(rng, spec);
    let cells = cascade(rng, lay, spec);
    let at = atoms(rng, lay, spec);
    StepAtomicMeasure::new(lay.resolution, cells, at, false)
}

/// The `index`-th pair of the corpus for `seed`: σ and ω are independent
/// cascades on a common support.
pub fn weight_pair(spec: &CorpusSpec, p: f64, seed: u64, index: u64) -> Result<WeightPair> {
    spec.validate()?;
    let mut rng = seeded(seed, 0xC0FF_EE00 + index);
    let lay = layout(&mut rng, spec);
    let sc = cascade(&mut rng, lay, spec);
    let sa = atoms(&mut rng, lay, spec);
    let oc = cascade(&mut rng, lay, spec);
    let oa = atoms(&mut rng, lay, spec);
    WeightPair::new(
        StepAtomicMeasure::new(lay.resolution, sc, sa, false)?,
        StepAtomicMeasure::new(lay.resolution, oc, oa, false)?,
        p,
    )
}

/// A step function on the cells of `mu`, values quantized to `2^{−q}` with
/// signs and a random fraction of zeros.
pub fn step_function(rng: &mut ChaCha8Rng, mu: &StepAtomicMeasure, scale: f64, signed: bool) -> StepFunction {
    let mut values = std::collections::BTreeMap::new();
    for &k in mu.cells().keys() {
        if !rng.gen_bool(0.8) {
            continue;
        }
        let v = quantize(rng.gen_range(0.0..scale), 10);
        let s = if signed && rng.gen_bool(0.3) { -1.0 } else { 1.0 };
        values.insert(k, s * v);
    }
    StepFunction::new(mu.resolution(), values)
}

/// Sparse step function with `|f|` log-uniform in `[1, base^heights)`, so
/// that a CZ split at base `base` has principal cubes at several heights.
pub fn spread_step_function(rng: &mut ChaCha8Rng, mu: &StepAtomicMeasure, base: f64, heights: f64) -> StepFunction {
    let mut values = std::collections::BTreeMap::new();
    for &k in mu.cells().keys() {
        if !rng.gen_bool(0.5) {
            continue;
        }
        let v = quantize(base.powf(rng.gen_range(0.0..heights)), 10);
        let s = if rng.gen_bool(0.3) { -1.0 } else { 1.0 };
        values.insert(k, s * v);
    }
    StepFunction::new(mu.resolution(), values)
}

/// Random stopping-time partition of `root`: each cube splits with
/// probability 0.6 down to `max_depth`, and each leaf is kept with
/// probability `keep`.
pub fn random_partition(rng: &mut ChaCha8Rng, root: DyadicInterval, max_depth: u32, keep: f64) -> PartitionData {
    let mut pieces = Vec::new();
    let mut stack = vec![(root, 0u32)];
    while let Some((q, d)) = stack.pop() {
        if d < max_depth && rng.gen_bool(0.6) {
            let [a, b] = q.children();
            stack.push((b, d + 1));
            stack.push((a, d + 1));
        } else if rng.gen_bool(keep) {
            pieces.push(q);
        }
    }
    if pieces.is_empty() {
        return PartitionData::trivial(root);
    }
    PartitionData::new(root, pieces).expect("leaves of one tree are disjoint descendants")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_bounded() {
        let spec = CorpusSpec::default();
        for i in 0..20 {
            let a = weight_pair(&spec, 2.0, 7, i).unwrap();
            let b = weight_pair(&spec, 2.0, 7, i).unwrap();
            assert_eq!(a.sigma.to_json(), b.sigma.to_json());
            assert_eq!(a.omega.to_json(), b.omega.to_json());
            let (lo, hi) = a.support_bounds().unwrap();
            assert!(hi - lo <= 16.0 + 1.0);
            assert!(a.sigma.cells().values().all(|&d| d > 0.0 && (d * 1024.0).fract() == 0.0));
        }
        assert_ne!(
            weight_pair(&spec, 2.0, 7, 0).unwrap().sigma.to_json(),
            weight_pair(&spec, 2.0, 8, 0).unwrap().sigma.to_json()
        );
    }

    #[test]
    fn rejects_bad_spec() {
        let spec = CorpusSpec {
            support_log2: (0, 9),
            ..CorpusSpec::default()
        };
        assert!(weight_pair(&spec, 2.0, 0, 0).is_err());
    }
}
