//! Browser bindings: testing constants of a pair, the maximal truncated
//! transform along a line, and the Whitney decomposition of a cell set.

use serde_json::{json, Value};
use tws_core::conditions::{ap_constant, doubling_gamma, interval_family, strengthened_ap, FamilySpec};
use tws_core::decomp::{verify_whitney, whitney, CellSet, WhitneyParams};
use tws_core::operators::{t_natural, SearchBudget};
use tws_core::{StepAtomicMeasure, WeightPair};
use wasm_bindgen::prelude::*;

fn js_err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

pub fn constants_json(sigma: &str, omega: &str, p: f64, depth: u32) -> Result<Value, String> {
    let sigma = StepAtomicMeasure::from_json(sigma).map_err(|e| format!("σ: {e}"))?;
    let omega = StepAtomicMeasure::from_json(omega).map_err(|e| format!("ω: {e}"))?;
    let w = WeightPair::new(sigma, omega, p).map_err(|e| e.to_string())?;
    let spec = FamilySpec {
        depth: depth.min(10),
        random: 256,
        ..FamilySpec::default()
    };
    let family = interval_family(&w, &spec);
    let ap = ap_constant(&w, &family);
    let (full, half) = strengthened_ap(&w, &family).map_err(|e| e.to_string())?;
    let gamma = doubling_gamma("doubling_sigma", &w.sigma, &family, None);
    let rows: Vec<Value> = [ap, full, half, gamma]
        .iter()
        .map(|r| json!({ "condition": r.condition, "estimate": r.estimate, "witness": r.witness }))
        .collect();
    Ok(json!({ "family": family.len(), "reports": rows }))
}

pub fn profile_json(measure: &str, lo: f64, hi: f64, points: usize) -> Result<Value, String> {
    let mu = StepAtomicMeasure::from_json(measure).map_err(|e| e.to_string())?;
    if !(lo < hi) || points < 2 || points > 2000 {
        return Err("need lo < hi and 2..=2000 points".into());
    }
    let budget = SearchBudget::with_density(24);
    let rows: Vec<Value> = (0..points)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / (points - 1) as f64;
            let s = t_natural(&mu, x, &budget);
            json!({ "x": x, "value": s.value, "eps": s.params.eps1, "r": s.params.r })
        })
        .collect();
    Ok(Value::Array(rows))
}

pub fn whitney_json(scale: i32, cells: &[i64]) -> Result<Value, String> {
    let omega = CellSet::new(scale, cells.to_vec());
    let wd = whitney(&omega, 0, &WhitneyParams::default()).map_err(|e| e.to_string())?;
    let check = verify_whitney(&wd);
    let cubes: Vec<Value> = wd.cubes.iter().map(|q| json!([q.left(), q.right()])).collect();
    Ok(json!({
        "cubes": cubes,
        "components": omega.components().iter().map(|c| json!([c.left, c.right])).collect::<Vec<_>>(),
        "disjoint": check.disjoint,
        "overlap": check.overlap,
        "residual": wd.residual,
    }))
}

#[wasm_bindgen]
pub fn constants(sigma: &str, omega: &str, p: f64, depth: u32) -> Result<String, JsValue> {
    constants_json(sigma, omega, p, depth).map(|v| v.to_string()).map_err(js_err)
}

#[wasm_bindgen]
pub fn profile(measure: &str, lo: f64, hi: f64, points: usize) -> Result<String, JsValue> {
    profile_json(measure, lo, hi, points).map(|v| v.to_string()).map_err(js_err)
}

#[wasm_bindgen]
pub fn whitney_cubes(scale: i32, cells: Vec<i64>) -> Result<String, JsValue> {
    whitney_json(scale, &cells).map(|v| v.to_string()).map_err(js_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    const LEB: &str = r#"{ "resolution": 0, "cells": [{"k": 0, "w": 1.0}, {"k": 1, "w": 1.0}, {"k": 2, "w": 1.0}, {"k": 3, "w": 1.0}] }"#;
    const DIRAC: &str = r#"{ "resolution": 0, "atoms": [{ "x": 0.0, "m": 1.0 }] }"#;

    #[test]
    fn lebesgue_block_constants() {
        let v = constants_json(LEB, LEB, 2.0, 4).unwrap();
        let ap = v["reports"][0]["estimate"].as_f64().unwrap();
        assert!((ap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dirac_profile_is_reciprocal() {
        let v = profile_json(DIRAC, 0.5, 4.0, 8).unwrap();
        for row in v.as_array().unwrap() {
            let (x, t) = (row["x"].as_f64().unwrap(), row["value"].as_f64().unwrap());
            assert!((x * t - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn whitney_of_interval() {
        let v = whitney_json(0, &(0..16).collect::<Vec<_>>()).unwrap();
        assert_eq!(v["disjoint"], true);
        assert!(!v["cubes"].as_array().unwrap().is_empty());
        assert!(profile_json(LEB, 1.0, 0.0, 4).is_err());
    }
}
