//! Browser bindings: each export returns a JSON string for the page to plot.

use ergoscope::chain::{ChainScenario, ScenarioConfig};
use ergoscope::coarse::{coarse_grained_state, measure_probs, CoarseGraining};
use ergoscope::ergotropy::{
    boltzmann_ergotropy, ergotropy, observational_ergotropy, observational_ergotropy_asymptotic,
};
use ergoscope::linalg::{c64, trace_distance, CMatrix, CVector, SeededRng};
use ergoscope::protocol::block_haar_unitary;
use ergoscope::state::{DensityMatrix, HamiltonianOp, PureState};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const MAX_DEMO_SITES: usize = 12;
const MAX_DEMO_SHOTS: u32 = 200_000;

#[derive(Serialize)]
struct StateRow {
    name: &'static str,
    ergotropy: f64,
    boltzmann: f64,
    observational: f64,
    observational_asymptotic: f64,
}

#[derive(Serialize)]
struct HaarPoint {
    shots: u32,
    distance: f64,
    threshold: f64,
}

fn three_level_states() -> Vec<(&'static str, DensityMatrix)> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let plus = PureState::new(CVector::from_vec(vec![
        c64(0.0, 0.0),
        c64(s, 0.0),
        c64(s, 0.0),
    ]))
    .expect("unit vector")
    .density();
    vec![
        (
            "|1>",
            DensityMatrix::diagonal(&[0.0, 1.0, 0.0]).expect("valid"),
        ),
        (
            "|2>",
            DensityMatrix::diagonal(&[0.0, 0.0, 1.0]).expect("valid"),
        ),
        ("(|1>+|2>)/sqrt2", plus),
        (
            "diag(1/8, 7/8, 0)",
            DensityMatrix::diagonal(&[0.125, 0.875, 0.0]).expect("valid"),
        ),
    ]
}

pub fn three_level_json(e0: f64, e1: f64, e2: f64) -> Result<String, String> {
    let h = HamiltonianOp::diagonal(&[e0, e1, e2]).map_err(|e| e.to_string())?;
    if !(e0 <= e1 && e1 <= e2) {
        return Err("levels must ascend".into());
    }
    let cg = CoarseGraining::computational(&[vec![0], vec![1, 2]]).map_err(|e| e.to_string())?;
    let rows = three_level_states()
        .into_iter()
        .map(|(name, rho)| {
            Ok(StateRow {
                name,
                ergotropy: ergotropy(&rho, &h)?,
                boltzmann: boltzmann_ergotropy(&rho, &h, &cg)?,
                observational: observational_ergotropy(&rho, &h, &cg)?,
                observational_asymptotic: observational_ergotropy_asymptotic(&rho, &h, &cg)?,
            })
        })
        .collect::<ergoscope::Result<Vec<_>>>()
        .map_err(|e| e.to_string())?;
    serde_json::to_string(&rows).map_err(|e| e.to_string())
}

pub fn chain_json(sites: usize, n: usize, t_max: f64, steps: usize) -> Result<String, String> {
    if sites > MAX_DEMO_SITES {
        return Err(format!("at most {MAX_DEMO_SITES} sites in the browser"));
    }
    let config = ScenarioConfig {
        sites,
        n,
        t_max,
        t_steps: steps,
        ..ScenarioConfig::default()
    };
    let scenario = ChainScenario::new(config).map_err(|e| e.to_string())?;
    let records = scenario.run(1).map_err(|e| e.to_string())?;
    serde_json::to_string(&serde_json::json!({
        "metadata": scenario.metadata(),
        "records": records,
    }))
    .map_err(|e| e.to_string())
}

/// Running block-Haar average of the superposition state, checked at
/// roughly logarithmic shot counts.
pub fn haar_json(shots: u32, seed: u64) -> Result<String, String> {
    if shots == 0 || shots > MAX_DEMO_SHOTS {
        return Err(format!("shots must lie in 1..={MAX_DEMO_SHOTS}"));
    }
    let (_, rho) = three_level_states().swap_remove(2);
    let cg = CoarseGraining::computational(&[vec![0], vec![1, 2]]).map_err(|e| e.to_string())?;
    let target = coarse_grained_state(&measure_probs(&rho, &cg).map_err(|e| e.to_string())?, &cg)
        .map_err(|e| e.to_string())?;
    let mut rng = SeededRng::new(seed, 0);
    let mut acc = CMatrix::zeros(3, 3);
    let mut next = 1u32;
    let mut points = Vec::new();
    for k in 1..=shots {
        let u = block_haar_unitary(&cg, &mut rng);
        acc += &u * rho.matrix() * u.adjoint();
        if k == next || k == shots {
            let avg = &acc / c64(k as f64, 0.0);
            let distance = trace_distance(&avg, target.matrix()).map_err(|e| e.to_string())?;
            points.push(HaarPoint {
                shots: k,
                distance,
                threshold: 5.0 / (k as f64).sqrt(),
            });
            next = (next as f64 * 1.25).ceil() as u32;
        }
    }
    serde_json::to_string(&points).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn three_level(e0: f64, e1: f64, e2: f64) -> Result<String, JsError> {
    three_level_json(e0, e1, e2).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn chain_trajectory(
    sites: usize,
    n: usize,
    t_max: f64,
    steps: usize,
) -> Result<String, JsError> {
    chain_json(sites, n, t_max, steps).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn haar_convergence(shots: u32, seed: u64) -> Result<String, JsError> {
    haar_json(shots, seed).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn three_level_rows() {
        let v: Value = serde_json::from_str(&three_level_json(0.0, 1.0, 2.0).unwrap()).unwrap();
        let rows = v.as_array().unwrap();
        assert_eq!(rows.len(), 4);
        assert!((rows[3]["boltzmann"].as_f64().unwrap() - 0.4375).abs() < 1e-12);
        assert!((rows[3]["observational"].as_f64().unwrap() - 0.1875).abs() < 1e-12);
        assert!(three_level_json(2.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn chain_small_run() {
        let v: Value = serde_json::from_str(&chain_json(6, 2, 1.0, 5).unwrap()).unwrap();
        assert_eq!(v["records"].as_array().unwrap().len(), 5);
        assert_eq!(v["metadata"]["sector_dim"], 15);
        assert!(chain_json(14, 4, 1.0, 5).is_err());
    }

    #[test]
    fn haar_points_shrink() {
        let v: Value = serde_json::from_str(&haar_json(4000, 1).unwrap()).unwrap();
        let points = v.as_array().unwrap();
        let last = points.last().unwrap();
        assert_eq!(last["shots"], 4000);
        assert!(last["distance"].as_f64().unwrap() <= last["threshold"].as_f64().unwrap());
        assert!(haar_json(0, 1).is_err());
    }
}
