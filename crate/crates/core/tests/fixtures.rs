use std::path::PathBuf;

use ergoscope::chain::{ChainScenario, ScenarioConfig};
use ergoscope::coarse::CoarseGrainingFile;
use ergoscope::ergotropy::{boltzmann_ergotropy, observational_ergotropy};
use ergoscope::state::{DensityMatrix, HamiltonianOp};
use ergoscope::Error;

fn fixture(name: &str) -> PathBuf {
    [env!("CARGO_MANIFEST_DIR"), "fixtures", name]
        .iter()
        .collect()
}

#[test]
fn three_level_files_reproduce_closed_forms() {
    let h = HamiltonianOp::load(fixture("h_three_level.json")).unwrap();
    let rho = DensityMatrix::load(fixture("rho_d.json")).unwrap();
    let cg = CoarseGrainingFile::load(fixture("cg_two_outcome.json"))
        .unwrap()
        .resolve(Some(&h))
        .unwrap();
    assert_eq!(cg.volumes(), vec![1, 2]);
    assert!((boltzmann_ergotropy(&rho, &h, &cg).unwrap() - 0.4375).abs() < 1e-12);
    assert!((observational_ergotropy(&rho, &h, &cg).unwrap() - 0.1875).abs() < 1e-12);

    let plus = DensityMatrix::load(fixture("rho_plus.json")).unwrap();
    assert!((boltzmann_ergotropy(&plus, &h, &cg).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn energy_descriptor_needs_a_hamiltonian() {
    let file = CoarseGrainingFile::load(fixture("cg_energy.json")).unwrap();
    assert!(file.resolve(None).is_err());
    let h = HamiltonianOp::load(fixture("h_three_level.json")).unwrap();
    let cg = file.resolve(Some(&h)).unwrap();
    assert_eq!(cg.volumes(), vec![1, 1, 1]);
}

#[test]
fn malformed_matrices_are_rejected() {
    let dir = std::env::temp_dir().join(format!("ergoscope-fixtures-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cases = [
        ("short.json", r#"{"dim": 2, "re": [1, 0, 0]}"#),
        ("trace.json", r#"{"dim": 2, "re": [1, 0, 0, 1]}"#),
        ("asym.json", r#"{"dim": 2, "re": [0.5, 0.3, 0, 0.5]}"#),
        ("negative.json", r#"{"dim": 2, "re": [1.5, 0, 0, -0.5]}"#),
    ];
    for (name, body) in cases {
        let path = dir.join(name);
        std::fs::write(&path, body).unwrap();
        assert!(DensityMatrix::load(&path).is_err(), "{name}");
    }
    let asym = HamiltonianOp::load(dir.join("asym.json"));
    assert!(matches!(asym, Err(Error::NotHermitian { .. })));
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn chain_configs_load() {
    let quench = ScenarioConfig::load(fixture("chain_quench.json")).unwrap();
    let default = ScenarioConfig::default();
    assert_eq!(
        quench.initial_config().unwrap(),
        default.initial_config().unwrap()
    );
    assert_eq!(quench.spec(), default.spec());
    let small = ScenarioConfig::load(fixture("chain_small.json")).unwrap();
    let scenario = ChainScenario::new(small).unwrap();
    assert_eq!(scenario.sector_dim(), 56);
    assert_eq!(scenario.metadata().seed, 7);
}
