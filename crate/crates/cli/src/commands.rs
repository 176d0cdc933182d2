use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use ergoscope::chain::{ChainRecord, ChainScenario, ScenarioConfig, CHAIN_CSV_HEADER};
use ergoscope::coarse::{coarse_grained_state, measure_probs, CoarseGraining, CoarseGrainingFile};
use ergoscope::ergotropy::{boltzmann_ergotropy, ergotropy_report, observational_ergotropy};
use ergoscope::linalg::{c64, trace_distance, CMatrix, CVector};
use ergoscope::output::{fmt12, write_csv, write_shots_csv};
use ergoscope::protocol::{blind_shot, haar_average_state, mc_samples, McEstimate, Stage1, Stage2};
use ergoscope::state::{DensityMatrix, HamiltonianOp, PureState};
use ergoscope::{Error, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::{
    ChainArgs, Cli, Command, Common, Format, HaarArgs, Inputs, ProtocolArgs, ReportArgs,
    ThreeLevelArgs,
};

const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Energy-estimate window and thermodynamic checks are asserted to this slack.
const CHECK_TOL: f64 = 1e-9;

pub fn run(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::ThreeLevel(a) => three_level(a),
        Command::Chain(a) => chain(a, cli.workers),
        Command::Protocol(a) => protocol(a, cli.workers),
        Command::HaarCheck(a) => haar_check(a),
        Command::Report(a) => report(a),
    }
}

fn status(pass: bool) -> ExitCode {
    if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

/// Writes `text` to `--out` or stdout. Plain-text formats cannot carry the
/// run metadata, so it goes to `<out>.meta.json` or, without `--out`, stderr.
fn emit(common: &Common, format: Format, text: &str, meta: &Value) -> Result<()> {
    match &common.out {
        Some(path) => fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    if format != Format::Json {
        match &common.out {
            Some(path) => fs::write(sidecar_path(path), to_json(meta)?)?,
            None => eprintln!("{}", serde_json::to_string(meta)?),
        }
    }
    Ok(())
}

/// `meta` with the fields of `body` appended.
fn merged(meta: &Value, body: Value) -> Value {
    let mut out = meta.clone();
    if let (Value::Object(m), Value::Object(b)) = (&mut out, body) {
        m.extend(b);
    }
    out
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn parse_energies(text: &str) -> Result<[f64; 3]> {
    let values: Vec<f64> = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Validation(format!("cannot parse energy {s:?}")))
        })
        .collect::<Result<_>>()?;
    let [e0, e1, e2] = values[..] else {
        return Err(Error::Validation(format!(
            "expected three energies, got {}",
            values.len()
        )));
    };
    if !values.iter().all(|e| e.is_finite()) || e1 < e0 || e2 < e1 {
        return Err(Error::Validation(format!(
            "levels must be finite and ascend, got {e0}, {e1}, {e2}"
        )));
    }
    Ok([e0, e1, e2])
}

fn plus12() -> DensityMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    PureState::new(CVector::from_vec(vec![
        c64(0.0, 0.0),
        c64(s, 0.0),
        c64(s, 0.0),
    ]))
    .expect("unit vector")
    .density()
}

fn two_outcome() -> CoarseGraining {
    CoarseGraining::computational(&[vec![0], vec![1, 2]]).expect("valid partition")
}

#[derive(Serialize)]
struct GoldenRow {
    quantity: &'static str,
    value: f64,
    target: f64,
    deviation: f64,
    pass: bool,
}

fn three_level(args: &ThreeLevelArgs) -> Result<ExitCode> {
    let [e0, e1, e2] = parse_energies(&args.energies)?;
    let h = HamiltonianOp::diagonal(&[e0, e1, e2])?;
    let cg = two_outcome();
    let excited1 = PureState::basis(3, 1)?.density();
    let excited2 = PureState::basis(3, 2)?.density();
    let superposed = plus12();
    let mixture = DensityMatrix::diagonal(&[0.125, 0.875, 0.0])?;
    let mut swap = CMatrix::zeros(3, 3);
    swap[(0, 2)] = c64(1.0, 0.0);
    swap[(2, 0)] = c64(1.0, 0.0);
    swap[(1, 1)] = c64(1.0, 0.0);

    let entries = [
        (
            "W_B(rho_A)",
            boltzmann_ergotropy(&excited1, &h, &cg)?,
            (e1 - e0) / 2.0,
        ),
        (
            "W_B(rho_B)",
            boltzmann_ergotropy(&excited2, &h, &cg)?,
            e2 - (e0 + e1) / 2.0,
        ),
        (
            "W_B(rho_C)",
            boltzmann_ergotropy(&superposed, &h, &cg)?,
            (e2 - e0) / 2.0,
        ),
        (
            "W_B(rho_D)",
            boltzmann_ergotropy(&mixture, &h, &cg)?,
            7.0 / 16.0 * (e1 - e0),
        ),
        (
            "W_obs(rho_A)",
            observational_ergotropy(&excited1, &h, &cg)?,
            (e1 - e0) / 2.0,
        ),
        (
            "W_obs(rho_B)",
            observational_ergotropy(&excited2, &h, &cg)?,
            e2 - (e0 + e1) / 2.0,
        ),
        (
            "W_obs(rho_C)",
            observational_ergotropy(&superposed, &h, &cg)?,
            (e2 - e0) / 2.0,
        ),
        (
            "W_obs(rho_D)",
            observational_ergotropy(&mixture, &h, &cg)?,
            (7.0 * e1 - 5.0 * e0 - 2.0 * e2) / 16.0,
        ),
        (
            "W_blind(rho_A)",
            blind_shot(&excited1, &h, &swap)?.work,
            0.0,
        ),
        (
            "W_blind(rho_B)",
            blind_shot(&excited2, &h, &swap)?.work,
            e2 - e0,
        ),
        (
            "W_blind(rho_C)",
            blind_shot(&superposed, &h, &swap)?.work,
            (e2 - e0) / 2.0,
        ),
        (
            "W_blind(rho_D)",
            blind_shot(&mixture, &h, &swap)?.work,
            (e0 - e2) / 8.0,
        ),
    ];
    let scale = [e0, e1, e2].iter().fold(1.0f64, |m, e| m.max(e.abs()));
    let rows: Vec<GoldenRow> = entries
        .iter()
        .map(|&(quantity, value, target)| {
            let deviation = (value - target).abs();
            GoldenRow {
                quantity,
                value,
                target,
                deviation,
                pass: deviation <= 1e-12 * scale,
            }
        })
        .collect();
    let pass = rows.iter().all(|r| r.pass);

    let meta = json!({
        "version": VERSION,
        "command": "three-level",
        "seed": args.common.seed(),
        "energies": [e0, e1, e2],
    });
    let format = args.common.format.unwrap_or(Format::Table);
    let text = match format {
        Format::Json => to_json(&merged(&meta, json!({ "rows": rows, "pass": pass })))?,
        Format::Csv => {
            let mut s = String::from("quantity,value,target,deviation,pass\n");
            for r in &rows {
                s += &format!(
                    "{},{},{},{},{}\n",
                    r.quantity,
                    fmt12(r.value),
                    fmt12(r.target),
                    fmt12(r.deviation),
                    if r.pass { "PASS" } else { "FAIL" }
                );
            }
            s
        }
        Format::Table => {
            let mut s = format!(
                "{:<16} {:>16} {:>16} {:>10}  result\n",
                "quantity", "value", "target", "deviation"
            );
            for r in &rows {
                s += &format!(
                    "{:<16} {:>16} {:>16} {:>10.1e}  {}\n",
                    r.quantity,
                    fmt12(r.value),
                    fmt12(r.target),
                    r.deviation,
                    if r.pass { "PASS" } else { "FAIL" }
                );
            }
            s
        }
    };
    emit(&args.common, format, &text, &meta)?;
    Ok(status(pass))
}

/// Violated invariants along a chain trajectory.
fn chain_violations(records: &[ChainRecord], sector_dim: usize) -> Vec<String> {
    let ln_d = (sector_dim as f64).ln();
    let e_start = records.first().map_or(0.0, |r| r.energy_true);
    let mut problems = Vec::new();
    for r in records {
        if !r.band_contains_truth() {
            problems.push(format!(
                "t={}: W_obs_inf_true {} outside [{}, {}]",
                fmt12(r.t),
                fmt12(r.w_obs_inf_true),
                fmt12(r.w_band_lo),
                fmt12(r.w_band_hi)
            ));
        }
        if r.s_obs > ln_d + 1e-12 {
            problems.push(format!(
                "t={}: S_obs {} exceeds ln {}",
                fmt12(r.t),
                fmt12(r.s_obs),
                sector_dim
            ));
        }
        if (r.energy_true - e_start).abs() > CHECK_TOL {
            problems.push(format!(
                "t={}: energy drifted by {:.3e}",
                fmt12(r.t),
                r.energy_true - e_start
            ));
        }
    }
    problems
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

fn chain(args: &ChainArgs, workers: usize) -> Result<ExitCode> {
    let mut config = match &args.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = args.common.seed {
        config.seed = seed;
    }
    let scenario = ChainScenario::new(config)?;
    let records = scenario.run(workers)?;
    let metadata = scenario.metadata();

    let format = args.common.format.unwrap_or(Format::Csv);
    let text = match format {
        Format::Json => to_json(&json!({ "metadata": metadata, "records": records }))?,
        _ => {
            let rows: Vec<Vec<f64>> = records.iter().map(ChainRecord::to_row).collect();
            let mut buf = Vec::new();
            write_csv(&mut buf, &CHAIN_CSV_HEADER, &rows)?;
            String::from_utf8(buf).expect("ASCII table")
        }
    };
    emit(
        &args.common,
        format,
        &text,
        &serde_json::to_value(&metadata)?,
    )?;

    let problems = chain_violations(&records, scenario.sector_dim());
    for p in &problems {
        eprintln!("violation: {p}");
    }
    Ok(status(problems.is_empty()))
}

struct Loaded {
    rho: DensityMatrix,
    h: HamiltonianOp,
    cg: CoarseGraining,
    echo: serde_json::Value,
}

fn describe(path: &Option<PathBuf>) -> serde_json::Value {
    match path {
        Some(p) => json!(p.display().to_string()),
        None => json!("builtin"),
    }
}

fn load_inputs(inputs: &Inputs) -> Result<Loaded> {
    let h = match &inputs.hamiltonian {
        Some(p) => HamiltonianOp::load(p)?,
        None => HamiltonianOp::diagonal(&[0.0, 1.0, 2.0])?,
    };
    let rho = match &inputs.state {
        Some(p) => DensityMatrix::load(p)?,
        None => DensityMatrix::diagonal(&[0.125, 0.875, 0.0])?,
    };
    let cg = match &inputs.coarse_graining {
        Some(p) => CoarseGrainingFile::load(p)?.resolve(Some(&h))?,
        None => two_outcome(),
    };
    if rho.dim() != h.dim() || cg.dim() != h.dim() {
        return Err(Error::Validation(format!(
            "dimensions disagree: state {}, Hamiltonian {}, coarse-graining {}",
            rho.dim(),
            h.dim(),
            cg.dim()
        )));
    }
    let echo = json!({
        "state": describe(&inputs.state),
        "hamiltonian": describe(&inputs.hamiltonian),
        "coarse_graining": describe(&inputs.coarse_graining),
    });
    Ok(Loaded { rho, h, cg, echo })
}

/// Largest tolerated |z| before the run counts as a statistical regression.
const Z_LIMIT: f64 = 4.0;

fn protocol(args: &ProtocolArgs, workers: usize) -> Result<ExitCode> {
    if args.shots < 2 {
        return Err(Error::Validation(format!(
            "need at least 2 shots, got {}",
            args.shots
        )));
    }
    let Loaded { rho, h, cg, echo } = load_inputs(&args.inputs)?;
    let seed = args.common.seed();
    let (samples, exact) = if args.stage == 1 {
        let stage = Stage1::new(&rho, &h, &cg)?;
        let samples = mc_samples(args.shots, seed, workers, |k, r| stage.shot(k, r))?;
        (samples, boltzmann_ergotropy(&rho, &h, &cg)?)
    } else {
        let stage = Stage2::new(&rho, &h, &cg, None)?;
        let samples = mc_samples(args.shots, seed, workers, |k, r| stage.shot(k, r))?;
        (samples, observational_ergotropy(&rho, &h, &cg)?)
    };
    let estimate = McEstimate::from_samples(&samples, seed, workers.clamp(1, args.shots as usize))?;
    let z = estimate.z_score(exact);
    let pass = z.abs() <= Z_LIMIT;

    if let Some(path) = &args.shots_csv {
        let mut buf = Vec::new();
        write_shots_csv(&mut buf, &samples)?;
        fs::write(path, buf)?;
    }
    let exact_name = if args.stage == 1 {
        "boltzmann_ergotropy"
    } else {
        "observational_ergotropy"
    };
    let meta = json!({
        "version": VERSION,
        "command": "protocol",
        "seed": seed,
        "workers": estimate.workers,
        "stage": args.stage,
        "shots": args.shots,
        "inputs": echo,
    });
    let format = args.common.format.unwrap_or(Format::Json);
    let text = match format {
        Format::Json => to_json(&merged(
            &meta,
            json!({
                "estimate": estimate,
                "exact": { "quantity": exact_name, "value": exact },
                "z_score": z,
                "pass": pass,
            }),
        ))?,
        _ => format!(
            "stage {} mean {} stderr {} exact {} ({exact_name}) z {:.3} {}\n",
            args.stage,
            fmt12(estimate.mean),
            fmt12(estimate.stderr),
            fmt12(exact),
            z,
            if pass { "PASS" } else { "FAIL" }
        ),
    };
    emit(&args.common, format, &text, &meta)?;
    Ok(status(pass))
}

fn haar_check(args: &HaarArgs) -> Result<ExitCode> {
    if args.shots == 0 {
        return Err(Error::Validation("need at least one shot".into()));
    }
    let rho = match &args.state {
        Some(p) => DensityMatrix::load(p)?,
        None => plus12(),
    };
    let cg = match &args.coarse_graining {
        Some(p) => CoarseGrainingFile::load(p)?.resolve(None)?,
        None => two_outcome(),
    };
    if cg.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: cg.dim(),
        });
    }
    let seed = args.common.seed();
    let average = haar_average_state(&rho, &cg, args.shots, seed)?;
    let reference = if args.negative_control {
        rho.matrix().clone()
    } else {
        coarse_grained_state(&measure_probs(&rho, &cg)?, &cg)?.into_matrix()
    };
    let distance = trace_distance(&average, &reference)?;
    let threshold = 5.0 / (args.shots as f64).sqrt();
    let pass = distance <= threshold;
    let meta = json!({
        "version": VERSION,
        "command": "haar-check",
        "seed": seed,
        "shots": args.shots,
        "negative_control": args.negative_control,
        "state": describe(&args.state),
        "coarse_graining": describe(&args.coarse_graining),
    });
    let format = args.common.format.unwrap_or(Format::Table);
    let text = match format {
        Format::Json => to_json(&merged(
            &meta,
            json!({ "trace_distance": distance, "threshold": threshold, "pass": pass }),
        ))?,
        _ => format!(
            "trace distance {} threshold {} {}\n",
            fmt12(distance),
            fmt12(threshold),
            if pass { "PASS" } else { "FAIL" }
        ),
    };
    emit(&args.common, format, &text, &meta)?;
    Ok(status(pass))
}

fn report(args: &ReportArgs) -> Result<ExitCode> {
    let Loaded { rho, h, cg, echo } = load_inputs(&args.inputs)?;
    let report = ergotropy_report(&rho, &h, &cg)?;
    let meta = json!({
        "version": VERSION,
        "command": "report",
        "seed": args.common.seed(),
        "inputs": echo,
    });
    let format = args.common.format.unwrap_or(Format::Json);
    let text = match format {
        Format::Json => to_json(&merged(&meta, json!({ "report": report })))?,
        _ => {
            let flat = serde_json::to_value(&report)?;
            let mut s = String::new();
            for key in [
                "W",
                "W_inf",
                "W_B",
                "W_B_inf",
                "W_obs",
                "W_obs_inf",
                "S_Sh",
                "S_B",
                "S_C",
                "S_vN",
            ] {
                let v = flat[key].as_f64().unwrap_or(f64::NAN);
                s += &format!("{key:<10} {}\n", fmt12(v));
            }
            s
        }
    };
    emit(&args.common, format, &text, &meta)?;
    Ok(ExitCode::SUCCESS)
}

impl Common {
    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}
