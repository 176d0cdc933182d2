//! Monte-Carlo simulation of work extraction through a coarse-grained
//! measurement: block-Haar randomization inside each macrostate followed by a
//! passivizing unitary, with or without conditioning on the outcome.

use serde::Serialize;

use crate::coarse::{coarse_grained_state, measure_probs, CoarseGraining, MeasurementStats};
use crate::error::{Error, Result};
use crate::linalg::{
    c64, eigh, haar_unitary, kron, trace_distance, trace_product, CMatrix, SeededRng,
};
use crate::state::{check_dim, hermitize, mean_energy, DensityMatrix, HamiltonianOp};

/// One simulated extraction. `outcome` is set only when a measurement happened.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WorkSample {
    pub shot_index: u64,
    pub outcome: Option<usize>,
    pub work: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub shots: u64,
    pub seed: u64,
    pub workers: usize,
}

impl McEstimate {
    /// Mean and standard error, summed in shot order.
    pub fn from_samples(samples: &[WorkSample], seed: u64, workers: usize) -> Result<Self> {
        let n = samples.len();
        if n < 2 {
            return Err(Error::Domain(format!("need at least 2 shots, got {n}")));
        }
        // Shifted by the first sample so a constant series has exactly zero spread.
        let shift = samples[0].work;
        let dev: f64 = samples.iter().map(|s| s.work - shift).sum();
        let mean_dev = dev / n as f64;
        let var = samples
            .iter()
            .map(|s| (s.work - shift - mean_dev).powi(2))
            .sum::<f64>()
            / (n - 1) as f64;
        let mean = shift + mean_dev;
        Ok(McEstimate {
            mean,
            stderr: (var / n as f64).sqrt(),
            shots: n as u64,
            seed,
            workers,
        })
    }

    /// `(mean - exact) / stderr`. The standard error is floored at
    /// `1e-12 max(1, |exact|)` so that rounding noise in a zero-variance
    /// estimate does not register as a deviation.
    pub fn z_score(&self, exact: f64) -> f64 {
        let floor = 1e-12 * exact.abs().max(1.0);
        (self.mean - exact) / self.stderr.max(floor)
    }
}

/// `sum_i B_i U_i B_i^dagger` with each `U_i` Haar on its macrostate.
pub fn block_haar_unitary(cg: &CoarseGraining, rng: &mut SeededRng) -> CMatrix {
    let d = cg.dim();
    let mut u = CMatrix::zeros(d, d);
    for b in cg.bases() {
        let block = haar_unitary(b.ncols(), rng).expect("macrostates are nonempty");
        u += b * block * b.adjoint();
    }
    u
}

/// Unitary sending the eigenvectors of `sigma` (largest eigenvalue first)
/// onto the energy eigenvectors (lowest level first).
pub fn optimal_unitary_for(sigma: &DensityMatrix, h: &HamiltonianOp) -> Result<CMatrix> {
    check_dim(h.dim(), sigma.dim())?;
    let spec = eigh(sigma.matrix())?;
    let d = sigma.dim();
    // Reverse the order of eigenvalue groups but keep the order inside each group.
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (k, &x) in spec.eigenvalues.iter().enumerate() {
        match groups.last_mut() {
            Some(g) if (x - spec.eigenvalues[g[0]]).abs() <= 1e-10 => g.push(k),
            _ => groups.push(vec![k]),
        }
    }
    let order: Vec<usize> = groups.into_iter().rev().flatten().collect();
    let mut desc = CMatrix::zeros(d, d);
    for (j, &k) in order.iter().enumerate() {
        desc.set_column(j, &spec.eigenvectors.column(k));
    }
    Ok(&h.spectrum().eigenvectors * desc.adjoint())
}

fn energy_after(h_rotated: &CMatrix, state: &CMatrix, twirl: &CMatrix) -> f64 {
    trace_product(h_rotated, &(twirl * state * twirl.adjoint())).re
}

/// Measure, randomize inside the observed macrostate, then passivize the flat
/// macrostate of that outcome.
#[derive(Clone, Debug)]
pub struct Stage1 {
    cg: CoarseGraining,
    probs: Vec<f64>,
    initial_energy: f64,
    /// `P_i rho P_i / p_i`, absent for unreachable outcomes.
    conditioned: Vec<Option<CMatrix>>,
    /// `U(i)^dagger H U(i)`.
    rotated_h: Vec<CMatrix>,
}

impl Stage1 {
    pub fn new(rho: &DensityMatrix, h: &HamiltonianOp, cg: &CoarseGraining) -> Result<Self> {
        check_dim(h.dim(), rho.dim())?;
        check_dim(cg.dim(), h.dim())?;
        let stats = measure_probs(rho, cg)?;
        let mut conditioned = Vec::with_capacity(cg.len());
        let mut rotated_h = Vec::with_capacity(cg.len());
        for (i, &p) in stats.probs().iter().enumerate() {
            let b = cg.basis(i);
            conditioned.push((p > 0.0).then(|| {
                let mut m = b * (b.adjoint() * rho.matrix() * b) * b.adjoint() / c64(p, 0.0);
                hermitize(&mut m);
                m
            }));
            let u = optimal_unitary_for(&flat_macrostate(cg, i), h)?;
            rotated_h.push(u.adjoint() * h.matrix() * &u);
        }
        Ok(Stage1 {
            cg: cg.clone(),
            probs: stats.probs().to_vec(),
            initial_energy: mean_energy(rho, h)?,
            conditioned,
            rotated_h,
        })
    }

    pub fn shot(&self, shot_index: u64, rng: &mut SeededRng) -> WorkSample {
        let i = rng.categorical(&self.probs);
        let twirl = block_haar_unitary(&self.cg, rng);
        let state = self.conditioned[i]
            .as_ref()
            .expect("sampled outcome has weight");
        WorkSample {
            shot_index,
            outcome: Some(i),
            work: self.initial_energy - energy_after(&self.rotated_h[i], state, &twirl),
        }
    }
}

/// Randomize without measuring, then passivize the coarse-grained state.
#[derive(Clone, Debug)]
pub struct Stage2 {
    cg: CoarseGraining,
    state: CMatrix,
    initial_energy: f64,
    rotated_h: CMatrix,
}

impl Stage2 {
    /// Statistics come from `rho` unless a pre-characterized source is given.
    pub fn new(
        rho: &DensityMatrix,
        h: &HamiltonianOp,
        cg: &CoarseGraining,
        source: Option<&MeasurementStats>,
    ) -> Result<Self> {
        check_dim(h.dim(), rho.dim())?;
        check_dim(cg.dim(), h.dim())?;
        let stats = match source {
            Some(s) => s.clone(),
            None => measure_probs(rho, cg)?,
        };
        let rho_cg = coarse_grained_state(&stats, cg)?;
        let u = optimal_unitary_for(&rho_cg, h)?;
        Ok(Stage2 {
            cg: cg.clone(),
            state: rho.matrix().clone(),
            initial_energy: mean_energy(rho, h)?,
            rotated_h: u.adjoint() * h.matrix() * &u,
        })
    }

    pub fn shot(&self, shot_index: u64, rng: &mut SeededRng) -> WorkSample {
        let twirl = block_haar_unitary(&self.cg, rng);
        WorkSample {
            shot_index,
            outcome: None,
            work: self.initial_energy - energy_after(&self.rotated_h, &self.state, &twirl),
        }
    }
}

/// Outcome-conditioned extraction acting jointly on two measured copies.
#[derive(Clone, Debug)]
pub struct Stage1Pair {
    cg: CoarseGraining,
    probs: Vec<f64>,
    initial_energy: f64,
    conditioned: Vec<Option<CMatrix>>,
    /// Indexed by `i * outcomes + j`.
    rotated_h: Vec<CMatrix>,
}

impl Stage1Pair {
    pub fn new(rho: &DensityMatrix, h: &HamiltonianOp, cg: &CoarseGraining) -> Result<Self> {
        let single = Stage1::new(rho, h, cg)?;
        let d = h.dim();
        let id = CMatrix::identity(d, d);
        let h2 = HamiltonianOp::new(kron(h.matrix(), &id) + kron(&id, h.matrix()))?;
        let flats: Vec<DensityMatrix> = (0..cg.len()).map(|i| flat_macrostate(cg, i)).collect();
        let mut rotated_h = Vec::with_capacity(cg.len() * cg.len());
        for a in &flats {
            for b in &flats {
                let joint = DensityMatrix::new(kron(a.matrix(), b.matrix()))?;
                let u = optimal_unitary_for(&joint, &h2)?;
                rotated_h.push(u.adjoint() * h2.matrix() * &u);
            }
        }
        Ok(Stage1Pair {
            cg: single.cg,
            probs: single.probs,
            initial_energy: single.initial_energy,
            conditioned: single.conditioned,
            rotated_h,
        })
    }

    /// Work per copy; `outcome` encodes the pair as `i * outcomes + j`.
    pub fn shot(&self, shot_index: u64, rng: &mut SeededRng) -> WorkSample {
        let i = rng.categorical(&self.probs);
        let j = rng.categorical(&self.probs);
        let twirl = kron(
            &block_haar_unitary(&self.cg, rng),
            &block_haar_unitary(&self.cg, rng),
        );
        let state = kron(
            self.conditioned[i]
                .as_ref()
                .expect("sampled outcome has weight"),
            self.conditioned[j]
                .as_ref()
                .expect("sampled outcome has weight"),
        );
        let k = i * self.cg.len() + j;
        let final_energy = energy_after(&self.rotated_h[k], &state, &twirl);
        WorkSample {
            shot_index,
            outcome: Some(k),
            work: self.initial_energy - final_energy / 2.0,
        }
    }
}

/// `P_i / V_i`.
pub fn flat_macrostate(cg: &CoarseGraining, i: usize) -> DensityMatrix {
    let b = cg.basis(i);
    let mut m = b * b.adjoint() / c64(b.ncols() as f64, 0.0);
    hermitize(&mut m);
    DensityMatrix::from_trusted(m)
}

pub fn stage1_shot(
    rho: &DensityMatrix,
    h: &HamiltonianOp,
    cg: &CoarseGraining,
    rng: &mut SeededRng,
) -> Result<WorkSample> {
    Ok(Stage1::new(rho, h, cg)?.shot(0, rng))
}

pub fn stage2_shot(
    rho: &DensityMatrix,
    h: &HamiltonianOp,
    cg: &CoarseGraining,
    rng: &mut SeededRng,
) -> Result<WorkSample> {
    Ok(Stage2::new(rho, h, cg, None)?.shot(0, rng))
}

/// Direct application of a guessed unitary, without randomization.
pub fn blind_shot(rho: &DensityMatrix, h: &HamiltonianOp, guess_u: &CMatrix) -> Result<WorkSample> {
    check_dim(h.dim(), rho.dim())?;
    let after = rho.conjugate(guess_u)?;
    Ok(WorkSample {
        shot_index: 0,
        outcome: None,
        work: mean_energy(rho, h)? - mean_energy(&after, h)?,
    })
}

/// Runs `shots` shots split into contiguous chunks, one per worker. Worker `w`
/// draws from stream `(seed, w)`; samples come back in shot order.
pub fn mc_samples<F>(shots: u64, seed: u64, workers: usize, shot: F) -> Result<Vec<WorkSample>>
where
    F: Fn(u64, &mut SeededRng) -> WorkSample + Sync,
{
    if shots < 2 {
        return Err(Error::Domain(format!("need at least 2 shots, got {shots}")));
    }
    let workers = workers.clamp(1, shots as usize);
    let bounds: Vec<(u64, u64)> = (0..workers as u64)
        .map(|w| (shots * w / workers as u64, shots * (w + 1) / workers as u64))
        .collect();
    let run = |w: usize| {
        let mut rng = SeededRng::new(seed, w as u64);
        let (lo, hi) = bounds[w];
        (lo..hi).map(|k| shot(k, &mut rng)).collect::<Vec<_>>()
    };
    if workers == 1 {
        return Ok(run(0));
    }
    let chunks: Vec<Vec<WorkSample>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers).map(|w| scope.spawn(move || run(w))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });
    Ok(chunks.into_iter().flatten().collect())
}

pub fn mc_estimate<F>(shots: u64, seed: u64, workers: usize, shot: F) -> Result<McEstimate>
where
    F: Fn(u64, &mut SeededRng) -> WorkSample + Sync,
{
    let samples = mc_samples(shots, seed, workers, shot)?;
    McEstimate::from_samples(&samples, seed, workers.clamp(1, shots as usize))
}

/// Empirical mean of `(sum_i U_i) rho (sum_i U_i)^dagger` over block-Haar draws.
pub fn haar_average_state(
    rho: &DensityMatrix,
    cg: &CoarseGraining,
    shots: u64,
    seed: u64,
) -> Result<CMatrix> {
    check_dim(cg.dim(), rho.dim())?;
    if shots == 0 {
        return Err(Error::Domain("need at least one shot".into()));
    }
    let mut rng = SeededRng::new(seed, 0);
    let d = rho.dim();
    let mut acc = CMatrix::zeros(d, d);
    for _ in 0..shots {
        let u = block_haar_unitary(cg, &mut rng);
        acc += &u * rho.matrix() * u.adjoint();
    }
    Ok(acc / c64(shots as f64, 0.0))
}

/// Trace distance between the block-Haar average and `rho_cg`.
pub fn verify_haar_average(
    rho: &DensityMatrix,
    cg: &CoarseGraining,
    shots: u64,
    seed: u64,
) -> Result<f64> {
    let avg = haar_average_state(rho, cg, shots, seed)?;
    let rho_cg = coarse_grained_state(&measure_probs(rho, cg)?, cg)?;
    trace_distance(&avg, rho_cg.matrix())
}

/// Largest operator-norm entry block `P_i A P_j`, `i != j`, measured by the
/// Frobenius norm of `B_i^dagger A B_j`.
pub fn max_off_block(a: &CMatrix, cg: &CoarseGraining) -> f64 {
    let mut worst = 0.0f64;
    for (i, bi) in cg.bases().iter().enumerate() {
        for (j, bj) in cg.bases().iter().enumerate() {
            if i != j {
                worst = worst.max((bi.adjoint() * a * bj).norm());
            }
        }
    }
    worst
}
