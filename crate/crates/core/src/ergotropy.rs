//! Passive states, thermal states and every flavour of extractable work:
//! plain and asymptotic ergotropy, Boltzmann ergotropy (outcome-conditioned
//! extraction) and observational ergotropy (unconditioned extraction), each in
//! its single-copy and many-copy form.

use std::cmp::Ordering;

use serde::{Serialize, Serializer};

use crate::coarse::{
    boltzmann_entropy, measure_probs, observational_entropy, shannon_entropy, CoarseGraining,
    MeasurementStats,
};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::state::{
    check_dim, mean_energy, spectral_entropy, von_neumann_entropy, DensityMatrix, HamiltonianOp,
};

/// Target precision of the inverse-temperature solver.
pub const BETA_ENTROPY_TOL: f64 = 1e-9;

pub const BETA_MAX_ITER: u32 = 200;

/// Default cap on distinct entries of the compressed eigenvalue multisets in
/// [`finite_n_min_energy`].
pub const DEFAULT_MULTISET_CAP: usize = 1_000_000;

fn sort_desc(v: &mut [f64]) {
    v.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
}

/// Minimal energy of a state with the given populations: largest population on
/// the lowest level. `levels` must be ascending.
pub fn passive_energy(populations: &[f64], levels: &[f64]) -> f64 {
    let mut pops = populations.to_vec();
    sort_desc(&mut pops);
    pops.iter().zip(levels).map(|(p, e)| p * e).sum()
}

/// State with the spectrum of `sigma` placed on energy eigenvectors in
/// decreasing order of population.
pub fn passive_state(sigma: &DensityMatrix, h: &HamiltonianOp) -> Result<DensityMatrix> {
    check_dim(h.dim(), sigma.dim())?;
    let mut pops = sigma.eigenvalues();
    sort_desc(&mut pops);
    let v = &h.spectrum().eigenvectors;
    let mut scaled = v.clone();
    for (j, &p) in pops.iter().enumerate() {
        for z in scaled.column_mut(j).iter_mut() {
            *z *= p;
        }
    }
    let mut m: CMatrix = scaled * v.adjoint();
    crate::state::hermitize(&mut m);
    Ok(DensityMatrix::from_trusted(m))
}

/// `tr(H rho) - min_U tr(H U rho U^dagger)`.
pub fn ergotropy(rho: &DensityMatrix, h: &HamiltonianOp) -> Result<f64> {
    let e = mean_energy(rho, h)?;
    Ok(e - passive_energy(&rho.eigenvalues(), h.levels()))
}

/// Inverse temperature; `f64::INFINITY` stands for the ground-state limit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BetaSolution {
    pub beta: f64,
    pub achieved_entropy: f64,
    pub target_entropy: f64,
    pub iterations: u32,
    /// The solution sits at `beta = +inf`; the achieved entropy is `ln g_0`.
    pub clamped: bool,
}

impl BetaSolution {
    pub fn is_infinite(&self) -> bool {
        self.beta.is_infinite()
    }

    pub fn residual(&self) -> f64 {
        (self.achieved_entropy - self.target_entropy).abs()
    }
}

/// Gibbs populations on `levels` (ascending) at inverse temperature `beta`.
pub fn thermal_populations(levels: &[f64], beta: f64) -> Vec<f64> {
    let Some(&e0) = levels.first() else {
        return Vec::new();
    };
    if beta.is_infinite() {
        let g = ground_degeneracy(levels);
        return (0..levels.len())
            .map(|k| if k < g { 1.0 / g as f64 } else { 0.0 })
            .collect();
    }
    let w: Vec<f64> = levels.iter().map(|&e| (-beta * (e - e0)).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

pub fn thermal_energy(levels: &[f64], beta: f64) -> f64 {
    thermal_populations(levels, beta)
        .iter()
        .zip(levels)
        .map(|(p, e)| p * e)
        .sum()
}

/// Von Neumann entropy of the Gibbs state, `beta <x> + ln Z` with `x = E - E_0`.
pub fn thermal_entropy(levels: &[f64], beta: f64) -> f64 {
    let Some(&e0) = levels.first() else {
        return 0.0;
    };
    if beta == 0.0 {
        return (levels.len() as f64).ln();
    }
    if beta.is_infinite() {
        return (ground_degeneracy(levels) as f64).ln();
    }
    let mut z = 0.0;
    let mut xw = 0.0;
    for &e in levels {
        let x = e - e0;
        let w = (-beta * x).exp();
        z += w;
        xw += x * w;
    }
    let s = beta * xw / z + z.ln();
    if s.is_finite() {
        s
    } else {
        spectral_entropy(&thermal_populations(levels, beta))
    }
}

fn ground_degeneracy(levels: &[f64]) -> usize {
    let Some(&e0) = levels.first() else {
        return 0;
    };
    let scale = levels.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    levels
        .iter()
        .take_while(|&&e| e - e0 <= 1e-10 * scale)
        .count()
}

/// `e^{-beta H} / Z`; `beta = +inf` gives the normalized ground-space projector.
pub fn thermal_state(h: &HamiltonianOp, beta: f64) -> Result<DensityMatrix> {
    if beta.is_nan() || beta < 0.0 {
        return Err(Error::Domain(format!(
            "inverse temperature must lie in [0, +inf], got {beta}"
        )));
    }
    let spec = h.spectrum();
    let pops = thermal_populations(&spec.eigenvalues, beta);
    let v = &spec.eigenvectors;
    let mut scaled = v.clone();
    for (j, &p) in pops.iter().enumerate() {
        for z in scaled.column_mut(j).iter_mut() {
            *z *= p;
        }
    }
    let mut m = scaled * v.adjoint();
    crate::state::hermitize(&mut m);
    Ok(DensityMatrix::from_trusted(m))
}

/// Nonnegative `beta` with `S(rho_beta) = target`, by bisection.
pub fn solve_beta_for_entropy(h: &HamiltonianOp, target: f64) -> Result<BetaSolution> {
    solve_beta_for_levels(h.levels(), target)
}

/// As [`solve_beta_for_entropy`] on an explicit ascending spectrum.
pub fn solve_beta_for_levels(levels: &[f64], target: f64) -> Result<BetaSolution> {
    let d = levels.len();
    if d == 0 {
        return Err(Error::Domain("empty spectrum".into()));
    }
    let ln_d = (d as f64).ln();
    if !target.is_finite() || target < -1e-12 || target > ln_d + 1e-12 {
        return Err(Error::Domain(format!(
            "target entropy {target} outside [0, ln {d}]"
        )));
    }
    let g0 = ground_degeneracy(levels);
    let ln_g0 = (g0 as f64).ln();
    let solution = |beta: f64, achieved: f64, iterations: u32, clamped: bool| BetaSolution {
        beta,
        achieved_entropy: achieved,
        target_entropy: target,
        iterations,
        clamped,
    };

    if target >= ln_d - 1e-12 && g0 < d {
        return Ok(solution(0.0, ln_d, 0, false));
    }
    if target <= ln_g0 + 1e-12 || g0 == d {
        return Ok(solution(f64::INFINITY, ln_g0, 0, true));
    }

    let entropy = |b: f64| thermal_entropy(levels, b);
    let mut iterations = 0u32;
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    while entropy(hi) > target {
        lo = hi;
        hi *= 2.0;
        iterations += 1;
        if iterations >= BETA_MAX_ITER || !hi.is_finite() {
            return Ok(solution(f64::INFINITY, ln_g0, iterations, true));
        }
    }
    let mut best = (hi, entropy(hi));
    while iterations < BETA_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let s = entropy(mid);
        iterations += 1;
        if (s - target).abs() < (best.1 - target).abs() {
            best = (mid, s);
        }
        if (s - target).abs() <= 1e-13 {
            break;
        }
        if s > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(solution(best.0, best.1, iterations, false))
}

/// Thermal energy at the entropy-matched temperature.
pub fn asymptotic_min_energy(h: &HamiltonianOp, target_entropy: f64) -> Result<f64> {
    let sol = solve_beta_for_entropy(h, target_entropy)?;
    Ok(thermal_energy(h.levels(), sol.beta))
}

/// `tr[H(rho - rho_beta)]` with `S(rho_beta) = S(rho)`.
pub fn asymptotic_ergotropy(rho: &DensityMatrix, h: &HamiltonianOp) -> Result<f64> {
    let e = mean_energy(rho, h)?;
    Ok(e - asymptotic_min_energy(h, von_neumann_entropy(rho))?)
}

/// Energy of the passive state of `P_i / V_i`: the mean of the lowest `V_i` levels.
pub fn flat_passive_energy(volume: usize, levels: &[f64]) -> f64 {
    levels.iter().take(volume).sum::<f64>() / volume as f64
}

/// `sum_i p_i tr(H pi_i)` with `pi_i` passive for `P_i / V_i`.
pub fn boltzmann_passive_energy(stats: &MeasurementStats, levels: &[f64]) -> f64 {
    stats
        .probs()
        .iter()
        .zip(stats.volumes())
        .map(|(&p, &v)| p * flat_passive_energy(v, levels))
        .sum()
}

/// `tr(H pi_cg)` with `pi_cg` passive for the coarse-grained state.
pub fn observational_passive_energy(stats: &MeasurementStats, levels: &[f64]) -> f64 {
    passive_energy(&stats.coarse_grained_spectrum(), levels)
}

/// Boltzmann ergotropy for each outcome: `tr(H rho) - tr(H pi_i)`.
pub fn boltzmann_ergotropy_by_outcome(
    rho: &DensityMatrix,
    h: &HamiltonianOp,
    cg: &CoarseGraining,
) -> Result<Vec<f64>> {
    check_dim(cg.dim(), h.dim())?;
    let e = mean_energy(rho, h)?;
    Ok(cg
        .volumes()
        .iter()
        .map(|&v| e - flat_passive_energy(v, h.levels()))
        .collect())
}

/// `tr[H(rho - sum_i p_i pi_i)]`.
pub fn boltzmann_ergotropy(
    rho: &DensityMatrix,
    h: &HamiltonianOp,
    cg: &CoarseGraining,
) -> Result<f64> {
    check_dim(cg.dim(), h.dim())?;
    let stats = measure_probs(rho, cg)?;
    Ok(mean_energy(rho, h)? - boltzmann_passive_energy(&stats, h.levels()))
}

/// `tr[H(rho - rho_beta)]` with `S(rho_beta)` equal to the mean Boltzmann entropy.
pub fn boltzmann_ergotropy_asymptotic(
    rho: &DensityMatrix,
    h: &HamiltonianOp,
    cg: &CoarseGraining,
) -> Result<f64> {
    check_dim(cg.dim(), h.dim())?;
    let stats = measure_probs(rho, cg)?;
    Ok(mean_energy(rho, h)? - asymptotic_min_energy(h, boltzmann_entropy(&stats))?)
}

/// `tr[H(rho - pi_cg)]`.
pub fn observational_ergotropy(
    rho: &DensityMatrix,
    h: &HamiltonianOp,
    cg: &CoarseGraining,
) -> Result<f64> {
    check_dim(cg.dim(), h.dim())?;
    let stats = measure_probs(rho, cg)?;
    Ok(mean_energy(rho, h)? - observational_passive_energy(&stats, h.levels()))
}

/// `tr[H(rho - rho_beta')]` with `S(rho_beta')` equal to the observational entropy.
pub fn observational_ergotropy_asymptotic(
    rho: &DensityMatrix,
    h: &HamiltonianOp,
    cg: &CoarseGraining,
) -> Result<f64> {
    check_dim(cg.dim(), h.dim())?;
    let stats = measure_probs(rho, cg)?;
    Ok(mean_energy(rho, h)? - asymptotic_min_energy(h, observational_entropy(&stats))?)
}

/// Value-multiplicity pairs.
type Multiset = Vec<(f64, f64)>;

fn compositions(n: usize, parts: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(rest: usize, slot: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if slot + 1 == cur.len() {
            cur[slot] = rest;
            f(cur);
            return;
        }
        for k in 0..=rest {
            cur[slot] = k;
            rec(rest - k, slot + 1, cur, f);
        }
    }
    let mut cur = vec![0; parts];
    rec(n, 0, &mut cur, f);
}

fn multinomial(n: usize, counts: &[usize]) -> f64 {
    let mut acc = 1.0f64;
    let mut remaining = n;
    for &m in counts {
        // binomial(remaining, m), built so intermediate values stay integral
        let mut b = 1.0f64;
        for j in 0..m {
            b = b * (remaining - j) as f64 / (j + 1) as f64;
        }
        acc *= b;
        remaining -= m;
    }
    acc
}

fn binomial_u128(n: usize, k: usize) -> u128 {
    let k = k.min(n - k.min(n));
    let mut acc: u128 = 1;
    for j in 0..k {
        acc = acc.saturating_mul((n - j) as u128) / (j + 1) as u128;
    }
    acc
}

/// Distinct products over `n` copies of a spectrum, with multiplicities.
fn power_products(values: &[f64], n: usize) -> Multiset {
    let mut out = Vec::new();
    compositions(n, values.len(), &mut |m| {
        let v: f64 = values
            .iter()
            .zip(m)
            .map(|(x, &k)| x.powi(k as i32))
            .product();
        out.push((v, multinomial(n, m)));
    });
    out
}

/// Distinct sums over `n` copies of a spectrum, with multiplicities.
fn power_sums(values: &[f64], n: usize) -> Multiset {
    let mut out = Vec::new();
    compositions(n, values.len(), &mut |m| {
        let v: f64 = values.iter().zip(m).map(|(x, &k)| x * k as f64).sum();
        out.push((v, multinomial(n, m)));
    });
    out
}

/// Exact `min_U tr[H_N U (rho_1^{n_1} ⊗ rho_2^{n_2} ⊗ ...) U^dagger] / N`.
///
/// The minimizer pairs the product state's eigenvalues (descending) with the
/// levels of `H_N = sum_k h_k` (ascending). Both multisets are enumerated in
/// compressed form, one entry per occupation-number pattern, so no `d^N`
/// object is built.
pub fn finite_n_min_energy(parts: &[(DensityMatrix, usize)], h: &HamiltonianOp) -> Result<f64> {
    finite_n_min_energy_capped(parts, h, DEFAULT_MULTISET_CAP)
}

pub fn finite_n_min_energy_capped(
    parts: &[(DensityMatrix, usize)],
    h: &HamiltonianOp,
    cap: usize,
) -> Result<f64> {
    let d = h.dim();
    let total: usize = parts.iter().map(|p| p.1).sum();
    if total == 0 {
        return Err(Error::Domain("need at least one copy".into()));
    }
    for (rho, _) in parts {
        check_dim(d, rho.dim())?;
    }
    let pattern_count = |n: usize| binomial_u128(n + d - 1, d - 1);
    let state_size = parts
        .iter()
        .filter(|p| p.1 > 0)
        .fold(1u128, |acc, p| acc.saturating_mul(pattern_count(p.1)));
    let energy_size = pattern_count(total);
    let size = state_size.max(energy_size);
    if size > cap as u128 {
        return Err(Error::CapExceeded {
            size,
            cap: cap as u128,
            hint: "reduce the copy counts",
        });
    }

    let mut state: Multiset = vec![(1.0, 1.0)];
    for (rho, n) in parts.iter().filter(|p| p.1 > 0) {
        let eig: Vec<f64> = rho.eigenvalues().into_iter().map(|x| x.max(0.0)).collect();
        let block = power_products(&eig, *n);
        let mut next = Vec::with_capacity(state.len() * block.len());
        for &(a, ca) in &state {
            for &(b, cb) in &block {
                next.push((a * b, ca * cb));
            }
        }
        state = next;
    }
    state.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal));

    let mut energies = power_sums(h.levels(), total);
    energies.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));

    Ok(paired_dot(&state, &energies) / total as f64)
}

/// `sum_k x_k y_k` over two sorted multisets expanded to equal length.
fn paired_dot(xs: &Multiset, ys: &Multiset) -> f64 {
    let mut acc = 0.0;
    let (mut i, mut j) = (0, 0);
    let (mut rx, mut ry) = (
        xs.first().map_or(0.0, |x| x.1),
        ys.first().map_or(0.0, |y| y.1),
    );
    while i < xs.len() && j < ys.len() {
        let take = rx.min(ry);
        acc += take * xs[i].0 * ys[j].0;
        rx -= take;
        ry -= take;
        if rx <= 0.0 {
            i += 1;
            rx = xs.get(i).map_or(0.0, |x| x.1);
        }
        if ry <= 0.0 {
            j += 1;
            ry = ys.get(j).map_or(0.0, |y| y.1);
        }
    }
    acc
}

/// All ergotropies and entropies of one `(rho, H, C)` triple.
#[derive(Clone, Debug, PartialEq)]
pub struct ErgotropyReport {
    pub mean_energy: f64,
    pub w: f64,
    pub w_inf: f64,
    pub w_b: f64,
    pub w_b_inf: f64,
    pub w_obs: f64,
    pub w_obs_inf: f64,
    pub s_sh: f64,
    pub s_b: f64,
    pub s_c: f64,
    pub s_vn: f64,
    pub beta_vn: BetaSolution,
    pub beta_b: BetaSolution,
    pub beta_obs: BetaSolution,
    pub probs: Vec<f64>,
    pub volumes: Vec<usize>,
}

pub fn ergotropy_report(
    rho: &DensityMatrix,
    h: &HamiltonianOp,
    cg: &CoarseGraining,
) -> Result<ErgotropyReport> {
    check_dim(h.dim(), rho.dim())?;
    check_dim(cg.dim(), h.dim())?;
    let levels = h.levels();
    let energy = mean_energy(rho, h)?;
    let stats = measure_probs(rho, cg)?;
    let s_vn = von_neumann_entropy(rho);
    let s_sh = shannon_entropy(&stats);
    let s_b = boltzmann_entropy(&stats);
    let s_c = s_sh + s_b;
    let beta_vn = solve_beta_for_levels(levels, s_vn.min((levels.len() as f64).ln()))?;
    let beta_b = solve_beta_for_levels(levels, s_b)?;
    let beta_obs = solve_beta_for_levels(levels, s_c.min((levels.len() as f64).ln()))?;
    Ok(ErgotropyReport {
        mean_energy: energy,
        w: energy - passive_energy(&rho.eigenvalues(), levels),
        w_inf: energy - thermal_energy(levels, beta_vn.beta),
        w_b: energy - boltzmann_passive_energy(&stats, levels),
        w_b_inf: energy - thermal_energy(levels, beta_b.beta),
        w_obs: energy - observational_passive_energy(&stats, levels),
        w_obs_inf: energy - thermal_energy(levels, beta_obs.beta),
        s_sh,
        s_b,
        s_c,
        s_vn,
        beta_vn,
        beta_b,
        beta_obs,
        probs: stats.probs().to_vec(),
        volumes: stats.volumes().to_vec(),
    })
}

#[derive(Serialize)]
#[allow(non_snake_case)]
struct FlatReport<'a> {
    mean_energy: f64,
    W: f64,
    W_inf: f64,
    W_B: f64,
    W_B_inf: f64,
    W_obs: f64,
    W_obs_inf: f64,
    S_Sh: f64,
    S_B: f64,
    S_C: f64,
    S_vN: f64,
    beta_vN: Option<f64>,
    beta_vN_clamped: bool,
    beta_vN_residual: f64,
    beta_vN_iterations: u32,
    beta_B: Option<f64>,
    beta_B_clamped: bool,
    beta_B_residual: f64,
    beta_B_iterations: u32,
    beta_obs: Option<f64>,
    beta_obs_clamped: bool,
    beta_obs_residual: f64,
    beta_obs_iterations: u32,
    probs: &'a [f64],
    volumes: &'a [usize],
}

impl Serialize for ErgotropyReport {
    /// Flat object; an infinite inverse temperature is written as `null`.
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let finite = |b: &BetaSolution| (!b.is_infinite()).then_some(b.beta);
        FlatReport {
            mean_energy: self.mean_energy,
            W: self.w,
            W_inf: self.w_inf,
            W_B: self.w_b,
            W_B_inf: self.w_b_inf,
            W_obs: self.w_obs,
            W_obs_inf: self.w_obs_inf,
            S_Sh: self.s_sh,
            S_B: self.s_b,
            S_C: self.s_c,
            S_vN: self.s_vn,
            beta_vN: finite(&self.beta_vn),
            beta_vN_clamped: self.beta_vn.clamped,
            beta_vN_residual: self.beta_vn.residual(),
            beta_vN_iterations: self.beta_vn.iterations,
            beta_B: finite(&self.beta_b),
            beta_B_clamped: self.beta_b.clamped,
            beta_B_residual: self.beta_b.residual(),
            beta_B_iterations: self.beta_b.iterations,
            beta_obs: finite(&self.beta_obs),
            beta_obs_clamped: self.beta_obs.clamped,
            beta_obs_residual: self.beta_obs.residual(),
            beta_obs_iterations: self.beta_obs.iterations,
            probs: &self.probs,
            volumes: &self.volumes,
        }
        .serialize(serializer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coarse::coarse_grained_state;
    use crate::linalg::c64;
    use crate::linalg::{haar_unitary, random_hermitian, real_diag, SeededRng};
    use crate::state::{tensor_power, PureState};

    fn h3() -> HamiltonianOp {
        HamiltonianOp::diagonal(&[0.0, 1.0, 2.0]).unwrap()
    }

    fn two_outcome() -> CoarseGraining {
        CoarseGraining::computational(&[vec![0], vec![1, 2]]).unwrap()
    }

    fn rho_d() -> DensityMatrix {
        DensityMatrix::diagonal(&[0.125, 0.875, 0.0]).unwrap()
    }

    fn plus12() -> DensityMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        PureState::new(crate::linalg::CVector::from_vec(vec![
            c64(0.0, 0.0),
            c64(s, 0.0),
            c64(s, 0.0),
        ]))
        .unwrap()
        .density()
    }

    fn max_abs(m: &CMatrix) -> f64 {
        m.iter().fold(0.0f64, |a, z| a.max(z.norm()))
    }

    /// Every assignment of eigenvalues to levels; returns the smallest energy.
    fn brute_force_min(pops: &[f64], levels: &[f64]) -> f64 {
        fn permute(k: usize, perm: &mut Vec<usize>, pops: &[f64], levels: &[f64], best: &mut f64) {
            if k == perm.len() {
                let e: f64 = perm
                    .iter()
                    .enumerate()
                    .map(|(i, &j)| pops[j] * levels[i])
                    .sum();
                *best = best.min(e);
                return;
            }
            for i in k..perm.len() {
                perm.swap(k, i);
                permute(k + 1, perm, pops, levels, best);
                perm.swap(k, i);
            }
        }
        let mut perm: Vec<usize> = (0..pops.len()).collect();
        let mut best = f64::INFINITY;
        permute(0, &mut perm, pops, levels, &mut best);
        best
    }

    #[test]
    fn passive_state_examples() {
        let h = h3();
        let sigma = DensityMatrix::diagonal(&[0.0, 0.5, 0.5]).unwrap();
        let pi = passive_state(&sigma, &h).unwrap();
        assert!(max_abs(&(pi.matrix() - real_diag(&[0.5, 0.5, 0.0]))) < 1e-15);

        let thermal = thermal_state(&h, 0.8).unwrap();
        let again = passive_state(&thermal, &h).unwrap();
        assert!(max_abs(&(again.matrix() - thermal.matrix())) < 1e-12);

        let mut rng = SeededRng::new(31, 0);
        let hr = HamiltonianOp::new(random_hermitian(4, &mut rng)).unwrap();
        let sigma = DensityMatrix::random(4, &mut rng);
        let pi = passive_state(&sigma, &hr).unwrap();
        let brute = brute_force_min(&sigma.eigenvalues(), hr.levels());
        assert!((mean_energy(&pi, &hr).unwrap() - brute).abs() < 1e-12);
    }

    #[test]
    fn ergotropy_examples() {
        let h = h3();
        let passive = DensityMatrix::diagonal(&[0.6, 0.3, 0.1]).unwrap();
        assert!(ergotropy(&passive, &h).unwrap().abs() < 1e-15);
        let top = PureState::basis(3, 2).unwrap().density();
        assert!((ergotropy(&top, &h).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn ergotropy_lower_bounds_sampled_unitaries() {
        let mut rng = SeededRng::new(77, 0);
        let h = HamiltonianOp::new(random_hermitian(3, &mut rng)).unwrap();
        let rho = DensityMatrix::random(3, &mut rng);
        let floor = passive_energy(&rho.eigenvalues(), h.levels());
        let mut best = f64::INFINITY;
        for _ in 0..100_000 {
            let u = haar_unitary(3, &mut rng).unwrap();
            best = best.min(mean_energy(&rho.conjugate(&u).unwrap(), &h).unwrap());
        }
        assert!(best >= floor - 1e-9);
        // The sampled minimum should also get close to the floor.
        assert!(best - floor < 0.05);
    }

    #[test]
    fn thermal_state_examples() {
        let h = h3();
        let inf = thermal_state(&h, 0.0).unwrap();
        assert!(max_abs(&(inf.matrix() - DensityMatrix::maximally_mixed(3).matrix())) < 1e-15);
        let cold = thermal_state(&h, f64::INFINITY).unwrap();
        assert!(max_abs(&(cold.matrix() - real_diag(&[1.0, 0.0, 0.0]))) < 1e-15);
        let qubit = HamiltonianOp::diagonal(&[0.0, 1.0]).unwrap();
        let t = thermal_state(&qubit, 3f64.ln()).unwrap();
        assert!(max_abs(&(t.matrix() - real_diag(&[0.75, 0.25]))) < 1e-15);
        assert!(thermal_state(&h, -1.0).is_err());
    }

    /// Scalar bisection on the binary entropy for the excited population.
    fn binary_entropy_inverse(s: f64) -> f64 {
        let h = |p: f64| -p * p.ln() - (1.0 - p) * (1.0 - p).ln();
        let (mut lo, mut hi) = (1e-300, 0.5);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if h(mid) < s {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn beta_solver_examples() {
        let h = h3();
        let sol = solve_beta_for_entropy(&h, 3f64.ln()).unwrap();
        assert_eq!(sol.beta, 0.0);
        let sol = solve_beta_for_entropy(&h, 0.0).unwrap();
        assert!(sol.is_infinite() && sol.clamped);
        assert_eq!(thermal_energy(h.levels(), sol.beta), 0.0);

        let qubit = HamiltonianOp::diagonal(&[0.0, 1.0]).unwrap();
        let sol = solve_beta_for_entropy(&qubit, 0.5).unwrap();
        let p = binary_entropy_inverse(0.5);
        let expect = ((1.0 - p) / p).ln();
        assert!(
            (sol.beta - expect).abs() < 1e-8,
            "{} vs {}",
            sol.beta,
            expect
        );
        assert!(sol.residual() <= BETA_ENTROPY_TOL);

        assert!(solve_beta_for_entropy(&h, 2.0).is_err());
        assert!(solve_beta_for_entropy(&h, -0.1).is_err());
    }

    #[test]
    fn beta_solver_clamps_below_ground_degeneracy() {
        let h = HamiltonianOp::diagonal(&[0.0, 0.0, 1.0, 3.0]).unwrap();
        let sol = solve_beta_for_entropy(&h, 0.3).unwrap();
        assert!(sol.is_infinite() && sol.clamped);
        assert!((sol.achieved_entropy - 2f64.ln()).abs() < 1e-15);
        let sol = solve_beta_for_entropy(&h, 0.9).unwrap();
        assert!(!sol.is_infinite() && sol.residual() <= BETA_ENTROPY_TOL);
    }

    #[test]
    fn beta_solver_residual_on_random_spectra() {
        let mut rng = SeededRng::new(55, 0);
        for _ in 0..200 {
            let d = 2 + (rng.uniform() * 30.0) as usize;
            let h = HamiltonianOp::new(random_hermitian(d, &mut rng) * c64(5.0, 0.0)).unwrap();
            let target = rng.uniform() * (d as f64).ln();
            let sol = solve_beta_for_entropy(&h, target).unwrap();
            assert_eq!(sol.clamped, sol.is_infinite());
            if !sol.is_infinite() {
                assert!(sol.residual() <= BETA_ENTROPY_TOL, "{sol:?}");
                let direct =
                    crate::state::von_neumann_entropy(&thermal_state(&h, sol.beta).unwrap());
                assert!((direct - target).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn asymptotic_ergotropy_examples() {
        let h = h3();
        let psi = plus12();
        assert!((asymptotic_ergotropy(&psi, &h).unwrap() - 1.5).abs() < 1e-12);
        let thermal = thermal_state(&h, 0.7).unwrap();
        assert!(asymptotic_ergotropy(&thermal, &h).unwrap().abs() < 1e-9);
        let mut rng = SeededRng::new(3, 3);
        for _ in 0..20 {
            let rho = DensityMatrix::random(3, &mut rng);
            assert!(
                asymptotic_ergotropy(&rho, &h).unwrap() >= ergotropy(&rho, &h).unwrap() - 1e-10
            );
        }
    }

    #[test]
    fn boltzmann_ergotropy_three_level_values() {
        let h = h3();
        let cg = two_outcome();
        let rho_a = PureState::basis(3, 1).unwrap().density();
        let rho_b = PureState::basis(3, 2).unwrap().density();
        assert!((boltzmann_ergotropy(&rho_a, &h, &cg).unwrap() - 0.5).abs() < 1e-12);
        assert!((boltzmann_ergotropy(&rho_b, &h, &cg).unwrap() - 1.5).abs() < 1e-12);
        assert!((boltzmann_ergotropy(&plus12(), &h, &cg).unwrap() - 1.0).abs() < 1e-12);
        assert!((boltzmann_ergotropy(&rho_d(), &h, &cg).unwrap() - 0.4375).abs() < 1e-12);
        let by_outcome = boltzmann_ergotropy_by_outcome(&rho_d(), &h, &cg).unwrap();
        assert!((by_outcome[0] - 0.875).abs() < 1e-12);
        assert!((by_outcome[1] - 0.375).abs() < 1e-12);
    }

    #[test]
    fn observational_ergotropy_three_level_values() {
        let h = h3();
        let cg = two_outcome();
        assert!((observational_ergotropy(&rho_d(), &h, &cg).unwrap() - 0.1875).abs() < 1e-12);
        let rho_a = PureState::basis(3, 1).unwrap().density();
        let rho_b = PureState::basis(3, 2).unwrap().density();
        assert!((observational_ergotropy(&rho_a, &h, &cg).unwrap() - 0.5).abs() < 1e-12);
        assert!((observational_ergotropy(&rho_b, &h, &cg).unwrap() - 1.5).abs() < 1e-12);
        assert!((observational_ergotropy(&plus12(), &h, &cg).unwrap() - 1.0).abs() < 1e-12);

        let diag = DensityMatrix::diagonal(&[0.2, 0.3, 0.5]).unwrap();
        let fine = CoarseGraining::computational(&[vec![0], vec![1], vec![2]]).unwrap();
        let w = ergotropy(&diag, &h).unwrap();
        assert!((observational_ergotropy(&diag, &h, &fine).unwrap() - w).abs() < 1e-12);
    }

    #[test]
    fn boltzmann_asymptotic_examples() {
        let mut rng = SeededRng::new(12, 0);
        let h = HamiltonianOp::new(random_hermitian(4, &mut rng)).unwrap();
        let fine = crate::coarse::energy_coarse_graining(&h, 1e-6, None).unwrap();
        assert_eq!(fine.volumes(), vec![1, 1, 1, 1]);
        let rho = DensityMatrix::random(4, &mut rng);
        let e = mean_energy(&rho, &h).unwrap();
        let w = boltzmann_ergotropy_asymptotic(&rho, &h, &fine).unwrap();
        assert!((w - (e - h.ground_energy())).abs() < 1e-12);

        let trivial = CoarseGraining::trivial(4);
        let flat = DensityMatrix::maximally_mixed(4);
        let w = boltzmann_ergotropy_asymptotic(&rho, &h, &trivial).unwrap();
        let expect = e - mean_energy(&flat, &h).unwrap();
        assert!((w - expect).abs() < 1e-12);

        let cg = two_outcome();
        let h = h3();
        for _ in 0..20 {
            let rho = DensityMatrix::random(3, &mut rng);
            let wb = boltzmann_ergotropy(&rho, &h, &cg).unwrap();
            assert!(boltzmann_ergotropy_asymptotic(&rho, &h, &cg).unwrap() >= wb - 1e-9);
            let wo_inf = observational_ergotropy_asymptotic(&rho, &h, &cg).unwrap();
            assert!(wo_inf <= boltzmann_ergotropy_asymptotic(&rho, &h, &cg).unwrap() + 1e-9);
        }
    }

    #[test]
    fn observational_asymptotic_of_thermal_state_vanishes() {
        let mut rng = SeededRng::new(13, 0);
        let h = HamiltonianOp::new(random_hermitian(5, &mut rng)).unwrap();
        let rho = thermal_state(&h, 0.9).unwrap();
        let fine = crate::coarse::energy_coarse_graining(&h, 1e-6, None).unwrap();
        assert!(
            observational_ergotropy_asymptotic(&rho, &h, &fine)
                .unwrap()
                .abs()
                < 1e-9
        );
    }

    #[test]
    fn observational_asymptotic_shares_beta_with_coarse_grained_state() {
        let mut rng = SeededRng::new(14, 0);
        let h = HamiltonianOp::new(random_hermitian(6, &mut rng)).unwrap();
        let cg = CoarseGraining::random(6, 3, &mut rng).unwrap();
        let rho = DensityMatrix::random(6, &mut rng);
        let stats = measure_probs(&rho, &cg).unwrap();
        let rho_cg = coarse_grained_state(&stats, &cg).unwrap();
        let lhs = observational_ergotropy_asymptotic(&rho, &h, &cg).unwrap();
        let rhs = observational_ergotropy_asymptotic(&rho_cg, &h, &cg).unwrap()
            + mean_energy(&rho, &h).unwrap()
            - mean_energy(&rho_cg, &h).unwrap();
        assert!((lhs - rhs).abs() < 1e-9);
    }

    #[test]
    fn finite_n_single_copy_is_passive_energy() {
        let mut rng = SeededRng::new(21, 0);
        let h = HamiltonianOp::new(random_hermitian(4, &mut rng)).unwrap();
        let rho = DensityMatrix::random(4, &mut rng);
        let e = finite_n_min_energy(&[(rho.clone(), 1)], &h).unwrap();
        let pi = passive_state(&rho, &h).unwrap();
        assert!((e - mean_energy(&pi, &h).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn finite_n_thermal_is_completely_passive() {
        let h = h3();
        let rho = thermal_state(&h, 1.3).unwrap();
        let e = mean_energy(&rho, &h).unwrap();
        for n in 1..=6 {
            let got = finite_n_min_energy(&[(rho.clone(), n)], &h).unwrap();
            assert!((got - e).abs() < 1e-12, "N={n}: {got} vs {e}");
        }
    }

    #[test]
    fn finite_n_matches_dense_product() {
        // Dense route: build the 9x9 product and its two-copy Hamiltonian.
        let h = h3();
        let id = CMatrix::identity(3, 3);
        let h2 = HamiltonianOp::new(
            crate::linalg::kron(h.matrix(), &id) + crate::linalg::kron(&id, h.matrix()),
        )
        .unwrap();
        let rho_c = plus12();
        let dense = tensor_power(&rho_c, 2).unwrap();
        let expect = mean_energy(&passive_state(&dense, &h2).unwrap(), &h2).unwrap() / 2.0;
        let got = finite_n_min_energy(&[(rho_c, 2)], &h).unwrap();
        assert!((got - expect).abs() < 1e-12);

        let mut rng = SeededRng::new(22, 0);
        let a = DensityMatrix::random(3, &mut rng);
        let b = DensityMatrix::random(3, &mut rng);
        let hr = HamiltonianOp::new(random_hermitian(3, &mut rng)).unwrap();
        let h2 = HamiltonianOp::new(
            crate::linalg::kron(hr.matrix(), &id) + crate::linalg::kron(&id, hr.matrix()),
        )
        .unwrap();
        let prod = DensityMatrix::new(crate::linalg::kron(a.matrix(), b.matrix())).unwrap();
        let expect = passive_energy(&prod.eigenvalues(), h2.levels()) / 2.0;
        let got = finite_n_min_energy(&[(a, 1), (b, 1)], &hr).unwrap();
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn finite_n_ignores_part_order() {
        let mut rng = SeededRng::new(5, 0);
        let h = HamiltonianOp::new(random_hermitian(3, &mut rng)).unwrap();
        let a = DensityMatrix::random(3, &mut rng);
        let b = DensityMatrix::random(3, &mut rng);
        let ab = finite_n_min_energy(&[(a.clone(), 2), (b.clone(), 3)], &h).unwrap();
        let ba = finite_n_min_energy(&[(b, 3), (a, 2)], &h).unwrap();
        assert!((ab - ba).abs() < 1e-12);
    }

    #[test]
    fn finite_n_cap() {
        let h = h3();
        let rho = rho_d();
        assert!(matches!(
            finite_n_min_energy_capped(&[(rho, 40)], &h, 100),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn asymptotic_min_energy_examples() {
        let h = h3();
        assert_eq!(asymptotic_min_energy(&h, 0.0).unwrap(), 0.0);
        assert!((asymptotic_min_energy(&h, 3f64.ln()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn report_serializes_flat() {
        let r = ergotropy_report(&rho_d(), &h3(), &two_outcome()).unwrap();
        assert!((r.w_b - 0.4375).abs() < 1e-12);
        assert!((r.w_obs - 0.1875).abs() < 1e-12);
        let v = serde_json::to_value(&r).unwrap();
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
            "beta_B",
            "beta_obs",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        let pure = PureState::basis(3, 2).unwrap().density();
        let r = ergotropy_report(&pure, &h3(), &two_outcome()).unwrap();
        assert!(serde_json::to_value(&r).unwrap()["beta_vN"].is_null());
    }
}
