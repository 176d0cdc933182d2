use ergoscope::coarse::{
    boltzmann_entropy, coarse_grained_state, measure_probs, observational_entropy, CoarseGraining,
};
use ergoscope::ergotropy::{
    asymptotic_ergotropy, boltzmann_ergotropy, boltzmann_ergotropy_asymptotic, ergotropy,
    finite_n_min_energy, observational_ergotropy, observational_ergotropy_asymptotic,
    passive_state, solve_beta_for_entropy, thermal_entropy, thermal_state,
};
use ergoscope::linalg::{
    eigh, haar_unitary, kron, random_hermitian, trace_product, unitarity_residual, SeededRng,
};
use ergoscope::protocol::block_haar_unitary;
use ergoscope::state::{
    evolve, pure_mean_energy, von_neumann_entropy, DensityMatrix, HamiltonianOp, PureState,
};
use proptest::prelude::*;

fn random_h(d: usize, rng: &mut SeededRng) -> HamiltonianOp {
    HamiltonianOp::new(random_hermitian(d, rng)).unwrap()
}

fn random_fixture(
    d: usize,
    outcomes: usize,
    seed: u64,
) -> (DensityMatrix, HamiltonianOp, CoarseGraining) {
    let mut rng = SeededRng::new(seed, 0);
    let rho = DensityMatrix::random(d, &mut rng);
    let h = random_h(d, &mut rng);
    let cg = CoarseGraining::random(d, outcomes.min(d), &mut rng).unwrap();
    (rho, h, cg)
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eigh_reconstructs(d in 1usize..=16, seed in any::<u64>()) {
        let a = random_hermitian(d, &mut SeededRng::new(seed, 0));
        let s = eigh(&a).unwrap();
        prop_assert!(s.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        let scale = a.norm().max(1.0);
        prop_assert!((s.reconstruct() - &a).norm() <= 1e-10 * scale);
        prop_assert!(unitarity_residual(&s.eigenvectors) <= 1e-10);
    }

    #[test]
    fn haar_draws_are_unitary_and_seeded(d in 1usize..=12, seed in any::<u64>()) {
        let u = haar_unitary(d, &mut SeededRng::new(seed, 3)).unwrap();
        let v = haar_unitary(d, &mut SeededRng::new(seed, 3)).unwrap();
        prop_assert!(unitarity_residual(&u) <= 1e-10);
        prop_assert_eq!(u, v);
    }

    #[test]
    fn block_haar_is_unitary(d in 2usize..=10, k in 1usize..=4, seed in any::<u64>()) {
        let mut rng = SeededRng::new(seed, 0);
        let cg = CoarseGraining::random(d, k.min(d), &mut rng).unwrap();
        prop_assert!(unitarity_residual(&block_haar_unitary(&cg, &mut rng)) <= 1e-10);
    }

    #[test]
    fn von_neumann_bounds_and_invariance(d in 1usize..=16, seed in any::<u64>()) {
        let mut rng = SeededRng::new(seed, 0);
        let rho = DensityMatrix::random(d, &mut rng);
        let s = von_neumann_entropy(&rho);
        prop_assert!(s >= -1e-12 && s <= (d as f64).ln() + 1e-10);
        let u = haar_unitary(d, &mut rng).unwrap();
        prop_assert!((von_neumann_entropy(&rho.conjugate(&u).unwrap()) - s).abs() <= 1e-10);
    }

    #[test]
    fn von_neumann_is_additive(d1 in 1usize..=4, d2 in 1usize..=4, seed in any::<u64>()) {
        let mut rng = SeededRng::new(seed, 0);
        let a = DensityMatrix::random(d1, &mut rng);
        let b = DensityMatrix::random(d2, &mut rng);
        let ab = DensityMatrix::new(kron(a.matrix(), b.matrix())).unwrap();
        let sum = von_neumann_entropy(&a) + von_neumann_entropy(&b);
        prop_assert!((von_neumann_entropy(&ab) - sum).abs() <= 1e-9);
    }

    #[test]
    fn evolution_conserves_norm_and_energy(d in 1usize..=10, t in 0.0f64..50.0, seed in any::<u64>()) {
        let mut rng = SeededRng::new(seed, 0);
        let h = random_h(d, &mut rng);
        let psi = PureState::random(d, &mut rng);
        let later = evolve(&psi, &h, t).unwrap();
        prop_assert!((later.amplitudes().norm() - 1.0).abs() <= 1e-9);
        let e0 = pure_mean_energy(&psi, &h).unwrap();
        prop_assert!((pure_mean_energy(&later, &h).unwrap() - e0).abs() <= 1e-9);
    }

    #[test]
    fn coarse_grained_entropy_identity(d in 1usize..=16, k in 1usize..=6, seed in any::<u64>()) {
        let (rho, _, cg) = random_fixture(d, k, seed);
        let stats = measure_probs(&rho, &cg).unwrap();
        let rho_cg = coarse_grained_state(&stats, &cg).unwrap();
        let s_obs = observational_entropy(&stats);
        prop_assert!((von_neumann_entropy(&rho_cg) - s_obs).abs() <= 1e-10);
        let s_b = boltzmann_entropy(&stats);
        prop_assert!(s_obs >= s_b - 1e-12 && s_b >= 0.0);
        prop_assert!(s_obs <= (d as f64).ln() + 1e-10);
        let again = measure_probs(&rho_cg, &cg).unwrap();
        for (p, q) in again.probs().iter().zip(stats.probs()) {
            prop_assert!((p - q).abs() <= 1e-10);
        }
    }

    #[test]
    fn passive_state_keeps_spectrum(d in 1usize..=12, seed in any::<u64>()) {
        let (rho, h, _) = random_fixture(d, 1, seed);
        let pi = passive_state(&rho, &h).unwrap();
        for (a, b) in sorted(pi.eigenvalues()).iter().zip(sorted(rho.eigenvalues())) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
        let v = h.spectrum().eigenvectors.clone();
        let pops: Vec<f64> = (0..d)
            .map(|k| trace_product(&(v.column(k) * v.column(k).adjoint()), pi.matrix()).re)
            .collect();
        prop_assert!(pops.windows(2).all(|w| w[0] >= w[1] - 1e-10));
    }

    #[test]
    fn ergotropy_inequality_chain(d in 2usize..=12, k in 1usize..=5, seed in any::<u64>()) {
        let (rho, h, cg) = random_fixture(d, k, seed);
        let w = ergotropy(&rho, &h).unwrap();
        let w_inf = asymptotic_ergotropy(&rho, &h).unwrap();
        let w_b = boltzmann_ergotropy(&rho, &h, &cg).unwrap();
        let w_b_inf = boltzmann_ergotropy_asymptotic(&rho, &h, &cg).unwrap();
        let w_c = observational_ergotropy(&rho, &h, &cg).unwrap();
        let w_c_inf = observational_ergotropy_asymptotic(&rho, &h, &cg).unwrap();
        let tol = 1e-9;
        prop_assert!(w >= -tol);
        prop_assert!(w_inf >= w - tol);
        prop_assert!(w_b_inf >= w_b - tol);
        prop_assert!(w_c_inf >= w_c - tol);
        prop_assert!(w_b >= w_c - tol);
        prop_assert!(w_b_inf >= w_c_inf - tol);
    }

    #[test]
    fn thermal_state_lower_bounds_passive_energy(d in 1usize..=12, seed in any::<u64>()) {
        let (rho, h, _) = random_fixture(d, 1, seed);
        let pi = passive_state(&rho, &h).unwrap();
        let sol = solve_beta_for_entropy(&h, von_neumann_entropy(&rho)).unwrap();
        let gibbs = thermal_state(&h, sol.beta).unwrap();
        let gap = trace_product(h.matrix(), &(pi.matrix() - gibbs.matrix())).re;
        prop_assert!(gap >= -1e-10);
    }

    #[test]
    fn beta_solver_hits_target(d in 2usize..=12, frac in 0.0f64..1.0, seed in any::<u64>()) {
        let h = random_h(d, &mut SeededRng::new(seed, 0));
        let target = frac * (d as f64).ln();
        let sol = solve_beta_for_entropy(&h, target).unwrap();
        if !sol.clamped {
            prop_assert!((thermal_entropy(h.levels(), sol.beta) - target).abs() <= 1e-9);
        }
    }

    #[test]
    fn doubling_copies_never_raises_energy_per_copy(
        d in 2usize..=3,
        counts in prop::collection::vec(1usize..=2, 1..=2),
        seed in any::<u64>(),
    ) {
        let mut rng = SeededRng::new(seed, 0);
        let h = random_h(d, &mut rng);
        let parts: Vec<(DensityMatrix, usize)> =
            counts.iter().map(|&n| (DensityMatrix::random(d, &mut rng), n)).collect();
        let doubled: Vec<(DensityMatrix, usize)> = parts.iter().map(|(s, n)| (s.clone(), 2 * n)).collect();
        let single = finite_n_min_energy(&parts, &h).unwrap();
        let double = finite_n_min_energy(&doubled, &h).unwrap();
        prop_assert!(double <= single + 1e-9);
    }
}
