//! Spinless fermions on an open chain with nearest and next-nearest neighbour
//! hopping and density interactions, restricted to a fixed particle number.
//!
//! Configurations are bitstrings; site `i` (1-based) is bit `L - i`, so the
//! string `"000000111100"` reads left to right from site 1 to site `L`, and
//! lexicographic order on strings is numeric order on the bit patterns.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::coarse::{
    boltzmann_entropy, energy_coarse_graining, measure_pure, observational_entropy,
    shannon_entropy, CoarseGraining,
};
use crate::ergotropy::{solve_beta_for_levels, thermal_energy};
use crate::error::{Error, Result};
use crate::linalg::{eigh, eigvalsh, CMatrix, CVector, C64};
use crate::output::fmt12;
use crate::state::{evolve_coefficients, pure_mean_energy, HamiltonianOp, PureState};

/// Largest sector dimension handled by dense diagonalization.
pub const MAX_SECTOR_DIM: usize = 4096;

pub const MAX_SITES: usize = 40;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    #[serde(rename = "L")]
    pub sites: usize,
    pub n: usize,
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "Tp")]
    pub t_prime: f64,
    #[serde(rename = "V")]
    pub v: f64,
    #[serde(rename = "Vp")]
    pub v_prime: f64,
}

impl ChainSpec {
    pub fn new(sites: usize, n: usize, t: f64, t_prime: f64, v: f64, v_prime: f64) -> Result<Self> {
        let spec = ChainSpec {
            sites,
            n,
            t,
            t_prime,
            v,
            v_prime,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Twelve sites, four particles, `T = V = 1`, `T' = V' = 0.96`.
    pub fn twelve_site() -> Self {
        ChainSpec {
            sites: 12,
            n: 4,
            t: 1.0,
            t_prime: 0.96,
            v: 1.0,
            v_prime: 0.96,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites == 0 || self.sites > MAX_SITES {
            return Err(Error::Validation(format!(
                "site count must lie in 1..={MAX_SITES}, got {}",
                self.sites
            )));
        }
        if self.n > self.sites {
            return Err(Error::Validation(format!(
                "{} particles do not fit on {} sites",
                self.n, self.sites
            )));
        }
        for (name, x) in [
            ("T", self.t),
            ("Tp", self.t_prime),
            ("V", self.v),
            ("Vp", self.v_prime),
        ] {
            if !x.is_finite() {
                return Err(Error::Validation(format!("coupling {name} is not finite")));
            }
        }
        let dim = binomial(self.sites, self.n);
        if dim > MAX_SECTOR_DIM as u128 {
            return Err(Error::CapExceeded {
                size: dim,
                cap: MAX_SECTOR_DIM as u128,
                hint: "choose a smaller chain or particle number",
            });
        }
        Ok(())
    }

    pub fn half(&self) -> usize {
        self.sites / 2
    }

    /// Same couplings on a shorter chain with another filling.
    pub fn with_size(&self, sites: usize, n: usize) -> ChainSpec {
        ChainSpec { sites, n, ..*self }
    }
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, j| acc * (n - j) as u128 / (j + 1) as u128)
}

/// Occupation-number basis in increasing numeric (= lexicographic) order.
#[derive(Clone, Debug)]
pub struct SectorBasis {
    sites: usize,
    configs: Vec<u64>,
    index: HashMap<u64, usize>,
}

impl SectorBasis {
    /// All configurations of `n` particles on `sites` sites.
    pub fn new(sites: usize, n: usize) -> Result<Self> {
        if sites > MAX_SITES || n > sites {
            return Err(Error::Validation(format!(
                "no sector with {n} particles on {sites} sites"
            )));
        }
        let mut configs = Vec::with_capacity(binomial(sites, n) as usize);
        if n == 0 {
            configs.push(0);
        } else {
            let limit = 1u64 << sites;
            let mut c: u64 = (1u64 << n) - 1;
            while c < limit {
                configs.push(c);
                // next pattern with the same popcount
                let t = c | (c - 1);
                c = (t + 1) | (((!t & (t + 1)) - 1) >> (c.trailing_zeros() + 1));
            }
        }
        Ok(Self::from_configs(sites, configs))
    }

    /// Every configuration of every particle number.
    pub fn full(sites: usize) -> Result<Self> {
        if sites > 20 {
            return Err(Error::Validation(format!(
                "full Fock space too large for {sites} sites"
            )));
        }
        Ok(Self::from_configs(sites, (0..1u64 << sites).collect()))
    }

    fn from_configs(sites: usize, configs: Vec<u64>) -> Self {
        let index = configs.iter().enumerate().map(|(k, &c)| (c, k)).collect();
        SectorBasis {
            sites,
            configs,
            index,
        }
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn configs(&self) -> &[u64] {
        &self.configs
    }

    pub fn config(&self, k: usize) -> u64 {
        self.configs[k]
    }

    pub fn index_of(&self, config: u64) -> Option<usize> {
        self.index.get(&config).copied()
    }

    pub fn site_mask(&self, site: usize) -> u64 {
        1u64 << (self.sites - site)
    }

    pub fn occupied(&self, config: u64, site: usize) -> bool {
        config & self.site_mask(site) != 0
    }

    pub fn format(&self, config: u64) -> String {
        (1..=self.sites)
            .map(|i| if self.occupied(config, i) { '1' } else { '0' })
            .collect()
    }

    pub fn parse(&self, s: &str) -> Result<u64> {
        if s.len() != self.sites || !s.chars().all(|ch| ch == '0' || ch == '1') {
            return Err(Error::Validation(format!(
                "configuration {s:?} is not a {}-character 0/1 string",
                self.sites
            )));
        }
        Ok(s.chars()
            .fold(0u64, |acc, ch| (acc << 1) | u64::from(ch == '1')))
    }
}

/// Matrix of the chain Hamiltonian restricted to sites `first..=last` on `basis`.
pub fn hamiltonian_matrix(
    spec: &ChainSpec,
    basis: &SectorBasis,
    range: (usize, usize),
) -> Result<CMatrix> {
    let (first, last) = range;
    let sites = basis.sites();
    if first < 1 || last > sites || first > last {
        return Err(Error::Validation(format!(
            "site range [{first}, {last}] outside [1, {sites}]"
        )));
    }
    let d = basis.len();
    let mut m = CMatrix::zeros(d, d);
    let bonds = [
        (1usize, spec.t, spec.v),
        (2usize, spec.t_prime, spec.v_prime),
    ];
    for (col, &c) in basis.configs().iter().enumerate() {
        let mut diag = 0.0;
        for i in first..=last {
            for &(reach, hop, density) in &bonds {
                let j = i + reach;
                if j > last {
                    continue;
                }
                let (oi, oj) = (basis.occupied(c, i), basis.occupied(c, j));
                if oi && oj {
                    diag += density;
                }
                if oi != oj && hop != 0.0 {
                    let target = c ^ basis.site_mask(i) ^ basis.site_mask(j);
                    let between = (i + 1..j).filter(|&s| basis.occupied(c, s)).count();
                    let sign = if between % 2 == 0 { 1.0 } else { -1.0 };
                    if let Some(row) = basis.index_of(target) {
                        m[(row, col)] += C64::new(-hop * sign, 0.0);
                    }
                }
            }
        }
        m[(col, col)] += C64::new(diag, 0.0);
    }
    Ok(m)
}

/// Chain Hamiltonian on sites `range` within the `(L, n)` sector of `spec`.
pub fn build_hamiltonian(spec: &ChainSpec, range: (usize, usize)) -> Result<HamiltonianOp> {
    spec.validate()?;
    let basis = SectorBasis::new(spec.sites, spec.n)?;
    HamiltonianOp::new(hamiltonian_matrix(spec, &basis, range)?)
}

/// Full Hamiltonian, its left and right halves, and the coupling across the cut.
#[derive(Clone, Debug)]
pub struct SplitHamiltonians {
    pub basis: SectorBasis,
    pub full: HamiltonianOp,
    pub h1: HamiltonianOp,
    pub h2: HamiltonianOp,
    pub h_int: HamiltonianOp,
    pub h_int_norm: f64,
}

pub fn split_hamiltonian(spec: &ChainSpec) -> Result<SplitHamiltonians> {
    spec.validate()?;
    if spec.sites < 4 || !spec.sites.is_multiple_of(2) {
        return Err(Error::Validation(format!(
            "splitting needs an even chain of at least 4 sites, got {}",
            spec.sites
        )));
    }
    let basis = SectorBasis::new(spec.sites, spec.n)?;
    let half = spec.half();
    let full = hamiltonian_matrix(spec, &basis, (1, spec.sites))?;
    let h1 = hamiltonian_matrix(spec, &basis, (1, half))?;
    let h2 = hamiltonian_matrix(spec, &basis, (half + 1, spec.sites))?;
    let h_int = HamiltonianOp::new(&full - &h1 - &h2)?;
    let h_int_norm = h_int.levels().iter().fold(0.0f64, |m, e| m.max(e.abs()));
    Ok(SplitHamiltonians {
        basis,
        full: HamiltonianOp::new(full)?,
        h1: HamiltonianOp::new(h1)?,
        h2: HamiltonianOp::new(h2)?,
        h_int,
        h_int_norm,
    })
}

/// Joint local-energy cells `(m1, m2)`: left half energy in
/// `[origin1 + m1 dE, origin1 + (m1+1) dE)`, right half likewise.
#[derive(Clone, Debug)]
pub struct LocalEnergyCoarseGraining {
    pub cg: CoarseGraining,
    pub cells: Vec<(i64, i64)>,
    pub origins: (f64, f64),
    pub de: f64,
}

/// Coarse-graining by the energies of both halves, resolved per left particle
/// number and merged across particle numbers that share a cell. Bins of each
/// half start from `origins`, by default the lowest half-chain eigenvalue over
/// all reachable fillings of that half.
pub fn local_energy_coarse_graining(
    split: &SplitHamiltonians,
    spec: &ChainSpec,
    de: f64,
    origins: Option<(f64, f64)>,
) -> Result<LocalEnergyCoarseGraining> {
    if !(de > 0.0) || !de.is_finite() {
        return Err(Error::Domain(format!(
            "energy resolution must be positive, got {de}"
        )));
    }
    let half = spec.half();
    let n = spec.n;
    let k_range = n.saturating_sub(half)..=n.min(half);

    let mut half_spectra: BTreeMap<usize, (SectorBasis, crate::linalg::Spectrum)> = BTreeMap::new();
    for k in k_range.clone() {
        for count in [k, n - k] {
            if let Entry::Vacant(e) = half_spectra.entry(count) {
                let basis = SectorBasis::new(half, count)?;
                let m = hamiltonian_matrix(&spec.with_size(half, count), &basis, (1, half))?;
                e.insert((basis, eigh(&m)?));
            }
        }
    }
    let origins = origins.unwrap_or_else(|| {
        let lowest = |counts: &mut dyn Iterator<Item = usize>| {
            counts.fold(f64::INFINITY, |m, c| m.min(half_spectra[&c].1.min()))
        };
        (
            lowest(&mut k_range.clone()),
            lowest(&mut k_range.clone().map(|k| n - k)),
        )
    });

    let d = split.basis.len();
    let mut cells: BTreeMap<(i64, i64), Vec<CVector>> = BTreeMap::new();
    for k in k_range {
        let (lb, ls) = &half_spectra[&k];
        let (rb, rs) = &half_spectra[&(n - k)];
        let mut slots = Vec::with_capacity(lb.len() * rb.len());
        for (a, &lc) in lb.configs().iter().enumerate() {
            for (b, &rc) in rb.configs().iter().enumerate() {
                let row = split
                    .basis
                    .index_of((lc << half) | rc)
                    .expect("product of half sectors lies in the sector");
                slots.push((row, a, b));
            }
        }
        for (p, &e1) in ls.eigenvalues.iter().enumerate() {
            let m1 = crate::coarse::bin_index(e1, de, origins.0);
            for (q, &e2) in rs.eigenvalues.iter().enumerate() {
                let m2 = crate::coarse::bin_index(e2, de, origins.1);
                let mut v = CVector::zeros(d);
                for &(row, a, b) in &slots {
                    v[row] = ls.eigenvectors[(a, p)] * rs.eigenvectors[(b, q)];
                }
                cells.entry((m1, m2)).or_default().push(v);
            }
        }
    }

    let mut bases = Vec::with_capacity(cells.len());
    let mut labels = Vec::with_capacity(cells.len());
    let mut keys = Vec::with_capacity(cells.len());
    for ((m1, m2), cols) in cells {
        bases.push(CMatrix::from_columns(&cols));
        labels.push(format!(
            "{}|{}",
            fmt12(origins.0 + m1 as f64 * de),
            fmt12(origins.1 + m2 as f64 * de)
        ));
        keys.push((m1, m2));
    }
    Ok(LocalEnergyCoarseGraining {
        cg: CoarseGraining::from_bases(bases, Some(labels))?,
        cells: keys,
        origins,
        de,
    })
}

/// Half-width of the window around `tr(H rho_cg)` that must contain `tr(H rho)`
/// for a coarse-graining into `partitions` local energies.
pub fn energy_estimate_bound(split: &SplitHamiltonians, de: f64, partitions: usize) -> f64 {
    debug_assert!(partitions >= 2);
    2.0 * split.h_int_norm + partitions as f64 * de
}

/// How the energy resolution is chosen: half the lowest gap of the full
/// Hamiltonian, half the lowest gap of the uncoupled halves, or a fixed value.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum DeltaERule {
    #[default]
    Global,
    Local,
    Fixed(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum DeltaERuleRepr {
    Name(String),
    Value(f64),
}

impl Serialize for DeltaERule {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            DeltaERule::Global => DeltaERuleRepr::Name("global".into()),
            DeltaERule::Local => DeltaERuleRepr::Name("local".into()),
            DeltaERule::Fixed(x) => DeltaERuleRepr::Value(*x),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DeltaERule {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match DeltaERuleRepr::deserialize(d)? {
            DeltaERuleRepr::Name(s) => match s.as_str() {
                "global" => Ok(DeltaERule::Global),
                "local" => Ok(DeltaERule::Local),
                other => Err(serde::de::Error::custom(format!(
                    "dE_rule must be \"global\", \"local\" or a number, got {other:?}"
                ))),
            },
            DeltaERuleRepr::Value(x) => Ok(DeltaERule::Fixed(x)),
        }
    }
}

/// Resolution with the two levels it was derived from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DeltaEChoice {
    pub de: f64,
    pub e0: f64,
    pub e1: f64,
}

fn lowest_gap(levels: &[f64]) -> Result<(f64, f64)> {
    let e0 = levels[0];
    let scale = levels.iter().fold(1.0f64, |m, e| m.max(e.abs()));
    let e1 = levels
        .iter()
        .copied()
        .find(|&e| e - e0 > 1e-10 * scale)
        .ok_or_else(|| Error::Domain("spectrum has a single level; no gap to set dE".into()))?;
    Ok((e0, e1))
}

pub fn resolve_delta_e(rule: DeltaERule, split: &SplitHamiltonians) -> Result<DeltaEChoice> {
    let (e0, e1) = match rule {
        DeltaERule::Local => {
            let sum = split.h1.matrix() + split.h2.matrix();
            lowest_gap(&eigvalsh(&sum)?)?
        }
        _ => lowest_gap(split.full.levels())?,
    };
    let de = match rule {
        DeltaERule::Fixed(x) => {
            if !(x > 0.0) || !x.is_finite() {
                return Err(Error::Domain(format!(
                    "energy resolution must be positive, got {x}"
                )));
            }
            x
        }
        _ => 0.5 * (e1 - e0),
    };
    Ok(DeltaEChoice { de, e0, e1 })
}

/// Quench scenario configuration as read from JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(rename = "L")]
    pub sites: usize,
    pub n: usize,
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "Tp")]
    pub t_prime: f64,
    #[serde(rename = "V")]
    pub v: f64,
    #[serde(rename = "Vp")]
    pub v_prime: f64,
    #[serde(rename = "dE_rule")]
    pub de_rule: DeltaERule,
    pub t_max: f64,
    pub t_steps: usize,
    pub seed: u64,
    /// Initial configuration string; defaults to an empty left half and the
    /// particles packed at the left edge of the right half.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<String>,
    /// Bin origins of the two halves.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub origins: Option<(f64, f64)>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let s = ChainSpec::twelve_site();
        ScenarioConfig {
            sites: s.sites,
            n: s.n,
            t: s.t,
            t_prime: s.t_prime,
            v: s.v,
            v_prime: s.v_prime,
            de_rule: DeltaERule::Global,
            t_max: 20.0,
            t_steps: 200,
            seed: 0,
            initial: None,
            origins: None,
        }
    }
}

impl ScenarioConfig {
    pub fn spec(&self) -> ChainSpec {
        ChainSpec {
            sites: self.sites,
            n: self.n,
            t: self.t,
            t_prime: self.t_prime,
            v: self.v,
            v_prime: self.v_prime,
        }
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn initial_config(&self) -> Result<String> {
        if let Some(s) = &self.initial {
            return Ok(s.clone());
        }
        let half = self.sites / 2;
        if self.n > self.sites - half {
            return Err(Error::Validation(
                "default initial state needs n <= L/2; give \"initial\" explicitly".into(),
            ));
        }
        let right = self.sites - half;
        Ok(format!(
            "{}{}{}",
            "0".repeat(half),
            "1".repeat(self.n),
            "0".repeat(right - self.n)
        ))
    }

    pub fn time_grid(&self) -> Result<Vec<f64>> {
        time_grid(self.t_max, self.t_steps)
    }
}

/// `steps` evenly spaced times from 0 to `t_max`; one step means `t = 0` only.
pub fn time_grid(t_max: f64, steps: usize) -> Result<Vec<f64>> {
    if steps == 0 || !t_max.is_finite() || t_max < 0.0 {
        return Err(Error::Validation(format!(
            "time grid needs t_steps >= 1 and finite t_max >= 0, got {steps} and {t_max}"
        )));
    }
    if steps == 1 {
        return Ok(vec![0.0]);
    }
    Ok((0..steps)
        .map(|j| t_max * j as f64 / (steps - 1) as f64)
        .collect())
}

/// Per-time quantities of the quench, in CSV column order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChainRecord {
    pub t: f64,
    pub energy_true: f64,
    pub energy_cg: f64,
    pub bound_halfwidth: f64,
    pub s_shannon: f64,
    pub s_boltzmann: f64,
    pub s_obs: f64,
    pub s_th_global: f64,
    pub w_obs_inf_true: f64,
    pub w_obs_inf_cg: f64,
    pub w_band_lo: f64,
    pub w_band_hi: f64,
}

pub const CHAIN_CSV_HEADER: [&str; 12] = [
    "t",
    "energy_true",
    "energy_cg",
    "bound_halfwidth",
    "S_shannon",
    "S_boltzmann",
    "S_obs",
    "S_th_global",
    "W_obs_inf_true",
    "W_obs_inf_cg",
    "W_band_lo",
    "W_band_hi",
];

impl ChainRecord {
    pub fn to_row(&self) -> Vec<f64> {
        vec![
            self.t,
            self.energy_true,
            self.energy_cg,
            self.bound_halfwidth,
            self.s_shannon,
            self.s_boltzmann,
            self.s_obs,
            self.s_th_global,
            self.w_obs_inf_true,
            self.w_obs_inf_cg,
            self.w_band_lo,
            self.w_band_hi,
        ]
    }

    pub fn band_contains_truth(&self) -> bool {
        self.w_obs_inf_true >= self.w_band_lo - 1e-9 && self.w_obs_inf_true <= self.w_band_hi + 1e-9
    }
}

/// Everything needed to evaluate the quench at any time, built once.
#[derive(Clone, Debug)]
pub struct ChainScenario {
    pub config: ScenarioConfig,
    pub spec: ChainSpec,
    pub split: SplitHamiltonians,
    pub delta_e: DeltaEChoice,
    pub local: LocalEnergyCoarseGraining,
    pub global: CoarseGraining,
    pub bound_halfwidth: f64,
    pub initial: PureState,
    /// `tr(B_i^dagger H B_i) / V_i` per local cell.
    cell_energies: Vec<f64>,
    coefficients: CVector,
}

impl ChainScenario {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        let spec = config.spec();
        let split = split_hamiltonian(&spec)?;
        let delta_e = resolve_delta_e(config.de_rule, &split)?;
        let local = local_energy_coarse_graining(&split, &spec, delta_e.de, config.origins)?;
        let global = energy_coarse_graining(&split.full, delta_e.de, Some(delta_e.e0))?;
        let bound_halfwidth = energy_estimate_bound(&split, delta_e.de, 2);

        let text = config.initial_config()?;
        let bits = split.basis.parse(&text)?;
        let k = split.basis.index_of(bits).ok_or_else(|| {
            Error::Validation(format!(
                "initial configuration {text} has the wrong particle number"
            ))
        })?;
        let initial = PureState::basis(split.basis.len(), k)?;
        let coefficients = split.full.spectrum().eigenvectors.adjoint() * initial.amplitudes();
        let cell_energies = local.cg.block_averages(split.full.matrix())?;
        config.time_grid()?;
        Ok(ChainScenario {
            config,
            spec,
            split,
            delta_e,
            local,
            global,
            bound_halfwidth,
            initial,
            cell_energies,
            coefficients,
        })
    }

    pub fn sector_dim(&self) -> usize {
        self.split.basis.len()
    }

    pub fn state_at(&self, t: f64) -> PureState {
        PureState::from_trusted(evolve_coefficients(
            self.split.full.spectrum(),
            &self.coefficients,
            t,
        ))
    }

    pub fn record_at(&self, t: f64) -> Result<ChainRecord> {
        self.record_for(t, &self.state_at(t))
    }

    /// Quantities for an arbitrary sector state `psi`, stamped with time `t`.
    pub fn record_for(&self, t: f64, psi: &PureState) -> Result<ChainRecord> {
        let stats = measure_pure(psi, &self.local.cg)?;
        let energy_true = pure_mean_energy(psi, &self.split.full)?;
        let energy_cg: f64 = stats
            .probs()
            .iter()
            .zip(&self.cell_energies)
            .map(|(p, e)| p * e)
            .sum();
        let s_obs = observational_entropy(&stats);
        let levels = self.split.full.levels();
        let ln_d = (levels.len() as f64).ln();
        let beta = solve_beta_for_levels(levels, s_obs.min(ln_d))?;
        let thermal = thermal_energy(levels, beta.beta);
        let w_cg = energy_cg - thermal;
        Ok(ChainRecord {
            t,
            energy_true,
            energy_cg,
            bound_halfwidth: self.bound_halfwidth,
            s_shannon: shannon_entropy(&stats),
            s_boltzmann: boltzmann_entropy(&stats),
            s_obs,
            s_th_global: observational_entropy(&measure_pure(psi, &self.global)?),
            w_obs_inf_true: energy_true - thermal,
            w_obs_inf_cg: w_cg,
            w_band_lo: w_cg - self.bound_halfwidth,
            w_band_hi: w_cg + self.bound_halfwidth,
        })
    }

    /// All records on the configured time grid, split over `workers` threads.
    pub fn run(&self, workers: usize) -> Result<Vec<ChainRecord>> {
        let times = self.config.time_grid()?;
        let workers = workers.clamp(1, times.len());
        if workers == 1 {
            return times.iter().map(|&t| self.record_at(t)).collect();
        }
        let chunk = times.len().div_ceil(workers);
        let parts: Vec<Result<Vec<ChainRecord>>> = std::thread::scope(|scope| {
            let handles: Vec<_> = times
                .chunks(chunk)
                .map(|ts| scope.spawn(move || ts.iter().map(|&t| self.record_at(t)).collect()))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("worker panicked"))
                .collect()
        });
        let mut out = Vec::with_capacity(times.len());
        for part in parts {
            out.extend(part?);
        }
        Ok(out)
    }

    pub fn metadata(&self) -> ScenarioMetadata {
        ScenarioMetadata {
            version: env!("CARGO_PKG_VERSION"),
            seed: self.config.seed,
            config: self.config.clone(),
            initial: self.split.basis.format(
                self.split.basis.config(
                    self.initial
                        .amplitudes()
                        .iter()
                        .position(|z| z.norm() > 0.5)
                        .expect("basis state"),
                ),
            ),
            sector_dim: self.sector_dim(),
            h_int_norm: self.split.h_int_norm,
            delta_e: self.delta_e.de,
            e0: self.delta_e.e0,
            e1: self.delta_e.e1,
            bound_halfwidth: self.bound_halfwidth,
            local_origins: self.local.origins,
            macrostates: self.local.cg.len(),
            global_macrostates: self.global.len(),
        }
    }
}

/// Sidecar record written next to a scenario table.
#[derive(Clone, Debug, Serialize)]
pub struct ScenarioMetadata {
    pub version: &'static str,
    pub seed: u64,
    pub config: ScenarioConfig,
    pub initial: String,
    pub sector_dim: usize,
    pub h_int_norm: f64,
    #[serde(rename = "dE")]
    pub delta_e: f64,
    #[serde(rename = "E0")]
    pub e0: f64,
    #[serde(rename = "E1")]
    pub e1: f64,
    pub bound_halfwidth: f64,
    pub local_origins: (f64, f64),
    pub macrostates: usize,
    pub global_macrostates: usize,
}
