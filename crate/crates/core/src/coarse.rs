//! Projective coarse-grainings, outcome statistics, coarse-grained states and
//! the Shannon, Boltzmann and observational entropies.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c64, check_hermitian, eigh, haar_unitary, CMatrix, SeededRng};
use crate::state::{check_dim, hermitize, DensityMatrix, HamiltonianOp, MatrixFile, PureState};

/// Tolerance on projector algebra (idempotence, orthogonality, completeness).
pub const PROJECTOR_TOL: f64 = 1e-10;

/// Probabilities above `-PROB_CLIP` are clipped to zero before renormalizing.
pub const PROB_CLIP: f64 = 1e-12;

/// Complete family of mutually orthogonal projectors.
///
/// Each macrostate is stored as an isometry `B_i` (`d x V_i`, orthonormal
/// columns) so that `P_i = B_i B_i^dagger`. Full projector matrices are built on
/// request.
#[derive(Clone, Debug)]
pub struct CoarseGraining {
    dim: usize,
    bases: Vec<CMatrix>,
    labels: Vec<String>,
}

fn max_dev_from_identity(m: &CMatrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((m[(i, j)] - c64(target, 0.0)).norm());
        }
    }
    worst
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0f64, |a, z| a.max(z.norm()))
}

impl CoarseGraining {
    /// Builds from per-macrostate isometries; labels default to the outcome index.
    pub fn from_bases(bases: Vec<CMatrix>, labels: Option<Vec<String>>) -> Result<Self> {
        let dim = bases
            .first()
            .map(|b| b.nrows())
            .ok_or_else(|| Error::Validation("coarse-graining has no outcomes".into()))?;
        let mut total = 0;
        for (i, b) in bases.iter().enumerate() {
            check_dim(dim, b.nrows())?;
            if b.ncols() == 0 {
                return Err(Error::Validation(format!("macrostate {i} is empty")));
            }
            let dev = max_dev_from_identity(&(b.adjoint() * b));
            if dev > PROJECTOR_TOL {
                return Err(Error::Validation(format!(
                    "macrostate {i} basis is not orthonormal (deviation {dev:e})"
                )));
            }
            total += b.ncols();
        }
        if total != dim {
            return Err(Error::Validation(format!(
                "macrostate volumes sum to {total}, expected {dim}"
            )));
        }
        for i in 0..bases.len() {
            for j in (i + 1)..bases.len() {
                let overlap = max_abs(&(bases[i].adjoint() * &bases[j]));
                if overlap > PROJECTOR_TOL {
                    return Err(Error::Validation(format!(
                        "macrostates {i} and {j} overlap ({overlap:e})"
                    )));
                }
            }
        }
        let labels = match labels {
            Some(l) if l.len() == bases.len() => l,
            Some(l) => {
                return Err(Error::Validation(format!(
                    "{} labels for {} outcomes",
                    l.len(),
                    bases.len()
                )))
            }
            None => (0..bases.len()).map(|i| i.to_string()).collect(),
        };
        Ok(CoarseGraining { dim, bases, labels })
    }

    /// Builds from full projector matrices, checking `P^2 = P`, `P_i P_j = 0`
    /// and `sum P_i = I`.
    pub fn from_projectors(projectors: &[CMatrix], labels: Option<Vec<String>>) -> Result<Self> {
        let dim = projectors
            .first()
            .map(|p| p.nrows())
            .ok_or_else(|| Error::Validation("coarse-graining has no outcomes".into()))?;
        let mut sum = CMatrix::zeros(dim, dim);
        let mut bases = Vec::with_capacity(projectors.len());
        for (i, p) in projectors.iter().enumerate() {
            check_hermitian(p)?;
            check_dim(dim, p.nrows())?;
            let idem = max_abs(&(p * p - p));
            if idem > PROJECTOR_TOL {
                return Err(Error::Validation(format!(
                    "projector {i} is not idempotent ({idem:e})"
                )));
            }
            for (j, q) in projectors.iter().enumerate().skip(i + 1) {
                let cross = max_abs(&(p * q));
                if cross > PROJECTOR_TOL {
                    return Err(Error::Validation(format!(
                        "projectors {i} and {j} are not orthogonal ({cross:e})"
                    )));
                }
            }
            sum += p;
            let spec = eigh(p)?;
            let cols: Vec<usize> = (0..dim).filter(|&k| spec.eigenvalues[k] > 0.5).collect();
            bases.push(CMatrix::from_fn(dim, cols.len(), |r, c| {
                spec.eigenvectors[(r, cols[c])]
            }));
        }
        let completeness = max_dev_from_identity(&sum);
        if completeness > PROJECTOR_TOL {
            return Err(Error::Validation(format!(
                "projectors do not sum to the identity ({completeness:e})"
            )));
        }
        CoarseGraining::from_bases(bases, labels)
    }

    /// Groups of computational basis indices, one group per outcome.
    pub fn computational(groups: &[Vec<usize>]) -> Result<Self> {
        let dim: usize = groups.iter().map(|g| g.len()).sum();
        let bases = groups
            .iter()
            .map(|g| {
                let mut b = CMatrix::zeros(dim, g.len());
                for (c, &k) in g.iter().enumerate() {
                    if k >= dim {
                        return Err(Error::Domain(format!("basis index {k} out of range")));
                    }
                    b[(k, c)] = c64(1.0, 0.0);
                }
                Ok(b)
            })
            .collect::<Result<Vec<_>>>()?;
        CoarseGraining::from_bases(bases, None)
    }

    /// Single outcome with `P = I`.
    pub fn trivial(dim: usize) -> Self {
        CoarseGraining {
            dim,
            bases: vec![CMatrix::identity(dim, dim)],
            labels: vec!["0".into()],
        }
    }

    /// Random partition of a Haar-random basis into `outcomes` nonempty blocks.
    pub fn random(dim: usize, outcomes: usize, rng: &mut SeededRng) -> Result<Self> {
        if outcomes == 0 || outcomes > dim {
            return Err(Error::Domain(format!(
                "cannot split dimension {dim} into {outcomes} macrostates"
            )));
        }
        let u = haar_unitary(dim, rng)?;
        // Random composition of `dim` into `outcomes` positive parts.
        let mut cuts: Vec<usize> = (1..dim).collect();
        for k in (1..cuts.len()).rev() {
            let j = (rng.uniform() * (k + 1) as f64) as usize;
            cuts.swap(k, j.min(k));
        }
        let mut chosen: Vec<usize> = cuts.into_iter().take(outcomes - 1).collect();
        chosen.sort_unstable();
        chosen.push(dim);
        let mut start = 0;
        let mut bases = Vec::with_capacity(outcomes);
        for end in chosen {
            bases.push(u.columns(start, end - start).into_owned());
            start = end;
        }
        CoarseGraining::from_bases(bases, None)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.bases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bases.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn volume(&self, i: usize) -> usize {
        self.bases[i].ncols()
    }

    pub fn volumes(&self) -> Vec<usize> {
        self.bases.iter().map(|b| b.ncols()).collect()
    }

    /// Orthonormal basis (`d x V_i`) of macrostate `i`.
    pub fn basis(&self, i: usize) -> &CMatrix {
        &self.bases[i]
    }

    pub fn bases(&self) -> &[CMatrix] {
        &self.bases
    }

    pub fn projector(&self, i: usize) -> CMatrix {
        let b = &self.bases[i];
        b * b.adjoint()
    }

    /// `tr(A P_i) / V_i` for every outcome.
    pub fn block_averages(&self, a: &CMatrix) -> Result<Vec<f64>> {
        check_dim(self.dim, a.nrows())?;
        Ok(self
            .bases
            .iter()
            .map(|b| (b.adjoint() * a * b).trace().re / b.ncols() as f64)
            .collect())
    }
}

/// Outcome probabilities together with macrostate volumes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementStats {
    probs: Vec<f64>,
    volumes: Vec<usize>,
}

impl MeasurementStats {
    pub fn new(probs: Vec<f64>, volumes: Vec<usize>) -> Result<Self> {
        if probs.len() != volumes.len() {
            return Err(Error::DimensionMismatch {
                expected: volumes.len(),
                found: probs.len(),
            });
        }
        if volumes.contains(&0) {
            return Err(Error::Validation(
                "macrostate volumes must be positive".into(),
            ));
        }
        if let Some(p) = probs.iter().find(|&&p| !p.is_finite() || p < -PROB_CLIP) {
            return Err(Error::Validation(format!("invalid probability {p}")));
        }
        let clipped: Vec<f64> = probs.iter().map(|&p| p.max(0.0)).collect();
        let total: f64 = clipped.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::Validation(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        Ok(MeasurementStats {
            probs: clipped.iter().map(|p| p / total).collect(),
            volumes,
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn volumes(&self) -> &[usize] {
        &self.volumes
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Eigenvalues of the coarse-grained state: `p_i / V_i` with multiplicity `V_i`.
    pub fn coarse_grained_spectrum(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.volumes.iter().sum());
        for (&p, &v) in self.probs.iter().zip(&self.volumes) {
            out.extend(std::iter::repeat_n(p / v as f64, v));
        }
        out
    }
}

/// `p_i = tr(P_i rho)`.
pub fn measure_probs(rho: &DensityMatrix, cg: &CoarseGraining) -> Result<MeasurementStats> {
    check_dim(cg.dim(), rho.dim())?;
    let probs = cg
        .bases()
        .iter()
        .map(|b| (b.adjoint() * rho.matrix() * b).trace().re)
        .collect();
    MeasurementStats::new(probs, cg.volumes())
}

/// `p_i = ||B_i^dagger psi||^2` for a pure state.
pub fn measure_pure(psi: &PureState, cg: &CoarseGraining) -> Result<MeasurementStats> {
    check_dim(cg.dim(), psi.dim())?;
    let probs = cg
        .bases()
        .iter()
        .map(|b| (b.adjoint() * psi.amplitudes()).norm_squared())
        .collect();
    MeasurementStats::new(probs, cg.volumes())
}

/// `P_i rho P_i / p_i`.
pub fn post_measurement_state(
    rho: &DensityMatrix,
    cg: &CoarseGraining,
    outcome: usize,
) -> Result<DensityMatrix> {
    check_dim(cg.dim(), rho.dim())?;
    if outcome >= cg.len() {
        return Err(Error::Domain(format!(
            "outcome {outcome} out of range ({} outcomes)",
            cg.len()
        )));
    }
    let p = cg.projector(outcome);
    let projected = &p * rho.matrix() * &p;
    let prob = projected.trace().re;
    if prob <= PROB_CLIP {
        return Err(Error::ZeroProbability { outcome, prob });
    }
    let mut m = projected / c64(prob, 0.0);
    hermitize(&mut m);
    Ok(DensityMatrix::from_trusted(m))
}

/// `rho_cg = sum_i (p_i / V_i) P_i`.
pub fn coarse_grained_state(
    stats: &MeasurementStats,
    cg: &CoarseGraining,
) -> Result<DensityMatrix> {
    if stats.len() != cg.len() {
        return Err(Error::DimensionMismatch {
            expected: cg.len(),
            found: stats.len(),
        });
    }
    if stats.volumes() != cg.volumes().as_slice() {
        return Err(Error::Validation(
            "statistics volumes do not match the coarse-graining".into(),
        ));
    }
    let d = cg.dim();
    let mut m = CMatrix::zeros(d, d);
    for (i, (&p, &v)) in stats.probs().iter().zip(stats.volumes()).enumerate() {
        if p > 0.0 {
            let b = cg.basis(i);
            m += (b * b.adjoint()) * c64(p / v as f64, 0.0);
        }
    }
    hermitize(&mut m);
    Ok(DensityMatrix::from_trusted(m))
}

/// `sum_i P_i rho P_i`.
pub fn dephase(rho: &DensityMatrix, cg: &CoarseGraining) -> Result<CMatrix> {
    check_dim(cg.dim(), rho.dim())?;
    let d = cg.dim();
    let mut m = CMatrix::zeros(d, d);
    for i in 0..cg.len() {
        let p = cg.projector(i);
        m += &p * rho.matrix() * &p;
    }
    Ok(m)
}

fn xlnx(p: f64) -> f64 {
    if p > 0.0 {
        p * p.ln()
    } else {
        0.0
    }
}

/// `-sum p_i ln p_i`.
pub fn shannon_entropy(stats: &MeasurementStats) -> f64 {
    -stats.probs().iter().map(|&p| xlnx(p)).sum::<f64>()
}

/// Mean Boltzmann entropy `sum p_i ln V_i`.
pub fn boltzmann_entropy(stats: &MeasurementStats) -> f64 {
    stats
        .probs()
        .iter()
        .zip(stats.volumes())
        .map(|(&p, &v)| p * (v as f64).ln())
        .sum()
}

/// Observational entropy, Shannon plus mean Boltzmann.
pub fn observational_entropy(stats: &MeasurementStats) -> f64 {
    shannon_entropy(stats) + boltzmann_entropy(stats)
}

/// Bins eigenvectors of `h` by eigenvalue into `[origin + m dE, origin + (m+1) dE)`.
///
/// `origin` defaults to the ground energy. Empty bins are omitted, labels are
/// the bin lower edges.
pub fn energy_coarse_graining(
    h: &HamiltonianOp,
    de: f64,
    origin: Option<f64>,
) -> Result<CoarseGraining> {
    let spec = h.spectrum();
    let bins = bin_levels(&spec.eigenvalues, de, origin.unwrap_or(h.ground_energy()))?;
    let d = h.dim();
    let mut bases = Vec::with_capacity(bins.len());
    let mut labels = Vec::with_capacity(bins.len());
    for (lower, members) in bins {
        bases.push(CMatrix::from_fn(d, members.len(), |r, c| {
            spec.eigenvectors[(r, members[c])]
        }));
        labels.push(format!("{lower}"));
    }
    CoarseGraining::from_bases(bases, Some(labels))
}

/// Groups level indices by energy bin; returns `(bin lower edge, indices)` in
/// ascending bin order.
pub fn bin_levels(levels: &[f64], de: f64, origin: f64) -> Result<Vec<(f64, Vec<usize>)>> {
    if !(de > 0.0) || !de.is_finite() {
        return Err(Error::Domain(format!(
            "energy resolution must be positive, got {de}"
        )));
    }
    let mut bins: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (k, &e) in levels.iter().enumerate() {
        bins.entry(bin_index(e, de, origin)).or_default().push(k);
    }
    Ok(bins
        .into_iter()
        .map(|(m, members)| (origin + m as f64 * de, members))
        .collect())
}

/// Bin index of `e`; values within `1e-9 dE` below an edge snap up to it.
pub fn bin_index(e: f64, de: f64, origin: f64) -> i64 {
    ((e - origin) / de + 1e-9).floor() as i64
}

/// On-disk coarse-graining: a list of projector matrices, or an energy
/// binning resolved against a Hamiltonian when loaded.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoarseGrainingFile {
    Energy(EnergyBinning),
    Projectors(Vec<MatrixFile>),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnergyBinning {
    #[serde(rename = "type")]
    pub kind: EnergyTag,
    #[serde(rename = "dE")]
    pub de: f64,
    #[serde(default)]
    pub origin: Option<f64>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum EnergyTag {
    Energy,
}

impl CoarseGrainingFile {
    pub fn resolve(&self, h: Option<&HamiltonianOp>) -> Result<CoarseGraining> {
        match self {
            CoarseGrainingFile::Projectors(files) => {
                let mats = files
                    .iter()
                    .map(|f| f.to_matrix())
                    .collect::<Result<Vec<_>>>()?;
                CoarseGraining::from_projectors(&mats, None)
            }
            CoarseGrainingFile::Energy(spec) => {
                let h = h.ok_or_else(|| {
                    Error::Validation("energy coarse-graining needs a Hamiltonian".into())
                })?;
                energy_coarse_graining(h, spec.de, spec.origin)
            }
        }
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}
