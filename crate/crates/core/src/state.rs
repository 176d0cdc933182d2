//! Density matrices, Hamiltonians, pure states and the quantities built
//! directly on them: entropy, mean energy, unitary evolution, tensor powers.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    c64, check_hermitian, eigh, eigvalsh, kron, real_diag, trace, trace_product, CMatrix, CVector,
    SeededRng, Spectrum, C64,
};

/// Tolerance on trace, Hermiticity and negative eigenvalues of a state.
pub const STATE_TOL: f64 = 1e-10;

/// Eigenvalues below this are treated as exact zeros in entropies.
pub const ENTROPY_CUTOFF: f64 = 1e-14;

/// Largest `d^N` that [`tensor_power`] will materialize by default.
pub const DEFAULT_TENSOR_CAP: usize = 4096;

/// Trace-one positive semidefinite Hermitian matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        check_hermitian(&matrix)?;
        let tr = trace(&matrix);
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(Error::Validation(format!(
                "density matrix trace is {tr}, expected 1"
            )));
        }
        let min_eig = eigvalsh(&matrix)?.first().copied().unwrap_or(0.0);
        if min_eig < -STATE_TOL {
            return Err(Error::Validation(format!(
                "density matrix has negative eigenvalue {min_eig:e}"
            )));
        }
        Ok(DensityMatrix { matrix })
    }

    /// Skips validation; for states built by operations that preserve the invariants.
    pub(crate) fn from_trusted(matrix: CMatrix) -> Self {
        DensityMatrix { matrix }
    }

    pub fn diagonal(probs: &[f64]) -> Result<Self> {
        DensityMatrix::new(real_diag(probs))
    }

    pub fn maximally_mixed(d: usize) -> Self {
        DensityMatrix {
            matrix: CMatrix::identity(d, d) / c64(d as f64, 0.0),
        }
    }

    pub fn from_pure(psi: &PureState) -> Self {
        let v = &psi.amplitudes;
        DensityMatrix {
            matrix: v * v.adjoint(),
        }
    }

    /// Normalized Wishart state `G G^dagger / tr(G G^dagger)` with `G` complex Ginibre.
    pub fn random(d: usize, rng: &mut SeededRng) -> Self {
        let g = rng.ginibre(d, d);
        let w = &g * g.adjoint();
        let tr = trace(&w).re;
        let mut m = w / c64(tr, 0.0);
        hermitize(&mut m);
        DensityMatrix { matrix: m }
    }

    /// Random state of rank at most `rank`.
    pub fn random_with_rank(d: usize, rank: usize, rng: &mut SeededRng) -> Self {
        let g = rng.ginibre(d, rank.max(1));
        let w = &g * g.adjoint();
        let tr = trace(&w).re;
        let mut m = w / c64(tr, 0.0);
        hermitize(&mut m);
        DensityMatrix { matrix: m }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        eigvalsh(&self.matrix).expect("density matrix is Hermitian")
    }

    /// `U rho U^dagger`.
    pub fn conjugate(&self, u: &CMatrix) -> Result<DensityMatrix> {
        check_dim(self.dim(), u.nrows())?;
        check_dim(self.dim(), u.ncols())?;
        let mut m = u * &self.matrix * u.adjoint();
        hermitize(&mut m);
        Ok(DensityMatrix { matrix: m })
    }

    pub fn to_json(&self) -> MatrixFile {
        MatrixFile::from_matrix(&self.matrix)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        DensityMatrix::new(MatrixFile::load(path)?.to_matrix()?)
    }
}

/// Hermitian operator with its spectrum computed once.
#[derive(Clone, Debug)]
pub struct HamiltonianOp {
    matrix: CMatrix,
    spectrum: Spectrum,
}

impl HamiltonianOp {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let spectrum = eigh(&matrix)?;
        Ok(HamiltonianOp { matrix, spectrum })
    }

    pub fn diagonal(levels: &[f64]) -> Result<Self> {
        HamiltonianOp::new(real_diag(levels))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    /// Energy levels, ascending, with multiplicity.
    pub fn levels(&self) -> &[f64] {
        &self.spectrum.eigenvalues
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ground_energy(&self) -> f64 {
        self.spectrum.min()
    }

    /// Number of levels within the degeneracy tolerance of the ground energy.
    pub fn ground_degeneracy(&self) -> usize {
        let levels = self.levels();
        let scale = levels.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let e0 = self.ground_energy();
        levels
            .iter()
            .take_while(|&&e| e - e0 <= 1e-10 * scale)
            .count()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        HamiltonianOp::new(MatrixFile::load(path)?.to_matrix()?)
    }
}

/// Unit-norm state vector.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    amplitudes: CVector,
}

impl PureState {
    pub fn new(amplitudes: CVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > STATE_TOL {
            return Err(Error::Validation(format!(
                "state vector norm is {norm}, expected 1"
            )));
        }
        Ok(PureState { amplitudes })
    }

    pub fn normalized(amplitudes: CVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Validation("cannot normalize a zero vector".into()));
        }
        Ok(PureState {
            amplitudes: amplitudes / c64(norm, 0.0),
        })
    }

    pub fn basis(d: usize, k: usize) -> Result<Self> {
        if k >= d {
            return Err(Error::Domain(format!(
                "basis index {k} out of range for dim {d}"
            )));
        }
        let mut v = CVector::zeros(d);
        v[k] = c64(1.0, 0.0);
        Ok(PureState { amplitudes: v })
    }

    pub fn random(d: usize, rng: &mut SeededRng) -> Self {
        let v = CVector::from_fn(d, |_, _| rng.complex_gaussian());
        PureState::normalized(v).expect("Gaussian vector is nonzero")
    }

    pub(crate) fn from_trusted(amplitudes: CVector) -> Self {
        PureState { amplitudes }
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix::from_pure(self)
    }
}

/// JSON matrix layout: `{"dim": d, "re": [...], "im": [...]}`, row-major.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MatrixFile {
    pub dim: usize,
    pub re: Vec<f64>,
    #[serde(default)]
    pub im: Vec<f64>,
}

impl MatrixFile {
    pub fn from_matrix(m: &CMatrix) -> Self {
        let d = m.nrows();
        let mut re = Vec::with_capacity(d * d);
        let mut im = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                re.push(m[(i, j)].re);
                im.push(m[(i, j)].im);
            }
        }
        MatrixFile { dim: d, re, im }
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        let n = self.dim * self.dim;
        if self.dim == 0 || self.re.len() != n || !(self.im.is_empty() || self.im.len() == n) {
            return Err(Error::Validation(format!(
                "matrix file declares dim {} but has {} real and {} imaginary entries",
                self.dim,
                self.re.len(),
                self.im.len()
            )));
        }
        let im = |k: usize| self.im.get(k).copied().unwrap_or(0.0);
        Ok(CMatrix::from_fn(self.dim, self.dim, |i, j| {
            let k = i * self.dim + j;
            c64(self.re[k], im(k))
        }))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub(crate) fn hermitize(m: &mut CMatrix) {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)].im = 0.0;
        for j in (i + 1)..n {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// `-sum p ln p` over a probability spectrum, `0 ln 0 = 0`.
pub fn spectral_entropy(values: &[f64]) -> f64 {
    values
        .iter()
        .filter(|&&p| p > ENTROPY_CUTOFF)
        .map(|&p| -p * p.ln())
        .sum()
}

/// Von Neumann entropy in nats.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    spectral_entropy(&rho.eigenvalues())
}

/// `Re tr(H rho)`.
pub fn mean_energy(rho: &DensityMatrix, h: &HamiltonianOp) -> Result<f64> {
    check_dim(h.dim(), rho.dim())?;
    let e = trace_product(h.matrix(), rho.matrix());
    if e.im.abs() > STATE_TOL * e.re.abs().max(1.0) {
        return Err(Error::Validation(format!(
            "tr(H rho) has imaginary part {:e}",
            e.im
        )));
    }
    Ok(e.re)
}

/// `<psi|H|psi>`.
pub fn pure_mean_energy(psi: &PureState, h: &HamiltonianOp) -> Result<f64> {
    check_dim(h.dim(), psi.dim())?;
    let v = psi.amplitudes();
    Ok(v.dotc(&(h.matrix() * v)).re)
}

/// `exp(-i H t) psi` through the cached spectrum.
pub fn evolve(psi: &PureState, h: &HamiltonianOp, t: f64) -> Result<PureState> {
    check_dim(h.dim(), psi.dim())?;
    let spec = h.spectrum();
    let coeffs = spec.eigenvectors.adjoint() * psi.amplitudes();
    Ok(PureState::from_trusted(evolve_coefficients(
        spec, &coeffs, t,
    )))
}

/// `V diag(exp(-i lambda t)) c` for eigenbasis coefficients `c`.
pub fn evolve_coefficients(spec: &Spectrum, coeffs: &CVector, t: f64) -> CVector {
    let phased = CVector::from_iterator(
        coeffs.len(),
        coeffs
            .iter()
            .zip(&spec.eigenvalues)
            .map(|(c, &e)| c * C64::from_polar(1.0, -e * t)),
    );
    &spec.eigenvectors * phased
}

pub fn tensor_power(rho: &DensityMatrix, n: usize) -> Result<DensityMatrix> {
    tensor_power_capped(rho, n, DEFAULT_TENSOR_CAP)
}

pub fn tensor_power_capped(rho: &DensityMatrix, n: usize, cap: usize) -> Result<DensityMatrix> {
    if n == 0 {
        return Err(Error::Domain("tensor power needs N >= 1".into()));
    }
    let size = (rho.dim() as u128).saturating_pow(n as u32);
    if size > cap as u128 {
        return Err(Error::CapExceeded {
            size,
            cap: cap as u128,
            hint: "use finite_n_min_energy, which works on eigenvalue multisets instead of d^N matrices",
        });
    }
    let mut acc = rho.matrix().clone();
    for _ in 1..n {
        acc = kron(&acc, rho.matrix());
    }
    Ok(DensityMatrix::from_trusted(acc))
}
