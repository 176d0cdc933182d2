//! Dense complex linear algebra: Hermitian eigendecomposition, norms,
//! Kronecker products, seeded random streams and Haar-random unitaries.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Absolute tolerance on `max |A - A^dagger|` for a matrix to count as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;

const LEX_TOL: f64 = 1e-12;

pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn real_diag(values: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_iterator(
        values.len(),
        values.iter().map(|&v| c64(v, 0.0)),
    ))
}

pub fn check_square(a: &CMatrix) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    Ok(a.nrows())
}

pub fn check_finite(a: &CMatrix) -> Result<()> {
    if a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::Validation(
            "matrix contains non-finite entries".into(),
        ))
    }
}

/// Largest entry of `|A - A^dagger|`.
pub fn max_asymmetry(a: &CMatrix) -> f64 {
    let n = a.nrows().min(a.ncols());
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn check_hermitian(a: &CMatrix) -> Result<()> {
    check_square(a)?;
    check_finite(a)?;
    let asym = max_asymmetry(a);
    if asym > HERMITIAN_TOL {
        return Err(Error::NotHermitian {
            max_asymmetry: asym,
        });
    }
    Ok(())
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Eigenvalues are ascending and column `j` of `eigenvectors` belongs to
/// eigenvalue `j`. Each eigenvector carries a fixed phase (its largest entry is
/// real and positive), and inside a run of eigenvalues closer than the
/// degeneracy tolerance the columns are ordered lexicographically.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `V diag(f(lambda)) V^dagger`.
    pub fn map_reconstruct(&self, f: impl Fn(f64) -> C64) -> CMatrix {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (j, &lam) in self.eigenvalues.iter().enumerate() {
            let w = f(lam);
            for z in scaled.column_mut(j).iter_mut() {
                *z *= w;
            }
        }
        scaled * v.adjoint()
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.map_reconstruct(|l| c64(l, 0.0))
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }
}

fn degeneracy_tol(values: &[f64]) -> f64 {
    let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    1e-10 * scale
}

fn lex_cmp(a: &[C64], b: &[C64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        if (x.re - y.re).abs() > LEX_TOL {
            return x.re.partial_cmp(&y.re).unwrap_or(Ordering::Equal);
        }
        if (x.im - y.im).abs() > LEX_TOL {
            return x.im.partial_cmp(&y.im).unwrap_or(Ordering::Equal);
        }
    }
    Ordering::Equal
}

fn fix_phase(col: &mut [C64]) {
    let mut best = 0;
    let mut best_mod = -1.0;
    for (k, z) in col.iter().enumerate() {
        let m = z.norm();
        if m > best_mod + LEX_TOL {
            best = k;
            best_mod = m;
        }
    }
    if best_mod > 0.0 {
        let phase = col[best].conj() / best_mod;
        for z in col.iter_mut() {
            *z *= phase;
        }
    }
}

/// Hermitian eigendecomposition with deterministic ordering.
pub fn eigh(a: &CMatrix) -> Result<Spectrum> {
    check_hermitian(a)?;
    let n = a.nrows();
    if n == 0 {
        return Ok(Spectrum {
            eigenvalues: Vec::new(),
            eigenvectors: CMatrix::zeros(0, 0),
        });
    }
    // Exact symmetrization so the solver sees a Hermitian input.
    let sym = (a + a.adjoint()) * c64(0.5, 0.0);
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 0)
        .ok_or_else(|| Error::Validation("eigensolver did not converge".into()))?;

    let mut columns: Vec<(f64, Vec<C64>)> = (0..n)
        .map(|j| {
            let mut col: Vec<C64> = eig.eigenvectors.column(j).iter().copied().collect();
            fix_phase(&mut col);
            (eig.eigenvalues[j], col)
        })
        .collect();
    columns.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(Ordering::Equal));

    let values: Vec<f64> = columns.iter().map(|c| c.0).collect();
    let tol = degeneracy_tol(&values);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && columns[end].0 - columns[end - 1].0 <= tol {
            end += 1;
        }
        if end - start > 1 {
            columns[start..end].sort_by(|x, y| lex_cmp(&x.1, &y.1));
        }
        start = end;
    }

    let eigenvalues = columns.iter().map(|c| c.0).collect();
    let eigenvectors = CMatrix::from_fn(n, n, |i, j| columns[j].1[i]);
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
    })
}

/// Eigenvalues only, ascending.
pub fn eigvalsh(a: &CMatrix) -> Result<Vec<f64>> {
    check_hermitian(a)?;
    let sym = (a + a.adjoint()) * c64(0.5, 0.0);
    let mut vals: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(|x, y| x.partial_cmp(y).unwrap_or(Ordering::Equal));
    Ok(vals)
}

/// Largest singular value.
pub fn operator_norm(a: &CMatrix) -> Result<f64> {
    check_square(a)?;
    check_finite(a)?;
    if a.nrows() == 0 {
        return Ok(0.0);
    }
    if max_asymmetry(a) <= HERMITIAN_TOL {
        let vals = eigvalsh(a)?;
        return Ok(vals.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }
    let gram = a.adjoint() * a;
    let vals = eigvalsh(&gram)?;
    Ok(vals.last().copied().unwrap_or(0.0).max(0.0).sqrt())
}

/// Sum of absolute eigenvalues of a Hermitian matrix.
pub fn trace_norm_hermitian(a: &CMatrix) -> Result<f64> {
    Ok(eigvalsh(a)?.iter().map(|v| v.abs()).sum())
}

/// `1/2 ||a - b||_1` for Hermitian `a`, `b`.
pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: b.nrows(),
        });
    }
    Ok(0.5 * trace_norm_hermitian(&(a - b))?)
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn trace(a: &CMatrix) -> C64 {
    a.diagonal().iter().sum()
}

/// `tr(a b)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// `max |U^dagger U - I|` entry.
pub fn unitarity_residual(u: &CMatrix) -> f64 {
    let n = u.ncols();
    let g = u.adjoint() * u;
    (&g - CMatrix::identity(n, n))
        .iter()
        .fold(0.0f64, |m, z| m.max(z.norm()))
}

/// Reproducible random stream identified by `(seed, stream_id)`.
#[derive(Clone, Debug)]
pub struct SeededRng {
    seed: u64,
    stream_id: u64,
    inner: ChaCha20Rng,
}

impl SeededRng {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha20Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        SeededRng {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Fresh stream with the same seed and a different id.
    pub fn substream(&self, stream_id: u64) -> Self {
        SeededRng::new(self.seed, stream_id)
    }

    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn gaussian(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Complex standard Gaussian with `E|z|^2 = 1`.
    pub fn complex_gaussian(&mut self) -> C64 {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        c64(self.gaussian() * s, self.gaussian() * s)
    }

    pub fn ginibre(&mut self, rows: usize, cols: usize) -> CMatrix {
        let mut m = CMatrix::zeros(rows, cols);
        for z in m.iter_mut() {
            *z = self.complex_gaussian();
        }
        m
    }

    /// Index drawn from a discrete distribution; `weights` need not be normalized.
    pub fn categorical(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        let mut r = self.uniform() * total;
        let mut last = 0;
        for (i, &w) in weights.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            last = i;
            if r < w {
                return i;
            }
            r -= w;
        }
        last
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Haar-random `d x d` unitary: QR of a complex Ginibre matrix with the phases
/// of `diag(R)` moved into `Q`.
pub fn haar_unitary(d: usize, rng: &mut SeededRng) -> Result<CMatrix> {
    if d == 0 {
        return Err(Error::Domain("Haar unitary needs dimension >= 1".into()));
    }
    let qr = rng.ginibre(d, d).qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        let rjj = r[(j, j)];
        let m = rjj.norm();
        if m > 0.0 {
            let phase = rjj / m;
            for z in q.column_mut(j).iter_mut() {
                *z *= phase;
            }
        }
    }
    Ok(q)
}

/// Random Hermitian matrix from the Gaussian unitary ensemble.
pub fn random_hermitian(d: usize, rng: &mut SeededRng) -> CMatrix {
    let g = rng.ginibre(d, d);
    (&g + g.adjoint()) * c64(0.5, 0.0)
}
