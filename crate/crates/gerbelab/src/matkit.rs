//! Dense complex linear algebra for small unitary matrices.
//!
//! Everything here targets n ≤ 6: Haar sampling via complex-Gaussian QR,
//! spectral decomposition of unitary matrices into eigenvalue/projector
//! pairs, and the first-order perturbation formula for the projectors.
//! Matrices are stored row-major as flat `Complex64` buffers; nothing is
//! optimised beyond what desk-scale verification needs.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

pub type C64 = Complex64;

/// Maximum matrix dimension accepted by the samplers.
pub const MAX_DIM: usize = 6;

/// Default spectral-gap threshold below which a decomposition is rejected.
pub const DEFAULT_EPS_GAP: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum MatError {
    #[error("dimension {0} out of range (1..={MAX_DIM})")]
    DimensionOutOfRange(usize),
    #[error("matrix is not unitary (‖gg† − I‖_F = {0:.3e})")]
    NotUnitary(f64),
    #[error("degenerate spectrum: gap {gap:.3e} ≤ ε_gap {eps_gap:.3e}")]
    DegenerateSpectrum { gap: f64, eps_gap: f64 },
    #[error("direction is not tangent: g⁻¹X has Hermitian part {0:.3e}")]
    NotTangent(f64),
    #[error("singular matrix in linear solve")]
    Singular,
}

// ──────────────────────────────────────────────────────────────────────
//  Matrices
// ──────────────────────────────────────────────────────────────────────

/// Square complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CMat {
    pub n: usize,
    pub data: Vec<C64>,
}

impl CMat {
    pub fn zeros(n: usize) -> Self {
        CMat { n, data: vec![C64::new(0.0, 0.0); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn diag(entries: &[C64]) -> Self {
        let n = entries.len();
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = entries[i];
        }
        m
    }

    pub fn scale(&self, s: C64) -> Self {
        CMat { n: self.n, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn add(&self, other: &CMat) -> Self {
        debug_assert_eq!(self.n, other.n);
        CMat {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &CMat) -> Self {
        debug_assert_eq!(self.n, other.n);
        CMat {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn mul(&self, other: &CMat) -> Self {
        debug_assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        let n = self.n;
        Self::from_fn(n, |i, j| self[(j, i)].conj())
    }

    pub fn trace(&self) -> C64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn commutator(a: &CMat, b: &CMat) -> CMat {
        a.mul(b).sub(&b.mul(a))
    }

    /// ‖g·g† − I‖_F, the unitarity defect.
    pub fn unitarity_defect(&self) -> f64 {
        self.mul(&self.adjoint()).sub(&CMat::identity(self.n)).frobenius()
    }

    /// Skew-Hermitian part (a − a†)/2.
    pub fn skew_part(&self) -> CMat {
        self.sub(&self.adjoint()).scale(C64::new(0.5, 0.0))
    }

    /// Matrix exponential via scaling-and-squaring on a plain Taylor series.
    /// Adequate for the skew-Hermitian arguments used by charts and
    /// parametrizations (norms of order 1).
    pub fn expm(&self) -> CMat {
        let n = self.n;
        let norm = self.frobenius();
        let k = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
        let scaled = self.scale(C64::new(1.0 / f64::powi(2.0, k as i32), 0.0));
        let mut sum = CMat::identity(n);
        let mut term = CMat::identity(n);
        for j in 1..=24 {
            term = term.mul(&scaled).scale(C64::new(1.0 / j as f64, 0.0));
            sum = sum.add(&term);
            if term.frobenius() < 1e-18 * sum.frobenius().max(1.0) {
                break;
            }
        }
        for _ in 0..k {
            sum = sum.mul(&sum);
        }
        sum
    }

    /// Solve A·X = B by LU with partial pivoting.
    pub fn solve(&self, rhs: &CMat) -> Result<CMat, MatError> {
        let n = self.n;
        debug_assert_eq!(n, rhs.n);
        let mut a = self.clone();
        let mut b = rhs.clone();
        for col in 0..n {
            let mut piv = col;
            let mut best = a[(col, col)].norm();
            for r in (col + 1)..n {
                let v = a[(r, col)].norm();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best < 1e-300 {
                return Err(MatError::Singular);
            }
            if piv != col {
                for j in 0..n {
                    a.data.swap(col * n + j, piv * n + j);
                    b.data.swap(col * n + j, piv * n + j);
                }
            }
            let d = a[(col, col)];
            for r in (col + 1)..n {
                let factor = a[(r, col)] / d;
                if factor == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in col..n {
                    let v = a[(col, j)];
                    a[(r, j)] -= factor * v;
                }
                for j in 0..n {
                    let v = b[(col, j)];
                    b[(r, j)] -= factor * v;
                }
            }
        }
        // back substitution
        let mut x = CMat::zeros(n);
        for col in 0..n {
            for r in (0..n).rev() {
                let mut s = b[(r, col)];
                for j in (r + 1)..n {
                    s -= a[(r, j)] * x[(j, col)];
                }
                x[(r, col)] = s / a[(r, r)];
            }
        }
        Ok(x)
    }

    pub fn inverse(&self) -> Result<CMat, MatError> {
        self.solve(&CMat::identity(self.n))
    }
}

impl std::ops::Index<(usize, usize)> for CMat {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.n + j]
    }
}

// ──────────────────────────────────────────────────────────────────────
//  The standard skew-Hermitian basis of u(n)
// ──────────────────────────────────────────────────────────────────────

/// Basis of u(n): iE_jj for each j, then for j<k the pair E_jk − E_kj and
/// i(E_jk + E_kj). Fixed enumeration order; `skew_coords` inverts it.
pub fn skew_basis(n: usize) -> Vec<CMat> {
    let mut basis = Vec::with_capacity(n * n);
    for j in 0..n {
        let mut t = CMat::zeros(n);
        t[(j, j)] = C64::new(0.0, 1.0);
        basis.push(t);
    }
    for j in 0..n {
        for k in (j + 1)..n {
            let mut t1 = CMat::zeros(n);
            t1[(j, k)] = C64::new(1.0, 0.0);
            t1[(k, j)] = C64::new(-1.0, 0.0);
            basis.push(t1);
            let mut t2 = CMat::zeros(n);
            t2[(j, k)] = C64::new(0.0, 1.0);
            t2[(k, j)] = C64::new(0.0, 1.0);
            basis.push(t2);
        }
    }
    basis
}

/// Coordinates of a skew-Hermitian matrix in the `skew_basis` order.
pub fn skew_coords(a: &CMat) -> Vec<f64> {
    let n = a.n;
    let mut c = Vec::with_capacity(n * n);
    for j in 0..n {
        c.push(a[(j, j)].im);
    }
    for j in 0..n {
        for k in (j + 1)..n {
            c.push(0.5 * (a[(j, k)].re - a[(k, j)].re));
            c.push(0.5 * (a[(j, k)].im + a[(k, j)].im));
        }
    }
    c
}

/// Rebuild a skew-Hermitian matrix from `skew_coords` coordinates.
pub fn skew_from_coords(n: usize, c: &[f64]) -> CMat {
    let mut a = CMat::zeros(n);
    let mut idx = 0;
    for j in 0..n {
        a[(j, j)] = C64::new(0.0, c[idx]);
        idx += 1;
    }
    for j in 0..n {
        for k in (j + 1)..n {
            let (x, y) = (c[idx], c[idx + 1]);
            idx += 2;
            a[(j, k)] = C64::new(x, y);
            a[(k, j)] = C64::new(-x, y);
        }
    }
    a
}

/// Random skew-Hermitian matrix with standard-normal basis coefficients.
pub fn random_skew(n: usize, rng: &mut impl Rng) -> CMat {
    let coords: Vec<f64> = (0..n * n).map(|_| rng.sample(StandardNormal)).collect();
    skew_from_coords(n, &coords)
}

// ──────────────────────────────────────────────────────────────────────
//  Domain types
// ──────────────────────────────────────────────────────────────────────

/// A point of U(n): the carrier of the group element g.
#[derive(Clone, Debug)]
pub struct UnitaryPoint {
    pub n: usize,
    pub m: CMat,
}

impl UnitaryPoint {
    pub fn new(m: CMat) -> Result<Self, MatError> {
        let n = m.n;
        if n == 0 || n > MAX_DIM {
            return Err(MatError::DimensionOutOfRange(n));
        }
        let defect = m.unitarity_defect();
        if defect >= 1e-12 {
            return Err(MatError::NotUnitary(defect));
        }
        Ok(UnitaryPoint { n, m })
    }
}

/// A tangent vector X at g; g⁻¹X must be skew-Hermitian.
#[derive(Clone, Debug)]
pub struct TangentVec {
    pub base: UnitaryPoint,
    pub dir: CMat,
}

impl TangentVec {
    pub fn new(base: UnitaryPoint, dir: CMat) -> Result<Self, MatError> {
        let a = base.m.adjoint().mul(&dir);
        let herm = a.add(&a.adjoint()).scale(C64::new(0.5, 0.0)).frobenius();
        if herm >= 1e-12 * (1.0 + a.frobenius()) {
            return Err(MatError::NotTangent(herm));
        }
        Ok(TangentVec { base, dir })
    }
}

/// Eigenvalues on the unit circle with their orthogonal projectors.
///
/// Eigenvalues are sorted by argument in (0, 2π], ascending; `gap` is the
/// minimal pairwise eigenvalue distance.
#[derive(Clone, Debug)]
pub struct SpectralData {
    pub eigenvalues: Vec<C64>,
    pub projectors: Vec<CMat>,
    pub gap: f64,
}

impl SpectralData {
    /// Σ λ_i P_i.
    pub fn reconstruct(&self) -> CMat {
        let n = self.projectors[0].n;
        let mut g = CMat::zeros(n);
        for (l, p) in self.eigenvalues.iter().zip(&self.projectors) {
            g = g.add(&p.scale(*l));
        }
        g
    }
}

/// Argument of a unit-modulus complex number, taken in (0, 2π].
pub fn arg_in_0_2pi(z: C64) -> f64 {
    let a = z.im.atan2(z.re);
    if a <= 0.0 {
        a + 2.0 * std::f64::consts::PI
    } else {
        a
    }
}

// ──────────────────────────────────────────────────────────────────────
//  Operations
// ──────────────────────────────────────────────────────────────────────

/// Haar-distributed unitary: complex Ginibre matrix, QR, then the Q columns
/// are rephased by the R diagonal so the distribution is exactly Haar.
/// Deterministic per seed.
pub fn haar_unitary(n: usize, seed: u64) -> Result<UnitaryPoint, MatError> {
    if n == 0 || n > MAX_DIM {
        return Err(MatError::DimensionOutOfRange(n));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let m = haar_from_rng(n, &mut rng)?;
    Ok(m)
}

/// Haar sample drawing from a caller-provided stream.
pub fn haar_from_rng(n: usize, rng: &mut impl Rng) -> Result<UnitaryPoint, MatError> {
    if n == 0 || n > MAX_DIM {
        return Err(MatError::DimensionOutOfRange(n));
    }
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let z = CMat::from_fn(n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * inv_sqrt2, im * inv_sqrt2)
    });
    // Modified Gram-Schmidt with one reorthogonalization pass.
    let mut q: Vec<Vec<C64>> = Vec::with_capacity(n);
    let mut rdiag = Vec::with_capacity(n);
    for col in 0..n {
        let mut v: Vec<C64> = (0..n).map(|r| z[(r, col)]).collect();
        for _ in 0..2 {
            for u in &q {
                let proj: C64 = u.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                for (vi, ui) in v.iter_mut().zip(u) {
                    *vi -= proj * ui;
                }
            }
        }
        let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        // R_kk = u_k† z_k, the coefficient of the original column on u_k.
        rdiag.push({
            let u: Vec<C64> = v.iter().map(|x| x / norm).collect();
            let r: C64 = u.iter().enumerate().map(|(r, a)| a.conj() * z[(r, col)]).sum();
            q.push(u);
            r
        });
    }
    let g = CMat::from_fn(n, |i, j| {
        let phase = rdiag[j] / rdiag[j].norm();
        q[j][i] * phase
    });
    UnitaryPoint::new(g)
}

/// Eigendecomposition of a unitary matrix into unit-circle eigenvalues and
/// orthogonal projectors. Fails with `DegenerateSpectrum` when the minimal
/// eigenvalue gap does not exceed `eps_gap`; callers are expected to
/// resample rather than perturb.
pub fn eig_unitary(g: &UnitaryPoint, eps_gap: f64) -> Result<SpectralData, MatError> {
    let n = g.n;
    // Diagonalize the Hermitian combination H_φ = (e^{iφ}g + e^{-iφ}g†)/2,
    // which shares eigenvectors with g for generic φ. Retry with a fixed
    // golden-angle sequence until reconstruction succeeds: a bad φ makes
    // cos(θ_i + φ) collide even though the spectrum of g is simple.
    let golden = 2.399963229728653;
    let mut best: Option<(f64, SpectralData)> = None;
    for attempt in 0..8 {
        let phi = golden * attempt as f64;
        let e = C64::from_polar(1.0, phi);
        let h = g.m.scale(e).add(&g.m.adjoint().scale(e.conj())).scale(C64::new(0.5, 0.0));
        let (_, vecs) = eig_hermitian(&h);
        let mut eigenvalues = Vec::with_capacity(n);
        let mut projectors = Vec::with_capacity(n);
        for k in 0..n {
            let v: Vec<C64> = (0..n).map(|r| vecs[(r, k)]).collect();
            // λ = v† g v
            let gv: Vec<C64> =
                (0..n).map(|r| (0..n).map(|c| g.m[(r, c)] * v[c]).sum()).collect();
            let lam: C64 = v.iter().zip(&gv).map(|(a, b)| a.conj() * b).sum();
            let lam = lam / lam.norm();
            eigenvalues.push(lam);
            projectors.push(CMat::from_fn(n, |i, j| v[i] * v[j].conj()));
        }
        // sort by argument in (0, 2π]
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            arg_in_0_2pi(eigenvalues[a])
                .partial_cmp(&arg_in_0_2pi(eigenvalues[b]))
                .unwrap()
        });
        let eigenvalues: Vec<C64> = order.iter().map(|&i| eigenvalues[i]).collect();
        let projectors: Vec<CMat> = order.iter().map(|&i| projectors[i].clone()).collect();
        let mut gap = f64::INFINITY;
        for i in 0..n {
            for j in (i + 1)..n {
                gap = gap.min((eigenvalues[i] - eigenvalues[j]).norm());
            }
        }
        let spec = SpectralData { eigenvalues, projectors, gap };
        let resid = spec.reconstruct().sub(&g.m).frobenius();
        if best.as_ref().is_none_or(|(r, _)| resid < *r) {
            best = Some((resid, spec));
        }
        if resid < 1e-13 * (n as f64) {
            break;
        }
    }
    let (resid, spec) = best.unwrap();
    if spec.gap <= eps_gap {
        return Err(MatError::DegenerateSpectrum { gap: spec.gap, eps_gap });
    }
    // With a simple spectrum the reconstruction must be tight; a large
    // residual would mean every φ attempt mixed eigenspaces.
    debug_assert!(resid < 1e-8, "spectral reconstruction residual {resid:.3e}");
    Ok(spec)
}

/// Directional derivative of the spectral projectors along the tangent V:
/// dP_k(V) = Σ_{j≠k} (P_j V P_k + P_k V P_j)/(λ_k − λ_j).
pub fn dp_projectors(spec: &SpectralData, v: &CMat) -> Vec<CMat> {
    let n = v.n;
    let m = spec.eigenvalues.len();
    let mut out = Vec::with_capacity(m);
    for k in 0..m {
        let mut dpk = CMat::zeros(n);
        for j in 0..m {
            if j == k {
                continue;
            }
            let denom = spec.eigenvalues[k] - spec.eigenvalues[j];
            let term = spec.projectors[j]
                .mul(v)
                .mul(&spec.projectors[k])
                .add(&spec.projectors[k].mul(v).mul(&spec.projectors[j]));
            dpk = dpk.add(&term.scale(C64::new(1.0, 0.0) / denom));
        }
        out.push(dpk);
    }
    out
}

/// dP with the spectrum recomputed from g (convenience wrapper).
pub fn dp(g: &UnitaryPoint, v: &TangentVec, eps_gap: f64) -> Result<Vec<CMat>, MatError> {
    let spec = eig_unitary(g, eps_gap)?;
    Ok(dp_projectors(&spec, &v.dir))
}

// ──────────────────────────────────────────────────────────────────────
//  Cyclic Jacobi for complex Hermitian matrices
// ──────────────────────────────────────────────────────────────────────

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
/// Returns (eigenvalues, V) with columns of V the orthonormal eigenvectors.
pub fn eig_hermitian(h: &CMat) -> (Vec<f64>, CMat) {
    let n = h.n;
    let mut a = h.clone();
    let mut v = CMat::identity(n);
    let scale = h.frobenius().max(1e-300);
    for _sweep in 0..40 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() < 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r < 1e-18 * scale {
                    continue;
                }
                let alpha = apq / r; // e^{iα}
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let tau = (aqq - app) / (2.0 * r);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // columns: col_p ← c·col_p − s̄·ᾱ·col_q style updates below
                let cs = C64::new(c, 0.0);
                let se = alpha * s; // s·e^{iα}
                // Apply J† A J with J_pp=c, J_pq=s·e^{iα}, J_qp=−s·e^{−iα}, J_qq=c.
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * cs - akq * se.conj();
                    a[(k, q)] = akp * se + akq * cs;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = apk * cs - aqk * se;
                    a[(q, k)] = apk * se.conj() + aqk * cs;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * cs - vkq * se.conj();
                    v[(k, q)] = vkp * se + vkq * cs;
                }
            }
        }
    }
    let eigs: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    (eigs, v)
}
