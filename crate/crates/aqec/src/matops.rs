//! Dense complex-matrix primitives shared by every other module:
//! Kronecker products, partial traces, Hermitian eigendecomposition,
//! PSD square roots, polar decomposition, and the trace norm.
//!
//! Everything operates on `DMatrix<Complex64>` at the desk scale this
//! crate targets (dimensions up to a few hundred); all values are
//! immutable after construction and every function is pure.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{AqecError, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Maximum allowed deviation from Hermiticity.
pub const TOL_HERM: f64 = 1e-10;
/// Eigenvalues above `-TOL_PSD` count as nonnegative; anything in
/// `[-TOL_PSD, 0)` is clamped to zero before taking square roots.
pub const TOL_PSD: f64 = 1e-9;
/// Frobenius-norm tolerance for matrix equality checks.
pub const TOL_EQ: f64 = 1e-8;

/// Shorthand complex constructor.
#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Real number as a complex scalar.
#[inline]
pub fn cr(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity(dim: usize) -> CMat {
    CMat::identity(dim, dim)
}

pub fn zeros(rows: usize, cols: usize) -> CMat {
    CMat::zeros(rows, cols)
}

/// Computational basis column vector |k⟩.
pub fn basis_vec(dim: usize, k: usize) -> CVec {
    let mut v = CVec::zeros(dim);
    v[k] = cr(1.0);
    v
}

/// Outer product |a⟩⟨b|.
pub fn outer(a: &CVec, b: &CVec) -> CMat {
    a * b.adjoint()
}

pub fn frob_norm(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn frob_dist(a: &CMat, b: &CMat) -> f64 {
    frob_norm(&(a - b))
}

/// Largest absolute deviation from Hermiticity, max_ij |m_ij - conj(m_ji)|.
pub fn herm_deviation(m: &CMat) -> f64 {
    let mut dev: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// Hermitian part (m + m†)/2.
pub fn herm_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * cr(0.5)
}

pub fn trace(m: &CMat) -> Complex64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

/// Kronecker product a ⊗ b; dimensions multiply.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Which tensor factor `partial_trace` removes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceSide {
    First,
    Second,
}

/// Partial trace of a square matrix on a bipartite space with factor
/// dimensions `dims = (d1, d2)`, index flattening (i, j) -> i*d2 + j.
pub fn partial_trace(m: &CMat, dims: (usize, usize), which: TraceSide) -> Result<CMat> {
    let (d1, d2) = dims;
    let n = d1 * d2;
    if m.nrows() != n || m.ncols() != n {
        return Err(AqecError::BadTensorDims(format!(
            "matrix is {}x{}, expected {}x{} from factors {}x{}",
            m.nrows(),
            m.ncols(),
            n,
            n,
            d1,
            d2
        )));
    }
    match which {
        TraceSide::First => {
            let mut out = zeros(d2, d2);
            for k in 0..d2 {
                for l in 0..d2 {
                    let mut s = cr(0.0);
                    for a in 0..d1 {
                        s += m[(a * d2 + k, a * d2 + l)];
                    }
                    out[(k, l)] = s;
                }
            }
            Ok(out)
        }
        TraceSide::Second => {
            let mut out = zeros(d1, d1);
            for a in 0..d1 {
                for b in 0..d1 {
                    let mut s = cr(0.0);
                    for k in 0..d2 {
                        s += m[(a * d2 + k, b * d2 + k)];
                    }
                    out[(a, b)] = s;
                }
            }
            Ok(out)
        }
    }
}

/// Eigendecomposition of a Hermitian matrix. The input is symmetrized
/// first so callers may pass matrices that are Hermitian only up to
/// rounding. Returns (eigenvalues, eigenvectors-as-columns).
pub fn herm_eig(m: &CMat) -> (Vec<f64>, CMat) {
    let se = herm_part(m).symmetric_eigen();
    let vals = se.eigenvalues.iter().copied().collect();
    (vals, se.eigenvectors)
}

/// PSD square root via eigendecomposition. Eigenvalues in
/// `[-TOL_PSD, 0)` are clamped to zero; anything below `-TOL_PSD`
/// is rejected as "not-psd".
pub fn psd_sqrt(h: &CMat) -> Result<CMat> {
    let (vals, vecs) = herm_eig(h);
    let mut roots = Vec::with_capacity(vals.len());
    for &v in &vals {
        if v < -TOL_PSD {
            return Err(AqecError::NotPsd(v));
        }
        roots.push(v.max(0.0).sqrt());
    }
    Ok(rebuild_from_eig(&roots, &vecs))
}

/// Σ_k f_k |v_k⟩⟨v_k| for real weights `f` and eigenvector columns.
pub fn rebuild_from_eig(weights: &[f64], vecs: &CMat) -> CMat {
    let d = vecs.nrows();
    let mut out = zeros(d, d);
    for (k, &w) in weights.iter().enumerate() {
        if w != 0.0 {
            let col = vecs.column(k);
            for i in 0..d {
                for j in 0..d {
                    out[(i, j)] += cr(w) * col[i] * col[j].conj();
                }
            }
        }
    }
    out
}

// Singular values below this fraction of the largest are treated as
// zero when completing polar factors.
const POLAR_RANK_CUT: f64 = 1e-12;

/// Polar decomposition x = w·p of a square matrix, with p = √(x†x) PSD
/// and w unitary. Among the unitary factors (which are only determined
/// on the range of p) this picks the completion closest to the identity
/// on ker(p), so polar(0) = (I, 0).
pub fn polar(x: &CMat) -> (CMat, CMat) {
    let d = x.nrows();
    assert_eq!(d, x.ncols(), "polar requires a square matrix");
    if d == 0 {
        return (zeros(0, 0), zeros(0, 0));
    }
    let svd = x.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd with u");
    let vt = svd.v_t.as_ref().expect("svd with v_t");
    let v = vt.adjoint();
    let sig = &svd.singular_values;
    let cut = sig.iter().cloned().fold(0.0_f64, f64::max) * POLAR_RANK_CUT;

    // p = V Σ V†
    let mut p = zeros(d, d);
    for k in 0..d {
        let col = v.column(k);
        for i in 0..d {
            for j in 0..d {
                p[(i, j)] += cr(sig[k]) * col[i] * col[j].conj();
            }
        }
    }

    let kept: Vec<usize> = (0..d).filter(|&k| sig[k] > cut).collect();
    let null: Vec<usize> = (0..d).filter(|&k| sig[k] <= cut).collect();

    let mut w = zeros(d, d);
    for &k in &kept {
        let uc = u.column(k);
        let vc = v.column(k);
        for i in 0..d {
            for j in 0..d {
                w[(i, j)] += uc[i] * vc[j].conj();
            }
        }
    }
    if !null.is_empty() {
        // Align the free unitary block with the identity: the closest
        // rotation from ker(p) onto range(x)^⊥ is the unitary factor of
        // U0† V0.
        let k = null.len();
        let mut u0 = zeros(d, k);
        let mut v0 = zeros(d, k);
        for (c_idx, &kk) in null.iter().enumerate() {
            u0.set_column(c_idx, &u.column(kk));
            v0.set_column(c_idx, &v.column(kk));
        }
        let m = u0.adjoint() * &v0;
        let msvd = m.svd(true, true);
        let align = msvd.u.as_ref().unwrap() * msvd.v_t.as_ref().unwrap();
        w += u0 * align * v0.adjoint();
    }
    (w, herm_part(&p))
}

/// Trace norm: sum of singular values (rectangular inputs allowed).
pub fn trace_norm(x: &CMat) -> f64 {
    x.clone().singular_values().iter().sum()
}

/// Positive semidefinite unit-trace matrix. Checked on construction:
/// Hermitian within `TOL_HERM`, eigenvalues ≥ -`TOL_PSD`/10, trace
/// within `TOL_HERM` of one.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: CMat,
}

impl DensityMatrix {
    pub fn new(mat: CMat) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(AqecError::BadDims(format!(
                "density matrix must be square, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        if mat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(AqecError::BadParam("non-finite matrix entry".into()));
        }
        let dev = herm_deviation(&mat);
        if dev > TOL_HERM {
            return Err(AqecError::BadParam(format!(
                "density matrix not Hermitian (deviation {dev:.3e})"
            )));
        }
        let tr = trace(&mat);
        if (tr.re - 1.0).abs() > TOL_HERM || tr.im.abs() > TOL_HERM {
            return Err(AqecError::BadParam(format!(
                "density matrix trace {tr} is not 1"
            )));
        }
        let (vals, _) = herm_eig(&mat);
        if let Some(&min) = vals
            .iter()
            .min_by(|a, b| a.partial_cmp(b).unwrap())
            .filter(|&&v| v < -TOL_HERM)
        {
            return Err(AqecError::NotPsd(min));
        }
        Ok(Self { mat })
    }

    /// Construct ρ = G G† / Tr(G G†) without re-validating; PSD and unit
    /// trace hold by construction. Used on optimizer hot paths.
    pub fn from_factor(g: &CMat) -> Self {
        let gg = g * g.adjoint();
        let tr = trace(&gg).re;
        assert!(tr > 0.0, "factor must be nonzero");
        Self {
            mat: herm_part(&(gg * cr(1.0 / tr))),
        }
    }

    /// Pure state |ψ⟩⟨ψ| from a (not necessarily normalized) vector.
    pub fn pure(psi: &CVec) -> Self {
        let n2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        assert!(n2 > 0.0, "state vector must be nonzero");
        Self {
            mat: outer(psi, psi) * cr(1.0 / n2),
        }
    }

    pub fn basis_state(dim: usize, k: usize) -> Self {
        Self::pure(&basis_vec(dim, k))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            mat: identity(dim) * cr(1.0 / dim as f64),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    /// Eigendecomposition with eigenvalues clamped to [0, 1].
    pub fn eig(&self) -> (Vec<f64>, CMat) {
        let (vals, vecs) = herm_eig(&self.mat);
        (vals.into_iter().map(|v| v.clamp(0.0, 1.0)).collect(), vecs)
    }

    /// (1-eta) ρ + eta I/d, used to push rank-deficient states into the
    /// interior.
    pub fn floored(&self, eta: f64) -> Self {
        let d = self.dim();
        Self {
            mat: &self.mat * cr(1.0 - eta) + identity(d) * cr(eta / d as f64),
        }
    }
}
