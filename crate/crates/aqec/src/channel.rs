//! Quantum channels as Kraus families, isometric encodings, the
//! complementary-channel construction, Choi matrices, and the standard
//! codes and noise models used throughout the crate.

use num_complex::Complex64;

use crate::error::{AqecError, Result};
use crate::matops::{
    basis_vec, c, cr, herm_eig, herm_part, identity, kron, outer, partial_trace, trace, zeros,
    CMat, CVec, DensityMatrix, TraceSide, TOL_EQ,
};

/// Completely positive map held as a finite family of Kraus matrices
/// E_i (each dim_out x dim_in) acting as ρ ↦ Σ_i E_i ρ E_i†.
#[derive(Debug, Clone)]
pub struct ChannelRep {
    pub dim_in: usize,
    pub dim_out: usize,
    pub kraus: Vec<CMat>,
    pub trace_preserving: bool,
}

impl ChannelRep {
    /// Build a channel from its Kraus family. Requires Σ E_i†E_i = I
    /// (trace preserving) or Σ E_i†E_i ≤ I (trace decreasing, flag
    /// false), both within `TOL_EQ`.
    pub fn new(kraus: Vec<CMat>) -> Result<Self> {
        let first = kraus
            .first()
            .ok_or_else(|| AqecError::BadParam("empty Kraus family".into()))?;
        let (dim_out, dim_in) = (first.nrows(), first.ncols());
        if dim_in == 0 || dim_out == 0 {
            return Err(AqecError::BadDims("zero-dimensional channel".into()));
        }
        for k in &kraus {
            if k.nrows() != dim_out || k.ncols() != dim_in {
                return Err(AqecError::BadDims(format!(
                    "Kraus shapes differ: {}x{} vs {}x{}",
                    k.nrows(),
                    k.ncols(),
                    dim_out,
                    dim_in
                )));
            }
        }
        let mut effect = zeros(dim_in, dim_in);
        for k in &kraus {
            effect += k.adjoint() * k;
        }
        let id = identity(dim_in);
        let tp_residual = crate::matops::frob_dist(&effect, &id);
        let trace_preserving = tp_residual <= TOL_EQ;
        if !trace_preserving {
            // Trace-decreasing is allowed: I - Σ E†E must be PSD.
            let (vals, _) = herm_eig(&(&id - &effect));
            let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            if min < -TOL_EQ {
                return Err(AqecError::BadParam(format!(
                    "Kraus family exceeds trace preservation (defect eigenvalue {min:.3e})"
                )));
            }
        }
        Ok(Self {
            dim_in,
            dim_out,
            kraus,
            trace_preserving,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim_in: dim,
            dim_out: dim,
            kraus: vec![identity(dim)],
            trace_preserving: true,
        }
    }

    /// True when the channel acts as the identity map (single Kraus
    /// element proportional to I with unit modulus).
    pub fn is_identity_action(&self) -> bool {
        if self.dim_in != self.dim_out || self.kraus.len() != 1 {
            return false;
        }
        let e = &self.kraus[0];
        let phase = e[(0, 0)];
        if (phase.norm() - 1.0).abs() > 1e-12 {
            return false;
        }
        crate::matops::frob_dist(e, &(identity(self.dim_in) * phase)) < 1e-12
    }

    /// Linear action Σ E_i m E_i† on an arbitrary matrix.
    pub fn apply_raw(&self, m: &CMat) -> Result<CMat> {
        if m.nrows() != self.dim_in || m.ncols() != self.dim_in {
            return Err(AqecError::BadDims(format!(
                "state is {}x{}, channel input is {}",
                m.nrows(),
                m.ncols(),
                self.dim_in
            )));
        }
        let mut out = zeros(self.dim_out, self.dim_out);
        for k in &self.kraus {
            out += k * m * k.adjoint();
        }
        Ok(out)
    }

    /// Channel action on a density matrix; the output is Hermitian PSD
    /// with trace ≤ 1 (= 1 when trace preserving).
    pub fn apply(&self, rho: &DensityMatrix) -> Result<CMat> {
        Ok(herm_part(&self.apply_raw(rho.matrix())?))
    }

    /// Composition outer ∘ inner with Kraus family {F_j E_i}.
    pub fn compose(outer: &ChannelRep, inner: &ChannelRep) -> Result<ChannelRep> {
        if inner.dim_out != outer.dim_in {
            return Err(AqecError::BadDims(format!(
                "cannot compose: inner output {} vs outer input {}",
                inner.dim_out, outer.dim_in
            )));
        }
        let mut kraus = Vec::with_capacity(outer.kraus.len() * inner.kraus.len());
        for f in &outer.kraus {
            for e in &inner.kraus {
                kraus.push(f * e);
            }
        }
        Ok(ChannelRep {
            dim_in: inner.dim_in,
            dim_out: outer.dim_out,
            kraus,
            trace_preserving: outer.trace_preserving && inner.trace_preserving,
        })
    }

    /// Complementary channel N̂(ρ) = Σ_ij Tr(E_i ρ E_j†) |i⟩⟨j|.
    ///
    /// The environment basis is the Kraus index basis in the order
    /// given; zero Kraus elements are kept so the output dimension is
    /// predictable. The Kraus family of N̂ has one element per row
    /// index of the original operators: (K_a)_{i,m} = (E_i)_{a,m}.
    pub fn complementary(&self) -> ChannelRep {
        let env_dim = self.kraus.len();
        let mut kraus = Vec::with_capacity(self.dim_out);
        for a in 0..self.dim_out {
            let mut k = zeros(env_dim, self.dim_in);
            for (i, e) in self.kraus.iter().enumerate() {
                for m in 0..self.dim_in {
                    k[(i, m)] = e[(a, m)];
                }
            }
            kraus.push(k);
        }
        ChannelRep {
            dim_in: self.dim_in,
            dim_out: env_dim,
            kraus,
            trace_preserving: self.trace_preserving,
        }
    }

    /// Constant channel ρ ↦ σ·Tr(ρ).
    pub fn constant(sigma: &DensityMatrix, dim_in: usize) -> ChannelRep {
        let (vals, vecs) = sigma.eig();
        let mut kraus = Vec::new();
        for (k, &p) in vals.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            let ek = vecs.column(k).clone_owned();
            for m in 0..dim_in {
                kraus.push(&ek * cr(p.sqrt()) * basis_vec(dim_in, m).adjoint());
            }
        }
        if kraus.is_empty() {
            kraus.push(zeros(sigma.dim(), dim_in));
        }
        ChannelRep {
            dim_in,
            dim_out: sigma.dim(),
            kraus,
            trace_preserving: true,
        }
    }

    /// Split a Stinespring isometry v: dim_in → B⊗E (with E of the
    /// given dimension) into the channel Tr_E(VρV†) and its
    /// complementary Tr_B(VρV†), both as Kraus families.
    pub fn from_isometry(v: &CMat, env_dim: usize) -> Result<(ChannelRep, ChannelRep)> {
        let rows = v.nrows();
        let dim_in = v.ncols();
        if env_dim == 0 || rows % env_dim != 0 {
            return Err(AqecError::BadTensorDims(format!(
                "output dimension {rows} does not factor with environment {env_dim}"
            )));
        }
        let dim_b = rows / env_dim;
        let mut kraus_n = vec![zeros(dim_b, dim_in); env_dim];
        let mut kraus_hat = vec![zeros(env_dim, dim_in); dim_b];
        for b in 0..dim_b {
            for e in 0..env_dim {
                for s in 0..dim_in {
                    let amp = v[(b * env_dim + e, s)];
                    kraus_n[e][(b, s)] = amp;
                    kraus_hat[b][(e, s)] = amp;
                }
            }
        }
        let n = ChannelRep::new(kraus_n)?;
        let n_hat = ChannelRep::new(kraus_hat)?;
        Ok((n, n_hat))
    }

    /// n-fold tensor power with all products of Kraus elements.
    pub fn tensor_power(&self, n: usize) -> Result<ChannelRep> {
        if n == 0 {
            return Err(AqecError::BadParam("tensor power needs n >= 1".into()));
        }
        let mut kraus = self.kraus.clone();
        for _ in 1..n {
            let mut next = Vec::with_capacity(kraus.len() * self.kraus.len());
            for a in &kraus {
                for b in &self.kraus {
                    next.push(kron(a, b));
                }
            }
            kraus = next;
        }
        Ok(ChannelRep {
            dim_in: self.dim_in.pow(n as u32),
            dim_out: self.dim_out.pow(n as u32),
            kraus,
            trace_preserving: self.trace_preserving,
        })
    }

    /// Whiten an almost-trace-preserving Kraus family onto the
    /// trace-preserving manifold: E_i ← E_i (ΣE†E)^(-1/2).
    pub fn normalize_trace_preserving(&self) -> Result<ChannelRep> {
        let mut effect = zeros(self.dim_in, self.dim_in);
        for k in &self.kraus {
            effect += k.adjoint() * k;
        }
        let root = crate::matops::psd_sqrt(&effect)?;
        let inv = root.try_inverse().ok_or_else(|| {
            AqecError::NotTracePreserving(f64::INFINITY)
        })?;
        ChannelRep::new(self.kraus.iter().map(|k| k * &inv).collect())
    }

    /// Copy with Kraus elements below `tol` (Frobenius) removed.
    pub fn pruned(&self, tol: f64) -> ChannelRep {
        let kraus: Vec<CMat> = self
            .kraus
            .iter()
            .filter(|k| crate::matops::frob_norm(k) > tol)
            .cloned()
            .collect();
        ChannelRep {
            dim_in: self.dim_in,
            dim_out: self.dim_out,
            kraus: if kraus.is_empty() {
                vec![zeros(self.dim_out, self.dim_in)]
            } else {
                kraus
            },
            trace_preserving: self.trace_preserving,
        }
    }

    /// Choi matrix (I ⊗ channel)(|Ω⟩⟨Ω|) with the unnormalized
    /// maximally entangled |Ω⟩ = Σ_k |k⟩|k⟩; ancilla factor first.
    pub fn choi(&self) -> CMat {
        let d = self.dim_in * self.dim_out;
        let mut out = zeros(d, d);
        for kmat in &self.kraus {
            let mut u = CVec::zeros(d);
            for k in 0..self.dim_in {
                for o in 0..self.dim_out {
                    u[k * self.dim_out + o] = kmat[(o, k)];
                }
            }
            out += outer(&u, &u);
        }
        out
    }

    /// Reconstruct a Kraus family from a Choi matrix (ancilla first).
    /// Eigenvalues below 1e-12 are dropped. With `require_tp` the
    /// partial trace over the output factor must equal the identity.
    pub fn kraus_from_choi(
        choi: &CMat,
        dim_in: usize,
        dim_out: usize,
        require_tp: bool,
    ) -> Result<ChannelRep> {
        let d = dim_in * dim_out;
        if choi.nrows() != d || choi.ncols() != d {
            return Err(AqecError::BadDims(format!(
                "Choi matrix is {}x{}, expected {}x{}",
                choi.nrows(),
                choi.ncols(),
                d,
                d
            )));
        }
        let (vals, vecs) = herm_eig(choi);
        if let Some(&min) = vals
            .iter()
            .min_by(|a, b| a.partial_cmp(b).unwrap())
            .filter(|&&v| v < -TOL_EQ)
        {
            return Err(AqecError::NotPsd(min));
        }
        if require_tp {
            let red = partial_trace(choi, (dim_in, dim_out), TraceSide::Second)?;
            let residual = crate::matops::frob_dist(&red, &identity(dim_in));
            if residual > TOL_EQ {
                return Err(AqecError::NotTracePreserving(residual));
            }
        }
        let mut kraus = Vec::new();
        for (l, &mu) in vals.iter().enumerate() {
            if mu <= 1e-12 {
                continue;
            }
            let v = vecs.column(l);
            let mut kmat = zeros(dim_out, dim_in);
            for k in 0..dim_in {
                for o in 0..dim_out {
                    kmat[(o, k)] = v[k * dim_out + o] * cr(mu.sqrt());
                }
            }
            kraus.push(kmat);
        }
        if kraus.is_empty() {
            kraus.push(zeros(dim_out, dim_in));
        }
        ChannelRep::new(kraus)
    }
}

/// Pauli matrices indexed I=0, X=1, Y=2, Z=3.
pub fn pauli(idx: usize) -> CMat {
    match idx {
        0 => identity(2),
        1 => CMat::from_row_slice(2, 2, &[cr(0.0), cr(1.0), cr(1.0), cr(0.0)]),
        2 => CMat::from_row_slice(2, 2, &[cr(0.0), c(0.0, -1.0), c(0.0, 1.0), cr(0.0)]),
        3 => CMat::from_row_slice(2, 2, &[cr(1.0), cr(0.0), cr(0.0), cr(-1.0)]),
        _ => panic!("pauli index must be 0..=3"),
    }
}

/// Kronecker product of a list of matrices, first factor most
/// significant.
pub fn kron_all(mats: &[CMat]) -> CMat {
    let mut out = mats[0].clone();
    for m in &mats[1..] {
        out = kron(&out, m);
    }
    out
}

/// Single-qubit Pauli embedded at position `q` of `n` qubits.
pub fn pauli_on(n: usize, q: usize, idx: usize) -> CMat {
    let mats: Vec<CMat> = (0..n).map(|i| pauli(if i == q { idx } else { 0 })).collect();
    kron_all(&mats)
}

fn check_prob(p: f64, name: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&p) || !p.is_finite() {
        return Err(AqecError::BadParam(format!("{name}={p} outside [0,1]")));
    }
    Ok(())
}

/// Single-qubit amplitude damping with E0 = diag(1, √(1-γ)) and
/// E1 = √γ |0⟩⟨1|.
pub fn amplitude_damping(gamma: f64) -> Result<ChannelRep> {
    check_prob(gamma, "gamma")?;
    let e0 = CMat::from_row_slice(2, 2, &[cr(1.0), cr(0.0), cr(0.0), cr((1.0 - gamma).sqrt())]);
    let e1 = CMat::from_row_slice(2, 2, &[cr(0.0), cr(gamma.sqrt()), cr(0.0), cr(0.0)]);
    ChannelRep::new(vec![e0, e1])
}

pub fn bit_flip(p: f64) -> Result<ChannelRep> {
    check_prob(p, "p")?;
    ChannelRep::new(vec![pauli(0) * cr((1.0 - p).sqrt()), pauli(1) * cr(p.sqrt())])
}

pub fn phase_flip(p: f64) -> Result<ChannelRep> {
    check_prob(p, "p")?;
    ChannelRep::new(vec![pauli(0) * cr((1.0 - p).sqrt()), pauli(3) * cr(p.sqrt())])
}

/// Depolarizing channel ρ ↦ (1-p)ρ + (p/3)(XρX + YρY + ZρZ); p = 3/4
/// sends every state to I/2.
pub fn depolarizing(p: f64) -> Result<ChannelRep> {
    check_prob(p, "p")?;
    let mut kraus = vec![pauli(0) * cr((1.0 - p).sqrt())];
    for idx in 1..4 {
        kraus.push(pauli(idx) * cr((p / 3.0).sqrt()));
    }
    ChannelRep::new(kraus)
}

/// Mixed-Pauli channel Σ_a w_a P_a ρ P_a† from weighted n-qubit Pauli
/// strings given as (qubit, pauli-index) lists; weights must sum to 1.
pub fn weighted_pauli_channel(
    n_qubits: usize,
    terms: &[(Vec<(usize, usize)>, f64)],
) -> Result<ChannelRep> {
    let mut kraus = Vec::with_capacity(terms.len());
    let mut total = 0.0;
    for (ops, w) in terms {
        if *w < 0.0 {
            return Err(AqecError::BadParam("negative Pauli weight".into()));
        }
        total += w;
        let mats: Vec<CMat> = (0..n_qubits)
            .map(|q| {
                let idx = ops
                    .iter()
                    .find(|(qq, _)| *qq == q)
                    .map(|(_, p)| *p)
                    .unwrap_or(0);
                pauli(idx)
            })
            .collect();
        kraus.push(kron_all(&mats) * cr(w.sqrt()));
    }
    if (total - 1.0).abs() > 1e-12 {
        return Err(AqecError::BadParam(format!(
            "Pauli weights sum to {total}, expected 1"
        )));
    }
    ChannelRep::new(kraus)
}

/// Isometry from a logical to a physical space together with the code
/// projector P = VV†.
#[derive(Debug, Clone)]
pub struct CodeIsometry {
    pub dim_logical: usize,
    pub dim_physical: usize,
    pub v: CMat,
}

impl CodeIsometry {
    pub fn new(v: CMat) -> Result<Self> {
        let (dim_physical, dim_logical) = (v.nrows(), v.ncols());
        if dim_logical == 0 || dim_physical < dim_logical {
            return Err(AqecError::BadDims(format!(
                "isometry must map into a space at least as large, got {dim_physical}x{dim_logical}"
            )));
        }
        let gram = v.adjoint() * &v;
        let residual = crate::matops::frob_dist(&gram, &identity(dim_logical));
        if residual > TOL_EQ {
            return Err(AqecError::BadParam(format!(
                "V†V differs from identity by {residual:.3e}"
            )));
        }
        Ok(Self {
            dim_logical,
            dim_physical,
            v,
        })
    }

    /// Code projector P = VV† on the physical space.
    pub fn projector(&self) -> CMat {
        &self.v * self.v.adjoint()
    }

    /// Encoding as a channel ρ ↦ VρV†.
    pub fn encoding_channel(&self) -> ChannelRep {
        ChannelRep {
            dim_in: self.dim_logical,
            dim_out: self.dim_physical,
            kraus: vec![self.v.clone()],
            trace_preserving: true,
        }
    }

    /// Compress a physical-space operator to the code: V† M V.
    pub fn compress(&self, m: &CMat) -> CMat {
        self.v.adjoint() * m * &self.v
    }
}

/// Three-qubit bit-flip repetition code |0⟩ ↦ |000⟩, |1⟩ ↦ |111⟩.
pub fn bit_flip_code() -> CodeIsometry {
    let mut v = zeros(8, 2);
    v[(0, 0)] = cr(1.0);
    v[(7, 1)] = cr(1.0);
    CodeIsometry::new(v).expect("valid isometry")
}

/// Four-qubit amplitude-damping code with codewords
/// (|0000⟩+|1111⟩)/√2 and (|0011⟩+|1100⟩)/√2.
pub fn leung_code() -> CodeIsometry {
    let s = cr(1.0 / 2f64.sqrt());
    let mut v = zeros(16, 2);
    v[(0b0000, 0)] = s;
    v[(0b1111, 0)] = s;
    v[(0b0011, 1)] = s;
    v[(0b1100, 1)] = s;
    CodeIsometry::new(v).expect("valid isometry")
}

/// The [[5,1,3]] code generated from its cyclic stabilizers
/// XZZXI, IXZZX, XIXZZ, ZXIXZ, with logical X⊗5.
pub fn five_qubit_code() -> CodeIsometry {
    let strings: [[usize; 5]; 4] = [
        [1, 3, 3, 1, 0],
        [0, 1, 3, 3, 1],
        [1, 0, 1, 3, 3],
        [3, 1, 0, 1, 3],
    ];
    let dim = 32;
    let mut proj = identity(dim);
    for s in &strings {
        let mats: Vec<CMat> = s.iter().map(|&i| pauli(i)).collect();
        let g = kron_all(&mats);
        proj = proj * (identity(dim) + g) * cr(0.5);
    }
    let zero_l = {
        let v = &proj * basis_vec(dim, 0);
        let n: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v * cr(1.0 / n)
    };
    let x_l = kron_all(&vec![pauli(1); 5]);
    let one_l = &x_l * &zero_l;
    let mut v = zeros(dim, 2);
    v.set_column(0, &zero_l);
    v.set_column(1, &one_l);
    CodeIsometry::new(v).expect("valid isometry")
}

/// A purification |ψ⟩ on S⊗R of a state ρ on S, with R ≅ S.
#[derive(Debug, Clone)]
pub struct PurifiedState {
    pub base: DensityMatrix,
    pub vector: CVec,
}

impl PurifiedState {
    /// Canonical purification Σ_k √p_k |e_k⟩⊗|k⟩ from the
    /// eigendecomposition of ρ.
    pub fn canonical(rho: &DensityMatrix) -> Self {
        let d = rho.dim();
        let (vals, vecs) = rho.eig();
        let mut psi = CVec::zeros(d * d);
        for (k, &p) in vals.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            let amp = cr(p.sqrt());
            let ek = vecs.column(k);
            for s in 0..d {
                psi[s * d + k] += amp * ek[s];
            }
        }
        // Renormalize away eigenvalue clamping noise.
        let n: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        psi *= cr(1.0 / n);
        Self {
            base: rho.clone(),
            vector: psi,
        }
    }

    /// Frobenius distance between Tr_R |ψ⟩⟨ψ| and the base state.
    pub fn reduction_residual(&self) -> f64 {
        let d = self.base.dim();
        let full = outer(&self.vector, &self.vector);
        let red = partial_trace(&full, (d, d), TraceSide::Second).expect("square by construction");
        crate::matops::frob_dist(&red, self.base.matrix())
    }
}

/// Gram entry Tr(E_i ρ E_j†) of a channel at a state; the entries of
/// the complementary-channel output.
pub fn gram_entry(chan: &ChannelRep, rho: &CMat, i: usize, j: usize) -> Complex64 {
    trace(&(&chan.kraus[i] * rho * chan.kraus[j].adjoint()))
}
