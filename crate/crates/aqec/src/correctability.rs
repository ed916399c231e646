//! Exact and perturbed Knill-Laflamme checking, plus the exact
//! algebra-commutant condition.

use crate::channel::{ChannelRep, CodeIsometry};
use crate::error::{AqecError, Result};
use crate::fidelity::{bures_from_fidelity, fidelity_mats, purification_matrix, MinimizeCfg};
use crate::matops::{cr, herm_eig, identity, trace, zeros, CMat, DensityMatrix};

/// ε below this bound counts as exactly correctable.
pub const EXACT_TOL: f64 = 1e-9;

/// Outcome of the perturbed Knill-Laflamme analysis.
#[derive(Debug, Clone)]
pub struct KLReport {
    /// Coefficient matrix λ_ij = Tr(σ E_i†E_j); PSD, unit trace for
    /// trace-preserving noise.
    pub lambda: CMat,
    /// Perturbation operators compressed to the code,
    /// B_ij = V†E_i†E_jV - λ_ij·I.
    pub b_ops: Vec<Vec<CMat>>,
    /// Worst-case Bures distance d(Λ+B, Λ).
    pub epsilon: f64,
    /// True iff epsilon ≤ `EXACT_TOL`.
    pub exact: bool,
    /// The state defining the λ guess (on the physical space).
    pub sigma_used: DensityMatrix,
}

fn check_code_noise(code: &CodeIsometry, noise: &ChannelRep) -> Result<()> {
    if noise.dim_in != code.dim_physical || noise.dim_out != code.dim_physical {
        return Err(AqecError::BadDims(format!(
            "noise acts on {}, code physical space is {}",
            noise.dim_in, code.dim_physical
        )));
    }
    Ok(())
}

/// Exact Knill-Laflamme check: P E_i†E_j P = λ_ij P with
/// λ_ij = Tr(P E_i†E_j P)/Tr(P). Passes iff the largest Frobenius
/// residual over (i,j) stays within `tol`.
pub fn kl_check_exact(
    code: &CodeIsometry,
    noise: &ChannelRep,
    tol: f64,
) -> Result<(bool, CMat)> {
    check_code_noise(code, noise)?;
    let p = code.projector();
    let k = noise.kraus.len();
    let tr_p = code.dim_logical as f64;
    let mut lambda = zeros(k, k);
    let mut passes = true;
    for i in 0..k {
        for j in 0..k {
            let t = &p * noise.kraus[i].adjoint() * &noise.kraus[j] * &p;
            let lam = trace(&t) / cr(tr_p);
            lambda[(i, j)] = lam;
            let residual = crate::matops::frob_dist(&t, &(&p * lam));
            if residual > tol {
                passes = false;
            }
        }
    }
    Ok((passes, lambda))
}

/// A linear map ρ ↦ Σ_ij Tr(ρ G_ij)|i⟩⟨j| given by coefficient
/// operators on the logical space; Λ and Λ+B both take this form.
struct GramMap {
    ops: Vec<CMat>, // row-major (i, j)
    env_dim: usize,
    dim_in: usize,
}

impl GramMap {
    fn entry_op(&self, i: usize, j: usize) -> &CMat {
        &self.ops[i * self.env_dim + j]
    }

    fn apply(&self, rho: &CMat) -> CMat {
        let mut out = zeros(self.env_dim, self.env_dim);
        for i in 0..self.env_dim {
            for j in 0..self.env_dim {
                out[(i, j)] = trace(&(rho * self.entry_op(i, j)));
            }
        }
        out
    }

    /// (map ⊗ id)(|ψ⟩⟨ψ|) for a purification in matrix form; block
    /// (i,j) is the reference-space matrix (Ψ† G_ij Ψ)ᵀ.
    fn lifted(&self, psi: &CMat) -> CMat {
        let d_ref = psi.ncols();
        let dim = self.env_dim * d_ref;
        let mut out = zeros(dim, dim);
        for i in 0..self.env_dim {
            for j in 0..self.env_dim {
                let block = (psi.adjoint() * self.entry_op(i, j) * psi).transpose();
                for r in 0..d_ref {
                    for r2 in 0..d_ref {
                        out[(i * d_ref + r, j * d_ref + r2)] = block[(r, r2)];
                    }
                }
            }
        }
        out
    }
}

/// Perturbed Knill-Laflamme residual. With λ_ij = Tr(σ E_i†E_j) and
/// B_ij = V†E_i†E_jV - λ_ij·I, the map Λ+B reproduces the
/// complementary channel of the noise composed with the encoding, and
/// ε = d(Λ+B, Λ) is the worst-case Bures distance to the unperturbed
/// constant map.
pub fn kl_residual(
    code: &CodeIsometry,
    noise: &ChannelRep,
    sigma: Option<&DensityMatrix>,
    cfg: &MinimizeCfg,
) -> Result<KLReport> {
    check_code_noise(code, noise)?;
    let d = code.dim_logical;
    let sigma_used = match sigma {
        Some(s) => {
            if s.dim() != code.dim_physical {
                return Err(AqecError::BadDims(format!(
                    "sigma dim {} vs physical {}",
                    s.dim(),
                    code.dim_physical
                )));
            }
            s.clone()
        }
        None => {
            let enc = &code.v * identity(d) * cr(1.0 / d as f64) * code.v.adjoint();
            DensityMatrix::new(crate::matops::herm_part(&enc))?
        }
    };

    let k = noise.kraus.len();
    let mut lambda = zeros(k, k);
    let mut b_ops: Vec<Vec<CMat>> = Vec::with_capacity(k);
    for i in 0..k {
        let mut row = Vec::with_capacity(k);
        for j in 0..k {
            let eiej = noise.kraus[i].adjoint() * &noise.kraus[j];
            let lam = trace(&(sigma_used.matrix() * &eiej));
            lambda[(i, j)] = lam;
            row.push(code.compress(&eiej) - identity(d) * lam);
        }
        b_ops.push(row);
    }

    // λ must be a density-operator coefficient matrix.
    let (vals, _) = herm_eig(&lambda);
    let min_eig = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_eig < -1e-9 {
        return Err(AqecError::BadLambda(min_eig));
    }

    // Build the two Gram maps. The output entry (i,j) carries the
    // transposed coefficients so that Λ+B matches N̂∘E entrywise:
    // entry (i,j) of N̂(VρV†) is Tr(ρ V†E_j†E_iV).
    let mut lam_ops = Vec::with_capacity(k * k);
    let mut full_ops = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k {
            let flip = lambda[(j, i)];
            lam_ops.push(identity(d) * flip);
            full_ops.push(identity(d) * flip + &b_ops[j][i]);
        }
    }
    let lam_map = GramMap {
        ops: lam_ops,
        env_dim: k,
        dim_in: d,
    };
    let full_map = GramMap {
        ops: full_ops,
        env_dim: k,
        dim_in: d,
    };

    let (_, fmin, _, _) = crate::fidelity::minimize_over_states(
        |rho| {
            let psi = purification_matrix(rho);
            fidelity_mats(&full_map.lifted(&psi), &lam_map.lifted(&psi))
        },
        lam_map.dim_in,
        cfg,
    );
    let epsilon = bures_from_fidelity(fmin.min(1.0));

    Ok(KLReport {
        lambda,
        b_ops,
        epsilon,
        exact: epsilon <= EXACT_TOL,
        sigma_used,
    })
}

/// Exact correctability condition relative to an algebra:
/// [A, V†E_i†E_jV] = 0 for every generator A.
pub fn algebra_check(
    noise: &ChannelRep,
    code: &CodeIsometry,
    algebra_generators: &[CMat],
    tol: f64,
) -> Result<bool> {
    check_code_noise(code, noise)?;
    let d = code.dim_logical;
    for a in algebra_generators {
        if a.nrows() != d || a.ncols() != d {
            return Err(AqecError::BadDims(format!(
                "generator is {}x{}, logical space is {}",
                a.nrows(),
                a.ncols(),
                d
            )));
        }
    }
    let k = noise.kraus.len();
    let mut max_comm: f64 = 0.0;
    for i in 0..k {
        for j in 0..k {
            let m = code.compress(&(noise.kraus[i].adjoint() * &noise.kraus[j]));
            for a in algebra_generators {
                let comm = a * &m - &m * a;
                max_comm = max_comm.max(crate::matops::frob_norm(&comm));
            }
        }
    }
    Ok(max_comm <= tol)
}

/// The Gram-type action of Λ+B on a bare logical state, exposed for
/// the index-order consistency test and the report serialization.
pub fn perturbed_map_action(report: &KLReport, rho: &CMat) -> CMat {
    let k = report.lambda.nrows();
    let d = rho.nrows();
    let mut ops = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k {
            ops.push(identity(d) * report.lambda[(j, i)] + &report.b_ops[j][i]);
        }
    }
    let map = GramMap {
        ops,
        env_dim: k,
        dim_in: d,
    };
    map.apply(rho)
}
