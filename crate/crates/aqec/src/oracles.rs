//! Brute-force and iterative reference implementations used to certify
//! the main modules: sampled worst-case fidelity, see-saw recovery
//! optimization, and a numerical check of the recovery duality.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::channel::ChannelRep;
use crate::error::Result;
use crate::fidelity::{
    ent_fidelity_unchecked, fd_gradient, lifted_factors, lifted_output, mat_inner,
    minimize_over_states, psd_factor, purification_matrix, worst_case_fidelity, MinimizeCfg,
};
use crate::matops::{
    c, cr, herm_eig, herm_part, identity, kron, partial_trace, polar, psd_sqrt, trace_norm, zeros,
    CMat, DensityMatrix, TraceSide,
};

/// Random complex matrix with i.i.d. centered entries.
pub fn random_cmat<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    })
}

/// Haar-ish random unitary from the polar factor of a random matrix.
pub fn random_unitary<R: Rng>(rng: &mut R, dim: usize) -> CMat {
    let (w, _) = polar(&random_cmat(rng, dim, dim));
    w
}

/// Random density matrix ρ = GG†/Tr(GG†).
pub fn random_density<R: Rng>(rng: &mut R, dim: usize) -> DensityMatrix {
    DensityMatrix::from_factor(&random_cmat(rng, dim, dim))
}

/// Random trace-preserving channel: Gaussian Kraus seeds normalized by
/// the inverse square root of their effect sum.
pub fn random_channel<R: Rng>(
    rng: &mut R,
    dim_in: usize,
    dim_out: usize,
    n_kraus: usize,
) -> ChannelRep {
    assert!(n_kraus >= 1);
    loop {
        let seeds: Vec<CMat> = (0..n_kraus)
            .map(|_| random_cmat(rng, dim_out, dim_in))
            .collect();
        let mut effect = zeros(dim_in, dim_in);
        for s in &seeds {
            effect += s.adjoint() * s;
        }
        let Ok(root) = psd_sqrt(&effect) else {
            continue;
        };
        let Some(inv) = root.try_inverse() else {
            continue;
        };
        let kraus: Vec<CMat> = seeds.iter().map(|s| s * &inv).collect();
        if let Ok(chan) = ChannelRep::new(kraus) {
            if chan.trace_preserving {
                return chan;
            }
        }
    }
}

/// Deterministic per-case RNG for seeded suites.
pub fn case_rng(seed: u64, case: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(case))
}

/// Minimum of the entanglement fidelity over `samples` random density
/// matrices plus every computational basis state.
pub fn sampled_worst_case_fidelity(
    n: &ChannelRep,
    m: &ChannelRep,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    crate::fidelity::entanglement_fidelity(n, m, &DensityMatrix::maximally_mixed(n.dim_in))?;
    let mut rng = case_rng(seed, 0);
    let d = n.dim_in;
    let mut best = f64::INFINITY;
    for k in 0..d {
        let rho = DensityMatrix::basis_state(d, k);
        best = best.min(ent_fidelity_unchecked(n, m, &rho));
    }
    for _ in 0..samples {
        let rho = random_density(&mut rng, d);
        best = best.min(ent_fidelity_unchecked(n, m, &rho));
    }
    Ok(best)
}

/// Settings for the alternating (see-saw) recovery optimization.
#[derive(Debug, Clone)]
pub struct SeesawCfg {
    pub rounds: usize,
    pub restarts: usize,
    /// Projected-gradient ascent steps per round.
    pub ascent_steps: usize,
    pub seed: u64,
    /// Finite-difference step on the Choi parametrization.
    pub fd_step: f64,
    /// Settings for the inner worst-case input searches.
    pub state_cfg: MinimizeCfg,
    /// When set, the input state is held fixed instead of being
    /// minimized each round.
    pub fixed_state: Option<DensityMatrix>,
}

impl Default for SeesawCfg {
    fn default() -> Self {
        Self {
            rounds: 60,
            restarts: 4,
            ascent_steps: 6,
            seed: 0,
            fd_step: 1e-6,
            state_cfg: MinimizeCfg {
                random_starts: 4,
                tol: 1e-8,
                max_iters: 600,
                fd_step: 1e-6,
                seed: 0,
            },
            fixed_state: None,
        }
    }
}

/// Outcome of `seesaw_optimal_recovery`.
#[derive(Debug, Clone)]
pub struct SeesawReport {
    pub best_fidelity: f64,
    pub iterations: usize,
    pub restarts: usize,
    pub converged: bool,
    pub best_recovery: ChannelRep,
}

/// Apply a Choi matrix (ancilla-first convention) to the first factor
/// of a lifted state Y on in⊗ref.
fn apply_choi_lifted(choi: &CMat, y: &CMat, dim_in: usize, dim_out: usize, d_ref: usize) -> CMat {
    let dim = dim_out * d_ref;
    let mut z = zeros(dim, dim);
    for i in 0..dim_in {
        for ip in 0..dim_in {
            for o in 0..dim_out {
                for op in 0..dim_out {
                    let cc = choi[(i * dim_out + o, ip * dim_out + op)];
                    if cc.norm_sqr() == 0.0 {
                        continue;
                    }
                    for r in 0..d_ref {
                        for rp in 0..d_ref {
                            z[(o * d_ref + r, op * d_ref + rp)] +=
                                cc * y[(i * d_ref + r, ip * d_ref + rp)];
                        }
                    }
                }
            }
        }
    }
    z
}

/// Fidelity between a dense PSD output and a Kraus-factored target.
fn fidelity_dense_vs_factors(z: &CMat, us: &[CMat]) -> f64 {
    let wz = psd_factor(&herm_part(z));
    let d_ref = us[0].ncols();
    let dim_out = us[0].nrows();
    let m = CMat::from_fn(wz.ncols(), us.len(), |a, j| {
        let mut s = c(0.0, 0.0);
        for o in 0..dim_out {
            for r in 0..d_ref {
                s += wz[(o * d_ref + r, a)].conj() * us[j][(o, r)];
            }
        }
        s
    });
    trace_norm(&m)
}

/// Project a Hermitian matrix onto the set of Choi matrices of
/// trace-preserving channels: alternate PSD eigenvalue clipping with
/// the affine partial-trace correction.
pub fn project_choi(choi: &CMat, dim_in: usize, dim_out: usize) -> CMat {
    let mut c_mat = herm_part(choi);
    let id = identity(dim_in);
    for _ in 0..50 {
        // PSD clip.
        let (vals, vecs) = herm_eig(&c_mat);
        let clipped: Vec<f64> = vals.iter().map(|v| v.max(0.0)).collect();
        c_mat = crate::matops::rebuild_from_eig(&clipped, &vecs);
        // Affine correction toward Tr_out = I.
        let red = partial_trace(&c_mat, (dim_in, dim_out), TraceSide::Second)
            .expect("choi dims consistent");
        let defect = &id - &red;
        let defect_norm = crate::matops::frob_norm(&defect);
        c_mat += kron(&defect, &identity(dim_out)) * cr(1.0 / dim_out as f64);
        let (vals, _) = herm_eig(&c_mat);
        let min_eig = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        if defect_norm < 1e-10 && min_eig > -1e-10 {
            break;
        }
    }
    c_mat
}

// Hermitian basis indexing: p[i*n+i] is the diagonal, p[i*n+j] (i<j)
// the real part and p[j*n+i] the imaginary part of entry (i,j).
fn hermitian_basis_entry(k: usize, n: usize) -> (usize, usize, num_complex::Complex64) {
    let i = k / n;
    let j = k % n;
    if i == j {
        (i, j, cr(1.0))
    } else if i < j {
        (i, j, cr(1.0))
    } else {
        (j, i, c(0.0, 1.0))
    }
}

fn add_hermitian_basis(m: &mut CMat, k: usize, scale: f64) {
    let n = m.nrows();
    let (i, j, v) = hermitian_basis_entry(k, n);
    if i == j {
        m[(i, i)] += v * cr(scale);
    } else {
        m[(i, j)] += v * cr(scale);
        m[(j, i)] += v.conj() * cr(scale);
    }
}

/// Alternating optimization approximating max_R F(R∘N, M): the input
/// state is driven to the current worst case, then the recovery Choi
/// matrix takes projected-gradient ascent steps, repeatedly.
pub fn seesaw_optimal_recovery(
    n: &ChannelRep,
    m: &ChannelRep,
    cfg: &SeesawCfg,
) -> Result<SeesawReport> {
    if n.dim_in != m.dim_in {
        return Err(crate::error::AqecError::BadDims(format!(
            "channel inputs differ: {} vs {}",
            n.dim_in, m.dim_in
        )));
    }
    let r_in = n.dim_out;
    let r_out = m.dim_out;
    let nc = r_in * r_out;
    let d = n.dim_in;

    let mut best_fidelity = f64::NEG_INFINITY;
    let mut best_recovery: Option<ChannelRep> = None;
    let mut total_iterations = 0;
    let mut best_converged = false;

    let extract = |choi: &CMat| -> Result<ChannelRep> {
        ChannelRep::kraus_from_choi(choi, r_in, r_out, false)?.normalize_trace_preserving()
    };

    for restart in 0..cfg.restarts.max(1) {
        let mut rng = case_rng(cfg.seed, restart as u64 + 1);
        // The first restart warms up from the identity decoder when the
        // dimensions allow it; the rest are random.
        let mut choi = if restart == 0 && r_in == r_out {
            ChannelRep::identity(r_in).choi()
        } else {
            random_channel(&mut rng, r_in, r_out, (r_in * r_out).min(4)).choi()
        };
        let mut rho = cfg
            .fixed_state
            .clone()
            .unwrap_or_else(|| DensityMatrix::maximally_mixed(d));
        let mut stalled_rounds = 0;

        for round in 0..cfg.rounds {
            total_iterations += 1;
            // (a) worst-case input for the current recovery.
            if cfg.fixed_state.is_none() {
                let r_chan = extract(&choi)?;
                let corrected = ChannelRep::compose(&r_chan, n)?.pruned(1e-14);
                let mut state_cfg = cfg.state_cfg.clone();
                state_cfg.seed = cfg.state_cfg.seed.wrapping_add(round as u64);
                let f = worst_case_fidelity(&corrected, m, &state_cfg)?;
                rho = f.argmin_state.expect("search returns a state");
            }

            // (b) projected-gradient ascent on the Choi matrix at the
            // current state.
            let psi = purification_matrix(&rho);
            let y = lifted_output(n, &psi);
            let us = lifted_factors(m, &psi);
            let objective = |c_try: &CMat| {
                let z = apply_choi_lifted(c_try, &y, r_in, r_out, d);
                fidelity_dense_vs_factors(&z, &us)
            };

            let mut f0 = objective(&choi);
            let mut accepted_any = false;
            for _ in 0..cfg.ascent_steps {
                // Finite-difference gradient over the Hermitian basis.
                let mut grad = zeros(nc, nc);
                for k in 0..nc * nc {
                    let mut probe = choi.clone();
                    add_hermitian_basis(&mut probe, k, cfg.fd_step);
                    let fk = objective(&probe);
                    add_hermitian_basis(&mut grad, k, (fk - f0) / cfg.fd_step);
                }
                let gnorm = crate::matops::frob_norm(&grad);
                if gnorm < 1e-10 {
                    break;
                }
                let mut eta = 0.5 / gnorm.max(1.0);
                let mut accepted = false;
                for _ in 0..25 {
                    let trial = project_choi(&(&choi + &grad * cr(eta)), r_in, r_out);
                    let ft = objective(&trial);
                    if ft > f0 + 1e-12 {
                        choi = trial;
                        f0 = ft;
                        accepted = true;
                        accepted_any = true;
                        break;
                    }
                    eta *= 0.5;
                }
                if !accepted {
                    break;
                }
            }
            if accepted_any {
                stalled_rounds = 0;
            } else {
                stalled_rounds += 1;
                if stalled_rounds >= 2 && round > 0 {
                    break;
                }
            }
        }

        // Score the restart by the true worst-case fidelity.
        let r_chan = extract(&choi)?;
        let corrected = ChannelRep::compose(&r_chan, n)?.pruned(1e-14);
        let value = if let Some(rho_fixed) = &cfg.fixed_state {
            crate::fidelity::entanglement_fidelity(&corrected, m, rho_fixed)?
        } else {
            worst_case_fidelity(&corrected, m, &cfg.state_cfg)?.value
        };
        if value > best_fidelity {
            best_fidelity = value;
            best_recovery = Some(r_chan);
            best_converged = stalled_rounds >= 2;
        }
    }

    Ok(SeesawReport {
        best_fidelity,
        iterations: total_iterations,
        restarts: cfg.restarts.max(1),
        converged: best_converged,
        best_recovery: best_recovery.expect("at least one restart"),
    })
}

/// |max_R F(R∘N, M) - max_{R'} F(N̂, R'∘M̂)|, both sides approximated
/// by the see-saw; the duality asserts the gap vanishes.
pub fn theorem1_gap(
    n: &ChannelRep,
    m: &ChannelRep,
    m_complement: &ChannelRep,
    cfg: &SeesawCfg,
) -> Result<f64> {
    let primal = seesaw_optimal_recovery(n, m, cfg)?;
    // F(N̂, R'∘M̂) = F(R'∘M̂, N̂): the see-saw applies its recovery to
    // the first channel.
    let dual = seesaw_optimal_recovery(m_complement, &n.complementary(), cfg)?;
    Ok((primal.best_fidelity - dual.best_fidelity).abs())
}

/// Compare the optimizer's forward-difference gradient against a
/// centered-difference reference at half the step; returns the largest
/// relative deviation over components.
pub fn gradient_check<F>(objective: F, point: &DensityMatrix, step: f64) -> f64
where
    F: Fn(&DensityMatrix) -> f64,
{
    let g0 = psd_sqrt(point.matrix()).expect("density matrix is PSD");
    let dim = point.dim();
    let x0: Vec<f64> = {
        let mut x = vec![0.0; 2 * dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                let k = 2 * (i * dim + j);
                x[k] = g0[(i, j)].re;
                x[k + 1] = g0[(i, j)].im;
            }
        }
        x
    };
    let obj = |x: &[f64]| {
        let g = CMat::from_fn(dim, dim, |i, j| {
            let k = 2 * (i * dim + j);
            c(x[k], x[k + 1])
        });
        objective(&DensityMatrix::from_factor(&g))
    };
    let forward = fd_gradient(&obj, &x0, step);
    let h = step / 2.0;
    let mut centered = vec![0.0; x0.len()];
    let mut xp = x0.clone();
    for i in 0..x0.len() {
        xp[i] = x0[i] + h;
        let fp = obj(&xp);
        xp[i] = x0[i] - h;
        let fm = obj(&xp);
        xp[i] = x0[i];
        centered[i] = (fp - fm) / (2.0 * h);
    }
    // Deviation relative to the overall gradient scale; per-component
    // ratios blow up wherever the true gradient crosses zero.
    let scale = centered
        .iter()
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
        .max(1e-9);
    forward
        .iter()
        .zip(&centered)
        .map(|(f, c)| (f - c).abs() / scale)
        .fold(0.0_f64, f64::max)
}
