//! The doubly norm-constrained least-squares estimator
//!
//! ```text
//! minimize    sum_{l,k} (y_{l,k} - <B_{l,k}, X_k>)^2
//! subject to  ||X||_{inf,F} <= alpha,  ||X||_$ <= beta,
//! ```
//!
//! solved through the semidefinite characterization of the `$`-norm by an
//! ADMM that splits on an auxiliary PSD variable `Z` equal to the stacked
//! matrix `[[W1, X], [X^T, W2]]`. The `X` update decouples over blocks
//! into norm-constrained least squares, each solved exactly from its KKT
//! system: a ridge solution `(2 Bt^T Bt + (rho + lambda) I)^{-1} rhs`
//! whose multiplier `lambda` is found by bisection on the monotone norm
//! path. The ridge inverse is applied through a one-time thin SVD of the
//! stacked sensing matrix, so varying `rho` and `lambda` cost
//! `O(L * M * N)` per application.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::admm::{balance_rho, StoppingRule};
use crate::error::{Error, Result};
use crate::linalg::{
    assemble_stacked, psd_project, sym_eig, thin_svd, trace_ball_project, BlockMatrix, SymMatrix,
};
use crate::norms::inf_frob_norm;
use crate::scalar::{from_f64, to_f64, Scalar};
use crate::sensing::{backproject, data_fit_objective, MeasurementSet, SensingEnsemble};

/// Parameters of [`estimate`].
#[derive(Debug, Clone)]
pub struct EstimatorConfig<T> {
    /// Bound on the maximum-block-Frobenius norm of the estimate.
    pub alpha: T,
    /// Bound on the `$`-norm of the estimate.
    pub beta: T,
    pub rho0: T,
    pub eps_abs: T,
    pub eps_rel: T,
    pub max_iter: usize,
    pub balance_mu: T,
    pub balance_tau: T,
    /// Relative tolerance on `| ||X_k||_F - alpha |` in the multiplier
    /// bisection.
    pub lambda_bisect_tol: T,
    /// Warm-start truncation rank for the backprojection; `None` skips the
    /// truncation. The optimum does not depend on this.
    pub init_rank: Option<usize>,
}

impl<T: Scalar> EstimatorConfig<T> {
    pub fn new(alpha: T, beta: T) -> Self {
        Self {
            alpha,
            beta,
            rho0: T::one(),
            eps_abs: from_f64(1e-6),
            eps_rel: from_f64(1e-4),
            max_iter: 5000,
            balance_mu: from_f64(10.0),
            balance_tau: from_f64(2.0),
            lambda_bisect_tol: from_f64(1e-8),
            init_rank: None,
        }
    }

    /// Tighter tolerances for certificate-grade runs; see
    /// [`crate::norms::DollarNormSolverConfig::high_accuracy`].
    pub fn high_accuracy(alpha: T, beta: T) -> Self {
        Self {
            eps_abs: from_f64(1e-9),
            eps_rel: from_f64(1e-7),
            max_iter: 20_000,
            ..Self::new(alpha, beta)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = [
            (self.alpha, "alpha"),
            (self.beta, "beta"),
            (self.rho0, "rho0"),
            (self.eps_abs, "eps_abs"),
            (self.eps_rel, "eps_rel"),
            (self.lambda_bisect_tol, "lambda_bisect_tol"),
        ];
        for (v, name) in pos {
            if !(v > T::zero()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        if !(self.balance_mu > T::one()) || !(self.balance_tau > T::one()) {
            return Err(Error::InvalidConfig(
                "balance_mu and balance_tau must exceed 1".into(),
            ));
        }
        Ok(())
    }
}

/// Per-block factorization of the stacked sensing matrix
/// `Bt_k = P diag(sigma) Q^T` (`L x (M*N)`), precomputed once per solve.
#[derive(Debug, Clone)]
pub struct BlockLsCache<T: Scalar> {
    p: DMatrix<T>,
    sigma: DVector<T>,
    q: DMatrix<T>,
    m: usize,
    n: usize,
}

impl<T: Scalar> BlockLsCache<T> {
    /// `Bt^T y` computed through the factors.
    fn bt_y(&self, y: &DVector<T>) -> DVector<T> {
        let mut w = self.p.transpose() * y;
        for i in 0..w.len() {
            w[i] *= self.sigma[i];
        }
        &self.q * w
    }
}

/// Builds the per-block caches for an ensemble, verifying that the
/// factorization reconstructs the stacked matrix to 1e-9 relative.
pub fn build_block_ls_caches<T: Scalar>(ens: &SensingEnsemble<T>) -> Result<Vec<BlockLsCache<T>>> {
    let dims = ens.dims;
    let mut caches = Vec::with_capacity(dims.k);
    for k in 0..dims.k {
        let stacked = ens.stacked_rows(k);
        let svd = thin_svd(&stacked)?;
        let recon_err = (svd.reconstruct() - &stacked).norm();
        if recon_err > from_f64::<T>(1e-9) * (T::one() + stacked.norm()) {
            return Err(Error::SvdFailure {
                rows: stacked.nrows(),
                cols: stacked.ncols(),
            });
        }
        caches.push(BlockLsCache {
            p: svd.u,
            sigma: svd.sigma,
            q: svd.v,
            m: dims.m,
            n: dims.n,
        });
    }
    Ok(caches)
}

/// Solution of one norm-constrained block least squares.
#[derive(Debug, Clone)]
pub struct BlockLsSolution<T: Scalar> {
    /// The `M x N` minimizer `X_k(lambda*)`.
    pub x: DMatrix<T>,
    /// The KKT multiplier `lambda*` (zero when the constraint is slack).
    pub lambda: T,
}

/// Solves `min_{||X_k||_F <= alpha} sum_l (y_l - <B_l, X_k>)^2
/// - <Psi12_k, X_k> + rho/2 ||Z12_k - X_k||_F^2`.
///
/// The ridge solution is
/// `vec(X_k(lambda)) = (2 Bt^T Bt + (rho + lambda) I)^{-1} rhs` with
/// `rhs = 2 Bt^T y + vec(Psi12_k) + rho vec(Z12_k)`; `lambda* = 0` when
/// `||X_k(0)||_F <= alpha`, otherwise the unique root of
/// `||X_k(lambda)||_F = alpha` found by bisection (the norm is strictly
/// decreasing in `lambda`).
pub fn block_ls_solve<T: Scalar>(
    cache: &BlockLsCache<T>,
    y_k: &DVector<T>,
    psi12_k: &DMatrix<T>,
    z12_k: &DMatrix<T>,
    rho: T,
    alpha: T,
    tol: T,
) -> Result<BlockLsSolution<T>> {
    let (m, n) = (cache.m, cache.n);
    if !(alpha > T::zero()) {
        return Err(Error::InvalidConfig("alpha must be positive".into()));
    }

    let two = from_f64::<T>(2.0);
    let mut rhs = cache.bt_y(y_k) * two;
    for (i, (p, z)) in psi12_k.iter().zip(z12_k.iter()).enumerate() {
        rhs[i] += *p + rho * *z;
    }

    // Split rhs into the row space of Bt (coefficients w) and its
    // complement; the ridge inverse is diagonal on the first part and a
    // plain 1/(rho + lambda) on the second.
    let w = cache.q.transpose() * &rhs;
    let perp = &rhs - &cache.q * &w;
    let perp_sq = perp.norm_squared();

    let norm_at = |lambda: T| -> T {
        let mut acc = T::zero();
        for i in 0..w.len() {
            let d = two * cache.sigma[i] * cache.sigma[i] + rho + lambda;
            let c = w[i] / d;
            acc += c * c;
        }
        (acc + perp_sq / ((rho + lambda) * (rho + lambda))).sqrt()
    };
    let assemble = |lambda: T| -> DMatrix<T> {
        let mut scaled = w.clone();
        for i in 0..scaled.len() {
            scaled[i] /= two * cache.sigma[i] * cache.sigma[i] + rho + lambda;
        }
        let vec_x = &cache.q * scaled + &perp / (rho + lambda);
        DMatrix::from_iterator(m, n, vec_x.iter().cloned())
    };

    if norm_at(T::zero()) <= alpha {
        return Ok(BlockLsSolution {
            x: assemble(T::zero()),
            lambda: T::zero(),
        });
    }

    // Bracket: ||X_k(lambda)|| <= ||rhs|| / (rho + lambda), so the ball is
    // reached from lambda = ||rhs||/alpha - rho onward.
    let mut hi = (rhs.norm() / alpha - rho).max(T::zero());
    let mut attempts = 0;
    while norm_at(hi) > alpha {
        attempts += 1;
        if attempts > 60 {
            return Err(Error::BracketFailure { attempts: 60 });
        }
        hi = if hi > T::zero() { hi * two } else { T::one() };
    }

    let mut lo = T::zero();
    let half = from_f64::<T>(0.5);
    let mut lambda = hi;
    for _ in 0..500 {
        let mid = half * (lo + hi);
        let nm = norm_at(mid);
        if (nm - alpha).abs() <= tol * alpha {
            lambda = mid;
            break;
        }
        if nm > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
        lambda = hi;
    }
    Ok(BlockLsSolution {
        x: assemble(lambda),
        lambda,
    })
}

/// Feasibility diagnostics of an estimate.
#[derive(Debug, Clone)]
pub struct FeasibilityReport<T> {
    /// `||X_hat||_{inf,F}`.
    pub inf_frob_norm: T,
    /// Minimum eigenvalue of the certificate `[[W1, X], [X^T, W2]]`.
    pub certificate_min_eigenvalue: T,
    /// `trace(W1) - beta`.
    pub trace_slack_w1: T,
    /// `max_k trace(W2_k) - beta`.
    pub max_trace_slack_w2: T,
}

/// Output of [`estimate`].
#[derive(Debug, Clone)]
pub struct EstimateResult<T: Scalar> {
    pub x_hat: BlockMatrix<T>,
    /// Data-fit loss at `x_hat`.
    pub objective: T,
    pub iters: usize,
    pub primal_residual: T,
    pub dual_residual: T,
    pub feasibility: FeasibilityReport<T>,
}

/// Estimator failure modes; non-convergence keeps the last iterate.
#[derive(Debug, Error)]
pub enum EstimateError<T: Scalar> {
    #[error(
        "estimator ADMM reached {max_iter} iterations with residuals above threshold \
         (primal {primal:.3e}, dual {dual:.3e})"
    )]
    NonConvergence {
        max_iter: usize,
        primal: f64,
        dual: f64,
        last: Box<EstimateResult<T>>,
    },
    #[error(transparent)]
    Core(#[from] Error),
}

/// Solves the constrained least-squares program for given `(alpha, beta)`.
pub fn estimate<T: Scalar>(
    ens: &SensingEnsemble<T>,
    ms: &MeasurementSet<T>,
    cfg: &EstimatorConfig<T>,
) -> std::result::Result<EstimateResult<T>, EstimateError<T>> {
    cfg.validate()?;
    let dims = ens.dims;
    if ms.y.nrows() != dims.l || ms.y.ncols() != dims.k {
        return Err(Error::dim_mismatch(
            format!("measurements {}x{}", ms.y.nrows(), ms.y.ncols()),
            format!("ensemble L={} K={}", dims.l, dims.k),
        )
        .into());
    }
    if !ms.y.iter().all(|v| v.is_finite()) {
        return Err(Error::Domain("measurements contain non-finite values".into()).into());
    }
    // Precondition by the alpha scale: with y, alpha, beta all divided by
    // alpha the minimizer scales exactly, and the iterates stay near unit
    // norm where rho0 and the stopping tolerances are calibrated.
    let scale = cfg.alpha;
    if (scale < from_f64(0.5) || scale > from_f64(2.0)) && scale.is_finite() {
        let mut scaled_cfg = cfg.clone();
        scaled_cfg.alpha = cfg.alpha / scale;
        scaled_cfg.beta = cfg.beta / scale;
        let scaled_ms = MeasurementSet {
            y: &ms.y / scale,
            sigma: ms.sigma,
            seed: ms.seed,
        };
        return match estimate(ens, &scaled_ms, &scaled_cfg) {
            Ok(res) => Ok(rescale_result(ens, ms, res, scale)?),
            Err(EstimateError::NonConvergence {
                max_iter,
                primal,
                dual,
                last,
            }) => Err(EstimateError::NonConvergence {
                max_iter,
                primal: primal * to_f64(scale),
                dual: dual * to_f64(scale),
                last: Box::new(rescale_result(ens, ms, *last, scale)?),
            }),
            Err(e) => Err(e),
        };
    }
    let (m, n, k) = (dims.m, dims.n, dims.k);
    let nk = n * k;
    let dim = m + nk;
    let (alpha, beta) = (cfg.alpha, cfg.beta);

    let caches = build_block_ls_caches(ens)?;
    let y_cols: Vec<DVector<T>> = (0..k).map(|j| ms.y.column(j).into_owned()).collect();

    // Warm start: (truncated) backprojection projected blockwise onto the
    // alpha-ball; W1, W2 as scaled identities with active traces.
    let mut x = backproject(ens, ms)?;
    if let Some(r) = cfg.init_rank {
        let svd = thin_svd(x.as_matrix())?;
        x = BlockMatrix::new(m, n, k, svd.truncated(r))?;
    }
    for j in 0..k {
        let nrm = x.block_frobenius_norm(j);
        if nrm > alpha {
            let scaled = x.block_owned(j) * (alpha / nrm);
            x.set_block(j, &scaled);
        }
    }
    let mut w1 = SymMatrix::scaled_identity(m, beta / from_f64::<T>(m as f64));
    let mut w2 = SymMatrix::scaled_identity(nk, beta / from_f64::<T>(n as f64));

    let mut s_prev = assemble_stacked(&w1, &x, &w2).into_matrix();
    let mut z = psd_project(&SymMatrix::symmetrize(s_prev.clone()))?.into_matrix();
    let mut u: DMatrix<T> = DMatrix::zeros(dim, dim);
    let mut rho = cfg.rho0;
    let stop = StoppingRule::new(cfg.eps_abs, cfg.eps_rel, dim);

    let build_result = |x: &BlockMatrix<T>,
                        w1: &SymMatrix<T>,
                        w2: &SymMatrix<T>,
                        iters: usize,
                        primal: T,
                        dual: T|
     -> Result<EstimateResult<T>> {
        let stacked = assemble_stacked(w1, x, w2);
        let (vals, _) = sym_eig(&stacked)?;
        let mut max_w2_slack = -beta;
        for j in 0..k {
            let t = w2.as_matrix().view((j * n, j * n), (n, n)).trace();
            max_w2_slack = max_w2_slack.max(t - beta);
        }
        Ok(EstimateResult {
            x_hat: x.clone(),
            objective: data_fit_objective(ens, ms, x)?,
            iters,
            primal_residual: primal,
            dual_residual: dual,
            feasibility: FeasibilityReport {
                inf_frob_norm: inf_frob_norm(x),
                certificate_min_eigenvalue: vals[0],
                trace_slack_w1: w1.trace() - beta,
                max_trace_slack_w2: max_w2_slack,
            },
        })
    };

    let mut primal = T::zero();
    let mut dual = T::zero();
    for iter in 1..=cfg.max_iter {
        // X update: K independent norm-constrained least squares on the
        // previous (Z, Psi) blocks, with Psi = rho * u.
        for j in 0..k {
            let psi12 = u.view((0, m + j * n), (m, n)).into_owned() * rho;
            let z12 = z.view((0, m + j * n), (m, n)).into_owned();
            let sol = block_ls_solve(
                &caches[j],
                &y_cols[j],
                &psi12,
                &z12,
                rho,
                alpha,
                cfg.lambda_bisect_tol,
            )?;
            x.set_block(j, &sol.x);
        }

        // W update: trace-ball projections of the Z + Psi/rho blocks.
        let a = SymMatrix::symmetrize(
            z.view((0, 0), (m, m)).into_owned() + u.view((0, 0), (m, m)).into_owned(),
        );
        w1 = trace_ball_project(&a, beta);
        let mut w2_full =
            z.view((m, m), (nk, nk)).into_owned() + u.view((m, m), (nk, nk)).into_owned();
        for j in 0..k {
            let blk = SymMatrix::symmetrize(w2_full.view((j * n, j * n), (n, n)).into_owned());
            let proj = trace_ball_project(&blk, beta);
            w2_full
                .view_mut((j * n, j * n), (n, n))
                .copy_from(proj.as_matrix());
        }
        w2 = SymMatrix::symmetrize(w2_full);

        // Z update, dual ascent, residuals.
        let s = assemble_stacked(&w1, &x, &w2).into_matrix();
        let z_new = psd_project(&SymMatrix::symmetrize(&s - &u))?.into_matrix();
        let r = &z_new - &s;
        primal = r.norm();
        u += &r;
        dual = rho * (&s - &s_prev).norm();
        z = z_new;
        s_prev = s;

        let eps_pri = stop.primal_threshold(z.norm(), s_prev.norm());
        let eps_dual = stop.dual_threshold(rho * u.norm());
        if primal <= eps_pri && dual <= eps_dual {
            return Ok(build_result(&x, &w1, &w2, iter, primal, dual)?);
        }

        balance_rho(primal, dual, cfg.balance_mu, cfg.balance_tau, &mut rho, &mut u);
    }

    let last = build_result(&x, &w1, &w2, cfg.max_iter, primal, dual)?;
    Err(EstimateError::NonConvergence {
        max_iter: cfg.max_iter,
        primal: to_f64(primal),
        dual: to_f64(dual),
        last: Box::new(last),
    })
}

/// Maps a result of the alpha-normalized problem back to original units:
/// the iterate and certificate blocks scale linearly, the data-fit
/// objective is recomputed on the original measurements.
fn rescale_result<T: Scalar>(
    ens: &SensingEnsemble<T>,
    ms: &MeasurementSet<T>,
    res: EstimateResult<T>,
    scale: T,
) -> Result<EstimateResult<T>> {
    let dims = ens.dims;
    let x_hat = BlockMatrix::new(dims.m, dims.n, dims.k, res.x_hat.as_matrix() * scale)?;
    Ok(EstimateResult {
        objective: data_fit_objective(ens, ms, &x_hat)?,
        feasibility: FeasibilityReport {
            inf_frob_norm: inf_frob_norm(&x_hat),
            certificate_min_eigenvalue: res.feasibility.certificate_min_eigenvalue * scale,
            trace_slack_w1: res.feasibility.trace_slack_w1 * scale,
            max_trace_slack_w2: res.feasibility.max_trace_slack_w2 * scale,
        },
        x_hat,
        iters: res.iters,
        primal_residual: res.primal_residual * scale,
        dual_residual: res.dual_residual * scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::{dollar_norm, DollarNormSolverConfig};
    use crate::rng::{derive_seed, rng_from_seed, sample_standard_normal};
    use crate::sensing::{gen_ensemble, gen_ground_truth, measure, ProblemDims};
    use nalgebra::{DMatrix, DVector};
    use rand_chacha::ChaCha12Rng;

    fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha12Rng) -> DMatrix<f64> {
        let data: Vec<f64> = (0..rows * cols)
            .map(|_| sample_standard_normal(rng))
            .collect();
        DMatrix::from_vec(rows, cols, data)
    }

    fn random_vector(len: usize, rng: &mut ChaCha12Rng) -> DVector<f64> {
        DVector::from_iterator(len, (0..len).map(|_| sample_standard_normal(rng)))
    }

    fn rng_abs(rng: &mut ChaCha12Rng) -> f64 {
        sample_standard_normal::<f64>(rng).abs()
    }

    const DIMS: ProblemDims = ProblemDims {
        m: 4,
        n: 3,
        k: 2,
        l: 6,
        r: 1,
    };

    fn dense_gram(stacked: &DMatrix<f64>, rho_lambda: f64) -> DMatrix<f64> {
        let mn = stacked.ncols();
        stacked.transpose() * stacked * 2.0 + DMatrix::identity(mn, mn) * rho_lambda
    }

    #[test]
    fn block_ls_zero_rhs_gives_zero() {
        let ens: SensingEnsemble<f64> = gen_ensemble(DIMS, 1).unwrap();
        let caches = build_block_ls_caches(&ens).unwrap();
        let y = DVector::zeros(DIMS.l);
        let zero = DMatrix::zeros(DIMS.m, DIMS.n);
        let sol = block_ls_solve(&caches[0], &y, &zero, &zero, 1.0, 1.0, 1e-8).unwrap();
        assert_eq!(sol.lambda, 0.0);
        assert!(sol.x.norm() <= 1e-14);
    }

    #[test]
    fn block_ls_huge_rho_returns_prox_center() {
        // As rho grows the solution tends to Z12 + Psi12/rho when that
        // point is inside the ball.
        let mut rng = rng_from_seed(5);
        let ens: SensingEnsemble<f64> = gen_ensemble(DIMS, 2).unwrap();
        let caches = build_block_ls_caches(&ens).unwrap();
        let y = random_vector(DIMS.l, &mut rng);
        let z12 = random_matrix(DIMS.m, DIMS.n, &mut rng) * 0.1;
        let psi12 = random_matrix(DIMS.m, DIMS.n, &mut rng);
        let rho = 1e8;
        let alpha = z12.norm() * 2.0 + 1.0;
        let sol = block_ls_solve(&caches[0], &y, &psi12, &z12, rho, alpha, 1e-10).unwrap();
        let target = &z12 + &psi12 / rho;
        let rel = (&sol.x - &target).norm() / target.norm();
        assert!(rel <= 1e-5, "relative distance to prox center {rel}");
    }

    #[test]
    fn block_ls_kkt_on_random_instances() {
        let mut rng = rng_from_seed(7);
        let ens: SensingEnsemble<f64> = gen_ensemble(DIMS, 3).unwrap();
        let caches = build_block_ls_caches(&ens).unwrap();
        let stacked = ens.stacked_rows(0);
        let tol = 1e-8;
        for _ in 0..50 {
            let y = random_vector(DIMS.l, &mut rng);
            let z12 = random_matrix(DIMS.m, DIMS.n, &mut rng);
            let psi12 = random_matrix(DIMS.m, DIMS.n, &mut rng);
            let rho = 0.5 + rng_abs(&mut rng);
            let alpha = 0.2 + rng_abs(&mut rng);
            let sol = block_ls_solve(&caches[0], &y, &psi12, &z12, rho, alpha, tol).unwrap();
            let norm = sol.x.norm();

            // primal feasibility / complementary slackness
            if sol.lambda == 0.0 {
                assert!(norm <= alpha * (1.0 + tol));
            } else {
                assert!((norm - alpha).abs() <= tol * alpha);
            }
            assert!(sol.lambda * (norm - alpha).abs() <= 1e-6 * alpha * (1.0 + sol.lambda));

            // stationarity against the dense KKT system
            let gram = dense_gram(&stacked, rho + sol.lambda);
            let mut rhs = stacked.transpose() * &y * 2.0;
            for (i, (p, z)) in psi12.iter().zip(z12.iter()).enumerate() {
                rhs[i] += p + rho * z;
            }
            let vec_x = DVector::from_iterator(DIMS.m * DIMS.n, sol.x.iter().cloned());
            let resid = (&gram * &vec_x - &rhs).norm();
            assert!(
                resid <= 1e-8 * rhs.norm(),
                "stationarity residual {resid} vs rhs norm {}",
                rhs.norm()
            );
        }
    }

    #[test]
    fn block_ls_norm_path_is_decreasing() {
        let mut rng = rng_from_seed(11);
        let ens: SensingEnsemble<f64> = gen_ensemble(DIMS, 4).unwrap();
        let caches = build_block_ls_caches(&ens).unwrap();
        let y = random_vector(DIMS.l, &mut rng);
        let z12 = random_matrix(DIMS.m, DIMS.n, &mut rng);
        let psi12 = random_matrix(DIMS.m, DIMS.n, &mut rng);
        let rho = 1.0;
        let stacked = ens.stacked_rows(0);
        let mut norms = Vec::new();
        for i in 0..10 {
            let lambda = i as f64 * 2.0;
            let gram = dense_gram(&stacked, rho + lambda);
            let mut rhs = stacked.transpose() * &y * 2.0;
            for (j, (p, z)) in psi12.iter().zip(z12.iter()).enumerate() {
                rhs[j] += p + rho * z;
            }
            let xl = gram.lu().solve(&rhs).unwrap();
            norms.push(xl.norm());
        }
        for i in 1..norms.len() {
            assert!(norms[i] < norms[i - 1], "norm path not decreasing");
        }
        // solver agrees with the dense route at lambda = 0
        let sol = block_ls_solve(&caches[0], &y, &psi12, &z12, rho, 1e9, 1e-8).unwrap();
        assert!((sol.x.norm() - norms[0]).abs() <= 1e-8 * norms[0]);
    }

    #[test]
    fn block_ls_matches_normal_equations_when_unconstrained() {
        let mut rng = rng_from_seed(13);
        let ens: SensingEnsemble<f64> = gen_ensemble(DIMS, 5).unwrap();
        let caches = build_block_ls_caches(&ens).unwrap();
        for j in 0..DIMS.k {
            let y = random_vector(DIMS.l, &mut rng);
            let z12 = random_matrix(DIMS.m, DIMS.n, &mut rng);
            let psi12 = random_matrix(DIMS.m, DIMS.n, &mut rng);
            let rho = 2.0;
            let sol = block_ls_solve(&caches[j], &y, &psi12, &z12, rho, 1e12, 1e-8).unwrap();
            assert_eq!(sol.lambda, 0.0);

            let stacked = ens.stacked_rows(j);
            let gram = dense_gram(&stacked, rho);
            let mut rhs = stacked.transpose() * &y * 2.0;
            for (i, (p, z)) in psi12.iter().zip(z12.iter()).enumerate() {
                rhs[i] += p + rho * z;
            }
            let direct = gram.lu().solve(&rhs).unwrap();
            let vec_x = DVector::from_iterator(DIMS.m * DIMS.n, sol.x.iter().cloned());
            let rel = (&vec_x - &direct).norm() / direct.norm();
            assert!(rel <= 1e-8, "solver equivalence violated: {rel}");
        }
    }

    #[test]
    fn estimate_zero_data_returns_zero() {
        let ens: SensingEnsemble<f64> = gen_ensemble(DIMS, 6).unwrap();
        let ms = measure(&BlockMatrix::zeros(DIMS.m, DIMS.n, DIMS.k), &ens, 0.0, 0).unwrap();
        let cfg = EstimatorConfig::new(1.0, 1.0);
        let res = estimate(&ens, &ms, &cfg).unwrap();
        assert!(res.x_hat.frobenius_norm() <= 1e-6);
    }

    #[test]
    fn estimate_recovers_noiseless_desk_instance() {
        let dims = ProblemDims {
            m: 20,
            n: 2,
            k: 8,
            l: 40,
            r: 1,
        };
        let gt = gen_ground_truth::<f64>(dims, 42).unwrap();
        let ens = gen_ensemble::<f64>(dims, 43).unwrap();
        let ms = measure(&gt.x, &ens, 0.0, 0).unwrap();
        let alpha = inf_frob_norm(&gt.x);
        let beta = dollar_norm(&gt.x, &DollarNormSolverConfig::default())
            .unwrap()
            .value;
        let mut cfg = EstimatorConfig::new(alpha, beta);
        cfg.init_rank = Some(dims.r);
        let res = estimate(&ens, &ms, &cfg).unwrap();
        let rel = (res.x_hat.as_matrix() - gt.x.as_matrix()).norm() / gt.x.as_matrix().norm();
        assert!(rel <= 1e-2, "relative error {rel}");
    }

    #[test]
    fn estimate_enforces_alpha_even_when_too_small() {
        let gt = gen_ground_truth::<f64>(DIMS, 1).unwrap();
        let ens = gen_ensemble::<f64>(DIMS, 2).unwrap();
        let ms = measure(&gt.x, &ens, 0.0, 0).unwrap();
        let alpha = 0.25 * inf_frob_norm(&gt.x);
        let beta = alpha * 2.0;
        let cfg = EstimatorConfig::new(alpha, beta);
        let res = estimate(&ens, &ms, &cfg).unwrap();
        assert!(res.feasibility.inf_frob_norm <= alpha * (1.0 + 1e-6));
    }

    #[test]
    fn estimate_certificate_feasibility_high_accuracy() {
        let gt = gen_ground_truth::<f64>(DIMS, 3).unwrap();
        let ens = gen_ensemble::<f64>(DIMS, 4).unwrap();
        let ms = measure(&gt.x, &ens, 0.1, 5).unwrap();
        let alpha = inf_frob_norm(&gt.x);
        let beta = dollar_norm(&gt.x, &DollarNormSolverConfig::default())
            .unwrap()
            .value;
        let res = estimate(&ens, &ms, &EstimatorConfig::high_accuracy(alpha, beta)).unwrap();
        let f = &res.feasibility;
        assert!(f.inf_frob_norm <= alpha * (1.0 + 1e-6));
        assert!(f.certificate_min_eigenvalue >= -1e-6 * (1.0 + beta));
        assert!(f.trace_slack_w1 <= 1e-6);
        assert!(f.max_trace_slack_w2 <= 1e-6);
    }

    #[test]
    fn estimate_objective_dominates_truth() {
        // the truth lies in kappa(alpha, beta), so the minimizer's loss
        // cannot exceed its loss beyond solver tolerance
        let gt = gen_ground_truth::<f64>(DIMS, 6).unwrap();
        let ens = gen_ensemble::<f64>(DIMS, 7).unwrap();
        let ms = measure(&gt.x, &ens, 0.3, 8).unwrap();
        let alpha = inf_frob_norm(&gt.x);
        let beta = dollar_norm(&gt.x, &DollarNormSolverConfig::default())
            .unwrap()
            .value;
        let res = estimate(&ens, &ms, &EstimatorConfig::high_accuracy(alpha, beta)).unwrap();
        let truth_obj = data_fit_objective(&ens, &ms, &gt.x).unwrap();
        assert!(
            res.objective <= truth_obj + 1e-6 * (1.0 + truth_obj),
            "objective {} exceeds truth objective {}",
            res.objective,
            truth_obj
        );
    }

    #[test]
    fn estimate_error_decreases_with_more_sketches() {
        let mut medians = Vec::new();
        for l in [8usize, 16, 32] {
            let dims = ProblemDims {
                m: 8,
                n: 2,
                k: 4,
                l,
                r: 1,
            };
            let mut errs: Vec<f64> = (0..10)
                .map(|t| {
                    let gt = gen_ground_truth::<f64>(dims, derive_seed(100, &[t, 0])).unwrap();
                    let ens = gen_ensemble::<f64>(dims, derive_seed(100, &[t, 1])).unwrap();
                    let sigma = crate::sensing::sigma_for_snr_db(&gt.x, 20.0).unwrap();
                    let ms = measure(&gt.x, &ens, sigma, derive_seed(100, &[t, 2])).unwrap();
                    let alpha = inf_frob_norm(&gt.x);
                    let beta = dollar_norm(&gt.x, &DollarNormSolverConfig::default())
                        .unwrap()
                        .value;
                    let mut cfg = EstimatorConfig::new(alpha, beta);
                    cfg.init_rank = Some(dims.r);
                    let res = estimate(&ens, &ms, &cfg).unwrap();
                    (res.x_hat.as_matrix() - gt.x.as_matrix()).norm() / gt.x.as_matrix().norm()
                })
                .collect();
            errs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            medians.push(0.5 * (errs[4] + errs[5]));
        }
        // non-increasing, allowing one inversion of at most 5 percent
        let mut inversions = 0;
        for w in medians.windows(2) {
            if w[1] > w[0] {
                inversions += 1;
                assert!(w[1] <= w[0] * 1.05, "inversion exceeds 5%: {medians:?}");
            }
        }
        assert!(inversions <= 1, "more than one inversion: {medians:?}");
    }
}
