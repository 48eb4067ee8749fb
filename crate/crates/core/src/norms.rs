//! Norms on block matrices: the maximum-block-Frobenius norm, the `$`-norm
//! computed by ADMM on its semidefinite characterization, spikiness, and
//! the signal-to-noise ratio.
//!
//! The `$`-norm of `X` is `inf { ||U||_F ||V^T||_{inf,F} : U V^T = X }`.
//! It equals the optimal value `beta` of
//!
//! ```text
//! minimize    beta
//! subject to  trace(W1) <= beta,  trace(W2_k) <= beta  for all k,
//!             [[W1, X], [X^T, W2]] >= 0,
//! ```
//!
//! which the solver attacks by splitting on an auxiliary PSD variable `E`
//! equal to the stacked matrix. Per iteration: `(beta, W1, W2)` minimize
//! the augmented Lagrangian in closed form (trace-ball projections around
//! a scalar bisection for `beta`), `E` is a PSD-cone projection, and the
//! dual variable ascends with step `rho`.

use nalgebra::DMatrix;

use crate::admm::{balance_rho, StoppingRule};
use crate::error::{Error, Result};
use crate::linalg::{assemble_stacked, psd_project, trace_ball_project, BlockMatrix, SymMatrix};
use crate::scalar::{from_f64, to_f64, Scalar};

/// Maximum-block-Frobenius norm: `max_k ||X_k||_F`.
pub fn inf_frob_norm<T: Scalar>(x: &BlockMatrix<T>) -> T {
    let mut best = T::zero();
    for k in 0..x.num_blocks() {
        best = best.max(x.block_frobenius_norm(k));
    }
    best
}

/// Spikiness `sqrt(K) * ||X||_{inf,F} / ||X||_F`, in `[1, sqrt(K)]`.
pub fn spikiness<T: Scalar>(x: &BlockMatrix<T>) -> Result<T> {
    let total = x.frobenius_norm();
    if total == T::zero() {
        return Err(Error::ZeroMatrix);
    }
    let k = from_f64::<T>(x.num_blocks() as f64);
    Ok(k.sqrt() * inf_frob_norm(x) / total)
}

/// Linear signal-to-noise ratio `||X||_F^2 / (K sigma^2)`.
pub fn snr_linear<T: Scalar>(x: &BlockMatrix<T>, sigma: T) -> T {
    debug_assert!(sigma > T::zero(), "sigma must be positive");
    let k = from_f64::<T>(x.num_blocks() as f64);
    let f = x.frobenius_norm();
    f * f / (k * sigma * sigma)
}

/// Solver parameters for [`dollar_norm`].
#[derive(Debug, Clone)]
pub struct DollarNormSolverConfig<T> {
    /// Initial penalty parameter.
    pub rho0: T,
    /// Absolute stopping tolerance.
    pub eps_abs: T,
    /// Relative stopping tolerance.
    pub eps_rel: T,
    /// Iteration cap.
    pub max_iter: usize,
    /// Residual-balance trigger ratio (> 1).
    pub balance_mu: T,
    /// Penalty rescale factor (> 1).
    pub balance_tau: T,
    /// Tolerance on the derivative in the scalar `beta` bisection.
    pub beta_bisect_tol: T,
}

impl<T: Scalar> Default for DollarNormSolverConfig<T> {
    fn default() -> Self {
        Self {
            rho0: T::one(),
            eps_abs: from_f64(1e-6),
            eps_rel: from_f64(1e-4),
            max_iter: 5000,
            balance_mu: from_f64(10.0),
            balance_tau: from_f64(2.0),
            beta_bisect_tol: from_f64(1e-10),
        }
    }
}

impl<T: Scalar> DollarNormSolverConfig<T> {
    /// Tighter tolerances for runs that must certify feasibility at the
    /// `1e-6` level (residuals then bound the certificate directly).
    pub fn high_accuracy() -> Self {
        Self {
            eps_abs: from_f64(1e-9),
            eps_rel: from_f64(1e-7),
            max_iter: 20_000,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = [
            (self.rho0, "rho0"),
            (self.eps_abs, "eps_abs"),
            (self.eps_rel, "eps_rel"),
            (self.beta_bisect_tol, "beta_bisect_tol"),
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

/// Output of [`dollar_norm`]: the norm value `beta` with the certificate
/// blocks `W1`, `W2` and convergence diagnostics.
#[derive(Debug, Clone)]
pub struct DollarNormResult<T: Scalar> {
    pub value: T,
    pub w1: SymMatrix<T>,
    pub w2: SymMatrix<T>,
    pub iters: usize,
    pub primal_residual: T,
    pub dual_residual: T,
}

/// Minimizes the scalar function
/// `f(beta) = beta + rho max(tr_a - beta, 0)^2 / (2m)
///  + sum_k rho max(tr_b[k] - beta, 0)^2 / (2n)`
/// over `beta >= 0` by bisection on the derivative.
///
/// Returns `beta` with `|f'(beta)| <= tol`, or `0` when `f'(0) >= 0`.
pub(crate) fn minimize_beta<T: Scalar>(rho: T, m: usize, n: usize, tr_a: T, tr_b: &[T], tol: T) -> T {
    let inv_m = rho / from_f64::<T>(m as f64);
    let inv_n = rho / from_f64::<T>(n as f64);
    let deriv = |beta: T| {
        let mut d = T::one() - inv_m * (tr_a - beta).max(T::zero());
        for &t in tr_b {
            d -= inv_n * (t - beta).max(T::zero());
        }
        d
    };
    let mut upper = tr_a;
    for &t in tr_b {
        upper = upper.max(t);
    }
    if upper <= T::zero() || deriv(T::zero()) >= T::zero() {
        return T::zero();
    }
    let (mut lo, mut hi) = (T::zero(), upper);
    let half = from_f64::<T>(0.5);
    for _ in 0..200 {
        let mid = half * (lo + hi);
        let d = deriv(mid);
        if d.abs() <= tol {
            return mid;
        }
        if d < T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    half * (lo + hi)
}

/// Computes the `$`-norm of `X` together with its SDP certificate.
pub fn dollar_norm<T: Scalar>(
    x: &BlockMatrix<T>,
    cfg: &DollarNormSolverConfig<T>,
) -> Result<DollarNormResult<T>> {
    cfg.validate()?;
    if !x.as_matrix().iter().all(|v| v.is_finite()) {
        return Err(Error::Domain("input matrix has non-finite entries".into()));
    }
    // The norm is positively homogeneous, so solve on X / ||X||_F and
    // rescale; this keeps the iterate scale near one, where rho0 and the
    // stopping tolerances are calibrated.
    let scale = x.frobenius_norm();
    if scale > T::zero() && (scale < from_f64(0.5) || scale > from_f64(2.0)) {
        let unit = BlockMatrix::new(
            x.rows(),
            x.block_cols(),
            x.num_blocks(),
            x.as_matrix() / scale,
        )?;
        let res = dollar_norm(&unit, cfg)?;
        return Ok(DollarNormResult {
            value: res.value * scale,
            w1: SymMatrix::symmetrize(res.w1.into_matrix() * scale),
            w2: SymMatrix::symmetrize(res.w2.into_matrix() * scale),
            iters: res.iters,
            primal_residual: res.primal_residual * scale,
            dual_residual: res.dual_residual * scale,
        });
    }
    let (m, n, k) = (x.rows(), x.block_cols(), x.num_blocks());
    let nk = n * k;
    let dim = m + nk;

    // Scaled-dual form: u = Phi / rho, so the E update is a projection of
    // S - u and the balancing rescale u <- u / tau keeps the underlying
    // multiplier Phi = rho * u invariant when rho <- tau * rho.
    let mut e: DMatrix<T> = DMatrix::zeros(dim, dim);
    let mut u: DMatrix<T> = DMatrix::zeros(dim, dim);
    let mut rho = cfg.rho0;
    let stop = StoppingRule::new(cfg.eps_abs, cfg.eps_rel, dim);

    let zero_w1 = SymMatrix::zeros(m);
    let zero_w2 = SymMatrix::zeros(nk);
    let mut s_prev = assemble_stacked(&zero_w1, x, &zero_w2).into_matrix();

    let mut primal = T::zero();
    let mut dual = T::zero();
    for iter in 1..=cfg.max_iter {
        // (beta, W1, W2) update: scalar bisection plus trace-ball
        // projections of A = E11 + Phi11/rho and the diagonal blocks of
        // B = E22 + Phi22/rho; off-diagonal blocks of W2 copy B.
        let a = SymMatrix::symmetrize(
            e.view((0, 0), (m, m)).into_owned() + u.view((0, 0), (m, m)).into_owned(),
        );
        let b_full =
            e.view((m, m), (nk, nk)).into_owned() + u.view((m, m), (nk, nk)).into_owned();
        let b_blocks: Vec<SymMatrix<T>> = (0..k)
            .map(|j| SymMatrix::symmetrize(b_full.view((j * n, j * n), (n, n)).into_owned()))
            .collect();
        let traces: Vec<T> = b_blocks.iter().map(|b| b.trace()).collect();
        let beta = minimize_beta(rho, m, n, a.trace(), &traces, cfg.beta_bisect_tol);

        let w1 = trace_ball_project(&a, beta);
        let mut w2_full = b_full;
        for (j, b) in b_blocks.iter().enumerate() {
            let proj = trace_ball_project(b, beta);
            w2_full
                .view_mut((j * n, j * n), (n, n))
                .copy_from(proj.as_matrix());
        }
        let w2 = SymMatrix::symmetrize(w2_full);

        // E update: PSD projection of the stacked matrix minus Phi/rho.
        let s = assemble_stacked(&w1, x, &w2).into_matrix();
        let e_new = psd_project(&SymMatrix::symmetrize(&s - &u))?.into_matrix();

        // Dual ascent and residuals.
        let r = &e_new - &s;
        primal = r.norm();
        u += &r;
        dual = rho * (&s - &s_prev).norm();

        e = e_new;
        s_prev = s;

        let eps_pri = stop.primal_threshold(e.norm(), s_prev.norm());
        let eps_dual = stop.dual_threshold(rho * u.norm());
        if primal <= eps_pri && dual <= eps_dual {
            return Ok(DollarNormResult {
                value: beta,
                w1,
                w2,
                iters: iter,
                primal_residual: primal,
                dual_residual: dual,
            });
        }

        balance_rho(primal, dual, cfg.balance_mu, cfg.balance_tau, &mut rho, &mut u);
    }

    Err(Error::NonConvergence {
        max_iter: cfg.max_iter,
        primal: to_f64(primal),
        dual: to_f64(dual),
    })
}
