//! Comparison baselines: the spectral column-space estimator (top left
//! singular subspace of the backprojection) and full-gradient descent on
//! the factored model `X_k = U V_k^T` with Armijo backtracking.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::error::{Error, Result};
use crate::linalg::{thin_svd, BlockMatrix};
use crate::scalar::{from_f64, Scalar};
use crate::sensing::{MeasurementSet, SensingEnsemble};

/// Gradient-descent parameters.
#[derive(Debug, Clone)]
pub struct GdConfig<T> {
    pub max_iter: usize,
    /// Armijo sufficient-decrease constant, in (0, 1).
    pub armijo_c: T,
    /// Backtracking shrink factor, in (0, 1).
    pub armijo_shrink: T,
    /// Step size each line search starts from.
    pub init_step: T,
    /// Stop when `||grad||_F <= grad_tol * (1 + f)`.
    pub grad_tol: T,
}

impl<T: Scalar> GdConfig<T> {
    /// Defaults with the scale-aware step `1 / (L * (1 + sigma1)^2)`,
    /// where `sigma1` is the top singular value of the initialization.
    pub fn scaled(l: usize, sigma1: T) -> Self {
        let one = T::one();
        Self {
            max_iter: 2000,
            armijo_c: from_f64(1e-4),
            armijo_shrink: from_f64(0.5),
            init_step: one / (from_f64::<T>(l as f64) * (one + sigma1) * (one + sigma1)),
            grad_tol: from_f64(1e-8),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        let unit = [(self.armijo_c, "armijo_c"), (self.armijo_shrink, "armijo_shrink")];
        for (v, name) in unit {
            if !(v > T::zero() && v < T::one()) {
                return Err(Error::InvalidConfig(format!("{name} must lie in (0, 1)")));
            }
        }
        if !(self.init_step > T::zero()) || !(self.grad_tol > T::zero()) {
            return Err(Error::InvalidConfig(
                "init_step and grad_tol must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A factored iterate `(U, V_1, ..., V_K)`.
#[derive(Debug, Clone)]
pub struct FactoredIterate<T: Scalar> {
    /// `M x r`.
    pub u: DMatrix<T>,
    /// `K` factors, each `N x r`.
    pub v: Vec<DMatrix<T>>,
}

impl<T: Scalar> FactoredIterate<T> {
    /// Assembles the block matrix `[U V_1^T ... U V_K^T]`.
    pub fn assemble(&self) -> Result<BlockMatrix<T>> {
        let blocks: Vec<DMatrix<T>> = self.v.iter().map(|vk| &self.u * vk.transpose()).collect();
        BlockMatrix::from_blocks(&blocks)
    }

    /// Frobenius norm of all factors stacked.
    pub fn norm(&self) -> T {
        let mut acc = self.u.norm_squared();
        for vk in &self.v {
            acc += vk.norm_squared();
        }
        acc.sqrt()
    }
}

/// Gradient-descent failure: the line search could not find descent.
#[derive(Debug, Error)]
pub enum GdError<T: Scalar> {
    #[error("line search stalled after {shrinks} shrinks at objective {objective}")]
    Stalled {
        shrinks: usize,
        objective: f64,
        last: Box<FactoredIterate<T>>,
    },
    #[error(transparent)]
    Core(#[from] Error),
}

/// Top-`r` left singular subspace of a backprojection, as an `M x r`
/// matrix with orthonormal columns.
pub fn spectral_column_space<T: Scalar>(x0: &BlockMatrix<T>, r: usize) -> Result<DMatrix<T>> {
    let nk = x0.block_cols() * x0.num_blocks();
    if r == 0 || r > x0.rows().min(nk) {
        return Err(Error::Domain(format!(
            "rank {} outside [1, min(M, N*K) = {}]",
            r,
            x0.rows().min(nk)
        )));
    }
    let svd = thin_svd(x0.as_matrix())?;
    Ok(svd.u.columns(0, r).into_owned())
}

/// Balanced factorization of the rank-`r` truncation:
/// `U = U_r sqrt(S_r)`, `V_k = V_{r,k} sqrt(S_r)`.
pub fn spectral_init<T: Scalar>(x0: &BlockMatrix<T>, r: usize) -> Result<FactoredIterate<T>> {
    let (m, n, k) = (x0.rows(), x0.block_cols(), x0.num_blocks());
    if r == 0 || r > m.min(n * k) {
        return Err(Error::Domain(format!(
            "rank {} outside [1, min(M, N*K) = {}]",
            r,
            m.min(n * k)
        )));
    }
    let svd = thin_svd(x0.as_matrix())?;
    let mut u = svd.u.columns(0, r).into_owned();
    let mut v_full = svd.v.columns(0, r).into_owned();
    for j in 0..r {
        let s = svd.sigma[j].sqrt();
        u.column_mut(j).scale_mut(s);
        v_full.column_mut(j).scale_mut(s);
    }
    let v = (0..k)
        .map(|i| v_full.rows(i * n, n).into_owned())
        .collect();
    Ok(FactoredIterate { u, v })
}

/// Data-fit loss of a factored iterate together with the residual matrix
/// `res_{l,k} = y_{l,k} - <B_{l,k}, U V_k^T>`.
pub fn objective_and_residuals<T: Scalar>(
    ens: &SensingEnsemble<T>,
    ms: &MeasurementSet<T>,
    iterate: &FactoredIterate<T>,
) -> (T, DMatrix<T>) {
    let dims = ens.dims;
    let mut obj = T::zero();
    let mut res = DMatrix::zeros(dims.l, dims.k);
    for k in 0..dims.k {
        let xk = &iterate.u * iterate.v[k].transpose();
        for l in 0..dims.l {
            let r = ms.y[(l, k)] - ens.b(l, k).dot(&xk);
            res[(l, k)] = r;
            obj += r * r;
        }
    }
    (obj, res)
}

/// Gradients of the loss with respect to `U` and each `V_k`.
pub fn gradients<T: Scalar>(
    ens: &SensingEnsemble<T>,
    residuals: &DMatrix<T>,
    iterate: &FactoredIterate<T>,
) -> (DMatrix<T>, Vec<DMatrix<T>>) {
    let dims = ens.dims;
    let r = iterate.u.ncols();
    let two = from_f64::<T>(2.0);
    let mut grad_u = DMatrix::zeros(dims.m, r);
    let mut grad_v = Vec::with_capacity(dims.k);
    for k in 0..dims.k {
        // C_k = sum_l res_{l,k} B_{l,k}
        let mut ck: DMatrix<T> = DMatrix::zeros(dims.m, dims.n);
        for l in 0..dims.l {
            ck += ens.b(l, k) * residuals[(l, k)];
        }
        grad_u += &ck * &iterate.v[k] * (-two);
        grad_v.push(ck.transpose() * &iterate.u * (-two));
    }
    (grad_u, grad_v)
}

/// Minimizes `sum_{l,k} (y_{l,k} - <B_{l,k}, U V_k^T>)^2` by full-gradient
/// descent with Armijo backtracking. The objective never increases across
/// accepted steps.
pub fn gd_refine<T: Scalar>(
    ens: &SensingEnsemble<T>,
    ms: &MeasurementSet<T>,
    init: FactoredIterate<T>,
    cfg: &GdConfig<T>,
) -> std::result::Result<FactoredIterate<T>, GdError<T>> {
    cfg.validate()?;
    let dims = ens.dims;
    if init.u.nrows() != dims.m
        || init.v.len() != dims.k
        || init.v.iter().any(|vk| vk.nrows() != dims.n)
    {
        return Err(Error::dim_mismatch(
            format!("iterate U {}x{}, {} V factors", init.u.nrows(), init.u.ncols(), init.v.len()),
            format!("ensemble M={} N={} K={}", dims.m, dims.n, dims.k),
        )
        .into());
    }

    let mut current = init;
    let (mut obj, mut res) = objective_and_residuals(ens, ms, &current);
    for _ in 0..cfg.max_iter {
        let (grad_u, grad_v) = gradients(ens, &res, &current);
        let mut grad_sq = grad_u.norm_squared();
        for g in &grad_v {
            grad_sq += g.norm_squared();
        }
        if grad_sq.sqrt() <= cfg.grad_tol * (T::one() + obj) {
            return Ok(current);
        }

        let mut step = cfg.init_step;
        let mut accepted = false;
        for _shrink in 0..=60 {
            let trial = FactoredIterate {
                u: &current.u - &grad_u * step,
                v: current
                    .v
                    .iter()
                    .zip(&grad_v)
                    .map(|(vk, gk)| vk - gk * step)
                    .collect(),
            };
            let (trial_obj, trial_res) = objective_and_residuals(ens, ms, &trial);
            if trial_obj <= obj - cfg.armijo_c * step * grad_sq {
                current = trial;
                obj = trial_obj;
                res = trial_res;
                accepted = true;
                break;
            }
            step *= cfg.armijo_shrink;
        }
        if !accepted {
            let objective = crate::scalar::to_f64(obj);
            return Err(GdError::Stalled {
                shrinks: 60,
                objective,
                last: Box::new(current),
            });
        }
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_seed;
    use crate::sensing::{backproject, gen_ensemble, gen_ground_truth, measure, ProblemDims};

    const DIMS: ProblemDims = ProblemDims {
        m: 8,
        n: 2,
        k: 4,
        l: 12,
        r: 2,
    };

    fn principal_angle(u_true: &DMatrix<f64>, u_est: &DMatrix<f64>) -> f64 {
        let m = u_true.nrows();
        let proj = DMatrix::identity(m, m) - u_est * u_est.transpose();
        let residual = proj * u_true;
        thin_svd(&residual).unwrap().sigma[0]
    }

    #[test]
    fn spectral_recovers_exact_rank_r_column_space() {
        let gt = gen_ground_truth::<f64>(DIMS, 3).unwrap();
        let u_est = spectral_column_space(&gt.x, DIMS.r).unwrap();
        let r = DIMS.r;
        let gram = (u_est.transpose() * &u_est - DMatrix::identity(r, r)).norm();
        assert!(gram <= 1e-10);
        assert!(principal_angle(&gt.u, &u_est) <= 1e-8);
    }

    #[test]
    fn spectral_angle_grows_with_noise() {
        let mut medians = Vec::new();
        for (i, sigma) in [0.1f64, 1.0, 5.0].into_iter().enumerate() {
            let mut angles: Vec<f64> = (0..10)
                .map(|t| {
                    let gt =
                        gen_ground_truth::<f64>(DIMS, derive_seed(40, &[t, 0])).unwrap();
                    let ens = gen_ensemble::<f64>(DIMS, derive_seed(40, &[t, 1])).unwrap();
                    let ms =
                        measure(&gt.x, &ens, sigma, derive_seed(40, &[t, 2, i as u64])).unwrap();
                    let x0 = backproject(&ens, &ms).unwrap();
                    let u_est = spectral_column_space(&x0, DIMS.r).unwrap();
                    principal_angle(&gt.u, &u_est)
                })
                .collect();
            angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
            medians.push(0.5 * (angles[4] + angles[5]));
        }
        assert!(
            medians[0] < medians[1] && medians[1] < medians[2],
            "medians not increasing with noise: {medians:?}"
        );
    }

    #[test]
    fn spectral_init_reassembles_truncation() {
        let gt = gen_ground_truth::<f64>(DIMS, 5).unwrap();
        let ens = gen_ensemble::<f64>(DIMS, 6).unwrap();
        let ms = measure(&gt.x, &ens, 0.5, 7).unwrap();
        let x0 = backproject(&ens, &ms).unwrap();
        let init = spectral_init(&x0, DIMS.r).unwrap();

        let svd = thin_svd(x0.as_matrix()).unwrap();
        let truncated = svd.truncated(DIMS.r);
        let err = (init.assemble().unwrap().as_matrix() - &truncated).norm();
        assert!(err <= 1e-10);

        // balanced split of the singular values
        let u_sq = init.u.norm_squared();
        let v_sq: f64 = init.v.iter().map(|vk| vk.norm_squared()).sum();
        assert!((u_sq - v_sq).abs() <= 1e-10);
    }

    #[test]
    fn spectral_init_zero_matrix() {
        let x0 = BlockMatrix::<f64>::zeros(4, 2, 3);
        let init = spectral_init(&x0, 2).unwrap();
        assert_eq!(init.u.norm(), 0.0);
        assert!(init.v.iter().all(|vk| vk.norm() == 0.0));
    }

    #[test]
    fn gd_exact_init_is_fixed_point() {
        let gt = gen_ground_truth::<f64>(DIMS, 8).unwrap();
        let ens = gen_ensemble::<f64>(DIMS, 9).unwrap();
        let ms = measure(&gt.x, &ens, 0.0, 0).unwrap();
        let init = FactoredIterate {
            u: gt.u.clone(),
            v: gt.v.clone(),
        };
        let cfg = GdConfig::scaled(DIMS.l, 1.0);
        let refined = gd_refine(&ens, &ms, init.clone(), &cfg).unwrap();
        assert_eq!(refined.u, init.u);

        let (obj, res) = objective_and_residuals(&ens, &ms, &init);
        let (gu, gv) = gradients(&ens, &res, &init);
        let mut gsq = gu.norm_squared();
        for g in &gv {
            gsq += g.norm_squared();
        }
        let scale = 1.0 + obj + init.norm();
        assert!(gsq.sqrt() <= 1e-10 * scale, "gradient {} at optimum", gsq.sqrt());
    }

    #[test]
    fn gd_objective_never_increases() {
        let gt = gen_ground_truth::<f64>(DIMS, 10).unwrap();
        let ens = gen_ensemble::<f64>(DIMS, 11).unwrap();
        let ms = measure(&gt.x, &ens, 0.2, 12).unwrap();
        let x0 = backproject(&ens, &ms).unwrap();
        let init = spectral_init(&x0, DIMS.r).unwrap();
        let sigma1 = thin_svd(x0.as_matrix()).unwrap().sigma[0];
        let mut cfg = GdConfig::scaled(DIMS.l, sigma1);
        cfg.max_iter = 60;

        // run step by step and track the objective
        let mut iterate = init;
        let mut last_obj = objective_and_residuals(&ens, &ms, &iterate).0;
        for _ in 0..10 {
            let mut one_step = cfg.clone();
            one_step.max_iter = 1;
            iterate = match gd_refine(&ens, &ms, iterate, &one_step) {
                Ok(it) => it,
                Err(GdError::Stalled { last, .. }) => *last,
                Err(e) => panic!("{e}"),
            };
            let obj = objective_and_residuals(&ens, &ms, &iterate).0;
            assert!(obj <= last_obj + 1e-12, "objective increased: {obj} > {last_obj}");
            last_obj = obj;
        }
    }

    #[test]
    fn gd_gradients_match_finite_differences() {
        let dims = ProblemDims {
            m: 4,
            n: 2,
            k: 3,
            l: 5,
            r: 2,
        };
        let gt = gen_ground_truth::<f64>(dims, 13).unwrap();
        let ens = gen_ensemble::<f64>(dims, 14).unwrap();
        let ms = measure(&gt.x, &ens, 0.4, 15).unwrap();
        let x0 = backproject(&ens, &ms).unwrap();
        let point = spectral_init(&x0, dims.r).unwrap();

        let (_, res) = objective_and_residuals(&ens, &ms, &point);
        let (gu, gv) = gradients(&ens, &res, &point);

        let h = 1e-6;
        let fd = |pert: &FactoredIterate<f64>| objective_and_residuals(&ens, &ms, pert).0;
        // all entries of U and every V_k
        for i in 0..dims.m {
            for j in 0..dims.r {
                let mut plus = point.clone();
                plus.u[(i, j)] += h;
                let mut minus = point.clone();
                minus.u[(i, j)] -= h;
                let est = (fd(&plus) - fd(&minus)) / (2.0 * h);
                let rel = (est - gu[(i, j)]).abs() / (1.0 + gu[(i, j)].abs());
                assert!(rel <= 1e-5, "dU[{i},{j}] mismatch: fd {est} vs {}", gu[(i, j)]);
            }
        }
        for k in 0..dims.k {
            for i in 0..dims.n {
                for j in 0..dims.r {
                    let mut plus = point.clone();
                    plus.v[k][(i, j)] += h;
                    let mut minus = point.clone();
                    minus.v[k][(i, j)] -= h;
                    let est = (fd(&plus) - fd(&minus)) / (2.0 * h);
                    let rel = (est - gv[k][(i, j)]).abs() / (1.0 + gv[k][(i, j)].abs());
                    assert!(rel <= 1e-5, "dV{k}[{i},{j}] mismatch");
                }
            }
        }
    }

    #[test]
    fn gd_refine_reduces_error_from_spectral_init() {
        let gt = gen_ground_truth::<f64>(DIMS, 16).unwrap();
        let ens = gen_ensemble::<f64>(DIMS, 17).unwrap();
        let ms = measure(&gt.x, &ens, 0.0, 0).unwrap();
        let x0 = backproject(&ens, &ms).unwrap();
        let init = spectral_init(&x0, DIMS.r).unwrap();
        let sigma1 = thin_svd(x0.as_matrix()).unwrap().sigma[0];
        let cfg = GdConfig::scaled(DIMS.l, sigma1);
        let init_err =
            (init.assemble().unwrap().as_matrix() - gt.x.as_matrix()).norm();
        let refined = gd_refine(&ens, &ms, init, &cfg).unwrap();
        let err = (refined.assemble().unwrap().as_matrix() - gt.x.as_matrix()).norm();
        assert!(err < init_err, "gd did not improve: {err} >= {init_err}");
    }
}
