//! Ground-truth generation, Gaussian sensing ensembles, noisy block-wise
//! measurements, backprojection, and data-driven `(alpha, beta)` estimates.
//!
//! Everything here is a pure function of its dimensions and a 64-bit seed;
//! see [`crate::rng`] for the generator and sampling conventions.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{thin_svd, BlockMatrix};
use crate::norms::{dollar_norm, inf_frob_norm, DollarNormSolverConfig};
use crate::rng::{rng_from_seed, sample_standard_normal};
use crate::scalar::{from_f64, Scalar};

/// Problem dimensions: `K` blocks of size `M x N`, rank `r`, `L` sketches
/// per block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProblemDims {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub l: usize,
    pub r: usize,
}

impl ProblemDims {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 || self.k == 0 || self.l == 0 || self.r == 0 {
            return Err(Error::InvalidConfig("all dimensions must be positive".into()));
        }
        if self.r > self.m.min(self.n * self.k) {
            return Err(Error::InvalidConfig(format!(
                "rank {} exceeds min(M, N*K) = {}",
                self.r,
                self.m.min(self.n * self.k)
            )));
        }
        Ok(())
    }
}

/// A rank-`r` target with a shared left factor: `X_k = U V_k^T`.
#[derive(Debug, Clone)]
pub struct GroundTruth<T: Scalar> {
    /// `M x r`, orthonormal columns.
    pub u: DMatrix<T>,
    /// `K` right factors, each `N x r`.
    pub v: Vec<DMatrix<T>>,
    /// The assembled block matrix.
    pub x: BlockMatrix<T>,
}

/// The `L x K` array of `M x N` sensing matrices, regenerable from
/// `(dims, seed)` bit-for-bit.
#[derive(Debug, Clone)]
pub struct SensingEnsemble<T: Scalar> {
    pub dims: ProblemDims,
    pub seed: u64,
    b: Vec<DMatrix<T>>,
}

impl<T: Scalar> SensingEnsemble<T> {
    /// Sensing matrix `B_{l,k}`.
    pub fn b(&self, l: usize, k: usize) -> &DMatrix<T> {
        assert!(l < self.dims.l && k < self.dims.k);
        &self.b[l * self.dims.k + k]
    }

    /// Stacks the vectorized sensing matrices of block `k` as the rows of
    /// an `L x (M*N)` matrix (column-major vectorization).
    pub fn stacked_rows(&self, k: usize) -> DMatrix<T> {
        let (m, n, l) = (self.dims.m, self.dims.n, self.dims.l);
        let mut out = DMatrix::zeros(l, m * n);
        for li in 0..l {
            for (j, v) in self.b(li, k).iter().enumerate() {
                out[(li, j)] = *v;
            }
        }
        out
    }
}

/// Measurements `y_{l,k}` with the noise level and noise seed that
/// produced them. Files written by [`crate::io`] do not carry the seed;
/// readers set it to zero.
#[derive(Debug, Clone)]
pub struct MeasurementSet<T: Scalar> {
    /// `L x K`.
    pub y: DMatrix<T>,
    pub sigma: T,
    pub seed: u64,
}

/// Draws `U` uniformly from the Stiefel manifold (Q factor of a Gaussian
/// matrix) and `V_k` with i.i.d. standard Gaussian entries.
pub fn gen_ground_truth<T: Scalar>(dims: ProblemDims, seed: u64) -> Result<GroundTruth<T>> {
    dims.validate()?;
    let mut rng = rng_from_seed(seed);
    let g: Vec<T> = (0..dims.m * dims.r)
        .map(|_| sample_standard_normal(&mut rng))
        .collect();
    let g = DMatrix::from_vec(dims.m, dims.r, g);
    let u = g.qr().q();

    let mut v = Vec::with_capacity(dims.k);
    let mut x = BlockMatrix::zeros(dims.m, dims.n, dims.k);
    for k in 0..dims.k {
        let vk: Vec<T> = (0..dims.n * dims.r)
            .map(|_| sample_standard_normal(&mut rng))
            .collect();
        let vk = DMatrix::from_vec(dims.n, dims.r, vk);
        x.set_block(k, &(&u * vk.transpose()));
        v.push(vk);
    }
    Ok(GroundTruth { u, v, x })
}

/// Draws the `L*K` sensing matrices with i.i.d. `N(0, 1)` entries, in
/// `(l, k)` row-major order, each matrix filled column-major.
pub fn gen_ensemble<T: Scalar>(dims: ProblemDims, seed: u64) -> Result<SensingEnsemble<T>> {
    dims.validate()?;
    let mut rng = rng_from_seed(seed);
    let mut b = Vec::with_capacity(dims.l * dims.k);
    for _ in 0..dims.l * dims.k {
        let data: Vec<T> = (0..dims.m * dims.n)
            .map(|_| sample_standard_normal(&mut rng))
            .collect();
        b.push(DMatrix::from_vec(dims.m, dims.n, data));
    }
    Ok(SensingEnsemble { dims, seed, b })
}

/// Measures `y_{l,k} = <B_{l,k}, X_k> + w_{l,k}` with `w` i.i.d.
/// `N(0, sigma^2)`; `sigma = 0` gives exact linear measurements.
pub fn measure<T: Scalar>(
    x: &BlockMatrix<T>,
    ens: &SensingEnsemble<T>,
    sigma: T,
    noise_seed: u64,
) -> Result<MeasurementSet<T>> {
    let dims = ens.dims;
    if x.rows() != dims.m || x.block_cols() != dims.n || x.num_blocks() != dims.k {
        return Err(Error::dim_mismatch(
            format!("X {}x{} ({} blocks)", x.rows(), x.block_cols(), x.num_blocks()),
            format!("ensemble {}x{} ({} blocks)", dims.m, dims.n, dims.k),
        ));
    }
    if sigma < T::zero() {
        return Err(Error::InvalidConfig("sigma must be nonnegative".into()));
    }
    let mut rng = rng_from_seed(noise_seed);
    let mut y = DMatrix::zeros(dims.l, dims.k);
    for l in 0..dims.l {
        for k in 0..dims.k {
            let mut v = ens.b(l, k).dot(&x.block(k));
            if sigma > T::zero() {
                v += sigma * sample_standard_normal::<T>(&mut rng);
            }
            y[(l, k)] = v;
        }
    }
    Ok(MeasurementSet {
        y,
        sigma,
        seed: noise_seed,
    })
}

/// Noise level giving `snr_linear(X, sigma) = 10^(snr_db / 10)`.
pub fn sigma_for_snr_db<T: Scalar>(x: &BlockMatrix<T>, snr_db: T) -> Result<T> {
    let f = x.frobenius_norm();
    if f == T::zero() {
        return Err(Error::ZeroMatrix);
    }
    let k = from_f64::<T>(x.num_blocks() as f64);
    let ten = from_f64::<T>(10.0);
    let snr = ten.powf(snr_db / ten);
    Ok(f / (k * snr).sqrt())
}

/// Unbiased backprojection: block `k` is `(1/L) sum_l y_{l,k} B_{l,k}`.
pub fn backproject<T: Scalar>(
    ens: &SensingEnsemble<T>,
    ms: &MeasurementSet<T>,
) -> Result<BlockMatrix<T>> {
    let dims = ens.dims;
    if ms.y.nrows() != dims.l || ms.y.ncols() != dims.k {
        return Err(Error::dim_mismatch(
            format!("measurements {}x{}", ms.y.nrows(), ms.y.ncols()),
            format!("ensemble L={} K={}", dims.l, dims.k),
        ));
    }
    let inv_l = T::one() / from_f64::<T>(dims.l as f64);
    let mut x0 = BlockMatrix::zeros(dims.m, dims.n, dims.k);
    for k in 0..dims.k {
        let mut acc = DMatrix::zeros(dims.m, dims.n);
        for l in 0..dims.l {
            acc += ens.b(l, k) * ms.y[(l, k)];
        }
        x0.set_block(k, &(acc * inv_l));
    }
    Ok(x0)
}

/// Data-fit loss `sum_{l,k} (y_{l,k} - <B_{l,k}, X_k>)^2`.
pub fn data_fit_objective<T: Scalar>(
    ens: &SensingEnsemble<T>,
    ms: &MeasurementSet<T>,
    x: &BlockMatrix<T>,
) -> Result<T> {
    let dims = ens.dims;
    if ms.y.nrows() != dims.l || ms.y.ncols() != dims.k || x.rows() != dims.m
        || x.block_cols() != dims.n || x.num_blocks() != dims.k
    {
        return Err(Error::dim_mismatch(
            format!("y {}x{}, X {}x{}", ms.y.nrows(), ms.y.ncols(), x.rows(), x.block_cols()),
            format!("ensemble M={} N={} K={} L={}", dims.m, dims.n, dims.k, dims.l),
        ));
    }
    let mut acc = T::zero();
    for l in 0..dims.l {
        for k in 0..dims.k {
            let r = ms.y[(l, k)] - ens.b(l, k).dot(&x.block(k));
            acc += r * r;
        }
    }
    Ok(acc)
}

/// Norm estimates from the rank-`r` truncation of a backprojection:
/// `alpha_hat = ||X0^(r)||_{inf,F}` and `beta_hat = ||X0^(r)||_$`.
pub fn estimate_alpha_beta<T: Scalar>(
    x0: &BlockMatrix<T>,
    r: usize,
    cfg: &DollarNormSolverConfig<T>,
) -> Result<(T, T)> {
    let nk = x0.block_cols() * x0.num_blocks();
    if r == 0 || r > x0.rows().min(nk) {
        return Err(Error::Domain(format!(
            "rank {} outside [1, min(M, N*K) = {}]",
            r,
            x0.rows().min(nk)
        )));
    }
    let svd = thin_svd(x0.as_matrix())?;
    let truncated = BlockMatrix::new(
        x0.rows(),
        x0.block_cols(),
        x0.num_blocks(),
        svd.truncated(r),
    )?;
    let alpha = inf_frob_norm(&truncated);
    let beta = dollar_norm(&truncated, cfg)?.value;
    Ok((alpha, beta))
}
