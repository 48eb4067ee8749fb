//! Evaluable theory: the sample-rate threshold, the minimax risk lower
//! bound, and the random packing-set construction behind it.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::BlockMatrix;
use crate::rng::rng_from_seed;
use crate::scalar::{from_f64, Scalar};

/// Inputs to the bound formulas.
#[derive(Debug, Clone, Copy)]
pub struct BoundInputs<T> {
    pub alpha: T,
    pub beta: T,
    pub sigma: T,
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub l: usize,
    /// The unspecified numerical constant of the sample-rate condition;
    /// the threshold is a relative scale, never an absolute pass/fail.
    pub c: T,
}

/// Sample-rate threshold `C (beta/alpha)^2 N (N + M/K) (ln K)^3`;
/// returns `0` at `K = 1` by convention.
pub fn sample_rate_threshold<T: Scalar>(b: &BoundInputs<T>) -> T {
    if b.k <= 1 {
        return T::zero();
    }
    let ratio = b.beta / b.alpha;
    let n = from_f64::<T>(b.n as f64);
    let m_over_k = from_f64::<T>(b.m as f64 / b.k as f64);
    let ln_k = from_f64::<T>((b.k as f64).ln());
    b.c * ratio * ratio * n * (n + m_over_k) * ln_k * ln_k * ln_k
}

/// Minimax Frobenius-risk lower bound
/// `alpha^2/16 * min(1, sigma/(8 sqrt(2) alpha)
///  * sqrt((beta/alpha)^2 max(M, NK) / (L K)))`.
///
/// Requires `(beta/alpha)^2 max(M, NK) >= 48`.
pub fn minimax_lower_bound<T: Scalar>(b: &BoundInputs<T>) -> Result<T> {
    let ratio = b.beta / b.alpha;
    let max_dim = from_f64::<T>(b.m.max(b.n * b.k) as f64);
    let condition = ratio * ratio * max_dim;
    let fortyeight = from_f64::<T>(48.0);
    if condition < fortyeight {
        return Err(Error::Domain(format!(
            "(beta/alpha)^2 * max(M, NK) = {} violates the >= 48 requirement",
            crate::scalar::to_f64(condition)
        )));
    }
    let sixteen = from_f64::<T>(16.0);
    let eight_sqrt2 = from_f64::<T>(8.0) * from_f64::<T>(2.0).sqrt();
    let lk = from_f64::<T>((b.l * b.k) as f64);
    let noise_factor = b.sigma / (eight_sqrt2 * b.alpha) * (condition / lk).sqrt();
    Ok(b.alpha * b.alpha / sixteen * noise_factor.min(T::one()))
}

/// Draws one packing matrix: the first `b_rows` rows have i.i.d. uniform
/// `+-(gamma alpha / sqrt(M N))` entries and row `m` copies row
/// `m mod b_rows`, so every entry has the same magnitude,
/// `||H||_{inf,F} = gamma alpha`, `||H||_F^2 = K gamma^2 alpha^2`, and
/// `rank(H) <= b_rows`.
pub fn gen_packing_matrix<T: Scalar>(
    m: usize,
    n: usize,
    k: usize,
    alpha: T,
    gamma: T,
    b_rows: usize,
    seed: u64,
) -> Result<BlockMatrix<T>> {
    if b_rows == 0 || b_rows > m {
        return Err(Error::Domain(format!(
            "replicated row count {b_rows} outside [1, M = {m}]"
        )));
    }
    if gamma > T::one() || !(gamma > T::zero()) {
        return Err(Error::Domain("gamma must lie in (0, 1]".into()));
    }
    if !(alpha > T::zero()) {
        return Err(Error::Domain("alpha must be positive".into()));
    }
    let magnitude = gamma * alpha / from_f64::<T>((m * n) as f64).sqrt();
    let mut rng = rng_from_seed(seed);
    let mut data = nalgebra::DMatrix::zeros(m, n * k);
    // base rows sampled in column-major order over (row, column)
    for col in 0..n * k {
        for row in 0..b_rows {
            let sign: bool = rng.random();
            data[(row, col)] = if sign { magnitude } else { -magnitude };
        }
    }
    for row in b_rows..m {
        for col in 0..n * k {
            data[(row, col)] = data[(row % b_rows, col)];
        }
    }
    BlockMatrix::new(m, n, k, data)
}

/// Per-matrix norm identities of a packing candidate.
#[derive(Debug, Clone)]
pub struct PackingNorms<T> {
    /// `||H||_{inf,F}`; should equal `gamma * alpha`.
    pub inf_frob: T,
    /// `||H||_F^2`; should equal `K * gamma^2 * alpha^2`.
    pub frob_sq: T,
}

/// Report of [`verify_packing`].
#[derive(Debug, Clone)]
pub struct PackingReport<T> {
    /// Smallest squared pairwise distance, `None` for a singleton set.
    pub min_pair_dist_sq: Option<T>,
    /// The Lemma threshold `K gamma^2 alpha^2 / 2`.
    pub pair_threshold: T,
    /// Whether every distinct pair exceeds the threshold (vacuously true
    /// for a singleton).
    pub pair_check: bool,
    pub matrices: Vec<PackingNorms<T>>,
}

/// Checks the packing properties: pairwise squared distances above
/// `K gamma^2 alpha^2 / 2` and the per-matrix norm identities.
pub fn verify_packing<T: Scalar>(
    set: &[BlockMatrix<T>],
    alpha: T,
    gamma: T,
    k: usize,
) -> Result<PackingReport<T>> {
    let first = set
        .first()
        .ok_or_else(|| Error::Domain("packing set is empty".into()))?;
    let shape = (first.rows(), first.block_cols(), first.num_blocks());
    if shape.2 != k {
        return Err(Error::dim_mismatch(
            format!("{} blocks", shape.2),
            format!("K = {k}"),
        ));
    }
    for h in set {
        if (h.rows(), h.block_cols(), h.num_blocks()) != shape {
            return Err(Error::dim_mismatch(
                format!("{}x{} ({} blocks)", h.rows(), h.block_cols(), h.num_blocks()),
                format!("{}x{} ({} blocks)", shape.0, shape.1, shape.2),
            ));
        }
    }

    let matrices = set
        .iter()
        .map(|h| {
            let f = h.frobenius_norm();
            PackingNorms {
                inf_frob: crate::norms::inf_frob_norm(h),
                frob_sq: f * f,
            }
        })
        .collect();

    let threshold = from_f64::<T>(k as f64) * gamma * gamma * alpha * alpha / from_f64::<T>(2.0);
    let mut min_dist: Option<T> = None;
    for i in 0..set.len() {
        for j in (i + 1)..set.len() {
            let d = (set[i].as_matrix() - set[j].as_matrix()).norm_squared();
            min_dist = Some(match min_dist {
                Some(cur) => cur.min(d),
                None => d,
            });
        }
    }
    let pair_check = match min_dist {
        Some(d) => d > threshold,
        None => true,
    };
    Ok(PackingReport {
        min_pair_dist_sq: min_dist,
        pair_threshold: threshold,
        pair_check,
        matrices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::thin_svd;
    use crate::norms::{dollar_norm, inf_frob_norm, DollarNormSolverConfig};
    use crate::rng::derive_seed;

    fn inputs(alpha: f64, beta: f64, sigma: f64, m: usize, n: usize, k: usize, l: usize) -> BoundInputs<f64> {
        BoundInputs {
            alpha,
            beta,
            sigma,
            m,
            n,
            k,
            l,
            c: 1.0,
        }
    }

    #[test]
    fn sample_rate_structure() {
        // with N = 1, M = K the non-log factor is exactly 2
        for k in [3usize, 8, 20] {
            let b = inputs(1.0, 1.0, 0.0, k, 1, k, 1);
            let t = sample_rate_threshold(&b);
            let logs = (k as f64).ln().powi(3);
            assert!((t / logs - 2.0).abs() <= 1e-12);
        }
        // quadratic in beta / alpha
        let b1 = inputs(1.0, 2.0, 0.0, 10, 3, 5, 1);
        let b2 = inputs(1.0, 4.0, 0.0, 10, 3, 5, 1);
        assert!((sample_rate_threshold(&b2) / sample_rate_threshold(&b1) - 4.0).abs() <= 1e-12);
        // K = 1 convention
        assert_eq!(sample_rate_threshold(&inputs(1.0, 3.0, 0.0, 5, 2, 1, 1)), 0.0);
    }

    #[test]
    fn minimax_bound_examples() {
        // zero noise kills the bound
        let b = inputs(1.0, 7.0, 0.0, 100, 1, 100, 100);
        assert_eq!(minimax_lower_bound(&b).unwrap(), 0.0);

        // huge noise saturates the min at alpha^2 / 16
        let b = inputs(1.0, 7.0, 1e9, 100, 1, 100, 100);
        assert!((minimax_lower_bound(&b).unwrap() - 1.0 / 16.0).abs() <= 1e-15);

        // worked example: inner sqrt = 0.7, bound = 0.7 / (8 sqrt 2) / 16
        let b = inputs(1.0, 7.0, 1.0, 100, 1, 100, 100);
        let expected = 0.7 / (8.0 * 2.0_f64.sqrt()) / 16.0;
        let got = minimax_lower_bound(&b).unwrap();
        assert!((got - expected).abs() <= 1e-12, "got {got}, expected {expected}");
        assert!((got - 0.003867).abs() <= 5e-7);

        // precondition violation names the inequality
        let b = inputs(1.0, 1.0, 1.0, 4, 2, 2, 10);
        assert!(matches!(minimax_lower_bound(&b), Err(Error::Domain(_))));
    }

    #[test]
    fn minimax_bound_monotonicity_grid() {
        // non-increasing in L, non-decreasing in sigma
        for sigma_idx in 0..4 {
            let sigma = 0.25 * (sigma_idx + 1) as f64;
            let mut prev = f64::INFINITY;
            for l in [10usize, 20, 40, 80] {
                let b = inputs(1.0, 7.0, sigma, 100, 1, 100, l);
                let v = minimax_lower_bound(&b).unwrap();
                assert!(v <= prev + 1e-15);
                prev = v;
            }
        }
        for l in [10usize, 40] {
            let mut prev = 0.0;
            for sigma_idx in 0..5 {
                let sigma = 0.5 * sigma_idx as f64;
                let b = inputs(1.0, 7.0, sigma, 100, 1, 100, l);
                let v = minimax_lower_bound(&b).unwrap();
                assert!(v >= prev - 1e-15);
                prev = v;
            }
        }
    }

    #[test]
    fn packing_matrix_exact_identities() {
        let (m, n, k, b_rows) = (16usize, 2usize, 8usize, 4usize);
        let (alpha, gamma) = (1.3, 0.5);
        for t in 0..5u64 {
            let h = gen_packing_matrix::<f64>(m, n, k, alpha, gamma, b_rows, derive_seed(9, &[t]))
                .unwrap();
            let magnitude = gamma * alpha / ((m * n) as f64).sqrt();
            for v in h.as_matrix().iter() {
                assert!((v.abs() - magnitude).abs() <= 1e-15);
            }
            assert!((inf_frob_norm(&h) - gamma * alpha).abs() <= 1e-12 * gamma * alpha);
            let fro_sq = h.frobenius_norm().powi(2);
            let expected = k as f64 * gamma * gamma * alpha * alpha;
            assert!((fro_sq - expected).abs() <= 1e-12 * expected);

            let svd = thin_svd(h.as_matrix()).unwrap();
            assert!(
                svd.sigma[b_rows] <= 1e-10 * svd.sigma[0],
                "rank exceeds {b_rows}"
            );
        }
    }

    #[test]
    fn packing_matrix_without_replication() {
        let h = gen_packing_matrix::<f64>(4, 2, 3, 1.0, 1.0, 4, 77).unwrap();
        assert!((inf_frob_norm(&h) - 1.0).abs() <= 1e-12);
        let fro_sq = h.frobenius_norm().powi(2);
        assert!((fro_sq - 3.0).abs() <= 1e-12 * 3.0);
    }

    #[test]
    fn packing_rejects_bad_arguments() {
        assert!(gen_packing_matrix::<f64>(4, 2, 3, 1.0, 1.0, 5, 0).is_err());
        assert!(gen_packing_matrix::<f64>(4, 2, 3, 1.0, 1.5, 2, 0).is_err());
    }

    #[test]
    fn verify_packing_singleton_and_mirror() {
        let h = gen_packing_matrix::<f64>(8, 2, 4, 1.0, 0.5, 4, 3).unwrap();
        let report = verify_packing(&[h.clone()], 1.0, 0.5, 4).unwrap();
        assert!(report.pair_check);
        assert!(report.min_pair_dist_sq.is_none());

        let neg = BlockMatrix::new(8, 2, 4, -h.as_matrix().clone()).unwrap();
        let report = verify_packing(&[h, neg], 1.0, 0.5, 4).unwrap();
        let d = report.min_pair_dist_sq.unwrap();
        // entries flip sign, so the distance is 4 ||H||_F^2 = 4 K g^2 a^2
        let expected = 4.0 * 4.0 * 0.25;
        assert!((d - expected).abs() <= 1e-12 * expected);
        assert!(report.pair_check);
    }

    #[test]
    fn packing_set_pair_check_passes_with_retries() {
        let (m, n, k, b_rows) = (16usize, 2usize, 8usize, 4usize);
        let mut successes = 0;
        for attempt in 0..20u64 {
            let set: Vec<_> = (0..10)
                .map(|i| {
                    gen_packing_matrix::<f64>(m, n, k, 1.0, 0.5, b_rows, derive_seed(50, &[attempt, i]))
                        .unwrap()
                })
                .collect();
            if verify_packing(&set, 1.0, 0.5, k).unwrap().pair_check {
                successes += 1;
            }
        }
        assert!(successes >= 10, "only {successes}/20 regenerations passed");
    }

    #[test]
    fn packing_dollar_norm_bound() {
        let cfg = DollarNormSolverConfig::default();
        let (m, n, k, b_rows) = (16usize, 2usize, 8usize, 4usize);
        for t in 0..3u64 {
            let h =
                gen_packing_matrix::<f64>(m, n, k, 1.0, 0.5, b_rows, derive_seed(60, &[t])).unwrap();
            let value = dollar_norm(&h, &cfg).unwrap().value;
            let bound = (b_rows as f64).sqrt() * 0.5 * (1.0 + 1e-3);
            assert!(value <= bound, "dollar norm {value} exceeds sqrt(B) gamma alpha");
        }
    }
}
