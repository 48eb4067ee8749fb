//! Scalar abstraction for the numeric core.

use nalgebra::{DMatrix, DVector};
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar type the whole crate is generic over.
///
/// Implemented for `f32` and `f64`. Random data is always drawn in `f64`
/// and converted, so streams generated for different scalar types agree up
/// to rounding.
pub trait Scalar: nalgebra::RealField + Copy + FromPrimitive + ToPrimitive {
    /// Symmetric eigendecomposition through the system LAPACK (`?syevd`),
    /// eigenvalues ascending. `None` signals a LAPACK failure and sends
    /// the caller to the pure-Rust fallback.
    fn lapack_syevd(a: DMatrix<Self>) -> Option<(DVector<Self>, DMatrix<Self>)>;
}

impl Scalar for f64 {
    fn lapack_syevd(a: DMatrix<Self>) -> Option<(DVector<Self>, DMatrix<Self>)> {
        lapack::dsyevd(a)
    }
}

impl Scalar for f32 {
    fn lapack_syevd(a: DMatrix<Self>) -> Option<(DVector<Self>, DMatrix<Self>)> {
        lapack::ssyevd(a)
    }
}

/// Shorthand conversion from an `f64` literal.
#[inline]
pub fn from_f64<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("f64 is representable in every supported scalar")
}

/// Lossy conversion to `f64`, for diagnostics and file output.
#[inline]
pub fn to_f64<T: Scalar>(x: T) -> f64 {
    x.to_f64().expect("every supported scalar converts to f64")
}

/// Minimal bindings to the divide-and-conquer symmetric eigensolvers of
/// the system LAPACK. OpenBLAS is pinned to one thread: the solvers here
/// run on small matrices inside already-parallel trial loops, and a fixed
/// thread count keeps results bit-reproducible.
mod lapack {
    use nalgebra::{DMatrix, DVector};
    use std::os::raw::{c_char, c_int};
    use std::sync::Once;

    extern "C" {
        fn openblas_set_num_threads(n: c_int);
        fn dsyevd_(
            jobz: *const c_char,
            uplo: *const c_char,
            n: *const c_int,
            a: *mut f64,
            lda: *const c_int,
            w: *mut f64,
            work: *mut f64,
            lwork: *const c_int,
            iwork: *mut c_int,
            liwork: *const c_int,
            info: *mut c_int,
        );
        fn ssyevd_(
            jobz: *const c_char,
            uplo: *const c_char,
            n: *const c_int,
            a: *mut f32,
            lda: *const c_int,
            w: *mut f32,
            work: *mut f32,
            lwork: *const c_int,
            iwork: *mut c_int,
            liwork: *const c_int,
            info: *mut c_int,
        );
    }

    fn pin_threads() {
        static ONCE: Once = Once::new();
        ONCE.call_once(|| unsafe { openblas_set_num_threads(1) });
    }

    macro_rules! syevd_impl {
        ($name:ident, $ty:ty, $routine:ident) => {
            pub(super) fn $name(mut a: DMatrix<$ty>) -> Option<(DVector<$ty>, DMatrix<$ty>)> {
                let dim = a.nrows();
                if dim == 0 || dim != a.ncols() || dim > c_int::MAX as usize {
                    return None;
                }
                pin_threads();
                let n = dim as c_int;
                let jobz = b'V' as c_char;
                let uplo = b'L' as c_char;
                let mut w = vec![0 as $ty; dim];
                let mut info: c_int = 0;
                let query: c_int = -1;
                let mut work_len = [0 as $ty];
                let mut iwork_len = [0 as c_int];
                unsafe {
                    $routine(
                        &jobz,
                        &uplo,
                        &n,
                        a.as_mut_slice().as_mut_ptr(),
                        &n,
                        w.as_mut_ptr(),
                        work_len.as_mut_ptr(),
                        &query,
                        iwork_len.as_mut_ptr(),
                        &query,
                        &mut info,
                    );
                }
                if info != 0 {
                    return None;
                }
                let lwork = work_len[0] as c_int;
                let liwork = iwork_len[0];
                let mut work = vec![0 as $ty; lwork as usize];
                let mut iwork = vec![0 as c_int; liwork as usize];
                unsafe {
                    $routine(
                        &jobz,
                        &uplo,
                        &n,
                        a.as_mut_slice().as_mut_ptr(),
                        &n,
                        w.as_mut_ptr(),
                        work.as_mut_ptr(),
                        &lwork,
                        iwork.as_mut_ptr(),
                        &liwork,
                        &mut info,
                    );
                }
                if info != 0 {
                    return None;
                }
                // eigenvalues ascending, eigenvectors in the columns of a
                Some((DVector::from_vec(w), a))
            }
        };
    }

    syevd_impl!(dsyevd, f64, dsyevd_);
    syevd_impl!(ssyevd, f32, ssyevd_);
}
