fn main() {
    // Symmetric eigendecompositions go through the system LAPACK
    // (shipped inside OpenBLAS); see scalar::lapack.
    println!("cargo:rustc-link-lib=dylib=openblas");
}
