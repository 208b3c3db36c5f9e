fn main() {
    // SVD and symmetric eigensolvers come from the system LAPACK.
    println!("cargo:rustc-link-lib=dylib=lapack");
}
