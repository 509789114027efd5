fn main() {
    // Link the reference LAPACK/BLAS statically. The system alternatives may resolve to an
    // OpenBLAS whose auto-selected AVX-512 kernels return wrong eigenvalues on some CPUs.
    let dir = "/usr/lib/x86_64-linux-gnu";
    println!("cargo:rustc-link-search=native={dir}/lapack");
    println!("cargo:rustc-link-search=native={dir}/blas");
    println!("cargo:rustc-link-lib=static=lapack");
    println!("cargo:rustc-link-lib=static=blas");
    println!("cargo:rustc-link-lib=dylib=gfortran");
    println!("cargo:rerun-if-changed=build.rs");
}
