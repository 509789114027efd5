//! Thin wrapper over the LAPACK nonsymmetric eigensolver plus small dense helpers.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{AclError, Result};

pub type C64 = Complex<f64>;

/// Eigenpairs of a real square matrix (`dgeev`), right eigenvectors only.
pub fn eig(a: &DMatrix<f64>) -> Result<Vec<(C64, DVector<C64>)>> {
    let n = a.nrows();
    assert_eq!(a.shape(), (n, n));
    let mut a = a.clone();
    let ni = n as i32;
    let mut wr = vec![0.0; n];
    let mut wi = vec![0.0; n];
    let mut vl = vec![0.0; 1];
    let mut vr = vec![0.0; n * n];
    let mut info = 0;

    let mut query = [0.0];
    unsafe {
        lapack::dgeev(
            b'N',
            b'V',
            ni,
            a.as_mut_slice(),
            ni,
            &mut wr,
            &mut wi,
            &mut vl,
            1,
            &mut vr,
            ni,
            &mut query,
            -1,
            &mut info,
        );
    }
    if info != 0 {
        return Err(AclError::ConvergenceFailure(format!(
            "dgeev workspace query: info = {info}"
        )));
    }
    let lwork = (query[0] as usize).max(4 * n);
    let mut work = vec![0.0; lwork];
    unsafe {
        lapack::dgeev(
            b'N',
            b'V',
            ni,
            a.as_mut_slice(),
            ni,
            &mut wr,
            &mut wi,
            &mut vl,
            1,
            &mut vr,
            ni,
            &mut work,
            lwork as i32,
            &mut info,
        );
    }
    if info != 0 {
        return Err(AclError::ConvergenceFailure(format!(
            "dgeev: QR iteration failed, info = {info}"
        )));
    }

    let column = |j: usize| &vr[j * n..(j + 1) * n];
    let mut out = Vec::with_capacity(n);
    let mut j = 0;
    while j < n {
        let lambda = C64::new(wr[j], wi[j]);
        if wi[j] == 0.0 {
            let v = DVector::from_iterator(n, column(j).iter().map(|&x| C64::new(x, 0.0)));
            out.push((lambda, v));
            j += 1;
        } else {
            // Complex pair stored as (re, im) in consecutive columns.
            let (re, im) = (column(j), column(j + 1));
            let v = DVector::from_iterator(n, re.iter().zip(im).map(|(&r, &i)| C64::new(r, i)));
            out.push((lambda, v.clone()));
            out.push((C64::new(wr[j + 1], wi[j + 1]), v.map(|z| z.conj())));
            j += 2;
        }
    }
    Ok(out)
}

/// Real matrix times complex vector.
pub fn real_mul(m: &DMatrix<f64>, x: &DVector<C64>) -> DVector<C64> {
    let re = m * x.map(|z| z.re);
    let im = m * x.map(|z| z.im);
    DVector::from_iterator(
        x.len(),
        re.iter().zip(im.iter()).map(|(&r, &i)| C64::new(r, i)),
    )
}

/// Largest absolute row sum.
pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}
