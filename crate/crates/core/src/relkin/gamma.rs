use num_complex::Complex64;

use crate::{Error, Result};

/// A Dirac spinor at one spacetime point.
pub type Spinor = [Complex64; 4];
/// A 4x4 complex matrix in row-major order.
pub type Mat4 = [[Complex64; 4]; 4];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn identity() -> Mat4 {
    let mut m = [[ZERO; 4]; 4];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = ONE;
    }
    m
}

/// Gamma matrices in the Dirac (standard) representation.
///
/// `gamma(0)` is `diag(1, 1, -1, -1)`; `gamma(k)` for k = 1..3 has the
/// Pauli matrix `sigma_k` in the upper-right block and `-sigma_k` in the
/// lower-left block.
pub fn gamma(index: usize) -> Result<Mat4> {
    let mut m = [[ZERO; 4]; 4];
    match index {
        0 => {
            m[0][0] = ONE;
            m[1][1] = ONE;
            m[2][2] = -ONE;
            m[3][3] = -ONE;
        }
        1..=3 => {
            let sigma = pauli(index);
            for r in 0..2 {
                for c in 0..2 {
                    m[r][c + 2] = sigma[r][c];
                    m[r + 2][c] = -sigma[r][c];
                }
            }
        }
        _ => {
            return Err(Error::Usage(format!(
                "gamma matrix index {index} is not in 0..=3"
            )))
        }
    }
    Ok(m)
}

fn pauli(k: usize) -> [[Complex64; 2]; 2] {
    match k {
        1 => [[ZERO, ONE], [ONE, ZERO]],
        2 => [[ZERO, -I], [I, ZERO]],
        _ => [[ONE, ZERO], [ZERO, -ONE]],
    }
}

pub fn matmul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = [[ZERO; 4]; 4];
    for r in 0..4 {
        for c in 0..4 {
            out[r][c] = (0..4).map(|k| a[r][k] * b[k][c]).sum();
        }
    }
    out
}

pub fn matadd(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = *a;
    for r in 0..4 {
        for c in 0..4 {
            out[r][c] += b[r][c];
        }
    }
    out
}

pub fn scale(a: &Mat4, s: Complex64) -> Mat4 {
    let mut out = *a;
    out.iter_mut().flatten().for_each(|v| *v *= s);
    out
}

pub fn transpose(a: &Mat4) -> Mat4 {
    let mut out = [[ZERO; 4]; 4];
    for r in 0..4 {
        for c in 0..4 {
            out[c][r] = a[r][c];
        }
    }
    out
}

pub fn apply(m: &Mat4, v: &Spinor) -> Spinor {
    let mut out = [ZERO; 4];
    for (r, o) in out.iter_mut().enumerate() {
        *o = (0..4).map(|k| m[r][k] * v[k]).sum();
    }
    out
}

/// Charge-conjugation matrix `C = i gamma^2 gamma^0`.
pub fn charge_conjugation_matrix() -> Mat4 {
    let g0 = gamma(0).expect("valid index");
    let g2 = gamma(2).expect("valid index");
    scale(&matmul(&g2, &g0), I)
}

/// The matrix `C (gamma^0)^T` that maps `Psi*` to `Psi^C`.
pub fn conjugation_map() -> Mat4 {
    let g0 = gamma(0).expect("valid index");
    matmul(&charge_conjugation_matrix(), &transpose(&g0))
}

/// `gamma^0 gamma^1`, the velocity matrix of the 1+1D Hamiltonian.
pub fn alpha1() -> Mat4 {
    matmul(&gamma(0).expect("valid index"), &gamma(1).expect("valid index"))
}
