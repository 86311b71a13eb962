use nalgebra::Matrix6;

use crate::error::{Error, Result};

/// Voigt and Reuss bulk and shear moduli of a stiffness in Voigt notation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoigtReuss {
    pub k_voigt: f64,
    pub g_voigt: f64,
    pub k_reuss: f64,
    pub g_reuss: f64,
}

pub fn voigt_reuss_moduli(c: &Matrix6<f64>) -> Result<VoigtReuss> {
    let s = c
        .try_inverse()
        .ok_or_else(|| Error::InvalidInput("stiffness is singular".into()))?;
    let diag = |m: &Matrix6<f64>| m[(0, 0)] + m[(1, 1)] + m[(2, 2)];
    let off = |m: &Matrix6<f64>| m[(0, 1)] + m[(1, 2)] + m[(0, 2)];
    let shear = |m: &Matrix6<f64>| m[(3, 3)] + m[(4, 4)] + m[(5, 5)];
    Ok(VoigtReuss {
        k_voigt: (diag(c) + 2.0 * off(c)) / 9.0,
        g_voigt: (diag(c) - off(c) + 3.0 * shear(c)) / 15.0,
        k_reuss: 1.0 / (diag(&s) + 2.0 * off(&s)),
        g_reuss: 15.0 / (4.0 * diag(&s) - 4.0 * off(&s) + 3.0 * shear(&s)),
    })
}

/// Universal anisotropy index `A^U = 5 G_V/G_R + K_V/K_R − 6`.
pub fn anisotropy_index(c: &Matrix6<f64>) -> Result<f64> {
    let m = voigt_reuss_moduli(c)?;
    Ok(5.0 * m.g_voigt / m.g_reuss + m.k_voigt / m.k_reuss - 6.0)
}
