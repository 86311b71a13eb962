//! Invariant form of the transversely isotropic coupled energy.

use nalgebra::{Matrix3, Vector3};

use super::{LatticeClass, MaterialRecord};
use crate::error::{Error, Result};

/// Coefficients of the invariant energy of a transversely isotropic grain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransverseIsoCoefficients {
    pub lambda: f64,
    pub mu: f64,
    pub omega: [f64; 3],
    pub beta: [f64; 3],
    pub kappa: [f64; 3],
    pub gamma: [f64; 2],
    pub xi: [f64; 2],
}

/// Maps the hexagonal 6mm / transversely isotropic constants to invariant coefficients.
pub fn coefficients(record: &MaterialRecord) -> Result<TransverseIsoCoefficients> {
    if !matches!(record.lattice, LatticeClass::Hex6mm | LatticeClass::TransIso) {
        return Err(Error::InvalidInput(format!(
            "material `{}`: invariant energy needs a transversely isotropic lattice, not {}",
            record.name,
            record.lattice.name()
        )));
    }
    record.validate()?;
    let p = |k: &str| record.params.get(k).copied().unwrap_or(0.0);
    let (c11, c12, c13, c33, c44) = (p("C11"), p("C12"), p("C13"), p("C33"), p("C44"));
    Ok(TransverseIsoCoefficients {
        lambda: c12,
        mu: 0.5 * (c11 - c12),
        omega: [
            2.0 * c44 + c12 - c11,
            0.5 * (c11 + c33) - 2.0 * c44 - c13,
            c13 - c12,
        ],
        beta: [
            -p("e31"),
            p("e31") - p("e33") + 2.0 * p("e15"),
            -2.0 * p("e15"),
        ],
        kappa: [
            -p("q31"),
            p("q31") - p("q33") + 2.0 * p("q15"),
            -2.0 * p("q15"),
        ],
        gamma: [-0.5 * p("eps11"), 0.5 * (p("eps11") - p("eps33"))],
        xi: [-0.5 * p("mu11"), 0.5 * (p("mu11") - p("mu33"))],
    })
}

/// Energy density from the invariants of the tensor strain `eps`, fields `e`, `h`
/// and the unit preferred direction `a`.
pub fn energy_invariant(
    k: &TransverseIsoCoefficients,
    a: &Vector3<f64>,
    eps: &Matrix3<f64>,
    e: &Vector3<f64>,
    h: &Vector3<f64>,
) -> Result<f64> {
    if (a.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput(format!(
            "preferred direction has norm {}",
            a.norm()
        )));
    }
    let m = a * a.transpose();
    let eps2 = eps * eps;
    let i1 = eps.trace();
    let i2 = eps2.trace();
    let i4 = (eps * m).trace();
    let i5 = (eps2 * m).trace();
    let j1e = e.dot(e);
    let j2e = e.dot(a);
    let j1m = h.dot(h);
    let j2m = h.dot(a);
    let ea = eps * a;
    let k1e = ea.dot(e);
    let k1m = ea.dot(h);

    let el = 0.5 * k.lambda * i1 * i1
        + k.mu * i2
        + k.omega[0] * i5
        + k.omega[1] * i4 * i4
        + k.omega[2] * i1 * i4;
    let em = k.beta[0] * i1 * j2e + k.beta[1] * i4 * j2e + k.beta[2] * k1e;
    let mm = k.kappa[0] * i1 * j2m + k.kappa[1] * i4 * j2m + k.kappa[2] * k1m;
    let diel = k.gamma[0] * j1e + k.gamma[1] * j2e * j2e;
    let mag = k.xi[0] * j1m + k.xi[1] * j2m * j2m;
    Ok(el + em + mm + diel + mag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::{build_modulus, builtin_library, rotate_modulus, rotation_q, EulerAngles};
    use nalgebra::SVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_fields(rng: &mut ChaCha8Rng) -> (Matrix3<f64>, Vector3<f64>, Vector3<f64>) {
        let mut eps = Matrix3::from_fn(|_, _| rng.random_range(-1e-3..1e-3));
        eps = 0.5 * (eps + eps.transpose());
        let e = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let h = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        (eps, e, h)
    }

    fn p_vector(eps: &Matrix3<f64>, e: &Vector3<f64>, h: &Vector3<f64>) -> SVector<f64, 12> {
        SVector::<f64, 12>::from_column_slice(&[
            eps[(0, 0)],
            eps[(1, 1)],
            eps[(2, 2)],
            2.0 * eps[(1, 2)],
            2.0 * eps[(0, 2)],
            2.0 * eps[(0, 1)],
            e[0],
            e[1],
            e[2],
            h[0],
            h[1],
            h[2],
        ])
    }

    #[test]
    fn zero_fields_zero_energy() {
        let lib = builtin_library();
        let k = coefficients(lib.get("BaTiO3").unwrap()).unwrap();
        let z = Vector3::zeros();
        assert_eq!(
            energy_invariant(&k, &Vector3::z(), &Matrix3::zeros(), &z, &z).unwrap(),
            0.0
        );
        assert!(energy_invariant(&k, &Vector3::new(1.0, 1.0, 0.0), &Matrix3::zeros(), &z, &z).is_err());
    }

    #[test]
    fn matches_quadratic_form_along_x3() {
        let lib = builtin_library();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for name in ["BaTiO3", "CoFe2O4"] {
            let rec = lib.get(name).unwrap();
            let k = coefficients(rec).unwrap();
            let g = build_modulus(rec).unwrap();
            for _ in 0..200 {
                let (eps, e, h) = random_fields(&mut rng);
                let p = p_vector(&eps, &e, &h);
                let quad = 0.5 * p.dot(&(g.0 * p));
                let inv = energy_invariant(&k, &Vector3::z(), &eps, &e, &h).unwrap();
                assert!((quad - inv).abs() <= 1e-10 * quad.abs(), "{name}: {quad} vs {inv}");
            }
        }
    }

    #[test]
    fn frame_indifference() {
        let lib = builtin_library();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rec = lib.get("BaTiO3").unwrap();
        let k = coefficients(rec).unwrap();
        let g = build_modulus(rec).unwrap();
        for _ in 0..200 {
            let a = EulerAngles::new(
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(0.0..std::f64::consts::TAU),
            );
            let q = rotation_q(&a);
            let (eps, e, h) = random_fields(&mut rng);
            let rotated = energy_invariant(&k, &(q * Vector3::z()), &eps, &e, &h).unwrap();
            let back = energy_invariant(
                &k,
                &Vector3::z(),
                &(q.transpose() * eps * q),
                &(q.transpose() * e),
                &(q.transpose() * h),
            )
            .unwrap();
            assert!((rotated - back).abs() <= 1e-10 * back.abs());
            let gr = rotate_modulus(&g, &a);
            let p = p_vector(&eps, &e, &h);
            let quad = 0.5 * p.dot(&(gr.0 * p));
            assert!((quad - rotated).abs() <= 1e-10 * quad.abs());
        }
    }

    #[test]
    fn other_lattices_are_rejected() {
        let lib = builtin_library();
        assert!(coefficients(lib.get("synthetic-orth222").unwrap()).is_err());
    }
}
