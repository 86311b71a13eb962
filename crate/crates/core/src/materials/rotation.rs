//! Grain orientations and the Voigt transformations they induce.

use nalgebra::{Matrix3, Matrix6, SMatrix};
use serde::{Deserialize, Serialize};

use super::{GeneralizedModulus, Matrix12};

/// Rotation angles about the global axes, in radians.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EulerAngles {
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
}

impl EulerAngles {
    pub fn new(theta1: f64, theta2: f64, theta3: f64) -> EulerAngles {
        EulerAngles {
            theta1,
            theta2,
            theta3,
        }
    }
}

fn q1(t: f64) -> Matrix3<f64> {
    let (s, c) = t.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

fn q2(t: f64) -> Matrix3<f64> {
    let (s, c) = t.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

fn q3(t: f64) -> Matrix3<f64> {
    let (s, c) = t.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// `Q = Q1(θ1) Q2(θ2) Q3(θ3)`; maps grain-local directions to global ones.
pub fn rotation_q(a: &EulerAngles) -> Matrix3<f64> {
    q1(a.theta1) * q2(a.theta2) * q3(a.theta3)
}

fn m6(rows: [[f64; 6]; 6]) -> Matrix6<f64> {
    Matrix6::from_fn(|i, j| rows[i][j])
}

/// The six single-axis factors `([T1σ, T2σ, T3σ], [T1ε, T2ε, T3ε])`, each at its own angle.
///
/// `T1σ` and `T3σ` transform stresses by `Q1ᵀ` and `Q3ᵀ`, while `T2σ` transforms by
/// `Q2` itself; [`voigt_transforms`] compensates by composing `T2` at `−θ2`.
pub fn printed_factors(a: &EulerAngles) -> ([Matrix6<f64>; 3], [Matrix6<f64>; 3]) {
    let (s1, c1) = a.theta1.sin_cos();
    let (s2, c2) = a.theta2.sin_cos();
    let (s3, c3) = a.theta3.sin_cos();
    let build = |k: f64, l: f64| {
        // k multiplies the normal-from-shear entries, l the shear-from-normal entries
        let t1 = m6([
            [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            [0.0, c1 * c1, s1 * s1, k * c1 * s1, 0.0, 0.0],
            [0.0, s1 * s1, c1 * c1, -k * c1 * s1, 0.0, 0.0],
            [0.0, -l * c1 * s1, l * c1 * s1, c1 * c1 - s1 * s1, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.0, c1, -s1],
            [0.0, 0.0, 0.0, 0.0, s1, c1],
        ]);
        let t2 = m6([
            [c2 * c2, 0.0, s2 * s2, 0.0, k * c2 * s2, 0.0],
            [0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
            [s2 * s2, 0.0, c2 * c2, 0.0, -k * c2 * s2, 0.0],
            [0.0, 0.0, 0.0, c2, 0.0, -s2],
            [-l * c2 * s2, 0.0, l * c2 * s2, 0.0, c2 * c2 - s2 * s2, 0.0],
            [0.0, 0.0, 0.0, s2, 0.0, c2],
        ]);
        let t3 = m6([
            [c3 * c3, s3 * s3, 0.0, 0.0, 0.0, k * c3 * s3],
            [s3 * s3, c3 * c3, 0.0, 0.0, 0.0, -k * c3 * s3],
            [0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, c3, -s3, 0.0],
            [0.0, 0.0, 0.0, s3, c3, 0.0],
            [-l * c3 * s3, l * c3 * s3, 0.0, 0.0, 0.0, c3 * c3 - s3 * s3],
        ]);
        [t1, t2, t3]
    };
    (build(2.0, 1.0), build(1.0, 2.0))
}

/// `(Tσ, Tε)` such that `voigt(Qᵀ S Q) = Tσ voigt(S)` for stresses and the engineering
/// analog for strains, i.e. they take global components to grain-local ones.
pub fn voigt_transforms(a: &EulerAngles) -> (Matrix6<f64>, Matrix6<f64>) {
    let (s1, e1) = printed_factors(&EulerAngles::new(a.theta1, 0.0, 0.0));
    let (s2, e2) = printed_factors(&EulerAngles::new(0.0, -a.theta2, 0.0));
    let (s3, e3) = printed_factors(&EulerAngles::new(0.0, 0.0, a.theta3));
    (s3[2] * s2[1] * s1[0], e3[2] * e2[1] * e1[0])
}

const VOIGT: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)];

/// Voigt matrix of `S ↦ M S Mᵀ` acting on stress-like vectors (tensor shear components).
pub fn stress_transform(m: &Matrix3<f64>) -> Matrix6<f64> {
    Matrix6::from_fn(|a, b| {
        let (i, j) = VOIGT[a];
        let (k, l) = VOIGT[b];
        if k == l {
            m[(i, k)] * m[(j, k)]
        } else {
            m[(i, k)] * m[(j, l)] + m[(i, l)] * m[(j, k)]
        }
    })
}

/// Voigt matrix of `S ↦ M S Mᵀ` acting on strain vectors with engineering shears.
pub fn strain_transform(m: &Matrix3<f64>) -> Matrix6<f64> {
    Matrix6::from_fn(|a, b| {
        let (i, j) = VOIGT[a];
        let (k, l) = VOIGT[b];
        let f = if i == j { 1.0 } else { 2.0 };
        if k == l {
            f * m[(i, k)] * m[(j, k)]
        } else {
            0.5 * f * (m[(i, k)] * m[(j, l)] + m[(i, l)] * m[(j, k)])
        }
    })
}

fn block_diag(t: &Matrix6<f64>, r: &Matrix3<f64>) -> Matrix12 {
    let mut p = SMatrix::<f64, 12, 12>::zeros();
    p.fixed_view_mut::<6, 6>(0, 0).copy_from(t);
    p.fixed_view_mut::<3, 3>(6, 6).copy_from(r);
    p.fixed_view_mut::<3, 3>(9, 9).copy_from(r);
    p
}

/// Global modulus of a grain with local modulus `g_local` and orientation `a`.
///
/// With `Π_P = diag(Tε, Qᵀ, Qᵀ)` mapping global gradients to local ones and
/// `Π_L = diag(Tσ, Qᵀ, Qᵀ)` doing the same for fluxes, `G = Π_L⁻¹ G_l Π_P`. The
/// duality `Tσᵀ Tε = I` gives `Π_L⁻¹ = Π_Pᵀ`.
pub fn rotate_modulus(g_local: &GeneralizedModulus, a: &EulerAngles) -> GeneralizedModulus {
    let q = rotation_q(a);
    let (_, t_eps) = voigt_transforms(a);
    let pi_p = block_diag(&t_eps, &q.transpose());
    let g = pi_p.transpose() * g_local.0 * pi_p;
    GeneralizedModulus(0.5 * (g + g.transpose()))
}

/// Same as [`rotate_modulus`] for an arbitrary rotation `q` (local to global).
pub fn rotate_modulus_q(g_local: &GeneralizedModulus, q: &Matrix3<f64>) -> GeneralizedModulus {
    let pi_p = block_diag(&strain_transform(&q.transpose()), &q.transpose());
    let g = pi_p.transpose() * g_local.0 * pi_p;
    GeneralizedModulus(0.5 * (g + g.transpose()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::{build_modulus, builtin_library};
    use approx::assert_abs_diff_eq;
    use nalgebra::{Vector3, Vector6};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn sym(v: &Vector6<f64>) -> Matrix3<f64> {
        Matrix3::new(v[0], v[5], v[4], v[5], v[1], v[3], v[4], v[3], v[2])
    }

    fn voigt(s: &Matrix3<f64>) -> Vector6<f64> {
        Vector6::new(s[(0, 0)], s[(1, 1)], s[(2, 2)], s[(1, 2)], s[(0, 2)], s[(0, 1)])
    }

    #[test]
    fn identity_angles() {
        let a = EulerAngles::default();
        assert_eq!(rotation_q(&a), Matrix3::identity());
        let (ts, te) = voigt_transforms(&a);
        assert_eq!(ts, Matrix6::identity());
        assert_eq!(te, Matrix6::identity());
    }

    #[test]
    fn quarter_turn_about_x3() {
        let q = rotation_q(&EulerAngles::new(0.0, 0.0, PI / 2.0));
        assert_abs_diff_eq!(q * Vector3::x(), Vector3::y(), epsilon = 1e-15);
    }

    #[test]
    fn printed_factors_are_single_axis_transforms() {
        let t = [0.3, -1.1, 2.0];
        let a = EulerAngles::new(t[0], t[1], t[2]);
        let (s, e) = printed_factors(&a);
        let mats = [q1(t[0]).transpose(), q2(t[1]), q3(t[2]).transpose()];
        for k in 0..3 {
            assert_abs_diff_eq!(s[k], stress_transform(&mats[k]), epsilon = 1e-15);
            assert_abs_diff_eq!(e[k], strain_transform(&mats[k]), epsilon = 1e-15);
        }
    }

    #[test]
    fn isotropic_modulus_is_rotation_invariant() {
        let lib = builtin_library();
        let g = build_modulus(lib.get("isotropic-dummy").unwrap()).unwrap();
        let r = rotate_modulus(&g, &EulerAngles::new(0.4, 2.2, 5.1));
        assert!((r.0 - g.0).amax() <= 1e-11 * g.0.amax());
    }

    fn angles() -> impl Strategy<Value = EulerAngles> {
        (0.0..2.0 * PI, 0.0..2.0 * PI, 0.0..2.0 * PI)
            .prop_map(|(a, b, c)| EulerAngles::new(a, b, c))
    }

    fn vec6() -> impl Strategy<Value = Vector6<f64>> {
        proptest::array::uniform6(-1.0..1.0f64).prop_map(Vector6::from)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn q_is_proper_orthogonal(a in angles()) {
            let q = rotation_q(&a);
            prop_assert!((q.transpose() * q - Matrix3::identity()).amax() < 1e-14);
            prop_assert!((q.determinant() - 1.0).abs() < 1e-14);
        }

        #[test]
        fn transforms_are_dual(a in angles()) {
            let (ts, te) = voigt_transforms(&a);
            prop_assert!((ts.transpose() * te - Matrix6::identity()).amax() < 1e-12);
        }

        #[test]
        fn voigt_matches_tensor_rotation(a in angles(), v in vec6()) {
            let q = rotation_q(&a);
            let (ts, te) = voigt_transforms(&a);
            let s = sym(&v);
            let rotated = voigt(&(q * s * q.transpose()));
            let via_voigt = ts.try_inverse().unwrap() * v;
            prop_assert!((rotated - via_voigt).amax() < 1e-12);
            // strains: engineering shear doubles the off-diagonals
            let mut ve = v;
            for k in 3..6 { ve[k] *= 2.0; }
            let mut local = voigt(&(q.transpose() * s * q));
            for k in 3..6 { local[k] *= 2.0; }
            prop_assert!((te * ve - local).amax() < 1e-12);
        }

        #[test]
        fn work_is_frame_invariant(a in angles(), sig in vec6(), eps in vec6()) {
            let (ts, te) = voigt_transforms(&a);
            prop_assert!(((ts * sig).dot(&(te * eps)) - sig.dot(&eps)).abs() < 1e-12);
        }

        #[test]
        fn rotation_preserves_symmetry_and_round_trips(a in angles()) {
            let lib = builtin_library();
            for name in ["BaTiO3", "CoFe2O4", "synthetic-orth222"] {
                let g = build_modulus(lib.get(name).unwrap()).unwrap();
                let r = rotate_modulus(&g, &a);
                prop_assert!(r.asymmetry() < 1e-11);
                let back = rotate_modulus_q(&r, &rotation_q(&a).transpose());
                prop_assert!((back.0 - g.0).amax() < 1e-11 * g.0.amax());
                let ev_local = g.c().symmetric_eigenvalues();
                let ev_rot = r.c().symmetric_eigenvalues();
                prop_assert!(ev_local.iter().all(|&x| x > 0.0));
                prop_assert!(ev_rot.iter().all(|&x| x > 0.0));
                // the general-matrix path agrees with the angle path
                let viaq = rotate_modulus_q(&g, &rotation_q(&a));
                prop_assert!((viaq.0 - r.0).amax() < 1e-11 * g.0.amax());
            }
        }
    }
}
