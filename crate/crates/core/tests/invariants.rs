//! Property tests of the structural invariants on random inputs.

use proptest::prelude::*;

use spinmag_core::coupling::{affine_decomposition, CouplingVector};
use spinmag_core::fock::{build_operator, build_product_state, sector_dimension, OperatorKind};
use spinmag_core::model::{CouplingMode, SystemSpec};
use spinmag_core::moments::{coherent_state, min_cov_eigenvalue, moment_drift_diffusion, MomentParams};
use spinmag_core::sme::sme_step;
use spinmag_core::C64;

fn amplitudes() -> impl Strategy<Value = [C64; 3]> {
    prop::array::uniform6(-1.0f64..1.0).prop_filter_map("nonzero", |v| {
        let c = [C64::new(v[0], v[1]), C64::new(v[2], v[3]), C64::new(v[4], v[5])];
        let norm = c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        (norm > 1e-3).then(|| c.map(|z| z / norm))
    })
}

fn coupling() -> impl Strategy<Value = CouplingVector> {
    (-0.05f64..0.05, -0.05f64..0.05, -0.05f64..0.05).prop_map(|(a, b, c)| CouplingVector::new(a, b, c))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn product_states_are_normalized(c in amplitudes(), n in 1u32..30) {
        let psi = build_product_state(c, n).unwrap();
        prop_assert_eq!(psi.dim(), sector_dimension(n));
        prop_assert!((psi.norm_sqr() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn spin_algebra_holds(n in 1u32..16) {
        let [x, y, z] = [OperatorKind::Fx, OperatorKind::Fy, OperatorKind::Fz].map(|k| build_operator(k, n).unwrap());
        let i = C64::new(0.0, 1.0);
        prop_assert!(x.commutator(&y).max_abs_diff(&z.scale(i)) < 1e-12);
        prop_assert!(y.commutator(&z).max_abs_diff(&x.scale(i)) < 1e-12);
        prop_assert!(z.commutator(&x).max_abs_diff(&y.scale(i)) < 1e-12);
        prop_assert!(x.is_hermitian(1e-14) && y.is_hermitian(1e-14) && z.is_hermitian(1e-14));
    }

    #[test]
    fn affine_decomposition_is_an_operator_identity(g in coupling(), n in 1u32..12) {
        let direct = g.number_operator(n).unwrap();
        let rebuilt = affine_decomposition(&g).reconstruct(n).unwrap();
        prop_assert!(direct.max_abs_diff(&rebuilt) < 1e-12);
    }

    #[test]
    fn sme_step_keeps_a_density_matrix(
        c in amplitudes(),
        g in coupling(),
        n in 1u32..6,
        dvp in -3.0f64..3.0,
        dvm in -3.0f64..3.0,
        w in prop::array::uniform3(-2e3f64..2e3),
    ) {
        let sys = SystemSpec { n, initial: c, coupling: g, mode: CouplingMode::Full, flux: 1e4, omega: w };
        let dt = 1e-5;
        let rho = sys.initial_state().unwrap().to_density();
        let next = sme_step(&rho, &sys, dt, dvp * dt.sqrt(), dvm * dt.sqrt()).unwrap();
        prop_assert!((next.trace().re - 1.0).abs() < 1e-12);
        prop_assert!(next.hermiticity_error() < 1e-12);
        prop_assert!(next.min_eigenvalue() > -1e-10);
        // pure states stay pure
        prop_assert!((next.purity() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn moment_step_keeps_the_covariance_psd(
        c in amplitudes(),
        n in 1.0f64..1e4,
        alpha in -0.5f64..0.5,
        dvp in -3.0f64..3.0,
        dvm in -3.0f64..3.0,
    ) {
        let params = MomentParams {
            n,
            alpha,
            offset: 0.0,
            flux: 2e4,
            omega: [0.0, 4.4e3, 0.0],
            light_shift_cancelled: true,
        };
        let dt = 1e-6;
        let s0 = coherent_state(&c, n).unwrap();
        let s1 = moment_drift_diffusion(&s0, &params, dt, dvp * dt.sqrt(), dvm * dt.sqrt());
        let scale = (s1.cov[0][0] + s1.cov[1][1] + s1.cov[2][2]).max(1.0);
        prop_assert!(min_cov_eigenvalue(&s1) >= -1e-9 * scale);
        for a in 0..3 {
            for b in 0..3 {
                prop_assert!((s1.cov[a][b] - s1.cov[b][a]).abs() <= 1e-12 * scale);
            }
        }
    }
}
