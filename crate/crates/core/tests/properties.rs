// Copyright 2026 The qdrift Developers
// SPDX-License-Identifier: Apache-2.0

use proptest::prelude::*;
use qdrift::ensemble::Moments;
use qdrift::lattice::{build_tls, build_xy_chain};
use qdrift::noise::derive_stream;
use qdrift::observables::loschmidt_echo;
use qdrift::oracle::{dp_transmittance, glbe_p00, ResonantLevelParams, TlsDecayParams};
use qdrift::{Distribution, NoiseSpec, PhaseSource, Propagator, StateVector, Unraveling, UnravelingKind};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn both_unravelings_keep_the_norm(
        m in 2usize..12,
        gamma in 0.0f64..2.0,
        seed in any::<u64>(),
        qj in any::<bool>(),
    ) {
        let model = build_xy_chain(m, 1.0, &vec![0.0; m]).unwrap().with_uniform_decoherence(gamma).unwrap();
        let dt = 0.01;
        let kind = if qj { UnravelingKind::Qj } else { UnravelingKind::Qd };
        let prop = Propagator::prepare(&model, dt).unwrap();
        let u = Unraveling::new(kind, &model, dt).unwrap();
        let noise = NoiseSpec::for_model(&model, Distribution::Lorentzian, dt, seed).unwrap();
        let stream = derive_stream(&noise, seed % 97);
        let end = u.evolve(&prop, StateVector::localized(m, 0).unwrap(), 500, &stream, 50, |_, _| {}).unwrap();
        prop_assert!((end.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn streams_are_pure_functions_of_their_inputs(seed in any::<u64>(), r in any::<u64>(), step in 1u64..1_000_000) {
        let noise = NoiseSpec::new(Distribution::Lorentzian, vec![0.5, 0.0], 0.01, seed).unwrap();
        let a = derive_stream(&noise, r);
        let b = derive_stream(&noise, r);
        prop_assert_eq!(a.phase(step, 0).to_bits(), b.phase(step, 0).to_bits());
        prop_assert_eq!(a.phase(step, 1), 0.0);
        let u = a.uniform(step, 3);
        prop_assert!(u > 0.0 && u < 1.0);
    }

    #[test]
    fn merged_moments_match_sequential(xs in prop::collection::vec(-1e3f64..1e3, 2..200), cut in 0usize..200) {
        let cut = cut.min(xs.len());
        let mut all = Moments::new(1);
        let mut left = Moments::new(1);
        let mut right = Moments::new(1);
        for (k, &x) in xs.iter().enumerate() {
            all.push(&[x]);
            if k < cut { left.push(&[x]) } else { right.push(&[x]) }
        }
        let merged = left.merge(&right);
        prop_assert_eq!(merged.count(), all.count());
        prop_assert!((merged.mean()[0] - all.mean()[0]).abs() <= 1e-9 * (1.0 + all.mean()[0].abs()));
        prop_assert!((merged.m2()[0] - all.m2()[0]).abs() <= 1e-9 * (1.0 + all.m2()[0]));
    }

    #[test]
    fn survival_oracle_is_a_probability(g in 0.0f64..20.0, t in 0.0f64..50.0) {
        let params = TlsDecayParams::new(1.0, g).unwrap();
        let p = glbe_p00(t, &params);
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&p));
        if g >= 2.0 {
            prop_assert!(p >= 0.5 - 1e-12);
        } else {
            let w = params.omega();
            let envelope = 0.5 * (-g * t).exp() * (1.0 + (g / w).powi(2)).sqrt();
            prop_assert!((p - 0.5).abs() <= envelope + 1e-12);
        }
    }

    #[test]
    fn dephasing_never_exceeds_unit_transmittance(
        eps in -1.9f64..1.9,
        vl in 0.05f64..0.8,
        vr in 0.05f64..0.8,
        g in 0.0f64..2.0,
    ) {
        let p = ResonantLevelParams { e0: 0.0, v_l: vl, v_r: vr, v: 1.0, gamma_phi: g };
        let t = dp_transmittance(&p, eps).unwrap();
        prop_assert!(t.coherent >= 0.0 && t.coherent <= t.total + 1e-12);
        prop_assert!(t.total <= 1.0 + 1e-12);
    }

    #[test]
    fn coherent_echo_is_perfect(v in 0.1f64..2.0, steps in 1u64..400, seed in any::<u64>()) {
        let model = build_tls(0.0, v).unwrap();
        let dt = 0.01;
        let prop = Propagator::prepare(&model, dt).unwrap();
        let noise = NoiseSpec::for_model(&model, Distribution::Lorentzian, dt, seed).unwrap();
        let m = loschmidt_echo(&prop, &StateVector::localized(2, 0).unwrap(), steps as f64 * dt, &derive_stream(&noise, 0)).unwrap();
        prop_assert!((m - 1.0).abs() < 1e-12);
    }
}
