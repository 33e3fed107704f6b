use std::sync::Arc;

use proptest::prelude::*;
use qpjacobi::background::{BackgroundOperator, DirichletData};
use qpjacobi::glm::{reconstruct, GlmOptions};
use qpjacobi::jost::{Perturbation, PerturbedOperator};
use qpjacobi::scattering::{
    forward_invariants, read_interchange, scattering_data, validate, write_interchange, ClauseStatus, ScatteringData,
    ValidateOptions,
};
use qpjacobi::surface::SurfaceData;
use qpjacobi::{Complex64, Error};

fn free_operator(da: Vec<f64>, db: Vec<f64>) -> PerturbedOperator {
    let s = Arc::new(SurfaceData::from_edges(&[-1.0, 1.0]).unwrap());
    let bg = BackgroundOperator::new(s, DirichletData { mus: vec![], sigmas: vec![] }, -150, 150).unwrap();
    PerturbedOperator::new(Arc::new(bg), Perturbation { start: 0, da, db }).unwrap()
}

fn perturbation() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    let site = prop_oneof![0.4..1.0f64, -1.0..-0.4f64];
    (1usize..=3).prop_flat_map(move |len| {
        (prop::collection::vec(-0.1..0.1f64, len), prop::collection::vec(site.clone(), len))
    })
}

fn data_or_reject(op: &PerturbedOperator, nodes_per_band: usize) -> Option<ScatteringData> {
    match scattering_data(op, nodes_per_band) {
        Ok(d) => Some(d),
        Err(Error::TailTruncationTooLarge(_)) => None,
        Err(e) => panic!("{e}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn quasimomentum_maps_into_disc_and_back(
        gap in 0.1..0.8f64, left in 0.3..1.5f64, right in 0.3..1.5f64,
        re in -3.0..3.0f64, im in 0.05..2.0f64,
    ) {
        let e = [-gap - left, -gap, gap, gap + right];
        let s = SurfaceData::from_edges(&e).unwrap();
        let z = Complex64::new(re, im);
        let w = s.quasimomentum(z);
        prop_assert!(w.norm() < 1.0);
        let back = s.lambda_of_w(w).unwrap();
        prop_assert!((back - z).norm() < 1e-9 * (1.0 + z.norm()));
    }

    #[test]
    fn tau_is_symmetric_with_positive_imaginary_part(
        widths in prop::collection::vec(0.2..1.0f64, 5), start in -3.0..0.0f64,
    ) {
        let mut e = vec![start];
        for w in &widths {
            e.push(e.last().unwrap() + w);
        }
        let s = SurfaceData::from_edges(&e).unwrap();
        let r = s.report(&[vec![Complex64::new(0.1, 0.2), Complex64::new(-0.3, 0.05)]]);
        prop_assert!(r.tau_symmetry_error < 1e-10);
        prop_assert!(r.tau_im_min_eigenvalue > 0.0);
        prop_assert!(r.theta_identity_error < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn forward_data_satisfy_scattering_identities((da, db) in perturbation()) {
        let op = free_operator(da, db);
        let data = data_or_reject(&op, 64);
        prop_assume!(data.is_some());
        let data = data.unwrap();
        let inv = forward_invariants(&op, &data).unwrap();
        prop_assert!(inv.unitarity < 1e-8);
        prop_assert!(inv.consistency < 1e-8);
        prop_assert!(inv.symmetry < 1e-10);
        prop_assert!(inv.residue.iter().all(|&r| r < 1e-6), "{:?}", inv.residue);
    }

    #[test]
    fn interchange_round_trip_is_exact((da, db) in perturbation()) {
        let data = data_or_reject(&free_operator(da, db), 8);
        prop_assume!(data.is_some());
        let data = data.unwrap();
        let mut buf = Vec::new();
        write_interchange(&data, &mut buf).unwrap();
        prop_assert_eq!(read_interchange(buf.as_slice()).unwrap(), data);
    }

    #[test]
    fn reconstruction_recovers_coefficients((da, db) in perturbation()) {
        let op = free_operator(da, db);
        let data = data_or_reject(&op, 128);
        prop_assume!(data.is_some());
        let data = data.unwrap();
        let rec = reconstruct(&data, &op.background, -6, 6, GlmOptions::default()).unwrap();
        prop_assert!(rec.smallest_eigenvalue > 0.0);
        for (i, n) in (-6..=6).enumerate() {
            prop_assert!((rec.a[i] - op.a(n).unwrap()).abs() < 1e-6, "a({}) = {}", n, rec.a[i]);
            prop_assert!((rec.b[i] - op.b(n).unwrap()).abs() < 1e-6, "b({}) = {}", n, rec.b[i]);
        }
    }

    #[test]
    fn negated_norming_constants_are_rejected(db in prop_oneof![0.4..1.5f64, -1.5..-0.4f64]) {
        let op = free_operator(vec![0.0], vec![db]);
        let mut data = scattering_data(&op, 64).unwrap();
        prop_assert!(!data.bound_states.is_empty());
        let opts = ValidateOptions::default();
        prop_assert!(validate(&data, &op.background, &opts).unwrap().passed());
        data.bound_states[0].gamma_plus = -data.bound_states[0].gamma_plus;
        data.bound_states[0].gamma_minus = -data.bound_states[0].gamma_minus;
        let report = validate(&data, &op.background, &opts).unwrap();
        prop_assert_eq!(report.status("ii"), Some(ClauseStatus::Fail));
    }
}
