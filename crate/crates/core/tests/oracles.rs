use std::sync::Arc;

use nalgebra::DMatrix;
use qpjacobi::background::{BackgroundOperator, DirichletData};
use qpjacobi::jost::{Perturbation, PerturbedOperator};
use qpjacobi::scattering::scattering_data;
use qpjacobi::surface::{SpectralPoint, SurfaceData};
use qpjacobi::Complex64;

fn two_site() -> PerturbedOperator {
    let s = Arc::new(SurfaceData::from_edges(&[-1.3, -0.3, 0.3, 1.3]).unwrap());
    let bg = BackgroundOperator::new(s, DirichletData { mus: vec![0.0], sigmas: vec![1] }, -210, 210).unwrap();
    PerturbedOperator::new(Arc::new(bg), Perturbation { start: 0, da: vec![0.0, 0.2], db: vec![0.3, 0.0] }).unwrap()
}

// Eigenvalues of the two-site perturbation of the period-2 background,
// frozen from a dense eigensolver on [-200, 200].
const EIGENVALUES: [f64; 3] = [-1.3186105113662, -0.2633564169204919, 1.4020735537108289];

#[test]
fn eigenvalues_match_frozen_dense_values() {
    let data = scattering_data(&two_site(), 32).unwrap();
    assert_eq!(data.bound_states.len(), 3);
    for (b, e) in data.bound_states.iter().zip(EIGENVALUES) {
        assert!((b.rho - e).abs() < 1e-10, "{} vs {e}", b.rho);
    }
    assert!((data.t0 - 0.7 / 0.5).abs() < 1e-12);
}

#[test]
fn norming_constants_match_dense_eigenvectors() {
    let op = two_site();
    let data = scattering_data(&op, 32).unwrap();
    let (lo, hi) = (-200i64, 200i64);
    let n = (hi - lo + 1) as usize;
    let mut h = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let k = lo + i as i64;
        h[(i, i)] = op.b(k).unwrap();
        if i + 1 < n {
            h[(i, i + 1)] = op.a(k).unwrap();
            h[(i + 1, i)] = op.a(k).unwrap();
        }
    }
    let eig = h.symmetric_eigen();
    let bg = &op.background;
    for b in &data.bound_states {
        let j = (0..n).min_by(|&x, &y| (eig.eigenvalues[x] - b.rho).abs().total_cmp(&(eig.eigenvalues[y] - b.rho).abs())).unwrap();
        let v = eig.eigenvectors.column(j);
        let p = SpectralPoint::upper(&bg.surface.curve, Complex64::new(b.rho, 0.0));
        let right = bg.psi_hat_range(p, 5, 5, 1.0).unwrap()[0].re;
        let left = bg.psi_hat_range(p, -5, -5, -1.0).unwrap()[0].re;
        let gp = v[(5 - lo) as usize].powi(2) / (right * right);
        let gm = v[(-5 - lo) as usize].powi(2) / (left * left);
        assert!((gp - b.gamma_plus).abs() < 1e-8 * gp, "rho {}: {gp} vs {}", b.rho, b.gamma_plus);
        assert!((gm - b.gamma_minus).abs() < 1e-8 * gm, "rho {}: {gm} vs {}", b.rho, b.gamma_minus);
    }
}
