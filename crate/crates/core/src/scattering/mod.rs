//! Direct scattering: transmission and reflection coefficients on the unit
//! circle, bound states and norming constants.

mod io;
mod poisson;
mod validate;

pub use io::{read_interchange, write_interchange};
pub use poisson::PoissonJensen;
pub use validate::{validate, Clause, ClauseStatus, ValidateOptions, ValidationReport};


use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::background::DirichletData;
use crate::error::{Error, Result};
use crate::jost::PerturbedOperator;
use crate::numerics::bracket_root;
use crate::surface::{Location, SpectralPoint};

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// `W(f, g)(n) = a(n) (f(n) g(n+1) - f(n+1) g(n))` from values at `n` and `n + 1`.
pub fn wronskian(a: f64, f: [Complex64; 2], g: [Complex64; 2]) -> Complex64 {
    (f[0] * g[1] - f[1] * g[0]) * a
}

/// Wronskian of the Jost solutions `W(psi_-, psi_+)(n)`.
pub fn jost_wronskian(op: &PerturbedOperator, p: SpectralPoint, n: i64, regularised: bool) -> Result<Complex64> {
    let m = op.jost_range(p, n, n + 1, -1.0, regularised)?;
    let pl = op.jost_range(p, n, n + 1, 1.0, regularised)?;
    Ok(wronskian(op.a(n)?, [m[0], m[1]], [pl[0], pl[1]]))
}

fn mu_product(op: &PerturbedOperator, z: Complex64) -> Complex64 {
    op.background.dirichlet.mus.iter().fold(c(1.0), |acc, &m| acc * (z - m))
}

/// `alpha(z) = 1 / T(z)`.
pub fn alpha(op: &PerturbedOperator, p: SpectralPoint) -> Result<Complex64> {
    Ok(mu_product(op, p.z) / p.root * jost_wronskian(op, p, 0, false)?)
}

/// Transmission coefficient at an interior point of the upper sheet.
pub fn transmission(op: &PerturbedOperator, z: Complex64) -> Result<Complex64> {
    let p = SpectralPoint::upper(&op.background.surface.curve, z);
    Ok(1.0 / alpha(op, p)?)
}

/// `(T, R_+, R_-)` at a point on one bank of a band.
pub fn coefficients_on_band(op: &PerturbedOperator, lambda: f64, side: f64) -> Result<(Complex64, Complex64, Complex64)> {
    let curve = &op.background.surface.curve;
    let p = SpectralPoint::on_band(curve, lambda, side);
    let pm = op.jost_range(p, 0, 1, -1.0, false)?;
    let pp = op.jost_range(p, 0, 1, 1.0, false)?;
    let a0 = op.a(0)?;
    let pref = mu_product(op, p.z) / p.root;
    let al = pref * wronskian(a0, [pm[0], pm[1]], [pp[0], pp[1]]);
    let bp = -pref * wronskian(a0, [pm[0], pm[1]], [pp[0].conj(), pp[1].conj()]);
    let bm = pref * wronskian(a0, [pp[0], pp[1]], [pm[0].conj(), pm[1].conj()]);
    Ok((1.0 / al, bp / al, bm / al))
}

/// An eigenvalue below, above, or between the bands, with its norming constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundState {
    pub rho: f64,
    pub gamma_plus: f64,
    pub gamma_minus: f64,
}

/// Eigenvalue together with diagnostics of its computation.
#[derive(Debug, Clone)]
pub struct BoundStateDetail {
    pub state: BoundState,
    /// `psi_hat_+(rho) = coupling * psi_hat_-(rho)`.
    pub coupling: f64,
    /// Share of the norm carried by the two outermost sites of the window.
    pub tail_ratio: f64,
    /// `d/d lambda W(psi_hat_-, psi_hat_+)` at `rho`.
    pub wronskian_derivative: f64,
}

/// Regularised Wronskian, real on the resolvent set.
pub fn regular_wronskian(op: &PerturbedOperator, x: f64) -> Result<f64> {
    let p = SpectralPoint::upper(&op.background.surface.curve, c(x));
    Ok(jost_wronskian(op, p, 0, true)?.re)
}

/// Upper bound for the spectrum of the perturbed operator on the window.
pub fn spectral_radius_bound(op: &PerturbedOperator) -> Result<f64> {
    let (lo, hi) = op.window();
    let mut m = 0.0f64;
    for n in lo + 1..=hi {
        m = m.max(op.b(n)?.abs() + op.a(n)? + op.a(n - 1)?);
    }
    Ok(m + 0.1)
}

/// Real intervals off the spectrum, each parametrised for scanning.
fn scan_intervals(op: &PerturbedOperator) -> Result<Vec<(f64, f64, bool, bool)>> {
    let e = op.background.surface.curve.edges();
    let n = e.len();
    let r = spectral_radius_bound(op)?;
    let mut out = Vec::new();
    if -r < e[0] {
        out.push((-r, e[0], false, true));
    }
    for j in 0..(n / 2 - 1) {
        out.push((e[2 * j + 1], e[2 * j + 2], true, true));
    }
    if r > e[n - 1] {
        out.push((e[n - 1], r, true, false));
    }
    Ok(out)
}

/// Eigenvalues of the perturbed operator off the background spectrum.
///
/// Sign changes of the regularised Wronskian are located on a grid that
/// clusters quadratically at band edges, then refined to machine precision.
pub fn find_bound_states(op: &PerturbedOperator, samples_per_interval: usize) -> Result<Vec<BoundStateDetail>> {
    let mut roots = Vec::new();
    for (a, b, cluster_lo, cluster_hi) in scan_intervals(op)? {
        let map = |t: f64| -> f64 {
            match (cluster_lo, cluster_hi) {
                (true, true) => a + (b - a) * 0.5 * (1.0 - (std::f64::consts::PI * t).cos()),
                (true, false) => a + (b - a) * t * t,
                (false, true) => b - (b - a) * (1.0 - t) * (1.0 - t),
                _ => a + (b - a) * t,
            }
        };
        let n = samples_per_interval as f64;
        let mut ts: Vec<f64> = (1..samples_per_interval).map(|k| k as f64 / n).collect();
        for f in [1e-3, 1e-2, 1e-1] {
            if cluster_lo {
                ts.push(f / n);
            }
            if cluster_hi {
                ts.push(1.0 - f / n);
            }
        }
        ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut prev_x = map(0.0);
        let mut prev = f64::NAN;
        for (k, &t) in ts.iter().enumerate() {
            let x = map(t);
            let v = regular_wronskian(op, x)?;
            if k > 0 && prev.is_finite() && v.is_finite() && prev.signum() != v.signum() {
                let root = bracket_root(|y| regular_wronskian(op, y).unwrap_or(f64::NAN), prev_x, x)
                    .ok_or(Error::BoundStatesUnresolved(x - prev_x))?;
                roots.push(root);
            }
            prev = v;
            prev_x = x;
        }
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for w in roots.windows(2) {
        if w[1] - w[0] < 1e-10 {
            return Err(Error::BoundStatesUnresolved(w[1] - w[0]));
        }
    }
    roots.into_iter().map(|rho| bound_state_detail(op, rho)).collect()
}

/// Norming constants and coupling at an eigenvalue.
pub fn bound_state_detail(op: &PerturbedOperator, rho: f64) -> Result<BoundStateDetail> {
    let (wlo, whi) = op.window();
    let (lo_edge, hi_edge) = op.edges();
    let p = SpectralPoint::upper(&op.background.surface.curve, c(rho));
    let plus = op.jost_range(p, lo_edge, whi, 1.0, true)?;
    let minus = op.jost_range(p, wlo, hi_edge, -1.0, true)?;
    let mut n0 = lo_edge;
    for n in lo_edge..=hi_edge {
        if minus[(n - wlo) as usize].norm() > minus[(n0 - wlo) as usize].norm() {
            n0 = n;
        }
    }
    let coupling = (plus[(n0 - lo_edge) as usize] / minus[(n0 - wlo) as usize]).re;
    let mut norm = 0.0;
    let mut cross = 0.0;
    for n in wlo..=whi {
        let f = if n >= n0 { plus[(n - lo_edge) as usize].re } else { coupling * minus[(n - wlo) as usize].re };
        norm += f * f;
        cross += f * f / coupling;
    }
    let edge_mass = {
        let f_hi = plus[(whi - lo_edge) as usize].re;
        let f_lo = coupling * minus[0].re;
        (f_hi * f_hi + f_lo * f_lo) / norm
    };
    if edge_mass > 1e-12 {
        return Err(Error::TailTruncationTooLarge(edge_mass));
    }
    let gamma_plus = 1.0 / norm;
    let gamma_minus = coupling * coupling * gamma_plus;
    Ok(BoundStateDetail {
        state: BoundState { rho, gamma_plus, gamma_minus },
        coupling,
        tail_ratio: edge_mass,
        wronskian_derivative: -cross,
    })
}

/// Isolated eigenvalues of the operator truncated to `2 * half + 1` sites around the
/// origin, keeping those whose eigenvectors are concentrated away from the cut.
pub fn dense_bound_states(op: &PerturbedOperator, half: i64) -> Result<Vec<f64>> {
    let n = (2 * half + 1) as usize;
    let mut h = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let site = i as i64 - half;
        h[(i, i)] = op.b(site)?;
        if i + 1 < n {
            let a = op.a(site)?;
            h[(i, i + 1)] = a;
            h[(i + 1, i)] = a;
        }
    }
    let eig = h.symmetric_eigen();
    let curve = &op.background.surface.curve;
    let mut out = Vec::new();
    for (k, &ev) in eig.eigenvalues.iter().enumerate() {
        if curve.in_spectrum(ev) {
            continue;
        }
        let v = eig.eigenvectors.column(k);
        let inner: f64 = (0..n)
            .filter(|&i| (i as i64 - half).abs() <= half / 2)
            .map(|i| v[i] * v[i])
            .sum();
        if inner > 0.999 {
            out.push(ev);
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(out)
}

/// Scattering coefficients at one quadrature node on the unit circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatteringNode {
    pub band: usize,
    pub lambda: f64,
    /// `+1` on the upper bank, `-1` on the lower bank.
    pub side: f64,
    pub w: Complex64,
    /// Weight of `(1 / 2 pi i) d omega` at this node.
    pub weight: f64,
    pub t: Complex64,
    pub r_plus: Complex64,
    pub r_minus: Complex64,
}

/// Complete scattering data on a circle quadrature grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatteringData {
    pub edges: Vec<f64>,
    pub dirichlet: DirichletData,
    pub nodes_per_band: usize,
    pub nodes: Vec<ScatteringNode>,
    pub bound_states: Vec<BoundState>,
    /// `prod a(m) / a_q(m)`, the value of `T` at `w = 0`.
    pub t0: f64,
}

impl ScatteringData {
    /// Index of the node on the opposite bank at the same `lambda`.
    pub fn mirror(&self, i: usize) -> usize {
        i ^ 1
    }
}

/// Computes scattering data with `nodes_per_band` Gauss nodes on each bank of each band.
pub fn scattering_data(op: &PerturbedOperator, nodes_per_band: usize) -> Result<ScatteringData> {
    let s = &op.background.surface;
    let grid = s.circle_grid(&op.background.dirichlet.mus, nodes_per_band);
    let mut nodes = Vec::with_capacity(grid.len());
    for node in &grid.nodes {
        let (t, rp, rm) = coefficients_on_band(op, node.lambda, node.side)?;
        nodes.push(ScatteringNode {
            band: node.band,
            lambda: node.lambda,
            side: node.side,
            w: node.w,
            weight: node.weight,
            t,
            r_plus: rp,
            r_minus: rm,
        });
    }
    let bound_states = find_bound_states(op, 400)?.into_iter().map(|d| d.state).collect();
    Ok(ScatteringData {
        edges: s.curve.edges().to_vec(),
        dirichlet: op.background.dirichlet.clone(),
        nodes_per_band,
        nodes,
        bound_states,
        t0: op.t0()?,
    })
}

/// Largest violations of the identities satisfied by forward scattering data.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ForwardInvariants {
    /// `| |T|^2 + |R_pm|^2 - 1 |`
    pub unitarity: f64,
    /// `| T(w) R_+(conj w) + T(conj w) R_-(w) |`
    pub consistency: f64,
    /// `| R_pm(conj w) - conj R_pm(w) |`
    pub symmetry: f64,
    /// Relative spread of `W(psi_-, psi_+)(n)` over the window.
    pub wronskian_spread: f64,
    /// Relative error of `(Res T)^2 = gamma_+ gamma_- R(rho)` per bound state.
    pub residue: Vec<f64>,
}

/// Checks the forward identities on computed scattering data.
pub fn forward_invariants(op: &PerturbedOperator, data: &ScatteringData) -> Result<ForwardInvariants> {
    let mut inv = ForwardInvariants::default();
    for (i, n) in data.nodes.iter().enumerate() {
        let m = &data.nodes[data.mirror(i)];
        inv.unitarity = inv
            .unitarity
            .max((n.t.norm_sqr() + n.r_plus.norm_sqr() - 1.0).abs())
            .max((n.t.norm_sqr() + n.r_minus.norm_sqr() - 1.0).abs());
        inv.consistency = inv.consistency.max((n.t * m.r_plus + m.t * n.r_minus).norm());
        inv.symmetry = inv
            .symmetry
            .max((m.r_plus - n.r_plus.conj()).norm())
            .max((m.r_minus - n.r_minus.conj()).norm());
    }
    let s = &op.background.surface;
    let (lo, hi) = op.window();
    let probes = [
        SpectralPoint::upper(&s.curve, Complex64::new(0.37, 0.41)),
        SpectralPoint::on_band(&s.curve, data.nodes[data.nodes.len() / 3].lambda, 1.0),
    ];
    for p in probes {
        let w0 = jost_wronskian(op, p, 0, false)?;
        for n in [lo + 2, lo / 2, -1, 3, hi / 2, hi - 3] {
            let wn = jost_wronskian(op, p, n, false)?;
            inv.wronskian_spread = inv.wronskian_spread.max((wn - w0).norm() / w0.norm());
        }
    }
    for b in &data.bound_states {
        let dist = s.curve.edges().iter().map(|e| (e - b.rho).abs()).fold(f64::INFINITY, f64::min);
        let h = (1e-3 * (1.0 + b.rho.abs())).min(5e-3 * dist);
        let f = |k: f64| regular_wronskian(op, b.rho + k * h);
        let d = (8.0 * (f(1.0)? - f(-1.0)?) - (f(2.0)? - f(-2.0)?)) / (12.0 * h);
        let r = s.curve.root(c(b.rho)).re;
        let res = r / d;
        let lhs = res * res;
        let rhs = b.gamma_plus * b.gamma_minus * s.curve.discriminant(c(b.rho)).re;
        inv.residue.push((lhs - rhs).abs() / rhs.abs());
    }
    Ok(inv)
}

/// Classification of a real point for the scattering routines.
pub fn locate(op: &PerturbedOperator, x: f64) -> Location {
    op.background.surface.curve.locate(x)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;
    use std::sync::Arc;

    use super::*;
    use crate::background::BackgroundOperator;
    use crate::jost::Perturbation;
    use crate::surface::SurfaceData;

    fn free(pert: Perturbation) -> PerturbedOperator {
        let s = Arc::new(SurfaceData::from_edges(&[-1.0, 1.0]).unwrap());
        let bg = BackgroundOperator::new(s, DirichletData { mus: vec![], sigmas: vec![] }, -210, 210).unwrap();
        PerturbedOperator::new(Arc::new(bg), pert).unwrap()
    }

    fn period_two(pert: Perturbation) -> PerturbedOperator {
        let s = Arc::new(SurfaceData::from_edges(&[-1.3, -0.3, 0.3, 1.3]).unwrap());
        let bg = BackgroundOperator::new(s, DirichletData { mus: vec![0.0], sigmas: vec![1] }, -210, 210).unwrap();
        PerturbedOperator::new(Arc::new(bg), pert).unwrap()
    }

    fn two_site() -> Perturbation {
        Perturbation { start: 0, da: vec![0.0, 0.2], db: vec![0.3, 0.0] }
    }

    #[test]
    fn wronskian_of_equal_sequences_vanishes() {
        let u = [Complex64::new(0.3, 1.0), Complex64::new(-2.0, 0.5)];
        assert_eq!(wronskian(0.7, u, u), c(0.0));
    }

    #[test]
    fn zero_perturbation_is_reflectionless() {
        let op = period_two(Perturbation::zero());
        let data = scattering_data(&op, 16).unwrap();
        assert!(data.bound_states.is_empty());
        assert_eq!(data.t0, 1.0);
        for n in &data.nodes {
            assert!((n.t - 1.0).norm() < 1e-12);
            assert!(n.r_plus.norm() < 1e-12 && n.r_minus.norm() < 1e-12);
        }
    }

    #[test]
    fn single_site_bound_state_closed_form() {
        let op = free(Perturbation { start: 0, da: vec![0.0], db: vec![1.0] });
        let states = find_bound_states(&op, 400).unwrap();
        assert_eq!(states.len(), 1);
        let b = states[0].state;
        assert!((b.rho - 2f64.sqrt()).abs() < 1e-12);
        let w = 1.0 - 2f64.sqrt();
        let norm = 1.0 + 2.0 * w * w / (1.0 - w * w);
        assert!((b.gamma_plus - 1.0 / norm).abs() < 1e-12);
        assert!((b.gamma_minus - b.gamma_plus).abs() < 1e-12);
        let dense = dense_bound_states(&op, 200).unwrap();
        assert_eq!(dense.len(), 1);
        assert!((dense[0] - b.rho).abs() < 1e-8);
    }

    #[test]
    fn state_hugging_the_edge_is_not_dropped() {
        let op = free(Perturbation {
            start: 0,
            da: vec![0.002825794129012786, -0.06599345253759596, -0.09953186781960788],
            db: vec![0.992788585715933, 0.5113138049317714, 0.49182439627577984],
        });
        assert!(matches!(find_bound_states(&op, 400), Err(Error::TailTruncationTooLarge(_))));
    }

    #[test]
    fn forward_identities_genus_one() {
        let op = period_two(two_site());
        let data = scattering_data(&op, 32).unwrap();
        let inv = forward_invariants(&op, &data).unwrap();
        assert!(inv.unitarity < 1e-10, "{inv:?}");
        assert!(inv.consistency < 1e-10, "{inv:?}");
        assert!(inv.symmetry < 1e-10, "{inv:?}");
        assert!(inv.wronskian_spread < 1e-10, "{inv:?}");
        assert!(inv.residue.iter().all(|&e| e < 1e-6), "{inv:?}");
        let dense = dense_bound_states(&op, 200).unwrap();
        assert_eq!(dense.len(), data.bound_states.len());
        for (d, b) in dense.iter().zip(&data.bound_states) {
            assert!((d - b.rho).abs() < 1e-8);
        }
    }

    #[test]
    fn transmission_at_infinity_is_t0() {
        let op = period_two(two_site());
        let t = transmission(&op, Complex64::new(0.0, 1e4)).unwrap();
        assert!((t - op.t0().unwrap()).norm() < 1e-3, "{t}");
    }

    #[test]
    fn interchange_round_trip() {
        let op = period_two(two_site());
        let data = scattering_data(&op, 8).unwrap();
        let mut buf = Vec::new();
        write_interchange(&data, &mut buf).unwrap();
        let back = read_interchange(buf.as_slice()).unwrap();
        assert!(back == data, "interchange round trip changed the data");
    }

    #[test]
    fn outer_integral_reproduces_constants() {
        let op = period_two(two_site());
        let data = scattering_data(&op, 48).unwrap();
        let pj = PoissonJensen::new(op.background.surface.clone(), &data).unwrap();
        for z in [Complex64::new(0.1, 0.4), Complex64::new(-2.0, 0.3), c(0.1), c(1.7)] {
            let v = pj.constant_data_response(1.0, z);
            assert!((v - 1.0).norm() < 1e-9, "{z}: {v}");
        }
    }

    #[test]
    fn poisson_jensen_free_matches_disc_formula() {
        let op = free(Perturbation { start: 0, da: vec![0.0], db: vec![1.0] });
        let data = scattering_data(&op, 64).unwrap();
        let s = op.background.surface.clone();
        let pj = PoissonJensen::new(s.clone(), &data).unwrap();
        let rho_w = s.quasimomentum(c(data.bound_states[0].rho)).re;
        let disc = |w: Complex64| -> Complex64 {
            let mut f = c(0.0);
            for n in &data.nodes {
                let h = 0.5 * (1.0 - n.r_plus.norm_sqr()).ln() - s.curve.root(c(n.lambda)).norm().ln();
                f += (n.w + w) / (n.w - w) * (h * n.weight);
            }
            let z = s.lambda_of_w(w).unwrap();
            (1.0 - rho_w * w) / (w - rho_w) * s.curve.root(z) * w * f.exp()
        };
        let sign = disc(c(1e-9)).re.signum();
        for k in 0..16 {
            let w = Complex64::from_polar(0.7, 2.0 * PI * (k as f64 + 0.5) / 16.0);
            let z = s.lambda_of_w(w).unwrap();
            let direct = transmission(&op, z).unwrap();
            let rebuilt = pj.transmission(z).unwrap();
            assert!((rebuilt - direct).norm() < 1e-8, "{w}: {rebuilt} vs {direct}");
            assert!((disc(w) * sign - direct).norm() < 1e-8, "{w}: disc {} vs {direct}", disc(w) * sign);
        }
    }

    #[test]
    fn poisson_jensen_genus_one() {
        let op = period_two(two_site());
        let data = scattering_data(&op, 96).unwrap();
        let s = op.background.surface.clone();
        let pj = PoissonJensen::new(s.clone(), &data).unwrap();
        for k in 0..16 {
            let w = Complex64::from_polar(0.8, 2.0 * PI * (k as f64 + 0.5) / 16.0);
            let z = s.lambda_of_w(w).unwrap();
            let direct = transmission(&op, z).unwrap();
            let rebuilt = pj.transmission(z).unwrap();
            assert!((rebuilt - direct).norm() < 1e-6 * direct.norm(), "{w}: {rebuilt} vs {direct}");
        }
        assert!(pj.gap_asymmetry(7).unwrap() < 1e-8);
        for (j, b) in data.bound_states.iter().enumerate() {
            let res = pj.residue(j).unwrap();
            let r2 = s.curve.discriminant(c(b.rho)).re;
            assert!(((res * res).re - b.gamma_plus * b.gamma_minus * r2).abs() < 1e-6 * (res * res).norm());
        }
    }
}

