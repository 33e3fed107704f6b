//! Hyperelliptic curve of a finite-gap spectrum: branch of the square root,
//! periods, Riemann theta function, Abel map and the quasi-momentum map onto
//! the slit unit disc.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{bracket_root, integrate_adaptive, GaussLegendre, Poly, SegmentPoint};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const PI: f64 = std::f64::consts::PI;
const REL_TOL: f64 = 1e-14;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn i_pow(m: usize) -> Complex64 {
    match m % 4 {
        0 => c(1.0),
        1 => I,
        2 => c(-1.0),
        _ => -I,
    }
}

/// Adaptive integration with a tolerance relative to the L1 norm of the integrand.
fn integrate_rel<F: FnMut(f64) -> Complex64>(mut f: F, a: f64, b: f64, rel: f64) -> (Complex64, f64) {
    let rule = GaussLegendre::new(24);
    let l1: f64 = rule.on(a, b).map(|(x, w)| w * f(x).norm()).sum();
    integrate_adaptive(f, a, b, (rel * l1).max(1e-300))
}

/// Sheet of the two-sheeted surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
pub enum Sheet {
    Upper,
    Lower,
}

impl Sheet {
    pub fn sign(self) -> f64 {
        match self {
            Sheet::Upper => 1.0,
            Sheet::Lower => -1.0,
        }
    }

    pub fn from_sign(s: f64) -> Sheet {
        if s >= 0.0 {
            Sheet::Upper
        } else {
            Sheet::Lower
        }
    }
}

/// A point `(z, sheet)` on the surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub z: Complex64,
    pub sheet: Sheet,
}

/// Position of a real number relative to the spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    LeftOfSpectrum,
    Band(usize),
    /// Gap `j` in `1..=g`, between bands `j - 1` and `j`.
    Gap(usize),
    RightOfSpectrum,
}

/// Curve `R(z) = prod (z - E_j)` with `2g + 2` real branch points.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperellipticCurve {
    edges: Vec<f64>,
}

impl HyperellipticCurve {
    pub fn new(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 || edges.len() % 2 != 0 {
            return Err(Error::InvalidEdges(format!(
                "expected an even number of at least two edges, got {}",
                edges.len()
            )));
        }
        if edges.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidEdges("edges must be finite".into()));
        }
        if edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidEdges("edges must be strictly increasing".into()));
        }
        Ok(HyperellipticCurve { edges })
    }

    pub fn genus(&self) -> usize {
        self.edges.len() / 2 - 1
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn band(&self, b: usize) -> (f64, f64) {
        (self.edges[2 * b], self.edges[2 * b + 1])
    }

    /// Gap `j` in `1..=g`.
    pub fn gap(&self, j: usize) -> (f64, f64) {
        (self.edges[2 * j - 1], self.edges[2 * j])
    }

    pub fn scale(&self) -> f64 {
        let e = &self.edges;
        (e[e.len() - 1] - e[0]).max(e.iter().fold(0.0f64, |m, x| m.max(x.abs())))
    }

    pub fn locate(&self, x: f64) -> Location {
        let e = &self.edges;
        if x < e[0] {
            return Location::LeftOfSpectrum;
        }
        if x > e[e.len() - 1] {
            return Location::RightOfSpectrum;
        }
        let k = e.partition_point(|&v| v <= x).saturating_sub(1).min(e.len() - 2);
        if k % 2 == 0 {
            Location::Band(k / 2)
        } else {
            Location::Gap(k.div_ceil(2))
        }
    }

    pub fn in_spectrum(&self, x: f64) -> bool {
        matches!(self.locate(x), Location::Band(_))
    }

    /// `R(z)`.
    pub fn discriminant(&self, z: Complex64) -> Complex64 {
        self.edges.iter().fold(c(1.0), |acc, &e| acc * (z - e))
    }

    /// Upper-sheet branch `-prod sqrt(z - E_j)`; for real `z` the boundary value from above.
    pub fn root(&self, z: Complex64) -> Complex64 {
        let mut p = c(-1.0);
        for &e in &self.edges {
            let d = z - e;
            let s = if d.im == 0.0 {
                if d.re >= 0.0 {
                    c(d.re.sqrt())
                } else {
                    I * (-d.re).sqrt()
                }
            } else {
                d.sqrt()
            };
            p *= s;
        }
        p
    }

    /// Boundary value of the upper-sheet branch at real `x` from above (`side > 0`) or below.
    pub fn root_boundary(&self, x: f64, side: f64) -> Complex64 {
        let r = self.root(c(x));
        if side >= 0.0 {
            r
        } else {
            r.conj()
        }
    }

    pub fn root_at(&self, p: SurfacePoint) -> Complex64 {
        self.root(p.z) * p.sheet.sign()
    }

    /// `(jacobian / |R^{1/2}|, phase)` at a point of segment `k` (between `E_k` and `E_{k+1}`),
    /// where `R^{1/2}(t + i0) = phase * |R^{1/2}(t)|`.
    fn segment_factor(&self, k: usize, p: &SegmentPoint) -> (f64, Complex64) {
        let mut prod = 1.0;
        for (l, &e) in self.edges.iter().enumerate() {
            if l != k && l != k + 1 {
                prod *= (p.x - e).abs().sqrt();
            }
        }
        let ratio = if p.from_left > 0.0 && p.to_right > 0.0 {
            p.jacobian / (p.from_left * p.to_right).sqrt()
        } else {
            1.0
        };
        let m = self.edges.len() - 1 - k;
        (ratio / prod, -i_pow(m))
    }

    /// `int_{E_k}^{x(phi_max)} f(t) / R^{1/2}(t + i0) dt` over segment `k`.
    pub fn segment_integral<F: FnMut(f64) -> Complex64>(
        &self,
        k: usize,
        phi_max: f64,
        mut f: F,
    ) -> (Complex64, f64) {
        let (a, b) = (self.edges[k], self.edges[k + 1]);
        integrate_rel(
            |phi| {
                let p = SegmentPoint::at(a, b, phi);
                let (ratio, phase) = self.segment_factor(k, &p);
                f(p.x) * ratio / phase
            },
            0.0,
            phi_max,
            REL_TOL,
        )
    }

    /// Angle `phi` with `x = m - h cos(phi)` on segment `k`.
    fn segment_angle(&self, k: usize, x: f64) -> f64 {
        let (a, b) = (self.edges[k], self.edges[k + 1]);
        let m = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        ((m - x) / h).clamp(-1.0, 1.0).acos()
    }

    /// `int_{E_top}^{inf} f(t) / R^{1/2}(t) dt` for integrands decaying at least like `t^{-3/2}`.
    pub fn right_tail<F: FnMut(f64) -> Complex64>(&self, mut f: F) -> (Complex64, f64) {
        let n = self.edges.len();
        let top = self.edges[n - 1];
        integrate_rel(
            |s| {
                if s >= 1.0 {
                    return c(0.0);
                }
                let u = s / (1.0 - s);
                let t = top + u * u;
                let prod: f64 = self.edges[..n - 1].iter().map(|&e| (t - e).sqrt()).product();
                -f(t) * 2.0 / ((1.0 - s) * (1.0 - s) * prod)
            },
            0.0,
            1.0,
            REL_TOL,
        )
    }
}

/// Derived quantities of a curve: normalised differentials, periods, and the
/// quasi-momentum normalisation.
#[derive(Debug, Clone)]
pub struct SurfaceData {
    pub curve: HyperellipticCurve,
    /// `C[j][k] = int_{a_k} z^j dz / R^{1/2}`.
    pub c_matrix: DMatrix<f64>,
    /// Inverse of `c_matrix`: `zeta_k = sum_j cinv[(k, j)] z^j dz / R^{1/2}`.
    pub cinv: DMatrix<f64>,
    /// b-period matrix.
    pub tau: DMatrix<Complex64>,
    /// Zeros of the quasi-momentum differential, one per gap.
    pub lambdas: Vec<f64>,
    /// Logarithmic capacity of the spectrum.
    pub atilde: f64,
    pub btilde: f64,
    /// Integral of the normalised differentials over each real segment (from above).
    pub zeta_segments: Vec<Vec<Complex64>>,
    /// `int_{E_top}^{inf} zeta`.
    pub zeta_tail: Vec<f64>,
    /// Integral of the quasi-momentum differential over each segment (from above).
    pub qm_segments: Vec<Complex64>,
    pub quadrature_error: f64,
    pub condition_number: f64,
}

/// Summary numbers reported by [`SurfaceData::report`].
#[derive(Debug, Clone, Serialize)]
pub struct SurfaceReport {
    pub genus: usize,
    pub edges: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub atilde: f64,
    pub btilde: f64,
    pub tau_re: Vec<Vec<f64>>,
    pub tau_im: Vec<Vec<f64>>,
    pub tau_symmetry_error: f64,
    pub tau_im_min_eigenvalue: f64,
    pub a_period_residual: f64,
    pub theta_identity_error: f64,
    pub quadrature_error: f64,
    pub condition_number: f64,
    /// Angle `pi * mu([E_0, E_k])` at every band edge.
    pub edge_angles: Vec<f64>,
    /// `w(lambda_j)`, the inner tips of the slits.
    pub slit_tips: Vec<f64>,
}

impl SurfaceData {
    pub fn new(curve: HyperellipticCurve) -> Result<Self> {
        let g = curve.genus();
        let mut err = 0.0;
        let mut cm = DMatrix::<f64>::zeros(g, g);
        for k in 0..g {
            for j in 0..g {
                let (v, e) = curve.segment_integral(2 * k + 1, PI, |t| c(t.powi(j as i32)));
                cm[(j, k)] = 2.0 * v.re;
                err += 2.0 * e;
            }
        }
        let (cinv, cond) = if g > 0 {
            let svd = cm.clone().svd(false, false);
            let smax = svd.singular_values.max();
            let smin = svd.singular_values.min();
            let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
            if !cond.is_finite() || cond > 1e12 {
                return Err(Error::SingularPeriodMatrix(cond));
            }
            let inv = cm.clone().try_inverse().ok_or(Error::SingularPeriodMatrix(cond))?;
            (inv, cond)
        } else {
            (DMatrix::zeros(0, 0), 1.0)
        };

        let nseg = curve.edges.len() - 1;
        let mut raw_segments = vec![vec![c(0.0); g]; nseg];
        for (k, seg) in raw_segments.iter_mut().enumerate() {
            for (j, v) in seg.iter_mut().enumerate() {
                let (val, e) = curve.segment_integral(k, PI, |t| c(t.powi(j as i32)));
                *v = val;
                err += e;
            }
        }
        let mut raw_tail = vec![0.0; g];
        for (j, v) in raw_tail.iter_mut().enumerate() {
            let (val, e) = curve.right_tail(|t| c(t.powi(j as i32)));
            *v = val.re;
            err += e;
        }
        let zeta_segments: Vec<Vec<Complex64>> = raw_segments
            .iter()
            .map(|seg| {
                (0..g)
                    .map(|k| (0..g).map(|j| seg[j] * cinv[(k, j)]).sum())
                    .collect()
            })
            .collect();
        let zeta_tail: Vec<f64> = (0..g)
            .map(|k| (0..g).map(|j| raw_tail[j] * cinv[(k, j)]).sum())
            .collect();

        let mut tau = DMatrix::<Complex64>::zeros(g, g);
        for j in 0..g {
            for k in 0..g {
                let mut s = c(0.0);
                for b in 0..=j {
                    s += zeta_segments[2 * b][k];
                }
                tau[(j, k)] = -2.0 * s;
            }
        }

        let lambdas = if g > 0 {
            let mut a = DMatrix::<f64>::zeros(g, g);
            let mut rhs = nalgebra::DVector::<f64>::zeros(g);
            for j in 0..g {
                for k in 0..g {
                    a[(j, k)] = cm[(k, j)];
                }
                let (v, e) = curve.segment_integral(2 * j + 1, PI, |t| c(t.powi(g as i32)));
                rhs[j] = -2.0 * v.re;
                err += e;
            }
            let d = a.lu().solve(&rhs).ok_or(Error::SingularPeriodMatrix(cond))?;
            let mut coeffs: Vec<f64> = d.iter().copied().collect();
            coeffs.push(1.0);
            let p = Poly(coeffs);
            let mut roots = Vec::with_capacity(g);
            for j in 1..=g {
                let (lo, hi) = curve.gap(j);
                let r = bracket_root(|x| p.eval(x), lo, hi).ok_or(Error::RootOutsideGap(j))?;
                roots.push(r);
            }
            roots
        } else {
            Vec::new()
        };

        let btilde = 0.5 * curve.edges.iter().sum::<f64>() - lambdas.iter().sum::<f64>();

        let qm_poly = Poly::monic_from_roots(&lambdas);
        let mut qm_segments = Vec::with_capacity(nseg);
        for k in 0..nseg {
            let (v, e) = curve.segment_integral(k, PI, |t| c(qm_poly.eval(t)));
            qm_segments.push(v);
            err += e;
        }

        let e0 = curve.edges[0];
        let sgn = if g % 2 == 0 { 1.0 } else { -1.0 };
        let (log_cap, e) = integrate_rel(
            |s| {
                if s >= 1.0 {
                    return c(0.0);
                }
                let u = s / (1.0 - s);
                let t = e0 - u * u;
                let prod: f64 = curve.edges[1..].iter().map(|&e| (e - t).sqrt()).product();
                let f = qm_poly.eval(t) * sgn * 2.0 / ((1.0 - s) * (1.0 - s) * prod);
                let reference = 2.0 * s / ((1.0 - s) * ((1.0 - s) * (1.0 - s) + s * s));
                c(f - reference)
            },
            0.0,
            1.0,
            REL_TOL,
        );
        err += e;
        let atilde = (-log_cap.re).exp();

        Ok(SurfaceData {
            curve,
            c_matrix: cm,
            cinv,
            tau,
            lambdas,
            atilde,
            btilde,
            zeta_segments,
            zeta_tail,
            qm_segments,
            quadrature_error: err,
            condition_number: cond,
        })
    }

    pub fn from_edges(edges: &[f64]) -> Result<Self> {
        SurfaceData::new(HyperellipticCurve::new(edges.to_vec())?)
    }

    pub fn genus(&self) -> usize {
        self.curve.genus()
    }

    /// Monic polynomial `prod (z - lambda_j)`.
    pub fn lambda_poly(&self) -> Poly {
        Poly::monic_from_roots(&self.lambdas)
    }

    /// Quasi-momentum differential density `prod (z - lambda_j) / R^{1/2}(z)` on the upper sheet.
    pub fn qm_density(&self, z: Complex64) -> Complex64 {
        let p = self
            .lambdas
            .iter()
            .fold(c(1.0), |acc, &l| acc * (z - l));
        p / self.curve.root(z)
    }

    /// Density of the equilibrium measure at a point of the spectrum.
    pub fn equilibrium_density(&self, x: f64) -> f64 {
        if !self.curve.in_spectrum(x) {
            return 0.0;
        }
        let p: f64 = self.lambdas.iter().map(|&l| x - l).product();
        p.abs() / (PI * self.curve.root(c(x)).norm())
    }

    /// `int_{a_k} zeta_j - delta_jk`, recomputed from scratch; returns the largest residual.
    pub fn a_period_residual(&self) -> f64 {
        let g = self.genus();
        let mut worst = 0.0f64;
        for k in 0..g {
            for j in 0..g {
                let (v, _) = self.curve.segment_integral(2 * k + 1, PI, |t| {
                    c((0..g).map(|i| self.cinv[(j, i)] * t.powi(i as i32)).sum())
                });
                let target = if j == k { 1.0 } else { 0.0 };
                worst = worst.max((2.0 * v - target).norm());
            }
        }
        worst
    }

    /// Truncation radius of the theta lattice sum for a given imaginary shift.
    fn theta_radius(&self, im_z: f64) -> i64 {
        let g = self.genus();
        let mut im = DMatrix::<f64>::zeros(g, g);
        for j in 0..g {
            for k in 0..g {
                im[(j, k)] = self.tau[(j, k)].im;
            }
        }
        let lmin = im.symmetric_eigenvalues().min().max(1e-3);
        (1.0 + (40.0 / (PI * lmin)).sqrt() + im_z / lmin).ceil() as i64
    }

    fn lattice_sum<F: FnMut(&[i64], Complex64)>(&self, z: &[Complex64], mut visit: F) {
        let g = self.genus();
        if g == 0 {
            visit(&[], c(1.0));
            return;
        }
        let im_max = z.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
        let m = self.theta_radius(im_max);
        let mut idx = vec![-m; g];
        loop {
            let mut q = c(0.0);
            for j in 0..g {
                let mj = idx[j] as f64;
                q += 2.0 * mj * z[j];
                for k in 0..g {
                    q += self.tau[(j, k)] * (mj * idx[k] as f64);
                }
            }
            visit(&idx, (I * PI * q).exp());
            let mut j = 0;
            loop {
                if j == g {
                    return;
                }
                idx[j] += 1;
                if idx[j] > m {
                    idx[j] = -m;
                    j += 1;
                } else {
                    break;
                }
            }
        }
    }

    /// Riemann theta function with period matrix `tau`.
    pub fn theta(&self, z: &[Complex64]) -> Complex64 {
        let mut s = c(0.0);
        self.lattice_sum(z, |_, t| s += t);
        s
    }

    /// Theta function and its gradient.
    pub fn theta_with_gradient(&self, z: &[Complex64]) -> (Complex64, Vec<Complex64>) {
        let g = self.genus();
        let mut s = c(0.0);
        let mut grad = vec![c(0.0); g];
        self.lattice_sum(z, |m, t| {
            s += t;
            for j in 0..g {
                grad[j] += t * (2.0 * PI * m[j] as f64) * I;
            }
        });
        (s, grad)
    }

    /// Largest violation of evenness, periodicity and quasi-periodicity at the given points.
    pub fn theta_identity_error(&self, points: &[Vec<Complex64>]) -> f64 {
        let g = self.genus();
        let mut worst = 0.0f64;
        for z in points {
            let t = self.theta(z);
            let scale = t.norm().max(1e-300);
            let neg: Vec<Complex64> = z.iter().map(|v| -v).collect();
            worst = worst.max((self.theta(&neg) - t).norm() / scale);
            for j in 0..g {
                let mut zp = z.clone();
                zp[j] += 1.0;
                worst = worst.max((self.theta(&zp) - t).norm() / scale);
                let mut zt = z.clone();
                for k in 0..g {
                    zt[k] += self.tau[(k, j)];
                }
                let factor = (-I * PI * self.tau[(j, j)] - 2.0 * I * PI * z[j]).exp();
                let lhs = self.theta(&zt);
                worst = worst.max((lhs - factor * t).norm() / (factor * t).norm().max(1e-300));
            }
        }
        worst
    }

    /// Abel map, based at `E_0`, of a point in gap `j` (`1..=g`) on the given sheet.
    pub fn abel_gap_point(&self, j: usize, x: f64, sheet: Sheet) -> Vec<Complex64> {
        let g = self.genus();
        let k = 2 * j - 1;
        let mut base = vec![c(0.0); g];
        for seg in &self.zeta_segments[..k] {
            for (b, v) in base.iter_mut().zip(seg) {
                *b += v;
            }
        }
        let phi = self.curve.segment_angle(k, x);
        let part: Vec<Complex64> = (0..g)
            .map(|i| {
                self.curve
                    .segment_integral(k, phi, |t| {
                        c((0..g).map(|l| self.cinv[(i, l)] * t.powi(l as i32)).sum())
                    })
                    .0
            })
            .collect();
        base.iter().zip(&part).map(|(b, p)| b + p * sheet.sign()).collect()
    }

    /// Abel map of the upper-sheet point at infinity.
    pub fn abel_infinity(&self) -> Vec<Complex64> {
        let g = self.genus();
        (0..g)
            .map(|k| self.zeta_segments.iter().map(|s| s[k]).sum::<Complex64>() + self.zeta_tail[k])
            .collect()
    }

    /// Abel map of the upper-sheet infinity based at the lower-sheet infinity.
    pub fn abel_infinity_pair(&self) -> Vec<f64> {
        self.zeta_tail.iter().map(|v| -2.0 * v).collect()
    }

    /// Vector of Riemann constants for the base point `E_0`, modulo the period lattice.
    pub fn riemann_constant(&self) -> Vec<Complex64> {
        let g = self.genus();
        (0..g)
            .map(|j| {
                let s: Complex64 = (0..g).map(|k| self.tau[(j, k)]).sum();
                (c(((g - j) % 2) as f64) + s) * 0.5
            })
            .collect()
    }

    /// Logarithm of the quasi-momentum at a real point, boundary value from above.
    pub fn log_w_real(&self, x: f64) -> Complex64 {
        let e = self.curve.edges();
        let n = e.len();
        let poly = self.lambda_poly();
        if x <= e[0] {
            if x == e[0] {
                return c(0.0);
            }
            let d = e[0] - x;
            let sgn = if self.genus() % 2 == 0 { 1.0 } else { -1.0 };
            let (v, _) = integrate_rel(
                |s| {
                    let t = e[0] - d * s * s;
                    let prod: f64 = e[1..].iter().map(|&ek| (ek - t).sqrt()).product();
                    c(poly.eval(t) * sgn * 2.0 * d.sqrt() / prod)
                },
                0.0,
                1.0,
                REL_TOL,
            );
            return -v;
        }
        if x >= e[n - 1] {
            let base: Complex64 = self.qm_segments.iter().sum();
            let d = x - e[n - 1];
            if d == 0.0 {
                return base;
            }
            let (v, _) = integrate_rel(
                |s| {
                    let t = e[n - 1] + d * s * s;
                    let prod: f64 = e[..n - 1].iter().map(|&ek| (t - ek).sqrt()).product();
                    c(-poly.eval(t) * 2.0 * d.sqrt() / prod)
                },
                0.0,
                1.0,
                REL_TOL,
            );
            return base + v;
        }
        let k = e.partition_point(|&v| v <= x).saturating_sub(1).min(n - 2);
        let base: Complex64 = self.qm_segments[..k].iter().sum();
        let phi = self.curve.segment_angle(k, x);
        let (part, _) = self.curve.segment_integral(k, phi, |t| c(poly.eval(t)));
        base + part
    }

    /// Logarithm of the quasi-momentum `w(z)` on the upper sheet; real `z` is taken from above.
    pub fn log_w(&self, z: Complex64) -> Complex64 {
        if z.im < 0.0 {
            return self.log_w(z.conj()).conj();
        }
        let base = self.log_w_real(z.re);
        if z.im == 0.0 {
            return base;
        }
        let (x, y) = (z.re, z.im);
        let (v, _) = integrate_rel(
            |u| {
                let zeta = Complex64::new(x, y * u * u);
                self.qm_density(zeta) * I * (2.0 * y * u)
            },
            0.0,
            1.0,
            REL_TOL,
        );
        base + v
    }

    /// Quasi-momentum `w(z)`, mapping the upper sheet onto the slit unit disc.
    pub fn quasimomentum(&self, z: Complex64) -> Complex64 {
        self.log_w(z).exp()
    }

    /// `dw/dz`.
    pub fn quasimomentum_derivative(&self, z: Complex64) -> Complex64 {
        self.quasimomentum(z) * self.qm_density(z)
    }

    /// Angles `pi * mu([E_0, E_k])` of all band edges on the unit circle.
    pub fn edge_angles(&self) -> Vec<f64> {
        let mut acc = c(0.0);
        let mut out = vec![0.0];
        for s in &self.qm_segments {
            acc += s;
            out.push(acc.im);
        }
        out
    }

    /// Inverse of the quasi-momentum map.
    ///
    /// Points of the open disc map to the upper sheet. Points on the unit circle
    /// map to the bank of a band given by the sign of `Im w`; the returned value
    /// is then real. Points on a slit are ambiguous.
    pub fn lambda_of_w(&self, w: Complex64) -> Result<Complex64> {
        let r = w.norm();
        if !(r > 0.0) || r > 1.0 + 1e-12 || !r.is_finite() {
            return Err(Error::OutOfDomain);
        }
        let e = self.curve.edges();
        let n = e.len();
        if w.im < 0.0 {
            return Ok(self.lambda_of_w(w.conj())?.conj());
        }
        let theta = w.arg();
        if (r - 1.0).abs() <= 1e-13 {
            return self.lambda_on_circle(theta);
        }
        let angles = self.edge_angles();
        for j in 1..=self.genus() {
            let a = angles[2 * j - 1];
            if (theta - a).abs() < 1e-12 {
                let tip = self.log_w_real(self.lambdas[j - 1]).re.exp();
                if r >= tip - 1e-12 {
                    return Err(Error::AmbiguousSlit);
                }
            }
        }
        if w.im == 0.0 {
            let target = r.ln();
            if w.re > 0.0 {
                let mut lo = e[0] - 1.0;
                while self.log_w_real(lo).re > target {
                    lo = e[0] - 2.0 * (e[0] - lo);
                }
                let x = bracket_root(|x| self.log_w_real(x).re - target, lo, e[0])
                    .ok_or_else(|| Error::NotConverged(format!("{w}")))?;
                return Ok(c(x));
            }
            let mut hi = e[n - 1] + 1.0;
            while self.log_w_real(hi).re > target {
                hi = e[n - 1] + 2.0 * (hi - e[n - 1]);
            }
            let x = bracket_root(|x| self.log_w_real(x).re - target, e[n - 1], hi)
                .ok_or_else(|| Error::NotConverged(format!("{w}")))?;
            return Ok(c(x));
        }
        self.lambda_by_continuation(r.ln(), theta)
            .ok_or_else(|| Error::NotConverged(format!("{w}")))
    }

    fn lambda_on_circle(&self, theta: f64) -> Result<Complex64> {
        let t = theta.abs();
        let angles = self.edge_angles();
        let e = self.curve.edges();
        for b in 0..=self.genus() {
            let (lo, hi) = (angles[2 * b], angles[2 * b + 1]);
            if t >= lo - 1e-14 && t <= hi + 1e-14 {
                if t <= lo {
                    return Ok(c(e[2 * b]));
                }
                if t >= hi {
                    return Ok(c(e[2 * b + 1]));
                }
                let x = bracket_root(|x| self.log_w_real(x).im - t, e[2 * b], e[2 * b + 1])
                    .ok_or(Error::OutOfDomain)?;
                return Ok(c(x));
            }
        }
        Err(Error::OutOfDomain)
    }

    fn newton(&self, mut z: Complex64, target: Complex64) -> Option<Complex64> {
        for _ in 0..60 {
            let f = self.log_w(z) - target;
            if f.norm() < 1e-14 * (1.0 + target.norm()) {
                return Some(z);
            }
            let d = self.qm_density(z);
            let mut step = f / d;
            let mut accepted = false;
            for _ in 0..30 {
                let cand = z - step;
                if cand.im > 0.0 && (self.log_w(cand) - target).norm() < f.norm() {
                    z = cand;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                return if f.norm() < 1e-11 { Some(z) } else { None };
            }
        }
        let f = self.log_w(z) - target;
        (f.norm() < 1e-11).then_some(z)
    }

    /// Follows the ray of constant angle from near the origin out to radius `exp(log_r)`.
    fn lambda_by_continuation(&self, log_r: f64, theta: f64) -> Option<Complex64> {
        let start_r = 1e-3 * self.atilde / (1.0 + self.curve.scale());
        let mut lr = start_r.ln().min(log_r);
        let mut z = -self.atilde / Complex64::from_polar(lr.exp(), theta);
        z = self.newton(z, Complex64::new(lr, theta))?;
        let mut step = 0.25;
        while lr < log_r {
            let next = (lr + step).min(log_r);
            let target = Complex64::new(next, theta);
            let predictor = z + (next - lr) / self.qm_density(z);
            let guess = if predictor.im > 0.0 { predictor } else { z };
            match self.newton(guess, target) {
                Some(zn) => {
                    z = zn;
                    lr = next;
                    step = (step * 1.5).min(0.5);
                }
                None => {
                    step *= 0.5;
                    if step < 1e-8 {
                        return None;
                    }
                }
            }
        }
        Some(z)
    }

    /// Circle-quadrature grid with `nodes_per_band` nodes on each bank of every band.
    pub fn circle_grid(&self, mus: &[f64], nodes_per_band: usize) -> CircleGrid {
        let rule = GaussLegendre::new(nodes_per_band);
        let g = self.genus();
        let e = self.curve.edges();
        let mut nodes = Vec::with_capacity(4 * nodes_per_band * (g + 1));
        for b in 0..=g {
            let k = 2 * b;
            let (a, bb) = (e[k], e[k + 1]);
            let sign = if (g - b) % 2 == 0 { 1.0 } else { -1.0 };
            for (phi, wq) in rule.on(0.0, PI) {
                let p = SegmentPoint::at(a, bb, phi);
                let (ratio, _) = self.curve.segment_factor(k, &p);
                let pm: f64 = mus.iter().map(|&m| p.x - m).product();
                let weight = sign * wq * ratio * pm / (2.0 * PI);
                for side in [1.0, -1.0] {
                    let lam = p.x;
                    let log_w = {
                        let v = self.log_w_real(lam);
                        if side > 0.0 {
                            v
                        } else {
                            v.conj()
                        }
                    };
                    nodes.push(CircleNode {
                        band: b,
                        lambda: lam,
                        side,
                        w: log_w.exp(),
                        root: self.curve.root_boundary(lam, side),
                        weight,
                    });
                }
            }
        }
        CircleGrid { nodes }
    }

    pub fn report(&self, sample_points: &[Vec<Complex64>]) -> SurfaceReport {
        let g = self.genus();
        let mut sym = 0.0f64;
        let mut im = DMatrix::<f64>::zeros(g, g);
        for j in 0..g {
            for k in 0..g {
                sym = sym.max((self.tau[(j, k)] - self.tau[(k, j)]).norm());
                im[(j, k)] = 0.5 * (self.tau[(j, k)].im + self.tau[(k, j)].im);
            }
        }
        let lmin = if g > 0 { im.symmetric_eigenvalues().min() } else { f64::INFINITY };
        let slit_tips = self
            .lambdas
            .iter()
            .map(|&l| self.log_w_real(l).re.exp())
            .collect();
        SurfaceReport {
            genus: g,
            edges: self.curve.edges().to_vec(),
            lambdas: self.lambdas.clone(),
            atilde: self.atilde,
            btilde: self.btilde,
            tau_re: (0..g).map(|j| (0..g).map(|k| self.tau[(j, k)].re).collect()).collect(),
            tau_im: (0..g).map(|j| (0..g).map(|k| self.tau[(j, k)].im).collect()).collect(),
            tau_symmetry_error: sym,
            tau_im_min_eigenvalue: lmin,
            a_period_residual: self.a_period_residual(),
            theta_identity_error: self.theta_identity_error(sample_points),
            quadrature_error: self.quadrature_error,
            condition_number: self.condition_number,
            edge_angles: self.edge_angles(),
            slit_tips,
        }
    }
}

/// Spectral parameter together with the chosen value of `R^{1/2}`.
///
/// Off the spectrum this is the upper-sheet value; on a band it is the
/// boundary value from the requested side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPoint {
    pub z: Complex64,
    pub root: Complex64,
}

impl SpectralPoint {
    pub fn upper(curve: &HyperellipticCurve, z: Complex64) -> Self {
        SpectralPoint { z, root: curve.root(z) }
    }

    pub fn on_band(curve: &HyperellipticCurve, x: f64, side: f64) -> Self {
        SpectralPoint { z: c(x), root: curve.root_boundary(x, side) }
    }

    pub fn of_node(node: &CircleNode) -> Self {
        SpectralPoint { z: c(node.lambda), root: node.root }
    }
}

/// A node of the circle quadrature: a point on one bank of a band.
#[derive(Debug, Clone, Copy)]
pub struct CircleNode {
    pub band: usize,
    pub lambda: f64,
    /// `+1` for the upper bank (`Im w > 0`), `-1` for the lower bank.
    pub side: f64,
    pub w: Complex64,
    /// Boundary value of the upper-sheet square root on this bank.
    pub root: Complex64,
    /// Weight of the measure `(1 / 2 pi i) d omega` attached to this node.
    pub weight: f64,
}

/// Quadrature for `(1 / 2 pi i) oint f d omega` over the unit circle,
/// assembled from Gauss-Legendre rules on each band in the cosine variable.
#[derive(Debug, Clone)]
pub struct CircleGrid {
    pub nodes: Vec<CircleNode>,
}

impl CircleGrid {
    pub fn integrate<F: FnMut(&CircleNode) -> Complex64>(&self, mut f: F) -> Complex64 {
        self.nodes.iter().map(|n| f(n) * n.weight).sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}
