//! Reconstruction of the transmission coefficient from `|R|` and the bound states.
//!
//! `log |T|` is the harmonic function on the complement of the spectrum with
//! boundary values `log(1 - |R|^2) / 2` and logarithmic poles at the eigenvalues.
//! It is realised as a product of three analytic factors in the upper half plane:
//! Green's-function factors `1 / w_j(1 / (z - rho_j))` built from the quasi-momentum
//! of the Moebius-transformed spectrum, factors `((z - E) w(z))^{1/2}` for the band
//! edges at which `T` vanishes, and `exp F(z)` where `F` solves the remaining Dirichlet
//! problem with a Cauchy kernel whose gap periods are removed by holomorphic
//! differentials.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use super::ScatteringData;
use crate::error::{Error, Result};
use crate::numerics::GaussLegendre;
use crate::surface::{Location, SurfaceData};

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

struct Pole {
    rho: f64,
    image: SurfaceData,
}

impl Pole {
    /// `log (1 / w_rho(1 / (z - rho)))` for `z` in the closed upper half plane.
    fn log_factor(&self, z: Complex64) -> Complex64 {
        let zeta = 1.0 / (z - self.rho);
        let lw = if z.im == 0.0 { self.image.log_w_real(zeta.re).conj() } else { self.image.log_w(zeta) };
        -lw
    }
}

/// Transmission coefficient rebuilt from scattering data.
pub struct PoissonJensen {
    surface: Arc<SurfaceData>,
    /// `(lambda, h, c)` per band point: regularised boundary data and quadrature weight.
    nodes: Vec<(f64, f64, f64)>,
    poles: Vec<Pole>,
    gap_rule: GaussLegendre,
    gap_signs: Vec<f64>,
    /// Band edges at which `|T|^2` vanishes linearly.
    vanishing: Vec<bool>,
    phase: Complex64,
}

impl PoissonJensen {
    /// Fails with [`Error::DataInadmissible`] when `|R| >= 1` at some node.
    pub fn new(surface: Arc<SurfaceData>, data: &ScatteringData) -> Result<Self> {
        let curve = &surface.curve;
        let upper: Vec<_> = data.nodes.iter().filter(|n| n.side > 0.0).collect();
        let mut t2 = Vec::with_capacity(upper.len());
        for n in &upper {
            let v = 1.0 - n.r_plus.norm_sqr();
            if !(v > 0.0) {
                return Err(Error::DataInadmissible(format!("|R| >= 1 at lambda = {}", n.lambda)));
            }
            t2.push(v);
        }
        let edges = curve.edges();
        let mut vanishing = vec![false; edges.len()];
        for b in 0..=surface.genus() {
            let idx: Vec<usize> = (0..upper.len()).filter(|&i| upper[i].band == b).collect();
            if idx.len() < 4 {
                continue;
            }
            let m = idx.len();
            for (l, near, next) in [(2 * b, idx[0], idx[1]), (2 * b + 1, idx[m - 1], idx[m - 2])] {
                let d1 = (upper[near].lambda - edges[l]).abs();
                let d2 = (upper[next].lambda - edges[l]).abs();
                let p = (t2[near] / t2[next]).ln() / (d1 / d2).ln();
                vanishing[l] = p > 0.5;
            }
        }
        let mut nodes = Vec::with_capacity(upper.len());
        for (n, &t) in upper.iter().zip(&t2) {
            let pm: f64 = data.dirichlet.mus.iter().map(|&m| n.lambda - m).product();
            let sub: f64 = edges
                .iter()
                .zip(&vanishing)
                .filter(|(_, &v)| v)
                .map(|(&e, _)| 0.5 * (n.lambda - e).abs().ln())
                .sum();
            nodes.push((n.lambda, 0.5 * t.ln() - sub, n.weight / pm));
        }
        let mut poles = Vec::new();
        for b in &data.bound_states {
            let mut e: Vec<f64> = curve.edges().iter().map(|&x| 1.0 / (x - b.rho)).collect();
            e.sort_by(|a, b| a.partial_cmp(b).unwrap());
            poles.push(Pole { rho: b.rho, image: SurfaceData::from_edges(&e)? });
        }
        let g = surface.genus();
        let gap_signs = (1..=g)
            .map(|j| {
                let (a, b) = curve.gap(j);
                curve.root(c(0.5 * (a + b))).re.signum()
            })
            .collect();
        let mut pj = PoissonJensen {
            surface,
            nodes,
            poles,
            gap_rule: GaussLegendre::new(128),
            gap_signs,
            vanishing,
            phase: c(1.0),
        };
        let e = pj.surface.curve.edges();
        let far = data.bound_states.iter().map(|b| b.rho).fold(e[e.len() - 1], f64::max);
        let x0 = far + 1.0 + pj.surface.curve.scale();
        let t = pj.unnormalised(c(x0))?;
        pj.phase = c(t.norm()) / t;
        Ok(pj)
    }

    /// `v_j(z) = 2 r(z) int_{gap j} d zeta / ((zeta - z) r(zeta))`, for real `z` the value from above.
    fn gap_cauchy(&self, j: usize, z: Complex64, rz: Complex64) -> Complex64 {
        let curve = &self.surface.curve;
        let (a, b) = curve.gap(j);
        let s = self.gap_signs[j - 1];
        let h = 0.5 * (b - a);
        let others = |x: Complex64| -> Complex64 {
            curve
                .edges()
                .iter()
                .filter(|&&e| e != a && e != b)
                .fold(c(-1.0), |acc, &e| acc * (x - e))
        };
        let g_at = |x: Complex64| s / others(x).sqrt();
        let gz = g_at(z);
        let mut sum = c(0.0);
        for (phi, wq) in self.gap_rule.on(0.0, PI) {
            let zeta = a + h * (1.0 - phi.cos());
            let d = c(zeta) - z;
            if d.norm() > 1e-14 * (1.0 + zeta.abs()) {
                sum += (g_at(c(zeta)) - gz) / d * wq;
            }
        }
        let exact = -PI / ((z - a).sqrt() * (z - b).sqrt());
        2.0 * rz * (sum + gz * exact)
    }

    /// `F(z)` for the stored boundary data, or for constant data `h` when given.
    fn outer_integral(&self, z: Complex64, rz: Complex64, constant: Option<f64>) -> Complex64 {
        let s = &self.surface;
        let g = s.genus();
        let v: Vec<Complex64> = (1..=g).map(|j| self.gap_cauchy(j, z, rz)).collect();
        let p: Vec<Complex64> = (0..g)
            .map(|k| (0..g).map(|j| s.cinv[(j, k)] * v[j]).sum::<Complex64>() * -2.0)
            .collect();
        let mut f = c(0.0);
        for &(lam, h, w) in &self.nodes {
            let mut kern = 2.0 * rz / (lam - z);
            let mut pw = 1.0;
            for pk in &p {
                kern += pk * pw;
                pw *= lam;
            }
            f += kern * (constant.unwrap_or(h) * w);
        }
        f
    }

    fn log_outer(&self, z: Complex64) -> Complex64 {
        let s = &self.surface;
        let lw = s.log_w(z);
        let mut l = self.outer_integral(z, s.curve.root(z), None);
        for (&e, _) in s.curve.edges().iter().zip(&self.vanishing).filter(|(_, &v)| v) {
            l += 0.5 * ((z - e).ln() + lw);
        }
        l
    }

    fn check_domain(&self, z: Complex64) -> Result<()> {
        if z.im < 0.0 {
            return Ok(());
        }
        if z.im == 0.0 {
            if let Location::Band(_) = self.surface.curve.locate(z.re) {
                return Err(Error::OutOfDomain);
            }
            if self.poles.iter().any(|p| p.rho == z.re) {
                return Err(Error::OutOfDomain);
            }
        }
        Ok(())
    }

    fn unnormalised(&self, z: Complex64) -> Result<Complex64> {
        let mut l = self.log_outer(z);
        for p in &self.poles {
            l += p.log_factor(z);
        }
        Ok(l.exp())
    }

    /// `T(z)` on the upper sheet; real `z` off the spectrum is taken from above.
    pub fn transmission(&self, z: Complex64) -> Result<Complex64> {
        self.check_domain(z)?;
        if z.im < 0.0 {
            return Ok(self.transmission(z.conj())?.conj());
        }
        Ok(self.unnormalised(z)? * self.phase)
    }

    /// `T` at a point of the open slit disc.
    pub fn transmission_at_w(&self, w: Complex64) -> Result<Complex64> {
        let z = self.surface.lambda_of_w(w)?;
        self.transmission(z)
    }

    /// Residue of the rebuilt `T` at the `j`-th bound state.
    pub fn residue(&self, j: usize) -> Result<Complex64> {
        let rho = self.poles[j].rho;
        let z = c(rho);
        let mut l = self.log_outer(z);
        for (k, p) in self.poles.iter().enumerate() {
            if k != j {
                l += p.log_factor(z);
            }
        }
        Ok(-l.exp() * self.phase / self.poles[j].image.atilde)
    }

    /// Largest relative imaginary part of `T(x + i0)` at `samples` points inside each gap.
    pub fn gap_asymmetry(&self, samples: usize) -> Result<f64> {
        let mut worst = 0.0f64;
        for j in 1..=self.surface.genus() {
            let (a, b) = self.surface.curve.gap(j);
            for k in 0..samples {
                let x = a + (b - a) * (k as f64 + 0.5) / samples as f64;
                if self.poles.iter().any(|p| (p.rho - x).abs() < 1e-6 * (b - a)) {
                    continue;
                }
                let t = self.transmission(c(x))?;
                worst = worst.max(t.im.abs() / t.norm());
            }
        }
        Ok(worst)
    }

    /// Outer integral of constant boundary data `h`, which reproduces `h`.
    pub fn constant_data_response(&self, h: f64, z: Complex64) -> Complex64 {
        self.outer_integral(z, self.surface.curve.root(z), Some(h))
    }
}
