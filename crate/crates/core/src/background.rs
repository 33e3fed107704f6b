//! Quasi-periodic finite-gap background operator and its Baker-Akhiezer functions.
//!
//! Coefficients are generated by the trace-formula recursion for the Dirichlet
//! divisor. Each step re-projects the divisor onto the real cycles, and the
//! result is cross-checked against the theta-function representation.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{bracket_root, Poly};
use crate::surface::{Location, Sheet, SpectralPoint, SurfaceData};

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Dirichlet divisor at `n = 0`: one eigenvalue per gap with its sheet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletData {
    pub mus: Vec<f64>,
    pub sigmas: Vec<i8>,
}

impl DirichletData {
    pub fn validate(&self, surface: &SurfaceData) -> Result<()> {
        let g = surface.genus();
        if self.mus.len() != g || self.sigmas.len() != g {
            return Err(Error::InvalidDirichletData(format!(
                "expected {g} eigenvalues and signs, got {} and {}",
                self.mus.len(),
                self.sigmas.len()
            )));
        }
        for (j, (&mu, &s)) in self.mus.iter().zip(&self.sigmas).enumerate() {
            if s != 1 && s != -1 {
                return Err(Error::InvalidDirichletData(format!("sigma_{} must be +1 or -1", j + 1)));
            }
            let (lo, hi) = surface.curve.gap(j + 1);
            if mu == lo || mu == hi {
                return Err(Error::EdgeCase(0));
            }
            if !(mu > lo && mu < hi) {
                return Err(Error::InvalidDirichletData(format!(
                    "mu_{} = {mu} is not inside gap ({lo}, {hi})",
                    j + 1
                )));
            }
        }
        Ok(())
    }
}

/// Divisor and polynomials `G_n`, `Q_n` at one lattice site.
#[derive(Debug, Clone)]
struct SiteState {
    g_poly: Poly,
    q_poly: Poly,
    mus: Vec<f64>,
    sigmas: Vec<i8>,
    b: f64,
}

/// Background operator on a finite window of sites.
#[derive(Debug, Clone)]
pub struct BackgroundOperator {
    pub surface: Arc<SurfaceData>,
    pub dirichlet: DirichletData,
    lo: i64,
    hi: i64,
    a: Vec<f64>,
    sites: Vec<SiteState>,
    /// Largest difference between the recursion and the theta formulas.
    pub theta_discrepancy: f64,
}

fn disc_poly(surface: &SurfaceData) -> Poly {
    Poly::monic_from_roots(surface.curve.edges())
}

fn site_from_divisor(surface: &SurfaceData, mus: Vec<f64>, sigmas: Vec<i8>) -> SiteState {
    let g_poly = Poly::monic_from_roots(&mus);
    let b = 0.5 * surface.curve.edges().iter().sum::<f64>() - mus.iter().sum::<f64>();
    let mut q_poly = Poly(vec![-b, 1.0]).mul(&g_poly);
    for j in 0..mus.len() {
        let others: Vec<f64> = mus.iter().enumerate().filter(|(k, _)| *k != j).map(|(_, &m)| m).collect();
        let basis = Poly::monic_from_roots(&others);
        let denom = basis.eval(mus[j]);
        let rj = surface.curve.root(c(mus[j])).re;
        q_poly = q_poly.add(&basis.scale(sigmas[j] as f64 * rj / denom));
    }
    SiteState { g_poly, q_poly, mus, sigmas, b }
}

/// Projects a degree-`g` monic polynomial and a companion `Q` onto a real divisor.
fn project(surface: &SurfaceData, g_poly: &Poly, q_poly: &Poly, n: i64) -> Result<SiteState> {
    let g = surface.genus();
    let mut mus = Vec::with_capacity(g);
    let mut sigmas = Vec::with_capacity(g);
    for j in 1..=g {
        let (lo, hi) = surface.curve.gap(j);
        let mu = match bracket_root(|x| g_poly.eval(x), lo, hi) {
            Some(m) => m,
            None => {
                let (flo, fhi) = (g_poly.eval(lo).abs(), g_poly.eval(hi).abs());
                let scale = g_poly.0.iter().map(|v| v.abs()).sum::<f64>() * (1.0 + hi.abs()).powi(g as i32);
                if flo.min(fhi) > 1e-8 * scale {
                    return Err(Error::EdgeCase(n));
                }
                if flo < fhi {
                    lo
                } else {
                    hi
                }
            }
        };
        let r = surface.curve.root(c(mu)).re;
        let q = q_poly.eval(mu);
        let s = if r == 0.0 || q * r >= 0.0 { 1 } else { -1 };
        mus.push(mu);
        sigmas.push(s);
    }
    Ok(site_from_divisor(surface, mus, sigmas))
}

impl BackgroundOperator {
    /// Builds coefficients `a(n), b(n)` for `n` in `[lo, hi]`.
    pub fn new(surface: Arc<SurfaceData>, dirichlet: DirichletData, lo: i64, hi: i64) -> Result<Self> {
        dirichlet.validate(&surface)?;
        if lo > 0 || hi < 0 {
            return Err(Error::InvalidPerturbation("background window must contain 0".into()));
        }
        let r_poly = disc_poly(&surface);
        let origin = site_from_divisor(&surface, dirichlet.mus.clone(), dirichlet.sigmas.clone());
        let lead = |q: &Poly| {
            let d = q.mul(q).add(&r_poly.scale(-1.0));
            (d.clone(), 0.25 * d.coeff(2 * surface.genus()))
        };

        let mut forward = vec![origin.clone()];
        let mut a_fwd = Vec::new();
        for n in 0..=hi {
            let cur = forward.last().unwrap();
            let (d, a2) = lead(&cur.q_poly);
            if !(a2 > 0.0) {
                return Err(Error::NonPositiveCoefficient(n));
            }
            a_fwd.push(a2.sqrt());
            let g_next = d.div_monic(&cur.g_poly).scale(0.25 / a2);
            let g_next = Poly(g_next.0[..=surface.genus()].to_vec());
            let b_next = 0.5 * surface.curve.edges().iter().sum::<f64>() - {
                let g = surface.genus();
                if g == 0 {
                    0.0
                } else {
                    -g_next.coeff(g - 1)
                }
            };
            let q_raw = Poly(vec![-b_next, 1.0]).mul(&g_next).scale(2.0).add(&cur.q_poly.scale(-1.0));
            let next = project(&surface, &g_next, &q_raw, n + 1)?;
            forward.push(next);
        }

        let mut backward: Vec<SiteState> = Vec::new();
        let mut a_bwd = Vec::new();
        for n in (lo..0).rev() {
            let cur = backward.last().unwrap_or(&origin);
            let q_prev = Poly(vec![-cur.b, 1.0]).mul(&cur.g_poly).scale(2.0).add(&cur.q_poly.scale(-1.0));
            let (d, a2) = lead(&q_prev);
            if !(a2 > 0.0) {
                return Err(Error::NonPositiveCoefficient(n));
            }
            a_bwd.push(a2.sqrt());
            let g_prev = d.div_monic(&cur.g_poly).scale(0.25 / a2);
            let g_prev = Poly(g_prev.0[..=surface.genus()].to_vec());
            let prev = project(&surface, &g_prev, &q_prev, n)?;
            backward.push(prev);
        }

        let mut sites: Vec<SiteState> = backward.into_iter().rev().collect();
        let mut a: Vec<f64> = a_bwd.into_iter().rev().collect();
        sites.extend(forward);
        a.extend(a_fwd);
        let mut op = BackgroundOperator {
            surface,
            dirichlet,
            lo,
            hi,
            a,
            sites,
            theta_discrepancy: 0.0,
        };
        op.theta_discrepancy = op.theta_cross_check()?;
        if op.theta_discrepancy > 1e-6 {
            return Err(Error::QuadratureNotConverged(format!(
                "theta and recursion coefficients disagree by {:.3e}",
                op.theta_discrepancy
            )));
        }
        Ok(op)
    }

    pub fn window(&self) -> (i64, i64) {
        (self.lo, self.hi)
    }

    fn site(&self, n: i64) -> Result<&SiteState> {
        if n < self.lo || n > self.hi + 1 {
            return Err(Error::OutOfWindow(n));
        }
        Ok(&self.sites[(n - self.lo) as usize])
    }

    pub fn a(&self, n: i64) -> Result<f64> {
        if n < self.lo || n > self.hi {
            return Err(Error::OutOfWindow(n));
        }
        Ok(self.a[(n - self.lo) as usize])
    }

    pub fn b(&self, n: i64) -> Result<f64> {
        if n < self.lo || n > self.hi {
            return Err(Error::OutOfWindow(n));
        }
        Ok(self.site(n)?.b)
    }

    /// Dirichlet eigenvalues and signs at site `n`.
    pub fn divisor(&self, n: i64) -> Result<(Vec<f64>, Vec<i8>)> {
        let s = self.site(n)?;
        Ok((s.mus.clone(), s.sigmas.clone()))
    }

    /// `phi_{q,sign}(z, n) = psi(z, n + 1) / psi(z, n)`.
    pub fn phi(&self, p: SpectralPoint, n: i64, sign: f64) -> Result<Complex64> {
        let s = self.site(n)?;
        let next = self.site(n + 1)?;
        let a = self.a(n)?;
        let q = s.q_poly.eval_c(p.z);
        let plus = q + p.root * sign;
        let minus = q - p.root * sign;
        if plus.norm() >= minus.norm() {
            Ok(plus / (2.0 * a * s.g_poly.eval_c(p.z)))
        } else {
            Ok(2.0 * a * next.g_poly.eval_c(p.z) / minus)
        }
    }

    /// Baker-Akhiezer function `psi_{q,sign}(z, n)` normalised by `psi(z, 0) = 1`.
    pub fn psi(&self, p: SpectralPoint, n: i64, sign: f64) -> Result<Complex64> {
        let mut v = c(1.0);
        if n >= 0 {
            for j in 0..n {
                v *= self.phi(p, j, sign)?;
            }
        } else {
            for j in n..0 {
                v /= self.phi(p, j, sign)?;
            }
        }
        Ok(v)
    }

    /// Values of `psi_{q,sign}(z, n)` for all `n` in `[from, to]`.
    pub fn psi_range(&self, p: SpectralPoint, from: i64, to: i64, sign: f64) -> Result<Vec<Complex64>> {
        let mut out = vec![c(0.0); (to - from + 1) as usize];
        let start = from.clamp(0, to.max(0));
        let mut v = self.psi(p, start, sign)?;
        let mut k = start;
        if k >= from && k <= to {
            out[(k - from) as usize] = v;
        }
        while k < to {
            v *= self.phi(p, k, sign)?;
            k += 1;
            if k >= from {
                out[(k - from) as usize] = v;
            }
        }
        let mut v = self.psi(p, start, sign)?;
        let mut k = start;
        while k > from {
            v /= self.phi(p, k - 1, sign)?;
            k -= 1;
            if k <= to {
                out[(k - from) as usize] = v;
            }
        }
        Ok(out)
    }

    /// `prod_{mu_j in M_sign} (z - mu_j)`, the poles of `psi_{q,sign}` cleared.
    pub fn pole_factor(&self, z: Complex64, sign: f64) -> Complex64 {
        let sg = if sign > 0.0 { 1 } else { -1 };
        self.dirichlet
            .mus
            .iter()
            .zip(&self.dirichlet.sigmas)
            .filter(|(_, &s)| s == sg)
            .fold(c(1.0), |acc, (&m, _)| acc * (z - m))
    }

    /// Regularised Baker-Akhiezer function `pole_factor * psi_{q,sign}` over `[from, to]`.
    pub fn psi_hat_range(
        &self,
        p: SpectralPoint,
        from: i64,
        to: i64,
        sign: f64,
    ) -> Result<Vec<Complex64>> {
        let sg = if sign > 0.0 { 1 } else { -1 };
        let origin = self.site(0)?;
        let own: Vec<f64> = origin.mus.iter().zip(&origin.sigmas).filter(|(_, &s)| s == sg).map(|(&m, _)| m).collect();
        let other: Vec<f64> = origin.mus.iter().zip(&origin.sigmas).filter(|(_, &s)| s != sg).map(|(&m, _)| m).collect();
        let own_f = Poly::monic_from_roots(&own).eval_c(p.z);
        let other_f = Poly::monic_from_roots(&other).eval_c(p.z);

        let forward_first = |n: i64| -> Result<Complex64> {
            let s = self.site(n)?;
            let a = self.a(n)?;
            let q = s.q_poly.eval_c(p.z);
            let plus = q + p.root * sign;
            let minus = q - p.root * sign;
            if plus.norm() >= minus.norm() {
                Ok(plus / (2.0 * a * other_f))
            } else {
                Ok(own_f * 2.0 * a * self.site(n + 1)?.g_poly.eval_c(p.z) / minus)
            }
        };
        let backward_first = || -> Result<Complex64> {
            let s = self.site(-1)?;
            let a = self.a(-1)?;
            let q = s.q_poly.eval_c(p.z);
            let minus = q - p.root * sign;
            let plus = q + p.root * sign;
            if minus.norm() >= plus.norm() {
                Ok(minus / (2.0 * a * other_f))
            } else {
                Ok(own_f * 2.0 * a * s.g_poly.eval_c(p.z) / plus)
            }
        };

        let mut out = vec![c(0.0); (to - from + 1) as usize];
        let mut put = |k: i64, v: Complex64| {
            if k >= from && k <= to {
                out[(k - from) as usize] = v;
            }
        };
        put(0, own_f);
        if to >= 1 {
            let mut v = forward_first(0)?;
            put(1, v);
            for k in 1..to {
                v *= self.phi(p, k, sign)?;
                put(k + 1, v);
            }
        }
        if from <= -1 {
            let mut v = backward_first()?;
            put(-1, v);
            for k in (from..-1).rev() {
                v /= self.phi(p, k, sign)?;
                put(k, v);
            }
        }
        Ok(out)
    }

    /// Solution of the background recurrence with `s(0) = 0`, `s(1) = 1`.
    pub fn s_q(&self, z: Complex64, n: i64) -> Result<Complex64> {
        let (mut prev, mut cur) = (c(0.0), c(1.0));
        if n == 0 {
            return Ok(prev);
        }
        if n > 0 {
            for k in 1..n {
                let next = ((z - self.b(k)?) * cur - self.a(k - 1)? * prev) / self.a(k)?;
                prev = cur;
                cur = next;
            }
            return Ok(cur);
        }
        let (mut up, mut here) = (c(1.0), c(0.0));
        for k in (n + 1..=0).rev() {
            let below = ((z - self.b(k)?) * here - self.a(k)? * up) / self.a(k - 1)?;
            up = here;
            here = below;
        }
        Ok(here)
    }

    /// Phase `z(n)` of the theta representation.
    fn theta_argument(&self, n: i64) -> Vec<Complex64> {
        let s = &self.surface;
        let g = s.genus();
        let ainf = s.abel_infinity();
        let apm = s.abel_infinity_pair();
        let xi = s.riemann_constant();
        let mut z = ainf.clone();
        for j in 0..g {
            let sheet = Sheet::from_sign(self.dirichlet.sigmas[j] as f64);
            let am = s.abel_gap_point(j + 1, self.dirichlet.mus[j], sheet);
            for k in 0..g {
                z[k] -= am[k];
            }
        }
        for k in 0..g {
            z[k] += -(n as f64) * apm[k] - xi[k];
        }
        z
    }

    /// Coefficients from the theta representation at site `n`.
    pub fn theta_coefficients(&self, n: i64) -> Result<(f64, f64)> {
        let s = &self.surface;
        let g = s.genus();
        if g == 0 {
            return Ok((s.atilde, s.btilde));
        }
        let eval = |m: i64| -> Result<(Complex64, Vec<Complex64>)> {
            let (t, grad) = s.theta_with_gradient(&self.theta_argument(m));
            if t.norm() < 1e-13 {
                return Err(Error::ThetaZero);
            }
            Ok((t, grad))
        };
        let (t_prev, g_prev) = eval(n - 1)?;
        let (t_cur, g_cur) = eval(n)?;
        let (t_next, _) = eval(n + 1)?;
        let a2 = s.atilde * s.atilde * (t_next * t_prev / (t_cur * t_cur));
        let mut b = c(s.btilde);
        for j in 0..g {
            let dir = s.cinv[(j, g - 1)];
            b += dir * (g_cur[j] / t_cur - g_prev[j] / t_prev);
        }
        Ok((a2.re.sqrt(), b.re))
    }

    fn theta_cross_check(&self) -> Result<f64> {
        let mut worst = 0.0f64;
        for n in [-2i64, -1, 0, 1, 2] {
            if n - 1 < self.lo || n + 1 > self.hi {
                continue;
            }
            let (ta, tb) = self.theta_coefficients(n)?;
            worst = worst.max((ta - self.a(n)?).abs()).max((tb - self.b(n)?).abs());
        }
        Ok(worst)
    }

    /// Where a real point sits relative to the background spectrum.
    pub fn locate(&self, x: f64) -> Location {
        self.surface.curve.locate(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn period_two(sigma: i8) -> BackgroundOperator {
        let s = Arc::new(SurfaceData::from_edges(&[-1.3, -0.3, 0.3, 1.3]).unwrap());
        BackgroundOperator::new(s, DirichletData { mus: vec![0.0], sigmas: vec![sigma] }, -10, 10).unwrap()
    }

    #[test]
    fn period_two_coefficients() {
        for (sigma, a0, a1) in [(1, 0.8, 0.5), (-1, 0.5, 0.8)] {
            let op = period_two(sigma);
            for n in -10..=10 {
                let expect = if n % 2 == 0 { a0 } else { a1 };
                assert!((op.a(n).unwrap() - expect).abs() < 1e-12, "sigma {sigma} n {n}");
                assert!(op.b(n).unwrap().abs() < 1e-12);
            }
            assert!(op.theta_discrepancy < 1e-9);
        }
    }

    #[test]
    fn genus_two_matches_theta_formulas() {
        let s = Arc::new(SurfaceData::from_edges(&[-2.0, -1.5, -0.5, 0.0, 0.8, 2.0]).unwrap());
        for sigmas in [vec![1, -1], vec![-1, 1], vec![1, 1]] {
            let op = BackgroundOperator::new(s.clone(), DirichletData { mus: vec![-1.0, 0.4], sigmas }, -6, 6).unwrap();
            assert!(op.theta_discrepancy < 1e-9, "{}", op.theta_discrepancy);
        }
        let s3 = Arc::new(SurfaceData::from_edges(&[-2.0, -1.5, -0.5, 0.0, 0.8, 2.0, 2.5, 3.0]).unwrap());
        let op = BackgroundOperator::new(s3, DirichletData { mus: vec![-1.0, 0.4, 2.2], sigmas: vec![-1, 1, 1] }, -4, 4).unwrap();
        assert!(op.theta_discrepancy < 1e-9, "{}", op.theta_discrepancy);
    }

    #[test]
    fn free_background() {
        let s = Arc::new(SurfaceData::from_edges(&[-1.0, 1.0]).unwrap());
        let op = BackgroundOperator::new(s.clone(), DirichletData { mus: vec![], sigmas: vec![] }, -5, 5).unwrap();
        let z = Complex64::new(0.3, 0.4);
        let p = SpectralPoint::upper(&s.curve, z);
        let w = s.quasimomentum(z);
        for n in -5..=5 {
            assert!((op.psi(p, n, 1.0).unwrap() - (-w).powi(n as i32)).norm() < 1e-12);
            assert!((op.psi(p, n, -1.0).unwrap() - (-w).powi(-n as i32)).norm() < 1e-11);
        }
    }

    #[test]
    fn baker_akhiezer_solves_recurrence() {
        let s = Arc::new(SurfaceData::from_edges(&[-2.0, -1.0, 0.5, 2.0]).unwrap());
        let op = BackgroundOperator::new(s.clone(), DirichletData { mus: vec![-0.3], sigmas: vec![1] }, -20, 20).unwrap();
        for z in [Complex64::new(0.2, 0.3), Complex64::new(-1.5, 0.0)] {
            let p = SpectralPoint::upper(&s.curve, z);
            for sign in [1.0, -1.0] {
                let psi = op.psi_range(p, -19, 19, sign).unwrap();
                for n in -18..=18 {
                    let i = (n + 19) as usize;
                    let lhs = op.a(n).unwrap() * psi[i + 1] + op.a(n - 1).unwrap() * psi[i - 1] + op.b(n).unwrap() * psi[i];
                    assert!((lhs - z * psi[i]).norm() < 1e-10 * (1.0 + psi[i].norm()));
                }
            }
        }
    }

    #[test]
    fn wronskian_of_baker_akhiezer_pair() {
        let s = Arc::new(SurfaceData::from_edges(&[-2.0, -1.0, 0.5, 2.0]).unwrap());
        let op = BackgroundOperator::new(s.clone(), DirichletData { mus: vec![-0.3], sigmas: vec![-1] }, -5, 5).unwrap();
        let z = Complex64::new(0.7, 0.2);
        let p = SpectralPoint::upper(&s.curve, z);
        for n in -3..3 {
            let pm = op.psi_range(p, n, n + 1, -1.0).unwrap();
            let pp = op.psi_range(p, n, n + 1, 1.0).unwrap();
            let w = op.a(n).unwrap() * (pm[0] * pp[1] - pm[1] * pp[0]);
            let expect = p.root / (z + 0.3);
            assert!((w - expect).norm() < 1e-11, "{w} vs {expect}");
        }
    }

    #[test]
    fn psi_hat_clears_pole() {
        let s = Arc::new(SurfaceData::from_edges(&[-2.0, -1.0, 0.5, 2.0]).unwrap());
        let op = BackgroundOperator::new(s.clone(), DirichletData { mus: vec![-0.3], sigmas: vec![1] }, -5, 5).unwrap();
        let p = SpectralPoint::upper(&s.curve, c(-0.3000001));
        let hat = op.psi_hat_range(p, -3, 3, 1.0).unwrap();
        let raw = op.psi_range(p, -3, 3, 1.0).unwrap();
        for k in 0..7 {
            let expect = raw[k] * op.pole_factor(p.z, 1.0);
            assert!((hat[k] - expect).norm() < 1e-6 * expect.norm().max(1.0));
        }
    }
}
