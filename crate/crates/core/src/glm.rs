//! Gel'fand-Levitan-Marchenko equation: kernel assembly from scattering data,
//! positivity, solution for the transformation kernel and reconstruction of the
//! perturbed coefficients.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::background::BackgroundOperator;
use crate::error::{Error, Result};
use crate::scattering::ScatteringData;
use crate::surface::SpectralPoint;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// `F_{sign}(l, m)` on the index square `[lo, hi]^2`.
#[derive(Debug, Clone)]
pub struct GlmKernel {
    pub sign: f64,
    pub lo: i64,
    pub hi: i64,
    /// Reflection part, symmetrised.
    pub reflection: DMatrix<f64>,
    /// Eigenvalue part.
    pub bound: DMatrix<f64>,
    /// Largest imaginary part of the reflection quadrature.
    pub imaginary_residual: f64,
    /// Largest `|F(l, m) - F(m, l)|` before symmetrisation.
    pub asymmetry: f64,
}

impl GlmKernel {
    fn idx(&self, l: i64) -> Option<usize> {
        (l >= self.lo && l <= self.hi).then(|| (l - self.lo) as usize)
    }

    /// `F(l, m)`.
    pub fn get(&self, l: i64, m: i64) -> Option<f64> {
        let (i, j) = (self.idx(l)?, self.idx(m)?);
        Some(self.reflection[(i, j)] + self.bound[(i, j)])
    }

    /// Largest depth usable at `n`.
    pub fn max_depth(&self, n: i64) -> usize {
        if self.sign > 0.0 {
            (self.hi - n).max(0) as usize
        } else {
            (n - self.lo).max(0) as usize
        }
    }

    /// Truncated `1 + F_n` of size `depth + 1`; with `reflection_only` the eigenvalue part is dropped.
    pub fn operator_at(&self, n: i64, depth: usize, reflection_only: bool) -> Result<DMatrix<f64>> {
        if depth > self.max_depth(n) || self.idx(n).is_none() {
            return Err(Error::OutOfWindow(n));
        }
        let s = self.sign as i64;
        Ok(DMatrix::from_fn(depth + 1, depth + 1, |j, k| {
            let l = self.idx(n + s * j as i64).unwrap();
            let m = self.idx(n + s * k as i64).unwrap();
            let b = if reflection_only { 0.0 } else { self.bound[(l, m)] };
            (if j == k { 1.0 } else { 0.0 }) + self.reflection[(l, m)] + b
        }))
    }

    /// Smallest eigenvalue of the truncated `1 + F_n`.
    pub fn smallest_eigenvalue(&self, n: i64, depth: usize) -> Result<f64> {
        Ok(self.operator_at(n, depth, false)?.symmetric_eigenvalues().min())
    }
}

/// Background Baker-Akhiezer values at a node of the scattering data.
fn node_point(bg: &BackgroundOperator, lambda: f64, side: f64) -> SpectralPoint {
    SpectralPoint::on_band(&bg.surface.curve, lambda, side)
}

/// Assembles `F_{sign}` on `[lo, hi]^2` from scattering data.
pub fn assemble(data: &ScatteringData, bg: &BackgroundOperator, sign: f64, lo: i64, hi: i64) -> Result<GlmKernel> {
    let (wlo, whi) = bg.window();
    if lo < wlo || hi > whi || lo > hi {
        return Err(Error::OutOfWindow(if lo < wlo { lo } else { hi }));
    }
    let n = (hi - lo + 1) as usize;
    let mut acc = vec![c(0.0); n * n];
    for node in &data.nodes {
        let p = node_point(bg, node.lambda, node.side);
        let psi = bg.psi_range(p, lo, hi, sign)?;
        let r = if sign > 0.0 { node.r_plus } else { node.r_minus } * node.weight;
        for i in 0..n {
            let ri = r * psi[i];
            for j in 0..n {
                acc[i * n + j] += ri * psi[j];
            }
        }
    }
    let mut reflection = DMatrix::<f64>::zeros(n, n);
    let mut imag = 0.0f64;
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let v = acc[i * n + j];
            imag = imag.max(v.im.abs());
            asym = asym.max((v - acc[j * n + i]).norm());
            reflection[(i, j)] = 0.5 * (v.re + acc[j * n + i].re);
        }
    }
    let mut bound = DMatrix::<f64>::zeros(n, n);
    for b in &data.bound_states {
        let p = SpectralPoint::upper(&bg.surface.curve, c(b.rho));
        let psi = bg.psi_hat_range(p, lo, hi, sign)?;
        let g = if sign > 0.0 { b.gamma_plus } else { b.gamma_minus };
        let v = DVector::from_iterator(n, psi.iter().map(|z| z.re));
        bound += g * &v * v.transpose();
    }
    Ok(GlmKernel { sign, lo, hi, reflection, bound, imaginary_residual: imag, asymmetry: asym })
}

/// Transformation kernel obtained from the GLM equation.
#[derive(Debug, Clone)]
pub struct GlmSolution {
    pub sign: f64,
    pub n_lo: i64,
    pub n_hi: i64,
    /// Rows `K(n, n + sign * j)` for `j = 0..=depths[n]`.
    pub rows: Vec<Vec<f64>>,
    pub depths: Vec<usize>,
    pub smallest_eigenvalues: Vec<f64>,
}

impl GlmSolution {
    /// `K(n, m)`, zero beyond the solved depth on the `sign` side.
    pub fn get(&self, n: i64, m: i64) -> Option<f64> {
        if n < self.n_lo || n > self.n_hi {
            return None;
        }
        let row = &self.rows[(n - self.n_lo) as usize];
        let j = (m - n) * self.sign as i64;
        if j < 0 {
            return Some(0.0);
        }
        Some(row.get(j as usize).copied().unwrap_or(0.0))
    }

    pub fn diagonal(&self, n: i64) -> Option<f64> {
        self.get(n, n)
    }

    /// `max |K(n, m) + sum_l K(n, l) F(l, m) - delta(n, m) / K(n, n)|` over the solved rows.
    pub fn residual(&self, kernel: &GlmKernel) -> f64 {
        let s = self.sign as i64;
        let mut worst = 0.0f64;
        for (i, row) in self.rows.iter().enumerate() {
            let n = self.n_lo + i as i64;
            for k in 0..row.len() {
                let m = n + s * k as i64;
                let mut v = row[k];
                for (j, &kl) in row.iter().enumerate() {
                    v += kl * kernel.get(n + s * j as i64, m).unwrap_or(0.0);
                }
                if k == 0 {
                    v -= 1.0 / row[0];
                }
                worst = worst.max(v.abs());
            }
        }
        worst
    }
}

/// Depth needed at `n` for data whose perturbation ends at `edge` on the `sign` side.
pub fn natural_depth(n: i64, edge: i64, sign: f64) -> usize {
    let d = if sign > 0.0 { edge - n } else { n - edge };
    (2 * d + 4).max(4) as usize
}

/// Solves `(1 + F_n) K(n, n + sign .) = delta_0 / K(n, n)` for `n` in `[n_lo, n_hi]`.
pub fn solve(kernel: &GlmKernel, n_lo: i64, n_hi: i64, depth: impl Fn(i64) -> usize) -> Result<GlmSolution> {
    let mut rows = Vec::new();
    let mut depths = Vec::new();
    let mut mins = Vec::new();
    for n in n_lo..=n_hi {
        let d = depth(n).min(kernel.max_depth(n));
        let m = kernel.operator_at(n, d, false)?;
        let lmin = m.clone().symmetric_eigenvalues().min();
        mins.push(lmin);
        if !(lmin > 0.0) {
            return Err(Error::KernelNotPositive(lmin));
        }
        let chol = m.cholesky().ok_or(Error::CholeskyFailed(n))?;
        let mut e0 = DVector::<f64>::zeros(d + 1);
        e0[0] = 1.0;
        let x = chol.solve(&e0);
        if !(x[0] > 0.0) {
            return Err(Error::NonPositiveDiagonal(n));
        }
        let knn = x[0].sqrt();
        rows.push(x.iter().map(|v| v / knn).collect());
        depths.push(d);
    }
    Ok(GlmSolution { sign: kernel.sign, n_lo, n_hi, rows, depths, smallest_eigenvalues: mins })
}

/// Coefficients rebuilt from one side.
#[derive(Debug, Clone, Serialize)]
pub struct OneSided {
    pub n_lo: i64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

/// Rebuilds `a(n), b(n)` for `n` in `[n_lo, n_hi]`; the solution must cover `[n_lo - 1, n_hi + 1]`.
pub fn reconstruct_side(sol: &GlmSolution, bg: &BackgroundOperator, n_lo: i64, n_hi: i64) -> Result<OneSided> {
    let k = |n: i64, m: i64| sol.get(n, m).ok_or(Error::OutOfWindow(n));
    let mut a = Vec::new();
    let mut b = Vec::new();
    for n in n_lo..=n_hi {
        let (aq, aqm, bq) = (bg.a(n)?, bg.a(n - 1)?, bg.b(n)?);
        if sol.sign > 0.0 {
            a.push(aq * k(n + 1, n + 1)? / k(n, n)?);
            b.push(bq + aq * k(n, n + 1)? / k(n, n)? - aqm * k(n - 1, n)? / k(n - 1, n - 1)?);
        } else {
            a.push(aq * k(n, n)? / k(n + 1, n + 1)?);
            b.push(bq + aqm * k(n, n - 1)? / k(n, n)? - aq * k(n + 1, n)? / k(n + 1, n + 1)?);
        }
    }
    Ok(OneSided { n_lo, a, b })
}

/// Options for [`reconstruct`].
#[derive(Debug, Clone, Copy)]
pub struct GlmOptions {
    /// Upper limit on the truncation depth.
    pub max_depth: usize,
    /// Allowed `|a_+ - a_-|`, `|b_+ - b_-|`.
    pub tolerance: f64,
}

impl Default for GlmOptions {
    fn default() -> Self {
        GlmOptions { max_depth: 400, tolerance: 1e-6 }
    }
}

/// Both one-sided reconstructions with diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct ReconstructionResult {
    pub n_lo: i64,
    pub n_hi: i64,
    pub a_q: Vec<f64>,
    pub b_q: Vec<f64>,
    pub plus: OneSided,
    pub minus: OneSided,
    /// `a_+` for `n >= split`, `a_-` below; each side is best conditioned on its own half line.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub split: i64,
    /// `max |a_+ - a_-|, |b_+ - b_-|`.
    pub consistency: f64,
    pub glm_residual_plus: f64,
    pub glm_residual_minus: f64,
    pub smallest_eigenvalue: f64,
    pub smallest_eigenvalues_plus: Vec<f64>,
    pub smallest_eigenvalues_minus: Vec<f64>,
    pub max_depth_used: usize,
    pub imaginary_residual: f64,
    /// `sum |n| (|a_+(n) - a_q(n)| + |b_+(n) - b_q(n)|)` over the window.
    pub weighted_deviation: f64,
}

/// First index, counted from the far side of the kernel, after which `F` stays below
/// `threshold` (relative to its largest diagonal entry) on six consecutive diagonals.
pub fn support_edge(kernel: &GlmKernel, threshold: f64) -> i64 {
    let n = (kernel.hi - kernel.lo + 1) as usize;
    let f = |i: usize, j: usize| (kernel.reflection[(i, j)] + kernel.bound[(i, j)]).abs();
    let scale = (0..n).map(|i| f(i, i)).fold(1.0, f64::max);
    let small = |i: usize| f(i, i) < threshold * scale && (i + 1 >= n || f(i, i + 1) < threshold * scale);
    let run = 6;
    if kernel.sign > 0.0 {
        for i in 0..n.saturating_sub(run) {
            if (i..i + run).all(small) {
                return kernel.lo + i as i64 - 1;
            }
        }
        kernel.hi
    } else {
        for i in (run..n).rev() {
            if (i + 1 - run..=i).all(|k| f(k, k) < threshold * scale && (k == 0 || f(k, k - 1) < threshold * scale)) {
                return kernel.lo + i as i64 + 1;
            }
        }
        kernel.lo
    }
}

/// Runs the inverse problem on `[n_lo, n_hi]` from both sides.
pub fn reconstruct(data: &ScatteringData, bg: &BackgroundOperator, n_lo: i64, n_hi: i64, opts: GlmOptions) -> Result<ReconstructionResult> {
    let (wlo, whi) = bg.window();
    let mut sides = Vec::new();
    let mut edges = Vec::new();
    let mut imag = 0.0f64;
    let mut depth_used = 0;
    for sign in [1.0, -1.0] {
        let (klo, khi) = if sign > 0.0 {
            (n_lo - 1, (n_hi + 1 + opts.max_depth as i64).min(whi))
        } else {
            ((n_lo - 1 - opts.max_depth as i64).max(wlo), n_hi + 1)
        };
        let kernel = assemble(data, bg, sign, klo, khi)?;
        imag = imag.max(kernel.imaginary_residual);
        let edge = support_edge(&kernel, 1e-12);
        edges.push(edge);
        let sol = solve(&kernel, n_lo - 1, n_hi + 1, |n| natural_depth(n, edge, sign).min(opts.max_depth))?;
        depth_used = depth_used.max(*sol.depths.iter().max().unwrap_or(&0));
        let res = sol.residual(&kernel);
        let rec = reconstruct_side(&sol, bg, n_lo, n_hi)?;
        sides.push((rec, res, sol.smallest_eigenvalues.clone()));
    }
    let (minus, res_m, eig_m) = sides.pop().unwrap();
    let (plus, res_p, eig_p) = sides.pop().unwrap();
    let a_q: Vec<f64> = (n_lo..=n_hi).map(|n| bg.a(n)).collect::<Result<_>>()?;
    let b_q: Vec<f64> = (n_lo..=n_hi).map(|n| bg.b(n)).collect::<Result<_>>()?;
    let mut cons = 0.0f64;
    let mut dev = 0.0;
    for i in 0..a_q.len() {
        cons = cons.max((plus.a[i] - minus.a[i]).abs()).max((plus.b[i] - minus.b[i]).abs());
        let n = (n_lo + i as i64).abs() as f64;
        dev += n * ((plus.a[i] - a_q[i]).abs() + (plus.b[i] - b_q[i]).abs());
    }
    let split = (edges[0] + edges[1]).div_euclid(2);
    let pick = |n: i64, p: f64, m: f64| if n >= split { p } else { m };
    let a = (0..a_q.len()).map(|i| pick(n_lo + i as i64, plus.a[i], minus.a[i])).collect();
    let b = (0..a_q.len()).map(|i| pick(n_lo + i as i64, plus.b[i], minus.b[i])).collect();
    let smallest = eig_p.iter().chain(&eig_m).copied().fold(f64::INFINITY, f64::min);
    Ok(ReconstructionResult {
        n_lo,
        n_hi,
        a_q,
        b_q,
        plus,
        minus,
        a,
        b,
        split,
        consistency: cons,
        glm_residual_plus: res_p,
        glm_residual_minus: res_m,
        smallest_eigenvalue: smallest,
        smallest_eigenvalues_plus: eig_p,
        smallest_eigenvalues_minus: eig_m,
        max_depth_used: depth_used,
        imaginary_residual: imag,
        weighted_deviation: dev,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::background::DirichletData;
    use crate::jost::{Perturbation, PerturbedOperator};
    use crate::scattering::scattering_data;
    use crate::surface::SurfaceData;

    fn operator(edges: &[f64], mus: Vec<f64>, sigmas: Vec<i8>, pert: Perturbation) -> PerturbedOperator {
        let s = Arc::new(SurfaceData::from_edges(edges).unwrap());
        let bg = BackgroundOperator::new(s, DirichletData { mus, sigmas }, -120, 120).unwrap();
        PerturbedOperator::new(Arc::new(bg), pert).unwrap()
    }

    #[test]
    fn reflectionless_free_data_give_trivial_kernel() {
        let op = operator(&[-1.0, 1.0], vec![], vec![], Perturbation::zero());
        let data = scattering_data(&op, 32).unwrap();
        let k = assemble(&data, &op.background, 1.0, -5, 5).unwrap();
        assert!(k.reflection.amax() < 1e-14 && k.bound.amax() == 0.0);
        let sol = solve(&k, -5, 0, |_| 4).unwrap();
        for n in -5..=0 {
            assert!((sol.get(n, n).unwrap() - 1.0).abs() < 1e-14);
            assert!(sol.get(n, n + 1).unwrap().abs() < 1e-14);
        }
    }

    #[test]
    fn single_site_round_trip() {
        let op = operator(&[-1.0, 1.0], vec![], vec![], Perturbation { start: 0, da: vec![0.0], db: vec![1.0] });
        let data = scattering_data(&op, 128).unwrap();
        let rec = reconstruct(&data, &op.background, -8, 8, GlmOptions::default()).unwrap();
        for i in 0..17 {
            let n = -8 + i as i64;
            assert!((rec.a[i] - op.a(n).unwrap()).abs() < 1e-12, "a({n}) {}", rec.a[i]);
            assert!((rec.b[i] - op.b(n).unwrap()).abs() < 1e-12, "b({n}) {}", rec.b[i]);
        }
        assert!(rec.consistency < 1e-7);
        assert!(rec.glm_residual_plus < 1e-8 && rec.glm_residual_minus < 1e-8, "{} {}", rec.glm_residual_plus, rec.glm_residual_minus);
    }

    #[test]
    fn genus_one_round_trip_and_kernel_agreement() {
        let op = operator(
            &[-1.3, -0.3, 0.3, 1.3],
            vec![0.0],
            vec![1],
            Perturbation { start: 0, da: vec![0.0, 0.2], db: vec![0.3, 0.0] },
        );
        let data = scattering_data(&op, 64).unwrap();
        let rec = reconstruct(&data, &op.background, -8, 8, GlmOptions::default()).unwrap();
        for i in 0..17 {
            let n = -8 + i as i64;
            for side in [&rec.plus, &rec.minus] {
                assert!((side.a[i] - op.a(n).unwrap()).abs() < 1e-8, "a({n}) {}", side.a[i]);
                assert!((side.b[i] - op.b(n).unwrap()).abs() < 1e-8, "b({n}) {}", side.b[i]);
            }
        }
        let kernel = assemble(&data, &op.background, 1.0, -4, 40).unwrap();
        let sol = solve(&kernel, -4, 4, |n| natural_depth(n, 2, 1.0)).unwrap();
        let grid = op.background.surface.circle_grid(&data.dirichlet.mus, 64);
        let quad = op.kernel(&grid, -4, 4, 8, 1.0).unwrap();
        for n in -4..=4 {
            for m in n..=n + 8 {
                let a = sol.get(n, m).unwrap();
                let b = quad.get(n, m).unwrap();
                assert!((a - b).abs() < 1e-8, "K({n},{m}) {a} vs {b}");
            }
        }
    }

    #[test]
    fn negated_norming_constant_breaks_positivity() {
        let op = operator(&[-1.0, 1.0], vec![], vec![], Perturbation { start: 0, da: vec![0.0], db: vec![1.0] });
        let mut data = scattering_data(&op, 64).unwrap();
        let good = assemble(&data, &op.background, 1.0, -6, 20).unwrap();
        data.bound_states[0].gamma_plus *= -1.0;
        let bad = assemble(&data, &op.background, 1.0, -6, 20).unwrap();
        assert!(good.smallest_eigenvalue(0, 8).unwrap() > 0.0);
        assert!(bad.smallest_eigenvalue(0, 8).unwrap() < 1.0);
    }
}
