//! Admissibility checks for scattering data.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use super::{PoissonJensen, ScatteringData};
use crate::background::BackgroundOperator;
use crate::error::Result;
use crate::glm::assemble;
use crate::surface::Location;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ClauseStatus {
    Pass,
    Fail,
    Skipped,
}

/// Outcome of one admissibility condition.
#[derive(Debug, Clone, Serialize)]
pub struct Clause {
    pub name: &'static str,
    pub status: ClauseStatus,
    pub metrics: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl Clause {
    fn new(name: &'static str) -> Self {
        Clause { name, status: ClauseStatus::Pass, metrics: BTreeMap::new(), notes: Vec::new() }
    }

    fn metric(&mut self, key: &str, v: f64) {
        self.metrics.insert(key.to_string(), v);
    }

    fn fail(&mut self, note: String) {
        self.status = ClauseStatus::Fail;
        self.notes.push(note);
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub clauses: Vec<Clause>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.clauses.iter().all(|c| c.status != ClauseStatus::Fail)
    }

    pub fn status(&self, name: &str) -> Option<ClauseStatus> {
        self.clauses.iter().find(|c| c.name == name).map(|c| c.status)
    }
}

/// Tolerances used by [`validate`].
#[derive(Debug, Clone, Copy)]
pub struct ValidateOptions {
    /// Conjugation symmetry and consistency identity.
    pub identity_tol: f64,
    /// Relative error of the norming-constant product.
    pub residue_tol: f64,
    /// Imaginary part of `T` on the gaps relative to `|T|`.
    pub single_valued_tol: f64,
    /// Upper limit for the half-line length used in the Fourier-coefficient sums.
    /// The length actually used is also capped by the quadrature resolution.
    pub summation_window: i64,
    /// Largest allowed ratio of successive tail increments of those sums.
    pub summation_ratio: f64,
    /// Shortest half-line on which the sums are assessed.
    pub min_summation_window: i64,
    /// Tail increments below this fraction of the sum count as settled.
    pub summation_tol: f64,
    /// Tail increments below this absolute size count as settled.
    pub summation_floor: f64,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        ValidateOptions {
            identity_tol: 1e-8,
            residue_tol: 1e-6,
            single_valued_tol: 1e-6,
            summation_window: 64,
            summation_ratio: 0.5,
            min_summation_window: 32,
            summation_tol: 1e-2,
            summation_floor: 1e-12,
        }
    }
}

/// `sum |n| |F(n, n) - F(n+s, n+s)|` and `sum |n| |a_q(n) F(n, n+1) - a_q(n-1) F(n-1, n)|`
/// over `n` from 0 to `len` on the `sign` side.
fn fourier_sums(data: &ScatteringData, bg: &BackgroundOperator, sign: f64, len: i64) -> Result<(f64, f64)> {
    let (lo, hi) = if sign > 0.0 { (-1, len + 2) } else { (-len - 2, 1) };
    let k = assemble(data, bg, sign, lo, hi)?;
    let f = |l: i64, m: i64| k.reflection[((l - lo) as usize, (m - lo) as usize)];
    let s = sign as i64;
    let (mut d, mut o) = (0.0, 0.0);
    for j in 0..=len {
        let n = s * j;
        d += j as f64 * (f(n, n) - f(n + s, n + s)).abs();
        o += j as f64 * (bg.a(n)? * f(n, n + 1) - bg.a(n - 1)? * f(n - 1, n)).abs();
    }
    Ok((d, o))
}

fn clause_one(data: &ScatteringData, bg: &BackgroundOperator, edges_w: &[Complex64], opts: &ValidateOptions) -> Result<Clause> {
    let mut cl = Clause::new("i");
    let mut sym = 0.0f64;
    let mut rmax = 0.0f64;
    let mut lower = f64::INFINITY;
    for (i, n) in data.nodes.iter().enumerate() {
        let m = &data.nodes[data.mirror(i)];
        sym = sym.max((m.r_plus - n.r_plus.conj()).norm()).max((m.r_minus - n.r_minus.conj()).norm());
        let r = n.r_plus.norm().max(n.r_minus.norm());
        rmax = rmax.max(r);
        let dist: f64 = edges_w
            .iter()
            .map(|&e| {
                let e = if n.side > 0.0 { e } else { e.conj() };
                (n.w - e).norm_sqr()
            })
            .product();
        lower = lower.min((1.0 - r * r) / dist);
    }
    cl.metric("symmetry", sym);
    cl.metric("max_abs_r", rmax);
    cl.metric("lower_bound_constant", lower);
    if !(sym <= opts.identity_tol) {
        cl.fail(format!("R(conj w) differs from conj R(w) by {sym:.3e}"));
    }
    if !(rmax < 1.0) {
        cl.fail(format!("|R| reaches {rmax:.6}"));
    }
    if !(lower > 0.0) {
        cl.fail("1 - |R|^2 admits no positive lower bound".into());
    }
    let w = opts.summation_window.min(data.nodes_per_band as i64 / 2) / 4 * 4;
    cl.metric("summation_window", w as f64);
    if w < opts.min_summation_window {
        cl.notes.push(format!("grid resolves only {w} sites: Fourier sums not assessed"));
        return Ok(cl);
    }
    for (sign, label) in [(1.0, "plus"), (-1.0, "minus")] {
        let s: Vec<(f64, f64)> =
            [w / 4, w / 2, w].iter().map(|&l| fourier_sums(data, bg, sign, l)).collect::<Result<_>>()?;
        cl.metric(&format!("diagonal_sum_{label}"), s[2].0);
        cl.metric(&format!("offdiagonal_sum_{label}"), s[2].1);
        let pairs = [((s[0].0, s[1].0, s[2].0), "diagonal"), ((s[0].1, s[1].1, s[2].1), "off-diagonal")];
        for ((a, b, c), what) in pairs {
            let (first, second) = (b - a, c - b);
            let settled = second.abs() <= opts.summation_tol * c.abs() + opts.summation_floor
                || second.abs() <= opts.summation_ratio * first.abs();
            if !c.is_finite() || !settled {
                cl.fail(format!("{what} Fourier sum on the {label} side does not settle ({a:.3e}, {b:.3e}, {c:.3e})"));
            }
        }
    }
    Ok(cl)
}

fn clause_two(data: &ScatteringData, bg: &BackgroundOperator) -> Clause {
    let mut cl = Clause::new("ii");
    let curve = &bg.surface.curve;
    let mut states = data.bound_states.clone();
    states.sort_by(|a, b| a.rho.partial_cmp(&b.rho).unwrap_or(std::cmp::Ordering::Equal));
    let mut sep = f64::INFINITY;
    for w in states.windows(2) {
        sep = sep.min(w[1].rho - w[0].rho);
    }
    cl.metric("count", states.len() as f64);
    cl.metric("min_separation", sep);
    if !(sep > 0.0) {
        cl.fail("eigenvalues are not distinct".into());
    }
    for b in &states {
        if !b.rho.is_finite() || matches!(curve.locate(b.rho), Location::Band(_)) {
            cl.fail(format!("eigenvalue {} lies in the spectrum", b.rho));
        }
        if !(b.gamma_plus > 0.0 && b.gamma_minus > 0.0) {
            cl.fail(format!("norming constants at {} are not positive", b.rho));
        }
    }
    cl
}

fn clause_three(pj: Option<&PoissonJensen>, genus: usize, opts: &ValidateOptions) -> Result<Clause> {
    let mut cl = Clause::new("iii");
    match pj {
        None => {
            cl.status = ClauseStatus::Skipped;
            cl.notes.push("T cannot be rebuilt because |R| >= 1 somewhere".into());
        }
        Some(_) if genus == 0 => cl.notes.push("no gaps: condition is void".into()),
        Some(pj) => {
            let a = pj.gap_asymmetry(9)?;
            cl.metric("gap_asymmetry", a);
            if !(a <= opts.single_valued_tol) {
                cl.fail(format!("T differs across the slits by {a:.3e}"));
            }
        }
    }
    Ok(cl)
}

fn clause_four(
    data: &ScatteringData,
    bg: &BackgroundOperator,
    pj: Option<&PoissonJensen>,
    edges_w: &[Complex64],
    opts: &ValidateOptions,
) -> Result<Clause> {
    let mut cl = Clause::new("iv");
    let mut cons = 0.0f64;
    for (i, n) in data.nodes.iter().enumerate() {
        let m = &data.nodes[data.mirror(i)];
        cons = cons.max((n.t * m.r_plus + m.t * n.r_minus).norm());
    }
    cl.metric("consistency", cons);
    if !(cons <= opts.identity_tol) {
        cl.fail(format!("T(w) R_+(conj w) + T(conj w) R_-(w) reaches {cons:.3e}"));
    }

    let e = bg.surface.curve.edges();
    let mut worst_edge = 0.0f64;
    for b in 0..e.len() / 2 {
        for side in [1.0, -1.0] {
            let idx: Vec<usize> =
                (0..data.nodes.len()).filter(|&i| data.nodes[i].band == b && data.nodes[i].side == side).collect();
            if idx.len() < 4 {
                continue;
            }
            let k = idx.len();
            for (l, near, next) in [(2 * b, idx[0], idx[1]), (2 * b + 1, idx[k - 1], idx[k - 2])] {
                let wl = if side > 0.0 { edges_w[l] } else { edges_w[l].conj() };
                let at_mu = data.dirichlet.mus.iter().any(|&m| (m - e[l]).abs() < 1e-12);
                let shift = if at_mu { -1.0 } else { 1.0 };
                for pick in [0, 1] {
                    let v = |i: usize| {
                        let n = &data.nodes[i];
                        let r = if pick == 0 { n.r_plus } else { n.r_minus };
                        ((n.w - wl) * (r + shift) / n.t).norm()
                    };
                    let (d1, d2) = ((data.nodes[near].w - wl).norm(), (data.nodes[next].w - wl).norm());
                    let (v1, v2) = (v(near), v(next));
                    let limit = (v1 - d1 * (v2 - v1) / (d2 - d1)).abs();
                    let rel = limit / v2.max(1e-300);
                    worst_edge = worst_edge.max(if v1.is_finite() && v2.is_finite() { rel } else { f64::INFINITY });
                }
            }
        }
    }
    cl.metric("edge_limit_ratio", worst_edge);
    if !(worst_edge <= 0.25) {
        cl.fail(format!("(w - w_l)(R +- 1)/T does not tend to zero at a band edge (ratio {worst_edge:.3e})"));
    }

    match pj {
        Some(pj) => {
            let mut worst = 0.0f64;
            for (j, b) in data.bound_states.iter().enumerate() {
                let res = pj.residue(j)?;
                let r2 = bg.surface.curve.discriminant(Complex64::new(b.rho, 0.0)).re;
                let expect = (res * res).re / r2;
                let prod = b.gamma_plus * b.gamma_minus;
                worst = worst.max((prod - expect).abs() / expect.abs());
            }
            cl.metric("norming_product", worst);
            if !(worst <= opts.residue_tol) {
                cl.fail(format!("gamma_+ gamma_- differs from (Res T)^2 / R by {worst:.3e} relative"));
            }
        }
        None => cl.notes.push("norming-constant product not checked: T cannot be rebuilt".into()),
    }
    Ok(cl)
}

/// Checks scattering data against the admissibility conditions (i)-(iv).
pub fn validate(data: &ScatteringData, bg: &BackgroundOperator, opts: &ValidateOptions) -> Result<ValidationReport> {
    let s = &bg.surface;
    let edges_w: Vec<Complex64> = s.curve.edges().iter().map(|&e| s.log_w_real(e).exp()).collect();
    let pj = PoissonJensen::new(Arc::clone(s), data).ok();
    Ok(ValidationReport {
        clauses: vec![
            clause_one(data, bg, &edges_w, opts)?,
            clause_two(data, bg),
            clause_three(pj.as_ref(), s.genus(), opts)?,
            clause_four(data, bg, pj.as_ref(), &edges_w, opts)?,
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::background::DirichletData;
    use crate::jost::{Perturbation, PerturbedOperator};
    use crate::scattering::scattering_data;
    use crate::surface::SurfaceData;

    fn setup(edges: &[f64], mus: Vec<f64>) -> (ScatteringData, Arc<BackgroundOperator>) {
        let s = Arc::new(SurfaceData::from_edges(edges).unwrap());
        let sigmas = vec![1; mus.len()];
        let bg = Arc::new(BackgroundOperator::new(s, DirichletData { mus, sigmas }, -210, 210).unwrap());
        let pert = Perturbation { start: 0, da: vec![0.0, 0.2], db: vec![0.3, 0.0] };
        let op = PerturbedOperator::new(Arc::clone(&bg), pert).unwrap();
        (scattering_data(&op, 64).unwrap(), bg)
    }

    fn statuses(r: &ValidationReport) -> Vec<ClauseStatus> {
        r.clauses.iter().map(|c| c.status).collect()
    }

    use ClauseStatus::*;

    #[test]
    fn forward_data_is_admissible() {
        for (edges, mus) in [(vec![-1.0, 1.0], vec![]), (vec![-1.3, -0.3, 0.3, 1.3], vec![0.0])] {
            let (data, bg) = setup(&edges, mus);
            let r = validate(&data, &bg, &ValidateOptions::default()).unwrap();
            assert!(r.passed(), "{r:#?}");
            assert_eq!(statuses(&r), vec![Pass; 4]);
        }
    }

    #[test]
    fn negated_norming_constant_fails_second_condition() {
        let (mut data, bg) = setup(&[-1.3, -0.3, 0.3, 1.3], vec![0.0]);
        data.bound_states[0].gamma_plus *= -1.0;
        data.bound_states[0].gamma_minus *= -1.0;
        let r = validate(&data, &bg, &ValidateOptions::default()).unwrap();
        assert_eq!(statuses(&r), vec![Pass, Fail, Pass, Pass], "{r:#?}");
    }

    #[test]
    fn flipped_left_reflection_fails_fourth_condition() {
        let (mut data, bg) = setup(&[-1.3, -0.3, 0.3, 1.3], vec![0.0]);
        for n in &mut data.nodes {
            n.r_minus = -n.r_minus;
        }
        let r = validate(&data, &bg, &ValidateOptions::default()).unwrap();
        assert_eq!(statuses(&r), vec![Pass, Pass, Pass, Fail], "{r:#?}");
    }

    #[test]
    fn unit_reflection_fails_first_condition() {
        let (mut data, bg) = setup(&[-1.3, -0.3, 0.3, 1.3], vec![0.0]);
        let i = 2 * (data.nodes_per_band / 2);
        for k in [i, data.mirror(i)] {
            let n = &mut data.nodes[k];
            n.r_plus /= n.r_plus.norm();
            n.r_minus /= n.r_minus.norm();
            n.t = Complex64::new(0.0, 0.0);
        }
        let r = validate(&data, &bg, &ValidateOptions::default()).unwrap();
        assert_eq!(statuses(&r), vec![Fail, Pass, Skipped, Pass], "{r:#?}");
    }
}
