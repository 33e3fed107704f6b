//! Quadrature rules, real polynomials and scalar root finding.

use num_complex::Complex64;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn on(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let m = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (m + h * x, h * w))
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A point inside a segment `[a, b]` parametrised by `x = m - h cos(phi)`.
///
/// The distances to both ends are carried separately so that square-root
/// factors vanishing at the ends keep full relative precision.
#[derive(Debug, Clone, Copy)]
pub struct SegmentPoint {
    pub x: f64,
    /// `x - a`
    pub from_left: f64,
    /// `b - x`
    pub to_right: f64,
    /// `dx / dphi`
    pub jacobian: f64,
}

impl SegmentPoint {
    pub fn at(a: f64, b: f64, phi: f64) -> Self {
        let h = 0.5 * (b - a);
        let s = (0.5 * phi).sin();
        let c = (0.5 * phi).cos();
        let from_left = 2.0 * h * s * s;
        let to_right = 2.0 * h * c * c;
        let x = if from_left <= to_right { a + from_left } else { b - to_right };
        SegmentPoint { x, from_left, to_right, jacobian: h * phi.sin() }
    }
}

/// Quadrature over a segment in the cosine variable `phi in [0, phi_max]`.
pub fn segment_points(
    rule: &GaussLegendre,
    a: f64,
    b: f64,
    phi_max: f64,
) -> impl Iterator<Item = (SegmentPoint, f64)> + '_ {
    rule.on(0.0, phi_max).map(move |(phi, w)| (SegmentPoint::at(a, b, phi), w))
}

const KRONROD_X: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const KRONROD_W: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const GAUSS7_W: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod_segment<F: FnMut(f64) -> Complex64>(f: &mut F, a: f64, b: f64) -> (Complex64, f64) {
    let m = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(m);
    let mut k = fc * KRONROD_W[7];
    let mut g = fc * GAUSS7_W[3];
    for i in 0..7 {
        let dx = h * KRONROD_X[i];
        let s = f(m - dx) + f(m + dx);
        k += s * KRONROD_W[i];
        if i % 2 == 1 {
            g += s * GAUSS7_W[i / 2];
        }
    }
    (k * h, ((k - g) * h).norm())
}

/// Adaptive Gauss-Kronrod (7/15) integration of a complex integrand on `[a, b]`.
///
/// Returns the integral and the accumulated error estimate.
pub fn integrate_adaptive<F: FnMut(f64) -> Complex64>(
    mut f: F,
    a: f64,
    b: f64,
    tol: f64,
) -> (Complex64, f64) {
    let mut stack = vec![(a, b, 0usize)];
    let mut total = Complex64::new(0.0, 0.0);
    let mut err = 0.0;
    let width = (b - a).abs();
    let mut segments = 0usize;
    while let Some((lo, hi, depth)) = stack.pop() {
        let (val, e) = kronrod_segment(&mut f, lo, hi);
        segments += 1;
        let share = tol * ((hi - lo).abs() / width).max(1e-3);
        if e <= share || depth >= 100 || segments > 20_000 {
            total += val;
            err += e;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, depth + 1));
            stack.push((mid, hi, depth + 1));
        }
    }
    (total, err)
}

/// Real polynomial stored with ascending coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn monic_from_roots(roots: &[f64]) -> Poly {
        let mut c = vec![1.0];
        for &r in roots {
            let mut next = vec![0.0; c.len() + 1];
            for (i, &ci) in c.iter().enumerate() {
                next[i + 1] += ci;
                next[i] -= r * ci;
            }
            c = next;
        }
        Poly(c)
    }

    pub fn degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn eval_c(&self, z: Complex64) -> Complex64 {
        self.0
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    pub fn derivative(&self) -> Poly {
        if self.0.len() <= 1 {
            return Poly(vec![0.0]);
        }
        Poly(self.0.iter().enumerate().skip(1).map(|(i, &c)| i as f64 * c).collect())
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.0.len().max(other.0.len());
        let mut c = vec![0.0; n];
        for (i, v) in c.iter_mut().enumerate() {
            *v = self.0.get(i).copied().unwrap_or(0.0) + other.0.get(i).copied().unwrap_or(0.0);
        }
        Poly(c)
    }

    pub fn scale(&self, s: f64) -> Poly {
        Poly(self.0.iter().map(|c| c * s).collect())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut c = vec![0.0; self.0.len() + other.0.len() - 1];
        for (i, &a) in self.0.iter().enumerate() {
            for (j, &b) in other.0.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        Poly(c)
    }

    /// Quotient of division by a monic polynomial; the remainder is dropped.
    pub fn div_monic(&self, d: &Poly) -> Poly {
        let dn = d.degree();
        if self.degree() < dn {
            return Poly(vec![0.0]);
        }
        let mut rem = self.0.clone();
        let mut q = vec![0.0; self.degree() - dn + 1];
        for k in (0..q.len()).rev() {
            let lead = rem[k + dn];
            q[k] = lead;
            for (j, &dj) in d.0.iter().enumerate() {
                rem[k + j] -= lead * dj;
            }
        }
        Poly(q)
    }

    /// Coefficient of `z^k`, zero when out of range.
    pub fn coeff(&self, k: usize) -> f64 {
        self.0.get(k).copied().unwrap_or(0.0)
    }
}

/// Root of a continuous function with a sign change on `[a, b]`.
///
/// Bisection safeguarded secant steps (Illinois variant), run to machine precision.
pub fn bracket_root<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64) -> Option<f64> {
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() || !fa.is_finite() || !fb.is_finite() {
        return None;
    }
    let mut side = 0i8;
    for _ in 0..200 {
        let c = if (b - a).abs() > 1e-3 * (a.abs() + b.abs() + 1.0) {
            0.5 * (a + b)
        } else {
            (a * fb - b * fa) / (fb - fa)
        };
        let c = if c <= a.min(b) || c >= a.max(b) { 0.5 * (a + b) } else { c };
        let fc = f(c);
        if fc == 0.0 || (b - a).abs() <= 4.0 * f64::EPSILON * c.abs().max(1e-300) {
            return Some(c);
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    Some(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let rule = GaussLegendre::new(7);
        for k in 0..14 {
            let s: f64 = rule.on(0.0, 2.0).map(|(x, w)| w * x.powi(k)).sum();
            let exact = 2f64.powi(k + 1) / (k as f64 + 1.0);
            assert!((s - exact).abs() < 1e-12 * exact.max(1.0), "k={k}");
        }
        let w: f64 = GaussLegendre::new(200).weights.iter().sum();
        assert!((w - 2.0).abs() < 1e-13);
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let (v, _) = integrate_adaptive(|x| Complex64::new(1.0 / x.sqrt(), 0.0), 0.0, 1.0, 1e-12);
        assert!((v.re - 2.0).abs() < 1e-9);
    }

    #[test]
    fn segment_point_distances_are_consistent() {
        let p = SegmentPoint::at(-1.0, 3.0, 0.3);
        assert!((p.x - (-1.0) - p.from_left).abs() < 1e-15);
        assert!((3.0 - p.x - p.to_right).abs() < 1e-15);
    }

    #[test]
    fn chebyshev_weight_integral() {
        let rule = GaussLegendre::new(8);
        let s: f64 = segment_points(&rule, -1.0, 1.0, std::f64::consts::PI)
            .map(|(p, w)| w * p.jacobian / (p.from_left * p.to_right).sqrt())
            .sum();
        assert!((s - std::f64::consts::PI).abs() < 1e-13);
    }

    #[test]
    fn poly_division_and_roots() {
        let p = Poly::monic_from_roots(&[1.0, -2.0, 0.5]);
        let d = Poly::monic_from_roots(&[1.0]);
        let q = p.div_monic(&d);
        assert_eq!(q.degree(), 2);
        assert!((q.eval(3.0) - (3.0 + 2.0) * (3.0 - 0.5)).abs() < 1e-12);
        let r = bracket_root(|x| p.eval(x), 0.6, 1.7).unwrap();
        assert!((r - 1.0).abs() < 1e-14);
    }
}
