//! Short-range perturbations of the background, Jost solutions and the
//! transformation operators relating them to the background solutions.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::background::BackgroundOperator;
use crate::error::{Error, Result};
use crate::surface::{CircleGrid, SpectralPoint};

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Finitely supported coefficient changes `da(n)`, `db(n)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    /// Site of the first entry of `da` and `db`.
    pub start: i64,
    pub da: Vec<f64>,
    pub db: Vec<f64>,
}

impl Perturbation {
    pub fn zero() -> Self {
        Perturbation::default()
    }

    pub fn da(&self, n: i64) -> f64 {
        let k = n - self.start;
        if k < 0 {
            return 0.0;
        }
        self.da.get(k as usize).copied().unwrap_or(0.0)
    }

    pub fn db(&self, n: i64) -> f64 {
        let k = n - self.start;
        if k < 0 {
            return 0.0;
        }
        self.db.get(k as usize).copied().unwrap_or(0.0)
    }

    /// Smallest interval containing every nonzero entry, if any.
    pub fn support(&self) -> Option<(i64, i64)> {
        let len = self.da.len().max(self.db.len()) as i64;
        let nonzero: Vec<i64> = (self.start..self.start + len)
            .filter(|&n| self.da(n) != 0.0 || self.db(n) != 0.0)
            .collect();
        Some((*nonzero.first()?, *nonzero.last()?))
    }

    /// `|da(n)| + |db(n)|`.
    pub fn size_at(&self, n: i64) -> f64 {
        self.da(n).abs() + self.db(n).abs()
    }
}

/// Background plus a finitely supported perturbation.
#[derive(Debug, Clone)]
pub struct PerturbedOperator {
    pub background: Arc<BackgroundOperator>,
    pub perturbation: Perturbation,
    /// Sites `lo_edge..=hi_edge` bracket the support: the Jost solutions equal the
    /// background ones right of `hi_edge` and left of `lo_edge`.
    lo_edge: i64,
    hi_edge: i64,
}

impl PerturbedOperator {
    pub fn new(background: Arc<BackgroundOperator>, perturbation: Perturbation) -> Result<Self> {
        let (wlo, whi) = background.window();
        let (lo_edge, hi_edge) = match perturbation.support() {
            Some((lo, hi)) => (lo - 1, hi + 1),
            None => (0, 0),
        };
        if lo_edge - 1 < wlo || hi_edge + 1 > whi {
            return Err(Error::InvalidPerturbation(format!(
                "support [{}, {}] does not fit inside the background window [{wlo}, {whi}]",
                lo_edge + 1,
                hi_edge - 1
            )));
        }
        let op = PerturbedOperator { background, perturbation, lo_edge, hi_edge };
        for n in wlo..=whi {
            if !(op.a(n)? > 0.0) {
                return Err(Error::NonPositiveCoefficient(n));
            }
        }
        Ok(op)
    }

    pub fn a(&self, n: i64) -> Result<f64> {
        Ok(self.background.a(n)? + self.perturbation.da(n))
    }

    pub fn b(&self, n: i64) -> Result<f64> {
        Ok(self.background.b(n)? + self.perturbation.db(n))
    }

    pub fn window(&self) -> (i64, i64) {
        self.background.window()
    }

    /// Sites bracketing the support (see the field docs).
    pub fn edges(&self) -> (i64, i64) {
        (self.lo_edge, self.hi_edge)
    }

    /// `sum_{j >= n} |da(j)| + |db(j)|` for the right side, mirrored for the left.
    pub fn tail(&self, n: i64, sign: f64) -> f64 {
        match self.perturbation.support() {
            None => 0.0,
            Some((lo, hi)) => {
                if sign > 0.0 {
                    (n.max(lo)..=hi).map(|j| self.perturbation.size_at(j)).sum()
                } else {
                    (lo..=n.min(hi)).map(|j| self.perturbation.size_at(j)).sum()
                }
            }
        }
    }

    /// Jost solution `psi_{sign}(z, n)` for `n` in `[from, to]`.
    ///
    /// With `regularised` set, the result is multiplied by the background pole factor
    /// so that it stays finite at the Dirichlet eigenvalues.
    pub fn jost_range(
        &self,
        p: SpectralPoint,
        from: i64,
        to: i64,
        sign: f64,
        regularised: bool,
    ) -> Result<Vec<Complex64>> {
        let bg = &self.background;
        let (wlo, whi) = bg.window();
        if from < wlo || to > whi || from > to {
            return Err(Error::OutOfWindow(if from < wlo { from } else { to }));
        }
        let len = (to - from + 1) as usize;
        let mut out = vec![c(0.0); len];
        if sign > 0.0 {
            let top = to.max(self.hi_edge + 1);
            let base_from = self.hi_edge;
            let base = if regularised {
                bg.psi_hat_range(p, base_from, top, 1.0)?
            } else {
                bg.psi_range(p, base_from, top, 1.0)?
            };
            let at = |n: i64| base[(n - base_from) as usize];
            let mut vals = std::collections::BTreeMap::new();
            for n in base_from..=top {
                vals.insert(n, at(n));
            }
            let mut n = self.hi_edge;
            while n > from {
                let next = vals[&(n + 1)];
                let cur = vals[&n];
                let prev = ((p.z - self.b(n)?) * cur - self.a(n)? * next) / self.a(n - 1)?;
                vals.insert(n - 1, prev);
                n -= 1;
            }
            for (k, v) in out.iter_mut().enumerate() {
                *v = vals[&(from + k as i64)];
            }
        } else {
            let bottom = from.min(self.lo_edge - 1);
            let base = if regularised {
                bg.psi_hat_range(p, bottom, self.lo_edge, -1.0)?
            } else {
                bg.psi_range(p, bottom, self.lo_edge, -1.0)?
            };
            let mut vals = std::collections::BTreeMap::new();
            for (k, v) in base.iter().enumerate() {
                vals.insert(bottom + k as i64, *v);
            }
            let mut n = self.lo_edge;
            while n < to {
                let prev = vals[&(n - 1)];
                let cur = vals[&n];
                let next = ((p.z - self.b(n)?) * cur - self.a(n - 1)? * prev) / self.a(n)?;
                vals.insert(n + 1, next);
                n += 1;
            }
            for (k, v) in out.iter_mut().enumerate() {
                *v = vals[&(from + k as i64)];
            }
        }
        Ok(out)
    }

    /// `A_{sign}(n)`, the product of `a_q / a` over the sites on the `sign` side of `n`.
    pub fn a_factor(&self, n: i64, sign: f64) -> Result<f64> {
        let mut p = 1.0;
        if let Some((lo, hi)) = self.perturbation.support() {
            if sign > 0.0 {
                for j in n.max(lo)..=hi {
                    p *= self.background.a(j)? / self.a(j)?;
                }
            } else {
                for j in lo..=(n - 1).min(hi) {
                    p *= self.background.a(j)? / self.a(j)?;
                }
            }
        }
        Ok(p)
    }

    /// `B_{sign}(n)`, the sum of `b_q - b` over the sites strictly on the `sign` side of `n`.
    pub fn b_factor(&self, n: i64, sign: f64) -> Result<f64> {
        let mut s = 0.0;
        if let Some((lo, hi)) = self.perturbation.support() {
            if sign > 0.0 {
                for m in (n + 1).max(lo)..=hi {
                    s -= self.perturbation.db(m);
                }
            } else {
                for m in lo..=(n - 1).min(hi) {
                    s -= self.perturbation.db(m);
                }
            }
        }
        Ok(s)
    }

    /// Transmission normalisation `T_0 = prod a(m) / a_q(m)` over the support.
    pub fn t0(&self) -> Result<f64> {
        Ok(1.0 / self.a_factor(i64::MIN / 2, 1.0)?)
    }

    /// Transformation kernel `K_{sign}(n, m)` for `n` in `[n_lo, n_hi]` and
    /// `m` within `depth` of `n` on the `sign` side, by circle quadrature.
    pub fn kernel(
        &self,
        grid: &CircleGrid,
        n_lo: i64,
        n_hi: i64,
        depth: usize,
        sign: f64,
    ) -> Result<TransformationKernel> {
        let d = depth as i64;
        let (m_lo, m_hi) = if sign > 0.0 { (n_lo, n_hi + d) } else { (n_lo - d, n_hi) };
        let rows = (n_hi - n_lo + 1) as usize;
        let mut values = vec![c(0.0); rows * (depth + 1)];
        for node in &grid.nodes {
            let p = SpectralPoint::of_node(node);
            let psi = self.jost_range(p, n_lo, n_hi, sign, false)?;
            let psq = self.background.psi_range(p, m_lo, m_hi, -sign)?;
            for (i, &pn) in psi.iter().enumerate() {
                let n = n_lo + i as i64;
                for k in 0..=depth {
                    let m = if sign > 0.0 { n + k as i64 } else { n - k as i64 };
                    values[i * (depth + 1) + k] += pn * psq[(m - m_lo) as usize] * node.weight;
                }
            }
        }
        let imag = values.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
        Ok(TransformationKernel {
            sign,
            n_lo,
            n_hi,
            depth,
            values: values.iter().map(|v| v.re).collect(),
            imaginary_residual: imag,
        })
    }
}

/// Values of a transformation kernel on a band of the `(n, m)` lattice.
#[derive(Debug, Clone)]
pub struct TransformationKernel {
    pub sign: f64,
    pub n_lo: i64,
    pub n_hi: i64,
    pub depth: usize,
    values: Vec<f64>,
    /// Largest imaginary part left by the quadrature.
    pub imaginary_residual: f64,
}

impl TransformationKernel {
    /// `K(n, m)`; zero outside the stored band on the wrong side of the diagonal.
    pub fn get(&self, n: i64, m: i64) -> Option<f64> {
        if n < self.n_lo || n > self.n_hi {
            return None;
        }
        let k = if self.sign > 0.0 { m - n } else { n - m };
        if k < 0 {
            return Some(0.0);
        }
        if k as usize > self.depth {
            return None;
        }
        Some(self.values[(n - self.n_lo) as usize * (self.depth + 1) + k as usize])
    }

    /// Quadrature values of `K(n, m)` on the wrong side of the diagonal, which should vanish.
    pub fn triangularity_residual(
        &self,
        op: &PerturbedOperator,
        grid: &CircleGrid,
        depth: usize,
    ) -> Result<f64> {
        let mut worst = 0.0f64;
        let s = self.sign;
        let d = depth as i64;
        let (m_lo, m_hi) = if s > 0.0 { (self.n_lo - d, self.n_hi) } else { (self.n_lo, self.n_hi + d) };
        let rows = (self.n_hi - self.n_lo + 1) as usize;
        let mut acc = vec![c(0.0); rows * depth];
        for node in &grid.nodes {
            let p = SpectralPoint::of_node(node);
            let psi = op.jost_range(p, self.n_lo, self.n_hi, s, false)?;
            let psq = op.background.psi_range(p, m_lo, m_hi, -s)?;
            for (i, &pn) in psi.iter().enumerate() {
                let n = self.n_lo + i as i64;
                for k in 1..=depth {
                    let m = if s > 0.0 { n - k as i64 } else { n + k as i64 };
                    acc[i * depth + k - 1] += pn * psq[(m - m_lo) as usize] * node.weight;
                }
            }
        }
        for v in acc {
            worst = worst.max(v.norm());
        }
        Ok(worst)
    }

    /// Largest entry of the intertwining defect `H K - K H_q` on the interior of the band.
    pub fn intertwining_residual(&self, op: &PerturbedOperator) -> Result<f64> {
        let bg = &op.background;
        let mut worst = 0.0f64;
        for n in self.n_lo + 1..self.n_hi {
            for k in 0..self.depth as i64 - 1 {
                let m = if self.sign > 0.0 { n + k } else { n - k };
                let kv = |a: i64, b: i64| self.get(a, b);
                let (Some(k_up), Some(k_dn), Some(k0), Some(k_ml), Some(k_mr)) =
                    (kv(n + 1, m), kv(n - 1, m), kv(n, m), kv(n, m - 1), kv(n, m + 1))
                else {
                    continue;
                };
                let lhs = op.a(n - 1)? * k_dn + op.b(n)? * k0 + op.a(n)? * k_up;
                let rhs = bg.a(m - 1)? * k_ml + bg.b(m)? * k0 + bg.a(m)? * k_mr;
                worst = worst.max((lhs - rhs).abs());
            }
        }
        Ok(worst)
    }

    /// `max |psi(z, n) - sum_m K(n, m) psi_q(z, m)|` at the given spectral points.
    pub fn representation_residual(&self, op: &PerturbedOperator, points: &[SpectralPoint]) -> Result<f64> {
        let mut worst = 0.0f64;
        let d = self.depth as i64;
        let (m_lo, m_hi) = if self.sign > 0.0 { (self.n_lo, self.n_hi + d) } else { (self.n_lo - d, self.n_hi) };
        for &p in points {
            let psi = op.jost_range(p, self.n_lo, self.n_hi, self.sign, false)?;
            let psq = op.background.psi_range(p, m_lo, m_hi, self.sign)?;
            for (i, &pn) in psi.iter().enumerate() {
                let n = self.n_lo + i as i64;
                let mut s = c(0.0);
                for k in 0..=d {
                    let m = if self.sign > 0.0 { n + k } else { n - k };
                    s += psq[(m - m_lo) as usize] * self.get(n, m).unwrap_or(0.0);
                }
                worst = worst.max((s - pn).norm() / pn.norm().max(1.0));
            }
        }
        Ok(worst)
    }

    /// Smallest `C` with `|K(n, m)| <= C * tail(mid)` over the stored band, where
    /// `tail(j)` sums `|da| + |db|` from `j` outward and `mid` is `(n + m) / 2` rounded
    /// towards `-sign`. Infinite if a nonzero entry sits where the tail vanishes.
    pub fn decay_constant(&self, op: &PerturbedOperator) -> f64 {
        let mut worst = 0.0f64;
        for n in self.n_lo..=self.n_hi {
            for k in 1..=self.depth as i64 {
                let m = if self.sign > 0.0 { n + k } else { n - k };
                let v = self.get(n, m).unwrap_or(0.0).abs();
                let mid = (n + m).div_euclid(2);
                let tail = if self.sign > 0.0 { op.tail(mid, 1.0) } else { op.tail(mid + (n + m).rem_euclid(2), -1.0) };
                if tail == 0.0 {
                    if v > 1e-9 {
                        return f64::INFINITY;
                    }
                } else {
                    worst = worst.max(v / tail);
                }
            }
        }
        worst
    }
}
