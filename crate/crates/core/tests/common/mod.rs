//! Independent reference implementations used by the integration tests.
//! Dense linear algebra here goes through nalgebra, never through the
//! crate's own Cholesky.
#![allow(dead_code)]

use annak_core::dyad::{all_dyads, Dyad};
use annak_core::stats::design::Frame;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// `(XᵀX)⁻¹Xᵀy` through an explicit inverse.
pub fn normal_equations(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let xtx = x.transpose() * x;
    xtx.try_inverse().expect("full rank") * x.transpose() * y
}

/// `q_i = min(1, min_{p_j ≥ p_i} m p_j / #{l : p_l ≤ p_j})`.
pub fn bh_bruteforce(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    p.iter()
        .map(|&pi| {
            p.iter()
                .filter(|&&pj| pj >= pi)
                .map(|&pj| {
                    let r = p.iter().filter(|&&pl| pl <= pj).count();
                    pj * m as f64 / r as f64
                })
                .fold(1.0f64, f64::min)
        })
        .collect()
}

/// Average rank by counting: `#{x_j < x_i} + (#{x_j = x_i} + 1) / 2`.
pub fn rank_by_counting(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&xi| {
            let below = x.iter().filter(|&&v| v < xi).count() as f64;
            let equal = x.iter().filter(|&&v| v == xi).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

/// Dyadic data: `n` subjects, every dyad once, a 3-level category factor
/// (LL reference), a numeric covariate and a response with subject effects.
pub struct DyadData {
    pub n_subjects: usize,
    pub dyads: Vec<Dyad>,
    pub high: Vec<bool>,
    pub frame: Frame<f64>,
    pub y: Vec<f64>,
    pub covariate: Vec<f64>,
    pub codes: Vec<usize>,
}

pub fn random_dyad_data(seed: u64, n: usize, tau: f64, sigma: f64) -> DyadData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut high: Vec<bool> = (0..n).map(|i| i % 2 == 0).collect();
    // shuffle group labels while keeping at least two per group
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        high.swap(i, j);
    }
    let u: Vec<f64> = (0..n).map(|_| tau * rng.sample::<f64, _>(StandardNormal)).collect();
    let dyads = all_dyads(n);
    let codes: Vec<usize> = dyads
        .iter()
        .map(|d| usize::from(high[d.a()]) + usize::from(high[d.b()]))
        .collect();
    let effect = [0.0, 0.3, 0.8];
    let covariate: Vec<f64> = dyads.iter().map(|_| rng.sample(StandardNormal)).collect();
    let y: Vec<f64> = dyads
        .iter()
        .zip(&codes)
        .zip(&covariate)
        .map(|((d, &c), &x)| {
            let e: f64 = rng.sample(StandardNormal);
            1.0 + effect[c] + 0.4 * x + u[d.a()] + u[d.b()] + sigma * e
        })
        .collect();
    let mut frame = Frame::new(dyads.len());
    frame.push_numeric("y", y.clone()).unwrap();
    frame
        .push_factor("category", vec!["LL".into(), "LH".into(), "HH".into()], codes.clone())
        .unwrap();
    frame.push_numeric("x", covariate.clone()).unwrap();
    DyadData {
        n_subjects: n,
        dyads,
        high,
        frame,
        y,
        covariate,
        codes,
    }
}

/// Explicit doubled design: intercept, LH and HH dummies, covariate.
pub struct DenseModel {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    /// Role-1 and role-2 subject of each doubled row.
    pub s1: Vec<usize>,
    pub s2: Vec<usize>,
    pub n_subjects: usize,
}

impl DenseModel {
    pub fn from_data(d: &DyadData, with_covariate: bool) -> Self {
        let rows = 2 * d.dyads.len();
        let p = if with_covariate { 4 } else { 3 };
        let mut x = DMatrix::zeros(rows, p);
        let mut y = DVector::zeros(rows);
        let mut s1 = Vec::with_capacity(rows);
        let mut s2 = Vec::with_capacity(rows);
        for (i, dy) in d.dyads.iter().enumerate() {
            for (r, (a, b)) in [(2 * i, (dy.a(), dy.b())), (2 * i + 1, (dy.b(), dy.a()))] {
                x[(r, 0)] = 1.0;
                x[(r, 1)] = f64::from(d.codes[i] == 1);
                x[(r, 2)] = f64::from(d.codes[i] == 2);
                if with_covariate {
                    x[(r, 3)] = d.covariate[i];
                }
                y[r] = d.y[i];
                s1.push(a);
                s2.push(b);
            }
        }
        Self {
            x,
            y,
            s1,
            s2,
            n_subjects: d.n_subjects,
        }
    }

    /// `H = I + θ₁² Z₁Z₁ᵀ + θ₂² Z₂Z₂ᵀ`, built entry by entry.
    pub fn h(&self, theta: [f64; 2]) -> DMatrix<f64> {
        let n = self.y.len();
        DMatrix::from_fn(n, n, |i, j| {
            let mut v = if i == j { 1.0 } else { 0.0 };
            if self.s1[i] == self.s1[j] {
                v += theta[0] * theta[0];
            }
            if self.s2[i] == self.s2[j] {
                v += theta[1] * theta[1];
            }
            v
        })
    }

    /// GLS at relative scales `theta`: `(β̂, σ̂², profiled REML deviance)`.
    pub fn gls(&self, theta: [f64; 2]) -> (DVector<f64>, f64, f64) {
        let (n, p) = (self.x.nrows(), self.x.ncols());
        let chol = self.h(theta).cholesky().expect("H positive definite");
        let hinv_x = chol.solve(&self.x);
        let hinv_y = chol.solve(&self.y);
        let xthx = self.x.transpose() * &hinv_x;
        let xchol = xthx.clone().cholesky().expect("XᵀH⁻¹X positive definite");
        let beta = xchol.solve(&(self.x.transpose() * &hinv_y));
        let r = &self.y - &self.x * &beta;
        let rss = r.dot(&chol.solve(&r));
        let dof = (n - p) as f64;
        let sigma2 = rss / dof;
        let dev = log_det(&chol) + log_det(&xchol) + dof * (1.0 + (2.0 * std::f64::consts::PI * sigma2).ln());
        (beta, sigma2, dev)
    }

    /// Unprofiled REML deviance `log|V| + log|XᵀV⁻¹X| + rᵀV⁻¹r + (n-p) ln 2π`
    /// with `V = σ²I + τ₁²Z₁Z₁ᵀ + τ₂²Z₂Z₂ᵀ` at `β̂(V)`.
    pub fn full_deviance(&self, sigma2: f64, tau2: [f64; 2]) -> f64 {
        let (n, p) = (self.x.nrows(), self.x.ncols());
        let theta = [(tau2[0] / sigma2).sqrt(), (tau2[1] / sigma2).sqrt()];
        let v = self.h(theta) * sigma2;
        let chol = v.cholesky().unwrap();
        let xtvx = self.x.transpose() * chol.solve(&self.x);
        let xchol = xtvx.cholesky().unwrap();
        let beta = xchol.solve(&(self.x.transpose() * chol.solve(&self.y)));
        let r = &self.y - &self.x * &beta;
        log_det(&chol) + log_det(&xchol) + r.dot(&chol.solve(&r)) + (n - p) as f64 * (2.0 * std::f64::consts::PI).ln()
    }

    /// Zooming grid search of the profiled deviance over `θ ∈ [0, hi]²`
    /// (or the diagonal when `equal`).
    pub fn grid_search(&self, hi: f64, equal: bool) -> [f64; 2] {
        let points = 9usize;
        let mut lo = [0.0, 0.0];
        let mut up = [hi, hi];
        let mut best = [0.0, 0.0];
        let mut best_dev = f64::INFINITY;
        for _ in 0..14 {
            let step = [
                (up[0] - lo[0]) / (points - 1) as f64,
                (up[1] - lo[1]) / (points - 1) as f64,
            ];
            for i in 0..points {
                let jmax = if equal { 1 } else { points };
                for j in 0..jmax {
                    let t0 = lo[0] + step[0] * i as f64;
                    let t1 = if equal { t0 } else { lo[1] + step[1] * j as f64 };
                    let (_, _, dev) = self.gls([t0, t1]);
                    if dev < best_dev {
                        best_dev = dev;
                        best = [t0, t1];
                    }
                }
            }
            for k in 0..2 {
                lo[k] = (best[k] - step[k]).max(0.0);
                up[k] = best[k] + step[k];
            }
        }
        best
    }
}

fn log_det(c: &nalgebra::Cholesky<f64, nalgebra::Dyn>) -> f64 {
    2.0 * c.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}
