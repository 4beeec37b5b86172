//! Linear mixed model with crossed random intercepts for the two members of
//! a dyad, fitted by REML on role-doubled data.
//!
//! Model: `y = Xβ + Z₁u₁ + Z₂u₂ + e`, `u₁ ~ N(0, τ₁²I)`, `u₂ ~ N(0, τ₂²I)`,
//! `e ~ N(0, σ²I)`. With relative scales `θₖ = τₖ/σ` and `Λ = diag(θ)`, the
//! marginal covariance is `σ²V` with `V = I + ZΛΛZᵀ`. Every quantity is
//! evaluated through the `q x q` matrix `A = ΛZᵀZΛ + I` (`q` = levels in
//! both roles) instead of the `n x n` matrix `V`:
//!
//! * `log|V| = log|A|`
//! * `V⁻¹ = I - ZΛA⁻¹ΛZᵀ`
//!
//! and the profiled REML criterion is
//! `log|A| + log|XᵀV⁻¹X| + (n-p)(1 + ln(2π r²/(n-p)))` with
//! `r² = (y-Xβ̂)ᵀV⁻¹(y-Xβ̂)`. Inference uses `df = n_unique - k`, the count
//! of unique dyads minus fixed-effect columns.

use crate::dyad::Dyad;
use crate::error::{Error, Result};
use crate::linalg::{dot, Cholesky, Matrix};
use crate::scalar::Scalar;

use super::design::{Design, DesignSpec, Frame};
use super::optim::{gradient_norm, NelderMead};
use super::CoefTable;

/// Role-doubled dyadic rows: row `2i` is `(a, b)` and row `2i + 1` is
/// `(b, a)` for input dyad `i`, with every other column copied.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubledData<T> {
    pub subj1: Vec<usize>,
    pub subj2: Vec<usize>,
    pub frame: Frame<T>,
    pub n_unique: usize,
    pub n_subjects: usize,
}

pub fn double_dyads<T: Scalar>(dyads: &[Dyad], frame: &Frame<T>, n_subjects: usize) -> Result<DoubledData<T>> {
    if frame.n_rows() != dyads.len() {
        return Err(Error::LengthMismatch {
            left: dyads.len(),
            right: frame.n_rows(),
        });
    }
    if let Some(d) = dyads.iter().find(|d| d.b() >= n_subjects) {
        return Err(Error::InvalidSpec(format!("dyad member {} out of range", d.b())));
    }
    let mut subj1 = Vec::with_capacity(2 * dyads.len());
    let mut subj2 = Vec::with_capacity(2 * dyads.len());
    for d in dyads {
        subj1.extend([d.a(), d.b()]);
        subj2.extend([d.b(), d.a()]);
    }
    Ok(DoubledData {
        subj1,
        subj2,
        frame: frame.repeat_rows(2),
        n_unique: dyads.len(),
        n_subjects,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmmOptions {
    /// Constrain `τ₁² = τ₂²`.
    pub equal_variances: bool,
    pub optimizer: NelderMead,
}

impl Default for LmmOptions {
    fn default() -> Self {
        Self {
            equal_variances: false,
            optimizer: NelderMead::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmmFit<T> {
    /// `df` is `n_unique - k`.
    pub coef: CoefTable<T>,
    pub sigma2: T,
    /// Random-intercept variances for roles 1 and 2.
    pub tau2: [T; 2],
    pub theta: [T; 2],
    pub reml_deviance: T,
    pub n_unique: usize,
    pub k: usize,
    pub iterations: usize,
    pub evaluations: usize,
}

impl<T: Scalar> LmmFit<T> {
    pub fn df(&self) -> usize {
        self.n_unique - self.k
    }
}

/// Result of one criterion evaluation.
#[derive(Debug, Clone)]
pub struct RemlEval<T> {
    pub deviance: T,
    pub beta: Vec<T>,
    /// Penalized residual sum of squares `r²`.
    pub pwrss: T,
    xtvx: Cholesky<T>,
}

/// Crossed-intercept model with the response-independent cross products
/// precomputed, so many responses (one per region) share the setup cost.
#[derive(Debug, Clone)]
pub struct CrossedLmm<T> {
    design: Design<T>,
    subj1: Vec<usize>,
    subj2: Vec<usize>,
    levels: usize,
    ztz: Matrix<T>,
    ztx: Matrix<T>,
    xtx: Matrix<T>,
    n_unique: usize,
}

impl<T: Scalar> CrossedLmm<T> {
    /// `subj1`/`subj2` are level indices in `0..levels` for each row of the
    /// design.
    pub fn new(
        design: Design<T>,
        subj1: Vec<usize>,
        subj2: Vec<usize>,
        levels: usize,
        n_unique: usize,
    ) -> Result<Self> {
        let n = design.n();
        if subj1.len() != n || subj2.len() != n {
            return Err(Error::LengthMismatch {
                left: n,
                right: subj1.len().min(subj2.len()),
            });
        }
        if subj1.iter().chain(&subj2).any(|&s| s >= levels) {
            return Err(Error::InvalidSpec("random-effect level out of range".into()));
        }
        if n_unique <= design.k() {
            return Err(Error::TooFewRows {
                needed: design.k() + 1,
                k: design.k(),
                got: n_unique,
            });
        }
        let (q, p) = (2 * levels, design.k());
        let mut ztz = Matrix::zeros(q, q);
        let mut ztx = Matrix::zeros(q, p);
        for i in 0..n {
            let (g1, g2) = (subj1[i], levels + subj2[i]);
            ztz[(g1, g1)] = ztz[(g1, g1)] + T::one();
            ztz[(g2, g2)] = ztz[(g2, g2)] + T::one();
            ztz[(g1, g2)] = ztz[(g1, g2)] + T::one();
            ztz[(g2, g1)] = ztz[(g2, g1)] + T::one();
            for (j, &x) in design.x.row(i).iter().enumerate() {
                ztx[(g1, j)] = ztx[(g1, j)] + x;
                ztx[(g2, j)] = ztx[(g2, j)] + x;
            }
        }
        let xtx = design.x.gram();
        Ok(Self {
            design,
            subj1,
            subj2,
            levels,
            ztz,
            ztx,
            xtx,
            n_unique,
        })
    }

    /// Design and response from already-doubled data, taken as is.
    pub fn from_doubled(data: &DoubledData<T>, spec: &DesignSpec) -> Result<(Self, Vec<T>)> {
        let design = spec.design(&data.frame)?;
        let y = spec.response(&data.frame)?;
        let model = Self::new(
            design,
            data.subj1.clone(),
            data.subj2.clone(),
            data.n_subjects,
            data.n_unique,
        )?;
        Ok((model, y))
    }

    /// Model for one row per dyad in `frame`; numeric terms are z-scored
    /// over the unique dyads (when the spec asks) before doubling. The
    /// response column is not read.
    pub fn for_dyads(dyads: &[Dyad], frame: &Frame<T>, n_subjects: usize, spec: &DesignSpec) -> Result<Self> {
        let frame = if spec.standardize {
            spec.standardized_terms(frame)?
        } else {
            frame.clone()
        };
        let doubled = double_dyads(dyads, &frame, n_subjects)?;
        let design = spec.clone().standardized(false).design(&doubled.frame)?;
        Self::new(design, doubled.subj1, doubled.subj2, n_subjects, dyads.len())
    }

    /// [`Self::for_dyads`] plus the doubled response from `spec.response`.
    pub fn from_dyads(
        dyads: &[Dyad],
        frame: &Frame<T>,
        n_subjects: usize,
        spec: &DesignSpec,
    ) -> Result<(Self, Vec<T>)> {
        let model = Self::for_dyads(dyads, frame, n_subjects, spec)?;
        let y = spec.response(frame)?;
        Ok((model, double_response(&y)))
    }

    pub fn design(&self) -> &Design<T> {
        &self.design
    }

    pub fn n(&self) -> usize {
        self.design.n()
    }

    pub fn n_unique(&self) -> usize {
        self.n_unique
    }

    fn response_products(&self, y: &[T]) -> (Vec<T>, Vec<T>, T) {
        let mut zty = vec![T::zero(); 2 * self.levels];
        for (i, &v) in y.iter().enumerate() {
            zty[self.subj1[i]] = zty[self.subj1[i]] + v;
            let g2 = self.levels + self.subj2[i];
            zty[g2] = zty[g2] + v;
        }
        (zty, self.design.x.tr_matvec(y), dot(y, y))
    }

    fn theta_for(&self, g: usize, theta: &[T; 2]) -> T {
        if g < self.levels {
            theta[0]
        } else {
            theta[1]
        }
    }

    fn evaluate_with(&self, products: &(Vec<T>, Vec<T>, T), theta: [T; 2]) -> Result<RemlEval<T>> {
        let (zty, xty, yty) = products;
        let theta = [theta[0].abs(), theta[1].abs()];
        let (q, p, n) = (2 * self.levels, self.design.k(), self.design.n());
        let lam: Vec<T> = (0..q).map(|g| self.theta_for(g, &theta)).collect();

        let mut a = Matrix::zeros(q, q);
        for i in 0..q {
            for j in 0..q {
                a[(i, j)] = lam[i] * lam[j] * self.ztz[(i, j)];
            }
            a[(i, i)] = a[(i, i)] + T::one();
        }
        let chol_a = Cholesky::new(&a)?;

        let mut cu: Vec<T> = (0..q).map(|g| lam[g] * zty[g]).collect();
        chol_a.forward(&mut cu);
        let mut cx = Vec::with_capacity(p);
        for j in 0..p {
            let mut col: Vec<T> = (0..q).map(|g| lam[g] * self.ztx[(g, j)]).collect();
            chol_a.forward(&mut col);
            cx.push(col);
        }

        let mut xtvx = self.xtx.clone();
        for i in 0..p {
            for j in 0..p {
                xtvx[(i, j)] = xtvx[(i, j)] - dot(&cx[i], &cx[j]);
            }
        }
        let xtvy: Vec<T> = (0..p).map(|j| xty[j] - dot(&cx[j], &cu)).collect();
        let ytvy = *yty - dot(&cu, &cu);
        let chol_x = Cholesky::new(&xtvx)?;
        let beta = chol_x.solve(&xtvy);
        let pwrss = ytvy - dot(&beta, &xtvy);

        let dof = T::from_count(n - p);
        let two_pi = T::lit(std::f64::consts::TAU);
        let deviance = chol_a.log_det() + chol_x.log_det() + dof * (T::one() + (two_pi * pwrss / dof).ln());
        Ok(RemlEval {
            deviance,
            beta,
            pwrss,
            xtvx: chol_x,
        })
    }

    /// REML criterion at relative scales `theta = (τ₁/σ, τ₂/σ)`.
    pub fn reml_criterion(&self, y: &[T], theta: [T; 2]) -> Result<RemlEval<T>> {
        if y.len() != self.n() {
            return Err(Error::LengthMismatch {
                left: self.n(),
                right: y.len(),
            });
        }
        self.evaluate_with(&self.response_products(y), theta)
    }

    pub fn fit(&self, y: &[T], options: &LmmOptions) -> Result<LmmFit<T>> {
        if y.len() != self.n() {
            return Err(Error::LengthMismatch {
                left: self.n(),
                right: y.len(),
            });
        }
        let products = self.response_products(y);
        let expand = |x: &[f64]| -> [T; 2] {
            if options.equal_variances {
                [T::lit(x[0]), T::lit(x[0])]
            } else {
                [T::lit(x[0]), T::lit(x[1])]
            }
        };
        let objective = |x: &[f64]| -> f64 {
            self.evaluate_with(&products, expand(x))
                .map(|e| e.deviance.to_f64_lossy())
                .unwrap_or(f64::INFINITY)
        };

        // coarse probe for a starting point
        let probes = [0.0, 0.25, 1.0, 3.0];
        let dim = if options.equal_variances { 1 } else { 2 };
        let mut start = vec![1.0; dim];
        let mut best = f64::INFINITY;
        let mut probe_evals = 0;
        for &a in &probes {
            for &b in if dim == 2 { &probes[..] } else { &probes[..1] } {
                let x = if dim == 2 { vec![a, b] } else { vec![a] };
                let v = objective(&x);
                probe_evals += 1;
                if v < best {
                    best = v;
                    start = x;
                }
            }
        }
        if !best.is_finite() {
            return Err(Error::DegenerateResponse("REML criterion not finite".into()));
        }

        let found = options.optimizer.minimize(objective, &start);
        if !found.converged {
            return Err(Error::NonConvergence {
                iterations: found.iterations,
                gradient_norm: gradient_norm(objective, &found.x),
            });
        }
        let theta = expand(&found.x);
        let theta = [theta[0].abs(), theta[1].abs()];
        let eval = self.evaluate_with(&products, theta)?;

        let (n, k) = (self.design.n(), self.design.k());
        let sigma2 = eval.pwrss / T::from_count(n - k);
        let mut cov = eval.xtvx.inverse();
        for i in 0..k {
            for j in 0..k {
                cov[(i, j)] = cov[(i, j)] * sigma2;
            }
        }
        Ok(LmmFit {
            coef: CoefTable {
                names: self.design.names.clone(),
                beta: eval.beta,
                cov_beta: cov,
                df: T::from_count(self.n_unique - k),
            },
            sigma2,
            tau2: [theta[0] * theta[0] * sigma2, theta[1] * theta[1] * sigma2],
            theta,
            reml_deviance: eval.deviance,
            n_unique: self.n_unique,
            k,
            iterations: found.iterations,
            evaluations: found.evaluations + probe_evals,
        })
    }
}

/// Each value repeated twice, matching [`double_dyads`] row order.
pub fn double_response<T: Scalar>(y: &[T]) -> Vec<T> {
    y.iter().flat_map(|&v| [v, v]).collect()
}

/// Double `frame` (one row per dyad) and fit `spec` with crossed intercepts.
pub fn lmm_fit_crossed<T: Scalar>(
    dyads: &[Dyad],
    frame: &Frame<T>,
    n_subjects: usize,
    spec: &DesignSpec,
    options: &LmmOptions,
) -> Result<LmmFit<T>> {
    let (model, y) = CrossedLmm::from_dyads(dyads, frame, n_subjects, spec)?;
    model.fit(&y, options)
}
