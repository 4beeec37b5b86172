//! Derivative-free minimization for the low-dimensional variance-parameter
//! searches.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMead {
    /// Stop when the simplex's objective spread is below this.
    pub ftol: f64,
    /// ...and every vertex is within this distance of the best one.
    pub xtol: f64,
    pub max_iter: usize,
    pub initial_step: f64,
    /// Fresh-simplex restarts from the incumbent once a run converges.
    pub max_restarts: usize,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            ftol: 1e-8,
            xtol: 1e-7,
            max_iter: 500,
            initial_step: 0.25,
            max_restarts: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

impl NelderMead {
    pub fn minimize<F: FnMut(&[f64]) -> f64>(&self, mut f: F, x0: &[f64]) -> Minimum {
        let mut eval = |x: &[f64]| {
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };
        let mut best = self.run(&mut eval, x0, self.initial_step);
        for _ in 0..self.max_restarts {
            if !best.converged {
                break;
            }
            let step = (self.initial_step * 0.1).max(10.0 * self.xtol);
            let next = self.run(&mut eval, &best.x, step);
            let improved = best.f - next.f;
            let total_it = best.iterations + next.iterations;
            let total_ev = best.evaluations + next.evaluations;
            let converged = next.converged;
            if next.f <= best.f {
                best = next;
            }
            best.iterations = total_it;
            best.evaluations = total_ev;
            best.converged = converged;
            if improved <= self.ftol {
                break;
            }
        }
        best
    }

    fn run<F: FnMut(&[f64]) -> f64>(&self, f: &mut F, x0: &[f64], step: f64) -> Minimum {
        let n = x0.len();
        let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
        for i in 0..n {
            let mut v = x0.to_vec();
            v[i] += if v[i].abs() > 1e-12 {
                step.max(step * v[i].abs())
            } else {
                step
            };
            simplex.push(v);
        }
        let mut fv: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
        let mut evaluations = n + 1;
        let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);

        for it in 0..self.max_iter {
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&a, &b| fv[a].total_cmp(&fv[b]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            fv = order.iter().map(|&i| fv[i]).collect();

            let spread = fv[n] - fv[0];
            let size = simplex[1..].iter().map(|v| dist(v, &simplex[0])).fold(0.0, f64::max);
            if spread <= self.ftol && size <= self.xtol {
                return Minimum {
                    x: simplex[0].clone(),
                    f: fv[0],
                    iterations: it,
                    evaluations,
                    converged: true,
                };
            }

            let centroid: Vec<f64> = (0..n)
                .map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64)
                .collect();
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&simplex[n])
                    .map(|(&c, &w)| c + t * (c - w))
                    .collect()
            };

            let xr = along(alpha);
            let fr = f(&xr);
            evaluations += 1;
            if fr < fv[0] {
                let xe = along(gamma);
                let fe = f(&xe);
                evaluations += 1;
                if fe < fr {
                    simplex[n] = xe;
                    fv[n] = fe;
                } else {
                    simplex[n] = xr;
                    fv[n] = fr;
                }
                continue;
            }
            if fr < fv[n - 1] {
                simplex[n] = xr;
                fv[n] = fr;
                continue;
            }
            let (xc, fc) = if fr < fv[n] {
                let xc = along(rho * alpha);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = along(-rho);
                let fc = f(&xc);
                (xc, fc)
            };
            evaluations += 1;
            if fc < fv[n].min(fr) {
                simplex[n] = xc;
                fv[n] = fc;
                continue;
            }
            for i in 1..=n {
                let shrunk: Vec<f64> = simplex[0]
                    .iter()
                    .zip(&simplex[i])
                    .map(|(&b, &v)| b + sigma * (v - b))
                    .collect();
                fv[i] = f(&shrunk);
                simplex[i] = shrunk;
            }
            evaluations += n;
        }

        let best = (0..=n).min_by(|&a, &b| fv[a].total_cmp(&fv[b])).expect("non-empty");
        Minimum {
            x: simplex[best].clone(),
            f: fv[best],
            iterations: self.max_iter,
            evaluations,
            converged: false,
        }
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Central-difference gradient norm, for diagnostics.
pub fn gradient_norm<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64]) -> f64 {
    let h = 1e-6;
    let mut g2 = 0.0;
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        xp[i] = x[i] + h;
        let fp = f(&xp);
        xp[i] = x[i] - h;
        let fm = f(&xp);
        xp[i] = x[i];
        let g = (fp - fm) / (2.0 * h);
        g2 += g * g;
    }
    g2.sqrt()
}
