//! Box-constrained Nelder-Mead.
//!
//! The objective is only ever called inside the box. A vertex outside it
//! scores the objective at its projection plus a penalty proportional to
//! the distance, so the simplex is pushed back without collapsing onto a
//! face.

#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(pairs: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let (lower, upper) = pairs.into_iter().unzip();
        Bounds { lower, upper }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn project(&self, x: &mut [f64]) {
        for ((v, &lo), &hi) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(lo, hi);
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(&self.lower)
            .zip(&self.upper)
            .all(|((v, lo), hi)| (*lo..=*hi).contains(v))
    }

    /// Uniform draw inside the box.
    pub fn sample(&self, rng: &mut impl rand::Rng) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&lo, &hi)| {
                if hi > lo {
                    rng.random_range(lo..=hi)
                } else {
                    lo
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    /// Convergence on the spread of objective values across the simplex.
    pub f_tol: f64,
    /// Convergence on simplex extent, relative to each bound's width.
    pub x_tol: f64,
    /// Initial edge length as a fraction of each bound's width.
    pub initial_step: f64,
    /// Fresh simplices built around the incumbent after convergence, until
    /// one fails to improve it.
    pub max_restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions {
            max_evals: 4000,
            f_tol: 1e-9,
            x_tol: 1e-6,
            initial_step: 0.1,
            max_restarts: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub fx: f64,
    pub evals: usize,
    pub converged: bool,
}

pub fn nelder_mead<F>(f: F, x0: &[f64], bounds: &Bounds, opts: &NelderMeadOptions) -> Minimum
where
    F: Fn(&[f64]) -> f64,
{
    let mut best = simplex_search(&f, x0, bounds, opts, opts.max_evals);
    for _ in 0..opts.max_restarts {
        if best.evals >= opts.max_evals || !best.fx.is_finite() {
            break;
        }
        let next = simplex_search(&f, &best.x, bounds, opts, opts.max_evals - best.evals);
        let evals = best.evals + next.evals;
        let improved = best.fx - next.fx > opts.f_tol * (1.0 + best.fx.abs());
        if next.fx <= best.fx {
            best = Minimum { evals, ..next };
        } else {
            best.evals = evals;
            best.converged &= next.converged;
        }
        if !improved {
            break;
        }
    }
    best
}

fn simplex_search<F>(
    f: &F,
    x0: &[f64],
    bounds: &Bounds,
    opts: &NelderMeadOptions,
    max_evals: usize,
) -> Minimum
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    debug_assert_eq!(n, bounds.dim());
    let widths: Vec<f64> = bounds
        .lower
        .iter()
        .zip(&bounds.upper)
        .map(|(l, u)| u - l)
        .collect();
    let evals = std::cell::Cell::new(0usize);
    let eval = |x: &mut Vec<f64>| {
        let mut inside = x.clone();
        bounds.project(&mut inside);
        evals.set(evals.get() + 1);
        let v = f(&inside);
        if v.is_nan() {
            return f64::INFINITY;
        }
        let excess: f64 = x
            .iter()
            .zip(&inside)
            .zip(&widths)
            .map(|((a, b), w)| if *w > 0.0 { (a - b).abs() / w } else { 0.0 })
            .sum();
        v + excess * (1.0 + v.abs())
    };

    let mut start = x0.to_vec();
    let f0 = eval(&mut start);
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(start.clone(), f0)];
    for i in 0..n {
        let mut v = start.clone();
        let step = opts.initial_step * widths[i];
        v[i] = if v[i] + step <= bounds.upper[i] {
            v[i] + step
        } else {
            v[i] - step
        };
        let fv = eval(&mut v);
        simplex.push((v, fv));
    }

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut converged = false;
    while evals.get() < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let f_spread = (worst - best).abs();
        let x_spread = (0..n)
            .map(|k| {
                let (lo, hi) = simplex
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (v, _)| {
                        (lo.min(v[k]), hi.max(v[k]))
                    });
                if widths[k] > 0.0 {
                    (hi - lo) / widths[k]
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max);
        if f_spread <= opts.f_tol * (1.0 + best.abs()) && x_spread <= opts.x_tol {
            converged = true;
            break;
        }

        let mut centroid = vec![0.0; n];
        for (v, _) in &simplex[..n] {
            for k in 0..n {
                centroid[k] += v[k] / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            (0..n)
                .map(|k| centroid[k] + t * (simplex[n].0[k] - centroid[k]))
                .collect()
        };

        let mut xr = along(-alpha);
        let fr = eval(&mut xr);
        if fr < simplex[0].1 {
            let mut xe = along(-gamma);
            let fe = eval(&mut xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (mut xc, outside) = if fr < worst {
            (along(-rho), true)
        } else {
            (along(rho), false)
        };
        let fc = eval(&mut xc);
        if (outside && fc <= fr) || (!outside && fc < worst) {
            simplex[n] = (xc, fc);
            continue;
        }
        let best_x = simplex[0].0.clone();
        for item in simplex.iter_mut().skip(1) {
            let mut v: Vec<f64> = best_x
                .iter()
                .zip(&item.0)
                .map(|(b, x)| b + sigma * (x - b))
                .collect();
            let fv = eval(&mut v);
            *item = (v, fv);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (mut x, mut fx) = simplex.swap_remove(0);
    if !bounds.contains(&x) {
        bounds.project(&mut x);
        fx = eval(&mut x);
    }
    Minimum {
        x,
        fx,
        evals: evals.get(),
        converged: converged && fx.is_finite(),
    }
}
