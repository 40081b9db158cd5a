//! Maximum likelihood fitting by Nelder–Mead over transformed parameters.
//!
//! The search runs on `(log γ, log λ, log ε, log d, logit p)`, which keeps
//! every candidate inside the parameter domain. Several restarts from
//! jittered copies of the initial point run in parallel; the best is kept.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::likelihood::log_likelihood;
use crate::model::{Catalog, GaussianModel, ModelParams, NuConvention};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadConfig {
    /// Largest vertex distance from the best vertex (max norm).
    pub simplex_tol: f64,
    /// Spread of objective values across the simplex.
    pub value_tol: f64,
    pub max_iter: usize,
    /// Edge length of the initial simplex along each axis.
    pub initial_step: f64,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        Self {
            simplex_tol: 1e-6,
            value_tol: 1e-8,
            max_iter: 5000,
            initial_step: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
    /// Best value after each iteration.
    pub trace: Vec<f64>,
}

/// Minimizes `objective` from `x0`. Non-finite objective values count as
/// `+∞`; a non-finite value at `x0` is an error.
pub fn nelder_mead<F>(mut objective: F, x0: &[f64], config: &NelderMeadConfig) -> Result<NelderMeadResult>
where
    F: FnMut(&[f64]) -> f64,
{
    const ALPHA: f64 = 1.0;
    const GAMMA: f64 = 2.0;
    const RHO: f64 = 0.5;
    const SIGMA: f64 = 0.5;

    let n = x0.len();
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        let v = objective(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let f0 = eval(x0);
    if !f0.is_finite() {
        return Err(Error::NonFiniteStart);
    }
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f0));
    for k in 0..n {
        let mut x = x0.to_vec();
        x[k] += config.initial_step;
        let f = eval(&x);
        simplex.push((x, f));
    }

    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = &simplex[0];
        let size = simplex[1..]
            .iter()
            .map(|(x, _)| {
                x.iter()
                    .zip(&best.0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        let spread = simplex[n].1 - simplex[0].1;
        if size < config.simplex_tol && spread.abs() < config.value_tol {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / n as f64;
            }
        }
        let along = |coef: f64, worst: &[f64]| -> Vec<f64> {
            centroid
                .iter()
                .zip(worst)
                .map(|(c, w)| c + coef * (c - w))
                .collect()
        };
        let worst = simplex[n].0.clone();
        let f_worst = simplex[n].1;
        let f_second = simplex[n - 1].1;
        let f_best = simplex[0].1;

        let xr = along(ALPHA, &worst);
        let fr = eval(&xr);
        if fr < f_best {
            let xe = along(GAMMA, &worst);
            let fe = eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < f_second {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < f_worst {
                let xc = along(RHO, &worst);
                let fc = eval(&xc);
                (xc, fc)
            } else {
                let xc = along(-RHO, &worst);
                let fc = eval(&xc);
                (xc, fc)
            };
            if fc < fr.min(f_worst) {
                simplex[n] = (xc, fc);
            } else {
                let x_best = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = x_best
                        .iter()
                        .zip(&vertex.0)
                        .map(|(b, v)| b + SIGMA * (v - b))
                        .collect();
                    let f = eval(&x);
                    *vertex = (x, f);
                }
            }
        }
        let current = simplex.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
        trace.push(current);
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, f) = simplex.swap_remove(0);
    Ok(NelderMeadResult {
        x,
        f,
        converged,
        iterations,
        evaluations,
        trace,
    })
}

/// Parameters as the unconstrained search vector.
pub fn to_search_space<T: Scalar>(p: &ModelParams<T>) -> [f64; 5] {
    let pp = p.p.to_f64_lossy();
    [
        p.gamma.to_f64_lossy().ln(),
        p.lambda.to_f64_lossy().ln(),
        p.epsilon.to_f64_lossy().ln(),
        p.d.to_f64_lossy().ln(),
        (pp / (1.0 - pp)).ln(),
    ]
}

pub fn from_search_space<T: Scalar>(x: &[f64]) -> Result<ModelParams<T>> {
    if x.len() != 5 {
        return Err(Error::LengthMismatch {
            expected: 5,
            actual: x.len(),
        });
    }
    let p = 1.0 / (1.0 + (-x[4]).exp());
    ModelParams::new(
        T::lit(x[0].exp()),
        T::lit(x[1].exp()),
        T::lit(x[2].exp()),
        T::lit(x[3].exp()),
        T::lit(p),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig<T> {
    pub init: ModelParams<T>,
    pub optimizer: NelderMeadConfig,
    pub restarts: usize,
    /// Half-width of the uniform jitter applied to every transformed
    /// coordinate of restarts after the first.
    pub perturbation: f64,
    pub seed: u64,
    pub horizon: Option<T>,
    pub nu: NuConvention,
}

impl<T: Scalar> FitConfig<T> {
    pub fn new(init: ModelParams<T>) -> Self {
        Self {
            init,
            optimizer: NelderMeadConfig::default(),
            restarts: 5,
            perturbation: 0.5,
            seed: 0,
            horizon: None,
            nu: NuConvention::Probability,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.init.validate()?;
        if self.init.epsilon <= T::zero() {
            return Err(Error::InvalidConfig(
                "initial epsilon must be positive for the log transform".into(),
            ));
        }
        if self.init.p >= T::one() {
            return Err(Error::InvalidConfig(
                "initial p must be below 1 for the logit transform".into(),
            ));
        }
        if self.init.lambda <= T::zero() {
            return Err(Error::InvalidConfig(
                "initial lambda must be positive for the log transform".into(),
            ));
        }
        let o = &self.optimizer;
        if !(o.simplex_tol > 0.0 && o.value_tol > 0.0 && o.initial_step > 0.0) {
            return Err(Error::InvalidConfig("tolerances and step must be positive".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidConfig("at least one restart is required".into()));
        }
        if !(self.perturbation >= 0.0) {
            return Err(Error::InvalidConfig("perturbation must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult<T> {
    pub params: ModelParams<T>,
    pub loglik: T,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
    /// Best log-likelihood after each iteration of the winning restart.
    pub trace: Vec<f64>,
    /// Index of the winning restart.
    pub restart: usize,
}

/// Start points: the initial point, then jittered copies drawn from the
/// configured seed.
pub fn restart_points<T: Scalar>(config: &FitConfig<T>) -> Vec<[f64; 5]> {
    let x0 = to_search_space(&config.init);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut out = vec![x0];
    for _ in 1..config.restarts {
        let mut x = x0;
        for v in x.iter_mut() {
            if config.perturbation > 0.0 {
                *v += rng.random_range(-config.perturbation..=config.perturbation);
            }
        }
        out.push(x);
    }
    out
}

/// Maximizes the log-likelihood of `catalog` over all five parameters.
pub fn fit_mle<T: Scalar>(catalog: &Catalog<T>, config: &FitConfig<T>) -> Result<FitResult<T>> {
    config.validate()?;
    if catalog.is_empty() {
        return Err(Error::EmptyCatalog);
    }
    let region = *catalog.region();
    let template = GaussianModel::new(config.init, region).with_nu(config.nu);
    let objective = |x: &[f64]| -> f64 {
        let Ok(params) = from_search_space::<T>(x) else {
            return f64::INFINITY;
        };
        match log_likelihood(catalog, &template.with_params(params), config.horizon) {
            Ok(v) if v.is_finite() => -v.to_f64_lossy(),
            _ => f64::INFINITY,
        }
    };
    let starts = restart_points(config);
    let runs: Vec<(usize, Result<NelderMeadResult>)> = starts
        .par_iter()
        .enumerate()
        .map(|(k, x0)| (k, nelder_mead(objective, x0, &config.optimizer)))
        .collect();
    let mut best: Option<(usize, NelderMeadResult)> = None;
    for (k, run) in runs {
        let Ok(run) = run else { continue };
        if !run.f.is_finite() {
            continue;
        }
        // ties keep the earlier restart so the outcome is order independent
        if best.as_ref().is_none_or(|(_, b)| run.f < b.f) {
            best = Some((k, run));
        }
    }
    let (restart, run) = best.ok_or(Error::FitFailed)?;
    Ok(FitResult {
        params: from_search_space(&run.x)?,
        loglik: T::lit(-run.f),
        converged: run.converged,
        iterations: run.iterations,
        evaluations: run.evaluations,
        trace: run.trace.iter().map(|v| -v).collect(),
        restart,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let r = nelder_mead(
            |x| x.iter().map(|v| (v - 3.0).powi(2)).sum(),
            &[0.0; 4],
            &NelderMeadConfig::default(),
        )
        .unwrap();
        assert!(r.converged);
        for v in &r.x {
            assert!((v - 3.0).abs() < 1e-6, "{v}");
        }
    }

    #[test]
    fn plateau_converges_at_plateau_value() {
        let r = nelder_mead(|_| 2.5, &[1.0, -1.0], &NelderMeadConfig::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.f, 2.5);
    }

    #[test]
    fn trace_is_monotone() {
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let r = nelder_mead(rosen, &[-1.2, 1.0], &NelderMeadConfig::default()).unwrap();
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn non_finite_start_is_an_error() {
        let r = nelder_mead(|_| f64::NAN, &[0.0], &NelderMeadConfig::default());
        assert_eq!(r, Err(Error::NonFiniteStart));
    }

    #[test]
    fn non_finite_values_are_avoided() {
        // infinite outside the unit ball; minimum on its boundary region
        let f = |x: &[f64]| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            if r2 > 1.0 {
                f64::NAN
            } else {
                (x[0] - 2.0).powi(2)
            }
        };
        let r = nelder_mead(f, &[0.0, 0.0], &NelderMeadConfig::default()).unwrap();
        assert!(r.f.is_finite());
        assert!(r.x[0] > 0.9);
    }

    #[test]
    fn search_space_round_trip() {
        let p = ModelParams::new(0.107, 1.3274, 0.0126, 0.007, 0.2035).unwrap();
        let back: ModelParams<f64> = from_search_space(&to_search_space(&p)).unwrap();
        for (a, b) in [
            (p.gamma, back.gamma),
            (p.lambda, back.lambda),
            (p.epsilon, back.epsilon),
            (p.d, back.d),
            (p.p, back.p),
        ] {
            assert!((a - b).abs() <= 1e-15 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn restarts_are_seeded() {
        let p = ModelParams::new(0.1, 1.0, 0.01, 0.01, 0.2).unwrap();
        let mut cfg = FitConfig::new(p);
        cfg.seed = 9;
        let a = restart_points(&cfg);
        assert_eq!(a, restart_points(&cfg));
        assert_eq!(a.len(), 5);
        assert_eq!(a[0], to_search_space(&p));
        for x in &a[1..] {
            for (v, v0) in x.iter().zip(&a[0]) {
                assert!((v - v0).abs() <= 0.5);
            }
        }
    }

    #[test]
    fn config_validation() {
        let p = ModelParams::new(0.1, 1.0, 0.01, 0.01, 0.2).unwrap();
        let mut cfg = FitConfig::new(p);
        cfg.restarts = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = FitConfig::new(p);
        cfg.init.p = 1.0;
        assert!(cfg.validate().is_err());
    }
}
