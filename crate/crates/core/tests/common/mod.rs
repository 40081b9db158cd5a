#![allow(dead_code)]

use declust::{
    simulate_replicate, BaseFilterState, Catalog, Event, FunctionalState, GaussianModel,
    Location, ModelParams, NuConvention, Region, SimConfig, TargetFunctional,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Parameter values used for the large synthetic catalogs.
pub fn reference_params() -> ModelParams<f64> {
    ModelParams::new(0.1070, 1.3274, 0.0126, 0.0070, 0.2035).unwrap()
}

/// 34°–39°N, 131°–140°E.
pub fn reference_region() -> Region<f64> {
    Region::new(131.0, 140.0, 34.0, 39.0).unwrap()
}

pub fn reference_model() -> GaussianModel<f64> {
    GaussianModel::new(reference_params(), reference_region())
}

/// A random small problem: parameters, region and convention drawn from
/// `seed`, and a simulated catalog of 1 to `max_n` events.
pub fn small_draw(seed: u64, max_n: usize) -> (Catalog<f64>, GaussianModel<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(0xD1CE ^ seed);
    let w = rng.random_range(0.5..3.0);
    let h = rng.random_range(0.5..3.0);
    let x0 = rng.random_range(-10.0..10.0);
    let y0 = rng.random_range(-10.0..10.0);
    let region = Region::new(x0, x0 + w, y0, y0 + h).unwrap();
    let nu = if rng.random_bool(0.25) {
        NuConvention::Lebesgue
    } else {
        NuConvention::Probability
    };
    let scale = match nu {
        NuConvention::Probability => 1.0,
        NuConvention::Lebesgue => 1.0 / region.area(),
    };
    let params = ModelParams::new(
        rng.random_range(0.2..2.0) * scale,
        rng.random_range(0.5..8.0),
        rng.random_range(0.05..1.5) * scale,
        rng.random_range(0.002..0.08),
        rng.random_range(0.05..0.95),
    )
    .unwrap();
    let model = GaussianModel::new(params, region).with_nu(nu);
    let n = rng.random_range(1..=max_n);
    let cfg = SimConfig::new(model, 200.0, seed).unwrap();
    for rep in 0.. {
        let (cat, _) = simulate_replicate(&cfg, rep).unwrap();
        if cat.len() >= n {
            return (cat.truncated(n), model);
        }
    }
    unreachable!()
}

/// Random filter state with `k` candidate mothers, excess rates in
/// `[-0.05, 0.5]` and some exact zeros among the probabilities.
pub fn random_state(rng: &mut ChaCha8Rng, k: usize) -> BaseFilterState<f64> {
    let mut weights: Vec<f64> = (0..=k)
        .map(|_| {
            if rng.random_bool(0.15) {
                0.0
            } else {
                rng.random::<f64>()
            }
        })
        .collect();
    if weights.iter().all(|&w| w == 0.0) {
        weights[0] = 1.0;
    }
    let total: f64 = weights.iter().sum();
    let inactive = weights[0] / total;
    let pis: Vec<f64> = weights[1..].iter().map(|w| w / total).collect();
    let mothers = (1..=k)
        .map(|i| {
            let ev = Event {
                index: i,
                t: i as f64,
                loc: Location::new(0.0, 0.0),
            };
            (ev, rng.random_range(-0.05..0.5))
        })
        .collect();
    BaseFilterState::from_parts(k as f64, mothers, pis, inactive).unwrap()
}

/// Random frozen functional dominated componentwise by `base`.
pub fn random_functional(rng: &mut ChaCha8Rng, base: &BaseFilterState<f64>) -> FunctionalState<f64> {
    let x = base.pis().iter().map(|&p| p * rng.random::<f64>()).collect();
    let r = base.inactive() * rng.random::<f64>();
    FunctionalState::from_parts(TargetFunctional::ActiveAt(0.0), base.t(), x, r).unwrap()
}

/// Classical fourth-order Runge–Kutta for `y' = f(y)` over `[0, dt]`.
pub fn rk4<F>(f: F, y0: &[f64], dt: f64, steps: usize) -> Vec<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let h = dt / steps as f64;
    let mut y = y0.to_vec();
    let axpy = |y: &[f64], k: &[f64], a: f64| -> Vec<f64> {
        y.iter().zip(k).map(|(y, k)| y + a * k).collect()
    };
    for _ in 0..steps {
        let k1 = f(&y);
        let k2 = f(&axpy(&y, &k1, h / 2.0));
        let k3 = f(&axpy(&y, &k2, h / 2.0));
        let k4 = f(&axpy(&y, &k3, h));
        for i in 0..y.len() {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    y
}

/// Right-hand side of the silent-interval equations for the base
/// probabilities and one frozen functional, packed as
/// `[π₁..π_k, ι, x₁..x_k, r]` with `r = π(f) − Σ xⱼ`:
///
/// `πⱼ' = πⱼ (s − cⱼ)`, `ι' = ι s`, `xⱼ' = xⱼ (s − cⱼ)`, `r' = r s`,
/// with `s = Σ cⱼ πⱼ / (Σ πⱼ + ι)`. Writing `s` relative to the total mass
/// makes that mass a conserved quantity; with `s = Σ cⱼ πⱼ` alone the same
/// solution is an unstable equilibrium and roundoff grows like `e^{∫ s}`.
/// For the same reason the functional is carried through `r` rather than
/// `π(f)' = π(f) s − Σ cⱼ xⱼ`.
pub fn silent_rhs(c: &[f64]) -> impl Fn(&[f64]) -> Vec<f64> + '_ {
    move |y: &[f64]| {
        let k = c.len();
        let mass: f64 = y[..=k].iter().sum();
        let s: f64 = (0..k).map(|j| c[j] * y[j]).sum::<f64>() / mass;
        let mut out = vec![0.0; 2 * k + 2];
        for j in 0..k {
            out[j] = y[j] * (s - c[j]);
            out[k + 1 + j] = y[k + 1 + j] * (s - c[j]);
        }
        out[k] = y[k] * s;
        out[2 * k + 1] = y[2 * k + 1] * s;
        out
    }
}

/// Simulated catalog at the reference parameters with at least `n` events,
/// truncated to exactly `n`.
pub fn reference_catalog(n: usize, seed: u64) -> Catalog<f64> {
    let model = reference_model();
    let horizon = 1.5 * n as f64 / 0.129 + 1000.0;
    let cfg = SimConfig::new(model, horizon, seed).unwrap();
    let (cat, _) = declust::simulate(&cfg).unwrap();
    assert!(cat.len() >= n, "only {} events simulated", cat.len());
    cat.truncated(n)
}
