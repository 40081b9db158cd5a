//! Exact simulation of the cluster model by competing exponential clocks.
//!
//! Between events all rates are constant, so the next event time is
//! exponential with the total rate of the current regime and its type is
//! chosen in proportion to the component rates. No cluster is active at
//! time 0. A finite horizon can cut a cluster while it is still open; the
//! returned path then ends with `D = 1`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{
    Catalog, ClusterIntensity, Event, GaussianModel, HiddenLabel, LabeledPath, Location,
};
use crate::scalar::Scalar;

/// Attempts allowed when drawing one truncated-normal offspring location.
pub const MAX_REJECTIONS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig<T> {
    pub model: GaussianModel<T>,
    pub horizon: T,
    pub seed: u64,
}

impl<T: Scalar> SimConfig<T> {
    pub fn new(model: GaussianModel<T>, horizon: T, seed: u64) -> Result<Self> {
        let cfg = Self {
            model,
            horizon,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.params.validate()?;
        if !(self.horizon > T::zero()) || !self.horizon.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "simulation horizon must be positive and finite, got {}",
                self.horizon
            )));
        }
        Ok(())
    }
}

fn uniform_in<T: Scalar, R: Rng>(rng: &mut R, lo: T, hi: T) -> T {
    let u: f64 = rng.random();
    let v = lo + (hi - lo) * T::lit(u);
    v.max(lo).min(hi)
}

fn offspring_location<T: Scalar, R: Rng>(
    rng: &mut R,
    model: &GaussianModel<T>,
    mother: &Event<T>,
) -> Result<Location<T>> {
    let sd = model.params.d.sqrt();
    for _ in 0..MAX_REJECTIONS {
        let zx: f64 = rng.sample(StandardNormal);
        let zy: f64 = rng.sample(StandardNormal);
        let loc = Location::new(
            mother.loc.lon + sd * T::lit(zx),
            mother.loc.lat + sd * T::lit(zy),
        );
        if model.region.contains(&loc) {
            return Ok(loc);
        }
    }
    Err(Error::SamplerExhausted {
        mother: mother.index,
        attempts: MAX_REJECTIONS,
    })
}

/// One run on replicate stream `replicate` of the configured seed. Streams
/// of the same seed are independent.
pub fn simulate_replicate<T: Scalar>(
    config: &SimConfig<T>,
    replicate: u64,
) -> Result<(Catalog<T>, LabeledPath)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(replicate);
    let model = &config.model;
    let region = &model.region;
    let gamma = model.noise_total();
    let eps = model.initiation_total();
    let p = model.params.p.to_f64_lossy();

    let mut events: Vec<Event<T>> = Vec::new();
    let mut labels = Vec::new();
    let mut t = T::zero();
    let mut mother: Option<(Event<T>, T)> = None;
    loop {
        let cluster_rate = match &mother {
            Some((_, a)) => *a,
            None => eps,
        };
        let total = gamma + cluster_rate;
        let wait: f64 = rng.sample(Exp1);
        let next = t + T::lit(wait) / total;
        if !(next < config.horizon) {
            break;
        }
        if !(next > t) {
            // the clock is too fine for the time scale; skip the draw
            continue;
        }
        t = next;
        let index = events.len() + 1;
        let pick: f64 = rng.random();
        let is_noise = T::lit(pick) * total < gamma;
        let (loc, label) = if is_noise {
            let loc = Location::new(
                uniform_in(&mut rng, region.lon_min(), region.lon_max()),
                uniform_in(&mut rng, region.lat_min(), region.lat_max()),
            );
            (loc, HiddenLabel::Noise)
        } else if let Some((m, _)) = &mother {
            let loc = offspring_location(&mut rng, model, m)?;
            let kills = rng.random::<f64>() < p;
            (loc, HiddenLabel::Offspring { kills })
        } else {
            let loc = Location::new(
                uniform_in(&mut rng, region.lon_min(), region.lon_max()),
                uniform_in(&mut rng, region.lat_min(), region.lat_max()),
            );
            (loc, HiddenLabel::Mother)
        };
        let ev = Event { index, t, loc };
        match label {
            HiddenLabel::Mother => mother = Some((ev, model.offspring_total(&ev))),
            HiddenLabel::Offspring { kills: true } => mother = None,
            _ => {}
        }
        events.push(ev);
        labels.push(label);
    }
    let catalog = Catalog::new(*region, events)?;
    Ok((catalog, LabeledPath::from_labels(labels)?))
}

pub fn simulate<T: Scalar>(config: &SimConfig<T>) -> Result<(Catalog<T>, LabeledPath)> {
    simulate_replicate(config, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelParams, Region};

    fn config(eps: f64, p: f64, horizon: f64, seed: u64) -> SimConfig<f64> {
        let region = Region::new(0.0, 10.0, 0.0, 10.0).unwrap();
        let params = ModelParams::new(0.5, 30.0, eps, 0.05, p).unwrap();
        SimConfig::new(GaussianModel::new(params, region), horizon, seed).unwrap()
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = config(0.1, 0.3, 500.0, 7);
        let a = simulate(&cfg).unwrap();
        let b = simulate(&cfg).unwrap();
        assert_eq!(a, b);
        let c = simulate_replicate(&cfg, 1).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn no_initiation_means_no_clusters() {
        let (cat, path) = simulate(&config(0.0, 0.3, 1000.0, 3)).unwrap();
        assert!(!cat.is_empty());
        assert!(path.labels().iter().all(|l| *l == HiddenLabel::Noise));
    }

    #[test]
    fn certain_kill_gives_pairs() {
        let (_, path) = simulate(&config(0.2, 1.0, 2000.0, 11)).unwrap();
        let mut size = 0;
        let mut sizes = Vec::new();
        for l in path.labels() {
            match l {
                HiddenLabel::Mother => size = 1,
                HiddenLabel::Offspring { kills } => {
                    assert!(*kills);
                    sizes.push(size + 1);
                }
                HiddenLabel::Noise => {}
            }
        }
        assert!(!sizes.is_empty());
        assert!(sizes.iter().all(|&s| s == 2));
    }

    #[test]
    fn rejects_bad_horizon() {
        let region = Region::new(0.0, 1.0, 0.0, 1.0).unwrap();
        let params = ModelParams::new(0.5, 30.0, 0.1, 0.05, 0.3).unwrap();
        let model = GaussianModel::new(params, region);
        assert!(SimConfig::new(model, 0.0, 1).is_err());
        assert!(SimConfig::new(model, f64::INFINITY, 1).is_err());
    }

    #[test]
    fn hopeless_truncation_fails_loudly() {
        // mother in a corner of a sliver region with a huge kernel
        let region = Region::new(0.0, 1.0, 0.0, 1e-9).unwrap();
        let params = ModelParams::new(1e-6, 1e6, 1e3, 1e6, 0.5).unwrap();
        let cfg = SimConfig::new(GaussianModel::new(params, region), 10.0, 5).unwrap();
        assert!(matches!(
            simulate(&cfg),
            Err(Error::SamplerExhausted { .. })
        ));
    }
}
