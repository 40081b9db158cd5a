use declust::{
    simulate, simulate_replicate, Catalog, ClusterIntensity, GaussianModel, HiddenLabel,
    LabeledPath, ModelParams, Region, SimConfig,
};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Offspring counts of every cluster that was closed before the horizon.
fn completed_cluster_offspring(path: &LabeledPath) -> Vec<usize> {
    let mut out = Vec::new();
    let mut current: Option<usize> = None;
    for label in path.labels() {
        match label {
            HiddenLabel::Mother => current = Some(0),
            HiddenLabel::Offspring { kills } => {
                let c = current.as_mut().expect("offspring inside a cluster");
                *c += 1;
                if *kills {
                    out.push(*c);
                    current = None;
                }
            }
            HiddenLabel::Noise => {}
        }
    }
    out
}

/// Waiting times standardized by the rate of the regime they were drawn
/// under: `1 − exp(−rate · wait)` is uniform on `[0, 1]`.
fn standardized_waits(cat: &Catalog<f64>, path: &LabeledPath, model: &GaussianModel<f64>) -> Vec<f64> {
    let mut prev = 0.0;
    let mut out = Vec::with_capacity(cat.len());
    for ev in cat.events() {
        let (active, mother) = path.state_before(ev.index);
        let cluster = if active {
            model.offspring_total(&cat.events()[mother - 1])
        } else {
            model.initiation_total()
        };
        let rate = model.noise_total() + cluster;
        out.push(1.0 - (-rate * (ev.t - prev)).exp());
        prev = ev.t;
    }
    out
}

fn ks_statistic(mut u: Vec<f64>) -> f64 {
    u.sort_by(f64::total_cmp);
    let n = u.len() as f64;
    u.iter()
        .enumerate()
        .map(|(i, &x)| {
            let lo = x - i as f64 / n;
            let hi = (i + 1) as f64 / n - x;
            lo.max(hi)
        })
        .fold(0.0, f64::max)
}

fn fast_cluster_model(p: f64) -> GaussianModel<f64> {
    // short clusters: offspring total ≈ 8/day, initiation 1/day
    let region = Region::new(0.0, 4.0, 0.0, 4.0).unwrap();
    GaussianModel::new(ModelParams::new(0.5, 128.0, 1.0, 0.01, p).unwrap(), region)
}

#[test]
fn waiting_times_are_exponential_per_regime() {
    let model = fast_cluster_model(0.2035);
    let cfg = SimConfig::new(model, 4000.0, 21).unwrap();
    let (cat, path) = simulate(&cfg).unwrap();
    assert!(cat.len() > 10_000);
    let u = standardized_waits(&cat, &path, &model);
    let d = ks_statistic(u.clone());
    // critical value at the 1% level
    let crit = 1.628 / (u.len() as f64).sqrt();
    assert!(d < crit, "KS {d} vs {crit}");
}

#[test]
fn offspring_counts_are_geometric() {
    let p = 0.2035;
    let model = fast_cluster_model(p);
    let cfg = SimConfig::new(model, 20_000.0, 5).unwrap();
    let (_, path) = simulate(&cfg).unwrap();
    let counts = completed_cluster_offspring(&path);
    let m = counts.len();
    assert!(m >= 10_000, "{m} clusters");

    let mean = counts.iter().sum::<usize>() as f64 / m as f64;
    let sd = ((1.0 - p) / (p * p) / m as f64).sqrt();
    assert!((mean - 1.0 / p).abs() < 3.0 * sd, "mean {mean}");

    // P(N = k) = (1 − p)^{k−1} p, pooled into a tail bin once expectations
    // drop below 5
    let mut observed = Vec::new();
    let mut expected = Vec::new();
    let mut k = 1;
    loop {
        let e = m as f64 * (1.0 - p).powi(k as i32 - 1) * p;
        let tail = m as f64 * (1.0 - p).powi(k as i32);
        if tail < 5.0 {
            observed.push(counts.iter().filter(|&&c| c >= k).count() as f64);
            expected.push(e + tail);
            break;
        }
        observed.push(counts.iter().filter(|&&c| c == k).count() as f64);
        expected.push(e);
        k += 1;
    }
    let chi2: f64 = observed
        .iter()
        .zip(&expected)
        .map(|(o, e)| (o - e).powi(2) / e)
        .sum();
    let crit = ChiSquared::new((observed.len() - 1) as f64)
        .unwrap()
        .inverse_cdf(0.99);
    assert!(chi2 < crit, "chi2 {chi2} vs {crit}");
}

#[test]
fn noise_count_is_poisson_without_initiation() {
    let region = Region::new(0.0, 1.0, 0.0, 1.0).unwrap();
    let model = GaussianModel::new(ModelParams::new(0.3, 2.0, 0.0, 0.01, 0.5).unwrap(), region);
    let horizon = 100.0;
    let cfg = SimConfig::new(model, horizon, 99).unwrap();
    let reps = 1000;
    let mut total = 0usize;
    for r in 0..reps {
        let (cat, path) = simulate_replicate(&cfg, r).unwrap();
        assert!(path.labels().iter().all(|l| *l == HiddenLabel::Noise));
        total += cat.len();
    }
    let mean = total as f64 / reps as f64;
    let lam = 0.3 * horizon;
    assert!((mean - lam).abs() < 3.0 * (lam / reps as f64).sqrt(), "{mean}");
}

#[test]
fn offspring_scatter_matches_kernel_variance() {
    let region = Region::new(0.0_f64, 100.0, 0.0, 100.0).unwrap();
    let d = 0.04;
    let model = GaussianModel::new(ModelParams::new(0.05, 4e4, 0.5, d, 0.05).unwrap(), region);
    let cfg = SimConfig::new(model, 3000.0, 8).unwrap();
    let (cat, path) = simulate(&cfg).unwrap();
    let events = cat.events();
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
    for (k, label) in path.labels().iter().enumerate() {
        if let HiddenLabel::Offspring { .. } = label {
            let (_, m) = path.state_before(k + 1);
            let mloc = events[m - 1].loc;
            // interior mothers only, so truncation is negligible
            if mloc.lon < 2.0 || mloc.lon > 98.0 || mloc.lat < 2.0 || mloc.lat > 98.0 {
                continue;
            }
            sx += (events[k].loc.lon - mloc.lon).powi(2);
            sy += (events[k].loc.lat - mloc.lat).powi(2);
            n += 1;
        }
    }
    assert!(n > 5000, "{n}");
    for v in [sx / n as f64, sy / n as f64] {
        assert!(((v - d) / d).abs() < 0.05, "variance {v}");
    }
    assert!(events.iter().all(|e| region.contains(&e.loc)));
}

#[test]
fn open_cluster_at_horizon_is_kept_open() {
    // p small and a short horizon: the final cluster is very likely open
    let region = Region::new(0.0, 1.0, 0.0, 1.0).unwrap();
    let model = GaussianModel::new(ModelParams::new(0.1, 5.0, 5.0, 0.01, 0.01).unwrap(), region);
    let cfg = SimConfig::new(model, 50.0, 2).unwrap();
    let (_, path) = simulate(&cfg).unwrap();
    assert_eq!(path.active().last(), Some(&true));
}
