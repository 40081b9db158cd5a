//! Exact inference by enumerating every hidden labeling of a small catalog.
//!
//! A hidden history is a cluster-state trajectory `D(t)` together with the
//! assignment of each event to noise or to the current cluster. On valid
//! histories this is the same thing as a label sequence: `Noise` is always
//! allowed, `Mother` only while no cluster is active (it sets `D = 1` and
//! makes the event the latest mother), and `Offspring { kills }` only while
//! a cluster is active (it keeps `D = 1` or ends the cluster). Enumerating
//! label sequences therefore visits each valid history exactly once and no
//! invalid one.
//!
//! Path log-weights follow the convention of
//! [`path_weight`](crate::decoder::path_weight), so the log-sum-exp over all
//! paths is the log-likelihood.

use crate::error::{Error, Result};
use crate::model::{Catalog, ClusterIntensity, Event, HiddenLabel, LabeledPath};
use crate::scalar::{ln_or_neg_inf, LogSumExp, Scalar};

/// Largest catalog the enumeration accepts.
pub const MAX_ORACLE_EVENTS: usize = 14;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPath<T> {
    pub path: LabeledPath,
    pub log_weight: T,
}

/// Exact per-event posteriors.
#[derive(Debug, Clone, PartialEq)]
pub struct OraclePosteriors<T> {
    pub log_likelihood: T,
    /// Probability that event `i` is a mother or offspring (entry `i − 1`).
    pub membership: Vec<T>,
    /// Probability that a cluster is active just after event `i`.
    pub active: Vec<T>,
    pub argmax: WeightedPath<T>,
}

struct Enumerator<'a, T, M> {
    events: &'a [Event<T>],
    model: &'a M,
    horizon: Option<T>,
    log_noise: Vec<T>,
    log_init: Vec<T>,
    log_p: T,
    log_q: T,
    labels: Vec<HiddenLabel>,
}

impl<T: Scalar, M: ClusterIntensity<T>> Enumerator<'_, T, M> {
    /// Depth-first walk. `lw` holds the weight of the labeled prefix and
    /// `(active, mother)` the state after it.
    fn walk<F: FnMut(&[HiddenLabel], T)>(
        &mut self,
        pos: usize,
        prev_t: T,
        active: bool,
        mother: usize,
        lw: T,
        visit: &mut F,
    ) {
        let model = self.model;
        let events = self.events;
        let mother_total = if active {
            model.offspring_total(&events[mother - 1])
        } else {
            model.initiation_total()
        };
        if pos == events.len() {
            let end = match self.horizon {
                Some(h) => lw - mother_total * (h - prev_t) - model.noise_total() * h,
                None => lw - model.noise_total() * prev_t,
            };
            visit(&self.labels, end);
            return;
        }
        let ev = &events[pos];
        let base = lw - mother_total * (ev.t - prev_t);

        self.labels.push(HiddenLabel::Noise);
        self.walk(pos + 1, ev.t, active, mother, base + self.log_noise[pos], visit);
        self.labels.pop();

        if active {
            let lk = ln_or_neg_inf(model.offspring_density(ev, &events[mother - 1]));
            self.labels.push(HiddenLabel::Offspring { kills: true });
            self.walk(pos + 1, ev.t, false, mother, base + lk + self.log_p, visit);
            self.labels.pop();
            self.labels.push(HiddenLabel::Offspring { kills: false });
            self.walk(pos + 1, ev.t, true, mother, base + lk + self.log_q, visit);
            self.labels.pop();
        } else {
            self.labels.push(HiddenLabel::Mother);
            self.walk(pos + 1, ev.t, true, ev.index, base + self.log_init[pos], visit);
            self.labels.pop();
        }
    }
}

/// Streams every valid labeling with its log-weight. With a horizon the
/// weights include survival of the final regime up to the horizon.
pub fn visit_paths<T, M, F>(
    catalog: &Catalog<T>,
    model: &M,
    horizon: Option<T>,
    mut visit: F,
) -> Result<()>
where
    T: Scalar,
    M: ClusterIntensity<T>,
    F: FnMut(&[HiddenLabel], T),
{
    let n = catalog.len();
    if n > MAX_ORACLE_EVENTS {
        return Err(Error::TooManyEvents {
            n,
            max: MAX_ORACLE_EVENTS,
        });
    }
    let last = catalog.last_time().unwrap_or_else(T::zero);
    if let Some(h) = horizon {
        if !(h >= last) || !h.is_finite() {
            return Err(Error::TimeReversal {
                from: last.to_f64_lossy(),
                to: h.to_f64_lossy(),
            });
        }
    }
    let events = catalog.events();
    let mut en = Enumerator {
        events,
        model,
        horizon,
        log_noise: events
            .iter()
            .map(|e| ln_or_neg_inf(model.noise_density(e)))
            .collect(),
        log_init: events
            .iter()
            .map(|e| ln_or_neg_inf(model.initiation_density(e)))
            .collect(),
        log_p: ln_or_neg_inf(model.kill_probability()),
        log_q: ln_or_neg_inf(model.survive_probability()),
        labels: Vec::with_capacity(n),
    };
    en.walk(0, T::zero(), false, 0, T::zero(), &mut visit);
    Ok(())
}

/// Every valid labeling with its log-weight, in depth-first order (noise
/// branch first).
pub fn enumerate_paths<T: Scalar, M: ClusterIntensity<T>>(
    catalog: &Catalog<T>,
    model: &M,
) -> Result<Vec<WeightedPath<T>>> {
    let mut out = Vec::new();
    visit_paths(catalog, model, None, |labels, lw| {
        out.push(WeightedPath {
            path: LabeledPath::from_labels(labels.to_vec()).expect("enumerated paths are valid"),
            log_weight: lw,
        });
    })?;
    Ok(out)
}

/// Log-sum-exp of all path weights.
pub fn oracle_loglik<T: Scalar, M: ClusterIntensity<T>>(
    catalog: &Catalog<T>,
    model: &M,
    horizon: Option<T>,
) -> Result<T> {
    if catalog.is_empty() && horizon.is_none() {
        return Err(Error::EmptyCatalog);
    }
    let mut acc = LogSumExp::default();
    visit_paths(catalog, model, horizon, |_, lw| acc.push(lw))?;
    Ok(acc.value())
}

/// Exact membership and activity probabilities, and the heaviest path.
/// Ties for the heaviest path keep the first one visited.
pub fn oracle_posteriors<T: Scalar, M: ClusterIntensity<T>>(
    catalog: &Catalog<T>,
    model: &M,
    horizon: Option<T>,
) -> Result<OraclePosteriors<T>> {
    let n = catalog.len();
    if n == 0 {
        return Err(Error::EmptyCatalog);
    }
    let mut total = LogSumExp::default();
    let mut member = vec![LogSumExp::default(); n];
    let mut active = vec![LogSumExp::default(); n];
    let mut best_w = T::neg_infinity();
    let mut best: Option<Vec<HiddenLabel>> = None;
    visit_paths(catalog, model, horizon, |labels, lw| {
        total.push(lw);
        let mut d = false;
        for (k, label) in labels.iter().enumerate() {
            match label {
                HiddenLabel::Noise => {}
                HiddenLabel::Mother => d = true,
                HiddenLabel::Offspring { kills } => d = !kills,
            }
            if label.is_cluster() {
                member[k].push(lw);
            }
            if d {
                active[k].push(lw);
            }
        }
        if best.is_none() || lw > best_w {
            best_w = lw;
            best = Some(labels.to_vec());
        }
    })?;
    let ll = total.value();
    let prob = |acc: &LogSumExp<T>| (acc.value() - ll).exp();
    Ok(OraclePosteriors {
        log_likelihood: ll,
        membership: member.iter().map(prob).collect(),
        active: active.iter().map(prob).collect(),
        argmax: WeightedPath {
            path: LabeledPath::from_labels(best.unwrap_or_default())?,
            log_weight: best_w,
        },
    })
}
