//! Observed-data log-likelihood by the normalized forward recursion.
//!
//! `l_j(d, i)` is proportional to the likelihood of the first `j` events
//! jointly with cluster state `D = d` and latest mother `E = i` just after
//! event `j`. Each step costs `O(j)`, so a catalog of `n` events costs
//! `O(n²)`. The table is rescaled after every step and the log of the
//! rescaling constants is accumulated.
//!
//! Constants common to every hidden history (the noise survival
//! `e^{−Γ t}` aside, which is reported) are dropped.

use crate::error::{Error, Result};
use crate::model::{Catalog, ClusterIntensity, Event};
use crate::scalar::{flush, ln_or_neg_inf, Scalar};
use crate::transition::Transition;

/// Forward table after `j` events.
///
/// `inactive[i] = l_j(0, i)` and `active[i] = l_j(1, i)` for `i = 0..=j`.
/// `active[0]` and `inactive[j]` are always zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardMatrix<T> {
    j: usize,
    t: T,
    inactive: Vec<T>,
    active: Vec<T>,
    log_normalizers: Vec<T>,
    mothers: Vec<(Event<T>, T)>,
}

impl<T: Scalar> ForwardMatrix<T> {
    /// State before any event: no cluster, no mother, at time 0.
    pub fn origin() -> Self {
        Self::origin_with_capacity(0)
    }

    fn origin_with_capacity(n: usize) -> Self {
        let mut inactive = Vec::with_capacity(n + 1);
        let mut active = Vec::with_capacity(n + 1);
        inactive.push(T::one());
        active.push(T::zero());
        Self {
            j: 0,
            t: T::zero(),
            inactive,
            active,
            log_normalizers: Vec::with_capacity(n),
            mothers: Vec::with_capacity(n),
        }
    }

    pub fn step(&self) -> usize {
        self.j
    }

    pub fn time(&self) -> T {
        self.t
    }

    /// `l_j(0, i)` for `i = 0..=j`.
    pub fn inactive(&self) -> &[T] {
        &self.inactive
    }

    /// `l_j(1, i)` for `i = 0..=j`.
    pub fn active(&self) -> &[T] {
        &self.active
    }

    /// `log c_1, …, log c_j`.
    pub fn log_normalizers(&self) -> &[T] {
        &self.log_normalizers
    }

    pub fn mass(&self) -> T {
        self.inactive.iter().copied().sum::<T>() + self.active.iter().copied().sum::<T>()
    }

    /// Posterior probability that the cluster of mother `i` is active just
    /// after the current event, for `i = 1..=j` (entry `i − 1`).
    pub fn active_posterior(&self) -> Vec<T> {
        let m = self.mass();
        self.active[1..].iter().map(|&v| v / m).collect()
    }

    fn check_next(&self, event: &Event<T>) -> Result<()> {
        if event.index != self.j + 1 {
            return Err(Error::BadIndex {
                position: self.j + 1,
                found: event.index,
            });
        }
        let ordered = if self.j == 0 {
            event.t >= self.t
        } else {
            event.t > self.t
        };
        if !ordered || !event.t.is_finite() {
            return Err(Error::NonIncreasing {
                index: event.index,
                t: event.t.to_f64_lossy(),
                prev: self.t.to_f64_lossy(),
            });
        }
        Ok(())
    }

    /// Unnormalized update in place; returns the new table sum.
    fn advance<M: ClusterIntensity<T>>(
        &mut self,
        event: &Event<T>,
        model: &M,
        trans: &mut Transition<T>,
    ) -> Result<T> {
        self.check_next(event)?;
        trans.compute(model, event, self.t, &self.mothers);
        let j = self.j + 1;
        let prior_inactive: T = self.inactive.iter().copied().sum();
        let mut total = T::zero();
        {
            let v = trans.noise_inactive * self.inactive[0];
            self.inactive[0] = v;
            total = total + v;
        }
        for i in 1..j {
            let b = trans.mothers[i];
            let a = self.active[i];
            let off = trans.noise_inactive * self.inactive[i] + b.kill * a;
            let on = (b.noise + b.survive) * a;
            self.inactive[i] = off;
            self.active[i] = on;
            total = total + off + on;
        }
        let fresh = trans.mother * prior_inactive;
        self.inactive.push(T::zero());
        self.active.push(fresh);
        total = total + fresh;

        self.mothers.push((*event, model.offspring_total(event)));
        self.j = j;
        self.t = event.t;
        Ok(total)
    }

    /// Divides the table by `divisor` and records `log divisor`.
    fn rescale(&mut self, divisor: T) {
        self.log_normalizers.push(ln_or_neg_inf(divisor));
        if divisor > T::zero() && divisor.is_finite() {
            let inv = divisor.recip();
            for v in self.inactive.iter_mut().chain(self.active.iter_mut()) {
                *v = flush(*v * inv);
            }
        }
    }

    /// Log of the terminal survival mixture at `horizon`: each cell is
    /// weighted by the probability of no further event of its regime.
    fn log_terminal<M: ClusterIntensity<T>>(&self, model: &M, horizon: T) -> T {
        let dt = horizon - self.t;
        let off = (-model.initiation_total() * dt).exp();
        let mut s = self.inactive.iter().copied().sum::<T>() * off;
        for (i, &v) in self.active.iter().enumerate().skip(1) {
            if v > T::zero() {
                s = s + v * (-self.mothers[i - 1].1 * dt).exp();
            }
        }
        ln_or_neg_inf(s)
    }
}

/// Forward table after the first event.
pub fn forward_init<T: Scalar, M: ClusterIntensity<T>>(
    first: &Event<T>,
    model: &M,
) -> Result<ForwardMatrix<T>> {
    forward_step(&ForwardMatrix::origin(), first, model)
}

/// One normalized forward step.
pub fn forward_step<T: Scalar, M: ClusterIntensity<T>>(
    fm: &ForwardMatrix<T>,
    next: &Event<T>,
    model: &M,
) -> Result<ForwardMatrix<T>> {
    let mut out = fm.clone();
    let mut trans = Transition::with_capacity(out.j + 1);
    let total = out.advance(next, model, &mut trans)?;
    out.rescale(total);
    Ok(out)
}

/// Runs the whole forward pass with a caller-chosen rescaling constant per
/// step. `divisor(j, sum)` receives the step index and the unnormalized
/// table sum and must return a positive number.
pub fn forward_pass_with<T, M, F>(
    catalog: &Catalog<T>,
    model: &M,
    mut divisor: F,
) -> Result<ForwardMatrix<T>>
where
    T: Scalar,
    M: ClusterIntensity<T>,
    F: FnMut(usize, T) -> T,
{
    let n = catalog.len();
    let mut fm = ForwardMatrix::origin_with_capacity(n);
    let mut trans = Transition::with_capacity(n);
    for ev in catalog.events() {
        let total = fm.advance(ev, model, &mut trans)?;
        let c = divisor(fm.j, total);
        fm.rescale(c);
    }
    Ok(fm)
}

/// Forward pass normalized to unit mass after every step.
pub fn forward_pass<T: Scalar, M: ClusterIntensity<T>>(
    catalog: &Catalog<T>,
    model: &M,
) -> Result<ForwardMatrix<T>> {
    forward_pass_with(catalog, model, |_, s| s)
}

/// Converts a finished forward table into the log-likelihood.
///
/// The result is `Σ log c_j + log Σ l_n − Γ τₙ`. With a horizon `T ≥ τₙ`
/// the remaining mass is weighted by the survival of each regime up to `T`
/// and the noise term becomes `−Γ T`.
pub fn log_likelihood_from<T: Scalar, M: ClusterIntensity<T>>(
    fm: &ForwardMatrix<T>,
    model: &M,
    horizon: Option<T>,
) -> Result<T> {
    let logc: T = fm.log_normalizers.iter().copied().sum();
    match horizon {
        None => {
            if fm.j == 0 {
                return Err(Error::EmptyCatalog);
            }
            Ok(logc + ln_or_neg_inf(fm.mass()) - model.noise_total() * fm.t)
        }
        Some(h) => {
            if !(h >= fm.t) || !h.is_finite() {
                return Err(Error::TimeReversal {
                    from: fm.t.to_f64_lossy(),
                    to: h.to_f64_lossy(),
                });
            }
            Ok(logc + fm.log_terminal(model, h) - model.noise_total() * h)
        }
    }
}

/// Log-likelihood of a catalog, evaluated at the last event time or, when a
/// horizon is given, over the whole window `[0, horizon]`.
pub fn log_likelihood<T: Scalar, M: ClusterIntensity<T>>(
    catalog: &Catalog<T>,
    model: &M,
    horizon: Option<T>,
) -> Result<T> {
    let fm = forward_pass(catalog, model)?;
    log_likelihood_from(&fm, model, horizon)
}
