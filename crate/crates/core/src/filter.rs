//! Exact posterior filter for the mother-quake model.
//!
//! The base state holds, for every event `j` seen so far, the posterior
//! probability `πⱼ` that a cluster is active *and* its mother is event `j`,
//! plus the posterior probability `ι` that no cluster is active
//! (`ι = 1 − Σπⱼ`, carried explicitly to avoid cancellation).
//!
//! Between events the state decays in closed form. With `cⱼ = a(yⱼ) − ε`
//! and gap `Δ`:
//!
//! ```text
//! πⱼ(t + Δ) = πⱼ e^{−cⱼΔ} · b,   b = 1 / (Σⱼ πⱼ e^{−cⱼΔ} + ι)
//! ```
//!
//! At an event with offspring densities `λⱼ` towards each candidate mother,
//! normaliser `d₊ = Σⱼ (γ + λⱼ) πⱼ + (γ + ε) ι`:
//!
//! ```text
//! πⱼ⁺ = (γ + qλⱼ) πⱼ / d₊,   π_new⁺ = ε ι / d₊,   ι⁺ = (γ ι + Σⱼ pλⱼ πⱼ) / d₊
//! ```
//!
//! A [`FunctionalState`] tracks the joint quantities `π(θ₀(yⱼ) α f)` and
//! `π((1 − α) f)` for a frozen indicator `f` (event membership, cluster
//! activity at a past time, or the constant one). Frozen functionals obey the
//! same linear recursion, so smoothed posteriors at the end of the catalog
//! fall out of forward tracking. [`smoothed_report`] evaluates all of them at
//! once by running that linear recursion backwards (the adjoint), in O(n²);
//! [`smoothed_report_tracked`] tracks each target separately in O(n³) and is
//! kept as the reference route.

use std::fmt;

use crate::error::{Error, Result};
use crate::model::{Catalog, ClusterIntensity, Event};
use crate::scalar::{flush, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
struct TrackedMother<T> {
    event: Event<T>,
    /// `a(yⱼ) − ε`
    excess_rate: T,
}

/// Posterior over the current cluster state.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseFilterState<T> {
    t: T,
    pis: Vec<T>,
    inactive: T,
    mothers: Vec<TrackedMother<T>>,
    last_event_t: Option<T>,
}

/// `x · e · b`, where a zero coefficient stays zero even if the shifted
/// decay factor of an empty component overflowed.
#[inline]
fn decayed<T: Scalar>(x: T, e: T, b: T) -> T {
    if x == T::zero() {
        T::zero()
    } else {
        flush(x * e * b)
    }
}

/// Empty filter at `t = 0` with no cluster active.
pub fn init_filter<T: Scalar>() -> BaseFilterState<T> {
    BaseFilterState {
        t: T::zero(),
        pis: Vec::new(),
        inactive: T::one(),
        mothers: Vec::new(),
        last_event_t: None,
    }
}

/// Shared decay factors for one silent interval.
///
/// The exponents are shifted by their maximum before exponentiation, so the
/// factors stay finite for arbitrarily long gaps; only the products with the
/// normaliser are meaningful.
#[derive(Debug, Clone, PartialEq)]
pub struct Propagation<T> {
    pub to_t: T,
    pub decay: Vec<T>,
    pub inactive_decay: T,
    pub normalizer: T,
}

impl<T: Scalar> Propagation<T> {
    fn identity(len: usize, to_t: T) -> Self {
        Self {
            to_t,
            decay: vec![T::one(); len],
            inactive_decay: T::one(),
            normalizer: T::one(),
        }
    }
}

/// Per-event jump coefficients, computed from the left-limit base state.
#[derive(Debug, Clone, PartialEq)]
pub struct Jump<T> {
    pub event: Event<T>,
    /// `λⱼ` for each tracked mother `j`.
    pub kernel: Vec<T>,
    pub noise: T,
    pub initiation: T,
    pub kill: T,
    pub survive: T,
    /// `d₊`
    pub normalizer: T,
    new_excess_rate: T,
}

impl<T: Scalar> BaseFilterState<T> {
    /// Builds a state directly from its components: time, candidate mothers
    /// with their excess rates `a(yⱼ) − ε`, their probabilities `πⱼ` and the
    /// inactive mass. The probabilities must be non-negative and sum to one.
    pub fn from_parts(t: T, mothers: Vec<(Event<T>, T)>, pis: Vec<T>, inactive: T) -> Result<Self> {
        if mothers.len() != pis.len() {
            return Err(Error::LengthMismatch {
                expected: mothers.len(),
                actual: pis.len(),
            });
        }
        let total = pis.iter().copied().sum::<T>() + inactive;
        let ok = pis.iter().chain([&inactive]).all(|&v| v >= T::zero() && v.is_finite())
            && (total - T::one()).abs() <= T::lit(1e-9);
        if !ok {
            return Err(Error::StateMismatch(format!(
                "state probabilities must be non-negative and sum to 1, got total {total}"
            )));
        }
        Ok(Self {
            t,
            pis,
            inactive,
            last_event_t: mothers.last().map(|(e, _)| e.t),
            mothers: mothers
                .into_iter()
                .map(|(event, excess_rate)| TrackedMother { event, excess_rate })
                .collect(),
        })
    }

    pub fn t(&self) -> T {
        self.t
    }

    /// `π(θ₀(yⱼ) α, t)` for `j = 1..k`.
    pub fn pis(&self) -> &[T] {
        &self.pis
    }

    /// `π(1 − α, t)`
    pub fn inactive(&self) -> T {
        self.inactive
    }

    /// `π(α, t)`
    pub fn active_probability(&self) -> T {
        self.pis.iter().copied().sum()
    }

    /// Number of events absorbed so far.
    pub fn len(&self) -> usize {
        self.pis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pis.is_empty()
    }

    pub fn excess_rates(&self) -> impl Iterator<Item = T> + '_ {
        self.mothers.iter().map(|m| m.excess_rate)
    }

    pub fn propagation(&self, to_t: T) -> Result<Propagation<T>> {
        if !(to_t >= self.t) {
            return Err(Error::TimeReversal {
                from: self.t.to_f64_lossy(),
                to: to_t.to_f64_lossy(),
            });
        }
        let dt = to_t - self.t;
        if dt == T::zero() {
            return Ok(Propagation::identity(self.pis.len(), to_t));
        }
        let exponent = |m: &TrackedMother<T>| -m.excess_rate * dt;
        let mut shift = if self.inactive > T::zero() {
            T::zero()
        } else {
            T::neg_infinity()
        };
        for (m, &pi) in self.mothers.iter().zip(&self.pis) {
            if pi > T::zero() {
                shift = shift.max(exponent(m));
            }
        }
        if !shift.is_finite() {
            shift = T::zero();
        }
        let decay: Vec<T> = self
            .mothers
            .iter()
            .map(|m| (exponent(m) - shift).exp())
            .collect();
        let inactive_decay = (-shift).exp();
        let mass: T = decay
            .iter()
            .zip(&self.pis)
            .map(|(&e, &pi)| decayed(pi, e, T::one()))
            .sum::<T>()
            + decayed(self.inactive, inactive_decay, T::one());
        Ok(Propagation {
            to_t,
            decay,
            inactive_decay,
            normalizer: T::one() / mass,
        })
    }

    pub fn apply_propagation(&self, prop: &Propagation<T>) -> Self {
        let b = prop.normalizer;
        let pis = self
            .pis
            .iter()
            .zip(&prop.decay)
            .map(|(&pi, &e)| decayed(pi, e, b))
            .collect();
        Self {
            t: prop.to_t,
            pis,
            inactive: decayed(self.inactive, prop.inactive_decay, b),
            mothers: self.mothers.clone(),
            last_event_t: self.last_event_t,
        }
    }

    /// Closed-form evolution over a silent interval ending at `to_t`.
    pub fn propagate(&self, to_t: T) -> Result<Self> {
        Ok(self.apply_propagation(&self.propagation(to_t)?))
    }

    /// Coefficients of the jump at `event`, which must be the next event and
    /// must not precede the state's current time.
    pub fn jump_coefficients<M: ClusterIntensity<T>>(
        &self,
        event: &Event<T>,
        model: &M,
    ) -> Result<Jump<T>> {
        if let Some(prev) = self.last_event_t {
            if !(event.t > prev) {
                return Err(Error::NonIncreasing {
                    index: event.index,
                    t: event.t.to_f64_lossy(),
                    prev: prev.to_f64_lossy(),
                });
            }
        }
        if event.t != self.t {
            return Err(Error::StateMismatch(format!(
                "jump at t={} but the filter is at t={}; propagate first",
                event.t,
                self.t
            )));
        }
        if event.index != self.pis.len() + 1 {
            return Err(Error::StateMismatch(format!(
                "expected event {}, got event {}",
                self.pis.len() + 1,
                event.index
            )));
        }
        let kernel: Vec<T> = self
            .mothers
            .iter()
            .map(|m| model.offspring_density(event, &m.event))
            .collect();
        let noise = model.noise_density(event);
        let initiation = model.initiation_density(event);
        let kill = model.kill_probability();
        let survive = model.survive_probability();
        let normalizer = kernel
            .iter()
            .zip(&self.pis)
            .map(|(&l, &pi)| (noise + l) * pi)
            .sum::<T>()
            + (noise + initiation) * self.inactive;
        Ok(Jump {
            event: *event,
            kernel,
            noise,
            initiation,
            kill,
            survive,
            normalizer,
            new_excess_rate: model.offspring_total(event) - model.initiation_total(),
        })
    }

    pub fn apply_jump(&self, jump: &Jump<T>) -> Self {
        let d = jump.normalizer;
        let mut pis = Vec::with_capacity(self.pis.len() + 1);
        let mut killed = T::zero();
        for (&pi, &l) in self.pis.iter().zip(&jump.kernel) {
            pis.push(flush((jump.noise + jump.survive * l) * pi / d));
            killed = killed + jump.kill * l * pi;
        }
        pis.push(jump.initiation * self.inactive / d);
        let mut mothers = self.mothers.clone();
        mothers.push(TrackedMother {
            event: jump.event,
            excess_rate: jump.new_excess_rate,
        });
        Self {
            t: jump.event.t,
            pis,
            inactive: (jump.noise * self.inactive + killed) / d,
            mothers,
            last_event_t: Some(jump.event.t),
        }
    }

    /// Absorbs the next event. The state is propagated up to the event time
    /// first when needed.
    pub fn jump_update<M: ClusterIntensity<T>>(&self, event: &Event<T>, model: &M) -> Result<Self> {
        let left = self.left_limit(event)?;
        let jump = left.jump_coefficients(event, model)?;
        Ok(left.apply_jump(&jump))
    }

    /// Like [`jump_update`](Self::jump_update), also returning the membership
    /// functional of the arriving event, initialised at its arrival.
    pub fn jump_update_tracking<M: ClusterIntensity<T>>(
        &self,
        event: &Event<T>,
        model: &M,
    ) -> Result<(Self, FunctionalState<T>)> {
        let left = self.left_limit(event)?;
        let jump = left.jump_coefficients(event, model)?;
        let fs = FunctionalState::membership_at_arrival(&left, &jump);
        Ok((left.apply_jump(&jump), fs))
    }

    fn left_limit(&self, event: &Event<T>) -> Result<Self> {
        if let Some(prev) = self.last_event_t {
            if !(event.t > prev) {
                return Err(Error::NonIncreasing {
                    index: event.index,
                    t: event.t.to_f64_lossy(),
                    prev: prev.to_f64_lossy(),
                });
            }
        }
        if event.t > self.t {
            self.propagate(event.t)
        } else {
            Ok(self.clone())
        }
    }
}

/// Indicator functionals the filter can track.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetFunctional<T> {
    /// Event `i` (1-based) belongs to a cluster.
    Membership(usize),
    /// A cluster is active at time `t₀`.
    ActiveAt(T),
    /// The constant one.
    ConstOne,
}

impl<T: Scalar> fmt::Display for TargetFunctional<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Membership(i) => write!(f, "Membership({i})"),
            Self::ActiveAt(t) => write!(f, "ActiveAt({t})"),
            Self::ConstOne => f.write_str("ConstOne"),
        }
    }
}

/// Joint posterior of a tracked functional `f` with the cluster state.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalState<T> {
    target: TargetFunctional<T>,
    t: T,
    /// `π(θ₀(yⱼ) α f, t)`
    pif_js: Vec<T>,
    /// `π((1 − α) f, t)`
    inactive: T,
}

/// Starts tracking a target whose value is already determined at `base.t`.
///
/// Membership targets are created by
/// [`BaseFilterState::jump_update_tracking`] at the arrival of their event.
pub fn track_functional<T: Scalar>(
    target: TargetFunctional<T>,
    base: &BaseFilterState<T>,
) -> Result<FunctionalState<T>> {
    match target {
        TargetFunctional::ActiveAt(t0) => {
            if t0 != base.t {
                return Err(Error::StartMismatch {
                    target: target.to_string(),
                    expected: t0.to_f64_lossy(),
                    actual: base.t.to_f64_lossy(),
                });
            }
            Ok(FunctionalState {
                target,
                t: base.t,
                pif_js: base.pis.clone(),
                inactive: T::zero(),
            })
        }
        TargetFunctional::ConstOne => Ok(FunctionalState {
            target,
            t: base.t,
            pif_js: base.pis.clone(),
            inactive: base.inactive,
        }),
        TargetFunctional::Membership(_) => Err(Error::UnfrozenTarget(target.to_string())),
    }
}

impl<T: Scalar> FunctionalState<T> {
    fn membership_at_arrival(left: &BaseFilterState<T>, jump: &Jump<T>) -> Self {
        let d = jump.normalizer;
        let mut pif_js = Vec::with_capacity(left.pis.len() + 1);
        let mut killed = T::zero();
        for (&pi, &l) in left.pis.iter().zip(&jump.kernel) {
            pif_js.push(jump.survive * l * pi / d);
            killed = killed + jump.kill * l * pi;
        }
        pif_js.push(jump.initiation * left.inactive / d);
        Self {
            target: TargetFunctional::Membership(jump.event.index),
            t: jump.event.t,
            pif_js,
            inactive: killed / d,
        }
    }

    /// Builds a functional state from its components. Every entry must be
    /// non-negative and finite.
    pub fn from_parts(target: TargetFunctional<T>, t: T, pif_js: Vec<T>, inactive: T) -> Result<Self> {
        if !pif_js.iter().chain([&inactive]).all(|&v| v >= T::zero() && v.is_finite()) {
            return Err(Error::StateMismatch(
                "functional components must be non-negative and finite".into(),
            ));
        }
        Ok(Self {
            target,
            t,
            pif_js,
            inactive,
        })
    }

    pub fn target(&self) -> TargetFunctional<T> {
        self.target
    }

    pub fn t(&self) -> T {
        self.t
    }

    pub fn pif_js(&self) -> &[T] {
        &self.pif_js
    }

    pub fn inactive(&self) -> T {
        self.inactive
    }

    /// `π(f, t)`
    pub fn pif(&self) -> T {
        self.pif_js.iter().copied().sum::<T>() + self.inactive
    }

    fn check_base(&self, base: &BaseFilterState<T>) -> Result<()> {
        if base.t != self.t || base.pis.len() != self.pif_js.len() {
            return Err(Error::StateMismatch(format!(
                "functional {} at t={} with {} mothers, base at t={} with {}",
                self.target,
                self.t,
                self.pif_js.len(),
                base.t,
                base.pis.len()
            )));
        }
        Ok(())
    }

    pub fn apply_propagation(&self, prop: &Propagation<T>) -> Self {
        let b = prop.normalizer;
        Self {
            target: self.target,
            t: prop.to_t,
            pif_js: self
                .pif_js
                .iter()
                .zip(&prop.decay)
                .map(|(&x, &e)| decayed(x, e, b))
                .collect(),
            inactive: decayed(self.inactive, prop.inactive_decay, b),
        }
    }

    /// Closed-form evolution over a silent interval; `base_at_start` must be
    /// the base state at this functional's current time.
    pub fn propagate_functional(&self, base_at_start: &BaseFilterState<T>, to_t: T) -> Result<Self> {
        self.check_base(base_at_start)?;
        Ok(self.apply_propagation(&base_at_start.propagation(to_t)?))
    }

    pub fn apply_jump(&self, jump: &Jump<T>) -> Result<Self> {
        self.check_frozen(&jump.event)?;
        let d = jump.normalizer;
        let mut pif_js = Vec::with_capacity(self.pif_js.len() + 1);
        let mut killed = T::zero();
        for (&x, &l) in self.pif_js.iter().zip(&jump.kernel) {
            pif_js.push(flush((jump.noise + jump.survive * l) * x / d));
            killed = killed + jump.kill * l * x;
        }
        pif_js.push(flush(jump.initiation * self.inactive / d));
        Ok(Self {
            target: self.target,
            t: jump.event.t,
            pif_js,
            inactive: flush((jump.noise * self.inactive + killed) / d),
        })
    }

    /// Jump update at a new event for a target that the event cannot change.
    pub fn jump_update_functional<M: ClusterIntensity<T>>(
        &self,
        base_left: &BaseFilterState<T>,
        event: &Event<T>,
        model: &M,
    ) -> Result<Self> {
        self.check_frozen(event)?;
        let (base_left, fs) = if event.t > base_left.t {
            let prop = base_left.propagation(event.t)?;
            self.check_base(base_left)?;
            (base_left.apply_propagation(&prop), self.apply_propagation(&prop))
        } else {
            (base_left.clone(), self.clone())
        };
        fs.check_base(&base_left)?;
        let jump = base_left.jump_coefficients(event, model)?;
        fs.apply_jump(&jump)
    }

    fn check_frozen(&self, event: &Event<T>) -> Result<()> {
        let frozen = match self.target {
            TargetFunctional::Membership(m) => m < event.index,
            TargetFunctional::ActiveAt(t0) => t0 <= event.t,
            TargetFunctional::ConstOne => true,
        };
        if frozen {
            Ok(())
        } else {
            Err(Error::UnfrozenTarget(self.target.to_string()))
        }
    }
}

/// Smoothed posteriors at the end time `t_end` (the last event, or a later
/// horizon).
#[derive(Debug, Clone, PartialEq)]
pub struct Posteriors<T> {
    pub t_end: T,
    /// `π(θ(yᵢ), T)` per event.
    pub membership: Vec<T>,
    /// `π(D_{τᵢ}, T)` per event time.
    pub active: Vec<T>,
}

fn end_time<T: Scalar>(catalog: &Catalog<T>, horizon: Option<T>) -> Result<T> {
    let last = catalog.last_time().ok_or(Error::EmptyCatalog)?;
    match horizon {
        Some(h) if h < last => Err(Error::TimeReversal {
            from: last.to_f64_lossy(),
            to: h.to_f64_lossy(),
        }),
        Some(h) => Ok(h),
        None => Ok(last),
    }
}

/// Smoothed membership and cluster-activity posteriors for every event,
/// via one forward filter pass and one backward pass of the adjoint of the
/// frozen-functional recursion.
pub fn smoothed_report<T: Scalar, M: ClusterIntensity<T>>(
    catalog: &Catalog<T>,
    model: &M,
    horizon: Option<T>,
) -> Result<Posteriors<T>> {
    let t_end = end_time(catalog, horizon)?;
    let events = catalog.events();
    let n = events.len();

    struct Step<T> {
        prop: Propagation<T>,
        left_pis: Vec<T>,
        left_inactive: T,
        normalizer: T,
        noise: T,
        initiation: T,
    }

    let mut steps: Vec<Step<T>> = Vec::with_capacity(n);
    let mut base = init_filter::<T>();
    for ev in events {
        let prop = base.propagation(ev.t)?;
        let left = base.apply_propagation(&prop);
        let jump = left.jump_coefficients(ev, model)?;
        base = left.apply_jump(&jump);
        steps.push(Step {
            prop,
            left_pis: left.pis,
            left_inactive: left.inactive,
            normalizer: jump.normalizer,
            noise: jump.noise,
            initiation: jump.initiation,
        });
    }

    // adjoint weights: π(f, T) = Σⱼ w[j]·π(θ₀(yⱼ)αf) + w_r·π((1−α)f)
    let (mut w, mut w_r) = if t_end > base.t {
        let prop = base.propagation(t_end)?;
        let b = prop.normalizer;
        (
            prop.decay.iter().map(|&e| e * b).collect::<Vec<T>>(),
            prop.inactive_decay * b,
        )
    } else {
        (vec![T::one(); n], T::one())
    };

    let kill = model.kill_probability();
    let survive = model.survive_probability();
    let mut membership = vec![T::zero(); n];
    let mut active = vec![T::zero(); n];
    let dot = |w: T, x: T| if x == T::zero() { T::zero() } else { w * x };

    for k in (0..n).rev() {
        let step = &steps[k];
        let ev = &events[k];
        let d = step.normalizer;
        let kernel: Vec<T> = events[..k]
            .iter()
            .map(|m| model.offspring_density(ev, m))
            .collect();

        let born = step.initiation * step.left_inactive / d;
        let mut act = dot(w[k], born);
        let mut mem = dot(w[k], born);
        let mut killed = T::zero();
        for j in 0..k {
            let pi = step.left_pis[j];
            let l = kernel[j];
            act = act + dot(w[j], (step.noise + survive * l) * pi / d);
            mem = mem + dot(w[j], survive * l * pi / d);
            killed = killed + kill * l * pi / d;
        }
        mem = mem + dot(w_r, killed);
        membership[k] = mem;
        active[k] = act;

        // pull the adjoint back across propagation + jump at event k
        let b = step.prop.normalizer;
        let mut prev = Vec::with_capacity(k);
        for j in 0..k {
            let scale = step.prop.decay[j] * b / d;
            let l = kernel[j];
            prev.push(flush(scale * ((step.noise + survive * l) * w[j] + kill * l * w_r)));
        }
        let scale = step.prop.inactive_decay * b / d;
        w_r = flush(scale * (step.initiation * w[k] + step.noise * w_r));
        w = prev;
    }

    Ok(Posteriors {
        t_end,
        membership,
        active,
    })
}

/// Same posteriors as [`smoothed_report`], realised by tracking one
/// [`FunctionalState`] per target through the catalog. Cubic in the number
/// of events.
pub fn smoothed_report_tracked<T: Scalar, M: ClusterIntensity<T>>(
    catalog: &Catalog<T>,
    model: &M,
    horizon: Option<T>,
) -> Result<Posteriors<T>> {
    let t_end = end_time(catalog, horizon)?;
    let mut base = init_filter::<T>();
    let mut members: Vec<FunctionalState<T>> = Vec::with_capacity(catalog.len());
    let mut actives: Vec<FunctionalState<T>> = Vec::with_capacity(catalog.len());
    for ev in catalog.events() {
        let prop = base.propagation(ev.t)?;
        let left = base.apply_propagation(&prop);
        let jump = left.jump_coefficients(ev, model)?;
        for fs in members.iter_mut().chain(actives.iter_mut()) {
            *fs = fs.apply_propagation(&prop).apply_jump(&jump)?;
        }
        members.push(FunctionalState::membership_at_arrival(&left, &jump));
        base = left.apply_jump(&jump);
        actives.push(track_functional(TargetFunctional::ActiveAt(ev.t), &base)?);
    }
    if t_end > base.t {
        let prop = base.propagation(t_end)?;
        for fs in members.iter_mut().chain(actives.iter_mut()) {
            *fs = fs.apply_propagation(&prop);
        }
    }
    Ok(Posteriors {
        t_end,
        membership: members.iter().map(FunctionalState::pif).collect(),
        active: actives.iter().map(FunctionalState::pif).collect(),
    })
}
