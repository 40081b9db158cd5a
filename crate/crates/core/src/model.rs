//! Domain types and the mother-quake intensity model.
//!
//! Observations are points `yᵢ = (uᵢ, τᵢ)` with a location mark `uᵢ` in a
//! rectangular [`Region`]. Noise events arrive with density `γ` and a new
//! cluster is initiated with density `ε` whenever no cluster is active.
//! While a cluster is active, offspring arrive around its mother with the
//! Gaussian kernel
//!
//! ```text
//! λ(u, y) = λ · exp(−‖u − u_y‖² / 2d) / (2πd)
//! ```
//!
//! and each offspring ends the cluster with probability `p`.
//!
//! All densities are taken with respect to a reference measure `ν` on the
//! region. Under [`NuConvention::Probability`] (the default) `ν` is the
//! uniform probability measure, so total rates of noise and initiation are
//! `γ` and `ε`, and the offspring total rate carries a `1/area` factor. Under
//! [`NuConvention::Lebesgue`] `ν` is area measure.
//!
//! The inference modules only see the model through [`ClusterIntensity`],
//! which is implemented by [`GaussianModel`] and by [`TabulatedIntensity`]
//! (explicit per-pair kernel values, mostly useful for tests).

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::{exp_or_zero, normal_mass, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Location<T> {
    pub lon: T,
    pub lat: T,
}

impl<T: Scalar> Location<T> {
    pub fn new(lon: T, lat: T) -> Self {
        Self { lon, lat }
    }

    pub fn dist2(&self, other: &Self) -> T {
        let dx = self.lon - other.lon;
        let dy = self.lat - other.lat;
        dx * dx + dy * dy
    }
}

/// Axis-aligned study rectangle in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region<T> {
    lon_min: T,
    lon_max: T,
    lat_min: T,
    lat_max: T,
}

impl<T: Scalar> Region<T> {
    pub fn new(lon_min: T, lon_max: T, lat_min: T, lat_max: T) -> Result<Self> {
        let finite = [lon_min, lon_max, lat_min, lat_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidRegion("bounds must be finite".into()));
        }
        if !(lon_min < lon_max) || !(lat_min < lat_max) {
            return Err(Error::InvalidRegion(format!(
                "need lon_min < lon_max and lat_min < lat_max, got lon [{lon_min}, {lon_max}] lat [{lat_min}, {lat_max}]"
            )));
        }
        Ok(Self {
            lon_min,
            lon_max,
            lat_min,
            lat_max,
        })
    }

    pub fn lon_min(&self) -> T {
        self.lon_min
    }
    pub fn lon_max(&self) -> T {
        self.lon_max
    }
    pub fn lat_min(&self) -> T {
        self.lat_min
    }
    pub fn lat_max(&self) -> T {
        self.lat_max
    }

    pub fn area(&self) -> T {
        (self.lon_max - self.lon_min) * (self.lat_max - self.lat_min)
    }

    pub fn center(&self) -> Location<T> {
        let half = T::lit(0.5);
        Location::new(
            half * (self.lon_min + self.lon_max),
            half * (self.lat_min + self.lat_max),
        )
    }

    /// Closed-rectangle membership.
    pub fn contains(&self, loc: &Location<T>) -> bool {
        loc.lon >= self.lon_min
            && loc.lon <= self.lon_max
            && loc.lat >= self.lat_min
            && loc.lat <= self.lat_max
    }

    pub fn translated(&self, dlon: T, dlat: T) -> Self {
        Self {
            lon_min: self.lon_min + dlon,
            lon_max: self.lon_max + dlon,
            lat_min: self.lat_min + dlat,
            lat_max: self.lat_max + dlat,
        }
    }

    pub fn transposed(&self) -> Self {
        Self {
            lon_min: self.lat_min,
            lon_max: self.lat_max,
            lat_min: self.lon_min,
            lat_max: self.lon_max,
        }
    }
}

/// Which measure the densities are taken against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NuConvention {
    #[default]
    Probability,
    Lebesgue,
}

impl std::str::FromStr for NuConvention {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "probability" | "prob" => Ok(Self::Probability),
            "lebesgue" => Ok(Self::Lebesgue),
            other => Err(Error::InvalidConfig(format!(
                "nu must be 'probability' or 'lebesgue', got '{other}'"
            ))),
        }
    }
}

impl fmt::Display for NuConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Probability => f.write_str("probability"),
            Self::Lebesgue => f.write_str("lebesgue"),
        }
    }
}

/// Model parameters; rates are per day, `d` is the kernel variance in deg².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams<T> {
    pub gamma: T,
    pub lambda: T,
    pub epsilon: T,
    pub d: T,
    pub p: T,
}

impl<T: Scalar> ModelParams<T> {
    pub fn new(gamma: T, lambda: T, epsilon: T, d: T, p: T) -> Result<Self> {
        let params = Self {
            gamma,
            lambda,
            epsilon,
            d,
            p,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: T| Err(Error::InvalidParams(format!("{what} = {v}")));
        if !(self.gamma > T::zero()) || !self.gamma.is_finite() {
            return bad("gamma must be positive and finite, got", self.gamma);
        }
        if !(self.lambda >= T::zero()) || !self.lambda.is_finite() {
            return bad("lambda must be non-negative and finite, got", self.lambda);
        }
        if !(self.epsilon >= T::zero()) || !self.epsilon.is_finite() {
            return bad("epsilon must be non-negative and finite, got", self.epsilon);
        }
        if !(self.d > T::zero()) || !self.d.is_finite() {
            return bad("d must be positive and finite, got", self.d);
        }
        if !(self.p > T::zero() && self.p <= T::one()) {
            return bad("p must lie in (0, 1], got", self.p);
        }
        Ok(())
    }

    pub fn q(&self) -> T {
        T::one() - self.p
    }
}

/// One observed event. `index` is 1-based; `t` is in days since the
/// catalog origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event<T> {
    pub index: usize,
    pub t: T,
    pub loc: Location<T>,
}

/// Time-ordered observations inside a region.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog<T> {
    region: Region<T>,
    events: Vec<Event<T>>,
    origin: Option<String>,
}

impl<T: Scalar> Catalog<T> {
    pub fn new(region: Region<T>, events: Vec<Event<T>>) -> Result<Self> {
        let mut prev: Option<T> = None;
        for (pos, ev) in events.iter().enumerate() {
            if ev.index != pos + 1 {
                return Err(Error::BadIndex {
                    position: pos,
                    found: ev.index,
                });
            }
            if !ev.t.is_finite() || ev.t < T::zero() {
                return Err(Error::InvalidTime {
                    index: ev.index,
                    t: ev.t.to_f64_lossy(),
                });
            }
            if !region.contains(&ev.loc) {
                return Err(Error::OutsideRegion {
                    index: ev.index,
                    lon: ev.loc.lon.to_f64_lossy(),
                    lat: ev.loc.lat.to_f64_lossy(),
                });
            }
            if let Some(p) = prev {
                if !(ev.t > p) {
                    return Err(Error::NonIncreasing {
                        index: ev.index,
                        t: ev.t.to_f64_lossy(),
                        prev: p.to_f64_lossy(),
                    });
                }
            }
            prev = Some(ev.t);
        }
        Ok(Self {
            region,
            events,
            origin: None,
        })
    }

    /// Builds a catalog from `(t, location)` pairs, assigning indices in order.
    pub fn from_points<I>(region: Region<T>, points: I) -> Result<Self>
    where
        I: IntoIterator<Item = (T, Location<T>)>,
    {
        let events = points
            .into_iter()
            .enumerate()
            .map(|(i, (t, loc))| Event {
                index: i + 1,
                t,
                loc,
            })
            .collect();
        Self::new(region, events)
    }

    pub fn with_origin(mut self, origin: impl Into<String>) -> Self {
        self.origin = Some(origin.into());
        self
    }

    pub fn origin(&self) -> Option<&str> {
        self.origin.as_deref()
    }

    pub fn region(&self) -> &Region<T> {
        &self.region
    }

    pub fn events(&self) -> &[Event<T>] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn last_time(&self) -> Option<T> {
        self.events.last().map(|e| e.t)
    }

    /// First `n` events as a catalog of their own.
    pub fn truncated(&self, n: usize) -> Self {
        Self {
            region: self.region,
            events: self.events[..n.min(self.events.len())].to_vec(),
            origin: self.origin.clone(),
        }
    }
}

/// Hidden role of an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HiddenLabel {
    Noise,
    Mother,
    Offspring { kills: bool },
}

impl HiddenLabel {
    pub fn is_cluster(&self) -> bool {
        !matches!(self, Self::Noise)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Noise => "noise",
            Self::Mother => "mother",
            Self::Offspring { .. } => "offspring",
        }
    }
}

/// Per-event labels together with the induced cluster-state trajectory.
///
/// `active[i]` is `D` just after event `i + 1` and `latest_mother[i]` the
/// index of the latest mother at that moment (0 when no mother has occurred).
/// Both are functions of the labels and are rebuilt by [`LabeledPath::from_labels`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabeledPath {
    labels: Vec<HiddenLabel>,
    active: Vec<bool>,
    latest_mother: Vec<usize>,
}

impl LabeledPath {
    pub fn from_labels(labels: Vec<HiddenLabel>) -> Result<Self> {
        let mut active = Vec::with_capacity(labels.len());
        let mut latest_mother = Vec::with_capacity(labels.len());
        let mut d = false;
        let mut e = 0usize;
        for (pos, label) in labels.iter().enumerate() {
            let index = pos + 1;
            match *label {
                HiddenLabel::Noise => {}
                HiddenLabel::Mother => {
                    if d {
                        return Err(Error::InconsistentPath {
                            index,
                            reason: "mother while a cluster is active",
                        });
                    }
                    d = true;
                    e = index;
                }
                HiddenLabel::Offspring { kills } => {
                    if !d {
                        return Err(Error::InconsistentPath {
                            index,
                            reason: "offspring while no cluster is active",
                        });
                    }
                    d = !kills;
                }
            }
            active.push(d);
            latest_mother.push(e);
        }
        Ok(Self {
            labels,
            active,
            latest_mother,
        })
    }

    pub fn all_noise(n: usize) -> Self {
        Self::from_labels(vec![HiddenLabel::Noise; n]).expect("all-noise path is valid")
    }

    pub fn labels(&self) -> &[HiddenLabel] {
        &self.labels
    }

    pub fn active(&self) -> &[bool] {
        &self.active
    }

    pub fn latest_mother(&self) -> &[usize] {
        &self.latest_mother
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Cluster state just before event `index` (1-based): `(D, E)`.
    pub fn state_before(&self, index: usize) -> (bool, usize) {
        if index <= 1 {
            (false, 0)
        } else {
            (self.active[index - 2], self.latest_mother[index - 2])
        }
    }
}

/// Everything the inference routines need to know about the intensities.
///
/// All rates are time-invariant. Densities are with respect to `ν`; totals
/// are integrals over the region against `ν`.
pub trait ClusterIntensity<T: Scalar>: Sync {
    /// Noise density `γⱼ` at an event.
    fn noise_density(&self, at: &Event<T>) -> T;
    /// `∫ γ dν`
    fn noise_total(&self) -> T;
    /// Cluster-initiation density `εⱼ` at an event.
    fn initiation_density(&self, at: &Event<T>) -> T;
    /// `∫ ε dν`
    fn initiation_total(&self) -> T;
    /// Offspring density `λⱼ,ᵢ` at `at` for a cluster mothered by `mother`.
    fn offspring_density(&self, at: &Event<T>, mother: &Event<T>) -> T;
    /// `a(y) = ∫ λ(u, y) ν(du)`
    fn offspring_total(&self, mother: &Event<T>) -> T;
    /// Probability `p` that an offspring ends its cluster.
    fn kill_probability(&self) -> T;

    fn survive_probability(&self) -> T {
        T::one() - self.kill_probability()
    }
}

/// Gaussian-kernel mother-quake model on a rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianModel<T> {
    pub params: ModelParams<T>,
    pub region: Region<T>,
    pub nu: NuConvention,
}

impl<T: Scalar> GaussianModel<T> {
    pub fn new(params: ModelParams<T>, region: Region<T>) -> Self {
        Self {
            params,
            region,
            nu: NuConvention::Probability,
        }
    }

    pub fn with_nu(mut self, nu: NuConvention) -> Self {
        self.nu = nu;
        self
    }

    pub fn with_params(&self, params: ModelParams<T>) -> Self {
        Self { params, ..*self }
    }

    /// `ν(E)`
    pub fn nu_mass(&self) -> T {
        match self.nu {
            NuConvention::Probability => T::one(),
            NuConvention::Lebesgue => self.region.area(),
        }
    }

    /// Kernel value at `u` for a cluster mothered at `mother`.
    pub fn kernel_density(&self, u: &Location<T>, mother: &Location<T>) -> T {
        let d = self.params.d;
        let two = T::lit(2.0);
        self.params.lambda * exp_or_zero(-u.dist2(mother) / (two * d)) / (two * T::PI() * d)
    }

    /// Gaussian mass of the kernel centred at `mother` inside the region.
    pub fn kernel_mass(&self, mother: &Location<T>) -> T {
        let sd = self.params.d.sqrt();
        let r = &self.region;
        let gx = normal_mass((r.lon_min - mother.lon) / sd, (r.lon_max - mother.lon) / sd);
        let gy = normal_mass((r.lat_min - mother.lat) / sd, (r.lat_max - mother.lat) / sd);
        gx * gy
    }

    fn offspring_total_unchecked(&self, mother: &Location<T>) -> T {
        let scale = match self.nu {
            NuConvention::Probability => self.params.lambda / self.region.area(),
            NuConvention::Lebesgue => self.params.lambda,
        };
        scale * self.kernel_mass(mother)
    }

    /// Total offspring rate `a(y)` of a cluster mothered at `mother`.
    pub fn offspring_total_rate(&self, mother: &Location<T>) -> Result<T> {
        if !self.region.contains(mother) {
            return Err(Error::OutsideRegion {
                index: 0,
                lon: mother.lon.to_f64_lossy(),
                lat: mother.lat.to_f64_lossy(),
            });
        }
        Ok(self.offspring_total_unchecked(mother))
    }

    /// Conditional intensity density of the cluster process at `u` given the
    /// cluster state.
    pub fn conditional_intensity(
        &self,
        u: &Location<T>,
        active: bool,
        mother: Option<&Location<T>>,
    ) -> Result<T> {
        if active {
            let m = mother.ok_or(Error::MissingMother)?;
            Ok(self.kernel_density(u, m))
        } else {
            Ok(self.params.epsilon)
        }
    }
}

impl<T: Scalar> ClusterIntensity<T> for GaussianModel<T> {
    fn noise_density(&self, _at: &Event<T>) -> T {
        self.params.gamma
    }
    fn noise_total(&self) -> T {
        self.params.gamma * self.nu_mass()
    }
    fn initiation_density(&self, _at: &Event<T>) -> T {
        self.params.epsilon
    }
    fn initiation_total(&self) -> T {
        self.params.epsilon * self.nu_mass()
    }
    fn offspring_density(&self, at: &Event<T>, mother: &Event<T>) -> T {
        self.kernel_density(&at.loc, &mother.loc)
    }
    fn offspring_total(&self, mother: &Event<T>) -> T {
        self.offspring_total_unchecked(&mother.loc)
    }
    fn kill_probability(&self) -> T {
        self.params.p
    }
}

/// Intensity model with explicit per-pair kernel values, keyed by event
/// index. Pairs without an entry have kernel value zero; mothers without an
/// entry have offspring total zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedIntensity<T> {
    pub gamma: T,
    pub epsilon: T,
    pub p: T,
    offspring_totals: HashMap<usize, T>,
    kernel: HashMap<(usize, usize), T>,
}

impl<T: Scalar> TabulatedIntensity<T> {
    pub fn new(gamma: T, epsilon: T, p: T) -> Self {
        Self {
            gamma,
            epsilon,
            p,
            offspring_totals: HashMap::new(),
            kernel: HashMap::new(),
        }
    }

    pub fn offspring_total(mut self, mother: usize, a: T) -> Self {
        self.offspring_totals.insert(mother, a);
        self
    }

    pub fn kernel(mut self, child: usize, mother: usize, value: T) -> Self {
        self.kernel.insert((child, mother), value);
        self
    }
}

impl<T: Scalar> ClusterIntensity<T> for TabulatedIntensity<T> {
    fn noise_density(&self, _at: &Event<T>) -> T {
        self.gamma
    }
    fn noise_total(&self) -> T {
        self.gamma
    }
    fn initiation_density(&self, _at: &Event<T>) -> T {
        self.epsilon
    }
    fn initiation_total(&self) -> T {
        self.epsilon
    }
    fn offspring_density(&self, at: &Event<T>, mother: &Event<T>) -> T {
        self.kernel
            .get(&(at.index, mother.index))
            .copied()
            .unwrap_or_else(T::zero)
    }
    fn offspring_total(&self, mother: &Event<T>) -> T {
        self.offspring_totals
            .get(&mother.index)
            .copied()
            .unwrap_or_else(T::zero)
    }
    fn kill_probability(&self) -> T {
        self.p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_region() -> Region<f64> {
        Region::new(131.0, 140.0, 34.0, 39.0).unwrap()
    }

    fn reference_params() -> ModelParams<f64> {
        ModelParams::new(0.1070, 1.3274, 0.0126, 0.0070, 0.2035).unwrap()
    }

    #[test]
    fn region_rejects_degenerate_bounds() {
        assert!(Region::new(1.0, 1.0, 0.0, 1.0).is_err());
        assert!(Region::new(0.0, 1.0, 2.0, 1.0).is_err());
        assert!(Region::new(0.0, f64::NAN, 0.0, 1.0).is_err());
        assert_eq!(reference_region().area(), 45.0);
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(0.0, 1.0, 0.1, 0.1, 0.5).is_err());
        assert!(ModelParams::new(0.1, 1.0, -0.1, 0.1, 0.5).is_err());
        assert!(ModelParams::new(0.1, 1.0, 0.1, 0.0, 0.5).is_err());
        assert!(ModelParams::new(0.1, 1.0, 0.1, 0.1, 0.0).is_err());
        assert!(ModelParams::new(0.1, 1.0, 0.1, 0.1, 1.5).is_err());
        let p = ModelParams::new(0.1, 1.0, 0.0, 0.1, 1.0).unwrap();
        assert_eq!(p.q(), 0.0);
    }

    #[test]
    fn kernel_at_zero_offset() {
        let m = GaussianModel::new(reference_params(), reference_region());
        let c = m.region.center();
        let k0 = m.kernel_density(&c, &c);
        assert!((k0 - 30.180_324_494_311_695).abs() < 1e-10);
        let off = Location::new(c.lon + (2.0 * 0.0070_f64).sqrt(), c.lat);
        let k1 = m.kernel_density(&off, &c);
        assert!((k1 - k0 * (-1.0_f64).exp()).abs() < 1e-12);

        let zero = m.with_params(ModelParams::new(0.1070, 0.0, 0.0126, 0.0070, 0.2035).unwrap());
        assert_eq!(zero.kernel_density(&off, &c), 0.0);
    }

    #[test]
    fn offspring_total_at_center_and_corner() {
        let m = GaussianModel::new(reference_params(), reference_region());
        let a = m.offspring_total_rate(&m.region.center()).unwrap();
        assert!((a - 0.029_497_777_777_777_78).abs() < 1e-12);
        let corner = Location::new(131.0, 34.0);
        let a = m.offspring_total_rate(&corner).unwrap();
        assert!((a - 1.3274 / (4.0 * 45.0)).abs() < 1e-12);
        assert!(m.offspring_total_rate(&Location::new(130.0, 35.0)).is_err());
    }

    #[test]
    fn lebesgue_convention_drops_area_factor() {
        let m = GaussianModel::new(reference_params(), reference_region()).with_nu(NuConvention::Lebesgue);
        let a = m.offspring_total_rate(&m.region.center()).unwrap();
        assert!((a - 1.3274).abs() < 1e-12);
        assert!((m.noise_total() - 0.1070 * 45.0).abs() < 1e-12);
        assert!((m.initiation_total() - 0.0126 * 45.0).abs() < 1e-12);
    }

    #[test]
    fn conditional_intensity_branches() {
        let m = GaussianModel::new(reference_params(), reference_region());
        let c = m.region.center();
        assert_eq!(m.conditional_intensity(&c, false, None).unwrap(), 0.0126);
        let v = m.conditional_intensity(&c, true, Some(&c)).unwrap();
        assert!((v - 1.3274 / (2.0 * std::f64::consts::PI * 0.0070)).abs() < 1e-12);
        let far = Location::new(c.lon + 1e3, c.lat);
        assert_eq!(m.conditional_intensity(&far, true, Some(&c)).unwrap(), 0.0);
        assert_eq!(
            m.conditional_intensity(&c, true, None),
            Err(Error::MissingMother)
        );
    }

    #[test]
    fn catalog_validation() {
        let r = Region::new(0.0, 1.0, 0.0, 1.0).unwrap();
        let at = |x: f64| Location::new(x, 0.5);
        assert!(Catalog::from_points(r, [(1.0, at(0.2)), (2.0, at(0.3))]).is_ok());
        assert!(matches!(
            Catalog::from_points(r, [(1.0, at(0.2)), (1.0, at(0.3))]),
            Err(Error::NonIncreasing { index: 2, .. })
        ));
        assert!(matches!(
            Catalog::from_points(r, [(1.0, at(1.2))]),
            Err(Error::OutsideRegion { index: 1, .. })
        ));
        assert!(matches!(
            Catalog::from_points(r, [(-1.0, at(0.2))]),
            Err(Error::InvalidTime { .. })
        ));
        let bad = vec![Event {
            index: 2,
            t: 1.0,
            loc: at(0.5),
        }];
        assert!(matches!(Catalog::new(r, bad), Err(Error::BadIndex { .. })));
    }

    #[test]
    fn labeled_path_state_is_derived_from_labels() {
        use HiddenLabel::*;
        let path = LabeledPath::from_labels(vec![
            Noise,
            Mother,
            Offspring { kills: false },
            Noise,
            Offspring { kills: true },
            Mother,
        ])
        .unwrap();
        assert_eq!(path.active(), &[false, true, true, true, false, true]);
        assert_eq!(path.latest_mother(), &[0, 2, 2, 2, 2, 6]);
        assert_eq!(path.state_before(1), (false, 0));
        assert_eq!(path.state_before(5), (true, 2));

        assert!(LabeledPath::from_labels(vec![Offspring { kills: true }]).is_err());
        assert!(LabeledPath::from_labels(vec![Mother, Mother]).is_err());
    }
}
