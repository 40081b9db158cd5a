//! Tabular summaries of smoothed posteriors: per-event rows, histograms,
//! the most clustered events, and comparisons against an external set of
//! probabilities.

use crate::error::{Error, Result};
use crate::filter::Posteriors;
use crate::model::Catalog;
use crate::scalar::Scalar;

/// Default number of events in the most-clustered export.
pub const DEFAULT_TOP_K: usize = 1500;
/// Bins of the probability histograms over `[0, 1]`.
pub const PROBABILITY_BINS: usize = 20;
/// Bins of the difference histogram over `[−1, 1]`.
pub const DIFFERENCE_BINS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorRow<T> {
    pub index: usize,
    pub t: T,
    pub lon: T,
    pub lat: T,
    pub p_member: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActiveRow<T> {
    pub t: T,
    pub p_active: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub n: usize,
    /// Fraction of membership probabilities below 0.1.
    pub below: f64,
    /// Fraction above 0.9.
    pub above: f64,
}

impl Summary {
    pub fn outside(&self) -> f64 {
        self.below + self.above
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorReport<T> {
    pub t_end: T,
    pub rows: Vec<PosteriorRow<T>>,
    pub active: Vec<ActiveRow<T>>,
    pub summary: Summary,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

pub fn summarize<T: Scalar>(probabilities: &[T]) -> Summary {
    let n = probabilities.len();
    let frac = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
    let lo = T::lit(0.1);
    let hi = T::lit(0.9);
    Summary {
        n,
        below: frac(probabilities.iter().filter(|&&p| p < lo).count()),
        above: frac(probabilities.iter().filter(|&&p| p > hi).count()),
    }
}

impl<T: Scalar> PosteriorReport<T> {
    pub fn new(catalog: &Catalog<T>, posteriors: &Posteriors<T>) -> Result<Self> {
        let n = catalog.len();
        for len in [posteriors.membership.len(), posteriors.active.len()] {
            if len != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    actual: len,
                });
            }
        }
        let rows = catalog
            .events()
            .iter()
            .zip(&posteriors.membership)
            .map(|(e, &p)| PosteriorRow {
                index: e.index,
                t: e.t,
                lon: e.loc.lon,
                lat: e.loc.lat,
                p_member: clamp_unit(p),
            })
            .collect();
        let active = catalog
            .events()
            .iter()
            .zip(&posteriors.active)
            .map(|(e, &p)| ActiveRow {
                t: e.t,
                p_active: clamp_unit(p),
            })
            .collect();
        Ok(Self {
            t_end: posteriors.t_end,
            rows,
            active,
            summary: summarize(&posteriors.membership),
        })
    }

    pub fn membership(&self) -> Vec<T> {
        self.rows.iter().map(|r| r.p_member).collect()
    }

    pub fn active_probabilities(&self) -> Vec<T> {
        self.active.iter().map(|r| r.p_active).collect()
    }

    pub fn membership_histogram(&self) -> Vec<HistogramBin> {
        histogram(&self.membership(), PROBABILITY_BINS, 0.0, 1.0)
    }

    pub fn active_histogram(&self) -> Vec<HistogramBin> {
        histogram(&self.active_probabilities(), PROBABILITY_BINS, 0.0, 1.0)
    }

    /// The `k` rows with the highest membership, in time order. The flag is
    /// set when `k` exceeded the catalog size and was clamped.
    pub fn top_k(&self, k: usize) -> (Vec<PosteriorRow<T>>, bool) {
        let clamped = k > self.rows.len();
        let mut order: Vec<usize> = (0..self.rows.len()).collect();
        // stable sort keeps earlier events first among equal probabilities
        order.sort_by(|&a, &b| {
            self.rows[b]
                .p_member
                .partial_cmp(&self.rows[a].p_member)
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        order.truncate(k);
        order.sort_unstable();
        (order.into_iter().map(|i| self.rows[i]).collect(), clamped)
    }
}

fn clamp_unit<T: Scalar>(p: T) -> T {
    p.max(T::zero()).min(T::one())
}

/// Equal-width histogram over `[lo, hi]`; the last bin is closed on the
/// right and values outside the range go to the nearest end bin.
pub fn histogram<T: Scalar>(values: &[T], bins: usize, lo: f64, hi: f64) -> Vec<HistogramBin> {
    let bins = bins.max(1);
    let width = (hi - lo) / bins as f64;
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|b| HistogramBin {
            lo: lo + width * b as f64,
            hi: if b + 1 == bins {
                hi
            } else {
                lo + width * (b + 1) as f64
            },
            count: 0,
        })
        .collect();
    for v in values {
        let v = v.to_f64_lossy();
        if v.is_nan() {
            continue;
        }
        let b = (((v - lo) / width).floor().max(0.0) as usize).min(bins - 1);
        out[b].count += 1;
    }
    out
}

/// Whether a probability histogram has its two end bins each heavier than
/// every interior bin.
pub fn is_bimodal(hist: &[HistogramBin]) -> bool {
    if hist.len() < 3 {
        return false;
    }
    let interior = hist[1..hist.len() - 1]
        .iter()
        .map(|b| b.count)
        .max()
        .unwrap_or(0);
    hist[0].count > interior && hist[hist.len() - 1].count > interior
}

/// Histogram of `other − ours` over `[−1, 1]`.
pub fn difference_histogram<T: Scalar>(ours: &[T], other: &[T]) -> Result<Vec<HistogramBin>> {
    if ours.len() != other.len() {
        return Err(Error::LengthMismatch {
            expected: ours.len(),
            actual: other.len(),
        });
    }
    let diffs: Vec<T> = ours.iter().zip(other).map(|(&a, &b)| b - a).collect();
    Ok(histogram(&diffs, DIFFERENCE_BINS, -1.0, 1.0))
}
