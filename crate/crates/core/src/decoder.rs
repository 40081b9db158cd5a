//! Most likely hidden labeling (Viterbi) and per-path log-weights.
//!
//! The Viterbi table `l*_j(d, i)` uses exactly the branch factors of the
//! forward recursion, with the sum over incoming branches replaced by a
//! maximum. Every cell remembers which branch won, and that record includes
//! the label of event `j`: cell `(0, i)` can be reached by noise from
//! `(0, i)` or by a killing offspring from `(1, i)`, so the predecessor state
//! alone would not identify the label.
//!
//! Ties prefer the noise branch, then the lower mother index. The final
//! argmax prefers `d = 0`, then the lower `i`.

use crate::error::{Error, Result};
use crate::model::{Catalog, ClusterIntensity, Event, HiddenLabel, LabeledPath};
use crate::scalar::{flush, ln_or_neg_inf, Scalar};
use crate::transition::Transition;

const KILL: u8 = 1;
const SURVIVE: u8 = 2;

/// Winning branch into one cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Backpointer {
    pub label: HiddenLabel,
    pub from_active: bool,
    pub from_mother: usize,
}

#[derive(Debug, Clone, PartialEq)]
struct StepBack {
    /// Bit flags per mother index `i < j`: `KILL` if `(0, i)` was reached by
    /// a killing offspring, `SURVIVE` if `(1, i)` was reached by a surviving
    /// offspring. Cleared bits mean the noise branch won.
    flags: Vec<u8>,
    /// Predecessor `k` of the new-mother cell `(1, j)`.
    mother_from: usize,
}

/// Viterbi table with its backpointers.
#[derive(Debug, Clone, PartialEq)]
pub struct ViterbiMatrix<T> {
    j: usize,
    t: T,
    inactive: Vec<T>,
    active: Vec<T>,
    log_normalizers: Vec<T>,
    mothers: Vec<(Event<T>, T)>,
    back: Vec<StepBack>,
    normalize: bool,
}

impl<T: Scalar> ViterbiMatrix<T> {
    fn origin(n: usize, normalize: bool) -> Self {
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
            back: Vec::with_capacity(n),
            normalize,
        }
    }

    pub fn step(&self) -> usize {
        self.j
    }

    /// `l*_j(0, i)` for `i = 0..=j`.
    pub fn inactive(&self) -> &[T] {
        &self.inactive
    }

    /// `l*_j(1, i)` for `i = 0..=j`.
    pub fn active(&self) -> &[T] {
        &self.active
    }

    pub fn log_normalizers(&self) -> &[T] {
        &self.log_normalizers
    }

    /// Winning branch into cell `(d, i)` at step `j` (1-based). `None` for
    /// cells that are structurally unreachable.
    pub fn backpointer(&self, j: usize, active: bool, i: usize) -> Option<Backpointer> {
        if j == 0 || j > self.j || i > j {
            return None;
        }
        let back = &self.back[j - 1];
        if active {
            if i == 0 {
                return None;
            }
            if i == j {
                return Some(Backpointer {
                    label: HiddenLabel::Mother,
                    from_active: false,
                    from_mother: back.mother_from,
                });
            }
            let survive = back.flags[i] & SURVIVE != 0;
            Some(Backpointer {
                label: if survive {
                    HiddenLabel::Offspring { kills: false }
                } else {
                    HiddenLabel::Noise
                },
                from_active: true,
                from_mother: i,
            })
        } else {
            if i == j {
                return None;
            }
            let kill = i > 0 && back.flags[i] & KILL != 0;
            Some(Backpointer {
                label: if kill {
                    HiddenLabel::Offspring { kills: true }
                } else {
                    HiddenLabel::Noise
                },
                from_active: kill,
                from_mother: i,
            })
        }
    }

    fn advance<M: ClusterIntensity<T>>(
        &mut self,
        event: &Event<T>,
        model: &M,
        trans: &mut Transition<T>,
    ) -> Result<()> {
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
        trans.compute(model, event, self.t, &self.mothers);
        let j = self.j + 1;

        let mut mother_from = 0;
        let mut best_inactive = self.inactive[0];
        for (k, &v) in self.inactive.iter().enumerate().skip(1) {
            if v > best_inactive {
                best_inactive = v;
                mother_from = k;
            }
        }

        let mut flags = vec![0u8; j];
        let mut top = trans.noise_inactive * self.inactive[0];
        self.inactive[0] = top;
        for i in 1..j {
            let b = trans.mothers[i];
            let a = self.active[i];
            let stay = trans.noise_inactive * self.inactive[i];
            let kill = b.kill * a;
            let off = if kill > stay {
                flags[i] |= KILL;
                kill
            } else {
                stay
            };
            let noise = b.noise * a;
            let survive = b.survive * a;
            let on = if survive > noise {
                flags[i] |= SURVIVE;
                survive
            } else {
                noise
            };
            self.inactive[i] = off;
            self.active[i] = on;
            top = top.max(off).max(on);
        }
        let fresh = trans.mother * best_inactive;
        self.inactive.push(T::zero());
        self.active.push(fresh);
        top = top.max(fresh);

        self.back.push(StepBack { flags, mother_from });
        self.mothers.push((*event, model.offspring_total(event)));
        self.j = j;
        self.t = event.t;

        if self.normalize && top > T::zero() && top.is_finite() {
            self.log_normalizers.push(top.ln());
            let inv = top.recip();
            for v in self.inactive.iter_mut().chain(self.active.iter_mut()) {
                *v = flush(*v * inv);
            }
        } else {
            self.log_normalizers.push(T::zero());
        }
        Ok(())
    }

    /// Final argmax cell: `(d, i)` with its value.
    fn best_cell(&self) -> (bool, usize, T) {
        let mut best = (false, 0, self.inactive[0]);
        for (i, &v) in self.inactive.iter().enumerate().skip(1) {
            if v > best.2 {
                best = (false, i, v);
            }
        }
        for (i, &v) in self.active.iter().enumerate().skip(1) {
            if v > best.2 {
                best = (true, i, v);
            }
        }
        best
    }

    fn backtrack(&self) -> Result<LabeledPath> {
        let (mut d, mut i, _) = self.best_cell();
        let mut labels = vec![HiddenLabel::Noise; self.j];
        for j in (1..=self.j).rev() {
            let bp = self
                .backpointer(j, d, i)
                .ok_or(Error::StateMismatch(format!("no backpointer at step {j}")))?;
            labels[j - 1] = bp.label;
            d = bp.from_active;
            i = bp.from_mother;
        }
        LabeledPath::from_labels(labels)
    }
}

/// Runs the Viterbi recursion over a catalog. With `normalize = false` the
/// table is left unscaled, which underflows on long catalogs and is only
/// meant for checking that scaling changes no decision.
pub fn viterbi_matrix<T: Scalar, M: ClusterIntensity<T>>(
    catalog: &Catalog<T>,
    model: &M,
    normalize: bool,
) -> Result<ViterbiMatrix<T>> {
    let n = catalog.len();
    let mut vm = ViterbiMatrix::origin(n, normalize);
    let mut trans = Transition::with_capacity(n);
    for ev in catalog.events() {
        vm.advance(ev, model, &mut trans)?;
    }
    Ok(vm)
}

/// Most likely labeling and its log-weight (same convention as
/// [`path_weight`]).
pub fn viterbi_decode_with<T: Scalar, M: ClusterIntensity<T>>(
    catalog: &Catalog<T>,
    model: &M,
    normalize: bool,
) -> Result<(LabeledPath, T)> {
    if catalog.is_empty() {
        return Err(Error::EmptyCatalog);
    }
    let vm = viterbi_matrix(catalog, model, normalize)?;
    let path = vm.backtrack()?;
    let (_, _, top) = vm.best_cell();
    let logc: T = vm.log_normalizers.iter().copied().sum();
    let weight = logc + ln_or_neg_inf(top) - model.noise_total() * vm.t;
    Ok((path, weight))
}

pub fn viterbi_decode<T: Scalar, M: ClusterIntensity<T>>(
    catalog: &Catalog<T>,
    model: &M,
) -> Result<(LabeledPath, T)> {
    viterbi_decode_with(catalog, model, true)
}

/// Log-weight of one complete labeling: per-event densities (`γ`, `ε`, or
/// `λ` times `p` or `q`), the survival of the current regime over every
/// inter-event gap, and the noise survival `−Γ τₙ`.
pub fn path_weight<T: Scalar, M: ClusterIntensity<T>>(
    catalog: &Catalog<T>,
    path: &LabeledPath,
    model: &M,
) -> Result<T> {
    if path.len() != catalog.len() {
        return Err(Error::PathLength {
            path: path.len(),
            catalog: catalog.len(),
        });
    }
    let events = catalog.events();
    let mut lw = T::zero();
    let mut prev_t = T::zero();
    let mut mother_total = T::zero();
    for (pos, ev) in events.iter().enumerate() {
        let (active, mother) = path.state_before(ev.index);
        let dt = ev.t - prev_t;
        let label = path.labels()[pos];
        if active {
            lw = lw - mother_total * dt;
            match label {
                HiddenLabel::Noise => lw = lw + ln_or_neg_inf(model.noise_density(ev)),
                HiddenLabel::Offspring { kills } => {
                    let k = model.offspring_density(ev, &events[mother - 1]);
                    let f = if kills {
                        model.kill_probability()
                    } else {
                        model.survive_probability()
                    };
                    lw = lw + ln_or_neg_inf(k) + ln_or_neg_inf(f);
                }
                HiddenLabel::Mother => {
                    return Err(Error::InconsistentPath {
                        index: ev.index,
                        reason: "mother while a cluster is active",
                    })
                }
            }
        } else {
            lw = lw - model.initiation_total() * dt;
            match label {
                HiddenLabel::Noise => lw = lw + ln_or_neg_inf(model.noise_density(ev)),
                HiddenLabel::Mother => {
                    lw = lw + ln_or_neg_inf(model.initiation_density(ev));
                    mother_total = model.offspring_total(ev);
                }
                HiddenLabel::Offspring { .. } => {
                    return Err(Error::InconsistentPath {
                        index: ev.index,
                        reason: "offspring while no cluster is active",
                    })
                }
            }
        }
        prev_t = ev.t;
    }
    Ok(lw - model.noise_total() * prev_t)
}
