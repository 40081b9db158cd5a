//! Per-step branch factors shared by the forward and Viterbi recursions.
//!
//! State `(d, i)` after event `j` means: cluster active (`d = 1`) or not,
//! and `i` the latest mother (0 for none yet). Moving from event `j − 1` to
//! event `j` over a gap `Δ`, each hidden history picks up its interval
//! survival factor and the density of event `j` under its label:
//!
//! | branch                      | from    | to      | factor            |
//! |-----------------------------|---------|---------|-------------------|
//! | noise while inactive        | (0, i)  | (0, i)  | γⱼ e^{−εΔ}         |
//! | killing offspring           | (1, i)  | (0, i)  | p λⱼ,ᵢ e^{−aᵢΔ}    |
//! | noise while active          | (1, i)  | (1, i)  | γⱼ e^{−aᵢΔ}        |
//! | surviving offspring         | (1, i)  | (1, i)  | q λⱼ,ᵢ e^{−aᵢΔ}    |
//! | new mother                  | (0, k)  | (1, j)  | εⱼ e^{−εΔ}         |
//!
//! The common noise survival `e^{−Γ Δ}` is factored out of every branch and
//! applied once to the final log-likelihood.

use crate::model::{ClusterIntensity, Event};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct MotherBranches<T> {
    pub kill: T,
    pub noise: T,
    pub survive: T,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Transition<T> {
    pub noise_inactive: T,
    pub mother: T,
    /// Indexed by mother index `i` (slot 0 unused).
    pub mothers: Vec<MotherBranches<T>>,
}

impl<T: Scalar> Transition<T> {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            noise_inactive: T::zero(),
            mother: T::zero(),
            mothers: Vec::with_capacity(n + 1),
        }
    }

    /// Fills the factors for the step into `event`, given the previous event
    /// time and the mothers seen so far (`mothers[i - 1]` is event `i` with its
    /// precomputed offspring total).
    pub fn compute<M: ClusterIntensity<T>>(
        &mut self,
        model: &M,
        event: &Event<T>,
        prev_t: T,
        mothers: &[(Event<T>, T)],
    ) {
        let dt = event.t - prev_t;
        let inactive_survival = (-model.initiation_total() * dt).exp();
        let noise = model.noise_density(event);
        let p = model.kill_probability();
        let q = model.survive_probability();
        self.noise_inactive = noise * inactive_survival;
        self.mother = model.initiation_density(event) * inactive_survival;
        self.mothers.clear();
        self.mothers.push(MotherBranches {
            kill: T::zero(),
            noise: T::zero(),
            survive: T::zero(),
        });
        // interior mothers share the same offspring total, so one survival
        // factor serves most of them
        let peak = mothers.iter().fold(T::neg_infinity(), |acc, (_, a)| acc.max(*a));
        let peak_survival = (-peak * dt).exp();
        for (m, a) in mothers {
            let survival = if *a == peak {
                peak_survival
            } else {
                (-*a * dt).exp()
            };
            let kernel = model.offspring_density(event, m) * survival;
            self.mothers.push(MotherBranches {
                kill: p * kernel,
                noise: noise * survival,
                survive: q * kernel,
            });
        }
    }
}
