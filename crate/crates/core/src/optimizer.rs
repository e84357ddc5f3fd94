//! Simultaneous-perturbation stochastic approximation (SPSA) over the ansatz
//! parameters, and the energy-history convergence test.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gain sequences `a_k = a / (k + 1 + A)^alpha`, `c_k = c / (k + 1)^gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpsaSchedule {
    pub a: f64,
    pub c: f64,
    pub big_a: f64,
    pub alpha: f64,
    pub gamma: f64,
}

impl Default for SpsaSchedule {
    fn default() -> Self {
        Self {
            a: 0.1,
            c: 0.1,
            big_a: 10.0,
            alpha: 0.602,
            gamma: 0.101,
        }
    }
}

impl SpsaSchedule {
    pub fn a_k(&self, k: usize) -> f64 {
        self.a / (k as f64 + 1.0 + self.big_a).powf(self.alpha)
    }

    pub fn c_k(&self, k: usize) -> f64 {
        self.c / (k as f64 + 1.0).powf(self.gamma)
    }
}

/// Rademacher (+1/-1) perturbation for `step`, a pure function of the seed.
pub fn perturbation(seed: u64, step: usize, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(step as u64);
    (0..n).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub theta: Vec<f64>,
    pub step: usize,
    pub schedule: SpsaSchedule,
    pub seed: u64,
    pub best: Option<(Vec<f64>, f64)>,
    pending: Option<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(theta: Vec<f64>, schedule: SpsaSchedule, seed: u64) -> Self {
        Self {
            theta,
            step: 0,
            schedule,
            seed,
            best: None,
            pending: None,
        }
    }

    pub fn best_energy(&self) -> Option<f64> {
        self.best.as_ref().map(|b| b.1)
    }

    /// `theta +/- c_k * delta` for the current step.
    pub fn propose(&mut self) -> (Vec<f64>, Vec<f64>) {
        let delta = perturbation(self.seed, self.step, self.theta.len());
        let ck = self.schedule.c_k(self.step);
        let plus = self.theta.iter().zip(&delta).map(|(t, d)| t + ck * d).collect();
        let minus = self.theta.iter().zip(&delta).map(|(t, d)| t - ck * d).collect();
        self.pending = Some(delta);
        (plus, minus)
    }

    /// Gradient step from the energies measured at the pending probes.
    pub fn update(&mut self, e_plus: f64, e_minus: f64) -> Result<()> {
        let delta = self.pending.take().ok_or(Error::NoPendingProbe)?;
        let k = self.step;
        let ck = self.schedule.c_k(k);
        let ak = self.schedule.a_k(k);

        let (e_best, sign) = if e_plus <= e_minus {
            (e_plus, 1.0)
        } else {
            (e_minus, -1.0)
        };
        if self.best.as_ref().is_none_or(|b| e_best < b.1) {
            let probe = self.theta.iter().zip(&delta).map(|(t, d)| t + sign * ck * d).collect();
            self.best = Some((probe, e_best));
        }

        if ck != 0.0 {
            let g = (e_plus - e_minus) / (2.0 * ck);
            // 1/delta_i == delta_i for +/-1 entries
            for (t, d) in self.theta.iter_mut().zip(&delta) {
                *t -= ak * g * d;
            }
        }
        self.step += 1;
        Ok(())
    }
}

/// Append-only record of per-iteration energies.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyHistory {
    pub energies: Vec<f64>,
}

impl EnergyHistory {
    pub fn push(&mut self, e: f64) {
        self.energies.push(e);
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn converged(&self, eps: f64, window: usize) -> bool {
        converged(&self.energies, eps, window)
    }
}

/// True once there are at least `window + 1` energies and the last
/// `window + 1` of them span less than `eps` (`window` consecutive changes).
pub fn converged(history: &[f64], eps: f64, window: usize) -> bool {
    if window == 0 || history.len() < window + 1 {
        return false;
    }
    let tail = &history[history.len() - window - 1..];
    let lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    hi - lo < eps
}
