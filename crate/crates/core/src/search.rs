//! Derivative-free search over interferometers and heralding records.
//!
//! Candidates are parameterized by Givens coordinates (see
//! [`GivensParameterization`]), so the feasible set is a box: rotation angles
//! in `[0, π/2]` and periodic phases. The diagonal phases of the
//! parameterization only rephase input columns, which leaves every
//! probability unchanged, so they are pinned to zero.
//!
//! Each job is a compass (coordinate pattern) search started from a
//! Haar-random point for one detection pattern. Jobs are scheduled by
//! successive halving: every round the budget is split evenly across the
//! surviving jobs, then the better half continues. Jobs within a round run in
//! parallel; all bookkeeping happens in job order, so results depend only on
//! the problem and its seed.

use std::f64::consts::{FRAC_PI_2, TAU};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::general_bound;
use crate::conditional::{evaluate, ConditionalDistribution};
use crate::ensemble::{DetectionPattern, InputEnsemble};
use crate::unitary::{epsilon_scheme, haar_random, EpsilonSchemeSpec, GivensParameterization};
use crate::{Error, Result, THEOREM_SLACK};

/// Score given to records that are never heralded (or have no defined ratio).
pub const UNHERALDED_SCORE: f64 = -2.0;
/// Compass steps stop once the angle step falls below this.
pub const MIN_STEP: f64 = 1e-6;
const INITIAL_STEP_FRACTION: f64 = 0.125;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Maximize `c₁`.
    MaxC1,
    /// Maximize `c₁/c₀`.
    MaxRatio10,
    /// Maximize `c₁` subject to `Σ_{n≥2} c_n ≤ cleanliness_tol`.
    MaxC1Clean,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternPolicy {
    Fixed(DetectionPattern),
    /// Every record up to relabelling of the detectors, with `D < M`.
    EnumerateAll,
}

fn default_cleanliness_tol() -> f64 {
    1e-9
}

fn default_restarts() -> usize {
    20
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchProblem {
    pub n_modes: usize,
    pub ensemble: InputEnsemble,
    pub objective: Objective,
    #[serde(default = "default_cleanliness_tol")]
    pub cleanliness_tol: f64,
    pub pattern_policy: PatternPolicy,
    /// Maximum number of objective evaluations.
    pub budget: u64,
    pub seed: u64,
    /// Starting points per detection pattern.
    #[serde(default = "default_restarts")]
    pub restarts: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub evaluation: u64,
    pub incumbent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best_unitary: GivensParameterization,
    pub best_pattern: DetectionPattern,
    pub best_value: f64,
    pub best_distribution: ConditionalDistribution,
    pub evaluations_used: u64,
    /// Every improvement of the global incumbent, in evaluation order.
    pub trace: Vec<TracePoint>,
}

impl SearchProblem {
    pub fn validate(&self) -> Result<()> {
        if self.n_modes < 2 {
            return Err(Error::Dimension(format!(
                "search needs at least 2 modes, got {}",
                self.n_modes
            )));
        }
        if self.ensemble.len() != self.n_modes {
            return Err(Error::Dimension(format!(
                "ensemble has {} modes, problem has {}",
                self.ensemble.len(),
                self.n_modes
            )));
        }
        if self.budget == 0 || self.restarts == 0 {
            return Err(Error::InvalidParameter("budget and restarts must be at least 1".into()));
        }
        if self.cleanliness_tol.is_nan() || self.cleanliness_tol < 0.0 {
            return Err(Error::InvalidParameter("cleanliness_tol must be non-negative".into()));
        }
        if self.ensemble.odds_ratio().is_none() {
            return Err(Error::PMaxOne);
        }
        if let PatternPolicy::Fixed(p) = &self.pattern_policy {
            if p.len() + 1 != self.n_modes {
                return Err(Error::Dimension(format!(
                    "fixed pattern has {} detectors, expected {}",
                    p.len(),
                    self.n_modes - 1
                )));
            }
        }
        Ok(())
    }

    fn patterns(&self) -> Vec<DetectionPattern> {
        match &self.pattern_policy {
            PatternPolicy::Fixed(p) => vec![p.clone()],
            PatternPolicy::EnumerateAll => {
                // D ≥ M leaves no photon for mode 1.
                let max_total = self.ensemble.active_modes().max(1) - 1;
                DetectionPattern::enumerate_canonical(self.n_modes, max_total)
            }
        }
    }

    /// Objective value of a distribution; higher is better.
    pub fn score(&self, dist: &ConditionalDistribution) -> f64 {
        if !dist.is_heralded() {
            return UNHERALDED_SCORE;
        }
        match self.objective {
            Objective::MaxC1 => dist.coefficient(1),
            Objective::MaxRatio10 => dist.ratio_10.unwrap_or(UNHERALDED_SCORE),
            Objective::MaxC1Clean => {
                let excess = dist.multiphoton_weight() - self.cleanliness_tol;
                if excess > 0.0 {
                    -excess
                } else {
                    dist.coefficient(1)
                }
            }
        }
    }

    /// Scores a candidate, enforcing the improvement bound on the way.
    fn assess(
        &self,
        params: &GivensParameterization,
        pattern: &DetectionPattern,
    ) -> Result<(f64, ConditionalDistribution)> {
        let unitary = params.realize()?;
        let dist = evaluate(&unitary, &self.ensemble, pattern)?;
        if let Some(ratio) = dist.ratio_10 {
            let bound = general_bound(&self.ensemble, pattern)?;
            if ratio > bound + THEOREM_SLACK {
                return Err(Error::NumericIntegrity(format!(
                    "c1/c0 = {ratio} exceeds the bound {bound} for pattern {:?}",
                    pattern.counts()
                )));
            }
        }
        Ok((self.score(&dist), dist))
    }
}

/// Compass search state for one (pattern, starting point) pair.
#[derive(Clone, Debug)]
struct Job {
    pattern: DetectionPattern,
    params: GivensParameterization,
    value: f64,
    step: f64,
    cursor: usize,
    improved_this_sweep: bool,
    started: bool,
    converged: bool,
}

struct RoundLog {
    used: u64,
    /// (local evaluation index, value) of each improvement of this job.
    improvements: Vec<(u64, f64)>,
}

impl Job {
    fn new(pattern: DetectionPattern, params: GivensParameterization) -> Self {
        Self {
            pattern,
            params,
            value: f64::NEG_INFINITY,
            step: INITIAL_STEP_FRACTION,
            cursor: 0,
            improved_this_sweep: false,
            started: false,
            converged: false,
        }
    }

    fn free_coordinates(&self) -> usize {
        2 * GivensParameterization::rotation_count(self.params.dim)
    }

    fn moved(&self, coord: usize, direction: f64) -> GivensParameterization {
        let m = GivensParameterization::rotation_count(self.params.dim);
        let mut trial = self.params.clone();
        if coord < m {
            let a = &mut trial.angles[coord];
            *a = (*a + direction * self.step * FRAC_PI_2).clamp(0.0, FRAC_PI_2);
        } else {
            let p = &mut trial.phases[coord - m];
            *p = (*p + direction * self.step * TAU).rem_euclid(TAU);
        }
        trial
    }

    fn run(&mut self, problem: &SearchProblem, budget: u64) -> Result<RoundLog> {
        let mut log = RoundLog {
            used: 0,
            improvements: Vec::new(),
        };
        if !self.started && budget > 0 {
            self.value = problem.assess(&self.params, &self.pattern)?.0;
            self.started = true;
            log.improvements.push((0, self.value));
            log.used += 1;
        }
        let coords = self.free_coordinates();
        while log.used < budget && !self.converged {
            let coord = self.cursor;
            let mut accepted = false;
            for direction in [1.0, -1.0] {
                if log.used >= budget {
                    break;
                }
                let trial = self.moved(coord, direction);
                if trial == self.params {
                    continue;
                }
                let (value, _) = problem.assess(&trial, &self.pattern)?;
                log.used += 1;
                if value > self.value {
                    self.params = trial;
                    self.value = value;
                    log.improvements.push((log.used - 1, value));
                    accepted = true;
                    break;
                }
            }
            if log.used >= budget && !accepted {
                // Out of budget mid-coordinate; resume here next round.
                break;
            }
            self.improved_this_sweep |= accepted;
            if !accepted {
                self.cursor += 1;
            }
            if self.cursor == coords {
                self.cursor = 0;
                if !self.improved_this_sweep {
                    self.step *= 0.5;
                    if self.step * FRAC_PI_2 < MIN_STEP {
                        self.converged = true;
                    }
                }
                self.improved_this_sweep = false;
            }
        }
        Ok(log)
    }
}

fn starting_point(n_modes: usize, seed: u64) -> Result<GivensParameterization> {
    let mut params = GivensParameterization::from_unitary(&haar_random(n_modes, seed)?);
    let m = GivensParameterization::rotation_count(n_modes);
    params.phases[m..].iter_mut().for_each(|p| *p = 0.0);
    Ok(params)
}

/// Multi-start search for the best interferometer and heralding record.
pub fn optimize(problem: &SearchProblem) -> Result<SearchResult> {
    problem.validate()?;
    let patterns = problem.patterns();
    let mut seeds = ChaCha20Rng::seed_from_u64(problem.seed);
    let mut jobs = Vec::with_capacity(patterns.len() * problem.restarts);
    for pattern in &patterns {
        for _ in 0..problem.restarts {
            jobs.push(Job::new(
                pattern.clone(),
                starting_point(problem.n_modes, seeds.next_u64())?,
            ));
        }
    }

    let rounds = (usize::BITS - (jobs.len().max(1) - 1).leading_zeros()) as u64 + 1;
    let mut alive: Vec<usize> = (0..jobs.len()).collect();
    let mut used: u64 = 0;
    let mut trace: Vec<TracePoint> = Vec::new();
    let mut incumbent = f64::NEG_INFINITY;

    for round in 0..rounds {
        let remaining = problem.budget - used;
        let round_budget = if round + 1 == rounds {
            remaining
        } else {
            remaining / (rounds - round)
        };
        let active: Vec<usize> = alive.iter().copied().filter(|&j| !jobs[j].converged).collect();
        if active.is_empty() || round_budget == 0 {
            break;
        }
        let share = round_budget / active.len() as u64;
        let extra = round_budget % active.len() as u64;
        let slices: Vec<u64> = (0..active.len() as u64).map(|i| share + u64::from(i < extra)).collect();

        let mut selected: Vec<&mut Job> = Vec::with_capacity(active.len());
        let mut rest = jobs.as_mut_slice();
        let mut offset = 0;
        for &j in &active {
            let (_, tail) = rest.split_at_mut(j - offset);
            let (head, tail) = tail.split_at_mut(1);
            selected.push(&mut head[0]);
            rest = tail;
            offset = j + 1;
        }
        let logs = selected
            .into_par_iter()
            .zip(slices.par_iter())
            .map(|(job, &slice)| job.run(problem, slice))
            .collect::<Result<Vec<_>>>()?;

        for log in &logs {
            for &(local, value) in &log.improvements {
                if value > incumbent {
                    incumbent = value;
                    trace.push(TracePoint {
                        evaluation: used + local,
                        incumbent: value,
                    });
                }
            }
            used += log.used;
        }

        // Keep the better half (ties broken by job order).
        let mut ranked = alive.clone();
        ranked.sort_by(|&a, &b| jobs[b].value.total_cmp(&jobs[a].value).then(a.cmp(&b)));
        ranked.truncate(ranked.len().div_ceil(2));
        ranked.sort_unstable();
        alive = ranked;
        if used >= problem.budget {
            break;
        }
    }

    let best = jobs
        .iter()
        .enumerate()
        .filter(|(_, j)| j.started)
        .max_by(|(ia, a), (ib, b)| a.value.total_cmp(&b.value).then(ib.cmp(ia)))
        .map(|(_, j)| j)
        .ok_or_else(|| Error::InvalidParameter("budget too small to evaluate any candidate".into()))?;
    let (best_value, best_distribution) = problem.assess(&best.params, &best.pattern)?;
    Ok(SearchResult {
        best_unitary: best.params.clone(),
        best_pattern: best.pattern.clone(),
        best_value,
        best_distribution,
        evaluations_used: used,
        trace,
    })
}

/// `D(N − D)/(N − 1)`: small-ε limit of `(c₁/c₀)/R` for the ε-scheme.
pub fn predicted_ratio_factor(n_modes: usize, detected: usize) -> f64 {
    (detected * (n_modes - detected)) as f64 / (n_modes - 1) as f64
}

/// `(D + 1)(N − D − 1) / (2D(N − D))`: small-ε limit of `(c₂/c₁)/(c₁/c₀)`.
pub fn predicted_two_photon_penalty(n_modes: usize, detected: usize) -> f64 {
    ((detected + 1) * (n_modes - detected - 1)) as f64 / (2 * detected * (n_modes - detected)) as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub ratio_10: Option<f64>,
    pub ratio_21: Option<f64>,
    pub herald_prob: f64,
    /// `(c₁/c₀)/R`.
    pub ratio_factor: Option<f64>,
    /// `(c₂/c₁)/(c₁/c₀)`.
    pub two_photon_penalty: Option<f64>,
}

/// Evaluates the ε-scheme with `D` photons on detector 2 and none elsewhere,
/// for uniform sources of efficiency `p`.
pub fn sweep_epsilon_scheme(n_modes: usize, p: f64, detected: usize, epsilons: &[f64]) -> Result<Vec<SweepRow>> {
    if n_modes < 2 || detected == 0 || detected >= n_modes {
        return Err(Error::Dimension(format!(
            "sweep needs 1 ≤ D ≤ N − 1, got N = {n_modes}, D = {detected}"
        )));
    }
    let ensemble = InputEnsemble::uniform(n_modes, p)?;
    let odds = ensemble.odds_ratio().ok_or(Error::PMaxOne)?;
    let mut counts = vec![0; n_modes - 1];
    counts[0] = detected;
    let pattern = DetectionPattern::new(counts);
    epsilons
        .iter()
        .map(|&epsilon| {
            let u = epsilon_scheme(EpsilonSchemeSpec { n_modes, epsilon })?;
            let dist = evaluate(&u, &ensemble, &pattern)?;
            Ok(SweepRow {
                epsilon,
                ratio_10: dist.ratio_10,
                ratio_21: dist.ratio_21,
                herald_prob: dist.herald_prob,
                ratio_factor: dist.ratio_10.map(|r| r / odds),
                two_photon_penalty: match (dist.ratio_21, dist.ratio_10) {
                    (Some(r21), Some(r10)) if r10 > 0.0 => Some(r21 / r10),
                    _ => None,
                },
            })
        })
        .collect()
}
