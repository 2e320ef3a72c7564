//! Discrete-observation hidden Markov model trained by Baum-Welch.
//!
//! Forward and backward passes use per-position scaling constants `c_t`, so
//! `log P(x) = Σ ln c_t` stays finite on sequences thousands of symbols long.
//! The M-step maximizes the expected complete-data log-likelihood over the
//! simplex restricted to entries `≥ floor`; that keeps every probability
//! strictly positive (unseen test symbols still get mass) while remaining a
//! generalized EM step, so the training log-likelihood never decreases.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{self, floored_normalize};
use crate::model::{FeatureMatrix, Instance, Scorer};
use crate::params::ParamSet;
use crate::rng::SplitMix64;

pub const DEFAULT_EMISSION_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmParams {
    pub n_components: usize,
    pub n_iter: usize,
    pub tol: f64,
    pub seed: u64,
    pub emission_floor: f64,
}

impl Default for HmmParams {
    fn default() -> Self {
        HmmParams {
            n_components: 10,
            n_iter: 200,
            tol: 0.01,
            seed: 0,
            emission_floor: DEFAULT_EMISSION_FLOOR,
        }
    }
}

impl HmmParams {
    pub fn from_params(p: &ParamSet) -> Result<Self> {
        let d = HmmParams::default();
        let out = HmmParams {
            n_components: p.count_or("n_components", d.n_components)?,
            n_iter: p.count_or("n_iter", d.n_iter)?,
            tol: p.real_or("tol", d.tol)?,
            seed: p.seed_or("seed", d.seed)?,
            emission_floor: p.real_or("emission_floor", d.emission_floor)?,
        };
        out.validate()?;
        Ok(out)
    }

    pub fn to_params(&self) -> ParamSet {
        ParamSet::new()
            .with("n_components", self.n_components)
            .with("n_iter", self.n_iter)
            .with("tol", self.tol)
            .with("seed", self.seed)
            .with("emission_floor", self.emission_floor)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_components < 1 {
            return Err(Error::invalid("n_components", "must be at least 1"));
        }
        if self.n_iter < 1 {
            return Err(Error::invalid("n_iter", "must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tol", "must be positive"));
        }
        if !(self.emission_floor >= 0.0) {
            return Err(Error::invalid("emission_floor", "must be non-negative"));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        HmmParams { seed, ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmModel {
    n_states: usize,
    n_symbols: usize,
    /// π, length `n_states`.
    initial: Vec<f64>,
    /// A, row-major `n_states × n_states`.
    transition: Vec<f64>,
    /// B, row-major `n_states × n_symbols`.
    emission: Vec<f64>,
    pub train_loglik: f64,
    pub iters_run: usize,
    /// Training log-likelihood before the first and after every M-step.
    pub loglik_history: Vec<f64>,
}

impl HmmModel {
    /// Model from explicit row-stochastic parameters.
    pub fn new(initial: Vec<f64>, transition: Vec<Vec<f64>>, emission: Vec<Vec<f64>>) -> Result<Self> {
        let n_states = initial.len();
        if n_states == 0 {
            return Err(Error::Empty("hidden states"));
        }
        let n_symbols = emission.first().map_or(0, Vec::len);
        if n_symbols == 0 {
            return Err(Error::Empty("vocabulary"));
        }
        if transition.len() != n_states || emission.len() != n_states {
            return Err(Error::DimensionMismatch {
                expected: n_states,
                found: transition.len().min(emission.len()),
            });
        }
        let mut rows: Vec<&[f64]> = vec![&initial];
        rows.extend(transition.iter().map(Vec::as_slice));
        rows.extend(emission.iter().map(Vec::as_slice));
        for (row, values) in rows.iter().enumerate() {
            let sum: f64 = values.iter().sum();
            if values.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::NotStochastic { row, sum });
            }
        }
        if transition.iter().any(|r| r.len() != n_states) {
            return Err(Error::DimensionMismatch {
                expected: n_states,
                found: transition.iter().map(Vec::len).find(|&l| l != n_states).unwrap_or(0),
            });
        }
        if emission.iter().any(|r| r.len() != n_symbols) {
            return Err(Error::DimensionMismatch {
                expected: n_symbols,
                found: emission.iter().map(Vec::len).find(|&l| l != n_symbols).unwrap_or(0),
            });
        }
        Ok(HmmModel {
            n_states,
            n_symbols,
            initial,
            transition: transition.concat(),
            emission: emission.concat(),
            train_loglik: f64::NAN,
            iters_run: 0,
            loglik_history: Vec::new(),
        })
    }

    fn random(n_states: usize, n_symbols: usize, floor: f64, seed: u64) -> Self {
        let mut rng = SplitMix64::new(seed);
        let mut draw_row = |len: usize| {
            let mut row: Vec<f64> = (0..len).map(|_| rng.next_f64()).collect();
            floored_normalize(&mut row, floor);
            row
        };
        let initial = draw_row(n_states);
        let transition = (0..n_states).flat_map(|_| draw_row(n_states)).collect();
        let emission = (0..n_states).flat_map(|_| draw_row(n_symbols)).collect();
        HmmModel {
            n_states,
            n_symbols,
            initial,
            transition,
            emission,
            train_loglik: f64::NAN,
            iters_run: 0,
            loglik_history: Vec::new(),
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_symbols(&self) -> usize {
        self.n_symbols
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn transition_row(&self, i: usize) -> &[f64] {
        &self.transition[i * self.n_states..(i + 1) * self.n_states]
    }

    pub fn emission_row(&self, i: usize) -> &[f64] {
        &self.emission[i * self.n_symbols..(i + 1) * self.n_symbols]
    }

    #[inline]
    fn a(&self, i: usize, j: usize) -> f64 {
        self.transition[i * self.n_states + j]
    }

    #[inline]
    fn b(&self, i: usize, symbol: u32) -> f64 {
        self.emission[i * self.n_symbols + symbol as usize]
    }

    fn check(&self, x: &[u32]) -> Result<()> {
        if x.is_empty() {
            return Err(Error::Empty("observation sequence"));
        }
        match x.iter().find(|&&o| o as usize >= self.n_symbols) {
            Some(&token) => Err(Error::TokenOutOfVocabulary {
                token,
                vocab_size: self.n_symbols,
            }),
            None => Ok(()),
        }
    }

    /// `log P(x | model)` by the scaled forward algorithm.
    pub fn log_likelihood(&self, x: &[u32]) -> Result<f64> {
        self.check(x)?;
        let n = self.n_states;
        let mut alpha: Vec<f64> = (0..n).map(|i| self.initial[i] * self.b(i, x[0])).collect();
        let mut next = vec![0.0; n];
        let mut loglik = scale(&mut alpha);
        for &o in &x[1..] {
            for (j, slot) in next.iter_mut().enumerate() {
                let inflow: f64 = (0..n).map(|i| alpha[i] * self.a(i, j)).sum();
                *slot = inflow * self.b(j, o);
            }
            core::mem::swap(&mut alpha, &mut next);
            loglik += scale(&mut alpha);
        }
        Ok(loglik)
    }

    /// One E-step over all sequences: accumulates expected counts into
    /// `stats` and returns the total log-likelihood.
    fn expectation(&self, seqs: &[&[u32]], stats: &mut Counts, work: &mut Workspace) -> f64 {
        let n = self.n_states;
        stats.clear();
        let mut total = 0.0;
        for x in seqs {
            let len = x.len();
            work.resize(len, n);
            let (alpha, beta, c) = (&mut work.alpha, &mut work.beta, &mut work.scale);

            for i in 0..n {
                alpha[i] = self.initial[i] * self.b(i, x[0]);
            }
            c[0] = scale_sum(&mut alpha[..n]);
            for t in 1..len {
                let (prev, cur) = alpha[(t - 1) * n..(t + 1) * n].split_at_mut(n);
                for j in 0..n {
                    let inflow: f64 = (0..n).map(|i| prev[i] * self.a(i, j)).sum();
                    cur[j] = inflow * self.b(j, x[t]);
                }
                c[t] = scale_sum(cur);
            }
            total += c[..len].iter().map(|&ct| math::ln(ct)).sum::<f64>();

            beta[(len - 1) * n..len * n].iter_mut().for_each(|b| *b = 1.0);
            for t in (0..len - 1).rev() {
                let (cur, nxt) = beta[t * n..(t + 2) * n].split_at_mut(n);
                for i in 0..n {
                    let out: f64 = (0..n).map(|j| self.a(i, j) * self.b(j, x[t + 1]) * nxt[j]).sum();
                    cur[i] = out / c[t + 1];
                }
            }

            for i in 0..n {
                stats.initial[i] += alpha[i] * beta[i];
            }
            for t in 0..len {
                for i in 0..n {
                    let gamma = alpha[t * n + i] * beta[t * n + i];
                    stats.emission[i * self.n_symbols + x[t] as usize] += gamma;
                }
            }
            for t in 0..len - 1 {
                for i in 0..n {
                    let a_ti = alpha[t * n + i] / c[t + 1];
                    for j in 0..n {
                        stats.transition[i * n + j] +=
                            a_ti * self.a(i, j) * self.b(j, x[t + 1]) * beta[(t + 1) * n + j];
                    }
                }
            }
        }
        total
    }

    fn maximize(&mut self, stats: &Counts, floor: f64) {
        let (n, v) = (self.n_states, self.n_symbols);
        self.initial.copy_from_slice(&stats.initial);
        floored_normalize(&mut self.initial, floor);
        self.transition.copy_from_slice(&stats.transition);
        for row in self.transition.chunks_mut(n) {
            floored_normalize(row, floor);
        }
        self.emission.copy_from_slice(&stats.emission);
        for row in self.emission.chunks_mut(v) {
            floored_normalize(row, floor);
        }
    }
}

/// Normalizes in place, returning `ln` of the removed scale.
fn scale(v: &mut [f64]) -> f64 {
    math::ln(scale_sum(v))
}

fn scale_sum(v: &mut [f64]) -> f64 {
    let sum: f64 = v.iter().sum();
    if sum > 0.0 {
        v.iter_mut().for_each(|x| *x /= sum);
    }
    sum
}

struct Counts {
    initial: Vec<f64>,
    transition: Vec<f64>,
    emission: Vec<f64>,
}

impl Counts {
    fn new(n: usize, v: usize) -> Self {
        Counts {
            initial: vec![0.0; n],
            transition: vec![0.0; n * n],
            emission: vec![0.0; n * v],
        }
    }

    fn clear(&mut self) {
        for buf in [&mut self.initial, &mut self.transition, &mut self.emission] {
            buf.iter_mut().for_each(|x| *x = 0.0);
        }
    }
}

#[derive(Default)]
struct Workspace {
    alpha: Vec<f64>,
    beta: Vec<f64>,
    scale: Vec<f64>,
}

impl Workspace {
    fn resize(&mut self, len: usize, n: usize) {
        self.alpha.resize(len * n, 0.0);
        self.beta.resize(len * n, 0.0);
        self.scale.resize(len, 0.0);
    }
}

/// Trains on the sequence view of `v`.
pub fn train_hmm(v: &FeatureMatrix, params: &HmmParams) -> Result<HmmModel> {
    let seqs = v.sequences().ok_or(Error::MissingSequenceView)?;
    let refs: Vec<&[u32]> = seqs.iter().map(Vec::as_slice).collect();
    train_hmm_on(&refs, v.vocab_size(), params)
}

/// Baum-Welch on raw sequences over `0..vocab_size`.
///
/// Iterates until the log-likelihood changes by less than `tol` or `n_iter`
/// M-steps have run. `train_loglik` is the log-likelihood of the returned
/// parameters.
pub fn train_hmm_on(seqs: &[&[u32]], vocab_size: usize, params: &HmmParams) -> Result<HmmModel> {
    params.validate()?;
    if vocab_size == 0 {
        return Err(Error::Empty("vocabulary"));
    }
    if seqs.is_empty() || seqs.iter().any(|s| s.is_empty()) {
        return Err(Error::Empty("training sequences"));
    }
    let mut model = HmmModel::random(params.n_components, vocab_size, params.emission_floor, params.seed);
    for s in seqs {
        model.check(s)?;
    }
    let mut stats = Counts::new(model.n_states, vocab_size);
    let mut work = Workspace::default();

    let mut loglik = model.expectation(seqs, &mut stats, &mut work);
    let mut history = vec![loglik];
    let mut iters = 0;
    while iters < params.n_iter {
        model.maximize(&stats, params.emission_floor);
        iters += 1;
        let next = model.expectation(seqs, &mut stats, &mut work);
        history.push(next);
        let delta = next - loglik;
        loglik = next;
        if delta.abs() < params.tol {
            break;
        }
    }
    model.train_loglik = loglik;
    model.iters_run = iters;
    model.loglik_history = history;
    Ok(model)
}

/// `log P(x | model)`.
pub fn hmm_score(model: &HmmModel, x: &[u32]) -> Result<f64> {
    model.log_likelihood(x)
}

impl Scorer for HmmModel {
    fn score(&self, x: Instance<'_>) -> Result<f64> {
        self.log_likelihood(x.tokens()?)
    }
}
