// Copyright 2026 The qdrift Developers
// SPDX-License-Identifier: Apache-2.0

//! Parallel ensembles with results that do not depend on the worker count.
//!
//! Realizations are cut into blocks whose size depends only on the number
//! of realizations. Each block is reduced sequentially in realization order
//! and the block moments are merged in a fixed pairwise tree, so the
//! floating-point result is the same for any scheduling.

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{StateVector, TightBindingModel};
use crate::noise::{derive_stream, Distribution, NoiseSpec};
use crate::observables::{loschmidt_curve, sigma_from_total, trapezoid, EnsembleStats};
use crate::propagator::Propagator;
use crate::unraveling::{Unraveling, UnravelingKind};

/// Convergence rows deviating more than this from the row average are
/// flagged.
pub const CONVERGENCE_FLAG: f64 = 0.15;

/// Count, mean and summed squared deviations per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    pub fn new(cells: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; cells],
            m2: vec![0.0; cells],
        }
    }

    pub fn push(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.mean.len());
        self.count += 1;
        let n = self.count as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let d = v - *m;
            *m += d / n;
            *s += d * (v - *m);
        }
    }

    /// Pairwise merge of two disjoint samples.
    pub fn merge(mut self, other: &Moments) -> Self {
        if other.count == 0 {
            return self;
        }
        if self.count == 0 {
            return other.clone();
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        for k in 0..self.mean.len() {
            let d = other.mean[k] - self.mean[k];
            self.mean[k] += d * nb / n;
            self.m2[k] += other.m2[k] + d * d * na * nb / n;
        }
        self.count += other.count;
        self
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// `Σ_s (x_s − x̄)²` per cell.
    pub fn m2(&self) -> &[f64] {
        &self.m2
    }

    /// Standard error of the mean, zero for fewer than two samples.
    pub fn stderr(&self) -> Vec<f64> {
        if self.count < 2 {
            return vec![0.0; self.mean.len()];
        }
        let n = self.count as f64;
        self.m2.iter().map(|s| (s / (n - 1.0) / n).sqrt()).collect()
    }

    /// `Σ_s (x_s − r)²` per cell for a reference `r`.
    pub fn squared_deviation_from(&self, reference: &[f64]) -> Vec<f64> {
        let n = self.count as f64;
        self.m2
            .iter()
            .zip(&self.mean)
            .zip(reference)
            .map(|((s, m), r)| s + n * (m - r) * (m - r))
            .collect()
    }
}

/// Realizations per block for an ensemble of `n`.
pub fn block_size(n: u64) -> u64 {
    n.div_ceil(256).max(1)
}

/// Scheduling options shared by all ensemble drivers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schedule {
    pub workers: usize,
    /// Progress lines on standard error.
    pub progress: bool,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            workers: 1,
            progress: false,
        }
    }
}

/// Reduces `sample(r, buf)` over realizations `first..first + n`. Each call
/// fills `buf` (length `cells`) for one realization.
pub fn accumulate<F>(cells: usize, first: u64, n: u64, schedule: Schedule, sample: F) -> Result<Moments>
where
    F: Fn(u64, &mut [f64]) -> Result<()> + Sync,
{
    if n == 0 {
        return Err(Error::arg("an ensemble needs at least one realization"));
    }
    if schedule.workers == 0 {
        return Err(Error::arg("worker count must be >= 1"));
    }
    let bs = block_size(n);
    let n_blocks = n.div_ceil(bs);
    let done = AtomicU64::new(0);
    let report_every = (n / 10).max(1);
    let run_block = |b: u64| -> (u64, Result<Moments>) {
        let mut acc = Moments::new(cells);
        let mut buf = vec![0.0; cells];
        let lo = b * bs;
        let hi = (lo + bs).min(n);
        for i in lo..hi {
            if let Err(e) = sample(first + i, &mut buf) {
                return (acc.count(), Err(e));
            }
            acc.push(&buf);
            let finished = done.fetch_add(1, Ordering::Relaxed) + 1;
            if schedule.progress && (finished.is_multiple_of(report_every) || finished == n) {
                eprintln!("[qdrift] {finished}/{n} realizations");
            }
        }
        (acc.count(), Ok(acc))
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(schedule.workers)
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    let blocks: Vec<(u64, Result<Moments>)> = pool.install(|| (0..n_blocks).into_par_iter().map(run_block).collect());
    let completed: u64 = blocks.iter().map(|(c, _)| c).sum();
    let mut parts = Vec::with_capacity(blocks.len());
    for (_, res) in blocks {
        match res {
            Ok(m) => parts.push(m),
            Err(source) => {
                return Err(Error::Partial {
                    completed,
                    total: n,
                    source: Box::new(source),
                })
            }
        }
    }
    Ok(tree_merge(parts))
}

fn tree_merge(mut parts: Vec<Moments>) -> Moments {
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(a.merge(&b)),
                None => next.push(a),
            }
        }
        parts = next;
    }
    parts.pop().expect("at least one block")
}

/// One ensemble of density trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleRun {
    pub kind: UnravelingKind,
    pub distribution: Distribution,
    pub n_realizations: u64,
    pub master_seed: u64,
    /// Index of the first realization; disjoint ranges give independent
    /// ensembles under the same seed.
    pub first_realization: u64,
    pub stride: u64,
    pub schedule: Schedule,
}

impl EnsembleRun {
    pub fn new(kind: UnravelingKind, n_realizations: u64, master_seed: u64) -> Self {
        Self {
            kind,
            distribution: Distribution::Lorentzian,
            n_realizations,
            master_seed,
            first_realization: 0,
            stride: 1,
            schedule: Schedule::default(),
        }
    }
}

/// Everything a density ensemble needs besides the run options.
#[derive(Debug, Clone)]
pub struct DensityProblem {
    pub model: TightBindingModel,
    pub dt: f64,
    pub initial: StateVector,
    pub n_steps: u64,
}

/// Densities on the grid `0..=n_steps` (every `stride`) for every
/// realization, as moments over `[time × site]` cells.
pub fn density_moments(run: &EnsembleRun, problem: &DensityProblem) -> Result<(Vec<f64>, Moments)> {
    if run.stride == 0 {
        return Err(Error::arg("recording stride must be >= 1"));
    }
    let prop = Propagator::prepare(&problem.model, problem.dt)?;
    let unraveling = Unraveling::new(run.kind, &problem.model, problem.dt)?;
    let noise = NoiseSpec::for_model(&problem.model, run.distribution, problem.dt, run.master_seed)?;
    let n_sites = problem.model.n_sites();
    let times: Vec<f64> = (0..=problem.n_steps / run.stride)
        .map(|k| (k * run.stride) as f64 * problem.dt)
        .collect();
    let cells = times.len() * n_sites;
    let moments = accumulate(cells, run.first_realization, run.n_realizations, run.schedule, |r, buf| {
        let stream = derive_stream(&noise, r);
        let mut row = 0;
        unraveling.evolve(
            &prop,
            problem.initial.clone(),
            problem.n_steps,
            &stream,
            run.stride,
            |_, state| {
                for (b, a) in buf[row * n_sites..(row + 1) * n_sites].iter_mut().zip(state.amplitudes()) {
                    *b = a.norm_sqr();
                }
                row += 1;
            },
        )?;
        Ok(())
    })?;
    Ok((times, moments))
}

/// Ensemble means and standard errors, with the σ metric taken about the
/// ensemble's own mean.
pub fn run(run: &EnsembleRun, problem: &DensityProblem) -> Result<EnsembleStats> {
    let (times, moments) = density_moments(run, problem)?;
    let n_sites = problem.model.n_sites();
    let sigma = sigma_about(&moments, &times, n_sites, None)?;
    EnsembleStats::from_parts(
        times,
        n_sites,
        moments.mean().to_vec(),
        moments.stderr(),
        moments.count(),
    )
    .map(|s| s.with_sigma_metric(sigma))
}

/// σ of an ensemble about `reference` (flat `[time × site]`), or about its
/// own mean when `None`.
pub fn sigma_about(moments: &Moments, times: &[f64], n_sites: usize, reference: Option<&[f64]>) -> Result<f64> {
    let dev = match reference {
        Some(r) => {
            if r.len() != moments.mean().len() {
                return Err(Error::arg("reference mean is on a different grid"));
            }
            moments.squared_deviation_from(r)
        }
        None => moments.m2().to_vec(),
    };
    let per_time: Vec<f64> = dev.chunks(n_sites).map(|row| row.iter().sum()).collect();
    if per_time.len() != times.len() {
        return Err(Error::arg("moments do not match the time grid"));
    }
    sigma_from_total(trapezoid(times, &per_time), moments.count(), times)
}

/// `σ√N_s` at ensemble size `n_s`, averaged (in quadrature) over
/// `n_batches` disjoint batches and measured about `reference`.
pub fn scaled_sigma(
    run: &EnsembleRun,
    problem: &DensityProblem,
    n_s: u64,
    n_batches: u64,
    reference: &[f64],
) -> Result<f64> {
    if n_batches == 0 {
        return Err(Error::arg("need at least one batch"));
    }
    let mut acc = 0.0;
    for b in 0..n_batches {
        let mut batch = run.clone();
        batch.n_realizations = n_s;
        batch.first_realization = run.first_realization + b * n_s;
        let (times, m) = density_moments(&batch, problem)?;
        let s = sigma_about(&m, &times, problem.model.n_sites(), Some(reference))?;
        acc += s * s * n_s as f64;
    }
    Ok((acc / n_batches as f64).sqrt())
}

/// Ensemble-mean Loschmidt echo at interaction times `τ = 2k·stride·dt`.
/// Returns `(τ, mean, stderr)`.
pub fn echo_ensemble(
    run: &EnsembleRun,
    model: &TightBindingModel,
    dt: f64,
    initial: &StateVector,
    n_max: u64,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    if run.stride == 0 {
        return Err(Error::arg("echo stride must be >= 1"));
    }
    let prop = Propagator::prepare(model, dt)?;
    let noise = NoiseSpec::for_model(model, run.distribution, dt, run.master_seed)?;
    let taus: Vec<f64> = (0..=n_max / run.stride)
        .map(|k| 2.0 * (k * run.stride) as f64 * dt)
        .collect();
    let moments = accumulate(taus.len(), run.first_realization, run.n_realizations, run.schedule, |r, buf| {
        let stream = derive_stream(&noise, r);
        let curve = loschmidt_curve(&prop, initial, n_max, run.stride, &stream)?;
        for (b, (_, m)) in buf.iter_mut().zip(curve) {
            *b = m;
        }
        Ok(())
    })?;
    Ok((taus, moments.mean().to_vec(), moments.stderr()))
}

/// `σ√N_s` at one ensemble size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub n_s: u64,
    pub sigma: f64,
    pub scaled: f64,
    /// Relative deviation of `scaled` from the row average.
    pub deviation: f64,
    pub flagged: bool,
}

/// Converts `(N_s, σ)` pairs into `σ√N_s` rows and flags rows deviating
/// from the average by more than [`CONVERGENCE_FLAG`].
pub fn convergence_report(points: &[(u64, f64)]) -> Result<Vec<ConvergenceRow>> {
    if points.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::arg("ensemble sizes must be strictly increasing"));
    }
    let scaled: Vec<f64> = points.iter().map(|&(n, s)| s * (n as f64).sqrt()).collect();
    let avg = scaled.iter().sum::<f64>() / scaled.len().max(1) as f64;
    Ok(points
        .iter()
        .zip(&scaled)
        .map(|(&(n_s, sigma), &sc)| {
            let deviation = if avg > 0.0 { (sc - avg).abs() / avg } else { 0.0 };
            ConvergenceRow {
                n_s,
                sigma,
                scaled: sc,
                deviation,
                flagged: deviation > CONVERGENCE_FLAG,
            }
        })
        .collect())
}
