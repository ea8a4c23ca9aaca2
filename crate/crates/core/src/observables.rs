// Copyright 2026 The qdrift Developers
// SPDX-License-Identifier: Apache-2.0

//! Site densities along a trajectory, ensemble statistics, transmittance,
//! the σ metric and the Loschmidt echo.

use crate::error::{Error, Result};
use crate::lattice::StateVector;
use crate::noise::PhaseSource;
use crate::propagator::{Propagator, Workspace};
use crate::unraveling::{Unraveling, UnravelingKind};

/// Fraction of the running peak below which the scattering site counts as
/// cleared.
pub const CLEARANCE_FRACTION: f64 = 1e-4;

/// `|ψ_n(t)|²` on a time grid for one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    n_sites: usize,
    /// Row-major `[time × site]`.
    densities: Vec<f64>,
    realization: u64,
    kind: UnravelingKind,
}

impl Trajectory {
    pub fn new(n_sites: usize, realization: u64, kind: UnravelingKind) -> Self {
        Self {
            times: Vec::new(),
            n_sites,
            densities: Vec::new(),
            realization,
            kind,
        }
    }

    /// Records one unraveling run, sampling every `stride` steps.
    #[allow(clippy::too_many_arguments)]
    pub fn record<S: PhaseSource + ?Sized>(
        unraveling: &Unraveling,
        prop: &Propagator,
        initial: StateVector,
        n_steps: u64,
        stride: u64,
        source: &S,
        realization: u64,
    ) -> Result<Self> {
        let dt = prop.dt();
        let mut traj = Self::new(prop.n_sites(), realization, unraveling.kind());
        unraveling.evolve(prop, initial, n_steps, source, stride, |step, state| {
            traj.push(step as f64 * dt, state);
        })?;
        Ok(traj)
    }

    pub fn push(&mut self, time: f64, state: &StateVector) {
        debug_assert_eq!(state.len(), self.n_sites);
        self.times.push(time);
        self.densities.extend(state.amplitudes().iter().map(|a| a.norm_sqr()));
    }

    pub fn push_densities(&mut self, time: f64, densities: &[f64]) -> Result<()> {
        if densities.len() != self.n_sites {
            return Err(Error::arg(format!(
                "row has {} sites, trajectory {}",
                densities.len(),
                self.n_sites
            )));
        }
        self.times.push(time);
        self.densities.extend_from_slice(densities);
        Ok(())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn realization(&self) -> u64 {
        self.realization
    }

    pub fn kind(&self) -> UnravelingKind {
        self.kind
    }

    /// Densities at time index `k`.
    pub fn row(&self, k: usize) -> &[f64] {
        &self.densities[k * self.n_sites..(k + 1) * self.n_sites]
    }

    pub fn densities(&self) -> &[f64] {
        &self.densities
    }

    /// Largest `|Σ_n ρ_n − 1|` over the grid.
    pub fn max_normalization_error(&self) -> f64 {
        (0..self.len())
            .map(|k| (self.row(k).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// `|⟨site|ψ(t)⟩|²` along the trajectory.
pub fn survival_probability(traj: &Trajectory, site: usize) -> Result<Vec<f64>> {
    if site >= traj.n_sites() {
        return Err(Error::arg(format!(
            "site {site} out of range for {} sites",
            traj.n_sites()
        )));
    }
    Ok((0..traj.len()).map(|k| traj.row(k)[site]).collect())
}

/// Mean densities and their standard errors on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    times: Vec<f64>,
    n_sites: usize,
    mean: Vec<f64>,
    stderr: Vec<f64>,
    n_realizations: u64,
    sigma_metric: Option<f64>,
}

impl EnsembleStats {
    /// `mean` and `stderr` are row-major `[time × site]`.
    pub fn from_parts(
        times: Vec<f64>,
        n_sites: usize,
        mean: Vec<f64>,
        stderr: Vec<f64>,
        n_realizations: u64,
    ) -> Result<Self> {
        let cells = times.len() * n_sites;
        if mean.len() != cells || stderr.len() != cells {
            return Err(Error::arg(format!(
                "expected {cells} cells, got mean {} and stderr {}",
                mean.len(),
                stderr.len()
            )));
        }
        Ok(Self {
            times,
            n_sites,
            mean,
            stderr,
            n_realizations,
            sigma_metric: None,
        })
    }

    /// Direct reduction over stored trajectories.
    pub fn from_trajectories(trajs: &[Trajectory]) -> Result<Self> {
        let first = trajs
            .first()
            .ok_or_else(|| Error::arg("no trajectories to average"))?;
        check_grid(trajs, first.times(), first.n_sites())?;
        let cells = first.densities.len();
        let n = trajs.len() as f64;
        let mut mean = vec![0.0; cells];
        for t in trajs {
            for (m, x) in mean.iter_mut().zip(&t.densities) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; cells];
        for t in trajs {
            for ((v, x), m) in var.iter_mut().zip(&t.densities).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let stderr = var
            .into_iter()
            .map(|v| {
                if trajs.len() > 1 {
                    (v / (n - 1.0) / n).sqrt()
                } else {
                    0.0
                }
            })
            .collect();
        Self::from_parts(
            first.times.clone(),
            first.n_sites(),
            mean,
            stderr,
            trajs.len() as u64,
        )
    }

    pub fn with_sigma_metric(mut self, sigma: f64) -> Self {
        self.sigma_metric = Some(sigma);
        self
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn n_realizations(&self) -> u64 {
        self.n_realizations
    }

    pub fn sigma_metric(&self) -> Option<f64> {
        self.sigma_metric
    }

    pub fn mean_row(&self, k: usize) -> &[f64] {
        &self.mean[k * self.n_sites..(k + 1) * self.n_sites]
    }

    pub fn stderr_row(&self, k: usize) -> &[f64] {
        &self.stderr[k * self.n_sites..(k + 1) * self.n_sites]
    }

    pub fn mean_series(&self, site: usize) -> Vec<f64> {
        (0..self.times.len()).map(|k| self.mean_row(k)[site]).collect()
    }

    pub fn stderr_series(&self, site: usize) -> Vec<f64> {
        (0..self.times.len()).map(|k| self.stderr_row(k)[site]).collect()
    }
}

fn check_grid(trajs: &[Trajectory], times: &[f64], n_sites: usize) -> Result<()> {
    for t in trajs {
        if t.n_sites() != n_sites || t.times().len() != times.len() {
            return Err(Error::arg(format!(
                "trajectory {} has a {}x{} grid, expected {}x{}",
                t.realization(),
                t.len(),
                t.n_sites(),
                times.len(),
                n_sites
            )));
        }
        if t
            .times()
            .iter()
            .zip(times)
            .any(|(a, b)| (a - b).abs() > 1e-9 * b.abs().max(1.0))
        {
            return Err(Error::arg(format!(
                "trajectory {} is on a different time grid",
                t.realization()
            )));
        }
    }
    Ok(())
}

/// `∫ Σ_i (ρ_ii(t) − ρ̄_ii(t))² dt` for one trajectory, trapezoid rule.
pub fn squared_deviation_integral(traj: &Trajectory, mean: &EnsembleStats) -> Result<f64> {
    check_grid(std::slice::from_ref(traj), mean.times(), mean.n_sites())?;
    let per_time: Vec<f64> = (0..traj.len())
        .map(|k| {
            traj.row(k)
                .iter()
                .zip(mean.mean_row(k))
                .map(|(x, m)| (x - m) * (x - m))
                .sum()
        })
        .collect();
    Ok(trapezoid(traj.times(), &per_time))
}

/// Time-averaged standard error of the local densities,
/// `σ = sqrt( (1/(N_s² T)) ∫₀ᵀ Σ_s Σ_i (ρ_ii^(s) − ρ̄_ii)² dt )`.
///
/// The `N_s²` makes this the standard error of the ensemble mean, so it
/// falls as `N_s^{-1/2}`.
pub fn sigma_metric(trajs: &[Trajectory], mean: &EnsembleStats) -> Result<f64> {
    if trajs.is_empty() {
        return Err(Error::arg("no trajectories for the σ metric"));
    }
    let mut total = 0.0;
    for t in trajs {
        total += squared_deviation_integral(t, mean)?;
    }
    sigma_from_total(total, trajs.len() as u64, mean.times())
}

/// σ from the summed squared-deviation integrals of `n` trajectories.
pub fn sigma_from_total(total: f64, n: u64, times: &[f64]) -> Result<f64> {
    let span = match (times.first(), times.last()) {
        (Some(a), Some(b)) if b > a => b - a,
        _ => return Err(Error::arg("σ metric needs a time grid with positive span")),
    };
    let n = n as f64;
    Ok((total / (n * n * span)).sqrt())
}

pub(crate) fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

/// `Σ_{n>boundary} |ψ_n|²`.
pub fn transmitted_fraction(state: &StateVector, boundary: usize) -> Result<f64> {
    if boundary >= state.len() {
        return Err(Error::arg(format!(
            "boundary {boundary} out of range for {} sites",
            state.len()
        )));
    }
    Ok(state.amplitudes()[boundary + 1..].iter().map(|a| a.norm_sqr()).sum())
}

/// Densities right of, left of and on the scattering site.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransmissionReport {
    pub transmitted: f64,
    pub reflected: f64,
    pub residual: f64,
    /// Residual below [`CLEARANCE_FRACTION`] of the running peak.
    pub cleared: bool,
}

/// Splits the density around `site`. Logs a warning when the packet has not
/// yet left the site, given the largest density seen there so far.
pub fn measure_transmission(state: &StateVector, site: usize, running_peak: f64) -> Result<TransmissionReport> {
    let transmitted = transmitted_fraction(state, site)?;
    let reflected: f64 = state.amplitudes()[..site].iter().map(|a| a.norm_sqr()).sum();
    let residual = state.density(site);
    let cleared = residual < CLEARANCE_FRACTION * running_peak;
    if !cleared {
        log::warn!(
            "premature measurement: density {residual:.3e} on site {site} exceeds {CLEARANCE_FRACTION:e} of its peak {running_peak:.3e}"
        );
    }
    Ok(TransmissionReport {
        transmitted,
        reflected,
        residual,
        cleared,
    })
}

fn echo_steps(prop: &Propagator, t: f64) -> Result<u64> {
    let ratio = t / prop.dt();
    let n = ratio.round();
    if !(t >= 0.0) || (ratio - n).abs() > 1e-9 * n.max(1.0) {
        return Err(Error::param(format!(
            "echo time {t} is not a whole number of steps of {}",
            prop.dt()
        )));
    }
    Ok(n as u64)
}

/// `|⟨initial|ψ(2t)⟩|²` after `t/dt` forward steps and as many reversed
/// steps. The reversed half draws fresh drifts (step indices
/// `N_t+1..2N_t`) with the same sign.
pub fn loschmidt_echo<S: PhaseSource + ?Sized>(
    prop: &Propagator,
    initial: &StateVector,
    t: f64,
    source: &S,
) -> Result<f64> {
    let n = echo_steps(prop, t)?;
    check_len(prop, initial)?;
    let mut work = Workspace::new(prop.n_sites());
    let mut state = initial.clone();
    for step in 1..=n {
        prop.step_with(&mut state, source, step, &mut work);
    }
    for step in n + 1..=2 * n {
        prop.reverse_step_with(&mut state, source, step, &mut work);
    }
    Ok(initial.overlap(&state).norm_sqr())
}

/// Echo at every `stride`-th reversal point up to `n_max` forward steps.
/// Returns `(τ, M)` with `τ = 2 N_t dt` the total interaction time. The
/// forward path is shared between reversal points.
pub fn loschmidt_curve<S: PhaseSource + ?Sized>(
    prop: &Propagator,
    initial: &StateVector,
    n_max: u64,
    stride: u64,
    source: &S,
) -> Result<Vec<(f64, f64)>> {
    check_len(prop, initial)?;
    if stride == 0 {
        return Err(Error::arg("echo stride must be >= 1"));
    }
    let dt = prop.dt();
    let mut work = Workspace::new(prop.n_sites());
    let mut forward = initial.clone();
    let mut out = Vec::with_capacity((n_max / stride + 1) as usize);
    out.push((0.0, 1.0));
    for n in 1..=n_max {
        prop.step_with(&mut forward, source, n, &mut work);
        if n % stride != 0 {
            continue;
        }
        let mut back = forward.clone();
        for step in n + 1..=2 * n {
            prop.reverse_step_with(&mut back, source, step, &mut work);
        }
        out.push((2.0 * n as f64 * dt, initial.overlap(&back).norm_sqr()));
    }
    Ok(out)
}

fn check_len(prop: &Propagator, state: &StateVector) -> Result<()> {
    if state.len() != prop.n_sites() {
        return Err(Error::arg(format!(
            "state has {} sites, propagator {}",
            state.len(),
            prop.n_sites()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_dbrtd, build_gaussian_packet, build_tls};
    use crate::noise::{derive_stream, Distribution, NoiseSpec};
    use num_complex::Complex64;

    fn coherent_tls_trajectory(t_end: f64, dt: f64) -> Trajectory {
        let model = build_tls(0.0, 1.0).unwrap();
        let prop = Propagator::prepare(&model, dt).unwrap();
        let un = Unraveling::new(UnravelingKind::Qd, &model, dt).unwrap();
        let spec = NoiseSpec::for_model(&model, Distribution::Lorentzian, dt, 1).unwrap();
        let stream = derive_stream(&spec, 0);
        let n = (t_end / dt).round() as u64;
        Trajectory::record(&un, &prop, StateVector::localized(2, 0).unwrap(), n, 1, &stream, 0).unwrap()
    }

    #[test]
    fn coherent_tls_survival_matches_cosine() {
        let traj = coherent_tls_trajectory(std::f64::consts::PI, 0.01);
        let p = survival_probability(&traj, 0).unwrap();
        assert_eq!(p[0], 1.0);
        for (t, p) in traj.times().iter().zip(&p) {
            assert!((p - (0.5 + 0.5 * (2.0 * t).cos())).abs() < 1e-10);
        }
        assert!(traj.max_normalization_error() < 1e-10);
    }

    #[test]
    fn tls_empties_at_half_period() {
        let dt = std::f64::consts::PI / 2.0 / 200.0;
        let traj = coherent_tls_trajectory(std::f64::consts::PI / 2.0, dt);
        let p = survival_probability(&traj, 0).unwrap();
        assert!(p.last().unwrap().abs() < 1e-10);
        assert!(survival_probability(&traj, 2).is_err());
    }

    #[test]
    fn sigma_vanishes_for_identical_trajectories() {
        let traj = coherent_tls_trajectory(1.0, 0.01);
        let trajs = vec![traj.clone(), traj.clone(), traj];
        let stats = EnsembleStats::from_trajectories(&trajs).unwrap();
        assert!(sigma_metric(&trajs, &stats).unwrap() < 1e-15);
        assert!(stats.stderr_series(0).iter().all(|&s| s < 1e-15));
    }

    #[test]
    fn sigma_rejects_mismatched_grids() {
        let a = coherent_tls_trajectory(1.0, 0.01);
        let b = coherent_tls_trajectory(2.0, 0.01);
        let stats = EnsembleStats::from_trajectories(std::slice::from_ref(&a)).unwrap();
        assert!(sigma_metric(std::slice::from_ref(&b), &stats).is_err());
        assert!(EnsembleStats::from_trajectories(&[a, b]).is_err());
    }

    #[test]
    fn sigma_of_two_constant_rows() {
        let mut a = Trajectory::new(2, 0, UnravelingKind::Qd);
        let mut b = Trajectory::new(2, 1, UnravelingKind::Qd);
        for k in 0..=10 {
            a.push_densities(k as f64 * 0.1, &[1.0, 0.0]).unwrap();
            b.push_densities(k as f64 * 0.1, &[0.0, 1.0]).unwrap();
        }
        let trajs = [a, b];
        let stats = EnsembleStats::from_trajectories(&trajs).unwrap();
        // Each cell deviates by ½: Σ_s Σ_i = 4 · ¼ = 1 per unit time.
        let sigma = sigma_metric(&trajs, &stats).unwrap();
        assert!((sigma - 0.5).abs() < 1e-12);
    }

    #[test]
    fn echo_without_noise_is_exact() {
        let model = build_tls(0.3, 1.0).unwrap();
        let prop = Propagator::prepare(&model, 0.01).unwrap();
        let spec = NoiseSpec::for_model(&model, Distribution::Lorentzian, 0.01, 3).unwrap();
        let stream = derive_stream(&spec, 0);
        let init = StateVector::localized(2, 0).unwrap();
        for t in [0.0, 0.5, 1.37, 4.0] {
            let m = loschmidt_echo(&prop, &init, t, &stream).unwrap();
            assert!((m - 1.0).abs() < 1e-10, "t={t} M={m}");
        }
        assert!(loschmidt_echo(&prop, &init, 0.005, &stream).is_err());
        assert!(loschmidt_echo(&prop, &init, -0.01, &stream).is_err());
    }

    #[test]
    fn echo_curve_matches_pointwise_echo() {
        let model = build_tls(0.0, 1.0).unwrap().with_uniform_decoherence(0.1).unwrap();
        let prop = Propagator::prepare(&model, 0.01).unwrap();
        let spec = NoiseSpec::for_model(&model, Distribution::Lorentzian, 0.01, 9).unwrap();
        let init = StateVector::localized(2, 0).unwrap();
        for r in 0..4 {
            let stream = derive_stream(&spec, r);
            let curve = loschmidt_curve(&prop, &init, 300, 50, &stream).unwrap();
            assert_eq!(curve.len(), 7);
            for &(tau, m) in &curve {
                let direct = loschmidt_echo(&prop, &init, tau / 2.0, &stream).unwrap();
                assert!((m - direct).abs() < 1e-12);
                assert!((0.0..=1.0 + 1e-12).contains(&m));
            }
        }
    }

    #[test]
    fn free_chain_transmits_band_center_packet() {
        // No barrier: V_L = V_R = V.
        let model = build_dbrtd(0.0, 1.0, 1.0, 1.0, 200).unwrap();
        let psi = build_gaussian_packet(&model, 120, 10.0, 0.0).unwrap();
        let prop = Propagator::prepare(&model, 0.025).unwrap();
        let spec = NoiseSpec::for_model(&model, Distribution::Lorentzian, 0.025, 0).unwrap();
        let stream = derive_stream(&spec, 0);
        let mut peak = 0.0f64;
        let site = model.resonant_site().unwrap();
        let out = prop
            .evolve(psi, 3200, &stream, 1, |_, s| peak = peak.max(s.density(site)))
            .unwrap();
        let rep = measure_transmission(&out, site, peak).unwrap();
        assert!(rep.transmitted > 0.999, "{rep:?}");
        assert!(rep.cleared);
        assert!((rep.transmitted + rep.reflected + rep.residual - 1.0).abs() < 1e-10);
    }

    #[test]
    fn transmitted_fraction_sums_right_of_boundary() {
        let amps = vec![Complex64::new(0.5, 0.0); 4];
        let s = StateVector::from_amplitudes(amps).unwrap();
        assert!((transmitted_fraction(&s, 1).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(transmitted_fraction(&s, 3).unwrap(), 0.0);
        assert!(transmitted_fraction(&s, 4).is_err());
    }
}
