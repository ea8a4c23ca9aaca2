// Copyright 2026 The qdrift Developers
// SPDX-License-Identifier: Apache-2.0

//! Ready-made experiments on top of the ensemble drivers: transmittance
//! sweeps through a resonant site, two-level decay, spin-chain echoes,
//! Loschmidt echoes and the QD/QJ convergence study.

use crate::ensemble::{self, accumulate, ConvergenceRow, DensityProblem, EnsembleRun, Moments};
use crate::error::{Error, Result};
use crate::lattice::{build_dbrtd, build_gaussian_packet, build_tls, build_xy_chain, group_velocity, StateVector};
use crate::noise::{derive_stream, NoiseSpec};
use crate::observables::{measure_transmission, trapezoid, EnsembleStats};
use crate::oracle::{self, dp_transmittance, glbe_p00, DecayFit, DecayRegime, ResonantLevelParams, TlsDecayParams};
use crate::propagator::Propagator;
use crate::unraveling::UnravelingKind;

/// `ln(1/CLEARANCE_FRACTION)`: number of e-folds the dot population must
/// decay by before measuring.
const CLEARANCE_EFOLDS: f64 = 9.210_340_371_976_184;

/// Resonant site between two leads, scanned with Gaussian packets.
#[derive(Debug, Clone, PartialEq)]
pub struct DbrtdSetup {
    pub e0: f64,
    pub v: f64,
    pub v_l: f64,
    pub v_r: f64,
    pub gamma_phi: f64,
    /// Packet width `w` in sites.
    pub packet_width: f64,
    pub dt: f64,
    pub energies: Vec<f64>,
}

/// Lattice size and timing derived from a [`DbrtdSetup`].
#[derive(Debug, Clone, PartialEq)]
pub struct DbrtdGeometry {
    pub lead_len: usize,
    /// Packet center, `lead_len − distance`.
    pub packet_center: usize,
    /// Distance from the packet center to the resonant site.
    pub distance: usize,
    /// Measurement time for each energy.
    pub measure_times: Vec<f64>,
}

impl DbrtdSetup {
    pub fn oracle_params(&self) -> ResonantLevelParams {
        ResonantLevelParams {
            e0: self.e0,
            v_l: self.v_l,
            v_r: self.v_r,
            v: self.v,
            gamma_phi: self.gamma_phi,
        }
    }

    /// Packet starts `4w + 10` sites left of the dot. It is measured once
    /// its back edge (`4.3w` behind the center) has passed the dot and the
    /// dot population has decayed by [`CLEARANCE_EFOLDS`] at rate
    /// `2(Γ₀ + Γ_φ)`. The leads are long enough that the fastest packet
    /// does not reach either end by then.
    pub fn geometry(&self) -> Result<DbrtdGeometry> {
        if self.energies.is_empty() {
            return Err(Error::param("energy sweep is empty"));
        }
        if self.energies.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("energy sweep must be strictly increasing"));
        }
        if !(self.packet_width >= 3.0) {
            return Err(Error::param("packet width must be >= 3 sites"));
        }
        let w = self.packet_width;
        let distance = (4.0 * w + 10.0).ceil();
        let params = self.oracle_params();
        let mut measure_times = Vec::with_capacity(self.energies.len());
        let mut reach: f64 = 0.0;
        for &e in &self.energies {
            if e.abs() >= 2.0 * self.v {
                return Err(Error::param(format!("energy {e} outside the band")));
            }
            let vg = group_velocity(self.v, e);
            let width = params.gamma0(e) + self.gamma_phi;
            if !(width > 0.0) {
                return Err(Error::param("resonant site is not coupled to the leads"));
            }
            let t = (distance + 4.3 * w) / vg + CLEARANCE_EFOLDS / (2.0 * width);
            reach = reach.max(vg * t);
            measure_times.push(t);
        }
        let lead_len = ((reach - distance + 5.0 * w).ceil() as usize).max((distance + 4.0 * w + 1.0) as usize);
        Ok(DbrtdGeometry {
            lead_len,
            packet_center: lead_len - distance as usize,
            distance: distance as usize,
            measure_times,
        })
    }
}

/// One point of a transmittance sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransmittancePoint {
    pub energy: f64,
    pub mean: f64,
    pub stderr: f64,
    pub coherent_oracle: f64,
    pub total_oracle: f64,
    /// Fraction of realizations measured after the dot had cleared.
    pub cleared: f64,
}

/// QD (or QJ) wave-packet transmittance at every energy of the sweep.
/// Realizations at energy index `k` use indices `k·N_s ..`.
pub fn dbrtd_sweep(setup: &DbrtdSetup, run: &EnsembleRun) -> Result<Vec<TransmittancePoint>> {
    let geo = setup.geometry()?;
    let base = build_dbrtd(setup.e0, setup.v_l, setup.v_r, setup.v, geo.lead_len)?;
    let site = base.resonant_site().expect("dbrtd model");
    let model = base.with_site_decoherence(site, setup.gamma_phi)?;
    let prop = Propagator::prepare(&model, setup.dt)?;
    let unraveling = crate::unraveling::Unraveling::new(run.kind, &model, setup.dt)?;
    let noise = NoiseSpec::for_model(&model, run.distribution, setup.dt, run.master_seed)?;
    let params = setup.oracle_params();
    let mut out = Vec::with_capacity(setup.energies.len());
    for (k, (&energy, &t_meas)) in setup.energies.iter().zip(&geo.measure_times).enumerate() {
        let packet = build_gaussian_packet(&model, geo.packet_center, setup.packet_width, energy)?;
        let n_steps = (t_meas / setup.dt).ceil() as u64;
        let first = run.first_realization + k as u64 * run.n_realizations;
        let moments = accumulate(2, first, run.n_realizations, run.schedule, |r, buf| {
            let stream = derive_stream(&noise, r);
            let mut peak: f64 = 0.0;
            let end = unraveling.evolve(&prop, packet.clone(), n_steps, &stream, 1, |_, s| {
                peak = peak.max(s.density(site));
            })?;
            let rep = measure_transmission(&end, site, peak)?;
            buf[0] = rep.transmitted;
            buf[1] = if rep.cleared { 1.0 } else { 0.0 };
            Ok(())
        })?;
        let t = dp_transmittance(&params, energy)?;
        out.push(TransmittancePoint {
            energy,
            mean: moments.mean()[0],
            stderr: moments.stderr()[0],
            coherent_oracle: t.coherent,
            total_oracle: t.total,
            cleared: moments.mean()[1],
        });
        log::info!("energy {energy:+.4}: T = {:.4} (oracle {:.4})", moments.mean()[0], t.total);
    }
    Ok(out)
}

/// Ensemble survival probability of the two-level system with its oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct TlsCurve {
    pub gamma_phi: f64,
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub oracle: Vec<f64>,
}

/// Two-level system with hopping `v`, both sites dephasing at `gamma_phi`,
/// started on site 0 and recorded every `run.stride` steps up to `t_max`.
pub fn tls_survival(v: f64, gamma_phi: f64, dt: f64, t_max: f64, run: &EnsembleRun) -> Result<TlsCurve> {
    let problem = DensityProblem {
        model: build_tls(0.0, v)?.with_uniform_decoherence(gamma_phi)?,
        dt,
        initial: StateVector::localized(2, 0)?,
        n_steps: steps_for(t_max, dt)?,
    };
    let stats = ensemble::run(run, &problem)?;
    let params = TlsDecayParams::new(v, gamma_phi)?;
    Ok(TlsCurve {
        gamma_phi,
        times: stats.times().to_vec(),
        mean: stats.mean_series(0),
        stderr: stats.stderr_series(0),
        oracle: stats.times().iter().map(|&t| glbe_p00(t, &params)).collect(),
    })
}

/// Steps of `dt` in `t`, which must be a whole multiple.
pub fn steps_for(t: f64, dt: f64) -> Result<u64> {
    if !(dt > 0.0) || !(t > 0.0) {
        return Err(Error::param(format!("need t > 0 and dt > 0, got {t} and {dt}")));
    }
    let n = (t / dt).round();
    if (t / dt - n).abs() > 1e-9 * n.max(1.0) {
        return Err(Error::param(format!("t = {t} is not a multiple of dt = {dt}")));
    }
    Ok(n as u64)
}

impl TlsCurve {
    /// Fits the regime implied by `gamma_phi` against `2V`, weighting by
    /// the standard errors.
    pub fn fit_rates(&self, v: f64) -> Result<DecayFit> {
        let regime = TlsDecayParams::new(v, self.gamma_phi)?.regime();
        oracle::fit_decay_rates_weighted(&self.times, &self.mean, &self.stderr, regime)
    }

    /// RMS of `mean − oracle`.
    pub fn rms_deviation(&self) -> f64 {
        let s: f64 = self.mean.iter().zip(&self.oracle).map(|(a, b)| (a - b).powi(2)).sum();
        (s / self.mean.len() as f64).sqrt()
    }
}

/// Regime of the two-level system at `gamma_phi`.
pub fn tls_regime(v: f64, gamma_phi: f64) -> Result<DecayRegime> {
    Ok(TlsDecayParams::new(v, gamma_phi)?.regime())
}

/// Ensemble-mean Loschmidt echo of the two-level system started on site 0.
#[derive(Debug, Clone, PartialEq)]
pub struct EchoCurve {
    pub gamma_phi: f64,
    /// Total interaction time `τ = 2t`.
    pub taus: Vec<f64>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

/// Echo at reversal points every `run.stride` steps up to interaction time
/// `tau_max`.
pub fn tls_loschmidt(v: f64, gamma_phi: f64, dt: f64, tau_max: f64, run: &EnsembleRun) -> Result<EchoCurve> {
    let model = build_tls(0.0, v)?.with_uniform_decoherence(gamma_phi)?;
    let n_max = steps_for(tau_max / 2.0, dt)?;
    let (taus, mean, stderr) = ensemble::echo_ensemble(run, &model, dt, &StateVector::localized(2, 0)?, n_max)?;
    Ok(EchoCurve {
        gamma_phi,
        taus,
        mean,
        stderr,
    })
}

/// XY chain of `m` spins with coupling `j`, every site dephasing at
/// `gamma_phi`, excitation started on the first spin.
pub fn spin_chain_problem(m: usize, j: f64, gamma_phi: f64, dt: f64, t_max: f64) -> Result<DensityProblem> {
    Ok(DensityProblem {
        model: build_xy_chain(m, j, &vec![0.0; m])?.with_uniform_decoherence(gamma_phi)?,
        dt,
        initial: StateVector::localized(m, 0)?,
        n_steps: steps_for(t_max, dt)?,
    })
}

/// Ensemble densities of the spin chain and the coherent densities on the
/// same grid.
pub fn spin_chain_densities(problem: &DensityProblem, run: &EnsembleRun) -> Result<(EnsembleStats, Vec<Vec<f64>>)> {
    let stats = ensemble::run(run, problem)?;
    let coherent = oracle::coherent_densities(&problem.model, &problem.initial, stats.times())?;
    Ok((stats, coherent))
}

/// First local maximum of `values` above `threshold`, skipping the initial
/// decay from `t = 0`. Returns `(time, value)`.
pub fn first_echo(times: &[f64], values: &[f64], threshold: f64) -> Option<(f64, f64)> {
    local_maxima(times, values).into_iter().find(|&(_, v)| v > threshold)
}

/// Interior local maxima `(time, value)` of a sampled series.
pub fn local_maxima(times: &[f64], values: &[f64]) -> Vec<(f64, f64)> {
    (1..values.len().saturating_sub(1))
        .filter(|&k| values[k] > values[k - 1] && values[k] >= values[k + 1])
        .map(|k| (times[k], values[k]))
        .collect()
}

/// Largest value of `values` at times in `[lo, hi]`.
pub fn max_in_window(times: &[f64], values: &[f64], lo: f64, hi: f64) -> Option<(f64, f64)> {
    times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= lo && **t <= hi)
        .map(|(&t, &v)| (t, v))
        .max_by(|a, b| a.1.total_cmp(&b.1))
}

/// Least-squares slope of `ln(value − floor)` against time over the first
/// contiguous stretch where `value − floor` lies in `[low, high]`. Returns
/// the decay rate (minus the slope).
pub fn exponential_rate(times: &[f64], values: &[f64], floor: f64, high: f64, low: f64) -> Result<f64> {
    let start = values
        .iter()
        .position(|&v| v - floor <= high)
        .ok_or_else(|| Error::Fit {
            message: "series never enters the fit window".into(),
            residual_rms: f64::NAN,
        })?;
    let pts: Vec<(f64, f64)> = times[start..]
        .iter()
        .zip(&values[start..])
        .take_while(|(_, &v)| v - floor >= low)
        .map(|(&t, &v)| (t, (v - floor).ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Fit {
            message: format!("only {} points in the fit window", pts.len()),
            residual_rms: f64::NAN,
        });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(-sxy / sxx)
}

/// `(v(b) − v(a))/(b − a)` with linear interpolation on the grid.
pub fn secant_slope(times: &[f64], values: &[f64], a: f64, b: f64) -> Result<f64> {
    Ok((interpolate(times, values, b)? - interpolate(times, values, a)?) / (b - a))
}

fn interpolate(times: &[f64], values: &[f64], t: f64) -> Result<f64> {
    let k = times.partition_point(|&x| x <= t);
    if k == 0 || (k == times.len() && t > times[times.len() - 1]) {
        return Err(Error::arg(format!("time {t} outside the recorded grid")));
    }
    if k == times.len() {
        return Ok(values[k - 1]);
    }
    let (t0, t1) = (times[k - 1], times[k]);
    let f = (t - t0) / (t1 - t0);
    Ok(values[k - 1] * (1.0 - f) + values[k] * f)
}

/// Options of the QD/QJ convergence study.
#[derive(Debug, Clone)]
pub struct ConvergenceSetup {
    pub problem: DensityProblem,
    pub stride: u64,
    /// Ensemble sizes, strictly increasing.
    pub sizes: Vec<u64>,
    /// Realizations spent per ensemble size (split into batches of `N_s`).
    pub batch_realizations: u64,
    /// Size of the reference ensemble that supplies `ρ̄`.
    pub reference_realizations: u64,
    pub methods: Vec<UnravelingKind>,
}

/// Convergence of one unraveling.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodConvergence {
    pub kind: UnravelingKind,
    pub rows: Vec<ConvergenceRow>,
    /// `σ√N_s` as a function of the evolution time `T`, one series per size
    /// (entry 0 is at `T = 0` and set to 0).
    pub scaled_series: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub times: Vec<f64>,
    pub methods: Vec<MethodConvergence>,
}

impl ConvergenceStudy {
    /// `σ^QJ/σ^QD` at each ensemble size, when both methods ran.
    pub fn qj_qd_ratios(&self) -> Option<Vec<f64>> {
        let qd = self.methods.iter().find(|m| m.kind == UnravelingKind::Qd)?;
        let qj = self.methods.iter().find(|m| m.kind == UnravelingKind::Qj)?;
        Some(qd.rows.iter().zip(&qj.rows).map(|(d, j)| j.sigma / d.sigma).collect())
    }
}

/// Measures `σ√N_s` per method and ensemble size. Each method is compared
/// with its own reference mean from realizations `0..reference`; the
/// batches use the disjoint range after it.
pub fn convergence_study(setup: &ConvergenceSetup, master_seed: u64, schedule: ensemble::Schedule) -> Result<ConvergenceStudy> {
    if setup.sizes.is_empty() || setup.methods.is_empty() {
        return Err(Error::param("convergence study needs sizes and methods"));
    }
    let n_sites = setup.problem.model.n_sites();
    let mut times = Vec::new();
    let mut methods = Vec::new();
    for &kind in &setup.methods {
        let mut run = EnsembleRun::new(kind, setup.reference_realizations, master_seed);
        run.stride = setup.stride;
        run.schedule = schedule;
        let (t, reference) = ensemble::density_moments(&run, &setup.problem)?;
        times = t;
        let mut points = Vec::new();
        let mut scaled_series = Vec::new();
        let mut offset = setup.reference_realizations;
        for &n_s in &setup.sizes {
            let n_batches = (setup.batch_realizations / n_s).max(1);
            let mut acc = vec![0.0; times.len()];
            for _ in 0..n_batches {
                let mut batch = run.clone();
                batch.n_realizations = n_s;
                batch.first_realization = offset;
                offset += n_s;
                let (_, m) = ensemble::density_moments(&batch, &setup.problem)?;
                for (a, s) in acc.iter_mut().zip(cumulative_scaled_sigma(&m, &times, n_sites, reference.mean())) {
                    *a += s * s;
                }
            }
            let series: Vec<f64> = acc.iter().map(|a| (a / n_batches as f64).sqrt()).collect();
            let last = *series.last().expect("non-empty grid");
            points.push((n_s, last / (n_s as f64).sqrt()));
            scaled_series.push(series);
        }
        methods.push(MethodConvergence {
            kind,
            rows: ensemble::convergence_report(&points)?,
            scaled_series,
        });
    }
    Ok(ConvergenceStudy { times, methods })
}

/// `σ(T)√N_s` for every `T` on the grid.
fn cumulative_scaled_sigma(m: &Moments, times: &[f64], n_sites: usize, reference: &[f64]) -> Vec<f64> {
    let dev = m.squared_deviation_from(reference);
    let per_time: Vec<f64> = dev.chunks(n_sites).map(|row| row.iter().sum()).collect();
    let n = m.count() as f64;
    let mut out = vec![0.0; times.len()];
    for k in 1..times.len() {
        let integral = trapezoid(&times[..=k], &per_time[..=k]);
        let span = times[k] - times[0];
        out[k] = (integral / (n * n * span)).sqrt() * n.sqrt();
    }
    out
}
