// Copyright 2026 The qdrift Developers
// SPDX-License-Identifier: Apache-2.0

//! Closed-form references: lead self-energies, Fisher-Lee and Büttiker-probe
//! transmittances, the broadened local density of states, the two-level
//! survival probability under dephasing, and rate fits.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{StateVector, TightBindingModel};

/// Retarded self-energy of a semi-infinite chain with hopping `v`, attached
/// through `v_coupling`.
pub fn lead_self_energy(eps: f64, v: f64, v_coupling: f64) -> Complex64 {
    let pre = v_coupling * v_coupling / (v * v);
    let edge = 2.0 * v.abs();
    if eps.abs() <= edge {
        let root = (edge * edge - eps * eps).max(0.0).sqrt();
        Complex64::new(pre * eps / 2.0, -pre * root / 2.0)
    } else {
        let root = (eps * eps - edge * edge).sqrt();
        Complex64::new(pre * (eps - eps.signum() * root) / 2.0, 0.0)
    }
}

/// Resonant site `E0` between two leads with hopping `v`, couplings `v_l`,
/// `v_r` and dephasing rate `gamma_phi` (energies in units of `V`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonantLevelParams {
    pub e0: f64,
    pub v_l: f64,
    pub v_r: f64,
    pub v: f64,
    pub gamma_phi: f64,
}

impl ResonantLevelParams {
    /// `Γ_L(ε) = −Im Σ_L(ε)`.
    pub fn gamma_l(&self, eps: f64) -> f64 {
        -lead_self_energy(eps, self.v, self.v_l).im
    }

    pub fn gamma_r(&self, eps: f64) -> f64 {
        -lead_self_energy(eps, self.v, self.v_r).im
    }

    pub fn gamma0(&self, eps: f64) -> f64 {
        self.gamma_l(eps) + self.gamma_r(eps)
    }

    /// `Ē₀(ε) = E0 + Re Σ_L + Re Σ_R`.
    pub fn shifted_level(&self, eps: f64) -> f64 {
        self.e0 + lead_self_energy(eps, self.v, self.v_l).re + lead_self_energy(eps, self.v, self.v_r).re
    }

    /// `G(ε) = [(ε − Ē₀) + i(Γ₀ + Γ_φ)]⁻¹`.
    pub fn greens_function(&self, eps: f64) -> Complex64 {
        Complex64::new(eps - self.shifted_level(eps), self.gamma0(eps) + self.gamma_phi).inv()
    }
}

/// Coherent and total (coherent plus probe-mediated) transmittance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transmittance {
    pub coherent: f64,
    pub total: f64,
}

/// `T_RL` and `T̃_RL = T_RL + T_Rφ T_φL/(T_Rφ + T_φL)` with
/// `T_ij = 4Γ_iΓ_j|G|²`.
pub fn dp_transmittance(params: &ResonantLevelParams, eps: f64) -> Result<Transmittance> {
    if eps.abs() >= 2.0 * params.v.abs() {
        return Err(Error::param(format!(
            "energy {eps} outside the open band (-{b}, {b})",
            b = 2.0 * params.v.abs()
        )));
    }
    if params.gamma_phi < 0.0 {
        return Err(Error::param("gamma_phi must be >= 0"));
    }
    let g2 = params.greens_function(eps).norm_sqr();
    let (gl, gr, gp) = (params.gamma_l(eps), params.gamma_r(eps), params.gamma_phi);
    let coherent = 4.0 * gl * gr * g2;
    let t_rp = 4.0 * gr * gp * g2;
    let t_pl = 4.0 * gp * gl * g2;
    let incoherent = if t_rp + t_pl > 0.0 {
        t_rp * t_pl / (t_rp + t_pl)
    } else {
        0.0
    };
    Ok(Transmittance {
        coherent,
        total: coherent + incoherent,
    })
}

/// `(1/π)(Γ₀+Γ_φ)/((ε−Ē₀)² + (Γ₀+Γ_φ)²)`.
pub fn broadened_ldos(eps: f64, e0bar: f64, gamma0: f64, gamma_phi: f64) -> Result<f64> {
    if !(gamma0 > 0.0) || gamma_phi < 0.0 {
        return Err(Error::param(format!(
            "need gamma0 > 0 and gamma_phi >= 0, got {gamma0} and {gamma_phi}"
        )));
    }
    let w = gamma0 + gamma_phi;
    let d = eps - e0bar;
    Ok(w / (std::f64::consts::PI * (d * d + w * w)))
}

/// Regime of the dephased two-level system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayRegime {
    Underdamped,
    Overdamped,
}

/// Two degenerate sites with hopping `v` and dephasing `gamma_phi` on both.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TlsDecayParams {
    pub v: f64,
    pub gamma_phi: f64,
}

/// Below this `|ω|/ω₀` the critical-damping limit is used.
const CRITICAL_RATIO: f64 = 1e-6;

impl TlsDecayParams {
    pub fn new(v: f64, gamma_phi: f64) -> Result<Self> {
        if !(v > 0.0 && v.is_finite()) || !(gamma_phi >= 0.0 && gamma_phi.is_finite()) {
            return Err(Error::param(format!(
                "need V > 0 and gamma_phi >= 0, got {v} and {gamma_phi}"
            )));
        }
        Ok(Self { v, gamma_phi })
    }

    /// Rabi frequency `2V`.
    pub fn omega0(&self) -> f64 {
        2.0 * self.v
    }

    /// `sqrt(ω₀² − Γ_φ²)`, zero when overdamped.
    pub fn omega(&self) -> f64 {
        let w0 = self.omega0();
        (w0 * w0 - self.gamma_phi * self.gamma_phi).max(0.0).sqrt()
    }

    pub fn regime(&self) -> DecayRegime {
        if self.gamma_phi < self.omega0() {
            DecayRegime::Underdamped
        } else {
            DecayRegime::Overdamped
        }
    }

    /// `(γ₁, γ₂) = Γ_φ ± sqrt(Γ_φ² − ω₀²)` when overdamped; both equal `Γ_φ`
    /// otherwise.
    pub fn rates(&self) -> (f64, f64) {
        let g = self.gamma_phi;
        let w0 = self.omega0();
        let disc = g * g - w0 * w0;
        if disc <= 0.0 {
            return (g, g);
        }
        let root = disc.sqrt();
        // γ₂ written as ω₀²/γ₁ to keep precision at large Γ_φ.
        let g1 = g + root;
        (g1, w0 * w0 / g1)
    }
}

/// Survival probability `P̃₀₀(t)` of the dephased two-level system started
/// on site 0.
///
/// With `z = P₀₀ − P₁₁`, the dynamics is `z'' + 2Γ_φ z' + ω₀² z = 0` with
/// `z(0) = 1`, `z'(0) = 0`, so
/// `P̃₀₀ = ½ + ½ e^{-Γ_φ t}[cos ωt + (Γ_φ/ω) sin ωt]` when underdamped and
/// a sum of two exponentials when overdamped.
pub fn glbe_p00(t: f64, params: &TlsDecayParams) -> f64 {
    let g = params.gamma_phi;
    let w0 = params.omega0();
    let disc = w0 * w0 - g * g;
    let envelope = (-g * t).exp();
    if disc.abs().sqrt() < CRITICAL_RATIO * w0 {
        return 0.5 + 0.5 * envelope * (1.0 + g * t);
    }
    if disc > 0.0 {
        let w = disc.sqrt();
        0.5 + 0.5 * envelope * ((w * t).cos() + g / w * (w * t).sin())
    } else {
        let (g1, g2) = params.rates();
        0.5 - g2 / (2.0 * (g1 - g2)) * (-g1 * t).exp() + g1 / (2.0 * (g1 - g2)) * (-g2 * t).exp()
    }
}

/// Rates recovered from a decay curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecayRates {
    /// Envelope rate and oscillation frequency.
    Underdamped { envelope: f64, omega: f64 },
    /// `gamma1 >= gamma2`.
    Overdamped { gamma1: f64, gamma2: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub rates: DecayRates,
    pub residual_rms: f64,
}

/// Fits above this RMS residual are reported as failures.
const MAX_FIT_RESIDUAL: f64 = 0.05;

type DecayModel = fn([f64; 2], f64) -> f64;

fn underdamped_model(p: [f64; 2], t: f64) -> f64 {
    let [g, w] = p;
    0.5 + 0.5 * (-g * t).exp() * ((w * t).cos() + g / w * (w * t).sin())
}

fn overdamped_model(p: [f64; 2], t: f64) -> f64 {
    let [g1, g2] = p;
    let d = g1 - g2;
    if d.abs() < 1e-9 * g1.abs().max(1e-12) {
        return 0.5 + 0.5 * (-g1 * t).exp() * (1.0 + g1 * t);
    }
    0.5 - g2 / (2.0 * d) * (-g1 * t).exp() + g1 / (2.0 * d) * (-g2 * t).exp()
}

/// Least-squares fit of `P̃₀₀(t)` to the two-parameter form of `regime`.
/// A coarse grid seeds a Levenberg-Marquardt refinement.
pub fn fit_decay_rates(times: &[f64], values: &[f64], regime: DecayRegime) -> Result<DecayFit> {
    fit_weighted(times, values, &vec![1.0; times.len()], regime)
}

/// As [`fit_decay_rates`], weighting each point by `1/σ²`. Standard errors
/// are floored at 5% of their mean so the exactly known `t = 0` point does
/// not dominate.
pub fn fit_decay_rates_weighted(
    times: &[f64],
    values: &[f64],
    stderr: &[f64],
    regime: DecayRegime,
) -> Result<DecayFit> {
    if stderr.len() != values.len() {
        return Err(Error::arg("standard errors do not match the series"));
    }
    let mean = stderr.iter().sum::<f64>() / stderr.len().max(1) as f64;
    let floor = (0.05 * mean).max(f64::MIN_POSITIVE);
    let weights: Vec<f64> = stderr.iter().map(|s| 1.0 / s.max(floor).powi(2)).collect();
    fit_weighted(times, values, &weights, regime)
}

fn fit_weighted(times: &[f64], values: &[f64], weights: &[f64], regime: DecayRegime) -> Result<DecayFit> {
    if times.len() != values.len() || times.len() < 4 {
        return Err(Error::arg(format!(
            "fit needs matching series with at least 4 points, got {} and {}",
            times.len(),
            values.len()
        )));
    }
    let t_max = times.iter().copied().fold(0.0, f64::max);
    if !(t_max > 0.0) {
        return Err(Error::arg("fit needs a positive time span"));
    }
    let (model, grid): (DecayModel, Vec<[f64; 2]>) = match regime {
        DecayRegime::Underdamped => {
            let mut grid = Vec::new();
            for i in 0..60 {
                let g = 1e-3 * (1e4f64).powf(i as f64 / 59.0);
                for k in 1..=120 {
                    let w = k as f64 * 0.05;
                    grid.push([g, w]);
                }
            }
            (underdamped_model, grid)
        }
        DecayRegime::Overdamped => {
            let mut grid = Vec::new();
            for i in 0..60 {
                let g2 = 1e-3 * (1e4f64).powf(i as f64 / 59.0);
                for k in 1..=60 {
                    let g1 = g2 * (1.0 + 0.05 * k as f64 * k as f64 / 4.0);
                    grid.push([g1, g2]);
                }
            }
            (overdamped_model, grid)
        }
    };
    let cost = |p: [f64; 2]| -> f64 {
        times
            .iter()
            .zip(values)
            .zip(weights)
            .map(|((&t, &y), &w)| w * (model(p, t) - y).powi(2))
            .sum()
    };
    let start = grid
        .into_iter()
        .map(|p| (cost(p), p))
        .filter(|(c, _)| c.is_finite())
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, p)| p)
        .ok_or_else(|| Error::Internal("no finite starting point for the fit".into()))?;
    let (p, converged) = levenberg_marquardt(model, times, values, weights, start);
    let sq: f64 = times.iter().zip(values).map(|(&t, &y)| (model(p, t) - y).powi(2)).sum();
    let residual_rms = (sq / times.len() as f64).sqrt();
    if !converged || !p.iter().all(|x| x.is_finite() && *x > 0.0) {
        return Err(Error::Fit {
            message: format!("fit did not converge (last parameters {p:?})"),
            residual_rms,
        });
    }
    if residual_rms > MAX_FIT_RESIDUAL {
        return Err(Error::Fit {
            message: format!("residual too large for a {regime:?} curve"),
            residual_rms,
        });
    }
    let rates = match regime {
        DecayRegime::Underdamped => DecayRates::Underdamped {
            envelope: p[0],
            omega: p[1],
        },
        DecayRegime::Overdamped => {
            let (a, b) = if p[0] >= p[1] { (p[0], p[1]) } else { (p[1], p[0]) };
            DecayRates::Overdamped { gamma1: a, gamma2: b }
        }
    };
    Ok(DecayFit { rates, residual_rms })
}

fn levenberg_marquardt(
    model: DecayModel,
    times: &[f64],
    values: &[f64],
    weights: &[f64],
    mut p: [f64; 2],
) -> ([f64; 2], bool) {
    let cost = |p: [f64; 2]| -> f64 {
        times
            .iter()
            .zip(values)
            .zip(weights)
            .map(|((&t, &y), &w)| w * (model(p, t) - y).powi(2))
            .sum()
    };
    let mut c = cost(p);
    let mut lambda = 1e-3;
    for _ in 0..500 {
        let h = [1e-7 * p[0].abs().max(1e-6), 1e-7 * p[1].abs().max(1e-6)];
        let mut jtj = [[0.0; 2]; 2];
        let mut jtr = [0.0; 2];
        for ((&t, &y), &w) in times.iter().zip(values).zip(weights) {
            let r = model(p, t) - y;
            let mut jac = [0.0; 2];
            for k in 0..2 {
                let mut hi = p;
                let mut lo = p;
                hi[k] += h[k];
                lo[k] -= h[k];
                jac[k] = (model(hi, t) - model(lo, t)) / (2.0 * h[k]);
            }
            for a in 0..2 {
                jtr[a] += w * jac[a] * r;
                for b in 0..2 {
                    jtj[a][b] += w * jac[a] * jac[b];
                }
            }
        }
        let mut improved = false;
        while lambda < 1e12 {
            let a00 = jtj[0][0] * (1.0 + lambda);
            let a11 = jtj[1][1] * (1.0 + lambda);
            let a01 = jtj[0][1];
            let det = a00 * a11 - a01 * a01;
            if det.abs() < 1e-300 {
                lambda *= 10.0;
                continue;
            }
            let dp = [
                -(a11 * jtr[0] - a01 * jtr[1]) / det,
                -(a00 * jtr[1] - a01 * jtr[0]) / det,
            ];
            let trial = [p[0] + dp[0], p[1] + dp[1]];
            let ct = cost(trial);
            if ct.is_finite() && ct <= c {
                let step_small = dp[0].abs() <= 1e-12 * p[0].abs().max(1e-12)
                    && dp[1].abs() <= 1e-12 * p[1].abs().max(1e-12);
                let gain_small = c - ct <= 1e-15 * c.max(1e-300);
                p = trial;
                c = ct;
                lambda = (lambda / 10.0).max(1e-12);
                improved = true;
                if step_small || gain_small {
                    return (p, true);
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            // No downhill step at any damping: a stationary point.
            return (p, true);
        }
    }
    (p, false)
}

/// Noise-free site densities at `times` by exact diagonalization.
/// Row `k` holds `|ψ_n(times[k])|²`.
pub fn coherent_densities(model: &TightBindingModel, initial: &StateVector, times: &[f64]) -> Result<Vec<Vec<f64>>> {
    let n = model.n_sites();
    if initial.len() != n {
        return Err(Error::arg(format!(
            "state has {} sites, model {n}",
            initial.len()
        )));
    }
    let eig = SymmetricEigen::new(model.hamiltonian());
    let q = &eig.eigenvectors;
    let coeffs: Vec<Complex64> = (0..n)
        .map(|k| (0..n).map(|i| initial.amplitudes()[i] * q[(i, k)]).sum())
        .collect();
    let rows = times
        .iter()
        .map(|&t| {
            let phased: Vec<Complex64> = coeffs
                .iter()
                .zip(eig.eigenvalues.iter())
                .map(|(c, &e)| c * Complex64::from_polar(1.0, -e * t))
                .collect();
            (0..n)
                .map(|i| {
                    (0..n)
                        .map(|k| phased[k] * q[(i, k)])
                        .sum::<Complex64>()
                        .norm_sqr()
                })
                .collect()
        })
        .collect();
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_xy_chain;

    fn fig1(gamma_phi: f64) -> ResonantLevelParams {
        ResonantLevelParams {
            e0: 0.0,
            v_l: 0.15,
            v_r: 0.15,
            v: 1.0,
            gamma_phi,
        }
    }

    #[test]
    fn self_energy_values() {
        let s = lead_self_energy(0.0, 1.0, 0.15);
        assert!(s.re.abs() < 1e-15 && (s.im + 0.0225).abs() < 1e-15);
        assert!(lead_self_energy(2.0, 1.0, 0.15).im.abs() < 1e-15);
        assert!(lead_self_energy(-2.0, 1.0, 0.15).im.abs() < 1e-15);
        for k in -300..=300 {
            let e = k as f64 * 0.01;
            let s = lead_self_energy(e, 1.0, 0.4);
            assert!(s.im <= 0.0);
            assert!(s.re.abs() <= 0.16 / 2.0 * 2.0 + 1e-12);
        }
        // Outside the band the real branch decays.
        assert!(lead_self_energy(10.0, 1.0, 1.0).re < lead_self_energy(3.0, 1.0, 1.0).re);
    }

    #[test]
    fn symmetric_resonance_transmits_fully() {
        let p = fig1(0.0);
        let t = dp_transmittance(&p, 0.0).unwrap();
        assert!((t.total - 1.0).abs() < 1e-12);
        for k in -19..=19 {
            let t = dp_transmittance(&p, k as f64 * 0.1).unwrap();
            assert_eq!(t.total, t.coherent);
        }
        assert!(dp_transmittance(&p, 2.0).is_err());
    }

    #[test]
    fn dephased_peak_values() {
        let t = dp_transmittance(&fig1(0.01), 0.0).unwrap();
        assert!((t.coherent - 0.0020250 / 0.003025).abs() < 1e-12);
        assert!((t.total - 0.818181818181818).abs() < 1e-9);
        let t = dp_transmittance(&fig1(0.3), 0.0).unwrap();
        assert!(t.total < 0.15 && t.total > 0.1);
        assert!(t.coherent < t.total);
    }

    #[test]
    fn peak_falls_with_dephasing() {
        let mut last = f64::INFINITY;
        for k in 0..=30 {
            let t = dp_transmittance(&fig1(k as f64 * 0.02), 0.0).unwrap().total;
            assert!(t < last);
            last = t;
        }
    }

    #[test]
    fn ldos_peak_and_limit() {
        let v = broadened_ldos(0.3, 0.3, 0.1, 0.2).unwrap();
        assert!((v - 1.0 / (std::f64::consts::PI * 0.3)).abs() < 1e-14);
        assert!(broadened_ldos(0.0, 0.0, 0.0, 0.1).is_err());
    }

    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        #[allow(clippy::too_many_arguments)]
        fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
        let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
        rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50)
    }

    #[test]
    fn ldos_equals_lorentzian_convolution() {
        let (g0, gp, e0) = (0.1, 0.2, 0.05);
        let lorentz = |x: f64, w: f64| w / (std::f64::consts::PI * (x * x + w * w));
        for eps in [-0.5, 0.0, 0.05, 0.3, 1.0] {
            // ΔE = tan θ maps the real line onto (−π/2, π/2).
            let f = |th: f64| {
                let de = th.tan();
                let jac = 1.0 + de * de;
                lorentz(eps - de - e0, g0) * lorentz(de, gp) * jac
            };
            let h = std::f64::consts::FRAC_PI_2 - 1e-9;
            let q = adaptive_simpson(&f, -h, h, 1e-10);
            let closed = broadened_ldos(eps, e0, g0, gp).unwrap();
            assert!((q - closed).abs() < 1e-6, "eps={eps}: {q} vs {closed}");
        }
    }

    #[test]
    fn glbe_limits() {
        let p = TlsDecayParams::new(1.0, 0.0).unwrap();
        for k in 0..100 {
            let t = k as f64 * 0.1;
            assert!((glbe_p00(t, &p) - (0.5 + 0.5 * (2.0 * t).cos())).abs() < 1e-14);
        }
        for g in [0.0, 0.3, 1.0, 2.0, 2.1, 5.0] {
            let p = TlsDecayParams::new(1.0, g).unwrap();
            assert!((glbe_p00(0.0, &p) - 1.0).abs() < 1e-14);
            // Short times: 1 − V²t².
            let t = 1e-3;
            assert!((glbe_p00(t, &p) - (1.0 - t * t)).abs() < 1e-8);
        }
        let (g1, g2) = TlsDecayParams::new(1.0, 2.1).unwrap().rates();
        assert!((g2 - 1.46).abs() < 0.005 && (g1 - 2.74).abs() < 0.005);
    }

    #[test]
    fn glbe_is_continuous_through_the_critical_point() {
        for t in [0.1, 0.7, 2.0, 5.0] {
            let c = glbe_p00(t, &TlsDecayParams::new(1.0, 2.0).unwrap());
            let below = glbe_p00(t, &TlsDecayParams::new(1.0, 2.0 - 1e-5).unwrap());
            let above = glbe_p00(t, &TlsDecayParams::new(1.0, 2.0 + 1e-5).unwrap());
            assert!((c - below).abs() < 1e-4 && (c - above).abs() < 1e-4);
            assert!((c - (0.5 + 0.5 * (-2.0 * t).exp() * (1.0 + 2.0 * t))).abs() < 1e-14);
        }
    }

    #[test]
    fn glbe_matches_rate_equation_integration() {
        // RK4 on the Bloch equations with V = 1: z = ρ₀₀ − ρ₁₁, y ∝ Im ρ₀₁,
        // coherence damped at 2Γ_φ.
        for g in [0.4, 2.0, 3.0] {
            let p = TlsDecayParams::new(1.0, g).unwrap();
            let (mut z, mut y) = (1.0f64, 0.0f64);
            let dt = 1e-4;
            let f = |z: f64, y: f64| (2.0 * y, -2.0 * z - 2.0 * g * y);
            for k in 1..=30000 {
                let (k1z, k1y) = f(z, y);
                let (k2z, k2y) = f(z + 0.5 * dt * k1z, y + 0.5 * dt * k1y);
                let (k3z, k3y) = f(z + 0.5 * dt * k2z, y + 0.5 * dt * k2y);
                let (k4z, k4y) = f(z + dt * k3z, y + dt * k3y);
                z += dt / 6.0 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z);
                y += dt / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
                if k % 5000 == 0 {
                    let t = k as f64 * dt;
                    assert!(((1.0 + z) / 2.0 - glbe_p00(t, &p)).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn rate_identities() {
        for k in 0..200 {
            let g = k as f64 * 0.05;
            let p = TlsDecayParams::new(1.0, g).unwrap();
            let w0 = p.omega0();
            if g < w0 {
                assert_eq!(p.regime(), DecayRegime::Underdamped);
                assert!((p.omega().powi(2) + g * g - w0 * w0).abs() < 1e-12);
            } else {
                assert_eq!(p.regime(), DecayRegime::Overdamped);
                let (g1, g2) = p.rates();
                assert!(g1 >= g2);
                assert!((g1 * g2 - w0 * w0).abs() < 1e-10);
                assert!((g1 + g2 - 2.0 * g).abs() < 1e-10);
            }
        }
        let (g1, g2) = TlsDecayParams::new(1.0, 50.0).unwrap().rates();
        assert!((g1 / 100.0 - 1.0).abs() < 0.01);
        assert!((g2 / (4.0 / 100.0) - 1.0).abs() < 0.01);
    }

    fn synthetic(g: f64) -> (Vec<f64>, Vec<f64>) {
        let p = TlsDecayParams::new(1.0, g).unwrap();
        let t: Vec<f64> = (0..=500).map(|k| k as f64 * 0.02).collect();
        let y = t.iter().map(|&t| glbe_p00(t, &p)).collect();
        (t, y)
    }

    #[test]
    fn fit_recovers_underdamped_rates() {
        let (t, y) = synthetic(0.1);
        let fit = fit_decay_rates(&t, &y, DecayRegime::Underdamped).unwrap();
        let DecayRates::Underdamped { envelope, omega } = fit.rates else {
            panic!("wrong regime")
        };
        assert!((envelope / 0.1 - 1.0).abs() < 0.01);
        assert!((omega / (4.0f64 - 0.01).sqrt() - 1.0).abs() < 0.005);
    }

    #[test]
    fn fit_recovers_overdamped_rates() {
        let (t, y) = synthetic(2.1);
        let fit = fit_decay_rates(&t, &y, DecayRegime::Overdamped).unwrap();
        let DecayRates::Overdamped { gamma1, gamma2 } = fit.rates else {
            panic!("wrong regime")
        };
        assert!((gamma1 / (2.1 + 0.41f64.sqrt()) - 1.0).abs() < 0.02);
        assert!((gamma2 / (2.1 - 0.41f64.sqrt()) - 1.0).abs() < 0.02);
    }

    #[test]
    fn fit_reports_bad_input() {
        let t: Vec<f64> = (0..50).map(|k| k as f64 * 0.1).collect();
        let y: Vec<f64> = t.iter().map(|&t| if (t as i64) % 2 == 0 { 1.0 } else { 0.0 }).collect();
        match fit_decay_rates(&t, &y, DecayRegime::Overdamped) {
            Err(Error::Fit { residual_rms, .. }) => assert!(residual_rms > 0.05),
            other => panic!("expected a fit error, got {other:?}"),
        }
        assert!(fit_decay_rates(&t[..3], &y[..3], DecayRegime::Underdamped).is_err());
    }

    #[test]
    fn coherent_chain_first_site_echo() {
        let model = build_xy_chain(5, 1.0, &[0.0; 5]).unwrap();
        let init = StateVector::localized(5, 0).unwrap();
        let rows = coherent_densities(&model, &init, &[0.0, 6.746]).unwrap();
        assert!((rows[0][0] - 1.0).abs() < 1e-12);
        assert!((rows[1][0] - 0.786).abs() < 2e-3);
        assert!((rows[1].iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
