// Copyright 2026 The qdrift Developers
// SPDX-License-Identifier: Apache-2.0

//! Seeded per-site, per-step phase drifts.
//!
//! Every draw is a pure function of `(master_seed, realization, step, site,
//! lane)`, so realizations can be evaluated in any order on any number of
//! workers and still produce the same numbers.
//!
//! Seed derivation (part of the output stability contract):
//!
//! ```text
//! mix(z)   = SplitMix64 finalizer (xor-shift 30/27/31, multipliers
//!            0xbf58476d1ce4e5b9 and 0x94d049bb133111eb)
//! key      = mix(mix(master_seed) + mix(realization ^ 0xd1b54a32d192ed03))
//! word     = mix(mix(key ^ step * 0x9e3779b97f4a7c15) ^ (site << 8 | lane))
//! uniform  = ((word >> 12) + 0.5) / 2^52          in the open interval (0, 1)
//! ```
//!
//! Phases are never wrapped here; `e^{-iβ}` takes care of that downstream.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
const REALIZATION_SALT: u64 = 0xd1b5_4a32_d192_ed03;
/// Site slot reserved for draws that do not belong to a lattice site
/// (jump decisions).
pub(crate) const CONTROL_SLOT: usize = u32::MAX as usize;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline]
fn to_open_unit(word: u64) -> f64 {
    ((word >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    /// Cauchy with scale `s = Γ_φ dt/ħ`.
    #[default]
    Lorentzian,
    /// `±b` with `cos b = e^{-s}`.
    Binary,
    /// Normal with variance `2s`.
    Gaussian,
}

impl std::str::FromStr for Distribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lorentzian" => Ok(Self::Lorentzian),
            "binary" => Ok(Self::Binary),
            "gaussian" => Ok(Self::Gaussian),
            other => Err(Error::arg(format!(
                "unknown distribution {other:?} (expected lorentzian, binary or gaussian)"
            ))),
        }
    }
}

/// Distribution, per-site rates `Γ_φ,n`, time step and master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    distribution: Distribution,
    gamma_phi: Vec<f64>,
    dt: f64,
    master_seed: u64,
}

impl NoiseSpec {
    pub fn new(distribution: Distribution, gamma_phi: Vec<f64>, dt: f64, master_seed: u64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::param(format!("dt must be > 0, got {dt}")));
        }
        if gamma_phi.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(Error::param("decoherence rates must be finite and >= 0"));
        }
        Ok(Self {
            distribution,
            gamma_phi,
            dt,
            master_seed,
        })
    }

    /// Rates taken from the model's per-site `Γ_φ,n`.
    pub fn for_model(
        model: &crate::lattice::TightBindingModel,
        distribution: Distribution,
        dt: f64,
        master_seed: u64,
    ) -> Result<Self> {
        Self::new(distribution, model.decoherence_rates().to_vec(), dt, master_seed)
    }

    pub fn distribution(&self) -> Distribution {
        self.distribution
    }

    pub fn gamma_phi(&self) -> &[f64] {
        &self.gamma_phi
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn n_sites(&self) -> usize {
        self.gamma_phi.len()
    }

    /// Dimensionless width `s_n = Γ_φ,n dt/ħ`.
    pub fn scale(&self, site: usize) -> f64 {
        self.gamma_phi[site] * self.dt
    }
}

/// Anything that can hand out the phase for `(step, site)` and auxiliary
/// uniforms. Steps are counted from 1, matching the product
/// `Π_{j=1}^{N_t} U_Σ(j) U₀`.
pub trait PhaseSource {
    fn phase(&self, step: u64, site: usize) -> f64;

    /// Uniform variate in (0, 1) not tied to a site.
    fn uniform(&self, step: u64, lane: u64) -> f64;
}

/// Phase source for one realization.
#[derive(Debug, Clone)]
pub struct PhaseStream<'a> {
    spec: &'a NoiseSpec,
    realization: u64,
    key: u64,
    /// Per-site distribution parameter, precomputed from `s_n`.
    params: Vec<f64>,
    step: u64,
}

/// Stream for `realization` under `spec`. Pure: same inputs, same stream.
pub fn derive_stream(spec: &NoiseSpec, realization: u64) -> PhaseStream<'_> {
    let key = mix64(mix64(spec.master_seed).wrapping_add(mix64(realization ^ REALIZATION_SALT)));
    let params = (0..spec.n_sites())
        .map(|site| {
            let s = spec.scale(site);
            match spec.distribution {
                Distribution::Lorentzian => s,
                Distribution::Binary => (-s).exp().acos(),
                Distribution::Gaussian => (2.0 * s).sqrt(),
            }
        })
        .collect();
    PhaseStream {
        spec,
        realization,
        key,
        params,
        step: 1,
    }
}

impl<'a> PhaseStream<'a> {
    pub fn spec(&self) -> &'a NoiseSpec {
        self.spec
    }

    pub fn realization(&self) -> u64 {
        self.realization
    }

    /// Raw 64-bit word for `(step, site, lane)`.
    #[inline]
    pub fn word(&self, step: u64, site: usize, lane: u64) -> u64 {
        mix64(mix64(self.key ^ step.wrapping_mul(GOLDEN)) ^ (((site as u64) << 8) | lane))
    }

    /// Current step of the sequential interface.
    pub fn current_step(&self) -> u64 {
        self.step
    }

    pub fn advance(&mut self) {
        self.step += 1;
    }

    /// `β_n` at the current step.
    pub fn sample_phase(&self, site: usize) -> f64 {
        self.phase(self.step, site)
    }
}

impl PhaseSource for PhaseStream<'_> {
    #[inline]
    fn phase(&self, step: u64, site: usize) -> f64 {
        let p = self.params[site];
        if p == 0.0 {
            return 0.0;
        }
        match self.spec.distribution {
            Distribution::Lorentzian => {
                let u = to_open_unit(self.word(step, site, 0));
                p * (PI * (u - 0.5)).tan()
            }
            Distribution::Binary => {
                if self.word(step, site, 0) >> 63 == 0 {
                    p
                } else {
                    -p
                }
            }
            Distribution::Gaussian => {
                let u1 = to_open_unit(self.word(step, site, 0));
                let u2 = to_open_unit(self.word(step, site, 1));
                p * (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
            }
        }
    }

    #[inline]
    fn uniform(&self, step: u64, lane: u64) -> f64 {
        to_open_unit(self.word(step, CONTROL_SLOT, lane))
    }
}
