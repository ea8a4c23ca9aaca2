// Copyright 2026 The qdrift Developers
// SPDX-License-Identifier: Apache-2.0

//! Quantum drift (QD) and quantum jumps (QJ) stepping.
//!
//! QD is the propagator's Trotter step with sampled phases on each
//! decohering site. QJ is the Monte-Carlo wave function unraveling of pure
//! dephasing with jump operators `√(1/τ_SE) |n⟩⟨n|`, `1/τ_SE = 2Γ_φ/ħ`:
//! after the free step the state collapses onto site `n` with probability
//! `(dt/τ_SE)|ψ_n|²`. Without a jump, the anti-Hermitian part damps the
//! decohering amplitudes by `e^{-dt/(2τ_SE)}` before renormalization, which
//! is a no-op when every site decoheres.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{StateVector, TightBindingModel};
use crate::noise::PhaseSource;
use crate::propagator::{Propagator, Workspace};

/// Largest allowed jump probability per step, `dt/τ_SE`.
pub const MAX_JUMP_PROBABILITY: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum UnravelingKind {
    #[default]
    Qd,
    Qj,
}

impl std::str::FromStr for UnravelingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qd" => Ok(Self::Qd),
            "qj" => Ok(Self::Qj),
            other => Err(Error::arg(format!("unknown unraveling {other:?} (expected qd or qj)"))),
        }
    }
}

impl std::fmt::Display for UnravelingKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Qd => "qd",
            Self::Qj => "qj",
        })
    }
}

/// What happened during a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Continuous,
    Jump(usize),
}

#[derive(Debug, Clone)]
struct JumpChannel {
    sites: Vec<usize>,
    /// `dt/τ_SE`.
    probability_scale: f64,
    /// `e^{-dt/(2τ_SE)}`, only applied when not all sites decohere.
    no_jump_damping: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Unraveling {
    kind: UnravelingKind,
    jumps: Option<JumpChannel>,
}

impl Unraveling {
    pub fn new(kind: UnravelingKind, model: &TightBindingModel, dt: f64) -> Result<Self> {
        let jumps = match kind {
            UnravelingKind::Qd => None,
            UnravelingKind::Qj => jump_channel(model, dt)?,
        };
        Ok(Self { kind, jumps })
    }

    pub fn kind(&self) -> UnravelingKind {
        self.kind
    }

    /// `dt/τ_SE` for QJ; zero for QD or without decoherence.
    pub fn jump_probability_scale(&self) -> f64 {
        self.jumps.as_ref().map_or(0.0, |j| j.probability_scale)
    }

    pub fn step<S: PhaseSource + ?Sized>(
        &self,
        prop: &Propagator,
        state: &mut StateVector,
        source: &S,
        step: u64,
        work: &mut Workspace,
    ) -> StepOutcome {
        match self.kind {
            UnravelingKind::Qd => {
                qd_step(prop, state, source, step, work);
                StepOutcome::Continuous
            }
            UnravelingKind::Qj => qj_step(prop, self.jumps.as_ref(), state, source, step, work),
        }
    }

    /// Same contract as [`Propagator::evolve`], with this unraveling's step.
    pub fn evolve<S, F>(
        &self,
        prop: &Propagator,
        mut state: StateVector,
        n_steps: u64,
        source: &S,
        stride: u64,
        mut hook: F,
    ) -> Result<StateVector>
    where
        S: PhaseSource + ?Sized,
        F: FnMut(u64, &StateVector),
    {
        if state.len() != prop.n_sites() {
            return Err(Error::arg(format!(
                "state has {} sites, propagator {}",
                state.len(),
                prop.n_sites()
            )));
        }
        if stride == 0 {
            return Err(Error::arg("recording stride must be >= 1"));
        }
        let mut work = Workspace::new(prop.n_sites());
        hook(0, &state);
        for step in 1..=n_steps {
            self.step(prop, &mut state, source, step, &mut work);
            if step % stride == 0 {
                hook(step, &state);
            }
        }
        Ok(state)
    }
}

fn jump_channel(model: &TightBindingModel, dt: f64) -> Result<Option<JumpChannel>> {
    let sites = model.decohering_sites();
    let Some(&first) = sites.first() else {
        return Ok(None);
    };
    let rates = model.decoherence_rates();
    let gamma = rates[first];
    if sites.iter().any(|&n| (rates[n] - gamma).abs() > 1e-12 * gamma) {
        return Err(Error::param(
            "quantum jumps need the same Γ_φ on every decohering site",
        ));
    }
    let probability_scale = 2.0 * gamma * dt;
    if probability_scale >= MAX_JUMP_PROBABILITY {
        return Err(Error::param(format!(
            "dt/τ_SE = {probability_scale} must stay below {MAX_JUMP_PROBABILITY}"
        )));
    }
    let no_jump_damping = (sites.len() < model.n_sites()).then(|| (-0.5 * probability_scale).exp());
    Ok(Some(JumpChannel {
        sites,
        probability_scale,
        no_jump_damping,
    }))
}

/// QD: exact free step, then `e^{-iβ_n}` on each decohering site.
pub fn qd_step<S: PhaseSource + ?Sized>(
    prop: &Propagator,
    state: &mut StateVector,
    source: &S,
    step: u64,
    work: &mut Workspace,
) {
    prop.step_with(state, source, step, work);
}

fn qj_step<S: PhaseSource + ?Sized>(
    prop: &Propagator,
    channel: Option<&JumpChannel>,
    state: &mut StateVector,
    source: &S,
    step: u64,
    work: &mut Workspace,
) -> StepOutcome {
    prop.apply_free(state, work);
    let Some(ch) = channel else {
        return StepOutcome::Continuous;
    };
    let weight: f64 = ch.sites.iter().map(|&n| state.density(n)).sum();
    let p_jump = ch.probability_scale * weight;
    if source.uniform(step, 0) < p_jump {
        let target = source.uniform(step, 1) * weight;
        let mut cumulative = 0.0;
        let mut chosen = *ch.sites.last().expect("non-empty");
        for &n in &ch.sites {
            cumulative += state.density(n);
            if cumulative >= target {
                chosen = n;
                break;
            }
        }
        let amps = state.amplitudes_mut();
        let a = amps[chosen];
        let phase = if a.norm() > 0.0 { a / a.norm() } else { num_complex::Complex64::new(1.0, 0.0) };
        amps.iter_mut().for_each(|z| *z = num_complex::Complex64::new(0.0, 0.0));
        amps[chosen] = phase;
        return StepOutcome::Jump(chosen);
    }
    if let Some(d) = ch.no_jump_damping {
        let amps = state.amplitudes_mut();
        for &n in &ch.sites {
            amps[n] *= d;
        }
        state.renormalize();
    }
    StepOutcome::Continuous
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_tls, build_xy_chain};
    use crate::noise::{derive_stream, Distribution, NoiseSpec};

    fn setup(gamma: f64) -> (TightBindingModel, Propagator, NoiseSpec) {
        let model = build_xy_chain(5, 1.0, &[0.0; 5]).unwrap().with_uniform_decoherence(gamma).unwrap();
        let prop = Propagator::prepare(&model, 0.01).unwrap();
        let spec = NoiseSpec::new(Distribution::Lorentzian, model.decoherence_rates().to_vec(), 0.01, 17).unwrap();
        (model, prop, spec)
    }

    #[test]
    fn no_decoherence_means_coherent_steps() {
        let (model, prop, spec) = setup(0.0);
        let coherent = prop.evolve(StateVector::localized(5, 0).unwrap(), 300, &derive_stream(&spec, 0), 1, |_, _| {}).unwrap();
        for kind in [UnravelingKind::Qd, UnravelingKind::Qj] {
            let u = Unraveling::new(kind, &model, 0.01).unwrap();
            assert_eq!(u.jump_probability_scale(), 0.0);
            let out = u
                .evolve(&prop, StateVector::localized(5, 0).unwrap(), 300, &derive_stream(&spec, 0), 1, |_, _| {})
                .unwrap();
            assert_eq!(out, coherent);
        }
    }

    #[test]
    fn qd_keeps_the_norm() {
        let (model, prop, spec) = setup(1.0 / 3.0);
        let u = Unraveling::new(UnravelingKind::Qd, &model, 0.01).unwrap();
        let mut worst = 0.0f64;
        u.evolve(&prop, StateVector::localized(5, 0).unwrap(), 5000, &derive_stream(&spec, 1), 1, |_, s| {
            worst = worst.max((s.norm() - 1.0).abs());
        })
        .unwrap();
        assert!(worst < 1e-12);
    }

    #[test]
    fn qj_follows_coherent_path_until_the_first_jump() {
        let (model, prop, spec) = setup(1.0 / 3.0);
        let u = Unraveling::new(UnravelingKind::Qj, &model, 0.01).unwrap();
        let stream = derive_stream(&spec, 2);
        let mut work = Workspace::new(5);
        let mut psi = StateVector::localized(5, 0).unwrap();
        let mut coherent = psi.clone();
        let mut jumped = None;
        for step in 1..=5000 {
            let before = psi.densities();
            let outcome = u.step(&prop, &mut psi, &stream, step, &mut work);
            prop.apply_free(&mut coherent, &mut work);
            match outcome {
                StepOutcome::Continuous => {
                    assert!((psi.norm() - 1.0).abs() < 1e-12);
                    if jumped.is_none() {
                        for (a, b) in psi.densities().iter().zip(coherent.densities()) {
                            assert!((a - b).abs() < 1e-12);
                        }
                    }
                }
                StepOutcome::Jump(n) => {
                    assert_eq!(psi.density(n), 1.0);
                    if jumped.is_none() {
                        let change: f64 = psi.densities().iter().zip(&before).map(|(a, b)| (a - b).abs()).sum();
                        jumped = Some((step, change));
                    }
                }
            }
        }
        let (step, change) = jumped.expect("at least one jump in 50 ħ/J");
        assert!(step > 1);
        // A collapse after coherent spreading moves a finite amount of density.
        assert!(change > 0.05, "{change}");
    }

    #[test]
    fn qj_rejects_nonuniform_rates_and_large_steps() {
        let model = build_tls(0.0, 1.0).unwrap().with_decoherence_rates(vec![0.1, 0.2]).unwrap();
        assert!(matches!(Unraveling::new(UnravelingKind::Qj, &model, 0.01), Err(Error::InvalidParameter(_))));
        assert!(Unraveling::new(UnravelingKind::Qd, &model, 0.01).is_ok());
        let fast = build_tls(0.0, 1.0).unwrap().with_uniform_decoherence(2.5).unwrap();
        assert!(matches!(Unraveling::new(UnravelingKind::Qj, &fast, 0.02), Err(Error::InvalidParameter(_))));
        assert!(Unraveling::new(UnravelingKind::Qj, &fast, 0.01).is_ok());
    }

    #[test]
    fn partial_dephasing_no_jump_branch_is_normalized() {
        let model = build_xy_chain(4, 1.0, &[0.0; 4]).unwrap().with_site_decoherence(1, 0.5).unwrap();
        let prop = Propagator::prepare(&model, 0.01).unwrap();
        let spec = NoiseSpec::new(Distribution::Lorentzian, model.decoherence_rates().to_vec(), 0.01, 1).unwrap();
        let u = Unraveling::new(UnravelingKind::Qj, &model, 0.01).unwrap();
        let mut worst = 0.0f64;
        u.evolve(&prop, StateVector::localized(4, 0).unwrap(), 2000, &derive_stream(&spec, 0), 1, |_, s| {
            worst = worst.max((s.norm() - 1.0).abs());
        })
        .unwrap();
        assert!(worst < 1e-12);
    }

    #[test]
    fn parse_kind() {
        assert_eq!("qj".parse::<UnravelingKind>().unwrap(), UnravelingKind::Qj);
        assert!("qsd".parse::<UnravelingKind>().is_err());
        assert_eq!(UnravelingKind::Qd.to_string(), "qd");
    }
}
