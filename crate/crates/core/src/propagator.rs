// Copyright 2026 The qdrift Developers
// SPDX-License-Identifier: Apache-2.0

//! First-order Trotter step `U_Σ(dt) U₀(dt)` with `U₀` exact.
//!
//! `U₀ = e^{-iH₀dt}` is built once. Small models go through the spectral
//! decomposition of `H₀`; large ones through a Taylor series summed until
//! the terms drop below machine precision (`‖H₀dt‖ ≤ 0.05` is enforced, so
//! a dozen terms suffice). Both routes yield the same operator to rounding,
//! and the result is stored as a banded matrix with entries below
//! [`DROP_TOLERANCE`] removed. For nearest-neighbour chains the band is a
//! handful of sites wide, which keeps a step linear in the lattice size.
//!
//! The drift `U_Σ = diag(e^{-iβ_n})` acts after `U₀` on the forward step.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{StateVector, TightBindingModel};
use crate::noise::PhaseSource;

/// Largest model diagonalized densely.
pub const SPECTRAL_MAX_SITES: usize = 64;
/// Entries of `U₀` below this modulus are not stored.
pub const DROP_TOLERANCE: f64 = 1e-18;
/// Upper bound on `dt · spectral_radius(H₀)`.
pub const MAX_PHASE_PER_STEP: f64 = 0.05;
/// Upper bound on `dt · max Γ_φ`.
pub const MAX_DEPHASING_PER_STEP: f64 = 0.1;

const C0: Complex64 = Complex64::new(0.0, 0.0);

/// Eigen-decomposition of `H₀` and the cached phases `e^{-iE_k dt}`.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// Columns are the eigenvectors.
    pub eigenvectors: DMatrix<f64>,
    pub step_phases: Vec<Complex64>,
}

/// Row-banded complex matrix: row `i` holds columns `start[i]..start[i]+len`.
#[derive(Debug, Clone)]
struct BandOp {
    start: Vec<usize>,
    offset: Vec<usize>,
    values: Vec<Complex64>,
}

impl BandOp {
    fn from_rows(rows: impl Iterator<Item = (usize, Vec<Complex64>)>, n: usize) -> Self {
        let mut start = Vec::with_capacity(n);
        let mut offset = Vec::with_capacity(n + 1);
        let mut values = Vec::new();
        offset.push(0);
        for (first_col, row) in rows {
            let lo = row.iter().position(|z| z.norm() > DROP_TOLERANCE);
            let hi = row.iter().rposition(|z| z.norm() > DROP_TOLERANCE);
            match (lo, hi) {
                (Some(lo), Some(hi)) => {
                    start.push(first_col + lo);
                    values.extend_from_slice(&row[lo..=hi]);
                }
                _ => start.push(0),
            }
            offset.push(values.len());
        }
        Self { start, offset, values }
    }

    fn conj(&self) -> Self {
        Self {
            start: self.start.clone(),
            offset: self.offset.clone(),
            values: self.values.iter().map(|z| z.conj()).collect(),
        }
    }

    #[inline]
    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let row = &self.values[self.offset[i]..self.offset[i + 1]];
            let xs = &x[self.start[i]..self.start[i] + row.len()];
            *yi = row.iter().zip(xs).map(|(u, v)| u * v).sum();
        }
    }

    fn max_row_len(&self) -> usize {
        self.offset.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0)
    }
}

/// Scratch buffer for in-place stepping.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    buf: Vec<Complex64>,
}

impl Workspace {
    pub fn new(n_sites: usize) -> Self {
        Self { buf: vec![C0; n_sites] }
    }
}

#[derive(Debug, Clone)]
pub struct Propagator {
    n_sites: usize,
    dt: f64,
    spectral_radius: f64,
    spectrum: Option<Spectrum>,
    forward: BandOp,
    backward: BandOp,
    decohering: Vec<usize>,
}

impl Propagator {
    /// Builds `U₀(dt)` for `model`. `dt` must satisfy
    /// `dt ≤ 0.05/ρ(H₀)` and `dt ≤ 0.1/max Γ_φ`.
    pub fn prepare(model: &TightBindingModel, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::param(format!("dt must be > 0, got {dt}")));
        }
        let n = model.n_sites();
        let h = model.hamiltonian();
        if h != h.transpose() {
            return Err(Error::Internal("H₀ is not symmetric".into()));
        }

        let (spectrum, spectral_radius) = if n <= SPECTRAL_MAX_SITES {
            let eig = SymmetricEigen::new(h);
            let eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
            if eigenvalues.iter().any(|e| !e.is_finite()) {
                return Err(Error::Internal("diagonalization produced non-finite eigenvalues".into()));
            }
            let radius = eigenvalues.iter().fold(0.0f64, |m, e| m.max(e.abs()));
            let step_phases = eigenvalues
                .iter()
                .map(|&e| Complex64::from_polar(1.0, -e * dt))
                .collect();
            (
                Some(Spectrum {
                    eigenvalues,
                    eigenvectors: eig.eigenvectors,
                    step_phases,
                }),
                radius,
            )
        } else {
            (None, model.gershgorin_radius())
        };

        check_time_step(dt, spectral_radius, model.max_decoherence_rate())?;

        let forward = match &spectrum {
            Some(s) => spectral_operator(s, n),
            None => taylor_operator(model, dt)?,
        };
        let backward = forward.conj();
        Ok(Self {
            n_sites: n,
            dt,
            spectral_radius,
            spectrum,
            forward,
            backward,
            decohering: model.decohering_sites(),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// Exact for the spectral route, Gershgorin bound otherwise.
    pub fn spectral_radius(&self) -> f64 {
        self.spectral_radius
    }

    pub fn spectrum(&self) -> Option<&Spectrum> {
        self.spectrum.as_ref()
    }

    /// Sites that receive a phase drift.
    pub fn decohering_sites(&self) -> &[usize] {
        &self.decohering
    }

    /// Widest stored row of `U₀`.
    pub fn band_width(&self) -> usize {
        self.forward.max_row_len()
    }

    /// `ψ ← U₀ψ`.
    pub fn apply_free(&self, state: &mut StateVector, work: &mut Workspace) {
        apply_op(&self.forward, state, work);
    }

    /// `ψ ← U₀†ψ`.
    pub fn apply_free_reverse(&self, state: &mut StateVector, work: &mut Workspace) {
        apply_op(&self.backward, state, work);
    }

    /// `ψ ← diag(e^{-iβ_n}) U₀ ψ` for a dense phase vector.
    pub fn step(&self, state: &StateVector, phases: &[f64]) -> Result<StateVector> {
        if phases.len() != self.n_sites || state.len() != self.n_sites {
            return Err(Error::arg(format!(
                "step expects {} sites, got state {} and phases {}",
                self.n_sites,
                state.len(),
                phases.len()
            )));
        }
        let mut out = state.clone();
        let mut work = Workspace::new(self.n_sites);
        self.apply_free(&mut out, &mut work);
        apply_phases(&mut out, phases.iter().copied().enumerate());
        Ok(out)
    }

    /// One forward step drawing the phases of step `step` from `source`.
    #[inline]
    pub fn step_with<S: PhaseSource + ?Sized>(
        &self,
        state: &mut StateVector,
        source: &S,
        step: u64,
        work: &mut Workspace,
    ) {
        self.apply_free(state, work);
        apply_phases(state, self.decohering.iter().map(|&n| (n, source.phase(step, n))));
    }

    /// Reversed step of the echo protocol: drift first, then `U₀†`.
    #[inline]
    pub fn reverse_step_with<S: PhaseSource + ?Sized>(
        &self,
        state: &mut StateVector,
        source: &S,
        step: u64,
        work: &mut Workspace,
    ) {
        apply_phases(state, self.decohering.iter().map(|&n| (n, source.phase(step, n))));
        self.apply_free_reverse(state, work);
    }

    /// Runs `n_steps` forward steps (step indices `1..=n_steps`). The hook
    /// sees the state at step 0 and at every multiple of `stride`.
    pub fn evolve<S, F>(
        &self,
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
        if state.len() != self.n_sites {
            return Err(Error::arg(format!(
                "state has {} sites, propagator {}",
                state.len(),
                self.n_sites
            )));
        }
        if stride == 0 {
            return Err(Error::arg("recording stride must be >= 1"));
        }
        let mut work = Workspace::new(self.n_sites);
        hook(0, &state);
        for step in 1..=n_steps {
            self.step_with(&mut state, source, step, &mut work);
            if step % stride == 0 {
                hook(step, &state);
            }
        }
        Ok(state)
    }
}

pub(crate) fn apply_phases(state: &mut StateVector, phases: impl Iterator<Item = (usize, f64)>) {
    let amps = state.amplitudes_mut();
    for (n, beta) in phases {
        if beta != 0.0 {
            amps[n] *= Complex64::from_polar(1.0, -beta);
        }
    }
}

fn apply_op(op: &BandOp, state: &mut StateVector, work: &mut Workspace) {
    let amps = state.amplitudes_mut();
    if work.buf.len() != amps.len() {
        work.buf.resize(amps.len(), C0);
    }
    op.apply(amps, &mut work.buf);
    amps.copy_from_slice(&work.buf);
}

fn check_time_step(dt: f64, spectral_radius: f64, max_gamma: f64) -> Result<()> {
    // Slack so that dt = 0.05/ρ itself is accepted despite rounding.
    let slack = 1.0 + 1e-12;
    if spectral_radius > 0.0 && dt * spectral_radius > MAX_PHASE_PER_STEP * slack {
        return Err(Error::param(format!(
            "dt = {dt} exceeds {MAX_PHASE_PER_STEP}/spectral_radius = {}",
            MAX_PHASE_PER_STEP / spectral_radius
        )));
    }
    if max_gamma > 0.0 && dt * max_gamma > MAX_DEPHASING_PER_STEP * slack {
        return Err(Error::param(format!(
            "dt = {dt} exceeds {MAX_DEPHASING_PER_STEP}/max Γ_φ = {}",
            MAX_DEPHASING_PER_STEP / max_gamma
        )));
    }
    Ok(())
}

fn spectral_operator(s: &Spectrum, n: usize) -> BandOp {
    let q = &s.eigenvectors;
    let mut u = DMatrix::<Complex64>::from_fn(n, n, |i, j| {
        (0..n)
            .map(|k| s.step_phases[k] * (q[(i, k)] * q[(j, k)]))
            .sum::<Complex64>()
    });
    // Newton-Schulz steps U <- U(3 - U†U)/2 pull the rounded operator back
    // to unitary; otherwise the norm drifts by ~1e-16 per step.
    let eye = DMatrix::<Complex64>::identity(n, n);
    for _ in 0..2 {
        let gram = u.adjoint() * &u;
        u = &u * (eye.scale(3.0) - gram).scale(0.5);
    }
    let rows = (0..n).map(|i| (0, u.row(i).iter().copied().collect()));
    BandOp::from_rows(rows, n)
}

/// `Σ_k (-iH₀dt)^k / k!` on band storage.
fn taylor_operator(model: &TightBindingModel, dt: f64) -> Result<BandOp> {
    let n = model.n_sites();
    let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, &e) in model.site_energies().iter().enumerate() {
        if e != 0.0 {
            adjacency[i].push((i, e));
        }
    }
    for h in model.hoppings() {
        adjacency[h.i].push((h.j, h.amplitude));
        adjacency[h.j].push((h.i, h.amplitude));
    }
    let hb = model.bandwidth().max(1);

    // Band storage: row i covers columns i-b ..= i+b (clipped), width 2b+1.
    let mut b = 0usize;
    let mut term: Vec<Vec<Complex64>> = vec![vec![Complex64::new(1.0, 0.0)]; n];
    let mut sum: Vec<Vec<Complex64>> = term.clone();
    let factor = Complex64::new(0.0, -dt);
    for k in 1..64 {
        let nb = (b + hb).min(n - 1);
        let width = 2 * nb + 1;
        let mut next = vec![vec![C0; width]; n];
        let mut largest = 0.0f64;
        for i in 0..n {
            for (c, &t) in term[i].iter().enumerate() {
                if t == C0 {
                    continue;
                }
                let l = (i + c).wrapping_sub(b);
                if l >= n {
                    continue;
                }
                for &(j, hv) in &adjacency[l] {
                    let col = j + nb - i;
                    next[i][col] += t * hv;
                }
            }
            let scale = factor / k as f64;
            for z in next[i].iter_mut() {
                *z *= scale;
                largest = largest.max(z.norm());
            }
        }
        // Widen the running sum to the new band.
        for (s_row, n_row) in sum.iter_mut().zip(&next) {
            let mut widened = vec![C0; width];
            widened[nb - b..nb - b + s_row.len()].copy_from_slice(s_row);
            for (w, t) in widened.iter_mut().zip(n_row) {
                *w += t;
            }
            *s_row = widened;
        }
        term = next;
        b = nb;
        if largest < DROP_TOLERANCE * 1e-2 {
            let rows = sum.into_iter().enumerate().map(|(i, row)| {
                // Column of row[0] is i - b, clip negative part.
                if i >= b {
                    (i - b, row)
                } else {
                    (0, row[b - i..].to_vec())
                }
            });
            let rows: Vec<(usize, Vec<Complex64>)> = rows
                .map(|(first, mut row)| {
                    row.truncate(n - first);
                    (first, row)
                })
                .collect();
            return Ok(BandOp::from_rows(rows.into_iter(), n));
        }
    }
    Err(Error::Internal("Taylor series for U₀ did not converge".into()))
}
