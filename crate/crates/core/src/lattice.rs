// Copyright 2026 The qdrift Developers
// SPDX-License-Identifier: Apache-2.0

//! Finite tight-binding Hamiltonians and initial states.
//!
//! Units: energies in the lead hopping `V` (or `J` for the spin chain),
//! times in `ħ/V`, `ħ = 1`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Real off-diagonal coupling `H[i][j] = H[j][i] = amplitude`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hopping {
    pub i: usize,
    pub j: usize,
    pub amplitude: f64,
}

/// Which builder produced a model, with the parameters it was built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    /// Resonant site between two truncated leads. Sites `0..lead_len` are the
    /// left lead, `lead_len` is the resonant site, the rest is the right lead.
    Dbrtd {
        e0: f64,
        v_l: f64,
        v_r: f64,
        v: f64,
        lead_len: usize,
    },
    TwoLevel {
        e0: f64,
        v: f64,
    },
    /// One-excitation sector of the XY chain after Jordan-Wigner.
    XyChain {
        j: f64,
    },
    Custom,
}

/// Real symmetric Hamiltonian plus per-site dephasing rates `Γ_φ,n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TightBindingModel {
    site_energies: Vec<f64>,
    hoppings: Vec<Hopping>,
    decoherence_rates: Vec<f64>,
    kind: ModelKind,
}

impl TightBindingModel {
    pub fn new(
        site_energies: Vec<f64>,
        hoppings: Vec<Hopping>,
        decoherence_rates: Vec<f64>,
        kind: ModelKind,
    ) -> Result<Self> {
        let n = site_energies.len();
        if n == 0 {
            return Err(Error::param("model needs at least one site"));
        }
        if site_energies.iter().any(|e| !e.is_finite()) {
            return Err(Error::param("site energies must be finite"));
        }
        for h in &hoppings {
            if h.i >= n || h.j >= n {
                return Err(Error::param(format!(
                    "hopping ({}, {}) references a site outside 0..{n}",
                    h.i, h.j
                )));
            }
            if h.i == h.j {
                return Err(Error::param(format!("hopping ({0}, {0}) is diagonal", h.i)));
            }
            if !h.amplitude.is_finite() {
                return Err(Error::param("hopping amplitudes must be finite"));
            }
        }
        check_rates(&decoherence_rates, n)?;
        Ok(Self {
            site_energies,
            hoppings,
            decoherence_rates,
            kind,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.site_energies.len()
    }

    pub fn site_energies(&self) -> &[f64] {
        &self.site_energies
    }

    pub fn hoppings(&self) -> &[Hopping] {
        &self.hoppings
    }

    pub fn decoherence_rates(&self) -> &[f64] {
        &self.decoherence_rates
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn with_decoherence_rates(mut self, rates: Vec<f64>) -> Result<Self> {
        check_rates(&rates, self.n_sites())?;
        self.decoherence_rates = rates;
        Ok(self)
    }

    pub fn with_uniform_decoherence(self, gamma_phi: f64) -> Result<Self> {
        let n = self.n_sites();
        self.with_decoherence_rates(vec![gamma_phi; n])
    }

    pub fn with_site_decoherence(mut self, site: usize, gamma_phi: f64) -> Result<Self> {
        if site >= self.n_sites() {
            return Err(Error::param(format!("site {site} out of range")));
        }
        let mut rates = std::mem::take(&mut self.decoherence_rates);
        rates[site] = gamma_phi;
        self.with_decoherence_rates(rates)
    }

    /// Indices of sites with `Γ_φ,n > 0`.
    pub fn decohering_sites(&self) -> Vec<usize> {
        self.decoherence_rates
            .iter()
            .enumerate()
            .filter(|(_, &g)| g > 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn max_decoherence_rate(&self) -> f64 {
        self.decoherence_rates.iter().copied().fold(0.0, f64::max)
    }

    /// Dense `H₀`. Repeated hoppings on the same bond add up.
    pub fn hamiltonian(&self) -> DMatrix<f64> {
        let n = self.n_sites();
        let mut h = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(
            &self.site_energies,
        ));
        for hop in &self.hoppings {
            h[(hop.i, hop.j)] += hop.amplitude;
            h[(hop.j, hop.i)] += hop.amplitude;
        }
        debug_assert_eq!(h.nrows(), n);
        h
    }

    /// Largest `|i - j|` over the hoppings.
    pub fn bandwidth(&self) -> usize {
        self.hoppings
            .iter()
            .map(|h| h.i.abs_diff(h.j))
            .max()
            .unwrap_or(0)
    }

    /// Gershgorin bound on the spectral radius of `H₀`.
    pub fn gershgorin_radius(&self) -> f64 {
        let mut row: Vec<f64> = self.site_energies.iter().map(|e| e.abs()).collect();
        for h in &self.hoppings {
            row[h.i] += h.amplitude.abs();
            row[h.j] += h.amplitude.abs();
        }
        row.into_iter().fold(0.0, f64::max)
    }

    /// `H₀ψ` without forming the dense matrix.
    pub fn apply_hamiltonian(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let mut out: Vec<Complex64> = psi
            .iter()
            .zip(&self.site_energies)
            .map(|(a, &e)| a * e)
            .collect();
        for h in &self.hoppings {
            out[h.i] += psi[h.j] * h.amplitude;
            out[h.j] += psi[h.i] * h.amplitude;
        }
        out
    }

    /// `⟨ψ|H₀|ψ⟩`.
    pub fn energy_expectation(&self, state: &StateVector) -> f64 {
        let h_psi = self.apply_hamiltonian(state.amplitudes());
        state
            .amplitudes()
            .iter()
            .zip(&h_psi)
            .map(|(a, b)| (a.conj() * b).re)
            .sum()
    }

    /// Index of the resonant site of a DBRTD model.
    pub fn resonant_site(&self) -> Option<usize> {
        match self.kind {
            ModelKind::Dbrtd { lead_len, .. } => Some(lead_len),
            _ => None,
        }
    }
}

fn check_rates(rates: &[f64], n: usize) -> Result<()> {
    if rates.len() != n {
        return Err(Error::param(format!(
            "decoherence_rates has length {}, expected {n}",
            rates.len()
        )));
    }
    if rates.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
        return Err(Error::param("decoherence rates must be finite and >= 0"));
    }
    Ok(())
}

/// Normalized complex amplitudes over the sites.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// Normalizes `amplitudes`. Fails on a zero or non-finite vector.
    pub fn from_amplitudes(mut amplitudes: Vec<Complex64>) -> Result<Self> {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::arg("state vector must have finite, non-zero norm"));
        }
        amplitudes.iter_mut().for_each(|a| *a /= norm);
        Ok(Self { amplitudes })
    }

    /// `|site⟩`.
    pub fn localized(n_sites: usize, site: usize) -> Result<Self> {
        if site >= n_sites {
            return Err(Error::arg(format!("site {site} outside 0..{n_sites}")));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); n_sites];
        amplitudes[site] = Complex64::new(1.0, 0.0);
        Ok(Self { amplitudes })
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// Raw mutable access. Callers keep the vector normalized.
    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn density(&self, site: usize) -> f64 {
        self.amplitudes[site].norm_sqr()
    }

    pub fn densities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `⟨self|other⟩`.
    pub fn overlap(&self, other: &StateVector) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub(crate) fn renormalize(&mut self) {
        let norm = self.norm();
        self.amplitudes.iter_mut().for_each(|a| *a /= norm);
    }
}

/// Resonant site `E0` coupled by `-V_L`, `-V_R` to two leads of hopping `-V`
/// truncated to `lead_len` sites each.
pub fn build_dbrtd(e0: f64, v_l: f64, v_r: f64, v: f64, lead_len: usize) -> Result<TightBindingModel> {
    if lead_len < 1 {
        return Err(Error::param("lead_len must be >= 1"));
    }
    if !(v > 0.0) {
        return Err(Error::param(format!("lead hopping V must be > 0, got {v}")));
    }
    let n = 2 * lead_len + 1;
    let center = lead_len;
    let mut energies = vec![0.0; n];
    energies[center] = e0;
    let hoppings = (0..n - 1)
        .map(|i| {
            let amplitude = if i + 1 == center {
                -v_l
            } else if i == center {
                -v_r
            } else {
                -v
            };
            Hopping { i, j: i + 1, amplitude }
        })
        .collect();
    TightBindingModel::new(
        energies,
        hoppings,
        vec![0.0; n],
        ModelKind::Dbrtd {
            e0,
            v_l,
            v_r,
            v,
            lead_len,
        },
    )
}

/// Two degenerate levels `E0` mixed by `-V`.
pub fn build_tls(e0: f64, v: f64) -> Result<TightBindingModel> {
    if !(v > 0.0) {
        return Err(Error::param(format!("V must be > 0, got {v}")));
    }
    TightBindingModel::new(
        vec![e0, e0],
        vec![Hopping { i: 0, j: 1, amplitude: -v }],
        vec![0.0; 2],
        ModelKind::TwoLevel { e0, v },
    )
}

/// One-excitation image of `Σ J (S⁺ᵢS⁻ᵢ₊₁ + h.c.) + Σ ħΩᵢ S⁺ᵢS⁻ᵢ`:
/// nearest-neighbour hopping `+J`, site energies `ħΩᵢ`. The uniform Larmor
/// term only adds a global phase and is left out.
pub fn build_xy_chain(m: usize, j: f64, larmor_offsets: &[f64]) -> Result<TightBindingModel> {
    if m < 2 {
        return Err(Error::param(format!("spin chain needs M >= 2, got {m}")));
    }
    if larmor_offsets.len() != m {
        return Err(Error::param(format!(
            "larmor_offsets has length {}, expected {m}",
            larmor_offsets.len()
        )));
    }
    let hoppings = (0..m - 1).map(|i| Hopping { i, j: i + 1, amplitude: j }).collect();
    TightBindingModel::new(
        larmor_offsets.to_vec(),
        hoppings,
        vec![0.0; m],
        ModelKind::XyChain { j },
    )
}

/// Gaussian packet `exp(-(n-c)²/(4w²)) exp(ikn)` in the left lead of a
/// DBRTD model, with `-2V cos k = energy` so it moves towards the scatterer.
pub fn build_gaussian_packet(
    model: &TightBindingModel,
    center: usize,
    width: f64,
    energy: f64,
) -> Result<StateVector> {
    let (v, lead_len) = match *model.kind() {
        ModelKind::Dbrtd { v, lead_len, .. } => (v, lead_len),
        _ => {
            return Err(Error::Geometry(
                "Gaussian packets need a model with a left lead (DBRTD)".into(),
            ))
        }
    };
    if !(energy.abs() < 2.0 * v) {
        return Err(Error::param(format!(
            "packet energy {energy} outside the lead band (-{0}, {0})",
            2.0 * v
        )));
    }
    if !(width >= 3.0) {
        return Err(Error::param(format!("packet width must be >= 3 sites, got {width}")));
    }
    let reach = 4.0 * width;
    let c = center as f64;
    if c - reach < 0.0 || c + reach > (lead_len - 1) as f64 {
        return Err(Error::Geometry(format!(
            "packet support [{:.1}, {:.1}] leaves the left lead [0, {}]",
            c - reach,
            c + reach,
            lead_len - 1
        )));
    }
    let k = (-energy / (2.0 * v)).acos();
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); model.n_sites()];
    for (n, a) in amplitudes.iter_mut().enumerate().take(lead_len) {
        let x = n as f64 - c;
        let envelope = (-x * x / (4.0 * width * width)).exp();
        *a = Complex64::from_polar(envelope, k * n as f64);
    }
    StateVector::from_amplitudes(amplitudes)
}

/// Group velocity `2V sin k` of the lead dispersion `-2V cos k` at `energy`.
pub fn group_velocity(v: f64, energy: f64) -> f64 {
    (4.0 * v * v - energy * energy).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;

    fn eigenvalues(model: &TightBindingModel) -> Vec<f64> {
        let mut e: Vec<f64> = SymmetricEigen::new(model.hamiltonian())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        e.sort_by(|a, b| a.partial_cmp(b).unwrap());
        e
    }

    #[test]
    fn dbrtd_with_uniform_barriers_is_a_plain_chain() {
        let m = build_dbrtd(0.0, 1.0, 1.0, 1.0, 2).unwrap();
        assert_eq!(m.n_sites(), 5);
        assert!(m.site_energies().iter().all(|&e| e == 0.0));
        assert!(m.hoppings().iter().all(|h| h.amplitude == -1.0));
        assert_eq!(m.resonant_site(), Some(2));
    }

    #[test]
    fn dbrtd_barriers_sit_next_to_the_resonant_site() {
        let m = build_dbrtd(0.0, 0.15, 0.15, 1.0, 400).unwrap();
        assert_eq!(m.n_sites(), 801);
        for h in m.hoppings() {
            let touches_center = h.i == 400 || h.j == 400;
            let expected = if touches_center { -0.15 } else { -1.0 };
            assert_eq!(h.amplitude, expected, "bond ({}, {})", h.i, h.j);
        }
        assert!(m.decoherence_rates().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn dbrtd_spectrum_within_gershgorin_bound() {
        for &(e0, vl, vr, v) in &[(0.0, 0.15, 0.15, 1.0), (0.7, 0.3, 0.9, 1.0), (-1.3, 1.0, 0.5, 0.8)] {
            let m = build_dbrtd(e0, vl, vr, v, 20).unwrap();
            let bound = 2.0 * v + f64::abs(e0);
            for e in eigenvalues(&m) {
                assert!(e.abs() <= bound + 1e-12, "eigenvalue {e} above {bound}");
            }
        }
    }

    #[test]
    fn dbrtd_rejects_bad_parameters() {
        assert!(matches!(build_dbrtd(0.0, 0.1, 0.1, 1.0, 0), Err(Error::InvalidParameter(_))));
        assert!(matches!(build_dbrtd(0.0, 0.1, 0.1, 0.0, 3), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn tls_spectrum() {
        let e = eigenvalues(&build_tls(0.0, 1.0).unwrap());
        assert!((e[0] + 1.0).abs() < 1e-14 && (e[1] - 1.0).abs() < 1e-14);
        let e = eigenvalues(&build_tls(5.0, 1.0).unwrap());
        assert!((e[0] - 4.0).abs() < 1e-14 && (e[1] - 6.0).abs() < 1e-14);
        assert!(build_tls(0.0, -1.0).is_err());
    }

    #[test]
    fn tls_ground_state_is_symmetric() {
        let eig = SymmetricEigen::new(build_tls(0.0, 1.0).unwrap().hamiltonian());
        let k = if eig.eigenvalues[0] < eig.eigenvalues[1] { 0 } else { 1 };
        let g = eig.eigenvectors.column(k);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((g[0].abs() - s).abs() < 1e-14);
        assert!((g[0] - g[1]).abs() < 1e-14);
    }

    #[test]
    fn xy_chain_matrix() {
        let m = build_xy_chain(5, 1.0, &[0.0; 5]).unwrap();
        let h = m.hamiltonian();
        for i in 0..5usize {
            for j in 0..5 {
                let expected = if i.abs_diff(j) == 1 { 1.0 } else { 0.0 };
                assert_eq!(h[(i, j)], expected);
            }
        }
        assert!(build_xy_chain(1, 1.0, &[0.0]).is_err());
        assert!(build_xy_chain(3, 1.0, &[0.0; 2]).is_err());
    }

    #[test]
    fn two_site_xy_chain_matches_tls_spectrum() {
        let a = eigenvalues(&build_xy_chain(2, 1.0, &[0.0; 2]).unwrap());
        let b = eigenvalues(&build_tls(0.0, 1.0).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn hamiltonian_is_exactly_symmetric() {
        let m = build_dbrtd(0.3, 0.2, 0.4, 1.0, 6).unwrap();
        let h = m.hamiltonian();
        assert_eq!(h, h.transpose());
    }

    #[test]
    fn model_validation() {
        let bad_hop = vec![Hopping { i: 0, j: 0, amplitude: 1.0 }];
        assert!(TightBindingModel::new(vec![0.0; 2], bad_hop, vec![0.0; 2], ModelKind::Custom).is_err());
        let out_of_range = vec![Hopping { i: 0, j: 2, amplitude: 1.0 }];
        assert!(TightBindingModel::new(vec![0.0; 2], out_of_range, vec![0.0; 2], ModelKind::Custom).is_err());
        assert!(TightBindingModel::new(vec![0.0; 2], vec![], vec![0.0], ModelKind::Custom).is_err());
        assert!(TightBindingModel::new(vec![0.0; 2], vec![], vec![0.0, -0.1], ModelKind::Custom).is_err());
    }

    #[test]
    fn band_center_packet() {
        let m = build_dbrtd(0.0, 0.15, 0.15, 1.0, 400).unwrap();
        let psi = build_gaussian_packet(&m, 100, 15.0, 0.0).unwrap();
        assert!((psi.norm() - 1.0).abs() < 1e-14);
        assert!(m.energy_expectation(&psi).abs() < 0.01);
        assert_eq!(group_velocity(1.0, 0.0), 2.0);
    }

    #[test]
    fn packet_energy_follows_dispersion() {
        let m = build_dbrtd(0.0, 0.15, 0.15, 1.0, 400).unwrap();
        for &eps in &[-1.0, -0.5, 0.3, 1.2] {
            let psi = build_gaussian_packet(&m, 150, 20.0, eps).unwrap();
            assert!((m.energy_expectation(&psi) - eps).abs() < 0.01, "energy {eps}");
        }
    }

    #[test]
    fn packet_errors() {
        let m = build_dbrtd(0.0, 0.15, 0.15, 1.0, 100).unwrap();
        assert!(matches!(build_gaussian_packet(&m, 50, 10.0, 2.5), Err(Error::InvalidParameter(_))));
        assert!(matches!(build_gaussian_packet(&m, 50, 2.0, 0.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(build_gaussian_packet(&m, 80, 10.0, 0.0), Err(Error::Geometry(_))));
        assert!(matches!(build_gaussian_packet(&m, 20, 10.0, 0.0), Err(Error::Geometry(_))));
        let tls = build_tls(0.0, 1.0).unwrap();
        assert!(matches!(build_gaussian_packet(&tls, 0, 3.0, 0.0), Err(Error::Geometry(_))));
    }
}
