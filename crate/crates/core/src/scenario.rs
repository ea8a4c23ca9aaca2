// Copyright 2026 The qdrift Developers
// SPDX-License-Identifier: Apache-2.0

//! Scenario files, bundled presets and the files a run writes.
//!
//! A scenario is a TOML document with a few top-level keys and one section
//! named after its `kind`:
//!
//! ```toml
//! kind = "tls_qdpt"
//! seed = 2026
//! n_realizations = 100
//!
//! [tls]
//! gamma_phi = [0.1]
//! t_max = 30.0
//! ```
//!
//! Results are CSV with a header row and numbers printed with 17
//! significant digits. Every run also writes `manifest.json`, which can be
//! fed back to `qdrift run` to reproduce the CSVs byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::ensemble::{EnsembleRun, Schedule};
use crate::error::{Error, Result};
use crate::experiments::{self, ConvergenceSetup, DbrtdSetup};
use crate::lattice::{build_xy_chain, StateVector};
use crate::noise::Distribution;
use crate::oracle::{self, DecayRates, ResonantLevelParams, TlsDecayParams};
use crate::unraveling::UnravelingKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Dbrtd,
    TlsQdpt,
    SpinChain,
    Loschmidt,
    Convergence,
}

impl ScenarioKind {
    fn section(self) -> &'static str {
        match self {
            Self::Dbrtd => "dbrtd",
            Self::TlsQdpt => "tls",
            Self::SpinChain => "spin_chain",
            Self::Loschmidt => "loschmidt",
            Self::Convergence => "convergence",
        }
    }
}

const REQUIRED_KEYS: [&str; 3] = ["kind", "seed", "n_realizations"];

fn one() -> usize {
    1
}
fn unit() -> f64 {
    1.0
}
fn dt_lattice() -> f64 {
    0.025
}
fn dt_small() -> f64 {
    0.01
}
fn stride_10() -> u64 {
    10
}
fn stride_5() -> u64 {
    5
}
fn five() -> usize {
    5
}
fn echo_threshold() -> f64 {
    0.25
}
fn both_methods() -> Vec<UnravelingKind> {
    vec![UnravelingKind::Qd, UnravelingKind::Qj]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub kind: ScenarioKind,
    pub seed: u64,
    /// `N_s`; the reference ensemble size for convergence studies.
    pub n_realizations: u64,
    #[serde(default)]
    pub unraveling: UnravelingKind,
    #[serde(default)]
    pub distribution: Distribution,
    /// Worker threads. Results do not depend on it.
    #[serde(default = "one")]
    pub workers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dbrtd: Option<DbrtdSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tls: Option<TlsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spin_chain: Option<SpinChainSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loschmidt: Option<LoschmidtSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceSection>,
}

/// Resonant site between two leads, energy sweep with Gaussian packets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DbrtdSection {
    #[serde(default)]
    pub e0: f64,
    #[serde(default = "unit")]
    pub v: f64,
    pub v_l: f64,
    pub v_r: f64,
    pub gamma_phi: f64,
    pub energy_min: f64,
    pub energy_max: f64,
    pub energy_points: usize,
    pub packet_width: f64,
    #[serde(default = "dt_lattice")]
    pub dt: f64,
}

impl DbrtdSection {
    pub fn setup(&self) -> DbrtdSetup {
        DbrtdSetup {
            e0: self.e0,
            v: self.v,
            v_l: self.v_l,
            v_r: self.v_r,
            gamma_phi: self.gamma_phi,
            packet_width: self.packet_width,
            dt: self.dt,
            energies: energy_grid(self.energy_min, self.energy_max, self.energy_points),
        }
    }
}

/// Two-level system, one ensemble per dephasing rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TlsSection {
    #[serde(default = "unit")]
    pub v: f64,
    pub gamma_phi: Vec<f64>,
    pub t_max: f64,
    #[serde(default = "dt_small")]
    pub dt: f64,
    #[serde(default = "stride_10")]
    pub stride: u64,
    /// Also fit decay rates and write `rates.csv`.
    #[serde(default)]
    pub fit_rates: bool,
}

/// XY chain in the one-excitation sector, excitation on the first spin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinChainSection {
    #[serde(default = "five")]
    pub sites: usize,
    #[serde(default = "unit")]
    pub j: f64,
    pub gamma_phi: f64,
    pub t_max: f64,
    #[serde(default = "dt_small")]
    pub dt: f64,
    #[serde(default = "stride_5")]
    pub stride: u64,
    /// A return to the first spin counts as the echo above this density.
    #[serde(default = "echo_threshold")]
    pub echo_threshold: f64,
}

/// Loschmidt echo of the two-level system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoschmidtSection {
    #[serde(default = "unit")]
    pub v: f64,
    pub gamma_phi: f64,
    /// Largest total interaction time (forward plus backward).
    pub tau_max: f64,
    #[serde(default = "dt_small")]
    pub dt: f64,
    #[serde(default = "stride_5")]
    pub stride: u64,
}

/// `σ√N_s` of QD and QJ on the spin chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSection {
    #[serde(default = "five")]
    pub sites: usize,
    #[serde(default = "unit")]
    pub j: f64,
    pub gamma_phi: f64,
    pub t_max: f64,
    #[serde(default = "dt_small")]
    pub dt: f64,
    #[serde(default = "stride_5")]
    pub stride: u64,
    pub sizes: Vec<u64>,
    pub batch_realizations: u64,
    #[serde(default = "both_methods")]
    pub methods: Vec<UnravelingKind>,
}

/// Command-line overrides applied on top of a scenario file.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub unraveling: Option<UnravelingKind>,
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be > 0, got {x}")))
    }
}

fn non_negative(name: &str, x: f64) -> Result<()> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be >= 0, got {x}")))
    }
}

impl Scenario {
    /// Parses and validates a TOML scenario.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let missing: Vec<&str> = REQUIRED_KEYS.iter().copied().filter(|k| !table.contains_key(*k)).collect();
        if !missing.is_empty() {
            return Err(Error::Config(format!("missing required keys: {}", missing.join(", "))));
        }
        let scenario: Scenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    /// Reads a scenario file, or the scenario stored in a run manifest
    /// (`.json`).
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            let manifest: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            let inner = manifest
                .get("scenario")
                .ok_or_else(|| Error::Config(format!("{}: manifest has no \"scenario\"", path.display())))?;
            let scenario: Scenario = serde_json::from_value(inner.clone())
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            scenario.validate()?;
            return Ok(scenario);
        }
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// A bundled preset by name.
    pub fn preset(name: &str) -> Result<Self> {
        let (_, text) = PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| Error::arg(format!("unknown preset {name:?}; see `qdrift presets list`")))?;
        Self::from_toml_str(text)
    }

    pub fn apply(&mut self, o: Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(w) = o.workers {
            self.workers = w;
        }
        if let Some(u) = o.unraveling {
            self.unraveling = u;
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_realizations == 0 {
            return Err(Error::Config("n_realizations must be >= 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        let present = [
            ("dbrtd", self.dbrtd.is_some()),
            ("tls", self.tls.is_some()),
            ("spin_chain", self.spin_chain.is_some()),
            ("loschmidt", self.loschmidt.is_some()),
            ("convergence", self.convergence.is_some()),
        ];
        let wanted = self.kind.section();
        for (name, is_there) in present {
            if name == wanted && !is_there {
                return Err(Error::Config(format!("kind {wanted:?} needs a [{wanted}] section")));
            }
            if name != wanted && is_there {
                return Err(Error::Config(format!("section [{name}] does not belong to kind {wanted:?}")));
            }
        }
        match self.kind {
            ScenarioKind::Dbrtd => {
                let d = self.dbrtd.as_ref().expect("checked");
                positive("v", d.v)?;
                positive("v_l", d.v_l)?;
                positive("v_r", d.v_r)?;
                non_negative("gamma_phi", d.gamma_phi)?;
                positive("dt", d.dt)?;
                positive("packet_width", d.packet_width)?;
                if d.energy_points == 0 {
                    return Err(Error::Config("energy_points must be >= 1".into()));
                }
                if d.energy_points > 1 && !(d.energy_max > d.energy_min) {
                    return Err(Error::Config("energy_max must exceed energy_min".into()));
                }
                if d.energy_min.abs() >= 2.0 * d.v || d.energy_max.abs() >= 2.0 * d.v {
                    return Err(Error::Config("energy sweep must lie inside the band (-2V, 2V)".into()));
                }
            }
            ScenarioKind::TlsQdpt => {
                let t = self.tls.as_ref().expect("checked");
                positive("v", t.v)?;
                positive("t_max", t.t_max)?;
                positive("dt", t.dt)?;
                if t.gamma_phi.is_empty() {
                    return Err(Error::Config("gamma_phi list is empty".into()));
                }
                if t.gamma_phi.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Config("gamma_phi list must be strictly increasing".into()));
                }
                for &g in &t.gamma_phi {
                    non_negative("gamma_phi", g)?;
                }
                stride_ok(t.stride)?;
            }
            ScenarioKind::SpinChain => {
                let s = self.spin_chain.as_ref().expect("checked");
                chain_ok(s.sites, s.j)?;
                non_negative("gamma_phi", s.gamma_phi)?;
                positive("t_max", s.t_max)?;
                positive("dt", s.dt)?;
                stride_ok(s.stride)?;
            }
            ScenarioKind::Loschmidt => {
                let l = self.loschmidt.as_ref().expect("checked");
                positive("v", l.v)?;
                non_negative("gamma_phi", l.gamma_phi)?;
                positive("tau_max", l.tau_max)?;
                positive("dt", l.dt)?;
                stride_ok(l.stride)?;
            }
            ScenarioKind::Convergence => {
                let c = self.convergence.as_ref().expect("checked");
                chain_ok(c.sites, c.j)?;
                positive("gamma_phi", c.gamma_phi)?;
                positive("t_max", c.t_max)?;
                positive("dt", c.dt)?;
                stride_ok(c.stride)?;
                if c.sizes.is_empty() || c.sizes[0] == 0 || c.sizes.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Config("sizes must be non-empty, positive and strictly increasing".into()));
                }
                if c.methods.is_empty() {
                    return Err(Error::Config("methods must not be empty".into()));
                }
            }
        }
        Ok(())
    }

    /// Ensemble options (unraveling, distribution, size, seed, workers).
    pub fn run_options(&self) -> EnsembleRun {
        let mut run = EnsembleRun::new(self.unraveling, self.n_realizations, self.seed);
        run.distribution = self.distribution;
        run.schedule = Schedule {
            workers: self.workers,
            progress: true,
        };
        run
    }
}

fn stride_ok(stride: u64) -> Result<()> {
    if stride == 0 {
        return Err(Error::Config("stride must be >= 1".into()));
    }
    Ok(())
}

fn chain_ok(sites: usize, j: f64) -> Result<()> {
    if sites < 2 {
        return Err(Error::Config("a chain needs at least 2 sites".into()));
    }
    positive("j", j)
}

/// Energies of a sweep, evenly spaced and inclusive.
pub fn energy_grid(min: f64, max: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![min];
    }
    (0..points)
        .map(|k| min + (max - min) * k as f64 / (points - 1) as f64)
        .collect()
}

/// Bundled presets as `(name, toml)`.
pub const PRESETS: &[(&str, &str)] = &[
    ("fig1_gamma0.01", include_str!("../presets/fig1_gamma0.01.toml")),
    ("fig1_gamma0.3", include_str!("../presets/fig1_gamma0.3.toml")),
    ("fig2a", include_str!("../presets/fig2a.toml")),
    ("fig2b", include_str!("../presets/fig2b.toml")),
    ("fig2c", include_str!("../presets/fig2c.toml")),
    ("fig2d", include_str!("../presets/fig2d.toml")),
    ("fig3", include_str!("../presets/fig3.toml")),
    ("fig4a", include_str!("../presets/fig4a.toml")),
    ("fig4b", include_str!("../presets/fig4b.toml")),
    ("fig5", include_str!("../presets/fig5.toml")),
];

/// Formats with 17 significant digits.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Header plus rows, written as CSV.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_numbers(&mut self, row: &[f64]) {
        self.rows.push(row.iter().map(|&x| fmt_num(x)).collect());
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

/// What [`run_scenario`] produced.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    pub summary: serde_json::Value,
    pub elapsed_seconds: f64,
}

/// Runs `scenario`, writing CSVs and `manifest.json` into `out_dir`.
pub fn run_scenario(scenario: &Scenario, out_dir: &Path) -> Result<RunReport> {
    scenario.validate()?;
    fs::create_dir_all(out_dir)?;
    let start = Instant::now();
    let (tables, summary) = compute(scenario)?;
    let mut files = Vec::new();
    for (name, table) in &tables {
        let path = out_dir.join(name);
        fs::write(&path, table.to_csv())?;
        files.push(path);
    }
    let elapsed_seconds = start.elapsed().as_secs_f64();
    let manifest = json!({
        "qdrift_version": env!("CARGO_PKG_VERSION"),
        "scenario": scenario,
        "outputs": tables.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>(),
        "summary": summary,
        "elapsed_seconds": elapsed_seconds,
    });
    let manifest_path = out_dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Internal(e.to_string()))?;
    fs::write(&manifest_path, text + "\n")?;
    files.push(manifest_path);
    Ok(RunReport {
        files,
        summary,
        elapsed_seconds,
    })
}

type Outputs = (Vec<(String, Table)>, serde_json::Value);

/// In-memory results of a scenario: named tables and a JSON summary.
pub fn compute(s: &Scenario) -> Result<Outputs> {
    match s.kind {
        ScenarioKind::Dbrtd => compute_dbrtd(s),
        ScenarioKind::TlsQdpt => compute_tls(s),
        ScenarioKind::SpinChain => compute_spin_chain(s),
        ScenarioKind::Loschmidt => compute_loschmidt(s),
        ScenarioKind::Convergence => compute_convergence(s),
    }
}

fn compute_dbrtd(s: &Scenario) -> Result<Outputs> {
    let setup = s.dbrtd.as_ref().expect("validated").setup();
    let geo = setup.geometry()?;
    let points = experiments::dbrtd_sweep(&setup, &s.run_options())?;
    let mut results = Table::new(["energy", "T_sim", "T_stderr", "T_coherent_oracle", "T_total_oracle"]);
    let mut oracle_t = Table::new(["energy", "T_coherent", "T_total"]);
    let mut worst: f64 = 0.0;
    let mut cleared: f64 = 1.0;
    for p in &points {
        results.push_numbers(&[p.energy, p.mean, p.stderr, p.coherent_oracle, p.total_oracle]);
        oracle_t.push_numbers(&[p.energy, p.coherent_oracle, p.total_oracle]);
        worst = worst.max((p.mean - p.total_oracle).abs());
        cleared = cleared.min(p.cleared);
    }
    let summary = json!({
        "sites": 2 * geo.lead_len + 1,
        "packet_center": geo.packet_center,
        "max_abs_deviation": worst,
        "min_cleared_fraction": cleared,
    });
    Ok((
        vec![("results.csv".into(), results), ("oracle.csv".into(), oracle_t)],
        summary,
    ))
}

fn compute_tls(s: &Scenario) -> Result<Outputs> {
    let t = s.tls.as_ref().expect("validated");
    let mut run = s.run_options();
    run.stride = t.stride;
    let single = t.gamma_phi.len() == 1;
    let header = |cols: &[&str]| -> Vec<String> {
        let mut h: Vec<String> = if single { vec![] } else { vec!["gamma_phi".into()] };
        h.extend(cols.iter().map(|c| c.to_string()));
        h
    };
    let mut results = Table::new(header(&["time", "p00_mean", "p00_stderr", "p00_oracle"]));
    let mut oracle_t = Table::new(header(&["time", "p00_oracle"]));
    let mut rates = Table::new([
        "gamma_phi",
        "regime",
        "fit_rate_1",
        "fit_rate_2",
        "oracle_rate_1",
        "oracle_rate_2",
        "residual_rms",
    ]);
    let mut per_gamma = Vec::new();
    for &g in &t.gamma_phi {
        let curve = experiments::tls_survival(t.v, g, t.dt, t.t_max, &run)?;
        for k in 0..curve.times.len() {
            let mut row = if single { vec![] } else { vec![g] };
            row.extend([curve.times[k], curve.mean[k], curve.stderr[k], curve.oracle[k]]);
            results.push_numbers(&row);
            let mut orow = if single { vec![] } else { vec![g] };
            orow.extend([curve.times[k], curve.oracle[k]]);
            oracle_t.push_numbers(&orow);
        }
        let mut entry = json!({ "gamma_phi": g, "rms_deviation": curve.rms_deviation() });
        if t.fit_rates {
            let params = TlsDecayParams::new(t.v, g)?;
            let fit = curve.fit_rates(t.v)?;
            let (name, a, b, oa, ob) = match fit.rates {
                DecayRates::Underdamped { envelope, omega } => ("underdamped", envelope, omega, g, params.omega()),
                DecayRates::Overdamped { gamma1, gamma2 } => {
                    let (g1, g2) = params.rates();
                    ("overdamped", gamma1, gamma2, g1, g2)
                }
            };
            rates.rows.push(vec![
                fmt_num(g),
                name.into(),
                fmt_num(a),
                fmt_num(b),
                fmt_num(oa),
                fmt_num(ob),
                fmt_num(fit.residual_rms),
            ]);
            entry["fit"] = json!({ "regime": name, "rate_1": a, "rate_2": b });
        }
        per_gamma.push(entry);
    }
    let mut tables = vec![("results.csv".into(), results), ("oracle.csv".into(), oracle_t)];
    if t.fit_rates {
        tables.push(("rates.csv".into(), rates));
    }
    Ok((tables, json!({ "curves": per_gamma })))
}

fn compute_spin_chain(s: &Scenario) -> Result<Outputs> {
    let c = s.spin_chain.as_ref().expect("validated");
    let mut run = s.run_options();
    run.stride = c.stride;
    let problem = experiments::spin_chain_problem(c.sites, c.j, c.gamma_phi, c.dt, c.t_max)?;
    let (stats, coherent) = experiments::spin_chain_densities(&problem, &run)?;
    let m = c.sites;
    let mut header = vec!["time".to_string()];
    header.extend((1..=m).map(|i| format!("rho_{i}_mean")));
    header.extend((1..=m).map(|i| format!("rho_{i}_stderr")));
    let mut results = Table::new(header);
    let mut oheader = vec!["time".to_string()];
    oheader.extend((1..=m).map(|i| format!("rho_{i}_coherent")));
    let mut oracle_t = Table::new(oheader);
    for (k, &time) in stats.times().iter().enumerate() {
        let mut row = vec![time];
        row.extend_from_slice(stats.mean_row(k));
        row.extend_from_slice(stats.stderr_row(k));
        results.push_numbers(&row);
        let mut orow = vec![time];
        orow.extend_from_slice(&coherent[k]);
        oracle_t.push_numbers(&orow);
    }
    let first: Vec<f64> = coherent.iter().map(|r| r[0]).collect();
    let echo = experiments::first_echo(stats.times(), &first, c.echo_threshold);
    let mean_first = stats.mean_series(0);
    let attenuated = echo.and_then(|(t_me, _)| {
        experiments::max_in_window(stats.times(), &mean_first, t_me - 1.5, t_me + 1.5)
    });
    let summary = json!({
        "coherent_echo": echo.map(|(t, a)| json!({"time": t, "amplitude": a})),
        "mean_echo": attenuated.map(|(t, a)| json!({"time": t, "amplitude": a})),
        "sigma_metric": stats.sigma_metric(),
    });
    Ok((
        vec![("results.csv".into(), results), ("oracle.csv".into(), oracle_t)],
        summary,
    ))
}

fn compute_loschmidt(s: &Scenario) -> Result<Outputs> {
    let l = s.loschmidt.as_ref().expect("validated");
    let mut run = s.run_options();
    run.stride = l.stride;
    let echo = experiments::tls_loschmidt(l.v, l.gamma_phi, l.dt, l.tau_max, &run)?;
    // Survival on the same interaction-time grid.
    let mut srun = run.clone();
    srun.stride = 2 * l.stride;
    let n_max = experiments::steps_for(l.tau_max / 2.0, l.dt)?;
    let t_end = 2.0 * n_max as f64 * l.dt;
    let surv = experiments::tls_survival(l.v, l.gamma_phi, l.dt, t_end, &srun)?;
    let mut results = Table::new(["tau", "le_mean", "le_stderr", "p00_mean", "p00_stderr", "p00_oracle"]);
    let mut oracle_t = Table::new(["tau", "p00_oracle"]);
    for k in 0..echo.taus.len() {
        results.push_numbers(&[
            echo.taus[k],
            echo.mean[k],
            echo.stderr[k],
            surv.mean[k],
            surv.stderr[k],
            surv.oracle[k],
        ]);
        oracle_t.push_numbers(&[echo.taus[k], surv.oracle[k]]);
    }
    let params = TlsDecayParams::new(l.v, l.gamma_phi)?;
    let mut summary = json!({ "gamma_phi": l.gamma_phi });
    if params.regime() == oracle::DecayRegime::Overdamped {
        if let Ok(rate) = experiments::exponential_rate(&echo.taus, &echo.mean, 0.5, 0.4, 0.04) {
            summary["le_rate"] = json!(rate);
        }
        summary["gamma2"] = json!(params.rates().1);
    }
    Ok((
        vec![("results.csv".into(), results), ("oracle.csv".into(), oracle_t)],
        summary,
    ))
}

fn compute_convergence(s: &Scenario) -> Result<Outputs> {
    let c = s.convergence.as_ref().expect("validated");
    let setup = ConvergenceSetup {
        problem: experiments::spin_chain_problem(c.sites, c.j, c.gamma_phi, c.dt, c.t_max)?,
        stride: c.stride,
        sizes: c.sizes.clone(),
        batch_realizations: c.batch_realizations,
        reference_realizations: s.n_realizations,
        methods: c.methods.clone(),
    };
    let study = experiments::convergence_study(&setup, s.seed, s.run_options().schedule)?;
    let mut results = Table::new(["method", "n_s", "sigma", "sigma_sqrt_ns", "deviation", "flagged"]);
    let mut header = vec!["time".to_string()];
    for m in &study.methods {
        header.extend(c.sizes.iter().map(|n| format!("{}_n{n}", m.kind)));
    }
    let mut series = Table::new(header);
    for m in &study.methods {
        for r in &m.rows {
            results.rows.push(vec![
                m.kind.to_string(),
                r.n_s.to_string(),
                fmt_num(r.sigma),
                fmt_num(r.scaled),
                fmt_num(r.deviation),
                r.flagged.to_string(),
            ]);
        }
    }
    for (k, &t) in study.times.iter().enumerate() {
        let mut row = vec![t];
        for m in &study.methods {
            row.extend(m.scaled_series.iter().map(|s| s[k]));
        }
        series.push_numbers(&row);
    }
    let summary = json!({ "qj_over_qd": study.qj_qd_ratios() });
    Ok((
        vec![("results.csv".into(), results), ("sigma_vs_time.csv".into(), series)],
        summary,
    ))
}

/// Oracle-only tables for `qdrift oracle <kind>`.
pub const ORACLE_KINDS: &[(&str, &str)] = &[
    ("transmittance", "coherent and total transmittance of the resonant site, Γ_φ = 0.01 and 0.3"),
    ("survival", "two-level survival probability for Γ_φ = 0.1, 1 and 2.1"),
    ("rates", "two-level decay rates and frequency against Γ_φ"),
    ("ldos", "broadened local density of states, Γ₀ = 0.045"),
    ("chain", "coherent site densities of the five-spin chain"),
];

pub fn oracle_table(kind: &str) -> Result<Table> {
    match kind {
        "transmittance" => {
            let mut t = Table::new(["gamma_phi", "energy", "T_coherent", "T_total"]);
            for g in [0.01, 0.3] {
                let p = ResonantLevelParams {
                    e0: 0.0,
                    v_l: 0.15,
                    v_r: 0.15,
                    v: 1.0,
                    gamma_phi: g,
                };
                for e in energy_grid(-0.5, 0.5, 201) {
                    let tr = oracle::dp_transmittance(&p, e)?;
                    t.push_numbers(&[g, e, tr.coherent, tr.total]);
                }
            }
            Ok(t)
        }
        "survival" => {
            let mut t = Table::new(["gamma_phi", "time", "p00"]);
            for g in [0.1, 1.0, 2.1] {
                let p = TlsDecayParams::new(1.0, g)?;
                for k in 0..=300 {
                    let time = k as f64 * 0.1;
                    t.push_numbers(&[g, time, oracle::glbe_p00(time, &p)]);
                }
            }
            Ok(t)
        }
        "rates" => {
            let mut t = Table::new(["gamma_phi", "omega", "gamma_1", "gamma_2"]);
            for k in 0..=80 {
                let g = k as f64 * 0.05;
                let p = TlsDecayParams::new(1.0, g)?;
                let (g1, g2) = p.rates();
                t.push_numbers(&[g, p.omega(), g1, g2]);
            }
            Ok(t)
        }
        "ldos" => {
            let mut t = Table::new(["gamma_phi", "energy", "ldos"]);
            for g in [0.0, 0.01, 0.3] {
                for e in energy_grid(-0.5, 0.5, 201) {
                    t.push_numbers(&[g, e, oracle::broadened_ldos(e, 0.0, 0.045, g)?]);
                }
            }
            Ok(t)
        }
        "chain" => {
            let model = build_xy_chain(5, 1.0, &[0.0; 5])?;
            let times: Vec<f64> = (0..=400).map(|k| k as f64 * 0.05).collect();
            let rows = oracle::coherent_densities(&model, &StateVector::localized(5, 0)?, &times)?;
            let mut header = vec!["time".to_string()];
            header.extend((1..=5).map(|i| format!("rho_{i}")));
            let mut t = Table::new(header);
            for (time, r) in times.iter().zip(rows) {
                let mut row = vec![*time];
                row.extend(r);
                t.push_numbers(&row);
            }
            Ok(t)
        }
        other => {
            let mut msg = format!("unknown oracle {other:?}; available:");
            for (k, _) in ORACLE_KINDS {
                let _ = write!(msg, " {k}");
            }
            Err(Error::arg(msg))
        }
    }
}
