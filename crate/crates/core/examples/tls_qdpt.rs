// Copyright 2026 The qdrift Developers
// SPDX-License-Identifier: Apache-2.0

//! Survival probability of a dephased two-level system on both sides of
//! the transition at `gamma_phi = 2V`, with fitted decay rates.
//!
//! ```text
//! cargo run --release --example tls_qdpt -- [n_realizations]
//! ```

use qdrift::ensemble::EnsembleRun;
use qdrift::experiments::tls_survival;
use qdrift::oracle::{DecayRates, TlsDecayParams};
use qdrift::UnravelingKind;

fn main() -> qdrift::Result<()> {
    let n: u64 = std::env::args().nth(1).map_or(20_000, |s| s.parse().expect("n_realizations"));
    let mut run = EnsembleRun::new(UnravelingKind::Qd, n, 2026);
    run.stride = 5;
    println!("gamma_phi,regime,rate_1,rate_2,exact_1,exact_2,rms_vs_oracle");
    for g in [0.5, 1.0, 1.5, 2.1, 2.5, 3.0] {
        let curve = tls_survival(1.0, g, 0.01, 5.0, &run)?;
        let fit = curve.fit_rates(1.0)?;
        let exact = TlsDecayParams::new(1.0, g)?;
        let (a, b) = pair(&fit.rates);
        let (ea, eb) = match fit.rates {
            DecayRates::Underdamped { .. } => (g, exact.omega()),
            DecayRates::Overdamped { .. } => exact.rates(),
        };
        let regime = match fit.rates {
            DecayRates::Underdamped { .. } => "underdamped",
            DecayRates::Overdamped { .. } => "overdamped",
        };
        println!("{g},{regime},{a:.4},{b:.4},{ea:.4},{eb:.4},{:.2e}", curve.rms_deviation());
    }
    Ok(())
}

fn pair(r: &DecayRates) -> (f64, f64) {
    match *r {
        DecayRates::Underdamped { envelope, omega } => (envelope, omega),
        DecayRates::Overdamped { gamma1, gamma2 } => (gamma1, gamma2),
    }
}
