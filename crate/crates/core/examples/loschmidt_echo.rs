// Copyright 2026 The qdrift Developers
// SPDX-License-Identifier: Apache-2.0

//! Loschmidt echo of the two-level system against its survival
//! probability. Pass a dephasing rate in units of `V`; below `2V` the
//! echo shows plateaus at multiples of `pi`, above it a single
//! exponential.
//!
//! ```text
//! cargo run --release --example loschmidt_echo -- [gamma_phi] [n_realizations]
//! ```

use qdrift::ensemble::EnsembleRun;
use qdrift::experiments::{tls_loschmidt, tls_survival};
use qdrift::UnravelingKind;

fn main() -> qdrift::Result<()> {
    let mut args = std::env::args().skip(1);
    let g: f64 = args.next().map_or(0.1, |s| s.parse().expect("gamma_phi"));
    let n: u64 = args.next().map_or(5000, |s| s.parse().expect("n_realizations"));
    let mut run = EnsembleRun::new(UnravelingKind::Qd, n, 2026);
    run.stride = 5;
    let echo = tls_loschmidt(1.0, g, 0.01, 8.0, &run)?;
    let mut srun = run.clone();
    srun.stride = 10;
    let surv = tls_survival(1.0, g, 0.01, 8.0, &srun)?;
    println!("tau,echo,echo_stderr,survival,survival_oracle");
    for (k, tau) in echo.taus.iter().enumerate().step_by(2) {
        let j = k / 2;
        println!(
            "{tau:.2},{:.4},{:.4},{:.4},{:.4}",
            echo.mean[k], echo.stderr[k], surv.mean[j], surv.oracle[j]
        );
    }
    Ok(())
}
