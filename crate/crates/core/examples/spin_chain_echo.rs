// Copyright 2026 The qdrift Developers
// SPDX-License-Identifier: Apache-2.0

//! Mesoscopic echo: the excitation injected on the first spin of a
//! five-spin XY chain returns near `t = 6.75/J`. Dephasing with coherence
//! time `3/J` lowers the returning peak.
//!
//! ```text
//! cargo run --release --example spin_chain_echo -- [n_realizations]
//! ```

use qdrift::ensemble::EnsembleRun;
use qdrift::experiments::{local_maxima, spin_chain_densities, spin_chain_problem};
use qdrift::UnravelingKind;

fn main() -> qdrift::Result<()> {
    let n: u64 = std::env::args().nth(1).map_or(1000, |s| s.parse().expect("n_realizations"));
    let problem = spin_chain_problem(5, 1.0, 1.0 / 3.0, 0.01, 15.0)?;
    let mut run = EnsembleRun::new(UnravelingKind::Qd, n, 2026);
    run.stride = 5;
    let (stats, coherent) = spin_chain_densities(&problem, &run)?;
    let mean = stats.mean_series(0);
    let coherent0: Vec<f64> = coherent.iter().map(|row| row[0]).collect();
    println!("time,rho_1_mean,rho_1_stderr,rho_1_coherent");
    let se = stats.stderr_series(0);
    for (k, t) in stats.times().iter().enumerate().step_by(10) {
        println!("{t:.2},{:.4},{:.4},{:.4}", mean[k], se[k], coherent0[k]);
    }
    let times = stats.times();
    let first = |v: &[f64]| local_maxima(times, v).into_iter().find(|&(t, _)| t > 3.0);
    if let (Some(c), Some(m)) = (first(&coherent0), first(&mean)) {
        println!("# coherent echo {:.3} at t = {:.2}; dephased echo {:.3} at t = {:.2}", c.1, c.0, m.1, m.0);
    }
    Ok(())
}
