// Copyright 2026 The qdrift Developers
// SPDX-License-Identifier: Apache-2.0

//! Statistical error of the drift and jump unravelings on the spin chain.
//! Both errors fall as `1/sqrt(N_s)`; the jump prefactor is larger.
//!
//! ```text
//! cargo run --release --example qd_vs_qj_convergence -- [reference] [batch]
//! ```

use qdrift::ensemble::Schedule;
use qdrift::experiments::{convergence_study, spin_chain_problem, ConvergenceSetup};
use qdrift::UnravelingKind;

fn main() -> qdrift::Result<()> {
    let mut args = std::env::args().skip(1);
    let reference: u64 = args.next().map_or(20_000, |s| s.parse().expect("reference"));
    let batch: u64 = args.next().map_or(2000, |s| s.parse().expect("batch"));
    let setup = ConvergenceSetup {
        problem: spin_chain_problem(5, 1.0, 1.0 / 3.0, 0.01, 3.0)?,
        stride: 5,
        sizes: vec![10, 100],
        batch_realizations: batch,
        reference_realizations: reference,
        methods: vec![UnravelingKind::Qd, UnravelingKind::Qj],
    };
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let study = convergence_study(&setup, 2026, Schedule { workers, progress: false })?;
    println!("method,n_s,sigma,sigma_sqrt_ns,flagged");
    for m in &study.methods {
        for r in &m.rows {
            println!("{},{},{:.3e},{:.4},{}", m.kind, r.n_s, r.sigma, r.scaled, r.flagged);
        }
    }
    if let Some(ratios) = study.qj_qd_ratios() {
        println!("# sigma_QJ / sigma_QD: {ratios:.3?}");
    }
    Ok(())
}
