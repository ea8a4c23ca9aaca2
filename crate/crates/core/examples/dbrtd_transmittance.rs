// Copyright 2026 The qdrift Developers
// SPDX-License-Identifier: Apache-2.0

//! Wave-packet transmittance through a dephased resonant site, compared with
//! the Büttiker-probe formula.
//!
//! ```text
//! cargo run --release --example dbrtd_transmittance -- [gamma_phi] [n_s] [points]
//! ```

use qdrift::ensemble::EnsembleRun;
use qdrift::experiments::{dbrtd_sweep, DbrtdSetup};
use qdrift::UnravelingKind;

fn main() -> qdrift::Result<()> {
    let mut args = std::env::args().skip(1);
    let gamma_phi: f64 = args.next().map_or(0.3, |s| s.parse().expect("gamma_phi"));
    let n_s: u64 = args.next().map_or(10, |s| s.parse().expect("n_s"));
    let points: usize = args.next().map_or(11, |s| s.parse().expect("points"));

    // Narrow resonances need a wider packet (smaller energy spread).
    let packet_width = if gamma_phi < 0.05 { 100.0 } else { 15.0 };
    let energies = (0..points)
        .map(|k| -0.5 + k as f64 / (points.max(2) - 1) as f64)
        .collect();
    let setup = DbrtdSetup {
        e0: 0.0,
        v: 1.0,
        v_l: 0.15,
        v_r: 0.15,
        gamma_phi,
        packet_width,
        dt: 0.025,
        energies,
    };
    let geo = setup.geometry()?;
    println!(
        "# {} sites, packet at {} (width {packet_width}), gamma_phi = {gamma_phi}, N_s = {n_s}",
        2 * geo.lead_len + 1,
        geo.packet_center
    );
    let run = EnsembleRun::new(UnravelingKind::Qd, n_s, 2026);
    println!("energy,T_sim,T_stderr,T_total_oracle");
    for p in dbrtd_sweep(&setup, &run)? {
        println!("{:+.3},{:.4},{:.4},{:.4}", p.energy, p.mean, p.stderr, p.total_oracle);
    }
    Ok(())
}
