// Copyright 2026 The qdrift Developers
// SPDX-License-Identifier: Apache-2.0

//! Closed-form references with no sampling: Büttiker-probe transmittance,
//! broadened density of states, and the two-level survival probability on
//! either side of the transition.

use qdrift::oracle::{broadened_ldos, dp_transmittance, glbe_p00, ResonantLevelParams, TlsDecayParams};

fn main() -> qdrift::Result<()> {
    let p = ResonantLevelParams {
        e0: 0.0,
        v_l: 0.15,
        v_r: 0.15,
        v: 1.0,
        gamma_phi: 0.3,
    };
    println!("energy,T_coherent,T_total,ldos");
    for k in -10..=10 {
        let e = 0.05 * k as f64;
        let t = dp_transmittance(&p, e)?;
        let ldos = broadened_ldos(e, p.shifted_level(e), p.gamma0(e), p.gamma_phi)?;
        println!("{e:+.2},{:.5},{:.5},{:.5}", t.coherent, t.total, ldos);
    }
    println!();
    println!("t,p00_g0.5,p00_g2.0,p00_g3.0");
    let params: Vec<TlsDecayParams> = [0.5, 2.0, 3.0]
        .iter()
        .map(|&g| TlsDecayParams::new(1.0, g))
        .collect::<qdrift::Result<_>>()?;
    for k in 0..=20 {
        let t = 0.25 * k as f64;
        let v: Vec<String> = params.iter().map(|q| format!("{:.5}", glbe_p00(t, q))).collect();
        println!("{t:.2},{}", v.join(","));
    }
    Ok(())
}
