//! Exact log Z against the truncated cluster expansion at small d.
//!
//! `cargo run --release --example truncation_convergence -- [d_max]`

use std::time::Instant;

use hypercube_cluster::cluster_enum::compute_lk_symbolic;
use hypercube_cluster::expansion::truncation_residual;
use hypercube_cluster::oracle_sampler::exact_table;
use hypercube_cluster::poly::{q, qi};

fn main() -> hypercube_cluster::Result<()> {
    let d_max: u32 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(6);
    let lks: Vec<_> = (1..=5).map(compute_lk_symbolic).collect::<Result<_, _>>()?;
    for d in 1..=d_max {
        let start = Instant::now();
        let (table, status) = exact_table(d, None)?;
        println!("d = {d}: i(Q_d) = {} ({:?}, {:.2?})", table.independent_sets(), status, start.elapsed());
        if d < 3 {
            continue;
        }
        for lambda in [q(1, 2), qi(1), qi(2)] {
            let z = table.z(&lambda);
            let residuals: Vec<String> = (0..=5)
                .map(|k| {
                    let used: Vec<_> = lks[..k].iter().map(|v| v.as_ref()).collect();
                    format!("R_{k} = {:.3e}", truncation_residual(&z, d, &lambda, &used))
                })
                .collect();
            println!("  lambda = {lambda}: {}", residuals.join(", "));
        }
    }
    Ok(())
}
