//! Cross-check of the symbolic L_k against a direct enumeration of polymers
//! inside a concrete Q_d.
//!
//! `cargo run --release --example concrete_check`

use std::time::Instant;

use hypercube_cluster::cluster_enum::{compute_lk_symbolic, concrete::concrete_lk};

fn main() -> hypercube_cluster::Result<()> {
    for k in 1..=4 {
        let symbolic = compute_lk_symbolic(k)?;
        for d in 3..=7 {
            let start = Instant::now();
            let direct = concrete_lk(d, k)?;
            let verdict = if direct == symbolic.laurent_at(d) { "agree" } else { "DIFFER" };
            println!("k = {k}, d = {d}: {verdict} ({:.2?})", start.elapsed());
        }
    }
    Ok(())
}
