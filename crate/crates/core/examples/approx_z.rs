//! Truncated estimates of log Z at large d, the closed form through second
//! order, and the series for log i(Q_d).
//!
//! `cargo run --release --example approx_z -- [d]`

use hypercube_cluster::expansion::{approx_log_z, closed_form_l1_l2, closed_form_z, iqd_series, params};
use hypercube_cluster::hypercube::Fugacity;
use hypercube_cluster::poly::{q, q_to_f64, qi};

fn main() -> hypercube_cluster::Result<()> {
    let d: u32 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(30);

    for lambda in [q(1, 2), qi(1), qi(3)] {
        let p = params(d, Fugacity::Exact(lambda.clone()))?;
        println!("d = {d}, λ = {lambda}");
        for k in 0..=4 {
            let est = approx_log_z(&p, k)?;
            println!(
                "  k = {k}: log Z ≈ {:.12} (correction {:.3e}, error form {:.3e}, valid = {})",
                est.log_z, est.log_correction, est.error_bound.value, est.valid
            );
        }
        let (l1, l2) = closed_form_l1_l2(d, &lambda);
        println!("  closed form: L_1 = {:.6e}, L_2 = {:.6e}", q_to_f64(&l1), q_to_f64(&l2));
        // t = 3 keeps L_1 and L_2, matching k = 2 above.
        let closed = closed_form_z(&p, 3)?;
        println!("  closed-form estimate through L_2: log Z ≈ {:.12}", closed.log_z);
    }

    let series = iqd_series(4)?;
    println!("i(Q_d) ≈ {}", series.pretty());
    for d in [10, 20, 40] {
        println!("  d = {d}: log i(Q_d) ≈ {:.6e}", series.log_value(d));
    }
    Ok(())
}
