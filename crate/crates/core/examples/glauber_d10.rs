//! Glauber dynamics at d = 10, started in the odd phase, against the
//! Poisson law for isolated minority-side vertices.
//!
//! `cargo run --release --example glauber_d10 -- [snapshots] [seed]`

use hypercube_cluster::defects::defect_stats;
use hypercube_cluster::oracle_sampler::{histogram, poisson_fit, ChainInit, GlauberChain};

fn main() -> hypercube_cluster::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(20_000);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let (d, lambda) = (10, 1.0);

    let mut chain = GlauberChain::new(d, lambda, seed, ChainInit::AllOddOccupied)?;
    let burn = chain.default_burn_in();
    let snaps = chain.census_run(burn, n, 2, 3)?;
    let singles: Vec<u64> = snaps.iter().map(|c| c.count_of_size(1)).collect();
    let mean = singles.iter().sum::<u64>() as f64 / n as f64;
    let m1 = defect_stats(1)?[0].m_t_f64(d, lambda);
    println!("d = {d}, λ = {lambda}: mean isolated defects {mean:.4}, first-order mean {m1:.4}");

    let var = singles.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    println!("variance / mean = {:.3}", var / mean);

    // The Poisson law is a large-d limit; at d = 10 a big sample can reject it.
    let hist = histogram(singles);
    let fit = poisson_fit(&hist, mean)?;
    println!("Poisson(sample mean) fit: chi2 = {:.2}, df = {}, p = {:.4}", fit.statistic, fit.df, fit.p_value);
    for (k, c) in hist.iter().enumerate() {
        println!("  {k}: {c}");
    }
    Ok(())
}
