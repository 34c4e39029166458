//! Minority-side defect census at d = 5: exact law, exact sampler and a
//! Glauber chain, compared by chi-square and total variation.
//!
//! `cargo run --release --example sampler_fit -- [samples] [seeds]`

use std::collections::BTreeMap;
use std::time::Instant;

use hypercube_cluster::defects::minority_census;
use hypercube_cluster::oracle_sampler::{
    census_fit, exact_defect_distribution, exact_sample, histogram, occupied_vertices, total_variation,
    ChainInit, GlauberChain,
};
use hypercube_cluster::poly::{q_to_f64, qi};

fn main() -> hypercube_cluster::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(100_000);
    let seeds: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(10);
    let (d, t_max) = (5, 3);

    let start = Instant::now();
    let dist = exact_defect_distribution(d, t_max)?;
    let law = dist.probabilities_f64(&qi(1));
    println!("exact law: {} census vectors over {} independent sets ({:.2?})", law.len(), dist.total_sets(), start.elapsed());

    for seed in 0..seeds {
        let start = Instant::now();
        let census: Vec<_> = exact_sample(d, 1.0, n, seed)?
            .iter()
            .map(|&occ| minority_census(d, &occupied_vertices(occ), t_max))
            .collect::<Result<_, _>>()?;
        let fit = census_fit(&census, &law)?;
        println!(
            "seed {seed}: chi2 = {:.2}, df = {}, p = {:.4} ({:.2?})",
            fit.statistic, fit.df, fit.p_value, start.elapsed()
        );
    }

    let singles: BTreeMap<u64, f64> = dist
        .marginal(&qi(1), |c| c.count_of_size(1))
        .into_iter()
        .map(|(k, p)| (k, q_to_f64(&p)))
        .collect();
    let start = Instant::now();
    let mut chain = GlauberChain::new(d, 1.0, 7, ChainInit::AllOddOccupied)?;
    let burn = chain.default_burn_in();
    let snaps = chain.census_run(burn, n, 2, t_max)?;
    let hist = histogram(snaps.iter().map(|c| c.count_of_size(1)));
    println!(
        "glauber: TV on size-1 counts = {:.4} ({:.2?})",
        total_variation(&hist, &singles),
        start.elapsed()
    );
    Ok(())
}
