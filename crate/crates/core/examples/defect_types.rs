//! Defect types: catalogue, counts n_T, limiting Poisson means and the census
//! of a hand-made configuration.
//!
//! `cargo run --release --example defect_types -- [d]`

use hypercube_cluster::defects::{
    defect_stats, enumerate_defect_types, inverse_aut_sum, minority_census, poisson_mean, threshold_lambda_t,
    tree_catalog,
};

fn main() -> hypercube_cluster::Result<()> {
    let d: u32 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);

    for t in 1..=5 {
        let types = enumerate_defect_types(t)?;
        let trees = tree_catalog(t)?.len();
        println!("t = {t}: {} types, {trees} trees, Σ 1/|Aut| over trees = {}", types.len(), inverse_aut_sum(t)?);
    }

    println!("\nd = {d}, λ = 1");
    for t in 1..=3 {
        for s in defect_stats(t)? {
            println!(
                "  {}  edges {:?}: n_T / 2^(d-1) = {}, m_T = {:.4e}",
                s.ty.id(),
                s.ty.key.edges(),
                s.count.pretty("d"),
                s.m_t_f64(d, 1.0)
            );
        }
    }

    println!("\nthresholds at d = {d}:");
    for t in 1..=4 {
        let lt = threshold_lambda_t(d, t, 0.0);
        println!("  λ_{t} = {lt:.4}, limiting mean at s = 0: {:.4}", poisson_mean(t as usize, 0.0)?);
    }

    let occupied = [0b1, 0b10, 0b111, 0b1011, 0b110000];
    let census = minority_census(6, &occupied, 3)?;
    println!("\ncensus of {occupied:?} in Q_6:");
    census.write_csv(std::io::stdout())?;
    Ok(())
}
