//! Cluster sums L_k with the dimension left symbolic.
//!
//! `cargo run --release --example lk_symbolic -- [k_max]`

use std::time::Instant;

use hypercube_cluster::cluster_enum::{compute_lk_symbolic, CanonicalSetList};

fn main() -> hypercube_cluster::Result<()> {
    let k_max: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let start = Instant::now();
    let lists = CanonicalSetList::build_canonical(k_max)?;
    for m in 1..=k_max {
        println!("canonical 2-linked sets of size {m}: {}", lists.len(m));
    }
    println!("lists built in {:.2?}", start.elapsed());

    for k in 1..=k_max {
        let start = Instant::now();
        let lk = compute_lk_symbolic(k)?;
        let shift = match k {
            1 => String::new(),
            2 => " * 2^-d".into(),
            _ => format!(" * 2^-{}d", k - 1),
        };
        println!("L_{k}(λ = 1) = {}{shift}   ({:.2?})", lk.at_lambda_one().pretty("d"), start.elapsed());
        for (a, p) in lk.terms() {
            let terms: Vec<String> = p.terms().map(|(e, c)| format!("({c}) u^{e}")).collect();
            println!("    P_{a}(u) = {}", terms.join(" + "));
        }
    }
    Ok(())
}
