//! The on-disk cache: a cold run writes set lists, L_k values and exact
//! tables; a second run reads them back.
//!
//! `cargo run --release --example cache_usage -- [dir]`

use std::path::PathBuf;

use hypercube_cluster::cluster_enum::{compute_lk_cached, lists_for};
use hypercube_cluster::oracle_sampler::exact_table_cached;

fn main() -> hypercube_cluster::Result<()> {
    let root: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("hcx-cache-example"));
    // Within one process the second pass is served from memory for the lists
    // and L_4; the exact table is re-read from disk.
    for pass in ["first", "second"] {
        let (_, lists) = lists_for(4, Some(&root))?;
        let (_, lk) = compute_lk_cached(4, Some(&root))?;
        let (table, exact) = exact_table_cached(5, Some(&root))?;
        println!("{pass} pass: set lists {lists:?}, L_4 {lk:?}, exact table {exact:?} (i(Q_5) = {})", table.independent_sets());
    }
    for entry in walk(&root)? {
        println!("  {}", entry.strip_prefix(&root).unwrap_or(&entry).display());
    }
    Ok(())
}

fn walk(dir: &PathBuf) -> std::io::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir)? {
        let p = e?.path();
        if p.is_dir() {
            out.extend(walk(&p)?);
        } else {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}
