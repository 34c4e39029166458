//! At a concrete dimension every 2-linked subset of the even side is a
//! polymer, so `Σ_k L_k z^k` is the formal logarithm of
//! `Σ_{A ⊆ E} (λz)^{|A|} (1+λ)^{-|N(A)|}`, whose coefficients come straight
//! from the exact bipartite table.

use hypercube_cluster::cluster_enum::compute_lk_symbolic;
use hypercube_cluster::hypercube::Parity;
use hypercube_cluster::oracle_sampler::ExactTable;
use hypercube_cluster::poly::{q, qi, qpow, Q};
use num_traits::{One, Zero};

fn log_coefficients(table: &ExactTable, lambda: &Q, n: usize) -> Vec<Q> {
    let u = lambda + Q::one();
    let c: Vec<Q> = table
        .counts
        .iter()
        .enumerate()
        .map(|(a, row)| {
            row.iter().enumerate().fold(Q::zero(), |acc, (b, &cnt)| {
                acc + qpow(lambda, a as i64) * qpow(&u, -(b as i64)) * qi(cnt as i64)
            })
        })
        .collect();
    let get = |i: usize| c.get(i).cloned().unwrap_or_else(Q::zero);
    let mut ell = vec![Q::zero(); n + 1];
    for m in 1..=n {
        let mut acc = get(m) * qi(m as i64);
        for i in 1..m {
            acc -= &ell[i] * qi(i as i64) * get(m - i);
        }
        ell[m] = acc / qi(m as i64);
    }
    ell
}

#[test]
fn cluster_sums_are_log_coefficients() {
    let kmax = 5;
    let lks: Vec<_> = (1..=kmax).map(|k| compute_lk_symbolic(k).unwrap()).collect();
    for d in 2..=5 {
        let table = ExactTable::build(d, Parity::Even).unwrap();
        for lambda in [q(1, 2), qi(1), q(7, 3)] {
            let ell = log_coefficients(&table, &lambda, kmax);
            for k in 1..=kmax {
                assert_eq!(lks[k - 1].eval_exact(d, &lambda), ell[k], "d={d} k={k} λ={lambda}");
            }
        }
    }
}

#[test]
fn cluster_sums_are_log_coefficients_at_d6() {
    let table = hypercube_cluster::oracle_sampler::exact_table(6, None).unwrap().0;
    let lambda = q(1, 2);
    let ell = log_coefficients(&table, &lambda, 4);
    for k in 1..=4 {
        assert_eq!(compute_lk_symbolic(k).unwrap().eval_exact(6, &lambda), ell[k], "k={k}");
    }
}
