//! Brute-force cluster sums at a concrete dimension.
//!
//! Every 2-linked subset of the even side is listed explicitly (ESU
//! enumeration on `Q_d²[E]`), neighbourhoods are counted in `Q_d` directly,
//! incompatibility is decided by testing whether a union is 2-linked, and
//! Ursell values come from the edge-subset evaluator. No anchoring and no
//! active coordinates are involved, so this is an independent check on the
//! symbolic engine.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::poly::{Laurent, Q};
use crate::ursell::{connected_signed_sum_direct, SmallGraph};

pub const MAX_DIM: u32 = 8;
pub const MAX_K: usize = 5;

struct EvenSide {
    d: u32,
    verts: Vec<u64>,
    /// Distance-2 adjacency as bitsets over `verts` indices.
    adj2: Vec<u128>,
}

impl EvenSide {
    fn new(d: u32) -> EvenSide {
        let verts: Vec<u64> = (0..1u64 << d).filter(|v| v.count_ones() % 2 == 0).collect();
        let adj2 = verts
            .iter()
            .map(|&v| {
                verts
                    .iter()
                    .enumerate()
                    .filter(|&(_, &w)| (v ^ w).count_ones() == 2)
                    .fold(0u128, |acc, (i, _)| acc | 1 << i)
            })
            .collect();
        EvenSide { d, verts, adj2 }
    }

    fn neighborhood_size(&self, set: u128) -> u32 {
        let mut seen = [0u64; 4];
        let mut s = set;
        while s != 0 {
            let i = s.trailing_zeros() as usize;
            s &= s - 1;
            for c in 0..self.d {
                let w = self.verts[i] ^ (1 << c);
                seen[(w >> 6) as usize] |= 1 << (w & 63);
            }
        }
        seen.iter().map(|x| x.count_ones()).sum()
    }

    fn is_linked(&self, set: u128) -> bool {
        if set == 0 {
            return false;
        }
        let mut seen = set & set.wrapping_neg();
        let mut frontier = seen;
        while frontier != 0 {
            let i = frontier.trailing_zeros() as usize;
            frontier &= frontier - 1;
            let new = self.adj2[i] & set & !seen;
            seen |= new;
            frontier |= new;
        }
        seen == set
    }

    /// Every connected vertex set of size ≤ k, each exactly once.
    fn connected_sets(&self, k: usize) -> Vec<u128> {
        let mut out = Vec::new();
        for v in 0..self.verts.len() {
            let above: u128 = if v + 1 >= 128 { 0 } else { !0u128 << (v + 1) };
            let start = 1u128 << v;
            self.extend(start, self.adj2[v] & above, self.adj2[v] | start, above, k, &mut out);
        }
        out
    }

    fn extend(&self, sub: u128, mut ext: u128, closed: u128, above: u128, k: usize, out: &mut Vec<u128>) {
        out.push(sub);
        if sub.count_ones() as usize == k {
            return;
        }
        while ext != 0 {
            let w = ext.trailing_zeros() as usize;
            ext &= ext - 1;
            let exclusive = self.adj2[w] & !closed & above;
            self.extend(sub | 1 << w, ext | exclusive, closed | self.adj2[w], above, k, out);
        }
    }
}

#[derive(Clone, Copy)]
struct Polymer {
    set: u128,
    size: usize,
    n_size: u32,
}

/// `L_k / λ^k` at dimension `d`, as a Laurent polynomial in `u = 1 + λ`.
pub fn concrete_lk(d: u32, k: usize) -> Result<Laurent> {
    if d == 0 || d > MAX_DIM {
        return Err(Error::TooLarge {
            what: "dimension for concrete cluster enumeration",
            value: d as usize,
            max: MAX_DIM as usize,
        });
    }
    if k == 0 || k > MAX_K {
        return Err(Error::TooLarge {
            what: "cluster size for concrete enumeration",
            value: k,
            max: MAX_K,
        });
    }
    let side = EvenSide::new(d);
    let mut polymers: Vec<Polymer> = side
        .connected_sets(k)
        .into_iter()
        .map(|set| Polymer {
            set,
            size: set.count_ones() as usize,
            n_size: side.neighborhood_size(set),
        })
        .collect();
    polymers.sort_by_key(|p| (p.size, p.set));
    let fact_k: i128 = (1..=k as i128).product();
    let totals = (0..polymers.len())
        .into_par_iter()
        .fold(
            || (BTreeMap::<i64, i128>::new(), HashMap::<(usize, u128), i128>::new()),
            |(mut acc, mut memo), first| {
                let mut chosen = vec![first];
                walk(&side, &polymers, first, k - polymers[first].size, &mut chosen, fact_k, &mut acc, &mut memo);
                (acc, memo)
            },
        )
        .map(|(acc, _)| acc)
        .reduce(BTreeMap::new, |mut l, r| {
            for (e, c) in r {
                *l.entry(e).or_default() += c;
            }
            l
        });
    let mut out = Laurent::zero();
    for (e, c) in totals {
        out.add_term(e, Q::new(BigInt::from(c), BigInt::from(fact_k)));
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn walk(
    side: &EvenSide,
    polymers: &[Polymer],
    start: usize,
    remaining: usize,
    chosen: &mut Vec<usize>,
    fact_k: i128,
    acc: &mut BTreeMap<i64, i128>,
    memo: &mut HashMap<(usize, u128), i128>,
) {
    if remaining == 0 {
        let ell = chosen.len();
        let mut g = SmallGraph::empty(ell).expect("small");
        for i in 0..ell {
            for j in (i + 1)..ell {
                if side.is_linked(polymers[chosen[i]].set | polymers[chosen[j]].set) {
                    g.add_edge(i, j).expect("valid edge");
                }
            }
        }
        if !g.is_connected() {
            return;
        }
        let signed = *memo
            .entry((ell, g.key().expect("small")))
            .or_insert_with(|| connected_signed_sum_direct(&g).expect("small"));
        let mut mult_fact: i128 = 1;
        let mut run = 1;
        for i in 1..ell {
            if chosen[i] == chosen[i - 1] {
                run += 1;
                mult_fact *= run;
            } else {
                run = 1;
            }
        }
        let n_total: i64 = chosen.iter().map(|&i| polymers[i].n_size as i64).sum();
        *acc.entry(-n_total).or_default() += signed * (fact_k / mult_fact);
        return;
    }
    for p in start..polymers.len() {
        if polymers[p].size > remaining {
            break;
        }
        chosen.push(p);
        walk(side, polymers, p, remaining - polymers[p].size, chosen, fact_k, acc, memo);
        chosen.pop();
    }
}

/// Number of 2-linked subsets of the even side of each size up to `k`,
/// by explicit enumeration.
pub fn concrete_polymer_counts(d: u32, k: usize) -> Result<Vec<usize>> {
    if d == 0 || d > MAX_DIM {
        return Err(Error::TooLarge {
            what: "dimension for concrete cluster enumeration",
            value: d as usize,
            max: MAX_DIM as usize,
        });
    }
    let side = EvenSide::new(d);
    let mut counts = vec![0; k + 1];
    for s in side.connected_sets(k) {
        counts[s.count_ones() as usize] += 1;
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{q, qi};

    #[test]
    fn first_sum_is_polymer_count() {
        // 2^{d-1} singletons, each with weight u^{-d}.
        for d in 2..=6 {
            let l = concrete_lk(d, 1).unwrap();
            assert_eq!(l.terms().count(), 1);
            assert_eq!(l.coeff(-(d as i64)), qi(1 << (d - 1)));
        }
    }

    #[test]
    fn second_sum_at_lambda_one_matches_closed_form() {
        for d in 4..=7u32 {
            let value = concrete_lk(d, 2).unwrap().eval(&qi(2));
            let dd = d as i64;
            let expect = q(3 * dd * dd - 3 * dd - 2, 8) / Q::from_integer(BigInt::from(1u64 << d));
            assert_eq!(value, expect, "d={d}");
        }
    }

    #[test]
    fn polymer_counts() {
        for d in 3..=7u32 {
            let c = concrete_polymer_counts(d, 3).unwrap();
            let (p, dd) = (1usize << (d - 1), d as usize);
            assert_eq!(c[1], p);
            assert_eq!(c[2], p * dd * (dd - 1) / 4);
            let clique = p * dd * (dd - 1) * (dd - 2) / 6;
            let path = p * dd * (dd - 1) * (dd - 2) * (dd - 3) / 8;
            assert_eq!(c[3], clique + path, "d={d}");
        }
    }

    #[test]
    fn agrees_with_symbolic_engine_on_small_cases() {
        let lists = crate::cluster_enum::CanonicalSetList::build_canonical(3).unwrap();
        for k in 1..=3 {
            let symbolic = crate::cluster_enum::LkValue::from_lists(&lists, k).unwrap();
            for d in 3..=6 {
                assert_eq!(symbolic.laurent_at(d), concrete_lk(d, k).unwrap(), "k={k} d={d}");
            }
        }
    }
}
