//! Canonical 2-linked set lists, cluster enumeration and the exact cluster
//! sums `L_k` as functions of a symbolic dimension.
//!
//! Every set here contains the all-zeros vertex. A set whose active
//! coordinates are exactly `{0, .., a-1}` stands for `binomial(d, a)` sets
//! in `Q_d`, and a cluster anchored at 0 stands for `2^{d-1}` translates,
//! each counted once per vertex of its union.

pub(crate) mod cache;
pub mod concrete;

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypercube::LinkedSet;
use crate::poly::{q_to_f64, qi, qpow, BiPoly, Laurent, Poly, Q};
use crate::ursell::{connected_signed_sum_fast, SmallGraph};

pub use cache::{cache_root, lists_for, load_or_build, set_list_path, CacheStatus, ListKind, CACHE_ENV};

pub const MAX_K: usize = 8;
/// Lists larger than this are refused instead of exhausting memory.
pub const MAX_LIST_ENTRIES: usize = 40_000_000;

/// Members of a canonical set packed 16 bits apiece in ascending order.
/// The first member is always 0, so the set size is carried separately.
pub type SetKey = u128;

pub fn pack(members: &[u64]) -> SetKey {
    debug_assert!(members.len() <= MAX_K);
    members
        .iter()
        .enumerate()
        .fold(0, |acc, (i, &m)| acc | (m as u128) << (16 * i))
}

pub fn unpack(key: SetKey, m: usize) -> [u64; MAX_K] {
    let mut out = [0u64; MAX_K];
    for (i, slot) in out.iter_mut().enumerate().take(m) {
        *slot = (key >> (16 * i)) as u64 & 0xffff;
    }
    out
}

fn linked_mask(members: &[u64], mask: u32) -> bool {
    if mask == 0 {
        return false;
    }
    let first = mask.trailing_zeros();
    let mut seen = 1u32 << first;
    let mut frontier = seen;
    while frontier != 0 {
        let i = frontier.trailing_zeros() as usize;
        frontier &= frontier - 1;
        let mut rest = mask & !seen;
        while rest != 0 {
            let j = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            if (members[i] ^ members[j]).count_ones() <= 2 {
                seen |= 1 << j;
                frontier |= 1 << j;
            }
        }
    }
    seen == mask
}

/// Complete, duplicate-free lists of 2-linked sets containing 0 with active
/// coordinates inside `{0, .., budget-1}`, for every size up to `k_max`.
/// A canonical-only list keeps just the sets whose active coordinates form
/// an initial segment `[a]`.
#[derive(Clone, Debug)]
pub struct CanonicalSetList {
    k_max: usize,
    budget: u32,
    canonical_only: bool,
    by_size: Vec<Vec<SetKey>>,
    exact: Vec<Vec<Vec<u32>>>,
}

impl CanonicalSetList {
    /// Lists with active coordinates inside `[2 k_max]`.
    pub fn build(k_max: usize) -> Result<CanonicalSetList> {
        check_k(k_max)?;
        CanonicalSetList::build_with_budget(k_max, 2 * k_max as u32)
    }

    /// Only the sets with active coordinates exactly `[a]`, for every `a`.
    /// A union of `j` vertices has at most `2(j-1)` active coordinates, so
    /// these cover every cluster of size up to `k_max`.
    pub fn build_canonical(k_max: usize) -> Result<CanonicalSetList> {
        check_k(k_max)?;
        let budget = 2 * (k_max as u32 - 1);
        let mut by_size = vec![vec![pack(&[0])]];
        for m in 1..k_max {
            let next = grow(&by_size[m - 1], m, |key| canonical_children(key, m, budget))?;
            by_size.push(next);
        }
        Ok(CanonicalSetList::from_parts(k_max, budget, true, by_size))
    }

    pub fn build_with_budget(k_max: usize, budget: u32) -> Result<CanonicalSetList> {
        check_k(k_max)?;
        if budget > 16 {
            return Err(Error::TooLarge {
                what: "coordinate budget",
                value: budget as usize,
                max: 16,
            });
        }
        let mut by_size = vec![vec![pack(&[0])]];
        for m in 1..k_max {
            let next = grow(&by_size[m - 1], m, |key| children(key, m, budget))?;
            by_size.push(next);
        }
        Ok(CanonicalSetList::from_parts(k_max, budget, false, by_size))
    }

    pub(crate) fn from_parts(k_max: usize, budget: u32, canonical_only: bool, by_size: Vec<Vec<SetKey>>) -> Self {
        let exact = by_size
            .iter()
            .enumerate()
            .map(|(i, keys)| {
                let m = i + 1;
                let mut idx = vec![Vec::new(); budget as usize + 1];
                for (n, &key) in keys.iter().enumerate() {
                    let members = unpack(key, m);
                    let mask = members[..m].iter().fold(0, |acc, &x| acc | x);
                    if mask & (mask + 1) == 0 {
                        idx[mask.count_ones() as usize].push(n as u32);
                    }
                }
                idx
            })
            .collect();
        CanonicalSetList {
            k_max,
            budget,
            canonical_only,
            by_size,
            exact,
        }
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn coord_budget(&self) -> u32 {
        self.budget
    }

    pub fn is_canonical_only(&self) -> bool {
        self.canonical_only
    }

    pub fn keys(&self, m: usize) -> &[SetKey] {
        &self.by_size[m - 1]
    }

    pub(crate) fn all_keys(&self) -> &[Vec<SetKey>] {
        &self.by_size
    }

    pub fn len(&self, m: usize) -> usize {
        self.by_size[m - 1].len()
    }

    /// Number of size-`m` sets whose active coordinates are exactly `[a]`.
    pub fn len_exact(&self, m: usize, a: u32) -> usize {
        self.exact[m - 1].get(a as usize).map_or(0, Vec::len)
    }

    pub fn members(&self, m: usize, index: usize) -> Vec<u64> {
        unpack(self.by_size[m - 1][index], m)[..m].to_vec()
    }

    pub fn sets(&self, m: usize) -> impl Iterator<Item = LinkedSet> + '_ {
        let dim = self.budget.max(1);
        self.by_size[m - 1]
            .iter()
            .map(move |&k| LinkedSet::from_sorted_unchecked(dim, unpack(k, m)[..m].to_vec()))
    }

    pub fn sets_exact(&self, m: usize, a: u32) -> impl Iterator<Item = LinkedSet> + '_ {
        let dim = self.budget.max(1);
        let keys = &self.by_size[m - 1];
        self.exact[m - 1]
            .get(a as usize)
            .into_iter()
            .flatten()
            .map(move |&i| LinkedSet::from_sorted_unchecked(dim, unpack(keys[i as usize], m)[..m].to_vec()))
    }

    pub(crate) fn exact_indices(&self, m: usize, a: u32) -> &[u32] {
        self.exact[m - 1].get(a as usize).map_or(&[], Vec::as_slice)
    }
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::OutOfRange("cluster size must be at least 1".into()));
    }
    if k > MAX_K {
        return Err(Error::TooLarge {
            what: "cluster size k",
            value: k,
            max: MAX_K,
        });
    }
    Ok(())
}

/// One growth step by reverse search: a set of size `m + 1` is produced only
/// from the parent obtained by deleting its largest removable non-zero member
/// (compacted to an initial segment of coordinates for canonical-only lists).
fn grow<F>(prev: &[SetKey], m: usize, children: F) -> Result<Vec<SetKey>>
where
    F: Fn(SetKey) -> Vec<SetKey> + Sync,
{
    let mut out: Vec<SetKey> = Vec::new();
    for chunk in prev.chunks(1 << 14) {
        let part: Vec<SetKey> = chunk.par_iter().flat_map_iter(|&key| children(key)).collect();
        out.extend(part);
        if out.len() > MAX_LIST_ENTRIES {
            return Err(Error::Capability(format!(
                "list of 2-linked sets of size {} exceeds {MAX_LIST_ENTRIES} entries",
                m + 1
            )));
        }
    }
    out.par_sort_unstable();
    debug_assert!(out.windows(2).all(|w| w[0] != w[1]));
    Ok(out)
}

/// Insert `w` into the sorted `y` and keep the result only if `w` is its
/// largest removable non-zero member.
fn adopt(y: &[u64], w: u64) -> Option<SetKey> {
    let m = y.len();
    let pos = y.partition_point(|&x| x < w);
    let mut x = [0u64; MAX_K];
    x[..pos].copy_from_slice(&y[..pos]);
    x[pos] = w;
    x[pos + 1..=m].copy_from_slice(&y[pos..]);
    let full = (1u32 << (m + 1)) - 1;
    let larger_removable = ((pos + 1)..=m).any(|z| linked_mask(&x, full & !(1 << z)));
    (!larger_removable).then(|| pack(&x[..=m]))
}

/// Children of a canonical set with active `[a]`: spread its coordinates
/// order-preservingly into `[a']` for `a' ≤ a + 2`, then add one vertex
/// that covers the skipped coordinates.
fn canonical_children(key: SetKey, m: usize, max_active: u32) -> Vec<SetKey> {
    let y0 = unpack(key, m);
    let y0 = &y0[..m];
    let a = y0.iter().fold(0, |acc, &x| acc | x).count_ones();
    let mut out = Vec::new();
    for a2 in a..=(a + 2).min(max_active) {
        for skipped in 0u64..(1 << a2) {
            if skipped.count_ones() != a2 - a {
                continue;
            }
            let targets: Vec<u32> = (0..a2).filter(|&c| skipped >> c & 1 == 0).collect();
            let mut y: Vec<u64> = y0
                .iter()
                .map(|&v| (0..a).filter(|&c| v >> c & 1 == 1).fold(0, |acc, c| acc | 1 << targets[c as usize]))
                .collect();
            y.sort_unstable();
            for (vi, &v) in y.iter().enumerate() {
                for i in 0..a2 {
                    for j in (i + 1)..a2 {
                        let flip = (1u64 << i) | (1u64 << j);
                        if skipped & !flip != 0 {
                            continue;
                        }
                        let w = v ^ flip;
                        if y.contains(&w) || y[..vi].iter().any(|&x| (x ^ w).count_ones() <= 2) {
                            continue;
                        }
                        out.extend(adopt(&y, w));
                    }
                }
            }
        }
    }
    out
}

fn children(key: SetKey, m: usize, budget: u32) -> Vec<SetKey> {
    let y = unpack(key, m);
    let y = &y[..m];
    let mut out = Vec::new();
    for (vi, &v) in y.iter().enumerate() {
        for i in 0..budget {
            for j in (i + 1)..budget {
                let w = v ^ (1 << i) ^ (1 << j);
                if y.contains(&w) || y[..vi].iter().any(|&x| (x ^ w).count_ones() <= 2) {
                    continue;
                }
                out.extend(adopt(y, w));
            }
        }
    }
    out
}

/// A 2-linked subset of a cluster's union, as a mask over the union's members.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PolymerInfo {
    pub mask: u8,
    pub size: u8,
    /// Neighbours inside the active subcube of the union.
    pub n_local: u32,
    /// Members of the union within distance 2 of the polymer.
    reach: u8,
}

impl PolymerInfo {
    pub fn members(&self, x: &[u64]) -> Vec<u64> {
        (0..x.len()).filter(|&i| self.mask >> i & 1 == 1).map(|i| x[i]).collect()
    }
}

/// One unordered cluster (a multiset of polymers) anchored at 0, handed to
/// a [`ClusterAccumulator`].
pub struct ClusterVisit<'a> {
    /// Union of the polymers, sorted, containing 0.
    pub x: &'a [u64],
    /// Active coordinates of the union are exactly `[a]`.
    pub a: u32,
    pub k: usize,
    /// Distinct polymers with multiplicities.
    pub polymers: &'a [(PolymerInfo, u32)],
    /// Incompatibility graph of one ordering of the multiset.
    pub graph: &'a SmallGraph,
    /// `Σ (-1)^{|A|}` over connected spanning subgraphs; `φ = signed_sum / ℓ!`.
    pub signed_sum: i128,
    /// Product of multiplicity factorials; the multiset has `ℓ!/mult_factorial` orderings.
    pub mult_factorial: u64,
    /// Each polymer weight is `λ^{|S|} u^{-|N(S)|}`; summed over the cluster,
    /// `Σ|N(S_i)| = d k - exponent`.
    pub exponent: i64,
}

impl ClusterVisit<'_> {
    pub fn ell(&self) -> usize {
        self.graph.n()
    }

    pub fn j(&self) -> usize {
        self.x.len()
    }

    /// `(1/j) φ(H) · #orderings` times `k!`, an integer.
    pub fn scaled_weight(&self) -> i128 {
        self.signed_sum * (factorial(self.k) / self.mult_factorial as u128) as i128
    }

    pub fn orderings(&self) -> u64 {
        (factorial(self.ell()) / self.mult_factorial as u128) as u64
    }
}

fn factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}

pub trait ClusterAccumulator: Send + Default {
    fn visit(&mut self, v: &ClusterVisit<'_>);
    fn merge(&mut self, other: Self);
}

/// Walk every cluster of total size `k` anchored at 0, once per multiset.
pub fn accumulate_clusters<A: ClusterAccumulator>(lists: &CanonicalSetList, k: usize) -> Result<A> {
    check_k(k)?;
    if lists.k_max() < k || lists.coord_budget() < 2 * (k as u32 - 1) {
        return Err(Error::OutOfRange(format!(
            "set lists (k_max {}, budget {}) too small for clusters of size {k}",
            lists.k_max(),
            lists.coord_budget()
        )));
    }
    let mut work: Vec<(usize, u32, u32)> = Vec::new();
    for j in 1..=k {
        for a in 0..=2 * (j as u32 - 1) {
            work.extend(lists.exact_indices(j, a).iter().map(|&i| (j, a, i)));
        }
    }
    let acc = work
        .par_iter()
        .fold(
            || (A::default(), HashMap::new()),
            |(mut acc, mut memo), &(j, a, i)| {
                let x = lists.members(j, i as usize);
                walk_union(&x, a, k, &mut memo, &mut acc);
                (acc, memo)
            },
        )
        .map(|(acc, _)| acc)
        .reduce(A::default, |mut l, r| {
            l.merge(r);
            l
        });
    Ok(acc)
}

type Memo = HashMap<(usize, u128), i128>;

fn walk_union<A: ClusterAccumulator>(x: &[u64], a: u32, k: usize, memo: &mut Memo, acc: &mut A) {
    let j = x.len();
    let full: u32 = (1 << j) - 1;
    let mut close = [0u8; MAX_K];
    for i in 0..j {
        for l in 0..j {
            if (x[i] ^ x[l]).count_ones() <= 2 {
                close[i] |= 1 << l;
            }
        }
    }
    let mut polymers = Vec::new();
    for mask in 1..=full {
        let size = mask.count_ones() as usize;
        if size > k || !linked_mask(x, mask) {
            continue;
        }
        let mut nbrs: Vec<u64> = Vec::with_capacity(size * a as usize);
        let mut reach = 0u8;
        for i in 0..j {
            if mask >> i & 1 == 1 {
                reach |= close[i];
                nbrs.extend((0..a).map(|c| x[i] ^ (1 << c)));
            }
        }
        nbrs.sort_unstable();
        nbrs.dedup();
        polymers.push(PolymerInfo {
            mask: mask as u8,
            size: size as u8,
            n_local: nbrs.len() as u32,
            reach,
        });
    }
    let mut chosen: Vec<(PolymerInfo, u32)> = Vec::new();
    let mut walker = Walker {
        x,
        a,
        k,
        full: full as u8,
        polymers: &polymers,
        memo,
        acc,
    };
    walker.dfs(0, k, 0, &mut chosen);
}

struct Walker<'a, A> {
    x: &'a [u64],
    a: u32,
    k: usize,
    full: u8,
    polymers: &'a [PolymerInfo],
    memo: &'a mut Memo,
    acc: &'a mut A,
}

impl<A: ClusterAccumulator> Walker<'_, A> {
    fn dfs(&mut self, start: usize, remaining: usize, union: u8, chosen: &mut Vec<(PolymerInfo, u32)>) {
        if remaining == 0 {
            if union == self.full {
                self.emit(chosen);
            }
            return;
        }
        if ((self.full & !union).count_ones() as usize) > remaining {
            return;
        }
        for p in start..self.polymers.len() {
            let poly = self.polymers[p];
            let size = poly.size as usize;
            if size > remaining {
                continue;
            }
            let repeat = chosen.last().is_some_and(|(q, _)| q.mask == poly.mask);
            if repeat {
                chosen.last_mut().unwrap().1 += 1;
            } else {
                chosen.push((poly, 1));
            }
            self.dfs(p, remaining - size, union | poly.mask, chosen);
            if repeat {
                chosen.last_mut().unwrap().1 -= 1;
            } else {
                chosen.pop();
            }
        }
    }

    fn emit(&mut self, chosen: &[(PolymerInfo, u32)]) {
        let flat: Vec<PolymerInfo> = chosen
            .iter()
            .flat_map(|&(p, m)| std::iter::repeat_n(p, m as usize))
            .collect();
        let ell = flat.len();
        let mut adj = vec![0u32; ell];
        for i in 0..ell {
            for l in (i + 1)..ell {
                if flat[i].reach & flat[l].mask != 0 {
                    adj[i] |= 1 << l;
                    adj[l] |= 1 << i;
                }
            }
        }
        let graph = SmallGraph::from_adjacency(adj).expect("symmetric adjacency");
        if !graph.is_connected() {
            return;
        }
        let key = (ell, graph.key().expect("at most 8 polymers"));
        let signed_sum = *self
            .memo
            .entry(key)
            .or_insert_with(|| connected_signed_sum_fast(&graph).expect("small graph"));
        let mult_factorial = chosen.iter().map(|&(_, m)| factorial(m as usize) as u64).product();
        let n_local: i64 = chosen.iter().map(|&(p, m)| p.n_local as i64 * m as i64).sum();
        let visit = ClusterVisit {
            x: self.x,
            a: self.a,
            k: self.k,
            polymers: chosen,
            graph: &graph,
            signed_sum,
            mult_factorial,
            exponent: self.a as i64 * self.k as i64 - n_local,
        };
        self.acc.visit(&visit);
    }
}

/// An ordered cluster: a tuple of polymers with connected incompatibility graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cluster {
    pub polymers: Vec<LinkedSet>,
    pub incompat: SmallGraph,
}

impl Cluster {
    pub fn size(&self) -> usize {
        self.polymers.iter().map(LinkedSet::len).sum()
    }

    pub fn ursell(&self) -> Q {
        crate::ursell::ursell_fast(&self.incompat).expect("cluster graphs are small")
    }
}

/// All ordered clusters of total size `k` whose union has `j` vertices,
/// contains 0 and has active coordinates exactly `[a]`.
pub fn enumerate_clusters(j: usize, k: usize, a: u32, lists: &CanonicalSetList) -> Result<Vec<Cluster>> {
    check_k(k)?;
    if j == 0 || j > k || a > 2 * k as u32 {
        return Err(Error::OutOfRange(format!("need 1 ≤ j ≤ k and a ≤ 2k, got j={j}, k={k}, a={a}")));
    }
    if lists.k_max() < k || lists.coord_budget() < a {
        return Err(Error::OutOfRange("set lists too small for the requested clusters".into()));
    }
    #[derive(Default)]
    struct Collect(Vec<(Vec<u64>, Vec<(PolymerInfo, u32)>)>);
    impl ClusterAccumulator for Collect {
        fn visit(&mut self, v: &ClusterVisit<'_>) {
            self.0.push((v.x.to_vec(), v.polymers.to_vec()));
        }
        fn merge(&mut self, mut other: Self) {
            self.0.append(&mut other.0);
        }
    }
    let dim = lists.coord_budget().max(1);
    let mut acc = Collect::default();
    let mut memo = HashMap::new();
    for &i in lists.exact_indices(j, a) {
        let x = lists.members(j, i as usize);
        walk_union(&x, a, k, &mut memo, &mut acc);
    }
    let mut out = Vec::new();
    for (x, chosen) in acc.0 {
        let flat: Vec<Vec<u64>> = chosen
            .iter()
            .flat_map(|(p, m)| std::iter::repeat_n(p.members(&x), *m as usize))
            .collect();
        for order in distinct_permutations(flat.len(), &flat) {
            let polymers: Vec<LinkedSet> = order
                .iter()
                .map(|&i| LinkedSet::from_sorted_unchecked(dim, flat[i].clone()))
                .collect();
            let mut g = SmallGraph::empty(polymers.len())?;
            for s in 0..polymers.len() {
                for t in (s + 1)..polymers.len() {
                    let linked = polymers[s]
                        .members()
                        .iter()
                        .any(|&p| polymers[t].members().iter().any(|&q| (p ^ q).count_ones() <= 2));
                    if linked {
                        g.add_edge(s, t)?;
                    }
                }
            }
            out.push(Cluster {
                polymers,
                incompat: g,
            });
        }
    }
    Ok(out)
}

/// Index orders of `items` giving each distinct sequence once.
fn distinct_permutations<T: Eq>(n: usize, items: &[T]) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut used = vec![false; n];
    let mut cur = Vec::with_capacity(n);
    fn rec<T: Eq>(items: &[T], used: &mut [bool], cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == items.len() {
            out.push(cur.clone());
            return;
        }
        for i in 0..items.len() {
            if used[i] {
                continue;
            }
            // Among equal items only the first unused one may be placed.
            if (0..i).any(|p| !used[p] && items[p] == items[i]) {
                continue;
            }
            used[i] = true;
            cur.push(i);
            rec(items, used, cur, out);
            cur.pop();
            used[i] = false;
        }
    }
    rec(items, &mut used, &mut cur, &mut out);
    out
}

/// Exact cluster sum `L_k` with symbolic dimension:
/// `L_k = 2^{d-1} λ^k u^{-dk} Σ_a binomial(d, a) P_a(u)` with `u = 1 + λ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LkValue {
    k: usize,
    #[serde(with = "terms_serde")]
    terms: BTreeMap<u32, Laurent>,
}

#[derive(Default)]
struct LkAccumulator(BTreeMap<(u32, usize, i64), i128>);

impl ClusterAccumulator for LkAccumulator {
    fn visit(&mut self, v: &ClusterVisit<'_>) {
        *self.0.entry((v.a, v.j(), v.exponent)).or_default() += v.scaled_weight();
    }

    fn merge(&mut self, other: Self) {
        for (key, val) in other.0 {
            *self.0.entry(key).or_default() += val;
        }
    }
}

impl LkValue {
    pub fn from_lists(lists: &CanonicalSetList, k: usize) -> Result<LkValue> {
        let acc: LkAccumulator = accumulate_clusters(lists, k)?;
        let kf = BigInt::from(factorial(k));
        let mut terms: BTreeMap<u32, Laurent> = BTreeMap::new();
        for ((a, j, e), num) in acc.0 {
            if num == 0 {
                continue;
            }
            let c = Q::new(BigInt::from(num), &kf * BigInt::from(j));
            terms.entry(a).or_insert_with(Laurent::zero).add_term(e, c);
        }
        terms.retain(|_, l| !l.is_zero());
        Ok(LkValue { k, terms })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `P_a(u)` keyed by active-coordinate count `a`.
    pub fn terms(&self) -> &BTreeMap<u32, Laurent> {
        &self.terms
    }

    /// `R_k(d, u) = (1/2) Σ_a binomial(d, a) P_a(u)`, so that
    /// `L_k = 2^d λ^k u^{-dk} R_k(d, u)`.
    pub fn reduced(&self) -> BiPoly {
        let half = crate::poly::q(1, 2);
        let mut out = BiPoly::zero();
        for (&a, p) in &self.terms {
            out = &out + &BiPoly::from_product(&Poly::binomial(a), &p.scale(&half));
        }
        out
    }

    /// At `λ = 1`, `L_k = 2^{-(k-1)d} · p(d)`; returns `p`.
    pub fn at_lambda_one(&self) -> Poly {
        self.reduced().at_u(&qi(2))
    }

    /// `L_k / λ^k` at concrete `d` as a Laurent polynomial in `u`.
    pub fn laurent_at(&self, d: u32) -> Laurent {
        let mut out = Laurent::zero();
        let prefactor = qpow(&qi(2), d as i64 - 1);
        for (&a, p) in &self.terms {
            let c = &Poly::binomial(a).eval(&qi(d as i64)) * &prefactor;
            for (e, coef) in p.terms() {
                out.add_term(e - (d as i64) * self.k as i64, coef * &c);
            }
        }
        out
    }

    pub fn eval_exact(&self, d: u32, lambda: &Q) -> Q {
        let u = lambda + Q::one();
        self.laurent_at(d).eval(&u) * qpow(lambda, self.k as i64)
    }

    /// Float evaluation in the log domain for the prefactor.
    pub fn eval_f64(&self, d: u32, lambda: f64) -> Result<f64> {
        let u = 1.0 + lambda;
        let df = d as f64;
        let mut sum = 0.0;
        for (&a, p) in &self.terms {
            let binom = Poly::binomial(a).eval_f64(df);
            sum += binom * p.eval_f64(u);
        }
        let log_pref = (df - 1.0) * std::f64::consts::LN_2 + self.k as f64 * lambda.ln()
            - df * self.k as f64 * u.ln();
        let value = sum * log_pref.exp();
        if !value.is_finite() || (value == 0.0 && sum != 0.0) {
            return Err(Error::Overflow(format!("L_{} at d = {d}", self.k)));
        }
        Ok(value)
    }
}

mod terms_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    type Wire = BTreeMap<u32, Vec<(i64, String)>>;

    pub fn serialize<S: Serializer>(terms: &BTreeMap<u32, Laurent>, s: S) -> std::result::Result<S::Ok, S::Error> {
        let wire: Wire = terms
            .iter()
            .map(|(&a, l)| (a, l.terms().map(|(e, c)| (e, c.to_string())).collect()))
            .collect();
        wire.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<BTreeMap<u32, Laurent>, D::Error> {
        let wire = Wire::deserialize(d)?;
        let mut out = BTreeMap::new();
        for (a, terms) in wire {
            let mut l = Laurent::zero();
            for (e, c) in terms {
                let c: Q = c.parse().map_err(serde::de::Error::custom)?;
                l.add_term(e, c);
            }
            out.insert(a, l);
        }
        Ok(out)
    }
}

/// Exact or float result of evaluating `L_k`.
#[derive(Clone, Debug, PartialEq)]
pub enum LkEval {
    Exact(Q),
    Approx(f64),
}

impl LkEval {
    pub fn to_f64(&self) -> f64 {
        match self {
            LkEval::Exact(q) => q_to_f64(q),
            LkEval::Approx(x) => *x,
        }
    }
}

pub fn evaluate_lk(v: &LkValue, params: &crate::hypercube::ModelParams) -> Result<LkEval> {
    let d = params.d.concrete()?;
    match &params.lambda {
        crate::hypercube::Fugacity::Exact(lam) => Ok(LkEval::Exact(v.eval_exact(d, lam))),
        crate::hypercube::Fugacity::Approx(x) => Ok(LkEval::Approx(v.eval_f64(d, *x)?)),
    }
}

fn lk_memory() -> &'static Mutex<HashMap<usize, Arc<LkValue>>> {
    static CELL: OnceLock<Mutex<HashMap<usize, Arc<LkValue>>>> = OnceLock::new();
    CELL.get_or_init(Default::default)
}

/// `L_k` with symbolic `d`, memoised for the life of the process and, when a
/// cache root is configured, on disk.
pub fn compute_lk_symbolic(k: usize) -> Result<Arc<LkValue>> {
    compute_lk_cached(k, cache_root(None).as_deref()).map(|(v, _)| v)
}

pub fn compute_lk_cached(k: usize, root: Option<&std::path::Path>) -> Result<(Arc<LkValue>, CacheStatus)> {
    check_k(k)?;
    if let Some(v) = lk_memory().lock().unwrap().get(&k) {
        return Ok((v.clone(), CacheStatus::Memory));
    }
    let (value, status) = cache::load_or_compute_lk(root, k)?;
    let value = Arc::new(value);
    lk_memory().lock().unwrap().insert(k, value.clone());
    Ok((value, status))
}

/// `L_1 + .. + L_k` exactly, for checks that need the whole partial sum.
pub fn lk_partial_sum(values: &[Arc<LkValue>], d: u32, lambda: &Q) -> Q {
    values.iter().fold(Q::zero(), |acc, v| acc + v.eval_exact(d, lambda))
}

/// Ordered-cluster census of size `k`, one row per combination of polymer
/// sizes, Ursell value and total neighbourhood offset.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterClass {
    /// Polymer sizes, largest first.
    pub sizes: Vec<usize>,
    pub ursell: Q,
    /// `Σ |N(S_i)| = d k + offset`.
    pub offset: i64,
    /// Number of ordered clusters is `2^{d-1} · count(d)`.
    pub count: Poly,
}

pub fn cluster_census(lists: &CanonicalSetList, k: usize) -> Result<Vec<ClusterClass>> {
    type Key = (Vec<usize>, i128, usize, i64);
    #[derive(Default)]
    struct Census(BTreeMap<Key, BTreeMap<u32, Q>>);
    impl ClusterAccumulator for Census {
        fn visit(&mut self, v: &ClusterVisit<'_>) {
            let mut sizes: Vec<usize> = v
                .polymers
                .iter()
                .flat_map(|&(p, m)| std::iter::repeat_n(p.size as usize, m as usize))
                .collect();
            sizes.sort_unstable_by(|a, b| b.cmp(a));
            let key = (sizes, v.signed_sum, v.ell(), -v.exponent);
            let c = Q::new(BigInt::from(v.orderings()), BigInt::from(v.j()));
            *self.0.entry(key).or_default().entry(v.a).or_insert_with(Q::zero) += c;
        }
        fn merge(&mut self, other: Self) {
            for (key, m) in other.0 {
                let slot = self.0.entry(key).or_default();
                for (a, c) in m {
                    *slot.entry(a).or_insert_with(Q::zero) += c;
                }
            }
        }
    }
    let census: Census = accumulate_clusters(lists, k)?;
    Ok(census
        .0
        .into_iter()
        .map(|((sizes, signed, ell, offset), by_a)| {
            let count = by_a
                .iter()
                .fold(Poly::zero(), |acc, (&a, c)| &acc + &Poly::binomial(a).scale(c));
            ClusterClass {
                sizes,
                ursell: Q::new(BigInt::from(signed), BigInt::from(factorial(ell))),
                offset,
                count,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::q;

    #[test]
    fn small_lists() {
        let lists = CanonicalSetList::build(2).unwrap();
        assert_eq!(lists.len(1), 1);
        assert_eq!(lists.members(1, 0), vec![0]);
        assert_eq!(lists.len(2), 6);
        assert_eq!(lists.len_exact(2, 2), 1);
        assert_eq!(lists.len_exact(1, 0), 1);
    }

    #[test]
    fn canonical_lists_match_filtered_full_lists() {
        let small = CanonicalSetList::build_canonical(5).unwrap();
        let big = CanonicalSetList::build_with_budget(5, 8).unwrap();
        for m in 1..=5 {
            assert_eq!(
                small.len(m),
                (0..=8).map(|a| big.len_exact(m, a)).sum::<usize>(),
                "m={m}"
            );
            for a in 0..=8 {
                let x: Vec<Vec<u64>> = small.sets_exact(m, a).map(|s| s.members().to_vec()).collect();
                let y: Vec<Vec<u64>> = big.sets_exact(m, a).map(|s| s.members().to_vec()).collect();
                assert_eq!(x, y, "m={m} a={a}");
            }
        }
    }

    #[test]
    fn lists_are_complete_against_brute_force() {
        // All 2-linked even sets containing 0 in Q_6 of size ≤ 4, by direct subset search.
        let budget = 6;
        let lists = CanonicalSetList::build_with_budget(4, budget).unwrap();
        let even: Vec<u64> = (1..64u64).filter(|v| v.count_ones() % 2 == 0).collect();
        let mut counts = [0usize; 5];
        counts[1] = 1;
        for a in 0..even.len() {
            counts[2] += crate::hypercube::is_two_linked(&[0, even[a]]) as usize;
            for b in (a + 1)..even.len() {
                counts[3] += crate::hypercube::is_two_linked(&[0, even[a], even[b]]) as usize;
                for c in (b + 1)..even.len() {
                    counts[4] += crate::hypercube::is_two_linked(&[0, even[a], even[b], even[c]]) as usize;
                }
            }
        }
        for m in 1..=4 {
            assert_eq!(lists.len(m), counts[m], "size {m}");
        }
    }

    #[test]
    fn growth_bound_holds() {
        let k = 4;
        let lists = CanonicalSetList::build(k).unwrap();
        let pairs = (2 * k) * (2 * k - 1) / 2;
        for m in 1..k {
            assert!(lists.len(m + 1) <= m * pairs * lists.len(m));
        }
    }

    #[test]
    fn first_cluster_sums() {
        let lists = CanonicalSetList::build_canonical(3).unwrap();
        let l1 = LkValue::from_lists(&lists, 1).unwrap();
        assert_eq!(l1.at_lambda_one(), Poly::constant(q(1, 2)));
        let l2 = LkValue::from_lists(&lists, 2).unwrap();
        assert_eq!(l2.at_lambda_one(), Poly::from_ints(&[-2, -3, 3]).scale(&q(1, 8)));
        let l3 = LkValue::from_lists(&lists, 3).unwrap();
        assert_eq!(
            l3.at_lambda_one(),
            Poly::from_ints(&[8, 50, -3, -74, 27]).scale(&q(1, 48))
        );
    }

    #[test]
    fn single_and_pair_clusters() {
        let lists = CanonicalSetList::build_canonical(2).unwrap();
        let c = enumerate_clusters(1, 1, 0, &lists).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].ursell(), qi(1));
        let c = enumerate_clusters(1, 2, 0, &lists).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].polymers.len(), 2);
        assert_eq!(c[0].ursell(), q(-1, 2));
    }

    #[test]
    fn exact_and_float_evaluation_agree() {
        let lists = CanonicalSetList::build_canonical(3).unwrap();
        for k in 1..=3 {
            let v = LkValue::from_lists(&lists, k).unwrap();
            for d in [4u32, 7, 12] {
                for (num, den) in [(1, 2), (1, 1), (3, 2)] {
                    let exact = q_to_f64(&v.eval_exact(d, &q(num, den)));
                    let float = v.eval_f64(d, num as f64 / den as f64).unwrap();
                    assert!((exact - float).abs() <= 1e-12 * exact.abs().max(1e-300), "k={k} d={d}");
                }
            }
        }
        assert_eq!(
            LkValue::from_lists(&lists, 2).unwrap().eval_exact(6, &qi(1)),
            q(11, 64)
        );
    }
}
