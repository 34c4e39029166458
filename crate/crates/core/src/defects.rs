//! Defect types: isomorphism classes of `Q_d²[S]` for small 2-linked `S`,
//! their symbolic counts and weights, thresholds, Poisson means, truncated
//! cumulants and the component census of an independent set.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Write;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::cluster_enum::{accumulate_clusters, lists_for, cache_root, ClusterAccumulator, ClusterVisit};
use crate::error::{Error, Result};
use crate::hypercube::{local_neighborhood_size, two_linked_components, Fugacity, LinkedSet, ModelParams, Parity};
use crate::poly::{q, qi, qpow, q_to_f64, Poly, Q};

pub const MAX_CANON: usize = 8;
pub const MAX_TYPE_SIZE: usize = 6;
pub const MAX_COUNT_SIZE: usize = 5;
pub const MAX_CUMULANT_CLUSTER: usize = 6;
pub const MAX_CENSUS_DIM: u32 = 20;

/// Upper-triangle adjacency code of a labelled graph; bit `pair(i, j)` is
/// set when `i ~ j`.
fn pair(i: usize, j: usize) -> usize {
    debug_assert!(i < j);
    j * (j - 1) / 2 + i
}

fn code_of(adj: &[u8]) -> u32 {
    let mut code = 0;
    for j in 0..adj.len() {
        for i in 0..j {
            if adj[i] >> j & 1 == 1 {
                code |= 1 << pair(i, j);
            }
        }
    }
    code
}

/// Largest code over all relabellings, and the number of relabellings that
/// reproduce the graph itself.
pub fn canonical_code(adj: &[u8]) -> (u32, u64) {
    let t = adj.len();
    assert!(t <= MAX_CANON, "canonical forms are limited to {MAX_CANON} vertices");
    let own = code_of(adj);
    let edges: Vec<(usize, usize)> = (0..t)
        .flat_map(|j| (0..j).map(move |i| (i, j)))
        .filter(|&(i, j)| adj[i] >> j & 1 == 1)
        .collect();
    let mut perm: Vec<usize> = (0..t).collect();
    let mut best = 0;
    let mut aut = 0;
    let mut visit = |p: &[usize]| {
        let mut c = 0u32;
        for &(i, j) in &edges {
            let (a, b) = (p[i].min(p[j]), p[i].max(p[j]));
            c |= 1 << pair(a, b);
        }
        best = best.max(c);
        if c == own {
            aut += 1;
        }
    };
    // Heap's algorithm.
    let mut stack = vec![0usize; t];
    visit(&perm);
    let mut i = 1;
    while i < t {
        if stack[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(stack[i], i);
            }
            visit(&perm);
            stack[i] += 1;
            i = 1;
        } else {
            stack[i] = 0;
            i += 1;
        }
    }
    (best, aut)
}

/// Distance-2 graph `Q_d²[S]` as adjacency bitmasks.
pub fn square_graph(members: &[u64]) -> Vec<u8> {
    let t = members.len();
    let mut adj = vec![0u8; t];
    for i in 0..t {
        for j in 0..t {
            if i != j && (members[i] ^ members[j]).count_ones() <= 2 {
                adj[i] |= 1 << j;
            }
        }
    }
    adj
}

/// Isomorphism class of a small connected graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct TypeKey {
    pub t: u8,
    pub code: u32,
}

impl TypeKey {
    pub fn of_graph(adj: &[u8]) -> TypeKey {
        TypeKey {
            t: adj.len() as u8,
            code: canonical_code(adj).0,
        }
    }

    /// Stable identifier: size plus a digest of the canonical code.
    pub fn id(&self) -> String {
        let digest = Sha256::digest(format!("{}:{}", self.t, self.code).as_bytes());
        format!("t{}-{:02x}{:02x}{:02x}{:02x}", self.t, digest[0], digest[1], digest[2], digest[3])
    }

    pub fn adjacency(&self) -> Vec<u8> {
        let t = self.t as usize;
        let mut adj = vec![0u8; t];
        for j in 0..t {
            for i in 0..j {
                if self.code >> pair(i, j) & 1 == 1 {
                    adj[i] |= 1 << j;
                    adj[j] |= 1 << i;
                }
            }
        }
        adj
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let t = self.t as usize;
        (0..t)
            .flat_map(|j| (0..j).map(move |i| (i, j)))
            .filter(|&(i, j)| self.code >> pair(i, j) & 1 == 1)
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.code.count_ones() as usize
    }
}

impl fmt::Display for TypeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

thread_local! {
    static TYPE_MEMO: RefCell<HashMap<(u8, u32), u32>> = RefCell::new(HashMap::new());
}

/// Type of a 2-linked set, memoised per thread on the labelled code.
pub fn type_of(members: &[u64]) -> TypeKey {
    let adj = square_graph(members);
    let raw = (adj.len() as u8, code_of(&adj));
    let code = TYPE_MEMO.with(|m| *m.borrow_mut().entry(raw).or_insert_with(|| canonical_code(&adj).0));
    TypeKey { t: raw.0, code }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DefectType {
    pub key: TypeKey,
    pub is_tree: bool,
    pub aut_count: u64,
    /// A set containing 0 realising the type.
    pub witness: Vec<u64>,
}

impl DefectType {
    pub fn t(&self) -> usize {
        self.key.t as usize
    }

    pub fn id(&self) -> String {
        self.key.id()
    }

    /// `c_T = 2^{-t} / |Aut(T)|`.
    pub fn c_t(&self) -> Q {
        q(1, (1i64 << self.t()) * self.aut_count as i64)
    }
}

fn check_t(t: usize, max: usize) -> Result<()> {
    if t == 0 || t > max {
        return Err(Error::TooLarge {
            what: "defect type size",
            value: t,
            max,
        });
    }
    Ok(())
}

/// Exact symbolic data for one type: `n_T = 2^{d-1} · count(d)` and the
/// weight classes `|N(S)| = d t + β`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DefectStats {
    pub ty: DefectType,
    /// `n_T / 2^{d-1}`, a polynomial in `d`.
    #[serde(serialize_with = "ser_poly")]
    pub count: Poly,
    /// `β → n_{T,β} / 2^{d-1}` where those sets have weight `λ^t u^{-(dt+β)}`.
    #[serde(serialize_with = "ser_classes")]
    pub classes: BTreeMap<i64, Poly>,
}

fn ser_poly<S: serde::Serializer>(p: &Poly, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&p.pretty("d"))
}

fn ser_classes<S: serde::Serializer>(c: &BTreeMap<i64, Poly>, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeMap;
    let mut m = s.serialize_map(Some(c.len()))?;
    for (b, p) in c {
        m.serialize_entry(&b.to_string(), &p.pretty("d"))?;
    }
    m.end()
}

impl DefectStats {
    pub fn n_t(&self, d: u32) -> Q {
        self.count.eval(&qi(d as i64)) * qpow(&qi(2), d as i64 - 1)
    }

    /// `m_T = Σ_β n_{T,β} λ^t u^{-(dt+β)}`.
    pub fn m_t(&self, d: u32, lambda: &Q) -> Q {
        let u = lambda + Q::one();
        let dd = qi(d as i64);
        let pref = qpow(&qi(2), d as i64 - 1) * qpow(lambda, self.ty.t() as i64);
        self.classes.iter().fold(Q::zero(), |acc, (&b, p)| {
            acc + p.eval(&dd) * qpow(&u, -(d as i64 * self.ty.t() as i64 + b))
        }) * pref
    }

    pub fn m_t_f64(&self, d: u32, lambda: f64) -> f64 {
        let u = 1.0 + lambda;
        let t = self.ty.t() as f64;
        let df = d as f64;
        self.classes
            .iter()
            .map(|(&b, p)| {
                let log = (df - 1.0) * std::f64::consts::LN_2 + t * lambda.ln() - (df * t + b as f64) * u.ln();
                p.eval_f64(df) * log.exp()
            })
            .sum()
    }

    /// Degree-`(2t-2)` coefficient of `n_T / 2^d`.
    pub fn leading_coefficient(&self) -> Q {
        self.count.coeff(2 * self.ty.t() - 2) * q(1, 2)
    }
}

/// Every size-`t` defect type with its exact symbolic statistics, from the
/// canonical set lists (sets containing 0 whose active coordinates are an
/// initial segment).
pub fn defect_stats(t: usize) -> Result<Vec<DefectStats>> {
    check_t(t, MAX_TYPE_SIZE)?;
    let (lists, _) = lists_for(t, cache_root(None).as_deref())?;
    let mut by_type: BTreeMap<TypeKey, (Vec<u64>, BTreeMap<u32, u64>, BTreeMap<(i64, u32), u64>)> = BTreeMap::new();
    for a in 0..=2 * (t as u32 - 1) {
        for set in lists.sets_exact(t, a) {
            let key = type_of(set.members());
            let beta = local_neighborhood_size(set.members(), a) as i64 - (a as i64) * t as i64;
            let slot = by_type.entry(key).or_insert_with(|| (set.members().to_vec(), BTreeMap::new(), BTreeMap::new()));
            *slot.1.entry(a).or_default() += 1;
            *slot.2.entry((beta, a)).or_default() += 1;
        }
    }
    let inv_t = q(1, t as i64);
    Ok(by_type
        .into_iter()
        .map(|(key, (witness, by_a, by_beta))| {
            let count = by_a
                .iter()
                .fold(Poly::zero(), |acc, (&a, &c)| &acc + &Poly::binomial(a).scale(&(qi(c as i64) * &inv_t)));
            let mut classes: BTreeMap<i64, Poly> = BTreeMap::new();
            for ((b, a), c) in by_beta {
                let term = Poly::binomial(a).scale(&(qi(c as i64) * &inv_t));
                let slot = classes.entry(b).or_insert_with(Poly::zero);
                *slot = &*slot + &term;
            }
            let (_, aut) = canonical_code(&key.adjacency());
            DefectStats {
                ty: DefectType {
                    key,
                    is_tree: key.edge_count() + 1 == t,
                    aut_count: aut,
                    witness,
                },
                count,
                classes,
            }
        })
        .collect())
}

pub fn enumerate_defect_types(t: usize) -> Result<Vec<DefectType>> {
    Ok(defect_stats(t)?.into_iter().map(|s| s.ty).collect())
}

/// `n_T` as a polynomial in `d` times `2^{d-1}`.
pub fn count_nt(ty: &DefectType) -> Result<Poly> {
    check_t(ty.t(), MAX_COUNT_SIZE)?;
    defect_stats(ty.t())?
        .into_iter()
        .find(|s| s.ty.key == ty.key)
        .map(|s| s.count)
        .ok_or_else(|| Error::OutOfRange(format!("type {} is not realisable", ty.key)))
}

/// Unlabelled trees on `t` vertices with `|Aut(T)| = t! / #labelled copies`,
/// the labelled copies coming from Prüfer sequences.
pub fn tree_catalog(t: usize) -> Result<Vec<DefectType>> {
    check_t(t, MAX_CANON)?;
    if t == 1 {
        return Ok(vec![DefectType {
            key: TypeKey { t: 1, code: 0 },
            is_tree: true,
            aut_count: 1,
            witness: vec![],
        }]);
    }
    let mut classes: BTreeMap<String, (Vec<u8>, u64)> = BTreeMap::new();
    let total = (t as u64).pow(t as u32 - 2);
    let mut seq = vec![0usize; t - 2];
    for idx in 0..total {
        let mut x = idx;
        for s in seq.iter_mut() {
            *s = (x % t as u64) as usize;
            x /= t as u64;
        }
        let adj = prufer_tree(&seq, t);
        let slot = classes.entry(tree_code(&adj)).or_insert_with(|| (adj, 0));
        slot.1 += 1;
    }
    let fact: u64 = (1..=t as u64).product();
    let mut out: Vec<DefectType> = classes
        .into_values()
        .map(|(adj, copies)| DefectType {
            key: TypeKey::of_graph(&adj),
            is_tree: true,
            aut_count: fact / copies,
            witness: vec![],
        })
        .collect();
    out.sort_by_key(|d| d.key);
    Ok(out)
}

fn prufer_tree(seq: &[usize], t: usize) -> Vec<u8> {
    let mut degree = vec![1usize; t];
    for &s in seq {
        degree[s] += 1;
    }
    let mut adj = vec![0u8; t];
    let mut link = |a: usize, b: usize| {
        adj[a] |= 1 << b;
        adj[b] |= 1 << a;
    };
    for &s in seq {
        let leaf = (0..t).find(|&v| degree[v] == 1).expect("a leaf exists");
        link(leaf, s);
        degree[leaf] -= 1;
        degree[s] -= 1;
    }
    let rest: Vec<usize> = (0..t).filter(|&v| degree[v] == 1).collect();
    link(rest[0], rest[1]);
    adj
}

/// AHU encoding rooted at the centre (or the smaller of the two bicentre
/// encodings joined by the central edge).
fn tree_code(adj: &[u8]) -> String {
    let t = adj.len();
    let mut deg: Vec<u32> = adj.iter().map(|a| a.count_ones()).collect();
    let mut alive = t;
    let mut leaves: Vec<usize> = (0..t).filter(|&v| deg[v] <= 1).collect();
    let mut removed = vec![false; t];
    while alive > 2 {
        let mut next = Vec::new();
        for &l in &leaves {
            removed[l] = true;
            alive -= 1;
            for n in 0..t {
                if adj[l] >> n & 1 == 1 && !removed[n] {
                    deg[n] -= 1;
                    if deg[n] == 1 {
                        next.push(n);
                    }
                }
            }
        }
        leaves = next;
    }
    let centres: Vec<usize> = (0..t).filter(|&v| !removed[v]).collect();
    fn encode(adj: &[u8], v: usize, parent: Option<usize>) -> String {
        let mut kids: Vec<String> = (0..adj.len())
            .filter(|&n| adj[v] >> n & 1 == 1 && Some(n) != parent)
            .map(|n| encode(adj, n, Some(v)))
            .collect();
        kids.sort();
        format!("({})", kids.concat())
    }
    match centres[..] {
        [c] => encode(adj, c, None),
        [a, b] => {
            let (x, y) = (encode(adj, a, Some(b)), encode(adj, b, Some(a)));
            if x <= y { format!("{x}{y}") } else { format!("{y}{x}") }
        }
        _ => unreachable!("a tree has one or two centres"),
    }
}

/// `λ_t(d) = 2^{1/t} - 1 + 2^{1+1/t}(t-1) log d / (t d) + s / d`.
pub fn threshold_lambda_t(d: u32, t: u32, s: f64) -> f64 {
    let (df, tf) = (d as f64, t as f64);
    let r = 2f64.powf(1.0 / tf);
    r - 1.0 + 2.0 * r * (tf - 1.0) * df.ln() / (tf * df) + s / df
}

/// `Σ 1/|Aut(T)|` over unlabelled trees on `t` vertices.
pub fn inverse_aut_sum(t: usize) -> Result<Q> {
    Ok(tree_catalog(t)?.iter().fold(Q::zero(), |acc, ty| acc + q(1, ty.aut_count as i64)))
}

/// Mean of the limiting Poisson law at `λ = λ_t(d)`:
/// `e^{-s t 2^{-1/t}} 2^{2-2/t-t} (2^{1/t}-1)^t Σ 1/|Aut(T)|`.
pub fn poisson_mean(t: usize, s: f64) -> Result<f64> {
    let sum = q_to_f64(&inverse_aut_sum(t)?);
    let tf = t as f64;
    let r = 2f64.powf(1.0 / tf);
    Ok((-s * tf / r).exp() * (2.0 - 2.0 / tf - tf).exp2() * (r - 1.0).powi(t as i32) * sum)
}

/// Cluster sums split by how many polymers of each type a cluster holds.
#[derive(Default)]
struct TypeProfile(BTreeMap<(u32, usize, i64, Vec<(TypeKey, u32)>), i128>);

impl ClusterAccumulator for TypeProfile {
    fn visit(&mut self, v: &ClusterVisit<'_>) {
        let mut types: BTreeMap<TypeKey, u32> = BTreeMap::new();
        for (p, m) in v.polymers {
            *types.entry(type_of(&p.members(v.x))).or_default() += m;
        }
        let key = (v.a, v.j(), v.exponent, types.into_iter().collect());
        *self.0.entry(key).or_default() += v.scaled_weight();
    }

    fn merge(&mut self, other: Self) {
        for (k, v) in other.0 {
            *self.0.entry(k).or_default() += v;
        }
    }
}

/// `Σ_{‖Γ‖ ≤ K_max} w(Γ) Y_T(Γ)^k` where `Y_T(Γ)` counts type-`T` polymers
/// in `Γ`.
pub fn cumulant_estimate(ty: &TypeKey, k: u32, k_max: usize, params: &ModelParams) -> Result<f64> {
    if k_max == 0 || k_max > MAX_CUMULANT_CLUSTER {
        return Err(Error::TooLarge {
            what: "cluster size for cumulant estimates",
            value: k_max,
            max: MAX_CUMULANT_CLUSTER,
        });
    }
    let d = params.d.concrete()?;
    let exact = params.lambda.exact().cloned();
    let lam = params.lambda.to_f64();
    let mut total_q = Q::zero();
    let mut total_f = 0.0;
    let (lists, _) = lists_for(k_max, cache_root(None).as_deref())?;
    for n in (ty.t as usize)..=k_max {
        let profile: TypeProfile = accumulate_clusters(&lists, n)?;
        let fact: i64 = (1..=n as i64).product();
        for ((a, j, e, types), num) in profile.0 {
            let y = types.iter().find(|(t, _)| t == ty).map_or(0, |&(_, m)| m);
            if y == 0 || num == 0 {
                continue;
            }
            let coef = Poly::binomial(a).eval(&qi(d as i64)) * Q::new(BigInt::from(num) * BigInt::from(y).pow(k), BigInt::from(fact * j as i64));
            let exponent = e - d as i64 * n as i64;
            match &exact {
                Some(l) => {
                    total_q += coef * qpow(l, n as i64) * qpow(&(l + Q::one()), exponent) * qpow(&qi(2), d as i64 - 1)
                }
                None => {
                    let log = (d as f64 - 1.0) * std::f64::consts::LN_2 + n as f64 * lam.ln()
                        + exponent as f64 * (1.0 + lam).ln();
                    total_f += q_to_f64(&coef) * log.exp();
                }
            }
        }
    }
    Ok(match exact {
        Some(_) => q_to_f64(&total_q),
        None => total_f,
    })
}

/// Counts of 2-linked occupied components by type on one side.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct DefectCensus {
    pub counts: BTreeMap<TypeKey, u64>,
    /// Components larger than `t_max`: how many, and how many vertices.
    pub oversize_count: u64,
    pub oversize_mass: u64,
}

impl DefectCensus {
    pub fn count_of_size(&self, t: u8) -> u64 {
        self.counts.iter().filter(|(k, _)| k.t == t).map(|(_, &c)| c).sum()
    }

    pub fn total_mass(&self) -> u64 {
        self.counts.iter().map(|(k, &c)| k.t as u64 * c).sum::<u64>() + self.oversize_mass
    }

    /// Rows `(type_id, size, count)`, oversize last with id `oversize`.
    pub fn rows(&self) -> Vec<(String, usize, u64)> {
        let mut rows: Vec<_> = self.counts.iter().map(|(k, &c)| (k.id(), k.t as usize, c)).collect();
        rows.push(("oversize".into(), 0, self.oversize_count));
        rows
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["type_id", "size", "count"])?;
        for (id, t, c) in self.rows() {
            out.write_record([id, t.to_string(), c.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Census of the 2-linked components of `occupied ∩ side`.
pub fn classify_components(d: u32, occupied: &[u64], side: Parity, t_max: usize) -> Result<DefectCensus> {
    if d > MAX_CENSUS_DIM {
        return Err(Error::Capability(format!("direct census supports d <= {MAX_CENSUS_DIM}")));
    }
    let on_side: Vec<u64> = occupied.iter().copied().filter(|&v| Parity::of(v) == side).collect();
    let mut census = DefectCensus::default();
    for comp in two_linked_components(d, &on_side)? {
        let t = comp.len();
        if t > t_max || t > MAX_CANON {
            census.oversize_count += 1;
            census.oversize_mass += t as u64;
        } else {
            *census.counts.entry(type_of(comp.members())).or_default() += 1;
        }
    }
    Ok(census)
}

/// Side holding fewer occupied vertices; on a tie the even side is the
/// majority and the odd side is reported.
pub fn minority_side(occupied: &[u64]) -> Parity {
    let even = occupied.iter().filter(|&&v| Parity::of(v) == Parity::Even).count();
    if 2 * even < occupied.len() { Parity::Even } else { Parity::Odd }
}

/// Convenience wrapper used by samplers.
pub fn minority_census(d: u32, occupied: &[u64], t_max: usize) -> Result<DefectCensus> {
    classify_components(d, occupied, minority_side(occupied), t_max)
}

/// Witness set as a [`LinkedSet`] at dimension `d`.
pub fn witness_set(ty: &DefectType, d: u32) -> Result<LinkedSet> {
    LinkedSet::new(d, ty.witness.iter().copied())
}

/// Parameters helper used by examples and the CLI.
pub fn lambda_one() -> Fugacity {
    Fugacity::Exact(qi(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypercube::Dimension;

    fn graph(t: usize, edges: &[(usize, usize)]) -> Vec<u8> {
        let mut adj = vec![0u8; t];
        for &(a, b) in edges {
            adj[a] |= 1 << b;
            adj[b] |= 1 << a;
        }
        adj
    }

    #[test]
    fn canonical_codes_of_small_graphs() {
        let p3a = graph(3, &[(0, 1), (1, 2)]);
        let p3b = graph(3, &[(0, 2), (2, 1)]);
        assert_eq!(canonical_code(&p3a).0, canonical_code(&p3b).0);
        assert_eq!(canonical_code(&p3a).1, 2);
        assert_eq!(canonical_code(&graph(3, &[(0, 1), (1, 2), (0, 2)])).1, 6);
        assert_eq!(canonical_code(&graph(4, &[(0, 1), (0, 2), (0, 3)])).1, 6);
        assert_eq!(canonical_code(&graph(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)])).1, 10);
    }

    #[test]
    fn type_counts_for_small_sizes() {
        assert_eq!(enumerate_defect_types(1).unwrap().len(), 1);
        assert_eq!(enumerate_defect_types(2).unwrap().len(), 1);
        let t3 = enumerate_defect_types(3).unwrap();
        assert_eq!(t3.len(), 2);
        assert_eq!(t3.iter().filter(|t| t.is_tree).count(), 1);
    }

    #[test]
    fn counts_match_small_polymer_census() {
        let s1 = defect_stats(1).unwrap();
        assert_eq!(s1[0].count, Poly::constant(qi(1)));
        let s2 = defect_stats(2).unwrap();
        // 2^{d-3} d(d-1) = 2^{d-1} · d(d-1)/4.
        assert_eq!(s2[0].count, Poly::from_ints(&[0, -1, 1]).scale(&q(1, 4)));
        for s in defect_stats(3).unwrap() {
            let d = Poly::x();
            let falling = |n: i64| (0..n).fold(Poly::constant(qi(1)), |acc, i| &acc * &(&d - &Poly::constant(qi(i))));
            if s.ty.is_tree {
                assert_eq!(s.count, falling(4).scale(&q(1, 8)));
                assert_eq!(s.classes.keys().copied().collect::<Vec<_>>(), vec![-4]);
            } else {
                assert_eq!(s.count, falling(3).scale(&q(1, 6)));
                assert_eq!(s.classes.keys().copied().collect::<Vec<_>>(), vec![-5]);
            }
        }
    }

    #[test]
    fn tree_leading_coefficients() {
        for t in 1..=4 {
            for s in defect_stats(t).unwrap() {
                if s.ty.is_tree {
                    assert_eq!(s.leading_coefficient(), s.ty.c_t(), "t={t}");
                } else {
                    assert!(s.count.degree().unwrap() <= 2 * t - 3);
                }
            }
        }
    }

    #[test]
    fn catalog_sizes_and_automorphisms() {
        let sizes: Vec<usize> = (1..=8).map(|t| tree_catalog(t).unwrap().len()).collect();
        assert_eq!(sizes, vec![1, 1, 1, 2, 3, 6, 11, 23]);
        assert_eq!(tree_catalog(2).unwrap()[0].aut_count, 2);
        assert_eq!(inverse_aut_sum(3).unwrap(), q(1, 2));
        // Σ_T t!/|Aut(T)| = t^{t-2} labelled trees.
        for t in 2..=8usize {
            let fact: i64 = (1..=t as i64).product();
            assert_eq!(inverse_aut_sum(t).unwrap() * qi(fact), qi((t as i64).pow(t as u32 - 2)));
        }
    }

    #[test]
    fn catalog_aut_matches_permutation_count() {
        for t in 2..=7 {
            for ty in tree_catalog(t).unwrap() {
                assert_eq!(canonical_code(&ty.key.adjacency()).1, ty.aut_count);
            }
        }
    }

    #[test]
    fn thresholds_and_means() {
        assert_eq!(threshold_lambda_t(100, 1, 0.0), 1.0);
        let d = 1e6f64;
        let expect = 2f64.sqrt() - 1.0 + 2f64.powf(1.5) * d.ln() / (2.0 * d);
        assert!((threshold_lambda_t(1_000_000, 2, 0.0) - expect).abs() < 1e-15);
        assert!((poisson_mean(1, 0.0).unwrap() - 0.5).abs() < 1e-15);
        let m2 = poisson_mean(2, 0.0).unwrap();
        assert!((m2 - (2f64.sqrt() - 1.0).powi(2) / 4.0).abs() < 1e-15);
        assert!(poisson_mean(3, 80.0).unwrap() < 1e-40);
    }

    #[test]
    fn mean_of_single_vertices_is_one_half() {
        let s = &defect_stats(1).unwrap()[0];
        for d in 2..30 {
            assert_eq!(s.m_t(d, &qi(1)), q(1, 2));
        }
    }

    #[test]
    fn first_cumulant_single_clusters() {
        let p = ModelParams::new(Dimension::Concrete(9), lambda_one()).unwrap();
        let key = TypeKey { t: 1, code: 0 };
        assert!((cumulant_estimate(&key, 1, 1, &p).unwrap() - 0.5).abs() < 1e-15);
        let big = defect_stats(3).unwrap()[0].ty.key;
        assert_eq!(cumulant_estimate(&big, 1, 2, &p).unwrap(), 0.0);
    }

    #[test]
    fn census_examples() {
        let c = classify_components(6, &[0], Parity::Even, 3).unwrap();
        assert_eq!(c.counts.values().copied().collect::<Vec<_>>(), vec![1]);
        let c = classify_components(6, &[0, 0b11, 0b11_1100], Parity::Even, 3).unwrap();
        assert_eq!(c.count_of_size(1), 1);
        assert_eq!(c.count_of_size(2), 1);
        let c = classify_components(6, &[0, 0b11, 0b110, 0b1100], Parity::Even, 3).unwrap();
        assert_eq!(c.oversize_count, 1);
        assert_eq!(c.total_mass(), 4);
    }

    #[test]
    fn minority_tie_goes_to_odd() {
        assert_eq!(minority_side(&[0, 1]), Parity::Odd);
        assert_eq!(minority_side(&[0, 1, 2]), Parity::Even);
        assert_eq!(minority_side(&[]), Parity::Odd);
    }

    #[test]
    fn census_csv_layout() {
        let c = classify_components(6, &[0, 0b11, 0b11_1100], Parity::Even, 3).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("type_id,size,count\n"));
        assert_eq!(text.lines().count(), 4);
    }
}
