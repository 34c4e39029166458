//! Bit-level model of the hypercube `Q_d`.
//!
//! A vertex is a `u64` whose bit `i` is coordinate `i`; the dimension always
//! travels with it. The two sides of the bipartition are the even and odd
//! popcount classes. Two vertices on the same side are *2-linked neighbours*
//! when they sit at Hamming distance 2, and a set is 2-linked when it is
//! connected under that relation.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use num_traits::Signed;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{q_to_f64, Q};

pub const MAX_DIM: u32 = 64;

/// Placeholder for the unspecified constant in the validity condition
/// `λ ≥ C_0 log d / d^{1/3}`. Output that relies on it is annotated, never refused.
pub const VALIDITY_C0: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of(bits: u64) -> Parity {
        if bits.count_ones() % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn opposite(self) -> Parity {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Vertex {
    bits: u64,
    dim: u32,
}

impl Vertex {
    pub fn new(bits: u64, dim: u32) -> Result<Vertex> {
        check_dim(dim)?;
        if dim < 64 && bits >> dim != 0 {
            return Err(Error::OutOfRange(format!(
                "vertex {bits:#b} has a bit set at or above dimension {dim}"
            )));
        }
        Ok(Vertex { bits, dim })
    }

    pub fn zero(dim: u32) -> Vertex {
        Vertex { bits: 0, dim }
    }

    pub fn bits(self) -> u64 {
        self.bits
    }

    pub fn dim(self) -> u32 {
        self.dim
    }

    pub fn parity(self) -> Parity {
        Parity::of(self.bits)
    }

    pub fn flip(self, coord: u32) -> Vertex {
        debug_assert!(coord < self.dim);
        Vertex {
            bits: self.bits ^ (1u64 << coord),
            dim: self.dim,
        }
    }

    pub fn distance(self, other: Vertex) -> u32 {
        (self.bits ^ other.bits).count_ones()
    }
}

impl fmt::Display for Vertex {
    /// Coordinates written left to right, coordinate 0 first.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.dim {
            f.write_str(if self.bits >> i & 1 == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

fn check_dim(dim: u32) -> Result<()> {
    if dim == 0 || dim > MAX_DIM {
        return Err(Error::OutOfRange(format!("dimension {dim} not in 1..={MAX_DIM}")));
    }
    Ok(())
}

pub fn neighbors(v: Vertex) -> Vec<Vertex> {
    (0..v.dim).map(|i| v.flip(i)).collect()
}

/// Vertices at distance exactly 2 (same side), as raw bit patterns.
pub fn second_neighbors(bits: u64, dim: u32) -> impl Iterator<Item = u64> {
    (0..dim).flat_map(move |i| ((i + 1)..dim).map(move |j| bits ^ (1u64 << i) ^ (1u64 << j)))
}

/// `true` when the members form one component under distance-≤2 adjacency.
/// The empty set is not 2-linked.
pub fn is_two_linked(members: &[u64]) -> bool {
    if members.is_empty() {
        return false;
    }
    let n = members.len();
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut count = 1;
    while let Some(i) = stack.pop() {
        for j in 0..n {
            if !seen[j] && (members[i] ^ members[j]).count_ones() <= 2 {
                seen[j] = true;
                count += 1;
                stack.push(j);
            }
        }
    }
    count == n
}

/// A 2-linked subset of one side of `Q_d`, members kept sorted.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LinkedSet {
    dim: u32,
    members: Vec<u64>,
}

impl LinkedSet {
    pub fn new(dim: u32, members: impl IntoIterator<Item = u64>) -> Result<LinkedSet> {
        check_dim(dim)?;
        let mut members: Vec<u64> = members.into_iter().collect();
        members.sort_unstable();
        members.dedup();
        if members.is_empty() {
            return Err(Error::OutOfRange("a linked set cannot be empty".into()));
        }
        for &m in &members {
            Vertex::new(m, dim)?;
        }
        let parity = Parity::of(members[0]);
        if members.iter().any(|&m| Parity::of(m) != parity) {
            return Err(Error::ParityMismatch);
        }
        if !is_two_linked(&members) {
            return Err(Error::OutOfRange("set is not 2-linked".into()));
        }
        Ok(LinkedSet { dim, members })
    }

    /// Used by enumerators that already guarantee the invariants.
    pub(crate) fn from_sorted_unchecked(dim: u32, members: Vec<u64>) -> LinkedSet {
        debug_assert!(members.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(is_two_linked(&members));
        LinkedSet { dim, members }
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn members(&self) -> &[u64] {
        &self.members
    }

    pub fn vertices(&self) -> impl Iterator<Item = Vertex> + '_ {
        self.members.iter().map(|&bits| Vertex { bits, dim: self.dim })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn parity(&self) -> Parity {
        Parity::of(self.members[0])
    }

    pub fn contains(&self, bits: u64) -> bool {
        self.members.binary_search(&bits).is_ok()
    }

    /// Bit mask of coordinates set by at least one member.
    pub fn active_mask(&self) -> u64 {
        self.members.iter().fold(0, |acc, &m| acc | m)
    }

    pub fn active_count(&self) -> u32 {
        self.active_mask().count_ones()
    }

    /// Contains the all-zeros vertex and its active coordinates are an
    /// initial segment `{0, .., a-1}`.
    pub fn is_canonical(&self) -> bool {
        let mask = self.active_mask();
        self.contains(0) && mask & mask.wrapping_add(1) == 0
    }

    pub fn neighborhood(&self) -> Vec<u64> {
        neighborhood(self.dim, &self.members)
    }
}

/// Sorted, distinct neighbourhood `N(S)` in `Q_dim`.
pub fn neighborhood(dim: u32, members: &[u64]) -> Vec<u64> {
    let mut out: Vec<u64> = members
        .iter()
        .flat_map(|&m| (0..dim).map(move |i| m ^ (1u64 << i)))
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Split a same-side vertex set into its maximal 2-linked components.
/// Components come out ordered by their smallest member.
pub fn two_linked_components(dim: u32, vertices: &[u64]) -> Result<Vec<LinkedSet>> {
    check_dim(dim)?;
    if vertices.is_empty() {
        return Ok(Vec::new());
    }
    let parity = Parity::of(vertices[0]);
    if vertices.iter().any(|&v| Parity::of(v) != parity) {
        return Err(Error::ParityMismatch);
    }
    let index: HashMap<u64, usize> = vertices.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let n = vertices.len();
    let small = n * n <= n * (dim as usize * dim as usize) / 2;
    let mut comp = vec![usize::MAX; n];
    let mut out = Vec::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = out.len();
        comp[start] = id;
        let mut members = vec![vertices[start]];
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            let v = vertices[i];
            let mut visit = |j: usize| {
                if comp[j] == usize::MAX {
                    comp[j] = id;
                    members.push(vertices[j]);
                    queue.push_back(j);
                }
            };
            if small {
                for j in 0..n {
                    if (v ^ vertices[j]).count_ones() <= 2 {
                        visit(j);
                    }
                }
            } else {
                for w in second_neighbors(v, dim) {
                    if let Some(&j) = index.get(&w) {
                        visit(j);
                    }
                }
            }
        }
        members.sort_unstable();
        members.dedup();
        out.push(LinkedSet::from_sorted_unchecked(dim, members));
    }
    out.sort_by_key(|s| s.members[0]);
    Ok(out)
}

/// An affine function `slope * d + offset` of the dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Affine {
    pub slope: i64,
    pub offset: i64,
}

impl Affine {
    pub fn at(self, d: i64) -> i64 {
        self.slope * d + self.offset
    }
}

impl fmt::Display for Affine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.offset {
            0 => write!(f, "{}d", self.slope),
            o if o > 0 => write!(f, "{}d + {}", self.slope, o),
            o => write!(f, "{}d - {}", self.slope, -o),
        }
    }
}

/// Neighbourhood size inside the `a`-dimensional subcube spanned by the
/// first `a` coordinates.
pub fn local_neighborhood_size(members: &[u64], a: u32) -> usize {
    neighborhood(a.max(1), members)
        .into_iter()
        .filter(|&w| a > 0 && w >> a == 0)
        .count()
}

/// `|N(S)|` as an affine function of `d`, for a canonically embedded set
/// with `a` active coordinates: every member has `d - a` neighbours outside
/// the active subcube, all of them distinct.
pub fn neighborhood_size_embedded(set: &LinkedSet) -> Result<Affine> {
    if !set.is_canonical() {
        return Err(Error::NotCanonical(
            "expected the all-zeros vertex and active coordinates {0, .., a-1}".into(),
        ));
    }
    let a = set.active_count();
    let t = set.len() as i64;
    let local = local_neighborhood_size(set.members(), a) as i64;
    Ok(Affine {
        slope: t,
        offset: local - a as i64 * t,
    })
}

/// Bipartite closure `[S] = { v on S's side : N(v) ⊆ N(S) }` in `Q_dim`.
pub fn bipartite_closure(set: &LinkedSet) -> Vec<u64> {
    let dim = set.dim;
    let nbhd: HashSet<u64> = set.neighborhood().into_iter().collect();
    // Any vertex of the closure shares a neighbour with S, so it lies in S
    // or at distance 2 from it.
    let mut candidates: Vec<u64> = set
        .members
        .iter()
        .flat_map(|&m| std::iter::once(m).chain(second_neighbors(m, dim)))
        .collect();
    candidates.sort_unstable();
    candidates.dedup();
    candidates
        .into_iter()
        .filter(|&v| (0..dim).all(|i| nbhd.contains(&(v ^ (1u64 << i)))))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dimension {
    Symbolic,
    Concrete(u32),
}

impl Dimension {
    pub fn concrete(self) -> Result<u32> {
        match self {
            Dimension::Concrete(d) => Ok(d),
            Dimension::Symbolic => Err(Error::OutOfRange(
                "a concrete dimension is required here".into(),
            )),
        }
    }
}

/// Fugacity: exact rational, or a float routed to the approximate pipeline.
#[derive(Clone, Debug, PartialEq)]
pub enum Fugacity {
    Exact(Q),
    Approx(f64),
}

impl Fugacity {
    pub fn to_f64(&self) -> f64 {
        match self {
            Fugacity::Exact(q) => q_to_f64(q),
            Fugacity::Approx(x) => *x,
        }
    }

    pub fn exact(&self) -> Option<&Q> {
        match self {
            Fugacity::Exact(q) => Some(q),
            Fugacity::Approx(_) => None,
        }
    }
}

impl fmt::Display for Fugacity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fugacity::Exact(q) => write!(f, "{q}"),
            Fugacity::Approx(x) => write!(f, "{x}"),
        }
    }
}

impl FromStr for Fugacity {
    type Err = Error;

    /// `"p/q"` and integers parse exactly; decimals become [`Fugacity::Approx`].
    fn from_str(s: &str) -> Result<Fugacity> {
        let s = s.trim();
        let parsed = if let Ok(r) = s.parse::<Q>() {
            Fugacity::Exact(r)
        } else if let Ok(x) = s.parse::<f64>() {
            Fugacity::Approx(x)
        } else {
            return Err(Error::Parse(format!("fugacity {s:?}")));
        };
        let positive = match &parsed {
            Fugacity::Exact(q) => q.is_positive(),
            Fugacity::Approx(x) => x.is_finite() && *x > 0.0,
        };
        if !positive {
            return Err(Error::OutOfRange(format!("fugacity must be positive, got {s}")));
        }
        Ok(parsed)
    }
}

#[derive(Clone, Debug)]
pub struct ModelParams {
    pub d: Dimension,
    pub lambda: Fugacity,
    /// Whether `λ ≥ C_0 log d / d^{1/3}` with the placeholder [`VALIDITY_C0`].
    /// Always `true` for a symbolic dimension.
    pub valid: bool,
}

impl ModelParams {
    pub fn new(d: Dimension, lambda: Fugacity) -> Result<ModelParams> {
        if let Dimension::Concrete(d) = d {
            if d == 0 {
                return Err(Error::OutOfRange("dimension must be at least 1".into()));
            }
        }
        let lam = lambda.to_f64();
        if !(lam > 0.0) {
            return Err(Error::OutOfRange("fugacity must be positive".into()));
        }
        let valid = match d {
            Dimension::Symbolic => true,
            Dimension::Concrete(d) => lam >= validity_threshold(d),
        };
        Ok(ModelParams { d, lambda, valid })
    }

    pub fn concrete(d: u32, lambda: Fugacity) -> Result<ModelParams> {
        ModelParams::new(Dimension::Concrete(d), lambda)
    }
}

/// `C_0 log d / d^{1/3}` with the placeholder constant.
pub fn validity_threshold(d: u32) -> f64 {
    let d = d as f64;
    VALIDITY_C0 * d.ln() / d.cbrt()
}

/// Exact rational from an integer ratio, for callers building fugacities.
pub fn fugacity_ratio(p: i64, q: i64) -> Fugacity {
    Fugacity::Exact(crate::poly::q(p, q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bits(s: &[u32]) -> u64 {
        s.iter().fold(0, |acc, &i| acc | 1u64 << i)
    }

    #[test]
    fn neighbors_of_origin_and_corner() {
        let n: Vec<u64> = neighbors(Vertex::zero(3)).iter().map(|v| v.bits()).collect();
        assert_eq!(n, vec![0b001, 0b010, 0b100]);
        let mut n: Vec<u64> = neighbors(Vertex::new(0b11, 2).unwrap())
            .iter()
            .map(|v| v.bits())
            .collect();
        n.sort();
        assert_eq!(n, vec![0b01, 0b10]);
    }

    #[test]
    fn vertex_rejects_out_of_range_bits() {
        assert!(Vertex::new(0b1000, 3).is_err());
        assert!(Vertex::new(0, 0).is_err());
    }

    #[test]
    fn components_by_distance() {
        let c = two_linked_components(4, &[0, bits(&[0, 1])]).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].len(), 2);
        let c = two_linked_components(4, &[0, bits(&[0, 1, 2, 3])]).unwrap();
        assert_eq!(c.len(), 2);
        assert!(c.iter().all(|s| s.len() == 1));
    }

    #[test]
    fn components_reject_mixed_parity() {
        let err = two_linked_components(3, &[0, 1]).unwrap_err();
        assert!(err.to_string().contains("parity mismatch"));
    }

    #[test]
    fn embedded_neighborhood_sizes() {
        let single = LinkedSet::new(8, [0]).unwrap();
        assert_eq!(neighborhood_size_embedded(&single).unwrap(), Affine { slope: 1, offset: 0 });
        let pair = LinkedSet::new(8, [0, bits(&[0, 1])]).unwrap();
        assert_eq!(neighborhood_size_embedded(&pair).unwrap(), Affine { slope: 2, offset: -2 });
        let tri = LinkedSet::new(8, [0, bits(&[0, 1]), bits(&[0, 2])]).unwrap();
        assert_eq!(neighborhood_size_embedded(&tri).unwrap(), Affine { slope: 3, offset: -5 });
        let path = LinkedSet::new(8, [0, bits(&[0, 1]), bits(&[2, 3])]).unwrap();
        assert_eq!(neighborhood_size_embedded(&path).unwrap(), Affine { slope: 3, offset: -4 });
    }

    #[test]
    fn embedded_neighborhood_requires_canonical_position() {
        let shifted = LinkedSet::new(8, [bits(&[0, 1]), bits(&[0, 2])]).unwrap();
        assert!(matches!(
            neighborhood_size_embedded(&shifted),
            Err(Error::NotCanonical(_))
        ));
        let gap = LinkedSet::new(8, [0, bits(&[0, 2])]).unwrap();
        assert!(neighborhood_size_embedded(&gap).is_err());
    }

    #[test]
    fn closure_examples() {
        for d in 3..7 {
            let s = LinkedSet::new(d, [0]).unwrap();
            assert_eq!(bipartite_closure(&s), vec![0]);
        }
        // In the 4-cycle the antipode of 0 has the same two neighbours.
        let s = LinkedSet::new(2, [0]).unwrap();
        assert_eq!(bipartite_closure(&s), vec![0, 0b11]);
        let even: Vec<u64> = (0..4u64).filter(|v| v.count_ones() % 2 == 0).collect();
        let s = LinkedSet::new(2, even.clone()).unwrap();
        assert_eq!(bipartite_closure(&s), even);
    }

    #[test]
    fn fugacity_parsing() {
        assert_eq!("1/2".parse::<Fugacity>().unwrap(), Fugacity::Exact(crate::poly::q(1, 2)));
        assert_eq!("3".parse::<Fugacity>().unwrap(), Fugacity::Exact(crate::poly::qi(3)));
        assert_eq!("1.2".parse::<Fugacity>().unwrap(), Fugacity::Approx(1.2));
        assert!("0".parse::<Fugacity>().is_err());
        assert!("-1/2".parse::<Fugacity>().is_err());
        assert!("abc".parse::<Fugacity>().is_err());
    }

    #[test]
    fn validity_flag() {
        let p = ModelParams::concrete(100, Fugacity::Exact(crate::poly::qi(1))).unwrap();
        assert!(p.valid);
        let p = ModelParams::concrete(100, Fugacity::Approx(0.01)).unwrap();
        assert!(!p.valid);
    }

    proptest! {
        #[test]
        fn d_regular(v in any::<u64>().prop_map(|x| x & ((1 << 20) - 1))) {
            let v = Vertex::new(v, 20).unwrap();
            let n = neighbors(v);
            prop_assert_eq!(n.len(), 20);
            prop_assert!(n.iter().all(|w| w.distance(v) == 1));
        }

        #[test]
        fn components_partition_the_input(raw in proptest::collection::vec(0u64..64, 0..20)) {
            let mut set: Vec<u64> = raw.into_iter().filter(|v| v.count_ones() % 2 == 0).collect();
            set.sort();
            set.dedup();
            let comps = two_linked_components(6, &set).unwrap();
            let mut union: Vec<u64> = comps.iter().flat_map(|c| c.members().to_vec()).collect();
            union.sort();
            prop_assert_eq!(&union, &set);
            for (i, a) in comps.iter().enumerate() {
                prop_assert!(is_two_linked(a.members()));
                for b in &comps[i + 1..] {
                    for &x in a.members() {
                        for &y in b.members() {
                            prop_assert!((x ^ y).count_ones() > 2);
                        }
                    }
                }
            }
        }

        #[test]
        fn closure_contains_set_and_keeps_neighborhood(raw in proptest::collection::vec(0u64..32, 1..8)) {
            let even: Vec<u64> = raw.into_iter().filter(|v| v.count_ones() % 2 == 0).collect();
            prop_assume!(!even.is_empty());
            for comp in two_linked_components(5, &even).unwrap() {
                let closure = bipartite_closure(&comp);
                prop_assert!(comp.members().iter().all(|m| closure.contains(m)));
                prop_assert_eq!(neighborhood(5, &closure), comp.neighborhood());
            }
        }
    }
}
