//! Ursell function `φ(H) = (1/n!) Σ_A (-1)^{|A|}` over connected spanning
//! edge subsets `A` of a graph `H` on `n` vertices.
//!
//! Two independent evaluators: [`ursell_direct`] walks edge subsets with a
//! union-find, [`ursell_fast`] takes the logarithm of the independent-set
//! indicator in the subset-convolution ring (ranked zeta transform), which is
//! `O(2^n n^2)`.

use std::fmt;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::Q;

pub const DIRECT_MAX_VERTICES: usize = 12;
/// `ursell_direct` is exponential in the number of edges; past this it is
/// refused rather than left to run for hours.
pub const DIRECT_MAX_EDGES: usize = 30;
pub const FAST_MAX_VERTICES: usize = 20;

/// Simple undirected graph on at most 20 vertices, stored as adjacency masks.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SmallGraph {
    adj: Vec<u32>,
}

impl SmallGraph {
    pub fn empty(n: usize) -> Result<SmallGraph> {
        if n > FAST_MAX_VERTICES {
            return Err(Error::TooLarge {
                what: "graph vertices",
                value: n,
                max: FAST_MAX_VERTICES,
            });
        }
        Ok(SmallGraph { adj: vec![0; n] })
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<SmallGraph> {
        let mut g = SmallGraph::empty(n)?;
        for &(a, b) in edges {
            g.add_edge(a, b)?;
        }
        Ok(g)
    }

    /// Graph from adjacency masks; bits outside `0..n` and self-loops are rejected.
    pub fn from_adjacency(adj: Vec<u32>) -> Result<SmallGraph> {
        let n = adj.len();
        let mut g = SmallGraph::empty(n)?;
        for (i, &row) in adj.iter().enumerate() {
            for j in 0..32 {
                if row >> j & 1 == 1 {
                    g.add_edge(i, j as usize)?;
                }
            }
        }
        if g.adj != adj {
            return Err(Error::OutOfRange("adjacency matrix is not symmetric".into()));
        }
        Ok(g)
    }

    pub fn complete(n: usize) -> Result<SmallGraph> {
        let mut g = SmallGraph::empty(n)?;
        let full = if n == 0 { 0 } else { u32::MAX >> (32 - n) };
        for (i, row) in g.adj.iter_mut().enumerate() {
            *row = full & !(1 << i);
        }
        Ok(g)
    }

    pub fn path(n: usize) -> Result<SmallGraph> {
        let edges: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
        SmallGraph::from_edges(n, &edges)
    }

    pub fn star(n: usize) -> Result<SmallGraph> {
        let edges: Vec<(usize, usize)> = (1..n).map(|i| (0, i)).collect();
        SmallGraph::from_edges(n, &edges)
    }

    pub fn add_edge(&mut self, a: usize, b: usize) -> Result<()> {
        let n = self.adj.len();
        if a >= n || b >= n {
            return Err(Error::OutOfRange(format!("edge ({a}, {b}) in a graph on {n} vertices")));
        }
        if a == b {
            return Err(Error::OutOfRange("self-loops are not allowed".into()));
        }
        self.adj[a] |= 1 << b;
        self.adj[b] |= 1 << a;
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn adjacency(&self) -> &[u32] {
        &self.adj
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a] >> b & 1 == 1
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n() {
            for j in (i + 1)..self.n() {
                if self.has_edge(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(|r| r.count_ones() as usize).sum::<usize>() / 2
    }

    pub fn is_connected(&self) -> bool {
        let n = self.n();
        if n == 0 {
            return false;
        }
        let full = u32::MAX >> (32 - n);
        let mut seen = 1u32;
        let mut frontier = 1u32;
        while frontier != 0 {
            let mut next = 0;
            let mut f = frontier;
            while f != 0 {
                let i = f.trailing_zeros() as usize;
                f &= f - 1;
                next |= self.adj[i];
            }
            frontier = next & !seen;
            seen |= next;
        }
        seen == full
    }

    /// Packed upper triangle, row by row; a cheap memo key for graphs with
    /// at most 16 vertices.
    pub fn key(&self) -> Option<u128> {
        let n = self.n();
        if n > 16 {
            return None;
        }
        let mut key = 0u128;
        let mut pos = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                if self.has_edge(i, j) {
                    key |= 1 << pos;
                }
                pos += 1;
            }
        }
        Some(key)
    }
}

impl fmt::Debug for SmallGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SmallGraph(n={}, edges={:?})", self.n(), self.edges())
    }
}

fn factorial(n: usize) -> BigInt {
    (1..=n as u64).map(BigInt::from).product()
}

fn to_ursell(signed_sum: i128, n: usize) -> Q {
    Q::new(BigInt::from(signed_sum), factorial(n))
}

/// `Σ (-1)^{|A|}` over connected spanning edge subsets, by direct enumeration.
pub fn connected_signed_sum_direct(h: &SmallGraph) -> Result<i128> {
    let n = h.n();
    if n > DIRECT_MAX_VERTICES {
        return Err(Error::TooLarge {
            what: "graph vertices",
            value: n,
            max: DIRECT_MAX_VERTICES,
        });
    }
    let edges = h.edges();
    if edges.len() > DIRECT_MAX_EDGES {
        return Err(Error::TooLarge {
            what: "graph edges for direct enumeration",
            value: edges.len(),
            max: DIRECT_MAX_EDGES,
        });
    }
    if n == 0 {
        return Ok(0);
    }
    if !h.is_connected() {
        return Ok(0);
    }
    let mut parent = [0u8; DIRECT_MAX_VERTICES];
    for (i, p) in parent.iter_mut().enumerate() {
        *p = i as u8;
    }
    Ok(walk_edges(&edges, 0, parent, n, 0))
}

fn find(parent: &mut [u8; DIRECT_MAX_VERTICES], mut x: u8) -> u8 {
    while parent[x as usize] != x {
        let p = parent[x as usize];
        parent[x as usize] = parent[p as usize];
        x = p;
    }
    x
}

/// Edges `idx..` still undecided; `components` counts union-find roots and
/// `taken` is the parity of chosen edges.
fn walk_edges(
    edges: &[(usize, usize)],
    idx: usize,
    parent: [u8; DIRECT_MAX_VERTICES],
    components: usize,
    taken: u32,
) -> i128 {
    if components == 1 {
        // Every completion of the remaining edges stays connected; their
        // signed sum vanishes unless nothing is left to choose.
        return if idx == edges.len() {
            if taken % 2 == 0 {
                1
            } else {
                -1
            }
        } else {
            0
        };
    }
    if edges.len() - idx < components - 1 {
        return 0;
    }
    let (a, b) = edges[idx];
    let mut with = parent;
    let ra = find(&mut with, a as u8);
    let rb = find(&mut with, b as u8);
    let mut total = walk_edges(edges, idx + 1, parent, components, taken);
    if ra != rb {
        with[ra as usize] = rb;
        total += walk_edges(edges, idx + 1, with, components - 1, taken + 1);
    } else {
        total += walk_edges(edges, idx + 1, with, components, taken + 1);
    }
    total
}

/// `Σ (-1)^{|A|}` over connected spanning edge subsets via the set-function
/// logarithm of the independent-set indicator.
pub fn connected_signed_sum_fast(h: &SmallGraph) -> Result<i128> {
    let n = h.n();
    if n > FAST_MAX_VERTICES {
        return Err(Error::TooLarge {
            what: "graph vertices",
            value: n,
            max: FAST_MAX_VERTICES,
        });
    }
    if n == 0 {
        return Ok(0);
    }
    let size = 1usize << n;
    let width = n + 1;
    // ind[y*width + r] = number of independent sets of size r inside y.
    let mut ind = vec![0u32; size * width];
    ind[0] = 1;
    for y in 1..size {
        let v = y.trailing_zeros() as usize;
        let without = y & !(1 << v);
        let without_closed = without & !(h.adj[v] as usize);
        for r in 0..width {
            let mut c = ind[without * width + r];
            if r > 0 {
                c += ind[without_closed * width + r - 1];
            }
            ind[y * width + r] = c;
        }
    }
    // h_r = r * [z^r] log(Σ_r F_r z^r); only h_n is needed per subset.
    let mut total: i128 = 0;
    let mut hs = vec![0i128; width];
    for y in 1..size {
        let f = &ind[y * width..(y + 1) * width];
        let k = y.count_ones() as usize;
        // F_r(y) vanishes for r > |y|, which truncates the recurrence.
        for r in 1..=n {
            let mut acc = r as i128 * f[r] as i128;
            for i in 1..r {
                if r - i <= k {
                    acc -= hs[i] * f[r - i] as i128;
                }
            }
            hs[r] = acc;
        }
        if (n - k) % 2 == 0 {
            total += hs[n];
        } else {
            total -= hs[n];
        }
    }
    debug_assert_eq!(total % n as i128, 0);
    Ok(total / n as i128)
}

pub fn ursell_direct(h: &SmallGraph) -> Result<Q> {
    Ok(to_ursell(connected_signed_sum_direct(h)?, h.n().max(1)))
}

pub fn ursell_fast(h: &SmallGraph) -> Result<Q> {
    Ok(to_ursell(connected_signed_sum_fast(h)?, h.n().max(1)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{q, qi};

    #[test]
    fn small_values() {
        let k1 = SmallGraph::empty(1).unwrap();
        assert_eq!(ursell_direct(&k1).unwrap(), qi(1));
        assert_eq!(ursell_fast(&k1).unwrap(), qi(1));
        let k2 = SmallGraph::complete(2).unwrap();
        assert_eq!(ursell_direct(&k2).unwrap(), q(-1, 2));
        assert_eq!(ursell_fast(&k2).unwrap(), q(-1, 2));
        let k3 = SmallGraph::complete(3).unwrap();
        assert_eq!(ursell_direct(&k3).unwrap(), q(1, 3));
        assert_eq!(ursell_fast(&k3).unwrap(), q(1, 3));
        let p3 = SmallGraph::path(3).unwrap();
        assert_eq!(ursell_direct(&p3).unwrap(), q(1, 6));
        assert_eq!(ursell_fast(&p3).unwrap(), q(1, 6));
    }

    #[test]
    fn complete_graph_sums_are_signed_factorials() {
        // Σ over connected spanning subgraphs of K_n of (-1)^|A| = (-1)^{n-1}(n-1)!
        let mut fact = 1i128;
        for n in 1..=9 {
            if n > 1 {
                fact *= (n - 1) as i128;
            }
            let sign = if n % 2 == 1 { 1 } else { -1 };
            let g = SmallGraph::complete(n).unwrap();
            assert_eq!(connected_signed_sum_fast(&g).unwrap(), sign * fact, "K{n}");
            if g.edge_count() <= DIRECT_MAX_EDGES {
                assert_eq!(connected_signed_sum_direct(&g).unwrap(), sign * fact);
            }
        }
    }

    #[test]
    fn trees_have_sum_plus_minus_one() {
        for n in 1..=20 {
            let g = SmallGraph::path(n).unwrap();
            let expect = if n % 2 == 1 { 1 } else { -1 };
            assert_eq!(connected_signed_sum_fast(&g).unwrap(), expect);
        }
    }

    #[test]
    fn disconnected_is_zero() {
        let g = SmallGraph::empty(2).unwrap();
        assert_eq!(ursell_fast(&g).unwrap(), qi(0));
        assert_eq!(ursell_direct(&g).unwrap(), qi(0));
    }

    #[test]
    fn size_limits() {
        assert!(ursell_direct(&SmallGraph::path(13).unwrap()).is_err());
        assert!(SmallGraph::empty(21).is_err());
        assert!(ursell_direct(&SmallGraph::complete(9).unwrap()).is_err());
    }

    #[test]
    fn star_agrees() {
        let s = SmallGraph::star(4).unwrap();
        assert_eq!(ursell_fast(&s).unwrap(), ursell_direct(&s).unwrap());
    }

    #[test]
    fn exhaustive_cross_check_up_to_six_vertices() {
        for n in 1..=6usize {
            let pairs: Vec<(usize, usize)> = (0..n)
                .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                .collect();
            for mask in 0u32..(1 << pairs.len()) {
                let edges: Vec<(usize, usize)> = pairs
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask >> i & 1 == 1)
                    .map(|(_, &e)| e)
                    .collect();
                let g = SmallGraph::from_edges(n, &edges).unwrap();
                let a = connected_signed_sum_direct(&g).unwrap();
                let b = connected_signed_sum_fast(&g).unwrap();
                assert_eq!(a, b, "{g:?}");
                if g.is_connected() {
                    let sign = if n % 2 == 1 { 1 } else { -1 };
                    assert!(sign * a > 0, "{g:?}");
                } else {
                    assert_eq!(a, 0);
                }
            }
        }
    }
}
