use hypercube_cluster::defects::{canonical_code, minority_census, minority_side, type_of};
use hypercube_cluster::hypercube::{two_linked_components, Parity};
use hypercube_cluster::ursell::{ursell_direct, ursell_fast, SmallGraph};
use proptest::prelude::*;

fn graph_from_bits(n: usize, bits: u32) -> Vec<u8> {
    let mut adj = vec![0u8; n];
    let mut b = 0;
    for j in 0..n {
        for i in 0..j {
            if bits >> b & 1 == 1 {
                adj[i] |= 1 << j;
                adj[j] |= 1 << i;
            }
            b += 1;
        }
    }
    adj
}

fn relabel(adj: &[u8], perm: &[usize]) -> Vec<u8> {
    let mut out = vec![0u8; adj.len()];
    for i in 0..adj.len() {
        for j in 0..adj.len() {
            if adj[i] >> j & 1 == 1 {
                out[perm[i]] |= 1 << perm[j];
            }
        }
    }
    out
}

// Hypercube automorphism: permute coordinates, then translate.
fn image(v: u64, coords: &[usize], shift: u64) -> u64 {
    let mut w = 0;
    for (i, &c) in coords.iter().enumerate() {
        w |= (v >> i & 1) << c;
    }
    w ^ shift
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn canonical_code_ignores_labels(n in 1usize..=7, bits in any::<u32>(), perm in Just((0..7).collect::<Vec<usize>>()).prop_shuffle()) {
        let adj = graph_from_bits(n, bits);
        let perm: Vec<usize> = perm.into_iter().filter(|&p| p < n).collect();
        let (c1, a1) = canonical_code(&adj);
        let (c2, a2) = canonical_code(&relabel(&adj, &perm));
        prop_assert_eq!(c1, c2);
        prop_assert_eq!(a1, a2);
    }

    #[test]
    fn ursell_engines_agree(n in 1usize..=6, bits in any::<u32>()) {
        let adj = graph_from_bits(n, bits);
        let edges: Vec<(usize, usize)> = (0..n)
            .flat_map(|j| (0..j).map(move |i| (i, j)))
            .filter(|&(i, j)| adj[i] >> j & 1 == 1)
            .collect();
        let h = SmallGraph::from_edges(n, &edges).unwrap();
        prop_assert_eq!(ursell_direct(&h).unwrap(), ursell_fast(&h).unwrap());
    }

    #[test]
    fn census_accounts_for_every_minority_vertex(raw in proptest::collection::vec(0u64..64, 0..40)) {
        let mut occ = raw;
        occ.sort();
        occ.dedup();
        let census = minority_census(6, &occ, 3).unwrap();
        let side = minority_side(&occ);
        let on_side = occ.iter().filter(|&&v| Parity::of(v) == side).count() as u64;
        prop_assert_eq!(census.total_mass(), on_side);
        let comps = two_linked_components(6, &occ.iter().copied().filter(|&v| Parity::of(v) == side).collect::<Vec<_>>()).unwrap();
        let listed: u64 = census.counts.values().sum::<u64>() + census.oversize_count;
        prop_assert_eq!(listed, comps.len() as u64);
    }

    #[test]
    fn defect_type_is_invariant_under_cube_symmetries(
        raw in proptest::collection::vec(0u64..256, 1..6),
        coords in Just((0..8).collect::<Vec<usize>>()).prop_shuffle(),
        shift in 0u64..256,
    ) {
        let even: Vec<u64> = raw.into_iter().filter(|v| v.count_ones() % 2 == 0).collect();
        prop_assume!(!even.is_empty());
        for comp in two_linked_components(8, &even).unwrap() {
            let moved: Vec<u64> = comp.members().iter().map(|&v| image(v, &coords, shift)).collect();
            prop_assert_eq!(type_of(comp.members()), type_of(&moved));
        }
    }
}
