//! The acceptance suite: ten named checks, each reported as one pass/fail
//! line. Shared by the `acceptance` test target and `hcx verify`.

use std::collections::BTreeMap;
use std::time::Instant;

use num_bigint::BigInt;
use num_traits::Zero;
use serde::Serialize;

use crate::cluster_enum::concrete::concrete_lk;
use crate::cluster_enum::{cache_root, cluster_census, compute_lk_symbolic, lists_for, ClusterClass};
use crate::defects::{defect_stats, minority_census, poisson_mean, threshold_lambda_t};
use crate::error::Result;
use crate::expansion::{iqd_series, truncation_residual};
use crate::oracle_sampler::{
    brute_force_z, census_fit, exact_defect_distribution, exact_sample, exact_table, histogram, occupied_vertices,
    total_variation, ChainInit, GlauberChain,
};
use crate::poly::{q, q_to_f64, qi, qpow, BiPoly, Poly, Q};
use crate::ursell::{ursell_direct, ursell_fast, SmallGraph};

pub type UrsellFn = fn(&SmallGraph) -> Result<Q>;

#[derive(Clone, Debug)]
pub struct AcceptanceConfig {
    /// Ursell evaluator under test; replaced by the harness to check that a
    /// wrong value is caught.
    pub ursell: UrsellFn,
    pub sampler_samples: usize,
    pub sampler_seeds: u64,
}

impl Default for AcceptanceConfig {
    fn default() -> Self {
        AcceptanceConfig {
            ursell: ursell_fast,
            sampler_samples: 100_000,
            sampler_seeds: 10,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>2}. {}: {} ({:.1}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.seconds
        )
    }
}

pub const CRITERIA: [(u8, &str); 10] = [
    (1, "cluster sums L_1..L_3 in closed form"),
    (2, "second-order coefficient of i(Q_d)"),
    (3, "Ursell values"),
    (4, "census of small polymers and clusters"),
    (5, "exact partition function oracle chain"),
    (6, "truncation convergence at d = 6"),
    (7, "symbolic against concrete cluster sums"),
    (8, "defect means, Poisson means and thresholds"),
    (9, "sampler fidelity at d = 5"),
    (10, "defect count and weight sandwich bounds"),
];

/// Criteria that fail by analysis rather than by defect. Truncation
/// convergence at `d = 6`, `λ = 1/2` is non-monotone because `λ = 1/2` lies
/// below the validity range there and the partial sums of the exact `L_k`
/// drift away from `log(Z / (2(1+λ)^{2^{d-1}}))`.
pub const KNOWN_FAILURES: [u8; 1] = [6];

type Outcome = Result<(bool, String)>;

pub fn run_criterion(id: u8, cfg: &AcceptanceConfig) -> CriterionResult {
    let name = CRITERIA.iter().find(|c| c.0 == id).map_or("unknown", |c| c.1);
    let start = Instant::now();
    let outcome = match id {
        1 => closed_forms(),
        2 => second_order_series(),
        3 => ursell_values(cfg.ursell),
        4 => small_census(),
        5 => oracle_chain(),
        6 => truncation_convergence(),
        7 => concrete_agreement(),
        8 => defect_predictions(),
        9 => sampler_fidelity(cfg),
        10 => sandwich_bounds(),
        _ => Ok((false, format!("no criterion {id}"))),
    };
    let (passed, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    CriterionResult {
        id,
        name,
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

pub fn run_all(cfg: &AcceptanceConfig) -> Vec<CriterionResult> {
    CRITERIA.iter().map(|&(id, _)| run_criterion(id, cfg)).collect()
}

fn poly_over(coeffs: &[i64], den: i64) -> Poly {
    Poly::from_ints(coeffs).scale(&q(1, den))
}

/// `(deg_d, deg_λ, numerator)` triples over a common denominator.
fn lambda_form(terms: &[(u32, u32, i64)], den: i64) -> BiPoly {
    let t: Vec<(u32, u32, Q)> = terms.iter().map(|&(a, b, c)| (a, b, q(c, den))).collect();
    BiPoly::from_d_lambda(&t)
}

fn closed_forms() -> Outcome {
    let l: Vec<_> = (1..=3).map(compute_lk_symbolic).collect::<Result<_>>()?;
    let at_one = [
        poly_over(&[1], 2),
        poly_over(&[-2, -3, 3], 8),
        poly_over(&[8, 50, -3, -74, 27], 48),
    ];
    let mut bad = Vec::new();
    for (k, expect) in at_one.iter().enumerate() {
        if &l[k].at_lambda_one() != expect {
            bad.push(format!("L_{} at λ = 1", k + 1));
        }
    }
    // L_k = 2^d λ^k u^{-dk} R_k(d, λ).
    let r1 = lambda_form(&[(0, 0, 1)], 2);
    let r2 = lambda_form(&[(2, 1, 2), (2, 2, 1), (1, 1, -2), (1, 2, -1), (0, 0, -2)], 8);
    let r3 = lambda_form(
        &[
            (0, 0, 8),
            (1, 1, 16),
            (1, 2, -4),
            (1, 3, 8),
            (1, 4, 22),
            (1, 5, 8),
            (2, 1, -12),
            (2, 2, 36),
            (2, 3, 12),
            (2, 4, -27),
            (2, 5, -12),
            (3, 1, -4),
            (3, 2, -44),
            (3, 3, -32),
            (3, 4, 2),
            (3, 5, 4),
            (4, 2, 12),
            (4, 3, 12),
            (4, 4, 3),
        ],
        48,
    );
    for (k, expect) in [r1, r2, r3].iter().enumerate() {
        if &l[k].reduced() != expect {
            bad.push(format!("L_{} in λ", k + 1));
        }
    }
    Ok(if bad.is_empty() {
        (true, "L_1, L_2, L_3 equal the closed forms at λ = 1 and as polynomials in λ".into())
    } else {
        (false, format!("mismatch: {}", bad.join(", ")))
    })
}

fn second_order_series() -> Outcome {
    let s = iqd_series(3)?;
    let l2 = compute_lk_symbolic(2)?.at_lambda_one();
    let l3 = compute_lk_symbolic(3)?.at_lambda_one();
    let direct = &(&l2 * &l2).scale(&q(1, 2)) + &l3;
    let expect = poly_over(&[76, 436, -33, -646, 243], 384);
    let ok = s.coeffs[2] == expect && direct == expect && s.coeffs[1] == poly_over(&[-2, -3, 3], 8);
    Ok((ok, format!("L_2²/2 + L_3 at λ = 1 = ({}) · 2^-2d", s.coeffs[2].pretty("d"))))
}

fn all_graphs(n: usize) -> impl Iterator<Item = SmallGraph> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|j| (0..j).map(move |i| (i, j))).collect();
    (0u64..1 << pairs.len()).map(move |mask| {
        let edges: Vec<(usize, usize)> = pairs
            .iter()
            .enumerate()
            .filter(|(b, _)| mask >> b & 1 == 1)
            .map(|(_, &e)| e)
            .collect();
        SmallGraph::from_edges(n, &edges).expect("valid graph")
    })
}

fn ursell_values(ursell: UrsellFn) -> Outcome {
    let named = [
        ("vertex", SmallGraph::complete(1)?, q(1, 1)),
        ("edge", SmallGraph::complete(2)?, q(-1, 2)),
        ("triangle", SmallGraph::complete(3)?, q(1, 3)),
        ("path-3", SmallGraph::path(3)?, q(1, 6)),
    ];
    let mut bad = Vec::new();
    for (label, g, expect) in &named {
        let got = ursell(g)?;
        if &got != expect {
            bad.push(format!("{label}: got {got}, expected {expect}"));
        }
    }
    let mut checked = 0usize;
    for n in 1..=6 {
        for g in all_graphs(n) {
            checked += 1;
            if ursell(&g)? != ursell_direct(&g)? {
                bad.push(format!("{g:?}"));
                break;
            }
        }
    }
    Ok(if bad.is_empty() {
        (true, format!("1, -1/2, 1/3, 1/6; {checked} labelled graphs on ≤ 6 vertices agree"))
    } else {
        (false, bad.join("; "))
    })
}

fn small_census() -> Outcome {
    let mut bad = Vec::new();
    // Polymers: n / 2^{d-1} and the neighbourhood offset.
    let p1 = defect_stats(1)?;
    let p2 = defect_stats(2)?;
    let p3 = defect_stats(3)?;
    let falling = |n: i64| (0..n).fold(Poly::constant(qi(1)), |acc, i| &acc * &(&Poly::x() - &Poly::constant(qi(i))));
    let polymer_rows = [
        ("size 1", p1[0].count.clone(), p1[0].classes.keys().copied().collect::<Vec<_>>(), Poly::constant(qi(1)), vec![0]),
        ("size 2", p2[0].count.clone(), p2[0].classes.keys().copied().collect(), falling(2).scale(&q(1, 4)), vec![-2]),
    ];
    for (label, got, offsets, expect, expect_off) in polymer_rows {
        if got != expect || offsets != expect_off {
            bad.push(label.to_string());
        }
    }
    for s in &p3 {
        let (expect, off) = if s.ty.is_tree {
            (falling(4).scale(&q(1, 8)), -4)
        } else {
            (falling(3).scale(&q(1, 6)), -5)
        };
        if s.count != expect || s.classes.keys().copied().collect::<Vec<_>>() != vec![off] {
            bad.push(format!("size 3 {}", if s.ty.is_tree { "path" } else { "clique" }));
        }
    }
    // Ordered clusters: count / 2^{d-1}, keyed by sizes, Ursell value, offset.
    let (lists, _) = lists_for(3, cache_root(None).as_deref())?;
    let d2 = falling(2);
    let mut expected: BTreeMap<(Vec<usize>, Q, i64), Poly> = BTreeMap::new();
    expected.insert((vec![1], qi(1), 0), Poly::constant(qi(1)));
    expected.insert((vec![2], qi(1), -2), d2.scale(&q(1, 4)));
    expected.insert((vec![1, 1], q(-1, 2), 0), &Poly::constant(qi(1)) + &d2.scale(&q(1, 2)));
    expected.insert((vec![3], qi(1), -5), falling(3).scale(&q(1, 6)));
    expected.insert((vec![3], qi(1), -4), falling(4).scale(&q(1, 8)));
    let pair_inner = &d2 - &(&Poly::from_ints(&[-2, 1])).scale(&qi(2));
    expected.insert((vec![2, 1], q(-1, 2), -2), (&d2 * &pair_inner).scale(&q(1, 2)));
    expected.insert(
        (vec![1, 1, 1], q(1, 3), 0),
        &(&Poly::constant(qi(1)) + &d2.scale(&q(3, 2))) + &falling(3),
    );
    expected.insert((vec![1, 1, 1], q(1, 6), 0), falling(4).scale(&q(3, 4)));
    let mut got: BTreeMap<(Vec<usize>, Q, i64), Poly> = BTreeMap::new();
    for k in 1..=3 {
        for ClusterClass { sizes, ursell, offset, count } in cluster_census(&lists, k)? {
            let slot = got.entry((sizes, ursell, offset)).or_insert_with(Poly::zero);
            *slot = &*slot + &count;
        }
    }
    if got != expected {
        for (key, val) in &expected {
            if got.get(key) != Some(val) {
                bad.push(format!("cluster class {key:?}"));
            }
        }
        for key in got.keys() {
            if !expected.contains_key(key) {
                bad.push(format!("unexpected class {key:?}"));
            }
        }
    }
    let size3: Vec<String> = got.keys().filter(|k| k.0.iter().sum::<usize>() == 3).map(|k| k.1.to_string()).collect();
    Ok(if bad.is_empty() {
        (true, format!("4 polymer classes and {} cluster classes; size-3 Ursell factors {}", got.len(), size3.join(", ")))
    } else {
        (false, format!("mismatch: {}", bad.join("; ")))
    })
}

/// `i(Q_5)` and `i(Q_6)` as first produced by the bipartite sum, kept as
/// regression constants.
pub const I_Q5: u64 = 254_475;
pub const I_Q6: u64 = 19_768_832_143;

fn oracle_chain() -> Outcome {
    let mut values = Vec::new();
    let mut ok = true;
    for d in 1..=4 {
        let bip = exact_table(d, cache_root(None).as_deref())?.0.z(&qi(1));
        let brute = brute_force_z(d, &qi(1))?;
        ok &= bip == brute;
        values.push(bip.to_string());
    }
    ok &= values == ["3", "7", "35", "743"];
    for (d, expect) in [(5, I_Q5), (6, I_Q6)] {
        let v = exact_table(d, cache_root(None).as_deref())?.0.independent_sets();
        ok &= v == BigInt::from(expect);
        values.push(v.to_string());
    }
    Ok((ok, format!("i(Q_d), d = 1..6: {}", values.join(", "))))
}

fn residuals(d: u32, lambda: &Q, k_max: usize) -> Result<Vec<f64>> {
    let z = exact_table(d, cache_root(None).as_deref())?.0.z(lambda);
    let lks: Vec<_> = (1..=k_max).map(compute_lk_symbolic).collect::<Result<_>>()?;
    Ok((1..=k_max)
        .map(|k| {
            let used: Vec<_> = lks[..k].iter().map(|v| v.as_ref()).collect();
            truncation_residual(&z, d, lambda, &used)
        })
        .collect())
}

fn truncation_convergence() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for lambda in [q(1, 2), qi(1)] {
        let r = residuals(6, &lambda, 3)?;
        let dec = r.windows(2).all(|w| w[1] < w[0]);
        ok &= dec;
        parts.push(format!(
            "λ = {lambda}: R = {:.4}, {:.4}, {:.4}{}",
            r[0],
            r[1],
            r[2],
            if dec { "" } else { " (not decreasing)" }
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn concrete_agreement() -> Outcome {
    let mut checked = 0;
    for k in 1..=4 {
        let symbolic = compute_lk_symbolic(k)?;
        for d in 4..=8 {
            if symbolic.laurent_at(d) != concrete_lk(d, k)? {
                return Ok((false, format!("L_{k} differs at d = {d}")));
            }
            checked += 1;
        }
    }
    Ok((true, format!("{checked} (k, d) pairs, k ≤ 4, d = 4..8, identical Laurent polynomials")))
}

fn defect_predictions() -> Outcome {
    let single = &defect_stats(1)?[0];
    let means_ok = (1..=64).all(|d| single.m_t(d, &qi(1)) == q(1, 2));
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let s = -5.0 + 0.17 * i as f64;
        let expect = (-s / 2.0).exp() / 2.0;
        worst = worst.max((poisson_mean(1, s)? - expect).abs() / expect);
    }
    let thresh_ok = (2..=1000).all(|d| threshold_lambda_t(d, 1, 0.0) == 1.0);
    let ok = means_ok && worst < 1e-12 && thresh_ok;
    Ok((
        ok,
        format!(
            "m_T = 1/2 for d = 1..64: {means_ok}; poisson_mean(1, s) max rel. error {worst:.1e}; λ_1(d) = 1 for d = 2..1000: {thresh_ok}"
        ),
    ))
}

fn sampler_fidelity(cfg: &AcceptanceConfig) -> Outcome {
    let (d, t_max) = (5, 3);
    let dist = exact_defect_distribution(d, t_max)?;
    let law = dist.probabilities_f64(&qi(1));
    let mut passes = 0;
    let mut ps = Vec::new();
    for seed in 0..cfg.sampler_seeds {
        let census: Vec<_> = exact_sample(d, 1.0, cfg.sampler_samples, seed)?
            .iter()
            .map(|&occ| minority_census(d, &occupied_vertices(occ), t_max))
            .collect::<Result<_>>()?;
        let fit = census_fit(&census, &law)?;
        if fit.p_value > 0.01 {
            passes += 1;
        }
        ps.push(format!("{:.3}", fit.p_value));
    }
    let need = (cfg.sampler_seeds * 9).div_ceil(10);
    let singles: BTreeMap<u64, f64> = dist
        .marginal(&qi(1), |c| c.count_of_size(1))
        .into_iter()
        .map(|(k, p)| (k, q_to_f64(&p)))
        .collect();
    let mut chain = GlauberChain::new(d, 1.0, 2024, ChainInit::AllOddOccupied)?;
    let burn = chain.default_burn_in();
    let snaps = chain.census_run(burn, cfg.sampler_samples, 2, t_max)?;
    let tv = total_variation(&histogram(snaps.iter().map(|c| c.count_of_size(1))), &singles);
    let ok = passes >= need && tv <= 0.02;
    Ok((
        ok,
        format!("exact sampler p > 0.01 for {passes}/{} seeds (p = {}); Glauber TV = {tv:.4}", cfg.sampler_seeds, ps.join(" ")),
    ))
}

fn sandwich_bounds() -> Outcome {
    let mut checked = 0;
    let mut bad = Vec::new();
    for t in 1..=4usize {
        for s in defect_stats(t)? {
            if s.ty.is_tree && s.leading_coefficient() != s.ty.c_t() {
                bad.push(format!("leading coefficient of {}", s.ty.id()));
            }
            for d in 6..=12u32 {
                let n = s.n_t(d);
                let half = qpow(&qi(2), d as i64 - 1);
                let lower = &half * q(1, t as i64);
                let upper = q_to_f64(&lower) * (std::f64::consts::E * (d * d) as f64).powi(t as i32 - 1);
                if n < lower || q_to_f64(&n) > upper {
                    bad.push(format!("n_T of {} at d = {d}", s.ty.id()));
                }
                for (&beta, p) in &s.classes {
                    let present = !p.eval(&qi(d as i64)).is_zero();
                    if present && !(-2 * (t * t) as i64..=0).contains(&beta) {
                        bad.push(format!("w_T of {} (offset {beta})", s.ty.id()));
                    }
                }
                checked += 1;
            }
        }
    }
    Ok(if bad.is_empty() {
        (true, format!("{checked} (type, d) pairs within both bounds; tree leading coefficients equal 2^-t/|Aut(T)|"))
    } else {
        (false, bad.join("; "))
    })
}
