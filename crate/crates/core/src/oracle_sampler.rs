//! Ground truth at small `d`: exact partition functions, exact defect-count
//! distributions, exact and Glauber sampling, goodness-of-fit tests.
//!
//! Vertices of `Q_d` are their bit patterns; an independent set with
//! `d <= 6` is a `u64` occupancy mask over the `2^d` vertices.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson};

use crate::cluster_enum::cache::write_atomic;
use crate::cluster_enum::{cache_root, CacheStatus};
use crate::defects::{minority_census, DefectCensus};
use crate::error::{Error, Result};
use crate::hypercube::Parity;
use crate::poly::{qi, qpow, q_to_f64, Q};

pub const MAX_EXACT_Z_DIM: u32 = 6;
pub const MAX_BRUTE_DIM: u32 = 4;
pub const MAX_DISTRIBUTION_DIM: u32 = 5;
pub const MAX_SAMPLER_DIM: u32 = 5;
pub const MAX_GLAUBER_DIM: u32 = 16;
pub const MIN_FIT_SAMPLES: usize = 1000;
const SAMPLE_BATCH: usize = 1024;
const TABLE_FORMAT: u32 = 1;

fn side_vertices(d: u32, side: Parity) -> Vec<u64> {
    (0..1u64 << d).filter(|&v| Parity::of(v) == side).collect()
}

/// Neighbourhood of each vertex of `side` as a mask over the other side's
/// vertex indices.
fn neighbour_masks(d: u32, side: Parity) -> Vec<u64> {
    let other = side_vertices(d, side.opposite());
    let index: HashMap<u64, usize> = other.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    side_vertices(d, side)
        .iter()
        .map(|&v| (0..d).fold(0u64, |m, c| m | 1 << index[&(v ^ (1 << c))]))
        .collect()
}

/// `c[a][b]`: number of `A ⊆ side` with `|A| = a` and `|N(A)| = b`, so that
/// `Z = Σ c[a][b] λ^a (1+λ)^{2^{d-1} - b}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactTable {
    pub d: u32,
    pub side: Parity,
    pub counts: Vec<Vec<u64>>,
}

fn check_exact_dim(d: u32, max: u32, what: &str) -> Result<()> {
    if d == 0 {
        return Err(Error::OutOfRange("dimension must be at least 1".into()));
    }
    if d > max {
        return Err(Error::Capability(format!("{what} supports d <= {max}, got d = {d}")));
    }
    Ok(())
}

impl ExactTable {
    pub fn build(d: u32, side: Parity) -> Result<ExactTable> {
        check_exact_dim(d, MAX_EXACT_Z_DIM, "exact partition function")?;
        let masks = neighbour_masks(d, side);
        let m = masks.len();
        let counts = if m <= 16 {
            let mut c = vec![vec![0u64; m + 1]; m + 1];
            for (a, n) in subset_masks(&masks) {
                c[a][n.count_ones() as usize] += 1;
            }
            c
        } else {
            meet_in_the_middle(&masks)
        };
        Ok(ExactTable { d, side, counts })
    }

    pub fn half(&self) -> usize {
        self.counts.len() - 1
    }

    pub fn z(&self, lambda: &Q) -> Q {
        let u = lambda + Q::one();
        let m = self.half() as i64;
        let mut z = Q::zero();
        for (a, row) in self.counts.iter().enumerate() {
            let la = qpow(lambda, a as i64);
            for (b, &c) in row.iter().enumerate() {
                if c != 0 {
                    z += &la * qpow(&u, m - b as i64) * qi(c as i64);
                }
            }
        }
        z
    }

    pub fn ln_z_f64(&self, lambda: f64) -> f64 {
        let (ll, lu) = (lambda.ln(), (1.0 + lambda).ln());
        let m = self.half() as f64;
        let terms: Vec<f64> = self
            .counts
            .iter()
            .enumerate()
            .flat_map(|(a, row)| {
                row.iter().enumerate().filter(|(_, &c)| c != 0).map(move |(b, &c)| {
                    (c as f64).ln() + a as f64 * ll + (m - b as f64) * lu
                })
            })
            .collect();
        let top = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln()
    }

    /// `i(Q_d)`.
    pub fn independent_sets(&self) -> BigInt {
        self.z(&qi(1)).to_integer()
    }
}

/// All subsets of `masks` as `(size, union)`, in binary counting order.
fn subset_masks(masks: &[u64]) -> Vec<(usize, u64)> {
    let n = masks.len();
    let mut out = vec![(0usize, 0u64); 1 << n];
    for s in 1usize..1 << n {
        let low = s.trailing_zeros() as usize;
        let (a, m) = out[s & (s - 1)];
        out[s] = (a + 1, m | masks[low]);
    }
    out
}

fn meet_in_the_middle(masks: &[u64]) -> Vec<Vec<u64>> {
    let m = masks.len();
    let (lo, hi) = masks.split_at(m / 2);
    let left = subset_masks(lo);
    let mut right: Vec<Vec<u64>> = vec![Vec::new(); hi.len() + 1];
    for (a, n) in subset_masks(hi) {
        right[a].push(n);
    }
    let width = masks.iter().fold(0u64, |acc, &x| acc | x).count_ones() as usize;
    left.par_iter()
        .fold(
            || vec![vec![0u64; width + 1]; m + 1],
            |mut acc, &(a1, n1)| {
                let mut hist = vec![0u64; width + 1];
                for (a2, group) in right.iter().enumerate() {
                    hist.iter_mut().for_each(|h| *h = 0);
                    for &n2 in group {
                        hist[(n1 | n2).count_ones() as usize] += 1;
                    }
                    for (b, &h) in hist.iter().enumerate() {
                        acc[a1 + a2][b] += h;
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![vec![0u64; width + 1]; m + 1],
            |mut l, r| {
                for (lr, rr) in l.iter_mut().zip(r) {
                    for (x, y) in lr.iter_mut().zip(rr) {
                        *x += y;
                    }
                }
                l
            },
        )
}

#[derive(Serialize, Deserialize)]
struct TableFile {
    format: u32,
    table: ExactTable,
    sha256: String,
}

fn table_digest(t: &ExactTable) -> Result<String> {
    Ok(Sha256::digest(serde_json::to_vec(t)?).iter().map(|b| format!("{b:02x}")).collect())
}

pub fn table_path(root: &Path, d: u32) -> PathBuf {
    root.join("exact").join(format!("d{d}.json"))
}

/// Exact table for the even side, from disk when a valid copy exists. The
/// table does not depend on `λ`, so it is keyed by `d` alone.
pub fn exact_table_cached(d: u32, root: Option<&Path>) -> Result<(ExactTable, CacheStatus)> {
    check_exact_dim(d, MAX_EXACT_Z_DIM, "exact partition function")?;
    let Some(root) = root else {
        return Ok((ExactTable::build(d, Parity::Even)?, CacheStatus::Disabled));
    };
    let path = table_path(root, d);
    let mut status = CacheStatus::Miss;
    if let Ok(bytes) = fs::read(&path) {
        match serde_json::from_slice::<TableFile>(&bytes) {
            Ok(f) if f.format == TABLE_FORMAT && f.table.d == d && table_digest(&f.table)? == f.sha256 => {
                return Ok((f.table, CacheStatus::Hit));
            }
            _ => status = CacheStatus::Rebuilt,
        }
    }
    let table = ExactTable::build(d, Parity::Even)?;
    let file = TableFile {
        format: TABLE_FORMAT,
        sha256: table_digest(&table)?,
        table,
    };
    write_atomic(&path, &serde_json::to_vec(&file)?)?;
    Ok((file.table, status))
}

fn table_memory() -> &'static Mutex<HashMap<u32, Arc<ExactTable>>> {
    static CELL: OnceLock<Mutex<HashMap<u32, Arc<ExactTable>>>> = OnceLock::new();
    CELL.get_or_init(Default::default)
}

/// [`exact_table_cached`] behind a per-process memo.
pub fn exact_table(d: u32, root: Option<&Path>) -> Result<(Arc<ExactTable>, CacheStatus)> {
    if let Some(t) = table_memory().lock().unwrap().get(&d) {
        return Ok((t.clone(), CacheStatus::Memory));
    }
    let (t, status) = exact_table_cached(d, root)?;
    let t = Arc::new(t);
    table_memory().lock().unwrap().insert(d, t.clone());
    Ok((t, status))
}

/// Exact `Z(λ)` via the bipartite sum over subsets of the even side.
pub fn exact_z(d: u32, lambda: &Q) -> Result<Q> {
    Ok(exact_table(d, cache_root(None).as_deref())?.0.z(lambda))
}

/// Independent-set counts by size over all `2^{2^d}` vertex subsets.
pub fn brute_force_counts(d: u32) -> Result<Vec<u64>> {
    check_exact_dim(d, MAX_BRUTE_DIM, "all-subsets brute force")?;
    let n = 1u32 << d;
    let low: Vec<u64> = (0..d)
        .map(|c| (0..n as u64).filter(|v| v >> c & 1 == 0).fold(0, |m, v| m | 1 << v))
        .collect();
    let mut counts = vec![0u64; n as usize + 1];
    for s in 0u64..1 << n {
        if (0..d).all(|c| s & (s >> (1 << c)) & low[c as usize] == 0) {
            counts[s.count_ones() as usize] += 1;
        }
    }
    Ok(counts)
}

pub fn brute_force_z(d: u32, lambda: &Q) -> Result<Q> {
    Ok(brute_force_counts(d)?
        .iter()
        .enumerate()
        .fold(Q::zero(), |acc, (s, &c)| acc + qpow(lambda, s as i64) * qi(c as i64)))
}

/// Calls `f` with every independent set of `Q_d` as an occupancy mask.
pub fn for_each_independent_set(d: u32, mut f: impl FnMut(u64)) -> Result<()> {
    check_exact_dim(d, MAX_DISTRIBUTION_DIM, "independent-set enumeration")?;
    let even = side_vertices(d, Parity::Even);
    let odd = side_vertices(d, Parity::Odd);
    let masks = neighbour_masks(d, Parity::Even);
    let full = (1u64 << odd.len()) - 1;
    for (s, (_, n)) in subset_masks(&masks).into_iter().enumerate() {
        let a_occ = (0..even.len()).filter(|i| s >> i & 1 == 1).fold(0u64, |m, i| m | 1 << even[i]);
        let free = full & !n;
        let mut b = free;
        loop {
            let b_occ = (0..odd.len()).filter(|i| b >> i & 1 == 1).fold(0u64, |m, i| m | 1 << odd[i]);
            f(a_occ | b_occ);
            if b == 0 {
                break;
            }
            b = (b - 1) & free;
        }
    }
    Ok(())
}

pub fn occupied_vertices(mask: u64) -> Vec<u64> {
    (0..64).filter(|i| mask >> i & 1 == 1).collect()
}

/// Exact law of the minority-side census: for each census, the number of
/// independent sets of each size producing it.
#[derive(Clone, Debug, PartialEq)]
pub struct DefectDistribution {
    pub d: u32,
    pub t_max: usize,
    pub by_census: BTreeMap<DefectCensus, Vec<u64>>,
}

pub fn exact_defect_distribution(d: u32, t_max: usize) -> Result<DefectDistribution> {
    let n = 1usize << d;
    let mut by_census: BTreeMap<DefectCensus, Vec<u64>> = BTreeMap::new();
    let mut err = None;
    for_each_independent_set(d, |occ| {
        let verts = occupied_vertices(occ);
        match minority_census(d, &verts, t_max) {
            Ok(c) => by_census.entry(c).or_insert_with(|| vec![0; n + 1])[verts.len()] += 1,
            Err(e) => err = Some(e),
        }
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(DefectDistribution { d, t_max, by_census })
}

impl DefectDistribution {
    pub fn probabilities(&self, lambda: &Q) -> Vec<(DefectCensus, Q)> {
        let weigh = |row: &Vec<u64>| {
            row.iter()
                .enumerate()
                .fold(Q::zero(), |acc, (s, &c)| acc + qpow(lambda, s as i64) * qi(c as i64))
        };
        let weights: Vec<(DefectCensus, Q)> = self.by_census.iter().map(|(c, r)| (c.clone(), weigh(r))).collect();
        let z: Q = weights.iter().fold(Q::zero(), |acc, (_, w)| acc + w);
        weights.into_iter().map(|(c, w)| (c, w / &z)).collect()
    }

    pub fn probabilities_f64(&self, lambda: &Q) -> Vec<(DefectCensus, f64)> {
        self.probabilities(lambda).into_iter().map(|(c, p)| (c, q_to_f64(&p))).collect()
    }

    /// Law of a scalar statistic of the census.
    pub fn marginal(&self, lambda: &Q, stat: impl Fn(&DefectCensus) -> u64) -> BTreeMap<u64, Q> {
        let mut out: BTreeMap<u64, Q> = BTreeMap::new();
        for (c, p) in self.probabilities(lambda) {
            *out.entry(stat(&c)).or_insert_with(Q::zero) += p;
        }
        out
    }

    pub fn total_sets(&self) -> u64 {
        self.by_census.values().flatten().sum()
    }
}

fn sampler_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// I.i.d. sampler for the hard-core measure: the even part `A` is drawn from
/// its exact marginal `∝ λ^{|A|} (1+λ)^{-|N(A)|}`, then each unblocked odd
/// vertex is occupied independently with probability `λ/(1+λ)`.
pub struct ExactSampler {
    d: u32,
    lambda: f64,
    even: Vec<u64>,
    odd: Vec<u64>,
    cumulative: Vec<f64>,
    blocked: Vec<u64>,
}

impl ExactSampler {
    pub fn new(d: u32, lambda: f64) -> Result<ExactSampler> {
        check_exact_dim(d, MAX_SAMPLER_DIM, "exact sampler")?;
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::OutOfRange(format!("fugacity must be positive, got {lambda}")));
        }
        let masks = neighbour_masks(d, Parity::Even);
        let subsets = subset_masks(&masks);
        let (ll, lu) = (lambda.ln(), (1.0 + lambda).ln());
        let logs: Vec<f64> = subsets
            .iter()
            .map(|&(a, n)| a as f64 * ll - n.count_ones() as f64 * lu)
            .collect();
        let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut acc = 0.0;
        let cumulative = logs
            .iter()
            .map(|l| {
                acc += (l - top).exp();
                acc
            })
            .collect();
        Ok(ExactSampler {
            d,
            lambda,
            even: side_vertices(d, Parity::Even),
            odd: side_vertices(d, Parity::Odd),
            cumulative,
            blocked: subsets.into_iter().map(|(_, n)| n).collect(),
        })
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> u64 {
        let total = *self.cumulative.last().unwrap();
        let r = rng.random::<f64>() * total;
        let s = self.cumulative.partition_point(|&c| c <= r).min(self.cumulative.len() - 1);
        let p = self.lambda / (1.0 + self.lambda);
        let mut occ = 0u64;
        for (i, &v) in self.even.iter().enumerate() {
            if s >> i & 1 == 1 {
                occ |= 1 << v;
            }
        }
        for (i, &v) in self.odd.iter().enumerate() {
            if self.blocked[s] >> i & 1 == 0 && rng.random::<f64>() < p {
                occ |= 1 << v;
            }
        }
        occ
    }

    /// `n` samples; batch `i` uses stream `i` of the seeded generator, so the
    /// output does not depend on the thread count.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<u64> {
        let batches = n.div_ceil(SAMPLE_BATCH);
        (0..batches)
            .into_par_iter()
            .flat_map_iter(|b| {
                let mut rng = sampler_rng(seed, b as u64);
                let len = SAMPLE_BATCH.min(n - b * SAMPLE_BATCH);
                (0..len).map(move |_| self.draw(&mut rng)).collect::<Vec<_>>()
            })
            .collect()
    }
}

pub fn exact_sample(d: u32, lambda: f64, n: usize, seed: u64) -> Result<Vec<u64>> {
    Ok(ExactSampler::new(d, lambda)?.sample(n, seed))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChainInit {
    AllOddOccupied,
    Empty,
}

/// Probability that a heat-bath update occupies a site with no occupied
/// neighbour.
pub fn occupy_probability(lambda: f64) -> f64 {
    lambda / (1.0 + lambda)
}

/// Single-site heat-bath dynamics for the hard-core measure on `Q_d`.
pub struct GlauberChain {
    d: u32,
    p_occupy: f64,
    occ: Vec<u64>,
    rng: ChaCha8Rng,
    steps: u64,
}

impl GlauberChain {
    pub fn new(d: u32, lambda: f64, seed: u64, init: ChainInit) -> Result<GlauberChain> {
        if d == 0 || d > MAX_GLAUBER_DIM {
            return Err(Error::Capability(format!("Glauber chain supports 1 <= d <= {MAX_GLAUBER_DIM}")));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::OutOfRange(format!("fugacity must be positive, got {lambda}")));
        }
        let n = 1usize << d;
        let mut occ = vec![0u64; n.div_ceil(64)];
        if init == ChainInit::AllOddOccupied {
            for v in 0..n as u64 {
                if Parity::of(v) == Parity::Odd {
                    occ[(v / 64) as usize] |= 1 << (v % 64);
                }
            }
        }
        Ok(GlauberChain {
            d,
            p_occupy: occupy_probability(lambda),
            occ,
            rng: sampler_rng(seed, 0),
            steps: 0,
        })
    }

    pub fn vertex_count(&self) -> u64 {
        1 << self.d
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    fn is_occupied(&self, v: u64) -> bool {
        self.occ[(v / 64) as usize] >> (v % 64) & 1 == 1
    }

    fn set(&mut self, v: u64, on: bool) {
        let (w, b) = ((v / 64) as usize, v % 64);
        if on {
            self.occ[w] |= 1 << b;
        } else {
            self.occ[w] &= !(1 << b);
        }
    }

    pub fn step(&mut self) {
        let v = self.rng.random_range(0..self.vertex_count());
        let blocked = (0..self.d).any(|c| self.is_occupied(v ^ (1 << c)));
        let on = !blocked && self.rng.random::<f64>() < self.p_occupy;
        self.set(v, on);
        self.steps += 1;
        debug_assert!(on || !self.is_occupied(v));
        debug_assert!(!on || (0..self.d).all(|c| !self.is_occupied(v ^ (1 << c))));
    }

    /// `|V|` single-site updates.
    pub fn sweep(&mut self) {
        for _ in 0..self.vertex_count() {
            self.step();
        }
    }

    pub fn occupied(&self) -> Vec<u64> {
        (0..self.vertex_count()).filter(|&v| self.is_occupied(v)).collect()
    }

    pub fn is_independent(&self) -> bool {
        self.occupied()
            .iter()
            .all(|&v| (0..self.d).all(|c| !self.is_occupied(v ^ (1 << c))))
    }

    /// Default burn-in: `50 |V|` single-site updates.
    pub fn default_burn_in(&self) -> u64 {
        50 * self.vertex_count()
    }

    /// Minority-side censuses taken every `interval` sweeps after `burn_in`
    /// single-site updates.
    pub fn census_run(&mut self, burn_in: u64, snapshots: usize, interval: u64, t_max: usize) -> Result<Vec<DefectCensus>> {
        for _ in 0..burn_in {
            self.step();
        }
        let mut out = Vec::with_capacity(snapshots);
        for _ in 0..snapshots {
            for _ in 0..interval {
                self.sweep();
            }
            out.push(minority_census(self.d, &self.occupied(), t_max)?);
        }
        Ok(out)
    }
}

/// Chi-square test result.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub bins: usize,
    pub samples: usize,
}

/// Pearson chi-square with pooling: categories with expected count below 5
/// are merged, smallest first, until every bin has at least 5.
pub fn chi_square(observed: &[u64], probs: &[f64]) -> Result<FitResult> {
    assert_eq!(observed.len(), probs.len());
    let n: u64 = observed.iter().sum();
    if (n as usize) < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientSamples {
            got: n as usize,
            need: MIN_FIT_SAMPLES,
        });
    }
    let nf = n as f64;
    let mut cells: Vec<(f64, f64)> = observed.iter().zip(probs).map(|(&o, &p)| (o as f64, p * nf)).collect();
    cells.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut pool = (0.0, 0.0);
    for c in cells {
        if c.1 >= 5.0 {
            bins.push(c);
        } else {
            pool.0 += c.0;
            pool.1 += c.1;
        }
    }
    if pool.1 > 0.0 || pool.0 > 0.0 {
        if pool.1 >= 5.0 || bins.is_empty() {
            bins.push(pool);
        } else {
            let last = bins.last_mut().unwrap();
            last.0 += pool.0;
            last.1 += pool.1;
        }
    }
    let statistic: f64 = bins
        .iter()
        .map(|&(o, e)| if e > 0.0 { (o - e).powi(2) / e } else if o > 0.0 { f64::INFINITY } else { 0.0 })
        .sum();
    let df = bins.len().saturating_sub(1);
    let p_value = if df == 0 {
        1.0
    } else if statistic.is_infinite() {
        0.0
    } else {
        ChiSquared::new(df as f64).expect("positive df").sf(statistic)
    };
    Ok(FitResult {
        statistic,
        df,
        p_value,
        bins: bins.len(),
        samples: n as usize,
    })
}

/// Histogram of non-negative integer observations.
pub fn histogram(values: impl IntoIterator<Item = u64>) -> Vec<u64> {
    let mut h: Vec<u64> = Vec::new();
    for v in values {
        if h.len() <= v as usize {
            h.resize(v as usize + 1, 0);
        }
        h[v as usize] += 1;
    }
    h
}

/// Fit of a count histogram to `Poisson(mean)`; the last cell is the tail.
pub fn poisson_fit(hist: &[u64], mean: f64) -> Result<FitResult> {
    let pois = Poisson::new(mean).map_err(|e| Error::OutOfRange(format!("Poisson mean {mean}: {e}")))?;
    let k = hist.len().max(1);
    let mut probs: Vec<f64> = (0..k - 1).map(|i| pois.pmf(i as u64)).collect();
    probs.push(1.0 - probs.iter().sum::<f64>());
    let mut obs = hist.to_vec();
    obs.resize(k, 0);
    chi_square(&obs, &probs)
}

/// Fit of sampled censuses to an exact census law. A census the law gives
/// zero probability makes the statistic infinite.
pub fn census_fit(samples: &[DefectCensus], law: &[(DefectCensus, f64)]) -> Result<FitResult> {
    let index: HashMap<&DefectCensus, usize> = law.iter().enumerate().map(|(i, (c, _))| (c, i)).collect();
    let mut obs = vec![0u64; law.len() + 1];
    for s in samples {
        obs[*index.get(s).unwrap_or(&law.len())] += 1;
    }
    let mut probs: Vec<f64> = law.iter().map(|(_, p)| *p).collect();
    probs.push(0.0);
    chi_square(&obs, &probs)
}

/// Kolmogorov–Smirnov test of values against `Uniform(0, 1)`.
pub fn ks_uniform(values: &[f64]) -> (f64, f64) {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let stat = v
        .iter()
        .enumerate()
        .map(|(i, &x)| ((i as f64 + 1.0) / n - x).max(x - i as f64 / n))
        .fold(0.0, f64::max);
    let lam = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * stat;
    let p = (1..=100)
        .map(|j| {
            let j = j as f64;
            2.0 * if j as i64 % 2 == 1 { 1.0 } else { -1.0 } * (-2.0 * j * j * lam * lam).exp()
        })
        .sum::<f64>()
        .clamp(0.0, 1.0);
    (stat, if lam < 1e-3 { 1.0 } else { p })
}

/// Total variation distance between an empirical histogram and a law.
pub fn total_variation(hist: &[u64], law: &BTreeMap<u64, f64>) -> f64 {
    let n: u64 = hist.iter().sum();
    let keys: std::collections::BTreeSet<u64> = (0..hist.len() as u64).chain(law.keys().copied()).collect();
    0.5 * keys
        .into_iter()
        .map(|k| {
            let emp = hist.get(k as usize).copied().unwrap_or(0) as f64 / n as f64;
            (emp - law.get(&k).copied().unwrap_or(0.0)).abs()
        })
        .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::q;
    use rand_distr::Distribution;

    #[test]
    fn small_partition_functions() {
        assert_eq!(ExactTable::build(1, Parity::Even).unwrap().z(&qi(1)), qi(3));
        assert_eq!(ExactTable::build(2, Parity::Even).unwrap().z(&qi(1)), qi(7));
        assert_eq!(brute_force_z(2, &qi(1)).unwrap(), qi(7));
    }

    #[test]
    fn bipartite_sum_matches_brute_force() {
        for d in 1..=4 {
            let table = ExactTable::build(d, Parity::Even).unwrap();
            for lam in [q(1, 2), qi(1), qi(2), qi(3)] {
                assert_eq!(table.z(&lam), brute_force_z(d, &lam).unwrap(), "d={d}");
            }
        }
    }

    #[test]
    fn side_swap_symmetry() {
        for d in 1..=5 {
            let e = ExactTable::build(d, Parity::Even).unwrap();
            let o = ExactTable::build(d, Parity::Odd).unwrap();
            assert_eq!(e.z(&q(2, 3)), o.z(&q(2, 3)));
        }
    }

    #[test]
    fn split_enumeration_matches_direct() {
        let masks = neighbour_masks(4, Parity::Even);
        let direct = ExactTable::build(4, Parity::Even).unwrap().counts;
        let mitm = meet_in_the_middle(&masks);
        for (a, row) in direct.iter().enumerate() {
            for (b, &c) in row.iter().enumerate() {
                assert_eq!(mitm[a][b], c);
            }
        }
    }

    #[test]
    fn log_z_float_matches_exact() {
        let t = ExactTable::build(5, Parity::Even).unwrap();
        let exact = crate::poly::ln_q(&t.z(&q(3, 2)));
        assert!((t.ln_z_f64(1.5) - exact).abs() < 1e-12);
    }

    #[test]
    fn too_large_is_a_capability_error() {
        assert!(matches!(ExactTable::build(7, Parity::Even), Err(Error::Capability(_))));
        assert!(matches!(exact_defect_distribution(6, 3), Err(Error::Capability(_))));
    }

    #[test]
    fn enumeration_count_matches_z() {
        let mut n = 0u64;
        for_each_independent_set(4, |_| n += 1).unwrap();
        assert_eq!(qi(n as i64), ExactTable::build(4, Parity::Even).unwrap().z(&qi(1)));
    }

    #[test]
    fn distribution_at_d3_matches_direct_enumeration() {
        let dist = exact_defect_distribution(3, 3).unwrap();
        assert_eq!(dist.total_sets(), 35);
        let mut direct: BTreeMap<DefectCensus, u64> = BTreeMap::new();
        let counts = brute_force_counts(3).unwrap();
        assert_eq!(counts.iter().sum::<u64>(), 35);
        for s in 0u64..256 {
            let v = occupied_vertices(s);
            if v.iter().all(|&x| (0..3).all(|c| s >> (x ^ 1 << c) & 1 == 0)) {
                *direct.entry(minority_census(3, &v, 3).unwrap()).or_default() += 1;
            }
        }
        for (c, p) in dist.probabilities(&qi(1)) {
            assert_eq!(p, q(direct[&c] as i64, 35));
        }
    }

    #[test]
    fn minority_never_exceeds_majority() {
        for_each_independent_set(4, |occ| {
            let v = occupied_vertices(occ);
            let side = crate::defects::minority_side(&v);
            let on = v.iter().filter(|&&x| Parity::of(x) == side).count();
            assert!(2 * on <= v.len());
        })
        .unwrap();
    }

    #[test]
    fn exact_sampler_is_uniform_at_lambda_one() {
        let samples = exact_sample(3, 1.0, 100_000, 11).unwrap();
        let mut freq: HashMap<u64, u64> = HashMap::new();
        for s in &samples {
            *freq.entry(*s).or_default() += 1;
        }
        assert_eq!(freq.len(), 35);
        let p: f64 = 1.0 / 35.0;
        let sigma = (1e5 * p * (1.0 - p)).sqrt();
        for &c in freq.values() {
            assert!((c as f64 - 1e5 * p).abs() < 4.0 * sigma);
        }
    }

    #[test]
    fn sampler_is_deterministic_and_tiny_lambda_is_empty() {
        assert_eq!(exact_sample(4, 0.7, 3000, 5).unwrap(), exact_sample(4, 0.7, 3000, 5).unwrap());
        let s = exact_sample(4, 1e-9, 2000, 1).unwrap();
        assert!(s.iter().all(|&x| x == 0));
    }

    #[test]
    fn heat_bath_ratio_is_lambda() {
        for lam in [0.25, 1.0, 3.5] {
            let p = occupy_probability(lam);
            assert!((p / (1.0 - p) - lam).abs() < 1e-12);
        }
    }

    #[test]
    fn glauber_stays_independent() {
        let mut c = GlauberChain::new(6, 1.3, 3, ChainInit::AllOddOccupied).unwrap();
        assert!(c.is_independent());
        for _ in 0..50 {
            c.sweep();
            assert!(c.is_independent());
        }
        let e = GlauberChain::new(4, 1.0, 3, ChainInit::Empty).unwrap();
        assert!(e.occupied().is_empty());
    }

    #[test]
    fn chi_square_pools_and_detects() {
        let mut rng = sampler_rng(1, 0);
        let pois = rand_distr::Poisson::new(0.5).unwrap();
        let hist = histogram((0..10_000).map(|_| pois.sample(&mut rng) as u64));
        assert!(poisson_fit(&hist, 0.5).unwrap().p_value > 1e-4);
        assert!(poisson_fit(&hist, 1.0).unwrap().p_value < 1e-10);
        assert!(matches!(poisson_fit(&[10, 5], 0.5), Err(Error::InsufficientSamples { .. })));
    }

    #[test]
    fn ks_detects_non_uniform() {
        let uniform: Vec<f64> = (0..200).map(|i| (i as f64 + 0.5) / 200.0).collect();
        assert!(ks_uniform(&uniform).1 > 0.9);
        let skewed: Vec<f64> = uniform.iter().map(|x| x * x).collect();
        assert!(ks_uniform(&skewed).1 < 1e-3);
    }
}
