//! Truncated cluster expansion for `log Z`, the `i(Q_d)` series and the
//! error-bound bookkeeping that goes with them.
//!
//! `Z(λ) = 2 (1+λ)^{2^{d-1}} exp(L_1 + .. + L_k + ε_k)`. The error terms are
//! reported by their functional form with every hidden constant set to 1, so
//! they are useful for ordering and monotonicity only.

use num_traits::{One, Zero};
use serde::Serialize;
use serde_json::{json, Value};

use crate::cluster_enum::{compute_lk_symbolic, LkValue};
use crate::error::{Error, Result};
use crate::hypercube::{Dimension, Fugacity, ModelParams};
use crate::poly::{ln_q, q, q_to_f64, qi, qpow, Poly, Q};

pub const BOUND_NOTE: &str = "up to unspecified constant";
pub const CLOSURE_NOTE: &str =
    "polymer closure cap |[S]| <= 2^(d-2) not enforced in truncated enumeration";

/// Piecewise `γ(d, k)` from the Kotecký–Preiss verification.
pub fn gamma(d: u32, k: u64, lambda: f64) -> f64 {
    let df = d as f64;
    let kf = k as f64;
    let lu = (1.0 + lambda).ln();
    if kf <= df / 10.0 {
        lu * (df * kf - 3.0 * kf * kf) - 7.0 * kf * df.ln()
    } else if kf <= df.powi(4) {
        df * lu * kf / 20.0
    } else {
        kf / df.powf(1.5)
    }
}

/// Natural log of `d^{7k-3/2} 2^d (1+λ)^{-dk+3k^2}`, the bound on
/// `|T_k - log Ξ|` where `T_k` sums clusters of size below `k`.
pub fn log_truncation_bound(d: u32, k: u64, lambda: f64) -> f64 {
    let (df, kf) = (d as f64, k as f64);
    (7.0 * kf - 1.5) * df.ln() + df * std::f64::consts::LN_2
        + (-df * kf + 3.0 * kf * kf) * (1.0 + lambda).ln()
}

pub fn truncation_bound(d: u32, k: u64, lambda: f64) -> f64 {
    log_truncation_bound(d, k, lambda).exp()
}

/// Natural log of `2^d λ^{k+1} d^{2k} (1+λ)^{-d(k+1)}`, the order of the
/// error after keeping `L_1 .. L_k`.
pub fn log_error_form(d: u32, k: u64, lambda: f64) -> f64 {
    let (df, kf) = (d as f64, k as f64);
    df * std::f64::consts::LN_2 + (kf + 1.0) * lambda.ln() + 2.0 * kf * df.ln()
        - df * (kf + 1.0) * (1.0 + lambda).ln()
}

#[derive(Clone, Debug, Serialize)]
pub struct ErrorBound {
    /// `2^d λ^{k+1} d^{2k} (1+λ)^{-d(k+1)}`.
    pub form: &'static str,
    pub value: f64,
    pub log_value: f64,
    /// Bound on `|T_{k+1} - log Ξ|`, stated for `d` sufficiently large.
    pub truncation_log_value: f64,
    pub note: &'static str,
}

impl ErrorBound {
    pub fn new(d: u32, k: usize, lambda: f64) -> ErrorBound {
        let log_value = log_error_form(d, k as u64, lambda);
        ErrorBound {
            form: "2^d * lambda^(k+1) * d^(2k) * (1+lambda)^(-d(k+1))",
            value: log_value.exp(),
            log_value,
            truncation_log_value: log_truncation_bound(d, k as u64 + 1, lambda),
            note: BOUND_NOTE,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TruncatedEstimate {
    pub d: u32,
    pub lambda: String,
    pub k: usize,
    /// `log 2 + 2^{d-1} log(1+λ)`.
    pub log_ground: f64,
    /// `L_1 + .. + L_k`.
    pub log_correction: f64,
    pub log_z: f64,
    pub l_values: Vec<f64>,
    /// Exact `L_j` when `λ` is rational.
    pub l_exact: Option<Vec<String>>,
    pub error_bound: ErrorBound,
    pub valid: bool,
    pub notes: Vec<String>,
}

impl TruncatedEstimate {
    /// One JSON record with the documented keys first.
    pub fn to_json(&self) -> Value {
        json!({
            "d": self.d,
            "lambda": self.lambda,
            "k": self.k,
            "logZ_estimate": self.log_z,
            "error_bound_form": {
                "form": self.error_bound.form,
                "value": self.error_bound.value,
                "log_value": self.error_bound.log_value,
                "truncation_log_value": self.error_bound.truncation_log_value,
                "note": self.error_bound.note,
            },
            "L_values": self.l_values,
            "L_exact": self.l_exact,
            "validity_flag": self.valid,
            "log_ground": self.log_ground,
            "log_correction": self.log_correction,
            "notes": self.notes,
        })
    }
}

fn common_notes(params: &ModelParams) -> Vec<String> {
    let mut notes = vec![CLOSURE_NOTE.to_string()];
    if !params.valid {
        notes.push(format!(
            "lambda below the validity heuristic C0*log(d)/d^(1/3) with placeholder C0 = {}",
            crate::hypercube::VALIDITY_C0
        ));
    }
    if params.lambda.to_f64() > 2.0 {
        notes.push("lambda > 2: bounded-lambda formula kept; all L_k are tiny here".into());
    }
    notes
}

fn log_ground(d: u32, lambda: f64) -> f64 {
    std::f64::consts::LN_2 + (d as f64 - 1.0).exp2() * (1.0 + lambda).ln()
}

/// `log Z ≈ log 2 + 2^{d-1} log(1+λ) + Σ_{j ≤ k} L_j`; `k = 0` keeps only the
/// ground-state term.
pub fn approx_log_z(params: &ModelParams, k: usize) -> Result<TruncatedEstimate> {
    let d = params.d.concrete()?;
    let lam = params.lambda.to_f64();
    let lks: Vec<_> = (1..=k).map(compute_lk_symbolic).collect::<Result<_>>()?;
    let (l_values, l_exact) = match &params.lambda {
        Fugacity::Exact(l) => {
            let exact: Vec<Q> = lks.iter().map(|v| v.eval_exact(d, l)).collect();
            (exact.iter().map(q_to_f64).collect(), Some(exact.iter().map(Q::to_string).collect()))
        }
        Fugacity::Approx(x) => (
            lks.iter().map(|v| v.eval_f64(d, *x)).collect::<Result<Vec<_>>>()?,
            None,
        ),
    };
    let log_correction: f64 = l_values.iter().sum();
    let ground = log_ground(d, lam);
    Ok(TruncatedEstimate {
        d,
        lambda: params.lambda.to_string(),
        k,
        log_ground: ground,
        log_correction,
        log_z: ground + log_correction,
        l_values,
        l_exact,
        error_bound: ErrorBound::new(d, k, lam),
        valid: params.valid,
        notes: common_notes(params),
    })
}

/// `|log Z - (log 2 + 2^{d-1} log(1+λ) + L_1 + .. + L_k)|` for an exact `Z`.
/// The ratio `Z / (2(1+λ)^{2^{d-1}})` is formed exactly before the logarithm,
/// so nothing large is ever rounded.
pub fn truncation_residual(z: &Q, d: u32, lambda: &Q, lks: &[&LkValue]) -> f64 {
    let u = lambda + Q::one();
    let ground = qpow(&u, 1i64 << (d - 1)) * qi(2);
    let log_ratio = ln_q(&(z / ground));
    let sum = lks.iter().fold(Q::zero(), |acc, v| acc + v.eval_exact(d, lambda));
    (log_ratio - q_to_f64(&sum)).abs()
}

/// `i(Q_d) ≈ 2√e 2^{2^{d-1}} Σ_{m < order} c_m(d) 2^{-md}`, from
/// `exp(L_2 + L_3 + ..)` at `λ = 1` with `L_1 = 1/2` absorbed into `√e`.
#[derive(Clone, Debug, PartialEq)]
pub struct IqdSeries {
    /// `c_0 = 1, c_1, ..`; polynomials in `d`.
    pub coeffs: Vec<Poly>,
}

pub fn iqd_series(order: usize) -> Result<IqdSeries> {
    if order == 0 {
        return Err(Error::OutOfRange("series order must be at least 1".into()));
    }
    // F(x) = Σ_{k≥2} p_k(d) x^{k-1} with L_k = 2^{-(k-1)d} p_k(d) at λ = 1.
    let f: Vec<Poly> = (2..=order)
        .map(|k| compute_lk_symbolic(k).map(|v| v.at_lambda_one()))
        .collect::<Result<_>>()?;
    let mut e = vec![Poly::constant(qi(1))];
    for n in 1..order {
        let mut acc = Poly::zero();
        for i in 1..=n {
            acc = &acc + &(&f[i - 1] * &e[n - i]).scale(&qi(i as i64));
        }
        e.push(acc.scale(&q(1, n as i64)));
    }
    Ok(IqdSeries { coeffs: e })
}

impl IqdSeries {
    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    /// `ln` of the series value at concrete `d`.
    pub fn log_value(&self, d: u32) -> f64 {
        let x = (-(d as f64)).exp2();
        let sum: f64 = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(m, c)| c.eval_f64(d as f64) * x.powi(m as i32))
            .sum();
        std::f64::consts::LN_2 + 0.5 + (d as f64 - 1.0).exp2() * std::f64::consts::LN_2 + sum.ln()
    }

    pub fn pretty(&self) -> String {
        let terms: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(m, c)| match m {
                0 => c.pretty("d"),
                1 => format!("{} * 2^-d", c.pretty("d")),
                _ => format!("{} * 2^-{m}d", c.pretty("d")),
            })
            .collect();
        format!("2*sqrt(e)*2^(2^(d-1)) * (1 + {})", terms[1..].join(" + ")).replace("(1 + )", "1")
    }
}

/// Closed forms of `L_1` and `L_2`: `L_1 = (λ/2)(2/u)^d` and
/// `L_2 = (λ/2)(2/u)^d ((2λ² + λ³) d(d-1) - 2λ) / (4 u^d)` with `u = 1 + λ`.
pub fn closed_form_l1_l2(d: u32, lambda: &Q) -> (Q, Q) {
    let u = lambda + Q::one();
    let dd = qi(d as i64);
    let l1 = lambda * qpow(&(qi(2) / &u), d as i64) * q(1, 2);
    let lam2 = lambda * lambda;
    let bracket = (qi(2) * &lam2 + &lam2 * lambda) * &dd * (&dd - qi(1)) - qi(2) * lambda;
    let l2 = &l1 * bracket / (qi(4) * qpow(&u, d as i64));
    (l1, l2)
}

/// `Z ≈ 2(1+λ)^{2^{d-1}} exp(L_1 + .. + L_{t-1})`, with the closed forms
/// for `L_1, L_2` and the cluster engine beyond.
pub fn closed_form_z(params: &ModelParams, t: usize) -> Result<TruncatedEstimate> {
    let d = params.d.concrete()?;
    if t == 0 {
        return Err(Error::OutOfRange("t must be at least 1".into()));
    }
    let lam = params.lambda.to_f64();
    let mut notes = common_notes(params);
    let threshold = crate::defects::threshold_lambda_t(d, t as u32, 0.0);
    if lam < threshold {
        notes.push(format!(
            "lambda = {lam} is below the t = {t} threshold {threshold:.6} (s = 0); the closed form may be inaccurate"
        ));
    }
    let exact = params.lambda.exact().cloned();
    let mut l_values = Vec::new();
    let mut l_exact = Vec::new();
    for j in 1..t {
        match (&exact, j) {
            (Some(l), 1 | 2) => {
                let (l1, l2) = closed_form_l1_l2(d, l);
                let v = if j == 1 { l1 } else { l2 };
                l_values.push(q_to_f64(&v));
                l_exact.push(v.to_string());
            }
            (None, 1 | 2) => {
                let u = 1.0 + lam;
                let df = d as f64;
                let l1 = 0.5 * lam * ((2.0f64).ln() - u.ln()).mul_add(df, 0.0).exp();
                let v = if j == 1 {
                    l1
                } else {
                    l1 * ((2.0 * lam * lam + lam.powi(3)) * df * (df - 1.0) - 2.0 * lam)
                        / (4.0 * u.powf(df))
                };
                l_values.push(v);
            }
            (Some(l), _) => {
                let v = compute_lk_symbolic(j)?.eval_exact(d, l);
                l_values.push(q_to_f64(&v));
                l_exact.push(v.to_string());
            }
            (None, _) => l_values.push(compute_lk_symbolic(j)?.eval_f64(d, lam)?),
        }
    }
    let log_correction: f64 = l_values.iter().sum();
    let ground = log_ground(d, lam);
    Ok(TruncatedEstimate {
        d,
        lambda: params.lambda.to_string(),
        k: t - 1,
        log_ground: ground,
        log_correction,
        log_z: ground + log_correction,
        l_values,
        l_exact: exact.map(|_| l_exact),
        error_bound: ErrorBound::new(d, t - 1, lam),
        valid: params.valid,
        notes,
    })
}

/// Convenience for callers holding a bare dimension and fugacity.
pub fn params(d: u32, lambda: Fugacity) -> Result<ModelParams> {
    ModelParams::new(Dimension::Concrete(d), lambda)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_branches() {
        let g = gamma(100, 1, 1.0);
        assert!((g - (97.0 * 2f64.ln() - 7.0 * 100f64.ln())).abs() < 1e-12);
        let g = gamma(20, 3, 1.0);
        assert!((g - 20.0 * 2f64.ln() * 3.0 / 20.0).abs() < 1e-12);
        let g = gamma(10, 100_000, 1.0);
        assert!((g - 1e5 / 10f64.powf(1.5)).abs() < 1e-9);
    }

    #[test]
    fn truncation_bound_values() {
        let b = log_truncation_bound(30, 2, 1.0);
        let expect = 12.5 * 30f64.ln() + 30.0 * 2f64.ln() - 48.0 * 2f64.ln();
        assert!((b - expect).abs() < 1e-9);
        // log(bound(d,3)/bound(d,2)) = 7 log d - (d - 15) log 2 changes sign
        // between d = 55 and d = 56.
        for d in 40..=55 {
            assert!(truncation_bound(d, 3, 1.0) > truncation_bound(d, 2, 1.0), "d={d}");
        }
        for d in 56..200 {
            assert!(truncation_bound(d, 3, 1.0) < truncation_bound(d, 2, 1.0), "d={d}");
        }
        let tail: Vec<f64> = [1e2, 1e4, 1e8, 1e12].iter().map(|&l| truncation_bound(10, 2, l)).collect();
        assert!(tail.windows(2).all(|w| w[1] < w[0]));
        assert!(tail[3] < 1e-60);
    }

    #[test]
    fn error_form_decreases_for_valid_parameters() {
        for d in 5..=40u32 {
            let lo = crate::hypercube::validity_threshold(d);
            for step in 0..20 {
                let lam = lo + step as f64 * 0.25;
                let vals: Vec<f64> = (1..=4).map(|k| log_error_form(d, k, lam)).collect();
                assert!(vals.windows(2).all(|w| w[1] < w[0]), "d={d} λ={lam}");
            }
        }
    }

    #[test]
    fn ground_only_estimate() {
        let p = params(5, Fugacity::Exact(qi(1))).unwrap();
        let e = approx_log_z(&p, 0).unwrap();
        assert!((e.log_z - (2f64.ln() + 16.0 * 2f64.ln())).abs() < 1e-12);
        assert!(e.l_values.is_empty());
    }

    #[test]
    fn adding_a_term_adds_exactly_that_term() {
        let p = params(7, Fugacity::Exact(q(3, 2))).unwrap();
        let a = approx_log_z(&p, 2).unwrap();
        let b = approx_log_z(&p, 3).unwrap();
        assert_eq!(&b.l_values[..2], &a.l_values[..]);
        let l3 = compute_lk_symbolic(3).unwrap().eval_exact(7, &q(3, 2));
        assert!((b.log_correction - a.log_correction - q_to_f64(&l3)).abs() < 1e-15);
    }

    #[test]
    fn large_d_recovers_sqrt_e_constant() {
        let p = params(40, Fugacity::Exact(qi(1))).unwrap();
        let e = approx_log_z(&p, 1).unwrap();
        assert!((e.log_correction - 0.5).abs() < 1e-15);
        assert!((e.log_z - (2.0 * 0.5f64.exp()).ln() - 2f64.powi(39) * 2f64.ln()).abs() < 1e-3);
    }

    #[test]
    fn series_coefficients() {
        let s = iqd_series(3).unwrap();
        assert_eq!(s.coeffs[0], Poly::constant(qi(1)));
        assert_eq!(s.coeffs[1], Poly::from_ints(&[-2, -3, 3]).scale(&q(1, 8)));
        assert_eq!(
            s.coeffs[2],
            Poly::from_ints(&[76, 436, -33, -646, 243]).scale(&q(1, 384))
        );
        assert_eq!(iqd_series(1).unwrap().coeffs.len(), 1);
    }

    #[test]
    fn closed_forms_match_engine() {
        let l1 = compute_lk_symbolic(1).unwrap();
        let l2 = compute_lk_symbolic(2).unwrap();
        for d in [3u32, 6, 11] {
            for lam in [q(1, 3), qi(1), q(5, 2)] {
                let (c1, c2) = closed_form_l1_l2(d, &lam);
                assert_eq!(c1, l1.eval_exact(d, &lam));
                assert_eq!(c2, l2.eval_exact(d, &lam));
            }
        }
    }

    #[test]
    fn closed_form_with_no_terms_is_ground_state() {
        let p = params(8, Fugacity::Exact(qi(1))).unwrap();
        let e = closed_form_z(&p, 1).unwrap();
        assert_eq!(e.log_correction, 0.0);
        let a = approx_log_z(&p, 2).unwrap();
        let c = closed_form_z(&p, 3).unwrap();
        assert!((a.log_z - c.log_z).abs() < 1e-12);
    }

    #[test]
    fn float_path_matches_exact_path() {
        let a = approx_log_z(&params(9, Fugacity::Exact(q(6, 5))).unwrap(), 3).unwrap();
        let b = approx_log_z(&params(9, Fugacity::Approx(1.2)).unwrap(), 3).unwrap();
        assert!((a.log_z - b.log_z).abs() < 1e-12);
        let c = closed_form_z(&params(9, Fugacity::Approx(1.2)).unwrap(), 3).unwrap();
        assert!((a.l_values[1] - c.l_values[1]).abs() < 1e-15);
    }
}
