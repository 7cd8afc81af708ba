//! Goodness-of-fit tests and summary statistics.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    /// Asymptotic Kolmogorov p-value with the Stephens finite-sample correction.
    pub p_value: f64,
    pub n: usize,
}

/// One-sample Kolmogorov-Smirnov test against a continuous cdf.
pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<KsResult> {
    if samples.is_empty() {
        return Err(Error::Statistics("KS test on an empty sample".into()));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::Statistics("KS test on a sample containing NaN".into()));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, x) in xs.iter().enumerate() {
        let f = cdf(*x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let sq = n.sqrt();
    let p_value = kolmogorov_survival((sq + 0.12 + 0.11 / sq) * d);
    Ok(KsResult { statistic: d, p_value, n: xs.len() })
}

pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64> {
    Ok(ks_test(samples, cdf)?.statistic)
}

/// `Q(λ) = 2 Σ_{k≥1} (-1)^{k-1} exp(-2k²λ²)`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-300 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

pub fn exp1_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -(-x).exp_m1()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson chi-square of observed counts against expected counts, with
/// `bins - 1 - fitted` degrees of freedom.
pub fn chi_square(observed: &[f64], expected: &[f64], fitted: usize) -> Result<ChiSquareResult> {
    if observed.is_empty() || observed.len() != expected.len() {
        return Err(Error::Statistics("chi-square needs matching, non-empty count vectors".into()));
    }
    if expected.iter().any(|e| !(*e >= 5.0)) {
        return Err(Error::Statistics("chi-square needs expected counts of at least 5 per bin".into()));
    }
    if observed.len() < 2 + fitted {
        return Err(Error::Statistics("chi-square needs at least one degree of freedom".into()));
    }
    let statistic: f64 = observed.iter().zip(expected).map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dof = observed.len() - 1 - fitted;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::Statistics(e.to_string()))?;
    Ok(ChiSquareResult { statistic, dof, p_value: dist.sf(statistic) })
}

/// Chi-square of 1-based indices against Geometric(p) on `{1, 2, ...}`.
/// Consecutive values are merged into bins holding at least 5 expected
/// counts; the remaining tail forms the last bin.
pub fn geometric_chi_square(ks: &[usize], p: f64) -> Result<ChiSquareResult> {
    if ks.is_empty() {
        return Err(Error::Statistics("chi-square on an empty sample".into()));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Statistics(format!("geometric parameter {p} outside (0, 1]")));
    }
    if ks.contains(&0) {
        return Err(Error::Statistics("geometric samples must be at least 1".into()));
    }
    let n = ks.len() as f64;
    // Bin edges [lo, hi) in k, built until the remaining tail is too light.
    let tail = |k: usize| (1.0 - p).powi(k as i32 - 1);
    let mut edges = vec![1usize];
    loop {
        let lo = *edges.last().unwrap();
        let mut hi = lo + 1;
        while n * (tail(lo) - tail(hi)) < 5.0 && n * tail(hi) >= 5.0 {
            hi += 1;
        }
        // A light remainder is absorbed into the current bin.
        if n * tail(hi) < 5.0 {
            break;
        }
        edges.push(hi);
    }
    let bins = edges.len();
    let mut observed = vec![0.0; bins];
    for &k in ks {
        let b = edges.partition_point(|e| *e <= k) - 1;
        observed[b] += 1.0;
    }
    let expected: Vec<f64> = (0..bins)
        .map(|b| {
            let hi = if b + 1 < bins { tail(edges[b + 1]) } else { 0.0 };
            n * (tail(edges[b]) - hi)
        })
        .collect();
    chi_square(&observed, &expected, 0)
}

/// Sample mean and standard error of `x^k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moment {
    pub order: u32,
    pub value: f64,
    pub std_error: f64,
    /// `order!`, the Exp(1) reference value.
    pub exp1_reference: f64,
}

impl Moment {
    pub fn within(&self, band: f64) -> bool {
        (self.value - self.exp1_reference).abs() <= band * self.std_error
    }
}

pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn moments(xs: &[f64], max_order: u32) -> Vec<Moment> {
    let mut fact = 1.0;
    (1..=max_order)
        .map(|k| {
            fact *= k as f64;
            let powered: Vec<f64> = xs.iter().map(|x| x.powi(k as i32)).collect();
            let (value, std_error) = mean_and_se(&powered);
            Moment { order: k, value, std_error, exp1_reference: fact }
        })
        .collect()
}

/// Weighted least-squares line `y = a + b x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    /// Standard error of the slope propagated from the per-point errors.
    pub slope_se: f64,
}

/// Fits with weights `1/σ_i²`; with all `σ_i` absent the fit is ordinary
/// least squares and the slope error comes from the residuals.
pub fn fit_line(xs: &[f64], ys: &[f64], sigmas: Option<&[f64]>) -> Result<LineFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Statistics("line fit needs at least two points".into()));
    }
    let w: Vec<f64> = match sigmas {
        Some(s) if s.len() == xs.len() && s.iter().all(|v| *v > 0.0 && v.is_finite()) => {
            s.iter().map(|v| 1.0 / (v * v)).collect()
        }
        Some(_) => return Err(Error::Statistics("line fit errors must be positive and finite".into())),
        None => vec![1.0; xs.len()],
    };
    let sw: f64 = w.iter().sum();
    let mx = xs.iter().zip(&w).map(|(x, w)| w * x).sum::<f64>() / sw;
    let my = ys.iter().zip(&w).map(|(y, w)| w * y).sum::<f64>() / sw;
    let sxx: f64 = xs.iter().zip(&w).map(|(x, w)| w * (x - mx) * (x - mx)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Statistics("line fit needs distinct abscissae".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).zip(&w).map(|((x, y), w)| w * (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_se = if sigmas.is_some() {
        (1.0 / sxx).sqrt()
    } else if xs.len() > 2 {
        let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
        (rss / (xs.len() - 2) as f64 / sxx).sqrt()
    } else {
        f64::NAN
    };
    Ok(LineFit { intercept, slope, slope_se })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ks_on_exact_quantiles() {
        let n = 400;
        let xs: Vec<f64> = (0..n).map(|i| -(1.0 - (i as f64 + 0.5) / n as f64).ln()).collect();
        let d = ks_statistic(&xs, exp1_cdf).unwrap();
        assert!((d - 0.5 / n as f64).abs() < 1e-12);
        assert!(ks_test(&[], exp1_cdf).is_err());
    }

    #[test]
    fn ks_rejects_uniform_against_exponential() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<f64> = (0..1000).map(|_| rng.random::<f64>()).collect();
        let r = ks_test(&xs, exp1_cdf).unwrap();
        assert!(r.p_value < 1e-6, "{r:?}");
    }

    #[test]
    fn kolmogorov_distribution_values() {
        // Q(1.36) ≈ 0.0495 and Q(1.63) ≈ 0.0098 (classical critical values).
        assert!((kolmogorov_survival(1.358) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_survival(1.628) - 0.01).abs() < 5e-4);
        assert_eq!(kolmogorov_survival(0.0), 1.0);
    }

    #[test]
    fn chi_square_examples() {
        let r = chi_square(&[10.0, 20.0, 30.0], &[10.0, 20.0, 30.0], 0).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.dof, 2);
        assert!(chi_square(&[1.0, 2.0], &[1.0, 2.0], 0).is_err());
        assert!(chi_square(&[], &[], 0).is_err());
        let r = chi_square(&[30.0, 10.0], &[20.0, 20.0], 0).unwrap();
        assert!((r.statistic - 10.0).abs() < 1e-12);
        assert!((r.p_value - 0.0015654).abs() < 1e-6);
    }

    #[test]
    fn geometric_chi_square_accepts_geometric_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = 0.2;
        let ks: Vec<usize> = (0..20_000)
            .map(|_| {
                let mut k = 1;
                while rng.random::<f64>() >= p {
                    k += 1;
                }
                k
            })
            .collect();
        let r = geometric_chi_square(&ks, p).unwrap();
        assert!(r.p_value > 0.01, "{r:?}");
        assert!(r.dof > 10);
        let r = geometric_chi_square(&ks, 0.25).unwrap();
        assert!(r.p_value < 1e-6);
    }

    #[test]
    fn moments_of_constant_sample() {
        let m = moments(&[2.0; 10], 3);
        assert_eq!(m[2].value, 8.0);
        assert_eq!(m[2].std_error, 0.0);
        assert_eq!(m[2].exp1_reference, 6.0);
    }

    #[test]
    fn line_fit_recovers_power_law() {
        let xs: Vec<f64> = [10.0f64, 20.0, 40.0].iter().map(|x| x.ln()).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 1.5 * x + 0.3).collect();
        let f = fit_line(&xs, &ys, None).unwrap();
        assert!((f.slope - 1.5).abs() < 1e-12 && (f.intercept - 0.3).abs() < 1e-12);
        let f = fit_line(&xs, &ys, Some(&[0.1, 0.1, 0.1])).unwrap();
        assert!((f.slope - 1.5).abs() < 1e-12);
        let dx = xs[1] - xs[0];
        assert!((f.slope_se - 0.1 / (2.0 * dx * dx).sqrt()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn ks_is_order_invariant(mut xs in proptest::collection::vec(0.0f64..10.0, 1..200)) {
            let a = ks_statistic(&xs, exp1_cdf).unwrap();
            xs.reverse();
            let b = ks_statistic(&xs, exp1_cdf).unwrap();
            prop_assert_eq!(a, b);
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }
}
