//! Rank-based nonparametric tests and the distribution functions behind them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("need at least {need} groups, got {got}")]
    TooFewGroups { need: usize, got: usize },
    #[error("group {0} is empty")]
    EmptyGroup(usize),
    #[error("need at least {need} observations, got {got}")]
    TooFewObservations { need: usize, got: usize },
    #[error("inputs differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("input is constant; the statistic is undefined")]
    DegenerateInput,
    #[error("non-finite value in input")]
    NonFinite,
    #[error("p-value {0} outside [0, 1]")]
    InvalidPValue(f64),
    #[error("exact permutation p-values are limited to n <= {max}, got {got}")]
    TooLargeForExact { max: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    KruskalWallis,
    MannWhitneyU,
    Spearman,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatResult {
    pub test: TestKind,
    pub statistic: f64,
    pub df: Option<u32>,
    /// Absent for Spearman, which reports only the coefficient.
    pub p_value: Option<f64>,
    pub p_adjusted: Option<f64>,
    pub tie_corrected: bool,
    /// Signed normal deviate of U_a (Mann-Whitney only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
}

impl StatResult {
    fn new(test: TestKind, statistic: f64, df: Option<u32>, p_value: Option<f64>, tie_corrected: bool) -> Self {
        Self {
            test,
            statistic,
            df,
            p_value: p_value.map(|p| p.clamp(0.0, 1.0)),
            p_adjusted: None,
            tie_corrected,
            z: None,
        }
    }
}

fn check_finite(values: &[f64]) -> Result<(), StatsError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(StatsError::NonFinite)
    }
}

/// Ranks 1..=n with tied values sharing the mean of their rank span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = rank;
        }
        start = end;
    }
    ranks
}

/// Σ(t³ − t) over tie groups.
fn tie_sum(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut sum = 0.0;
    let mut start = 0;
    while start < sorted.len() {
        let mut end = start + 1;
        while end < sorted.len() && sorted[end] == sorted[start] {
            end += 1;
        }
        let t = (end - start) as f64;
        sum += t * t * t - t;
        start = end;
    }
    sum
}

// ---- distribution functions ----

#[allow(clippy::excessive_precision)]
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// ln Γ(x) for x > 0 (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + 7.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

const EPS: f64 = 1e-16;
const MAX_ITER: usize = 10_000;

fn lower_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut n = a;
    for _ in 0..MAX_ITER {
        n += 1.0;
        term *= x / n;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

fn upper_fraction(a: f64, x: f64) -> f64 {
    // Modified Lentz evaluation of the continued fraction for Q(a, x).
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Regularized upper incomplete gamma Q(a, x).
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        (1.0 - lower_series(a, x)).clamp(0.0, 1.0)
    } else {
        upper_fraction(a, x).clamp(0.0, 1.0)
    }
}

/// Upper tail of the chi-square distribution.
pub fn chi_square_sf(x: f64, df: u32) -> f64 {
    assert!(df > 0, "degrees of freedom must be positive");
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    gamma_q(df as f64 / 2.0, x / 2.0)
}

pub fn erfc(x: f64) -> f64 {
    if x >= 0.0 {
        gamma_q(0.5, x * x)
    } else {
        2.0 - gamma_q(0.5, x * x)
    }
}

/// Standard normal CDF Φ(z).
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal upper tail 1 − Φ(z), accurate in the far tail.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

// ---- tests ----

fn check_groups(groups: &[Vec<f64>]) -> Result<usize, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::TooFewGroups { need: 2, got: groups.len() });
    }
    if let Some(i) = groups.iter().position(|g| g.is_empty()) {
        return Err(StatsError::EmptyGroup(i));
    }
    let n: usize = groups.iter().map(Vec::len).sum();
    if n < 3 {
        return Err(StatsError::TooFewObservations { need: 3, got: n });
    }
    for g in groups {
        check_finite(g)?;
    }
    Ok(n)
}

/// Tie-corrected H from pooled ranks; None when every value is tied.
fn h_statistic(sizes: &[usize], ranks: &[f64], ties: f64) -> Option<f64> {
    let n = ranks.len() as f64;
    let correction = 1.0 - ties / (n * n * n - n);
    if correction <= 0.0 {
        return None;
    }
    let mut offset = 0;
    let mut sum = 0.0;
    for &size in sizes {
        let r: f64 = ranks[offset..offset + size].iter().sum();
        sum += r * r / size as f64;
        offset += size;
    }
    let h = 12.0 / (n * (n + 1.0)) * sum - 3.0 * (n + 1.0);
    Some((h / correction).max(0.0))
}

/// Kruskal-Wallis H with tie correction and a chi-square p-value on k − 1
/// degrees of freedom. All-identical input gives H = 0, p = 1.
pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<StatResult, StatsError> {
    check_groups(groups)?;
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    let ranks = average_ranks(&pooled);
    let ties = tie_sum(&pooled);
    let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
    let df = (groups.len() - 1) as u32;
    Ok(match h_statistic(&sizes, &ranks, ties) {
        Some(h) => StatResult::new(TestKind::KruskalWallis, h, Some(df), Some(chi_square_sf(h, df)), ties > 0.0),
        None => StatResult::new(TestKind::KruskalWallis, 0.0, Some(df), Some(1.0), true),
    })
}

pub const EXACT_MAX_N: usize = 10;

/// Kruskal-Wallis with an exact permutation p-value: the share of all
/// distinct regroupings of the pooled values whose H is at least the
/// observed one. Limited to n ≤ 10.
pub fn kruskal_wallis_exact(groups: &[Vec<f64>]) -> Result<StatResult, StatsError> {
    let n = check_groups(groups)?;
    if n > EXACT_MAX_N {
        return Err(StatsError::TooLargeForExact { max: EXACT_MAX_N, got: n });
    }
    let mut result = kruskal_wallis(groups)?;
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    let ranks = average_ranks(&pooled);
    let ties = tie_sum(&pooled);
    let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
    let Some(observed) = h_statistic(&sizes, &ranks, ties) else {
        return Ok(result);
    };

    // Enumerate assignments of pooled positions to groups, one labelling per
    // multiset partition with the given sizes.
    let mut remaining = sizes.clone();
    let mut labels = vec![0usize; n];
    let (mut hits, mut total) = (0u64, 0u64);
    fn walk(
        pos: usize,
        labels: &mut [usize],
        remaining: &mut [usize],
        ranks: &[f64],
        sizes: &[usize],
        ties: f64,
        observed: f64,
        hits: &mut u64,
        total: &mut u64,
    ) {
        if pos == labels.len() {
            let mut arranged = Vec::with_capacity(ranks.len());
            for g in 0..sizes.len() {
                arranged.extend((0..labels.len()).filter(|&i| labels[i] == g).map(|i| ranks[i]));
            }
            let h = h_statistic(sizes, &arranged, ties).unwrap_or(0.0);
            *total += 1;
            if h >= observed - 1e-12 {
                *hits += 1;
            }
            return;
        }
        for g in 0..remaining.len() {
            if remaining[g] > 0 {
                remaining[g] -= 1;
                labels[pos] = g;
                walk(pos + 1, labels, remaining, ranks, sizes, ties, observed, hits, total);
                remaining[g] += 1;
            }
        }
    }
    walk(0, &mut labels, &mut remaining, &ranks, &sizes, ties, observed, &mut hits, &mut total);
    result.p_value = Some(hits as f64 / total as f64);
    Ok(result)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    #[default]
    TwoSided,
    /// The first sample tends to be smaller.
    Less,
    /// The first sample tends to be larger.
    Greater,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MwuOptions {
    pub alternative: Alternative,
    pub continuity: bool,
}

impl Default for MwuOptions {
    fn default() -> Self {
        Self {
            alternative: Alternative::TwoSided,
            continuity: true,
        }
    }
}

/// Mann-Whitney U with the normal approximation: tie-corrected variance and
/// optional 0.5 continuity correction. The statistic is min(U_a, U_b).
pub fn mann_whitney_u(a: &[f64], b: &[f64], opts: MwuOptions) -> Result<StatResult, StatsError> {
    if a.is_empty() {
        return Err(StatsError::EmptyGroup(0));
    }
    if b.is_empty() {
        return Err(StatsError::EmptyGroup(1));
    }
    check_finite(a)?;
    check_finite(b)?;
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = average_ranks(&pooled);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let n = na + nb;
    let ra: f64 = ranks[..a.len()].iter().sum();
    let ua = ra - na * (na + 1.0) / 2.0;
    let ub = na * nb - ua;
    let u = ua.min(ub);
    let ties = tie_sum(&pooled);
    let mean = na * nb / 2.0;
    let var = na * nb / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
    let mut result = StatResult::new(TestKind::MannWhitneyU, u, None, Some(1.0), ties > 0.0);
    if var <= 0.0 || !var.is_finite() {
        result.z = Some(0.0);
        return Ok(result);
    }
    let sd = var.sqrt();
    let cc = if opts.continuity { 0.5 } else { 0.0 };
    let diff = ua - mean;
    let (z, p) = match opts.alternative {
        Alternative::TwoSided => {
            let z = ((diff.abs() - cc).max(0.0) / sd).copysign(diff);
            (z, (2.0 * normal_sf(z.abs())).min(1.0))
        }
        Alternative::Less => {
            let z = (diff + cc) / sd;
            (z, normal_cdf(z))
        }
        Alternative::Greater => {
            let z = (diff - cc) / sd;
            (z, normal_sf(z))
        }
    };
    result.z = Some(z);
    result.p_value = Some(p.clamp(0.0, 1.0));
    Ok(result)
}

/// Holm step-down adjustment, returned in input order.
pub fn holm_adjust(p_values: &[f64]) -> Result<Vec<f64>, StatsError> {
    if let Some(&bad) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(StatsError::InvalidPValue(bad));
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]).then(a.cmp(&b)));
    let mut adjusted = vec![0.0; m];
    let mut running: f64 = 0.0;
    for (rank, &idx) in order.iter().enumerate() {
        let candidate = ((m - rank) as f64 * p_values[idx]).min(1.0);
        running = running.max(candidate);
        adjusted[idx] = running;
    }
    Ok(adjusted)
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's ρ as the Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<StatResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(StatsError::TooFewObservations { need: 3, got: x.len() });
    }
    check_finite(x)?;
    check_finite(y)?;
    let rho = pearson(&average_ranks(x), &average_ranks(y)).ok_or(StatsError::DegenerateInput)?;
    let tied = tie_sum(x) > 0.0 || tie_sum(y) > 0.0;
    Ok(StatResult::new(TestKind::Spearman, rho, None, None, tied))
}

/// An omnibus Kruskal-Wallis test across groups plus Holm-adjusted
/// Mann-Whitney comparisons of every other group against one reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupComparison {
    pub overall: StatResult,
    /// (group index, result) for each non-reference group, in input order.
    pub pairwise: Vec<(usize, StatResult)>,
}

pub fn compare_against(
    groups: &[Vec<f64>],
    reference: usize,
    opts: MwuOptions,
) -> Result<GroupComparison, StatsError> {
    let overall = kruskal_wallis(groups)?;
    let mut pairwise = Vec::new();
    for (i, g) in groups.iter().enumerate() {
        if i != reference {
            pairwise.push((i, mann_whitney_u(&groups[reference], g, opts)?));
        }
    }
    let raw: Vec<f64> = pairwise.iter().map(|(_, r)| r.p_value.unwrap_or(1.0)).collect();
    for ((_, r), adj) in pairwise.iter_mut().zip(holm_adjust(&raw)?) {
        r.p_adjusted = Some(adj);
    }
    Ok(GroupComparison { overall, pairwise })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

    #[test]
    fn rank_examples() {
        assert_eq!(average_ranks(&[10.0, 20.0, 30.0]), vec![1.0, 2.0, 3.0]);
        assert_eq!(average_ranks(&[1.0, 2.0, 2.0, 4.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(average_ranks(&[5.0, 5.0, 5.0]), vec![2.0, 2.0, 2.0]);
        assert_eq!(average_ranks(&[3.0, 1.0, 2.0]), vec![3.0, 1.0, 2.0]);
    }

    /// Q(k, x/2) for even df = 2k has the closed form e^{-x/2} Σ_{i<k} (x/2)^i / i!.
    fn even_df_sf(x: f64, df: u32) -> f64 {
        let half = x / 2.0;
        let mut term = 1.0;
        let mut sum = 1.0;
        for i in 1..df / 2 {
            term *= half / i as f64;
            sum += term;
        }
        (-half).exp() * sum
    }

    #[test]
    fn chi_square_even_df_closed_form() {
        for df in (2..=50).step_by(2) {
            for k in 0..=400 {
                let x = k as f64 * 0.5;
                let want = even_df_sf(x, df);
                let got = chi_square_sf(x, df);
                assert!((got - want).abs() < 1e-10, "df={df} x={x}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn chi_square_odd_df_against_reference() {
        for df in (1..=49).step_by(2) {
            let reference = ChiSquared::new(df as f64).unwrap();
            for k in 1..=400 {
                let x = k as f64 * 0.5;
                let want = reference.sf(x);
                let got = chi_square_sf(x, df);
                assert!((got - want).abs() < 1e-10, "df={df} x={x}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn chi_square_edges() {
        assert_eq!(chi_square_sf(0.0, 3), 1.0);
        assert!(chi_square_sf(1e6, 3) < 1e-300);
        assert_eq!(chi_square_sf(f64::INFINITY, 3), 0.0);
        // df = 1 identity: 2(1 − Φ(√x))
        let x: f64 = 3.857;
        assert!((chi_square_sf(x, 1) - 2.0 * normal_sf(x.sqrt())).abs() < 1e-12);
        assert!((chi_square_sf(x, 1) - 0.0495).abs() < 1e-3);
    }

    #[test]
    fn normal_against_reference() {
        let n = Normal::new(0.0, 1.0).unwrap();
        for k in -80..=80 {
            let z = k as f64 * 0.1;
            assert!((normal_cdf(z) - n.cdf(z)).abs() < 1e-9, "z={z}");
        }
        // Known high-precision values.
        for (z, want) in [
            (-1.0, 0.158_655_253_931_457_05),
            (-2.0, 0.022_750_131_948_179_21),
            (-3.0, 0.001_349_898_031_630_094_6),
            (1.96, 0.975_002_104_851_779_5),
        ] {
            assert!((normal_cdf(z) - want).abs() < 1e-15, "z={z}");
        }
    }

    #[test]
    fn kruskal_wallis_example() {
        let r = kruskal_wallis(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        // Rank sums 6 and 15: 12/42 · (36/3 + 225/3) − 21
        let h = 12.0 / 42.0 * (12.0 + 75.0) - 21.0;
        assert!((r.statistic - h).abs() < 1e-12);
        assert!((r.statistic - 3.857).abs() < 1e-3);
        assert_eq!(r.df, Some(1));
        assert!((r.p_value.unwrap() - 0.0495).abs() < 1e-3);
        assert!(!r.tie_corrected);
    }

    #[test]
    fn kruskal_wallis_degenerate_and_errors() {
        let r = kruskal_wallis(&[vec![2.0, 2.0], vec![2.0, 2.0]]).unwrap();
        assert_eq!((r.statistic, r.p_value), (0.0, Some(1.0)));
        let r = kruskal_wallis(&[vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]]).unwrap();
        assert!(r.statistic < 1e-12 && r.p_value.unwrap() > 0.99);
        assert!(matches!(kruskal_wallis(&[vec![1.0]]), Err(StatsError::TooFewGroups { .. })));
        assert_eq!(kruskal_wallis(&[vec![1.0], vec![]]), Err(StatsError::EmptyGroup(1)));
        assert!(matches!(kruskal_wallis(&[vec![1.0], vec![2.0]]), Err(StatsError::TooFewObservations { .. })));
    }

    #[test]
    fn kruskal_wallis_tie_correction() {
        // Hand computation: pooled [1,1,2 | 2,3,3], ranks [1.5,1.5,3.5 | 3.5,5.5,5.5].
        let r = kruskal_wallis(&[vec![1.0, 1.0, 2.0], vec![2.0, 3.0, 3.0]]).unwrap();
        let h_raw = 12.0 / 42.0 * (6.5f64.powi(2) / 3.0 + 14.5f64.powi(2) / 3.0) - 21.0;
        let c = 1.0 - 18.0 / 210.0;
        assert!((r.statistic - h_raw / c).abs() < 1e-12);
        assert!(r.tie_corrected);
    }

    #[test]
    fn exact_permutation_p() {
        // Complete separation of two groups of three: 2 of the 20 splits are
        // as extreme (both directions).
        let r = kruskal_wallis_exact(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        assert!((r.p_value.unwrap() - 0.1).abs() < 1e-12);
        let big = vec![vec![0.0; 6], vec![1.0; 5]];
        assert!(matches!(kruskal_wallis_exact(&big), Err(StatsError::TooLargeForExact { .. })));
    }

    #[test]
    fn mann_whitney_example() {
        let r = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], MwuOptions::default()).unwrap();
        assert_eq!(r.statistic, 0.0);
        let z = (4.5f64 - 0.5) / 5.25f64.sqrt();
        assert!((r.p_value.unwrap() - 2.0 * normal_sf(z)).abs() < 1e-12);
        assert!((r.p_value.unwrap() - 0.0809).abs() < 1e-3);
    }

    #[test]
    fn mann_whitney_identical_samples() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let r = mann_whitney_u(&a, &a, MwuOptions::default()).unwrap();
        assert_eq!(r.statistic, 8.0);
        assert!(r.p_value.unwrap() > 0.99);
        let r = mann_whitney_u(&[2.0, 2.0], &[2.0], MwuOptions::default()).unwrap();
        assert_eq!(r.p_value, Some(1.0));
    }

    #[test]
    fn mann_whitney_one_sided() {
        let a = [1.0, 2.0, 3.0];
        let b = [4.0, 5.0, 6.0];
        let less = mann_whitney_u(&a, &b, MwuOptions { alternative: Alternative::Less, continuity: true }).unwrap();
        let greater = mann_whitney_u(&a, &b, MwuOptions { alternative: Alternative::Greater, continuity: true }).unwrap();
        let two = mann_whitney_u(&a, &b, MwuOptions::default()).unwrap();
        assert!((less.p_value.unwrap() * 2.0 - two.p_value.unwrap()).abs() < 1e-12);
        assert!(greater.p_value.unwrap() > 0.9);
    }

    #[test]
    fn holm_examples() {
        assert_eq!(holm_adjust(&[0.01, 0.04]).unwrap(), vec![0.02, 0.04]);
        let got = holm_adjust(&[0.05, 0.02, 0.01]).unwrap();
        for (g, w) in got.iter().zip([0.05, 0.04, 0.03]) {
            assert!((g - w).abs() < 1e-15);
        }
        assert_eq!(holm_adjust(&[0.3]).unwrap(), vec![0.3]);
        assert_eq!(holm_adjust(&[0.9, 0.8]).unwrap(), vec![1.0, 1.0]);
        assert_eq!(holm_adjust(&[1.2]), Err(StatsError::InvalidPValue(1.2)));
    }

    #[test]
    fn spearman_examples() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(spearman(&x, &[2.0, 4.0, 8.0, 16.0, 32.0]).unwrap().statistic, 1.0);
        assert_eq!(spearman(&x, &[5.0, 4.0, 3.0, 2.0, 1.0]).unwrap().statistic, -1.0);
        assert_eq!(spearman(&x, &[1.0; 5]), Err(StatsError::DegenerateInput));
        assert!(spearman(&x, &x).unwrap().p_value.is_none());
    }

    #[test]
    fn compare_against_reference_group() {
        let groups = vec![
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            vec![11.0, 12.0, 13.0, 14.0, 15.0, 16.0],
            vec![1.5, 2.5, 3.5, 4.5, 5.5, 6.5],
        ];
        let c = compare_against(&groups, 0, MwuOptions::default()).unwrap();
        assert_eq!(c.pairwise.len(), 2);
        assert_eq!(c.pairwise[0].0, 1);
        for (_, r) in &c.pairwise {
            assert!(r.p_adjusted.unwrap() >= r.p_value.unwrap());
        }
        assert!(c.pairwise[0].1.p_adjusted.unwrap() < 0.05);
        assert!(c.pairwise[1].1.p_adjusted.unwrap() > 0.05);
    }

    fn distinct(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::btree_set(-1000i32..1000, len)
            .prop_map(|s| s.into_iter().map(f64::from).collect::<Vec<_>>())
            .prop_shuffle()
    }

    proptest! {
        #[test]
        fn two_group_h_is_z_squared(values in distinct(4..30), split in 0.2f64..0.8) {
            let cut = ((values.len() as f64 * split) as usize).clamp(1, values.len() - 1);
            let (a, b) = values.split_at(cut);
            let h = kruskal_wallis(&[a.to_vec(), b.to_vec()]).unwrap().statistic;
            let z = mann_whitney_u(a, b, MwuOptions { alternative: Alternative::TwoSided, continuity: false }).unwrap().z.unwrap();
            prop_assert!((h - z * z).abs() < 1e-9);
        }

        #[test]
        fn monotone_transform_invariance(values in distinct(6..20)) {
            let cut = values.len() / 3;
            let g = |f: &dyn Fn(f64) -> f64| -> Vec<Vec<f64>> {
                vec![
                    values[..cut].iter().map(|v| f(*v)).collect(),
                    values[cut..2 * cut].iter().map(|v| f(*v)).collect(),
                    values[2 * cut..].iter().map(|v| f(*v)).collect(),
                ]
            };
            let base = kruskal_wallis(&g(&|v| v)).unwrap();
            let moved = kruskal_wallis(&g(&|v| (v / 300.0).exp() * 7.0 - 2.0)).unwrap();
            prop_assert!((base.statistic - moved.statistic).abs() < 1e-9);
            let ga = g(&|v| v);
            let gb = g(&|v| v * v * v);
            let ua = mann_whitney_u(&ga[0], &ga[1], MwuOptions::default()).unwrap();
            let ub = mann_whitney_u(&gb[0], &gb[1], MwuOptions::default()).unwrap();
            prop_assert_eq!(ua.statistic, ub.statistic);
            let x: Vec<f64> = values.iter().rev().copied().collect();
            let s1 = spearman(&values, &x).unwrap().statistic;
            let s2 = spearman(&values.iter().map(|v| v.powi(3)).collect::<Vec<_>>(), &x).unwrap().statistic;
            prop_assert!((s1 - s2).abs() < 1e-12);
        }

        #[test]
        fn kruskal_wallis_group_order_invariant(values in distinct(6..20)) {
            let cut = values.len() / 3;
            let a = values[..cut].to_vec();
            let b = values[cut..2 * cut].to_vec();
            let c = values[2 * cut..].to_vec();
            let h1 = kruskal_wallis(&[a.clone(), b.clone(), c.clone()]).unwrap().statistic;
            let h2 = kruskal_wallis(&[c, a, b]).unwrap().statistic;
            prop_assert!((h1 - h2).abs() < 1e-9);
        }

        #[test]
        fn holm_is_monotone_and_dominates(ps in prop::collection::vec(0.0f64..=1.0, 1..12)) {
            let adj = holm_adjust(&ps).unwrap();
            let mut idx: Vec<usize> = (0..ps.len()).collect();
            idx.sort_by(|&a, &b| ps[a].total_cmp(&ps[b]).then(a.cmp(&b)));
            for w in idx.windows(2) {
                prop_assert!(adj[w[0]] <= adj[w[1]]);
            }
            for (a, p) in adj.iter().zip(&ps) {
                prop_assert!(a >= p && *a <= 1.0);
            }
        }

        #[test]
        fn spearman_symmetry_and_self(x in distinct(3..20), y in distinct(3..20)) {
            let n = x.len().min(y.len());
            let (x, y) = (&x[..n], &y[..n]);
            let a = spearman(x, y).unwrap().statistic;
            let b = spearman(y, x).unwrap().statistic;
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!((spearman(x, x).unwrap().statistic - 1.0).abs() < 1e-12);
        }

        #[test]
        fn exact_p_matches_brute_force(values in prop::collection::vec(0i32..5, 5..8)) {
            // Brute force over every labelling with fixed group sizes.
            let pooled: Vec<f64> = values.iter().map(|v| f64::from(*v)).collect();
            let cut = pooled.len() / 2;
            let groups = vec![pooled[..cut].to_vec(), pooled[cut..].to_vec()];
            let Ok(res) = kruskal_wallis_exact(&groups) else { return Ok(()); };
            let observed = kruskal_wallis(&groups).unwrap().statistic;
            let n = pooled.len();
            let (mut hits, mut total) = (0, 0);
            for mask in 0u32..(1 << n) {
                if mask.count_ones() as usize != cut { continue; }
                let a: Vec<f64> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| pooled[i]).collect();
                let b: Vec<f64> = (0..n).filter(|i| mask >> i & 1 == 0).map(|i| pooled[i]).collect();
                let h = kruskal_wallis(&[a, b]).unwrap().statistic;
                total += 1;
                if h >= observed - 1e-12 { hits += 1; }
            }
            prop_assert!((res.p_value.unwrap() - hits as f64 / total as f64).abs() < 1e-12);
        }
    }
}
