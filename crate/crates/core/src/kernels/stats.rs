//! Descriptive statistics and the rank / distribution tests used for binarization.

use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, Discrete, Normal};

use crate::error::{invalid, Result};

/// Significance level for every hypothesis-test binarization.
pub const ALPHA: f64 = 0.05;

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation (n − 1); 0 for fewer than two values.
pub fn std(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    let ss: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
    (ss / (x.len() - 1) as f64).sqrt()
}

/// Population variance (n).
pub fn variance_pop(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64
}

pub fn median(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let k = s.len();
    if k % 2 == 1 {
        s[k / 2]
    } else {
        0.5 * (s[k / 2 - 1] + s[k / 2])
    }
}

/// Linear-interpolation quantile (numpy default).
pub fn quantile(x: &[f64], q: f64) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    quantile_sorted(&s, q)
}

pub fn quantile_sorted(s: &[f64], q: f64) -> f64 {
    if s.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    s[lo] + (pos - lo as f64) * (s[hi] - s[lo])
}

/// Pearson correlation; 0 when either side is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let mx = mean(x);
    let my = mean(y);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// Average ranks (1-based) with ties sharing the mean rank.
pub fn rank_average(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Sizes of tie groups in `x`.
fn tie_sizes(x: &[f64]) -> Vec<usize> {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    let mut i = 0;
    while i < s.len() {
        let mut j = i;
        while j + 1 < s.len() && s[j + 1] == s[i] {
            j += 1;
        }
        out.push(j - i + 1);
        i = j + 1;
    }
    out
}

pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&rank_average(x), &rank_average(y))
}

/// Kendall tau-b; O(n²).
pub fn kendall_tau(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let (mut conc, mut disc, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 && dy == 0.0 {
                continue;
            } else if dx == 0.0 {
                tx += 1;
            } else if dy == 0.0 {
                ty += 1;
            } else if (dx > 0.0) == (dy > 0.0) {
                conc += 1;
            } else {
                disc += 1;
            }
        }
    }
    let denom = (((conc + disc + tx) as f64) * ((conc + disc + ty) as f64)).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        (conc - disc) as f64 / denom
    }
}

pub fn normal_sf(z: f64) -> f64 {
    let n = Normal::standard();
    1.0 - n.cdf(z)
}

pub fn two_sided_normal_p(z: f64) -> f64 {
    let n = Normal::standard();
    (2.0 * n.cdf(-z.abs())).min(1.0)
}

/// Survival function of the Kolmogorov distribution, `P(K > x)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.0 {
        // Small-argument series for the CDF converges quickly here.
        let c = -std::f64::consts::PI.powi(2) / (8.0 * x * x);
        let mut cdf = 0.0;
        for j in 1..=50 {
            let k = (2 * j - 1) as f64;
            cdf += (c * k * k).exp();
        }
        cdf *= (2.0 * std::f64::consts::PI).sqrt() / x;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut sf = 0.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * x * x).exp();
        sf += if j % 2 == 1 { term } else { -term };
        if term < 1e-300 {
            break;
        }
    }
    (2.0 * sf).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

impl TestResult {
    pub fn significant(&self) -> bool {
        self.p_value < ALPHA
    }
}

/// Two-sample, two-sided Kolmogorov–Smirnov test with the asymptotic p-value.
pub fn ks_2sample(x: &[f64], y: &[f64]) -> Result<TestResult> {
    if x.is_empty() || y.is_empty() {
        return Err(invalid("KS test needs non-empty samples"));
    }
    let mut a = x.to_vec();
    let mut b = y.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let en = (n * m / (n + m)).sqrt();
    Ok(TestResult {
        statistic: d,
        p_value: kolmogorov_sf(en * d),
    })
}

/// `true` when the KS test does not reject equality at [`ALPHA`].
pub fn ks_same_distribution(x: &[f64], y: &[f64]) -> Result<bool> {
    Ok(ks_2sample(x, y)?.p_value >= ALPHA)
}

/// Mann–Whitney U for `x` with the tie-corrected normal approximation (no continuity correction).
pub fn mann_whitney_u(x: &[f64], y: &[f64]) -> Result<TestResult> {
    if x.is_empty() || y.is_empty() {
        return Err(invalid("Mann-Whitney U needs non-empty samples"));
    }
    let (z, u) = mann_whitney_z(x, y);
    Ok(TestResult {
        statistic: u,
        p_value: z.map_or(1.0, two_sided_normal_p),
    })
}

/// Standardized U (None when all values tie) and U itself.
pub fn mann_whitney_z(x: &[f64], y: &[f64]) -> (Option<f64>, f64) {
    let n1 = x.len() as f64;
    let n2 = y.len() as f64;
    let all: Vec<f64> = x.iter().chain(y).copied().collect();
    let ranks = rank_average(&all);
    let r1: f64 = ranks[..x.len()].iter().sum();
    let u = r1 - n1 * (n1 + 1.0) / 2.0;
    let n = n1 + n2;
    let ties: f64 = tie_sizes(&all)
        .into_iter()
        .map(|t| (t as f64).powi(3) - t as f64)
        .sum();
    let var = n1 * n2 / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
    if var <= 0.0 || !var.is_finite() {
        return (None, u);
    }
    (Some((u - n1 * n2 / 2.0) / var.sqrt()), u)
}

/// Kruskal–Wallis H test with tie correction; all-tied input yields `p = 1`.
pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<TestResult> {
    if groups.len() < 2 || groups.iter().any(|g| g.is_empty()) {
        return Err(invalid("Kruskal-Wallis needs at least two non-empty groups"));
    }
    let all: Vec<f64> = groups.iter().flatten().copied().collect();
    let n = all.len() as f64;
    let ranks = rank_average(&all);
    let mut offset = 0;
    let mut h = 0.0;
    for g in groups {
        let r: f64 = ranks[offset..offset + g.len()].iter().sum();
        h += r * r / g.len() as f64;
        offset += g.len();
    }
    h = 12.0 / (n * (n + 1.0)) * h - 3.0 * (n + 1.0);
    let ties: f64 = tie_sizes(&all)
        .into_iter()
        .map(|t| (t as f64).powi(3) - t as f64)
        .sum();
    let correction = 1.0 - ties / (n.powi(3) - n);
    if correction <= 0.0 {
        return Ok(TestResult {
            statistic: 0.0,
            p_value: 1.0,
        });
    }
    h /= correction;
    let dof = (groups.len() - 1) as f64;
    let chi = ChiSquared::new(dof).map_err(|e| invalid(e.to_string()))?;
    Ok(TestResult {
        statistic: h,
        p_value: (1.0 - chi.cdf(h.max(0.0))).clamp(0.0, 1.0),
    })
}

/// Pooled two-proportion z-test, two-sided.
pub fn two_proportion_z(k1: usize, n1: usize, k2: usize, n2: usize) -> TestResult {
    if n1 == 0 || n2 == 0 {
        return TestResult {
            statistic: 0.0,
            p_value: 1.0,
        };
    }
    let p1 = k1 as f64 / n1 as f64;
    let p2 = k2 as f64 / n2 as f64;
    let p = (k1 + k2) as f64 / (n1 + n2) as f64;
    let se = (p * (1.0 - p) * (1.0 / n1 as f64 + 1.0 / n2 as f64)).sqrt();
    if se == 0.0 {
        return TestResult {
            statistic: 0.0,
            p_value: 1.0,
        };
    }
    let z = (p1 - p2) / se;
    TestResult {
        statistic: z,
        p_value: two_sided_normal_p(z),
    }
}

/// Exact two-sided binomial test of `k` successes in `n` trials against `p`.
pub fn binomial_test(k: u64, n: u64, p: f64) -> Result<f64> {
    if n == 0 {
        return Ok(1.0);
    }
    let dist = Binomial::new(p, n).map_err(|e| invalid(e.to_string()))?;
    let observed = dist.pmf(k);
    let tol = observed * (1.0 + 1e-7);
    let total: f64 = (0..=n).map(|i| dist.pmf(i)).filter(|&q| q <= tol).sum();
    Ok(total.min(1.0))
}

/// Area under the ROC curve from scores of positives and negatives (ties count one half).
pub fn auc(pos: &[f64], neg: &[f64]) -> Result<f64> {
    if pos.is_empty() || neg.is_empty() {
        return Err(invalid("AUC needs both classes"));
    }
    let all: Vec<f64> = pos.iter().chain(neg).copied().collect();
    let ranks = rank_average(&all);
    let np = pos.len() as f64;
    let r: f64 = ranks[..pos.len()].iter().sum();
    Ok((r - np * (np + 1.0) / 2.0) / (np * neg.len() as f64))
}

/// Approximate entropy with embedding dimension `m` and tolerance `r` (Chebyshev distance,
/// self-matches counted). Constant or too-short series give 0.
pub fn approx_entropy(x: &[f64], m: usize, r: f64) -> f64 {
    let n = x.len();
    if n <= m + 1 || variance_pop(x) == 0.0 {
        return 0.0;
    }
    let phi = |m: usize| -> f64 {
        let count = n - m + 1;
        let mut total = 0.0;
        for i in 0..count {
            let matches = (0..count)
                .filter(|&j| (0..m).all(|k| (x[i + k] - x[j + k]).abs() <= r))
                .count();
            total += (matches as f64 / count as f64).ln();
        }
        total / count as f64
    };
    phi(m) - phi(m + 1)
}

/// ApEn with the usual defaults `m = 2`, `r = 0.2 · σ` (population σ).
pub fn approx_entropy_default(x: &[f64]) -> f64 {
    approx_entropy(x, 2, 0.2 * variance_pop(x).sqrt())
}
