//! Point-estimate statistics: correlation, rank statistics and least squares.

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_lengths(x: &[f64], y: &[f64], needed: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < needed {
        return Err(Error::TooFewObservations { needed, got: x.len() });
    }
    Ok(())
}

/// Pearson product-moment correlation.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths(x, y, 3)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Number of tied pairs, `Σ t(t-1)/2` over runs of equal values in a sorted iterator.
fn tied_pairs<T: PartialEq, I: Iterator<Item = T>>(sorted: I) -> u64 {
    let mut total = 0u64;
    let mut run = 0u64;
    let mut prev: Option<T> = None;
    for v in sorted {
        if prev.as_ref() == Some(&v) {
            run += 1;
        } else {
            total += run * run.saturating_sub(1) / 2;
            run = 1;
        }
        prev = Some(v);
    }
    total + run * run.saturating_sub(1) / 2
}

/// Merge sort counting inversions (strictly decreasing pairs).
fn sort_counting_swaps(v: &mut [f64], scratch: &mut Vec<f64>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let (left, right) = v.split_at_mut(mid);
    let mut swaps = sort_counting_swaps(left, scratch) + sort_counting_swaps(right, scratch);
    scratch.clear();
    let (mut i, mut j) = (0, 0);
    while i < left.len() && j < right.len() {
        if left[i] <= right[j] {
            scratch.push(left[i]);
            i += 1;
        } else {
            scratch.push(right[j]);
            swaps += (left.len() - i) as u64;
            j += 1;
        }
    }
    scratch.extend_from_slice(&left[i..]);
    scratch.extend_from_slice(&right[j..]);
    v.copy_from_slice(scratch);
    swaps
}

/// Combines pair counts into tau-b. Shared by every route that counts pairs.
pub fn tau_b_from_counts(concordant_minus_discordant: i64, pairs: u64, ties_x: u64, ties_y: u64) -> Result<f64> {
    let (dx, dy) = (pairs - ties_x, pairs - ties_y);
    if dx == 0 || dy == 0 {
        return Err(Error::ZeroVariance);
    }
    Ok(concordant_minus_discordant as f64 / ((dx as f64) * (dy as f64)).sqrt())
}

/// Kendall's tau-b in `O(n log n)`.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths(x, y, 2)?;
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::InvalidConfig("NaN in rank input".into()));
    }
    let n = x.len() as u64;
    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let ties_x = tied_pairs(pairs.iter().map(|p| p.0));
    let ties_xy = tied_pairs(pairs.iter().copied());
    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut scratch = Vec::with_capacity(ys.len());
    let swaps = sort_counting_swaps(&mut ys, &mut scratch);
    let ties_y = tied_pairs(ys.iter().copied());
    let total = n * (n - 1) / 2;
    let diff = total as i64 - ties_x as i64 - ties_y as i64 + ties_xy as i64 - 2 * swaps as i64;
    tau_b_from_counts(diff, total, ties_x, ties_y)
}

/// Mid-ranks (1-based) of `values`.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        i = j;
    }
    ranks
}

/// Rank-sum z statistic of `b` against `a` with tie-corrected variance; positive when `b`
/// ranks higher. Returns 0 when every observation is tied.
pub fn wilcoxon_z(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let combined: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = average_ranks(&combined);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let n = na + nb;
    let rank_sum_b: f64 = ranks[a.len()..].iter().sum();
    let expected = nb * (n + 1.0) / 2.0;
    let mut sorted = combined;
    sorted.sort_by(f64::total_cmp);
    let tie_term: f64 = tie_groups(&sorted).map(|t| t * t * t - t).sum();
    let variance = if n > 1.0 { na * nb / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0))) } else { 0.0 };
    if variance <= 0.0 {
        return Ok(0.0);
    }
    Ok((rank_sum_b - expected) / variance.sqrt())
}

fn tie_groups(sorted: &[f64]) -> impl Iterator<Item = f64> + '_ {
    let mut i = 0;
    std::iter::from_fn(move || {
        if i >= sorted.len() {
            return None;
        }
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let size = (j - i) as f64;
        i = j;
        Some(size)
    })
}

/// Named design matrix columns for least squares.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignMatrix {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    rows: usize,
}

impl DesignMatrix {
    /// A design with only an intercept column.
    pub fn with_intercept(rows: usize) -> Self {
        DesignMatrix { names: vec!["(Intercept)".into()], columns: vec![vec![1.0; rows]], rows }
    }

    pub fn without_intercept(rows: usize) -> Self {
        DesignMatrix { names: Vec::new(), columns: Vec::new(), rows }
    }

    pub fn numeric(mut self, name: &str, values: &[f64]) -> Result<Self> {
        if values.len() != self.rows {
            return Err(Error::LengthMismatch(self.rows, values.len()));
        }
        self.names.push(name.to_string());
        self.columns.push(values.to_vec());
        Ok(self)
    }

    /// Treatment contrasts: one indicator column per level other than `reference`, in the
    /// order of `levels`.
    pub fn categorical<L: PartialEq + std::fmt::Display>(
        mut self,
        name: &str,
        observations: &[L],
        levels: &[L],
        reference: &L,
    ) -> Result<Self> {
        if observations.len() != self.rows {
            return Err(Error::LengthMismatch(self.rows, observations.len()));
        }
        if let Some(unknown) = observations.iter().find(|o| !levels.contains(o)) {
            return Err(Error::InvalidConfig(format!("level {unknown} of {name} is not declared")));
        }
        for level in levels.iter().filter(|l| *l != reference) {
            self.names.push(format!("{name}{level}"));
            self.columns.push(observations.iter().map(|o| f64::from(u8::from(o == level))).collect());
        }
        Ok(self)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.columns.len(), |r, c| self.columns[c][r])
    }
}

/// Least-squares estimates with their standard errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub r_squared: f64,
    pub r_squared_adjusted: f64,
    pub residuals: Vec<f64>,
}

impl RegressionFit {
    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.coefficients[i])
    }
}

/// Ordinary least squares via QR.
pub fn ols_fit(design: &DesignMatrix, y: &[f64]) -> Result<RegressionFit> {
    let mut fit = ols_fit_matrix(&design.matrix(), y)?;
    fit.names = design.names.clone();
    Ok(fit)
}

/// [`ols_fit`] on a bare matrix; coefficient names are `x0, x1, ...`.
pub fn ols_fit_matrix(x: &DMatrix<f64>, y: &[f64]) -> Result<RegressionFit> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::LengthMismatch(n, y.len()));
    }
    if n <= p {
        return Err(Error::TooFewObservations { needed: p + 1, got: n });
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let scale = r.diagonal().abs().max();
    if !(scale > 0.0) || r.diagonal().iter().any(|d| d.abs() <= 1e-10 * scale) {
        return Err(Error::RankDeficientDesign);
    }
    let yv = DVector::from_column_slice(y);
    let qty = qr.q().transpose() * &yv;
    let beta = r.solve_upper_triangular(&qty).ok_or(Error::RankDeficientDesign)?;
    let residuals = &yv - x * &beta;
    let rss = residuals.norm_squared();
    let mean = yv.mean();
    let tss: f64 = yv.iter().map(|v| (v - mean).powi(2)).sum();
    let sigma2 = rss / (n - p) as f64;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or(Error::RankDeficientDesign)?;
    let standard_errors = (0..p).map(|j| (sigma2 * r_inv.row(j).norm_squared()).sqrt()).collect();
    let r_squared = if tss > 0.0 { 1.0 - rss / tss } else { 1.0 };
    let r_squared_adjusted = 1.0 - (1.0 - r_squared) * (n - 1) as f64 / (n - p) as f64;
    Ok(RegressionFit {
        names: (0..p).map(|j| format!("x{j}")).collect(),
        coefficients: beta.iter().copied().collect(),
        standard_errors,
        r_squared,
        r_squared_adjusted,
        residuals: residuals.iter().copied().collect(),
    })
}

/// Outcome of correcting a series for a level shift at a known date.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardwareAdjustment {
    /// Input values with the fitted step removed from every point on or after the break.
    pub adjusted: Vec<f64>,
    /// Amount added to post-break points (the negated indicator coefficient).
    pub adjustment: f64,
    /// Fitted trend per year.
    pub slope_per_year: f64,
    pub fit: RegressionFit,
}

fn years_since(origin: NaiveDate, date: NaiveDate) -> f64 {
    (date - origin).num_days() as f64 / 365.25
}

/// Fits `phi ~ 1 + years + [date >= break]` and removes the fitted step from post-break points.
pub fn hardware_adjust(dates: &[NaiveDate], phis: &[f64], break_date: NaiveDate) -> Result<HardwareAdjustment> {
    if dates.len() != phis.len() {
        return Err(Error::LengthMismatch(dates.len(), phis.len()));
    }
    let first = dates.iter().min().ok_or(Error::EmptySample)?;
    let last = dates.iter().max().ok_or(Error::EmptySample)?;
    if break_date <= *first || break_date > *last {
        return Err(Error::BreakOutOfRange);
    }
    let years: Vec<f64> = dates.iter().map(|d| years_since(*first, *d)).collect();
    let after: Vec<f64> = dates.iter().map(|d| f64::from(u8::from(*d >= break_date))).collect();
    let design = DesignMatrix::with_intercept(dates.len())
        .numeric("year", &years)?
        .numeric("after_break", &after)?;
    let fit = ols_fit(&design, phis)?;
    let step = fit.coefficients[2];
    let adjusted = phis
        .iter()
        .zip(&after)
        .map(|(&v, &a)| if a == 1.0 { v - step } else { v })
        .collect();
    Ok(HardwareAdjustment { adjusted, adjustment: -step, slope_per_year: fit.coefficients[1], fit })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_extremes() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert!((pearson_r(&x, &y).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson_r(&x, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert!(matches!(pearson_r(&x, &[1.0, 2.0]), Err(Error::LengthMismatch(4, 2))));
        assert!(matches!(pearson_r(&x, &[1.0; 4]), Err(Error::ZeroVariance)));
    }

    #[test]
    fn kendall_extremes() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(kendall_tau(&x, &x).unwrap(), 1.0);
        let rev: Vec<f64> = x.iter().rev().copied().collect();
        assert_eq!(kendall_tau(&x, &rev).unwrap(), -1.0);
        // 4 concordant, 0 discordant, one tie in each variable: tau-b = 4 / sqrt(5 * 5)
        let tx = [1.0, 2.0, 2.0, 3.0];
        let ty = [1.0, 2.0, 3.0, 3.0];
        let expected = 4.0 / (5.0f64 * 5.0).sqrt();
        assert!((kendall_tau(&tx, &ty).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn ranks_with_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 30.0]), vec![1.5, 3.0, 1.5, 4.0]);
    }

    #[test]
    fn wilcoxon_properties() {
        let a: Vec<f64> = (1..=10).map(f64::from).collect();
        let b: Vec<f64> = (11..=20).map(f64::from).collect();
        assert!(wilcoxon_z(&a, &a).unwrap().abs() < 1e-9);
        let z = wilcoxon_z(&a, &b).unwrap();
        // W_b = 155, E = 105, Var = 100*21/12 = 175
        assert!((z - 50.0 / 175f64.sqrt()).abs() < 1e-12);
        assert!((wilcoxon_z(&b, &a).unwrap() + z).abs() < 1e-12);
        assert!(matches!(wilcoxon_z(&[], &a), Err(Error::EmptySample)));
        assert_eq!(wilcoxon_z(&[1.0, 1.0], &[1.0]).unwrap(), 0.0);
    }

    #[test]
    fn ols_exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let fit = ols_fit(&DesignMatrix::with_intercept(5).numeric("x", &x).unwrap(), &y).unwrap();
        assert!((fit.coefficient("x").unwrap() - 2.0).abs() < 1e-12);
        assert!(fit.coefficient("(Intercept)").unwrap().abs() < 1e-12);
        assert!((fit.r_squared_adjusted - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ols_equal_group_means_give_zero_contrasts() {
        let groups = ["C", "B", "GA", "C", "B", "GA", "C", "B", "GA"];
        let y = [1.0, 2.0, 3.0, 3.0, 1.0, 2.0, 2.0, 3.0, 1.0];
        let design = DesignMatrix::with_intercept(9).categorical("quality", &groups, &["C", "B", "GA"], &"C").unwrap();
        assert_eq!(design.names(), &["(Intercept)", "qualityB", "qualityGA"]);
        let fit = ols_fit(&design, &y).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-9);
        assert!(fit.coefficients[1].abs() < 1e-9 && fit.coefficients[2].abs() < 1e-9);
    }

    #[test]
    fn ols_rank_deficiency() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let d = DesignMatrix::with_intercept(4).numeric("a", &x).unwrap().numeric("b", &x).unwrap();
        assert!(matches!(ols_fit(&d, &[1.0, 2.0, 0.0, 1.0]), Err(Error::RankDeficientDesign)));
        let d = DesignMatrix::with_intercept(2).numeric("a", &[1.0, 2.0]).unwrap();
        assert!(matches!(ols_fit(&d, &[1.0, 2.0]), Err(Error::TooFewObservations { .. })));
    }

    fn date(y: i32, m: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, 1).unwrap()
    }

    #[test]
    fn hardware_adjust_contract() {
        let dates: Vec<NaiveDate> = (2008..2014).flat_map(|y| [date(y, 3), date(y, 9)]).collect();
        let brk = date(2012, 3);
        let phis: Vec<f64> = dates
            .iter()
            .enumerate()
            .map(|(i, d)| 10.0 + 0.1 * (i % 3) as f64 + if *d >= brk { -3.0 } else { 0.0 })
            .collect();
        let adj = hardware_adjust(&dates, &phis, brk).unwrap();
        for (i, d) in dates.iter().enumerate() {
            if *d < brk {
                assert_eq!(adj.adjusted[i].to_bits(), phis[i].to_bits());
            }
        }
        assert!((adj.adjustment - 3.0).abs() < 0.2);
        assert!(matches!(hardware_adjust(&dates, &phis, date(2020, 1)), Err(Error::BreakOutOfRange)));
        assert!(matches!(hardware_adjust(&dates, &phis, date(2008, 3)), Err(Error::BreakOutOfRange)));
    }

    #[test]
    fn hardware_adjust_without_step_is_near_identity() {
        let dates: Vec<NaiveDate> = (2008..2014).flat_map(|y| [date(y, 3), date(y, 9)]).collect();
        let phis: Vec<f64> = (0..dates.len()).map(|i| 5.0 + 0.85 * i as f64 / 2.0).collect();
        let adj = hardware_adjust(&dates, &phis, date(2012, 3)).unwrap();
        for (a, p) in adj.adjusted.iter().zip(&phis) {
            assert!((a - p).abs() < 0.05);
        }
    }
}
