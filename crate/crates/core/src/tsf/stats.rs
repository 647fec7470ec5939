//! Scalar statistics over a single series.
//!
//! All moments are population moments (divide by N). Skewness, kurtosis and
//! autocorrelation are defined as 0 for a series whose samples are all equal.

use crate::error::{Error, Result};

/// The four moment-style summaries shared by the raw-series, spectrum and
/// autocorrelation feature families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Moment {
    Mean,
    Variance,
    Skewness,
    /// Excess kurtosis (`m4 / m2^2 - 3`).
    Kurtosis,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Central {
    pub mean: f64,
    pub m2: f64,
    pub m3: f64,
    pub m4: f64,
    pub constant: bool,
}

pub(crate) fn is_constant(x: &[f64]) -> bool {
    x.iter().all(|&v| v == x[0])
}

pub(crate) fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub(crate) fn central(x: &[f64]) -> Central {
    let n = x.len() as f64;
    let mean = mean(x);
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in x {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    Central {
        mean,
        m2: m2 / n,
        m3: m3 / n,
        m4: m4 / n,
        constant: is_constant(x),
    }
}

/// Moment statistic of a non-empty slice.
pub fn moment(x: &[f64], which: Moment) -> f64 {
    let c = central(x);
    match which {
        Moment::Mean => c.mean,
        Moment::Variance => c.m2,
        Moment::Skewness if c.constant => 0.0,
        Moment::Skewness => c.m3 / c.m2.powf(1.5),
        Moment::Kurtosis if c.constant => 0.0,
        Moment::Kurtosis => c.m4 / (c.m2 * c.m2) - 3.0,
    }
}

/// Accumulates `upstream * d moment / d x` into `grad`.
pub(crate) fn moment_vjp(x: &[f64], which: Moment, upstream: f64, grad: &mut [f64]) {
    let n = x.len() as f64;
    let c = central(x);
    match which {
        Moment::Mean => grad.iter_mut().for_each(|g| *g += upstream / n),
        Moment::Variance => {
            for (g, &v) in grad.iter_mut().zip(x) {
                *g += upstream * 2.0 * (v - c.mean) / n;
            }
        }
        Moment::Skewness => {
            if c.constant {
                return;
            }
            let a = c.m2.powf(-1.5);
            let b = 1.5 * c.m3 * c.m2.powf(-2.5);
            for (g, &v) in grad.iter_mut().zip(x) {
                let d = v - c.mean;
                let dm3 = 3.0 / n * (d * d - c.m2);
                let dm2 = 2.0 * d / n;
                *g += upstream * (dm3 * a - b * dm2);
            }
        }
        Moment::Kurtosis => {
            if c.constant {
                return;
            }
            let inv_m2sq = 1.0 / (c.m2 * c.m2);
            let b = 2.0 * c.m4 / (c.m2 * c.m2 * c.m2);
            for (g, &v) in grad.iter_mut().zip(x) {
                let d = v - c.mean;
                let dm4 = 4.0 / n * (d * d * d - c.m3);
                let dm2 = 2.0 * d / n;
                *g += upstream * (dm4 * inv_m2sq - b * dm2);
            }
        }
    }
}

/// Linear interpolation at fractional position `(len - 1) * q` of `x`.
pub(crate) fn interp_position(x: &[f64], q: f64) -> f64 {
    let (lo, hi, frac) = interp_index(x.len(), q);
    x[lo] + frac * (x[hi] - x[lo])
}

pub(crate) fn interp_index(len: usize, q: f64) -> (usize, usize, f64) {
    let h = (len - 1) as f64 * q;
    let lo = (h.floor() as usize).min(len - 1);
    let hi = (lo + 1).min(len - 1);
    (lo, hi, h - lo as f64)
}

/// Indices of `x` in ascending value order (stable for ties).
pub(crate) fn argsort(x: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    idx
}

/// Quartile by linear interpolation between order statistics.
pub fn quantile(x: &[f64], q: f64) -> f64 {
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    interp_position(&sorted, q)
}

/// Quartile and the time-position value share the same level type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Level(pub f64);

impl Level {
    pub const Q1: Level = Level(0.25);
    pub const Q2: Level = Level(0.5);
    pub const Q3: Level = Level(0.75);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StatKind {
    Mean,
    Min,
    Max,
    Quartile(Level),
    /// Value at a fractional position along the time axis (interpolated).
    TimeQuantile(Level),
    Skewness,
    Kurtosis,
    Variance,
    StdDev,
    Rms,
    AbsMax,
}

pub fn basic_stats(x: &[f64], which: StatKind) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::domain("statistic of an empty series"));
    }
    Ok(match which {
        StatKind::Mean => mean(x),
        StatKind::Min => x.iter().copied().fold(f64::INFINITY, f64::min),
        StatKind::Max => x.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        StatKind::Quartile(Level(q)) => quantile(x, q),
        StatKind::TimeQuantile(Level(q)) => interp_position(x, q),
        StatKind::Skewness => moment(x, Moment::Skewness),
        StatKind::Kurtosis => moment(x, Moment::Kurtosis),
        StatKind::Variance => moment(x, Moment::Variance),
        StatKind::StdDev => moment(x, Moment::Variance).sqrt(),
        StatKind::Rms => (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt(),
        StatKind::AbsMax => x.iter().fold(0.0, |m: f64, v| m.max(v.abs())),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChangeKind {
    MeanChange,
    SumOfChange,
    MeanAbsChange,
    AbsSumOfChanges,
    AbsEnergy,
    /// Complexity-invariant distance: `sqrt(sum (x_i - x_{i-1})^2)`.
    Cid,
}

/// Change statistics sum over the N-1 consecutive pairs; the two "mean"
/// variants still divide by N.
pub fn change_stats(x: &[f64], which: ChangeKind) -> Result<f64> {
    if which == ChangeKind::AbsEnergy {
        if x.is_empty() {
            return Err(Error::domain("abs energy of an empty series"));
        }
        return Ok(x.iter().map(|v| v * v).sum());
    }
    if x.len() < 2 {
        return Err(Error::domain(format!(
            "{which:?} needs at least 2 samples, got {}",
            x.len()
        )));
    }
    let n = x.len() as f64;
    let diffs = x.windows(2).map(|w| w[1] - w[0]);
    Ok(match which {
        ChangeKind::MeanChange => (x[x.len() - 1] - x[0]) / n,
        ChangeKind::SumOfChange => x[x.len() - 1] - x[0],
        ChangeKind::MeanAbsChange => diffs.map(f64::abs).sum::<f64>() / n,
        ChangeKind::AbsSumOfChanges => diffs.map(f64::abs).sum(),
        ChangeKind::Cid => diffs.map(|d| d * d).sum::<f64>().sqrt(),
        ChangeKind::AbsEnergy => unreachable!(),
    })
}

/// Reference level for counting and crossing features.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    Zero,
    Mean,
    Quartile(Level),
    Start,
    End,
    TimePosition(Level),
}

impl Threshold {
    pub fn resolve(&self, x: &[f64]) -> f64 {
        match *self {
            Threshold::Zero => 0.0,
            Threshold::Mean => mean(x),
            Threshold::Quartile(Level(q)) => quantile(x, q),
            Threshold::Start => x[0],
            Threshold::End => x[x.len() - 1],
            Threshold::TimePosition(Level(q)) => interp_position(x, q),
        }
    }
}

/// Number of samples strictly greater than the resolved threshold.
pub fn count_above(x: &[f64], threshold: Threshold) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::domain("count of an empty series"));
    }
    let t = threshold.resolve(x);
    Ok(x.iter().filter(|&&v| v > t).count())
}

/// Sign changes of `x - threshold`. Samples equal to the threshold are
/// skipped, so a crossing is counted between the nearest non-equal neighbours.
pub fn crossings(x: &[f64], threshold: Threshold) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::domain("crossings of an empty series"));
    }
    let t = threshold.resolve(x);
    let mut last: Option<bool> = None;
    let mut count = 0;
    for &v in x {
        if v == t {
            continue;
        }
        let above = v > t;
        if let Some(prev) = last {
            if prev != above {
                count += 1;
            }
        }
        last = Some(above);
    }
    Ok(count)
}

/// `1/((n-l) sigma^2) * sum_{t} (x_t - mu)(x_{t+l} - mu)`; 0 for constant input.
pub fn autocorrelation(x: &[f64], lag: usize) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::domain("autocorrelation of an empty series"));
    }
    if lag > x.len() / 2 {
        return Err(Error::config(format!(
            "autocorrelation lag {lag} exceeds half the series length {}",
            x.len()
        )));
    }
    Ok(autocorr_unchecked(x, lag))
}

pub(crate) fn autocorr_unchecked(x: &[f64], lag: usize) -> f64 {
    let c = central(x);
    if c.constant {
        return 0.0;
    }
    let n = x.len();
    let s: f64 = (0..n - lag)
        .map(|t| (x[t] - c.mean) * (x[t + lag] - c.mean))
        .sum();
    s / ((n - lag) as f64 * c.m2)
}

/// Accumulates `upstream * d autocorrelation / d x` into `grad`.
pub(crate) fn autocorr_vjp(x: &[f64], lag: usize, upstream: f64, grad: &mut [f64]) {
    let c = central(x);
    if c.constant || upstream == 0.0 {
        return;
    }
    let n = x.len();
    let nf = n as f64;
    let d: Vec<f64> = x.iter().map(|v| v - c.mean).collect();
    let m = n - lag;
    let cross: f64 = (0..m).map(|t| d[t] * d[t + lag]).sum();
    let sa: f64 = d[..m].iter().sum();
    let sb: f64 = d[lag..].iter().sum();
    let denom = m as f64 * c.m2;
    let ac = cross / denom;
    for i in 0..n {
        let mut dc = -(sa + sb) / nf;
        if i < m {
            dc += d[i + lag];
        }
        if i >= lag {
            dc += d[i - lag];
        }
        let dm2 = 2.0 * d[i] / nf;
        grad[i] += upstream * (dc / denom - ac * dm2 / c.m2);
    }
}

/// Lags `step, 2*step, ...` up to `floor(len/2)`.
pub(crate) fn lag_multiples(len: usize, step: usize) -> Vec<usize> {
    (1..)
        .map(|k| k * step)
        .take_while(|&l| l <= len / 2)
        .collect()
}

/// Moment statistic of the autocorrelations at lags that are multiples of `step`.
pub fn autocorr_lag_stats(x: &[f64], step: usize, which: Moment) -> Result<f64> {
    if step == 0 {
        return Err(Error::config("autocorrelation lag step must be at least 1"));
    }
    let lags = lag_multiples(x.len(), step);
    if lags.is_empty() {
        return Err(Error::domain(format!(
            "series of length {} has no lag that is a multiple of {step} within half its length",
            x.len()
        )));
    }
    let acs: Vec<f64> = lags.iter().map(|&l| autocorr_unchecked(x, l)).collect();
    Ok(moment(&acs, which))
}

/// Per-sample Euclidean norm of a three-axis sensor.
pub fn l2_norm_series(x: &[f64], y: &[f64], z: &[f64]) -> Result<Vec<f64>> {
    if x.len() != y.len() || y.len() != z.len() {
        return Err(Error::config(format!(
            "triad length mismatch: {}, {}, {}",
            x.len(),
            y.len(),
            z.len()
        )));
    }
    Ok(x.iter()
        .zip(y)
        .zip(z)
        .map(|((a, b), c)| (a * a + b * b + c * c).sqrt())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn basic_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!(close(basic_stats(&x, StatKind::Rms).unwrap(), 7.5f64.sqrt(), 1e-12));
        assert_eq!(basic_stats(&x, StatKind::Mean).unwrap(), 2.5);
        let c = [5.0; 4];
        assert_eq!(basic_stats(&c, StatKind::Variance).unwrap(), 0.0);
        assert_eq!(basic_stats(&c, StatKind::Skewness).unwrap(), 0.0);
        assert_eq!(basic_stats(&c, StatKind::Kurtosis).unwrap(), 0.0);
        assert!(basic_stats(&[], StatKind::Mean).is_err());
    }

    #[test]
    fn quartiles_interpolate() {
        let x = [4.0, 1.0, 3.0, 2.0];
        // sorted 1 2 3 4, position 0.75 -> 1.75
        assert!(close(basic_stats(&x, StatKind::Quartile(Level::Q1)).unwrap(), 1.75, 1e-12));
        assert!(close(basic_stats(&x, StatKind::Quartile(Level::Q2)).unwrap(), 2.5, 1e-12));
        // unsorted, position 1.5 -> (1 + 3) / 2
        assert!(close(basic_stats(&x, StatKind::TimeQuantile(Level::Q2)).unwrap(), 2.0, 1e-12));
    }

    #[test]
    fn change_examples() {
        let x = [1.0, 3.0, 2.0];
        assert_eq!(change_stats(&x, ChangeKind::AbsSumOfChanges).unwrap(), 3.0);
        assert_eq!(change_stats(&x, ChangeKind::AbsEnergy).unwrap(), 14.0);
        assert!(close(change_stats(&x, ChangeKind::Cid).unwrap(), 5f64.sqrt(), 1e-12));
        assert!(close(change_stats(&x, ChangeKind::MeanChange).unwrap(), 1.0 / 3.0, 1e-12));
        assert!(change_stats(&[1.0], ChangeKind::Cid).is_err());
        assert_eq!(change_stats(&[2.0], ChangeKind::AbsEnergy).unwrap(), 4.0);
    }

    #[test]
    fn count_examples() {
        assert_eq!(count_above(&[-1.0, 2.0, 3.0], Threshold::Zero).unwrap(), 2);
        assert_eq!(count_above(&[7.0; 5], Threshold::Mean).unwrap(), 0);
        assert_eq!(count_above(&[1.0, 2.0, 3.0, 4.0], Threshold::Start).unwrap(), 3);
        assert_eq!(count_above(&[1.0, 2.0, 3.0, 4.0], Threshold::End).unwrap(), 0);
    }

    #[test]
    fn crossing_examples() {
        assert_eq!(crossings(&[1.0, -1.0, 1.0, -1.0], Threshold::Zero).unwrap(), 3);
        assert_eq!(crossings(&[3.0; 6], Threshold::Mean).unwrap(), 0);
        // Equal samples are skipped: only the 2 -> -2 pair crosses.
        assert_eq!(crossings(&[0.0, 2.0, 0.0, -2.0], Threshold::Mean).unwrap(), 1);
        assert_eq!(crossings(&[1.0, 0.0, 0.0, 2.0], Threshold::Zero).unwrap(), 0);
    }

    #[test]
    fn autocorrelation_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!(close(autocorrelation(&x, 0).unwrap(), 1.0, 1e-12));
        assert!(close(autocorrelation(&x, 1).unwrap(), 1.0 / 3.0, 1e-12));
        assert!(close(autocorrelation(&x, 2).unwrap(), -0.6, 1e-12));
        assert!(autocorrelation(&x, 3).is_err());
        assert_eq!(autocorrelation(&[2.0; 8], 3).unwrap(), 0.0);
        let m = autocorr_lag_stats(&x, 1, Moment::Mean).unwrap();
        assert!(close(m, (1.0 / 3.0 - 0.6) / 2.0, 1e-12));
        assert_eq!(autocorr_lag_stats(&[1.0; 10], 1, Moment::Mean).unwrap(), 0.0);
        assert!(autocorr_lag_stats(&[1.0, 2.0, 3.0], 2, Moment::Mean).is_err());
    }

    #[test]
    fn lag_multiples_of_32_samples() {
        assert_eq!(lag_multiples(32, 1), (1..=16).collect::<Vec<_>>());
        assert_eq!(lag_multiples(32, 5), vec![5, 10, 15]);
    }

    #[test]
    fn l2_norm_examples() {
        let n = l2_norm_series(&[3.0, 0.0], &[0.0, 4.0], &[0.0, 0.0]).unwrap();
        assert_eq!(n, vec![3.0, 4.0]);
        assert_eq!(l2_norm_series(&[0.0; 3], &[0.0; 3], &[0.0; 3]).unwrap(), vec![0.0; 3]);
        assert!(l2_norm_series(&[0.0; 3], &[0.0; 2], &[0.0; 3]).is_err());
    }

    #[test]
    fn moment_vjp_matches_differences() {
        let x = [0.3, -1.2, 2.5, 0.7, -0.4, 1.9];
        for which in [Moment::Mean, Moment::Variance, Moment::Skewness, Moment::Kurtosis] {
            let mut g = vec![0.0; x.len()];
            moment_vjp(&x, which, 1.0, &mut g);
            for i in 0..x.len() {
                let h = 1e-6;
                let mut p = x;
                let mut m = x;
                p[i] += h;
                m[i] -= h;
                let fd = (moment(&p, which) - moment(&m, which)) / (2.0 * h);
                assert!(close(fd, g[i], 1e-7), "{which:?} {i}: {fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn autocorr_vjp_matches_differences() {
        let x = [0.3, -1.2, 2.5, 0.7, -0.4, 1.9, 0.2, -0.8];
        for lag in 0..=4 {
            let mut g = vec![0.0; x.len()];
            autocorr_vjp(&x, lag, 1.0, &mut g);
            for i in 0..x.len() {
                let h = 1e-6;
                let mut p = x;
                let mut m = x;
                p[i] += h;
                m[i] -= h;
                let fd = (autocorr_unchecked(&p, lag) - autocorr_unchecked(&m, lag)) / (2.0 * h);
                assert!(close(fd, g[i], 1e-7), "lag {lag} {i}: {fd} vs {}", g[i]);
            }
        }
    }
}
