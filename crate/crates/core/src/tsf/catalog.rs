//! The 49-entry feature catalog, addressed by its row number.
//!
//! Row 4 covers both the interpolated quartiles and the time-position values;
//! `mode=time` selects the latter. Features that depend on a parameter take it
//! as `key=value` pairs after the id, e.g. `4 q=0.25 mode=time`, `45 lag=2`,
//! `46 n=1`.

use std::fmt;
use std::str::FromStr;

use super::spectrum::{self, bin_count, Spectrum};
use super::stats::{
    self, argsort, autocorr_unchecked, autocorr_vjp, interp_index, lag_multiples, moment,
    moment_vjp, ChangeKind, Level, Moment, StatKind, Threshold,
};
use crate::error::{Error, Result};

/// Largest valid catalog identifier.
pub const MAX_FEATURE_ID: u8 = 49;

#[derive(Debug, Clone, PartialEq)]
pub enum Feature {
    /// Scalar summary of the raw samples (rows 1-9, 15, and 4 with a fixed level).
    Stat(StatKind),
    /// Row 4 without a level: the three quartiles (or time-position values).
    Quartiles { time: bool },
    /// Rows 10-14 and 16.
    Change(ChangeKind),
    /// Rows 17-23.
    CountAbove(Threshold),
    /// Rows 24-33.
    Crossings(Threshold),
    /// Row 34: one column per one-sided spectrum bin.
    FftAmplitude,
    /// Row 35.
    FftRatio,
    /// Rows 36-39.
    FftAmplitudeStat(Moment),
    /// Rows 40-43.
    FftRatioStat(Moment),
    /// Row 44.
    FftAngle,
    /// Row 45.
    Autocorrelation { lag: usize },
    /// Rows 46-49.
    AutocorrLagStat { step: usize, moment: Moment },
}

const MOMENTS: [Moment; 4] = [Moment::Mean, Moment::Variance, Moment::Skewness, Moment::Kurtosis];

fn count_threshold(id: u8) -> Threshold {
    match id {
        17 => Threshold::Zero,
        18 => Threshold::Mean,
        19 => Threshold::Start,
        20 => Threshold::TimePosition(Level::Q1),
        21 => Threshold::TimePosition(Level::Q2),
        22 => Threshold::TimePosition(Level::Q3),
        _ => Threshold::End,
    }
}

fn crossing_threshold(id: u8) -> Threshold {
    match id {
        24 => Threshold::Zero,
        25 => Threshold::Mean,
        26 => Threshold::Quartile(Level::Q1),
        27 => Threshold::Quartile(Level::Q2),
        28 => Threshold::Quartile(Level::Q3),
        29 => Threshold::Start,
        30 => Threshold::TimePosition(Level::Q1),
        31 => Threshold::TimePosition(Level::Q2),
        32 => Threshold::TimePosition(Level::Q3),
        _ => Threshold::End,
    }
}

fn parse_param<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(format!("invalid value {value:?} for feature parameter {key}")))
}

impl Feature {
    /// Builds a catalog entry from its row number and optional parameters.
    pub fn from_id(id: u8, params: &[(&str, &str)]) -> Result<Feature> {
        let mut level = None;
        let mut time = false;
        let mut lag = 1usize;
        let mut step = 1usize;
        for &(key, value) in params {
            let accepted = match (id, key) {
                (4, "q") => {
                    let q: f64 = parse_param(key, value)?;
                    if !(0.0..=1.0).contains(&q) {
                        return Err(Error::config(format!("quantile level {q} outside [0, 1]")));
                    }
                    level = Some(Level(q));
                    true
                }
                (4, "mode") => {
                    time = match value {
                        "time" => true,
                        "order" => false,
                        _ => return Err(Error::config(format!("unknown quantile mode {value:?}"))),
                    };
                    true
                }
                (45, "lag") => {
                    lag = parse_param(key, value)?;
                    true
                }
                (46..=49, "n") => {
                    step = parse_param(key, value)?;
                    if step == 0 {
                        return Err(Error::config("lag step n must be at least 1"));
                    }
                    true
                }
                _ => false,
            };
            if !accepted {
                return Err(Error::config(format!("feature {id} does not take parameter {key:?}")));
            }
        }
        Ok(match id {
            1 => Feature::Stat(StatKind::Mean),
            2 => Feature::Stat(StatKind::Min),
            3 => Feature::Stat(StatKind::Max),
            4 => match (level, time) {
                (None, time) => Feature::Quartiles { time },
                (Some(l), false) => Feature::Stat(StatKind::Quartile(l)),
                (Some(l), true) => Feature::Stat(StatKind::TimeQuantile(l)),
            },
            5 => Feature::Stat(StatKind::Skewness),
            6 => Feature::Stat(StatKind::Kurtosis),
            7 => Feature::Stat(StatKind::Variance),
            8 => Feature::Stat(StatKind::StdDev),
            9 => Feature::Stat(StatKind::Rms),
            10 => Feature::Change(ChangeKind::MeanChange),
            11 => Feature::Change(ChangeKind::SumOfChange),
            12 => Feature::Change(ChangeKind::MeanAbsChange),
            13 => Feature::Change(ChangeKind::AbsEnergy),
            14 => Feature::Change(ChangeKind::AbsSumOfChanges),
            15 => Feature::Stat(StatKind::AbsMax),
            16 => Feature::Change(ChangeKind::Cid),
            17..=23 => Feature::CountAbove(count_threshold(id)),
            24..=33 => Feature::Crossings(crossing_threshold(id)),
            34 => Feature::FftAmplitude,
            35 => Feature::FftRatio,
            36..=39 => Feature::FftAmplitudeStat(MOMENTS[(id - 36) as usize]),
            40..=43 => Feature::FftRatioStat(MOMENTS[(id - 40) as usize]),
            44 => Feature::FftAngle,
            45 => Feature::Autocorrelation { lag },
            46..=49 => Feature::AutocorrLagStat {
                step,
                moment: MOMENTS[(id - 46) as usize],
            },
            _ => return Err(Error::config(format!("unknown feature id {id} (valid ids are 1-{MAX_FEATURE_ID})"))),
        })
    }

    /// Parses one selection line: `<id> [key=value ...]`. Blank lines and
    /// `#` comments yield `None`.
    pub fn parse_line(line: &str) -> Result<Option<Feature>> {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            return Ok(None);
        }
        let mut parts = line.split_whitespace();
        let head = parts.next().unwrap_or_default();
        let id: u8 = head
            .parse()
            .map_err(|_| Error::config(format!("feature id {head:?} is not a number in 1-{MAX_FEATURE_ID}")))?;
        let params = parts
            .map(|p| {
                p.split_once('=')
                    .ok_or_else(|| Error::config(format!("feature parameter {p:?} is not key=value")))
            })
            .collect::<Result<Vec<_>>>()?;
        Feature::from_id(id, &params).map(Some)
    }

    /// Parses a whole selection file (one feature per line).
    pub fn parse_list(text: &str) -> Result<Vec<Feature>> {
        text.lines()
            .filter_map(|l| Feature::parse_line(l).transpose())
            .collect()
    }

    pub fn id(&self) -> u8 {
        match self {
            Feature::Stat(kind) => match kind {
                StatKind::Mean => 1,
                StatKind::Min => 2,
                StatKind::Max => 3,
                StatKind::Quartile(_) | StatKind::TimeQuantile(_) => 4,
                StatKind::Skewness => 5,
                StatKind::Kurtosis => 6,
                StatKind::Variance => 7,
                StatKind::StdDev => 8,
                StatKind::Rms => 9,
                StatKind::AbsMax => 15,
            },
            Feature::Quartiles { .. } => 4,
            Feature::Change(kind) => match kind {
                ChangeKind::MeanChange => 10,
                ChangeKind::SumOfChange => 11,
                ChangeKind::MeanAbsChange => 12,
                ChangeKind::AbsEnergy => 13,
                ChangeKind::AbsSumOfChanges => 14,
                ChangeKind::Cid => 16,
            },
            Feature::CountAbove(t) => (17..=23).find(|&i| count_threshold(i) == *t).unwrap_or(17),
            Feature::Crossings(t) => (24..=33).find(|&i| crossing_threshold(i) == *t).unwrap_or(24),
            Feature::FftAmplitude => 34,
            Feature::FftRatio => 35,
            Feature::FftAmplitudeStat(m) => 36 + MOMENTS.iter().position(|x| x == m).unwrap_or(0) as u8,
            Feature::FftRatioStat(m) => 40 + MOMENTS.iter().position(|x| x == m).unwrap_or(0) as u8,
            Feature::FftAngle => 44,
            Feature::Autocorrelation { .. } => 45,
            Feature::AutocorrLagStat { moment: m, .. } => {
                46 + MOMENTS.iter().position(|x| x == m).unwrap_or(0) as u8
            }
        }
    }

    /// Number of output columns for a block of `len` samples.
    pub fn width(&self, len: usize) -> usize {
        match self {
            Feature::Quartiles { .. } => 3,
            Feature::FftAmplitude | Feature::FftRatio | Feature::FftAngle => bin_count(len),
            _ => 1,
        }
    }

    /// Shortest block this feature is defined on.
    pub fn min_len(&self) -> usize {
        match self {
            Feature::Change(ChangeKind::AbsEnergy) => 1,
            Feature::Change(_) => 2,
            Feature::FftAmplitude
            | Feature::FftRatio
            | Feature::FftAngle
            | Feature::FftAmplitudeStat(_)
            | Feature::FftRatioStat(_) => 2,
            Feature::Autocorrelation { lag } => (2 * lag).max(1),
            Feature::AutocorrLagStat { step, .. } => 2 * step,
            _ => 1,
        }
    }

    pub fn check_len(&self, len: usize) -> Result<()> {
        if len < self.min_len() {
            return Err(Error::config(format!(
                "feature {} needs blocks of at least {} samples, got {len}",
                self,
                self.min_len()
            )));
        }
        Ok(())
    }

    /// Appends `width(x.len())` values. The caller guarantees `x.len() >= min_len()`.
    pub fn eval(&self, x: &[f64], out: &mut Vec<f64>) {
        match self {
            Feature::Stat(kind) => out.push(stats::basic_stats(x, *kind).expect("non-empty block")),
            Feature::Quartiles { time } => {
                for level in [Level::Q1, Level::Q2, Level::Q3] {
                    let kind = if *time {
                        StatKind::TimeQuantile(level)
                    } else {
                        StatKind::Quartile(level)
                    };
                    out.push(stats::basic_stats(x, kind).expect("non-empty block"));
                }
            }
            Feature::Change(kind) => out.push(stats::change_stats(x, *kind).expect("block long enough")),
            Feature::CountAbove(t) => out.push(stats::count_above(x, *t).expect("non-empty block") as f64),
            Feature::Crossings(t) => out.push(stats::crossings(x, *t).expect("non-empty block") as f64),
            Feature::FftAmplitude => out.extend(Spectrum::of(x).amplitude()),
            Feature::FftRatio => out.extend(Spectrum::of(x).ratio()),
            Feature::FftAngle => out.extend(Spectrum::of(x).angle()),
            Feature::FftAmplitudeStat(m) => out.push(moment(&Spectrum::of(x).amplitude(), *m)),
            Feature::FftRatioStat(m) => out.push(moment(&Spectrum::of(x).ratio(), *m)),
            Feature::Autocorrelation { lag } => out.push(autocorr_unchecked(x, *lag)),
            Feature::AutocorrLagStat { step, moment: m } => {
                let acs: Vec<f64> = lag_multiples(x.len(), *step)
                    .into_iter()
                    .map(|l| autocorr_unchecked(x, l))
                    .collect();
                out.push(moment(&acs, *m));
            }
        }
    }

    /// Accumulates `sum_j upstream_j * d value_j / d x` into `grad`.
    ///
    /// Order statistics route the gradient to the sample currently holding the
    /// rank; counting features have zero gradient almost everywhere.
    pub fn vjp(&self, x: &[f64], upstream: &[f64], grad: &mut [f64]) {
        debug_assert_eq!(upstream.len(), self.width(x.len()));
        let n = x.len();
        let nf = n as f64;
        match self {
            Feature::Stat(kind) => {
                let u = upstream[0];
                match kind {
                    StatKind::Mean => moment_vjp(x, Moment::Mean, u, grad),
                    StatKind::Variance => moment_vjp(x, Moment::Variance, u, grad),
                    StatKind::Skewness => moment_vjp(x, Moment::Skewness, u, grad),
                    StatKind::Kurtosis => moment_vjp(x, Moment::Kurtosis, u, grad),
                    StatKind::StdDev => {
                        let sd = moment(x, Moment::Variance).sqrt();
                        if sd > 0.0 {
                            moment_vjp(x, Moment::Variance, u / (2.0 * sd), grad);
                        }
                    }
                    StatKind::Min => grad[first_extreme(x, |a, b| a < b)] += u,
                    StatKind::Max => grad[first_extreme(x, |a, b| a > b)] += u,
                    StatKind::AbsMax => {
                        let i = first_extreme(x, |a, b| a.abs() > b.abs());
                        grad[i] += u * sign(x[i]);
                    }
                    StatKind::Rms => {
                        let rms = (x.iter().map(|v| v * v).sum::<f64>() / nf).sqrt();
                        if rms > 0.0 {
                            for (g, v) in grad.iter_mut().zip(x) {
                                *g += u * v / (nf * rms);
                            }
                        }
                    }
                    StatKind::Quartile(Level(q)) => quartile_vjp(x, &argsort(x), *q, u, grad),
                    StatKind::TimeQuantile(Level(q)) => time_quantile_vjp(n, *q, u, grad),
                }
            }
            Feature::Quartiles { time } => {
                let order = (!time).then(|| argsort(x));
                for (level, &u) in [0.25, 0.5, 0.75].iter().zip(upstream) {
                    match &order {
                        Some(order) => quartile_vjp(x, order, *level, u, grad),
                        None => time_quantile_vjp(n, *level, u, grad),
                    }
                }
            }
            Feature::Change(kind) => {
                let u = upstream[0];
                match kind {
                    ChangeKind::MeanChange => {
                        grad[n - 1] += u / nf;
                        grad[0] -= u / nf;
                    }
                    ChangeKind::SumOfChange => {
                        grad[n - 1] += u;
                        grad[0] -= u;
                    }
                    ChangeKind::MeanAbsChange | ChangeKind::AbsSumOfChanges => {
                        let scale = if *kind == ChangeKind::MeanAbsChange { u / nf } else { u };
                        for i in 1..n {
                            let s = sign(x[i] - x[i - 1]) * scale;
                            grad[i] += s;
                            grad[i - 1] -= s;
                        }
                    }
                    ChangeKind::AbsEnergy => {
                        for (g, v) in grad.iter_mut().zip(x) {
                            *g += 2.0 * u * v;
                        }
                    }
                    ChangeKind::Cid => {
                        let cid = stats::change_stats(x, ChangeKind::Cid).unwrap_or(0.0);
                        if cid > 0.0 {
                            for i in 1..n {
                                let d = (x[i] - x[i - 1]) / cid * u;
                                grad[i] += d;
                                grad[i - 1] -= d;
                            }
                        }
                    }
                }
            }
            Feature::CountAbove(_) | Feature::Crossings(_) => {}
            Feature::FftAmplitude | Feature::FftRatio | Feature::FftAmplitudeStat(_) | Feature::FftRatioStat(_) => {
                let spec = Spectrum::of(x);
                let amp = spec.amplitude();
                let d_amp = match self {
                    Feature::FftAmplitude => upstream.to_vec(),
                    Feature::FftRatio => spectrum::ratio_to_amplitude_grad(&amp, upstream),
                    Feature::FftAmplitudeStat(m) => {
                        let mut d = vec![0.0; amp.len()];
                        moment_vjp(&amp, *m, upstream[0], &mut d);
                        d
                    }
                    Feature::FftRatioStat(m) => {
                        let ratio = spectrum::normalize(&amp);
                        let mut d = vec![0.0; amp.len()];
                        moment_vjp(&ratio, *m, upstream[0], &mut d);
                        spectrum::ratio_to_amplitude_grad(&amp, &d)
                    }
                    _ => unreachable!(),
                };
                let (d_re, d_im) = spectrum::amplitude_to_complex_grad(&spec, &d_amp);
                spectrum::complex_vjp(&d_re, &d_im, grad);
            }
            Feature::FftAngle => {
                let spec = Spectrum::of(x);
                let (d_re, d_im) = spectrum::angle_to_complex_grad(&spec, n, upstream);
                spectrum::complex_vjp(&d_re, &d_im, grad);
            }
            Feature::Autocorrelation { lag } => autocorr_vjp(x, *lag, upstream[0], grad),
            Feature::AutocorrLagStat { step, moment: m } => {
                let lags = lag_multiples(n, *step);
                let acs: Vec<f64> = lags.iter().map(|&l| autocorr_unchecked(x, l)).collect();
                let mut d_acs = vec![0.0; acs.len()];
                moment_vjp(&acs, *m, upstream[0], &mut d_acs);
                for (&l, &d) in lags.iter().zip(&d_acs) {
                    autocorr_vjp(x, l, d, grad);
                }
            }
        }
    }
}

impl Feature {
    /// Pushes the discrete choices `eval` makes on `x`: extreme positions,
    /// sort order, change signs, counts and zero-variance branches. Two
    /// inputs with equal keys lie on the same smooth piece.
    pub fn branch_key(&self, x: &[f64], out: &mut Vec<u64>) {
        let flat = |x: &[f64]| u64::from(moment(x, Moment::Variance) > 0.0);
        match self {
            Feature::Stat(kind) => match kind {
                StatKind::Min => out.push(first_extreme(x, |a, b| a < b) as u64),
                StatKind::Max => out.push(first_extreme(x, |a, b| a > b) as u64),
                StatKind::AbsMax => {
                    let i = first_extreme(x, |a, b| a.abs() > b.abs());
                    out.push(i as u64);
                    out.push(sign(x[i]).to_bits());
                }
                StatKind::Quartile(_) => out.extend(argsort(x).into_iter().map(|i| i as u64)),
                StatKind::TimeQuantile(_) => {}
                StatKind::StdDev | StatKind::Skewness | StatKind::Kurtosis => out.push(flat(x)),
                StatKind::Rms => out.push(u64::from(x.iter().any(|&v| v != 0.0))),
                StatKind::Mean | StatKind::Variance => {}
            },
            Feature::Quartiles { time: false } => out.extend(argsort(x).into_iter().map(|i| i as u64)),
            Feature::Quartiles { time: true } => {}
            Feature::Change(ChangeKind::MeanAbsChange | ChangeKind::AbsSumOfChanges) => {
                out.extend(x.windows(2).map(|w| sign(w[1] - w[0]).to_bits()))
            }
            Feature::Change(ChangeKind::Cid) => out.push(u64::from(x.windows(2).any(|w| w[1] != w[0]))),
            Feature::Change(_) => {}
            Feature::CountAbove(_) | Feature::Crossings(_) => {
                let mut v = Vec::with_capacity(1);
                self.eval(x, &mut v);
                out.push(v[0].to_bits());
            }
            Feature::FftAmplitude | Feature::FftRatio | Feature::FftAmplitudeStat(_) | Feature::FftRatioStat(_) => {
                // DC and Nyquist bins are real, so their amplitude is |re|.
                let spec = Spectrum::of(x);
                let amp = spec.amplitude();
                out.extend(spec.re.iter().zip(&spec.im).map(|(&r, &i)| match i == 0.0 {
                    true => sign(r).to_bits(),
                    false => u64::from(r.hypot(i) > 0.0),
                }));
                if let Feature::FftAmplitudeStat(_) = self {
                    out.push(flat(&amp));
                }
            }
            Feature::FftAngle => {
                let spec = Spectrum::of(x);
                out.extend(spec.re.iter().zip(&spec.im).map(|(r, i)| u64::from(*r < 0.0) | u64::from(*i < 0.0) << 1));
            }
            Feature::Autocorrelation { .. } => out.push(flat(x)),
            Feature::AutocorrLagStat { step, .. } => {
                out.push(flat(x));
                let acs: Vec<f64> = lag_multiples(x.len(), *step)
                    .into_iter()
                    .map(|l| autocorr_unchecked(x, l))
                    .collect();
                out.push(flat(&acs));
            }
        }
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn first_extreme(x: &[f64], better: impl Fn(f64, f64) -> bool) -> usize {
    let mut best = 0;
    for (i, &v) in x.iter().enumerate().skip(1) {
        if better(v, x[best]) {
            best = i;
        }
    }
    best
}

fn quartile_vjp(x: &[f64], order: &[usize], q: f64, u: f64, grad: &mut [f64]) {
    let (lo, hi, frac) = interp_index(x.len(), q);
    grad[order[lo]] += u * (1.0 - frac);
    if hi != lo {
        grad[order[hi]] += u * frac;
    }
}

fn time_quantile_vjp(n: usize, q: f64, u: f64, grad: &mut [f64]) {
    let (lo, hi, frac) = interp_index(n, q);
    grad[lo] += u * (1.0 - frac);
    if hi != lo {
        grad[hi] += u * frac;
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.id())?;
        match self {
            Feature::Stat(StatKind::Quartile(Level(q))) => write!(f, " q={q}"),
            Feature::Stat(StatKind::TimeQuantile(Level(q))) => write!(f, " q={q} mode=time"),
            Feature::Quartiles { time: true } => write!(f, " mode=time"),
            Feature::Autocorrelation { lag } if *lag != 1 => write!(f, " lag={lag}"),
            Feature::AutocorrLagStat { step, .. } if *step != 1 => write!(f, " n={step}"),
            _ => Ok(()),
        }
    }
}

impl FromStr for Feature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Feature::parse_line(s)?.ok_or_else(|| Error::config("empty feature line"))
    }
}

/// The fourteen features used for every dataset in the published configurations.
pub fn selected_features() -> Vec<Feature> {
    [2u8, 3, 13, 14, 10, 9, 19, 23, 26, 28, 40, 38, 46, 49]
        .iter()
        .map(|&id| Feature::from_id(id, &[]).expect("catalog id"))
        .collect()
}

/// Every catalog row once, with default parameters (row 4 in both modes).
pub fn full_catalog() -> Vec<Feature> {
    let mut all: Vec<Feature> = (1..=MAX_FEATURE_ID)
        .map(|id| Feature::from_id(id, &[]).expect("catalog id"))
        .collect();
    all.insert(4, Feature::Quartiles { time: true });
    all
}
