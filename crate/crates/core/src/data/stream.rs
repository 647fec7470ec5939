use crate::error::{Error, Result};
use crate::signal::Segment;

/// One continuous recording (a trial) with per-sample labels; `None` is the NULL label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledStream {
    pub channels: Vec<Vec<f64>>,
    pub labels: Vec<Option<usize>>,
    pub trial: String,
    pub subject: String,
    pub rate_hz: f64,
}

impl LabeledStream {
    pub fn new(
        channels: Vec<Vec<f64>>,
        labels: Vec<Option<usize>>,
        trial: impl Into<String>,
        subject: impl Into<String>,
        rate_hz: f64,
    ) -> Result<Self> {
        if channels.iter().any(|c| c.len() != labels.len()) {
            return Err(Error::config("stream channels and labels differ in length"));
        }
        if !(rate_hz > 0.0) {
            return Err(Error::config(format!("sample rate {rate_hz} must be positive")));
        }
        Ok(LabeledStream {
            channels,
            labels,
            trial: trial.into(),
            subject: subject.into(),
            rate_hz,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Longest NaN run that gets filled at `rate_hz`.
pub fn max_gap_samples(rate_hz: f64, max_gap_seconds: f64) -> usize {
    (max_gap_seconds * rate_hz).round() as usize
}

/// Fills interior NaN runs of at most `max_gap_samples` samples linearly
/// between their finite neighbours.
pub fn interpolate_series(x: &mut [f64], max_gap: usize) {
    let mut i = 0;
    while i < x.len() {
        if !x[i].is_nan() {
            i += 1;
            continue;
        }
        let start = i;
        while i < x.len() && x[i].is_nan() {
            i += 1;
        }
        let gap = i - start;
        if start == 0 || i == x.len() || gap > max_gap {
            continue;
        }
        let (a, b) = (x[start - 1], x[i]);
        for k in 0..gap {
            let t = (k + 1) as f64 / (gap + 1) as f64;
            x[start + k] = a + (b - a) * t;
        }
    }
}

pub fn interpolate_nan(stream: &LabeledStream, max_gap_seconds: f64) -> LabeledStream {
    let max_gap = max_gap_samples(stream.rate_hz, max_gap_seconds);
    let mut out = stream.clone();
    for c in &mut out.channels {
        interpolate_series(c, max_gap);
    }
    out
}

/// A maximal clean stretch `[start, end)` with one label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Run {
    pub start: usize,
    pub end: usize,
    pub label: usize,
}

impl Run {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// Maximal runs of one non-NULL label with no NaN in any channel.
pub fn clean_runs(stream: &LabeledStream) -> Vec<Run> {
    let clean = |t: usize| -> Option<usize> {
        let l = stream.labels[t]?;
        stream.channels.iter().all(|c| !c[t].is_nan()).then_some(l)
    };
    let mut runs = Vec::new();
    let mut t = 0;
    while t < stream.len() {
        let Some(label) = clean(t) else {
            t += 1;
            continue;
        };
        let start = t;
        while t < stream.len() && clean(t) == Some(label) {
            t += 1;
        }
        runs.push(Run { start, end: t, label });
    }
    runs
}

pub fn segment_count(run_len: usize, window: usize, stride: usize) -> usize {
    if run_len < window {
        0
    } else {
        (run_len - window) / stride + 1
    }
}

/// Sliding windows lying entirely inside clean runs of one trial.
pub fn segment(stream: &LabeledStream, window: usize, stride: usize) -> Result<Vec<Segment>> {
    if window == 0 || stride == 0 {
        return Err(Error::usage("window and stride must be positive"));
    }
    let mut out = Vec::new();
    for run in clean_runs(stream) {
        for k in 0..segment_count(run.len(), window, stride) {
            let at = run.start + k * stride;
            let chans: Vec<Vec<f64>> = stream.channels.iter().map(|c| c[at..at + window].to_vec()).collect();
            out.push(Segment::from_channels(&chans, run.label)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(values: Vec<f64>, labels: Vec<Option<usize>>) -> LabeledStream {
        LabeledStream::new(vec![values], labels, "t", "s", 50.0).unwrap()
    }

    #[test]
    fn short_gap_is_filled_long_gap_kept() {
        let mut x = vec![1.0, f64::NAN, f64::NAN, f64::NAN, 5.0];
        interpolate_series(&mut x, 10);
        assert_eq!(x, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        let mut y = vec![0.0; 22];
        y[1..21].fill(f64::NAN);
        interpolate_series(&mut y, max_gap_samples(50.0, 0.2));
        assert!(y[1..21].iter().all(|v| v.is_nan()));
    }

    #[test]
    fn edge_runs_stay_nan() {
        let mut x = vec![f64::NAN, 1.0, 2.0, f64::NAN];
        interpolate_series(&mut x, 10);
        assert!(x[0].is_nan() && x[3].is_nan());
    }

    #[test]
    fn segment_counts() {
        assert_eq!(segment_count(128, 64, 32), 3);
        assert_eq!(segment_count(63, 64, 32), 0);
        let s = stream((0..128).map(f64::from).collect(), vec![Some(1); 128]);
        let segs = segment(&s, 64, 32).unwrap();
        assert_eq!(segs.len(), 3);
        assert_eq!(segs[2].channel(0)[0], 64.0);
        assert!(segs.iter().all(|g| g.label == 1));
    }

    #[test]
    fn null_gap_splits_runs() {
        let mut labels = vec![Some(0); 40];
        labels[18..22].fill(None);
        let s = stream(vec![0.0; 40], labels);
        assert_eq!(
            clean_runs(&s),
            vec![Run { start: 0, end: 18, label: 0 }, Run { start: 22, end: 40, label: 0 }]
        );
        assert_eq!(segment(&s, 16, 4).unwrap().len(), 2);
        assert!(segment(&s, 0, 4).is_err());
    }

    #[test]
    fn label_change_and_nan_split_runs() {
        let mut labels = vec![Some(0); 20];
        labels[10..].fill(Some(1));
        let mut v = vec![0.0; 20];
        v[4] = f64::NAN;
        let runs = clean_runs(&stream(v, labels));
        assert_eq!(runs.len(), 3);
        assert_eq!(runs[1], Run { start: 5, end: 10, label: 0 });
    }
}
