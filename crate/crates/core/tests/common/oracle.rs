//! Straightforward re-implementations of the catalog rows, written from the
//! row definitions with plain loops and an O(n^2) DFT.

use std::f64::consts::PI;

fn mean(x: &[f64]) -> f64 {
    let mut s = 0.0;
    for v in x {
        s += v;
    }
    s / x.len() as f64
}

fn central_moment(x: &[f64], k: i32) -> f64 {
    let m = mean(x);
    let mut s = 0.0;
    for v in x {
        s += (v - m).powi(k);
    }
    s / x.len() as f64
}

fn all_equal(x: &[f64]) -> bool {
    x.iter().all(|v| *v == x[0])
}

/// 0 mean, 1 variance, 2 skewness, 3 excess kurtosis.
fn moment4(x: &[f64], which: usize) -> f64 {
    match which {
        0 => mean(x),
        1 => central_moment(x, 2),
        2 => {
            if all_equal(x) {
                0.0
            } else {
                central_moment(x, 3) / central_moment(x, 2).powf(1.5)
            }
        }
        _ => {
            if all_equal(x) {
                0.0
            } else {
                let m2 = central_moment(x, 2);
                central_moment(x, 4) / (m2 * m2) - 3.0
            }
        }
    }
}

fn at_position(x: &[f64], q: f64) -> f64 {
    let h = (x.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    if lo + 1 >= x.len() {
        return x[x.len() - 1];
    }
    x[lo] + (h - lo as f64) * (x[lo + 1] - x[lo])
}

fn quartile(x: &[f64], q: f64) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    at_position(&s, q)
}

fn count_above(x: &[f64], t: f64) -> f64 {
    x.iter().filter(|v| **v > t).count() as f64
}

fn crossings(x: &[f64], t: f64) -> f64 {
    let signs: Vec<bool> = x.iter().filter(|v| **v != t).map(|v| *v > t).collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count() as f64
}

/// (re, im) of bins 0..=n/2, with the imaginary part of the real bins set to 0.
fn dft(x: &[f64]) -> Vec<(f64, f64)> {
    let n = x.len();
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, v) in x.iter().enumerate() {
                let a = 2.0 * PI * ((k * t) % n) as f64 / n as f64;
                re += v * a.cos();
                im -= v * a.sin();
            }
            if k == 0 || 2 * k == n {
                im = 0.0;
            }
            (re, im)
        })
        .collect()
}

fn amplitudes(x: &[f64]) -> Vec<f64> {
    dft(x).iter().map(|(r, i)| (r * r + i * i).sqrt()).collect()
}

fn ratios(x: &[f64]) -> Vec<f64> {
    let a = amplitudes(x);
    let s: f64 = a.iter().sum();
    a.iter().map(|v| if s == 0.0 { 0.0 } else { v / s }).collect()
}

fn autocorr(x: &[f64], lag: usize) -> f64 {
    if all_equal(x) {
        return 0.0;
    }
    let m = mean(x);
    let n = x.len();
    let mut s = 0.0;
    for t in 0..n - lag {
        s += (x[t] - m) * (x[t + lag] - m);
    }
    s / ((n - lag) as f64 * central_moment(x, 2))
}

fn threshold(x: &[f64], id: u8) -> f64 {
    match id {
        17 | 24 => 0.0,
        18 | 25 => mean(x),
        26 => quartile(x, 0.25),
        27 => quartile(x, 0.5),
        28 => quartile(x, 0.75),
        19 | 29 => x[0],
        20 | 30 => at_position(x, 0.25),
        21 | 31 => at_position(x, 0.5),
        22 | 32 => at_position(x, 0.75),
        _ => x[x.len() - 1],
    }
}

/// Whether a catalog row is computed through the spectrum.
pub fn is_spectral(id: u8) -> bool {
    (34..=44).contains(&id)
}

/// Expected output of catalog row `id` with default parameters; row 4 gives
/// the three quartiles, or the three time-position values when `time`.
pub fn feature(id: u8, time: bool, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let diffs: Vec<f64> = (1..n).map(|i| x[i] - x[i - 1]).collect();
    match id {
        1 => vec![mean(x)],
        2 => vec![x.iter().cloned().fold(f64::INFINITY, f64::min)],
        3 => vec![x.iter().cloned().fold(f64::NEG_INFINITY, f64::max)],
        4 if time => [0.25, 0.5, 0.75].iter().map(|&q| at_position(x, q)).collect(),
        4 => [0.25, 0.5, 0.75].iter().map(|&q| quartile(x, q)).collect(),
        5 => vec![moment4(x, 2)],
        6 => vec![moment4(x, 3)],
        7 => vec![moment4(x, 1)],
        8 => vec![moment4(x, 1).sqrt()],
        9 => vec![(x.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt()],
        10 => vec![(x[n - 1] - x[0]) / n as f64],
        11 => vec![x[n - 1] - x[0]],
        12 => vec![diffs.iter().map(|d| d.abs()).sum::<f64>() / n as f64],
        13 => vec![x.iter().map(|v| v * v).sum()],
        14 => vec![diffs.iter().map(|d| d.abs()).sum()],
        15 => vec![x.iter().map(|v| v.abs()).fold(0.0, f64::max)],
        16 => vec![diffs.iter().map(|d| d * d).sum::<f64>().sqrt()],
        17..=23 => vec![count_above(x, threshold(x, id))],
        24..=33 => vec![crossings(x, threshold(x, id))],
        34 => amplitudes(x),
        35 => ratios(x),
        36..=39 => vec![moment4(&amplitudes(x), (id - 36) as usize)],
        40..=43 => vec![moment4(&ratios(x), (id - 40) as usize)],
        44 => dft(x).iter().map(|(r, i)| i.atan2(*r)).collect(),
        45 => vec![autocorr(x, 1)],
        46..=49 => {
            let acs: Vec<f64> = (1..=n / 2).map(|l| autocorr(x, l)).collect();
            vec![moment4(&acs, (id - 46) as usize)]
        }
        _ => panic!("no catalog row {id}"),
    }
}

/// `|a - b| <= tol * max(1, |a|, |b|)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}

/// Compares angles modulo 2 pi.
pub fn close_angle(a: f64, b: f64, tol: f64) -> bool {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d) <= tol * 1f64.max(a.abs()).max(b.abs())
}
