//! One-sided discrete Fourier spectrum of a real block and its adjoint.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANS: RefCell<(FftPlanner<f64>, HashMap<(usize, bool), Arc<dyn Fft<f64>>>)> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANS.with(|cell| {
        let mut guard = cell.borrow_mut();
        let (planner, cache) = &mut *guard;
        cache
            .entry((len, inverse))
            .or_insert_with(|| {
                if inverse {
                    planner.plan_fft_inverse(len)
                } else {
                    planner.plan_fft_forward(len)
                }
            })
            .clone()
    })
}

/// Bins `0..=len/2` of `X_k = sum_n x_n exp(-2 pi i k n / len)`.
///
/// The DC bin, and the Nyquist bin for even lengths, are real by symmetry;
/// their imaginary parts are stored as exact zeros so the phase is 0 or pi.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

pub fn bin_count(len: usize) -> usize {
    len / 2 + 1
}

impl Spectrum {
    pub fn of(x: &[f64]) -> Spectrum {
        let n = x.len();
        let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
        plan(n, false).process(&mut buf);
        let k = bin_count(n);
        let re = buf[..k].iter().map(|c| c.re).collect();
        let mut im: Vec<f64> = buf[..k].iter().map(|c| c.im).collect();
        im[0] = 0.0;
        if n.is_multiple_of(2) {
            im[k - 1] = 0.0;
        }
        Spectrum { re, im }
    }

    pub fn amplitude(&self) -> Vec<f64> {
        self.re.iter().zip(&self.im).map(|(r, i)| r.hypot(*i)).collect()
    }

    /// Amplitudes divided by their sum (all zeros for a zero spectrum).
    pub fn ratio(&self) -> Vec<f64> {
        normalize(&self.amplitude())
    }

    pub fn angle(&self) -> Vec<f64> {
        self.re.iter().zip(&self.im).map(|(r, i)| i.atan2(*r)).collect()
    }
}

pub(crate) fn normalize(a: &[f64]) -> Vec<f64> {
    let s: f64 = a.iter().sum();
    if s == 0.0 {
        vec![0.0; a.len()]
    } else {
        a.iter().map(|v| v / s).collect()
    }
}

/// Pulls an upstream gradient on the amplitude-ratio vector back to amplitudes.
pub(crate) fn ratio_to_amplitude_grad(amp: &[f64], d_ratio: &[f64]) -> Vec<f64> {
    let s: f64 = amp.iter().sum();
    if s == 0.0 {
        return vec![0.0; amp.len()];
    }
    let dot: f64 = d_ratio.iter().zip(amp).map(|(u, a)| u * a / s).sum();
    d_ratio.iter().map(|u| (u - dot) / s).collect()
}

/// Upstream on amplitudes -> upstream on (re, im).
pub(crate) fn amplitude_to_complex_grad(spec: &Spectrum, d_amp: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut d_re = vec![0.0; d_amp.len()];
    let mut d_im = vec![0.0; d_amp.len()];
    for k in 0..d_amp.len() {
        let mag = spec.re[k].hypot(spec.im[k]);
        if mag > 0.0 {
            d_re[k] = d_amp[k] * spec.re[k] / mag;
            d_im[k] = d_amp[k] * spec.im[k] / mag;
        }
    }
    (d_re, d_im)
}

/// Upstream on phase angles -> upstream on (re, im). Real-by-symmetry bins
/// carry no phase gradient.
pub(crate) fn angle_to_complex_grad(spec: &Spectrum, n: usize, d_angle: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let k_max = d_angle.len();
    let mut d_re = vec![0.0; k_max];
    let mut d_im = vec![0.0; k_max];
    for k in 0..k_max {
        let real_bin = k == 0 || (n.is_multiple_of(2) && k == k_max - 1);
        let mag2 = spec.re[k] * spec.re[k] + spec.im[k] * spec.im[k];
        if real_bin || mag2 == 0.0 {
            continue;
        }
        d_re[k] = -d_angle[k] * spec.im[k] / mag2;
        d_im[k] = d_angle[k] * spec.re[k] / mag2;
    }
    (d_re, d_im)
}

/// Accumulates the adjoint of [`Spectrum::of`] into `grad`.
///
/// `grad_n += Re(sum_k (d_re_k + i d_im_k) exp(+2 pi i k n / len))`.
pub(crate) fn complex_vjp(d_re: &[f64], d_im: &[f64], grad: &mut [f64]) {
    let n = grad.len();
    let k = d_re.len();
    let real_bin_im = |j: usize| j == 0 || (n.is_multiple_of(2) && j == k - 1);
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    for j in 0..k {
        let im = if real_bin_im(j) { 0.0 } else { d_im[j] };
        buf[j] = Complex::new(d_re[j], im);
    }
    plan(n, true).process(&mut buf);
    for (g, c) in grad.iter_mut().zip(&buf) {
        *g += c.re;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_peaks_at_its_bin() {
        let x: Vec<f64> = (0..8)
            .map(|t| (2.0 * std::f64::consts::PI * t as f64 / 4.0).cos())
            .collect();
        let amp = Spectrum::of(&x).amplitude();
        assert_eq!(amp.len(), 5);
        let peak = amp
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(peak, 2);
        assert!((amp[2] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn constant_series_is_dc_only() {
        let r = Spectrum::of(&[3.0; 16]).ratio();
        assert!((r[0] - 1.0).abs() < 1e-12);
        assert!(r[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn ratio_mean_is_reciprocal_bin_count() {
        let x = [0.2, 1.5, -0.7, 0.9, 2.2, -1.1, 0.4];
        let r = Spectrum::of(&x).ratio();
        let mean = r.iter().sum::<f64>() / r.len() as f64;
        assert!((mean - 1.0 / r.len() as f64).abs() < 1e-15);
    }
}
