//! Synthetic rotated-mount data: three classes defined in the body frame,
//! observed through one fixed sensor rotation per mount.
//!
//! Classes 0 and 1 swap which of two tones drives body axes x and y. The
//! mount rotation is drawn from the family that gives every sensor axis the
//! same absolute weight on body x and body y, so single-axis statistics of
//! these two classes have identical distributions. Class 2 moves the second
//! tone to body z.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rtsfnet::signal::{ChannelLayout, Segment, SensorType};

pub const RATE: f64 = 50.0;

/// Columns are the sensor-frame images of the body axes.
pub type Mount = [[f64; 3]; 3];

pub fn random_mount(rng: &mut ChaCha8Rng) -> Mount {
    let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let (p, q, r) = (phi.cos() * h, h, phi.sin() * h);
    let u = [p, q, r];
    let v = [p, -q, r];
    let w = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
    let mut perm = [0usize, 1, 2];
    perm.shuffle(rng);
    let signs: Vec<f64> = (0..3).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
    let mut m = [[0.0; 3]; 3];
    for (row, &src) in perm.iter().enumerate() {
        m[row] = [signs[row] * u[src], signs[row] * v[src], signs[row] * w[src]];
    }
    // an odd permutation with one sign flip has det -1; flip the whole frame back
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if det < 0.0 {
        for row in &mut m {
            for x in row.iter_mut() {
                *x = -*x;
            }
        }
    }
    m
}

pub struct MountData {
    pub layout: ChannelLayout,
    pub train: Vec<Segment>,
    pub val: Vec<Segment>,
    pub test: Vec<Segment>,
    pub mount: Mount,
}

fn body_signal(rng: &mut ChaCha8Rng, label: usize, tones: [f64; 2], len: usize) -> [Vec<f64>; 3] {
    let mut axes = [vec![0.0; len], vec![0.0; len], vec![0.0; len]];
    let (a, b) = match label {
        0 => (0, 1),
        1 => (1, 0),
        _ => (0, 2),
    };
    for (axis, tone) in [(a, tones[0]), (b, tones[1])] {
        let amp = rng.gen_range(0.8..1.2);
        let f = tone * rng.gen_range(0.95..1.05);
        let ph = rng.gen_range(0.0..std::f64::consts::TAU);
        for (t, x) in axes[axis].iter_mut().enumerate() {
            *x += amp * (std::f64::consts::TAU * f * t as f64 / RATE + ph).sin();
        }
    }
    for ax in &mut axes {
        for x in ax.iter_mut() {
            *x += 0.1 * (rng.gen::<f64>() - 0.5) * 3.4;
        }
    }
    axes
}

fn segment(rng: &mut ChaCha8Rng, label: usize, m: &Mount, len: usize) -> Segment {
    let mut chans = Vec::with_capacity(6);
    for tones in [[3.0, 7.0], [2.0, 5.0]] {
        let body = body_signal(rng, label, tones, len);
        for row in m {
            chans.push((0..len).map(|t| row[0] * body[0][t] + row[1] * body[1][t] + row[2] * body[2][t]).collect());
        }
    }
    Segment::from_channels(&chans, label).unwrap()
}

/// Balanced splits of `per_class` x 3 segments each (validation gets a third of that).
pub fn mount_dataset(seed: u64, per_class: usize, len: usize) -> MountData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mount = random_mount(&mut rng);
    let mut make = |n: usize| -> Vec<Segment> {
        let mut v: Vec<Segment> = (0..3 * n).map(|i| segment(&mut rng, i % 3, &mount, len)).collect();
        v.shuffle(&mut rng);
        v
    };
    let train = make(per_class);
    let val = make((per_class / 3).max(1));
    let test = make(per_class);
    MountData {
        layout: ChannelLayout::from_triads(&[("acc", SensorType::Acc, 1), ("gyro", SensorType::Gyro, 1)]),
        train,
        val,
        test,
        mount,
    }
}
