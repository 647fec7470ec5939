//! Rodrigues-parameterised 3D rotations.
//!
//! A head emits four values in (-1, 1): an unnormalised axis and a raw angle.
//! The axis is normalised, the angle is scaled by pi, and
//! `R = I + sin(theta) K + (1 - cos(theta)) K^2` with `K` the cross-product
//! matrix of the unit axis.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::signal::Segment;

/// Axis norms below this fall back to the z axis.
pub const DEGENERATE_AXIS_NORM: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RotationParams {
    pub axis: [f64; 3],
    pub angle_raw: f64,
}

impl RotationParams {
    pub fn new(axis: [f64; 3], angle_raw: f64) -> Self {
        RotationParams { axis, angle_raw }
    }

    pub fn from_array(p: [f64; 4]) -> Self {
        RotationParams {
            axis: [p[0], p[1], p[2]],
            angle_raw: p[3],
        }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.axis[0], self.axis[1], self.axis[2], self.angle_raw]
    }

    pub fn angle(&self) -> f64 {
        self.angle_raw * PI
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(pub [[f64; 3]; 3]);

impl RotationMatrix {
    pub const IDENTITY: RotationMatrix = RotationMatrix([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn apply(&self, v: [f64; 3]) -> [f64; 3] {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }

    pub fn mul(&self, other: &RotationMatrix) -> RotationMatrix {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| self.0[i][k] * other.0[k][j]).sum();
            }
        }
        RotationMatrix(out)
    }

    pub fn transpose(&self) -> RotationMatrix {
        let m = &self.0;
        RotationMatrix([[m[0][0], m[1][0], m[2][0]], [m[0][1], m[1][1], m[2][1]], [m[0][2], m[1][2], m[2][2]]])
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Largest absolute entry of `R^T R - I`.
    pub fn orthogonality_error(&self) -> f64 {
        let p = self.transpose().mul(self);
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((p.0[i][j] - target).abs());
            }
        }
        worst
    }
}

fn cross_matrix(k: [f64; 3]) -> [[f64; 3]; 3] {
    [[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]]
}

fn mat_mul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// Unit axis and whether the degenerate fallback was taken.
fn unit_axis(axis: [f64; 3]) -> ([f64; 3], f64, bool) {
    let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    if norm < DEGENERATE_AXIS_NORM {
        ([0.0, 0.0, 1.0], norm, true)
    } else {
        ([axis[0] / norm, axis[1] / norm, axis[2] / norm], norm, false)
    }
}

pub fn rodrigues_matrix(params: &RotationParams) -> RotationMatrix {
    let (k, _, _) = unit_axis(params.axis);
    let theta = params.angle();
    let kk = cross_matrix(k);
    let k2 = mat_mul(&kk, &kk);
    let (s, c1) = (theta.sin(), 1.0 - theta.cos());
    let mut r = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            r[i][j] = if i == j { 1.0 } else { 0.0 } + s * kk[i][j] + c1 * k2[i][j];
        }
    }
    RotationMatrix(r)
}

/// `jac[i][j][p] = d R[i][j] / d params[p]` for the raw 4-vector
/// `(axis_x, axis_y, axis_z, angle_raw)`. The axis block is zero on the
/// degenerate fallback.
pub fn rodrigues_jacobian(params: &RotationParams) -> [[[f64; 4]; 3]; 3] {
    let (k, norm, degenerate) = unit_axis(params.axis);
    let theta = params.angle();
    let (s, c) = (theta.sin(), theta.cos());
    let kk = cross_matrix(k);
    let k2 = mat_mul(&kk, &kk);
    let mut jac = [[[0.0; 4]; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            jac[i][j][3] = PI * (c * kk[i][j] + s * k2[i][j]);
        }
    }
    if degenerate {
        return jac;
    }
    for p in 0..3 {
        // d k / d a_p = (e_p - k k_p) / |a|
        let mut dk = [0.0; 3];
        for (q, d) in dk.iter_mut().enumerate() {
            *d = ((p == q) as u8 as f64 - k[q] * k[p]) / norm;
        }
        let dkm = cross_matrix(dk);
        let a = mat_mul(&dkm, &kk);
        let b = mat_mul(&kk, &dkm);
        for i in 0..3 {
            for j in 0..3 {
                jac[i][j][p] = s * dkm[i][j] + (1.0 - c) * (a[i][j] + b[i][j]);
            }
        }
    }
    jac
}

/// Head `m` uses the elementwise sum of the raw parameters of heads `0..=m`.
pub fn accumulate_head_params(raw: &[RotationParams]) -> Result<Vec<RotationParams>> {
    if raw.is_empty() {
        return Err(Error::config("at least one rotation head is required"));
    }
    let mut acc = [0.0; 4];
    Ok(raw
        .iter()
        .map(|p| {
            for (a, v) in acc.iter_mut().zip(p.to_array()) {
                *a += v;
            }
            RotationParams::from_array(acc)
        })
        .collect())
}

/// Which channels form rotatable `(x, y, z)` triads and which stay untouched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriadMap {
    pub triads: Vec<[usize; 3]>,
    pub others: Vec<usize>,
}

impl TriadMap {
    /// Validates that triads are disjoint and, with `others`, cover `0..channels`.
    pub fn new(triads: Vec<[usize; 3]>, others: Vec<usize>, channels: usize) -> Result<Self> {
        let mut seen = vec![false; channels];
        for &c in triads.iter().flatten().chain(&others) {
            if c >= channels {
                return Err(Error::config(format!("channel {c} out of range for {channels} channels")));
            }
            if seen[c] {
                return Err(Error::config(format!("channel {c} appears twice in the triad map")));
            }
            seen[c] = true;
        }
        if let Some(c) = seen.iter().position(|s| !s) {
            return Err(Error::config(format!("channel {c} is not covered by the triad map")));
        }
        Ok(TriadMap { triads, others })
    }

    pub fn channel_count(&self) -> usize {
        self.triads.len() * 3 + self.others.len()
    }
}

/// Replaces every triad's per-sample vector `v` by `R v`.
pub fn rotate_triads(r: &RotationMatrix, segment: &Segment, map: &TriadMap) -> Result<Segment> {
    if map.channel_count() != segment.channels() {
        return Err(Error::config(format!(
            "triad map covers {} channels but the segment has {}",
            map.channel_count(),
            segment.channels()
        )));
    }
    let mut out = segment.clone();
    for triad in &map.triads {
        for t in 0..segment.len() {
            let v = [
                segment.channel(triad[0])[t],
                segment.channel(triad[1])[t],
                segment.channel(triad[2])[t],
            ];
            let w = r.apply(v);
            for (axis, &c) in triad.iter().enumerate() {
                out.channel_mut(c)[t] = w[axis];
            }
        }
    }
    Ok(out)
}
