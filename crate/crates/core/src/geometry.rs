//! Small vector helpers and quadrature nodes on the unit sphere.

use std::f64::consts::PI;

use crate::error::{invalid, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `a + t * b`
pub fn axpy(a: &[f64], t: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + t * y).collect()
}

pub fn unit(n: usize, axis: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[axis] = 1.0;
    e
}

/// Surface measure of the unit sphere in `R^n`.
pub fn sphere_area(n: usize) -> f64 {
    match n {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 2.0 * PI / (n as f64 - 2.0) * sphere_area(n - 2),
    }
}

/// Lebesgue measure of the unit ball in `R^n`.
pub fn ball_volume(n: usize) -> f64 {
    sphere_area(n) / n as f64
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = m as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = z;
        weights[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (nodes, weights)
}

/// A quadrature rule on the unit sphere whose node set is closed under `θ -> -θ`.
#[derive(Debug, Clone)]
pub struct SphereRule {
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl SphereRule {
    /// `resolution` is the number of azimuthal nodes (n = 2, 3); ignored for n = 1.
    pub fn new(n: usize, resolution: usize) -> Result<Self> {
        match n {
            1 => Ok(Self { nodes: vec![vec![-1.0], vec![1.0]], weights: vec![1.0, 1.0] }),
            2 => {
                let m = resolution.max(4) & !1;
                let dt = 2.0 * PI / m as f64;
                let nodes = (0..m)
                    .map(|j| {
                        let t = (j as f64 + 0.5) * dt;
                        vec![t.cos(), t.sin()]
                    })
                    .collect();
                Ok(Self { nodes, weights: vec![dt; m] })
            }
            3 => {
                let m = resolution.max(4) & !1;
                let (zs, zw) = gauss_legendre(m / 2);
                let dphi = 2.0 * PI / m as f64;
                let mut nodes = Vec::with_capacity(m * m / 2);
                let mut weights = Vec::with_capacity(m * m / 2);
                for (z, w) in zs.iter().zip(&zw) {
                    let s = (1.0 - z * z).sqrt();
                    for j in 0..m {
                        let phi = (j as f64 + 0.5) * dphi;
                        nodes.push(vec![s * phi.cos(), s * phi.sin(), *z]);
                        weights.push(w * dphi);
                    }
                }
                Ok(Self { nodes, weights })
            }
            _ => invalid(format!("angular quadrature supports n in 1..=3, got {n}")),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(t, w)| w * f(t)).sum()
    }
}
