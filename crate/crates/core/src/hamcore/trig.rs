use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

/// Real trigonometric polynomial in a loop parameter with period 1:
/// `c + sum_k a_k cos(2 pi k lambda) + sum_k b_k sin(2 pi k lambda)`.
///
/// The argument is reduced modulo 1 before evaluation, so `value(l)` and
/// `value(l.rem_euclid(1.0))` are bitwise equal and `value(0) == value(1)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrigCoefficient {
    #[serde(rename = "const", default)]
    pub constant: f64,
    #[serde(rename = "cos", default)]
    pub cos_terms: Vec<(u32, f64)>,
    #[serde(rename = "sin", default)]
    pub sin_terms: Vec<(u32, f64)>,
}

#[inline]
fn reduce(lambda: f64) -> f64 {
    let r = lambda.rem_euclid(1.0);
    // rem_euclid can round up to exactly 1.0 for tiny negative inputs
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

impl TrigCoefficient {
    pub fn constant(c: f64) -> Self {
        Self {
            constant: c,
            ..Self::default()
        }
    }

    pub fn cos(harmonic: u32, amplitude: f64) -> Self {
        Self {
            cos_terms: vec![(harmonic, amplitude)],
            ..Self::default()
        }
    }

    pub fn sin(harmonic: u32, amplitude: f64) -> Self {
        Self {
            sin_terms: vec![(harmonic, amplitude)],
            ..Self::default()
        }
    }

    pub fn is_constant(&self) -> bool {
        self.cos_terms.iter().all(|&(_, a)| a == 0.0) && self.sin_terms.iter().all(|&(_, b)| b == 0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.constant == 0.0 && self.is_constant()
    }

    /// Value at `lambda`.
    pub fn value(&self, lambda: f64) -> f64 {
        let l = reduce(lambda);
        let mut v = self.constant;
        for &(k, a) in &self.cos_terms {
            v += a * (TAU * k as f64 * l).cos();
        }
        for &(k, b) in &self.sin_terms {
            v += b * (TAU * k as f64 * l).sin();
        }
        v
    }

    /// First derivative in `lambda`.
    pub fn derivative(&self, lambda: f64) -> f64 {
        let l = reduce(lambda);
        let mut v = 0.0;
        for &(k, a) in &self.cos_terms {
            let w = TAU * k as f64;
            v -= a * w * (w * l).sin();
        }
        for &(k, b) in &self.sin_terms {
            let w = TAU * k as f64;
            v += b * w * (w * l).cos();
        }
        v
    }

    /// Second derivative in `lambda`.
    pub fn second_derivative(&self, lambda: f64) -> f64 {
        let l = reduce(lambda);
        let mut v = 0.0;
        for &(k, a) in &self.cos_terms {
            let w = TAU * k as f64;
            v -= a * w * w * (w * l).cos();
        }
        for &(k, b) in &self.sin_terms {
            let w = TAU * k as f64;
            v -= b * w * w * (w * l).sin();
        }
        v
    }

    /// Upper bounds on `|f|`, `|f'|`, `|f''|` over the whole loop.
    pub fn bounds(&self) -> (f64, f64, f64) {
        let mut b0 = self.constant.abs();
        let (mut b1, mut b2) = (0.0, 0.0);
        for &(k, a) in self.cos_terms.iter().chain(&self.sin_terms) {
            let w = TAU * k as f64;
            b0 += a.abs();
            b1 += a.abs() * w;
            b2 += a.abs() * w * w;
        }
        (b0, b1, b2)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            constant: self.constant * s,
            cos_terms: self.cos_terms.iter().map(|&(k, a)| (k, a * s)).collect(),
            sin_terms: self.sin_terms.iter().map(|&(k, b)| (k, b * s)).collect(),
        }
    }

    /// Sum with harmonics merged; zero amplitudes and `sin 0` terms dropped.
    pub fn add(&self, other: &Self) -> Self {
        let mut out = Self::constant(self.constant + other.constant);
        out.cos_terms = merge_harmonics(self.cos_terms.iter().chain(&other.cos_terms).copied());
        out.sin_terms = merge_harmonics(self.sin_terms.iter().chain(&other.sin_terms).copied())
            .into_iter()
            .filter(|&(k, _)| k != 0)
            .collect();
        // cos(0) is a constant
        if let Some(pos) = out.cos_terms.iter().position(|&(k, _)| k == 0) {
            out.constant += out.cos_terms.remove(pos).1;
        }
        out
    }

    /// Canonical form: harmonics sorted and merged, zeros dropped.
    pub fn normalized(&self) -> Self {
        self.add(&Self::default())
    }
}

fn merge_harmonics(items: impl Iterator<Item = (u32, f64)>) -> Vec<(u32, f64)> {
    let mut map = std::collections::BTreeMap::<u32, f64>::new();
    for (k, a) in items {
        *map.entry(k).or_insert(0.0) += a;
    }
    map.into_iter().filter(|&(_, a)| a != 0.0).collect()
}
