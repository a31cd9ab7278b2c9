//! Realizations of the random hydraulic conductivity `K = k(x, y) I`.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::SampleError;

/// Admissibility floor for the truncated series field.
pub const KL_FLOOR: f64 = 0.01;
/// Probe points per direction when checking bounds.
pub const PROBE_POINTS: usize = 50;
const MAX_KL_DRAWS: usize = 1000;

/// Name recorded in run metadata for the stream generator.
pub const GENERATOR: &str =
    "ChaCha20 (rand_chacha 0.9), seed_from_u64(base_seed), stream = sample index";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConductivityKind {
    Constant {
        k: f64,
    },
    /// `k = 3 + σ(λ1 + λ2)` with the raw draws kept.
    AffineUniform {
        sigma: f64,
        lambda: [f64; 2],
    },
    /// Truncated trigonometric series in `y` with `2 n_f + 1` variates.
    KlField {
        a0: f64,
        sigma: f64,
        n_f: usize,
        l_c: f64,
        y: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConductivitySample {
    pub kind: ConductivityKind,
    /// Minimum and maximum of `k` over the probe grid.
    pub bounds: (f64, f64),
    pub sample_index: Option<usize>,
}

impl ConductivitySample {
    fn from_kind(kind: ConductivityKind) -> Self {
        let mut s = Self {
            kind,
            bounds: (0.0, 0.0),
            sample_index: None,
        };
        s.bounds = s.probe_bounds();
        s
    }

    pub fn with_index(mut self, j: usize) -> Self {
        self.sample_index = Some(j);
        self
    }

    pub fn k(&self, x: [f64; 2]) -> f64 {
        match &self.kind {
            ConductivityKind::Constant { k } => *k,
            ConductivityKind::AffineUniform { sigma, lambda } => {
                3.0 + sigma * (lambda[0] + lambda[1])
            }
            ConductivityKind::KlField {
                a0,
                sigma,
                n_f,
                l_c,
                y,
            } => kl_value(*a0, *sigma, *n_f, *l_c, y, x[1]),
        }
    }

    pub fn is_constant(&self) -> bool {
        !matches!(self.kind, ConductivityKind::KlField { .. })
    }

    pub fn lambda(&self) -> Option<[f64; 2]> {
        match self.kind {
            ConductivityKind::AffineUniform { lambda, .. } => Some(lambda),
            _ => None,
        }
    }

    /// `(min, max)` of `k` on a uniform 50×50 grid of the unit square.
    pub fn probe_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let n = PROBE_POINTS;
        for i in 0..n {
            for j in 0..n {
                let p = [i as f64 / (n - 1) as f64, j as f64 / (n - 1) as f64];
                let v = self.k(p);
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        (lo, hi)
    }
}

/// `ω0 = √(π L_c) / 2`.
pub fn kl_omega0(l_c: f64) -> f64 {
    (PI * l_c).sqrt() / 2.0
}

/// `ω_i = √π L_c exp(−(iπL_c)² / 4)`.
pub fn kl_omega(i: usize, l_c: f64) -> f64 {
    let a = i as f64 * PI * l_c;
    PI.sqrt() * l_c * (-a * a / 4.0).exp()
}

fn kl_value(a0: f64, sigma: f64, n_f: usize, l_c: f64, y: &[f64], yy: f64) -> f64 {
    let mut k = a0 + sigma * kl_omega0(l_c).sqrt() * y[0];
    for i in 1..=n_f {
        let s = sigma * kl_omega(i, l_c).sqrt();
        let arg = i as f64 * PI * yy;
        k += s * (y[i] * arg.cos() + y[n_f + i] * arg.sin());
    }
    k
}

pub fn sample_constant(k: f64) -> Result<ConductivitySample, SampleError> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(SampleError::NonpositiveValue(k));
    }
    Ok(ConductivitySample::from_kind(ConductivityKind::Constant {
        k,
    }))
}

/// Draws `λ1, λ2 ~ U[−1, 1]` and sets `k = 3 + σ(λ1 + λ2)`.
pub fn sample_affine_uniform<R: Rng + ?Sized>(
    sigma: f64,
    rng: &mut R,
) -> Result<ConductivitySample, SampleError> {
    if !(sigma >= 0.0) || sigma >= 1.5 {
        return Err(SampleError::InvalidParameter(format!(
            "sigma must lie in [0, 1.5), got {sigma}"
        )));
    }
    let lambda = [rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)];
    Ok(affine_from_draws(sigma, lambda))
}

pub fn affine_from_draws(sigma: f64, lambda: [f64; 2]) -> ConductivitySample {
    ConductivitySample::from_kind(ConductivityKind::AffineUniform { sigma, lambda })
}

/// Series field with `Y_i ~ U[−√3, √3]`, redrawn until its minimum on the
/// probe grid exceeds [`KL_FLOOR`].
pub fn sample_kl_field<R: Rng + ?Sized>(
    a0: f64,
    sigma: f64,
    n_f: usize,
    l_c: f64,
    rng: &mut R,
) -> Result<ConductivitySample, SampleError> {
    if !(a0 > 0.0) || n_f == 0 || !(l_c > 0.0) || !(sigma >= 0.0) {
        return Err(SampleError::InvalidParameter(format!(
            "a0={a0}, sigma={sigma}, n_f={n_f}, l_c={l_c}"
        )));
    }
    let r3 = 3f64.sqrt();
    for _ in 0..MAX_KL_DRAWS {
        let y: Vec<f64> = (0..2 * n_f + 1)
            .map(|_| rng.random_range(-r3..=r3))
            .collect();
        let s = kl_from_draws(a0, sigma, n_f, l_c, y);
        if s.bounds.0 > KL_FLOOR {
            return Ok(s);
        }
    }
    Err(SampleError::RejectionLimit(MAX_KL_DRAWS))
}

pub fn kl_from_draws(a0: f64, sigma: f64, n_f: usize, l_c: f64, y: Vec<f64>) -> ConductivitySample {
    assert_eq!(y.len(), 2 * n_f + 1, "series needs 2 n_f + 1 variates");
    ConductivitySample::from_kind(ConductivityKind::KlField {
        a0,
        sigma,
        n_f,
        l_c,
        y,
    })
}

/// Independent reproducible stream for sample `j`.
pub fn derive_stream(base_seed: u64, j: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(base_seed);
    rng.set_stream(j as u64);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_samples() {
        let s = sample_constant(2.21).unwrap();
        assert_eq!(s.k([0.3, 0.9]), 2.21);
        assert_eq!(s.bounds, (2.21, 2.21));
        assert_eq!(sample_constant(6.21).unwrap().bounds, (6.21, 6.21));
        assert_eq!(sample_constant(1.0).unwrap().k([0.0, 0.0]), 1.0);
        assert_eq!(
            sample_constant(0.0),
            Err(SampleError::NonpositiveValue(0.0))
        );
        assert!(sample_constant(-1.0).is_err());
    }

    #[test]
    fn affine_range_and_zero_sigma() {
        let mut rng = derive_stream(5, 0);
        for _ in 0..1000 {
            let s = sample_affine_uniform(0.1, &mut rng).unwrap();
            let k = s.k([0.5, 0.5]);
            assert!((2.8..=3.2).contains(&k));
            assert!(s.bounds.0 >= 3.0 - 2.0 * 0.1);
            assert_eq!(
                sample_affine_uniform(0.0, &mut rng).unwrap().k([0.1, 0.1]),
                3.0
            );
        }
        assert!(sample_affine_uniform(-0.1, &mut rng).is_err());
    }

    #[test]
    fn affine_mean_is_three() {
        let mut rng = derive_stream(17, 3);
        let n = 10_000;
        let m: f64 = (0..n)
            .map(|_| sample_affine_uniform(0.1, &mut rng).unwrap().k([0.0, 0.0]))
            .sum::<f64>()
            / n as f64;
        // standard error is 0.1·√(2/3)/100 ≈ 8e-4
        assert!((m - 3.0).abs() < 0.01, "mean {m}");
    }

    #[test]
    fn omega_zero_closed_form() {
        assert!((kl_omega0(0.25) - 0.443_113_462_726_379).abs() < 1e-12);
    }

    #[test]
    fn kl_zero_sigma_is_constant() {
        let mut rng = derive_stream(1, 0);
        let s = sample_kl_field(1.0, 0.0, 3, 0.25, &mut rng).unwrap();
        assert_eq!(s.bounds, (1.0, 1.0));
    }

    #[test]
    fn kl_extreme_draws_match_closed_form() {
        let (a0, sigma, n_f, l_c) = (1.0, 0.15, 3, 0.25);
        let r3 = 3f64.sqrt();
        let s = kl_from_draws(a0, sigma, n_f, l_c, vec![r3; 7]);
        // independent evaluation on the same probe rows
        let f = |y: f64| {
            let mut k = a0 + sigma * ((PI * l_c).sqrt() / 2.0).sqrt() * r3;
            for i in 1..=3 {
                let w = PI.sqrt() * l_c * (-(i as f64 * PI * l_c).powi(2) / 4.0).exp();
                k +=
                    sigma * w.sqrt() * r3 * ((i as f64 * PI * y).cos() + (i as f64 * PI * y).sin());
            }
            k
        };
        let max = (0..PROBE_POINTS)
            .map(|j| f(j as f64 / 49.0))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((s.bounds.1 - max).abs() < 1e-12);
        assert!(s.bounds.0 > 0.0);
    }

    #[test]
    fn kl_sampler_respects_floor() {
        let mut rng = derive_stream(99, 4);
        for _ in 0..200 {
            let s = sample_kl_field(1.0, 0.15, 3, 0.25, &mut rng).unwrap();
            assert!(s.bounds.0 > KL_FLOOR);
        }
        // a field that can never be admissible
        let mut rng = derive_stream(99, 5);
        assert_eq!(
            sample_kl_field(1e-3, 0.0, 1, 0.25, &mut rng),
            Err(SampleError::RejectionLimit(MAX_KL_DRAWS))
        );
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..1000)
            .map({
                let mut r = derive_stream(42, 0);
                move |_| r.random()
            })
            .collect();
        let b: Vec<u64> = (0..1000)
            .map({
                let mut r = derive_stream(42, 0);
                move |_| r.random()
            })
            .collect();
        let c: Vec<u64> = (0..1000)
            .map({
                let mut r = derive_stream(42, 1);
                move |_| r.random()
            })
            .collect();
        assert_eq!(a, b);
        assert!(a.iter().zip(&c).all(|(x, y)| x != y));
    }

    #[test]
    fn uniform_chi_square() {
        // 19 degrees of freedom, 1% critical value 36.191
        for j in 0..3 {
            let mut rng = derive_stream(2024, j);
            let n = 100_000;
            let mut bins = [0usize; 20];
            for _ in 0..n {
                let u: f64 = rng.random();
                bins[(u * 20.0) as usize] += 1;
            }
            let e = n as f64 / 20.0;
            let chi: f64 = bins.iter().map(|&o| (o as f64 - e).powi(2) / e).sum();
            assert!(chi < 36.191, "stream {j}: chi-square {chi}");
        }
    }

    #[test]
    fn serde_round_trip() {
        let s = affine_from_draws(0.1, [0.25, -0.5]).with_index(7);
        let text = serde_json::to_string(&s).unwrap();
        let back: ConductivitySample = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
    }
}
