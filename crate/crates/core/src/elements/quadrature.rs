//! Triangle and edge quadrature.
//!
//! Degrees 1, 2, 4, 5 and 6 use the classical symmetric Dunavant rules
//! (degree 3 is served by the degree-4 rule). Degrees 7 to 10 use a collapsed
//! Gauss–Legendre product rule averaged over the six vertex permutations,
//! which keeps the exactness of the product rule and makes it symmetric.

use crate::error::ElementError;

/// Points in barycentric coordinates `(λ0, λ1, λ2)`; weights sum to the
/// reference triangle area 1/2.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub degree: usize,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64; 3], f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }
}

pub const MAX_DEGREE: usize = 10;

pub fn quadrature(degree: usize) -> Result<QuadratureRule, ElementError> {
    let (points, weights) = match degree {
        1 => orbit_rule(&[Orbit::Centroid(1.0)]),
        2 => orbit_rule(&[Orbit::Three(1.0 / 6.0, 1.0 / 3.0)]),
        3 | 4 => orbit_rule(&[
            Orbit::Three(0.445_948_490_915_965, 0.223_381_589_678_011),
            Orbit::Three(0.091_576_213_509_771, 0.109_951_743_655_322),
        ]),
        5 => orbit_rule(&[
            Orbit::Centroid(0.225),
            Orbit::Three(0.470_142_064_105_115, 0.132_394_152_788_506),
            Orbit::Three(0.101_286_507_323_456, 0.125_939_180_544_827),
        ]),
        6 => orbit_rule(&[
            Orbit::Three(0.249_286_745_170_910, 0.116_786_275_726_379),
            Orbit::Three(0.063_089_014_491_502, 0.050_844_906_370_207),
            Orbit::Six(
                0.053_145_049_844_817,
                0.310_352_451_033_784,
                0.082_851_075_618_374,
            ),
        ]),
        8 => orbit_rule(&[
            Orbit::Centroid(0.144_315_607_677_787),
            Orbit::Three(0.459_292_588_292_723, 0.095_091_634_267_285),
            Orbit::Three(0.170_569_307_751_760, 0.103_217_370_534_718),
            Orbit::Three(0.050_547_228_317_031, 0.032_458_497_623_198),
            Orbit::Six(
                0.008_394_777_409_958,
                0.263_112_829_634_638,
                0.027_230_314_174_435,
            ),
        ]),
        7 | 9 | 10 => symmetrized_collapsed(degree),
        _ => return Err(ElementError::UnsupportedDegree(degree)),
    };
    Ok(QuadratureRule {
        degree,
        points,
        weights,
    })
}

enum Orbit {
    /// Weight (normalized to total 1).
    Centroid(f64),
    /// `(a, a, 1-2a)` and permutations, weight each.
    Three(f64, f64),
    /// `(a, b, 1-a-b)` and all six permutations, weight each.
    Six(f64, f64, f64),
}

fn orbit_rule(orbits: &[Orbit]) -> (Vec<[f64; 3]>, Vec<f64>) {
    let mut pts = Vec::new();
    let mut wts = Vec::new();
    for o in orbits {
        match *o {
            Orbit::Centroid(w) => {
                pts.push([1.0 / 3.0; 3]);
                wts.push(0.5 * w);
            }
            Orbit::Three(a, w) => {
                let b = 1.0 - 2.0 * a;
                for p in [[b, a, a], [a, b, a], [a, a, b]] {
                    pts.push(p);
                    wts.push(0.5 * w);
                }
            }
            Orbit::Six(a, b, w) => {
                let c = 1.0 - a - b;
                for p in [
                    [a, b, c],
                    [a, c, b],
                    [b, a, c],
                    [b, c, a],
                    [c, a, b],
                    [c, b, a],
                ] {
                    pts.push(p);
                    wts.push(0.5 * w);
                }
            }
        }
    }
    (pts, wts)
}

fn symmetrized_collapsed(degree: usize) -> (Vec<[f64; 3]>, Vec<f64>) {
    // the collapse Jacobian (1 - ξ) raises the degree in ξ by one
    let n = (degree + 3) / 2;
    let (x, w) = gauss_legendre_unit(n);
    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut pts = Vec::with_capacity(6 * n * n);
    let mut wts = Vec::with_capacity(6 * n * n);
    for perm in PERMS {
        for i in 0..n {
            for j in 0..n {
                let xi = x[i];
                let eta = x[j] * (1.0 - xi);
                let bary = [1.0 - xi - eta, xi, eta];
                pts.push([bary[perm[0]], bary[perm[1]], bary[perm[2]]]);
                wts.push(w[i] * w[j] * (1.0 - xi) / 6.0);
            }
        }
    }
    (pts, wts)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration on the
/// Legendre polynomial.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        dp = if d != 0.0 { d } else { dp };
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss–Legendre on `[0, 1]`; weights sum to 1.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    (
        x.iter().map(|t| 0.5 * (t + 1.0)).collect(),
        w.iter().map(|t| 0.5 * t).collect(),
    )
}
