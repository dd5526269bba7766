//! Quadrature on the reference triangle and the reference edge.
//!
//! Points are stored in barycentric coordinates. Triangle weights sum to the
//! reference area 1/2, edge weights to the reference length 1.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule<const D: usize> {
    pub points: Vec<[f64; D]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

pub type TriangleRule = QuadratureRule<3>;
pub type EdgeRule = QuadratureRule<2>;

impl<const D: usize> QuadratureRule<D> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64; D], f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }
}

/// Orbit of a fully symmetric triangle rule. Weights are normalised to sum 1.
enum Orbit {
    Centroid(f64),
    /// (a, a, 1 - 2a)
    Edge(f64, f64),
    /// all permutations of (a, b, 1 - a - b)
    General(f64, f64, f64),
}

// Symmetric rules with positive weights and interior points; coefficients
// Newton-polished to full double precision against the moment equations.
const DEGREE_2: &[Orbit] = &[Orbit::Edge(1.0 / 6.0, 1.0 / 3.0)];

const DEGREE_4: &[Orbit] = &[
    Orbit::Edge(0.445_948_490_915_964_886_32, 0.223_381_589_678_011_465_7),
    Orbit::Edge(0.091_576_213_509_770_743_46, 0.109_951_743_655_321_867_64),
];

const DEGREE_6: &[Orbit] = &[
    Orbit::Edge(0.249_286_745_170_910_421_29, 0.116_786_275_726_379_366_03),
    Orbit::Edge(0.063_089_014_491_502_228_34, 0.050_844_906_370_206_816_921),
    Orbit::General(
        0.053_145_049_844_816_947_353,
        0.310_352_451_033_784_405_42,
        0.082_851_075_618_373_575_194,
    ),
];

const DEGREE_10: &[Orbit] = &[
    Orbit::Centroid(0.090_817_990_382_753_580_095),
    Orbit::Edge(0.485_577_633_383_657_377_37, 0.036_725_957_756_466_704_717),
    Orbit::Edge(0.109_481_575_485_037_054_8, 0.045_321_059_435_527_934_783),
    Orbit::General(
        0.141_707_219_414_879_954_76,
        0.307_939_838_764_120_950_17,
        0.072_757_916_845_420_108_604,
    ),
    Orbit::General(
        0.025_003_534_762_686_386_074,
        0.246_672_560_639_902_693_92,
        0.028_327_242_531_057_484_837,
    ),
    Orbit::General(
        0.009_540_815_400_299_457_580_2,
        0.066_803_251_012_200_265_774,
        0.009_421_666_963_732_823_459_9,
    ),
];

/// Supported triangle rule degrees.
pub const TRIANGLE_DEGREES: [usize; 4] = [2, 4, 6, 10];

/// Symmetric triangle rule exact for polynomials up to `degree`.
pub fn triangle_rule(degree: usize) -> Result<TriangleRule> {
    let orbits = match degree {
        2 => DEGREE_2,
        4 => DEGREE_4,
        6 => DEGREE_6,
        10 => DEGREE_10,
        _ => {
            return Err(Error::InvalidConfig(format!(
                "no triangle rule of degree {degree} (supported: {TRIANGLE_DEGREES:?})"
            )))
        }
    };
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for orbit in orbits {
        match *orbit {
            Orbit::Centroid(w) => {
                points.push([1.0 / 3.0; 3]);
                weights.push(0.5 * w);
            }
            Orbit::Edge(a, w) => {
                let b = 1.0 - 2.0 * a;
                for p in [[a, a, b], [a, b, a], [b, a, a]] {
                    points.push(p);
                    weights.push(0.5 * w);
                }
            }
            Orbit::General(a, b, w) => {
                let c = 1.0 - a - b;
                for p in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
                    points.push(p);
                    weights.push(0.5 * w);
                }
            }
        }
    }
    Ok(QuadratureRule { points, weights, degree })
}

/// Largest edge degree served by [`edge_rule`].
pub const MAX_EDGE_DEGREE: usize = 63;

/// Gauss-Legendre nodes and weights on [0, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Newton on P_n starting from the Chebyshev-like estimate
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

/// Gauss-Legendre rule on the reference edge exact up to `degree`.
pub fn edge_rule(degree: usize) -> Result<EdgeRule> {
    if degree > MAX_EDGE_DEGREE {
        return Err(Error::InvalidConfig(format!(
            "no edge rule of degree {degree} (maximum {MAX_EDGE_DEGREE})"
        )));
    }
    let n = degree / 2 + 1;
    let (t, w) = gauss_legendre(n);
    Ok(QuadratureRule {
        points: t.iter().map(|&t| [1.0 - t, t]).collect(),
        weights: w,
        degree: 2 * n - 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    // a! b! c! / (a + b + c + 2)! times 2 * (reference area 1/2)
    fn moment(a: u32, b: u32, c: u32) -> f64 {
        factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 2)
    }

    #[test]
    fn triangle_rules_integrate_all_monomials() {
        for degree in TRIANGLE_DEGREES {
            let rule = triangle_rule(degree).unwrap();
            assert!(rule.weights.iter().all(|&w| w > 0.0));
            for a in 0..=degree as u32 {
                for b in 0..=(degree as u32 - a) {
                    for c in 0..=(degree as u32 - a - b) {
                        let q: f64 = rule
                            .iter()
                            .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32) * p[2].powi(c as i32))
                            .sum();
                        let exact = moment(a, b, c);
                        assert!(
                            (q - exact).abs() < 1e-14,
                            "degree {degree} monomial ({a},{b},{c}): {q} vs {exact}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn reference_moments() {
        let rule = triangle_rule(6).unwrap();
        let area: f64 = rule.weights.iter().sum();
        assert!((area - 0.5).abs() < 1e-15);
        let bubble: f64 = rule.iter().map(|(p, w)| w * p[0] * p[1] * p[2]).sum();
        assert!((bubble - 1.0 / 120.0).abs() < 1e-14);
        let sq: f64 = rule.iter().map(|(p, w)| w * p[0] * p[0]).sum();
        assert!((sq - 1.0 / 12.0).abs() < 1e-14);
    }

    #[test]
    fn unsupported_triangle_degree() {
        assert!(matches!(triangle_rule(3), Err(Error::InvalidConfig(_))));
        assert!(edge_rule(MAX_EDGE_DEGREE + 1).is_err());
    }

    #[test]
    fn edge_rules() {
        let r = edge_rule(3).unwrap();
        assert_eq!(r.len(), 2);
        let one: f64 = r.weights.iter().sum();
        assert!((one - 1.0).abs() < 1e-15);
        let cube: f64 = r.iter().map(|(p, w)| w * p[1].powi(3)).sum();
        assert!((cube - 0.25).abs() < 1e-15);
        let r = edge_rule(7).unwrap();
        assert_eq!(r.len(), 4);
        let seventh: f64 = r.iter().map(|(p, w)| w * p[1].powi(7)).sum();
        assert!((seventh - 0.125).abs() < 1e-15);
        for n in 1..30 {
            let (t, w) = gauss_legendre(n);
            for k in 0..(2 * n) {
                let q: f64 = t.iter().zip(&w).map(|(t, w)| w * t.powi(k as i32)).sum();
                assert!((q - 1.0 / (k as f64 + 1.0)).abs() < 1e-14, "n={n} k={k}");
            }
        }
    }
}
