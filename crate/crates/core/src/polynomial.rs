//! Real polynomials in `(x, y)` of bounded total degree, and their
//! restrictions to great circles as trigonometric polynomials.
//!
//! Coefficients are stored densely by total degree, and within one total
//! degree `n` by decreasing power of `x`:
//! `1, x, y, x², xy, y², x³, x²y, xy², y³, …`.

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolynomialError {
    #[error("degree {degree} needs {expected} coefficients, got {got}")]
    CoefficientCount {
        degree: usize,
        expected: usize,
        got: usize,
    },
    #[error("non-finite coefficient at x^{i} y^{j}")]
    NonFinite { i: usize, j: usize },
    #[error("term x^{i} y^{j} exceeds degree {degree}")]
    DegreeExceeded { i: usize, j: usize, degree: usize },
    #[error("cannot parse polynomial term {0:?}")]
    Parse(String),
    #[error("polynomial has no terms")]
    Empty,
}

pub type Result<T> = std::result::Result<T, PolynomialError>;

/// Number of monomials `xⁱyʲ` with `i + j ≤ d`.
pub const fn monomial_count(d: usize) -> usize {
    (d + 1) * (d + 2) / 2
}

/// Storage position of `xⁱyʲ`.
pub const fn monomial_index(i: usize, j: usize) -> usize {
    let n = i + j;
    n * (n + 1) / 2 + j
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolynomialJson", into = "PolynomialJson")]
pub struct BivariatePolynomial {
    degree: usize,
    coeffs: Vec<f64>,
}

/// File format: `{"degree": d, "coefficients": [...]}` in storage order.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolynomialJson {
    pub degree: usize,
    pub coefficients: Vec<f64>,
}

impl TryFrom<PolynomialJson> for BivariatePolynomial {
    type Error = PolynomialError;

    fn try_from(j: PolynomialJson) -> Result<Self> {
        Self::new(j.degree, j.coefficients)
    }
}

impl From<BivariatePolynomial> for PolynomialJson {
    fn from(p: BivariatePolynomial) -> Self {
        Self {
            degree: p.degree,
            coefficients: p.coeffs,
        }
    }
}

impl BivariatePolynomial {
    pub fn new(degree: usize, coeffs: Vec<f64>) -> Result<Self> {
        let expected = monomial_count(degree);
        if coeffs.len() != expected {
            return Err(PolynomialError::CoefficientCount {
                degree,
                expected,
                got: coeffs.len(),
            });
        }
        let p = Self { degree, coeffs };
        if let Some((i, j, _)) = p.terms().find(|t| !t.2.is_finite()) {
            return Err(PolynomialError::NonFinite { i, j });
        }
        Ok(p)
    }

    pub fn zero(degree: usize) -> Self {
        Self {
            degree,
            coeffs: vec![0.0; monomial_count(degree)],
        }
    }

    /// Builds a polynomial from `(i, j, c)` triples; repeated monomials add.
    pub fn from_terms(degree: usize, terms: &[(usize, usize, f64)]) -> Result<Self> {
        let mut p = Self::zero(degree);
        for &(i, j, c) in terms {
            if i + j > degree {
                return Err(PolynomialError::DegreeExceeded { i, j, degree });
            }
            if !c.is_finite() {
                return Err(PolynomialError::NonFinite { i, j });
            }
            p.coeffs[monomial_index(i, j)] += c;
        }
        Ok(p)
    }

    /// Coefficients drawn uniformly from the unit sphere of the coefficient space.
    pub fn random_unit<R: Rng + ?Sized>(degree: usize, rng: &mut R) -> Self {
        loop {
            let coeffs: Vec<f64> = (0..monomial_count(degree))
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect();
            let p = Self { degree, coeffs };
            let n = p.norm();
            if n > 1e-12 {
                return p.scaled(1.0 / n);
            }
        }
    }

    /// `count` independent [`random_unit`](Self::random_unit) draws from a
    /// ChaCha8 stream seeded with `seed`.
    pub fn random_batch(degree: usize, count: usize, seed: u64) -> Vec<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| Self::random_unit(degree, &mut rng)).collect()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        if i + j > self.degree {
            0.0
        } else {
            self.coeffs[monomial_index(i, j)]
        }
    }

    /// `(i, j, c)` for every stored monomial, in storage order.
    pub fn terms(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..=self.degree)
            .flat_map(|n| (0..=n).map(move |j| (n - j, j)))
            .map(|(i, j)| (i, j, self.coeffs[monomial_index(i, j)]))
    }

    /// Highest total degree carrying a nonzero coefficient.
    pub fn effective_degree(&self) -> Option<usize> {
        self.terms().filter(|t| t.2 != 0.0).map(|t| t.0 + t.1).max()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// Euclidean norm of the coefficient vector.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            degree: self.degree,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn with_degree(&self, degree: usize) -> Result<Self> {
        let mut p = Self::zero(degree);
        for (i, j, c) in self.terms() {
            if c != 0.0 {
                if i + j > degree {
                    return Err(PolynomialError::DegreeExceeded { i, j, degree });
                }
                p.coeffs[monomial_index(i, j)] = c;
            }
        }
        Ok(p)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut p = Self::zero(self.degree.max(other.degree));
        for q in [self, other] {
            for (i, j, c) in q.terms() {
                p.coeffs[monomial_index(i, j)] += c;
            }
        }
        p
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut p = Self::zero(self.degree + other.degree);
        for (i, j, a) in self.terms().filter(|t| t.2 != 0.0) {
            for (k, l, b) in other.terms().filter(|t| t.2 != 0.0) {
                p.coeffs[monomial_index(i + k, j + l)] += a * b;
            }
        }
        p
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.eval_with_gradient(x, y).0
    }

    /// `(f, ∂f/∂x, ∂f/∂y)` at `(x, y)`.
    pub fn eval_with_gradient(&self, x: f64, y: f64) -> (f64, f64, f64) {
        let d = self.degree;
        let mut xp = [1.0f64; 32];
        let mut yp = [1.0f64; 32];
        let mut xv;
        let mut yv;
        let (xs, ys): (&mut [f64], &mut [f64]) = if d < 32 {
            (&mut xp[..=d], &mut yp[..=d])
        } else {
            xv = vec![1.0; d + 1];
            yv = vec![1.0; d + 1];
            (&mut xv[..], &mut yv[..])
        };
        for k in 1..=d {
            xs[k] = xs[k - 1] * x;
            ys[k] = ys[k - 1] * y;
        }
        let (mut f, mut fx, mut fy) = (0.0, 0.0, 0.0);
        for (i, j, c) in self.terms() {
            if c == 0.0 {
                continue;
            }
            f += c * xs[i] * ys[j];
            if i > 0 {
                fx += c * i as f64 * xs[i - 1] * ys[j];
            }
            if j > 0 {
                fy += c * j as f64 * xs[i] * ys[j - 1];
            }
        }
        (f, fx, fy)
    }

    /// `f(x cos φ + y sin φ, −x sin φ + y cos φ)`: the zero set rotated by
    /// `φ` counterclockwise about the z-axis.
    pub fn rotated_z(&self, phi: f64) -> Self {
        let (s, c) = phi.sin_cos();
        let lx = Self::from_terms(1, &[(1, 0, c), (0, 1, s)]).expect("degree 1");
        let ly = Self::from_terms(1, &[(1, 0, -s), (0, 1, c)]).expect("degree 1");
        let powers = |l: &Self| {
            let mut v = vec![Self::from_terms(0, &[(0, 0, 1.0)]).expect("constant")];
            for k in 1..=self.degree {
                let next = v[k - 1].mul(l);
                v.push(next);
            }
            v
        };
        let (px, py) = (powers(&lx), powers(&ly));
        let mut out = Self::zero(self.degree);
        for (i, j, c) in self.terms().filter(|t| t.2 != 0.0) {
            let term = px[i].mul(&py[j]).scaled(c);
            out = out.add(&term).with_degree(self.degree).expect("degree preserved");
        }
        out
    }

    /// Compact text form `i,j=value;…`, nonzero terms only.
    pub fn to_compact(&self) -> String {
        let parts: Vec<String> = self
            .terms()
            .filter(|t| t.2 != 0.0)
            .map(|(i, j, c)| format!("{i},{j}={c}"))
            .collect();
        if parts.is_empty() {
            "0,0=0".to_string()
        } else {
            parts.join(";")
        }
    }

    /// Parses `c:i,j=value;c:i,j=value;…`. The `c:` prefix is optional and
    /// may appear once in front or on every term. The degree is the largest
    /// `i + j` present.
    pub fn parse_compact(s: &str) -> Result<Self> {
        let body = s.trim();
        let body = body.strip_prefix("c:").unwrap_or(body);
        let mut terms = Vec::new();
        for raw in body.split(';').map(str::trim).filter(|t| !t.is_empty()) {
            let t = raw.strip_prefix("c:").unwrap_or(raw);
            let bad = || PolynomialError::Parse(raw.to_string());
            let (idx, val) = t.split_once('=').ok_or_else(bad)?;
            let (i, j) = idx.split_once(',').ok_or_else(bad)?;
            let i: usize = i.trim().parse().map_err(|_| bad())?;
            let j: usize = j.trim().parse().map_err(|_| bad())?;
            let c: f64 = val.trim().parse().map_err(|_| bad())?;
            terms.push((i, j, c));
        }
        if terms.is_empty() {
            return Err(PolynomialError::Empty);
        }
        let degree = terms.iter().map(|t| t.0 + t.1).max().unwrap_or(0);
        Self::from_terms(degree, &terms)
    }
}

impl FromStr for BivariatePolynomial {
    type Err = PolynomialError;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse_compact(s)
    }
}

impl fmt::Display for BivariatePolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, j, c) in self.terms().filter(|t| t.2 != 0.0) {
            let mono = match (i, j) {
                (0, 0) => String::new(),
                _ => {
                    let p = |v: &str, k: usize| match k {
                        0 => String::new(),
                        1 => v.to_string(),
                        _ => format!("{v}^{k}"),
                    };
                    format!("{}{}", p("x", i), p("y", j))
                }
            };
            let mag = c.abs();
            let sign = if c < 0.0 { "-" } else { "+" };
            if first {
                if c < 0.0 {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            if mono.is_empty() {
                write!(f, "{mag}")?;
            } else if mag == 1.0 {
                write!(f, "{mono}")?;
            } else {
                write!(f, "{mag}{mono}")?;
            }
            first = false;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

/// A real-valued trigonometric polynomial `g(t) = Σ_{|k|≤K} c_k e^{ikt}`
/// with `c_{−k} = conj(c_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPolynomial {
    half_degree: usize,
    /// `coeffs[k + K]` multiplies `z^k`, `z = e^{it}`.
    coeffs: Vec<Complex64>,
}

impl TrigPolynomial {
    pub fn half_degree(&self) -> usize {
        self.half_degree
    }

    pub fn coeff(&self, k: i64) -> Complex64 {
        let idx = k + self.half_degree as i64;
        if idx < 0 || idx as usize >= self.coeffs.len() {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[idx as usize]
        }
    }

    /// Coefficients of `z^K g(z)`, lowest power first.
    pub fn algebraic_coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn eval(&self, t: f64) -> f64 {
        let z = Complex64::from_polar(1.0, t);
        let mut acc = Complex64::new(0.0, 0.0);
        for c in self.coeffs.iter().rev() {
            acc = acc * z + c;
        }
        (acc * Complex64::from_polar(1.0, -(self.half_degree as f64) * t)).re
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

/// Binomial expansion of `(a z + conj(a) z⁻¹)^n` as Laurent coefficients,
/// index `k + n` for `z^k`.
fn linear_power(a: Complex64, n: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(1.0, 0.0)];
    for _ in 0..n {
        let mut next = vec![Complex64::new(0.0, 0.0); out.len() + 2];
        for (k, c) in out.iter().enumerate() {
            next[k + 2] += c * a;
            next[k] += c * a.conj();
        }
        out = next;
    }
    out
}

/// `f` along the great circle `t ↦ cos t·u + sin t·w`.
pub fn restrict_to_circle(
    f: &BivariatePolynomial,
    u: &Vector3<f64>,
    w: &Vector3<f64>,
) -> TrigPolynomial {
    let d = f.degree();
    // x(t) = α z + conj(α) / z with α = (u₁ − i w₁) / 2, likewise y.
    let alpha = Complex64::new(0.5 * u[0], -0.5 * w[0]);
    let beta = Complex64::new(0.5 * u[1], -0.5 * w[1]);
    let xp: Vec<Vec<Complex64>> = (0..=d).map(|n| linear_power(alpha, n)).collect();
    let yp: Vec<Vec<Complex64>> = (0..=d).map(|n| linear_power(beta, n)).collect();
    let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * d + 1];
    for (i, j, c) in f.terms().filter(|t| t.2 != 0.0) {
        // product of Laurent polys with half-degrees i and j
        for (a, xa) in xp[i].iter().enumerate() {
            if *xa == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (b, yb) in yp[j].iter().enumerate() {
                // power (a − i) + (b − j), shifted by d
                let idx = a + b + d - i - j;
                coeffs[idx] += xa * yb * c;
            }
        }
    }
    TrigPolynomial {
        half_degree: d,
        coeffs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use std::f64::consts::PI;

    fn poly(s: &str) -> BivariatePolynomial {
        s.parse().unwrap()
    }

    #[test]
    fn storage_order() {
        let order: Vec<(usize, usize)> = BivariatePolynomial::zero(2)
            .terms()
            .map(|t| (t.0, t.1))
            .collect();
        assert_eq!(order, vec![(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]);
        for d in 0..8 {
            assert_eq!(BivariatePolynomial::zero(d).coefficients().len(), monomial_count(d));
        }
    }

    #[test]
    fn parse_forms() {
        let a = poly("c:2,0=1;0,2=1;0,0=-0.5");
        let b = poly("c:2,0=1;c:0,2=1;c:0,0=-0.5");
        let c = poly("2,0=1; 0,2=1; 0,0=-0.5");
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert_eq!(a.degree(), 2);
        assert_eq!(a.coefficients(), &[-0.5, 0.0, 0.0, 1.0, 0.0, 1.0]);
        assert_eq!(poly(&a.to_compact()), a);
        assert!("".parse::<BivariatePolynomial>().is_err());
        assert!("1,0".parse::<BivariatePolynomial>().is_err());
        assert!("1,x=2".parse::<BivariatePolynomial>().is_err());
        assert!("1,0=nan".parse::<BivariatePolynomial>().is_err());
    }

    #[test]
    fn json_roundtrip_and_validation() {
        let p = poly("1,1=1");
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"degree":2,"coefficients":[0.0,0.0,0.0,0.0,1.0,0.0]}"#);
        let back: BivariatePolynomial = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        let bad = r#"{"degree":2,"coefficients":[1.0]}"#;
        assert!(serde_json::from_str::<BivariatePolynomial>(bad).is_err());
    }

    #[test]
    fn display() {
        assert_eq!(poly("2,0=1;0,2=1;0,0=-0.5").to_string(), "-0.5 + x^2 + y^2");
        assert_eq!(poly("1,1=-2").to_string(), "-2xy");
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = BivariatePolynomial::random_unit(4, &mut rng);
        let (x, y, h) = (0.3, -0.7, 1e-6);
        let (_, fx, fy) = p.eval_with_gradient(x, y);
        let dx = (p.eval(x + h, y) - p.eval(x - h, y)) / (2.0 * h);
        let dy = (p.eval(x, y + h) - p.eval(x, y - h)) / (2.0 * h);
        assert!((fx - dx).abs() < 1e-8 && (fy - dy).abs() < 1e-8);
    }

    #[test]
    fn restriction_examples() {
        let (u, w) = (Vector3::x(), Vector3::y());
        let g = restrict_to_circle(&poly("1,0=1"), &u, &w);
        for k in 0..20 {
            let t = k as f64 * 0.37;
            assert!((g.eval(t) - t.cos()).abs() < 1e-15);
        }
        let g = restrict_to_circle(&poly("0,0=1"), &u, &w);
        assert!((g.eval(1.0) - 1.0).abs() < 1e-15);
        let g = restrict_to_circle(&poly("1,1=1"), &u, &w);
        // ½ sin 2t = (z² − z⁻²) / (4i)
        assert!((g.coeff(2) - Complex64::new(0.0, -0.25)).norm() < 1e-15);
        assert!((g.coeff(-2) - Complex64::new(0.0, 0.25)).norm() < 1e-15);
        assert!(g.coeff(0).norm() < 1e-15);
    }

    #[test]
    fn rotation_about_z() {
        let p = poly("1,0=1");
        let r = p.rotated_z(PI / 2.0);
        // the zero set {x = 0} turned by π/2 is {y = 0}
        assert!((r.coeff(0, 1) - 1.0).abs() < 1e-15 && r.coeff(1, 0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn restriction_agrees_with_pointwise_evaluation(seed in 0u64..500, t in 0.0f64..6.3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = (seed % 5) as usize;
            let p = BivariatePolynomial::random_unit(d, &mut rng);
            let xi: Vector3<f64> = Vector3::new(rng.random(), rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.3).normalize();
            let u = xi.cross(&Vector3::new(0.3, 0.2, 0.9)).normalize();
            let w = xi.cross(&u);
            let g = restrict_to_circle(&p, &u, &w);
            let pt = u * t.cos() + w * t.sin();
            prop_assert!((g.eval(t) - p.eval(pt[0], pt[1])).abs() < 1e-12);
        }

        #[test]
        fn rotation_moves_zero_set(seed in 0u64..200, phi in -3.0f64..3.0, x in -1.0f64..1.0, y in -1.0f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = BivariatePolynomial::random_unit(3, &mut rng);
            let r = p.rotated_z(phi);
            let (s, c) = phi.sin_cos();
            // r at the rotated point equals p at the original point
            let (xr, yr) = (c * x - s * y, s * x + c * y);
            prop_assert!((r.eval(xr, yr) - p.eval(x, y)).abs() < 1e-12);
        }
    }
}
