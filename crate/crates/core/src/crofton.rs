//! Crofton-formula length estimates for level sets on the upper hemisphere.
//!
//! For a polynomial `f(x, y)` the zero set on the whole sphere is symmetric
//! under `z → −z`, so its length is twice the hemisphere length. A spherical
//! curve has length `¼ ∫_{S²} #(curve ∩ ξ^⊥) dξ`, hence the hemisphere
//! length is `⅛ ∫ count = (π/2) · E[count]` for ξ uniform on `S²`.
//! The count on each great circle is the number of distinct zeros of a
//! trigonometric polynomial of degree `≤ d`, which is at most `2d`.

use std::f64::consts::PI;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::polynomial::{restrict_to_circle, BivariatePolynomial, TrigPolynomial};
use crate::roots::{polynomial_roots, RootError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CroftonError {
    #[error("polynomial is identically zero")]
    ZeroPolynomial,
    #[error("great circle lies inside the zero set")]
    CircleInZeroSet,
    #[error("normal vector must be finite and nonzero")]
    InvalidNormal,
    #[error("{count} intersections exceed the bound {bound}")]
    BezoutViolation { count: usize, bound: usize },
    #[error("no usable sample directions")]
    NoSamples,
    #[error("surface gradient {gradient:e} below {limit:e} at {point:?}")]
    NearSingular {
        point: [f64; 3],
        gradient: f64,
        limit: f64,
    },
    #[error("tracing exhausted the step budget of {0}")]
    StepBudget(usize),
    #[error("invalid option: {0}")]
    InvalidOption(String),
    #[error(transparent)]
    Root(#[from] RootError),
}

pub type Result<T> = std::result::Result<T, CroftonError>;

/// Great circle `ξ^⊥` with an orthonormal frame `(u, w)`, `u × w = ξ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GreatCircle {
    xi: Vector3<f64>,
    u: Vector3<f64>,
    w: Vector3<f64>,
}

impl GreatCircle {
    pub fn from_normal(xi: Vector3<f64>) -> Result<Self> {
        let n = xi.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(CroftonError::InvalidNormal);
        }
        let xi = xi / n;
        // helper axis least aligned with xi
        let k = xi.iamin();
        let mut e = Vector3::zeros();
        e[k] = 1.0;
        let u = xi.cross(&e).normalize();
        let w = xi.cross(&u);
        Ok(Self { xi, u, w })
    }

    pub fn normal(&self) -> &Vector3<f64> {
        &self.xi
    }

    pub fn frame(&self) -> (&Vector3<f64>, &Vector3<f64>) {
        (&self.u, &self.w)
    }

    pub fn point(&self, t: f64) -> Vector3<f64> {
        self.u * t.cos() + self.w * t.sin()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CountOptions {
    /// Roots with `||z| − 1|` up to this value count as on the circle.
    pub modulus_tol: f64,
    /// Roots closer than this in angle are one intersection point.
    pub cluster_tol: f64,
    /// Restriction counts as identically zero when its coefficients are all
    /// below this multiple of the polynomial's coefficient 1-norm.
    pub zero_tol: f64,
}

impl Default for CountOptions {
    fn default() -> Self {
        Self {
            modulus_tol: 1e-8,
            cluster_tol: 1e-7,
            zero_tol: 1e-13,
        }
    }
}

pub fn restrict(f: &BivariatePolynomial, c: &GreatCircle) -> TrigPolynomial {
    restrict_to_circle(f, &c.u, &c.w)
}

/// Distinct zeros of `g` on `[0, 2π)`; `scale` sets the zero threshold.
pub fn count_trig_zeros(g: &TrigPolynomial, scale: f64, opts: &CountOptions) -> Result<usize> {
    if g.max_abs_coeff() <= opts.zero_tol * scale {
        return Err(CroftonError::CircleInZeroSet);
    }
    let roots = polynomial_roots(g.algebraic_coefficients(), 1e-14)?;
    let mut angles: Vec<f64> = roots
        .iter()
        .filter(|z| (z.norm() - 1.0).abs() <= opts.modulus_tol)
        .map(|z| z.arg().rem_euclid(2.0 * PI))
        .collect();
    if angles.is_empty() {
        return Ok(0);
    }
    angles.sort_by(f64::total_cmp);
    let mut count = 1;
    for k in 1..angles.len() {
        if angles[k] - angles[k - 1] >= opts.cluster_tol {
            count += 1;
        }
    }
    if count > 1 && angles[0] + 2.0 * PI - angles[angles.len() - 1] < opts.cluster_tol {
        count -= 1;
    }
    let bound = 2 * g.half_degree();
    if count > bound {
        return Err(CroftonError::BezoutViolation { count, bound });
    }
    Ok(count)
}

pub fn count_circle_intersections(f: &BivariatePolynomial, c: &GreatCircle) -> Result<usize> {
    count_intersections_with(f, c, &CountOptions::default())
}

pub fn count_intersections_with(
    f: &BivariatePolynomial,
    c: &GreatCircle,
    opts: &CountOptions,
) -> Result<usize> {
    let scale: f64 = f.coefficients().iter().map(|c| c.abs()).sum();
    if scale == 0.0 {
        return Err(CroftonError::ZeroPolynomial);
    }
    count_trig_zeros(&restrict(f, c), scale, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MassMethod {
    MonteCarlo,
    Quadrature,
    Traced,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MassEstimate {
    pub value: f64,
    /// Zero for deterministic methods.
    pub standard_error: f64,
    pub sample_count: usize,
    pub method: MassMethod,
    /// Sampled circles lying inside the zero set, resampled or dropped.
    pub degenerate_events: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Sampler {
    MonteCarlo { samples: usize, seed: u64 },
    /// Spherical Fibonacci lattice with `(order + 1)(order + 2)` equal-weight
    /// nodes. The count is even, so no node sits on the equator, where
    /// every great circle passes through both poles.
    Quadrature { order: usize },
}

/// Uniform direction on `S²` from normalized standard normals.
pub fn uniform_direction<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// `n` nearly uniform points on `S²`: equally spaced heights, longitudes
/// advancing by the golden angle.
pub fn fibonacci_sphere(n: usize) -> Vec<Vector3<f64>> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|k| {
            let z = 1.0 - (2 * k + 1) as f64 / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * k as f64;
            Vector3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

pub fn quadrature_nodes(order: usize) -> usize {
    (order + 1) * (order + 2)
}

/// `Some(count)`, or `None` when the circle lies in the zero set.
fn sample_count(f: &BivariatePolynomial, xi: &Vector3<f64>, opts: &CountOptions) -> Result<Option<usize>> {
    let c = GreatCircle::from_normal(*xi)?;
    match count_intersections_with(f, &c, opts) {
        Ok(n) => Ok(Some(n)),
        Err(CroftonError::CircleInZeroSet) => Ok(None),
        Err(e) => Err(e),
    }
}

pub fn crofton_mass(f: &BivariatePolynomial, sampler: &Sampler) -> Result<MassEstimate> {
    crofton_mass_with(f, sampler, &CountOptions::default())
}

pub fn crofton_mass_with(
    f: &BivariatePolynomial,
    sampler: &Sampler,
    opts: &CountOptions,
) -> Result<MassEstimate> {
    if f.is_zero() {
        return Err(CroftonError::ZeroPolynomial);
    }
    match *sampler {
        Sampler::MonteCarlo { samples, seed } => monte_carlo(f, samples, seed, opts),
        Sampler::Quadrature { order } => quadrature(f, order, opts),
    }
}

fn monte_carlo(f: &BivariatePolynomial, samples: usize, seed: u64, opts: &CountOptions) -> Result<MassEstimate> {
    if samples == 0 {
        return Err(CroftonError::NoSamples);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dirs: Vec<Vector3<f64>> = (0..samples).map(|_| uniform_direction(&mut rng)).collect();
    let counts: Vec<Option<usize>> = dirs
        .par_iter()
        .map(|xi| sample_count(f, xi, opts))
        .collect::<Result<_>>()?;
    let mut degenerate = 0usize;
    let (mut sum, mut sum_sq) = (0u64, 0u64);
    let mut add = |n: usize| {
        sum += n as u64;
        sum_sq += (n * n) as u64;
    };
    for c in counts {
        match c {
            Some(n) => add(n),
            None => {
                degenerate += 1;
                // resample sequentially so the stream stays deterministic
                loop {
                    if degenerate > samples {
                        return Err(CroftonError::NoSamples);
                    }
                    match sample_count(f, &uniform_direction(&mut rng), opts)? {
                        Some(n) => {
                            add(n);
                            break;
                        }
                        None => degenerate += 1,
                    }
                }
            }
        }
    }
    let n = samples as f64;
    let mean = sum as f64 / n;
    let var = if samples > 1 {
        ((sum_sq as f64 - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(MassEstimate {
        value: 0.5 * PI * mean,
        standard_error: 0.5 * PI * (var / n).sqrt(),
        sample_count: samples,
        method: MassMethod::MonteCarlo,
        degenerate_events: degenerate,
    })
}

fn quadrature(f: &BivariatePolynomial, order: usize, opts: &CountOptions) -> Result<MassEstimate> {
    let nodes = fibonacci_sphere(quadrature_nodes(order));
    let counts: Vec<Option<usize>> = nodes
        .par_iter()
        .map(|xi| sample_count(f, xi, opts))
        .collect::<Result<_>>()?;
    let kept: Vec<usize> = counts.iter().flatten().copied().collect();
    if kept.is_empty() {
        return Err(CroftonError::NoSamples);
    }
    // equal weights; dropped nodes renormalize the rest
    let sum: u64 = kept.iter().map(|&n| n as u64).sum();
    Ok(MassEstimate {
        value: 0.5 * PI * sum as f64 / kept.len() as f64,
        standard_error: 0.0,
        sample_count: kept.len(),
        method: MassMethod::Quadrature,
        degenerate_events: nodes.len() - kept.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BezoutSummary {
    pub pairs: usize,
    pub max_degree: usize,
    /// Largest count seen per degree, index `d − 1`.
    pub max_count: Vec<usize>,
    /// Pairs whose count exceeded `2d`, by either route.
    pub violations: usize,
    /// Circles lying in the zero set (skipped).
    pub degenerate: usize,
    /// Pairs where sign changes on a sample grid exceeded the root count.
    pub route_conflicts: usize,
}

/// Sign changes of `g` over `samples` equally spaced angles; a lower bound
/// on the number of distinct zeros of odd multiplicity.
pub fn sign_changes(g: &TrigPolynomial, samples: usize) -> usize {
    let vals: Vec<f64> = (0..samples)
        .map(|k| g.eval(2.0 * PI * k as f64 / samples as f64))
        .filter(|v| *v != 0.0)
        .collect();
    if vals.len() < 2 {
        return 0;
    }
    let mut n = vals.windows(2).filter(|w| (w[0] > 0.0) != (w[1] > 0.0)).count();
    if (vals[0] > 0.0) != (vals[vals.len() - 1] > 0.0) {
        n += 1;
    }
    n
}

/// Samples random (polynomial, circle) pairs with degrees cycling through
/// `1..=max_degree` and checks both the eigenvalue count and an independent
/// sign-change count against `2d`.
pub fn bezout_sweep(pairs: usize, max_degree: usize, seed: u64, opts: &CountOptions) -> Result<BezoutSummary> {
    if max_degree == 0 {
        return Err(CroftonError::InvalidOption("max_degree must be at least 1".into()));
    }
    const CHUNK: usize = 1 << 15;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut summary = BezoutSummary {
        pairs,
        max_degree,
        max_count: vec![0; max_degree],
        violations: 0,
        degenerate: 0,
        route_conflicts: 0,
    };
    let mut done = 0;
    while done < pairs {
        let n = CHUNK.min(pairs - done);
        let batch: Vec<(BivariatePolynomial, Vector3<f64>)> = (done..done + n)
            .map(|k| {
                let d = 1 + k % max_degree;
                (BivariatePolynomial::random_unit(d, &mut rng), uniform_direction(&mut rng))
            })
            .collect();
        let results: Vec<Option<(usize, usize, usize)>> = batch
            .par_iter()
            .map(|(f, xi)| {
                let c = GreatCircle::from_normal(*xi)?;
                let g = restrict(f, &c);
                let scale: f64 = f.coefficients().iter().map(|c| c.abs()).sum();
                let count = match count_trig_zeros(&g, scale, opts) {
                    Ok(k) => k,
                    Err(CroftonError::BezoutViolation { count, .. }) => count,
                    Err(CroftonError::CircleInZeroSet) => return Ok(None),
                    Err(e) => return Err(e),
                };
                Ok(Some((f.degree(), count, sign_changes(&g, 64 * (f.degree() + 1)))))
            })
            .collect::<Result<_>>()?;
        for r in results {
            match r {
                None => summary.degenerate += 1,
                Some((d, count, changes)) => {
                    let m = &mut summary.max_count[d - 1];
                    *m = (*m).max(count).max(changes);
                    if count > 2 * d || changes > 2 * d {
                        summary.violations += 1;
                    }
                    if changes > count {
                        summary.route_conflicts += 1;
                    }
                }
            }
        }
        done += n;
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::SQRT_2;

    fn poly(s: &str) -> BivariatePolynomial {
        s.parse().unwrap()
    }

    #[test]
    fn frame_is_orthonormal() {
        for xi in [Vector3::x(), Vector3::z(), Vector3::new(1.0, -2.0, 0.5)] {
            let c = GreatCircle::from_normal(xi).unwrap();
            let (u, w) = c.frame();
            assert!((u.norm() - 1.0).abs() < 1e-15 && (w.norm() - 1.0).abs() < 1e-15);
            assert!(u.dot(w).abs() < 1e-15 && u.dot(c.normal()).abs() < 1e-15);
            assert!((u.cross(w) - c.normal()).norm() < 1e-15);
        }
        assert!(GreatCircle::from_normal(Vector3::zeros()).is_err());
        assert!(GreatCircle::from_normal(Vector3::new(f64::NAN, 0.0, 1.0)).is_err());
    }

    #[test]
    fn count_examples() {
        let z = GreatCircle::from_normal(Vector3::z()).unwrap();
        assert_eq!(count_circle_intersections(&poly("1,0=1"), &z).unwrap(), 2);
        assert_eq!(count_circle_intersections(&poly("0,0=1"), &z).unwrap(), 0);
        assert_eq!(count_circle_intersections(&poly("1,1=1"), &z).unwrap(), 4);
        let tilted = GreatCircle::from_normal(Vector3::new(0.3, 0.4, 0.8)).unwrap();
        assert_eq!(count_circle_intersections(&poly("1,0=1"), &tilted).unwrap(), 2);
        // the equator misses the latitude circles at height ±1/√2
        assert_eq!(count_circle_intersections(&poly("2,0=1;0,2=1;0,0=-0.5"), &z).unwrap(), 0);
    }

    #[test]
    fn circle_in_zero_set() {
        let c = GreatCircle::from_normal(Vector3::x()).unwrap();
        assert_eq!(
            count_circle_intersections(&poly("1,0=1"), &c),
            Err(CroftonError::CircleInZeroSet)
        );
        let zero = BivariatePolynomial::zero(2);
        assert_eq!(count_circle_intersections(&zero, &c), Err(CroftonError::ZeroPolynomial));
        assert_eq!(
            crofton_mass(&zero, &Sampler::Quadrature { order: 5 }),
            Err(CroftonError::ZeroPolynomial)
        );
    }

    #[test]
    fn tangent_circle_counts_once() {
        // the circle with normal (1,0,1)/√2 reaches |x| = 1/√2 exactly at two
        // points, so it touches {x² = ½} there with double roots
        let f = poly("2,0=1;0,0=-0.5");
        let c = GreatCircle::from_normal(Vector3::new(1.0, 0.0, 1.0)).unwrap();
        let n = count_circle_intersections(&f, &c).unwrap();
        assert_eq!(n, 2);
    }

    #[test]
    fn bezout_sweep_small() {
        let s = bezout_sweep(3000, 4, 9, &CountOptions::default()).unwrap();
        assert_eq!(s.violations, 0);
        assert_eq!(s.route_conflicts, 0);
        for (k, m) in s.max_count.iter().enumerate() {
            assert!(*m <= 2 * (k + 1));
        }
        // sin 2t has exactly 4 sign changes
        let z = GreatCircle::from_normal(Vector3::z()).unwrap();
        assert_eq!(sign_changes(&restrict(&poly("1,1=1"), &z), 97), 4);
    }

    #[test]
    fn fibonacci_points_are_balanced() {
        let pts = fibonacci_sphere(2000);
        let mean: Vector3<f64> = pts.iter().sum::<Vector3<f64>>() / 2000.0;
        assert!(mean.norm() < 1e-3);
        assert!(pts.iter().all(|p| (p.norm() - 1.0).abs() < 1e-14));
    }

    #[test]
    fn closed_form_masses_by_quadrature() {
        let q = Sampler::Quadrature { order: 60 };
        let m = crofton_mass(&poly("1,0=1"), &q).unwrap();
        assert!((m.value - PI).abs() < 1e-12, "{m:?}");
        let m = crofton_mass(&poly("1,1=1"), &q).unwrap();
        assert!((m.value - 2.0 * PI).abs() < 1e-12);
        let m = crofton_mass(&poly("2,0=1;0,2=1;0,0=-0.5"), &q).unwrap();
        assert!((m.value - PI * SQRT_2).abs() < 1e-3 * PI);
        let m = crofton_mass(&poly("0,0=1"), &q).unwrap();
        assert_eq!(m.value, 0.0);
    }

    #[test]
    fn monte_carlo_latitude_circle() {
        let m = crofton_mass(
            &poly("2,0=1;0,2=1;0,0=-0.5"),
            &Sampler::MonteCarlo {
                samples: 20_000,
                seed: 5,
            },
        )
        .unwrap();
        assert!((m.value - PI * SQRT_2).abs() <= 3.0 * m.standard_error, "{m:?}");
        assert!(m.standard_error > 0.0);
        let again = crofton_mass(
            &poly("2,0=1;0,2=1;0,0=-0.5"),
            &Sampler::MonteCarlo {
                samples: 20_000,
                seed: 5,
            },
        )
        .unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn projective_invariance_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = BivariatePolynomial::random_unit(3, &mut rng);
        let q = Sampler::Quadrature { order: 30 };
        let base = crofton_mass(&f, &q).unwrap();
        for lambda in [-3.0, 1e-3, 250.0] {
            assert_eq!(crofton_mass(&f.scaled(lambda), &q).unwrap().value, base.value);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn z_rotation_leaves_mass_unchanged(seed in 0u64..1000, phi in 0.0f64..6.2) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = 1 + (seed % 3) as usize;
            let f = BivariatePolynomial::random_unit(d, &mut rng);
            let s = Sampler::MonteCarlo { samples: 4000, seed };
            let a = crofton_mass(&f, &s).unwrap();
            let b = crofton_mass(&f.rotated_z(phi), &s).unwrap();
            let se = a.standard_error.hypot(b.standard_error);
            prop_assert!((a.value - b.value).abs() <= 4.0 * se + 1e-12);
        }

        #[test]
        fn count_never_exceeds_twice_degree(seed in 0u64..5000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = (seed % 6) as usize;
            let f = BivariatePolynomial::random_unit(d, &mut rng);
            let c = GreatCircle::from_normal(uniform_direction(&mut rng)).unwrap();
            let n = count_circle_intersections(&f, &c).unwrap();
            prop_assert!(n <= 2 * d);
        }
    }
}
