//! Ellipsoids `a₁x₁² + a₂x₂² + a₃x₃² = 1`, their upper halves, principal
//! section lengths and the calibration of the coefficients to prescribed
//! section lengths.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("ellipsoid coefficients must be finite and positive, got {0:?}")]
    InvalidCoefficients([f64; 3]),
    #[error("ellipse semi-axes must be finite and positive, got ({0}, {1})")]
    InvalidSemiAxes(f64, f64),
    #[error("perturbation μ = {0} outside [0, 0.5)")]
    InvalidMu(f64),
    #[error("calibration did not converge after {iterations} iterations, residuals {residuals:?}")]
    NoConvergence {
        iterations: usize,
        residuals: [f64; 3],
    },
    #[error("calibration Jacobian condition number {0:.3e} exceeds the limit")]
    IllConditioned(f64),
}

pub type Result<T> = std::result::Result<T, GeometryError>;

/// Quadric `{x : a₁x₁² + a₂x₂² + a₃x₃² = 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ellipsoid {
    a: [f64; 3],
}

impl Ellipsoid {
    pub fn new(a: [f64; 3]) -> Result<Self> {
        if a.iter().any(|&c| !(c.is_finite() && c > 0.0)) {
            return Err(GeometryError::InvalidCoefficients(a));
        }
        Ok(Self { a })
    }

    pub fn round() -> Self {
        Self { a: [1.0; 3] }
    }

    pub fn from_semi_axes(r: [f64; 3]) -> Result<Self> {
        Self::new(r.map(|ri| 1.0 / (ri * ri)))
    }

    pub fn coefficients(&self) -> [f64; 3] {
        self.a
    }

    /// `rᵢ = aᵢ^{-1/2}`.
    pub fn semi_axes(&self) -> [f64; 3] {
        self.a.map(|ai| 1.0 / ai.sqrt())
    }

    /// `A x` with `A = diag(a)`.
    pub fn scale(&self, x: &Vector3<f64>) -> Vector3<f64> {
        Vector3::new(self.a[0] * x[0], self.a[1] * x[1], self.a[2] * x[2])
    }

    /// `Q(x) = Σ aᵢxᵢ²`.
    pub fn quadric(&self, x: &Vector3<f64>) -> f64 {
        x.dot(&self.scale(x))
    }

    /// `∇Q(x) = 2 A x`.
    pub fn gradient(&self, x: &Vector3<f64>) -> Vector3<f64> {
        2.0 * self.scale(x)
    }

    pub fn unit_normal(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.scale(x).normalize()
    }

    /// Newton steps along the gradient onto `Q = 1`.
    pub fn project_point(&self, x: &Vector3<f64>) -> Vector3<f64> {
        let mut p = *x;
        for _ in 0..4 {
            let g = self.gradient(&p);
            let r = self.quadric(&p) - 1.0;
            if r.abs() < 1e-16 {
                break;
            }
            p -= g * (r / g.norm_squared());
        }
        p
    }

    /// Closest point of the ellipse `{x₃ = 0}` found by radial scaling in the
    /// plane; exact for points already on that curve up to rounding.
    pub fn project_to_equator(&self, x: &Vector3<f64>) -> Vector3<f64> {
        let p = Vector3::new(x[0], x[1], 0.0);
        p / self.quadric(&p).sqrt()
    }
}

/// Upper half `{x₃ ≥ 0}` of an [`Ellipsoid`]. The boundary ellipse in the
/// plane `x₃ = 0` is a geodesic of the full surface by mirror symmetry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HemiEllipsoid {
    pub ellipsoid: Ellipsoid,
}

impl HemiEllipsoid {
    pub fn new(ellipsoid: Ellipsoid) -> Self {
        Self { ellipsoid }
    }

    pub fn round() -> Self {
        Self::new(Ellipsoid::round())
    }

    /// Boundary point `(r₁ cos s, r₂ sin s, 0)`.
    pub fn boundary_point(&self, s: f64) -> Vector3<f64> {
        let r = self.ellipsoid.semi_axes();
        Vector3::new(r[0] * s.cos(), r[1] * s.sin(), 0.0)
    }

    /// Unit tangent of the boundary in the direction of increasing `s`.
    pub fn boundary_tangent(&self, s: f64) -> Vector3<f64> {
        let r = self.ellipsoid.semi_axes();
        Vector3::new(-r[0] * s.sin(), r[1] * s.cos(), 0.0).normalize()
    }

    /// Boundary parameter of a point on (or near) the boundary, in `[0, 2π)`.
    pub fn boundary_parameter(&self, x: &Vector3<f64>) -> f64 {
        let r = self.ellipsoid.semi_axes();
        (x[1] / r[1]).atan2(x[0] / r[0]).rem_euclid(TAU)
    }

    /// Inward unit conormal along the boundary: tangent to the surface,
    /// normal to the boundary curve, pointing into `x₃ > 0`.
    pub fn inward_conormal(&self, x: &Vector3<f64>) -> Vector3<f64> {
        let n = self.ellipsoid.unit_normal(x);
        let t = n.cross(&Vector3::z()).normalize();
        let nu = t.cross(&n).normalize();
        if nu[2] < 0.0 {
            -nu
        } else {
            nu
        }
    }
}

/// Perimeter of the ellipse with semi-axes `alpha`, `beta`.
///
/// Uses the arithmetic–geometric mean:
/// `C = (2π / M(α, β)) · (α² − Σₙ 2ⁿ⁻¹ cₙ²)` with `c₀² = α² − β²` and
/// `cₙ = (aₙ₋₁ − bₙ₋₁)/2`. Converges quadratically.
pub fn ellipse_circumference(alpha: f64, beta: f64) -> Result<f64> {
    if !(alpha.is_finite() && beta.is_finite() && alpha > 0.0 && beta > 0.0) {
        return Err(GeometryError::InvalidSemiAxes(alpha, beta));
    }
    let (mut a, mut b) = if alpha >= beta {
        (alpha, beta)
    } else {
        (beta, alpha)
    };
    let a0_sq = a * a;
    let mut sum = 0.5 * (a * a - b * b);
    let mut weight = 0.5;
    for _ in 0..64 {
        let c = 0.5 * (a - b);
        let next_b = (a * b).sqrt();
        a = 0.5 * (a + b);
        b = next_b;
        weight *= 2.0;
        sum += weight * c * c;
        if c.abs() <= f64::EPSILON * a {
            break;
        }
    }
    Ok(TAU / a * (a0_sq - sum))
}

/// Lengths of `E⁺ ∩ {xᵢ = 0}`: two half-ellipses (free boundary geodesics)
/// and the full boundary ellipse.
pub fn principal_curve_lengths(h: &HemiEllipsoid) -> [f64; 3] {
    let r = h.ellipsoid.semi_axes();
    // semi-axes come from a validated ellipsoid, so these cannot fail
    let c = |p: f64, q: f64| ellipse_circumference(p, q).expect("positive semi-axes");
    [0.5 * c(r[1], r[2]), 0.5 * c(r[0], r[2]), c(r[0], r[1])]
}

/// Target lengths `(π, π + μ, 2π + μ)` for the perturbed hemisphere.
pub fn target_lengths(mu: f64) -> [f64; 3] {
    [PI, PI + mu, TAU + mu]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub fd_step: f64,
    pub max_condition: f64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 50,
            fd_step: 1e-6,
            max_condition: 1e3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationResult {
    pub mu: f64,
    pub ellipsoid: Ellipsoid,
    /// Achieved minus target lengths.
    pub residuals: [f64; 3],
    pub iterations: usize,
    /// Largest Jacobian condition number seen on the Newton path.
    pub jacobian_condition: f64,
}

impl CalibrationResult {
    pub fn hemi(&self) -> HemiEllipsoid {
        HemiEllipsoid::new(self.ellipsoid)
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()))
    }
}

fn lengths_from_semi_axes(r: &Vector3<f64>) -> Result<Vector3<f64>> {
    let c = ellipse_circumference;
    Ok(Vector3::new(
        0.5 * c(r[1], r[2])?,
        0.5 * c(r[0], r[2])?,
        c(r[0], r[1])?,
    ))
}

pub fn calibrate(mu: f64) -> Result<CalibrationResult> {
    calibrate_with(mu, &CalibrationOptions::default())
}

/// Newton iteration on the semi-axes so that the principal curves of the
/// hemi-ellipsoid have lengths `(π, π + μ, 2π + μ)`.
///
/// The Jacobian is taken by central differences. At the round point it is
/// `[[0, π/2, π/2], [π/2, 0, π/2], [π, π, 0]]`, which is invertible, so the
/// solve is well posed for small μ.
pub fn calibrate_with(mu: f64, opts: &CalibrationOptions) -> Result<CalibrationResult> {
    if !(mu.is_finite() && (0.0..0.5).contains(&mu)) {
        return Err(GeometryError::InvalidMu(mu));
    }
    if mu == 0.0 {
        return Ok(CalibrationResult {
            mu,
            ellipsoid: Ellipsoid::round(),
            residuals: [0.0; 3],
            iterations: 0,
            jacobian_condition: 0.0,
        });
    }
    let target = Vector3::from(target_lengths(mu));
    let mut r = Vector3::new(1.0, 1.0, 1.0);
    let mut residual = lengths_from_semi_axes(&r)? - target;
    let mut worst_condition = 0.0f64;
    for iteration in 0..opts.max_iterations {
        if residual.amax() <= opts.tolerance * 1e-3 {
            return finish(mu, r, residual, iteration, worst_condition);
        }
        let mut jac = Matrix3::zeros();
        for j in 0..3 {
            let mut plus = r;
            let mut minus = r;
            plus[j] += opts.fd_step;
            minus[j] -= opts.fd_step;
            let col = (lengths_from_semi_axes(&plus)? - lengths_from_semi_axes(&minus)?)
                / (2.0 * opts.fd_step);
            jac.set_column(j, &col);
        }
        let sv = jac.singular_values();
        let condition = sv.max() / sv.min();
        worst_condition = worst_condition.max(condition);
        if !(condition < opts.max_condition) {
            return Err(GeometryError::IllConditioned(condition));
        }
        let step = jac
            .lu()
            .solve(&(-residual))
            .ok_or(GeometryError::IllConditioned(f64::INFINITY))?;
        r += step;
        residual = lengths_from_semi_axes(&r)? - target;
        if step.amax() < 1e-15 {
            break;
        }
    }
    if residual.amax() <= opts.tolerance {
        return finish(mu, r, residual, opts.max_iterations, worst_condition);
    }
    Err(GeometryError::NoConvergence {
        iterations: opts.max_iterations,
        residuals: residual.into(),
    })
}

fn finish(
    mu: f64,
    r: Vector3<f64>,
    residual: Vector3<f64>,
    iterations: usize,
    jacobian_condition: f64,
) -> Result<CalibrationResult> {
    Ok(CalibrationResult {
        mu,
        ellipsoid: Ellipsoid::from_semi_axes(r.into())?,
        residuals: residual.into(),
        iterations,
        jacobian_condition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Composite Gauss–Legendre (5 nodes) over many panels, independent of
    /// the AGM route.
    fn quadrature_circumference(alpha: f64, beta: f64) -> f64 {
        const NODES: [f64; 5] = [
            0.0,
            -0.538_469_310_105_683_1,
            0.538_469_310_105_683_1,
            -0.906_179_845_938_664,
            0.906_179_845_938_664,
        ];
        const WEIGHTS: [f64; 5] = [
            0.568_888_888_888_888_9,
            0.478_628_670_499_366_5,
            0.478_628_670_499_366_5,
            0.236_926_885_056_189_1,
            0.236_926_885_056_189_1,
        ];
        let panels = 400;
        let h = TAU / panels as f64;
        let speed = |t: f64| (alpha * alpha * t.sin().powi(2) + beta * beta * t.cos().powi(2)).sqrt();
        (0..panels)
            .map(|k| {
                let mid = (k as f64 + 0.5) * h;
                NODES
                    .iter()
                    .zip(WEIGHTS)
                    .map(|(x, w)| w * speed(mid + 0.5 * h * x))
                    .sum::<f64>()
                    * 0.5
                    * h
            })
            .sum()
    }

    #[test]
    fn circumference_examples() {
        assert_relative_eq!(ellipse_circumference(1.0, 1.0).unwrap(), TAU, epsilon = 1e-14);
        assert_relative_eq!(
            ellipse_circumference(2.0, 1.0).unwrap(),
            9.688_448_220_547_676,
            epsilon = 1e-12
        );
        assert_relative_eq!(ellipse_circumference(1.0, 1e-8).unwrap(), 4.0, epsilon = 1e-7);
        assert!(ellipse_circumference(0.0, 1.0).is_err());
        assert!(ellipse_circumference(1.0, -2.0).is_err());
        assert!(ellipse_circumference(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn circumference_matches_quadrature() {
        for &(a, b) in &[(2.0, 1.0), (1.0, 0.5), (1.3, 0.97), (0.2, 3.0)] {
            let agm = ellipse_circumference(a, b).unwrap();
            assert_relative_eq!(agm, quadrature_circumference(a, b), max_relative = 1e-12);
        }
    }

    #[test]
    fn principal_lengths_round_and_oblate() {
        let l = principal_curve_lengths(&HemiEllipsoid::round());
        assert_relative_eq!(l[0], PI, epsilon = 1e-14);
        assert_relative_eq!(l[1], PI, epsilon = 1e-14);
        assert_relative_eq!(l[2], TAU, epsilon = 1e-14);

        let h = HemiEllipsoid::new(Ellipsoid::new([1.0, 1.0, 4.0]).unwrap());
        let l = principal_curve_lengths(&h);
        let half = 0.5 * quadrature_circumference(1.0, 0.5);
        assert_relative_eq!(l[0], half, epsilon = 1e-11);
        assert_relative_eq!(l[1], half, epsilon = 1e-11);
        assert_relative_eq!(l[2], TAU, epsilon = 1e-14);
    }

    #[test]
    fn calibrate_round_is_exact() {
        let c = calibrate(0.0).unwrap();
        assert_eq!(c.ellipsoid.coefficients(), [1.0, 1.0, 1.0]);
        assert_eq!(c.residuals, [0.0; 3]);
        assert_eq!(c.iterations, 0);
    }

    #[test]
    fn calibrate_hits_targets() {
        for &mu in &[0.01, 0.05, 0.1, 0.2] {
            let c = calibrate(mu).unwrap();
            assert!(c.max_residual() <= 1e-8, "μ = {mu}: {:?}", c.residuals);
            assert!(c.jacobian_condition < 1e3);
            let l = principal_curve_lengths(&c.hemi());
            let t = target_lengths(mu);
            for i in 0..3 {
                assert!((l[i] - t[i]).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn calibrated_axis_ordering() {
        let c = calibrate(0.1).unwrap();
        let r = c.ellipsoid.semi_axes();
        assert!(r[0] > r[2] && r[2] > r[1], "{r:?}");
        let a = c.ellipsoid.coefficients();
        assert!(a[0] < a[2] && a[2] < a[1]);
    }

    #[test]
    fn calibrate_rejects_bad_mu() {
        assert_eq!(calibrate(0.6), Err(GeometryError::InvalidMu(0.6)));
        assert!(calibrate(-0.01).is_err());
        assert!(calibrate(f64::NAN).is_err());
    }

    #[test]
    fn boundary_frame_is_orthonormal() {
        let h = HemiEllipsoid::new(calibrate(0.1).unwrap().ellipsoid);
        for k in 0..16 {
            let s = k as f64 * 0.4;
            let x = h.boundary_point(s);
            assert_relative_eq!(h.ellipsoid.quadric(&x), 1.0, epsilon = 1e-14);
            let t = h.boundary_tangent(s);
            let nu = h.inward_conormal(&x);
            let n = h.ellipsoid.unit_normal(&x);
            assert!(t.dot(&nu).abs() < 1e-14 && t.dot(&n).abs() < 1e-14);
            assert!(nu.dot(&n).abs() < 1e-14);
            assert!(nu[2] > 0.999_999);
            assert_relative_eq!(h.boundary_parameter(&x), s.rem_euclid(TAU), epsilon = 1e-12);
        }
    }

    proptest! {
        #[test]
        fn circumference_symmetric_and_monotone(a in 0.05f64..5.0, b in 0.05f64..5.0, bump in 1e-3f64..0.5) {
            let c = ellipse_circumference(a, b).unwrap();
            prop_assert!((c - ellipse_circumference(b, a).unwrap()).abs() <= 1e-12 * c);
            prop_assert!(ellipse_circumference(a + bump, b).unwrap() > c);
            prop_assert!(ellipse_circumference(a, b + bump).unwrap() > c);
        }
    }
}
