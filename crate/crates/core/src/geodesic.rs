//! Geodesic flow on an ellipsoid in ambient coordinates.
//!
//! A unit-speed geodesic satisfies `x'' = −(x'ᵀ A x' / |A x|²) A x`: the
//! acceleration is the multiple of the surface normal that keeps `Q(x) = 1`.
//! Steps use the Dormand–Prince 5(4) pair with local error control; after
//! every accepted step the position is projected back onto the surface and
//! the velocity onto the tangent plane, then renormalised to unit speed.

use nalgebra::{SVector, Vector3};
use serde::Serialize;
use thiserror::Error;

use crate::ellipsoid::Ellipsoid;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeodesicError {
    #[error("step size underflow at arc length {arc} (h = {step:e})")]
    StepUnderflow { arc: f64, step: f64 },
    #[error("{quantity} drifted to {value:e}, beyond {limit:e}")]
    InvariantViolation {
        quantity: &'static str,
        value: f64,
        limit: f64,
    },
    #[error("arc length must be finite and nonnegative, got {0}")]
    InvalidArc(f64),
}

pub type Result<T> = std::result::Result<T, GeodesicError>;

/// Phase point of the geodesic flow: a surface point and a unit tangent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeodesicState {
    pub x: Vector3<f64>,
    pub v: Vector3<f64>,
}

impl GeodesicState {
    pub fn new(x: Vector3<f64>, v: Vector3<f64>) -> Self {
        Self { x, v }
    }

    pub fn reversed(&self) -> Self {
        Self {
            x: self.x,
            v: -self.v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegratorOptions {
    /// Local truncation error allowed per step (max norm).
    pub local_tol: f64,
    /// Constraint, tangency and speed tolerance of the state invariants.
    pub invariant_tol: f64,
    pub initial_step: f64,
    pub max_step: f64,
    pub min_step: f64,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            local_tol: 1e-12,
            invariant_tol: 1e-8,
            initial_step: 0.02,
            max_step: 0.25,
            min_step: 1e-13,
        }
    }
}

impl IntegratorOptions {
    pub fn with_local_tol(mut self, local_tol: f64) -> Self {
        self.local_tol = local_tol;
        self
    }
}

/// Classical first integral of ellipsoid geodesics,
/// `J = 1 / (|A x| · √(vᵀ A v))`.
pub fn joachimsthal(e: &Ellipsoid, s: &GeodesicState) -> f64 {
    1.0 / (e.scale(&s.x).norm() * s.v.dot(&e.scale(&s.v)).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Advance {
    pub state: GeodesicState,
    pub arc: f64,
    /// True when the event function changed sign and the run stopped there.
    pub event_hit: bool,
    /// Accepted step positions, including the start and the end point.
    pub path: Vec<Vector3<f64>>,
}

type Phase = SVector<f64, 6>;

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B_LOW: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Geodesic flow of one ellipsoid with fixed integrator settings.
#[derive(Debug, Clone, Copy)]
pub struct GeodesicFlow<'a> {
    surface: &'a Ellipsoid,
    opts: IntegratorOptions,
}

impl<'a> GeodesicFlow<'a> {
    pub fn new(surface: &'a Ellipsoid, opts: IntegratorOptions) -> Self {
        Self { surface, opts }
    }

    pub fn options(&self) -> &IntegratorOptions {
        &self.opts
    }

    pub fn surface(&self) -> &Ellipsoid {
        self.surface
    }

    fn rhs(&self, y: &Phase) -> Phase {
        let x = Vector3::new(y[0], y[1], y[2]);
        let v = Vector3::new(y[3], y[4], y[5]);
        let ax = self.surface.scale(&x);
        let lambda = v.dot(&self.surface.scale(&v)) / ax.norm_squared();
        let acc = -lambda * ax;
        Phase::from([v[0], v[1], v[2], acc[0], acc[1], acc[2]])
    }

    /// One Dormand–Prince step: (5th-order solution, error estimate).
    fn raw_step(&self, y: &Phase, h: f64) -> (Phase, f64) {
        let mut k = [Phase::zeros(); 7];
        k[0] = self.rhs(y);
        for i in 1..7 {
            let mut yi = *y;
            for (j, kj) in k.iter().enumerate().take(i) {
                if A[i][j] != 0.0 {
                    yi += kj * (h * A[i][j]);
                }
            }
            k[i] = self.rhs(&yi);
        }
        let mut high = *y;
        let mut err = Phase::zeros();
        for i in 0..7 {
            high += k[i] * (h * B[i]);
            err += k[i] * (h * (B[i] - B_LOW[i]));
        }
        (high, err.amax())
    }

    /// Projects onto the unit tangent bundle of the surface.
    pub fn project(&self, s: &GeodesicState) -> GeodesicState {
        let x = self.surface.project_point(&s.x);
        let n = self.surface.unit_normal(&x);
        let v = s.v - n * s.v.dot(&n);
        GeodesicState { x, v: v.normalize() }
    }

    /// Checks the state invariants at `limit`.
    pub fn check(&self, s: &GeodesicState, limit: f64) -> Result<()> {
        let constraint = (self.surface.quadric(&s.x) - 1.0).abs();
        let tangency = self.surface.gradient(&s.x).dot(&s.v).abs();
        let speed = (s.v.norm() - 1.0).abs();
        for (quantity, value) in [
            ("constraint", constraint),
            ("tangency", tangency),
            ("speed", speed),
        ] {
            if !(value <= limit) {
                return Err(GeodesicError::InvariantViolation {
                    quantity,
                    value,
                    limit,
                });
            }
        }
        Ok(())
    }

    fn to_phase(s: &GeodesicState) -> Phase {
        Phase::from([s.x[0], s.x[1], s.x[2], s.v[0], s.v[1], s.v[2]])
    }

    fn from_phase(y: &Phase) -> GeodesicState {
        GeodesicState {
            x: Vector3::new(y[0], y[1], y[2]),
            v: Vector3::new(y[3], y[4], y[5]),
        }
    }

    /// Single projected step of length `h` with no error control. Used for
    /// event location inside an already accepted step.
    pub fn substep(&self, s: &GeodesicState, h: f64) -> GeodesicState {
        let (y, _) = self.raw_step(&Self::to_phase(s), h);
        self.project(&Self::from_phase(&y))
    }

    /// Integrates for `arc` units of arc length.
    pub fn advance(&self, s0: &GeodesicState, arc: f64) -> Result<Advance> {
        self.advance_until(s0, arc, |_| 1.0, false)
    }

    /// Integrates until `arc` is exhausted or the event function crosses
    /// from positive to nonpositive, whichever comes first. The crossing is
    /// located by Illinois regula falsi on the step length.
    pub fn advance_until<F>(
        &self,
        s0: &GeodesicState,
        arc: f64,
        event: F,
        record_path: bool,
    ) -> Result<Advance>
    where
        F: Fn(&GeodesicState) -> f64,
    {
        if !(arc.is_finite() && arc >= 0.0) {
            return Err(GeodesicError::InvalidArc(arc));
        }
        let limit = 10.0 * self.opts.invariant_tol;
        self.check(s0, limit)?;
        let mut state = self.project(s0);
        let mut travelled = 0.0;
        let mut h = self.opts.initial_step.min(self.opts.max_step);
        let mut path = Vec::new();
        if record_path {
            path.push(state.x);
        }
        let mut g_prev = event(&state);
        while arc - travelled > 1e-15 {
            let remaining = arc - travelled;
            let step = h.min(remaining);
            let (y, err) = self.raw_step(&Self::to_phase(&state), step);
            if !(err <= self.opts.local_tol) {
                let shrink = if err.is_finite() {
                    (0.9 * (self.opts.local_tol / err).powf(0.2)).max(0.1)
                } else {
                    0.1
                };
                h = step * shrink;
                if h < self.opts.min_step {
                    return Err(GeodesicError::StepUnderflow {
                        arc: travelled,
                        step: h,
                    });
                }
                continue;
            }
            let next = self.project(&Self::from_phase(&y));
            let g_next = event(&next);
            if g_prev > 0.0 && g_next <= 0.0 {
                let (tau, hit) = self.locate(&state, step, g_prev, g_next, &event);
                self.check(&hit, limit)?;
                travelled += tau;
                if record_path {
                    path.push(hit.x);
                }
                return Ok(Advance {
                    state: hit,
                    arc: travelled,
                    event_hit: true,
                    path,
                });
            }
            self.check(&next, limit)?;
            state = next;
            travelled += step;
            g_prev = g_next;
            if record_path {
                path.push(state.x);
            }
            let grow = if err > 0.0 {
                (0.9 * (self.opts.local_tol / err).powf(0.2)).clamp(0.2, 5.0)
            } else {
                5.0
            };
            // A clamped final step says nothing about the natural step size.
            if step == h || grow < 1.0 {
                h = (step * grow).min(self.opts.max_step);
            }
        }
        Ok(Advance {
            state,
            arc: travelled,
            event_hit: false,
            path,
        })
    }

    fn locate<F>(
        &self,
        start: &GeodesicState,
        h: f64,
        g_lo: f64,
        g_hi: f64,
        event: &F,
    ) -> (f64, GeodesicState)
    where
        F: Fn(&GeodesicState) -> f64,
    {
        let (mut lo, mut hi) = (0.0, h);
        let (mut f_lo, mut f_hi) = (g_lo, g_hi);
        let mut best = self.substep(start, h);
        let mut side = 0i8;
        for _ in 0..200 {
            if hi - lo <= 1e-13 {
                break;
            }
            let mut tau = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
            if !(tau > lo && tau < hi) {
                tau = 0.5 * (lo + hi);
            }
            let s = self.substep(start, tau);
            let g = event(&s);
            if g > 0.0 {
                lo = tau;
                f_lo = g;
                if side == -1 {
                    f_hi *= 0.5;
                }
                side = -1;
            } else {
                hi = tau;
                f_hi = g;
                best = s;
                if side == 1 {
                    f_lo *= 0.5;
                }
                side = 1;
                if g == 0.0 {
                    break;
                }
            }
        }
        if hi != h {
            best = self.substep(start, hi);
        }
        (hi, best)
    }
}

/// Advances the geodesic through `s0` by `arc_length`, returning the end
/// state and the arc length actually traversed.
pub fn integrate_geodesic(
    e: &Ellipsoid,
    s0: &GeodesicState,
    arc_length: f64,
    opts: &IntegratorOptions,
) -> Result<(GeodesicState, f64)> {
    let adv = GeodesicFlow::new(e, *opts).advance(s0, arc_length)?;
    Ok((adv.state, adv.arc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{PI, TAU};

    fn random_state(e: &Ellipsoid, rng: &mut ChaCha8Rng) -> GeodesicState {
        let dir = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let x = dir / e.quadric(&dir).sqrt();
        let n = e.unit_normal(&x);
        let raw = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let v = (raw - n * raw.dot(&n)).normalize();
        GeodesicState::new(x, v)
    }

    #[test]
    fn great_circle_closes() {
        let e = Ellipsoid::round();
        let s0 = GeodesicState::new(Vector3::x(), Vector3::y());
        let (s, arc) = integrate_geodesic(&e, &s0, TAU, &IntegratorOptions::default()).unwrap();
        assert!((arc - TAU).abs() < 1e-14);
        assert!((s.x - s0.x).norm() < 1e-6);
        let (s, _) = integrate_geodesic(&e, &s0, PI, &IntegratorOptions::default()).unwrap();
        assert!((s.x + Vector3::x()).norm() < 1e-6);
    }

    #[test]
    fn joachimsthal_is_conserved() {
        let e = Ellipsoid::new([1.0, 1.1, 1.2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let s0 = random_state(&e, &mut rng);
            let j0 = joachimsthal(&e, &s0);
            let (s, _) = integrate_geodesic(&e, &s0, 10.0, &IntegratorOptions::default()).unwrap();
            assert!((joachimsthal(&e, &s) - j0).abs() < 1e-7);
        }
    }

    #[test]
    fn drift_reversibility_and_additivity() {
        let e = Ellipsoid::new([0.95, 1.08, 1.02]).unwrap();
        let flow = GeodesicFlow::new(&e, IntegratorOptions::default());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s0 = random_state(&e, &mut rng);
        let adv = flow.advance_until(&s0, 20.0, |_| 1.0, true).unwrap();
        for x in &adv.path {
            assert!((e.quadric(x) - 1.0).abs() <= 1e-8);
        }
        assert!((adv.state.v.norm() - 1.0).abs() <= 1e-8);

        let fwd = flow.advance(&s0, 7.5).unwrap().state;
        let back = flow.advance(&fwd.reversed(), 7.5).unwrap().state;
        assert!((back.x - s0.x).norm() <= 1e-6);

        let split = flow.advance(&flow.advance(&s0, 3.0).unwrap().state, 4.5).unwrap().state;
        assert!((split.x - fwd.x).norm() <= 1e-7);
    }

    #[test]
    fn event_locates_equator_crossing() {
        let e = Ellipsoid::round();
        let flow = GeodesicFlow::new(&e, IntegratorOptions::default());
        let angle = 0.7f64;
        let s0 = GeodesicState::new(Vector3::x(), Vector3::new(0.0, angle.cos(), angle.sin()));
        let adv = flow.advance_until(&s0, 10.0, |s| s.x[2], false).unwrap();
        assert!(adv.event_hit);
        assert!((adv.arc - PI).abs() < 1e-10, "{}", adv.arc);
        assert!(adv.state.x[2].abs() < 1e-10);
    }

    #[test]
    fn rejects_off_surface_start() {
        let e = Ellipsoid::round();
        let s0 = GeodesicState::new(Vector3::new(1.1, 0.0, 0.0), Vector3::y());
        let err = integrate_geodesic(&e, &s0, 1.0, &IntegratorOptions::default()).unwrap_err();
        assert!(matches!(err, GeodesicError::InvariantViolation { quantity: "constraint", .. }));
        assert!(integrate_geodesic(&e, &s0, -1.0, &IntegratorOptions::default()).is_err());
    }
}
