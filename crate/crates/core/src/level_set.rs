//! Arclength of `{f = 0} ∩ (S²)⁺` by predictor–corrector continuation.
//!
//! Seeds come from sign changes of `f` along meridians and parallels of a
//! latitude–longitude grid on the upper hemisphere. From each seed not yet
//! covered, the curve is followed along `T = p × ∇_S f / |p × ∇_S f|` with
//! Newton correction onto `{f = 0, |p| = 1}` until it closes up or crosses
//! the equator, where it is cut at the exact boundary point.

use std::f64::consts::{FRAC_PI_2, TAU};

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use crate::crofton::{CroftonError, MassEstimate, MassMethod, Result};
use crate::polynomial::BivariatePolynomial;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceOptions {
    /// Largest continuation step along the curve.
    pub step: f64,
    pub seed_parallels: usize,
    pub seed_meridians: usize,
    pub max_steps: usize,
    /// Surface gradient magnitude below which the curve counts as singular.
    pub singular_tol: f64,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            step: 0.01,
            seed_parallels: 90,
            seed_meridians: 360,
            max_steps: 2_000_000,
            singular_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TracedComponent {
    pub length: f64,
    pub closed: bool,
    #[serde(skip)]
    pub points: Vec<Vector3<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TracedLevelSet {
    pub length: f64,
    pub components: Vec<TracedComponent>,
    pub steps: usize,
}

struct Tracer<'a> {
    f: &'a BivariatePolynomial,
    opts: &'a TraceOptions,
    steps: usize,
}

fn arc_from_chord(chord: f64, t0: &Vector3<f64>, t1: &Vector3<f64>) -> f64 {
    let theta = t0.dot(t1).clamp(-1.0, 1.0).acos();
    if theta < 1e-8 {
        chord
    } else {
        chord * (0.5 * theta) / (0.5 * theta).sin()
    }
}

fn polar_point(polar: f64, lon: f64) -> Vector3<f64> {
    let (s, c) = polar.sin_cos();
    Vector3::new(s * lon.cos(), s * lon.sin(), c)
}

impl Tracer<'_> {
    fn value(&self, p: &Vector3<f64>) -> f64 {
        self.f.eval(p[0], p[1])
    }

    fn gradient(&self, p: &Vector3<f64>) -> (f64, Vector3<f64>) {
        let (v, fx, fy) = self.f.eval_with_gradient(p[0], p[1]);
        (v, Vector3::new(fx, fy, 0.0))
    }

    /// Unit tangent of the level curve through `p`, or a singularity error.
    fn tangent(&self, p: &Vector3<f64>) -> Result<Vector3<f64>> {
        let (_, g) = self.gradient(p);
        let gs = g - p * g.dot(p);
        let m = gs.norm();
        if m < self.opts.singular_tol {
            return Err(CroftonError::NearSingular {
                point: [p[0], p[1], p[2]],
                gradient: m,
                limit: self.opts.singular_tol,
            });
        }
        Ok(p.cross(&gs) / m)
    }

    /// Newton projection onto `{f = 0, |p| = 1, ⟨t, p − q⟩ = 0}`.
    fn correct(&self, q: &Vector3<f64>, t: &Vector3<f64>) -> Option<Vector3<f64>> {
        let mut p = *q;
        for _ in 0..12 {
            let (v, g) = self.gradient(&p);
            let r = Vector3::new(v, p.norm_squared() - 1.0, t.dot(&(p - q)));
            let jac = Matrix3::from_rows(&[g.transpose(), (p * 2.0).transpose(), t.transpose()]);
            let dp = jac.lu().solve(&(-r))?;
            p += dp;
            if dp.norm() < 1e-15 {
                break;
            }
        }
        let (v, g) = self.gradient(&p);
        let ok = v.abs() <= 1e-12 * g.norm().max(1.0) && (p.norm() - 1.0).abs() < 1e-12;
        ok.then_some(p)
    }

    /// Point where the curve meets the equator, starting from a guess.
    fn boundary_point(&self, guess: &Vector3<f64>) -> Option<Vector3<f64>> {
        let mut phi = guess[1].atan2(guess[0]);
        for _ in 0..50 {
            let (s, c) = phi.sin_cos();
            let (v, fx, fy) = self.f.eval_with_gradient(c, s);
            let dv = -fx * s + fy * c;
            if dv == 0.0 {
                return None;
            }
            let step = v / dv;
            phi -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        let b = Vector3::new(phi.cos(), phi.sin(), 0.0);
        (self.value(&b).abs() <= 1e-11).then_some(b)
    }

    /// Follows the curve from `p0` along `dir` (±1). Returns arclength,
    /// whether it closed, and the visited points.
    fn follow(&mut self, p0: &Vector3<f64>, dir: f64) -> Result<(f64, bool, Vec<Vector3<f64>>)> {
        let h_max = self.opts.step;
        let mut h = h_max;
        let mut p = *p0;
        let mut t = self.tangent(&p)? * dir;
        let mut length = 0.0;
        let mut pts = vec![p];
        loop {
            self.steps += 1;
            if self.steps > self.opts.max_steps {
                return Err(CroftonError::StepBudget(self.opts.max_steps));
            }
            let to_start = p0 - p;
            if length > 4.0 * h_max && to_start.norm() <= 1.5 * h && t.dot(&to_start) > 0.0 {
                let t0 = self.tangent(p0)? * dir;
                length += arc_from_chord(to_start.norm(), &t, &t0);
                pts.push(*p0);
                return Ok((length, true, pts));
            }
            let q = p + t * h;
            let next = self.correct(&q, &t).and_then(|pn| {
                let tn = self.tangent(&pn).ok()? * dir;
                // reject turns that are too sharp for the chord model
                (t.dot(&tn) > 0.2f64.cos()).then_some((pn, tn))
            });
            let Some((pn, tn)) = next else {
                h *= 0.5;
                if h < 1e-9 {
                    // distinguish a singular point from a plain failure
                    self.tangent(&q.normalize())?;
                    return Err(CroftonError::NearSingular {
                        point: [p[0], p[1], p[2]],
                        gradient: f64::NAN,
                        limit: self.opts.singular_tol,
                    });
                }
                continue;
            };
            if pn[2] < 0.0 {
                let frac = p[2] / (p[2] - pn[2]);
                let guess = p + (pn - p) * frac;
                let b = self.boundary_point(&guess).ok_or(CroftonError::NearSingular {
                    point: [guess[0], guess[1], guess[2]],
                    gradient: f64::NAN,
                    limit: self.opts.singular_tol,
                })?;
                let tb = self.tangent(&b)? * dir;
                length += arc_from_chord((b - p).norm(), &t, &tb);
                pts.push(b);
                return Ok((length, false, pts));
            }
            length += arc_from_chord((pn - p).norm(), &t, &tn);
            let turn = t.dot(&tn).clamp(-1.0, 1.0).acos();
            p = pn;
            t = tn;
            pts.push(p);
            if turn < 0.05 {
                h = (h * 1.5).min(h_max);
            }
        }
    }

    fn bisect<F: Fn(f64) -> Vector3<f64>>(&self, at: F, mut lo: f64, mut hi: f64) -> Vector3<f64> {
        let mut f_lo = self.value(&at(lo));
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            let fm = self.value(&at(mid));
            if fm == 0.0 {
                return at(mid);
            }
            if (fm > 0.0) == (f_lo > 0.0) {
                lo = mid;
                f_lo = fm;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 {
                break;
            }
        }
        at(0.5 * (lo + hi))
    }

    fn seeds(&self) -> Vec<Vector3<f64>> {
        let np = self.opts.seed_parallels.max(1);
        let nm = self.opts.seed_meridians.max(3);
        let polar = |j: usize| j as f64 * FRAC_PI_2 / np as f64;
        let lon = |k: usize| k as f64 * TAU / nm as f64;
        let mut seeds = Vec::new();
        // meridians, pole to equator
        for k in 0..nm {
            let at = |a: f64| polar_point(a, lon(k));
            for j in 0..np {
                let (a, b) = (polar(j), polar(j + 1));
                let (fa, fb) = (self.value(&at(a)), self.value(&at(b)));
                if fa == 0.0 {
                    seeds.push(at(a));
                } else if fa * fb < 0.0 {
                    seeds.push(self.bisect(at, a, b));
                }
            }
        }
        // parallels, including the equator
        for j in 1..=np {
            let at = |l: f64| polar_point(polar(j), l);
            for k in 0..nm {
                let (a, b) = (lon(k), lon(k) + TAU / nm as f64);
                let (fa, fb) = (self.value(&at(a)), self.value(&at(b)));
                if fa * fb < 0.0 {
                    seeds.push(self.bisect(at, a, b));
                }
            }
        }
        seeds
    }
}

pub fn trace_level_set(f: &BivariatePolynomial, opts: &TraceOptions) -> Result<TracedLevelSet> {
    if f.is_zero() {
        return Err(CroftonError::ZeroPolynomial);
    }
    if !(opts.step > 0.0 && opts.step < 0.5) {
        return Err(CroftonError::InvalidOption(format!("step {} outside (0, 0.5)", opts.step)));
    }
    let mut tracer = Tracer { f, opts, steps: 0 };
    let seeds = tracer.seeds();
    let mut components: Vec<TracedComponent> = Vec::new();
    let mut visited: Vec<Vector3<f64>> = Vec::new();
    let near = 2.0 * opts.step;
    for s in seeds {
        if visited.iter().any(|v| (v - s).norm() < near) {
            continue;
        }
        let (len, closed, mut pts) = tracer.follow(&s, 1.0)?;
        let mut length = len;
        if !closed {
            let (back, _, back_pts) = tracer.follow(&s, -1.0)?;
            length += back;
            pts.reverse();
            pts.extend(back_pts.into_iter().skip(1));
        }
        visited.extend(pts.iter().copied());
        components.push(TracedComponent {
            length,
            closed,
            points: pts,
        });
    }
    Ok(TracedLevelSet {
        length: components.iter().map(|c| c.length).sum(),
        components,
        steps: tracer.steps,
    })
}

/// Hemisphere length of `{f = 0}` by direct tracing with the given step.
pub fn trace_level_set_length(f: &BivariatePolynomial, step: f64) -> Result<MassEstimate> {
    let opts = TraceOptions {
        step,
        ..TraceOptions::default()
    };
    let traced = trace_level_set(f, &opts)?;
    Ok(MassEstimate {
        value: traced.length,
        standard_error: 0.0,
        sample_count: traced.steps,
        method: MassMethod::Traced,
        degenerate_events: 0,
    })
}

/// Length of the spherical circle at polar angle `a`: `2π sin a`.
pub fn parallel_length(polar: f64) -> f64 {
    TAU * polar.sin().abs()
}
