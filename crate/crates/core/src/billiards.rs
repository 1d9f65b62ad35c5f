//! Billiards on a hemi-ellipsoid.
//!
//! The boundary `{x₃ = 0}` is itself a geodesic, so a billiard trajectory is
//! a chain of geodesic segments in `{x₃ ≥ 0}` joined by mirror reflections
//! across the boundary tangent. Reflecting the even segments through
//! `x₃ → −x₃` unfolds such a chain into a geodesic of the full ellipsoid.
//!
//! Closed trajectories below a length cap are searched for in three groups:
//!
//! * free boundary chords: shots orthogonal to the boundary that land
//!   orthogonally after some bounces (the trajectory then retraces itself),
//!   found by a one-dimensional scan over the start point;
//! * periodic orbits of the billiard map, found by a grid scan over
//!   `(start, angle)` of the return-map mismatch followed by Newton polish;
//! * the boundary curve itself, traced directly.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::{Matrix2, Vector2, Vector3};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::ellipsoid::{principal_curve_lengths, HemiEllipsoid};
use crate::geodesic::{GeodesicError, GeodesicFlow, GeodesicState, IntegratorOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BilliardError {
    #[error("state is not on the boundary (x₃ = {0:e})")]
    NotOnBoundary(f64),
    #[error("grazing incidence: normal velocity component {0:e}")]
    Grazing(f64),
    #[error("velocity points into the domain (normal component {0:e}), nothing to reflect")]
    NotIncoming(f64),
    #[error("shot angle {0} outside [0, π]")]
    InvalidAngle(f64),
    #[error("trajectory left the domain without a detected boundary crossing (x₃ = {0:e})")]
    EventDetection(f64),
    #[error("trajectory is not closed")]
    NotClosed,
    #[error(transparent)]
    Geodesic(#[from] GeodesicError),
}

pub type Result<T> = std::result::Result<T, BilliardError>;

/// Tolerance on `|x₃|` for a point to count as a boundary point.
const BOUNDARY_TOL: f64 = 1e-9;

fn mirror(v: &Vector3<f64>) -> Vector3<f64> {
    Vector3::new(v[0], v[1], -v[2])
}

fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// Mirrors `s.v` across the boundary tangent line inside the tangent plane:
/// `v' = v − 2⟨v, ν⟩ν` with ν the inward conormal.
pub fn reflect_at_boundary(
    h: &HemiEllipsoid,
    s: &GeodesicState,
    grazing_tol: f64,
) -> Result<GeodesicState> {
    if s.x[2].abs() > BOUNDARY_TOL {
        return Err(BilliardError::NotOnBoundary(s.x[2]));
    }
    let nu = h.inward_conormal(&s.x);
    let c = s.v.dot(&nu);
    if c.abs() < grazing_tol {
        return Err(BilliardError::Grazing(c));
    }
    if c > 0.0 {
        return Err(BilliardError::NotIncoming(c));
    }
    Ok(GeodesicState {
        x: s.x,
        v: s.v - nu * (2.0 * c),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Segment {
    pub start: GeodesicState,
    pub end: GeodesicState,
    pub length: f64,
    /// Sampled positions along the segment; empty unless recording was on.
    #[serde(skip)]
    pub path: Vec<Vector3<f64>>,
}

impl Segment {
    fn reversed(&self) -> Self {
        Self {
            start: self.end.reversed(),
            end: self.start.reversed(),
            length: self.length,
            path: self.path.iter().rev().copied().collect(),
        }
    }

    fn mirrored(&self) -> Self {
        let m = |s: &GeodesicState| GeodesicState::new(mirror(&s.x), mirror(&s.v));
        Self {
            start: m(&self.start),
            end: m(&self.end),
            length: self.length,
            path: self.path.iter().map(mirror).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryKind {
    /// Not known to close.
    Open,
    /// Periodic orbit of the billiard map with transversal bounces.
    Periodic,
    /// Leaves and returns to the boundary orthogonally; traversed forth and
    /// back by the billiard flow.
    FreeBoundaryChord,
    /// Runs inside the boundary curve.
    BoundaryLoop,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BilliardTrajectory {
    pub segments: Vec<Segment>,
    pub reflection_points: Vec<Vector3<f64>>,
    pub total_length: f64,
    pub closed: bool,
    /// Ambient position mismatch plus `1 − ⟨v_end, v_start⟩` at closure.
    pub closure_error: f64,
    pub kind: TrajectoryKind,
    pub start_parameter: f64,
    pub start_angle: f64,
}

impl BilliardTrajectory {
    pub fn bounces(&self) -> usize {
        self.reflection_points.len()
    }

    fn start_state(&self) -> &GeodesicState {
        &self.segments[0].start
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShotOptions {
    pub integrator: IntegratorOptions,
    pub grazing_tol: f64,
    pub record_path: bool,
}

impl Default for ShotOptions {
    fn default() -> Self {
        Self {
            integrator: IntegratorOptions::default(),
            grazing_tol: 1e-6,
            record_path: false,
        }
    }
}

/// Point on the boundary with the outgoing direction measured from the
/// boundary tangent (`0` along the tangent, `π/2` straight in).
#[derive(Debug, Clone, Copy, PartialEq)]
struct BoundaryPhase {
    param: f64,
    angle: f64,
}

fn boundary_phase(h: &HemiEllipsoid, s: &GeodesicState) -> BoundaryPhase {
    let param = h.boundary_parameter(&s.x);
    let t = h.boundary_tangent(param);
    let nu = h.inward_conormal(&s.x);
    BoundaryPhase {
        param,
        angle: s.v.dot(&nu).atan2(s.v.dot(&t)),
    }
}

fn launch_state(h: &HemiEllipsoid, start: f64, angle: f64) -> GeodesicState {
    let x = h.boundary_point(start);
    let t = h.boundary_tangent(start);
    let nu = h.inward_conormal(&x);
    GeodesicState::new(x, t * angle.cos() + nu * angle.sin())
}

fn closure_mismatch(a: &GeodesicState, b: &GeodesicState) -> f64 {
    (a.x - b.x).norm() + (1.0 - a.v.dot(&b.v))
}

/// Follows the billiard flow from boundary parameter `start` at `angle`
/// from the boundary tangent, up to `max_length` or `max_bounces`.
///
/// `angle` of exactly `0` or `π` launches along the boundary curve, which is
/// a geodesic; the run then stops after one full loop.
pub fn shoot_billiard(
    h: &HemiEllipsoid,
    start: f64,
    angle: f64,
    max_length: f64,
    max_bounces: usize,
    opts: &ShotOptions,
) -> Result<BilliardTrajectory> {
    if !(0.0..=PI).contains(&angle) {
        return Err(BilliardError::InvalidAngle(angle));
    }
    if angle == 0.0 || angle == PI {
        return trace_boundary_loop(h, start, angle == 0.0, max_length, opts);
    }
    if angle.sin() < opts.grazing_tol {
        return Err(BilliardError::Grazing(angle.sin()));
    }
    let flow = GeodesicFlow::new(&h.ellipsoid, opts.integrator);
    let s0 = launch_state(h, start, angle);
    let mut state = s0;
    let mut segments = Vec::new();
    let mut reflection_points = Vec::new();
    let mut travelled = 0.0;
    while travelled < max_length && reflection_points.len() < max_bounces {
        let adv = flow.advance_until(&state, max_length - travelled, |s| s.x[2], opts.record_path)?;
        travelled += adv.arc;
        let mut end = adv.state;
        if !adv.event_hit {
            if end.x[2] < -BOUNDARY_TOL {
                return Err(BilliardError::EventDetection(end.x[2]));
            }
            segments.push(Segment {
                start: state,
                end,
                length: adv.arc,
                path: adv.path,
            });
            break;
        }
        end.x = h.ellipsoid.project_to_equator(&end.x);
        end = flow.project(&end);
        end.x[2] = 0.0;
        segments.push(Segment {
            start: state,
            end,
            length: adv.arc,
            path: adv.path,
        });
        state = reflect_at_boundary(h, &end, opts.grazing_tol)?;
        reflection_points.push(end.x);
    }
    let closure_error = closure_mismatch(&state, &s0);
    Ok(BilliardTrajectory {
        segments,
        reflection_points,
        total_length: travelled,
        closed: false,
        closure_error,
        kind: TrajectoryKind::Open,
        start_parameter: start,
        start_angle: angle,
    })
}

fn trace_boundary_loop(
    h: &HemiEllipsoid,
    start: f64,
    forward: bool,
    max_length: f64,
    opts: &ShotOptions,
) -> Result<BilliardTrajectory> {
    let flow = GeodesicFlow::new(&h.ellipsoid, opts.integrator);
    let x0 = h.boundary_point(start);
    let t0 = if forward {
        h.boundary_tangent(start)
    } else {
        -h.boundary_tangent(start)
    };
    let s0 = GeodesicState::new(x0, t0);
    // Positive on the far half of the loop, crosses to zero on return.
    let adv = flow.advance_until(&s0, max_length, |s| -(s.x - x0).dot(&t0), opts.record_path)?;
    let closure_error = closure_mismatch(&adv.state, &s0);
    let closed = adv.event_hit;
    Ok(BilliardTrajectory {
        segments: vec![Segment {
            start: s0,
            end: adv.state,
            length: adv.arc,
            path: adv.path,
        }],
        reflection_points: Vec::new(),
        total_length: adv.arc,
        closed,
        closure_error,
        kind: if closed {
            TrajectoryKind::BoundaryLoop
        } else {
            TrajectoryKind::Open
        },
        start_parameter: start,
        start_angle: if forward { 0.0 } else { PI },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassLabel {
    Gamma1,
    Gamma2,
    Gamma3,
    Other,
}

impl ClassLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            ClassLabel::Gamma1 => "gamma1",
            ClassLabel::Gamma2 => "gamma2",
            ClassLabel::Gamma3 => "gamma3",
            ClassLabel::Other => "other",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryClass {
    pub label: ClassLabel,
    /// `cover_count · ℓ(γᵢ)` for the matched curve.
    pub matched_length: f64,
    pub deviation: f64,
    pub cover_count: u32,
}

/// Matches a closed trajectory against the principal curves. Chords can
/// only be `γ₁`/`γ₂`, boundary loops only `γ₃`; multiple covers are allowed.
pub fn classify(t: &BilliardTrajectory, principal: &[f64; 3], tol: f64) -> TrajectoryClass {
    let candidates: &[usize] = match t.kind {
        TrajectoryKind::FreeBoundaryChord => &[0, 1],
        TrajectoryKind::BoundaryLoop => &[2],
        TrajectoryKind::Periodic | TrajectoryKind::Open => &[0, 1, 2],
    };
    let mut best = TrajectoryClass {
        label: ClassLabel::Other,
        matched_length: f64::NAN,
        deviation: f64::INFINITY,
        cover_count: 0,
    };
    for &i in candidates {
        let n = (t.total_length / principal[i]).round().max(1.0);
        let matched = n * principal[i];
        let dev = (t.total_length - matched).abs();
        if dev < best.deviation {
            best = TrajectoryClass {
                label: [ClassLabel::Gamma1, ClassLabel::Gamma2, ClassLabel::Gamma3][i],
                matched_length: matched,
                deviation: dev,
                cover_count: n as u32,
            };
        }
    }
    let transversal = matches!(t.kind, TrajectoryKind::Periodic | TrajectoryKind::Open);
    if transversal || best.deviation > tol {
        best.label = ClassLabel::Other;
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchGrid {
    pub starts: usize,
    pub angles: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchOptions {
    pub grid: SearchGrid,
    pub length_cap: f64,
    pub max_bounces: usize,
    pub closure_tol: f64,
    pub classification_tol: f64,
    /// Position tolerance when comparing reflection points of two
    /// trajectories; lengths are compared at the same value.
    pub dedup_tol: f64,
    pub grazing_tol: f64,
    /// Return-map mismatch below which a grid minimum is polished.
    pub coarse_threshold: f64,
    /// Same-length, same-class trajectories at or above this count are
    /// reported as a continuous family.
    pub family_min_members: usize,
    pub max_polish_iterations: usize,
    /// Periodic orbits meeting the boundary closer than this angle are
    /// treated as the gliding limit of the boundary loop and dropped.
    pub min_transversal_angle: f64,
    pub coarse: IntegratorOptions,
    pub fine: IntegratorOptions,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            grid: SearchGrid {
                starts: 200,
                angles: 200,
            },
            length_cap: 7.0,
            max_bounces: 4,
            closure_tol: 1e-8,
            classification_tol: 1e-6,
            dedup_tol: 1e-5,
            grazing_tol: 1e-6,
            coarse_threshold: 0.25,
            family_min_members: 3,
            max_polish_iterations: 40,
            min_transversal_angle: 1e-3,
            coarse: IntegratorOptions::default().with_local_tol(1e-9),
            fine: IntegratorOptions::default().with_local_tol(1e-13),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedTrajectory {
    pub trajectory: BilliardTrajectory,
    pub class: TrajectoryClass,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryFamily {
    pub label: ClassLabel,
    pub length: f64,
    pub members: usize,
    pub representative: ClosedTrajectory,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchOutcome {
    pub isolated: Vec<ClosedTrajectory>,
    pub families: Vec<TrajectoryFamily>,
    pub principal_lengths: [f64; 3],
    pub grid_cells: usize,
    pub polished: usize,
}

impl SearchOutcome {
    /// Labels of isolated classes, sorted and deduplicated.
    pub fn labels(&self) -> Vec<ClassLabel> {
        let mut l: Vec<ClassLabel> = self.isolated.iter().map(|c| c.class.label).collect();
        l.sort();
        l.dedup();
        l
    }
}

struct Searcher<'a> {
    h: &'a HemiEllipsoid,
    opts: &'a SearchOptions,
}

impl Searcher<'_> {
    fn shot(&self, fine: bool, record_path: bool) -> ShotOptions {
        ShotOptions {
            integrator: if fine { self.opts.fine } else { self.opts.coarse },
            grazing_tol: self.opts.grazing_tol,
            record_path,
        }
    }

    fn cap(&self) -> f64 {
        self.opts.length_cap * (1.0 + 1e-9)
    }

    /// `cos` of the outgoing angle after each bounce of an orthogonal shot,
    /// with the cumulative length at that bounce.
    fn chord_profile(&self, s: f64, fine: bool) -> Vec<(f64, f64)> {
        let Ok(t) = shoot_billiard(
            self.h,
            s,
            FRAC_PI_2,
            self.cap(),
            self.opts.max_bounces,
            &self.shot(fine, false),
        ) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        let mut len = 0.0;
        for (seg, _) in t.segments.iter().zip(&t.reflection_points) {
            len += seg.length;
            let reflected = reflect_at_boundary(self.h, &seg.end, 0.0)
                .map(|r| boundary_phase(self.h, &r).angle.cos());
            match reflected {
                Ok(c) => out.push((c, len)),
                Err(_) => break,
            }
        }
        out
    }

    fn chord_residual(&self, s: f64, bounce: usize) -> Option<f64> {
        self.chord_profile(s, true).get(bounce).map(|p| p.0)
    }

    fn polish_chord(&self, mut lo: f64, mut hi: f64, bounce: usize) -> Option<f64> {
        let mut f_lo = self.chord_residual(lo, bounce)?;
        let mut f_hi = self.chord_residual(hi, bounce)?;
        if f_lo == 0.0 {
            return Some(lo);
        }
        if f_lo * f_hi > 0.0 {
            return None;
        }
        let mut side = 0i8;
        for _ in 0..100 {
            let mut s = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
            if !(s > lo && s < hi) {
                s = 0.5 * (lo + hi);
            }
            let f = self.chord_residual(s, bounce)?;
            if f.abs() <= 0.1 * self.opts.closure_tol || hi - lo < 1e-14 {
                return Some(s);
            }
            if f * f_lo > 0.0 {
                lo = s;
                f_lo = f;
                if side == -1 {
                    f_hi *= 0.5;
                }
                side = -1;
            } else {
                hi = s;
                f_hi = f;
                if side == 1 {
                    f_lo *= 0.5;
                }
                side = 1;
            }
        }
        None
    }

    /// Builds the primitive chord from `s` landing orthogonally at bounce
    /// `bounce` (0-based), verifying closure of the forth-and-back orbit.
    fn build_chord(&self, s: f64, bounce: usize) -> Option<BilliardTrajectory> {
        let profile = self.chord_profile(s, true);
        // an earlier orthogonal landing means this is a multiple cover
        if profile
            .iter()
            .take(bounce)
            .any(|(c, _)| c.abs() <= 1e3 * self.opts.closure_tol)
        {
            return None;
        }
        let opts = self.shot(true, true);
        let mut t = shoot_billiard(self.h, s, FRAC_PI_2, self.cap(), bounce + 1, &opts).ok()?;
        if t.bounces() != bounce + 1 {
            return None;
        }
        // The forth-and-back orbit has twice as many bounces.
        let round_trip = shoot_billiard(
            self.h,
            s,
            FRAC_PI_2,
            2.0 * t.total_length + 1.0,
            2 * (bounce + 1),
            &self.shot(true, false),
        )
        .ok()?;
        if round_trip.bounces() != 2 * (bounce + 1) {
            return None;
        }
        t.closure_error = round_trip.closure_error;
        if t.closure_error > self.opts.closure_tol {
            return None;
        }
        t.closed = true;
        t.kind = TrajectoryKind::FreeBoundaryChord;
        Some(t)
    }

    fn scan_chords(&self) -> Vec<BilliardTrajectory> {
        let n = self.opts.grid.starts.max(1);
        let params: Vec<f64> = (0..n).map(|i| i as f64 * TAU / n as f64).collect();
        let profiles: Vec<Vec<(f64, f64)>> = params
            .par_iter()
            .map(|&s| self.chord_profile(s, false))
            .collect();
        let mut roots: Vec<(f64, usize)> = Vec::new();
        for i in 0..n {
            let j = (i + 1) % n;
            let hi_param = if j == 0 { TAU } else { params[j] };
            for (b, &(c, _)) in profiles[i].iter().enumerate() {
                if c.abs() <= self.opts.closure_tol {
                    roots.push((params[i], b));
                    continue;
                }
                if let Some(&(c_next, _)) = profiles[j].get(b) {
                    if c * c_next < 0.0 && c_next.abs() > self.opts.closure_tol {
                        if let Some(s) = self.polish_chord(params[i], hi_param, b) {
                            roots.push((s.rem_euclid(TAU), b));
                        }
                    }
                }
            }
        }
        roots
            .par_iter()
            .filter_map(|&(s, b)| self.build_chord(s, b))
            .collect()
    }

    /// Return-map mismatch after each bounce, for bounces within the cap.
    fn return_profile(&self, s: f64, angle: f64, fine: bool) -> Option<BilliardTrajectory> {
        shoot_billiard(
            self.h,
            s,
            angle,
            self.cap(),
            self.opts.max_bounces,
            &self.shot(fine, false),
        )
        .ok()
    }

    fn phase_after(&self, s: f64, angle: f64, bounces: usize) -> Option<(BoundaryPhase, f64)> {
        let t = shoot_billiard(
            self.h,
            s,
            angle,
            self.cap(),
            bounces,
            &self.shot(true, false),
        )
        .ok()?;
        if t.bounces() != bounces {
            return None;
        }
        let last = t.segments.last()?;
        let out = reflect_at_boundary(self.h, &last.end, 0.0).ok()?;
        let phase = boundary_phase(self.h, &out);
        let start = launch_state(self.h, s, angle);
        Some((phase, closure_mismatch(&out, &start)))
    }

    fn polish_periodic(&self, s: f64, angle: f64, bounces: usize) -> Option<(f64, f64)> {
        let residual = |z: &Vector2<f64>| -> Option<(Vector2<f64>, f64)> {
            if !(z[1] > self.opts.grazing_tol && z[1] < PI - self.opts.grazing_tol) {
                return None;
            }
            let (p, mismatch) = self.phase_after(z[0], z[1], bounces)?;
            Some((
                Vector2::new(wrap_angle(p.param - z[0]), p.angle - z[1]),
                mismatch,
            ))
        };
        let mut z = Vector2::new(s, angle);
        let (mut f, mut mismatch) = residual(&z)?;
        let fd = 1e-6;
        for _ in 0..self.opts.max_polish_iterations {
            if mismatch <= self.opts.closure_tol {
                return Some((z[0].rem_euclid(TAU), z[1]));
            }
            let mut jac = Matrix2::zeros();
            for k in 0..2 {
                let mut zp = z;
                zp[k] += fd;
                let (fp, _) = residual(&zp)?;
                jac.set_column(k, &((fp - f) / fd));
            }
            let step = jac.lu().solve(&(-f))?;
            let mut accepted = false;
            let mut scale = 1.0;
            for _ in 0..12 {
                let trial = z + step * scale;
                if let Some((ft, mt)) = residual(&trial) {
                    if ft.norm() < f.norm() {
                        z = trial;
                        f = ft;
                        mismatch = mt;
                        accepted = true;
                        break;
                    }
                }
                scale *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        (mismatch <= self.opts.closure_tol).then(|| (z[0].rem_euclid(TAU), z[1]))
    }

    fn scan_periodic(&self) -> (Vec<BilliardTrajectory>, usize) {
        let (ns, na) = (self.opts.grid.starts.max(1), self.opts.grid.angles.max(1));
        let max_b = self.opts.max_bounces;
        let cells: Vec<(usize, usize)> = (0..ns)
            .flat_map(|i| (0..na).map(move |j| (i, j)))
            .collect();
        let param = |i: usize| i as f64 * TAU / ns as f64;
        let angle = |j: usize| (j as f64 + 0.5) * PI / na as f64;
        // scores[k][i * na + j]: mismatch after k+1 bounces
        let rows: Vec<Vec<f64>> = cells
            .par_iter()
            .map(|&(i, j)| {
                let mut row = vec![f64::INFINITY; max_b];
                if let Some(t) = self.return_profile(param(i), angle(j), false) {
                    let start = launch_state(self.h, param(i), angle(j));
                    for (k, seg) in t.segments.iter().enumerate().take(t.bounces()) {
                        if let Ok(out) = reflect_at_boundary(self.h, &seg.end, 0.0) {
                            row[k] = closure_mismatch(&out, &start);
                        }
                    }
                }
                row
            })
            .collect();
        let score = |k: usize, i: usize, j: usize| rows[i * na + j][k];
        let mut seeds = Vec::new();
        for k in 0..max_b {
            for i in 0..ns {
                for j in 0..na {
                    let v = score(k, i, j);
                    if !(v < self.opts.coarse_threshold) {
                        continue;
                    }
                    let mut is_min = true;
                    'nb: for di in [ns - 1, 0, 1] {
                        for dj in [-1i64, 0, 1] {
                            let jj = j as i64 + dj;
                            if (di == 0 && dj == 0) || jj < 0 || jj >= na as i64 {
                                continue;
                            }
                            let w = score(k, (i + di) % ns, jj as usize);
                            if w < v {
                                is_min = false;
                                break 'nb;
                            }
                        }
                    }
                    if is_min {
                        seeds.push((param(i), angle(j), k + 1));
                    }
                }
            }
        }
        let polished = seeds.len();
        let found: Vec<BilliardTrajectory> = seeds
            .par_iter()
            .filter_map(|&(s, a, b)| {
                let (s, a) = self.polish_periodic(s, a, b)?;
                self.build_periodic(s, a, b)
            })
            .collect();
        (found, polished)
    }

    fn build_periodic(&self, s: f64, angle: f64, bounces: usize) -> Option<BilliardTrajectory> {
        // reduce to the minimal period
        for d in 1..bounces {
            if bounces.is_multiple_of(d) {
                if let Some((_, m)) = self.phase_after(s, angle, d) {
                    if m <= 10.0 * self.opts.closure_tol {
                        return None;
                    }
                }
            }
        }
        let mut t = shoot_billiard(self.h, s, angle, self.cap(), bounces, &self.shot(true, true)).ok()?;
        if t.bounces() != bounces {
            return None;
        }
        if t.closure_error > self.opts.closure_tol {
            return None;
        }
        // orthogonal hits mean a retracing orbit, which the chord scan owns
        let min_sin = self.opts.min_transversal_angle.sin();
        let rejected = |a: f64| a.cos().abs() <= 1e-5 || a.sin() < min_sin;
        if rejected(angle)
            || t.segments.iter().any(|seg| {
                reflect_at_boundary(self.h, &seg.end, 0.0)
                    .map(|r| rejected(boundary_phase(self.h, &r).angle))
                    .unwrap_or(true)
            })
        {
            return None;
        }
        t.closed = true;
        t.kind = TrajectoryKind::Periodic;
        Some(t)
    }
}

fn signature(t: &BilliardTrajectory) -> Vec<Vector3<f64>> {
    let mut pts = t.reflection_points.clone();
    pts.push(t.start_state().x);
    if let Some(last) = t.segments.last() {
        pts.push(last.end.x);
    }
    pts
}

fn same_trajectory(a: &BilliardTrajectory, b: &BilliardTrajectory, tol: f64) -> bool {
    if a.kind != b.kind || (a.total_length - b.total_length).abs() > tol * (1.0 + a.total_length) {
        return false;
    }
    if a.kind == TrajectoryKind::BoundaryLoop {
        return true;
    }
    let (pa, pb) = (signature(a), signature(b));
    let covered = |p: &[Vector3<f64>], q: &[Vector3<f64>]| {
        p.iter()
            .all(|x| q.iter().any(|y| (x - y).norm() <= tol))
    };
    covered(&pa, &pb) && covered(&pb, &pa)
}

/// Searches for closed billiard trajectories no longer than the length cap
/// and classifies them against the three principal curves.
pub fn find_closed_trajectories(h: &HemiEllipsoid, opts: &SearchOptions) -> Result<SearchOutcome> {
    let principal = principal_curve_lengths(h);
    let searcher = Searcher { h, opts };
    let mut found = searcher.scan_chords();
    let (periodic, polished) = searcher.scan_periodic();
    found.extend(periodic);
    if principal[2] <= searcher.cap() {
        let loop_traj = shoot_billiard(
            h,
            0.0,
            0.0,
            principal[2] + 1.0,
            0,
            &searcher.shot(true, true),
        )?;
        if loop_traj.closed && loop_traj.total_length <= searcher.cap() {
            found.push(loop_traj);
        }
    }
    found.retain(|t| t.total_length <= searcher.cap());

    let mut unique: Vec<BilliardTrajectory> = Vec::new();
    for t in found {
        if !unique.iter().any(|u| same_trajectory(u, &t, opts.dedup_tol)) {
            unique.push(t);
        }
    }
    let mut classified: Vec<ClosedTrajectory> = unique
        .into_iter()
        .map(|trajectory| {
            let class = classify(&trajectory, &principal, opts.classification_tol);
            ClosedTrajectory { trajectory, class }
        })
        .collect();
    classified.sort_by(|a, b| {
        a.class
            .label
            .cmp(&b.class.label)
            .then(a.trajectory.total_length.total_cmp(&b.trajectory.total_length))
            .then(
                a.trajectory
                    .start_parameter
                    .total_cmp(&b.trajectory.start_parameter),
            )
    });

    let mut isolated = Vec::new();
    let mut families: Vec<TrajectoryFamily> = Vec::new();
    let mut rest = classified.into_iter().peekable();
    while let Some(first) = rest.next() {
        let mut group = vec![first];
        while let Some(next) = rest.peek() {
            let head = &group[0];
            if next.class.label == head.class.label
                && (next.trajectory.total_length - head.trajectory.total_length).abs()
                    <= opts.dedup_tol * (1.0 + head.trajectory.total_length)
            {
                group.push(rest.next().expect("peeked"));
            } else {
                break;
            }
        }
        if group.len() >= opts.family_min_members {
            let members = group.len();
            let representative = group.swap_remove(0);
            families.push(TrajectoryFamily {
                label: representative.class.label,
                length: representative.trajectory.total_length,
                members,
                representative,
            });
        } else {
            isolated.extend(group);
        }
    }
    Ok(SearchOutcome {
        isolated,
        families,
        principal_lengths: principal,
        grid_cells: opts.grid.starts * opts.grid.angles,
        polished,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnfoldedPiece {
    pub start: GeodesicState,
    pub end: GeodesicState,
    pub length: f64,
    pub mirrored: bool,
    #[serde(skip)]
    pub path: Vec<Vector3<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnfoldedCurve {
    pub pieces: Vec<UnfoldedPiece>,
    pub length: f64,
}

/// Preimage of a closed billiard trajectory in the full ellipsoid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoubledCurve {
    /// Closed curves obtained by unfolding, each listed once.
    pub curves: Vec<UnfoldedCurve>,
    /// Sum over the doubled trajectory, counted with multiplicity.
    pub total_length: f64,
    /// 2 when the trajectory and its mirror image coincide (boundary loops).
    pub multiplicity: u32,
    pub max_seam_velocity_mismatch: f64,
    pub max_seam_position_mismatch: f64,
    /// States at the former reflection points, for invariant checks.
    pub seam_states: Vec<GeodesicState>,
}

/// Unfolds a closed trajectory: every segment together with its mirror
/// image under `x₃ → −x₃`, chained so that mirrored and plain segments
/// alternate. At each former reflection point the chain should be smooth.
pub fn double_trajectory(_h: &HemiEllipsoid, t: &BilliardTrajectory) -> Result<DoubledCurve> {
    if !t.closed {
        return Err(BilliardError::NotClosed);
    }
    if t.kind == TrajectoryKind::BoundaryLoop {
        let seg = &t.segments[0];
        return Ok(DoubledCurve {
            curves: vec![UnfoldedCurve {
                pieces: vec![UnfoldedPiece {
                    start: seg.start,
                    end: seg.end,
                    length: seg.length,
                    mirrored: false,
                    path: seg.path.clone(),
                }],
                length: seg.length,
            }],
            total_length: 2.0 * t.total_length,
            multiplicity: 2,
            max_seam_velocity_mismatch: 0.0,
            max_seam_position_mismatch: 0.0,
            seam_states: Vec::new(),
        });
    }
    let orbit: Vec<Segment> = match t.kind {
        TrajectoryKind::FreeBoundaryChord => {
            let mut o = t.segments.clone();
            o.extend(t.segments.iter().rev().map(Segment::reversed));
            o
        }
        _ => t.segments.clone(),
    };
    let n = orbit.len();
    // An odd chain ends on the mirrored sheet and needs a second pass.
    let passes = if n.is_multiple_of(2) { 1 } else { 2 };
    let chain: Vec<UnfoldedPiece> = (0..n * passes)
        .map(|k| {
            let seg = &orbit[k % n];
            let mirrored = k % 2 == 1;
            let s = if mirrored { seg.mirrored() } else { seg.clone() };
            UnfoldedPiece {
                start: s.start,
                end: s.end,
                length: s.length,
                mirrored,
                path: s.path,
            }
        })
        .collect();
    let mut max_v = 0.0f64;
    let mut max_x = 0.0f64;
    let mut seam_states = Vec::new();
    for k in 0..chain.len() {
        let a = &chain[k];
        let b = &chain[(k + 1) % chain.len()];
        max_v = max_v.max((a.end.v - b.start.v).norm());
        max_x = max_x.max((a.end.x - b.start.x).norm());
        seam_states.push(b.start);
    }
    let mut curves = Vec::new();
    let length: f64 = chain.iter().map(|p| p.length).sum();
    let mirror_chain: Option<Vec<UnfoldedPiece>> = (passes == 1).then(|| {
        chain
            .iter()
            .map(|p| UnfoldedPiece {
                start: GeodesicState::new(mirror(&p.start.x), mirror(&p.start.v)),
                end: GeodesicState::new(mirror(&p.end.x), mirror(&p.end.v)),
                length: p.length,
                mirrored: !p.mirrored,
                path: p.path.iter().map(mirror).collect(),
            })
            .collect()
    });
    curves.push(UnfoldedCurve {
        pieces: chain,
        length,
    });
    let mut total_length = length;
    if let Some(m) = mirror_chain {
        total_length += length;
        curves.push(UnfoldedCurve { pieces: m, length });
    }
    // a retraced chord and its mirror form a single closed curve
    if t.kind == TrajectoryKind::FreeBoundaryChord {
        curves.truncate(1);
        total_length = 2.0 * t.total_length;
        let c = &mut curves[0];
        c.pieces.truncate(2 * t.segments.len());
        c.length = c.pieces.iter().map(|p| p.length).sum();
    }
    Ok(DoubledCurve {
        curves,
        total_length,
        multiplicity: 1,
        max_seam_velocity_mismatch: max_v,
        max_seam_position_mismatch: max_x,
        seam_states,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ellipsoid::{calibrate, Ellipsoid};
    use crate::geodesic::GeodesicFlow;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn round() -> HemiEllipsoid {
        HemiEllipsoid::round()
    }

    #[test]
    fn reflection_examples_round() {
        let h = round();
        let theta = 0.4f64;
        let s = GeodesicState::new(Vector3::x(), Vector3::new(0.0, theta.cos(), -theta.sin()));
        let r = reflect_at_boundary(&h, &s, 1e-6).unwrap();
        assert!((r.v - Vector3::new(0.0, theta.cos(), theta.sin())).norm() < 1e-15);
        let s = GeodesicState::new(Vector3::x(), -Vector3::z());
        let r = reflect_at_boundary(&h, &s, 1e-6).unwrap();
        assert!((r.v - Vector3::z()).norm() < 1e-15);
    }

    #[test]
    fn reflection_error_paths() {
        let h = round();
        let graze = GeodesicState::new(Vector3::x(), Vector3::new(0.0, 1.0, -1e-8).normalize());
        assert!(matches!(reflect_at_boundary(&h, &graze, 1e-6), Err(BilliardError::Grazing(_))));
        let inward = GeodesicState::new(Vector3::x(), Vector3::z());
        assert!(matches!(reflect_at_boundary(&h, &inward, 1e-6), Err(BilliardError::NotIncoming(_))));
        let off = GeodesicState::new(Vector3::new(0.0, 0.6, 0.8), -Vector3::z());
        assert!(matches!(reflect_at_boundary(&h, &off, 1e-6), Err(BilliardError::NotOnBoundary(_))));
    }

    #[test]
    fn reflection_preserves_speed_and_tangent_on_calibrated_surface() {
        let h = calibrate(0.1).unwrap().hemi();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let s = rng.random_range(0.0..TAU);
            let x = h.boundary_point(s);
            let t = h.boundary_tangent(s);
            let nu = h.inward_conormal(&x);
            let a = rng.random_range(0.05..PI - 0.05);
            let v = t * a.cos() - nu * a.sin();
            let incoming = GeodesicState::new(x, v);
            let out = reflect_at_boundary(&h, &incoming, 1e-6).unwrap();
            assert!((out.v.norm() - v.norm()).abs() < 1e-10);
            assert!((out.v.dot(&t) - v.dot(&t)).abs() < 1e-10);
            // involution up to time reversal
            let back = reflect_at_boundary(&h, &out.reversed(), 1e-6).unwrap();
            assert!((back.v + v).norm() < 1e-12);
        }
    }

    #[test]
    fn orthogonal_shot_on_round_hemisphere_is_a_meridian() {
        let h = round();
        let t = shoot_billiard(&h, 0.3, FRAC_PI_2, 10.0, 1, &ShotOptions::default()).unwrap();
        assert_eq!(t.segments.len(), 1);
        assert!((t.total_length - PI).abs() < 1e-9);
        let end = &t.segments[0].end;
        assert!((end.x + h.boundary_point(0.3)).norm() < 1e-8);
        let out = reflect_at_boundary(&h, end, 0.0).unwrap();
        assert!((boundary_phase(&h, &out).angle - FRAC_PI_2).abs() < 1e-7);
    }

    #[test]
    fn oblique_shot_on_round_hemisphere_has_equal_chords() {
        // Every chord is a half great circle: length π, endpoints antipodal,
        // so reflection points advance by π in the boundary parameter and the
        // angle with the boundary is preserved.
        let h = round();
        let angle = PI / 4.0;
        let t = shoot_billiard(&h, 0.0, angle, 100.0, 6, &ShotOptions::default()).unwrap();
        assert_eq!(t.bounces(), 6);
        for seg in &t.segments {
            assert!((seg.length - PI).abs() < 1e-9);
        }
        for (k, p) in t.reflection_points.iter().enumerate() {
            let expected = h.boundary_point(PI * (k + 1) as f64);
            assert!((p - expected).norm() < 1e-8);
            let out = reflect_at_boundary(&h, &t.segments[k].end, 0.0).unwrap();
            assert!((boundary_phase(&h, &out).angle - angle).abs() < 1e-8);
        }
    }

    #[test]
    fn speed_is_conserved_over_many_bounces() {
        let h = calibrate(0.05).unwrap().hemi();
        let t = shoot_billiard(&h, 0.2, 1.1, 1e4, 100, &ShotOptions::default()).unwrap();
        assert_eq!(t.bounces(), 100);
        let last = t.segments.last().unwrap();
        assert!((last.end.v.norm() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn tangent_shot_follows_boundary() {
        let c = calibrate(0.05).unwrap();
        let h = c.hemi();
        let t = shoot_billiard(&h, 0.0, 0.0, 10.0, 10, &ShotOptions::default()).unwrap();
        assert!(t.closed);
        assert_eq!(t.kind, TrajectoryKind::BoundaryLoop);
        assert!((t.total_length - (TAU + 0.05)).abs() < 1e-6, "{}", t.total_length);
    }

    #[test]
    fn shot_rejects_bad_angles() {
        let h = round();
        let o = ShotOptions::default();
        assert!(matches!(shoot_billiard(&h, 0.0, -0.1, 1.0, 1, &o), Err(BilliardError::InvalidAngle(_))));
        assert!(matches!(shoot_billiard(&h, 0.0, 1e-9, 1.0, 1, &o), Err(BilliardError::Grazing(_))));
    }

    #[test]
    fn classification_with_covers() {
        let principal = [PI, PI + 0.05, TAU + 0.05];
        let mut t = shoot_billiard(&round(), 0.0, FRAC_PI_2, 4.0, 1, &ShotOptions::default()).unwrap();
        t.kind = TrajectoryKind::FreeBoundaryChord;
        t.total_length = 2.0 * (PI + 0.05);
        let c = classify(&t, &principal, 1e-6);
        assert_eq!((c.label, c.cover_count), (ClassLabel::Gamma2, 2));
        t.total_length = 3.5;
        assert_eq!(classify(&t, &principal, 1e-6).label, ClassLabel::Other);
    }

    #[test]
    fn round_search_reports_meridian_family() {
        let opts = SearchOptions {
            grid: SearchGrid {
                starts: 40,
                angles: 20,
            },
            length_cap: 4.0,
            ..SearchOptions::default()
        };
        let out = find_closed_trajectories(&round(), &opts).unwrap();
        assert!(out.isolated.is_empty(), "{:?}", out.labels());
        assert_eq!(out.families.len(), 1);
        let fam = &out.families[0];
        assert!((fam.length - PI).abs() < 1e-8);
        assert!(fam.members >= 10);
    }

    #[test]
    fn calibrated_search_small_grid() {
        let h = calibrate(0.05).unwrap().hemi();
        let opts = SearchOptions {
            grid: SearchGrid {
                starts: 48,
                angles: 40,
            },
            ..SearchOptions::default()
        };
        let out = find_closed_trajectories(&h, &opts).unwrap();
        assert!(out.families.is_empty());
        let lengths: Vec<_> = out
            .isolated
            .iter()
            .map(|c| (c.class.label, c.trajectory.total_length))
            .collect();
        assert_eq!(out.isolated.len(), 3, "{lengths:?}");
        let want = [PI, PI + 0.05, TAU + 0.05];
        for (c, w) in out.isolated.iter().zip(want) {
            assert!((c.trajectory.total_length - w).abs() < 1e-6, "{lengths:?}");
            assert!(c.class.deviation <= 1e-6);
            assert!(c.trajectory.closure_error <= 1e-8);
        }

        // π < 3.17 < π + 0.05
        let capped = SearchOptions {
            length_cap: 3.17,
            ..opts
        };
        let out = find_closed_trajectories(&h, &capped).unwrap();
        assert_eq!(out.labels(), vec![ClassLabel::Gamma1]);
        let below_all = SearchOptions {
            length_cap: 3.0,
            ..opts
        };
        let out = find_closed_trajectories(&h, &below_all).unwrap();
        assert!(out.isolated.is_empty() && out.families.is_empty());
    }

    #[test]
    fn doubling_a_meridian_gives_a_great_circle() {
        let h = round();
        let opts = SearchOptions {
            grid: SearchGrid {
                starts: 8,
                angles: 4,
            },
            length_cap: 4.0,
            ..SearchOptions::default()
        };
        let out = find_closed_trajectories(&h, &opts).unwrap();
        let chord = &out.families[0].representative.trajectory;
        let d = double_trajectory(&h, chord).unwrap();
        assert_eq!(d.curves.len(), 1);
        assert!((d.total_length - TAU).abs() < 1e-8);
        assert!(d.max_seam_velocity_mismatch < 1e-7);
        assert!(d.max_seam_position_mismatch < 1e-8);
    }

    #[test]
    fn doubling_two_bounce_orbit_on_round_hemisphere() {
        let h = round();
        let mut t = shoot_billiard(
            &h,
            0.4,
            1.0,
            20.0,
            2,
            &ShotOptions {
                record_path: true,
                ..ShotOptions::default()
            },
        )
        .unwrap();
        assert!(t.closure_error < 1e-8);
        t.closed = true;
        t.kind = TrajectoryKind::Periodic;
        let d = double_trajectory(&h, &t).unwrap();
        assert_eq!(d.curves.len(), 2);
        assert!((d.curves[0].length - TAU).abs() < 1e-8);
        assert!((d.total_length - 2.0 * t.total_length).abs() < 1e-12);
        assert!(d.max_seam_velocity_mismatch <= 1e-8, "{}", d.max_seam_velocity_mismatch);
        // the unfolded curve is a single great circle: all points on one plane
        let pts: Vec<Vector3<f64>> = d.curves[0]
            .pieces
            .iter()
            .flat_map(|p| p.path.iter().copied())
            .collect();
        let normal = pts[0].cross(&pts[pts.len() / 3]).normalize();
        assert!(pts.iter().all(|p| p.dot(&normal).abs() < 1e-8));
        let flow_surface = Ellipsoid::round();
        let flow = GeodesicFlow::new(&flow_surface, IntegratorOptions::default());
        for s in &d.seam_states {
            flow.check(s, 1e-8).unwrap();
        }
    }

    #[test]
    fn doubling_boundary_loop_has_multiplicity_two() {
        let h = calibrate(0.05).unwrap().hemi();
        let t = shoot_billiard(&h, 0.0, 0.0, 10.0, 0, &ShotOptions::default()).unwrap();
        let d = double_trajectory(&h, &t).unwrap();
        assert_eq!(d.multiplicity, 2);
        assert_eq!(d.curves.len(), 1);
        assert!((d.total_length - 2.0 * t.total_length).abs() < 1e-12);
        let open = shoot_billiard(&h, 0.0, 1.0, 1.0, 1, &ShotOptions::default()).unwrap();
        assert_eq!(double_trajectory(&h, &open), Err(BilliardError::NotClosed));
    }
}
