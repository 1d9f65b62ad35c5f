//! One function per subcommand. Each returns a [`Report`]; printing and exit
//! codes are handled by the caller.

use std::f64::consts::{PI, SQRT_2, TAU};
use std::path::PathBuf;

use clap::ValueEnum;
use nalgebra::Vector3;
use serde::Serialize;
use serde_json::{json, Value};

use hemiwidth::billiards::{
    double_trajectory, find_closed_trajectories, shoot_billiard, ClassLabel, ClosedTrajectory, SearchGrid,
    SearchOptions, ShotOptions,
};
use hemiwidth::crofton::{bezout_sweep, crofton_mass_with, CountOptions, CroftonError, MassEstimate, MassMethod, Sampler};
use hemiwidth::ellipsoid::{calibrate_with, principal_curve_lengths, target_lengths, CalibrationOptions, Ellipsoid, GeometryError};
use hemiwidth::geodesic::{joachimsthal, GeodesicFlow, GeodesicState, IntegratorOptions};
use hemiwidth::level_set::{trace_level_set, TraceOptions};
use hemiwidth::polynomial::BivariatePolynomial;
use hemiwidth::sweepout::{verify_upper_bound_chain, SupBudget};
use hemiwidth::widths::{
    degree_index, hemisphere_width, rp2_width, sphere_width, verify_counting_identity, LengthValue,
};

use crate::config::RunConfig;
use crate::plot;
use crate::report::{citation, Check, Report};
use crate::CliError;

const STREAM_BEZOUT: u64 = 1;
const STREAM_CLOSED_FORMS: u64 = 2;
const STREAM_CROFTON: u64 = 3;
const STREAM_ORACLE: u64 = 8;
const STREAM_SWEEPOUT: u64 = 32;

fn compute<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Compute(e.to_string())
}

fn geometry(e: GeometryError) -> CliError {
    match e {
        GeometryError::InvalidMu(_) | GeometryError::InvalidCoefficients(_) => CliError::Input(e.to_string()),
        other => compute(other),
    }
}

fn crofton_err(e: CroftonError) -> CliError {
    match e {
        CroftonError::ZeroPolynomial | CroftonError::InvalidOption(_) | CroftonError::InvalidNormal => {
            CliError::Input(e.to_string())
        }
        other => compute(other),
    }
}

fn v3(v: &Vector3<f64>) -> [f64; 3] {
    [v[0], v[1], v[2]]
}

// ---------------------------------------------------------------- spectrum

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Surface {
    Hemisphere,
    Sphere,
    Rp2,
}

impl Surface {
    fn name(&self) -> &'static str {
        match self {
            Surface::Hemisphere => "hemisphere",
            Surface::Sphere => "sphere",
            Surface::Rp2 => "rp2",
        }
    }

    fn width(&self, p: u64) -> Result<LengthValue, CliError> {
        match self {
            Surface::Hemisphere => hemisphere_width(p),
            Surface::Sphere => sphere_width(p),
            Surface::Rp2 => rp2_width(p),
        }
        .map_err(compute)
    }

    fn citation(&self) -> &'static str {
        match self {
            Surface::Hemisphere => citation::HEMISPHERE_WIDTH,
            Surface::Sphere => citation::SPHERE_WIDTH,
            Surface::Rp2 => citation::RP2_WIDTH,
        }
    }
}

/// Walks p upward and tracks where the π coefficient steps, without any
/// square roots: hemisphere steps at p = (d+1)(d+2)/2, sphere at p = (k+1)²,
/// rp2 at p = (k+1)(2k+1).
struct StepScan {
    surface: Surface,
    k: u64,
}

impl StepScan {
    fn new(surface: Surface) -> Self {
        Self { surface, k: 1 }
    }

    fn next_step(&self) -> u64 {
        let k = self.k;
        match self.surface {
            Surface::Hemisphere => (k + 1) * (k + 2) / 2,
            Surface::Sphere => (k + 1) * (k + 1),
            Surface::Rp2 => (k + 1) * (2 * k + 1),
        }
    }

    /// π coefficient at `p`; calls must come with nondecreasing `p`.
    fn at(&mut self, p: u64) -> u64 {
        while p >= self.next_step() {
            self.k += 1;
        }
        match self.surface {
            Surface::Hemisphere => self.k,
            Surface::Sphere | Surface::Rp2 => 2 * self.k,
        }
    }
}

/// Widths for `p = 1..=p_max` with closed-form / scan cross-checks. `list`
/// puts every width into the results and the csv table.
pub fn spectrum(cfg: &RunConfig, p_max: u64, surface: Surface, list: bool) -> Result<Report, CliError> {
    if p_max == 0 {
        return Err(CliError::Input("--p-max must be at least 1".into()));
    }
    let mut r = Report::new("spectrum", json!({"p_max": p_max, "surface": surface.name()}));
    let mut scan = StepScan::new(surface);
    let mut widths = Vec::with_capacity(if list { p_max as usize } else { 0 });
    let (mut scan_bad, mut index_bad, mut decreases) = (0u64, 0u64, 0u64);
    let mut first_bad: Option<String> = None;
    let mut prev = 0u64;
    let mut last = None;
    for p in 1..=p_max {
        let w = surface.width(p)?;
        let s = scan.at(p);
        if w.pi_coeff() != s || w.mu_coeff() != 0 {
            scan_bad += 1;
            first_bad.get_or_insert_with(|| format!("p = {p}: formula {w}, scan {s}π"));
        }
        if surface == Surface::Hemisphere {
            let f = degree_index(p).map_err(compute)?;
            if w.pi_coeff() != f {
                index_bad += 1;
                first_bad.get_or_insert_with(|| format!("p = {p}: formula {w}, f(p) = {f}"));
            }
        }
        if w.pi_coeff() < prev {
            decreases += 1;
        }
        prev = w.pi_coeff();
        if list {
            widths.push((p, w));
        }
        last = Some(w);
    }
    let mut c = Check::equal("formula_vs_step_scan", scan_bad as f64, 0.0, surface.citation());
    if let Some(b) = &first_bad {
        c = c.with_detail(b.clone());
    }
    r.check(c);
    if surface == Surface::Hemisphere {
        r.check(Check::equal("formula_vs_degree_index", index_bad as f64, 0.0, citation::DEGREE_INDEX));
    }
    r.check(Check::equal("nondecreasing", decreases as f64, 0.0, surface.citation()));

    let last = last.expect("p_max ≥ 1");
    let mut results = json!({"surface": surface.name(), "last": {"p": p_max, "width": last}});
    if list {
        results["widths"] = widths
            .iter()
            .map(|(p, w)| json!({"p": p, "pi_coeff": w.pi_coeff(), "mu_coeff": w.mu_coeff()}))
            .collect();
        for (p, w) in &widths {
            r.line(format!("ω_{p} = {w}"));
        }
        r.table = Some((
            vec!["p".into(), "pi_coeff".into(), "mu_coeff".into(), "width".into()],
            widths
                .iter()
                .map(|(p, w)| vec![p.to_string(), w.pi_coeff().to_string(), w.mu_coeff().to_string(), w.to_string()])
                .collect(),
        ));
        if cfg.plot {
            let pts: Vec<(u64, u64)> = widths.iter().map(|(p, w)| (*p, w.pi_coeff())).collect();
            let svg = plot::staircase(&format!("{} widths ω_p", surface.name()), &pts);
            let path = plot::write(&cfg.plot_dir(), &format!("spectrum-{}.svg", surface.name()), &svg)?;
            r.artifacts.push(path);
        }
    } else {
        r.line(format!("checked p = 1..{p_max}; ω_{p_max} = {last}"));
    }
    r.results = results;
    Ok(r)
}

/// Fixed small-p width values for the three surfaces.
pub fn reference_values() -> Result<Report, CliError> {
    let mut r = Report::new("reference-values", json!({}));
    let cases: [(Surface, &[u64]); 3] = [
        (Surface::Hemisphere, &[1, 1, 2, 2, 2, 3, 3, 3, 3]),
        (Surface::Sphere, &[2, 2, 2, 4]),
        (Surface::Rp2, &[2]),
    ];
    let mut results = serde_json::Map::new();
    for (surface, expected) in cases {
        let mut got = Vec::new();
        for p in 1..=expected.len() as u64 {
            got.push(surface.width(p)?.pi_coeff());
        }
        let mismatches = got.iter().zip(expected).filter(|(a, b)| a != b).count();
        let fmt = |v: &[u64]| v.iter().map(|k| format!("{k}π")).collect::<Vec<_>>().join(", ");
        r.line(format!("{}: {}", surface.name(), fmt(&got)));
        let mut c = Check::equal(surface.name(), mismatches as f64, 0.0, surface.citation());
        if mismatches > 0 {
            c = c.with_detail(format!("got ({}), expected ({})", fmt(&got), fmt(expected)));
        }
        r.check(c);
        results.insert(surface.name().into(), json!(got));
    }
    r.results = Value::Object(results);
    Ok(r)
}

// ---------------------------------------------------------------- counting

pub fn counting(_cfg: &RunConfig, d: u64, list: bool) -> Result<Report, CliError> {
    let rep = verify_counting_identity(d).map_err(compute)?;
    let mut r = Report::new("counting", json!({"d": d}));
    r.check(Check::equal(
        "cardinality",
        rep.value_count as f64,
        rep.expected_count as f64,
        citation::COUNTING,
    ));
    for ic in rep.checks.iter().filter(|c| c.name != "cardinality") {
        let cite = if ic.name == "strictly_increasing" {
            citation::MONOTONE
        } else {
            citation::COUNTING
        };
        let mut c = Check::equal(ic.name, if ic.passed { 0.0 } else { 1.0 }, 0.0, cite);
        if let Some(ce) = &ic.counterexample {
            c = c.with_detail(format!("{ce} (expected {})", ic.expected));
        }
        r.check(c);
    }
    for n in &rep.notes {
        r.note(n.clone());
    }
    r.line(format!(
        "d = {d}: {} values, (d+1)(d+4)/2 = {}",
        rep.value_count, rep.expected_count
    ));
    let mut results = json!({"d": d, "value_count": rep.value_count, "expected_count": rep.expected_count});
    if list {
        let table = hemiwidth::widths::enumerate_length_spectrum(d).map_err(compute)?;
        r.line(
            table
                .values
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(", "),
        );
        results["values"] = json!(table.values);
    }
    r.results = results;
    Ok(r)
}

// ---------------------------------------------------------------- calibrate

/// Ellipse perimeter by the periodic trapezoid rule, which converges
/// geometrically for this smooth integrand.
fn trapezoid_circumference(a: f64, b: f64) -> f64 {
    const N: usize = 512;
    let h = TAU / N as f64;
    (0..N)
        .map(|k| {
            let t = k as f64 * h;
            (a * a * t.sin().powi(2) + b * b * t.cos().powi(2)).sqrt()
        })
        .sum::<f64>()
        * h
}

pub fn calibrate(cfg: &RunConfig, mu: f64) -> Result<Report, CliError> {
    if !(mu.is_finite() && (0.0..0.5).contains(&mu)) {
        return Err(CliError::Input(format!("μ = {mu} outside [0, 0.5)")));
    }
    let opts = CalibrationOptions {
        tolerance: cfg.tol("calibration.residual"),
        max_condition: cfg.tol("calibration.condition"),
        ..CalibrationOptions::default()
    };
    let cal = calibrate_with(mu, &opts).map_err(geometry)?;
    let lengths = principal_curve_lengths(&cal.hemi());
    let targets = target_lengths(mu);
    let r_ax = cal.ellipsoid.semi_axes();
    let trap = [
        0.5 * trapezoid_circumference(r_ax[1], r_ax[2]),
        0.5 * trapezoid_circumference(r_ax[0], r_ax[2]),
        trapezoid_circumference(r_ax[0], r_ax[1]),
    ];
    let trap_err = trap
        .iter()
        .zip(&targets)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);

    let mut r = Report::new("calibrate", json!({"mu": mu}));
    r.check(Check::at_most("residual", cal.max_residual(), cfg.tol("calibration.residual"), citation::CALIBRATION));
    r.check(Check::at_most(
        "lengths_by_trapezoid",
        trap_err,
        cfg.tol("calibration.residual"),
        citation::CALIBRATION,
    ));
    r.check(Check::at_most(
        "jacobian_condition",
        cal.jacobian_condition,
        cfg.tol("calibration.condition"),
        citation::CALIBRATION,
    ));
    if mu == 0.0 {
        let dev = cal
            .ellipsoid
            .coefficients()
            .iter()
            .map(|a| (a - 1.0).abs())
            .fold(0.0f64, f64::max);
        r.check(Check::equal("round_exact", dev, 0.0, citation::CALIBRATION));
    }
    let a = cal.ellipsoid.coefficients();
    r.line(format!("coefficients a = ({:.12}, {:.12}, {:.12})", a[0], a[1], a[2]));
    r.line(format!("semi-axes    r = ({:.12}, {:.12}, {:.12})", r_ax[0], r_ax[1], r_ax[2]));
    for (i, (l, t)) in lengths.iter().zip(&targets).enumerate() {
        r.line(format!("ℓ(γ{}) = {l:.12}  target {t:.12}", i + 1));
    }
    r.line(format!("{} Newton iterations", cal.iterations));
    r.results = json!({
        "coefficients": a,
        "semi_axes": r_ax,
        "lengths": lengths,
        "targets": targets,
        "residuals": cal.residuals,
        "iterations": cal.iterations,
        "jacobian_condition": cal.jacobian_condition,
    });
    Ok(r)
}

// ---------------------------------------------------------------- geodesics

#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicArgs {
    pub coeffs: [f64; 3],
    /// Use the calibrated ellipsoid for this μ instead of `coeffs`.
    pub mu: Option<f64>,
    pub arc: f64,
    pub start: Option<[f64; 3]>,
    pub direction: Option<[f64; 3]>,
}

impl Default for GeodesicArgs {
    fn default() -> Self {
        Self {
            coeffs: [1.0, 1.1, 1.2],
            mu: None,
            arc: 10.0,
            start: None,
            direction: None,
        }
    }
}

fn initial_state(e: &Ellipsoid, start: [f64; 3], direction: [f64; 3]) -> Result<GeodesicState, CliError> {
    let x = Vector3::from(start);
    if !(x.norm() > 0.0 && x.iter().all(|c| c.is_finite())) {
        return Err(CliError::Input("start point must be finite and nonzero".into()));
    }
    let x = e.project_point(&(x / e.quadric(&x).sqrt()));
    let n = e.unit_normal(&x);
    let d = Vector3::from(direction);
    let t = d - n * d.dot(&n);
    if !(t.norm() > 1e-9 && t.iter().all(|c| c.is_finite())) {
        return Err(CliError::Input("direction has no tangential component at the start point".into()));
    }
    Ok(GeodesicState::new(x, t.normalize()))
}

fn state_error(a: &GeodesicState, b: &GeodesicState) -> f64 {
    (a.x - b.x).norm() + (a.v - b.v).norm()
}

pub fn geodesics(cfg: &RunConfig, args: &GeodesicArgs) -> Result<Report, CliError> {
    if !(args.arc.is_finite() && args.arc > 0.0) {
        return Err(CliError::Input("--arc must be positive".into()));
    }
    let e = match args.mu {
        Some(mu) => {
            if !(mu.is_finite() && (0.0..0.5).contains(&mu)) {
                return Err(CliError::Input(format!("μ = {mu} outside [0, 0.5)")));
            }
            calibrate_with(mu, &CalibrationOptions::default()).map_err(geometry)?.ellipsoid
        }
        None => Ellipsoid::new(args.coeffs).map_err(geometry)?,
    };
    let integ = IntegratorOptions::default().with_local_tol(cfg.tol("geodesic.local"));
    let mut r = Report::new(
        "geodesics",
        json!({"coefficients": e.coefficients(), "mu": args.mu, "arc": args.arc, "start": args.start, "direction": args.direction}),
    );

    // great circle on the round sphere
    let round = Ellipsoid::round();
    let x0 = Vector3::new(1.0, 2.0, 2.0) / 3.0;
    let g0 = GeodesicState::new(x0, x0.cross(&Vector3::z()).normalize());
    let back = GeodesicFlow::new(&round, integ).advance(&g0, TAU).map_err(compute)?;
    let closure = state_error(&back.state, &g0);
    r.check(Check::at_most("great_circle_closure", closure, cfg.tol("geodesic.closure"), citation::GEODESIC_FLOW));

    let start = args.start.unwrap_or([0.6, 0.5, 0.62]);
    let direction = args.direction.unwrap_or([-0.3, 0.8, 0.1]);
    let s0 = initial_state(&e, start, direction)?;
    let flow = GeodesicFlow::new(&e, integ);
    let j0 = joachimsthal(&e, &s0);
    let (mut j_drift, mut surf_drift, mut speed_drift, mut tangency) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut path = vec![v3(&s0.x)];
    let mut s = s0;
    let mut travelled = 0.0;
    const CHUNK: f64 = 0.05;
    while travelled < args.arc {
        let step = CHUNK.min(args.arc - travelled);
        let adv = flow.advance(&s, step).map_err(compute)?;
        s = adv.state;
        travelled += adv.arc;
        j_drift = j_drift.max((joachimsthal(&e, &s) - j0).abs());
        surf_drift = surf_drift.max((e.quadric(&s.x) - 1.0).abs());
        speed_drift = speed_drift.max((s.v.norm() - 1.0).abs());
        tangency = tangency.max(s.v.dot(&e.unit_normal(&s.x)).abs());
        path.push(v3(&s.x));
        if adv.arc <= 0.0 {
            break;
        }
    }
    let back = flow.advance(&s.reversed(), travelled).map_err(compute)?;
    let reversibility = state_error(&back.state.reversed(), &s0);

    r.check(Check::at_most("joachimsthal_drift", j_drift, cfg.tol("geodesic.joachimsthal"), citation::JOACHIMSTHAL));
    let constraint = surf_drift.max(speed_drift).max(tangency);
    r.check(Check::at_most("constraint_drift", constraint, cfg.tol("geodesic.constraint"), citation::GEODESIC_FLOW));
    r.check(Check::at_most(
        "reversibility",
        reversibility,
        cfg.tol("geodesic.reversibility"),
        citation::GEODESIC_FLOW,
    ));

    r.line(format!("great-circle closure after 2π: {closure:.3e}"));
    r.line(format!("start x = {:?}, v = {:?}", v3(&s0.x), v3(&s0.v)));
    r.line(format!("end   x = {:?}, v = {:?} after arc {travelled}", v3(&s.x), v3(&s.v)));
    r.line(format!("Joachimsthal J₀ = {j0:.15}, max drift {j_drift:.3e}"));
    r.results = json!({
        "great_circle_closure": closure,
        "start": {"x": v3(&s0.x), "v": v3(&s0.v)},
        "end": {"x": v3(&s.x), "v": v3(&s.v)},
        "arc": travelled,
        "joachimsthal": j0,
        "joachimsthal_drift": j_drift,
        "surface_drift": surf_drift,
        "speed_drift": speed_drift,
        "tangency_drift": tangency,
        "reversibility": reversibility,
    });
    if cfg.plot {
        let svg = plot::projections("geodesic", &[("geodesic".into(), path)]);
        r.artifacts.push(plot::write(&cfg.plot_dir(), "geodesics-path.svg", &svg)?);
    }
    Ok(r)
}

// ---------------------------------------------------------------- billiards

#[derive(Debug, Clone, PartialEq)]
pub struct BilliardArgs {
    pub mu: f64,
    pub cap: f64,
    pub grid_starts: usize,
    pub grid_angles: usize,
    pub max_bounces: usize,
}

impl Default for BilliardArgs {
    fn default() -> Self {
        Self {
            mu: 0.05,
            cap: 7.0,
            grid_starts: 200,
            grid_angles: 200,
            max_bounces: 4,
        }
    }
}

fn sampled_path(h: &hemiwidth::ellipsoid::HemiEllipsoid, c: &ClosedTrajectory) -> Vec<[f64; 3]> {
    let t = &c.trajectory;
    let opts = ShotOptions {
        record_path: true,
        ..ShotOptions::default()
    };
    match shoot_billiard(h, t.start_parameter, t.start_angle, t.total_length + 1e-6, t.bounces().max(1), &opts) {
        Ok(shot) => shot.segments.iter().flat_map(|s| s.path.iter().map(v3)).collect(),
        Err(_) => t.reflection_points.iter().map(v3).collect(),
    }
}

pub fn billiards(cfg: &RunConfig, args: &BilliardArgs) -> Result<Report, CliError> {
    if !(args.mu.is_finite() && (0.0..0.5).contains(&args.mu)) {
        return Err(CliError::Input(format!("μ = {} outside [0, 0.5)", args.mu)));
    }
    if !(args.cap.is_finite() && args.cap > 0.0) {
        return Err(CliError::Input("--cap must be positive".into()));
    }
    if args.grid_starts < 2 || args.grid_angles < 2 || args.max_bounces == 0 {
        return Err(CliError::Input("grid needs at least 2×2 cells and one bounce".into()));
    }
    let cal = calibrate_with(args.mu, &CalibrationOptions::default()).map_err(geometry)?;
    let h = cal.hemi();
    let opts = SearchOptions {
        grid: SearchGrid {
            starts: args.grid_starts,
            angles: args.grid_angles,
        },
        length_cap: args.cap,
        max_bounces: args.max_bounces,
        closure_tol: cfg.tol("billiards.closure"),
        classification_tol: cfg.tol("billiards.classification"),
        dedup_tol: cfg.tol("billiards.dedup"),
        grazing_tol: cfg.tol("billiards.grazing"),
        ..SearchOptions::default()
    };
    let out = find_closed_trajectories(&h, &opts).map_err(compute)?;
    let targets = target_lengths(args.mu);
    let labels = [ClassLabel::Gamma1, ClassLabel::Gamma2, ClassLabel::Gamma3];
    let len_tol = cfg.tol("billiards.length");

    let mut r = Report::new(
        "billiards",
        json!({"mu": args.mu, "cap": args.cap, "grid": [args.grid_starts, args.grid_angles], "max_bounces": args.max_bounces}),
    );
    if args.mu == 0.0 {
        let meridians = out.families.iter().filter(|f| f.label == ClassLabel::Gamma1).count();
        r.check(Check::at_least("meridian_family", meridians as f64, 1.0, citation::BILLIARD_RIGIDITY));
    } else {
        let expected = targets.iter().filter(|t| **t <= args.cap).count();
        r.check(Check::equal("class_count", out.isolated.len() as f64, expected as f64, citation::BILLIARD_RIGIDITY));
        let other = out.isolated.iter().filter(|c| c.class.label == ClassLabel::Other).count();
        r.check(Check::equal("unclassified", other as f64, 0.0, citation::BILLIARD_RIGIDITY));
        r.check(Check::equal("families", out.families.len() as f64, 0.0, citation::BILLIARD_RIGIDITY));
        for (i, label) in labels.iter().enumerate() {
            if targets[i] > args.cap {
                continue;
            }
            let found = out.isolated.iter().filter(|c| c.class.label == *label).count();
            r.check(Check::equal(format!("{}.found", label.as_str()), found as f64, 1.0, citation::BILLIARD_RIGIDITY));
        }
    }
    let mut classes = Vec::new();
    let mut curves = Vec::new();
    for c in &out.isolated {
        let t = &c.trajectory;
        let name = c.class.label.as_str();
        if let Some(i) = labels.iter().position(|l| *l == c.class.label) {
            let err = (t.total_length - c.class.cover_count as f64 * targets[i]).abs();
            r.check(Check::at_most(format!("{name}.length"), err, len_tol, citation::BILLIARD_RIGIDITY));
        }
        let doubled = double_trajectory(&h, t).map_err(compute)?;
        let seam = doubled.max_seam_velocity_mismatch.max(doubled.max_seam_position_mismatch);
        r.check(Check::at_most(format!("{name}.seam"), seam, cfg.tol("billiards.seam"), citation::DOUBLING));
        let dl = (doubled.total_length - 2.0 * t.total_length).abs();
        r.check(Check::at_most(format!("{name}.doubled_length"), dl, len_tol, citation::DOUBLING));
        r.line(format!(
            "{name}: length {:.12} ({:?}, {} bounces, closure {:.1e}, deviation {:.1e})",
            t.total_length,
            t.kind,
            t.bounces(),
            t.closure_error,
            c.class.deviation
        ));
        classes.push(json!({
            "label": c.class.label,
            "length": t.total_length,
            "kind": t.kind,
            "cover_count": c.class.cover_count,
            "deviation": c.class.deviation,
            "bounces": t.bounces(),
            "closure_error": t.closure_error,
            "start_parameter": t.start_parameter,
            "start_angle": t.start_angle,
            "doubled_length": doubled.total_length,
            "doubled_multiplicity": doubled.multiplicity,
        }));
        if cfg.plot {
            curves.push((format!("{name} {:.4}", t.total_length), sampled_path(&h, c)));
        }
    }
    for f in &out.families {
        r.line(format!("family {}: length {:.12}, {} members", f.label.as_str(), f.length, f.members));
        if cfg.plot {
            curves.push((format!("{} family", f.label.as_str()), sampled_path(&h, &f.representative)));
        }
    }
    r.line(format!("{} grid cells, {} polished candidates", out.grid_cells, out.polished));
    r.results = json!({
        "principal_lengths": out.principal_lengths,
        "targets": targets,
        "classes": classes,
        "families": out.families.iter().map(|f| json!({"label": f.label, "length": f.length, "members": f.members})).collect::<Vec<_>>(),
        "grid_cells": out.grid_cells,
        "polished": out.polished,
    });
    r.table = Some((
        vec!["label".into(), "length".into(), "cover_count".into(), "deviation".into()],
        out.isolated
            .iter()
            .map(|c| {
                vec![
                    c.class.label.as_str().into(),
                    c.trajectory.total_length.to_string(),
                    c.class.cover_count.to_string(),
                    c.class.deviation.to_string(),
                ]
            })
            .collect(),
    ));
    if cfg.plot && !curves.is_empty() {
        let svg = plot::projections(&format!("closed billiard trajectories, μ = {}", args.mu), &curves);
        r.artifacts.push(plot::write(&cfg.plot_dir(), "billiards-trajectories.svg", &svg)?);
    }
    Ok(r)
}

// ---------------------------------------------------------------- crofton

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CroftonMethod {
    Mc,
    Quadrature,
    All,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PolySource {
    Compact(String),
    File(PathBuf),
    Random { degree: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CroftonArgs {
    pub source: PolySource,
    pub method: CroftonMethod,
    pub samples: usize,
    pub order: usize,
    pub step: f64,
}

pub fn count_options(cfg: &RunConfig) -> CountOptions {
    CountOptions {
        modulus_tol: cfg.tol("crofton.modulus"),
        cluster_tol: cfg.tol("crofton.cluster"),
        ..CountOptions::default()
    }
}

pub fn load_polynomial(source: &PolySource) -> Result<BivariatePolynomial, CliError> {
    match source {
        PolySource::Compact(s) => s.parse().map_err(|e| CliError::Input(format!("--poly: {e}"))),
        PolySource::File(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))
        }
        PolySource::Random { degree, seed } => {
            if *degree == 0 {
                return Err(CliError::Input("--random needs degree at least 1".into()));
            }
            Ok(BivariatePolynomial::random_batch(*degree, 1, *seed).remove(0))
        }
    }
}

/// Traced length, or the reason tracing was not usable.
type Traced = Result<(MassEstimate, Vec<Vec<[f64; 3]>>), String>;

fn traced(f: &BivariatePolynomial, step: f64, singular_tol: f64) -> Result<Traced, CliError> {
    let opts = TraceOptions {
        step,
        singular_tol,
        ..TraceOptions::default()
    };
    match trace_level_set(f, &opts) {
        Ok(t) => Ok(Ok((
            MassEstimate {
                value: t.length,
                standard_error: 0.0,
                sample_count: t.steps,
                method: MassMethod::Traced,
                degenerate_events: 0,
            },
            t.components.iter().map(|c| c.points.iter().map(v3).collect()).collect(),
        ))),
        Err(e @ CroftonError::NearSingular { .. }) => Ok(Err(e.to_string())),
        Err(e) => Err(crofton_err(e)),
    }
}

fn equator_in_zero_set(f: &BivariatePolynomial, opts: &CountOptions) -> Result<bool, CliError> {
    use hemiwidth::crofton::{count_intersections_with, GreatCircle};
    let eq = GreatCircle::from_normal(Vector3::z()).map_err(compute)?;
    match count_intersections_with(f, &eq, opts) {
        Ok(_) => Ok(false),
        Err(CroftonError::CircleInZeroSet) => Ok(true),
        Err(CroftonError::BezoutViolation { .. }) => Ok(false),
        Err(e) => Err(crofton_err(e)),
    }
}

pub fn crofton(cfg: &RunConfig, args: &CroftonArgs) -> Result<Report, CliError> {
    let f = load_polynomial(&args.source)?;
    if f.is_zero() {
        return Err(CliError::Input("polynomial is identically zero".into()));
    }
    if args.samples == 0 || args.order == 0 {
        return Err(CliError::Input("--samples and --order must be positive".into()));
    }
    let deg = f.effective_degree().unwrap_or(0);
    let opts = count_options(cfg);
    let source = match &args.source {
        PolySource::Compact(s) => json!({"poly": s}),
        PolySource::File(p) => json!({"poly_file": p.display().to_string()}),
        PolySource::Random { degree, seed } => json!({"random": degree, "poly_seed": seed}),
    };
    let mut r = Report::new(
        "crofton",
        json!({"source": source, "method": args.method, "samples": args.samples, "order": args.order, "step": args.step}),
    );
    r.line(format!("f = {f}"));
    let mut results = json!({"polynomial": f, "degree": deg});
    if equator_in_zero_set(&f, &opts)? {
        r.note("the equator lies in the zero set; the hemisphere mass counts it with weight ½, which is a convention, not a computed value");
    }
    let mut estimates: Vec<MassEstimate> = Vec::new();
    let run_mc = matches!(args.method, CroftonMethod::Mc | CroftonMethod::All);
    let run_q = matches!(args.method, CroftonMethod::Quadrature | CroftonMethod::All);
    let mc = if run_mc {
        let seed = cfg.stream_seed(STREAM_CROFTON);
        let m = crofton_mass_with(&f, &Sampler::MonteCarlo { samples: args.samples, seed }, &opts).map_err(crofton_err)?;
        r.line(format!("Monte Carlo: {:.9} ± {:.2e} ({} samples)", m.value, m.standard_error, m.sample_count));
        results["monte_carlo"] = json!(m);
        estimates.push(m);
        Some(m)
    } else {
        None
    };
    let quad = if run_q {
        let q = crofton_mass_with(&f, &Sampler::Quadrature { order: args.order }, &opts).map_err(crofton_err)?;
        r.line(format!("quadrature:  {:.9} ({} nodes)", q.value, q.sample_count));
        results["quadrature"] = json!(q);
        estimates.push(q);
        Some(q)
    } else {
        None
    };
    if args.method == CroftonMethod::All {
        match traced(&f, args.step, cfg.tol("crofton.singular"))? {
            Ok((t, comps)) => {
                r.line(format!("traced:      {:.9} ({} components)", t.value, comps.len()));
                results["traced"] = json!(t);
                let q = quad.expect("quadrature ran");
                let rel = (q.value - t.value).abs() / q.value.abs().max(t.value.abs()).max(f64::MIN_POSITIVE);
                let rel = if q.value == 0.0 && t.value == 0.0 { 0.0 } else { rel };
                r.check(Check::at_most("quadrature_vs_traced", rel, cfg.tol("crofton.agreement"), citation::CROFTON));
                if cfg.plot {
                    let svg = plot::disk_traces(&format!("{{f = 0}} for f = {f}"), &comps);
                    r.artifacts.push(plot::write(&cfg.plot_dir(), "crofton-level-set.svg", &svg)?);
                }
                estimates.push(t);
            }
            Err(reason) => {
                r.note(format!("tracing skipped, agreement not checked: {reason}"));
                results["traced"] = Value::Null;
            }
        }
        let (m, q) = (mc.expect("mc ran"), quad.expect("quadrature ran"));
        let gap = (m.value - q.value).abs();
        let allowed = cfg.tol("crofton.standard_errors") * m.standard_error + cfg.tol("crofton.quadrature") * PI;
        r.check(
            Check::at_most("monte_carlo_vs_quadrature", gap, allowed, citation::CROFTON)
                .with_detail(format!("allowed = k·SE + quadrature tolerance·π, SE = {:.3e}", m.standard_error)),
        );
    }
    let top = estimates.iter().map(|e| e.value).fold(0.0f64, f64::max);
    r.check(Check::at_most("bezout_mass_bound", top, PI * deg as f64 * (1.0 + 1e-12), citation::BEZOUT));
    r.results = results;
    Ok(r)
}

/// Sampled Bezout check over random (polynomial, great circle) pairs.
pub fn bezout(cfg: &RunConfig, pairs: usize, max_degree: usize) -> Result<Report, CliError> {
    let seed = cfg.stream_seed(STREAM_BEZOUT);
    let s = bezout_sweep(pairs, max_degree, seed, &count_options(cfg)).map_err(crofton_err)?;
    let mut r = Report::new("bezout", json!({"pairs": pairs, "max_degree": max_degree}));
    r.check(Check::at_least("pairs", s.pairs as f64, pairs as f64, citation::BEZOUT));
    r.check(Check::equal("violations", s.violations as f64, 0.0, citation::BEZOUT));
    r.check(Check::equal("sign_change_route_excess", s.route_conflicts as f64, 0.0, citation::BEZOUT));
    r.line(format!(
        "{} pairs, largest count per degree {:?}, {} violations, {} circles in the zero set",
        s.pairs, s.max_count, s.violations, s.degenerate
    ));
    r.results = json!(s);
    Ok(r)
}

pub struct ClosedForm {
    pub name: &'static str,
    pub poly: &'static str,
    pub exact: f64,
}

pub const CLOSED_FORMS: [ClosedForm; 3] = [
    ClosedForm { name: "x", poly: "1,0=1", exact: PI },
    ClosedForm { name: "circle", poly: "2,0=1;0,2=1;0,0=-0.5", exact: PI * SQRT_2 },
    ClosedForm { name: "xy", poly: "1,1=1", exact: TAU },
];

/// Monte Carlo and quadrature against closed-form lengths.
pub fn closed_forms(cfg: &RunConfig, samples: usize, orders: &[usize]) -> Result<Report, CliError> {
    let opts = count_options(cfg);
    let mut r = Report::new("closed-forms", json!({"samples": samples, "orders": orders}));
    let mut results = serde_json::Map::new();
    for (k, cf) in CLOSED_FORMS.iter().enumerate() {
        let f: BivariatePolynomial = cf.poly.parse().map_err(compute)?;
        let seed = cfg.stream_seed(STREAM_CLOSED_FORMS) ^ k as u64;
        let m = crofton_mass_with(&f, &Sampler::MonteCarlo { samples, seed }, &opts).map_err(crofton_err)?;
        let k_se = cfg.tol("crofton.standard_errors");
        r.check(
            Check::at_most(format!("{}.monte_carlo", cf.name), (m.value - cf.exact).abs(), k_se * m.standard_error, citation::CROFTON)
                .with_detail(format!("estimate {:.9}, SE {:.3e}, exact {:.9}", m.value, m.standard_error, cf.exact)),
        );
        let mut qs = Vec::new();
        for &order in orders {
            let q = crofton_mass_with(&f, &Sampler::Quadrature { order }, &opts).map_err(crofton_err)?;
            r.check(Check::at_most(
                format!("{}.quadrature_{order}", cf.name),
                (q.value - cf.exact).abs(),
                cfg.tol("crofton.quadrature") * PI,
                citation::CROFTON,
            ));
            qs.push(json!({"order": order, "value": q.value}));
        }
        r.line(format!(
            "{} (f = {f}): exact {:.9}, Monte Carlo {:.9} ± {:.1e}, quadrature {}",
            cf.name,
            cf.exact,
            m.value,
            m.standard_error,
            qs.iter().map(|q| format!("{:.9}", q["value"].as_f64().unwrap_or(f64::NAN))).collect::<Vec<_>>().join(" / ")
        ));
        results.insert(cf.name.into(), json!({"exact": cf.exact, "monte_carlo": m, "quadrature": qs}));
    }
    r.results = Value::Object(results);
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleRow {
    pub index: usize,
    pub quadrature: f64,
    pub traced: Option<f64>,
    pub relative_gap: Option<f64>,
    pub flag: Option<String>,
}

/// Quadrature mass and traced length for `count` random unit polynomials.
pub fn mutual_oracle_batch(
    d: usize,
    count: usize,
    seed: u64,
    order: usize,
    step: f64,
    singular_tol: f64,
    opts: &CountOptions,
) -> Result<Vec<OracleRow>, CliError> {
    let polys = BivariatePolynomial::random_batch(d, count, seed);
    let mut rows = Vec::with_capacity(count);
    for (index, f) in polys.iter().enumerate() {
        let q = crofton_mass_with(f, &Sampler::Quadrature { order }, opts).map_err(crofton_err)?.value;
        let row = match traced(f, step, singular_tol)? {
            Ok((t, _)) => {
                let gap = if q == 0.0 && t.value == 0.0 {
                    0.0
                } else {
                    (q - t.value).abs() / q.abs().max(t.value.abs())
                };
                OracleRow {
                    index,
                    quadrature: q,
                    traced: Some(t.value),
                    relative_gap: Some(gap),
                    flag: None,
                }
            }
            Err(reason) => OracleRow {
                index,
                quadrature: q,
                traced: None,
                relative_gap: None,
                flag: Some(reason),
            },
        };
        rows.push(row);
    }
    Ok(rows)
}

pub const ORACLE_ORDER: usize = 150;
pub const ORACLE_STEP: f64 = 0.01;
pub const ORACLE_MAX_FLAGGED: usize = 2;

pub fn mutual_oracle(cfg: &RunConfig, d: usize, count: usize) -> Result<Report, CliError> {
    let seed = cfg.stream_seed(STREAM_ORACLE + d as u64);
    let rows = mutual_oracle_batch(
        d,
        count,
        seed,
        ORACLE_ORDER,
        ORACLE_STEP,
        cfg.tol("crofton.singular"),
        &count_options(cfg),
    )?;
    let mut r = Report::new("mutual-oracle", json!({"d": d, "count": count, "order": ORACLE_ORDER, "step": ORACLE_STEP}));
    let worst = rows.iter().filter_map(|x| x.relative_gap).fold(0.0f64, f64::max);
    let flagged: Vec<&OracleRow> = rows.iter().filter(|x| x.flag.is_some()).collect();
    r.check(Check::at_most("max_relative_gap", worst, cfg.tol("crofton.agreement"), citation::CROFTON));
    r.check(Check::at_most("flagged", flagged.len() as f64, ORACLE_MAX_FLAGGED as f64, citation::CROFTON));
    for f in &flagged {
        r.note(format!(
            "d = {d}, polynomial {} excluded: {}",
            f.index,
            f.flag.as_deref().unwrap_or_default()
        ));
    }
    r.line(format!(
        "d = {d}: {count} polynomials, worst relative gap {worst:.3e}, {} flagged",
        flagged.len()
    ));
    r.results = json!({"worst_relative_gap": worst, "flagged": flagged.len(), "rows": rows});
    Ok(r)
}

// ---------------------------------------------------------------- sweepout

pub fn sup_budget(cfg: &RunConfig, d: usize) -> SupBudget {
    SupBudget {
        seed: cfg.stream_seed(STREAM_SWEEPOUT + d as u64),
        ..SupBudget::default()
    }
}

/// Sampled supremum of the level-set mass over the degree-`d` family.
/// `attain` adds the lower check `sup ≥ πd − attain tolerance`.
pub fn sweepout_sup(cfg: &RunConfig, d: usize, budget: &SupBudget, attain: bool) -> Result<Report, CliError> {
    if d == 0 {
        return Err(CliError::Input("--d must be at least 1".into()));
    }
    if budget.samples == 0 && budget.start.is_none() {
        return Err(CliError::Input("--samples must be positive".into()));
    }
    let rep = verify_upper_bound_chain(d, budget, cfg.tol("sweepout.bound")).map_err(crofton_err)?;
    let bound = PI * d as f64;
    let mut r = Report::new(
        "sweepout-sup",
        json!({"d": d, "samples": budget.samples, "refine_steps": budget.refine_steps, "top_k": budget.top_k}),
    );
    let idx_bad = rep
        .degree_checks
        .iter()
        .filter(|c| !(c.degree_index == d as u64 && c.width.pi_coeff() == d as u64 && c.width.mu_coeff() == 0))
        .count();
    r.check(Check::equal("degree_index_range", idx_bad as f64, 0.0, citation::DEGREE_INDEX));
    r.check(Check::at_most("sup_below_bound", rep.sup.estimate, bound + cfg.tol("sweepout.bound"), citation::SWEEPOUT_BOUND));
    if attain {
        r.check(Check::at_least(
            "sup_reaches_bound",
            rep.sup.estimate,
            bound - cfg.tol("sweepout.attain"),
            citation::SWEEPOUT_BOUND,
        ));
    }
    r.line(format!(
        "d = {d}: sampled sup {:.9}, π·d = {bound:.9}, p = {}..{} all have f(p) = {d}",
        rep.sup.estimate, rep.p_range.0, rep.p_range.1
    ));
    r.line(format!("argmax f = {}", rep.sup.argmax));
    r.results = json!({
        "estimate": rep.sup.estimate,
        "bound": bound,
        "gap": rep.gap,
        "argmax": rep.sup.argmax,
        "p_range": rep.p_range,
        "screened": rep.sup.screened,
        "evaluations": rep.sup.evaluations,
    });
    Ok(r)
}

// ---------------------------------------------------------------- verify-all

pub const CALIBRATION_MUS: [f64; 4] = [0.01, 0.05, 0.1, 0.2];

pub fn verify_all(cfg: &RunConfig, d_max: usize, quick: bool) -> Result<Report, CliError> {
    let mut r = Report::new("verify-all", json!({"d_max": d_max, "quick": quick, "seed": cfg.seed, "tolerances": cfg.tolerances.overridden()}));
    let p_max = if quick { 10_000 } else { 1_000_000 };
    let quiet = RunConfig { plot: false, ..cfg.clone() };
    for s in [Surface::Hemisphere, Surface::Sphere, Surface::Rp2] {
        r.absorb(&format!("spectrum.{}", s.name()), spectrum(&quiet, p_max, s, false)?);
    }
    r.absorb("reference_values", reference_values()?);
    for d in 0..=20 {
        r.absorb(&format!("counting.d{d}"), counting(&quiet, d, false)?);
    }
    if d_max == 0 {
        return Ok(r);
    }

    r.absorb("calibrate.mu0", calibrate(&quiet, 0.0)?);
    for mu in CALIBRATION_MUS {
        r.absorb(&format!("calibrate.mu{mu}"), calibrate(&quiet, mu)?);
    }
    r.absorb("geodesics", geodesics(&quiet, &GeodesicArgs::default())?);
    r.absorb("billiards", billiards(&quiet, &BilliardArgs::default())?);

    let pairs = if quick { 100_000 } else { 1_000_000 };
    r.absorb("bezout", bezout(&quiet, pairs, 4)?);
    r.absorb("closed_forms", closed_forms(&quiet, 100_000, &[35, 60])?);
    let oracle_count = if quick { 10 } else { 50 };
    for d in 1..=d_max.min(3) {
        r.absorb(&format!("mutual_oracle.d{d}"), mutual_oracle(&quiet, d, oracle_count)?);
    }
    for d in 1..=d_max {
        let mut budget = sup_budget(cfg, d);
        if quick || d > 2 {
            budget.samples = 200;
            budget.refine_steps = 200;
            budget.top_k = 2;
            budget.final_order = 60;
        }
        let attain = d <= 2 && !quick;
        r.absorb(&format!("sweepout.d{d}"), sweepout_sup(&quiet, d, &budget, attain)?);
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> RunConfig {
        RunConfig::default()
    }

    #[test]
    fn step_scan_matches_formulas() {
        for s in [Surface::Hemisphere, Surface::Sphere, Surface::Rp2] {
            let mut scan = StepScan::new(s);
            for p in 1..5000 {
                assert_eq!(scan.at(p), s.width(p).unwrap().pi_coeff(), "{s:?} p = {p}");
            }
        }
    }

    #[test]
    fn spectrum_lists_hemisphere_values() {
        let r = spectrum(&cfg(), 5, Surface::Hemisphere, true).unwrap();
        assert!(r.passed());
        let w: Vec<u64> = r.results["widths"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v["pi_coeff"].as_u64().unwrap())
            .collect();
        assert_eq!(w, vec![1, 1, 2, 2, 2]);
        assert_eq!(r.text[2], "ω_3 = 2π");
        assert!(spectrum(&cfg(), 0, Surface::Sphere, true).is_err());
    }

    #[test]
    fn reference_values_pass() {
        assert!(reference_values().unwrap().passed());
    }

    #[test]
    fn counting_small_degrees() {
        let r = counting(&cfg(), 1, true).unwrap();
        assert!(r.passed());
        assert_eq!(r.results["value_count"], 5);
        assert_eq!(counting(&cfg(), 0, false).unwrap().results["value_count"], 2);
        assert_eq!(counting(&cfg(), 4, false).unwrap().results["value_count"], 20);
    }

    #[test]
    fn trapezoid_matches_circle() {
        assert!((trapezoid_circumference(1.0, 1.0) - TAU).abs() < 1e-12);
    }

    #[test]
    fn calibrate_checks() {
        let r = calibrate(&cfg(), 0.1).unwrap();
        assert!(r.passed(), "{:?}", r.checks);
        let r0 = calibrate(&cfg(), 0.0).unwrap();
        assert!(r0.passed());
        assert_eq!(r0.results["coefficients"], json!([1.0, 1.0, 1.0]));
        assert!(matches!(calibrate(&cfg(), 0.6), Err(CliError::Input(_))));
    }

    #[test]
    fn geodesic_checks_pass() {
        let r = geodesics(&cfg(), &GeodesicArgs::default()).unwrap();
        assert!(r.passed(), "{:?}", r.checks);
        let bad = GeodesicArgs {
            direction: Some([0.6, 0.5, 0.62]),
            start: Some([0.6, 0.5, 0.62]),
            coeffs: [1.0, 1.0, 1.0],
            ..GeodesicArgs::default()
        };
        assert!(matches!(geodesics(&cfg(), &bad), Err(CliError::Input(_))));
    }

    #[test]
    fn small_billiard_search() {
        let args = BilliardArgs {
            cap: 3.17,
            grid_starts: 24,
            grid_angles: 24,
            ..BilliardArgs::default()
        };
        let r = billiards(&cfg(), &args).unwrap();
        assert!(r.passed(), "{:?}", r.checks);
        assert_eq!(r.results["classes"].as_array().unwrap().len(), 1);
    }

    #[test]
    fn crofton_on_x() {
        let args = CroftonArgs {
            source: PolySource::Compact("1,0=1".into()),
            method: CroftonMethod::All,
            samples: 2000,
            order: 40,
            step: 0.01,
        };
        let r = crofton(&cfg(), &args).unwrap();
        assert!(r.passed(), "{:?}", r.checks);
        assert!((r.results["quadrature"]["value"].as_f64().unwrap() - PI).abs() < 1e-12);
    }

    #[test]
    fn crofton_flags_singular_level_set() {
        let args = CroftonArgs {
            source: PolySource::Compact("1,1=1".into()),
            method: CroftonMethod::All,
            samples: 1000,
            order: 40,
            step: 0.01,
        };
        let r = crofton(&cfg(), &args).unwrap();
        assert!(r.notes.iter().any(|n| n.contains("tracing skipped")));
        assert!(!r.provenance.contains_key("quadrature_vs_traced"));
    }

    #[test]
    fn crofton_notes_equator_in_zero_set() {
        let args = CroftonArgs {
            source: PolySource::Compact("2,0=1;0,2=1;0,0=-1".into()),
            method: CroftonMethod::Quadrature,
            samples: 10,
            order: 20,
            step: 0.01,
        };
        let r = crofton(&cfg(), &args).unwrap();
        assert!(r.notes.iter().any(|n| n.contains("equator")));
    }

    #[test]
    fn bad_polynomials_are_input_errors() {
        for s in ["", "1,0", "0,0=0"] {
            let args = CroftonArgs {
                source: PolySource::Compact(s.into()),
                method: CroftonMethod::Quadrature,
                samples: 10,
                order: 10,
                step: 0.01,
            };
            assert!(matches!(crofton(&cfg(), &args), Err(CliError::Input(_))), "{s:?}");
        }
    }

    #[test]
    fn small_oracle_batch() {
        let rows = mutual_oracle_batch(2, 3, 7, 60, 0.01, 1e-6, &CountOptions::default()).unwrap();
        assert_eq!(rows.len(), 3);
        for row in rows {
            if let Some(g) = row.relative_gap {
                assert!(g < 5e-3, "{row:?}");
            }
        }
    }

    #[test]
    fn verify_all_degree_zero_is_spectrum_and_counting() {
        let r = verify_all(&cfg(), 0, true).unwrap();
        assert!(r.passed());
        assert!(r.checks.iter().all(|c| {
            c.name.starts_with("spectrum.") || c.name.starts_with("counting.") || c.name.starts_with("reference_values.")
        }));
    }
}
