//! Calibration feeding the billiard search, and the sweepout chain feeding
//! the width formula.

use std::f64::consts::PI;

use hemiwidth::billiards::{double_trajectory, find_closed_trajectories, ClassLabel, SearchGrid, SearchOptions};
use hemiwidth::crofton::{crofton_mass, Sampler};
use hemiwidth::ellipsoid::{calibrate, principal_curve_lengths, target_lengths};
use hemiwidth::level_set::trace_level_set_length;
use hemiwidth::polynomial::BivariatePolynomial;
use hemiwidth::widths::{degree_index, hemisphere_width};

#[test]
fn calibrated_surface_has_three_rigid_classes() {
    let mu = 0.1;
    let cal = calibrate(mu).unwrap();
    let h = cal.hemi();
    let targets = target_lengths(mu);
    let lengths = principal_curve_lengths(&h);
    for i in 0..3 {
        assert!((lengths[i] - targets[i]).abs() < 1e-8);
    }
    let opts = SearchOptions {
        grid: SearchGrid { starts: 48, angles: 48 },
        ..SearchOptions::default()
    };
    let out = find_closed_trajectories(&h, &opts).unwrap();
    assert_eq!(out.labels(), vec![ClassLabel::Gamma1, ClassLabel::Gamma2, ClassLabel::Gamma3]);
    assert!(out.families.is_empty());
    for c in &out.isolated {
        let i = match c.class.label {
            ClassLabel::Gamma1 => 0,
            ClassLabel::Gamma2 => 1,
            _ => 2,
        };
        assert!((c.trajectory.total_length - targets[i]).abs() < 1e-5);
        let dbl = double_trajectory(&h, &c.trajectory).unwrap();
        assert!(dbl.max_seam_velocity_mismatch < 1e-6);
        assert!((dbl.total_length - 2.0 * c.trajectory.total_length).abs() < 1e-9);
    }
}

#[test]
fn products_of_linear_forms_reach_the_degree_bound() {
    // x·(x − y)·y vanishes on three great half-circles: mass 3π = π·f(p) for
    // every p with f(p) = 3
    let f: BivariatePolynomial = "2,1=1;1,2=-1".parse().unwrap();
    let q = crofton_mass(&f, &Sampler::Quadrature { order: 60 }).unwrap().value;
    assert!((q - 3.0 * PI).abs() < 1e-3 * PI, "{q}");
    for p in 6..=9 {
        assert_eq!(degree_index(p).unwrap(), 3);
        assert_eq!(hemisphere_width(p).unwrap().pi_coeff(), 3);
    }
}

#[test]
fn quadrature_and_tracing_agree_on_a_quartic() {
    let (f, q) = (0..)
        .map(|seed| BivariatePolynomial::random_batch(4, 1, seed).remove(0))
        .map(|f| {
            let q = crofton_mass(&f, &Sampler::Quadrature { order: 150 }).unwrap().value;
            (f, q)
        })
        .find(|(_, q)| *q > 1.0)
        .unwrap();
    let t = trace_level_set_length(&f, 0.01).unwrap().value;
    assert!((q - t).abs() / q < 5e-3, "{q} vs {t}");
    assert!(q <= 4.0 * PI);
}
