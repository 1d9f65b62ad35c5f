//! Polynomial roots as eigenvalues of the companion matrix.
//!
//! The companion matrix is already upper Hessenberg, so the eigenvalues come
//! from single-shift complex QR sweeps with Givens rotations and Wilkinson
//! shifts. No eigenvectors are needed, so each sweep only touches the active
//! block. Degrees here are small (`≤ 2d`), and this is much cheaper than a
//! general Schur decomposition.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RootError {
    #[error("polynomial is identically zero")]
    ZeroPolynomial,
    #[error("QR iteration did not converge after {0} sweeps")]
    NoConvergence(usize),
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const MAX_SWEEPS_PER_ROOT: usize = 60;

/// Eigenvalues of the upper Hessenberg matrix `h` (row-major `n × n`),
/// destroying `h`.
pub fn hessenberg_eigenvalues(h: &mut [Complex64], n: usize) -> Result<Vec<Complex64>, RootError> {
    debug_assert_eq!(h.len(), n * n);
    let at = |r: usize, c: usize| r * n + c;
    let mut eig = vec![ZERO; n];
    if n == 0 {
        return Ok(eig);
    }
    let mut hi = n - 1;
    let mut iter = 0usize;
    let mut total = 0usize;
    let mut rot = vec![(ZERO, ZERO); n];
    while hi > 0 {
        let mut l = hi;
        while l > 0 {
            let s = h[at(l - 1, l - 1)].norm() + h[at(l, l)].norm();
            let s = if s == 0.0 { 1.0 } else { s };
            if h[at(l, l - 1)].norm() <= f64::EPSILON * s {
                h[at(l, l - 1)] = ZERO;
                break;
            }
            l -= 1;
        }
        if l == hi {
            eig[hi] = h[at(hi, hi)];
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        total += 1;
        if total > MAX_SWEEPS_PER_ROOT * n {
            return Err(RootError::NoConvergence(total));
        }
        let shift = if iter % 11 == 10 {
            // exceptional shift to break cycles
            h[at(hi, hi)] + Complex64::new(h[at(hi, hi - 1)].norm(), 0.0) * 0.75
        } else {
            let a = h[at(hi - 1, hi - 1)];
            let b = h[at(hi - 1, hi)];
            let c = h[at(hi, hi - 1)];
            let d = h[at(hi, hi)];
            let half = (a - d) * 0.5;
            let disc = (half * half + b * c).sqrt();
            let m1 = (a + d) * 0.5 + disc;
            let m2 = (a + d) * 0.5 - disc;
            if (m1 - d).norm() < (m2 - d).norm() {
                m1
            } else {
                m2
            }
        };
        for k in l..=hi {
            h[at(k, k)] -= shift;
        }
        // H − μI = QR, left rotations
        for k in l..hi {
            let x = h[at(k, k)];
            let y = h[at(k + 1, k)];
            let r = x.norm().hypot(y.norm());
            let (c, s) = if r == 0.0 {
                (Complex64::new(1.0, 0.0), ZERO)
            } else {
                (x / r, y / r)
            };
            rot[k] = (c, s);
            for j in k..=hi {
                let (p, q) = (h[at(k, j)], h[at(k + 1, j)]);
                h[at(k, j)] = c.conj() * p + s.conj() * q;
                h[at(k + 1, j)] = -s * p + c * q;
            }
        }
        // RQ, right rotations
        for k in l..hi {
            let (c, s) = rot[k];
            for i in l..=(k + 1).min(hi) {
                let (p, q) = (h[at(i, k)], h[at(i, k + 1)]);
                h[at(i, k)] = p * c + q * s;
                h[at(i, k + 1)] = -p * s.conj() + q * c.conj();
            }
        }
        for k in l..=hi {
            h[at(k, k)] += shift;
        }
    }
    eig[0] = h[at(0, 0)];
    Ok(eig)
}

/// Roots of `Σ coeffs[k] z^k`. Leading coefficients that are zero relative
/// to `trim_tol · max|c|` are dropped; roots at the origin from vanishing
/// low-order coefficients are returned as exact zeros.
pub fn polynomial_roots(coeffs: &[Complex64], trim_tol: f64) -> Result<Vec<Complex64>, RootError> {
    let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(RootError::ZeroPolynomial);
    }
    let small = |c: &Complex64| c.norm() <= trim_tol * scale;
    let top = coeffs.iter().rposition(|c| !small(c)).expect("nonzero scale");
    let low = coeffs.iter().position(|c| *c != ZERO).expect("nonzero scale");
    let mut roots = vec![ZERO; low];
    let p = &coeffs[low..=top];
    let n = p.len() - 1;
    if n == 0 {
        return Ok(roots);
    }
    let lead = p[n];
    let mut h = vec![ZERO; n * n];
    for j in 0..n {
        h[j] = -p[n - 1 - j] / lead;
    }
    for i in 1..n {
        h[i * n + i - 1] = Complex64::new(1.0, 0.0);
    }
    let eig = hessenberg_eigenvalues(&mut h, n)?;
    roots.extend(eig.into_iter().map(|z| newton_polish(p, z)));
    Ok(roots)
}

fn horner(p: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut v = ZERO;
    let mut dv = ZERO;
    for c in p.iter().rev() {
        dv = dv * z + v;
        v = v * z + c;
    }
    (v, dv)
}

/// Two Newton steps, kept only if they reduce the residual.
fn newton_polish(p: &[Complex64], mut z: Complex64) -> Complex64 {
    for _ in 0..2 {
        let (v, dv) = horner(p, z);
        if dv.norm() == 0.0 {
            break;
        }
        let cand = z - v / dv;
        if horner(p, cand).0.norm() < v.norm() {
            z = cand;
        } else {
            break;
        }
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn from_roots(roots: &[Complex64]) -> Vec<Complex64> {
        let mut p = vec![c(1.0, 0.0)];
        for r in roots {
            let mut next = vec![ZERO; p.len() + 1];
            for (k, a) in p.iter().enumerate() {
                next[k + 1] += a;
                next[k] -= a * r;
            }
            p = next;
        }
        p
    }

    fn matched(mut a: Vec<Complex64>, b: &[Complex64], tol: f64) -> bool {
        b.iter().all(|z| {
            match a
                .iter()
                .enumerate()
                .min_by(|x, y| (x.1 - z).norm().total_cmp(&(y.1 - z).norm()))
            {
                Some((i, w)) if (w - z).norm() <= tol => {
                    a.swap_remove(i);
                    true
                }
                _ => false,
            }
        }) && a.is_empty()
    }

    #[test]
    fn known_roots() {
        let want = [c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 2.0), c(0.5, -0.25)];
        let got = polynomial_roots(&from_roots(&want), 1e-14).unwrap();
        assert!(matched(got, &want, 1e-12));
        // z⁴ − 1 with leading zeros padded and a root at 0
        let p = [ZERO, c(-1.0, 0.0), ZERO, ZERO, ZERO, c(1.0, 0.0), ZERO, ZERO];
        let got = polynomial_roots(&p, 1e-14).unwrap();
        let want = [ZERO, c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 1.0), c(0.0, -1.0)];
        assert!(matched(got, &want, 1e-13));
        assert_eq!(polynomial_roots(&[ZERO, ZERO], 1e-14), Err(RootError::ZeroPolynomial));
        assert!(polynomial_roots(&[c(3.0, 0.0)], 1e-14).unwrap().is_empty());
    }

    #[test]
    fn unit_circle_roots_of_self_inversive_polynomial() {
        // sin 2t · z² scaled: roots at the 4th roots of unity
        let p = [c(0.0, 0.25), ZERO, ZERO, ZERO, c(0.0, -0.25)];
        let got = polynomial_roots(&p, 1e-14).unwrap();
        for z in &got {
            assert!((z.norm() - 1.0).abs() < 1e-14);
        }
        assert_eq!(got.len(), 4);
    }

    #[test]
    fn agrees_with_schur_decomposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=12 {
            for _ in 0..20 {
                let p: Vec<Complex64> = (0..=n)
                    .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                    .collect();
                let got = polynomial_roots(&p, 0.0).unwrap();
                let lead = p[n];
                let comp = DMatrix::from_fn(n, n, |i, j| {
                    if i == 0 {
                        -p[n - 1 - j] / lead
                    } else if i == j + 1 {
                        c(1.0, 0.0)
                    } else {
                        ZERO
                    }
                });
                let oracle: Vec<Complex64> = comp.schur().eigenvalues().unwrap().iter().copied().collect();
                let scale = oracle.iter().map(|z| z.norm()).fold(1.0, f64::max);
                assert!(matched(got, &oracle, 1e-7 * scale), "n = {n}");
            }
        }
    }

    proptest! {
        #[test]
        fn residuals_are_small(seed in 0u64..2000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 1 + (seed % 16) as usize;
            let p: Vec<Complex64> = (0..=n)
                .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let roots = polynomial_roots(&p, 0.0).unwrap();
            prop_assert_eq!(roots.len(), n);
            for z in roots {
                let (v, _) = horner(&p, z);
                let bound: f64 = p.iter().enumerate().map(|(k, a)| a.norm() * z.norm().powi(k as i32)).sum();
                prop_assert!(v.norm() <= 1e-10 * bound);
            }
        }
    }
}
