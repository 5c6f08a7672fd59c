//! Spectral flow of the Hermitian family `p(sigma)` along the critical
//! line, per critical root and total: the net count of eigenvalue branches
//! crossing zero upward.
//!
//! The flow across a root is computed from two endpoint spectra: eigenvalues
//! of `p(sigma0 +- delta)` inside a window `(0, eps0)` that separates the
//! branches vanishing at the root from the rest of the spectrum. The window
//! is validated by sampling the eigenvalue magnitudes across the whole
//! interval; no branch may enter the guard band around `eps0`.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::numerics::{self, Tolerances};
use crate::pencil::PencilSpec;
use crate::roots::{boundary_spectrum, Band};

/// Spectral flow at one critical root, with the window data used.
#[derive(Debug, Clone)]
pub struct FlowResult {
    pub sigma0: C64,
    /// Half-width of the interval on the critical line.
    pub delta: f64,
    /// Spectral window separating vanishing branches from the rest.
    pub eps0: f64,
    pub sf: i64,
}

/// Spectral flow of `p` across the critical root `sigma0`.
///
/// `other_roots` are the remaining roots of the pencil (any band); the
/// interval half-width keeps clear of them and is capped at `0.1`.
pub fn sf_at_root(
    p: &PencilSpec,
    sigma0: C64,
    other_roots: &[C64],
    tol: &Tolerances,
) -> Result<FlowResult> {
    if (sigma0.im - p.critical_im()).abs() > 1e-9 {
        return Err(Error::NotCritical(sigma0));
    }
    let nearest = other_roots
        .iter()
        .map(|z| (z - sigma0).norm())
        .filter(|d| *d > 1e-12)
        .fold(f64::INFINITY, f64::min);
    let mut delta = (nearest / 2.0).min(0.1);
    let n_small = {
        let eigs = line_eigenvalues(p, sigma0, 0.0);
        let radius = eigs.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        let cut = tol.zero_eig_abs * radius.max(1.0);
        eigs.iter().filter(|l| l.abs() <= cut).count()
    };
    if n_small == 0 {
        return Err(Error::InvariantMismatch(format!(
            "{sigma0} is not singular for the pencil; no flow to compute"
        )));
    }

    // find a window level eps0 with a clear gap between the n_small
    // vanishing branches and the remaining spectrum at both endpoints
    let mut eps0 = f64::NAN;
    for _ in 0..8 {
        match window_level(p, sigma0, delta, n_small) {
            Some(level) => {
                eps0 = level;
                break;
            }
            None => delta /= 2.0,
        }
    }
    if eps0.is_nan() {
        return Err(Error::AmbiguousWindow { sigma0 });
    }

    // sampling check with one delta-halving retry
    if !band_clear(p, sigma0, delta, eps0) {
        delta /= 2.0;
        eps0 = window_level(p, sigma0, delta, n_small)
            .ok_or(Error::AmbiguousWindow { sigma0 })?;
        if !band_clear(p, sigma0, delta, eps0) {
            return Err(Error::AmbiguousWindow { sigma0 });
        }
    }

    let count = |t: f64| -> i64 {
        line_eigenvalues(p, sigma0, t)
            .iter()
            .filter(|&&l| l > 0.0 && l < eps0)
            .count() as i64
    };
    let sf = count(delta) - count(-delta);
    Ok(FlowResult {
        sigma0,
        delta,
        eps0,
        sf,
    })
}

/// Sum of the flows over all critical roots of the pencil.
pub fn sf_total(p: &PencilSpec, tol: &Tolerances, window: Option<f64>) -> Result<i64> {
    Ok(sf_results(p, tol, window)?.iter().map(|r| r.sf).sum())
}

/// Per-root flow results over all critical roots.
pub fn sf_results(
    p: &PencilSpec,
    tol: &Tolerances,
    window: Option<f64>,
) -> Result<Vec<FlowResult>> {
    let roots = boundary_spectrum(p, tol, window)?;
    let positions: Vec<C64> = roots.iter().map(|r| r.sigma0).collect();
    roots
        .iter()
        .filter(|r| r.band == Band::Critical)
        .map(|r| {
            let others: Vec<C64> = positions
                .iter()
                .cloned()
                .filter(|z| (z - r.sigma0).norm() > 1e-12)
                .collect();
            sf_at_root(p, r.sigma0, &others, tol)
        })
        .collect()
}

/// Eigenvalues of the Hermitian matrix `p(sigma0 + t)` for real `t`.
fn line_eigenvalues(p: &PencilSpec, sigma0: C64, t: f64) -> Vec<f64> {
    numerics::hermitian_eigenvalues(&p.evaluate(sigma0 + C64::new(t, 0.0)))
}

/// Geometric-mean level between the `n_small` smallest magnitudes and the
/// rest, demanding a factor-4 gap at both endpoints; `None` when the gap is
/// not clean.
fn window_level(p: &PencilSpec, sigma0: C64, delta: f64, n_small: usize) -> Option<f64> {
    let mut max_small = 0.0f64;
    let mut min_large = f64::INFINITY;
    for &t in &[delta, -delta] {
        let mut mags: Vec<f64> = line_eigenvalues(p, sigma0, t)
            .iter()
            .map(|l| l.abs())
            .collect();
        mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if mags.len() < n_small || mags[n_small - 1] == 0.0 {
            return None;
        }
        max_small = max_small.max(mags[n_small - 1]);
        if mags.len() > n_small {
            min_large = min_large.min(mags[n_small]);
        }
    }
    if min_large.is_infinite() {
        return Some(2.0 * max_small);
    }
    if min_large / max_small < 4.0 {
        return None;
    }
    Some((max_small * min_large).sqrt())
}

/// No eigenvalue magnitude may enter the guard band
/// `(0.9 eps0, 1.1 eps0)` on the sampled interval.
fn band_clear(p: &PencilSpec, sigma0: C64, delta: f64, eps0: f64) -> bool {
    const SAMPLES: usize = 65;
    for k in 0..SAMPLES {
        let t = -delta + 2.0 * delta * k as f64 / (SAMPLES - 1) as f64;
        for l in line_eigenvalues(p, sigma0, t) {
            let mag = l.abs();
            if mag > 0.9 * eps0 && mag < 1.1 * eps0 {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::CMatrix;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn scalar_pencil(m: u32, coeffs: &[C64]) -> PencilSpec {
        PencilSpec::new(
            m,
            coeffs
                .iter()
                .map(|&z| CMatrix::from_element(1, 1, z))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn upward_crossing() {
        let p = scalar_pencil(2, &[c(0., 1.), c(1., 0.)]);
        let tol = Tolerances::default();
        let r = sf_at_root(&p, c(0., -1.), &[], &tol).unwrap();
        assert_eq!(r.sf, 1);
        assert!(r.delta > 0.0 && r.eps0 > 0.0);
    }

    #[test]
    fn tangential_crossing_is_zero() {
        let p = scalar_pencil(2, &[c(-1., 0.), c(0., 2.), c(1., 0.)]);
        let tol = Tolerances::default();
        let r = sf_at_root(&p, c(0., -1.), &[], &tol).unwrap();
        assert_eq!(r.sf, 0);
    }

    #[test]
    fn downward_crossing() {
        let p = scalar_pencil(2, &[c(0., -1.), c(-1., 0.)]);
        let tol = Tolerances::default();
        let r = sf_at_root(&p, c(0., -1.), &[], &tol).unwrap();
        assert_eq!(r.sf, -1);
    }

    #[test]
    fn total_flow_cancels_for_opposite_pair() {
        // diag(sigma + i, -(sigma + i)) with m = 2
        let z = c(0., 0.);
        let a0 = CMatrix::from_row_slice(2, 2, &[c(0., 1.), z, z, c(0., -1.)]);
        let a1 = CMatrix::from_row_slice(2, 2, &[c(1., 0.), z, z, c(-1., 0.)]);
        let p = PencilSpec::new(2, vec![a0, a1]).unwrap();
        let tol = Tolerances::default();
        assert!(p.check_symmetry(&tol));
        assert_eq!(sf_total(&p, &tol, None).unwrap(), 0);
    }

    #[test]
    fn total_flow_adds_for_cubic_pair() {
        // diag(sigma + i, (sigma + i)^3) with m = 2: flows 1 and 1
        let z = c(0., 0.);
        let a0 = CMatrix::from_row_slice(2, 2, &[c(0., 1.), z, z, c(0., -1.)]);
        let a1 = CMatrix::from_row_slice(2, 2, &[c(1., 0.), z, z, c(-3., 0.)]);
        let a2 = CMatrix::from_row_slice(2, 2, &[z, z, z, c(0., 3.)]);
        let a3 = CMatrix::from_row_slice(2, 2, &[z, z, z, c(1., 0.)]);
        let p = PencilSpec::new(2, vec![a0, a1, a2, a3]).unwrap();
        let tol = Tolerances::default();
        assert!(p.check_symmetry(&tol));
        assert_eq!(sf_total(&p, &tol, None).unwrap(), 2);
    }

    #[test]
    fn no_critical_roots_means_zero_total() {
        let s0 = c(0., -0.5);
        let s0s = crate::pencil::star(s0, 2);
        let p = scalar_pencil(2, &[s0 * s0s, -(s0 + s0s), c(1., 0.)]);
        let tol = Tolerances::default();
        assert_eq!(sf_total(&p, &tol, None).unwrap(), 0);
    }

    #[test]
    fn flow_bounded_by_dimension() {
        let p = scalar_pencil(2, &[c(0., 1.), c(1., 0.)]);
        let tol = Tolerances::default();
        let r = sf_at_root(&p, c(0., -1.), &[], &tol).unwrap();
        assert!(r.sf.unsigned_abs() as usize <= p.dim());
    }

    #[test]
    fn noncritical_point_rejected() {
        let p = scalar_pencil(2, &[c(0., 1.), c(1., 0.)]);
        let tol = Tolerances::default();
        assert!(matches!(
            sf_at_root(&p, c(0., -0.5), &[], &tol),
            Err(Error::NotCritical(_))
        ));
    }
}
