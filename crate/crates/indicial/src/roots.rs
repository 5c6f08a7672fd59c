//! Boundary spectrum of a pencil: all roots of `det p(sigma)` in a window
//! around the strip `-m <= Im(sigma) <= 0`, with algebraic multiplicities,
//! band classification, and star-partner matching.
//!
//! Roots are found by companion linearization of the matrix polynomial,
//! solved as a shift-inverted standard eigenproblem so that a singular
//! leading coefficient only produces discarded infinite eigenvalues.
//! Eigenvalue clusters are merged and then refined to near machine
//! precision by Newton iteration on the `(k-1)`-st derivative of the local
//! determinant polynomial, for which a multiple root of order `k` is
//! simple.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{CMatrix, Tolerances};
use crate::pencil::{star, PencilSpec};

/// Position of a root relative to the lines `Im = 0, -m/2, -m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    Above,
    UpperEdge,
    StripUpper,
    Critical,
    StripLower,
    LowerEdge,
    Below,
}

impl Band {
    /// Open-strip bands contribute to the quotient model.
    pub fn in_open_strip(self) -> bool {
        matches!(self, Band::StripUpper | Band::Critical | Band::StripLower)
    }

    pub fn name(self) -> &'static str {
        match self {
            Band::Above => "above",
            Band::UpperEdge => "upper_edge",
            Band::StripUpper => "strip_upper",
            Band::Critical => "critical",
            Band::StripLower => "strip_lower",
            Band::LowerEdge => "lower_edge",
            Band::Below => "below",
        }
    }
}

/// An indicial root with its order of vanishing of `det p`.
#[derive(Debug, Clone)]
pub struct Root {
    pub sigma0: C64,
    pub alg_mult: usize,
    pub band: Band,
    /// Index of the star-paired root in the returned list (self-paired for
    /// critical roots); `None` when the partner lies outside the window.
    pub star_partner: Option<usize>,
}

/// Default horizontal window bound from the coefficient norms.
pub fn default_window(p: &PencilSpec) -> f64 {
    let max_norm = p.max_coeff_norm();
    let smin = crate::numerics::smallest_singular_value(p.coeff(p.degree()));
    if smin > 1e-12 * max_norm.max(f64::MIN_POSITIVE) {
        (10.0 * (1.0 + max_norm / smin)).min(1e6)
    } else {
        1e6
    }
}

/// All roots of `det p` in the window `|Re| <= T`, `-m-1 <= Im <= 1`,
/// clustered, refined, and classified. Sorted by `(Im, Re)`.
pub fn boundary_spectrum(
    p: &PencilSpec,
    tol: &Tolerances,
    window: Option<f64>,
) -> Result<Vec<Root>> {
    let t_bound = match window {
        Some(t) if t > 0.0 => t,
        Some(t) => {
            return Err(Error::PreconditionViolated(format!(
                "window bound must be positive, got {t}"
            )))
        }
        None => default_window(p),
    };
    let m = p.weight();
    let im_lo = -(m as f64) - 1.0;
    let im_hi = 1.0;

    let raw = polynomial_eigenvalues(p)?;
    // keep eigenvalues in the window with a cluster-radius margin so that
    // boundary ambiguity can be detected after refinement
    let margin = 10.0 * tol.root_cluster;
    let candidates: Vec<C64> = raw
        .into_iter()
        .filter(|z| {
            z.re.abs() <= t_bound + margin && z.im >= im_lo - margin && z.im <= im_hi + margin
        })
        .collect();

    let clusters = cluster_points(&candidates, tol.root_cluster);
    let mut refined: Vec<(C64, usize)> = Vec::new();
    for cl in &clusters {
        let k = cl.len();
        let mean = cl.iter().sum::<C64>() / C64::new(k as f64, 0.0);
        let snapped = snap_to_lines(mean, m, tol.line_snap);
        let spread = cl
            .iter()
            .map(|z| (z - mean).norm())
            .fold(0.0f64, f64::max);
        let sigma0 = refine_root(p, snapped, k, spread, tol);
        let sigma0 = snap_to_lines(sigma0, m, tol.line_snap);
        refined.push((sigma0, k));
    }

    // under-merged clusters refine to the same point; fold them together
    refined.sort_by(|a, b| (a.0.im, a.0.re).partial_cmp(&(b.0.im, b.0.re)).unwrap());
    let mut folded: Vec<(C64, usize)> = Vec::new();
    for (z, k) in refined {
        match folded.last_mut() {
            Some((prev, mult)) if (z - *prev).norm() <= tol.root_cluster => *mult += k,
            _ => folded.push((z, k)),
        }
    }

    // window-boundary ambiguity check
    for &(z, _) in &folded {
        let d_re = t_bound - z.re.abs();
        let d_im = (z.im - im_lo).min(im_hi - z.im);
        let dist = d_re.min(d_im);
        if dist.abs() <= tol.root_cluster {
            return Err(Error::WindowTooSmall { sigma0: z, dist });
        }
    }
    folded.retain(|&(z, _)| z.re.abs() <= t_bound && z.im >= im_lo && z.im <= im_hi);

    let mut roots: Vec<Root> = folded
        .into_iter()
        .map(|(sigma0, alg_mult)| Root {
            sigma0,
            alg_mult,
            band: classify_band(sigma0, m, tol.line_snap),
            star_partner: None,
        })
        .collect();
    roots.sort_by(|a, b| {
        (a.sigma0.im, a.sigma0.re)
            .partial_cmp(&(b.sigma0.im, b.sigma0.re))
            .unwrap()
    });
    assign_star_partners(&mut roots, m, tol);
    Ok(roots)
}

/// True iff the root multiset is invariant under the star reflection with
/// matching multiplicities.
pub fn check_star_symmetry(roots: &[Root], m: u32, tol: &Tolerances) -> bool {
    roots.iter().all(|r| match r.star_partner {
        Some(j) => {
            let partner = &roots[j];
            partner.alg_mult == r.alg_mult
                && (partner.sigma0 - star(r.sigma0, m)).norm() <= tol.root_cluster
        }
        None => false,
    })
}

/// True iff no root sits on the lower edge `Im = -m`; signals that the
/// minimal domain is the full weighted space.
pub fn minimal_domain_flag(roots: &[Root]) -> bool {
    roots.iter().all(|r| r.band != Band::LowerEdge)
}

/// Winding number of `det p` along the circle around `center`; equals the
/// number of roots enclosed, counted with multiplicity.
pub fn winding_number(p: &PencilSpec, center: C64, radius: f64) -> Result<i64> {
    let mut npts = 256usize;
    loop {
        let mut total = 0.0f64;
        let mut ok = true;
        let mut prev = det(p, center + C64::new(radius, 0.0));
        if prev.norm() == 0.0 {
            return Err(Error::PreconditionViolated(
                "winding contour passes through a root".into(),
            ));
        }
        for j in 1..=npts {
            let theta = 2.0 * std::f64::consts::PI * j as f64 / npts as f64;
            let z = center + C64::new(radius * theta.cos(), radius * theta.sin());
            let val = det(p, z);
            if val.norm() == 0.0 {
                return Err(Error::PreconditionViolated(
                    "winding contour passes through a root".into(),
                ));
            }
            let step = (val / prev).arg();
            if step.abs() > std::f64::consts::FRAC_PI_2 {
                ok = false;
                break;
            }
            total += step;
            prev = val;
        }
        if ok {
            return Ok((total / (2.0 * std::f64::consts::PI)).round() as i64);
        }
        npts *= 2;
        if npts > 1 << 16 {
            return Err(Error::QuadratureNotConverged { err: f64::NAN });
        }
    }
}

pub fn det(p: &PencilSpec, sigma: C64) -> C64 {
    p.evaluate(sigma).lu().determinant()
}

// ---------------------------------------------------------------------------
// internals
// ---------------------------------------------------------------------------

/// Eigenvalues of the companion pencil via shift-inversion. Infinite
/// eigenvalues map to zero and are dropped.
fn polynomial_eigenvalues(p: &PencilSpec) -> Result<Vec<C64>> {
    let n = p.dim();
    let mu = p.degree();
    if mu == 0 {
        // constant pencil: either no roots or identically singular
        let smin = crate::numerics::smallest_singular_value(p.coeff(0));
        if smin <= 1e-12 * p.coeff(0).norm() {
            return Err(Error::InvalidPencil(
                "constant pencil with singular coefficient is singular everywhere".into(),
            ));
        }
        return Ok(Vec::new());
    }
    let dim = n * mu;
    let mut x = CMatrix::zeros(dim, dim);
    let mut y = CMatrix::zeros(dim, dim);
    for b in 0..mu - 1 {
        x.view_mut((b * n, (b + 1) * n), (n, n))
            .copy_from(&CMatrix::identity(n, n));
        y.view_mut((b * n, b * n), (n, n))
            .copy_from(&CMatrix::identity(n, n));
    }
    for j in 0..mu {
        x.view_mut(((mu - 1) * n, j * n), (n, n))
            .copy_from(&(-p.coeff(j)));
    }
    y.view_mut(((mu - 1) * n, (mu - 1) * n), (n, n))
        .copy_from(p.coeff(mu));

    // deterministic shift candidates; pick the first that keeps X - s0 Y
    // comfortably invertible
    let scale = p.max_coeff_norm().max(1.0);
    let mcrit = p.critical_im();
    let shift_candidates = [
        C64::new(0.318, mcrit + 0.291),
        C64::new(-0.577, mcrit - 0.413),
        C64::new(1.414, mcrit + 0.866),
        C64::new(-2.236, mcrit - 1.079),
        C64::new(3.141, mcrit + 1.618),
    ];
    for &s0 in &shift_candidates {
        let shifted = &x - &y * s0;
        let smin = crate::numerics::smallest_singular_value(&shifted);
        if smin <= 1e-10 * scale {
            continue;
        }
        let lu = shifted.lu();
        let mut rhs = y.clone();
        if !lu.solve_mut(&mut rhs) {
            continue;
        }
        let schur = rhs.schur();
        let eigs = schur
            .eigenvalues()
            .ok_or_else(|| Error::InvariantMismatch("companion eigensolve failed".into()))?;
        let mut out = Vec::new();
        for &lambda in eigs.iter() {
            if lambda.norm() > 1e-12 {
                out.push(s0 + C64::new(1.0, 0.0) / lambda);
            }
        }
        return Ok(out);
    }
    Err(Error::InvariantMismatch(
        "no usable shift for the companion pencil".into(),
    ))
}

/// Single-linkage clustering at the given radius, followed by a
/// spread-aware merge pass for multiple-root eigenvalue clouds.
fn cluster_points(points: &[C64], radius: f64) -> Vec<Vec<C64>> {
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let r = find(parent, parent[i]);
            parent[i] = r;
        }
        parent[i]
    }
    for i in 0..n {
        for j in i + 1..n {
            if (points[i] - points[j]).norm() <= radius {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<C64>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(points[i]);
    }
    let mut clusters: Vec<Vec<C64>> = groups.into_values().collect();

    // merge clusters whose clouds overlap relative to their spreads
    loop {
        let stats: Vec<(C64, f64)> = clusters
            .iter()
            .map(|cl| {
                let mean = cl.iter().sum::<C64>() / C64::new(cl.len() as f64, 0.0);
                let spread = cl.iter().map(|z| (z - mean).norm()).fold(0.0f64, f64::max);
                (mean, spread)
            })
            .collect();
        let mut merged = false;
        'outer: for i in 0..clusters.len() {
            for j in i + 1..clusters.len() {
                let d = (stats[i].0 - stats[j].0).norm();
                if d <= radius.max(3.0 * (stats[i].1 + stats[j].1)) {
                    let moved = clusters.swap_remove(j);
                    clusters[i].extend(moved);
                    merged = true;
                    break 'outer;
                }
            }
        }
        if !merged {
            break;
        }
    }
    clusters
}

fn snap_to_lines(z: C64, m: u32, line_snap: f64) -> C64 {
    let lines = [0.0, -(m as f64) / 2.0, -(m as f64)];
    for &l in &lines {
        if (z.im - l).abs() <= line_snap {
            return C64::new(z.re, l);
        }
    }
    z
}

fn classify_band(z: C64, m: u32, line_snap: f64) -> Band {
    let mf = m as f64;
    if (z.im - 0.0).abs() <= line_snap {
        Band::UpperEdge
    } else if (z.im + mf / 2.0).abs() <= line_snap {
        Band::Critical
    } else if (z.im + mf).abs() <= line_snap {
        Band::LowerEdge
    } else if z.im > 0.0 {
        Band::Above
    } else if z.im > -mf / 2.0 {
        Band::StripUpper
    } else if z.im > -mf {
        Band::StripLower
    } else {
        Band::Below
    }
}

/// Newton refinement of a cluster mean: a root of multiplicity `k` of the
/// local determinant polynomial `q` is a simple root of `q^(k-1)`.
fn refine_root(p: &PencilSpec, approx: C64, mult: usize, spread: f64, tol: &Tolerances) -> C64 {
    let deg = p.dim() * p.degree();
    if deg == 0 || mult == 0 || mult > deg {
        return approx;
    }
    let radius = 0.5f64.max(4.0 * spread).min(2.0);
    let q = local_det_poly(p, approx, deg, radius);
    // g = q^(k-1)
    let mut g = q;
    for _ in 0..mult - 1 {
        g = poly_derivative(&g);
    }
    let gp = poly_derivative(&g);
    let mut s = C64::new(0.0, 0.0);
    for _ in 0..60 {
        let gv = poly_eval(&g, s);
        let gpv = poly_eval(&gp, s);
        if gpv.norm() < 1e-300 {
            return approx;
        }
        let step = gv / gpv;
        s -= step;
        if step.norm() <= 1e-15 * (1.0 + s.norm()) {
            break;
        }
    }
    // reject refinements that escape the cluster
    if s.norm() > (spread + tol.root_cluster).max(1e-3) * 4.0 {
        return approx;
    }
    approx + s
}

/// Coefficients of `q(s) = det p(center + s)` by exact interpolation at
/// scaled roots of unity (the determinant is a polynomial of degree <= deg).
fn local_det_poly(p: &PencilSpec, center: C64, deg: usize, radius: f64) -> Vec<C64> {
    let npts = deg + 1;
    let values: Vec<C64> = (0..npts)
        .map(|j| {
            let theta = 2.0 * std::f64::consts::PI * j as f64 / npts as f64;
            let s = C64::new(radius * theta.cos(), radius * theta.sin());
            det(p, center + s)
        })
        .collect();
    // inverse DFT, then undo the radius scaling
    let mut coeffs = vec![C64::new(0.0, 0.0); npts];
    for (k, ck) in coeffs.iter_mut().enumerate() {
        let mut acc = C64::new(0.0, 0.0);
        for (j, v) in values.iter().enumerate() {
            let theta = -2.0 * std::f64::consts::PI * (j * k % npts) as f64 / npts as f64;
            acc += v * C64::new(theta.cos(), theta.sin());
        }
        *ck = acc / C64::new(npts as f64, 0.0) / C64::new(radius, 0.0).powu(k as u32);
    }
    coeffs
}

fn poly_derivative(c: &[C64]) -> Vec<C64> {
    if c.len() <= 1 {
        return vec![C64::new(0.0, 0.0)];
    }
    c.iter()
        .enumerate()
        .skip(1)
        .map(|(k, &ck)| ck * C64::new(k as f64, 0.0))
        .collect()
}

fn poly_eval(c: &[C64], s: C64) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for &ck in c.iter().rev() {
        acc = acc * s + ck;
    }
    acc
}

fn assign_star_partners(roots: &mut [Root], m: u32, tol: &Tolerances) {
    let positions: Vec<C64> = roots.iter().map(|r| r.sigma0).collect();
    for (i, r) in roots.iter_mut().enumerate() {
        let target = star(positions[i], m);
        r.star_partner = positions
            .iter()
            .enumerate()
            .filter(|(_, &z)| (z - target).norm() <= tol.root_cluster)
            .map(|(j, _)| j)
            .next();
        let _ = i;
    }
}
