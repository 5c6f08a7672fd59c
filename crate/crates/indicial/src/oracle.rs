//! Independent numerical verification of the algebraic pairing data: the
//! Fuchs operator applied symbolically to cutoff quasi-polynomials,
//! weighted inner products by adaptive Gauss-Kronrod quadrature with
//! analytic tails, the adjoint pairing by direct integration, and the
//! Mellin transform evaluated numerically.
//!
//! Functions are represented as finite sums of terms
//! `c * x^r omega^(r)(x) * log^k(x) * x^{i sigma}` which are closed under
//! `x D_x` and under multiplication by `x^{-m}` (a shift of `sigma` by
//! `i m`), so applying the operator stays exact at the symbol level; only
//! the final integrals are numerical.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::germs::LogCoefficients;
use crate::numerics::CVector;
use crate::pencil::PencilSpec;

/// Smooth cutoff: identically one on `(0, x_flat]`, an order-7 smoothstep
/// ramp down on `[x_flat, x_end]` (three continuous derivatives), zero
/// beyond. `x_flat == x_end` degenerates to a sharp indicator, usable for
/// plain integrals but not for applying the operator.
#[derive(Debug, Clone, Copy)]
pub struct CutoffSpec {
    pub x_flat: f64,
    pub x_end: f64,
}

impl CutoffSpec {
    pub fn new(x_flat: f64, x_end: f64) -> Result<Self> {
        if !(0.0 < x_flat && x_flat <= x_end) {
            return Err(Error::PreconditionViolated(format!(
                "cutoff needs 0 < x_flat <= x_end, got ({x_flat}, {x_end})"
            )));
        }
        Ok(CutoffSpec { x_flat, x_end })
    }

    /// Default window used by the verification suite.
    pub fn standard() -> Self {
        CutoffSpec {
            x_flat: 0.5,
            x_end: 1.0,
        }
    }

    /// Sharp indicator of `(0, x_end)`.
    pub fn sharp(x_end: f64) -> Self {
        CutoffSpec {
            x_flat: x_end,
            x_end,
        }
    }

    pub fn is_sharp(&self) -> bool {
        self.x_flat == self.x_end
    }

    /// `r`-th derivative of the cutoff at `x` (`r = 0` is the value).
    pub fn deriv(&self, r: usize, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x <= self.x_flat {
            return if r == 0 { 1.0 } else { 0.0 };
        }
        if x >= self.x_end {
            return 0.0;
        }
        let h = self.x_end - self.x_flat;
        let t = (x - self.x_flat) / h;
        if r == 0 {
            1.0 - smoothstep7_deriv(0, t)
        } else {
            -smoothstep7_deriv(r, t) / h.powi(r as i32)
        }
    }
}

/// Order-7 smoothstep `35 t^4 - 84 t^5 + 70 t^6 - 20 t^7` and derivatives.
fn smoothstep7_deriv(r: usize, t: f64) -> f64 {
    let mut coeffs = [0.0f64, 0.0, 0.0, 0.0, 35.0, -84.0, 70.0, -20.0];
    let mut deg = 7usize;
    for _ in 0..r {
        for k in 1..=deg {
            coeffs[k - 1] = coeffs[k] * k as f64;
        }
        coeffs[deg] = 0.0;
        if deg == 0 {
            return 0.0;
        }
        deg -= 1;
    }
    let mut acc = 0.0;
    for k in (0..=deg).rev() {
        acc = acc * t + coeffs[k];
    }
    acc
}

/// A finite sum of cutoff quasi-polynomial terms
/// `e * log^j(x) x^{i sigma0}`, multiplied by the cutoff.
#[derive(Debug, Clone)]
pub struct QuasiPolynomial {
    pub terms: Vec<QpTerm>,
    pub cutoff: CutoffSpec,
}

#[derive(Debug, Clone)]
pub struct QpTerm {
    pub sigma0: C64,
    pub log_pow: usize,
    pub coeff: CVector,
}

impl QuasiPolynomial {
    pub fn new(terms: Vec<QpTerm>, cutoff: CutoffSpec) -> Result<Self> {
        for t in &terms {
            if t.sigma0.im >= 0.0 {
                return Err(Error::NonIntegrable(format!(
                    "term exponent {} is not decaying at the origin",
                    t.sigma0
                )));
            }
        }
        Ok(QuasiPolynomial { terms, cutoff })
    }

    /// Singular function with the given log coefficients at one root.
    pub fn from_log_coeffs(u: &LogCoefficients, cutoff: CutoffSpec) -> Result<Self> {
        let terms = u
            .e
            .iter()
            .enumerate()
            .filter(|(_, e)| e.norm() > 0.0)
            .map(|(j, e)| QpTerm {
                sigma0: u.sigma0,
                log_pow: j,
                coeff: e.clone(),
            })
            .collect();
        QuasiPolynomial::new(terms, cutoff)
    }

    pub fn dim(&self) -> usize {
        self.terms.first().map(|t| t.coeff.len()).unwrap_or(0)
    }

    fn to_term_fun(&self) -> TermFun {
        TermFun {
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    omega_deriv: 0,
                    log_pow: t.log_pow,
                    exponent: t.sigma0,
                    coeff: t.coeff.clone(),
                })
                .collect(),
            cutoff: self.cutoff,
            dim: self.dim(),
        }
    }

    pub fn evaluate(&self, x: f64) -> CVector {
        self.to_term_fun().evaluate(x)
    }
}

/// Internal closed term representation:
/// `coeff * x^omega_deriv * omega^(omega_deriv)(x) * log^log_pow(x) * x^{i exponent}`.
#[derive(Debug, Clone)]
struct Term {
    omega_deriv: usize,
    log_pow: usize,
    exponent: C64,
    coeff: CVector,
}

/// A function given as a finite term sum against one cutoff.
#[derive(Debug, Clone)]
pub struct TermFun {
    terms: Vec<Term>,
    cutoff: CutoffSpec,
    dim: usize,
}

impl TermFun {
    pub fn evaluate(&self, x: f64) -> CVector {
        let mut out = CVector::zeros(self.dim);
        if x <= 0.0 || x >= self.cutoff.x_end {
            return out;
        }
        let lx = x.ln();
        for t in &self.terms {
            let w = self.cutoff.deriv(t.omega_deriv, x) * x.powi(t.omega_deriv as i32);
            if w == 0.0 {
                continue;
            }
            let phase = (C64::new(0.0, 1.0) * t.exponent * lx).exp();
            let scalar = phase * w * lx.powi(t.log_pow as i32);
            out += &t.coeff * scalar;
        }
        out
    }

    pub fn coeff_scale(&self) -> f64 {
        self.terms.iter().map(|t| t.coeff.norm()).fold(0.0, f64::max)
    }

    fn push_merged(terms: &mut Vec<Term>, t: Term) {
        if t.coeff.norm() == 0.0 {
            return;
        }
        for existing in terms.iter_mut() {
            if existing.omega_deriv == t.omega_deriv
                && existing.log_pow == t.log_pow
                && existing.exponent == t.exponent
            {
                existing.coeff += &t.coeff;
                return;
            }
        }
        terms.push(t);
    }

    /// `x D_x` applied termwise:
    /// `(sigma - i r) T + (-i) T[r+1] + (-i k) T[k-1]`.
    fn x_dx(&self) -> TermFun {
        let mut out: Vec<Term> = Vec::new();
        for t in &self.terms {
            let factor = t.exponent - C64::new(0.0, t.omega_deriv as f64);
            Self::push_merged(
                &mut out,
                Term {
                    coeff: &t.coeff * factor,
                    ..t.clone()
                },
            );
            Self::push_merged(
                &mut out,
                Term {
                    omega_deriv: t.omega_deriv + 1,
                    coeff: &t.coeff * C64::new(0.0, -1.0),
                    ..t.clone()
                },
            );
            if t.log_pow > 0 {
                Self::push_merged(
                    &mut out,
                    Term {
                        log_pow: t.log_pow - 1,
                        coeff: &t.coeff * C64::new(0.0, -(t.log_pow as f64)),
                        ..t.clone()
                    },
                );
            }
        }
        TermFun {
            terms: out,
            cutoff: self.cutoff,
            dim: self.dim,
        }
    }
}

/// Applies `A = x^{-m} sum_j a_j (x D_x)^j` to a cutoff quasi-polynomial;
/// the result is again a closed term sum (the weight factor shifts each
/// exponent by `i m`).
pub fn apply_operator(p: &PencilSpec, u: &QuasiPolynomial) -> Result<TermFun> {
    if u.cutoff.is_sharp() {
        return Err(Error::PreconditionViolated(
            "applying the operator needs a cutoff with a smooth ramp".into(),
        ));
    }
    if u.dim() != p.dim() && !u.terms.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "quasi-polynomial dimension {} vs pencil dimension {}",
            u.dim(),
            p.dim()
        )));
    }
    let mut power = u.to_term_fun();
    let mut total: Vec<Term> = Vec::new();
    for j in 0..=p.degree() {
        if j > 0 {
            power = power.x_dx();
        }
        for t in &power.terms {
            TermFun::push_merged(
                &mut total,
                Term {
                    coeff: p.coeff(j) * &t.coeff,
                    ..t.clone()
                },
            );
        }
    }
    // x^{-m} shifts the exponent: x^{-m} x^{i s} = x^{i(s + i m)}
    let m_shift = C64::new(0.0, p.weight() as f64);
    for t in &mut total {
        t.exponent += m_shift;
    }
    Ok(TermFun {
        terms: total,
        cutoff: u.cutoff,
        dim: p.dim(),
    })
}

/// Quadrature configuration for the weighted inner products.
#[derive(Debug, Clone, Copy)]
pub struct QuadConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Analytic-tail boundary: below this the integrand must be a pure
    /// quasi-polynomial and is integrated in closed form.
    pub tail_eps: f64,
    pub max_intervals: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            rel_tol: 1e-9,
            abs_tol: 1e-13,
            tail_eps: 1e-6,
            max_intervals: 4000,
        }
    }
}

/// Weighted inner product `int_0^infty < f(x), g(x) > dx / x`, split into a
/// closed-form tail on `(0, eps]` and adaptive Gauss-Kronrod on the rest
/// (in the variable `t = log x`).
pub fn l2b_inner(f: &TermFun, g: &TermFun, quad: &QuadConfig) -> Result<C64> {
    if f.dim != g.dim {
        return Err(Error::DimensionMismatch(
            "inner product needs matching dimensions".into(),
        ));
    }
    let eps = quad.tail_eps.min(f.cutoff.x_flat).min(g.cutoff.x_flat) * 0.5;
    // analytic tail: only flat-region terms survive below eps
    let drop_scale = f.coeff_scale() * g.coeff_scale();
    let mut tail = C64::new(0.0, 0.0);
    for tf in f.terms.iter().filter(|t| t.omega_deriv == 0) {
        for tg in g.terms.iter().filter(|t| t.omega_deriv == 0) {
            let s = tg.coeff.dotc(&tf.coeff);
            if s.norm() == 0.0 {
                continue;
            }
            let a = C64::new(0.0, 1.0) * (tf.exponent - tg.exponent.conj());
            if a.re <= 0.0 {
                if s.norm() <= 1e-9 * drop_scale.max(f64::MIN_POSITIVE) {
                    continue; // numerically-zero coefficient on a divergent term
                }
                return Err(Error::NonIntegrable(format!(
                    "combined exponent {a} has nonpositive real part near the origin"
                )));
            }
            tail += s * power_log_tail(a, tf.log_pow + tg.log_pow, eps);
        }
    }
    // middle part by quadrature, split at the cutoff knots
    let upper = f.cutoff.x_end.min(g.cutoff.x_end);
    let mut knots = vec![eps, f.cutoff.x_flat, f.cutoff.x_end, g.cutoff.x_flat, g.cutoff.x_end];
    knots.retain(|&x| x > eps && x <= upper);
    knots.push(eps);
    knots.push(upper);
    knots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    knots.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    let integrand = |t: f64| -> C64 {
        let x = t.exp();
        g.evaluate(x).dotc(&f.evaluate(x))
    };
    let mut total = tail;
    for w in knots.windows(2) {
        total += adaptive_gk(&integrand, w[0].ln(), w[1].ln(), quad)?;
    }
    Ok(total)
}

/// `int_0^eps x^{a-1} log^k x dx` for `Re a > 0`, in closed form.
fn power_log_tail(a: C64, k: usize, eps: f64) -> C64 {
    let l = eps.ln();
    let ea = (a * l).exp();
    let mut factor = 1.0f64; // k! / (k-r)!
    let mut acc = C64::new(0.0, 0.0);
    let mut apow = a;
    let mut sign = 1.0f64;
    for r in 0..=k {
        acc += C64::new(sign * factor * l.powi((k - r) as i32), 0.0) / apow;
        sign = -sign;
        factor *= (k - r) as f64;
        apow *= a;
    }
    ea * acc
}

/// Adjoint pairing by direct integration:
/// `(1/i) [ <A u, v> - <u, A v> ]`. The inputs must lie in the germ spaces
/// of their base points (see `germs::membership`), which makes both inner
/// products absolutely convergent.
pub fn pairing_direct(
    p: &PencilSpec,
    u: &QuasiPolynomial,
    v: &QuasiPolynomial,
    quad: &QuadConfig,
) -> Result<C64> {
    let au = apply_operator(p, u)?;
    let av = apply_operator(p, v)?;
    let uf = u.to_term_fun();
    let vf = v.to_term_fun();
    let first = l2b_inner(&au, &vf, quad)?;
    let second = l2b_inner(&uf, &av, quad)?;
    Ok((first - second) / C64::new(0.0, 1.0))
}

/// Mellin transform `int_0^infty x^{-i sigma} u(x) dx/x` evaluated by the
/// same tail-plus-quadrature split; requires `Im sigma > Im sigma0` for
/// every term (absolute convergence near the origin).
pub fn mellin_numeric(u: &QuasiPolynomial, sigma: C64, quad: &QuadConfig) -> Result<CVector> {
    let dim = u.dim();
    let eps = quad.tail_eps.min(u.cutoff.x_flat) * 0.5;
    let mut out = CVector::zeros(dim);
    for t in &u.terms {
        let a = C64::new(0.0, 1.0) * (t.sigma0 - sigma);
        if a.re <= 0.0 {
            return Err(Error::NonIntegrable(format!(
                "Mellin integral diverges: Im sigma = {} <= Im sigma0 = {}",
                sigma.im, t.sigma0.im
            )));
        }
        out += &t.coeff * power_log_tail(a, t.log_pow, eps);
    }
    // quadrature over [eps, x_end] componentwise
    let knots = [eps, u.cutoff.x_flat, u.cutoff.x_end];
    for c in 0..dim {
        let integrand = |t: f64| -> C64 {
            let x = t.exp();
            let phase = (C64::new(0.0, -1.0) * sigma * t).exp();
            u.evaluate(x)[c] * phase
        };
        let mut acc = C64::new(0.0, 0.0);
        for w in knots.windows(2) {
            if w[1] > w[0] {
                acc += adaptive_gk(&integrand, w[0].ln(), w[1].ln(), quad)?;
            }
        }
        out[c] += acc;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// adaptive Gauss-Kronrod 7-15 for complex integrands
// ---------------------------------------------------------------------------

const XGK15: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

const WG7: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

const WGK15: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

fn gk15<F: Fn(f64) -> C64>(f: &F, a: f64, b: f64) -> (C64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center);
    let mut kronrod = f_center * WGK15[7];
    let mut gauss = f_center * WG7[3];
    for j in 0..3 {
        let idx = 2 * j + 1;
        let x = half * XGK15[idx];
        let fsum = f(center - x) + f(center + x);
        gauss += fsum * WG7[j];
        kronrod += fsum * WGK15[idx];
    }
    for j in 0..4 {
        let idx = 2 * j;
        let x = half * XGK15[idx];
        let fsum = f(center - x) + f(center + x);
        kronrod += fsum * WGK15[idx];
    }
    let value = kronrod * half;
    let err = ((kronrod - gauss) * half).norm();
    (value, err)
}

fn adaptive_gk<F: Fn(f64) -> C64>(f: &F, a: f64, b: f64, quad: &QuadConfig) -> Result<C64> {
    if b <= a {
        return Ok(C64::new(0.0, 0.0));
    }
    let (v0, e0) = gk15(f, a, b);
    let mut heap: Vec<(f64, f64, C64, f64)> = vec![(a, b, v0, e0)];
    let mut intervals = 1usize;
    loop {
        let total: C64 = heap.iter().map(|s| s.2).sum();
        let err: f64 = heap.iter().map(|s| s.3).sum();
        if err <= quad.abs_tol.max(quad.rel_tol * total.norm()) {
            return Ok(total);
        }
        if intervals >= quad.max_intervals {
            return Err(Error::QuadratureNotConverged { err });
        }
        // split the interval with the largest error estimate
        let worst = heap
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.partial_cmp(&y.1 .3).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        let (wa, wb, _, _) = heap.swap_remove(worst);
        let mid = 0.5 * (wa + wb);
        let (v1, e1) = gk15(f, wa, mid);
        let (v2, e2) = gk15(f, mid, wb);
        heap.push((wa, mid, v1, e1));
        heap.push((mid, wb, v2, e2));
        intervals += 1;
    }
}
