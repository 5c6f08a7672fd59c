//! The indicial family `p(sigma) = sum_j a_j sigma^j` with positive integer
//! weight `m`, its star reflection `sigma* = conj(sigma) - i m`, evaluation,
//! and exact Taylor re-expansion at arbitrary base points.
//!
//! A pencil is *symmetric* when `p(sigma*)^* = p(sigma)` for all `sigma`;
//! equivalently, for every `k`,
//! `a_k = sum_{j >= k} binom(j, k) (i m)^(j-k) a_j^*`.
//! Symmetry is validated once at load time; downstream modules assume it.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{CMatrix, MatrixSeries, Tolerances};

/// Reflection about the line `Im(sigma) = -m/2`; involutive.
pub fn star(sigma: C64, m: u32) -> C64 {
    C64::new(sigma.re, -(m as f64) - sigma.im)
}

/// A matrix pencil `p(sigma) = a_0 + a_1 sigma + ... + a_mu sigma^mu`
/// together with the operator weight `m`.
#[derive(Debug, Clone)]
pub struct PencilSpec {
    m: u32,
    coeffs: Vec<CMatrix>,
}

impl PencilSpec {
    /// Builds a pencil from its coefficient list `a_0..a_mu`.
    pub fn new(m: u32, coeffs: Vec<CMatrix>) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidPencil("weight m must be positive".into()));
        }
        if coeffs.is_empty() {
            return Err(Error::InvalidPencil("pencil needs coefficients a_0..a_mu".into()));
        }
        let n = coeffs[0].nrows();
        if n == 0 {
            return Err(Error::InvalidPencil("coefficient dimension must be positive".into()));
        }
        for a in &coeffs {
            if a.nrows() != n || a.ncols() != n {
                return Err(Error::InvalidPencil(
                    "all coefficients must be square of equal dimension".into(),
                ));
            }
        }
        if coeffs.len() > 1 && coeffs.last().unwrap().norm() == 0.0 {
            return Err(Error::InvalidPencil("leading coefficient a_mu vanishes".into()));
        }
        Ok(PencilSpec { m, coeffs })
    }

    pub fn weight(&self) -> u32 {
        self.m
    }

    /// Polynomial degree mu.
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Coefficient dimension n.
    pub fn dim(&self) -> usize {
        self.coeffs[0].nrows()
    }

    pub fn coeff(&self, j: usize) -> &CMatrix {
        &self.coeffs[j]
    }

    pub fn coeffs(&self) -> &[CMatrix] {
        &self.coeffs
    }

    pub fn max_coeff_norm(&self) -> f64 {
        self.coeffs.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    /// Imaginary part of the critical line `Im(sigma) = -m/2`.
    pub fn critical_im(&self) -> f64 {
        -(self.m as f64) / 2.0
    }

    /// Horner evaluation of `p(sigma)`.
    pub fn evaluate(&self, sigma: C64) -> CMatrix {
        let n = self.dim();
        let mut acc = CMatrix::zeros(n, n);
        for a in self.coeffs.iter().rev() {
            acc = acc * sigma + a;
        }
        acc
    }

    /// First derivative `p'(sigma)`.
    pub fn derivative(&self, sigma: C64) -> CMatrix {
        let n = self.dim();
        let mut acc = CMatrix::zeros(n, n);
        for j in (1..self.coeffs.len()).rev() {
            acc = acc * sigma + self.coeffs[j].scale(j as f64);
        }
        acc
    }

    /// Exact binomial re-expansion around `sigma0`, truncated (padded with
    /// zeros) at the requested order: coefficient `k` equals
    /// `p^(k)(sigma0) / k!`.
    pub fn taylor_at(&self, sigma0: C64, order: usize) -> MatrixSeries {
        let n = self.dim();
        let mu = self.degree();
        let mut out = vec![CMatrix::zeros(n, n); order + 1];
        for (k, item) in out.iter_mut().enumerate().take(order + 1) {
            if k > mu {
                break;
            }
            // sum_{j>=k} binom(j,k) a_j sigma0^(j-k)
            let mut acc = CMatrix::zeros(n, n);
            let mut pow = C64::new(1.0, 0.0);
            for j in k..=mu {
                acc += self.coeffs[j].scale(binom(j, k)) * pow;
                pow *= sigma0;
            }
            *item = acc;
        }
        MatrixSeries::new(out).expect("taylor coefficients are well-formed")
    }

    /// Whether the star-symmetry coefficient identity holds within
    /// `rank_rel * max_j ||a_j||`.
    pub fn check_symmetry(&self, tol: &Tolerances) -> bool {
        self.symmetry_deviation() <= tol.rank_rel * self.max_coeff_norm().max(f64::MIN_POSITIVE)
    }

    /// Largest coefficient-identity residual over all k.
    pub fn symmetry_deviation(&self) -> f64 {
        let mu = self.degree();
        let im = C64::new(0.0, self.m as f64);
        let mut worst = 0.0f64;
        for k in 0..=mu {
            let mut acc = CMatrix::zeros(self.dim(), self.dim());
            let mut pow = C64::new(1.0, 0.0);
            for j in k..=mu {
                acc += self.coeffs[j].adjoint().scale(binom(j, k)) * pow;
                pow *= im;
            }
            worst = worst.max((acc - &self.coeffs[k]).norm());
        }
        worst
    }

    /// Fails with [`Error::NotSymmetric`] unless the pencil is symmetric.
    pub fn require_symmetric(&self, tol: &Tolerances) -> Result<()> {
        let dev = self.symmetry_deviation() / self.max_coeff_norm().max(f64::MIN_POSITIVE);
        if dev <= tol.rank_rel {
            Ok(())
        } else {
            Err(Error::NotSymmetric(dev))
        }
    }
}

fn binom(j: usize, k: usize) -> f64 {
    let mut acc = 1.0f64;
    for i in 0..k.min(j - k) {
        acc = acc * (j - i) as f64 / (i + 1) as f64;
    }
    acc
}

// ---------------------------------------------------------------------------
// JSON wire format
// ---------------------------------------------------------------------------

/// Serialized pencil: `coeffs[j]` is `a_j` row-major, entries as `[re, im]`.
#[derive(Debug, Serialize, Deserialize)]
pub struct PencilJson {
    pub m: u32,
    pub mu: usize,
    pub n: usize,
    pub coeffs: Vec<Vec<Vec<[f64; 2]>>>,
}

impl PencilSpec {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: PencilJson = serde_json::from_str(text)?;
        raw.try_into()
    }

    pub fn to_json(&self) -> PencilJson {
        let n = self.dim();
        PencilJson {
            m: self.m,
            mu: self.degree(),
            n,
            coeffs: self
                .coeffs
                .iter()
                .map(|a| {
                    (0..n)
                        .map(|i| (0..n).map(|j| [a[(i, j)].re, a[(i, j)].im]).collect())
                        .collect()
                })
                .collect(),
        }
    }
}

impl TryFrom<PencilJson> for PencilSpec {
    type Error = Error;

    fn try_from(raw: PencilJson) -> Result<Self> {
        if raw.coeffs.len() != raw.mu + 1 {
            return Err(Error::InvalidPencil(format!(
                "expected mu+1 = {} coefficient matrices, found {}",
                raw.mu + 1,
                raw.coeffs.len()
            )));
        }
        let mut coeffs = Vec::with_capacity(raw.coeffs.len());
        for (j, rows) in raw.coeffs.iter().enumerate() {
            if rows.len() != raw.n || rows.iter().any(|r| r.len() != raw.n) {
                return Err(Error::InvalidPencil(format!(
                    "coefficient a_{j} is not {0}x{0}",
                    raw.n
                )));
            }
            let a = CMatrix::from_fn(raw.n, raw.n, |i, k| {
                C64::new(rows[i][k][0], rows[i][k][1])
            });
            coeffs.push(a);
        }
        PencilSpec::new(raw.m, coeffs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

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
    fn star_is_involutive_and_fixes_critical_line() {
        let m = 2;
        let fixed = c(0.7, -1.0);
        assert!((star(fixed, m) - fixed).norm() < 1e-15);
        let z = c(1.3, -0.2);
        assert!((star(star(z, m), m) - z).norm() < 1e-15);
        assert!((star(c(0.0, -0.5), 2) - c(0.0, -1.5)).norm() < 1e-15);
    }

    #[test]
    fn symmetry_scalar_examples() {
        let tol = Tolerances::default();
        // p = sigma + i with m = 2 is symmetric
        let p = scalar_pencil(2, &[c(0., 1.), c(1., 0.)]);
        assert!(p.check_symmetry(&tol));
        // p = sigma with m = 2 is not
        let q = scalar_pencil(2, &[c(0., 0.), c(1., 0.)]);
        assert!(!q.check_symmetry(&tol));
        assert!(matches!(q.require_symmetric(&tol), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn symmetry_constant_pencil_iff_hermitian() {
        let tol = Tolerances::default();
        let herm = PencilSpec::new(
            3,
            vec![CMatrix::from_row_slice(
                2,
                2,
                &[c(1., 0.), c(0., 1.), c(0., -1.), c(-2., 0.)],
            )],
        )
        .unwrap();
        assert!(herm.check_symmetry(&tol));
        let nonherm = PencilSpec::new(
            3,
            vec![CMatrix::from_row_slice(
                2,
                2,
                &[c(1., 0.), c(1., 0.), c(0., 0.), c(1., 0.)],
            )],
        )
        .unwrap();
        assert!(!nonherm.check_symmetry(&tol));
    }

    #[test]
    fn evaluate_matches_naive_power_sum() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let n = rng.random_range(1..4);
            let mu = rng.random_range(1..5);
            let coeffs: Vec<CMatrix> = (0..=mu)
                .map(|_| {
                    CMatrix::from_fn(n, n, |_, _| {
                        c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
                    })
                })
                .collect();
            let p = PencilSpec::new(1, coeffs.clone()).unwrap();
            let sigma = c(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0);
            let mut naive = CMatrix::zeros(n, n);
            for (j, a) in coeffs.iter().enumerate() {
                naive += a * sigma.powu(j as u32);
            }
            assert!((p.evaluate(sigma) - naive).norm() < 1e-12);
        }
    }

    #[test]
    fn evaluate_root_of_linear_pencil() {
        let p = scalar_pencil(2, &[c(0., 1.), c(1., 0.)]);
        assert!(p.evaluate(c(0., -1.)).norm() < 1e-15);
        let constant = scalar_pencil(2, &[c(2., -1.)]);
        assert!((constant.evaluate(c(5., 3.)) - CMatrix::from_element(1, 1, c(2., -1.))).norm() < 1e-15);
    }

    #[test]
    fn taylor_shifted_square() {
        // p = (sigma + i)^2 = sigma^2 + 2i sigma - 1, expanded at -i: (0, 0, 1)
        let p = scalar_pencil(2, &[c(-1., 0.), c(0., 2.), c(1., 0.)]);
        let t = p.taylor_at(c(0., -1.), 3);
        assert!(t.coeff(0).norm() < 1e-15);
        assert!(t.coeff(1).norm() < 1e-15);
        assert!((t.coeff(2)[(0, 0)] - c(1., 0.)).norm() < 1e-15);
        assert!(t.coeff(3).norm() < 1e-15);
    }

    #[test]
    fn taylor_order_zero_is_evaluate() {
        let p = scalar_pencil(1, &[c(0.3, 0.4), c(1., -2.), c(0., 1.)]);
        let s0 = c(0.2, -0.7);
        let t = p.taylor_at(s0, 0);
        assert!((t.coeff(0) - p.evaluate(s0)).norm() < 1e-14);
    }

    #[test]
    fn taylor_matches_finite_differences() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let n = 2;
        let mu = 3;
        let coeffs: Vec<CMatrix> = (0..=mu)
            .map(|_| {
                CMatrix::from_fn(n, n, |_, _| {
                    c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
                })
            })
            .collect();
        let p = PencilSpec::new(1, coeffs).unwrap();
        let s0 = c(1.0, 2.0);
        let t = p.taylor_at(s0, 2);
        let h = 1e-5;
        // central differences for p' and p''
        let d1 = (p.evaluate(s0 + c(h, 0.)) - p.evaluate(s0 - c(h, 0.))).scale(1.0 / (2.0 * h));
        let d2 = (p.evaluate(s0 + c(h, 0.)) - p.evaluate(s0).scale(2.0)
            + p.evaluate(s0 - c(h, 0.)))
        .scale(1.0 / (h * h));
        assert!((t.coeff(1) - d1).norm() < 1e-7);
        assert!((t.coeff(2) - d2.scale(0.5)).norm() < 1e-4);
    }

    #[test]
    fn taylor_resummation_reproduces_evaluate() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let n = 3;
        let mu = 4;
        let coeffs: Vec<CMatrix> = (0..=mu)
            .map(|_| {
                CMatrix::from_fn(n, n, |_, _| {
                    c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
                })
            })
            .collect();
        let p = PencilSpec::new(2, coeffs).unwrap();
        let s0 = c(-0.4, -1.1);
        let t = p.taylor_at(s0, mu);
        for k in 0..5 {
            let s = c(0.3 * k as f64 - 0.6, 0.1 * k as f64);
            let resummed = t.eval(s);
            let direct = p.evaluate(s0 + s);
            assert!(
                (resummed - &direct).norm() <= 1e-9 * direct.norm().max(1.0),
                "resummation mismatch at offset {s}"
            );
        }
    }

    #[test]
    fn symmetric_pencil_hermitian_on_critical_line() {
        // p(sigma) = sigma(sigma + 2i) is symmetric for m = 2
        let p = scalar_pencil(2, &[c(0., 0.), c(0., 2.), c(1., 0.)]);
        let tol = Tolerances::default();
        assert!(p.check_symmetry(&tol));
        for k in 0..7 {
            let s = c(-3.0 + k as f64, -1.0);
            let v = p.evaluate(s);
            assert!(
                crate::numerics::hermitian_deviation(&v) <= 1e-10 * v.norm().max(1.0),
                "not Hermitian at {s}"
            );
        }
    }

    #[test]
    fn star_relation_on_samples() {
        let p = scalar_pencil(2, &[c(0., 0.), c(0., 2.), c(1., 0.)]);
        for k in 0..5 {
            let s = c(0.7 * k as f64 - 1.0, -0.3 * k as f64);
            let lhs = p.evaluate(star(s, 2)).adjoint();
            let rhs = p.evaluate(s);
            assert!((lhs - &rhs).norm() <= 1e-10 * rhs.norm().max(1.0));
        }
    }

    #[test]
    fn json_roundtrip() {
        let text = r#"{
            "m": 2, "mu": 1, "n": 1,
            "coeffs": [ [[[0.0, 1.0]]], [[[1.0, 0.0]]] ]
        }"#;
        let p = PencilSpec::from_json_str(text).unwrap();
        assert_eq!(p.weight(), 2);
        assert_eq!(p.degree(), 1);
        assert_eq!(p.dim(), 1);
        assert!((p.coeff(0)[(0, 0)] - c(0., 1.)).norm() < 1e-15);
        let back = serde_json::to_string(&p.to_json()).unwrap();
        let p2 = PencilSpec::from_json_str(&back).unwrap();
        assert!((p2.coeff(1)[(0, 0)] - c(1., 0.)).norm() < 1e-15);
    }

    #[test]
    fn json_rejects_malformed() {
        assert!(PencilSpec::from_json_str("{not json").is_err());
        let bad_shape = r#"{"m": 2, "mu": 1, "n": 2, "coeffs": [ [[[0.0,1.0]]], [[[1.0,0.0]]] ]}"#;
        assert!(PencilSpec::from_json_str(bad_shape).is_err());
    }
}
