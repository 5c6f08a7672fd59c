use indicial::numerics::{self, CMatrix};
use num_complex::Complex64 as C64;
use rand::prelude::*;
fn c(re: f64, im: f64) -> C64 { C64::new(re, im) }
fn main() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let mut worst_recon = 0.0f64;
    let mut worst_align = 0.0f64;
    let mut worst_orth = 0.0f64;
    for trial in 0..2000 {
        let m = rng.random_range(1..16);
        let n = rng.random_range(1..8);
        let r = rng.random_range(0..=n.min(m));
        let a = if r == 0 {
            CMatrix::zeros(m, n)
        } else {
            let a_l = CMatrix::from_fn(m, r, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
            let a_r = CMatrix::from_fn(r, n, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
            &a_l * &a_r
        };
        let svd = numerics::sorted_svd(&a, true, true);
        let u = svd.u.as_ref().unwrap();
        let vt = svd.v_t.as_ref().unwrap();
        let k = svd.singular_values.len();
        assert_eq!(k, m.min(n), "trial {trial}");
        // sorted?
        for w in svd.singular_values.windows(2) { assert!(w[0] >= w[1]); }
        // reconstruction
        let s = CMatrix::from_fn(k, k, |i, j| if i == j { c(svd.singular_values[i], 0.) } else { c(0., 0.) });
        let recon = u * s * vt;
        worst_recon = worst_recon.max((recon - &a).norm() / a.norm().max(1e-30));
        // alignment: A v_k = s_k u_k
        let v = vt.adjoint();
        for j in 0..k {
            let av = &a * v.column(j).into_owned();
            let target = u.column(j).into_owned() * c(svd.singular_values[j], 0.);
            worst_align = worst_align.max((av - target).norm());
        }
        // orthonormality of nonzero-u columns and v rows
        let smax = svd.singular_values.first().copied().unwrap_or(0.0);
        let rank = svd.singular_values.iter().filter(|&&x| x > 1e-10 * smax.max(1e-30)).count();
        if rank > 0 {
            let ur = u.columns(0, rank).into_owned();
            worst_orth = worst_orth.max((ur.adjoint() * &ur - CMatrix::identity(rank, rank)).norm());
        }
        worst_orth = worst_orth.max((vt * vt.adjoint() - CMatrix::identity(vt.nrows(), vt.nrows())).norm());
    }
    println!("worst recon {:.3e}, align {:.3e}, orth {:.3e}", worst_recon, worst_align, worst_orth);
}
