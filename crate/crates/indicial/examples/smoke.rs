use indicial::corpus;
use indicial::numerics::{self, CMatrix, CVector, Tolerances};
use indicial::roots;
use num_complex::Complex64 as C64;

fn shift_vector(v: &CVector, n: usize) -> CVector {
    let l = v.len() / n;
    let mut out = CVector::zeros(v.len());
    if l > 1 {
        out.rows_mut(0, (l - 1) * n).copy_from(&v.rows(n, (l - 1) * n));
    }
    out
}
fn shift_columns(m: &CMatrix, n: usize) -> CMatrix {
    let mut out = CMatrix::zeros(m.nrows(), m.ncols());
    for c in 0..m.ncols() {
        out.set_column(c, &shift_vector(&m.column(c).into_owned(), n));
    }
    out
}

fn main() {
    let tol = Tolerances::default();
    let mut rng = corpus::rng_from_seed(42);
    for trial in 0..=64 {
        let pl = corpus::planted_critical_pencil(&mut rng);
        if trial != 64 { continue; }
        println!("m={} n={} mu={}", pl.m, pl.pencil.dim(), pl.pencil.degree());
        for r in &pl.critical { println!("planted {} blocks {:?}", r.sigma0, r.blocks); }
        let rts = roots::boundary_spectrum(&pl.pencil, &tol, None).unwrap();
        for r in &rts { println!("found {} mult {} {:?} |det|={:.2e}", r.sigma0, r.alg_mult, r.band, roots::det(&pl.pencil, r.sigma0).norm()); }
        let bad = rts.iter().find(|r| (r.sigma0.re + 1.204).abs() < 0.01).unwrap();
        let l_max = bad.alg_mult;
        let n = pl.pencil.dim();
        let t = indicial::germs::toeplitz_matrix(&pl.pencil, bad.sigma0, l_max);
        let svd0 = numerics::sorted_svd(&t, false, false);
        println!("T ({}x{}) singulars: {:?}", t.nrows(), t.ncols(), svd0.singular_values);
        let kernel = numerics::nullspace_with_threshold(&t, 1e-9 * svd0.singular_values[0]);
        println!("kernel cols {}", kernel.ncols());
        let mut n_bases: Vec<CMatrix> = vec![CMatrix::zeros(l_max * n, 0)];
        for j in 1..=l_max {
            if j == l_max { n_bases.push(kernel.clone()); }
            else {
                let tail = kernel.rows(j * n, (l_max - j) * n).into_owned();
                let tsvd = numerics::sorted_svd(&tail, false, false);
                println!("tail past {j}: {:?}", tsvd.singular_values);
                let coords = numerics::nullspace_with_threshold(&tail, 1e-8);
                n_bases.push(numerics::orthonormalize(&(&kernel * coords), &tol));
            }
        }
        n_bases.push(kernel.clone());
        let dims: Vec<usize> = n_bases.iter().map(|b| b.ncols()).collect();
        println!("dims {:?}", dims);
        let ell = 2usize;
        let shifted = shift_columns(&n_bases[ell + 1], n);
        let covered = numerics::subspace_sum(&n_bases[ell - 1], &shifted, &tol);
        println!("covered {} cols", covered.ncols());
        for c in 0..covered.ncols() {
            println!("  covered {c}: Tres {:.2e}", (&t * covered.column(c).into_owned()).norm());
        }
        let wq = numerics::orthonormalize(&covered, &tol);
        let mut proj = n_bases[ell].clone();
        if wq.ncols() > 0 { proj -= &wq * (wq.adjoint() * &n_bases[ell]); }
        let psvd = numerics::sorted_svd(&proj, true, false);
        println!("proj singulars {:?}", psvd.singular_values);
        let u = psvd.u.unwrap();
        for k in 0..3 {
            let col = u.column(k).into_owned();
            println!("  u {k}: Tres {:.2e}", (&t * &col).norm());
        }
        // is u0 really in range(proj)? solve least squares
        let x = proj.clone().svd_unordered(true, true).solve(&u.column(0).into_owned(), 1e-10).unwrap();
        println!("ls resid {:.2e}", (&proj * &x - u.column(0).into_owned()).norm());
        let u0 = u.column(0).into_owned();
        let zu0 = shift_vector(&u0, n);
        println!("||Z u0|| = {:.3e}, ||T Z u0|| = {:.3e}", zu0.norm(), (&t * &zu0).norm());
        // ell = 1 analysis
        let shifted1 = shift_columns(&n_bases[2], n);
        for c in 0..shifted1.ncols() {
            println!("Z N2 col {c}: norm {:.3e} Tres {:.3e}", shifted1.column(c).norm(), (&t * shifted1.column(c).into_owned()).norm());
        }
        let covered1 = numerics::subspace_sum(&n_bases[0], &shifted1, &tol);
        println!("covered1 {} cols", covered1.ncols());
        for c in 0..covered1.ncols() {
            println!("  covered1 {c}: Tres {:.3e}", (&t * covered1.column(c).into_owned()).norm());
        }
        let wq1 = numerics::orthonormalize(&covered1, &tol);
        let mut proj1 = n_bases[1].clone();
        if wq1.ncols() > 0 { proj1 -= &wq1 * (wq1.adjoint() * &n_bases[1]); }
        let p1svd = numerics::sorted_svd(&proj1, true, false);
        println!("proj1 singulars {:?}", p1svd.singular_values);
        let u1m = p1svd.u.unwrap();
        for k in 0..2 {
            println!("  u1 {k}: Tres {:.3e}", (&t * u1m.column(k).into_owned()).norm());
        }
        match indicial::germs::kernel_space(&pl.pencil, bad.sigma0, l_max, &tol, Some(bad.alg_mult)) {
            Ok(g) => println!("library kernel_space OK: {:?}", g.partial_mults),
            Err(e) => println!("library kernel_space ERR: {e}"),
        }
    }
}
