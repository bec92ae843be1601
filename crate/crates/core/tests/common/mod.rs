//! Oracles and case generators shared by the integration tests and the
//! acceptance target.

#![allow(dead_code)]

use dnsp_core::checkers::DnspContext;
use dnsp_core::dictionary::{gaussian_dictionary, perturbed_onb_dictionary};
use dnsp_core::linalg::{kernel_basis, rank, solve, DEFAULT_RANK_TOL};
use dnsp_core::lp::{solve_lp, LinearProgram, LpStatus, DEFAULT_FEAS_TOL, DEFAULT_OPT_TOL};
use dnsp_core::matrix::{norm2, scale_vec, sub_vec};
use dnsp_core::recovery::{
    best_k_term_residual, brute_force_recovery_oracle, l1_synthesis_denoise, l1_synthesis_exact, AdmmParams,
    RecoveryProblem,
};
use dnsp_core::rng::{gaussian_matrix, gaussian_vec, seeded, uniform, uniform_usize};
use dnsp_core::{DenseMatrix, SupportSet};

/// Brute-force answer for a standard-form LP.
#[derive(Debug, Clone, PartialEq)]
pub enum VertexAnswer {
    Infeasible,
    Unbounded,
    Optimal(f64),
}

/// Basic solutions of `E_B x_B = f` over every column subset of size `rank(E)`.
fn basic_points(e: &DenseMatrix, f: &[f64]) -> Vec<Vec<f64>> {
    let (m, n) = e.shape();
    let mut out = Vec::new();
    for b in SupportSet::all_of_size(n, m) {
        let eb = e.select_columns(b.indices()).unwrap();
        let Ok(xb) = solve(&eb, &DenseMatrix::column_vector(f).unwrap()) else {
            continue;
        };
        let mut x = vec![0.0; n];
        for (&j, v) in b.indices().iter().zip(xb.as_slice()) {
            x[j] = *v;
        }
        let resid = norm2(&sub_vec(&e.mul_vec(&x), f));
        if resid <= 1e-9 * (1.0 + norm2(f)) && x.iter().all(|v| *v >= -1e-10) {
            out.push(x);
        }
    }
    out
}

/// Vertex and extreme-ray enumeration. `E` must have full row rank.
pub fn vertex_oracle(lp: &LinearProgram) -> VertexAnswer {
    let vertices = basic_points(&lp.constraints, &lp.rhs);
    if vertices.is_empty() {
        return VertexAnswer::Infeasible;
    }
    // Extreme rays of {r ≥ 0 : Er = 0} normalized by Σr = 1.
    let n = lp.n_vars();
    let mut rows: Vec<Vec<f64>> = (0..lp.n_eq()).map(|i| lp.constraints.row(i).to_vec()).collect();
    rows.push(vec![1.0; n]);
    let mut rhs = vec![0.0; lp.n_eq()];
    rhs.push(1.0);
    let ray_sys = DenseMatrix::from_rows(&rows).unwrap();
    let dot = |x: &[f64]| x.iter().zip(&lp.objective).map(|(a, b)| a * b).sum::<f64>();
    if basic_points(&ray_sys, &rhs).iter().any(|r| dot(r) < -1e-9) {
        return VertexAnswer::Unbounded;
    }
    VertexAnswer::Optimal(vertices.iter().map(|v| dot(v)).fold(f64::INFINITY, f64::min))
}

/// A random LP with at most 6 variables and 4 full-rank equality rows.
/// Every third one is built to be infeasible-prone, and costs are left
/// free so some come out unbounded.
pub fn random_lp(seed: u64) -> LinearProgram {
    let mut rng = seeded(seed);
    let n = uniform_usize(&mut rng, 2, 6);
    let m = uniform_usize(&mut rng, 1, 4.min(n - 1));
    let e = loop {
        let e = gaussian_matrix(&mut rng, m, n);
        if rank(&e, DEFAULT_RANK_TOL).unwrap() == m {
            break e;
        }
    };
    let x: Vec<f64> = (0..n)
        .map(|i| {
            let u = uniform(&mut rng);
            if seed % 3 == 0 {
                u - 0.7
            } else if i % 2 == 0 {
                u
            } else {
                0.0
            }
        })
        .collect();
    let f = e.mul_vec(&x);
    let c = match seed % 4 {
        // Nonnegative cost plus a multiple of the row space: always bounded.
        0 | 1 => {
            let lam = gaussian_vec(&mut rng, m);
            let shift = e.tr_mul_vec(&lam);
            (0..n).map(|i| uniform(&mut rng) + shift[i]).collect()
        }
        _ => gaussian_vec(&mut rng, n),
    };
    LinearProgram::new(c, e, f).unwrap()
}

/// Compares the simplex verdict with the oracle. `Ok(label)` names the status.
pub fn lp_case(seed: u64) -> Result<&'static str, String> {
    let lp = random_lp(seed);
    let sol = solve_lp(&lp, DEFAULT_FEAS_TOL, DEFAULT_OPT_TOL).map_err(|e| e.to_string())?;
    match (vertex_oracle(&lp), sol.status) {
        (VertexAnswer::Infeasible, LpStatus::Infeasible) => Ok("infeasible"),
        (VertexAnswer::Unbounded, LpStatus::Unbounded) => Ok("unbounded"),
        (VertexAnswer::Optimal(v), LpStatus::Optimal) => {
            let x_ok = sol.x.iter().all(|x| *x >= -1e-9)
                && norm2(&sub_vec(&lp.constraints.mul_vec(&sol.x), &lp.rhs)) <= 1e-8 * (1.0 + norm2(&lp.rhs));
            if (v - sol.objective_value).abs() <= 1e-8 * (1.0 + v.abs()) && x_ok {
                Ok("optimal")
            } else {
                Err(format!("seed {seed}: oracle {v}, simplex {} (x feasible: {x_ok})", sol.objective_value))
            }
        }
        (o, s) => Err(format!("seed {seed}: oracle {o:?}, simplex {s:?}")),
    }
}

/// ADMM at a tiny ε against the exact LP. Returns `‖ẑ_admm − ẑ_lp‖₂`.
pub fn denoiser_gap(seed: u64) -> Result<f64, String> {
    let mut rng = seeded(seed);
    let d = uniform_usize(&mut rng, 2, 5);
    let n = uniform_usize(&mut rng, d, d + 3);
    let m = uniform_usize(&mut rng, 1, d);
    let k = uniform_usize(&mut rng, 1, 2.min(n));
    let dict = gaussian_dictionary(d, n, rand::Rng::random(&mut rng)).map_err(|e| e.to_string())?;
    let a = gaussian_matrix(&mut rng, m, d);
    let mut z0 = vec![0.0; n];
    for _ in 0..k {
        z0[uniform_usize(&mut rng, 0, n - 1)] = 1.0 + uniform(&mut rng);
    }
    let y = a.matmul(dict.matrix()).unwrap().mul_vec(&z0);
    let exact = l1_synthesis_exact(&RecoveryProblem::new(a.clone(), dict.matrix().clone(), y.clone(), 0.0).unwrap())
        .map_err(|e| e.to_string())?;
    let p = RecoveryProblem::new(a, dict.matrix().clone(), y, 1e-8).unwrap();
    let admm = l1_synthesis_denoise(&p, &AdmmParams::default()).map_err(|e| e.to_string())?;
    Ok(norm2(&sub_vec(&admm.z_hat, &exact.z_hat)))
}

/// `rank + nullity = cols`, orthonormal kernel, `MK ≈ 0`. The matrix is a
/// product of Gaussians so its rank is random.
pub fn rank_nullity_case(rows: usize, cols: usize, inner: usize, seed: u64) -> Result<(), String> {
    let mut rng = seeded(seed);
    let m = gaussian_matrix(&mut rng, rows, inner).matmul(&gaussian_matrix(&mut rng, inner, cols)).unwrap();
    let r = rank(&m, DEFAULT_RANK_TOL).map_err(|e| e.to_string())?;
    let ker = kernel_basis(&m, DEFAULT_RANK_TOL).map_err(|e| e.to_string())?;
    if r + ker.dim() != cols {
        return Err(format!("rank {r} + nullity {} != {cols}", ker.dim()));
    }
    if r != rows.min(cols).min(inner) {
        return Err(format!("rank {r} for a generic product through {inner}"));
    }
    let scale = m.frobenius_norm().max(1.0);
    for (i, u) in ker.vectors.iter().enumerate() {
        if norm2(&m.mul_vec(u)) > 1e-9 * scale {
            return Err("kernel vector not annihilated".into());
        }
        for (j, w) in ker.vectors.iter().enumerate() {
            let ip: f64 = u.iter().zip(w).map(|(a, b)| a * b).sum();
            let want = if i == j { 1.0 } else { 0.0 };
            if (ip - want).abs() > 1e-9 {
                return Err(format!("basis Gram entry ({i},{j}) = {ip}"));
            }
        }
    }
    Ok(())
}

/// A random instance with a nontrivial `ker(AD)` not inside `ker D`, and a
/// vector from it.
pub fn margin_instance(seed: u64) -> Option<(DnspContext, Vec<f64>, SupportSet)> {
    let mut rng = seeded(seed);
    let d = uniform_usize(&mut rng, 2, 4);
    let n = uniform_usize(&mut rng, d, d + 2);
    let m = uniform_usize(&mut rng, 1, d - 1);
    let dict = gaussian_matrix(&mut rng, d, n);
    let a = gaussian_matrix(&mut rng, m, d);
    let ctx = DnspContext::new(&a, &dict, DEFAULT_RANK_TOL).ok()?;
    let theta = gaussian_vec(&mut rng, ctx.ker_ad.dim());
    let v = ctx.ker_ad.combine(&theta);
    if norm2(&dict.mul_vec(&v)) < 1e-6 * norm2(&v) {
        return None;
    }
    let size = uniform_usize(&mut rng, 1, 2.min(n));
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..size {
        let j = uniform_usize(&mut rng, i, n - 1);
        idx.swap(i, j);
    }
    idx.truncate(size);
    Some((ctx, v, SupportSet::new(idx, n).unwrap()))
}

/// `margin(λv) = |λ| margin(v)` for `λ` of either sign.
pub fn margin_case(seed: u64, lambda: f64) -> Result<(), String> {
    let Some((ctx, v, t)) = margin_instance(seed) else {
        return Ok(());
    };
    let base = ctx.margin(&v, &t).map_err(|e| e.to_string())?;
    let scaled = ctx.margin(&scale_vec(&v, lambda), &t).map_err(|e| e.to_string())?;
    let flipped = ctx.margin(&scale_vec(&v, -1.0), &t).map_err(|e| e.to_string())?;
    let tol = 1e-8 * (1.0 + lambda.abs()) * (1.0 + base.abs());
    if (scaled - lambda.abs() * base).abs() > tol {
        return Err(format!("margin({lambda}·v) = {scaled}, |λ|·margin(v) = {}", lambda.abs() * base));
    }
    if (flipped - base).abs() > 1e-8 * (1.0 + base.abs()) {
        return Err(format!("margin(-v) = {flipped}, margin(v) = {base}"));
    }
    Ok(())
}

/// `σ_k` is nonincreasing in `k`, starts at `‖z‖₁` and ends at zero.
pub fn sigma_case(z: &[f64]) -> Result<(), String> {
    let n = z.len();
    let l1: f64 = z.iter().map(|x| x.abs()).sum();
    if (best_k_term_residual(z, 0) - l1).abs() > 1e-12 * (1.0 + l1) {
        return Err("sigma_0 differs from the l1 norm".into());
    }
    if best_k_term_residual(z, n) != 0.0 {
        return Err("sigma_n is not zero".into());
    }
    for k in 0..n {
        let (a, b) = (best_k_term_residual(z, k), best_k_term_residual(z, k + 1));
        if b > a + 1e-12 {
            return Err(format!("sigma_{} = {b} > sigma_{k} = {a}", k + 1));
        }
    }
    Ok(())
}

/// Seeded constructions produce identical output on a second call.
pub fn reproducibility_case(seed: u64) -> Result<(), String> {
    let mut rng = seeded(seed);
    let d = uniform_usize(&mut rng, 2, 5);
    let n = uniform_usize(&mut rng, d, d + 3);
    let g1 = gaussian_dictionary(d, n, seed).map_err(|e| e.to_string())?;
    let g2 = gaussian_dictionary(d, n, seed).map_err(|e| e.to_string())?;
    if g1.matrix() != g2.matrix() {
        return Err("gaussian dictionary not reproducible".into());
    }
    if seed % 10 == 0 {
        let p1 = perturbed_onb_dictionary(d, 0.1, seed).map_err(|e| e.to_string())?;
        let p2 = perturbed_onb_dictionary(d, 0.1, seed).map_err(|e| e.to_string())?;
        if p1.matrix() != p2.matrix() {
            return Err("perturbed ONB not reproducible".into());
        }
    }
    if seed % 5 == 0 {
        let a = gaussian_matrix(&mut seeded(seed ^ 1), d - 1, d);
        let o1 = brute_force_recovery_oracle(&a, g1.matrix(), 1, 2, seed).map_err(|e| e.to_string())?;
        let o2 = brute_force_recovery_oracle(&a, g1.matrix(), 1, 2, seed).map_err(|e| e.to_string())?;
        if o1.success != o2.success || o1.trials != o2.trials {
            return Err("oracle not reproducible".into());
        }
    }
    Ok(())
}
