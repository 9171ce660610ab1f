use lrtomo_core::enet::soft_threshold;
use lrtomo_core::linalg::DenseMatrix;
use lrtomo_core::lsqr::LsqrStop;
use lrtomo_core::{
    assemble_design, elastic_net_penalty, lsqr_solve, objective, rmse, solve_elastic_net_ls, tr_reconstruct,
    CpFactors, ElasticNet, FactorMatrix, Image, Init, LsqrConfig, Mode, ScanGeometry, Sinogram,
    SparseSystemTensor, TrConfig,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn random_dense(rng: &mut StdRng, m: usize, n: usize) -> DenseMatrix {
    DenseMatrix::from_row_major(m, n, (0..m * n).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

fn to_na(a: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(a.rows(), a.cols(), a.as_slice())
}

fn random_vec(rng: &mut StdRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `||A w - s||^2 + rho((lambda-1)/2 ||w||^2 + (2-lambda)||w||_1)`, written out.
fn enet_objective(a: &DenseMatrix, s: &[f64], w: &[f64], rho: f64, lambda: f64) -> f64 {
    let r = a.matvec(w);
    let fit: f64 = r.iter().zip(s).map(|(x, y)| (x - y).powi(2)).sum();
    let l2: f64 = w.iter().map(|v| v * v).sum();
    let l1: f64 = w.iter().map(|v| v.abs()).sum();
    fit + rho * ((lambda - 1.0) / 2.0 * l2 + (2.0 - lambda) * l1)
}

fn system(k: usize, angles: usize) -> SparseSystemTensor {
    let nb = (2f64.sqrt() * k as f64).floor() as usize + 2;
    SparseSystemTensor::build(&ScanGeometry::full_coverage(k, angles, nb).unwrap())
}

fn random_factors(rng: &mut StdRng, k: usize, r: usize) -> CpFactors {
    let w1 = FactorMatrix::from_fn(k, r, |_, _| rng.gen_range(-1.0..1.0));
    let w2 = FactorMatrix::from_fn(k, r, |_, _| rng.gen_range(-1.0..1.0));
    CpFactors::new(w1, w2).unwrap()
}

// ------------------------------------------------------------ penalty

#[test]
fn penalty_closed_forms() {
    assert_eq!(elastic_net_penalty(&[1.0, -1.0], 1.0, 2.0).unwrap(), 1.0);
    assert_eq!(elastic_net_penalty(&[1.0, -1.0], 1.0, 1.0).unwrap(), 2.0);
    let want = 1e-5 * (0.25 * 9.0 + 0.5 * 3.0);
    assert!((elastic_net_penalty(&[3.0], 1e-5, 1.5).unwrap() - want).abs() < 1e-20);
    assert!(elastic_net_penalty(&[1.0], 1.0, 0.5).is_err());
    assert!(elastic_net_penalty(&[1.0], -1.0, 1.5).is_err());
}

// ------------------------------------------------------------ elastic net

#[test]
fn unpenalized_square_system_is_solved_exactly() {
    let mut rng = StdRng::seed_from_u64(21);
    for _ in 0..10 {
        let n = 6;
        let mut a = random_dense(&mut rng, n, n);
        for i in 0..n {
            *a.get_mut(i, i) += 3.0;
        }
        let s = random_vec(&mut rng, n);
        let want = to_na(&a).lu().solve(&DVector::from_vec(s.clone())).unwrap();
        let got = solve_elastic_net_ls(&a, &s, &ElasticNet::none(), &vec![0.0; n]).unwrap();
        assert!(max_abs_diff(&got, want.as_slice()) < 1e-8);
    }
}

#[test]
fn pure_ridge_matches_normal_equations() {
    let mut rng = StdRng::seed_from_u64(22);
    for _ in 0..20 {
        let (m, n) = (rng.gen_range(8..30), rng.gen_range(2..8));
        let a = random_dense(&mut rng, m, n);
        let s = random_vec(&mut rng, m);
        let rho = 10f64.powf(rng.gen_range(-3.0..1.0));
        let an = to_na(&a);
        let lhs = an.transpose() * &an * 2.0 + DMatrix::identity(n, n) * rho;
        let rhs = an.transpose() * DVector::from_vec(s.clone()) * 2.0;
        let want = lhs.lu().solve(&rhs).unwrap();
        let cfg = ElasticNet::new(rho, 2.0).unwrap();
        let got = solve_elastic_net_ls(&a, &s, &cfg, &vec![0.0; n]).unwrap();
        assert!(max_abs_diff(&got, want.as_slice()) < 1e-8);
    }
}

#[test]
fn identity_lasso_example() {
    let a = DenseMatrix::identity(3);
    // rho (2 - lambda) / 2 = 0.5 at lambda = 1.
    let got = solve_elastic_net_ls(&a, &[1.0, 0.1, -2.0], &ElasticNet::new(1.0, 1.0).unwrap(), &[0.0; 3]).unwrap();
    assert_eq!(got, vec![0.5, 0.0, -1.5]);
}

#[test]
fn pure_lasso_on_diagonal_design_matches_scalar_oracle() {
    let mut rng = StdRng::seed_from_u64(23);
    for _ in 0..20 {
        let n = rng.gen_range(2..10);
        let d: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
        let a = DenseMatrix::from_row_major(n, n, (0..n * n).map(|p| if p / n == p % n { d[p / n] } else { 0.0 }).collect());
        let s: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let rho = rng.gen_range(0.1..4.0);
        // min_x (d x - s)^2 + rho |x|  =>  x = sign(ds) max(|ds| - rho/2, 0) / d^2
        let want: Vec<f64> = (0..n)
            .map(|k| {
                let z = d[k] * s[k];
                z.signum() * (z.abs() - rho / 2.0).max(0.0) / (d[k] * d[k])
            })
            .collect();
        let got = solve_elastic_net_ls(&a, &s, &ElasticNet::new(rho, 1.0).unwrap(), &vec![0.0; n]).unwrap();
        assert!(max_abs_diff(&got, &want) < 1e-8);
    }
}

#[test]
fn soft_threshold_values() {
    assert_eq!(soft_threshold(3.0, 1.0), 2.0);
    assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
    assert_eq!(soft_threshold(1.0, 1.0), 0.0);
    assert_eq!(soft_threshold(-1.0, 1.0), 0.0);
    assert_eq!(soft_threshold(0.3, 1.0), 0.0);
}

#[test]
fn elastic_net_solution_survives_coordinate_perturbation() {
    let mut rng = StdRng::seed_from_u64(24);
    for _ in 0..10 {
        let (m, n) = (40, 12);
        let a = random_dense(&mut rng, m, n);
        let s = random_vec(&mut rng, m);
        let rho = rng.gen_range(0.1..3.0);
        let lambda = rng.gen_range(1.0..2.0);
        let w = solve_elastic_net_ls(&a, &s, &ElasticNet::new(rho, lambda).unwrap(), &vec![0.0; n]).unwrap();
        let base = enet_objective(&a, &s, &w, rho, lambda);
        for _ in 0..20 {
            let k = rng.gen_range(0..n);
            for delta in [1e-4, -1e-4] {
                let mut p = w.clone();
                p[k] += delta;
                assert!(enet_objective(&a, &s, &p, rho, lambda) >= base - 1e-9);
            }
        }
    }
}

// ------------------------------------------------------------ objective

#[test]
fn objective_matches_double_loop() {
    let mut rng = StdRng::seed_from_u64(31);
    let k = 4;
    let l = system(k, 5);
    let f = random_factors(&mut rng, k, 2);
    let s = random_vec(&mut rng, l.num_rays());
    let sino = Sinogram::new(5, l.num_rays() / 5, s.clone()).unwrap();
    let (rho, lambda) = (0.3, 1.4);
    let mut fit = 0.0;
    for (b, sb) in s.iter().enumerate() {
        let mut pred = 0.0;
        for (i, j, len) in l.ray(b) {
            for r in 0..2 {
                pred += len * f.w1().get(i, r) * f.w2().get(j, r);
            }
        }
        fit += (pred - sb).powi(2);
    }
    let mut pen = 0.0;
    for m in [f.w1(), f.w2()] {
        for col in m.columns() {
            let l2: f64 = col.iter().map(|v| v * v).sum();
            let l1: f64 = col.iter().map(|v| v.abs()).sum();
            pen += rho * ((lambda - 1.0) / 2.0 * l2 + (2.0 - lambda) * l1);
        }
    }
    let got = objective(&l, &sino, &f, &ElasticNet::new(rho, lambda).unwrap()).unwrap();
    assert!((got.datafit - fit).abs() <= 1e-12 * fit);
    assert!((got.penalty - pen).abs() <= 1e-12 * pen);
    assert!((got.total - (fit + pen)).abs() <= 1e-12 * (fit + pen));
}

#[test]
fn objective_of_zero_factors() {
    let l = system(4, 3);
    let na = 3;
    let nb = l.num_rays() / na;
    let zero = CpFactors::zeros(4, 2).unwrap();
    let cfg = ElasticNet::new(1.0, 1.5).unwrap();
    let o = objective(&l, &Sinogram::zeros(na, nb), &zero, &cfg).unwrap();
    assert_eq!((o.total, o.datafit, o.penalty), (0.0, 0.0, 0.0));
    let s: Vec<f64> = (0..l.num_rays()).map(|b| b as f64 * 0.1).collect();
    let o = objective(&l, &Sinogram::new(na, nb, s.clone()).unwrap(), &zero, &cfg).unwrap();
    assert!((o.datafit - s.iter().map(|v| v * v).sum::<f64>()).abs() < 1e-9);
    assert_eq!(o.penalty, 0.0);
}

// ------------------------------------------------------------ ALS

fn rank_one_truth(k: usize) -> Image {
    let u: Vec<f64> = (0..k).map(|i| 0.5 + (i as f64 * 0.7).sin().abs()).collect();
    let v: Vec<f64> = (0..k).map(|j| 0.3 + (j as f64 * 1.3).cos().abs()).collect();
    Image::from_fn(k, |i, j| u[i] * v[j])
}

#[test]
fn rank_one_exact_recovery() {
    let k = 8;
    let l = system(k, 20);
    let truth = rank_one_truth(k);
    let s = l.forward_project(&truth).unwrap();
    let out = tr_reconstruct(&l, &s, &TrConfig::new(1, ElasticNet::none()), Some(&truth)).unwrap();
    let err = rmse(&out.image, &truth).unwrap();
    assert!(err < 1e-4, "rmse {err}");
}

#[test]
fn zero_data_with_penalty_gives_zero_image() {
    let l = system(6, 8);
    let s = Sinogram::zeros(8, l.num_rays() / 8);
    let mut rng = StdRng::seed_from_u64(3);
    let mut cfg = TrConfig::new(2, ElasticNet::new(0.1, 1.5).unwrap());
    cfg.init = Init::Factors(random_factors(&mut rng, 6, 2));
    let out = tr_reconstruct(&l, &s, &cfg, None).unwrap();
    assert!(out.image.as_row_major().iter().all(|&v| v == 0.0));
    assert!(out.records[1..].iter().all(|r| r.objective == 0.0));
}

#[test]
fn als_records_are_well_formed_and_monotone() {
    let mut rng = StdRng::seed_from_u64(41);
    for trial in 0..6 {
        let k = 10;
        let l = system(k, 7);
        let truth = random_factors(&mut rng, k, 3).compose();
        let mut s = l.forward_project(&truth).unwrap();
        for v in s.values_mut() {
            *v += rng.gen_range(-0.05..0.05);
        }
        let lambda = [1.0, 1.5, 2.0][trial % 3];
        let cfg = TrConfig::new(1 + trial % 4, ElasticNet::new(1e-2, lambda).unwrap());
        let out = tr_reconstruct(&l, &s, &cfg, Some(&truth)).unwrap();
        assert!(!out.objective_increased);
        for (n, r) in out.records.iter().enumerate() {
            assert_eq!(r.iter, n);
            assert!((r.objective - (r.datafit + r.penalty)).abs() <= 1e-9 * r.objective.abs().max(1e-300));
        }
        for w in out.records.windows(2) {
            assert!(w[1].objective <= w[0].objective * (1.0 + 1e-7), "trial {trial}: {} -> {}", w[0].objective, w[1].objective);
        }
        let last = out.records.last().unwrap();
        assert_eq!(Some(rmse(&out.image, &truth).unwrap()), last.rmse);
    }
}

#[test]
fn last_half_step_is_coordinatewise_optimal() {
    let mut rng = StdRng::seed_from_u64(42);
    let k = 8;
    let l = system(k, 6);
    let truth = random_factors(&mut rng, k, 2).compose();
    let s = l.forward_project(&truth).unwrap();
    let (rho, lambda) = (0.05, 1.5);
    let cfg = TrConfig::new(2, ElasticNet::new(rho, lambda).unwrap());
    let out = tr_reconstruct(&l, &s, &cfg, None).unwrap();
    // The final half-step solved W2 with W1 fixed.
    let a = assemble_design(&l, out.factors.w1(), Mode::Second).unwrap();
    let w = out.factors.w2().as_vec().to_vec();
    let base = enet_objective(&a, s.values(), &w, rho, lambda);
    for _ in 0..20 {
        let c = rng.gen_range(0..w.len());
        for delta in [1e-4, -1e-4] {
            let mut p = w.clone();
            p[c] += delta;
            assert!(enet_objective(&a, s.values(), &p, rho, lambda) >= base - 1e-9);
        }
    }
}

#[test]
fn reconstruction_is_deterministic() {
    let l = system(8, 9);
    let truth = rank_one_truth(8);
    let s = l.forward_project(&truth).unwrap();
    let mut cfg = TrConfig::new(3, ElasticNet::new(1e-3, 1.2).unwrap());
    cfg.init = Init::Random(17);
    let a = tr_reconstruct(&l, &s, &cfg, Some(&truth)).unwrap();
    let b = tr_reconstruct(&l, &s, &cfg, Some(&truth)).unwrap();
    assert_eq!(a.records, b.records);
    assert_eq!(a.image, b.image);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn datafit_is_scale_invariant(seed in any::<u64>(), c in prop_oneof![-5.0f64..-0.2, 0.2f64..5.0]) {
        let mut rng = StdRng::seed_from_u64(seed);
        let k = 5;
        let l = system(k, 4);
        let f = random_factors(&mut rng, k, 2);
        let s = Sinogram::new(4, l.num_rays() / 4, random_vec(&mut rng, l.num_rays())).unwrap();
        let r = rng.gen_range(0..2);
        let mut w1 = f.w1().as_vec().to_vec();
        let mut w2 = f.w2().as_vec().to_vec();
        w1[r * k..(r + 1) * k].iter_mut().for_each(|v| *v *= c);
        w2[r * k..(r + 1) * k].iter_mut().for_each(|v| *v /= c);
        let g = CpFactors::new(FactorMatrix::from_vec(k, 2, w1).unwrap(), FactorMatrix::from_vec(k, 2, w2).unwrap()).unwrap();
        let cfg = ElasticNet::new(0.1, 1.5).unwrap();
        let a = objective(&l, &s, &f, &cfg).unwrap().datafit;
        let b = objective(&l, &s, &g, &cfg).unwrap().datafit;
        prop_assert!((a - b).abs() <= 1e-10 * a);
    }

    #[test]
    fn als_objective_never_rises(seed in any::<u64>(), rank in 1usize..4, lambda in 1.0f64..=2.0, rho in 0.0f64..0.5) {
        let mut rng = StdRng::seed_from_u64(seed);
        let k = 6;
        let l = system(k, 5);
        let truth = random_factors(&mut rng, k, 2).compose();
        let s = l.forward_project(&truth).unwrap();
        let mut cfg = TrConfig::new(rank, ElasticNet::new(rho, lambda).unwrap());
        cfg.max_iters = 30;
        let out = tr_reconstruct(&l, &s, &cfg, None).unwrap();
        for w in out.records.windows(2) {
            prop_assert!(w[1].objective <= w[0].objective + 1e-7 * w[0].objective.abs());
        }
    }
}

// ------------------------------------------------------------ LSQR

fn lsqr_tight(max_iters: usize) -> LsqrConfig {
    LsqrConfig { max_iters, atol: 1e-15, btol: 1e-15 }
}

#[test]
fn lsqr_identity_in_one_step() {
    let a = DenseMatrix::identity(5);
    let s = [1.0, -2.0, 0.5, 3.0, 0.0];
    let out = lsqr_solve(&a, &s, &LsqrConfig::default()).unwrap();
    assert_eq!(out.iterations, 1);
    assert!(max_abs_diff(&out.x, &s) < 1e-14);
}

#[test]
fn lsqr_matches_normal_equations_within_ten_iterations() {
    let mut rng = StdRng::seed_from_u64(51);
    let a = random_dense(&mut rng, 20, 10);
    let s = random_vec(&mut rng, 20);
    let an = to_na(&a);
    let want = (an.transpose() * &an).lu().solve(&(an.transpose() * DVector::from_vec(s.clone()))).unwrap();
    let out = lsqr_solve(&a, &s, &lsqr_tight(10)).unwrap();
    assert!(out.iterations <= 10);
    assert!(max_abs_diff(&out.x, want.as_slice()) < 1e-8);
}

#[test]
fn lsqr_matches_svd_minimum_norm_solutions() {
    let mut rng = StdRng::seed_from_u64(52);
    for trial in 0..20 {
        let n = rng.gen_range(5..=200);
        let m = match trial % 3 {
            0 => n + rng.gen_range(0..40),
            1 => rng.gen_range(2..n.max(3)),
            _ => n,
        };
        let mut a = random_dense(&mut rng, m, n);
        if trial % 4 == 3 {
            // Rank-deficient: product of thin random factors.
            let r = (m.min(n) / 2).max(1);
            let p = to_na(&random_dense(&mut rng, m, r)) * to_na(&random_dense(&mut rng, r, n));
            a = DenseMatrix::from_row_major(m, n, p.transpose().as_slice().to_vec());
        }
        let s = random_vec(&mut rng, m);
        let want = to_na(&a).svd(true, true).solve(&DVector::from_vec(s.clone()), 1e-10).unwrap();
        let out = lsqr_solve(&a, &s, &lsqr_tight(20 * n)).unwrap();
        let err = max_abs_diff(&out.x, want.as_slice());
        assert!(err < 1e-6, "trial {trial} ({m}x{n}): {err}");
    }
}

#[test]
fn lsqr_residual_never_increases_on_phantom_system() {
    let phantom = lrtomo_core::circle_triangle(64).unwrap();
    let l = SparseSystemTensor::build(&ScanGeometry::full_coverage(64, 30, 91).unwrap());
    let s = l.forward_project(&phantom.image).unwrap();
    let op = l.unfold_mode1();
    let out = lsqr_solve(&op, s.values(), &LsqrConfig::default()).unwrap();
    assert!(out.records.len() > 10);
    for w in out.records.windows(2) {
        assert!(w[1].datafit <= w[0].datafit * (1.0 + 1e-12));
    }
    assert!(matches!(out.stop, LsqrStop::IterationLimit | LsqrStop::Residual | LsqrStop::LeastSquares));
}
