use std::f64::consts::PI;

use lrtomo_core::linalg::{dot, LinearOperator};
use lrtomo_core::{default_angles, Image, ScanGeometry, Sinogram, SparseSystemTensor};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Length of the line `x cos + y sin = t` inside the box `[x0,x1] x [y0,y1]`,
/// from the line's crossings with the four box edges.
fn chord_in_box(theta: f64, t: f64, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    let (c, s) = (theta.cos(), theta.sin());
    let f = |p: (f64, f64)| p.0 * c + p.1 * s - t;
    let corners = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)];
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for e in 0..4 {
        let (p, q) = (corners[e], corners[(e + 1) % 4]);
        let (fp, fq) = (f(p), f(q));
        if fp == 0.0 {
            pts.push(p);
        }
        if fp * fq < 0.0 {
            let u = fp / (fp - fq);
            pts.push((p.0 + u * (q.0 - p.0), p.1 + u * (q.1 - p.1)));
        }
    }
    let mut best = 0.0_f64;
    for a in &pts {
        for b in &pts {
            best = best.max(((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt());
        }
    }
    best
}

/// Pixel `(i, j)` covers `x in [j - K/2, j - K/2 + 1]`, `y in [K/2 - i - 1, K/2 - i]`.
fn pixel_chord(k: usize, i: usize, j: usize, theta: f64, t: f64) -> f64 {
    let h = k as f64 / 2.0;
    let x0 = j as f64 - h;
    let y1 = h - i as f64;
    chord_in_box(theta, t, x0, x0 + 1.0, y1 - 1.0, y1)
}

fn dense(l: &SparseSystemTensor) -> Vec<Vec<f64>> {
    let k = l.grid_size();
    let mut m = vec![vec![0.0; k * k]; l.num_rays()];
    for e in l.entries() {
        m[e.ray][e.row * k + e.col] = e.length;
    }
    m
}

fn random_image(rng: &mut StdRng, k: usize) -> Image {
    Image::from_fn(k, |_, _| rng.gen_range(-1.0..1.0))
}

fn random_sinogram(rng: &mut StdRng, g: &ScanGeometry) -> Sinogram {
    let v = (0..g.num_rays()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Sinogram::new(g.num_angles(), g.num_beamlets(), v).unwrap()
}

#[test]
fn entries_match_pixel_chord_oracle() {
    let mut rng = StdRng::seed_from_u64(11);
    let k = 6;
    // Generic angles avoid lines passing exactly through grid corners.
    let angles: Vec<f64> = (0..7).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
    let g = ScanGeometry::with_unit_detector(k, angles.clone(), 11).unwrap();
    let l = SparseSystemTensor::build(&g);
    let m = dense(&l);
    for b in 0..l.num_rays() {
        let (a, tau) = g.ray_coords(b);
        let t = g.beamlet_offset(tau);
        for i in 0..k {
            for j in 0..k {
                let want = pixel_chord(k, i, j, angles[a], t);
                let got = m[b][i * k + j];
                assert!((want - got).abs() < 1e-10, "ray {b} pixel ({i},{j}): {got} vs {want}");
            }
        }
    }
}

#[test]
fn axis_aligned_ray_across_k4_grid_has_length_four() {
    let g = ScanGeometry::new(4, vec![0.0], 4, 2.0).unwrap();
    let l = SparseSystemTensor::build(&g);
    for b in 0..4 {
        let total: f64 = l.ray(b).map(|(_, _, len)| len).sum();
        assert!((total - 4.0).abs() < 1e-12);
    }
    let ones = Image::from_fn(4, |_, _| 1.0);
    let s = l.forward_project(&ones).unwrap();
    let h = 2.0;
    for (b, v) in s.values().iter().enumerate() {
        let want = chord_in_box(0.0, g.beamlet_offset(b), -h, h, -h, h);
        assert!((v - want).abs() < 1e-12);
    }
}

#[test]
fn mass_preservation_under_full_coverage() {
    let k = 16;
    let g = ScanGeometry::full_coverage(k, 13, 23).unwrap();
    let l = SparseSystemTensor::build(&g);
    let h = k as f64 / 2.0;
    let mut hit = 0;
    for b in 0..l.num_rays() {
        let (a, tau) = g.ray_coords(b);
        let want = chord_in_box(g.angles()[a], g.beamlet_offset(tau), -h, h, -h, h);
        let got: f64 = l.ray(b).map(|(_, _, len)| len).sum();
        assert!((want - got).abs() < 1e-10, "ray {b}: {got} vs {want}");
        hit += usize::from(want > 0.0);
    }
    assert!(hit > l.num_rays() / 2);
}

#[test]
fn every_length_at_most_pixel_diagonal() {
    let g = ScanGeometry::full_coverage(20, 17, 31).unwrap();
    let l = SparseSystemTensor::build(&g);
    assert!(l.entries().all(|e| e.length > 0.0 && e.length <= 2f64.sqrt() + 1e-12));
}

#[test]
fn rotation_by_pi_reverses_beamlets() {
    let k = 12;
    let nb = 19;
    let base = default_angles(6);
    let mut angles = base.clone();
    angles.extend(base.iter().map(|a| a + PI));
    let g = ScanGeometry::with_unit_detector(k, angles, nb).unwrap();
    let l = SparseSystemTensor::build(&g);
    let mut rng = StdRng::seed_from_u64(5);
    // Centrally symmetric: W[i,j] = W[K-1-i, K-1-j].
    let half = random_image(&mut rng, k);
    let w = Image::from_fn(k, |i, j| half.get(i, j) + half.get(k - 1 - i, k - 1 - j));
    let s = l.forward_project(&w).unwrap();
    for a in 0..base.len() {
        for tau in 0..nb {
            let x = s.get(a, tau);
            let y = s.get(a + base.len(), nb - 1 - tau);
            assert!((x - y).abs() < 1e-8, "angle {a} beamlet {tau}: {x} vs {y}");
        }
    }
}

#[test]
fn unfold_agrees_with_forward_projection() {
    let k = 10;
    let g = ScanGeometry::full_coverage(k, 9, 15).unwrap();
    let l = SparseSystemTensor::build(&g);
    let m = l.unfold_mode1();
    let mut rng = StdRng::seed_from_u64(99);
    for _ in 0..100 {
        let w = random_image(&mut rng, k);
        let via_matrix = m.matvec(&w.vec_column_major());
        let via_tensor = l.forward_project(&w).unwrap();
        let scale = via_tensor.values().iter().map(|v| v * v).sum::<f64>().sqrt();
        let err = via_matrix
            .iter()
            .zip(via_tensor.values())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(err <= 1e-12 * scale, "relative error {}", err / scale);
    }
}

#[test]
fn adjoint_matches_dense_transpose() {
    let k = 7;
    let g = ScanGeometry::full_coverage(k, 5, 11).unwrap();
    let l = SparseSystemTensor::build(&g);
    let m = dense(&l);
    let mut rng = StdRng::seed_from_u64(3);
    let s = random_sinogram(&mut rng, &g);
    let bp = l.back_project(&s).unwrap();
    for i in 0..k {
        for j in 0..k {
            let want: f64 = (0..l.num_rays()).map(|b| m[b][i * k + j] * s.values()[b]).sum();
            assert!((bp.get(i, j) - want).abs() < 1e-12);
        }
    }
}

#[test]
fn operator_view_matches_tensor_view() {
    let k = 6;
    let g = ScanGeometry::full_coverage(k, 4, 9).unwrap();
    let l = SparseSystemTensor::build(&g);
    let mut rng = StdRng::seed_from_u64(8);
    let w = random_image(&mut rng, k);
    let mut y = vec![0.0; l.nrows()];
    l.apply(&w.vec_column_major(), &mut y);
    assert_eq!(y, l.forward_project(&w).unwrap().values());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adjoint_identity(seed in any::<u64>(), k in 1usize..12, na in 1usize..8, nb in 1usize..20) {
        let g = ScanGeometry::with_unit_detector(k, default_angles(na), nb).unwrap();
        let l = SparseSystemTensor::build(&g);
        let mut rng = StdRng::seed_from_u64(seed);
        let w = random_image(&mut rng, k);
        let s = random_sinogram(&mut rng, &g);
        let lhs = dot(l.forward_project(&w).unwrap().values(), s.values());
        let rhs = dot(w.as_row_major(), l.back_project(&s).unwrap().as_row_major());
        let bound = 1e-10 * (w.frobenius_norm() * dot(s.values(), s.values()).sqrt() + 1.0);
        prop_assert!((lhs - rhs).abs() <= bound);
    }

    #[test]
    fn projection_is_linear(seed in any::<u64>(), alpha in -3.0f64..3.0) {
        let g = ScanGeometry::full_coverage(5, 3, 8).unwrap();
        let l = SparseSystemTensor::build(&g);
        let mut rng = StdRng::seed_from_u64(seed);
        let a = random_image(&mut rng, 5);
        let b = random_image(&mut rng, 5);
        let combo = Image::from_fn(5, |i, j| alpha * a.get(i, j) + b.get(i, j));
        let sa = l.forward_project(&a).unwrap();
        let sb = l.forward_project(&b).unwrap();
        let sc = l.forward_project(&combo).unwrap();
        for r in 0..sc.len() {
            prop_assert!((sc.values()[r] - (alpha * sa.values()[r] + sb.values()[r])).abs() < 1e-12);
        }
    }

    #[test]
    fn entries_sorted_unique_positive(k in 1usize..10, na in 1usize..6, nb in 1usize..16) {
        let g = ScanGeometry::with_unit_detector(k, default_angles(na), nb).unwrap();
        let l = SparseSystemTensor::build(&g);
        let mut prev: Option<(usize, usize, usize)> = None;
        for e in l.entries() {
            prop_assert!(e.length > 1e-12);
            let key = (e.ray, e.row, e.col);
            if let Some(p) = prev {
                prop_assert!(p < key);
            }
            prev = Some(key);
        }
    }
}
