use std::f64::consts::PI;

use mplab::law::{
    ac_mass, classical_locations, density, edge_asymptotic, edge_newton, edge_report, integrated_density, law_derived,
    mp_edges, mp_stieltjes, quartic, solve_self_consistent, upper_quantile, EdgeSide, LawParams,
};
use num_complex::Complex64;
use proptest::prelude::*;

fn cx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Weierstrass / Durand–Kerner iteration on the monic quartic.
fn durand_kerner(z: Complex64, a: f64, c: f64) -> Vec<Complex64> {
    let coeffs = [cx(1.0, 0.0), z + a, z + c * a * a, 2.0 * a * c * z, c * z * z];
    let lead = coeffs[4];
    let p = |w: Complex64| {
        let mut acc = cx(0.0, 0.0);
        for k in (0..5).rev() {
            acc = acc * w + coeffs[k] / lead;
        }
        acc
    };
    let bound = 1.0 + coeffs.iter().take(4).map(|k| (k / lead).norm()).fold(0.0, f64::max);
    let seed = cx(0.4, 0.9);
    let mut r: Vec<Complex64> = (0..4).map(|k| seed.powu(k as u32) * bound * 0.5).collect();
    for _ in 0..2000 {
        let mut delta = 0.0f64;
        for i in 0..4 {
            let mut den = cx(1.0, 0.0);
            for j in 0..4 {
                if i != j {
                    den *= r[i] - r[j];
                }
            }
            let step = p(r[i]) / den;
            r[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-15 {
            break;
        }
    }
    r
}

fn mp_density(e: f64, d: f64) -> f64 {
    let (lm, lp) = mp_edges(d);
    if e <= lm || e >= lp {
        return 0.0;
    }
    ((lp - e) * (e - lm)).sqrt() / (2.0 * PI * e)
}

/// Determinant by Gaussian elimination with partial pivoting.
fn det(mut m: Vec<Vec<f64>>) -> f64 {
    let n = m.len();
    let mut sign = 1.0;
    for k in 0..n {
        let piv = (k..n).max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs())).unwrap();
        if m[piv][k] == 0.0 {
            return 0.0;
        }
        if piv != k {
            m.swap(piv, k);
            sign = -sign;
        }
        for i in k + 1..n {
            let f = m[i][k] / m[k][k];
            for j in k..n {
                m[i][j] -= f * m[k][j];
            }
        }
    }
    sign * (0..n).map(|i| m[i][i]).product::<f64>()
}

/// Resultant of `P` and `P'` for real `E` (proportional to the discriminant).
fn discriminant(e: f64, a: f64, c: f64) -> f64 {
    let p = [c * e * e, 2.0 * a * c * e, e + c * a * a, e + a, 1.0]; // highest first
    let dp = [4.0 * p[0], 3.0 * p[1], 2.0 * p[2], p[3]];
    let mut rows = Vec::new();
    for shift in 0..3 {
        let mut row = vec![0.0; 7];
        row[shift..shift + 5].copy_from_slice(&p);
        rows.push(row);
    }
    for shift in 0..4 {
        let mut row = vec![0.0; 7];
        row[shift..shift + 4].copy_from_slice(&dp);
        rows.push(row);
    }
    det(rows)
}

#[test]
fn stieltjes_root_near_mp_at_i() {
    let params = LawParams::new(1.0, 10.0, 1.0, 0.0).unwrap();
    let z = cx(0.0, 1.0);
    let sol = solve_self_consistent(z, &params).unwrap();
    assert!(sol.residual <= 1e-12);
    assert!(sol.w.im > 0.0);
    let m = mp_stieltjes(z, 1.0).unwrap();
    assert!((sol.w - m).norm() <= 0.02);

    let oracle = durand_kerner(z, params.a(), params.c4());
    let nearest = oracle.iter().map(|r| (r - sol.w).norm()).fold(f64::INFINITY, f64::min);
    assert!(nearest < 1e-10, "companion root {} not among oracle roots {oracle:?}", sol.w);
    // the oracle agrees that exactly one root lies in the upper half-plane near m_MP
    let close: Vec<_> = oracle.iter().filter(|r| r.im > 0.0 && (*r - m).norm() < 0.1).collect();
    assert_eq!(close.len(), 1);
}

#[test]
fn all_roots_agree_with_independent_solver() {
    for (d, q, s4) in [(1.0, 5.0, 1.0), (2.0, 10.0, 1.0), (4.0, 5.0, 1.0), (1.5, 31.6, 1.0)] {
        let params = LawParams::new(d, q, s4, 0.0).unwrap();
        for z in [cx(0.5, 0.01), cx(2.0, 1.0), cx(5.0, 0.2), cx(1.0, 2.9)] {
            let sol = solve_self_consistent(z, &params).unwrap();
            let oracle = durand_kerner(z, params.a(), params.c4());
            for r in &sol.all_roots {
                let dist = oracle.iter().map(|o| (o - r).norm() / (1.0 + r.norm())).fold(f64::INFINITY, f64::min);
                assert!(dist < 1e-8, "d={d} q={q} z={z}: {r} missing from {oracle:?}");
            }
        }
    }
}

#[test]
fn density_matches_mp_closed_form() {
    let params = LawParams::marchenko_pastur(1.0).unwrap();
    assert!((density(2.0, &params).unwrap() - 1.0 / (2.0 * PI)).abs() < 1e-12);
    for d in [1.0, 2.0, 4.0] {
        let params = LawParams::marchenko_pastur(d).unwrap();
        let (lm, lp) = mp_edges(d);
        for k in 1..40 {
            let e = lm.max(0.05) + (lp - lm.max(0.05)) * k as f64 / 40.0;
            let got = density(e, &params).unwrap();
            assert!((got - mp_density(e, d)).abs() < 1e-11, "d={d} E={e}");
        }
    }
}

#[test]
fn density_vanishes_outside_support() {
    for (d, q) in [(1.0, 10.0), (2.0, 5.0), (4.0, 10.0)] {
        let params = LawParams::new(d, q, 1.0, 0.0).unwrap();
        let lp = edge_report(&params).unwrap().l_plus;
        for e in [lp + 0.1, lp + 0.5, lp + 1.0] {
            assert_eq!(density(e, &params).unwrap(), 0.0);
        }
    }
}

#[test]
fn density_rejects_hard_edge() {
    let params = LawParams::new(1.0, 10.0, 1.0, 0.0).unwrap();
    assert!(density(0.0, &params).is_err());
    assert!(density(-1.0, &params).is_err());
    assert!(density(0.005, &params).is_err());
}

#[test]
fn density_is_small_eta_limit() {
    let params = LawParams::new(2.0, 10.0, 1.0, 0.0).unwrap();
    for e in [0.3, 1.0, 2.0, 2.8] {
        let direct = density(e, &params).unwrap();
        let w = solve_self_consistent(cx(e, 1e-9), &params).unwrap().w;
        assert!((direct - w.im / PI).abs() < 1e-6, "E={e}: {direct} vs {}", w.im / PI);
    }
}

#[test]
fn square_root_decay_at_upper_edge() {
    for d in [1.0, 2.0] {
        let params = LawParams::new(d, 10.0, 1.0, 0.0).unwrap();
        let lp = edge_report(&params).unwrap().l_plus;
        let ratios: Vec<f64> =
            [1e-2, 1e-3, 1e-4].iter().map(|&eps: &f64| density(lp - eps, &params).unwrap() / eps.sqrt()).collect();
        let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
        let min = ratios.iter().cloned().fold(f64::MAX, f64::min);
        assert!(min > 0.0 && max / min < 2.0, "d={d}: {ratios:?}");
    }
}

#[test]
fn upper_edge_brackets_discriminant_sign_change() {
    let params = LawParams::new(1.0, 10.0, 1.0, 0.0).unwrap();
    let (a, c) = (params.a(), params.c4());
    let (mut lo, mut hi) = (4.0, 4.1);
    let (flo, fhi) = (discriminant(lo, a, c), discriminant(hi, a, c));
    assert!(flo.signum() != fhi.signum());
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if discriminant(mid, a, c).signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let oracle = 0.5 * (lo + hi);
    let edge = edge_newton(&params, EdgeSide::Plus).unwrap();
    assert!((edge.location - oracle).abs() < 1e-9, "{} vs {oracle}", edge.location);
    // the exact edge sits 7.7e-4 below the first-order value 4.04, inside 10 q^-4
    assert!((edge.location - 4.039234).abs() <= 1e-6, "{}", edge.location);
    assert!((edge.location - 4.04).abs() <= 10.0 * 1e-4);
}

#[test]
fn mp_edges_at_zero_cumulant() {
    for d in [1.0, 1.5, 2.0, 4.0] {
        let params = LawParams::marchenko_pastur(d).unwrap();
        let e = edge_newton(&params, EdgeSide::Plus).unwrap();
        let (lm, lp) = mp_edges(d);
        assert!((e.location - lp).abs() <= 1e-12);
        assert!((e.tau + 1.0 / (1.0 + 1.0 / d.sqrt())).abs() <= 1e-10);
        if d > 1.0 {
            let m = edge_newton(&params, EdgeSide::Minus).unwrap();
            assert!((m.location - lm).abs() <= 1e-12);
        }
    }
    assert!(edge_newton(&LawParams::marchenko_pastur(1.0).unwrap(), EdgeSide::Minus).is_err());
}

#[test]
fn asymptotic_edge_values() {
    let p = LawParams::new(1.0, 10.0, 1.0, 0.0).unwrap();
    let asym = edge_asymptotic(&p).unwrap();
    assert!((asym.l_plus - 4.04).abs() < 1e-12);
    assert!((asym.l_dot + 0.08).abs() < 1e-12);
    let p = LawParams::new(2.0, 20.0, 1.0, 0.0).unwrap();
    let lp = (1.0 + 0.5f64.sqrt()).powi(2);
    let expected = lp + 0.5f64.sqrt() * lp / 400.0;
    assert!((edge_asymptotic(&p).unwrap().l_plus - expected).abs() < 1e-12);
    assert!((edge_asymptotic(&p).unwrap().l_plus - 2.919366).abs() < 1e-6);
    let late = LawParams::new(2.0, 20.0, 1.0, 30.0).unwrap();
    assert!((edge_asymptotic(&late).unwrap().l_plus - mp_edges(2.0).1).abs() < 1e-20 + 1e-12);
}

#[test]
fn edge_consistency_with_flow() {
    for d in [1.0, 1.5, 2.0, 4.0] {
        for q in [10.0, 20.0, 50.0] {
            for t in [0.0, 0.5, 2.0] {
                let p = LawParams::new(d, q, 1.0, t).unwrap();
                let newton = edge_newton(&p, EdgeSide::Plus).unwrap().location;
                let asym = edge_asymptotic(&p).unwrap().l_plus;
                let q_t = p.q_t();
                let bound = 10.0 * q_t.powi(-4) * (-2.0 * t).exp();
                assert!((newton - asym).abs() <= bound, "d={d} q={q} t={t}: {newton} vs {asym}");
            }
        }
    }
}

#[test]
fn flow_edge_decreasing_and_slope() {
    for q in [10.0, 20.0, 50.0] {
        let base = LawParams::new(2.0, q, 1.0, 0.0).unwrap();
        let lp = mp_edges(2.0).1;
        let locs: Vec<f64> = [0.0, 0.5, 1.0, 2.0, 4.0]
            .iter()
            .map(|&t| edge_newton(&base.with_t(t).unwrap(), EdgeSide::Plus).unwrap().location)
            .collect();
        for w in locs.windows(2) {
            assert!(w[1] < w[0]);
        }
        assert!(locs.iter().all(|&l| l > lp));
        if q >= 20.0 {
            let h = 1e-4;
            let plus = edge_newton(&base.with_t(h).unwrap(), EdgeSide::Plus).unwrap().location;
            let slope = (plus - locs[0]) / h;
            let ldot = edge_asymptotic(&base).unwrap().l_dot;
            assert!(((slope - ldot) / ldot).abs() < 0.2, "q={q}: {slope} vs {ldot}");
        }
    }
}

#[test]
fn normalization_at_large_imaginary_part() {
    for d in [1.0, 1.5, 2.0, 4.0] {
        for q in [5.0, 10.0, 31.6] {
            for s4 in [0.0, 1.0] {
                let p = LawParams::new(d, q, s4, 0.0).unwrap();
                for y in [1e3, 1e4, 1e6] {
                    let z = cx(0.0, y);
                    let w = solve_self_consistent(z, &p).unwrap().w;
                    assert!((z * w + 1.0).norm() <= 2.0 / y, "d={d} q={q} y={y}");
                }
            }
        }
    }
}

#[test]
fn absolutely_continuous_mass() {
    for (d, q, s4) in [(1.0, 10.0, 1.0), (1.0, 5.0, 0.0), (2.0, 10.0, 1.0), (2.0, 5.0, 0.0), (4.0, 5.0, 1.0)] {
        let p = LawParams::new(d, q, s4, 0.0).unwrap();
        let mass = ac_mass(&p, 1e-9).unwrap();
        assert!((mass - 1.0 / d).abs() <= 1e-6, "d={d} q={q} s4={s4}: {mass}");
        let total = integrated_density(-1.0, 100.0, &p).unwrap();
        assert!((total - 1.0).abs() <= 1e-6);
    }
}

#[test]
fn integrated_mp_density_closed_form() {
    let p = LawParams::marchenko_pastur(1.0).unwrap();
    let got = integrated_density(2.0, 4.0, &p).unwrap();
    let closed = 0.5 - 1.0 / PI;
    // oracle: midpoint rule in θ with E = 4 sin²θ, where ρ dE = (4/π) cos²θ dθ
    let (t0, t1) = ((0.5f64).sqrt().asin(), PI / 2.0);
    let n = 200_000;
    let h = (t1 - t0) / n as f64;
    let oracle: f64 = (0..n).map(|k| (4.0 / PI) * (t0 + (k as f64 + 0.5) * h).cos().powi(2) * h).sum();
    assert!((closed - oracle).abs() < 1e-9);
    assert!((got - closed).abs() < 1e-8, "{got} vs {closed}");
}

#[test]
fn classical_location_inverts_integrated_density() {
    let p = LawParams::marchenko_pastur(1.0).unwrap();
    let gamma = upper_quantile(0.5 - 1.0 / PI, &p).unwrap();
    assert!((gamma - 2.0).abs() <= 1e-6, "{gamma}");
}

#[test]
fn classical_locations_properties() {
    for (d, q) in [(1.0, 10.0), (2.0, 10.0), (2.0, 5.0)] {
        let p = LawParams::new(d, q, 1.0, 0.0).unwrap();
        let n = 1000;
        let lp = edge_report(&p).unwrap().l_plus;
        let g = classical_locations(20, n, &p).unwrap();
        assert!(g[0] < lp);
        let top = integrated_density(g[0], lp + 1.0, &p).unwrap();
        assert!((top - 1.0 / n as f64).abs() <= 1e-9, "{top}");
        for w in g.windows(2) {
            assert!(w[1] < w[0]);
        }
    }
}

#[test]
fn alpha2_matches_finite_difference() {
    let p = LawParams::new(2.0, 10.0, 1.0, 0.0).unwrap();
    for z in [cx(0.5, 0.1), cx(1.5, 0.01), cx(2.9, 0.001), cx(3.5, 1.0)] {
        let der = law_derived(z, &p, 1000).unwrap();
        let h = 1e-6;
        let fd = (quartic::eval(der.w + h, der.z, p.a(), p.c4()) - quartic::eval(der.w - h, der.z, p.a(), p.c4()))
            / (2.0 * h);
        assert!((fd - der.alpha2).norm() <= 1e-6 * der.alpha2.norm(), "z={z}");
    }
}

#[test]
fn alpha2_scales_like_root_distance() {
    let p = LawParams::new(2.0, 10.0, 1.0, 0.0).unwrap();
    let grid = p.domain().grid(60, 20, 1e-4, 2.9);
    let mut worst: f64 = 1.0;
    for z in grid {
        let der = law_derived(z, &p, 1000).unwrap();
        let ratio = der.alpha2.norm() / (der.kappa + z.im).sqrt();
        worst = worst.max(ratio).max(1.0 / ratio);
    }
    assert!(worst <= 5.0, "worst ratio {worst}");
}

#[test]
fn grid_invariants() {
    for d in [1.0, 1.5, 2.0, 4.0] {
        for q in [5.0, 10.0, 31.6] {
            for s4 in [0.0, 1.0] {
                let p = LawParams::new(d, q, s4, 0.0).unwrap();
                let c4 = p.c4();
                for z in p.domain().grid(200, 50, 1e-4, 2.99) {
                    let sol = solve_self_consistent(z, &p).unwrap();
                    assert!(sol.residual <= 1e-10);
                    assert!(sol.w.im > 0.0, "d={d} q={q} s4={s4} z={z}");
                    let m = mp_stieltjes(z, d).unwrap();
                    let diff = (sol.w - m).norm();
                    if c4 == 0.0 {
                        assert!(diff <= 1e-12);
                    } else {
                        assert!(diff <= 2.0 * c4 * (1.0 + m.norm().powi(3)) * 10.0, "d={d} q={q} z={z}: {diff}");
                    }
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn solution_is_in_upper_half_plane(
        d in 1.0f64..5.0,
        q in 4.0f64..100.0,
        s4 in 0.0f64..1.5,
        e in 0.0f64..1.0,
        eta in -8.0f64..0.4,
    ) {
        let p = LawParams::new(d, q, s4, 0.0).unwrap();
        let dom = p.domain();
        let z = cx(dom.e_lo + e * (dom.e_hi - dom.e_lo), 10f64.powf(eta));
        let sol = solve_self_consistent(z, &p).unwrap();
        prop_assert!(sol.residual <= 1e-10);
        prop_assert!(sol.w.im > 0.0);
        prop_assert!(sol.w.norm() <= p.disk_radius());
    }

    #[test]
    fn density_nonnegative_and_bounded(d in 1.0f64..4.0, q in 5.0f64..50.0, u in 0.0f64..1.0) {
        let p = LawParams::new(d, q, 1.0, 0.0).unwrap();
        let rep = edge_report(&p).unwrap();
        let lo = if d > 1.0 { 0.0 } else { 0.01 };
        let e = lo + u * (rep.l_plus + 0.5 - lo);
        if e > 0.0 && (d > 1.0 || e >= 0.01) {
            let rho = density(e, &p).unwrap();
            prop_assert!(rho >= 0.0 && rho.is_finite());
            if e > rep.l_plus + 1e-9 || (d > 1.0 && e < rep.support_lo() - 1e-9) {
                prop_assert_eq!(rho, 0.0);
            }
        }
    }

    #[test]
    fn edge_moves_with_sign_of_cumulant(d in 1.0f64..4.0, q in 5.0f64..60.0, s4 in -1.0f64..1.5) {
        prop_assume!((s4 / (q * q)).abs() < 0.09);
        let p = LawParams::new(d, q, s4, 0.0).unwrap();
        let l = edge_newton(&p, EdgeSide::Plus).unwrap().location;
        let lp = mp_edges(d).1;
        if s4 > 1e-9 { prop_assert!(l > lp); }
        if s4 < -1e-9 { prop_assert!(l < lp); }
    }

    #[test]
    fn integrated_density_is_additive(u1 in 0.0f64..1.0, u2 in 0.0f64..1.0, u3 in 0.0f64..1.0) {
        let p = LawParams::new(2.0, 10.0, 1.0, 0.0).unwrap();
        let mut x = [u1, u2, u3].map(|u| -0.2 + 3.5 * u);
        x.sort_by(f64::total_cmp);
        prop_assume!(x[0] < x[1] && x[1] < x[2]);
        let whole = integrated_density(x[0], x[2], &p).unwrap();
        let parts = integrated_density(x[0], x[1], &p).unwrap() + integrated_density(x[1], x[2], &p).unwrap();
        prop_assert!((whole - parts).abs() < 1e-7);
    }
}
