use mplab::ensemble::{sample_matrix, EnsembleParams, MatrixSample};
use mplab::law::{edge_report, LawParams};
use mplab::spectra::{counting, delocalization_stat, eigenvalues, empirical_stieltjes, linearized_green, Spectrum};
use num_complex::Complex64;
use proptest::prelude::*;

#[test]
fn rank_padding_and_trace_identity() {
    for (n, m, q) in [(300, 100, 5.0), (200, 200, 4.0), (150, 149, 3.0), (101, 7, 2.0)] {
        let params = EnsembleParams::sparse_with_q(n, m, q, 19).unwrap();
        for trial in 0..3 {
            let s = sample_matrix(&params, trial).unwrap();
            let spec = eigenvalues(&s).unwrap();
            assert_eq!(spec.lambdas.len(), n);
            assert!(spec.lambdas[m..].iter().all(|&l| l == 0.0));
            assert!(spec.lambdas[..m].iter().all(|&l| l > 0.0));
            assert!(spec.lambdas.windows(2).all(|w| w[0] >= w[1]));
            let trace: f64 = spec.lambdas.iter().sum();
            let fro = s.frobenius_sq();
            assert!((trace - fro).abs() <= 1e-10 * fro);
        }
    }
}

#[test]
fn schur_identities_on_random_samples() {
    let shapes = [(120, 60, 5.0), (100, 100, 4.0), (160, 40, 6.0), (90, 45, 3.0)];
    let mut checked = 0;
    for (k, &(n, m, q)) in shapes.iter().enumerate() {
        let params = EnsembleParams::sparse_with_q(n, m, q, 100 + k as u64).unwrap();
        let law = LawParams::from_ensemble(&params, 0.0).unwrap();
        let lp = edge_report(&law).unwrap().l_plus;
        for trial in 0..5 {
            let s = sample_matrix(&params, trial).unwrap();
            let spec = eigenvalues(&s).unwrap();
            for z in [Complex64::new(0.0, 1.0), Complex64::new(2.0, 0.1), Complex64::new(lp, 1e-2)] {
                let g = linearized_green(&s, z).unwrap();
                assert!(g.block_trace_residual(params.d()) < 1e-10, "{}", g.block_trace_residual(params.d()));
                assert!(g.schur_residual < 1e-9, "{}", g.schur_residual);
                assert!(g.schur_residual_bar < 1e-9, "{}", g.schur_residual_bar);
                assert!((g.m - empirical_stieltjes(&spec, z)).norm() < 1e-9);
            }
            checked += 1;
        }
    }
    assert_eq!(checked, 20);
}

#[test]
fn gaussian_delocalization() {
    // The extreme entry over 2N Haar-like vectors sits near sqrt(2 ln(2N^2) / N),
    // about 0.23 at N = 400, so N^{-1/4} = 0.224 is not a 95% bound here.
    let n = 400;
    let params = EnsembleParams::gaussian(n, n, 5).unwrap();
    let nf = n as f64;
    let bound = 1.2 * (2.0 * (2.0 * nf * nf).ln() / nf).sqrt();
    let stats: Vec<f64> =
        (0..50).map(|t| delocalization_stat(&sample_matrix(&params, t).unwrap()).unwrap()).collect();
    let ok = stats.iter().filter(|&&s| s <= bound).count();
    assert!(ok >= 48, "{ok}/50 within {bound}");
    assert!(stats.iter().all(|&s| s > (n as f64).powf(-0.5)));
}

#[test]
fn delocalization_matches_eigenvector_oracle() {
    let params = EnsembleParams::gaussian(12, 5, 3).unwrap();
    for trial in 0..5 {
        let s = sample_matrix(&params, trial).unwrap();
        let x = s.to_faer();
        let sup = |gram: faer::Mat<f64>, skip_zero: bool| {
            let eig = gram.self_adjoint_eigen(faer::Side::Lower).unwrap();
            let (vals, vecs) = (eig.S(), eig.U());
            let mut worst = 0.0f64;
            for k in 0..vecs.ncols() {
                if skip_zero && vals[k].abs() < 1e-10 {
                    continue;
                }
                worst = worst.max(vecs.col(k).norm_max() / vecs.col(k).norm_l2());
            }
            worst
        };
        let oracle = sup(x.transpose() * &x, true).max(sup(&x * x.transpose(), false));
        assert!((delocalization_stat(&s).unwrap() - oracle).abs() < 1e-10);
    }
}

#[test]
fn size_cap_enforced() {
    let params = EnsembleParams::gaussian(1500, 600, 1).unwrap();
    let s = sample_matrix(&params, 0).unwrap();
    assert!(linearized_green(&s, Complex64::new(0.0, 1.0)).is_err());
    assert!(delocalization_stat(&s).is_err());
}

#[test]
fn csv_and_dump() {
    let spec = Spectrum::from_values(vec![1.5, 0.25, 3.0], 2).unwrap();
    let mut csv = Vec::new();
    spec.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    let values: Vec<f64> = text.lines().skip(1).map(|l| l.parse().unwrap()).collect();
    assert_eq!(values, vec![3.0, 1.5, 0.25]);
    let mut dump = Vec::new();
    spec.write_dump(&mut dump).unwrap();
    let (rows, cols, data) = mplab::ensemble::read_dump(dump.as_slice()).unwrap();
    assert_eq!((rows, cols), (1, 3));
    assert_eq!(data, spec.lambdas);
}

fn arbitrary_sample() -> impl Strategy<Value = MatrixSample> {
    (1usize..8, 0usize..6).prop_flat_map(|(m, extra)| {
        let n = m + extra;
        proptest::collection::vec(-3.0f64..3.0, m * n).prop_map(move |entries| {
            let params = EnsembleParams::gaussian(n, m, 0).unwrap();
            MatrixSample::from_rows(m, n, entries, params).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn stieltjes_positivity(s in arbitrary_sample(), e in -5.0f64..20.0, eta in 1e-6f64..5.0) {
        let spec = eigenvalues(&s).unwrap();
        prop_assert!(empirical_stieltjes(&spec, Complex64::new(e, eta)).im > 0.0);
    }

    #[test]
    fn counting_partitions(s in arbitrary_sample(), a in -1.0f64..5.0, w in 0.01f64..10.0) {
        let spec = eigenvalues(&s).unwrap();
        let left = counting(&spec, f64::NEG_INFINITY, a).unwrap();
        let right = counting(&spec, a, a + w).unwrap();
        let rest = counting(&spec, a + w, f64::INFINITY).unwrap();
        prop_assert!((left + right + rest - 1.0).abs() < 1e-12);
    }

    #[test]
    fn schur_identities_hold(s in arbitrary_sample(), e in -1.0f64..10.0, eta in 0.05f64..3.0) {
        let z = Complex64::new(e, eta);
        let g = linearized_green(&s, z).unwrap();
        let d = s.cols as f64 / s.rows as f64;
        prop_assert!(g.block_trace_residual(d) < 1e-10);
        prop_assert!(g.schur_residual < 1e-9);
    }
}
