use mplab::twref::{build_reference, ecdf, ks_two_sample, load_or_build, reference_draw, CacheStatus, TwReference};
use proptest::prelude::*;

#[test]
fn small_reference_moments() {
    // 4000 draws: standard errors ≈ 0.02 (mean) and 0.04 (variance)
    let r = build_reference(4000, 1000, 1).unwrap();
    let (mean, var) = (r.mean(), r.variance());
    assert!((mean + 1.2065).abs() < 0.08, "mean {mean}");
    assert!((var - 1.608).abs() < 0.2, "variance {var}");
    assert!(r.samples.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn single_draw_reference() {
    let r = build_reference(1, 200, 5).unwrap();
    assert_eq!(r.count(), 1);
    assert_eq!(r.samples[0], reference_draw(200, 5, 0).unwrap());
    assert!(build_reference(0, 200, 5).is_err());
}

#[test]
fn median_ecdf() {
    let r = build_reference(301, 200, 2).unwrap();
    assert!((r.ecdf(r.median()) - 0.5).abs() <= 1.0 / 301.0);
}

#[test]
fn cache_round_trip_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tw.bin");
    let (a, status) = load_or_build(&path, 64, 250, 11).unwrap();
    assert_eq!(status, CacheStatus::Built);
    let first = std::fs::read(&path).unwrap();
    assert_eq!(&first[..4], b"TWR2");
    assert_eq!(first.len(), 4 + 4 + 8 + 8 + 8 + 64 * 8 + 8);

    let (b, status) = load_or_build(&path, 64, 250, 11).unwrap();
    assert_eq!(status, CacheStatus::Hit);
    assert_eq!(a, b);

    let rebuilt = build_reference(64, 250, 11).unwrap();
    rebuilt.save(&dir.path().join("again.bin")).unwrap();
    assert_eq!(std::fs::read(dir.path().join("again.bin")).unwrap(), first);

    let mut bytes = first.clone();
    bytes[100] ^= 0x40;
    std::fs::write(&path, &bytes).unwrap();
    assert!(matches!(TwReference::load(&path), Err(mplab::Error::Cache(_))));
    let (c, status) = load_or_build(&path, 64, 250, 11).unwrap();
    assert_eq!(status, CacheStatus::Rebuilt);
    assert_eq!(c, a);
    assert_eq!(std::fs::read(&path).unwrap(), first);
}

#[test]
fn parallel_build_matches_sequential() {
    let par = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let seq = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let a = par.install(|| build_reference(40, 200, 3).unwrap());
    let b = seq.install(|| build_reference(40, 200, 3).unwrap());
    assert_eq!(a.to_bytes(), b.to_bytes());
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

proptest! {
    #[test]
    fn ks_is_symmetric_and_bounded(a in proptest::collection::vec(-5.0f64..5.0, 1..60),
                                   b in proptest::collection::vec(-5.0f64..5.0, 1..60)) {
        let (a, b) = (sorted(a), sorted(b));
        let ab = ks_two_sample(&a, &b).unwrap();
        prop_assert_eq!(ab, ks_two_sample(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&ab));
        // brute force over all jump points
        let brute = a.iter().chain(&b).map(|&x| (ecdf(&a, x) - ecdf(&b, x)).abs()).fold(0.0, f64::max);
        prop_assert!((ab - brute).abs() < 1e-15);
    }

    #[test]
    fn ecdf_is_monotone_in_unit_interval(v in proptest::collection::vec(-5.0f64..5.0, 1..60), x in -6.0f64..6.0, dx in 0.0f64..3.0) {
        let v = sorted(v);
        let (lo, hi) = (ecdf(&v, x), ecdf(&v, x + dx));
        prop_assert!((0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi));
        prop_assert!(lo <= hi);
    }
}
