//! Fixtures shared by the benchmarks.

use mplab::ensemble::EnsembleParams;
use mplab::law::LawParams;

/// Sparse ensemble with `N = n`, `d = 2` and `q = N^{1/4}`.
pub fn sparse_ensemble(n: usize) -> EnsembleParams {
    EnsembleParams::sparse_with_phi(n, n / 2, 0.25, 7).expect("valid fixture")
}

/// Corrected law at `d = 2`, `q = 10`, `s⁴ = 1`.
pub fn law() -> LawParams {
    LawParams::new(2.0, 10.0, 1.0, 0.0).expect("valid fixture")
}
