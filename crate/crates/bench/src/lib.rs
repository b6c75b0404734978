//! Fixtures shared by the benchmarks.

use shear_core::{FlowState, InitialPerturbation, ProfileSpec, ShearProfile, TorusGrid};

/// Smoothed Couette plus the default bump perturbation of size `sigma`.
pub fn perturbed_couette(
    n1: usize,
    n2_per_m: usize,
    m: usize,
    sigma: f64,
) -> (ShearProfile, FlowState) {
    let grid = TorusGrid::new(n1, n2_per_m * m, m).expect("grid");
    let profile =
        ShearProfile::new(ProfileSpec::SmoothedCouette { delta: 0.2 }, m).expect("profile");
    let (base, mean) = profile.vorticity(&grid).expect("base vorticity");
    let (u_in, _) = InitialPerturbation::default()
        .build(&grid)
        .expect("perturbation");
    let mut omega = base;
    omega.axpy(sigma, &u_in);
    (profile, FlowState::new(omega, mean).expect("state"))
}

/// Labels on a regular lattice of `n x n` points covering the box.
pub fn lattice_points(grid: &TorusGrid, n: usize) -> Vec<(f64, f64)> {
    let (l1, l2) = (2.0, grid.period2());
    (0..n * n)
        .map(|k| {
            (
                (k % n) as f64 * l1 / n as f64 - 1.0,
                (k / n) as f64 * l2 / n as f64 - 0.5 * l2,
            )
        })
        .collect()
}
