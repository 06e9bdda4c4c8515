//! Discrete duality of forward and adjoint time stepping.
//!
//! For any descriptor system and any scheme, the adjoint recursion is
//! the exact transpose of the forward one, so the summation-by-parts
//! pairing closes to machine precision:
//!
//!   ⟨x(T), μ_T⟩_M + ⟨y, s⟩_{Wy}  =  ⟨x0, μ(0)⟩_M + ⟨u, u_d⟩_{Wu}
//!
//! Run with `cargo run --example adjoint_duality`.

use evoctrl::integrators::{duality_residual, Scheme};
use evoctrl::linops::{DenseMatrix, DescriptorSystem, Vector};
use evoctrl::timegrid::{IntervalTrajectory, TimeGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (n, m, p) = (6, 2, 2);
    let g = DenseMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let mass = &g * g.transpose() + DenseMatrix::identity(n, n) * n as f64;
    let gu = DenseMatrix::from_fn(m, m, |_, _| rng.gen_range(-1.0..1.0));
    let wu = &gu * gu.transpose() + DenseMatrix::identity(m, m) * m as f64;
    let gy = DenseMatrix::from_fn(p, p, |_, _| rng.gen_range(-1.0..1.0));
    let wy = &gy * gy.transpose() + DenseMatrix::identity(p, p) * p as f64;
    let sys = DescriptorSystem::new(
        mass,
        DenseMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0)),
        DenseMatrix::from_fn(n, m, |_, _| rng.gen_range(-1.0..1.0)),
        DenseMatrix::from_fn(p, n, |_, _| rng.gen_range(-1.0..1.0)),
        DenseMatrix::from_fn(p, m, |_, _| rng.gen_range(-1.0..1.0)),
        wu,
        wy,
    )
    .expect("weights are SPD");

    let grid = TimeGrid::new(1.0, 12);
    let x0 = Vector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    let mu_t = Vector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    let u = IntervalTrajectory::from_fn(grid, m, |t| Vector::from_element(m, (3.0 * t).sin()));
    let y_d = IntervalTrajectory::from_fn(grid, p, |t| Vector::from_element(p, t.cos()));

    println!("duality defect per scheme (random 6-state system, N = 12):");
    for scheme in [Scheme::ExplicitEuler, Scheme::ImplicitEuler, Scheme::ImplicitMidpoint] {
        let r = duality_residual(&sys, &x0, &u, &mu_t, &y_d, scheme).expect("stable step");
        println!("  {scheme:?}: {r:.3e}");
    }
}
