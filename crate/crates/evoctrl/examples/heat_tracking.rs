//! Boundary-controlled heat tracking: steer the outward flux at ξ = 0
//! toward sin(πt) using the Dirichlet value at ξ = 1, solved with
//! conjugate gradients on the exact discrete optimality system.
//!
//! Run with `cargo run --example heat_tracking`.

use evoctrl::fem1d::{assemble_heat, HeatParams};
use evoctrl::integrators::Scheme;
use evoctrl::linops::{TerminalWeight, Vector};
use evoctrl::ocp::{solve_unconstrained_cg, CostSpec};
use evoctrl::timegrid::{IntervalTrajectory, TimeGrid};

fn main() {
    let n = 32;
    let sys = assemble_heat(&HeatParams::reference(n, 1.0)).expect("assembly");
    let grid = TimeGrid::new(2.0, 100);
    let y_ref = IntervalTrajectory::from_fn(grid, 1, |t| {
        Vector::from_element(1, (std::f64::consts::PI * t).sin())
    });
    let spec = CostSpec::new(y_ref.clone(), 0.1, TerminalWeight::none(n));
    let x0 = Vector::zeros(n);

    let res = solve_unconstrained_cg(&sys, &spec, &x0, grid, Scheme::ImplicitEuler, 1e-9, 200)
        .expect("solve");
    println!(
        "converged = {} after {} iterations, stationarity {:.2e}",
        res.converged, res.iterations, res.stationarity
    );
    println!("cost history (every 5th iterate):");
    for (i, j) in res.cost_history.iter().enumerate().step_by(5) {
        println!("  iter {i:>3}: J = {j:.8e}");
    }
    let mid = grid.steps / 2;
    println!(
        "control at t = {:.2}: u = {:+.4}; output y = {:+.4} vs y_ref = {:+.4}",
        grid.midpoint_time(mid),
        res.u_opt.row(mid)[0],
        res.y.row(mid)[0],
        y_ref.row(mid)[0]
    );
}
