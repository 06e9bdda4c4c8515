//! Discrete solution operators and the adjoint identity for the
//! terminal-value/output map.
//!
//! The maps here are thin wrappers over single trajectory passes:
//! input-to-state, F-terminal value, the F-input map
//! `u ↦ (F·x(T), y)` and the G-output map of the adjoint node. Dense
//! operator panels are assembled column-by-column from unit impulses,
//! for verification at small sizes only — production paths never
//! materialize them.

use crate::linops::{adjoint_system, DenseMatrix, DescriptorSystem, SpdFactor, TerminalWeight, Vector};
use crate::timegrid::{reflect, IntervalTrajectory, TimeGrid};
use crate::integrators::{IntegratorError, Scheme, Stepper};

/// Dense matrices of the solution operators on a fixed grid, columns
/// assembled by unit-impulse simulations. Input vectors are stacked
/// interval-major: `vec(u) = (u_0; u_1; …; u_{N−1})`.
pub struct OperatorPanel {
    /// n×(N·m) input-to-state map (x0 = 0)
    pub b_t: DenseMatrix,
    /// (N·p)×n state-to-output map (u = 0)
    pub c_t: DenseMatrix,
    /// (N·p)×(N·m) input-to-output map (x0 = 0)
    pub d_t: DenseMatrix,
    /// z×(N·m) F-terminal value map (x0 = 0)
    pub t_ft: DenseMatrix,
}

pub fn input_to_state(
    sys: &DescriptorSystem,
    u: &IntervalTrajectory,
    scheme: Scheme,
) -> Result<Vector, IntegratorError> {
    let stepper = Stepper::new(sys, u.grid, scheme)?;
    let (x, _) = stepper.forward(&Vector::zeros(sys.dim_x()), u);
    Ok(x.last().clone())
}

pub fn terminal_map(
    sys: &DescriptorSystem,
    f: &TerminalWeight,
    x0: &Vector,
    u: &IntervalTrajectory,
    scheme: Scheme,
) -> Result<Vector, IntegratorError> {
    let stepper = Stepper::new(sys, u.grid, scheme)?;
    let (x, _) = stepper.forward(x0, u);
    Ok(&f.f * x.last())
}

/// F-input map: `u ↦ (F·x(T), y)` with zero initial state, one pass.
pub fn input_map_apply(
    sys: &DescriptorSystem,
    f: &TerminalWeight,
    u: &IntervalTrajectory,
    scheme: Scheme,
) -> Result<(Vector, IntervalTrajectory), IntegratorError> {
    let stepper = Stepper::new(sys, u.grid, scheme)?;
    let (x, y) = stepper.forward(&Vector::zeros(sys.dim_x()), u);
    Ok((&f.f * x.last(), y))
}

/// G-output map of a (typically adjoint) node: one forward pass with
/// initial state `G·z` and input `y_d`; only the output is kept.
pub fn output_map_apply(
    sys_adj: &DescriptorSystem,
    g: &DenseMatrix,
    z: &Vector,
    y_d: &IntervalTrajectory,
    scheme: Scheme,
) -> Result<IntervalTrajectory, IntegratorError> {
    let stepper = Stepper::new(sys_adj, y_d.grid, scheme)?;
    let (_, out) = stepper.forward(&(g * z), y_d);
    Ok(out)
}

pub fn assemble_panel(
    sys: &DescriptorSystem,
    f: &TerminalWeight,
    grid: TimeGrid,
    scheme: Scheme,
) -> Result<OperatorPanel, IntegratorError> {
    let (n, m, p) = (sys.dim_x(), sys.dim_u(), sys.dim_y());
    let steps = grid.steps;
    let stepper = Stepper::new(sys, grid, scheme)?;
    let mut b_t = DenseMatrix::zeros(n, steps * m);
    let mut d_t = DenseMatrix::zeros(steps * p, steps * m);
    for j in 0..steps {
        for c in 0..m {
            let mut u = IntervalTrajectory::zeros(grid, m);
            u.row_mut(j)[c] = 1.0;
            let (x, y) = stepper.forward(&Vector::zeros(n), &u);
            b_t.set_column(j * m + c, x.last());
            for i in 0..steps {
                for r in 0..p {
                    d_t[(i * p + r, j * m + c)] = y.row(i)[r];
                }
            }
        }
    }
    let mut c_t = DenseMatrix::zeros(steps * p, n);
    for k in 0..n {
        let mut x0 = Vector::zeros(n);
        x0[k] = 1.0;
        let (_, y) = stepper.forward(&x0, &IntervalTrajectory::zeros(grid, m));
        for i in 0..steps {
            for r in 0..p {
                c_t[(i * p + r, k)] = y.row(i)[r];
            }
        }
    }
    let t_ft = &f.f * &b_t;
    Ok(OperatorPanel { b_t, c_t, d_t, t_ft })
}

fn stack_interval(traj: &IntervalTrajectory) -> Vector {
    let (steps, w) = (traj.grid.steps, traj.width());
    Vector::from_fn(steps * w, |k, _| traj.row(k / w)[k % w])
}

fn unstack_interval(grid: TimeGrid, width: usize, v: &Vector) -> IntervalTrajectory {
    IntervalTrajectory::new(
        grid,
        (0..grid.steps)
            .map(|i| Vector::from_fn(width, |c, _| v[i * width + c]))
            .collect(),
    )
}

/// Max-abs defect of the adjoint identity for the F-input map:
/// the weighted transpose of the dense F-input matrix must equal the
/// composition (reflection) ∘ (G-output map of the adjoint node with
/// G = M⁻¹Fᵀ) ∘ (identity on Z ⊕ reflection on outputs).
///
/// The transpose is taken with respect to the discrete inner products —
/// `dt·(I⊗Wu)` on controls, Euclidean on the terminal slot,
/// `dt·(I⊗Wy)` on outputs — so the identity is exact, not asymptotic.
/// Small instances only: the dense panels are (z+N·p)×(N·m).
pub fn adjoint_identity_residual(
    sys: &DescriptorSystem,
    f: &TerminalWeight,
    grid: TimeGrid,
    scheme: Scheme,
) -> Result<f64, IntegratorError> {
    let (m, p) = (sys.dim_u(), sys.dim_y());
    let z = f.dim_z();
    let steps = grid.steps;
    let dt = grid.dt();

    // dense matrix of the F-input map: (z + N·p) × (N·m)
    let panel = assemble_panel(sys, f, grid, scheme)?;
    let mut jmat = DenseMatrix::zeros(z + steps * p, steps * m);
    jmat.view_mut((0, 0), (z, steps * m)).copy_from(&panel.t_ft);
    jmat.view_mut((z, 0), (steps * p, steps * m)).copy_from(&panel.d_t);

    // weighted transpose: [dt·(I⊗Wu)]⁻¹ · Jᵀ · diag(I_z, dt·(I⊗Wy))
    let mut right = DenseMatrix::zeros(z + steps * p, z + steps * p);
    right.view_mut((0, 0), (z, z)).copy_from(&DenseMatrix::identity(z, z));
    for i in 0..steps {
        right
            .view_mut((z + i * p, z + i * p), (p, p))
            .copy_from(&(&sys.wy * dt));
    }
    let wu_inv = SpdFactor::new(&sys.wu).expect("Wu SPD");
    let jt_weighted = {
        let raw = jmat.transpose() * right;
        let mut out = DenseMatrix::zeros(steps * m, z + steps * p);
        for i in 0..steps {
            let block = raw.view((i * m, 0), (m, z + steps * p)).into_owned();
            out.view_mut((i * m, 0), (m, z + steps * p))
                .copy_from(&(wu_inv.solve_mat(&block) / dt));
        }
        out
    };

    // dense matrix of Refl ∘ 𝔒_{d,G} ∘ diag(I, Refl) with G = M⁻¹Fᵀ
    let adj = adjoint_system(sys);
    let mass = SpdFactor::new(&sys.m).expect("mass SPD");
    let g = mass.solve_mat(&f.f.transpose());
    let mut comp = DenseMatrix::zeros(steps * m, z + steps * p);
    for k in 0..(z + steps * p) {
        let (zk, ydk) = if k < z {
            let mut e = Vector::zeros(z);
            e[k] = 1.0;
            (e, IntervalTrajectory::zeros(grid, p))
        } else {
            let mut v = Vector::zeros(steps * p);
            v[k - z] = 1.0;
            (Vector::zeros(z), unstack_interval(grid, p, &v))
        };
        let out = output_map_apply(&adj, &g, &zk, &reflect(&ydk), scheme)?;
        comp.set_column(k, &stack_interval(&reflect(&out)));
    }

    Ok((jt_weighted - comp).amax())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const SCHEMES: [Scheme; 3] = [
        Scheme::ExplicitEuler,
        Scheme::ImplicitEuler,
        Scheme::ImplicitMidpoint,
    ];

    fn random_dense(rng: &mut impl Rng, r: usize, c: usize) -> DenseMatrix {
        DenseMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn random_spd(rng: &mut impl Rng, n: usize) -> DenseMatrix {
        let g = random_dense(rng, n, n);
        &g * g.transpose() + DenseMatrix::identity(n, n) * (n as f64)
    }

    fn random_system(rng: &mut impl Rng, n: usize, m: usize, p: usize) -> DescriptorSystem {
        DescriptorSystem::new(
            random_spd(rng, n),
            random_dense(rng, n, n),
            random_dense(rng, n, m),
            random_dense(rng, p, n),
            random_dense(rng, p, m),
            random_spd(rng, m),
            random_spd(rng, p),
        )
        .unwrap()
    }

    fn random_interval(rng: &mut impl Rng, grid: TimeGrid, width: usize) -> IntervalTrajectory {
        IntervalTrajectory::new(
            grid,
            (0..grid.steps)
                .map(|_| Vector::from_fn(width, |_, _| rng.gen_range(-1.0..1.0)))
                .collect(),
        )
    }

    #[test]
    fn input_to_state_zero_and_integrator() {
        let sys = DescriptorSystem::unweighted(
            DenseMatrix::zeros(1, 1),
            DenseMatrix::from_row_slice(1, 1, &[1.0]),
            DenseMatrix::zeros(1, 1),
            DenseMatrix::zeros(1, 1),
        );
        let grid = TimeGrid::new(1.0, 4);
        let zero = input_to_state(&sys, &IntervalTrajectory::zeros(grid, 1), Scheme::ImplicitEuler)
            .unwrap();
        assert_eq!(zero[0], 0.0);
        let one = input_to_state(
            &sys,
            &IntervalTrajectory::constant(grid, Vector::from_vec(vec![1.0])),
            Scheme::ImplicitMidpoint,
        )
        .unwrap();
        assert!((one[0] - 1.0).abs() <= 1e-14);
    }

    #[test]
    fn input_to_state_matches_panel_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let sys = random_system(&mut rng, 4, 2, 2);
        let grid = TimeGrid::new(1.0, 6);
        let f = TerminalWeight::none(4);
        let panel = assemble_panel(&sys, &f, grid, Scheme::ImplicitMidpoint).unwrap();
        let u = random_interval(&mut rng, grid, 2);
        let x_t = input_to_state(&sys, &u, Scheme::ImplicitMidpoint).unwrap();
        let via_panel = &panel.b_t * stack_interval(&u);
        assert!((x_t - via_panel).amax() <= 1e-12);
    }

    #[test]
    fn terminal_map_frozen_state_and_zero_f() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let sys = DescriptorSystem::unweighted(
            DenseMatrix::zeros(2, 2),
            DenseMatrix::zeros(2, 1),
            DenseMatrix::zeros(1, 2),
            DenseMatrix::zeros(1, 1),
        );
        let grid = TimeGrid::new(1.0, 3);
        let x0 = Vector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0));
        let f_id = TerminalWeight::new(DenseMatrix::identity(2, 2), Vector::zeros(2), 1.0);
        let r = terminal_map(&sys, &f_id, &x0, &IntervalTrajectory::zeros(grid, 1), Scheme::ImplicitEuler)
            .unwrap();
        assert!((r - &x0).amax() <= 1e-14);
        let f_zero = TerminalWeight::new(DenseMatrix::zeros(1, 2), Vector::zeros(1), 1.0);
        let r = terminal_map(&sys, &f_zero, &x0, &IntervalTrajectory::zeros(grid, 1), Scheme::ImplicitEuler)
            .unwrap();
        assert_eq!(r[0], 0.0);
    }

    #[test]
    fn terminal_map_matches_panel_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let sys = random_system(&mut rng, 3, 2, 1);
        let grid = TimeGrid::new(0.8, 5);
        let f = TerminalWeight::new(random_dense(&mut rng, 2, 3), Vector::zeros(2), 1.0);
        let panel = assemble_panel(&sys, &f, grid, Scheme::ImplicitEuler).unwrap();
        let x0 = Vector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
        let u = random_interval(&mut rng, grid, 2);
        let direct = terminal_map(&sys, &f, &x0, &u, Scheme::ImplicitEuler).unwrap();
        // free response + panel for the controlled part
        let (x_free, _) =
            crate::integrators::simulate_forward(&sys, &x0, &IntervalTrajectory::zeros(grid, 2), Scheme::ImplicitEuler)
                .unwrap();
        let oracle = &f.f * x_free.last() + &panel.t_ft * stack_interval(&u);
        assert!((direct - oracle).amax() <= 1e-12);
    }

    #[test]
    fn input_map_is_linear_and_matches_panel() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let sys = random_system(&mut rng, 4, 2, 2);
        let grid = TimeGrid::new(1.0, 5);
        let f = TerminalWeight::new(random_dense(&mut rng, 2, 4), Vector::zeros(2), 1.0);
        let u1 = random_interval(&mut rng, grid, 2);
        let u2 = random_interval(&mut rng, grid, 2);
        let (z1, y1) = input_map_apply(&sys, &f, &u1, Scheme::ImplicitMidpoint).unwrap();
        let (z2, y2) = input_map_apply(&sys, &f, &u2, Scheme::ImplicitMidpoint).unwrap();
        let (zs, ys) =
            input_map_apply(&sys, &f, &u1.axpy(1.0, &u2), Scheme::ImplicitMidpoint).unwrap();
        assert!((&z1 + &z2 - &zs).amax() <= 1e-13 * zs.amax().max(1.0));
        for i in 0..5 {
            let sum = y1.row(i) + y2.row(i);
            assert!((sum - ys.row(i)).amax() <= 1e-13 * ys.row(i).amax().max(1.0));
        }
        // zero control maps to zero
        let (z0, y0) =
            input_map_apply(&sys, &f, &IntervalTrajectory::zeros(grid, 2), Scheme::ImplicitMidpoint)
                .unwrap();
        assert_eq!(z0.amax(), 0.0);
        assert_eq!(stack_interval(&y0).amax(), 0.0);
        // panel consistency
        let panel = assemble_panel(&sys, &f, grid, Scheme::ImplicitMidpoint).unwrap();
        assert!((&panel.t_ft * stack_interval(&u1) - z1).amax() <= 1e-12);
        assert!((&panel.d_t * stack_interval(&u1) - stack_interval(&y1)).amax() <= 1e-12);
    }

    #[test]
    fn output_map_zero_and_g_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        let sys = random_system(&mut rng, 3, 2, 2);
        let adj = adjoint_system(&sys);
        let grid = TimeGrid::new(1.0, 4);
        let g = DenseMatrix::zeros(3, 2);
        let yd = random_interval(&mut rng, grid, 2);
        // G = 0 reduces to the pure input-to-output part
        let with_g0 =
            output_map_apply(&adj, &g, &Vector::from_vec(vec![1.0, -1.0]), &yd, Scheme::ImplicitEuler)
                .unwrap();
        let pure = output_map_apply(&adj, &g, &Vector::zeros(2), &yd, Scheme::ImplicitEuler).unwrap();
        for i in 0..4 {
            assert!((with_g0.row(i) - pure.row(i)).amax() <= 1e-14);
        }
        let zero = output_map_apply(
            &adj,
            &g,
            &Vector::zeros(2),
            &IntervalTrajectory::zeros(grid, 2),
            Scheme::ImplicitEuler,
        )
        .unwrap();
        assert_eq!(stack_interval(&zero).amax(), 0.0);
    }

    #[test]
    fn adjoint_identity_vanishing_maps() {
        // C = 0, D = 0, F = 0: both sides of the identity are zero
        let sys = DescriptorSystem::unweighted(
            DenseMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]),
            DenseMatrix::from_row_slice(2, 1, &[1.0, 1.0]),
            DenseMatrix::zeros(1, 2),
            DenseMatrix::zeros(1, 1),
        );
        let f = TerminalWeight::new(DenseMatrix::zeros(1, 2), Vector::zeros(1), 1.0);
        let grid = TimeGrid::new(1.0, 4);
        let r = adjoint_identity_residual(&sys, &f, grid, Scheme::ImplicitMidpoint).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn adjoint_identity_exact_random_all_schemes() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        for scheme in SCHEMES {
            for _ in 0..5 {
                let sys = random_system(&mut rng, 4, 2, 2);
                let f = TerminalWeight::new(random_dense(&mut rng, 2, 4), Vector::zeros(2), 1.0);
                let grid = TimeGrid::new(1.0, 8);
                let r = adjoint_identity_residual(&sys, &f, grid, scheme).unwrap();
                assert!(r <= 1e-10, "{scheme:?}: residual {r:.3e}");
            }
        }
    }
}
