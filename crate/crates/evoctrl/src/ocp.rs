//! Cost functionals, exact adjoint gradients, and the three solvers:
//! conjugate gradients on the normal operator, projected gradient with
//! Armijo backtracking for box constraints, and an augmented-Lagrangian
//! outer loop for terminal equality constraints.
//!
//! Everything is discretize-then-optimize: the gradient comes from the
//! exactly-transposed adjoint pass, so the quadratic expansion
//! `J(u+δu) − J(u) = ⟨∇J(u), δu⟩_Wu + ½‖δy‖²_Wy + (scale/2)‖F δx(T)‖²
//! + (α/2)‖δu‖²_Wu` holds to machine precision, and first-order
//! optimality certificates are exact for the discrete problem.

use crate::integrators::{IntegratorError, Scheme, Stepper};
use crate::linops::{DenseMatrix, DescriptorSystem, SpdFactor, TerminalWeight, Vector};
use crate::solution_maps::assemble_panel;
use crate::timegrid::{l2_inner, l2_norm, IntervalTrajectory, NodeTrajectory, TimeGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Tracking reference, input penalty and terminal weight:
/// `J(u) = ½‖y−y_ref‖²_Wy + (α/2)‖u‖²_Wu + (scale/2)‖F·x(T)−z_f‖²`.
#[derive(Clone)]
pub struct CostSpec {
    pub y_ref: IntervalTrajectory,
    pub alpha: f64,
    pub terminal: TerminalWeight,
}

impl CostSpec {
    pub fn new(y_ref: IntervalTrajectory, alpha: f64, terminal: TerminalWeight) -> Self {
        assert!(alpha >= 0.0, "input penalty must be nonnegative");
        Self { y_ref, alpha, terminal }
    }
}

#[derive(Debug, Clone)]
pub enum AdmissibleSet {
    Unconstrained,
    /// Pointwise box `lo ≤ u_i ≤ hi` on every interval sample.
    Box { lo: Vector, hi: Vector },
}

impl AdmissibleSet {
    pub fn boxed(lo: Vector, hi: Vector) -> Self {
        assert_eq!(lo.len(), hi.len(), "box bound lengths");
        assert!(lo.iter().zip(hi.iter()).all(|(l, h)| l <= h), "need lo ≤ hi");
        AdmissibleSet::Box { lo, hi }
    }
}

/// Componentwise clamp (identity for the unconstrained set). Idempotent
/// and nonexpansive in the Wu-weighted norm for diagonal Wu.
pub fn project(adm: &AdmissibleSet, u: &IntervalTrajectory) -> IntervalTrajectory {
    match adm {
        AdmissibleSet::Unconstrained => u.clone(),
        AdmissibleSet::Box { lo, hi } => u.map(|v| {
            Vector::from_fn(v.len(), |k, _| v[k].clamp(lo[k], hi[k]))
        }),
    }
}

/// One solver iteration for convergence reporting: cost after the
/// iterate, the solver's stationarity measure, and the step taken
/// (CG line parameter / accepted Armijo step; 0 for the initial row).
#[derive(Clone, Copy, Debug)]
pub struct IterRecord {
    pub cost: f64,
    pub stationarity: f64,
    pub step: f64,
}

#[derive(Clone)]
pub struct OptResult {
    pub u_opt: IntervalTrajectory,
    pub x: NodeTrajectory,
    pub y: IntervalTrajectory,
    pub cost_history: Vec<f64>,
    pub trace: Vec<IterRecord>,
    pub stationarity: f64,
    pub multiplier: Option<Vector>,
    pub iterations: usize,
    pub converged: bool,
}

pub fn cost(
    sys: &DescriptorSystem,
    spec: &CostSpec,
    x0: &Vector,
    u: &IntervalTrajectory,
    scheme: Scheme,
) -> Result<f64, IntegratorError> {
    let stepper = Stepper::new(sys, u.grid, scheme)?;
    Ok(cost_with(&stepper, spec, x0, u).0)
}

fn cost_with(
    stepper: &Stepper,
    spec: &CostSpec,
    x0: &Vector,
    u: &IntervalTrajectory,
) -> (f64, NodeTrajectory, IntervalTrajectory) {
    let (x, y) = stepper.forward(x0, u);
    let mismatch = y.sub(&spec.y_ref);
    let mut j = 0.5 * l2_inner(&mismatch, &mismatch, &stepper.sys.wy)
        + 0.5 * spec.alpha * l2_inner(u, u, &stepper.sys.wu);
    if spec.terminal.dim_z() > 0 && spec.terminal.scale > 0.0 {
        let c = &spec.terminal.f * x.last() - &spec.terminal.z_f;
        j += 0.5 * spec.terminal.scale * c.norm_squared();
    }
    (j, x, y)
}

/// `∇J(u) = α·u + u_d` from one forward and one adjoint pass, with
/// terminal seed `μ_T = M⁻¹·Fᵀ·scale·(F·x(T)−z_f)` and output source
/// `y − y_ref`. Exact for the discrete cost.
pub fn gradient(
    sys: &DescriptorSystem,
    spec: &CostSpec,
    x0: &Vector,
    u: &IntervalTrajectory,
    scheme: Scheme,
) -> Result<IntervalTrajectory, IntegratorError> {
    let stepper = Stepper::new(sys, u.grid, scheme)?;
    Ok(gradient_with(&stepper, spec, x0, u).0)
}

fn terminal_seed(sys: &DescriptorSystem, t: &TerminalWeight, x_t: &Vector) -> Vector {
    if t.dim_z() == 0 || t.scale == 0.0 {
        return Vector::zeros(sys.dim_x());
    }
    let c = &t.f * x_t - &t.z_f;
    let mass = SpdFactor::new(&sys.m).expect("mass SPD");
    mass.solve(&(t.f.transpose() * c * t.scale))
}

fn gradient_with(
    stepper: &Stepper,
    spec: &CostSpec,
    x0: &Vector,
    u: &IntervalTrajectory,
) -> (IntervalTrajectory, f64, NodeTrajectory, IntervalTrajectory) {
    let (j, x, y) = cost_with(stepper, spec, x0, u);
    let mu_t = terminal_seed(stepper.sys, &spec.terminal, x.last());
    let source = y.sub(&spec.y_ref);
    let (_, u_d) = stepper.adjoint(&mu_t, &source);
    (u_d.axpy(spec.alpha, u), j, x, y)
}

/// Normal-operator action `u ↦ α·u + 𝔍*𝔍u` (zero data, zero initial
/// state). The CG solver runs on this in the Wu-weighted L² inner
/// product, so its residual is exactly `−∇J(u)`.
fn normal_apply(stepper: &Stepper, spec: &CostSpec, u: &IntervalTrajectory) -> IntervalTrajectory {
    let x0 = Vector::zeros(stepper.sys.dim_x());
    let (x, y) = stepper.forward(&x0, u);
    let t = &spec.terminal;
    let mu_t = if t.dim_z() > 0 && t.scale > 0.0 {
        let mass = SpdFactor::new(&stepper.sys.m).expect("mass SPD");
        mass.solve(&(t.f.transpose() * (&t.f * x.last()) * t.scale))
    } else {
        Vector::zeros(stepper.sys.dim_x())
    };
    let (_, u_d) = stepper.adjoint(&mu_t, &y);
    u_d.axpy(spec.alpha, u)
}

/// Conjugate gradients on the stationarity equation `∇J(u) = 0`.
/// Requires α > 0 (or an injective terminal operator) for a positive
/// definite normal operator; warns otherwise and proceeds.
pub fn solve_unconstrained_cg(
    sys: &DescriptorSystem,
    spec: &CostSpec,
    x0: &Vector,
    grid: TimeGrid,
    scheme: Scheme,
    tol: f64,
    max_iter: usize,
) -> Result<OptResult, IntegratorError> {
    if spec.alpha <= 0.0 && spec.terminal.scale <= 0.0 {
        eprintln!("warning: α = 0 and no terminal weight; normal operator may be singular");
    }
    let stepper = Stepper::new(sys, grid, scheme)?;
    let wu = &sys.wu;
    let mut u = IntervalTrajectory::zeros(grid, sys.dim_u());
    let (g0, j0, _, _) = gradient_with(&stepper, spec, x0, &u);
    let g0_norm = l2_norm(&g0, wu);
    let target = tol * (1.0 + g0_norm);
    let mut cost_history = vec![j0];
    let mut trace = vec![IterRecord { cost: j0, stationarity: g0_norm, step: 0.0 }];
    // r = −∇J(u); at u = 0 that is the right-hand side of the normal eq.
    let mut r = g0.scale(-1.0);
    let mut p = r.clone();
    let mut rr = l2_inner(&r, &r, wu);
    let mut iterations = 0;
    let mut converged = rr.sqrt() <= target;
    while !converged && iterations < max_iter {
        let ap = normal_apply(&stepper, spec, &p);
        let pap = l2_inner(&p, &ap, wu);
        if pap <= 0.0 {
            break; // numerically singular direction
        }
        let alpha = rr / pap;
        u = u.axpy(alpha, &p);
        r = r.axpy(-alpha, &ap);
        let rr_next = l2_inner(&r, &r, wu);
        iterations += 1;
        let (j, _, _) = cost_with(&stepper, spec, x0, &u);
        cost_history.push(j);
        trace.push(IterRecord { cost: j, stationarity: rr_next.sqrt(), step: alpha });
        if rr_next.sqrt() <= target {
            converged = true;
        }
        p = r.axpy(rr_next / rr, &p);
        rr = rr_next;
    }
    let (g, j, x, y) = gradient_with(&stepper, spec, x0, &u);
    if cost_history.last() != Some(&j) {
        cost_history.push(j);
    }
    Ok(OptResult {
        u_opt: u,
        x,
        y,
        cost_history,
        trace,
        stationarity: l2_norm(&g, wu),
        multiplier: None,
        iterations,
        converged,
    })
}

// Armijo parameters: initial step 1.0, shrink ×0.5, sufficient decrease 1e-4.
const ARMIJO_C: f64 = 1e-4;
const ARMIJO_SHRINK: f64 = 0.5;
const ARMIJO_MAX_BACKTRACKS: usize = 60;

/// Fixed-point iteration `u ← project(u − s·∇J(u))` with monotone
/// Armijo backtracking. The stationarity measure is
/// `‖u − project(u − ∇J(u))‖_Wu` (reference step 1).
pub fn solve_projected_gradient(
    sys: &DescriptorSystem,
    spec: &CostSpec,
    x0: &Vector,
    adm: &AdmissibleSet,
    grid: TimeGrid,
    scheme: Scheme,
    tol: f64,
    max_iter: usize,
) -> Result<OptResult, IntegratorError> {
    let stepper = Stepper::new(sys, grid, scheme)?;
    let wu = &sys.wu;
    let mut u = project(adm, &IntervalTrajectory::zeros(grid, sys.dim_u()));
    let (mut g, mut j, mut x, mut y) = gradient_with(&stepper, spec, x0, &u);
    let mut cost_history = vec![j];
    let mut stationarity = l2_norm(&u.sub(&project(adm, &u.axpy(-1.0, &g))), wu);
    let mut trace = vec![IterRecord { cost: j, stationarity, step: 0.0 }];
    let mut iterations = 0;
    let mut converged = stationarity <= tol;
    let mut step = 1.0f64;
    let mut prev: Option<(IntervalTrajectory, IntervalTrajectory)> = None; // (u, g)
    while !converged && iterations < max_iter {
        // seed the line search with a Barzilai–Borwein step (monotone
        // thanks to the Armijo acceptance below), else grow the last one
        step = match &prev {
            Some((u_prev, g_prev)) => {
                let s = u.sub(u_prev);
                let dg = g.sub(g_prev);
                let denom = l2_inner(&s, &dg, wu);
                if denom > 0.0 {
                    (l2_inner(&s, &s, wu) / denom).clamp(1e-8, 1e8)
                } else {
                    (step * 2.0).min(1.0e6)
                }
            }
            None => 1.0,
        };
        prev = Some((u.clone(), g.clone()));
        let mut accepted = false;
        for _ in 0..ARMIJO_MAX_BACKTRACKS {
            let trial = project(adm, &u.axpy(-step, &g));
            let dir = trial.sub(&u);
            let slope = l2_inner(&g, &dir, wu);
            let (j_trial, x_t, y_t) = cost_with(&stepper, spec, x0, &trial);
            if j_trial <= j + ARMIJO_C * slope {
                u = trial;
                j = j_trial;
                x = x_t;
                y = y_t;
                accepted = true;
                break;
            }
            step *= ARMIJO_SHRINK;
        }
        iterations += 1;
        if !accepted {
            break; // line search stalled at machine precision
        }
        cost_history.push(j);
        let (g_new, _, _, _) = gradient_with(&stepper, spec, x0, &u);
        g = g_new;
        stationarity = l2_norm(&u.sub(&project(adm, &u.axpy(-1.0, &g))), wu);
        trace.push(IterRecord { cost: j, stationarity, step });
        converged = stationarity <= tol;
    }
    Ok(OptResult {
        u_opt: u,
        x,
        y,
        cost_history,
        trace,
        stationarity,
        multiplier: None,
        iterations,
        converged,
    })
}

/// First-order optimality certificate: minimum of `⟨∇J(u), u′−u⟩_Wu`
/// over `directions` random feasible controls plus the projected
/// steepest-descent point. A certified solution has residual ≥ −tol.
/// Deterministic for a fixed seed.
pub fn stationarity_residual(
    sys: &DescriptorSystem,
    spec: &CostSpec,
    x0: &Vector,
    adm: &AdmissibleSet,
    u: &IntervalTrajectory,
    scheme: Scheme,
    directions: usize,
    seed: u64,
) -> Result<f64, IntegratorError> {
    let g = gradient(sys, spec, x0, u, scheme)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    let m = sys.dim_u();
    for _ in 0..directions {
        let candidate = match adm {
            AdmissibleSet::Unconstrained => {
                // random perturbation around u; scale is immaterial for
                // the sign of the pairing
                u.map(|v| Vector::from_fn(v.len(), |k, _| v[k] + rng.gen_range(-1.0..1.0)))
            }
            AdmissibleSet::Box { lo, hi } => IntervalTrajectory::new(
                u.grid,
                (0..u.grid.steps)
                    .map(|_| Vector::from_fn(m, |k, _| rng.gen_range(lo[k]..=hi[k])))
                    .collect(),
            ),
        };
        best = best.min(l2_inner(&g, &candidate.sub(u), &sys.wu));
    }
    let steepest = project(adm, &u.axpy(-1.0, &g));
    best = best.min(l2_inner(&g, &steepest.sub(u), &sys.wu));
    Ok(best)
}

/// Augmented-Lagrangian solver for `min J(u)` subject to the terminal
/// equality `Fc·x(T) = z_c` (and an optional box on u).
///
/// The inner problem folds the multiplier and penalty into an extended
/// terminal weight — `λᵀc + (ρ/2)‖c‖² = (ρ/2)‖c + λ/ρ‖² + const` — and
/// is handed to the CG solver (unconstrained) or the projected-gradient
/// solver (box). ρ starts at 1 and grows ×10 whenever the infeasibility
/// fails to shrink by ×0.25 per outer iteration.
pub fn solve_terminal_constrained(
    sys: &DescriptorSystem,
    spec: &CostSpec,
    x0: &Vector,
    adm: &AdmissibleSet,
    fc: &DenseMatrix,
    z_c: &Vector,
    grid: TimeGrid,
    scheme: Scheme,
    tol: f64,
    max_iter: usize,
) -> Result<OptResult, IntegratorError> {
    let zc_dim = fc.nrows();
    assert_eq!(z_c.len(), zc_dim, "constraint target length");
    if zc_dim == 0 {
        // vacuous constraint: plain solve
        return match adm {
            AdmissibleSet::Unconstrained => {
                solve_unconstrained_cg(sys, spec, x0, grid, scheme, tol, max_iter)
            }
            AdmissibleSet::Box { .. } => {
                solve_projected_gradient(sys, spec, x0, adm, grid, scheme, tol, max_iter)
            }
        };
    }
    let mut lambda = Vector::zeros(zc_dim);
    let mut rho = 1.0f64;
    let mut infeas_prev = f64::INFINITY;
    let mut cost_history = Vec::new();
    let mut trace: Vec<IterRecord> = Vec::new();
    let mut best: Option<OptResult> = None;
    let max_outer = 40;
    let base = &spec.terminal;
    let sf = base.scale.max(0.0).sqrt();
    for _outer in 0..max_outer {
        // stacked terminal weight: rows √scale·F then √ρ·Fc
        let rr = rho.sqrt();
        let mut f_aug = DenseMatrix::zeros(base.dim_z() + zc_dim, sys.dim_x());
        f_aug
            .view_mut((0, 0), (base.dim_z(), sys.dim_x()))
            .copy_from(&(&base.f * sf));
        f_aug
            .view_mut((base.dim_z(), 0), (zc_dim, sys.dim_x()))
            .copy_from(&(fc * rr));
        let mut z_aug = Vector::zeros(base.dim_z() + zc_dim);
        z_aug.rows_mut(0, base.dim_z()).copy_from(&(&base.z_f * sf));
        z_aug
            .rows_mut(base.dim_z(), zc_dim)
            .copy_from(&((z_c - &lambda / rho) * rr));
        let inner_spec = CostSpec {
            y_ref: spec.y_ref.clone(),
            alpha: spec.alpha,
            terminal: TerminalWeight::new(f_aug, z_aug, 1.0),
        };
        let inner = match adm {
            AdmissibleSet::Unconstrained => solve_unconstrained_cg(
                sys, &inner_spec, x0, grid, scheme, tol * 1e-2, max_iter,
            )?,
            AdmissibleSet::Box { .. } => solve_projected_gradient(
                sys, &inner_spec, x0, adm, grid, scheme, tol * 1e-2, max_iter,
            )?,
        };
        let c = fc * inner.x.last() - z_c;
        let infeas = c.norm();
        let (j_true, _, _) = {
            let stepper = Stepper::new(sys, grid, scheme)?;
            cost_with(&stepper, spec, x0, &inner.u_opt)
        };
        cost_history.push(j_true);
        trace.extend(inner.trace.iter().copied());
        lambda += &c * rho;
        let done = infeas <= tol;
        let result = OptResult {
            u_opt: inner.u_opt,
            x: inner.x,
            y: inner.y,
            cost_history: cost_history.clone(),
            trace: trace.clone(),
            stationarity: inner.stationarity,
            multiplier: Some(lambda.clone()),
            iterations: cost_history.len(),
            converged: done && inner.converged,
        };
        let improved = best
            .as_ref()
            .map(|b| {
                let bc = fc * b.x.last() - z_c;
                infeas < bc.norm()
            })
            .unwrap_or(true);
        if improved {
            best = Some(result);
        }
        if done {
            break;
        }
        if infeas > 0.25 * infeas_prev {
            rho *= 10.0;
        }
        infeas_prev = infeas;
    }
    Ok(best.expect("at least one outer iteration"))
}

/// Dense KKT oracle for the terminal-constrained problem (verification
/// only; assembles the full operator panel). Returns the stacked
/// optimal control, the multiplier, and the smallest singular value of
/// the constraint block `Fc·B_T` (reported instead of guessing a rank
/// threshold).
pub fn dense_kkt_solve(
    sys: &DescriptorSystem,
    spec: &CostSpec,
    x0: &Vector,
    fc: &DenseMatrix,
    z_c: &Vector,
    grid: TimeGrid,
    scheme: Scheme,
) -> Result<(IntervalTrajectory, Vector, f64), IntegratorError> {
    let (m, p) = (sys.dim_u(), sys.dim_y());
    let steps = grid.steps;
    let dt = grid.dt();
    let nu = steps * m;
    let panel = assemble_panel(sys, &spec.terminal, grid, scheme)?;
    let (x_free, y_free) = Stepper::new(sys, grid, scheme)?
        .forward(x0, &IntervalTrajectory::zeros(grid, m));

    // J(vec u) = ½ uᵀH u + gᵀu + const in the stacked Euclidean sense
    let mut wu_big = DenseMatrix::zeros(nu, nu);
    let mut wy_big = DenseMatrix::zeros(steps * p, steps * p);
    for i in 0..steps {
        wu_big.view_mut((i * m, i * m), (m, m)).copy_from(&(&sys.wu * dt));
        wy_big.view_mut((i * p, i * p), (p, p)).copy_from(&(&sys.wy * dt));
    }
    let mut y0 = Vector::zeros(steps * p);
    let mut yref = Vector::zeros(steps * p);
    for i in 0..steps {
        y0.rows_mut(i * p, p).copy_from(y_free.row(i));
        yref.rows_mut(i * p, p).copy_from(spec.y_ref.row(i));
    }
    let mismatch0 = &y0 - &yref;
    let mut h = &panel.d_t.transpose() * &wy_big * &panel.d_t + &wu_big * spec.alpha;
    let mut g = panel.d_t.transpose() * &wy_big * &mismatch0;
    let t = &spec.terminal;
    if t.dim_z() > 0 && t.scale > 0.0 {
        h += (&t.f * &panel.b_t).transpose() * (&t.f * &panel.b_t) * t.scale;
        let c0 = &t.f * x_free.last() - &t.z_f;
        g += (&t.f * &panel.b_t).transpose() * c0 * t.scale;
    }

    // constraint Fc·(x_free(T) + B_T u) = z_c
    let a_c = fc * &panel.b_t;
    let b_c = z_c - fc * x_free.last();
    let sigma_min = a_c
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(f64::INFINITY, |a, &s| a.min(s));

    let zc_dim = fc.nrows();
    let mut kkt = DenseMatrix::zeros(nu + zc_dim, nu + zc_dim);
    kkt.view_mut((0, 0), (nu, nu)).copy_from(&h);
    kkt.view_mut((0, nu), (nu, zc_dim)).copy_from(&a_c.transpose());
    kkt.view_mut((nu, 0), (zc_dim, nu)).copy_from(&a_c);
    let mut rhs = Vector::zeros(nu + zc_dim);
    rhs.rows_mut(0, nu).copy_from(&(-&g));
    rhs.rows_mut(nu, zc_dim).copy_from(&b_c);
    let sol = nalgebra::LU::new(kkt)
        .solve(&rhs)
        .expect("KKT system solvable");
    let u = IntervalTrajectory::new(
        grid,
        (0..steps)
            .map(|i| Vector::from_fn(m, |k, _| sol[i * m + k]))
            .collect(),
    );
    let lambda = Vector::from_fn(zc_dim, |k, _| sol[nu + k]);
    Ok((u, lambda, sigma_min))
}
