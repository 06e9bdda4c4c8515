//! Port-Hamiltonian nodes: dissipation-output factorization, energy
//! accounting, and the energy-optimal cost reformulation.
//!
//! A node stores the discrete pair `(F&G, K&L)` acting on the co-energy
//! / input stack `ξ = (ê, u)` with `ê = M⁻¹·H·x`:
//!
//! ```text
//!   M ẋ = FG·(ê; u)        y = KL·(ê; u)        stored = ½ xᵀH x
//! ```
//!
//! The structure matrix `M_full = FGᵀ·P_x − KLᵀ·Wu·P_u` (columns
//! `[FGᵀ | −KLᵀWu]`) encodes the power balance: instantaneous
//! dissipation is `−ξᵀ·sym(M_full)·ξ ≥ 0`, and its factorization
//! `2‖RS·ξ‖² = −ξᵀ·sym(M_full)·ξ` yields the dissipation output `w`.
//! Under the implicit midpoint rule the discrete energy balance
//! `supplied = Δstored + dissipated` holds exactly per step, because the
//! stage state is the arithmetic mean and the skew part of `M_full`
//! drops out of the quadratic form.

use crate::integrators::{IntegratorError, Scheme, Stepper};
use crate::linops::{
    sqrt_spd, DenseMatrix, DescriptorSystem, LinopsError, SpdFactor, TerminalWeight, Vector,
};
use crate::ocp::CostSpec;
use crate::timegrid::{IntervalTrajectory, TimeGrid};
use std::fmt::Write as _;

#[derive(Debug, thiserror::Error)]
pub enum PhError {
    #[error("node is not dissipative: sym(M_full) has eigenvalue {eig:.3e} > 0")]
    NotDissipative { eig: f64 },
    #[error("dissipation factor RS missing (call dissipation_factor first)")]
    MissingRs,
    #[error(transparent)]
    Linops(#[from] LinopsError),
}

#[derive(Clone)]
pub struct PHNode {
    /// state mass matrix (SPD)
    pub mass: DenseMatrix,
    /// n×(n+m) discrete F&G acting on (ê, u)
    pub fg: DenseMatrix,
    /// m×(n+m) discrete K&L acting on (ê, u)
    pub kl: DenseMatrix,
    /// n×n Hamiltonian weight (SPD); stored energy ½ xᵀH x
    pub h: DenseMatrix,
    /// w×(n+m) dissipation factor, if factorized
    pub rs: Option<DenseMatrix>,
    /// input weight (SPD), also the output weight (collocated ports)
    pub wu: DenseMatrix,
}

impl PHNode {
    pub fn new(
        mass: DenseMatrix,
        fg: DenseMatrix,
        kl: DenseMatrix,
        h: DenseMatrix,
        wu: DenseMatrix,
    ) -> Result<Self, PhError> {
        let n = mass.nrows();
        let m = wu.nrows();
        assert_eq!(fg.shape(), (n, n + m), "F&G shape");
        assert_eq!(kl.shape(), (m, n + m), "K&L shape");
        assert_eq!(h.shape(), (n, n), "H shape");
        SpdFactor::new(&mass).map_err(PhError::Linops)?;
        SpdFactor::new(&h).map_err(PhError::Linops)?;
        SpdFactor::new(&wu).map_err(PhError::Linops)?;
        Ok(Self { mass, fg, kl, h, rs: None, wu })
    }

    pub fn dim_x(&self) -> usize {
        self.mass.nrows()
    }

    pub fn dim_u(&self) -> usize {
        self.wu.nrows()
    }

    /// Structure matrix with column blocks `[FGᵀ | −KLᵀ·Wu]`.
    pub fn m_full(&self) -> DenseMatrix {
        let (n, m) = (self.dim_x(), self.dim_u());
        let mut t = DenseMatrix::zeros(n + m, n + m);
        t.view_mut((0, 0), (n + m, n)).copy_from(&self.fg.transpose());
        t.view_mut((0, n), (n + m, m))
            .copy_from(&(-self.kl.transpose() * &self.wu));
        t
    }

    /// Factorize the dissipation and store RS on the node.
    pub fn with_dissipation_factor(mut self) -> Result<Self, PhError> {
        self.rs = Some(dissipation_factor(&self.m_full())?);
        Ok(self)
    }

    /// Equivalent descriptor system: `A = FG_x·M⁻¹·H`, `B = FG_u`,
    /// `C = KL_x·M⁻¹·H`, `D = KL_u`, collocated weights `Wy = Wu`.
    pub fn to_descriptor(&self) -> DescriptorSystem {
        let (n, m) = (self.dim_x(), self.dim_u());
        let mass = SpdFactor::new(&self.mass).expect("mass SPD (checked)");
        let minv_h = mass.solve_mat(&self.h);
        let fg_x = self.fg.view((0, 0), (n, n)).into_owned();
        let fg_u = self.fg.view((0, n), (n, m)).into_owned();
        let kl_x = self.kl.view((0, 0), (m, n)).into_owned();
        let kl_u = self.kl.view((0, n), (m, m)).into_owned();
        DescriptorSystem::new(
            self.mass.clone(),
            &fg_x * &minv_h,
            fg_u,
            &kl_x * &minv_h,
            kl_u,
            self.wu.clone(),
            self.wu.clone(),
        )
        .expect("descriptor dimensions consistent by construction")
    }
}

/// Factor the dissipation: returns RS with
/// `2‖RS·ξ‖² = −ξᵀ·sym(M_full)·ξ` for all ξ. Built from the symmetric
/// eigendecomposition of `−sym(M_full)`, keeping eigenvalues above
/// `1e-12·λ_max` and scaling the eigenvectors by `√(λ/2)`; the row
/// count is the numerical rank (zero rows for a lossless node).
/// Rejects indefinite input (eigenvalue below `−1e-12·λ_max`).
pub fn dissipation_factor(m_full: &DenseMatrix) -> Result<DenseMatrix, PhError> {
    let k = m_full.nrows();
    assert_eq!(m_full.ncols(), k, "M_full must be square");
    let q = -(m_full + m_full.transpose()) * 0.5;
    let eig = q.clone().symmetric_eigen();
    let lmax = eig.eigenvalues.iter().fold(0.0f64, |a, &l| a.max(l.abs())).max(1.0);
    let cut = 1e-12 * lmax;
    for &l in eig.eigenvalues.iter() {
        if l < -cut {
            return Err(PhError::NotDissipative { eig: -l });
        }
    }
    let kept: Vec<usize> = (0..k).filter(|&i| eig.eigenvalues[i] > cut).collect();
    let mut rs = DenseMatrix::zeros(kept.len(), k);
    for (row, &i) in kept.iter().enumerate() {
        let v = eig.eigenvectors.column(i) * (eig.eigenvalues[i] / 2.0).sqrt();
        rs.row_mut(row).copy_from(&v.transpose());
    }
    Ok(rs)
}

/// Per-step energy accounting from one simulation: stored energy at
/// every node, supplied and dissipated energy per interval (stage
/// quadrature matching the integrator).
pub struct EnergyLedger {
    pub grid: TimeGrid,
    pub stored: Vec<f64>,
    pub supplied: Vec<f64>,
    pub dissipated: Vec<f64>,
}

impl EnergyLedger {
    pub fn supplied_total(&self) -> f64 {
        self.supplied.iter().sum()
    }

    pub fn dissipated_total(&self) -> f64 {
        self.dissipated.iter().sum()
    }

    /// `|supplied − Δstored − dissipated|`
    pub fn balance_residual(&self) -> f64 {
        (self.supplied_total() - (self.stored[self.grid.steps] - self.stored[0])
            - self.dissipated_total())
        .abs()
    }

    /// CSV: `t,stored,supplied_cum,dissipated_cum,balance_residual`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,stored,supplied_cum,dissipated_cum,balance_residual\n");
        let mut sup = 0.0;
        let mut dis = 0.0;
        for i in 0..=self.grid.steps {
            if i > 0 {
                sup += self.supplied[i - 1];
                dis += self.dissipated[i - 1];
            }
            let bal = (sup - (self.stored[i] - self.stored[0]) - dis).abs();
            let _ = writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                self.grid.node_time(i),
                self.stored[i],
                sup,
                dis,
                bal
            );
        }
        out
    }
}

/// Simulate the node and account energy per step. Exact balance is
/// guaranteed for `ImplicitMidpoint`; other schemes simply report their
/// defect. Requires RS on the node.
pub fn energy_ledger(
    ph: &PHNode,
    x0: &Vector,
    u: &IntervalTrajectory,
    scheme: Scheme,
) -> Result<EnergyLedger, PhError> {
    let rs = ph.rs.as_ref().ok_or(PhError::MissingRs)?;
    let sys = ph.to_descriptor();
    let stepper = Stepper::new(&sys, u.grid, scheme).map_err(|e| match e {
        IntegratorError::SingularStepMatrix { dt } => {
            PhError::Linops(LinopsError::Dimension(format!("singular step matrix, dt {dt}")))
        }
    })?;
    let (x, _) = stepper.forward(x0, u);
    let mass = SpdFactor::new(&ph.mass).expect("mass SPD");
    let (n, m) = (ph.dim_x(), ph.dim_u());
    let dt = u.grid.dt();
    let theta = scheme.theta();
    let mut stored = Vec::with_capacity(u.grid.steps + 1);
    for i in 0..=u.grid.steps {
        stored.push(0.5 * x.row(i).dot(&(&ph.h * x.row(i))));
    }
    let mut supplied = Vec::with_capacity(u.grid.steps);
    let mut dissipated = Vec::with_capacity(u.grid.steps);
    for i in 0..u.grid.steps {
        let x_stage = x.row(i + 1) * theta + x.row(i) * (1.0 - theta);
        let e_stage = mass.solve(&(&ph.h * x_stage));
        let mut xi = Vector::zeros(n + m);
        xi.rows_mut(0, n).copy_from(&e_stage);
        xi.rows_mut(n, m).copy_from(u.row(i));
        let y_stage = &ph.kl * &xi;
        supplied.push(dt * y_stage.dot(&(&ph.wu * u.row(i))));
        let w = rs * &xi;
        dissipated.push(dt * 2.0 * w.norm_squared());
    }
    Ok(EnergyLedger { grid: u.grid, stored, supplied, dissipated })
}

/// `|supplied − Δstored − dissipated|` over the whole horizon.
pub fn energy_balance_residual(
    ph: &PHNode,
    x0: &Vector,
    u: &IntervalTrajectory,
    scheme: Scheme,
) -> Result<f64, PhError> {
    Ok(energy_ledger(ph, x0, u, scheme)?.balance_residual())
}

/// Recast energy-optimal control as an output-tracking problem.
///
/// Returns the descriptor system whose output is the scaled dissipation
/// output `2·RS·ξ` (so `½∫‖y‖²` equals the dissipated energy) and the
/// cost whose terminal operator stacks `√scale·F` over `√H`, targets
/// `√scale·z_f` over 0. Minimizing the returned cost minimizes
/// supplied energy plus the original terminal weight, shifted by the
/// constant `½⟨x0, H x0⟩`:
///
/// ```text
///   J_ref(u) = supplied(u) + ½⟨x0,H x0⟩ + (scale/2)‖F·x(T)−z_f‖²
/// ```
///
/// exactly under implicit midpoint (energy balance). A terminal
/// equality constraint passes through unchanged.
pub fn energy_optimal_reformulate(
    ph: &PHNode,
    f: &TerminalWeight,
    grid: TimeGrid,
    constraint: Option<(DenseMatrix, Vector)>,
) -> Result<(DescriptorSystem, CostSpec, Option<(DenseMatrix, Vector)>), PhError> {
    let rs = ph.rs.as_ref().ok_or(PhError::MissingRs)?;
    let (n, m) = (ph.dim_x(), ph.dim_u());
    let w_dim = rs.nrows();
    let mass = SpdFactor::new(&ph.mass).expect("mass SPD");
    let minv_h = mass.solve_mat(&ph.h);
    let base = ph.to_descriptor();
    // output = 2·RS·(ê, u): C = 2·RS_x·M⁻¹H, D = 2·RS_u
    let rs_x = rs.view((0, 0), (w_dim, n)).into_owned();
    let rs_u = rs.view((0, n), (w_dim, m)).into_owned();
    let sys = DescriptorSystem::new(
        base.m,
        base.a,
        base.b,
        &rs_x * &minv_h * 2.0,
        rs_u * 2.0,
        ph.wu.clone(),
        DenseMatrix::identity(w_dim, w_dim),
    )
    .map_err(PhError::Linops)?;
    // terminal stack: √scale·F over √H, targets √scale·z_f over 0
    let sqrt_h = sqrt_spd(&ph.h).map_err(PhError::Linops)?;
    let sf = f.scale.max(0.0).sqrt();
    let z = f.dim_z();
    let mut f_new = DenseMatrix::zeros(z + n, n);
    f_new.view_mut((0, 0), (z, n)).copy_from(&(&f.f * sf));
    f_new.view_mut((z, 0), (n, n)).copy_from(&sqrt_h);
    let mut z_new = Vector::zeros(z + n);
    z_new.rows_mut(0, z).copy_from(&(&f.z_f * sf));
    let spec = CostSpec::new(
        IntervalTrajectory::zeros(grid, w_dim),
        0.0,
        TerminalWeight::new(f_new, z_new, 1.0),
    );
    Ok((sys, spec, constraint))
}
