//! P1 finite elements for the 1D advection-diffusion-reaction equation
//! on (0,1) with Dirichlet control at ξ=1 and Neumann observation at
//! ξ=0:
//!
//! ```text
//!   ∂_t x = (a x′)′ + b x′ + c x,   x(0)=0,  x(1)=u,   y = −(a x′)(0)
//! ```
//!
//! The state vector holds the n interior nodal values (uniform mesh,
//! h = 1/(n+1)). The Dirichlet control is handled fully discretely by
//! row replacement: the boundary degree of freedom is identified with
//! the current control sample and its stiffness coupling moved into the
//! input matrix B, so the adjoint is the exact transpose of the fully
//! discrete map (substituting a lifted control at the continuous level
//! would introduce a mass coupling with u̇ instead).
//!
//! The observation is the outward Neumann flux at the left boundary,
//! extracted as the P1 derivative on the first element times `a` at its
//! midpoint.

use crate::linops::{DenseMatrix, DescriptorSystem, Vector};

#[derive(Debug, thiserror::Error)]
pub enum FemError {
    #[error("diffusion coefficient not positive at ξ = {xi:.6} (a = {value:.3e})")]
    NonpositiveDiffusion { xi: f64, value: f64 },
    #[error("need at least 2 interior nodes, got {0}")]
    TooCoarse(usize),
}

/// Coefficients and resolution for the heat example. `n` is the number
/// of interior nodes; the mesh has n+1 elements of width h = 1/(n+1).
pub struct HeatParams {
    pub a: Box<dyn Fn(f64) -> f64>,
    pub b: Box<dyn Fn(f64) -> f64>,
    pub c: Box<dyn Fn(f64) -> f64>,
    pub n: usize,
}

impl HeatParams {
    /// The reference configuration: a ≡ 1, b(ξ) = −ξ, adjustable
    /// constant reaction coefficient.
    pub fn reference(n: usize, reaction: f64) -> Self {
        Self {
            a: Box::new(|_| 1.0),
            b: Box::new(|xi| -xi),
            c: Box::new(move |_| reaction),
            n,
        }
    }
}

// 2-point Gauss on [0,1]: exact for the P1 products with affine
// coefficients used in the experiments.
const GAUSS_PTS: [f64; 2] = [0.21132486540518713, 0.7886751345948129];
const GAUSS_WTS: [f64; 2] = [0.5, 0.5];

struct FullAssembly {
    mass: DenseMatrix,
    stiff: DenseMatrix,
    h: f64,
}

/// Assemble consistent mass and the operator matrix
/// `A_ij = ∫ −a φ_j′ φ_i′ + b φ_j′ φ_i + c φ_j φ_i` over all n+2 nodes.
fn assemble_full(params: &HeatParams) -> Result<FullAssembly, FemError> {
    let n = params.n;
    let nv = n + 2;
    let h = 1.0 / (n + 1) as f64;
    let mut mass = DenseMatrix::zeros(nv, nv);
    let mut stiff = DenseMatrix::zeros(nv, nv);
    for e in 0..=n {
        let x_left = e as f64 * h;
        for (g, w) in GAUSS_PTS.iter().zip(GAUSS_WTS.iter()) {
            let xg = x_left + g * h;
            let a = (params.a)(xg);
            if a <= 0.0 {
                return Err(FemError::NonpositiveDiffusion { xi: xg, value: a });
            }
            let b = (params.b)(xg);
            let c = (params.c)(xg);
            let wq = w * h;
            let phi = [1.0 - g, *g];
            let dphi = [-1.0 / h, 1.0 / h];
            for (il, i) in [e, e + 1].into_iter().enumerate() {
                for (jl, j) in [e, e + 1].into_iter().enumerate() {
                    mass[(i, j)] += wq * phi[il] * phi[jl];
                    stiff[(i, j)] +=
                        wq * (-a * dphi[il] * dphi[jl] + b * dphi[jl] * phi[il] + c * phi[il] * phi[jl]);
                }
            }
        }
    }
    Ok(FullAssembly { mass, stiff, h })
}

/// Descriptor system of the controlled heat equation. State: interior
/// nodal values; input: the Dirichlet boundary value at ξ=1; output:
/// the outward flux −(a x′)(0).
pub fn assemble_heat(params: &HeatParams) -> Result<DescriptorSystem, FemError> {
    if params.n < 2 {
        return Err(FemError::TooCoarse(params.n));
    }
    let n = params.n;
    let full = assemble_full(params)?;
    let m_int = full.mass.view((1, 1), (n, n)).into_owned();
    let a_int = full.stiff.view((1, 1), (n, n)).into_owned();
    // Dirichlet coupling of the boundary node at ξ=1 into interior rows
    let b_col = full.stiff.view((1, n + 1), (n, 1)).into_owned();
    // outward flux at ξ=0 from the first element (x_0 = 0 essential):
    // y = −a(h/2)·(x_1 − x_0)/h
    let mut c_row = DenseMatrix::zeros(1, n);
    c_row[(0, 0)] = -(params.a)(full.h / 2.0) / full.h;
    Ok(DescriptorSystem::new(
        m_int,
        a_int,
        b_col,
        c_row,
        DenseMatrix::zeros(1, 1),
        DenseMatrix::identity(1, 1),
        DenseMatrix::identity(1, 1),
    )
    .expect("assembled dimensions consistent"))
}

/// Independent discretization of the adjoint equation
/// `∂_t x_d = (a x_d′)′ − (b x_d)′ + c x_d` with Dirichlet x_d(1)=0,
/// input at ξ=0, output at ξ=1, used only to cross-check
/// `adjoint_system(assemble_heat(..))`.
///
/// The volume operator comes from its own weak form
/// `−⟨a x_d′, φ′⟩ + ⟨b x_d, φ′⟩ + ⟨c x_d, φ⟩` (integration by parts of
/// the transport term against the test function); the boundary input
/// and output columns follow the documented discrete-transpose
/// convention (input = forward observation functional transposed,
/// output = forward control coupling transposed).
pub fn assemble_heat_adjoint_reference(params: &HeatParams) -> Result<DescriptorSystem, FemError> {
    if params.n < 2 {
        return Err(FemError::TooCoarse(params.n));
    }
    let n = params.n;
    let nv = n + 2;
    let h = 1.0 / (n + 1) as f64;
    let mut mass = DenseMatrix::zeros(nv, nv);
    let mut stiff = DenseMatrix::zeros(nv, nv);
    for e in 0..=n {
        let x_left = e as f64 * h;
        for (g, w) in GAUSS_PTS.iter().zip(GAUSS_WTS.iter()) {
            let xg = x_left + g * h;
            let a = (params.a)(xg);
            if a <= 0.0 {
                return Err(FemError::NonpositiveDiffusion { xi: xg, value: a });
            }
            let b = (params.b)(xg);
            let c = (params.c)(xg);
            let wq = w * h;
            let phi = [1.0 - g, *g];
            let dphi = [-1.0 / h, 1.0 / h];
            for (il, i) in [e, e + 1].into_iter().enumerate() {
                for (jl, j) in [e, e + 1].into_iter().enumerate() {
                    mass[(i, j)] += wq * phi[il] * phi[jl];
                    stiff[(i, j)] +=
                        wq * (-a * dphi[il] * dphi[jl] + b * phi[jl] * dphi[il] + c * phi[il] * phi[jl]);
                }
            }
        }
    }
    let m_int = mass.view((1, 1), (n, n)).into_owned();
    let a_int = stiff.view((1, 1), (n, n)).into_owned();
    // discrete-transpose convention for the boundary operators
    let fwd = assemble_heat(params)?;
    let b_ref = fwd.c.transpose();
    let c_ref = fwd.b.transpose();
    Ok(DescriptorSystem::new(
        m_int,
        a_int,
        b_ref,
        c_ref,
        DenseMatrix::zeros(1, 1),
        DenseMatrix::identity(1, 1),
        DenseMatrix::identity(1, 1),
    )
    .expect("assembled dimensions consistent"))
}

/// Nodal interior coordinates ξ_i = i·h, i = 1..=n (plotting aid).
pub fn interior_coordinates(n: usize) -> Vector {
    let h = 1.0 / (n + 1) as f64;
    Vector::from_fn(n, |i, _| (i + 1) as f64 * h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrators::{simulate_forward, Scheme};
    use crate::linops::adjoint_system;
    use crate::timegrid::{IntervalTrajectory, TimeGrid};

    #[test]
    fn stiffness_matches_hand_assembly_n2() {
        // a ≡ 1, b ≡ 0, c ≡ 0, n = 2, h = 1/3: interior stiffness block
        // of −∫φ′φ′ is −(1/h)·[[2,−1],[−1,2]]
        let params = HeatParams {
            a: Box::new(|_| 1.0),
            b: Box::new(|_| 0.0),
            c: Box::new(|_| 0.0),
            n: 2,
        };
        let sys = assemble_heat(&params).unwrap();
        let h = 1.0 / 3.0;
        let expected = DenseMatrix::from_row_slice(2, 2, &[-2.0 / h, 1.0 / h, 1.0 / h, -2.0 / h]);
        assert!((&sys.a - expected).amax() <= 1e-13);
        // consistent mass: h/6·[[4,1],[1,4]]
        let m_expected = DenseMatrix::from_row_slice(
            2,
            2,
            &[4.0 * h / 6.0, h / 6.0, h / 6.0, 4.0 * h / 6.0],
        );
        assert!((&sys.m - m_expected).amax() <= 1e-13);
        // control couples only through the last interior node
        assert_eq!(sys.b[(0, 0)], 0.0);
        assert!((sys.b[(1, 0)] - 1.0 / h).abs() <= 1e-13);
    }

    #[test]
    fn zero_control_zero_state_gives_zero_output() {
        let params = HeatParams::reference(16, 1.0);
        let sys = assemble_heat(&params).unwrap();
        let grid = TimeGrid::new(1.0, 20);
        let (x, y) = simulate_forward(
            &sys,
            &Vector::zeros(16),
            &IntervalTrajectory::zeros(grid, 1),
            Scheme::ImplicitEuler,
        )
        .unwrap();
        assert_eq!(x.last().amax(), 0.0);
        for i in 0..20 {
            assert_eq!(y.row(i)[0], 0.0);
        }
    }

    #[test]
    fn steady_state_is_linear_profile() {
        // a ≡ 1, b ≡ 0, c ≡ 0, u ≡ 1: x(ξ) → ξ, outward flux → −1
        let params = HeatParams {
            a: Box::new(|_| 1.0),
            b: Box::new(|_| 0.0),
            c: Box::new(|_| 0.0),
            n: 64,
        };
        let sys = assemble_heat(&params).unwrap();
        let grid = TimeGrid::new(10.0, 400);
        let u = IntervalTrajectory::constant(grid, Vector::from_vec(vec![1.0]));
        let (x, y) = simulate_forward(&sys, &Vector::zeros(64), &u, Scheme::ImplicitEuler).unwrap();
        let xi = interior_coordinates(64);
        assert!((x.last() - &xi).amax() <= 1e-2, "profile error {:.3e}", (x.last() - &xi).amax());
        assert!((y.row(grid.steps - 1)[0] + 1.0).abs() <= 1e-2);
    }

    #[test]
    fn adjoint_reference_matches_transposed_system() {
        // b(ξ) = −ξ, the reference configuration
        for reaction in [1.0, 5.0] {
            let params = HeatParams::reference(12, reaction);
            let fwd = assemble_heat(&params).unwrap();
            let adj = adjoint_system(&fwd);
            let refr = assemble_heat_adjoint_reference(&params).unwrap();
            assert!((&adj.a - &refr.a).amax() <= 1e-10, "A mismatch");
            assert!((&adj.b - &refr.b).amax() <= 1e-12, "B mismatch");
            assert!((&adj.c - &refr.c).amax() <= 1e-12, "C mismatch");
            assert!((&adj.m - &refr.m).amax() <= 1e-13, "M mismatch");
        }
    }

    #[test]
    fn self_adjoint_diffusion_has_symmetric_operator() {
        let params = HeatParams {
            a: Box::new(|xi| 1.0 + 0.5 * xi),
            b: Box::new(|_| 0.0),
            c: Box::new(|_| 0.0),
            n: 8,
        };
        let fwd = assemble_heat(&params).unwrap();
        let refr = assemble_heat_adjoint_reference(&params).unwrap();
        assert!((&fwd.a - &refr.a).amax() <= 1e-13, "diffusion part must be self-adjoint");
    }

    #[test]
    fn reaction_term_identical_in_forward_and_adjoint() {
        // isolate the zeroth-order term: difference of c=1 and c=0 runs
        let with = |c_val: f64| {
            let params = HeatParams {
                a: Box::new(|_| 1.0),
                b: Box::new(|_| 0.0),
                c: Box::new(move |_| c_val),
                n: 4,
            };
            (
                assemble_heat(&params).unwrap().a,
                assemble_heat_adjoint_reference(&params).unwrap().a,
            )
        };
        let (f1, r1) = with(1.0);
        let (f0, r0) = with(0.0);
        let reaction_fwd = f1 - f0;
        let reaction_adj = r1 - r0;
        assert!((reaction_fwd - reaction_adj).amax() <= 1e-14);
    }

    #[test]
    fn nonpositive_diffusion_rejected() {
        let params = HeatParams {
            a: Box::new(|xi| 0.5 - xi), // crosses zero inside (0,1)
            b: Box::new(|_| 0.0),
            c: Box::new(|_| 0.0),
            n: 8,
        };
        assert!(matches!(
            assemble_heat(&params),
            Err(FemError::NonpositiveDiffusion { .. })
        ));
    }
}
