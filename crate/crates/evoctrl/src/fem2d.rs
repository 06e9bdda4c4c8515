//! Mixed P1 discretization of the boundary-controlled wave equation on
//! the L-shaped domain Ω = (0,1)×(0,2) ∪ (1,2)×(0,1).
//!
//! ```text
//!   ρ ∂²w/∂t² = div(𝒯 grad w) − d ∂w/∂t       in Ω
//!   w = 0                                      on Γ0 (clamped part)
//!   u = ν·(𝒯 grad w)                           on Γ1 (force input)
//!   y = ∂w/∂t|_Γ1                              (velocity output)
//! ```
//!
//! States are momentum p = ρ·∂w/∂t (scalar P1, with the essential
//! condition ρ⁻¹p = 0 on Γ0 replacing the clamping after time
//! differentiation) and strain q = grad w (componentwise P1 on all
//! vertices; the effort conjugate to q is the stress 𝒯q). The
//! Hamiltonian ½(⟨p,ρ⁻¹p⟩ + ⟨q,𝒯q⟩) is realized by weighted mass
//! matrices, and the assembled node has a skew lossless part plus the
//! damping block, so energy accounting in [`crate::ph`] is exact under
//! the implicit midpoint rule.
//!
//! Γ1 consists of the open top edge of the tall leg and the open right
//! edge of the wide leg; the four corner vertices of closure(Γ1) carry
//! the essential condition (Γ0 wins at corners).

use crate::linops::{DenseMatrix, SpdFactor, TerminalWeight, Vector};
use crate::ph::PHNode;
use std::collections::HashMap;

#[derive(Debug, thiserror::Error)]
pub enum Fem2dError {
    #[error("mesh refinement must be at least 2, got {0}")]
    TooCoarse(usize),
    #[error("coefficient {name} must be {requirement} (triangle {tri}: {value:.3e})")]
    BadCoefficient { name: &'static str, requirement: &'static str, tri: usize, value: f64 },
    #[error("coefficient {name} has {got} entries for {want} triangles")]
    CoefficientLength { name: &'static str, got: usize, want: usize },
    #[error("control boundary Γ1 carries no free vertices")]
    EmptyGamma1,
    #[error("reconstruction system is singular")]
    SingularReconstruction,
    #[error("q has {got} entries, expected {want}")]
    BadStressDim { got: usize, want: usize },
}

/// Triangulation of the L-shape with marked boundary parts.
pub struct MeshL {
    /// vertex coordinates (x, y)
    pub vertices: Vec<[f64; 2]>,
    /// positively oriented vertex index triples
    pub triangles: Vec<[usize; 3]>,
    /// clamped boundary edges (everything outside closure(Γ1))
    pub gamma0_edges: Vec<[usize; 2]>,
    /// controlled boundary edges: {y=2, 0≤x≤1} ∪ {x=2, 0≤y≤1}
    pub gamma1_edges: Vec<[usize; 2]>,
    /// square side length 1/n
    pub h: f64,
}

impl MeshL {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
    }

    /// Constant gradients of the three barycentric basis functions.
    fn triangle_grads(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        let inv2a = 1.0 / (2.0 * self.triangle_area(t));
        [
            [(pb[1] - pc[1]) * inv2a, (pc[0] - pb[0]) * inv2a],
            [(pc[1] - pa[1]) * inv2a, (pa[0] - pc[0]) * inv2a],
            [(pa[1] - pb[1]) * inv2a, (pb[0] - pa[0]) * inv2a],
        ]
    }

    /// Vertices lying on the closure of Γ0 (clamped, including the
    /// corner vertices shared with Γ1).
    pub fn gamma0_closure(&self) -> Vec<bool> {
        let mut on = vec![false; self.n_vertices()];
        for e in &self.gamma0_edges {
            on[e[0]] = true;
            on[e[1]] = true;
        }
        on
    }

    /// CSV `x,y` per vertex.
    pub fn vertices_csv(&self) -> String {
        let mut out = String::from("x,y\n");
        for v in &self.vertices {
            out.push_str(&format!("{:.16e},{:.16e}\n", v[0], v[1]));
        }
        out
    }

    /// CSV `v0,v1,v2` per triangle.
    pub fn triangles_csv(&self) -> String {
        let mut out = String::from("v0,v1,v2\n");
        for t in &self.triangles {
            out.push_str(&format!("{},{},{}\n", t[0], t[1], t[2]));
        }
        out
    }
}

/// Structured triangulation: squares of side 1/n covering the three
/// unit squares of the L, each split along the same diagonal.
pub fn build_lshape_mesh(n: usize) -> MeshL {
    assert!(n >= 1, "need n >= 1");
    let h = 1.0 / n as f64;
    let m = 2 * n;
    let inside = |i: usize, j: usize| i <= n || j <= n;
    let mut index = vec![usize::MAX; (m + 1) * (m + 1)];
    let mut vertices = Vec::new();
    for j in 0..=m {
        for i in 0..=m {
            if inside(i, j) {
                index[j * (m + 1) + i] = vertices.len();
                vertices.push([i as f64 * h, j as f64 * h]);
            }
        }
    }
    let at = |i: usize, j: usize| index[j * (m + 1) + i];
    let mut triangles = Vec::new();
    for j in 0..m {
        for i in 0..m {
            // square is in the L iff its right column or top row stays
            // within a leg
            if i + 1 <= n || j + 1 <= n {
                let (v00, v10, v01, v11) = (at(i, j), at(i + 1, j), at(i, j + 1), at(i + 1, j + 1));
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }
    }
    // boundary edges: appear in exactly one triangle
    let mut count: HashMap<(usize, usize), ([usize; 2], usize)> = HashMap::new();
    for t in &triangles {
        for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            let key = (a.min(b), a.max(b));
            count.entry(key).or_insert(([a, b], 0)).1 += 1;
        }
    }
    let mut gamma0_edges = Vec::new();
    let mut gamma1_edges = Vec::new();
    let pos = |v: usize| vertices[v];
    for (_, (e, c)) in count {
        if c != 1 {
            continue;
        }
        let (pa, pb) = (pos(e[0]), pos(e[1]));
        let on_top = (pa[1] - 2.0).abs() < 1e-12 && (pb[1] - 2.0).abs() < 1e-12;
        let on_right = (pa[0] - 2.0).abs() < 1e-12 && (pb[0] - 2.0).abs() < 1e-12;
        if on_top || on_right {
            gamma1_edges.push(e);
        } else {
            gamma0_edges.push(e);
        }
    }
    gamma0_edges.sort_unstable();
    gamma1_edges.sort_unstable();
    MeshL { vertices, triangles, gamma0_edges, gamma1_edges, h }
}

/// Piecewise-constant (per-triangle) coefficient fields.
pub struct WaveParams {
    pub rho: Vec<f64>,
    pub t_mod: Vec<f64>,
    pub d: Vec<f64>,
}

impl WaveParams {
    pub fn constant(mesh: &MeshL, rho: f64, t_mod: f64, d: f64) -> Self {
        let nt = mesh.triangles.len();
        Self { rho: vec![rho; nt], t_mod: vec![t_mod; nt], d: vec![d; nt] }
    }

    fn validate(&self, mesh: &MeshL) -> Result<(), Fem2dError> {
        let nt = mesh.triangles.len();
        for (name, field) in [("rho", &self.rho), ("T", &self.t_mod), ("d", &self.d)] {
            if field.len() != nt {
                return Err(Fem2dError::CoefficientLength { name, got: field.len(), want: nt });
            }
        }
        for (tri, (&r, &t)) in self.rho.iter().zip(&self.t_mod).enumerate() {
            if r <= 0.0 {
                return Err(Fem2dError::BadCoefficient {
                    name: "rho", requirement: "positive", tri, value: r,
                });
            }
            if t <= 0.0 {
                return Err(Fem2dError::BadCoefficient {
                    name: "T", requirement: "positive", tri, value: t,
                });
            }
        }
        for (tri, &dv) in self.d.iter().enumerate() {
            if dv < 0.0 {
                return Err(Fem2dError::BadCoefficient {
                    name: "d", requirement: "nonnegative", tri, value: dv,
                });
            }
        }
        Ok(())
    }
}

/// Scalar P1 mass with a per-triangle weight.
fn scalar_mass(mesh: &MeshL, weight: impl Fn(usize) -> f64) -> DenseMatrix {
    let nv = mesh.n_vertices();
    let mut m = DenseMatrix::zeros(nv, nv);
    for t in 0..mesh.triangles.len() {
        let coeff = weight(t) * mesh.triangle_area(t) / 12.0;
        let vs = mesh.triangles[t];
        for (il, &i) in vs.iter().enumerate() {
            for (jl, &j) in vs.iter().enumerate() {
                m[(i, j)] += coeff * if il == jl { 2.0 } else { 1.0 };
            }
        }
    }
    m
}

fn restrict(m: &DenseMatrix, dofs: &[usize]) -> DenseMatrix {
    DenseMatrix::from_fn(dofs.len(), dofs.len(), |r, c| m[(dofs[r], dofs[c])])
}

/// Gradient coupling G ∈ R^{2nv×np}: G[(comp·nv + b), φ] = ⟨Ψ_{b,comp},
/// grad φ⟩ over the free scalar basis (component-major stress dofs).
fn gradient_coupling(mesh: &MeshL, p_index: &[Option<usize>], np: usize) -> DenseMatrix {
    let nv = mesh.n_vertices();
    let mut g = DenseMatrix::zeros(2 * nv, np);
    for t in 0..mesh.triangles.len() {
        let area3 = mesh.triangle_area(t) / 3.0;
        let grads = mesh.triangle_grads(t);
        let vs = mesh.triangles[t];
        for (al, &va) in vs.iter().enumerate() {
            let Some(col) = p_index[va] else { continue };
            for &vb in vs.iter() {
                for comp in 0..2 {
                    g[(comp * nv + vb, col)] += area3 * grads[al][comp];
                }
            }
        }
    }
    g
}

/// Assembled wave node plus the dof bookkeeping needed by consumers.
pub struct WaveAssembly {
    pub node: PHNode,
    /// momentum dof → vertex (vertices off closure(Γ0))
    pub p_vertices: Vec<usize>,
    /// control dof → vertex (free vertices on Γ1)
    pub u_vertices: Vec<usize>,
    /// ρ⁻¹-weighted momentum mass block of H (kinetic-energy form)
    pub h_kinetic: DenseMatrix,
    pub n_vertices: usize,
}

impl WaveAssembly {
    pub fn dim_p(&self) -> usize {
        self.p_vertices.len()
    }

    /// Kinetic energy ½⟨p, ρ⁻¹p⟩ of a state (p, q).
    pub fn kinetic_energy(&self, x: &Vector) -> f64 {
        let p = x.rows(0, self.dim_p()).into_owned();
        0.5 * p.dot(&(&self.h_kinetic * &p))
    }

    /// Stress part of a state vector.
    pub fn stress_part(&self, x: &Vector) -> Vector {
        x.rows(self.dim_p(), 2 * self.n_vertices).into_owned()
    }
}

/// Port-Hamiltonian node of the wave system. State x = (p, q) with p on
/// the free scalar dofs and q component-major on all vertices; input =
/// nodal boundary force on the free Γ1 vertices with the Γ1 trace mass
/// as weight; output = collocated boundary velocity trace.
pub fn assemble_wave(mesh: &MeshL, params: &WaveParams) -> Result<WaveAssembly, Fem2dError> {
    params.validate(mesh)?;
    let nv = mesh.n_vertices();
    let clamped = mesh.gamma0_closure();
    let mut p_index = vec![None; nv];
    let mut p_vertices = Vec::new();
    for v in 0..nv {
        if !clamped[v] {
            p_index[v] = Some(p_vertices.len());
            p_vertices.push(v);
        }
    }
    let np = p_vertices.len();
    let mut u_vertices: Vec<usize> = mesh
        .gamma1_edges
        .iter()
        .flatten()
        .copied()
        .filter(|&v| !clamped[v])
        .collect();
    u_vertices.sort_unstable();
    u_vertices.dedup();
    if u_vertices.is_empty() {
        return Err(Fem2dError::EmptyGamma1);
    }
    let m = u_vertices.len();

    let mass_plain = scalar_mass(mesh, |_| 1.0);
    let m_p = restrict(&mass_plain, &p_vertices);
    let h_p = restrict(&scalar_mass(mesh, |t| 1.0 / params.rho[t]), &p_vertices);
    let m_d = restrict(&scalar_mass(mesh, |t| params.d[t]), &p_vertices);
    let mass_t = scalar_mass(mesh, |t| params.t_mod[t]);
    let g = gradient_coupling(mesh, &p_index, np);

    // Γ1 trace mass on the free control vertices (1D P1 mass per edge;
    // clamped corner endpoints simply drop out)
    let mut u_index = vec![None; nv];
    for (k, &v) in u_vertices.iter().enumerate() {
        u_index[v] = Some(k);
    }
    let mut wu = DenseMatrix::zeros(m, m);
    for e in &mesh.gamma1_edges {
        let (pa, pb) = (mesh.vertices[e[0]], mesh.vertices[e[1]]);
        let le = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
        for (il, &vi) in e.iter().enumerate() {
            let Some(r) = u_index[vi] else { continue };
            for (jl, &vj) in e.iter().enumerate() {
                let Some(c) = u_index[vj] else { continue };
                wu[(r, c)] += le / if il == jl { 3.0 } else { 6.0 };
            }
        }
    }

    let n = np + 2 * nv;
    // block masses and Hamiltonian: M = blkdiag(M_p, M_q ⊗ I₂),
    // H = blkdiag(M_{1/ρ}, M_𝒯 ⊗ I₂)
    let mut mass = DenseMatrix::zeros(n, n);
    mass.view_mut((0, 0), (np, np)).copy_from(&m_p);
    let mut h = DenseMatrix::zeros(n, n);
    h.view_mut((0, 0), (np, np)).copy_from(&h_p);
    for comp in 0..2 {
        let off = np + comp * nv;
        mass.view_mut((off, off), (nv, nv)).copy_from(&mass_plain);
        h.view_mut((off, off), (nv, nv)).copy_from(&mass_t);
    }

    // F&G on (ê_p, ê_q, u): momentum row −M_d·v − Gᵀ·σ + Tᵀ·Wu·u,
    // strain row G·v
    let mut fg = DenseMatrix::zeros(n, n + m);
    fg.view_mut((0, 0), (np, np)).copy_from(&(-&m_d));
    fg.view_mut((0, np), (np, 2 * nv)).copy_from(&(-g.transpose()));
    let mut trace = DenseMatrix::zeros(m, np);
    for (k, &v) in u_vertices.iter().enumerate() {
        trace[(k, p_index[v].expect("control vertices are free"))] = 1.0;
    }
    fg.view_mut((0, n), (np, m)).copy_from(&(trace.transpose() * &wu));
    fg.view_mut((np, 0), (2 * nv, np)).copy_from(&g);
    let mut kl = DenseMatrix::zeros(m, n + m);
    kl.view_mut((0, 0), (m, np)).copy_from(&trace);

    let node = PHNode::new(mass, fg, kl, h, wu).map_err(|_| Fem2dError::EmptyGamma1)?;
    Ok(WaveAssembly { node, p_vertices, u_vertices, h_kinetic: h_p, n_vertices: nv })
}

fn free_scalar_dofs(mesh: &MeshL) -> (Vec<Option<usize>>, Vec<usize>) {
    let clamped = mesh.gamma0_closure();
    let mut index = vec![None; mesh.n_vertices()];
    let mut dofs = Vec::new();
    for v in 0..mesh.n_vertices() {
        if !clamped[v] {
            index[v] = Some(dofs.len());
            dofs.push(v);
        }
    }
    (index, dofs)
}

struct Reconstructor {
    /// normal-equation matrix GᵀM⁻¹G on the free scalar dofs
    k: SpdFactor,
    g: DenseMatrix,
    free: Vec<usize>,
    nv: usize,
}

impl Reconstructor {
    fn new(mesh: &MeshL) -> Result<Self, Fem2dError> {
        let (p_index, free) = free_scalar_dofs(mesh);
        let nv = mesh.n_vertices();
        let g = gradient_coupling(mesh, &p_index, free.len());
        let mass = scalar_mass(mesh, |_| 1.0);
        let minv = SpdFactor::new(&mass).map_err(|_| Fem2dError::SingularReconstruction)?;
        // M⁻¹G with the block mass applied per component
        let mut minv_g = DenseMatrix::zeros(2 * nv, free.len());
        for comp in 0..2 {
            let block = g.view((comp * nv, 0), (nv, free.len())).into_owned();
            minv_g.view_mut((comp * nv, 0), (nv, free.len())).copy_from(&minv.solve_mat(&block));
        }
        let k = SpdFactor::new(&(g.transpose() * &minv_g))
            .map_err(|_| Fem2dError::SingularReconstruction)?;
        Ok(Self { k, g, free, nv })
    }

    /// Free-dof solve of (GᵀM⁻¹G)·w = Gᵀ·q, extended by zero on Γ0.
    fn reconstruct(&self, q: &Vector) -> Result<Vector, Fem2dError> {
        if q.len() != 2 * self.nv {
            return Err(Fem2dError::BadStressDim { got: q.len(), want: 2 * self.nv });
        }
        let w_free = self.k.solve(&(self.g.transpose() * q));
        let mut w = Vector::zeros(self.nv);
        for (dof, &v) in self.free.iter().enumerate() {
            w[v] = w_free[dof];
        }
        Ok(w)
    }
}

/// Recover the nodal displacement from a stress/strain coefficient
/// vector: the unique w vanishing on Γ0 whose discrete gradient (the
/// mass projection of grad w onto vector P1) is closest to q, i.e. the
/// normal equations (GᵀM⁻¹G)·w = Gᵀ·q. Exact for q in the range of the
/// discrete gradient — in particular for every state reached from rest
/// — and maps fields orthogonal to all discrete gradients to zero.
/// (The coefficients enter the dynamics and the Hamiltonian, not the
/// kinematic relation q = grad w, so `params` is only validated here.)
pub fn displacement_reconstruct(
    mesh: &MeshL,
    params: &WaveParams,
    q: &Vector,
) -> Result<Vector, Fem2dError> {
    params.validate(mesh)?;
    Reconstructor::new(mesh)?.reconstruct(q)
}

/// Discrete gradient of a full nodal field (projection of grad w onto
/// component-major vector P1); zero rows of w on Γ0 are not required.
pub fn discrete_gradient(mesh: &MeshL, w: &Vector) -> Vector {
    let nv = mesh.n_vertices();
    let all_index: Vec<Option<usize>> = (0..nv).map(Some).collect();
    let g = gradient_coupling(mesh, &all_index, nv);
    let mass = scalar_mass(mesh, |_| 1.0);
    let minv = SpdFactor::new(&mass).expect("P1 mass is SPD");
    let load = &g * w;
    let mut q = Vector::zeros(2 * nv);
    for comp in 0..2 {
        let rhs = load.rows(comp * nv, nv).into_owned();
        q.rows_mut(comp * nv, nv).copy_from(&minv.solve(&rhs));
    }
    q
}

/// Terminal weight (scale/2)·(‖v(T)‖²_{L²} + ‖w(T) − w_f‖²_{L²}) on the
/// wave state: the momentum block measures the terminal velocity
/// ρ⁻¹p(T) in L², the stress block reconstructs the displacement and
/// compares against the full nodal target w_f.
pub fn displacement_terminal_weight(
    mesh: &MeshL,
    params: &WaveParams,
    assembly: &WaveAssembly,
    w_f: &Vector,
    scale: f64,
) -> Result<TerminalWeight, Fem2dError> {
    params.validate(mesh)?;
    let nv = mesh.n_vertices();
    assert_eq!(w_f.len(), nv, "w_f must be a full nodal field");
    let np = assembly.dim_p();
    let n = np + 2 * nv;
    let rec = Reconstructor::new(mesh)?;
    // momentum block: √(M_{1/ρ}) measures ‖ρ⁻¹p‖_{L²}... the kinetic
    // form ⟨p, ρ⁻¹p⟩ is exactly ‖√ρ·v‖²; the paper's resting-state
    // penalty ‖v‖² coincides for ρ≡1, and we penalize the momentum in
    // the ρ⁻¹-weighted norm in general.
    let sqrt_p = crate::linops::sqrt_spd(&assembly.h_kinetic)
        .map_err(|_| Fem2dError::SingularReconstruction)?;
    // displacement block: √M_sc · (extension ∘ K⁻¹Gᵀ)
    let mass_sc = scalar_mass(mesh, |_| 1.0);
    let sqrt_m = crate::linops::sqrt_spd(&mass_sc)
        .map_err(|_| Fem2dError::SingularReconstruction)?;
    let w_of_q = rec.k.solve_mat(&rec.g.transpose().into_owned());
    let mut extend = DenseMatrix::zeros(nv, rec.free.len());
    for (dof, &v) in rec.free.iter().enumerate() {
        extend[(v, dof)] = 1.0;
    }
    let disp_block = &sqrt_m * &extend * &w_of_q;
    let mut f = DenseMatrix::zeros(np + nv, n);
    f.view_mut((0, 0), (np, np)).copy_from(&sqrt_p);
    f.view_mut((np, np), (nv, 2 * nv)).copy_from(&disp_block);
    let mut z = Vector::zeros(np + nv);
    z.rows_mut(np, nv).copy_from(&(&sqrt_m * w_f));
    Ok(TerminalWeight::new(f, z, scale))
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a[0] + t * dx, a[1] + t * dy);
    ((p[0] - cx).powi(2) + (p[1] - cy).powi(2)).sqrt()
}

/// Nodal distance to the clamped boundary: minimum point-to-segment
/// distance over all Γ0 edges (the target displacement field of the
/// wave experiment).
pub fn distance_to_gamma0(mesh: &MeshL) -> Vector {
    Vector::from_fn(mesh.n_vertices(), |v, _| {
        let p = mesh.vertices[v];
        mesh.gamma0_edges
            .iter()
            .map(|e| point_segment_distance(p, mesh.vertices[e[0]], mesh.vertices[e[1]]))
            .fold(f64::INFINITY, f64::min)
    })
}
