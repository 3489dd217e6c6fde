//! Global P1 operators and vectors: mass, damage-degraded stiffness and
//! viscosity, damage-gradient terms, time-averaged loads, and kinematic
//! constraints.
//!
//! Vector fields are interleaved per node: `[u_x0, u_y0, u_x1, u_y1, ...]`.
//! Elastic and viscous tensors are evaluated once per element at a single
//! damage value (one-point quadrature), either the element mean of the nodal
//! damage (default) or the mean of the nodal tensors.

use crate::error::{Error, Result};
use crate::mesh::{element_mean, element_scalar_gradient, ElementGeometry, Mesh2D, TagKind};
use crate::material::MaterialLaw;
use crate::poly::Poly;
use crate::sparse::SparseOperator;
use crate::tensor::Sym2;
use nalgebra::Matrix3;

/// Nodal field with a fixed number of components per node, interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldVector {
    pub ncomp: usize,
    pub values: Vec<f64>,
}

impl FieldVector {
    pub fn zeros(n_nodes: usize, ncomp: usize) -> Self {
        FieldVector { ncomp, values: vec![0.0; n_nodes * ncomp] }
    }

    pub fn n_nodes(&self) -> usize {
        self.values.len() / self.ncomp
    }

    pub fn at(&self, node: usize, comp: usize) -> f64 {
        self.values[node * self.ncomp + comp]
    }

    pub fn set(&mut self, node: usize, comp: usize, v: f64) {
        self.values[node * self.ncomp + comp] = v;
    }
}

/// How the damage field enters element tensors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlphaEval {
    /// Evaluate tensors at the element mean of nodal damage.
    #[default]
    ElementMean,
    /// Average the tensors evaluated at each node.
    NodalMean,
}

fn element_voigt<F: Fn(f64) -> Matrix3<f64>>(
    mesh: &Mesh2D,
    t: usize,
    alpha: &[f64],
    eval: AlphaEval,
    tensor_at: F,
) -> Matrix3<f64> {
    match eval {
        AlphaEval::ElementMean => tensor_at(element_mean(mesh, t, alpha)),
        AlphaEval::NodalMean => {
            let tri = mesh.triangles[t];
            let mut m = Matrix3::zeros();
            for v in 0..3 {
                m += tensor_at(alpha[tri[v]]);
            }
            m / 3.0
        }
    }
}

/// Strain-displacement matrix rows `[e_xx, e_yy, 2 e_xy]`, columns the six
/// element displacement dofs.
fn b_matrix(geo: &ElementGeometry) -> [[f64; 6]; 3] {
    let g = &geo.grads;
    let mut b = [[0.0; 6]; 3];
    for v in 0..3 {
        b[0][2 * v] = g[v][0];
        b[1][2 * v + 1] = g[v][1];
        b[2][2 * v] = g[v][1];
        b[2][2 * v + 1] = g[v][0];
    }
    b
}

fn add_element_voigt_form(
    op: &mut SparseOperator,
    mesh: &Mesh2D,
    geo: &ElementGeometry,
    t: usize,
    c: &Matrix3<f64>,
) {
    let b = b_matrix(geo);
    let tri = mesh.triangles[t];
    let area = geo.area;
    // K_e = area * B^T C B
    let mut cb = [[0.0; 6]; 3];
    for i in 0..3 {
        for j in 0..6 {
            cb[i][j] = (0..3).map(|k| c[(i, k)] * b[k][j]).sum();
        }
    }
    for i in 0..6 {
        let gi = 2 * tri[i / 2] + i % 2;
        for j in 0..6 {
            let gj = 2 * tri[j / 2] + j % 2;
            let v: f64 = (0..3).map(|k| b[k][i] * cb[k][j]).sum();
            op.push(gi, gj, area * v);
        }
    }
}

/// Consistent or lumped mass for the interleaved vector field. Row sums of
/// the consistent matrix equal the lumped diagonal; total mass is
/// `rho * area` per component.
pub fn assemble_mass(mesh: &Mesh2D, rho: f64, lumped: bool) -> Result<SparseOperator> {
    if !(rho > 0.0) {
        return Err(Error::Assembly("rho must be positive".into()));
    }
    let mut op = SparseOperator::new(2 * mesh.n_nodes(), 2 * mesh.n_nodes());
    for t in 0..mesh.n_triangles() {
        let area = mesh.area(t);
        if area <= 0.0 {
            return Err(Error::DegenerateTriangle { index: t, area });
        }
        let tri = mesh.triangles[t];
        if lumped {
            for v in 0..3 {
                for c in 0..2 {
                    op.push(2 * tri[v] + c, 2 * tri[v] + c, rho * area / 3.0);
                }
            }
        } else {
            // Exact P1 element mass: area/12 * (1 + delta_ij).
            for i in 0..3 {
                for j in 0..3 {
                    let m = rho * area / 12.0 * if i == j { 2.0 } else { 1.0 };
                    for c in 0..2 {
                        op.push(2 * tri[i] + c, 2 * tri[j] + c, m);
                    }
                }
            }
        }
    }
    Ok(op)
}

/// Damage-degraded elasticity operator `u -> div C(alpha) e(u)` in weak form.
pub fn assemble_stiffness(
    mesh: &Mesh2D,
    geo: &[ElementGeometry],
    alpha: &[f64],
    law: &MaterialLaw,
    eval: AlphaEval,
) -> SparseOperator {
    let mut op = SparseOperator::new(2 * mesh.n_nodes(), 2 * mesh.n_nodes());
    for t in 0..mesh.n_triangles() {
        let c = element_voigt(mesh, t, alpha, eval, |a| law.elastic_tensor(a).to_voigt());
        add_element_voigt_form(&mut op, mesh, &geo[t], t, &c);
    }
    op
}

/// Viscosity operator with `D(alpha) = D0 + chi C(alpha)`.
pub fn assemble_viscosity(
    mesh: &Mesh2D,
    geo: &[ElementGeometry],
    alpha: &[f64],
    law: &MaterialLaw,
    eval: AlphaEval,
) -> SparseOperator {
    let mut op = SparseOperator::new(2 * mesh.n_nodes(), 2 * mesh.n_nodes());
    for t in 0..mesh.n_triangles() {
        let d = element_voigt(mesh, t, alpha, eval, |a| law.viscosity_tensor(a).0);
        add_element_voigt_form(&mut op, mesh, &geo[t], t, &d);
    }
    op
}

/// Scalar damage-gradient operator. For `p = 2` this is the standard
/// stiffness scaled by `kappa`; for `p > 2` it is the fixed-point
/// linearization at the supplied field, with per-element weight
/// `kappa |grad alpha|^(p-2)`.
pub fn assemble_damage_gradient(
    mesh: &Mesh2D,
    geo: &[ElementGeometry],
    alpha: &[f64],
    kappa: f64,
    p_grad: f64,
) -> Result<SparseOperator> {
    if p_grad < 2.0 {
        return Err(Error::Assembly("p_grad must be >= 2".into()));
    }
    let mut op = SparseOperator::new(mesh.n_nodes(), mesh.n_nodes());
    for t in 0..mesh.n_triangles() {
        let w = if p_grad == 2.0 {
            kappa
        } else {
            let g = element_scalar_gradient(mesh, geo, t, alpha);
            kappa * (g[0] * g[0] + g[1] * g[1]).powf((p_grad - 2.0) / 2.0)
        };
        let tri = mesh.triangles[t];
        for i in 0..3 {
            for j in 0..3 {
                let v = geo[t].grads[i][0] * geo[t].grads[j][0]
                    + geo[t].grads[i][1] * geo[t].grads[j][1];
                op.push(tri[i], tri[j], w * geo[t].area * v);
            }
        }
    }
    Ok(op)
}

/// Gradient energy `integral (kappa/p) |grad alpha|^p`.
pub fn damage_gradient_energy(
    mesh: &Mesh2D,
    geo: &[ElementGeometry],
    alpha: &[f64],
    kappa: f64,
    p_grad: f64,
) -> f64 {
    let mut e = 0.0;
    for t in 0..mesh.n_triangles() {
        let g = element_scalar_gradient(mesh, geo, t, alpha);
        let q = g[0] * g[0] + g[1] * g[1];
        e += kappa / p_grad * q.powf(p_grad / 2.0) * geo[t].area;
    }
    e
}

/// Residual of the p-Laplacian term: `integral kappa |grad a|^(p-2) grad a .
/// grad phi_i`, nonlinear in `alpha` for `p > 2`.
pub fn damage_gradient_residual(
    mesh: &Mesh2D,
    geo: &[ElementGeometry],
    alpha: &[f64],
    kappa: f64,
    p_grad: f64,
) -> Vec<f64> {
    let mut r = vec![0.0; mesh.n_nodes()];
    for t in 0..mesh.n_triangles() {
        let g = element_scalar_gradient(mesh, geo, t, alpha);
        let q = g[0] * g[0] + g[1] * g[1];
        let w = kappa * q.powf((p_grad - 2.0) / 2.0) * geo[t].area;
        let tri = mesh.triangles[t];
        for v in 0..3 {
            r[tri[v]] += w * (g[0] * geo[t].grads[v][0] + g[1] * geo[t].grads[v][1]);
        }
    }
    r
}

/// Time-dependent loading program: bulk force components and per-tag traction
/// components, each a polynomial in time.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadProgram {
    pub bulk: [Poly; 2],
    /// Traction per boundary tag index.
    pub tractions: Vec<Option<[Poly; 2]>>,
}

impl LoadProgram {
    pub fn zero(n_tags: usize) -> Self {
        LoadProgram { bulk: [Poly::zero(), Poly::zero()], tractions: vec![None; n_tags] }
    }

    pub fn is_zero(&self) -> bool {
        self.bulk.iter().all(|p| p.coeffs.iter().all(|&c| c == 0.0))
            && self.tractions.iter().all(|t| {
                t.as_ref()
                    .map_or(true, |g| g.iter().all(|p| p.coeffs.iter().all(|&c| c == 0.0)))
            })
    }
}

/// Load vector with loads averaged exactly over `[t0, t1]`: one-point
/// quadrature for the bulk force, edge trapezoid rule for tractions (each
/// endpoint of an edge of length L receives `g L / 2`).
pub fn assemble_loads(
    mesh: &Mesh2D,
    loads: &LoadProgram,
    t0: f64,
    t1: f64,
) -> Result<Vec<f64>> {
    if !(t1 > t0) {
        return Err(Error::Assembly(format!("need t1 > t0, got [{t0}, {t1}]")));
    }
    if loads.tractions.len() != mesh.tags.len() {
        return Err(Error::Assembly("traction table does not match mesh tags".into()));
    }
    let mut f = vec![0.0; 2 * mesh.n_nodes()];
    let favg = [loads.bulk[0].average(t0, t1), loads.bulk[1].average(t0, t1)];
    if favg[0] != 0.0 || favg[1] != 0.0 {
        for t in 0..mesh.n_triangles() {
            let area = mesh.area(t);
            for &n in &mesh.triangles[t] {
                f[2 * n] += favg[0] * area / 3.0;
                f[2 * n + 1] += favg[1] * area / 3.0;
            }
        }
    }
    for e in &mesh.boundary_edges {
        if let Some(g) = &loads.tractions[e.tag] {
            let gavg = [g[0].average(t0, t1), g[1].average(t0, t1)];
            let half = 0.5 * mesh.edge_length(e);
            for &n in &e.nodes {
                f[2 * n] += gavg[0] * half;
                f[2 * n + 1] += gavg[1] * half;
            }
        }
    }
    Ok(f)
}

/// Internal force vector `integral sigma : e(phi_i)` for piecewise-constant
/// element stresses.
pub fn internal_force(
    mesh: &Mesh2D,
    geo: &[ElementGeometry],
    sigma: &[Sym2],
) -> Vec<f64> {
    let mut f = vec![0.0; 2 * mesh.n_nodes()];
    for t in 0..mesh.n_triangles() {
        let s = &sigma[t];
        let tri = mesh.triangles[t];
        let area = geo[t].area;
        for v in 0..3 {
            let g = geo[t].grads[v];
            f[2 * tri[v]] += area * (s.xx * g[0] + s.xy * g[1]);
            f[2 * tri[v] + 1] += area * (s.xy * g[0] + s.yy * g[1]);
        }
    }
    f
}

/// Kinematic constraints realized by dof elimination: constrained
/// displacement dofs are forced to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraints {
    pub fixed_dof: Vec<bool>,
}

impl Constraints {
    pub fn none(n_nodes: usize) -> Self {
        Constraints { fixed_dof: vec![false; 2 * n_nodes] }
    }

    /// Build from boundary tag kinds. Sliding eliminates the displacement
    /// component along the outward normal; only axis-aligned sliding edges
    /// are supported.
    pub fn from_mesh(mesh: &Mesh2D) -> Result<Self> {
        let mut fixed = vec![false; 2 * mesh.n_nodes()];
        for e in &mesh.boundary_edges {
            match mesh.tags[e.tag].kind {
                TagKind::Fixed => {
                    for &n in &e.nodes {
                        fixed[2 * n] = true;
                        fixed[2 * n + 1] = true;
                    }
                }
                TagKind::NormalSliding => {
                    let nrm = mesh.edge_normal(e);
                    let comp = if nrm[0].abs() > 0.999 {
                        0
                    } else if nrm[1].abs() > 0.999 {
                        1
                    } else {
                        return Err(Error::Assembly(format!(
                            "sliding edge with normal ({:.3}, {:.3}) is not axis-aligned",
                            nrm[0], nrm[1]
                        )));
                    };
                    for &n in &e.nodes {
                        fixed[2 * n + comp] = true;
                    }
                }
                TagKind::Traction | TagKind::Free => {}
            }
        }
        Ok(Constraints { fixed_dof: fixed })
    }

    pub fn any(&self) -> bool {
        self.fixed_dof.iter().any(|&b| b)
    }

    /// Replace constrained rows/columns by the identity so the reduced
    /// system stays SPD; pair with [`Constraints::apply_vec`] on right-hand
    /// sides and solution seeds.
    pub fn apply_operator(&self, op: &mut SparseOperator) {
        if !self.any() {
            return;
        }
        op.entries
            .retain(|&(r, c, _)| !self.fixed_dof[r] && !self.fixed_dof[c]);
        for (i, &f) in self.fixed_dof.iter().enumerate() {
            if f {
                op.push(i, i, 1.0);
            }
        }
    }

    pub fn apply_vec(&self, v: &mut [f64]) {
        for (i, &f) in self.fixed_dof.iter().enumerate() {
            if f {
                v[i] = 0.0;
            }
        }
    }
}
