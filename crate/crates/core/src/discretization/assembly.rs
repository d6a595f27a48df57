//! Element integration and global assembly of the quadratic forms
//! `A = ‖sym∇y‖²`, `B = ‖∇y‖²`, `M = ‖y‖²`, `N = ‖⟨y,n⟩‖²`.
//!
//! Gradients use the isoparametric map built from the exact nodal positions,
//! so interpolated affine fields (rigid motions in particular) have exact
//! gradients. Integrals use the exact shell volume element
//! `(1 + t tr Π + t² κ)√det g du dv dt`.

use std::sync::Arc;

use nalgebra::Matrix3;
use rayon::prelude::*;

use crate::error::{KornError, Result};
use crate::geometry::{evaluate_unchecked, BoundaryCondition, Vec3};
use crate::quadrature::GaussRule;

use super::dofs::{DofMap, NodeDofs};
use super::mesh::{NodeLayout, ShellMesh};
use super::sparse::{SymCsr, SymPattern};

#[derive(Clone, Copy, Debug)]
pub struct AssemblyOptions {
    pub order: usize,
    /// Gauss points per direction.
    pub quadrature: usize,
    /// Also assemble `N`.
    pub normal_form: bool,
}

impl AssemblyOptions {
    pub fn new(order: usize, quadrature: usize) -> Self {
        AssemblyOptions {
            order,
            quadrature,
            normal_form: true,
        }
    }
}

/// The assembled forms over the free DOFs.
#[derive(Clone, Debug)]
pub struct AssembledForms {
    pub a: SymCsr,
    pub b: SymCsr,
    pub m: SymCsr,
    pub n: Option<SymCsr>,
    /// `y ↦ ∫ skew(∇y)_ij` for `(i, j) ∈ {(0,1), (0,2), (1,2)}`.
    pub skew: [Vec<f64>; 3],
    /// `|Ω|` by the same quadrature.
    pub volume: f64,
    pub dofs: DofMap,
    pub order: usize,
    pub quadrature: usize,
    /// Length scale of the domain (radius, or the largest plane extent).
    pub length_scale: f64,
}

impl AssembledForms {
    pub fn dim(&self) -> usize {
        self.dofs.free_count()
    }

    pub fn is_closed(&self) -> bool {
        self.dofs.boundary() == BoundaryCondition::Closed
    }

    pub fn normal_form(&self) -> Result<&SymCsr> {
        self.n
            .as_ref()
            .ok_or_else(|| KornError::config("the normal form N was not assembled"))
    }

    /// `min_{A ∈ so(3)} ‖∇y − A‖²` as a quadratic form:
    /// `B y − (2/|Ω|) Σ_k c_k (c_k · y)`.
    pub fn apply_corrected_b(&self, x: &[f64], y: &mut [f64]) {
        self.b.mul_vec(x, y);
        for c in &self.skew {
            let s = 2.0 / self.volume * dot(c, x);
            for (yi, ci) in y.iter_mut().zip(c) {
                *yi -= s * ci;
            }
        }
    }

    pub fn corrected_b_quad(&self, x: &[f64]) -> f64 {
        let mut q = self.b.quad(x);
        for c in &self.skew {
            let s = dot(c, x);
            q -= 2.0 / self.volume * s * s;
        }
        q
    }

    /// Nodal interpolant of an ambient field `f(position, normal)`.
    pub fn interpolate(&self, f: impl Fn(&Vec3, &Vec3) -> Vec3) -> Vec<f64> {
        self.dofs.interpolate(f)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Order-2 forms with all four matrices.
pub fn assemble_forms(mesh: &ShellMesh, order: usize, quadrature: usize) -> Result<AssembledForms> {
    assemble_forms_with(mesh, &AssemblyOptions::new(order, quadrature))
}

/// 1D Lagrange basis on `p + 1` equispaced nodes of `[-1, 1]` at the rule's points.
pub(crate) struct Basis1d {
    pub(crate) vals: Vec<Vec<f64>>,
    pub(crate) ders: Vec<Vec<f64>>,
}

pub(crate) fn lagrange_1d(p: usize, points: &[f64]) -> Basis1d {
    let nodes: Vec<f64> = (0..=p).map(|i| -1.0 + 2.0 * i as f64 / p as f64).collect();
    let mut vals = vec![vec![0.0; points.len()]; p + 1];
    let mut ders = vec![vec![0.0; points.len()]; p + 1];
    for i in 0..=p {
        for (g, &x) in points.iter().enumerate() {
            let mut v = 1.0;
            for (m, &xm) in nodes.iter().enumerate() {
                if m != i {
                    v *= (x - xm) / (nodes[i] - xm);
                }
            }
            let mut d = 0.0;
            for (k, &xk) in nodes.iter().enumerate() {
                if k == i {
                    continue;
                }
                let mut term = 1.0 / (nodes[i] - xk);
                for (m, &xm) in nodes.iter().enumerate() {
                    if m != i && m != k {
                        term *= (x - xm) / (nodes[i] - xm);
                    }
                }
                d += term;
            }
            vals[i][g] = v;
            ders[i][g] = d;
        }
    }
    Basis1d { vals, ders }
}

/// Dense element matrices over local components `3a + i`.
struct ElementMatrices {
    a: Vec<f64>,
    b: Vec<f64>,
    m: Vec<f64>,
    n: Vec<f64>,
    g: Vec<Vec3>,
    volume: f64,
}

struct ElementContext<'a> {
    mesh: &'a ShellMesh,
    layout: &'a NodeLayout,
    rule: GaussRule,
    basis: Basis1d,
    p: usize,
    normal_form: bool,
}

impl ElementContext<'_> {
    fn compute(&self, e: usize) -> Result<ElementMatrices> {
        let cell = &self.mesh.cells()[e];
        let chart = &self.mesh.domain().charts()[cell.chart];
        let p1 = self.p + 1;
        let npe = p1 * p1 * p1;
        let nd = 3 * npe;
        let nodes = self.layout.element_nodes(e);
        let xs: Vec<Vec3> = nodes.iter().map(|&i| self.layout.positions[i as usize]).collect();
        let q = self.rule.len();
        let (du, dv, dt) = (cell.u.1 - cell.u.0, cell.v.1 - cell.v.0, cell.t.1 - cell.t.0);
        let jac_param = du * dv * dt / 8.0;

        let mut k_sc = vec![0.0; npe * npe];
        let mut m_sc = vec![0.0; npe * npe];
        let mut cross = vec![0.0; nd * nd];
        let mut nmat = if self.normal_form { vec![0.0; nd * nd] } else { Vec::new() };
        let mut gsum = vec![Vec3::zeros(); npe];
        let mut volume = 0.0;
        let mut shape = vec![0.0; npe];
        let mut dref = vec![Vec3::zeros(); npe];
        let mut grads = vec![Vec3::zeros(); npe];

        for gx in 0..q {
            for gy in 0..q {
                let u = cell.u.0 + 0.5 * du * (self.rule.nodes()[gx] + 1.0);
                let v = cell.v.0 + 0.5 * dv * (self.rule.nodes()[gy] + 1.0);
                let geom = evaluate_unchecked(chart, u, v);
                let kappa = geom.gauss_curvature_from_forms();
                for gz in 0..q {
                    let t = cell.t.0 + 0.5 * dt * (self.rule.nodes()[gz] + 1.0);
                    let vw = (1.0 + t * geom.mean_trace + t * t * kappa) * geom.area_element;
                    let w = self.rule.weights()[gx] * self.rule.weights()[gy] * self.rule.weights()[gz] * vw * jac_param;
                    let mut jac = Matrix3::zeros();
                    for kk in 0..p1 {
                        for jj in 0..p1 {
                            for ii in 0..p1 {
                                let a = ii + p1 * (jj + p1 * kk);
                                let (lx, ly, lz) = (self.basis.vals[ii][gx], self.basis.vals[jj][gy], self.basis.vals[kk][gz]);
                                let (dx, dy, dz) = (self.basis.ders[ii][gx], self.basis.ders[jj][gy], self.basis.ders[kk][gz]);
                                shape[a] = lx * ly * lz;
                                dref[a] = Vec3::new(dx * ly * lz, lx * dy * lz, lx * ly * dz);
                                jac += xs[a] * dref[a].transpose();
                            }
                        }
                    }
                    let det = jac.determinant();
                    if !(det > 0.0) {
                        return Err(KornError::Assembly {
                            element: e,
                            reason: format!("isoparametric Jacobian determinant {det:.3e} is not positive"),
                        });
                    }
                    let inv_t = jac
                        .try_inverse()
                        .ok_or_else(|| KornError::Assembly {
                            element: e,
                            reason: "singular isoparametric Jacobian".into(),
                        })?
                        .transpose();
                    for a in 0..npe {
                        grads[a] = inv_t * dref[a];
                        gsum[a] += w * grads[a];
                    }
                    volume += w;
                    for a in 0..npe {
                        let ga = grads[a];
                        let wna = w * shape[a];
                        for b in 0..npe {
                            k_sc[a * npe + b] += w * ga.dot(&grads[b]);
                            m_sc[a * npe + b] += wna * shape[b];
                        }
                        for i in 0..3 {
                            let row = (3 * a + i) * nd;
                            for b in 0..npe {
                                let gb = grads[b];
                                for j in 0..3 {
                                    // ∫ ∂_j N_a ∂_i N_b
                                    cross[row + 3 * b + j] += w * ga[j] * gb[i];
                                }
                            }
                        }
                    }
                    if self.normal_form {
                        let n = geom.normal;
                        for a in 0..npe {
                            let wna = w * shape[a];
                            for i in 0..3 {
                                let row = (3 * a + i) * nd;
                                for b in 0..npe {
                                    let s = wna * shape[b] * n[i];
                                    for j in 0..3 {
                                        nmat[row + 3 * b + j] += s * n[j];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }

        let mut am = vec![0.0; nd * nd];
        let mut bm = vec![0.0; nd * nd];
        let mut mm = vec![0.0; nd * nd];
        for a in 0..npe {
            for b in 0..npe {
                let ksc = k_sc[a * npe + b];
                let msc = m_sc[a * npe + b];
                for i in 0..3 {
                    let r = (3 * a + i) * nd + 3 * b + i;
                    bm[r] = ksc;
                    mm[r] = msc;
                }
            }
        }
        for idx in 0..nd * nd {
            am[idx] = 0.5 * (bm[idx] + cross[idx]);
        }
        Ok(ElementMatrices {
            a: am,
            b: bm,
            m: mm,
            n: nmat,
            g: gsum,
            volume,
        })
    }
}

/// Global DOFs touched by an element: `(global, local component, direction)`.
fn element_dofs(dofs: &DofMap, nodes: &[u32]) -> Vec<(usize, usize, Vec3, bool)> {
    let mut out = Vec::with_capacity(3 * nodes.len());
    for (a, &node) in nodes.iter().enumerate() {
        let unit = matches!(dofs.node(node as usize), NodeDofs::Free { .. });
        for (k, (d, dir)) in dofs.node_basis(node as usize).enumerate() {
            // for free nodes the direction is e_k, so the local index is 3a + k
            out.push((d, 3 * a + k, dir, unit));
        }
    }
    out
}

fn build_pattern(layout: &NodeLayout, dofs: &DofMap) -> Result<SymPattern> {
    let n_nodes = layout.node_count();
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n_nodes];
    let npe = layout.nodes_per_element;
    for e in 0..layout.connectivity.len() / npe {
        let nodes = layout.element_nodes(e);
        for &a in nodes {
            adj[a as usize].extend_from_slice(nodes);
        }
    }
    let mut rows: Vec<Vec<u32>> = vec![Vec::new(); dofs.free_count()];
    for (node, list) in adj.iter_mut().enumerate() {
        list.sort_unstable();
        list.dedup();
        let my: Vec<usize> = dofs.node_basis(node).map(|(d, _)| d).collect();
        if my.is_empty() {
            continue;
        }
        let mut cols: Vec<u32> = Vec::new();
        for &nb in list.iter() {
            for (d, _) in dofs.node_basis(nb as usize) {
                cols.push(d as u32);
            }
        }
        cols.sort_unstable();
        for &r in &my {
            rows[r] = cols.iter().copied().filter(|&c| c as usize <= r).collect();
        }
        list.clear();
        list.shrink_to_fit();
    }
    SymPattern::from_rows(rows)
}

pub fn assemble_forms_with(mesh: &ShellMesh, opts: &AssemblyOptions) -> Result<AssembledForms> {
    let p = opts.order;
    if !(1..=2).contains(&p) {
        return Err(KornError::Unsupported(format!("element order {p}")));
    }
    if opts.quadrature < p + 1 {
        return Err(KornError::config(format!(
            "quadrature order {} is below element order + 1 = {}",
            opts.quadrature,
            p + 1
        )));
    }
    let layout = mesh.layout(p)?;
    let dofs = DofMap::new(layout, mesh.domain().boundary());
    let pattern = Arc::new(build_pattern(layout, &dofs)?);
    let mut a = SymCsr::zeros(pattern.clone());
    let mut b = SymCsr::zeros(pattern.clone());
    let mut m = SymCsr::zeros(pattern.clone());
    let mut n = opts.normal_form.then(|| SymCsr::zeros(pattern.clone()));
    let mut skew = [vec![0.0; dofs.free_count()], vec![0.0; dofs.free_count()], vec![0.0; dofs.free_count()]];
    let mut volume = 0.0;

    let rule = GaussRule::new(opts.quadrature);
    let basis = lagrange_1d(p, rule.nodes());
    let ctx = ElementContext {
        mesh,
        layout,
        rule,
        basis,
        p,
        normal_form: opts.normal_form,
    };
    let n_elem = mesh.cell_count();
    let nd = 3 * layout.nodes_per_element;
    let chunk = 64;
    for start in (0..n_elem).step_by(chunk) {
        let end = (start + chunk).min(n_elem);
        let mats: Vec<Result<ElementMatrices>> = (start..end).into_par_iter().map(|e| ctx.compute(e)).collect();
        for (off, em) in mats.into_iter().enumerate() {
            let em = em?;
            let e = start + off;
            volume += em.volume;
            let nodes = layout.element_nodes(e);
            let ed = element_dofs(&dofs, nodes);
            // skew functionals
            for &(d, local, dir, _) in &ed {
                let a_node = local / 3;
                let g = em.g[a_node];
                // component of the displacement along `dir`
                for (k, (i, j)) in [(0usize, 1usize), (0, 2), (1, 2)].into_iter().enumerate() {
                    skew[k][d] += 0.5 * (dir[i] * g[j] - dir[j] * g[i]);
                }
            }
            for &(r, lp, dp, up) in &ed {
                for &(c, lq, dq, uq) in &ed {
                    if c > r {
                        continue;
                    }
                    let pos = pattern.position(r, c).ok_or_else(|| KornError::Assembly {
                        element: e,
                        reason: "entry missing from the sparsity pattern".into(),
                    })?;
                    let val = |mat: &[f64]| -> f64 {
                        if up && uq {
                            mat[lp * nd + lq]
                        } else {
                            let (ap, aq) = (lp / 3 * 3, lq / 3 * 3);
                            let mut s = 0.0;
                            for i in 0..3 {
                                for j in 0..3 {
                                    s += dp[i] * dq[j] * mat[(ap + i) * nd + aq + j];
                                }
                            }
                            s
                        }
                    };
                    a.values_mut()[pos] += val(&em.a);
                    b.values_mut()[pos] += val(&em.b);
                    m.values_mut()[pos] += val(&em.m);
                    if let Some(nm) = n.as_mut() {
                        nm.values_mut()[pos] += val(&em.n);
                    }
                }
            }
        }
    }
    Ok(AssembledForms {
        a,
        b,
        m,
        n,
        skew,
        volume,
        dofs,
        order: p,
        quadrature: opts.quadrature,
        length_scale: mesh.domain().charts()[0].length_scale(),
    })
}

/// `e_x, e_y, e_z, e_x × x, e_y × x, e_z × x` interpolated and
/// M-orthonormalized; empty when the boundary condition excludes rigid motions.
pub fn rigid_motion_basis(forms: &AssembledForms) -> Result<Vec<Vec<f64>>> {
    if !forms.is_closed() {
        return Ok(Vec::new());
    }
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(6);
    for k in 0..6 {
        let mut e = Vec3::zeros();
        e[k % 3] = 1.0;
        let v = if k < 3 {
            forms.interpolate(|_, _| e)
        } else {
            forms.interpolate(|x, _| e.cross(x))
        };
        basis.push(v);
    }
    m_orthonormalize(&forms.m, &mut basis)?;
    Ok(basis)
}

/// Modified Gram–Schmidt in the M inner product, two passes.
pub fn m_orthonormalize(m: &SymCsr, vecs: &mut [Vec<f64>]) -> Result<()> {
    for i in 0..vecs.len() {
        for _ in 0..2 {
            for j in 0..i {
                let mj = m.apply(&vecs[j]);
                let s = dot(&mj, &vecs[i]);
                let (head, tail) = vecs.split_at_mut(i);
                for (x, y) in tail[0].iter_mut().zip(&head[j]) {
                    *x -= s * y;
                }
            }
        }
        let norm = m.quad(&vecs[i]).sqrt();
        if !(norm > 0.0) {
            return Err(KornError::Data("linearly dependent vectors in M-orthonormalization".into()));
        }
        for x in vecs[i].iter_mut() {
            *x /= norm;
        }
    }
    Ok(())
}
