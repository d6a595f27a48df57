//! The mid-surface rigidity pencil `(∫|Υ(y)|² dg, ∫|y|² dg)` on `S` alone.
//!
//! Unknowns are ambient nodal displacements `y = W^i ∂_i r + w n` on
//! biquadratic elements; tangents come from the isoparametric map so that
//! interpolated rigid motions are exactly strain free.

use std::sync::Arc;

use nalgebra::{Matrix2, Vector3};

use crate::discretization::assembly::lagrange_1d;
use crate::discretization::{build_mesh, m_orthonormalize, Resolution, SymCsr, SymPattern};
use crate::error::{KornError, Result};
use crate::fields::{strain_tensors, MidsurfaceField};
use crate::geometry::{evaluate_unchecked, BoundaryCondition, Chart, ShellDomain, Vec3};
use crate::quadrature::GaussRule;

use super::lanczos::{PencilOps, Settings};
use super::{solve_pencil, EigenResult};

const ORDER: usize = 2;
const QUADRATURE: usize = 4;

/// Assembled 2D forms over the free surface DOFs.
#[derive(Clone, Debug)]
pub struct MidsurfaceForms {
    pub a: SymCsr,
    pub m: SymCsr,
    /// Ambient position of each surface node.
    pub positions: Vec<Vec3>,
    pub normals: Vec<Vec3>,
    /// First DOF of each surface node, `None` when clamped.
    pub node_dofs: Vec<Option<usize>>,
    /// M-orthonormal rigid motions (closed surfaces only).
    pub rigid: Vec<Vec<f64>>,
}

impl MidsurfaceForms {
    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    pub fn interpolate(&self, f: impl Fn(&Vec3, &Vec3) -> Vec3) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        for (i, d) in self.node_dofs.iter().enumerate() {
            if let Some(d) = d {
                let y = f(&self.positions[i], &self.normals[i]);
                x[*d..*d + 3].copy_from_slice(y.as_slice());
            }
        }
        x
    }

    /// Assemble on `charts` (one chart, or a closed cover) with
    /// `resolution` cells per chart.
    pub fn assemble(charts: &[Chart], clamped: bool, resolution: (usize, usize)) -> Result<Self> {
        let bc = if clamped {
            BoundaryCondition::Clamped
        } else if charts.len() > 1 {
            BoundaryCondition::Closed
        } else {
            return Err(KornError::Unsupported(
                "free-boundary mid-surface problem (infinitesimal bendings are not excluded)".into(),
            ));
        };
        let scale = charts[0].length_scale();
        let domain = ShellDomain::new(charts.to_vec(), 1e-3 * scale, bc)?;
        let mesh = build_mesh(&domain, Resolution::new(resolution.0, resolution.1, 2))?;
        let layout = mesh.layout(ORDER)?;
        let levels = layout.t_levels;
        let mid = ORDER; // t = 0 level with two cells through the thickness
        let p1 = ORDER + 1;
        let surface = layout.surface_nodes;

        let mut node_dofs = vec![None; surface];
        let mut next = 0usize;
        for (s, slot) in node_dofs.iter_mut().enumerate() {
            if !layout.on_boundary[s * levels + mid] {
                *slot = Some(next);
                next += 3;
            }
        }
        let positions: Vec<Vec3> = (0..surface).map(|s| layout.positions[s * levels + mid]).collect();
        let normals: Vec<Vec3> = (0..surface).map(|s| layout.normals[s * levels + mid]).collect();

        // 2D elements: cells starting at t = 0, bottom node layer
        let elements: Vec<(usize, Vec<usize>)> = mesh
            .cells()
            .iter()
            .enumerate()
            .filter(|(_, c)| c.index.2 == 1)
            .map(|(e, _)| {
                let nodes = layout.element_nodes(e);
                (e, (0..p1 * p1).map(|a| nodes[a] as usize / levels).collect())
            })
            .collect();

        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); surface];
        for (_, nodes) in &elements {
            for &a in nodes {
                adj[a].extend_from_slice(nodes);
            }
        }
        let mut rows: Vec<Vec<u32>> = vec![Vec::new(); next];
        for (s, list) in adj.iter_mut().enumerate() {
            let Some(first) = node_dofs[s] else { continue };
            list.sort_unstable();
            list.dedup();
            let mut cols: Vec<u32> = list
                .iter()
                .filter_map(|&nb| node_dofs[nb])
                .flat_map(|d| (d..d + 3).map(|x| x as u32))
                .collect();
            cols.sort_unstable();
            for r in first..first + 3 {
                rows[r] = cols.iter().copied().filter(|&c| c as usize <= r).collect();
            }
        }
        let pattern = Arc::new(SymPattern::from_rows(rows)?);
        let mut a = SymCsr::zeros(pattern.clone());
        let mut m = SymCsr::zeros(pattern.clone());

        let rule = GaussRule::new(QUADRATURE);
        let basis = lagrange_1d(ORDER, rule.nodes());
        let nloc = p1 * p1;
        for (e, nodes) in &elements {
            let cell = &mesh.cells()[*e];
            let chart = &charts[cell.chart];
            let (du, dv) = (cell.u.1 - cell.u.0, cell.v.1 - cell.v.0);
            let mut ae = vec![0.0; 9 * nloc * nloc];
            let mut me = vec![0.0; nloc * nloc];
            for gx in 0..rule.len() {
                for gy in 0..rule.len() {
                    let u = cell.u.0 + 0.5 * du * (rule.nodes()[gx] + 1.0);
                    let v = cell.v.0 + 0.5 * dv * (rule.nodes()[gy] + 1.0);
                    let geom = evaluate_unchecked(chart, u, v);
                    let w = rule.weights()[gx] * rule.weights()[gy] * geom.area_element * du * dv / 4.0;
                    let mut shape = vec![0.0; nloc];
                    let mut grad = vec![[0.0; 2]; nloc];
                    let mut r = [Vec3::zeros(); 2];
                    for jj in 0..p1 {
                        for ii in 0..p1 {
                            let a = ii + p1 * jj;
                            shape[a] = basis.vals[ii][gx] * basis.vals[jj][gy];
                            grad[a] = [
                                2.0 / du * basis.ders[ii][gx] * basis.vals[jj][gy],
                                2.0 / dv * basis.vals[ii][gx] * basis.ders[jj][gy],
                            ];
                            r[0] += grad[a][0] * positions[nodes[a]];
                            r[1] += grad[a][1] * positions[nodes[a]];
                        }
                    }
                    let g = Matrix2::new(r[0].dot(&r[0]), r[0].dot(&r[1]), r[1].dot(&r[0]), r[1].dot(&r[1]));
                    let gi = g.try_inverse().ok_or_else(|| KornError::Assembly {
                        element: *e,
                        reason: "degenerate isoparametric metric".into(),
                    })?;
                    // strain of each local basis field (a, k)
                    let ups: Vec<Matrix2<f64>> = (0..3 * nloc)
                        .map(|d| {
                            let (a, k) = (d / 3, d % 3);
                            Matrix2::from_fn(|i, j| 0.5 * (grad[a][i] * r[j][k] + grad[a][j] * r[i][k]))
                        })
                        .collect();
                    let raised: Vec<Matrix2<f64>> = ups.iter().map(|u| gi * u * gi).collect();
                    for p in 0..3 * nloc {
                        for q in 0..3 * nloc {
                            ae[p * 3 * nloc + q] += w * raised[p].component_mul(&ups[q]).sum();
                        }
                    }
                    for a in 0..nloc {
                        for b in 0..nloc {
                            me[a * nloc + b] += w * shape[a] * shape[b];
                        }
                    }
                }
            }
            for (la, &na) in nodes.iter().enumerate() {
                let Some(da) = node_dofs[na] else { continue };
                for (lb, &nb) in nodes.iter().enumerate() {
                    let Some(db) = node_dofs[nb] else { continue };
                    for k in 0..3 {
                        for l in 0..3 {
                            let (rr, cc) = (da + k, db + l);
                            if cc > rr {
                                continue;
                            }
                            let pos = pattern.position(rr, cc).ok_or_else(|| KornError::Assembly {
                                element: *e,
                                reason: "entry missing from the sparsity pattern".into(),
                            })?;
                            a.values_mut()[pos] += ae[(3 * la + k) * 3 * nloc + 3 * lb + l];
                            if k == l {
                                m.values_mut()[pos] += me[la * nloc + lb];
                            }
                        }
                    }
                }
            }
        }

        let mut forms = MidsurfaceForms {
            a,
            m,
            positions,
            normals,
            node_dofs,
            rigid: Vec::new(),
        };
        if bc == BoundaryCondition::Closed {
            let mut rigid: Vec<Vec<f64>> = (0..6)
                .map(|k| {
                    let mut e = Vector3::zeros();
                    e[k % 3] = 1.0;
                    if k < 3 {
                        forms.interpolate(|_, _| e)
                    } else {
                        forms.interpolate(|x, _| e.cross(x))
                    }
                })
                .collect();
            m_orthonormalize(&forms.m, &mut rigid)?;
            forms.rigid = rigid;
        }
        Ok(forms)
    }
}

struct MidOps<'a>(&'a MidsurfaceForms);

impl PencilOps for MidOps<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn apply_a(&self, x: &[f64], y: &mut [f64]) {
        self.0.a.mul_vec(x, y);
    }

    fn apply_b(&self, x: &[f64], y: &mut [f64]) {
        self.0.m.mul_vec(x, y);
    }
}

/// Smallest eigenvalue of `(A₂, M₂)`: clamped on `∂S`, or with rigid
/// motions deflated on a closed surface.
pub fn midsurface_rigidity(charts: &[Chart], clamped: bool, resolution: (usize, usize)) -> Result<EigenResult> {
    let forms = MidsurfaceForms::assemble(charts, clamped, resolution)?;
    let settings = Settings {
        tolerance: 1e-9,
        max_restarts: 500,
        block: 4,
        ncv: 40,
        keep: 20,
        seed: 0,
    };
    solve_pencil(&MidOps(&forms), &forms.a, &forms.m, &forms.rigid, &settings, 0.0)
}

/// `∫|Υ|² dg / ∫(|W|² + w²) dg` of a continuous field at `t = 0`, by
/// composite Gauss quadrature (`cells²` cells of `order²` points per chart).
pub fn midsurface_quotient(charts: &[Chart], field: &dyn MidsurfaceField, order: usize, cells: usize) -> Result<f64> {
    if order == 0 || cells == 0 {
        return Err(KornError::config("quadrature order and cell count must be positive"));
    }
    let rule = GaussRule::new(order);
    let (mut num, mut den) = (0.0, 0.0);
    for chart in charts {
        let d = chart.domain();
        let hu = (d.u.1 - d.u.0) / cells as f64;
        let hv = (d.v.1 - d.v.0) / cells as f64;
        for i in 0..cells {
            for j in 0..cells {
                for (xu, wu) in rule.iter() {
                    for (xv, wv) in rule.iter() {
                        let u = d.u.0 + hu * (i as f64 + 0.5 * (xu + 1.0));
                        let v = d.v.0 + hv * (j as f64 + 0.5 * (xv + 1.0));
                        let geom = evaluate_unchecked(chart, u, v);
                        let jet = field.jet(chart, u, v, 0.0);
                        let s = strain_tensors(&jet, &geom);
                        let w = wu * wv * 0.25 * hu * hv * geom.area_element;
                        num += w * s.upsilon_matrix().norm_squared();
                        den += w * (geom.to_ambient(jet.big_w).norm_squared() + jet.w * jet.w);
                    }
                }
            }
        }
    }
    if !(den > 0.0) {
        return Err(KornError::Data("field has zero L² norm".into()));
    }
    Ok(num / den)
}
