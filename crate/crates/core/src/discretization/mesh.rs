//! Structured hexahedral meshes of `S × (−h, h)` pushed through the shell map.

use std::collections::HashMap;
use std::sync::OnceLock;

use crate::error::{KornError, Result};
use crate::geometry::{
    evaluate_unchecked, principal_directions, shell_map_unchecked, BoundaryCondition, ShellDomain, Vec3,
};

/// Cells per chart along `u`, `v` and through the thickness.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Resolution {
    pub n_u: usize,
    pub n_v: usize,
    pub n_t: usize,
}

impl Resolution {
    pub fn new(n_u: usize, n_v: usize, n_t: usize) -> Self {
        Resolution { n_u, n_v, n_t }
    }
}

/// One hexahedral cell: a box in `(u, v, t)` on one chart.
#[derive(Clone, Copy, Debug)]
pub struct Cell {
    pub chart: usize,
    pub index: (usize, usize, usize),
    pub u: (f64, f64),
    pub v: (f64, f64),
    pub t: (f64, f64),
}

/// Where a node sits, in the first chart that produced it.
#[derive(Clone, Copy, Debug)]
pub struct NodeParam {
    pub chart: usize,
    pub u: f64,
    pub v: f64,
    pub t: f64,
}

/// Nodes and connectivity for Lagrange elements of one order.
#[derive(Debug)]
pub struct NodeLayout {
    pub order: usize,
    pub positions: Vec<Vec3>,
    /// Mid-surface normal at the node's surface point.
    pub normals: Vec<Vec3>,
    /// Orthonormal tangent pair at the node's surface point.
    pub tangent_frames: Vec<[Vec3; 2]>,
    pub params: Vec<NodeParam>,
    /// Node lies on `Σ0` (over `∂S`, any `t`).
    pub on_boundary: Vec<bool>,
    /// Element connectivity, `nodes_per_element` entries per cell in
    /// tensor order `a = i + (p+1)(j + (p+1)k)`.
    pub connectivity: Vec<u32>,
    pub nodes_per_element: usize,
    pub surface_nodes: usize,
    pub t_levels: usize,
}

impl NodeLayout {
    pub fn node_count(&self) -> usize {
        self.positions.len()
    }

    pub fn element_nodes(&self, e: usize) -> &[u32] {
        &self.connectivity[e * self.nodes_per_element..(e + 1) * self.nodes_per_element]
    }

    pub fn boundary_node_count(&self) -> usize {
        self.on_boundary.iter().filter(|&&b| b).count()
    }
}

#[derive(Debug)]
pub struct ShellMesh {
    domain: ShellDomain,
    resolution: Resolution,
    cells: Vec<Cell>,
    layouts: [OnceLock<std::result::Result<NodeLayout, String>>; 2],
}

/// Mesh the shell with `resolution` cells on every chart.
pub fn build_mesh(domain: &ShellDomain, resolution: Resolution) -> Result<ShellMesh> {
    let Resolution { n_u, n_v, n_t } = resolution;
    if n_u < 4 || n_v < 4 || n_t < 2 {
        return Err(KornError::config(format!(
            "resolution ({n_u}, {n_v}, {n_t}) is below the minimum (4, 4, 2)"
        )));
    }
    if domain.is_closed() && n_u != n_v {
        return Err(KornError::config("sphere patches need matching edge resolutions (n_u = n_v)"));
    }
    let h = domain.half_thickness();
    let mut cells = Vec::with_capacity(domain.charts().len() * n_u * n_v * n_t);
    for (c, chart) in domain.charts().iter().enumerate() {
        let d = chart.domain();
        let du = (d.u.1 - d.u.0) / n_u as f64;
        let dv = (d.v.1 - d.v.0) / n_v as f64;
        let dt = 2.0 * h / n_t as f64;
        for k in 0..n_t {
            for j in 0..n_v {
                for i in 0..n_u {
                    cells.push(Cell {
                        chart: c,
                        index: (i, j, k),
                        u: (d.u.0 + du * i as f64, d.u.0 + du * (i + 1) as f64),
                        v: (d.v.0 + dv * j as f64, d.v.0 + dv * (j + 1) as f64),
                        t: (-h + dt * k as f64, -h + dt * (k + 1) as f64),
                    });
                }
            }
        }
    }
    // The shell map is a diffeomorphism only while h |λ| < 1; the Jacobian
    // determinant alone can stay positive past that (e.g. (1 + t)² on spheres).
    for (e, cell) in cells.iter().enumerate() {
        if cell.index.2 != 0 {
            continue;
        }
        let chart = &domain.charts()[cell.chart];
        for (u, v) in corners(cell) {
            let g = evaluate_unchecked(chart, u, v);
            let pd = principal_directions(&g);
            let lam = pd.curvatures[0].abs().max(pd.curvatures[1].abs());
            if h * lam >= 1.0 {
                return Err(KornError::Mesh {
                    element: e,
                    reason: format!("h·|λ| = {:.3} ≥ 1: the shell map folds over", h * lam),
                });
            }
            for t in [-h, 0.0, h] {
                let m = shell_map_unchecked(&g, t);
                if !(m.jacobian.determinant() > 0.0) {
                    return Err(KornError::Mesh {
                        element: e,
                        reason: format!("shell-map Jacobian determinant is not positive at t = {t}"),
                    });
                }
            }
        }
    }
    Ok(ShellMesh {
        domain: domain.clone(),
        resolution,
        cells,
        layouts: [OnceLock::new(), OnceLock::new()],
    })
}

fn corners(cell: &Cell) -> [(f64, f64); 4] {
    [
        (cell.u.0, cell.v.0),
        (cell.u.1, cell.v.0),
        (cell.u.0, cell.v.1),
        (cell.u.1, cell.v.1),
    ]
}

impl ShellMesh {
    pub fn domain(&self) -> &ShellDomain {
        &self.domain
    }

    pub fn resolution(&self) -> Resolution {
        self.resolution
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    /// Nodes for Lagrange elements of order 1 or 2, built on first use.
    pub fn layout(&self, order: usize) -> Result<&NodeLayout> {
        if !(1..=2).contains(&order) {
            return Err(KornError::Unsupported(format!("element order {order}")));
        }
        self.layouts[order - 1]
            .get_or_init(|| build_layout(self, order).map_err(|e| e.to_string()))
            .as_ref()
            .map_err(|e| KornError::Mesh {
                element: 0,
                reason: e.clone(),
            })
    }
}

fn build_layout(mesh: &ShellMesh, p: usize) -> Result<NodeLayout> {
    let domain = &mesh.domain;
    let Resolution { n_u, n_v, n_t } = mesh.resolution;
    let h = domain.half_thickness();
    let t_levels = p * n_t + 1;
    let charts = domain.charts();
    let scale = charts[0].length_scale();

    // surface lattice → surface node id
    let mut surface_params: Vec<(usize, f64, f64)> = Vec::new();
    let mut lattice: Vec<Vec<u32>> = Vec::with_capacity(charts.len());
    let quantum = 1e-7 * scale;
    let mut hash: HashMap<(i64, i64, i64), Vec<u32>> = HashMap::new();
    let mut surface_pos: Vec<Vec3> = Vec::new();
    for (c, chart) in charts.iter().enumerate() {
        let d = chart.domain();
        let nu = p * n_u;
        let nv = p * n_v;
        let mut ids = vec![0u32; (nu + 1) * (nv + 1)];
        for j in 0..=nv {
            for i in 0..=nu {
                let u = d.u.0 + (d.u.1 - d.u.0) * i as f64 / nu as f64;
                let v = d.v.0 + (d.v.1 - d.v.0) * j as f64 / nv as f64;
                let slot = i + (nu + 1) * j;
                if d.periodic_u && i == nu {
                    ids[slot] = ids[(nu + 1) * j];
                    continue;
                }
                let pos = chart.position(u, v);
                let id = if domain.is_closed() {
                    let key = |x: f64| (x / quantum).round() as i64;
                    let k = (key(pos[0]), key(pos[1]), key(pos[2]));
                    let mut found = None;
                    'search: for dx in -1..=1 {
                        for dy in -1..=1 {
                            for dz in -1..=1 {
                                if let Some(list) = hash.get(&(k.0 + dx, k.1 + dy, k.2 + dz)) {
                                    for &cand in list {
                                        if (surface_pos[cand as usize] - pos).norm() <= 1e-9 * scale {
                                            found = Some(cand);
                                            break 'search;
                                        }
                                    }
                                }
                            }
                        }
                    }
                    match found {
                        Some(id) => id,
                        None => {
                            let id = surface_params.len() as u32;
                            surface_params.push((c, u, v));
                            surface_pos.push(pos);
                            hash.entry(k).or_default().push(id);
                            id
                        }
                    }
                } else {
                    let id = surface_params.len() as u32;
                    surface_params.push((c, u, v));
                    surface_pos.push(pos);
                    id
                };
                ids[slot] = id;
            }
        }
        lattice.push(ids);
    }

    let surface_nodes = surface_params.len();
    let node_count = surface_nodes * t_levels;
    let mut positions = Vec::with_capacity(node_count);
    let mut normals = Vec::with_capacity(node_count);
    let mut tangent_frames = Vec::with_capacity(node_count);
    let mut params = Vec::with_capacity(node_count);
    let mut on_boundary = Vec::with_capacity(node_count);
    let clamped = domain.boundary() != BoundaryCondition::Closed;
    for &(c, u, v) in &surface_params {
        let chart = &charts[c];
        let g = evaluate_unchecked(chart, u, v);
        let frame = g.orthonormal_frame();
        let boundary = clamped && chart.domain().on_boundary(u, v);
        for k in 0..t_levels {
            let t = -h + 2.0 * h * k as f64 / (t_levels - 1) as f64;
            positions.push(g.position + t * g.normal);
            normals.push(g.normal);
            tangent_frames.push(frame);
            params.push(NodeParam { chart: c, u, v, t });
            on_boundary.push(boundary);
        }
    }
    // global node = surface id · t_levels + t index
    let npe = (p + 1).pow(3);
    let mut connectivity = Vec::with_capacity(mesh.cells.len() * npe);
    for cell in &mesh.cells {
        let (ci, cj, ck) = cell.index;
        let ids = &lattice[cell.chart];
        let nu = p * n_u;
        for kk in 0..=p {
            for jj in 0..=p {
                for ii in 0..=p {
                    let i = p * ci + ii;
                    let j = p * cj + jj;
                    let k = p * ck + kk;
                    let s = ids[i + (nu + 1) * j] as usize;
                    connectivity.push((s * t_levels + k) as u32);
                }
            }
        }
    }
    // identified nodes must coincide in space
    for (e, cell) in mesh.cells.iter().enumerate() {
        let chart = &charts[cell.chart];
        let nodes = &connectivity[e * npe..(e + 1) * npe];
        for kk in [0, p] {
            for jj in [0, p] {
                for ii in [0, p] {
                    let a = ii + (p + 1) * (jj + (p + 1) * kk);
                    let u = cell.u.0 + (cell.u.1 - cell.u.0) * ii as f64 / p as f64;
                    let v = cell.v.0 + (cell.v.1 - cell.v.0) * jj as f64 / p as f64;
                    let t = cell.t.0 + (cell.t.1 - cell.t.0) * kk as f64 / p as f64;
                    let g = evaluate_unchecked(chart, u, v);
                    let x = g.position + t * g.normal;
                    if (positions[nodes[a] as usize] - x).norm() > 1e-10 * scale.max(1.0) {
                        return Err(KornError::Mesh {
                            element: e,
                            reason: "identified nodes do not coincide".into(),
                        });
                    }
                }
            }
        }
    }
    Ok(NodeLayout {
        order: p,
        positions,
        normals,
        tangent_frames,
        params,
        on_boundary,
        connectivity,
        nodes_per_element: npe,
        surface_nodes,
        t_levels,
    })
}
