//! Analytic mid-surface charts and their first- and second-order geometry.
//!
//! Every chart maps a parameter rectangle `(u, v)` into R³. The unit normal is
//! `∂u r × ∂v r / |∂u r × ∂v r|`, which is the outward normal for all the
//! canonical surfaces here, and the second fundamental form is taken with the
//! sign convention `Π(X, Y) = ⟨∇_X n, Y⟩`, so spheres and cylinders have
//! non-negative principal curvatures.
//!
//! Spherical surfaces use the equiangular gnomonic (cubed-sphere) map: a patch
//! point is `R · Q · (tan u, tan v, 1) / |(tan u, tan v, 1)|` where `Q` rotates
//! the local frame onto one of the six cube faces. A spherical cap is the same
//! map on `[-α, α]²` centred on the north pole.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use nalgebra::{Matrix2, Matrix3, Vector3};

use crate::error::{KornError, Result};

pub type Vec3 = Vector3<f64>;

/// One face of the cubed-sphere cover.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CubeFace {
    PosX,
    NegX,
    PosY,
    NegY,
    PosZ,
    NegZ,
}

impl CubeFace {
    pub const ALL: [CubeFace; 6] = [
        CubeFace::PosX,
        CubeFace::NegX,
        CubeFace::PosY,
        CubeFace::NegY,
        CubeFace::PosZ,
        CubeFace::NegZ,
    ];

    pub fn index(self) -> usize {
        match self {
            CubeFace::PosX => 0,
            CubeFace::NegX => 1,
            CubeFace::PosY => 2,
            CubeFace::NegY => 3,
            CubeFace::PosZ => 4,
            CubeFace::NegZ => 5,
        }
    }

    /// Proper rotation taking the local patch frame (centre on +z) to this face.
    pub fn rotation(self) -> Matrix3<f64> {
        let cols = |a: [f64; 3], b: [f64; 3], c: [f64; 3]| {
            Matrix3::from_columns(&[Vec3::from(a), Vec3::from(b), Vec3::from(c)])
        };
        match self {
            CubeFace::PosZ => Matrix3::identity(),
            CubeFace::NegZ => cols([1., 0., 0.], [0., -1., 0.], [0., 0., -1.]),
            CubeFace::PosX => cols([0., 1., 0.], [0., 0., 1.], [1., 0., 0.]),
            CubeFace::NegX => cols([0., -1., 0.], [0., 0., 1.], [-1., 0., 0.]),
            CubeFace::PosY => cols([0., 0., 1.], [1., 0., 0.], [0., 1., 0.]),
            CubeFace::NegY => cols([0., 0., 1.], [-1., 0., 0.], [0., -1., 0.]),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ChartKind {
    /// `r = (R cos u, R sin u, v)`, `u ∈ [0, 2π)` periodic, `v ∈ [0, L]`.
    Cylinder { radius: f64, length: f64 },
    /// Gnomonic square cap around the north pole, `u, v ∈ [-α, α]`.
    SphericalCap { radius: f64, half_angle: f64 },
    /// One of the six patches covering the closed sphere.
    SpherePatch { radius: f64, face: CubeFace },
    /// Flat rectangle `[0, width] × [0, length]` in the `z = 0` plane.
    Plane { width: f64, length: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParamDomain {
    pub u: (f64, f64),
    pub v: (f64, f64),
    pub periodic_u: bool,
    pub periodic_v: bool,
}

impl ParamDomain {
    pub fn contains(&self, u: f64, v: f64) -> bool {
        let slack = |(a, b): (f64, f64)| 1e-12 * (1.0 + a.abs().max(b.abs()));
        let su = slack(self.u);
        let sv = slack(self.v);
        u >= self.u.0 - su && u <= self.u.1 + su && v >= self.v.0 - sv && v <= self.v.1 + sv
    }

    pub fn diameter(&self) -> f64 {
        (self.u.1 - self.u.0).hypot(self.v.1 - self.v.0)
    }

    /// Whether `(u, v)` lies on the boundary of the surface (periodic edges excluded).
    pub fn on_boundary(&self, u: f64, v: f64) -> bool {
        let near = |x: f64, a: f64| (x - a).abs() <= 1e-10 * (1.0 + a.abs());
        (!self.periodic_u && (near(u, self.u.0) || near(u, self.u.1)))
            || (!self.periodic_v && (near(v, self.v.0) || near(v, self.v.1)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Chart {
    kind: ChartKind,
    domain: ParamDomain,
}

impl Chart {
    pub fn cylinder(radius: f64, length: f64) -> Result<Self> {
        if !(radius > 0.0 && length > 0.0) {
            return Err(KornError::domain("cylinder needs positive radius and length"));
        }
        Ok(Chart {
            kind: ChartKind::Cylinder { radius, length },
            domain: ParamDomain {
                u: (0.0, 2.0 * PI),
                v: (0.0, length),
                periodic_u: true,
                periodic_v: false,
            },
        })
    }

    pub fn spherical_cap(radius: f64, half_angle: f64) -> Result<Self> {
        if !(radius > 0.0) || !(half_angle > 0.0 && half_angle < FRAC_PI_2) {
            return Err(KornError::domain(
                "spherical cap needs radius > 0 and half-angle in (0, π/2)",
            ));
        }
        Ok(Chart {
            kind: ChartKind::SphericalCap { radius, half_angle },
            domain: ParamDomain {
                u: (-half_angle, half_angle),
                v: (-half_angle, half_angle),
                periodic_u: false,
                periodic_v: false,
            },
        })
    }

    pub fn sphere_patch(radius: f64, face: CubeFace) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(KornError::domain("sphere needs a positive radius"));
        }
        Ok(Chart {
            kind: ChartKind::SpherePatch { radius, face },
            domain: ParamDomain {
                u: (-FRAC_PI_4, FRAC_PI_4),
                v: (-FRAC_PI_4, FRAC_PI_4),
                periodic_u: false,
                periodic_v: false,
            },
        })
    }

    /// The six-patch cover of the closed sphere, ordered as [`CubeFace::ALL`].
    pub fn closed_sphere(radius: f64) -> Result<Vec<Self>> {
        CubeFace::ALL
            .iter()
            .map(|&f| Chart::sphere_patch(radius, f))
            .collect()
    }

    pub fn plane(width: f64, length: f64) -> Result<Self> {
        if !(width > 0.0 && length > 0.0) {
            return Err(KornError::domain("plane needs positive extents"));
        }
        Ok(Chart {
            kind: ChartKind::Plane { width, length },
            domain: ParamDomain {
                u: (0.0, width),
                v: (0.0, length),
                periodic_u: false,
                periodic_v: false,
            },
        })
    }

    pub fn kind(&self) -> ChartKind {
        self.kind
    }

    pub fn domain(&self) -> &ParamDomain {
        &self.domain
    }

    /// Radius of the underlying cylinder or sphere; `None` for the plane.
    pub fn radius(&self) -> Option<f64> {
        match self.kind {
            ChartKind::Cylinder { radius, .. }
            | ChartKind::SphericalCap { radius, .. }
            | ChartKind::SpherePatch { radius, .. } => Some(radius),
            ChartKind::Plane { .. } => None,
        }
    }

    /// Characteristic length used to scale classification tolerances.
    pub fn length_scale(&self) -> f64 {
        match self.kind {
            ChartKind::Plane { width, length } => width.max(length),
            _ => self.radius().unwrap_or(1.0),
        }
    }

    pub fn is_spherical(&self) -> bool {
        matches!(
            self.kind,
            ChartKind::SphericalCap { .. } | ChartKind::SpherePatch { .. }
        )
    }

    /// Ambient position only; cheaper than a full [`evaluate_geometry`].
    pub fn position(&self, u: f64, v: f64) -> Vec3 {
        match self.kind {
            ChartKind::Cylinder { radius, .. } => Vec3::new(radius * u.cos(), radius * u.sin(), v),
            ChartKind::SphericalCap { radius, .. } => radius * gnomonic_point(u, v),
            ChartKind::SpherePatch { radius, face } => radius * (face.rotation() * gnomonic_point(u, v)),
            ChartKind::Plane { .. } => Vec3::new(u, v, 0.0),
        }
    }
}

fn gnomonic_point(u: f64, v: f64) -> Vec3 {
    let q = Vec3::new(u.tan(), v.tan(), 1.0);
    q / q.norm()
}

/// First- and second-order geometry of a chart at one parameter point.
#[derive(Clone, Debug)]
pub struct SurfaceGeometry {
    pub u: f64,
    pub v: f64,
    pub position: Vec3,
    /// `∂u r`, `∂v r`.
    pub tangents: [Vec3; 2],
    /// `∂i ∂j r`.
    pub second_derivatives: [[Vec3; 2]; 2],
    pub normal: Vec3,
    /// `∂u n`, `∂v n` from the analytic chart.
    pub normal_derivatives: [Vec3; 2],
    pub metric: Matrix2<f64>,
    pub metric_inv: Matrix2<f64>,
    /// `√det g`.
    pub area_element: f64,
    /// Covariant components `Π_ij = ⟨∂i n, ∂j r⟩`.
    pub second_form: Matrix2<f64>,
    /// Analytic Gaussian curvature of the chart's surface.
    pub gauss_curvature: f64,
    /// `tr_g Π`.
    pub mean_trace: f64,
    /// `|Π|² = λ1² + λ2²`.
    pub second_form_norm_sq: f64,
    /// `Γ^k_ij`, indexed `[k][i][j]`.
    pub christoffel: [[[f64; 2]; 2]; 2],
    /// Covariant derivative `(DΠ)_{ij;k}`, indexed `[i][j][k]`.
    pub second_form_derivative: [[[f64; 2]; 2]; 2],
}

impl SurfaceGeometry {
    /// Mixed shape operator `S^i_j = g^{ik} Π_kj`.
    pub fn shape_operator(&self) -> Matrix2<f64> {
        self.metric_inv * self.second_form
    }

    /// `det Π / det g`, computed from the forms rather than the chart.
    pub fn gauss_curvature_from_forms(&self) -> f64 {
        self.second_form.determinant() / self.metric.determinant()
    }

    /// Positively oriented g-orthonormal frame by Gram–Schmidt on `(∂u r, ∂v r)`.
    pub fn orthonormal_frame(&self) -> [Vec3; 2] {
        let e1 = self.tangents[0].normalize();
        let e2 = (self.tangents[1] - self.tangents[1].dot(&e1) * e1).normalize();
        [e1, e2]
    }

    /// Chart components of a tangent vector, `W^i = g^{ij} ⟨W, ∂j r⟩`.
    pub fn tangent_components(&self, w: &Vec3) -> [f64; 2] {
        let c = [w.dot(&self.tangents[0]), w.dot(&self.tangents[1])];
        let gi = &self.metric_inv;
        [
            gi[(0, 0)] * c[0] + gi[(0, 1)] * c[1],
            gi[(1, 0)] * c[0] + gi[(1, 1)] * c[1],
        ]
    }

    pub fn to_ambient(&self, c: [f64; 2]) -> Vec3 {
        c[0] * self.tangents[0] + c[1] * self.tangents[1]
    }

    /// The shape operator extended to R³ with `S n = 0`, so `S τ = ∇_τ n`.
    pub fn ambient_shape_operator(&self) -> Matrix3<f64> {
        let mut s = Matrix3::zeros();
        for i in 0..2 {
            for j in 0..2 {
                s += self.normal_derivatives[i] * self.tangents[j].transpose() * self.metric_inv[(i, j)];
            }
        }
        s
    }

    /// Orthogonal projector onto the tangent plane.
    pub fn tangent_projector(&self) -> Matrix3<f64> {
        Matrix3::identity() - self.normal * self.normal.transpose()
    }

    /// `Π(a, b)` for ambient tangent vectors.
    pub fn second_form_ambient(&self, a: &Vec3, b: &Vec3) -> f64 {
        (self.ambient_shape_operator() * a).dot(b)
    }
}

/// Evaluate the full geometry at `(u, v)`.
pub fn evaluate_geometry(chart: &Chart, u: f64, v: f64) -> Result<SurfaceGeometry> {
    if !u.is_finite() || !v.is_finite() || !chart.domain.contains(u, v) {
        return Err(KornError::domain(format!(
            "parameters ({u}, {v}) outside the chart domain {:?} × {:?}",
            chart.domain.u, chart.domain.v
        )));
    }
    Ok(evaluate_unchecked(chart, u, v))
}

/// Geometry without the domain check; the analytic charts extend smoothly a
/// little past their parameter rectangles, which finite differences rely on.
pub(crate) fn evaluate_unchecked(chart: &Chart, u: f64, v: f64) -> SurfaceGeometry {
    let (position, tangents, second, normal, dn, kappa) = match chart.kind {
        ChartKind::Cylinder { radius, .. } => {
            let (s, c) = u.sin_cos();
            let pos = Vec3::new(radius * c, radius * s, v);
            let ru = Vec3::new(-radius * s, radius * c, 0.0);
            let rv = Vec3::new(0.0, 0.0, 1.0);
            let ruu = Vec3::new(-radius * c, -radius * s, 0.0);
            let z = Vec3::zeros();
            let n = Vec3::new(c, s, 0.0);
            let nu = Vec3::new(-s, c, 0.0);
            (pos, [ru, rv], [[ruu, z], [z, z]], n, [nu, z], 0.0)
        }
        ChartKind::SphericalCap { radius, .. } => {
            gnomonic_geometry(radius, &Matrix3::identity(), u, v)
        }
        ChartKind::SpherePatch { radius, face } => {
            gnomonic_geometry(radius, &face.rotation(), u, v)
        }
        ChartKind::Plane { .. } => {
            let z = Vec3::zeros();
            (
                Vec3::new(u, v, 0.0),
                [Vec3::x(), Vec3::y()],
                [[z, z], [z, z]],
                Vec3::z(),
                [z, z],
                0.0,
            )
        }
    };
    assemble_geometry(u, v, position, tangents, second, normal, dn, kappa)
}

type ChartJet = (Vec3, [Vec3; 2], [[Vec3; 2]; 2], Vec3, [Vec3; 2], f64);

fn gnomonic_geometry(radius: f64, rot: &Matrix3<f64>, u: f64, v: f64) -> ChartJet {
    let x = u.tan();
    let y = v.tan();
    let sx = 1.0 + x * x;
    let sy = 1.0 + y * y;
    let d2 = 1.0 + x * x + y * y;
    let d = d2.sqrt();
    let d3 = d2 * d;
    let d5 = d3 * d2;
    let q = Vec3::new(x, y, 1.0);
    let ex = Vec3::x();
    let ey = Vec3::y();

    let p = q / d;
    // derivatives of q/|q| in (X, Y) = (tan u, tan v)
    let p_x = ex / d - q * (x / d3);
    let p_y = ey / d - q * (y / d3);
    let p_xx = ex * (-2.0 * x / d3) - q / d3 + q * (3.0 * x * x / d5);
    let p_yy = ey * (-2.0 * y / d3) - q / d3 + q * (3.0 * y * y / d5);
    let p_xy = ex * (-y / d3) - ey * (x / d3) + q * (3.0 * x * y / d5);

    // chain rule with dX/du = 1 + X², d²X/du² = 2X(1 + X²)
    let p_u = p_x * sx;
    let p_v = p_y * sy;
    let p_uu = p_x * (2.0 * x * sx) + p_xx * (sx * sx);
    let p_vv = p_y * (2.0 * y * sy) + p_yy * (sy * sy);
    let p_uv = p_xy * (sx * sy);

    let r = radius;
    let pos = rot * p * r;
    let ru = rot * p_u * r;
    let rv = rot * p_v * r;
    let ruu = rot * p_uu * r;
    let ruv = rot * p_uv * r;
    let rvv = rot * p_vv * r;
    let n = rot * p;
    let nu = rot * p_u;
    let nv = rot * p_v;
    (pos, [ru, rv], [[ruu, ruv], [ruv, rvv]], n, [nu, nv], 1.0 / (r * r))
}

#[allow(clippy::too_many_arguments)]
fn assemble_geometry(
    u: f64,
    v: f64,
    position: Vec3,
    tangents: [Vec3; 2],
    second_derivatives: [[Vec3; 2]; 2],
    normal: Vec3,
    normal_derivatives: [Vec3; 2],
    gauss_curvature: f64,
) -> SurfaceGeometry {
    let metric = Matrix2::new(
        tangents[0].dot(&tangents[0]),
        tangents[0].dot(&tangents[1]),
        tangents[1].dot(&tangents[0]),
        tangents[1].dot(&tangents[1]),
    );
    let det = metric.determinant();
    let metric_inv = Matrix2::new(metric[(1, 1)], -metric[(0, 1)], -metric[(1, 0)], metric[(0, 0)]) / det;
    let mut second_form = Matrix2::zeros();
    for i in 0..2 {
        for j in 0..2 {
            second_form[(i, j)] = -second_derivatives[i][j].dot(&normal);
        }
    }
    let mut christoffel = [[[0.0; 2]; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let lowered = [
                second_derivatives[i][j].dot(&tangents[0]),
                second_derivatives[i][j].dot(&tangents[1]),
            ];
            for (k, row) in christoffel.iter_mut().enumerate() {
                row[i][j] = metric_inv[(k, 0)] * lowered[0] + metric_inv[(k, 1)] * lowered[1];
            }
        }
    }
    let shape = metric_inv * second_form;
    let mean_trace = shape.trace();
    let second_form_norm_sq = (shape * shape).trace();
    SurfaceGeometry {
        u,
        v,
        position,
        tangents,
        second_derivatives,
        normal,
        normal_derivatives,
        metric,
        metric_inv,
        area_element: det.sqrt(),
        second_form,
        gauss_curvature,
        mean_trace,
        second_form_norm_sq,
        christoffel,
        // Cylinders, spheres and planes all have parallel second forms.
        second_form_derivative: [[[0.0; 2]; 2]; 2],
    }
}

/// Central-difference `(DΠ)_{ij;k}` used to validate the analytic value.
pub fn second_form_derivative_fd(chart: &Chart, u: f64, v: f64) -> [[[f64; 2]; 2]; 2] {
    let step = 1e-5 * chart.domain.diameter();
    let g = evaluate_unchecked(chart, u, v);
    let mut d_pi = [[[0.0; 2]; 2]; 2];
    for k in 0..2 {
        let (du, dv) = if k == 0 { (step, 0.0) } else { (0.0, step) };
        let plus = evaluate_unchecked(chart, u + du, v + dv).second_form;
        let minus = evaluate_unchecked(chart, u - du, v - dv).second_form;
        for i in 0..2 {
            for j in 0..2 {
                let mut val = (plus[(i, j)] - minus[(i, j)]) / (2.0 * step);
                for l in 0..2 {
                    val -= g.christoffel[l][k][i] * g.second_form[(l, j)];
                    val -= g.christoffel[l][k][j] * g.second_form[(i, l)];
                }
                d_pi[i][j][k] = val;
            }
        }
    }
    d_pi
}

/// Shell classification by the sign pattern of the Gaussian curvature.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Classification {
    Parabolic,
    Elliptic,
    Other,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryCondition {
    /// All displacement components vanish on the lateral face over `∂S`.
    Clamped,
    /// Only the normal component vanishes on the lateral face.
    NormalClamped,
    /// `∂S = ∅`: the closed sphere.
    Closed,
}

/// Mid-surface charts, half-thickness and boundary description of a shell
/// `Ω = { x + t n(x) : x ∈ S, |t| < h }`.
#[derive(Clone, Debug)]
pub struct ShellDomain {
    charts: Vec<Chart>,
    half_thickness: f64,
    boundary: BoundaryCondition,
    sample_resolution: usize,
}

impl ShellDomain {
    pub fn new(charts: Vec<Chart>, half_thickness: f64, boundary: BoundaryCondition) -> Result<Self> {
        if charts.is_empty() {
            return Err(KornError::domain("a shell needs at least one chart"));
        }
        if !(half_thickness > 0.0 && half_thickness.is_finite()) {
            return Err(KornError::domain(format!("half-thickness must be positive, got {half_thickness}")));
        }
        let closed_cover = is_closed_sphere_cover(&charts);
        match boundary {
            BoundaryCondition::Closed if !closed_cover => {
                return Err(KornError::domain("closed boundary condition needs the six-patch sphere cover"));
            }
            BoundaryCondition::Clamped | BoundaryCondition::NormalClamped if closed_cover => {
                return Err(KornError::domain("the closed sphere has no boundary to clamp"));
            }
            _ => {}
        }
        if !closed_cover && charts.len() != 1 {
            return Err(KornError::Unsupported(
                "multi-chart shells are only supported for the closed sphere".into(),
            ));
        }
        Ok(ShellDomain {
            charts,
            half_thickness,
            boundary,
            sample_resolution: 8,
        })
    }

    pub fn cylinder(radius: f64, length: f64, half_thickness: f64) -> Result<Self> {
        Self::new(vec![Chart::cylinder(radius, length)?], half_thickness, BoundaryCondition::Clamped)
    }

    pub fn spherical_cap(radius: f64, half_angle: f64, half_thickness: f64) -> Result<Self> {
        Self::new(
            vec![Chart::spherical_cap(radius, half_angle)?],
            half_thickness,
            BoundaryCondition::Clamped,
        )
    }

    pub fn closed_sphere(radius: f64, half_thickness: f64) -> Result<Self> {
        Self::new(Chart::closed_sphere(radius)?, half_thickness, BoundaryCondition::Closed)
    }

    pub fn with_sample_resolution(mut self, n: usize) -> Self {
        self.sample_resolution = n.max(8);
        self
    }

    pub fn with_half_thickness(&self, half_thickness: f64) -> Result<Self> {
        Self::new(self.charts.clone(), half_thickness, self.boundary)
            .map(|d| d.with_sample_resolution(self.sample_resolution))
    }

    pub fn with_boundary(&self, boundary: BoundaryCondition) -> Result<Self> {
        Self::new(self.charts.clone(), self.half_thickness, boundary)
    }

    pub fn charts(&self) -> &[Chart] {
        &self.charts
    }

    pub fn half_thickness(&self) -> f64 {
        self.half_thickness
    }

    pub fn boundary(&self) -> BoundaryCondition {
        self.boundary
    }

    pub fn is_closed(&self) -> bool {
        self.boundary == BoundaryCondition::Closed
    }

    pub fn sample_resolution(&self) -> usize {
        self.sample_resolution
    }

    /// Sample grid (including the boundary) of one chart.
    pub fn sample_points(&self, chart: &Chart) -> Vec<(f64, f64)> {
        let n = self.sample_resolution;
        let d = chart.domain();
        let mut pts = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let s = i as f64 / (n - 1) as f64;
                let r = j as f64 / (n - 1) as f64;
                pts.push((d.u.0 + s * (d.u.1 - d.u.0), d.v.0 + r * (d.v.1 - d.v.0)));
            }
        }
        pts
    }

    /// Largest principal curvature magnitude over the sample grids.
    pub fn max_principal_curvature(&self) -> f64 {
        let mut kmax: f64 = 0.0;
        for chart in &self.charts {
            for (u, v) in self.sample_points(chart) {
                let g = evaluate_unchecked(chart, u, v);
                let pd = principal_directions(&g);
                kmax = kmax.max(pd.curvatures[0].abs()).max(pd.curvatures[1].abs());
            }
        }
        kmax
    }

    /// Sum of the chart areas by tensor Gauss quadrature.
    pub fn mid_surface_area(&self) -> f64 {
        let rule = crate::quadrature::GaussRule::new(8);
        let cells = 8;
        let mut area = 0.0;
        for chart in &self.charts {
            let d = chart.domain();
            let du = (d.u.1 - d.u.0) / cells as f64;
            let dv = (d.v.1 - d.v.0) / cells as f64;
            for ci in 0..cells {
                for cj in 0..cells {
                    for (xa, wa) in rule.iter() {
                        for (xb, wb) in rule.iter() {
                            let u = d.u.0 + du * (ci as f64 + 0.5 * (xa + 1.0));
                            let v = d.v.0 + dv * (cj as f64 + 0.5 * (xb + 1.0));
                            let g = evaluate_unchecked(chart, u, v);
                            area += wa * wb * 0.25 * du * dv * g.area_element;
                        }
                    }
                }
            }
        }
        area
    }
}

fn is_closed_sphere_cover(charts: &[Chart]) -> bool {
    if charts.len() != 6 {
        return false;
    }
    let Some(r0) = charts[0].radius() else { return false };
    let mut seen = [false; 6];
    for c in charts {
        match c.kind {
            ChartKind::SpherePatch { radius, face } if (radius - r0).abs() <= 1e-14 * r0 => {
                seen[face.index()] = true;
            }
            _ => return false,
        }
    }
    seen.iter().all(|&s| s)
}

/// Parabolic iff `|κ| ≤ tol_κ` and `|Π| ≥ tol_Π` at every sample, elliptic iff
/// `κ ≥ tol_κ` everywhere, otherwise other. Tolerances are `1e-10/R²` and `1e-10/R`.
pub fn classify_shell(domain: &ShellDomain) -> Classification {
    let mut parabolic = true;
    let mut elliptic = true;
    for chart in domain.charts() {
        let scale = chart.length_scale();
        let tol_kappa = 1e-10 / (scale * scale);
        let tol_pi = 1e-10 / scale;
        for (u, v) in domain.sample_points(chart) {
            let g = evaluate_unchecked(chart, u, v);
            let kappa = g.gauss_curvature_from_forms();
            let pi_norm = g.second_form_norm_sq.sqrt();
            if !(kappa.abs() <= tol_kappa && pi_norm >= tol_pi) {
                parabolic = false;
            }
            if kappa < tol_kappa {
                elliptic = false;
            }
        }
    }
    if parabolic {
        Classification::Parabolic
    } else if elliptic {
        Classification::Elliptic
    } else {
        Classification::Other
    }
}

#[derive(Clone, Debug)]
pub struct ShellMapValue {
    pub position: Vec3,
    /// Columns `∂u r + t ∂u n`, `∂v r + t ∂v n`, `n`.
    pub jacobian: Matrix3<f64>,
    /// `(1 + t tr_g Π + t² κ) √det g`.
    pub volume_weight: f64,
}

/// The shell map `(u, v, t) ↦ r + t n` at a mid-surface point.
pub fn shell_map(geom: &SurfaceGeometry, t: f64, half_thickness: f64) -> Result<ShellMapValue> {
    if t.abs() > half_thickness * (1.0 + 1e-12) {
        return Err(KornError::domain(format!("|t| = {} exceeds h = {half_thickness}", t.abs())));
    }
    Ok(shell_map_unchecked(geom, t))
}

pub(crate) fn shell_map_unchecked(geom: &SurfaceGeometry, t: f64) -> ShellMapValue {
    let position = geom.position + t * geom.normal;
    let jacobian = Matrix3::from_columns(&[
        geom.tangents[0] + t * geom.normal_derivatives[0],
        geom.tangents[1] + t * geom.normal_derivatives[1],
        geom.normal,
    ]);
    let kappa = geom.gauss_curvature_from_forms();
    let volume_weight = (1.0 + t * geom.mean_trace + t * t * kappa) * geom.area_element;
    ShellMapValue {
        position,
        jacobian,
        volume_weight,
    }
}

#[derive(Clone, Debug)]
pub struct PrincipalDirections {
    /// `λ1 ≥ λ2`.
    pub curvatures: [f64; 2],
    /// Unit tangent vectors, g-orthonormal, `∇_{e_i} n = λ_i e_i`.
    pub directions: [Vec3; 2],
    pub umbilic: bool,
}

/// Eigen-decomposition of the shape operator in a g-orthonormal frame.
pub fn principal_directions(geom: &SurfaceGeometry) -> PrincipalDirections {
    let [f1, f2] = geom.orthonormal_frame();
    let a = geom.second_form_ambient(&f1, &f1);
    let b = 0.5 * (geom.second_form_ambient(&f1, &f2) + geom.second_form_ambient(&f2, &f1));
    let c = geom.second_form_ambient(&f2, &f2);
    let mean = 0.5 * (a + c);
    let rad = (0.5 * (a - c)).hypot(b);
    let l1 = mean + rad;
    let l2 = mean - rad;
    let scale = a.abs().max(c.abs()).max(b.abs()).max(1e-300);
    let umbilic = rad <= 1e-10 * scale || rad == 0.0;
    if umbilic {
        return PrincipalDirections {
            curvatures: [l1, l2],
            directions: [f1, f2],
            umbilic: true,
        };
    }
    // eigenvector of [[a, b], [b, c]] for l1
    let (x, y) = if (a - l2).abs() >= (c - l2).abs() {
        (a - l2, b)
    } else {
        (b, c - l2)
    };
    let norm = x.hypot(y);
    let e1 = (x * f1 + y * f2) / norm;
    let e2 = (-y * f1 + x * f2) / norm;
    PrincipalDirections {
        curvatures: [l1, l2],
        directions: [e1, e2],
        umbilic: false,
    }
}

/// A point given by chart parameters.
#[derive(Clone, Copy, Debug)]
pub struct SurfacePoint {
    pub chart: Chart,
    pub u: f64,
    pub v: f64,
}

impl SurfacePoint {
    pub fn new(chart: Chart, u: f64, v: f64) -> Result<Self> {
        if !chart.domain().contains(u, v) {
            return Err(KornError::domain(format!("({u}, {v}) is not on the chart")));
        }
        Ok(SurfacePoint { chart, u, v })
    }

    pub fn position(&self) -> Vec3 {
        self.chart.position(self.u, self.v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum SurfaceId {
    Sphere(f64),
    Cylinder(f64),
    Plane,
}

fn surface_id(chart: &Chart) -> SurfaceId {
    match chart.kind() {
        ChartKind::Cylinder { radius, .. } => SurfaceId::Cylinder(radius),
        ChartKind::SphericalCap { radius, .. } | ChartKind::SpherePatch { radius, .. } => SurfaceId::Sphere(radius),
        ChartKind::Plane { .. } => SurfaceId::Plane,
    }
}

/// Intrinsic distance: great circles on spheres, unrolled straight lines on
/// the cylinder, Euclidean distance in the plane.
pub fn geodesic_distance(p0: &SurfacePoint, p: &SurfacePoint) -> Result<f64> {
    match (surface_id(&p0.chart), surface_id(&p.chart)) {
        (SurfaceId::Sphere(r0), SurfaceId::Sphere(r1)) if (r0 - r1).abs() <= 1e-12 * r0 => {
            let a = p0.position();
            let b = p.position();
            Ok(r0 * a.cross(&b).norm().atan2(a.dot(&b)))
        }
        (SurfaceId::Cylinder(r0), SurfaceId::Cylinder(r1)) if (r0 - r1).abs() <= 1e-12 * r0 => {
            let mut dtheta = (p.u - p0.u).rem_euclid(2.0 * PI);
            if dtheta > PI {
                dtheta -= 2.0 * PI;
            }
            Ok((r0 * dtheta).hypot(p.v - p0.v))
        }
        (SurfaceId::Plane, SurfaceId::Plane) if p0.chart == p.chart => Ok((p.position() - p0.position()).norm()),
        _ => Err(KornError::Unsupported(
            "geodesic distance between points on different surfaces".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_3;

    fn fd_geometry_check(chart: &Chart, u: f64, v: f64) {
        let g = evaluate_geometry(chart, u, v).unwrap();
        let s = 1e-6;
        let pu = (chart.position(u + s, v) - chart.position(u - s, v)) / (2.0 * s);
        let pv = (chart.position(u, v + s) - chart.position(u, v - s)) / (2.0 * s);
        assert!((pu - g.tangents[0]).norm() < 1e-8);
        assert!((pv - g.tangents[1]).norm() < 1e-8);
        let tu = |uu: f64, vv: f64| evaluate_unchecked(chart, uu, vv).tangents;
        let ruu = (tu(u + s, v)[0] - tu(u - s, v)[0]) / (2.0 * s);
        let ruv = (tu(u, v + s)[0] - tu(u, v - s)[0]) / (2.0 * s);
        let rvv = (tu(u, v + s)[1] - tu(u, v - s)[1]) / (2.0 * s);
        assert!((ruu - g.second_derivatives[0][0]).norm() < 1e-7);
        assert!((ruv - g.second_derivatives[0][1]).norm() < 1e-7);
        assert!((rvv - g.second_derivatives[1][1]).norm() < 1e-7);
        // Weingarten: ∂_i n = S^k_i ∂_k r
        let shape = g.shape_operator();
        for i in 0..2 {
            let w = shape[(0, i)] * g.tangents[0] + shape[(1, i)] * g.tangents[1];
            assert!((w - g.normal_derivatives[i]).norm() < 1e-12);
        }
        let nu = (evaluate_unchecked(chart, u + s, v).normal - evaluate_unchecked(chart, u - s, v).normal) / (2.0 * s);
        assert!((nu - g.normal_derivatives[0]).norm() < 1e-8);
    }

    #[test]
    fn cylinder_geometry() {
        let c = Chart::cylinder(1.0, 2.0).unwrap();
        let g = evaluate_geometry(&c, 0.7, 0.3).unwrap();
        assert_eq!(g.gauss_curvature, 0.0);
        assert!((g.second_form_norm_sq - 1.0).abs() < 1e-14);
        let pd = principal_directions(&g);
        assert!((pd.curvatures[0] - 1.0).abs() < 1e-14 && pd.curvatures[1].abs() < 1e-14);
        let circ = Vec3::new(-(0.7f64).sin(), (0.7f64).cos(), 0.0);
        assert!(pd.directions[0].dot(&circ).abs() > 1.0 - 1e-12);
        assert!(pd.directions[1].dot(&Vec3::z()).abs() > 1.0 - 1e-12);
        fd_geometry_check(&c, 0.7, 0.3);
    }

    #[test]
    fn sphere_geometry() {
        let c = Chart::spherical_cap(2.0, 1.0).unwrap();
        let g = evaluate_geometry(&c, 0.3, -0.4).unwrap();
        assert!((g.gauss_curvature - 0.25).abs() < 1e-15);
        assert!((g.gauss_curvature_from_forms() - 0.25).abs() < 1e-12);
        assert!((g.second_form - g.metric / 2.0).norm() < 1e-12);
        assert!((g.mean_trace - 1.0).abs() < 1e-12);
        assert!((g.normal.norm() - 1.0).abs() < 1e-12);
        assert!(g.normal.dot(&g.tangents[0]).abs() < 1e-12);
        fd_geometry_check(&c, 0.3, -0.4);
        for face in CubeFace::ALL {
            fd_geometry_check(&Chart::sphere_patch(1.5, face).unwrap(), -0.2, 0.6);
            assert!((face.rotation().determinant() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn out_of_domain_is_rejected() {
        let c = Chart::spherical_cap(1.0, 0.5).unwrap();
        assert!(matches!(evaluate_geometry(&c, 0.6, 0.0), Err(KornError::Domain(_))));
        let c = Chart::cylinder(1.0, 2.0).unwrap();
        assert!(evaluate_geometry(&c, 1.0, 2.5).is_err());
    }

    #[test]
    fn second_form_is_parallel() {
        for chart in [Chart::cylinder(1.0, 2.0).unwrap(), Chart::spherical_cap(1.3, 1.1).unwrap()] {
            let fd = second_form_derivative_fd(&chart, 0.4, 0.2);
            for i in 0..2 {
                for j in 0..2 {
                    for k in 0..2 {
                        assert!(fd[i][j][k].abs() < 1e-6, "{:?}", fd);
                    }
                }
            }
        }
    }

    #[test]
    fn classification() {
        assert_eq!(classify_shell(&ShellDomain::cylinder(1.0, 2.0, 0.1).unwrap()), Classification::Parabolic);
        assert_eq!(
            classify_shell(&ShellDomain::spherical_cap(1.0, FRAC_PI_3, 0.1).unwrap()),
            Classification::Elliptic
        );
        assert_eq!(classify_shell(&ShellDomain::closed_sphere(1.0, 0.1).unwrap()), Classification::Elliptic);
        let plane = ShellDomain::new(vec![Chart::plane(1.0, 1.0).unwrap()], 0.1, BoundaryCondition::Clamped).unwrap();
        assert_eq!(classify_shell(&plane), Classification::Other);
    }

    #[test]
    fn shell_map_weights() {
        let s = Chart::spherical_cap(1.0, 1.0).unwrap();
        let g = evaluate_geometry(&s, 0.2, 0.1).unwrap();
        let m = shell_map(&g, 0.1, 0.2).unwrap();
        assert!((m.volume_weight / g.area_element - 1.21).abs() < 1e-12);
        assert!((m.jacobian.determinant() - m.volume_weight).abs() < 1e-10 * m.volume_weight);
        assert!((shell_map(&g, 0.0, 0.2).unwrap().volume_weight - g.area_element).abs() < 1e-15);
        let c = Chart::cylinder(1.0, 2.0).unwrap();
        let g = evaluate_geometry(&c, 1.0, 1.0).unwrap();
        let m = shell_map(&g, 0.05, 0.1).unwrap();
        assert!((m.volume_weight / g.area_element - 1.05).abs() < 1e-12);
        assert!(shell_map(&g, 0.2, 0.1).is_err());
    }

    #[test]
    fn umbilic_sphere() {
        let g = evaluate_geometry(&Chart::sphere_patch(1.0, CubeFace::NegY).unwrap(), 0.1, 0.2).unwrap();
        let pd = principal_directions(&g);
        assert!(pd.umbilic);
        assert!((pd.curvatures[0] - 1.0).abs() < 1e-12 && (pd.curvatures[1] - 1.0).abs() < 1e-12);
        assert!(pd.directions[0].dot(&pd.directions[1]).abs() < 1e-12);
    }

    #[test]
    fn distances() {
        let a = Chart::sphere_patch(1.0, CubeFace::PosZ).unwrap();
        let b = Chart::sphere_patch(1.0, CubeFace::NegZ).unwrap();
        let d = geodesic_distance(&SurfacePoint::new(a, 0.0, 0.0).unwrap(), &SurfacePoint::new(b, 0.0, 0.0).unwrap()).unwrap();
        assert!((d - PI).abs() < 1e-12);
        let a = Chart::sphere_patch(2.0, CubeFace::PosZ).unwrap();
        let b = Chart::sphere_patch(2.0, CubeFace::PosX).unwrap();
        let d = geodesic_distance(&SurfacePoint::new(a, 0.0, 0.0).unwrap(), &SurfacePoint::new(b, 0.0, 0.0).unwrap()).unwrap();
        assert!((d - PI).abs() < 1e-12);
        let c = Chart::cylinder(1.0, 2.0).unwrap();
        let d = geodesic_distance(&SurfacePoint::new(c, 1.0, 0.5).unwrap(), &SurfacePoint::new(c, 1.0, 0.8).unwrap()).unwrap();
        assert!((d - 0.3).abs() < 1e-12);
        let d = geodesic_distance(&SurfacePoint::new(c, 0.1, 0.0).unwrap(), &SurfacePoint::new(c, 2.0 * PI - 0.1, 0.0).unwrap()).unwrap();
        assert!((d - 0.2).abs() < 1e-12);
        assert!(matches!(
            geodesic_distance(&SurfacePoint::new(c, 0.1, 0.0).unwrap(), &SurfacePoint::new(a, 0.0, 0.0).unwrap()),
            Err(KornError::Unsupported(_))
        ));
    }

    #[test]
    fn closed_cover_validation() {
        let charts = Chart::closed_sphere(1.0).unwrap();
        assert!(ShellDomain::new(charts[..5].to_vec(), 0.1, BoundaryCondition::Closed).is_err());
        assert!(ShellDomain::new(charts.clone(), 0.1, BoundaryCondition::Clamped).is_err());
        assert!(ShellDomain::new(vec![Chart::cylinder(1.0, 1.0).unwrap()], 0.1, BoundaryCondition::Closed).is_err());
        assert!(ShellDomain::closed_sphere(1.0, -0.1).is_err());
    }
}
