//! The oscillating test displacement for elliptic shells,
//! `w = ψ(ρ) cos(ρ/√h)`, `W = −t Dw`, and its closed-form energies.

use nalgebra::Matrix2;

use crate::error::{KornError, Result};
use crate::fields::{AmbientField, FieldJet, MidsurfaceField};
use crate::geometry::{
    classify_shell, evaluate_unchecked, Chart, Classification, ShellDomain, SurfaceGeometry, SurfacePoint, Vec3,
};
use crate::quadrature::GaussRule;

/// Root of `sin t / t = 1/2` on `(0, π)`.
pub fn sine_condition_root() -> f64 {
    let (mut lo, mut hi) = (1.0f64, 3.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid.sin() / mid >= 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Quintic step: 0 at 0, 1 at 1, first and second derivatives zero at both ends.
fn smoothstep(x: f64) -> (f64, f64, f64) {
    if x <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if x >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let x2 = x * x;
    let x3 = x2 * x;
    (
        x3 * (10.0 - 15.0 * x + 6.0 * x2),
        30.0 * x2 * (1.0 - x) * (1.0 - x),
        60.0 * x * (1.0 - x) * (1.0 - 2.0 * x),
    )
}

fn sinc(z: f64) -> f64 {
    if z.abs() < 1e-4 {
        1.0 - z * z / 6.0
    } else {
        z.sin() / z
    }
}

/// `x cot x`.
fn xcotx(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 3.0
    } else {
        x / x.tan()
    }
}

/// The ansatz on a sphere of radius `R` centred at the origin.
#[derive(Clone, Debug)]
pub struct AnsatzField {
    charts: Vec<Chart>,
    center: Vec3,
    radius: f64,
    sigma0: f64,
    phi: f64,
    half_thickness: f64,
    kappa0: f64,
    amplitude: f64,
}

/// `w`, `Dw` (ambient tangent vector) and `D²w` in the orthonormal frame.
#[derive(Clone, Debug)]
pub struct AnsatzJet {
    pub w: f64,
    pub dw: Vec3,
    pub hess: Matrix2<f64>,
    pub frame: [Vec3; 2],
}

impl AnsatzField {
    pub fn center(&self) -> Vec3 {
        self.center
    }

    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }

    /// Oscillation frequency `φ = h^{-1/2}`.
    pub fn frequency(&self) -> f64 {
        self.phi
    }

    pub fn half_thickness(&self) -> f64 {
        self.half_thickness
    }

    pub fn kappa0(&self) -> f64 {
        self.kappa0
    }

    pub fn charts(&self) -> &[Chart] {
        &self.charts
    }

    /// The same field multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let mut f = self.clone();
        f.amplitude *= s;
        f
    }

    /// `(ψ, ψ', ψ'')` at geodesic distance `rho`.
    pub fn cutoff(&self, rho: f64) -> (f64, f64, f64) {
        let s0 = self.sigma0;
        let (s, ds, dds) = smoothstep((rho - s0) / s0);
        (1.0 - s, -ds / s0, -dds / (s0 * s0))
    }

    /// `w`, its surface gradient and covariant Hessian at a surface point.
    pub fn surface_jet(&self, geom: &SurfaceGeometry) -> AnsatzJet {
        let r = self.radius;
        let x = geom.position;
        let p0 = self.center;
        let cross = x.cross(&p0).norm();
        let rho = r * cross.atan2(x.dot(&p0));
        let xr = rho / r;
        let frame = geom.orthonormal_frame();
        if rho >= 2.0 * self.sigma0 {
            return AnsatzJet {
                w: 0.0,
                dw: Vec3::zeros(),
                hess: Matrix2::zeros(),
                frame,
            };
        }
        let (psi, dpsi, ddpsi) = self.cutoff(rho);
        let phi = self.phi;
        let (c, s) = ((phi * rho).cos(), (phi * rho).sin());
        let f = psi * c;
        let f2 = ddpsi * c - 2.0 * dpsi * phi * s - psi * phi * phi * c;
        // f'/ρ without the removable singularity (ψ' vanishes below σ0)
        let f1_over_rho = if dpsi != 0.0 { dpsi * c / rho } else { 0.0 } - psi * phi * phi * sinc(phi * rho);
        // ρ Dρ = −P p0 / sinc(ρ/R)
        let n = geom.normal;
        let pp0 = p0 - p0.dot(&n) * n;
        let rho_drho = -pp0 / sinc(xr);
        let dw = f1_over_rho * rho_drho;
        // D²w = (f'' − A) Dρ⊗Dρ + A P, A = f' cot(ρ/R)/R
        let a = f1_over_rho * xcotx(xr);
        let norm = pp0.norm();
        let drho = if norm > 0.0 { -pp0 / norm } else { Vec3::zeros() };
        let de = [drho.dot(&frame[0]), drho.dot(&frame[1])];
        let hess = Matrix2::from_fn(|i, j| (f2 - a) * de[i] * de[j] + if i == j { a } else { 0.0 });
        let amp = self.amplitude;
        AnsatzJet {
            w: amp * f,
            dw: amp * dw,
            hess: amp * hess,
            frame,
        }
    }
}

impl MidsurfaceField for AnsatzField {
    fn jet(&self, chart: &Chart, u: f64, v: f64, t: f64) -> FieldJet {
        let geom = evaluate_unchecked(chart, u, v);
        let j = self.surface_jet(&geom);
        let dw = [j.dw.dot(&geom.tangents[0]), j.dw.dot(&geom.tangents[1])];
        // parameter components of the covariant Hessian
        let (c, _) = crate::fields::frame_coefficients(&geom);
        let cinv = c.try_inverse().unwrap_or_else(Matrix2::zeros);
        let cov = cinv.transpose() * j.hess * cinv;
        let mut hess_w = [[0.0; 2]; 2];
        for i in 0..2 {
            for k in 0..2 {
                let mut s = cov[(i, k)];
                for l in 0..2 {
                    s += geom.christoffel[l][i][k] * dw[l];
                }
                hess_w[i][k] = s;
            }
        }
        let grad_up = geom.metric_inv * nalgebra::Vector2::new(dw[0], dw[1]);
        let big_w = [-t * grad_up[0], -t * grad_up[1]];
        // ∂_i W^k = −t g^{kl} ∇²w_il − Γ^k_ij W^j
        let cov_up = geom.metric_inv * cov;
        let mut dbig_w = [[0.0; 2]; 2];
        for i in 0..2 {
            for k in 0..2 {
                let mut s = -t * cov_up[(k, i)];
                for jj in 0..2 {
                    s -= geom.christoffel[k][i][jj] * big_w[jj];
                }
                dbig_w[i][k] = s;
            }
        }
        FieldJet {
            w: j.w,
            dw,
            w_t: 0.0,
            hess_w,
            big_w,
            dbig_w,
            big_w_t: [-grad_up[0], -grad_up[1]],
        }
    }
}

/// The ansatz as an ambient displacement on the shell: at `x + t n`,
/// `y = −t Dw(x) + w(x) n(x)`.
impl AmbientField for AnsatzField {
    fn value(&self, z: &Vec3) -> Vec3 {
        let rz = z.norm();
        let t = rz - self.radius;
        let x = z * (self.radius / rz);
        let n = z / rz;
        let j = self.surface_jet_at(&x, &n);
        -t * j.1 + j.0 * n
    }
}

impl AnsatzField {
    fn surface_jet_at(&self, x: &Vec3, n: &Vec3) -> (f64, Vec3) {
        let r = self.radius;
        let p0 = self.center;
        let rho = r * x.cross(&p0).norm().atan2(x.dot(&p0));
        if rho >= 2.0 * self.sigma0 {
            return (0.0, Vec3::zeros());
        }
        let (psi, dpsi, _) = self.cutoff(rho);
        let c = (self.phi * rho).cos();
        let f1_over_rho =
            if dpsi != 0.0 { dpsi * c / rho } else { 0.0 } - psi * self.phi * self.phi * sinc(self.phi * rho);
        let pp0 = p0 - p0.dot(n) * n;
        let dw = f1_over_rho * (-pp0 / sinc(rho / r));
        (self.amplitude * psi * c, self.amplitude * dw)
    }
}

/// Build the ansatz centred at `p0` with plateau radius `sigma0`.
pub fn build_ansatz(domain: &ShellDomain, p0: &SurfacePoint, sigma0: f64) -> Result<AnsatzField> {
    if classify_shell(domain) != Classification::Elliptic {
        return Err(KornError::domain("the ansatz needs an elliptic mid-surface"));
    }
    let charts = domain.charts();
    let radius = charts[0]
        .radius()
        .filter(|_| charts.iter().all(|c| c.is_spherical()))
        .ok_or_else(|| KornError::Unsupported("geodesic distance is implemented for spherical mid-surfaces".into()))?;
    if !(sigma0 > 0.0) {
        return Err(KornError::domain("σ0 must be positive"));
    }
    let kappa0 = domain
        .charts()
        .iter()
        .flat_map(|c| domain.sample_points(c).into_iter().map(move |(u, v)| evaluate_unchecked(c, u, v).gauss_curvature))
        .fold(0.0f64, f64::max);
    let max_sigma = sine_condition_root() / kappa0.sqrt();
    if sigma0 > max_sigma {
        return Err(KornError::domain(format!(
            "σ0 = {sigma0} violates the sine condition; the maximal admissible σ0 is {max_sigma:.10}"
        )));
    }
    let center = p0.position();
    // ρ is smooth on the support only away from the antipode
    if 2.0 * sigma0 >= std::f64::consts::PI * radius {
        return Err(KornError::domain("the support 2σ0 reaches the antipode of p0"));
    }
    if !domain.is_closed() {
        let chart = &charts[0];
        let d = chart.domain();
        let samples = 2000;
        let mut min_dist = f64::INFINITY;
        for k in 0..=samples {
            let s = k as f64 / samples as f64;
            let u = d.u.0 + s * (d.u.1 - d.u.0);
            let v = d.v.0 + s * (d.v.1 - d.v.0);
            for (pu, pv) in [(u, d.v.0), (u, d.v.1), (d.u.0, v), (d.u.1, v)] {
                let x = chart.position(pu, pv);
                min_dist = min_dist.min(radius * x.cross(&center).norm().atan2(x.dot(&center)));
            }
        }
        if 2.0 * sigma0 >= min_dist {
            return Err(KornError::domain(format!(
                "the support B(p0, 2σ0) leaves the surface (boundary distance {min_dist:.6})"
            )));
        }
    }
    let h = domain.half_thickness();
    Ok(AnsatzField {
        charts: charts.to_vec(),
        center,
        radius,
        sigma0,
        phi: 1.0 / h.sqrt(),
        half_thickness: h,
        kappa0,
        amplitude: 1.0,
    })
}

/// Surface integrals of the ansatz and the energies built from them.
#[derive(Clone, Copy, Debug)]
pub struct AnsatzEnergies {
    /// `∫ w² |Π|² dg`.
    pub a: f64,
    /// `∫ |Dw|² dg`.
    pub b: f64,
    /// `∫ |D²w|² dg`.
    pub c: f64,
    /// `∫ |i(Dw)Π|² dg`.
    pub d: f64,
    /// `∫ w² dg`.
    pub l2: f64,
    pub half_thickness: f64,
    /// `‖∇y + t p(y)‖²`.
    pub full: f64,
    /// `‖sym ∇y + t sym p(y)‖²`.
    pub sym: f64,
}

impl AnsatzEnergies {
    fn from_integrals(a: f64, b: f64, c: f64, d: f64, l2: f64, h: f64) -> Self {
        let h3 = 2.0 * h.powi(3) / 3.0;
        AnsatzEnergies {
            a,
            b,
            c,
            d,
            l2,
            half_thickness: h,
            full: 2.0 * h * (a + 2.0 * b) + h3 * (c + d),
            sym: 2.0 * h * a + h3 * (SYM_SHEAR_COEFFICIENT * d + c),
        }
    }

    /// `E_sym / E_full`.
    pub fn quotient(&self) -> f64 {
        self.sym / self.full
    }
}

/// Weight of `∫|i(Dw)Π|²` in the symmetric energy: `X = t i(Dw)Π` enters
/// the pointwise identity as `½|X|²`.
pub const SYM_SHEAR_COEFFICIENT: f64 = 0.5;

fn integrals(field: &AnsatzField, order: usize, cells: usize) -> [f64; 5] {
    let rule = GaussRule::new(order);
    let mut acc = [0.0; 5];
    for chart in &field.charts {
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
                        let jet = field.surface_jet(&geom);
                        let wt = wu * wv * 0.25 * hu * hv * geom.area_element;
                        let s = geom.ambient_shape_operator();
                        let sdw = s * jet.dw;
                        acc[0] += wt * jet.w * jet.w * geom.second_form_norm_sq;
                        acc[1] += wt * jet.dw.norm_squared();
                        acc[2] += wt * jet.hess.norm_squared();
                        acc[3] += wt * (sdw.dot(&jet.frame[0]).powi(2) + sdw.dot(&jet.frame[1]).powi(2));
                        acc[4] += wt * jet.w * jet.w;
                    }
                }
            }
        }
    }
    acc
}

/// Cells per chart direction so that one cell spans at most a quarter
/// of the oscillation wavelength `2π√h` and of the cutoff width `σ0`.
fn base_cells(field: &AnsatzField) -> usize {
    let wavelength = (2.0 * std::f64::consts::PI / field.phi).min(field.sigma0);
    field
        .charts
        .iter()
        .map(|c| {
            let d = c.domain();
            let span = field.radius * (d.u.1 - d.u.0).abs().max((d.v.1 - d.v.0).abs());
            (4.0 * span / wavelength).ceil() as usize
        })
        .max()
        .unwrap_or(1)
        .max(4)
}

/// Energies by composite Gauss quadrature with `order` points per cell
/// direction; a ×2 cell refinement must agree to `1e-4` relative.
pub fn ansatz_energies(field: &AnsatzField, order: usize) -> Result<AnsatzEnergies> {
    if order < 2 {
        return Err(KornError::config("quadrature order must be at least 2"));
    }
    let cells = base_cells(field);
    let coarse = integrals(field, order, cells);
    let fine = integrals(field, order, 2 * cells);
    let h = field.half_thickness;
    let ec = AnsatzEnergies::from_integrals(coarse[0], coarse[1], coarse[2], coarse[3], coarse[4], h);
    let ef = AnsatzEnergies::from_integrals(fine[0], fine[1], fine[2], fine[3], fine[4], h);
    let change = ((ef.full - ec.full) / ef.full).abs().max(((ef.sym - ec.sym) / ef.sym).abs());
    if !(change <= 1e-4) {
        return Err(KornError::Resolution { relative_change: change });
    }
    Ok(ef)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LowerBoundCheck {
    /// `∫ w² dg`.
    pub lhs: f64,
    /// `(π³/8)(σ0/π − 3√h/4)²`.
    pub rhs: f64,
    pub holds: bool,
    /// The bound is vacuous (`σ0/π ≤ 3√h/4`).
    pub inconclusive: bool,
}

pub fn lower_bound_rhs(sigma0: f64, h: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let bracket = sigma0 / pi - 0.75 * h.sqrt();
    pi.powi(3) / 8.0 * bracket * bracket
}

pub fn lower_bound_check(field: &AnsatzField) -> Result<LowerBoundCheck> {
    let e = ansatz_energies(field, 8)?;
    let h = field.half_thickness;
    let inconclusive = field.sigma0 / std::f64::consts::PI - 0.75 * h.sqrt() <= 0.0;
    let rhs = lower_bound_rhs(field.sigma0, h);
    let lhs = e.l2 / (field.amplitude * field.amplitude);
    Ok(LowerBoundCheck {
        lhs,
        rhs,
        holds: !inconclusive && lhs >= rhs,
        inconclusive,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::strain_tensors;

    fn sphere_field(h: f64, sigma0: f64) -> AnsatzField {
        sphere_field_r(1.0, h, sigma0)
    }

    fn sphere_field_r(r: f64, h: f64, sigma0: f64) -> AnsatzField {
        let d = ShellDomain::closed_sphere(r, h).unwrap();
        let p0 = SurfacePoint::new(d.charts()[0].clone(), 0.1, -0.2).unwrap();
        build_ansatz(&d, &p0, sigma0).unwrap()
    }

    #[test]
    fn sine_root_and_limits() {
        let t = sine_condition_root();
        assert!((t.sin() / t - 0.5).abs() < 1e-14);
        assert!((t - 1.895494267).abs() < 1e-8);
        let d = ShellDomain::closed_sphere(1.0, 0.01).unwrap();
        let p0 = SurfacePoint::new(d.charts()[0].clone(), 0.0, 0.0).unwrap();
        match build_ansatz(&d, &p0, 1.9) {
            Err(KornError::Domain(msg)) => assert!(msg.contains("1.89549")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn smoothstep_is_c2() {
        for &x in &[0.0, 1.0] {
            let (_, d, dd) = smoothstep(x);
            assert_eq!((d, dd), (0.0, 0.0));
        }
        let e = 1e-5;
        for k in 1..20 {
            let x = k as f64 / 20.0;
            let fd = (smoothstep(x + e).0 - 2.0 * smoothstep(x).0 + smoothstep(x - e).0) / (e * e);
            assert!((fd - smoothstep(x).2).abs() < 1e-4);
        }
    }

    #[test]
    fn jet_matches_finite_differences() {
        for r in [1.0, 2.0] {
            let f = sphere_field_r(r, 0.02, 0.7 * r);
            let chart = &f.charts()[0];
            for &(u, v) in &[(0.3, 0.1), (-0.4, 0.5), (0.1, -0.2), (0.6, 0.6)] {
                let jet = f.jet(chart, u, v, 0.0);
                let e = 1e-5;
                let w = |u: f64, v: f64| f.jet(chart, u, v, 0.0).w;
                let du = (w(u + e, v) - w(u - e, v)) / (2.0 * e);
                let dv = (w(u, v + e) - w(u, v - e)) / (2.0 * e);
                assert!((du - jet.dw[0]).abs() < 1e-6 && (dv - jet.dw[1]).abs() < 1e-6);
                let e2 = 1e-4;
                let duu = (w(u + e2, v) - 2.0 * w(u, v) + w(u - e2, v)) / (e2 * e2);
                let duv = (w(u + e2, v + e2) - w(u + e2, v - e2) - w(u - e2, v + e2) + w(u - e2, v - e2)) / (4.0 * e2 * e2);
                let dvv = (w(u, v + e2) - 2.0 * w(u, v) + w(u, v - e2)) / (e2 * e2);
                for (fd, an) in [(duu, jet.hess_w[0][0]), (duv, jet.hess_w[0][1]), (dvv, jet.hess_w[1][1])] {
                    assert!((fd - an).abs() < 1e-4 * (1.0 + fd.abs()), "{fd} {an}");
                }
                // W^k = −t g^{kl} ∂l w, differentiated in u
                let t = 0.01;
                let bw = |u: f64| f.jet(chart, u, v, t).big_w;
                let (p, m) = (bw(u + e), bw(u - e));
                let jt = f.jet(chart, u, v, t);
                for k in 0..2 {
                    assert!(((p[k] - m[k]) / (2.0 * e) - jt.dbig_w[0][k]).abs() < 1e-6);
                }
            }
        }
        let f = sphere_field(0.02, 0.7);
        let chart = &f.charts()[0];
        // pole: w = 1, Dw = 0
        let geom = evaluate_unchecked(chart, 0.1, -0.2);
        let j = f.surface_jet(&geom);
        assert!((j.w - 1.0).abs() < 1e-15 && j.dw.norm() < 1e-12);
        assert_eq!(f.jet(chart, 0.3, 0.1, 0.0).big_w, [0.0, 0.0]);
    }

    #[test]
    fn energies_match_pointwise_identity() {
        let f = sphere_field(0.05, 0.6);
        let e = ansatz_energies(&f, 8).unwrap();
        assert!(e.sym <= e.full);
        assert!((e.full - (2.0 * 0.05 * (e.a + 2.0 * e.b) + 2.0 * 0.05f64.powi(3) / 3.0 * (e.c + e.d))).abs() < 1e-12 * e.full);
        let s = f.scaled(3.0);
        let es = ansatz_energies(&s, 8).unwrap();
        assert!((es.full / e.full - 9.0).abs() < 1e-12 * 9.0);
        // pointwise strain tensors of the same field, integrated in t exactly (quadratic in t)
        let rule = GaussRule::new(3);
        let h = 0.05;
        let cells = 24;
        let (mut full, mut sym) = (0.0, 0.0);
        for chart in f.charts() {
            let d = chart.domain();
            let hu = (d.u.1 - d.u.0) / cells as f64;
            let hv = (d.v.1 - d.v.0) / cells as f64;
            let gr = GaussRule::new(8);
            for i in 0..cells {
                for j in 0..cells {
                    for (xu, wu) in gr.iter() {
                        for (xv, wv) in gr.iter() {
                            let u = d.u.0 + hu * (i as f64 + 0.5 * (xu + 1.0));
                            let v = d.v.0 + hv * (j as f64 + 0.5 * (xv + 1.0));
                            let geom = evaluate_unchecked(chart, u, v);
                            let wt = wu * wv * 0.25 * hu * hv * geom.area_element;
                            for (xt, wtt) in rule.iter() {
                                let t = h * xt;
                                let s = strain_tensors(&f.jet(chart, u, v, t), &geom);
                                full += wt * wtt * h * s.full_energy();
                                sym += wt * wtt * h * s.sym_energy();
                            }
                        }
                    }
                }
            }
        }
        assert!(((full - e.full) / e.full).abs() < 1e-6, "{full} {}", e.full);
        assert!(((sym - e.sym) / e.sym).abs() < 1e-6, "{sym} {}", e.sym);
    }

    #[test]
    fn lower_bound() {
        assert!((lower_bound_rhs(std::f64::consts::FRAC_PI_2, 0.04) - std::f64::consts::PI.powi(3) / 8.0 * 0.1225).abs() < 1e-14);
        let f = sphere_field(0.01, 1.0);
        let c = lower_bound_check(&f).unwrap();
        assert!(c.holds && !c.inconclusive);
        let g = sphere_field(0.3, 0.3);
        assert!(lower_bound_check(&g).unwrap().inconclusive);
    }
}
