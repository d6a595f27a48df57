//! Displacements split as `y = W + w n`, the mid-surface strain measures
//! `Υ = sym DW + wΠ` and `X = Dw − i(W)Π + W_t`, and residual evaluators for
//! the identities relating them to the ambient gradient.
//!
//! Tangent fields are carried by contravariant chart components `W^k`; all
//! frame-dependent quantities are reported in the positively oriented
//! g-orthonormal frame of [`SurfaceGeometry::orthonormal_frame`].

use nalgebra::{Matrix2, Matrix3, Vector2};
use rand::Rng;

use crate::error::{KornError, Result};
use crate::geometry::{evaluate_unchecked, Chart, SurfaceGeometry, Vec3};
use crate::quadrature::GaussRule;

/// Relative step for first derivatives by central differences.
pub const FD_STEP: f64 = 1e-5;
/// Relative step for second derivatives and divergences.
pub const FD_STEP_SECOND: f64 = 1e-4;

/// A displacement field defined on ambient space.
pub trait AmbientField: Sync {
    fn value(&self, x: &Vec3) -> Vec3;

    /// `J_ij = ∂_j y_i`, when known in closed form.
    fn jacobian(&self, _x: &Vec3) -> Option<Matrix3<f64>> {
        None
    }
}

/// Central-difference ambient Jacobian.
pub fn ambient_jacobian_fd(field: &dyn AmbientField, x: &Vec3, step: f64) -> Matrix3<f64> {
    let mut j = Matrix3::zeros();
    for c in 0..3 {
        let mut e = Vec3::zeros();
        e[c] = step;
        let d = (field.value(&(x + e)) - field.value(&(x - e))) / (2.0 * step);
        j.set_column(c, &d);
    }
    j
}

/// Rigid motion `y = a + ω × x`.
#[derive(Clone, Copy, Debug)]
pub struct RigidMotion {
    pub translation: Vec3,
    pub rotation: Vec3,
}

impl AmbientField for RigidMotion {
    fn value(&self, x: &Vec3) -> Vec3 {
        self.translation + self.rotation.cross(x)
    }

    fn jacobian(&self, _x: &Vec3) -> Option<Matrix3<f64>> {
        Some(self.rotation.cross_matrix())
    }
}

/// `y_i = c_i + B_ij x_j + Q_ijk x_j x_k` with symmetric `Q_i`.
#[derive(Clone, Debug)]
pub struct QuadraticField {
    pub constant: Vec3,
    pub linear: Matrix3<f64>,
    pub quadratic: [Matrix3<f64>; 3],
}

impl QuadraticField {
    pub fn random(rng: &mut impl Rng) -> Self {
        let mut m = || Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let constant = Vec3::new(0.3, -0.2, 0.5);
        let linear = m();
        let q = [m(), m(), m()];
        let quadratic = q.map(|a| 0.5 * (a + a.transpose()));
        QuadraticField {
            constant,
            linear,
            quadratic,
        }
    }
}

impl AmbientField for QuadraticField {
    fn value(&self, x: &Vec3) -> Vec3 {
        let mut y = self.constant + self.linear * x;
        for i in 0..3 {
            y[i] += x.dot(&(self.quadratic[i] * x));
        }
        y
    }

    fn jacobian(&self, x: &Vec3) -> Option<Matrix3<f64>> {
        let mut j = self.linear;
        for i in 0..3 {
            let row = 2.0 * (self.quadratic[i] * x);
            for c in 0..3 {
                j[(i, c)] += row[c];
            }
        }
        Some(j)
    }
}

/// The unit normal of a sphere centred at the origin, extended radially.
#[derive(Clone, Copy, Debug)]
pub struct RadialUnitField;

impl AmbientField for RadialUnitField {
    fn value(&self, x: &Vec3) -> Vec3 {
        x / x.norm()
    }

    fn jacobian(&self, x: &Vec3) -> Option<Matrix3<f64>> {
        let r = x.norm();
        Some((Matrix3::identity() - x * x.transpose() / (r * r)) / r)
    }
}

/// The unit normal of a `z`-axis cylinder, extended radially.
#[derive(Clone, Copy, Debug)]
pub struct AxialUnitField;

impl AmbientField for AxialUnitField {
    fn value(&self, x: &Vec3) -> Vec3 {
        let p = Vec3::new(x[0], x[1], 0.0);
        p / p.norm()
    }

    fn jacobian(&self, x: &Vec3) -> Option<Matrix3<f64>> {
        let p = Vec3::new(x[0], x[1], 0.0);
        let r = p.norm();
        let mut proj = Matrix3::zeros();
        proj[(0, 0)] = 1.0;
        proj[(1, 1)] = 1.0;
        Some((proj - p * p.transpose() / (r * r)) / r)
    }
}

/// `w` and `W` at one point of the shell.
#[derive(Clone, Debug)]
pub struct Decomposed {
    pub w: f64,
    /// Contravariant components `W^k`.
    pub components: [f64; 2],
    /// `W` as an ambient tangent vector.
    pub tangent: Vec3,
}

/// `w = ⟨y, n⟩`, `W = y − w n`, evaluated at `r + t n`.
pub fn decompose(y: &dyn AmbientField, geom: &SurfaceGeometry, t: f64) -> Decomposed {
    let val = y.value(&(geom.position + t * geom.normal));
    decompose_value(&val, geom)
}

fn decompose_value(val: &Vec3, geom: &SurfaceGeometry) -> Decomposed {
    let w = val.dot(&geom.normal);
    let tangent = val - w * geom.normal;
    Decomposed {
        w,
        components: geom.tangent_components(&tangent),
        tangent,
    }
}

/// Values and derivatives of a mid-surface field at `(u, v, t)`.
#[derive(Clone, Debug, Default)]
pub struct FieldJet {
    pub w: f64,
    /// `∂u w`, `∂v w`.
    pub dw: [f64; 2],
    pub w_t: f64,
    /// `∂i ∂j w` in parameters.
    pub hess_w: [[f64; 2]; 2],
    /// `W^k`.
    pub big_w: [f64; 2],
    /// `∂i W^k`, indexed `[i][k]`.
    pub dbig_w: [[f64; 2]; 2],
    /// `∂t W^k`.
    pub big_w_t: [f64; 2],
}

/// A pair `(W, w)` over a chart, possibly depending on `t`.
pub trait MidsurfaceField: Sync {
    fn jet(&self, chart: &Chart, u: f64, v: f64, t: f64) -> FieldJet;
}

/// How derivatives of a decomposed ambient field are obtained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Derivatives {
    /// Chain rule through the closed-form ambient Jacobian.
    Analytic,
    /// Central differences of the decomposition.
    FiniteDifference,
}

/// The `(W, w)` view of an ambient field.
pub struct Decomposition<'a> {
    pub field: &'a dyn AmbientField,
    pub derivatives: Derivatives,
}

impl<'a> Decomposition<'a> {
    pub fn new(field: &'a dyn AmbientField, derivatives: Derivatives) -> Self {
        Decomposition { field, derivatives }
    }

    fn components(&self, chart: &Chart, u: f64, v: f64, t: f64) -> (f64, [f64; 2]) {
        let g = evaluate_unchecked(chart, u, v);
        let d = decompose(self.field, &g, t);
        (d.w, d.components)
    }

    fn analytic_first(&self, chart: &Chart, u: f64, v: f64, t: f64) -> Option<FieldJet> {
        let g = evaluate_unchecked(chart, u, v);
        let x = g.position + t * g.normal;
        let j = self.field.jacobian(&x)?;
        let y = self.field.value(&x);
        let d = decompose_value(&y, &g);
        let mut jet = FieldJet {
            w: d.w,
            big_w: d.components,
            ..FieldJet::default()
        };
        let jn = j * g.normal;
        jet.w_t = jn.dot(&g.normal);
        jet.big_w_t = g.tangent_components(&(jn - jet.w_t * g.normal));
        let proj = g.tangent_projector();
        for i in 0..2 {
            let dy = j * (g.tangents[i] + t * g.normal_derivatives[i]);
            let dw = dy.dot(&g.normal) + y.dot(&g.normal_derivatives[i]);
            jet.dw[i] = dw;
            let d_amb = dy - dw * g.normal - d.w * g.normal_derivatives[i];
            let cov = g.tangent_components(&(proj * d_amb));
            for k in 0..2 {
                let mut c = cov[k];
                for l in 0..2 {
                    c -= g.christoffel[k][i][l] * d.components[l];
                }
                jet.dbig_w[i][k] = c;
            }
        }
        Some(jet)
    }

    fn fd_jet(&self, chart: &Chart, u: f64, v: f64, t: f64) -> FieldJet {
        let s = FD_STEP * chart.domain().diameter();
        let (w, big_w) = self.components(chart, u, v, t);
        let mut jet = FieldJet {
            w,
            big_w,
            ..FieldJet::default()
        };
        for i in 0..2 {
            let (du, dv) = if i == 0 { (s, 0.0) } else { (0.0, s) };
            let (wp, cp) = self.components(chart, u + du, v + dv, t);
            let (wm, cm) = self.components(chart, u - du, v - dv, t);
            jet.dw[i] = (wp - wm) / (2.0 * s);
            for k in 0..2 {
                jet.dbig_w[i][k] = (cp[k] - cm[k]) / (2.0 * s);
            }
        }
        let st = FD_STEP;
        let (wp, cp) = self.components(chart, u, v, t + st);
        let (wm, cm) = self.components(chart, u, v, t - st);
        jet.w_t = (wp - wm) / (2.0 * st);
        jet.big_w_t = [(cp[0] - cm[0]) / (2.0 * st), (cp[1] - cm[1]) / (2.0 * st)];
        jet.hess_w = second_differences(chart, u, v, |a, b| self.components(chart, a, b, t).0);
        jet
    }
}

impl MidsurfaceField for Decomposition<'_> {
    fn jet(&self, chart: &Chart, u: f64, v: f64, t: f64) -> FieldJet {
        match self.derivatives {
            Derivatives::Analytic => match self.analytic_first(chart, u, v, t) {
                Some(mut jet) => {
                    // second derivatives by differencing the exact gradient
                    let s = FD_STEP * chart.domain().diameter();
                    for i in 0..2 {
                        let (du, dv) = if i == 0 { (s, 0.0) } else { (0.0, s) };
                        let p = self.analytic_first(chart, u + du, v + dv, t).unwrap_or_default();
                        let m = self.analytic_first(chart, u - du, v - dv, t).unwrap_or_default();
                        for j in 0..2 {
                            jet.hess_w[i][j] = (p.dw[j] - m.dw[j]) / (2.0 * s);
                        }
                    }
                    let sym = 0.5 * (jet.hess_w[0][1] + jet.hess_w[1][0]);
                    jet.hess_w[0][1] = sym;
                    jet.hess_w[1][0] = sym;
                    jet
                }
                None => self.fd_jet(chart, u, v, t),
            },
            Derivatives::FiniteDifference => self.fd_jet(chart, u, v, t),
        }
    }
}

fn second_differences(chart: &Chart, u: f64, v: f64, f: impl Fn(f64, f64) -> f64) -> [[f64; 2]; 2] {
    let s = FD_STEP_SECOND * chart.domain().diameter();
    let f0 = f(u, v);
    let fuu = (f(u + s, v) - 2.0 * f0 + f(u - s, v)) / (s * s);
    let fvv = (f(u, v + s) - 2.0 * f0 + f(u, v - s)) / (s * s);
    let fuv = (f(u + s, v + s) - f(u + s, v - s) - f(u - s, v + s) + f(u - s, v - s)) / (4.0 * s * s);
    [[fuu, fuv], [fuv, fvv]]
}

type ScalarFn = Box<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// A field given by closures for `w(u, v, t)` and `W^k(u, v, t)`, with every
/// derivative taken by central differences.
pub struct ComponentField {
    w: ScalarFn,
    big_w: [ScalarFn; 2],
}

impl ComponentField {
    pub fn new(
        w: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        w1: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        w2: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ComponentField {
            w: Box::new(w),
            big_w: [Box::new(w1), Box::new(w2)],
        }
    }
}

impl MidsurfaceField for ComponentField {
    fn jet(&self, chart: &Chart, u: f64, v: f64, t: f64) -> FieldJet {
        let s = FD_STEP * chart.domain().diameter();
        let d = |f: &ScalarFn, du: f64, dv: f64, dt: f64| {
            (f(u + du, v + dv, t + dt) - f(u - du, v - dv, t - dt)) / (2.0 * (du + dv + dt))
        };
        let mut jet = FieldJet {
            w: (self.w)(u, v, t),
            big_w: [(self.big_w[0])(u, v, t), (self.big_w[1])(u, v, t)],
            dw: [d(&self.w, s, 0.0, 0.0), d(&self.w, 0.0, s, 0.0)],
            w_t: d(&self.w, 0.0, 0.0, FD_STEP),
            ..FieldJet::default()
        };
        for k in 0..2 {
            jet.dbig_w[0][k] = d(&self.big_w[k], s, 0.0, 0.0);
            jet.dbig_w[1][k] = d(&self.big_w[k], 0.0, s, 0.0);
            jet.big_w_t[k] = d(&self.big_w[k], 0.0, 0.0, FD_STEP);
        }
        jet.hess_w = second_differences(chart, u, v, |a, b| (self.w)(a, b, t));
        jet
    }
}

/// Random trigonometric field with closed-form derivatives:
/// every component is `Σ a (1 + b t + c t²) sin(m u + k v + p)`.
#[derive(Clone, Debug)]
pub struct TrigField {
    // [component][term] = (amp, b, c, m, k, phase); component 0 is w
    terms: [Vec<[f64; 6]>; 3],
}

impl TrigField {
    /// `u` frequencies are integers so the field is periodic on a cylinder.
    pub fn random(rng: &mut impl Rng, terms: usize) -> Self {
        let mut make = || {
            (0..terms)
                .map(|_| {
                    [
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(0..4) as f64,
                        rng.random_range(-2.0..2.0),
                        rng.random_range(0.0..std::f64::consts::TAU),
                    ]
                })
                .collect::<Vec<_>>()
        };
        TrigField {
            terms: [make(), make(), make()],
        }
    }

    // (f, f_u, f_v, f_t, f_uu, f_uv, f_vv)
    fn eval(&self, c: usize, u: f64, v: f64, t: f64) -> [f64; 7] {
        let mut out = [0.0; 7];
        for &[a, b, cc, m, k, p] in &self.terms[c] {
            let pt = a * (1.0 + b * t + cc * t * t);
            let pt_t = a * (b + 2.0 * cc * t);
            let (s, co) = (m * u + k * v + p).sin_cos();
            out[0] += pt * s;
            out[1] += pt * m * co;
            out[2] += pt * k * co;
            out[3] += pt_t * s;
            out[4] -= pt * m * m * s;
            out[5] -= pt * m * k * s;
            out[6] -= pt * k * k * s;
        }
        out
    }
}

impl MidsurfaceField for TrigField {
    fn jet(&self, _chart: &Chart, u: f64, v: f64, t: f64) -> FieldJet {
        let w = self.eval(0, u, v, t);
        let a = self.eval(1, u, v, t);
        let b = self.eval(2, u, v, t);
        FieldJet {
            w: w[0],
            dw: [w[1], w[2]],
            w_t: w[3],
            hess_w: [[w[4], w[5]], [w[5], w[6]]],
            big_w: [a[0], b[0]],
            dbig_w: [[a[1], b[1]], [a[2], b[2]]],
            big_w_t: [a[3], b[3]],
        }
    }
}

/// Strain measures in the g-orthonormal frame `(e1, e2)`.
#[derive(Clone, Debug)]
pub struct StrainRecord {
    /// `Υ = sym DW + wΠ` as `(Υ11, Υ12, Υ22)`.
    pub upsilon: [f64; 3],
    /// `X = Dw − i(W)Π + W_t`.
    pub x: [f64; 2],
    pub w_t: f64,
    /// `DW_ij = ⟨D_{e_i} W, e_j⟩`.
    pub dw: Matrix2<f64>,
    /// `Π(e_i, e_j)`.
    pub second_form: Matrix2<f64>,
    pub w: f64,
    /// `Dw − i(W)Π`.
    pub normal_shear: [f64; 2],
    pub big_w_t: [f64; 2],
}

impl StrainRecord {
    pub fn upsilon_matrix(&self) -> Matrix2<f64> {
        let [a, b, c] = self.upsilon;
        Matrix2::new(a, b, b, c)
    }

    /// `|DW + wΠ|² + |Dw − i(W)Π|² + |W_t|² + w_t²`.
    pub fn full_energy(&self) -> f64 {
        (self.dw + self.w * self.second_form).norm_squared()
            + sq2(self.normal_shear)
            + sq2(self.big_w_t)
            + self.w_t * self.w_t
    }

    /// `|Υ|² + ½|X|² + w_t²`.
    pub fn sym_energy(&self) -> f64 {
        self.upsilon_matrix().norm_squared() + 0.5 * sq2(self.x) + self.w_t * self.w_t
    }
}

fn sq2(a: [f64; 2]) -> f64 {
    a[0] * a[0] + a[1] * a[1]
}

/// Coefficients `C` with `e_a = C_{ka} ∂k r`.
pub(crate) fn frame_coefficients(geom: &SurfaceGeometry) -> (Matrix2<f64>, [Vec3; 2]) {
    let e = geom.orthonormal_frame();
    let c0 = geom.tangent_components(&e[0]);
    let c1 = geom.tangent_components(&e[1]);
    (Matrix2::new(c0[0], c1[0], c0[1], c1[1]), e)
}

/// Mixed covariant derivative `(D_i W)^k = ∂i W^k + Γ^k_ij W^j`, indexed `[k][i]`.
pub fn covariant_dw(jet: &FieldJet, geom: &SurfaceGeometry) -> Matrix2<f64> {
    Matrix2::from_fn(|k, i| {
        let mut s = jet.dbig_w[i][k];
        for j in 0..2 {
            s += geom.christoffel[k][i][j] * jet.big_w[j];
        }
        s
    })
}

pub fn strain_tensors(jet: &FieldJet, geom: &SurfaceGeometry) -> StrainRecord {
    let (c, e) = frame_coefficients(geom);
    let t = covariant_dw(jet, geom);
    // D_{e_i} W as ambient vectors
    let dew: Vec<Vec3> = (0..2)
        .map(|i| {
            let mut v = Vec3::zeros();
            for a in 0..2 {
                for k in 0..2 {
                    v += c[(a, i)] * t[(k, a)] * geom.tangents[k];
                }
            }
            v
        })
        .collect();
    let dw = Matrix2::from_fn(|i, j| dew[i].dot(&e[j]));
    let pi = c.transpose() * geom.second_form * c;
    let grad = Vector2::new(jet.dw[0], jet.dw[1]);
    let dw_frame = c.transpose() * grad;
    let w_cov = Vector2::new(jet.big_w[0], jet.big_w[1]);
    let iw_pi = c.transpose() * (geom.second_form * w_cov);
    let wt_amb = geom.to_ambient(jet.big_w_t);
    let wt = [wt_amb.dot(&e[0]), wt_amb.dot(&e[1])];
    let shear = [dw_frame[0] - iw_pi[0], dw_frame[1] - iw_pi[1]];
    let ups = 0.5 * (dw + dw.transpose()) + jet.w * pi;
    StrainRecord {
        upsilon: [ups[(0, 0)], ups[(0, 1)], ups[(1, 1)]],
        x: [shear[0] + wt[0], shear[1] + wt[1]],
        w_t: jet.w_t,
        dw,
        second_form: pi,
        w: jet.w,
        normal_shear: shear,
        big_w_t: wt,
    }
}

/// Both sides of the pointwise energy identities.
#[derive(Clone, Debug)]
pub struct StrainIdentityResidual {
    pub lhs_full: f64,
    pub rhs_full: f64,
    pub lhs_sym: f64,
    pub rhs_sym: f64,
    pub full: f64,
    pub sym: f64,
}

/// Compare `|∇y (I + t S)|²` and its symmetric part, from the ambient
/// Jacobian, against the strain decomposition of the same field.
pub fn strain_identity_residual(decomp: &Decomposition<'_>, chart: &Chart, u: f64, v: f64, t: f64) -> StrainIdentityResidual {
    let geom = evaluate_unchecked(chart, u, v);
    let x = geom.position + t * geom.normal;
    let j = match decomp.derivatives {
        Derivatives::Analytic => decomp
            .field
            .jacobian(&x)
            .unwrap_or_else(|| ambient_jacobian_fd(decomp.field, &x, FD_STEP)),
        Derivatives::FiniteDifference => ambient_jacobian_fd(decomp.field, &x, FD_STEP),
    };
    let i_plus = j * (Matrix3::identity() + t * geom.ambient_shape_operator());
    let lhs_full = i_plus.norm_squared();
    let lhs_sym = (0.5 * (i_plus + i_plus.transpose())).norm_squared();
    let rec = strain_tensors(&decomp.jet(chart, u, v, t), &geom);
    let rhs_full = rec.full_energy();
    let rhs_sym = rec.sym_energy();
    StrainIdentityResidual {
        lhs_full,
        rhs_full,
        lhs_sym,
        rhs_sym,
        full: (lhs_full - rhs_full).abs(),
        sym: (lhs_sym - rhs_sym).abs(),
    }
}

#[derive(Clone, Debug)]
pub struct LaplacianResidual {
    pub laplacian: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// `Δ_g w` against `div_g X − tr_g Υ(y_t) + w_t tr_g Π + ⟨DW, Π⟩ + tr_g i(W)DΠ`.
///
/// The left side uses the covariant Hessian; the divergences on the right are
/// central differences of `√g X^i` and `√g W_t^i`.
pub fn laplacian_identity_residual(field: &dyn MidsurfaceField, chart: &Chart, u: f64, v: f64, t: f64) -> LaplacianResidual {
    let geom = evaluate_unchecked(chart, u, v);
    let jet = field.jet(chart, u, v, t);
    let gi = &geom.metric_inv;
    let mut lap = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let mut h = jet.hess_w[i][j];
            for k in 0..2 {
                h -= geom.christoffel[k][i][j] * jet.dw[k];
            }
            lap += gi[(i, j)] * h;
        }
    }

    // contravariant X and W_t at a nearby point, weighted by √g
    let flux = |a: f64, b: f64| -> ([f64; 2], [f64; 2]) {
        let g = evaluate_unchecked(chart, a, b);
        let jt = field.jet(chart, a, b, t);
        let wv = Vector2::new(jt.big_w[0], jt.big_w[1]);
        let pi_w = g.second_form * wv;
        let cov = Vector2::new(jt.dw[0] - pi_w[0], jt.dw[1] - pi_w[1]);
        let xs = g.metric_inv * cov;
        let sg = g.area_element;
        (
            [sg * (xs[0] + jt.big_w_t[0]), sg * (xs[1] + jt.big_w_t[1])],
            [sg * jt.big_w_t[0], sg * jt.big_w_t[1]],
        )
    };
    // fourth-order central differences
    let s = FD_STEP_SECOND * chart.domain().diameter();
    let (mut div_x, mut div_wt) = (0.0, 0.0);
    for (k, c) in [(1.0, 8.0), (2.0, -1.0)] {
        let (xu_p, wu_p) = flux(u + k * s, v);
        let (xu_m, wu_m) = flux(u - k * s, v);
        let (xv_p, wv_p) = flux(u, v + k * s);
        let (xv_m, wv_m) = flux(u, v - k * s);
        div_x += c * ((xu_p[0] - xu_m[0]) + (xv_p[1] - xv_m[1]));
        div_wt += c * ((wu_p[0] - wu_m[0]) + (wv_p[1] - wv_m[1]));
    }
    div_x /= 12.0 * s * geom.area_element;
    div_wt /= 12.0 * s * geom.area_element;
    let tr_ups_t = div_wt + jet.w_t * geom.mean_trace;

    // ⟨DW, Π⟩ = (D_a W)^k Π_k^a
    let dwm = covariant_dw(&jet, &geom);
    let mut dw_pi = 0.0;
    for k in 0..2 {
        for a in 0..2 {
            dw_pi += dwm[(k, a)] * (geom.second_form * gi)[(k, a)];
        }
    }
    let mut w_dpi = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                w_dpi += gi[(i, j)] * geom.second_form_derivative[k][j][i] * jet.big_w[k];
            }
        }
    }
    let rhs = div_x - tr_ups_t + jet.w_t * geom.mean_trace + dw_pi + w_dpi;
    LaplacianResidual {
        laplacian: lap,
        rhs,
        residual: (lap - rhs).abs(),
    }
}

/// A tangent vector field on the mid-surface, independent of `t`.
pub trait TangentField: Sync {
    /// `W` and the covariant derivatives `D_{∂u} W`, `D_{∂v} W`, as ambient vectors.
    fn jet(&self, geom: &SurfaceGeometry) -> (Vec3, [Vec3; 2]);
}

/// `W = ω × x`, a Killing field of any sphere centred at the origin.
#[derive(Clone, Copy, Debug)]
pub struct RotationField {
    pub omega: Vec3,
}

impl TangentField for RotationField {
    fn jet(&self, geom: &SurfaceGeometry) -> (Vec3, [Vec3; 2]) {
        let p = geom.tangent_projector();
        (
            p * self.omega.cross(&geom.position),
            [
                p * self.omega.cross(&geom.tangents[0]),
                p * self.omega.cross(&geom.tangents[1]),
            ],
        )
    }
}

/// `W^k = a_k + b_k u + c_k v`.
#[derive(Clone, Copy, Debug)]
pub struct LinearComponentField {
    pub a: [f64; 2],
    pub b: [f64; 2],
    pub c: [f64; 2],
}

impl LinearComponentField {
    pub fn random(rng: &mut impl Rng) -> Self {
        let mut r = || [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        LinearComponentField { a: r(), b: r(), c: r() }
    }
}

impl TangentField for LinearComponentField {
    fn jet(&self, geom: &SurfaceGeometry) -> (Vec3, [Vec3; 2]) {
        let jet = FieldJet {
            big_w: [
                self.a[0] + self.b[0] * geom.u + self.c[0] * geom.v,
                self.a[1] + self.b[1] * geom.u + self.c[1] * geom.v,
            ],
            dbig_w: [[self.b[0], self.b[1]], [self.c[0], self.c[1]]],
            ..FieldJet::default()
        };
        let t = covariant_dw(&jet, geom);
        (
            geom.to_ambient(jet.big_w),
            [
                geom.to_ambient([t[(0, 0)], t[(1, 0)]]),
                geom.to_ambient([t[(0, 1)], t[(1, 1)]]),
            ],
        )
    }
}

/// `φ = W11 W22 − W12 W21` with `W_ij = ⟨D_{e_j} W, e_i⟩`.
pub fn sigma_density(field: &dyn TangentField, geom: &SurfaceGeometry) -> f64 {
    let (c, e) = frame_coefficients(geom);
    let (_, dw) = field.jet(geom);
    let de = [c[(0, 0)] * dw[0] + c[(1, 0)] * dw[1], c[(0, 1)] * dw[0] + c[(1, 1)] * dw[1]];
    let m = |i: usize, j: usize| de[j].dot(&e[i]);
    m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0)
}

/// Integration region for the `σ(W)` identity.
#[derive(Clone, Debug)]
pub enum SigmaRegion {
    /// A parameter rectangle of one chart; its four edges form the boundary.
    Patch { chart: Chart, u: (f64, f64), v: (f64, f64) },
    /// A closed surface covered by charts; there is no boundary term.
    Closed(Vec<Chart>),
}

impl SigmaRegion {
    pub fn whole_chart(chart: Chart) -> Self {
        let d = *chart.domain();
        SigmaRegion::Patch { chart, u: d.u, v: d.v }
    }
}

#[derive(Clone, Debug)]
pub struct SigmaIdentity {
    /// `2 ∫ φ dg`.
    pub lhs: f64,
    /// `∫ κ |W|² dg`.
    pub curvature_term: f64,
    /// `∮ ⟨B(W), μ⟩`, including the corner contributions of a polygonal boundary.
    pub boundary_term: f64,
    pub residual: f64,
}

/// Residual of `2∫φ = ∫κ|W|² + ∮[2⟨W,μ⟩ τ⟨W,τ⟩ + ⟨D_τ μ, τ⟩|W|²]` by composite
/// Gauss quadrature with `cells` cells per direction. On a boundary with
/// corners each edge also contributes `−[⟨W,μ⟩⟨W,τ⟩]` at its endpoints.
pub fn sigma_identity_residual(field: &dyn TangentField, region: &SigmaRegion, order: usize, cells: usize) -> Result<SigmaIdentity> {
    if order < 1 || cells < 1 {
        return Err(KornError::config("quadrature order and cell count must be positive"));
    }
    let rule = GaussRule::new(order);
    let mut lhs = 0.0;
    let mut curv = 0.0;
    let mut boundary = 0.0;
    let patches: Vec<(Chart, (f64, f64), (f64, f64))> = match region {
        SigmaRegion::Patch { chart, u, v } => vec![(*chart, *u, *v)],
        SigmaRegion::Closed(charts) => charts.iter().map(|c| (*c, c.domain().u, c.domain().v)).collect(),
    };
    for (chart, ur, vr) in &patches {
        let du = (ur.1 - ur.0) / cells as f64;
        let dv = (vr.1 - vr.0) / cells as f64;
        for ci in 0..cells {
            for cj in 0..cells {
                for (xa, wa) in rule.iter() {
                    for (xb, wb) in rule.iter() {
                        let u = ur.0 + du * (ci as f64 + 0.5 * (xa + 1.0));
                        let v = vr.0 + dv * (cj as f64 + 0.5 * (xb + 1.0));
                        let g = evaluate_unchecked(chart, u, v);
                        let wgt = wa * wb * 0.25 * du * dv * g.area_element;
                        let (w, _) = field.jet(&g);
                        lhs += 2.0 * wgt * sigma_density(field, &g);
                        curv += wgt * g.gauss_curvature * w.norm_squared();
                    }
                }
            }
        }
        if let SigmaRegion::Patch { .. } = region {
            boundary += rectangle_boundary_term(field, chart, *ur, *vr, &rule, cells);
        }
    }
    Ok(SigmaIdentity {
        lhs,
        curvature_term: curv,
        boundary_term: boundary,
        residual: (lhs - curv - boundary).abs(),
    })
}

fn rectangle_boundary_term(field: &dyn TangentField, chart: &Chart, ur: (f64, f64), vr: (f64, f64), rule: &GaussRule, cells: usize) -> f64 {
    let mut total = 0.0;
    // (edge runs along u?, fixed coordinate, outward sign in the other coordinate)
    let edges = [(true, vr.0, -1.0), (true, vr.1, 1.0), (false, ur.0, -1.0), (false, ur.1, 1.0)];
    for (along_u, fixed, outward) in edges {
        let (a0, a1) = if along_u { ur } else { vr };
        let point = |a: f64| if along_u { (a, fixed) } else { (fixed, a) };
        let (p, q) = if along_u { (0, 1) } else { (1, 0) };
        let frame = |g: &SurfaceGeometry| {
            let rp = g.tangents[p];
            let tau = rp / rp.norm();
            let mut mu = g.normal.cross(&tau);
            if mu.dot(&g.tangents[q]) * outward < 0.0 {
                mu = -mu;
            }
            (rp, tau, mu)
        };
        let integrand = |a: f64| {
            let (u, v) = point(a);
            let g = evaluate_unchecked(chart, u, v);
            let (rp, tau, mu) = frame(&g);
            let speed = rp.norm();
            let rpp = g.second_derivatives[p][p];
            let dtau = (rpp - rpp.dot(&tau) * tau) / (speed * speed);
            let d_tau_tau = g.tangent_projector() * dtau;
            let geod = -mu.dot(&d_tau_tau);
            let (w, dw) = field.jet(&g);
            let d_tau_w = dw[p] / speed;
            let tau_w_tau = d_tau_w.dot(&tau) + w.dot(&d_tau_tau);
            (2.0 * w.dot(&mu) * tau_w_tau + geod * w.norm_squared()) * speed
        };
        total += rule.integrate(a0, a1, cells, integrand);
        let corner = |a: f64| {
            let (u, v) = point(a);
            let g = evaluate_unchecked(chart, u, v);
            let (_, tau, mu) = frame(&g);
            let (w, _) = field.jet(&g);
            w.dot(&mu) * w.dot(&tau)
        };
        total -= corner(a1) - corner(a0);
    }
    total
}

/// Residuals of the `σ(W)` identity at `cells` and `2·cells`, and the
/// observed convergence rate `log2(r_coarse / r_fine)`.
#[derive(Clone, Debug)]
pub struct SigmaConvergence {
    pub coarse: f64,
    pub fine: f64,
    pub rate: f64,
    /// Both residuals already sit at the rounding floor.
    pub at_floor: bool,
}

impl SigmaConvergence {
    pub fn passes(&self, min_rate: f64) -> bool {
        self.at_floor || self.rate >= min_rate
    }
}

pub fn sigma_convergence(field: &dyn TangentField, region: &SigmaRegion, order: usize, cells: usize) -> Result<SigmaConvergence> {
    let a = sigma_identity_residual(field, region, order, cells)?;
    let b = sigma_identity_residual(field, region, order, 2 * cells)?;
    let scale = a.lhs.abs().max(a.curvature_term.abs()).max(a.boundary_term.abs()).max(1e-300);
    let floor = 1e-11 * scale.max(1.0);
    Ok(SigmaConvergence {
        coarse: a.residual,
        fine: b.residual,
        rate: (a.residual / b.residual).log2(),
        at_floor: b.residual <= floor,
    })
}

/// A C¹ cubic Hermite interpolant.
#[derive(Clone, Debug)]
pub struct HermiteSpline {
    knots: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl HermiteSpline {
    pub fn new(knots: Vec<f64>, values: Vec<f64>, slopes: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 || knots.len() != values.len() || knots.len() != slopes.len() {
            return Err(KornError::Data("spline needs ≥ 2 knots with matching samples".into()));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(KornError::Data("spline knots must increase strictly".into()));
        }
        Ok(HermiteSpline { knots, values, slopes })
    }

    /// Random spline on `[a, b]` with `pieces` uniform pieces.
    pub fn random(rng: &mut impl Rng, a: f64, b: f64, pieces: usize) -> Self {
        let knots: Vec<f64> = (0..=pieces).map(|i| a + (b - a) * i as f64 / pieces as f64).collect();
        let values = (0..=pieces).map(|_| rng.random_range(-1.0..1.0)).collect();
        let slopes = (0..=pieces).map(|_| rng.random_range(-5.0..5.0)).collect();
        HermiteSpline { knots, values, slopes }
    }

    pub fn start(&self) -> f64 {
        self.knots[0]
    }

    pub fn end(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    /// `(f(x), f'(x))`.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let n = self.knots.len();
        let i = match self.knots.partition_point(|&k| k <= x) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        };
        let (x0, x1) = (self.knots[i], self.knots[i + 1]);
        let h = x1 - x0;
        let s = (x - x0) / h;
        let (f0, f1, d0, d1) = (self.values[i], self.values[i + 1], self.slopes[i], self.slopes[i + 1]);
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let f = h00 * f0 + h10 * h * d0 + h01 * f1 + h11 * h * d1;
        let dh00 = 6.0 * s * s - 6.0 * s;
        let dh10 = 3.0 * s * s - 4.0 * s + 1.0;
        let dh01 = -6.0 * s * s + 6.0 * s;
        let dh11 = 3.0 * s * s - 2.0 * s;
        let df = (dh00 * f0 + dh01 * f1) / h + dh10 * d0 + dh11 * d1;
        (f, df)
    }

    /// `∫_lo^hi g(x, f, f')`, exact for polynomial integrands up to degree 9 per piece.
    pub fn integrate(&self, lo: f64, hi: f64, g: impl Fn(f64, f64, f64) -> f64) -> f64 {
        let rule = GaussRule::new(5);
        let mut breaks: Vec<f64> = vec![lo];
        breaks.extend(self.knots.iter().copied().filter(|&k| k > lo && k < hi));
        breaks.push(hi);
        let mut total = 0.0;
        for w in breaks.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b <= a {
                continue;
            }
            let mid = 0.5 * (a + b);
            for (x, wt) in rule.iter() {
                let xx = mid + 0.5 * (b - a) * x;
                let (f, df) = self.eval(xx);
                total += 0.5 * (b - a) * wt * g(xx, f, df);
            }
        }
        total
    }
}

/// Terms of the scalar inequality
/// `∫_{a+λ(b−a)}^b f² ≤ (2/λ)∫_a^{a+λ(b−a)} f² + 4∫_a^b (b−t)² f'²`.
#[derive(Clone, Debug)]
pub struct ScalarKornTerms {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn scalar_korn_1d_terms(f: &HermiteSpline, lambda: f64) -> Result<ScalarKornTerms> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(KornError::domain(format!("λ = {lambda} is outside (0, 1]")));
    }
    let (a, b) = (f.start(), f.end());
    if a < 0.0 {
        return Err(KornError::domain("the interval must start at a ≥ 0"));
    }
    let split = a + lambda * (b - a);
    let lhs = f.integrate(split, b, |_, v, _| v * v);
    let near = f.integrate(a, split, |_, v, _| v * v);
    let grad = f.integrate(a, b, |t, _, d| (b - t) * (b - t) * d * d);
    let rhs = 2.0 / lambda * near + 4.0 * grad;
    let scale = lhs.abs().max(rhs.abs()).max(1.0);
    Ok(ScalarKornTerms {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-9 * scale,
    })
}

pub fn scalar_korn_1d_check(f: &HermiteSpline, lambda: f64) -> Result<bool> {
    scalar_korn_1d_terms(f, lambda).map(|t| t.holds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{evaluate_geometry, CubeFace};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn decompose_examples() {
        let chart = Chart::spherical_cap(1.0, 1.0).unwrap();
        let g = evaluate_geometry(&chart, 0.0, 0.0).unwrap();
        let d = decompose(&RadialUnitField, &g, 0.0);
        assert!((d.w - 1.0).abs() < 1e-15 && d.tangent.norm() < 1e-15);
        let c = RigidMotion {
            translation: Vec3::new(1.0, 2.0, 3.0),
            rotation: Vec3::zeros(),
        };
        let d = decompose(&c, &g, 0.0);
        assert!((d.w - 3.0).abs() < 1e-15);
        assert!((d.tangent - Vec3::new(1.0, 2.0, 0.0)).norm() < 1e-15);
        let r = RigidMotion {
            translation: Vec3::new(0.1, 0.0, -0.4),
            rotation: Vec3::new(0.3, -1.2, 0.7),
        };
        let g = evaluate_geometry(&chart, 0.4, -0.3).unwrap();
        let d = decompose(&r, &g, 0.05);
        let y = r.value(&(g.position + 0.05 * g.normal));
        let back = g.to_ambient(d.components) + d.w * g.normal;
        assert!((back - y).norm() < 1e-12);
    }

    #[test]
    fn normal_field_strains() {
        let chart = Chart::spherical_cap(2.0, 1.0).unwrap();
        let dec = Decomposition::new(&RadialUnitField, Derivatives::Analytic);
        let g = evaluate_geometry(&chart, 0.2, 0.1).unwrap();
        let rec = strain_tensors(&dec.jet(&chart, 0.2, 0.1, 0.0), &g);
        assert!((rec.upsilon_matrix() - rec.second_form).norm() < 1e-12);
        assert!(rec.x[0].abs() < 1e-12 && rec.x[1].abs() < 1e-12);
    }

    #[test]
    fn translations_are_strain_free() {
        let chart = Chart::cylinder(1.0, 2.0).unwrap();
        let axial = ComponentField::new(|_, _, _| 0.0, |_, _, _| 0.0, |_, _, _| 1.0);
        let g = evaluate_geometry(&chart, 0.3, 1.0).unwrap();
        let rec = strain_tensors(&axial.jet(&chart, 0.3, 1.0, 0.0), &g);
        assert!(rec.upsilon_matrix().norm() < 1e-10);
        let c = RigidMotion {
            translation: Vec3::new(0.5, -1.0, 2.0),
            rotation: Vec3::zeros(),
        };
        let dec = Decomposition::new(&c, Derivatives::Analytic);
        for (u, v) in [(0.1, 0.2), (2.0, 1.5), (5.0, 0.0)] {
            let g = evaluate_geometry(&chart, u, v).unwrap();
            let rec = strain_tensors(&dec.jet(&chart, u, v, 0.03), &g);
            assert!(rec.upsilon_matrix().norm() < 1e-10);
            assert!(rec.sym_energy() < 1e-20);
        }
    }

    #[test]
    fn strain_identities_on_normal_and_rigid_fields() {
        let chart = Chart::spherical_cap(1.0, 1.0).unwrap();
        let fd = Decomposition::new(&RadialUnitField, Derivatives::FiniteDifference);
        let r = strain_identity_residual(&fd, &chart, 0.3, -0.2, 0.0);
        assert!(r.full < 1e-8, "{r:?}");
        let rigid = RigidMotion {
            translation: Vec3::new(0.2, 0.1, -0.3),
            rotation: Vec3::new(1.0, 0.5, -0.7),
        };
        let an = Decomposition::new(&rigid, Derivatives::Analytic);
        let r = strain_identity_residual(&an, &chart, -0.5, 0.4, 0.0);
        assert!(r.sym < 1e-8 && r.rhs_sym < 1e-10, "{r:?}");
        // off the mid-surface t·sym p(y) = t·sym(A S) survives
        let r = strain_identity_residual(&an, &chart, -0.5, 0.4, 0.07);
        assert!(r.sym < 1e-12 && r.rhs_sym > 1e-6, "{r:?}");
    }

    #[test]
    fn laplacian_of_zonal_harmonic() {
        // cos of the polar angle is 1/δ in gnomonic coordinates
        let chart = Chart::spherical_cap(1.0, 1.0).unwrap();
        let f = ComponentField::new(
            |u: f64, v: f64, _| 1.0 / (1.0 + u.tan().powi(2) + v.tan().powi(2)).sqrt(),
            |_, _, _| 0.0,
            |_, _, _| 0.0,
        );
        for (u, v) in [(0.0, 0.0), (0.5, -0.3), (-0.9, 0.8)] {
            let r = laplacian_identity_residual(&f, &chart, u, v, 0.0);
            let w = f.jet(&chart, u, v, 0.0).w;
            assert!((r.laplacian + 2.0 * w).abs() < 1e-6, "{r:?}");
            assert!(r.residual < 1e-6);
        }
        let zero = ComponentField::new(|_, _, _| 0.0, |_, _, _| 0.0, |_, _, _| 0.0);
        assert_eq!(laplacian_identity_residual(&zero, &chart, 0.1, 0.1, 0.0).residual, 0.0);
    }

    #[test]
    fn sigma_identity_killing_field() {
        let region = SigmaRegion::Closed(Chart::closed_sphere(1.0).unwrap());
        let f = RotationField {
            omega: Vec3::new(0.3, -0.5, 0.8),
        };
        let s = sigma_identity_residual(&f, &region, 8, 2).unwrap();
        assert!(s.residual < 1e-6, "{s:?}");
        let zero = LinearComponentField {
            a: [0.0; 2],
            b: [0.0; 2],
            c: [0.0; 2],
        };
        let s = sigma_identity_residual(&zero, &SigmaRegion::whole_chart(Chart::cylinder(1.0, 2.0).unwrap()), 4, 2).unwrap();
        assert_eq!(s.residual, 0.0);
    }

    #[test]
    fn sigma_identity_on_cap_with_corners() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let chart = Chart::spherical_cap(1.0, 0.8).unwrap();
        let f = LinearComponentField::random(&mut rng);
        let s = sigma_identity_residual(&f, &SigmaRegion::whole_chart(chart), 8, 8).unwrap();
        assert!(s.residual < 1e-9, "{s:?}");
        let patch = Chart::sphere_patch(1.0, CubeFace::NegX).unwrap();
        let s = sigma_identity_residual(&RotationField { omega: Vec3::x() }, &SigmaRegion::whole_chart(patch), 8, 4).unwrap();
        assert!(s.residual < 1e-9, "{s:?}");
    }

    #[test]
    fn scalar_korn_examples() {
        let one = HermiteSpline::new(vec![0.0, 1.0], vec![1.0, 1.0], vec![0.0, 0.0]).unwrap();
        let t = scalar_korn_1d_terms(&one, 0.5).unwrap();
        assert!((t.lhs - 0.5).abs() < 1e-14 && (t.rhs - 2.0).abs() < 1e-14 && t.holds);
        let lin = HermiteSpline::new(vec![0.0, 1.0], vec![0.0, 1.0], vec![1.0, 1.0]).unwrap();
        let t = scalar_korn_1d_terms(&lin, 0.5).unwrap();
        // ∫_{1/2}^1 t² = 7/24; 4 ∫_0^{1/2} t² = 1/6; 4 ∫ (1-t)² = 4/3
        assert!((t.lhs - 7.0 / 24.0).abs() < 1e-14);
        assert!((t.rhs - (1.0 / 6.0 + 4.0 / 3.0)).abs() < 1e-14);
        assert!(scalar_korn_1d_check(&lin, 0.0).is_err());
        assert!(scalar_korn_1d_check(&lin, 1.5).is_err());
    }

    #[test]
    fn spline_interpolates() {
        let s = HermiteSpline::new(vec![0.0, 0.5, 1.0], vec![1.0, -1.0, 2.0], vec![0.5, 3.0, -1.0]).unwrap();
        assert!((s.eval(0.5).0 + 1.0).abs() < 1e-15);
        assert!((s.eval(0.5).1 - 3.0).abs() < 1e-12);
        assert!((s.eval(1.0).0 - 2.0).abs() < 1e-15);
        let h = 1e-6;
        let fd = (s.eval(0.3 + h).0 - s.eval(0.3 - h).0) / (2.0 * h);
        assert!((fd - s.eval(0.3).1).abs() < 1e-8);
    }
}
