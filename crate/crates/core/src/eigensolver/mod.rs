//! Smallest eigenvalue of the Korn pencil and of the mid-surface rigidity
//! pencil.

mod factor;
mod lanczos;
mod midsurface;

use crate::discretization::{rigid_motion_basis, AssembledForms};
use crate::error::{KornError, Result};

use factor::{pivot_rows, Factor};
use lanczos::{largest_modes, PencilOps, Projector, Settings};

pub use midsurface::{midsurface_quotient, midsurface_rigidity, MidsurfaceForms};

/// Ritz values closer than this (relative) count as one multiple eigenvalue.
const MULTIPLICITY_TOL: f64 = 1e-6;

/// The pencil `(A, B)` over free DOFs, with `B′` (rigid rotations factored
/// out) and rigid-motion deflation when the shell is closed.
pub struct PencilProblem<'a> {
    forms: &'a AssembledForms,
    deflation: Vec<Vec<f64>>,
    pub tolerance: f64,
    /// Restart cap of the Lanczos iteration.
    pub max_iterations: usize,
    /// Shift `σ`: the factored operator is `A − σB`. Only `0` is
    /// supported for closed shells.
    pub shift: f64,
    pub block_size: usize,
    pub subspace: usize,
    pub seed: u64,
}

impl<'a> PencilProblem<'a> {
    pub fn new(forms: &'a AssembledForms) -> Result<Self> {
        let deflation = rigid_motion_basis(forms)?;
        let problem = PencilProblem {
            forms,
            deflation,
            tolerance: 1e-9,
            max_iterations: 500,
            shift: 0.0,
            block_size: 4,
            subspace: 40,
            seed: 0,
        };
        problem.check_deflation()?;
        Ok(problem)
    }

    pub fn forms(&self) -> &AssembledForms {
        self.forms
    }

    /// M-orthonormal rigid-motion vectors removed from the problem.
    pub fn deflation(&self) -> &[Vec<f64>] {
        &self.deflation
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    pub fn with_shift(mut self, shift: f64) -> Self {
        self.shift = shift;
        self
    }

    /// Each deflation vector must be (numerically) strain free.
    fn check_deflation(&self) -> Result<()> {
        let scale = self.forms.length_scale.powi(-2);
        for v in &self.deflation {
            let a = self.forms.a.quad(v);
            let m = self.forms.m.quad(v);
            if a > 1e-8 * m * scale {
                return Err(KornError::config(format!(
                    "deflation vector is not strain free: vᵀAv = {a:.3e}, vᵀMv = {m:.3e}"
                )));
            }
        }
        Ok(())
    }

    /// `vᵀAv / vᵀB′v` (or `vᵀBv` on clamped shells).
    pub fn rayleigh_quotient(&self, v: &[f64]) -> f64 {
        self.forms.a.quad(v) / self.denominator(v)
    }

    pub fn denominator(&self, v: &[f64]) -> f64 {
        if self.forms.is_closed() {
            self.forms.corrected_b_quad(v)
        } else {
            self.forms.b.quad(v)
        }
    }
}

#[derive(Clone, Debug)]
pub struct EigenResult {
    pub lambda_min: f64,
    /// Eigenvector, normalized to `vᵀMv = 1`.
    pub vector: Vec<f64>,
    /// `‖A v − λ B v‖ / ‖A v‖` on the deflated space.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Ascending Ritz values of the leading block.
    pub ritz_values: Vec<f64>,
    /// Number of Ritz values within `1e-6` of `lambda_min`.
    pub multiplicity: usize,
}

struct KornOps<'a> {
    forms: &'a AssembledForms,
    shift: f64,
}

impl PencilOps for KornOps<'_> {
    fn dim(&self) -> usize {
        self.forms.dim()
    }

    fn apply_a(&self, x: &[f64], y: &mut [f64]) {
        self.forms.a.mul_vec(x, y);
        if self.shift != 0.0 {
            let bx = self.forms.b.apply(x);
            for (yi, b) in y.iter_mut().zip(bx) {
                *yi -= self.shift * b;
            }
        }
    }

    fn apply_b(&self, x: &[f64], y: &mut [f64]) {
        if self.forms.is_closed() {
            self.forms.apply_corrected_b(x, y);
        } else {
            self.forms.b.mul_vec(x, y);
        }
    }
}

pub(crate) fn solve_pencil(
    ops: &dyn PencilOps,
    a: &crate::discretization::SymCsr,
    m: &crate::discretization::SymCsr,
    deflation: &[Vec<f64>],
    settings: &Settings,
    shift: f64,
) -> Result<EigenResult> {
    let pins = pivot_rows(deflation);
    let factor = Factor::new(a, &pins)?;
    let projector = (!deflation.is_empty()).then(|| Projector {
        basis: deflation.to_vec(),
        m_basis: deflation.iter().map(|r| m.apply(r)).collect(),
    });
    let out = largest_modes(ops, &factor, projector.as_ref(), settings)?;
    // λ of the shifted pencil
    let ritz: Vec<f64> = out.ritz.iter().map(|l| l + shift).collect();
    let mut v = out.vector;
    let norm = m.quad(&v).sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    let mut ax = vec![0.0; v.len()];
    let mut bx = vec![0.0; v.len()];
    ops.apply_a(&v, &mut ax);
    ops.apply_b(&v, &mut bx);
    let num: f64 = lanczos::dot(&v, &ax) + shift * lanczos::dot(&v, &bx);
    let den: f64 = lanczos::dot(&v, &bx);
    let lambda = num / den;
    let multiplicity = ritz
        .iter()
        .filter(|&&r| (r - ritz[0]).abs() <= MULTIPLICITY_TOL * ritz[0].abs().max(f64::MIN_POSITIVE))
        .count();
    Ok(EigenResult {
        lambda_min: lambda.max(0.0),
        vector: v,
        residual: out.residual,
        iterations: out.restarts,
        converged: out.residual <= settings.tolerance,
        ritz_values: ritz,
        multiplicity,
    })
}

/// Smallest eigenvalue of `A v = λ B v` (with `B′` and rigid-motion
/// deflation on closed shells): the discrete Korn quotient minimum.
pub fn korn_constant(problem: &PencilProblem<'_>) -> Result<EigenResult> {
    let forms = problem.forms;
    if problem.shift != 0.0 && forms.is_closed() {
        return Err(KornError::Unsupported("nonzero shift on a closed shell".into()));
    }
    if !(problem.tolerance > 0.0) || problem.max_iterations == 0 {
        return Err(KornError::config("tolerance and iteration cap must be positive"));
    }
    let shifted;
    let a = if problem.shift != 0.0 {
        let mut s = forms.a.clone();
        for (x, b) in s.values_mut().iter_mut().zip(forms.b.values()) {
            *x -= problem.shift * b;
        }
        shifted = s;
        &shifted
    } else {
        &forms.a
    };
    let ops = KornOps {
        forms,
        shift: problem.shift,
    };
    let settings = Settings {
        tolerance: problem.tolerance,
        max_restarts: problem.max_iterations,
        block: problem.block_size,
        ncv: problem.subspace,
        keep: problem.subspace / 2,
        seed: problem.seed,
    };
    solve_pencil(&ops, a, &forms.m, &problem.deflation, &settings, problem.shift)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{assemble_forms, build_mesh, Resolution};
    use crate::geometry::ShellDomain;

    fn dense_min(a: &nalgebra::DMatrix<f64>, b: &nalgebra::DMatrix<f64>) -> f64 {
        let l = b.clone().cholesky().unwrap();
        let li = l.l().try_inverse().unwrap();
        let c = &li * a * li.transpose();
        let c = 0.5 * (&c + c.transpose());
        c.symmetric_eigenvalues().min()
    }

    #[test]
    fn clamped_cylinder_matches_dense() {
        let d = ShellDomain::cylinder(1.0, 2.0, 0.2).unwrap();
        let mesh = build_mesh(&d, Resolution::new(4, 4, 2)).unwrap();
        let f = assemble_forms(&mesh, 2, 3).unwrap();
        let p = PencilProblem::new(&f).unwrap();
        let r = korn_constant(&p).unwrap();
        let exact = dense_min(&f.a.to_dense(), &f.b.to_dense());
        assert!(r.converged);
        assert!((r.lambda_min - exact).abs() <= 1e-8 * exact, "{} {}", r.lambda_min, exact);
        assert!((p.rayleigh_quotient(&r.vector) - r.lambda_min).abs() < 1e-10);
    }

    #[test]
    fn shifted_solve_agrees() {
        let d = ShellDomain::cylinder(1.0, 2.0, 0.2).unwrap();
        let mesh = build_mesh(&d, Resolution::new(4, 4, 2)).unwrap();
        let f = assemble_forms(&mesh, 2, 3).unwrap();
        let r0 = korn_constant(&PencilProblem::new(&f).unwrap()).unwrap();
        let r1 = korn_constant(&PencilProblem::new(&f).unwrap().with_shift(-0.5)).unwrap();
        assert!((r0.lambda_min - r1.lambda_min).abs() < 1e-8 * r0.lambda_min);
    }
}

#[cfg(test)]
mod closed_tests {
    use super::*;
    use crate::discretization::{assemble_forms, build_mesh, Resolution};
    use crate::fields::{Decomposition, Derivatives, RadialUnitField, RigidMotion};
    use crate::geometry::{Chart, ShellDomain, Vec3};
    use nalgebra::DMatrix;

    #[test]
    fn closed_sphere_matches_dense_complement() {
        let d = ShellDomain::closed_sphere(1.0, 0.1).unwrap();
        let mesh = build_mesh(&d, Resolution::new(4, 4, 2)).unwrap();
        let f = assemble_forms(&mesh, 1, 2).unwrap();
        let p = PencilProblem::new(&f).unwrap();
        let r = korn_constant(&p).unwrap();
        // dense: orthonormal complement of M R
        let n = f.dim();
        let m = f.m.to_dense();
        let rig = DMatrix::from_fn(n, 6, |i, k| p.deflation()[k][i]);
        let mr = &m * &rig;
        let full = (&mr * mr.transpose()).symmetric_eigen();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&i, &j| full.eigenvalues[i].total_cmp(&full.eigenvalues[j]));
        let q = DMatrix::from_fn(n, n - 6, |i, k| full.eigenvectors[(i, idx[k])]);
        let mut bp = f.b.to_dense();
        for c in &f.skew {
            let cv = nalgebra::DVector::from_column_slice(c);
            bp -= (2.0 / f.volume) * &cv * cv.transpose();
        }
        let ar = q.transpose() * f.a.to_dense() * &q;
        let br = q.transpose() * bp * &q;
        let l = br.cholesky().unwrap();
        let li = l.l().try_inverse().unwrap();
        let c = &li * ar * li.transpose();
        let exact = (0.5 * (&c + c.transpose())).symmetric_eigenvalues().min();
        assert!((r.lambda_min - exact).abs() <= 1e-8 * exact, "{} {}", r.lambda_min, exact);
        assert!(p.denominator(&r.vector) >= 1e-6);
    }

    #[test]
    fn midsurface_cap_and_normal_quotient() {
        let cap = Chart::spherical_cap(1.0, 0.6).unwrap();
        let r = midsurface_rigidity(std::slice::from_ref(&cap), true, (4, 4)).unwrap();
        assert!(r.lambda_min > 0.0 && r.converged);
        let sphere = Chart::closed_sphere(1.0).unwrap();
        let y = Decomposition::new(&RadialUnitField, Derivatives::Analytic);
        let q = midsurface_quotient(&sphere, &y, 4, 4).unwrap();
        assert!((q - 2.0).abs() < 1e-10, "{q}");
        let rig = RigidMotion {
            translation: Vec3::new(0.1, 0.2, 0.3),
            rotation: Vec3::new(1.0, -0.5, 0.2),
        };
        let y = Decomposition::new(&rig, Derivatives::Analytic);
        assert!(midsurface_quotient(&sphere, &y, 4, 4).unwrap() < 1e-12);
        let forms = MidsurfaceForms::assemble(&sphere, false, (4, 4)).unwrap();
        for v in &forms.rigid {
            assert!(forms.a.quad(v) < 1e-12);
        }
        let s = midsurface_rigidity(&sphere, false, (4, 4)).unwrap();
        assert!(s.lambda_min > 0.0 && s.lambda_min <= 2.0 + 1e-6);
    }
}
