mod common;

use korn_shell::ansatz::{ansatz_energies, build_ansatz};
use korn_shell::discretization::{assemble_forms, build_mesh, Resolution};
use korn_shell::eigensolver::{korn_constant, PencilProblem};
use korn_shell::fields::AmbientField;
use korn_shell::geometry::{ShellDomain, SurfacePoint};

#[test]
fn clamped_cap_matches_dense() {
    let d = ShellDomain::spherical_cap(1.0, 0.6, 0.1).unwrap();
    let mesh = build_mesh(&d, Resolution::new(4, 4, 2)).unwrap();
    let f = assemble_forms(&mesh, 2, 3).unwrap();
    assert!(f.dim() <= 1000);
    let p = PencilProblem::new(&f).unwrap();
    let r = korn_constant(&p).unwrap();
    let exact = common::dense_korn(&f, &[]);
    assert!((r.lambda_min - exact).abs() <= 1e-8 * exact, "{} {exact}", r.lambda_min);
}

#[test]
fn closed_sphere_matches_dense() {
    let d = ShellDomain::closed_sphere(1.0, 0.15).unwrap();
    let mesh = build_mesh(&d, Resolution::new(4, 4, 2)).unwrap();
    let f = assemble_forms(&mesh, 1, 2).unwrap();
    let p = PencilProblem::new(&f).unwrap();
    let r = korn_constant(&p).unwrap();
    let exact = common::dense_korn(&f, p.deflation());
    assert!((r.lambda_min - exact).abs() <= 1e-8 * exact, "{} {exact}", r.lambda_min);
}

/// The discrete minimum cannot exceed the quotient of any admissible
/// vector, in particular the interpolated ansatz.
#[test]
fn interpolated_ansatz_bounds_the_minimum() {
    let h = 0.1;
    let d = ShellDomain::closed_sphere(1.0, h).unwrap();
    let mesh = build_mesh(&d, Resolution::new(4, 4, 2)).unwrap();
    let f = assemble_forms(&mesh, 2, 3).unwrap();
    let p = PencilProblem::new(&f).unwrap();
    let r = korn_constant(&p).unwrap();
    let p0 = SurfacePoint::new(d.charts()[0], 0.0, 0.0).unwrap();
    let field = build_ansatz(&d, &p0, 1.0).unwrap();
    let x = f.interpolate(|z, _| field.value(z));
    let q = p.rayleigh_quotient(&x);
    assert!(r.lambda_min <= q, "{} {q}", r.lambda_min);
    let e = ansatz_energies(&field, 8).unwrap();
    assert!(r.lambda_min <= e.quotient());
    // both quotients sit at the same order of magnitude, ~h
    assert!(q / e.quotient() > 0.5 && q / e.quotient() < 2.0, "{q} {}", e.quotient());
}
