use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::fields::{
    laplacian_identity_residual, strain_identity_residual, scalar_korn_1d_terms, sigma_convergence, Decomposition,
    Derivatives, HermiteSpline, LinearComponentField, QuadraticField, SigmaRegion, TrigField,
};
use crate::geometry::{Chart, CubeFace};

use super::config::ExperimentConfig;
use super::sweep::{run_sweep, ScalingReport};

pub const STRAIN_FD_TOL: f64 = 1e-6;
pub const STRAIN_ANALYTIC_TOL: f64 = 1e-10;
pub const LAPLACIAN_TOL: f64 = 1e-6;
/// `log2` of the residual reduction under ×2 quadrature refinement.
pub const SIGMA_MIN_RATE: f64 = 1.0;
pub const INTERPOLATION_MAX_VARIATION: f64 = 10.0;

const POINTS_PER_CHART: usize = 100;
const SIGMA_FIELDS: usize = 20;
const SPLINES: usize = 1000;
const LAMBDAS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SuiteStatus {
    Passed,
    Failed,
    Skipped,
}

impl SuiteStatus {
    fn from_failures(failures: usize) -> Self {
        if failures == 0 {
            SuiteStatus::Passed
        } else {
            SuiteStatus::Failed
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SuiteStatus::Passed => "passed",
            SuiteStatus::Failed => "failed",
            SuiteStatus::Skipped => "skipped",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub status: SuiteStatus,
    pub cases: usize,
    pub failures: usize,
    /// Worst residual (or, for rate-based suites, the smallest rate).
    pub worst: f64,
    pub tolerance: f64,
}

impl SuiteResult {
    fn skipped(name: &'static str, tolerance: f64) -> Self {
        SuiteResult {
            name,
            status: SuiteStatus::Skipped,
            cases: 0,
            failures: 0,
            worst: f64::NAN,
            tolerance,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub results: Vec<SuiteResult>,
}

impl SuiteReport {
    pub fn get(&self, name: &str) -> Option<&SuiteResult> {
        self.results.iter().find(|r| r.name == name)
    }

    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.status != SuiteStatus::Failed)
    }

    pub fn csv(&self) -> String {
        let mut s = String::from("suite,status,cases,failures,worst,tolerance\n");
        for r in &self.results {
            let _ = writeln!(
                s,
                "{},{},{},{},{:.16e},{:.16e}",
                r.name,
                r.status.label(),
                r.cases,
                r.failures,
                r.worst,
                r.tolerance
            );
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("suites.csv"), self.csv())?;
        Ok(())
    }
}

/// Cylinder, spherical cap and one cube-sphere patch.
pub fn suite_charts() -> Vec<Chart> {
    vec![
        Chart::cylinder(1.0, 2.0).expect("valid cylinder"),
        Chart::spherical_cap(1.0, 0.6).expect("valid cap"),
        Chart::sphere_patch(1.0, CubeFace::PosX).expect("valid patch"),
    ]
}

fn random_point(rng: &mut ChaCha8Rng, chart: &Chart) -> (f64, f64, f64) {
    let d = chart.domain();
    // stay clear of the edges so difference stencils remain on the chart
    let mu = 0.05 * (d.u.1 - d.u.0);
    let mv = 0.05 * (d.v.1 - d.v.0);
    (
        rng.random_range(d.u.0 + mu..d.u.1 - mu),
        rng.random_range(d.v.0 + mv..d.v.1 - mv),
        rng.random_range(-0.1..0.1),
    )
}

fn relative(residual: f64, scale: f64) -> f64 {
    residual / scale.abs().max(1.0)
}

/// Pointwise energy identities for random quadratic ambient fields.
pub fn strain_suite(seed: u64) -> (SuiteResult, SuiteResult) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut fd_worst, mut an_worst) = (0.0f64, 0.0f64);
    let (mut fd_fail, mut an_fail, mut cases) = (0, 0, 0);
    for chart in suite_charts() {
        for _ in 0..POINTS_PER_CHART {
            let field = QuadraticField::random(&mut rng);
            let (u, v, t) = random_point(&mut rng, &chart);
            for (mode, worst, fails, tol) in [
                (Derivatives::FiniteDifference, &mut fd_worst, &mut fd_fail, STRAIN_FD_TOL),
                (Derivatives::Analytic, &mut an_worst, &mut an_fail, STRAIN_ANALYTIC_TOL),
            ] {
                let r = strain_identity_residual(&Decomposition::new(&field, mode), &chart, u, v, t);
                let res = relative(r.full, r.lhs_full).max(relative(r.sym, r.lhs_sym));
                *worst = worst.max(res);
                if !(res <= tol) {
                    *fails += 1;
                }
            }
            cases += 1;
        }
    }
    (
        SuiteResult {
            name: "strain_fd",
            status: SuiteStatus::from_failures(fd_fail),
            cases,
            failures: fd_fail,
            worst: fd_worst,
            tolerance: STRAIN_FD_TOL,
        },
        SuiteResult {
            name: "strain_analytic",
            status: SuiteStatus::from_failures(an_fail),
            cases,
            failures: an_fail,
            worst: an_worst,
            tolerance: STRAIN_ANALYTIC_TOL,
        },
    )
}

/// `Δ_g w` identity for random trigonometric fields at the same kind of points.
pub fn laplacian_suite(seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst, mut fails, mut cases) = (0.0f64, 0, 0);
    for chart in suite_charts() {
        for _ in 0..POINTS_PER_CHART {
            let field = TrigField::random(&mut rng, 2);
            let (u, v, t) = random_point(&mut rng, &chart);
            let r = laplacian_identity_residual(&field, &chart, u, v, t);
            let res = relative(r.residual, r.laplacian);
            worst = worst.max(res);
            if !(res <= LAPLACIAN_TOL) {
                fails += 1;
            }
            cases += 1;
        }
    }
    SuiteResult {
        name: "laplacian",
        status: SuiteStatus::from_failures(fails),
        cases,
        failures: fails,
        worst,
        tolerance: LAPLACIAN_TOL,
    }
}

/// `σ(W)` identity: the quadrature residual must at least halve under ×2
/// cell refinement for Gauss orders 2 and 3.
pub fn sigma_suite(seed: u64) -> Result<SuiteResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst, mut fails, mut cases) = (f64::INFINITY, 0, 0);
    for chart in suite_charts() {
        let region = SigmaRegion::whole_chart(chart);
        for _ in 0..SIGMA_FIELDS {
            let field = LinearComponentField::random(&mut rng);
            for order in [2, 3] {
                let c = sigma_convergence(&field, &region, order, 4)?;
                if !c.at_floor {
                    worst = worst.min(c.rate);
                }
                if !c.passes(SIGMA_MIN_RATE) {
                    fails += 1;
                }
                cases += 1;
            }
        }
    }
    Ok(SuiteResult {
        name: "sigma",
        status: SuiteStatus::from_failures(fails),
        cases,
        failures: fails,
        worst,
        tolerance: SIGMA_MIN_RATE,
    })
}

/// The one-dimensional inequality on random splines and `λ = 0.1, …, 1`.
pub fn scalar_korn_suite(seed: u64) -> Result<SuiteResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst, mut fails, mut cases) = (f64::NEG_INFINITY, 0, 0);
    for _ in 0..SPLINES {
        let a = rng.random_range(0.0..2.0);
        let b = a + rng.random_range(0.1..3.0);
        let pieces = rng.random_range(1..=8);
        let f = HermiteSpline::random(&mut rng, a, b, pieces);
        for k in 1..=LAMBDAS {
            let t = scalar_korn_1d_terms(&f, k as f64 / LAMBDAS as f64)?;
            // lhs / rhs, ≤ 1 when the inequality holds
            if t.rhs > 0.0 {
                worst = worst.max(t.lhs / t.rhs);
            }
            if !t.holds {
                fails += 1;
            }
            cases += 1;
        }
    }
    Ok(SuiteResult {
        name: "scalar_korn",
        status: SuiteStatus::from_failures(fails),
        cases,
        failures: fails,
        worst,
        tolerance: 1.0,
    })
}

/// Bounded interpolation ratio across the sweep rows.
pub fn interpolation_suite(report: &ScalingReport) -> SuiteResult {
    let rows: Vec<_> = report.rows.iter().filter_map(|r| r.interpolation).collect();
    let variation = report.interpolation_variation().unwrap_or(f64::NAN);
    let failures = usize::from(!(variation <= INTERPOLATION_MAX_VARIATION));
    SuiteResult {
        name: "interpolation",
        status: SuiteStatus::from_failures(failures),
        cases: rows.len(),
        failures,
        worst: variation,
        tolerance: INTERPOLATION_MAX_VARIATION,
    }
}

/// Run the selected suites; the interpolation check reuses `sweep` when
/// given and runs its own sweep otherwise.
pub fn run_property_suites_with(config: &ExperimentConfig, sweep: Option<&ScalingReport>) -> Result<SuiteReport> {
    config.validate()?;
    let s = &config.suites;
    let mut results = Vec::new();
    if s.strain {
        let (fd, an) = strain_suite(config.seed);
        results.push(fd);
        results.push(an);
    } else {
        results.push(SuiteResult::skipped("strain_fd", STRAIN_FD_TOL));
        results.push(SuiteResult::skipped("strain_analytic", STRAIN_ANALYTIC_TOL));
    }
    results.push(if s.laplacian {
        laplacian_suite(config.seed.wrapping_add(1))
    } else {
        SuiteResult::skipped("laplacian", LAPLACIAN_TOL)
    });
    results.push(if s.sigma {
        sigma_suite(config.seed.wrapping_add(2))?
    } else {
        SuiteResult::skipped("sigma", SIGMA_MIN_RATE)
    });
    results.push(if s.scalar_korn {
        scalar_korn_suite(config.seed.wrapping_add(3))?
    } else {
        SuiteResult::skipped("scalar_korn", 1.0)
    });
    results.push(if s.interpolation {
        match sweep {
            Some(r) => interpolation_suite(r),
            None => {
                let mut c = config.clone();
                c.stability = false;
                interpolation_suite(&run_sweep(&c)?)
            }
        }
    } else {
        SuiteResult::skipped("interpolation", INTERPOLATION_MAX_VARIATION)
    });
    Ok(SuiteReport { results })
}

pub fn run_property_suites(config: &ExperimentConfig) -> Result<SuiteReport> {
    run_property_suites_with(config, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::SuiteSelection;

    #[test]
    fn identity_suites_pass() {
        let (fd, an) = strain_suite(0);
        assert_eq!(fd.status, SuiteStatus::Passed, "{fd:?}");
        assert_eq!(an.status, SuiteStatus::Passed, "{an:?}");
        let l = laplacian_suite(1);
        assert_eq!(l.status, SuiteStatus::Passed, "{l:?}");
        let s = sigma_suite(2).unwrap();
        assert_eq!(s.status, SuiteStatus::Passed, "{s:?}");
    }

    #[test]
    fn disabled_suites_are_skipped() {
        let c = ExperimentConfig {
            suites: SuiteSelection {
                scalar_korn: true,
                ..SuiteSelection::NONE
            },
            ..ExperimentConfig::default()
        };
        let r = run_property_suites(&c).unwrap();
        assert_eq!(r.get("scalar_korn").unwrap().status, SuiteStatus::Passed);
        assert_eq!(r.get("interpolation").unwrap().status, SuiteStatus::Skipped);
        assert!(r.csv().contains("laplacian,skipped"));
    }
}
