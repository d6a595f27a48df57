//! Experiment driver: configuration, thickness sweeps, exponent fits and
//! the property suites.

mod config;
mod fit;
mod suites;
mod sweep;

use std::fmt::Write as _;
use std::path::Path;

pub use config::{geometric, ExperimentConfig, ResolutionPolicy, ShellFamily, SuiteSelection};
pub use fit::{fit_exponent, local_slopes, ExponentFit};
pub use suites::{
    interpolation_suite, laplacian_suite, strain_suite, run_property_suites, run_property_suites_with,
    scalar_korn_suite, sigma_suite, suite_charts, SuiteReport, SuiteResult, SuiteStatus, INTERPOLATION_MAX_VARIATION,
    LAPLACIAN_TOL, STRAIN_ANALYTIC_TOL, STRAIN_FD_TOL, SIGMA_MIN_RATE,
};
pub use sweep::{
    interpolation_sample, report_text, run_sweep, scaling_csv, scaling_dat, sweep_ansatz, write_sweep_outputs,
    InterpolationSample, RowStatus, ScalingReport, ScalingRow, StabilityCheck, CURVATURE_LIMIT, STABILITY_LIMIT,
};

use crate::ansatz::{ansatz_energies, lower_bound_check, AnsatzEnergies, LowerBoundCheck};
use crate::error::{KornError, Result};
use crate::geometry::{classify_shell, Classification};

/// Ansatz energies at every `h` of the sweep, without any eigen-solve.
#[derive(Clone, Debug)]
pub struct AnsatzReport {
    pub rows: Vec<(f64, AnsatzEnergies, LowerBoundCheck)>,
    pub fit: Option<ExponentFit>,
}

impl AnsatzReport {
    pub fn csv(&self) -> String {
        let mut s = String::from("h,e_full,e_sym,quotient,quotient_over_h,a,b,c,d,l2,lower_bound_lhs,lower_bound_rhs,lower_bound\n");
        for (h, e, lb) in &self.rows {
            let _ = writeln!(
                s,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                h,
                e.full,
                e.sym,
                e.quotient(),
                e.quotient() / h,
                e.a,
                e.b,
                e.c,
                e.d,
                e.l2,
                lb.lhs,
                lb.rhs,
                if lb.inconclusive { "inconclusive".to_string() } else { lb.holds.to_string() }
            );
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("ansatz.csv"), self.csv())?;
        Ok(())
    }
}

pub fn run_ansatz(config: &ExperimentConfig) -> Result<AnsatzReport> {
    config.validate()?;
    let mut rows = Vec::new();
    for &h in &config.h_values {
        let domain = config.family.domain(h, config.boundary)?;
        if classify_shell(&domain) != Classification::Elliptic {
            return Err(KornError::domain("the ansatz path needs an elliptic shell"));
        }
        let field = sweep_ansatz(config, &domain)?;
        rows.push((h, ansatz_energies(&field, 8)?, lower_bound_check(&field)?));
    }
    let points: Vec<(f64, f64)> = rows.iter().map(|(h, e, _)| (*h, e.quotient())).collect();
    Ok(AnsatzReport {
        fit: fit_exponent(&points).ok(),
        rows,
    })
}
