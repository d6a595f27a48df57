use std::fmt::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::ansatz::{ansatz_energies, build_ansatz, lower_bound_check, AnsatzEnergies, AnsatzField, LowerBoundCheck};
use crate::discretization::{assemble_forms, build_mesh, AssembledForms};
use crate::eigensolver::{korn_constant, PencilProblem};
use crate::error::{KornError, Result};
use crate::fields::AmbientField;
use crate::geometry::{classify_shell, Classification, ShellDomain, SurfacePoint};

use super::config::{ExperimentConfig, ShellFamily};
use super::fit::{fit_exponent, local_slopes, ExponentFit};

/// Largest admissible exponent shift under resolution refinement.
pub const STABILITY_LIMIT: f64 = 0.05;
/// Difference between the coarse-half and fine-half exponents above which
/// the log-log data are flagged as visibly curved.
pub const CURVATURE_LIMIT: f64 = 0.1;

/// `‖∇y‖² / ((1/h)‖⟨y,n⟩‖‖sym∇y‖ + ‖y‖² + ‖sym∇y‖²)` over one sweep row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InterpolationSample {
    pub eigenvector: f64,
    pub random_max: f64,
    pub random_min: f64,
}

impl InterpolationSample {
    pub fn max(&self) -> f64 {
        self.eigenvector.max(self.random_max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RowStatus {
    Ok,
    Failed(String),
}

#[derive(Clone, Debug)]
pub struct ScalingRow {
    pub h: f64,
    pub k_eigen: f64,
    /// `E_sym / E_full` of the ansatz (elliptic shells).
    pub k_ansatz: Option<f64>,
    /// Discrete Korn quotient of the interpolated ansatz.
    pub k_ansatz_discrete: Option<f64>,
    pub energies: Option<AnsatzEnergies>,
    pub lower_bound: Option<LowerBoundCheck>,
    pub dofs: usize,
    pub cells: (usize, usize, usize),
    pub iterations: usize,
    pub residual: f64,
    pub runtime: Duration,
    pub interpolation: Option<InterpolationSample>,
    pub status: RowStatus,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilityCheck {
    pub scale: f64,
    pub beta: f64,
    pub shift: f64,
    pub stable: bool,
}

#[derive(Clone, Debug)]
pub struct ScalingReport {
    pub family: ShellFamily,
    pub classification: Classification,
    pub rows: Vec<ScalingRow>,
    pub fit: Option<ExponentFit>,
    /// Fit of `E_sym/E_full` against `h`.
    pub ansatz_fit: Option<ExponentFit>,
    pub stability: Option<StabilityCheck>,
    /// Exponents fitted on the coarse and fine halves of the sweep.
    pub half_exponents: Option<(f64, f64)>,
    pub refined_rows: Vec<ScalingRow>,
}

impl ScalingReport {
    pub fn all_converged(&self) -> bool {
        self.rows.iter().chain(&self.refined_rows).all(|r| r.status == RowStatus::Ok)
    }

    pub fn curved(&self) -> bool {
        self.half_exponents.is_some_and(|(a, b)| (a - b).abs() > CURVATURE_LIMIT)
    }

    /// `max/min` over `h` of the per-row interpolation ratio maximum.
    pub fn interpolation_variation(&self) -> Option<f64> {
        let v: Vec<f64> = self.rows.iter().filter_map(|r| r.interpolation.map(|s| s.max())).collect();
        if v.len() < 2 {
            return None;
        }
        let max = v.iter().cloned().fold(f64::MIN, f64::max);
        let min = v.iter().cloned().fold(f64::MAX, f64::min);
        Some(max / min)
    }
}

fn ok_points(rows: &[ScalingRow]) -> Vec<(f64, f64)> {
    rows.iter()
        .filter(|r| r.status == RowStatus::Ok)
        .map(|r| (r.h, r.k_eigen))
        .collect()
}

fn default_sigma0(family: &ShellFamily) -> f64 {
    match *family {
        ShellFamily::Sphere { radius } => radius,
        ShellFamily::Cap { radius, half_angle } => 0.4 * radius * half_angle,
        ShellFamily::Cylinder { .. } => f64::NAN,
    }
}

/// The ansatz centred at the middle of the first chart.
pub fn sweep_ansatz(config: &ExperimentConfig, domain: &ShellDomain) -> Result<AnsatzField> {
    let chart = domain.charts()[0];
    let d = chart.domain();
    let p0 = SurfacePoint::new(chart, 0.5 * (d.u.0 + d.u.1), 0.5 * (d.v.0 + d.v.1))?;
    let sigma0 = config.ansatz_sigma0.unwrap_or_else(|| default_sigma0(&config.family));
    build_ansatz(domain, &p0, sigma0)
}

/// Solve the Korn pencil at one `h`; with `extras`, also the ansatz and
/// interpolation paths.
fn run_row(config: &ExperimentConfig, h: f64, scale: f64, index: usize, extras: bool) -> Result<ScalingRow> {
    let start = Instant::now();
    let domain = config.family.domain(h, config.boundary)?;
    let mut policy = config.policy;
    policy.scale = scale;
    let res = policy.resolution(&config.family, h);
    let mesh = build_mesh(&domain, res)?;
    let forms = assemble_forms(&mesh, config.order, config.quadrature)?;
    let mut problem = PencilProblem::new(&forms)?;
    problem.tolerance = config.tolerance;
    problem.max_iterations = config.max_iterations;
    problem.block_size = config.block_size;
    problem.subspace = config.subspace;
    problem.seed = config.seed;
    let eig = korn_constant(&problem)?;

    let mut row = ScalingRow {
        h,
        k_eigen: eig.lambda_min,
        k_ansatz: None,
        k_ansatz_discrete: None,
        energies: None,
        lower_bound: None,
        dofs: forms.dim(),
        cells: (res.n_u, res.n_v, res.n_t),
        iterations: eig.iterations,
        residual: eig.residual,
        runtime: Duration::ZERO,
        interpolation: None,
        status: if eig.converged {
            RowStatus::Ok
        } else {
            RowStatus::Failed(format!("residual {:.3e} above tolerance", eig.residual))
        },
    };
    if extras {
        if classify_shell(&domain) == Classification::Elliptic {
            let field = sweep_ansatz(config, &domain)?;
            let e = ansatz_energies(&field, 8)?;
            row.k_ansatz = Some(e.quotient());
            row.energies = Some(e);
            row.lower_bound = Some(lower_bound_check(&field)?);
            let x = forms.interpolate(|z, _| field.value(z));
            row.k_ansatz_discrete = Some(problem.rayleigh_quotient(&x));
        }
        if config.suites.interpolation {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(index as u64);
            row.interpolation = Some(interpolation_sample(&problem, &eig.vector, h, config.random_fields, &mut rng)?);
        }
    }
    row.runtime = start.elapsed();
    Ok(row)
}

fn failed_row(h: f64, err: &KornError) -> ScalingRow {
    ScalingRow {
        h,
        k_eigen: f64::NAN,
        k_ansatz: None,
        k_ansatz_discrete: None,
        energies: None,
        lower_bound: None,
        dofs: 0,
        cells: (0, 0, 0),
        iterations: 0,
        residual: f64::NAN,
        runtime: Duration::ZERO,
        interpolation: None,
        status: RowStatus::Failed(err.to_string()),
    }
}

/// Interpolation ratio of the eigenvector and of `count` random admissible
/// fields (Gaussian nodal values, projected, one damped Jacobi pass).
pub fn interpolation_sample(
    problem: &PencilProblem<'_>,
    eigenvector: &[f64],
    h: f64,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Result<InterpolationSample> {
    let forms = problem.forms();
    let n_form = forms.normal_form()?;
    let ratio = |y: &[f64]| -> f64 {
        let a = forms.a.quad(y);
        let num = problem.denominator(y);
        let den = (n_form.quad(y).max(0.0) * a.max(0.0)).sqrt() / h + forms.m.quad(y) + a;
        num / den
    };
    let diag = forms.a.diagonal();
    let rigid = problem.deflation();
    let m_rigid: Vec<Vec<f64>> = rigid.iter().map(|r| forms.m.apply(r)).collect();
    let project = |x: &mut Vec<f64>| {
        for (r, mr) in rigid.iter().zip(&m_rigid) {
            let s: f64 = mr.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
            x.iter_mut().zip(r).for_each(|(xi, ri)| *xi -= s * ri);
        }
    };
    let (mut rmax, mut rmin) = (f64::MIN, f64::MAX);
    for _ in 0..count {
        let mut x: Vec<f64> = (0..forms.dim()).map(|_| StandardNormal.sample(rng)).collect();
        project(&mut x);
        smooth(forms, &diag, &mut x);
        project(&mut x);
        let r = ratio(&x);
        rmax = rmax.max(r);
        rmin = rmin.min(r);
    }
    if count == 0 {
        rmax = f64::NAN;
        rmin = f64::NAN;
    }
    Ok(InterpolationSample {
        eigenvector: ratio(eigenvector),
        random_max: rmax,
        random_min: rmin,
    })
}

fn smooth(forms: &AssembledForms, diag: &[f64], x: &mut [f64]) {
    let ax = forms.a.apply(x);
    for ((xi, a), d) in x.iter_mut().zip(ax).zip(diag) {
        if *d > 0.0 {
            *xi -= 2.0 / 3.0 * a / d;
        }
    }
}

fn sweep_rows(config: &ExperimentConfig, scale: f64, extras: bool) -> Vec<ScalingRow> {
    config
        .h_values
        .iter()
        .enumerate()
        .map(|(i, &h)| run_row(config, h, scale, i, extras).unwrap_or_else(|e| failed_row(h, &e)))
        .collect()
}

/// Run the `h` sweep, fit the exponent and, if configured, repeat it at a
/// finer resolution to measure the exponent shift.
pub fn run_sweep(config: &ExperimentConfig) -> Result<ScalingReport> {
    config.validate()?;
    let classification = classify_shell(&config.family.domain(config.h_values[0], config.boundary)?);
    let rows = sweep_rows(config, config.policy.scale, true);
    let points = ok_points(&rows);
    let fit = fit_exponent(&points).ok();
    let ansatz_points: Vec<(f64, f64)> = rows.iter().filter_map(|r| r.k_ansatz.map(|k| (r.h, k))).collect();
    let ansatz_fit = fit_exponent(&ansatz_points).ok();
    let half_exponents = if points.len() >= 6 {
        let mid = points.len() / 2;
        match (fit_exponent(&points[..mid]), fit_exponent(&points[mid..])) {
            (Ok(a), Ok(b)) => Some((a.beta, b.beta)),
            _ => None,
        }
    } else {
        None
    };
    let mut refined_rows = Vec::new();
    let mut stability = None;
    if config.stability {
        let scale = config.policy.scale * config.stability_factor;
        refined_rows = sweep_rows(config, scale, false);
        if let (Some(f), Ok(g)) = (fit, fit_exponent(&ok_points(&refined_rows))) {
            let shift = (g.beta - f.beta).abs();
            stability = Some(StabilityCheck {
                scale,
                beta: g.beta,
                shift,
                stable: shift <= STABILITY_LIMIT,
            });
        }
    }
    Ok(ScalingReport {
        family: config.family,
        classification,
        rows,
        fit,
        ansatz_fit,
        stability,
        half_exponents,
        refined_rows,
    })
}

fn opt(x: Option<f64>) -> String {
    format!("{:.16e}", x.unwrap_or(f64::NAN))
}

/// Deterministic CSV: identical inputs give identical bytes (no timings).
pub fn scaling_csv(report: &ScalingReport) -> String {
    let mut s = String::from(
        "h,k_eigen,k_ansatz,k_ansatz_discrete,e_sym,e_full,lower_bound_lhs,lower_bound_rhs,lower_bound_holds,\
         dofs,cells_u,cells_v,cells_t,iterations,residual,interp_eigen,interp_random_max,status\n",
    );
    for r in &report.rows {
        let lb = r.lower_bound;
        let ip = r.interpolation;
        let status = match &r.status {
            RowStatus::Ok => "ok".to_string(),
            RowStatus::Failed(m) => format!("failed: {}", m.replace([',', '\n'], ";")),
        };
        let _ = writeln!(
            s,
            "{:.16e},{:.16e},{},{},{},{},{},{},{},{},{},{},{},{},{:.16e},{},{},{}",
            r.h,
            r.k_eigen,
            opt(r.k_ansatz),
            opt(r.k_ansatz_discrete),
            opt(r.energies.map(|e| e.sym)),
            opt(r.energies.map(|e| e.full)),
            opt(lb.map(|l| l.lhs)),
            opt(lb.map(|l| l.rhs)),
            lb.map_or("na".to_string(), |l| if l.inconclusive { "inconclusive".into() } else { l.holds.to_string() }),
            r.dofs,
            r.cells.0,
            r.cells.1,
            r.cells.2,
            r.iterations,
            r.residual,
            opt(ip.map(|i| i.eigenvector)),
            opt(ip.map(|i| i.random_max)),
            status
        );
    }
    s
}

/// Gnuplot columns `log10 h, log10 K`.
pub fn scaling_dat(report: &ScalingReport) -> String {
    let mut s = String::from("# log10(h) log10(K)\n");
    for r in report.rows.iter().filter(|r| r.status == RowStatus::Ok) {
        let _ = writeln!(s, "{:.16e} {:.16e}", r.h.log10(), r.k_eigen.log10());
    }
    s
}

fn row_table(s: &mut String, rows: &[ScalingRow]) {
    let _ = writeln!(s, "{:>10} {:>14} {:>14} {:>8} {:>6} {:>10}", "h", "K", "E_sym/E_full", "dofs", "iter", "seconds");
    for r in rows {
        let _ = writeln!(
            s,
            "{:>10.5} {:>14.6e} {:>14.6e} {:>8} {:>6} {:>10.2}{}",
            r.h,
            r.k_eigen,
            r.k_ansatz.unwrap_or(f64::NAN),
            r.dofs,
            r.iterations,
            r.runtime.as_secs_f64(),
            match &r.status {
                RowStatus::Ok => String::new(),
                RowStatus::Failed(m) => format!("  FAILED: {m}"),
            }
        );
    }
}

pub fn report_text(report: &ScalingReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "shell family: {:?} ({:?})", report.family, report.classification);
    row_table(&mut s, &report.rows);
    match report.fit {
        Some(f) => {
            let _ = writeln!(s, "fitted exponent beta = {:.4}, intercept = {:.4}, R^2 = {:.5}", f.beta, f.intercept, f.r_squared);
        }
        None => s.push_str("fitted exponent: unavailable (fewer than 3 converged rows)\n"),
    }
    if let Some(f) = report.ansatz_fit {
        let _ = writeln!(s, "ansatz quotient exponent = {:.4}, R^2 = {:.5}", f.beta, f.r_squared);
    }
    let slopes = local_slopes(&ok_points(&report.rows));
    let _ = writeln!(s, "local slopes: {}", slopes.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" "));
    if let Some((a, b)) = report.half_exponents {
        let _ = writeln!(
            s,
            "coarse-half exponent {a:.4}, fine-half exponent {b:.4}: {}",
            if report.curved() { "pre-asymptotic curvature visible" } else { "no visible curvature" }
        );
    }
    if let Some(st) = report.stability {
        let _ = writeln!(
            s,
            "refinement stability (scale {:.3}): beta = {:.4}, shift = {:.4} ({})",
            st.scale,
            st.beta,
            st.shift,
            if st.stable { "stable" } else { "UNSTABLE" }
        );
    }
    if !report.refined_rows.is_empty() {
        s.push_str("refined rows:\n");
        row_table(&mut s, &report.refined_rows);
    }
    if let Some(v) = report.interpolation_variation() {
        let _ = writeln!(s, "interpolation ratio variation across h: {v:.3}");
    }
    s
}

/// Write `scaling.csv`, `scaling.dat` and `report.txt` into `dir`.
pub fn write_sweep_outputs(report: &ScalingReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("scaling.csv"), scaling_csv(report))?;
    std::fs::write(dir.join("scaling.dat"), scaling_dat(report))?;
    std::fs::write(dir.join("report.txt"), report_text(report))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::SuiteSelection;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            family: ShellFamily::Cylinder { radius: 1.0, length: 2.0 },
            boundary: crate::geometry::BoundaryCondition::Clamped,
            h_values: vec![0.2, 0.15, 0.1],
            stability: false,
            suites: SuiteSelection::ALL,
            random_fields: 3,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn sweep_is_deterministic() {
        let c = small_config();
        let a = run_sweep(&c).unwrap();
        let b = run_sweep(&c).unwrap();
        assert!(a.all_converged());
        assert_eq!(scaling_csv(&a), scaling_csv(&b));
        assert!(a.fit.unwrap().beta > 0.0);
        let csv = scaling_csv(&a);
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.lines().nth(1).unwrap().ends_with(",ok"));
    }

    #[test]
    fn failed_rows_are_marked() {
        let mut c = small_config();
        c.max_iterations = 1;
        c.tolerance = 1e-300;
        let r = run_sweep(&c).unwrap();
        assert!(!r.all_converged());
        assert!(scaling_csv(&r).contains("failed"));
    }
}
