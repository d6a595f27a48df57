//! Flat `key = value` experiment configuration.

use std::path::{Path, PathBuf};

use crate::error::{KornError, Result};
use crate::geometry::{BoundaryCondition, Chart, ShellDomain};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ShellFamily {
    /// Six-patch closed sphere.
    Sphere { radius: f64 },
    Cylinder { radius: f64, length: f64 },
    Cap { radius: f64, half_angle: f64 },
}

impl ShellFamily {
    pub fn charts(&self) -> Result<Vec<Chart>> {
        match *self {
            ShellFamily::Sphere { radius } => Chart::closed_sphere(radius),
            ShellFamily::Cylinder { radius, length } => Ok(vec![Chart::cylinder(radius, length)?]),
            ShellFamily::Cap { radius, half_angle } => Ok(vec![Chart::spherical_cap(radius, half_angle)?]),
        }
    }

    pub fn domain(&self, half_thickness: f64, boundary: BoundaryCondition) -> Result<ShellDomain> {
        ShellDomain::new(self.charts()?, half_thickness, boundary)
    }

    pub fn name(&self) -> &'static str {
        match self {
            ShellFamily::Sphere { .. } => "sphere",
            ShellFamily::Cylinder { .. } => "cylinder",
            ShellFamily::Cap { .. } => "cap",
        }
    }

    /// Arc length of one chart along `u` and `v`.
    pub fn chart_extent(&self) -> (f64, f64) {
        match *self {
            ShellFamily::Sphere { radius } => (radius * std::f64::consts::FRAC_PI_2, radius * std::f64::consts::FRAC_PI_2),
            ShellFamily::Cylinder { radius, length } => (2.0 * std::f64::consts::PI * radius, length),
            ShellFamily::Cap { radius, half_angle } => (2.0 * radius * half_angle, 2.0 * radius * half_angle),
        }
    }
}

/// Mesh size tied to the bending wavelength: a cell spans about
/// `spacing·√h` of arc length, times `1/scale`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResolutionPolicy {
    pub spacing: f64,
    pub min_cells: usize,
    pub thickness_cells: usize,
    pub scale: f64,
}

impl Default for ResolutionPolicy {
    fn default() -> Self {
        ResolutionPolicy {
            spacing: 1.2,
            min_cells: 4,
            thickness_cells: 2,
            scale: 1.0,
        }
    }
}

impl ResolutionPolicy {
    pub fn cells(&self, arc_length: f64, h: f64) -> usize {
        let n = (self.scale * arc_length / (self.spacing * h.sqrt())).ceil();
        (n as usize).max(self.min_cells)
    }

    pub fn resolution(&self, family: &ShellFamily, h: f64) -> crate::discretization::Resolution {
        let (lu, lv) = family.chart_extent();
        crate::discretization::Resolution::new(self.cells(lu, h), self.cells(lv, h), self.thickness_cells)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SuiteSelection {
    pub strain: bool,
    pub laplacian: bool,
    pub sigma: bool,
    pub scalar_korn: bool,
    pub interpolation: bool,
}

impl SuiteSelection {
    pub const ALL: SuiteSelection = SuiteSelection {
        strain: true,
        laplacian: true,
        sigma: true,
        scalar_korn: true,
        interpolation: true,
    };
    pub const NONE: SuiteSelection = SuiteSelection {
        strain: false,
        laplacian: false,
        sigma: false,
        scalar_korn: false,
        interpolation: false,
    };

    fn parse(list: &str) -> Result<Self> {
        let mut s = SuiteSelection::NONE;
        for item in list.split(',').map(str::trim).filter(|x| !x.is_empty()) {
            match item {
                "all" => s = SuiteSelection::ALL,
                "none" => s = SuiteSelection::NONE,
                "strain" => s.strain = true,
                "laplacian" => s.laplacian = true,
                "sigma" => s.sigma = true,
                "scalar_korn" => s.scalar_korn = true,
                "interpolation" => s.interpolation = true,
                other => return Err(KornError::config(format!("unknown suite `{other}`"))),
            }
        }
        Ok(s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub family: ShellFamily,
    pub boundary: BoundaryCondition,
    /// Strictly decreasing half-thicknesses.
    pub h_values: Vec<f64>,
    pub policy: ResolutionPolicy,
    pub order: usize,
    pub quadrature: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub block_size: usize,
    pub subspace: usize,
    pub output: PathBuf,
    pub seed: u64,
    pub suites: SuiteSelection,
    /// Random admissible fields per `h` in the interpolation check.
    pub random_fields: usize,
    /// Plateau radius of the elliptic ansatz; `None` picks a default.
    pub ansatz_sigma0: Option<f64>,
    /// Repeat the sweep with the policy scale multiplied by `stability_factor`.
    pub stability: bool,
    pub stability_factor: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            family: ShellFamily::Sphere { radius: 1.0 },
            boundary: BoundaryCondition::Closed,
            h_values: geometric(0.1, 0.0167, 8),
            policy: ResolutionPolicy::default(),
            order: 2,
            quadrature: 3,
            tolerance: 1e-9,
            max_iterations: 500,
            block_size: 4,
            subspace: 40,
            output: PathBuf::from("out"),
            seed: 0,
            suites: SuiteSelection::ALL,
            random_fields: 50,
            ansatz_sigma0: None,
            stability: true,
            stability_factor: 1.5,
        }
    }
}

/// `count` values from `max` down to `min`, equally spaced in `log h`.
pub fn geometric(max: f64, min: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![max];
    }
    let r = (min / max).powf(1.0 / (count - 1) as f64);
    (0..count).map(|i| max * r.powi(i as i32)).collect()
}

fn number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| KornError::config(format!("`{key}`: cannot parse `{value}`")))
}

fn flag(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(KornError::config(format!("`{key}`: expected a boolean, got `{value}`"))),
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut c = ExperimentConfig::default();
        let mut shell = "sphere".to_string();
        let mut boundary: Option<String> = None;
        let (mut radius, mut length, mut half_angle) = (1.0, 2.0, 0.6);
        let mut h_list: Option<Vec<f64>> = None;
        let (mut h_max, mut h_min, mut h_count) = (0.1, 0.0167, 8usize);
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| KornError::config(format!("line {}: expected `key = value`", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "shell" => shell = value.to_string(),
                "radius" => radius = number(key, value)?,
                "length" => length = number(key, value)?,
                "half_angle" => half_angle = number(key, value)?,
                "boundary" => boundary = Some(value.to_string()),
                "h" => {
                    h_list = Some(
                        value
                            .split(',')
                            .map(|x| number::<f64>(key, x.trim()))
                            .collect::<Result<_>>()?,
                    )
                }
                "h_max" => h_max = number(key, value)?,
                "h_min" => h_min = number(key, value)?,
                "h_count" => h_count = number(key, value)?,
                "resolution_spacing" => c.policy.spacing = number(key, value)?,
                "min_cells" => c.policy.min_cells = number(key, value)?,
                "thickness_cells" => c.policy.thickness_cells = number(key, value)?,
                "resolution_scale" => c.policy.scale = number(key, value)?,
                "order" => c.order = number(key, value)?,
                "quadrature" => c.quadrature = number(key, value)?,
                "tolerance" => c.tolerance = number(key, value)?,
                "max_iterations" => c.max_iterations = number(key, value)?,
                "block_size" => c.block_size = number(key, value)?,
                "subspace" => c.subspace = number(key, value)?,
                "output" => c.output = PathBuf::from(value),
                "seed" => c.seed = number(key, value)?,
                "suites" => c.suites = SuiteSelection::parse(value)?,
                "random_fields" => c.random_fields = number(key, value)?,
                "ansatz_sigma0" => c.ansatz_sigma0 = Some(number(key, value)?),
                "stability" => c.stability = flag(key, value)?,
                "stability_factor" => c.stability_factor = number(key, value)?,
                other => return Err(KornError::config(format!("unknown key `{other}`"))),
            }
        }
        c.family = match shell.as_str() {
            "sphere" => ShellFamily::Sphere { radius },
            "cylinder" => ShellFamily::Cylinder { radius, length },
            "cap" => ShellFamily::Cap { radius, half_angle },
            other => return Err(KornError::config(format!("unknown shell `{other}`"))),
        };
        c.boundary = match boundary.as_deref() {
            None if matches!(c.family, ShellFamily::Sphere { .. }) => BoundaryCondition::Closed,
            None => BoundaryCondition::Clamped,
            Some("closed") => BoundaryCondition::Closed,
            Some("clamped") => BoundaryCondition::Clamped,
            Some("normal_clamped") => BoundaryCondition::NormalClamped,
            Some(other) => return Err(KornError::config(format!("unknown boundary `{other}`"))),
        };
        c.h_values = match h_list {
            Some(list) => list,
            None => {
                if h_count == 0 || !(h_min > 0.0 && h_max > h_min) {
                    return Err(KornError::config("need 0 < h_min < h_max and h_count ≥ 1"));
                }
                geometric(h_max, h_min, h_count)
            }
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.h_values.is_empty() {
            return Err(KornError::config("the h list is empty"));
        }
        if self.h_values.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
            return Err(KornError::config("every h must be positive"));
        }
        if self.h_values.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(KornError::config("the h list must be strictly decreasing"));
        }
        if !(self.policy.spacing > 0.0 && self.policy.scale > 0.0) || self.policy.min_cells == 0 {
            return Err(KornError::config("resolution policy constants must be positive"));
        }
        if self.policy.thickness_cells == 0 {
            return Err(KornError::config("thickness_cells must be positive"));
        }
        if !(self.tolerance > 0.0) || self.max_iterations == 0 || self.block_size == 0 {
            return Err(KornError::config("solver tolerance, iteration cap and block size must be positive"));
        }
        if self.subspace < 2 * self.block_size {
            return Err(KornError::config("subspace must hold at least two blocks"));
        }
        if !(self.stability_factor > 1.0) {
            return Err(KornError::config("stability_factor must exceed 1"));
        }
        // charts and boundary must be compatible
        self.family.domain(self.h_values[0], self.boundary)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_defaults() {
        let c = ExperimentConfig::parse(
            "# cylinder sweep\nshell = cylinder\nradius = 1\nlength = 2  # clamped by default\nh = 0.1, 0.05, 0.025\nseed = 7\nsuites = strain, sigma\n",
        )
        .unwrap();
        assert_eq!(c.family, ShellFamily::Cylinder { radius: 1.0, length: 2.0 });
        assert_eq!(c.boundary, BoundaryCondition::Clamped);
        assert_eq!(c.h_values, vec![0.1, 0.05, 0.025]);
        assert_eq!(c.seed, 7);
        assert!(c.suites.strain && c.suites.sigma && !c.suites.laplacian);
        let d = ExperimentConfig::parse("").unwrap();
        assert_eq!(d.boundary, BoundaryCondition::Closed);
        assert_eq!(d.h_values.len(), 8);
        assert!((d.h_values[7] - 0.0167).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ExperimentConfig::parse("h = 0.1, 0.2").is_err());
        assert!(ExperimentConfig::parse("h = 0.1, -0.2").is_err());
        assert!(ExperimentConfig::parse("colour = red").is_err());
        assert!(ExperimentConfig::parse("shell = cylinder\nboundary = closed").is_err());
        assert!(ExperimentConfig::parse("radius").is_err());
    }

    #[test]
    fn policy_tracks_sqrt_h() {
        let p = ResolutionPolicy::default();
        let sphere = ShellFamily::Sphere { radius: 1.0 };
        assert_eq!(p.resolution(&sphere, 0.1).n_u, 5);
        assert_eq!(p.resolution(&sphere, 0.0167).n_u, 11);
        let cyl = ShellFamily::Cylinder { radius: 1.0, length: 2.0 };
        let r = p.resolution(&cyl, 0.0167);
        assert_eq!((r.n_u, r.n_v, r.n_t), (41, 13, 2));
    }
}
