//! TOML run configuration.
//!
//! ```toml
//! case = "case1"
//!
//! [physical]
//! mu = 0.1
//! sigma = 0.2
//! T = 1.0
//! r = 0.1
//! R = 50.0
//! V = "0.1"
//! f = "exp(-0.1*x)"
//!
//! [exponents]
//! p = "1 + 0.3/(1 + x^1.2)"
//! q = "1 + 0.4/(1 + x^2)"
//! p_certificate = { h_minus = 1, h_plus = 1.3, delta = 1, m0 = 0.5, c0 = 0.5, alpha = 1.2, m_inf = 0.1, r_inf = 1 }
//!
//! [discretization]
//! n_x = 400
//! n_t = 400
//! n_paths = 20000
//! n_steps = 400
//! master_seed = 20240917
//!
//! [output]
//! dir = "out"
//! ```
//!
//! Every section and key is optional; missing values fall back to the chosen
//! case (default `case1`) and the reference discretization.

use std::path::{Path, PathBuf};

use fkvx_core::mc::McConfig;
use fkvx_core::validation::{RunSettings, DEFAULT_SEED};
use fkvx_core::{CaseId, ClassSCertificate, ExponentFunction, ModelSpec, ScalarFn};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub case: Option<String>,
    pub physical: Option<Physical>,
    pub exponents: Option<Exponents>,
    pub discretization: Option<Discretization>,
    pub output: Option<Output>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Physical {
    pub mu: Option<f64>,
    pub sigma: Option<f64>,
    #[serde(rename = "T")]
    pub horizon: Option<f64>,
    pub r: Option<f64>,
    #[serde(rename = "R")]
    pub big_r: Option<f64>,
    #[serde(rename = "V")]
    pub potential: Option<String>,
    #[serde(rename = "f")]
    pub payoff: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Exponents {
    pub p: Option<String>,
    pub q: Option<String>,
    pub p_certificate: Option<Certificate>,
    pub q_certificate: Option<Certificate>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Certificate {
    pub h_minus: f64,
    pub h_plus: f64,
    pub delta: f64,
    pub m0: f64,
    pub c0: f64,
    pub alpha: f64,
    pub m_inf: f64,
    pub r_inf: f64,
}

impl From<Certificate> for ClassSCertificate {
    fn from(c: Certificate) -> Self {
        ClassSCertificate {
            h_minus: c.h_minus,
            h_plus: c.h_plus,
            delta: c.delta,
            m0: c.m0,
            c0: c.c0,
            alpha: c.alpha,
            m_inf: c.m_inf,
            r_inf: c.r_inf,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Discretization {
    pub n_x: Option<usize>,
    pub n_t: Option<usize>,
    pub n_paths: Option<usize>,
    pub n_steps: Option<usize>,
    pub master_seed: Option<u64>,
    pub antithetic: Option<bool>,
    pub interior_trim: Option<usize>,
    pub snapshot_stride: Option<usize>,
    pub moment_paths: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    pub dir: Option<PathBuf>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub case: Option<String>,
    pub seed: Option<u64>,
    pub n_x: Option<usize>,
    pub n_t: Option<usize>,
    pub n_paths: Option<usize>,
    pub n_steps: Option<usize>,
    pub interior_trim: Option<usize>,
    pub snapshot_stride: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

/// Fully resolved run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub label: String,
    pub spec: ModelSpec,
    pub settings: RunSettings,
    pub output_dir: PathBuf,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::parse(&text).map_err(|message| CliError::Config {
            source_name: path.display().to_string(),
            message,
        })
    }

    /// Parse TOML text; errors carry the line, column and offending key.
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }
}

fn config_error(field: &str, message: impl std::fmt::Display) -> CliError {
    CliError::Config {
        source_name: format!("field `{field}`"),
        message: message.to_string(),
    }
}

fn exponent(
    field: &str,
    source: &str,
    certificate: Option<Certificate>,
) -> Result<ExponentFunction, CliError> {
    let h = ExponentFunction::from_expr(source).map_err(|e| config_error(field, e))?;
    Ok(match certificate {
        Some(c) => h.with_certificate(c.into()),
        None => h,
    })
}

fn scalar(field: &str, source: &str) -> Result<ScalarFn, CliError> {
    ScalarFn::from_expr(source).map_err(|e| config_error(field, e))
}

/// Merge defaults, file and overrides.
pub fn resolve(file: FileConfig, over: &Overrides) -> Result<RunConfig, CliError> {
    let label = over
        .case
        .clone()
        .or(file.case)
        .unwrap_or_else(|| CaseId::Case1.label().to_string());
    let case = CaseId::parse(&label)
        .ok_or_else(|| config_error("case", format!("unknown case `{label}`")))?;
    let mut spec = ModelSpec::reference(case);
    let mut custom = false;

    if let Some(ph) = file.physical {
        custom = true;
        spec.mu = ph.mu.unwrap_or(spec.mu);
        spec.sigma = ph.sigma.unwrap_or(spec.sigma);
        spec.horizon = ph.horizon.unwrap_or(spec.horizon);
        spec.domain = (
            ph.r.unwrap_or(spec.domain.0),
            ph.big_r.unwrap_or(spec.domain.1),
        );
        if let Some(v) = ph.potential {
            spec.potential = scalar("physical.V", &v)?;
        }
        if let Some(f) = ph.payoff {
            spec.payoff = scalar("physical.f", &f)?;
        }
    }
    if let Some(ex) = file.exponents {
        custom = true;
        match ex.p {
            Some(p) => spec.p = exponent("exponents.p", &p, ex.p_certificate)?,
            None if ex.p_certificate.is_some() => {
                spec.p = spec
                    .p
                    .clone()
                    .with_certificate(ex.p_certificate.unwrap().into())
            }
            None => {}
        }
        match ex.q {
            Some(q) => spec.q = exponent("exponents.q", &q, ex.q_certificate)?,
            None if ex.q_certificate.is_some() => {
                spec.q = spec
                    .q
                    .clone()
                    .with_certificate(ex.q_certificate.unwrap().into())
            }
            None => {}
        }
    }
    spec.validate().map_err(|e| config_error("physical", e))?;

    let d = file.discretization.unwrap_or_default();
    let seed = over.seed.or(d.master_seed).unwrap_or(DEFAULT_SEED);
    let mut settings = RunSettings::reference(seed);
    settings.n_x = over.n_x.or(d.n_x).unwrap_or(settings.n_x);
    settings.n_t = over.n_t.or(d.n_t).unwrap_or(settings.n_t);
    settings.mc = McConfig {
        n_paths: over.n_paths.or(d.n_paths).unwrap_or(settings.mc.n_paths),
        n_steps: over.n_steps.or(d.n_steps).unwrap_or(settings.mc.n_steps),
        master_seed: seed,
        antithetic: d.antithetic.unwrap_or(true),
    };
    settings.interior_trim = over
        .interior_trim
        .or(d.interior_trim)
        .unwrap_or(settings.interior_trim);
    settings.snapshot_stride = over.snapshot_stride.or(d.snapshot_stride).unwrap_or(0);
    settings.moment_paths = d.moment_paths.unwrap_or(settings.mc.n_paths);
    if settings.mc.antithetic && !settings.mc.n_paths.is_multiple_of(2) {
        return Err(config_error(
            "discretization.n_paths",
            "must be even with antithetic pairing",
        ));
    }
    if !settings.moment_paths.is_multiple_of(2) {
        return Err(config_error("discretization.moment_paths", "must be even"));
    }

    let output_dir = over
        .output_dir
        .clone()
        .or(file.output.and_then(|o| o.dir))
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok(RunConfig {
        label: if custom {
            format!("{label} (custom)")
        } else {
            label
        },
        spec,
        settings,
        output_dir,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_reference_run() {
        let rc = resolve(FileConfig::parse("").unwrap(), &Overrides::default()).unwrap();
        assert_eq!(rc.label, "case1");
        assert_eq!(rc.settings, RunSettings::reference(DEFAULT_SEED));
        assert_eq!(rc.spec.mu, 0.1);
        assert_eq!(rc.spec.domain, (0.1, 50.0));
    }

    #[test]
    fn unknown_key_reports_line_and_name() {
        let err = FileConfig::parse("[physical]\nmu = 0.1\nsgima = 0.2\n").unwrap_err();
        assert!(err.contains("line 3"), "{err}");
        assert!(err.contains("sgima"), "{err}");
    }

    #[test]
    fn bad_expression_names_field() {
        let file = FileConfig::parse("[physical]\nf = \"exp(-0.1*y)\"\n").unwrap();
        let err = resolve(file, &Overrides::default())
            .unwrap_err()
            .to_string();
        assert!(err.contains("physical.f"), "{err}");
    }

    #[test]
    fn overrides_win() {
        let file =
            FileConfig::parse("case = \"case2\"\n[discretization]\nmaster_seed = 5\nn_x = 50\n")
                .unwrap();
        let over = Overrides {
            seed: Some(9),
            n_t: Some(30),
            ..Overrides::default()
        };
        let rc = resolve(file, &over).unwrap();
        assert_eq!(rc.label, "case2");
        assert_eq!(rc.settings.mc.master_seed, 9);
        assert_eq!((rc.settings.n_x, rc.settings.n_t), (50, 30));
    }

    #[test]
    fn custom_exponents_with_certificates() {
        let text = r#"
            [exponents]
            p = "1 + 0.2*exp(-x)"
            p_certificate = { h_minus = 1, h_plus = 1.2, delta = 1, m0 = 0.25, c0 = 1, alpha = 0.5, m_inf = 0.1, r_inf = 1 }
        "#;
        let rc = resolve(FileConfig::parse(text).unwrap(), &Overrides::default()).unwrap();
        assert!(rc.spec.p.certificate().is_some());
        assert!((rc.spec.p.eval(1.0) - (1.0 + 0.2 * (-1f64).exp())).abs() < 1e-15);
        assert_eq!(rc.label, "case1 (custom)");
    }
}
