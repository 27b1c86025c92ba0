//! Plain-text run configuration (INI-style sections) and the CSV
//! time-series input parser. Both parsers accept untrusted input and must
//! fail cleanly on anything malformed.

use std::collections::BTreeSet;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::integrate::{IntegratorConfig, Method, TimeSeries};
use crate::model::{build_chain, ChainSystem, NonlinearSpring};

/// One parsed `key = value` section; keys keep file order.
#[derive(Debug, Clone, Default)]
pub struct Section {
    pub name: String,
    pub entries: Vec<(String, String)>,
}

impl Section {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

/// Minimal INI reader: `[section]` headers, `key = value` lines, `#`
/// comments, no quoting or escapes.
pub fn parse_ini(text: &str) -> Result<Vec<Section>> {
    let mut sections: Vec<Section> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: &str| Error::Config(format!("line {}: {}", lineno + 1, msg));
        if let Some(inner) = line.strip_prefix('[') {
            let name = inner
                .strip_suffix(']')
                .ok_or_else(|| err("unterminated section header"))?
                .trim();
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(err("invalid section name"));
            }
            if sections.iter().any(|s| s.name == name) {
                return Err(err("duplicate section"));
            }
            sections.push(Section {
                name: name.to_string(),
                entries: Vec::new(),
            });
        } else if let Some((key, value)) = line.split_once('=') {
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(err("invalid key"));
            }
            let section = sections
                .last_mut()
                .ok_or_else(|| err("key before any [section] header"))?;
            if section.entries.iter().any(|(k, _)| k == key) {
                return Err(err("duplicate key in section"));
            }
            section.entries.push((key.to_string(), value.to_string()));
        } else {
            return Err(err("expected `[section]` or `key = value`"));
        }
    }
    Ok(sections)
}

fn parse_scalar(value: &str, key: &str) -> Result<f64> {
    let x: f64 = value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: not a decimal number: `{value}`")))?;
    if !x.is_finite() {
        return Err(Error::Config(format!("{key}: must be finite")));
    }
    Ok(x)
}

fn parse_vector(value: &str, key: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|s| parse_scalar(s.trim(), key))
        .collect()
}

fn parse_usize(value: &str, key: &str) -> Result<usize> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: not a non-negative integer: `{value}`")))
}

fn parse_bool(value: &str, key: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true/false"))),
    }
}

/// A section with every recognised key accounted for.
struct Checked<'a> {
    section: Option<&'a Section>,
    allowed: &'static [&'static str],
    name: &'static str,
}

impl<'a> Checked<'a> {
    fn new(
        sections: &'a [Section],
        name: &'static str,
        allowed: &'static [&'static str],
    ) -> Result<Self> {
        let section = sections.iter().find(|s| s.name == name);
        if let Some(s) = section {
            let allowed_set: BTreeSet<_> = allowed.iter().copied().collect();
            for (k, _) in &s.entries {
                if !allowed_set.contains(k.as_str()) {
                    return Err(Error::Config(format!("[{name}] has unknown key `{k}`")));
                }
            }
        }
        Ok(Checked {
            section,
            allowed,
            name,
        })
    }

    fn get(&self, key: &str) -> Option<&'a str> {
        debug_assert!(self.allowed.contains(&key));
        self.section.and_then(|s| s.get(key))
    }

    fn scalar(&self, key: &str) -> Result<Option<f64>> {
        self.get(key).map(|v| parse_scalar(v, key)).transpose()
    }

    fn require_scalar(&self, key: &str) -> Result<f64> {
        self.scalar(key)?
            .ok_or_else(|| Error::Config(format!("[{}] missing required key `{key}`", self.name)))
    }
}

/// Fully parsed run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub integrator: IntegratorSettings,
    pub initial: InitialConditions,
    pub analysis: AnalysisConfig,
}

#[derive(Debug, Clone)]
pub struct SystemConfig {
    pub n: usize,
    pub mass: f64,
    pub stiffness: f64,
    pub c: f64,
    pub d: f64,
    pub epsilon: f64,
    pub p: usize,
    pub lambda: f64,
    /// Forcing amplitude per mass (empty = free vibration).
    pub forcing: Vec<f64>,
    /// Detuning; `omega_tilde` in the file is converted to `sigma` using
    /// `omega_tilde = omega_1 + epsilon * sigma`.
    pub sigma: f64,
    /// Drive phase: the load is `eps^2 F cos(omega_tilde t + forcing_phase)`.
    pub forcing_phase: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct IntegratorSettings {
    pub method: Method,
    pub theta: f64,
    pub dt: f64,
    pub t_end: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct InitialConditions {
    pub u0: Option<Vec<f64>>,
    pub v0: Option<Vec<f64>>,
    pub a0: Option<f64>,
    pub beta0: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct AnalysisConfig {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub n_sigma: usize,
    pub a_min: f64,
    pub a_max: f64,
    pub n_a: usize,
    pub epsilons: Vec<f64>,
    pub gamma: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub n_lambda: usize,
    /// One-based displacement component for spectral analysis.
    pub component: usize,
    pub min_prominence: f64,
    pub transient_fraction: f64,
    /// Output every `stride`-th sample in `simulate`.
    pub stride: usize,
    pub figure_convention: bool,
}

const SYSTEM_KEYS: &[&str] = &[
    "n",
    "mass",
    "stiffness",
    "c",
    "d",
    "epsilon",
    "p",
    "lambda",
    "f",
    "forcing",
    "sigma",
    "omega_tilde",
    "forcing_phase",
];
const INTEGRATOR_KEYS: &[&str] = &["method", "theta", "dt", "t_end"];
const INITIAL_KEYS: &[&str] = &["u0", "v0", "a0", "beta0"];
const ANALYSIS_KEYS: &[&str] = &[
    "sigma_min",
    "sigma_max",
    "n_sigma",
    "a_min",
    "a_max",
    "n_a",
    "epsilons",
    "gamma",
    "lambda_min",
    "lambda_max",
    "n_lambda",
    "component",
    "min_prominence",
    "transient_fraction",
    "stride",
    "figure_convention",
];

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        let sections = parse_ini(text)?;
        for s in &sections {
            if !matches!(
                s.name.as_str(),
                "system" | "integrator" | "initial" | "analysis"
            ) {
                return Err(Error::Config(format!("unknown section [{}]", s.name)));
            }
        }

        let sys = Checked::new(&sections, "system", SYSTEM_KEYS)?;
        if sys.section.is_none() {
            return Err(Error::Config("missing [system] section".into()));
        }
        let n = parse_usize(sys.get("n").unwrap_or("1"), "n")?;
        if n == 0 {
            return Err(Error::Config("n must be >= 1".into()));
        }
        let epsilon = sys.require_scalar("epsilon")?;
        if !(epsilon > 0.0) {
            return Err(Error::Config("epsilon must be > 0".into()));
        }
        let p = parse_usize(sys.get("p").unwrap_or("1"), "p")?;
        if p == 0 || p > n {
            return Err(Error::Config("p must lie in 1..=n".into()));
        }
        let mass = sys.scalar("mass")?.unwrap_or(1.0);
        let stiffness = sys.scalar("stiffness")?.unwrap_or(1.0);
        if !(mass > 0.0) || !(stiffness > 0.0) {
            return Err(Error::Config("mass and stiffness must be > 0".into()));
        }
        let c = sys.scalar("c")?.unwrap_or(1.0);
        let d = sys.scalar("d")?.unwrap_or(1.0);
        let lambda = sys.scalar("lambda")?.unwrap_or(0.0);
        if lambda < 0.0 {
            return Err(Error::Config("lambda must be >= 0".into()));
        }

        let forcing = match (sys.get("f"), sys.get("forcing")) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "give either `f` or `forcing`, not both".into(),
                ))
            }
            (Some(v), None) => {
                // scalar forcing applied at the driven end (mass 1)
                let f = parse_scalar(v, "f")?;
                let mut vec = vec![0.0; n];
                vec[0] = f;
                vec
            }
            (None, Some(v)) => {
                let vec = parse_vector(v, "forcing")?;
                if vec.len() != n {
                    return Err(Error::Config("forcing vector must have length n".into()));
                }
                vec
            }
            (None, None) => vec![0.0; n],
        };
        let forced = forcing.iter().any(|&f| f != 0.0);

        let sigma_raw = sys.scalar("sigma")?;
        let omega_tilde = sys.scalar("omega_tilde")?;
        if forced && sigma_raw.is_some() == omega_tilde.is_some() {
            return Err(Error::Config(
                "forced run needs exactly one of `sigma` / `omega_tilde`".into(),
            ));
        }
        if !forced && (sigma_raw.is_some() || omega_tilde.is_some()) {
            return Err(Error::Config(
                "`sigma` / `omega_tilde` require nonzero forcing".into(),
            ));
        }
        // omega_tilde is resolved to sigma after the modal frequency is known
        let sigma = sigma_raw.unwrap_or(0.0);
        let forcing_phase = sys.scalar("forcing_phase")?.unwrap_or(0.0);
        if !forced && forcing_phase != 0.0 {
            return Err(Error::Config(
                "`forcing_phase` requires nonzero forcing".into(),
            ));
        }

        let integ = Checked::new(&sections, "integrator", INTEGRATOR_KEYS)?;
        let method = match integ.get("method").unwrap_or("theta") {
            "theta" => Method::Theta,
            "rk4" => Method::Rk4,
            other => return Err(Error::Config(format!("unknown method `{other}`"))),
        };
        let theta = integ.scalar("theta")?.unwrap_or(0.5);
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::Config("theta must lie in [0, 1]".into()));
        }
        let dt = integ.scalar("dt")?.unwrap_or(0.01);
        if !(dt > 0.0) {
            return Err(Error::Config("dt must be > 0".into()));
        }
        let t_end = integ.scalar("t_end")?;
        if let Some(t) = t_end {
            if !(t > 0.0) {
                return Err(Error::Config("t_end must be > 0".into()));
            }
        }

        let init = Checked::new(&sections, "initial", INITIAL_KEYS)?;
        let u0 = init.get("u0").map(|v| parse_vector(v, "u0")).transpose()?;
        let v0 = init.get("v0").map(|v| parse_vector(v, "v0")).transpose()?;
        let a0 = init.scalar("a0")?;
        let beta0 = init.scalar("beta0")?;
        if (u0.is_some() || v0.is_some()) && (a0.is_some() || beta0.is_some()) {
            return Err(Error::Config(
                "give physical (u0/v0) or modal (a0/beta0) initial data, not both".into(),
            ));
        }
        for (vec, key) in [(&u0, "u0"), (&v0, "v0")] {
            if let Some(v) = vec {
                if v.len() != n && v.len() != 1 {
                    return Err(Error::Config(format!("{key} must have length n (or 1)")));
                }
            }
        }
        if let Some(a) = a0 {
            if a < 0.0 {
                return Err(Error::Config("a0 must be >= 0".into()));
            }
        }

        let ana = Checked::new(&sections, "analysis", ANALYSIS_KEYS)?;
        let n_sigma = parse_usize(ana.get("n_sigma").unwrap_or("201"), "n_sigma")?;
        let n_a = parse_usize(ana.get("n_a").unwrap_or("201"), "n_a")?;
        let n_lambda = parse_usize(ana.get("n_lambda").unwrap_or("401"), "n_lambda")?;
        let component = parse_usize(ana.get("component").unwrap_or("1"), "component")?;
        if component == 0 || component > n {
            return Err(Error::Config("component must lie in 1..=n".into()));
        }
        let stride = parse_usize(ana.get("stride").unwrap_or("1"), "stride")?;
        if stride == 0 {
            return Err(Error::Config("stride must be >= 1".into()));
        }
        let epsilons = ana
            .get("epsilons")
            .map(|v| parse_vector(v, "epsilons"))
            .transpose()?
            .unwrap_or_else(|| vec![0.1, 0.05, 0.025]);
        let gamma = ana.scalar("gamma")?.unwrap_or(1.0);
        if !(gamma > 0.0) {
            return Err(Error::Config("gamma must be > 0".into()));
        }
        let transient_fraction = ana.scalar("transient_fraction")?.unwrap_or(0.1);
        if !(0.0..1.0).contains(&transient_fraction) {
            return Err(Error::Config(
                "transient_fraction must lie in [0, 1)".into(),
            ));
        }
        let min_prominence = ana.scalar("min_prominence")?.unwrap_or(10.0);
        if !(min_prominence > 0.0) {
            return Err(Error::Config("min_prominence must be > 0".into()));
        }
        let figure_convention = ana
            .get("figure_convention")
            .map(|v| parse_bool(v, "figure_convention"))
            .transpose()?
            .unwrap_or(false);

        let config = RunConfig {
            system: SystemConfig {
                n,
                mass,
                stiffness,
                c,
                d,
                epsilon,
                p,
                lambda,
                forcing,
                sigma,
                forcing_phase,
            },
            integrator: IntegratorSettings {
                method,
                theta,
                dt,
                t_end,
            },
            initial: InitialConditions { u0, v0, a0, beta0 },
            analysis: AnalysisConfig {
                sigma_min: ana.scalar("sigma_min")?.unwrap_or(-1.0),
                sigma_max: ana.scalar("sigma_max")?.unwrap_or(3.0),
                n_sigma,
                a_min: ana.scalar("a_min")?.unwrap_or(0.0),
                a_max: ana.scalar("a_max")?.unwrap_or(2.0),
                n_a,
                epsilons,
                gamma,
                lambda_min: ana.scalar("lambda_min")?.unwrap_or(0.1),
                lambda_max: ana.scalar("lambda_max")?.unwrap_or(3.0),
                n_lambda,
                component,
                min_prominence,
                transient_fraction,
                stride,
                figure_convention,
            },
        };

        // resolve omega_tilde -> sigma against the modal frequency
        let mut config = config;
        if let Some(wt) = omega_tilde {
            let system = config.build_system()?;
            config.system.sigma = (wt - system.driven_frequency()) / epsilon;
        }
        Ok(config)
    }

    /// Builds the chain system described by the `[system]` section.
    pub fn build_system(&self) -> Result<ChainSystem> {
        let s = &self.system;
        let spring = NonlinearSpring::new(s.c, s.d, s.epsilon, s.p)?;
        let forcing = if s.forcing.iter().any(|&f| f != 0.0) {
            Some(DVector::from_vec(s.forcing.clone()))
        } else {
            None
        };
        Ok(
            build_chain(s.n, s.mass, s.stiffness, spring, s.lambda, forcing, s.sigma)?
                .with_forcing_phase(s.forcing_phase),
        )
    }

    /// Integrator configuration; errors when `t_end` is absent.
    pub fn integrator_config(&self) -> Result<IntegratorConfig> {
        let i = &self.integrator;
        let t_end = i
            .t_end
            .ok_or_else(|| Error::Config("[integrator] missing required key `t_end`".into()))?;
        IntegratorConfig::new(i.method, i.theta, i.dt, t_end)
    }

    /// Physical initial state, expanding scalars and modal (a0, beta0) data.
    pub fn initial_state(&self, system: &ChainSystem) -> Result<(DVector<f64>, DVector<f64>)> {
        let n = system.n;
        let expand = |v: &Option<Vec<f64>>| -> Result<Option<DVector<f64>>> {
            Ok(match v {
                None => None,
                Some(vals) if vals.len() == n => Some(DVector::from_vec(vals.clone())),
                Some(vals) if vals.len() == 1 && n > 1 => {
                    let mut out = DVector::zeros(n);
                    out[0] = vals[0];
                    Some(out)
                }
                Some(_) => return Err(Error::Config("initial vector length mismatch".into())),
            })
        };
        if let (Some(a0), beta0) = (self.initial.a0, self.initial.beta0) {
            let beta0 = beta0.unwrap_or(0.0);
            let eps = system.spring.epsilon;
            let omega = system.driven_frequency();
            let mode = system
                .basis()
                .modes
                .column(system.driven_mode - 1)
                .clone_owned();
            let u = &mode * (eps * a0 * beta0.cos());
            let v = &mode * (-eps * omega * a0 * beta0.sin());
            return Ok((u, v));
        }
        let u = expand(&self.initial.u0)?.unwrap_or_else(|| DVector::zeros(n));
        let v = expand(&self.initial.v0)?.unwrap_or_else(|| DVector::zeros(n));
        Ok((u, v))
    }
}

/// Parses a `t,u_1..u_n[,v_1..v_n]` CSV into a uniformly sampled series.
///
/// The header row is optional; with a header, `v_*` columns are recognised
/// by name, otherwise every column after `t` is a displacement.
pub fn parse_timeseries_csv(text: &str) -> Result<TimeSeries> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (first_no, first) = lines
        .next()
        .ok_or_else(|| Error::Config("empty CSV input".into()))?;

    let fields: Vec<&str> = first.split(',').map(str::trim).collect();
    let has_header = fields[0].parse::<f64>().is_err();
    let (n_u, n_cols) = if has_header {
        if fields[0] != "t" {
            return Err(Error::Config("CSV header must start with `t`".into()));
        }
        let n_v = fields.iter().filter(|f| f.starts_with('v')).count();
        let n_u = fields.len() - 1 - n_v;
        if n_u == 0 {
            return Err(Error::Config("CSV has no displacement columns".into()));
        }
        (n_u, fields.len())
    } else {
        if fields.len() < 2 {
            return Err(Error::Config(
                "CSV needs at least `t` and one value column".into(),
            ));
        }
        (fields.len() - 1, fields.len())
    };

    let mut rows: Vec<(f64, Vec<f64>)> = Vec::new();
    let data_lines: Vec<(usize, &str)> = if has_header {
        lines.collect()
    } else {
        std::iter::once((first_no, first)).chain(lines).collect()
    };
    for (lineno, line) in data_lines {
        let vals: Vec<&str> = line.split(',').map(str::trim).collect();
        if vals.len() != n_cols {
            return Err(Error::Config(format!(
                "line {}: expected {} fields, found {}",
                lineno + 1,
                n_cols,
                vals.len()
            )));
        }
        let mut nums = Vec::with_capacity(vals.len());
        for v in &vals {
            let x: f64 = v
                .parse()
                .map_err(|_| Error::Config(format!("line {}: bad number `{v}`", lineno + 1)))?;
            if !x.is_finite() {
                return Err(Error::Config(format!(
                    "line {}: non-finite value",
                    lineno + 1
                )));
            }
            nums.push(x);
        }
        rows.push((nums[0], nums[1..].to_vec()));
    }
    if rows.len() < 2 {
        return Err(Error::Config("CSV needs at least 2 data rows".into()));
    }

    let t0 = rows[0].0;
    let dt = rows[1].0 - t0;
    if !(dt > 0.0) {
        return Err(Error::Config(
            "CSV time column must be strictly increasing".into(),
        ));
    }
    let span = rows.last().unwrap().0 - t0;
    let tol = 1e-6 * span.abs().max(1.0);
    let mut series = TimeSeries::new(t0, dt, n_u).map_err(|e| Error::Config(e.to_string()))?;
    for (i, (t, vals)) in rows.iter().enumerate() {
        if (t - (t0 + i as f64 * dt)).abs() > tol {
            return Err(Error::Config(
                "CSV time column is not uniformly sampled".into(),
            ));
        }
        let u = &vals[..n_u];
        let v: Vec<f64> = if vals.len() >= 2 * n_u {
            vals[n_u..2 * n_u].to_vec()
        } else {
            vec![0.0; n_u]
        };
        series
            .push(u, &v)
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const PAPER_FORCED: &str = "\
# paper forced 1-DOF run
[system]
n = 1
stiffness = 0.5
epsilon = 0.01
lambda = 0.5
f = 1
omega_tilde = 1.0143379

[integrator]
method = theta
theta = 0.5
dt = 0.01
t_end = 1256.6

[initial]
u0 = 0.019796915
v0 = 0
";

    #[test]
    fn parses_paper_forced_run() {
        let cfg = RunConfig::parse(PAPER_FORCED).unwrap();
        assert_eq!(cfg.system.n, 1);
        // omega_1 = 1, so sigma = (1.0143379 - 1) / 0.01
        assert_abs_diff_eq!(cfg.system.sigma, 1.43379, epsilon = 1e-9);
        let sys = cfg.build_system().unwrap();
        assert_abs_diff_eq!(sys.driven_frequency(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sys.drive_frequency(), 1.0143379, epsilon = 1e-12);
        let (u0, v0) = cfg.initial_state(&sys).unwrap();
        assert_abs_diff_eq!(u0[0], 0.019796915);
        assert_abs_diff_eq!(v0[0], 0.0);
        assert!(cfg.integrator_config().is_ok());
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let cfg = "[system] # trailing comment\nn = 1 # another\nepsilon = 0.1\n\n";
        assert!(RunConfig::parse(cfg).is_ok());
    }

    #[test]
    fn rejects_both_sigma_and_omega_tilde() {
        let text = "[system]\nn=1\nepsilon=0.1\nf=1\nsigma=1\nomega_tilde=1.1\n";
        assert!(RunConfig::parse(text).is_err());
    }

    #[test]
    fn rejects_sigma_without_forcing() {
        let text = "[system]\nn=1\nepsilon=0.1\nsigma=1\n";
        assert!(RunConfig::parse(text).is_err());
    }

    #[test]
    fn forced_without_detuning_rejected() {
        let text = "[system]\nn=1\nepsilon=0.1\nf=1\n";
        assert!(RunConfig::parse(text).is_err());
    }

    #[test]
    fn rejects_unknown_key_and_section() {
        assert!(RunConfig::parse("[system]\nn=1\nepsilon=0.1\nbogus=3\n").is_err());
        assert!(RunConfig::parse("[mystery]\nx=1\n").is_err());
    }

    #[test]
    fn rejects_nonfinite_and_garbage_numbers() {
        assert!(RunConfig::parse("[system]\nn=1\nepsilon=inf\n").is_err());
        assert!(RunConfig::parse("[system]\nn=1\nepsilon=nan\n").is_err());
        assert!(RunConfig::parse("[system]\nn=1\nepsilon=zero\n").is_err());
    }

    #[test]
    fn rejects_zero_t_end() {
        let text = "[system]\nn=1\nepsilon=0.1\n[integrator]\nt_end=0\n";
        assert!(RunConfig::parse(text).is_err());
    }

    #[test]
    fn rejects_mixed_initial_data() {
        let text = "[system]\nn=1\nepsilon=0.1\n[initial]\nu0=0.1\na0=1\n";
        assert!(RunConfig::parse(text).is_err());
    }

    #[test]
    fn modal_initial_data_projects_onto_mode() {
        let text = "[system]\nn=9\nepsilon=0.01\n[initial]\na0=2\nbeta0=0\n";
        let cfg = RunConfig::parse(text).unwrap();
        let sys = cfg.build_system().unwrap();
        let (u0, v0) = cfg.initial_state(&sys).unwrap();
        let mode = sys.basis().modes.column(0).clone_owned();
        for i in 0..9 {
            assert_abs_diff_eq!(u0[i], 0.01 * 2.0 * mode[i], epsilon = 1e-14);
            assert_abs_diff_eq!(v0[i], 0.0);
        }
    }

    #[test]
    fn parser_never_panics_on_fragments() {
        for text in [
            "",
            "[",
            "[]",
            "[system",
            "=",
            "a=",
            "=b",
            "[system]\nn=1\nn=2\n",
            "[system]\n[system]\n",
            "key_without_section = 1",
            "\u{0}\u{1}",
        ] {
            let _ = RunConfig::parse(text);
        }
    }

    #[test]
    fn csv_roundtrip_with_header() {
        let text = "t,u_1,v_1\n0,1,0\n0.5,2,0.1\n1,3,0.2\n";
        let s = parse_timeseries_csv(text).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.dim, 1);
        assert_abs_diff_eq!(s.dt, 0.5);
        assert_abs_diff_eq!(s.displacement(2)[0], 3.0);
        assert_abs_diff_eq!(s.velocity(2)[0], 0.2);
    }

    #[test]
    fn csv_headerless_all_displacements() {
        let text = "0,1,2\n1,3,4\n";
        let s = parse_timeseries_csv(text).unwrap();
        assert_eq!(s.dim, 2);
        assert_abs_diff_eq!(s.displacement(1)[1], 4.0);
    }

    #[test]
    fn csv_rejects_nonuniform_grid() {
        assert!(parse_timeseries_csv("0,1\n1,2\n3,3\n").is_err());
        assert!(parse_timeseries_csv("0,1\n0,2\n").is_err());
    }

    #[test]
    fn csv_rejects_ragged_rows_and_garbage() {
        assert!(parse_timeseries_csv("0,1\n1\n").is_err());
        assert!(parse_timeseries_csv("0,x\n1,2\n").is_err());
        assert!(parse_timeseries_csv("").is_err());
        assert!(parse_timeseries_csv("t,u_1\n0,1\n").is_err()); // single data row
    }
}
