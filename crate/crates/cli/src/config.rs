//! Run configuration: defaults, optional `key=value` file, then flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use coulomb_tmat::{Complex64, PhysicalSystem, Sigma};
use serde::Serialize;

use crate::error::CliError;
use crate::report::Cx;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    BasisCheck,
    PotentialConverge,
    Tau,
    PoleScan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GammaChoice {
    Value(f64),
    /// `gamma^2 = 2 mu |z| / hbar^2`, which puts a real negative `z` at `y = -1`.
    AutoSpecial,
}

/// `hbar^2/(2 mu)` in eV A^2 and `e^2/(4 pi eps0)` in eV A.
const HBAR2_OVER_2MU_EV_A2: f64 = 3.80998;
const COULOMB_EV_A: f64 = 14.3996;

pub fn parse_sigma(s: &str) -> Result<f64, String> {
    match s.trim() {
        "+1" | "1" => Ok(1.0),
        "-1" => Ok(-1.0),
        other => Err(format!("sigma must be +1 or -1, got '{other}'")),
    }
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("'{s}' is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("'{s}' is not finite"))
    }
}

fn parse_list(s: &str, len: usize) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != len {
        return Err(format!("expected {len} comma-separated numbers, got '{s}'"));
    }
    parts.into_iter().map(parse_f64).collect()
}

/// `RE,IM` or a bare real.
pub fn parse_complex(s: &str) -> Result<Complex64, String> {
    if s.contains(',') {
        let v = parse_list(s, 2)?;
        Ok(Complex64::new(v[0], v[1]))
    } else {
        Ok(Complex64::new(parse_f64(s)?, 0.0))
    }
}

pub fn parse_vec3(s: &str) -> Result<[f64; 3], String> {
    let v = parse_list(s, 3)?;
    Ok([v[0], v[1], v[2]])
}

pub fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let v = parse_list(s, 2)?;
    Ok((v[0], v[1]))
}

pub fn parse_gamma(s: &str) -> Result<GammaChoice, String> {
    if s.trim() == "auto-special" {
        Ok(GammaChoice::AutoSpecial)
    } else {
        Ok(GammaChoice::Value(parse_f64(s)?))
    }
}

fn parse_format(s: &str) -> Result<Format, String> {
    Format::from_str(s.trim(), true)
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(format!("'{other}' is not a boolean")),
    }
}

fn parse_usize(s: &str) -> Result<usize, String> {
    s.trim().parse().map_err(|_| format!("'{s}' is not a non-negative integer"))
}

/// Every setting a run accepts; unset fields fall through to the next layer.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    #[arg(long)]
    pub l: Option<usize>,
    #[arg(long = "n-max")]
    pub n_max: Option<usize>,
    #[arg(long = "l-max")]
    pub l_max: Option<usize>,
    /// Truncation size of the operator matrices.
    #[arg(long = "N")]
    pub n: Option<usize>,
    #[arg(long, allow_hyphen_values = true, value_parser = parse_sigma)]
    pub sigma: Option<f64>,
    /// Complex energy as RE,IM.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_complex, conflicts_with = "energy")]
    pub z: Option<Complex64>,
    /// Binding energy E > 0, i.e. z = -E.
    #[arg(long)]
    pub energy: Option<f64>,
    /// Basis scale, or `auto-special`.
    #[arg(long, value_parser = parse_gamma)]
    pub gamma: Option<GammaChoice>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub hbar: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Turn warnings into a nonzero exit.
    #[arg(long)]
    pub strict: bool,
    /// hbar^2/2mu = 3.80998 eV A^2, alpha = 14.3996 eV A (E_b = 13.6 eV).
    #[arg(long)]
    pub hydrogen: bool,
    /// Optional key=value file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// First momentum as KX,KY,KZ.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_vec3)]
    pub k: Option<[f64; 3]>,
    /// Second momentum as PX,PY,PZ.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_vec3)]
    pub p: Option<[f64; 3]>,
    /// Pole-scan energy window LO,HI.
    #[arg(long, value_parser = parse_window)]
    pub window: Option<(f64, f64)>,
    /// Pole-scan sampling points.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Quadrature points for the basis audit.
    #[arg(long = "radial-points")]
    pub radial_points: Option<usize>,
}

impl Overrides {
    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "l" => self.l = Some(parse_usize(value)?),
            "n-max" | "n_max" => self.n_max = Some(parse_usize(value)?),
            "l-max" | "l_max" => self.l_max = Some(parse_usize(value)?),
            "N" => self.n = Some(parse_usize(value)?),
            "sigma" => self.sigma = Some(parse_sigma(value)?),
            "z" => self.z = Some(parse_complex(value)?),
            "energy" => self.energy = Some(parse_f64(value)?),
            "gamma" => self.gamma = Some(parse_gamma(value)?),
            "alpha" => self.alpha = Some(parse_f64(value)?),
            "mu" => self.mu = Some(parse_f64(value)?),
            "hbar" => self.hbar = Some(parse_f64(value)?),
            "tol" => self.tol = Some(parse_f64(value)?),
            "format" => self.format = Some(parse_format(value)?),
            "out" => self.out = Some(PathBuf::from(value.trim())),
            "strict" => self.strict = parse_bool(value)?,
            "hydrogen" => self.hydrogen = parse_bool(value)?,
            "k" => self.k = Some(parse_vec3(value)?),
            "p" => self.p = Some(parse_vec3(value)?),
            "window" => self.window = Some(parse_window(value)?),
            "grid" => self.grid = Some(parse_usize(value)?),
            "radial-points" | "radial_points" => self.radial_points = Some(parse_usize(value)?),
            other => return Err(format!("unknown key '{other}'")),
        }
        Ok(())
    }

    /// Reads `key=value` lines; `#` starts a comment.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config file {}: {e}", path.display())))?;
        let mut out = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("{}:{}: expected key=value", path.display(), i + 1)))?;
            out.set(key.trim(), value)
                .map_err(|e| CliError::Config(format!("{}:{}: {e}", path.display(), i + 1)))?;
        }
        Ok(out)
    }

    /// `self` with every field set in `top` replaced.
    pub fn layered(self, top: &Overrides) -> Overrides {
        Overrides {
            l: top.l.or(self.l),
            n_max: top.n_max.or(self.n_max),
            l_max: top.l_max.or(self.l_max),
            n: top.n.or(self.n),
            sigma: top.sigma.or(self.sigma),
            z: top.z.or(if top.energy.is_some() { None } else { self.z }),
            energy: top.energy.or(if top.z.is_some() { None } else { self.energy }),
            gamma: top.gamma.or(self.gamma),
            alpha: top.alpha.or(self.alpha),
            mu: top.mu.or(self.mu),
            hbar: top.hbar.or(self.hbar),
            tol: top.tol.or(self.tol),
            format: top.format.or(self.format),
            out: top.out.clone().or(self.out),
            strict: top.strict || self.strict,
            hydrogen: top.hydrogen || self.hydrogen,
            config: top.config.clone().or(self.config),
            k: top.k.or(self.k),
            p: top.p.or(self.p),
            window: top.window.or(self.window),
            grid: top.grid.or(self.grid),
            radial_points: top.radial_points.or(self.radial_points),
        }
    }
}

/// A validated run.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub l: usize,
    pub n_max: usize,
    pub l_max: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub sigma: f64,
    pub z: Option<Cx>,
    pub energy: Option<f64>,
    pub gamma: GammaChoice,
    /// The basis scale actually used.
    pub gamma_value: f64,
    pub alpha: f64,
    pub mu: f64,
    pub hbar: f64,
    pub tol: f64,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub strict: bool,
    pub hydrogen: bool,
    pub k: [f64; 3],
    pub p: [f64; 3],
    pub window: Option<(f64, f64)>,
    pub grid: usize,
    pub radial_points: usize,
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::Config(format!("{name} must be positive, got {v}")))
    }
}

impl RunConfig {
    pub fn resolve(command: Command, o: &Overrides) -> Result<Self, CliError> {
        let (n_max, l_max, tol) = match command {
            Command::BasisCheck => (6, 3, 1e-8),
            Command::PotentialConverge => (40, 10, 1e-2),
            Command::Tau => (40, 10, 1e-6),
            Command::PoleScan => (40, 10, 1e-8),
        };
        let (alpha, mu, hbar) = if o.hydrogen {
            (COULOMB_EV_A, 1.0 / (2.0 * HBAR2_OVER_2MU_EV_A2), 1.0)
        } else {
            (1.0, 1.0, 1.0)
        };
        let alpha = positive("alpha", o.alpha.unwrap_or(alpha))?;
        let mu = positive("mu", o.mu.unwrap_or(mu))?;
        let hbar = positive("hbar", o.hbar.unwrap_or(hbar))?;
        let tol = positive("tol", o.tol.unwrap_or(tol))?;
        let n = o.n.unwrap_or(40);
        if n == 0 {
            return Err(CliError::Config("N must be at least 1".into()));
        }
        let z = match (o.z, o.energy) {
            (Some(z), _) => Some(z),
            (None, Some(e)) => Some(Complex64::new(-positive("energy", e)?, 0.0)),
            (None, None) if command == Command::Tau => Some(Complex64::new(-0.5, 0.0)),
            _ => None,
        };
        let gamma = o.gamma.unwrap_or(GammaChoice::Value(1.0));
        let gamma_value = match gamma {
            GammaChoice::Value(g) => positive("gamma", g)?,
            GammaChoice::AutoSpecial => match z {
                Some(z) if z.im == 0.0 && z.re < 0.0 => (2.0 * mu * -z.re).sqrt() / hbar,
                _ => return Err(CliError::Config("gamma=auto-special needs a real negative energy".into())),
            },
        };
        let k = o.k.unwrap_or([0.0, 0.0, 2.0]);
        let p = o.p.unwrap_or([0.8 * 0.96f64.sqrt(), 0.0, 0.8 * 0.2]);
        if command == Command::PotentialConverge && k == p {
            return Err(CliError::Config(coulomb_tmat::Error::ForwardSingularity.to_string()));
        }
        let sigma = o.sigma.unwrap_or(-1.0);
        if command == Command::PoleScan && sigma > 0.0 {
            return Err(CliError::Config("pole-scan needs sigma = -1; the repulsive case has no poles".into()));
        }
        if let Some((lo, hi)) = o.window {
            if !(lo > 0.0 && hi > lo) {
                return Err(CliError::Config(format!("window ({lo}, {hi}] is not a positive interval")));
            }
        }
        let grid = o.grid.unwrap_or(2000);
        if grid < 2 {
            return Err(CliError::Config("grid needs at least two points".into()));
        }
        Ok(Self {
            command,
            l: o.l.unwrap_or(0),
            n_max: o.n_max.unwrap_or(n_max),
            l_max: o.l_max.unwrap_or(l_max),
            n,
            sigma,
            z: z.map(Cx::from),
            energy: o.energy,
            gamma,
            gamma_value,
            alpha,
            mu,
            hbar,
            tol,
            format: o.format.unwrap_or(Format::Csv),
            out: o.out.clone(),
            strict: o.strict,
            hydrogen: o.hydrogen,
            k,
            p,
            window: o.window,
            grid,
            radial_points: o.radial_points.unwrap_or(200),
        })
    }

    pub fn system(&self) -> Result<PhysicalSystem, CliError> {
        let sigma = Sigma::from_value(self.sigma)?;
        Ok(PhysicalSystem::new(self.alpha, self.mu, self.hbar, sigma, self.gamma_value)?)
    }

    pub fn z(&self) -> Option<Complex64> {
        self.z.map(Complex64::from)
    }
}

/// Flattened key/value view used for the text summary.
pub fn describe(cfg: &RunConfig) -> BTreeMap<&'static str, String> {
    let mut m = BTreeMap::new();
    m.insert("l", cfg.l.to_string());
    m.insert("N", cfg.n.to_string());
    m.insert("sigma", cfg.sigma.to_string());
    m.insert("gamma", cfg.gamma_value.to_string());
    m.insert("tol", cfg.tol.to_string());
    if let Some(z) = cfg.z {
        m.insert("z", format!("{},{}", z.re, z.im));
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma_parsing() {
        assert_eq!(parse_sigma("+1"), Ok(1.0));
        assert_eq!(parse_sigma("-1"), Ok(-1.0));
        assert!(parse_sigma("2").is_err());
        assert!(parse_sigma("0").is_err());
    }

    #[test]
    fn complex_and_vectors() {
        assert_eq!(parse_complex("-0.5,0.25"), Ok(Complex64::new(-0.5, 0.25)));
        assert_eq!(parse_complex("3"), Ok(Complex64::new(3.0, 0.0)));
        assert!(parse_complex("1,2,3").is_err());
        assert_eq!(parse_vec3("1,2,3"), Ok([1.0, 2.0, 3.0]));
        assert_eq!(parse_gamma("auto-special"), Ok(GammaChoice::AutoSpecial));
    }

    #[test]
    fn flags_override_file_values() {
        let mut file = Overrides::default();
        file.set("tol", "1e-3").unwrap();
        file.set("l", "2").unwrap();
        file.set("z", "-1,0").unwrap();
        let flags = Overrides { l: Some(4), energy: Some(0.3), ..Overrides::default() };
        let merged = file.layered(&flags);
        assert_eq!(merged.l, Some(4));
        assert_eq!(merged.tol, Some(1e-3));
        assert_eq!(merged.z, None);
        assert_eq!(merged.energy, Some(0.3));
    }

    #[test]
    fn auto_special_needs_negative_real_energy() {
        let o = Overrides { gamma: Some(GammaChoice::AutoSpecial), z: Some(Complex64::new(0.5, 0.1)), ..Overrides::default() };
        assert!(RunConfig::resolve(Command::Tau, &o).is_err());
        let o = Overrides { gamma: Some(GammaChoice::AutoSpecial), energy: Some(0.25), ..Overrides::default() };
        let cfg = RunConfig::resolve(Command::Tau, &o).unwrap();
        assert!((cfg.gamma_value - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn hydrogen_preset_binding_energy() {
        let o = Overrides { hydrogen: true, ..Overrides::default() };
        let cfg = RunConfig::resolve(Command::PoleScan, &o).unwrap();
        let eb = cfg.system().unwrap().binding_energy();
        assert!((eb - 13.606).abs() < 1e-3, "{eb}");
    }

    #[test]
    fn refusals() {
        let o = Overrides { sigma: Some(1.0), ..Overrides::default() };
        assert!(RunConfig::resolve(Command::PoleScan, &o).is_err());
        let o = Overrides { k: Some([1.0, 0.0, 0.0]), p: Some([1.0, 0.0, 0.0]), ..Overrides::default() };
        let e = RunConfig::resolve(Command::PotentialConverge, &o).unwrap_err();
        assert!(e.to_string().contains("forward singularity"));
    }
}
