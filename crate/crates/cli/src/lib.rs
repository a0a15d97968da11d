//! Command implementations behind the `roughcas` binary: configuration
//! resolution (config file, then flags), the energy/response/scan/experiment
//! commands and CSV/JSON rendering with a metadata block.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::json;
use thiserror::Error;

use rough_casimir::casimir::{self, Accuracy, EnergyBreakdown, Scenario};
use rough_casimir::experiment::{self, SpherePlateConfig};
use rough_casimir::roughness::{estimate_correlations, real_space, signed_pair, synthesize_profile};
use rough_casimir::units::{ev_to_inv_nm, inv_nm3_to_j_per_m2, kelvin_to_inv_nm};
use rough_casimir::{CorrelationSpec, PermittivityModel};

pub const VERSION: &str = concat!("roughcas ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] rough_casimir::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 2 validation, 3 quadrature, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        use rough_casimir::Error as E;
        match self {
            CliError::Core(E::Quadrature(_)) => 3,
            CliError::Core(E::Io { .. }) | CliError::Io { .. } => 4,
            _ => 2,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn config_err<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Config(msg.into()))
}

#[derive(Debug, Parser)]
#[command(name = "roughcas", version, about = "Order-σ² roughness corrections to Casimir free energies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Flat energy and the four roughness terms for one configuration.
    Energy(CommonArgs),
    /// Response function R(q) on a momentum grid.
    Response {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated momenta (units of ω_p, or nm⁻¹ with --units physical).
        #[arg(long, value_delimiter = ',')]
        q: Vec<f64>,
    },
    /// Sweep one parameter and tabulate the dimensionless ratio.
    Scan {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum)]
        axis: Option<Axis>,
        /// Comma-separated grid values; for the lc axis `0` and `inf` select the limits.
        #[arg(long, value_delimiter = ',')]
        grid: Vec<String>,
        /// Add the exponential/Gaussian ratio column.
        #[arg(long)]
        exp_ratio: bool,
    },
    /// Sphere-plate ratio ρ(a), data comparison and separation-shift fit.
    Experiment {
        #[command(flatten)]
        common: CommonArgs,
        /// Named parameter set (film-200nm, film-100nm).
        #[arg(long)]
        preset: Option<String>,
        /// CSV with header separation_nm,force_pN.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        calibration: Option<f64>,
        /// Separations in nm used when no dataset is given.
        #[arg(long, value_delimiter = ',')]
        grid: Vec<f64>,
    },
    /// Synthesize a height profile and compare its sample correlators with the model.
    Profile {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        grid_size: Option<usize>,
        /// Side of the periodic box (same length unit as --lc).
        #[arg(long = "box")]
        box_length: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    A,
    Lc,
    G2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Units {
    /// ω_p = 1; lengths in 1/ω_p.
    Natural,
    /// Lengths in nm, ω_p and γ in eV, temperature in K, energies in J/m².
    Physical,
}

/// Flags shared by every command; each may also come from `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// key=value file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// plasma | drude | ideal-metal
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub wp: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// gaussian | exponential | affine | delta | uncorrelated
    #[arg(long)]
    pub spec: Option<String>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub lc: Option<f64>,
    /// Order of the affine family.
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub temp: Option<f64>,
    #[arg(long)]
    pub g2: Option<f64>,
    #[arg(long)]
    pub tol_rel: Option<f64>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long, value_enum)]
    pub units: Option<Units>,
}

/// Parse a flat `key = value` file. Blank lines and `#` comments are skipped.
pub fn parse_config(text: &str) -> CliResult<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return config_err(format!("line {}: expected key=value, found '{line}'", i + 1));
        };
        out.insert(k.trim().replace('_', "-"), v.trim().to_string());
    }
    Ok(out)
}

fn read_file(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Config-file entries with typed lookup.
struct FileConfig(BTreeMap<String, String>);

impl FileConfig {
    fn load(path: Option<&Path>) -> CliResult<Self> {
        match path {
            Some(p) => Ok(Self(parse_config(&read_file(p)?)?)),
            None => Ok(Self(BTreeMap::new())),
        }
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> CliResult<Option<T>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::Config(format!("config key '{key}': cannot parse '{v}'"))),
        }
    }

    fn list(&self, key: &str) -> Vec<String> {
        self.0
            .get(key)
            .map(|v| v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
            .unwrap_or_default()
    }

    fn value_enum<T: ValueEnum>(&self, key: &str) -> CliResult<Option<T>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => T::from_str(v, true)
                .map(Some)
                .map_err(|_| CliError::Config(format!("config key '{key}': unknown value '{v}'"))),
        }
    }
}

/// Fully resolved inputs, in the unit system named by `units`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: String,
    pub wp: Option<f64>,
    pub gamma: f64,
    pub spec: String,
    pub sigma: f64,
    pub lc: Option<f64>,
    pub s: Option<f64>,
    pub a: Option<f64>,
    pub temp: f64,
    pub g2: f64,
    pub tol_rel: f64,
    pub threads: Option<usize>,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub units: Units,
}

impl RunConfig {
    pub fn resolve(args: &CommonArgs) -> CliResult<(Self, BTreeMap<String, String>)> {
        let file = FileConfig::load(args.config.as_deref())?;
        let pick = |flag: Option<f64>, key: &str| -> CliResult<Option<f64>> { Ok(flag.or(file.get(key)?)) };
        let cfg = RunConfig {
            model: args.model.clone().or(file.get("model")?).unwrap_or_else(|| "plasma".into()),
            wp: pick(args.wp, "wp")?,
            gamma: pick(args.gamma, "gamma")?.unwrap_or(0.0),
            spec: args.spec.clone().or(file.get("spec")?).unwrap_or_else(|| "gaussian".into()),
            sigma: pick(args.sigma, "sigma")?.unwrap_or(1.0),
            lc: pick(args.lc, "lc")?,
            s: pick(args.s, "s")?,
            a: pick(args.a, "a")?,
            temp: pick(args.temp, "temp")?.unwrap_or(0.0),
            g2: pick(args.g2, "g2")?.unwrap_or(1.0),
            tol_rel: pick(args.tol_rel, "tol-rel")?.unwrap_or(1e-6),
            threads: args.threads.or(file.get("threads")?),
            seed: args.seed.or(file.get("seed")?).unwrap_or(0),
            out: args.out.clone().or(file.get("out")?),
            format: args.format.or(file.value_enum("format")?).unwrap_or(Format::Csv),
            units: args.units.or(file.value_enum("units")?).unwrap_or(Units::Natural),
        };
        Ok((cfg, file.0))
    }

    /// Length scale of the natural system in the input length unit.
    fn wp_input(&self) -> f64 {
        match self.units {
            Units::Natural => self.wp.unwrap_or(1.0),
            Units::Physical => ev_to_inv_nm(self.wp.unwrap_or(9.0)),
        }
    }

    fn scale(&self) -> f64 {
        match self.units {
            Units::Natural => 1.0,
            Units::Physical if self.model == "ideal-metal" => 1.0,
            Units::Physical => self.wp_input(),
        }
    }

    /// Permittivity in the units the kernels run in.
    pub fn permittivity(&self) -> CliResult<PermittivityModel> {
        let gamma = match self.units {
            Units::Natural => self.gamma,
            Units::Physical => ev_to_inv_nm(self.gamma) / self.wp_input(),
        };
        let wp = match self.units {
            Units::Natural => self.wp.unwrap_or(1.0),
            Units::Physical => 1.0,
        };
        let m = match self.model.as_str() {
            "plasma" => PermittivityModel::Plasma { wp },
            "drude" => PermittivityModel::Drude { wp, gamma },
            "ideal-metal" => PermittivityModel::IdealMetal,
            other => return config_err(format!("unknown model '{other}' (plasma, drude, ideal-metal)")),
        };
        m.validate()?;
        Ok(m)
    }

    fn length(&self, v: f64) -> f64 {
        v * self.scale()
    }

    pub fn correlation(&self) -> CliResult<CorrelationSpec> {
        self.correlation_with(&self.spec, self.lc)
    }

    fn correlation_with(&self, name: &str, lc: Option<f64>) -> CliResult<CorrelationSpec> {
        let sigma = self.length(self.sigma);
        let need_lc = || {
            lc.map(|l| self.length(l))
                .ok_or_else(|| CliError::Config(format!("spec '{name}' needs --lc")))
        };
        let spec = match name {
            "gaussian" => CorrelationSpec::Gaussian { sigma, lc: need_lc()? },
            "exponential" => CorrelationSpec::Exponential { sigma, lc: need_lc()? },
            "affine" => CorrelationSpec::Affine {
                sigma,
                lc: need_lc()?,
                s: self.s.ok_or_else(|| CliError::Config("spec 'affine' needs --s".into()))?,
            },
            "delta" => CorrelationSpec::DeltaLimit { sigma },
            "uncorrelated" => CorrelationSpec::Uncorrelated { sigma },
            other => {
                return config_err(format!(
                    "unknown spec '{other}' (gaussian, exponential, affine, delta, uncorrelated)"
                ))
            }
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn separation(&self) -> CliResult<f64> {
        self.a
            .map(|a| self.length(a))
            .ok_or_else(|| CliError::Config("a separation (--a) is required".into()))
    }

    pub fn temperature(&self) -> f64 {
        match self.units {
            Units::Natural => self.temp,
            Units::Physical => kelvin_to_inv_nm(self.temp) / self.scale(),
        }
    }

    pub fn accuracy(&self) -> CliResult<Accuracy> {
        if !(self.tol_rel > 0.0 && self.tol_rel < 1.0) {
            return config_err(format!("--tol-rel must lie in (0, 1), got {}", self.tol_rel));
        }
        Ok(Accuracy::new(self.tol_rel))
    }

    pub fn scenario(&self) -> CliResult<Scenario> {
        let scn = Scenario::new(self.permittivity()?, self.correlation()?, self.separation()?)
            .with_temperature(self.temperature())
            .with_g2(self.g2)
            .with_accuracy(self.accuracy()?);
        scn.validate()?;
        Ok(scn)
    }

    /// Energy per area from kernel units to output units.
    fn energy_out(&self, e: f64) -> f64 {
        match self.units {
            Units::Natural => e,
            Units::Physical => inv_nm3_to_j_per_m2(e * self.scale().powi(3)),
        }
    }

    fn metadata(&self, command: &str) -> Vec<(String, String)> {
        let (len, en, freq, temp) = match self.units {
            Units::Natural => ("1/wp", "wp^3 (hbar=c=1)", "wp", "wp"),
            Units::Physical => ("nm", "J/m^2", "eV", "K"),
        };
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_else(|| "-".into());
        let mut m = vec![
            ("version".to_string(), VERSION.to_string()),
            ("command".into(), command.into()),
            ("unit_system".into(), format!("{:?}", self.units).to_lowercase()),
            ("model".into(), self.model.clone()),
            (format!("wp [{freq}]"), opt(self.wp)),
            (format!("gamma [{freq}]"), self.gamma.to_string()),
            ("spec".into(), self.spec.clone()),
            (format!("sigma [{len}]"), self.sigma.to_string()),
            (format!("lc [{len}]"), opt(self.lc)),
            ("s".into(), opt(self.s)),
            (format!("a [{len}]"), opt(self.a)),
            (format!("temp [{temp}]"), self.temp.to_string()),
            ("g2".into(), self.g2.to_string()),
            ("tol_rel".into(), self.tol_rel.to_string()),
            ("threads".into(), self.threads.map(|t| t.to_string()).unwrap_or_else(|| "default".into())),
            ("seed".into(), self.seed.to_string()),
        ];
        m.push(("energy_unit".into(), en.into()));
        m
    }
}

/// A rendered command result: metadata plus one numeric table.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub metadata: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Report {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k}: {v}");
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.12e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let meta: serde_json::Map<String, serde_json::Value> =
            self.metadata.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
        let rows: Vec<Vec<serde_json::Value>> = self
            .rows
            .iter()
            .map(|r| r.iter().map(|&v| if v.is_finite() { json!(v) } else { serde_json::Value::Null }).collect())
            .collect();
        let doc = json!({ "metadata": meta, "columns": self.columns, "rows": rows });
        serde_json::to_string_pretty(&doc).unwrap_or_default() + "\n"
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }
}

const BREAKDOWN_COLUMNS: [&str; 6] = ["flat", "seagull", "single_scatter", "counterterm", "double_scatter", "total_correction"];

fn breakdown_row(cfg: &RunConfig, b: &EnergyBreakdown) -> Vec<f64> {
    [b.flat, b.seagull, b.single_scatter, b.counterterm, b.double_scatter, b.total_correction]
        .iter()
        .map(|&e| cfg.energy_out(e))
        .collect()
}

fn push_warnings(meta: &mut Vec<(String, String)>, warnings: Vec<String>) {
    for w in warnings {
        meta.push(("warning".into(), w));
    }
}

/// Dimensionless (a²/σ²)·ΔF/F∥ in kernel units.
fn ratio(b: &EnergyBreakdown, a: f64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        0.0
    } else {
        b.ratio(a, sigma)
    }
}

pub fn cmd_energy(cfg: &RunConfig) -> CliResult<Report> {
    let scn = cfg.scenario()?;
    let b = casimir::total_correction(&scn)?;
    let mut metadata = cfg.metadata("energy");
    push_warnings(&mut metadata, scn.warnings());
    push_warnings(&mut metadata, b.warnings());
    let mut columns: Vec<String> = BREAKDOWN_COLUMNS.iter().map(|s| s.to_string()).collect();
    columns.extend(["ratio".to_string(), "uv_tail_fraction".to_string()]);
    let mut row = breakdown_row(cfg, &b);
    row.push(ratio(&b, scn.a, scn.spec.sigma()));
    row.push(b.uv_tail_fraction.unwrap_or(f64::NAN));
    Ok(Report {
        metadata,
        columns,
        rows: vec![row],
    })
}

pub fn cmd_response(cfg: &RunConfig, q: &[f64]) -> CliResult<Report> {
    if q.is_empty() {
        return config_err("response needs a momentum grid (--q)");
    }
    if q.windows(2).any(|w| w[1] <= w[0]) || q[0] < 0.0 {
        return config_err("the momentum grid must be non-negative and strictly increasing");
    }
    let model = cfg.permittivity()?;
    let a = cfg.separation()?;
    let acc = cfg.accuracy()?;
    let t = cfg.temperature();
    let scale = cfg.scale();
    let eval = |qi: f64| casimir::response(&model, a, t, cfg.g2, qi / scale, &acc);
    let values: Vec<_> = q.par_iter().map(|&qi| eval(qi)).collect::<Result<_, _>>()?;
    let r0 = if q[0] == 0.0 { values[0].renormalized } else { eval(0.0)?.renormalized };
    let to_out = |r: f64| match cfg.units {
        Units::Natural => r,
        Units::Physical => inv_nm3_to_j_per_m2(r * scale.powi(5)),
    };
    let wp = cfg.wp_input();
    let rows = q
        .iter()
        .zip(&values)
        .map(|(&qi, v)| vec![qi / wp, to_out(v.renormalized), to_out(v.unsubtracted), v.renormalized / r0])
        .collect();
    let mut metadata = cfg.metadata("response");
    if cfg.units == Units::Physical {
        metadata.push(("response_unit".into(), "J/m^2 per nm^2".into()));
    }
    Ok(Report {
        metadata,
        columns: ["q_over_wp", "R_renormalized", "R_unsubtracted", "ratio_to_q0"].map(String::from).to_vec(),
        rows,
    })
}

pub fn cmd_scan(cfg: &RunConfig, axis: Axis, grid: &[String], exp_ratio: bool) -> CliResult<Report> {
    if grid.is_empty() {
        return config_err("scan needs a grid (--grid)");
    }
    let values: Vec<f64> = grid
        .iter()
        .map(|g| match g.as_str() {
            "inf" | "infinity" => Ok(f64::INFINITY),
            s => s.parse().map_err(|_| CliError::Config(format!("grid value '{s}' is not a number"))),
        })
        .collect::<CliResult<_>>()?;
    if axis != Axis::Lc && values.iter().any(|v| !v.is_finite()) {
        return config_err("only the lc axis accepts 'inf'");
    }
    let point = |v: f64| -> CliResult<Vec<f64>> {
        let mut c = cfg.clone();
        match axis {
            Axis::A => c.a = Some(v),
            Axis::G2 => c.g2 = v,
            Axis::Lc => {
                c.lc = Some(v);
                if v == 0.0 {
                    c.spec = "uncorrelated".into();
                } else if v.is_infinite() {
                    c.spec = "delta".into();
                }
            }
        }
        let scn = c.scenario()?;
        let b = casimir::total_correction(&scn)?;
        let mut row = vec![v, ratio(&b, scn.a, scn.spec.sigma())];
        row.extend(breakdown_row(&c, &b));
        if exp_ratio {
            let pair = match scn.spec {
                CorrelationSpec::Gaussian { sigma, lc } | CorrelationSpec::Exponential { sigma, lc } => Some((
                    CorrelationSpec::Exponential { sigma, lc },
                    CorrelationSpec::Gaussian { sigma, lc },
                )),
                _ => None,
            };
            row.push(match pair {
                Some((e, g)) => {
                    let other = if scn.spec == e { g } else { e };
                    let b2 = casimir::total_correction(&Scenario { spec: other, ..scn })?;
                    let (te, tg) = if scn.spec == e {
                        (b.total_correction, b2.total_correction)
                    } else {
                        (b2.total_correction, b.total_correction)
                    };
                    te / tg
                }
                None => f64::NAN,
            });
        }
        Ok(row)
    };
    let rows: Vec<Vec<f64>> = values.par_iter().map(|&v| point(v)).collect::<CliResult<_>>()?;
    let axis_name = match axis {
        Axis::A => "a",
        Axis::Lc => "lc",
        Axis::G2 => "g2",
    };
    let mut columns = vec![axis_name.to_string(), "ratio".to_string()];
    columns.extend(BREAKDOWN_COLUMNS.iter().map(|s| s.to_string()));
    if exp_ratio {
        columns.push("exp_gauss_ratio".into());
    }
    let mut metadata = cfg.metadata("scan");
    metadata.push(("axis".into(), axis_name.into()));
    metadata.push(("ratio".into(), "(a^2/sigma^2) * total_correction / flat".into()));
    Ok(Report { metadata, columns, rows })
}

/// Sphere-plate inputs beyond the common flags.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentArgs {
    pub preset: Option<String>,
    pub data: Option<PathBuf>,
    pub calibration: Option<f64>,
    pub grid: Vec<f64>,
}

const DEFAULT_SEPARATIONS: [f64; 8] = [20.0, 30.0, 40.0, 60.0, 80.0, 100.0, 125.0, 150.0];

pub fn cmd_experiment(cfg: &RunConfig, args: &ExperimentArgs) -> CliResult<Report> {
    let name = args.preset.as_deref().unwrap_or("film-200nm");
    let mut sp: SpherePlateConfig =
        experiment::preset(name).ok_or_else(|| CliError::Config(format!("unknown preset '{name}'")))?;
    if let Some(c) = args.calibration {
        sp.calibration = c;
    }
    sp.g2 = cfg.g2;
    sp.accuracy = cfg.accuracy()?;
    sp.validate()?;
    let mut metadata = cfg.metadata("experiment");
    metadata.retain(|(k, _)| {
        !["model", "spec", "s"].contains(&k.as_str()) && !k.starts_with("wp") && !k.starts_with("gamma")
            && !k.starts_with("sigma") && !k.starts_with("lc") && !k.starts_with("a [") && !k.starts_with("temp")
            && k != "energy_unit"
    });
    metadata.push(("preset".into(), name.into()));
    metadata.push(("sphere_plate".into(), serde_json::to_string(&sp).unwrap_or_default()));
    metadata.push(("temperature".into(), "0".into()));
    let Some(path) = &args.data else {
        let grid = if args.grid.is_empty() { DEFAULT_SEPARATIONS.to_vec() } else { args.grid.clone() };
        let rows: Vec<Vec<f64>> = grid
            .par_iter()
            .map(|&a| Ok(vec![a, experiment::rho_ratio(&sp, a)?]))
            .collect::<CliResult<_>>()?;
        for &a in &grid {
            push_warnings(&mut metadata, sp.warnings(a));
        }
        return Ok(Report {
            metadata,
            columns: vec!["separation_nm".into(), "rho_model".into()],
            rows,
        });
    };
    let data = experiment::load_dataset(path, sp.calibration)?;
    metadata.push(("dataset".into(), data.label.clone()));
    metadata.push(("force_convention".into(), experiment::ForceDataset::CONVENTION.into()));
    let rows = experiment::compare(&sp, &data)?;
    if sp.model_eff.is_some() {
        let fit = experiment::fit_shift(&sp, &data)?;
        metadata.push(("delta_a_nm".into(), format!("{:.6}", fit.delta_a)));
        metadata.push(("fit_residual_norm".into(), format!("{:.6e}", fit.residual_norm)));
        metadata.push(("fit_norm".into(), experiment::FitResult::NORM.into()));
        if fit.at_bracket_edge {
            metadata.push(("warning".into(), "fitted shift sits at the edge of [0, 2 sigma_total]".into()));
        }
    }
    Ok(Report {
        metadata,
        columns: ["separation_nm", "rho_model", "rho_data", "residual"].map(String::from).to_vec(),
        rows: rows
            .iter()
            .map(|r| vec![r.separation, r.rho_model, r.rho_data, r.residual])
            .collect(),
    })
}

pub fn cmd_profile(cfg: &RunConfig, grid_size: Option<usize>, box_length: Option<f64>) -> CliResult<Report> {
    let spec = cfg.correlation()?;
    let lc = spec
        .lc()
        .ok_or_else(|| CliError::Config("profile needs a finite correlation length".into()))?;
    let n = grid_size.unwrap_or(256);
    let l = box_length.map(|b| cfg.length(b)).unwrap_or(n as f64 * lc / 8.0);
    let field = synthesize_profile(&spec, n, l, cfg.seed)?;
    let est = estimate_correlations(&field, 5.0 * lc);
    let scale = cfg.scale();
    let s2 = scale * scale;
    let mut rows = Vec::with_capacity(est.r.len());
    for (j, &r) in est.r.iter().enumerate() {
        let p = signed_pair(&spec, r)?;
        rows.push(vec![r / scale, est.d2[j] / s2, real_space(&spec, r)? / s2, est.pp[j] / s2, p.pp / s2, est.pm[j] / s2, p.pm / s2]);
    }
    let mut metadata = cfg.metadata("profile");
    metadata.push(("grid_size".into(), n.to_string()));
    metadata.push(("box_length".into(), (l / scale).to_string()));
    metadata.push(("sample_mean".into(), format!("{:.6e}", est.d1 / scale)));
    Ok(Report {
        metadata,
        columns: ["r", "d2_sample", "d2_model", "pp_sample", "pp_model", "pm_sample", "pm_model"]
            .map(String::from)
            .to_vec(),
        rows,
    })
}

/// Resolve, run and render one command; returns the output destination and text.
pub fn execute(cli: &Cli) -> CliResult<(Option<PathBuf>, String)> {
    let common = match &cli.command {
        Command::Energy(c) => c,
        Command::Response { common, .. }
        | Command::Scan { common, .. }
        | Command::Experiment { common, .. }
        | Command::Profile { common, .. } => common,
    };
    let (cfg, file) = RunConfig::resolve(common)?;
    let file = FileConfig(file);
    let run = || -> CliResult<Report> {
        match &cli.command {
            Command::Energy(_) => cmd_energy(&cfg),
            Command::Response { q, .. } => {
                let q = if q.is_empty() { parse_floats(&file.list("q"))? } else { q.clone() };
                cmd_response(&cfg, &q)
            }
            Command::Scan { axis, grid, exp_ratio, .. } => {
                let axis = match axis {
                    Some(a) => *a,
                    None => file.value_enum("axis")?.ok_or_else(|| CliError::Config("scan needs --axis".into()))?,
                };
                let grid = if grid.is_empty() { file.list("grid") } else { grid.clone() };
                cmd_scan(&cfg, axis, &grid, *exp_ratio || file.get("exp-ratio")?.unwrap_or(false))
            }
            Command::Experiment { preset, data, calibration, grid, .. } => {
                let args = ExperimentArgs {
                    preset: preset.clone().or(file.get("preset")?),
                    data: data.clone().or(file.get("data")?),
                    calibration: calibration.or(file.get("calibration")?),
                    grid: if grid.is_empty() { parse_floats(&file.list("grid"))? } else { grid.clone() },
                };
                cmd_experiment(&cfg, &args)
            }
            Command::Profile { grid_size, box_length, .. } => cmd_profile(
                &cfg,
                grid_size.or(file.get("grid-size")?),
                box_length.or(file.get("box")?),
            ),
        }
    };
    let report = match cfg.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Config(format!("cannot build a pool of {n} threads: {e}")))?;
            pool.install(run)?
        }
        None => run()?,
    };
    Ok((cfg.out.clone(), report.render(cfg.format)))
}

fn parse_floats(items: &[String]) -> CliResult<Vec<f64>> {
    items
        .iter()
        .map(|s| s.parse().map_err(|_| CliError::Config(format!("'{s}' is not a number"))))
        .collect()
}

/// Write `text` to `out`, or stdout when absent.
pub fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|source| CliError::Io {
            path: p.display().to_string(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
