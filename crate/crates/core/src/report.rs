//! Run configuration, the JSON certificate, CSV output and plot data.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::lyapunov::{nonuniformity, thresholds, unstable_vector, Thresholds};
use crate::map::{HorseshoeMap, Point, RegionId};
use crate::params::{MapParams, ParamErrors};
use crate::periodic::{census, PeriodicOrbit};
use crate::suites::{
    cone_field_rows, run_suite, Context, Suite, SuiteError, SuiteOutcome, Table, Verdict,
};

/// Keys of the configuration file that belong to the map.
pub const PARAM_KEYS: [&str; 10] = [
    "lambda",
    "sigma",
    "c",
    "q",
    "alpha",
    "y3",
    "d3",
    "y4a",
    "y4b",
    "r5_orientation",
];

/// Everything a run depends on. Serialized as one flat TOML table; the map keys of
/// [`PARAM_KEYS`] sit next to the run keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    #[serde(skip)]
    pub params: MapParams,
    pub suites: Vec<Suite>,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub allow_invalid_params: bool,
    /// Sampled first returns for the return and cone suites.
    pub return_samples: usize,
    /// Candidate draws allowed while collecting returns.
    pub max_draws: usize,
    /// Iteration budget of one first return.
    pub max_iter: usize,
    /// Sampled points of W for the excursion checks.
    pub w_samples: usize,
    /// Directions tested per cone.
    pub cone_directions: usize,
    /// Depth of the W̃ membership test.
    pub j_max: usize,
    /// Census period for the periodic and lyapunov suites.
    pub max_period: usize,
    /// Census period whose points stand in for the invariant set.
    pub cycle_max_period: usize,
    /// Points of the η-grid for the return-cone inequality.
    pub eta_grid_len: usize,
    /// Longest period for the finite-time exponent comparison.
    pub exponent_max_period: usize,
    pub exponent_horizon: usize,
    pub exponent_tolerance: f64,
    pub renorm: usize,
    pub renorm_check_horizon: usize,
    pub nonuniformity_j_max: usize,
    pub nonuniformity_horizon: usize,
    pub nonuniformity_target: f64,
    /// Backward depth for the unstable direction.
    pub unstable_depth: usize,
    /// Wall-clock budget of a whole run, in seconds.
    pub time_budget_secs: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            params: MapParams::default(),
            suites: Suite::ALL.to_vec(),
            seed: 0,
            out_dir: PathBuf::from("horseshoe-out"),
            allow_invalid_params: false,
            return_samples: 10_000,
            max_draws: 10_000_000,
            max_iter: 10_000,
            w_samples: 10_000,
            cone_directions: 10,
            j_max: 60,
            max_period: 12,
            cycle_max_period: 9,
            eta_grid_len: 601,
            exponent_max_period: 4,
            exponent_horizon: 10_000_000,
            exponent_tolerance: 1e-6,
            renorm: 10,
            renorm_check_horizon: 100_000,
            nonuniformity_j_max: 6,
            nonuniformity_horizon: 200,
            nonuniformity_target: 0.01,
            unstable_depth: 50,
            time_budget_secs: 600.0,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("{0}")]
    Params(#[from] ParamErrors),
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        let mut ptable = toml::Table::try_from(MapParams::default()).expect("params serialize");
        for key in PARAM_KEYS {
            if let Some(v) = table.remove(key) {
                ptable.insert(key.to_string(), v);
            }
        }
        let params: MapParams = ptable
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        let mut cfg: RunConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        cfg.params = params;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        let mut table = toml::Table::try_from(self.params).expect("params serialize");
        table.extend(toml::Table::try_from(self).expect("config serializes"));
        toml::to_string(&table).expect("table serializes")
    }

    /// Structural checks; the map constants are checked separately by [`RunConfig::validated`].
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn check(&self) -> Result<(), ConfigError> {
        let counts = [
            ("return_samples", self.return_samples),
            ("max_draws", self.max_draws),
            ("max_iter", self.max_iter),
            ("w_samples", self.w_samples),
            ("cone_directions", self.cone_directions),
            ("max_period", self.max_period),
            ("cycle_max_period", self.cycle_max_period),
            ("eta_grid_len", self.eta_grid_len),
            ("exponent_max_period", self.exponent_max_period),
            ("exponent_horizon", self.exponent_horizon),
            ("renorm", self.renorm),
            ("renorm_check_horizon", self.renorm_check_horizon),
            ("nonuniformity_j_max", self.nonuniformity_j_max),
            ("nonuniformity_horizon", self.nonuniformity_horizon),
            ("unstable_depth", self.unstable_depth),
        ];
        for (key, v) in counts {
            if v == 0 {
                return Err(ConfigError::Invalid(format!("{key} must be at least 1")));
            }
        }
        if self.eta_grid_len < 2 {
            return Err(ConfigError::Invalid(
                "eta_grid_len must be at least 2".into(),
            ));
        }
        if !(self.time_budget_secs > 0.0) {
            return Err(ConfigError::Invalid(
                "time_budget_secs must be positive".into(),
            ));
        }
        if !(self.exponent_tolerance > 0.0) || !(self.nonuniformity_target > 0.0) {
            return Err(ConfigError::Invalid("tolerances must be positive".into()));
        }
        Ok(())
    }

    /// The map for this run, refusing invalid constants unless overridden.
    pub fn validated(&self) -> Result<HorseshoeMap, ConfigError> {
        self.check()?;
        if self.allow_invalid_params {
            Ok(HorseshoeMap::unchecked(self.params))
        } else {
            self.params.validate()?;
            Ok(HorseshoeMap::unchecked(self.params))
        }
    }
}

/// The JSON certificate written as `certificate.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub tool: String,
    pub version: String,
    pub fingerprint: String,
    pub params: MapParams,
    /// False when the run was made with invalid constants under the override.
    pub params_valid: bool,
    pub seed: u64,
    pub thresholds: Thresholds,
    /// All suites in fixed order; unselected ones carry the verdict "not run".
    pub suites: Vec<SuiteOutcome>,
    /// True iff every selected suite passed.
    pub pass: bool,
}

impl Certificate {
    pub fn suite(&self, s: Suite) -> &SuiteOutcome {
        self.suites
            .iter()
            .find(|o| o.suite == s)
            .expect("every suite is listed")
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("certificate serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("runtime budget exceeded: {0}")]
    Budget(String),
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl RunError {
    /// Process exit code: 2 for configuration problems, 3 for budget overruns.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Write { .. } => 2,
            RunError::Budget(_) => 3,
        }
    }
}

impl From<SuiteError> for RunError {
    fn from(e: SuiteError) -> Self {
        match e {
            SuiteError::Budget(m) => RunError::Budget(m),
        }
    }
}

#[derive(Debug)]
pub struct RunOutput {
    pub certificate: Certificate,
    pub files: Vec<PathBuf>,
}

impl RunOutput {
    pub fn exit_code(&self) -> i32 {
        if self.certificate.pass {
            0
        } else {
            1
        }
    }
}

/// Runs the selected suites and the certificate without touching the filesystem.
pub fn evaluate(config: &RunConfig) -> Result<(Certificate, Vec<Table>), RunError> {
    let map = config.validated()?;
    let start = Instant::now();
    let ctx = Context::new(config);
    let mut outcomes = Vec::with_capacity(Suite::ALL.len());
    let mut tables = Vec::new();
    for suite in Suite::ALL {
        if !config.suites.contains(&suite) {
            outcomes.push(SuiteOutcome::not_run(suite));
            continue;
        }
        let (outcome, mut t) = run_suite(&ctx, suite)?;
        outcomes.push(outcome);
        tables.append(&mut t);
        let elapsed = start.elapsed().as_secs_f64();
        if elapsed > config.time_budget_secs {
            return Err(RunError::Budget(format!(
                "{elapsed:.1} s after suite {suite}, budget {} s",
                config.time_budget_secs
            )));
        }
    }
    let pass = outcomes.iter().all(|o| o.verdict != Verdict::Fail);
    let params = *map.params();
    let certificate = Certificate {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        fingerprint: params.fingerprint(),
        params,
        params_valid: params.violations().is_empty(),
        seed: config.seed,
        thresholds: thresholds(&params),
        suites: outcomes,
        pass,
    };
    Ok((certificate, tables))
}

/// [`evaluate`] plus `certificate.json` and one CSV per table in `config.out_dir`.
pub fn run(config: &RunConfig) -> Result<RunOutput, RunError> {
    let (certificate, tables) = evaluate(config)?;
    let dir = &config.out_dir;
    create_dir(dir)?;
    let mut files = Vec::new();
    for t in &tables {
        files.push(write_table(dir, t)?);
    }
    let path = dir.join("certificate.json");
    fs::write(&path, certificate.to_json()).map_err(|source| RunError::Write {
        path: path.clone(),
        source,
    })?;
    files.push(path);
    files.sort();
    Ok(RunOutput { certificate, files })
}

fn create_dir(dir: &Path) -> Result<(), RunError> {
    fs::create_dir_all(dir).map_err(|source| RunError::Write {
        path: dir.to_path_buf(),
        source,
    })
}

pub fn write_table(dir: &Path, table: &Table) -> Result<PathBuf, RunError> {
    let path = dir.join(table.name);
    let err = |e: csv::Error| RunError::Write {
        path: path.clone(),
        source: std::io::Error::other(e.to_string()),
    };
    let mut w = csv::Writer::from_path(&path).map_err(err)?;
    w.write_record(&table.header).map_err(err)?;
    for row in &table.rows {
        w.write_record(row).map_err(err)?;
    }
    w.flush().map_err(|source| RunError::Write {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

/// Fixed-width summary of a certificate.
pub fn summary_table(cert: &Certificate) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "params {}", cert.fingerprint);
    let _ = writeln!(
        s,
        "{:<16} {:<8} {:>10} {:>10} {:>14}",
        "suite", "verdict", "checked", "violations", "worst margin"
    );
    for o in &cert.suites {
        let m = o
            .worst_margin
            .map_or("-".to_string(), |m| format!("{m:.6e}"));
        let _ = writeln!(
            s,
            "{:<16} {:<8} {:>10} {:>10} {:>14}",
            o.suite.name(),
            o.verdict.to_string(),
            o.checked,
            o.violations,
            m
        );
        for n in &o.notes {
            let _ = writeln!(s, "  note: {n}");
        }
    }
    let _ = writeln!(s, "overall: {}", if cert.pass { "PASS" } else { "FAIL" });
    s
}

fn f(x: f64) -> String {
    format!("{x}")
}

/// Plot datasets, one per CSV file:
///
/// * `lambda_cloud.csv`: periodic points up to `cycle_max_period`, the stand-in for Λ;
/// * `region_images.csv`: a grid of each strip and its image;
/// * `fold_parabolas.csv`: images of vertical segments of R4, `y = c(x - q)² - λx0`;
/// * `cone_field.csv`: leaf direction and cone on every periodic point;
/// * `cx_profile.csv`: `C_x` against the distance to the tangency point.
pub fn plot_tables(config: &RunConfig) -> Result<Vec<Table>, RunError> {
    let map = config.validated()?;
    let p = *map.params();
    let cen = census(&map, config.cycle_max_period).expect("period is at least 1");
    let orbits: Vec<&PeriodicOrbit> = cen.orbits.iter().collect();

    let mut cloud = Vec::new();
    for o in &orbits {
        for (q, r) in o.points.iter().zip(o.regions()) {
            cloud.push(vec![f(q.x), f(q.y), r.symbol().to_string(), o.label()]);
        }
    }

    let mut images = Vec::new();
    for branch in RegionId::BRANCHES {
        let strip = match branch {
            RegionId::R1 => p.r1(),
            RegionId::R3 => p.r3(),
            RegionId::R4 => p.r4(),
            _ => p.r5(),
        };
        for i in 0..=20 {
            for k in 0..=10 {
                let pre = Point::new(i as f64 / 20.0, strip.lo + strip.height() * k as f64 / 10.0);
                let img = map.step_with(branch, pre);
                images.push(vec![
                    branch.symbol().to_string(),
                    f(pre.x),
                    f(pre.y),
                    f(img.x),
                    f(img.y),
                ]);
            }
        }
    }

    let mut parabolas = Vec::new();
    let r4 = p.r4();
    for i in 0..=10 {
        let x0 = i as f64 / 10.0;
        for k in 0..=200 {
            let pre = Point::new(x0, r4.lo + r4.height() * k as f64 / 200.0);
            let img = map.step_with(RegionId::R4, pre);
            parabolas.push(vec![f(x0), f(img.x), f(img.y)]);
        }
    }

    let cones = cone_field_rows(&map, &orbits);

    let mut profile = Vec::new();
    let pts = crate::lyapunov::tangency_approach_points(&map, config.nonuniformity_j_max);
    for (j, q) in pts.iter().enumerate() {
        let v = unstable_vector(&map, *q, config.unstable_depth);
        if let Ok(pr) = nonuniformity(&map, *q, v, config.nonuniformity_horizon) {
            profile.push(vec![
                (j + 1).to_string(),
                f(q.dist(&map.tangency())),
                f(q.x),
                f(q.y),
                f(pr.c_x),
            ]);
        }
    }

    Ok(vec![
        Table {
            name: "lambda_cloud.csv",
            header: vec!["x", "y", "region", "orbit"],
            rows: cloud,
        },
        Table {
            name: "region_images.csv",
            header: vec!["region", "x0", "y0", "x", "y"],
            rows: images,
        },
        Table {
            name: "fold_parabolas.csv",
            header: vec!["x0", "x", "y"],
            rows: parabolas,
        },
        Table {
            name: "cone_field.csv",
            header: vec!["x", "y", "class", "angle", "dir_x", "dir_y", "u_lo", "u_hi"],
            rows: cones,
        },
        Table {
            name: "cx_profile.csv",
            header: vec!["j", "distance", "x", "y", "c_x"],
            rows: profile,
        },
    ])
}

/// Writes [`plot_tables`] into `config.out_dir`.
pub fn emit_plot_data(config: &RunConfig) -> Result<Vec<PathBuf>, RunError> {
    let tables = plot_tables(config)?;
    create_dir(&config.out_dir)?;
    let mut files = tables
        .iter()
        .map(|t| write_table(&config.out_dir, t))
        .collect::<Result<Vec<_>, _>>()?;
    files.sort();
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips() {
        let cfg = RunConfig::default();
        let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn params_and_run_keys_share_one_table() {
        let cfg = RunConfig::from_toml("c = 20.0\nseed = 9\nsuites = [\"validate\"]\n").unwrap();
        assert_eq!(cfg.params.c, 20.0);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.suites, vec![Suite::Validate]);
    }

    #[test]
    fn unknown_keys_are_errors() {
        assert!(matches!(
            RunConfig::from_toml("sead = 1\n"),
            Err(ConfigError::Parse(_))
        ));
        assert!(matches!(
            RunConfig::from_toml("lamda = 0.2\n"),
            Err(ConfigError::Parse(_))
        ));
    }

    #[test]
    fn zero_counts_are_errors() {
        assert!(matches!(
            RunConfig::from_toml("w_samples = 0\n"),
            Err(ConfigError::Invalid(_))
        ));
    }

    #[test]
    fn invalid_params_need_the_override() {
        let cfg = RunConfig::from_toml("c = 1.0\n").unwrap();
        assert!(matches!(cfg.validated(), Err(ConfigError::Params(_))));
        let cfg = RunConfig {
            allow_invalid_params: true,
            ..cfg
        };
        assert!(cfg.validated().is_ok());
    }

    #[test]
    fn unselected_suites_are_not_run() {
        let cfg = RunConfig {
            suites: vec![Suite::Validate],
            ..RunConfig::default()
        };
        let (cert, _) = evaluate(&cfg).unwrap();
        assert!(cert.pass);
        for o in &cert.suites[1..] {
            assert_eq!(o.verdict, Verdict::NotRun);
        }
        assert!(cert.to_json().contains("\"not run\""));
    }
}
