//! Run configuration: defaults, then a `key = value` file, then flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::Args;
use twinverify::bench::DEFAULT_SWEEP;
use twinverify::registry;
use twinverify::transfer::TostConfig;
use twinverify::{ComparisonMode, EnvKind};

pub const DEFAULT_EPISODES: u32 = 100;
pub const DEFAULT_EPSILON: f32 = 1e-5;
pub const DEFAULT_GATE_DIR: &str = ".twinverify";

/// Keys accepted in a config file; each matches a flag of the same name.
const KEYS: [&str; 15] = [
    "env", "backend_a", "backend_b", "episodes", "seed", "mode", "epsilon", "delta", "alpha", "batches", "runs",
    "steps", "force", "gate_dir", "json",
];

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config or input files; exit status 2.
    Usage(String),
    /// A library call failed while running; exit status 1.
    Run(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Run(m) => f.write_str(m),
        }
    }
}

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn run_error(e: impl fmt::Display) -> CliError {
    CliError::Run(e.to_string())
}

/// Flags shared by verify, transfer and bench. Unset flags fall back to the
/// config file, then to built-in defaults.
#[derive(Debug, Default, Args)]
pub struct Flags {
    /// Environment: pong or cartpole
    #[arg(long)]
    env: Option<String>,
    /// Trusted reference backend id
    #[arg(long)]
    backend_a: Option<String>,
    /// Backend under test
    #[arg(long)]
    backend_b: Option<String>,
    /// Rollout episodes for the L3 gate
    #[arg(long)]
    episodes: Option<String>,
    /// Base seed for resets, actions and training
    #[arg(long)]
    seed: Option<String>,
    /// Rollout comparison: exact or epsilon
    #[arg(long)]
    mode: Option<String>,
    /// Tolerance for epsilon mode
    #[arg(long)]
    epsilon: Option<String>,
    /// TOST equivalence margin in return units
    #[arg(long)]
    delta: Option<String>,
    /// TOST significance level
    #[arg(long)]
    alpha: Option<String>,
    /// Comma-separated ascending batch sizes
    #[arg(long)]
    batches: Option<String>,
    /// Timed runs per measurement
    #[arg(long)]
    runs: Option<String>,
    /// Steps per timed run, or `auto` to calibrate from the clock
    #[arg(long)]
    steps: Option<String>,
    /// Run transfer without a passing verify artifact
    #[arg(long)]
    force: bool,
    /// Directory for verify gate artifacts
    #[arg(long)]
    gate_dir: Option<String>,
    /// Write the JSON report here; `-` prints it instead of the text summary
    #[arg(long)]
    json: Option<PathBuf>,
    /// Config file of `key = value` lines
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub env: EnvKind,
    pub backend_a: String,
    pub backend_b: String,
    pub episodes: u32,
    pub seed: u64,
    pub mode: ComparisonMode,
    pub tost: TostConfig,
    pub batches: Vec<usize>,
    pub runs: usize,
    /// `None` calibrates each run length from the clock.
    pub steps: Option<u64>,
    pub force: bool,
    pub gate_dir: PathBuf,
    pub json: Option<PathBuf>,
}

/// Parses `key = value` lines; `#` starts a comment. Dashes in keys are
/// accepted in place of underscores.
pub fn parse_config_file(text: &str, path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(usage(format!("{}:{}: expected `key = value`, got `{line}`", path.display(), n + 1)));
        };
        let key = key.trim().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(usage(format!("{}:{}: unknown key `{key}`", path.display(), n + 1)));
        }
        out.insert(key, value.trim().to_owned());
    }
    Ok(out)
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value.parse().map_err(|_| usage(format!("invalid value for --{}: `{value}`", key.replace('_', "-"))))
}

fn backend_kind(id: &str) -> Result<EnvKind, CliError> {
    registry::backend(id).map(|b| b.kind()).ok_or_else(|| {
        usage(format!("unknown backend id `{id}`; known ids: {}", registry::backend_ids().join(", ")))
    })
}

impl Flags {
    fn overrides(&self) -> BTreeMap<String, String> {
        let pairs = [
            ("env", &self.env),
            ("backend_a", &self.backend_a),
            ("backend_b", &self.backend_b),
            ("episodes", &self.episodes),
            ("seed", &self.seed),
            ("mode", &self.mode),
            ("epsilon", &self.epsilon),
            ("delta", &self.delta),
            ("alpha", &self.alpha),
            ("batches", &self.batches),
            ("runs", &self.runs),
            ("steps", &self.steps),
            ("gate_dir", &self.gate_dir),
        ];
        let mut out: BTreeMap<String, String> =
            pairs.into_iter().filter_map(|(k, v)| v.clone().map(|v| (k.to_owned(), v))).collect();
        if let Some(json) = &self.json {
            out.insert("json".into(), json.display().to_string());
        }
        if self.force {
            out.insert("force".into(), "true".into());
        }
        out
    }

    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut values = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
                parse_config_file(&text, path)?
            }
            None => BTreeMap::new(),
        };
        values.extend(self.overrides());
        RunConfig::from_values(&values)
    }
}

impl RunConfig {
    pub fn from_values(values: &BTreeMap<String, String>) -> Result<Self, CliError> {
        let get = |k: &str| values.get(k).map(String::as_str);

        let env = get("env")
            .map(|name| EnvKind::parse(name).ok_or_else(|| usage(format!("unknown env `{name}`; use pong or cartpole"))))
            .transpose()?;
        let kind_a = get("backend_a").map(backend_kind).transpose()?;
        let kind_b = get("backend_b").map(backend_kind).transpose()?;
        let env = env.or(kind_b).or(kind_a).unwrap_or(EnvKind::Pong);
        for (id, kind) in [(get("backend_a"), kind_a), (get("backend_b"), kind_b)] {
            if let (Some(id), Some(kind)) = (id, kind) {
                if kind != env {
                    return Err(usage(format!("backend `{id}` is a {kind} backend, not {env}")));
                }
            }
        }
        let backend_a = get("backend_a").unwrap_or(registry::reference_id(env)).to_owned();
        let backend_b = get("backend_b").unwrap_or(registry::perf_id(env)).to_owned();

        let episodes = get("episodes").map(|v| parse::<u32>("episodes", v)).transpose()?.unwrap_or(DEFAULT_EPISODES);
        if episodes == 0 {
            return Err(usage("--episodes must be at least 1"));
        }
        let seed = get("seed").map(|v| parse::<u64>("seed", v)).transpose()?.unwrap_or(0);

        let epsilon = get("epsilon").map(|v| parse::<f32>("epsilon", v)).transpose()?;
        if let Some(e) = epsilon {
            if !(e >= 0.0 && e.is_finite()) {
                return Err(usage(format!("--epsilon must be finite and nonnegative, got {e}")));
            }
        }
        let mode = match (get("mode"), epsilon) {
            (Some("exact"), None) => ComparisonMode::Exact,
            (Some("exact"), Some(_)) => return Err(usage("--epsilon conflicts with --mode exact")),
            (Some("epsilon"), e) | (None, e @ Some(_)) => ComparisonMode::epsilon(e.unwrap_or(DEFAULT_EPSILON)),
            (None, None) => registry::default_mode(env),
            (Some(other), _) => return Err(usage(format!("unknown mode `{other}`; use exact or epsilon"))),
        };

        let default_delta = match env {
            EnvKind::Pong => 1.0,
            EnvKind::CartPole => 25.0,
        };
        let tost = TostConfig {
            margin_delta: get("delta").map(|v| parse::<f64>("delta", v)).transpose()?.unwrap_or(default_delta),
            alpha: get("alpha").map(|v| parse::<f64>("alpha", v)).transpose()?.unwrap_or(0.05),
        };
        tost.validate().map_err(|e| usage(e.to_string()))?;

        let batches = match get("batches") {
            Some(list) => list.split(',').map(|b| parse::<usize>("batches", b.trim())).collect::<Result<Vec<_>, _>>()?,
            None => DEFAULT_SWEEP.to_vec(),
        };
        if batches.is_empty() || batches.contains(&0) || batches.windows(2).any(|w| w[0] >= w[1]) {
            return Err(usage(format!("--batches must be positive and strictly ascending, got {batches:?}")));
        }
        let runs = get("runs").map(|v| parse::<usize>("runs", v)).transpose()?.unwrap_or(5);
        if runs < 2 {
            return Err(usage("--runs must be at least 2"));
        }
        let steps = match get("steps") {
            None | Some("auto") => None,
            Some(v) => match parse::<u64>("steps", v)? {
                0 => return Err(usage("--steps must be at least 1")),
                s => Some(s),
            },
        };
        let force = get("force").map(|v| parse::<bool>("force", v)).transpose()?.unwrap_or(false);

        Ok(RunConfig {
            env,
            backend_a,
            backend_b,
            episodes,
            seed,
            mode,
            tost,
            batches,
            runs,
            steps,
            force,
            gate_dir: PathBuf::from(get("gate_dir").unwrap_or(DEFAULT_GATE_DIR)),
            json: get("json").map(PathBuf::from),
        })
    }
}
