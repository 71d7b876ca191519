//! Fully resolved run configuration.
//!
//! Every output file starts with `# ` followed by this struct as one line of
//! JSON. Passing such a file back through `--config` reproduces it.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tdlimit::environments::{builtin, load_game};
use tdlimit::{BehaviorProfile, Game, LearnerKind, LearnerParams, ScanAxis};

use crate::error::{CliError, Result};

pub const DEFAULT_STEPS: usize = 10_000;
pub const DEFAULT_EPSILON: f64 = 1e-6;
pub const DEFAULT_RECORD: usize = 1_000;
pub const DEFAULT_KS: [usize; 5] = [100, 1_000, 10_000, 100_000, 1_000_000];
pub const DEFAULT_SEEDS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Traj,
    Scan,
    Lyap,
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Traj => "traj",
            Command::Scan => "scan",
            Command::Lyap => "lyap",
            Command::Validate => "validate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    /// Built-in game name or absolute path of a game file.
    pub game: String,
    pub learner: LearnerKind,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Initial profile, agent-major, then state, then action.
    pub x0: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transient: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<ScanAxis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ks: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<usize>,
}

/// Raw flag values before resolution.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawArgs {
    pub game: Option<String>,
    pub learner: Option<String>,
    pub alpha: Option<String>,
    pub beta: Option<String>,
    pub gamma: Option<String>,
    pub x0: Option<String>,
    pub steps: Option<usize>,
    pub epsilon: Option<f64>,
    pub grid: Option<usize>,
    pub transient: Option<usize>,
    pub record: Option<usize>,
    pub axis: Option<String>,
    pub values: Option<String>,
    pub ks: Option<String>,
    pub seed: Option<u64>,
    pub seeds: Option<usize>,
}

/// A resolved config together with the objects it describes.
pub struct Run {
    pub config: RunConfig,
    pub game: Game,
    pub x0: BehaviorProfile,
    pub params: LearnerParams,
}

impl RunConfig {
    pub fn header(&self) -> String {
        format!("# {}", serde_json::to_string(self).expect("config serializes"))
    }

    /// Reads a config from the header line of an output file, or from a file
    /// holding the JSON object alone.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("--config {}: {e}", path.display())))?;
        let first = text.lines().next().unwrap_or("");
        let json = match first.strip_prefix('#') {
            Some(rest) => rest.trim(),
            None => text.trim(),
        };
        serde_json::from_str(json)
            .map_err(|e| CliError::config(format!("--config {}: {e}", path.display())))
    }

    /// Rebuilds game, profile and parameters, validating every field.
    pub fn load(self) -> Result<Run> {
        let game = resolve_game(&self.game)?.1;
        let n = game.n_agents();
        let (z, m) = (game.n_states(), game.n_actions());
        let check = |name: &str, v: &[f64]| {
            if v.len() == n {
                Ok(())
            } else {
                Err(CliError::config(format!("{name}: expected {n} values, got {}", v.len())))
            }
        };
        check("alpha", &self.alpha)?;
        check("beta", &self.beta)?;
        check("gamma", &self.gamma)?;
        check_range("alpha", &self.alpha, |a| a > 0.0 && a < 1.0, "in (0, 1)")?;
        check_range("beta", &self.beta, |b| b > 0.0 && b.is_finite(), "positive")?;
        check_range("gamma", &self.gamma, |g| (0.0..1.0).contains(&g), "in [0, 1)")?;
        if let Some(eps) = self.epsilon {
            check_range("epsilon", &[eps], |e| e > 0.0, "positive")?;
        }
        if let Some(values) = &self.values {
            if values.is_empty() {
                return Err(CliError::config("values: empty list"));
            }
        }
        if self.record == Some(0) {
            return Err(CliError::config("record: must be at least 1"));
        }
        if self.command == Command::Lyap && self.steps == Some(0) {
            return Err(CliError::config("steps: must be at least 1"));
        }
        if let Some(g) = self.grid {
            if g == 0 {
                return Err(CliError::config("grid: must be at least 1"));
            }
            if m != 2 {
                return Err(CliError::config("grid: only two-action games are supported"));
            }
        }
        let x0 = BehaviorProfile::from_flat(n, z, m, &self.x0)
            .map_err(|e| CliError::config(format!("x0: {e}")))?;
        let params = LearnerParams::new(
            self.learner,
            self.alpha.clone(),
            self.beta.clone(),
            self.gamma.clone(),
        )
        .map_err(|e| CliError::config(e.to_string()))?;
        Ok(Run { config: self, game, x0, params })
    }
}

fn check_range(name: &str, values: &[f64], ok: impl Fn(f64) -> bool, what: &str) -> Result<()> {
    match values.iter().find(|&&v| !ok(v)) {
        Some(v) => Err(CliError::config(format!("{name}: {v} must be {what}"))),
        None => Ok(()),
    }
}

/// Returns the canonical game string and the game.
pub fn resolve_game(spec: &str) -> Result<(String, Game)> {
    if let Some(game) = builtin(spec) {
        let canonical = match spec {
            "mp" => "matching-pennies",
            "pd" => "prisoners-dilemma",
            other => other,
        };
        return Ok((canonical.to_string(), game));
    }
    let path = PathBuf::from(spec);
    let game = load_game(&path).map_err(|e| CliError::config(format!("game {spec}: {e}")))?;
    let abs = std::fs::canonicalize(&path)
        .map_err(|e| CliError::config(format!("game {spec}: {e}")))?;
    Ok((abs.to_string_lossy().into_owned(), game))
}

fn parse_list<T: std::str::FromStr>(name: &str, text: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    text.split(',')
        .map(|tok| {
            tok.trim()
                .parse()
                .map_err(|e| CliError::config(format!("{name}: cannot parse {tok:?}: {e}")))
        })
        .collect()
}

/// A scalar broadcast to every agent, or one value per agent.
pub fn parse_per_agent(name: &str, text: &str, n: usize) -> Result<Vec<f64>> {
    let values: Vec<f64> = parse_list(name, text)?;
    match values.len() {
        1 => Ok(vec![values[0]; n]),
        len if len == n => Ok(values),
        len => Err(CliError::config(format!("{name}: expected 1 or {n} values, got {len}"))),
    }
}

/// `uniform`, a full flat profile, or first-action probabilities in
/// state-major, agent-minor order for two-action games.
pub fn parse_x0(text: &str, n: usize, z: usize, m: usize) -> Result<Vec<f64>> {
    if text.trim() == "uniform" {
        return Ok(BehaviorProfile::uniform(n, z, m).to_flat());
    }
    let values: Vec<f64> = parse_list("x0", text)?;
    let profile = if values.len() == n * z * m {
        BehaviorProfile::from_flat(n, z, m, &values)
    } else if m == 2 && values.len() == n * z {
        BehaviorProfile::from_first_action(n, z, &values)
    } else {
        return Err(CliError::config(format!(
            "x0: expected {} entries{}, got {}",
            n * z * m,
            if m == 2 { format!(" or {}", n * z) } else { String::new() },
            values.len()
        )));
    };
    Ok(profile.map_err(|e| CliError::config(format!("x0: {e}")))?.to_flat())
}

/// A comma list, or `start:stop:step` with both ends included.
pub fn parse_values(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() == 1 {
        return parse_list("values", text);
    }
    if parts.len() != 3 {
        return Err(CliError::config(format!("values: expected start:stop:step, got {text:?}")));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| CliError::config(format!("values: cannot parse {p:?}: {e}")))
        })
        .collect::<Result<_>>()?;
    let (start, stop, step) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0) || stop < start {
        return Err(CliError::config(format!("values: empty range {text:?}")));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|k| start + k as f64 * step).collect())
}

fn default_transient(game: &str) -> usize {
    if game == "matching-pennies" { 100_000 } else { 5_000 }
}

impl RawArgs {
    pub fn resolve(self, command: Command) -> Result<RunConfig> {
        let game_spec = self.game.ok_or_else(|| CliError::config("--game is required"))?;
        let (game_name, game) = resolve_game(&game_spec)?;
        let (n, z, m) = (game.n_agents(), game.n_states(), game.n_actions());
        let learner: LearnerKind = self
            .learner
            .ok_or_else(|| CliError::config("--learner is required"))?
            .parse()
            .map_err(|e| CliError::config(format!("--learner: {e}")))?;

        let axis: Option<ScanAxis> = self
            .axis
            .map(|a| a.parse().map_err(|e| CliError::config(format!("--axis: {e}"))))
            .transpose()?;
        let values = self.values.as_deref().map(parse_values).transpose()?;

        let per_agent = |name: &str, raw: Option<String>, this: ScanAxis| -> Result<Vec<f64>> {
            match raw {
                Some(text) => parse_per_agent(name, &text, n),
                None if axis == Some(this) && command == Command::Scan => {
                    let first = values.as_ref().and_then(|v| v.first()).copied();
                    first
                        .map(|v| vec![v; n])
                        .ok_or_else(|| CliError::config("--values is required"))
                }
                None => Err(CliError::config(format!("--{name} is required"))),
            }
        };
        let alpha = per_agent("alpha", self.alpha, ScanAxis::Alpha)?;
        let beta = per_agent("beta", self.beta, ScanAxis::Beta)?;
        let gamma = per_agent("gamma", self.gamma, ScanAxis::Gamma)?;
        let x0 = parse_x0(self.x0.as_deref().unwrap_or("uniform"), n, z, m)?;

        let mut config = RunConfig {
            command,
            game: game_name,
            learner,
            alpha,
            beta,
            gamma,
            x0,
            steps: None,
            epsilon: None,
            grid: None,
            transient: None,
            record: None,
            axis: None,
            values: None,
            ks: None,
            seed: None,
            seeds: None,
        };
        let ks = self.ks.as_deref().map(|t| parse_list::<usize>("ks", t)).transpose()?;
        use Command::*;
        match command {
            Traj => {
                config.steps = Some(self.steps.unwrap_or(DEFAULT_STEPS));
                config.epsilon = Some(self.epsilon.unwrap_or(DEFAULT_EPSILON));
                config.grid = self.grid;
            }
            Scan => {
                config.axis = Some(axis.ok_or_else(|| CliError::config("--axis is required"))?);
                config.values = Some(values.ok_or_else(|| CliError::config("--values is required"))?);
                config.transient = Some(self.transient.unwrap_or(default_transient(&config.game)));
                config.record = Some(self.record.unwrap_or(DEFAULT_RECORD));
            }
            Lyap => {
                config.transient = Some(self.transient.unwrap_or(default_transient(&config.game)));
                config.steps = Some(self.steps.unwrap_or(DEFAULT_RECORD));
            }
            Validate => {
                config.ks = Some(ks.unwrap_or_else(|| DEFAULT_KS.to_vec()));
                config.seed = Some(self.seed.unwrap_or(0));
                config.seeds = Some(self.seeds.unwrap_or(DEFAULT_SEEDS));
            }
        }
        Ok(config)
    }
}
