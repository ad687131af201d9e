//! Flat `key = value` properties files.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Duration;

use thiserror::Error;

use crate::cpa::CpaRegistry;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

/// Maximum number of distinct values tracked per variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Threshold {
    Finite(usize),
    Infinite,
}

impl Threshold {
    /// True once `count` distinct values exceed the threshold.
    pub fn exceeded_by(self, count: usize) -> bool {
        match self {
            Threshold::Finite(t) => count > t,
            Threshold::Infinite => false,
        }
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Threshold::Finite(n) => write!(f, "{n}"),
            Threshold::Infinite => write!(f, "inf"),
        }
    }
}

impl FromStr for Threshold {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "inf" | "infinity" | "∞" => Ok(Threshold::Infinite),
            t => t
                .parse::<usize>()
                .map(Threshold::Finite)
                .map_err(|_| format!("invalid threshold `{t}` (expected a natural number or `inf`)")),
        }
    }
}

macro_rules! keyword_enum {
    ($(#[$m:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum $name { $($variant),+ }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($name::$variant => $text),+ })
            }
        }

        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                $(if s.eq_ignore_ascii_case($text) { return Ok($name::$variant); })+
                let options: &[&str] = &[$($text),+];
                Err(format!("invalid value `{s}` (expected one of {})", options.join(", ")))
            }
        }
    };
}

keyword_enum!(
    /// Where explicit-value counting is keyed.
    CounterMode { PerLocation => "perLocation", Global => "global" }
);
keyword_enum!(
    /// Where discovered predicates are installed.
    PredicateScope { Location => "location", Global => "global" }
);
keyword_enum!(WaitlistOrder { Bfs => "BFS", Dfs => "DFS" });
keyword_enum!(ReportFormat { Text => "text" });

#[derive(Debug, Clone, PartialEq)]
pub struct Limits {
    pub max_refinements: usize,
    pub max_pops: usize,
    /// Wall-clock budget per verification run; `None` disables it.
    pub time_limit: Option<Duration>,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_refinements: 200,
            max_pops: 1_000_000,
            time_limit: Some(Duration::from_secs(60)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub cpas: Vec<String>,
    pub threshold: Threshold,
    pub counter: CounterMode,
    pub scope: PredicateScope,
    pub waitlist: WaitlistOrder,
    pub limits: Limits,
    pub callstack_depth: usize,
    pub solver_max_constraints: usize,
    pub report_format: ReportFormat,
    pub emit_dot: bool,
    /// Keys addressed to user-registered CPAs (`<name>.<key>`).
    pub extra: BTreeMap<String, String>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            cpas: ["location", "callstack", "explicit", "predicate"].map(String::from).to_vec(),
            threshold: Threshold::Finite(5),
            counter: CounterMode::PerLocation,
            scope: PredicateScope::Location,
            waitlist: WaitlistOrder::Bfs,
            limits: Limits::default(),
            callstack_depth: 32,
            solver_max_constraints: crate::solver::DEFAULT_MAX_CONSTRAINTS,
            report_format: ReportFormat::Text,
            emit_dot: false,
            extra: BTreeMap::new(),
        }
    }
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("invalid boolean `{v}`")),
    }
}

fn parse_num<T: FromStr>(v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("invalid number `{v}`"))
}

impl Config {
    /// Parses properties text against the built-in CPA registry.
    pub fn parse(text: &str) -> Result<Config, ConfigError> {
        Self::parse_with(text, &CpaRegistry::with_defaults())
    }

    /// Parses properties text; CPA names and `<cpa>.<key>` entries are
    /// resolved against `registry`.
    pub fn parse_with(text: &str, registry: &CpaRegistry) -> Result<Config, ConfigError> {
        let mut cfg = Config::default();
        let mut cpas_line = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |message: String| ConfigError::Line { line, message };
            let Some((key, value)) = content.split_once('=') else {
                return Err(err(format!("expected `key = value`, found `{content}`")));
            };
            let (key, value) = (key.trim(), value.trim());
            match key {
                "cpas" => {
                    cfg.cpas = value.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
                    cpas_line = Some(line);
                }
                "explicit.threshold" => cfg.threshold = value.parse().map_err(err)?,
                "explicit.counter" => cfg.counter = value.parse().map_err(err)?,
                "predicate.scope" => cfg.scope = value.parse().map_err(err)?,
                "waitlist" => cfg.waitlist = value.parse().map_err(err)?,
                "limits.maxRefinements" => cfg.limits.max_refinements = parse_num(value).map_err(err)?,
                "limits.maxPops" => cfg.limits.max_pops = parse_num(value).map_err(err)?,
                "limits.timeSeconds" => {
                    let secs: f64 = parse_num(value).map_err(err)?;
                    if !(secs >= 0.0 && secs.is_finite()) {
                        return Err(err(format!("invalid time limit `{value}`")));
                    }
                    cfg.limits.time_limit = (secs > 0.0).then(|| Duration::from_secs_f64(secs));
                }
                "callstack.depth" => cfg.callstack_depth = parse_num(value).map_err(err)?,
                "solver.maxConstraints" => cfg.solver_max_constraints = parse_num(value).map_err(err)?,
                "output.report" => cfg.report_format = value.parse().map_err(err)?,
                "output.emitDot" => cfg.emit_dot = parse_bool(value).map_err(err)?,
                other => {
                    let owner = other.split_once('.').map(|(p, _)| p);
                    match owner {
                        Some(p) if registry.contains(p) && !registry.is_builtin(p) => {
                            cfg.extra.insert(other.to_string(), value.to_string());
                        }
                        _ => return Err(err(format!("unknown key `{other}`"))),
                    }
                }
            }
        }
        cfg.validate(registry).map_err(|message| match cpas_line {
            Some(line) => ConfigError::Line { line, message },
            None => ConfigError::Invalid(message),
        })?;
        Ok(cfg)
    }

    /// Checks the CPA list: names resolve, `location` comes first, no repeats.
    pub fn validate(&self, registry: &CpaRegistry) -> Result<(), String> {
        if self.cpas.first().map(String::as_str) != Some("location") {
            return Err("the CPA list must start with `location`".into());
        }
        for (i, name) in self.cpas.iter().enumerate() {
            if !registry.contains(name) {
                return Err(format!("unknown CPA `{name}`"));
            }
            if self.cpas[..i].contains(name) {
                return Err(format!("CPA `{name}` listed twice"));
            }
        }
        Ok(())
    }

    pub fn with_threshold(mut self, t: Threshold) -> Self {
        self.threshold = t;
        self
    }
}

/// Reads and parses a properties file.
pub fn load_config(path: &Path, registry: &CpaRegistry) -> Result<Config, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Config::parse_with(&text, registry)
}

impl fmt::Display for Config {
    /// Renders the configuration as a properties file that parses back to
    /// the same value.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "cpas = {}", self.cpas.join(","))?;
        writeln!(f, "explicit.threshold = {}", self.threshold)?;
        writeln!(f, "explicit.counter = {}", self.counter)?;
        writeln!(f, "predicate.scope = {}", self.scope)?;
        writeln!(f, "waitlist = {}", self.waitlist)?;
        writeln!(f, "limits.maxRefinements = {}", self.limits.max_refinements)?;
        writeln!(f, "limits.maxPops = {}", self.limits.max_pops)?;
        let secs = self.limits.time_limit.map_or(0.0, |d| d.as_secs_f64());
        writeln!(f, "limits.timeSeconds = {secs}")?;
        writeln!(f, "callstack.depth = {}", self.callstack_depth)?;
        writeln!(f, "solver.maxConstraints = {}", self.solver_max_constraints)?;
        writeln!(f, "output.report = {}", self.report_format)?;
        writeln!(f, "output.emitDot = {}", self.emit_dot)?;
        for (k, v) in &self.extra {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(Config::parse("").unwrap(), Config::default());
        assert_eq!(Config::parse("# only a comment\n\n").unwrap(), Config::default());
    }

    #[test]
    fn infinite_threshold() {
        let c = Config::parse("explicit.threshold = inf").unwrap();
        assert_eq!(c.threshold, Threshold::Infinite);
        assert!(!c.threshold.exceeded_by(usize::MAX));
    }

    #[test]
    fn location_must_come_first() {
        let e = Config::parse("\ncpas = explicit").unwrap_err();
        assert_eq!(e, ConfigError::Line { line: 2, message: "the CPA list must start with `location`".into() });
    }

    #[test]
    fn unknown_key_reports_line() {
        let e = Config::parse("waitlist = DFS\nfoo = 1\n").unwrap_err();
        assert!(matches!(e, ConfigError::Line { line: 2, .. }), "{e}");
    }

    #[test]
    fn bad_value_reports_line() {
        let e = Config::parse("explicit.threshold = lots").unwrap_err();
        assert!(matches!(e, ConfigError::Line { line: 1, .. }));
        assert!(Config::parse("cpas = location, nosuch").is_err());
        assert!(Config::parse("cpas = location, explicit, explicit").is_err());
    }

    #[test]
    fn display_round_trips() {
        let c = Config::parse("cpas = location, octagon\nexplicit.counter = global\nwaitlist = DFS\nlimits.timeSeconds = 2.5")
            .unwrap();
        assert_eq!(Config::parse(&c.to_string()).unwrap(), c);
    }
}
