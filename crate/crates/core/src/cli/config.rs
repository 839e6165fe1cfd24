//! INI-style run configuration: one `[command]` section with typed keys,
//! and an optional `[run]` section with `out`, `seed` and `workers`.
//!
//! Values are stored as trimmed text (list items re-joined with `", "`),
//! defaults are filled in at parse time, and serialization writes keys in
//! sorted order, so `parse(serialize(c)) == c`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use ini::Ini;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scattering::Coupling;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Command {
    Gamma,
    Scatter,
    Phi,
    Eos,
    Filter,
    DysonCertify,
    Ed,
    Sweep,
    LtCheck,
    TraceCheck,
}

impl Command {
    pub const ALL: [Command; 10] = [
        Command::Gamma,
        Command::Scatter,
        Command::Phi,
        Command::Eos,
        Command::Filter,
        Command::DysonCertify,
        Command::Ed,
        Command::Sweep,
        Command::LtCheck,
        Command::TraceCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Gamma => "gamma",
            Command::Scatter => "scatter",
            Command::Phi => "phi",
            Command::Eos => "eos",
            Command::Filter => "filter",
            Command::DysonCertify => "dyson-certify",
            Command::Ed => "ed",
            Command::Sweep => "sweep",
            Command::LtCheck => "lt-check",
            Command::TraceCheck => "trace-check",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(vec![format!("unknown command `{s}`")]))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Float,
    Int,
    Coupling,
    Floats,
    Ints,
    Couplings,
    /// Filter scales: floats or `none` (trivial filter).
    Scales,
    /// A float or the word `random`.
    FloatOrRandom,
    Choice(&'static [&'static str]),
}

#[derive(Clone, Copy, Debug)]
pub struct KeySpec {
    pub name: &'static str,
    pub kind: Kind,
    /// `None` marks a required key.
    pub default: Option<&'static str>,
}

const fn key(name: &'static str, kind: Kind, default: &'static str) -> KeySpec {
    KeySpec {
        name,
        kind,
        default: Some(default),
    }
}

const SWEEP_TARGETS: &[&str] = &["ed", "dyson-certify"];

const GAMMA: &[KeySpec] = &[key("tol", Kind::Float, "1e-10")];
const SCATTER: &[KeySpec] = &[
    key("g", Kind::Couplings, "1, 8, inf"),
    key("r_max", Kind::Int, "16"),
    key("grid", Kind::Int, "96"),
    key("tol", Kind::Float, "1e-9"),
    key("radii", Kind::Ints, "2, 3, 4, 5, 6, 7, 8"),
];
const PHI: &[KeySpec] = &[
    key("g", Kind::Coupling, "inf"),
    key("r_max", Kind::Int, "16"),
    key("grid", Kind::Int, "96"),
    key("tol", Kind::Float, "1e-9"),
];
const EOS: &[KeySpec] = &[key("rho", Kind::Floats, "0.001, 0.01, 0.125, 0.5, 1")];
const FILTER: &[KeySpec] = &[
    key("s", Kind::Floats, "8, 16, 32"),
    key("R", Kind::Ints, "1, 2"),
    key("lambda_factor", Kind::Int, "8"),
    key("rho", Kind::Float, "1e-5"),
];
const CERTIFY: &[KeySpec] = &[
    key("g", Kind::Couplings, "inf"),
    key("R", Kind::Ints, "4, 6, 8"),
    key("s", Kind::Scales, "none"),
    key("eps", Kind::Floats, "0.5"),
    key("eta", Kind::Floats, "0.5"),
    key("lambda", Kind::Ints, "32"),
    key("form", Kind::Choice(&["lemma", "corollary"]), "lemma"),
    key("centres", Kind::Int, "2"),
    key("C_V", Kind::Floats, "0, 1, 10, 100"),
];
const ED: &[KeySpec] = &[
    key("L", Kind::Ints, "3"),
    key("N_u", Kind::Ints, "1"),
    key("N_d", Kind::Ints, "1"),
    key("g", Kind::Couplings, "1"),
    key("tol", Kind::Float, "1e-10"),
];
const LT: &[KeySpec] = &[key("L", Kind::Int, "8")];
const TRACE: &[KeySpec] = &[
    key("instances", Kind::Int, "1000"),
    key("delta", Kind::FloatOrRandom, "random"),
];
const SWEEP_HEAD: &[KeySpec] = &[KeySpec {
    name: "target",
    kind: Kind::Choice(SWEEP_TARGETS),
    default: None,
}];

/// Keys accepted by a command; a sweep accepts its target's keys too.
pub fn schema(command: Command, target: Option<Command>) -> Vec<KeySpec> {
    match command {
        Command::Gamma => GAMMA.to_vec(),
        Command::Scatter => SCATTER.to_vec(),
        Command::Phi => PHI.to_vec(),
        Command::Eos => EOS.to_vec(),
        Command::Filter => FILTER.to_vec(),
        Command::DysonCertify => CERTIFY.to_vec(),
        Command::Ed => ED.to_vec(),
        Command::LtCheck => LT.to_vec(),
        Command::TraceCheck => TRACE.to_vec(),
        Command::Sweep => {
            let mut v = SWEEP_HEAD.to_vec();
            if let Some(t) = target {
                v.extend(schema(t, None));
            }
            v
        }
    }
}

fn check_value(kind: Kind, raw: &str) -> std::result::Result<String, String> {
    let items = || raw.split(',').map(str::trim).collect::<Vec<_>>();
    let list = |check: &dyn Fn(&str) -> bool| -> std::result::Result<String, String> {
        let v = items();
        if v.iter().any(|s| s.is_empty()) {
            return Err("empty list item".into());
        }
        if let Some(bad) = v.iter().find(|s| !check(s)) {
            return Err(format!("invalid list item `{bad}`"));
        }
        Ok(v.join(", "))
    };
    let float = |s: &str| s.parse::<f64>().map(|v| v.is_finite()).unwrap_or(false);
    let int = |s: &str| s.parse::<u64>().is_ok();
    let coupling = |s: &str| s.parse::<Coupling>().is_ok();
    let single = |ok: bool, what: &str| {
        if ok {
            Ok(raw.to_string())
        } else {
            Err(format!("expected {what}"))
        }
    };
    match kind {
        Kind::Float => single(float(raw), "a finite number"),
        Kind::Int => single(int(raw), "a non-negative integer"),
        Kind::Coupling => single(coupling(raw), "a coupling (number >= 0 or inf)"),
        Kind::Floats => list(&float),
        Kind::Ints => list(&int),
        Kind::Couplings => list(&coupling),
        Kind::Scales => list(&|s| s == "none" || float(s)),
        Kind::FloatOrRandom => single(raw == "random" || float(raw), "a number or `random`"),
        Kind::Choice(options) => single(
            options.contains(&raw),
            &format!("one of {}", options.join(", ")),
        ),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub params: BTreeMap<String, String>,
    pub out: PathBuf,
    pub seed: u64,
    pub workers: usize,
}

pub const DEFAULT_SEED: u64 = 0x0ed5eed;

/// Decimal, or hexadecimal with a `0x` prefix.
pub fn parse_seed(s: &str) -> std::result::Result<u64, std::num::ParseIntError> {
    match s.strip_prefix("0x") {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    }
}

/// Parses and validates; every problem found is reported in one error.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let ini = Ini::load_from_str(text).map_err(|e| Error::Config(vec![format!("syntax: {e}")]))?;
    let mut problems = Vec::new();
    let mut command: Option<(Command, BTreeMap<String, String>)> = None;
    let mut run = BTreeMap::new();
    for (section, props) in ini.iter() {
        let mut map = BTreeMap::new();
        for (k, v) in props.iter() {
            if map
                .insert(k.trim().to_string(), v.trim().to_string())
                .is_some()
            {
                problems.push(format!("duplicate key `{k}`"));
            }
        }
        match section {
            None => {
                for k in map.keys() {
                    problems.push(format!("key `{k}` outside any section"));
                }
            }
            Some("run") => run = map,
            Some(name) => match name.parse::<Command>() {
                Ok(c) if command.is_none() => command = Some((c, map)),
                Ok(_) => problems.push(format!("second command section `[{name}]`")),
                Err(_) => problems.push(format!("unknown section `[{name}]`")),
            },
        }
    }
    let Some((command, raw)) = command else {
        problems.push("no command section".into());
        return Err(Error::Config(problems));
    };
    let target = if command == Command::Sweep {
        match raw.get("target").map(|t| t.parse::<Command>()) {
            Some(Ok(t)) if SWEEP_TARGETS.contains(&t.name()) => Some(t),
            Some(_) => {
                problems.push(format!(
                    "`target`: expected one of {}",
                    SWEEP_TARGETS.join(", ")
                ));
                None
            }
            None => None,
        }
    } else {
        None
    };
    let spec = schema(command, target);
    let mut params = BTreeMap::new();
    for k in raw.keys() {
        if !spec.iter().any(|s| s.name == k) {
            problems.push(format!("unknown key `{k}` in [{command}]"));
        }
    }
    for s in &spec {
        match (raw.get(s.name), s.default) {
            (Some(v), _) => match check_value(s.kind, v) {
                Ok(v) => {
                    params.insert(s.name.to_string(), v);
                }
                Err(e) => problems.push(format!("`{}`: {e}", s.name)),
            },
            (None, Some(d)) => {
                params.insert(s.name.to_string(), d.to_string());
            }
            (None, None) => problems.push(format!("missing required key `{}`", s.name)),
        }
    }
    let mut out = PathBuf::from("out");
    let mut seed = DEFAULT_SEED;
    let mut workers = 1;
    for (k, v) in &run {
        match k.as_str() {
            "out" => out = PathBuf::from(v),
            "seed" => match parse_seed(v) {
                Ok(s) => seed = s,
                Err(_) => problems.push(format!("`seed`: expected an unsigned integer, got `{v}`")),
            },
            "workers" => match v.parse::<usize>() {
                Ok(w) if w >= 1 => workers = w,
                _ => problems.push(format!("`workers`: expected an integer >= 1, got `{v}`")),
            },
            other => problems.push(format!("unknown key `{other}` in [run]")),
        }
    }
    if problems.is_empty() {
        Ok(RunConfig {
            command,
            params,
            out,
            seed,
            workers,
        })
    } else {
        Err(Error::Config(problems))
    }
}

impl RunConfig {
    pub fn serialize(&self) -> String {
        let mut s = format!(
            "[run]\nout = {}\nseed = {}\nworkers = {}\n\n[{}]\n",
            self.out.display(),
            self.seed,
            self.workers,
            self.command
        );
        for (k, v) in &self.params {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }

    /// SHA-256 over the command, its parameters and the seed. The output
    /// directory and the worker count do not change results and are left
    /// out.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("[{}]\nseed = {}\n", self.command, self.seed));
        for (k, v) in &self.params {
            h.update(format!("{k} = {v}\n"));
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn get(&self, key: &str) -> &str {
        self.params.get(key).map(String::as_str).unwrap_or("")
    }

    pub fn float(&self, key: &str) -> f64 {
        self.get(key).parse().expect("validated float")
    }

    pub fn int(&self, key: &str) -> u64 {
        self.get(key).parse().expect("validated integer")
    }

    pub fn coupling(&self, key: &str) -> Coupling {
        self.get(key).parse().expect("validated coupling")
    }

    fn items(&self, key: &str) -> Vec<&str> {
        self.get(key).split(',').map(str::trim).collect()
    }

    pub fn floats(&self, key: &str) -> Vec<f64> {
        self.items(key)
            .iter()
            .map(|s| s.parse().expect("validated float"))
            .collect()
    }

    pub fn ints(&self, key: &str) -> Vec<u64> {
        self.items(key)
            .iter()
            .map(|s| s.parse().expect("validated integer"))
            .collect()
    }

    pub fn couplings(&self, key: &str) -> Vec<Coupling> {
        self.items(key)
            .iter()
            .map(|s| s.parse().expect("validated coupling"))
            .collect()
    }

    /// `None` stands for the trivial filter.
    pub fn scales(&self, key: &str) -> Vec<Option<f64>> {
        self.items(key)
            .iter()
            .map(|s| {
                if *s == "none" {
                    None
                } else {
                    Some(s.parse().expect("validated float"))
                }
            })
            .collect()
    }

    pub fn target(&self) -> Command {
        match self.command {
            Command::Sweep => self.get("target").parse().expect("validated target"),
            c => c,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_gamma() {
        let c = parse_config("[gamma]\ntol=1e-6\n").unwrap();
        assert_eq!(c.command, Command::Gamma);
        assert_eq!(c.float("tol"), 1e-6);
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = parse_config("[gamma]\ntol=1e-6\nfoo=1\n").unwrap_err();
        let Error::Config(list) = err else { panic!() };
        assert!(list.iter().any(|m| m.contains("`foo`")), "{list:?}");
        let err = parse_config("[ed]\nL=abc\nbar=2\n[run]\nseed=x\n").unwrap_err();
        let Error::Config(list) = err else { panic!() };
        assert_eq!(list.len(), 3, "{list:?}");
    }

    #[test]
    fn round_trip_and_hash() {
        let text = "[run]\nseed=7\nworkers=3\n[sweep]\ntarget=ed\nL=4,5\ng=1 , inf\n";
        let c = parse_config(text).unwrap();
        assert_eq!(c.get("g"), "1, inf");
        let again = parse_config(&c.serialize()).unwrap();
        assert_eq!(c, again);
        let mut other = again.clone();
        other.workers = 1;
        other.out = "elsewhere".into();
        assert_eq!(c.hash(), other.hash());
        other.seed = 8;
        assert_ne!(c.hash(), other.hash());
    }

    #[test]
    fn hex_seed() {
        let c = parse_config("[gamma]\n[run]\nseed = 0x0ed5eed\n").unwrap();
        assert_eq!(c.seed, DEFAULT_SEED);
        assert!(parse_config("[gamma]\n[run]\nseed = 0xzz\n").is_err());
    }

    #[test]
    fn sweep_needs_target() {
        assert!(parse_config("[sweep]\nL=4\n").is_err());
        assert!(parse_config("[sweep]\ntarget=gamma\n").is_err());
    }
}
