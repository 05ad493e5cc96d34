//! Attack run configuration: a flat key-value file overridden by flags.
//!
//! Recognised keys (all optional):
//!
//! ```text
//! image = path/to/target.png
//! oracle = toy:linear          # toy:conv-gap, toy:<variant>:<model file>, subprocess:<cmd>, http:<url>
//! attention = proxy            # proxy:<model file>, file:<attention.pgm>
//! use_attention = true
//! use_parity = true
//! parity = even                # or odd
//! budget = 10000
//! pop = 50
//! eta_c = 20
//! eta_m = 20
//! p_c = 1.0
//! p_m = 0.001                  # default 1/d
//! delta_max = 32               # default: no cap
//! seed = 0
//! final_from_front = false
//! upsampling = bilinear        # or nearest
//! threads = 1
//! out = pixattack-out
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use pixattack_core::{AttackConfig, MoeaConfig, Parity, Upsampling};

use crate::files::read_bytes;
use crate::kv::{parse_bool, KvFile};
use crate::FormatError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToyVariant {
    Linear,
    ConvGap,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleSpec {
    /// Built-in seeded model.
    Toy(ToyVariant),
    ToyFile(ToyVariant, PathBuf),
    Subprocess(String),
    Http(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AttentionSpec {
    /// Built-in seeded proxy.
    Proxy,
    ProxyFile(PathBuf),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct SpecError(String);

impl FromStr for ToyVariant {
    type Err = SpecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linear" => Ok(ToyVariant::Linear),
            "conv-gap" => Ok(ToyVariant::ConvGap),
            other => Err(SpecError(format!("unknown toy model {other:?}; expected linear or conv-gap"))),
        }
    }
}

impl fmt::Display for ToyVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ToyVariant::Linear => "linear",
            ToyVariant::ConvGap => "conv-gap",
        })
    }
}

impl FromStr for OracleSpec {
    type Err = SpecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (scheme, rest) = s
            .split_once(':')
            .ok_or_else(|| SpecError(format!("oracle {s:?} must look like toy:<variant>, subprocess:<cmd> or http:<url>")))?;
        match scheme {
            "toy" => match rest.split_once(':') {
                None => Ok(OracleSpec::Toy(rest.parse()?)),
                Some((variant, file)) if !file.is_empty() => Ok(OracleSpec::ToyFile(variant.parse()?, file.into())),
                Some(_) => Err(SpecError("toy model file path is empty".into())),
            },
            "subprocess" if !rest.trim().is_empty() => Ok(OracleSpec::Subprocess(rest.to_string())),
            // keep the scheme: "http:localhost:80" is unusual, "http://…" is the norm
            "http" | "https" if !rest.is_empty() => {
                let url = if rest.starts_with("//") {
                    format!("{scheme}:{rest}")
                } else {
                    format!("http://{rest}")
                };
                Ok(OracleSpec::Http(url))
            }
            _ => Err(SpecError(format!("cannot parse oracle spec {s:?}"))),
        }
    }
}

impl fmt::Display for OracleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleSpec::Toy(v) => write!(f, "toy:{v}"),
            OracleSpec::ToyFile(v, p) => write!(f, "toy:{v}:{}", p.display()),
            OracleSpec::Subprocess(cmd) => write!(f, "subprocess:{cmd}"),
            OracleSpec::Http(url) => f.write_str(url),
        }
    }
}

impl FromStr for AttentionSpec {
    type Err = SpecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            None if s == "proxy" => Ok(AttentionSpec::Proxy),
            Some(("proxy", p)) if !p.is_empty() => Ok(AttentionSpec::ProxyFile(p.into())),
            Some(("file", p)) if !p.is_empty() => Ok(AttentionSpec::File(p.into())),
            _ => Err(SpecError(format!(
                "cannot parse attention source {s:?}; expected proxy, proxy:<model> or file:<pgm>"
            ))),
        }
    }
}

impl fmt::Display for AttentionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttentionSpec::Proxy => f.write_str("proxy"),
            AttentionSpec::ProxyFile(p) => write!(f, "proxy:{}", p.display()),
            AttentionSpec::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

pub fn parse_parity(s: &str) -> Result<Parity, SpecError> {
    match s {
        "even" => Ok(Parity::Even),
        "odd" => Ok(Parity::Odd),
        _ => Err(SpecError(format!("parity must be even or odd, not {s:?}"))),
    }
}

pub fn parse_upsampling(s: &str) -> Result<Upsampling, SpecError> {
    match s {
        "bilinear" => Ok(Upsampling::Bilinear),
        "nearest" => Ok(Upsampling::Nearest),
        _ => Err(SpecError(format!("upsampling must be bilinear or nearest, not {s:?}"))),
    }
}

/// Every setting of an `attack` run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub image: Option<PathBuf>,
    pub oracle: OracleSpec,
    pub attention: AttentionSpec,
    pub attack: AttackConfig,
    pub threads: usize,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            image: None,
            oracle: OracleSpec::Toy(ToyVariant::Linear),
            attention: AttentionSpec::Proxy,
            attack: AttackConfig::default(),
            threads: 1,
            out: PathBuf::from("pixattack-out"),
        }
    }
}

/// Optional overrides; `None` keeps whatever the base had.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub image: Option<PathBuf>,
    pub oracle: Option<OracleSpec>,
    pub attention: Option<AttentionSpec>,
    pub use_attention: Option<bool>,
    pub use_parity: Option<bool>,
    pub parity: Option<Parity>,
    pub budget: Option<usize>,
    pub pop: Option<usize>,
    pub eta_c: Option<f64>,
    pub eta_m: Option<f64>,
    pub p_c: Option<f64>,
    pub p_m: Option<f64>,
    pub delta_max: Option<f64>,
    pub seed: Option<u64>,
    pub final_from_front: Option<bool>,
    pub upsampling: Option<Upsampling>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
}

fn spec_err(key: &str, e: impl fmt::Display) -> FormatError {
    FormatError::KeyValue {
        line: 0,
        message: format!("`{key}`: {e}"),
    }
}

fn take_with<T>(kv: &mut KvFile, key: &str, f: impl FnOnce(&str) -> Result<T, SpecError>) -> Result<Option<T>, FormatError> {
    match kv.take(key) {
        None => Ok(None),
        Some(e) => f(&e.value).map(Some).map_err(|err| FormatError::KeyValue {
            line: e.line,
            message: format!("`{key}`: {err}"),
        }),
    }
}

fn take_bool(kv: &mut KvFile, key: &str) -> Result<Option<bool>, FormatError> {
    take_with(kv, key, |v| parse_bool(v).ok_or_else(|| SpecError(format!("not a boolean: {v:?}"))))
}

impl Overrides {
    /// Reads a key-value config file. Relative paths inside it are taken
    /// relative to the file's directory.
    pub fn from_file(path: &Path) -> Result<Self, FormatError> {
        let text = String::from_utf8(read_bytes(path)?).map_err(|_| spec_err("file", "not UTF-8"))?;
        let mut o = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: PathBuf| if p.is_relative() { base.join(p) } else { p };
        o.image = o.image.map(rebase);
        o.out = o.out.map(rebase);
        o.attention = o.attention.map(|a| match a {
            AttentionSpec::ProxyFile(p) => AttentionSpec::ProxyFile(rebase(p)),
            AttentionSpec::File(p) => AttentionSpec::File(rebase(p)),
            AttentionSpec::Proxy => AttentionSpec::Proxy,
        });
        o.oracle = o.oracle.map(|s| match s {
            OracleSpec::ToyFile(v, p) => OracleSpec::ToyFile(v, rebase(p)),
            other => other,
        });
        Ok(o)
    }

    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let mut kv = KvFile::parse(text.lines(), 1)?;
        let o = Overrides {
            image: kv.take("image").map(|e| PathBuf::from(e.value)),
            oracle: take_with(&mut kv, "oracle", str::parse)?,
            attention: take_with(&mut kv, "attention", str::parse)?,
            use_attention: take_bool(&mut kv, "use_attention")?,
            use_parity: take_bool(&mut kv, "use_parity")?,
            parity: take_with(&mut kv, "parity", parse_parity)?,
            budget: kv.take_parsed("budget")?,
            pop: kv.take_parsed("pop")?,
            eta_c: kv.take_parsed("eta_c")?,
            eta_m: kv.take_parsed("eta_m")?,
            p_c: kv.take_parsed("p_c")?,
            p_m: kv.take_parsed("p_m")?,
            delta_max: kv.take_parsed("delta_max")?,
            seed: kv.take_parsed("seed")?,
            final_from_front: take_bool(&mut kv, "final_from_front")?,
            upsampling: take_with(&mut kv, "upsampling", parse_upsampling)?,
            threads: kv.take_parsed("threads")?,
            out: kv.take("out").map(|e| PathBuf::from(e.value)),
        };
        kv.finish()?;
        Ok(o)
    }

    pub fn apply(self, base: &mut RunConfig) {
        let moea: &mut MoeaConfig = &mut base.attack.moea;
        macro_rules! set {
            ($field:expr, $value:expr) => {
                if let Some(v) = $value {
                    $field = v;
                }
            };
        }
        set!(base.image, self.image.map(Some));
        set!(base.oracle, self.oracle);
        set!(base.attention, self.attention);
        set!(moea.max_evaluations, self.budget);
        set!(moea.population_size, self.pop);
        set!(moea.crossover_eta, self.eta_c);
        set!(moea.mutation_eta, self.eta_m);
        set!(moea.crossover_probability, self.p_c);
        set!(moea.mutation_probability, self.p_m.map(Some));
        set!(moea.seed, self.seed);
        set!(base.attack.use_attention, self.use_attention);
        set!(base.attack.use_parity, self.use_parity);
        set!(base.attack.parity, self.parity);
        set!(base.attack.delta_max, self.delta_max.map(Some));
        set!(base.attack.final_from_front_only, self.final_from_front);
        set!(base.attack.upsampling, self.upsampling);
        set!(base.threads, self.threads);
        set!(base.out, self.out);
    }
}

impl RunConfig {
    /// Defaults, then the config file (if any), then flags.
    pub fn resolve(file: Option<&Path>, flags: Overrides) -> Result<Self, FormatError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = file {
            Overrides::from_file(path)?.apply(&mut cfg);
        }
        flags.apply(&mut cfg);
        Ok(cfg)
    }
}
