//! `key = value` configuration files for `train` and `dog`.

use std::path::Path;
use std::str::FromStr;

use specmatch::repa::DEFAULT_SPATIAL_ALPHA;
use specmatch::train::TrainConfig;
use specmatch::{DoGParams, MaskFamily};

use crate::error::{CliError, CliResult};
use crate::io::read_bytes;

pub const KEYS: &[&str] = &[
    "objective",
    "beta",
    "delta",
    "family",
    "family_weights",
    "lr",
    "steps",
    "batch",
    "seed",
    "target",
    "data_alpha",
    "size",
    "channels",
    "factor",
    "depth",
    "pool",
    "eval_size",
    "eval_every",
    "sigma1",
    "sigma2",
    "epsilon",
    "spatial_alpha",
];

#[derive(Debug, Clone)]
pub struct CliConfig {
    pub train: TrainConfig,
    /// Whether `seed` was given explicitly.
    pub seeded: bool,
    pub dog: DoGParams<f64>,
    pub spatial_alpha: f64,
}

impl Default for CliConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            seeded: false,
            dog: DoGParams::default(),
            spatial_alpha: DEFAULT_SPATIAL_ALPHA,
        }
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> CliResult<T>
where
    T::Err: std::fmt::Display,
{
    v.parse()
        .map_err(|e| CliError::Parse(format!("{key}: cannot parse {v:?}: {e}")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> CliResult<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    v.split(',').map(|s| parse(key, s.trim())).collect()
}

/// Comma-separated removed-diagonal counts, e.g. `0,8,10,12`.
pub fn parse_family(spec: &str, weights: Option<&str>) -> CliResult<MaskFamily> {
    let ns: Vec<u8> = parse_list("family", spec)?;
    Ok(match weights {
        Some(w) => MaskFamily::with_weights(&ns, &parse_list::<f64>("family_weights", w)?)?,
        None => MaskFamily::new(&ns)?,
    })
}

impl CliConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut cfg = Self::default();
        let (mut family, mut weights) = (None, None);
        let (mut s1, mut s2, mut eps) = (cfg.dog.sigma1(), cfg.dog.sigma2(), cfg.dog.epsilon());
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| {
                    CliError::Parse(format!("line {}: expected key = value", lineno + 1))
                })?;
            let t = &mut cfg.train;
            match key {
                "objective" => t.objective = value.parse()?,
                "beta" => t.beta = parse(key, value)?,
                "delta" => t.delta = parse(key, value)?,
                "family" => family = Some(value.to_string()),
                "family_weights" => weights = Some(value.to_string()),
                "lr" => t.lr = parse(key, value)?,
                "steps" => t.steps = parse(key, value)?,
                "batch" => t.batch = parse(key, value)?,
                "seed" => {
                    t.seed = parse(key, value)?;
                    cfg.seeded = true;
                }
                "target" => t.target = value.parse()?,
                "data_alpha" => t.data_alpha = parse(key, value)?,
                "size" => t.size = parse(key, value)?,
                "channels" => t.channels = parse(key, value)?,
                "factor" => t.factor = parse(key, value)?,
                "depth" => t.depth = parse(key, value)?,
                "pool" => t.pool = parse(key, value)?,
                "eval_size" => t.eval_size = parse(key, value)?,
                "eval_every" => t.eval_every = parse(key, value)?,
                "sigma1" => s1 = parse(key, value)?,
                "sigma2" => s2 = parse(key, value)?,
                "epsilon" => eps = parse(key, value)?,
                "spatial_alpha" => cfg.spatial_alpha = parse(key, value)?,
                other => {
                    return Err(CliError::Parse(format!(
                        "line {}: unknown key {other:?} (known: {})",
                        lineno + 1,
                        KEYS.join(", ")
                    )))
                }
            }
        }
        if weights.is_some() && family.is_none() {
            family = Some(
                specmatch::mask::DEFAULT_FAMILY
                    .map(|n| n.to_string())
                    .join(","),
            );
        }
        if let Some(f) = family {
            cfg.train.family = parse_family(&f, weights.as_deref())?;
        }
        cfg.dog = DoGParams::new(s1, s2, eps)?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let bytes = read_bytes(p)?;
                let text = String::from_utf8(bytes)
                    .map_err(|_| CliError::Parse(format!("{}: not UTF-8", p.display())))?;
                Self::parse(&text).map_err(|e| match e {
                    CliError::Parse(m) => CliError::Parse(format!("{}: {m}", p.display())),
                    other => other,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use specmatch::train::{Objective, TargetMode};

    #[test]
    fn defaults_for_absent_keys() {
        let cfg = CliConfig::parse("# nothing\n\n").unwrap();
        assert!(!cfg.seeded);
        assert_eq!(cfg.train.steps, TrainConfig::default().steps);
        assert_eq!(cfg.dog, DoGParams::default());
    }

    #[test]
    fn every_key_is_accepted() {
        let text = "objective = dsm\nbeta=0.5\ndelta=0.5\nfamily=0,8\nfamily_weights=1,3\nlr=0.1\nsteps=7\n\
                    batch=2\nseed=9\ntarget=dataset\ndata_alpha=1.5\nsize=32\nchannels=2\nfactor=2\ndepth=3\n\
                    pool=4\neval_size=5\neval_every=6\nsigma1=0.5\nsigma2=3\nepsilon=0.01\nspatial_alpha=0.5 # trailing\n";
        let cfg = CliConfig::parse(text).unwrap();
        let t = &cfg.train;
        assert_eq!(t.objective, Objective::Dsm);
        assert_eq!(t.target, TargetMode::DatasetAverage);
        assert_eq!(t.family.removed(), vec![0, 8]);
        assert_eq!(
            (t.steps, t.batch, t.seed, t.size, t.channels),
            (7, 2, 9, 32, 2)
        );
        assert_eq!(
            (t.factor, t.depth, t.pool, t.eval_size, t.eval_every),
            (2, 3, 4, 5, 6)
        );
        assert_eq!((t.beta, t.delta, t.lr, t.data_alpha), (0.5, 0.5, 0.1, 1.5));
        assert!(cfg.seeded);
        assert_eq!(cfg.dog, DoGParams::new(0.5, 3.0, 0.01).unwrap());
        assert_eq!(cfg.spatial_alpha, 0.5);
        assert_eq!(KEYS.len(), text.lines().count());
    }

    #[test]
    fn unknown_and_malformed_lines_are_rejected() {
        assert!(matches!(
            CliConfig::parse("learning_rate = 1"),
            Err(CliError::Parse(_))
        ));
        assert!(matches!(CliConfig::parse("steps"), Err(CliError::Parse(_))));
        assert!(matches!(
            CliConfig::parse("steps = many"),
            Err(CliError::Parse(_))
        ));
        assert!(matches!(
            CliConfig::parse("sigma1 = 3"),
            Err(CliError::Precondition(_))
        ));
    }
}
