use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::FieldSchema;
use crate::error::{Error, Result};
use crate::model::Hyperparameters;
use crate::sampler::ChainConfig;
use crate::serde_util::json_sha256;

/// Where the lists live and how to read them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestSpec {
    /// One delimited file per list, each with a header row.
    pub files: Vec<PathBuf>,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    /// Modelled columns, in this order.
    pub fields: Vec<String>,
    /// Column holding the true individual; never modelled.
    #[serde(default)]
    pub truth_column: Option<String>,
    /// Fields whose exact agreement is required for a link.
    #[serde(default)]
    pub block_keys: Vec<String>,
    /// Category dictionary file. Written after ingest unless `freeze_dictionary`
    /// is set, in which case it is read and unseen values are an error.
    #[serde(default)]
    pub dictionary: Option<PathBuf>,
    #[serde(default)]
    pub freeze_dictionary: bool,
}

fn default_delimiter() -> char {
    ','
}

impl IngestSpec {
    pub fn validate(&self) -> Result<()> {
        if self.files.is_empty() {
            return Err(Error::Config("ingest.files is empty".into()));
        }
        if self.fields.is_empty() {
            return Err(Error::Config("ingest.fields is empty".into()));
        }
        if !self.delimiter.is_ascii() {
            return Err(Error::Config("the delimiter must be a single ASCII character".into()));
        }
        if let Some(t) = &self.truth_column {
            if self.fields.contains(t) {
                return Err(Error::Config(format!("truth column {t:?} is also listed as a field")));
            }
        }
        for key in &self.block_keys {
            if !self.fields.contains(key) {
                return Err(Error::Config(format!("block key {key:?} is not a field")));
            }
        }
        if self.freeze_dictionary && self.dictionary.is_none() {
            return Err(Error::Config("freeze_dictionary needs a dictionary path".into()));
        }
        Ok(())
    }
}

/// Optional per-field replacement of the prior defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldPrior {
    pub a: Option<f64>,
    #[serde(default, with = "opt_inf")]
    pub b: Option<f64>,
    pub mu: Option<f64>,
}

/// Beta and Dirichlet prior settings. `b = inf` (or `"inf"`) forbids
/// distortion of a field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorSpec {
    pub a: f64,
    #[serde(with = "crate::serde_util::f64_inf")]
    pub b: f64,
    pub mu: f64,
    pub fields: BTreeMap<String, FieldPrior>,
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self { a: 1.0, b: 99.0, mu: 1.0, fields: BTreeMap::new() }
    }
}

impl PriorSpec {
    pub fn resolve(&self, schema: &FieldSchema) -> Result<Hyperparameters> {
        if let Some(name) = self.fields.keys().find(|n| schema.index_of(n).is_none()) {
            return Err(Error::Config(format!("prior override for unknown field {name:?}")));
        }
        let mut hp = Hyperparameters::uniform(schema, self.a, self.b, self.mu);
        for (name, o) in &self.fields {
            let l = schema.index_of(name).expect("checked above");
            if let Some(a) = o.a {
                hp.a[l] = a;
            }
            if let Some(b) = o.b {
                hp.b[l] = b;
            }
            if let Some(mu) = o.mu {
                hp.mu[l] = vec![mu; schema.level_count(l) as usize];
            }
        }
        hp.validate(schema)?;
        Ok(hp)
    }
}

mod opt_inf {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => crate::serde_util::f64_inf::serialize(v, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        #[derive(Deserialize)]
        struct Wrap(#[serde(with = "crate::serde_util::f64_inf")] f64);
        Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
    }
}

/// A whole `link` run, read from one TOML file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub ingest: IngestSpec,
    #[serde(default)]
    pub prior: PriorSpec,
    #[serde(default)]
    pub chain: ChainConfig,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Default seed; the command line and environment take precedence.
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Read and validate; relative paths resolve against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut config = Self::from_toml(&std::fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        config.ingest.files.iter_mut().for_each(fix);
        config.ingest.dictionary.as_mut().map(fix);
        fix(&mut config.output);
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.ingest.validate()?;
        self.chain.validate()?;
        for (name, f) in &self.prior.fields {
            if !self.ingest.fields.contains(name) {
                return Err(Error::Config(format!("prior override for unknown field {name:?}")));
            }
            if f.a.is_some_and(|a| !(a > 0.0)) || f.b.is_some_and(|b| !(b > 0.0)) || f.mu.is_some_and(|m| !(m > 0.0)) {
                return Err(Error::Config(format!("prior override for {name:?} must be positive")));
            }
        }
        if !(self.prior.a > 0.0 && self.prior.b > 0.0 && self.prior.mu > 0.0) {
            return Err(Error::Config("prior a, b and mu must be positive".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the configuration with the seed and output directory left
    /// out, so overriding either keeps the hash.
    pub fn hash(&self) -> String {
        json_sha256(&Self { seed: None, output: PathBuf::new(), ..self.clone() })
    }
}
