//! Run configuration and case manifests (JSON).
//!
//! Every field of [`RunConfig`] is required in the file and unknown fields
//! are rejected. Individual fields can be overridden through environment
//! variables: `TUMORSEG_<SECTION>__<FIELD>=<json value>`, e.g.
//! `TUMORSEG_LESIONWISE__HD95_PENALTY=300` or `TUMORSEG_WORKERS=8`.
//! Values that do not parse as JSON are taken as strings.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::losses::{BlobLossConfig, LossConstants, MsSsimConfig};
use crate::metrics::LesionwiseConfig;
use crate::postprocess::PostprocessConfig;
use crate::volume::{RegionSpec, BRATS_CLASSES};

pub const ENV_PREFIX: &str = "TUMORSEG_";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub regions: Vec<RegionSpec>,
    pub lesionwise: LesionwiseConfig,
    pub postprocess: PostprocessConfig,
    pub msssim: MsSsimConfig,
    pub blob: BlobLossConfig,
    /// Optional; defaults to the standard clamp and smoothing constants.
    #[serde(default)]
    pub loss_constants: LossConstants,
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            regions: RegionSpec::brats(),
            lesionwise: LesionwiseConfig::default(),
            postprocess: PostprocessConfig::default(),
            msssim: MsSsimConfig::default(),
            blob: BlobLossConfig::default(),
            loss_constants: LossConstants::default(),
            workers: 1,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        if self.regions.is_empty() {
            return Err(Error::Config("regions must not be empty".into()));
        }
        for r in &self.regions {
            r.validate(u8::MAX)
                .map_err(|e| Error::Config(format!("regions: {e}")))?;
        }
        self.lesionwise.validate()?;
        self.postprocess.validate(
            BRATS_CLASSES.max(
                self.postprocess
                    .class_priority
                    .iter()
                    .copied()
                    .max()
                    .unwrap_or(0)
                    + 1,
            ),
        )?;
        self.msssim.validate()?;
        self.blob.validate()?;
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("config JSON: {e}")))?;
        Self::from_value(value)
    }

    fn from_value(value: Value) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    /// Loads `path` (or the defaults when `None`) and applies environment
    /// overrides from `vars`.
    pub fn load_with_overrides<I>(path: Option<&Path>, vars: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut value = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::Config(format!("config JSON: {e}")))?
            }
            None => serde_json::to_value(RunConfig::default()).expect("default config serializes"),
        };
        apply_overrides(&mut value, vars)?;
        Self::from_value(value)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Applies `TUMORSEG_A__B=value` pairs to a JSON object tree.
pub fn apply_overrides<I>(value: &mut Value, vars: I) -> Result<()>
where
    I: IntoIterator<Item = (String, String)>,
{
    let mut pairs: Vec<(String, String)> = vars
        .into_iter()
        .filter(|(k, _)| k.starts_with(ENV_PREFIX))
        .collect();
    pairs.sort();
    for (key, raw) in pairs {
        let path: Vec<String> = key[ENV_PREFIX.len()..]
            .split("__")
            .map(|s| s.to_ascii_lowercase())
            .collect();
        let parsed = serde_json::from_str(&raw).unwrap_or(Value::String(raw.clone()));
        let mut node = &mut *value;
        for (depth, part) in path.iter().enumerate() {
            let obj = node.as_object_mut().ok_or_else(|| {
                Error::Config(format!(
                    "{key}: `{}` is not a section",
                    path[..depth].join(".")
                ))
            })?;
            if depth + 1 == path.len() {
                obj.insert(part.clone(), parsed.clone());
                break;
            }
            node = obj
                .get_mut(part)
                .ok_or_else(|| Error::Config(format!("{key}: unknown section `{part}`")))?;
        }
    }
    Ok(())
}

/// One case of a fusion run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseManifest {
    pub case_id: String,
    pub members: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<PathBuf>,
}

/// Reads a JSON list of cases. Relative paths are resolved against the
/// manifest's directory.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<CaseManifest>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cases: Vec<CaseManifest> =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("manifest: {e}")))?;
    let base = path.parent().unwrap_or(Path::new(""));
    for case in &mut cases {
        if case.members.is_empty() {
            return Err(Error::Config(format!(
                "manifest case `{}` lists no members",
                case.case_id
            )));
        }
        for m in &mut case.members {
            if m.is_relative() {
                *m = base.join(&*m);
            }
        }
        if let Some(g) = &mut case.ground_truth {
            if g.is_relative() {
                *g = base.join(&*g);
            }
        }
    }
    Ok(cases)
}
