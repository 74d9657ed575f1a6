//! Run configuration shared by the command-line front-end and its pipelines.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::{check_kind, ModelKind, PerturbationMode};
use crate::krein::TransienceOptions;
use crate::thermo::ScheduleRule;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    /// `Tree`, `HQ` or `GQq`.
    pub kind: String,
    #[serde(rename = "Q")]
    pub degree: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
}

impl ModelSpec {
    pub fn model_kind(&self) -> Result<ModelKind> {
        match (self.kind.as_str(), self.q) {
            ("Tree", None) => Ok(ModelKind::Tree),
            ("HQ", None) => Ok(ModelKind::Ray),
            ("GQq", Some(q)) => Ok(ModelKind::Subtree { q }),
            ("GQq", None) => Err(Error::Config("model kind GQq needs `q`".into())),
            (k @ ("Tree" | "HQ"), Some(_)) => Err(Error::Config(format!("model kind {k} takes no `q`"))),
            (k, _) => Err(Error::Config(format!("unknown model kind `{k}` (expected Tree, HQ or GQq)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub eig: f64,
    pub solve: f64,
    pub secular: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { eig: 1e-10, solve: 1e-10, secular: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, rename_all = "camelCase")]
pub struct RunConfig {
    pub model: ModelSpec,
    pub mode: PerturbationMode,
    pub n_range: Vec<usize>,
    pub beta: Vec<f64>,
    pub schedule: ScheduleRule,
    pub tolerances: Tolerances,
    pub output_dir: PathBuf,
    pub dense_limit: usize,
    pub vertex_limit: usize,
    pub probes: Vec<usize>,
    pub transience: TransienceOptions,
    pub divergence_factor: f64,
    /// Partial-sum cap beyond which the critical-density series is declared divergent.
    pub series_cap: f64,
    pub kmax: usize,
    pub ids_points: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelSpec { kind: "HQ".into(), degree: 3, q: None },
            mode: PerturbationMode::DiagonalUnit,
            n_range: (4..=12).collect(),
            beta: vec![1.0],
            schedule: ScheduleRule::Fregg3(1.0),
            tolerances: Tolerances::default(),
            output_dir: PathBuf::from("out"),
            dense_limit: 4096,
            vertex_limit: crate::graph::DEFAULT_VERTEX_LIMIT,
            probes: vec![0],
            transience: TransienceOptions::default(),
            divergence_factor: 4.0,
            series_cap: 1e6,
            kmax: 200,
            ids_points: 201,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Schema checks beyond what deserialisation enforces. Returns range warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        if self.model.degree < 2 {
            return Err(Error::Config(format!("Q = {} must be at least 2", self.model.degree)));
        }
        let kind = self.model.model_kind()?;
        let warnings = check_kind(self.model.degree, kind).map_err(|e| Error::Config(e.to_string()))?;
        if self.n_range.is_empty() {
            return Err(Error::Config("nRange is empty".into()));
        }
        if self.n_range.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("nRange must be strictly ascending".into()));
        }
        if self.beta.is_empty() || self.beta.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
            return Err(Error::Config("beta list must be nonempty and positive".into()));
        }
        let t = &self.tolerances;
        for (name, v) in [("eig", t.eig), ("solve", t.solve), ("secular", t.secular)] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("tolerance `{name}` must be strictly positive")));
            }
        }
        if !(self.transience.cauchy_gap > 0.0) || !(self.transience.growth_ratio > 1.0) || self.transience.levels < 4 {
            return Err(Error::Config("transience thresholds out of range".into()));
        }
        if !(self.divergence_factor > 1.0) || !(self.series_cap > 0.0) {
            return Err(Error::Config("divergence factor must exceed 1 and the series cap be positive".into()));
        }
        match self.schedule {
            ScheduleRule::Fregg1(v) | ScheduleRule::Fregg3(v) | ScheduleRule::TargetDensity(v) if !(v > 0.0) => {
                return Err(Error::Config("schedule parameter must be positive".into()));
            }
            _ => {}
        }
        if self.dense_limit == 0 || self.kmax == 0 || self.ids_points < 2 {
            return Err(Error::Config("dense limit, kmax and ids points must be positive".into()));
        }
        Ok(warnings)
    }

    pub fn model_kind(&self) -> Result<ModelKind> {
        self.model.model_kind()
    }

    /// Canonical JSON used for hashing.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("configuration serialises")
    }

    /// Hex SHA-256 of the canonical JSON. The output directory does not
    /// change any result, so it is left out.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        let digest = Sha256::digest(c.canonical_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        assert!(RunConfig::default().validate().unwrap().is_empty());
    }

    #[test]
    fn json_round_trip_and_hash() {
        let c = RunConfig::default();
        let back = RunConfig::from_json(&c.canonical_json()).unwrap();
        assert_eq!(c, back);
        assert_eq!(c.hash(), back.hash());
        let mut d = c.clone();
        d.beta = vec![2.0];
        assert_ne!(c.hash(), d.hash());
        d = c.clone();
        d.output_dir = PathBuf::from("elsewhere");
        assert_eq!(c.hash(), d.hash());
    }

    #[test]
    fn partial_documents_fill_defaults() {
        let c = RunConfig::from_json(r#"{"model":{"kind":"GQq","Q":3,"q":2},"nRange":[8,10]}"#).unwrap();
        assert_eq!(c.model_kind().unwrap(), ModelKind::Subtree { q: 2 });
        assert_eq!(c.beta, vec![1.0]);
        let c = RunConfig::from_json(r#"{"schedule":{"rule":"Fixed","value":-0.5}}"#).unwrap();
        assert_eq!(c.schedule, ScheduleRule::Fixed(-0.5));
    }

    #[test]
    fn rejects_bad_documents() {
        assert!(RunConfig::from_json(r#"{"bogus":1}"#).is_err());
        let bad = |s: &str| RunConfig::from_json(s).unwrap().validate().is_err();
        assert!(bad(r#"{"model":{"kind":"HQ","Q":1}}"#));
        assert!(bad(r#"{"nRange":[]}"#));
        assert!(bad(r#"{"nRange":[5,4]}"#));
        assert!(bad(r#"{"tolerances":{"eig":0.0}}"#));
        assert!(bad(r#"{"beta":[-1.0]}"#));
        assert!(bad(r#"{"model":{"kind":"GQq","Q":3}}"#));
        assert!(bad(r#"{"model":{"kind":"Foo","Q":3}}"#));
    }

    #[test]
    fn range_warning_for_large_degree() {
        let c = RunConfig::from_json(r#"{"model":{"kind":"HQ","Q":8}}"#).unwrap();
        assert!(!c.validate().unwrap().is_empty());
    }
}
