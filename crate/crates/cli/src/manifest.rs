//! The run manifest: every flag of a command, serialized as one JSON line.
//!
//! A manifest round-trips losslessly to and from disk, is embedded as the
//! first line of every trace CSV (`# manifest: {...}`), and can be fed back
//! through `satv2 rerun` to reproduce a run bit for bit.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub input: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub output: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trace: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reference: Option<String>,

    pub lambda: f64,
    pub r1: f64,
    pub r2: f64,
    pub mu: f64,
    pub gamma: f64,
    pub tau: f64,
    pub h: f64,
    pub max_iter: usize,
    pub tol: f64,
    /// `dynamic`, `observed`, `oracle:<path>` or `constant:<alpha>:<beta>`.
    pub weights: String,
    pub first_order: bool,
    pub second_order: bool,

    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub kernel: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mask: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub r3: Option<f64>,

    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub noise_sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub noise_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,

    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub scene: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rows: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cols: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub contrast: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub blur: Option<String>,

    /// Prefix for normalized visualizations of the final weight fields.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub weights_out: Option<String>,

    #[serde(default)]
    pub timing: bool,
    #[serde(default)]
    pub deltas: bool,
}

impl Default for RunManifest {
    fn default() -> Self {
        Self {
            command: String::new(),
            input: None,
            output: None,
            trace: None,
            reference: None,
            lambda: 100.0,
            r1: 1.0,
            r2: 2.0,
            mu: 0.0,
            gamma: 0.0,
            tau: 0.0,
            h: 5.0,
            max_iter: 300,
            tol: 2e-3,
            weights: "dynamic".into(),
            first_order: true,
            second_order: true,
            kernel: None,
            mask: None,
            r3: None,
            noise_sigma: None,
            noise_mean: None,
            seed: None,
            scene: None,
            rows: None,
            cols: None,
            radius: None,
            contrast: None,
            blur: None,
            weights_out: None,
            timing: false,
            deltas: false,
        }
    }
}

pub const MANIFEST_PREFIX: &str = "# manifest: ";

impl RunManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("manifest serializes")
    }

    pub fn from_json(json: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(json)
    }

    /// Extracts the manifest from a file that is either a bare JSON manifest
    /// or a trace CSV starting with the `# manifest:` header line.
    pub fn from_embedded(contents: &str) -> Option<Self> {
        let first = contents.lines().next()?;
        let json = first.strip_prefix(MANIFEST_PREFIX).unwrap_or(first);
        Self::from_json(json.trim()).ok()
    }
}
