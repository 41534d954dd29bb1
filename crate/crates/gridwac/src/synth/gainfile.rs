//! Gain file: one metadata line followed by the `K` matrix dump.
//!
//! ```text
//! @gain {"method":"hinf-dae","tag":"nominal","mu":1.9,...}
//! # K 6 70
//! ...
//! ```

use super::{ControllerGain, GainTag, Method, SynthError};
use crate::io::{dump_matrix, parse_matrices};
use serde::{Deserialize, Serialize};
use std::path::Path;

const PREFIX: &str = "@gain ";

#[derive(Debug, Serialize, Deserialize)]
struct GainMeta {
    method: Method,
    tag: GainTag,
    mu: Option<f64>,
    weights_hash: String,
    linear_hash: String,
    case_hash: Option<String>,
    n_d: usize,
    #[serde(default, skip_serializing)]
    seconds: f64,
}

pub fn render_gain(g: &ControllerGain) -> String {
    let meta = GainMeta {
        method: g.method,
        tag: g.tag,
        mu: g.mu,
        weights_hash: g.weights_hash.clone(),
        linear_hash: g.linear_hash.clone(),
        case_hash: g.case_hash.clone(),
        n_d: g.n_d,
        seconds: g.seconds,
    };
    let json = serde_json::to_string(&meta).expect("metadata serializes");
    format!("{PREFIX}{json}\n{}", dump_matrix("K", &g.k))
}

pub fn parse_gain(text: &str) -> Result<ControllerGain, SynthError> {
    let bad = |m: String| SynthError::GainFile(m);
    let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
    let json = first.strip_prefix(PREFIX).ok_or_else(|| bad("missing metadata line".into()))?;
    let meta: GainMeta = serde_json::from_str(json).map_err(|e| bad(e.to_string()))?;
    let mats = parse_matrices(rest).map_err(bad)?;
    let (_, k) = mats
        .into_iter()
        .find(|(name, _)| name == "K")
        .ok_or_else(|| bad("no K matrix".into()))?;
    if k.iter().any(|v| !v.is_finite()) {
        return Err(bad("non-finite gain entry".into()));
    }
    if meta.n_d > k.ncols() {
        return Err(bad(format!("n_d = {} exceeds {} columns", meta.n_d, k.ncols())));
    }
    Ok(ControllerGain {
        k,
        method: meta.method,
        tag: meta.tag,
        mu: meta.mu,
        weights_hash: meta.weights_hash,
        linear_hash: meta.linear_hash,
        case_hash: meta.case_hash,
        n_d: meta.n_d,
        seconds: meta.seconds,
    })
}

pub fn save_gain(g: &ControllerGain, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, render_gain(g))
}

pub fn load_gain(path: &Path) -> Result<ControllerGain, SynthError> {
    let text = std::fs::read_to_string(path).map_err(|e| SynthError::GainFile(format!("{}: {e}", path.display())))?;
    parse_gain(&text)
}
