//! Flat key-value model configuration.
//!
//! ```ini
//! gamma = 0.1070
//! lambda = 1.3274
//! epsilon = 0.0126
//! d = 0.0070
//! p = 0.2035
//! lon_min = 131
//! lon_max = 140
//! lat_min = 34
//! lat_max = 39
//! nu = probability   ; optional
//! ```
//!
//! Section headers are allowed and ignored, so the same keys may be grouped
//! under `[model]` and `[region]`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use declust::{ModelParams, NuConvention, Region};
use ini::Ini;

use crate::error::{CliError, CliResult};

const PARAM_KEYS: [&str; 5] = ["gamma", "lambda", "epsilon", "d", "p"];
const REGION_KEYS: [&str; 4] = ["lon_min", "lon_max", "lat_min", "lat_max"];

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub region: Region<f64>,
    pub params: Option<ModelParams<f64>>,
    pub nu: Option<NuConvention>,
}

impl Config {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| CliError::data(e.to_string()))?;
        let mut values: BTreeMap<String, String> = BTreeMap::new();
        for (_, props) in ini.iter() {
            for (k, v) in props.iter() {
                let key = k.trim().to_ascii_lowercase();
                if values.insert(key.clone(), v.trim().to_string()).is_some() {
                    return Err(CliError::data(format!("duplicate key '{key}'")));
                }
            }
        }
        for key in values.keys() {
            let known = PARAM_KEYS.contains(&key.as_str())
                || REGION_KEYS.contains(&key.as_str())
                || key == "nu";
            if !known {
                return Err(CliError::data(format!("unknown key '{key}'")));
            }
        }
        let number = |key: &str| -> CliResult<Option<f64>> {
            values
                .get(key)
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| CliError::data(format!("'{key}' is not a number: '{v}'")))
                })
                .transpose()
        };

        let mut bounds = [0.0; 4];
        for (slot, key) in bounds.iter_mut().zip(REGION_KEYS) {
            *slot = number(key)?.ok_or_else(|| CliError::data(format!("missing key '{key}'")))?;
        }
        let region = Region::new(bounds[0], bounds[1], bounds[2], bounds[3])?;

        let found: Vec<Option<f64>> = PARAM_KEYS.iter().map(|k| number(k)).collect::<CliResult<_>>()?;
        let params = if found.iter().all(Option::is_none) {
            None
        } else {
            let missing: Vec<&str> = PARAM_KEYS
                .iter()
                .zip(&found)
                .filter(|(_, v)| v.is_none())
                .map(|(k, _)| *k)
                .collect();
            if !missing.is_empty() {
                return Err(CliError::data(format!("missing key(s) {}", missing.join(", "))));
            }
            let v: Vec<f64> = found.into_iter().flatten().collect();
            Some(ModelParams::new(v[0], v[1], v[2], v[3], v[4])?)
        };
        let nu = values.get("nu").map(|v| v.parse()).transpose()?;
        Ok(Self { region, params, nu })
    }

    pub fn require_params(&self) -> CliResult<ModelParams<f64>> {
        self.params
            .ok_or_else(|| CliError::data("configuration has no model parameters (gamma, lambda, epsilon, d, p)"))
    }
}

/// Serializes parameters and region so that [`Config::parse`] restores them
/// exactly.
pub fn to_ini(params: &ModelParams<f64>, region: &Region<f64>, nu: NuConvention) -> String {
    let mut s = String::new();
    for (k, v) in PARAM_KEYS.iter().zip([params.gamma, params.lambda, params.epsilon, params.d, params.p]) {
        let _ = writeln!(s, "{k} = {v}");
    }
    let bounds = [region.lon_min(), region.lon_max(), region.lat_min(), region.lat_max()];
    for (k, v) in REGION_KEYS.iter().zip(bounds) {
        let _ = writeln!(s, "{k} = {v}");
    }
    let _ = writeln!(s, "nu = {nu}");
    s
}
