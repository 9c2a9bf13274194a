//! Feeder files and the bundled synthetic feeder.
//!
//! A feeder file is delimited text (comma or tab) with the header
//! `transformer_id,rated_kva,has_pv,customer_count,load_0000,...` and one row
//! per transformer carrying its weekly net load in kW. A sidecar
//! `<stem>.meta.json` records the data source, week label, and units.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hosting::derive_seed;
use crate::model::TransformerCase;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeederMetadata {
    pub source: String,
    pub week_label: String,
    pub units: String,
}

impl Default for FeederMetadata {
    fn default() -> Self {
        FeederMetadata {
            source: "unknown".into(),
            week_label: "unspecified".into(),
            units: "kW".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeederDataset {
    pub transformers: Vec<TransformerCase>,
    pub metadata: FeederMetadata,
}

impl FeederDataset {
    pub fn slot_count(&self) -> Option<usize> {
        self.transformers.first().map(|t| t.household_load_kw.len())
    }

    pub fn validate(&self, slot_count: usize) -> Result<()> {
        for t in &self.transformers {
            t.validate(slot_count)?;
        }
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&TransformerCase> {
        self.transformers.iter().find(|t| t.transformer_id == id)
    }
}

/// Path of the metadata sidecar of a feeder file.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

fn parse_error(
    path: &Path,
    row: usize,
    column: impl Into<String>,
    message: impl Into<String>,
) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        row,
        column: column.into(),
        message: message.into(),
    }
}

pub fn load_feeder(path: &Path) -> Result<FeederDataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut dataset = parse_feeder(&text, path)?;
    let side = sidecar_path(path);
    if side.exists() {
        let meta = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        dataset.metadata = serde_json::from_str(&meta)?;
    } else {
        dataset.metadata.source = path.display().to_string();
    }
    Ok(dataset)
}

/// Parses feeder text; `path` is only used in error messages.
pub fn parse_feeder(text: &str, path: &Path) -> Result<FeederDataset> {
    let first = text.lines().next().unwrap_or("");
    let delimiter = if first.contains('\t') { b'\t' } else { b',' };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let fixed = ["transformer_id", "rated_kva", "has_pv", "customer_count"];
    for (k, name) in fixed.iter().enumerate() {
        if header.get(k).map(String::as_str) != Some(*name) {
            return Err(parse_error(
                path,
                1,
                *name,
                format!("header column {} must be `{name}`", k + 1),
            ));
        }
    }
    let slots = header.len() - fixed.len();
    for (k, name) in header[fixed.len()..].iter().enumerate() {
        if *name != format!("load_{k:04}") {
            return Err(parse_error(
                path,
                1,
                name.clone(),
                format!("expected load column load_{k:04}"),
            ));
        }
    }
    if slots == 0 {
        return Err(parse_error(path, 1, "load_0000", "no load columns"));
    }
    let mut transformers = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 2;
        let id = record.get(0).unwrap_or("").to_string();
        if id.is_empty() {
            return Err(parse_error(
                path,
                row,
                "transformer_id",
                "empty transformer id",
            ));
        }
        if record.len() != header.len() {
            return Err(parse_error(
                path,
                row,
                "load",
                format!(
                    "transformer {id} has {} load points, expected {slots}",
                    record.len().saturating_sub(fixed.len())
                ),
            ));
        }
        let num = |k: usize| -> Result<f64> {
            let raw = record.get(k).unwrap_or("");
            raw.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| {
                    parse_error(
                        path,
                        row,
                        header[k].clone(),
                        format!("`{raw}` is not a number"),
                    )
                })
        };
        let rated_kva = num(1)?;
        let has_pv = match record.get(2).unwrap_or("").to_ascii_lowercase().as_str() {
            "true" | "1" | "yes" => true,
            "false" | "0" | "no" => false,
            other => {
                return Err(parse_error(
                    path,
                    row,
                    "has_pv",
                    format!("`{other}` is not a boolean"),
                ))
            }
        };
        let customer_count =
            record.get(3).unwrap_or("").parse::<usize>().map_err(|_| {
                parse_error(path, row, "customer_count", "not a non-negative integer")
            })?;
        let load = (fixed.len()..header.len())
            .map(num)
            .collect::<Result<Vec<f64>>>()?;
        if !has_pv {
            if let Some(k) = load.iter().position(|x| *x < 0.0) {
                return Err(parse_error(
                    path,
                    row,
                    header[fixed.len() + k].clone(),
                    format!("transformer {id} has negative load but has_pv is false"),
                ));
            }
        }
        transformers.push(TransformerCase {
            transformer_id: id,
            rated_kva,
            household_load_kw: load,
            has_pv,
            customer_count,
        });
    }
    Ok(FeederDataset {
        transformers,
        metadata: FeederMetadata::default(),
    })
}

pub fn feeder_to_string(dataset: &FeederDataset) -> Result<String> {
    let slots = dataset.slot_count().unwrap_or(0);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = ["transformer_id", "rated_kva", "has_pv", "customer_count"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((0..slots).map(|k| format!("load_{k:04}")));
    w.write_record(&header)?;
    for t in &dataset.transformers {
        if t.household_load_kw.len() != slots {
            return Err(Error::Dimension(format!(
                "transformer {} has {} load points, expected {slots}",
                t.transformer_id,
                t.household_load_kw.len()
            )));
        }
        let mut rec = vec![
            t.transformer_id.clone(),
            format!("{:?}", t.rated_kva),
            t.has_pv.to_string(),
            t.customer_count.to_string(),
        ];
        rec.extend(t.household_load_kw.iter().map(|x| format!("{x:?}")));
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::config(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::config(e.to_string()))
}

/// Writes the feeder file and its metadata sidecar.
pub fn save_feeder(dataset: &FeederDataset, path: &Path) -> Result<()> {
    std::fs::write(path, feeder_to_string(dataset)?).map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    std::fs::write(&side, serde_json::to_string_pretty(&dataset.metadata)?)
        .map_err(|e| Error::io(&side, e))
}

/// Household and PV shape coefficients of the synthetic feeder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProfileShape {
    /// Constant per-home draw (kW).
    pub base_kw: f64,
    /// Amplitude of the diurnal cosine peaking at `diurnal_peak_hour`.
    pub diurnal_kw: f64,
    pub diurnal_peak_hour: f64,
    /// Evening bump (kW), its centre and width in hours.
    pub evening_kw: f64,
    pub evening_hour: f64,
    pub evening_width_h: f64,
    /// Extra weekend midday use (kW).
    pub weekend_kw: f64,
    /// Per-slot multiplicative noise standard deviation.
    pub noise_sd: f64,
    /// Per-transformer scale drawn uniformly from `1 ± scale_spread`.
    pub scale_spread: f64,
    /// PV peak output per home (kW), bell centre and width in hours.
    pub pv_peak_kw: f64,
    pub pv_noon_hour: f64,
    pub pv_width_h: f64,
}

impl Default for ProfileShape {
    fn default() -> Self {
        ProfileShape {
            base_kw: 2.3,
            diurnal_kw: 0.5,
            diurnal_peak_hour: 16.0,
            evening_kw: 0.3,
            evening_hour: 19.0,
            evening_width_h: 1.6,
            weekend_kw: 0.25,
            noise_sd: 0.04,
            scale_spread: 0.08,
            pv_peak_kw: 4.5,
            pv_noon_hour: 12.0,
            pv_width_h: 2.4,
        }
    }
}

impl ProfileShape {
    /// Per-home household draw at `hour` (kW).
    pub fn household_kw(&self, hour: f64, weekend: bool) -> f64 {
        let diurnal = 0.5 * (1.0 + (2.0 * PI * (hour - self.diurnal_peak_hour) / 24.0).cos());
        let z = (hour - self.evening_hour) / self.evening_width_h;
        let evening = (-0.5 * z * z).exp();
        let weekend_bump = if weekend {
            let w = (hour - 13.0) / 3.0;
            self.weekend_kw * (-0.5 * w * w).exp()
        } else {
            0.0
        };
        self.base_kw + self.diurnal_kw * diurnal + self.evening_kw * evening + weekend_bump
    }

    /// Per-home PV output at `hour` (kW); zero outside 06:00-18:00.
    pub fn pv_kw(&self, hour: f64) -> f64 {
        if !(6.0..18.0).contains(&hour) {
            return 0.0;
        }
        let z = (hour - self.pv_noon_hour) / self.pv_width_h;
        self.pv_peak_kw * (-0.5 * z * z).exp()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub transformer_count: usize,
    /// Customers per transformer for each group; transformer `i` is in
    /// group `i % groups.len()`.
    pub groups: Vec<usize>,
    pub pv_fraction: f64,
    pub seed: u64,
    pub rated_kva: f64,
    pub slots_per_day: usize,
    pub shape: ProfileShape,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            transformer_count: 10,
            groups: vec![9, 10, 11, 12, 13],
            pv_fraction: 0.3,
            seed: 7,
            rated_kva: 50.0,
            slots_per_day: 96,
            shape: ProfileShape::default(),
        }
    }
}

impl SynthSpec {
    pub fn with_count(transformer_count: usize) -> Self {
        SynthSpec {
            transformer_count,
            ..SynthSpec::default()
        }
    }

    pub fn pv_count(&self) -> usize {
        (self.pv_fraction * self.transformer_count as f64).round() as usize
    }

    /// Indices of PV transformers, spread evenly over the feeder.
    pub fn pv_indices(&self) -> Vec<usize> {
        let (n, k) = (
            self.transformer_count,
            self.pv_count().min(self.transformer_count),
        );
        (0..k).map(|j| ((2 * j + 1) * n) / (2 * k)).collect()
    }

    pub fn group_of(&self, i: usize) -> usize {
        i % self.groups.len()
    }
}

/// Deterministic synthetic feeder with transformers `T01`, `T02`, ...
pub fn synth_feeder(spec: &SynthSpec) -> Result<FeederDataset> {
    if spec.transformer_count == 0 || spec.groups.is_empty() || spec.groups.contains(&0) {
        return Err(Error::config(
            "synthetic feeder needs at least one transformer, group, and customer",
        ));
    }
    if !(0.0..=1.0).contains(&spec.pv_fraction) {
        return Err(Error::config("pv_fraction must lie in [0, 1]"));
    }
    if spec.slots_per_day == 0 || 1440 % spec.slots_per_day != 0 {
        return Err(Error::config(
            "slots_per_day must divide a day into whole minutes",
        ));
    }
    let pv = spec.pv_indices();
    let width = spec.transformer_count.to_string().len().max(2);
    let slots = 7 * spec.slots_per_day;
    let dt = 24.0 / spec.slots_per_day as f64;
    let noise = Normal::new(0.0, spec.shape.noise_sd).map_err(|e| Error::config(e.to_string()))?;
    let scale_dist =
        Uniform::new_inclusive(1.0 - spec.shape.scale_spread, 1.0 + spec.shape.scale_spread)
            .map_err(|e| Error::config(e.to_string()))?;
    let transformers = (0..spec.transformer_count)
        .map(|i| {
            let id = format!("T{:0width$}", i + 1);
            let customers = spec.groups[spec.group_of(i)];
            let has_pv = pv.contains(&i);
            let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(spec.seed, &["feeder", &id]));
            let scale = scale_dist.sample(&mut rng);
            let load = (0..slots)
                .map(|t| {
                    let day = t / spec.slots_per_day;
                    let hour = (t % spec.slots_per_day) as f64 * dt;
                    let jitter = (1.0 + noise.sample(&mut rng)).max(0.5);
                    let house =
                        spec.shape.household_kw(hour, day >= 5) * customers as f64 * scale * jitter;
                    let solar = if has_pv {
                        spec.shape.pv_kw(hour) * customers as f64
                    } else {
                        0.0
                    };
                    round3(house - solar)
                })
                .collect();
            TransformerCase {
                transformer_id: id,
                rated_kva: spec.rated_kva,
                household_load_kw: load,
                has_pv,
                customer_count: customers,
            }
        })
        .collect();
    Ok(FeederDataset {
        transformers,
        metadata: FeederMetadata {
            source: format!(
                "synthetic feeder: {} transformers, seed {}, pv fraction {}",
                spec.transformer_count, spec.seed, spec.pv_fraction
            ),
            week_label: "synthetic summer week".into(),
            units: "kW".into(),
        },
    })
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}
