//! Uncertain EV parameters: Monte Carlo scenarios for the chance-constrained
//! formulation and the single worst-case realization for the robust one.
//!
//! Each parameter is a chi-squared variate mapped affinely onto its support.
//! Draws above the `tail_quantile` of the chi-squared law are rejected, so
//! values land in the closed range without an atom at the boundary.

use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{ChiSquared, Distribution};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared as ChiSquaredLaw, ContinuousCDF};

use crate::error::{Error, Result};
use crate::par::{map_indexed, ExecMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Skew {
    /// Mass near the minimum, long tail toward the maximum.
    RightSkewed,
    /// Mirror image: mass near the maximum.
    LeftSkewed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamRange {
    pub min: f64,
    pub max: f64,
}

impl ParamRange {
    pub const fn new(min: f64, max: f64) -> Self {
        ParamRange { min, max }
    }

    pub fn width(&self) -> f64 {
        self.max - self.min
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.min + self.max)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.min && x <= self.max
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UncertaintyConfig {
    pub battery_kwh_range: ParamRange,
    pub battery_skew: Skew,
    pub soc_init_frac_range: ParamRange,
    pub soc_skew: Skew,
    pub one_way_miles_range: ParamRange,
    pub miles_skew: Skew,
    pub chi2_dof: u32,
    pub tail_quantile: f64,
    pub energy_per_mile: f64,
    pub charge_power_kw: f64,
    pub efficiency: f64,
    pub soc_floor_frac: f64,
    /// Number of driving slots one one-way trip occupies.
    pub trip_slots: usize,
}

impl Default for UncertaintyConfig {
    fn default() -> Self {
        UncertaintyConfig {
            battery_kwh_range: ParamRange::new(77.0, 118.0),
            battery_skew: Skew::RightSkewed,
            soc_init_frac_range: ParamRange::new(0.80, 0.95),
            soc_skew: Skew::RightSkewed,
            one_way_miles_range: ParamRange::new(27.0, 37.0),
            miles_skew: Skew::LeftSkewed,
            chi2_dof: 4,
            tail_quantile: 0.999,
            energy_per_mile: 0.32,
            charge_power_kw: 7.2,
            efficiency: 0.8,
            soc_floor_frac: 0.2,
            trip_slots: 4,
        }
    }
}

impl UncertaintyConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, r) in [
            ("battery_kwh_range", self.battery_kwh_range),
            ("soc_init_frac_range", self.soc_init_frac_range),
            ("one_way_miles_range", self.one_way_miles_range),
        ] {
            if !(r.min < r.max) || r.min < 0.0 {
                return Err(Error::config(format!(
                    "{name} needs 0 <= min < max, got {r:?}"
                )));
            }
        }
        let frac = |x: f64| x > 0.0 && x <= 1.0;
        if !frac(self.soc_init_frac_range.min) || !frac(self.soc_init_frac_range.max) {
            return Err(Error::config("SoC fractions must lie in (0, 1]"));
        }
        if !frac(self.efficiency) || !frac(self.soc_floor_frac) {
            return Err(Error::config("efficiency and SoC floor must lie in (0, 1]"));
        }
        if self.soc_floor_frac > self.soc_init_frac_range.min {
            return Err(Error::config("SoC floor exceeds the lowest initial SoC"));
        }
        if self.chi2_dof < 1 {
            return Err(Error::config("chi2_dof must be at least 1"));
        }
        if !(self.tail_quantile > 0.5 && self.tail_quantile < 1.0) {
            return Err(Error::config("tail_quantile must lie in (0.5, 1)"));
        }
        if self.charge_power_kw <= 0.0 || self.energy_per_mile <= 0.0 || self.trip_slots == 0 {
            return Err(Error::config(
                "charge power, energy per mile, and trip slots must be positive",
            ));
        }
        Ok(())
    }

    /// Energy one one-way trip of `miles` consumes.
    pub fn trip_energy_kwh(&self, miles: f64) -> f64 {
        miles * self.energy_per_mile
    }

    pub fn delta_per_drive_slot(&self, miles: f64) -> f64 {
        self.trip_energy_kwh(miles) / self.trip_slots as f64
    }

    fn draw_for(&self, battery_kwh: f64, soc_frac: f64, one_way_miles: f64) -> EvDraw {
        let soc = soc_frac * battery_kwh;
        EvDraw {
            battery_kwh,
            soc_init_kwh: soc,
            soc_final_kwh: soc,
            one_way_miles,
            delta_kwh_per_drive_slot: self.delta_per_drive_slot(one_way_miles),
        }
    }
}

/// One EV's parameters within a scenario.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvDraw {
    pub battery_kwh: f64,
    pub soc_init_kwh: f64,
    pub soc_final_kwh: f64,
    pub one_way_miles: f64,
    pub delta_kwh_per_drive_slot: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub scenario_id: usize,
    pub evs: Vec<EvDraw>,
}

impl Scenario {
    pub fn ev_count(&self) -> usize {
        self.evs.len()
    }

    /// The same scenario restricted to its first `n` EVs.
    pub fn truncated(&self, n: usize) -> Scenario {
        Scenario {
            scenario_id: self.scenario_id,
            evs: self.evs[..n.min(self.evs.len())].to_vec(),
        }
    }
}

/// Maps chi-squared draws onto a closed range.
struct SkewedSampler {
    chi2: ChiSquared<f64>,
    cap: f64,
}

impl SkewedSampler {
    fn new(cfg: &UncertaintyConfig) -> Self {
        let dof = f64::from(cfg.chi2_dof);
        let cap = ChiSquaredLaw::new(dof)
            .expect("dof >= 1")
            .inverse_cdf(cfg.tail_quantile);
        SkewedSampler {
            chi2: ChiSquared::new(dof).expect("dof >= 1"),
            cap,
        }
    }

    fn unit<R: rand::Rng>(&self, rng: &mut R) -> f64 {
        loop {
            let x = self.chi2.sample(rng);
            if x <= self.cap {
                return x / self.cap;
            }
        }
    }

    fn draw<R: rand::Rng>(&self, rng: &mut R, range: ParamRange, skew: Skew) -> f64 {
        let u = self.unit(rng);
        match skew {
            Skew::RightSkewed => range.min + range.width() * u,
            Skew::LeftSkewed => range.max - range.width() * u,
        }
    }
}

/// Independent generator for scenario `index`; substreams make the output
/// independent of evaluation order.
fn scenario_rng(seed: u64, index: usize) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

pub fn sample_scenarios(
    cfg: &UncertaintyConfig,
    ev_count: usize,
    scenario_count: usize,
    seed: u64,
) -> Vec<Scenario> {
    sample_scenarios_with(ExecMode::default(), cfg, ev_count, scenario_count, seed)
}

pub fn sample_scenarios_with(
    mode: ExecMode,
    cfg: &UncertaintyConfig,
    ev_count: usize,
    scenario_count: usize,
    seed: u64,
) -> Vec<Scenario> {
    let sampler = SkewedSampler::new(cfg);
    map_indexed(mode, scenario_count, |xi| {
        let mut rng = scenario_rng(seed, xi);
        let evs = (0..ev_count)
            .map(|_| {
                let battery = sampler.draw(&mut rng, cfg.battery_kwh_range, cfg.battery_skew);
                let frac = sampler.draw(&mut rng, cfg.soc_init_frac_range, cfg.soc_skew);
                let miles = sampler.draw(&mut rng, cfg.one_way_miles_range, cfg.miles_skew);
                cfg.draw_for(battery, frac, miles)
            })
            .collect();
        Scenario {
            scenario_id: xi,
            evs,
        }
    })
}

/// Smallest battery, lowest initial SoC, and longest commute for every EV.
pub fn robust_extremes(cfg: &UncertaintyConfig, ev_count: usize) -> Scenario {
    let draw = cfg.draw_for(
        cfg.battery_kwh_range.min,
        cfg.soc_init_frac_range.min,
        cfg.one_way_miles_range.max,
    );
    Scenario {
        scenario_id: 0,
        evs: vec![draw; ev_count],
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ScenarioRecord {
    scenario_id: usize,
    ev: usize,
    battery_kwh: f64,
    soc_init_kwh: f64,
    soc_final_kwh: f64,
    one_way_miles: f64,
    delta_kwh_per_drive_slot: f64,
}

/// Writes one CSV record per (scenario, EV).
pub fn write_scenarios<W: Write>(writer: W, scenarios: &[Scenario]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for s in scenarios {
        for (ev, d) in s.evs.iter().enumerate() {
            w.serialize(ScenarioRecord {
                scenario_id: s.scenario_id,
                ev,
                battery_kwh: d.battery_kwh,
                soc_init_kwh: d.soc_init_kwh,
                soc_final_kwh: d.soc_final_kwh,
                one_way_miles: d.one_way_miles,
                delta_kwh_per_drive_slot: d.delta_kwh_per_drive_slot,
            })?;
        }
    }
    w.flush().map_err(|e| Error::io("<scenario writer>", e))?;
    Ok(())
}

pub fn read_scenarios<R: Read>(reader: R) -> Result<Vec<Scenario>> {
    let mut out: Vec<Scenario> = Vec::new();
    for rec in csv::Reader::from_reader(reader).deserialize() {
        let r: ScenarioRecord = rec?;
        if out.last().map(|s| s.scenario_id) != Some(r.scenario_id) {
            out.push(Scenario {
                scenario_id: r.scenario_id,
                evs: Vec::new(),
            });
        }
        let s = out.last_mut().expect("pushed above");
        if r.ev != s.evs.len() {
            return Err(Error::Dimension(format!(
                "scenario {} lists EV {} out of order",
                r.scenario_id, r.ev
            )));
        }
        s.evs.push(EvDraw {
            battery_kwh: r.battery_kwh,
            soc_init_kwh: r.soc_init_kwh,
            soc_final_kwh: r.soc_final_kwh,
            one_way_miles: r.one_way_miles,
            delta_kwh_per_drive_slot: r.delta_kwh_per_drive_slot,
        });
    }
    Ok(out)
}

pub fn save_scenarios(path: &Path, scenarios: &[Scenario]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_scenarios(std::io::BufWriter::new(file), scenarios)
}

pub fn load_scenarios(path: &Path) -> Result<Vec<Scenario>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_scenarios(std::io::BufReader::new(file))
}
