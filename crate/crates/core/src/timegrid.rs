//! Weekly time discretization with tariff tiers, PV windows, and
//! arrangement-specific charging priorities.
//!
//! The week runs Monday 00:00 to Sunday 24:00. Slot `t` covers
//! `[t * slot_duration_h, (t + 1) * slot_duration_h)` hours after Monday
//! midnight. The production grid has 96 slots per day; coarser grids are
//! accepted so that exhaustive-enumeration tests stay tractable.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DAYS_PER_WEEK: usize = 7;
pub const DEFAULT_SLOTS_PER_DAY: usize = 96;
const MINUTES_PER_DAY: usize = 24 * 60;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Day {
    Mon,
    Tue,
    Wed,
    Thu,
    Fri,
    Sat,
    Sun,
}

impl Day {
    pub const ALL: [Day; 7] = [
        Day::Mon,
        Day::Tue,
        Day::Wed,
        Day::Thu,
        Day::Fri,
        Day::Sat,
        Day::Sun,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Day {
        Day::ALL[i % DAYS_PER_WEEK]
    }

    pub fn is_weekday(self) -> bool {
        self.index() < 5
    }

    pub fn is_weekend(self) -> bool {
        !self.is_weekday()
    }

    pub fn short_name(self) -> &'static str {
        ["Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"][self.index()]
    }
}

impl fmt::Display for Day {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for Day {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        Day::ALL
            .into_iter()
            .find(|d| lower.starts_with(&d.short_name().to_ascii_lowercase()))
            .ok_or_else(|| Error::config(format!("unknown day `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TariffTier {
    SuperOffPeak,
    OffPeak,
    OnPeak,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PriorityClass {
    P1,
    P2,
    P3,
    Neutral,
}

/// Which days a tariff window applies to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DaySelector {
    All,
    Weekdays,
    Weekends,
    Days(Vec<Day>),
}

impl DaySelector {
    pub fn contains(&self, day: Day) -> bool {
        match self {
            DaySelector::All => true,
            DaySelector::Weekdays => day.is_weekday(),
            DaySelector::Weekends => day.is_weekend(),
            DaySelector::Days(days) => days.contains(&day),
        }
    }
}

/// One tariff tier over a daily hour interval on the selected days.
///
/// When `end_hour <= start_hour` the window wraps within the same day and
/// covers `[0, end_hour) ∪ [start_hour, 24)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TariffWindow {
    pub tier: TariffTier,
    pub days: DaySelector,
    pub start_hour: f64,
    pub end_hour: f64,
}

impl TariffWindow {
    fn covers_minute(&self, day: Day, minute_of_day: usize) -> bool {
        if !self.days.contains(day) {
            return false;
        }
        let h = minute_of_day as f64 / 60.0;
        hour_in_window(h, self.start_hour, self.end_hour)
    }
}

fn hour_in_window(h: f64, start: f64, end: f64) -> bool {
    if start < end {
        h >= start && h < end
    } else {
        h >= start || h < end
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TierRates {
    pub super_off_peak: f64,
    pub off_peak: f64,
    pub on_peak: f64,
}

impl Default for TierRates {
    fn default() -> Self {
        TierRates {
            super_off_peak: 0.06,
            off_peak: 0.10,
            on_peak: 0.24,
        }
    }
}

impl TierRates {
    pub fn rate(&self, tier: TariffTier) -> f64 {
        match tier {
            TariffTier::SuperOffPeak => self.super_off_peak,
            TariffTier::OffPeak => self.off_peak,
            TariffTier::OnPeak => self.on_peak,
        }
    }

    fn sorted(&self) -> [f64; 3] {
        let mut r = [self.super_off_peak, self.off_peak, self.on_peak];
        r.sort_by(f64::total_cmp);
        r
    }

    /// Per-kWh price billed in a priority class: the cheapest tier for P1,
    /// the middle tier for P2 and P3.
    pub fn class_rate(&self, class: PriorityClass, tier: TariffTier) -> f64 {
        let sorted = self.sorted();
        match class {
            PriorityClass::P1 => sorted[0],
            PriorityClass::P2 | PriorityClass::P3 => sorted[1],
            PriorityClass::Neutral => self.rate(tier),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TariffConfig {
    pub windows: Vec<TariffWindow>,
    #[serde(default)]
    pub rates: TierRates,
}

impl Default for TariffConfig {
    /// Super off-peak 23:00-05:00 every day, on-peak 14:00-20:00 on weekdays,
    /// off-peak otherwise.
    fn default() -> Self {
        use TariffTier::*;
        let w = |tier, days, start_hour, end_hour| TariffWindow {
            tier,
            days,
            start_hour,
            end_hour,
        };
        TariffConfig {
            windows: vec![
                w(SuperOffPeak, DaySelector::All, 23.0, 5.0),
                w(OnPeak, DaySelector::Weekdays, 14.0, 20.0),
                w(OffPeak, DaySelector::Weekdays, 5.0, 14.0),
                w(OffPeak, DaySelector::Weekdays, 20.0, 23.0),
                w(OffPeak, DaySelector::Weekends, 5.0, 23.0),
            ],
            rates: TierRates::default(),
        }
    }
}

impl TariffConfig {
    /// Checks that every minute of the week is covered by exactly one window.
    pub fn validate(&self) -> Result<()> {
        for w in &self.windows {
            let ok = |h: f64| (0.0..=24.0).contains(&h);
            if !ok(w.start_hour) || !ok(w.end_hour) || w.start_hour == w.end_hour {
                return Err(Error::config(format!(
                    "tariff window {:?} {}-{} has invalid hours",
                    w.tier, w.start_hour, w.end_hour
                )));
            }
        }
        for day in Day::ALL {
            for minute in 0..MINUTES_PER_DAY {
                let hits: Vec<usize> = self
                    .windows
                    .iter()
                    .enumerate()
                    .filter(|(_, w)| w.covers_minute(day, minute))
                    .map(|(i, _)| i)
                    .collect();
                let at = format!("{day} {:02}:{:02}", minute / 60, minute % 60);
                match hits.len() {
                    1 => {}
                    0 => return Err(Error::config(format!("tariff windows leave a gap at {at}"))),
                    _ => {
                        return Err(Error::config(format!(
                            "tariff windows {hits:?} overlap at {at}"
                        )))
                    }
                }
            }
        }
        Ok(())
    }

    fn tier_at(&self, day: Day, minute_of_day: usize) -> TariffTier {
        self.windows
            .iter()
            .find(|w| w.covers_minute(day, minute_of_day))
            .map(|w| w.tier)
            .expect("validated tariff covers every minute")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PvWindowConfig {
    pub start_hour: f64,
    pub end_hour: f64,
}

impl Default for PvWindowConfig {
    fn default() -> Self {
        PvWindowConfig {
            start_hour: 9.0,
            end_hour: 15.0,
        }
    }
}

/// Weight of the lowest priority class and the ratio between classes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorityWeights {
    pub base: f64,
    pub factor: f64,
}

impl Default for PriorityWeights {
    fn default() -> Self {
        PriorityWeights {
            base: 1.0,
            factor: 10.0,
        }
    }
}

impl PriorityWeights {
    pub fn weight(&self, class: PriorityClass) -> f64 {
        match class {
            PriorityClass::P1 => self.base * self.factor * self.factor,
            PriorityClass::P2 => self.base * self.factor,
            PriorityClass::P3 | PriorityClass::Neutral => self.base,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotTag {
    pub day: Day,
    pub tariff_tier: TariffTier,
    pub pv_window: bool,
    pub weight: f64,
    pub cost_per_kwh: f64,
    pub priority_class: PriorityClass,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub slots_per_day: usize,
    pub slot_duration_h: f64,
    pub slots: Vec<SlotTag>,
    pub rates: TierRates,
}

/// The production 15-minute weekly grid.
pub fn build_time_grid(tariff: &TariffConfig, pv: &PvWindowConfig) -> Result<TimeGrid> {
    TimeGrid::with_resolution(DEFAULT_SLOTS_PER_DAY, tariff, pv)
}

impl TimeGrid {
    pub fn with_resolution(
        slots_per_day: usize,
        tariff: &TariffConfig,
        pv: &PvWindowConfig,
    ) -> Result<TimeGrid> {
        if slots_per_day == 0 || !MINUTES_PER_DAY.is_multiple_of(slots_per_day) {
            return Err(Error::config(format!(
                "slots_per_day must divide 1440, got {slots_per_day}"
            )));
        }
        if !(0.0..=24.0).contains(&pv.start_hour)
            || !(0.0..=24.0).contains(&pv.end_hour)
            || pv.start_hour >= pv.end_hour
        {
            return Err(Error::config(format!(
                "PV window {}-{} is not a daily interval",
                pv.start_hour, pv.end_hour
            )));
        }
        tariff.validate()?;

        let minutes_per_slot = MINUTES_PER_DAY / slots_per_day;
        let slots = (0..DAYS_PER_WEEK * slots_per_day)
            .map(|t| {
                let day = Day::from_index(t / slots_per_day);
                let minute = (t % slots_per_day) * minutes_per_slot;
                let hour = minute as f64 / 60.0;
                let tier = tariff.tier_at(day, minute);
                SlotTag {
                    day,
                    tariff_tier: tier,
                    pv_window: hour >= pv.start_hour && hour < pv.end_hour,
                    weight: 1.0,
                    cost_per_kwh: tariff.rates.rate(tier),
                    priority_class: PriorityClass::Neutral,
                }
            })
            .collect();
        Ok(TimeGrid {
            slots_per_day,
            slot_duration_h: 24.0 / slots_per_day as f64,
            slots,
            rates: tariff.rates,
        })
    }

    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    /// Index of the last slot of the week.
    pub fn t_max(&self) -> usize {
        self.slots.len() - 1
    }

    pub fn day_of(&self, t: usize) -> Day {
        Day::from_index(t / self.slots_per_day)
    }

    /// Start of slot `t` in hours after that day's midnight.
    pub fn hour_of(&self, t: usize) -> f64 {
        (t % self.slots_per_day) as f64 * self.slot_duration_h
    }

    pub fn day_slots(&self, day: Day) -> Range<usize> {
        let start = day.index() * self.slots_per_day;
        start..start + self.slots_per_day
    }

    /// Slot range on `day` whose start times fall in `[start_hour, end_hour)`.
    pub fn hour_range(&self, day: Day, start_hour: f64, end_hour: f64) -> Range<usize> {
        let base = day.index() * self.slots_per_day;
        let to_slot = |h: f64| ((h / self.slot_duration_h).ceil() as usize).min(self.slots_per_day);
        base + to_slot(start_hour)..base + to_slot(end_hour).max(to_slot(start_hour))
    }

    /// Hours expressed as a whole number of slots (rounded up).
    pub fn hours_to_slots(&self, hours: f64) -> usize {
        (hours / self.slot_duration_h - 1e-9).ceil().max(0.0) as usize
    }

    pub fn class_slots(&self, class: PriorityClass) -> impl Iterator<Item = usize> + '_ {
        self.slots
            .iter()
            .enumerate()
            .filter(move |(_, s)| s.priority_class == class)
            .map(|(t, _)| t)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArrangementKind {
    InPerson,
    Hybrid,
    Remote,
}

impl ArrangementKind {
    pub const ALL: [ArrangementKind; 3] = [
        ArrangementKind::InPerson,
        ArrangementKind::Hybrid,
        ArrangementKind::Remote,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ArrangementKind::InPerson => "in-person",
            ArrangementKind::Hybrid => "hybrid",
            ArrangementKind::Remote => "remote",
        }
    }
}

impl fmt::Display for ArrangementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ArrangementKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "in-person" | "inperson" | "office" => Ok(ArrangementKind::InPerson),
            "hybrid" => Ok(ArrangementKind::Hybrid),
            "remote" => Ok(ArrangementKind::Remote),
            other => Err(Error::config(format!("unknown arrangement `{other}`"))),
        }
    }
}

/// Start times of the two daily trips. Each trip lasts `trip_hours`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommuteConfig {
    pub morning_start_hour: f64,
    pub evening_start_hour: f64,
    pub trip_hours: f64,
}

impl Default for CommuteConfig {
    fn default() -> Self {
        CommuteConfig {
            morning_start_hour: 7.0,
            evening_start_hour: 17.0,
            trip_hours: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkArrangement {
    pub kind: ArrangementKind,
    /// Work-from-home weekdays; non-empty only for hybrid.
    pub wfh_days: BTreeSet<Day>,
    pub commute: CommuteConfig,
    /// When set, remote workers and hybrid workers on WFH days still drive the
    /// two daily trips, but stay home (and can charge) between them.
    pub home_trips: bool,
}

impl WorkArrangement {
    pub fn in_person() -> Self {
        Self::of_kind(ArrangementKind::InPerson, [])
    }

    pub fn hybrid(wfh_days: impl IntoIterator<Item = Day>) -> Self {
        Self::of_kind(ArrangementKind::Hybrid, wfh_days)
    }

    pub fn remote() -> Self {
        Self::of_kind(ArrangementKind::Remote, [])
    }

    pub fn of_kind(kind: ArrangementKind, wfh_days: impl IntoIterator<Item = Day>) -> Self {
        let mut wfh: BTreeSet<Day> = wfh_days.into_iter().collect();
        if kind == ArrangementKind::Hybrid && wfh.is_empty() {
            wfh.insert(Day::Mon);
        }
        if kind != ArrangementKind::Hybrid {
            wfh.clear();
        }
        WorkArrangement {
            kind,
            wfh_days: wfh,
            commute: CommuteConfig::default(),
            home_trips: true,
        }
    }

    pub fn with_commute(mut self, commute: CommuteConfig) -> Self {
        self.commute = commute;
        self
    }

    pub fn with_home_trips(mut self, home_trips: bool) -> Self {
        self.home_trips = home_trips;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ArrangementKind::Hybrid if self.wfh_days.is_empty() => {
                return Err(Error::config(
                    "hybrid arrangement needs at least one WFH day",
                ))
            }
            ArrangementKind::InPerson | ArrangementKind::Remote if !self.wfh_days.is_empty() => {
                return Err(Error::config(format!(
                    "{} arrangement cannot have WFH days",
                    self.kind
                )))
            }
            _ => {}
        }
        if let Some(d) = self.wfh_days.iter().find(|d| d.is_weekend()) {
            return Err(Error::config(format!("WFH day {d} is not a weekday")));
        }
        let c = &self.commute;
        if c.trip_hours <= 0.0
            || c.morning_start_hour < 0.0
            || c.morning_start_hour + c.trip_hours > c.evening_start_hour
            || c.evening_start_hour + c.trip_hours > 24.0
        {
            return Err(Error::config(format!(
                "commute trips {c:?} must be ordered within one day"
            )));
        }
        Ok(())
    }

    /// Days on which the EV is away at work between the two commutes.
    pub fn is_office_day(&self, day: Day) -> bool {
        day.is_weekday()
            && match self.kind {
                ArrangementKind::InPerson => true,
                ArrangementKind::Hybrid => !self.wfh_days.contains(&day),
                ArrangementKind::Remote => false,
            }
    }

    pub fn drives_on(&self, day: Day) -> bool {
        self.is_office_day(day) || (day.is_weekday() && self.home_trips)
    }

    /// Morning and evening trip slot ranges, or `None` on days without driving.
    pub fn commute_windows(
        &self,
        grid: &TimeGrid,
        day: Day,
    ) -> Option<(Range<usize>, Range<usize>)> {
        if !self.drives_on(day) {
            return None;
        }
        let c = &self.commute;
        let len = grid.hours_to_slots(c.trip_hours);
        let morning = grid.hour_range(day, c.morning_start_hour, 24.0).start;
        let evening = grid.hour_range(day, c.evening_start_hour, 24.0).start;
        Some((morning..morning + len, evening..evening + len))
    }

    /// Slots strictly between the end of the morning commute and the start of
    /// the evening commute on office days.
    pub fn away_window(&self, grid: &TimeGrid, day: Day) -> Option<Range<usize>> {
        if !self.is_office_day(day) {
            return None;
        }
        self.commute_windows(grid, day)
            .map(|(morning, evening)| morning.end..evening.start)
    }

    pub fn driving_mask(&self, grid: &TimeGrid) -> Vec<bool> {
        let mut mask = vec![false; grid.slot_count()];
        for day in Day::ALL {
            if let Some((m, e)) = self.commute_windows(grid, day) {
                for t in m.chain(e) {
                    mask[t] = true;
                }
            }
        }
        mask
    }
}

/// Tags every slot with the arrangement's priority class, weight, and price.
pub fn assign_priorities(grid: &TimeGrid, arrangement: &WorkArrangement) -> TimeGrid {
    assign_priorities_with(grid, arrangement, &PriorityWeights::default())
}

pub fn assign_priorities_with(
    grid: &TimeGrid,
    arrangement: &WorkArrangement,
    weights: &PriorityWeights,
) -> TimeGrid {
    let mut out = grid.clone();
    for slot in &mut out.slots {
        let class = priority_class(slot, arrangement);
        slot.priority_class = class;
        slot.weight = weights.weight(class);
        slot.cost_per_kwh = grid.rates.class_rate(class, slot.tariff_tier);
    }
    out
}

fn priority_class(slot: &SlotTag, arrangement: &WorkArrangement) -> PriorityClass {
    use PriorityClass::*;
    let weekday = slot.day.is_weekday();
    let night = slot.tariff_tier == TariffTier::SuperOffPeak;
    let pv = slot.pv_window;
    match arrangement.kind {
        ArrangementKind::InPerson => match (weekday, night, pv) {
            (true, true, _) => P1,
            (false, _, true) => P2,
            (false, _, false) => P3,
            _ => Neutral,
        },
        ArrangementKind::Hybrid => {
            let wfh = arrangement.wfh_days.contains(&slot.day);
            match (weekday, pv) {
                (false, true) => P1,
                (true, true) if wfh => P2,
                (true, _) if night => P3,
                _ => Neutral,
            }
        }
        ArrangementKind::Remote => match (weekday, pv) {
            (true, true) => P1,
            (false, true) => P2,
            (false, false) => P3,
            _ => Neutral,
        },
    }
}

/// `mask[t]` is true iff the EV is parked at home during slot `t`.
pub fn availability_mask(grid: &TimeGrid, arrangement: &WorkArrangement) -> Vec<bool> {
    let mut mask: Vec<bool> = arrangement.driving_mask(grid).iter().map(|d| !d).collect();
    for day in Day::ALL {
        if let Some(away) = arrangement.away_window(grid, day) {
            for t in away {
                mask[t] = false;
            }
        }
    }
    mask
}

/// Tariff, PV, priority, and commute settings read from one TOML document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScheduleConfig {
    pub slots_per_day: usize,
    pub tariff: TariffConfig,
    pub pv_window: PvWindowConfig,
    pub weights: PriorityWeights,
    pub commute: CommuteConfig,
    pub wfh_days: Vec<Day>,
    pub home_trips: bool,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            slots_per_day: DEFAULT_SLOTS_PER_DAY,
            tariff: TariffConfig::default(),
            pv_window: PvWindowConfig::default(),
            weights: PriorityWeights::default(),
            commute: CommuteConfig::default(),
            wfh_days: vec![Day::Mon],
            home_trips: true,
        }
    }
}

impl ScheduleConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn build_grid(&self) -> Result<TimeGrid> {
        TimeGrid::with_resolution(self.slots_per_day, &self.tariff, &self.pv_window)
    }

    pub fn arrangement(&self, kind: ArrangementKind) -> WorkArrangement {
        WorkArrangement::of_kind(kind, self.wfh_days.iter().copied())
            .with_commute(self.commute)
            .with_home_trips(self.home_trips)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> TimeGrid {
        build_time_grid(&TariffConfig::default(), &PvWindowConfig::default()).unwrap()
    }

    fn slot_at(grid: &TimeGrid, day: Day, hour: f64) -> usize {
        grid.hour_range(day, hour, 24.0).start
    }

    #[test]
    fn weekly_grid_has_672_slots() {
        let g = grid();
        assert_eq!(g.slot_count(), 672);
        assert_eq!(g.slot_duration_h, 0.25);
        assert_eq!(g.t_max(), 671);
        assert_eq!(g.day_of(671), Day::Sun);
    }

    #[test]
    fn pv_window_has_24_slots_per_day() {
        let g = grid();
        for day in Day::ALL {
            let n = g.day_slots(day).filter(|&t| g.slots[t].pv_window).count();
            assert_eq!(n, 24, "{day}");
        }
    }

    #[test]
    fn tariff_gap_is_rejected() {
        let mut tariff = TariffConfig::default();
        // Weekday off-peak 05:00-14:00 becomes Tuesday-less, then patched back
        // for every weekday except a 1-hour hole on Tuesday.
        tariff.windows[2].days = DaySelector::Days(vec![Day::Mon, Day::Wed, Day::Thu, Day::Fri]);
        tariff.windows.push(TariffWindow {
            tier: TariffTier::OffPeak,
            days: DaySelector::Days(vec![Day::Tue]),
            start_hour: 5.0,
            end_hour: 10.0,
        });
        tariff.windows.push(TariffWindow {
            tier: TariffTier::OffPeak,
            days: DaySelector::Days(vec![Day::Tue]),
            start_hour: 11.0,
            end_hour: 14.0,
        });
        let err = build_time_grid(&tariff, &PvWindowConfig::default()).unwrap_err();
        assert!(err.to_string().contains("gap at Tue 10:00"), "{err}");
    }

    #[test]
    fn tariff_overlap_is_rejected() {
        let mut tariff = TariffConfig::default();
        tariff.windows[1].end_hour = 21.0;
        let err = tariff.validate().unwrap_err();
        assert!(err.to_string().contains("overlap"), "{err}");
    }

    #[test]
    fn priority_examples() {
        let g = grid();
        let inperson = assign_priorities(&g, &WorkArrangement::in_person());
        assert_eq!(
            inperson.slots[slot_at(&g, Day::Sat, 12.0)].priority_class,
            PriorityClass::P2
        );
        let remote = assign_priorities(&g, &WorkArrangement::remote());
        assert_eq!(
            remote.slots[slot_at(&g, Day::Wed, 12.0)].priority_class,
            PriorityClass::P1
        );
        let hybrid = assign_priorities(&g, &WorkArrangement::hybrid([Day::Mon]));
        assert_eq!(
            hybrid.slots[slot_at(&g, Day::Mon, 12.0)].priority_class,
            PriorityClass::P2
        );
        assert_eq!(
            hybrid.slots[slot_at(&g, Day::Tue, 12.0)].priority_class,
            PriorityClass::Neutral
        );
        assert_eq!(
            hybrid.slots[slot_at(&g, Day::Tue, 2.0)].priority_class,
            PriorityClass::P3
        );
    }

    #[test]
    fn class_weights_and_costs_are_ordered() {
        let g = grid();
        for arr in [
            WorkArrangement::in_person(),
            WorkArrangement::hybrid([Day::Fri]),
            WorkArrangement::remote(),
        ] {
            let p = assign_priorities(&g, &arr);
            let first = |c| p.slots.iter().find(|s| s.priority_class == c).unwrap();
            let (a, b, c) = (
                first(PriorityClass::P1),
                first(PriorityClass::P2),
                first(PriorityClass::P3),
            );
            assert_eq!(a.weight, 10.0 * b.weight);
            assert_eq!(b.weight, 10.0 * c.weight);
            assert!(a.cost_per_kwh <= b.cost_per_kwh && b.cost_per_kwh <= c.cost_per_kwh);
            for s in &p.slots {
                assert!(s.weight > 0.0);
                if s.priority_class == PriorityClass::Neutral {
                    assert_eq!(s.weight, c.weight);
                    assert_eq!(s.cost_per_kwh, g.rates.rate(s.tariff_tier));
                }
            }
        }
    }

    #[test]
    fn availability_examples() {
        let g = grid();
        let inperson = availability_mask(&g, &WorkArrangement::in_person());
        let remote = availability_mask(&g, &WorkArrangement::remote());
        assert!(!inperson[slot_at(&g, Day::Tue, 12.0)]);
        assert!(remote[slot_at(&g, Day::Tue, 12.0)]);
        assert!(inperson[slot_at(&g, Day::Tue, 2.0)]);
        // Commute slots are never available.
        assert!(!inperson[slot_at(&g, Day::Tue, 7.0)]);
        assert!(!inperson[slot_at(&g, Day::Tue, 17.75)]);
        assert!(inperson[slot_at(&g, Day::Tue, 18.0)]);
    }

    #[test]
    fn in_person_is_away_between_commutes_and_remote_only_misses_trips() {
        let g = grid();
        let arr = WorkArrangement::in_person();
        let mask = availability_mask(&g, &arr);
        for day in Day::ALL.into_iter().filter(|d| d.is_weekday()) {
            let (m, e) = arr.commute_windows(&g, day).unwrap();
            for t in m.end..e.start {
                assert!(!mask[t]);
            }
        }
        let remote = WorkArrangement::remote();
        let mask = availability_mask(&g, &remote);
        let driving = remote.driving_mask(&g);
        for t in 0..g.slot_count() {
            assert_eq!(mask[t], !driving[t]);
        }
        assert_eq!(driving.iter().filter(|d| **d).count(), 40);
        let no_trips = WorkArrangement::remote().with_home_trips(false);
        assert!(availability_mask(&g, &no_trips).iter().all(|a| *a));
    }

    #[test]
    fn hybrid_needs_a_weekday_wfh_day() {
        let mut arr = WorkArrangement::hybrid([Day::Mon]);
        assert!(arr.validate().is_ok());
        arr.wfh_days.clear();
        assert!(arr.validate().is_err());
        arr.wfh_days.insert(Day::Sat);
        assert!(arr.validate().is_err());
        assert_eq!(WorkArrangement::hybrid([]).wfh_days.len(), 1);
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = ScheduleConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        let back = ScheduleConfig::from_toml_str(&text).unwrap();
        assert_eq!(back, cfg);
        let partial = ScheduleConfig::from_toml_str("wfh_days = [\"Fri\"]\n").unwrap();
        assert_eq!(partial.wfh_days, vec![Day::Fri]);
        assert_eq!(partial.slots_per_day, 96);
    }

    #[test]
    fn coarse_grid_is_supported() {
        let g = TimeGrid::with_resolution(8, &TariffConfig::default(), &PvWindowConfig::default())
            .unwrap();
        assert_eq!(g.slot_count(), 56);
        assert_eq!(g.slot_duration_h, 3.0);
        assert!(
            TimeGrid::with_resolution(7, &TariffConfig::default(), &PvWindowConfig::default())
                .is_err()
        );
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arrangement() -> impl Strategy<Value = WorkArrangement> {
            prop_oneof![
                Just(WorkArrangement::in_person()),
                Just(WorkArrangement::remote()),
                proptest::collection::btree_set(0usize..5, 1..4)
                    .prop_map(|s| WorkArrangement::hybrid(s.into_iter().map(Day::from_index))),
            ]
        }

        proptest! {
            #[test]
            fn classes_partition_and_are_pure(arr in arrangement(), pv_start in 6.0f64..11.0, pv_len in 2.0f64..8.0) {
                let pv = PvWindowConfig { start_hour: pv_start, end_hour: (pv_start + pv_len).min(20.0) };
                let g = build_time_grid(&TariffConfig::default(), &pv).unwrap();
                let a = assign_priorities(&g, &arr);
                let b = assign_priorities(&g, &arr);
                prop_assert_eq!(&a, &b);
                let total: usize = [PriorityClass::P1, PriorityClass::P2, PriorityClass::P3, PriorityClass::Neutral]
                    .into_iter()
                    .map(|c| a.class_slots(c).count())
                    .sum();
                prop_assert_eq!(total, 672);
            }
        }
    }
}
