//! Flexibility estimation from per-minute charge-box measurements.
//!
//! Each EV is reduced to a dense minute series (power and connection flag).
//! From it we reconstruct charging sessions, the battery capacity (largest
//! session energy), the charger limit (largest observed power) and a
//! state-of-charge trajectory under the assumption that every session ends
//! with a full battery. Per-minute flexibilities are then summed over the
//! fleet and reduced to the minimum within each clock hour.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MINUTES_PER_HOUR: i64 = 60;
pub const MINUTES_PER_DAY: i64 = 1440;

/// Minutes of continuous connection required after `t` for energy flexibility.
pub const LOOKAHEAD_MINUTES: usize = 20;

/// Tolerance used when checking state-of-charge bounds.
const SOC_TOL: f64 = 1e-9;

/// One EV's power draw and connection state during one minute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinuteRecord {
    pub ev_id: String,
    pub minute: i64,
    pub power_kw: f64,
    pub connected: bool,
}

impl MinuteRecord {
    pub fn new(ev_id: impl Into<String>, minute: i64, power_kw: f64, connected: bool) -> Self {
        Self {
            ev_id: ev_id.into(),
            minute,
            power_kw,
            connected,
        }
    }

    /// Checks `power_kw >= 0` and that disconnected minutes draw nothing.
    pub fn validate(&self) -> Result<()> {
        if !self.power_kw.is_finite() || self.power_kw < 0.0 {
            return Err(Error::data(format!(
                "ev {} minute {}: power {} is not a finite non-negative value",
                self.ev_id, self.minute, self.power_kw
            )));
        }
        if !self.connected && self.power_kw > 0.0 {
            return Err(Error::data(format!(
                "ev {} minute {}: power {} kW while disconnected",
                self.ev_id, self.minute, self.power_kw
            )));
        }
        Ok(())
    }
}

/// Dense minute series of a single EV on `[start_minute, start_minute + len)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvSeries {
    pub ev_id: String,
    pub start_minute: i64,
    pub power_kw: Vec<f64>,
    pub connected: Vec<bool>,
}

impl EvSeries {
    pub fn len(&self) -> usize {
        self.power_kw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.power_kw.is_empty()
    }

    /// Exclusive end of the covered minute range.
    pub fn end_minute(&self) -> i64 {
        self.start_minute + self.len() as i64
    }

    /// Builds a series from records that already cover contiguous minutes.
    pub fn from_records(records: &[MinuteRecord]) -> Result<Self> {
        let first = records
            .first()
            .ok_or_else(|| Error::data("no records for EV"))?;
        let mut power_kw = Vec::with_capacity(records.len());
        let mut connected = Vec::with_capacity(records.len());
        for (offset, rec) in records.iter().enumerate() {
            if rec.ev_id != first.ev_id {
                return Err(Error::data(format!(
                    "mixed EV ids {} and {} in one series",
                    first.ev_id, rec.ev_id
                )));
            }
            if rec.minute != first.minute + offset as i64 {
                return Err(Error::data(format!(
                    "ev {}: minute {} breaks contiguity (expected {})",
                    rec.ev_id,
                    rec.minute,
                    first.minute + offset as i64
                )));
            }
            rec.validate()?;
            power_kw.push(rec.power_kw);
            connected.push(rec.connected);
        }
        Ok(Self {
            ev_id: first.ev_id.clone(),
            start_minute: first.minute,
            power_kw,
            connected,
        })
    }

    /// Resamples irregular records onto `[start, end)` by zero-order hold.
    ///
    /// `records` must be sorted by minute and belong to one EV. Minutes before
    /// the first record are treated as disconnected.
    pub fn resample(ev_id: &str, records: &[MinuteRecord], start: i64, end: i64) -> Result<Self> {
        if end <= start {
            return Err(Error::data(format!("empty minute grid [{start}, {end})")));
        }
        let len = (end - start) as usize;
        let mut power_kw = vec![0.0; len];
        let mut connected = vec![false; len];
        for (i, rec) in records.iter().enumerate() {
            rec.validate()?;
            if let Some(next) = records.get(i + 1) {
                if next.minute <= rec.minute {
                    return Err(Error::data(format!(
                        "ev {ev_id}: minutes not strictly increasing at {}",
                        next.minute
                    )));
                }
            }
            let from = rec.minute.max(start);
            let to = records.get(i + 1).map_or(end, |n| n.minute).min(end);
            for t in from..to {
                let idx = (t - start) as usize;
                power_kw[idx] = rec.power_kw;
                connected[idx] = rec.connected;
            }
        }
        Ok(Self {
            ev_id: ev_id.to_string(),
            start_minute: start,
            power_kw,
            connected,
        })
    }
}

/// Groups a mixed record stream by EV and resamples every EV onto the
/// common grid spanning the earliest to the latest recorded minute.
///
/// EVs are returned sorted by id so that fleet sums have a fixed order.
pub fn series_from_records(records: &[MinuteRecord]) -> Result<Vec<EvSeries>> {
    if records.is_empty() {
        return Err(Error::data("no minute records"));
    }
    let start = records.iter().map(|r| r.minute).min().unwrap_or(0);
    let end = records.iter().map(|r| r.minute).max().unwrap_or(0) + 1;
    let mut by_ev: BTreeMap<&str, Vec<MinuteRecord>> = BTreeMap::new();
    for rec in records {
        by_ev.entry(rec.ev_id.as_str()).or_default().push(rec.clone());
    }
    by_ev
        .into_iter()
        .map(|(id, mut recs)| {
            recs.sort_by_key(|r| r.minute);
            if let Some(w) = recs.windows(2).find(|w| w[0].minute == w[1].minute) {
                return Err(Error::data(format!(
                    "ev {id}: duplicate minute {}",
                    w[0].minute
                )));
            }
            EvSeries::resample(id, &recs, start, end)
        })
        .collect()
}

/// A maximal run of connected minutes, `[start_minute, end_minute)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChargingSession {
    pub ev_id: String,
    pub start_minute: i64,
    pub end_minute: i64,
    pub session_energy_kwh: f64,
}

impl ChargingSession {
    pub fn duration_minutes(&self) -> i64 {
        self.end_minute - self.start_minute
    }

    /// State of charge before the first minute of charging, given that the
    /// session ends with a full battery.
    pub fn start_soc_kwh(&self, battery_capacity_kwh: f64) -> f64 {
        battery_capacity_kwh - self.session_energy_kwh
    }
}

/// Inferred battery and charger properties plus the SoC trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct EvProfile {
    pub ev_id: String,
    pub battery_capacity_kwh: f64,
    pub charger_max_kw: f64,
    pub start_minute: i64,
    /// SoC in kWh after the energy of each minute; full outside sessions.
    pub soc_kwh_series: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub sessions: Vec<ChargingSession>,
    /// `None` when the EV never drew any energy.
    pub profile: Option<EvProfile>,
}

impl Reconstruction {
    pub fn is_usable(&self) -> bool {
        self.profile.is_some()
    }
}

fn sessions_of(series: &EvSeries) -> Vec<ChargingSession> {
    let mut sessions = Vec::new();
    let mut t = 0;
    let n = series.len();
    while t < n {
        if !series.connected[t] {
            t += 1;
            continue;
        }
        let begin = t;
        let mut energy = 0.0;
        while t < n && series.connected[t] {
            energy += series.power_kw[t] / 60.0;
            t += 1;
        }
        sessions.push(ChargingSession {
            ev_id: series.ev_id.clone(),
            start_minute: series.start_minute + begin as i64,
            end_minute: series.start_minute + t as i64,
            session_energy_kwh: energy,
        });
    }
    sessions
}

/// Splits an EV's series into sessions and infers its profile.
///
/// Capacity is the largest session energy, the charger limit the largest
/// power over all minutes. Inside a session the SoC is
/// `capacity - (session_energy - energy delivered so far)`, so it reaches
/// capacity exactly at the session's last minute.
pub fn reconstruct_profiles(series: &EvSeries) -> Result<Reconstruction> {
    for (i, (&p, &k)) in series.power_kw.iter().zip(&series.connected).enumerate() {
        if !p.is_finite() || p < 0.0 || (!k && p > 0.0) {
            return Err(Error::data(format!(
                "ev {} minute {}: inconsistent power {} / connected {}",
                series.ev_id,
                series.start_minute + i as i64,
                p,
                k
            )));
        }
    }
    let sessions = sessions_of(series);
    let capacity = sessions
        .iter()
        .map(|s| s.session_energy_kwh)
        .fold(0.0, f64::max);
    if capacity <= 0.0 {
        return Ok(Reconstruction {
            sessions,
            profile: None,
        });
    }
    let charger_max = series.power_kw.iter().copied().fold(0.0, f64::max);

    let mut soc = vec![capacity; series.len()];
    for s in &sessions {
        let begin = (s.start_minute - series.start_minute) as usize;
        let end = (s.end_minute - series.start_minute) as usize;
        let mut delivered = 0.0;
        for t in begin..end {
            delivered += series.power_kw[t] / 60.0;
            let level = capacity - (s.session_energy_kwh - delivered);
            if level < -SOC_TOL || level > capacity + SOC_TOL {
                return Err(Error::data(format!(
                    "ev {} minute {}: reconstructed SoC {level} outside [0, {capacity}]",
                    series.ev_id,
                    series.start_minute + t as i64
                )));
            }
            soc[t] = level.clamp(0.0, capacity);
        }
    }

    Ok(Reconstruction {
        sessions,
        profile: Some(EvProfile {
            ev_id: series.ev_id.clone(),
            battery_capacity_kwh: capacity,
            charger_max_kw: charger_max,
            start_minute: series.start_minute,
            soc_kwh_series: soc,
        }),
    })
}

/// Up, down and 20-minute energy flexibility in kW.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FlexTriple {
    pub up: f64,
    pub down: f64,
    pub e20: f64,
}

fn energy_flex(profile: &EvProfile, soc: f64, connected_ahead: bool, k: bool) -> f64 {
    if !connected_ahead || !k {
        return 0.0;
    }
    let headroom = profile.battery_capacity_kwh - soc;
    profile.charger_max_kw.min(3.0 * headroom).max(0.0)
}

/// Flexibility of one EV at absolute minute `t`.
///
/// Energy flexibility requires connection on every minute of `t..=t+20`;
/// near the end of the series the lookahead is unavailable and it is zero.
pub fn minute_flexibility(profile: &EvProfile, series: &EvSeries, t: i64) -> Result<FlexTriple> {
    if t < series.start_minute || t >= series.end_minute() {
        return Err(Error::data(format!(
            "minute {t} outside [{}, {})",
            series.start_minute,
            series.end_minute()
        )));
    }
    let idx = (t - series.start_minute) as usize;
    let k = series.connected[idx];
    if !k {
        return Ok(FlexTriple::default());
    }
    let p = series.power_kw[idx];
    let ahead = idx + LOOKAHEAD_MINUTES < series.len()
        && series.connected[idx..=idx + LOOKAHEAD_MINUTES]
            .iter()
            .all(|&c| c);
    let soc_idx = (t - profile.start_minute) as usize;
    Ok(FlexTriple {
        up: p,
        down: (profile.charger_max_kw - p).max(0.0),
        e20: energy_flex(profile, profile.soc_kwh_series[soc_idx], ahead, k),
    })
}

/// Per-minute flexibility vectors of a single EV.
#[derive(Debug, Clone, PartialEq)]
pub struct EvFlex {
    pub start_minute: i64,
    pub up: Vec<f64>,
    pub down: Vec<f64>,
    pub e20: Vec<f64>,
}

impl EvFlex {
    pub fn len(&self) -> usize {
        self.up.len()
    }

    pub fn is_empty(&self) -> bool {
        self.up.is_empty()
    }
}

/// Flexibility of one EV over its whole series. Unusable EVs (no profile)
/// contribute zeros.
pub fn ev_flexibility(profile: Option<&EvProfile>, series: &EvSeries) -> EvFlex {
    let n = series.len();
    let mut flex = EvFlex {
        start_minute: series.start_minute,
        up: vec![0.0; n],
        down: vec![0.0; n],
        e20: vec![0.0; n],
    };
    let Some(profile) = profile else {
        return flex;
    };
    // run[t]: number of consecutive connected minutes starting at t
    let mut run = vec![0usize; n + 1];
    for t in (0..n).rev() {
        run[t] = if series.connected[t] { run[t + 1] + 1 } else { 0 };
    }
    for t in 0..n {
        if !series.connected[t] {
            continue;
        }
        let p = series.power_kw[t];
        let ahead = t + LOOKAHEAD_MINUTES < n && run[t] > LOOKAHEAD_MINUTES;
        flex.up[t] = p;
        flex.down[t] = (profile.charger_max_kw - p).max(0.0);
        flex.e20[t] = energy_flex(profile, profile.soc_kwh_series[t], ahead, true);
    }
    flex
}

/// Realised minimum fleet flexibility in one clock hour of one day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HourlyFlexSample {
    pub day: i64,
    pub hour: u8,
    pub r_up_kw: f64,
    pub r_down_kw: f64,
    pub r_e20_kw: f64,
}

impl HourlyFlexSample {
    pub fn triple(&self) -> FlexTriple {
        FlexTriple {
            up: self.r_up_kw,
            down: self.r_down_kw,
            e20: self.r_e20_kw,
        }
    }
}

/// Fleet-level minute sums on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FleetFlex {
    pub start_minute: i64,
    pub up: Vec<f64>,
    pub down: Vec<f64>,
    pub e20: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct HourlyAggregation {
    pub samples: Vec<HourlyFlexSample>,
    /// (day, hour) blocks only partially covered by the grid.
    pub dropped_hours: Vec<(i64, u8)>,
}

impl FleetFlex {
    pub fn new(start_minute: i64, len: usize) -> Self {
        Self {
            start_minute,
            up: vec![0.0; len],
            down: vec![0.0; len],
            e20: vec![0.0; len],
        }
    }

    pub fn add(&mut self, ev: &EvFlex) -> Result<()> {
        if ev.start_minute != self.start_minute || ev.len() != self.up.len() {
            return Err(Error::data(format!(
                "EV flexibility grid [{}, +{}) does not match fleet grid [{}, +{})",
                ev.start_minute,
                ev.len(),
                self.start_minute,
                self.up.len()
            )));
        }
        for (acc, v) in [
            (&mut self.up, &ev.up),
            (&mut self.down, &ev.down),
            (&mut self.e20, &ev.e20),
        ] {
            acc.iter_mut().zip(v).for_each(|(a, b)| *a += b);
        }
        Ok(())
    }

    /// Minimum fleet value per fully covered clock hour.
    pub fn hourly_min(&self) -> HourlyAggregation {
        let start = self.start_minute;
        let end = start + self.up.len() as i64;
        let mut out = HourlyAggregation::default();
        if self.up.is_empty() {
            return out;
        }
        let first_block = start.div_euclid(MINUTES_PER_HOUR);
        let last_block = (end - 1).div_euclid(MINUTES_PER_HOUR);
        for block in first_block..=last_block {
            let b_start = block * MINUTES_PER_HOUR;
            let b_end = b_start + MINUTES_PER_HOUR;
            let day = b_start.div_euclid(MINUTES_PER_DAY);
            let hour = (b_start.rem_euclid(MINUTES_PER_DAY) / MINUTES_PER_HOUR) as u8;
            if b_start < start || b_end > end {
                out.dropped_hours.push((day, hour));
                continue;
            }
            let range = (b_start - start) as usize..(b_end - start) as usize;
            let min = |v: &[f64]| v[range.clone()].iter().copied().fold(f64::INFINITY, f64::min);
            out.samples.push(HourlyFlexSample {
                day,
                hour,
                r_up_kw: min(&self.up),
                r_down_kw: min(&self.down),
                r_e20_kw: min(&self.e20),
            });
        }
        out
    }
}

/// Sums per-EV flexibilities minute by minute and takes the hourly minimum.
pub fn aggregate_and_hourly_min(evs: &[EvFlex]) -> Result<HourlyAggregation> {
    let first = evs
        .first()
        .ok_or_else(|| Error::data("no EV flexibilities to aggregate"))?;
    let mut fleet = FleetFlex::new(first.start_minute, first.len());
    for ev in evs {
        fleet.add(ev)?;
    }
    Ok(fleet.hourly_min())
}

/// Outcome of the full estimation pipeline.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Estimation {
    pub hourly: HourlyAggregation,
    pub n_evs: usize,
    /// EVs that never drew energy (zero contribution).
    pub unusable_evs: Vec<String>,
    pub n_sessions: usize,
}

/// Runs reconstruction, per-minute flexibility and hourly aggregation for a
/// fleet of aligned series, one EV at a time.
pub fn estimate_hourly(series: &[EvSeries]) -> Result<Estimation> {
    let first = series
        .first()
        .ok_or_else(|| Error::data("no EV series to estimate"))?;
    let mut fleet = FleetFlex::new(first.start_minute, first.len());
    let mut est = Estimation {
        n_evs: series.len(),
        ..Default::default()
    };
    for s in series {
        let rec = reconstruct_profiles(s)?;
        est.n_sessions += rec.sessions.len();
        if rec.profile.is_none() {
            est.unusable_evs.push(s.ev_id.clone());
        }
        fleet.add(&ev_flexibility(rec.profile.as_ref(), s))?;
    }
    est.hourly = fleet.hourly_min();
    Ok(est)
}

/// Groups `records` by EV, resamples and estimates hourly samples.
pub fn estimate_from_records(records: &[MinuteRecord]) -> Result<Estimation> {
    estimate_hourly(&series_from_records(records)?)
}
