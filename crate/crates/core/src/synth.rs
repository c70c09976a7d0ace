//! Seeded synthetic fleet of residential overnight chargers.
//!
//! Every EV gets a battery size and a charger level. On each day it plugs in
//! with some probability in the evening, charges at a session draw between
//! `power_frac_min` and 1 times its charger level until the drawn energy need
//! is met (or it leaves), idles at zero power while still connected, and
//! departs the next morning.
//!
//! Output is a change-point record stream: a record is emitted when an EV's
//! (power, connected) state changes, plus one at the first and last minute of
//! the horizon. Zero-order-hold resampling recovers the dense minute series.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flex::{EvSeries, MinuteRecord, MINUTES_PER_DAY};
use crate::seed;

/// Arrivals are clamped to the afternoon/evening half of the day.
const ARRIVAL_WINDOW: (i64, i64) = (720, 1439);
/// Departures are clamped to the night/morning half of the next day.
const DEPARTURE_WINDOW: (i64, i64) = (0, 719);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthFleetConfig {
    pub n_evs: usize,
    pub n_days: usize,
    pub seed: u64,
    /// Minute of day.
    pub arrival_mean_min: f64,
    pub arrival_sd_min: f64,
    /// Minute of the following day.
    pub departure_mean_min: f64,
    pub departure_sd_min: f64,
    pub battery_min_kwh: f64,
    pub battery_max_kwh: f64,
    pub charger_levels_kw: Vec<f64>,
    pub plug_in_prob: f64,
    /// Energy need on arrival as a fraction of battery capacity.
    pub need_min_frac: f64,
    pub need_max_frac: f64,
    /// Lower bound of the per-session draw as a fraction of the charger level.
    pub power_frac_min: f64,
}

impl Default for SynthFleetConfig {
    fn default() -> Self {
        Self {
            n_evs: 200,
            n_days: 366,
            seed: 7,
            arrival_mean_min: 1050.0,
            arrival_sd_min: 100.0,
            departure_mean_min: 450.0,
            departure_sd_min: 60.0,
            battery_min_kwh: 40.0,
            battery_max_kwh: 80.0,
            charger_levels_kw: vec![3.7, 7.4, 11.0],
            plug_in_prob: 0.7,
            need_min_frac: 0.1,
            need_max_frac: 0.6,
            power_frac_min: 0.8,
        }
    }
}

impl SynthFleetConfig {
    pub fn validate(&self) -> Result<()> {
        let in_window = |v: f64, (lo, hi): (i64, i64)| v >= lo as f64 && v <= hi as f64;
        if !in_window(self.arrival_mean_min, ARRIVAL_WINDOW) {
            return Err(Error::config(format!(
                "arrival_mean_min {} outside [{}, {}]",
                self.arrival_mean_min, ARRIVAL_WINDOW.0, ARRIVAL_WINDOW.1
            )));
        }
        if !in_window(self.departure_mean_min, DEPARTURE_WINDOW) {
            return Err(Error::config(format!(
                "departure_mean_min {} outside [{}, {}]; departures must follow arrivals",
                self.departure_mean_min, DEPARTURE_WINDOW.0, DEPARTURE_WINDOW.1
            )));
        }
        for (name, sd) in [
            ("arrival_sd_min", self.arrival_sd_min),
            ("departure_sd_min", self.departure_sd_min),
        ] {
            if !sd.is_finite() || sd < 0.0 {
                return Err(Error::config(format!("{name} must be >= 0, got {sd}")));
            }
        }
        if !(self.battery_min_kwh > 0.0 && self.battery_min_kwh <= self.battery_max_kwh) {
            return Err(Error::config(format!(
                "battery range [{}, {}] is empty or non-positive",
                self.battery_min_kwh, self.battery_max_kwh
            )));
        }
        if self.charger_levels_kw.is_empty()
            || self.charger_levels_kw.iter().any(|&p| !(p > 0.0 && p.is_finite()))
        {
            return Err(Error::config("charger_levels_kw must be non-empty and positive"));
        }
        if !(0.0..=1.0).contains(&self.plug_in_prob) {
            return Err(Error::config(format!(
                "plug_in_prob {} outside [0, 1]",
                self.plug_in_prob
            )));
        }
        if !(self.need_min_frac > 0.0
            && self.need_min_frac <= self.need_max_frac
            && self.need_max_frac <= 1.0)
        {
            return Err(Error::config(format!(
                "need fraction range [{}, {}] must lie in (0, 1]",
                self.need_min_frac, self.need_max_frac
            )));
        }
        if !(self.power_frac_min > 0.0 && self.power_frac_min <= 1.0) {
            return Err(Error::config(format!(
                "power_frac_min {} outside (0, 1]",
                self.power_frac_min
            )));
        }
        if self.n_days == 0 {
            return Err(Error::config("n_days must be positive"));
        }
        Ok(())
    }

    /// Applies `key=value` pairs; unknown keys are an error.
    pub fn apply(&mut self, kv: &BTreeMap<String, String>) -> Result<()> {
        for (key, value) in kv {
            if !self.set(key, value)? {
                return Err(Error::config(format!("unknown synth key '{key}'")));
            }
        }
        Ok(())
    }

    /// Sets one key; returns `false` if the key is not a synth key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        let f = |v: &str| -> Result<f64> {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::config(format!("{key}: '{v}' is not a number")))
        };
        let u = |v: &str| -> Result<u64> {
            v.trim()
                .parse::<u64>()
                .map_err(|_| Error::config(format!("{key}: '{v}' is not an unsigned integer")))
        };
        match key {
            "n_evs" => self.n_evs = u(value)? as usize,
            "n_days" => self.n_days = u(value)? as usize,
            "seed" => self.seed = u(value)?,
            "arrival_mean_min" => self.arrival_mean_min = f(value)?,
            "arrival_sd_min" => self.arrival_sd_min = f(value)?,
            "departure_mean_min" => self.departure_mean_min = f(value)?,
            "departure_sd_min" => self.departure_sd_min = f(value)?,
            "battery_min_kwh" => self.battery_min_kwh = f(value)?,
            "battery_max_kwh" => self.battery_max_kwh = f(value)?,
            "charger_levels_kw" => {
                self.charger_levels_kw = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(f)
                    .collect::<Result<_>>()?
            }
            "plug_in_prob" => self.plug_in_prob = f(value)?,
            "need_min_frac" => self.need_min_frac = f(value)?,
            "need_max_frac" => self.need_max_frac = f(value)?,
            "power_frac_min" => self.power_frac_min = f(value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// The config as ordered `key=value` pairs (inverse of [`Self::apply`]).
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let levels = self
            .charger_levels_kw
            .iter()
            .map(|p| p.to_string())
            .collect::<Vec<_>>()
            .join(",");
        [
            ("n_evs", self.n_evs.to_string()),
            ("n_days", self.n_days.to_string()),
            ("seed", self.seed.to_string()),
            ("arrival_mean_min", self.arrival_mean_min.to_string()),
            ("arrival_sd_min", self.arrival_sd_min.to_string()),
            ("departure_mean_min", self.departure_mean_min.to_string()),
            ("departure_sd_min", self.departure_sd_min.to_string()),
            ("battery_min_kwh", self.battery_min_kwh.to_string()),
            ("battery_max_kwh", self.battery_max_kwh.to_string()),
            ("charger_levels_kw", levels),
            ("plug_in_prob", self.plug_in_prob.to_string()),
            ("need_min_frac", self.need_min_frac.to_string()),
            ("need_max_frac", self.need_max_frac.to_string()),
            ("power_frac_min", self.power_frac_min.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    pub fn horizon_minutes(&self) -> i64 {
        self.n_days as i64 * MINUTES_PER_DAY
    }
}

fn ev_id(index: usize) -> String {
    format!("ev{index:04}")
}

fn draw_clamped(rng: &mut ChaCha8Rng, mean: f64, sd: f64, (lo, hi): (i64, i64)) -> i64 {
    let v = if sd > 0.0 {
        Normal::new(mean, sd).expect("validated sd").sample(rng)
    } else {
        mean
    };
    (v.round() as i64).clamp(lo, hi)
}

/// Dense minute series of one synthetic EV.
pub fn synthetic_ev_series(cfg: &SynthFleetConfig, index: usize) -> EvSeries {
    let horizon = cfg.horizon_minutes();
    let len = horizon as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(cfg.seed, &[index as u64]));
    let battery = if cfg.battery_max_kwh > cfg.battery_min_kwh {
        rng.random_range(cfg.battery_min_kwh..=cfg.battery_max_kwh)
    } else {
        cfg.battery_min_kwh
    };
    let charger = cfg.charger_levels_kw[rng.random_range(0..cfg.charger_levels_kw.len())];
    let mut power_kw = vec![0.0; len];
    let mut connected = vec![false; len];

    for day in 0..cfg.n_days as i64 {
        // draws happen every day so that the stream does not depend on outcomes
        let plug = rng.random::<f64>() < cfg.plug_in_prob;
        let arrival = draw_clamped(&mut rng, cfg.arrival_mean_min, cfg.arrival_sd_min, ARRIVAL_WINDOW);
        let departure = draw_clamped(
            &mut rng,
            cfg.departure_mean_min,
            cfg.departure_sd_min,
            DEPARTURE_WINDOW,
        );
        let need = if cfg.need_max_frac > cfg.need_min_frac {
            rng.random_range(cfg.need_min_frac..=cfg.need_max_frac)
        } else {
            cfg.need_min_frac
        } * battery;
        let draw = if cfg.power_frac_min < 1.0 {
            charger * rng.random_range(cfg.power_frac_min..=1.0)
        } else {
            charger
        };
        if !plug {
            continue;
        }
        let start = day * MINUTES_PER_DAY + arrival;
        let end = ((day + 1) * MINUTES_PER_DAY + departure).min(horizon);
        if start >= end {
            continue;
        }
        let duration = (end - start) as usize;
        let charge_minutes = ((need * 60.0 / draw).floor() as usize).min(duration);
        let s = start as usize;
        connected[s..s + duration].iter_mut().for_each(|c| *c = true);
        power_kw[s..s + charge_minutes]
            .iter_mut()
            .for_each(|p| *p = draw);
    }
    EvSeries {
        ev_id: ev_id(index),
        start_minute: 0,
        power_kw,
        connected,
    }
}

/// Change-point records of one dense series.
pub fn change_points(series: &EvSeries) -> Vec<MinuteRecord> {
    let n = series.len();
    let mut out = Vec::new();
    for t in 0..n {
        let changed = t == 0
            || series.power_kw[t] != series.power_kw[t - 1]
            || series.connected[t] != series.connected[t - 1];
        if changed || t + 1 == n {
            out.push(MinuteRecord {
                ev_id: series.ev_id.clone(),
                minute: series.start_minute + t as i64,
                power_kw: series.power_kw[t],
                connected: series.connected[t],
            });
        }
    }
    out
}

/// Generates the whole fleet as a change-point record stream, EV by EV.
pub fn generate_synthetic_fleet(cfg: &SynthFleetConfig) -> Result<Vec<MinuteRecord>> {
    cfg.validate()?;
    Ok((0..cfg.n_evs)
        .flat_map(|i| change_points(&synthetic_ev_series(cfg, i)))
        .collect())
}

/// Dense series for every EV, equivalent to resampling
/// [`generate_synthetic_fleet`]'s output.
pub fn generate_fleet_series(cfg: &SynthFleetConfig) -> Result<Vec<EvSeries>> {
    cfg.validate()?;
    Ok((0..cfg.n_evs).map(|i| synthetic_ev_series(cfg, i)).collect())
}

/// Synthetic capacity prices in EUR/kW/h with a daily shape and noise.
pub fn synthetic_prices(n_days: usize, seed: u64) -> Vec<(i64, u8, f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, &[u64::MAX]));
    let mut out = Vec::with_capacity(n_days * 24);
    for day in 0..n_days as i64 {
        for hour in 0..24u8 {
            let shape = 1.0 + 0.5 * ((hour as f64 - 6.0) / 24.0 * std::f64::consts::TAU).sin();
            let up = 0.02 * shape * rng.random_range(0.5..1.5);
            let down = 0.015 * (2.0 - shape) * rng.random_range(0.5..1.5);
            out.push((day, hour, up, down));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flex::{reconstruct_profiles, series_from_records};

    fn small() -> SynthFleetConfig {
        SynthFleetConfig {
            n_evs: 5,
            n_days: 6,
            ..Default::default()
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        assert_eq!(
            generate_synthetic_fleet(&small()).unwrap(),
            generate_synthetic_fleet(&small()).unwrap()
        );
        let other = SynthFleetConfig { seed: 8, ..small() };
        assert_ne!(
            generate_synthetic_fleet(&small()).unwrap(),
            generate_synthetic_fleet(&other).unwrap()
        );
    }

    #[test]
    fn empty_fleet() {
        let cfg = SynthFleetConfig { n_evs: 0, ..small() };
        assert!(generate_synthetic_fleet(&cfg).unwrap().is_empty());
    }

    #[test]
    fn change_points_round_trip_to_dense() {
        let cfg = small();
        let dense = generate_fleet_series(&cfg).unwrap();
        let sparse = generate_synthetic_fleet(&cfg).unwrap();
        assert_eq!(series_from_records(&sparse).unwrap(), dense);
    }

    #[test]
    fn sessions_respect_invariants() {
        let cfg = SynthFleetConfig { n_days: 20, ..small() };
        for s in generate_fleet_series(&cfg).unwrap() {
            let rec = reconstruct_profiles(&s).unwrap();
            let mut prev_end = i64::MIN;
            for sess in &rec.sessions {
                assert!(sess.start_minute < sess.end_minute);
                assert!(sess.start_minute >= prev_end);
                prev_end = sess.end_minute;
                let b = sess.start_minute as usize;
                let e = sess.end_minute as usize;
                let integral: f64 = s.power_kw[b..e].iter().map(|p| p / 60.0).sum();
                assert!((integral - sess.session_energy_kwh).abs() < 1e-9);
                // constant draw within the charger rating, then idle
                let p = &s.power_kw[b..e];
                let first_zero = p.iter().position(|&v| v == 0.0).unwrap_or(p.len());
                assert!(p[first_zero..].iter().all(|&v| v == 0.0));
                assert!(p[..first_zero].iter().all(|&v| v == p[0]));
                let max_level = cfg.charger_levels_kw.iter().cloned().fold(0.0, f64::max);
                assert!(p[0] <= max_level && (p.is_empty() || p[0] >= 0.0));
            }
        }
    }

    #[test]
    fn infeasible_configs_rejected() {
        let bad = [
            SynthFleetConfig { departure_mean_min: 1000.0, ..small() },
            SynthFleetConfig { arrival_mean_min: 100.0, ..small() },
            SynthFleetConfig { plug_in_prob: 1.5, ..small() },
            SynthFleetConfig { battery_min_kwh: 90.0, ..small() },
            SynthFleetConfig { charger_levels_kw: vec![], ..small() },
            SynthFleetConfig { n_days: 0, ..small() },
            SynthFleetConfig { power_frac_min: 0.0, ..small() },
            SynthFleetConfig { power_frac_min: 1.2, ..small() },
        ];
        for cfg in bad {
            assert!(matches!(generate_synthetic_fleet(&cfg), Err(Error::Config(_))));
        }
    }

    #[test]
    fn key_value_round_trip() {
        let cfg = SynthFleetConfig { seed: 99, n_evs: 3, ..Default::default() };
        let kv: BTreeMap<String, String> = cfg.to_pairs().into_iter().collect();
        let mut back = SynthFleetConfig::default();
        back.apply(&kv).unwrap();
        assert_eq!(back, cfg);
        let mut junk = BTreeMap::new();
        junk.insert("nope".to_string(), "1".to_string());
        assert!(back.apply(&junk).is_err());
    }
}
