use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tailbid::evaluate::{
    aggregate_sweeps, expand_daily_bids, quantile_cv_report, samples_by_hour, Method, SweepBand,
};
use tailbid::io::{self, BidRow, FitRow, Manifest, SplitRow, ValidationRow};
use tailbid::solvers::TailModel;
use tailbid::synth::{generate_fleet_series, synthetic_prices};
use tailbid::{
    count_violations, revenue, run_experiment, sensitivity_sweep,
    generate_synthetic_fleet, AnalyticalInputs, Bid, Error, Flexibility, HourlyFlexSample,
    PipelineConfig, PriceSeries, Result, RunSummary, SensitivityCurve, WeibullParams,
};

use crate::svg;
use crate::{Cli, Command, GlobalOpts, MethodArg};

fn config_error(path: &Path, e: Error) -> Error {
    match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => Error::Config(format!("cannot read config {}: {other}", path.display())),
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))
}

fn load_config(g: &GlobalOpts) -> Result<PipelineConfig> {
    let mut c = PipelineConfig::default();
    if let Some(p) = &g.config {
        let kv = io::read_kv_file(p).map_err(|e| config_error(p, e))?;
        c.apply(&kv).map_err(|e| config_error(p, e))?;
    }
    if let Some(s) = g.seed {
        c.set("seed", &s.to_string())?;
    }
    if let Some(e) = g.eps {
        c.eps = e;
    }
    if let Some(a) = g.alpha {
        c.alpha = Some(a);
    }
    Ok(c)
}

fn methods(m: MethodArg) -> Vec<Method> {
    match m {
        MethodArg::Analytical => vec![Method::Analytical],
        MethodArg::Scenario => vec![Method::Scenario],
        MethodArg::Both => vec![Method::Analytical, Method::Scenario],
    }
}

struct Ctx {
    cfg: PipelineConfig,
    dir: PathBuf,
    command: &'static str,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn manifest(&self, inputs: &[&Path]) -> Result<Manifest> {
        inputs.iter().try_fold(
            Manifest::new(self.command, self.cfg.hash(), self.cfg.seed),
            |m, p| m.with_input(p),
        )
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let mut cfg = load_config(&cli.global)?;
    let command = match &cli.command {
        Command::Synth { evs, days, .. } => {
            if let Some(n) = evs {
                cfg.synth.n_evs = *n;
            }
            if let Some(d) = days {
                cfg.synth.n_days = *d;
            }
            "synth"
        }
        Command::Estimate { .. } => "estimate",
        Command::Bid { runs, in_sample, .. } => {
            if let Some(r) = runs {
                cfg.n_runs = *r;
            }
            if in_sample.is_some() {
                cfg.in_sample_size = *in_sample;
            }
            "bid"
        }
        Command::Validate { .. } => "validate",
        Command::Sweep { alphas } => {
            if let Some(a) = alphas {
                cfg.alphas = a.clone();
            }
            "sweep"
        }
        Command::Report { .. } => "report",
    };
    cfg.validate()?;
    let ctx = Ctx {
        cfg,
        dir: cli.global.dir.clone(),
        command,
    };
    match &cli.command {
        Command::Synth {
            out,
            prices_out,
            no_prices,
            dense,
            ..
        } => synth(&ctx, out.as_deref(), prices_out.as_deref(), *no_prices, *dense),
        Command::Estimate { input, out } => estimate(&ctx, input.as_deref(), out.as_deref()),
        Command::Bid { input, .. } => bid(&ctx, input.as_deref(), &methods(cli.global.method)),
        Command::Validate {
            hourly,
            bids,
            prices,
        } => validate(&ctx, hourly.as_deref(), bids.as_deref(), prices.as_deref()),
        Command::Sweep { .. } => sweep(&ctx),
        Command::Report { hour, flexibility } => {
            let f: Flexibility = flexibility.parse()?;
            report(&ctx, *hour, f)
        }
    }
}

// ------------------------------------------------------------------ synth

fn synth(ctx: &Ctx, out: Option<&Path>, prices_out: Option<&Path>, no_prices: bool, dense: bool) -> Result<()> {
    let s = &ctx.cfg.synth;
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| ctx.path("minutes.csv"));
    let records = if dense {
        generate_fleet_series(s)?
            .iter()
            .flat_map(|ser| {
                (0..ser.len()).map(move |i| {
                    tailbid::MinuteRecord::new(
                        ser.ev_id.clone(),
                        ser.start_minute + i as i64,
                        ser.power_kw[i],
                        ser.connected[i],
                    )
                })
            })
            .collect()
    } else {
        generate_synthetic_fleet(s)?
    };
    let manifest = ctx.manifest(&[])?;
    io::write_csv_artifact(&out, &io::write_minute_records(&records)?, &manifest)?;
    eprintln!(
        "synth: {} EVs x {} days -> {} records in {}",
        s.n_evs,
        s.n_days,
        records.len(),
        out.display()
    );
    if !no_prices {
        let p = prices_out
            .map(Path::to_path_buf)
            .unwrap_or_else(|| ctx.path("prices.csv"));
        let rows = synthetic_prices(s.n_days, ctx.cfg.seed);
        io::write_csv_artifact(&p, &io::write_prices(&rows)?, &manifest)?;
        eprintln!("synth: {} price rows in {}", rows.len(), p.display());
    }
    Ok(())
}

// --------------------------------------------------------------- estimate

fn estimate(ctx: &Ctx, input: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let input = input.map(Path::to_path_buf).unwrap_or_else(|| ctx.path("minutes.csv"));
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| ctx.path("hourly.csv"));
    let parsed = io::read_minute_records(open(&input)?)?;
    for r in parsed.rejected.iter().take(5) {
        eprintln!("estimate: rejected line {}: {}", r.line, r.reason);
    }
    eprintln!(
        "estimate: {} rows accepted, {} rejected",
        parsed.records.len(),
        parsed.rejected.len()
    );
    let est = tailbid::flex::estimate_from_records(&parsed.records)?;
    let manifest = ctx.manifest(&[&input])?;
    io::write_csv_artifact(&out, &io::write_hourly(&est.hourly.samples)?, &manifest)?;
    eprintln!(
        "estimate: {} EVs ({} without sessions), {} sessions, {} hourly samples, {} partial hours dropped -> {}",
        est.n_evs,
        est.unusable_evs.len(),
        est.n_sessions,
        est.hourly.samples.len(),
        est.hourly.dropped_hours.len(),
        out.display()
    );
    Ok(())
}

// -------------------------------------------------------------------- bid

fn read_hourly(path: &Path) -> Result<Vec<HourlyFlexSample>> {
    let s = io::read_hourly(open(path)?)?;
    if s.is_empty() {
        return Err(Error::Data(format!("{} has no hourly samples", path.display())));
    }
    Ok(s)
}

fn remove_artifact(path: &Path) -> Result<()> {
    for p in [path.to_path_buf(), io::sidecar_path(path)] {
        if p.exists() {
            fs::remove_file(p)?;
        }
    }
    Ok(())
}

fn bid(ctx: &Ctx, input: Option<&Path>, methods: &[Method]) -> Result<()> {
    let input = input.map(Path::to_path_buf).unwrap_or_else(|| ctx.path("hourly.csv"));
    let samples = read_hourly(&input)?;
    let exp = ctx.cfg.experiment()?;
    let result = run_experiment(&samples, &exp)?;
    let manifest = ctx.manifest(&[&input])?;

    io::write_csv_artifact(
        &ctx.path("bids.csv"),
        &io::write_bids(&io::bid_rows(&result, methods))?,
        &manifest,
    )?;
    let splits = io::split_rows(&result);
    io::write_csv_artifact(&ctx.path("splits.csv"), &io::write_splits(&splits)?, &manifest)?;
    if methods.contains(&Method::Analytical) {
        io::write_csv_artifact(&ctx.path("fits.csv"), &io::write_fits(&io::fit_rows(&result))?, &manifest)?;
        io::write_csv_artifact(&ctx.path("ks.csv"), &io::write_ks(&io::ks_rows(&result))?, &manifest)?;
    } else {
        remove_artifact(&ctx.path("fits.csv"))?;
        remove_artifact(&ctx.path("ks.csv"))?;
    }
    for run in 0..exp.n_runs {
        let hashes: String = splits
            .iter()
            .filter(|s| s.run == run)
            .map(|s| s.split_hash.as_str())
            .collect();
        eprintln!(
            "bid: run {run} split digest {}",
            &io::sha256_hex(hashes.as_bytes())[..16]
        );
    }
    let names: Vec<&str> = methods.iter().map(|m| m.as_str()).collect();
    eprintln!(
        "bid: {} runs x {} hours, in-sample size {}, methods {} -> {}",
        exp.n_runs,
        result.summary_scenario.hours.len(),
        exp.in_sample_size,
        names.join(","),
        ctx.dir.display()
    );
    Ok(())
}

// --------------------------------------------------------------- validate

#[derive(Serialize, Deserialize)]
struct RevenueEntry {
    method: Method,
    revenue_eur: f64,
    n_slots: usize,
}

fn validate(ctx: &Ctx, hourly: Option<&Path>, bids: Option<&Path>, prices: Option<&Path>) -> Result<()> {
    let hourly = hourly.map(Path::to_path_buf).unwrap_or_else(|| ctx.path("hourly.csv"));
    let bids_path = bids.map(Path::to_path_buf).unwrap_or_else(|| ctx.path("bids.csv"));
    let splits_path = ctx.path("splits.csv");
    let samples = read_hourly(&hourly)?;
    let bid_rows = io::read_bids(open(&bids_path)?)?;
    let splits = io::read_splits(open(&splits_path)?)?;
    let by_hour = samples_by_hour(&samples);
    let split_of: BTreeMap<(usize, u8), &SplitRow> =
        splits.iter().map(|s| ((s.run, s.hour), s)).collect();

    let mut rows = Vec::with_capacity(bid_rows.len());
    for b in &bid_rows {
        let split = split_of.get(&(b.run, b.hour)).ok_or_else(|| {
            Error::Data(format!("no split for run {} hour {}", b.run, b.hour))
        })?;
        let hs = by_hour
            .get(&b.hour)
            .ok_or_else(|| Error::Data(format!("no hourly samples for hour {}", b.hour)))?;
        let ins: BTreeSet<i64> = split.in_sample_days.iter().copied().collect();
        let oos: Vec<_> = hs
            .iter()
            .filter(|s| !ins.contains(&s.day))
            .map(|s| s.triple())
            .collect();
        rows.push(ValidationRow {
            run: b.run,
            hour: b.hour,
            method: b.method,
            report: count_violations(&b.bid(), &oos)?,
        });
    }

    let mut inputs: Vec<&Path> = vec![&hourly, &bids_path, &splits_path];
    let price_path = prices
        .map(Path::to_path_buf)
        .or_else(|| Some(ctx.path("prices.csv")).filter(|p| p.exists()));
    if let Some(p) = &price_path {
        inputs.push(p);
    }
    let manifest = ctx.manifest(&inputs)?;

    io::write_json_artifact(&ctx.path("validation.json"), &rows, &manifest)?;
    io::write_csv_artifact(&ctx.path("validation.csv"), &io::write_validation(&rows)?, &manifest)?;

    let mut summaries: BTreeMap<Method, RunSummary> = BTreeMap::new();
    for m in [Method::Analytical, Method::Scenario] {
        let entries: Vec<(u8, Bid, f64)> = bid_rows
            .iter()
            .zip(&rows)
            .filter(|(b, _)| b.method == m)
            .map(|(b, v)| (b.hour, b.bid(), v.report.joint_rate))
            .collect();
        if !entries.is_empty() {
            summaries.insert(m, RunSummary::from_entries(entries));
        }
    }
    let named: BTreeMap<&str, &RunSummary> = summaries.iter().map(|(m, s)| (m.as_str(), s)).collect();
    io::write_json_artifact(&ctx.path("summary.json"), &named, &manifest)?;
    let pairs: Vec<(Method, &RunSummary)> = summaries.iter().map(|(m, s)| (*m, s)).collect();
    io::write_csv_artifact(&ctx.path("summary.csv"), &io::write_summary(&pairs)?, &manifest)?;

    let draw = match ctx.cfg.cv_draw_size {
        Some(d) => d,
        None => ctx.cfg.in_sample_size()?,
    };
    let cv = quantile_cv_report(&samples, draw, ctx.cfg.cv_reps, ctx.cfg.eps, ctx.cfg.seed)?;
    io::write_json_artifact(&ctx.path("cv.json"), &cv, &manifest)?;
    io::write_csv_artifact(&ctx.path("cv.csv"), &io::write_cv(&cv)?, &manifest)?;

    if let Some(p) = &price_path {
        let prices = PriceSeries::new(io::read_prices(open(p)?)?)?;
        let days: Vec<i64> = samples
            .iter()
            .map(|s| s.day)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut entries = Vec::new();
        for (m, s) in &summaries {
            let grid = expand_daily_bids(&s.mean_bids(), &days);
            entries.push(RevenueEntry {
                method: *m,
                revenue_eur: revenue(&grid, &prices)?,
                n_slots: grid.len(),
            });
        }
        io::write_json_artifact(&ctx.path("revenue.json"), &entries, &manifest)?;
        let mut w = csv_bytes(&["method", "revenue_eur", "n_slots"]);
        for e in &entries {
            w.push_str(&format!("{},{},{}\n", e.method, e.revenue_eur, e.n_slots));
        }
        io::write_csv_artifact(&ctx.path("revenue.csv"), w.as_bytes(), &manifest)?;
        for e in &entries {
            eprintln!("validate: {} revenue {:.2} EUR over {} slots", e.method, e.revenue_eur, e.n_slots);
        }
    }
    for (m, s) in &summaries {
        let worst = s.hours.iter().map(|h| h.joint_rate.mean).fold(0.0, f64::max);
        eprintln!(
            "validate: {m} max hourly mean joint violation rate {worst:.3} over {} runs",
            s.n_runs
        );
    }
    Ok(())
}

fn csv_bytes(header: &[&str]) -> String {
    format!("{}\n", header.join(","))
}

// ------------------------------------------------------------------ sweep

#[derive(Serialize, Deserialize)]
struct SweepDoc {
    alphas: Vec<f64>,
    curves: Vec<SensitivityCurve>,
    bands: Vec<SweepBand>,
}

fn tail_model(row: &FitRow) -> Result<TailModel> {
    let params = match (row.kappa, row.gamma) {
        (Some(k), Some(g)) => Some(WeibullParams::new(k, g)?),
        _ => None,
    };
    Ok(TailModel {
        threshold_kw: row.threshold_kw,
        params,
    })
}

/// Inputs of every (run, hour) in `fits.csv`, grouped by run.
fn inputs_by_run(fits: &[FitRow], eps: f64) -> Result<BTreeMap<usize, Vec<(u8, AnalyticalInputs)>>> {
    let mut grouped: BTreeMap<(usize, u8), [Option<TailModel>; 3]> = BTreeMap::new();
    for r in fits {
        grouped.entry((r.run, r.hour)).or_default()[r.flexibility.index()] = Some(tail_model(r)?);
    }
    let mut out: BTreeMap<usize, Vec<(u8, AnalyticalInputs)>> = BTreeMap::new();
    for ((run, hour), [up, down, e20]) in grouped {
        let missing = || Error::Data(format!("fits for run {run} hour {hour} are incomplete"));
        out.entry(run).or_default().push((
            hour,
            AnalyticalInputs {
                up: up.ok_or_else(missing)?,
                down: down.ok_or_else(missing)?,
                e20: e20.ok_or_else(missing)?,
                eps,
            },
        ));
    }
    Ok(out)
}

fn read_fits(ctx: &Ctx) -> Result<(PathBuf, Vec<FitRow>)> {
    let p = ctx.path("fits.csv");
    if !p.exists() {
        return Err(Error::Data(format!(
            "{} not found; run `bid` with --method analytical or both first",
            p.display()
        )));
    }
    let rows = io::read_fits(open(&p)?)?;
    Ok((p, rows))
}

fn compute_sweep(ctx: &Ctx, fits: &[FitRow]) -> Result<SweepDoc> {
    let curves = inputs_by_run(fits, ctx.cfg.eps)?
        .values()
        .map(|inp| sensitivity_sweep(inp, &ctx.cfg.alphas))
        .collect::<Result<Vec<_>>>()?;
    let bands = aggregate_sweeps(&curves)?;
    Ok(SweepDoc {
        alphas: ctx.cfg.alphas.clone(),
        curves,
        bands,
    })
}

fn sweep(ctx: &Ctx) -> Result<()> {
    let (fits_path, fits) = read_fits(ctx)?;
    let doc = compute_sweep(ctx, &fits)?;
    let manifest = ctx.manifest(&[&fits_path])?;
    io::write_json_artifact(&ctx.path("sensitivity.json"), &doc, &manifest)?;
    io::write_csv_artifact(&ctx.path("sensitivity.csv"), &io::write_sensitivity(&doc.curves)?, &manifest)?;
    let mut w = csv_bytes(&["alpha", "mean", "ci_lo", "ci_hi", "down_fraction_mean"]);
    for b in &doc.bands {
        let frac = b.down_fraction_mean.map(|f| f.to_string()).unwrap_or_default();
        w.push_str(&format!("{},{},{},{},{}\n", b.alpha, b.mean, b.ci_lo, b.ci_hi, frac));
    }
    io::write_csv_artifact(&ctx.path("sensitivity_bands.csv"), w.as_bytes(), &manifest)?;
    for b in &doc.bands {
        eprintln!(
            "sweep: alpha {:<8} mean total bid {:10.2} kW  95% CI [{:.2}, {:.2}]",
            b.alpha, b.mean, b.ci_lo, b.ci_hi
        );
    }
    Ok(())
}

// ----------------------------------------------------------------- report

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn hourly_means<T>(rows: &[T], key: impl Fn(&T) -> Option<(u8, f64)>) -> [f64; 24] {
    let mut acc: [Vec<f64>; 24] = Default::default();
    for r in rows {
        if let Some((h, v)) = key(r) {
            acc[h as usize].push(v);
        }
    }
    acc.map(|v| mean(&v))
}

fn report(ctx: &Ctx, hour: Option<u8>, flex: Flexibility) -> Result<()> {
    let bids_path = ctx.path("bids.csv");
    let val_path = ctx.path("validation.csv");
    let splits_path = ctx.path("splits.csv");
    let hourly_path = ctx.path("hourly.csv");
    let bid_rows = io::read_bids(open(&bids_path)?)?;
    let val_rows = io::read_validation(open(&val_path)?)?;
    let (fits_path, fits) = read_fits(ctx)?;
    let splits = io::read_splits(open(&splits_path)?)?;
    let samples = read_hourly(&hourly_path)?;
    let manifest = ctx.manifest(&[&bids_path, &val_path, &fits_path, &splits_path, &hourly_path])?;
    let meta = serde_json::to_string(&manifest)?;
    let plots = ctx.dir.join("plots");
    let hours: Vec<String> = (0..24).map(|h| h.to_string()).collect();

    let present: Vec<Method> = [Method::Analytical, Method::Scenario]
        .into_iter()
        .filter(|m| bid_rows.iter().any(|b| b.method == *m))
        .collect();
    let by = |m: Method, f: fn(&BidRow) -> f64| {
        hourly_means(&bid_rows, move |b| (b.method == m).then(|| (b.hour, f(b))))
    };
    let mut bar_series = Vec::new();
    for (i, &m) in present.iter().enumerate() {
        bar_series.push((
            if m == Method::Analytical { "analytical up" } else { "scenario up" },
            svg::PALETTE[2 * i],
            by(m, |b| b.b_up_kw).to_vec(),
        ));
        bar_series.push((
            if m == Method::Analytical { "analytical down" } else { "scenario down" },
            svg::PALETTE[2 * i + 1],
            by(m, |b| b.b_down_kw).to_vec(),
        ));
    }
    let written = |name: &str, body: String| -> Result<PathBuf> {
        let p = plots.join(name);
        io::write_atomic(&p, body.as_bytes())?;
        Ok(p)
    };
    let mut out = vec![written(
        "bids.svg",
        svg::grouped_bars("Mean bid per hour", &meta, &hours, &bar_series, "bid [kW]", None),
    )?];

    let rate_series: Vec<(&str, &str, Vec<f64>)> = present
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            (
                m.as_str(),
                svg::PALETTE[2 * i],
                hourly_means(&val_rows, |v| (v.method == m).then(|| (v.hour, v.report.joint_rate))).to_vec(),
            )
        })
        .collect();
    out.push(written(
        "violations.svg",
        svg::grouped_bars(
            "Mean out-of-sample joint violation rate",
            &meta,
            &hours,
            &rate_series,
            "violation rate",
            Some((ctx.cfg.eps, "eps")),
        ),
    )?);

    let sens_path = ctx.path("sensitivity.json");
    let bands = if sens_path.exists() {
        io::read_json_artifact::<SweepDoc>(&sens_path)?.data.bands
    } else {
        compute_sweep(ctx, &fits)?.bands
    };
    let pts: Vec<(f64, f64, f64, f64)> = bands.iter().map(|b| (b.alpha, b.mean, b.ci_lo, b.ci_hi)).collect();
    out.push(written(
        "sensitivity.svg",
        svg::band_chart("Total daily analytical bid vs alpha", &meta, &pts, "alpha (log scale)", "total bid [kW]"),
    )?);

    let hour = match hour {
        Some(h) if h < 24 => h,
        Some(h) => return Err(Error::Config(format!("hour {h} out of range"))),
        None => {
            let m = present.first().copied().unwrap_or(Method::Analytical);
            let up = by(m, |b| b.b_up_kw);
            let down = by(m, |b| b.b_down_kw);
            (0..24u8)
                .max_by(|&a, &b| {
                    (up[a as usize] + down[a as usize]).total_cmp(&(up[b as usize] + down[b as usize]))
                })
                .unwrap_or(0)
        }
    };
    let fit = fits
        .iter()
        .filter(|f| f.hour == hour && f.flexibility == flex && f.kappa.is_some())
        .min_by_key(|f| f.run)
        .ok_or_else(|| Error::Data(format!("no fitted {flex} tail for hour {hour}")))?;
    let split = splits
        .iter()
        .find(|s| s.run == fit.run && s.hour == hour)
        .ok_or_else(|| Error::Data(format!("no split for run {} hour {hour}", fit.run)))?;
    let days: BTreeSet<i64> = split.in_sample_days.iter().copied().collect();
    let tail: Vec<f64> = samples
        .iter()
        .filter(|s| s.hour == hour && days.contains(&s.day))
        .map(|s| match flex {
            Flexibility::Up => s.r_up_kw,
            Flexibility::Down => s.r_down_kw,
            Flexibility::E20 => s.r_e20_kw,
        })
        .filter(|&r| r < fit.threshold_kw)
        .map(|r| fit.threshold_kw - r)
        .collect();
    if tail.len() != fit.n_tail {
        return Err(Error::Data(format!(
            "hourly data gives {} tail points for run {} hour {hour}, fits.csv records {}",
            tail.len(),
            fit.run,
            fit.n_tail
        )));
    }
    let params = tail_model(fit)?.params.expect("filtered on kappa");
    out.push(written(
        "tail_cdf.svg",
        svg::cdf_overlay(
            &format!("Tail fit, {flex} flexibility, hour {hour}, run {}", fit.run),
            &meta,
            &tail,
            |x| params.cdf(x),
            "distance below the empirical quantile [kW]",
        ),
    )?);
    for p in &out {
        eprintln!("report: wrote {}", p.display());
    }
    Ok(())
}
