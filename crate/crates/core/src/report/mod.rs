//! Repeated fits per region, aggregation, correlations and artifacts.

mod plot;
mod stats;
mod tables;

pub use plot::{emit_plot, render_svg, Annotation, PlotData, PlotSummary};
pub use stats::{mean_std, pearson, MeanStd};
pub use tables::{emit_report, read_summary_table, region_file_stem, ReportFormat, SummaryRow};

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{
    build_region_dataset, load_case_csv, load_region_metadata, synth_generate, PipelineOptions,
    RegionDataset, RegionMeta,
};
use crate::error::{Error, Result};
use crate::inverse::{FitOutcome, SolverRegistry, SolverSettings};
use crate::sir::SirParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    FitSir,
    FitRt,
    Simulate,
    Report,
}

impl Mode {
    /// Registered solver used by the fitting modes.
    pub fn solver_name(self) -> Option<&'static str> {
        match self {
            Mode::FitSir => Some("sir"),
            Mode::FitRt => Some("rt"),
            Mode::Simulate | Mode::Report => None,
        }
    }
}

/// Noiseless or noisy RK4 data for every requested region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub alpha: f64,
    pub beta: f64,
    pub i0: f64,
    pub days: usize,
    /// Used when the region has no metadata entry.
    #[serde(default)]
    pub population: Option<f64>,
    #[serde(default)]
    pub noise_std: f64,
    #[serde(default)]
    pub noise_seed: u64,
}

/// Where region data comes from. A region is looked up in `region_json`
/// first, then built from `cases_csv`, then generated from `synthetic`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetSources {
    pub region_json: Vec<PathBuf>,
    pub cases_csv: Option<PathBuf>,
    pub metadata_csv: Option<PathBuf>,
    pub synthetic: Option<SyntheticSpec>,
    pub pipeline: PipelineOptions,
    /// Summary tables read by the report mode.
    pub report_tables: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub mode: Mode,
    /// Empty means every region listed in the metadata file.
    pub regions: Vec<String>,
    pub repetitions: usize,
    pub base_seed: u64,
    pub workers: usize,
    pub output_dir: PathBuf,
    pub datasets: DatasetSources,
    pub solver: SolverSettings,
    /// Fit R_t with each dataset's own recovery rate instead of `solver.rt.alpha`.
    pub use_region_alpha: bool,
    /// Regions left out of the correlations, e.g. a national aggregate.
    pub correlation_exclude: Vec<String>,
    pub annotations: Vec<Annotation>,
    pub plots: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::FitSir,
            regions: Vec::new(),
            repetitions: 10,
            base_seed: 0,
            workers: 1,
            output_dir: PathBuf::from("out"),
            datasets: DatasetSources::default(),
            solver: SolverSettings::default(),
            use_region_alpha: false,
            correlation_exclude: vec!["Germany".into()],
            annotations: Vec::new(),
            plots: true,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        self.solver.train.validate()?;
        self.solver.rt.validate()?;
        if let Some(net) = &self.solver.network {
            net.validate()?;
        }
        if self.mode == Mode::Report && self.datasets.report_tables.is_empty() {
            return Err(Error::Config("report mode needs datasets.report_tables".into()));
        }
        if self.mode == Mode::Simulate && self.datasets.synthetic.is_none() {
            return Err(Error::Config("simulate mode needs datasets.synthetic".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunValues {
    Sir {
        alpha_hat: f64,
        beta_hat: f64,
        final_data_loss: f64,
        final_physics_loss: f64,
    },
    Rt {
        days_above_one: usize,
        peak_rt: f64,
        stage1_data_loss: f64,
        final_data_loss: f64,
        final_physics_loss: f64,
    },
}

impl RunValues {
    /// Values that get aggregated, in table order.
    fn metrics(&self) -> Vec<(&'static str, f64)> {
        match *self {
            RunValues::Sir { alpha_hat, beta_hat, .. } => vec![("alpha", alpha_hat), ("beta", beta_hat)],
            RunValues::Rt { days_above_one, peak_rt, .. } => {
                vec![("days_above_one", days_above_one as f64), ("peak_rt", peak_rt)]
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub repetition: usize,
    pub seed: u64,
    pub values: RunValues,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub region: String,
    pub repetition: usize,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub name: String,
    pub mean: f64,
    pub std: f64,
}

/// Per-day mean and spread of R_t over the successful runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RtBand {
    pub dates: Vec<NaiveDate>,
    pub t: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionAggregate {
    pub region: String,
    pub population: f64,
    pub vaccination_pct: Option<f64>,
    /// Recovery rate held fixed in R_t fits.
    pub alpha_used: Option<f64>,
    pub metrics: Vec<Metric>,
    pub runs: Vec<RunRecord>,
    pub rt_band: Option<RtBand>,
}

impl RegionAggregate {
    pub fn metric(&self, name: &str) -> Option<&Metric> {
        self.metrics.iter().find(|m| m.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub pair: String,
    pub n: usize,
    pub r: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    pub mode: Mode,
    pub regions: Vec<RegionAggregate>,
    pub correlations: Vec<Correlation>,
    pub failures: Vec<RunFailure>,
}

impl AggregateResult {
    pub fn region(&self, name: &str) -> Option<&RegionAggregate> {
        self.regions.iter().find(|r| r.region == name)
    }

    pub fn correlation(&self, pair: &str) -> Option<&Correlation> {
        self.correlations.iter().find(|c| c.pair == pair)
    }
}

const VACCINATION: &str = "vaccination_pct";

/// Pearson correlation of every metric mean against vaccination coverage,
/// over regions that have coverage and are not excluded. Metrics with fewer
/// than three such regions or no spread are skipped.
pub fn vaccination_correlations(regions: &[RegionAggregate], exclude: &[String]) -> Vec<Correlation> {
    let pool: Vec<&RegionAggregate> = regions
        .iter()
        .filter(|r| r.vaccination_pct.is_some() && !exclude.contains(&r.region))
        .collect();
    let mut names: Vec<&str> = Vec::new();
    for r in &pool {
        for m in &r.metrics {
            if !names.contains(&m.name.as_str()) {
                names.push(&m.name);
            }
        }
    }
    let mut out = Vec::new();
    for name in names {
        let (x, y): (Vec<f64>, Vec<f64>) = pool
            .iter()
            .filter_map(|r| Some((r.metric(name)?.mean, r.vaccination_pct?)))
            .unzip();
        if x.len() < 3 {
            continue;
        }
        match pearson(&x, &y) {
            Ok((r, p)) => out.push(Correlation { pair: format!("{name} vs {VACCINATION}"), n: x.len(), r, p }),
            Err(e) => log::warn!("skipping correlation for {name}: {e}"),
        }
    }
    out
}

struct Inputs {
    regions: Vec<String>,
    meta: Vec<RegionMeta>,
}

impl Inputs {
    fn load(config: &ExperimentConfig) -> Result<Self> {
        let meta = match &config.datasets.metadata_csv {
            Some(p) => load_region_metadata(p)?,
            None => Vec::new(),
        };
        let regions = if config.regions.is_empty() {
            meta.iter().map(|m| m.region.clone()).collect()
        } else {
            config.regions.clone()
        };
        if regions.is_empty() {
            return Err(Error::Config("no regions given and no metadata to list them".into()));
        }
        Ok(Self { regions, meta })
    }

    fn meta(&self, region: &str) -> Option<&RegionMeta> {
        self.meta.iter().find(|m| m.region == region)
    }
}

fn resolve_datasets(config: &ExperimentConfig, inputs: &Inputs) -> Result<Vec<RegionDataset>> {
    let src = &config.datasets;
    let mut from_json = Vec::new();
    for p in &src.region_json {
        from_json.push(RegionDataset::load(p)?);
    }
    let cases = src.cases_csv.as_ref().map(load_case_csv).transpose()?;
    let mut out = Vec::with_capacity(inputs.regions.len());
    for region in &inputs.regions {
        let meta = inputs.meta(region);
        let mut ds = if let Some(ds) = from_json.iter().find(|d| &d.region == region) {
            ds.clone()
        } else if let Some(load) = &cases {
            let meta = meta.ok_or_else(|| Error::Config(format!("{region}: no population in the metadata")))?;
            let records = load.region(region);
            if records.is_empty() {
                return Err(Error::Input(format!("{region}: no case records")));
            }
            build_region_dataset(region, &records, meta.population, &src.pipeline)?
        } else if let Some(spec) = &src.synthetic {
            let n = meta.map(|m| m.population).or(spec.population).ok_or_else(|| {
                Error::Config(format!("{region}: synthetic data needs a population"))
            })?;
            let params = SirParams::new(spec.alpha, spec.beta, n)?;
            let mut ds = synth_generate(&params, spec.i0, spec.days, spec.noise_std, spec.noise_seed)?;
            ds.region = region.clone();
            ds
        } else {
            return Err(Error::Config(format!("{region}: no dataset source")));
        };
        if let Some(v) = meta.and_then(|m| m.vaccination_pct) {
            ds.vaccination_pct = Some(v);
        }
        out.push(ds);
    }
    Ok(out)
}

fn fit_aggregate(config: &ExperimentConfig, datasets: &[RegionDataset]) -> Result<AggregateResult> {
    let name = config.mode.solver_name().ok_or_else(|| Error::Internal("not a fitting mode".into()))?;
    let registry = SolverRegistry::default();
    let solver = registry.get(name)?;

    let mut settings = Vec::with_capacity(datasets.len());
    for ds in datasets {
        let mut s = config.solver.clone();
        if config.mode == Mode::FitRt && config.use_region_alpha {
            s.rt.alpha = ds.alpha_exp.ok_or_else(|| {
                Error::Config(format!("{}: use_region_alpha set but the dataset has no alpha_exp", ds.region))
            })?;
        }
        settings.push(s);
    }

    let jobs: Vec<(usize, usize)> = (0..datasets.len())
        .flat_map(|d| (0..config.repetitions).map(move |k| (d, k)))
        .collect();
    let run = |&(d, k): &(usize, usize)| {
        let seed = config.base_seed + k as u64;
        log::info!("{}: run {} (seed {seed})", datasets[d].region, k + 1);
        solver.fit(&datasets[d], &settings[d], seed)
    };
    let outcomes: Vec<Result<FitOutcome>> = if config.workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::Internal(e.to_string()))?;
        pool.install(|| jobs.par_iter().map(run).collect())
    } else {
        jobs.iter().map(run).collect()
    };

    let mut regions: Vec<RegionAggregate> = datasets
        .iter()
        .zip(&settings)
        .map(|(ds, s)| RegionAggregate {
            region: ds.region.clone(),
            population: ds.n,
            vaccination_pct: ds.vaccination_pct,
            alpha_used: (config.mode == Mode::FitRt).then_some(s.rt.alpha),
            metrics: Vec::new(),
            runs: Vec::new(),
            rt_band: None,
        })
        .collect();
    let mut failures = Vec::new();
    let mut rt_runs: Vec<Vec<crate::sir::RtSeries>> = vec![Vec::new(); datasets.len()];
    for (&(d, k), outcome) in jobs.iter().zip(outcomes) {
        let seed = config.base_seed + k as u64;
        let values = match outcome {
            Ok(FitOutcome::Sir(fit)) => {
                for w in &fit.warnings {
                    log::warn!("{} seed {seed}: {w:?}", datasets[d].region);
                }
                RunValues::Sir {
                    alpha_hat: fit.alpha_hat,
                    beta_hat: fit.beta_hat,
                    final_data_loss: fit.final_data_loss,
                    final_physics_loss: fit.final_physics_loss,
                }
            }
            Ok(FitOutcome::Rt(fit)) => {
                let v = RunValues::Rt {
                    days_above_one: fit.summary.days_above_one,
                    peak_rt: fit.summary.peak_rt,
                    stage1_data_loss: fit.stage1_data_loss,
                    final_data_loss: fit.final_data_loss,
                    final_physics_loss: fit.final_physics_loss,
                };
                rt_runs[d].push(fit.series);
                v
            }
            Err(e) if e.is_training_failure() => {
                log::error!("{} seed {seed}: {e}", datasets[d].region);
                failures.push(RunFailure {
                    region: datasets[d].region.clone(),
                    repetition: k,
                    seed,
                    message: e.to_string(),
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        regions[d].runs.push(RunRecord { repetition: k, seed, values });
    }

    for (agg, (ds, series)) in regions.iter_mut().zip(datasets.iter().zip(&rt_runs)) {
        agg.metrics = summarize_runs(&agg.runs)?;
        agg.rt_band = rt_band(ds, series)?;
    }
    let correlations = vaccination_correlations(&regions, &config.correlation_exclude);
    Ok(AggregateResult { mode: config.mode, regions, correlations, failures })
}

fn summarize_runs(runs: &[RunRecord]) -> Result<Vec<Metric>> {
    let Some(first) = runs.first() else {
        return Ok(Vec::new());
    };
    let names: Vec<&str> = first.values.metrics().iter().map(|(n, _)| *n).collect();
    names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let vals: Vec<f64> = runs.iter().map(|r| r.values.metrics()[j].1).collect();
            let s = mean_std(&vals)?;
            Ok(Metric { name: (*name).to_string(), mean: s.mean, std: s.std })
        })
        .collect()
}

fn rt_band(ds: &RegionDataset, runs: &[crate::sir::RtSeries]) -> Result<Option<RtBand>> {
    let Some(first) = runs.first() else {
        return Ok(None);
    };
    let mut mean = Vec::with_capacity(first.t.len());
    let mut std = Vec::with_capacity(first.t.len());
    for j in 0..first.t.len() {
        let vals: Vec<f64> = runs.iter().map(|s| s.rt[j]).collect();
        let s = mean_std(&vals)?;
        mean.push(s.mean);
        std.push(s.std);
    }
    let dates = first
        .t
        .iter()
        .map(|&t| {
            ds.dates
                .get(t as usize)
                .copied()
                .ok_or_else(|| Error::Internal(format!("day {t} outside {}", ds.region)))
        })
        .collect::<Result<_>>()?;
    Ok(Some(RtBand { dates, t: first.t.clone(), mean, std }))
}

fn simulate_aggregate(config: &ExperimentConfig, datasets: &[RegionDataset]) -> Result<AggregateResult> {
    let regions = datasets
        .iter()
        .map(|ds| {
            let s = &ds.series;
            let (peak_day, peak) = s
                .i
                .iter()
                .copied()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (k, v)| if v > acc.1 { (k, v) } else { acc });
            let metric = |name: &str, v: f64| Metric { name: name.into(), mean: v, std: 0.0 };
            RegionAggregate {
                region: ds.region.clone(),
                population: ds.n,
                vaccination_pct: ds.vaccination_pct,
                alpha_used: None,
                metrics: vec![
                    metric("peak_infected", peak),
                    metric("peak_day", peak_day as f64),
                    metric("final_removed", s.r[s.len() - 1]),
                ],
                runs: Vec::new(),
                rt_band: None,
            }
        })
        .collect();
    Ok(AggregateResult { mode: config.mode, regions, correlations: Vec::new(), failures: Vec::new() })
}

fn report_aggregate(config: &ExperimentConfig, inputs: &Inputs) -> Result<AggregateResult> {
    let mut regions: Vec<RegionAggregate> = inputs
        .regions
        .iter()
        .map(|name| {
            let meta = inputs.meta(name);
            RegionAggregate {
                region: name.clone(),
                population: meta.map_or(f64::NAN, |m| m.population),
                vaccination_pct: meta.and_then(|m| m.vaccination_pct),
                alpha_used: None,
                metrics: Vec::new(),
                runs: Vec::new(),
                rt_band: None,
            }
        })
        .collect();
    for path in &config.datasets.report_tables {
        for row in read_summary_table(path)? {
            if let Some(agg) = regions.iter_mut().find(|r| r.region == row.region) {
                if agg.vaccination_pct.is_none() {
                    agg.vaccination_pct = row.vaccination_pct;
                }
                if agg.population.is_nan() {
                    if let Some(p) = row.population {
                        agg.population = p;
                    }
                }
                for m in row.metrics {
                    agg.metrics.retain(|old| old.name != m.name);
                    agg.metrics.push(m);
                }
            }
        }
    }
    if let Some(r) = regions.iter().find(|r| r.metrics.is_empty()) {
        return Err(Error::Input(format!("{}: not found in any report table", r.region)));
    }
    if let Some(r) = regions.iter().find(|r| r.population.is_nan()) {
        return Err(Error::Input(format!("{}: no population in metadata or tables", r.region)));
    }
    let correlations = vaccination_correlations(&regions, &config.correlation_exclude);
    Ok(AggregateResult { mode: config.mode, regions, correlations, failures: Vec::new() })
}

/// Runs `repetitions` fits per region with seeds `base_seed + k`, aggregates
/// them and writes every artifact to `output_dir`. Training failures are
/// recorded in the result; data and configuration errors abort.
pub fn run_experiment(config: &ExperimentConfig) -> Result<AggregateResult> {
    config.validate()?;
    let inputs = Inputs::load(config)?;
    let (result, datasets) = match config.mode {
        Mode::Report => (report_aggregate(config, &inputs)?, Vec::new()),
        Mode::Simulate => {
            let ds = resolve_datasets(config, &inputs)?;
            (simulate_aggregate(config, &ds)?, ds)
        }
        Mode::FitSir | Mode::FitRt => {
            let ds = resolve_datasets(config, &inputs)?;
            (fit_aggregate(config, &ds)?, ds)
        }
    };
    std::fs::create_dir_all(&config.output_dir)?;
    emit_report(&result, ReportFormat::Csv, &config.output_dir)?;
    emit_report(&result, ReportFormat::Json, &config.output_dir)?;
    if config.mode == Mode::Simulate {
        for ds in &datasets {
            tables::write_simulation(ds, &config.output_dir)?;
        }
    }
    if config.plots {
        emit_plots(config, &result, &datasets)?;
    }
    Ok(result)
}

fn emit_plots(config: &ExperimentConfig, result: &AggregateResult, datasets: &[RegionDataset]) -> Result<()> {
    let dir = &config.output_dir;
    for ds in datasets {
        let stem = region_file_stem(&ds.region);
        let start = ds.dates[0];
        match config.mode {
            Mode::FitRt => {
                let Some(band) = result.region(&ds.region).and_then(|r| r.rt_band.as_ref()) else {
                    continue;
                };
                let series = crate::sir::RtSeries {
                    t: band.t.clone(),
                    rt: band.mean.clone(),
                    alpha_used: result.region(&ds.region).and_then(|r| r.alpha_used).unwrap_or(f64::NAN),
                };
                let title = format!("{}: mean R_t", ds.region);
                emit_plot(PlotData::Rt(&series), start, &title, &config.annotations, dir.join(format!("rt_{stem}.svg")))?;
            }
            Mode::FitSir | Mode::Simulate => {
                let title = format!("{}: S, I, R", ds.region);
                emit_plot(
                    PlotData::Compartments(&ds.series),
                    start,
                    &title,
                    &config.annotations,
                    dir.join(format!("compartments_{stem}.svg")),
                )?;
            }
            Mode::Report => {}
        }
    }
    Ok(())
}
