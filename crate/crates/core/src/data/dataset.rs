use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::cases::RawCaseRecord;
use super::queue::{recovery_queue, DeathPolicy};
use crate::error::{Error, Result};
use crate::sir::CompartmentSeries;

/// First day of the default analysis window.
pub const DEFAULT_START: NaiveDate = match NaiveDate::from_ymd_opt(2020, 3, 9) {
    Some(d) => d,
    None => panic!("valid date"),
};

const DEFAULT_END: NaiveDate = match NaiveDate::from_ymd_opt(2023, 6, 22) {
    Some(d) => d,
    None => panic!("valid date"),
};

/// Observation set for one region, in raw counts.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionDataset {
    pub region: String,
    pub n: f64,
    pub dates: Vec<NaiveDate>,
    pub series: CompartmentSeries,
    pub vaccination_pct: Option<f64>,
    pub alpha_exp: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct DatasetFile {
    region: String,
    #[serde(rename = "N")]
    n: f64,
    dates: Vec<NaiveDate>,
    #[serde(rename = "S")]
    s: Vec<f64>,
    #[serde(rename = "I")]
    i: Vec<f64>,
    #[serde(rename = "R")]
    r: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vaccination_pct: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha_exp: Option<f64>,
}

impl RegionDataset {
    pub fn new(region: impl Into<String>, start: NaiveDate, series: CompartmentSeries) -> Result<Self> {
        let dates = start.iter_days().take(series.len()).collect();
        let ds = Self {
            region: region.into(),
            n: series.n,
            dates,
            series,
            vaccination_pct: None,
            alpha_exp: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.dates.len() != self.series.len() {
            return Err(Error::Validation(format!(
                "{}: {} dates for {} samples",
                self.region,
                self.dates.len(),
                self.series.len()
            )));
        }
        if self.dates.windows(2).any(|w| w[0].succ_opt() != Some(w[1])) {
            return Err(Error::Validation(format!("{}: dates are not consecutive days", self.region)));
        }
        if self.n != self.series.n {
            return Err(Error::Validation(format!("{}: population mismatch", self.region)));
        }
        self.series.validate()?;
        if let Some(v) = self.vaccination_pct {
            if !(0.0..=100.0).contains(&v) {
                return Err(Error::Validation(format!(
                    "{}: vaccination percentage {v} outside [0, 100]",
                    self.region
                )));
            }
        }
        Ok(())
    }

    /// Compartments divided by N.
    pub fn normalized(&self) -> CompartmentSeries {
        let scale = |v: &[f64]| v.iter().map(|x| x / self.n).collect();
        CompartmentSeries {
            t: self.series.t.clone(),
            s: scale(&self.series.s),
            i: scale(&self.series.i),
            r: scale(&self.series.r),
            n: 1.0,
        }
    }

    pub fn date_index(&self, date: NaiveDate) -> Option<usize> {
        let first = *self.dates.first()?;
        let idx = usize::try_from((date - first).num_days()).ok()?;
        (idx < self.len()).then_some(idx)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = DatasetFile {
            region: self.region.clone(),
            n: self.n,
            dates: self.dates.clone(),
            s: self.series.s.clone(),
            i: self.series.i.clone(),
            r: self.series.r.clone(),
            vaccination_pct: self.vaccination_pct,
            alpha_exp: self.alpha_exp,
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: DatasetFile = serde_json::from_str(text)?;
        let ds = Self {
            region: f.region,
            n: f.n,
            series: CompartmentSeries {
                t: (0..f.dates.len()).map(|d| d as f64).collect(),
                s: f.s,
                i: f.i,
                r: f.r,
                n: f.n,
            },
            dates: f.dates,
            vaccination_pct: f.vaccination_pct,
            alpha_exp: f.alpha_exp,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io_at(path, e))?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineOptions {
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub recovery_days: usize,
    pub death_policy: DeathPolicy,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            start: DEFAULT_START,
            end: DEFAULT_END,
            recovery_days: 14,
            death_policy: DeathPolicy::Immediate,
        }
    }
}

/// Runs the recovery queue over one region's records for the window
/// `[start, end]`. The start day's new cases seed the initial infectious
/// cohort.
pub fn build_region_dataset(
    region: &str,
    records: &[&RawCaseRecord],
    population: f64,
    opts: &PipelineOptions,
) -> Result<RegionDataset> {
    if opts.end <= opts.start {
        return Err(Error::Config(format!("window end {} is not after start {}", opts.end, opts.start)));
    }
    let days = usize::try_from((opts.end - opts.start).num_days() + 1)
        .map_err(|e| Error::Internal(e.to_string()))?;
    let mut cases = vec![f64::NAN; days];
    let mut deaths = vec![0.0; days];
    for rec in records.iter().filter(|r| r.region == region) {
        let Ok(k) = usize::try_from((rec.date - opts.start).num_days()) else {
            continue;
        };
        if k < days {
            cases[k] = rec.new_cases as f64;
            deaths[k] = rec.new_deaths as f64;
        }
    }
    if let Some(k) = cases.iter().position(|c| c.is_nan()) {
        return Err(Error::Validation(format!(
            "{region}: no record for {}",
            opts.start + chrono::Days::new(k as u64)
        )));
    }
    let i0 = cases[0];
    cases[0] = 0.0;
    let series = recovery_queue(&cases, &deaths, opts.recovery_days, population, i0, opts.death_policy)?;
    RegionDataset::new(region, opts.start, series)
}
