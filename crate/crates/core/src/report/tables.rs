use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{AggregateResult, Metric, Mode};
use crate::data::RegionDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Json,
}

/// File-name-safe form of a region name.
pub fn region_file_stem(region: &str) -> String {
    region
        .chars()
        .map(|c| if c.is_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn table_name(mode: Mode) -> &'static str {
    match mode {
        Mode::FitSir => "params.csv",
        Mode::FitRt => "rt_summary.csv",
        Mode::Simulate => "simulation_summary.csv",
        Mode::Report => "summary.csv",
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Internal(format!("{other:?}")),
    }
}

fn write_summary(result: &AggregateResult, path: &Path) -> Result<()> {
    let mut names: Vec<&str> = Vec::new();
    for r in &result.regions {
        for m in &r.metrics {
            if !names.contains(&m.name.as_str()) {
                names.push(&m.name);
            }
        }
    }
    let with_alpha = result.mode == Mode::FitRt;
    let mut header = vec!["region".to_string(), "population_millions".to_string()];
    if with_alpha {
        header.push("alpha".into());
    }
    for n in &names {
        header.push(format!("{n}_mean"));
        header.push(format!("{n}_std"));
    }
    header.push("vaccination_pct".into());

    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(&header)?;
    for r in &result.regions {
        let mut row = vec![r.region.clone(), (r.population / 1e6).to_string()];
        if with_alpha {
            row.push(opt(r.alpha_used));
        }
        for n in &names {
            let m = r.metric(n);
            row.push(opt(m.map(|m| m.mean)));
            row.push(opt(m.map(|m| m.std)));
        }
        row.push(opt(r.vaccination_pct));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_rt_series(result: &AggregateResult, dir: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
    for r in &result.regions {
        let Some(band) = &r.rt_band else { continue };
        let path = dir.join(format!("rt_series_{}.csv", region_file_stem(&r.region)));
        let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
        w.write_record(["date", "t", "rt_mean", "rt_std"])?;
        for j in 0..band.t.len() {
            w.write_record([
                band.dates[j].to_string(),
                band.t[j].to_string(),
                band.mean[j].to_string(),
                band.std[j].to_string(),
            ])?;
        }
        w.flush()?;
        written.push(path);
    }
    Ok(())
}

/// Writes the summary table (and per-region R_t series) as CSV, or the full
/// result plus `correlations.json` as JSON. Returns the files written.
pub fn emit_report(result: &AggregateResult, format: ReportFormat, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    if result.regions.is_empty() {
        return Err(Error::Input("nothing to report: no regions".into()));
    }
    let dir = dir.as_ref();
    let mut written = Vec::new();
    match format {
        ReportFormat::Csv => {
            let path = dir.join(table_name(result.mode));
            write_summary(result, &path)?;
            written.push(path);
            write_rt_series(result, dir, &mut written)?;
        }
        ReportFormat::Json => {
            let path = dir.join("results.json");
            std::fs::write(&path, serde_json::to_string_pretty(result)? + "\n")?;
            written.push(path);
            let path = dir.join("correlations.json");
            std::fs::write(&path, serde_json::to_string_pretty(&result.correlations)? + "\n")?;
            written.push(path);
        }
    }
    Ok(written)
}

pub(crate) fn write_simulation(ds: &RegionDataset, dir: &Path) -> Result<PathBuf> {
    let path = dir.join(format!("simulation_{}.csv", region_file_stem(&ds.region)));
    let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
    w.write_record(["date", "t", "S", "I", "R"])?;
    let s = &ds.series;
    for k in 0..s.len() {
        w.write_record([
            ds.dates[k].to_string(),
            s.t[k].to_string(),
            s.s[k].to_string(),
            s.i[k].to_string(),
            s.r[k].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(path)
}

/// One row of a per-region summary table.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub region: String,
    pub population: Option<f64>,
    pub vaccination_pct: Option<f64>,
    pub metrics: Vec<Metric>,
}

/// Reads a table with a `region` column. `population_millions`,
/// `population` and `vaccination_pct` are recognized; `alpha` is ignored;
/// every other column is a metric, with `<name>_mean` paired with
/// `<name>_std` when present. Empty cells are skipped.
pub fn read_summary_table(path: impl AsRef<Path>) -> Result<Vec<SummaryRow>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Input(format!("cannot open {}: {e}", path.display())))?;
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(file);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let region_col = header
        .iter()
        .position(|h| h == "region")
        .ok_or_else(|| Error::Parse { line: 1, message: format!("{}: no region column", path.display()) })?;
    let col = |name: &str| header.iter().position(|h| h == name);

    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let num = |j: usize| -> Result<Option<f64>> {
            let cell = rec.get(j).unwrap_or("");
            if cell.is_empty() {
                return Ok(None);
            }
            cell.parse::<f64>().map(Some).map_err(|_| Error::Parse {
                line,
                message: format!("{}: column {} is not a number: {cell:?}", path.display(), header[j]),
            })
        };
        let population = match (col("population_millions"), col("population")) {
            (Some(j), _) => num(j)?.map(|v| v * 1e6),
            (None, Some(j)) => num(j)?,
            (None, None) => None,
        };
        let vaccination_pct = col("vaccination_pct").map(&num).transpose()?.flatten();
        let mut metrics = Vec::new();
        for (j, h) in header.iter().enumerate() {
            let skip = ["region", "population_millions", "population", "vaccination_pct", "alpha"];
            if skip.contains(&h.as_str()) || h.ends_with("_std") {
                continue;
            }
            let Some(mean) = num(j)? else { continue };
            let name = h.strip_suffix("_mean").unwrap_or(h);
            let std = col(&format!("{name}_std")).map(&num).transpose()?.flatten().unwrap_or(0.0);
            metrics.push(Metric { name: name.to_string(), mean, std });
        }
        rows.push(SummaryRow { region: rec[region_col].to_string(), population, vaccination_pct, metrics });
    }
    Ok(rows)
}
