use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One day of reported counts for one region.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawCaseRecord {
    pub date: NaiveDate,
    pub region: String,
    pub new_cases: u64,
    pub new_deaths: u64,
}

/// A zero-count day inserted where a region had no row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GapFill {
    pub region: String,
    pub date: NaiveDate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseLoad {
    /// Sorted by (region, date), daily-contiguous per region.
    pub records: Vec<RawCaseRecord>,
    pub filled: Vec<GapFill>,
}

impl CaseLoad {
    pub fn warning_count(&self) -> usize {
        self.filled.len()
    }

    pub fn regions(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self.records.iter().map(|r| r.region.as_str()).collect();
        out.dedup();
        out
    }

    pub fn region(&self, name: &str) -> Vec<&RawCaseRecord> {
        self.records.iter().filter(|r| r.region == name).collect()
    }
}

#[derive(Deserialize)]
struct Row {
    date: String,
    region: String,
    new_cases: String,
    new_deaths: String,
}

pub fn load_case_csv(path: impl AsRef<Path>) -> Result<CaseLoad> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io_at(path, e))?;
    parse_case_csv(file)
}

/// Reads `date,region,new_cases,new_deaths` rows (ISO-8601 dates).
pub fn parse_case_csv<R: Read>(reader: R) -> Result<CaseLoad> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    for col in ["date", "region", "new_cases", "new_deaths"] {
        if !headers.iter().any(|h| h == col) {
            return Err(Error::Parse {
                line: 1,
                message: format!("missing column `{col}`"),
            });
        }
    }

    let mut by_region: BTreeMap<String, BTreeMap<NaiveDate, (u64, u64)>> = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row: Row = record.deserialize(Some(&headers)).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let date = NaiveDate::parse_from_str(&row.date, "%Y-%m-%d").map_err(|e| Error::Parse {
            line,
            message: format!("bad date `{}`: {e}", row.date),
        })?;
        let cases = parse_count(&row.new_cases, "new_cases", line)?;
        let deaths = parse_count(&row.new_deaths, "new_deaths", line)?;
        if row.region.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty region".into(),
            });
        }
        let days = by_region.entry(row.region.clone()).or_default();
        if days.insert(date, (cases, deaths)).is_some() {
            return Err(Error::Validation(format!(
                "line {line}: duplicate row for {} on {date}",
                row.region
            )));
        }
    }

    let mut records = Vec::new();
    let mut filled = Vec::new();
    for (region, days) in by_region {
        let (Some(&first), Some(&last)) = (days.keys().next(), days.keys().next_back()) else {
            continue;
        };
        for date in first.iter_days().take_while(|d| *d <= last) {
            let (new_cases, new_deaths) = match days.get(&date) {
                Some(&counts) => counts,
                None => {
                    filled.push(GapFill {
                        region: region.clone(),
                        date,
                    });
                    (0, 0)
                }
            };
            records.push(RawCaseRecord {
                date,
                region: region.clone(),
                new_cases,
                new_deaths,
            });
        }
    }
    for gap in &filled {
        log::warn!("{}: no row for {}, filled with zero counts", gap.region, gap.date);
    }
    Ok(CaseLoad { records, filled })
}

fn parse_count(raw: &str, column: &str, line: u64) -> Result<u64> {
    let value: i64 = raw.parse().map_err(|_| Error::Parse {
        line,
        message: format!("{column} `{raw}` is not an integer"),
    })?;
    u64::try_from(value)
        .map_err(|_| Error::Validation(format!("line {line}: {column} is negative ({value})")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_rows() {
        let csv = "date,region,new_cases,new_deaths\n\
                   2020-03-09,Bremen,3,0\n\
                   2020-03-10,Bremen,5,1\n\
                   2020-03-11,Bremen,2,0\n";
        let load = parse_case_csv(csv.as_bytes()).unwrap();
        assert_eq!(load.records.len(), 3);
        assert_eq!(load.warning_count(), 0);
        assert_eq!(load.records[1].new_deaths, 1);
    }

    #[test]
    fn negative_count_names_the_line() {
        let csv = "date,region,new_cases,new_deaths\n\
                   2020-03-09,Bremen,3,0\n\
                   2020-03-10,Bremen,-5,0\n";
        match parse_case_csv(csv.as_bytes()) {
            Err(Error::Validation(msg)) => assert!(msg.contains("line 3"), "{msg}"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_row_is_a_parse_error() {
        let csv = "date,region,new_cases,new_deaths\n\
                   2020-03-09,Bremen,3,0\n\
                   2020-13-10,Bremen,1,0\n";
        assert!(matches!(
            parse_case_csv(csv.as_bytes()),
            Err(Error::Parse { line: 3, .. })
        ));
        let csv = "date,region,new_cases,new_deaths\n2020-03-09,Bremen,x,0\n";
        assert!(matches!(
            parse_case_csv(csv.as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
        let csv = "date,region,cases\n2020-03-09,Bremen,1\n";
        assert!(matches!(
            parse_case_csv(csv.as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn gaps_are_filled_per_region() {
        let csv = "date,region,new_cases,new_deaths\n\
                   2020-03-09,Hamburg,1,0\n\
                   2020-03-09,Bremen,3,0\n\
                   2020-03-11,Bremen,2,0\n\
                   2020-03-10,Hamburg,4,0\n";
        let load = parse_case_csv(csv.as_bytes()).unwrap();
        assert_eq!(load.warning_count(), 1);
        assert_eq!(load.filled[0].region, "Bremen");
        assert_eq!(load.records.len(), 5);
        assert_eq!(load.regions(), vec!["Bremen", "Hamburg"]);
        let bremen = load.region("Bremen");
        assert_eq!(bremen[1].new_cases, 0);
        assert_eq!(bremen[1].date, NaiveDate::from_ymd_opt(2020, 3, 10).unwrap());
    }

    #[test]
    fn duplicate_day_rejected() {
        let csv = "date,region,new_cases,new_deaths\n\
                   2020-03-09,Bremen,3,0\n\
                   2020-03-09,Bremen,3,0\n";
        assert!(matches!(parse_case_csv(csv.as_bytes()), Err(Error::Validation(_))));
    }
}
