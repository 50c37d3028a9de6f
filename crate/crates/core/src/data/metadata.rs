use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-region population and vaccination coverage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionMeta {
    pub region: String,
    pub population: f64,
    pub vaccination_pct: Option<f64>,
}

pub fn load_region_metadata(path: impl AsRef<Path>) -> Result<Vec<RegionMeta>> {
    let path = path.as_ref();
    parse_region_metadata(std::fs::File::open(path).map_err(|e| Error::io_at(path, e))?)
}

/// Reads `region,population,vaccination_pct`. Lines starting with `#` are comments.
pub fn parse_region_metadata<R: Read>(reader: R) -> Result<Vec<RegionMeta>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize::<RegionMeta>() {
        let meta = row.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        if !(meta.population > 0.0) {
            return Err(Error::Validation(format!("{}: population must be positive", meta.region)));
        }
        if let Some(v) = meta.vaccination_pct {
            if !(0.0..=100.0).contains(&v) {
                return Err(Error::Validation(format!(
                    "{}: vaccination percentage {v} outside [0, 100]",
                    meta.region
                )));
            }
        }
        out.push(meta);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_with_optional_vaccination() {
        let text = "# comment\nregion,population,vaccination_pct\nA,1000,50.5\nB,2000,\n";
        let meta = parse_region_metadata(text.as_bytes()).unwrap();
        assert_eq!(meta.len(), 2);
        assert_eq!(meta[0].vaccination_pct, Some(50.5));
        assert_eq!(meta[1].vaccination_pct, None);
    }

    #[test]
    fn rejects_bad_rows() {
        let text = "region,population,vaccination_pct\nA,-3,50\n";
        assert!(parse_region_metadata(text.as_bytes()).is_err());
        let text = "region,population,vaccination_pct\nA,abc,50\n";
        assert!(matches!(parse_region_metadata(text.as_bytes()), Err(Error::Parse { .. })));
    }
}
