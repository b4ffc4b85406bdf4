use std::io::{BufRead, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::EventTriplet;
use crate::error::{Error, Result};

/// Event as stored in the panel file. `day` (1-based trading day within the
/// week) is only read in weekly mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    #[serde(flatten)]
    pub triplet: EventTriplet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub day: Option<u8>,
}

/// One line of the event panel file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PanelRecord {
    pub stock_id: i64,
    pub date: NaiveDate,
    pub events: Vec<EventRecord>,
    pub target_return: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReturnRow {
    pub date: NaiveDate,
    pub stock_id: i64,
    pub ret: f64,
}

pub fn read_panel_records(path: &Path) -> Result<Vec<PanelRecord>> {
    let file = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for (n, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PanelRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Invalid(format!("{}:{}: {e}", path.display(), n + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_panel_records(path: &Path, records: &[PanelRecord]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_returns_csv(path: &Path) -> Result<Vec<ReturnRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for row in rdr.deserialize() {
        let row: ReturnRow = row?;
        if !(row.ret > -1.0) || !row.ret.is_finite() {
            return Err(Error::Domain(format!(
                "return {} for stock {} on {} must be a finite fraction > -1",
                row.ret, row.stock_id, row.date
            )));
        }
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panel_line_format() {
        let line = r#"{"stock_id":14593,"date":"2017-04-20","events":[{"subject":"President Trump","subject_link":"http://dbpedia.org/resource/Donald_Trump","action":"signed","object":"executive order","object_link":"http://dbpedia.org/resource/Executive_order","context":"President Trump signed an executive order."}],"target_return":0.0123}"#;
        let rec: PanelRecord = serde_json::from_str(line).unwrap();
        assert_eq!(rec.events[0].triplet.subject, "President Trump");
        assert_eq!(rec.events[0].day, None);
        assert_eq!(serde_json::to_string(&rec).unwrap(), line);
    }

    #[test]
    fn returns_csv_rejects_percent_like_values() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        std::fs::write(&p, "date,stock_id,ret\n2020-01-02,1,0.01\n2020-01-03,1,-0.02\n").unwrap();
        assert_eq!(read_returns_csv(&p).unwrap().len(), 2);
        std::fs::write(&p, "date,stock_id,ret\n2020-01-02,1,-1.5\n").unwrap();
        assert!(read_returns_csv(&p).is_err());
    }
}
