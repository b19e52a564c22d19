use std::io::Read;

use serde::{Deserialize, Serialize};

use super::{AccidentRecord, IngestError, Severity, TrafficCountPoint};
use crate::geometry::GeoPoint;

/// Earliest year present in the UK road accident series.
const FIRST_RECORD_YEAR: i32 = 1979;

/// Accident CSV column names. Defaults follow the UK road safety data schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AccidentColumns {
    pub id: String,
    pub longitude: String,
    pub latitude: String,
    pub year: String,
    pub date: String,
    pub severity: String,
}

impl Default for AccidentColumns {
    fn default() -> Self {
        Self {
            id: "accident_index".into(),
            longitude: "longitude".into(),
            latitude: "latitude".into(),
            year: "accident_year".into(),
            date: "date".into(),
            severity: "accident_severity".into(),
        }
    }
}

/// AADF CSV column names. Defaults follow the UK traffic count schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AadfColumns {
    pub count_point_id: String,
    pub longitude: String,
    pub latitude: String,
    pub flow: String,
}

impl Default for AadfColumns {
    fn default() -> Self {
        Self {
            count_point_id: "count_point_id".into(),
            longitude: "longitude".into(),
            latitude: "latitude".into(),
            flow: "all_motor_vehicles".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccidentParse {
    pub records: Vec<AccidentRecord>,
    pub rejected_before_min_year: usize,
    pub rejected_invalid: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficParse {
    pub points: Vec<TrafficCountPoint>,
    pub rejected_negative: usize,
    pub rejected_invalid: usize,
}

fn reader<R: Read>(source: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(source)
}

fn column(headers: &csv::ByteRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| {
        let h = String::from_utf8_lossy(h);
        h.trim_start_matches('\u{feff}').eq_ignore_ascii_case(name)
    })
}

fn require(headers: &csv::ByteRecord, name: &str) -> Result<usize, IngestError> {
    column(headers, name).ok_or_else(|| IngestError::MissingColumn(name.to_owned()))
}

fn field(row: &csv::ByteRecord, idx: usize) -> Option<&str> {
    row.get(idx)
        .and_then(|b| std::str::from_utf8(b).ok())
        .filter(|s| !s.is_empty())
}

fn number(row: &csv::ByteRecord, idx: usize) -> Option<f64> {
    field(row, idx)?.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Year from `dd/mm/yyyy`, `yyyy-mm-dd` or similar: the four-digit component.
fn year_from_date(raw: &str) -> Option<i32> {
    let date = raw.split_whitespace().next()?;
    date.split(['/', '-', '.'])
        .find(|part| part.len() == 4 && part.bytes().all(|b| b.is_ascii_digit()))?
        .parse()
        .ok()
}

/// Reads accident rows, keeping those from `min_year` on with valid coordinates.
pub fn parse_accident_csv<R: Read>(
    source: R,
    columns: &AccidentColumns,
    min_year: i32,
) -> Result<AccidentParse, IngestError> {
    let mut rdr = reader(source);
    let headers = rdr.byte_headers()?.clone();
    let lon_idx = require(&headers, &columns.longitude)?;
    let lat_idx = require(&headers, &columns.latitude)?;
    let year_idx = column(&headers, &columns.year);
    let date_idx = column(&headers, &columns.date);
    if year_idx.is_none() && date_idx.is_none() {
        return Err(IngestError::MissingColumn(columns.year.clone()));
    }
    let id_idx = column(&headers, &columns.id);
    let severity_idx = column(&headers, &columns.severity);

    let mut out = AccidentParse {
        records: Vec::new(),
        rejected_before_min_year: 0,
        rejected_invalid: 0,
    };
    let mut row = csv::ByteRecord::new();
    let mut line = 0usize;
    loop {
        match rdr.read_byte_record(&mut row) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) if e.is_io_error() => return Err(e.into()),
            Err(_) => {
                out.rejected_invalid += 1;
                continue;
            }
        }
        line += 1;
        let year = year_idx
            .and_then(|i| field(&row, i))
            .and_then(|s| s.parse::<i32>().ok())
            .or_else(|| date_idx.and_then(|i| field(&row, i)).and_then(year_from_date));
        let location = match (number(&row, lon_idx), number(&row, lat_idx)) {
            (Some(lon), Some(lat)) => GeoPoint::try_new(lon, lat).ok(),
            _ => None,
        };
        let (Some(year), Some(location)) = (year, location) else {
            out.rejected_invalid += 1;
            continue;
        };
        if year < FIRST_RECORD_YEAR {
            out.rejected_invalid += 1;
            continue;
        }
        if year < min_year {
            out.rejected_before_min_year += 1;
            continue;
        }
        out.records.push(AccidentRecord {
            accident_id: id_idx
                .and_then(|i| field(&row, i))
                .map(str::to_owned)
                .unwrap_or_else(|| format!("row{line}")),
            location,
            year,
            severity: severity_idx
                .and_then(|i| field(&row, i))
                .map(Severity::parse)
                .unwrap_or(Severity::Unknown),
        });
    }
    Ok(out)
}

/// Reads traffic count points. Count point ids may repeat (one row per year).
pub fn parse_aadf_csv<R: Read>(source: R, columns: &AadfColumns) -> Result<TrafficParse, IngestError> {
    let mut rdr = reader(source);
    let headers = rdr.byte_headers()?.clone();
    let id_idx = require(&headers, &columns.count_point_id)?;
    let lon_idx = require(&headers, &columns.longitude)?;
    let lat_idx = require(&headers, &columns.latitude)?;
    let flow_idx = require(&headers, &columns.flow)?;

    let mut out = TrafficParse {
        points: Vec::new(),
        rejected_negative: 0,
        rejected_invalid: 0,
    };
    let mut row = csv::ByteRecord::new();
    loop {
        match rdr.read_byte_record(&mut row) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) if e.is_io_error() => return Err(e.into()),
            Err(_) => {
                out.rejected_invalid += 1;
                continue;
            }
        }
        let id = field(&row, id_idx).and_then(|s| s.parse::<i64>().ok());
        let location = match (number(&row, lon_idx), number(&row, lat_idx)) {
            (Some(lon), Some(lat)) => GeoPoint::try_new(lon, lat).ok(),
            _ => None,
        };
        let flow = number(&row, flow_idx);
        match (id, location, flow) {
            (Some(_), Some(_), Some(f)) if f < 0.0 => out.rejected_negative += 1,
            (Some(count_point_id), Some(location), Some(aadf)) => out.points.push(TrafficCountPoint {
                count_point_id,
                location,
                aadf,
            }),
            _ => out.rejected_invalid += 1,
        }
    }
    Ok(out)
}
