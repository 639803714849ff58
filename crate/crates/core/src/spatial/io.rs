use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{FeatureMatrix, Location, PointSet, SpatialDataset};
use crate::error::{Error, Result};

/// Column mapping for dataset CSVs.
#[derive(Debug, Clone, Default, PartialEq)]
pub enum CsvSchema {
    /// `s1[,s2]`, `x1..xD` (consecutive), `y`.
    #[default]
    Infer,
    Explicit {
        locations: Vec<String>,
        covariates: Vec<String>,
        label: String,
    },
}

struct Columns {
    locations: Vec<(usize, String)>,
    covariates: Vec<(usize, String)>,
    label: Option<(usize, String)>,
}

fn find(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim() == name)
}

fn require(headers: &csv::StringRecord, name: &str) -> Result<(usize, String)> {
    find(headers, name)
        .map(|i| (i, name.to_string()))
        .ok_or_else(|| Error::MissingColumn(name.to_string()))
}

impl CsvSchema {
    fn resolve(&self, headers: &csv::StringRecord, need_label: bool, need_locations: bool) -> Result<Columns> {
        match self {
            CsvSchema::Infer => {
                let mut locations = Vec::new();
                if let Some(i) = find(headers, "s1") {
                    locations.push((i, "s1".to_string()));
                    if let Some(j) = find(headers, "s2") {
                        locations.push((j, "s2".to_string()));
                    }
                } else if need_locations {
                    return Err(Error::MissingColumn("s1".into()));
                }
                let mut covariates = vec![require(headers, "x1")?];
                for d in 2.. {
                    let name = format!("x{d}");
                    match find(headers, &name) {
                        Some(i) => covariates.push((i, name)),
                        None => break,
                    }
                }
                let label = if need_label {
                    Some(require(headers, "y")?)
                } else {
                    None
                };
                Ok(Columns {
                    locations,
                    covariates,
                    label,
                })
            }
            CsvSchema::Explicit {
                locations,
                covariates,
                label,
            } => {
                let locations = if need_locations || locations.iter().all(|l| find(headers, l).is_some()) {
                    locations.iter().map(|l| require(headers, l)).collect::<Result<_>>()?
                } else {
                    Vec::new()
                };
                if covariates.is_empty() {
                    return Err(Error::InvalidParameter("schema lists no covariates".into()));
                }
                Ok(Columns {
                    locations,
                    covariates: covariates.iter().map(|c| require(headers, c)).collect::<Result<_>>()?,
                    label: if need_label { Some(require(headers, label)?) } else { None },
                })
            }
        }
    }
}

fn parse_real(record: &csv::StringRecord, col: &(usize, String), row: usize) -> Result<f64> {
    record
        .get(col.0)
        .and_then(|s| s.trim().parse::<f64>().ok())
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::NonFiniteValue {
            row,
            column: col.1.clone(),
        })
}

fn parse_label(record: &csv::StringRecord, col: &(usize, String), row: usize) -> Result<u8> {
    let raw = record.get(col.0).unwrap_or("").trim();
    match raw.parse::<f64>() {
        Ok(v) if v == 0.0 => Ok(0),
        Ok(v) if v == 1.0 => Ok(1),
        _ => Err(Error::NonBinaryLabel {
            row,
            value: raw.to_string(),
        }),
    }
}

struct Parsed {
    locations: Vec<Location>,
    covariates: FeatureMatrix,
    labels: Vec<u8>,
}

fn parse<R: Read>(reader: R, schema: &CsvSchema, need_label: bool, need_locations: bool) -> Result<Parsed> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let cols = schema.resolve(&headers, need_label, need_locations)?;
    let mut locations = Vec::new();
    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut n = 0;
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        if !cols.locations.is_empty() {
            let coords = cols
                .locations
                .iter()
                .map(|c| parse_real(&rec, c, row))
                .collect::<Result<Vec<_>>>()?;
            locations.push(Location::new(&coords)?);
        }
        for c in &cols.covariates {
            data.push(parse_real(&rec, c, row)?);
        }
        if let Some(c) = &cols.label {
            labels.push(parse_label(&rec, c, row)?);
        }
        n += 1;
    }
    Ok(Parsed {
        locations,
        covariates: FeatureMatrix::new(n, cols.covariates.len(), data)?,
        labels,
    })
}

pub fn load_dataset_from_reader<R: Read>(reader: R, schema: &CsvSchema) -> Result<SpatialDataset> {
    let p = parse(reader, schema, true, true)?;
    SpatialDataset::new(p.locations, p.covariates, p.labels)
}

/// Reads and validates a labelled dataset.
pub fn load_dataset(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<SpatialDataset> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    load_dataset_from_reader(f, schema)
}

/// Reads query points: covariates required, locations optional, labels ignored.
/// An empty data section is allowed.
pub fn load_points(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<PointSet> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let p = parse(f, schema, false, false)?;
    let has_locs = !p.locations.is_empty() || matches!(schema, CsvSchema::Infer) && p.covariates.n_rows() == 0;
    Ok(PointSet {
        locations: if has_locs { Some(p.locations) } else { None },
        covariates: p.covariates,
    })
}

fn header(loc_dim: usize, d: usize, label: bool) -> Vec<String> {
    let mut h: Vec<String> = (1..=loc_dim).map(|i| format!("s{i}")).collect();
    h.extend((1..=d).map(|i| format!("x{i}")));
    if label {
        h.push("y".into());
    }
    h
}

pub fn write_dataset_to<W: Write>(writer: W, ds: &SpatialDataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header(ds.location_dim(), ds.n_features(), true))?;
    for i in 0..ds.len() {
        let mut rec: Vec<String> = ds.locations()[i].coords().iter().map(f64::to_string).collect();
        rec.extend(ds.covariates().row(i).iter().map(f64::to_string));
        rec.push(ds.labels()[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Writes `s1[,s2],x1..xD,y`; reals use shortest round-trip formatting.
pub fn write_dataset(path: impl AsRef<Path>, ds: &SpatialDataset) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_dataset_to(f, ds)
}

pub fn write_points(path: impl AsRef<Path>, points: &PointSet) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(f);
    let loc_dim = points
        .locations
        .as_ref()
        .and_then(|l| l.first())
        .map_or(0, Location::dim);
    w.write_record(header(loc_dim, points.covariates.n_cols(), false))?;
    for i in 0..points.len() {
        let mut rec: Vec<String> = match &points.locations {
            Some(l) => l[i].coords().iter().map(f64::to_string).collect(),
            None => Vec::new(),
        };
        rec.extend(points.covariates.row(i).iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
