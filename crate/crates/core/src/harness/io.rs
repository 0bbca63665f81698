//! CSV and JSON files exchanged by the command-line tool.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{PopulationDataset, UnitSeries};

/// Decimal text that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `unit,time,x1[,x2,...]`, one row per observation.
pub fn write_dataset<W: std::io::Write>(out: W, data: &PopulationDataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["unit".to_string(), "time".to_string()];
    header.extend((1..=data.dim).map(|k| format!("x{k}")));
    w.write_record(&header)?;
    for u in &data.units {
        for (t, x) in u.times.iter().zip(&u.obs) {
            let mut row = vec![u.id.to_string(), fmt_f64(*t)];
            row.extend(x.iter().map(|v| fmt_f64(*v)));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_dataset_file(path: &Path, data: &PopulationDataset) -> Result<()> {
    write_dataset(std::fs::File::create(path)?, data)
}

fn parse_cell(rec: &csv::StringRecord, col: usize, name: &str, row: usize) -> Result<f64> {
    let cell = rec.get(col).map(str::trim).unwrap_or("");
    if cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan") {
        return Err(Error::Data(format!("row {row}: missing value in column '{name}'")));
    }
    let v: f64 = cell
        .parse()
        .map_err(|_| Error::Data(format!("row {row}: cannot parse '{cell}' in column '{name}'")))?;
    if !v.is_finite() {
        return Err(Error::Data(format!("row {row}: non-finite value in column '{name}'")));
    }
    Ok(v)
}

/// Reads a dataset written by [`write_dataset`]. Rows are numbered from 1
/// after the header in error messages.
pub fn read_dataset<R: std::io::Read>(input: R, model_id: &str) -> Result<PopulationDataset> {
    let mut r = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let header = r.headers()?.clone();
    let cols: Vec<String> = header.iter().map(|h| h.trim().to_string()).collect();
    if cols.len() < 3 || cols[0] != "unit" || cols[1] != "time" {
        return Err(Error::Data("header must be 'unit,time,x1[,x2,...]'".into()));
    }
    let dim = cols.len() - 2;
    for (k, c) in cols[2..].iter().enumerate() {
        if *c != format!("x{}", k + 1) {
            return Err(Error::Data(format!("unexpected column '{c}' (expected x{})", k + 1)));
        }
    }
    let mut units: Vec<UnitSeries> = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        if rec.len() != cols.len() {
            return Err(Error::Data(format!(
                "row {row}: expected {} fields, found {}",
                cols.len(),
                rec.len()
            )));
        }
        let unit_cell = rec.get(0).map(str::trim).unwrap_or("");
        if unit_cell.is_empty() {
            return Err(Error::Data(format!("row {row}: missing value in column 'unit'")));
        }
        let id: usize = unit_cell
            .parse()
            .map_err(|_| Error::Data(format!("row {row}: bad unit id '{unit_cell}'")))?;
        let t = parse_cell(&rec, 1, "time", row)?;
        let x = (0..dim)
            .map(|k| parse_cell(&rec, k + 2, &cols[k + 2], row))
            .collect::<Result<Vec<_>>>()?;
        let last = units.last().map(|u| u.id);
        if last == Some(id) {
            let u = units.last_mut().unwrap();
            if !(t > *u.times.last().unwrap()) {
                return Err(Error::Data(format!("row {row}: times must increase within a unit")));
            }
            u.times.push(t);
            u.obs.push(x);
        } else if last.is_some_and(|l| l > id) {
            return Err(Error::Data(format!("row {row}: units must be sorted and contiguous")));
        } else {
            units.push(UnitSeries {
                id,
                times: vec![t],
                obs: vec![x],
            });
        }
    }
    if units.is_empty() {
        return Err(Error::Data("dataset has no rows".into()));
    }
    Ok(PopulationDataset {
        model_id: model_id.to_string(),
        dim,
        units,
    })
}

pub fn read_dataset_file(path: &Path, model_id: &str) -> Result<PopulationDataset> {
    let f = std::fs::File::open(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    read_dataset(f, model_id)
}

/// Writes the drawn random effects, one row per unit.
pub fn write_effects(path: &Path, names: &[&str], effects: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["unit".to_string()];
    header.extend(names.iter().map(|s| s.to_string()));
    w.write_record(&header)?;
    for (i, b) in effects.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(b.iter().map(|v| fmt_f64(*v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_effects(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = (1..rec.len())
            .map(|k| parse_cell(&rec, k, "effect", i + 1))
            .collect::<Result<Vec<_>>>()?;
        out.push(row);
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}
