//! Dataset CSV files.
//!
//! Header: `id,label,p_0..p_{D-1},m_0..m_{D-1}`. A modality whose cells are
//! all empty is absent; partially empty modalities are rejected.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use mmfed_core::data::Instance;

use crate::error::{Error, Result};

/// Feature widths declared by a dataset header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub pet_dim: usize,
    pub mri_dim: usize,
}

pub fn header(layout: Layout) -> Vec<String> {
    let mut h = vec!["id".to_string(), "label".to_string()];
    h.extend((0..layout.pet_dim).map(|i| format!("p_{i}")));
    h.extend((0..layout.mri_dim).map(|i| format!("m_{i}")));
    h
}

fn parse_layout(path: &Path, names: &csv::StringRecord) -> Result<Layout> {
    let bad = |message: String| Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        message,
    };
    let cols: Vec<&str> = names.iter().collect();
    if cols.len() < 2 || cols[0] != "id" || cols[1] != "label" {
        return Err(bad("header must start with `id,label`".into()));
    }
    let pet_dim = cols[2..].iter().take_while(|c| c.starts_with("p_")).count();
    let mri_dim = cols.len() - 2 - pet_dim;
    let layout = Layout { pet_dim, mri_dim };
    if cols != header(layout) {
        return Err(bad(format!(
            "expected columns p_0..p_{} then m_0..m_{}",
            pet_dim.saturating_sub(1),
            mri_dim.saturating_sub(1)
        )));
    }
    Ok(layout)
}

fn parse_block(path: &Path, line: u64, cells: &[&str], prefix: char) -> Result<Option<Vec<f64>>> {
    if cells.iter().all(|c| c.trim().is_empty()) {
        return Ok(None);
    }
    cells
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let c = c.trim();
            let v: f64 = c.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("column {prefix}_{i}: `{c}` is not a number"),
            })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("column {prefix}_{i}: non-finite value"),
                })
            }
        })
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

/// Reads a dataset from any reader; `path` is used for messages only.
pub fn read_instances<R: Read>(reader: R, path: &Path) -> Result<(Layout, Vec<Instance>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let names = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let layout = parse_layout(path, &names)?;
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let cells: Vec<&str> = record.iter().collect();
        let err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let label: usize = cells[1]
            .trim()
            .parse()
            .map_err(|_| err(format!("label `{}` is not a non-negative integer", cells[1])))?;
        let split = 2 + layout.pet_dim;
        let pet = parse_block(path, line, &cells[2..split], 'p')?;
        let mri = parse_block(path, line, &cells[split..], 'm')?;
        if pet.is_none() && mri.is_none() {
            return Err(err("both modalities are empty".into()));
        }
        out.push(Instance { pet, mri, label });
    }
    Ok((layout, out))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    }
}

pub fn load_csv(path: &Path) -> Result<(Layout, Vec<Instance>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_instances(file, path)
}

/// Writes instances with ids `0..n`. Values use the shortest representation
/// that parses back to the same bits.
pub fn write_instances<W: Write>(writer: W, layout: Layout, data: &[Instance], path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(writer);
    let io = |e: csv::Error| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    w.write_record(header(layout)).map_err(io)?;
    let mut row = Vec::with_capacity(2 + layout.pet_dim + layout.mri_dim);
    for (id, inst) in data.iter().enumerate() {
        row.clear();
        row.push(id.to_string());
        row.push(inst.label.to_string());
        for (values, dim) in [(&inst.pet, layout.pet_dim), (&inst.mri, layout.mri_dim)] {
            match values {
                Some(v) if v.len() == dim => row.extend(v.iter().map(|x| x.to_string())),
                Some(v) => {
                    return Err(Error::Format {
                        path: path.to_path_buf(),
                        message: format!("instance {id} has {} features, expected {dim}", v.len()),
                    })
                }
                None => row.extend(std::iter::repeat_n(String::new(), dim)),
            }
        }
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_csv(path: &Path, layout: Layout, data: &[Instance]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_instances(file, layout, data, path)
}
