//! Small comma-separated tables: parcel label lists, pixel training blocks,
//! and per-parcel feature matrices. Values never contain commas or quoting.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::features::FeatureVector;
use crate::scheme::{CategoryScheme, ClassId, Level};

use super::{parse_error, read_to_string};

/// `parcel_id,code` rows with a header line.
pub fn write_labels(path: &Path, labels: &[(u32, ClassId)], scheme: &CategoryScheme) -> Result<()> {
    let mut out = String::from("parcel_id,code\n");
    for &(id, class) in labels {
        writeln!(out, "{},{}", id, scheme.class(class)?.code).unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_labels(
    path: &Path,
    scheme: &CategoryScheme,
    level: Level,
) -> Result<Vec<(u32, ClassId)>> {
    let text = read_to_string(path)?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 || line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let id: u32 = parts
            .next()
            .unwrap_or_default()
            .trim()
            .parse()
            .map_err(|e| parse_error(path, format!("line {}: bad parcel id: {e}", lineno + 1)))?;
        let code = parts
            .next()
            .ok_or_else(|| parse_error(path, format!("line {}: missing code", lineno + 1)))?
            .trim();
        let class = scheme.by_code(level, code).ok_or_else(|| {
            parse_error(path, format!("line {}: unknown {} code {code:?}", lineno + 1, level.name()))
        })?;
        out.push((id, class.id));
    }
    Ok(out)
}

/// `block_id,code,cell` rows, one per block cell.
pub fn write_blocks(
    path: &Path,
    blocks: &[(u32, ClassId, Vec<usize>)],
    scheme: &CategoryScheme,
) -> Result<()> {
    let mut out = String::from("block_id,code,cell\n");
    for (id, class, cells) in blocks {
        let code = &scheme.class(*class)?.code;
        for &cell in cells {
            writeln!(out, "{id},{code},{cell}").unwrap();
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_blocks(
    path: &Path,
    scheme: &CategoryScheme,
    level: Level,
) -> Result<Vec<(u32, ClassId, Vec<usize>)>> {
    let text = read_to_string(path)?;
    let mut blocks: Vec<(u32, ClassId, Vec<usize>)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 || line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(parse_error(path, format!("line {}: expected 3 fields", lineno + 1)));
        }
        let id: u32 = parts[0]
            .parse()
            .map_err(|e| parse_error(path, format!("line {}: bad block id: {e}", lineno + 1)))?;
        let class = scheme.by_code(level, parts[1]).ok_or_else(|| {
            parse_error(path, format!("line {}: unknown code {:?}", lineno + 1, parts[1]))
        })?;
        let cell: usize = parts[2]
            .parse()
            .map_err(|e| parse_error(path, format!("line {}: bad cell index: {e}", lineno + 1)))?;
        match blocks.last_mut() {
            Some((last_id, last_class, cells)) if *last_id == id => {
                if *last_class != class.id {
                    return Err(parse_error(
                        path,
                        format!("line {}: block {id} changes class", lineno + 1),
                    ));
                }
                cells.push(cell);
            }
            _ => blocks.push((id, class.id, vec![cell])),
        }
    }
    Ok(blocks)
}

/// One row per parcel: `parcel_id` then the schema's feature columns.
pub fn write_features(path: &Path, rows: &[(u32, &FeatureVector)]) -> Result<()> {
    let mut out = String::from("parcel_id");
    if let Some((_, first)) = rows.first() {
        for name in first.schema.names() {
            out.push(',');
            out.push_str(name);
        }
    }
    out.push('\n');
    for (id, fv) in rows {
        write!(out, "{id}").unwrap();
        for v in &fv.values {
            // shortest round-trip float form
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Column names (after `parcel_id`) and one value row per parcel.
pub type FeatureTable = (Vec<String>, Vec<(u32, Vec<f64>)>);

/// Feature rows and the column names from a features CSV.
pub fn read_features(path: &Path) -> Result<FeatureTable> {
    let text = read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| parse_error(path, "empty file"))?;
    let names: Vec<String> = header.split(',').skip(1).map(|s| s.to_string()).collect();
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let id: u32 = parts
            .next()
            .unwrap_or_default()
            .parse()
            .map_err(|e| parse_error(path, format!("line {}: bad parcel id: {e}", lineno + 2)))?;
        let values = parts
            .map(|p| {
                p.parse::<f64>()
                    .map_err(|e| parse_error(path, format!("line {}: bad value: {e}", lineno + 2)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != names.len() {
            return Err(parse_error(
                path,
                format!("line {}: {} values for {} columns", lineno + 2, values.len(), names.len()),
            ));
        }
        rows.push((id, values));
    }
    Ok((names, rows))
}
