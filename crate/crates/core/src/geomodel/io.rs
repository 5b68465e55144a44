//! Field export: CSV `(x, y, z, value)` and a flat little-endian `f64` grid
//! file preceded by a one-line JSON header.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{GeomodelError, GridGeometry, Result};

pub const GRID_FORMAT: &str = "co2risk-grid";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFileHeader {
    pub format: String,
    pub version: u32,
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub dx: f64,
    pub dy: f64,
    pub layer_thickness: Vec<f64>,
    pub top_depth: f64,
    #[serde(default)]
    pub dip_x: f64,
    pub ordering: String,
    pub dtype: String,
    /// One name per stored field, in file order.
    pub fields: Vec<String>,
}

impl GridFileHeader {
    pub fn geometry(&self) -> GridGeometry {
        GridGeometry {
            nx: self.nx,
            ny: self.ny,
            nz: self.nz,
            dx: self.dx,
            dy: self.dy,
            layer_thickness: self.layer_thickness.clone(),
            top_depth: self.top_depth,
            dip_x: self.dip_x,
        }
    }
}

/// Writes several same-sized fields into one grid file.
pub fn write_grid_file(path: &Path, geometry: &GridGeometry, fields: &[(String, &[f64])]) -> Result<()> {
    let n = geometry.n_cells();
    for (_, f) in fields {
        if f.len() != n {
            return Err(GeomodelError::FieldLength { expected: n, got: f.len() });
        }
    }
    let header = GridFileHeader {
        format: GRID_FORMAT.into(),
        version: 1,
        nx: geometry.nx,
        ny: geometry.ny,
        nz: geometry.nz,
        dx: geometry.dx,
        dy: geometry.dy,
        layer_thickness: geometry.layer_thickness.clone(),
        top_depth: geometry.top_depth,
        dip_x: geometry.dip_x,
        ordering: "x-fastest".into(),
        dtype: "f64le".into(),
        fields: fields.iter().map(|(name, _)| name.clone()).collect(),
    };
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, &header).map_err(|e| GeomodelError::Format(e.to_string()))?;
    w.write_all(b"\n")?;
    for (_, f) in fields {
        for v in f.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_grid_file(path: &Path) -> Result<(GridFileHeader, Vec<Vec<f64>>)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: GridFileHeader = serde_json::from_str(line.trim_end()).map_err(|e| GeomodelError::Format(e.to_string()))?;
    if header.format != GRID_FORMAT || header.dtype != "f64le" || header.ordering != "x-fastest" {
        return Err(GeomodelError::Format(format!("unsupported grid header in {}", path.display())));
    }
    header.geometry().validate()?;
    let n = header.nx * header.ny * header.nz;
    let mut fields = Vec::with_capacity(header.fields.len());
    let mut bytes = [0u8; 8];
    for _ in 0..header.fields.len() {
        let mut f = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut bytes).map_err(|_| GeomodelError::Format("truncated grid data".into()))?;
            f.push(f64::from_le_bytes(bytes));
        }
        fields.push(f);
    }
    if r.read(&mut bytes)? != 0 {
        return Err(GeomodelError::Format("trailing bytes after grid data".into()));
    }
    Ok((header, fields))
}

/// CSV rows `x,y,z,value` at cell centres; `z` is depth [m].
pub fn write_field_csv(path: &Path, geometry: &GridGeometry, field: &[f64]) -> Result<()> {
    if field.len() != geometry.n_cells() {
        return Err(GeomodelError::FieldLength { expected: geometry.n_cells(), got: field.len() });
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "x,y,z,value")?;
    for (idx, v) in field.iter().enumerate() {
        let (i, j, _) = geometry.ijk(idx);
        let (x, y) = geometry.column_center(i, j);
        writeln!(w, "{},{},{},{}", x, y, geometry.cell_center_depth(idx), v)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = GridGeometry::uniform(3, 2, 2, 300.0, 200.0, 20.0, 50.0).unwrap();
        let a: Vec<f64> = (0..12).map(|x| x as f64 * 0.5).collect();
        let b: Vec<f64> = (0..12).map(|x| -(x as f64)).collect();
        let p = dir.path().join("f.grid");
        write_grid_file(&p, &g, &[("a".into(), &a), ("b".into(), &b)]).unwrap();
        let (h, fields) = read_grid_file(&p).unwrap();
        assert_eq!(h.geometry(), g);
        assert_eq!(h.fields, vec!["a", "b"]);
        assert_eq!(fields, vec![a, b]);
    }

    #[test]
    fn csv_has_one_row_per_cell() {
        let dir = tempfile::tempdir().unwrap();
        let g = GridGeometry::uniform(2, 2, 1, 200.0, 200.0, 10.0, 0.0).unwrap();
        let p = dir.path().join("f.csv");
        write_field_csv(&p, &g, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "x,y,z,value");
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[2], "150,50,5,2");
    }
}
