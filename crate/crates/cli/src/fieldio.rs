//! Field CSV files: header `x1,...,xN,value`, one row per node in storage
//! order. Floats are written in shortest round-trip form, so a written file
//! reads back bit-exactly.

use std::io::{Read, Write};
use std::path::Path;

use pxlap_core::{Grid, ScalarField};

use crate::error::CliError;

fn fmt(x: f64) -> String {
    format!("{x}")
}

pub fn write_field<W: Write>(out: W, field: &ScalarField) -> csv::Result<()> {
    let g = field.grid();
    let d = g.dim();
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=d).map(|k| format!("x{k}")).collect();
    header.push("value".into());
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(d + 1);
    for (i, v) in field.values().iter().enumerate() {
        row.clear();
        let x = g.coords(i);
        row.extend(x[..d].iter().map(|c| fmt(*c)));
        row.push(fmt(*v));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_field(path: &Path, field: &ScalarField) -> Result<(), CliError> {
    let f = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    write_field(std::io::BufWriter::new(f), field)
        .map_err(|e| CliError::Format { path: path.to_path_buf(), detail: e.to_string() })
}

/// Reads a field, reconstructing the grid from the distinct coordinates.
pub fn read_field<R: Read>(input: R) -> Result<ScalarField, String> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|e| e.to_string())?.clone();
    let d = header.len().checked_sub(1).filter(|d| (1..=3).contains(d)).ok_or("expected 2 to 4 columns")?;
    for k in 0..d {
        if header.get(k) != Some(format!("x{}", k + 1).as_str()) {
            return Err(format!("column {} must be named x{}", k + 1, k + 1));
        }
    }
    if header.get(d) != Some("value") {
        return Err("last column must be named value".into());
    }
    let mut coords: Vec<Vec<f64>> = Vec::new();
    let mut values = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        if rec.len() != d + 1 {
            return Err(format!("row {} has {} columns", line + 2, rec.len()));
        }
        let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("row {}: {e}", line + 2));
        coords.push((0..d).map(|k| parse(&rec[k])).collect::<Result<_, _>>()?);
        values.push(parse(&rec[d])?);
    }
    let mut lower = vec![0.0; d];
    let mut upper = vec![0.0; d];
    let mut nodes = vec![0usize; d];
    for k in 0..d {
        let mut axis: Vec<f64> = coords.iter().map(|c| c[k]).collect();
        axis.sort_by(f64::total_cmp);
        axis.dedup();
        lower[k] = axis[0];
        upper[k] = *axis.last().ok_or("empty field")?;
        nodes[k] = axis.len();
    }
    let grid = Grid::new(&lower, &upper, &nodes).map_err(|e| e.to_string())?;
    if grid.len() != values.len() {
        return Err(format!("{} rows do not fill a {:?} grid", values.len(), nodes));
    }
    for (i, c) in coords.iter().enumerate() {
        let x = grid.coords(i);
        for k in 0..d {
            let tol = 1e-9 * (upper[k] - lower[k]);
            if (x[k] - c[k]).abs() > tol {
                return Err(format!("row {} is out of storage order", i + 2));
            }
        }
    }
    ScalarField::new(grid, values).map_err(|e| e.to_string())
}

pub fn load_field(path: &Path) -> Result<ScalarField, CliError> {
    let f = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    read_field(std::io::BufReader::new(f)).map_err(|detail| CliError::Format { path: path.to_path_buf(), detail })
}

/// Writes rows of numbers under `header`.
pub fn save_table(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<(), CliError> {
    let err = |e: csv::Error| CliError::Format { path: path.to_path_buf(), detail: e.to_string() };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r.iter().map(|x| fmt(*x))).map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let g = Grid::new(&[0.0, -1.0], &[1.0, 2.0], &[7, 5]).unwrap();
        let u = ScalarField::from_fn(g, |x| (x[0] * 3.1).sin() / (1.0 + x[1] * x[1]) * 1e-7 + 1.0 / 3.0);
        let mut buf = Vec::new();
        write_field(&mut buf, &u).unwrap();
        let back = read_field(buf.as_slice()).unwrap();
        assert_eq!(back.grid(), u.grid());
        assert!(back.values().iter().zip(u.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
        let mut again = Vec::new();
        write_field(&mut again, &back).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn header_is_checked() {
        assert!(read_field("x1,y\n0,1\n".as_bytes()).is_err());
        assert!(read_field("x2,value\n0,1\n".as_bytes()).is_err());
        let s = "x1,value\n0,0\n0.5,1\n1,0\n";
        let f = read_field(s.as_bytes()).unwrap();
        assert_eq!(f.values(), &[0.0, 1.0, 0.0]);
        assert!(read_field("x1,value\n0,0\n1,1\n0.5,0\n".as_bytes()).is_err());
    }
}
