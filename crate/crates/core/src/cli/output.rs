//! Time-series CSV and legacy-VTK snapshot files.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::driver::StepRecord;
use crate::mesh::Mesh;
use crate::parabolic::State;

pub const CSV_HEADER: &str = "t,energy_total,energy_bulk,energy_sep,energy_exch,p_inf,p_h1,picard_iters,dt,elliptic_residual";

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed VTK file: {0}")]
    Vtk(String),
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// One CSV row. Floats use Rust's locale-independent shortest form.
pub fn csv_row(r: &StepRecord) -> String {
    format!(
        "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{:e},{:e}",
        r.t,
        r.energy.total,
        r.energy.bulk,
        r.energy.separation,
        r.energy.exchange,
        r.p_inf,
        r.p_h1,
        r.picard_iters,
        r.dt,
        r.elliptic_residual
    )
}

/// Append-only time-series writer; every row is flushed as written.
pub struct TimeseriesWriter {
    path: PathBuf,
    file: File,
}

impl TimeseriesWriter {
    /// Creates the file with a header, truncating any previous content.
    pub fn create(path: &Path) -> Result<Self, OutputError> {
        let mut file = File::create(path).map_err(io_err(path))?;
        writeln!(file, "{CSV_HEADER}").map_err(io_err(path))?;
        Ok(Self {
            path: path.to_path_buf(),
            file,
        })
    }

    /// Opens for appending; writes the header only if the file is new or
    /// empty.
    pub fn append(path: &Path) -> Result<Self, OutputError> {
        let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
        let mut file = OpenOptions::new().create(true).append(true).open(path).map_err(io_err(path))?;
        if fresh {
            writeln!(file, "{CSV_HEADER}").map_err(io_err(path))?;
        }
        Ok(Self {
            path: path.to_path_buf(),
            file,
        })
    }

    pub fn write(&mut self, r: &StepRecord) -> Result<(), OutputError> {
        writeln!(self.file, "{}", csv_row(r)).map_err(io_err(&self.path))?;
        self.file.flush().map_err(io_err(&self.path))
    }
}

/// Writes a legacy ASCII unstructured-grid file with nodal displacement,
/// potential and polarization.
pub fn write_vtk(path: &Path, mesh: &Mesh, state: &State) -> Result<(), OutputError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let err = io_err(path);
    let n = mesh.num_vertices();
    let m = mesh.num_triangles();
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\n");
    s.push_str(&format!("ferrosim state t={:e}\nASCII\nDATASET UNSTRUCTURED_GRID\n", state.t));
    s.push_str(&format!("POINTS {n} double\n"));
    for v in &mesh.vertices {
        s.push_str(&format!("{:e} {:e} 0\n", v[0], v[1]));
    }
    s.push_str(&format!("CELLS {m} {}\n", 4 * m));
    for t in &mesh.triangles {
        s.push_str(&format!("3 {} {} {}\n", t[0], t[1], t[2]));
    }
    s.push_str(&format!("CELL_TYPES {m}\n"));
    for _ in 0..m {
        s.push_str("5\n");
    }
    s.push_str(&format!("POINT_DATA {n}\nVECTORS displacement double\n"));
    for u in &state.u {
        s.push_str(&format!("{:e} {:e} 0\n", u[0], u[1]));
    }
    s.push_str("SCALARS potential double 1\nLOOKUP_TABLE default\n");
    for phi in &state.phi {
        s.push_str(&format!("{phi:e}\n"));
    }
    s.push_str("VECTORS polarization double\n");
    for p in &state.p {
        s.push_str(&format!("{:e} {:e} 0\n", p[0], p[1]));
    }
    w.write_all(s.as_bytes()).map_err(&err)?;
    w.flush().map_err(&err)
}

/// Contents of a legacy VTK unstructured grid as written by [`write_vtk`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VtkData {
    pub points: Vec<[f64; 3]>,
    pub cells: Vec<Vec<usize>>,
    pub cell_types: Vec<u8>,
    pub vectors: BTreeMap<String, Vec<[f64; 3]>>,
    pub scalars: BTreeMap<String, Vec<f64>>,
}

struct Tokens<'a> {
    iter: std::iter::Peekable<std::str::SplitWhitespace<'a>>,
}

impl<'a> Tokens<'a> {
    fn next(&mut self, what: &str) -> Result<&'a str, OutputError> {
        self.iter.next().ok_or_else(|| OutputError::Vtk(format!("unexpected end of file reading {what}")))
    }

    fn expect(&mut self, word: &str) -> Result<(), OutputError> {
        let t = self.next(word)?;
        if t == word {
            Ok(())
        } else {
            Err(OutputError::Vtk(format!("expected `{word}`, found `{t}`")))
        }
    }

    fn parse<T: std::str::FromStr>(&mut self, what: &str) -> Result<T, OutputError> {
        let t = self.next(what)?;
        t.parse().map_err(|_| OutputError::Vtk(format!("bad {what} `{t}`")))
    }

    fn triple(&mut self, what: &str) -> Result<[f64; 3], OutputError> {
        Ok([self.parse(what)?, self.parse(what)?, self.parse(what)?])
    }
}

pub fn parse_vtk(text: &str) -> Result<VtkData, OutputError> {
    let mut lines = text.lines();
    let version = lines.next().unwrap_or_default();
    if !version.starts_with("# vtk DataFile Version") {
        return Err(OutputError::Vtk("missing version line".into()));
    }
    lines.next();
    let rest: Vec<&str> = lines.collect();
    let body = rest.join("\n");
    let mut tk = Tokens {
        iter: body.split_whitespace().peekable(),
    };
    tk.expect("ASCII")?;
    tk.expect("DATASET")?;
    tk.expect("UNSTRUCTURED_GRID")?;
    let mut out = VtkData::default();
    let mut n_point_data = None;
    while let Some(key) = tk.iter.next() {
        match key {
            "POINTS" => {
                let n: usize = tk.parse("point count")?;
                tk.next("point type")?;
                for _ in 0..n {
                    out.points.push(tk.triple("point coordinate")?);
                }
            }
            "CELLS" => {
                let m: usize = tk.parse("cell count")?;
                let _size: usize = tk.parse("cell list size")?;
                for _ in 0..m {
                    let k: usize = tk.parse("cell size")?;
                    let cell = (0..k).map(|_| tk.parse("cell index")).collect::<Result<Vec<usize>, _>>()?;
                    if cell.iter().any(|&v| v >= out.points.len()) {
                        return Err(OutputError::Vtk("cell refers to a missing point".into()));
                    }
                    out.cells.push(cell);
                }
            }
            "CELL_TYPES" => {
                let m: usize = tk.parse("cell type count")?;
                for _ in 0..m {
                    out.cell_types.push(tk.parse("cell type")?);
                }
            }
            "POINT_DATA" => n_point_data = Some(tk.parse::<usize>("point data count")?),
            "VECTORS" => {
                let n = n_point_data.ok_or_else(|| OutputError::Vtk("VECTORS before POINT_DATA".into()))?;
                let name = tk.next("array name")?.to_string();
                tk.next("array type")?;
                let v = (0..n).map(|_| tk.triple("vector component")).collect::<Result<Vec<_>, _>>()?;
                out.vectors.insert(name, v);
            }
            "SCALARS" => {
                let n = n_point_data.ok_or_else(|| OutputError::Vtk("SCALARS before POINT_DATA".into()))?;
                let name = tk.next("array name")?.to_string();
                tk.next("array type")?;
                if tk.iter.peek().is_some_and(|t| t.parse::<usize>().is_ok()) {
                    tk.next("component count")?;
                }
                tk.expect("LOOKUP_TABLE")?;
                tk.next("lookup table name")?;
                let v = (0..n).map(|_| tk.parse("scalar value")).collect::<Result<Vec<f64>, _>>()?;
                out.scalars.insert(name, v);
            }
            other => return Err(OutputError::Vtk(format!("unexpected keyword `{other}`"))),
        }
    }
    if out.cells.len() != out.cell_types.len() {
        return Err(OutputError::Vtk("cell and cell-type counts differ".into()));
    }
    Ok(out)
}
