//! Run-directory writers. Floats are printed with 17 significant digits so
//! the CSV files round-trip exactly.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

pub fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

pub fn subdir(dir: &Path, name: &str) -> Result<PathBuf, CliError> {
    let p = dir.join(name);
    prepare_dir(&p)?;
    Ok(p)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("config types serialize");
    text.push('\n');
    std::fs::write(path, text).map_err(io_err(path))
}

pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV accumulated in memory and written in one go.
pub struct Csv {
    text: String,
    columns: usize,
}

/// One CSV cell.
pub enum Cell {
    F(f64),
    I(usize),
    S(String),
    B(bool),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}
impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::I(v)
    }
}
impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::B(v)
    }
}
impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.to_string())
    }
}
impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::S(v)
    }
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self {
            text: header.join(",") + "\n",
            columns: header.len(),
        }
    }

    pub fn row(&mut self, cells: Vec<Cell>) {
        assert_eq!(cells.len(), self.columns, "row width");
        for (k, c) in cells.into_iter().enumerate() {
            if k > 0 {
                self.text.push(',');
            }
            match c {
                Cell::F(v) => self.text.push_str(&float(v)),
                Cell::I(v) => write!(self.text, "{v}").unwrap(),
                Cell::B(v) => self.text.push_str(if v { "true" } else { "false" }),
                Cell::S(v) if v.contains([',', '"', '\n']) => {
                    write!(self.text, "\"{}\"", v.replace('"', "\"\"")).unwrap()
                }
                Cell::S(v) => self.text.push_str(&v),
            }
        }
        self.text.push('\n');
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, &self.text).map_err(io_err(path))
    }
}

#[macro_export]
macro_rules! cells {
    ($($x:expr),* $(,)?) => { vec![$($crate::output::Cell::from($x)),*] };
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, -1.0 / 3.0, 1e-300, f64::MAX, 5e-324] {
            assert_eq!(float(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn quotes_cells_with_commas() {
        let mut c = Csv::new(&["a", "b"]);
        c.row(cells!["x,y", 2usize]);
        assert_eq!(c.text, "a,b\n\"x,y\",2\n");
    }
}
