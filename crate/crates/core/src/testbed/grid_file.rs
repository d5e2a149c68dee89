//! Plain-text grid format shared by heightmaps and obstacle maps.
//!
//! ```text
//! rows cols x_min x_max y_min y_max
//! v00 v01 ... v0(cols-1)
//! ...
//! ```
//! Values are row-major; row `i` sits at `y_min + i * dy`, column `j` at
//! `x_min + j * dx`.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GridFile {
    pub rows: usize,
    pub cols: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub values: Vec<f64>,
}

impl GridFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut tokens = text.split_whitespace();
        let mut next = |what: &str| tokens.next().ok_or_else(|| Error::Config(format!("grid file: missing {what}")));
        let rows: usize = parse_tok(next("rows")?)?;
        let cols: usize = parse_tok(next("cols")?)?;
        let x_min: f64 = parse_tok(next("x_min")?)?;
        let x_max: f64 = parse_tok(next("x_max")?)?;
        let y_min: f64 = parse_tok(next("y_min")?)?;
        let y_max: f64 = parse_tok(next("y_max")?)?;
        if rows == 0 || cols == 0 {
            return Err(Error::Config("grid file: empty grid".into()));
        }
        if !(x_max > x_min && y_max > y_min) {
            return Err(Error::Config("grid file: degenerate extent".into()));
        }
        let values: Vec<f64> = tokens.map(parse_tok).collect::<Result<_>>()?;
        if values.len() != rows * cols {
            return Err(Error::Config(format!(
                "grid file: expected {} values, found {}",
                rows * cols,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("grid file: non-finite value".into()));
        }
        Ok(Self { rows, cols, x_min, x_max, y_min, y_max, values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn render(&self) -> String {
        let mut s = format!(
            "{} {} {} {} {} {}\n",
            self.rows, self.cols, self.x_min, self.x_max, self.y_min, self.y_max
        );
        for row in self.values.chunks(self.cols) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(std::fs::write(path, self.render())?)
    }
}

fn parse_tok<T: std::str::FromStr>(tok: &str) -> Result<T> {
    tok.parse().map_err(|_| Error::Config(format!("grid file: cannot parse {tok:?}")))
}
