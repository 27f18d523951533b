//! Tables and reports written to the output directory.

use std::fs;
use std::path::{Path, PathBuf};

use pharmonic::operators::{decomposition, energy_density_sq, p_laplacian_composition, p_tension_residual};
use pharmonic::profile_ode::monotone_quantity_at;
use pharmonic::{ConvexProfile, ProfileSolution};
use serde::Serialize;

use crate::config::Format;
use crate::error::CliError;

pub const DIAGNOSTICS_HEADER: [&str; 13] =
    ["s", "f", "fp", "fpp", "dF2", "residual", "Q", "DeltapHF", "K", "Ktilde", "A1", "A2", "A3"];

pub type Row = [f64; 13];

/// Seventeen significant digits, enough to reproduce any `f64` exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn diagnostics(solution: &ProfileSolution, h: &ConvexProfile) -> Result<Vec<Row>, CliError> {
    let (g, j, params) = (solution.domain_warp(), solution.target_warp(), &solution.params);
    solution
        .nodes()
        .map(|st| {
            let fail = |e: &dyn std::fmt::Display| CliError::Analysis(format!("diagnostics at s = {}: {e}", st.s));
            let dec = decomposition(&st, h, g, j, params).map_err(|e| fail(&e))?;
            let row = [
                st.s,
                st.f,
                st.f1,
                st.f2,
                energy_density_sq(&st, g, j, params.n).map_err(|e| fail(&e))?,
                p_tension_residual(&st, g, j, params).map_err(|e| fail(&e))?,
                monotone_quantity_at(&st, g, j, params).map_err(|e| fail(&e))?,
                p_laplacian_composition(&st, h, g, j, params).map_err(|e| fail(&e))?,
                dec.k,
                dec.ktilde,
                dec.a1,
                dec.a2,
                dec.a3,
            ];
            match row.iter().position(|v| !v.is_finite()) {
                Some(k) => Err(fail(&format!("{} is not finite", DIAGNOSTICS_HEADER[k]))),
                None => Ok(row),
            }
        })
        .collect()
}

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    pub fn write_json<S: Serialize + ?Sized>(&self, name: &str, value: &S) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Analysis(e.to_string()))?;
        text.push('\n');
        self.write_text(name, &text)
    }

    /// Writes `stem.csv` or `stem.json` (an array of objects keyed by the header).
    pub fn write_table(
        &self,
        stem: &str,
        format: Format,
        header: &[&str],
        rows: &[Vec<Cell>],
    ) -> Result<PathBuf, CliError> {
        match format {
            Format::Csv => {
                let path = self.path(&format!("{stem}.csv"));
                let io = |e: csv::Error| CliError::io(&path, e);
                let mut w = csv::Writer::from_path(&path).map_err(io)?;
                w.write_record(header).map_err(io)?;
                for row in rows {
                    w.write_record(row.iter().map(Cell::to_csv)).map_err(io)?;
                }
                w.flush().map_err(|e| CliError::io(&path, e))?;
                Ok(path)
            }
            Format::Json => {
                let objects: Vec<serde_json::Map<String, serde_json::Value>> = rows
                    .iter()
                    .map(|row| header.iter().map(|k| k.to_string()).zip(row.iter().map(Cell::to_json)).collect())
                    .collect();
                self.write_json(&format!("{stem}.json"), &objects)
            }
        }
    }
}

/// One table entry.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Bool(bool),
    Text(String),
    Missing,
}

impl Cell {
    pub fn opt(x: Option<f64>) -> Self {
        x.map_or(Cell::Missing, Cell::Num)
    }

    fn to_csv(&self) -> String {
        match self {
            Cell::Num(x) => fmt_f64(*x),
            Cell::Int(k) => k.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Missing => String::new(),
        }
    }

    fn to_json(&self) -> serde_json::Value {
        match self {
            Cell::Num(x) => serde_json::Value::from(*x),
            Cell::Int(k) => serde_json::Value::from(*k),
            Cell::Bool(b) => serde_json::Value::from(*b),
            Cell::Text(s) => serde_json::Value::from(s.as_str()),
            Cell::Missing => serde_json::Value::Null,
        }
    }
}

pub fn numeric_rows(rows: &[Row]) -> Vec<Vec<Cell>> {
    rows.iter().map(|r| r.iter().map(|&x| Cell::Num(x)).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_precision_round_trip() {
        for x in [0.1, 1.0 / 3.0, 2.414_418_221_256_639, 1e-300, -7.25e17] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn header_string() {
        assert_eq!(DIAGNOSTICS_HEADER.join(","), "s,f,fp,fpp,dF2,residual,Q,DeltapHF,K,Ktilde,A1,A2,A3");
    }
}
