//! Writing reports to disk.
//!
//! `report.json` is always written. With `csv` every table also goes to
//! `<table>.csv` (header row of column names, one mesh or grid point per
//! line, floats in shortest round-trip exponent form). With `gnuplot-dat`
//! tables go to `<table>.dat`: a `#` header, then whitespace-separated
//! `x value error` columns when the table names a plot triple, all columns
//! otherwise.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;

use crate::config::OutputFormat;
use crate::report::{RunReport, Table};

pub fn table_csv(t: &Table) -> String {
    let mut out = t.columns.join(",");
    out.push('\n');
    for row in &t.rows {
        let cells: Vec<String> = row.iter().map(|x| format!("{x:e}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Inverse of [`table_csv`].
pub fn parse_csv(name: &str, text: &str) -> anyhow::Result<Table> {
    let mut lines = text.lines();
    let header = lines.next().context("empty csv")?;
    let columns: Vec<String> = header.split(',').map(str::to_string).collect();
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let row = line
            .split(',')
            .map(|c| {
                c.parse::<f64>()
                    .with_context(|| format!("line {}: bad number `{c}`", k + 2))
            })
            .collect::<anyhow::Result<Vec<f64>>>()?;
        anyhow::ensure!(
            row.len() == columns.len(),
            "line {}: expected {} cells",
            k + 2,
            columns.len()
        );
        rows.push(row);
    }
    Ok(Table {
        name: name.to_string(),
        columns,
        rows,
        plot: None,
    })
}

pub fn table_dat(t: &Table) -> String {
    let cols: Vec<usize> = match t.plot {
        Some(p) => p.to_vec(),
        None => (0..t.columns.len()).collect(),
    };
    let mut out = String::from("#");
    for &c in &cols {
        let _ = write!(out, " {}", t.columns[c]);
    }
    out.push('\n');
    for row in &t.rows {
        let cells: Vec<String> = cols.iter().map(|&c| format!("{:e}", row[c])).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    out
}

/// Writes the report into `dir` and returns the files written.
pub fn emit(report: &RunReport, format: OutputFormat, dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut written = Vec::new();
    let mut put = |name: String, body: String| -> anyhow::Result<()> {
        let path = dir.join(name);
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
        Ok(())
    };
    put("report.json".into(), report.to_json()?)?;
    put(
        "timings.json".into(),
        format!("{{\n  \"wall_time_s\": {}\n}}\n", report.wall_time_s),
    )?;
    for t in &report.tables {
        match format {
            OutputFormat::Json => {}
            OutputFormat::Csv => put(format!("{}.csv", t.name), table_csv(t))?,
            OutputFormat::GnuplotDat => put(format!("{}.dat", t.name), table_dat(t))?,
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> Table {
        let mut t = Table::new("t", &["x", "y", "err"]);
        t.push(vec![0.1, 1.0 / 3.0, 1e-17]);
        t.push(vec![2.0, -0.0, f64::MAX]);
        t
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let t = table();
        let back = parse_csv("t", &table_csv(&t)).unwrap();
        assert_eq!(back.columns, t.columns);
        for (a, b) in back.rows.iter().flatten().zip(t.rows.iter().flatten()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn dat_uses_the_plot_columns() {
        let mut t = table();
        t.plot = Some([0, 2, 1]);
        let dat = table_dat(&t);
        let mut lines = dat.lines();
        assert_eq!(lines.next(), Some("# x err y"));
        assert_eq!(lines.next(), Some("1e-1 1e-17 3.333333333333333e-1"));
    }

    #[test]
    fn malformed_csv_is_an_error() {
        assert!(parse_csv("t", "a,b\n1,2\n3\n").is_err());
        assert!(parse_csv("t", "a\nx\n").is_err());
    }
}
