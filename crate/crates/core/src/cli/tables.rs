//! CSV schemas, writers and validating readers.
//!
//! Every file may start with one `#` comment line (the timestamp header),
//! followed by a header row and data rows. Readers check the header against
//! the schema and every cell against its column type.

use std::io::Write;

use crate::error::{Error, Result};

/// Column types of a schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    /// Free text (no commas or quotes needed by any writer here).
    Text,
    /// Finite number.
    Num,
    /// Finite number or blank.
    OptNum,
    /// Non-negative integer.
    Int,
    /// Non-negative integer, `inf`, or blank.
    Extent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schema {
    pub columns: &'static [(&'static str, Cell)],
}

impl Schema {
    pub fn names(&self) -> Vec<&'static str> {
        self.columns.iter().map(|c| c.0).collect()
    }
}

/// Force table: one row per geometry point, τ and method.
pub const FORCES: Schema = Schema {
    columns: &[
        ("method", Cell::Text),
        ("kind", Cell::Text),
        ("a", Cell::Int),
        ("d", Cell::Extent),
        ("tau", Cell::OptNum),
        ("sigma", Cell::Num),
        ("resolution", Cell::Int),
        ("F_total", Cell::OptNum),
        ("F_n0", Cell::OptNum),
        ("F_npos", Cell::OptNum),
        ("F_TE", Cell::OptNum),
        ("F_TM", Cell::OptNum),
        ("oracle_rel_err", Cell::OptNum),
    ],
};

/// Weight spectrum g(ξ) on the synthesis grid.
pub const WEIGHT_SPECTRUM: Schema = Schema {
    columns: &[
        ("a", Cell::Int),
        ("resolution", Cell::Int),
        ("sigma", Cell::Num),
        ("tau", Cell::Num),
        ("xi", Cell::Num),
        ("re_g", Cell::Num),
        ("im_g", Cell::Num),
        ("zero_mode_constant", Cell::Num),
    ],
};

/// Time weight g(t).
pub const WEIGHT_TIME: Schema = Schema {
    columns: &[
        ("a", Cell::Int),
        ("resolution", Cell::Int),
        ("sigma", Cell::Num),
        ("tau", Cell::Num),
        ("t", Cell::Num),
        ("g", Cell::Num),
        ("zero_mode_constant", Cell::Num),
    ],
};

/// Reference integrand samples with running sums.
pub const REFERENCE_TERMS: Schema = Schema {
    columns: &[
        ("kind", Cell::Text),
        ("a", Cell::Int),
        ("d", Cell::Extent),
        ("resolution", Cell::Int),
        ("sigma", Cell::Num),
        ("tau", Cell::Num),
        ("polarization", Cell::Text),
        ("rule", Cell::Text),
        ("n", Cell::Int),
        ("xi", Cell::Num),
        ("f", Cell::Num),
        ("partial_sum", Cell::Num),
    ],
};

/// Γ(t) dump.
pub const GAMMA_DUMP: Schema =
    Schema { columns: &[("step", Cell::Int), ("gamma_E", Cell::Num), ("gamma_H", Cell::Num)] };

/// Raw response dump.
pub const RAW_DUMP: Schema = Schema { columns: &[("step", Cell::Int), ("probe", Cell::Int), ("value", Cell::Num)] };

/// Probe legend of a raw dump.
pub const PROBE_LEGEND: Schema = Schema {
    columns: &[
        ("probe", Cell::Int),
        ("x2", Cell::Int),
        ("y2", Cell::Int),
        ("source", Cell::Text),
        ("component", Cell::Text),
    ],
};

/// Method name of the failure marker row.
pub const FAILURE_MARKER: &str = "FAILED";

/// One row of the force table.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceRow {
    pub method: String,
    pub kind: String,
    pub a: usize,
    /// Blank for 1D, `inf` for an open piston.
    pub d: String,
    pub tau: Option<f64>,
    pub sigma: f64,
    pub resolution: usize,
    pub f_total: Option<f64>,
    pub f_n0: Option<f64>,
    pub f_npos: Option<f64>,
    pub f_te: Option<f64>,
    pub f_tm: Option<f64>,
    pub oracle_rel_err: Option<f64>,
}

impl ForceRow {
    pub fn is_failure(&self) -> bool {
        self.method == FAILURE_MARKER
    }

    fn cells(&self) -> Vec<String> {
        vec![
            self.method.clone(),
            self.kind.clone(),
            self.a.to_string(),
            self.d.clone(),
            opt(self.tau),
            num(self.sigma),
            self.resolution.to_string(),
            opt(self.f_total),
            opt(self.f_n0),
            opt(self.f_npos),
            opt(self.f_te),
            opt(self.f_tm),
            opt(self.oracle_rel_err),
        ]
    }
}

/// Shortest round-trip formatting (deterministic).
pub fn num(v: f64) -> String {
    format!("{v:e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Writes an optional comment line, the header and the rows.
pub fn write_table<W: Write>(out: W, comment: Option<&str>, schema: &Schema, rows: &[Vec<String>]) -> Result<()> {
    let mut out = out;
    if let Some(c) = comment {
        writeln!(out, "# {c}")?;
    }
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(schema.names()).map_err(io)?;
    for r in rows {
        if r.len() != schema.columns.len() {
            return Err(Error::Io(format!("row has {} cells, schema has {}", r.len(), schema.columns.len())));
        }
        w.write_record(r).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_forces<W: Write>(out: W, comment: Option<&str>, rows: &[ForceRow]) -> Result<()> {
    let cells: Vec<Vec<String>> = rows.iter().map(ForceRow::cells).collect();
    write_table(out, comment, &FORCES, &cells)
}

fn check_cell(line: usize, name: &str, kind: Cell, v: &str) -> Result<()> {
    let bad = |what: &str| Err(Error::Csv { line, msg: format!("column {name}: expected {what}, got `{v}`") });
    match kind {
        Cell::Text => {
            if v.is_empty() {
                return bad("text");
            }
        }
        Cell::Num => {
            if !v.parse::<f64>().is_ok_and(f64::is_finite) {
                return bad("a finite number");
            }
        }
        Cell::OptNum => {
            if !v.is_empty() && !v.parse::<f64>().is_ok_and(f64::is_finite) {
                return bad("a finite number or blank");
            }
        }
        Cell::Int => {
            if v.parse::<usize>().is_err() {
                return bad("a non-negative integer");
            }
        }
        Cell::Extent => {
            if !v.is_empty() && v != "inf" && v.parse::<usize>().is_err() {
                return bad("an integer, inf or blank");
            }
        }
    }
    Ok(())
}

/// Parses `text` against `schema`, returning the data rows.
pub fn read_table(text: &str, schema: &Schema) -> Result<Vec<Vec<String>>> {
    let (skip, rest) = match text.strip_prefix('#') {
        Some(r) => (1, r.split_once('\n').map(|x| x.1).unwrap_or("")),
        None => (0, text),
    };
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(rest.as_bytes());
    let names = schema.names();
    let mut out = Vec::new();
    let mut header = true;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Csv {
            line: skip + e.position().map(|p| p.line() as usize).unwrap_or(1),
            msg: e.to_string(),
        })?;
        let line = skip + rec.position().map(|p| p.line() as usize).unwrap_or(1);
        if header {
            if rec.iter().collect::<Vec<_>>() != names {
                return Err(Error::Csv { line, msg: format!("header must be {}", names.join(",")) });
            }
            header = false;
            continue;
        }
        if rec.len() != names.len() {
            return Err(Error::Csv { line, msg: format!("expected {} cells, got {}", names.len(), rec.len()) });
        }
        for (v, &(name, kind)) in rec.iter().zip(schema.columns) {
            check_cell(line, name, kind, v)?;
        }
        out.push(rec.iter().map(str::to_string).collect());
    }
    if header {
        return Err(Error::Csv { line: skip + 1, msg: "missing header".into() });
    }
    Ok(out)
}

/// Parses a force table. Failure rows may leave every value blank.
pub fn read_forces(text: &str) -> Result<Vec<ForceRow>> {
    let f = |s: &str| -> Option<f64> { s.parse().ok() };
    read_table(text, &FORCES).map(|rows| {
        rows.into_iter()
            .map(|r| ForceRow {
                method: r[0].clone(),
                kind: r[1].clone(),
                a: r[2].parse().unwrap_or(0),
                d: r[3].clone(),
                tau: f(&r[4]),
                sigma: f(&r[5]).unwrap_or(0.0),
                resolution: r[6].parse().unwrap_or(0),
                f_total: f(&r[7]),
                f_n0: f(&r[8]),
                f_npos: f(&r[9]),
                f_te: f(&r[10]),
                f_tm: f(&r[11]),
                oracle_rel_err: f(&r[12]),
            })
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row() -> ForceRow {
        ForceRow {
            method: "timedomain".into(),
            kind: "plates_1d".into(),
            a: 40,
            d: String::new(),
            tau: Some(std::f64::consts::PI),
            sigma: 0.025,
            resolution: 1,
            f_total: Some(-1.5707),
            f_n0: Some(-1.5),
            f_npos: Some(-0.0707),
            f_te: None,
            f_tm: None,
            oracle_rel_err: Some(1.2e-4),
        }
    }

    #[test]
    fn round_trip() {
        let mut buf = Vec::new();
        write_forces(&mut buf, Some("generated now"), &[row()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# generated now\nmethod,kind,a,d,tau"));
        assert_eq!(read_forces(&text).unwrap(), vec![row()]);
    }

    #[test]
    fn schema_violations() {
        let head = FORCES.names().join(",");
        assert!(read_forces("method,kind\n").is_err());
        let bad = format!("{head}\ntimedomain,plates_1d,x,,0,1,1,,,,,,\n");
        assert!(matches!(read_forces(&bad), Err(Error::Csv { line: 2, .. })));
        let short = format!("# c\n{head}\ntimedomain,plates_1d\n");
        assert!(matches!(read_forces(&short), Err(Error::Csv { line: 3, .. })));
        let nan = format!("{head}\ntimedomain,plates_1d,4,,NaN,1,1,,,,,,\n");
        assert!(read_forces(&nan).is_err());
        assert!(read_forces("").is_err());
    }

    #[test]
    fn number_format_round_trips() {
        for v in [0.1, -1.0 / 3.0, 1e-300, 6.02e23] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
    }

    proptest::proptest! {
        #[test]
        fn force_rows_round_trip(
            method in "[a-z_=\\[\\], ]{1,20}",
            a in 0usize..1000,
            d in proptest::option::of(0usize..1000),
            vals in proptest::collection::vec(proptest::option::of(-1e300f64..1e300), 7),
            sigma in -1e3f64..1e3,
        ) {
            let r = ForceRow {
                method,
                kind: "piston_2d".into(),
                a,
                d: d.map_or(String::new(), |d| d.to_string()),
                tau: vals[0],
                sigma,
                resolution: a / 7,
                f_total: vals[1],
                f_n0: vals[2],
                f_npos: vals[3],
                f_te: vals[4],
                f_tm: vals[5],
                oracle_rel_err: vals[6],
            };
            let mut buf = Vec::new();
            write_forces(&mut buf, Some("c"), std::slice::from_ref(&r)).unwrap();
            proptest::prop_assert_eq!(read_forces(std::str::from_utf8(&buf).unwrap()).unwrap(), vec![r]);
        }

        #[test]
        fn arbitrary_text_never_panics(text in "[ -~\n]{0,300}") {
            let _ = read_forces(&text);
            let _ = read_table(&text, &GAMMA_DUMP);
        }
    }
}
