//! Minimal CSV writer: `,` separator, `.` decimals, header row, LF endings.
//! The first line carries the manifest hash as a `#` comment.

use crate::io::json::format_float;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i128),
    Float(f64),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) if v.is_finite() => format_float(*v),
            Cell::Float(v) if v.is_nan() => "nan".into(),
            Cell::Float(v) => if *v > 0.0 { "inf" } else { "-inf" }.into(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v.into())
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i128)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(v.into())
    }
}

impl From<i128> for Cell {
    fn from(v: i128) -> Self {
        Cell::Int(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn render(&self, manifest_hash: &str) -> String {
        let mut out = format!("# manifest={manifest_hash}\n");
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_exact_bytes() {
        let mut t = CsvTable::new(["k", "gap", "note"]);
        t.push(vec![Cell::from(3i64), Cell::from(0.5), Cell::from("a,b".to_string())]);
        t.push(vec![Cell::from(4i64), Cell::from(f64::INFINITY), Cell::Empty]);
        assert_eq!(
            t.render("abc"),
            "# manifest=abc\nk,gap,note\n3,5.0000000000000000e-1,\"a,b\"\n4,inf,\n"
        );
    }
}
