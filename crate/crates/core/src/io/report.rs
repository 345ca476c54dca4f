//! Tabular reports as CSV (with `#` comment header lines) or JSON.
//!
//! Reals are rendered with six significant digits in the style of C's `%g`.

use std::path::Path;

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::metrics::StackScores;
use crate::occlusion::CorrectionReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    /// JSON for a `.json` extension, CSV otherwise.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => ReportFormat::Json,
            _ => ReportFormat::Csv,
        }
    }
}

/// `%g` with precision 6: fixed or scientific by exponent, trailing zeros trimmed.
pub fn format_sig6(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-4..6).contains(&exp) {
        format!("{}e{}{:02}", trim(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        trim(&format!("{:.*}", (5 - exp) as usize, x))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Int(i64),
    Num(f64),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Int(i) => i.to_string(),
            Cell::Num(x) => format_sig6(*x),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Int(i) => Value::from(*i),
            Cell::Num(x) => format_sig6(*x)
                .parse::<f64>()
                .ok()
                .and_then(serde_json::Number::from_f64)
                .map_or(Value::Null, Value::Number),
            Cell::Empty => Value::Null,
        }
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::Int(i as i64)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

/// A report: `key: value` metadata lines, a header row and data rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            meta: vec![("generator".into(), format!("mip-core {}", env!("CARGO_PKG_VERSION")))],
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::invalid(format!(
                "row has {} cells, table has {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        for (k, v) in &self.meta {
            out.extend_from_slice(format!("# {k}: {v}\n").as_bytes());
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.into_inner().map_err(|e| Error::invalid(format!("csv flush failed: {e}")))
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        let meta: Map<String, Value> = self
            .meta
            .iter()
            .map(|(k, v)| (k.clone(), Value::String(v.clone())))
            .collect();
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                Value::Object(
                    self.columns
                        .iter()
                        .zip(r)
                        .map(|(c, cell)| (c.clone(), cell.json()))
                        .collect(),
                )
            })
            .collect();
        let mut doc = Map::new();
        doc.insert("meta".into(), Value::Object(meta));
        doc.insert("columns".into(), self.columns.clone().into());
        doc.insert("rows".into(), Value::Array(rows));
        let mut bytes = serde_json::to_vec_pretty(&Value::Object(doc))?;
        bytes.push(b'\n');
        Ok(bytes)
    }

    pub fn encode(&self, format: ReportFormat) -> Result<Vec<u8>> {
        match format {
            ReportFormat::Csv => self.to_csv(),
            ReportFormat::Json => self.to_json(),
        }
    }
}

pub fn write_table(table: &Table, path: impl AsRef<Path>, format: ReportFormat) -> Result<()> {
    super::write_bytes(path.as_ref(), &table.encode(format)?)
}

/// A CSV report read back as text: metadata pairs, header and raw rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedCsv {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ParsedCsv {
    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

pub fn parse_csv(bytes: &[u8]) -> Result<ParsedCsv> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::parse("csv", e.to_string()))?;
    let meta = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .filter_map(|l| l.trim_start_matches('#').trim().split_once(": "))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(bytes);
    let columns = r.headers()?.iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect()))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(ParsedCsv { meta, columns, rows })
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<ParsedCsv> {
    parse_csv(&super::read_bytes(path.as_ref())?)
}

pub const SCORE_COLUMNS: [&str; 6] = ["case_id", "angle_deg", "dice", "iou", "hausdorff", "hd_undefined_flag"];

pub const CORRECTION_COLUMNS: [&str; 7] = [
    "case_id",
    "angle_deg",
    "component_id",
    "pixel_count",
    "origin_fraction",
    "action",
    "retained_px",
];

/// Per-angle segmentation scores of each case.
pub fn score_table(cases: &[(String, StackScores)]) -> Result<Table> {
    let mut t = Table::new(&SCORE_COLUMNS);
    t.meta("hausdorff_units", "pixels")
        .meta("empty_masks", "dice = iou = 1 and hausdorff = 0 when both masks are empty")
        .meta("hd_undefined", "exactly one mask empty; hausdorff left blank and excluded from means")
        .meta("pooling", "per case: mean over angles; dataset: mean and population std over cases");
    for (id, s) in cases {
        for (a, m) in s.angles.iter().zip(&s.per_mip) {
            t.push(vec![
                id.as_str().into(),
                (*a).into(),
                m.dice.into(),
                m.iou.into(),
                m.hausdorff.into(),
                Cell::Int(m.hausdorff.is_none() as i64),
            ])?;
        }
    }
    Ok(t)
}

/// Per-component decisions of each case, with the configuration and the
/// pooled exclusion statistics in the header.
pub fn correction_table(cases: &[(String, CorrectionReport)]) -> Result<Table> {
    let mut t = Table::new(&CORRECTION_COLUMNS);
    if let Some((_, first)) = cases.first() {
        let c = &first.config;
        t.meta("origin_threshold", format_sig6(c.origin_threshold))
            .meta("connectivity", c.connectivity.count())
            .meta("min_fragment_px", c.min_fragment_px)
            .meta("contrast_ratio_min", format_sig6(c.contrast_ratio_min))
            .meta("contrast_ring_radius_px", c.contrast_ring_radius_px);
        let mut total = first.exclusion;
        for (_, r) in &cases[1..] {
            total = total.merge(&r.exclusion);
        }
        t.meta("tumors_total", total.tumors_total)
            .meta("tumors_excluded_from_all_mips", total.tumors_excluded)
            .meta("tumors_excluded_fraction", format_sig6(total.excluded_fraction()))
            .meta("tumor_voxels_total", total.tumor_voxels_total)
            .meta("excluded_voxels", total.excluded_voxels)
            .meta("volume_excluded_fraction", format_sig6(total.volume_excluded_fraction()));
    }
    for (id, r) in cases {
        for m in &r.per_mip {
            for d in &m.decisions {
                t.push(vec![
                    id.as_str().into(),
                    m.angle_deg.into(),
                    Cell::Int(d.component_id as i64),
                    d.pixel_count.into(),
                    d.tumor_origin_fraction.into(),
                    d.action.as_str().into(),
                    d.retained_pixel_count.into(),
                ])?;
            }
        }
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::SegScores;

    #[test]
    fn sig6_matches_printf_g() {
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (0.5, "0.5"),
            (1.0 / 3.0, "0.333333"),
            (2.0 / 3.0, "0.666667"),
            (11.25, "11.25"),
            (123456.0, "123456"),
            (1234567.0, "1.23457e+06"),
            (999999.5, "1e+06"),
            (0.0001, "0.0001"),
            (0.00001234, "1.234e-05"),
            (-2.5, "-2.5"),
            (100.0, "100"),
            (5.0f64.sqrt(), "2.23607"),
        ];
        for (x, s) in cases {
            assert_eq!(format_sig6(x), s, "{x}");
        }
    }

    fn one_case(h: Option<f64>) -> Vec<(String, StackScores)> {
        let m = SegScores { dice: 2.0 / 3.0, iou: 0.5, hausdorff: h };
        vec![(
            "c1".into(),
            StackScores {
                angles: vec![0.0],
                per_mip: vec![m],
                mean_dice: m.dice,
                mean_iou: m.iou,
                mean_hausdorff: h,
                hausdorff_undefined: h.is_none() as usize,
            },
        )]
    }

    #[test]
    fn empty_score_list_is_header_only() {
        let csv = score_table(&[]).unwrap().to_csv().unwrap();
        let p = parse_csv(&csv).unwrap();
        assert_eq!(p.columns, SCORE_COLUMNS);
        assert!(p.rows.is_empty());
        assert_eq!(p.meta_value("hausdorff_units"), Some("pixels"));
    }

    #[test]
    fn score_row_roundtrips_at_six_digits() {
        let csv = score_table(&one_case(Some(2f64.sqrt()))).unwrap().to_csv().unwrap();
        let p = parse_csv(&csv).unwrap();
        let row = &p.rows[0];
        assert_eq!(row[0], "c1");
        let back: f64 = row[2].parse().unwrap();
        assert_eq!(format_sig6(back), format_sig6(2.0 / 3.0));
        assert_eq!(row[4], "1.41421");
        assert_eq!(row[5], "0");
    }

    #[test]
    fn undefined_hausdorff_is_blank_with_flag() {
        let t = score_table(&one_case(None)).unwrap();
        let p = parse_csv(&t.to_csv().unwrap()).unwrap();
        assert_eq!(p.rows[0][4], "");
        assert_eq!(p.rows[0][5], "1");
        let json: Value = serde_json::from_slice(&t.to_json().unwrap()).unwrap();
        assert_eq!(json["rows"][0]["hausdorff"], Value::Null);
        assert_eq!(json["rows"][0]["iou"], Value::from(0.5));
    }

    #[test]
    fn push_checks_width() {
        let mut t = Table::new(&["a", "b"]);
        assert!(t.push(vec![Cell::Int(1)]).is_err());
    }
}
