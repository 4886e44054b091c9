//! Panels of time series and the aggregation structures laid over them.
//!
//! A [`SeriesPanel`] stores a `T x n` matrix of observations, one column per
//! series, together with the level each series sits at. A [`Grouping`] is the
//! binary `k x m` aggregation matrix `C` mapping bottom series onto middle
//! series, and a [`HierarchySpec`] adds the implied top row and identity block
//! to give the `(m + k + 1) x m` summing matrix.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// Id given to the top series when it is synthesized by summation.
pub const TOP_ID: &str = "Total";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Top,
    Middle,
    Bottom,
}

/// A complete, regularly sampled panel of series.
#[derive(Debug, Clone)]
pub struct SeriesPanel {
    values: DMatrix<f64>,
    ids: Vec<String>,
    levels: Vec<Level>,
    /// Monthly period index (`year * 12 + month - 1`) of each row.
    periods: Vec<i64>,
    seasonal_period: usize,
    synthetic_top: bool,
}

impl SeriesPanel {
    /// Build a panel from bottom-level columns, appending a summed top series.
    pub fn from_bottom(
        ids: Vec<String>,
        bottom: DMatrix<f64>,
        start_period: i64,
        seasonal_period: usize,
    ) -> Result<Self> {
        if ids.len() != bottom.ncols() {
            return Err(Error::Argument(format!(
                "{} ids for {} columns",
                ids.len(),
                bottom.ncols()
            )));
        }
        let periods = (0..bottom.nrows() as i64).map(|t| start_period + t).collect();
        let levels = vec![Level::Bottom; ids.len()];
        Self::assemble(bottom, ids, levels, periods, seasonal_period)
    }

    fn assemble(
        values: DMatrix<f64>,
        mut ids: Vec<String>,
        mut levels: Vec<Level>,
        periods: Vec<i64>,
        seasonal_period: usize,
    ) -> Result<Self> {
        if seasonal_period == 0 {
            return Err(Error::Argument("seasonal period must be positive".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse {
                location: "panel".into(),
                message: "non-finite observation".into(),
            });
        }
        let mut seen = HashSet::new();
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::Format(format!("duplicate series id '{id}'")));
            }
        }
        let n_bottom = levels.iter().filter(|l| **l == Level::Bottom).count();
        if n_bottom < 2 {
            return Err(Error::Format(format!(
                "a panel needs at least 2 bottom series, found {n_bottom}"
            )));
        }
        let n_top = levels.iter().filter(|l| **l == Level::Top).count();
        let mut values = values;
        let mut synthetic_top = false;
        match n_top {
            0 => {
                if seen.contains(TOP_ID) {
                    return Err(Error::Format(format!(
                        "column '{TOP_ID}' must be the top series"
                    )));
                }
                let bottom_cols: Vec<usize> = levels
                    .iter()
                    .enumerate()
                    .filter(|(_, l)| **l == Level::Bottom)
                    .map(|(j, _)| j)
                    .collect();
                let top = DMatrix::from_fn(values.nrows(), 1, |t, _| {
                    bottom_cols.iter().map(|&j| values[(t, j)]).sum()
                });
                let n = values.ncols();
                values = values.insert_columns(n, 1, 0.0);
                values.set_column(n, &top.column(0));
                ids.push(TOP_ID.to_string());
                levels.push(Level::Top);
                synthetic_top = true;
            }
            1 => {}
            _ => return Err(Error::Format("more than one top series".into())),
        }
        for w in periods.windows(2) {
            if w[1] != w[0] + 1 {
                return Err(Error::Format(format!(
                    "timestamps must advance by one period ({} -> {})",
                    format_period(w[0]),
                    format_period(w[1])
                )));
            }
        }
        Ok(Self {
            values,
            ids,
            levels,
            periods,
            seasonal_period,
            synthetic_top,
        })
    }

    /// The same panel with another seasonal period.
    pub fn with_seasonal_period(mut self, s: usize) -> Result<Self> {
        if s == 0 {
            return Err(Error::Argument("seasonal period must be positive".into()));
        }
        self.seasonal_period = s;
        Ok(self)
    }

    /// Number of observations `T`.
    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    /// Number of series `n`, including the top.
    pub fn n_series(&self) -> usize {
        self.values.ncols()
    }

    /// Number of bottom series `m`.
    pub fn m(&self) -> usize {
        self.levels.iter().filter(|l| **l == Level::Bottom).count()
    }

    pub fn seasonal_period(&self) -> usize {
        self.seasonal_period
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn periods(&self) -> &[i64] {
        &self.periods
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn has_synthetic_top(&self) -> bool {
        self.synthetic_top
    }

    /// Column indices of the bottom series, in panel order.
    pub fn bottom_indices(&self) -> Vec<usize> {
        self.level_indices(Level::Bottom)
    }

    pub fn level_indices(&self, level: Level) -> Vec<usize> {
        self.levels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == level)
            .map(|(j, _)| j)
            .collect()
    }

    pub fn bottom_ids(&self) -> Vec<String> {
        self.bottom_indices()
            .into_iter()
            .map(|j| self.ids[j].clone())
            .collect()
    }

    /// The `T x m` block of bottom series.
    pub fn bottom(&self) -> DMatrix<f64> {
        let cols = self.bottom_indices();
        DMatrix::from_fn(self.len(), cols.len(), |t, j| self.values[(t, cols[j])])
    }

    /// Observations of one series by column index.
    pub fn series(&self, j: usize) -> Vec<f64> {
        self.values.column(j).iter().copied().collect()
    }
}

/// Encode `YYYY-MM` as a monthly period index.
pub fn parse_period(s: &str) -> Option<i64> {
    let (y, m) = s.trim().split_once('-')?;
    if y.len() != 4 || m.len() != 2 {
        return None;
    }
    let year: i64 = y.parse().ok()?;
    let month: i64 = m.parse().ok()?;
    if !(1..=12).contains(&month) {
        return None;
    }
    Some(year * 12 + month - 1)
}

pub fn format_period(p: i64) -> String {
    format!("{:04}-{:02}", p.div_euclid(12), p.rem_euclid(12) + 1)
}

/// Format a float with at most 12 significant digits.
pub fn format_value(x: f64) -> String {
    let rounded: f64 = format!("{x:.11e}").parse().unwrap_or(x);
    if rounded == 0.0 {
        return "0".to_string();
    }
    format!("{rounded}")
}

/// Read a wide panel CSV (`date,<id1>,...,<idn>`); every column is a bottom
/// series and a top series is synthesized by summation.
pub fn read_panel(path: impl AsRef<Path>, seasonal_period: usize) -> Result<SeriesPanel> {
    let (ids, periods, values) = read_wide_csv(path.as_ref())?;
    let levels = vec![Level::Bottom; ids.len()];
    SeriesPanel::assemble(values, ids, levels, periods, seasonal_period)
}

/// Read a panel whose level tags come from a companion hierarchy JSON.
///
/// Columns named as keys of the metadata are middle series, a column named
/// [`TOP_ID`] is the top, and the rest are bottom series.
pub fn read_panel_with_metadata(
    path: impl AsRef<Path>,
    seasonal_period: usize,
    metadata: impl AsRef<Path>,
) -> Result<SeriesPanel> {
    let (ids, periods, values) = read_wide_csv(path.as_ref())?;
    let mapping = read_mapping(metadata.as_ref())?;
    let middle: HashSet<&str> = mapping.iter().map(|(k, _)| k.as_str()).collect();
    let levels = ids
        .iter()
        .map(|id| {
            if id == TOP_ID {
                Level::Top
            } else if middle.contains(id.as_str()) {
                Level::Middle
            } else {
                Level::Bottom
            }
        })
        .collect();
    SeriesPanel::assemble(values, ids, levels, periods, seasonal_period)
}

fn read_wide_csv(path: &Path) -> Result<(Vec<String>, Vec<i64>, DMatrix<f64>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_wide_csv(&text, &path.display().to_string())
}

fn parse_wide_csv(text: &str, origin: &str) -> Result<(Vec<String>, Vec<i64>, DMatrix<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| Error::Parse {
        location: origin.to_string(),
        message: e.to_string(),
    })?;
    if header.len() < 3 {
        return Err(Error::Format(format!(
            "{origin}: expected a date column and at least 2 series columns, found {} columns",
            header.len()
        )));
    }
    let ids: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
    let mut periods = Vec::new();
    let mut data = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| Error::Parse {
            location: format!("{origin}:{line}"),
            message: e.to_string(),
        })?;
        if record.len() != ids.len() + 1 {
            return Err(Error::Parse {
                location: format!("{origin}:{line}"),
                message: format!("expected {} fields, found {}", ids.len() + 1, record.len()),
            });
        }
        let period = parse_period(&record[0]).ok_or_else(|| Error::Parse {
            location: format!("{origin}:{line}"),
            message: format!("invalid date '{}', expected YYYY-MM", &record[0]),
        })?;
        if let Some(&prev) = periods.last() {
            if period <= prev {
                return Err(Error::Format(format!(
                    "{origin}:{line}: timestamps are not increasing"
                )));
            }
        }
        periods.push(period);
        for (j, cell) in record.iter().skip(1).enumerate() {
            let cell = cell.trim();
            if cell.is_empty() {
                return Err(Error::Parse {
                    location: format!("{origin}:{line}"),
                    message: format!("missing value for series '{}'", ids[j]),
                });
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                location: format!("{origin}:{line}"),
                message: format!("invalid number '{cell}'"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    location: format!("{origin}:{line}"),
                    message: format!("non-finite value for series '{}'", ids[j]),
                });
            }
            data.push(v);
        }
    }
    if periods.is_empty() {
        return Err(Error::Format(format!("{origin}: no observations")));
    }
    let values = DMatrix::from_row_slice(periods.len(), ids.len(), &data);
    Ok((ids, periods, values))
}

/// Write the panel back in the wide CSV layout, omitting a synthesized top.
pub fn write_panel(panel: &SeriesPanel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, panel_to_csv(panel)).map_err(|e| Error::io(path, e))
}

pub fn panel_to_csv(panel: &SeriesPanel) -> String {
    let cols: Vec<usize> = (0..panel.n_series())
        .filter(|&j| !(panel.synthetic_top && panel.levels[j] == Level::Top))
        .collect();
    let mut out = String::from("date");
    for &j in &cols {
        out.push(',');
        out.push_str(&panel.ids[j]);
    }
    out.push('\n');
    for t in 0..panel.len() {
        out.push_str(&format_period(panel.periods[t]));
        for &j in &cols {
            out.push(',');
            out.push_str(&format_value(panel.values[(t, j)]));
        }
        out.push('\n');
    }
    out
}

/// Binary aggregation matrix `C` mapping bottom series onto middle series.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Grouping {
    m: usize,
    rows: Vec<Vec<bool>>,
    middle_ids: Vec<String>,
}

impl Grouping {
    /// Validate and build a grouping. Rows must be non-empty and distinct.
    pub fn new(m: usize, rows: Vec<Vec<bool>>, middle_ids: Vec<String>) -> Result<Self> {
        if rows.len() != middle_ids.len() {
            return Err(Error::Argument(format!(
                "{} rows but {} middle ids",
                rows.len(),
                middle_ids.len()
            )));
        }
        let mut seen = HashSet::new();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::Argument(format!(
                    "row {i} has {} columns, expected {m}",
                    row.len()
                )));
            }
            if !row.iter().any(|&b| b) {
                return Err(Error::Argument(format!("row {i} is all zero")));
            }
            if !seen.insert(row.clone()) {
                return Err(Error::Argument(format!("row {i} duplicates an earlier row")));
            }
        }
        Ok(Self {
            m,
            rows,
            middle_ids,
        })
    }

    /// Build from rows, naming middle series `M1..Mk`.
    pub fn from_rows(m: usize, rows: Vec<Vec<bool>>) -> Result<Self> {
        let ids = default_middle_ids(rows.len());
        Self::new(m, rows, ids)
    }

    /// Keep only rows strictly between a single bottom series and the top,
    /// dropping repeats; remaining rows keep their first-seen order.
    pub fn from_rows_pruned(m: usize, rows: impl IntoIterator<Item = Vec<bool>>) -> Self {
        let mut seen = HashSet::new();
        let kept: Vec<Vec<bool>> = rows
            .into_iter()
            .filter(|r| {
                let s = r.iter().filter(|&&b| b).count();
                s > 1 && s < m
            })
            .filter(|r| seen.insert(r.clone()))
            .collect();
        let ids = default_middle_ids(kept.len());
        Self {
            m,
            rows: kept,
            middle_ids: ids,
        }
    }

    /// The empty grouping (`k = 0`), i.e. the two-level hierarchy.
    pub fn two_level(m: usize) -> Self {
        Self {
            m,
            rows: Vec::new(),
            middle_ids: Vec::new(),
        }
    }

    /// Build from lists of bottom indices.
    pub fn from_members(m: usize, members: &[Vec<usize>]) -> Result<Self> {
        let rows = members
            .iter()
            .map(|list| {
                let mut row = vec![false; m];
                for &j in list {
                    if j >= m {
                        return Err(Error::Argument(format!("member {j} out of range for m={m}")));
                    }
                    row[j] = true;
                }
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(m, rows)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<bool>] {
        &self.rows
    }

    pub fn middle_ids(&self) -> &[String] {
        &self.middle_ids
    }

    pub fn row_sums(&self) -> Vec<usize> {
        self.rows
            .iter()
            .map(|r| r.iter().filter(|&&b| b).count())
            .collect()
    }

    /// Bottom indices aggregated by middle series `i`.
    pub fn members(&self, i: usize) -> Vec<usize> {
        self.rows[i]
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(j, _)| j)
            .collect()
    }

    /// `C` as a dense 0/1 matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.k(), self.m, |i, j| f64::from(u8::from(self.rows[i][j])))
    }
}

fn default_middle_ids(k: usize) -> Vec<String> {
    (1..=k).map(|i| format!("M{i}")).collect()
}

/// A grouping together with the implied top row and bottom identity block.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchySpec {
    pub grouping: Grouping,
    pub label: String,
}

impl HierarchySpec {
    pub fn new(grouping: Grouping, label: impl Into<String>) -> Self {
        Self {
            grouping,
            label: label.into(),
        }
    }

    pub fn m(&self) -> usize {
        self.grouping.m()
    }

    /// Total number of series `n = 1 + k + m`.
    pub fn n(&self) -> usize {
        1 + self.grouping.k() + self.grouping.m()
    }

    pub fn summing_matrix(&self) -> DMatrix<f64> {
        summing_matrix(&self.grouping)
    }
}

/// `S = [1_{1 x m}; C; I_m]`.
pub fn summing_matrix(grouping: &Grouping) -> DMatrix<f64> {
    let m = grouping.m();
    let k = grouping.k();
    DMatrix::from_fn(1 + k + m, m, |i, j| {
        if i == 0 {
            1.0
        } else if i <= k {
            f64::from(u8::from(grouping.rows[i - 1][j]))
        } else if i - 1 - k == j {
            1.0
        } else {
            0.0
        }
    })
}

fn read_mapping(path: &Path) -> Result<Vec<(String, Vec<String>)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_mapping(&text)
}

fn parse_mapping(text: &str) -> Result<Vec<(String, Vec<String>)>> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| Error::Metadata(format!("invalid JSON: {e}")))?;
    let Value::Object(map) = value else {
        return Err(Error::Metadata("expected a JSON object of arrays".into()));
    };
    map.into_iter()
        .map(|(key, members)| {
            let Value::Array(items) = members else {
                return Err(Error::Metadata(format!("'{key}' must map to an array")));
            };
            let members = items
                .into_iter()
                .map(|v| match v {
                    Value::String(s) => Ok(s),
                    other => Err(Error::Metadata(format!(
                        "'{key}' has a non-string member {other}"
                    ))),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((key, members))
        })
        .collect()
}

/// Read a natural hierarchy (`{"middle id": ["bottom id", ...], ...}`).
pub fn read_natural_hierarchy(path: impl AsRef<Path>, panel: &SeriesPanel) -> Result<HierarchySpec> {
    let mapping = read_mapping(path.as_ref())?;
    hierarchy_from_mapping(mapping, &panel.bottom_ids(), "Natural")
}

/// Parse hierarchy JSON text against a list of bottom ids.
pub fn parse_hierarchy(text: &str, bottom_ids: &[String], label: &str) -> Result<HierarchySpec> {
    hierarchy_from_mapping(parse_mapping(text)?, bottom_ids, label)
}

fn hierarchy_from_mapping(
    mapping: Vec<(String, Vec<String>)>,
    bottom_ids: &[String],
    label: &str,
) -> Result<HierarchySpec> {
    let m = bottom_ids.len();
    let mut rows = Vec::with_capacity(mapping.len());
    let mut ids = Vec::with_capacity(mapping.len());
    for (key, members) in mapping {
        if members.is_empty() {
            return Err(Error::Metadata(format!("'{key}' has no members")));
        }
        let mut row = vec![false; m];
        for member in &members {
            let j = bottom_ids
                .iter()
                .position(|b| b == member)
                .ok_or_else(|| Error::Metadata(format!("'{key}' references unknown series '{member}'")))?;
            row[j] = true;
        }
        rows.push(row);
        ids.push(key);
    }
    let grouping =
        Grouping::new(m, rows, ids).map_err(|e| Error::Metadata(e.to_string()))?;
    Ok(HierarchySpec::new(grouping, label))
}

/// Serialize a grouping in the hierarchy JSON format.
pub fn hierarchy_to_json(grouping: &Grouping, bottom_ids: &[String]) -> String {
    let mut map = Map::new();
    for (i, id) in grouping.middle_ids().iter().enumerate() {
        let members = grouping
            .members(i)
            .into_iter()
            .map(|j| Value::String(bottom_ids[j].clone()))
            .collect();
        map.insert(id.clone(), Value::Array(members));
    }
    serde_json::to_string_pretty(&Value::Object(map)).expect("JSON object serializes")
}

pub fn write_hierarchy(
    grouping: &Grouping,
    bottom_ids: &[String],
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, hierarchy_to_json(grouping, bottom_ids)).map_err(|e| Error::io(path, e))
}
