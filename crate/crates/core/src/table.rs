//! Contingency tables, Dirichlet priors and posterior parameters.
//!
//! Counts are held as `f64` throughout: fractional pseudo-counts from the
//! Jeffreys and Perks priors flow into every downstream formula.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Cell, Error, Result};
use crate::numfmt::fmt_f64;

/// Text encodings accepted by [`parse_table`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    /// Comma separated, one table row per line, no header.
    Csv,
    /// Whitespace (tab or space) separated, one table row per line, no header.
    Tsv,
    /// A JSON array of arrays of numbers.
    Json,
}

impl FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "tsv" => Ok(Self::Tsv),
            "json" => Ok(Self::Json),
            other => Err(Error::InvalidArgument(format!("unknown table format `{other}`"))),
        }
    }
}

/// Observed counts `n'_ij` of an `r x s` table, row-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountsTable {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl CountsTable {
    /// Builds a table from row-major entries.
    ///
    /// Entries must be finite and non-negative with at least one positive.
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || entries.is_empty() {
            return Err(Error::Validation("empty table".into()));
        }
        if rows * cols != entries.len() {
            return Err(Error::Validation(format!(
                "{rows}x{cols} table needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        let bad: Vec<Cell> = entries
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_finite() || **v < 0.0)
            .map(|(k, _)| (k / cols, k % cols))
            .collect();
        if !bad.is_empty() {
            return Err(Error::Validation(format!(
                "negative or non-finite entries at {}",
                list_cells(&bad)
            )));
        }
        if entries.iter().all(|&v| v == 0.0) {
            return Err(Error::Validation("all entries are zero".into()));
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    /// Builds a table from a nested row vector; rows must have equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        if let Some(k) = rows.iter().position(|r| r.len() != ncols) {
            return Err(Error::Format {
                line: k + 1,
                message: format!("row has {} fields, expected {ncols}", rows[k].len()),
            });
        }
        Self::new(rows.len(), ncols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().sum()
    }

    /// Nested row representation.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }

    /// Renders the table in `format` at full precision.
    pub fn serialize(&self, format: TableFormat) -> String {
        match format {
            TableFormat::Csv | TableFormat::Tsv => {
                let sep = if format == TableFormat::Csv { "," } else { "\t" };
                let mut out = String::new();
                for row in self.entries.chunks(self.cols) {
                    let fields: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
                    let _ = writeln!(out, "{}", fields.join(sep));
                }
                out
            }
            TableFormat::Json => {
                let rows: Vec<String> = self
                    .entries
                    .chunks(self.cols)
                    .map(|row| {
                        let fields: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
                        format!("[{}]", fields.join(","))
                    })
                    .collect();
                format!("[{}]", rows.join(","))
            }
        }
    }
}

/// Parses a contingency table from text.
pub fn parse_table(text: &str, format: TableFormat) -> Result<CountsTable> {
    let (rows, cols, entries) = parse_grid(text, format)?;
    CountsTable::new(rows, cols, entries)
}

/// Parses a custom prior matrix in the same layouts as [`parse_table`].
/// Unlike a table, an all-zero matrix is accepted.
pub fn parse_prior_matrix(text: &str, format: TableFormat) -> Result<PriorSpec> {
    let (rows, cols, values) = parse_grid(text, format)?;
    Ok(PriorSpec::Custom { rows, cols, values })
}

fn parse_grid(text: &str, format: TableFormat) -> Result<(usize, usize, Vec<f64>)> {
    let cells: Vec<Vec<Field>> = match format {
        TableFormat::Csv => split_lines(text, |line| line.split(',').map(str::trim).collect()),
        TableFormat::Tsv => split_lines(text, |line| line.split_whitespace().collect()),
        TableFormat::Json => parse_json_grid(text)?,
    };
    grid_entries(cells)
}

enum Field {
    Number(f64),
    Invalid(String),
}

fn split_lines<'a>(text: &'a str, split: impl Fn(&'a str) -> Vec<&'a str>) -> Vec<Vec<Field>> {
    text.lines()
        .filter(|line| !line.trim().is_empty())
        .map(|line| {
            split(line)
                .into_iter()
                .map(|tok| match tok.parse::<f64>() {
                    Ok(v) => Field::Number(v),
                    Err(_) => Field::Invalid(tok.to_string()),
                })
                .collect()
        })
        .collect()
}

fn parse_json_grid(text: &str) -> Result<Vec<Vec<Field>>> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Format {
        line: e.line(),
        message: e.to_string(),
    })?;
    let rows = value.as_array().ok_or_else(|| Error::Format {
        line: 1,
        message: "expected an array of arrays".into(),
    })?;
    rows.iter()
        .enumerate()
        .map(|(i, row)| {
            let row = row.as_array().ok_or_else(|| Error::Format {
                line: 1,
                message: format!("row {i} is not an array"),
            })?;
            Ok(row
                .iter()
                .map(|v| match v.as_f64() {
                    Some(x) => Field::Number(x),
                    None => Field::Invalid(v.to_string()),
                })
                .collect())
        })
        .collect()
}

fn grid_entries(grid: Vec<Vec<Field>>) -> Result<(usize, usize, Vec<f64>)> {
    if grid.is_empty() || grid.iter().all(Vec::is_empty) {
        return Err(Error::Validation("empty grid".into()));
    }
    let cols = grid[0].len();
    if let Some(k) = grid.iter().position(|r| r.len() != cols) {
        return Err(Error::Format {
            line: k + 1,
            message: format!("ragged row: {} fields, expected {cols}", grid[k].len()),
        });
    }
    let mut bad = Vec::new();
    let mut entries = Vec::with_capacity(grid.len() * cols);
    for (i, row) in grid.iter().enumerate() {
        for (j, field) in row.iter().enumerate() {
            match field {
                Field::Number(v) if v.is_finite() && *v >= 0.0 => entries.push(*v),
                Field::Number(v) => bad.push(format!("({i},{j})={v}")),
                Field::Invalid(tok) => bad.push(format!("({i},{j})=`{tok}`")),
            }
        }
    }
    if !bad.is_empty() {
        return Err(Error::Validation(format!(
            "negative or non-numeric entries at {}",
            bad.join(", ")
        )));
    }
    Ok((grid.len(), cols, entries))
}

/// Dirichlet prior pseudo-counts `n''_ij`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum PriorSpec {
    /// 0 per cell.
    Haldane,
    /// `1/(r s)` per cell.
    Perks,
    /// 1/2 per cell.
    Jeffreys,
    /// 1 per cell.
    Uniform,
    /// Explicit non-negative `r x s` matrix, row-major.
    Custom {
        rows: usize,
        cols: usize,
        values: Vec<f64>,
    },
}

impl PriorSpec {
    /// Custom prior from a nested row vector.
    pub fn custom(rows: &[Vec<f64>]) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::Format {
                line: 1,
                message: "ragged prior matrix".into(),
            });
        }
        Ok(Self::Custom {
            rows: rows.len(),
            cols: ncols,
            values: rows.concat(),
        })
    }

    /// Constant pseudo-count for the named kinds; `None` for custom priors.
    pub fn pseudo_count(&self, rows: usize, cols: usize) -> Option<f64> {
        match self {
            Self::Haldane => Some(0.0),
            Self::Perks => Some(1.0 / (rows * cols) as f64),
            Self::Jeffreys => Some(0.5),
            Self::Uniform => Some(1.0),
            Self::Custom { .. } => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Haldane => "haldane",
            Self::Perks => "perks",
            Self::Jeffreys => "jeffreys",
            Self::Uniform => "uniform",
            Self::Custom { .. } => "custom",
        }
    }
}

impl FromStr for PriorSpec {
    type Err = Error;

    /// Parses a named prior. Custom priors need a matrix and go through [`PriorSpec::custom`].
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "haldane" => Ok(Self::Haldane),
            "perks" => Ok(Self::Perks),
            "jeffreys" => Ok(Self::Jeffreys),
            "uniform" => Ok(Self::Uniform),
            other => Err(Error::InvalidArgument(format!("unknown prior `{other}`"))),
        }
    }
}

/// Dirichlet posterior parameters `n_ij = n'_ij + n''_ij` with cached marginals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosteriorCounts {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
    row_sums: Vec<f64>,
    col_sums: Vec<f64>,
    total: f64,
    all_positive: bool,
}

impl PosteriorCounts {
    /// Builds posterior parameters directly from row-major entries.
    pub fn from_entries(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        let table = CountsTable::new(rows, cols, entries)?;
        Ok(Self::from_table(table))
    }

    /// Builds posterior parameters from nested rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Ok(Self::from_table(CountsTable::from_rows(rows)?))
    }

    fn from_table(table: CountsTable) -> Self {
        let CountsTable {
            rows,
            cols,
            entries,
        } = table;
        let mut row_sums = vec![0.0; rows];
        let mut col_sums = vec![0.0; cols];
        for (k, &v) in entries.iter().enumerate() {
            row_sums[k / cols] += v;
            col_sums[k % cols] += v;
        }
        let total = entries.iter().sum();
        let all_positive = entries.iter().all(|&v| v > 0.0);
        Self {
            rows,
            cols,
            entries,
            row_sums,
            col_sums,
            total,
            all_positive,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Row-major `n_ij`.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    /// `n_{i+}`.
    pub fn row_sums(&self) -> &[f64] {
        &self.row_sums
    }

    /// `n_{+j}`.
    pub fn col_sums(&self) -> &[f64] {
        &self.col_sums
    }

    /// `n = sum_ij n_ij`.
    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn all_positive(&self) -> bool {
        self.all_positive
    }

    /// Cells with `n_ij == 0`.
    pub fn zero_cells(&self) -> Vec<Cell> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 0.0)
            .map(|(k, _)| (k / self.cols, k % self.cols))
            .collect()
    }

    /// Fails with [`Error::ZeroCells`] unless every cell is positive.
    pub fn require_all_positive(&self) -> Result<()> {
        if self.all_positive {
            Ok(())
        } else {
            Err(Error::ZeroCells {
                cells: self.zero_cells(),
            })
        }
    }

    /// True when the table has a single row or a single column, so `I` is identically 0.
    pub fn is_degenerate_shape(&self) -> bool {
        self.rows == 1 || self.cols == 1
    }

    /// All entries multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::from_entries(
            self.rows,
            self.cols,
            self.entries.iter().map(|v| v * factor).collect(),
        )
    }

    pub fn transposed(&self) -> Self {
        let mut entries = Vec::with_capacity(self.entries.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                entries.push(self.get(i, j));
            }
        }
        let table = CountsTable {
            rows: self.cols,
            cols: self.rows,
            entries,
        };
        Self::from_table(table)
    }

    /// Posterior means `n_ij / n`, row-major.
    pub fn posterior_mean(&self) -> Vec<f64> {
        self.entries.iter().map(|v| v / self.total).collect()
    }

    /// `min(log r, log s)`, the sharp upper bound of `I`.
    pub fn i_max(&self) -> f64 {
        (self.rows.min(self.cols) as f64).ln()
    }
}

/// Adds prior pseudo-counts to observed counts.
pub fn apply_prior(table: &CountsTable, prior: &PriorSpec) -> Result<PosteriorCounts> {
    let entries = match prior {
        PriorSpec::Custom { rows, cols, values } => {
            if *rows != table.rows || *cols != table.cols || values.len() != rows * cols {
                return Err(Error::ShapeMismatch {
                    expected_rows: table.rows,
                    expected_cols: table.cols,
                    rows: *rows,
                    cols: *cols,
                });
            }
            let bad: Vec<Cell> = values
                .iter()
                .enumerate()
                .filter(|(_, v)| !v.is_finite() || **v < 0.0)
                .map(|(k, _)| (k / cols, k % cols))
                .collect();
            if !bad.is_empty() {
                return Err(Error::Validation(format!(
                    "custom prior has negative or non-finite entries at {}",
                    list_cells(&bad)
                )));
            }
            table
                .entries
                .iter()
                .zip(values)
                .map(|(a, b)| a + b)
                .collect()
        }
        named => {
            let add = named
                .pseudo_count(table.rows, table.cols)
                .expect("named prior has a constant pseudo-count");
            if add == 0.0 {
                table.entries.clone()
            } else {
                table.entries.iter().map(|v| v + add).collect()
            }
        }
    };
    Ok(PosteriorCounts::from_table(CountsTable {
        rows: table.rows,
        cols: table.cols,
        entries,
    }))
}

fn list_cells(cells: &[Cell]) -> String {
    cells
        .iter()
        .map(|(i, j)| format!("({i},{j})"))
        .collect::<Vec<_>>()
        .join(", ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(rows: &[Vec<f64>]) -> CountsTable {
        CountsTable::from_rows(rows).unwrap()
    }

    #[test]
    fn parse_csv() {
        let table = parse_table("1,2\n3,4", TableFormat::Csv).unwrap();
        assert_eq!(table.rows(), 2);
        assert_eq!(table.cols(), 2);
        assert_eq!(table.entries(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn parse_tsv_all_zero_rejected() {
        let err = parse_table("0 0\n0 0", TableFormat::Tsv).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn parse_json_zero_off_diagonal() {
        let table = parse_table("[[5,0],[0,5]]", TableFormat::Json).unwrap();
        assert_eq!(table.to_rows(), vec![vec![5.0, 0.0], vec![0.0, 5.0]]);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            parse_table("1,2\n3", TableFormat::Csv),
            Err(Error::Format { line: 2, .. })
        ));
        let err = parse_table("1,-2\n3,x", TableFormat::Csv).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("(0,1)") && msg.contains("(1,1)"), "{msg}");
        assert!(matches!(
            parse_table("", TableFormat::Csv),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            parse_table("[]", TableFormat::Json),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            parse_table("[[1,\"a\"]]", TableFormat::Json),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            parse_table("[[1,2],[3]]", TableFormat::Json),
            Err(Error::Format { .. })
        ));
        assert!(matches!(
            parse_table("1,nan", TableFormat::Csv),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn prior_application() {
        let base = t(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let uni = apply_prior(&base, &PriorSpec::Uniform).unwrap();
        assert_eq!(uni.entries(), &[2.0, 3.0, 4.0, 5.0]);
        assert_eq!(uni.total(), 14.0);
        assert_eq!(uni.row_sums(), &[5.0, 9.0]);
        assert_eq!(uni.col_sums(), &[6.0, 8.0]);

        let hal = apply_prior(&base, &PriorSpec::Haldane).unwrap();
        assert_eq!(hal.entries(), base.entries());
        assert_eq!(hal.total(), 10.0);

        let diag = t(&[vec![5.0, 0.0], vec![0.0, 5.0]]);
        let jef = apply_prior(&diag, &PriorSpec::Jeffreys).unwrap();
        assert_eq!(jef.entries(), &[5.5, 0.5, 0.5, 5.5]);
        assert!(jef.all_positive());
        let hal = apply_prior(&diag, &PriorSpec::Haldane).unwrap();
        assert!(!hal.all_positive());
        assert_eq!(hal.zero_cells(), vec![(0, 1), (1, 0)]);

        let perks = apply_prior(&base, &PriorSpec::Perks).unwrap();
        assert_eq!(perks.entries()[0], 1.25);
    }

    #[test]
    fn custom_prior_errors() {
        let base = t(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let wrong = PriorSpec::custom(&[vec![1.0, 1.0, 1.0]]).unwrap();
        assert!(matches!(
            apply_prior(&base, &wrong),
            Err(Error::ShapeMismatch { .. })
        ));
        let neg = PriorSpec::custom(&[vec![1.0, -1.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(
            apply_prior(&base, &neg),
            Err(Error::Validation(_))
        ));
        let ok = PriorSpec::custom(&[vec![0.0, 0.5], vec![1.0, 0.0]]).unwrap();
        let post = apply_prior(&base, &ok).unwrap();
        assert_eq!(post.entries(), &[1.0, 2.5, 4.0, 4.0]);
    }

    #[test]
    fn prior_matrix_parsing() {
        let zero = parse_prior_matrix("0,0\n0,0\n", TableFormat::Csv).unwrap();
        assert_eq!(zero.pseudo_count(2, 2), None);
        let base = t(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(apply_prior(&base, &zero).unwrap().entries(), base.entries());
        let p = parse_prior_matrix("[[0.5, 1], [2, 0]]", TableFormat::Json).unwrap();
        assert_eq!(apply_prior(&base, &p).unwrap().entries(), &[1.5, 3.0, 5.0, 4.0]);
        assert!(parse_prior_matrix("1,-1\n", TableFormat::Csv).is_err());
        assert!(parse_prior_matrix("1,2\n3\n", TableFormat::Csv).is_err());
    }

    #[test]
    fn degenerate_shapes_accepted() {
        let row = t(&[vec![1.0, 2.0, 3.0]]);
        let post = apply_prior(&row, &PriorSpec::Jeffreys).unwrap();
        assert!(post.is_degenerate_shape());
        assert_eq!(post.i_max(), 0.0);
    }

    fn table_strategy() -> impl Strategy<Value = CountsTable> {
        (1usize..6, 1usize..6)
            .prop_flat_map(|(r, s)| {
                (
                    Just(r),
                    Just(s),
                    prop::collection::vec(
                        prop_oneof![Just(0.0), 0.0f64..1e6, (0u32..1000).prop_map(f64::from)],
                        r * s,
                    ),
                )
            })
            .prop_filter_map("all zero", |(r, s, v)| CountsTable::new(r, s, v).ok())
    }

    proptest! {
        #[test]
        fn serialize_round_trip(table in table_strategy()) {
            for format in [TableFormat::Csv, TableFormat::Tsv, TableFormat::Json] {
                let text = table.serialize(format);
                let back = parse_table(&text, format).unwrap();
                prop_assert_eq!(&back, &table);
            }
        }

        #[test]
        fn named_prior_totals(table in table_strategy()) {
            let (r, s) = (table.rows(), table.cols());
            for prior in [PriorSpec::Haldane, PriorSpec::Perks, PriorSpec::Jeffreys, PriorSpec::Uniform] {
                let post = apply_prior(&table, &prior).unwrap();
                let add = prior.pseudo_count(r, s).unwrap();
                let expected = table.total() + (r * s) as f64 * add;
                prop_assert!((post.total() - expected).abs() <= 1e-12 * expected);
                let rs: f64 = post.row_sums().iter().sum();
                let cs: f64 = post.col_sums().iter().sum();
                prop_assert!((rs - post.total()).abs() <= 1e-12 * post.total());
                prop_assert!((cs - post.total()).abs() <= 1e-12 * post.total());
            }
            let hal = apply_prior(&table, &PriorSpec::Haldane).unwrap();
            prop_assert!(hal.entries().iter().zip(table.entries()).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }
}
