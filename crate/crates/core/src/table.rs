//! The modeling table shared by every learner.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Marks a column as one indicator of a one-hot encoded categorical.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Indicator {
    pub group: String,
    pub level: String,
}

impl Indicator {
    /// Column name used for an indicator: `group[level]`.
    pub fn column_name(group: &str, level: &str) -> String {
        format!("{group}[{level}]")
    }

    /// Recover the indicator from a column name written by [`Indicator::column_name`].
    pub fn parse(name: &str) -> Option<Indicator> {
        let inner = name.strip_suffix(']')?;
        let open = inner.find('[')?;
        let (group, level) = (&inner[..open], &inner[open + 1..]);
        if group.is_empty() || level.is_empty() {
            return None;
        }
        Some(Indicator {
            group: group.to_string(),
            level: level.to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub values: Vec<f64>,
    pub indicator: Option<Indicator>,
}

impl Column {
    pub fn numeric(name: impl Into<String>, values: Vec<f64>) -> Self {
        Column {
            name: name.into(),
            values,
            indicator: None,
        }
    }

    pub fn indicator(group: &str, level: &str, values: Vec<f64>) -> Self {
        Column {
            name: Indicator::column_name(group, level),
            values,
            indicator: Some(Indicator {
                group: group.to_string(),
                level: level.to_string(),
            }),
        }
    }
}

/// A permutation unit: the columns that are shuffled together.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureUnit {
    pub name: String,
    pub columns: Vec<usize>,
}

/// Named finite numeric columns plus an optional numeric outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    ids: Vec<String>,
    columns: Vec<Column>,
    outcome: Option<(String, Vec<f64>)>,
}

impl FeatureTable {
    pub fn new(ids: Vec<String>, columns: Vec<Column>) -> Result<Self> {
        let n = ids.len();
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::input(format!("duplicate column name '{}'", c.name)));
            }
            if c.values.len() != n {
                return Err(Error::input(format!(
                    "column '{}' has {} values, expected {n}",
                    c.name,
                    c.values.len()
                )));
            }
            if let Some(i) = c.values.iter().position(|v| !v.is_finite()) {
                return Err(Error::input(format!(
                    "column '{}' has a non-finite value at row {}",
                    c.name, i
                )));
            }
        }
        Ok(FeatureTable {
            ids,
            columns,
            outcome: None,
        })
    }

    /// Table with sequential ids `0..n`.
    pub fn from_columns(columns: Vec<Column>) -> Result<Self> {
        let n = columns.first().map_or(0, |c| c.values.len());
        Self::new((0..n).map(|i| i.to_string()).collect(), columns)
    }

    pub fn with_outcome(mut self, name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if values.len() != self.n_rows() {
            return Err(Error::input(format!(
                "outcome has {} values, expected {}",
                values.len(),
                self.n_rows()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!("outcome '{name}' is non-finite at row {i}")));
        }
        if self.columns.iter().any(|c| c.name == name) {
            return Err(Error::input(format!("outcome '{name}' collides with a feature column")));
        }
        self.outcome = Some((name, values));
        Ok(self)
    }

    pub fn n_rows(&self) -> usize {
        self.ids.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn values(&self, idx: usize) -> &[f64] {
        &self.columns[idx].values
    }

    /// Column values by name, or an input error naming the missing column.
    pub fn require(&self, name: &str) -> Result<&[f64]> {
        self.column(name)
            .map(|c| c.values.as_slice())
            .ok_or_else(|| Error::input(format!("missing column '{name}'")))
    }

    /// Resolve a list of names to column indices.
    pub fn resolve(&self, names: &[String]) -> Result<Vec<usize>> {
        names
            .iter()
            .map(|n| {
                self.column_index(n)
                    .ok_or_else(|| Error::input(format!("missing column '{n}'")))
            })
            .collect()
    }

    pub fn outcome(&self) -> Option<&[f64]> {
        self.outcome.as_ref().map(|(_, v)| v.as_slice())
    }

    pub fn outcome_name(&self) -> Option<&str> {
        self.outcome.as_ref().map(|(n, _)| n.as_str())
    }

    /// The outcome, or an input error when the table is unlabeled.
    pub fn require_outcome(&self) -> Result<&[f64]> {
        self.outcome()
            .ok_or_else(|| Error::input("table has no outcome column"))
    }

    pub fn set_values(&mut self, idx: usize, values: Vec<f64>) {
        assert_eq!(values.len(), self.n_rows());
        self.columns[idx].values = values;
    }

    pub fn push_column(&mut self, column: Column) -> Result<()> {
        if self.column_index(&column.name).is_some() {
            return Err(Error::input(format!("duplicate column name '{}'", column.name)));
        }
        if column.values.len() != self.n_rows() {
            return Err(Error::input(format!(
                "column '{}' has {} values, expected {}",
                column.name,
                column.values.len(),
                self.n_rows()
            )));
        }
        self.columns.push(column);
        Ok(())
    }

    /// New table holding the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureTable {
        let pick = |v: &[f64]| rows.iter().map(|&r| v[r]).collect::<Vec<_>>();
        FeatureTable {
            ids: rows.iter().map(|&r| self.ids[r].clone()).collect(),
            columns: self
                .columns
                .iter()
                .map(|c| Column {
                    name: c.name.clone(),
                    values: pick(&c.values),
                    indicator: c.indicator.clone(),
                })
                .collect(),
            outcome: self.outcome.as_ref().map(|(n, v)| (n.clone(), pick(v))),
        }
    }

    /// New table keeping only the named columns (in the given order).
    pub fn select_columns(&self, names: &[String]) -> Result<FeatureTable> {
        let idx = self.resolve(names)?;
        Ok(FeatureTable {
            ids: self.ids.clone(),
            columns: idx.iter().map(|&i| self.columns[i].clone()).collect(),
            outcome: self.outcome.clone(),
        })
    }

    /// Drop the named columns; unknown names are ignored.
    pub fn without_columns(&self, names: &[&str]) -> FeatureTable {
        FeatureTable {
            ids: self.ids.clone(),
            columns: self
                .columns
                .iter()
                .filter(|c| !names.contains(&c.name.as_str()))
                .cloned()
                .collect(),
            outcome: self.outcome.clone(),
        }
    }

    /// Permutation units. One-hot blocks form a single unit unless
    /// `per_indicator` is set; units appear in first-column order.
    pub fn feature_units(&self, per_indicator: bool) -> Vec<FeatureUnit> {
        let mut units: Vec<FeatureUnit> = Vec::new();
        let mut group_pos: BTreeMap<&str, usize> = BTreeMap::new();
        for (i, c) in self.columns.iter().enumerate() {
            match (&c.indicator, per_indicator) {
                (Some(ind), false) => {
                    if let Some(&u) = group_pos.get(ind.group.as_str()) {
                        units[u].columns.push(i);
                    } else {
                        group_pos.insert(&ind.group, units.len());
                        units.push(FeatureUnit {
                            name: ind.group.clone(),
                            columns: vec![i],
                        });
                    }
                }
                _ => units.push(FeatureUnit {
                    name: c.name.clone(),
                    columns: vec![i],
                }),
            }
        }
        units
    }

    /// Write as CSV: `id,<features...>[,<outcome>]`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        let mut header = vec!["id".to_string()];
        header.extend(self.names());
        if let Some((name, _)) = &self.outcome {
            header.push(name.clone());
        }
        wr.write_record(&header)?;
        let mut rec: Vec<String> = Vec::with_capacity(header.len());
        for i in 0..self.n_rows() {
            rec.clear();
            rec.push(self.ids[i].clone());
            rec.extend(self.columns.iter().map(|c| fmt_f64(c.values[i])));
            if let Some((_, y)) = &self.outcome {
                rec.push(fmt_f64(y[i]));
            }
            wr.write_record(&rec)?;
        }
        wr.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    /// Read a table written by [`FeatureTable::write_csv`] (or any CSV with an
    /// `id` column followed by numeric columns). Columns named `group[level]`
    /// are restored as indicators. `outcome` names the outcome column, if any.
    pub fn read_csv<R: Read>(r: R, outcome: Option<&str>) -> Result<FeatureTable> {
        let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
        let id_col = header.iter().position(|h| h == "id");
        let out_col = match outcome {
            Some(o) => Some(
                header
                    .iter()
                    .position(|h| h == o)
                    .ok_or_else(|| Error::input(format!("outcome column '{o}' not found")))?,
            ),
            None => None,
        };
        let feat_cols: Vec<usize> = (0..header.len())
            .filter(|&j| Some(j) != id_col && Some(j) != out_col)
            .collect();
        let mut ids = Vec::new();
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); feat_cols.len()];
        let mut y = Vec::new();
        for (row, rec) in rd.records().enumerate() {
            let rec = rec?;
            let line = row + 2;
            ids.push(match id_col {
                Some(j) => rec.get(j).unwrap_or_default().to_string(),
                None => row.to_string(),
            });
            for (k, &j) in feat_cols.iter().enumerate() {
                cols[k].push(parse_f64(rec.get(j).unwrap_or_default(), &header[j], line)?);
            }
            if let Some(j) = out_col {
                y.push(parse_f64(rec.get(j).unwrap_or_default(), &header[j], line)?);
            }
        }
        let columns = feat_cols
            .iter()
            .zip(cols)
            .map(|(&j, values)| Column {
                name: header[j].clone(),
                indicator: Indicator::parse(&header[j]),
                values,
            })
            .collect();
        let table = FeatureTable::new(ids, columns)?;
        match outcome {
            Some(o) => table.with_outcome(o, y),
            None => Ok(table),
        }
    }
}

/// Shortest representation that parses back to the identical double.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub(crate) fn parse_f64(s: &str, column: &str, line: usize) -> Result<f64> {
    let v: f64 = s.trim().parse().map_err(|_| {
        Error::input(format!("line {line}: column '{column}': malformed number '{s}'"))
    })?;
    if !v.is_finite() {
        return Err(Error::input(format!(
            "line {line}: column '{column}': non-finite value '{s}'"
        )));
    }
    Ok(v)
}
