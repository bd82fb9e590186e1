use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::CausalError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "values")]
pub enum Column {
    Continuous(Vec<f64>),
    Discrete(Vec<i64>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Continuous(v) => v.len(),
            Column::Discrete(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, Column::Discrete(_))
    }

    /// Values as reals (discrete codes are converted).
    pub fn as_f64(&self) -> Vec<f64> {
        match self {
            Column::Continuous(v) => v.clone(),
            Column::Discrete(v) => v.iter().map(|&x| x as f64).collect(),
        }
    }
}

/// Named columns of equal length, each continuous or discrete.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedDataset {
    names: Vec<String>,
    columns: Vec<Column>,
}

impl MixedDataset {
    pub fn new(names: Vec<String>, columns: Vec<Column>) -> Result<Self, CausalError> {
        if names.len() != columns.len() {
            return Err(CausalError::Validation("one name per column required".into()));
        }
        if names.is_empty() {
            return Err(CausalError::Validation("no columns".into()));
        }
        if names.iter().collect::<BTreeSet<_>>().len() != names.len() {
            return Err(CausalError::Validation("duplicate column names".into()));
        }
        let n = columns[0].len();
        if n == 0 || columns.iter().any(|c| c.len() != n) {
            return Err(CausalError::Validation("columns must be non-empty and of equal length".into()));
        }
        for (name, col) in names.iter().zip(&columns) {
            match col {
                Column::Continuous(v) => {
                    if v.iter().any(|x| !x.is_finite()) {
                        return Err(CausalError::Validation(format!("{name}: non-finite value")));
                    }
                    let m = v.iter().sum::<f64>() / n as f64;
                    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64;
                    if !(var > 0.0) {
                        return Err(CausalError::Validation(format!("{name}: zero variance")));
                    }
                }
                Column::Discrete(v) => {
                    if v.iter().collect::<BTreeSet<_>>().len() < 2 {
                        return Err(CausalError::Validation(format!("{name}: fewer than 2 categories")));
                    }
                }
            }
        }
        Ok(Self { names, columns })
    }

    pub fn n(&self) -> usize {
        self.columns[0].len()
    }

    pub fn p(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn index_of(&self, name: &str) -> Result<usize, CausalError> {
        self.names.iter().position(|n| n == name).ok_or_else(|| CausalError::Name(name.to_string()))
    }

    pub fn column(&self, name: &str) -> Result<&Column, CausalError> {
        Ok(&self.columns[self.index_of(name)?])
    }

    /// Subset of columns in the given order.
    pub fn select(&self, names: &[&str]) -> Result<Self, CausalError> {
        let mut out_names = Vec::with_capacity(names.len());
        let mut cols = Vec::with_capacity(names.len());
        for &name in names {
            cols.push(self.column(name)?.clone());
            out_names.push(name.to_string());
        }
        Self::new(out_names, cols)
    }

    /// CSV with a header row; discrete values written as integers.
    pub fn to_csv(&self) -> String {
        let mut out = self.names.join(",");
        out.push('\n');
        for i in 0..self.n() {
            let row: Vec<String> = self
                .columns
                .iter()
                .map(|c| match c {
                    Column::Continuous(v) => v[i].to_string(),
                    Column::Discrete(v) => v[i].to_string(),
                })
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Parse CSV written by [`MixedDataset::to_csv`]. Columns named in
    /// `discrete` are read as integers, the rest as reals.
    pub fn from_csv(text: &str, discrete: &[&str]) -> Result<Self, CausalError> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let headers: Vec<String> =
            reader.headers().map_err(|e| CausalError::Validation(e.to_string()))?.iter().map(str::to_string).collect();
        let mut raw: Vec<Vec<String>> = vec![Vec::new(); headers.len()];
        for (line, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| CausalError::Validation(e.to_string()))?;
            if rec.len() != headers.len() {
                return Err(CausalError::Validation(format!("row {}: wrong field count", line + 2)));
            }
            for (j, field) in rec.iter().enumerate() {
                raw[j].push(field.to_string());
            }
        }
        let mut columns = Vec::with_capacity(headers.len());
        for (name, values) in headers.iter().zip(raw) {
            let col = if discrete.contains(&name.as_str()) {
                Column::Discrete(
                    values
                        .iter()
                        .map(|v| {
                            v.parse::<i64>().map_err(|_| CausalError::Validation(format!("{name}: bad integer {v:?}")))
                        })
                        .collect::<Result<_, _>>()?,
                )
            } else {
                Column::Continuous(
                    values
                        .iter()
                        .map(|v| {
                            v.parse::<f64>().map_err(|_| CausalError::Validation(format!("{name}: bad number {v:?}")))
                        })
                        .collect::<Result<_, _>>()?,
                )
            };
            columns.push(col);
        }
        Self::new(headers, columns)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let d = MixedDataset::new(
            vec!["a".into(), "sq".into()],
            vec![Column::Continuous(vec![0.1, -2.5, 3.0]), Column::Discrete(vec![0, 1, 1])],
        )
        .unwrap();
        assert_eq!(MixedDataset::from_csv(&d.to_csv(), &["sq"]).unwrap(), d);
    }

    #[test]
    fn rejects_single_category() {
        let err = MixedDataset::new(vec!["sq".into()], vec![Column::Discrete(vec![1, 1, 1])]).unwrap_err();
        assert!(matches!(err, CausalError::Validation(_)));
    }
}
