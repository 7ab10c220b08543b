//! Minimal tab-separated tables with a header row. No quoting: fields may not
//! contain tabs or newlines.

use std::collections::HashMap;

use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum TsvError {
    #[error("empty table: header row missing")]
    MissingHeader,
    #[error("header lacks column `{0}`")]
    MissingColumn(String),
    #[error("line {line}: expected {expected} fields, found {found}")]
    FieldCount {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: column `{column}`: {message}")]
    BadValue {
        line: usize,
        column: String,
        message: String,
    },
}

pub struct Table<'a> {
    columns: HashMap<&'a str, usize>,
    width: usize,
    rows: Vec<(usize, Vec<&'a str>)>,
}

pub struct Row<'t, 'a> {
    table: &'t Table<'a>,
    pub line: usize,
    fields: &'t [&'a str],
}

impl<'a> Table<'a> {
    /// Parses `text`, requiring each of `required` to appear in the header.
    /// Blank lines are skipped; a trailing `\r` is tolerated.
    pub fn parse(text: &'a str, required: &[&str]) -> Result<Self, TsvError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(TsvError::MissingHeader)?;
        let names: Vec<&str> = header.split('\t').map(str::trim).collect();
        let columns: HashMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (*n, i)).collect();
        for r in required {
            if !columns.contains_key(r) {
                return Err(TsvError::MissingColumn(r.to_string()));
            }
        }
        let width = names.len();
        let mut rows = Vec::new();
        for (line, l) in lines {
            let fields: Vec<&str> = l.split('\t').collect();
            if fields.len() != width {
                return Err(TsvError::FieldCount {
                    line,
                    expected: width,
                    found: fields.len(),
                });
            }
            rows.push((line, fields));
        }
        Ok(Table {
            columns,
            width,
            rows,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn rows(&self) -> impl Iterator<Item = Row<'_, 'a>> {
        self.rows.iter().map(move |(line, fields)| Row {
            table: self,
            line: *line,
            fields,
        })
    }
}

impl<'t, 'a> Row<'t, 'a> {
    /// Field by column name. Panics if the column was not `required` at parse time
    /// and is absent from the header.
    pub fn get(&self, column: &str) -> &'a str {
        self.fields[self.table.columns[column]]
    }

    pub fn parse<T: std::str::FromStr>(&self, column: &str) -> Result<T, TsvError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(column).trim().parse().map_err(|e: T::Err| TsvError::BadValue {
            line: self.line,
            column: column.to_string(),
            message: e.to_string(),
        })
    }

    pub fn bad(&self, column: &str, message: impl Into<String>) -> TsvError {
        TsvError::BadValue {
            line: self.line,
            column: column.to_string(),
            message: message.into(),
        }
    }
}
