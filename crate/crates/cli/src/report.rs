//! Report rendering: a self-describing text document or plain TSV.

use std::fmt::Write as _;

use clap::ValueEnum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// Commented key/value header followed by an aligned table.
    Structured,
    /// Tab-separated columns with a single header row.
    Tabular,
}

pub struct Report {
    title: String,
    meta: Vec<(String, String)>,
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
    footer: Vec<String>,
}

impl Report {
    pub fn new(title: &str, columns: &[&str]) -> Self {
        Report {
            title: title.to_string(),
            meta: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            footer: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.meta.push((key.to_string(), value.to_string()));
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }

    pub fn footer(&mut self, line: impl Into<String>) {
        self.footer.push(line.into());
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Tabular => {
                let mut out = self.columns.join("\t");
                out.push('\n');
                for row in &self.rows {
                    out.push_str(&row.join("\t"));
                    out.push('\n');
                }
                out
            }
            Format::Structured => {
                let mut out = format!("# {}\n", self.title);
                for (k, v) in &self.meta {
                    let _ = writeln!(out, "{k} {v}");
                }
                let widths: Vec<usize> = (0..self.columns.len())
                    .map(|c| {
                        self.rows
                            .iter()
                            .map(|r| r[c].len())
                            .chain(std::iter::once(self.columns[c].len()))
                            .max()
                            .unwrap_or(0)
                    })
                    .collect();
                let line = |cells: &[String]| {
                    let padded: Vec<String> = cells
                        .iter()
                        .zip(&widths)
                        .map(|(c, w)| format!("{c:>w$}"))
                        .collect();
                    padded.join("  ").trim_end().to_string()
                };
                out.push('\n');
                let _ = writeln!(out, "{}", line(&self.columns));
                for row in &self.rows {
                    let _ = writeln!(out, "{}", line(row));
                }
                if !self.footer.is_empty() {
                    out.push('\n');
                    for f in &self.footer {
                        let _ = writeln!(out, "{f}");
                    }
                }
                out
            }
        }
    }
}
