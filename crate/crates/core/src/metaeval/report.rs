use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use super::agreement::AgreementRow;
use super::correlate::{CorrelationCell, CorrelationReport, Grouping};
use super::Criterion;
use crate::error::Error;
use crate::textnorm::LangCode;

const KEY_COLUMNS: [&str; 4] = ["lang", "metric", "criterion", "grouping"];

/// Fixed four-decimal rendering; NaN prints as `NA` and negative zero as
/// zero.
pub fn format_value(v: f64) -> String {
    if v.is_nan() {
        return "NA".to_string();
    }
    let s = format!("{v:.4}");
    if s == "-0.0000" {
        "0.0000".to_string()
    } else {
        s
    }
}

/// Which correlation statistic a column or table shows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Statistic {
    Pearson,
    Spearman,
}

impl Statistic {
    pub const ALL: [Statistic; 2] = [Statistic::Pearson, Statistic::Spearman];

    /// Column name in the long report.
    pub fn column(self) -> &'static str {
        match self {
            Statistic::Pearson => "r",
            Statistic::Spearman => "rho",
        }
    }

    fn pick(self, cell: &CorrelationCell) -> f64 {
        match self {
            Statistic::Pearson => cell.r,
            Statistic::Spearman => cell.rho,
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Statistic::Pearson => "pearson",
            Statistic::Spearman => "spearman",
        })
    }
}

impl FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pearson" | "r" => Ok(Statistic::Pearson),
            "spearman" | "rho" => Ok(Statistic::Spearman),
            _ => Err(Error::invalid(format!("unknown statistic {s:?}"))),
        }
    }
}

/// One row per (lang, metric, criterion, grouping), with a column per
/// requested statistic (`r`, `rho`) followed by `n`.
pub fn write_long_tsv<W: Write>(mut w: W, report: &CorrelationReport, stats: &[Statistic]) -> io::Result<()> {
    let mut header: Vec<&str> = KEY_COLUMNS.to_vec();
    header.extend(stats.iter().map(|s| s.column()));
    header.push("n");
    writeln!(w, "{}", header.join("\t"))?;
    for c in &report.cells {
        write!(w, "{}\t{}\t{}\t{}", c.lang, c.metric, c.criterion, c.grouping)?;
        for s in stats {
            write!(w, "\t{}", format_value(s.pick(c)))?;
        }
        writeln!(w, "\t{}", c.n)?;
    }
    Ok(())
}

fn parse_value(s: &str) -> Result<f64, String> {
    if s == "NA" {
        return Ok(f64::NAN);
    }
    s.parse().map_err(|_| format!("bad number {s:?}"))
}

/// Parses the output of [`write_long_tsv`]. Lines starting with `#` are
/// ignored and the first remaining line is the header. A statistic without
/// a column reads as NaN.
pub fn parse_long_tsv(text: &str) -> Result<CorrelationReport, Error> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.starts_with('#') && !l.trim().is_empty());
    let Some((_, header)) = lines.next() else {
        return Ok(CorrelationReport::default());
    };
    let columns: Vec<&str> = header.split('\t').collect();
    let find = |name: &str| columns.iter().position(|c| *c == name);
    let mut key = [0; 4];
    for (slot, name) in key.iter_mut().zip(KEY_COLUMNS) {
        *slot = find(name).ok_or_else(|| Error::invalid(format!("report header lacks a {name:?} column")))?;
    }
    let n_col = find("n").ok_or_else(|| Error::invalid("report header lacks an \"n\" column"))?;
    let (r_col, rho_col) = (find("r"), find("rho"));

    let mut cells = Vec::new();
    for (i, line) in lines {
        let fail = |msg: String| Error::invalid(format!("report line {}: {msg}", i + 1));
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != columns.len() {
            return Err(fail(format!("expected {} columns, got {}", columns.len(), f.len())));
        }
        let stat = |col: Option<usize>| col.map_or(Ok(f64::NAN), |c| parse_value(f[c]));
        cells.push(CorrelationCell {
            lang: LangCode::from(f[key[0]]),
            metric: f[key[1]].to_string(),
            criterion: f[key[2]].parse().map_err(|e: Error| fail(e.to_string()))?,
            grouping: f[key[3]].parse().map_err(|e: Error| fail(e.to_string()))?,
            r: stat(r_col).map_err(fail)?,
            rho: stat(rho_col).map_err(fail)?,
            n: f[n_col].parse().map_err(|_| fail(format!("bad count {:?}", f[n_col])))?,
        });
    }
    Ok(CorrelationReport { cells })
}

/// Table-shaped report: one row per metric, then focus and coverage column
/// groups over the languages, each followed by an `avg` column.
pub fn write_table_tsv<W: Write>(
    mut w: W,
    report: &CorrelationReport,
    grouping: Grouping,
    statistic: Statistic,
) -> io::Result<()> {
    let langs = report.langs();
    let mut header = vec!["metric".to_string()];
    for criterion in Criterion::ALL {
        header.extend(langs.iter().map(|l| format!("{criterion}_{l}")));
        header.push(format!("{criterion}_avg"));
    }
    writeln!(w, "{}", header.join("\t"))?;
    for metric in report.metrics() {
        let mut line = vec![metric.to_string()];
        for criterion in Criterion::ALL {
            let mut defined = Vec::new();
            for lang in &langs {
                let v = report.get(lang, metric, criterion, grouping).map_or(f64::NAN, |c| statistic.pick(c));
                if !v.is_nan() {
                    defined.push(v);
                }
                line.push(format_value(v));
            }
            let avg = if defined.is_empty() {
                f64::NAN
            } else {
                defined.iter().sum::<f64>() / defined.len() as f64
            };
            line.push(format_value(avg));
        }
        writeln!(w, "{}", line.join("\t"))?;
    }
    Ok(())
}

/// Annotation summary: quality, agreement per criterion, focus-coverage r.
pub fn write_agreement_tsv<W: Write>(mut w: W, rows: &[AgreementRow]) -> io::Result<()> {
    writeln!(w, "lang\tquality\tagreement_focus\tagreement_coverage\tfocus_coverage\tcells_focus\tcells_coverage")?;
    for row in rows {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            row.lang,
            format_value(row.quality),
            format_value(row.focus.r),
            format_value(row.coverage.r),
            format_value(row.focus_coverage.r),
            row.focus.cells,
            row.coverage.cells
        )?;
    }
    Ok(())
}
