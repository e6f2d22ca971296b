use std::fs;
use std::path::Path;

use thermoform::Result;

/// CSV cell text; floats use the shortest round-trip form.
pub trait Cell {
    fn cell(&self) -> String;
}

impl Cell for f64 {
    fn cell(&self) -> String {
        format!("{self:?}")
    }
}

macro_rules! display_cell {
    ($($t:ty),*) => {
        $(impl Cell for $t {
            fn cell(&self) -> String {
                self.to_string()
            }
        })*
    };
}

display_cell!(usize, u64, bool, str, String);

impl<T: Cell + ?Sized> Cell for &T {
    fn cell(&self) -> String {
        (**self).cell()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    /// The check's precondition failed; reported for information only.
    NotApplicable,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::NotApplicable => "not-applicable",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub parameters: String,
    pub value: f64,
    pub threshold: f64,
    pub se: Option<f64>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone)]
pub struct Table {
    pub file: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(file: &str, header: &[&str]) -> Self {
        Self {
            file: file.into(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// Outcome of one subcommand: scalars, checks with thresholds, and extra tables.
#[derive(Debug, Clone)]
pub struct Record {
    pub subcommand: String,
    pub digest: String,
    pub scalars: Vec<(String, String)>,
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
    pub wall_time: Option<f64>,
}

impl Record {
    pub fn new(subcommand: &str, digest: String) -> Self {
        Self {
            subcommand: subcommand.into(),
            digest,
            scalars: Vec::new(),
            checks: Vec::new(),
            tables: Vec::new(),
            wall_time: None,
        }
    }

    pub fn scalar(&mut self, name: &str, value: impl Cell) {
        self.scalars.push((name.into(), value.cell()));
    }

    /// Passes iff `value ≤ threshold`.
    pub fn at_most(&mut self, name: &str, parameters: &str, value: f64, threshold: f64) {
        let verdict = if value <= threshold { Verdict::Pass } else { Verdict::Fail };
        self.push_check(name, parameters, value, threshold, None, verdict);
    }

    /// Passes iff `value ≥ threshold`.
    pub fn at_least(&mut self, name: &str, parameters: &str, value: f64, threshold: f64, se: Option<f64>) {
        let verdict = if value >= threshold { Verdict::Pass } else { Verdict::Fail };
        self.push_check(name, parameters, value, threshold, se, verdict);
    }

    pub fn push_check(
        &mut self,
        name: &str,
        parameters: &str,
        value: f64,
        threshold: f64,
        se: Option<f64>,
        verdict: Verdict,
    ) {
        self.checks.push(Check {
            name: name.into(),
            parameters: parameters.into(),
            value,
            threshold,
            se,
            verdict,
        });
    }

    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| c.verdict == Verdict::Fail).count()
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join("checks.csv"))?;
        w.write_record(["check", "parameters", "value", "threshold", "se", "verdict"])?;
        for c in &self.checks {
            w.write_record([
                c.name.clone(),
                c.parameters.clone(),
                c.value.cell(),
                c.threshold.cell(),
                c.se.map(|s| s.cell()).unwrap_or_default(),
                c.verdict.as_str().to_string(),
            ])?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join("scalars.csv"))?;
        w.write_record(["name", "value"])?;
        w.write_record(["subcommand", &self.subcommand])?;
        w.write_record(["config_digest", &self.digest])?;
        for (k, v) in &self.scalars {
            w.write_record([k, v])?;
        }
        if let Some(t) = self.wall_time {
            w.write_record(["wall_time_s", &format!("{t:.3}")])?;
        }
        w.flush()?;

        for table in &self.tables {
            let mut w = csv::Writer::from_path(dir.join(&table.file))?;
            w.write_record(&table.header)?;
            for row in &table.rows {
                w.write_record(row)?;
            }
            w.flush()?;
        }
        Ok(())
    }

    pub fn summary(&self) -> String {
        let na = self.checks.iter().filter(|c| c.verdict == Verdict::NotApplicable).count();
        let mut line = format!(
            "{}: {} checks, {} failed",
            self.subcommand,
            self.checks.len(),
            self.failures()
        );
        if na > 0 {
            line.push_str(&format!(", {na} not applicable"));
        }
        line.push_str(&format!(" [config {}]", &self.digest[..12]));
        line
    }
}
