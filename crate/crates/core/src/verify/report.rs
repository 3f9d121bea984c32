use std::fmt::Write;

/// One pass/fail line of a verification report.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub bound: f64,
    pub detail: String,
}

impl CheckLine {
    pub fn new(name: impl Into<String>, pass: bool, value: f64, bound: f64, detail: impl Into<String>) -> Self {
        Self { name: name.into(), pass, value, bound, detail: detail.into() }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CheckSuite {
    pub lines: Vec<CheckLine>,
}

impl CheckSuite {
    pub fn extend(&mut self, lines: impl IntoIterator<Item = CheckLine>) {
        self.lines.extend(lines);
    }

    pub fn pass(&self) -> bool {
        self.lines.iter().all(|l| l.pass)
    }

    pub fn to_text(&self) -> String {
        let width = self.lines.iter().map(|l| l.name.len()).max().unwrap_or(0);
        let mut out = String::new();
        for l in &self.lines {
            let status = if l.pass { "PASS" } else { "FAIL" };
            let _ = writeln!(
                out,
                "{status}  {:<width$}  value={:.12e}  bound={:.12e}  {}",
                l.name, l.value, l.bound, l.detail
            );
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("check,pass,value,bound,detail\n");
        for l in &self.lines {
            let _ = writeln!(
                out,
                "{},{},{:.12e},{:.12e},\"{}\"",
                l.name,
                l.pass,
                l.value,
                l.bound,
                l.detail.replace('"', "'")
            );
        }
        out
    }
}
