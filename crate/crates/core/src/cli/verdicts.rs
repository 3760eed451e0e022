//! Verdict CSV: one row per initial condition of an analysis run.

use std::path::Path;

use crate::cells::Architecture;
use crate::error::{Error, Result};
use crate::orbit::{MapMode, OrbitVerdict};

pub const NONPERIODIC: &str = "NONPERIODIC";

const HEADER: [&str; 9] = [
    "condition",
    "period",
    "detect_step",
    "verified_repetitions",
    "steps_examined",
    "architecture",
    "mode",
    "epoch",
    "cycle",
];

#[derive(Debug, Clone, PartialEq)]
pub struct VerdictRow {
    pub condition: String,
    pub verdict: OrbitVerdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerdictFile {
    pub architecture: Architecture,
    pub mode: MapMode,
    pub epoch: usize,
    pub rows: Vec<VerdictRow>,
}

impl VerdictFile {
    pub fn verdicts(&self) -> Vec<OrbitVerdict> {
        self.rows.iter().map(|r| r.verdict.clone()).collect()
    }

    pub fn render(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(HEADER)?;
        for r in &self.rows {
            let (period, detect, reps, steps, cycle) = match &r.verdict {
                OrbitVerdict::Periodic {
                    period,
                    cycle,
                    detect_step,
                    verified_repetitions,
                } => (
                    period.to_string(),
                    detect_step.to_string(),
                    verified_repetitions.to_string(),
                    String::new(),
                    cycle.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" "),
                ),
                OrbitVerdict::NonPeriodic { steps_examined } => (
                    NONPERIODIC.to_string(),
                    String::new(),
                    "0".to_string(),
                    steps_examined.to_string(),
                    String::new(),
                ),
            };
            w.write_record([
                r.condition.as_str(),
                &period,
                &detect,
                &reps,
                &steps,
                self.architecture.as_str(),
                self.mode.as_str(),
                &self.epoch.to_string(),
                &cycle,
            ])?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::format("csv", e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |d: String| Error::format("verdict file", d);
        let num = |s: &str| -> Result<usize> { s.parse().map_err(|_| bad(format!("bad integer `{s}`"))) };
        let mut r = csv::Reader::from_reader(text.as_bytes());
        if r.headers()?.iter().ne(HEADER) {
            return Err(bad("unexpected header".into()));
        }
        let mut rows = Vec::new();
        let mut meta: Option<(Architecture, MapMode, usize)> = None;
        for rec in r.records() {
            let rec = rec?;
            let f = |i: usize| rec.get(i).unwrap_or("");
            let this: (Architecture, MapMode, usize) = (f(5).parse()?, f(6).parse()?, num(f(7))?);
            match meta {
                None => meta = Some(this),
                Some(m) if m != this => return Err(bad("rows disagree on architecture, mode or epoch".into())),
                _ => {}
            }
            let verdict = if f(1) == NONPERIODIC {
                OrbitVerdict::NonPeriodic {
                    steps_examined: num(f(4))?,
                }
            } else {
                let period = num(f(1))?;
                let cycle = f(8).split_whitespace().map(num).collect::<Result<Vec<_>>>()?;
                if period == 0 || cycle.len() != period {
                    return Err(bad(format!("period {period} with a cycle of {} tokens", cycle.len())));
                }
                OrbitVerdict::Periodic {
                    period,
                    cycle,
                    detect_step: num(f(2))?,
                    verified_repetitions: num(f(3))?,
                }
            };
            rows.push(VerdictRow {
                condition: f(0).to_string(),
                verdict,
            });
        }
        let (architecture, mode, epoch) = meta.ok_or_else(|| bad("no verdict rows".into()))?;
        Ok(Self {
            architecture,
            mode,
            epoch,
            rows,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Format { what, detail } => Error::Format {
                what,
                detail: format!("{}: {detail}", path.display()),
            },
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let f = VerdictFile {
            architecture: Architecture::Lstm,
            mode: MapMode::WithInput,
            epoch: 20,
            rows: vec![
                VerdictRow {
                    condition: "word:0".into(),
                    verdict: OrbitVerdict::Periodic {
                        period: 3,
                        cycle: vec![4, 1, 9],
                        detect_step: 120,
                        verified_repetitions: 13,
                    },
                },
                VerdictRow {
                    condition: "word:1".into(),
                    verdict: OrbitVerdict::NonPeriodic { steps_examined: 2000 },
                },
            ],
        };
        let text = f.render().unwrap();
        assert!(text.lines().nth(2).unwrap().starts_with("word:1,NONPERIODIC,"));
        assert_eq!(VerdictFile::parse(&text).unwrap(), f);
    }

    #[test]
    fn malformed_files() {
        assert!(VerdictFile::parse("").is_err());
        let header = HEADER.join(",");
        assert!(VerdictFile::parse(&format!("{header}\n")).is_err());
        let row = "word:0,2,0,10,,lstm,with-input,0,5";
        assert!(VerdictFile::parse(&format!("{header}\n{row}\n")).is_err());
        let a = "word:0,1,0,10,,lstm,with-input,0,5";
        let b = "word:1,1,0,10,,lstm,with-input,10,5";
        assert!(VerdictFile::parse(&format!("{header}\n{a}\n{b}\n")).is_err());
    }
}
