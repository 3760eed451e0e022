//! Period statistics, CSV tables and orbit plots.

mod plot;

use std::collections::{BTreeMap, BTreeSet};

use crate::cells::Architecture;
use crate::error::{Error, Result};
use crate::orbit::{MapMode, OrbitVerdict};

pub use plot::{orbit_plot_points, render_orbit_plot, PLOT_MARGIN, PLOT_SIZE};

pub const METRIC_AVERAGE: &str = "average period";
pub const METRIC_NON_PERIODIC: &str = "non-periodic %";

/// Aggregate over all trajectories of one (checkpoint, mode) run.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodStats {
    pub epoch: usize,
    pub architecture: Architecture,
    pub mode: MapMode,
    pub count: usize,
    /// Mean period over periodic trajectories only; `None` if there are none.
    pub average_period: Option<f64>,
    pub percent_non_periodic: f64,
    /// Trajectory count per period. Together with `non_periodic` it sums to `count`.
    pub histogram: BTreeMap<usize, usize>,
    pub non_periodic: usize,
}

impl PeriodStats {
    pub fn periodic(&self) -> usize {
        self.count - self.non_periodic
    }

    pub fn percent_with_period(&self, pred: impl Fn(usize) -> bool) -> f64 {
        let n: usize = self.histogram.iter().filter(|(k, _)| pred(**k)).map(|(_, c)| c).sum();
        100.0 * n as f64 / self.count as f64
    }
}

pub fn aggregate(
    epoch: usize,
    architecture: Architecture,
    mode: MapMode,
    verdicts: &[OrbitVerdict],
) -> Result<PeriodStats> {
    if verdicts.is_empty() {
        return Err(Error::param("cannot aggregate an empty verdict list"));
    }
    let mut histogram = BTreeMap::new();
    let mut non_periodic = 0;
    for v in verdicts {
        match v.period() {
            Some(k) => *histogram.entry(k).or_insert(0) += 1,
            None => non_periodic += 1,
        }
    }
    let periodic = verdicts.len() - non_periodic;
    // integer sum keeps the mean independent of verdict order
    let total: u128 = histogram.iter().map(|(&k, &c)| (k * c) as u128).sum();
    let average_period = (periodic > 0).then(|| total as f64 / periodic as f64);
    Ok(PeriodStats {
        epoch,
        architecture,
        mode,
        count: verdicts.len(),
        average_period,
        percent_non_periodic: 100.0 * non_periodic as f64 / verdicts.len() as f64,
        histogram,
        non_periodic,
    })
}

fn round_half_up(x: f64) -> i64 {
    (x + 0.5).floor() as i64
}

fn check_one_mode(stats: &[PeriodStats]) -> Result<MapMode> {
    let first = stats
        .first()
        .ok_or_else(|| Error::param("no statistics to tabulate"))?;
    if stats.iter().any(|s| s.mode != first.mode) {
        return Err(Error::param("statistics mix with-input and without-input runs"));
    }
    Ok(first.mode)
}

/// Table of average period and non-periodic percentage: one row per
/// (architecture, metric), one column per epoch.
pub fn render_table(stats: &[PeriodStats]) -> Result<String> {
    check_one_mode(stats)?;
    let epochs: BTreeSet<usize> = stats.iter().map(|s| s.epoch).collect();
    let mut cells: BTreeMap<(Architecture, usize), &PeriodStats> = BTreeMap::new();
    for s in stats {
        if cells.insert((s.architecture, s.epoch), s).is_some() {
            return Err(Error::param(format!(
                "duplicate statistics for {} at epoch {}",
                s.architecture, s.epoch
            )));
        }
    }
    let archs: BTreeSet<Architecture> = stats.iter().map(|s| s.architecture).collect();

    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["architecture".to_string(), "metric".to_string()];
    header.extend(epochs.iter().map(|e| format!("epoch {e}")));
    w.write_record(&header)?;
    for arch in &archs {
        for metric in [METRIC_AVERAGE, METRIC_NON_PERIODIC] {
            let mut row = vec![arch.as_str().to_string(), metric.to_string()];
            for e in &epochs {
                let cell = match cells.get(&(*arch, *e)) {
                    None => String::new(),
                    Some(s) if metric == METRIC_AVERAGE => {
                        s.average_period.map(|a| round_half_up(a).to_string()).unwrap_or_default()
                    }
                    Some(s) => format!("{:.1}", s.percent_non_periodic),
                };
                row.push(cell);
            }
            w.write_record(&row)?;
        }
    }
    finish(w)
}

/// One parsed cell of a rendered table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableCell {
    pub architecture: Architecture,
    pub metric: String,
    pub epoch: usize,
    pub value: Option<f64>,
}

pub fn parse_table(text: &str) -> Result<Vec<TableCell>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers()?.clone();
    let epochs = header
        .iter()
        .skip(2)
        .map(|h| {
            h.strip_prefix("epoch ")
                .and_then(|e| e.parse().ok())
                .ok_or_else(|| Error::format("period table", format!("bad column `{h}`")))
        })
        .collect::<Result<Vec<usize>>>()?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let architecture: Architecture = rec.get(0).unwrap_or("").parse()?;
        let metric = rec.get(1).unwrap_or("").to_string();
        for (i, &epoch) in epochs.iter().enumerate() {
            let raw = rec.get(i + 2).unwrap_or("");
            let value = if raw.is_empty() {
                None
            } else {
                Some(raw.parse().map_err(|_| Error::format("period table", format!("bad cell `{raw}`")))?)
            };
            out.push(TableCell {
                architecture,
                metric: metric.clone(),
                epoch,
                value,
            });
        }
    }
    Ok(out)
}

/// Sink census: rows "1", ">1" and "non-periodic", one column per
/// (architecture, epoch), values are percentages of trajectories.
pub fn render_sink_table(stats: &[PeriodStats]) -> Result<String> {
    check_one_mode(stats)?;
    let mut sorted: Vec<&PeriodStats> = stats.iter().collect();
    sorted.sort_by_key(|s| (s.architecture, s.epoch));
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["period".to_string()];
    header.extend(sorted.iter().map(|s| format!("{} epoch {}", s.architecture, s.epoch)));
    w.write_record(&header)?;
    let rows: [(&str, Box<dyn Fn(&PeriodStats) -> f64>); 3] = [
        ("1", Box::new(|s| s.percent_with_period(|k| k == 1))),
        (">1", Box::new(|s| s.percent_with_period(|k| k > 1))),
        ("non-periodic", Box::new(|s| s.percent_non_periodic)),
    ];
    for (label, f) in rows.iter() {
        let mut row = vec![label.to_string()];
        row.extend(sorted.iter().map(|s| format!("{:.1}", f(s))));
        w.write_record(&row)?;
    }
    finish(w)
}

const STATS_HEADER: [&str; 8] = [
    "epoch",
    "architecture",
    "mode",
    "count",
    "average_period",
    "percent_non_periodic",
    "non_periodic",
    "histogram",
];

/// Full-precision companion to [`render_table`]; round-trips through
/// [`parse_stats`].
pub fn render_stats(stats: &[PeriodStats]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(STATS_HEADER)?;
    for s in stats {
        let hist: Vec<String> = s.histogram.iter().map(|(k, c)| format!("{k}:{c}")).collect();
        w.write_record([
            s.epoch.to_string(),
            s.architecture.as_str().to_string(),
            s.mode.as_str().to_string(),
            s.count.to_string(),
            s.average_period.map(|a| format!("{a:?}")).unwrap_or_default(),
            format!("{:?}", s.percent_non_periodic),
            s.non_periodic.to_string(),
            hist.join(" "),
        ])?;
    }
    finish(w)
}

pub fn parse_stats(text: &str) -> Result<Vec<PeriodStats>> {
    let bad = |d: String| Error::format("period statistics", d);
    let num = |s: &str| -> Result<usize> { s.parse().map_err(|_| bad(format!("bad integer `{s}`"))) };
    let float = |s: &str| -> Result<f64> { s.parse().map_err(|_| bad(format!("bad number `{s}`"))) };
    let mut r = csv::Reader::from_reader(text.as_bytes());
    if r.headers()?.iter().ne(STATS_HEADER) {
        return Err(bad("unexpected header".into()));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let f = |i: usize| rec.get(i).unwrap_or("");
        let mut histogram = BTreeMap::new();
        for pair in f(7).split_whitespace() {
            let (k, c) = pair.split_once(':').ok_or_else(|| bad(format!("bad bucket `{pair}`")))?;
            histogram.insert(num(k)?, num(c)?);
        }
        out.push(PeriodStats {
            epoch: num(f(0))?,
            architecture: f(1).parse()?,
            mode: f(2).parse()?,
            count: num(f(3))?,
            average_period: if f(4).is_empty() { None } else { Some(float(f(4))?) },
            percent_non_periodic: float(f(5))?,
            non_periodic: num(f(6))?,
            histogram,
        });
    }
    Ok(out)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::format("csv", e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// File stem for per-run outputs: `{arch}_{mode}_epoch{N}`.
pub fn output_stem(architecture: Architecture, mode: MapMode, epoch: usize) -> String {
    format!("{}_{}_epoch{}", architecture.as_str(), mode.as_str(), epoch)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(k: usize) -> OrbitVerdict {
        OrbitVerdict::Periodic {
            period: k,
            cycle: vec![0; k],
            detect_step: 0,
            verified_repetitions: 10,
        }
    }

    const NP: OrbitVerdict = OrbitVerdict::NonPeriodic { steps_examined: 100 };

    fn stats(arch: Architecture, epoch: usize, v: &[OrbitVerdict]) -> PeriodStats {
        aggregate(epoch, arch, MapMode::WithInput, v).unwrap()
    }

    #[test]
    fn aggregate_examples() {
        let s = stats(Architecture::Lstm, 40, &[p(1), p(1), p(1)]);
        assert_eq!(s.average_period, Some(1.0));
        assert_eq!(s.percent_non_periodic, 0.0);
        let s = stats(Architecture::Lstm, 0, &[p(3), p(5)]);
        assert_eq!(s.average_period, Some(4.0));
        let s = stats(Architecture::Lstm, 0, &[p(4), NP.clone()]);
        assert_eq!(s.average_period, Some(4.0));
        assert_eq!(s.percent_non_periodic, 50.0);
        assert_eq!(s.histogram.values().sum::<usize>() + s.non_periodic, s.count);
        let s = stats(Architecture::Vanilla, 0, &[NP.clone()]);
        assert_eq!(s.average_period, None);
        assert!(aggregate(0, Architecture::Lstm, MapMode::WithInput, &[]).is_err());
    }

    #[test]
    fn single_entry_table() {
        let t = render_table(&[stats(Architecture::Vanilla, 10, &[p(2), p(3)])]).unwrap();
        assert_eq!(
            t,
            "architecture,metric,epoch 10\nvanilla,average period,3\nvanilla,non-periodic %,0.0\n"
        );
    }

    #[test]
    fn full_table_layout_and_round_trip() {
        let mut all = Vec::new();
        for arch in [Architecture::Vanilla, Architecture::Lstm] {
            for (i, e) in [0, 10, 20, 30, 40].into_iter().enumerate() {
                let mut v = vec![p(i + 1), p(2 * i + 2), p(7)];
                if i % 2 == 1 {
                    v.push(NP.clone());
                }
                all.push(stats(arch, e, &v));
            }
        }
        all.reverse();
        let t = render_table(&all).unwrap();
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], "architecture,metric,epoch 0,epoch 10,epoch 20,epoch 30,epoch 40");
        assert!(lines[1].starts_with("vanilla,average period,"));
        assert!(lines[3].starts_with("lstm,average period,"));
        let cells = parse_table(&t).unwrap();
        assert_eq!(cells.len(), 20);
        for c in &cells {
            let s = all
                .iter()
                .find(|s| s.architecture == c.architecture && s.epoch == c.epoch)
                .unwrap();
            let expect = if c.metric == METRIC_AVERAGE {
                round_half_up(s.average_period.unwrap()) as f64
            } else {
                (s.percent_non_periodic * 10.0).round() / 10.0
            };
            assert_eq!(c.value, Some(expect));
        }
        assert_eq!(render_table(&all).unwrap(), t);
    }

    #[test]
    fn rounding_is_half_up() {
        assert_eq!(round_half_up(2.5), 3);
        assert_eq!(round_half_up(2.4999), 2);
        let s = stats(Architecture::Lstm, 0, &[p(2), p(3)]);
        assert!(render_table(&[s]).unwrap().contains("average period,3"));
    }

    #[test]
    fn mixed_modes_and_duplicates_rejected() {
        let a = stats(Architecture::Lstm, 0, &[p(1)]);
        let mut b = a.clone();
        b.mode = MapMode::WithoutInput;
        b.epoch = 10;
        assert!(matches!(render_table(&[a.clone(), b.clone()]), Err(Error::Parameter(_))));
        assert!(render_sink_table(&[a.clone(), b]).is_err());
        assert!(render_table(&[a.clone(), a]).is_err());
        assert!(render_table(&[]).is_err());
    }

    #[test]
    fn sink_table() {
        let s = aggregate(
            40,
            Architecture::Lstm,
            MapMode::WithoutInput,
            &[p(1), p(1), p(1), p(2)],
        )
        .unwrap();
        let t = render_sink_table(&[s]).unwrap();
        assert_eq!(t, "period,lstm epoch 40\n1,75.0\n>1,25.0\nnon-periodic,0.0\n");
    }

    #[test]
    fn precise_stats_round_trip() {
        let v = [p(1), p(2), p(2), NP.clone(), p(17)];
        let a = stats(Architecture::Vanilla, 20, &v);
        let b = stats(Architecture::Lstm, 0, &[NP.clone()]);
        let text = render_stats(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(parse_stats(&text).unwrap(), vec![a, b]);
        assert!(parse_stats("nope\n").is_err());
    }

    #[test]
    fn stems() {
        assert_eq!(
            output_stem(Architecture::Lstm, MapMode::WithoutInput, 40),
            "lstm_without-input_epoch40"
        );
    }

    proptest::proptest! {
        #[test]
        fn aggregate_is_permutation_invariant(
            periods in proptest::collection::vec(proptest::option::of(1usize..3000), 1..200),
            seed in 0u64..1000,
        ) {
            let v: Vec<OrbitVerdict> = periods.iter().map(|k| k.map(p).unwrap_or(NP.clone())).collect();
            let mut w = v.clone();
            let mut rng = crate::numerics::Rng::new(seed);
            for i in (1..w.len()).rev() {
                w.swap(i, rng.below(i + 1));
            }
            let a = stats(Architecture::Lstm, 0, &v);
            let b = stats(Architecture::Lstm, 0, &w);
            proptest::prop_assert_eq!(&a, &b);
            proptest::prop_assert!((0.0..=100.0).contains(&a.percent_non_periodic));
            if let Some(avg) = a.average_period {
                proptest::prop_assert!(avg >= 1.0);
            }
        }
    }
}
