//! Typing-efficiency metrics and the per-system comparison report.
//!
//! Sessions are first reduced per participant and system: mean speed over
//! the participant's sessions, total backspaces, and the number of aborted
//! sessions. The systems are then compared across participants.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::sim::{ExperimentTable, System};
use crate::stats::{paired_t_test, significance_stars, welch_from_summaries, StatsError, Summary, TTestResult};
use crate::types::Millis;

/// Characters per minute; zero for a non-positive duration.
pub fn typing_speed(chars: usize, duration_ms: Millis) -> f64 {
    if duration_ms <= 0 {
        return 0.0;
    }
    chars as f64 / (duration_ms as f64 / 60_000.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionMetrics {
    pub chars_per_min: f64,
    pub backspaces: u32,
    pub aborted: bool,
}

/// How aborted sessions enter the speed metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AbortedSpeed {
    /// Characters typed correctly before the timeout, over the timeout.
    #[default]
    Partial,
    Exclude,
}

impl FromStr for AbortedSpeed {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "partial" => Ok(AbortedSpeed::Partial),
            "exclude" => Ok(AbortedSpeed::Exclude),
            _ => Err(format!("expected partial or exclude, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestKind {
    #[default]
    Welch,
    Paired,
}

impl FromStr for TestKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "welch" => Ok(TestKind::Welch),
            "paired" => Ok(TestKind::Paired),
            _ => Err(format!("expected welch or paired, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    CharsPerMin,
    Backspaces,
    Aborts,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::CharsPerMin, Metric::Backspaces, Metric::Aborts];

    pub fn name(self) -> &'static str {
        match self {
            Metric::CharsPerMin => "chars_per_min",
            Metric::Backspaces => "backspaces",
            Metric::Aborts => "aborts",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemStat {
    pub n: usize,
    pub mean: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricComparison {
    pub metric: Metric,
    pub eyeo: SystemStat,
    pub control: SystemStat,
    pub test: TTestResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub test_kind: TestKind,
    pub aborted_speed: AbortedSpeed,
    pub participants: usize,
    pub sessions: usize,
    pub metrics: Vec<MetricComparison>,
}

/// Per-participant values of one metric, keyed by participant.
type PerParticipant = BTreeMap<usize, f64>;

fn per_participant(table: &ExperimentTable, system: System, metric: Metric, policy: AbortedSpeed) -> PerParticipant {
    let mut acc: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for row in table.rows.iter().filter(|r| r.system == system) {
        let entry = acc.entry(row.participant).or_insert((0.0, 0));
        match metric {
            Metric::CharsPerMin => {
                if row.aborted && policy == AbortedSpeed::Exclude {
                    continue;
                }
                entry.0 += row.chars_per_min;
                entry.1 += 1;
            }
            Metric::Backspaces => entry.0 += row.backspaces as f64,
            Metric::Aborts => entry.0 += row.aborted as u8 as f64,
        }
    }
    acc.into_iter()
        .filter_map(|(p, (sum, n))| match metric {
            Metric::CharsPerMin => (n > 0).then(|| (p, sum / n as f64)),
            _ => Some((p, sum)),
        })
        .collect()
}

/// Both samples constant: no spread to test against.
fn degenerate(a: &Summary, b: &Summary, dof: f64) -> TTestResult {
    let same = a.mean == b.mean;
    TTestResult {
        t_stat: if same { 0.0 } else { (a.mean - b.mean).signum() * f64::INFINITY },
        dof,
        p_value: if same { 1.0 } else { 0.0 },
        mean_a: a.mean,
        mean_b: b.mean,
        se_a: a.se(),
        se_b: b.se(),
    }
}

fn compare(a: &PerParticipant, b: &PerParticipant, kind: TestKind) -> Result<TTestResult, StatsError> {
    let xs: Vec<f64> = a.values().copied().collect();
    let ys: Vec<f64> = b.values().copied().collect();
    let sa = Summary::of(&xs)?;
    let sb = Summary::of(&ys)?;
    match kind {
        TestKind::Welch => Ok(welch_from_summaries(&sa, &sb)
            .unwrap_or_else(|| degenerate(&sa, &sb, (sa.n + sb.n) as f64 - 2.0))),
        TestKind::Paired => {
            let (pa, pb): (Vec<f64>, Vec<f64>) =
                a.iter().filter_map(|(p, x)| b.get(p).map(|y| (*x, *y))).unzip();
            match paired_t_test(&pa, &pb) {
                Err(StatsError::ZeroVariance) => {
                    let d = Summary::of(&pa.iter().zip(&pb).map(|(x, y)| x - y).collect::<Vec<_>>())?;
                    let zero = Summary { n: d.n, mean: 0.0, variance: 0.0 };
                    let mut r = degenerate(&d, &zero, d.n as f64 - 1.0);
                    (r.mean_a, r.mean_b, r.se_a, r.se_b) = (sa.mean, sb.mean, sa.se(), sb.se());
                    Ok(r)
                }
                other => other,
            }
        }
    }
}

/// Per-system means, standard errors and two-sided tests for every metric.
pub fn aggregate(table: &ExperimentTable, kind: TestKind, policy: AbortedSpeed) -> Result<Report, StatsError> {
    let mut metrics = Vec::new();
    for metric in Metric::ALL {
        let e = per_participant(table, System::Eyeo, metric, policy);
        let c = per_participant(table, System::Control, metric, policy);
        let test = compare(&e, &c, kind)?;
        let stat = |s: &PerParticipant, mean: f64, se: f64| SystemStat { n: s.len(), mean, se };
        metrics.push(MetricComparison {
            metric,
            eyeo: stat(&e, test.mean_a, test.se_a),
            control: stat(&c, test.mean_b, test.se_b),
            test,
        });
    }
    let participants = table.rows.iter().map(|r| r.participant).collect::<std::collections::BTreeSet<_>>().len();
    Ok(Report { test_kind: kind, aborted_speed: policy, participants, sessions: table.rows.len(), metrics })
}

impl Report {
    pub fn metric(&self, m: Metric) -> &MetricComparison {
        self.metrics.iter().find(|c| c.metric == m).expect("all metrics reported")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let kind = match self.test_kind {
            TestKind::Welch => "Welch two-sided t-test",
            TestKind::Paired => "paired two-sided t-test",
        };
        let policy = match self.aborted_speed {
            AbortedSpeed::Partial => "partial",
            AbortedSpeed::Exclude => "exclude",
        };
        writeln!(s, "participants: {}", self.participants).unwrap();
        writeln!(s, "sessions: {}", self.sessions).unwrap();
        writeln!(s, "test: {kind}").unwrap();
        writeln!(s, "aborted sessions in speed: {policy}").unwrap();
        writeln!(s).unwrap();
        writeln!(
            s,
            "{:<14} {:>10} {:>8} {:>10} {:>8} {:>9} {:>8} {:>10} {:<3}",
            "metric", "eyeo_M", "eyeo_SE", "control_M", "ctrl_SE", "t", "dof", "p", "sig"
        )
        .unwrap();
        for c in &self.metrics {
            writeln!(
                s,
                "{:<14} {:>10.3} {:>8.3} {:>10.3} {:>8.3} {:>9.3} {:>8.2} {:>10.3e} {:<3}",
                c.metric.name(),
                c.eyeo.mean,
                c.eyeo.se,
                c.control.mean,
                c.control.se,
                c.test.t_stat,
                c.test.dof,
                c.test.p_value,
                significance_stars(c.test.p_value)
            )
            .unwrap();
        }
        writeln!(s).unwrap();
        writeln!(s, "significance: * p<.05, ** p<.01, *** p<.001").unwrap();
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("metric,eyeo_mean,eyeo_se,control_mean,control_se,t,dof,p,sig\n");
        for c in &self.metrics {
            writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                c.metric.name(),
                c.eyeo.mean,
                c.eyeo.se,
                c.control.mean,
                c.control.se,
                c.test.t_stat,
                c.test.dof,
                c.test.p_value,
                significance_stars(c.test.p_value)
            )
            .unwrap();
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::SessionRow;

    fn row(p: usize, system: System, cpm: f64, bs: u32, aborted: bool) -> SessionRow {
        SessionRow {
            participant: p,
            system,
            offset_dx: 0.0,
            offset_dy: 0.0,
            phrase: String::new(),
            chars_per_min: cpm,
            backspaces: bs,
            aborted,
            duration_ms: 1,
            updates_applied: 0,
            correct_chars: 0,
        }
    }

    #[test]
    fn speed_arithmetic() {
        assert_eq!(typing_speed(20, 60_000), 20.0);
        assert_eq!(typing_speed(11, 30_000), 22.0);
        assert_eq!(typing_speed(5, 0), 0.0);
    }

    #[test]
    fn hand_built_table() {
        let table = ExperimentTable {
            rows: vec![
                row(0, System::Eyeo, 30.0, 1, false),
                row(1, System::Eyeo, 26.0, 3, false),
                row(0, System::Control, 20.0, 4, true),
                row(1, System::Control, 24.0, 2, false),
            ],
        };
        let r = aggregate(&table, TestKind::Welch, AbortedSpeed::Partial).unwrap();
        let speed = r.metric(Metric::CharsPerMin);
        assert_eq!(speed.eyeo.mean, 28.0);
        // sd = sqrt(8), se = sqrt(8)/sqrt(2) = 2.
        assert!((speed.eyeo.se - 2.0).abs() < 1e-12);
        assert_eq!(speed.control.mean, 22.0);
        assert!((speed.control.se - 2.0).abs() < 1e-12);
        // t = 6 / sqrt(4 + 4)
        assert!((speed.test.t_stat - 6.0 / 8f64.sqrt()).abs() < 1e-12);
        let aborts = r.metric(Metric::Aborts);
        assert_eq!((aborts.eyeo.mean, aborts.control.mean), (0.0, 0.5));

        let ex = aggregate(&table, TestKind::Welch, AbortedSpeed::Exclude);
        // Participant 0 has no non-aborted control session left: one value.
        assert_eq!(ex.unwrap_err(), StatsError::TooFewSamples(1));
    }

    #[test]
    fn identical_systems_give_p_one() {
        let mut rows = Vec::new();
        for (p, (cpm, bs)) in [(20.0, 1), (25.0, 4), (22.0, 0)].into_iter().enumerate() {
            rows.push(row(p, System::Eyeo, cpm, bs, false));
            rows.push(row(p, System::Control, cpm, bs, false));
        }
        let table = ExperimentTable { rows };
        for kind in [TestKind::Welch, TestKind::Paired] {
            let r = aggregate(&table, kind, AbortedSpeed::Partial).unwrap();
            for c in &r.metrics {
                assert_eq!(c.test.p_value, 1.0, "{:?} {:?}", kind, c.metric);
            }
        }
    }

    #[test]
    fn se_matches_two_pass() {
        let xs = [3.5, 9.25, 1.0, 7.75, 4.0, 6.5];
        let s = Summary::of(&xs).unwrap();
        let mean = xs.iter().sum::<f64>() / 6.0;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 5.0;
        assert!(((s.se() - (var / 6.0).sqrt()) / s.se()).abs() < 1e-12);
    }

    #[test]
    fn report_renders_every_metric() {
        let table = ExperimentTable {
            rows: vec![
                row(0, System::Eyeo, 30.0, 1, false),
                row(1, System::Eyeo, 26.0, 3, false),
                row(0, System::Control, 20.0, 4, false),
                row(1, System::Control, 21.0, 2, false),
            ],
        };
        let r = aggregate(&table, TestKind::Welch, AbortedSpeed::Partial).unwrap();
        let text = r.to_text();
        for m in Metric::ALL {
            assert!(text.contains(m.name()));
        }
        assert_eq!(r.to_csv().lines().count(), 4);
    }
}
