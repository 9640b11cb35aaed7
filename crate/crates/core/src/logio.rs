//! Request logs (JSON lines) and figure reports (CSV).
//!
//! Both formats start with a `# dcaf-<kind> v1` comment line; readers reject any
//! other version. Floats use the shortest representation that parses back to the
//! same value.

use std::fmt::Display;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::allocation::{verify_assumptions, ActionSpace, GainMatrix};
use crate::error::{invalid, DcafError, Result};
use crate::experiments::{ActionAggregate, CurvePoint, Series};
use crate::gain::{
    cap_ratio_growth, pool_gain_row, FeatureVector, LinearEstimator, PoolModel, RequestWorld,
    SyntheticGainModel, SyntheticGainParams, TrainingRecord,
};
use crate::sim::TickMetrics;
use crate::solver::{SolverResult, SweepPoint};

pub const LOG_HEADER: &str = "# dcaf-log v1";
const REPORT_PREFIX: &str = "# dcaf-report v1 ";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogRecord {
    pub request_id: String,
    /// Epoch seconds.
    pub timestamp: i64,
    pub features: FeatureVector,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logged_action: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub realized_gain: Option<f64>,
    /// Full gain row; synthetic datasets only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_action_gains: Option<Vec<f64>>,
}

impl LogRecord {
    pub fn validate(&self) -> Result<()> {
        self.features.validate()?;
        let logged = match (self.logged_action, self.realized_gain) {
            (Some(_), Some(g)) if !g.is_finite() => {
                return Err(invalid("field `realized_gain` must be finite"));
            }
            (Some(_), Some(_)) => true,
            (None, None) => false,
            (Some(_), None) => return Err(invalid("field `realized_gain` is required with `logged_action`")),
            (None, Some(_)) => return Err(invalid("field `logged_action` is required with `realized_gain`")),
        };
        match &self.per_action_gains {
            Some(row) if row.iter().any(|g| !(g.is_finite() && *g >= 0.0)) => {
                Err(invalid("field `per_action_gains` must hold finite gains >= 0"))
            }
            Some(_) => Ok(()),
            None if logged => Ok(()),
            None => Err(invalid(
                "record needs `per_action_gains` or both `logged_action` and `realized_gain`",
            )),
        }
    }
}

pub fn write_logs(records: &[LogRecord], path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{LOG_HEADER}")?;
    for (i, r) in records.iter().enumerate() {
        r.validate().map_err(|e| DcafError::Parse {
            line: i + 2,
            message: e.to_string(),
        })?;
        serde_json::to_writer(&mut out, r).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// All records or an error naming the first bad line; never a partial list.
pub fn read_logs(path: &Path) -> Result<Vec<LogRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let n = idx + 1;
        if n == 1 {
            check_header(&line, LOG_HEADER)?;
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let record: LogRecord = serde_json::from_str(&line).map_err(|e| DcafError::Parse {
            line: n,
            message: e.to_string(),
        })?;
        record.validate().map_err(|e| DcafError::Parse {
            line: n,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(records)
}

fn check_header(line: &str, expected: &str) -> Result<()> {
    if line == expected {
        return Ok(());
    }
    let kind = expected.rsplit_once(' ').map_or(expected, |(k, _)| k);
    if line.starts_with(kind) {
        Err(DcafError::Schema(format!("expected `{expected}`, found `{line}`")))
    } else {
        Err(DcafError::Parse {
            line: 1,
            message: format!("missing `{expected}` header"),
        })
    }
}

/// Gain rows for a record set: stored rows when present, else estimator predictions.
pub fn gain_matrix(
    records: &[LogRecord],
    actions: &ActionSpace,
    estimator: Option<&LinearEstimator>,
) -> Result<GainMatrix> {
    let mut m = GainMatrix::new(actions.len());
    for (i, r) in records.iter().enumerate() {
        let row = match (&r.per_action_gains, estimator) {
            (Some(row), _) => row.clone(),
            (None, Some(est)) => est.predict_row(&r.features)?,
            (None, None) => {
                return Err(invalid(format!(
                    "record {} has no per_action_gains and no estimator was given",
                    r.request_id
                )))
            }
        };
        if row.len() != actions.len() {
            return Err(DcafError::LengthMismatch {
                request: i,
                expected: actions.len(),
                found: row.len(),
            });
        }
        m.push_row(&row)?;
    }
    Ok(m)
}

/// Logged (action, realized gain) pairs; records without them are skipped.
pub fn training_records(records: &[LogRecord]) -> Vec<TrainingRecord> {
    records
        .iter()
        .filter_map(|r| match (r.logged_action, r.realized_gain) {
            (Some(action), Some(gain)) => Some(TrainingRecord {
                features: r.features.clone(),
                action,
                gain,
            }),
            _ => None,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSource {
    /// `v * q^alpha`
    Synthetic,
    /// Top-k pool eCPM with the gain-per-cost cap applied.
    Pool(PoolModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub params: SyntheticGainParams,
    pub requests: usize,
    pub actions: ActionSpace,
    pub source: DatasetSource,
    pub world: RequestWorld,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub records: usize,
    pub mean_value: f64,
    pub assumption_violations: usize,
}

const EPOCH_START: i64 = 1_700_000_000;

/// Deterministic for a fixed `params.seed`. Each record also logs one uniformly
/// random action with its gain, for estimator training.
pub fn generate_records(spec: &DatasetSpec) -> Result<(Vec<LogRecord>, DatasetSummary)> {
    spec.params.validate()?;
    let world = RequestWorld {
        value_distribution: spec.params.value_distribution,
        ..spec.world.clone()
    };
    world.validate()?;
    let model = SyntheticGainModel::new(spec.actions.clone(), spec.params.alpha)?;
    if let DatasetSource::Pool(p) = &spec.source {
        p.validate()?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.params.seed);
    let mut records = Vec::with_capacity(spec.requests);
    let mut value_sum = 0.0;
    for i in 0..spec.requests {
        let sample = world.sample(&mut rng, 0.0);
        value_sum += sample.value;
        let row = match &spec.source {
            DatasetSource::Synthetic => model.row(sample.value),
            DatasetSource::Pool(p) => {
                let pool = p.generate(sample.value, &mut rng);
                let mut row = pool_gain_row(&pool, &spec.actions)?;
                cap_ratio_growth(&mut row, &spec.actions);
                row
            }
        };
        let action = rng.random_range(0..spec.actions.len());
        records.push(LogRecord {
            request_id: format!("r{i:08}"),
            timestamp: EPOCH_START + (i / 100) as i64,
            features: sample.features,
            logged_action: Some(action),
            realized_gain: Some(row[action]),
            per_action_gains: Some(row),
        });
    }
    let rows = gain_matrix(&records, &spec.actions, None)?;
    let summary = DatasetSummary {
        records: records.len(),
        mean_value: if records.is_empty() { 0.0 } else { value_sum / records.len() as f64 },
        assumption_violations: verify_assumptions(&rows, &spec.actions).violations.len(),
    };
    Ok((records, summary))
}

pub fn generate_dataset(spec: &DatasetSpec, path: &Path) -> Result<DatasetSummary> {
    let (records, summary) = generate_records(spec)?;
    write_logs(&records, path)?;
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Solve,
    Assignment,
}

impl ReportKind {
    pub fn id(self) -> &'static str {
        match self {
            ReportKind::Fig3 => "fig3",
            ReportKind::Fig4 => "fig4",
            ReportKind::Fig5 => "fig5",
            ReportKind::Fig6 => "fig6",
            ReportKind::Solve => "solve",
            ReportKind::Assignment => "assignment",
        }
    }

    pub fn parse(id: &str) -> Option<Self> {
        [
            ReportKind::Fig3,
            ReportKind::Fig4,
            ReportKind::Fig5,
            ReportKind::Fig6,
            ReportKind::Solve,
            ReportKind::Assignment,
        ]
        .into_iter()
        .find(|k| k.id() == id)
    }

    pub fn columns(self) -> &'static [&'static str] {
        match self {
            ReportKind::Fig3 => &["figure", "lambda", "total_gain", "total_cost", "served"],
            ReportKind::Fig4 => &["figure", "series", "action", "lambda", "total_cost", "total_gain"],
            ReportKind::Fig5 => &["figure", "action", "cost", "count", "sum_gain", "sum_cost", "gain_per_cost"],
            ReportKind::Fig6 => &[
                "figure", "policy", "tick", "qps", "arrivals", "served", "failed", "runtime", "fail_rate",
                "utilization", "total_cost", "total_gain", "max_power", "lambda", "error", "control",
            ],
            ReportKind::Solve => &[
                "figure", "lambda_star", "achieved_cost", "achieved_gain", "served", "budget", "epsilon",
                "gap", "iterations", "converged", "regime",
            ],
            ReportKind::Assignment => &["figure", "request_id", "action", "cost", "gain"],
        }
    }
}

/// One assigned request; `action` is `None` when the request is not served.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentRow {
    pub request_id: String,
    pub action: Option<usize>,
    pub cost: f64,
    pub gain: f64,
}

/// Results that can be written as a report.
#[derive(Debug, Clone, Copy)]
pub enum FigureData<'a> {
    Fig3(&'a [SweepPoint]),
    Fig4(&'a [CurvePoint]),
    Fig5(&'a [ActionAggregate]),
    /// Tick streams labelled by policy.
    Fig6(&'a [(&'a str, &'a [TickMetrics])]),
    Solve(&'a SolverResult),
    Assignment(&'a [AssignmentRow]),
}

impl FigureData<'_> {
    pub fn kind(&self) -> ReportKind {
        match self {
            FigureData::Fig3(_) => ReportKind::Fig3,
            FigureData::Fig4(_) => ReportKind::Fig4,
            FigureData::Fig5(_) => ReportKind::Fig5,
            FigureData::Fig6(_) => ReportKind::Fig6,
            FigureData::Solve(_) => ReportKind::Solve,
            FigureData::Assignment(_) => ReportKind::Assignment,
        }
    }

    fn rows(&self) -> Vec<Vec<String>> {
        let id = self.kind().id().to_string();
        let row = |fields: Vec<String>| std::iter::once(id.clone()).chain(fields).collect::<Vec<_>>();
        match self {
            FigureData::Fig3(points) => points
                .iter()
                .map(|p| row(vec![s(p.lambda), s(p.total_gain), s(p.total_cost), s(p.served_count)]))
                .collect(),
            FigureData::Fig4(points) => points
                .iter()
                .map(|p| {
                    let series = match p.series {
                        Series::Baseline => "baseline",
                        Series::Dcaf => "dcaf",
                    };
                    row(vec![series.into(), s(p.action), s(p.lambda), s(p.total_cost), s(p.total_gain)])
                })
                .collect(),
            FigureData::Fig5(aggs) => aggs
                .iter()
                .map(|a| {
                    row(vec![
                        s(a.action),
                        s(a.cost),
                        s(a.count),
                        s(a.sum_gain),
                        s(a.sum_cost),
                        s(a.gain_per_cost()),
                    ])
                })
                .collect(),
            FigureData::Fig6(streams) => streams
                .iter()
                .flat_map(|(policy, ticks)| ticks.iter().map(move |t| (*policy, t)))
                .map(|(policy, t)| {
                    row(vec![
                        policy.to_string(),
                        s(t.tick),
                        s(t.qps),
                        s(t.arrivals),
                        s(t.served),
                        s(t.failed),
                        s(t.runtime),
                        s(t.fail_rate),
                        s(t.utilization),
                        s(t.total_cost),
                        s(t.total_gain),
                        s(t.max_power),
                        s(t.lambda),
                        s(t.error),
                        s(t.control),
                    ])
                })
                .collect(),
            FigureData::Solve(r) => vec![row(vec![
                s(r.lambda_star),
                s(r.achieved_cost),
                s(r.achieved_gain),
                s(r.served_count),
                s(r.budget),
                s(r.epsilon),
                s(r.gap),
                s(r.iterations),
                s(r.converged),
                serde_json::to_value(r.regime)
                    .ok()
                    .and_then(|v| v.as_str().map(String::from))
                    .unwrap_or_default(),
            ])],
            FigureData::Assignment(rows) => rows
                .iter()
                .map(|a| {
                    row(vec![
                        a.request_id.clone(),
                        a.action.map_or_else(|| "none".to_string(), |j| j.to_string()),
                        s(a.cost),
                        s(a.gain),
                    ])
                })
                .collect(),
        }
    }
}

fn s(v: impl Display) -> String {
    v.to_string()
}

/// Writes `data` as the `figure` report; the two must agree. Returns the row count.
pub fn emit_figure_data(data: &FigureData<'_>, figure: ReportKind, path: &Path) -> Result<usize> {
    if data.kind() != figure {
        return Err(invalid(format!(
            "{} data cannot be written as a {} report",
            data.kind().id(),
            figure.id()
        )));
    }
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{REPORT_PREFIX}{}", figure.id())?;
    let rows = data.rows();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(figure.columns())?;
        for r in &rows {
            w.write_record(r)?;
        }
        w.flush()?;
    }
    out.flush()?;
    Ok(rows.len())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportTable {
    pub kind: ReportKind,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ReportTable {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Parsed floats of one column.
    pub fn floats(&self, name: &str) -> Result<Vec<f64>> {
        let c = self
            .column(name)
            .ok_or_else(|| invalid(format!("{} report has no `{name}` column", self.kind.id())))?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r[c].parse().map_err(|_| DcafError::Parse {
                    line: i + 3,
                    message: format!("column `{name}` is not a number: {}", r[c]),
                })
            })
            .collect()
    }
}

pub fn read_report(path: &Path) -> Result<ReportTable> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let first = first.trim_end_matches(['\n', '\r']);
    let id = first.strip_prefix(REPORT_PREFIX).ok_or_else(|| {
        if first.starts_with("# dcaf-report ") {
            DcafError::Schema(format!("unsupported report header `{first}`"))
        } else {
            DcafError::Parse {
                line: 1,
                message: "missing `# dcaf-report v1 <kind>` header".into(),
            }
        }
    })?;
    let kind = ReportKind::parse(id).ok_or_else(|| DcafError::Schema(format!("unknown report kind `{id}`")))?;
    let mut csv = csv::Reader::from_reader(reader);
    let header: Vec<String> = csv.headers()?.iter().map(String::from).collect();
    if header != kind.columns() {
        return Err(DcafError::Schema(format!("{id} report has unexpected columns")));
    }
    let rows = csv
        .records()
        .map(|r| r.map(|r| r.iter().map(String::from).collect()))
        .collect::<std::result::Result<_, _>>()?;
    Ok(ReportTable { kind, header, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gain::ValueDistribution;
    use crate::solver::linear_grid;
    use tempfile::tempdir;

    fn spec(n: usize, seed: u64) -> DatasetSpec {
        DatasetSpec {
            params: SyntheticGainParams { seed, ..Default::default() },
            requests: n,
            actions: ActionSpace::ladder(10, 10.0).unwrap(),
            source: DatasetSource::Synthetic,
            world: RequestWorld::default(),
        }
    }

    #[test]
    fn round_trip_and_empty() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        let (records, _) = generate_records(&spec(25, 1)).unwrap();
        write_logs(&records, &path).unwrap();
        assert_eq!(read_logs(&path).unwrap(), records);

        write_logs(&[], &path).unwrap();
        assert!(read_logs(&path).unwrap().is_empty());
        std::fs::write(&path, "").unwrap();
        assert!(read_logs(&path).unwrap().is_empty());
    }

    #[test]
    fn awkward_floats_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        let r = LogRecord {
            request_id: "x".into(),
            timestamp: 0,
            features: FeatureVector { context: vec![0.1 + 0.2, 1e-300, -2.5e17], ..Default::default() },
            logged_action: None,
            realized_gain: None,
            per_action_gains: Some(vec![f64::MIN_POSITIVE, 1.0 / 3.0, 123456789.12345679]),
        };
        write_logs(std::slice::from_ref(&r), &path).unwrap();
        assert_eq!(read_logs(&path).unwrap(), vec![r]);
    }

    #[test]
    fn bad_lines_name_field_and_line() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        let ok = r#"{"request_id":"a","timestamp":1,"features":{"user_profile":[],"user_behavior":[],"context":[],"system_status":[]},"per_action_gains":[1.0]}"#;
        let missing = r#"{"request_id":"b","features":{"user_profile":[],"user_behavior":[],"context":[],"system_status":[]},"per_action_gains":[1.0]}"#;
        std::fs::write(&path, format!("{LOG_HEADER}\n{ok}\n{missing}\n")).unwrap();
        let err = read_logs(&path).unwrap_err().to_string();
        assert!(err.contains("line 3") && err.contains("timestamp"), "{err}");

        let no_gain = r#"{"request_id":"c","timestamp":1,"features":{"user_profile":[],"user_behavior":[],"context":[],"system_status":[]},"logged_action":2}"#;
        std::fs::write(&path, format!("{LOG_HEADER}\n{no_gain}\n")).unwrap();
        let err = read_logs(&path).unwrap_err().to_string();
        assert!(err.contains("line 2") && err.contains("realized_gain"), "{err}");

        std::fs::write(&path, format!("{LOG_HEADER}\n{ok}\n{{\"request_id\":")).unwrap();
        assert!(matches!(read_logs(&path), Err(DcafError::Parse { line: 3, .. })));

        std::fs::write(&path, format!("# dcaf-log v2\n{ok}\n")).unwrap();
        assert!(matches!(read_logs(&path), Err(DcafError::Schema(_))));
        std::fs::write(&path, format!("{ok}\n")).unwrap();
        assert!(matches!(read_logs(&path), Err(DcafError::Parse { line: 1, .. })));
    }

    #[test]
    fn datasets_are_deterministic_and_well_formed() {
        let dir = tempdir().unwrap();
        let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
        let s = generate_dataset(&spec(200, 9), &a).unwrap();
        generate_dataset(&spec(200, 9), &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        assert_eq!((s.records, s.assumption_violations), (200, 0));

        let pool = DatasetSpec {
            source: DatasetSource::Pool(PoolModel::default()),
            ..spec(100, 2)
        };
        assert_eq!(generate_records(&pool).unwrap().1.assumption_violations, 0);

        let empty = generate_dataset(&spec(0, 1), &a).unwrap();
        assert_eq!(empty.records, 0);
        assert!(read_logs(&a).unwrap().is_empty());

        let homogeneous = DatasetSpec {
            params: SyntheticGainParams {
                value_distribution: ValueDistribution::LogNormal { mu: 0.0, sigma: 0.0 },
                ..Default::default()
            },
            ..spec(5, 1)
        };
        let (recs, _) = generate_records(&homogeneous).unwrap();
        assert!(recs.windows(2).all(|w| w[0].per_action_gains == w[1].per_action_gains));
    }

    #[test]
    fn training_pairs_come_from_logged_actions() {
        let (records, _) = generate_records(&spec(10, 4)).unwrap();
        let t = training_records(&records);
        assert_eq!(t.len(), 10);
        for (tr, r) in t.iter().zip(&records) {
            assert_eq!(tr.gain, r.per_action_gains.as_ref().unwrap()[tr.action]);
        }
    }

    #[test]
    fn figure_reports() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("fig3.csv");
        let points: Vec<SweepPoint> = linear_grid(0.0, 1.0, 3)
            .into_iter()
            .map(|lambda| SweepPoint { lambda, total_gain: 1.0 - lambda, total_cost: 2.0, served_count: 1 })
            .collect();
        let data = FigureData::Fig3(&points);
        assert_eq!(emit_figure_data(&data, ReportKind::Fig3, &path).unwrap(), 3);
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with("# dcaf-report v1 fig3\nfigure,lambda,total_gain,total_cost,served\n"));
        let table = read_report(&path).unwrap();
        assert_eq!(table.floats("lambda").unwrap(), vec![0.0, 0.5, 1.0]);
        assert!(emit_figure_data(&data, ReportKind::Fig5, &path).is_err());

        let ticks = vec![TickMetrics { tick: 3, max_power: 40.0, fail_rate: 0.25, ..Default::default() }];
        let streams = [("dcaf", ticks.as_slice())];
        emit_figure_data(&FigureData::Fig6(&streams), ReportKind::Fig6, &path).unwrap();
        let t6 = read_report(&path).unwrap();
        assert_eq!(t6.floats("max_power").unwrap(), vec![40.0]);
        assert_eq!(t6.floats("fail_rate").unwrap(), vec![0.25]);

        std::fs::write(&path, "# dcaf-report v2 fig3\nfigure\n").unwrap();
        assert!(matches!(read_report(&path), Err(DcafError::Schema(_))));
    }
}
