//! Evaluation rollouts and their CSV form.
//!
//! Layout: header `t,s0,..,s{n-1},sc0,..,sc{m-1},r`, one row per step. Each
//! row holds the observation reached by the step, its augmented form, and the
//! extrinsic reward the step produced. Episodes are concatenated; `t` restarts
//! at 0 at every episode boundary.

use std::io::Read;

use thiserror::Error;

use crate::lipschitz::{LipschitzError, Trajectory};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeTrace {
    pub source: Vec<Vec<f64>>,
    pub augmented: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
}

impl EpisodeTrace {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn push(&mut self, source: Vec<f64>, augmented: Vec<f64>, reward: f64) {
        self.source.push(source);
        self.augmented.push(augmented);
        self.rewards.push(reward);
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }

    /// `(s^c, r)` pairs for Lipschitz analysis.
    pub fn to_trajectory(&self) -> Result<Trajectory, LipschitzError> {
        Trajectory::new(self.augmented.clone(), self.rewards.clone())
    }
}

#[derive(Debug, Error)]
pub enum TraceCsvError {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("line {line}: {message}")]
    BadRow { line: u64, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub fn traces_to_csv(traces: &[EpisodeTrace]) -> String {
    let (n, m) = traces
        .iter()
        .find(|t| !t.is_empty())
        .map_or((0, 0), |t| (t.source[0].len(), t.augmented[0].len()));
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string()];
    header.extend((0..n).map(|i| format!("s{i}")));
    header.extend((0..m).map(|i| format!("sc{i}")));
    header.push("r".into());
    w.write_record(&header).expect("in-memory write");
    for trace in traces {
        for t in 0..trace.len() {
            let mut row = vec![t.to_string()];
            row.extend(trace.source[t].iter().map(f64::to_string));
            row.extend(trace.augmented[t].iter().map(f64::to_string));
            row.push(trace.rewards[t].to_string());
            w.write_record(&row).expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

/// Reads the layout written by [`traces_to_csv`]. Source columns are optional.
pub fn traces_from_csv(reader: impl Read) -> Result<Vec<EpisodeTrace>, TraceCsvError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let t_col = find("t").ok_or_else(|| TraceCsvError::MissingColumn("t".into()))?;
    let r_col = find("r").ok_or_else(|| TraceCsvError::MissingColumn("r".into()))?;
    let indexed = |prefix: &str| -> Vec<usize> {
        (0..).map_while(|i| find(&format!("{prefix}{i}"))).collect()
    };
    let s_cols = indexed("s");
    let sc_cols = indexed("sc");
    if sc_cols.is_empty() {
        return Err(TraceCsvError::MissingColumn("sc0".into()));
    }

    let mut traces: Vec<EpisodeTrace> = Vec::new();
    let mut last_t: Option<u64> = None;
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |col: usize, name: &str| -> Result<f64, TraceCsvError> {
            let raw = record.get(col).ok_or_else(|| TraceCsvError::BadRow {
                line,
                message: format!("missing value for `{name}`"),
            })?;
            raw.parse::<f64>().map_err(|_| TraceCsvError::BadRow {
                line,
                message: format!("`{name}` is not a number: `{raw}`"),
            })
        };
        let t = field(t_col, "t")?;
        if t < 0.0 || t.fract() != 0.0 {
            return Err(TraceCsvError::BadRow {
                line,
                message: format!("`t` must be a non-negative integer, got {t}"),
            });
        }
        let t = t as u64;
        if last_t.is_none_or(|prev| t <= prev) {
            traces.push(EpisodeTrace::default());
        }
        last_t = Some(t);
        let source = s_cols
            .iter()
            .enumerate()
            .map(|(i, &c)| field(c, &format!("s{i}")))
            .collect::<Result<Vec<_>, _>>()?;
        let augmented = sc_cols
            .iter()
            .enumerate()
            .map(|(i, &c)| field(c, &format!("sc{i}")))
            .collect::<Result<Vec<_>, _>>()?;
        let reward = field(r_col, "r")?;
        traces
            .last_mut()
            .expect("pushed")
            .push(source, augmented, reward);
    }
    Ok(traces)
}
