//! Shared data types: binary state matrices, node partitions, phi results and sweep results.

use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A T×N binary activity matrix: one row per time step, one column per node.
///
/// Cells are `0` (inactive) or `1` (active). Construction validates the shape, the binary
/// alphabet, label uniqueness and `T >= 2`; the matrix is immutable afterwards.
#[derive(Clone, Debug, PartialEq)]
pub struct StateMatrix {
    values: Vec<u8>,
    steps: usize,
    labels: Vec<String>,
    step_duration_ms: Option<f64>,
    origin_time: Option<i64>,
}

impl StateMatrix {
    /// Validates `rows` and `labels` into a matrix.
    pub fn new<L: Into<String>>(rows: Vec<Vec<u8>>, labels: Vec<L>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        let width = labels.len();
        let steps = rows.len();
        let mut values = Vec::with_capacity(steps * width);
        for (r, row) in rows.into_iter().enumerate() {
            if row.len() != width {
                return Err(if r == 0 && steps > 0 {
                    Error::LabelCountMismatch { labels: width, columns: row.len() }
                } else {
                    Error::RaggedRows { row: r, expected: width, found: row.len() }
                });
            }
            values.extend_from_slice(&row);
        }
        Self::from_flat(values, steps, labels)
    }

    /// Builds a matrix from row-major cell values.
    pub fn from_flat(values: Vec<u8>, steps: usize, labels: Vec<String>) -> Result<Self> {
        let width = labels.len();
        if values.len() != steps * width {
            return Err(Error::RaggedRows {
                row: values.len() / width.max(1),
                expected: width,
                found: values.len() % width.max(1),
            });
        }
        if let Some(pos) = values.iter().position(|&v| v > 1) {
            return Err(Error::NonBinaryValue {
                row: pos / width,
                column: pos % width,
                value: values[pos].to_string(),
            });
        }
        let mut seen = HashSet::with_capacity(width);
        for label in &labels {
            if !seen.insert(label.as_str()) {
                return Err(Error::DuplicateLabel(label.clone()));
            }
        }
        if steps < 2 {
            return Err(Error::TooFewSteps(steps));
        }
        Ok(StateMatrix { values, steps, labels, step_duration_ms: None, origin_time: None })
    }

    pub fn with_step_duration_ms(mut self, ms: f64) -> Self {
        self.step_duration_ms = Some(ms);
        self
    }

    pub fn with_origin_time(mut self, origin: i64) -> Self {
        self.origin_time = Some(origin);
        self
    }

    /// Number of time steps `T`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of nodes `N`.
    pub fn nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn step_duration_ms(&self) -> Option<f64> {
        self.step_duration_ms
    }

    /// Absolute time of step 0, in microseconds since the Unix epoch.
    pub fn origin_time(&self) -> Option<i64> {
        self.origin_time
    }

    #[inline]
    pub fn get(&self, step: usize, node: usize) -> u8 {
        self.values[step * self.nodes() + node]
    }

    #[inline]
    pub fn row(&self, step: usize) -> &[u8] {
        let n = self.nodes();
        &self.values[step * n..(step + 1) * n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u8]> + '_ {
        self.values.chunks_exact(self.nodes().max(1)).take(self.steps)
    }

    pub fn column(&self, node: usize) -> impl Iterator<Item = u8> + '_ {
        (0..self.steps).map(move |t| self.get(t, node))
    }

    /// Population variance of one node's activity.
    pub fn column_variance(&self, node: usize) -> f64 {
        let ones = self.column(node).filter(|&v| v == 1).count() as f64;
        let p = ones / self.steps as f64;
        p * (1.0 - p)
    }

    /// Row codes with bit `i` set when node `i` is active. Requires `N <= 64`.
    pub fn row_codes(&self) -> Result<Vec<u64>> {
        if self.nodes() > 64 {
            return Err(Error::SubsetTooLarge(self.nodes()));
        }
        Ok(self
            .rows()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold(0u64, |acc, (i, &v)| acc | (u64::from(v) << i))
            })
            .collect())
    }

    /// Copy restricted to `nodes` (in the given order).
    pub fn select_nodes(&self, nodes: &[usize]) -> Result<StateMatrix> {
        let mut values = Vec::with_capacity(self.steps * nodes.len());
        for t in 0..self.steps {
            let row = self.row(t);
            values.extend(nodes.iter().map(|&i| row[i]));
        }
        let labels = nodes.iter().map(|&i| self.labels[i].clone()).collect();
        let mut out = StateMatrix::from_flat(values, self.steps, labels)?;
        out.step_duration_ms = self.step_duration_ms;
        out.origin_time = self.origin_time;
        Ok(out)
    }

    /// Writes the `t,<label1>,...,<labelN>` CSV form with LF line endings.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        let mut header = Vec::with_capacity(self.nodes() + 1);
        header.push("t".to_string());
        header.extend(self.labels.iter().cloned());
        out.write_record(&header)?;
        for (t, row) in self.rows().enumerate() {
            let mut record = Vec::with_capacity(row.len() + 1);
            record.push(t.to_string());
            record.extend(row.iter().map(|v| if *v == 1 { "1" } else { "0" }.to_string()));
            out.write_record(&record)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("labels are valid UTF-8")
    }

    /// Parses the CSV form written by [`StateMatrix::write_csv`].
    pub fn read_csv<R: Read>(reader: R) -> Result<StateMatrix> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.get(0).map(str::trim) != Some("t") {
            return Err(Error::Parse { line: 1, message: "header must start with `t`".into() });
        }
        let labels: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
        let mut values = Vec::new();
        let mut steps = 0;
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            let line = i + 2;
            if record.len() != labels.len() + 1 {
                return Err(Error::RaggedRows { row: i, expected: labels.len(), found: record.len().saturating_sub(1) });
            }
            let t: usize = record[0].trim().parse().map_err(|_| Error::Parse {
                line,
                message: format!("step index {:?} is not an integer", &record[0]),
            })?;
            if t != steps {
                return Err(Error::Parse { line, message: format!("expected step index {steps}, found {t}") });
            }
            for (c, cell) in record.iter().skip(1).enumerate() {
                match cell.trim() {
                    "0" => values.push(0),
                    "1" => values.push(1),
                    other => {
                        return Err(Error::NonBinaryValue { row: i, column: c, value: other.to_string() })
                    }
                }
            }
            steps += 1;
        }
        StateMatrix::from_flat(values, steps, labels)
    }
}

/// Validated constructor, usable as a free function.
pub fn make_state_matrix<L: Into<String>>(rows: Vec<Vec<u8>>, labels: Vec<L>) -> Result<StateMatrix> {
    StateMatrix::new(rows, labels)
}

/// An ordered collection of disjoint, non-empty node-index blocks covering `0..n`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    blocks: Vec<Vec<usize>>,
}

impl Partition {
    pub fn new(blocks: Vec<Vec<usize>>, n_nodes: usize) -> Result<Self> {
        let mut seen = vec![false; n_nodes];
        for block in &blocks {
            if block.is_empty() {
                return Err(Error::InvalidPartition("empty block".into()));
            }
            for &i in block {
                if i >= n_nodes {
                    return Err(Error::InvalidPartition(format!("node {i} out of range for {n_nodes} nodes")));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::InvalidPartition(format!("node {i} appears in more than one block")));
                }
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidPartition(format!("node {missing} is not covered")));
        }
        Ok(Partition { blocks })
    }

    /// Splits `0..n` into the nodes whose bit is set in `mask` and the rest.
    pub fn from_mask(mask: u64, n_nodes: usize) -> Result<Self> {
        let (inside, outside): (Vec<usize>, Vec<usize>) = (0..n_nodes).partition(|&i| mask >> i & 1 == 1);
        Partition::new(vec![inside, outside], n_nodes)
    }

    /// Every node in its own block.
    pub fn atomic(n_nodes: usize) -> Self {
        Partition { blocks: (0..n_nodes).map(|i| vec![i]).collect() }
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn n_nodes(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    pub fn is_bipartition(&self) -> bool {
        self.blocks.len() == 2
    }

    pub fn is_atomic(&self) -> bool {
        self.blocks.iter().all(|b| b.len() == 1)
    }

    /// Re-indexes every node through `map` (e.g. back to an unreduced matrix).
    pub fn remap(&self, map: &[usize]) -> Partition {
        Partition { blocks: self.blocks.iter().map(|b| b.iter().map(|&i| map[i]).collect()).collect() }
    }

    /// Block members as node labels.
    pub fn labelled(&self, labels: &[String]) -> Vec<Vec<String>> {
        self.blocks.iter().map(|b| b.iter().map(|&i| labels[i].clone()).collect()).collect()
    }

    /// Canonical form: blocks sorted internally and ordered by smallest member.
    pub fn canonical(&self) -> Partition {
        let mut blocks: Vec<Vec<usize>> = self
            .blocks
            .iter()
            .map(|b| {
                let mut b = b.clone();
                b.sort_unstable();
                b
            })
            .collect();
        blocks.sort();
        Partition { blocks }
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .blocks
            .iter()
            .map(|b| format!("{{{}}}", b.iter().map(usize::to_string).collect::<Vec<_>>().join(",")))
            .collect();
        f.write_str(&parts.join("|"))
    }
}

/// Which phi estimator produced a value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhiMethod {
    /// Discrete mutual information at the minimum information bipartition.
    Empirical,
    /// Linear-Gaussian estimator at the minimum information bipartition.
    Autoregressive,
    /// Linear-Gaussian estimator over the atomic partition.
    Atomic,
}

impl PhiMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            PhiMethod::Empirical => "empirical",
            PhiMethod::Autoregressive => "autoregressive",
            PhiMethod::Atomic => "atomic",
        }
    }
}

impl std::str::FromStr for PhiMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "empirical" | "e" => Ok(PhiMethod::Empirical),
            "autoregressive" | "ar" => Ok(PhiMethod::Autoregressive),
            "atomic" => Ok(PhiMethod::Atomic),
            _ => Err(Error::InvalidConfig(format!("unknown phi method {s:?}"))),
        }
    }
}

/// A phi value in bits with the context needed to interpret it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiResult {
    pub value: f64,
    pub method: PhiMethod,
    /// Partition over the indices of the matrix the computation was asked about.
    pub partition: Partition,
    pub tau: usize,
    /// Labels removed by stability correction, in removal order.
    pub dropped_nodes: Vec<String>,
    pub retries: usize,
    /// Number of nodes the value was computed on.
    pub n_nodes: usize,
    pub valid: bool,
}

impl PhiResult {
    /// A result computed directly on an `n_nodes` system, validity filled in from the value.
    pub fn direct(value: f64, method: PhiMethod, partition: Partition, tau: usize) -> Self {
        let n_nodes = partition.n_nodes();
        PhiResult {
            value,
            method,
            partition,
            tau,
            dropped_nodes: Vec::new(),
            retries: 0,
            n_nodes,
            valid: crate::phi::validate_phi(value, n_nodes),
        }
    }
}

/// Mean phi (with standard error) over a grid of a swept parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub parameter_values: Vec<f64>,
    pub mean_phi: Vec<f64>,
    pub stderr_phi: Vec<f64>,
    pub argmax: f64,
}

impl SweepResult {
    /// Assembles a sweep and locates its maximum (ties go to the smallest parameter).
    pub fn new(parameter_values: Vec<f64>, mean_phi: Vec<f64>, stderr_phi: Vec<f64>) -> Result<Self> {
        if parameter_values.len() != mean_phi.len() {
            return Err(Error::LengthMismatch(parameter_values.len(), mean_phi.len()));
        }
        if parameter_values.len() != stderr_phi.len() {
            return Err(Error::LengthMismatch(parameter_values.len(), stderr_phi.len()));
        }
        let mut best: Option<(f64, f64)> = None;
        for (&p, &m) in parameter_values.iter().zip(&mean_phi) {
            if !m.is_finite() {
                continue;
            }
            best = match best {
                Some((bp, bm)) if m < bm || (m == bm && p >= bp) => Some((bp, bm)),
                _ => Some((p, m)),
            };
        }
        let argmax = best.map(|(p, _)| p).ok_or(Error::NoValidResults)?;
        Ok(SweepResult { parameter_values, mean_phi, stderr_phi, argmax })
    }

    pub fn len(&self) -> usize {
        self.parameter_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parameter_values.is_empty()
    }

    /// `parameter,mean_phi,stderr` CSV.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        out.write_record(["parameter", "mean_phi", "stderr"])?;
        for i in 0..self.len() {
            out.write_record([
                format_number(self.parameter_values[i]),
                format_number(self.mean_phi[i]),
                format_number(self.stderr_phi[i]),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Shortest round-tripping decimal form; integers print without a fractional part.
pub fn format_number(x: f64) -> String {
    if x.is_finite() && x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_valid_matrix() {
        let m = make_state_matrix(vec![vec![0, 1], vec![1, 0]], vec!["a", "b"]).unwrap();
        assert_eq!(m.steps(), 2);
        assert_eq!(m.nodes(), 2);
        assert_eq!(m.get(0, 1), 1);
        assert_eq!(m.row(1), &[1, 0]);
    }

    #[test]
    fn rejects_non_binary() {
        let err = make_state_matrix(vec![vec![0, 2], vec![0, 0]], vec!["a", "b"]).unwrap_err();
        assert!(matches!(err, Error::NonBinaryValue { row: 0, column: 1, .. }));
        let err = make_state_matrix(vec![vec![0, 2]], vec!["a", "b"]).unwrap_err();
        assert!(matches!(err, Error::NonBinaryValue { .. }));
    }

    #[test]
    fn rejects_single_row() {
        let err = make_state_matrix(vec![vec![0, 1]], vec!["a", "b"]).unwrap_err();
        assert!(matches!(err, Error::TooFewSteps(1)));
    }

    #[test]
    fn rejects_ragged_and_duplicates() {
        let err = make_state_matrix(vec![vec![0, 1], vec![1]], vec!["a", "b"]).unwrap_err();
        assert!(matches!(err, Error::RaggedRows { row: 1, .. }));
        let err = make_state_matrix(vec![vec![0, 1], vec![1, 1]], vec!["a", "a"]).unwrap_err();
        assert!(matches!(err, Error::DuplicateLabel(_)));
    }

    #[test]
    fn csv_layout() {
        let m = make_state_matrix(vec![vec![0, 1], vec![1, 0], vec![1, 1]], vec!["a", "b"]).unwrap();
        assert_eq!(m.to_csv_string(), "t,a,b\n0,0,1\n1,1,0\n2,1,1\n");
        let back = StateMatrix::read_csv(m.to_csv_string().as_bytes()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn csv_rejects_bad_cells() {
        let err = StateMatrix::read_csv("t,a\n0,1\n1,x\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::NonBinaryValue { .. }));
        let err = StateMatrix::read_csv("t,a\n0,1\n2,0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }

    #[test]
    fn partitions() {
        assert!(Partition::new(vec![vec![0, 1], vec![2]], 3).is_ok());
        assert!(Partition::new(vec![vec![0, 1], vec![1, 2]], 3).is_err());
        assert!(Partition::new(vec![vec![0], vec![2]], 3).is_err());
        assert!(Partition::new(vec![vec![0, 1, 2], vec![]], 3).is_err());
        let p = Partition::from_mask(0b101, 3).unwrap();
        assert_eq!(p.blocks(), &[vec![0, 2], vec![1]]);
        assert!(p.is_bipartition());
        assert!(Partition::atomic(4).is_atomic());
        assert_eq!(p.to_string(), "{0,2}|{1}");
    }

    #[test]
    fn sweep_argmax_prefers_smallest_parameter_on_ties() {
        let s = SweepResult::new(vec![1.0, 2.0, 3.0], vec![0.5, 0.9, 0.9], vec![0.0; 3]).unwrap();
        assert_eq!(s.argmax, 2.0);
        assert!(SweepResult::new(vec![1.0], vec![0.0, 1.0], vec![0.0]).is_err());
    }
}
