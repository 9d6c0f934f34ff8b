//! Encoders from raw interaction logs to binary state matrices: per-speaker volume envelopes,
//! chat transcripts, article edit histories and packet traces.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, NaiveDateTime, SecondsFormat, TimeDelta, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{PacketGraph, PacketRecord};
use crate::state::StateMatrix;

// ---------------------------------------------------------------------------------------------
// speaking turns

/// Volume levels of one speaker's microphone, one sample per step.
#[derive(Clone, Debug, PartialEq)]
pub struct VolumeTrack {
    pub speaker: String,
    pub samples: Vec<f64>,
}

/// Turn detection parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TurnParams {
    /// Minimum volume for a speaker to count as talking.
    pub threshold: f64,
    pub step_ms: f64,
    /// Silent gaps of at most this length between two turns of one speaker are filled.
    pub merge_gap_ms: f64,
    /// Among simultaneous speakers, those quieter than this fraction of the loudest are muted
    /// as crosstalk.
    pub crosstalk_margin: f64,
}

impl TurnParams {
    pub fn with_threshold(threshold: f64) -> Self {
        TurnParams { threshold, step_ms: 200.0, merge_gap_ms: 400.0, crosstalk_margin: 0.5 }
    }
}

/// Thresholds volumes, suppresses crosstalk, then merges short pauses within each speaker's turns.
pub fn encode_turns(tracks: &[VolumeTrack], params: &TurnParams) -> Result<StateMatrix> {
    if !(params.threshold > 0.0) {
        return Err(Error::NonPositiveThreshold(params.threshold));
    }
    if !(params.step_ms > 0.0) {
        return Err(Error::NonPositiveDelta(params.step_ms));
    }
    let first = tracks.first().ok_or_else(|| Error::MisalignedTracks("no tracks".into()))?;
    let steps = first.samples.len();
    for track in tracks {
        if track.samples.len() != steps {
            return Err(Error::MisalignedTracks(format!(
                "track {:?} has {} samples, expected {steps}",
                track.speaker,
                track.samples.len()
            )));
        }
        if track.samples.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(Error::MisalignedTracks(format!("track {:?} has negative or non-finite volume", track.speaker)));
        }
    }
    let n = tracks.len();
    let mut active = vec![vec![false; steps]; n];
    for t in 0..steps {
        let loud: Vec<usize> = (0..n).filter(|&k| tracks[k].samples[t] >= params.threshold).collect();
        let peak = loud.iter().map(|&k| tracks[k].samples[t]).fold(0.0, f64::max);
        for &k in &loud {
            active[k][t] = loud.len() == 1 || tracks[k].samples[t] >= params.crosstalk_margin * peak;
        }
    }
    let max_gap = (params.merge_gap_ms / params.step_ms + 1e-9).floor() as usize;
    for column in &mut active {
        fill_short_gaps(column, max_gap);
    }
    let mut values = Vec::with_capacity(steps * n);
    for t in 0..steps {
        values.extend(active.iter().map(|c| u8::from(c[t])));
    }
    let labels = tracks.iter().map(|t| t.speaker.clone()).collect();
    Ok(StateMatrix::from_flat(values, steps, labels)?.with_step_duration_ms(params.step_ms))
}

/// Fills inactive runs of length `<= max_gap` that sit between two active steps.
fn fill_short_gaps(column: &mut [bool], max_gap: usize) {
    let mut last_active: Option<usize> = None;
    for t in 0..column.len() {
        if column[t] {
            if let Some(prev) = last_active {
                let gap = t - prev - 1;
                if gap > 0 && gap <= max_gap {
                    column[prev + 1..t].iter_mut().for_each(|c| *c = true);
                }
            }
            last_active = Some(t);
        }
    }
}

/// Reads the `step,<speaker1>,...` volume CSV.
pub fn read_volume_tracks<R: Read>(reader: R) -> Result<Vec<VolumeTrack>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.get(0) != Some("step") || header.len() < 2 {
        return Err(Error::Parse { line: 1, message: "expected header step,<speaker1>,...".into() });
    }
    let mut tracks: Vec<VolumeTrack> = header
        .iter()
        .skip(1)
        .map(|s| VolumeTrack { speaker: s.to_string(), samples: Vec::new() })
        .collect();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        for (k, cell) in record.iter().skip(1).enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| Error::Parse { line: i + 2, message: format!("volume {cell:?} is not a number") })?;
            tracks[k].samples.push(v);
        }
    }
    Ok(tracks)
}

// ---------------------------------------------------------------------------------------------
// chat

/// One line of a chat transcript.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChatLine {
    pub speaker: String,
    pub text: String,
}

/// One step per line, with only the line's author active.
pub fn encode_chat(lines: &[ChatLine], roster: &[String]) -> Result<StateMatrix> {
    if lines.len() < 2 {
        return Err(Error::TooFewLines(lines.len()));
    }
    let column: HashMap<&str, usize> = roster.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut values = vec![0u8; lines.len() * roster.len()];
    for (t, line) in lines.iter().enumerate() {
        let k = *column.get(line.speaker.as_str()).ok_or_else(|| Error::UnknownSpeaker(line.speaker.clone()))?;
        values[t * roster.len() + k] = 1;
    }
    StateMatrix::from_flat(values, lines.len(), roster.to_vec())
}

/// Speakers in order of first appearance.
pub fn chat_roster(lines: &[ChatLine]) -> Vec<String> {
    let mut roster: Vec<String> = Vec::new();
    for line in lines {
        if !roster.contains(&line.speaker) {
            roster.push(line.speaker.clone());
        }
    }
    roster
}

/// Reads the `line_index,speaker,text` chat CSV.
pub fn read_chat<R: Read>(reader: R) -> Result<Vec<ChatLine>> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != ["line_index", "speaker", "text"] {
        return Err(Error::Parse { line: 1, message: "expected header line_index,speaker,text".into() });
    }
    let mut lines = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != 3 {
            return Err(Error::Parse { line: i + 2, message: "expected 3 fields".into() });
        }
        lines.push(ChatLine { speaker: record[1].trim().to_string(), text: record[2].to_string() });
    }
    Ok(lines)
}

// ---------------------------------------------------------------------------------------------
// edits

/// Article quality classes, lowest to highest.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Quality {
    C,
    B,
    GA,
    A,
    FA,
}

impl Quality {
    pub const ALL: [Quality; 5] = [Quality::C, Quality::B, Quality::GA, Quality::A, Quality::FA];

    /// 0 for C up to 4 for FA.
    pub fn rank(&self) -> usize {
        *self as usize
    }
}

impl fmt::Display for Quality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Quality::C => "C",
            Quality::B => "B",
            Quality::GA => "GA",
            Quality::A => "A",
            Quality::FA => "FA",
        })
    }
}

impl FromStr for Quality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "C" => Ok(Quality::C),
            "B" => Ok(Quality::B),
            "GA" => Ok(Quality::GA),
            "A" => Ok(Quality::A),
            "FA" => Ok(Quality::FA),
            other => Err(Error::UnknownQuality(other.to_string())),
        }
    }
}

/// One revision of an article.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EditRecord {
    pub timestamp: DateTime<Utc>,
    pub article: String,
    pub editor: String,
    /// Set when this edit changed the article's rating.
    pub quality_after: Option<Quality>,
}

/// The edits made in the `window_days` days before one quality change.
#[derive(Clone, Debug, PartialEq)]
pub struct QualityWindow {
    pub article: String,
    pub new_quality: Quality,
    pub window_days: u32,
    pub change_time: DateTime<Utc>,
    pub edits: Vec<EditRecord>,
    /// Distinct editors in order of first edit inside the window.
    pub editors: Vec<String>,
}

/// Fewest distinct editors a window may have.
pub const MIN_WINDOW_EDITORS: usize = 3;

/// One window per quality change, over `[change - window_days, change)`; windows with fewer
/// than three distinct editors are dropped. An edit is a quality change when it carries a
/// label different from the last label seen (the first label always counts).
pub fn extract_quality_windows(edits: &[EditRecord], window_days: u32) -> Result<Vec<QualityWindow>> {
    if window_days == 0 {
        return Err(Error::InvalidConfig("window_days must be positive".into()));
    }
    if let Some(first) = edits.first() {
        if let Some(other) = edits.iter().find(|e| e.article != first.article) {
            return Err(Error::MixedArticles(first.article.clone(), other.article.clone()));
        }
    }
    if let Some(i) = edits.windows(2).position(|w| w[1].timestamp < w[0].timestamp) {
        return Err(Error::UnsortedInput(i + 1));
    }
    let span = TimeDelta::days(i64::from(window_days));
    let mut windows = Vec::new();
    let mut last_quality: Option<Quality> = None;
    for (i, edit) in edits.iter().enumerate() {
        let Some(q) = edit.quality_after else { continue };
        if last_quality == Some(q) {
            continue;
        }
        last_quality = Some(q);
        let start = edit.timestamp - span;
        let inside: Vec<EditRecord> = edits[..i]
            .iter()
            .filter(|e| e.timestamp >= start && e.timestamp < edit.timestamp)
            .cloned()
            .collect();
        let mut editors: Vec<String> = Vec::new();
        for e in &inside {
            if !editors.contains(&e.editor) {
                editors.push(e.editor.clone());
            }
        }
        if editors.len() < MIN_WINDOW_EDITORS {
            continue;
        }
        windows.push(QualityWindow {
            article: edit.article.clone(),
            new_quality: q,
            window_days,
            change_time: edit.timestamp,
            edits: inside,
            editors,
        });
    }
    Ok(windows)
}

/// One step per edit, with only its editor active; columns are the window's editors.
pub fn encode_edits(window: &QualityWindow) -> Result<StateMatrix> {
    if window.edits.len() < 2 {
        return Err(Error::TooFewEdits(window.edits.len()));
    }
    let column: HashMap<&str, usize> =
        window.editors.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let n = window.editors.len();
    let mut values = vec![0u8; window.edits.len() * n];
    for (t, e) in window.edits.iter().enumerate() {
        let k = *column
            .get(e.editor.as_str())
            .ok_or_else(|| Error::UnknownSpeaker(e.editor.clone()))?;
        values[t * n + k] = 1;
    }
    let origin = window.edits[0].timestamp.timestamp_micros();
    Ok(StateMatrix::from_flat(values, window.edits.len(), window.editors.clone())?.with_origin_time(origin))
}

/// Groups records by article, keeping each article's records in input order.
pub fn split_by_article(edits: Vec<EditRecord>) -> BTreeMap<String, Vec<EditRecord>> {
    let mut out: BTreeMap<String, Vec<EditRecord>> = BTreeMap::new();
    for e in edits {
        out.entry(e.article.clone()).or_default().push(e);
    }
    out
}

/// Parses RFC 3339 timestamps, naive `YYYY-MM-DDTHH:MM:SS` (taken as UTC) or plain dates.
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(t.and_utc());
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|t| t.and_utc())
}

pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

/// Reads the `timestamp_iso8601,article,editor,quality_after` edit log.
pub fn read_edits<R: Read>(reader: R) -> Result<Vec<EditRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != ["timestamp_iso8601", "article", "editor", "quality_after"] {
        return Err(Error::Parse {
            line: 1,
            message: "expected header timestamp_iso8601,article,editor,quality_after".into(),
        });
    }
    let mut edits = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let line = i + 2;
        if record.len() != 4 {
            return Err(Error::Parse { line, message: "expected 4 fields".into() });
        }
        let timestamp = parse_timestamp(&record[0])
            .ok_or_else(|| Error::Parse { line, message: format!("bad timestamp {:?}", &record[0]) })?;
        let quality_after = match record[3].trim() {
            "" => None,
            q => Some(q.parse().map_err(|_| Error::Parse { line, message: format!("unknown quality {q:?}") })?),
        };
        edits.push(EditRecord { timestamp, article: record[1].to_string(), editor: record[2].to_string(), quality_after });
    }
    Ok(edits)
}

pub fn write_edits<W: Write>(writer: W, edits: &[EditRecord]) -> Result<()> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    out.write_record(["timestamp_iso8601", "article", "editor", "quality_after"])?;
    for e in edits {
        let q = e.quality_after.map(|q| q.to_string()).unwrap_or_default();
        out.write_record([format_timestamp(&e.timestamp).as_str(), &e.article, &e.editor, &q])?;
    }
    out.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------------------------
// packets

fn bin_count(span_ms: f64, delta_ms: f64) -> usize {
    ((span_ms / delta_ms) - 1e-9).ceil().max(0.0) as usize
}

/// Activity of `nodes` in bins of `delta_ms` starting at timestamp 0: a node is active in bin
/// `k` when it sent at least one packet in `[k·δ, (k+1)·δ)`. Receiving does not count.
pub fn encode_packets(packets: &[PacketRecord], nodes: &[String], delta_ms: f64, span_ms: f64) -> Result<StateMatrix> {
    encode_packets_from(packets, nodes, 0, delta_ms, span_ms)
}

/// [`encode_packets`] with bins starting at `origin_us`.
pub fn encode_packets_from(
    packets: &[PacketRecord],
    nodes: &[String],
    origin_us: i64,
    delta_ms: f64,
    span_ms: f64,
) -> Result<StateMatrix> {
    if nodes.is_empty() {
        return Err(Error::EmptyNodeSet);
    }
    if !(delta_ms > 0.0) {
        return Err(Error::NonPositiveDelta(delta_ms));
    }
    let column: HashMap<&str, usize> = nodes.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let steps = bin_count(span_ms, delta_ms);
    let n = nodes.len();
    let mut values = vec![0u8; steps * n];
    let delta_us = delta_ms * 1_000.0;
    for p in packets {
        let Some(&k) = column.get(p.src.as_str()) else { continue };
        if let Some(bin) = bin_of(p.timestamp_us, origin_us, delta_us, steps) {
            values[bin * n + k] = 1;
        }
    }
    Ok(StateMatrix::from_flat(values, steps, nodes.to_vec())?
        .with_step_duration_ms(delta_ms)
        .with_origin_time(origin_us))
}

fn bin_of(ts: i64, origin_us: i64, delta_us: f64, steps: usize) -> Option<usize> {
    if ts < origin_us {
        return None;
    }
    let bin = ((ts - origin_us) as f64 / delta_us).floor() as usize;
    (bin < steps).then_some(bin)
}

/// Send times per graph node, for encoding many node subsets of one trace.
#[derive(Clone, Debug)]
pub struct SendTimes {
    times: Vec<Vec<i64>>,
    labels: Vec<String>,
    origin_us: i64,
    end_us: i64,
}

impl SendTimes {
    pub fn new(graph: &PacketGraph, packets: &[PacketRecord]) -> Self {
        let mut times = vec![Vec::new(); graph.len()];
        for p in packets {
            if let Some(i) = graph.index_of(&p.src) {
                times[i].push(p.timestamp_us);
            }
        }
        let origin_us = packets.iter().map(|p| p.timestamp_us).min().unwrap_or(0);
        let end_us = packets.iter().map(|p| p.timestamp_us).max().unwrap_or(0);
        SendTimes { times, labels: graph.ids().to_vec(), origin_us, end_us }
    }

    /// Earliest packet timestamp.
    pub fn origin_us(&self) -> i64 {
        self.origin_us
    }

    /// Time from the first packet to just past the last, in milliseconds.
    pub fn span_ms(&self) -> f64 {
        (self.end_us - self.origin_us + 1) as f64 / 1_000.0
    }

    /// Bins the send activity of graph nodes `nodes` over the whole trace.
    pub fn encode(&self, nodes: &[usize], delta_ms: f64) -> Result<StateMatrix> {
        if nodes.is_empty() {
            return Err(Error::EmptyNodeSet);
        }
        if !(delta_ms > 0.0) {
            return Err(Error::NonPositiveDelta(delta_ms));
        }
        let steps = bin_count(self.span_ms(), delta_ms);
        let n = nodes.len();
        let mut values = vec![0u8; steps * n];
        let delta_us = delta_ms * 1_000.0;
        for (k, &node) in nodes.iter().enumerate() {
            for &ts in &self.times[node] {
                if let Some(bin) = bin_of(ts, self.origin_us, delta_us, steps) {
                    values[bin * n + k] = 1;
                }
            }
        }
        let labels = nodes.iter().map(|&i| self.labels[i].clone()).collect();
        Ok(StateMatrix::from_flat(values, steps, labels)?
            .with_step_duration_ms(delta_ms)
            .with_origin_time(self.origin_us))
    }
}
