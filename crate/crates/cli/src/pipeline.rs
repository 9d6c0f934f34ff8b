//! End-to-end runs. Each writes intermediate state matrices (or node samples) that a later
//! `--resume` run reads back instead of recomputing.

use std::io::BufRead;
use std::path::{Path, PathBuf};

use groupphi::ingest::{encode_chat, chat_roster, encode_turns, read_chat, read_volume_tracks, Quality, SendTimes};
use groupphi::phi::stabilized_phi;
use groupphi::sampling::build_packet_graph;
use groupphi::stats::{kendall_tau, ols_fit, pearson_r, wilcoxon_z, DesignMatrix};
use groupphi::svg::ChartOptions;
use groupphi::sweep::{sweep_prepared, sweep_time_delay_groups, PacketStudy};
use groupphi::{Error, PhiMethod, StateMatrix};
use serde_json::{json, Value};

use crate::commands::{
    context, csv_line, delta_chart, delta_grid, file_stem, phi_method, quality_windows, read_packet_file,
    required_output, sample_config, single_input, tau_grid, turn_params, write_samples, write_windows,
};
use crate::output::{create_dir, open, read_states, Context};
use crate::{usage, CliError, CliResult, Global, PipelineCommand};

pub fn run(g: &Global, cmd: &PipelineCommand) -> CliResult<()> {
    match cmd {
        PipelineCommand::Study1 { scores, resume } => study1(g, scores.as_deref(), *resume),
        PipelineCommand::Study2 { max_edits, resume } => study2(g, *max_edits, *resume),
        PipelineCommand::Study3 { resume } => study3(g, *resume),
    }
}

fn first_line(path: &Path) -> CliResult<String> {
    let mut line = String::new();
    open(path)?.read_line(&mut line).map_err(|e| crate::output::file_error(path, e))?;
    Ok(line.trim().to_string())
}

fn encode_group(g: &Global, path: &Path) -> CliResult<StateMatrix> {
    let header = first_line(path)?;
    let kind = header.split(',').next().unwrap_or("").trim();
    match kind {
        "step" => Ok(encode_turns(&read_volume_tracks(open(path)?)?, &turn_params(g, None)?)?),
        "line_index" => {
            let lines = read_chat(open(path)?)?;
            Ok(encode_chat(&lines, &chat_roster(&lines))?)
        }
        "t" => read_states(path),
        _ => Err(Error::Parse { line: 1, message: format!("{}: unrecognised header {header:?}", path.display()) }.into()),
    }
}

fn group_name(path: &Path) -> String {
    file_stem(&path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default())
}

fn write_json(ctx: &Context<'_>, path: PathBuf, key: &str, payload: Value) -> CliResult<()> {
    ctx.emit_json(Some(&path), key, payload)
}

fn read_scores(path: &Path) -> CliResult<Vec<(String, f64)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(path)?);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(Error::from)?;
        let score = rec
            .get(1)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse { line: i + 2, message: "expected group,score".into() })?;
        out.push((rec.get(0).unwrap_or("").to_string(), score));
    }
    Ok(out)
}

fn phi_or_null(v: Option<f64>) -> String {
    v.map(groupphi::state::format_number).unwrap_or_default()
}

fn study1(g: &Global, scores: Option<&Path>, resume: bool) -> CliResult<()> {
    if g.input.is_empty() {
        return usage("--input is required");
    }
    let out = required_output(g)?;
    let states_dir = out.join("states");
    create_dir(&states_dir)?;
    let method = phi_method(g, PhiMethod::Empirical)?;
    let taus = tau_grid(g)?;
    let ctx = context(g, "pipeline study1", json!({ "method": method.as_str(), "tau_grid": taus }));
    let mut names = Vec::new();
    let mut groups = Vec::new();
    for path in &g.input {
        let name = group_name(path);
        let cached = states_dir.join(format!("{name}.csv"));
        let states = if resume && cached.exists() {
            read_states(&cached)?
        } else {
            let s = encode_group(g, path)?;
            ctx.emit_states(Some(&cached), &s)?;
            s
        };
        names.push(name);
        groups.push(states);
    }
    let sweep = sweep_time_delay_groups(&groups, &taus, method)?;
    let chart = ChartOptions {
        title: format!("{} phi by time delay", method.as_str()),
        x_label: "τ (steps)".into(),
        y_label: "mean phi (bits)".into(),
        ..Default::default()
    };
    ctx.emit_sweep(Some(&out.join("sweep.csv")), &sweep, chart)?;

    let best = sweep.argmax as usize;
    let mut table = String::from("group,phi,valid,n_nodes,retries,dropped_nodes\n");
    let mut per_group = Vec::new();
    for (name, states) in names.iter().zip(&groups) {
        let r = match stabilized_phi(states, best, method) {
            Ok(r) => Some(r),
            Err(Error::ExhaustedNodes) => None,
            Err(e) => return Err(e.into()),
        };
        table.push_str(&csv_line(&[
            name.clone(),
            phi_or_null(r.as_ref().map(|r| r.value)),
            r.as_ref().is_some_and(|r| r.valid).to_string(),
            r.as_ref().map_or(0, |r| r.n_nodes).to_string(),
            r.as_ref().map_or(0, |r| r.retries).to_string(),
            r.as_ref().map(|r| r.dropped_nodes.join(" ")).unwrap_or_default(),
        ]));
        per_group.push((name.clone(), r.filter(|r| r.valid).map(|r| r.value)));
    }
    ctx.emit_csv(Some(&out.join("phi.csv")), table.as_bytes())?;

    let correlation = match scores {
        None => Value::Null,
        Some(path) => {
            let scores = read_scores(path)?;
            let (xs, ys): (Vec<f64>, Vec<f64>) = per_group
                .iter()
                .filter_map(|(n, v)| Some((v.as_ref().copied()?, scores.iter().find(|(s, _)| s == n)?.1)))
                .unzip();
            json!({ "pearson_r": pearson_r(&xs, &ys)?, "n": xs.len() })
        }
    };
    let summary = json!({
        "best_tau": best,
        "groups": names,
        "sweep": sweep,
        "score_correlation": correlation,
    });
    write_json(&ctx, out.join("summary.json"), "summary", summary)
}

struct WindowRow {
    file: String,
    article: String,
    quality: Quality,
    editors: usize,
    edits: usize,
}

fn read_window_index(dir: &Path) -> CliResult<Vec<WindowRow>> {
    let index = dir.join("windows.csv");
    let mut rdr = csv::Reader::from_reader(open(&index)?);
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(Error::from)?;
        let bad = || Error::Parse { line: i + 2, message: format!("{}: malformed row", index.display()) };
        rows.push(WindowRow {
            file: rec.get(0).ok_or_else(bad)?.to_string(),
            article: rec.get(1).ok_or_else(bad)?.to_string(),
            quality: rec.get(2).ok_or_else(bad)?.parse().map_err(|_| bad())?,
            editors: rec.get(4).and_then(|v| v.parse().ok()).ok_or_else(bad)?,
            edits: rec.get(5).and_then(|v| v.parse().ok()).ok_or_else(bad)?,
        });
    }
    Ok(rows)
}

fn study2(g: &Global, max_edits: Option<usize>, resume: bool) -> CliResult<()> {
    let input = single_input(g)?;
    let out = required_output(g)?;
    let window_days = g.window_days.unwrap_or(30);
    let method = phi_method(g, PhiMethod::Atomic)?;
    let ctx = context(
        g,
        "pipeline study2",
        json!({ "method": method.as_str(), "window_days": window_days, "max_edits": max_edits }),
    );
    let states_dir = out.join("states");
    if !(resume && states_dir.join("windows.csv").exists()) {
        let windows = quality_windows(input, window_days, max_edits)?;
        write_windows(&ctx, &states_dir, &windows)?;
    }
    let rows = read_window_index(&states_dir)?;

    let mut table = String::from("file,article,quality,editors,edits,edits_per_editor,phi,valid\n");
    let mut valid: Vec<(&WindowRow, f64)> = Vec::new();
    for row in &rows {
        let states = read_states(&states_dir.join(&row.file))?;
        let r = match stabilized_phi(&states, 1, method) {
            Ok(r) => Some(r),
            Err(Error::ExhaustedNodes) => None,
            Err(e) => return Err(e.into()),
        };
        let ok = r.as_ref().is_some_and(|r| r.valid);
        table.push_str(&csv_line(&[
            row.file.clone(),
            row.article.clone(),
            row.quality.to_string(),
            row.editors.to_string(),
            row.edits.to_string(),
            groupphi::state::format_number(row.edits as f64 / row.editors as f64),
            phi_or_null(r.as_ref().map(|r| r.value)),
            ok.to_string(),
        ]));
        if let Some(r) = r.filter(|r| r.valid) {
            valid.push((row, r.value));
        }
    }
    ctx.emit_csv(Some(&out.join("windows_phi.csv")), table.as_bytes())?;

    let phis: Vec<f64> = valid.iter().map(|v| v.1).collect();
    let ranks: Vec<f64> = valid.iter().map(|v| v.0.quality.rank() as f64).collect();
    let tau = outcome(kendall_tau(&phis, &ranks).map(|t| json!(t)));
    let levels = [Quality::C, Quality::B, Quality::GA, Quality::A, Quality::FA];
    let by_level = |q: Quality| -> Vec<f64> { valid.iter().filter(|v| v.0.quality == q).map(|v| v.1).collect() };
    let pairwise: Vec<Value> = levels
        .windows(2)
        .map(|w| {
            let (lo, hi) = (by_level(w[0]), by_level(w[1]));
            json!({
                "lower": w[0].to_string(),
                "higher": w[1].to_string(),
                "n_lower": lo.len(),
                "n_higher": hi.len(),
                "z": outcome(wilcoxon_z(&lo, &hi).map(|z| json!(z))),
            })
        })
        .collect();
    let regression = outcome(regress(&valid, &levels));
    let stats = json!({
        "windows": rows.len(),
        "valid_windows": valid.len(),
        "kendall_tau_phi_quality": tau,
        "wilcoxon_adjacent_levels": pairwise,
        "regression": regression,
    });
    write_json(&ctx, out.join("stats.json"), "stats", stats)
}

/// A statistic, or the reason it could not be computed.
fn outcome(r: groupphi::Result<Value>) -> Value {
    r.unwrap_or_else(|e| json!({ "error": e.kind(), "message": e.to_string() }))
}

fn regress(valid: &[(&WindowRow, f64)], levels: &[Quality]) -> groupphi::Result<Value> {
    let n = valid.len();
    let present: Vec<Quality> = levels.iter().copied().filter(|q| valid.iter().any(|v| v.0.quality == *q)).collect();
    let Some(reference) = present.first().copied() else { return Err(Error::EmptySample) };
    let editors: Vec<f64> = valid.iter().map(|v| v.0.editors as f64).collect();
    let per_editor: Vec<f64> = valid.iter().map(|v| v.0.edits as f64 / v.0.editors as f64).collect();
    let quality: Vec<Quality> = valid.iter().map(|v| v.0.quality).collect();
    let design = DesignMatrix::with_intercept(n)
        .numeric("editors", &editors)?
        .numeric("edits_per_editor", &per_editor)?
        .categorical("quality", &quality, &present, &reference)?;
    let phis: Vec<f64> = valid.iter().map(|v| v.1).collect();
    let fit = ols_fit(&design, &phis)?;
    let coefficients: Vec<Value> = fit
        .names
        .iter()
        .zip(fit.coefficients.iter().zip(&fit.standard_errors))
        .map(|(n, (c, s))| json!({ "name": n, "estimate": c, "std_error": s }))
        .collect();
    Ok(json!({
        "reference_level": reference.to_string(),
        "coefficients": coefficients,
        "r_squared": fit.r_squared,
        "r_squared_adjusted": fit.r_squared_adjusted,
    }))
}

fn read_sample_dir(dir: &Path, replicates: usize) -> CliResult<Option<Vec<Vec<String>>>> {
    let mut out = Vec::with_capacity(replicates);
    for i in 0..replicates {
        let path = dir.join(format!("replicate_{i:03}.txt"));
        if !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(&path).map_err(|e| crate::output::file_error(&path, e))?;
        out.push(text.lines().map(str::to_string).filter(|l| !l.is_empty()).collect());
    }
    Ok(Some(out))
}

fn study3(g: &Global, resume: bool) -> CliResult<()> {
    let packets = read_packet_file(single_input(g)?)?;
    let out = required_output(g)?;
    let cfg = sample_config(g)?;
    let deltas = delta_grid(g)?;
    let replicates = g.replicates.unwrap_or(100);
    let ctx = context(
        g,
        "pipeline study3",
        json!({ "method": cfg.method.as_str(), "goal": cfg.goal, "replicates": replicates, "delta_grid": deltas }),
    );
    let sample_dir = out.join("samples");
    let cached = if resume { read_sample_dir(&sample_dir, replicates)? } else { None };
    let study = match cached {
        Some(labels) => {
            let graph = build_packet_graph(&packets);
            let samples = labels
                .iter()
                .map(|s| {
                    s.iter()
                        .map(|id| graph.index_of(id).ok_or_else(|| CliError::Usage(format!("sampled node {id:?} is not in the trace"))))
                        .collect::<CliResult<Vec<usize>>>()
                })
                .collect::<CliResult<_>>()?;
            PacketStudy { send_times: SendTimes::new(&graph, &packets), samples, sample_labels: labels }
        }
        None => {
            let study = PacketStudy::new(&packets, &cfg, replicates)?;
            write_samples(&sample_dir, &study.sample_labels)?;
            study
        }
    };
    let (sweep, points) = sweep_prepared(&study, &deltas)?;
    ctx.emit_sweep(Some(&out.join("sweep.csv")), &sweep, delta_chart())?;
    let detail: Vec<Value> = points
        .iter()
        .map(|p| {
            json!({
                "delta_ms": p.delta_ms,
                "mean": p.average.map(|a| a.mean),
                "stderr": p.average.map(|a| a.stderr),
                "n_valid": p.average.map_or(0, |a| a.n_valid),
                "replicates": p.replicates.iter().map(|r| r.as_ref().map(|r| json!({
                    "value": r.value,
                    "valid": r.valid,
                    "n_nodes": r.n_nodes,
                    "retries": r.retries,
                    "dropped_nodes": r.dropped_nodes,
                }))).collect::<Vec<_>>(),
            })
        })
        .collect();
    write_json(&ctx, out.join("points.json"), "points", Value::Array(detail))?;
    let summary = json!({ "best_delta_ms": sweep.argmax, "sweep": sweep });
    write_json(&ctx, out.join("summary.json"), "summary", summary)
}
