use std::collections::BTreeMap;
use std::path::Path;

use groupphi::ingest::{
    chat_roster, encode_chat, encode_edits, encode_packets_from, encode_turns, extract_quality_windows, parse_timestamp,
    read_chat, read_edits, read_volume_tracks, split_by_article, QualityWindow, TurnParams,
};
use groupphi::phi::stabilized_phi;
use groupphi::sampling::{build_packet_graph, read_packets, replicate_samples, PacketRecord, SampleConfig, SampleMethod};
use groupphi::stats::{hardware_adjust, kendall_tau, ols_fit, pearson_r, wilcoxon_z, DesignMatrix};
use groupphi::svg::ChartOptions;
use groupphi::sweep::{default_tau_grid, sweep_time_delay_groups, PacketStudy, DEFAULT_DELTA_GRID_MS};
use groupphi::{Error, PhiMethod, PhiResult, StateMatrix};
use serde_json::{json, Value};

use crate::output::{create_dir, open, read_states, write_file, Context};
use crate::{usage, Cli, CliResult, ColumnArgs, Command, EncodeCommand, Global, PhiKind, StatsCommand, SweepCommand};

pub fn run(cli: &Cli) -> CliResult<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Encode(cmd) => encode(g, cmd),
        Command::Phi { kind } => phi(g, *kind),
        Command::Sample(args) => sample(g, args.start.as_deref()),
        Command::Sweep(SweepCommand::Tau) => sweep_tau(g),
        Command::Sweep(SweepCommand::Delta) => sweep_delta(g),
        Command::Stats(cmd) => stats(g, cmd),
        Command::Pipeline(cmd) => crate::pipeline::run(g, cmd),
    }
}

// ---------------------------------------------------------------------------------------------
// argument helpers

pub fn context<'a>(g: &'a Global, command: &str, extra: Value) -> Context<'a> {
    Context { global: g, command: command.to_string(), extra }
}

pub fn single_input(g: &Global) -> CliResult<&Path> {
    match g.input.as_slice() {
        [one] => Ok(one),
        [] => usage("--input is required"),
        _ => usage("exactly one --input expected"),
    }
}

pub fn required_output(g: &Global) -> CliResult<&Path> {
    g.output.as_deref().map_or_else(|| usage("--output is required"), Ok)
}

/// `5`, `1,2,5` or `1..30` (inclusive).
pub fn parse_taus(text: &str) -> CliResult<Vec<usize>> {
    let bad = || crate::CliError::Usage(format!("bad τ specification {text:?}"));
    let text = text.trim();
    if let Some((a, b)) = text.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    text.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect()
}

pub fn parse_deltas(text: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| crate::CliError::Usage(format!("bad δ value {s:?}"))))
        .collect()
}

pub fn tau_grid(g: &Global) -> CliResult<Vec<usize>> {
    g.tau.as_deref().map_or_else(|| Ok(default_tau_grid()), parse_taus)
}

pub fn delta_grid(g: &Global) -> CliResult<Vec<f64>> {
    g.delta_ms.as_deref().map_or_else(|| Ok(DEFAULT_DELTA_GRID_MS.to_vec()), parse_deltas)
}

fn single_tau(g: &Global) -> CliResult<usize> {
    match g.tau.as_deref().map(parse_taus).transpose()?.as_deref() {
        None => Ok(1),
        Some([t]) => Ok(*t),
        Some(_) => usage("a single --tau value is expected"),
    }
}

pub fn phi_method(g: &Global, default: PhiMethod) -> CliResult<PhiMethod> {
    Ok(g.method.as_deref().map(str::parse).transpose()?.unwrap_or(default))
}

pub fn sample_config(g: &Global) -> CliResult<SampleConfig> {
    let method: SampleMethod = g.method.as_deref().map(str::parse).transpose()?.unwrap_or(SampleMethod::RandomWalk);
    let cfg = SampleConfig::new(method, g.goal.unwrap_or(100), g.seed.unwrap_or(0));
    cfg.validate()?;
    Ok(cfg)
}

pub fn read_packet_file(path: &Path) -> CliResult<Vec<PacketRecord>> {
    Ok(read_packets(open(path)?)?)
}

pub fn turn_params(g: &Global, crosstalk: Option<f64>) -> CliResult<TurnParams> {
    let Some(threshold) = g.threshold else { return usage("--threshold is required for volume tracks") };
    let mut p = TurnParams::with_threshold(threshold);
    if let Some(m) = g.merge_gap_ms {
        p.merge_gap_ms = m;
    }
    if let Some(c) = crosstalk {
        p.crosstalk_margin = c;
    }
    Ok(p)
}

/// Phi result with node indices replaced by labels.
pub fn phi_json(result: &PhiResult, states: &StateMatrix) -> Value {
    json!({
        "value": result.value,
        "valid": result.valid,
        "method": result.method.as_str(),
        "tau": result.tau,
        "n_nodes": result.n_nodes,
        "partition": result.partition.labelled(states.labels()),
        "dropped_nodes": result.dropped_nodes,
        "retries": result.retries,
    })
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect()
}

/// Keeps characters safe in file names.
pub fn file_stem(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

// ---------------------------------------------------------------------------------------------
// encode

fn encode(g: &Global, cmd: &EncodeCommand) -> CliResult<()> {
    let input = single_input(g)?;
    match cmd {
        EncodeCommand::Turns { crosstalk_margin } => {
            let params = turn_params(g, *crosstalk_margin)?;
            let states = encode_turns(&read_volume_tracks(open(input)?)?, &params)?;
            let ctx = context(g, "encode turns", json!({ "crosstalk_margin": params.crosstalk_margin, "merge_gap_ms": params.merge_gap_ms }));
            ctx.emit_states(g.output.as_deref(), &states)
        }
        EncodeCommand::Chat { roster } => {
            let lines = read_chat(open(input)?)?;
            let roster = roster.as_deref().map_or_else(|| chat_roster(&lines), split_list);
            let states = encode_chat(&lines, &roster)?;
            context(g, "encode chat", json!({ "roster": roster })).emit_states(g.output.as_deref(), &states)
        }
        EncodeCommand::Edits { max_edits } => {
            let out = required_output(g)?;
            let windows = quality_windows(input, g.window_days.unwrap_or(30), *max_edits)?;
            let ctx = context(g, "encode edits", json!({ "max_edits": max_edits, "window_days": g.window_days.unwrap_or(30) }));
            write_windows(&ctx, out, &windows)
        }
        EncodeCommand::Packets { nodes } => {
            let packets = read_packet_file(input)?;
            let delta = match g.delta_ms.as_deref().map(parse_deltas).transpose()?.as_deref() {
                None => 100.0,
                Some([d]) => *d,
                Some(_) => return usage("a single --delta-ms value is expected"),
            };
            let ids = match nodes {
                Some(list) => split_list(list),
                None => build_packet_graph(&packets).ids().to_vec(),
            };
            let origin = packets.iter().map(|p| p.timestamp_us).min().unwrap_or(0);
            let end = packets.iter().map(|p| p.timestamp_us).max().unwrap_or(0);
            let span_ms = (end - origin + 1) as f64 / 1_000.0;
            let states = encode_packets_from(&packets, &ids, origin, delta, span_ms)?;
            context(g, "encode packets", json!({ "nodes": ids.len() })).emit_states(g.output.as_deref(), &states)
        }
    }
}

/// Quality windows of every article in an edit log, skipping articles above `max_edits`.
pub fn quality_windows(input: &Path, window_days: u32, max_edits: Option<usize>) -> CliResult<Vec<QualityWindow>> {
    let mut edits = read_edits(open(input)?)?;
    edits.sort_by_key(|e| e.timestamp);
    let mut windows = Vec::new();
    for (_, history) in split_by_article(edits) {
        if max_edits.is_some_and(|m| history.len() > m) {
            continue;
        }
        windows.extend(extract_quality_windows(&history, window_days)?);
    }
    Ok(windows)
}

pub fn window_file_name(index: usize, w: &QualityWindow) -> String {
    format!("{index:04}_{}_{}.csv", file_stem(&w.article), w.new_quality)
}

/// One state matrix per window plus a `windows.csv` index.
pub fn write_windows(ctx: &Context<'_>, dir: &Path, windows: &[QualityWindow]) -> CliResult<()> {
    create_dir(dir)?;
    let mut index = String::from("file,article,quality,change_time,editors,edits\n");
    for (i, w) in windows.iter().enumerate() {
        let name = window_file_name(i, w);
        write_file(&dir.join(&name), encode_edits(w)?.to_csv_string().as_bytes())?;
        index.push_str(&csv_line(&[
            name,
            w.article.clone(),
            w.new_quality.to_string(),
            groupphi::ingest::format_timestamp(&w.change_time),
            w.editors.len().to_string(),
            w.edits.len().to_string(),
        ]));
    }
    ctx.emit_csv(Some(&dir.join("windows.csv")), index.as_bytes())
}

pub fn csv_line(fields: &[String]) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(fields).expect("in-memory write");
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

// ---------------------------------------------------------------------------------------------
// phi, sample, sweeps

fn phi(g: &Global, kind: PhiKind) -> CliResult<()> {
    let input = single_input(g)?;
    let states = read_states(input)?;
    let tau = single_tau(g)?;
    let method = match kind {
        PhiKind::Empirical => PhiMethod::Empirical,
        PhiKind::Ar => PhiMethod::Autoregressive,
        PhiKind::Atomic => PhiMethod::Atomic,
    };
    let result = stabilized_phi(&states, tau, method)?;
    let ctx = context(g, &format!("phi {}", method.as_str()), json!({ "tau": tau }));
    ctx.emit_json(g.output.as_deref(), "result", phi_json(&result, &states))
}

pub fn write_samples(dir: &Path, labels: &[Vec<String>]) -> CliResult<()> {
    create_dir(dir)?;
    for (i, s) in labels.iter().enumerate() {
        let mut text = s.join("\n");
        text.push('\n');
        write_file(&dir.join(format!("replicate_{i:03}.txt")), text.as_bytes())?;
    }
    Ok(())
}

fn sample(g: &Global, start: Option<&str>) -> CliResult<()> {
    let packets = read_packet_file(single_input(g)?)?;
    let out = required_output(g)?;
    let graph = build_packet_graph(&packets);
    let mut cfg = sample_config(g)?;
    if let Some(id) = start {
        cfg.start = Some(graph.index_of(id).ok_or_else(|| crate::CliError::Usage(format!("unknown start node {id:?}")))?);
    }
    let replicates = g.replicates.unwrap_or(100);
    let samples = replicate_samples(&graph, &cfg, replicates)?;
    let labels: Vec<Vec<String>> =
        samples.iter().map(|s| s.iter().map(|&i| graph.id(i).to_string()).collect()).collect();
    write_samples(out, &labels)?;
    let ctx = context(
        g,
        "sample",
        json!({ "method": cfg.method.as_str(), "goal": cfg.goal, "replicates": replicates, "start": start }),
    );
    let meta = serde_json::to_string_pretty(&ctx.meta()).map_err(Error::from)? + "\n";
    write_file(&out.join("samples.meta.json"), meta.as_bytes())
}

fn sweep_tau(g: &Global) -> CliResult<()> {
    if g.input.is_empty() {
        return usage("--input is required");
    }
    let groups: Vec<StateMatrix> = g.input.iter().map(|p| read_states(p)).collect::<CliResult<_>>()?;
    let taus = tau_grid(g)?;
    let method = phi_method(g, PhiMethod::Empirical)?;
    let sweep = sweep_time_delay_groups(&groups, &taus, method)?;
    let ctx = context(g, "sweep tau", json!({ "method": method.as_str(), "tau_grid": taus }));
    let chart = ChartOptions {
        title: format!("{} phi by time delay", method.as_str()),
        x_label: "τ (steps)".into(),
        y_label: "mean phi (bits)".into(),
        ..Default::default()
    };
    ctx.emit_sweep(g.output.as_deref(), &sweep, chart)
}

pub fn delta_chart() -> ChartOptions {
    ChartOptions {
        title: "atomic phi by time step size".into(),
        x_label: "δ (ms)".into(),
        y_label: "mean phi (bits)".into(),
        log_x: true,
        metadata: None,
    }
}

fn sweep_delta(g: &Global) -> CliResult<()> {
    let packets = read_packet_file(single_input(g)?)?;
    let cfg = sample_config(g)?;
    let deltas = delta_grid(g)?;
    let replicates = g.replicates.unwrap_or(100);
    let study = PacketStudy::new(&packets, &cfg, replicates)?;
    let (sweep, _) = groupphi::sweep::sweep_prepared(&study, &deltas)?;
    let ctx = context(
        g,
        "sweep delta",
        json!({ "method": cfg.method.as_str(), "goal": cfg.goal, "replicates": replicates, "delta_grid": deltas }),
    );
    ctx.emit_sweep(g.output.as_deref(), &sweep, delta_chart())
}

// ---------------------------------------------------------------------------------------------
// stats

struct Table {
    columns: BTreeMap<String, Vec<String>>,
}

impl Table {
    fn read(path: &Path) -> CliResult<Table> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(path)?);
        let header: Vec<String> = rdr.headers().map_err(Error::from)?.iter().map(str::to_string).collect();
        let mut columns: BTreeMap<String, Vec<String>> = header.iter().map(|h| (h.clone(), Vec::new())).collect();
        for record in rdr.records() {
            let record = record.map_err(Error::from)?;
            for (h, v) in header.iter().zip(record.iter()) {
                columns.get_mut(h).expect("header column").push(v.to_string());
            }
        }
        Ok(Table { columns })
    }

    fn text(&self, name: &str) -> CliResult<&[String]> {
        self.columns.get(name).map(Vec::as_slice).ok_or_else(|| crate::CliError::Usage(format!("no column {name:?}")))
    }

    /// Numeric column; with `skip_empty`, blank cells are dropped instead of rejected.
    fn numbers(&self, name: &str, skip_empty: bool) -> CliResult<Vec<f64>> {
        let mut out = Vec::new();
        for (i, v) in self.text(name)?.iter().enumerate() {
            if v.is_empty() && skip_empty {
                continue;
            }
            out.push(v.parse().map_err(|_| Error::Parse { line: i + 2, message: format!("{name}: {v:?} is not a number") })?);
        }
        Ok(out)
    }
}

fn columns(args: &ColumnArgs) -> CliResult<(&str, &str)> {
    match (args.x.as_deref(), args.y.as_deref()) {
        (Some(x), Some(y)) => Ok((x, y)),
        _ => usage("--x and --y are required"),
    }
}

fn stats(g: &Global, cmd: &StatsCommand) -> CliResult<()> {
    let table = Table::read(single_input(g)?)?;
    let (name, payload, extra) = match cmd {
        StatsCommand::Corr(c) => {
            let (x, y) = columns(c)?;
            let r = pearson_r(&table.numbers(x, false)?, &table.numbers(y, false)?)?;
            ("stats corr", json!({ "pearson_r": r }), json!({ "x": x, "y": y }))
        }
        StatsCommand::Tau(c) => {
            let (x, y) = columns(c)?;
            let t = kendall_tau(&table.numbers(x, false)?, &table.numbers(y, false)?)?;
            ("stats tau", json!({ "kendall_tau_b": t }), json!({ "x": x, "y": y }))
        }
        StatsCommand::Wilcoxon(c) => {
            let (x, y) = columns(c)?;
            let (a, b) = (table.numbers(x, true)?, table.numbers(y, true)?);
            let z = wilcoxon_z(&a, &b)?;
            ("stats wilcoxon", json!({ "z": z, "n_a": a.len(), "n_b": b.len() }), json!({ "x": x, "y": y }))
        }
        StatsCommand::Ols { columns: c, factor, levels } => {
            let Some(y) = c.y.as_deref() else { return usage("--y is required") };
            let response = table.numbers(y, false)?;
            let mut design = DesignMatrix::with_intercept(response.len());
            let predictors = c.x.as_deref().map(split_list).unwrap_or_default();
            for p in &predictors {
                design = design.numeric(p, &table.numbers(p, false)?)?;
            }
            let mut level_list = Vec::new();
            if let Some(f) = factor {
                let obs = table.text(f)?;
                level_list = match levels {
                    Some(l) => split_list(l),
                    None => {
                        let mut seen: Vec<String> = Vec::new();
                        for o in obs {
                            if !seen.contains(o) {
                                seen.push(o.clone());
                            }
                        }
                        seen
                    }
                };
                let Some(reference) = level_list.first().cloned() else { return usage("factor has no levels") };
                design = design.categorical(f, obs, &level_list, &reference)?;
            }
            let fit = ols_fit(&design, &response)?;
            let coefficients: Vec<Value> = fit
                .names
                .iter()
                .zip(fit.coefficients.iter().zip(&fit.standard_errors))
                .map(|(n, (c, s))| json!({ "name": n, "estimate": c, "std_error": s }))
                .collect();
            (
                "stats ols",
                json!({ "coefficients": coefficients, "r_squared": fit.r_squared, "r_squared_adjusted": fit.r_squared_adjusted }),
                json!({ "y": y, "x": predictors, "factor": factor, "levels": level_list }),
            )
        }
        StatsCommand::Adjust { columns: c, date, break_date } => {
            let Some(y) = c.y.as_deref() else { return usage("--y is required") };
            let dates = table
                .text(date)?
                .iter()
                .enumerate()
                .map(|(i, d)| {
                    parse_timestamp(d)
                        .map(|t| t.date_naive())
                        .ok_or_else(|| Error::Parse { line: i + 2, message: format!("bad date {d:?}") }.into())
                })
                .collect::<CliResult<Vec<_>>>()?;
            let Some(brk) = parse_timestamp(break_date) else { return usage(format!("bad --break-date {break_date:?}")) };
            let adj = hardware_adjust(&dates, &table.numbers(y, false)?, brk.date_naive())?;
            (
                "stats adjust",
                json!({
                    "adjustment": adj.adjustment,
                    "slope_per_year": adj.slope_per_year,
                    "adjusted": adj.adjusted,
                    "coefficients": adj.fit.names.iter().zip(&adj.fit.coefficients).map(|(n, c)| (n.clone(), json!(c))).collect::<serde_json::Map<_, _>>(),
                    "standard_errors": adj.fit.names.iter().zip(&adj.fit.standard_errors).map(|(n, c)| (n.clone(), json!(c))).collect::<serde_json::Map<_, _>>(),
                }),
                json!({ "y": y, "date": date, "break_date": break_date }),
            )
        }
    };
    context(g, name, extra).emit_json(g.output.as_deref(), "result", payload)
}
