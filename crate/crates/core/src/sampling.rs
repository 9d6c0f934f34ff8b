//! Directed communication graphs built from packet records, and the four node-subsampling
//! methods: random walk, forest fire, breadth first and uniform random nodes.

use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};
use std::str::FromStr;

use rand::seq::{index, IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One packet: send time in microseconds, and anonymised source and destination ids.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketRecord {
    pub timestamp_us: i64,
    pub src: String,
    pub dst: String,
}

/// Reads the `timestamp_us,src,dst` CSV format.
pub fn read_packets<R: Read>(reader: R) -> Result<Vec<PacketRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    let expected = ["timestamp_us", "src", "dst"];
    if header.len() != 3 || header.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(Error::Parse { line: 1, message: "expected header timestamp_us,src,dst".into() });
    }
    let mut out = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != 3 {
            return Err(Error::Parse { line: i + 2, message: format!("expected 3 fields, found {}", record.len()) });
        }
        let timestamp_us = record[0].parse().map_err(|_| Error::Parse {
            line: i + 2,
            message: format!("timestamp {:?} is not an integer", &record[0]),
        })?;
        out.push(PacketRecord { timestamp_us, src: record[1].to_string(), dst: record[2].to_string() });
    }
    Ok(out)
}

pub fn write_packets<W: Write>(writer: W, packets: &[PacketRecord]) -> Result<()> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    out.write_record(["timestamp_us", "src", "dst"])?;
    for p in packets {
        out.write_record([p.timestamp_us.to_string().as_str(), &p.src, &p.dst])?;
    }
    out.flush()?;
    Ok(())
}

/// Node set `S` with, for every node `a`, the set `D(a)` of destinations it sent packets to.
///
/// Nodes are indexed in order of first appearance; destination lists are sorted and unique.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PacketGraph {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    destinations: Vec<Vec<usize>>,
}

impl PacketGraph {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, node: usize) -> &str {
        &self.ids[node]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// `D(a)` as node indices.
    pub fn destinations(&self, node: usize) -> &[usize] {
        &self.destinations[node]
    }

    pub fn destination_ids(&self, node: usize) -> BTreeSet<&str> {
        self.destinations[node].iter().map(|&d| self.ids[d].as_str()).collect()
    }

    fn intern(&mut self, id: &str) -> usize {
        if let Some(&i) = self.index.get(id) {
            return i;
        }
        let i = self.ids.len();
        self.ids.push(id.to_string());
        self.index.insert(id.to_string(), i);
        self.destinations.push(Vec::new());
        i
    }
}

/// `S` = every source and destination; `D(a)` = distinct destinations of `a`.
pub fn build_packet_graph(packets: &[PacketRecord]) -> PacketGraph {
    let mut graph = PacketGraph::default();
    for p in packets {
        let s = graph.intern(&p.src);
        let d = graph.intern(&p.dst);
        graph.destinations[s].push(d);
    }
    for list in &mut graph.destinations {
        list.sort_unstable();
        list.dedup();
    }
    graph
}

/// Node subsampling method.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMethod {
    RandomWalk,
    ForestFire,
    BreadthFirst,
    RandomNodes,
}

impl SampleMethod {
    pub const ALL: [SampleMethod; 4] =
        [SampleMethod::RandomWalk, SampleMethod::ForestFire, SampleMethod::BreadthFirst, SampleMethod::RandomNodes];

    pub fn as_str(&self) -> &'static str {
        match self {
            SampleMethod::RandomWalk => "random_walk",
            SampleMethod::ForestFire => "forest_fire",
            SampleMethod::BreadthFirst => "breadth_first",
            SampleMethod::RandomNodes => "random_nodes",
        }
    }
}

impl FromStr for SampleMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "random_walk" | "rw" => Ok(SampleMethod::RandomWalk),
            "forest_fire" | "ff" => Ok(SampleMethod::ForestFire),
            "breadth_first" | "bfs" => Ok(SampleMethod::BreadthFirst),
            "random_nodes" | "random" => Ok(SampleMethod::RandomNodes),
            _ => Err(Error::InvalidConfig(format!("unknown sampling method {s:?}"))),
        }
    }
}

/// Sampling parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleConfig {
    pub method: SampleMethod,
    /// Target sample size.
    pub goal: usize,
    /// Probability that a random walk continues rather than returning to its start.
    pub walk_continue_probability: f64,
    /// Mean of the geometric burn count (support `{0, 1, 2, ...}`).
    pub fire_mean: f64,
    pub seed: u64,
    /// Forces the first start node instead of drawing it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<usize>,
}

impl SampleConfig {
    pub fn new(method: SampleMethod, goal: usize, seed: u64) -> Self {
        SampleConfig { method, goal, walk_continue_probability: 0.85, fire_mean: 2.3, seed, start: None }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.walk_continue_probability > 0.0 && self.walk_continue_probability < 1.0) {
            return Err(Error::InvalidConfig("walk_continue_probability must lie in (0, 1)".into()));
        }
        if !(self.fire_mean > 0.0 && self.fire_mean.is_finite()) {
            return Err(Error::InvalidConfig("fire_mean must be positive".into()));
        }
        if self.goal == 0 {
            return Err(Error::InvalidConfig("goal must be at least 1".into()));
        }
        Ok(())
    }
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig::new(SampleMethod::RandomWalk, 100, 0)
    }
}

/// Growing sample `A` with O(1) membership.
struct Sample<'g> {
    graph: &'g PacketGraph,
    members: Vec<usize>,
    taken: Vec<bool>,
}

impl<'g> Sample<'g> {
    fn new(graph: &'g PacketGraph) -> Self {
        Sample { graph, members: Vec::new(), taken: vec![false; graph.len()] }
    }

    fn add(&mut self, node: usize) -> bool {
        if self.taken[node] {
            return false;
        }
        self.taken[node] = true;
        self.members.push(node);
        true
    }

    fn contains(&self, node: usize) -> bool {
        self.taken[node]
    }

    fn len(&self) -> usize {
        self.members.len()
    }

    fn unvisited_destinations(&self, node: usize) -> Vec<usize> {
        self.graph.destinations(node).iter().copied().filter(|&d| !self.taken[d]).collect()
    }

    /// Uniform draw from `S \ A`; caller guarantees the complement is non-empty.
    fn fresh_start(&self, rng: &mut ChaCha8Rng) -> usize {
        for _ in 0..64 {
            let x = rng.random_range(0..self.graph.len());
            if !self.taken[x] {
                return x;
            }
        }
        let rest: Vec<usize> = (0..self.graph.len()).filter(|&i| !self.taken[i]).collect();
        *rest.choose(rng).expect("complement is non-empty")
    }
}

/// Draws a sample of exactly `config.goal` distinct nodes.
///
/// The output lists node indices in the order they joined the sample.
pub fn sample_nodes(graph: &PacketGraph, config: &SampleConfig) -> Result<Vec<usize>> {
    config.validate()?;
    if graph.len() < config.goal {
        return Err(Error::InsufficientNodes { available: graph.len(), goal: config.goal });
    }
    if let Some(start) = config.start {
        if start >= graph.len() {
            return Err(Error::InvalidConfig(format!("start node {start} out of range")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut sample = Sample::new(graph);
    let first = match config.start {
        Some(s) => s,
        None => sample.fresh_start(&mut rng),
    };
    match config.method {
        SampleMethod::RandomWalk => random_walk(&mut sample, first, config, &mut rng),
        SampleMethod::ForestFire => forest_fire(&mut sample, first, config, &mut rng),
        SampleMethod::BreadthFirst => breadth_first(&mut sample, first, config.goal, &mut rng),
        SampleMethod::RandomNodes => {
            let mut nodes = vec![first];
            nodes.extend(
                index::sample(&mut rng, graph.len(), config.goal)
                    .into_iter()
                    .filter(|&i| i != first)
                    .take(config.goal - 1),
            );
            return Ok(nodes);
        }
    }
    debug_assert_eq!(sample.len(), config.goal);
    Ok(sample.members)
}

/// Walks from `x`, continuing along a random destination of the current node with the
/// continuation probability and otherwise returning to `x`. After `10 × goal` consecutive
/// steps without a new node the walk restarts from a fresh node outside the sample.
fn random_walk(sample: &mut Sample<'_>, first: usize, config: &SampleConfig, rng: &mut ChaCha8Rng) {
    let graph = sample.graph;
    let stall_limit = 10 * config.goal;
    let mut origin = first;
    sample.add(origin);
    let mut current = origin;
    let mut stalled = 0;
    while sample.len() < config.goal {
        let dests = graph.destinations(current);
        if !dests.is_empty() && rng.random::<f64>() < config.walk_continue_probability {
            current = *dests.choose(rng).expect("non-empty");
            if sample.add(current) {
                stalled = 0;
                continue;
            }
        } else {
            current = origin;
        }
        stalled += 1;
        if stalled >= stall_limit {
            origin = sample.fresh_start(rng);
            sample.add(origin);
            current = origin;
            stalled = 0;
        }
    }
}

/// Burns a geometric number of unvisited destinations of each active node. Burned nodes queue
/// up as future active nodes; when the queue runs dry a random sample member with unvisited
/// destinations is reactivated, and when `D(A) \ A` is empty a fresh start is drawn.
fn forest_fire(sample: &mut Sample<'_>, first: usize, config: &SampleConfig, rng: &mut ChaCha8Rng) {
    let burn = Geometric::new(1.0 / (1.0 + config.fire_mean)).expect("fire_mean validated");
    sample.add(first);
    let mut queue = std::collections::VecDeque::from([first]);
    while sample.len() < config.goal {
        let active = match queue.pop_front() {
            Some(a) => a,
            None => {
                let open: Vec<usize> = sample
                    .members
                    .iter()
                    .copied()
                    .filter(|&a| sample.graph.destinations(a).iter().any(|&d| !sample.contains(d)))
                    .collect();
                match open.choose(rng) {
                    Some(&a) => a,
                    None => {
                        let x = sample.fresh_start(rng);
                        sample.add(x);
                        queue.push_back(x);
                        continue;
                    }
                }
            }
        };
        let mut candidates = sample.unvisited_destinations(active);
        let n = burn.sample(rng) as usize;
        candidates.shuffle(rng);
        for &c in candidates.iter().take(n) {
            if sample.len() == config.goal {
                break;
            }
            sample.add(c);
            queue.push_back(c);
        }
    }
}

/// Adds whole layers `D(frontier) \ A` in shuffled order, truncating the last layer to the goal.
fn breadth_first(sample: &mut Sample<'_>, first: usize, goal: usize, rng: &mut ChaCha8Rng) {
    sample.add(first);
    let mut frontier = vec![first];
    while sample.len() < goal {
        let mut layer: Vec<usize> = Vec::new();
        for &a in &frontier {
            for &d in sample.graph.destinations(a) {
                if !sample.contains(d) {
                    layer.push(d);
                }
            }
        }
        layer.sort_unstable();
        layer.dedup();
        if layer.is_empty() {
            let x = sample.fresh_start(rng);
            sample.add(x);
            frontier = vec![x];
            continue;
        }
        layer.shuffle(rng);
        layer.truncate(goal - sample.len());
        for &d in &layer {
            sample.add(d);
        }
        frontier = layer;
    }
}

/// `count` samples, replicate `i` seeded with `config.seed + i`.
pub fn replicate_samples(graph: &PacketGraph, config: &SampleConfig, count: usize) -> Result<Vec<Vec<usize>>> {
    (0..count)
        .map(|i| {
            let cfg = SampleConfig { seed: config.seed.wrapping_add(i as u64), ..config.clone() };
            sample_nodes(graph, &cfg)
        })
        .collect()
}
