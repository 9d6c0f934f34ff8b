//! Regenerates the bundled test fixtures: `cargo run -p groupphi-cli --example make_fixtures`.

use std::fs;
use std::path::Path;

use groupphi::sampling::write_packets;
use groupphi::synth::{self, TrafficParams};

fn volume_csv(states: &groupphi::StateMatrix, seed: u64) -> String {
    // speaking steps get a loud envelope, silent ones a quiet hum; nothing crosses the margin
    let mut out = String::from("step");
    for l in states.labels() {
        out.push(',');
        out.push_str(l);
    }
    out.push('\n');
    for (t, row) in states.rows().enumerate() {
        out.push_str(&t.to_string());
        for (k, &v) in row.iter().enumerate() {
            let jitter = ((t as u64 * 31 + k as u64 * 17 + seed) % 10) as f64 / 10.0;
            let level = if v == 1 { 5.0 + jitter } else { 0.1 + jitter / 10.0 };
            out.push_str(&format!(",{level:.2}"));
        }
        out.push('\n');
    }
    out
}

fn edit_log() -> String {
    let qualities = ["C", "B", "GA", "A", "FA"];
    let mut out = String::from("timestamp_iso8601,article,editor,quality_after\n");
    let mut state: u64 = 12345;
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        state >> 33
    };
    for article in 0..12 {
        let level_count = 2 + article % 4;
        let mut day = 0u64;
        for level in 0..level_count {
            let editors = 3 + (article + level) % 5;
            let edits = 25 + next() % 30;
            for _ in 0..edits {
                day += next() % 2;
                let hour = next() % 24;
                // higher-rated stretches have editors taking turns more regularly
                let editor = if level % 2 == 1 { day as usize % editors } else { (next() as usize) % editors };
                out.push_str(&format!(
                    "2011-{:02}-{:02}T{hour:02}:00:00Z,Article_{article},ed{editor},\n",
                    1 + day / 28,
                    1 + day % 28
                ));
            }
            day += 1;
            out.push_str(&format!(
                "2011-{:02}-{:02}T12:00:00Z,Article_{article},reviewer,{}\n",
                1 + day / 28,
                1 + day % 28,
                qualities[level]
            ));
        }
    }
    out
}

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    fs::create_dir_all(&dir).unwrap();

    fs::write(dir.join("copy_pair.csv"), synth::copy_pair(20_000, 0.0, 2024).to_csv_string()).unwrap();

    fs::write(dir.join("chat.csv"), "line_index,speaker,text\n0,ana,hello\n1,ben,hi there\n2,ana,shall we start?\n").unwrap();

    let traffic = TrafficParams { duration_ms: 60_000.0, seed: 7, ..Default::default() };
    let mut packets = Vec::new();
    write_packets(&mut packets, &synth::request_response_traffic(&traffic)).unwrap();
    fs::write(dir.join("packets.csv"), packets).unwrap();

    for (i, lag) in [(0u64, 4usize), (1, 4), (2, 4)] {
        let group = synth::delayed_response_group(1_500, 3, lag, 0.1, 90 + i);
        fs::write(dir.join(format!("group{i}_volume.csv")), volume_csv(&group, i)).unwrap();
    }
    fs::write(dir.join("scores.csv"), "group,score\ngroup0_volume,0.3\ngroup1_volume,-0.1\ngroup2_volume,0.8\n").unwrap();

    fs::write(dir.join("edits.csv"), edit_log()).unwrap();

    fs::write(
        dir.join("study3.conf"),
        "# small-sample settings for the bundled packet trace\nmethod = random_walk\ngoal = 12\nreplicates = 8\nseed = 11\ndelta_ms = 25,50,100,150,200\ndeterministic = true\n",
    )
    .unwrap();
}
