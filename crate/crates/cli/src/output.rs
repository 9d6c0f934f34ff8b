//! File writing with embedded or sidecar run metadata.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use groupphi::svg::{sweep_chart, ChartOptions};
use groupphi::{Error, StateMatrix, SweepResult};
use serde_json::{json, Value};

use crate::{CliResult, Global};

/// What every output records about the run that produced it.
pub struct Context<'a> {
    pub global: &'a Global,
    pub command: String,
    pub extra: Value,
}

impl Context<'_> {
    pub fn seed(&self) -> u64 {
        self.global.seed.unwrap_or(0)
    }

    pub fn meta(&self) -> Value {
        let mut config = serde_json::to_value(self.global).expect("options serialise");
        if let (Value::Object(map), Value::Object(extra)) = (&mut config, &self.extra) {
            for (k, v) in extra {
                map.insert(k.clone(), v.clone());
            }
        }
        json!({
            "tool": "groupphi",
            "version": groupphi::VERSION,
            "command": self.command,
            "seed": self.seed(),
            "config": config,
        })
    }

    /// `{"meta": ..., <key>: payload}`, written to `path` or stdout.
    pub fn emit_json(&self, path: Option<&Path>, key: &str, payload: Value) -> CliResult<()> {
        let mut doc = serde_json::Map::new();
        doc.insert("meta".into(), self.meta());
        doc.insert(key.into(), payload);
        let text = serde_json::to_string_pretty(&Value::Object(doc)).map_err(Error::from)? + "\n";
        match path {
            Some(p) => write_file(p, text.as_bytes()),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }

    /// Writes `bytes` to `path` and the run metadata to the `.meta.json` sidecar beside it.
    pub fn emit_csv(&self, path: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
        match path {
            Some(p) => {
                write_file(p, bytes)?;
                let meta = serde_json::to_string_pretty(&self.meta()).map_err(Error::from)? + "\n";
                write_file(&sidecar(p), meta.as_bytes())
            }
            None => {
                std::io::stdout().write_all(bytes).map_err(Error::from)?;
                Ok(())
            }
        }
    }

    pub fn emit_states(&self, path: Option<&Path>, states: &StateMatrix) -> CliResult<()> {
        self.emit_csv(path, states.to_csv_string().as_bytes())
    }

    /// Sweep CSV at `path` plus an SVG chart with the same stem.
    pub fn emit_sweep(&self, path: Option<&Path>, sweep: &SweepResult, mut chart: ChartOptions) -> CliResult<()> {
        let mut csv = Vec::new();
        sweep.write_csv(&mut csv)?;
        self.emit_csv(path, &csv)?;
        if let Some(p) = path {
            let mut meta = self.meta();
            if !self.global.deterministic {
                meta["generated"] = Value::String(chrono::Utc::now().to_rfc3339());
            }
            chart.metadata = Some(meta.to_string());
            write_file(&p.with_extension("svg"), sweep_chart(sweep, &chart).as_bytes())?;
        }
        Ok(())
    }
}

pub fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

pub fn file_error(path: &Path, source: std::io::Error) -> Error {
    Error::File { path: path.to_path_buf(), source }
}

pub fn open(path: &Path) -> CliResult<BufReader<File>> {
    Ok(BufReader::new(File::open(path).map_err(|e| file_error(path, e))?))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| file_error(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| file_error(path, e))?;
    Ok(())
}

pub fn create_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(|e| file_error(path, e))?;
    Ok(())
}

pub fn read_states(path: &Path) -> CliResult<StateMatrix> {
    StateMatrix::read_csv(open(path)?).map_err(|e| match e {
        Error::Parse { line, message } => Error::Parse { line, message: format!("{}: {message}", path.display()) },
        other => other,
    }.into())
}
