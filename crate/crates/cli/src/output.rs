//! Table and manifest writers. Output is deterministic: no timestamps, fixed formatting.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{Format, RunConfig};
use crate::experiments::{Cell, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Partial,
    Failed,
}

impl Status {
    pub fn of(table: &Table) -> Self {
        if table.failures.is_empty() {
            Status::Ok
        } else if table.failures.len() < table.points {
            Status::Partial
        } else {
            Status::Failed
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Partial => "partial",
            Status::Failed => "failed",
        }
    }
}

fn cell_text(c: &Cell) -> String {
    match c {
        Cell::Num(x) => format!("{x:.16e}"),
        Cell::Int(i) => i.to_string(),
        Cell::Text(s) => s.clone(),
        Cell::Empty => String::new(),
    }
}

fn cell_json(c: &Cell) -> Value {
    match c {
        Cell::Num(x) if x.is_finite() => json!(x),
        Cell::Num(_) | Cell::Empty => Value::Null,
        Cell::Int(i) => json!(i),
        Cell::Text(s) => json!(s),
    }
}

pub fn effective_config_hash(cfg: &RunConfig) -> String {
    let mut v = serde_json::to_value(cfg).expect("config serializes");
    v.as_object_mut().expect("object").remove("output");
    let digest = Sha256::digest(serde_json::to_string(&v).expect("serializes").as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn write_table(table: &Table, format: Format, path: &Path) -> std::io::Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_path(path)?;
            w.write_record(table.columns.iter().map(|c| c.name))?;
            for row in &table.rows {
                w.write_record(row.iter().map(cell_text))?;
            }
            w.flush()
        }
        Format::Json => {
            let doc = json!({
                "columns": table.columns.iter().map(|c| c.name).collect::<Vec<_>>(),
                "rows": table.rows.iter().map(|r| r.iter().map(cell_json).collect::<Vec<_>>()).collect::<Vec<_>>(),
            });
            fs::write(path, serde_json::to_string_pretty(&doc).expect("serializes") + "\n")
        }
    }
}

/// Write the table and `manifest.json` into the configured directory; returns the table path.
pub fn write_run(experiment: &str, cfg: &RunConfig, table: &Table) -> std::io::Result<PathBuf> {
    let dir = Path::new(&cfg.output.dir);
    fs::create_dir_all(dir)?;
    let ext = match cfg.output.format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let file = format!("{experiment}.{ext}");
    let path = dir.join(&file);
    write_table(table, cfg.output.format, &path)?;
    let manifest = json!({
        "tool": "inertial",
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": experiment,
        "model": cfg.model.name(),
        "config_sha256": effective_config_hash(cfg),
        "config": cfg,
        "output": file,
        "status": Status::of(table).name(),
        "points": table.points,
        "columns": table.columns.iter().map(|c| json!({"name": c.name, "source": c.source})).collect::<Vec<_>>(),
        "failures": table.failures.iter().map(|f| json!({"index": f.index, "kind": f.kind, "message": f.message})).collect::<Vec<_>>(),
        "warnings": table.warnings,
    });
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest).expect("serializes") + "\n")?;
    Ok(path)
}
