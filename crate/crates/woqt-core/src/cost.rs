//! Serving latency and node-throughput arithmetic.
//!
//! A [`LatencyTable`] holds measured `(batch, input_len) -> (context_ms,
//! per_step_ms)` rows for one precision/GPU-count configuration. End-to-end
//! generation time is `context_ms + output_len * per_step_ms`. Node
//! throughput assumes the compressed model is replicated `replicas` times on
//! the node with requests served to the instances concurrently, so node
//! tokens/sec is exactly `replicas` times the per-instance rate.
//!
//! Reference measurements for a 175B decoder on 8/4/2 GPUs ship with the
//! crate ([`builtin_latency_set`]) and load from CSV for other hardware.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

pub const LATENCY_CSV_HEADER: &str = "precision,gpus,batch,input_len,context_ms,per_step_ms";

/// Latency rows for one (precision, gpu-count) serving configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct LatencyTable {
    precision: String,
    gpus: u32,
    rows: BTreeMap<(u32, u32), (f64, f64)>,
}

impl LatencyTable {
    pub fn new(precision: impl Into<String>, gpus: u32) -> Self {
        Self {
            precision: precision.into(),
            gpus,
            rows: BTreeMap::new(),
        }
    }

    pub fn precision(&self) -> &str {
        &self.precision
    }

    pub fn gpus(&self) -> u32 {
        self.gpus
    }

    /// Insert a measurement; duplicate (batch, input_len) keys are rejected.
    pub fn insert(
        &mut self,
        batch: u32,
        input_len: u32,
        context_ms: f64,
        per_step_ms: f64,
    ) -> Result<()> {
        if context_ms <= 0.0 || per_step_ms <= 0.0 {
            return Err(Error::LatencyTable(format!(
                "times must be positive: context {context_ms}, per-step {per_step_ms}"
            )));
        }
        if self
            .rows
            .insert((batch, input_len), (context_ms, per_step_ms))
            .is_some()
        {
            return Err(Error::LatencyTable(format!(
                "duplicate key (batch {batch}, input {input_len}) in '{}'",
                self.precision
            )));
        }
        Ok(())
    }

    pub fn keys(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.rows.keys().copied()
    }

    fn lookup(&self, batch: u32, input_len: u32) -> Result<(f64, f64)> {
        self.rows
            .get(&(batch, input_len))
            .copied()
            .ok_or_else(|| Error::MissingLatencyKey {
                table: self.precision.clone(),
                batch,
                input_len,
            })
    }
}

/// `context_ms + output_len * per_step_ms`, in milliseconds.
pub fn end_to_end_time(
    tbl: &LatencyTable,
    batch: u32,
    input_len: u32,
    output_len: u32,
) -> Result<f64> {
    if output_len == 0 {
        return Err(Error::Validation("output_len must be at least 1".into()));
    }
    let (context, step) = tbl.lookup(batch, input_len)?;
    Ok(context + output_len as f64 * step)
}

/// Node throughput for a replicated deployment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThroughputResult {
    pub tokens_per_sec_per_instance: f64,
    pub tokens_per_sec_per_node: f64,
    /// Display rounding (half up) of the per-node rate.
    pub rounded_per_node: i64,
}

/// Generated tokens per second for one instance and for `replicas` instances
/// served concurrently on a node.
pub fn node_throughput(
    tbl: &LatencyTable,
    batch: u32,
    input_len: u32,
    output_len: u32,
    replicas: u32,
) -> Result<ThroughputResult> {
    if replicas == 0 {
        return Err(Error::Validation("replicas must be at least 1".into()));
    }
    let ms = end_to_end_time(tbl, batch, input_len, output_len)?;
    let per_instance = (batch as f64 * output_len as f64) / (ms / 1e3);
    let per_node = replicas as f64 * per_instance;
    Ok(ThroughputResult {
        tokens_per_sec_per_instance: per_instance,
        tokens_per_sec_per_node: per_node,
        rounded_per_node: (per_node + 0.5).floor() as i64,
    })
}

/// A (batch, input_len, output_len) request shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RequestShape {
    pub batch: u32,
    pub input_len: u32,
    pub output_len: u32,
}

/// One row of a speedup comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedupRow {
    pub shape: RequestShape,
    pub base_tokens_per_sec: f64,
    pub other_tokens_per_sec: f64,
    pub ratio: f64,
}

/// Per-shape node-throughput ratios of `other` against `base`.
pub fn speedup_report(
    base: &LatencyTable,
    base_replicas: u32,
    other: &LatencyTable,
    other_replicas: u32,
    shapes: &[RequestShape],
) -> Result<Vec<SpeedupRow>> {
    if shapes.is_empty() {
        return Err(Error::Validation("speedup report needs shapes".into()));
    }
    let mut rows = Vec::with_capacity(shapes.len());
    for &shape in shapes {
        let b = node_throughput(
            base,
            shape.batch,
            shape.input_len,
            shape.output_len,
            base_replicas,
        )?;
        let o = node_throughput(
            other,
            shape.batch,
            shape.input_len,
            shape.output_len,
            other_replicas,
        )?;
        rows.push(SpeedupRow {
            shape,
            base_tokens_per_sec: b.tokens_per_sec_per_node,
            other_tokens_per_sec: o.tokens_per_sec_per_node,
            ratio: o.tokens_per_sec_per_node / b.tokens_per_sec_per_node,
        });
    }
    Ok(rows)
}

/// A set of latency tables keyed by precision label.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LatencySet {
    tables: Vec<LatencyTable>,
}

impl LatencySet {
    pub fn tables(&self) -> &[LatencyTable] {
        &self.tables
    }

    pub fn get(&self, precision: &str) -> Result<&LatencyTable> {
        self.tables
            .iter()
            .find(|t| t.precision == precision)
            .ok_or_else(|| {
                Error::LatencyTable(format!(
                    "no table for precision '{precision}' (have: {})",
                    self.tables
                        .iter()
                        .map(|t| t.precision.as_str())
                        .collect::<Vec<_>>()
                        .join(", ")
                ))
            })
    }
}

/// Parse the 6-column latency CSV format.
pub fn parse_latency_csv(text: &str) -> Result<LatencySet> {
    let mut lines = text.lines().enumerate();
    let header = lines
        .next()
        .map(|(_, l)| l.trim())
        .ok_or_else(|| Error::LatencyTable("empty latency CSV".into()))?;
    if header != LATENCY_CSV_HEADER {
        return Err(Error::LatencyTable(format!(
            "expected header '{LATENCY_CSV_HEADER}', got '{header}'"
        )));
    }
    let mut set = LatencySet::default();
    for (lineno, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 6 {
            return Err(Error::LatencyTable(format!(
                "line {}: expected 6 fields, got {}",
                lineno + 1,
                fields.len()
            )));
        }
        let parse_u32 = |s: &str, what: &str| -> Result<u32> {
            s.parse()
                .map_err(|_| Error::LatencyTable(format!("line {}: bad {what} '{s}'", lineno + 1)))
        };
        let parse_f64 = |s: &str, what: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::LatencyTable(format!("line {}: bad {what} '{s}'", lineno + 1)))
        };
        let precision = fields[0].to_string();
        let gpus = parse_u32(fields[1], "gpu count")?;
        let batch = parse_u32(fields[2], "batch")?;
        let input_len = parse_u32(fields[3], "input length")?;
        let context_ms = parse_f64(fields[4], "context time")?;
        let per_step_ms = parse_f64(fields[5], "per-step time")?;
        let table = match set
            .tables
            .iter_mut()
            .find(|t| t.precision == precision && t.gpus == gpus)
        {
            Some(t) => t,
            None => {
                set.tables.push(LatencyTable::new(precision, gpus));
                set.tables.last_mut().unwrap()
            }
        };
        table.insert(batch, input_len, context_ms, per_step_ms)?;
    }
    Ok(set)
}

/// Render a latency set back to CSV (stable ordering).
pub fn latency_csv(set: &LatencySet) -> String {
    let mut out = String::from(LATENCY_CSV_HEADER);
    out.push('\n');
    for t in &set.tables {
        for (&(batch, input_len), &(context, step)) in &t.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                t.precision, t.gpus, batch, input_len, context, step
            );
        }
    }
    out
}

/// The reference measurements shipped in `data/opt175b_latency.csv`:
/// a 175B decoder-only model on 8 GPUs (fp16), 4 GPUs (int8 per-column) and
/// 2 GPUs (int4, group size 64).
pub fn builtin_latency_set() -> LatencySet {
    parse_latency_csv(include_str!("../../../data/opt175b_latency.csv"))
        .expect("builtin latency data is valid")
}
