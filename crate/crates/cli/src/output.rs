//! Run artifacts: metrics.csv, summary.json, params.bin. All files are
//! written atomically (write to a temp name, then rename) and all float
//! formatting uses the shortest round-trip representation, so reruns with
//! the same config and seed are byte-identical.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use nsfx_core::training::{MetricsRecord, TrainedModel};
use serde::Serialize;

pub const METRICS_HEADER: &str = "iteration,loss,train_err,test_err,p_bar,lr,ms";

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = std::fs::File::create(&tmp)
            .with_context(|| format!("cannot create {}", tmp.display()))?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)
        .with_context(|| format!("cannot rename into {}", path.display()))?;
    Ok(())
}

pub fn metrics_csv(records: &[MetricsRecord]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.iteration, r.loss, r.train_err, r.test_err, r.p_bar, r.lr, r.ms
        ));
    }
    out
}

#[derive(Serialize)]
pub struct Summary {
    pub final_train_err: f64,
    pub final_test_err: f64,
    pub best_test_err: f64,
    pub final_loss: f64,
    pub final_p_bar: f64,
    pub seed: u64,
    pub total_iterations: u64,
    pub wall_time_ms: u64,
    pub config: BTreeMap<String, String>,
}

impl Summary {
    pub fn from_metrics(
        records: &[MetricsRecord],
        seed: u64,
        total_iterations: u64,
        wall_time_ms: u64,
        config: BTreeMap<String, String>,
    ) -> Summary {
        let last = records.last().expect("metrics never empty");
        Summary {
            final_train_err: last.train_err,
            final_test_err: last.test_err,
            best_test_err: records
                .iter()
                .map(|r| r.test_err)
                .fold(f64::INFINITY, f64::min),
            final_loss: last.loss,
            final_p_bar: last.p_bar,
            seed,
            total_iterations,
            wall_time_ms,
            config,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

// params.bin: magic "NSFX", then little-endian u32 version (1), u32 tensor
// count, and per tensor: u32 name length, name bytes, u32 rank, u32 dims,
// then f32 data in row-major order.
const PARAMS_MAGIC: &[u8; 4] = b"NSFX";
const PARAMS_VERSION: u32 = 1;

pub fn params_bin(model: &TrainedModel) -> Vec<u8> {
    let blocks = model.param_blocks();
    let mut out = Vec::new();
    out.extend_from_slice(PARAMS_MAGIC);
    out.extend_from_slice(&PARAMS_VERSION.to_le_bytes());
    out.extend_from_slice(&(blocks.len() as u32).to_le_bytes());
    for (name, _, tensor) in blocks {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(tensor.shape().len() as u32).to_le_bytes());
        for &d in tensor.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in tensor.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

/// Parse a params.bin buffer back into (name, dims, values) triples.
pub fn read_params_bin(bytes: &[u8]) -> Result<Vec<(String, Vec<usize>, Vec<f32>)>> {
    let mut pos = 0usize;
    let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
        if *pos + n > bytes.len() {
            bail!("params.bin truncated at offset {pos}");
        }
        let s = &bytes[*pos..*pos + n];
        *pos += n;
        Ok(s)
    };
    let take_u32 = |pos: &mut usize| -> Result<u32> {
        Ok(u32::from_le_bytes(take(pos, 4)?.try_into().unwrap()))
    };

    if take(&mut pos, 4)? != PARAMS_MAGIC {
        bail!("params.bin: bad magic");
    }
    let version = take_u32(&mut pos)?;
    if version != PARAMS_VERSION {
        bail!("params.bin: unsupported version {version}");
    }
    let count = take_u32(&mut pos)? as usize;
    let mut tensors = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = take_u32(&mut pos)? as usize;
        let name = String::from_utf8(take(&mut pos, name_len)?.to_vec())
            .context("params.bin: tensor name is not UTF-8")?;
        let rank = take_u32(&mut pos)? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(take_u32(&mut pos)? as usize);
        }
        let n: usize = dims.iter().product();
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            values.push(f32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()));
        }
        tensors.push((name, dims, values));
    }
    if pos != bytes.len() {
        bail!("params.bin: {} trailing bytes", bytes.len() - pos);
    }
    Ok(tensors)
}
