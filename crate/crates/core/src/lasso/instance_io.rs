//! Binary instance container.
//!
//! Layout, all little-endian: 8-byte magic, `u32` version, 4 reserved bytes,
//! `u64` m, `u64` n, `m·n` `f64` entries of A in row-major order, `m` entries
//! of b, then γ and λ. Generation parameters live in a JSON sidecar next to
//! the file (`<name>.json`).

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::linalg::DenseMatrix;

use super::{LassoError, LassoInstance, LassoOperator};

pub const MAGIC: &[u8; 8] = b"INEXLSSO";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub seed: Option<u64>,
    pub generator: String,
    #[serde(default)]
    pub params: BTreeMap<String, serde_json::Value>,
}

fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Writes `inst` and its sidecar. Only explicit matrices can be stored.
pub fn write_instance(path: &Path, inst: &LassoInstance, meta: &InstanceMeta) -> Result<(), LassoError> {
    let LassoOperator::Dense(a) = &inst.a else {
        return Err(LassoError::Invalid("only dense instances can be written".into()));
    };
    let mut buf = Vec::with_capacity(32 + 8 * (a.as_slice().len() + inst.b.len() + 2));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&[0u8; 4]);
    buf.extend_from_slice(&(a.nrows() as u64).to_le_bytes());
    buf.extend_from_slice(&(a.ncols() as u64).to_le_bytes());
    for v in a.as_slice().iter().chain(&inst.b).chain([&inst.gamma, &inst.lambda]) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::File::create(path)?.write_all(&buf)?;
    fs::write(sidecar(path), serde_json::to_string_pretty(meta)?)?;
    Ok(())
}

fn take<const N: usize>(data: &[u8], pos: &mut usize) -> Result<[u8; N], LassoError> {
    let end = *pos + N;
    let bytes = data
        .get(*pos..end)
        .ok_or_else(|| LassoError::Format("file is truncated".into()))?;
    *pos = end;
    Ok(bytes.try_into().expect("slice has length N"))
}

/// Reads an instance and, if present, its sidecar.
pub fn read_instance(path: &Path) -> Result<(LassoInstance, Option<InstanceMeta>), LassoError> {
    let mut data = Vec::new();
    fs::File::open(path)?.read_to_end(&mut data)?;
    let mut pos = 0;
    if &take::<8>(&data, &mut pos)? != MAGIC {
        return Err(LassoError::Format("bad magic".into()));
    }
    let version = u32::from_le_bytes(take(&data, &mut pos)?);
    if version != VERSION {
        return Err(LassoError::Format(format!("unsupported version {version}")));
    }
    take::<4>(&data, &mut pos)?;
    let m = u64::from_le_bytes(take(&data, &mut pos)?) as usize;
    let n = u64::from_le_bytes(take(&data, &mut pos)?) as usize;
    let count = m
        .checked_mul(n)
        .and_then(|mn| mn.checked_add(m + 2))
        .ok_or_else(|| LassoError::Format("dimensions overflow".into()))?;
    if data.len() - pos != 8 * count {
        return Err(LassoError::Format(format!(
            "expected {} payload bytes for {m}x{n}, found {}",
            8 * count,
            data.len() - pos
        )));
    }
    let mut vals = Vec::with_capacity(count);
    for _ in 0..count {
        vals.push(f64::from_le_bytes(take(&data, &mut pos)?));
    }
    let lambda = vals.pop().expect("count >= 2");
    let gamma = vals.pop().expect("count >= 2");
    let b = vals.split_off(m * n);
    let a = DenseMatrix::from_row_major(m, n, vals).map_err(|e| LassoError::Format(e.to_string()))?;
    let inst = LassoInstance::new(LassoOperator::Dense(a), b, gamma, lambda)?;
    let side = sidecar(path);
    let meta = if side.exists() {
        Some(serde_json::from_str(&fs::read_to_string(side)?)?)
    } else {
        None
    };
    Ok((inst, meta))
}
