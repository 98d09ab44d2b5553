//! Binary checkpoint files.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   b"UPELTCKP"
//! version u32
//! section*  tag [u8; 4], length u64, payload
//! ```
//!
//! Sections, in order: one `CONF` (UTF-8 TOML holding the model config,
//! composition, head and task labels), one `PARM` per tensor in store order
//! (name length u32, name, trainable u8, rank u32, dims u64 each, values as
//! f64), and a closing empty `END `.

use serde::{Deserialize, Serialize};
use unipelt_core::data::TaskKind;
use unipelt_core::{attach, init_model, AdaptedModel, CompositionSpec, ModelConfig, TaskHead, Tensor};

use crate::error::{CliError, CliResult};

pub const MAGIC: &[u8; 8] = b"UPELTCKP";
pub const VERSION: u32 = 1;

/// Task description stored alongside the weights so evaluation can decode
/// dataset labels the same way training did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskInfo {
    pub kind: TaskKind,
    #[serde(default)]
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Meta {
    model: ModelConfig,
    composition: CompositionSpec,
    head: Option<TaskHead>,
    task: Option<TaskInfo>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: AdaptedModel,
    pub task: Option<TaskInfo>,
}

fn section(out: &mut Vec<u8>, tag: &[u8; 4], payload: &[u8]) {
    out.extend_from_slice(tag);
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(payload);
}

pub fn encode(model: &AdaptedModel, task: Option<&TaskInfo>) -> CliResult<Vec<u8>> {
    let meta = Meta {
        model: model.config().clone(),
        composition: model.spec().clone(),
        head: model.model().head(),
        task: task.cloned(),
    };
    let conf = toml::to_string(&meta).map_err(|e| CliError::Checkpoint(e.to_string()))?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    section(&mut out, b"CONF", conf.as_bytes());
    for (_, p) in model.store().iter() {
        let mut blob = Vec::with_capacity(32 + p.name.len() + 8 * p.value.len());
        blob.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
        blob.extend_from_slice(p.name.as_bytes());
        blob.push(u8::from(p.trainable));
        blob.extend_from_slice(&(p.value.shape().len() as u32).to_le_bytes());
        for &d in p.value.shape() {
            blob.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in p.value.data() {
            blob.extend_from_slice(&v.to_le_bytes());
        }
        section(&mut out, b"PARM", &blob);
    }
    section(&mut out, b"END ", &[]);
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> CliResult<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| CliError::Checkpoint(format!("truncated at byte {}", self.at)))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> CliResult<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> CliResult<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn usize(&mut self) -> CliResult<usize> {
        usize::try_from(self.u64()?).map_err(|_| CliError::Checkpoint("size overflows usize".into()))
    }

    fn section(&mut self) -> CliResult<([u8; 4], &'a [u8])> {
        let tag: [u8; 4] = self.take(4)?.try_into().expect("4 bytes");
        let len = self.usize()?;
        Ok((tag, self.take(len)?))
    }
}

struct RawParam {
    name: String,
    trainable: bool,
    value: Tensor,
}

fn parse_param(payload: &[u8]) -> CliResult<RawParam> {
    let mut r = Reader { bytes: payload, at: 0 };
    let n = r.u32()? as usize;
    let name = std::str::from_utf8(r.take(n)?)
        .map_err(|_| CliError::Checkpoint("parameter name is not UTF-8".into()))?
        .to_string();
    let trainable = match r.take(1)?[0] {
        0 => false,
        1 => true,
        b => return Err(CliError::Checkpoint(format!("`{name}`: bad trainable flag {b}"))),
    };
    let rank = r.u32()? as usize;
    let shape = (0..rank).map(|_| r.usize()).collect::<CliResult<Vec<_>>>()?;
    let count = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
    let count = count.ok_or_else(|| CliError::Checkpoint(format!("`{name}`: shape overflows")))?;
    let raw = r.take(count.checked_mul(8).ok_or_else(|| CliError::Checkpoint("size overflow".into()))?)?;
    if r.at != payload.len() {
        return Err(CliError::Checkpoint(format!("`{name}`: trailing bytes")));
    }
    let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Ok(RawParam { name, trainable, value: Tensor::new(&shape, data)? })
}

/// Rebuilds the model described by the config section and installs the
/// stored tensors. Every stored name must match the rebuilt model exactly.
pub fn decode(bytes: &[u8]) -> CliResult<Checkpoint> {
    let mut r = Reader { bytes, at: 0 };
    if r.take(MAGIC.len()).ok() != Some(MAGIC.as_slice()) {
        return Err(CliError::Checkpoint("not a checkpoint file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(CliError::Checkpoint(format!("unsupported version {version}")));
    }
    let (tag, conf) = r.section()?;
    if &tag != b"CONF" {
        return Err(CliError::Checkpoint("first section must be CONF".into()));
    }
    let conf = std::str::from_utf8(conf).map_err(|_| CliError::Checkpoint("CONF is not UTF-8".into()))?;
    let meta: Meta = toml::from_str(conf).map_err(|e| CliError::Checkpoint(format!("CONF: {e}")))?;
    let base = init_model(&meta.model, meta.head, 0)?;
    let mut model = attach(base, &meta.composition, 0)?;

    let mut seen = std::collections::HashSet::new();
    loop {
        let (tag, payload) = r.section()?;
        match &tag {
            b"PARM" => {
                let p = parse_param(payload)?;
                let id = model
                    .store()
                    .find(&p.name)
                    .ok_or_else(|| CliError::Checkpoint(format!("unexpected parameter `{}`", p.name)))?;
                if model.store().get(id).trainable != p.trainable {
                    return Err(CliError::Checkpoint(format!("`{}`: trainable flag differs", p.name)));
                }
                if !seen.insert(id) {
                    return Err(CliError::Checkpoint(format!("`{}` stored twice", p.name)));
                }
                model.store_mut().assign(&p.name, p.value)?;
            }
            b"END " => break,
            other => {
                return Err(CliError::Checkpoint(format!("unknown section {:?}", String::from_utf8_lossy(other))))
            }
        }
    }
    if r.at != bytes.len() {
        return Err(CliError::Checkpoint("data after END section".into()));
    }
    if seen.len() != model.store().len() {
        return Err(CliError::Checkpoint(format!(
            "expected {} parameters, found {}",
            model.store().len(),
            seen.len()
        )));
    }
    Ok(Checkpoint { model, task: meta.task })
}

pub fn save(path: &std::path::Path, model: &AdaptedModel, task: Option<&TaskInfo>) -> CliResult<()> {
    crate::error::write_bytes(path, &encode(model, task)?)
}

pub fn load(path: &std::path::Path) -> CliResult<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|source| CliError::Read { path: path.to_path_buf(), source })?;
    decode(&bytes)
}
