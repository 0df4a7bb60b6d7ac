//! Parameter files.
//!
//! JSON layout ([`MlpRecord`]):
//!
//! ```json
//! {"head": {"kind": "identity"},
//!  "layers": [{"rows": 2, "cols": 3, "weight": [..row-major..], "bias": [..]}]}
//! ```
//!
//! Binary layout, all integers and floats little-endian:
//!
//! ```text
//! magic      8 bytes  "LESRMLP1"
//! layers     u32
//! head tag   u8       0 = identity, 1 = bound * tanh
//! head bound f64      (0 for identity)
//! per layer: rows u32, cols u32, rows*cols f64 weight (row-major), rows f64 bias
//! ```

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{Head, Layer, MlpParams, NnError};

pub const MLP_MAGIC: &[u8; 8] = b"LESRMLP1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub rows: usize,
    pub cols: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpRecord {
    pub head: Head,
    pub layers: Vec<LayerRecord>,
}

impl From<&MlpParams> for MlpRecord {
    fn from(p: &MlpParams) -> Self {
        MlpRecord {
            head: p.head,
            layers: p
                .layers
                .iter()
                .map(|l| LayerRecord {
                    rows: l.weight.nrows(),
                    cols: l.weight.ncols(),
                    weight: l.weight.iter().copied().collect(),
                    bias: l.bias.to_vec(),
                })
                .collect(),
        }
    }
}

impl TryFrom<MlpRecord> for MlpParams {
    type Error = NnError;

    fn try_from(r: MlpRecord) -> Result<Self, NnError> {
        let layers = r
            .layers
            .into_iter()
            .enumerate()
            .map(|(i, l)| {
                if l.bias.len() != l.rows {
                    return Err(NnError::Malformed(format!(
                        "layer {i}: bias has {} entries for {} rows",
                        l.bias.len(),
                        l.rows
                    )));
                }
                let weight = Array2::from_shape_vec((l.rows, l.cols), l.weight)
                    .map_err(|e| NnError::Malformed(format!("layer {i}: {e}")))?;
                Ok(Layer {
                    weight,
                    bias: Array1::from(l.bias),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        MlpParams::from_layers(layers, r.head)
    }
}

impl MlpParams {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&MlpRecord::from(self)).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self, NnError> {
        let record: MlpRecord =
            serde_json::from_str(text).map_err(|e| NnError::Malformed(e.to_string()))?;
        record.try_into()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + 8 * self.param_count());
        out.extend_from_slice(MLP_MAGIC);
        out.extend_from_slice(&(self.layers.len() as u32).to_le_bytes());
        let (tag, bound) = match self.head {
            Head::Identity => (0u8, 0.0),
            Head::TanhScaled { bound } => (1u8, bound),
        };
        out.push(tag);
        out.extend_from_slice(&bound.to_le_bytes());
        for l in &self.layers {
            out.extend_from_slice(&(l.weight.nrows() as u32).to_le_bytes());
            out.extend_from_slice(&(l.weight.ncols() as u32).to_le_bytes());
            l.weight
                .iter()
                .chain(l.bias.iter())
                .for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NnError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MLP_MAGIC {
            return Err(NnError::Malformed("bad magic".into()));
        }
        let count = r.u32()? as usize;
        let head = match r.take(1)?[0] {
            0 => {
                r.f64()?;
                Head::Identity
            }
            1 => Head::TanhScaled { bound: r.f64()? },
            t => return Err(NnError::Malformed(format!("unknown head tag {t}"))),
        };
        let mut layers = Vec::with_capacity(count);
        for _ in 0..count {
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            let weight = (0..rows * cols)
                .map(|_| r.f64())
                .collect::<Result<Vec<_>, _>>()?;
            let bias = (0..rows).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
            layers.push(Layer {
                weight: Array2::from_shape_vec((rows, cols), weight)
                    .map_err(|e| NnError::Malformed(e.to_string()))?,
                bias: Array1::from(bias),
            });
        }
        if r.pos != bytes.len() {
            return Err(NnError::Malformed(format!(
                "{} trailing bytes",
                bytes.len() - r.pos
            )));
        }
        MlpParams::from_layers(layers, head)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        let end = self.pos + n;
        let slice = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| NnError::Malformed("unexpected end of data".into()))?;
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn f64(&mut self) -> Result<f64, NnError> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}
