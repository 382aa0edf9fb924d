//! Binary snapshot container.
//!
//! Layout: the 8-byte magic `BDGZSNAP`, a `u32` format version, a `u64`
//! metadata length, the metadata as JSON, then the arrays listed in the
//! metadata as little-endian `f64`. Scalars in the JSON block are written
//! with shortest round-trip formatting, so reloading is bit-exact.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64 as c64;
use serde::{Deserialize, Serialize};

use crate::basis::BasisSet;
use crate::error::{Error, Result};
use crate::gp::{CondensateState, PhysicalParams};
use crate::grid::{Grid, LaplacianScheme};
use crate::quadform::{QuadraticForm, QuadraticFormRecord};

pub const MAGIC: &[u8; 8] = b"BDGZSNAP";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum Snapshot {
    Condensate(CondensateState),
    Basis(BasisSet),
    QuadraticForm(QuadraticForm),
}

#[derive(Serialize, Deserialize)]
struct ArrayInfo {
    name: String,
    len: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    kind: String,
    arrays: Vec<ArrayInfo>,
    body: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct CondensateMeta {
    grid: Grid,
    scheme: LaplacianScheme,
    params: PhysicalParams,
    mu0: f64,
    residual: f64,
    iterations: usize,
}

#[derive(Serialize, Deserialize)]
struct BasisMeta {
    grid: Grid,
    functions: usize,
    wavevectors: Option<Vec<Vec<f64>>>,
}

fn split(z: &[c64]) -> (Vec<f64>, Vec<f64>) {
    (z.iter().map(|v| v.re).collect(), z.iter().map(|v| v.im).collect())
}

fn join(re: &[f64], im: &[f64]) -> Vec<c64> {
    re.iter().zip(im).map(|(&a, &b)| c64::new(a, b)).collect()
}

fn json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("plain numeric metadata")
}

fn parse<T: for<'de> Deserialize<'de>>(v: serde_json::Value) -> Result<T> {
    serde_json::from_value(v).map_err(|e| Error::Format(format!("snapshot metadata: {e}")))
}

impl Snapshot {
    fn parts(&self) -> (&'static str, serde_json::Value, Vec<(&'static str, Vec<f64>)>) {
        match self {
            Snapshot::Condensate(s) => {
                let (re, im) = split(&s.phi0);
                let meta = CondensateMeta {
                    grid: s.grid.clone(),
                    scheme: s.scheme,
                    params: s.params.clone(),
                    mu0: s.mu0,
                    residual: s.residual,
                    iterations: s.iterations,
                };
                ("condensate", json(&meta), vec![("phi0_re", re), ("phi0_im", im)])
            }
            Snapshot::Basis(b) => {
                let flat: Vec<c64> = b.functions.iter().flatten().copied().collect();
                let (re, im) = split(&flat);
                let meta = BasisMeta {
                    grid: b.grid.clone(),
                    functions: b.functions.len(),
                    wavevectors: b.wavevectors.clone(),
                };
                ("basis", json(&meta), vec![("mu", b.mu.clone()), ("functions_re", re), ("functions_im", im)])
            }
            Snapshot::QuadraticForm(q) => {
                let mut rec = QuadraticFormRecord::from(q);
                let arrays = vec![
                    ("a_re", std::mem::take(&mut rec.a_re)),
                    ("a_im", std::mem::take(&mut rec.a_im)),
                    ("b_re", std::mem::take(&mut rec.b_re)),
                    ("b_im", std::mem::take(&mut rec.b_im)),
                    ("d_re", std::mem::take(&mut rec.d_re)),
                    ("d_im", std::mem::take(&mut rec.d_im)),
                ];
                ("quadratic_form", json(&rec), arrays)
            }
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let (kind, body, arrays) = self.parts();
        let header = Header {
            kind: kind.to_string(),
            arrays: arrays.iter().map(|(n, v)| ArrayInfo { name: n.to_string(), len: v.len() }).collect(),
            body,
        };
        let meta = serde_json::to_vec(&header).expect("plain numeric metadata");
        let total: usize = arrays.iter().map(|(_, v)| v.len()).sum();
        let mut out = Vec::with_capacity(20 + meta.len() + 8 * total);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
        out.extend_from_slice(&meta);
        for (_, v) in &arrays {
            for x in v {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Snapshot> {
        let short = || Error::Format("snapshot truncated".into());
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return Err(Error::Format("not a snapshot file".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(Error::Format(format!("unsupported snapshot version {version}")));
        }
        let meta_len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
        let meta = bytes.get(20..20usize.checked_add(meta_len).ok_or_else(short)?).ok_or_else(short)?;
        let header: Header =
            serde_json::from_slice(meta).map_err(|e| Error::Format(format!("snapshot metadata: {e}")))?;
        let mut pos = 20 + meta_len;
        let mut arrays = std::collections::HashMap::new();
        for info in &header.arrays {
            let end = info.len.checked_mul(8).and_then(|n| n.checked_add(pos)).ok_or_else(short)?;
            let raw = bytes.get(pos..end).ok_or_else(short)?;
            let v: Vec<f64> =
                raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
            arrays.insert(info.name.clone(), v);
            pos = end;
        }
        if pos != bytes.len() {
            return Err(Error::Format("trailing bytes after snapshot arrays".into()));
        }
        let mut take = |name: &str| {
            arrays.remove(name).ok_or_else(|| Error::Format(format!("snapshot lacks array `{name}`")))
        };
        match header.kind.as_str() {
            "condensate" => {
                let m: CondensateMeta = parse(header.body)?;
                let phi0 = join(&take("phi0_re")?, &take("phi0_im")?);
                if phi0.len() != m.grid.len() {
                    return Err(Error::Dimension { expected: m.grid.len(), got: phi0.len() });
                }
                Ok(Snapshot::Condensate(CondensateState {
                    grid: m.grid,
                    scheme: m.scheme,
                    params: m.params,
                    phi0,
                    mu0: m.mu0,
                    residual: m.residual,
                    iterations: m.iterations,
                }))
            }
            "basis" => {
                let m: BasisMeta = parse(header.body)?;
                let mu = take("mu")?;
                let flat = join(&take("functions_re")?, &take("functions_im")?);
                let n = m.grid.len();
                if mu.len() != m.functions || flat.len() != n * m.functions {
                    return Err(Error::Format("basis arrays do not match the metadata".into()));
                }
                Ok(Snapshot::Basis(BasisSet {
                    grid: m.grid,
                    mu,
                    functions: flat.chunks(n.max(1)).map(|c| c.to_vec()).collect(),
                    wavevectors: m.wavevectors,
                }))
            }
            "quadratic_form" => {
                let mut rec: QuadraticFormRecord = parse(header.body)?;
                rec.a_re = take("a_re")?;
                rec.a_im = take("a_im")?;
                rec.b_re = take("b_re")?;
                rec.b_im = take("b_im")?;
                rec.d_re = take("d_re")?;
                rec.d_im = take("d_im")?;
                Ok(Snapshot::QuadraticForm(QuadraticForm::try_from(rec)?))
            }
            other => Err(Error::Format(format!("unknown snapshot kind `{other}`"))),
        }
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Snapshot> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Snapshot::from_bytes(&bytes)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Snapshot> {
        Snapshot::from_bytes(&std::fs::read(path)?)
    }

    pub fn into_condensate(self) -> Result<CondensateState> {
        match self {
            Snapshot::Condensate(s) => Ok(s),
            _ => Err(Error::Format("snapshot does not hold a condensate".into())),
        }
    }

    pub fn into_basis(self) -> Result<BasisSet> {
        match self {
            Snapshot::Basis(b) => Ok(b),
            _ => Err(Error::Format("snapshot does not hold a basis".into())),
        }
    }

    pub fn into_quadratic_form(self) -> Result<QuadraticForm> {
        match self {
            Snapshot::QuadraticForm(q) => Ok(q),
            _ => Err(Error::Format("snapshot does not hold a quadratic form".into())),
        }
    }
}
