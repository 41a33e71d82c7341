//! Binary model files.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "TTCV" | version u16 | flags u16 | section count u32
//! section table: { tag [4]u8, offset u64, length u64, crc32 u32 } per section
//! table crc32 u32 (over everything before it)
//! section payloads
//! ```
//!
//! Sections, always written in this order:
//!
//! - `MANI`: canonical manifest TOML
//! - `META`: rank setting, e.g. `rank:8`
//! - `TTLY`: TT layers
//! - `DNLY`: dense pass-through layers
//!
//! A layer record starts with `id` (u32 length + UTF-8), kernel, in/out
//! channels (u32 each) and a bias flag (u8). TT records continue with the
//! order `N` (u32), the internal ranks `r_1..r_N` (u32 each) and the core
//! values; dense records continue with the `(m, n, c, ċ)` weights. Bias
//! values come last. All values are stored as `f32`; a model read back
//! from disk therefore writes out byte-identically.

use std::path::Path;

use super::compress::{CompressedModel, LayerWeights, ModelLayer};
use super::manifest::NetworkManifest;
use crate::conv::{DenseConvKernel, TtConvKernel};
use crate::error::{Error, Result};
use crate::tt::{TtCore, TtTensor};

pub const MAGIC: [u8; 4] = *b"TTCV";
pub const FORMAT_VERSION: u16 = 1;

const TABLE_ENTRY_LEN: usize = 4 + 8 + 8 + 4;
const HEADER_LEN: usize = 4 + 2 + 2 + 4;

pub fn save_model(model: &CompressedModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, model_to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<CompressedModel> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    model_from_bytes(&bytes)
}

pub fn model_to_bytes(model: &CompressedModel) -> Vec<u8> {
    let mut tt = Writer::default();
    let mut dense = Writer::default();
    let tt_layers: Vec<_> = model
        .layers
        .iter()
        .filter_map(|l| match &l.weights {
            LayerWeights::Tt(t) => Some((l.id.as_str(), t)),
            _ => None,
        })
        .collect();
    let dense_layers: Vec<_> = model
        .layers
        .iter()
        .filter_map(|l| match &l.weights {
            LayerWeights::Dense(d) => Some((l.id.as_str(), d)),
            _ => None,
        })
        .collect();

    tt.u32(tt_layers.len() as u32);
    for (id, t) in tt_layers {
        let spec = t.spec();
        tt.layer_head(id, spec.kernel(), spec.in_channels(), spec.out_channels(), spec.has_bias());
        let ranks = t.internal_ranks();
        tt.u32(ranks.len() as u32);
        for r in ranks {
            tt.u32(r as u32);
        }
        for core in t.train().cores() {
            tt.f32s(core.data());
        }
        if let Some(b) = t.bias() {
            tt.f32s(b);
        }
    }
    dense.u32(dense_layers.len() as u32);
    for (id, d) in dense_layers {
        let spec = d.spec();
        dense.layer_head(id, spec.kernel(), spec.in_channels(), spec.out_channels(), spec.has_bias());
        dense.f32s(d.weights());
        if let Some(b) = d.bias() {
            dense.f32s(b);
        }
    }

    let sections: [(&[u8; 4], Vec<u8>); 4] = [
        (b"MANI", model.manifest.to_toml().into_bytes()),
        (b"META", model.setting.to_string().into_bytes()),
        (b"TTLY", tt.0),
        (b"DNLY", dense.0),
    ];
    let mut out = Writer::default();
    out.0.extend_from_slice(&MAGIC);
    out.u16(FORMAT_VERSION);
    out.u16(0);
    out.u32(sections.len() as u32);
    let mut offset = (HEADER_LEN + sections.len() * TABLE_ENTRY_LEN + 4) as u64;
    for (tag, body) in &sections {
        out.0.extend_from_slice(*tag);
        out.u64(offset);
        out.u64(body.len() as u64);
        out.u32(crc32fast::hash(body));
        offset += body.len() as u64;
    }
    let table_crc = crc32fast::hash(&out.0);
    out.u32(table_crc);
    for (_, body) in &sections {
        out.0.extend_from_slice(body);
    }
    out.0
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<CompressedModel> {
    let mut head = Reader::new(bytes, "header");
    if head.take(4)? != MAGIC {
        return Err(Error::Corruption("missing TTCV magic".into()));
    }
    let version = head.u16()?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let _flags = head.u16()?;
    let count = head.u32()? as usize;
    let mut table = Vec::new();
    for _ in 0..count {
        let tag: [u8; 4] = head.take(4)?.try_into().unwrap();
        table.push((tag, head.u64()?, head.u64()?, head.u32()?));
    }
    let table_end = head.pos;
    if head.u32()? != crc32fast::hash(&bytes[..table_end]) {
        return Err(Error::Corruption("section table checksum mismatch".into()));
    }
    let section = |want: &[u8; 4]| -> Result<&[u8]> {
        let name = String::from_utf8_lossy(want);
        let &(_, offset, len, crc) = table
            .iter()
            .find(|e| &e.0 == want)
            .ok_or_else(|| Error::Corruption(format!("section {name} missing")))?;
        let body = usize::try_from(offset)
            .ok()
            .zip(usize::try_from(len).ok())
            .and_then(|(o, l)| bytes.get(o..o.checked_add(l)?))
            .ok_or_else(|| Error::Corruption(format!("section {name} is truncated")))?;
        if crc32fast::hash(body) != crc {
            return Err(Error::Corruption(format!("section {name} checksum mismatch")));
        }
        Ok(body)
    };

    let text = |tag: &[u8; 4]| -> Result<String> {
        String::from_utf8(section(tag)?.to_vec())
            .map_err(|_| Error::Corruption(format!("section {} is not UTF-8", String::from_utf8_lossy(tag))))
    };
    let manifest = NetworkManifest::parse(&text(b"MANI")?, "embedded manifest", None)
        .map_err(|e| Error::Corruption(format!("embedded manifest: {e}")))?;
    let setting = text(b"META")?
        .parse()
        .map_err(|e| Error::Corruption(format!("setting: {e}")))?;

    let mut found: Vec<Option<LayerWeights>> = vec![None; manifest.layers.len()];
    let mut place = |id: String, w: LayerWeights| -> Result<()> {
        let i = manifest
            .layers
            .iter()
            .position(|l| l.id == id)
            .ok_or_else(|| Error::Corruption(format!("layer {id:?} is not in the embedded manifest")))?;
        if found[i].replace(w).is_some() {
            return Err(Error::Corruption(format!("layer {id:?} stored twice")));
        }
        Ok(())
    };

    let mut r = Reader::new(section(b"TTLY")?, "TTLY");
    for _ in 0..r.u32()? {
        let (id, entry) = r.layer_head(&manifest)?;
        let spec = entry.spec.clone();
        let n = r.u32()? as usize;
        if n != spec.order() {
            return Err(Error::Corruption(format!("layer {id:?}: stored order {n}, manifest says {}", spec.order())));
        }
        let mut ranks = vec![1];
        for _ in 0..n {
            ranks.push(r.u32()? as usize);
        }
        ranks.push(1);
        let k2 = spec.kernel() * spec.kernel();
        let modes: Vec<usize> = std::iter::once(k2)
            .chain(
                spec.in_plan()
                    .factors()
                    .iter()
                    .zip(spec.out_plan().factors())
                    .map(|(a, b)| a * b),
            )
            .collect();
        let mut cores = Vec::with_capacity(modes.len());
        for (i, &m) in modes.iter().enumerate() {
            let len = ranks[i]
                .checked_mul(m)
                .and_then(|x| x.checked_mul(ranks[i + 1]))
                .ok_or_else(|| Error::Corruption(format!("layer {id:?}: core size overflows")))?;
            let data = r.f32s(len)?;
            cores.push(TtCore::new(ranks[i], m, ranks[i + 1], data).map_err(|e| corrupt(&id, e))?);
        }
        let bias = spec.has_bias().then(|| r.f32s(spec.out_channels())).transpose()?;
        let train = TtTensor::from_cores(cores).map_err(|e| corrupt(&id, e))?;
        let ttk = TtConvKernel::from_parts(spec, train, bias).map_err(|e| corrupt(&id, e))?;
        place(id, LayerWeights::Tt(ttk))?;
    }
    r.finish()?;

    let mut r = Reader::new(section(b"DNLY")?, "DNLY");
    for _ in 0..r.u32()? {
        let (id, entry) = r.layer_head(&manifest)?;
        let spec = entry.spec.clone();
        let weights = r.f32s(spec.dense_params())?;
        let bias = spec.has_bias().then(|| r.f32s(spec.out_channels())).transpose()?;
        let kernel = DenseConvKernel::new(spec, weights, bias).map_err(|e| corrupt(&id, e))?;
        place(id, LayerWeights::Dense(kernel))?;
    }
    r.finish()?;

    let layers = manifest
        .layers
        .iter()
        .zip(found)
        .map(|(entry, w)| {
            w.map(|weights| ModelLayer {
                id: entry.id.clone(),
                weights,
            })
            .ok_or_else(|| Error::Corruption(format!("layer {:?} has no stored weights", entry.id)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CompressedModel {
        manifest,
        setting,
        layers,
    })
}

fn corrupt(id: &str, e: Error) -> Error {
    Error::Corruption(format!("layer {id:?}: {e}"))
}

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f32s(&mut self, vs: &[f64]) {
        for &v in vs {
            self.0.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    fn layer_head(&mut self, id: &str, k: usize, cin: usize, cout: usize, bias: bool) {
        self.u32(id.len() as u32);
        self.0.extend_from_slice(id.as_bytes());
        self.u32(k as u32);
        self.u32(cin as u32);
        self.u32(cout as u32);
        self.0.push(bias as u8);
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8], what: &'static str) -> Self {
        Self { bytes, pos: 0, what }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Corruption(format!("{} ends early at byte {}", self.what, self.bytes.len())))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f64>> {
        let len = n
            .checked_mul(4)
            .ok_or_else(|| Error::Corruption(format!("{}: value count overflows", self.what)))?;
        let values: Vec<f64> = self
            .take(len)?
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
            .collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Corruption(format!("{}: non-finite weight value", self.what)));
        }
        Ok(values)
    }

    fn layer_head<'m>(&mut self, manifest: &'m NetworkManifest) -> Result<(String, &'m super::manifest::LayerEntry)> {
        let len = self.u32()? as usize;
        let id = String::from_utf8(self.take(len)?.to_vec())
            .map_err(|_| Error::Corruption(format!("{}: layer id is not UTF-8", self.what)))?;
        let (k, cin, cout) = (self.u32()? as usize, self.u32()? as usize, self.u32()? as usize);
        let bias = self.u8()? != 0;
        let entry = manifest
            .layer(&id)
            .ok_or_else(|| Error::Corruption(format!("layer {id:?} is not in the embedded manifest")))?;
        let s = &entry.spec;
        if (k, cin, cout, bias) != (s.kernel(), s.in_channels(), s.out_channels(), s.has_bias()) {
            return Err(Error::Corruption(format!("layer {id:?}: stored shape disagrees with the manifest")));
        }
        Ok((id, entry))
    }

    fn finish(&self) -> Result<()> {
        if self.pos == self.bytes.len() {
            Ok(())
        } else {
            Err(Error::Corruption(format!(
                "{}: {} trailing bytes",
                self.what,
                self.bytes.len() - self.pos
            )))
        }
    }
}
