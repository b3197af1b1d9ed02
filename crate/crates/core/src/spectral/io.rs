//! Field container: versioned header, rank, resolution and a flat list of
//! `(m1, m2, m3, component, cos, sin)` records. Binary form is little-endian;
//! the JSON form carries the same records.

use serde::{Deserialize, Serialize};

use super::{Frequency, Rank, SpectralError, SpectralField};

pub const MAGIC: [u8; 4] = *b"TFLD";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 1 + 4 + 8;
const RECORD_LEN: usize = 3 * 4 + 4 + 2 * 8;

fn rank_tag(rank: Rank) -> u8 {
    match rank {
        Rank::Scalar => 0,
        Rank::Vector => 1,
    }
}

fn format_err(msg: impl Into<String>) -> SpectralError {
    SpectralError::Format(msg.into())
}

pub fn to_bytes(field: &SpectralField) -> Vec<u8> {
    let records: Vec<_> = field.nonzero_records().collect();
    let mut out = Vec::with_capacity(HEADER_LEN + records.len() * RECORD_LEN);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(rank_tag(field.rank()));
    out.extend_from_slice(&(field.resolution() as u32).to_le_bytes());
    out.extend_from_slice(&(records.len() as u64).to_le_bytes());
    for (c, m, a, b) in records {
        for v in m.0 {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(c as u32).to_le_bytes());
        out.extend_from_slice(&a.to_le_bytes());
        out.extend_from_slice(&b.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], SpectralError> {
        let end = self.pos + N;
        let slice = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| format_err("truncated container"))?;
        self.pos = end;
        Ok(slice.try_into().expect("slice length checked"))
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<SpectralField, SpectralError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take::<4>()? != MAGIC {
        return Err(format_err("bad magic"));
    }
    let version = u32::from_le_bytes(r.take()?);
    if version != VERSION {
        return Err(format_err(format!("unsupported version {version}")));
    }
    let rank = match r.take::<1>()?[0] {
        0 => Rank::Scalar,
        1 => Rank::Vector,
        t => return Err(format_err(format!("bad rank tag {t}"))),
    };
    let resolution = u32::from_le_bytes(r.take()?) as usize;
    let count = u64::from_le_bytes(r.take()?) as usize;
    if bytes.len() != HEADER_LEN + count.saturating_mul(RECORD_LEN) {
        return Err(format_err("record count does not match payload length"));
    }
    let mut field = SpectralField::zeros(rank, resolution);
    for _ in 0..count {
        let m = Frequency([
            i32::from_le_bytes(r.take()?),
            i32::from_le_bytes(r.take()?),
            i32::from_le_bytes(r.take()?),
        ]);
        let c = u32::from_le_bytes(r.take()?) as usize;
        let a = f64::from_le_bytes(r.take()?);
        let b = f64::from_le_bytes(r.take()?);
        set_record(&mut field, c, m, a, b)?;
    }
    Ok(field)
}

fn set_record(
    field: &mut SpectralField,
    c: usize,
    m: Frequency,
    a: f64,
    b: f64,
) -> Result<(), SpectralError> {
    if c >= field.components() {
        return Err(SpectralError::BadComponent(c));
    }
    if !m.is_canonical() {
        return Err(format_err(format!("non-canonical frequency {m}")));
    }
    let resolution = field.resolution();
    let (idx, _) = field
        .layout()
        .index_of(&m)
        .ok_or(SpectralError::FrequencyOutOfRange { m, resolution })?;
    if m.is_zero() && b != 0.0 {
        return Err(format_err("sin amplitude at zero frequency"));
    }
    field.comp_mut(c)[idx] = [a, b];
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldJson {
    pub version: u32,
    pub rank: Rank,
    pub resolution: usize,
    pub records: Vec<(i32, i32, i32, u32, f64, f64)>,
}

impl From<&SpectralField> for FieldJson {
    fn from(field: &SpectralField) -> Self {
        FieldJson {
            version: VERSION,
            rank: field.rank(),
            resolution: field.resolution(),
            records: field
                .nonzero_records()
                .map(|(c, m, a, b)| (m.0[0], m.0[1], m.0[2], c as u32, a, b))
                .collect(),
        }
    }
}

impl TryFrom<&FieldJson> for SpectralField {
    type Error = SpectralError;
    fn try_from(json: &FieldJson) -> Result<Self, SpectralError> {
        if json.version != VERSION {
            return Err(format_err(format!("unsupported version {}", json.version)));
        }
        let mut field = SpectralField::zeros(json.rank, json.resolution);
        for &(m1, m2, m3, c, a, b) in &json.records {
            set_record(&mut field, c as usize, Frequency([m1, m2, m3]), a, b)?;
        }
        Ok(field)
    }
}

pub fn to_json(field: &SpectralField) -> String {
    serde_json::to_string(&FieldJson::from(field)).expect("field json is always serializable")
}

pub fn from_json(text: &str) -> Result<SpectralField, SpectralError> {
    let json: FieldJson = serde_json::from_str(text).map_err(|e| format_err(e.to_string()))?;
    SpectralField::try_from(&json)
}

/// Serde adapter for embedding fields in larger JSON documents.
pub mod serde_field {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(field: &SpectralField, s: S) -> Result<S::Ok, S::Error> {
        FieldJson::from(field).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<SpectralField, D::Error> {
        let json = FieldJson::deserialize(d)?;
        SpectralField::try_from(&json).map_err(serde::de::Error::custom)
    }
}

