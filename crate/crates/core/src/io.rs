//! Binary descriptor (`GMVD`) and model (`GMVM`) files, little-endian.
//!
//! ```text
//! GMVD: "GMVD" u32 version=1 u32 d u32 N
//!       f32[d·N] column-major, u32[N] identity labels
//! GMVM: "GMVM" u32 version=1 u32 d u32 ℓ u32 S u32 M u8 method
//!       f64 ξ f64 γ f64 η u64 seed
//!       f32[d·ℓ] W column-major, i8[ℓ·M] R column-major,
//!       u32[M] group sizes, u32[N] member indices grouped in order
//! ```

use std::fs;
use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::DMatrix;

use crate::data::{GroupPartition, QueryLabel, QuerySet, TemplateMatrix};
use crate::error::{GmvError, Result};
use crate::model::{GroupModel, Method, ModelParams};
use crate::procrustes::orthogonal_procrustes;
use crate::ternary::{TernaryCode, UNIT_NORM_TOL};

pub const DESCRIPTOR_MAGIC: &[u8; 4] = b"GMVD";
pub const MODEL_MAGIC: &[u8; 4] = b"GMVM";
pub const FORMAT_VERSION: u32 = 1;

/// Identity label marking an impostor in a query descriptor file.
pub const IMPOSTOR_LABEL: u32 = u32::MAX;

struct Reader<'a> {
    cur: Cursor<&'a [u8]>,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { cur: Cursor::new(bytes) }
    }

    fn offset(&self) -> u64 {
        self.cur.position()
    }

    fn truncated(&self, what: &str) -> GmvError {
        GmvError::format(self.offset(), format!("truncated while reading {what}"))
    }

    fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let mut buf = [0u8; 4];
        self.cur.read_exact(&mut buf).map_err(|_| self.truncated("magic"))?;
        if &buf != expected {
            return Err(GmvError::format(
                0,
                format!("bad magic {:?}, expected {:?}", String::from_utf8_lossy(&buf), String::from_utf8_lossy(expected)),
            ));
        }
        let at = self.offset();
        let version = self.u32("version")?;
        if version != FORMAT_VERSION {
            return Err(GmvError::format(at, format!("unsupported version {version}")));
        }
        Ok(())
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        self.cur.read_u8().map_err(|_| self.truncated(what))
    }

    fn i8(&mut self, what: &str) -> Result<i8> {
        self.cur.read_i8().map_err(|_| self.truncated(what))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        self.cur.read_u32::<LittleEndian>().map_err(|_| self.truncated(what))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        self.cur.read_u64::<LittleEndian>().map_err(|_| self.truncated(what))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        let at = self.offset();
        let v = self.cur.read_f64::<LittleEndian>().map_err(|_| self.truncated(what))?;
        if !v.is_finite() {
            return Err(GmvError::format(at, format!("non-finite {what}")));
        }
        Ok(v)
    }

    fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let at = self.offset();
            let v = self.cur.read_f32::<LittleEndian>().map_err(|_| self.truncated(what))?;
            if !v.is_finite() {
                return Err(GmvError::format(at, format!("non-finite value in {what}")));
            }
            out.push(f64::from(v));
        }
        Ok(out)
    }

    fn u32s(&mut self, n: usize, what: &str) -> Result<Vec<u32>> {
        (0..n).map(|_| self.u32(what)).collect()
    }

    fn finish(&self) -> Result<()> {
        let len = self.cur.get_ref().len() as u64;
        if self.offset() != len {
            return Err(GmvError::format(self.offset(), "trailing bytes after payload"));
        }
        Ok(())
    }
}

fn header_dim(r: &mut Reader<'_>, what: &str) -> Result<usize> {
    let at = r.offset();
    let v = r.u32(what)? as usize;
    if v == 0 {
        return Err(GmvError::format(at, format!("{what} must be positive")));
    }
    Ok(v)
}

/// Raw descriptor payload: columns and labels, unvalidated norms.
fn parse_descriptor_payload(bytes: &[u8]) -> Result<(DMatrix<f64>, Vec<u32>)> {
    let mut r = Reader::new(bytes);
    r.magic(DESCRIPTOR_MAGIC)?;
    let d = header_dim(&mut r, "d")?;
    let n = header_dim(&mut r, "N")?;
    let values_at = r.offset();
    let needed = d
        .checked_mul(n)
        .and_then(|dn| dn.checked_mul(4))
        .and_then(|b| b.checked_add(4 * n))
        .ok_or_else(|| GmvError::format(8, "d·N overflows"))?;
    if (bytes.len() as u64) < values_at + needed as u64 {
        return Err(GmvError::format(
            bytes.len() as u64,
            format!("truncated payload: need {needed} bytes after header"),
        ));
    }
    let mut m = DMatrix::from_vec(d, n, r.f32s(d * n, "descriptor values")?);
    let ids = r.u32s(n, "identity labels")?;
    r.finish()?;

    for (j, mut col) in m.column_iter_mut().enumerate() {
        let norm = col.norm();
        if norm == 0.0 {
            return Err(GmvError::format(values_at + (4 * d * j) as u64, format!("column {j} is zero")));
        }
        // f32 storage of a unit vector is already within tolerance; only
        // columns that are genuinely off get rescaled
        if (norm - 1.0).abs() > UNIT_NORM_TOL {
            col /= norm;
        }
    }
    Ok((m, ids))
}

pub fn parse_descriptors(bytes: &[u8]) -> Result<TemplateMatrix> {
    let (m, ids) = parse_descriptor_payload(bytes)?;
    TemplateMatrix::new(m, ids)
}

pub fn load_descriptors(path: impl AsRef<Path>) -> Result<TemplateMatrix> {
    parse_descriptors(&fs::read(path)?)
}

fn encode_descriptors(m: &DMatrix<f64>, ids: &[u32]) -> Result<Vec<u8>> {
    let (d, n) = m.shape();
    let mut out = Vec::with_capacity(16 + 4 * d * n + 4 * n);
    out.extend_from_slice(DESCRIPTOR_MAGIC);
    out.write_u32::<LittleEndian>(FORMAT_VERSION)?;
    out.write_u32::<LittleEndian>(to_u32(d)?)?;
    out.write_u32::<LittleEndian>(to_u32(n)?)?;
    for v in m.iter() {
        out.write_f32::<LittleEndian>(*v as f32)?;
    }
    for id in ids {
        out.write_u32::<LittleEndian>(*id)?;
    }
    Ok(out)
}

pub fn encode_templates(x: &TemplateMatrix) -> Result<Vec<u8>> {
    encode_descriptors(x.matrix(), x.ids())
}

/// Write templates as `f32`; values are rounded to single precision.
pub fn save_descriptors(path: impl AsRef<Path>, x: &TemplateMatrix) -> Result<()> {
    fs::write(path, encode_templates(x)?)?;
    Ok(())
}

/// Queries share the descriptor layout; impostors carry [`IMPOSTOR_LABEL`].
pub fn save_queries(path: impl AsRef<Path>, q: &QuerySet) -> Result<()> {
    let ids: Vec<u32> = q
        .labels()
        .iter()
        .map(|l| match l {
            QueryLabel::Genuine(id) => *id,
            QueryLabel::Impostor => IMPOSTOR_LABEL,
        })
        .collect();
    fs::write(path, encode_descriptors(q.matrix(), &ids)?)?;
    Ok(())
}

pub fn load_queries(path: impl AsRef<Path>) -> Result<QuerySet> {
    let (m, ids) = parse_descriptor_payload(&fs::read(path)?)?;
    let labels = ids
        .into_iter()
        .map(|id| if id == IMPOSTOR_LABEL { QueryLabel::Impostor } else { QueryLabel::Genuine(id) })
        .collect();
    QuerySet::new(m, labels)
}

fn to_u32(v: usize) -> Result<u32> {
    u32::try_from(v).map_err(|_| GmvError::param(format!("{v} does not fit the file format")))
}

pub fn encode_model(model: &GroupModel) -> Result<Vec<u8>> {
    let p = model.params();
    let w = model.w().matrix();
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    out.write_u32::<LittleEndian>(FORMAT_VERSION)?;
    out.write_u32::<LittleEndian>(to_u32(w.nrows())?)?;
    out.write_u32::<LittleEndian>(to_u32(w.ncols())?)?;
    out.write_u32::<LittleEndian>(to_u32(p.sparsity)?)?;
    out.write_u32::<LittleEndian>(to_u32(model.num_groups())?)?;
    out.write_u8(p.method.tag())?;
    out.write_f64::<LittleEndian>(p.xi)?;
    out.write_f64::<LittleEndian>(p.gamma)?;
    out.write_f64::<LittleEndian>(p.eta)?;
    out.write_u64::<LittleEndian>(p.seed)?;
    for v in w.iter() {
        out.write_f32::<LittleEndian>(*v as f32)?;
    }
    for r in model.representations() {
        for v in r.values() {
            out.write_i8(*v)?;
        }
    }
    for size in model.partition().sizes() {
        out.write_u32::<LittleEndian>(to_u32(size)?)?;
    }
    for members in model.partition().groups() {
        for &i in members {
            out.write_u32::<LittleEndian>(to_u32(i)?)?;
        }
    }
    Ok(out)
}

/// Parse a model. The stored `f32` projection is snapped back to the nearest
/// column-orthonormal matrix.
pub fn parse_model(bytes: &[u8]) -> Result<GroupModel> {
    let mut r = Reader::new(bytes);
    r.magic(MODEL_MAGIC)?;
    let d = header_dim(&mut r, "d")?;
    let l = header_dim(&mut r, "ℓ")?;
    let s_at = r.offset();
    let s = header_dim(&mut r, "S")?;
    let m = header_dim(&mut r, "M")?;
    if l > d || s > l {
        return Err(GmvError::format(s_at, format!("need S ≤ ℓ ≤ d, got S={s} ℓ={l} d={d}")));
    }
    let tag_at = r.offset();
    let tag = r.u8("method tag")?;
    let method = Method::from_tag(tag).ok_or_else(|| GmvError::format(tag_at, format!("unknown method tag {tag}")))?;
    let xi = r.f64("ξ")?;
    let gamma = r.f64("γ")?;
    let eta = r.f64("η")?;
    let seed = r.u64("seed")?;

    let w_raw = DMatrix::from_vec(d, l, r.f32s(d * l, "projection")?);
    let mut reps = Vec::with_capacity(m);
    for g in 0..m {
        let at = r.offset();
        let values = (0..l).map(|_| r.i8("representations")).collect::<Result<Vec<_>>>()?;
        let code = TernaryCode::new(values, s)
            .map_err(|e| GmvError::format(at, format!("representation {g}: {e}")))?;
        reps.push(code);
    }
    let sizes_at = r.offset();
    let sizes = r.u32s(m, "group sizes")?;
    let mut groups = Vec::with_capacity(m);
    for size in sizes {
        groups.push(r.u32s(size as usize, "member indices")?.into_iter().map(|i| i as usize).collect());
    }
    r.finish()?;
    let partition = GroupPartition::from_groups(groups)
        .map_err(|e| GmvError::format(sizes_at, format!("invalid partition: {e}")))?;
    let w = orthogonal_procrustes(&w_raw).map_err(|e| GmvError::format(57, format!("projection: {e}")))?;
    GroupModel::new(
        w,
        reps,
        partition,
        ModelParams {
            code_len: l,
            sparsity: s,
            method,
            xi,
            gamma,
            eta,
            seed,
        },
    )
}

pub fn save_model(path: impl AsRef<Path>, model: &GroupModel) -> Result<()> {
    fs::write(path, encode_model(model)?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<GroupModel> {
    parse_model(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baseline::{baseline_aoe_enroll, BaselineConfig};
    use crate::data::{gen_synthetic, partition_groups};

    fn hand_file() -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(b"GMVD");
        b.extend_from_slice(&1u32.to_le_bytes());
        b.extend_from_slice(&4u32.to_le_bytes());
        b.extend_from_slice(&2u32.to_le_bytes());
        for v in [1.0f32, 0.0, 0.0, 0.0, 0.0, 0.6, 0.8, 0.0] {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b.extend_from_slice(&7u32.to_le_bytes());
        b.extend_from_slice(&9u32.to_le_bytes());
        b
    }

    #[test]
    fn hand_written_descriptor_file() {
        let x = parse_descriptors(&hand_file()).unwrap();
        assert_eq!(x.ids(), &[7, 9]);
        let expected = [1.0, 0.0, 0.0, 0.0, 0.0, f64::from(0.6f32), f64::from(0.8f32), 0.0];
        assert_eq!(x.matrix().as_slice(), &expected);
    }

    #[test]
    fn descriptor_errors() {
        let mut bad = hand_file();
        bad[0] = b'X';
        assert!(matches!(parse_descriptors(&bad), Err(GmvError::Format { offset: 0, .. })));

        let mut bad = hand_file();
        bad[4] = 2;
        assert!(matches!(parse_descriptors(&bad), Err(GmvError::Format { offset: 4, .. })));

        let full = hand_file();
        assert!(matches!(parse_descriptors(&full[..full.len() - 3]), Err(GmvError::Format { .. })));

        let mut nan = hand_file();
        nan[20..24].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(parse_descriptors(&nan), Err(GmvError::Format { offset: 20, .. })));
    }

    #[test]
    fn descriptors_are_renormalized() {
        let mut b = hand_file();
        b[16..20].copy_from_slice(&3.0f32.to_le_bytes());
        let x = parse_descriptors(&b).unwrap();
        assert_eq!(x.column(0)[0], 1.0);
    }

    #[test]
    fn descriptor_round_trip_is_bit_exact() {
        let x = parse_descriptors(&hand_file()).unwrap();
        let again = parse_descriptors(&encode_templates(&x).unwrap()).unwrap();
        assert_eq!(x, again);

        let (x, _) = gen_synthetic(24, 10, 0.0, 0, 3).unwrap();
        let once = parse_descriptors(&encode_templates(&x).unwrap()).unwrap();
        let bytes = encode_templates(&once).unwrap();
        assert_eq!(bytes, encode_templates(&parse_descriptors(&bytes).unwrap()).unwrap());
        assert!((once.matrix() - x.matrix()).amax() < 1e-7);
    }

    #[test]
    fn model_round_trip() {
        let (x, _) = gen_synthetic(20, 12, 0.0, 0, 1).unwrap();
        let p = partition_groups(12, 5, 2).unwrap();
        let cfg = BaselineConfig {
            variant: Method::BaselineAoe,
            code_len: 18,
            sparsity: 12,
            eta: 1.0,
            seed: 4,
        };
        let model = baseline_aoe_enroll(&x, &p, &cfg).unwrap();
        let bytes = encode_model(&model).unwrap();
        let back = parse_model(&bytes).unwrap();
        assert_eq!(back.representations(), model.representations());
        assert_eq!(back.partition(), model.partition());
        assert_eq!(back.params(), model.params());
        assert!((back.w().matrix() - model.w().matrix()).amax() < 1e-6);
        assert!(back.w().orthonormality_error() <= 1e-8);

        let mut bad = bytes.clone();
        bad[0] = b'Q';
        assert!(parse_model(&bad).is_err());
        assert!(parse_model(&bytes[..bytes.len() - 1]).is_err());
    }
}
