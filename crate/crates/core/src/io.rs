//! `EVSQ1` array files with JSON sidecars, and tensor-field bundles built on them.
//!
//! Layout: `b"EVSQ1"`, `u32` rank, `rank × u32` dims, then the row-major
//! `f64` payload, all little-endian. The sidecar lives next to the array as
//! `<file>.json`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::TensorField;
use crate::linalg::Matrix;

pub const MAGIC: &[u8; 5] = b"EVSQ1";

#[derive(Clone, Debug, PartialEq)]
pub struct Array {
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

impl Array {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let len = element_count(&dims)?;
        if len != data.len() {
            return Err(Error::ShapeMismatch { expected: format!("{len} entries for dims {dims:?}"), found: data.len().to_string() });
        }
        Ok(Self { dims, data })
    }

    pub fn to_matrix(&self) -> Result<Matrix<f64>> {
        match self.dims[..] {
            [r, c] => Ok(Matrix::from_vec(r, c, self.data.clone())),
            _ => Err(Error::ShapeMismatch { expected: "rank 2".into(), found: format!("rank {}", self.dims.len()) }),
        }
    }
}

impl From<&Matrix<f64>> for Array {
    fn from(m: &Matrix<f64>) -> Self {
        Self { dims: vec![m.rows(), m.cols()], data: m.as_slice().to_vec() }
    }
}

impl From<&[f64]> for Array {
    fn from(v: &[f64]) -> Self {
        Self { dims: vec![v.len()], data: v.to_vec() }
    }
}

fn element_count(dims: &[usize]) -> Result<usize> {
    dims.iter().try_fold(1usize, |acc, &d| {
        if u32::try_from(d).is_err() {
            return None;
        }
        acc.checked_mul(d)
    })
    .ok_or_else(|| Error::Format(format!("dimension overflow: {dims:?}")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub kind: String,
    pub t: Option<f64>,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub geometry_hash: String,
    pub provenance: String,
}

pub fn encode(array: &Array) -> Result<Vec<u8>> {
    if let Some(i) = array.data.iter().position(|v| !v.is_finite()) {
        return Err(Error::Format(format!("non-finite entry {} at {i}", array.data[i])));
    }
    let len = element_count(&array.dims)?;
    if len != array.data.len() {
        return Err(Error::Format(format!("payload has {} entries, dims {:?} need {len}", array.data.len(), array.dims)));
    }
    let rank = u32::try_from(array.dims.len()).map_err(|_| Error::Format("rank overflow".into()))?;
    let mut out = Vec::with_capacity(9 + 4 * array.dims.len() + 8 * len);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&rank.to_le_bytes());
    for &d in &array.dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in &array.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<Array> {
    let rest = bytes.strip_prefix(MAGIC.as_slice()).ok_or_else(|| Error::Format("magic mismatch".into()))?;
    let mut words = rest.chunks_exact(4);
    let mut next_u32 = || words.next().map(|w| u32::from_le_bytes(w.try_into().expect("4-byte chunk")));
    let rank = next_u32().ok_or_else(|| Error::Format("truncated header".into()))? as usize;
    let header = 4 + 4 * rank;
    if rest.len() < header {
        return Err(Error::Format(format!("truncated header: rank {rank}")));
    }
    let dims: Vec<usize> =
        rest[4..header].chunks_exact(4).map(|w| u32::from_le_bytes(w.try_into().expect("4-byte chunk")) as usize).collect();
    let len = element_count(&dims)?;
    let payload = &rest[header..];
    let expected = len.checked_mul(8).ok_or_else(|| Error::Format(format!("dimension overflow: {dims:?}")))?;
    if payload.len() < expected {
        return Err(Error::Format(format!("truncated payload: {} of {expected} bytes", payload.len())));
    }
    if payload.len() > expected {
        return Err(Error::Format(format!("{} trailing bytes", payload.len() - expected)));
    }
    let data = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
    Ok(Array { dims, data })
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_matrix(path: &Path, array: &Array, sidecar: &Sidecar) -> Result<()> {
    let bytes = encode(array)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    fs::write(&side, serde_json::to_string_pretty(sidecar)? + "\n").map_err(|e| Error::io(&side, e))
}

pub fn read_matrix(path: &Path) -> Result<(Array, Sidecar)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let array = decode(&bytes)?;
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    Ok((array, serde_json::from_str(&text)?))
}

/// [`read_matrix`] for a pipeline bound to one geometry; a differing hash is
/// returned as a warning rather than an error.
pub fn read_matrix_for(path: &Path, geometry_hash: &str) -> Result<(Array, Sidecar, Option<String>)> {
    let (array, sidecar) = read_matrix(path)?;
    let warning = (sidecar.geometry_hash != geometry_hash).then(|| {
        format!("{}: geometry hash {} does not match expected {geometry_hash}", path.display(), sidecar.geometry_hash)
    });
    Ok((array, sidecar, warning))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldManifest {
    pub kind: String,
    pub depths: Vec<f64>,
    pub geometry_hash: String,
    pub files: Vec<String>,
}

/// Writes `field` as `<name>_<j>.evsq` slices plus `<name>.json`.
pub fn write_field(dir: &Path, name: &str, field: &TensorField<f64>, sidecar: &Sidecar) -> Result<FieldManifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::with_capacity(field.len());
    for (j, slice) in field.slices.iter().enumerate() {
        let file = format!("{name}_{j:04}.evsq");
        let side = Sidecar { t: Some(field.depths[j]), ..sidecar.clone() };
        write_matrix(&dir.join(&file), &Array::from(slice), &side)?;
        files.push(file);
    }
    let manifest = FieldManifest {
        kind: sidecar.kind.clone(),
        depths: field.depths.clone(),
        geometry_hash: sidecar.geometry_hash.clone(),
        files,
    };
    let path = dir.join(format!("{name}.json"));
    fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

pub fn read_field(dir: &Path, name: &str) -> Result<(TensorField<f64>, FieldManifest)> {
    let path = dir.join(format!("{name}.json"));
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: FieldManifest = serde_json::from_str(&text)?;
    if manifest.files.len() != manifest.depths.len() {
        return Err(Error::Format(format!("{} files for {} depths", manifest.files.len(), manifest.depths.len())));
    }
    let slices = manifest
        .files
        .iter()
        .map(|f| read_matrix(&dir.join(f)).and_then(|(a, _)| a.to_matrix()))
        .collect::<Result<Vec<_>>>()?;
    Ok((TensorField { depths: manifest.depths.clone(), slices }, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sidecar() -> Sidecar {
        Sidecar { kind: "dn".into(), t: Some(0.0), n: 2, m: 4, geometry_hash: "abc".into(), provenance: "test".into() }
    }

    #[test]
    fn identity_round_trip() {
        let a = Array::from(&Matrix::<f64>::identity(2));
        let bytes = encode(&a).unwrap();
        assert_eq!(bytes.len(), 5 + 4 + 8 + 32);
        assert_eq!(decode(&bytes).unwrap(), a);
    }

    #[test]
    fn bit_exact_on_awkward_values() {
        let data = vec![f64::MIN_POSITIVE, -0.0, 1.0 / 3.0, f64::MAX, 5e-324, -1e300];
        let a = Array::new(vec![3, 2, 1], data).unwrap();
        let back = decode(&encode(&a).unwrap()).unwrap();
        assert!(a.data.iter().zip(&back.data).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn refuses_bad_input() {
        let nan = Array { dims: vec![1, 2], data: vec![1.0, f64::NAN] };
        assert!(matches!(encode(&nan), Err(Error::Format(_))));
        let good = encode(&Array::from(&Matrix::<f64>::identity(2))).unwrap();
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad), Err(Error::Format(m)) if m.contains("magic")));
        assert!(matches!(decode(&good[..good.len() - 3]), Err(Error::Format(m)) if m.contains("truncated")));
        let mut huge = MAGIC.to_vec();
        huge.extend_from_slice(&3u32.to_le_bytes());
        for _ in 0..3 {
            huge.extend_from_slice(&u32::MAX.to_le_bytes());
        }
        assert!(matches!(decode(&huge), Err(Error::Format(m)) if m.contains("overflow")));
    }

    #[test]
    fn files_and_hash_warning() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lam.evsq");
        let a = Array::from(&Matrix::from_fn(2, 3, |i, j| (i * 3 + j) as f64 * 0.1));
        write_matrix(&path, &a, &sidecar()).unwrap();
        let (b, s) = read_matrix(&path).unwrap();
        assert_eq!((a, sidecar()), (b, s));
        assert!(read_matrix_for(&path, "abc").unwrap().2.is_none());
        assert!(read_matrix_for(&path, "other").unwrap().2.unwrap().contains("does not match"));
        let text = std::fs::read_to_string(sidecar_path(&path)).unwrap();
        assert!(text.contains("\"N\"") && text.contains("geometry_hash"));
    }

    #[test]
    fn field_bundle_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let depths = [0.0, 0.1, 0.2];
        let f = TensorField::from_fn(&depths, |j| Matrix::from_fn(2, 2, |a, b| (a + 2 * b + j) as f64 / 7.0));
        let man = write_field(dir.path(), "phi", &f, &sidecar()).unwrap();
        assert_eq!(man.files.len(), 3);
        let (g, m2) = read_field(dir.path(), "phi").unwrap();
        assert_eq!(f, g);
        assert_eq!(man, m2);
    }
}
