//! Named-tensor archive: `tensors.json` (names, shapes, offsets) next to a
//! flat little-endian `tensors.f64` blob.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::archive::{ensure_dir, read_f64s, read_json, write_f64s, write_json};
use crate::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct Entry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Index {
    format: String,
    version: u32,
    total: usize,
    tensors: Vec<Entry>,
}

const FORMAT: &str = "crashcast-tensors";

pub fn save_tensors(dir: &Path, tensors: &[(String, Tensor)]) -> Result<()> {
    ensure_dir(dir)?;
    let mut flat = Vec::new();
    let mut entries = Vec::with_capacity(tensors.len());
    for (name, t) in tensors {
        entries.push(Entry {
            name: name.clone(),
            shape: t.shape().to_vec(),
            offset: flat.len(),
        });
        flat.extend_from_slice(t.data());
    }
    write_f64s(&dir.join("tensors.f64"), &flat)?;
    write_json(
        &dir.join("tensors.json"),
        &Index {
            format: FORMAT.to_string(),
            version: 1,
            total: flat.len(),
            tensors: entries,
        },
    )
}

pub fn load_tensors(dir: &Path) -> Result<Vec<(String, Tensor)>> {
    let index_path = dir.join("tensors.json");
    let index: Index = read_json(&index_path)?;
    if index.format != FORMAT {
        return Err(Error::archive(&index_path, "not a tensor archive"));
    }
    let flat = read_f64s(&dir.join("tensors.f64"), index.total)?;
    index
        .tensors
        .into_iter()
        .map(|e| {
            let len: usize = e.shape.iter().product();
            let end = e.offset + len;
            if end > flat.len() {
                return Err(Error::archive(&index_path, format!("tensor {} overruns data", e.name)));
            }
            Ok((e.name, Tensor::new(&e.shape, flat[e.offset..end].to_vec())?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saved_tensors_reload_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let a = Tensor::new(&[2, 1, 3, 3], (0..18).map(|v| (v as f64).sqrt() / 7.0).collect()).unwrap();
        let b = Tensor::from_vec(vec![f64::MIN_POSITIVE, -0.0, 1e300]);
        let items = vec![("w".to_string(), a), ("b".to_string(), b)];
        save_tensors(dir.path(), &items).unwrap();
        let back = load_tensors(dir.path()).unwrap();
        assert_eq!(back.len(), 2);
        for ((n0, t0), (n1, t1)) in items.iter().zip(&back) {
            assert_eq!(n0, n1);
            assert_eq!(t0.shape(), t1.shape());
            let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(t0), bits(t1));
        }
    }
}
