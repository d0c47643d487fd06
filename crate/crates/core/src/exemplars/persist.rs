//! Binary index file and JSONL exemplar sidecar.
//!
//! Layout, all integers little-endian `u32`:
//! `"PRIX"`, version, dimension, count, then `count * dimension` `f32` values,
//! then `count` ids as (byte length, UTF-8 bytes).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Exemplar, ExemplarError, FlatIndex, Result};

pub const INDEX_MAGIC: [u8; 4] = *b"PRIX";
pub const INDEX_VERSION: u32 = 1;

fn put_u32<W: Write>(w: &mut W, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn get_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|e| ExemplarError::Format(format!("truncated header or table: {e}")))?;
    Ok(u32::from_le_bytes(b))
}

pub fn write_index(path: impl AsRef<Path>, index: &FlatIndex<f32>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&INDEX_MAGIC)?;
    put_u32(&mut w, INDEX_VERSION)?;
    put_u32(&mut w, index.dimension() as u32)?;
    put_u32(&mut w, index.len() as u32)?;
    for x in index.raw_data() {
        w.write_all(&x.to_le_bytes())?;
    }
    for id in index.ids() {
        put_u32(&mut w, id.len() as u32)?;
        w.write_all(id.as_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_index(path: impl AsRef<Path>) -> Result<FlatIndex<f32>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| ExemplarError::Format("file too short".into()))?;
    if magic != INDEX_MAGIC {
        return Err(ExemplarError::Format("bad magic".into()));
    }
    let version = get_u32(&mut r)?;
    if version != INDEX_VERSION {
        return Err(ExemplarError::Format(format!("unsupported version {version}")));
    }
    let dim = get_u32(&mut r)? as usize;
    let count = get_u32(&mut r)? as usize;
    if dim == 0 {
        return Err(ExemplarError::Format("zero dimension".into()));
    }
    let mut raw = vec![0u8; dim * count * 4];
    r.read_exact(&mut raw)
        .map_err(|e| ExemplarError::Format(format!("truncated vectors: {e}")))?;
    let data: Vec<f32> = raw
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    let mut index = FlatIndex::new(dim);
    for (i, v) in data.chunks_exact(dim).enumerate() {
        let len = get_u32(&mut r)? as usize;
        let mut id = vec![0u8; len];
        r.read_exact(&mut id)
            .map_err(|e| ExemplarError::Format(format!("truncated id {i}: {e}")))?;
        let id = String::from_utf8(id).map_err(|_| ExemplarError::Format(format!("id {i} is not UTF-8")))?;
        index.insert(&id, v)?;
    }
    Ok(index)
}

pub fn write_exemplars(path: impl AsRef<Path>, exemplars: &[Exemplar]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for e in exemplars {
        let payload = Exemplar { vector: None, ..e.clone() };
        writeln!(w, "{}", serde_json::to_string(&payload).expect("exemplar serializes"))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_exemplars(path: impl AsRef<Path>) -> Result<Vec<Exemplar>> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| ExemplarError::Format(format!("sidecar line {}: {e}", i + 1)))?,
        );
    }
    Ok(out)
}

impl super::ExemplarStore {
    /// Write `index.prix` and `exemplars.jsonl` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        write_index(dir.join("index.prix"), &self.index)?;
        write_exemplars(dir.join("exemplars.jsonl"), &self.exemplars)
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let index = read_index(dir.join("index.prix"))?;
        let mut exemplars = read_exemplars(dir.join("exemplars.jsonl"))?;
        if exemplars.len() != index.len() {
            return Err(ExemplarError::Format(format!(
                "sidecar has {} exemplars for {} vectors",
                exemplars.len(),
                index.len()
            )));
        }
        for (pos, e) in exemplars.iter_mut().enumerate() {
            if e.exemplar_id != index.ids()[pos] {
                return Err(ExemplarError::Format(format!("sidecar/index id mismatch at {pos}")));
            }
            e.vector = Some(index.vector(pos).to_vec());
        }
        Ok(super::ExemplarStore { index, exemplars })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            dim in 1usize..8,
            rows in prop::collection::vec(prop::collection::vec(any::<f32>(), 8), 0..20),
        ) {
            let mut idx = FlatIndex::<f32>::new(dim);
            for (i, r) in rows.iter().enumerate() {
                idx.insert(&format!("id-{i}-ü"), &r[..dim]).unwrap();
            }
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("x.prix");
            write_index(&p, &idx).unwrap();
            let back = read_index(&p).unwrap();
            prop_assert_eq!(back.ids(), idx.ids());
            let a: Vec<u32> = idx.raw_data().iter().map(|x| x.to_bits()).collect();
            let b: Vec<u32> = back.raw_data().iter().map(|x| x.to_bits()).collect();
            prop_assert_eq!(a, b);
            // and the file re-serializes to identical bytes
            let p2 = dir.path().join("y.prix");
            write_index(&p2, &back).unwrap();
            prop_assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&p2).unwrap());
        }
    }

    #[test]
    fn header_layout() {
        let mut idx = FlatIndex::<f32>::new(2);
        idx.insert("ab", &[1.0, -2.5]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("i.prix");
        write_index(&p, &idx).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[..4], b"PRIX");
        assert_eq!(&bytes[4..16], &[1, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0]);
        assert_eq!(&bytes[16..20], &1.0f32.to_le_bytes());
        assert_eq!(&bytes[24..28], &[2, 0, 0, 0]);
        assert_eq!(&bytes[28..], b"ab");
    }

    #[test]
    fn rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.prix");
        std::fs::write(&p, b"NOPE").unwrap();
        assert!(matches!(read_index(&p), Err(ExemplarError::Format(_))));
        std::fs::write(&p, b"PRIX\x01\x00\x00\x00\x02\x00\x00\x00\x05\x00\x00\x00").unwrap();
        assert!(matches!(read_index(&p), Err(ExemplarError::Format(_))));
    }
}
