//! File formats: fvecs/bvecs/ivecs vector containers and the binary
//! codebook, codes and tree files. All integers are little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::codebook::Codebook;
use crate::dataset::EncodedDataset;
use crate::eforest::EncodingForest;
use crate::error::{Error, Result};
use crate::etree::EncodingTree;
use crate::order::ChunkOrder;
use crate::vecset::VectorSet;

const CODEBOOK_MAGIC: &[u8; 4] = b"ETCB";
const CODES_MAGIC: &[u8; 4] = b"ETCD";
const TREE_MAGIC: &[u8; 4] = b"ETRE";
const FORMAT_VERSION: u32 = 1;

/// Element layout of a raw vector file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VecFormat {
    /// 4-byte floats (`.fvecs`).
    F32,
    /// unsigned bytes (`.bvecs`).
    U8,
    /// 4-byte signed ints (`.ivecs`).
    I32,
}

impl VecFormat {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "fvecs" => Ok(VecFormat::F32),
            "bvecs" => Ok(VecFormat::U8),
            "ivecs" => Ok(VecFormat::I32),
            other => Err(Error::ConfigError(format!(
                "unknown vector format {other:?} (expected fvecs, bvecs or ivecs)"
            ))),
        }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .ok_or_else(|| Error::ConfigError(format!("{} has no format extension", path.display())))?;
        Self::from_name(ext)
    }

    fn value_size(self) -> u64 {
        match self {
            VecFormat::U8 => 1,
            _ => 4,
        }
    }
}

fn malformed(offset: u64, msg: impl Into<String>) -> Error {
    Error::MalformedFile {
        offset,
        msg: msg.into(),
    }
}

/// Reads a whole vector file; every record must share one dimensionality.
/// Byte and int values are widened to f32.
pub fn read_vectors(path: &Path, format: VecFormat) -> Result<VectorSet> {
    let file = File::open(path)?;
    let mut reader = BufReader::new(file);
    let mut offset = 0u64;
    let mut dim: Option<usize> = None;
    let mut data: Vec<f32> = Vec::new();

    loop {
        let d = match reader.read_i32::<LittleEndian>() {
            Ok(d) => d,
            Err(e) if e.kind() == ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        };
        if d <= 0 {
            return Err(malformed(offset, format!("record dimension {d} must be positive")));
        }
        let d = d as usize;
        match dim {
            None => dim = Some(d),
            Some(expect) if expect != d => {
                return Err(malformed(
                    offset,
                    format!("record dimension {d} differs from first record's {expect}"),
                ))
            }
            _ => {}
        }
        offset += 4;
        let record_bytes = d as u64 * format.value_size();
        let read = |reader: &mut BufReader<File>, data: &mut Vec<f32>| -> std::io::Result<()> {
            match format {
                VecFormat::F32 => {
                    let start = data.len();
                    data.resize(start + d, 0.0);
                    reader.read_f32_into::<LittleEndian>(&mut data[start..])
                }
                VecFormat::U8 => {
                    let mut buf = vec![0u8; d];
                    reader.read_exact(&mut buf)?;
                    data.extend(buf.iter().map(|&b| b as f32));
                    Ok(())
                }
                VecFormat::I32 => {
                    let mut buf = vec![0i32; d];
                    reader.read_i32_into::<LittleEndian>(&mut buf)?;
                    data.extend(buf.iter().map(|&v| v as f32));
                    Ok(())
                }
            }
        };
        if let Err(e) = read(&mut reader, &mut data) {
            if e.kind() == ErrorKind::UnexpectedEof {
                return Err(malformed(offset, "truncated record"));
            }
            return Err(e.into());
        }
        offset += record_bytes;
    }

    match dim {
        None => Ok(VectorSet::new(1)),
        Some(d) => VectorSet::from_flat(d, data),
    }
}

/// Reads an ivecs file without widening; used for ground-truth id lists.
pub fn read_ivecs(path: &Path) -> Result<Vec<Vec<i32>>> {
    let file = File::open(path)?;
    let mut reader = BufReader::new(file);
    let mut offset = 0u64;
    let mut rows = Vec::new();
    loop {
        let d = match reader.read_i32::<LittleEndian>() {
            Ok(d) => d,
            Err(e) if e.kind() == ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        };
        if d <= 0 {
            return Err(malformed(offset, format!("record dimension {d} must be positive")));
        }
        offset += 4;
        let mut row = vec![0i32; d as usize];
        if let Err(e) = reader.read_i32_into::<LittleEndian>(&mut row) {
            if e.kind() == ErrorKind::UnexpectedEof {
                return Err(malformed(offset, "truncated record"));
            }
            return Err(e.into());
        }
        offset += 4 * d as u64;
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_fvecs(path: &Path, vectors: &VectorSet) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for v in vectors.iter() {
        w.write_i32::<LittleEndian>(v.len() as i32)?;
        for &x in v {
            w.write_f32::<LittleEndian>(x)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_ivecs(path: &Path, rows: &[Vec<i32>]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for row in rows {
        w.write_i32::<LittleEndian>(row.len() as i32)?;
        for &x in row {
            w.write_i32::<LittleEndian>(x)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn check_magic<R: Read>(r: &mut R, expect: &[u8; 4], what: &str) -> Result<()> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != expect {
        return Err(malformed(0, format!("not a {what} file (bad magic)")));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != FORMAT_VERSION {
        return Err(malformed(4, format!("unsupported {what} version {version}")));
    }
    Ok(())
}

/// Codebook file: magic, version, d, M, K, then M*K*(d/M) f32 centroid
/// values in (subspace, codeword, coordinate) order.
pub fn write_codebook(path: &Path, cb: &Codebook) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(CODEBOOK_MAGIC)?;
    w.write_u32::<LittleEndian>(FORMAT_VERSION)?;
    w.write_u32::<LittleEndian>(cb.dim() as u32)?;
    w.write_u32::<LittleEndian>(cb.num_subspaces() as u32)?;
    w.write_u32::<LittleEndian>(cb.codewords() as u32)?;
    for &x in cb.centroids_flat() {
        w.write_f32::<LittleEndian>(x)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_codebook(path: &Path) -> Result<Codebook> {
    let mut r = BufReader::new(File::open(path)?);
    check_magic(&mut r, CODEBOOK_MAGIC, "codebook")?;
    let d = r.read_u32::<LittleEndian>()? as usize;
    let m = r.read_u32::<LittleEndian>()? as usize;
    let k = r.read_u32::<LittleEndian>()? as usize;
    if m == 0 || d == 0 || d % m != 0 || k == 0 || k > 256 {
        return Err(malformed(8, format!("inconsistent codebook shape d={d} m={m} k={k}")));
    }
    let mut centroids = vec![0.0f32; m * k * (d / m)];
    r.read_f32_into::<LittleEndian>(&mut centroids)
        .map_err(|e| match e.kind() {
            ErrorKind::UnexpectedEof => malformed(20, "truncated centroid data"),
            _ => e.into(),
        })?;
    Codebook::from_parts(d, m, k, centroids)
}

/// Codes file: magic, version, N, M, K, then N records of (u32 id, M chunk
/// bytes).
pub fn write_codes(path: &Path, ds: &EncodedDataset) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(CODES_MAGIC)?;
    w.write_u32::<LittleEndian>(FORMAT_VERSION)?;
    w.write_u32::<LittleEndian>(ds.len() as u32)?;
    w.write_u32::<LittleEndian>(ds.num_subspaces() as u32)?;
    w.write_u32::<LittleEndian>(ds.codewords() as u32)?;
    for (code, id) in ds.iter() {
        w.write_u32::<LittleEndian>(id)?;
        w.write_all(code)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_codes(path: &Path) -> Result<EncodedDataset> {
    let mut r = BufReader::new(File::open(path)?);
    check_magic(&mut r, CODES_MAGIC, "codes")?;
    let n = r.read_u32::<LittleEndian>()? as usize;
    let m = r.read_u32::<LittleEndian>()? as usize;
    let k = r.read_u32::<LittleEndian>()? as usize;
    let mut ids = Vec::with_capacity(n);
    let mut codes = vec![0u8; n * m];
    for i in 0..n {
        let id = r.read_u32::<LittleEndian>().map_err(|e| match e.kind() {
            ErrorKind::UnexpectedEof => malformed((20 + i * (4 + m)) as u64, "truncated code record"),
            _ => e.into(),
        })?;
        ids.push(id);
        r.read_exact(&mut codes[i * m..(i + 1) * m])
            .map_err(|e| match e.kind() {
                ErrorKind::UnexpectedEof => {
                    malformed((20 + i * (4 + m) + 4) as u64, "truncated code record")
                }
                _ => e.into(),
            })?;
    }
    EncodedDataset::from_parts(m, k, codes, ids)
}

fn write_tree_section<W: Write>(w: &mut W, tree: &EncodingTree) -> Result<()> {
    w.write_u32::<LittleEndian>(tree.layer_offset() as u32)?;
    w.write_u32::<LittleEndian>(tree.layer_count() as u32)?;
    w.write_u64::<LittleEndian>(tree.bytes().len() as u64)?;
    w.write_all(tree.bytes())?;
    // The node buffer alone cannot be re-parsed: leaf records do not carry
    // their depth. The depth track rides along, length-prefixed.
    w.write_u64::<LittleEndian>(tree.leaf_depths().len() as u64)?;
    w.write_all(tree.leaf_depths())?;
    Ok(())
}

fn read_tree_section<R: Read>(
    r: &mut R,
    n: u32,
    k: u32,
    order: &ChunkOrder,
) -> Result<EncodingTree> {
    let layer_offset = r.read_u32::<LittleEndian>()?;
    let layer_count = r.read_u32::<LittleEndian>()?;
    let buffer_len = r.read_u64::<LittleEndian>()? as usize;
    let mut bytes = vec![0u8; buffer_len];
    r.read_exact(&mut bytes)?;
    let depth_len = r.read_u64::<LittleEndian>()? as usize;
    let mut leaf_depths = vec![0u8; depth_len];
    r.read_exact(&mut leaf_depths)?;
    EncodingTree::from_parts(
        n,
        k,
        order.clone(),
        layer_offset,
        layer_count,
        bytes,
        leaf_depths,
    )
}

/// Tree file: magic, version, N, M, K, M permutation bytes, tree count,
/// then per tree: layer_offset, layer_count, buffer length, buffer bytes,
/// leaf count, leaf depth bytes.
pub fn write_tree(path: &Path, forest: &EncodingForest) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_tree_to(&mut w, forest)?;
    w.flush()?;
    Ok(())
}

pub fn write_tree_to<W: Write>(w: &mut W, forest: &EncodingForest) -> Result<()> {
    w.write_all(TREE_MAGIC)?;
    w.write_u32::<LittleEndian>(FORMAT_VERSION)?;
    w.write_u32::<LittleEndian>(forest.len() as u32)?;
    w.write_u32::<LittleEndian>(forest.chunk_order().len() as u32)?;
    w.write_u32::<LittleEndian>(forest.codewords() as u32)?;
    w.write_all(forest.chunk_order().permutation())?;
    w.write_u32::<LittleEndian>(forest.tree_count() as u32)?;
    for tree in forest.trees() {
        write_tree_section(w, tree)?;
    }
    Ok(())
}

pub fn read_tree(path: &Path) -> Result<EncodingForest> {
    let mut r = BufReader::new(File::open(path)?);
    read_tree_from(&mut r)
}

pub fn read_tree_from<R: Read>(r: &mut R) -> Result<EncodingForest> {
    check_magic(r, TREE_MAGIC, "tree")?;
    let n = r.read_u32::<LittleEndian>()?;
    let m = r.read_u32::<LittleEndian>()? as usize;
    let k = r.read_u32::<LittleEndian>()?;
    let mut permutation = vec![0u8; m];
    r.read_exact(&mut permutation)?;
    let order = ChunkOrder::from_permutation(permutation)?;
    let tree_count = r.read_u32::<LittleEndian>()? as usize;
    if tree_count == 0 {
        return Err(malformed(0, "tree file with zero trees"));
    }
    let trees = (0..tree_count)
        .map(|_| read_tree_section(r, n, k, &order))
        .collect::<Result<Vec<_>>>()?;
    EncodingForest::from_trees(trees)
}
