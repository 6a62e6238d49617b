//! Parsing, validation and statistics for serialized trees.

use std::collections::HashSet;

use super::{EncodingTree, TreeStats};
use crate::dataset::EncodedDataset;
use crate::error::{Error, Result};

/// One decoded node record.
#[derive(Debug, Clone, PartialEq)]
pub enum ParsedRecord<'a> {
    Internal {
        chunk: u8,
        depth: u8,
    },
    Leaf {
        chunk: u8,
        depth: u8,
        postfix: &'a [u8],
        /// Little-endian u32 ids, 4 bytes each.
        ids: &'a [u8],
    },
}

/// Sequential record reader over a tree buffer.
pub struct Records<'a> {
    bytes: &'a [u8],
    leaf_depths: &'a [u8],
    layer_count: usize,
    pos: usize,
    leaf_idx: usize,
}

impl<'a> Records<'a> {
    fn corrupt(&self, msg: &str) -> Error {
        Error::CorruptBuffer(format!("{msg} (record at byte {})", self.pos))
    }
}

impl<'a> Iterator for Records<'a> {
    type Item = Result<ParsedRecord<'a>>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.pos >= self.bytes.len() {
            return None;
        }
        if self.pos + 2 > self.bytes.len() {
            return Some(Err(self.corrupt("truncated header")));
        }
        let chunk = self.bytes[self.pos];
        let union = self.bytes[self.pos + 1];
        if union & 1 == 0 {
            let depth = union >> 1;
            if (depth as usize) >= self.layer_count {
                return Some(Err(self.corrupt("internal depth out of range")));
            }
            self.pos += 2;
            return Some(Ok(ParsedRecord::Internal { chunk, depth }));
        }
        let count = (union >> 1) as usize;
        if count == 0 {
            return Some(Err(self.corrupt("leaf with zero ids")));
        }
        let Some(&depth) = self.leaf_depths.get(self.leaf_idx) else {
            return Some(Err(self.corrupt("leaf without a depth entry")));
        };
        if (depth as usize) >= self.layer_count {
            return Some(Err(self.corrupt("leaf depth out of range")));
        }
        let postfix_len = self.layer_count - depth as usize - 1;
        let end = self.pos + 2 + postfix_len + 4 * count;
        if end > self.bytes.len() {
            return Some(Err(self.corrupt("truncated leaf record")));
        }
        let postfix = &self.bytes[self.pos + 2..self.pos + 2 + postfix_len];
        let ids = &self.bytes[self.pos + 2 + postfix_len..end];
        self.pos = end;
        self.leaf_idx += 1;
        Some(Ok(ParsedRecord::Leaf {
            chunk,
            depth,
            postfix,
            ids,
        }))
    }
}

pub(crate) fn decode_ids(raw: &[u8]) -> impl Iterator<Item = u32> + '_ {
    raw.chunks_exact(4)
        .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
}

struct Frame {
    depth: u8,
    chunk: u8,
    groups: u32,
}

impl EncodingTree {
    /// Iterates over raw records without structural validation.
    pub fn records(&self) -> Records<'_> {
        Records {
            bytes: &self.bytes,
            leaf_depths: &self.leaf_depths,
            layer_count: self.layer_count as usize,
            pos: 0,
            leaf_idx: 0,
        }
    }

    /// Exact statistics from a full parse.
    pub fn stats(&self) -> Result<TreeStats> {
        self.validate()
    }

    /// Full structural validation; returns the tree's statistics.
    ///
    /// Checks performed:
    /// - records parse and consume the whole buffer and depth track;
    /// - descent increases depth by exactly one; backtracks never deepen;
    /// - open internal nodes always cover depths 0..=d-1 contiguously;
    /// - leaf codes are sorted and carry ids for exactly `len()` vectors;
    /// - every internal node's subtree holds at least two distinct code
    ///   groups (anything smaller must have been merged into a leaf);
    /// - the buffer length equals `4N + 2(L1+L2) + total_postfix`.
    pub fn validate(&self) -> Result<TreeStats> {
        let lc = self.layer_count as usize;
        let k = self.k as usize;
        let corrupt = |msg: String| Error::CorruptBuffer(msg);

        let mut stack: Vec<Frame> = Vec::new();
        let mut prev_code: Option<Vec<u8>> = None;
        // Depth the next record must sit at; None after a leaf, where only
        // an upper bound (the leaf's own depth) applies.
        let mut expected_depth: Option<usize> = Some(0);
        let mut prev_leaf_depth = 0usize;

        let mut internal = 0u64;
        let mut leaves = 0u64;
        let mut postfix_total = 0u64;
        let mut seen_ids: HashSet<u32> = HashSet::with_capacity(self.n as usize);

        let pop_to = |stack: &mut Vec<Frame>, depth: usize| -> Result<()> {
            while let Some(top) = stack.last() {
                if (top.depth as usize) < depth {
                    break;
                }
                if top.groups < 2 {
                    return Err(corrupt(format!(
                        "internal node at depth {} shelters a single code group",
                        top.depth
                    )));
                }
                stack.pop();
            }
            if stack.len() != depth {
                return Err(corrupt(format!(
                    "record at depth {depth} with {} open ancestors",
                    stack.len()
                )));
            }
            Ok(())
        };

        for record in self.records() {
            match record? {
                ParsedRecord::Internal { chunk, depth } => {
                    let depth = depth as usize;
                    if k < 256 && chunk as usize >= k {
                        return Err(corrupt(format!("chunk {chunk} exceeds K={k}")));
                    }
                    match expected_depth {
                        Some(d) if depth != d => {
                            return Err(corrupt(format!(
                                "expected a record at depth {d}, found internal at {depth}"
                            )))
                        }
                        None if depth > prev_leaf_depth => {
                            return Err(corrupt(format!(
                                "backtrack from depth {prev_leaf_depth} descends to {depth}"
                            )))
                        }
                        _ => {}
                    }
                    pop_to(&mut stack, depth)?;
                    stack.push(Frame {
                        depth: depth as u8,
                        chunk,
                        groups: 0,
                    });
                    internal += 1;
                    expected_depth = Some(depth + 1);
                }
                ParsedRecord::Leaf {
                    chunk,
                    depth,
                    postfix,
                    ids,
                } => {
                    let depth = depth as usize;
                    if k < 256
                        && (chunk as usize >= k || postfix.iter().any(|&c| c as usize >= k))
                    {
                        return Err(corrupt(format!("leaf chunk exceeds K={k}")));
                    }
                    match expected_depth {
                        Some(d) if depth != d => {
                            return Err(corrupt(format!(
                                "expected a record at depth {d}, found leaf at {depth}"
                            )))
                        }
                        None if depth > prev_leaf_depth => {
                            return Err(corrupt(format!(
                                "leaf after leaf descends from depth {prev_leaf_depth} to {depth}"
                            )))
                        }
                        _ => {}
                    }
                    pop_to(&mut stack, depth)?;

                    let mut code = Vec::with_capacity(lc);
                    code.extend(stack.iter().map(|f| f.chunk));
                    code.push(chunk);
                    code.extend_from_slice(postfix);
                    match prev_code.as_deref().map(|p| code.as_slice().cmp(p)) {
                        Some(std::cmp::Ordering::Less) => {
                            return Err(corrupt("leaf codes out of order".into()))
                        }
                        Some(std::cmp::Ordering::Equal) => {} // chained record, same group
                        _ => {
                            for f in stack.iter_mut() {
                                f.groups += 1;
                            }
                        }
                    }
                    prev_code = Some(code);

                    for id in decode_ids(ids) {
                        if !seen_ids.insert(id) {
                            return Err(corrupt(format!("id {id} stored twice")));
                        }
                    }
                    leaves += 1;
                    postfix_total += postfix.len() as u64;
                    expected_depth = None;
                    prev_leaf_depth = depth;
                }
            }
        }

        pop_to(&mut stack, 0)?;
        let parsed_leaves = leaves as usize;
        if parsed_leaves != self.leaf_depths.len() {
            return Err(corrupt(format!(
                "{parsed_leaves} leaf records but {} depth entries",
                self.leaf_depths.len()
            )));
        }
        if seen_ids.len() != self.n as usize {
            return Err(corrupt(format!(
                "leaves carry {} ids, header says {}",
                seen_ids.len(),
                self.n
            )));
        }
        if leaves == 0 {
            return Err(corrupt("tree without leaves".into()));
        }

        let memory_bytes =
            TreeStats::formula_bytes(seen_ids.len() as u64, internal, leaves, postfix_total);
        if memory_bytes != self.bytes.len() as u64 {
            return Err(corrupt(format!(
                "buffer holds {} bytes, accounting gives {memory_bytes}",
                self.bytes.len()
            )));
        }

        Ok(TreeStats {
            internal_nodes: internal,
            leaf_records: leaves,
            total_postfix: postfix_total,
            node_count: internal + leaves,
            avg_postfix: postfix_total as f64 / leaves as f64,
            memory_bytes,
        })
    }

    /// Rebuilds the sorted dataset the tree was constructed from.
    pub fn enumerate_leaves(&self) -> Result<EncodedDataset> {
        let lc = self.layer_count as usize;
        let mut codes = Vec::with_capacity(self.n as usize * lc);
        let mut ids = Vec::with_capacity(self.n as usize);
        let mut path = Vec::with_capacity(lc);
        for record in self.records() {
            match record? {
                ParsedRecord::Internal { chunk, depth } => {
                    path.truncate(depth as usize);
                    path.push(chunk);
                }
                ParsedRecord::Leaf {
                    chunk,
                    depth,
                    postfix,
                    ids: raw,
                } => {
                    path.truncate(depth as usize);
                    for id in decode_ids(raw) {
                        codes.extend_from_slice(&path);
                        codes.push(chunk);
                        codes.extend_from_slice(postfix);
                        ids.push(id);
                    }
                }
            }
        }
        EncodedDataset::from_parts(lc, self.k as usize, codes, ids)
    }

    /// The stored ids in leaf order.
    pub fn leaf_ids(&self) -> Result<Vec<u32>> {
        let mut ids = Vec::with_capacity(self.n as usize);
        for record in self.records() {
            if let ParsedRecord::Leaf { ids: raw, .. } = record? {
                ids.extend(decode_ids(raw));
            }
        }
        Ok(ids)
    }
}
