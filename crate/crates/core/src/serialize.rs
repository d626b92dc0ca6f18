//! `.samd` binary container for frozen static automatons.
//!
//! Little-endian throughout:
//!
//! ```text
//! magic      b"SAMD"
//! version    u32
//! flavor     u8          0 = static, 1 = dynamic
//! vocab_size u32         0 = undeclared
//! separator  u32         u32::MAX = none
//! max_length u32
//! node_count u32
//! per node:
//!   link       u32       u32::MAX = none (root only)
//!   length     u32
//!   min_endpos u32
//!   freq       u64
//!   next_count u32, then (token u32, node u32) sorted by token
//!   topk_count u32, then (token u32, node u32, prob f64)
//! reference  max_length x u32
//! ```
//!
//! On load, probabilities are recomputed from the stored counts in the
//! target scalar type, so exact and float automatons round-trip alike.

use crate::error::{Error, Result};
use crate::prob::Probability;
use crate::sam::{Flavor, NodeId, SamNode, Successor, SuffixAutomaton, TokenId};

pub const MAGIC: &[u8; 4] = b"SAMD";
pub const FORMAT_VERSION: u32 = 1;
const NONE: u32 = u32::MAX;

pub fn save<P: Probability>(sam: &SuffixAutomaton<P>) -> Result<Vec<u8>> {
    if sam.flavor() != Flavor::Static {
        return Err(Error::NotStatic);
    }
    if !sam.is_frozen() {
        return Err(Error::NotFrozen);
    }
    let mut out = Vec::with_capacity(32 + sam.node_count() * 40 + sam.max_length() * 4);
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, FORMAT_VERSION);
    out.push(0);
    put_u32(&mut out, sam.vocab_size());
    put_u32(&mut out, sam.separator().map_or(NONE, |t| t.0));
    put_u32(&mut out, sam.max_length() as u32);
    put_u32(&mut out, sam.node_count() as u32);
    for node in sam.nodes() {
        put_u32(&mut out, node.link.map_or(NONE, |l| l.0));
        put_u32(&mut out, node.length);
        put_u32(&mut out, node.min_endpos);
        out.extend_from_slice(&node.freq.to_le_bytes());
        put_u32(&mut out, node.next.len() as u32);
        for &(t, v) in &node.next {
            put_u32(&mut out, t.0);
            put_u32(&mut out, v.0);
        }
        put_u32(&mut out, node.topk.len() as u32);
        for s in &node.topk {
            put_u32(&mut out, s.token.0);
            put_u32(&mut out, s.node.0);
            out.extend_from_slice(&s.prob.to_f64().to_le_bytes());
        }
    }
    for t in sam.reference() {
        put_u32(&mut out, t.0);
    }
    Ok(out)
}

pub fn load<P: Probability>(bytes: &[u8]) -> Result<SuffixAutomaton<P>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::BadMagic);
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let flavor = match r.u8()? {
        0 => Flavor::Static,
        1 => return Err(corrupt("dynamic automatons are not persisted".into())),
        other => return Err(corrupt(format!("unknown flavor byte {other}"))),
    };
    let vocab_size = r.u32()?;
    let separator = match r.u32()? {
        NONE => None,
        t => Some(TokenId(t)),
    };
    let max_length = r.u32()? as usize;
    let node_count = r.u32()? as usize;
    if node_count == 0 {
        return Err(corrupt("no root node".into()));
    }
    // Every node record is at least 28 bytes; reject absurd counts early.
    if node_count > r.remaining() / 28 + 1 {
        return Err(Error::Truncated {
            offset: r.pos,
            needed: node_count * 28,
        });
    }

    struct RawTopk {
        token: TokenId,
        node: NodeId,
        prob: f64,
    }
    let mut nodes = Vec::with_capacity(node_count);
    let mut raw_topk = Vec::with_capacity(node_count);
    for i in 0..node_count {
        let link = match r.u32()? {
            NONE => None,
            l => Some(NodeId(l)),
        };
        let length = r.u32()?;
        let min_endpos = r.u32()?;
        let freq = r.u64()?;
        let next_count = r.u32()? as usize;
        let mut next = Vec::with_capacity(next_count.min(r.remaining() / 8));
        for _ in 0..next_count {
            next.push((TokenId(r.u32()?), NodeId(r.u32()?)));
        }
        let topk_count = r.u32()? as usize;
        let mut topk = Vec::with_capacity(topk_count.min(r.remaining() / 16));
        for _ in 0..topk_count {
            topk.push(RawTopk {
                token: TokenId(r.u32()?),
                node: NodeId(r.u32()?),
                prob: r.f64()?,
            });
        }
        if (i == 0) != link.is_none() {
            return Err(corrupt(format!("node {i}: only the root may lack a link")));
        }
        if next.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(corrupt(format!("node {i}: transitions not sorted")));
        }
        nodes.push(SamNode {
            link,
            next,
            length,
            min_endpos,
            freq,
            topk: Vec::new(),
        });
        raw_topk.push(topk);
    }
    let mut reference = Vec::with_capacity(max_length.min(r.remaining() / 4));
    for _ in 0..max_length {
        reference.push(TokenId(r.u32()?));
    }
    if r.remaining() != 0 {
        return Err(corrupt(format!("{} trailing bytes", r.remaining())));
    }

    let in_range = |v: NodeId| v.index() < node_count;
    for (i, node) in nodes.iter().enumerate() {
        let dangling = node.link.is_some_and(|l| !in_range(l))
            || node.next.iter().any(|&(_, v)| !in_range(v))
            || raw_topk[i].iter().any(|s| !in_range(s.node));
        if dangling {
            return Err(corrupt(format!("node {i}: dangling node index")));
        }
        if node.link.is_some_and(|l| nodes[l.index()].length >= node.length) {
            return Err(corrupt(format!("node {i}: suffix link does not shorten")));
        }
        if node.min_endpos as usize > max_length || node.min_endpos < node.length {
            return Err(corrupt(format!("node {i}: min_endpos out of range")));
        }
    }
    for i in 0..node_count {
        let parent = nodes[i].freq;
        let mut topk = Vec::with_capacity(raw_topk[i].len());
        for s in &raw_topk[i] {
            let child = nodes[s.node.index()].freq;
            if parent == 0 || child > parent || !(s.prob > 0.0 && s.prob <= 1.0) {
                return Err(corrupt(format!("node {i}: invalid top-k probability")));
            }
            topk.push(Successor {
                token: s.token,
                node: s.node,
                prob: P::from_counts(child, parent),
            });
        }
        nodes[i].topk = topk;
    }
    if vocab_size > 0 && reference.iter().any(|t| t.0 >= vocab_size) {
        return Err(corrupt("reference token outside the declared vocabulary".into()));
    }

    let last = if max_length == 0 {
        NodeId::ROOT
    } else {
        let pos = nodes
            .iter()
            .position(|n| n.length as usize == max_length)
            .ok_or_else(|| corrupt("no state spans the whole reference".into()))?;
        NodeId(pos as u32)
    };
    Ok(SuffixAutomaton {
        nodes,
        last,
        flavor,
        frozen: true,
        reference,
        vocab_size,
        separator,
    })
}

pub fn save_to_file<P: Probability>(sam: &SuffixAutomaton<P>, path: impl AsRef<std::path::Path>) -> Result<()> {
    let bytes = save(sam)?;
    std::fs::write(path.as_ref(), bytes).map_err(|e| Error::io(path, e))
}

pub fn load_from_file<P: Probability>(path: impl AsRef<std::path::Path>) -> Result<SuffixAutomaton<P>> {
    let bytes = std::fs::read(path.as_ref()).map_err(|e| Error::io(path, e))?;
    load(&bytes)
}

fn corrupt(msg: String) -> Error {
    Error::Corrupt(msg)
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or(
            Error::Truncated {
                offset: self.pos,
                needed: n,
            },
        )?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::toks;
    use crate::{ExactSam, Sam};

    fn frozen(s: &str) -> Sam {
        let mut sam = Sam::build(&toks(s));
        sam.init_topk(8).unwrap();
        sam
    }

    #[test]
    fn round_trip_abcbc() {
        let sam = frozen("ABCBC");
        let bytes = save(&sam).unwrap();
        let back: Sam = load(&bytes).unwrap();
        assert_eq!(back, sam);
        assert_eq!(save(&back).unwrap(), bytes);
    }

    #[test]
    fn exact_round_trip() {
        let mut sam = ExactSam::build(&toks("ABABCAB"));
        sam.init_topk(2).unwrap();
        let back: ExactSam = load(&save(&sam).unwrap()).unwrap();
        assert_eq!(back, sam);
    }

    #[test]
    fn requires_frozen_static() {
        assert!(matches!(save(&Sam::build(&toks("AB"))), Err(Error::NotFrozen)));
        assert!(matches!(save(&Sam::dynamic()), Err(Error::NotStatic)));
    }

    #[test]
    fn rejects_corruption() {
        let bytes = save(&frozen("ABCBC")).unwrap();

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(load::<f64>(&bad), Err(Error::BadMagic)));

        let mut bad = bytes.clone();
        bad[4..8].copy_from_slice(&99u32.to_le_bytes());
        assert!(matches!(
            load::<f64>(&bad),
            Err(Error::UnsupportedVersion { found: 99, .. })
        ));

        for cut in [3, 10, bytes.len() / 2, bytes.len() - 1] {
            assert!(matches!(load::<f64>(&bytes[..cut]), Err(Error::Truncated { .. })));
        }

        // Point the first transition of the root at a node that does not exist.
        let mut bad = bytes.clone();
        let first_edge_target = 4 + 4 + 1 + 4 + 4 + 4 + 4 + (4 + 4 + 4 + 8 + 4) + 4;
        bad[first_edge_target..first_edge_target + 4].copy_from_slice(&1000u32.to_le_bytes());
        assert!(matches!(load::<f64>(&bad), Err(Error::Corrupt(_))));

        let mut bad = bytes.clone();
        bad.push(0);
        assert!(matches!(load::<f64>(&bad), Err(Error::Corrupt(_))));
    }
}
