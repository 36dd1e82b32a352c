//! Brownian positions on a Galton–Watson tree.
//!
//! Each edge of duration `d` carries an independent `N(0, d)` increment and a
//! leaf sits at the sum of the increments along its ancestry, so given the tree
//! `Cov(x_k, x_l) = overlap(k, l)`. Increments are drawn in node-id order from
//! one keystream whether or not the per-node positions are retained.

use std::io::{self, Read, Write};

use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::rng::{stream_rng, Stream};
use crate::tree::GwTree;

/// One BBM field: a position per leaf, optionally per node.
#[derive(Debug, Clone)]
pub struct BbmField<'a> {
    tree: &'a GwTree,
    leaf_positions: Vec<f64>,
    /// Position at the end of each node's edge, indexed by node id.
    node_positions: Option<Vec<f64>>,
    seed: u64,
    /// Positions were supplied by the caller rather than sampled; paths between
    /// edge endpoints are then taken to be linear.
    prescribed: bool,
}

impl<'a> BbmField<'a> {
    pub fn sample(tree: &'a GwTree, seed: u64, keep_paths: bool) -> Self {
        Self::sample_stream(tree, seed, Stream::FieldX, keep_paths)
    }

    pub(crate) fn sample_stream(tree: &'a GwTree, seed: u64, stream: Stream, keep_paths: bool) -> Self {
        let mut rng = stream_rng(seed, stream);
        let mut node_pos = Vec::with_capacity(tree.node_count());
        for (parent, birth, end) in tree.edge_bounds() {
            let start = if parent == u32::MAX {
                0.0
            } else {
                node_pos[parent as usize]
            };
            let z: f64 = StandardNormal.sample(&mut rng);
            node_pos.push(start + (end - birth).sqrt() * z);
        }
        let leaf_positions = tree
            .leaf_indices()
            .iter()
            .map(|&i| node_pos[i as usize])
            .collect();
        Self {
            tree,
            leaf_positions,
            node_positions: keep_paths.then_some(node_pos),
            seed,
            prescribed: false,
        }
    }

    /// A field with prescribed edge-end positions, indexed by node id.
    pub fn from_node_positions(tree: &'a GwTree, node_positions: Vec<f64>, seed: u64) -> Result<Self> {
        if node_positions.len() != tree.node_count() {
            return Err(invalid(format!(
                "expected {} node positions, got {}",
                tree.node_count(),
                node_positions.len()
            )));
        }
        let leaf_positions = tree
            .leaf_indices()
            .iter()
            .map(|&i| node_positions[i as usize])
            .collect();
        Ok(Self {
            tree,
            leaf_positions,
            node_positions: Some(node_positions),
            seed,
            prescribed: true,
        })
    }

    /// The deterministic field `x(s) = v s` on every path.
    pub fn with_drift(tree: &'a GwTree, v: f64, seed: u64) -> Self {
        let nodes = tree.edge_bounds().map(|(_, _, end)| v * end).collect();
        Self::from_node_positions(tree, nodes, seed).expect("one position per node")
    }

    pub fn tree(&self) -> &'a GwTree {
        self.tree
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn horizon(&self) -> f64 {
        self.tree.horizon()
    }

    /// `x_k(t)` indexed by leaf id.
    pub fn positions(&self) -> &[f64] {
        &self.leaf_positions
    }

    pub fn node_positions(&self) -> Option<&[f64]> {
        self.node_positions.as_deref()
    }

    pub fn is_prescribed(&self) -> bool {
        self.prescribed
    }

    pub fn has_paths(&self) -> bool {
        self.node_positions.is_some()
    }

    /// Largest leaf position and its leaf id; ties go to the smallest id.
    pub fn max_position(&self) -> (f64, usize) {
        max_with_index(&self.leaf_positions)
    }
}

pub(crate) fn max_with_index(values: &[f64]) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, &v) in values.iter().enumerate() {
        if v > best.0 {
            best = (v, i);
        }
    }
    best
}

/// The pair `(X, Y)` on one tree with `Y = rho X + sqrt(1 - rho^2) Z`, `Z` an
/// independent field on the same tree.
#[derive(Debug, Clone)]
pub struct CorrelatedField<'a> {
    x: BbmField<'a>,
    y: Vec<f64>,
    z: Option<Vec<f64>>,
    rho: f64,
}

impl<'a> CorrelatedField<'a> {
    /// `X` uses the same keystream as [`BbmField::sample`], so the `X`
    /// component equals the single field sampled with the same seed.
    /// For `rho = ±1` no `Z` is drawn and `Y = ±X` exactly.
    pub fn sample(tree: &'a GwTree, rho: f64, seed: u64, keep_paths: bool) -> Result<Self> {
        check_rho(rho)?;
        let x = BbmField::sample(tree, seed, keep_paths);
        Ok(Self::from_x(x, rho))
    }

    fn from_x(x: BbmField<'a>, rho: f64) -> Self {
        if rho.abs() == 1.0 {
            let y = x.positions().iter().map(|&v| rho * v).collect();
            return Self { x, y, z: None, rho };
        }
        let z_field = BbmField::sample_stream(x.tree, x.seed, Stream::FieldZ, false);
        let z = z_field.leaf_positions;
        let w = (1.0 - rho * rho).sqrt();
        let y = x
            .positions()
            .iter()
            .zip(&z)
            .map(|(&xv, &zv)| rho * xv + w * zv)
            .collect();
        Self {
            x,
            y,
            z: Some(z),
            rho,
        }
    }

    /// Assembles a pair from explicit leaf vectors. `z` is required when
    /// `|rho| < 1`; `y` is derived from it.
    pub fn from_parts(x: BbmField<'a>, z: Option<Vec<f64>>, rho: f64) -> Result<Self> {
        check_rho(rho)?;
        if rho.abs() == 1.0 {
            return Ok(Self::from_x(x, rho));
        }
        let z = z.ok_or_else(|| invalid("an independent component is required when |rho| < 1"))?;
        if z.len() != x.positions().len() {
            return Err(invalid("x and z have different lengths"));
        }
        let w = (1.0 - rho * rho).sqrt();
        let y = x
            .positions()
            .iter()
            .zip(&z)
            .map(|(&xv, &zv)| rho * xv + w * zv)
            .collect();
        Ok(Self {
            x,
            y,
            z: Some(z),
            rho,
        })
    }

    pub fn tree(&self) -> &'a GwTree {
        self.x.tree
    }

    pub fn horizon(&self) -> f64 {
        self.x.horizon()
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn seed(&self) -> u64 {
        self.x.seed
    }

    pub fn x_field(&self) -> &BbmField<'a> {
        &self.x
    }

    pub fn x(&self) -> &[f64] {
        self.x.positions()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// The independent component; `None` when `|rho| = 1`.
    pub fn z(&self) -> Option<&[f64]> {
        self.z.as_deref()
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn max_position(&self) -> (f64, usize) {
        self.x.max_position()
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&rho) {
        return Err(invalid(format!("rho must lie in [-1, 1], got {rho}")));
    }
    Ok(())
}

pub fn sample_field(tree: &GwTree, seed: u64, keep_paths: bool) -> BbmField<'_> {
    BbmField::sample(tree, seed, keep_paths)
}

pub fn sample_correlated_pair(tree: &GwTree, rho: f64, seed: u64) -> Result<CorrelatedField<'_>> {
    CorrelatedField::sample(tree, rho, seed, false)
}

const DUMP_MAGIC: &[u8; 8] = b"BBMLEAF1";

/// Leaf vectors read back from a binary dump.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafDump {
    pub t: f64,
    pub rho: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Binary dump of the leaf vectors: magic `BBMLEAF1`, then `t: f64`,
/// `n: u64`, `rho: f64`, then `n` values of `x` and `n` values of `y`, all
/// little-endian.
pub fn write_leaf_dump<W: Write>(field: &CorrelatedField<'_>, mut out: W) -> io::Result<()> {
    out.write_all(DUMP_MAGIC)?;
    out.write_all(&field.horizon().to_le_bytes())?;
    out.write_all(&(field.len() as u64).to_le_bytes())?;
    out.write_all(&field.rho().to_le_bytes())?;
    for v in field.x().iter().chain(field.y()) {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_leaf_dump<R: Read>(mut input: R) -> Result<LeafDump> {
    let io_err = |e: io::Error| Error::State(format!("leaf dump: {e}"));
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic).map_err(io_err)?;
    if &magic != DUMP_MAGIC {
        return Err(Error::State("leaf dump: bad magic".into()));
    }
    let mut word = [0u8; 8];
    let mut next = |input: &mut R| -> Result<[u8; 8]> {
        input.read_exact(&mut word).map_err(io_err)?;
        Ok(word)
    };
    let t = f64::from_le_bytes(next(&mut input)?);
    let n = u64::from_le_bytes(next(&mut input)?) as usize;
    let rho = f64::from_le_bytes(next(&mut input)?);
    let mut values = Vec::with_capacity(2 * n);
    for _ in 0..2 * n {
        values.push(f64::from_le_bytes(next(&mut input)?));
    }
    let y = values.split_off(n);
    Ok(LeafDump { t, rho, x: values, y })
}
