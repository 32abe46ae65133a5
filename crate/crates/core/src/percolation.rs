//! Bernoulli bond percolation in a finite box with free boundary: sampling,
//! cluster labeling, conditioning on the origin and `theta(p)` estimates.
//!
//! Edge `e` of a configuration with seed `s` is open iff its counter-based
//! uniform `U(s, e)` is below `p`, so configurations sharing a seed are
//! monotonically coupled in `p`.
//!
//! The infinite cluster is approximated by the *giant* cluster of the box:
//! the largest cluster (ties to the smaller canonical label). The origin is
//! "in the infinite cluster" when its cluster is the giant one and touches
//! all `2d` faces of the box.

use std::fmt::Write as _;
use std::io::{Read, Write};

use petgraph::unionfind::UnionFind;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{Direction, LatticeBox};
use crate::rng::{derive_seed, fold_key, tag, unit_f64, word_at};
use crate::stats::Estimate;

#[derive(Clone, Debug, PartialEq)]
pub struct BondConfig {
    lattice: LatticeBox,
    p: f64,
    seed: u64,
    bits: Vec<u64>,
}

fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param("p", format!("{p} is not in [0, 1]")));
    }
    Ok(())
}

/// The uniform attached to edge `e` under `seed`.
#[inline]
pub fn edge_uniform(seed: u64, e: usize) -> f64 {
    unit_f64(word_at(fold_key(seed, tag::BONDS), e as u64))
}

impl BondConfig {
    /// Every in-box edge open independently with probability `p`.
    pub fn sample(lattice: &LatticeBox, p: f64, seed: u64) -> Result<Self> {
        check_probability(p)?;
        let n = lattice.num_edges();
        let key = fold_key(seed, tag::BONDS);
        let mut bits = vec![0u64; n.div_ceil(64)];
        for (w, word) in bits.iter_mut().enumerate() {
            let base = w * 64;
            let mut acc = 0u64;
            for b in 0..64.min(n - base) {
                if unit_f64(word_at(key, (base + b) as u64)) < p {
                    acc |= 1 << b;
                }
            }
            *word = acc;
        }
        Ok(BondConfig {
            lattice: lattice.clone(),
            p,
            seed,
            bits,
        })
    }

    pub fn all_closed(lattice: &LatticeBox) -> Self {
        BondConfig {
            lattice: lattice.clone(),
            p: 0.0,
            seed: 0,
            bits: vec![0; lattice.num_edges().div_ceil(64)],
        }
    }

    pub fn all_open(lattice: &LatticeBox) -> Self {
        let mut c = Self::all_closed(lattice);
        c.p = 1.0;
        for e in 0..lattice.num_edges() {
            c.set(e, true);
        }
        c
    }

    pub fn lattice(&self) -> &LatticeBox {
        &self.lattice
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn num_edges(&self) -> usize {
        self.lattice.num_edges()
    }

    #[inline]
    pub fn is_open(&self, e: usize) -> bool {
        self.bits[e >> 6] >> (e & 63) & 1 == 1
    }

    pub fn set(&mut self, e: usize, open: bool) {
        if open {
            self.bits[e >> 6] |= 1 << (e & 63);
        } else {
            self.bits[e >> 6] &= !(1 << (e & 63));
        }
    }

    /// State of the edge leaving `v` in direction `dir`; `None` outside the box.
    #[inline]
    pub fn open_at(&self, v: usize, dir: Direction) -> Option<bool> {
        self.lattice.edge_at(v, dir).map(|e| self.is_open(e))
    }

    /// Sets the edge between two adjacent in-box points given by coordinates.
    pub fn set_between(&mut self, a: &[i64], b: &[i64], open: bool) -> Result<()> {
        let e = self.edge_between(a, b)?;
        self.set(e, open);
        Ok(())
    }

    pub fn edge_between(&self, a: &[i64], b: &[i64]) -> Result<usize> {
        let l = &self.lattice;
        let (ia, ib) = match (l.index(a), l.index(b)) {
            (Some(ia), Some(ib)) => (ia, ib),
            _ => return Err(Error::Geometry(format!("edge {a:?}-{b:?} leaves the box"))),
        };
        let diff: Vec<i64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
        let axis = diff.iter().position(|&c| c != 0);
        match axis {
            Some(ax) if diff.iter().map(|c| c.abs()).sum::<i64>() == 1 => {
                let lo = if diff[ax] > 0 { ia } else { ib };
                Ok(l.edge_from_lower(lo, ax).expect("both endpoints in box"))
            }
            _ => Err(Error::Geometry(format!("{a:?} and {b:?} are not adjacent"))),
        }
    }

    pub fn open_count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn open_degree(&self, v: usize) -> usize {
        Direction::all(self.lattice.dim())
            .into_iter()
            .filter(|&dir| self.open_at(v, dir) == Some(true))
            .count()
    }

    /// Calls `f(lo, hi, axis)` for every open edge, in vertex order of the
    /// lower endpoint.
    pub fn for_each_open_edge(&self, mut f: impl FnMut(usize, usize, usize)) {
        let l = &self.lattice;
        let d = l.dim();
        let top = l.side() - 1;
        let mut digits = vec![0usize; d];
        let mut next_edge: Vec<usize> = (0..d).map(|a| a * l.edges_per_axis()).collect();
        for v in 0..l.num_vertices() {
            for a in 0..d {
                if digits[a] < top {
                    if self.is_open(next_edge[a]) {
                        f(v, v + l.stride(a), a);
                    }
                    next_edge[a] += 1;
                }
            }
            for digit in digits.iter_mut() {
                *digit += 1;
                if *digit <= top {
                    break;
                }
                *digit = 0;
            }
        }
    }

    /// Per-vertex masks of open incident edges (see [`Direction::bit`]).
    /// Edges leaving the box never appear.
    pub fn open_masks(&self) -> Vec<u16> {
        let l = &self.lattice;
        let mut masks = vec![0u16; l.num_vertices()];
        self.for_each_open_edge(|a, b, axis| {
            masks[a] |= Direction::new(axis, true).bit();
            masks[b] |= Direction::new(axis, false).bit();
        });
        masks
    }

    /// Binary layout: `d: u32`, `L: u32`, `p: f64`, `seed: u64` (all little
    /// endian), then one bit per edge in axis-major edge order, bit `i` of
    /// byte `k` holding edge `8k + i`.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.lattice.dim() as u32).to_le_bytes())?;
        w.write_all(&(self.lattice.radius() as u32).to_le_bytes())?;
        w.write_all(&self.p.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        let nbytes = self.num_edges().div_ceil(8);
        let bytes: Vec<u8> = self
            .bits
            .iter()
            .flat_map(|word| word.to_le_bytes())
            .take(nbytes)
            .collect();
        w.write_all(&bytes)?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24 + self.num_edges().div_ceil(8));
        self.write_binary(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; 24];
        r.read_exact(&mut header)?;
        let d = u32::from_le_bytes(header[0..4].try_into().unwrap()) as usize;
        let radius = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
        let p = f64::from_le_bytes(header[8..16].try_into().unwrap());
        let seed = u64::from_le_bytes(header[16..24].try_into().unwrap());
        check_probability(p)?;
        let lattice = LatticeBox::new(d, radius)?;
        let n = lattice.num_edges();
        let mut bytes = vec![0u8; n.div_ceil(8)];
        r.read_exact(&mut bytes)
            .map_err(|_| Error::Format(format!("expected {} payload bytes", bytes.len())))?;
        if n % 8 != 0 && bytes[bytes.len() - 1] >> (n % 8) != 0 {
            return Err(Error::Format("padding bits set".into()));
        }
        let mut bits = vec![0u64; n.div_ceil(64)];
        for (i, &b) in bytes.iter().enumerate() {
            bits[i / 8] |= (b as u64) << (8 * (i % 8));
        }
        Ok(BondConfig { lattice, p, seed, bits })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::read_binary(bytes)
    }

    /// Line oriented `key = value` summary.
    pub fn summary(&self, labeling: Option<&ClusterLabeling>) -> String {
        let mut s = String::new();
        let e = self.num_edges();
        let open = self.open_count();
        writeln!(s, "d = {}", self.lattice.dim()).unwrap();
        writeln!(s, "L = {}", self.lattice.radius()).unwrap();
        writeln!(s, "p = {}", self.p).unwrap();
        writeln!(s, "seed = {}", self.seed).unwrap();
        writeln!(s, "vertices = {}", self.lattice.num_vertices()).unwrap();
        writeln!(s, "edges = {e}").unwrap();
        writeln!(s, "open_edges = {open}").unwrap();
        writeln!(s, "open_fraction = {}", open as f64 / e as f64).unwrap();
        if let Some(lab) = labeling {
            writeln!(s, "clusters = {}", lab.num_clusters()).unwrap();
            writeln!(s, "giant_label = {}", lab.giant()).unwrap();
            writeln!(s, "giant_size = {}", lab.size_of(lab.giant())).unwrap();
            writeln!(s, "giant_crossing = {}", lab.is_crossing(lab.giant())).unwrap();
            writeln!(s, "origin_label = {}", lab.origin_label()).unwrap();
            writeln!(s, "origin_in_giant = {}", lab.origin_in_giant()).unwrap();
        }
        s
    }
}

pub fn sample_config(d: usize, radius: usize, p: f64, seed: u64) -> Result<BondConfig> {
    let lattice = LatticeBox::new(d, radius)?;
    BondConfig::sample(&lattice, p, seed)
}

/// Connected components of the open subgraph, labeled canonically by the
/// minimum vertex index of each cluster.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterLabeling {
    labels: Vec<u32>,
    /// Indexed by label; zero for vertices that are not a label.
    sizes: Vec<u32>,
    /// Indexed by label: union of the face masks of the cluster's vertices.
    faces: Vec<u32>,
    sorted_sizes: Vec<u32>,
    giant: u32,
    origin_label: u32,
    all_faces: u32,
}

pub fn label_clusters(config: &BondConfig) -> ClusterLabeling {
    let lattice = config.lattice();
    let nv = lattice.num_vertices();
    let mut uf: UnionFind<u32> = UnionFind::new(nv);
    config.for_each_open_edge(|a, b, _| {
        uf.union(a as u32, b as u32);
    });
    const UNSET: u32 = u32::MAX;
    let mut min_of_root = vec![UNSET; nv];
    let mut labels = vec![0u32; nv];
    let mut sizes = vec![0u32; nv];
    let mut faces = vec![0u32; nv];
    for (v, slot) in labels.iter_mut().enumerate() {
        let root = uf.find_mut(v as u32) as usize;
        if min_of_root[root] == UNSET {
            min_of_root[root] = v as u32;
        }
        let label = min_of_root[root];
        *slot = label;
        sizes[label as usize] += 1;
        faces[label as usize] |= lattice.face_mask(v);
    }
    let mut giant = 0u32;
    let mut sorted_sizes = Vec::new();
    for (label, &s) in sizes.iter().enumerate() {
        if s > 0 {
            sorted_sizes.push(s);
            if s > sizes[giant as usize] {
                giant = label as u32;
            }
        }
    }
    sorted_sizes.sort_unstable_by(|a, b| b.cmp(a));
    ClusterLabeling {
        origin_label: labels[lattice.origin()],
        labels,
        sizes,
        faces,
        sorted_sizes,
        giant,
        all_faces: lattice.all_faces_mask(),
    }
}

impl ClusterLabeling {
    #[inline]
    pub fn label(&self, v: usize) -> u32 {
        self.labels[v]
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn size_of(&self, label: u32) -> usize {
        self.sizes[label as usize] as usize
    }

    pub fn cluster_size(&self, v: usize) -> usize {
        self.size_of(self.labels[v])
    }

    /// Cluster sizes, largest first.
    pub fn sorted_sizes(&self) -> &[u32] {
        &self.sorted_sizes
    }

    pub fn num_clusters(&self) -> usize {
        self.sorted_sizes.len()
    }

    pub fn giant(&self) -> u32 {
        self.giant
    }

    pub fn origin_label(&self) -> u32 {
        self.origin_label
    }

    /// The cluster touches all `2d` faces of the box.
    pub fn is_crossing(&self, label: u32) -> bool {
        self.faces[label as usize] == self.all_faces
    }

    #[inline]
    pub fn in_giant(&self, v: usize) -> bool {
        self.labels[v] == self.giant
    }

    /// Finite-box proxy for `0 in C_inf`.
    pub fn origin_in_giant(&self) -> bool {
        self.origin_label == self.giant && self.is_crossing(self.giant)
    }

    pub fn origin_crossing(&self) -> bool {
        self.is_crossing(self.origin_label)
    }
}

/// Open adjacency in compressed sparse row form.
#[derive(Clone, Debug)]
pub struct ClusterGraph {
    offsets: Vec<u32>,
    targets: Vec<u32>,
}

impl ClusterGraph {
    pub fn new(config: &BondConfig) -> Self {
        let nv = config.lattice().num_vertices();
        let mut degree = vec![0u32; nv];
        config.for_each_open_edge(|a, b, _| {
            degree[a] += 1;
            degree[b] += 1;
        });
        let mut offsets = Vec::with_capacity(nv + 1);
        offsets.push(0u32);
        for &k in &degree {
            offsets.push(offsets.last().unwrap() + k);
        }
        // Edges arrive ordered by lower endpoint, so every neighbor list ends
        // up sorted by vertex index.
        let mut cursor: Vec<u32> = offsets[..nv].to_vec();
        let mut targets = vec![0u32; *offsets.last().unwrap() as usize];
        config.for_each_open_edge(|a, b, _| {
            targets[cursor[b] as usize] = a as u32;
            cursor[b] += 1;
            targets[cursor[a] as usize] = b as u32;
            cursor[a] += 1;
        });
        ClusterGraph { offsets, targets }
    }

    pub fn num_vertices(&self) -> usize {
        self.offsets.len() - 1
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.targets[self.offsets[v] as usize..self.offsets[v + 1] as usize]
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        (self.offsets[v + 1] - self.offsets[v]) as usize
    }
}

/// A configuration with its labeling and open adjacency.
#[derive(Clone, Debug)]
pub struct Realization {
    pub config: BondConfig,
    pub labeling: ClusterLabeling,
    pub graph: ClusterGraph,
}

impl Realization {
    pub fn new(config: BondConfig) -> Self {
        let labeling = label_clusters(&config);
        Self::with_labeling(config, labeling)
    }

    pub fn with_labeling(config: BondConfig, labeling: ClusterLabeling) -> Self {
        let graph = ClusterGraph::new(&config);
        Realization {
            config,
            labeling,
            graph,
        }
    }

    pub fn lattice(&self) -> &LatticeBox {
        self.config.lattice()
    }

    pub fn origin(&self) -> usize {
        self.config.lattice().origin()
    }
}

#[derive(Clone, Debug)]
pub struct ConditionedSample {
    pub config: BondConfig,
    pub labeling: ClusterLabeling,
    /// Number of configurations drawn, including the accepted one.
    pub attempts: u64,
    pub origin_in_giant: bool,
}

impl ConditionedSample {
    pub fn into_realization(self) -> Realization {
        Realization::with_labeling(self.config, self.labeling)
    }
}

/// Rejection sampling of `Q[. | 0 in C_inf]`. Attempt `k` (zero based) uses
/// `derive_seed(seed, k)`.
pub fn condition_on_origin(d: usize, radius: usize, p: f64, seed: u64, max_attempts: u64) -> Result<ConditionedSample> {
    if max_attempts < 1 {
        return Err(Error::param("max_attempts", "must be at least 1"));
    }
    let lattice = LatticeBox::new(d, radius)?;
    check_probability(p)?;
    for k in 0..max_attempts {
        let config = BondConfig::sample(&lattice, p, derive_seed(seed, k))?;
        let labeling = label_clusters(&config);
        if labeling.origin_in_giant() {
            return Ok(ConditionedSample {
                config,
                labeling,
                attempts: k + 1,
                origin_in_giant: true,
            });
        }
    }
    Err(Error::Conditioning { attempts: max_attempts })
}

/// Fraction of independent configurations in which the origin's cluster
/// crosses the box. Sample `i` uses `derive_seed(seed, i)`.
pub fn estimate_theta(d: usize, radius: usize, p: f64, samples: usize, seed: u64) -> Result<Estimate> {
    if samples < 1 {
        return Err(Error::param("samples", "must be at least 1"));
    }
    let lattice = LatticeBox::new(d, radius)?;
    check_probability(p)?;
    let hits: usize = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let config = BondConfig::sample(&lattice, p, derive_seed(seed, i)).expect("p checked");
            label_clusters(&config).origin_crossing() as usize
        })
        .sum();
    Ok(Estimate::proportion(hits, samples))
}
