//! Open tubes, good tubes and the tube-density statistic.
//!
//! A tube of length `m` based at `x` in direction `e` has vertex set
//! `x, x+e, ..., x+m e`. It is *open* when its `m` bonds are open, every
//! bond perpendicular to `e` at `x+e, ..., x+m e` is closed and the forward
//! bond `{x+m e, x+(m+1) e}` is closed. It is *good* when in addition every
//! edge at l1-distance one from `x+e, ..., x+m e` is open.
//!
//! Bonds leaving the box count as closed for the open pattern (free boundary).
//! Tubes whose forward bond leaves the box are not reported, and a good-tube
//! boundary edge leaving the box disqualifies the tube.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{Direction, LatticeBox, Parity};
use crate::percolation::{estimate_theta, label_clusters, BondConfig, ClusterLabeling};
use crate::rng::{derive_seed, fold_key};
use crate::stats::{combined_stderr, Estimate};

/// `[eps log n]`, the integer part used for tube lengths.
pub fn tube_length(n: f64, eps: f64) -> usize {
    let v = (eps * n.ln()).floor();
    if v.is_finite() && v > 0.0 {
        v as usize
    } else {
        0
    }
}

/// An edge of `Z^d` given by its lower endpoint and axis.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LatticeEdge {
    pub lo: Vec<i64>,
    pub axis: usize,
}

impl LatticeEdge {
    pub fn between(a: &[i64], b: &[i64]) -> Option<Self> {
        let diff: Vec<i64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
        if diff.iter().map(|c| c.abs()).sum::<i64>() != 1 {
            return None;
        }
        let axis = diff.iter().position(|&c| c != 0)?;
        let lo = if diff[axis] > 0 { a.to_vec() } else { b.to_vec() };
        Some(LatticeEdge { lo, axis })
    }

    pub fn hi(&self) -> Vec<i64> {
        let mut h = self.lo.clone();
        h[self.axis] += 1;
        h
    }

    pub fn index_in(&self, lattice: &LatticeBox) -> Option<usize> {
        let lo = lattice.index(&self.lo)?;
        lattice.index(&self.hi())?;
        lattice.edge_from_lower(lo, self.axis)
    }

    fn l1_distance_to(&self, set: &[Vec<i64>]) -> i64 {
        let hi = self.hi();
        set.iter()
            .flat_map(|u| [l1(&self.lo, u), l1(&hi, u)])
            .min()
            .unwrap_or(i64::MAX)
    }
}

fn l1(a: &[i64], b: &[i64]) -> i64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn shifted(x: &[i64], dir: Direction, k: i64) -> Vec<i64> {
    let mut y = x.to_vec();
    y[dir.axis] += dir.sign() * k;
    y
}

/// The edges an open good tube pins down.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ForcedEdges {
    /// The `m` tube bonds.
    pub open_required: Vec<LatticeEdge>,
    /// `2(d-1) m` perpendicular bonds at the non-base vertices plus the forward bond.
    pub closed_required: Vec<LatticeEdge>,
    /// The outer edge boundary: edges at l1-distance exactly one from the
    /// non-base tube vertices.
    pub boundary: Vec<LatticeEdge>,
}

impl ForcedEdges {
    pub fn total(&self) -> usize {
        self.open_required.len() + self.closed_required.len() + self.boundary.len()
    }

    /// `P(open tube) * P(boundary open)` under i.i.d. Bernoulli(p) bonds.
    pub fn probability(&self, p: f64) -> f64 {
        p.powi((self.open_required.len() + self.boundary.len()) as i32)
            * (1.0 - p).powi(self.closed_required.len() as i32)
    }
}

/// Edge sets of the tube of length `m` at `base` in direction `dir`. The
/// boundary is found by brute enumeration of all edges near the tube and
/// their l1-distance to the non-base vertices.
pub fn forced_edge_sets(lattice: &LatticeBox, m: usize, base: &[i64], dir: Direction) -> Result<ForcedEdges> {
    let d = lattice.dim();
    if m < 1 {
        return Err(Error::param("m", "tube length must be at least 1"));
    }
    if base.len() != d || dir.axis >= d {
        return Err(Error::Geometry(format!("base {base:?} / {dir:?} do not match d = {d}")));
    }
    if !lattice.contains(base) || !lattice.contains(&shifted(base, dir, m as i64 + 1)) {
        return Err(Error::Geometry(format!(
            "tube of length {m} at {base:?} in direction {} plus its forward bond leaves the box",
            dir.label()
        )));
    }
    let verts: Vec<Vec<i64>> = (0..=m as i64).map(|k| shifted(base, dir, k)).collect();
    let open_required = verts
        .windows(2)
        .map(|w| LatticeEdge::between(&w[0], &w[1]).unwrap())
        .collect();
    let mut closed_required = Vec::with_capacity(2 * (d - 1) * m + 1);
    for z in &verts[1..] {
        for q in Direction::all(d) {
            if q.axis != dir.axis {
                closed_required.push(LatticeEdge::between(z, &shifted(z, q, 1)).unwrap());
            }
        }
    }
    closed_required.push(LatticeEdge::between(&verts[m], &shifted(&verts[m], dir, 1)).unwrap());

    let interior = &verts[1..];
    let mut lo_corner = vec![i64::MAX; d];
    let mut hi_corner = vec![i64::MIN; d];
    for z in interior {
        for a in 0..d {
            lo_corner[a] = lo_corner[a].min(z[a] - 2);
            hi_corner[a] = hi_corner[a].max(z[a] + 2);
        }
    }
    let mut boundary = BTreeSet::new();
    let mut x = lo_corner.clone();
    'odometer: loop {
        for axis in 0..d {
            let e = LatticeEdge { lo: x.clone(), axis };
            if e.l1_distance_to(interior) == 1 {
                boundary.insert(e);
            }
        }
        for a in 0..d {
            if x[a] < hi_corner[a] {
                x[a] += 1;
                continue 'odometer;
            }
            x[a] = lo_corner[a];
        }
        break;
    }
    Ok(ForcedEdges {
        open_required,
        closed_required,
        boundary: boundary.into_iter().collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tube {
    pub base: usize,
    pub direction: Direction,
    pub m: usize,
    /// `base, base + e, ..., base + m e`.
    pub vertices: Vec<usize>,
    pub good: bool,
}

impl Tube {
    pub fn contains(&self, v: usize) -> bool {
        self.vertices.contains(&v)
    }

    pub fn end(&self) -> usize {
        self.vertices[self.m]
    }

    /// `x1,x2,.. dir m good`
    pub fn record(&self, lattice: &LatticeBox) -> String {
        let coords: Vec<String> = lattice.coords(self.base).iter().map(|c| c.to_string()).collect();
        format!(
            "{} {} {} {}",
            coords.join(","),
            self.direction.label(),
            self.m,
            self.good
        )
    }
}

/// Checks the open pattern with per-vertex masks of open incident edges.
pub fn open_tube_at(lattice: &LatticeBox, masks: &[u16], x: usize, m: usize, dir: Direction) -> bool {
    let along = dir.bit();
    let all: u16 = (1u16 << (2 * lattice.dim())) - 1;
    let perp = all & !(Direction::new(dir.axis, true).bit() | Direction::new(dir.axis, false).bit());
    let step = lattice.stride(dir.axis);
    let mut z = x;
    for _ in 0..m {
        if masks[z] & along == 0 {
            return false;
        }
        z = if dir.positive { z + step } else { z - step };
        if masks[z] & perp != 0 {
            return false;
        }
    }
    // the forward bond must be closed and inside the box
    masks[z] & along == 0 && lattice.neighbor(z, dir).is_some()
}

/// Every edge at `w` other than the one in direction `except` exists and is open.
fn all_open_except(config: &BondConfig, w: usize, except: Option<Direction>) -> bool {
    Direction::all(config.lattice().dim())
        .into_iter()
        .filter(|&q| Some(q) != except)
        .all(|q| config.open_at(w, q) == Some(true))
}

/// Good-tube boundary by local rule: the edges at the base other than the
/// first tube bond, the edges at `x + (m+1) e` other than the forward bond and
/// the edges at each perpendicular neighbor `w = z + q` of a non-base vertex
/// `z` other than `{w, z}`.
fn boundary_open_at(config: &BondConfig, x: usize, m: usize, dir: Direction) -> bool {
    let lattice = config.lattice();
    if !all_open_except(config, x, Some(dir)) {
        return false;
    }
    let mut z = x;
    for _ in 0..m {
        z = lattice.neighbor(z, dir).expect("open tube stays in the box");
        for q in Direction::all(lattice.dim()) {
            if q.axis == dir.axis {
                continue;
            }
            match lattice.neighbor(z, q) {
                Some(w) if all_open_except(config, w, Some(q.reverse())) => {}
                _ => return false,
            }
        }
    }
    match lattice.neighbor(z, dir) {
        Some(after) => all_open_except(config, after, Some(dir.reverse())),
        None => false,
    }
}

fn make_tube(config: &BondConfig, x: usize, m: usize, dir: Direction) -> Tube {
    let lattice = config.lattice();
    let mut vertices = Vec::with_capacity(m + 1);
    let mut z = x;
    vertices.push(z);
    for _ in 0..m {
        z = lattice.neighbor(z, dir).unwrap();
        vertices.push(z);
    }
    Tube {
        base: x,
        direction: dir,
        m,
        vertices,
        good: boundary_open_at(config, x, m, dir),
    }
}

/// Fully open box except for the edges a tube of length `m` at `base` needs
/// closed. The result holds exactly one good tube of that length.
pub fn plant_tube(lattice: &LatticeBox, base: &[i64], m: usize, dir: Direction) -> Result<BondConfig> {
    let mut c = BondConfig::all_open(lattice);
    for e in &forced_edge_sets(lattice, m, base, dir)?.closed_required {
        c.set(e.index_in(lattice).expect("forced edges lie in the box"), false);
    }
    Ok(c)
}

/// Re-checks a tube through [`forced_edge_sets`]. Returns `(open, good)`.
pub fn verify_tube(config: &BondConfig, tube: &Tube) -> Result<(bool, bool)> {
    let lattice = config.lattice();
    let forced = forced_edge_sets(lattice, tube.m, &lattice.coords(tube.base), tube.direction)?;
    let state = |e: &LatticeEdge| e.index_in(lattice).map(|i| config.is_open(i));
    let open = forced.open_required.iter().all(|e| state(e) == Some(true))
        && forced.closed_required.iter().all(|e| state(e) != Some(true));
    let good = open && forced.boundary.iter().all(|e| state(e) == Some(true));
    Ok((open, good))
}

#[derive(Clone, Debug)]
pub struct TubeCensus {
    pub m: usize,
    pub directions: Vec<Direction>,
    /// Ordered by base index, then by direction order.
    pub tubes: Vec<Tube>,
}

impl TubeCensus {
    pub fn good_count(&self) -> usize {
        self.tubes.iter().filter(|t| t.good).count()
    }

    /// `(odd, even)` counts of tube bases.
    pub fn count_by_parity(&self, lattice: &LatticeBox) -> (usize, usize) {
        let odd = self
            .tubes
            .iter()
            .filter(|t| lattice.parity(t.base) == Parity::Odd)
            .count();
        (odd, self.tubes.len() - odd)
    }

    /// For every vertex, the indices of the tubes containing it.
    pub fn membership(&self, num_vertices: usize) -> Vec<Vec<u32>> {
        let mut map = vec![Vec::new(); num_vertices];
        for (i, t) in self.tubes.iter().enumerate() {
            for &v in &t.vertices {
                map[v].push(i as u32);
            }
        }
        map
    }

    /// One tube per line: `base-coordinates direction m good`.
    pub fn records(&self, lattice: &LatticeBox) -> String {
        let mut s = String::new();
        for t in &self.tubes {
            writeln!(s, "{}", t.record(lattice)).unwrap();
        }
        s
    }
}

fn scan(
    config: &BondConfig,
    m: usize,
    directions: &[Direction],
    mut keep: impl FnMut(usize) -> bool,
) -> Result<TubeCensus> {
    if m < 1 {
        return Err(Error::param("m", "tube length must be at least 1"));
    }
    let lattice = config.lattice();
    if let Some(dir) = directions.iter().find(|dir| dir.axis >= lattice.dim()) {
        return Err(Error::param(
            "axes",
            format!("{} does not exist in d = {}", dir.label(), lattice.dim()),
        ));
    }
    let masks = config.open_masks();
    let mut tubes = Vec::new();
    for x in 0..lattice.num_vertices() {
        for &dir in directions {
            if open_tube_at(lattice, &masks, x, m, dir) && keep(x) {
                tubes.push(make_tube(config, x, m, dir));
            }
        }
    }
    Ok(TubeCensus {
        m,
        directions: directions.to_vec(),
        tubes,
    })
}

/// All open tubes of length `m` whose base lies in the giant cluster.
pub fn scan_open_tubes(
    config: &BondConfig,
    labeling: &ClusterLabeling,
    m: usize,
    directions: &[Direction],
) -> Result<TubeCensus> {
    scan(config, m, directions, |x| labeling.in_giant(x))
}

/// All open tubes of length `m`, ignoring cluster membership of the base.
pub fn scan_tube_pattern(config: &BondConfig, m: usize, directions: &[Direction]) -> Result<TubeCensus> {
    scan(config, m, directions, |_| true)
}

/// Bases `x` in `B(0, n)` with a good open tube of length `m` (pattern only).
fn good_tube_bases(config: &BondConfig, masks: &[u16], n: usize, m: usize, dir: Direction) -> Vec<(usize, Parity)> {
    let lattice = config.lattice();
    let mut out = Vec::new();
    lattice.for_each_in_ball(n, |x, parity| {
        if open_tube_at(lattice, masks, x, m, dir) && boundary_open_at(config, x, m, dir) {
            out.push((x, parity));
        }
    });
    out
}

fn check_density_geometry(lattice: &LatticeBox, n: usize, eps: f64) -> Result<usize> {
    let m = tube_length(n as f64, eps);
    if m < 1 {
        return Err(Error::param("eps", format!("[eps log n] = 0 for eps = {eps}, n = {n}")));
    }
    if lattice.radius() < n {
        return Err(Error::Geometry(format!(
            "box radius {} is smaller than n = {n}",
            lattice.radius()
        )));
    }
    Ok(m)
}

/// Fraction of `x` in `B_parity(0, n)` lying in the giant cluster and basing
/// a good open tube of length `[eps log n]` in direction `e_1`. `None` means
/// both parities.
pub fn tube_density_stat(
    config: &BondConfig,
    labeling: &ClusterLabeling,
    n: usize,
    eps: f64,
    parity: Option<Parity>,
) -> Result<f64> {
    let lattice = config.lattice();
    let m = check_density_geometry(lattice, n, eps)?;
    let masks = config.open_masks();
    let count = good_tube_bases(config, &masks, n, m, Direction::E1)
        .into_iter()
        .filter(|&(x, par)| parity.is_none_or(|p| p == par) && labeling.in_giant(x))
        .count();
    Ok(count as f64 / lattice.ball_size(n, parity) as f64)
}

/// Odd and even densities of one configuration; the labeling is only
/// computed when a candidate tube exists.
fn density_pair(config: &BondConfig, n: usize, m: usize) -> (f64, f64) {
    let lattice = config.lattice();
    let masks = config.open_masks();
    let candidates = good_tube_bases(config, &masks, n, m, Direction::E1);
    if candidates.is_empty() {
        return (0.0, 0.0);
    }
    let labeling = label_clusters(config);
    let (mut odd, mut even) = (0usize, 0usize);
    for (x, par) in candidates {
        if labeling.in_giant(x) {
            match par {
                Parity::Odd => odd += 1,
                Parity::Even => even += 1,
            }
        }
    }
    (
        odd as f64 / lattice.ball_size(n, Some(Parity::Odd)) as f64,
        even as f64 / lattice.ball_size(n, Some(Parity::Even)) as f64,
    )
}

/// Frequency over independent configurations in the box of radius `radius`
/// that the origin bases an open tube of length `m` in direction `e_1`
/// (pattern only, cluster membership ignored). Sample `i` uses
/// `derive_seed(seed, i)`.
pub fn tube_pattern_frequency(
    d: usize,
    radius: usize,
    p: f64,
    m: usize,
    samples: usize,
    seed: u64,
) -> Result<Estimate> {
    if samples < 1 {
        return Err(Error::param("samples", "must be at least 1"));
    }
    let lattice = LatticeBox::new(d, radius)?;
    forced_edge_sets(&lattice, m, &vec![0; d], Direction::E1)?;
    let origin = lattice.origin();
    let hits: usize = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let config = BondConfig::sample(&lattice, p, derive_seed(seed, i))?;
            Ok(open_tube_at(&lattice, &config.open_masks(), origin, m, Direction::E1) as usize)
        })
        .sum::<Result<usize>>()?;
    Ok(Estimate::proportion(hits, samples))
}

/// Monte Carlo estimate of `theta'(p, m) = Q[0 in giant, T_{0,m} good open tube]`
/// together with the product lower bound `theta(p) p^(m+|boundary|) (1-p)^(2(d-1)m+1)`.
#[derive(Clone, Debug)]
pub struct ThetaPrime {
    pub m: usize,
    pub forced: usize,
    pub boundary: usize,
    /// `P(open tube and open boundary)`, exact.
    pub pattern_probability: f64,
    /// `Q[0 in giant | tube pattern forced]`.
    pub conditional: Estimate,
    /// The estimate of `theta'`.
    pub estimate: Estimate,
    pub theta: Estimate,
    pub lower_bound: f64,
    pub lower_bound_stderr: f64,
}

impl ThetaPrime {
    pub fn combined_stderr(&self) -> f64 {
        combined_stderr(self.estimate.stderr, self.lower_bound_stderr)
    }

    /// `estimate >= lower_bound - k * combined stderr`.
    pub fn respects_bound(&self, k: f64) -> bool {
        self.estimate.mean >= self.lower_bound - k * self.combined_stderr()
    }
}

/// `theta'` is estimated by conditional Monte Carlo: the tube pattern at the
/// origin is forced (open tube, open boundary), the remaining bonds are
/// sampled, and the frequency of `0 in giant` is multiplied by the exact
/// pattern probability. `theta(p)` is estimated on independent seeds in the
/// same box.
pub fn theta_prime_estimate(
    d: usize,
    radius: usize,
    p: f64,
    m: usize,
    samples: usize,
    seed: u64,
) -> Result<ThetaPrime> {
    if samples < 1 {
        return Err(Error::param("samples", "must be at least 1"));
    }
    let lattice = LatticeBox::new(d, radius)?;
    let origin = vec![0i64; d];
    let forced = forced_edge_sets(&lattice, m, &origin, Direction::E1)?;
    let index = |edges: &[LatticeEdge]| -> Result<Vec<usize>> {
        edges
            .iter()
            .map(|e| {
                e.index_in(&lattice).ok_or_else(|| {
                    Error::Geometry(format!("tube boundary of length {m} leaves the box of radius {radius}"))
                })
            })
            .collect()
    };
    let open_idx: Vec<usize> = [index(&forced.open_required)?, index(&forced.boundary)?].concat();
    let closed_idx = index(&forced.closed_required)?;
    let pattern_probability = forced.probability(p);

    let cond_seed = fold_key(seed, 1);
    let hits: usize = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut config = BondConfig::sample(&lattice, p, derive_seed(cond_seed, i)).expect("p checked");
            for &e in &open_idx {
                config.set(e, true);
            }
            for &e in &closed_idx {
                config.set(e, false);
            }
            label_clusters(&config).origin_in_giant() as usize
        })
        .sum();
    let conditional = Estimate::proportion(hits, samples);
    let theta = estimate_theta(d, radius, p, samples, fold_key(seed, 2))?;
    Ok(ThetaPrime {
        m,
        forced: forced.open_required.len() + forced.closed_required.len(),
        boundary: forced.boundary.len(),
        pattern_probability,
        estimate: Estimate {
            mean: pattern_probability * conditional.mean,
            stderr: pattern_probability * conditional.stderr,
            samples,
        },
        lower_bound: theta.mean * pattern_probability,
        lower_bound_stderr: theta.stderr * pattern_probability,
        conditional,
        theta,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConcentrationRow {
    pub n: usize,
    pub m: usize,
    pub parity: Parity,
    pub samples: usize,
    pub mean: f64,
    pub sd: f64,
    /// Fraction of samples with `|Z - mean| > mean / 2`.
    pub deviation_frequency: f64,
    /// Every sample was zero.
    pub degenerate: bool,
}

/// For each `n`, samples `Z_n(eps)` for both parities over independent
/// configurations in the box of radius `n + m + 2` and reports the empirical
/// frequency of relative deviations larger than one half.
pub fn concentration_experiment(
    d: usize,
    p: f64,
    eps: f64,
    n_list: &[usize],
    samples: usize,
    seed: u64,
) -> Result<Vec<ConcentrationRow>> {
    if samples < 1 {
        return Err(Error::param("samples", "must be at least 1"));
    }
    let mut rows = Vec::new();
    for &n in n_list {
        let m = tube_length(n as f64, eps);
        let lattice = LatticeBox::new(d, n + m + 2)?;
        check_density_geometry(&lattice, n, eps)?;
        let n_seed = fold_key(seed, n as u64);
        let pairs: Vec<(f64, f64)> = (0..samples as u64)
            .into_par_iter()
            .map(|i| {
                let config = BondConfig::sample(&lattice, p, derive_seed(n_seed, i))?;
                Ok(density_pair(&config, n, m))
            })
            .collect::<Result<_>>()?;
        for parity in [Parity::Odd, Parity::Even] {
            let zs: Vec<f64> = pairs
                .iter()
                .map(|&(o, e)| if parity == Parity::Odd { o } else { e })
                .collect();
            rows.push(concentration_row(n, m, parity, &zs));
        }
    }
    Ok(rows)
}

fn concentration_row(n: usize, m: usize, parity: Parity, zs: &[f64]) -> ConcentrationRow {
    let k = zs.len() as f64;
    let mean = zs.iter().sum::<f64>() / k;
    let sd = (zs.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / k).sqrt();
    let deviations = zs.iter().filter(|&&z| (z - mean).abs() > 0.5 * mean).count();
    ConcentrationRow {
        n,
        m,
        parity,
        samples: zs.len(),
        mean,
        sd,
        deviation_frequency: deviations as f64 / k,
        degenerate: zs.iter().all(|&z| z == 0.0),
    }
}

pub fn concentration_csv(rows: &[ConcentrationRow], eps: f64) -> String {
    let mut s = String::from("n,eps,m,parity,samples,mean_z,sd_z,deviation_frequency,degenerate\n");
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{},{:e},{:e},{},{}",
            r.n,
            eps,
            r.m,
            r.parity.as_str(),
            r.samples,
            r.mean,
            r.sd,
            r.deviation_frequency,
            r.degenerate
        )
        .unwrap();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::percolation::sample_config;
    use proptest::prelude::*;

    fn figure_one_config(lattice: &LatticeBox, base: &[i64], m: usize) -> BondConfig {
        plant_tube(lattice, base, m, Direction::E1).unwrap()
    }

    #[test]
    fn forced_edge_counts() {
        let l = LatticeBox::new(3, 8).unwrap();
        let f = forced_edge_sets(&l, 1, &[0, 0, 0], Direction::E1).unwrap();
        assert_eq!(f.open_required.len(), 1);
        assert_eq!(f.closed_required.len(), 5);
        // six vertices adjacent to {e1}: each carries five boundary edges
        assert_eq!(f.boundary.len(), 30);
        let f = forced_edge_sets(&l, 6, &[0, 0, 0], Direction::E1).unwrap();
        assert_eq!(f.closed_required.len(), 25);
        assert_eq!(f.open_required.len(), 6);
        let f = forced_edge_sets(&l, 2, &[0, 0, 0], Direction::E1).unwrap();
        // 5 + 5 at the ends, 8 perpendicular neighbors with 5 each, 4 shared
        assert_eq!(f.boundary.len(), 46);
        let l2 = LatticeBox::new(2, 5).unwrap();
        let f = forced_edge_sets(&l2, 3, &[0, 0], Direction::E1).unwrap();
        assert_eq!(f.closed_required.len(), 7);
    }

    #[test]
    fn forced_sets_are_disjoint_and_exclude_first_bond() {
        let l = LatticeBox::new(3, 8).unwrap();
        for dir in Direction::all(3) {
            let f = forced_edge_sets(&l, 3, &[1, -1, 0], dir).unwrap();
            let first = LatticeEdge::between(&[1, -1, 0], &shifted(&[1, -1, 0], dir, 1)).unwrap();
            assert!(!f.boundary.contains(&first));
            let all: BTreeSet<_> = f
                .open_required
                .iter()
                .chain(&f.closed_required)
                .chain(&f.boundary)
                .collect();
            assert_eq!(all.len(), f.total());
        }
    }

    #[test]
    fn forced_sets_geometry_error() {
        let l = LatticeBox::new(3, 4).unwrap();
        assert!(matches!(
            forced_edge_sets(&l, 4, &[0, 0, 0], Direction::E1),
            Err(Error::Geometry(_))
        ));
        assert!(forced_edge_sets(&l, 3, &[0, 0, 0], Direction::E1).is_ok());
        assert!(forced_edge_sets(&l, 0, &[0, 0, 0], Direction::E1).is_err());
    }

    #[test]
    fn full_box_has_no_tubes() {
        let c = sample_config(3, 6, 1.0, 1).unwrap();
        let lab = label_clusters(&c);
        for m in 1..4 {
            assert!(scan_open_tubes(&c, &lab, m, &Direction::all(3))
                .unwrap()
                .tubes
                .is_empty());
        }
        assert_eq!(tube_density_stat(&c, &lab, 6, 1.2, Some(Parity::Odd)).unwrap(), 0.0);
    }

    #[test]
    fn figure_one_configuration() {
        let l = LatticeBox::new(3, 9).unwrap();
        let base = [-3i64, 1, 0];
        let c = figure_one_config(&l, &base, 6);
        let lab = label_clusters(&c);
        let census = scan_open_tubes(&c, &lab, 6, &[Direction::E1]).unwrap();
        assert_eq!(census.tubes.len(), 1);
        let t = &census.tubes[0];
        assert_eq!(t.base, l.index(&base).unwrap());
        assert!(t.good);
        assert_eq!(verify_tube(&c, t).unwrap(), (true, true));
        // shorter tubes sit at the far end of the long one, longer ones do not exist
        for m in 1..6 {
            let census = scan_open_tubes(&c, &lab, m, &[Direction::E1]).unwrap();
            let shifted_base = shifted(&base, Direction::E1, 6 - m as i64);
            assert_eq!(census.tubes.len(), 1);
            assert_eq!(census.tubes[0].base, l.index(&shifted_base).unwrap());
            assert!(!census.tubes[0].good);
        }
        assert!(scan_open_tubes(&c, &lab, 7, &[Direction::E1]).unwrap().tubes.is_empty());
    }

    #[test]
    fn handcrafted_density() {
        let l = LatticeBox::new(3, 12).unwrap();
        // [1.0 * ln 8] = 2; bases inside B(0, 8), two odd and one even
        let bases: [[i64; 3]; 3] = [[0, 0, 1], [-4, 3, 0], [2, 2, 2]];
        let mut c = BondConfig::all_open(&l);
        for b in &bases {
            for e in forced_edge_sets(&l, 2, b, Direction::E1).unwrap().closed_required {
                c.set(e.index_in(&l).unwrap(), false);
            }
        }
        let lab = label_clusters(&c);
        let census = scan_open_tubes(&c, &lab, 2, &[Direction::E1]).unwrap();
        assert_eq!(census.tubes.len(), 3);
        assert_eq!(census.good_count(), 3);
        assert_eq!(census.count_by_parity(&l), (2, 1));
        let z_odd = tube_density_stat(&c, &lab, 8, 1.0, Some(Parity::Odd)).unwrap();
        let z_even = tube_density_stat(&c, &lab, 8, 1.0, Some(Parity::Even)).unwrap();
        let z_all = tube_density_stat(&c, &lab, 8, 1.0, None).unwrap();
        let n_odd = l.ball_size(8, Some(Parity::Odd)) as f64;
        let n_even = l.ball_size(8, Some(Parity::Even)) as f64;
        assert_eq!(z_odd, 2.0 / n_odd);
        assert_eq!(z_even, 1.0 / n_even);
        // parity split recombines to the unrestricted density
        assert!((z_all - (z_odd * n_odd + z_even * n_even) / (n_odd + n_even)).abs() < 1e-15);
        assert!(tube_density_stat(&c, &lab, 13, 1.0, None).is_err());
        assert!(tube_density_stat(&c, &lab, 8, 0.1, None).is_err());
    }

    #[test]
    fn walled_tube_is_open_but_not_good() {
        let l = LatticeBox::new(3, 6).unwrap();
        let base = [0i64, 0, 0];
        let mut c = figure_one_config(&l, &base, 2);
        // close one boundary edge: still open, no longer good
        let f = forced_edge_sets(&l, 2, &base, Direction::E1).unwrap();
        c.set(f.boundary[7].index_in(&l).unwrap(), false);
        let census = scan_tube_pattern(&c, 2, &[Direction::E1]).unwrap();
        let t = census.tubes.iter().find(|t| t.base == l.origin()).unwrap();
        assert!(!t.good);
        assert_eq!(verify_tube(&c, t).unwrap(), (true, false));
    }

    #[test]
    fn tube_at_face_is_not_good() {
        let l = LatticeBox::new(3, 5).unwrap();
        // perpendicular neighbors on the +e2 side leave the box
        let base = [0i64, 5, 0];
        let mut c = BondConfig::all_open(&l);
        for q in Direction::all(3) {
            for k in 1..=2 {
                let z = shifted(&base, Direction::E1, k);
                if q.axis != 0 {
                    let w = shifted(&z, q, 1);
                    if l.contains(&w) {
                        c.set_between(&z, &w, false).unwrap();
                    }
                }
            }
        }
        c.set_between(
            &shifted(&base, Direction::E1, 2),
            &shifted(&base, Direction::E1, 3),
            false,
        )
        .unwrap();
        let census = scan_tube_pattern(&c, 2, &[Direction::E1]).unwrap();
        let t = census.tubes.iter().find(|t| t.base == l.index(&base).unwrap()).unwrap();
        assert!(!t.good);
    }

    #[test]
    fn scan_rechecks_and_entry_through_base() {
        for seed in 0..20u64 {
            let c = sample_config(3, 7, 0.35, seed).unwrap();
            let census = scan_tube_pattern(&c, 2, &Direction::all(3)).unwrap();
            let l = c.lattice();
            for t in &census.tubes {
                assert_eq!(verify_tube(&c, t).unwrap(), (true, t.good));
                for &v in &t.vertices[1..] {
                    for q in Direction::all(3) {
                        if c.open_at(v, q) == Some(true) {
                            assert!(t.contains(l.neighbor(v, q).unwrap()));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn disjoint_same_direction_tubes() {
        let mut checked = 0;
        for &p in &[0.5, 0.7] {
            for &m in &[2usize, 3] {
                for seed in 0..125u64 {
                    let c = sample_config(3, 30, p, seed).unwrap();
                    let census = scan_tube_pattern(&c, m, &[Direction::E1]).unwrap();
                    let mut owner = std::collections::HashMap::new();
                    for (i, t) in census.tubes.iter().enumerate() {
                        for &v in &t.vertices {
                            assert!(owner.insert(v, i).is_none(), "vertex {v} in two tubes");
                        }
                    }
                    checked += 1;
                }
            }
        }
        assert_eq!(checked, 500);
    }

    #[test]
    fn degenerate_concentration_cases() {
        let rows = concentration_experiment(3, 1.0, 0.7, &[8], 3, 1).unwrap();
        assert!(rows
            .iter()
            .all(|r| r.degenerate && r.mean == 0.0 && r.deviation_frequency == 0.0));
        let rows = concentration_experiment(2, 0.6, 0.7, &[8], 1, 1).unwrap();
        assert!(rows.iter().all(|r| r.deviation_frequency == 0.0 && r.sd == 0.0));
        let csv = concentration_csv(&rows, 0.7);
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn theta_prime_limits() {
        let t = theta_prime_estimate(3, 5, 1.0, 1, 4, 3).unwrap();
        assert_eq!(t.estimate.mean, 0.0);
        assert_eq!(t.lower_bound, 0.0);
        assert_eq!(t.forced, 1 + 5);
        assert_eq!(t.boundary, 30);
        assert!(matches!(
            theta_prime_estimate(3, 3, 0.6, 2, 4, 3),
            Err(Error::Geometry(_))
        ));
    }

    #[test]
    fn pattern_frequency_limits() {
        assert_eq!(tube_pattern_frequency(3, 4, 1.0, 2, 50, 1).unwrap().mean, 0.0);
        assert_eq!(tube_pattern_frequency(3, 4, 0.0, 2, 50, 1).unwrap().mean, 0.0);
        let est = tube_pattern_frequency(2, 4, 0.5, 1, 20_000, 2).unwrap();
        // p (1 - p)^3
        assert!(est.z_score(0.0625).abs() < 4.0);
        assert!(tube_pattern_frequency(3, 2, 0.6, 2, 5, 1).is_err());
    }

    #[test]
    fn tube_length_truncates() {
        assert_eq!(tube_length(20.0, 0.67), 2);
        assert_eq!(tube_length(80.0, 0.67), 2);
        assert_eq!(tube_length(1000.0, 0.3), 2);
        assert_eq!(tube_length(10_000.0, 0.3), 2);
        assert_eq!(tube_length(1.0, 5.0), 0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn rule_boundary_equals_enumeration(d in 2usize..5, m in 1usize..4, seed in any::<u64>()) {
            let l = LatticeBox::new(d, m + 3).unwrap();
            let dirs = Direction::all(d);
            let dir = dirs[(seed as usize) % dirs.len()];
            let base = vec![0i64; d];
            let f = forced_edge_sets(&l, m, &base, dir).unwrap();
            // start from an open box with the closed pattern in place, then close one
            // edge at random: the rule and the enumeration must agree on goodness
            let mut c = BondConfig::all_open(&l);
            for e in &f.closed_required {
                c.set(e.index_in(&l).unwrap(), false);
            }
            let victim = (seed >> 8) as usize % (l.num_edges() + 1);
            if victim < l.num_edges() {
                c.set(victim, false);
            }
            let x = l.origin();
            let masks = c.open_masks();
            if open_tube_at(&l, &masks, x, m, dir) {
                let t = make_tube(&c, x, m, dir);
                prop_assert_eq!(verify_tube(&c, &t).unwrap(), (true, t.good));
            }
        }
    }
}
