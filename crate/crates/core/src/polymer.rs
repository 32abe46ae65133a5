//! Exact normalized partition functions by forward recursion.
//!
//! `W_n = E_0[prod_{k=1}^n exp(beta omega(k, X_k) - Lambda(beta))]` for the
//! random walk on the open subgraph started at the origin. The recursion
//! `u_{k+1}(y) = sum_x u_k(x) r(x, y) exp(beta omega(k+1, y) - Lambda(beta))`
//! runs over the set of reachable vertices; each layer is rescaled so its
//! maximum is one and the logarithm of the scale is carried separately.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::disorder::{delta_n, Disorder, EnvironmentField, TiltRegion};
use crate::error::{Error, Result};
use crate::percolation::{condition_on_origin, ClusterGraph, Realization};
use crate::rng::{derive_seed, fold_key};
use crate::stats::{combined_stderr, control_variate, sample_variance, Estimate};
use crate::tubes::{tube_length, Tube};

/// Forward stepper over one environment.
///
/// While the support grows the step scatters from the current support. Once
/// the reachable sets of both parities stop growing (two layers apart with
/// equal size) the lists are frozen and the step gathers over them instead.
#[derive(Clone, Debug)]
pub struct PolymerDp<'g> {
    graph: &'g ClusterGraph,
    beta: f64,
    lambda_beta: f64,
    time: usize,
    inv_degree: Vec<f64>,
    weights: Vec<f64>,
    next: Vec<f64>,
    /// Gather buffer, `weights / degree`.
    pre: Vec<f64>,
    active: Vec<u32>,
    /// Scatter: scratch list. Frozen: the support of the next layer.
    next_active: Vec<u32>,
    touched: Vec<bool>,
    log_scale: f64,
    can_freeze: bool,
    frozen: bool,
    two_back: usize,
}

impl<'g> PolymerDp<'g> {
    pub fn new(graph: &'g ClusterGraph, start: usize, beta: f64, lambda_beta: f64) -> Self {
        let nv = graph.num_vertices();
        let mut weights = vec![0.0; nv];
        weights[start] = 1.0;
        PolymerDp {
            graph,
            beta,
            lambda_beta,
            time: 0,
            inv_degree: (0..nv)
                .map(|v| match graph.degree(v) {
                    0 => 1.0,
                    k => 1.0 / k as f64,
                })
                .collect(),
            weights,
            next: vec![0.0; nv],
            pre: vec![0.0; nv],
            active: vec![start as u32],
            next_active: Vec::new(),
            touched: vec![false; nv],
            log_scale: 0.0,
            can_freeze: graph.degree(start) > 0,
            frozen: false,
            two_back: 0,
        }
    }

    pub fn time(&self) -> usize {
        self.time
    }

    /// Stored weights are `u_k(x) / exp(log_scale)`.
    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    /// `(vertex, scaled weight)` over the current support.
    pub fn layer(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.active.iter().map(|&x| (x as usize, self.weights[x as usize]))
    }

    /// `log W_k`; minus infinity when every weight vanished.
    pub fn log_w(&self) -> f64 {
        let total: f64 = self.active.iter().map(|&x| self.weights[x as usize]).sum();
        if total > 0.0 {
            self.log_scale + total.ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    /// Advances to time `k + 1`; `omega(y)` supplies `omega(k + 1, y)`.
    pub fn step(&mut self, omega: impl FnMut(usize) -> f64) {
        let max = if self.frozen {
            self.gather(omega)
        } else {
            self.scatter(omega)
        };
        self.log_scale -= self.lambda_beta;
        if max > 0.0 && max.is_finite() {
            let inv = 1.0 / max;
            for &y in &self.active {
                self.weights[y as usize] *= inv;
            }
            self.log_scale += max.ln();
        }
        self.time += 1;
    }

    fn scatter(&mut self, mut omega: impl FnMut(usize) -> f64) -> f64 {
        let g = self.graph;
        for &x in &self.active {
            let x = x as usize;
            let w = self.weights[x];
            self.weights[x] = 0.0;
            if w == 0.0 {
                continue;
            }
            let nbrs = g.neighbors(x);
            if nbrs.is_empty() {
                if !self.touched[x] {
                    self.touched[x] = true;
                    self.next_active.push(x as u32);
                }
                self.next[x] += w;
                continue;
            }
            let share = w * self.inv_degree[x];
            for &y in nbrs {
                let yi = y as usize;
                if !self.touched[yi] {
                    self.touched[yi] = true;
                    self.next_active.push(y);
                }
                self.next[yi] += share;
            }
        }
        let mut max = 0.0f64;
        for &y in &self.next_active {
            let yi = y as usize;
            self.touched[yi] = false;
            if self.beta != 0.0 {
                self.next[yi] *= (self.beta * omega(yi)).exp();
            }
            max = max.max(self.next[yi]);
        }
        let (current, grown) = (self.active.len(), self.next_active.len());
        std::mem::swap(&mut self.weights, &mut self.next);
        std::mem::swap(&mut self.active, &mut self.next_active);
        if self.can_freeze && grown == self.two_back {
            // next_active now holds the previous support, which is also the
            // support of the coming layer
            self.frozen = true;
        } else {
            self.next_active.clear();
        }
        self.two_back = current;
        max
    }

    fn gather(&mut self, mut omega: impl FnMut(usize) -> f64) -> f64 {
        let g = self.graph;
        for &x in &self.active {
            let x = x as usize;
            self.pre[x] = self.weights[x] * self.inv_degree[x];
        }
        let mut max = 0.0f64;
        for &y in &self.next_active {
            let yi = y as usize;
            let s: f64 = g.neighbors(yi).iter().map(|&x| self.pre[x as usize]).sum();
            let v = if self.beta != 0.0 && s != 0.0 {
                s * (self.beta * omega(yi)).exp()
            } else {
                s
            };
            self.next[yi] = v;
            max = max.max(v);
        }
        std::mem::swap(&mut self.weights, &mut self.next);
        std::mem::swap(&mut self.active, &mut self.next_active);
        max
    }

    /// Zeroes every weight outside the set accepted by `keep`. Switches the
    /// stepper back to scattering for good.
    pub fn restrict(&mut self, keep: impl Fn(usize) -> bool) {
        if self.frozen {
            for &y in &self.next_active {
                self.next[y as usize] = 0.0;
            }
            self.next_active.clear();
            self.frozen = false;
        }
        self.can_freeze = false;
        let weights = &mut self.weights;
        self.active.retain(|&x| {
            let ok = keep(x as usize);
            if !ok {
                weights[x as usize] = 0.0;
            }
            ok
        });
    }
}

/// `X_j = base` and `X_k` in `vertices` for `j < k <= j + window`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DwellRestriction {
    pub j: usize,
    pub base: usize,
    pub window: usize,
    vertices: Vec<usize>,
}

impl DwellRestriction {
    pub fn new(j: usize, base: usize, window: usize, mut vertices: Vec<usize>) -> Self {
        vertices.sort_unstable();
        vertices.dedup();
        DwellRestriction {
            j,
            base,
            window,
            vertices,
        }
    }

    /// The event of staying `m^3` steps in `tube` from time `j` on.
    pub fn for_tube(tube: &Tube, j: usize) -> Self {
        Self::new(j, tube.base, tube.m.pow(3), tube.vertices.clone())
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    fn allows(&self, k: usize, v: usize) -> bool {
        if k == self.j {
            v == self.base
        } else if k > self.j && k - self.j <= self.window {
            self.vertices.binary_search(&v).is_ok()
        } else {
            true
        }
    }

    pub fn accepts(&self, path: &[usize]) -> bool {
        path.iter().enumerate().all(|(k, &v)| self.allows(k, v))
    }

    /// The matching tilt region, `{j, ..., j + window} x vertices`.
    pub fn region(&self) -> TiltRegion {
        TiltRegion::new(self.j, self.window, self.vertices.clone())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolymerResult {
    pub n: usize,
    pub beta: f64,
    pub log_z: f64,
    pub log_w: f64,
    /// `log W_k` for `k = 0, ..., n`.
    pub path: Vec<f64>,
}

impl PolymerResult {
    fn from_path(beta: f64, lambda_beta: f64, path: Vec<f64>) -> Self {
        let n = path.len() - 1;
        let log_w = path[n];
        PolymerResult {
            n,
            beta,
            log_z: log_w + n as f64 * lambda_beta,
            log_w,
            path,
        }
    }

    /// `log W_k - log W_{k-1}` for `k = 1, ..., n`.
    pub fn increments(&self) -> Vec<f64> {
        self.path.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn w(&self) -> f64 {
        self.log_w.exp()
    }
}

fn check_origin(real: &Realization) -> Result<()> {
    if real.labeling.origin_in_giant() {
        Ok(())
    } else {
        Err(Error::param("config", "the origin is not in the giant cluster"))
    }
}

fn run_dp(
    real: &Realization,
    field: &EnvironmentField,
    beta: f64,
    n: usize,
    restriction: Option<&DwellRestriction>,
) -> PolymerResult {
    let lambda_beta = field.law().lambda(beta);
    let mut dp = PolymerDp::new(&real.graph, real.origin(), beta, lambda_beta);
    let mut path = Vec::with_capacity(n + 1);
    let apply = |dp: &mut PolymerDp, k: usize| {
        if let Some(r) = restriction {
            if k >= r.j && k - r.j <= r.window {
                dp.restrict(|v| r.allows(k, v));
            }
        }
    };
    apply(&mut dp, 0);
    path.push(dp.log_w());
    for k in 1..=n {
        let key = field.layer_key(k);
        dp.step(|y| field.omega_in_layer(key, k, y));
        apply(&mut dp, k);
        path.push(dp.log_w());
    }
    PolymerResult::from_path(beta, lambda_beta, path)
}

/// `W_k` for `k <= n` by the forward recursion. At `beta = 0` the result is
/// `W_k = 1` without running the recursion.
pub fn partition_dp(real: &Realization, field: &EnvironmentField, beta: f64, n: usize) -> Result<PolymerResult> {
    check_origin(real)?;
    if beta == 0.0 {
        return Ok(PolymerResult::from_path(0.0, 0.0, vec![0.0; n + 1]));
    }
    Ok(run_dp(real, field, beta, n, None))
}

/// The recursion without the `beta = 0` shortcut.
pub fn partition_dp_full(real: &Realization, field: &EnvironmentField, beta: f64, n: usize) -> Result<PolymerResult> {
    check_origin(real)?;
    Ok(run_dp(real, field, beta, n, None))
}

/// `W_{n,j,x}`: the partition function restricted to paths in the dwell event.
pub fn partition_dp_restricted(
    real: &Realization,
    field: &EnvironmentField,
    beta: f64,
    n: usize,
    restriction: &DwellRestriction,
) -> Result<PolymerResult> {
    check_origin(real)?;
    Ok(run_dp(real, field, beta, n, Some(restriction)))
}

pub const BRUTE_FORCE_LIMIT: usize = 8;

/// Explicit sum over every walk path of length `k <= n` from the origin,
/// restricted to paths accepted by `accept` (checked on full paths of length
/// `n`). Returns `W_n` of the accepted paths.
pub fn event_weight_bruteforce(
    real: &Realization,
    field: &EnvironmentField,
    beta: f64,
    n: usize,
    accept: &dyn Fn(&[usize]) -> bool,
) -> Result<f64> {
    check_origin(real)?;
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::Guard {
            n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let lambda_beta = field.law().lambda(beta);
    let mut totals = vec![0.0; n + 1];
    let mut path = vec![real.origin()];
    enumerate(
        real,
        field,
        beta,
        lambda_beta,
        n,
        &mut path,
        1.0,
        &mut totals,
        &|p: &[usize]| p.len() < n + 1 || accept(p),
    );
    Ok(totals[n])
}

/// `W_k` for `k <= n` by explicit enumeration of all walk paths.
pub fn partition_bruteforce(
    real: &Realization,
    field: &EnvironmentField,
    beta: f64,
    n: usize,
) -> Result<PolymerResult> {
    check_origin(real)?;
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::Guard {
            n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let lambda_beta = field.law().lambda(beta);
    let mut totals = vec![0.0; n + 1];
    let mut path = vec![real.origin()];
    enumerate(real, field, beta, lambda_beta, n, &mut path, 1.0, &mut totals, &|_| {
        true
    });
    Ok(PolymerResult::from_path(
        beta,
        lambda_beta,
        totals.iter().map(|t| t.ln()).collect(),
    ))
}

#[allow(clippy::too_many_arguments)]
fn enumerate(
    real: &Realization,
    field: &EnvironmentField,
    beta: f64,
    lambda_beta: f64,
    n: usize,
    path: &mut Vec<usize>,
    weight: f64,
    totals: &mut [f64],
    keep: &dyn Fn(&[usize]) -> bool,
) {
    if !keep(path) {
        return;
    }
    let k = path.len() - 1;
    totals[k] += weight;
    if k == n {
        return;
    }
    let x = *path.last().unwrap();
    let nbrs = real.graph.neighbors(x);
    let moves: Vec<(usize, f64)> = if nbrs.is_empty() {
        vec![(x, 1.0)]
    } else {
        nbrs.iter().map(|&y| (y as usize, 1.0 / nbrs.len() as f64)).collect()
    };
    for (y, r) in moves {
        let factor = r * (beta * field.omega(k + 1, y) - lambda_beta).exp();
        path.push(y);
        enumerate(real, field, beta, lambda_beta, n, path, weight * factor, totals, keep);
        path.pop();
    }
}

/// Configurations the polymer experiments average over.
#[derive(Clone, Debug)]
pub enum Ensemble<'a> {
    Fixed(&'a Realization),
    /// `clusters` independent configurations conditioned on the origin.
    Conditioned {
        d: usize,
        radius: usize,
        p: f64,
        clusters: usize,
        max_attempts: u64,
    },
}

impl Ensemble<'_> {
    /// Materialises the configurations; cluster `c` conditions with
    /// `derive_seed(seed, c)`.
    fn realizations(&self, seed: u64) -> Result<Vec<std::borrow::Cow<'_, Realization>>> {
        match *self {
            Ensemble::Fixed(r) => {
                check_origin(r)?;
                Ok(vec![std::borrow::Cow::Borrowed(r)])
            }
            Ensemble::Conditioned {
                d,
                radius,
                p,
                clusters,
                max_attempts,
            } => {
                if clusters < 1 {
                    return Err(Error::param("cluster_samples", "must be at least 1"));
                }
                (0..clusters as u64)
                    .into_par_iter()
                    .map(|c| {
                        let s = condition_on_origin(d, radius, p, derive_seed(seed, c), max_attempts)?;
                        Ok(std::borrow::Cow::Owned(s.into_realization()))
                    })
                    .collect()
            }
        }
    }
}

/// Runs one recursion per `(cluster, environment)` up to `max(ns)` and hands
/// back `log W_n` for every requested `n`. Environment `e` of cluster `c` uses
/// `derive_seed(fold_key(seed, c), e)`; the same environments serve every `n`
/// and every `beta`.
fn log_w_table(
    ensemble: &Ensemble,
    law: &'static dyn Disorder,
    beta: f64,
    ns: &[usize],
    env_samples: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if env_samples < 1 {
        return Err(Error::param("env_samples", "must be at least 1"));
    }
    let nmax = ns
        .iter()
        .copied()
        .max()
        .ok_or_else(|| Error::param("n", "grid is empty"))?;
    let reals = ensemble.realizations(fold_key(seed, 0))?;
    let env_seed = fold_key(seed, 1);
    let jobs: Vec<(usize, u64)> = (0..reals.len())
        .flat_map(|c| (0..env_samples as u64).map(move |e| (c, e)))
        .collect();
    Ok(jobs
        .par_iter()
        .map(|&(c, e)| {
            let field = EnvironmentField::new(law, derive_seed(fold_key(env_seed, c as u64), e));
            let res = partition_dp(&reals[c], &field, beta, nmax).expect("origin checked");
            ns.iter().map(|&n| res.path[n]).collect()
        })
        .collect())
}

#[derive(Clone, Debug)]
pub struct MartingaleReport {
    pub n: usize,
    pub beta: f64,
    pub mean: Estimate,
    pub z: f64,
    pub variance: f64,
}

/// Mean of `W_n` over independent environments on a fixed configuration.
pub fn martingale_test(
    real: &Realization,
    law: &'static dyn Disorder,
    beta: f64,
    n: usize,
    env_samples: usize,
    seed: u64,
) -> Result<MartingaleReport> {
    if env_samples < 2 {
        return Err(Error::param("env_samples", "must be at least 2"));
    }
    let table = log_w_table(&Ensemble::Fixed(real), law, beta, &[n], env_samples, seed)?;
    let ws: Vec<f64> = table.iter().map(|r| r[0].exp()).collect();
    let mean = Estimate::from_samples(&ws);
    Ok(MartingaleReport {
        n,
        beta,
        z: mean.z_score(1.0),
        variance: sample_variance(&ws),
        mean,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FracMomentEstimate {
    pub alpha: f64,
    pub beta: f64,
    pub n: usize,
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
    /// The same expectation with `W_n - 1` (mean zero) as control variate.
    pub cv_mean: f64,
    pub cv_stderr: f64,
}

/// `E[W_n^alpha]` for every `n` in `ns` on coupled environments.
pub fn fractional_moments(
    ensemble: &Ensemble,
    law: &'static dyn Disorder,
    alpha: f64,
    beta: f64,
    ns: &[usize],
    env_samples: usize,
    seed: u64,
) -> Result<Vec<FracMomentEstimate>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param("alpha", format!("{alpha} is not in (0, 1)")));
    }
    let table = log_w_table(ensemble, law, beta, ns, env_samples, seed)?;
    Ok(ns
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let powers: Vec<f64> = table.iter().map(|r| (alpha * r[i]).exp()).collect();
            let ws: Vec<f64> = table.iter().map(|r| r[i].exp()).collect();
            let e = Estimate::from_samples(&powers);
            let cv = control_variate(&powers, &ws, 1.0);
            FracMomentEstimate {
                alpha,
                beta,
                n,
                mean: e.mean,
                stderr: e.stderr,
                samples: e.samples,
                cv_mean: cv.mean,
                cv_stderr: cv.stderr,
            }
        })
        .collect())
}

pub fn fractional_moment(
    ensemble: &Ensemble,
    law: &'static dyn Disorder,
    alpha: f64,
    beta: f64,
    n: usize,
    env_samples: usize,
    seed: u64,
) -> Result<FracMomentEstimate> {
    Ok(fractional_moments(ensemble, law, alpha, beta, &[n], env_samples, seed)?.remove(0))
}

/// Settings of the change-of-measure experiment.
#[derive(Clone, Debug)]
pub struct ChangeOfMeasure {
    pub n: usize,
    pub eps: f64,
    pub j: usize,
    pub alpha: f64,
    pub beta: f64,
    /// Tilt strength; `delta_n(n)` when absent.
    pub delta: Option<f64>,
    pub env_samples: usize,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct ChangeOfMeasureReport {
    pub m: usize,
    pub delta: f64,
    /// `|C| = (m^3 + 1)(m + 1)` space-time sites.
    pub region_size: usize,
    /// `P`-probability of the dwell event at `beta = 0`.
    pub event_probability: f64,
    /// `E[W_{n,j,x}^alpha]` under `P`.
    pub fractional: Estimate,
    /// `E~[W_{n,j,x}]` sampled from the tilted law.
    pub tilted: Estimate,
    /// `E[W_{n,j,x} dP~/dP]` under `P`: the same quantity by reweighting.
    pub tilted_by_reweighting: Estimate,
    /// `exp((1-alpha) |C| (Lambda(s delta) + s Lambda(-delta)))`, `s = alpha / (1 - alpha)`.
    pub cost: f64,
    /// `cost * E~[W_{n,j,x}]^alpha`.
    pub bound: f64,
    pub bound_stderr: f64,
}

impl ChangeOfMeasureReport {
    /// `E[W^alpha] <= bound` up to `k` combined standard errors.
    pub fn holds(&self, k: f64) -> bool {
        self.fractional.mean <= self.bound + k * combined_stderr(self.fractional.stderr, self.bound_stderr)
    }
}

/// Exact cost of the change of measure over `sites` space-time sites.
pub fn change_of_measure_cost(law: &dyn Disorder, alpha: f64, delta: f64, sites: usize) -> f64 {
    let s = alpha / (1.0 - alpha);
    ((1.0 - alpha) * sites as f64 * (law.lambda(s * delta) + s * law.lambda(-delta))).exp()
}

impl ChangeOfMeasure {
    pub fn run(&self, real: &Realization, law: &'static dyn Disorder, tube: &Tube) -> Result<ChangeOfMeasureReport> {
        check_origin(real)?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::param("alpha", format!("{} is not in (0, 1)", self.alpha)));
        }
        if self.env_samples < 2 {
            return Err(Error::param("env_samples", "must be at least 2"));
        }
        let m = tube_length(self.n as f64, self.eps);
        if tube.m != m {
            return Err(Error::param(
                "tube",
                format!("tube length {} differs from [eps log n] = {m}", tube.m),
            ));
        }
        let restriction = DwellRestriction::for_tube(tube, self.j);
        if self.j + restriction.window > self.n {
            return Err(Error::param(
                "j",
                format!("j + m^3 = {} exceeds n = {}", self.j + restriction.window, self.n),
            ));
        }
        let probe = EnvironmentField::new(law, 0);
        let event_probability = run_dp(real, &probe, 0.0, self.n, Some(&restriction)).w();
        if event_probability == 0.0 {
            return Err(Error::param(
                "j",
                format!("the walk cannot be at the tube base at time {}", self.j),
            ));
        }
        let delta = self.delta.unwrap_or_else(|| delta_n(self.n as f64));
        let region = restriction.region();
        let samples: Vec<(f64, f64, f64)> = (0..self.env_samples as u64)
            .into_par_iter()
            .map(|e| {
                let field = EnvironmentField::new(law, derive_seed(self.seed, e));
                let plain = run_dp(real, &field, self.beta, self.n, Some(&restriction)).log_w;
                let tilted_field = field.tilted(region.clone(), delta)?;
                let tilted = run_dp(real, &tilted_field, self.beta, self.n, Some(&restriction)).log_w;
                let rn = field.log_radon_nikodym(&region, delta);
                Ok(((self.alpha * plain).exp(), tilted.exp(), (plain + rn).exp()))
            })
            .collect::<Result<_>>()?;
        let col = |f: fn(&(f64, f64, f64)) -> f64| Estimate::from_samples(&samples.iter().map(f).collect::<Vec<_>>());
        let fractional = col(|s| s.0);
        let tilted = col(|s| s.1);
        let tilted_by_reweighting = col(|s| s.2);
        let cost = change_of_measure_cost(law, self.alpha, delta, region.size());
        let bound = cost * tilted.mean.powf(self.alpha);
        let bound_stderr = cost * self.alpha * tilted.mean.powf(self.alpha - 1.0) * tilted.stderr;
        Ok(ChangeOfMeasureReport {
            m,
            delta,
            region_size: region.size(),
            event_probability,
            fractional,
            tilted,
            tilted_by_reweighting,
            cost,
            bound,
            bound_stderr,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanRow {
    pub beta: f64,
    pub n: usize,
    pub mean_log_w: Estimate,
    pub mean_sqrt_w: Estimate,
}

/// Mean `log W_n` and `W_n^{1/2}` over the `(beta, n)` grid. Environments are
/// shared across the whole grid.
pub fn strong_disorder_scan(
    ensemble: &Ensemble,
    law: &'static dyn Disorder,
    betas: &[f64],
    ns: &[usize],
    env_samples: usize,
    seed: u64,
) -> Result<Vec<ScanRow>> {
    if betas.is_empty() {
        return Err(Error::param("beta", "grid is empty"));
    }
    let mut rows = Vec::new();
    for &beta in betas {
        let table = log_w_table(ensemble, law, beta, ns, env_samples, seed)?;
        for (i, &n) in ns.iter().enumerate() {
            let logs: Vec<f64> = table.iter().map(|r| r[i]).collect();
            let roots: Vec<f64> = logs.iter().map(|l| (0.5 * l).exp()).collect();
            rows.push(ScanRow {
                beta,
                n,
                mean_log_w: Estimate::from_samples(&logs),
                mean_sqrt_w: Estimate::from_samples(&roots),
            });
        }
    }
    Ok(rows)
}

pub fn scan_csv(rows: &[ScanRow]) -> String {
    let mut s = String::from("beta,n,samples,mean_log_w,stderr_log_w,mean_sqrt_w,stderr_sqrt_w\n");
    for r in rows {
        writeln!(
            s,
            "{},{},{},{:e},{:e},{:e},{:e}",
            r.beta,
            r.n,
            r.mean_log_w.samples,
            r.mean_log_w.mean,
            r.mean_log_w.stderr,
            r.mean_sqrt_w.mean,
            r.mean_sqrt_w.stderr
        )
        .unwrap();
    }
    s
}

pub fn fractional_csv(rows: &[FracMomentEstimate]) -> String {
    let mut s = String::from("alpha,beta,n,samples,mean_w_alpha,stderr,cv_mean_w_alpha,cv_stderr\n");
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{:e},{:e},{:e},{:e}",
            r.alpha, r.beta, r.n, r.samples, r.mean, r.stderr, r.cv_mean, r.cv_stderr
        )
        .unwrap();
    }
    s
}
