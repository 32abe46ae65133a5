//! The space-time environment `omega(i, x)`.
//!
//! Laws are trait objects looked up by name. A field is a pure function of
//! `(seed, i, x)`: each site gets its own counter stream, so the value does
//! not depend on query order. `x` is a vertex index of the box the field is
//! used with.

use std::fmt;

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::{fold_key, tag, CounterRng};

/// A centred, unit-variance law with an everywhere finite log-mgf.
pub trait Disorder: fmt::Debug + Send + Sync {
    fn name(&self) -> &'static str;

    /// `Lambda(beta) = log E[exp(beta omega)]`.
    fn lambda(&self, beta: f64) -> f64;

    fn lambda_prime(&self, beta: f64) -> f64;

    fn sample(&self, rng: &mut CounterRng) -> f64;

    /// A draw from the law reweighted by `exp(-delta omega - Lambda(-delta))`.
    fn sample_tilted(&self, delta: f64, rng: &mut CounterRng) -> f64;

    /// Mean under the tilted law, `Lambda'(-delta)`.
    fn tilted_mean(&self, delta: f64) -> f64 {
        self.lambda_prime(-delta)
    }

    /// `log E~[exp(beta omega)] = Lambda(beta - delta) - Lambda(-delta)`.
    fn tilted_log_mgf(&self, beta: f64, delta: f64) -> f64 {
        self.lambda(beta - delta) - self.lambda(-delta)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Gaussian;

impl Disorder for Gaussian {
    fn name(&self) -> &'static str {
        "gaussian"
    }

    fn lambda(&self, beta: f64) -> f64 {
        0.5 * beta * beta
    }

    fn lambda_prime(&self, beta: f64) -> f64 {
        beta
    }

    fn sample(&self, rng: &mut CounterRng) -> f64 {
        rng.sample(StandardNormal)
    }

    // N(-delta, 1): the shift of the same normal draw
    fn sample_tilted(&self, delta: f64, rng: &mut CounterRng) -> f64 {
        self.sample(rng) - delta
    }
}

/// Uniform on `{-1, +1}`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Rademacher;

impl Disorder for Rademacher {
    fn name(&self) -> &'static str {
        "rademacher"
    }

    fn lambda(&self, beta: f64) -> f64 {
        // log cosh without overflow for large |beta|
        let a = beta.abs();
        a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
    }

    fn lambda_prime(&self, beta: f64) -> f64 {
        beta.tanh()
    }

    fn sample(&self, rng: &mut CounterRng) -> f64 {
        if rng.next_u64() >> 63 == 0 {
            -1.0
        } else {
            1.0
        }
    }

    fn sample_tilted(&self, delta: f64, rng: &mut CounterRng) -> f64 {
        // P(-1) = e^delta / (e^delta + e^-delta)
        let p_minus = 1.0 / (1.0 + (-2.0 * delta).exp());
        if rng.next_unit() < p_minus {
            -1.0
        } else {
            1.0
        }
    }
}

static GAUSSIAN: Gaussian = Gaussian;
static RADEMACHER: Rademacher = Rademacher;

/// Every available law, the default first.
pub fn laws() -> [&'static dyn Disorder; 2] {
    [&GAUSSIAN, &RADEMACHER]
}

pub fn law_by_name(name: &str) -> Result<&'static dyn Disorder> {
    laws().into_iter().find(|l| l.name() == name.trim()).ok_or_else(|| {
        let known: Vec<_> = laws().iter().map(|l| l.name()).collect();
        Error::param("law", format!("unknown law `{name}` (known: {})", known.join(", ")))
    })
}

/// `delta_n = 1 / max((log n)^(7/4), 1)`.
pub fn delta_n(n: f64) -> f64 {
    1.0 / n.ln().max(0.0).powf(1.75).max(1.0)
}

/// Times `j..=j+window` crossed with a vertex set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TiltRegion {
    pub j: usize,
    pub window: usize,
    vertices: Vec<usize>,
}

impl TiltRegion {
    pub fn new(j: usize, window: usize, mut vertices: Vec<usize>) -> Self {
        vertices.sort_unstable();
        vertices.dedup();
        TiltRegion { j, window, vertices }
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn contains(&self, i: usize, y: usize) -> bool {
        i >= self.j && i - self.j <= self.window && self.vertices.binary_search(&y).is_ok()
    }

    /// Number of space-time sites, `(window + 1) |V|`.
    pub fn size(&self) -> usize {
        (self.window + 1) * self.vertices.len()
    }

    pub fn sites(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.j..=self.j + self.window).flat_map(move |i| self.vertices.iter().map(move |&y| (i, y)))
    }
}

#[derive(Clone, Debug)]
pub struct Tilt {
    pub region: TiltRegion,
    pub delta: f64,
}

#[derive(Clone, Debug)]
pub struct EnvironmentField {
    law: &'static dyn Disorder,
    seed: u64,
    key: u64,
    tilt: Option<Tilt>,
}

impl EnvironmentField {
    pub fn new(law: &'static dyn Disorder, seed: u64) -> Self {
        EnvironmentField {
            law,
            seed,
            key: fold_key(seed, tag::ENV),
            tilt: None,
        }
    }

    /// The same field with the law inside `region` replaced by its tilt.
    pub fn tilted(&self, region: TiltRegion, delta: f64) -> Result<Self> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::param(
                "tilt.delta",
                format!("{delta} is not a finite nonnegative number"),
            ));
        }
        Ok(EnvironmentField {
            tilt: Some(Tilt { region, delta }),
            ..self.clone()
        })
    }

    pub fn untilted(&self) -> Self {
        EnvironmentField {
            tilt: None,
            ..self.clone()
        }
    }

    pub fn law(&self) -> &'static dyn Disorder {
        self.law
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn tilt(&self) -> Option<&Tilt> {
        self.tilt.as_ref()
    }

    /// Key of time layer `i`; `omega_in_layer(layer_key(i), i, x)` equals `omega(i, x)`.
    #[inline]
    pub fn layer_key(&self, i: usize) -> u64 {
        fold_key(self.key, i as u64)
    }

    #[inline]
    pub fn omega_in_layer(&self, layer_key: u64, i: usize, x: usize) -> f64 {
        let mut rng = CounterRng::from_key(fold_key(layer_key, x as u64));
        match &self.tilt {
            Some(t) if t.region.contains(i, x) => self.law.sample_tilted(t.delta, &mut rng),
            _ => self.law.sample(&mut rng),
        }
    }

    pub fn omega(&self, i: usize, x: usize) -> f64 {
        self.omega_in_layer(self.layer_key(i), i, x)
    }

    /// `log dP~/dP` of this field's untilted values over `region`.
    pub fn log_radon_nikodym(&self, region: &TiltRegion, delta: f64) -> f64 {
        let base = self.untilted();
        let values: Vec<f64> = region.sites().map(|(i, y)| base.omega(i, y)).collect();
        log_radon_nikodym(self.law, delta, &values)
    }
}

/// `sum (-delta omega - Lambda(-delta))` over the given values.
pub fn log_radon_nikodym(law: &dyn Disorder, delta: f64, values: &[f64]) -> f64 {
    let c = law.lambda(-delta);
    values.iter().map(|w| -delta * w - c).sum()
}
