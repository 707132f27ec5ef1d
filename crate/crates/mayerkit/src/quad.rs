//! Reproducible Monte Carlo integration against λ_z^n.
//!
//! Randomness comes from ChaCha8 keyed by `(seed, stream)` with a block
//! counter, so every stream can be regenerated independently. Parallel runs
//! split samples over worker streams and merge accumulators in a fixed
//! pairwise order, which makes the result depend on the worker count but not
//! on thread scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Activity, ActivityKind, Point, Region};

/// Identifies one reproducible random sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngStream { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(self.stream);
        r
    }

    /// Generator positioned at 32-bit word `counter` of this stream.
    pub fn at(&self, counter: u128) -> ChaCha8Rng {
        let mut r = self.rng();
        r.set_word_pos(counter);
        r
    }
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: u64,
}

impl McEstimate {
    /// A value known without sampling error.
    pub fn exact(mean: f64) -> Self {
        McEstimate {
            mean,
            std_error: 0.0,
            samples: 0,
        }
    }

    pub fn scaled(self, c: f64) -> Self {
        McEstimate {
            mean: self.mean * c,
            std_error: self.std_error * c.abs(),
            samples: self.samples,
        }
    }

    /// Sum of independent estimates (errors in quadrature).
    pub fn sum<'a>(terms: impl IntoIterator<Item = &'a McEstimate>) -> Self {
        let mut mean = 0.0;
        let mut var = 0.0;
        let mut samples = 0;
        for t in terms {
            mean += t.mean;
            var += t.std_error * t.std_error;
            samples += t.samples;
        }
        McEstimate {
            mean,
            std_error: var.sqrt(),
            samples,
        }
    }

    /// |mean − target| in units of the standard error (∞ if the error is 0 and they differ).
    pub fn z_score(&self, target: f64) -> f64 {
        let d = (self.mean - target).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.std_error
        }
    }
}

/// Welford accumulator with an exact pairwise merge.
#[derive(Debug, Clone, Copy, Default)]
pub struct Accumulator {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(self, other: Accumulator) -> Accumulator {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let mean = self.mean + d * other.n as f64 / n as f64;
        let m2 = self.m2 + other.m2 + d * d * (self.n as f64) * (other.n as f64) / n as f64;
        Accumulator { n, mean, m2 }
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn estimate(&self) -> McEstimate {
        McEstimate {
            mean: self.mean,
            std_error: (self.variance() / self.n.max(1) as f64).sqrt(),
            samples: self.n,
        }
    }
}

/// Fixed-order pairwise reduction.
pub fn merge_pairwise(mut accs: Vec<Accumulator>) -> Accumulator {
    if accs.is_empty() {
        return Accumulator::default();
    }
    while accs.len() > 1 {
        accs = accs
            .chunks(2)
            .map(|c| if c.len() == 2 { c[0].merge(c[1]) } else { c[0] })
            .collect();
    }
    accs[0]
}

/// Sample count, master seed and worker layout of a Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub samples: u64,
    pub seed: u64,
    pub workers: usize,
    /// Lifts the hard caps on expansion orders.
    #[serde(default)]
    pub force_size_limits: bool,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        SamplingPlan {
            samples: 20_000,
            seed: 1,
            workers: 1,
            force_size_limits: false,
        }
    }
}

impl SamplingPlan {
    pub fn new(samples: u64, seed: u64) -> Self {
        SamplingPlan {
            samples,
            seed,
            workers: 1,
            force_size_limits: false,
        }
    }

    pub fn with_workers(self, workers: usize) -> Self {
        SamplingPlan {
            workers: workers.max(1),
            ..self
        }
    }

    pub fn with_samples(self, samples: u64) -> Self {
        SamplingPlan { samples, ..self }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        SamplingPlan { seed, ..self }
    }

    pub fn with_force(self, force_size_limits: bool) -> Self {
        SamplingPlan {
            force_size_limits,
            ..self
        }
    }

    /// Stream of worker `w` for job `tag`: `tag · 2^16 + w`.
    pub fn stream(&self, tag: u64, worker: usize) -> RngStream {
        RngStream::new(self.seed, (tag << 16) | worker as u64)
    }
}

/// Job tag from a namespace (4 bits), a key (40 bits) and an order (4 bits).
pub fn stream_tag(namespace: u64, key: u64, order: usize) -> u64 {
    debug_assert!(namespace < 16 && order < 16);
    (namespace << 44) | ((key & ((1 << 40) - 1)) << 4) | order as u64
}

/// Draws points from λ_z together with the importance weight λ_z(Λ) (or V·z(x)).
pub(crate) struct Sampler<'a> {
    act: &'a Activity,
    cells: Vec<(Region, f64)>,
    mass: Option<f64>,
}

impl<'a> Sampler<'a> {
    pub(crate) fn new(act: &'a Activity) -> Result<Self> {
        let (cells, mass) = match act.kind() {
            ActivityKind::Constant(z) => (vec![(*act.domain(), 1.0)], Some(z * act.domain().volume())),
            ActivityKind::PiecewiseConstant(cells) => {
                let mut cum = 0.0;
                let c = cells
                    .iter()
                    .filter(|(_, z)| *z > 0.0)
                    .map(|(r, z)| {
                        cum += z * r.volume();
                        (*r, cum)
                    })
                    .collect();
                (c, Some(cum))
            }
            ActivityKind::Callback { .. } => (vec![], None),
        };
        Ok(Sampler { act, cells, mass })
    }

    #[inline]
    pub(crate) fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (Point, f64) {
        let (mut p, w) = match self.mass {
            Some(mass) => {
                let region = if self.cells.len() == 1 {
                    self.cells[0].0
                } else {
                    let u = rng.random::<f64>() * mass;
                    let i = self.cells.partition_point(|(_, c)| *c <= u).min(self.cells.len() - 1);
                    self.cells[i].0
                };
                (region.uniform_point(rng), mass)
            }
            None => {
                let dom = self.act.domain();
                let p = dom.uniform_point(rng);
                let w = dom.volume() * self.act.z(&p);
                (p, w)
            }
        };
        if let Some(law) = self.act.marks() {
            p = p.marked(law.sample(rng));
        }
        (p, w)
    }
}

/// One point distributed ∝ z(x) dx on the activity's box.
pub fn sample_point<R: Rng + ?Sized>(act: &Activity, rng: &mut R) -> Result<Point> {
    let s = Sampler::new(act)?;
    if s.mass == Some(0.0) {
        return Err(Error::contract("activity has zero total mass"));
    }
    if s.mass.is_some() {
        return Ok(s.draw(rng).0);
    }
    let bound = act.mass_bound() / act.domain().volume();
    for _ in 0..10_000_000 {
        let (p, _) = s.draw(rng);
        if rng.random::<f64>() * bound < act.z(&p) {
            return Ok(p);
        }
    }
    Err(Error::contract("activity callback appears to have zero mass"))
}

pub type Integrand<'a> = dyn Fn(&[Point]) -> f64 + Sync + 'a;

fn accumulate(act: &Activity, n: usize, g: &Integrand<'_>, samples: u64, stream: RngStream) -> Result<Accumulator> {
    let sampler = Sampler::new(act)?;
    let mut rng = stream.rng();
    let mut pts = Vec::with_capacity(n);
    let mut acc = Accumulator::default();
    for _ in 0..samples {
        pts.clear();
        let mut w = 1.0;
        for _ in 0..n {
            let (p, wi) = sampler.draw(&mut rng);
            w *= wi;
            pts.push(p);
        }
        let v = if w == 0.0 { 0.0 } else { w * g(&pts) };
        if v.is_nan() {
            return Err(Error::contract("integrand returned NaN"));
        }
        acc.push(v);
    }
    Ok(acc)
}

/// ∫_{Λ^n} g dλ_z^n from `samples` i.i.d. tuples of one stream.
pub fn mc_integrate(act: &Activity, n: usize, g: &Integrand<'_>, samples: u64, stream: RngStream) -> Result<McEstimate> {
    if n == 0 {
        return Ok(McEstimate::exact(g(&[])));
    }
    if samples < 2 {
        return Err(Error::contract("need at least 2 samples"));
    }
    if act.exact_mass() == Some(0.0) {
        return Ok(McEstimate::exact(0.0));
    }
    Ok(accumulate(act, n, g, samples, stream)?.estimate())
}

/// [`mc_integrate`] over the plan's worker streams for job `tag`.
pub fn mc_integrate_plan(act: &Activity, n: usize, g: &Integrand<'_>, plan: &SamplingPlan, tag: u64) -> Result<McEstimate> {
    if n == 0 {
        return Ok(McEstimate::exact(g(&[])));
    }
    if plan.samples < 2 {
        return Err(Error::contract("need at least 2 samples"));
    }
    if act.exact_mass() == Some(0.0) {
        return Ok(McEstimate::exact(0.0));
    }
    let w = plan.workers.max(1) as u64;
    let chunks: Vec<(usize, u64)> = (0..w)
        .map(|i| (i as usize, plan.samples / w + u64::from(i < plan.samples % w)))
        .collect();
    let accs: Result<Vec<Accumulator>> = chunks
        .into_par_iter()
        .map(|(i, s)| accumulate(act, n, g, s, plan.stream(tag, i)))
        .collect();
    Ok(merge_pairwise(accs?).estimate())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Activity, PairPotential, Region};

    #[test]
    fn constant_integrand_is_exact() {
        let act = Activity::constant(2.0, Region::cube(2, 1.5).unwrap()).unwrap();
        let e = mc_integrate(&act, 3, &|_| 1.0, 100, RngStream::new(1, 0)).unwrap();
        assert!((e.mean - (2.0 * 2.25f64).powi(3)).abs() < 1e-9);
        assert!(e.std_error < 1e-9);
    }

    #[test]
    fn rod_overlap_integral() {
        let (l, s) = (10.0, 1.0);
        let act = Activity::constant(1.0, Region::cube(1, l).unwrap()).unwrap();
        let hs = PairPotential::hard_sphere(s).unwrap();
        let g = |p: &[Point]| hs.mayer_f(&p[0], &p[1]);
        let e = mc_integrate(&act, 2, &g, 200_000, RngStream::new(7, 3)).unwrap();
        let exact = -(2.0 * s * l - s * s);
        assert!(e.z_score(exact) < 3.0, "{e:?} vs {exact}");
    }

    #[test]
    fn uniform_mean_coordinate() {
        let act = Activity::constant(1.0, Region::cube(1, 1.0).unwrap()).unwrap();
        let e = mc_integrate(&act, 1, &|p| p[0].coords()[0], 100_000, RngStream::new(3, 0)).unwrap();
        assert!(e.z_score(0.5) < 3.0);
    }

    #[test]
    fn piecewise_sampling_stays_in_support() {
        let dom = Region::cube(1, 2.0).unwrap();
        let left = Region::new(&[0.0], &[1.0]).unwrap();
        let act = Activity::piecewise(vec![(left, 1.0)], dom).unwrap();
        let mut rng = RngStream::new(5, 0).rng();
        for _ in 0..1000 {
            assert!(sample_point(&act, &mut rng).unwrap().coords()[0] <= 1.0);
        }
    }

    #[test]
    fn reproducible_and_layout_stable() {
        let act = Activity::constant(1.0, Region::cube(1, 1.0).unwrap()).unwrap();
        let g = |p: &[Point]| (p[0].coords()[0] * 7.0).sin();
        let s = RngStream::new(9, 2);
        let a = mc_integrate(&act, 1, &g, 1000, s).unwrap();
        let b = mc_integrate(&act, 1, &g, 1000, s).unwrap();
        assert_eq!(a, b);
        let plan = SamplingPlan::new(1001, 4).with_workers(3);
        let x = mc_integrate_plan(&act, 1, &g, &plan, 5).unwrap();
        let y = mc_integrate_plan(&act, 1, &g, &plan, 5).unwrap();
        assert_eq!(x, y);
        assert_eq!(x.samples, 1001);
        // one worker reproduces the single-stream integral
        let one = SamplingPlan::new(1000, 9);
        let z = mc_integrate_plan(&act, 1, &g, &one, 0).unwrap();
        assert_eq!(z, mc_integrate(&act, 1, &g, 1000, RngStream::new(9, 0)).unwrap());
    }

    #[test]
    fn merge_matches_sequential() {
        let xs: Vec<f64> = (0..101).map(|i| ((i * 37) % 17) as f64 * 0.3).collect();
        let mut all = Accumulator::default();
        xs.iter().for_each(|&x| all.push(x));
        let parts: Vec<Accumulator> = xs
            .chunks(13)
            .map(|c| {
                let mut a = Accumulator::default();
                c.iter().for_each(|&x| a.push(x));
                a
            })
            .collect();
        let m = merge_pairwise(parts);
        assert_eq!(m.count(), 101);
        assert!((m.mean() - all.mean()).abs() < 1e-12);
        assert!((m.variance() - all.variance()).abs() < 1e-10);
    }
}
