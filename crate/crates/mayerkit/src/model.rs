//! State space, pair potentials, kernels, activities and energies.
//!
//! Points live in an axis-aligned box of R^d with d at most 3 and may carry a
//! non-negative scalar mark (a radius for hard-sphere mixtures). Pair sums are
//! always taken over i < j in lexicographic order so results reproduce exactly.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 3;

/// A point of the state space, optionally marked.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    coords: [f64; MAX_DIM],
    dim: u8,
    mark: Option<f64>,
}

impl Point {
    pub fn new(coords: &[f64]) -> Result<Self> {
        Self::build(coords, None)
    }

    pub fn with_mark(coords: &[f64], mark: f64) -> Result<Self> {
        Self::build(coords, Some(mark))
    }

    fn build(coords: &[f64], mark: Option<f64>) -> Result<Self> {
        if coords.is_empty() || coords.len() > MAX_DIM {
            return Err(Error::model(format!(
                "point dimension {} outside 1..={MAX_DIM}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::model("point coordinates must be finite"));
        }
        if let Some(r) = mark {
            if !(r.is_finite() && r >= 0.0) {
                return Err(Error::model("mark must be finite and non-negative"));
            }
        }
        let mut c = [0.0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Ok(Point {
            coords: c,
            dim: coords.len() as u8,
            mark,
        })
    }

    /// A point on the line. Panics on a non-finite coordinate.
    pub fn on_line(x: f64) -> Self {
        Self::new(&[x]).expect("finite coordinate")
    }

    pub(crate) fn raw(coords: [f64; MAX_DIM], dim: usize, mark: Option<f64>) -> Self {
        Point {
            coords,
            dim: dim as u8,
            mark,
        }
    }

    pub(crate) fn marked(self, mark: f64) -> Point {
        Point {
            mark: Some(mark),
            ..self
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    #[inline]
    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim as usize]
    }

    #[inline]
    pub fn mark(&self) -> Option<f64> {
        self.mark
    }

    #[inline]
    pub fn dist2(&self, other: &Point) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim as usize {
            let d = self.coords[i] - other.coords[i];
            s += d * d;
        }
        s
    }

    #[inline]
    pub fn distance(&self, other: &Point) -> f64 {
        self.dist2(other).sqrt()
    }

    /// Copy of the point shifted by `delta` (same mark).
    pub fn translated(&self, delta: &[f64]) -> Point {
        let mut c = self.coords;
        for (ci, d) in c.iter_mut().zip(delta) {
            *ci += d;
        }
        Point { coords: c, ..*self }
    }
}

/// Finite point configuration; the order is an indexing convention only.
pub type Configuration = Vec<Point>;

/// Axis-aligned box `lower < upper` componentwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    lower: [f64; MAX_DIM],
    upper: [f64; MAX_DIM],
    dim: u8,
}

impl Region {
    pub fn new(lower: &[f64], upper: &[f64]) -> Result<Self> {
        let d = lower.len();
        if d == 0 || d > MAX_DIM || upper.len() != d {
            return Err(Error::model("box bounds must share a dimension in 1..=3"));
        }
        let mut lo = [0.0; MAX_DIM];
        let mut hi = [0.0; MAX_DIM];
        for i in 0..d {
            if !(lower[i].is_finite() && upper[i].is_finite() && lower[i] < upper[i]) {
                return Err(Error::model(format!(
                    "box side {i}: need finite lower < upper, got [{}, {}]",
                    lower[i], upper[i]
                )));
            }
            lo[i] = lower[i];
            hi[i] = upper[i];
        }
        Ok(Region {
            lower: lo,
            upper: hi,
            dim: d as u8,
        })
    }

    /// The cube `[0, side]^dim`.
    pub fn cube(dim: usize, side: f64) -> Result<Self> {
        Self::new(&vec![0.0; dim], &vec![side; dim])
    }

    /// The cube of the given side centred at the origin.
    pub fn centered_cube(dim: usize, side: f64) -> Result<Self> {
        Self::new(&vec![-side / 2.0; dim], &vec![side / 2.0; dim])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower[..self.dim()]
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper[..self.dim()]
    }

    pub fn side(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn min_side(&self) -> f64 {
        (0..self.dim()).map(|i| self.side(i)).fold(f64::INFINITY, f64::min)
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.side(i)).product()
    }

    pub fn center(&self) -> Point {
        let mut c = [0.0; MAX_DIM];
        for (i, ci) in c.iter_mut().enumerate().take(self.dim()) {
            *ci = 0.5 * (self.lower[i] + self.upper[i]);
        }
        Point::raw(c, self.dim(), None)
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.dim() == self.dim()
            && (0..self.dim()).all(|i| p.coords[i] >= self.lower[i] && p.coords[i] <= self.upper[i])
    }

    fn contains_region(&self, other: &Region) -> bool {
        other.dim == self.dim
            && (0..self.dim()).all(|i| other.lower[i] >= self.lower[i] && other.upper[i] <= self.upper[i])
    }

    fn overlaps_interior(&self, other: &Region) -> bool {
        (0..self.dim()).all(|i| self.lower[i] < other.upper[i] && other.lower[i] < self.upper[i])
    }

    /// Uniform point in the box (unmarked).
    pub fn uniform_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let mut c = [0.0; MAX_DIM];
        for (i, ci) in c.iter_mut().enumerate().take(self.dim()) {
            let u: f64 = rng.random();
            *ci = self.lower[i] + u * self.side(i);
        }
        Point::raw(c, self.dim(), None)
    }
}

/// Radial table of values over distance, linearly interpolated.
///
/// Below the first node the first value is used; past the last node the
/// value is 0.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialTable {
    distance: Vec<f64>,
    value: Vec<f64>,
}

impl RadialTable {
    pub fn new(distance: Vec<f64>, value: Vec<f64>) -> Result<Self> {
        if distance.is_empty() || distance.len() != value.len() {
            return Err(Error::model("radial table needs matching non-empty columns"));
        }
        if distance.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::model("radial table distances must be finite and non-negative"));
        }
        if distance.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::model("radial table distances must be strictly increasing"));
        }
        if value.iter().any(|v| v.is_nan()) {
            return Err(Error::model("radial table values must not be NaN"));
        }
        Ok(RadialTable { distance, value })
    }

    /// Read a two-column CSV of `(distance, value)` rows; a header row is optional.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::model(format!("{}: {e}", path.display())))?;
        let mut distance = Vec::new();
        let mut value = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::model(format!("{}: {e}", path.display())))?;
            if rec.len() != 2 {
                return Err(Error::model(format!(
                    "{}: row {} has {} columns, expected 2",
                    path.display(),
                    line + 1,
                    rec.len()
                )));
            }
            match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
                (Ok(d), Ok(v)) => {
                    distance.push(d);
                    value.push(v);
                }
                _ if line == 0 => continue,
                _ => {
                    return Err(Error::model(format!(
                        "{}: row {} is not numeric",
                        path.display(),
                        line + 1
                    )))
                }
            }
        }
        Self::new(distance, value)
    }

    pub fn range(&self) -> f64 {
        *self.distance.last().expect("non-empty")
    }

    pub fn distances(&self) -> &[f64] {
        &self.distance
    }

    pub fn values(&self) -> &[f64] {
        &self.value
    }

    pub fn eval(&self, r: f64) -> f64 {
        let d = &self.distance;
        if r > self.range() {
            return 0.0;
        }
        if r <= d[0] {
            return self.value[0];
        }
        let j = d.partition_point(|&x| x < r);
        let (d0, d1) = (d[j - 1], d[j]);
        let (v0, v1) = (self.value[j - 1], self.value[j]);
        if v0 == v1 {
            return v0;
        }
        if v0.is_infinite() || v1.is_infinite() {
            return f64::INFINITY;
        }
        v0 + (v1 - v0) * (r - d0) / (d1 - d0)
    }
}

pub type PairFn = Arc<dyn Fn(&Point, &Point) -> f64 + Send + Sync>;
pub type PointFn = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;

/// Shape of a non-negative pair potential.
#[derive(Clone)]
pub enum PotentialKind {
    /// v ≡ 0.
    Ideal,
    /// Hard core: v = +∞ iff |x − y| ≤ diameter (closed ball).
    HardSphere { diameter: f64 },
    /// Hard core over summed mark radii: v = +∞ iff |x − y| ≤ R + r.
    HardSphereMixture,
    TabulatedRadial(RadialTable),
    /// User function with an optional interaction range (v = 0 beyond it).
    Callback { v: PairFn, range: Option<f64> },
}

impl fmt::Debug for PotentialKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PotentialKind::Ideal => write!(f, "Ideal"),
            PotentialKind::HardSphere { diameter } => write!(f, "HardSphere({diameter})"),
            PotentialKind::HardSphereMixture => write!(f, "HardSphereMixture"),
            PotentialKind::TabulatedRadial(t) => write!(f, "TabulatedRadial({} nodes)", t.distance.len()),
            PotentialKind::Callback { range, .. } => write!(f, "Callback(range {range:?})"),
        }
    }
}

/// Non-negative symmetric pair potential with inverse temperature β.
#[derive(Debug, Clone)]
pub struct PairPotential {
    kind: PotentialKind,
    beta: f64,
}

impl PairPotential {
    pub fn ideal() -> Self {
        PairPotential {
            kind: PotentialKind::Ideal,
            beta: 1.0,
        }
    }

    pub fn hard_sphere(diameter: f64) -> Result<Self> {
        if !(diameter.is_finite() && diameter > 0.0) {
            return Err(Error::model("hard-sphere exclusion distance must be positive"));
        }
        Ok(PairPotential {
            kind: PotentialKind::HardSphere { diameter },
            beta: 1.0,
        })
    }

    pub fn hard_sphere_mixture() -> Self {
        PairPotential {
            kind: PotentialKind::HardSphereMixture,
            beta: 1.0,
        }
    }

    pub fn tabulated(table: RadialTable) -> Result<Self> {
        if table.value.iter().any(|v| *v < 0.0) {
            return Err(Error::model("pair potential values must be non-negative"));
        }
        Ok(PairPotential {
            kind: PotentialKind::TabulatedRadial(table),
            beta: 1.0,
        })
    }

    /// The callback must be symmetric and return values in [0, +∞].
    pub fn callback(v: PairFn, range: Option<f64>) -> Self {
        PairPotential {
            kind: PotentialKind::Callback { v, range },
            beta: 1.0,
        }
    }

    pub fn with_beta(mut self, beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::model("beta must be finite and non-negative"));
        }
        self.beta = beta;
        Ok(self)
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn is_ideal(&self) -> bool {
        matches!(self.kind, PotentialKind::Ideal)
    }

    pub fn hard_sphere_diameter(&self) -> Option<f64> {
        match self.kind {
            PotentialKind::HardSphere { diameter } => Some(diameter),
            _ => None,
        }
    }

    /// Distance past which v vanishes, when known and mark-independent.
    pub fn range(&self) -> Option<f64> {
        match &self.kind {
            PotentialKind::Ideal => Some(0.0),
            PotentialKind::HardSphere { diameter } => Some(*diameter),
            PotentialKind::HardSphereMixture => None,
            PotentialKind::TabulatedRadial(t) => Some(t.range()),
            PotentialKind::Callback { range, .. } => *range,
        }
    }

    /// β·v(x, y), with hard cores as +∞ regardless of β.
    #[inline]
    pub fn value(&self, x: &Point, y: &Point) -> f64 {
        let raw = match &self.kind {
            PotentialKind::Ideal => return 0.0,
            PotentialKind::HardSphere { diameter } => {
                return if x.dist2(y) <= diameter * diameter {
                    f64::INFINITY
                } else {
                    0.0
                };
            }
            PotentialKind::HardSphereMixture => {
                let s = x.mark.unwrap_or(0.0) + y.mark.unwrap_or(0.0);
                return if x.dist2(y) <= s * s { f64::INFINITY } else { 0.0 };
            }
            PotentialKind::TabulatedRadial(t) => t.eval(x.distance(y)),
            PotentialKind::Callback { v, range } => {
                if let Some(r) = range {
                    if x.dist2(y) > r * r {
                        return 0.0;
                    }
                }
                v(x, y)
            }
        };
        debug_assert!(raw >= 0.0, "pair potential returned a negative value");
        if raw.is_infinite() {
            f64::INFINITY
        } else {
            self.beta * raw
        }
    }

    /// Mayer's f = e^{−βv} − 1, exactly −1 on a hard core.
    #[inline]
    pub fn mayer_f(&self, x: &Point, y: &Point) -> f64 {
        let v = self.value(x, y);
        if v == f64::INFINITY {
            -1.0
        } else if v == 0.0 {
            0.0
        } else {
            (-v).exp_m1()
        }
    }
}

/// Free-function form of [`PairPotential::mayer_f`].
pub fn mayer_f(pot: &PairPotential, x: &Point, y: &Point) -> f64 {
    pot.mayer_f(x, y)
}

/// H_n: the pair energy of a configuration, +∞ on any hard-core overlap.
pub fn energy(pot: &PairPotential, cfg: &[Point]) -> f64 {
    let mut h = 0.0;
    for j in 1..cfg.len() {
        for i in 0..j {
            let v = pot.value(&cfg[i], &cfg[j]);
            if v == f64::INFINITY {
                return f64::INFINITY;
            }
            h += v;
        }
    }
    h
}

/// W(x; η) = Σ_j v(x, y_j).
pub fn interaction_field(pot: &PairPotential, x: &Point, cfg: &[Point]) -> f64 {
    let mut w = 0.0;
    for y in cfg {
        let v = pot.value(x, y);
        if v == f64::INFINITY {
            return f64::INFINITY;
        }
        w += v;
    }
    w
}

/// Shape of a signed symmetric kernel.
#[derive(Clone)]
pub enum KernelKind {
    Constant(f64),
    /// `core_value` for r ≤ core, `-depth` for core < r ≤ range, 0 beyond.
    SquareWell {
        core: f64,
        core_value: f64,
        range: f64,
        depth: f64,
    },
    /// amplitude · exp(−r²/(2 width²)).
    Gaussian { amplitude: f64, width: f64 },
    TabulatedRadial(RadialTable),
    Callback { u: PairFn, range: Option<f64> },
}

impl fmt::Debug for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelKind::Constant(c) => write!(f, "Constant({c})"),
            KernelKind::SquareWell {
                core,
                core_value,
                range,
                depth,
            } => write!(f, "SquareWell(core {core} -> {core_value}, well to {range} depth {depth})"),
            KernelKind::Gaussian { amplitude, width } => write!(f, "Gaussian({amplitude}, {width})"),
            KernelKind::TabulatedRadial(t) => write!(f, "TabulatedRadial({} nodes)", t.distance.len()),
            KernelKind::Callback { range, .. } => write!(f, "Callback(range {range:?})"),
        }
    }
}

/// Real-valued symmetric kernel u(x, y), possibly negative.
#[derive(Debug, Clone)]
pub struct Kernel {
    kind: KernelKind,
}

impl Kernel {
    pub fn constant(c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(Error::model("constant kernel must be finite"));
        }
        Ok(Kernel {
            kind: KernelKind::Constant(c),
        })
    }

    /// Square well with a (possibly infinite) core; used by the stability-based
    /// convergence check. Cumulant routines reject infinite cores.
    pub fn square_well(core: f64, core_value: f64, range: f64, depth: f64) -> Result<Self> {
        if !(core >= 0.0 && range >= core && range.is_finite() && depth.is_finite()) {
            return Err(Error::model("square well needs 0 <= core <= range < inf"));
        }
        if core_value.is_nan() {
            return Err(Error::model("square well core value must not be NaN"));
        }
        Ok(Kernel {
            kind: KernelKind::SquareWell {
                core,
                core_value,
                range,
                depth,
            },
        })
    }

    pub fn gaussian(amplitude: f64, width: f64) -> Result<Self> {
        if !(amplitude.is_finite() && width.is_finite() && width > 0.0) {
            return Err(Error::model("gaussian kernel needs finite amplitude and positive width"));
        }
        Ok(Kernel {
            kind: KernelKind::Gaussian { amplitude, width },
        })
    }

    pub fn tabulated(table: RadialTable) -> Self {
        Kernel {
            kind: KernelKind::TabulatedRadial(table),
        }
    }

    pub fn callback(u: PairFn, range: Option<f64>) -> Self {
        Kernel {
            kind: KernelKind::Callback { u, range },
        }
    }

    pub fn kind(&self) -> &KernelKind {
        &self.kind
    }

    /// Whether every kernel value is finite.
    pub fn is_bounded(&self) -> bool {
        match &self.kind {
            KernelKind::SquareWell { core_value, .. } => core_value.is_finite(),
            KernelKind::TabulatedRadial(t) => t.value.iter().all(|v| v.is_finite()),
            _ => true,
        }
    }

    #[inline]
    pub fn value(&self, x: &Point, y: &Point) -> f64 {
        match &self.kind {
            KernelKind::Constant(c) => *c,
            KernelKind::SquareWell {
                core,
                core_value,
                range,
                depth,
            } => {
                let d2 = x.dist2(y);
                if d2 <= core * core {
                    *core_value
                } else if d2 <= range * range {
                    -depth
                } else {
                    0.0
                }
            }
            KernelKind::Gaussian { amplitude, width } => amplitude * (-x.dist2(y) / (2.0 * width * width)).exp(),
            KernelKind::TabulatedRadial(t) => t.eval(x.distance(y)),
            KernelKind::Callback { u, range } => {
                if let Some(r) = range {
                    if x.dist2(y) > r * r {
                        return 0.0;
                    }
                }
                u(x, y)
            }
        }
    }
}

/// Law of the scalar mark attached to each point of a marked space.
#[derive(Debug, Clone, PartialEq)]
pub enum MarkLaw {
    Fixed(f64),
    Uniform { lo: f64, hi: f64 },
    /// `(mark, weight)` pairs with positive weights.
    Discrete(Vec<(f64, f64)>),
}

impl MarkLaw {
    fn validate(&self) -> Result<()> {
        let ok = match self {
            MarkLaw::Fixed(r) => r.is_finite() && *r >= 0.0,
            MarkLaw::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && 0.0 <= *lo && lo <= hi,
            MarkLaw::Discrete(v) => {
                !v.is_empty() && v.iter().all(|(r, w)| r.is_finite() && *r >= 0.0 && w.is_finite() && *w > 0.0)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::model("invalid mark law"))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            MarkLaw::Fixed(r) => *r,
            MarkLaw::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            MarkLaw::Discrete(v) => {
                let total: f64 = v.iter().map(|(_, w)| w).sum();
                let mut u = rng.random::<f64>() * total;
                for (r, w) in v {
                    if u < *w {
                        return *r;
                    }
                    u -= w;
                }
                v.last().expect("non-empty").0
            }
        }
    }

    pub fn max(&self) -> f64 {
        match self {
            MarkLaw::Fixed(r) => *r,
            MarkLaw::Uniform { hi, .. } => *hi,
            MarkLaw::Discrete(v) => v.iter().map(|(r, _)| *r).fold(0.0, f64::max),
        }
    }
}

/// Shape of an activity function z(x) ≥ 0.
#[derive(Clone)]
pub enum ActivityKind {
    Constant(f64),
    /// Disjoint sub-boxes with constant values; z = 0 elsewhere.
    PiecewiseConstant(Vec<(Region, f64)>),
    /// User function with a pointwise upper bound used for rejection sampling.
    Callback { z: PointFn, bound: f64 },
}

impl fmt::Debug for ActivityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActivityKind::Constant(z) => write!(f, "Constant({z})"),
            ActivityKind::PiecewiseConstant(c) => write!(f, "PiecewiseConstant({} cells)", c.len()),
            ActivityKind::Callback { bound, .. } => write!(f, "Callback(bound {bound})"),
        }
    }
}

/// Activity z on a box Λ; λ_z = z dx restricted to Λ (times the mark law).
#[derive(Debug, Clone)]
pub struct Activity {
    kind: ActivityKind,
    domain: Region,
    marks: Option<MarkLaw>,
}

impl Activity {
    pub fn constant(z: f64, domain: Region) -> Result<Self> {
        if !(z.is_finite() && z >= 0.0) {
            return Err(Error::model("activity must be finite and non-negative"));
        }
        Ok(Activity {
            kind: ActivityKind::Constant(z),
            domain,
            marks: None,
        })
    }

    pub fn piecewise(cells: Vec<(Region, f64)>, domain: Region) -> Result<Self> {
        for (i, (c, z)) in cells.iter().enumerate() {
            if !(z.is_finite() && *z >= 0.0) {
                return Err(Error::model(format!("cell {i}: activity must be finite and non-negative")));
            }
            if !domain.contains_region(c) {
                return Err(Error::model(format!("cell {i} is not inside the domain")));
            }
            for (j, (o, _)) in cells.iter().enumerate().take(i) {
                if c.overlaps_interior(o) {
                    return Err(Error::model(format!("cells {j} and {i} overlap")));
                }
            }
        }
        Ok(Activity {
            kind: ActivityKind::PiecewiseConstant(cells),
            domain,
            marks: None,
        })
    }

    /// `z` must satisfy 0 ≤ z(x) ≤ bound on the domain.
    pub fn callback(z: PointFn, bound: f64, domain: Region) -> Result<Self> {
        if !(bound.is_finite() && bound > 0.0) {
            return Err(Error::model("callback activity needs a positive finite bound"));
        }
        Ok(Activity {
            kind: ActivityKind::Callback { z, bound },
            domain,
            marks: None,
        })
    }

    pub fn with_marks(mut self, law: MarkLaw) -> Result<Self> {
        law.validate()?;
        self.marks = Some(law);
        Ok(self)
    }

    pub fn kind(&self) -> &ActivityKind {
        &self.kind
    }

    pub fn domain(&self) -> &Region {
        &self.domain
    }

    pub fn marks(&self) -> Option<&MarkLaw> {
        self.marks.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// The same activity shape over a different box (constant activities only).
    pub fn with_domain(&self, domain: Region) -> Result<Self> {
        match self.kind {
            ActivityKind::Constant(z) => Ok(Activity {
                kind: ActivityKind::Constant(z),
                domain,
                marks: self.marks.clone(),
            }),
            _ => Err(Error::Unsupported("re-domaining a non-constant activity".into())),
        }
    }

    pub fn constant_value(&self) -> Option<f64> {
        match self.kind {
            ActivityKind::Constant(z) => Some(z),
            _ => None,
        }
    }

    /// z(x); zero outside the domain.
    pub fn z(&self, p: &Point) -> f64 {
        if !self.domain.contains(p) {
            return 0.0;
        }
        match &self.kind {
            ActivityKind::Constant(z) => *z,
            ActivityKind::PiecewiseConstant(cells) => {
                cells.iter().find(|(c, _)| c.contains(p)).map(|(_, z)| *z).unwrap_or(0.0)
            }
            ActivityKind::Callback { z, .. } => z(p),
        }
    }

    /// λ_z(Λ) when it is known in closed form.
    pub fn exact_mass(&self) -> Option<f64> {
        match &self.kind {
            ActivityKind::Constant(z) => Some(z * self.domain.volume()),
            ActivityKind::PiecewiseConstant(cells) => Some(cells.iter().map(|(c, z)| z * c.volume()).sum()),
            ActivityKind::Callback { .. } => None,
        }
    }

    /// Upper bound on z(x) over the domain.
    pub fn z_bound(&self) -> f64 {
        match &self.kind {
            ActivityKind::Constant(z) => *z,
            ActivityKind::PiecewiseConstant(cells) => cells.iter().map(|(_, z)| *z).fold(0.0, f64::max),
            ActivityKind::Callback { bound, .. } => *bound,
        }
    }

    /// Upper bound on λ_z(Λ).
    pub fn mass_bound(&self) -> f64 {
        match &self.kind {
            ActivityKind::Callback { bound, .. } => bound * self.domain.volume(),
            _ => self.exact_mass().expect("closed form"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64) -> Point {
        Point::on_line(x)
    }

    #[test]
    fn hard_sphere_mayer_values() {
        let hs = PairPotential::hard_sphere(1.0).unwrap();
        assert_eq!(hs.mayer_f(&p(0.0), &p(0.5)), -1.0);
        assert_eq!(hs.mayer_f(&p(0.0), &p(3.0)), 0.0);
        assert_eq!(hs.mayer_f(&p(0.0), &p(1.0)), -1.0, "closed ball");
        let zero_beta = hs.clone().with_beta(0.0).unwrap();
        assert_eq!(zero_beta.mayer_f(&p(0.0), &p(0.5)), -1.0);
    }

    #[test]
    fn tabulated_mayer_value() {
        let t = RadialTable::new(vec![0.0, 1.0, 2.0], vec![0.5, 0.5, 0.5]).unwrap();
        let pot = PairPotential::tabulated(t).unwrap();
        let f = pot.mayer_f(&p(0.0), &p(0.7));
        assert!((f - ((-0.5f64).exp() - 1.0)).abs() < 1e-15);
        assert!((f + 0.39347).abs() < 1e-5);
        assert_eq!(pot.mayer_f(&p(0.0), &p(2.5)), 0.0);
    }

    #[test]
    fn table_interpolation_and_clamping() {
        let t = RadialTable::new(vec![1.0, 2.0, 3.0], vec![4.0, 2.0, 1.0]).unwrap();
        assert_eq!(t.eval(0.2), 4.0);
        assert_eq!(t.eval(1.5), 3.0);
        assert_eq!(t.eval(3.0), 1.0);
        assert_eq!(t.eval(3.0001), 0.0);
        assert!(RadialTable::new(vec![1.0, 1.0], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn table_from_csv_with_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.csv");
        std::fs::write(&path, "distance,v\n0.0,2.0\n1.0,0.0\n").unwrap();
        let t = RadialTable::from_csv(&path).unwrap();
        assert_eq!(t.distances(), &[0.0, 1.0]);
        std::fs::write(&path, "0.0,2.0\n0.5,1.0\n").unwrap();
        assert_eq!(RadialTable::from_csv(&path).unwrap().values(), &[2.0, 1.0]);
        std::fs::write(&path, "0.0,2.0\n0.5\n").unwrap();
        assert!(RadialTable::from_csv(&path).is_err());
    }

    #[test]
    fn mixture_uses_summed_radii() {
        let pot = PairPotential::hard_sphere_mixture();
        let a = Point::with_mark(&[0.0, 0.0], 0.3).unwrap();
        let b = Point::with_mark(&[0.5, 0.0], 0.2).unwrap();
        let c = Point::with_mark(&[0.6, 0.0], 0.2).unwrap();
        assert_eq!(pot.mayer_f(&a, &b), -1.0);
        assert_eq!(pot.mayer_f(&a, &c), 0.0);
    }

    #[test]
    fn energy_basics() {
        let hs = PairPotential::hard_sphere(1.0).unwrap();
        assert_eq!(energy(&hs, &[]), 0.0);
        assert_eq!(energy(&hs, &[p(0.0)]), 0.0);
        assert_eq!(energy(&hs, &[p(0.0), p(0.5)]), f64::INFINITY);
        assert_eq!(interaction_field(&hs, &p(0.0), &[]), 0.0);
        assert_eq!(interaction_field(&hs, &p(0.0), &[p(5.0), p(0.2)]), f64::INFINITY);
    }

    #[test]
    fn constructors_validate() {
        assert!(Point::new(&[f64::NAN]).is_err());
        assert!(Point::new(&[0.0; 4]).is_err());
        assert!(Point::with_mark(&[0.0], -1.0).is_err());
        assert!(Region::new(&[0.0], &[0.0]).is_err());
        assert!(PairPotential::hard_sphere(0.0).is_err());
        let t = RadialTable::new(vec![0.0, 1.0], vec![-1.0, 0.0]).unwrap();
        assert!(PairPotential::tabulated(t).is_err());
        let dom = Region::cube(1, 1.0).unwrap();
        assert!(Activity::constant(-1.0, dom).is_err());
        let a = Region::new(&[0.0], &[0.6]).unwrap();
        let b = Region::new(&[0.5], &[1.0]).unwrap();
        assert!(Activity::piecewise(vec![(a, 1.0), (b, 1.0)], dom).is_err());
    }

    #[test]
    fn piecewise_activity() {
        let dom = Region::cube(1, 2.0).unwrap();
        let left = Region::new(&[0.0], &[1.0]).unwrap();
        let act = Activity::piecewise(vec![(left, 3.0)], dom).unwrap();
        assert_eq!(act.z(&p(0.5)), 3.0);
        assert_eq!(act.z(&p(1.5)), 0.0);
        assert_eq!(act.z(&p(2.5)), 0.0);
        assert_eq!(act.exact_mass(), Some(3.0));
    }
}
