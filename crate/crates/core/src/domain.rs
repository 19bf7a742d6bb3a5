//! Finite acquisition domains in the integer lattice `Z^d`.
//!
//! Points are stored deduplicated and sorted lexicographically; every taper
//! vector, sample and matrix in the crate indexes points in this order.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A point of `Z^d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LatticePoint(pub Vec<i64>);

impl LatticePoint {
    pub fn new(coords: Vec<i64>) -> Self {
        LatticePoint(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn sub(&self, other: &LatticePoint) -> LatticePoint {
        LatticePoint(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn neg(&self) -> LatticePoint {
        LatticePoint(self.0.iter().map(|a| -a).collect())
    }
}

impl fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// A finite, nonempty subset `Ω ⊂ Z^d`.
///
/// Cardinality is stored; the digital perimeter and the diameter are computed
/// on first use and cached.
#[derive(Debug, Clone)]
pub struct AcquisitionDomain {
    dim: usize,
    points: Vec<LatticePoint>,
    perimeter: OnceLock<u64>,
    diameter: OnceLock<f64>,
}

impl PartialEq for AcquisitionDomain {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.points == other.points
    }
}

impl AcquisitionDomain {
    /// Builds a domain from arbitrary points, deduplicating and sorting them.
    pub fn from_points(dim: usize, points: impl IntoIterator<Item = LatticePoint>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be at least 1".into()));
        }
        let mut set = BTreeSet::new();
        for p in points {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, actual: p.dim() });
            }
            set.insert(p);
        }
        if set.is_empty() {
            return Err(Error::InvalidInput("domain must contain at least one point".into()));
        }
        Ok(AcquisitionDomain {
            dim,
            points: set.into_iter().collect(),
            perimeter: OnceLock::new(),
            diameter: OnceLock::new(),
        })
    }

    /// The interval `{1, ..., n}` in dimension one.
    pub fn interval(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("interval length must be positive".into()));
        }
        Self::from_points(1, (1..=n as i64).map(|i| LatticePoint(vec![i])))
    }

    /// The box `{1..a_1} × ... × {1..a_d}`.
    pub fn rectangle(sides: &[usize]) -> Result<Self> {
        if sides.is_empty() {
            return Err(Error::InvalidInput("rectangle needs at least one side".into()));
        }
        if sides.iter().any(|&a| a == 0) {
            return Err(Error::InvalidInput(format!("rectangle sides must be positive: {sides:?}")));
        }
        let lo = vec![1i64; sides.len()];
        let hi: Vec<i64> = sides.iter().map(|&a| a as i64).collect();
        Self::from_points(sides.len(), BoxIter::new(&lo, &hi))
    }

    /// All lattice points of Euclidean norm at most `radius`.
    pub fn disk(radius: f64, dim: usize) -> Result<Self> {
        if !(radius.is_finite() && radius >= 0.0) {
            return Err(Error::InvalidInput(format!("disk radius must be finite and nonnegative, got {radius}")));
        }
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be at least 1".into()));
        }
        let r = radius.floor() as i64;
        let r2 = radius * radius;
        let lo = vec![-r; dim];
        let hi = vec![r; dim];
        Self::from_points(
            dim,
            BoxIter::new(&lo, &hi).filter(|p| p.0.iter().map(|&c| (c * c) as f64).sum::<f64>() <= r2 + 1e-9),
        )
    }

    /// Union of the sites visited by a seeded lattice random walk of `steps`
    /// steps started at the origin. The same `(dim, steps, seed)` always
    /// yields the same domain.
    pub fn random_blob(dim: usize, steps: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cur = vec![0i64; dim];
        let mut pts = vec![LatticePoint(cur.clone())];
        for _ in 0..steps {
            let axis = rng.random_range(0..dim);
            cur[axis] += if rng.random_bool(0.5) { 1 } else { -1 };
            pts.push(LatticePoint(cur.clone()));
        }
        Self::from_points(dim, pts)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `N_Ω`.
    pub fn cardinality(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[LatticePoint] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[i64] {
        &self.points[i].0
    }

    /// Position of `coords` in canonical order.
    pub fn index_of(&self, coords: &[i64]) -> Option<usize> {
        self.points.binary_search_by(|p| p.0.as_slice().cmp(coords)).ok()
    }

    pub fn contains(&self, coords: &[i64]) -> bool {
        self.index_of(coords).is_some()
    }

    /// Componentwise minimum and maximum.
    pub fn bounding_box(&self) -> (Vec<i64>, Vec<i64>) {
        let mut lo = self.points[0].0.clone();
        let mut hi = lo.clone();
        for p in &self.points {
            for j in 0..self.dim {
                lo[j] = lo[j].min(p.0[j]);
                hi[j] = hi[j].max(p.0[j]);
            }
        }
        (lo, hi)
    }

    /// Side lengths (number of lattice sites) of the bounding box.
    pub fn extent(&self) -> Vec<usize> {
        let (lo, hi) = self.bounding_box();
        lo.iter().zip(&hi).map(|(a, b)| (b - a + 1) as usize).collect()
    }

    /// `true` when the domain fills its bounding box.
    pub fn is_box(&self) -> bool {
        self.extent().iter().product::<usize>() == self.cardinality()
    }

    /// Digital perimeter `N_∂Ω`: the number of unit-direction indicator
    /// transitions. Each point contributes one transition per missing axis
    /// neighbour, which is the same count as the sum over all of `Z^d`.
    pub fn perimeter(&self) -> u64 {
        *self.perimeter.get_or_init(|| {
            let mut nb = vec![0i64; self.dim];
            let mut count = 0u64;
            for p in &self.points {
                for j in 0..self.dim {
                    for step in [-1i64, 1] {
                        nb.copy_from_slice(&p.0);
                        nb[j] += step;
                        if !self.contains(&nb) {
                            count += 1;
                        }
                    }
                }
            }
            count
        })
    }

    /// Euclidean diameter `max |k − j|_2`.
    ///
    /// Points whose 2d axis neighbours all lie in the domain are midpoints of
    /// other domain points, so the maximum is attained on the remaining
    /// boundary sites; the pairwise search runs over those only.
    pub fn diameter(&self) -> f64 {
        *self.diameter.get_or_init(|| {
            let boundary: Vec<&[i64]> = self
                .points
                .iter()
                .filter(|p| self.has_missing_neighbour(&p.0))
                .map(|p| p.0.as_slice())
                .collect();
            let mut best = 0i64;
            for (a, pa) in boundary.iter().enumerate() {
                for pb in &boundary[a + 1..] {
                    let d2: i64 = pa.iter().zip(pb.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
                    best = best.max(d2);
                }
            }
            (best as f64).sqrt()
        })
    }

    fn has_missing_neighbour(&self, p: &[i64]) -> bool {
        let mut nb = p.to_vec();
        for j in 0..self.dim {
            for step in [-1i64, 1] {
                nb[j] = p[j] + step;
                if !self.contains(&nb) {
                    return true;
                }
            }
            nb[j] = p[j];
        }
        false
    }

    /// `ω = ⌈diam(Ω)⌉`, the maximum component degree of the estimator.
    pub fn degree(&self) -> usize {
        (self.diameter() - 1e-9).ceil().max(0.0) as usize
    }

    /// The lag set `Ω − Ω`, sorted.
    pub fn difference_set(&self) -> Vec<LatticePoint> {
        if self.is_box() {
            let ext: Vec<i64> = self.extent().iter().map(|&e| e as i64 - 1).collect();
            let lo: Vec<i64> = ext.iter().map(|e| -e).collect();
            return BoxIter::new(&lo, &ext).collect();
        }
        let mut set = BTreeSet::new();
        for a in &self.points {
            for b in &self.points {
                set.insert(a.sub(b));
            }
        }
        set.into_iter().collect()
    }

    /// The same domain shifted by `offset`.
    pub fn translate(&self, offset: &[i64]) -> Result<Self> {
        if offset.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: offset.len() });
        }
        Self::from_points(
            self.dim,
            self.points.iter().map(|p| LatticePoint(p.0.iter().zip(offset).map(|(a, b)| a + b).collect())),
        )
    }

    /// Builds a domain from `interval(N)`, `rect(a,b,…)`, `disk(r[,d])` or
    /// `blob(d,steps,seed)`. Anything without parentheses is read as a path
    /// to a file in the [`AcquisitionDomain::parse`] format.
    pub fn from_spec(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        if !spec.contains('(') {
            let text = std::fs::read_to_string(spec)
                .map_err(|e| Error::InvalidInput(format!("cannot read domain file `{spec}`: {e}")))?;
            return Self::parse(&text);
        }
        let (name, args) = crate::density::split_call(spec)?;
        let ints = || -> Result<Vec<usize>> {
            args.iter()
                .map(|a| a.parse::<usize>().map_err(|_| Error::InvalidInput(format!("bad integer `{a}` in `{spec}`"))))
                .collect()
        };
        let arity = |lo: usize, hi: usize| -> Result<()> {
            if args.len() < lo || args.len() > hi {
                return Err(Error::InvalidInput(format!("`{name}` takes {lo}..={hi} arguments, got {}", args.len())));
            }
            Ok(())
        };
        match name {
            "interval" => {
                arity(1, 1)?;
                Self::interval(ints()?[0])
            }
            "rect" => {
                arity(1, usize::MAX)?;
                Self::rectangle(&ints()?)
            }
            "disk" => {
                arity(1, 2)?;
                let r: f64 = args[0].parse().map_err(|_| Error::InvalidInput(format!("bad radius `{}`", args[0])))?;
                let d = match args.get(1) {
                    Some(a) => a.parse().map_err(|_| Error::InvalidInput(format!("bad dimension `{a}`")))?,
                    None => 2,
                };
                Self::disk(r, d)
            }
            "blob" => {
                arity(3, 3)?;
                let v = ints()?;
                Self::random_blob(v[0], v[1], v[2] as u64)
            }
            other => Err(Error::InvalidInput(format!("unknown domain `{other}`"))),
        }
    }

    /// Reads the text format: a `dim d` header followed by one point per line.
    /// Duplicate points are dropped with a warning; lines with the wrong
    /// number of coordinates are an error. Blank lines and `#` comments are
    /// ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines
            .next()
            .ok_or(Error::Parse { line: 1, message: "empty domain file".into() })?;
        let dim = header
            .strip_prefix("dim")
            .and_then(|s| s.trim().parse::<usize>().ok())
            .filter(|&d| d > 0)
            .ok_or_else(|| Error::Parse { line: hline, message: format!("expected `dim d`, got `{header}`") })?;
        let mut seen = HashSet::new();
        let mut pts = Vec::new();
        for (ln, line) in lines {
            let coords = line
                .split_whitespace()
                .map(|t| t.parse::<i64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse { line: ln, message: e.to_string() })?;
            if coords.len() != dim {
                return Err(Error::Parse {
                    line: ln,
                    message: format!("expected {dim} coordinates, found {}", coords.len()),
                });
            }
            let p = LatticePoint(coords);
            if !seen.insert(p.clone()) {
                log::warn!("duplicate point {p} at line {ln} dropped");
                continue;
            }
            pts.push(p);
        }
        Self::from_points(dim, pts)
    }

    /// Writes the text format read by [`AcquisitionDomain::parse`].
    pub fn to_text(&self) -> String {
        let mut s = format!("dim {}\n", self.dim);
        for p in &self.points {
            let line: Vec<String> = p.0.iter().map(|c| c.to_string()).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }
}

/// Lexicographic iteration over the integer box `lo..=hi`.
pub(crate) struct BoxIter {
    lo: Vec<i64>,
    hi: Vec<i64>,
    cur: Option<Vec<i64>>,
}

impl BoxIter {
    pub(crate) fn new(lo: &[i64], hi: &[i64]) -> Self {
        let empty = lo.iter().zip(hi).any(|(a, b)| a > b);
        BoxIter { lo: lo.to_vec(), hi: hi.to_vec(), cur: if empty { None } else { Some(lo.to_vec()) } }
    }
}

impl Iterator for BoxIter {
    type Item = LatticePoint;

    fn next(&mut self) -> Option<LatticePoint> {
        let cur = self.cur.as_mut()?;
        let out = LatticePoint(cur.clone());
        let mut j = cur.len();
        loop {
            if j == 0 {
                self.cur = None;
                break;
            }
            j -= 1;
            if cur[j] < self.hi[j] {
                cur[j] += 1;
                break;
            }
            cur[j] = self.lo[j];
        }
        Some(out)
    }
}
