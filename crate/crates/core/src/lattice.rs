//! Periodic planar lattices, minimum-image couplings and displacement classes.
//!
//! Sites of an `lx × ly` cell are indexed row-major: site `x + lx * y` sits at
//! `x·a1 + y·a2`. Square cells use `a1 = (1,0)`, `a2 = (0,1)`; triangular cells
//! use the rhombic cell spanned by `a1 = (1,0)`, `a2 = (1/2, √3/2)`.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    Square,
    Triangular,
}

impl Geometry {
    pub fn name(self) -> &'static str {
        match self {
            Geometry::Square => "square",
            Geometry::Triangular => "triangular",
        }
    }

    pub fn primitive_vectors(self) -> ([f64; 2], [f64; 2]) {
        match self {
            Geometry::Square => ([1.0, 0.0], [0.0, 1.0]),
            Geometry::Triangular => ([1.0, 0.0], [0.5, 3f64.sqrt() / 2.0]),
        }
    }

    /// Point-group operations of the infinite lattice as integer matrices acting
    /// on primitive coordinates.
    fn point_group(self) -> Vec<[[i64; 2]; 2]> {
        let (rot, refl) = match self {
            Geometry::Square => ([[0, -1], [1, 0]], [[0, 1], [1, 0]]),
            // 60° rotation sends a1 -> a2 and a2 -> a2 - a1.
            Geometry::Triangular => ([[0, -1], [1, 1]], [[0, 1], [1, 0]]),
        };
        let mut ops = vec![[[1, 0], [0, 1]]];
        loop {
            let mut grew = false;
            for a in ops.clone() {
                for b in [rot, refl] {
                    let c = mat_mul(a, b);
                    if !ops.contains(&c) {
                        ops.push(c);
                        grew = true;
                    }
                }
            }
            if !grew {
                break;
            }
        }
        ops
    }

    pub fn code(self) -> u32 {
        match self {
            Geometry::Square => 0,
            Geometry::Triangular => 1,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(Geometry::Square),
            1 => Some(Geometry::Triangular),
            _ => None,
        }
    }
}

impl std::fmt::Display for Geometry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Geometry::Square => write!(f, "square"),
            Geometry::Triangular => write!(f, "triangular"),
        }
    }
}

impl std::str::FromStr for Geometry {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "square" => Ok(Geometry::Square),
            "triangular" => Ok(Geometry::Triangular),
            other => Err(Error::InvalidArgument(format!(
                "unknown geometry {other:?} (expected \"square\" or \"triangular\")"
            ))),
        }
    }
}

fn mat_mul(a: [[i64; 2]; 2], b: [[i64; 2]; 2]) -> [[i64; 2]; 2] {
    let mut c = [[0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

fn apply(m: [[i64; 2]; 2], v: (i64, i64)) -> (i64, i64) {
    (m[0][0] * v.0 + m[0][1] * v.1, m[1][0] * v.0 + m[1][1] * v.1)
}

/// Geometry, size and interaction exponent of a periodic lattice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub geometry: Geometry,
    pub lx: usize,
    pub ly: usize,
    pub alpha: f64,
}

impl LatticeSpec {
    /// `l × l` periodic cell.
    pub fn new(geometry: Geometry, l: usize, alpha: f64) -> Self {
        Self::rectangular(geometry, l, l, alpha)
    }

    pub fn rectangular(geometry: Geometry, lx: usize, ly: usize, alpha: f64) -> Self {
        LatticeSpec { geometry, lx, ly, alpha }
    }

    pub fn square(l: usize, alpha: f64) -> Self {
        Self::new(Geometry::Square, l, alpha)
    }

    pub fn triangular(l: usize, alpha: f64) -> Self {
        Self::new(Geometry::Triangular, l, alpha)
    }

    pub fn with_alpha(&self, alpha: f64) -> Self {
        LatticeSpec { alpha, ..self.clone() }
    }

    pub fn n_sites(&self) -> usize {
        self.lx * self.ly
    }

    pub fn validate(&self) -> Result<()> {
        if self.lx == 0 || self.ly == 0 || self.n_sites() < 2 {
            return Err(Error::InvalidArgument(format!(
                "lattice {}x{} has fewer than two sites",
                self.lx, self.ly
            )));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha must be finite and non-negative, got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    pub fn coords(&self, site: usize) -> (i64, i64) {
        ((site % self.lx) as i64, (site / self.lx) as i64)
    }

    pub fn site(&self, x: i64, y: i64) -> usize {
        let x = x.rem_euclid(self.lx as i64) as usize;
        let y = y.rem_euclid(self.ly as i64) as usize;
        x + self.lx * y
    }

    fn cartesian(&self, d: (i64, i64)) -> [f64; 2] {
        let (a1, a2) = self.geometry.primitive_vectors();
        let (x, y) = (d.0 as f64, d.1 as f64);
        [x * a1[0] + y * a2[0], x * a1[1] + y * a2[1]]
    }

    fn check_site(&self, i: usize) -> Result<()> {
        if i >= self.n_sites() {
            return Err(Error::Domain(format!(
                "site {i} out of range for {} sites",
                self.n_sites()
            )));
        }
        Ok(())
    }

    /// Shortest displacement from `i` to `j` among the 3×3 neighbouring periodic
    /// images, in primitive coordinates. Ties resolve to the first image in
    /// `(u, v)` scan order.
    pub fn min_image_displacement(&self, i: usize, j: usize) -> (i64, i64) {
        let (xi, yi) = self.coords(i);
        let (xj, yj) = self.coords(j);
        let (dx, dy) = (xj - xi, yj - yi);
        let (lx, ly) = (self.lx as i64, self.ly as i64);
        let mut best = (dx, dy);
        let mut best_r2 = f64::INFINITY;
        for u in -1..=1 {
            for v in -1..=1 {
                let cand = (dx + u * lx, dy + v * ly);
                let c = self.cartesian(cand);
                let r2 = c[0] * c[0] + c[1] * c[1];
                if r2 < best_r2 - 1e-9 {
                    best_r2 = r2;
                    best = cand;
                }
            }
        }
        best
    }

    /// Symmetry operations that map the period lattice onto itself.
    fn torus_symmetries(&self) -> Vec<[[i64; 2]; 2]> {
        let (lx, ly) = (self.lx as i64, self.ly as i64);
        self.geometry
            .point_group()
            .into_iter()
            .filter(|&g| {
                let a = apply(g, (lx, 0));
                let b = apply(g, (0, ly));
                a.0 % lx == 0 && a.1 % ly == 0 && b.0 % lx == 0 && b.1 % ly == 0
            })
            .collect()
    }
}

/// Euclidean length of the minimum-image displacement between two distinct sites.
pub fn min_image_distance(spec: &LatticeSpec, i: usize, j: usize) -> Result<f64> {
    spec.check_site(i)?;
    spec.check_site(j)?;
    if i == j {
        return Err(Error::Domain(format!("distance of site {i} to itself")));
    }
    let c = spec.cartesian(spec.min_image_displacement(i, j));
    Ok((c[0] * c[0] + c[1] * c[1]).sqrt())
}

/// One orbit of pair displacements under translations and lattice symmetries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisplacementClass {
    pub id: usize,
    /// Representative minimum-image displacement in primitive coordinates.
    pub displacement: (i64, i64),
    pub distance: f64,
    pub coupling: f64,
    /// Number of unordered pairs `i < j` in the class.
    pub n_pairs: usize,
}

/// Precomputed `1/r^α` couplings together with the displacement-class map.
#[derive(Clone, Debug)]
pub struct CouplingTable {
    spec: LatticeSpec,
    n: usize,
    distances: Vec<f64>,
    couplings: Vec<f64>,
    class_of: Vec<u32>,
    classes: Vec<DisplacementClass>,
    class_pairs: Vec<Vec<(usize, usize)>>,
}

const NO_CLASS: u32 = u32::MAX;

impl CouplingTable {
    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn n_sites(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.couplings[i * self.n + j]
    }

    #[inline]
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.distances[i * self.n + j]
    }

    /// Class id of the pair, `None` on the diagonal.
    #[inline]
    pub fn class_of(&self, i: usize, j: usize) -> Option<usize> {
        match self.class_of[i * self.n + j] {
            NO_CLASS => None,
            c => Some(c as usize),
        }
    }

    /// Raw class map, row-major `n × n`, with `u32::MAX` on the diagonal.
    pub fn class_map(&self) -> &[u32] {
        &self.class_of
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn classes(&self) -> &[DisplacementClass] {
        &self.classes
    }

    /// Unordered pairs `(i, j)`, `i < j`, belonging to class `d`.
    pub fn pairs_in_class(&self, d: usize) -> &[(usize, usize)] {
        &self.class_pairs[d]
    }

    /// `(1/N) Σ_{i≠j} J_ij` for the exponent the table was built with.
    pub fn kac(&self) -> f64 {
        self.couplings.iter().sum::<f64>() / self.n as f64
    }

    /// Writes `i,j,r_ij,J_ij,class_id` rows for all pairs `i < j`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["i", "j", "r_ij", "J_ij", "class_id"])?;
        for i in 0..self.n {
            for j in i + 1..self.n {
                wr.write_record([
                    i.to_string(),
                    j.to_string(),
                    format!("{:.12}", self.distance(i, j)),
                    format!("{:.12}", self.coupling(i, j)),
                    self.class_of[i * self.n + j].to_string(),
                ])?;
            }
        }
        wr.flush()?;
        Ok(())
    }
}

/// Builds the coupling table `J_ij = 1/r_ij^α` with minimum-image distances.
pub fn build_coupling_table(spec: &LatticeSpec) -> Result<CouplingTable> {
    spec.validate()?;
    let n = spec.n_sites();
    let syms = spec.torus_symmetries();
    let (lx, ly) = (spec.lx as i64, spec.ly as i64);
    let canonical = |d: (i64, i64)| {
        syms.iter()
            .map(|&g| {
                let v = apply(g, d);
                (v.0.rem_euclid(lx), v.1.rem_euclid(ly))
            })
            .min()
            .unwrap()
    };

    let mut distances = vec![0.0; n * n];
    let mut couplings = vec![0.0; n * n];
    let mut keys = vec![(0i64, 0i64); n * n];
    // key -> (distance, representative displacement)
    let mut orbits: BTreeMap<(i64, i64), (f64, (i64, i64))> = BTreeMap::new();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let d = spec.min_image_displacement(i, j);
            let r = min_image_distance(spec, i, j)?;
            distances[i * n + j] = r;
            couplings[i * n + j] = r.powf(-spec.alpha);
            let key = canonical(d);
            keys[i * n + j] = key;
            orbits.entry(key).or_insert((r, d));
        }
    }

    let mut ordered: Vec<_> = orbits.into_iter().collect();
    ordered.sort_by(|a, b| a.1 .0.total_cmp(&b.1 .0).then(a.0.cmp(&b.0)));
    let id_of: BTreeMap<(i64, i64), usize> =
        ordered.iter().enumerate().map(|(id, (k, _))| (*k, id)).collect();

    let mut class_of = vec![NO_CLASS; n * n];
    let mut class_pairs = vec![Vec::new(); ordered.len()];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let id = id_of[&keys[i * n + j]];
            class_of[i * n + j] = id as u32;
            if i < j {
                class_pairs[id].push((i, j));
            }
        }
    }
    let classes = ordered
        .iter()
        .enumerate()
        .map(|(id, (_, (r, d)))| DisplacementClass {
            id,
            displacement: *d,
            distance: *r,
            coupling: r.powf(-spec.alpha),
            n_pairs: class_pairs[id].len(),
        })
        .collect();

    Ok(CouplingTable {
        spec: spec.clone(),
        n,
        distances,
        couplings,
        class_of,
        classes,
        class_pairs,
    })
}

/// Mean total coupling per site, `K_N^(α) = (1/N) Σ_{i≠j} 1/r_ij^α`, evaluated
/// for `alpha` regardless of the exponent stored in `spec`.
pub fn kac_factor(spec: &LatticeSpec, alpha: f64) -> Result<f64> {
    let spec = spec.with_alpha(alpha);
    spec.validate()?;
    let n = spec.n_sites();
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += min_image_distance(&spec, i, j)?.powf(-alpha);
            }
        }
    }
    Ok(sum / n as f64)
}

/// How the `1/𝒩_α` prefactor of the Hamiltonian is chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// `𝒩_0 = N` for `α = 0`, `𝒩_α = 1` otherwise.
    #[default]
    Standard,
    Unit,
    Sites,
    /// `𝒩_α = K_N^(α)`.
    Kac,
}

/// Long-range XX Hamiltonian data:
/// `H = -(𝒥/𝒩) Σ_{i<j} J_ij (S^x_i S^x_j + S^y_i S^y_j)`.
#[derive(Clone, Debug)]
pub struct XxModel {
    pub table: Arc<CouplingTable>,
    /// Coupling constant `𝒥`.
    pub coupling: f64,
    /// Normalization `𝒩_α`.
    pub normalization: f64,
}

impl XxModel {
    pub fn new(spec: &LatticeSpec) -> Result<Self> {
        Self::with_normalization(spec, Normalization::Standard, 1.0)
    }

    pub fn with_normalization(
        spec: &LatticeSpec,
        norm: Normalization,
        coupling: f64,
    ) -> Result<Self> {
        let table = build_coupling_table(spec)?;
        let n = spec.n_sites() as f64;
        let normalization = match norm {
            Normalization::Standard if spec.alpha == 0.0 => n,
            Normalization::Standard | Normalization::Unit => 1.0,
            Normalization::Sites => n,
            Normalization::Kac => table.kac(),
        };
        Ok(XxModel { table: Arc::new(table), coupling, normalization })
    }

    pub fn spec(&self) -> &LatticeSpec {
        self.table.spec()
    }

    pub fn n_sites(&self) -> usize {
        self.table.n_sites()
    }

    /// Matrix element `<..↓_i..↑_j..|H|..↑_i..↓_j..>` of the flip-flop term.
    #[inline]
    pub fn exchange(&self, i: usize, j: usize) -> f64 {
        -self.coupling * self.table.coupling(i, j) / (2.0 * self.normalization)
    }

    /// Dense `n × n` table of exchange amplitudes (zero diagonal).
    pub fn exchange_table(&self) -> Vec<f64> {
        let n = self.n_sites();
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    out[i * n + j] = self.exchange(i, j);
                }
            }
        }
        out
    }

    /// Moment of inertia `N/𝒥` of the equivalent one-axis-twisting model; exact
    /// only for `α = 0` with `𝒩_0 = N`.
    pub fn oat_inertia(&self) -> f64 {
        self.normalization / self.coupling
    }

    /// Time in Kac-normalized units, `t 𝒥 K_N^(α) / 𝒩_α`.
    pub fn kac_time(&self, t: f64) -> f64 {
        t * self.coupling * self.table.kac() / self.normalization
    }
}
