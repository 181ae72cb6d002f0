//! The square lattice `εZ²`, packed binary rasters over it, continuum sets
//! given by membership predicates, and Gauss digitization.

use std::fmt;
use std::io::{self, BufRead, Write};
use std::ops::{BitAnd, BitOr, Not};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::{self, popcount, tail_mask, words_for};
use crate::geometry::{Rect, Vec2};

#[derive(Debug, Error)]
pub enum LatticeError {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),
    #[error("malformed PBM data: {0}")]
    Pbm(String),
    #[error("grid dimensions {found:?} do not match lattice {expected:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Finite window `{origin + ε(i, j) : 0 ≤ i < nx, 0 ≤ j < ny}` of `εZ²`.
///
/// The JSON form `{epsilon, origin: [x, y], nx, ny}` doubles as the sidecar
/// written next to PBM grid dumps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LatticeMeta")]
pub struct Lattice {
    epsilon: f64,
    origin: Vec2,
    nx: usize,
    ny: usize,
}

#[derive(Deserialize)]
struct LatticeMeta {
    epsilon: f64,
    origin: Vec2,
    nx: usize,
    ny: usize,
}

impl TryFrom<LatticeMeta> for Lattice {
    type Error = LatticeError;
    fn try_from(m: LatticeMeta) -> Result<Self, Self::Error> {
        Lattice::new(m.epsilon, m.origin, m.nx, m.ny)
    }
}

impl Lattice {
    pub fn new(epsilon: f64, origin: Vec2, nx: usize, ny: usize) -> Result<Self, LatticeError> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(LatticeError::InvalidLattice(format!(
                "mesh must be positive and finite, got {epsilon}"
            )));
        }
        if nx == 0 || ny == 0 {
            return Err(LatticeError::InvalidLattice(format!(
                "grid extents must be positive, got {nx}x{ny}"
            )));
        }
        if !origin.is_finite() {
            return Err(LatticeError::InvalidLattice("origin must be finite".into()));
        }
        Ok(Lattice {
            epsilon,
            origin,
            nx,
            ny,
        })
    }

    /// Smallest window of `εZ²` whose points cover `rect`, padded by `margin`
    /// extra lattice rows/columns on every side. The origin is an integer
    /// multiple of `ε`, so points are genuine members of `εZ²`.
    pub fn covering(rect: &Rect, epsilon: f64, margin: usize) -> Result<Self, LatticeError> {
        if !rect.is_finite() {
            return Err(LatticeError::InvalidLattice(
                "cannot cover an unbounded rectangle".into(),
            ));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(LatticeError::InvalidLattice(format!(
                "mesh must be positive and finite, got {epsilon}"
            )));
        }
        let m = margin as i64;
        let i0 = (rect.x0 / epsilon).floor() as i64 - m;
        let i1 = (rect.x1 / epsilon).ceil() as i64 + m;
        let j0 = (rect.y0 / epsilon).floor() as i64 - m;
        let j1 = (rect.y1 / epsilon).ceil() as i64 + m;
        Lattice::new(
            epsilon,
            Vec2::new(i0 as f64 * epsilon, j0 as f64 * epsilon),
            (i1 - i0 + 1) as usize,
            (j1 - j0 + 1) as usize,
        )
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn origin(&self) -> Vec2 {
        self.origin
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Position of grid index `(i, j)`; indices may lie outside the window.
    pub fn point(&self, i: isize, j: isize) -> Vec2 {
        Vec2::new(
            self.origin.x + self.epsilon * i as f64,
            self.origin.y + self.epsilon * j as f64,
        )
    }

    /// Rectangle spanned by the window's extreme points.
    pub fn extent(&self) -> Rect {
        let a = self.point(0, 0);
        let b = self.point(self.nx as isize - 1, self.ny as isize - 1);
        Rect::new(a.x, b.x, a.y, b.y)
    }

    /// Lattice with the same origin and mesh `ε/k` covering the same extent.
    pub fn refine(&self, k: usize) -> Result<Lattice, LatticeError> {
        Lattice::new(
            self.epsilon / k as f64,
            self.origin,
            (self.nx - 1) * k + 1,
            (self.ny - 1) * k + 1,
        )
    }
}

/// Packed boolean raster over a [`Lattice`]: bit `(i, j)` says whether the
/// lattice point `origin + ε(i, j)` belongs to the digitized set.
///
/// Rows are stored contiguously, each padded to whole 64-bit words; bits past
/// `nx` in a row are always zero.
#[derive(Clone, PartialEq, Eq)]
pub struct BitGrid {
    lattice: Lattice,
    stride: usize,
    words: Vec<u64>,
}

impl fmt::Debug for BitGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "BitGrid {}x{} (ε = {})",
            self.nx(),
            self.ny(),
            self.epsilon()
        )?;
        for j in (0..self.ny()).rev() {
            let row: String = (0..self.nx())
                .map(|i| if self.get(i, j) { '#' } else { '.' })
                .collect();
            writeln!(f, "{row}")?;
        }
        Ok(())
    }
}

// Lattices compare by value; BitGrid equality relies on it.
impl Eq for Lattice {}

impl BitGrid {
    pub fn new(lattice: Lattice) -> Self {
        let stride = words_for(lattice.nx);
        BitGrid {
            lattice,
            stride,
            words: vec![0; stride * lattice.ny],
        }
    }

    /// Grid whose bit `(i, j)` is `f(i, j)`. Rows are filled in parallel.
    pub fn from_fn<F>(lattice: Lattice, f: F) -> Self
    where
        F: Fn(usize, usize) -> bool + Sync,
    {
        let mut grid = BitGrid::new(lattice);
        let nx = lattice.nx;
        let stride = grid.stride;
        grid.words
            .par_chunks_mut(stride)
            .enumerate()
            .for_each(|(j, row)| {
                for i in 0..nx {
                    if f(i, j) {
                        row[i / 64] |= 1 << (i % 64);
                    }
                }
            });
        grid
    }

    /// Builds a grid from rows of booleans listed bottom-up (`rows[j][i]`).
    pub fn from_rows(lattice: Lattice, rows: &[Vec<bool>]) -> Result<Self, LatticeError> {
        let found = (rows.first().map_or(0, Vec::len), rows.len());
        if found != (lattice.nx, lattice.ny) || rows.iter().any(|r| r.len() != lattice.nx) {
            return Err(LatticeError::DimensionMismatch {
                expected: (lattice.nx, lattice.ny),
                found,
            });
        }
        Ok(BitGrid::from_fn(lattice, |i, j| rows[j][i]))
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn nx(&self) -> usize {
        self.lattice.nx
    }

    pub fn ny(&self) -> usize {
        self.lattice.ny
    }

    pub fn epsilon(&self) -> f64 {
        self.lattice.epsilon
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        debug_assert!(i < self.nx() && j < self.ny());
        (self.words[j * self.stride + i / 64] >> (i % 64)) & 1 == 1
    }

    /// Like [`get`](Self::get) but indices outside the grid read as `outside`.
    pub fn get_or(&self, i: isize, j: isize, outside: bool) -> bool {
        if i < 0 || j < 0 || i as usize >= self.nx() || j as usize >= self.ny() {
            outside
        } else {
            self.get(i as usize, j as usize)
        }
    }

    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        assert!(
            i < self.nx() && j < self.ny(),
            "index ({i}, {j}) out of grid"
        );
        let w = &mut self.words[j * self.stride + i / 64];
        if value {
            *w |= 1 << (i % 64);
        } else {
            *w &= !(1 << (i % 64));
        }
    }

    /// Packed words of row `j`.
    pub fn row(&self, j: usize) -> &[u64] {
        &self.words[j * self.stride..(j + 1) * self.stride]
    }

    /// Bits `[start, start + len)` of row `j`; anything outside the grid
    /// (including rows `j < 0` or `j ≥ ny`) reads as zero.
    pub fn row_window(&self, j: isize, start: isize, len: usize) -> Vec<u64> {
        let mut out = Vec::new();
        self.row_window_into(j, start, len, &mut out);
        out
    }

    pub(crate) fn row_window_into(&self, j: isize, start: isize, len: usize, out: &mut Vec<u64>) {
        if j < 0 || j as usize >= self.ny() {
            out.clear();
            out.resize(words_for(len), 0);
        } else {
            bits::extract_into(self.row(j as usize), start, len, out);
        }
    }

    pub fn count_ones(&self) -> u64 {
        popcount(&self.words)
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Bitwise complement within the grid.
    pub fn complement(&self) -> BitGrid {
        let mask = tail_mask(self.nx());
        let mut out = self.clone();
        for row in out.words.chunks_mut(self.stride) {
            for w in row.iter_mut() {
                *w = !*w;
            }
            if let Some(last) = row.last_mut() {
                *last &= mask;
            }
        }
        out
    }

    /// True when some set bit lies on the outermost ring of the grid.
    pub fn touches_border(&self) -> bool {
        let (nx, ny) = (self.nx(), self.ny());
        if !bits::extract(self.row(0), 0, nx).iter().all(|&w| w == 0)
            || !bits::extract(self.row(ny - 1), 0, nx)
                .iter()
                .all(|&w| w == 0)
        {
            return true;
        }
        (0..ny).any(|j| self.get(0, j) || self.get(nx - 1, j))
    }

    /// Indices of set bits in raster order (row by row, increasing `i`).
    pub fn iter_ones(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.ny()).flat_map(move |j| {
            self.row(j).iter().enumerate().flat_map(move |(w, &word)| {
                let mut bitsleft = word;
                std::iter::from_fn(move || {
                    if bitsleft == 0 {
                        return None;
                    }
                    let b = bitsleft.trailing_zeros() as usize;
                    bitsleft &= bitsleft - 1;
                    Some((w * 64 + b, j))
                })
            })
        })
    }

    fn zip_with(&self, other: &BitGrid, op: impl Fn(u64, u64) -> u64) -> BitGrid {
        assert_eq!(
            (self.nx(), self.ny()),
            (other.nx(), other.ny()),
            "grid shapes differ"
        );
        BitGrid {
            lattice: self.lattice,
            stride: self.stride,
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(&a, &b)| op(a, b))
                .collect(),
        }
    }

    /// Bits set here and clear in `other`.
    pub fn and_not(&self, other: &BitGrid) -> BitGrid {
        self.zip_with(other, |a, b| a & !b)
    }

    /// Binary PBM (`P4`): width `nx`, height `ny`, rows MSB-first, row 0 of
    /// the file is grid row `j = 0`.
    pub fn write_pbm<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "P4\n{} {}\n", self.nx(), self.ny())?;
        let row_bytes = self.nx().div_ceil(8);
        let mut buf = vec![0u8; row_bytes];
        for j in 0..self.ny() {
            buf.fill(0);
            for i in 0..self.nx() {
                if self.get(i, j) {
                    buf[i / 8] |= 0x80 >> (i % 8);
                }
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    /// Reads a `P4` PBM written by [`write_pbm`](Self::write_pbm); the image
    /// dimensions must match `lattice`.
    pub fn read_pbm<R: BufRead>(mut r: R, lattice: Lattice) -> Result<BitGrid, LatticeError> {
        let mut header = Vec::new();
        // magic, width, height: three whitespace-separated tokens, comments allowed
        let mut tokens: Vec<String> = Vec::new();
        while tokens.len() < 3 {
            header.clear();
            if r.read_until(b'\n', &mut header)? == 0 {
                return Err(LatticeError::Pbm("truncated header".into()));
            }
            let line = String::from_utf8_lossy(&header);
            let line = line.split('#').next().unwrap_or("");
            tokens.extend(line.split_whitespace().map(str::to_owned));
        }
        if tokens[0] != "P4" {
            return Err(LatticeError::Pbm(format!("bad magic {:?}", tokens[0])));
        }
        if tokens.len() > 3 {
            return Err(LatticeError::Pbm("unexpected data after header".into()));
        }
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| LatticeError::Pbm(format!("bad dimension {s:?}")))
        };
        let (w, h) = (parse(&tokens[1])?, parse(&tokens[2])?);
        if (w, h) != (lattice.nx, lattice.ny) {
            return Err(LatticeError::DimensionMismatch {
                expected: (lattice.nx, lattice.ny),
                found: (w, h),
            });
        }
        let row_bytes = w.div_ceil(8);
        let mut data = vec![0u8; row_bytes * h];
        r.read_exact(&mut data)
            .map_err(|e| LatticeError::Pbm(format!("raster truncated: {e}")))?;
        Ok(BitGrid::from_fn(lattice, |i, j| {
            data[j * row_bytes + i / 8] & (0x80 >> (i % 8)) != 0
        }))
    }
}

impl BitAnd for &BitGrid {
    type Output = BitGrid;
    fn bitand(self, rhs: &BitGrid) -> BitGrid {
        self.zip_with(rhs, |a, b| a & b)
    }
}

impl BitOr for &BitGrid {
    type Output = BitGrid;
    fn bitor(self, rhs: &BitGrid) -> BitGrid {
        self.zip_with(rhs, |a, b| a | b)
    }
}

impl Not for &BitGrid {
    type Output = BitGrid;
    fn not(self) -> BitGrid {
        self.complement()
    }
}

pub type Predicate = Arc<dyn Fn(Vec2) -> bool + Send + Sync>;
pub type NormalField = Arc<dyn Fn(Vec2) -> Vec2 + Send + Sync>;
pub type DistanceField = Arc<dyn Fn(Vec2) -> f64 + Send + Sync>;

/// Boundary geometry attached by analytic shape constructors: the outward
/// unit normal (meaningful on or near `∂F`) and a signed distance that is
/// negative inside and exact or first-order accurate near the boundary.
#[derive(Clone)]
pub struct BoundaryGeometry {
    pub normal: NormalField,
    pub signed_distance: DistanceField,
}

/// A continuum set `F ⊂ R²` given by its membership predicate.
///
/// `bounding_box` must contain every point where the predicate is true.
/// `regularity_radius` is the rolling-ball radius ρ when known; it is
/// carried as metadata and never checked.
#[derive(Clone)]
pub struct IndicatorSet {
    contains: Predicate,
    bounding_box: Rect,
    regularity_radius: Option<f64>,
    geometry: Option<BoundaryGeometry>,
}

impl fmt::Debug for IndicatorSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IndicatorSet")
            .field("bounding_box", &self.bounding_box)
            .field("regularity_radius", &self.regularity_radius)
            .field("has_geometry", &self.geometry.is_some())
            .finish()
    }
}

impl IndicatorSet {
    pub fn new<F>(contains: F, bounding_box: Rect) -> Self
    where
        F: Fn(Vec2) -> bool + Send + Sync + 'static,
    {
        IndicatorSet {
            contains: Arc::new(contains),
            bounding_box,
            regularity_radius: None,
            geometry: None,
        }
    }

    pub fn empty() -> Self {
        IndicatorSet::new(|_| false, Rect::new(0.0, 0.0, 0.0, 0.0))
    }

    pub fn with_regularity_radius(mut self, rho: f64) -> Self {
        self.regularity_radius = Some(rho);
        self
    }

    pub fn with_geometry(mut self, geometry: BoundaryGeometry) -> Self {
        self.geometry = Some(geometry);
        self
    }

    #[inline]
    pub fn contains(&self, p: Vec2) -> bool {
        (self.contains)(p)
    }

    pub fn predicate(&self) -> &Predicate {
        &self.contains
    }

    pub fn bounding_box(&self) -> Rect {
        self.bounding_box
    }

    pub fn regularity_radius(&self) -> Option<f64> {
        self.regularity_radius
    }

    pub fn geometry(&self) -> Option<&BoundaryGeometry> {
        self.geometry.as_ref()
    }

    pub fn union(&self, other: &IndicatorSet) -> IndicatorSet {
        let (a, b) = (self.contains.clone(), other.contains.clone());
        IndicatorSet::new(
            move |p| a(p) || b(p),
            self.bounding_box.hull(&other.bounding_box),
        )
    }

    pub fn intersection(&self, other: &IndicatorSet) -> IndicatorSet {
        let (a, b) = (self.contains.clone(), other.contains.clone());
        let bbox = self
            .bounding_box
            .intersect(&other.bounding_box)
            .unwrap_or(Rect::new(0.0, 0.0, 0.0, 0.0));
        IndicatorSet::new(move |p| a(p) && b(p), bbox)
    }

    /// Complement; its bounding box is the whole plane.
    pub fn complement(&self) -> IndicatorSet {
        let a = self.contains.clone();
        IndicatorSet::new(move |p| !a(p), Rect::EVERYTHING)
    }

    pub fn translate(&self, v: Vec2) -> IndicatorSet {
        let a = self.contains.clone();
        IndicatorSet {
            contains: Arc::new(move |p| a(p - v)),
            bounding_box: self.bounding_box.translate(v),
            regularity_radius: self.regularity_radius,
            geometry: self.geometry.as_ref().map(|g| {
                let (n, d) = (g.normal.clone(), g.signed_distance.clone());
                BoundaryGeometry {
                    normal: Arc::new(move |p| n(p - v)),
                    signed_distance: Arc::new(move |p| d(p - v)),
                }
            }),
        }
    }
}

/// Gauss digitization: bit `(i, j)` is set iff `origin + ε(i, j) + offset`
/// belongs to `set`.
///
/// Points of the set outside the lattice window are silently dropped; callers
/// size the lattice (see [`Lattice::covering`]) to contain the shifted
/// bounding box.
pub fn digitize(set: &IndicatorSet, lattice: &Lattice, offset: Vec2) -> BitGrid {
    let pred = set.predicate();
    BitGrid::from_fn(*lattice, |i, j| {
        pred(lattice.point(i as isize, j as isize) + offset)
    })
}

/// Riemann-sum area `ε² · #bits` of the Gauss reconstruction.
pub fn grid_volume(grid: &BitGrid) -> f64 {
    grid.epsilon() * grid.epsilon() * grid.count_ones() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn disc(r: f64) -> IndicatorSet {
        IndicatorSet::new(move |p| p.norm_sq() <= r * r, Rect::centered(Vec2::ZERO, r))
    }

    fn centered_lattice(eps: f64, half: usize) -> Lattice {
        let o = -(half as f64) * eps;
        Lattice::new(eps, Vec2::new(o, o), 2 * half + 1, 2 * half + 1).unwrap()
    }

    #[test]
    fn disc_digitization_matches_enumeration() {
        let lat = centered_lattice(0.5, 4);
        let g = digitize(&disc(1.0), &lat, Vec2::ZERO);
        // oracle: enumerate the 81 points of 0.5Z² in the window
        let mut expected = 0;
        for i in -4i32..=4 {
            for j in -4i32..=4 {
                let (x, y) = (0.5 * i as f64, 0.5 * j as f64);
                if x * x + y * y <= 1.0 {
                    expected += 1;
                }
            }
        }
        assert_eq!(expected, 13);
        assert_eq!(g.count_ones(), expected);
    }

    #[test]
    fn empty_and_half_plane() {
        let lat = centered_lattice(0.3, 5);
        assert!(digitize(&IndicatorSet::empty(), &lat, Vec2::ZERO).is_empty());
        let half = IndicatorSet::new(|p| p.x <= 0.0, Rect::EVERYTHING);
        let g = digitize(&half, &lat, Vec2::ZERO);
        for j in 0..lat.ny() {
            for i in 0..lat.nx() {
                assert_eq!(g.get(i, j), i <= 5);
            }
        }
    }

    #[test]
    fn grid_volume_values() {
        let lat = Lattice::new(0.25, Vec2::ZERO, 3, 3).unwrap();
        let mut g = BitGrid::new(lat);
        assert_eq!(grid_volume(&g), 0.0);
        g.set(1, 1, true);
        assert_eq!(grid_volume(&g), 0.0625);
    }

    #[test]
    fn fine_disc_volume_converges_to_pi() {
        let eps = 1e-3;
        let lat = Lattice::covering(&Rect::centered(Vec2::ZERO, 1.0), eps, 1).unwrap();
        let v = grid_volume(&digitize(&disc(1.0), &lat, Vec2::ZERO));
        assert!((v - std::f64::consts::PI).abs() < 0.01 * std::f64::consts::PI);
    }

    #[test]
    fn pbm_round_trip_and_sidecar() {
        let lat = Lattice::new(0.1, Vec2::new(-1.0, 2.0), 13, 5).unwrap();
        let g = BitGrid::from_fn(lat, |i, j| (i * 3 + j) % 4 == 0);
        let mut buf = Vec::new();
        g.write_pbm(&mut buf).unwrap();
        assert!(buf.starts_with(b"P4\n13 5\n"));
        // 13 columns → 2 bytes per row
        assert_eq!(buf.len(), 8 + 2 * 5);
        let back = BitGrid::read_pbm(&buf[..], lat).unwrap();
        assert_eq!(back, g);

        let json = serde_json::to_value(lat).unwrap();
        assert_eq!(json["origin"], serde_json::json!([-1.0, 2.0]));
        let lat2: Lattice = serde_json::from_value(json).unwrap();
        assert_eq!(lat2, lat);
        assert!(
            serde_json::from_str::<Lattice>(r#"{"epsilon":-1,"origin":[0,0],"nx":1,"ny":1}"#)
                .is_err()
        );
    }

    #[test]
    fn pbm_bit_order_is_msb_first() {
        let lat = Lattice::new(1.0, Vec2::ZERO, 9, 2).unwrap();
        let mut g = BitGrid::new(lat);
        g.set(0, 0, true);
        g.set(8, 1, true);
        let mut buf = Vec::new();
        g.write_pbm(&mut buf).unwrap();
        let raster = &buf[buf.len() - 4..];
        assert_eq!(raster, &[0x80, 0x00, 0x00, 0x80]);
    }

    #[test]
    fn touches_border_detection() {
        let lat = Lattice::new(1.0, Vec2::ZERO, 70, 4).unwrap();
        let mut g = BitGrid::new(lat);
        g.set(35, 2, true);
        assert!(!g.touches_border());
        g.set(69, 2, true);
        assert!(g.touches_border());
    }

    fn grid_strategy() -> impl Strategy<Value = (usize, usize, Vec<bool>)> {
        (1usize..80, 1usize..6).prop_flat_map(|(nx, ny)| {
            (
                Just(nx),
                Just(ny),
                proptest::collection::vec(any::<bool>(), nx * ny),
            )
        })
    }

    proptest! {
        #[test]
        fn complement_is_involutive((nx, ny, bits) in grid_strategy()) {
            let lat = Lattice::new(1.0, Vec2::ZERO, nx, ny).unwrap();
            let g = BitGrid::from_fn(lat, |i, j| bits[j * nx + i]);
            prop_assert_eq!(g.complement().complement(), g.clone());
            prop_assert_eq!(g.count_ones() + g.complement().count_ones(), (nx * ny) as u64);
        }

        #[test]
        fn digitization_commutes_with_set_algebra(
            cx in -1.0f64..1.0, cy in -1.0f64..1.0, r in 0.2f64..1.5,
            a in -1.0f64..1.0, b in -1.0f64..1.0, c in -0.5f64..0.5,
        ) {
            let d = IndicatorSet::new(move |p| (p.x - cx).powi(2) + (p.y - cy).powi(2) <= r * r,
                Rect::centered(Vec2::new(cx, cy), r));
            let h = IndicatorSet::new(move |p| a * p.x + b * p.y <= c, Rect::EVERYTHING);
            let lat = centered_lattice(0.07, 30);
            let (gd, gh) = (digitize(&d, &lat, Vec2::ZERO), digitize(&h, &lat, Vec2::ZERO));
            prop_assert_eq!(digitize(&d.union(&h), &lat, Vec2::ZERO), &gd | &gh);
            prop_assert_eq!(digitize(&d.intersection(&h), &lat, Vec2::ZERO), &gd & &gh);
            prop_assert_eq!(digitize(&d.complement(), &lat, Vec2::ZERO), !&gd);
        }
    }
}
