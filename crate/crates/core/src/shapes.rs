//! Regular test sets, polyrectangle windows with exact features, Euclidean
//! morphology on grids, and a numerical screen for window transversality.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arrangement::{Arrangement, CellStats};
use crate::geometry::{segment_distance, Rect, Vec2};
use crate::lattice::{BitGrid, BoundaryGeometry, IndicatorSet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ShapeError {
    #[error("invalid shape specification: {0}")]
    InvalidSpec(String),
    #[error("rectangle {index} is not a finite rectangle with positive sides")]
    InvalidRect { index: usize },
    #[error("rectangles {first} and {second} share the corner ({}, {})", .corner.x, .corner.y)]
    CornerClash {
        first: usize,
        second: usize,
        corner: Vec2,
    },
    #[error("radius {radius} is below the grid mesh {epsilon}")]
    RadiusTooSmall { radius: f64, epsilon: f64 },
    #[error("set carries no boundary normal; transversality cannot be checked")]
    NoNormalAvailable,
}

/// Classification of a polyrectangle corner by its local quadrant pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CornerClass {
    /// Only the south-west quadrant is inside.
    NorthEastOutward,
    /// Only the north-east quadrant is outside.
    SouthWestInward,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Corner {
    pub point: Vec2,
    pub class: CornerClass,
}

/// A maximal boundary segment with its outward unit normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: Vec2,
    pub b: Vec2,
    pub normal: Vec2,
}

impl Edge {
    pub fn length(&self) -> f64 {
        (self.b - self.a).norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolyRectFeatures {
    pub chi: i64,
    pub per1: f64,
    pub per2: f64,
    pub vol: f64,
    pub out_corners: u64,
    pub in_corners: u64,
}

/// Finite union of closed axis-aligned rectangles, no two of which share a
/// corner. Rectangles may overlap or abut along edges.
///
/// JSON form: `{"rects": [[x0, x1, y0, y1], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RectList", into = "RectList")]
pub struct PolyRectangle {
    rects: Vec<Rect>,
    stats: CellStats,
    corners: Vec<Corner>,
    edges: Vec<Edge>,
    pieces: Vec<Rect>,
}

#[derive(Serialize, Deserialize)]
struct RectList {
    rects: Vec<Rect>,
}

impl TryFrom<RectList> for PolyRectangle {
    type Error = ShapeError;
    fn try_from(l: RectList) -> Result<Self, ShapeError> {
        PolyRectangle::new(l.rects)
    }
}

impl From<PolyRectangle> for RectList {
    fn from(p: PolyRectangle) -> Self {
        RectList { rects: p.rects }
    }
}

// coordinates closer than this are treated as the same corner
const CORNER_TOL: f64 = 1e-12;

impl PolyRectangle {
    pub fn new(rects: Vec<Rect>) -> Result<Self, ShapeError> {
        for (index, r) in rects.iter().enumerate() {
            if !r.is_finite() || !r.is_proper() {
                return Err(ShapeError::InvalidRect { index });
            }
        }
        for (i, ri) in rects.iter().enumerate() {
            for (j, rj) in rects.iter().enumerate().skip(i + 1) {
                for c in ri.corners() {
                    if rj
                        .corners()
                        .iter()
                        .any(|d| (c.x - d.x).abs() <= CORNER_TOL && (c.y - d.y).abs() <= CORNER_TOL)
                    {
                        return Err(ShapeError::CornerClash {
                            first: i,
                            second: j,
                            corner: c,
                        });
                    }
                }
            }
        }
        Ok(Self::build(rects))
    }

    /// Single rectangle.
    pub fn rect(r: Rect) -> Result<Self, ShapeError> {
        PolyRectangle::new(vec![r])
    }

    pub fn empty() -> Self {
        Self::build(Vec::new())
    }

    fn build(rects: Vec<Rect>) -> Self {
        if rects.is_empty() {
            return PolyRectangle {
                rects,
                stats: CellStats::default(),
                corners: Vec::new(),
                edges: Vec::new(),
                pieces: Vec::new(),
            };
        }
        let frame = rects.iter().fold(rects[0], |h, r| h.hull(r)).dilate(1.0);
        let weighted: Vec<(Rect, f64)> = rects.iter().map(|&r| (r, 1.0)).collect();
        let arr = Arrangement::build(&weighted, frame, &[], &[]);
        let cells = arr.select(|v, _| v > 0.5);
        let stats = cells.stats();
        let (cx, cy) = (arr.cx() as isize, arr.cy() as isize);

        let mut corners = Vec::new();
        for b in 0..=cy {
            for a in 0..=cx {
                let q = [
                    cells.get(a - 1, b - 1),
                    cells.get(a, b - 1),
                    cells.get(a - 1, b),
                    cells.get(a, b),
                ];
                let n = q.iter().filter(|&&o| o).count();
                let class = match (n, q) {
                    (1, [true, ..]) => CornerClass::NorthEastOutward,
                    (3, [.., false]) => CornerClass::SouthWestInward,
                    (1, _) | (3, _) => CornerClass::Other,
                    (2, [sw, _, _, ne]) if sw == ne => CornerClass::Other,
                    _ => continue,
                };
                corners.push(Corner {
                    point: Vec2::new(arr.xs[a as usize], arr.ys[b as usize]),
                    class,
                });
            }
        }

        // merge unit boundary edges along each grid line into maximal runs
        let mut edges = Vec::new();
        for b in 0..=cy {
            let y = arr.ys[b as usize];
            let mut run: Option<(f64, f64)> = None;
            for a in 0..=cx {
                let side = if a < cx {
                    match (cells.get(a, b - 1), cells.get(a, b)) {
                        (true, false) => 1.0,
                        (false, true) => -1.0,
                        _ => 0.0,
                    }
                } else {
                    0.0
                };
                let x = arr.xs[a as usize];
                match run {
                    Some((x0, s)) if s != side => {
                        edges.push(Edge {
                            a: Vec2::new(x0, y),
                            b: Vec2::new(x, y),
                            normal: Vec2::new(0.0, s),
                        });
                        run = (side != 0.0).then_some((x, side));
                    }
                    None if side != 0.0 => run = Some((x, side)),
                    _ => {}
                }
            }
        }
        for a in 0..=cx {
            let x = arr.xs[a as usize];
            let mut run: Option<(f64, f64)> = None;
            for b in 0..=cy {
                let side = if b < cy {
                    match (cells.get(a - 1, b), cells.get(a, b)) {
                        (true, false) => 1.0,
                        (false, true) => -1.0,
                        _ => 0.0,
                    }
                } else {
                    0.0
                };
                let y = arr.ys[b as usize];
                match run {
                    Some((y0, s)) if s != side => {
                        edges.push(Edge {
                            a: Vec2::new(x, y0),
                            b: Vec2::new(x, y),
                            normal: Vec2::new(s, 0.0),
                        });
                        run = (side != 0.0).then_some((y, side));
                    }
                    None if side != 0.0 => run = Some((y, side)),
                    _ => {}
                }
            }
        }

        // disjoint pieces: maximal horizontal runs of occupied cells per row
        let mut pieces = Vec::new();
        for b in 0..cy {
            let mut a = 0;
            while a < cx {
                if !cells.get(a, b) {
                    a += 1;
                    continue;
                }
                let start = a;
                while a < cx && cells.get(a, b) {
                    a += 1;
                }
                pieces.push(Rect::new(
                    arr.xs[start as usize],
                    arr.xs[a as usize],
                    arr.ys[b as usize],
                    arr.ys[b as usize + 1],
                ));
            }
        }

        PolyRectangle {
            rects,
            stats,
            corners,
            edges,
            pieces,
        }
    }

    pub fn rects(&self) -> &[Rect] {
        &self.rects
    }

    pub fn is_empty(&self) -> bool {
        self.rects.is_empty()
    }

    /// Boundary corners (vertices where the boundary turns).
    pub fn corners(&self) -> &[Corner] {
        &self.corners
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Pairwise interior-disjoint rectangles with the same union.
    pub fn pieces(&self) -> &[Rect] {
        &self.pieces
    }

    pub fn features(&self) -> PolyRectFeatures {
        let s = &self.stats;
        PolyRectFeatures {
            chi: s.chi,
            per1: s.per1,
            per2: s.per2,
            vol: s.vol,
            out_corners: s.out_corners,
            in_corners: s.in_corners,
        }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        self.rects.iter().any(|r| r.contains(p))
    }

    pub fn bbox(&self) -> Rect {
        match self.rects.first() {
            None => Rect::new(0.0, 0.0, 0.0, 0.0),
            Some(&r0) => self.rects.iter().fold(r0, |h, r| h.hull(r)),
        }
    }

    pub fn translate(&self, v: Vec2) -> PolyRectangle {
        Self::build(self.rects.iter().map(|r| r.translate(v)).collect())
    }

    pub fn to_indicator(&self) -> IndicatorSet {
        let rects = self.rects.clone();
        IndicatorSet::new(move |p| rects.iter().any(|r| r.contains(p)), self.bbox())
    }
}

/// Exact χ, directional perimeters, area and corner counts of a polyrectangle.
/// `χ` comes from the cell complex; it equals the NE-outward minus SW-inward
/// corner count.
pub fn polyrect_features(w: &PolyRectangle) -> PolyRectFeatures {
    w.features()
}

/// Analytic regular shapes. JSON: `{"type": "disc", "center": [0, 0], "r": 1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ShapeSpec {
    Disc { center: Vec2, r: f64 },
    Annulus { center: Vec2, r_in: f64, r_out: f64 },
    Union { shapes: Vec<ShapeSpec> },
}

/// Flattened circular primitive: the closed annulus `r_in ≤ |p − c| ≤ r_out`
/// (a disc when `r_in = 0`).
#[derive(Debug, Clone, Copy)]
struct Ring {
    c: Vec2,
    r_in: f64,
    r_out: f64,
}

impl Ring {
    fn signed_distance(&self, p: Vec2) -> f64 {
        let d = (p - self.c).norm();
        if self.r_in > 0.0 {
            (self.r_in - d).max(d - self.r_out)
        } else {
            d - self.r_out
        }
    }

    fn normal(&self, p: Vec2) -> Vec2 {
        let v = p - self.c;
        let d = v.norm();
        if d == 0.0 {
            return Vec2::U1;
        }
        let radial = v * (1.0 / d);
        if self.r_in > 0.0 && (d - self.r_in).abs() < (d - self.r_out).abs() {
            -radial
        } else {
            radial
        }
    }

    fn rho(&self) -> f64 {
        if self.r_in > 0.0 {
            self.r_in.min(self.r_out - self.r_in)
        } else {
            self.r_out
        }
    }

    /// Euclidean distance between the two closed sets (0 when they meet).
    fn gap(&self, o: &Ring) -> f64 {
        let d = (self.c - o.c).norm();
        (d - self.r_out - o.r_out)
            .max(self.r_in - d - o.r_out)
            .max(o.r_in - d - self.r_out)
            .max(0.0)
    }
}

fn flatten(spec: &ShapeSpec, out: &mut Vec<Ring>) -> Result<(), ShapeError> {
    let finite = |v: f64| v.is_finite();
    match *spec {
        ShapeSpec::Disc { center, r } => {
            if !(r > 0.0 && finite(r) && center.is_finite()) {
                return Err(ShapeError::InvalidSpec(format!(
                    "disc radius must be positive, got {r}"
                )));
            }
            out.push(Ring {
                c: center,
                r_in: 0.0,
                r_out: r,
            });
        }
        ShapeSpec::Annulus {
            center,
            r_in,
            r_out,
        } => {
            if !(r_in > 0.0 && r_in < r_out && finite(r_out) && center.is_finite()) {
                return Err(ShapeError::InvalidSpec(format!(
                    "annulus needs 0 < r_in < r_out, got r_in = {r_in}, r_out = {r_out}"
                )));
            }
            out.push(Ring {
                c: center,
                r_in,
                r_out,
            });
        }
        ShapeSpec::Union { ref shapes } => {
            if shapes.is_empty() {
                return Err(ShapeError::InvalidSpec("union of no shapes".into()));
            }
            for s in shapes {
                flatten(s, out)?;
            }
        }
    }
    Ok(())
}

/// Builds the indicator of an analytic shape with its boundary geometry and
/// regularity radius: `r` for a disc, `min(r_in, r_out − r_in)` for an
/// annulus, and for a union the smallest member radius capped by half the
/// smallest gap between members.
pub fn make_shape(spec: &ShapeSpec) -> Result<IndicatorSet, ShapeError> {
    let mut rings = Vec::new();
    flatten(spec, &mut rings)?;
    let mut rho = rings.iter().map(Ring::rho).fold(f64::INFINITY, f64::min);
    for (i, a) in rings.iter().enumerate() {
        for b in &rings[i + 1..] {
            let g = a.gap(b);
            if g <= 0.0 {
                return Err(ShapeError::InvalidSpec(
                    "union members must be at positive distance from each other".into(),
                ));
            }
            rho = rho.min(g / 2.0);
        }
    }
    let bbox = rings
        .iter()
        .map(|r| Rect::centered(r.c, r.r_out))
        .reduce(|a, b| a.hull(&b))
        .expect("at least one primitive");
    let rings: Arc<[Ring]> = rings.into();
    let (r1, r2, r3) = (rings.clone(), rings.clone(), rings);
    let nearest = move |rs: &[Ring], p: Vec2| -> Ring {
        *rs.iter()
            .min_by(|a, b| a.signed_distance(p).total_cmp(&b.signed_distance(p)))
            .expect("at least one primitive")
    };
    Ok(IndicatorSet::new(
        move |p| {
            r1.iter().any(|r| {
                let d2 = (p - r.c).norm_sq();
                d2 <= r.r_out * r.r_out && d2 >= r.r_in * r.r_in
            })
        },
        bbox,
    )
    .with_regularity_radius(rho)
    .with_geometry(BoundaryGeometry {
        normal: Arc::new(move |p| nearest(&r2, p).normal(p)),
        signed_distance: Arc::new(move |p| {
            r3.iter()
                .map(|r| r.signed_distance(p))
                .fold(f64::INFINITY, f64::min)
        }),
    }))
}

/// The set `{g ≤ 0}` of a smooth function with known gradient. The signed
/// distance is approximated by `g / |∇g|`, accurate to first order near the
/// boundary. `rho` is recorded as given.
pub fn implicit<G, D>(g: G, grad: D, bbox: Rect, rho: Option<f64>) -> IndicatorSet
where
    G: Fn(Vec2) -> f64 + Send + Sync + 'static,
    D: Fn(Vec2) -> Vec2 + Send + Sync + 'static,
{
    let g = Arc::new(g);
    let grad = Arc::new(grad);
    let (g1, g2, d1, d2) = (g.clone(), g, grad.clone(), grad);
    let set = IndicatorSet::new(move |p| g1(p) <= 0.0, bbox).with_geometry(BoundaryGeometry {
        normal: Arc::new(move |p| d1(p).normalized()),
        signed_distance: Arc::new(move |p| g2(p) / d2(p).norm()),
    });
    match rho {
        Some(r) => set.with_regularity_radius(r),
        None => set,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MorphOp {
    Dilate,
    Erode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MorphologyResult {
    pub grid: BitGrid,
    pub radius: f64,
    pub op: MorphOp,
}

const FAR: f64 = 1e20;

/// One-dimensional squared distance transform (lower envelope of parabolas).
/// Entries equal to `FAR` stand for "no site"; their parabolas never win
/// against a real site at grid distances below `1e10`.
fn edt_1d(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    let inter = |p: usize, q: usize| {
        ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64))
    };
    for q in 1..n {
        let mut s = inter(v[k], q);
        while s <= z[k] {
            k -= 1;
            s = inter(v[k], q);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    let mut k = 0;
    for (q, dq) in d.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let diff = q as f64 - p as f64;
        *dq = (diff * diff + f[p]).min(FAR);
    }
}

/// Squared Euclidean distance, in mesh units, from each grid point to the
/// nearest set bit (`FAR` if the grid is empty).
pub(crate) fn squared_distance_transform(grid: &BitGrid) -> Vec<f64> {
    let (nx, ny) = (grid.nx(), grid.ny());
    // column pass into a transposed buffer, then row pass
    let mut cols = vec![0.0; nx * ny];
    cols.par_chunks_mut(ny).enumerate().for_each(|(i, col)| {
        let f: Vec<f64> = (0..ny)
            .map(|j| if grid.get(i, j) { 0.0 } else { FAR })
            .collect();
        let (mut v, mut z) = (vec![0; ny], vec![0.0; ny + 1]);
        edt_1d(&f, col, &mut v, &mut z);
    });
    let mut out = vec![0.0; nx * ny];
    out.par_chunks_mut(nx).enumerate().for_each(|(j, row)| {
        let f: Vec<f64> = (0..nx).map(|i| cols[i * ny + j]).collect();
        let (mut v, mut z) = (vec![0; nx], vec![0.0; nx + 1]);
        edt_1d(&f, row, &mut v, &mut z);
    });
    out
}

/// Euclidean-ball dilation or erosion of the set bits. Erosion is the dual
/// `((Mᶜ)^{⊕r})ᶜ`, with the complement taken inside the grid.
pub fn morph(grid: &BitGrid, radius: f64, op: MorphOp) -> Result<MorphologyResult, ShapeError> {
    let eps = grid.epsilon();
    if !(radius >= eps) {
        return Err(ShapeError::RadiusTooSmall {
            radius,
            epsilon: eps,
        });
    }
    let r2 = (radius / eps).powi(2) * (1.0 + 1e-12);
    let dilate = |g: &BitGrid| {
        let d = squared_distance_transform(g);
        let nx = g.nx();
        BitGrid::from_fn(*g.lattice(), |i, j| d[j * nx + i] <= r2)
    };
    let out = match op {
        MorphOp::Dilate => dilate(grid),
        MorphOp::Erode => dilate(&grid.complement()).complement(),
    };
    Ok(MorphologyResult {
        grid: out,
        radius,
        op,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransversalityOptions {
    /// Crossings at angles `≤ angle_tol` (radians) between the boundary
    /// normals fail the check.
    pub angle_tol: f64,
    /// Samples per window edge.
    pub n_samples: usize,
    /// Distance below which `∂F` is considered to touch a point.
    pub distance_tol: f64,
}

impl Default for TransversalityOptions {
    fn default() -> Self {
        TransversalityOptions {
            angle_tol: 1e-3,
            n_samples: 2000,
            distance_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub point: Vec2,
    /// Angle in `[0, π/2]` between the lines spanned by `n_F` and `n_W`.
    pub angle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransversalityReport {
    pub pass: bool,
    pub min_angle: Option<f64>,
    pub crossings: Vec<Crossing>,
    /// Points where `∂F` touches a window edge without crossing it.
    pub tangencies: Vec<Vec2>,
    pub corner_hits: Vec<Vec2>,
}

fn line_angle(nf: Vec2, nw: Vec2) -> f64 {
    nf.normalized().dot(nw).abs().min(1.0).acos()
}

/// Numerical screen for a window meeting `∂F` transversally and away from
/// its corners. Crossings are found by sign changes of the signed distance
/// along each edge and refined by bisection; touching contacts are found as
/// minima of `|signed distance|` and count as zero-angle crossings.
pub fn check_transversality(
    set: &IndicatorSet,
    w: &PolyRectangle,
    opts: &TransversalityOptions,
) -> Result<TransversalityReport, ShapeError> {
    let geo = set.geometry().ok_or(ShapeError::NoNormalAvailable)?;
    let sd = |p: Vec2| (geo.signed_distance)(p);
    let n = opts.n_samples.max(2);
    let mut crossings = Vec::new();
    let mut tangencies: Vec<Vec2> = Vec::new();
    for e in w.edges() {
        let at = |t: f64| e.a + (e.b - e.a) * t;
        let ts: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
        let vals: Vec<f64> = ts.iter().map(|&t| sd(at(t))).collect();
        for k in 0..n {
            let (v0, v1) = (vals[k], vals[k + 1]);
            if (v0 < 0.0) != (v1 < 0.0) {
                let (mut lo, mut hi) = (ts[k], ts[k + 1]);
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if (sd(at(mid)) < 0.0) == (v0 < 0.0) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let p = at(0.5 * (lo + hi));
                crossings.push(Crossing {
                    point: p,
                    angle: line_angle((geo.normal)(p), e.normal),
                });
            }
        }
        // local minima of |sd| away from sign changes
        for k in 1..n {
            let (a, b, c) = (vals[k - 1].abs(), vals[k].abs(), vals[k + 1].abs());
            let same_sign =
                (vals[k - 1] < 0.0) == (vals[k] < 0.0) && (vals[k] < 0.0) == (vals[k + 1] < 0.0);
            if !(b <= a && b <= c && same_sign) {
                continue;
            }
            // golden-section search on |sd| over the bracketing interval
            let (mut lo, mut hi) = (ts[k - 1], ts[k + 1]);
            let phi = 0.5 * (5f64.sqrt() - 1.0);
            for _ in 0..200 {
                let m1 = hi - phi * (hi - lo);
                let m2 = lo + phi * (hi - lo);
                if sd(at(m1)).abs() <= sd(at(m2)).abs() {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            let p = at(0.5 * (lo + hi));
            if sd(p).abs() <= opts.distance_tol.max(1e-12)
                && !tangencies.iter().any(|q| (*q - p).norm() <= 1e-6)
            {
                tangencies.push(p);
            }
        }
    }
    let corner_hits: Vec<Vec2> = w
        .corners()
        .iter()
        .map(|c| c.point)
        .filter(|&p| sd(p).abs() <= opts.distance_tol)
        .collect();
    let min_angle = crossings
        .iter()
        .map(|c| c.angle)
        .chain(tangencies.iter().map(|_| 0.0))
        .reduce(f64::min);
    let pass = min_angle.is_none_or(|a| a > opts.angle_tol) && corner_hits.is_empty();
    Ok(TransversalityReport {
        pass,
        min_angle,
        crossings,
        tangencies,
        corner_hits,
    })
}

/// Distance from `p` to the boundary of a polyrectangle.
pub fn distance_to_boundary(w: &PolyRectangle, p: Vec2) -> f64 {
    w.edges()
        .iter()
        .map(|e| segment_distance(p, e.a, e.b))
        .fold(f64::INFINITY, f64::min)
}
