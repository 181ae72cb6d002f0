//! Entanglement pairs of a fine-resolution ground truth and the component
//! bounds they control for coarse digitizations.
//!
//! The truth is a [`BitGrid`] at mesh `h`, read as the continuum set `F`
//! made of the closed `h`-pixels centred at its set bits. Consequently the
//! components of `F` are the 8-connected components of the grid and those of
//! `Fᶜ` the 4-connected ones. The coarse lattice `Z_ε`, `ε = k·h`, consists of
//! the fine points whose indices are multiples of `k`, so the digitization of
//! `F` is read off the grid exactly.
//!
//! Inside the square `P_{x,y}` connectivity is decided by 8-adjacency at mesh
//! `h`. This can only report extra pairs, never miss one. For odd `k` the
//! square's sides parallel to `[x, y]` fall between fine rows, and the
//! outermost fine rows inside it stand in for them.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{segment_distance, Rect, Vec2};
use crate::lattice::{BitGrid, Lattice};
use crate::shapes::{squared_distance_transform, PolyRectangle};
use crate::topology::{counts_unchecked, label_with, Connectivity, Phase};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EntanglementError {
    #[error("coarse mesh {coarse} is not an integer multiple k ≥ 4 of the truth mesh {fine}")]
    MeshMismatch { coarse: f64, fine: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairKind {
    Interior,
    Boundary,
}

/// Unordered pair of coarse lattice points, by coarse index and position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pair {
    pub a: (usize, usize),
    pub b: (usize, usize),
    pub pa: Vec2,
    pub pb: Vec2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSet {
    pub kind: PairKind,
    pub pairs: Vec<Pair>,
}

impl PairSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Rows `x1,y1,x2,y2,kind` with a header.
    pub fn to_csv(&self) -> String {
        let kind = match self.kind {
            PairKind::Interior => "interior",
            PairKind::Boundary => "boundary",
        };
        let mut s = String::from("x1,y1,x2,y2,kind\n");
        for p in &self.pairs {
            let _ = writeln!(s, "{},{},{},{},{kind}", p.pa.x, p.pa.y, p.pb.x, p.pb.y);
        }
        s
    }
}

/// Pair options shared by the detectors.
#[derive(Debug, Clone, Copy, Default)]
pub struct PairOptions<'a> {
    /// Detect pairs of `Fᶜ` instead of `F`.
    pub complement: bool,
    /// Keep only interior pairs with both points in `W^{⊕ε}`.
    pub window: Option<&'a PolyRectangle>,
}

/// Fine/coarse geometry shared by the detectors.
struct Scales<'a> {
    truth: &'a BitGrid,
    k: usize,
    coarse: Lattice,
}

impl<'a> Scales<'a> {
    fn new(truth: &'a BitGrid, coarse_epsilon: f64) -> Result<Self, EntanglementError> {
        let h = truth.epsilon();
        let ratio = coarse_epsilon / h;
        let k = ratio.round();
        let mismatch = EntanglementError::MeshMismatch {
            coarse: coarse_epsilon,
            fine: h,
        };
        if !((ratio - k).abs() <= 1e-9 * k.max(1.0)) || k < 4.0 {
            return Err(mismatch);
        }
        let k = k as usize;
        let coarse = Lattice::new(
            h * k as f64,
            truth.lattice().origin(),
            (truth.nx() - 1) / k + 1,
            (truth.ny() - 1) / k + 1,
        )
        .map_err(|_| mismatch)?;
        Ok(Scales { truth, k, coarse })
    }

    fn fine(&self, a: (usize, usize)) -> (isize, isize) {
        ((a.0 * self.k) as isize, (a.1 * self.k) as isize)
    }

    /// Membership in the phase under study, with everything outside the
    /// grid belonging to `Fᶜ`.
    fn phase(&self, complement: bool, i: isize, j: isize) -> bool {
        self.truth.get_or(i, j, false) != complement
    }

    fn coarse_phase(&self, complement: bool, a: (usize, usize)) -> bool {
        let (i, j) = self.fine(a);
        self.phase(complement, i, j)
    }

    fn pair(&self, a: (usize, usize), b: (usize, usize)) -> Pair {
        Pair {
            a,
            b,
            pa: self.coarse.point(a.0 as isize, a.1 as isize),
            pb: self.coarse.point(b.0 as isize, b.1 as isize),
        }
    }
}

fn distance_to_poly(w: &PolyRectangle, p: Vec2) -> f64 {
    w.pieces()
        .iter()
        .map(|r| r.distance_to(p))
        .fold(f64::INFINITY, f64::min)
}

/// Whether the ring `∂P ∖ {x, y}` and the phase cells inside `P` form a
/// single 8-connected set. `P` spans `len + 1` fine points along the pair
/// axis and `2·half + 1` across it; `at(s, t)` reads the phase at offset `s`
/// along the axis from `x` and `t` across it.
fn square_connected(len: usize, half: usize, at: impl Fn(isize, isize) -> bool) -> bool {
    let (w, hgt) = (len + 1, 2 * half + 1);
    let mid = half;
    let mut cells = vec![false; w * hgt];
    let mut any_phase = false;
    for t in 0..hgt {
        for s in 0..w {
            let ring = s == 0 || s == len || t == 0 || t == hgt - 1;
            let endpoint = t == mid && (s == 0 || s == len);
            let f = at(s as isize, t as isize - half as isize);
            any_phase |= f && !ring;
            cells[t * w + s] = (ring && !endpoint) || f;
        }
    }
    if !any_phase && !cells[mid * w] && !cells[mid * w + len] {
        // only the two arcs
        return false;
    }
    let start = cells.iter().position(|&c| c).expect("ring is never empty");
    let mut seen = vec![false; w * hgt];
    seen[start] = true;
    let mut q = VecDeque::from([start]);
    let mut reached = 1;
    while let Some(c) = q.pop_front() {
        let (s, t) = ((c % w) as isize, (c / w) as isize);
        for dt in -1..=1 {
            for ds in -1..=1 {
                let (a, b) = (s + ds, t + dt);
                if a < 0 || b < 0 || a >= w as isize || b >= hgt as isize {
                    continue;
                }
                let n = b as usize * w + a as usize;
                if cells[n] && !seen[n] {
                    seen[n] = true;
                    reached += 1;
                    q.push_back(n);
                }
            }
        }
    }
    reached == cells.iter().filter(|&&c| c).count()
}

/// Entanglement pairs `N_ε(F)` (or `N_ε(Fᶜ)`): grid-neighbour pairs off the
/// phase whose square `P_{x,y}` is crossed by it.
pub fn detect_interior_pairs(
    truth: &BitGrid,
    coarse_epsilon: f64,
    opts: PairOptions<'_>,
) -> Result<PairSet, EntanglementError> {
    let sc = Scales::new(truth, coarse_epsilon)?;
    let (cnx, cny) = (sc.coarse.nx(), sc.coarse.ny());
    let (k, half) = (sc.k, sc.k / 2);
    let comp = opts.complement;
    let eps = sc.coarse.epsilon();
    let in_window = |a: (usize, usize)| {
        opts.window
            .is_none_or(|w| distance_to_poly(w, sc.coarse.point(a.0 as isize, a.1 as isize)) <= eps)
    };
    let mut pairs: Vec<Pair> = (0..cny)
        .into_par_iter()
        .flat_map_iter(|jc| {
            let sc = &sc;
            let mut found = Vec::new();
            for ic in 0..cnx {
                let a = (ic, jc);
                if sc.coarse_phase(comp, a) || !in_window(a) {
                    continue;
                }
                let (fi, fj) = sc.fine(a);
                for b in [(ic + 1, jc), (ic, jc + 1)] {
                    if b.0 >= cnx || b.1 >= cny || sc.coarse_phase(comp, b) || !in_window(b) {
                        continue;
                    }
                    let horizontal = b.1 == jc;
                    let hit = square_connected(k, half, |s, t| {
                        if horizontal {
                            sc.phase(comp, fi + s, fj + t)
                        } else {
                            sc.phase(comp, fi + t, fj + s)
                        }
                    });
                    if hit {
                        found.push(sc.pair(a, b));
                    }
                }
            }
            found
        })
        .collect();
    pairs.sort_by_key(|p| (p.a.1, p.a.0, p.b.1, p.b.0));
    Ok(PairSet {
        kind: PairKind::Interior,
        pairs,
    })
}

/// Exact test `dist(p, F) ≤ ε` against closed fine pixels, given the squared
/// centre distance `d2` (fine units) from the distance transform.
fn within_reach(sc: &Scales<'_>, comp: bool, i: isize, j: isize, d2: f64) -> bool {
    let k = sc.k as f64;
    if d2 <= k * k {
        return true;
    }
    // pixel distance ≥ centre distance − √2/2
    if d2.sqrt() - std::f64::consts::FRAC_1_SQRT_2 > k {
        return false;
    }
    let r = sc.k as isize + 1;
    for dj in -r..=r {
        for di in -r..=r {
            if !sc.phase(comp, i + di, j + dj) {
                continue;
            }
            let ex = (di.abs() as f64 - 0.5).max(0.0);
            let ey = (dj.abs() as f64 - 0.5).max(0.0);
            if ex * ex + ey * ey <= k * k {
                return true;
            }
        }
    }
    false
}

/// Boundary pairs `N'_ε(F, W)` (or of `Fᶜ`): consecutive phase points of
/// `[W ∩ F]` on a lattice row or column, both within `ε` of the same edge of
/// `W`, separated by at least one lattice point of `[Fᶜ ∩ F^{⊕ε}]` and
/// nothing else.
pub fn detect_boundary_pairs(
    truth: &BitGrid,
    coarse_epsilon: f64,
    window: &PolyRectangle,
    opts: PairOptions<'_>,
) -> Result<PairSet, EntanglementError> {
    let sc = Scales::new(truth, coarse_epsilon)?;
    let comp = opts.complement;
    let (cnx, cny) = (sc.coarse.nx(), sc.coarse.ny());
    let eps = sc.coarse.epsilon();
    let reach = {
        let g = if comp {
            truth.complement()
        } else {
            truth.clone()
        };
        squared_distance_transform(&g)
    };
    let nx = truth.nx();
    let near_f = |a: (usize, usize)| {
        let (i, j) = sc.fine(a);
        let d2 = if comp && truth.touches_border() {
            // complement extends past the grid; force the exact scan
            (sc.k as f64 + 0.5).powi(2)
        } else {
            reach[j as usize * nx + i as usize]
        };
        within_reach(&sc, comp, i, j, d2)
    };
    let point = |a: (usize, usize)| sc.coarse.point(a.0 as isize, a.1 as isize);
    let member = |a: (usize, usize)| sc.coarse_phase(comp, a) && window.contains(point(a));
    let shared_edge = |x: Vec2, y: Vec2| {
        window
            .edges()
            .iter()
            .any(|e| segment_distance(x, e.a, e.b) <= eps && segment_distance(y, e.a, e.b) <= eps)
    };

    let mut pairs = Vec::new();
    let mut scan = |line: &mut dyn Iterator<Item = (usize, usize)>| {
        let pts: Vec<(usize, usize)> = line.collect();
        let mut last: Option<usize> = None;
        for (n, &p) in pts.iter().enumerate() {
            if !sc.coarse_phase(comp, p) {
                continue;
            }
            if let Some(m) = last {
                let (x, y) = (pts[m], p);
                if n - m >= 2
                    && member(x)
                    && member(y)
                    && shared_edge(point(x), point(y))
                    && pts[m + 1..n].iter().all(|&z| near_f(z))
                {
                    pairs.push(sc.pair(x, y));
                }
            }
            last = Some(n);
        }
    };
    for jc in 0..cny {
        scan(&mut (0..cnx).map(|ic| (ic, jc)));
    }
    for ic in 0..cnx {
        scan(&mut (0..cny).map(|jc| (ic, jc)));
    }
    Ok(PairSet {
        kind: PairKind::Boundary,
        pairs,
    })
}

/// One inequality `lhs ≤ rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub lhs: i64,
    pub rhs: i64,
    pub holds: bool,
}

impl BoundCheck {
    fn new(lhs: i64, rhs: i64) -> Self {
        BoundCheck {
            lhs,
            rhs,
            holds: lhs <= rhs,
        }
    }
}

/// Both sides of the component bounds for one truth set and mesh.
///
/// The headline fields describe the windowed bound when a window is given
/// and the whole-plane bound otherwise; `holds` is that bound's verdict.
/// `euler` checks `|χ((F∩W)^ε)|` against its pair bound, with `W` the grid
/// extent when no window is given.
///
/// Digitized components are counted with closed pixels. Only X-configurations
/// make conventions disagree; `x_configurations` counts them on the headline
/// digitization and `num_components_half_open` gives its count with
/// half-open pixels `x + ε[−½, ½)²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub num_components_digitized: i64,
    pub num_components_truth: i64,
    pub n_interior: usize,
    pub n_boundary: usize,
    pub corners: usize,
    pub bound_rhs: i64,
    pub holds: bool,
    pub gamma: BoundCheck,
    pub gamma_window: Option<BoundCheck>,
    pub euler: BoundCheck,
    pub all_hold: bool,
    pub x_configurations: u64,
    pub num_components_half_open: i64,
}

/// Coarse digitization of `F ∩ W`, as a coarse grid.
fn coarse_digitization(sc: &Scales<'_>, window: Option<&PolyRectangle>) -> BitGrid {
    BitGrid::from_fn(sc.coarse, |i, j| {
        sc.coarse_phase(false, (i, j))
            && window.is_none_or(|w| w.contains(sc.coarse.point(i as isize, j as isize)))
    })
}

fn fine_restricted(truth: &BitGrid, w: &PolyRectangle, complement: bool) -> BitGrid {
    let lat = *truth.lattice();
    BitGrid::from_fn(lat, |i, j| {
        (truth.get(i, j) != complement) && w.contains(lat.point(i as isize, j as isize))
    })
}

/// `|χ|` of the closed-pixel reconstruction of a coarse grid.
fn abs_chi(g: &BitGrid) -> i64 {
    let s = label_with(g, Phase::Set, Connectivity::Eight).num_components as i64;
    let c = label_with(g, Phase::Complement, Connectivity::Four).num_bounded as i64;
    (s - c).abs()
}

/// Verifies the component bounds
/// `#Γ(F^ε) ≤ 2#N_ε(F) + #Γ(F)`, its windowed form
/// `#Γ((F∩W)^ε) ≤ 2#N_ε(F)∩W^{⊕ε} + 2#N'_ε(F,W) + #Γ(F∩W) + 2#corners(W)`,
/// and the Euler characteristic bound built from pairs of `F` and `Fᶜ`.
///
/// Digitized components are those of the closed-pixel reconstruction
/// (8-adjacency), the convention under which no X-configuration splits a
/// component that `F` connects. `corners(W)` counts the vertices where `∂W` turns. For
/// an exact `F ∩ W` the window edges should lie on fine pixel boundaries;
/// otherwise `F ∩ W` is approximated by the pixels centred in `W`.
pub fn verify_bounds(
    truth: &BitGrid,
    coarse_epsilon: f64,
    window: Option<&PolyRectangle>,
) -> Result<BoundReport, EntanglementError> {
    let sc = Scales::new(truth, coarse_epsilon)?;
    let plain = PairOptions::default();

    let n_all = detect_interior_pairs(truth, coarse_epsilon, plain)?.len() as i64;
    let gamma_truth = label_with(truth, Phase::Set, Connectivity::Eight).num_components as i64;
    let dig = coarse_digitization(&sc, None);
    let gamma_dig = label_with(&dig, Phase::Set, Connectivity::Eight).num_components as i64;
    let gamma = BoundCheck::new(gamma_dig, 2 * n_all + gamma_truth);

    // the Euler bound always needs a window
    let extent_window;
    let w = match window {
        Some(w) => w,
        None => {
            let e = truth.lattice().extent().dilate(0.5 * truth.epsilon());
            extent_window = PolyRectangle::rect(e).expect("grid extent is a proper rectangle");
            &extent_window
        }
    };
    let with_w = |complement| PairOptions {
        complement,
        window: Some(w),
    };
    let n_f = detect_interior_pairs(truth, coarse_epsilon, with_w(false))?.len() as i64;
    let n_fc = detect_interior_pairs(truth, coarse_epsilon, with_w(true))?.len() as i64;
    let nb_f = detect_boundary_pairs(truth, coarse_epsilon, w, with_w(false))?.len() as i64;
    let nb_fc = detect_boundary_pairs(truth, coarse_epsilon, w, with_w(true))?.len() as i64;
    let corners = w.corners().len() as i64;
    let gamma_fw = label_with(
        &fine_restricted(truth, w, false),
        Phase::Set,
        Connectivity::Eight,
    )
    .num_components as i64;
    let gamma_fcw = label_with(
        &fine_restricted(truth, w, true),
        Phase::Set,
        Connectivity::Four,
    )
    .num_components as i64;
    let dig_w = coarse_digitization(&sc, Some(w));
    let gamma_dig_w = label_with(&dig_w, Phase::Set, Connectivity::Eight).num_components as i64;
    let gamma_window = BoundCheck::new(gamma_dig_w, 2 * n_f + 2 * nb_f + gamma_fw + 2 * corners);
    let euler = BoundCheck::new(
        abs_chi(&dig_w),
        3 * corners + 2 * n_f.max(n_fc) + 2 * nb_f.max(nb_fc) + gamma_fw.max(gamma_fcw),
    );

    let (headline, truth_count, n_int, n_bnd, crn, head_dig) = match window {
        Some(_) => (gamma_window, gamma_fw, n_f, nb_f, corners, &dig_w),
        None => (gamma, gamma_truth, n_all, 0, 0, &dig),
    };
    let xc = counts_unchecked(head_dig);
    Ok(BoundReport {
        num_components_digitized: headline.lhs,
        num_components_truth: truth_count,
        n_interior: n_int as usize,
        n_boundary: n_bnd as usize,
        corners: crn as usize,
        bound_rhs: headline.rhs,
        holds: headline.holds,
        gamma,
        gamma_window: window.map(|_| gamma_window),
        euler,
        all_hold: gamma.holds && gamma_window.holds && euler.holds,
        x_configurations: xc.phi_x_set + xc.phi_x_complement,
        num_components_half_open: label_with(head_dig, Phase::Set, Connectivity::Six).num_components
            as i64,
    })
}

/// Window whose edges sit on fine pixel boundaries: `rect` snapped outward
/// to half-integer fine coordinates of `truth`'s lattice.
pub fn pixel_aligned_window(truth: &BitGrid, rect: Rect) -> PolyRectangle {
    let (o, h) = (truth.lattice().origin(), truth.epsilon());
    let lo = |v: f64, o: f64| o + ((v - o) / h - 0.5).floor() * h + 0.5 * h;
    let hi = |v: f64, o: f64| o + ((v - o) / h + 0.5).ceil() * h - 0.5 * h;
    PolyRectangle::rect(Rect::new(
        lo(rect.x0, o.x),
        hi(rect.x1, o.x),
        lo(rect.y0, o.y),
        hi(rect.y1, o.y),
    ))
    .expect("snapped window is proper")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::digitize;
    use crate::shapes::{make_shape, ShapeSpec};
    use proptest::prelude::*;

    fn fine(nx: usize, ny: usize, f: impl Fn(usize, usize) -> bool + Sync) -> BitGrid {
        BitGrid::from_fn(Lattice::new(1.0, Vec2::ZERO, nx, ny).unwrap(), f)
    }

    #[test]
    fn bar_between_neighbours_is_a_pair() {
        let k = 8;
        // coarse x = (1, 2), y = (2, 2) → fine (8, 16) and (16, 16); bar at i = 12
        let bar = fine(41, 41, |i, j| i == 12 && (8..=24).contains(&j));
        let p = detect_interior_pairs(&bar, k as f64, PairOptions::default()).unwrap();
        assert!(
            p.pairs.iter().any(|q| q.a == (1, 2) && q.b == (2, 2)),
            "{:?}",
            p.pairs
        );
        // locality: every reported pair straddles the bar
        assert!(p.pairs.iter().all(|q| q.a.0 == 1 && q.b.0 == 2));

        let broken = fine(41, 41, |i, j| {
            i == 12 && (8..=24).contains(&j) && !(15..=17).contains(&j)
        });
        let p = detect_interior_pairs(&broken, k as f64, PairOptions::default()).unwrap();
        assert!(!p.pairs.iter().any(|q| q.a == (1, 2) && q.b == (2, 2)));
    }

    #[test]
    fn empty_truth_has_no_pairs() {
        let g = fine(33, 33, |_, _| false);
        assert!(detect_interior_pairs(&g, 4.0, PairOptions::default())
            .unwrap()
            .is_empty());
        let w = PolyRectangle::rect(Rect::new(3.5, 28.5, 3.5, 28.5)).unwrap();
        let opts = PairOptions {
            complement: false,
            window: Some(&w),
        };
        assert!(detect_boundary_pairs(&g, 4.0, &w, opts).unwrap().is_empty());
    }

    #[test]
    fn mesh_mismatch() {
        let g = fine(33, 33, |_, _| false);
        for eps in [3.0, 4.5] {
            assert!(matches!(
                detect_interior_pairs(&g, eps, PairOptions::default()),
                Err(EntanglementError::MeshMismatch { .. })
            ));
        }
    }

    #[test]
    fn comb_gives_one_pair_per_gap() {
        let k = 4;
        // W bottom edge at y = 7.5 (fine), coarse row J = 2 (fine j = 8) lies h/2 above it
        let w = PolyRectangle::rect(Rect::new(3.5, 60.5, 7.5, 40.5)).unwrap();
        // teeth on coarse columns 2, 5, 8 (fine 8, 20, 32) rising to a spine at j = 30
        let comb = fine(70, 50, |i, j| {
            ((i == 8 || i == 20 || i == 32) && (8..=30).contains(&j))
                || (j == 30 && (8..=32).contains(&i))
        });
        let opts = PairOptions {
            complement: false,
            window: Some(&w),
        };
        let p = detect_boundary_pairs(&comb, k as f64, &w, opts).unwrap();
        let got: Vec<_> = p.pairs.iter().map(|q| (q.a, q.b)).collect();
        assert_eq!(got, vec![((2, 2), (5, 2)), ((5, 2), (8, 2))]);
        assert!(p
            .to_csv()
            .starts_with("x1,y1,x2,y2,kind\n8,8,20,8,boundary"));
    }

    #[test]
    fn rectangle_inside_window_has_no_boundary_pairs() {
        let g = fine(60, 60, |i, j| {
            (20..40).contains(&i) && (20..40).contains(&j)
        });
        let w = PolyRectangle::rect(Rect::new(3.5, 55.5, 3.5, 55.5)).unwrap();
        let opts = PairOptions {
            complement: false,
            window: Some(&w),
        };
        assert!(detect_boundary_pairs(&g, 4.0, &w, opts).unwrap().is_empty());
    }

    #[test]
    fn disc_bounds_are_tight() {
        let disc = make_shape(&ShapeSpec::Disc {
            center: Vec2::ZERO,
            r: 1.0,
        })
        .unwrap();
        let h = 0.01;
        let lat = Lattice::covering(&disc.bounding_box(), h, 40).unwrap();
        let truth = digitize(&disc, &lat, Vec2::ZERO);
        let r = verify_bounds(&truth, 8.0 * h, None).unwrap();
        assert_eq!(
            (r.num_components_digitized, r.bound_rhs, r.n_interior),
            (1, 1, 0)
        );
        assert!(r.holds && r.all_hold);
    }

    #[test]
    fn split_u_shape() {
        // a U whose right arm is joined by a neck thinner than ε
        let k = 8;
        let u = fine(81, 81, |i, j| {
            let left = (16..=24).contains(&i) && (16..=64).contains(&j);
            let bottom = (16..=64).contains(&i) && (16..=19).contains(&j);
            let right = (60..=64).contains(&i) && (16..=64).contains(&j);
            left || (bottom && !(40..=44).contains(&i))
                || right
                || ((40..=44).contains(&i) && j == 17)
        });
        let r = verify_bounds(&u, k as f64, None).unwrap();
        assert_eq!(r.num_components_truth, 1);
        assert_eq!(r.num_components_digitized, 2);
        assert!(r.bound_rhs >= 3 && r.holds);
    }

    #[test]
    fn aligned_window_snaps_outward() {
        let g = fine(20, 20, |_, _| false);
        let w = pixel_aligned_window(&g, Rect::new(2.2, 7.9, 3.0, 8.0));
        assert_eq!(w.bbox(), Rect::new(1.5, 8.5, 2.5, 8.5));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn bounds_hold_for_random_blobs(
            discs in proptest::collection::vec((8.0f64..72.0, 8.0f64..72.0, 1.0f64..6.0), 1..8),
            k in prop_oneof![Just(4usize), Just(8)],
            wx in 10.0f64..30.0, wy in 10.0f64..30.0,
        ) {
            let g = fine(81, 81, |i, j| discs.iter().any(|&(x, y, r)| {
                (i as f64 - x).powi(2) + (j as f64 - y).powi(2) <= r * r
            }));
            let w = pixel_aligned_window(&g, Rect::new(wx, wx + 40.0, wy, wy + 35.0));
            let a = verify_bounds(&g, k as f64, None).unwrap();
            let b = verify_bounds(&g, k as f64, Some(&w)).unwrap();
            prop_assert!(a.all_hold, "{:?}", a);
            prop_assert!(b.all_hold, "{:?}", b);
        }
    }
}
