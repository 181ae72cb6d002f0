//! Polyvariograms of digitized and continuum sets, the bicovariogram
//! estimator of the Euler characteristic, and covariogram perimeters.

use std::collections::{BTreeSet, VecDeque};
use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::{self, popcount, tail_mask, words_for};
use crate::geometry::{Rect, Vec2};
use crate::lattice::{BitGrid, IndicatorSet};
use crate::topology::{self, TopologyError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VariogramError {
    #[error("shift ({}, {}) is not a multiple of the lattice mesh", .0.x, .0.y)]
    NonLatticeShift(Vec2),
    #[error("a discrete polyvariogram needs at least one intersected translate")]
    EmptyPlus,
    #[error("set has an unbounded bounding box")]
    UnboundedSet,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

/// Translates entering a polyvariogram: the set is intersected with
/// `F + x` for each `x` in `plus` and with `(F + y)ᶜ` for each `y` in
/// `minus`. Order within either list does not matter.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ShiftSpec {
    #[serde(default)]
    pub plus: Vec<Vec2>,
    #[serde(default)]
    pub minus: Vec<Vec2>,
}

impl ShiftSpec {
    pub fn new(plus: Vec<Vec2>, minus: Vec<Vec2>) -> Self {
        ShiftSpec { plus, minus }
    }
}

/// Integer multiple `s / mesh` if `s` is one up to relative tolerance `1e-9`.
fn lattice_index(s: f64, mesh: f64) -> Option<isize> {
    let t = s / mesh;
    let r = t.round();
    ((t - r).abs() <= 1e-9 * r.abs().max(1.0)).then_some(r as isize)
}

fn lattice_shift(s: Vec2, mesh: f64) -> Option<(isize, isize)> {
    Some((lattice_index(s.x, mesh)?, lattice_index(s.y, mesh)?))
}

/// Counting-measure polyvariogram `#((M+x₁)∩…∩(M+x_q)∩(M+y₁)ᶜ∩…)` of the
/// set bits `M` of `grid`, with every lattice point outside the grid read as
/// background.
pub fn discrete_polyvariogram(grid: &BitGrid, shifts: &ShiftSpec) -> Result<u64, VariogramError> {
    let eps = grid.epsilon();
    let idx = |v: &[Vec2]| -> Result<Vec<(isize, isize)>, VariogramError> {
        v.iter()
            .map(|&s| lattice_shift(s, eps).ok_or(VariogramError::NonLatticeShift(s)))
            .collect()
    };
    let plus = idx(&shifts.plus)?;
    let minus = idx(&shifts.minus)?;
    let &(ax, ay) = plus.first().ok_or(VariogramError::EmptyPlus)?;
    let nx = grid.nx();
    // candidate points p = q + x₁ for q in the grid; p − s sits at grid index q + x₁ − s
    let total = (0..grid.ny() as isize)
        .into_par_iter()
        .map(|j| {
            let mut acc = grid.row_window(j, 0, nx);
            let mut buf = Vec::new();
            for &(sx, sy) in &plus[1..] {
                grid.row_window_into(j + ay - sy, ax - sx, nx, &mut buf);
                acc.iter_mut().zip(&buf).for_each(|(a, b)| *a &= b);
            }
            for &(sx, sy) in &minus {
                grid.row_window_into(j + ay - sy, ax - sx, nx, &mut buf);
                acc.iter_mut().zip(&buf).for_each(|(a, b)| *a &= !b);
            }
            popcount(&acc)
        })
        .sum();
    Ok(total)
}

/// `χ^ε(M) = δ̃₀^{−εu₁,−εu₂}(M) − δ̃^0_{εu₁,εu₂}(M)`, evaluated purely through
/// discrete polyvariograms. Requires an admissible grid with empty margin.
pub fn chi_bicovariogram_discrete(grid: &BitGrid) -> Result<i64, VariogramError> {
    let c = topology::config_counts(grid)?;
    if !c.is_admissible() {
        return Err(TopologyError::NotAdmissible {
            phi_x_set: c.phi_x_set,
            phi_x_complement: c.phi_x_complement,
        }
        .into());
    }
    let e = grid.epsilon();
    let (e1, e2) = (Vec2::U1 * e, Vec2::U2 * e);
    let out = discrete_polyvariogram(grid, &ShiftSpec::new(vec![Vec2::ZERO], vec![-e1, -e2]))?;
    let inn = discrete_polyvariogram(grid, &ShiftSpec::new(vec![e1, e2], vec![Vec2::ZERO]))?;
    Ok(out as i64 - inn as i64)
}

/// Estimate of `Vol(domain ∩ (F+x₁)∩…∩(F+y₁)ᶜ∩…)` on a mesh `h` grid: the
/// midpoint rule when every shift is a multiple of `h`, one jittered sample
/// per cell otherwise. Error is at most `O(h · perimeter)` of the integrated
/// set.
pub fn continuous_polyvariogram(
    set: &IndicatorSet,
    shifts: &ShiftSpec,
    quad_mesh: f64,
    domain: Rect,
) -> Result<f64, VariogramError> {
    Ok(continuous_polyvariograms(set, std::slice::from_ref(shifts), quad_mesh, domain)?[0])
}

/// Several polyvariograms of one set in a single sweep, sharing predicate
/// evaluations. When every shift is a multiple of `quad_mesh` each point
/// of the set is evaluated once; otherwise each distinct shift is evaluated
/// per quadrature point.
pub fn continuous_polyvariograms(
    set: &IndicatorSet,
    specs: &[ShiftSpec],
    quad_mesh: f64,
    domain: Rect,
) -> Result<Vec<f64>, VariogramError> {
    let h = quad_mesh;
    if !(h > 0.0 && h.is_finite()) {
        return Err(VariogramError::InvalidArgument(format!(
            "quadrature mesh must be positive, got {h}"
        )));
    }
    if !domain.is_finite() || !domain.is_proper() {
        return Err(VariogramError::InvalidArgument(format!(
            "integration domain must be a finite proper rectangle, got {domain:?}"
        )));
    }
    let nx = (domain.width() / h).round().max(1.0) as usize;
    let ny = (domain.height() / h).round().max(1.0) as usize;
    let q = Quadrature {
        set,
        x0: domain.x0,
        y0: domain.y0,
        h,
        nx,
        ny,
    };
    let counts = match aligned(specs, h) {
        Some(idx) => q.aligned_counts(&idx),
        None => q.direct_counts(specs),
    };
    Ok(counts.into_iter().map(|c| c as f64 * h * h).collect())
}

type IndexSpec = (Vec<(isize, isize)>, Vec<(isize, isize)>);

fn aligned(specs: &[ShiftSpec], h: f64) -> Option<Vec<IndexSpec>> {
    specs
        .iter()
        .map(|s| {
            let f = |v: &[Vec2]| {
                v.iter()
                    .map(|&x| lattice_shift(x, h))
                    .collect::<Option<Vec<_>>>()
            };
            Some((f(&s.plus)?, f(&s.minus)?))
        })
        .collect()
}

struct Quadrature<'a> {
    set: &'a IndicatorSet,
    x0: f64,
    y0: f64,
    h: f64,
    nx: usize,
    ny: usize,
}

impl Quadrature<'_> {
    fn point(&self, i: isize, j: isize) -> Vec2 {
        Vec2::new(
            self.x0 + (i as f64 + 0.5) * self.h,
            self.y0 + (j as f64 + 0.5) * self.h,
        )
    }

    /// One sample per cell at a pseudo-random offset, fixed per row seed.
    /// Midpoints would round every shifted edge the same way and bias the
    /// count by up to `h/2` per unit of boundary length; jittered samples make
    /// the error zero-mean.
    fn direct_counts(&self, specs: &[ShiftSpec]) -> Vec<u64> {
        let mut uniq: Vec<Vec2> = Vec::new();
        let mut slot = |v: Vec2| match uniq.iter().position(|&u| u == v) {
            Some(k) => k,
            None => {
                uniq.push(v);
                uniq.len() - 1
            }
        };
        let plan: Vec<(Vec<usize>, Vec<usize>)> = specs
            .iter()
            .map(|s| {
                (
                    s.plus.iter().map(|&v| slot(v)).collect(),
                    s.minus.iter().map(|&v| slot(v)).collect(),
                )
            })
            .collect();
        let pred = self.set.predicate();
        let zero = vec![0u64; specs.len()];
        (0..self.ny as isize)
            .into_par_iter()
            .map(|j| {
                let mut c = vec![0u64; specs.len()];
                let mut inside = vec![false; uniq.len()];
                let mut rng = ChaCha8Rng::seed_from_u64(j as u64);
                for i in 0..self.nx as isize {
                    let (du, dv): (f64, f64) = (rng.random(), rng.random());
                    let p = self.point(i, j) + Vec2::new((du - 0.5) * self.h, (dv - 0.5) * self.h);
                    for (k, &s) in uniq.iter().enumerate() {
                        inside[k] = pred(p - s);
                    }
                    for (ck, (plus, minus)) in c.iter_mut().zip(&plan) {
                        if plus.iter().all(|&k| inside[k]) && minus.iter().all(|&k| !inside[k]) {
                            *ck += 1;
                        }
                    }
                }
                c
            })
            .reduce(|| zero.clone(), add_vec)
    }

    /// Rows of predicate bits are built once and reused by every shift. Output
    /// row `j` needs base rows `j − b` over the distinct vertical offsets `b`;
    /// these are walked in independent chains of stride `g`, the gcd of the
    /// offset differences, so each chain keeps only a short window of rows.
    fn aligned_counts(&self, specs: &[IndexSpec]) -> Vec<u64> {
        let all = || specs.iter().flat_map(|(p, m)| p.iter().chain(m));
        let dys: BTreeSet<isize> = all().map(|&(_, b)| b).collect();
        let (a_min, a_max) = all().fold((0, 0), |(lo, hi), &(a, _)| (lo.min(a), hi.max(a)));
        let (b_min, b_max) = (*dys.first().unwrap_or(&0), *dys.last().unwrap_or(&0));
        let g = dys
            .iter()
            .map(|&b| (b - b_min) as usize)
            .fold(0, gcd)
            .max(1);
        let g = if dys.len() <= 1 { self.ny.max(1) } else { g };
        // base columns cover i − a for every output column i and shift a
        let i_lo = -a_max;
        let width = self.nx + (a_max - a_min) as usize;
        let pred = self.set.predicate();
        let base_row = |t: isize| -> Vec<u64> {
            let mut w = vec![0u64; words_for(width)];
            for c in 0..width {
                if pred(self.point(i_lo + c as isize, t)) {
                    w[c / 64] |= 1 << (c % 64);
                }
            }
            w
        };
        let nxw = words_for(self.nx);
        let mask = tail_mask(self.nx);
        let zero = vec![0u64; specs.len()];
        (0..g.min(self.ny))
            .into_par_iter()
            .map(|r| {
                let mut c = vec![0u64; specs.len()];
                let mut window: VecDeque<(isize, Vec<u64>)> = VecDeque::new();
                let (mut acc, mut buf) = (Vec::with_capacity(nxw), Vec::with_capacity(nxw));
                let mut j = r as isize;
                while j < self.ny as isize {
                    while window.front().is_some_and(|(t, _)| *t < j - b_max) {
                        window.pop_front();
                    }
                    let mut next = window.back().map_or(j - b_max, |(t, _)| t + g as isize);
                    while next <= j - b_min {
                        window.push_back((next, base_row(next)));
                        next += g as isize;
                    }
                    let front = window[0].0;
                    let row = |b: isize| &window[((j - b - front) / g as isize) as usize].1;
                    for (ck, (plus, minus)) in c.iter_mut().zip(specs) {
                        acc.clear();
                        acc.resize(nxw, u64::MAX);
                        for &(a, b) in plus {
                            bits::extract_into(row(b), -a - i_lo, self.nx, &mut buf);
                            acc.iter_mut().zip(&buf).for_each(|(x, y)| *x &= y);
                        }
                        for &(a, b) in minus {
                            bits::extract_into(row(b), -a - i_lo, self.nx, &mut buf);
                            acc.iter_mut().zip(&buf).for_each(|(x, y)| *x &= !y);
                        }
                        if let Some(last) = acc.last_mut() {
                            *last &= mask;
                        }
                        *ck += popcount(&acc);
                    }
                    j += g as isize;
                }
                c
            })
            .reduce(|| zero.clone(), add_vec)
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn add_vec(mut a: Vec<u64>, b: Vec<u64>) -> Vec<u64> {
    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
    a
}

fn finite_bbox(set: &IndicatorSet) -> Result<Rect, VariogramError> {
    let b = set.bounding_box();
    if b.is_finite() {
        Ok(b)
    } else {
        Err(VariogramError::UnboundedSet)
    }
}

/// Largest mesh `≤ quad_mesh` dividing `epsilon`, so the shifts `±εuᵢ` are
/// quadrature-lattice vectors.
pub fn snap_mesh(epsilon: f64, quad_mesh: f64) -> f64 {
    epsilon / (epsilon / quad_mesh).ceil()
}

/// Continuum bicovariogram estimator
/// `ε⁻²(δ₀^{−εu₁,−εu₂}(F) − δ^0_{εu₁,εu₂}(F))` of `χ(F)`.
///
/// The quadrature mesh is snapped down to divide `ε` (see [`snap_mesh`]).
/// Quadrature error is `O(h / ε²)` in the returned value.
pub fn chi_bicovariogram(
    set: &IndicatorSet,
    epsilon: f64,
    quad_mesh: f64,
) -> Result<f64, VariogramError> {
    if !(epsilon > 0.0 && quad_mesh > 0.0) {
        return Err(VariogramError::InvalidArgument(
            "epsilon and quadrature mesh must be positive".into(),
        ));
    }
    let h = snap_mesh(epsilon, quad_mesh);
    let domain = finite_bbox(set)?.dilate(epsilon + 2.0 * h);
    let (e1, e2) = (Vec2::U1 * epsilon, Vec2::U2 * epsilon);
    let v = continuous_polyvariograms(
        set,
        &[
            ShiftSpec::new(vec![Vec2::ZERO], vec![-e1, -e2]),
            ShiftSpec::new(vec![e1, e2], vec![Vec2::ZERO]),
        ],
        h,
        domain,
    )?;
    Ok((v[0] - v[1]) / (epsilon * epsilon))
}

/// Directional perimeter estimates `2ε⁻¹δ₀^{εu}` along a decreasing
/// schedule, with a first-order extrapolation to `ε → 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerimeterEstimate {
    pub direction: Vec2,
    pub epsilons: Vec<f64>,
    pub values: Vec<f64>,
    pub extrapolated: f64,
}

impl PerimeterEstimate {
    /// `epsilon,value` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epsilon,value\n");
        for (e, v) in self.epsilons.iter().zip(&self.values) {
            let _ = writeln!(s, "{e},{v}");
        }
        s
    }
}

/// Richardson step for `v(ε) = P + cε`, from the two smallest scales.
fn richardson(epsilons: &[f64], values: &[f64]) -> f64 {
    let n = epsilons.len();
    let (ea, eb) = (epsilons[n - 2], epsilons[n - 1]);
    let (va, vb) = (values[n - 2], values[n - 1]);
    ((ea * vb - eb * va) / (ea - eb)).max(0.0)
}

fn check_schedule(epsilons: &[f64], quad_mesh: f64) -> Result<(), VariogramError> {
    if epsilons.len() < 3 {
        return Err(VariogramError::InvalidArgument(
            "perimeter schedule needs at least three scales".into(),
        ));
    }
    if epsilons.windows(2).any(|w| w[1] >= w[0]) || epsilons.iter().any(|&e| e <= 0.0) {
        return Err(VariogramError::InvalidArgument(
            "perimeter scales must be positive and strictly decreasing".into(),
        ));
    }
    if !(quad_mesh > 0.0 && quad_mesh < epsilons[epsilons.len() - 1]) {
        return Err(VariogramError::InvalidArgument(
            "quadrature mesh must be positive and below the smallest scale".into(),
        ));
    }
    Ok(())
}

/// Estimates `Per_u(F) = 2 lim ε⁻¹ Vol(F ∖ (F + εu))`.
pub fn estimate_perimeter(
    set: &IndicatorSet,
    direction: Vec2,
    epsilons: &[f64],
    quad_mesh: f64,
) -> Result<PerimeterEstimate, VariogramError> {
    check_schedule(epsilons, quad_mesh)?;
    if !((direction.norm() - 1.0).abs() < 1e-9) {
        return Err(VariogramError::InvalidArgument(format!(
            "direction must be a unit vector, got {direction:?}"
        )));
    }
    let domain = finite_bbox(set)?.dilate(epsilons[0] + 2.0 * quad_mesh);
    let specs: Vec<ShiftSpec> = epsilons
        .iter()
        .map(|&e| ShiftSpec::new(vec![Vec2::ZERO], vec![direction * e]))
        .collect();
    let vols = continuous_polyvariograms(set, &specs, quad_mesh, domain)?;
    let values: Vec<f64> = vols
        .iter()
        .zip(epsilons)
        .map(|(v, e)| 2.0 * v / e)
        .collect();
    Ok(PerimeterEstimate {
        direction,
        extrapolated: richardson(epsilons, &values),
        epsilons: epsilons.to_vec(),
        values,
    })
}

/// `Per_∞ = Per_{u₁} + Per_{u₂}` and the rotation average
/// `Per ≈ ¼ (2π/n) Σ_k Per_{u_k}` over `n` equispaced directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerimeterSummary {
    pub per_u1: f64,
    pub per_u2: f64,
    pub per_inf: f64,
    pub per: f64,
    pub n_directions: usize,
    pub directional: Vec<PerimeterEstimate>,
}

pub fn perimeter_summary(
    set: &IndicatorSet,
    epsilons: &[f64],
    quad_mesh: f64,
    n_directions: usize,
) -> Result<PerimeterSummary, VariogramError> {
    if n_directions == 0 || !n_directions.is_multiple_of(4) {
        return Err(VariogramError::InvalidArgument(format!(
            "direction count must be a positive multiple of 4, got {n_directions}"
        )));
    }
    // k = 0 and k = n/4 are exactly u₁ and u₂
    let directional = (0..n_directions)
        .map(|k| {
            let d = if k == 0 {
                Vec2::U1
            } else if 4 * k == n_directions {
                Vec2::U2
            } else {
                Vec2::from_angle(2.0 * PI * k as f64 / n_directions as f64)
            };
            estimate_perimeter(set, d, epsilons, quad_mesh)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let per_u1 = directional[0].extrapolated;
    let per_u2 = directional[n_directions / 4].extrapolated;
    let sum: f64 = directional.iter().map(|e| e.extrapolated).sum();
    Ok(PerimeterSummary {
        per_u1,
        per_u2,
        per_inf: per_u1 + per_u2,
        per: 0.25 * 2.0 * PI / n_directions as f64 * sum,
        n_directions,
        directional,
    })
}
