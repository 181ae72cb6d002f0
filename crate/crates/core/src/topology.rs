//! Discrete Euler characteristic of digitized sets: 2×2 configuration
//! counting, the V−E+F identity, and connected-component labeling.
//!
//! All routines treat the grid as embedding a bounded set: bits outside the
//! grid are background. Routines that depend on that reading insist on an
//! empty one-cell margin.

use std::ops::AddAssign;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::{popcount, tail_mask};
use crate::lattice::BitGrid;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TopologyError {
    #[error("set bits touch the grid border; the grid needs an empty one-cell margin")]
    MarginViolation,
    #[error(
        "grid is not admissible: {phi_x_set} X-configurations on the set, \
         {phi_x_complement} on the complement (digitization too coarse)"
    )]
    NotAdmissible {
        phi_x_set: u64,
        phi_x_complement: u64,
    },
}

/// Counts of the local 2×2 patterns anchored at each lattice point `x`,
/// reading `(x, x+εu₁, x+εu₂, x+ε(u₁+u₂))`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigCounts {
    /// `x ∈ M`, `x+εu₁ ∉ M`, `x+εu₂ ∉ M` (north-east outward vertices).
    pub phi_out: u64,
    /// `x ∉ M`, `x−εu₁ ∈ M`, `x−εu₂ ∈ M` (south-west inward vertices).
    pub phi_in: u64,
    /// Pattern `(1, 0, 0, 1)`.
    pub phi_x_set: u64,
    /// Pattern `(0, 1, 1, 0)`.
    pub phi_x_complement: u64,
}

impl ConfigCounts {
    pub fn is_admissible(&self) -> bool {
        self.phi_x_set == 0 && self.phi_x_complement == 0
    }

    /// `Φ_out − Φ_in`, meaningful only on admissible grids.
    pub fn chi(&self) -> i64 {
        self.phi_out as i64 - self.phi_in as i64
    }
}

impl AddAssign for ConfigCounts {
    fn add_assign(&mut self, o: ConfigCounts) {
        self.phi_out += o.phi_out;
        self.phi_in += o.phi_in;
        self.phi_x_set += o.phi_x_set;
        self.phi_x_complement += o.phi_x_complement;
    }
}

fn check_margin(grid: &BitGrid) -> Result<(), TopologyError> {
    if grid.touches_border() {
        Err(TopologyError::MarginViolation)
    } else {
        Ok(())
    }
}

/// The shifted rows needed around row `j`, all `nx` bits long.
struct Neighbourhood {
    a: Vec<u64>,
    right: Vec<u64>,
    up: Vec<u64>,
    up_right: Vec<u64>,
    left: Vec<u64>,
    down: Vec<u64>,
}

impl Neighbourhood {
    fn at(grid: &BitGrid, j: usize) -> Self {
        let (j, nx) = (j as isize, grid.nx());
        Neighbourhood {
            a: grid.row_window(j, 0, nx),
            right: grid.row_window(j, 1, nx),
            up: grid.row_window(j + 1, 0, nx),
            up_right: grid.row_window(j + 1, 1, nx),
            left: grid.row_window(j, -1, nx),
            down: grid.row_window(j - 1, 0, nx),
        }
    }
}

/// Sum over rows of `f(row)`, evaluated in parallel.
fn sum_rows<T, F>(grid: &BitGrid, f: F) -> T
where
    T: Default + AddAssign + Send,
    F: Fn(&Neighbourhood, u64) -> T + Sync,
{
    let mask = tail_mask(grid.nx());
    (0..grid.ny())
        .into_par_iter()
        .map(|j| f(&Neighbourhood::at(grid, j), mask))
        .reduce(T::default, |mut a, b| {
            a += b;
            a
        })
}

/// Popcount of a word-wise combination of rows, masking the tail word.
fn count(n: usize, mask: u64, f: impl Fn(usize) -> u64) -> u64 {
    let mut c = 0;
    for w in 0..n {
        let v = f(w);
        c += if w + 1 == n { v & mask } else { v }.count_ones() as u64;
    }
    c
}

pub(crate) fn counts_unchecked(grid: &BitGrid) -> ConfigCounts {
    sum_rows(grid, |r, mask| {
        let n = r.a.len();
        ConfigCounts {
            phi_out: count(n, mask, |w| r.a[w] & !r.right[w] & !r.up[w]),
            phi_in: count(n, mask, |w| !r.a[w] & r.left[w] & r.down[w]),
            phi_x_set: count(n, mask, |w| r.a[w] & !r.right[w] & !r.up[w] & r.up_right[w]),
            phi_x_complement: count(n, mask, |w| !r.a[w] & r.right[w] & r.up[w] & !r.up_right[w]),
        }
    })
}

/// Local configuration counts over every anchor of the grid.
pub fn config_counts(grid: &BitGrid) -> Result<ConfigCounts, TopologyError> {
    check_margin(grid)?;
    Ok(counts_unchecked(grid))
}

/// `χ^ε = Φ_out − Φ_in`, refusing grids with X-configurations.
pub fn chi_local(grid: &BitGrid) -> Result<i64, TopologyError> {
    let c = config_counts(grid)?;
    if !c.is_admissible() {
        return Err(TopologyError::NotAdmissible {
            phi_x_set: c.phi_x_set,
            phi_x_complement: c.phi_x_complement,
        });
    }
    Ok(c.chi())
}

#[derive(Default)]
struct Vef {
    v: u64,
    e: u64,
    f: u64,
}

impl AddAssign for Vef {
    fn add_assign(&mut self, o: Vef) {
        self.v += o.v;
        self.e += o.e;
        self.f += o.f;
    }
}

/// Euler characteristic of the cubical complex spanned by the set bits:
/// vertices, 4-adjacent pairs, and fully set 2×2 windows. Needs no margin
/// and no admissibility.
pub fn chi_vef(grid: &BitGrid) -> i64 {
    let t = sum_rows(grid, |r, _| Vef {
        v: popcount(&r.a),
        e: popcount(&and(&r.a, &r.right)) + popcount(&and(&r.a, &r.up)),
        f: r.a
            .iter()
            .zip(&r.right)
            .zip(r.up.iter().zip(&r.up_right))
            .map(|((a, b), (c, d))| (a & b & c & d).count_ones() as u64)
            .sum(),
    });
    t.v as i64 - t.e as i64 + t.f as i64
}

fn and(a: &[u64], b: &[u64]) -> Vec<u64> {
    a.iter().zip(b).map(|(x, y)| x & y).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Set,
    Complement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Connectivity {
    Four,
    /// 4-neighbours plus the north-east/south-west diagonal: adjacency of
    /// the half-open pixels `x + ε[−½, ½)²`, for the set and its complement
    /// alike.
    Six,
    Eight,
}

/// Connected components of one phase of a grid.
///
/// `labels[j * nx + i]` is `0` for cells of the other phase and `1..=n`
/// otherwise, numbered in order of first appearance in raster order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentLabeling {
    pub phase: Phase,
    pub nx: usize,
    pub ny: usize,
    pub labels: Vec<u32>,
    pub num_components: usize,
    /// Components not touching the grid border.
    pub num_bounded: usize,
}

impl ComponentLabeling {
    pub fn label(&self, i: usize, j: usize) -> u32 {
        self.labels[j * self.nx + i]
    }
}

/// Half-open run `[start, end)` of phase cells within one row.
#[derive(Clone, Copy)]
struct Run {
    start: usize,
    end: usize,
    node: u32,
}

fn row_runs(words: &[u64], nx: usize, out: &mut Vec<(usize, usize)>) {
    out.clear();
    let mut i = 0;
    let bit = |k: usize| (words[k / 64] >> (k % 64)) & 1 == 1;
    while i < nx {
        // skip whole empty words
        if i % 64 == 0 && words[i / 64] == 0 {
            i += 64;
            continue;
        }
        if !bit(i) {
            let rest = words[i / 64] >> (i % 64);
            i += if rest == 0 {
                64 - i % 64
            } else {
                rest.trailing_zeros() as usize
            };
            continue;
        }
        let start = i;
        while i < nx {
            let rest = !words[i / 64] >> (i % 64);
            if rest == 0 {
                i += 64 - i % 64;
            } else {
                i += rest.trailing_zeros() as usize;
                break;
            }
        }
        i = i.min(nx);
        out.push((start, i));
    }
}

struct UnionFind(Vec<u32>);

impl UnionFind {
    fn add(&mut self) -> u32 {
        let id = self.0.len() as u32;
        self.0.push(id);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.0[x as usize] != x {
            let p = self.0[x as usize];
            self.0[x as usize] = self.0[p as usize];
            x = p;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // keep the older root so labels stay in first-seen order
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi as usize] = lo;
        }
    }
}

pub(crate) fn label_with(grid: &BitGrid, phase: Phase, conn: Connectivity) -> ComponentLabeling {
    let (nx, ny) = (grid.nx(), grid.ny());
    let source;
    let g = match phase {
        Phase::Set => grid,
        Phase::Complement => {
            source = grid.complement();
            &source
        }
    };
    // extra columns a run reaches into the row below, leftwards and rightwards
    let (reach_w, reach_e) = match conn {
        Connectivity::Four => (0, 0),
        Connectivity::Six => (1, 0),
        Connectivity::Eight => (1, 1),
    };

    let mut uf = UnionFind(Vec::new());
    let mut rows: Vec<Vec<Run>> = Vec::with_capacity(ny);
    let mut spans = Vec::new();
    for j in 0..ny {
        row_runs(g.row(j), nx, &mut spans);
        let mut cur: Vec<Run> = spans
            .iter()
            .map(|&(start, end)| Run {
                start,
                end,
                node: uf.add(),
            })
            .collect();
        if let Some(prev) = rows.last() {
            let mut p = 0;
            for r in cur.iter_mut() {
                while p < prev.len() && prev[p].end + reach_w <= r.start {
                    p += 1;
                }
                let mut q = p;
                while q < prev.len() && prev[q].start < r.end + reach_e {
                    uf.union(prev[q].node, r.node);
                    q += 1;
                }
            }
        }
        rows.push(cur);
    }

    let mut labels = vec![0u32; nx * ny];
    let mut root_label: Vec<u32> = vec![0; uf.0.len()];
    let mut touches: Vec<bool> = vec![false];
    for (j, row) in rows.iter().enumerate() {
        for r in row {
            let root = uf.find(r.node) as usize;
            if root_label[root] == 0 {
                touches.push(false);
                root_label[root] = (touches.len() - 1) as u32;
            }
            let l = root_label[root];
            if j == 0 || j + 1 == ny || r.start == 0 || r.end == nx {
                touches[l as usize] = true;
            }
            labels[j * nx + r.start..j * nx + r.end].fill(l);
        }
    }
    let num_components = touches.len() - 1;
    let num_bounded = touches[1..].iter().filter(|&&t| !t).count();
    ComponentLabeling {
        phase,
        nx,
        ny,
        labels,
        num_components,
        num_bounded,
    }
}

/// 4-connected components of the set or of its complement. The complement
/// component touching the border is the unbounded one, so labeling the
/// complement requires the one-cell margin.
pub fn label_components(grid: &BitGrid, phase: Phase) -> Result<ComponentLabeling, TopologyError> {
    if phase == Phase::Complement {
        check_margin(grid)?;
    }
    Ok(label_with(grid, phase, Connectivity::Four))
}

/// `#components(M) − #bounded components(Mᶜ)`, both 4-connected.
pub fn chi_components(grid: &BitGrid) -> Result<i64, TopologyError> {
    let set = label_components(grid, Phase::Set)?;
    let holes = label_components(grid, Phase::Complement)?;
    Ok(set.num_components as i64 - holes.num_bounded as i64)
}
