//! Cell arrangements of axis-aligned rectangles: coordinate compression, a
//! summed-weight field constant on open cells, and exact Minkowski
//! functionals of unions of closed cells.

use serde::{Deserialize, Serialize};

use crate::geometry::{Rect, Vec2};

/// Grid of cells `[xs[a], xs[a+1]] × [ys[b], ys[b+1]]` spanning a frame, with
/// the sum of rectangle weights on each open cell.
#[derive(Debug, Clone)]
pub(crate) struct Arrangement {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// `values[b * cx + a]` for cell `(a, b)`.
    pub values: Vec<f64>,
}

fn coords(frame: (f64, f64), from_rects: impl Iterator<Item = f64>, extra: &[f64]) -> Vec<f64> {
    let (lo, hi) = frame;
    let mut v: Vec<f64> = from_rects
        .chain(extra.iter().copied())
        .map(|c| c.clamp(lo, hi))
        .chain([lo, hi])
        .collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn index_of(sorted: &[f64], c: f64) -> usize {
    sorted
        .binary_search_by(|p| p.total_cmp(&c))
        .expect("coordinate is part of the arrangement")
}

impl Arrangement {
    /// `frame` must be finite; rectangles are clipped to it. `extra_x` and
    /// `extra_y` add cut lines (window edges, for instance).
    pub fn build(rects: &[(Rect, f64)], frame: Rect, extra_x: &[f64], extra_y: &[f64]) -> Self {
        let xs = coords(
            (frame.x0, frame.x1),
            rects.iter().flat_map(|(r, _)| [r.x0, r.x1]),
            extra_x,
        );
        let ys = coords(
            (frame.y0, frame.y1),
            rects.iter().flat_map(|(r, _)| [r.y0, r.y1]),
            extra_y,
        );
        let (cx, cy) = (xs.len() - 1, ys.len() - 1);
        // 2D difference array over cell indices, one spare row and column
        let mut diff = vec![0.0f64; (cx + 1) * (cy + 1)];
        for &(r, w) in rects {
            let (x0, x1) = (
                r.x0.clamp(frame.x0, frame.x1),
                r.x1.clamp(frame.x0, frame.x1),
            );
            let (y0, y1) = (
                r.y0.clamp(frame.y0, frame.y1),
                r.y1.clamp(frame.y0, frame.y1),
            );
            if x0 >= x1 || y0 >= y1 {
                continue;
            }
            let (a0, a1) = (index_of(&xs, x0), index_of(&xs, x1));
            let (b0, b1) = (index_of(&ys, y0), index_of(&ys, y1));
            let s = cx + 1;
            diff[b0 * s + a0] += w;
            diff[b0 * s + a1] -= w;
            diff[b1 * s + a0] -= w;
            diff[b1 * s + a1] += w;
        }
        let s = cx + 1;
        for b in 0..=cy {
            for a in 1..=cx {
                diff[b * s + a] += diff[b * s + a - 1];
            }
        }
        for b in 1..=cy {
            for a in 0..=cx {
                diff[b * s + a] += diff[(b - 1) * s + a];
            }
        }
        let mut values = Vec::with_capacity(cx * cy);
        for b in 0..cy {
            values.extend_from_slice(&diff[b * s..b * s + cx]);
        }
        Arrangement { xs, ys, values }
    }

    pub fn cx(&self) -> usize {
        self.xs.len() - 1
    }

    pub fn cy(&self) -> usize {
        self.ys.len() - 1
    }

    pub fn center(&self, a: usize, b: usize) -> Vec2 {
        Vec2::new(
            0.5 * (self.xs[a] + self.xs[a + 1]),
            0.5 * (self.ys[b] + self.ys[b + 1]),
        )
    }

    /// Cell whose closure contains `p`, ties going to the upper cell.
    pub fn locate(&self, p: Vec2) -> Option<(usize, usize)> {
        let find = |cs: &[f64], v: f64| {
            let k = cs.partition_point(|&c| c <= v);
            (k >= 1 && v <= cs[cs.len() - 1]).then(|| (k - 1).min(cs.len() - 2))
        };
        Some((find(&self.xs, p.x)?, find(&self.ys, p.y)?))
    }

    pub fn value(&self, a: usize, b: usize) -> f64 {
        self.values[b * self.cx() + a]
    }

    /// Smallest gap between consecutive cut lines.
    pub fn min_gap(&self) -> f64 {
        self.xs
            .windows(2)
            .chain(self.ys.windows(2))
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// Union of the closed cells selected by `keep(value, center)`.
    pub fn select(&self, keep: impl Fn(f64, Vec2) -> bool) -> CellSet<'_> {
        let cx = self.cx();
        let occ = self
            .values
            .iter()
            .enumerate()
            .map(|(k, &v)| keep(v, self.center(k % cx, k / cx)))
            .collect();
        CellSet { arr: self, occ }
    }
}

/// A union of closed arrangement cells.
pub(crate) struct CellSet<'a> {
    pub arr: &'a Arrangement,
    pub occ: Vec<bool>,
}

/// Exact features of a union of closed cells.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub chi: i64,
    /// Vertices where only the south-west cell is occupied.
    pub out_corners: u64,
    /// Vertices where only the north-east cell is empty.
    pub in_corners: u64,
    /// Vertices where the boundary turns (one or three occupied cells, or
    /// two diagonal ones).
    pub corners: u64,
    /// Length of boundary edges with normal along `u₁`.
    pub per1: f64,
    /// Length of boundary edges with normal along `u₂`.
    pub per2: f64,
    pub vol: f64,
}

impl CellSet<'_> {
    pub fn get(&self, a: isize, b: isize) -> bool {
        let (cx, cy) = (self.arr.cx() as isize, self.arr.cy() as isize);
        a >= 0 && b >= 0 && a < cx && b < cy && self.occ[(b * cx + a) as usize]
    }

    pub fn stats(&self) -> CellStats {
        let (xs, ys) = (&self.arr.xs, &self.arr.ys);
        let (nvx, nvy) = (xs.len() as isize, ys.len() as isize);
        let mut st = CellStats::default();
        let (mut v, mut e, mut f) = (0i64, 0i64, 0i64);
        for b in 0..nvy {
            for a in 0..nvx {
                let sw = self.get(a - 1, b - 1);
                let se = self.get(a, b - 1);
                let nw = self.get(a - 1, b);
                let ne = self.get(a, b);
                let n = [sw, se, nw, ne].iter().filter(|&&o| o).count();
                if n > 0 {
                    v += 1;
                }
                if n == 1 && sw {
                    st.out_corners += 1;
                }
                if n == 3 && !ne {
                    st.in_corners += 1;
                }
                if n == 1 || n == 3 || (n == 2 && sw == ne) {
                    st.corners += 1;
                }
                // edge to the east of this vertex, between cells below and above
                if a + 1 < nvx {
                    if se || ne {
                        e += 1;
                    }
                    if se != ne {
                        st.per2 += xs[a as usize + 1] - xs[a as usize];
                    }
                }
                // edge to the north, between cells left and right
                if b + 1 < nvy {
                    if nw || ne {
                        e += 1;
                    }
                    if nw != ne {
                        st.per1 += ys[b as usize + 1] - ys[b as usize];
                    }
                }
                if ne {
                    f += 1;
                    st.vol += (xs[a as usize + 1] - xs[a as usize])
                        * (ys[b as usize + 1] - ys[b as usize]);
                }
            }
        }
        st.chi = v - e + f;
        st
    }
}
