//! Acceptance gate: one pass/fail line per criterion.
//!
//! Run a subset with `cargo test --test acceptance -- 3 7`.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use eulergram::shapes::MorphOp;
use eulergram::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = (bool, String);

fn disc(r: f64) -> ShapeSpec {
    ShapeSpec::Disc {
        center: Vec2::ZERO,
        r,
    }
}

/// 1. Every admissible 4×4 mask: local count, V−E+F and components agree.
fn exhaustive_masks() -> Outcome {
    let lat = Lattice::new(1.0, Vec2::ZERO, 6, 6).unwrap();
    let (mut admissible, mut bad) = (0, Vec::new());
    for mask in 0u32..1 << 16 {
        let mut g = BitGrid::new(lat);
        for b in 0..16 {
            g.set(1 + b % 4, 1 + b / 4, mask >> b & 1 == 1);
        }
        let Ok(local) = chi_local(&g) else { continue };
        admissible += 1;
        let vef = chi_vef(&g);
        let comps = chi_components(&g).unwrap();
        if local != vef || local != comps {
            bad.push(mask);
        }
    }
    (
        bad.is_empty() && admissible > 0,
        format!("{admissible} admissible masks, {} disagreements", bad.len()),
    )
}

/// Random grid with margin, with X-configurations removed by filling the
/// empty cells of each offending window. Filling only adds bits, so this
/// terminates.
fn random_admissible(rng: &mut ChaCha8Rng, n: usize) -> BitGrid {
    let lat = Lattice::new(1.0, Vec2::ZERO, n, n).unwrap();
    let density: f64 = rng.random_range(0.2..0.7);
    let mut g = BitGrid::new(lat);
    for j in 1..n - 1 {
        for i in 1..n - 1 {
            g.set(i, j, rng.random::<f64>() < density);
        }
    }
    loop {
        let mut changed = false;
        for j in 0..n - 1 {
            for i in 0..n - 1 {
                let (a, b, c, d) = (
                    g.get(i, j),
                    g.get(i + 1, j),
                    g.get(i, j + 1),
                    g.get(i + 1, j + 1),
                );
                if a == d && b == c && a != b {
                    for (x, y) in [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)] {
                        if x >= 1 && y >= 1 && x < n - 1 && y < n - 1 {
                            g.set(x, y, true);
                        }
                    }
                    changed = true;
                }
            }
        }
        if !changed {
            return g;
        }
    }
}

/// 2. Discrete bicovariogram identity on random admissible grids.
fn discrete_bicovariogram() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut mismatches = 0;
    for _ in 0..10_000 {
        let g = random_admissible(&mut rng, 32);
        if chi_bicovariogram_discrete(&g).ok() != chi_local(&g).ok() || chi_local(&g).is_err() {
            mismatches += 1;
        }
    }
    (
        mismatches == 0,
        format!("10000 grids, {mismatches} mismatches"),
    )
}

/// 3. Unit disc: digitized χ is 1 at every mesh; continuum estimate near 1.
fn disc_chi() -> Outcome {
    let set = make_shape(&disc(1.0)).unwrap();
    let mut digitized = Vec::new();
    for eps in [0.2, 0.1, 0.05, 0.02, 0.01] {
        let lat = Lattice::covering(&set.bounding_box(), eps, 2).unwrap();
        digitized.push(chi_local(&digitize(&set, &lat, Vec2::ZERO)).unwrap_or(i64::MIN));
    }
    let cont = chi_bicovariogram(&set, 0.05, 2e-5).unwrap();
    (
        digitized.iter().all(|&c| c == 1) && (cont - 1.0).abs() <= 0.05,
        format!("digitized {digitized:?}, continuum {cont:.4} (target 1 ± 0.05)"),
    )
}

fn sweep(spec: &ShapeSpec, eps: &[f64]) -> Vec<i64> {
    let set = make_shape(spec).unwrap();
    eps.iter()
        .map(|&e| {
            let lat = Lattice::covering(&set.bounding_box(), e, 2).unwrap();
            chi_local(&digitize(&set, &lat, Vec2::ZERO)).unwrap_or(i64::MIN)
        })
        .collect()
}

/// 4. Annulus and two-disc plateaus.
fn plateaus() -> Outcome {
    let eps = [0.05, 0.02, 0.01];
    let annulus = ShapeSpec::Annulus {
        center: Vec2::ZERO,
        r_in: 0.5,
        r_out: 1.0,
    };
    let two = ShapeSpec::Union {
        shapes: vec![
            ShapeSpec::Disc {
                center: Vec2::new(-1.0, 0.0),
                r: 0.7,
            },
            ShapeSpec::Disc {
                center: Vec2::new(1.0, 0.2),
                r: 0.7,
            },
        ],
    };
    let (a, t) = (sweep(&annulus, &eps), sweep(&two, &eps));
    (
        a.iter().all(|&c| c == 0) && t.iter().all(|&c| c == 2),
        format!("annulus {a:?} (target 0), two discs {t:?} (target 2)"),
    )
}

/// 5. Perimeters of the unit square and the unit-diameter disc.
fn perimeters() -> Outcome {
    let eps = [0.04, 0.02, 0.01];
    let h = 1e-3;
    let square = PolyRectangle::rect(Rect::new(0.0, 1.0, 0.0, 1.0))
        .unwrap()
        .to_indicator();
    let sq = perimeter_summary(&square, &eps, h, 64).unwrap();
    let dc = perimeter_summary(&make_shape(&disc(0.5)).unwrap(), &eps, h, 64).unwrap();
    let annulus = make_shape(&ShapeSpec::Annulus {
        center: Vec2::ZERO,
        r_in: 0.25,
        r_out: 0.5,
    })
    .unwrap();
    let an = perimeter_summary(&annulus, &eps, h, 16).unwrap();
    // the square sits on the equality Per = Per_∞, so both sides get the 1%
    // estimator tolerance the criterion grants Per_∞
    let tol = 0.01;
    let fixtures = [("square", &sq), ("disc", &dc), ("annulus", &an)];
    let sandwich = fixtures.iter().all(|(_, s)| {
        s.per <= s.per_inf * (1.0 + tol) && s.per_inf <= 2f64.sqrt() * s.per * (1.0 + tol)
    });
    let ok = (sq.per_inf - 4.0).abs() <= 0.04
        && (dc.per_inf - 4.0).abs() <= 0.04
        && (dc.per - PI).abs() <= 0.02 * PI
        && sandwich;
    let detail: Vec<String> = fixtures
        .iter()
        .map(|(name, s)| format!("{name} Per_inf {:.4} Per {:.4}", s.per_inf, s.per))
        .collect();
    (
        ok,
        format!(
            "{}; sandwich {} (tolerance {tol})",
            detail.join(", "),
            if sandwich { "holds" } else { "violated" }
        ),
    )
}

/// Fine truth sets at mesh 1 on a 257² grid, kept 40 pixels off the border.
fn random_truth(rng: &mut ChaCha8Rng, n: usize) -> BitGrid {
    let lat = Lattice::new(1.0, Vec2::ZERO, n, n).unwrap();
    let lo = 40.0;
    let hi = n as f64 - 1.0 - lo;
    let inner = move |i: usize, j: usize| {
        let (x, y) = (i as f64, j as f64);
        x >= lo && x <= hi && y >= lo && y <= hi
    };
    if rng.random_bool(0.5) {
        let discs: Vec<(f64, f64, f64)> = (0..rng.random_range(1..12))
            .map(|_| {
                (
                    rng.random_range(lo..hi),
                    rng.random_range(lo..hi),
                    rng.random_range(0.5..30.0),
                )
            })
            .collect();
        BitGrid::from_fn(lat, |i, j| {
            inner(i, j)
                && discs
                    .iter()
                    .any(|&(x, y, r)| (i as f64 - x).powi(2) + (j as f64 - y).powi(2) <= r * r)
        })
    } else {
        let bumps: Vec<(f64, f64, f64, f64)> = (0..rng.random_range(2..10))
            .map(|_| {
                (
                    rng.random_range(lo..hi),
                    rng.random_range(lo..hi),
                    rng.random_range(3.0..30.0),
                    rng.random_range(-0.5..1.0),
                )
            })
            .collect();
        let t: f64 = rng.random_range(0.1..0.8);
        BitGrid::from_fn(lat, |i, j| {
            let f: f64 = bumps
                .iter()
                .map(|&(x, y, s, a)| {
                    a * (-((i as f64 - x).powi(2) + (j as f64 - y).powi(2)) / (2.0 * s * s)).exp()
                })
                .sum();
            inner(i, j) && f >= t
        })
    }
}

/// Rectangle or L-shaped window with edges on fine pixel boundaries.
fn random_window(rng: &mut ChaCha8Rng, n: usize) -> PolyRectangle {
    let mut c = |a: usize, b: usize| rng.random_range(a..b) as f64 + 0.5;
    let (x0, y0) = (c(20, 90), c(20, 90));
    let (x1, y1) = (c(160, n - 20), c(160, n - 20));
    let xm = c(x0 as usize + 10, x1 as usize - 10);
    let ym = c(y0 as usize + 10, y1 as usize - 10);
    let yb = c(y0 as usize + 5, ym as usize - 2);
    if rng.random_bool(0.5) {
        PolyRectangle::rect(Rect::new(x0, x1, y0, y1)).unwrap()
    } else {
        PolyRectangle::new(vec![Rect::new(x0, x1, y0, ym), Rect::new(x0, xm, yb, y1)])
            .unwrap_or_else(|_| PolyRectangle::rect(Rect::new(x0, x1, y0, y1)).unwrap())
    }
}

/// 6. Component bounds on randomized truth sets.
fn component_bounds() -> Outcome {
    let n = 257;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut trials, mut failures, mut first) = (0, 0, None);
    let (mut tight, mut half_open_excess) = (0, 0);
    for t in 0..500 {
        let truth = random_truth(&mut rng, n);
        let window = random_window(&mut rng, n);
        for k in [4.0, 8.0, 16.0] {
            for w in [None, Some(&window)] {
                let r = verify_bounds(&truth, k, w).unwrap();
                trials += 1;
                if r.num_components_digitized > r.num_components_truth {
                    tight += 1;
                }
                if r.num_components_half_open > r.bound_rhs {
                    half_open_excess += 1;
                }
                if !r.all_hold {
                    failures += 1;
                    first.get_or_insert(format!("truth {t}, k {k}: {r:?}"));
                }
            }
        }
    }
    (
        failures == 0,
        format!(
            "{trials} checks, {failures} violations, {tight} with component inflation, \
             {half_open_excess} exceeded with half-open pixels{}",
            first.map(|f| format!("; first: {f}")).unwrap_or_default()
        ),
    )
}

fn unit_square_model(level: f64) -> ShotNoiseModel {
    serde_json::from_str(&format!(
        r#"{{"intensity":1.0, "grains":[{{"rects":[[0,1,0,1]],"p":1.0}}], "marks":[{{"value":1.0,"p":1.0}}], "lambda":{level}}}"#
    ))
    .unwrap()
}

/// 7. Shot-noise closed form against Monte Carlo.
fn shot_noise() -> Outcome {
    let v = PolyRectangle::rect(Rect::new(0.0, 10.0, 0.0, 10.0)).unwrap();
    let e1 = (-1.0f64).exp();
    let m15 = unit_square_model(1.5);
    let cf15 = mean_chi_closed_form(&m15, &v).unwrap();
    let mc15 = mc_mean_chi(&m15, &v, 2000, 7_000).unwrap();
    let ok15 =
        (cf15 - (1.0 + 118.0 * e1)).abs() < 1e-9 && (mc15.mean - cf15).abs() <= 3.0 * mc15.stderr;

    let m05 = unit_square_model(0.5);
    let target = 1.0 - 81.0 * e1;
    let cf05 = boolean_mean_chi(&m05, &v).unwrap();
    let census = mean_chi_corner_census(&m05, &v).unwrap();
    let mc05 = mc_mean_chi(&m05, &v, 2000, 7_500).unwrap();
    let ok05 = (cf05 - target).abs() < 1e-9 && (mc05.mean - target).abs() <= 3.0 * mc05.stderr;
    (
        ok15 && ok05,
        format!(
            "λ=1.5: closed form {cf15:.4}, mc {:.4} ± {:.4} [{}]; λ=0.5: target {target:.4}, mc {:.4} ± {:.4} [{}] (corner census {census:.4})",
            mc15.mean,
            mc15.stderr,
            if ok15 { "pass" } else { "FAIL" },
            mc05.mean,
            mc05.stderr,
            if ok05 { "pass" } else { "FAIL" },
        ),
    )
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> [f64; 3] {
    for c in 0..3 {
        let p = (c..3)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..3 {
            let f = a[r][c] / a[c][c];
            let pivot = a[c];
            for (x, p) in a[r][c..].iter_mut().zip(&pivot[c..]) {
                *x -= f * p;
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = [0.0; 3];
    for r in (0..3).rev() {
        x[r] = (b[r] - (r + 1..3).map(|k| a[r][k] * x[k]).sum::<f64>()) / a[r][r];
    }
    x
}

/// 8. Stationary decomposition, closed-form and Monte Carlo paths.
fn stationary() -> Outcome {
    let m = unit_square_model(1.5);
    let d = closed_form_densities(&m).unwrap();
    let mut a = [[0.0; 3]; 3];
    let mut rhs = [0.0; 3];
    for (k, (w, h)) in [(1.0, 4.0), (4.0, 1.0), (2.0, 2.0)].into_iter().enumerate() {
        let win = PolyRectangle::rect(Rect::new(0.0, w, 0.0, h)).unwrap();
        let f = polyrect_features(&win);
        a[k] = [f.vol, f.per2 / 4.0, f.per1 / 4.0];
        rhs[k] = mean_chi_closed_form(&m, &win).unwrap() - f.chi as f64 * d.vol_bar;
    }
    let x = solve3(a, rhs);
    let err = (x[0] - d.chi_bar)
        .abs()
        .max((x[1] - d.per_bar_u1).abs())
        .max((x[2] - d.per_bar_u2).abs());
    let linear_ok = err <= 1e-9;

    let e1 = (-1.0f64).exp();
    // the pattern estimator's χ̄ bias is about −ε·χ̄; ε = 0.0025 keeps it
    // under one standard error at 400 replicates
    let s = estimate_stationary_densities(&m, 0.0025, Rect::new(0.0, 10.0, 0.0, 10.0), 400, 8_000)
        .unwrap();
    let chi_ok = (s.chi_bar - e1).abs() <= 3.0 * s.chi_bar_stderr;
    let vol_ok = (s.vol_bar - (1.0 - 2.0 * e1)).abs() <= 3.0 * s.vol_bar_stderr;
    (
        linear_ok && chi_ok && vol_ok,
        format!(
            "linear system max error {err:.2e}; χ̄ {:.4} ± {:.4} (target {e1:.4}); Vol̄ {:.4} ± {:.4} (target {:.4})",
            s.chi_bar,
            s.chi_bar_stderr,
            s.vol_bar,
            s.vol_bar_stderr,
            1.0 - 2.0 * e1
        ),
    )
}

/// 9. Opening of a disc by a smaller radius changes only a thin band.
fn opening_band() -> Outcome {
    let (h, r, radius) = (2e-3, 0.2, 0.5);
    let bound = 4.0 * PI / h * 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut worst_band, mut worst_count, mut ok) = (0.0f64, 0u64, true);
    for _ in 0..6 {
        let c = Vec2::new(
            rng.random_range(-0.5..0.5) * h,
            rng.random_range(-0.5..0.5) * h,
        );
        let set = make_shape(&ShapeSpec::Disc {
            center: c,
            r: radius,
        })
        .unwrap();
        let lat = Lattice::covering(&set.bounding_box(), h, 8).unwrap();
        let g = digitize(&set, &lat, Vec2::ZERO);
        let eroded = morph(&g, r, MorphOp::Erode).unwrap().grid;
        let opened = morph(&eroded, r, MorphOp::Dilate).unwrap().grid;
        let mut count = 0u64;
        for j in 0..g.ny() {
            for i in 0..g.nx() {
                if g.get(i, j) != opened.get(i, j) {
                    count += 1;
                    let p = lat.point(i as isize, j as isize);
                    worst_band = worst_band.max(((p - c).norm() - radius).abs() / h);
                }
            }
        }
        worst_count = worst_count.max(count);
        ok &= worst_band <= 2.0 && (count as f64) <= bound;
    }
    (
        ok,
        format!("max band {worst_band:.2} pixels (≤ 2), max differing bits {worst_count} (≤ {bound:.0})"),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("exhaustive 4x4 discrete equivalence", exhaustive_masks),
        ("discrete bicovariogram identity", discrete_bicovariogram),
        ("disc Euler characteristic", disc_chi),
        ("annulus and two-disc plateaus", plateaus),
        ("perimeters", perimeters),
        ("component-bound stress", component_bounds),
        ("shot-noise closed form vs Monte Carlo", shot_noise),
        ("stationary decomposition", stationary),
        ("opening band", opening_band),
    ];
    let only: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let id = k + 1;
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let t = Instant::now();
        let (pass, detail) = run();
        println!(
            "criterion {id} {name}: {} ({detail}) [{:.1}s]",
            if pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
        failed += usize::from(!pass);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
