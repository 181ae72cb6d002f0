//! Monte Carlo checks of the stationary decomposition of windowed
//! functionals of shot-noise level sets.

use eulergram::{
    closed_form_densities, corner_census_densities, mc_mean_chi, mean_chi_corner_census,
    polyrect_features, McSummary, PolyRectangle, Rect, ShotNoiseModel, Vec2,
};

fn model(level: f64) -> ShotNoiseModel {
    serde_json::from_str(&format!(
        r#"{{"intensity": 0.8,
            "grains": [{{"rects": [[0, 1, 0, 1]], "p": 0.5}},
                       {{"rects": [[0, 2, 0, 0.5]], "p": 0.5}}],
            "marks": [{{"value": 1.0, "p": 0.6}}, {{"value": 2.0, "p": 0.4}}],
            "lambda": {level}}}"#
    ))
    .unwrap()
}

fn l_window() -> PolyRectangle {
    PolyRectangle::new(vec![
        Rect::new(0.0, 6.0, 0.0, 3.0),
        Rect::new(0.0, 3.0, 2.0, 6.0),
    ])
    .unwrap()
}

fn mean_se(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let m = xs.clone().sum::<f64>() / n;
    let var = xs.map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn run(level: f64, w: &PolyRectangle, seed: u64) -> McSummary {
    mc_mean_chi(&model(level), w, 1500, seed).unwrap()
}

#[test]
fn translated_window_has_the_same_mean_chi() {
    let w = l_window();
    let a = run(1.5, &w, 11);
    let b = run(1.5, &w.translate(Vec2::new(2.5, -1.25)), 12);
    let tol = 4.0 * (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
    assert!(
        (a.mean - b.mean).abs() <= tol,
        "{} vs {} (tol {tol})",
        a.mean,
        b.mean
    );
}

#[test]
fn mean_volume_is_area_times_volume_density() {
    let w = l_window();
    let s = run(1.5, &w, 21);
    let (m, se) = mean_se(s.replicates.iter().map(|r| r.vol));
    let expect = polyrect_features(&w).vol * closed_form_densities(&model(1.5)).unwrap().vol_bar;
    assert!((m - expect).abs() <= 4.0 * se, "{m} ± {se} vs {expect}");
}

#[test]
fn mean_perimeter_decomposes_over_window_features() {
    for level in [0.5, 1.5, 2.5] {
        let w = l_window();
        let s = run(level, &w, 31);
        let (m, se) = mean_se(s.replicates.iter().map(|r| r.per_inf));
        let d = closed_form_densities(&model(level)).unwrap();
        let f = polyrect_features(&w);
        let expect = f.vol * (d.per_bar_u1 + d.per_bar_u2) + (f.per1 + f.per2) * d.vol_bar;
        assert!(
            (m - expect).abs() <= 4.0 * se,
            "level {level}: {m} ± {se} vs {expect}"
        );
    }
}

#[test]
fn corner_census_matches_monte_carlo() {
    for level in [0.5, 1.5, 2.5] {
        let w = l_window();
        let s = run(level, &w, 41);
        let expect = mean_chi_corner_census(&model(level), &w).unwrap();
        assert!(
            (s.mean - expect).abs() <= 4.0 * s.stderr,
            "level {level}: {} ± {} vs {expect}",
            s.mean,
            s.stderr
        );
    }
}

#[test]
fn census_and_closed_form_share_perimeter_and_volume_densities() {
    for level in [0.5, 1.5, 2.5] {
        let a = closed_form_densities(&model(level)).unwrap();
        let b = corner_census_densities(&model(level)).unwrap();
        assert_eq!(
            (a.per_bar_u1, a.per_bar_u2, a.vol_bar),
            (b.per_bar_u1, b.per_bar_u2, b.vol_bar)
        );
    }
}
