use std::fmt::Write as _;

use eulergram::entanglement::PairOptions;
use eulergram::{
    boolean_mean_chi, chi_bicovariogram, chi_vef, closed_form_densities, closed_form_terms,
    config_counts, corner_census_densities, detect_boundary_pairs, detect_interior_pairs, digitize,
    estimate_stationary_densities, label_components, make_shape, mc_mean_chi, mean_chi_closed_form,
    mean_chi_corner_census, perimeter_summary, pixel_aligned_window, verify_bounds, BitGrid,
    BoundReport, ConfigCounts, IndicatorSet, Lattice, Phase, PolyRectangle, Vec2,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{
    check, check_schedule, parse, BoundsConfig, ChiConfig, DensitiesConfig, PerimeterConfig,
    ShotnoiseConfig, SweepConfig, TruthSpec,
};
use crate::error::{module, CliError};
use crate::report::Outcome;

pub fn run(command: &str, text: &str) -> Result<Outcome, CliError> {
    match command {
        "chi" => chi(parse(text)?),
        "sweep" => sweep(parse(text)?),
        "perimeter" => perimeter(parse(text)?),
        "bounds" => bounds(parse(text)?),
        "shotnoise" => shotnoise(parse(text)?),
        "densities" => densities(parse(text)?),
        other => unreachable!("unknown subcommand {other}"),
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("config serializes")
}

fn build_shape(spec: &eulergram::ShapeSpec) -> Result<IndicatorSet, CliError> {
    make_shape(spec).map_err(module("shapes", "building the shape"))
}

fn digitize_at(
    set: &IndicatorSet,
    eps: f64,
    margin: usize,
    offset: Vec2,
) -> Result<BitGrid, CliError> {
    let lat = Lattice::covering(&set.bounding_box(), eps, margin)
        .map_err(module("lattice", format!("lattice of mesh {eps}")))?;
    Ok(digitize(set, &lat, offset))
}

/// Binary PGM, set pixels white, top row first.
fn pgm(grid: &BitGrid) -> Vec<u8> {
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut out = format!("P5\n{nx} {ny}\n255\n").into_bytes();
    for j in (0..ny).rev() {
        out.extend((0..nx).map(|i| if grid.get(i, j) { 255u8 } else { 0 }));
    }
    out
}

#[derive(Debug, Serialize)]
struct GridSummary {
    nx: usize,
    ny: usize,
    admissible: bool,
    config_counts: ConfigCounts,
    /// `None` when X-configurations make the local count ambiguous.
    chi_local: Option<i64>,
    chi_vef: i64,
    components: usize,
    bounded_holes: usize,
}

fn summarize(grid: &BitGrid) -> Result<GridSummary, CliError> {
    let counts = config_counts(grid).map_err(module("topology", "configuration counts"))?;
    let set = label_components(grid, Phase::Set).map_err(module("topology", "labeling the set"))?;
    let holes = label_components(grid, Phase::Complement)
        .map_err(module("topology", "labeling the complement"))?;
    Ok(GridSummary {
        nx: grid.nx(),
        ny: grid.ny(),
        admissible: counts.is_admissible(),
        config_counts: counts,
        chi_local: counts.is_admissible().then(|| counts.chi()),
        chi_vef: chi_vef(grid),
        components: set.num_components,
        bounded_holes: holes.num_bounded,
    })
}

fn chi(cfg: ChiConfig) -> Result<Outcome, CliError> {
    check(cfg.epsilon > 0.0 && cfg.epsilon.is_finite(), || {
        format!("epsilon must be positive, got {}", cfg.epsilon)
    })?;
    check(cfg.margin >= 1, || "margin must be at least 1".into())?;
    let set = build_shape(&cfg.shape)?;
    let grid = digitize_at(&set, cfg.epsilon, cfg.margin, cfg.offset)?;
    let summary = summarize(&grid)?;
    let mut files = Vec::new();
    if cfg.dump_grid {
        files.push(("grid.pgm".to_string(), pgm(&grid)));
    }
    Ok(Outcome {
        config: to_value(&cfg),
        seed: None,
        results: to_value(&summary),
        files,
    })
}

#[derive(Debug, Serialize)]
struct SweepRow {
    epsilon: f64,
    #[serde(flatten)]
    grid: GridSummary,
    chi_bicovariogram: Option<f64>,
}

/// Longest run of equal admissible `chi_local` values ending at the finest mesh.
#[derive(Debug, Serialize)]
struct Plateau {
    value: i64,
    coarsest_epsilon: f64,
    length: usize,
}

fn plateau(rows: &[SweepRow]) -> Option<Plateau> {
    let last = rows.last()?.grid.chi_local?;
    let length = rows
        .iter()
        .rev()
        .take_while(|r| r.grid.chi_local == Some(last))
        .count();
    (length >= 2).then(|| Plateau {
        value: last,
        coarsest_epsilon: rows[rows.len() - length].epsilon,
        length,
    })
}

fn sweep(cfg: SweepConfig) -> Result<Outcome, CliError> {
    check_schedule(&cfg.epsilons)?;
    if let Some(h) = cfg.quad_mesh {
        check(h > 0.0 && h < cfg.epsilons[cfg.epsilons.len() - 1], || {
            format!("quad_mesh must be positive and below every epsilon, got {h}")
        })?;
    }
    let shape = build_shape(&cfg.shape)?;
    let set = match &cfg.window {
        Some(w) => shape.intersection(&w.to_indicator()),
        None => shape,
    };
    let mut rows = Vec::new();
    for &eps in &cfg.epsilons {
        let grid = digitize_at(&set, eps, 2, cfg.offset)?;
        let continuum = cfg
            .quad_mesh
            .map(|h| chi_bicovariogram(&set, eps, h))
            .transpose()
            .map_err(module(
                "variogram",
                format!("bicovariogram at epsilon {eps}"),
            ))?;
        rows.push(SweepRow {
            epsilon: eps,
            grid: summarize(&grid)?,
            chi_bicovariogram: continuum,
        });
    }
    let mut csv = String::from(
        "epsilon,admissible,chi_local,chi_vef,components,bounded_holes,chi_bicovariogram\n",
    );
    for r in &rows {
        let opt = |v: Option<String>| v.unwrap_or_default();
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            r.epsilon,
            r.grid.admissible,
            opt(r.grid.chi_local.map(|c| c.to_string())),
            r.grid.chi_vef,
            r.grid.components,
            r.grid.bounded_holes,
            opt(r.chi_bicovariogram.map(|c| c.to_string())),
        );
    }
    let results = json!({ "plateau": plateau(&rows), "rows": rows });
    Ok(Outcome {
        config: to_value(&cfg),
        seed: None,
        results,
        files: vec![("sweep.csv".into(), csv.into_bytes())],
    })
}

fn perimeter(cfg: PerimeterConfig) -> Result<Outcome, CliError> {
    check_schedule(&cfg.epsilons)?;
    let set = match (&cfg.shape, &cfg.polyrect) {
        (Some(s), None) => build_shape(s)?,
        (None, Some(p)) => p.to_indicator(),
        _ => {
            return Err(CliError::ConfigInvalid(
                "give exactly one of shape and polyrect".into(),
            ))
        }
    };
    let s = perimeter_summary(&set, &cfg.epsilons, cfg.quad_mesh, cfg.n_directions)
        .map_err(module("variogram", "perimeter summary"))?;
    let mut csv = String::from("angle,ux,uy,extrapolated");
    for e in &cfg.epsilons {
        let _ = write!(csv, ",eps_{e}");
    }
    csv.push('\n');
    for d in &s.directional {
        let _ = write!(
            csv,
            "{},{},{},{}",
            d.direction.y.atan2(d.direction.x),
            d.direction.x,
            d.direction.y,
            d.extrapolated
        );
        for v in &d.values {
            let _ = write!(csv, ",{v}");
        }
        csv.push('\n');
    }
    let results = json!({
        "per_u1": s.per_u1,
        "per_u2": s.per_u2,
        "per_inf": s.per_inf,
        "per": s.per,
        "n_directions": s.n_directions,
        "sandwich_holds": s.per <= s.per_inf && s.per_inf <= 2f64.sqrt() * s.per,
    });
    Ok(Outcome {
        config: to_value(&cfg),
        seed: None,
        results,
        files: vec![("perimeter.csv".into(), csv.into_bytes())],
    })
}

/// Union of random discs on a `size²` grid of mesh 1, `margin` pixels off the border.
fn random_truth(rng: &mut ChaCha8Rng, size: usize, margin: usize) -> BitGrid {
    let lat = Lattice::new(1.0, Vec2::ZERO, size, size).expect("positive grid size");
    let (lo, hi) = (margin as f64, (size - 1 - margin) as f64);
    let discs: Vec<(f64, f64, f64)> = (0..rng.random_range(1..12))
        .map(|_| {
            let (x, y) = (rng.random_range(lo..hi), rng.random_range(lo..hi));
            // radius bounded by the margin so discs stay off the border
            let r = rng.random_range(0.5..(hi - lo) / 8.0);
            (
                x,
                y,
                r.min(x - lo).min(hi - x).min(y - lo).min(hi - y).max(0.5),
            )
        })
        .collect();
    BitGrid::from_fn(lat, |i, j| {
        let (px, py) = (i as f64, j as f64);
        px >= lo
            && px <= hi
            && py >= lo
            && py <= hi
            && discs
                .iter()
                .any(|&(x, y, r)| (px - x).powi(2) + (py - y).powi(2) <= r * r)
    })
}

fn bound_row(csv: &mut String, trial: usize, k: usize, windowed: bool, r: &BoundReport) {
    let _ = writeln!(
        csv,
        "{trial},{k},{windowed},{},{},{},{},{},{},{},{},{},{},{},{}",
        r.num_components_digitized,
        r.num_components_truth,
        r.n_interior,
        r.n_boundary,
        r.corners,
        r.bound_rhs,
        r.holds,
        r.euler.lhs,
        r.euler.rhs,
        r.x_configurations,
        r.num_components_half_open,
        r.all_hold
    );
}

fn bounds(cfg: BoundsConfig) -> Result<Outcome, CliError> {
    check(
        !cfg.factors.is_empty() && cfg.factors.iter().all(|&k| k >= 4),
        || {
            format!(
                "factors must be integers of at least 4, got {:?}",
                cfg.factors
            )
        },
    )?;
    let kmax = *cfg.factors.iter().max().expect("nonempty");
    let mut truths = Vec::new();
    let mut seed = None;
    let mut files = Vec::new();
    match &cfg.truth {
        TruthSpec::Shape {
            shape,
            fine_epsilon,
        } => {
            check(*fine_epsilon > 0.0 && fine_epsilon.is_finite(), || {
                format!("fine_epsilon must be positive, got {fine_epsilon}")
            })?;
            let set = build_shape(shape)?;
            let truth = digitize_at(&set, *fine_epsilon, 2 * kmax + 2, Vec2::ZERO)?;
            if cfg.dump_grid {
                files.push(("truth.pgm".into(), pgm(&truth)));
            }
            truths.push((truth, *fine_epsilon));
        }
        TruthSpec::Random {
            trials,
            size,
            seed: s,
        } => {
            let margin = 40.max(2 * kmax + 2);
            check(*size >= 2 * margin + 16, || {
                format!(
                    "size must be at least {} for these factors, got {size}",
                    2 * margin + 16
                )
            })?;
            check(*trials >= 1, || "trials must be at least 1".into())?;
            seed = Some(*s);
            let mut rng = ChaCha8Rng::seed_from_u64(*s);
            truths.extend((0..*trials).map(|_| (random_truth(&mut rng, *size, margin), 1.0)));
        }
    }

    let mut csv = String::from(
        "trial,k,windowed,digitized,truth,n_interior,n_boundary,corners,rhs,holds,\
         euler_lhs,euler_rhs,x_configurations,half_open_components,all_hold\n",
    );
    let (mut checks, mut violations, mut first) = (0usize, 0usize, None);
    let single = truths.len() == 1;
    for (t, (truth, fine)) in truths.iter().enumerate() {
        let window = cfg.window.map(|r| pixel_aligned_window(truth, r));
        for &k in &cfg.factors {
            let coarse = k as f64 * fine;
            let err = || module("entanglement", format!("trial {t}, factor {k}"));
            for w in [None, window.as_ref()]
                .into_iter()
                .take(1 + window.is_some() as usize)
            {
                let r = verify_bounds(truth, coarse, w).map_err(err())?;
                checks += 1;
                if !r.all_hold {
                    violations += 1;
                    first.get_or_insert_with(
                        || json!({"trial": t, "k": k, "windowed": w.is_some(), "report": r}),
                    );
                }
                bound_row(&mut csv, t, k, w.is_some(), &r);
            }
            if single {
                files.extend(pair_files(truth, coarse, k, window.as_ref()).map_err(err())?);
            }
        }
    }
    files.insert(0, ("bounds.csv".into(), csv.into_bytes()));
    let results = json!({
        "checks": checks,
        "violations": violations,
        "all_hold": violations == 0,
        "first_violation": first,
    });
    Ok(Outcome {
        config: to_value(&cfg),
        seed,
        results,
        files,
    })
}

fn pair_files(
    truth: &BitGrid,
    coarse: f64,
    k: usize,
    window: Option<&PolyRectangle>,
) -> Result<Vec<(String, Vec<u8>)>, eulergram::EntanglementError> {
    let opts = PairOptions {
        complement: false,
        window,
    };
    let mut out = vec![(
        format!("pairs_interior_k{k}.csv"),
        detect_interior_pairs(truth, coarse, opts)?
            .to_csv()
            .into_bytes(),
    )];
    if let Some(w) = window {
        out.push((
            format!("pairs_boundary_k{k}.csv"),
            detect_boundary_pairs(truth, coarse, w, opts)?
                .to_csv()
                .into_bytes(),
        ));
    }
    Ok(out)
}

fn shotnoise(cfg: ShotnoiseConfig) -> Result<Outcome, CliError> {
    let mc = mc_mean_chi(&cfg.model, &cfg.window, cfg.replicates, cfg.seed)
        .map_err(module("randomsets", "Monte Carlo mean"))?;
    let predictions = [
        ("closed_form", mean_chi_closed_form(&cfg.model, &cfg.window)),
        (
            "corner_census",
            mean_chi_corner_census(&cfg.model, &cfg.window),
        ),
        ("boolean", boolean_mean_chi(&cfg.model, &cfg.window)),
    ];
    let mut csv = String::from("method,value,stderr,deviation_se,within_3se\n");
    let _ = writeln!(csv, "monte_carlo,{},{},,", mc.mean, mc.stderr);
    let mut rows = Vec::new();
    for (name, p) in predictions {
        match p {
            Ok(v) => {
                let dev = (mc.mean - v).abs() / mc.stderr;
                let _ = writeln!(csv, "{name},{v},,{dev},{}", dev <= 3.0);
                rows.push(json!({"method": name, "value": v, "deviation_se": dev, "within_3se": dev <= 3.0}));
            }
            Err(e) => {
                rows.push(json!({"method": name, "value": null, "unavailable": e.to_string()}))
            }
        }
    }
    let results = json!({
        "monte_carlo": {"mean": mc.mean, "stderr": mc.stderr, "replicates": mc.replicates.len()},
        "predictions": rows,
        "terms": closed_form_terms(&cfg.model).ok(),
    });
    Ok(Outcome {
        config: to_value(&cfg),
        seed: Some(cfg.seed),
        results,
        files: vec![
            ("shotnoise.csv".into(), csv.into_bytes()),
            ("replicates.csv".into(), mc.to_csv().into_bytes()),
        ],
    })
}

fn densities(cfg: DensitiesConfig) -> Result<Outcome, CliError> {
    let s = estimate_stationary_densities(
        &cfg.model,
        cfg.epsilon,
        cfg.window,
        cfg.replicates,
        cfg.seed,
    )
    .map_err(module("randomsets", "stationary densities"))?;
    let closed = closed_form_densities(&cfg.model).ok();
    let census = corner_census_densities(&cfg.model).ok();
    let mut csv = String::from("quantity,estimate,stderr,closed_form,corner_census\n");
    let quantities = [
        ("chi_bar", s.chi_bar, s.chi_bar_stderr),
        ("per_bar_u1", s.per_bar_u1, s.per_bar_u1_stderr),
        ("per_bar_u2", s.per_bar_u2, s.per_bar_u2_stderr),
        ("vol_bar", s.vol_bar, s.vol_bar_stderr),
    ];
    for (k, (name, est, se)) in quantities.into_iter().enumerate() {
        let pick = |d: &Option<eulergram::DensityCoefficients>| {
            d.map(|d| [d.chi_bar, d.per_bar_u1, d.per_bar_u2, d.vol_bar][k].to_string())
                .unwrap_or_default()
        };
        let _ = writeln!(csv, "{name},{est},{se},{},{}", pick(&closed), pick(&census));
    }
    let results = json!({ "estimate": s, "closed_form": closed, "corner_census": census });
    Ok(Outcome {
        config: to_value(&cfg),
        seed: Some(cfg.seed),
        results,
        files: vec![("densities.csv".into(), csv.into_bytes())],
    })
}
