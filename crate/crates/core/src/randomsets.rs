//! Shot-noise fields with polyrectangular grains and their level sets
//! `F = {f ≥ λ}`: simulation, exact per-realization functionals, closed-form
//! means and stationary densities.
//!
//! The field is `f(y) = Σ m·1{y ∈ x + W}` over a Poisson process of germs `x`
//! with i.i.d. grains `W` and marks `m`. With unit marks and `λ ∈ (0, 1)` the
//! level set is a boolean model.

use std::fmt::Write as _;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Poisson;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arrangement::{Arrangement, CellStats};
use crate::geometry::{Rect, Vec2};
use crate::shapes::{polyrect_features, PolyRectangle};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RandomSetError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("grain law has no bounding box; set a cutoff quantile")]
    UnboundedGrain,
    #[error("arrangement coordinates closer than 1e-12 (gap {gap:e}); resample or jitter germ locations by less than 1e-9")]
    DegenerateArrangement { gap: f64 },
    #[error("no compound-Poisson evaluator for this mark law (atomic marks only)")]
    UnsupportedMarkLaw,
    #[error("not a boolean model: {0}")]
    NotBooleanRegime(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

type Result<T> = std::result::Result<T, RandomSetError>;

/// Law of a positive side length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthLaw {
    Constant(f64),
    Uniform { lo: f64, hi: f64 },
    Exponential { rate: f64 },
}

impl LengthLaw {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            LengthLaw::Constant(v) => v.is_finite() && v > 0.0,
            LengthLaw::Uniform { lo, hi } => {
                lo.is_finite() && hi.is_finite() && lo > 0.0 && hi > lo
            }
            LengthLaw::Exponential { rate } => rate.is_finite() && rate > 0.0,
        };
        ok.then_some(())
            .ok_or_else(|| RandomSetError::InvalidModel(format!("bad side-length law {self:?}")))
    }

    /// Upper end of the support after truncation at quantile `q`.
    fn upper(&self, q: Option<f64>) -> Option<f64> {
        match *self {
            LengthLaw::Constant(v) => Some(v),
            LengthLaw::Uniform { hi, .. } => Some(hi),
            LengthLaw::Exponential { rate } => q.map(|q| -(1.0 - q).ln() / rate),
        }
    }

    fn lower(&self) -> f64 {
        match *self {
            LengthLaw::Constant(v) => v,
            LengthLaw::Uniform { lo, .. } => lo,
            LengthLaw::Exponential { .. } => 0.0,
        }
    }

    /// Mean of the (truncated) law.
    fn mean(&self, q: Option<f64>) -> f64 {
        match *self {
            LengthLaw::Constant(v) => v,
            LengthLaw::Uniform { lo, hi } => 0.5 * (lo + hi),
            LengthLaw::Exponential { rate } => match q {
                None => 1.0 / rate,
                Some(q) => {
                    let c = -(1.0 - q).ln() / rate;
                    1.0 / rate - c * (1.0 - q) / q
                }
            },
        }
    }

    /// Probability mass removed by the truncation.
    fn truncated_mass(&self, q: Option<f64>) -> f64 {
        match (self, q) {
            (LengthLaw::Exponential { .. }, Some(q)) => 1.0 - q,
            _ => 0.0,
        }
    }

    fn sample<R: Rng>(&self, q: Option<f64>, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        match *self {
            LengthLaw::Constant(v) => v,
            LengthLaw::Uniform { lo, hi } => lo + (hi - lo) * u,
            LengthLaw::Exponential { rate } => {
                let v = -(1.0 - u * q.unwrap_or(1.0)).ln() / rate;
                // u = 0 would give an empty grain
                v.max(f64::MIN_POSITIVE)
            }
        }
    }
}

/// Rectangles `[0, A] × [0, B]` with independent sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RectFamily {
    pub a: LengthLaw,
    pub b: LengthLaw,
    /// Quantile at which unbounded side laws are truncated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff_quantile: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrainAtom {
    #[serde(flatten)]
    pub grain: PolyRectangle,
    pub p: f64,
}

/// Grain law `μ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GrainLaw {
    Mixture(Vec<GrainAtom>),
    Family { rect_family: RectFamily },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkAtom {
    pub value: f64,
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkFamily {
    Exponential { rate: f64 },
    Uniform { lo: f64, hi: f64 },
}

/// Mark law `ν`, with `ν({0}) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MarkLaw {
    Atoms(Vec<MarkAtom>),
    Family(MarkFamily),
}

/// Expected functionals of one grain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrainMoments {
    pub chi: f64,
    pub per1: f64,
    pub per2: f64,
    pub vol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelConfig {
    intensity: f64,
    grains: GrainLaw,
    marks: MarkLaw,
    lambda: f64,
}

/// Shot-noise model: germ intensity, grain law `μ`, mark law `ν`, level `λ`.
///
/// JSON form:
/// `{"intensity":1.0, "grains":[{"rects":[[0,1,0,1]],"p":1.0}],
///   "marks":[{"value":1.0,"p":1.0}], "lambda":1.5}`.
/// `grains` may instead be `{"rect_family": {"a": law, "b": law,
/// "cutoff_quantile": q}}` with laws `{"constant": v}`,
/// `{"uniform": {"lo", "hi"}}` or `{"exponential": {"rate"}}`; `marks` may be
/// `{"exponential": {"rate"}}` or `{"uniform": {"lo", "hi"}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelConfig", into = "ModelConfig")]
pub struct ShotNoiseModel {
    intensity: f64,
    grains: GrainLaw,
    marks: MarkLaw,
    level: f64,
}

impl TryFrom<ModelConfig> for ShotNoiseModel {
    type Error = RandomSetError;

    fn try_from(c: ModelConfig) -> Result<Self> {
        ShotNoiseModel::new(c.intensity, c.grains, c.marks, c.lambda)
    }
}

impl From<ShotNoiseModel> for ModelConfig {
    fn from(m: ShotNoiseModel) -> Self {
        ModelConfig {
            intensity: m.intensity,
            grains: m.grains,
            marks: m.marks,
            lambda: m.level,
        }
    }
}

fn check_probabilities(ps: impl Iterator<Item = f64>, what: &str) -> Result<()> {
    let mut total = 0.0;
    let mut n = 0;
    for p in ps {
        if !(p.is_finite() && p >= 0.0) {
            return Err(RandomSetError::InvalidModel(format!(
                "{what} probability {p}"
            )));
        }
        total += p;
        n += 1;
    }
    if n == 0 || (total - 1.0).abs() > 1e-9 {
        return Err(RandomSetError::InvalidModel(format!(
            "{what} probabilities sum to {total}, not 1"
        )));
    }
    Ok(())
}

impl ShotNoiseModel {
    pub fn new(intensity: f64, grains: GrainLaw, marks: MarkLaw, level: f64) -> Result<Self> {
        let bad = |m: String| Err(RandomSetError::InvalidModel(m));
        if !(intensity.is_finite() && intensity >= 0.0) {
            return bad(format!("intensity {intensity}"));
        }
        if !(level.is_finite() && level > 0.0) {
            return bad(format!("level {level} must be positive"));
        }
        match &grains {
            GrainLaw::Mixture(atoms) => {
                check_probabilities(atoms.iter().map(|a| a.p), "grain")?;
                if atoms.iter().any(|a| a.grain.is_empty()) {
                    return bad("empty grain in mixture".into());
                }
            }
            GrainLaw::Family { rect_family: f } => {
                f.a.validate()?;
                f.b.validate()?;
                if let Some(q) = f.cutoff_quantile {
                    if !(q > 0.0 && q < 1.0) {
                        return bad(format!("cutoff quantile {q} outside (0, 1)"));
                    }
                }
            }
        }
        match &marks {
            MarkLaw::Atoms(atoms) => {
                check_probabilities(atoms.iter().map(|a| a.p), "mark")?;
                if let Some(a) = atoms
                    .iter()
                    .find(|a| !(a.value.is_finite() && a.value > 0.0))
                {
                    return bad(format!("mark atom {} must be positive", a.value));
                }
            }
            MarkLaw::Family(MarkFamily::Exponential { rate }) => {
                if !(rate.is_finite() && *rate > 0.0) {
                    return bad(format!("mark rate {rate}"));
                }
            }
            MarkLaw::Family(MarkFamily::Uniform { lo, hi }) => {
                if !(lo.is_finite() && hi.is_finite() && *lo >= 0.0 && hi > lo) {
                    return bad(format!("mark range [{lo}, {hi}]"));
                }
            }
        }
        Ok(ShotNoiseModel {
            intensity,
            grains,
            marks,
            level,
        })
    }

    pub fn intensity(&self) -> f64 {
        self.intensity
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn grains(&self) -> &GrainLaw {
        &self.grains
    }

    pub fn marks(&self) -> &MarkLaw {
        &self.marks
    }

    pub fn with_level(&self, level: f64) -> Result<Self> {
        ShotNoiseModel::new(
            self.intensity,
            self.grains.clone(),
            self.marks.clone(),
            level,
        )
    }

    pub fn with_intensity(&self, intensity: f64) -> Result<Self> {
        ShotNoiseModel::new(
            intensity,
            self.grains.clone(),
            self.marks.clone(),
            self.level,
        )
    }

    /// Smallest `r` with every grain inside `[-r, r]²`.
    pub fn padding(&self) -> Result<f64> {
        match &self.grains {
            GrainLaw::Mixture(atoms) => Ok(atoms
                .iter()
                .map(|a| {
                    let b = a.grain.bbox();
                    [b.x0, b.x1, b.y0, b.y1]
                        .iter()
                        .fold(0.0f64, |m, v| m.max(v.abs()))
                })
                .fold(0.0, f64::max)),
            GrainLaw::Family { rect_family: f } => {
                let q = f.cutoff_quantile;
                match (f.a.upper(q), f.b.upper(q)) {
                    (Some(a), Some(b)) => Ok(a.max(b)),
                    _ => Err(RandomSetError::UnboundedGrain),
                }
            }
        }
    }

    /// `E χ(W₁)`, `E Per₁(W₁)`, `E Per₂(W₁)`, `E Vol(W₁)`.
    pub fn grain_moments(&self) -> GrainMoments {
        match &self.grains {
            GrainLaw::Mixture(atoms) => atoms.iter().fold(
                GrainMoments {
                    chi: 0.0,
                    per1: 0.0,
                    per2: 0.0,
                    vol: 0.0,
                },
                |m, a| {
                    let f = polyrect_features(&a.grain);
                    GrainMoments {
                        chi: m.chi + a.p * f.chi as f64,
                        per1: m.per1 + a.p * f.per1,
                        per2: m.per2 + a.p * f.per2,
                        vol: m.vol + a.p * f.vol,
                    }
                },
            ),
            GrainLaw::Family { rect_family: f } => {
                let q = f.cutoff_quantile;
                let (ea, eb) = (f.a.mean(q), f.b.mean(q));
                // [0,A]×[0,B]: vertical edges have total length 2B
                GrainMoments {
                    chi: 1.0,
                    per1: 2.0 * eb,
                    per2: 2.0 * ea,
                    vol: ea * eb,
                }
            }
        }
    }

    /// Shortest grain edge the law can produce (0 if unbounded below).
    fn min_edge(&self) -> f64 {
        match &self.grains {
            GrainLaw::Mixture(atoms) => atoms
                .iter()
                .flat_map(|a| a.grain.edges().iter().map(|e| e.length()))
                .fold(f64::INFINITY, f64::min),
            GrainLaw::Family { rect_family: f } => f.a.lower().min(f.b.lower()),
        }
    }

    fn sampler(&self) -> Result<Sampler<'_>> {
        let grains = match &self.grains {
            GrainLaw::Mixture(atoms) => GrainSampler::Mixture(
                atoms,
                WeightedIndex::new(atoms.iter().map(|a| a.p))
                    .map_err(|e| RandomSetError::InvalidModel(e.to_string()))?,
            ),
            GrainLaw::Family { rect_family } => {
                self.padding()?;
                GrainSampler::Family(rect_family)
            }
        };
        let marks = match &self.marks {
            MarkLaw::Atoms(atoms) => MarkSampler::Atoms(
                atoms,
                WeightedIndex::new(atoms.iter().map(|a| a.p))
                    .map_err(|e| RandomSetError::InvalidModel(e.to_string()))?,
            ),
            MarkLaw::Family(f) => MarkSampler::Family(*f),
        };
        Ok(Sampler { grains, marks })
    }
}

enum GrainSampler<'a> {
    Mixture(&'a [GrainAtom], WeightedIndex<f64>),
    Family(&'a RectFamily),
}

enum MarkSampler<'a> {
    Atoms(&'a [MarkAtom], WeightedIndex<f64>),
    Family(MarkFamily),
}

struct Sampler<'a> {
    grains: GrainSampler<'a>,
    marks: MarkSampler<'a>,
}

impl Sampler<'_> {
    fn grain<R: Rng>(&self, rng: &mut R) -> PolyRectangle {
        match &self.grains {
            GrainSampler::Mixture(atoms, w) => atoms[w.sample(rng)].grain.clone(),
            GrainSampler::Family(f) => {
                let a = f.a.sample(f.cutoff_quantile, rng);
                let b = f.b.sample(f.cutoff_quantile, rng);
                PolyRectangle::rect(Rect::new(0.0, a, 0.0, b)).expect("positive sides")
            }
        }
    }

    fn mark<R: Rng>(&self, rng: &mut R) -> f64 {
        match &self.marks {
            MarkSampler::Atoms(atoms, w) => atoms[w.sample(rng)].value,
            MarkSampler::Family(MarkFamily::Exponential { rate }) => {
                let u: f64 = rng.random();
                (-(1.0 - u).ln() / rate).max(f64::MIN_POSITIVE)
            }
            MarkSampler::Family(MarkFamily::Uniform { lo, hi }) => {
                let u: f64 = rng.random();
                (lo + (hi - lo) * u).max(f64::MIN_POSITIVE)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Germ {
    pub location: Vec2,
    pub grain: PolyRectangle,
    pub mark: f64,
}

impl Germ {
    /// Disjoint pieces of the translated grain.
    fn pieces(&self) -> impl Iterator<Item = Rect> + '_ {
        self.grain
            .pieces()
            .iter()
            .map(|r| r.translate(self.location))
    }
}

/// One draw of the germ process on a padded domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Realization {
    pub germs: Vec<Germ>,
    /// Padded simulation region.
    pub domain: Rect,
    /// Region on which the field is exact.
    pub observed: Rect,
    /// Mean of the Poisson germ count.
    pub poisson_mean: f64,
    /// Grain-law mass removed by truncation, 0 for bounded laws.
    pub truncation: f64,
}

/// Poisson germs on `domain` dilated by the maximal grain extent, so the
/// field is exact on `domain`. Deterministic in `seed`.
pub fn sample_realization(model: &ShotNoiseModel, domain: Rect, seed: u64) -> Result<Realization> {
    if !(domain.is_finite() && domain.is_proper()) {
        return Err(RandomSetError::InvalidArgument(format!(
            "domain {domain:?}"
        )));
    }
    let pad = model.padding()?;
    let padded = domain.dilate(pad);
    let mean = model.intensity * padded.area();
    let sampler = model.sampler()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = if mean > 0.0 {
        Poisson::new(mean)
            .map_err(|e| RandomSetError::InvalidModel(e.to_string()))?
            .sample(&mut rng) as usize
    } else {
        0
    };
    let germs = (0..n)
        .map(|_| {
            let location = Vec2::new(
                padded.x0 + padded.width() * rng.random::<f64>(),
                padded.y0 + padded.height() * rng.random::<f64>(),
            );
            let grain = sampler.grain(&mut rng);
            let mark = sampler.mark(&mut rng);
            Germ {
                location,
                grain,
                mark,
            }
        })
        .collect();
    let truncation = match &model.grains {
        GrainLaw::Family { rect_family: f } => {
            let q = f.cutoff_quantile;
            1.0 - (1.0 - f.a.truncated_mass(q)) * (1.0 - f.b.truncated_mass(q))
        }
        GrainLaw::Mixture(_) => 0.0,
    };
    Ok(Realization {
        germs,
        domain: padded,
        observed: domain,
        poisson_mean: mean,
        truncation,
    })
}

/// Cell values equal to `λ` up to summation round-off count as `≥ λ`.
fn reaches(value: f64, level: f64) -> bool {
    value >= level - 1e-9 * level.abs().max(1.0)
}

fn field_arrangement(
    real: &Realization,
    frame: Rect,
    extra_x: &[f64],
    extra_y: &[f64],
) -> Result<Arrangement> {
    let rects: Vec<(Rect, f64)> = real
        .germs
        .iter()
        .flat_map(|g| g.pieces().map(move |r| (r, g.mark)))
        .collect();
    let arr = Arrangement::build(&rects, frame, extra_x, extra_y);
    let gap = arr.min_gap();
    if gap < 1e-12 {
        return Err(RandomSetError::DegenerateArrangement { gap });
    }
    Ok(arr)
}

fn check_window(real: &Realization, window: &PolyRectangle) -> Result<()> {
    let b = window.bbox();
    let o = real.observed;
    if window.is_empty() || b.x0 < o.x0 || b.x1 > o.x1 || b.y0 < o.y0 || b.y1 > o.y1 {
        return Err(RandomSetError::InvalidArgument(
            "window must be a non-empty polyrectangle inside the observed domain".into(),
        ));
    }
    Ok(())
}

/// Exact `χ`, `Per₁`, `Per₂` and volume of `{f ≥ λ} ∩ V`.
pub fn level_set_stats(
    real: &Realization,
    level: f64,
    window: &PolyRectangle,
) -> Result<CellStats> {
    check_window(real, window)?;
    let (wx, wy): (Vec<f64>, Vec<f64>) = window
        .rects()
        .iter()
        .flat_map(|r| [(r.x0, r.y0), (r.x1, r.y1)])
        .unzip();
    let arr = field_arrangement(real, window.bbox(), &wx, &wy)?;
    Ok(arr
        .select(|v, c| reaches(v, level) && window.contains(c))
        .stats())
}

/// Exact Euler characteristic of `{f ≥ λ} ∩ V`.
pub fn level_set_chi_exact(real: &Realization, level: f64, window: &PolyRectangle) -> Result<i64> {
    Ok(level_set_stats(real, level, window)?.chi)
}

/// Law of `f(0)` for atomic marks: sorted support with probabilities.
#[derive(Debug, Clone)]
struct CompoundPoisson {
    support: Vec<(f64, f64)>,
}

fn poisson_pmf(mean: f64, tail: f64) -> Vec<f64> {
    if mean == 0.0 {
        return vec![1.0];
    }
    let cap = (mean + 60.0 * mean.sqrt() + 100.0) as usize;
    let (mut out, mut mass, mut lnfact) = (Vec::new(), 0.0, 0.0);
    for n in 0..=cap {
        if n > 0 {
            lnfact += (n as f64).ln();
        }
        let p = (-mean + n as f64 * mean.ln() - lnfact).exp();
        out.push(p);
        mass += p;
        if n as f64 > mean && 1.0 - mass < tail {
            break;
        }
    }
    out
}

fn merge_close(mut v: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(v.len());
    for (x, p) in v {
        match out.last_mut() {
            Some(last) if (x - last.0).abs() <= 1e-12 * x.abs().max(1.0) => last.1 += p,
            _ => out.push((x, p)),
        }
    }
    out
}

impl CompoundPoisson {
    /// `Σ_a v_a N_a` with independent `N_a ~ Poisson(coverage·p_a)`.
    fn new(coverage: f64, atoms: &[MarkAtom]) -> Self {
        let tail = 1e-13 / atoms.len() as f64;
        let mut support = vec![(0.0, 1.0)];
        for a in atoms {
            let pmf = poisson_pmf(coverage * a.p, tail);
            let next = support
                .iter()
                .flat_map(|&(x, p)| {
                    pmf.iter()
                        .enumerate()
                        .map(move |(n, &q)| (x + n as f64 * a.value, p * q))
                })
                .filter(|&(_, p)| p > 0.0)
                .collect();
            support = merge_close(next);
        }
        CompoundPoisson { support }
    }

    /// `P(lo ≤ f(0) < hi)`, boundaries resolved with a relative `1e-12`.
    fn prob(&self, lo: f64, hi: f64) -> f64 {
        let tol = |v: f64| 1e-12 * v.abs().max(1.0);
        let mut s = Kahan::default();
        for &(x, p) in &self.support {
            if x >= lo - tol(lo) && (hi == f64::INFINITY || x < hi - tol(hi)) {
                s.add(p);
            }
        }
        s.sum()
    }

    fn hits(&self, v: f64) -> bool {
        self.support
            .iter()
            .any(|&(x, _)| (x - v).abs() <= 1e-12 * v.abs().max(1.0))
    }
}

/// Probabilities and grain moments entering the closed-form mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormTerms {
    pub intensity: f64,
    /// `P(λ − M₁ ≤ f(0) < λ)`.
    pub p1: f64,
    /// `P(λ − M₁ − M₂ ≤ f(0) < λ − max(M₁, M₂))`.
    pub p2: f64,
    /// `P(λ − max(M₁, M₂) ≤ f(0) < λ)`.
    pub p2_prime: f64,
    /// `P(λ − min(M₁, M₂) ≤ f(0) < λ)`.
    pub p2_prime_min: f64,
    /// `P(f(0) ≥ λ)`.
    pub p_level: f64,
    pub grain: GrainMoments,
    /// `λ` equals an achievable value of the field; the level set then
    /// depends on the closedness convention.
    pub level_is_atom_sum: bool,
}

/// `p₁, p₂, p₂′` by exact compound-Poisson evaluation (atomic marks).
pub fn closed_form_terms(model: &ShotNoiseModel) -> Result<ClosedFormTerms> {
    let MarkLaw::Atoms(atoms) = &model.marks else {
        return Err(RandomSetError::UnsupportedMarkLaw);
    };
    let grain = model.grain_moments();
    let f0 = CompoundPoisson::new(model.intensity * grain.vol, atoms);
    let lam = model.level;
    let (mut p1, mut p2, mut p2p, mut p2m) = (
        Kahan::default(),
        Kahan::default(),
        Kahan::default(),
        Kahan::default(),
    );
    for a in atoms {
        p1.add(a.p * f0.prob(lam - a.value, lam));
        for b in atoms {
            let w = a.p * b.p;
            let (hi, lo) = (a.value.max(b.value), a.value.min(b.value));
            p2.add(w * f0.prob(lam - a.value - b.value, lam - hi));
            p2p.add(w * f0.prob(lam - hi, lam));
            p2m.add(w * f0.prob(lam - lo, lam));
        }
    }
    Ok(ClosedFormTerms {
        intensity: model.intensity,
        p1: p1.sum(),
        p2: p2.sum(),
        p2_prime: p2p.sum(),
        p2_prime_min: p2m.sum(),
        p_level: f0.prob(lam, f64::INFINITY),
        grain,
        level_is_atom_sum: f0.hits(lam),
    })
}

/// Density coefficients of `E χ(F ∩ V)` in `Vol(V)`, `Per(V)` and `χ(V)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityCoefficients {
    pub chi_bar: f64,
    pub per_bar_u1: f64,
    pub per_bar_u2: f64,
    pub vol_bar: f64,
}

impl DensityCoefficients {
    /// `Vol(V)χ̄ + ¼(Per₂(V)Per̄₁ + Per₁(V)Per̄₂) + χ(V)Vol̄`.
    pub fn mean_chi(&self, window: &PolyRectangle) -> f64 {
        let w = polyrect_features(window);
        w.vol * self.chi_bar
            + 0.25 * (w.per2 * self.per_bar_u1 + w.per1 * self.per_bar_u2)
            + w.chi as f64 * self.vol_bar
    }
}

fn densities_with(t: &ClosedFormTerms, crossing: f64) -> DensityCoefficients {
    let (i, g) = (t.intensity, t.grain);
    DensityCoefficients {
        chi_bar: i * t.p1 * g.chi + i * i * crossing * g.per1 * g.per2,
        per_bar_u1: i * t.p1 * g.per1,
        per_bar_u2: i * t.p1 * g.per2,
        vol_bar: t.p_level,
    }
}

/// Coefficients of the closed form
/// `Vol(V)[ι p₁ Eχ(W₁) + ι²(p₂ − p₂′)/2 EPer₁ EPer₂] + χ(V)P(f(0) ≥ λ)
///  + (ι p₁/4)[Per₁(V)EPer₂ + Per₂(V)EPer₁]`, `ι` the germ intensity.
pub fn closed_form_densities(model: &ShotNoiseModel) -> Result<DensityCoefficients> {
    let t = closed_form_terms(model)?;
    Ok(densities_with(&t, 0.5 * (t.p2 - t.p2_prime)))
}

/// `E χ(F ∩ V)` from the closed form above.
pub fn mean_chi_closed_form(model: &ShotNoiseModel, window: &PolyRectangle) -> Result<f64> {
    Ok(closed_form_densities(model)?.mean_chi(window))
}

/// Coefficients from a direct census of level-set corners at crossings of
/// two grain edges: an outward corner needs the south-west quadrant inside
/// both grains and `λ − M₁ − M₂ ≤ f(0) < λ − max(M₁, M₂)`; an inward one
/// needs the north-east quadrant outside both and `λ − min(M₁, M₂) ≤ f(0) < λ`.
/// Either happens at an east-facing edge of one grain meeting a
/// north-facing edge of another, `ι² EPer₁ EPer₂ / 4` times per unit area.
pub fn corner_census_densities(model: &ShotNoiseModel) -> Result<DensityCoefficients> {
    let t = closed_form_terms(model)?;
    Ok(densities_with(&t, 0.25 * (t.p2 - t.p2_prime_min)))
}

/// `E χ(F ∩ V)` from [`corner_census_densities`].
pub fn mean_chi_corner_census(model: &ShotNoiseModel, window: &PolyRectangle) -> Result<f64> {
    Ok(corner_census_densities(model)?.mean_chi(window))
}

/// Boolean-model specialisation: `λ ∈ (0, 1)`, unit marks,
/// `p₁ = exp(−ι EVol(W₁))`,
/// `Vol(V)p₁[ι Eχ − ι² EPer₁ EPer₂/2] + χ(V)(1 − p₁) + (ι p₁/4)[Per₁(V)EPer₂ + Per₂(V)EPer₁]`.
pub fn boolean_mean_chi(model: &ShotNoiseModel, window: &PolyRectangle) -> Result<f64> {
    let unit = matches!(&model.marks, MarkLaw::Atoms(a) if a.len() == 1 && a[0].value == 1.0);
    if !unit {
        return Err(RandomSetError::NotBooleanRegime(
            "marks must be the unit atom".into(),
        ));
    }
    if !(model.level > 0.0 && model.level < 1.0) {
        return Err(RandomSetError::NotBooleanRegime(format!(
            "level {} not in (0, 1)",
            model.level
        )));
    }
    let (i, g) = (model.intensity, model.grain_moments());
    let p1 = (-i * g.vol).exp();
    let d = DensityCoefficients {
        chi_bar: p1 * (i * g.chi - i * i * g.per1 * g.per2 / 2.0),
        per_bar_u1: i * p1 * g.per1,
        per_bar_u2: i * p1 * g.per2,
        vol_bar: 1.0 - p1,
    };
    Ok(d.mean_chi(window))
}

/// Compensated summation.
#[derive(Debug, Clone, Copy, Default)]
struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    fn add(&mut self, v: f64) {
        let y = v - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }

    fn sum(&self) -> f64 {
        self.sum
    }
}

/// Mean and standard error, with sample variance over `n − 1`.
fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mut s = Kahan::default();
    xs.iter().for_each(|&x| s.add(x));
    let mean = s.sum() / n;
    let mut v = Kahan::default();
    xs.iter().for_each(|&x| v.add((x - mean) * (x - mean)));
    (mean, (v.sum() / (n - 1.0)).sqrt() / n.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Replicate {
    pub seed: u64,
    pub chi: i64,
    pub per_inf: f64,
    pub vol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub mean: f64,
    pub stderr: f64,
    pub replicates: Vec<Replicate>,
}

impl McSummary {
    /// Rows `seed,chi,per_inf,vol` with a header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("seed,chi,per_inf,vol\n");
        for r in &self.replicates {
            let _ = writeln!(s, "{},{},{},{}", r.seed, r.chi, r.per_inf, r.vol);
        }
        s
    }
}

/// Monte Carlo estimate of `E χ(F ∩ V)` over replicates seeded
/// `seed, seed + 1, …`, simulated on the bounding box of `V`.
pub fn mc_mean_chi(
    model: &ShotNoiseModel,
    window: &PolyRectangle,
    replicates: usize,
    seed: u64,
) -> Result<McSummary> {
    if replicates < 2 {
        return Err(RandomSetError::InvalidArgument(
            "at least two replicates".into(),
        ));
    }
    if window.is_empty() {
        return Err(RandomSetError::InvalidArgument("empty window".into()));
    }
    let domain = window.bbox();
    let reps = (0..replicates as u64)
        .into_par_iter()
        .map(|k| {
            let s = seed.wrapping_add(k);
            let real = sample_realization(model, domain, s)?;
            let st = level_set_stats(&real, model.level, window)?;
            Ok(Replicate {
                seed: s,
                chi: st.chi,
                per_inf: st.per1 + st.per2,
                vol: st.vol,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let chis: Vec<f64> = reps.iter().map(|r| r.chi as f64).collect();
    let (mean, stderr) = mean_stderr(&chis);
    Ok(McSummary {
        mean,
        stderr,
        replicates: reps,
    })
}

/// Finite-`ε` stationary densities with standard errors over replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryDensities {
    pub chi_bar: f64,
    pub per_bar_u1: f64,
    pub per_bar_u2: f64,
    pub vol_bar: f64,
    pub epsilon_used: f64,
    pub chi_bar_stderr: f64,
    pub per_bar_u1_stderr: f64,
    pub per_bar_u2_stderr: f64,
    pub vol_bar_stderr: f64,
    pub replicates: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Area fractions of `W` where `x ∈ F, x+εu₁ ∉ F, x+εu₂ ∉ F`;
/// `x ∉ F, x−εu₁ ∈ F, x−εu₂ ∈ F`; `x ∈ F, x+εu₁ ∉ F`; `x ∈ F, x+εu₂ ∉ F`;
/// and `x ∈ F`. Exact: the arrangement is cut at every edge shifted by
/// `±ε`, so each pattern is constant on a cell.
fn pattern_fractions(real: &Realization, level: f64, eps: f64, window: Rect) -> Result<[f64; 5]> {
    let (mut ex, mut ey) = (vec![window.x0, window.x1], vec![window.y0, window.y1]);
    for g in &real.germs {
        for r in g.pieces() {
            for s in [-eps, eps] {
                ex.extend([r.x0 + s, r.x1 + s]);
                ey.extend([r.y0 + s, r.y1 + s]);
            }
        }
    }
    let arr = field_arrangement(real, window.dilate(eps), &ex, &ey)?;
    let in_f = |p: Vec2| {
        arr.locate(p)
            .is_some_and(|(a, b)| reaches(arr.value(a, b), level))
    };
    let mut acc = [Kahan::default(); 5];
    for b in 0..arr.cy() {
        for a in 0..arr.cx() {
            let c = arr.center(a, b);
            if !window.contains(c) {
                continue;
            }
            let area = (arr.xs[a + 1] - arr.xs[a]) * (arr.ys[b + 1] - arr.ys[b]);
            let here = reaches(arr.value(a, b), level);
            let (e, n) = (in_f(c + eps * Vec2::U1), in_f(c + eps * Vec2::U2));
            let (w, s) = (in_f(c - eps * Vec2::U1), in_f(c - eps * Vec2::U2));
            let hits = [
                here && !e && !n,
                !here && w && s,
                here && !e,
                here && !n,
                here,
            ];
            for (k, &h) in hits.iter().enumerate() {
                if h {
                    acc[k].add(area);
                }
            }
        }
    }
    Ok(acc.map(|k| k.sum() / window.area()))
}

/// `χ̄^ε = ε⁻²[P(0∈F, εu₁∉F, εu₂∉F) − P(0∉F, −εu₁∈F, −εu₂∈F)]`,
/// `Per̄^ε_{uᵢ} = 2ε⁻¹P(0∈F, εuᵢ∉F)` and `Vol̄ = P(0∈F)`, each probability
/// an exact spatial average over `window` per realization.
pub fn estimate_stationary_densities(
    model: &ShotNoiseModel,
    epsilon: f64,
    window: Rect,
    replicates: usize,
    seed: u64,
) -> Result<StationaryDensities> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(RandomSetError::InvalidArgument(format!(
            "epsilon {epsilon}"
        )));
    }
    if replicates < 2 {
        return Err(RandomSetError::InvalidArgument(
            "at least two replicates".into(),
        ));
    }
    let domain = window.dilate(epsilon);
    let rows = (0..replicates as u64)
        .into_par_iter()
        .map(|k| {
            let real = sample_realization(model, domain, seed.wrapping_add(k))?;
            let [p_out, p_in, b1, b2, v] = pattern_fractions(&real, model.level, epsilon, window)?;
            Ok([
                (p_out - p_in) / (epsilon * epsilon),
                2.0 * b1 / epsilon,
                2.0 * b2 / epsilon,
                v,
            ])
        })
        .collect::<Result<Vec<[f64; 4]>>>()?;
    let col = |k: usize| mean_stderr(&rows.iter().map(|r| r[k]).collect::<Vec<_>>());
    let ((c, cs), (p1, p1s), (p2, p2s), (v, vs)) = (col(0), col(1), col(2), col(3));
    let min_edge = model.min_edge();
    let warning = (epsilon > 0.1 * min_edge).then(|| {
        format!("epsilon {epsilon} is not small against the shortest grain edge {min_edge}")
    });
    Ok(StationaryDensities {
        chi_bar: c,
        per_bar_u1: p1,
        per_bar_u2: p2,
        vol_bar: v,
        epsilon_used: epsilon,
        chi_bar_stderr: cs,
        per_bar_u1_stderr: p1s,
        per_bar_u2_stderr: p2s,
        vol_bar_stderr: vs,
        replicates,
        warning,
    })
}
