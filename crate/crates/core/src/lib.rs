//! Euler characteristic and Minkowski functionals of planar sets from lattice
//! digitizations and polyvariograms, with exact and Monte Carlo tools for
//! shot-noise level sets.

// guards like `!(x > 0.0)` are meant to reject NaN too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub(crate) mod arrangement;
pub(crate) mod bits;
pub mod entanglement;
pub mod geometry;
pub mod lattice;
pub mod randomsets;
pub mod shapes;
pub mod topology;
pub mod variogram;

pub use arrangement::CellStats;
pub use entanglement::{
    detect_boundary_pairs, detect_interior_pairs, pixel_aligned_window, verify_bounds, BoundCheck,
    BoundReport, EntanglementError, Pair, PairKind, PairOptions, PairSet,
};
pub use geometry::{Rect, Vec2};
pub use lattice::{digitize, grid_volume, BitGrid, IndicatorSet, Lattice, LatticeError};
pub use randomsets::{
    boolean_mean_chi, closed_form_densities, closed_form_terms, corner_census_densities,
    estimate_stationary_densities, level_set_chi_exact, level_set_stats, mc_mean_chi,
    mean_chi_closed_form, mean_chi_corner_census, sample_realization, ClosedFormTerms,
    DensityCoefficients, Germ, GrainAtom, GrainLaw, GrainMoments, LengthLaw, MarkAtom, MarkFamily,
    MarkLaw, McSummary, RandomSetError, Realization, RectFamily, Replicate, ShotNoiseModel,
    StationaryDensities,
};
pub use shapes::{
    check_transversality, make_shape, morph, polyrect_features, MorphOp, MorphologyResult,
    PolyRectFeatures, PolyRectangle, ShapeError, ShapeSpec, TransversalityOptions,
    TransversalityReport,
};
pub use topology::{
    chi_components, chi_local, chi_vef, config_counts, label_components, ComponentLabeling,
    ConfigCounts, Phase, TopologyError,
};
pub use variogram::{
    chi_bicovariogram, chi_bicovariogram_discrete, continuous_polyvariogram,
    continuous_polyvariograms, discrete_polyvariogram, estimate_perimeter, perimeter_summary,
    PerimeterEstimate, PerimeterSummary, ShiftSpec, VariogramError,
};
