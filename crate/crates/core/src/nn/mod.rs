//! Network graphs, forward execution with named taps, and dense evaluation.

mod engine;
mod presets;
mod spec;
mod weights;

pub use engine::{
    convolutionalize, forward, forward_profiled, infer_shapes, infer_shapes_for, LayerTiming,
    TapResult,
};
pub use presets::{model_catalog, preset, random_model, resolve_model, CatalogEntry, Preset};
pub use spec::{LayerKind, LayerSpec, NetBuilder, NetworkSpec};
pub use weights::{LayerWeights, WeightStore, INIT_RANGE};
