//! Model and descriptor files, image decoding and preprocessing, manifests.

pub(crate) mod binary;
mod image;
mod manifest;
mod model_file;

pub use self::image::{load_image, preprocess, resize_bilinear, PreprocessSpec, ResizeMode, RgbImage};
pub use manifest::{format_manifest, parse_manifest, read_manifest, ManifestRecord, Split};
pub use model_file::{decode_model, encode_model, load_model, save_model, MODEL_MAGIC, MODEL_VERSION};
