//! Dataset ingestion, grayscale projection, augmentation, batching and the
//! synthetic scene generator.

pub mod augment;
pub mod batch;
pub mod image;
pub mod layout;
pub mod sample;
pub mod synth;

pub use self::augment::{augment, Augment, AugmentConfig, AugmentPlan};
pub use self::batch::{make_batches, Batch, GrayRef};
pub use self::image::{load_image, rgb_to_grayscale, save_png, ImageTensor};
pub use self::layout::{load_dataset, write_dataset};
pub use self::sample::{Dataset, GraySample, PairedSample};
pub use self::synth::synth_dataset;
