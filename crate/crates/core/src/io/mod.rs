//! Binary tensor and label files.

pub mod tensor;

pub use tensor::{read_labels, write_labels, TensorFile};
