pub mod ablation;
pub mod autodiff;
pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod error;
pub mod gradcheck;
pub mod localization;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod optim;
pub mod oracle;
pub mod pal;
pub mod pcc;
pub mod synth;
pub mod tensor;
pub mod tensor_file;
pub mod train;
