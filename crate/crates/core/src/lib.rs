//! MossFormer2 speech separation on a small, self-contained tensor engine.
//!
//! A mixture waveform is encoded by a learned filterbank, masked by a stack
//! of joint local/global attention blocks each followed by an RNN-free
//! recurrent module (a gated, dilated FSMN), and decoded back to one
//! waveform per speaker.
//!
//! ```no_run
//! use mossformer2::{ModelConfig, Separator};
//!
//! let model = Separator::<f32>::new(&ModelConfig::desk(), 0)?;
//! let mix = vec![0.0f32; 8000];
//! let sources = model.separate_samples(&mix)?;
//! assert_eq!(sources.len(), 2);
//! # Ok::<(), mossformer2::Error>(())
//! ```

pub mod archive;
pub mod attention;
pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod layers;
pub mod objectives;
pub mod params;
pub mod profile;
pub mod recurrent;
pub mod separator;
pub mod train;

pub use archive::{load_checkpoint, save_checkpoint, TensorArchive};
pub use config::{TrainConfig, TrainSettings};
pub use error::{Error, Result};
pub use recurrent::Toggles;
pub use separator::{ModelConfig, Separator};
pub use train::Trainer;
