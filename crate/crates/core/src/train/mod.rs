//! Multi-level forward pass, unsupervised optimisation, readout, downstream
//! classifier and the cross-validation harness.

mod adam;
mod classifier;
mod config;
mod cv;
mod forward;
mod model;
mod readout;
mod unsupervised;


pub use adam::{adam_step, lr_at_epoch, AdamState};
pub use classifier::{fit_classifier, mean_std, train_classifier, ClassifierParams, ClassifierReport};
pub use config::TrainConfig;
pub use cv::{cross_validate, evaluate_frozen, graph_features, CvOutcome, CvReport, FoldReport};
pub use forward::{forward_on_tape, forward_pass, gradient_check, loss, loss_and_gradient, ForwardOutput, ForwardTrace, LevelTrace};
pub use model::ModelParams;
pub use readout::readout;
pub use unsupervised::{train_unsupervised, EpochRecord, TrainOutcome, UnlabeledGraph};

/// Independent seed for `(stream, index)` derived from a base seed with the
/// splitmix64 finaliser. Streams separate unrelated consumers (model init,
/// validation split, classifier) so adding one never shifts another.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
