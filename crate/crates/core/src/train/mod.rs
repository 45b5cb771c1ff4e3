//! Dual-cycle training: schedule, optimizer, per-iteration procedure,
//! checkpoints and the epoch loop.

mod adam;
mod checkpoint;
mod policy;
mod run;
mod schedule;
pub mod trainer;

pub use adam::{Adam, AdamConfig, AdamSlot};
pub use checkpoint::{load_checkpoint, load_checkpoint_for, save_checkpoint};
pub use policy::{CyclePolicy, DiscriminatorInput, RealPairSource};
pub use run::{epoch_order, read_losses, run_training, RunConfig, RunLayout, RunOptions};
pub use schedule::{lr_at, TrainSchedule};
pub use trainer::{train_iteration, IterationInputs, TrainState};
