#![allow(dead_code)]

use dynpix::data::{PreprocessConfig, SamplePair, SynthConfig};
use dynpix::model::{DiscriminatorSpec, GeneratorSpec};
use dynpix::train::{RunConfig, TrainSchedule};

pub fn tiny_generator() -> GeneratorSpec {
    GeneratorSpec {
        input_size: 32,
        base_width: 4,
        depth: 3,
        ..GeneratorSpec::default()
    }
}

pub fn tiny_discriminator() -> DiscriminatorSpec {
    DiscriminatorSpec {
        input_size: 32,
        base_width: 4,
        depth: 3,
        ..DiscriminatorSpec::default()
    }
}

pub fn tiny_data(n: usize, seed: u64) -> Vec<SamplePair> {
    SynthConfig {
        n,
        size: 32,
        noise_level: 0.3,
        seed,
    }
    .generate()
    .unwrap()
}

pub fn tiny_run(total_epochs: usize, seed: u64) -> RunConfig {
    RunConfig {
        generator: tiny_generator(),
        discriminator: tiny_discriminator(),
        schedule: TrainSchedule::new(2e-4, total_epochs, (total_epochs / 2).max(1)),
        preprocess: PreprocessConfig {
            resize_to: 32,
            crop_to: 32,
        },
        seed,
        ..RunConfig::desk()
    }
}
