//! Generator and discriminator networks and their parameter bookkeeping.

mod discriminator;
mod generator;
pub(crate) mod layers;
mod params;
mod spec;

pub use discriminator::{build_discriminator, Discriminator};
pub use generator::{build_generator, EncoderFeatures, Generator};
pub use params::{checksum, group_checksum, Param, ParamKey, ParamKind};
pub use spec::{
    CodeShape, DiscriminatorSpec, FinalActivation, GeneratorSpec, ParameterGroup, PathMode,
    SkipMode,
};

pub(crate) use params::tensor_bytes;

use crate::error::Result;

/// A generator and discriminator trained together.
#[derive(Clone, Debug)]
pub struct GanModels {
    pub generator: Generator,
    pub discriminator: Discriminator,
}

impl GanModels {
    pub fn new(generator: Generator, discriminator: Discriminator) -> Self {
        Self {
            generator,
            discriminator,
        }
    }

    pub fn set_trainable(&mut self, group: ParameterGroup, flag: bool) -> Result<()> {
        match group {
            ParameterGroup::Discriminator => {
                self.discriminator.set_trainable(flag);
                Ok(())
            }
            g => self.generator.set_trainable(g, flag),
        }
    }

    /// Same as [`GanModels::set_trainable`] with the group given by name.
    pub fn set_trainable_by_name(&mut self, group: &str, flag: bool) -> Result<()> {
        self.set_trainable(group.parse()?, flag)
    }

    pub fn is_trainable(&self, group: ParameterGroup) -> bool {
        match group {
            ParameterGroup::Discriminator => self.discriminator.is_trainable(),
            g => self.generator.is_trainable(g),
        }
    }

    pub fn parameters(&self) -> Vec<Param> {
        let mut p = self.generator.parameters();
        p.extend(self.discriminator.parameters());
        p
    }
}
