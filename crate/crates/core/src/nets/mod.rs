//! Generators, discriminators and their parameters.

pub mod bundle;
pub mod discriminator;
pub mod generator;
pub mod params;

pub use self::bundle::{BundleSpec, Domain, InferencePath, ModelBundle, Net, NetId};
pub use self::discriminator::{build_discriminator, Discriminator, DiscriminatorSpec, PatchMap};
pub use self::generator::{build_generator, Generator, GeneratorSpec};
pub use self::params::{Bound, ParamKind, ParamSpec, Params};
