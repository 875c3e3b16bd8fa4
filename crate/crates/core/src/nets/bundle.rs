use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nets::discriminator::{Discriminator, DiscriminatorSpec};
use crate::nets::generator::{Generator, GeneratorSpec};
use crate::nets::params::Params;
use crate::tensor::Tensor;

/// The eight networks of the framework.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NetId {
    /// Grayscale to NIR translator.
    G2N,
    /// NIR to grayscale translator.
    N2G,
    /// NIR colorizer.
    FN,
    /// Grayscale colorizer.
    FG,
    DNImg,
    DNFeat,
    DGImg,
    DGFeat,
}

impl NetId {
    pub const ALL: [NetId; 8] = [
        NetId::G2N,
        NetId::N2G,
        NetId::FN,
        NetId::FG,
        NetId::DNImg,
        NetId::DNFeat,
        NetId::DGImg,
        NetId::DGFeat,
    ];
    pub const TRANSLATORS: [NetId; 2] = [NetId::G2N, NetId::N2G];
    pub const COLORIZERS: [NetId; 2] = [NetId::FN, NetId::FG];

    pub fn name(self) -> &'static str {
        match self {
            NetId::G2N => "g2n",
            NetId::N2G => "n2g",
            NetId::FN => "f_n",
            NetId::FG => "f_g",
            NetId::DNImg => "d_n_img",
            NetId::DNFeat => "d_n_feat",
            NetId::DGImg => "d_g_img",
            NetId::DGFeat => "d_g_feat",
        }
    }

    pub fn from_name(s: &str) -> Option<NetId> {
        NetId::ALL.into_iter().find(|n| n.name() == s)
    }

    pub fn is_generator(self) -> bool {
        (self as usize) < 4
    }

    /// Position in [`NetId::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }
}

/// The six inference paths.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InferencePath {
    N2C,
    N2G,
    N2G2C,
    G2C,
    G2N,
    G2N2C,
}

/// Input or output domain of a path.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    Nir,
    Gray,
    Rgb,
}

impl InferencePath {
    pub const ALL: [InferencePath; 6] = [
        InferencePath::N2C,
        InferencePath::N2G,
        InferencePath::N2G2C,
        InferencePath::G2C,
        InferencePath::G2N,
        InferencePath::G2N2C,
    ];

    pub fn input(self) -> Domain {
        match self {
            InferencePath::N2C | InferencePath::N2G | InferencePath::N2G2C => Domain::Nir,
            _ => Domain::Gray,
        }
    }

    pub fn output(self) -> Domain {
        match self {
            InferencePath::N2G => Domain::Gray,
            InferencePath::G2N => Domain::Nir,
            _ => Domain::Rgb,
        }
    }

    /// Networks applied in order.
    pub fn stages(self) -> &'static [NetId] {
        match self {
            InferencePath::N2C => &[NetId::FN],
            InferencePath::N2G => &[NetId::N2G],
            InferencePath::N2G2C => &[NetId::N2G, NetId::FG],
            InferencePath::G2C => &[NetId::FG],
            InferencePath::G2N => &[NetId::G2N],
            InferencePath::G2N2C => &[NetId::G2N, NetId::FN],
        }
    }
}

impl fmt::Display for InferencePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for InferencePath {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        InferencePath::ALL
            .into_iter()
            .find(|p| p.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown path {s:?}")))
    }
}

/// Architecture hyperparameters shared by the whole bundle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleSpec {
    pub image_size: usize,
    pub base_channels: usize,
}

impl BundleSpec {
    pub fn translator(&self) -> GeneratorSpec {
        GeneratorSpec::new(1, 1, self.image_size, self.base_channels)
    }

    pub fn colorizer(&self) -> GeneratorSpec {
        GeneratorSpec::new(1, 3, self.image_size, self.base_channels)
    }

    pub fn image_discriminator(&self) -> DiscriminatorSpec {
        DiscriminatorSpec::for_image(1, self.image_size, self.base_channels)
    }

    pub fn feature_discriminator(&self) -> DiscriminatorSpec {
        DiscriminatorSpec::for_image(3, self.image_size, self.base_channels)
    }
}

/// Network architectures plus one parameter set per [`NetId`].
#[derive(Clone, Debug, PartialEq)]
pub struct ModelBundle {
    spec: BundleSpec,
    translator: Generator,
    colorizer: Generator,
    d_img: Discriminator,
    d_feat: Discriminator,
    params: Vec<Params>,
}

/// A network architecture: either kind.
pub enum Net<'a> {
    Generator(&'a Generator),
    Discriminator(&'a Discriminator),
}

impl ModelBundle {
    fn architectures(
        spec: BundleSpec,
    ) -> Result<(Generator, Generator, Discriminator, Discriminator)> {
        Ok((
            Generator::new(spec.translator())?,
            Generator::new(spec.colorizer())?,
            Discriminator::new(spec.image_discriminator())?,
            Discriminator::new(spec.feature_discriminator())?,
        ))
    }

    /// Initializes all eight networks in [`NetId::ALL`] order.
    pub fn init<R: Rng + ?Sized>(spec: BundleSpec, rng: &mut R) -> Result<Self> {
        let (translator, colorizer, d_img, d_feat) = Self::architectures(spec)?;
        let mut bundle = ModelBundle {
            spec,
            translator,
            colorizer,
            d_img,
            d_feat,
            params: Vec::new(),
        };
        bundle.params = NetId::ALL
            .iter()
            .map(|&id| match bundle.net(id) {
                Net::Generator(g) => g.init_params(rng),
                Net::Discriminator(d) => d.init_params(rng),
            })
            .collect();
        Ok(bundle)
    }

    /// Rebuilds a bundle from stored parameters, checking every layout.
    pub fn from_params(spec: BundleSpec, params: Vec<Params>) -> Result<Self> {
        let (translator, colorizer, d_img, d_feat) = Self::architectures(spec)?;
        if params.len() != NetId::ALL.len() {
            return Err(Error::InvalidSpec(format!(
                "{} parameter sets, expected 8",
                params.len()
            )));
        }
        let bundle = ModelBundle {
            spec,
            translator,
            colorizer,
            d_img,
            d_feat,
            params,
        };
        for id in NetId::ALL {
            let layout = match bundle.net(id) {
                Net::Generator(g) => g.layout(),
                Net::Discriminator(d) => d.layout(),
            };
            bundle.params(id).check_layout(layout)?;
        }
        Ok(bundle)
    }

    pub fn spec(&self) -> BundleSpec {
        self.spec
    }

    pub fn net(&self, id: NetId) -> Net<'_> {
        match id {
            NetId::G2N | NetId::N2G => Net::Generator(&self.translator),
            NetId::FN | NetId::FG => Net::Generator(&self.colorizer),
            NetId::DNImg | NetId::DGImg => Net::Discriminator(&self.d_img),
            NetId::DNFeat | NetId::DGFeat => Net::Discriminator(&self.d_feat),
        }
    }

    pub fn generator(&self, id: NetId) -> &Generator {
        match self.net(id) {
            Net::Generator(g) => g,
            Net::Discriminator(_) => panic!("{} is a discriminator", id.name()),
        }
    }

    pub fn discriminator(&self, id: NetId) -> &Discriminator {
        match self.net(id) {
            Net::Discriminator(d) => d,
            Net::Generator(_) => panic!("{} is a generator", id.name()),
        }
    }

    pub fn params(&self, id: NetId) -> &Params {
        &self.params[id.index()]
    }

    pub fn params_mut(&mut self, id: NetId) -> &mut Params {
        &mut self.params[id.index()]
    }

    pub fn all_params(&self) -> &[Params] {
        &self.params
    }

    /// Combined digest of all parameter sets.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for p in &self.params {
            h.update(p.digest().as_bytes());
        }
        crate::nets::params::hex(&h.finalize())
    }

    /// Runs an inference path on a batch.
    pub fn run_path(&self, path: InferencePath, x: &Tensor) -> Result<Tensor> {
        let mut y = x.clone();
        for &id in path.stages() {
            y = self.generator(id).apply(self.params(id), &y)?;
        }
        Ok(y)
    }
}
