use crate::data::image::{rgb_to_grayscale, ImageTensor};
use crate::error::{Error, Result};

/// An aligned NIR / RGB capture with the grayscale projection of its RGB.
#[derive(Clone, Debug, PartialEq)]
pub struct PairedSample {
    nir: ImageTensor,
    rgb: ImageTensor,
    gray: ImageTensor,
    id: String,
}

impl PairedSample {
    pub fn new(id: impl Into<String>, nir: ImageTensor, rgb: ImageTensor) -> Result<Self> {
        if nir.channels() != 1 {
            return Err(Error::ChannelMismatch {
                expected: 1,
                actual: nir.channels(),
            });
        }
        if !nir.same_dims(&rgb) {
            return Err(Error::Dataset(format!(
                "nir {}x{} and rgb {}x{} differ in size",
                nir.height(),
                nir.width(),
                rgb.height(),
                rgb.width()
            )));
        }
        let gray = rgb_to_grayscale(&rgb)?;
        Ok(PairedSample {
            nir,
            rgb,
            gray,
            id: id.into(),
        })
    }

    pub fn nir(&self) -> &ImageTensor {
        &self.nir
    }

    pub fn rgb(&self) -> &ImageTensor {
        &self.rgb
    }

    pub fn gray(&self) -> &ImageTensor {
        &self.gray
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// The grayscale-domain view of this pair.
    pub fn to_gray_sample(&self) -> GraySample {
        GraySample {
            rgb: self.rgb.clone(),
            gray: self.gray.clone(),
            id: self.id.clone(),
        }
    }
}

/// An RGB image with its grayscale projection; no NIR counterpart.
#[derive(Clone, Debug, PartialEq)]
pub struct GraySample {
    rgb: ImageTensor,
    gray: ImageTensor,
    id: String,
}

impl GraySample {
    pub fn new(id: impl Into<String>, rgb: ImageTensor) -> Result<Self> {
        let gray = rgb_to_grayscale(&rgb)?;
        Ok(GraySample {
            rgb,
            gray,
            id: id.into(),
        })
    }

    pub fn rgb(&self) -> &ImageTensor {
        &self.rgb
    }

    pub fn gray(&self) -> &ImageTensor {
        &self.gray
    }

    pub fn id(&self) -> &str {
        &self.id
    }
}

/// Paired and grayscale-only samples of one dataset split.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub paired: Vec<PairedSample>,
    pub gray_only: Vec<GraySample>,
}

impl Dataset {
    pub fn new(paired: Vec<PairedSample>, gray_only: Vec<GraySample>) -> Self {
        Dataset { paired, gray_only }
    }

    pub fn is_empty(&self) -> bool {
        self.paired.is_empty() && self.gray_only.is_empty()
    }

    /// Every grayscale-domain sample: the gray-only set followed by the paired RGBs.
    pub fn gray_pool(&self) -> Vec<GraySample> {
        self.gray_only
            .iter()
            .cloned()
            .chain(self.paired.iter().map(PairedSample::to_gray_sample))
            .collect()
    }

    /// Common spatial size of all images, if they agree.
    pub fn image_size(&self) -> Option<(usize, usize)> {
        let mut dims = self
            .paired
            .iter()
            .map(|s| (s.rgb.height(), s.rgb.width()))
            .chain(
                self.gray_only
                    .iter()
                    .map(|s| (s.rgb.height(), s.rgb.width())),
            );
        let first = dims.next()?;
        dims.all(|d| d == first).then_some(first)
    }
}
