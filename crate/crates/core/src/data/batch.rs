use rand::seq::SliceRandom;
use rand::Rng;

use crate::data::sample::{GraySample, PairedSample};
use crate::error::{Error, Result};

/// Index of a grayscale-domain sample in the combined pool.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GrayRef {
    GrayOnly(usize),
    Paired(usize),
}

/// One minibatch: `batch_size` NIR-domain pairs and an independent draw of
/// `batch_size` grayscale-domain samples.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Batch {
    pub paired: Vec<usize>,
    pub gray: Vec<GrayRef>,
}

impl Batch {
    /// Sample ids in batch order: paired first, then grayscale.
    pub fn ids(&self, paired: &[PairedSample], gray_only: &[GraySample]) -> Vec<String> {
        self.paired
            .iter()
            .map(|&i| paired[i].id().to_string())
            .chain(self.gray.iter().map(|g| match *g {
                GrayRef::GrayOnly(i) => gray_only[i].id().to_string(),
                GrayRef::Paired(i) => paired[i].id().to_string(),
            }))
            .collect()
    }
}

/// One epoch of batches. Short final batches are dropped.
pub fn make_batches<R: Rng + ?Sized>(
    paired: &[PairedSample],
    gray_only: &[GraySample],
    batch_size: usize,
    rng: &mut R,
) -> Result<Vec<Batch>> {
    if paired.is_empty() || gray_only.is_empty() {
        return Err(Error::Dataset(format!(
            "need paired and grayscale-only samples (got {} and {})",
            paired.len(),
            gray_only.len()
        )));
    }
    if batch_size == 0 {
        return Err(Error::InvalidConfig("batch size must be at least 1".into()));
    }
    if batch_size > paired.len() {
        return Err(Error::Dataset(format!(
            "batch size {batch_size} exceeds {} paired samples",
            paired.len()
        )));
    }
    let mut order: Vec<usize> = (0..paired.len()).collect();
    order.shuffle(rng);
    let mut pool: Vec<GrayRef> = (0..gray_only.len())
        .map(GrayRef::GrayOnly)
        .chain((0..paired.len()).map(GrayRef::Paired))
        .collect();
    pool.shuffle(rng);

    let n_batches = paired.len() / batch_size;
    Ok((0..n_batches)
        .map(|b| Batch {
            paired: order[b * batch_size..(b + 1) * batch_size].to_vec(),
            gray: pool[b * batch_size..(b + 1) * batch_size].to_vec(),
        })
        .collect())
}
