//! Small training setups and parameter-digest bookkeeping.

use nircolor::data::{synth_dataset, Dataset};
use nircolor::nets::{ModelBundle, NetId};
use nircolor::train::{train_phase1, train_phase2, Checkpoint, TrainConfig, TrainLog};

use super::rng;

/// 16x16, base width 4, one epoch per phase, batch 2.
pub fn tiny_config(seed: u64) -> TrainConfig {
    let mut c = TrainConfig::desk();
    c.image_size = 16;
    c.base_channels = 4;
    c.batch_size = 2;
    c.epochs_phase1 = 1;
    c.epochs_phase2 = 1;
    c.epochs_phase3 = 1;
    c.seed = seed;
    c.augment = nircolor::data::AugmentConfig::training(16);
    c
}

pub fn tiny_data(seed: u64) -> Dataset {
    let (p, g) = synth_dataset(&mut rng(seed), 4, 4, 16).unwrap();
    Dataset::new(p, g)
}

pub fn digests(b: &ModelBundle) -> Vec<String> {
    NetId::ALL.iter().map(|&id| b.params(id).digest()).collect()
}

/// Networks whose parameters differ between `a` and `b`.
pub fn changed(a: &ModelBundle, b: &ModelBundle) -> Vec<NetId> {
    let (da, db) = (digests(a), digests(b));
    NetId::ALL
        .iter()
        .zip(da.iter().zip(&db))
        .filter(|(_, (x, y))| x != y)
        .map(|(&id, _)| id)
        .collect()
}

pub struct Isolation {
    pub phase1_changed: Vec<NetId>,
    pub phase2_changed: Vec<NetId>,
}

impl Isolation {
    pub fn holds(&self) -> bool {
        let p1_ok = !self
            .phase1_changed
            .iter()
            .any(|id| matches!(id, NetId::FN | NetId::FG));
        let p2_ok = !self
            .phase2_changed
            .iter()
            .any(|id| matches!(id, NetId::G2N | NetId::N2G));
        p1_ok && p2_ok && !self.phase1_changed.is_empty() && !self.phase2_changed.is_empty()
    }
}

/// Runs phases 1 and 2 from initialization and lists what each one touched.
pub fn phase_isolation(cfg: &TrainConfig, data: &Dataset) -> (Isolation, Checkpoint, Checkpoint) {
    let init = nircolor::train::init_checkpoint(cfg).unwrap();
    let p1 = train_phase1(data, cfg, &mut TrainLog::new()).unwrap();
    let p2 = train_phase2(data, &p1, cfg, &mut TrainLog::new()).unwrap();
    let iso = Isolation {
        phase1_changed: changed(&init.bundle, &p1.bundle),
        phase2_changed: changed(&p1.bundle, &p2.bundle),
    };
    (iso, p1, p2)
}
