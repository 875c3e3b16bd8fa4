//! Progressive training: translators first, then both colorizers on frozen
//! translators, then joint fine-tuning of everything.

pub mod adam;
pub mod checkpoint;
pub mod config;
pub mod log;
pub mod steps;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{make_batches, Dataset};
use crate::error::{Error, Result};
use crate::losses::LossBreakdown;
use crate::nets::{ModelBundle, NetId};

pub use self::adam::{adam_step, OptimizerState};
pub use self::checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, read_header, save_checkpoint,
    Checkpoint, CheckpointHeader, Stage,
};
pub use self::config::{Ablation, ConfigOverrides, Preset, TrainConfig};
pub use self::log::{read_step_log, EpochRecord, StepRecord, TrainLog};
pub use self::steps::{train_step, BatchData, Objective};

/// Fresh bundle and optimizer states drawn from `cfg.seed`.
pub fn init_checkpoint(cfg: &TrainConfig) -> Result<Checkpoint> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let bundle = ModelBundle::init(cfg.bundle_spec(), &mut rng)?;
    let optim = bundle
        .all_params()
        .iter()
        .map(OptimizerState::new)
        .collect();
    Ok(Checkpoint {
        stage: Stage::Init,
        epoch: 0,
        step: 0,
        config: cfg.clone(),
        bundle,
        optim,
        rng,
    })
}

fn check_data(data: &Dataset, cfg: &TrainConfig) -> Result<()> {
    if data.paired.is_empty() || data.gray_only.is_empty() {
        return Err(Error::Dataset(format!(
            "training needs paired and grayscale-only samples (got {} and {})",
            data.paired.len(),
            data.gray_only.len()
        )));
    }
    match data.image_size() {
        Some((h, w)) if h == cfg.image_size && w == cfg.image_size => Ok(()),
        Some((h, w)) => Err(Error::Dataset(format!(
            "images are {h}x{w}, configuration expects {0}x{0}",
            cfg.image_size
        ))),
        None => Err(Error::Dataset("images differ in size".into())),
    }
}

fn expect_stage(ck: &Checkpoint, stage: Stage) -> Result<()> {
    if ck.stage != stage {
        return Err(Error::InvalidConfig(format!(
            "expected a {stage} checkpoint, got {}",
            ck.stage
        )));
    }
    Ok(())
}

fn check_compatible(ck: &Checkpoint, cfg: &TrainConfig) -> Result<()> {
    cfg.validate()?;
    if ck.bundle.spec() != cfg.bundle_spec() {
        return Err(Error::InvalidConfig(format!(
            "checkpoint architecture {:?} differs from configuration {:?}",
            ck.bundle.spec(),
            cfg.bundle_spec()
        )));
    }
    Ok(())
}

/// Runs `schedule` (epochs, learning rate) of `objective`, starting a new stage.
fn run_stage(
    mut ck: Checkpoint,
    data: &Dataset,
    cfg: &TrainConfig,
    stage: Stage,
    objective: Objective,
    schedule: &[(usize, f64)],
    log: &mut TrainLog,
) -> Result<Checkpoint> {
    check_data(data, cfg)?;
    ck.config = cfg.clone();
    ck.stage = stage;
    ck.epoch = 0;
    for &(epochs, lr) in schedule {
        for _ in 0..epochs {
            let batches = make_batches(&data.paired, &data.gray_only, cfg.batch_size, &mut ck.rng)?;
            let mut seen = Vec::with_capacity(batches.len());
            for (i, batch) in batches.iter().enumerate() {
                let bd = BatchData::load(data, batch, &cfg.augment, &mut ck.rng)?;
                let losses = train_step(&mut ck, &bd, objective, lr)?;
                log.push_step(StepRecord {
                    step: ck.step,
                    phase: stage,
                    epoch: ck.epoch,
                    batch: i,
                    losses,
                })?;
                seen.push(losses);
            }
            log.push_epoch(EpochRecord {
                phase: stage,
                epoch: ck.epoch,
                steps: seen.len(),
                mean: LossBreakdown::mean(&seen),
            })?;
            ck.epoch += 1;
        }
    }
    Ok(ck)
}

/// Translators and image discriminators from initialization.
pub fn train_phase1(data: &Dataset, cfg: &TrainConfig, log: &mut TrainLog) -> Result<Checkpoint> {
    let ck = init_checkpoint(cfg)?;
    run_stage(
        ck,
        data,
        cfg,
        Stage::Phase1,
        Objective::Translation,
        &[(cfg.epochs_phase1, cfg.lr_phase1)],
        log,
    )
}

/// Both colorizers and feature discriminators; translators stay frozen.
pub fn train_phase2(
    data: &Dataset,
    phase1: &Checkpoint,
    cfg: &TrainConfig,
    log: &mut TrainLog,
) -> Result<Checkpoint> {
    expect_stage(phase1, Stage::Phase1)?;
    check_compatible(phase1, cfg)?;
    run_stage(
        phase1.clone(),
        data,
        cfg,
        Stage::Phase2,
        Objective::Colorization,
        &[(cfg.epochs_phase2, cfg.lr_phase2)],
        log,
    )
}

/// All eight networks jointly at the fine-tuning learning rate.
pub fn train_phase3(
    data: &Dataset,
    phase2: &Checkpoint,
    cfg: &TrainConfig,
    log: &mut TrainLog,
) -> Result<Checkpoint> {
    expect_stage(phase2, Stage::Phase2)?;
    check_compatible(phase2, cfg)?;
    run_stage(
        phase2.clone(),
        data,
        cfg,
        Stage::Phase3,
        Objective::Joint,
        &[(cfg.epochs_phase3, cfg.lr_phase3)],
        log,
    )
}

/// The NIR colorizer on its direct and latent pair terms with its feature
/// discriminator, after phase 1, without the grayscale colorizer.
pub fn train_n2c_partial(
    data: &Dataset,
    phase1: &Checkpoint,
    cfg: &TrainConfig,
    log: &mut TrainLog,
) -> Result<Checkpoint> {
    expect_stage(phase1, Stage::Phase1)?;
    check_compatible(phase1, cfg)?;
    run_stage(
        phase1.clone(),
        data,
        cfg,
        Stage::N2cPartial,
        Objective::Partial,
        &[
            (cfg.epochs_phase2, cfg.lr_phase2),
            (cfg.epochs_phase3, cfg.lr_phase3),
        ],
        log,
    )
}

/// One colorizer (`NetId::FN` or `NetId::FG`) alone on its direct pair term,
/// for as many epochs as the colorization phases of the full schedule.
pub fn train_standalone(
    data: &Dataset,
    cfg: &TrainConfig,
    id: NetId,
    log: &mut TrainLog,
) -> Result<Checkpoint> {
    let stage = match id {
        NetId::FN => Stage::N2cStandalone,
        NetId::FG => Stage::G2cStandalone,
        other => {
            return Err(Error::InvalidConfig(format!(
                "{} is not a colorizer",
                other.name()
            )))
        }
    };
    let ck = init_checkpoint(cfg)?;
    run_stage(
        ck,
        data,
        cfg,
        stage,
        Objective::Standalone(id),
        &[
            (cfg.epochs_phase2, cfg.lr_phase2),
            (cfg.epochs_phase3, cfg.lr_phase3),
        ],
        log,
    )
}

/// The full objective on all networks from initialization, for the total
/// epoch budget of the three phases at the first-phase learning rate.
pub fn train_from_scratch(
    data: &Dataset,
    cfg: &TrainConfig,
    log: &mut TrainLog,
) -> Result<Checkpoint> {
    let ck = init_checkpoint(cfg)?;
    let epochs = cfg.epochs_phase1 + cfg.epochs_phase2 + cfg.epochs_phase3;
    run_stage(
        ck,
        data,
        cfg,
        Stage::FromScratch,
        Objective::Joint,
        &[(epochs, cfg.lr_phase1)],
        log,
    )
}

/// Runs the strategy selected by `cfg.ablation` and returns every stage
/// checkpoint in order; the last one is the trained model.
pub fn train_full(
    data: &Dataset,
    cfg: &TrainConfig,
    log: &mut TrainLog,
) -> Result<Vec<Checkpoint>> {
    cfg.validate()?;
    check_data(data, cfg)?;
    match cfg.ablation {
        Ablation::Full | Ablation::NoBlt => {
            let p1 = train_phase1(data, cfg, log)?;
            let p2 = train_phase2(data, &p1, cfg, log)?;
            let p3 = train_phase3(data, &p2, cfg, log)?;
            Ok(vec![p1, p2, p3])
        }
        Ablation::FromScratch => Ok(vec![train_from_scratch(data, cfg, log)?]),
        Ablation::N2cPartial => {
            let p1 = train_phase1(data, cfg, log)?;
            let partial = train_n2c_partial(data, &p1, cfg, log)?;
            Ok(vec![p1, partial])
        }
        Ablation::N2cStandalone => Ok(vec![train_standalone(data, cfg, NetId::FN, log)?]),
        Ablation::G2cStandalone => Ok(vec![train_standalone(data, cfg, NetId::FG, log)?]),
    }
}
