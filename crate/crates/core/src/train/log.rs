use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::LossBreakdown;
use crate::train::checkpoint::Stage;

/// One optimization step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub phase: Stage,
    pub epoch: usize,
    pub batch: usize,
    #[serde(flatten)]
    pub losses: LossBreakdown,
}

/// Mean of the step records of one epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub phase: Stage,
    pub epoch: usize,
    pub steps: usize,
    #[serde(flatten)]
    pub mean: LossBreakdown,
}

type EpochHook = Box<dyn FnMut(&EpochRecord)>;

/// Collects step and epoch records, optionally streaming steps as JSON lines.
#[derive(Default)]
pub struct TrainLog {
    steps: Vec<StepRecord>,
    epochs: Vec<EpochRecord>,
    sink: Option<(PathBuf, BufWriter<File>)>,
    on_epoch: Option<EpochHook>,
}

impl TrainLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Also writes every step record to `path`, one JSON object per line.
    pub fn to_file(path: &Path) -> Result<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(TrainLog {
            sink: Some((path.to_path_buf(), BufWriter::new(f))),
            ..Self::default()
        })
    }

    pub fn on_epoch(mut self, hook: impl FnMut(&EpochRecord) + 'static) -> Self {
        self.on_epoch = Some(Box::new(hook));
        self
    }

    pub fn steps(&self) -> &[StepRecord] {
        &self.steps
    }

    pub fn epochs(&self) -> &[EpochRecord] {
        &self.epochs
    }

    pub fn push_step(&mut self, rec: StepRecord) -> Result<()> {
        if let Some((path, w)) = &mut self.sink {
            let line = serde_json::to_string(&rec).expect("record serializes");
            writeln!(w, "{line}").map_err(|e| Error::io(path.as_path(), e))?;
        }
        self.steps.push(rec);
        Ok(())
    }

    pub fn push_epoch(&mut self, rec: EpochRecord) -> Result<()> {
        if let Some(hook) = &mut self.on_epoch {
            hook(&rec);
        }
        self.epochs.push(rec);
        self.flush()
    }

    pub fn flush(&mut self) -> Result<()> {
        if let Some((path, w)) = &mut self.sink {
            w.flush().map_err(|e| Error::io(path.as_path(), e))?;
        }
        Ok(())
    }
}

/// Parses a JSON-lines step log.
pub fn read_step_log(path: &Path) -> Result<Vec<StepRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| Error::InvalidConfig(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}
