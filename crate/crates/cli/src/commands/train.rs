use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use vstain_core::net::{history_csv, save_checkpoint, train_af, train_cgan, GeneratorConfig, PairSet, TrainOutcome};
use vstain_core::synthgen::persist::read_dataset;

use crate::config::{RunConfig, Task};
use crate::exit::{ChannelCountError, NumericFailure};
use crate::manifest::RunRecord;

use super::write_bytes;

pub const CHECKPOINT: &str = "checkpoint.bin";

pub fn run_train(cfg: &RunConfig, task: Task, data_dir: &Path, out: &Path, mut record: RunRecord) -> Result<()> {
    let dataset = read_dataset(data_dir).with_context(|| format!("reading dataset {}", data_dir.display()))?;
    record.add_input_dir("data", data_dir)?;
    let tcfg = cfg.train_for(task);
    let outcome = match task {
        Task::Cgan => {
            let present = cfg.inputs.iter().filter(|n| dataset.channels.contains(n)).count();
            if present != cfg.inputs.len() || !dataset.channels.contains(&cfg.target) {
                return Err(ChannelCountError {
                    what: format!("config inputs {:?} plus target {:?}", cfg.inputs, cfg.target),
                    expected: cfg.inputs.len() + 1,
                    actual: present + usize::from(dataset.channels.contains(&cfg.target)),
                }
                .into());
            }
            let data = PairSet::from_scenes(&dataset.scenes, &cfg.inputs, &cfg.target)?;
            train_cgan(&data, &cfg.generator, &cfg.discriminator, &cfg.loss, &tcfg)?
        }
        Task::Af => {
            if dataset.af_channel.is_none() {
                bail!("dataset {} has no refocusing pairs; synthesize it with `af = true` under [scene]", data_dir.display());
            }
            let gcfg = GeneratorConfig { in_channels: 1, ..cfg.generator.clone() };
            train_af(&dataset.af_samples, &gcfg, &cfg.discriminator, &cfg.loss, &tcfg)?
        }
    };
    let ckpt = out.join(CHECKPOINT);
    save_checkpoint(&ckpt, &outcome.params)?;
    write_bytes(&out.join("history.csv"), history_csv(&outcome.history).as_bytes())?;
    let mut val = String::from("step,val_mae\n");
    for (step, mae) in &outcome.validation {
        let _ = writeln!(val, "{step},{mae:.12e}");
    }
    write_bytes(&out.join("validation.csv"), val.as_bytes())?;
    let summary = summary_text(&outcome);
    write_bytes(&out.join("train_summary.txt"), summary.as_bytes())?;
    print!("{summary}");
    if let Some(failure) = outcome.failure {
        record.finish()?;
        return Err(NumericFailure { checkpoint: ckpt.display().to_string(), source: failure }.into());
    }
    record.finish()
}

fn summary_text(o: &TrainOutcome) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "steps_completed={}", o.history.len());
    let _ = writeln!(s, "train_samples={}", o.train_samples);
    let _ = writeln!(s, "val_samples={}", o.val_samples);
    let _ = writeln!(s, "skipped_near_focus={}", o.skipped);
    match (o.best_step, o.best_val_mae()) {
        (Some(step), Some(mae)) => {
            let _ = writeln!(s, "best_step={step}");
            let _ = writeln!(s, "best_val_mae={mae:.12e}");
        }
        _ => {
            let _ = writeln!(s, "best_step=na");
            let _ = writeln!(s, "best_val_mae=na");
        }
    }
    if let Some((step, mae)) = o.validation.last() {
        let _ = writeln!(s, "final_val_step={step}");
        let _ = writeln!(s, "final_val_mae={mae:.12e}");
    }
    s
}
