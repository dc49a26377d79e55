//! Subcommand implementations and the helpers they share.

use std::path::Path;

use edei_core::io::dataset::{list_samples, read_sample, SampleRef};
use edei_core::ExposureSample;
use edei_net::checkpoint;
use edei_net::EdeiNet;

use crate::error::{CliError, Result};

pub mod eval;
pub mod infer;
pub mod stats;
pub mod synth;
pub mod train;
pub mod viz;

/// Network precision used by every command.
pub type Real = f32;

/// A labeled sample with its `sequence/index` name.
pub struct Named {
    pub name: String,
    pub sequence: String,
    pub sample: ExposureSample,
}

pub fn sample_refs(root: &Path) -> Result<Vec<SampleRef>> {
    if !root.is_dir() {
        return Err(CliError::Data(format!("{}: not a dataset directory", root.display())));
    }
    let refs = list_samples(root)?;
    if refs.is_empty() {
        return Err(CliError::Data(format!("{}: no samples found", root.display())));
    }
    Ok(refs)
}

/// Every labeled sample under `root`, in sorted order.
pub fn load_dataset(root: &Path) -> Result<Vec<Named>> {
    sample_refs(root)?
        .into_iter()
        .map(|r| {
            Ok(Named {
                name: format!("{}/{}", r.sequence, r.index),
                sample: read_sample(&r.path)?,
                sequence: r.sequence,
            })
        })
        .collect()
}

pub fn load_checkpoint(path: &Path) -> Result<EdeiNet<Real>> {
    if !path.is_file() {
        return Err(CliError::Checkpoint(format!("{}: no such checkpoint", path.display())));
    }
    Ok(checkpoint::load::<Real>(path)?)
}

/// Prints the plan of a dry run.
pub fn print_plan(lines: &[String]) {
    println!("dry run, nothing will be written:");
    for l in lines {
        println!("  {l}");
    }
}
