//! Conversion of exposure samples into network tensors.

use edei_core::{perturb_window, voxelize, EventStream, ExposureSample, ExposureTiming, Frame, VoxelGrid};

use crate::error::{NetError, Result};
use crate::model::ModelInput;
use crate::tensor::{Scalar, Tensor};

/// A sample ready for the network: inputs, optional target and a label.
#[derive(Clone, Debug)]
pub struct Prepared<S> {
    pub name: String,
    pub input: ModelInput<S>,
    pub gt: Option<Tensor<S>>,
}

pub fn voxel_tensor<S: Scalar>(v: &VoxelGrid) -> Tensor<S> {
    Tensor::from_vec(
        [1, v.bins, v.height, v.width],
        v.data.iter().map(|&x| S::of(x)).collect(),
    )
}

/// Network inputs from raw parts. The deblurring window is perturbed by
/// `epsilon` exposure intervals; zero leaves it at `[t_s, t_e]`.
pub fn prepare_input<S: Scalar>(
    short: &Frame,
    long: &Frame,
    events: &EventStream,
    timing: &ExposureTiming,
    bins: usize,
    epsilon: f64,
) -> Result<ModelInput<S>> {
    if !short.same_shape(long) {
        return Err(NetError::shape("short and long exposures differ in shape"));
    }
    if events.sensor_shape() != (short.height(), short.width()) {
        return Err(NetError::shape("event sensor differs from image size"));
    }
    let vd = voxelize(events, perturb_window(timing, epsilon), bins)?;
    let ve = voxelize(events, timing.enhance_window(), bins)?;
    Ok(ModelInput {
        short: Tensor::from_frame(short),
        long: Tensor::from_frame(long),
        vox_deblur: voxel_tensor(&vd),
        vox_enhance: voxel_tensor(&ve),
    })
}

pub fn prepare<S: Scalar>(
    name: impl Into<String>,
    s: &ExposureSample,
    bins: usize,
    epsilon: f64,
) -> Result<Prepared<S>> {
    if !s.gt.same_shape(&s.short) {
        return Err(NetError::shape("ground truth differs from inputs in shape"));
    }
    Ok(Prepared {
        name: name.into(),
        input: prepare_input(&s.short, &s.long, &s.events, &s.timing, bins, epsilon)?,
        gt: Some(Tensor::from_frame(&s.gt)),
    })
}
