//! Class and box heads, and the box residual codec.

use rand::Rng;

use super::scene::NUM_CLASSES;
use crate::error::{Error, Result};
use crate::geom3d::Aabb3;
use crate::neural::params::prefixed;
use crate::neural::{MlpCache, MlpParams, ParamView, Parameters, Tensor2};
use crate::scalar::Real;

pub const BOX_DIM: usize = 6;

/// Residual of `gt` relative to `proposal`: center offsets in units of the
/// proposal's side lengths, then log side-length ratios.
pub fn encode_box(gt: &Aabb3<f64>, proposal: &Aabb3<f64>) -> Result<[f64; BOX_DIM]> {
    let (gc, gs, pc, ps) = (gt.center(), gt.size(), proposal.center(), proposal.size());
    let mut r = [0.0; BOX_DIM];
    for a in 0..3 {
        if !(ps[a] > 0.0 && gs[a] > 0.0) {
            return Err(Error::invalid("box codec needs boxes with positive sides"));
        }
        r[a] = (gc[a] - pc[a]) / ps[a];
        r[3 + a] = (gs[a] / ps[a]).ln();
    }
    Ok(r)
}

pub fn decode_box(residual: &[f64], proposal: &Aabb3<f64>) -> Result<Aabb3<f64>> {
    if residual.len() != BOX_DIM {
        return Err(Error::dims("decode_box residual", BOX_DIM, residual.len()));
    }
    let (pc, ps) = (proposal.center(), proposal.size());
    let center = std::array::from_fn(|a| pc[a] + residual[a] * ps[a]);
    // Clamping the log ratio keeps an untrained head from producing infinities.
    let size = std::array::from_fn(|a| ps[a] * residual[3 + a].clamp(-10.0, 10.0).exp());
    Aabb3::from_center_size(center, size)
}

/// Classification head over `NUM_CLASSES + 1` outputs (last is background)
/// and a box head over [`BOX_DIM`] residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionHeads<T> {
    pub class_head: MlpParams<T>,
    pub box_head: MlpParams<T>,
}

#[derive(Debug, Clone)]
pub struct HeadsCache<T> {
    class_cache: MlpCache<T>,
    box_cache: MlpCache<T>,
}

impl<T: Real> DetectionHeads<T> {
    /// Random hidden layers; the box head's output layer starts at zero so
    /// an untrained model returns its proposals unchanged.
    pub fn init<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let class_head = MlpParams::init(&[input, hidden, NUM_CLASSES + 1], rng);
        let mut box_head = MlpParams::init(&[input, hidden, BOX_DIM], rng);
        if let Some(last) = box_head.layers.last_mut() {
            last.weights.data_mut().iter_mut().for_each(|v| *v = T::zero());
            last.bias.iter_mut().for_each(|v| *v = T::zero());
        }
        Self { class_head, box_head }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            class_head: MlpParams::zeros(&[input, hidden, NUM_CLASSES + 1]),
            box_head: MlpParams::zeros(&[input, hidden, BOX_DIM]),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self { class_head: self.class_head.zeros_like(), box_head: self.box_head.zeros_like() }
    }

    pub fn input_dim(&self) -> usize {
        self.class_head.input_dim()
    }

    /// `(class_logits, box_residuals, cache)`.
    pub fn forward(&self, x: &Tensor2<T>) -> Result<(Tensor2<T>, Tensor2<T>, HeadsCache<T>)> {
        let (logits, class_cache) = self.class_head.forward(x)?;
        let (boxes, box_cache) = self.box_head.forward(x)?;
        Ok((logits, boxes, HeadsCache { class_cache, box_cache }))
    }

    /// Parameter gradients and the gradient on the head input.
    pub fn backward(&self, cache: &HeadsCache<T>, d_logits: &Tensor2<T>, d_boxes: &Tensor2<T>) -> Result<(Self, Tensor2<T>)> {
        let (class_head, mut dx) = self.class_head.backward(&cache.class_cache, d_logits)?;
        let (box_head, dx_box) = self.box_head.backward(&cache.box_cache, d_boxes)?;
        for (a, &b) in dx.data_mut().iter_mut().zip(dx_box.data()) {
            *a += b;
        }
        Ok((Self { class_head, box_head }, dx))
    }
}

impl<T: Real> Parameters<T> for DetectionHeads<T> {
    fn param_views(&self) -> Vec<ParamView<'_, T>> {
        let mut v: Vec<_> = prefixed("class_head", self.class_head.param_views()).collect();
        v.extend(prefixed("box_head", self.box_head.param_views()));
        v
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [T]> {
        let mut v = self.class_head.param_slices_mut();
        v.extend(self.box_head.param_slices_mut());
        v
    }
}
