use rand::Rng as _;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::linalg::Matrix;
use crate::rng::{self, Stream};
use crate::scalar::Scalar;
use crate::{Error, Result};

/// Encoder dimensions: MCC embedding width `k`, vocabulary size `vocab`
/// (UNK included) and LSTM hidden size `hidden`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub k: usize,
    pub vocab: usize,
    pub hidden: usize,
}

impl Dims {
    pub fn new(k: usize, vocab: usize, hidden: usize) -> Result<Self> {
        if k == 0 || vocab == 0 || hidden == 0 {
            return Err(Error::invalid(format!(
                "dims must be positive (k={k}, vocab={vocab}, hidden={hidden})"
            )));
        }
        Ok(Self { k, vocab, hidden })
    }

    /// Event embedding width: MCC embedding plus the amount channel.
    pub fn input(&self) -> usize {
        self.k + 1
    }

    pub fn gates(&self) -> usize {
        4 * self.hidden
    }
}

/// Encoder parameters.
///
/// The four LSTM gates are stacked row-wise in the order input, forget,
/// cell candidate, output: rows `[0, H)` of `w`, `u` and `b` belong to the
/// input gate, `[H, 2H)` to the forget gate and so on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams<T> {
    pub dims: Dims,
    /// `V × k`, one row per vocabulary index.
    pub mcc_table: Matrix<T>,
    /// Replaces the whole `(k+1)` event embedding at masked positions.
    pub mask_vector: Vec<T>,
    /// `4H × (k+1)` input weights.
    pub w: Matrix<T>,
    /// `4H × H` recurrent weights.
    pub u: Matrix<T>,
    /// `4H` gate biases.
    pub b: Vec<T>,
    /// `(k+1) × H` masked-prediction projection.
    pub proj: Matrix<T>,
    /// `k+1` masked-prediction bias.
    pub proj_bias: Vec<T>,
}

/// Gradients share the parameter layout.
pub type Gradients<T> = ModelParams<T>;

/// Tensor names in serialization order.
pub const TENSOR_NAMES: [&str; 7] = ["mcc_table", "mask_vector", "w", "u", "b", "proj", "proj_bias"];

impl<T: Scalar> ModelParams<T> {
    pub fn zeros(dims: Dims) -> Self {
        let (k, h) = (dims.k, dims.hidden);
        Self {
            dims,
            mcc_table: Matrix::zeros(dims.vocab, k),
            mask_vector: vec![T::zero(); k + 1],
            w: Matrix::zeros(4 * h, k + 1),
            u: Matrix::zeros(4 * h, h),
            b: vec![T::zero(); 4 * h],
            proj: Matrix::zeros(k + 1, h),
            proj_bias: vec![T::zero(); k + 1],
        }
    }

    /// Weights uniform in `±1/sqrt(fan_in)`; lookup tables (MCC table and
    /// mask vector) have fan-in 1. Biases are zero except the forget gate,
    /// which starts at 1.
    pub fn init(dims: Dims, seed: u64) -> Self {
        let mut p = Self::zeros(dims);
        let mut rng = rng::stream(seed, Stream::Init, &[]);
        let mut fill = |xs: &mut [T], fan_in: usize| {
            let a = 1.0 / (fan_in as f64).sqrt();
            for x in xs {
                *x = T::of(rng.random_range(-a..a));
            }
        };
        fill(p.mcc_table.as_mut_slice(), 1);
        fill(&mut p.mask_vector, 1);
        fill(p.w.as_mut_slice(), dims.input());
        fill(p.u.as_mut_slice(), dims.hidden);
        fill(&mut p.proj.as_mut_slice()[..], dims.hidden);
        let h = dims.hidden;
        p.b[h..2 * h].iter_mut().for_each(|x| *x = T::one());
        p
    }

    pub fn tensors(&self) -> [(&'static str, &[T]); 7] {
        [
            (TENSOR_NAMES[0], self.mcc_table.as_slice()),
            (TENSOR_NAMES[1], &self.mask_vector),
            (TENSOR_NAMES[2], self.w.as_slice()),
            (TENSOR_NAMES[3], self.u.as_slice()),
            (TENSOR_NAMES[4], &self.b),
            (TENSOR_NAMES[5], self.proj.as_slice()),
            (TENSOR_NAMES[6], &self.proj_bias),
        ]
    }

    pub fn tensors_mut(&mut self) -> [(&'static str, &mut [T]); 7] {
        [
            (TENSOR_NAMES[0], self.mcc_table.as_mut_slice()),
            (TENSOR_NAMES[1], &mut self.mask_vector),
            (TENSOR_NAMES[2], self.w.as_mut_slice()),
            (TENSOR_NAMES[3], self.u.as_mut_slice()),
            (TENSOR_NAMES[4], &mut self.b),
            (TENSOR_NAMES[5], self.proj.as_mut_slice()),
            (TENSOR_NAMES[6], &mut self.proj_bias),
        ]
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|x| x.is_finite()))
    }

    pub fn fill(&mut self, v: T) {
        for (_, t) in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x = v);
        }
    }

    /// `self += a * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &Self, a: T) {
        assert_eq!(self.dims, other.dims, "parameter dims differ");
        for ((_, dst), (_, src)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (d, &s) in dst.iter_mut().zip(src) {
                *d += a * s;
            }
        }
    }

    pub fn scale(&mut self, a: T) {
        for (_, t) in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= a);
        }
    }

    pub fn global_norm(&self) -> T {
        self.tensors()
            .iter()
            .flat_map(|(_, t)| t.iter())
            .map(|&x| x * x)
            .sum::<T>()
            .sqrt()
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        let v = |xs: &[T]| xs.iter().map(|&x| U::of(x.as_f64())).collect::<Vec<U>>();
        ModelParams {
            dims: self.dims,
            mcc_table: self.mcc_table.cast(),
            mask_vector: v(&self.mask_vector),
            w: self.w.cast(),
            u: self.u.cast(),
            b: v(&self.b),
            proj: self.proj.cast(),
            proj_bias: v(&self.proj_bias),
        }
    }

    /// SHA-256 over the dims and every tensor's little-endian `f64` bits.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for d in [self.dims.k, self.dims.vocab, self.dims.hidden] {
            hasher.update((d as u64).to_le_bytes());
        }
        for (name, t) in self.tensors() {
            hasher.update(name.as_bytes());
            for &x in t {
                hasher.update(x.as_f64().to_bits().to_le_bytes());
            }
        }
        hex(&hasher.finalize())
    }

    pub(crate) fn check_shapes(&self) -> Result<()> {
        let d = self.dims;
        let ok = self.mcc_table.shape() == (d.vocab, d.k)
            && self.mask_vector.len() == d.input()
            && self.w.shape() == (d.gates(), d.input())
            && self.u.shape() == (d.gates(), d.hidden)
            && self.b.len() == d.gates()
            && self.proj.shape() == (d.input(), d.hidden)
            && self.proj_bias.len() == d.input();
        if ok {
            Ok(())
        } else {
            Err(Error::Shape(format!("parameter tensors inconsistent with {d:?}")))
        }
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_shapes_match_dims() {
        let d = Dims::new(24, 344, 512).unwrap();
        let p = ModelParams::<f64>::init(d, 1);
        assert_eq!(p.mcc_table.shape(), (344, 24));
        assert_eq!(p.mask_vector.len(), 25);
        assert_eq!(p.w.shape(), (2048, 25));
        assert_eq!(p.u.shape(), (2048, 512));
        assert_eq!(p.b.len(), 2048);
        assert_eq!(p.proj.shape(), (25, 512));
        assert_eq!(p.proj_bias.len(), 25);
        p.check_shapes().unwrap();
    }

    #[test]
    fn init_is_deterministic_with_forget_bias_one() {
        let d = Dims::new(3, 7, 5).unwrap();
        let a = ModelParams::<f64>::init(d, 9);
        let b = ModelParams::<f64>::init(d, 9);
        assert_eq!(a, b);
        assert_ne!(a, ModelParams::<f64>::init(d, 10));
        assert!(a.b[5..10].iter().all(|&x| x == 1.0));
        assert!(a.b[..5].iter().chain(&a.b[10..]).all(|&x| x == 0.0));
        assert!(a.proj_bias.iter().all(|&x| x == 0.0));
        let bound = 1.0 / 4f64.sqrt();
        assert!(a.w.as_slice().iter().all(|x| x.abs() < bound));
    }

    #[test]
    fn f32_init_is_rounded_f64_init() {
        let d = Dims::new(2, 3, 4).unwrap();
        let a = ModelParams::<f64>::init(d, 1);
        let b = ModelParams::<f32>::init(d, 1);
        assert_eq!(a.cast::<f32>(), b);
    }

    #[test]
    fn zero_dims_rejected() {
        assert!(Dims::new(0, 1, 1).is_err());
    }

    #[test]
    fn fingerprint_tracks_values() {
        let d = Dims::new(2, 3, 4).unwrap();
        let mut p = ModelParams::<f64>::init(d, 1);
        let f = p.fingerprint();
        assert_eq!(f.len(), 64);
        p.u.as_mut_slice()[3] += 1e-12;
        assert_ne!(f, p.fingerprint());
    }
}
