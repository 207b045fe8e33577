use crate::linalg::{dot, norm};
use crate::scalar::Scalar;

/// Norm floor applied before dividing.
pub const NORM_EPS: f64 = 1e-12;

pub fn cosine_similarity<T: Scalar>(u: &[T], v: &[T]) -> T {
    let eps = T::of(NORM_EPS);
    dot(u, v) / (norm(u).max(eps) * norm(v).max(eps))
}

pub fn cosine_distance<T: Scalar>(u: &[T], v: &[T]) -> T {
    T::one() - cosine_similarity(u, v)
}

/// Similarity together with its gradients `(s, ∂s/∂u, ∂s/∂v)`. A clamped
/// norm is treated as the constant floor.
pub fn cosine_similarity_grad<T: Scalar>(u: &[T], v: &[T]) -> (T, Vec<T>, Vec<T>) {
    let eps = T::of(NORM_EPS);
    let (nu_raw, nv_raw) = (norm(u), norm(v));
    let (nu, nv) = (nu_raw.max(eps), nv_raw.max(eps));
    let s = dot(u, v) / (nu * nv);
    let inv = T::one() / (nu * nv);
    let cu = if nu_raw >= eps { s / (nu * nu) } else { T::zero() };
    let cv = if nv_raw >= eps { s / (nv * nv) } else { T::zero() };
    let du = u.iter().zip(v).map(|(&a, &b)| b * inv - cu * a).collect();
    let dv = u.iter().zip(v).map(|(&a, &b)| a * inv - cv * b).collect();
    (s, du, dv)
}
