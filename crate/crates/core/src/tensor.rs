//! Dense m-way tensors in row-major order (last axis fastest).
//!
//! A flat index `f` of a tensor with sizes `(n_1, .., n_m)` corresponds to the
//! multi-index `(i_1, .., i_m)` with `f = ((i_1 * n_2 + i_2) * n_3 + i_3) ...`.
//! Every reduction in this module walks the data in flat order with a single
//! sequential accumulator per output slot, so results are bit-reproducible.

use serde::{Deserialize, Serialize};

use crate::error::{MotError, Result};
use crate::scalar::Real;

/// Per-axis sizes of a dense tensor.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Shape {
    sizes: Vec<usize>,
    len: usize,
}

impl Shape {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(MotError::Shape("a tensor needs at least one axis".into()));
        }
        if let Some(k) = sizes.iter().position(|&n| n == 0) {
            return Err(MotError::Shape(format!("axis {k} has size 0")));
        }
        let len = sizes
            .iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(n))
            .filter(|&l| l <= isize::MAX as usize / 8)
            .ok_or_else(|| MotError::Shape(format!("element count of {sizes:?} overflows")))?;
        Ok(Shape { sizes, len })
    }

    /// `m` axes of size `n` each.
    pub fn cubic(n: usize, m: usize) -> Result<Self> {
        Shape::new(vec![n; m])
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn order(&self) -> usize {
        self.sizes.len()
    }

    /// Total number of elements.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn size(&self, axis: usize) -> usize {
        self.sizes[axis]
    }

    /// Common axis size if all axes agree.
    pub fn uniform_size(&self) -> Option<usize> {
        let n = self.sizes[0];
        self.sizes.iter().all(|&s| s == n).then_some(n)
    }

    pub fn check_axis(&self, axis: usize) -> Result<()> {
        if axis < self.order() {
            Ok(())
        } else {
            Err(MotError::AxisOutOfRange {
                axis,
                order: self.order(),
            })
        }
    }

    /// View the flat data as `[outer, n_axis, inner]`.
    pub fn split(&self, axis: usize) -> (usize, usize, usize) {
        let outer = self.sizes[..axis].iter().product();
        let inner = self.sizes[axis + 1..].iter().product();
        (outer, self.sizes[axis], inner)
    }

    pub fn flat_index(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.order());
        index
            .iter()
            .zip(&self.sizes)
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.order()];
        for (slot, &n) in idx.iter_mut().zip(&self.sizes).rev() {
            *slot = flat % n;
            flat /= n;
        }
        idx
    }

    /// Shape with one axis removed; `None` for a one-axis shape.
    pub fn without_axis(&self, axis: usize) -> Option<Shape> {
        if self.order() == 1 {
            return None;
        }
        let mut sizes = self.sizes.clone();
        sizes.remove(axis);
        Shape::new(sizes).ok()
    }
}

impl TryFrom<Vec<usize>> for Shape {
    type Error = MotError;
    fn try_from(sizes: Vec<usize>) -> Result<Self> {
        Shape::new(sizes)
    }
}

impl From<Shape> for Vec<usize> {
    fn from(s: Shape) -> Self {
        s.sizes
    }
}

/// Odometer over multi-indices in row-major order.
pub struct MultiIndexIter<'a> {
    sizes: &'a [usize],
    current: Vec<usize>,
    done: bool,
}

impl<'a> MultiIndexIter<'a> {
    pub fn new(shape: &'a Shape) -> Self {
        MultiIndexIter {
            sizes: shape.sizes(),
            current: vec![0; shape.order()],
            done: false,
        }
    }

    /// Step the odometer; returns false once it wraps around.
    pub fn step(&mut self) -> bool {
        if self.done {
            return false;
        }
        for k in (0..self.sizes.len()).rev() {
            self.current[k] += 1;
            if self.current[k] < self.sizes[k] {
                return true;
            }
            self.current[k] = 0;
        }
        self.done = true;
        false
    }

    pub fn current(&self) -> &[usize] {
        &self.current
    }
}

/// Dense real tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor<T> {
    shape: Shape,
    data: Vec<T>,
}

impl<T: Real> DenseTensor<T> {
    pub fn from_vec(shape: Shape, data: Vec<T>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(MotError::Shape(format!(
                "data length {} does not match shape {:?} ({} elements)",
                data.len(),
                shape.sizes(),
                shape.len()
            )));
        }
        Ok(DenseTensor { shape, data })
    }

    pub fn filled(shape: Shape, value: T) -> Self {
        let data = vec![value; shape.len()];
        DenseTensor { shape, data }
    }

    pub fn zeros(shape: Shape) -> Self {
        Self::filled(shape, T::zero())
    }

    /// Build entrywise from the multi-index.
    pub fn from_fn(shape: Shape, mut f: impl FnMut(&[usize]) -> T) -> Self {
        let mut data = Vec::with_capacity(shape.len());
        let mut it = MultiIndexIter::new(&shape);
        loop {
            data.push(f(it.current()));
            if !it.step() {
                break;
            }
        }
        DenseTensor { shape, data }
    }

    /// Rank-one tensor `v_1 ⊗ v_2 ⊗ .. ⊗ v_m`.
    pub fn outer_product(vectors: &[Vec<T>]) -> Result<Self> {
        let shape = Shape::new(vectors.iter().map(Vec::len).collect())?;
        let mut data = vec![T::one()];
        for v in vectors {
            let mut next = Vec::with_capacity(data.len() * v.len());
            for &a in &data {
                next.extend(v.iter().map(|&b| a * b));
            }
            data = next;
        }
        Ok(DenseTensor { shape, data })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.order()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, index: &[usize]) -> T {
        self.data[self.shape.flat_index(index)]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        DenseTensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// `a * self + b * other`.
    pub fn lin_comb(&self, a: T, other: &Self, b: T) -> Result<Self> {
        self.check_same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&x, &y)| a * x + b * y)
            .collect();
        Ok(DenseTensor {
            shape: self.shape.clone(),
            data,
        })
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(MotError::ShapeMismatch {
                left: self.shape.sizes().to_vec(),
                right: other.shape.sizes().to_vec(),
            });
        }
        Ok(())
    }

    /// k-th marginal: sum over every axis except `axis`.
    pub fn marginal(&self, axis: usize) -> Result<Vec<T>> {
        self.shape.check_axis(axis)?;
        let (outer, n, inner) = self.shape.split(axis);
        let mut out = vec![T::zero(); n];
        for o in 0..outer {
            let block = &self.data[o * n * inner..(o + 1) * n * inner];
            for (j, slot) in out.iter_mut().enumerate() {
                for &x in &block[j * inner..(j + 1) * inner] {
                    *slot = *slot + x;
                }
            }
        }
        Ok(out)
    }

    pub fn marginals(&self) -> Vec<Vec<T>> {
        (0..self.order())
            .map(|k| self.marginal(k).expect("axis in range"))
            .collect()
    }

    /// Frobenius inner product.
    pub fn inner(&self, other: &Self) -> Result<T> {
        self.check_same_shape(other)?;
        let mut acc = T::zero();
        for (&a, &b) in self.data.iter().zip(&other.data) {
            acc = acc + a * b;
        }
        Ok(acc)
    }

    pub fn sum(&self) -> T {
        let mut acc = T::zero();
        for &x in &self.data {
            acc = acc + x;
        }
        acc
    }

    pub fn norm1(&self) -> T {
        let mut acc = T::zero();
        for &x in &self.data {
            acc = acc + x.abs();
        }
        acc
    }

    pub fn norm_inf(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }

    pub fn min_entry(&self) -> T {
        self.data.iter().fold(T::infinity(), |m, &x| m.min(x))
    }

    pub fn is_nonnegative(&self) -> bool {
        self.data.iter().all(|&x| x >= T::zero())
    }

    /// Multiply every slice `i_axis = j` by `factors[j]`.
    pub fn scale_axis(&mut self, axis: usize, factors: &[T]) -> Result<()> {
        self.shape.check_axis(axis)?;
        let (outer, n, inner) = self.shape.split(axis);
        if factors.len() != n {
            return Err(MotError::Shape(format!(
                "{} factors for an axis of size {n}",
                factors.len()
            )));
        }
        for o in 0..outer {
            for (j, &z) in factors.iter().enumerate() {
                let start = (o * n + j) * inner;
                for x in &mut self.data[start..start + inner] {
                    *x = *x * z;
                }
            }
        }
        Ok(())
    }

    /// Add `offsets[j]` to every entry of slice `i_axis = j`.
    pub fn shift_axis(&mut self, axis: usize, offsets: &[T]) -> Result<()> {
        self.shape.check_axis(axis)?;
        let (outer, n, inner) = self.shape.split(axis);
        if offsets.len() != n {
            return Err(MotError::Shape(format!(
                "{} offsets for an axis of size {n}",
                offsets.len()
            )));
        }
        for o in 0..outer {
            for (j, &d) in offsets.iter().enumerate() {
                let start = (o * n + j) * inner;
                for x in &mut self.data[start..start + inner] {
                    *x = *x + d;
                }
            }
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> DenseTensor<U> {
        DenseTensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .map(|&x| U::lit(x.to_f64_lossy()))
                .collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// log-domain reductions

/// `log Σ exp(x_i)` with the running maximum subtracted first.
///
/// Returns `-inf` when every summand is `-inf` (zero mass).
pub fn log_sum_exp<T: Real>(values: &[T]) -> T {
    let max = values.iter().fold(T::neg_infinity(), |m, &x| m.max(x));
    if max == T::neg_infinity() || !max.is_finite() {
        return max;
    }
    let mut acc = T::zero();
    for &x in values {
        acc = acc + (x - max).exp();
    }
    max + acc.ln()
}

/// Log-sum-exp over every axis except `axis` of a tensor of log values.
pub fn lse_axis<T: Real>(logs: &DenseTensor<T>, axis: usize) -> Result<Vec<T>> {
    logs.shape.check_axis(axis)?;
    let (outer, n, inner) = logs.shape.split(axis);
    let data = logs.data();
    let mut max = vec![T::neg_infinity(); n];
    for o in 0..outer {
        for (j, mj) in max.iter_mut().enumerate() {
            let start = (o * n + j) * inner;
            for &x in &data[start..start + inner] {
                *mj = mj.max(x);
            }
        }
    }
    let mut acc = vec![T::zero(); n];
    for o in 0..outer {
        for j in 0..n {
            if !max[j].is_finite() {
                continue;
            }
            let start = (o * n + j) * inner;
            for &x in &data[start..start + inner] {
                acc[j] = acc[j] + (x - max[j]).exp();
            }
        }
    }
    Ok(max
        .into_iter()
        .zip(acc)
        .map(|(m, s)| if m.is_finite() { m + s.ln() } else { m })
        .collect())
}

/// Log-sum-exp along `axis` only, leaving an (m-1)-way tensor of logs.
///
/// `None` when the input has a single axis.
pub fn lse_collapse<T: Real>(logs: &DenseTensor<T>, axis: usize) -> Result<Option<DenseTensor<T>>> {
    logs.shape.check_axis(axis)?;
    let Some(shape) = logs.shape.without_axis(axis) else {
        return Ok(None);
    };
    let (outer, n, inner) = logs.shape.split(axis);
    let data = logs.data();
    let mut out = Vec::with_capacity(outer * inner);
    let mut max = vec![T::neg_infinity(); inner];
    let mut acc = vec![T::zero(); inner];
    for o in 0..outer {
        max.iter_mut().for_each(|x| *x = T::neg_infinity());
        acc.iter_mut().for_each(|x| *x = T::zero());
        for j in 0..n {
            let row = &data[(o * n + j) * inner..(o * n + j + 1) * inner];
            for (mx, &x) in max.iter_mut().zip(row) {
                *mx = mx.max(x);
            }
        }
        for j in 0..n {
            let row = &data[(o * n + j) * inner..(o * n + j + 1) * inner];
            for ((a, &mx), &x) in acc.iter_mut().zip(&max).zip(row) {
                if mx.is_finite() {
                    *a = *a + (x - mx).exp();
                }
            }
        }
        out.extend(
            max.iter()
                .zip(&acc)
                .map(|(&m, &s)| if m.is_finite() { m + s.ln() } else { m }),
        );
    }
    Ok(Some(DenseTensor::from_vec(shape, out)?))
}

/// Entries `Σ_k beta_k[i_k] - scaled_cost[i]`, i.e. the logarithm of the
/// implicit plan `B(beta)` when `scaled_cost = C / eta`.
pub fn log_kernel<T: Real>(beta: &[Vec<T>], scaled_cost: &DenseTensor<T>) -> Result<DenseTensor<T>> {
    let sizes: Vec<usize> = beta.iter().map(Vec::len).collect();
    if sizes != scaled_cost.shape.sizes() {
        return Err(MotError::ShapeMismatch {
            left: sizes,
            right: scaled_cost.shape.sizes().to_vec(),
        });
    }
    let mut acc = vec![T::zero()];
    for b in beta {
        let mut next = Vec::with_capacity(acc.len() * b.len());
        for &a in &acc {
            next.extend(b.iter().map(|&x| a + x));
        }
        acc = next;
    }
    for (a, &c) in acc.iter_mut().zip(scaled_cost.data()) {
        *a = *a - c;
    }
    DenseTensor::from_vec(scaled_cost.shape.clone(), acc)
}

/// `log r_axis(B(beta))` computed entirely in the log domain.
pub fn lse_marginal<T: Real>(
    beta: &[Vec<T>],
    scaled_cost: &DenseTensor<T>,
    axis: usize,
) -> Result<Vec<T>> {
    scaled_cost.shape.check_axis(axis)?;
    let logs = log_kernel(beta, scaled_cost)?;
    lse_axis(&logs, axis)
}

/// Explicit `B(beta)`; only for instances small enough to hold in memory.
pub fn materialize<T: Real>(beta: &[Vec<T>], scaled_cost: &DenseTensor<T>) -> Result<DenseTensor<T>> {
    Ok(log_kernel(beta, scaled_cost)?.map(|x| x.exp()))
}
