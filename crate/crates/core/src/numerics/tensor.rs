//! Dense row-major `f64` tensors and the forward primitives.
//!
//! Every primitive treats its operands as matrices: the last axis is the
//! column axis, all leading axes are folded into rows.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Tensor> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::Argument(format!("tensor shape {shape:?} must have positive extents")));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::Shape { op: "tensor", left: shape, right: vec![data.len()] });
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Tensor {
        Tensor::filled(shape, 0.0)
    }

    pub fn filled(shape: &[usize], value: f64) -> Tensor {
        let n = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: vec![value; n] }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Tensor> {
        Tensor::new(vec![rows, cols], data)
    }

    pub fn scalar(value: f64) -> Tensor {
        Tensor { shape: vec![1, 1], data: vec![value] }
    }

    pub fn row(values: &[f64]) -> Tensor {
        Tensor { shape: vec![1, values.len()], data: values.to_vec() }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Tensor> {
        let cols = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Argument("ragged rows".into()));
        }
        Tensor::new(vec![rows.len(), cols], rows.concat())
    }

    pub fn identity(n: usize) -> Tensor {
        let mut t = Tensor::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn cols(&self) -> usize {
        *self.shape.last().unwrap()
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.cols()
    }

    pub fn row_slice(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols() + c]
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> Option<f64> {
        (self.data.len() == 1).then(|| self.data[0])
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn fill_zero(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn sum_squares(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub(crate) fn raw(shape: Vec<usize>, data: Vec<f64>) -> Tensor {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor { shape, data }
    }

    pub(crate) fn with_rows(rows: usize, cols: usize, data: Vec<f64>) -> Tensor {
        Tensor::raw(vec![rows, cols], data)
    }
}

/// `c = alpha * a·b + beta * c` on strided row/column views.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (isize, isize),
    b: &[f64],
    (rsb, csb): (isize, isize),
    beta: f64,
    c: &mut [f64],
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    // SAFETY: the asserted lengths cover every element addressed by the
    // strides the callers pass (dense row-major or its transpose).
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn check(t: Tensor, op: &'static str) -> Result<Tensor> {
    if t.is_finite() {
        Ok(t)
    } else {
        Err(Error::Numeric(format!("{op} produced a non-finite value")))
    }
}

pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, k) = (a.rows(), a.cols());
    if b.shape.len() != 2 || b.rows() != k {
        return Err(Error::Shape { op: "matmul", left: a.shape.clone(), right: b.shape.clone() });
    }
    let n = b.cols();
    let mut out = vec![0.0; m * n];
    gemm(m, k, n, &a.data, (k as isize, 1), &b.data, (n as isize, 1), 0.0, &mut out);
    check(Tensor::with_rows(m, n, out), "matmul")
}

/// Elementwise sum; `b` may also be a single row broadcast over `a`'s rows.
pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let data = if a.shape == b.shape {
        a.data.iter().zip(&b.data).map(|(x, y)| x + y).collect()
    } else if b.rows() == 1 && b.cols() == a.cols() {
        let c = a.cols();
        a.data.iter().enumerate().map(|(i, x)| x + b.data[i % c]).collect()
    } else {
        return Err(Error::Shape { op: "add", left: a.shape.clone(), right: b.shape.clone() });
    };
    check(Tensor::raw(a.shape.clone(), data), "add")
}

pub fn mul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.shape != b.shape {
        return Err(Error::Shape { op: "mul", left: a.shape.clone(), right: b.shape.clone() });
    }
    let data = a.data.iter().zip(&b.data).map(|(x, y)| x * y).collect();
    check(Tensor::raw(a.shape.clone(), data), "mul")
}

/// Scales row `r` of `a` by `b[r]`; `b` has one column.
pub fn mul_col(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if b.cols() != 1 || b.rows() != a.rows() {
        return Err(Error::Shape { op: "mul_col", left: a.shape.clone(), right: b.shape.clone() });
    }
    let c = a.cols();
    let data = a.data.iter().enumerate().map(|(i, x)| x * b.data[i / c]).collect();
    check(Tensor::raw(a.shape.clone(), data), "mul_col")
}

pub fn scale(a: &Tensor, factor: f64) -> Result<Tensor> {
    check(Tensor::raw(a.shape.clone(), a.data.iter().map(|x| x * factor).collect()), "scale")
}

pub fn tanh(a: &Tensor) -> Tensor {
    Tensor::raw(a.shape.clone(), a.data.iter().map(|x| x.tanh()).collect())
}

pub(crate) fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid(a: &Tensor) -> Tensor {
    Tensor::raw(a.shape.clone(), a.data.iter().map(|&x| sigmoid_scalar(x)).collect())
}

/// Row-wise softmax with max subtraction. Entries whose `mask` value is
/// zero get probability zero; every row must keep at least one entry.
pub fn softmax(a: &Tensor, mask: Option<&Tensor>) -> Result<Tensor> {
    if let Some(m) = mask {
        if m.shape != a.shape {
            return Err(Error::Shape { op: "softmax", left: a.shape.clone(), right: m.shape.clone() });
        }
    }
    let c = a.cols();
    let mut out = vec![0.0; a.data.len()];
    for r in 0..a.rows() {
        let row = &a.data[r * c..(r + 1) * c];
        let keep = |j: usize| mask.is_none_or(|m| m.data[r * c + j] != 0.0);
        let max = (0..c).filter(|&j| keep(j)).map(|j| row[j]).fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(Error::Argument("softmax row is fully masked".into()));
        }
        let dst = &mut out[r * c..(r + 1) * c];
        let mut total = 0.0;
        for j in 0..c {
            if keep(j) {
                dst[j] = (row[j] - max).exp();
                total += dst[j];
            }
        }
        dst.iter_mut().for_each(|v| *v /= total);
    }
    check(Tensor::raw(a.shape.clone(), out), "softmax")
}

/// Row-wise log-softmax.
pub fn log_softmax(a: &Tensor) -> Tensor {
    let c = a.cols();
    let mut out = a.data.clone();
    for row in out.chunks_mut(c) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        row.iter_mut().for_each(|v| *v -= lse);
    }
    Tensor::raw(a.shape.clone(), out)
}

pub fn concat_cols(parts: &[&Tensor]) -> Result<Tensor> {
    let rows = parts.first().map(|t| t.rows()).ok_or_else(|| Error::Argument("empty concat".into()))?;
    if let Some(bad) = parts.iter().find(|t| t.rows() != rows) {
        return Err(Error::Shape { op: "concat", left: parts[0].shape.clone(), right: bad.shape.clone() });
    }
    let cols: usize = parts.iter().map(|t| t.cols()).sum();
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for p in parts {
            out.extend_from_slice(p.row_slice(r));
        }
    }
    Ok(Tensor::with_rows(rows, cols, out))
}

pub fn stack_rows(parts: &[&Tensor]) -> Result<Tensor> {
    let cols = parts.first().map(|t| t.cols()).ok_or_else(|| Error::Argument("empty stack".into()))?;
    if let Some(bad) = parts.iter().find(|t| t.cols() != cols) {
        return Err(Error::Shape { op: "stack_rows", left: parts[0].shape.clone(), right: bad.shape.clone() });
    }
    let data: Vec<f64> = parts.iter().flat_map(|t| t.data.iter().copied()).collect();
    Ok(Tensor::with_rows(data.len() / cols, cols, data))
}

pub fn slice_cols(a: &Tensor, start: usize, end: usize) -> Result<Tensor> {
    if start >= end || end > a.cols() {
        return Err(Error::Shape { op: "slice_cols", left: a.shape.clone(), right: vec![start, end] });
    }
    let w = end - start;
    let mut out = Vec::with_capacity(a.rows() * w);
    for r in 0..a.rows() {
        out.extend_from_slice(&a.row_slice(r)[start..end]);
    }
    Ok(Tensor::with_rows(a.rows(), w, out))
}

/// Row lookup: output row `i` is `a[indices[i]]`.
pub fn gather_rows(a: &Tensor, indices: &[usize]) -> Result<Tensor> {
    if indices.is_empty() {
        return Err(Error::Argument("gather with no indices".into()));
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= a.rows()) {
        return Err(Error::Shape { op: "gather_rows", left: a.shape.clone(), right: vec![bad] });
    }
    let c = a.cols();
    let mut out = Vec::with_capacity(indices.len() * c);
    for &i in indices {
        out.extend_from_slice(a.row_slice(i));
    }
    Ok(Tensor::with_rows(indices.len(), c, out))
}

/// Row sums as a one-column tensor.
pub fn sum_cols(a: &Tensor) -> Tensor {
    let data = (0..a.rows()).map(|r| a.row_slice(r).iter().sum()).collect();
    Tensor::with_rows(a.rows(), 1, data)
}

/// Row `r` from `new` where `keep[r]`, else from `old`.
pub fn select_rows(new: &Tensor, old: &Tensor, keep: &[bool]) -> Result<Tensor> {
    if new.shape != old.shape || keep.len() != new.rows() {
        return Err(Error::Shape { op: "select_rows", left: new.shape.clone(), right: old.shape.clone() });
    }
    let mut out = Vec::with_capacity(new.data.len());
    for (r, &k) in keep.iter().enumerate() {
        out.extend_from_slice(if k { new.row_slice(r) } else { old.row_slice(r) });
    }
    Ok(Tensor::raw(new.shape.clone(), out))
}

/// Summed negative log-likelihood of `targets` under row-wise softmax of
/// `logits`; rows with no target are skipped.
pub fn nll_sum(logits: &Tensor, targets: &[Option<usize>]) -> Result<f64> {
    if targets.len() != logits.rows() {
        return Err(Error::Shape { op: "nll", left: logits.shape.clone(), right: vec![targets.len()] });
    }
    let c = logits.cols();
    let mut total = 0.0;
    for (r, t) in targets.iter().enumerate() {
        let Some(t) = *t else { continue };
        if t >= c {
            return Err(Error::Shape { op: "nll", left: logits.shape.clone(), right: vec![t] });
        }
        let row = logits.row_slice(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total += lse - row[t];
    }
    if total.is_finite() {
        Ok(total)
    } else {
        Err(Error::Numeric("negative log-likelihood is not finite".into()))
    }
}
