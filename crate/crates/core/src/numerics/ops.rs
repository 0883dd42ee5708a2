use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

use super::{Scalar, Tensor};

/// Gradients of [`linear`] with respect to its three inputs.
#[derive(Debug, Clone)]
pub struct LinearGrads<T> {
    pub input: Tensor<T>,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

fn check_linear<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: &Tensor<T>,
) -> Result<(usize, usize, usize)> {
    let (n, a) = x.matrix_dims()?;
    let (wa, wb) = w.matrix_dims()?;
    if a != wa {
        return Err(Error::shape(format!(
            "linear: input width {a} does not match weight rows {wa}"
        )));
    }
    if b.dims() != [wb] {
        return Err(Error::shape(format!(
            "linear: bias dims {:?} do not match weight cols {wb}",
            b.dims()
        )));
    }
    Ok((n, a, wb))
}

/// `x · W + b` for `x: n×a`, `W: a×b`, `b: b`.
///
/// Each output element sums over `k` in ascending order before the bias is
/// added, so results do not depend on how callers split the work.
pub fn linear<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, a, m) = check_linear(x, w, b)?;
    let (xd, wd, bd) = (x.data(), w.data(), b.data());
    let mut out = vec![T::zero(); n * m];
    for i in 0..n {
        let row = &mut out[i * m..(i + 1) * m];
        for k in 0..a {
            let xik = xd[i * a + k];
            if xik == T::zero() {
                continue;
            }
            let wrow = &wd[k * m..(k + 1) * m];
            for (o, &wv) in row.iter_mut().zip(wrow) {
                *o = *o + xik * wv;
            }
        }
        for (o, &bv) in row.iter_mut().zip(bd) {
            *o = *o + bv;
        }
    }
    Tensor::new(vec![n, m], out)
}

/// Weight and bias gradients of [`linear`]: `xᵀ·g` and the column sums of `g`.
pub fn linear_backward_params<T: Scalar>(
    x: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>)> {
    let (n, a) = x.matrix_dims()?;
    let (gn, m) = grad_out.matrix_dims()?;
    if gn != n {
        return Err(Error::shape(format!(
            "linear backward: input rows {n} do not match gradient rows {gn}"
        )));
    }
    let (xd, gd) = (x.data(), grad_out.data());
    let mut dw = vec![T::zero(); a * m];
    let mut db = vec![T::zero(); m];
    for r in 0..n {
        let grow = &gd[r * m..(r + 1) * m];
        for k in 0..a {
            let xrk = xd[r * a + k];
            if xrk == T::zero() {
                continue;
            }
            let dwrow = &mut dw[k * m..(k + 1) * m];
            for (d, &g) in dwrow.iter_mut().zip(grow) {
                *d = *d + xrk * g;
            }
        }
        for (d, &g) in db.iter_mut().zip(grow) {
            *d = *d + g;
        }
    }
    Ok((Tensor::new(vec![a, m], dw)?, Tensor::new(vec![m], db)?))
}

/// Full backward pass of [`linear`] given the upstream gradient.
pub fn linear_backward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<LinearGrads<T>> {
    let (n, a) = x.matrix_dims()?;
    let (wa, m) = w.matrix_dims()?;
    if wa != a {
        return Err(Error::shape(format!(
            "linear backward: input width {a} does not match weight rows {wa}"
        )));
    }
    if grad_out.dims() != [n, m] {
        return Err(Error::shape(format!(
            "linear backward: gradient dims {:?} do not match output [{n}, {m}]",
            grad_out.dims()
        )));
    }
    let (weight, bias) = linear_backward_params(x, grad_out)?;
    let (wd, gd) = (w.data(), grad_out.data());
    let mut dx = vec![T::zero(); n * a];
    for i in 0..n {
        let grow = &gd[i * m..(i + 1) * m];
        for k in 0..a {
            let wrow = &wd[k * m..(k + 1) * m];
            let mut acc = T::zero();
            for (&g, &wv) in grow.iter().zip(wrow) {
                acc = acc + g * wv;
            }
            dx[i * a + k] = acc;
        }
    }
    Ok(LinearGrads {
        input: Tensor::new(vec![n, a], dx)?,
        weight,
        bias,
    })
}

/// Exact GELU `x·Φ(x)` with the error-function form of the normal CDF.
#[inline]
pub fn gelu_scalar<T: Scalar>(x: T) -> T {
    let half = T::from_f64(0.5);
    half * x * (T::one() + (x * T::from_f64(FRAC_1_SQRT_2)).erf())
}

#[inline]
fn gelu_grad_scalar<T: Scalar>(x: T) -> T {
    let half = T::from_f64(0.5);
    let cdf = half * (T::one() + (x * T::from_f64(FRAC_1_SQRT_2)).erf());
    let pdf = (-(x * x) * half).exp() * T::from_f64(1.0 / (2.0 * PI).sqrt());
    cdf + x * pdf
}

pub fn gelu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(gelu_scalar)
}

pub fn gelu_backward<T: Scalar>(x: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    if x.dims() != grad_out.dims() {
        return Err(Error::shape(format!(
            "gelu backward: input dims {:?} vs gradient dims {:?}",
            x.dims(),
            grad_out.dims()
        )));
    }
    let data = x
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&v, &g)| g * gelu_grad_scalar(v))
        .collect();
    Tensor::new(x.dims().to_vec(), data)
}

fn pool_dims<T: Scalar>(grid: &Tensor<T>) -> Result<(usize, usize)> {
    match grid.dims()[..] {
        [g, g2, h] if g == g2 && g >= 2 => Ok((g, h)),
        [g, g2, _] if g == g2 => Err(Error::shape(format!(
            "max pool needs a grid side of at least 2, got {g}"
        ))),
        _ => Err(Error::shape(format!(
            "max pool needs a square g×g×h grid, got {:?}",
            grid.dims()
        ))),
    }
}

/// Flat index of the winning cell for every output element of the pool.
/// Blocks are scanned row-major and only a strictly larger value replaces
/// the current winner, so ties go to the first cell.
fn pool_argmax<T: Scalar>(grid: &Tensor<T>, g: usize, h: usize) -> Vec<usize> {
    let half = g / 2;
    let d = grid.data();
    let mut idx = Vec::with_capacity(half * half * h);
    for bi in 0..half {
        for bj in 0..half {
            for c in 0..h {
                let cells = [
                    ((2 * bi) * g + 2 * bj) * h + c,
                    ((2 * bi) * g + 2 * bj + 1) * h + c,
                    ((2 * bi + 1) * g + 2 * bj) * h + c,
                    ((2 * bi + 1) * g + 2 * bj + 1) * h + c,
                ];
                let mut best = cells[0];
                for &cell in &cells[1..] {
                    if d[cell] > d[best] {
                        best = cell;
                    }
                }
                idx.push(best);
            }
        }
    }
    idx
}

/// Disjoint 2×2 spatial max pool over a `g×g×h` grid. Odd sides drop the
/// last row and column.
pub fn max_pool_2x2<T: Scalar>(grid: &Tensor<T>) -> Result<Tensor<T>> {
    let (g, h) = pool_dims(grid)?;
    let half = g / 2;
    let d = grid.data();
    let data = pool_argmax(grid, g, h).into_iter().map(|i| d[i]).collect();
    Tensor::new(vec![half, half, h], data)
}

/// Routes each output gradient to the cell that won the forward max.
pub fn max_pool_2x2_backward<T: Scalar>(
    grid: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<Tensor<T>> {
    let (g, h) = pool_dims(grid)?;
    let half = g / 2;
    if grad_out.dims() != [half, half, h] {
        return Err(Error::shape(format!(
            "max pool backward: gradient dims {:?}, expected [{half}, {half}, {h}]",
            grad_out.dims()
        )));
    }
    let mut dx = Tensor::zeros(grid.dims().to_vec());
    let dxd = dx.data_mut();
    for (cell, &gv) in pool_argmax(grid, g, h).into_iter().zip(grad_out.data()) {
        dxd[cell] = dxd[cell] + gv;
    }
    Ok(dx)
}

/// Concatenates `p×d_i` matrices column-wise in list order.
pub fn concat_feature_dim<T: Scalar>(parts: &[&Tensor<T>]) -> Result<Tensor<T>> {
    let first = parts
        .first()
        .ok_or_else(|| Error::shape("concat needs at least one part"))?;
    let (p, _) = first.matrix_dims()?;
    let mut widths = Vec::with_capacity(parts.len());
    for part in parts {
        let (rows, cols) = part.matrix_dims()?;
        if rows != p {
            return Err(Error::shape(format!(
                "concat: part has {rows} rows, expected {p}"
            )));
        }
        widths.push(cols);
    }
    let total: usize = widths.iter().sum();
    let mut out = Vec::with_capacity(p * total);
    for r in 0..p {
        for (part, &cols) in parts.iter().zip(&widths) {
            out.extend_from_slice(&part.data()[r * cols..(r + 1) * cols]);
        }
    }
    Tensor::new(vec![p, total], out)
}

/// Inverse of [`concat_feature_dim`]: splits columns into blocks of the given widths.
pub fn split_feature_dim<T: Scalar>(t: &Tensor<T>, widths: &[usize]) -> Result<Vec<Tensor<T>>> {
    let (p, cols) = t.matrix_dims()?;
    if widths.iter().sum::<usize>() != cols {
        return Err(Error::shape(format!(
            "split: widths {widths:?} do not sum to {cols} columns"
        )));
    }
    let d = t.data();
    let mut offset = 0;
    let mut parts = Vec::with_capacity(widths.len());
    for &wdt in widths {
        let mut block = Vec::with_capacity(p * wdt);
        for r in 0..p {
            block.extend_from_slice(&d[r * cols + offset..r * cols + offset + wdt]);
        }
        parts.push(Tensor::new(vec![p, wdt], block)?);
        offset += wdt;
    }
    Ok(parts)
}
