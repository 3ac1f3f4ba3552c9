//! Discrete Fourier transform along one axis, for any length.

use std::cell::RefCell;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Real and imaginary parts of a spectrum, computed along `axis`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumPair {
    pub real: Tensor,
    pub imag: Tensor,
    pub axis: usize,
}

fn transform_rows(buf: &mut [Complex<f64>], len: usize, inverse: bool) {
    PLANNER.with(|p| {
        let mut planner = p.borrow_mut();
        let fft = if inverse {
            planner.plan_fft_inverse(len)
        } else {
            planner.plan_fft_forward(len)
        };
        fft.process(buf);
    });
}

/// Forward DFT of each contiguous row of length `len` of a real signal.
pub(crate) fn dft_rows(x: &[f64], len: usize) -> (Vec<f64>, Vec<f64>) {
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    transform_rows(&mut buf, len, false);
    buf.into_iter().map(|c| (c.re, c.im)).unzip()
}

/// Normalized inverse DFT of each row of `re + j·im`.
pub(crate) fn idft_rows(re: &[f64], im: &[f64], len: usize) -> (Vec<f64>, Vec<f64>) {
    let mut buf: Vec<Complex<f64>> = re.iter().zip(im).map(|(&r, &i)| Complex::new(r, i)).collect();
    transform_rows(&mut buf, len, true);
    let inv = 1.0 / len as f64;
    buf.into_iter().map(|c| (c.re * inv, c.im * inv)).unzip()
}

fn to_last(x: &Tensor, axis: usize) -> Result<(Tensor, Vec<usize>)> {
    let rank = x.rank();
    if axis >= rank {
        return Err(Error::contract("dft", format!("axis {axis} out of range for rank {rank}")));
    }
    let mut axes: Vec<usize> = (0..rank).filter(|&a| a != axis).collect();
    axes.push(axis);
    Ok((x.permute(&axes)?, axes))
}

fn from_last(x: Tensor, axes: &[usize]) -> Tensor {
    let mut inv = vec![0; axes.len()];
    for (i, &a) in axes.iter().enumerate() {
        inv[a] = i;
    }
    x.permute(&inv).expect("inverse permutation")
}

pub fn dft(x: &Tensor, axis: usize) -> Result<SpectrumPair> {
    let (moved, axes) = to_last(x, axis)?;
    let len = x.shape()[axis];
    let (re, im) = dft_rows(moved.data(), len);
    let shape = moved.shape().to_vec();
    Ok(SpectrumPair {
        real: from_last(Tensor::new(shape.clone(), re)?, &axes),
        imag: from_last(Tensor::new(shape, im)?, &axes),
        axis,
    })
}

/// Full complex inverse transform.
pub fn idft_complex(sp: &SpectrumPair) -> Result<SpectrumPair> {
    if sp.real.shape() != sp.imag.shape() {
        return Err(Error::dim("idft", sp.real.shape(), sp.imag.shape()));
    }
    let (re, axes) = to_last(&sp.real, sp.axis)?;
    let (im, _) = to_last(&sp.imag, sp.axis)?;
    let len = sp.real.shape()[sp.axis];
    let (or, oi) = idft_rows(re.data(), im.data(), len);
    let shape = re.shape().to_vec();
    Ok(SpectrumPair {
        real: from_last(Tensor::new(shape.clone(), or)?, &axes),
        imag: from_last(Tensor::new(shape, oi)?, &axes),
        axis: sp.axis,
    })
}

/// Inverse transform truncated to its real part.
pub fn idft(sp: &SpectrumPair) -> Result<Tensor> {
    Ok(idft_complex(sp)?.real)
}
