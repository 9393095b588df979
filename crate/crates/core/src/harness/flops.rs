//! Multiplication counts for dense and convolutional layers.

use crate::error::{Error, Result};

/// Scalar multiplications in one dense forward pass of a single sample:
/// the sum of products of consecutive widths.
pub fn flop_count(widths: &[usize]) -> Result<u64> {
    if widths.len() < 2 {
        return Err(Error::param("an architecture needs at least two widths"));
    }
    Ok(widths.windows(2).map(|w| w[0] as u64 * w[1] as u64).sum())
}

/// Spatial output size `floor((i - f + 2p) / s) + 1` of a convolution.
pub fn conv_out_dim(input: usize, filter: usize, padding: usize, stride: usize) -> Result<usize> {
    if stride == 0 {
        return Err(Error::param("stride must be at least 1"));
    }
    let span = (input + 2 * padding)
        .checked_sub(filter)
        .ok_or_else(|| Error::param(format!("filter {filter} exceeds padded input {}", input + 2 * padding)))?;
    Ok(span / stride + 1)
}

/// Multiplications of one square convolution layer over a square input.
pub fn conv_mult_count(
    input: usize,
    filter: usize,
    padding: usize,
    stride: usize,
    in_channels: usize,
    filters: usize,
) -> Result<u64> {
    let out = conv_out_dim(input, filter, padding, stride)? as u64;
    Ok(out * out * (filter * filter * in_channels * filters) as u64)
}
