//! Cross-correlation kernels on `[C, H, W]` images.
//!
//! Three primitives cover both directions: the forward correlation, its
//! adjoint with respect to the input (which is also the transposed
//! convolution), and the kernel gradient.

use super::Real;
use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2, ArrayViewMut2};

pub fn conv2d_output_size(input: usize, k: usize, stride: usize, pad: usize) -> Option<usize> {
    let padded = input + 2 * pad;
    (stride >= 1 && k >= 1 && k <= padded).then(|| (padded - k) / stride + 1)
}

pub fn conv2d_transpose_output_size(input: usize, k: usize, stride: usize, pad: usize) -> Option<usize> {
    let full = (input.checked_sub(1)?) * stride + k;
    (stride >= 1 && input >= 1 && full > 2 * pad).then(|| full - 2 * pad)
}

/// Range of output positions `o` with `0 <= o·stride + off − pad < in_len`.
#[inline]
fn valid_range(off: usize, pad: usize, stride: usize, in_len: usize, out_len: usize) -> (usize, usize) {
    // need o·stride >= pad − off and o·stride <= in_len − 1 + pad − off
    let lo = if pad > off { (pad - off).div_ceil(stride) } else { 0 };
    let top = in_len + pad;
    if top <= off {
        return (0, 0);
    }
    let hi = ((top - 1 - off) / stride + 1).min(out_len);
    (lo.min(hi), hi)
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvGeom {
    pub c_in: usize,
    pub h_in: usize,
    pub w_in: usize,
    pub c_out: usize,
    pub h_out: usize,
    pub w_out: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvGeom {
    fn kk(&self) -> usize {
        self.k * self.k
    }

    /// Unfold `x` into `[c_in·k·k, h_out·w_out]`; row `(ci·k + ky)·k + kx`
    /// matches the kernel layout.
    fn im2col<T: Real>(&self, x: &[T]) -> Vec<T> {
        let g = *self;
        let (hw_in, hw_out) = (g.h_in * g.w_in, g.h_out * g.w_out);
        let mut cols = vec![T::zero(); g.c_in * g.kk() * hw_out];
        for ci in 0..g.c_in {
            let x_c = &x[ci * hw_in..(ci + 1) * hw_in];
            for ky in 0..g.k {
                let (oy0, oy1) = valid_range(ky, g.pad, g.stride, g.h_in, g.h_out);
                for kx in 0..g.k {
                    let (ox0, ox1) = valid_range(kx, g.pad, g.stride, g.w_in, g.w_out);
                    let row = (ci * g.k + ky) * g.k + kx;
                    let dst = &mut cols[row * hw_out..(row + 1) * hw_out];
                    for oy in oy0..oy1 {
                        let iy = oy * g.stride + ky - g.pad;
                        let src = &x_c[iy * g.w_in..(iy + 1) * g.w_in];
                        let out_row = &mut dst[oy * g.w_out..(oy + 1) * g.w_out];
                        for ox in ox0..ox1 {
                            out_row[ox] = src[ox * g.stride + kx - g.pad];
                        }
                    }
                }
            }
        }
        cols
    }

    /// Adjoint of [`ConvGeom::im2col`]: scatter-add columns back onto `gx`.
    fn col2im<T: Real>(&self, cols: &[T], gx: &mut [T]) {
        let g = *self;
        let (hw_in, hw_out) = (g.h_in * g.w_in, g.h_out * g.w_out);
        for ci in 0..g.c_in {
            let gx_c = &mut gx[ci * hw_in..(ci + 1) * hw_in];
            for ky in 0..g.k {
                let (oy0, oy1) = valid_range(ky, g.pad, g.stride, g.h_in, g.h_out);
                for kx in 0..g.k {
                    let (ox0, ox1) = valid_range(kx, g.pad, g.stride, g.w_in, g.w_out);
                    let row = (ci * g.k + ky) * g.k + kx;
                    let src = &cols[row * hw_out..(row + 1) * hw_out];
                    for oy in oy0..oy1 {
                        let iy = oy * g.stride + ky - g.pad;
                        let dst = &mut gx_c[iy * g.w_in..(iy + 1) * g.w_in];
                        let in_row = &src[oy * g.w_out..(oy + 1) * g.w_out];
                        for ox in ox0..ox1 {
                            let ix = ox * g.stride + kx - g.pad;
                            dst[ix] = dst[ix] + in_row[ox];
                        }
                    }
                }
            }
        }
    }

    /// Output entries of the forward correlation `x ↦ K ⋆ x`, accumulated
    /// into `out`.
    pub fn forward<T: Real>(&self, x: &[T], kernel: &[T], out: &mut [T]) {
        let (rows, hw_out) = (self.c_in * self.kk(), self.h_out * self.w_out);
        let cols = self.im2col(x);
        let k = ArrayView2::from_shape((self.c_out, rows), kernel).expect("kernel layout");
        let c = ArrayView2::from_shape((rows, hw_out), &cols[..]).expect("column layout");
        let mut o = ArrayViewMut2::from_shape((self.c_out, hw_out), out).expect("output layout");
        general_mat_mul(T::one(), &k, &c, T::one(), &mut o);
    }

    /// Adjoint with respect to the input: scatters `gy` (output-shaped) back
    /// onto an input-shaped buffer.
    pub fn backward_input<T: Real>(&self, gy: &[T], kernel: &[T], gx: &mut [T]) {
        let (rows, hw_out) = (self.c_in * self.kk(), self.h_out * self.w_out);
        let k = ArrayView2::from_shape((self.c_out, rows), kernel).expect("kernel layout");
        let g = ArrayView2::from_shape((self.c_out, hw_out), gy).expect("gradient layout");
        let mut cols = Array2::zeros((rows, hw_out));
        general_mat_mul(T::one(), &k.t(), &g, T::zero(), &mut cols);
        self.col2im(cols.as_slice().expect("standard layout"), gx);
    }

    /// Gradient of `⟨gy, K ⋆ x⟩` with respect to the kernel.
    pub fn backward_kernel<T: Real>(&self, x: &[T], gy: &[T], gk: &mut [T]) {
        let (rows, hw_out) = (self.c_in * self.kk(), self.h_out * self.w_out);
        let cols = self.im2col(x);
        let c = ArrayView2::from_shape((rows, hw_out), &cols[..]).expect("column layout");
        let g = ArrayView2::from_shape((self.c_out, hw_out), gy).expect("gradient layout");
        let mut k = ArrayViewMut2::from_shape((self.c_out, rows), gk).expect("kernel layout");
        general_mat_mul(T::one(), &g, &c.t(), T::one(), &mut k);
    }
}
