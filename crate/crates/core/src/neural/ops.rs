//! Single-sample kernels. Activations are channel-last; a pixel's channels
//! may sit inside a wider per-pixel stride, which lets dense blocks read
//! and write channel ranges of one shared feature buffer without copies.

use crate::scalar::Scalar;

/// Geometry of one convolution. Kernels are stored `[k][k][cin][cout]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ConvGeom {
    pub h: usize,
    pub w: usize,
    pub cin: usize,
    /// Channels per input pixel in memory (≥ `cin`); the first `cin` are read.
    pub in_stride: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub cout: usize,
    /// Channels per output pixel in memory (≥ `out_offset + cout`).
    pub out_stride: usize,
    pub out_offset: usize,
}

impl ConvGeom {
    pub fn out_dim(input: usize, k: usize, stride: usize, pad: usize) -> Option<usize> {
        let span = input + 2 * pad;
        (stride > 0 && span >= k).then(|| (span - k) / stride + 1)
    }

    pub fn oh(&self) -> usize {
        Self::out_dim(self.h, self.k, self.stride, self.pad).unwrap_or(0)
    }

    pub fn ow(&self) -> usize {
        Self::out_dim(self.w, self.k, self.stride, self.pad).unwrap_or(0)
    }

    pub fn dense(h: usize, w: usize, cin: usize, k: usize, stride: usize, pad: usize, cout: usize) -> Self {
        ConvGeom {
            h,
            w,
            cin,
            in_stride: cin,
            k,
            stride,
            pad,
            cout,
            out_stride: cout,
            out_offset: 0,
        }
    }

    /// Input pixel index for output row/col `o` and kernel tap `t`, if inside.
    #[inline]
    fn tap(&self, o: usize, t: usize, limit: usize) -> Option<usize> {
        let i = (o * self.stride + t).checked_sub(self.pad)?;
        (i < limit).then_some(i)
    }
}

/// Cross-correlation with zero padding; overwrites the output channel range.
pub(crate) fn conv_forward<T: Scalar>(g: &ConvGeom, x: &[T], wts: &[T], bias: &[T], out: &mut [T]) {
    let (oh, ow) = (g.oh(), g.ow());
    for oy in 0..oh {
        for ox in 0..ow {
            let base = (oy * ow + ox) * g.out_stride + g.out_offset;
            let acc = &mut out[base..base + g.cout];
            acc.copy_from_slice(bias);
            for ky in 0..g.k {
                let Some(iy) = g.tap(oy, ky, g.h) else { continue };
                for kx in 0..g.k {
                    let Some(ix) = g.tap(ox, kx, g.w) else { continue };
                    let xin = &x[(iy * g.w + ix) * g.in_stride..][..g.cin];
                    let wtap = &wts[(ky * g.k + kx) * g.cin * g.cout..][..g.cin * g.cout];
                    for (&xv, wrow) in xin.iter().zip(wtap.chunks_exact(g.cout)) {
                        for (a, &wv) in acc.iter_mut().zip(wrow) {
                            *a += xv * wv;
                        }
                    }
                }
            }
        }
    }
}

/// Accumulates parameter and input gradients given a contiguous
/// `oh × ow × cout` output gradient. `gx` uses the input's stride.
pub(crate) fn conv_backward<T: Scalar>(
    g: &ConvGeom,
    x: &[T],
    wts: &[T],
    gout: &[T],
    gx: &mut [T],
    gw: &mut [T],
    gb: &mut [T],
) {
    let (oh, ow) = (g.oh(), g.ow());
    for oy in 0..oh {
        for ox in 0..ow {
            let go = &gout[(oy * ow + ox) * g.cout..][..g.cout];
            for (b, &v) in gb.iter_mut().zip(go) {
                *b += v;
            }
            for ky in 0..g.k {
                let Some(iy) = g.tap(oy, ky, g.h) else { continue };
                for kx in 0..g.k {
                    let Some(ix) = g.tap(ox, kx, g.w) else { continue };
                    let p = (iy * g.w + ix) * g.in_stride;
                    let off = (ky * g.k + kx) * g.cin * g.cout;
                    let wtap = &wts[off..off + g.cin * g.cout];
                    let gwtap = &mut gw[off..off + g.cin * g.cout];
                    for ic in 0..g.cin {
                        let xv = x[p + ic];
                        let wrow = &wtap[ic * g.cout..(ic + 1) * g.cout];
                        let gwrow = &mut gwtap[ic * g.cout..(ic + 1) * g.cout];
                        let mut acc = T::zero();
                        for ((gwv, &wv), &gv) in gwrow.iter_mut().zip(wrow).zip(go) {
                            *gwv += xv * gv;
                            acc += wv * gv;
                        }
                        gx[p + ic] += acc;
                    }
                }
            }
        }
    }
}

pub(crate) fn relu_in_place<T: Scalar>(v: &mut [T]) {
    for x in v {
        if *x < T::zero() {
            *x = T::zero();
        }
    }
}

/// Max pooling without padding; ties route to the first maximum.
pub(crate) fn maxpool_forward<T: Scalar>(x: &[T], h: usize, w: usize, c: usize, k: usize, s: usize) -> Vec<T> {
    let oh = (h - k) / s + 1;
    let ow = (w - k) / s + 1;
    let mut out = vec![T::zero(); oh * ow * c];
    for oy in 0..oh {
        for ox in 0..ow {
            for ch in 0..c {
                let mut m = T::neg_infinity();
                for ky in 0..k {
                    for kx in 0..k {
                        let v = x[((oy * s + ky) * w + ox * s + kx) * c + ch];
                        if v > m {
                            m = v;
                        }
                    }
                }
                out[(oy * ow + ox) * c + ch] = m;
            }
        }
    }
    out
}

pub(crate) fn maxpool_backward<T: Scalar>(
    x: &[T],
    gout: &[T],
    h: usize,
    w: usize,
    c: usize,
    k: usize,
    s: usize,
) -> Vec<T> {
    let oh = (h - k) / s + 1;
    let ow = (w - k) / s + 1;
    let mut gx = vec![T::zero(); h * w * c];
    for oy in 0..oh {
        for ox in 0..ow {
            for ch in 0..c {
                let mut best = 0;
                let mut m = T::neg_infinity();
                for ky in 0..k {
                    for kx in 0..k {
                        let idx = ((oy * s + ky) * w + ox * s + kx) * c + ch;
                        if x[idx] > m {
                            m = x[idx];
                            best = idx;
                        }
                    }
                }
                gx[best] += gout[(oy * ow + ox) * c + ch];
            }
        }
    }
    gx
}

/// 2×2 average pooling with stride 2; a trailing odd row/column is dropped.
pub(crate) fn avgpool2_forward<T: Scalar>(x: &[T], h: usize, w: usize, c: usize) -> Vec<T> {
    let (oh, ow) = (h / 2, w / 2);
    let quarter = T::lit(0.25);
    let mut out = vec![T::zero(); oh * ow * c];
    for oy in 0..oh {
        for ox in 0..ow {
            for ch in 0..c {
                let at = |y: usize, xx: usize| x[(y * w + xx) * c + ch];
                let (y, xx) = (2 * oy, 2 * ox);
                out[(oy * ow + ox) * c + ch] =
                    quarter * (at(y, xx) + at(y, xx + 1) + at(y + 1, xx) + at(y + 1, xx + 1));
            }
        }
    }
    out
}

pub(crate) fn avgpool2_backward<T: Scalar>(gout: &[T], h: usize, w: usize, c: usize) -> Vec<T> {
    let (oh, ow) = (h / 2, w / 2);
    let quarter = T::lit(0.25);
    let mut gx = vec![T::zero(); h * w * c];
    for oy in 0..oh {
        for ox in 0..ow {
            for ch in 0..c {
                let g = quarter * gout[(oy * ow + ox) * c + ch];
                for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    gx[((2 * oy + dy) * w + 2 * ox + dx) * c + ch] += g;
                }
            }
        }
    }
    gx
}

pub(crate) fn global_avg_forward<T: Scalar>(x: &[T], hw: usize, c: usize) -> Vec<T> {
    let mut out = vec![T::zero(); c];
    for px in x.chunks_exact(c) {
        for (o, &v) in out.iter_mut().zip(px) {
            *o += v;
        }
    }
    let inv = T::one() / T::from_count(hw);
    out.iter_mut().for_each(|o| *o *= inv);
    out
}

pub(crate) fn global_avg_backward<T: Scalar>(gout: &[T], hw: usize) -> Vec<T> {
    let inv = T::one() / T::from_count(hw);
    let scaled: Vec<T> = gout.iter().map(|&g| g * inv).collect();
    let mut gx = Vec::with_capacity(hw * gout.len());
    for _ in 0..hw {
        gx.extend_from_slice(&scaled);
    }
    gx
}

/// `out[o] = b[o] + Σᵢ x[i]·W[i][o]`, with `W` stored `[fin][fout]`.
pub(crate) fn fc_forward<T: Scalar>(x: &[T], wts: &[T], bias: &[T]) -> Vec<T> {
    let mut out = bias.to_vec();
    for (&xv, wrow) in x.iter().zip(wts.chunks_exact(bias.len())) {
        for (o, &wv) in out.iter_mut().zip(wrow) {
            *o += xv * wv;
        }
    }
    out
}

pub(crate) fn fc_backward<T: Scalar>(x: &[T], wts: &[T], gout: &[T], gw: &mut [T], gb: &mut [T]) -> Vec<T> {
    let fout = gout.len();
    for (b, &g) in gb.iter_mut().zip(gout) {
        *b += g;
    }
    x.iter()
        .enumerate()
        .map(|(i, &xv)| {
            let wrow = &wts[i * fout..(i + 1) * fout];
            let gwrow = &mut gw[i * fout..(i + 1) * fout];
            let mut acc = T::zero();
            for ((gwv, &wv), &g) in gwrow.iter_mut().zip(wrow).zip(gout) {
                *gwv += xv * g;
                acc += wv * g;
            }
            acc
        })
        .collect()
}
