//! Dense row-major `f64` tensors and the raw kernels the autodiff tape builds on.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "tensor data length does not match shape {shape:?}"
        );
        Self { shape, data }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self::new(vec![], vec![value])
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> f64) -> Self {
        let n = shape.iter().product();
        Self::new(shape.to_vec(), (0..n).map(&mut f).collect())
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

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn dim(&self, axis: usize) -> usize {
        self.shape[axis]
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> f64 {
        assert_eq!(self.data.len(), 1, "item() on tensor of shape {:?}", self.shape);
        self.data[0]
    }

    pub fn reshape(mut self, shape: &[usize]) -> Self {
        assert_eq!(shape.iter().product::<usize>(), self.data.len(), "bad reshape to {shape:?}");
        self.shape = shape.to_vec();
        self
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        assert_eq!(self.shape, other.shape);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub(crate) fn add_assign(&mut self, other: &Tensor) {
        assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// Swap the last two axes.
    pub fn transpose_last2(&self) -> Tensor {
        let r = self.rank();
        assert!(r >= 2);
        let mut perm: Vec<usize> = (0..r).collect();
        perm.swap(r - 2, r - 1);
        self.permute(&perm)
    }

    pub fn permute(&self, perm: &[usize]) -> Tensor {
        let r = self.rank();
        assert_eq!(perm.len(), r);
        let out_shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let in_strides = strides(&self.shape);
        let src_strides: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
        let mut out = Vec::with_capacity(self.data.len());
        for_each_offset(&out_shape, &[&src_strides], |_, offs| out.push(self.data[offs[0]]));
        Tensor::new(out_shape, out)
    }
}

pub fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

/// Numpy-style broadcast of two shapes, right aligned.
pub fn broadcast_shape(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    let r = a.len().max(b.len());
    let mut out = vec![0; r];
    for i in 0..r {
        let da = if i + a.len() >= r { a[i + a.len() - r] } else { 1 };
        let db = if i + b.len() >= r { b[i + b.len() - r] } else { 1 };
        out[i] = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => return None,
        };
    }
    Some(out)
}

/// Strides of `shape` viewed inside `out` (zero on broadcast axes).
pub fn broadcast_strides(shape: &[usize], out: &[usize]) -> Vec<usize> {
    let st = strides(shape);
    let off = out.len() - shape.len();
    (0..out.len())
        .map(|i| {
            if i < off || shape[i - off] == 1 {
                0
            } else {
                st[i - off]
            }
        })
        .collect()
}

/// Walk every multi-index of `shape` in row-major order, passing the flat
/// index and the matching offsets for each stride set.
pub fn for_each_offset(shape: &[usize], stride_sets: &[&[usize]], mut f: impl FnMut(usize, &[usize])) {
    let n: usize = shape.iter().product();
    if n == 0 {
        return;
    }
    let r = shape.len();
    let k = stride_sets.len();
    let mut idx = vec![0usize; r];
    let mut offs = vec![0usize; k];
    for flat in 0..n {
        f(flat, &offs);
        let mut ax = r;
        while ax > 0 {
            ax -= 1;
            idx[ax] += 1;
            for (o, s) in offs.iter_mut().zip(stride_sets) {
                *o += s[ax];
            }
            if idx[ax] < shape[ax] {
                break;
            }
            for (o, s) in offs.iter_mut().zip(stride_sets) {
                *o -= s[ax] * shape[ax];
            }
            idx[ax] = 0;
        }
    }
}

/// True when `small`, after dropping leading 1s, equals the trailing dims of `big`.
fn is_trailing(small: &[usize], big: &[usize]) -> bool {
    let lead = small.iter().take_while(|&&d| d == 1).count();
    let core = &small[lead..];
    small.len() <= big.len() && big.ends_with(core) && big.len() >= core.len()
}

pub fn broadcast_zip(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    if a.shape == b.shape {
        let data = a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect();
        return Tensor::new(a.shape.clone(), data);
    }
    // Trailing-suffix broadcasts (bias rows, per-channel scales) in one pass.
    if !b.data.is_empty() && is_trailing(&b.shape, &a.shape) {
        let mut data = Vec::with_capacity(a.data.len());
        for chunk in a.data.chunks(b.data.len()) {
            data.extend(chunk.iter().zip(&b.data).map(|(&x, &y)| f(x, y)));
        }
        return Tensor::new(a.shape.clone(), data);
    }
    if !a.data.is_empty() && is_trailing(&a.shape, &b.shape) {
        let mut data = Vec::with_capacity(b.data.len());
        for chunk in b.data.chunks(a.data.len()) {
            data.extend(chunk.iter().zip(&a.data).map(|(&y, &x)| f(x, y)));
        }
        return Tensor::new(b.shape.clone(), data);
    }
    let out = broadcast_shape(&a.shape, &b.shape)
        .unwrap_or_else(|| panic!("cannot broadcast {:?} with {:?}", a.shape, b.shape));
    let sa = broadcast_strides(&a.shape, &out);
    let sb = broadcast_strides(&b.shape, &out);
    let mut data = Vec::with_capacity(out.iter().product());
    for_each_offset(&out, &[&sa, &sb], |_, o| data.push(f(a.data[o[0]], b.data[o[1]])));
    Tensor::new(out, data)
}

pub fn broadcast_to(t: &Tensor, shape: &[usize]) -> Tensor {
    if t.shape == shape {
        return t.clone();
    }
    let st = broadcast_strides(&t.shape, shape);
    let mut data = Vec::with_capacity(shape.iter().product());
    for_each_offset(shape, &[&st], |_, o| data.push(t.data[o[0]]));
    Tensor::new(shape.to_vec(), data)
}

/// Sum a broadcast-shaped tensor back down to `target`.
pub fn reduce_to(t: &Tensor, target: &[usize]) -> Tensor {
    if t.shape == target {
        return t.clone();
    }
    if is_trailing(target, &t.shape) {
        let mut out = Tensor::zeros(target);
        let n = out.data.len().max(1);
        for chunk in t.data.chunks(n) {
            for (o, v) in out.data.iter_mut().zip(chunk) {
                *o += v;
            }
        }
        return out;
    }
    let st = broadcast_strides(target, &t.shape);
    let mut out = Tensor::zeros(target);
    for_each_offset(&t.shape, &[&st], |flat, o| out.data[o[0]] += t.data[flat]);
    out
}

/// Dot product with four independent accumulators so the loop vectorizes.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

/// `c (m×n) [+]= op(a) · op(b)` where op optionally transposes.
/// `a` is m×k (or k×m when `ta`), `b` is k×n (or n×k when `tb`).
#[allow(clippy::too_many_arguments)]
pub fn gemm(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize, ta: bool, tb: bool, accumulate: bool) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    let row = |i: usize, crow: &mut [f64]| {
        if !accumulate {
            crow.iter_mut().for_each(|v| *v = 0.0);
        }
        if tb && !ta {
            // Both operands are row-contiguous along k: use dot products.
            let arow = &a[i * k..(i + 1) * k];
            for (j, cv) in crow.iter_mut().enumerate() {
                *cv += dot(arow, &b[j * k..(j + 1) * k]);
            }
            return;
        }
        for p in 0..k {
            let av = if ta { a[p * m + i] } else { a[i * k + p] };
            if av == 0.0 {
                continue;
            }
            if tb {
                for (j, cv) in crow.iter_mut().enumerate() {
                    *cv += av * b[j * k + p];
                }
            } else {
                let brow = &b[p * n..(p + 1) * n];
                for (cv, bv) in crow.iter_mut().zip(brow) {
                    *cv += av * bv;
                }
            }
        }
    };
    if m * k * n > 1 << 15 && m > 1 {
        c.par_chunks_mut(n).enumerate().for_each(|(i, crow)| row(i, crow));
    } else {
        for (i, crow) in c.chunks_mut(n).enumerate() {
            row(i, crow);
        }
    }
}

/// Geometry of an NHWC 2-D convolution with an `[kh, kw, cin/groups, cout]` kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub n: usize,
    pub h: usize,
    pub w: usize,
    pub cin: usize,
    pub kh: usize,
    pub kw: usize,
    pub cout: usize,
    pub stride: usize,
    pub pad: usize,
    pub groups: usize,
}

impl ConvGeometry {
    pub fn out_h(&self) -> usize {
        (self.h + 2 * self.pad - self.kh) / self.stride + 1
    }
    pub fn out_w(&self) -> usize {
        (self.w + 2 * self.pad - self.kw) / self.stride + 1
    }
    fn cin_g(&self) -> usize {
        self.cin / self.groups
    }
    fn cout_g(&self) -> usize {
        self.cout / self.groups
    }

    /// Visit each (input pixel offset, kernel tap offset, output pixel offset) triple for one sample.
    fn taps(&self, mut f: impl FnMut(usize, usize, usize)) {
        let (oh, ow) = (self.out_h(), self.out_w());
        for oy in 0..oh {
            for ox in 0..ow {
                let opix = oy * ow + ox;
                for ky in 0..self.kh {
                    let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                    if iy < 0 || iy >= self.h as isize {
                        continue;
                    }
                    for kx in 0..self.kw {
                        let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                        if ix < 0 || ix >= self.w as isize {
                            continue;
                        }
                        f(iy as usize * self.w + ix as usize, ky * self.kw + kx, opix);
                    }
                }
            }
        }
    }
}

pub fn conv2d_forward(x: &[f64], wt: &[f64], g: &ConvGeometry) -> Vec<f64> {
    let (oh, ow) = (g.out_h(), g.out_w());
    let in_sz = g.h * g.w * g.cin;
    let out_sz = oh * ow * g.cout;
    let (cig, cog) = (g.cin_g(), g.cout_g());
    let tap_sz = cig * g.cout;
    let mut out = vec![0.0; g.n * out_sz];
    out.par_chunks_mut(out_sz).enumerate().for_each(|(ni, o)| {
        let xs = &x[ni * in_sz..(ni + 1) * in_sz];
        g.taps(|ipix, tap, opix| {
            let xp = &xs[ipix * g.cin..(ipix + 1) * g.cin];
            let op = &mut o[opix * g.cout..(opix + 1) * g.cout];
            let wt_tap = &wt[tap * tap_sz..(tap + 1) * tap_sz];
            if cig == 1 && cog == 1 {
                for c in 0..g.cout {
                    op[c] += xp[c] * wt_tap[c];
                }
                return;
            }
            for gi in 0..g.groups {
                for ci in 0..cig {
                    let xv = xp[gi * cig + ci];
                    let wrow = &wt_tap[ci * g.cout + gi * cog..ci * g.cout + (gi + 1) * cog];
                    for (ov, wv) in op[gi * cog..(gi + 1) * cog].iter_mut().zip(wrow) {
                        *ov += xv * wv;
                    }
                }
            }
        });
    });
    out
}

/// Gradients of an NHWC convolution: (d input, d kernel).
pub fn conv2d_backward(x: &[f64], wt: &[f64], gout: &[f64], g: &ConvGeometry, need_gx: bool) -> (Option<Vec<f64>>, Vec<f64>) {
    let (oh, ow) = (g.out_h(), g.out_w());
    let in_sz = g.h * g.w * g.cin;
    let out_sz = oh * ow * g.cout;
    let (cig, cog) = (g.cin_g(), g.cout_g());
    let tap_sz = cig * g.cout;
    let gx = need_gx.then(|| {
        let mut gx = vec![0.0; g.n * in_sz];
        gx.par_chunks_mut(in_sz).enumerate().for_each(|(ni, gxs)| {
            let go = &gout[ni * out_sz..(ni + 1) * out_sz];
            g.taps(|ipix, tap, opix| {
                let gp = &go[opix * g.cout..(opix + 1) * g.cout];
                let wt_tap = &wt[tap * tap_sz..(tap + 1) * tap_sz];
                let gxp = &mut gxs[ipix * g.cin..(ipix + 1) * g.cin];
                for gi in 0..g.groups {
                    for ci in 0..cig {
                        let wrow = &wt_tap[ci * g.cout + gi * cog..ci * g.cout + (gi + 1) * cog];
                        let mut acc = 0.0;
                        for (gv, wv) in gp[gi * cog..(gi + 1) * cog].iter().zip(wrow) {
                            acc += gv * wv;
                        }
                        gxp[gi * cig + ci] += acc;
                    }
                }
            });
        });
        gx
    });
    let wlen = wt.len();
    let partials: Vec<Vec<f64>> = (0..g.n)
        .into_par_iter()
        .map(|ni| {
            let mut gw = vec![0.0; wlen];
            let xs = &x[ni * in_sz..(ni + 1) * in_sz];
            let go = &gout[ni * out_sz..(ni + 1) * out_sz];
            g.taps(|ipix, tap, opix| {
                let xp = &xs[ipix * g.cin..(ipix + 1) * g.cin];
                let gp = &go[opix * g.cout..(opix + 1) * g.cout];
                let gw_tap = &mut gw[tap * tap_sz..(tap + 1) * tap_sz];
                for gi in 0..g.groups {
                    for ci in 0..cig {
                        let xv = xp[gi * cig + ci];
                        let wrow = &mut gw_tap[ci * g.cout + gi * cog..ci * g.cout + (gi + 1) * cog];
                        for (wv, gv) in wrow.iter_mut().zip(&gp[gi * cog..(gi + 1) * cog]) {
                            *wv += xv * gv;
                        }
                    }
                }
            });
            gw
        })
        .collect();
    let mut gw = vec![0.0; wlen];
    for p in partials {
        for (a, b) in gw.iter_mut().zip(p) {
            *a += b;
        }
    }
    (gx, gw)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn broadcast_shapes_align_right() {
        assert_eq!(broadcast_shape(&[2, 1, 4], &[3, 1]), Some(vec![2, 3, 4]));
        assert_eq!(broadcast_shape(&[2, 3], &[4]), None);
    }

    #[test]
    fn reduce_inverts_broadcast_counts() {
        let t = Tensor::from_fn(&[1, 3], |i| i as f64);
        let b = broadcast_to(&t, &[4, 3]);
        let r = reduce_to(&b, &[1, 3]);
        assert_eq!(r.data(), &[0.0, 4.0, 8.0]);
    }

    #[test]
    fn permute_matches_manual_transpose() {
        let t = Tensor::from_fn(&[2, 3], |i| i as f64);
        let p = t.transpose_last2();
        assert_eq!(p.shape(), &[3, 2]);
        assert_eq!(p.data(), &[0.0, 3.0, 1.0, 4.0, 2.0, 5.0]);
    }

    #[test]
    fn gemm_transposes() {
        // a = [[1,2],[3,4]], b = [[5,6],[7,8]]
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [5.0, 6.0, 7.0, 8.0];
        let mut c = [0.0; 4];
        gemm(&a, &b, &mut c, 2, 2, 2, false, false, false);
        assert_eq!(c, [19.0, 22.0, 43.0, 50.0]);
        gemm(&a, &b, &mut c, 2, 2, 2, true, false, false);
        assert_eq!(c, [26.0, 30.0, 38.0, 44.0]);
        gemm(&a, &b, &mut c, 2, 2, 2, false, true, false);
        assert_eq!(c, [17.0, 23.0, 39.0, 53.0]);
    }

    #[test]
    fn conv_identity_kernel() {
        let g = ConvGeometry { n: 1, h: 3, w: 3, cin: 1, kh: 3, kw: 3, cout: 1, stride: 1, pad: 1, groups: 1 };
        let x: Vec<f64> = (0..9).map(|v| v as f64).collect();
        let mut w = vec![0.0; 9];
        w[4] = 1.0;
        assert_eq!(conv2d_forward(&x, &w, &g), x);
    }
}
