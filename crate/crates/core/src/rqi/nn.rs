//! Minimal convolutional network with hand-written backpropagation.
//!
//! Parameters live in one flat `Vec<f64>` so the optimizer, the model file
//! and finite-difference checks can all treat them uniformly. Layer order in
//! the vector: each conv layer (weights `[out][in·9]`, then `out` biases),
//! then each dense layer (weights `[out][in]`, then `out` biases).

use crate::rng::SplitMix64;

/// Layer widths of the shared feature tower and the regression head.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    /// `(in_channels, out_channels)` per 3x3 stride-2 convolution.
    pub convs: Vec<(usize, usize)>,
    /// `(in, out)` per fully connected layer; the last one has no activation.
    pub dense: Vec<(usize, usize)>,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            convs: vec![(1, 16), (16, 32), (32, 64), (64, 64)],
            dense: vec![(192, 64), (64, 32), (32, 1)],
        }
    }
}

impl Architecture {
    pub fn feature_dim(&self) -> usize {
        self.convs.last().map_or(0, |c| c.1)
    }

    /// Total input stride of the tower; crop sides must be a multiple of it.
    pub fn stride(&self) -> usize {
        1 << self.convs.len()
    }

    pub fn param_count(&self) -> usize {
        let conv: usize = self.convs.iter().map(|&(i, o)| o * i * 9 + o).sum();
        let dense: usize = self.dense.iter().map(|&(i, o)| o * i + o).sum();
        conv + dense
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.convs.is_empty() || self.dense.is_empty() {
            return Err("architecture needs at least one conv and one dense layer".into());
        }
        if self.convs[0].0 != 1 {
            return Err("tower input must be single-channel".into());
        }
        for w in self.convs.windows(2) {
            if w[0].1 != w[1].0 {
                return Err("conv widths do not chain".into());
            }
        }
        for w in self.dense.windows(2) {
            if w[0].1 != w[1].0 {
                return Err("dense widths do not chain".into());
            }
        }
        if self.dense[0].0 != 3 * self.feature_dim() {
            return Err("head input must be 3x the feature width".into());
        }
        if self.dense.last().unwrap().1 != 1 {
            return Err("head must output a scalar".into());
        }
        Ok(())
    }

    /// Flat `u32` descriptor: conv count, conv (in, out) pairs, dense count, dense pairs.
    pub fn descriptor(&self) -> Vec<u32> {
        let mut d = vec![self.convs.len() as u32];
        d.extend(self.convs.iter().flat_map(|&(i, o)| [i as u32, o as u32]));
        d.push(self.dense.len() as u32);
        d.extend(self.dense.iter().flat_map(|&(i, o)| [i as u32, o as u32]));
        d
    }

    pub fn from_descriptor(d: &[u32]) -> Option<Self> {
        let mut it = d.iter().map(|&v| v as usize);
        let nc = it.next()?;
        let convs = (0..nc).map(|_| Some((it.next()?, it.next()?))).collect::<Option<Vec<_>>>()?;
        let nd = it.next()?;
        let dense = (0..nd).map(|_| Some((it.next()?, it.next()?))).collect::<Option<Vec<_>>>()?;
        if it.next().is_some() {
            return None;
        }
        Some(Self { convs, dense })
    }

    fn conv_offsets(&self) -> Vec<usize> {
        let mut offs = Vec::with_capacity(self.convs.len());
        let mut at = 0;
        for &(i, o) in &self.convs {
            offs.push(at);
            at += o * i * 9 + o;
        }
        offs
    }

    fn dense_offsets(&self) -> Vec<usize> {
        let mut at: usize = self.convs.iter().map(|&(i, o)| o * i * 9 + o).sum();
        let mut offs = Vec::with_capacity(self.dense.len());
        for &(i, o) in &self.dense {
            offs.push(at);
            at += o * i + o;
        }
        offs
    }
}

/// He-normal weights, zero biases. The final dense layer is scaled down so
/// an untrained model starts near zero output.
pub fn init_params(arch: &Architecture, seed: u64) -> Vec<f64> {
    let mut rng = SplitMix64::new(seed);
    let mut params = Vec::with_capacity(arch.param_count());
    for &(i, o) in &arch.convs {
        let std = (2.0 / (i * 9) as f64).sqrt();
        params.extend((0..o * i * 9).map(|_| rng.normal() * std));
        params.extend(std::iter::repeat(0.0).take(o));
    }
    let last = arch.dense.len() - 1;
    for (li, &(i, o)) in arch.dense.iter().enumerate() {
        let mut std = (2.0 / i as f64).sqrt();
        if li == last {
            std *= 0.1;
        }
        params.extend((0..o * i).map(|_| rng.normal() * std));
        params.extend(std::iter::repeat(0.0).take(o));
    }
    params
}

/// `C = alpha·op(A)·op(B) + beta·C` on row-major slices with explicit strides.
#[allow(clippy::too_many_arguments)]
#[inline]
fn gemm(
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
    debug_assert!(c.len() >= m * n);
    // SAFETY: every index touched is within the slices; the strides describe
    // m x k, k x n and m x n views whose extents the callers size exactly.
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

/// Forward state of one conv layer kept for backpropagation.
#[derive(Debug, Clone)]
struct ConvCache {
    col: Vec<f64>,
    /// post-ReLU output, `[out][positions]`
    act: Vec<f64>,
    in_side: usize,
}

/// Everything the tower needs to backpropagate one crop.
#[derive(Debug, Clone)]
pub struct TowerCache {
    layers: Vec<ConvCache>,
}

fn im2col(x: &[f64], channels: usize, side: usize, col: &mut [f64]) {
    let out = side / 2;
    let positions = out * out;
    for c in 0..channels {
        let plane = &x[c * side * side..(c + 1) * side * side];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut col[((c * 9) + ky * 3 + kx) * positions..][..positions];
                for oy in 0..out {
                    let iy = (2 * oy + ky) as isize - 1;
                    let dst = &mut row[oy * out..(oy + 1) * out];
                    if iy < 0 || iy >= side as isize {
                        dst.fill(0.0);
                        continue;
                    }
                    let src = &plane[iy as usize * side..(iy as usize + 1) * side];
                    for (ox, d) in dst.iter_mut().enumerate() {
                        let ix = (2 * ox + kx) as isize - 1;
                        *d = if ix < 0 || ix >= side as isize { 0.0 } else { src[ix as usize] };
                    }
                }
            }
        }
    }
}

fn col2im(col: &[f64], channels: usize, side: usize, dx: &mut [f64]) {
    let out = side / 2;
    let positions = out * out;
    dx.fill(0.0);
    for c in 0..channels {
        let plane = &mut dx[c * side * side..(c + 1) * side * side];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &col[((c * 9) + ky * 3 + kx) * positions..][..positions];
                for oy in 0..out {
                    let iy = (2 * oy + ky) as isize - 1;
                    if iy < 0 || iy >= side as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * side..(iy as usize + 1) * side];
                    for ox in 0..out {
                        let ix = (2 * ox + kx) as isize - 1;
                        if ix >= 0 && ix < side as isize {
                            dst[ix as usize] += row[oy * out + ox];
                        }
                    }
                }
            }
        }
    }
}

/// Stateless view over an architecture and a parameter vector.
pub struct Network<'a> {
    pub arch: &'a Architecture,
    pub params: &'a [f64],
}

impl<'a> Network<'a> {
    pub fn new(arch: &'a Architecture, params: &'a [f64]) -> Self {
        debug_assert_eq!(params.len(), arch.param_count());
        Self { arch, params }
    }

    /// Runs the tower on a `side x side` single-channel crop and returns the
    /// pooled feature vector with the cache needed by [`Network::tower_backward`].
    pub fn tower_forward(&self, crop: &[f64], side: usize) -> (Vec<f64>, TowerCache) {
        let offs = self.arch.conv_offsets();
        let mut x = crop.to_vec();
        let mut s = side;
        let mut layers = Vec::with_capacity(self.arch.convs.len());
        for (li, &(cin, cout)) in self.arch.convs.iter().enumerate() {
            let o = s / 2;
            let positions = o * o;
            let k = cin * 9;
            let mut col = vec![0.0; k * positions];
            im2col(&x, cin, s, &mut col);
            let w = &self.params[offs[li]..offs[li] + cout * k];
            let b = &self.params[offs[li] + cout * k..offs[li] + cout * k + cout];
            let mut act = vec![0.0; cout * positions];
            for (oc, row) in act.chunks_mut(positions).enumerate() {
                row.fill(b[oc]);
            }
            gemm(cout, k, positions, w, (k as isize, 1), &col, (positions as isize, 1), 1.0, &mut act);
            act.iter_mut().for_each(|v| *v = v.max(0.0));
            x = act.clone();
            layers.push(ConvCache { col, act, in_side: s });
            s = o;
        }
        let positions = s * s;
        let feat = x.chunks(positions).map(|ch| ch.iter().sum::<f64>() / positions as f64).collect();
        (feat, TowerCache { layers })
    }

    /// Accumulates parameter gradients of the tower given `d_feat`.
    pub fn tower_backward(&self, cache: &TowerCache, d_feat: &[f64], grad: &mut [f64]) {
        let offs = self.arch.conv_offsets();
        let last = cache.layers.last().expect("non-empty tower");
        let out_side = last.in_side / 2;
        let positions = out_side * out_side;
        // gradient w.r.t. the last post-ReLU activation
        let mut d_act: Vec<f64> = d_feat
            .iter()
            .flat_map(|&g| std::iter::repeat(g / positions as f64).take(positions))
            .collect();
        for li in (0..self.arch.convs.len()).rev() {
            let (cin, cout) = self.arch.convs[li];
            let layer = &cache.layers[li];
            let s = layer.in_side;
            let positions = (s / 2) * (s / 2);
            let k = cin * 9;
            for (d, &a) in d_act.iter_mut().zip(&layer.act) {
                if a <= 0.0 {
                    *d = 0.0;
                }
            }
            let (wg, rest) = grad[offs[li]..].split_at_mut(cout * k);
            // dW += dPre · colᵀ
            gemm(cout, positions, k, &d_act, (positions as isize, 1), &layer.col, (1, positions as isize), 1.0, wg);
            for (oc, row) in d_act.chunks(positions).enumerate() {
                rest[oc] += row.iter().sum::<f64>();
            }
            if li == 0 {
                break;
            }
            let w = &self.params[offs[li]..offs[li] + cout * k];
            let mut d_col = vec![0.0; k * positions];
            // dCol = Wᵀ · dPre
            gemm(k, cout, positions, w, (1, k as isize), &d_act, (positions as isize, 1), 0.0, &mut d_col);
            let mut dx = vec![0.0; cin * s * s];
            col2im(&d_col, cin, s, &mut dx);
            d_act = dx;
        }
    }

    /// Tower features only.
    pub fn features(&self, crop: &[f64], side: usize) -> Vec<f64> {
        self.tower_forward(crop, side).0
    }

    /// Head input `[a, b, a - b]`.
    pub fn head_input(fa: &[f64], fb: &[f64]) -> Vec<f64> {
        let mut u = Vec::with_capacity(fa.len() * 3);
        u.extend_from_slice(fa);
        u.extend_from_slice(fb);
        u.extend(fa.iter().zip(fb).map(|(a, b)| a - b));
        u
    }

    /// Head forward returning the scalar and per-layer activations (input first).
    pub fn head_forward(&self, u: &[f64]) -> (f64, Vec<Vec<f64>>) {
        let offs = self.arch.dense_offsets();
        let last = self.arch.dense.len() - 1;
        let mut acts = vec![u.to_vec()];
        for (li, &(nin, nout)) in self.arch.dense.iter().enumerate() {
            let w = &self.params[offs[li]..offs[li] + nin * nout];
            let b = &self.params[offs[li] + nin * nout..offs[li] + nin * nout + nout];
            let x = acts.last().unwrap();
            let y: Vec<f64> = (0..nout)
                .map(|o| {
                    let v = b[o] + w[o * nin..(o + 1) * nin].iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                    if li == last {
                        v
                    } else {
                        v.max(0.0)
                    }
                })
                .collect();
            acts.push(y);
        }
        (acts.last().unwrap()[0], acts)
    }

    /// Backpropagates `d_out` through the head, accumulating parameter
    /// gradients, and returns the gradient w.r.t. the head input.
    pub fn head_backward(&self, acts: &[Vec<f64>], d_out: f64, grad: &mut [f64]) -> Vec<f64> {
        let offs = self.arch.dense_offsets();
        let mut d = vec![d_out];
        for li in (0..self.arch.dense.len()).rev() {
            let (nin, nout) = self.arch.dense[li];
            let x = &acts[li];
            let y = &acts[li + 1];
            if li != self.arch.dense.len() - 1 {
                for (g, &v) in d.iter_mut().zip(y) {
                    if v <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            let w = &self.params[offs[li]..offs[li] + nin * nout];
            let mut dx = vec![0.0; nin];
            for o in 0..nout {
                let g = d[o];
                if g == 0.0 {
                    continue;
                }
                let gw = &mut grad[offs[li] + o * nin..offs[li] + (o + 1) * nin];
                for (gi, &xi) in gw.iter_mut().zip(x) {
                    *gi += g * xi;
                }
                grad[offs[li] + nin * nout + o] += g;
                for (dxi, &wi) in dx.iter_mut().zip(&w[o * nin..(o + 1) * nin]) {
                    *dxi += g * wi;
                }
            }
            d = dx;
        }
        d
    }
}
