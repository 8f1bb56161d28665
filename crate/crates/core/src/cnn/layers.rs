//! Per-sample kernels for the layer types. Everything is NHWC; convolution
//! weights are `[kh, kw, in, out]`, dense weights `[in, out]`.

/// 3x3 "same" convolution with zero padding, stride 1.
pub(super) fn conv3x3_forward(
    input: &[f64],
    (h, w, cin): (usize, usize, usize),
    weight: &[f64],
    bias: &[f64],
    out: &mut [f64],
) {
    let cout = bias.len();
    let mut patch = vec![0.0; 9 * cin];
    for y in 0..h {
        for x in 0..w {
            gather_patch(input, (h, w, cin), y, x, &mut patch);
            let dst = &mut out[(y * w + x) * cout..(y * w + x + 1) * cout];
            dst.copy_from_slice(bias);
            for (k, &p) in patch.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let row = &weight[k * cout..(k + 1) * cout];
                for (d, &wv) in dst.iter_mut().zip(row) {
                    *d += p * wv;
                }
            }
        }
    }
}

/// Accumulates weight/bias gradients; writes the input gradient when asked.
pub(super) fn conv3x3_backward(
    input: &[f64],
    (h, w, cin): (usize, usize, usize),
    weight: &[f64],
    grad_out: &[f64],
    grad_weight: &mut [f64],
    grad_bias: &mut [f64],
    grad_input: Option<&mut [f64]>,
) {
    let cout = grad_bias.len();
    let mut patch = vec![0.0; 9 * cin];
    for y in 0..h {
        for x in 0..w {
            let g = &grad_out[(y * w + x) * cout..(y * w + x + 1) * cout];
            for (gb, &gv) in grad_bias.iter_mut().zip(g) {
                *gb += gv;
            }
            gather_patch(input, (h, w, cin), y, x, &mut patch);
            for (k, &p) in patch.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let gw = &mut grad_weight[k * cout..(k + 1) * cout];
                for (d, &gv) in gw.iter_mut().zip(g) {
                    *d += p * gv;
                }
            }
        }
    }
    let Some(grad_input) = grad_input else {
        return;
    };
    grad_input.fill(0.0);
    for y in 0..h {
        for x in 0..w {
            let g = &grad_out[(y * w + x) * cout..(y * w + x + 1) * cout];
            for ky in 0..3 {
                let iy = y as isize + ky as isize - 1;
                if iy < 0 || iy >= h as isize {
                    continue;
                }
                for kx in 0..3 {
                    let ix = x as isize + kx as isize - 1;
                    if ix < 0 || ix >= w as isize {
                        continue;
                    }
                    let base = (iy as usize * w + ix as usize) * cin;
                    for c in 0..cin {
                        let k = (ky * 3 + kx) * cin + c;
                        let row = &weight[k * cout..(k + 1) * cout];
                        let s: f64 = row.iter().zip(g).map(|(a, b)| a * b).sum();
                        grad_input[base + c] += s;
                    }
                }
            }
        }
    }
}

fn gather_patch(input: &[f64], (h, w, cin): (usize, usize, usize), y: usize, x: usize, patch: &mut [f64]) {
    for ky in 0..3 {
        let iy = y as isize + ky as isize - 1;
        for kx in 0..3 {
            let ix = x as isize + kx as isize - 1;
            let dst = &mut patch[(ky * 3 + kx) * cin..(ky * 3 + kx + 1) * cin];
            if iy < 0 || iy >= h as isize || ix < 0 || ix >= w as isize {
                dst.fill(0.0);
            } else {
                let src = (iy as usize * w + ix as usize) * cin;
                dst.copy_from_slice(&input[src..src + cin]);
            }
        }
    }
}

/// 2x2 max pooling, stride 2. Records the flat input index of each maximum
/// (first one wins on ties).
pub(super) fn maxpool_forward(
    input: &[f64],
    (h, w, c): (usize, usize, usize),
    out: &mut [f64],
    argmax: &mut [u32],
) {
    let (oh, ow) = (h / 2, w / 2);
    for y in 0..oh {
        for x in 0..ow {
            for ch in 0..c {
                let mut best = usize::MAX;
                let mut best_v = f64::NEG_INFINITY;
                for dy in 0..2 {
                    for dx in 0..2 {
                        let i = ((2 * y + dy) * w + 2 * x + dx) * c + ch;
                        if input[i] > best_v {
                            best_v = input[i];
                            best = i;
                        }
                    }
                }
                let o = (y * ow + x) * c + ch;
                out[o] = best_v;
                argmax[o] = best as u32;
            }
        }
    }
}

pub(super) fn dense_forward(input: &[f64], weight: &[f64], bias: &[f64], out: &mut [f64]) {
    let n_out = bias.len();
    out.copy_from_slice(bias);
    for (i, &x) in input.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        let row = &weight[i * n_out..(i + 1) * n_out];
        for (o, &wv) in out.iter_mut().zip(row) {
            *o += x * wv;
        }
    }
}

pub(super) fn dense_backward(
    input: &[f64],
    weight: &[f64],
    grad_out: &[f64],
    grad_weight: &mut [f64],
    grad_bias: &mut [f64],
    grad_input: Option<&mut [f64]>,
) {
    let n_out = grad_bias.len();
    for (gb, &g) in grad_bias.iter_mut().zip(grad_out) {
        *gb += g;
    }
    for (i, &x) in input.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        let gw = &mut grad_weight[i * n_out..(i + 1) * n_out];
        for (d, &g) in gw.iter_mut().zip(grad_out) {
            *d += x * g;
        }
    }
    if let Some(grad_input) = grad_input {
        for (i, gi) in grad_input.iter_mut().enumerate() {
            let row = &weight[i * n_out..(i + 1) * n_out];
            *gi = row.iter().zip(grad_out).map(|(a, b)| a * b).sum();
        }
    }
}
