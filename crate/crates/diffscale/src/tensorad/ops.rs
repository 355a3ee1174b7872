//! Forward constructors (eager evaluation) and the matching backward rules.

use super::{Op, Tape, TensorId};

const GN_EPS: f64 = 1e-5;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Tape {
    fn assert_same_shape(&self, a: TensorId, b: TensorId) {
        assert_eq!(
            self.nodes[a.0].shape, self.nodes[b.0].shape,
            "shape mismatch: {:?} vs {:?}",
            self.nodes[a.0].shape, self.nodes[b.0].shape
        );
    }

    pub fn add(&mut self, a: TensorId, b: TensorId) -> TensorId {
        self.assert_same_shape(a, b);
        let data = self.nodes[a.0]
            .data
            .iter()
            .zip(&self.nodes[b.0].data)
            .map(|(x, y)| x + y)
            .collect();
        self.push(self.nodes[a.0].shape.clone(), data, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: TensorId, b: TensorId) -> TensorId {
        self.assert_same_shape(a, b);
        let data = self.nodes[a.0]
            .data
            .iter()
            .zip(&self.nodes[b.0].data)
            .map(|(x, y)| x - y)
            .collect();
        self.push(self.nodes[a.0].shape.clone(), data, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: TensorId, b: TensorId) -> TensorId {
        self.assert_same_shape(a, b);
        let data = self.nodes[a.0]
            .data
            .iter()
            .zip(&self.nodes[b.0].data)
            .map(|(x, y)| x * y)
            .collect();
        self.push(self.nodes[a.0].shape.clone(), data, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: TensorId, c: f64) -> TensorId {
        let data = self.nodes[a.0].data.iter().map(|x| x * c).collect();
        self.push(self.nodes[a.0].shape.clone(), data, Op::Scale(a, c))
    }

    /// x: [C,H,W] + bias [C], broadcast over spatial positions.
    pub fn add_bias(&mut self, x: TensorId, bias: TensorId) -> TensorId {
        let shape = self.nodes[x.0].shape.clone();
        assert_eq!(shape.len(), 3);
        assert_eq!(self.nodes[bias.0].shape, vec![shape[0]]);
        let hw = shape[1] * shape[2];
        let mut data = self.nodes[x.0].data.clone();
        for c in 0..shape[0] {
            let b = self.nodes[bias.0].data[c];
            for v in &mut data[c * hw..(c + 1) * hw] {
                *v += b;
            }
        }
        self.push(shape, data, Op::AddBias { x, bias })
    }

    /// y = W x + b with x: [N], w: [M,N], b: [M].
    pub fn dense(&mut self, x: TensorId, w: TensorId, b: TensorId) -> TensorId {
        let n = self.nodes[x.0].data.len();
        let wshape = self.nodes[w.0].shape.clone();
        assert_eq!(wshape.len(), 2);
        assert_eq!(wshape[1], n, "dense input size mismatch");
        let m = wshape[0];
        assert_eq!(self.nodes[b.0].data.len(), m);
        let mut data = vec![0.0; m];
        for i in 0..m {
            let row = &self.nodes[w.0].data[i * n..(i + 1) * n];
            let mut acc = self.nodes[b.0].data[i];
            for (wv, xv) in row.iter().zip(&self.nodes[x.0].data) {
                acc += wv * xv;
            }
            data[i] = acc;
        }
        self.push(vec![m], data, Op::Dense { x, w, b })
    }

    /// [M,K] x [K,N] -> [M,N].
    pub fn matmul(&mut self, a: TensorId, b: TensorId) -> TensorId {
        let (m, k) = (self.nodes[a.0].shape[0], self.nodes[a.0].shape[1]);
        let (k2, n) = (self.nodes[b.0].shape[0], self.nodes[b.0].shape[1]);
        assert_eq!(k, k2, "matmul inner dimension mismatch");
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            for l in 0..k {
                let av = self.nodes[a.0].data[i * k + l];
                if av == 0.0 {
                    continue;
                }
                let brow = &self.nodes[b.0].data[l * n..(l + 1) * n];
                let orow = &mut data[i * n..(i + 1) * n];
                for (o, bv) in orow.iter_mut().zip(brow) {
                    *o += av * bv;
                }
            }
        }
        self.push(vec![m, n], data, Op::MatMul(a, b))
    }

    pub fn transpose(&mut self, a: TensorId) -> TensorId {
        let (m, n) = (self.nodes[a.0].shape[0], self.nodes[a.0].shape[1]);
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                data[j * m + i] = self.nodes[a.0].data[i * n + j];
            }
        }
        self.push(vec![n, m], data, Op::Transpose(a))
    }

    /// Stride-1 zero-padded "same" convolution; w: [Cout,Cin,k,k], k odd.
    pub fn conv2d(&mut self, x: TensorId, w: TensorId, b: TensorId) -> TensorId {
        let xs = self.nodes[x.0].shape.clone();
        let ws = self.nodes[w.0].shape.clone();
        assert_eq!(xs.len(), 3);
        assert_eq!(ws.len(), 4);
        let (cin, h, wd) = (xs[0], xs[1], xs[2]);
        let (cout, cin2, kh, kw) = (ws[0], ws[1], ws[2], ws[3]);
        assert_eq!(cin, cin2, "conv2d channel mismatch");
        assert_eq!(kh, kw);
        assert_eq!(kh % 2, 1, "conv2d kernel must be odd for same padding");
        assert_eq!(self.nodes[b.0].data.len(), cout);
        let pad = (kh / 2) as isize;
        let mut data = vec![0.0; cout * h * wd];
        let xd = &self.nodes[x.0].data;
        let wdta = &self.nodes[w.0].data;
        for co in 0..cout {
            let out = &mut data[co * h * wd..(co + 1) * h * wd];
            out.fill(self.nodes[b.0].data[co]);
            for ci in 0..cin {
                let xch = &xd[ci * h * wd..(ci + 1) * h * wd];
                let wch = &wdta[(co * cin + ci) * kh * kw..(co * cin + ci + 1) * kh * kw];
                for kr in 0..kh {
                    let dr = kr as isize - pad;
                    for kc in 0..kw {
                        let dc = kc as isize - pad;
                        let wv = wch[kr * kw + kc];
                        if wv == 0.0 {
                            continue;
                        }
                        let r0 = (-dr).max(0) as usize;
                        let r1 = ((h as isize - dr).min(h as isize)).max(0) as usize;
                        let c0 = (-dc).max(0) as usize;
                        let c1 = ((wd as isize - dc).min(wd as isize)).max(0) as usize;
                        if c1 <= c0 {
                            continue;
                        }
                        for r in r0..r1 {
                            let sr = (r as isize + dr) as usize;
                            let s0 = (c0 as isize + dc) as usize;
                            let s1 = (c1 as isize + dc) as usize;
                            let src = &xch[sr * wd + s0..sr * wd + s1];
                            let dst = &mut out[r * wd + c0..r * wd + c1];
                            for (o, s) in dst.iter_mut().zip(src) {
                                *o += wv * s;
                            }
                        }
                    }
                }
            }
        }
        self.push(vec![cout, h, wd], data, Op::Conv2d { x, w, b })
    }

    /// Per-group mean-0 / var-1 normalization over [C,H,W], then per-channel
    /// affine gamma, beta.
    pub fn group_norm(&mut self, x: TensorId, gamma: TensorId, beta: TensorId, groups: usize) -> TensorId {
        let shape = self.nodes[x.0].shape.clone();
        let (c, h, w) = (shape[0], shape[1], shape[2]);
        assert_eq!(c % groups, 0, "channels not divisible by groups");
        assert_eq!(self.nodes[gamma.0].data.len(), c);
        assert_eq!(self.nodes[beta.0].data.len(), c);
        let gch = c / groups;
        let gsize = gch * h * w;
        let mut mean = vec![0.0; groups];
        let mut inv_std = vec![0.0; groups];
        let mut data = vec![0.0; c * h * w];
        for g in 0..groups {
            let xg = &self.nodes[x.0].data[g * gsize..(g + 1) * gsize];
            let m: f64 = xg.iter().sum::<f64>() / gsize as f64;
            let var: f64 = xg.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / gsize as f64;
            let is = 1.0 / (var + GN_EPS).sqrt();
            mean[g] = m;
            inv_std[g] = is;
            for (i, v) in xg.iter().enumerate() {
                let flat = g * gsize + i;
                let ch = flat / (h * w);
                data[flat] = (v - m) * is * self.nodes[gamma.0].data[ch] + self.nodes[beta.0].data[ch];
            }
        }
        self.push(shape, data, Op::GroupNorm { x, gamma, beta, groups, mean, inv_std })
    }

    pub fn silu(&mut self, a: TensorId) -> TensorId {
        let data = self.nodes[a.0].data.iter().map(|&x| x * sigmoid(x)).collect();
        self.push(self.nodes[a.0].shape.clone(), data, Op::Silu(a))
    }

    /// 2x average-pool downsample on [C,H,W]; H and W must be even.
    pub fn avg_pool2(&mut self, a: TensorId) -> TensorId {
        let (c, h, w) = (
            self.nodes[a.0].shape[0],
            self.nodes[a.0].shape[1],
            self.nodes[a.0].shape[2],
        );
        assert_eq!(h % 2, 0);
        assert_eq!(w % 2, 0);
        let (oh, ow) = (h / 2, w / 2);
        let mut data = vec![0.0; c * oh * ow];
        for ch in 0..c {
            let src = &self.nodes[a.0].data[ch * h * w..(ch + 1) * h * w];
            let dst = &mut data[ch * oh * ow..(ch + 1) * oh * ow];
            for r in 0..oh {
                for cc in 0..ow {
                    dst[r * ow + cc] = 0.25
                        * (src[2 * r * w + 2 * cc]
                            + src[2 * r * w + 2 * cc + 1]
                            + src[(2 * r + 1) * w + 2 * cc]
                            + src[(2 * r + 1) * w + 2 * cc + 1]);
                }
            }
        }
        self.push(vec![c, oh, ow], data, Op::AvgPool2(a))
    }

    /// 2x nearest-neighbour upsample on [C,H,W].
    pub fn upsample_nearest2(&mut self, a: TensorId) -> TensorId {
        let (c, h, w) = (
            self.nodes[a.0].shape[0],
            self.nodes[a.0].shape[1],
            self.nodes[a.0].shape[2],
        );
        let (oh, ow) = (2 * h, 2 * w);
        let mut data = vec![0.0; c * oh * ow];
        for ch in 0..c {
            let src = &self.nodes[a.0].data[ch * h * w..(ch + 1) * h * w];
            let dst = &mut data[ch * oh * ow..(ch + 1) * oh * ow];
            for r in 0..oh {
                for cc in 0..ow {
                    dst[r * ow + cc] = src[(r / 2) * w + cc / 2];
                }
            }
        }
        self.push(vec![c, oh, ow], data, Op::UpsampleNearest2(a))
    }

    /// Concatenate along the channel axis; spatial shapes must match.
    pub fn concat_channels(&mut self, a: TensorId, b: TensorId) -> TensorId {
        let sa = self.nodes[a.0].shape.clone();
        let sb = self.nodes[b.0].shape.clone();
        assert_eq!(sa[1..], sb[1..], "concat spatial shape mismatch");
        let mut data = self.nodes[a.0].data.clone();
        data.extend_from_slice(&self.nodes[b.0].data);
        self.push(vec![sa[0] + sb[0], sa[1], sa[2]], data, Op::ConcatChannels(a, b))
    }

    /// Row-wise softmax over [M,N].
    pub fn softmax_rows(&mut self, a: TensorId) -> TensorId {
        let (m, n) = (self.nodes[a.0].shape[0], self.nodes[a.0].shape[1]);
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            let row = &self.nodes[a.0].data[i * n..(i + 1) * n];
            let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for (j, v) in row.iter().enumerate() {
                let e = (v - mx).exp();
                data[i * n + j] = e;
                sum += e;
            }
            for v in &mut data[i * n..(i + 1) * n] {
                *v /= sum;
            }
        }
        self.push(vec![m, n], data, Op::SoftmaxRows(a))
    }

    pub fn reshape(&mut self, a: TensorId, shape: &[usize]) -> TensorId {
        assert_eq!(
            shape.iter().product::<usize>(),
            self.nodes[a.0].data.len(),
            "reshape element count mismatch"
        );
        let data = self.nodes[a.0].data.clone();
        self.push(shape.to_vec(), data, Op::Reshape(a))
    }

    pub fn mean_all(&mut self, a: TensorId) -> TensorId {
        let n = self.nodes[a.0].data.len();
        let m = self.nodes[a.0].data.iter().sum::<f64>() / n as f64;
        self.push(vec![1], vec![m], Op::MeanAll(a))
    }

    pub(crate) fn backward_node(&self, idx: usize, grads: &mut Vec<Option<Vec<f64>>>) {
        let (before, after) = grads.split_at_mut(idx);
        let g = after[0].as_ref().expect("gradient present").clone();
        fn acc<'a>(before: &'a mut [Option<Vec<f64>>], pid: TensorId, len: usize) -> &'a mut Vec<f64> {
            before[pid.0].get_or_insert_with(|| vec![0.0; len])
        }
        let node = &self.nodes[idx];
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                for (pid_ref, _) in [(a, 1.0), (b, 1.0)] {
                    if self.nodes[pid_ref.0].requires_grad {
                        let pg = acc(before, *pid_ref, g.len());
                        for (p, gv) in pg.iter_mut().zip(&g) {
                            *p += gv;
                        }
                    }
                }
            }
            Op::Sub(a, b) => {
                if self.nodes[a.0].requires_grad {
                    let pg = acc(before, *a, g.len());
                    for (p, gv) in pg.iter_mut().zip(&g) {
                        *p += gv;
                    }
                }
                if self.nodes[b.0].requires_grad {
                    let pg = acc(before, *b, g.len());
                    for (p, gv) in pg.iter_mut().zip(&g) {
                        *p -= gv;
                    }
                }
            }
            Op::Mul(a, b) => {
                if self.nodes[a.0].requires_grad {
                    let pg = acc(before, *a, g.len());
                    for ((p, gv), bv) in pg.iter_mut().zip(&g).zip(&self.nodes[b.0].data) {
                        *p += gv * bv;
                    }
                }
                if self.nodes[b.0].requires_grad {
                    let pg = acc(before, *b, g.len());
                    for ((p, gv), av) in pg.iter_mut().zip(&g).zip(&self.nodes[a.0].data) {
                        *p += gv * av;
                    }
                }
            }
            Op::Scale(a, c) => {
                if self.nodes[a.0].requires_grad {
                    let pg = acc(before, *a, g.len());
                    for (p, gv) in pg.iter_mut().zip(&g) {
                        *p += gv * c;
                    }
                }
            }
            Op::AddBias { x, bias } => {
                let shape = &node.shape;
                let hw = shape[1] * shape[2];
                if self.nodes[x.0].requires_grad {
                    let pg = acc(before, *x, g.len());
                    for (p, gv) in pg.iter_mut().zip(&g) {
                        *p += gv;
                    }
                }
                if self.nodes[bias.0].requires_grad {
                    let pg = acc(before, *bias, shape[0]);
                    for c in 0..shape[0] {
                        pg[c] += g[c * hw..(c + 1) * hw].iter().sum::<f64>();
                    }
                }
            }
            Op::Dense { x, w, b } => {
                let n = self.nodes[x.0].data.len();
                let m = node.data.len();
                if self.nodes[x.0].requires_grad {
                    let pg = acc(before, *x, n);
                    for i in 0..m {
                        let row = &self.nodes[w.0].data[i * n..(i + 1) * n];
                        for (p, wv) in pg.iter_mut().zip(row) {
                            *p += g[i] * wv;
                        }
                    }
                }
                if self.nodes[w.0].requires_grad {
                    let pg = acc(before, *w, m * n);
                    for i in 0..m {
                        let row = &mut pg[i * n..(i + 1) * n];
                        for (p, xv) in row.iter_mut().zip(&self.nodes[x.0].data) {
                            *p += g[i] * xv;
                        }
                    }
                }
                if self.nodes[b.0].requires_grad {
                    let pg = acc(before, *b, m);
                    for (p, gv) in pg.iter_mut().zip(&g) {
                        *p += gv;
                    }
                }
            }
            Op::MatMul(a, b) => {
                let (m, k) = (self.nodes[a.0].shape[0], self.nodes[a.0].shape[1]);
                let n = self.nodes[b.0].shape[1];
                if self.nodes[a.0].requires_grad {
                    // dA = G B^T
                    let pg = acc(before, *a, m * k);
                    for i in 0..m {
                        for l in 0..k {
                            let brow = &self.nodes[b.0].data[l * n..(l + 1) * n];
                            let grow = &g[i * n..(i + 1) * n];
                            let mut s = 0.0;
                            for (gv, bv) in grow.iter().zip(brow) {
                                s += gv * bv;
                            }
                            pg[i * k + l] += s;
                        }
                    }
                }
                if self.nodes[b.0].requires_grad {
                    // dB = A^T G
                    let pg = acc(before, *b, k * n);
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        for l in 0..k {
                            let av = self.nodes[a.0].data[i * k + l];
                            if av == 0.0 {
                                continue;
                            }
                            let prow = &mut pg[l * n..(l + 1) * n];
                            for (p, gv) in prow.iter_mut().zip(grow) {
                                *p += av * gv;
                            }
                        }
                    }
                }
            }
            Op::Transpose(a) => {
                if self.nodes[a.0].requires_grad {
                    let (n, m) = (node.shape[0], node.shape[1]);
                    let pg = acc(before, *a, m * n);
                    for i in 0..n {
                        for j in 0..m {
                            pg[j * n + i] += g[i * m + j];
                        }
                    }
                }
            }
            Op::Conv2d { x, w, b } => {
                let xs = &self.nodes[x.0].shape;
                let ws = &self.nodes[w.0].shape;
                let (cin, h, wd) = (xs[0], xs[1], xs[2]);
                let (cout, k) = (ws[0], ws[2]);
                let pad = (k / 2) as isize;
                if self.nodes[x.0].requires_grad {
                    let pg = acc(before, *x, cin * h * wd);
                    for co in 0..cout {
                        let gch = &g[co * h * wd..(co + 1) * h * wd];
                        for ci in 0..cin {
                            let wch =
                                &self.nodes[w.0].data[(co * cin + ci) * k * k..(co * cin + ci + 1) * k * k];
                            let pch = &mut pg[ci * h * wd..(ci + 1) * h * wd];
                            for kr in 0..k {
                                let dr = kr as isize - pad;
                                for kc in 0..k {
                                    let dc = kc as isize - pad;
                                    let wv = wch[kr * k + kc];
                                    if wv == 0.0 {
                                        continue;
                                    }
                                    for r in 0..h {
                                        let sr = r as isize + dr;
                                        if sr < 0 || sr >= h as isize {
                                            continue;
                                        }
                                        for c in 0..wd {
                                            let sc = c as isize + dc;
                                            if sc < 0 || sc >= wd as isize {
                                                continue;
                                            }
                                            pch[sr as usize * wd + sc as usize] += wv * gch[r * wd + c];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                if self.nodes[w.0].requires_grad {
                    let pg = acc(before, *w, cout * cin * k * k);
                    for co in 0..cout {
                        let gch = &g[co * h * wd..(co + 1) * h * wd];
                        for ci in 0..cin {
                            let xch = &self.nodes[x.0].data[ci * h * wd..(ci + 1) * h * wd];
                            let pch = &mut pg[(co * cin + ci) * k * k..(co * cin + ci + 1) * k * k];
                            for kr in 0..k {
                                let dr = kr as isize - pad;
                                for kc in 0..k {
                                    let dc = kc as isize - pad;
                                    let mut s = 0.0;
                                    for r in 0..h {
                                        let sr = r as isize + dr;
                                        if sr < 0 || sr >= h as isize {
                                            continue;
                                        }
                                        for c in 0..wd {
                                            let sc = c as isize + dc;
                                            if sc < 0 || sc >= wd as isize {
                                                continue;
                                            }
                                            s += xch[sr as usize * wd + sc as usize] * gch[r * wd + c];
                                        }
                                    }
                                    pch[kr * k + kc] += s;
                                }
                            }
                        }
                    }
                }
                if self.nodes[b.0].requires_grad {
                    let pg = acc(before, *b, cout);
                    for co in 0..cout {
                        pg[co] += g[co * h * wd..(co + 1) * h * wd].iter().sum::<f64>();
                    }
                }
            }
            Op::GroupNorm { x, gamma, beta, groups, mean, inv_std } => {
                let shape = &node.shape;
                let (c, h, w) = (shape[0], shape[1], shape[2]);
                let gch = c / groups;
                let gsize = gch * h * w;
                let hw = h * w;
                if self.nodes[gamma.0].requires_grad || self.nodes[beta.0].requires_grad {
                    for ch in 0..c {
                        let grp = ch / gch;
                        let mut dgamma = 0.0;
                        let mut dbeta = 0.0;
                        for i in 0..hw {
                            let flat = ch * hw + i;
                            let y = (self.nodes[x.0].data[flat] - mean[grp]) * inv_std[grp];
                            dgamma += g[flat] * y;
                            dbeta += g[flat];
                        }
                        if self.nodes[gamma.0].requires_grad {
                            acc(before, *gamma, c)[ch] += dgamma;
                        }
                        if self.nodes[beta.0].requires_grad {
                            acc(before, *beta, c)[ch] += dbeta;
                        }
                    }
                }
                if self.nodes[x.0].requires_grad {
                    // standard normalization backward within each group with
                    // dy = g * gamma_c, y = normalized activations:
                    // dx = inv_std/N * (N*dy - sum(dy) - y * sum(dy*y))
                    let pg = acc(before, *x, c * hw);
                    for grp in 0..*groups {
                        let n = gsize as f64;
                        let mut sum_dy = 0.0;
                        let mut sum_dyy = 0.0;
                        for i in 0..gsize {
                            let flat = grp * gsize + i;
                            let ch = flat / hw;
                            let dy = g[flat] * self.nodes[gamma.0].data[ch];
                            let y = (self.nodes[x.0].data[flat] - mean[grp]) * inv_std[grp];
                            sum_dy += dy;
                            sum_dyy += dy * y;
                        }
                        for i in 0..gsize {
                            let flat = grp * gsize + i;
                            let ch = flat / hw;
                            let dy = g[flat] * self.nodes[gamma.0].data[ch];
                            let y = (self.nodes[x.0].data[flat] - mean[grp]) * inv_std[grp];
                            pg[flat] += inv_std[grp] / n * (n * dy - sum_dy - y * sum_dyy);
                        }
                    }
                }
            }
            Op::Silu(a) => {
                if self.nodes[a.0].requires_grad {
                    let pg = acc(before, *a, g.len());
                    for ((p, gv), &xv) in pg.iter_mut().zip(&g).zip(&self.nodes[a.0].data) {
                        let s = sigmoid(xv);
                        *p += gv * s * (1.0 + xv * (1.0 - s));
                    }
                }
            }
            Op::AvgPool2(a) => {
                if self.nodes[a.0].requires_grad {
                    let (c, oh, ow) = (node.shape[0], node.shape[1], node.shape[2]);
                    let (h, w) = (2 * oh, 2 * ow);
                    let pg = acc(before, *a, c * h * w);
                    for ch in 0..c {
                        for r in 0..oh {
                            for cc in 0..ow {
                                let gv = 0.25 * g[ch * oh * ow + r * ow + cc];
                                pg[ch * h * w + 2 * r * w + 2 * cc] += gv;
                                pg[ch * h * w + 2 * r * w + 2 * cc + 1] += gv;
                                pg[ch * h * w + (2 * r + 1) * w + 2 * cc] += gv;
                                pg[ch * h * w + (2 * r + 1) * w + 2 * cc + 1] += gv;
                            }
                        }
                    }
                }
            }
            Op::UpsampleNearest2(a) => {
                if self.nodes[a.0].requires_grad {
                    let (c, oh, ow) = (node.shape[0], node.shape[1], node.shape[2]);
                    let (h, w) = (oh / 2, ow / 2);
                    let pg = acc(before, *a, c * h * w);
                    for ch in 0..c {
                        for r in 0..oh {
                            for cc in 0..ow {
                                pg[ch * h * w + (r / 2) * w + cc / 2] += g[ch * oh * ow + r * ow + cc];
                            }
                        }
                    }
                }
            }
            Op::ConcatChannels(a, b) => {
                let na = self.nodes[a.0].data.len();
                if self.nodes[a.0].requires_grad {
                    let pg = acc(before, *a, na);
                    for (p, gv) in pg.iter_mut().zip(&g[..na]) {
                        *p += gv;
                    }
                }
                if self.nodes[b.0].requires_grad {
                    let nb = self.nodes[b.0].data.len();
                    let pg = acc(before, *b, nb);
                    for (p, gv) in pg.iter_mut().zip(&g[na..]) {
                        *p += gv;
                    }
                }
            }
            Op::SoftmaxRows(a) => {
                if self.nodes[a.0].requires_grad {
                    let (m, n) = (node.shape[0], node.shape[1]);
                    let pg = acc(before, *a, m * n);
                    for i in 0..m {
                        let y = &node.data[i * n..(i + 1) * n];
                        let gr = &g[i * n..(i + 1) * n];
                        let dot: f64 = y.iter().zip(gr).map(|(yv, gv)| yv * gv).sum();
                        let prow = &mut pg[i * n..(i + 1) * n];
                        for ((p, yv), gv) in prow.iter_mut().zip(y).zip(gr) {
                            *p += yv * (gv - dot);
                        }
                    }
                }
            }
            Op::Reshape(a) => {
                if self.nodes[a.0].requires_grad {
                    let pg = acc(before, *a, g.len());
                    for (p, gv) in pg.iter_mut().zip(&g) {
                        *p += gv;
                    }
                }
            }
            Op::MeanAll(a) => {
                if self.nodes[a.0].requires_grad {
                    let n = self.nodes[a.0].data.len();
                    let pg = acc(before, *a, n);
                    let gv = g[0] / n as f64;
                    for p in pg.iter_mut() {
                        *p += gv;
                    }
                }
            }
        }
    }
}
