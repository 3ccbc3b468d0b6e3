//! Reverse-mode differentiation over dense `f64` matrices.
//!
//! A [`Tape`] records one forward pass (one utterance) as a list of nodes.
//! Parameters are borrowed from a [`ParamStore`], never copied, and
//! [`Tape::backward`] accumulates their gradients into a [`Gradients`]
//! buffer so several utterances can share one optimizer step. The LSTM is a
//! single fused node with hand-written backpropagation through time.

use std::collections::HashMap;
use std::ops::Range;

use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub type Mat = Array2<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamId(usize);

/// Named parameter matrices, in registration order.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Mat>,
    frozen: Vec<bool>,
    index: HashMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Mat) -> ParamId {
        let name = name.into();
        assert!(!self.index.contains_key(&name), "parameter {name} registered twice");
        let id = ParamId(self.values.len());
        self.index.insert(name.clone(), id);
        self.names.push(name);
        self.values.push(value);
        self.frozen.push(false);
        id
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn get(&self, id: ParamId) -> &Mat {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Mat {
        &mut self.values[id.0]
    }

    pub fn by_name(&self, name: &str) -> Option<&Mat> {
        self.id(name).map(|id| self.get(id))
    }

    pub fn by_name_mut(&mut self, name: &str) -> Option<&mut Mat> {
        self.id(name).map(|id| &mut self.values[id.0])
    }

    pub fn set_frozen(&mut self, id: ParamId, frozen: bool) {
        self.frozen[id.0] = frozen;
    }

    pub fn is_frozen(&self, id: ParamId) -> bool {
        self.frozen[id.0]
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(|v| v.len()).sum()
    }

    pub fn values(&self) -> &[Mat] {
        &self.values
    }

    /// Replaces all values; shapes must match.
    pub fn load_values(&mut self, values: Vec<Mat>) -> Result<(), String> {
        if values.len() != self.values.len() {
            return Err(format!(
                "expected {} tensors, found {}",
                self.values.len(),
                values.len()
            ));
        }
        for (i, v) in values.iter().enumerate() {
            if v.dim() != self.values[i].dim() {
                return Err(format!(
                    "{}: expected shape {:?}, found {:?}",
                    self.names[i],
                    self.values[i].dim(),
                    v.dim()
                ));
            }
        }
        self.values = values;
        Ok(())
    }
}

/// Gradient buffer aligned with a [`ParamStore`].
#[derive(Debug, Clone)]
pub struct Gradients {
    pub tensors: Vec<Mat>,
}

impl Gradients {
    pub fn zeros_like(params: &ParamStore) -> Self {
        Gradients {
            tensors: params.values.iter().map(|v| Mat::zeros(v.dim())).collect(),
        }
    }

    pub fn get(&self, id: ParamId) -> &Mat {
        &self.tensors[id.0]
    }

    pub fn scale(&mut self, factor: f64) {
        for t in &mut self.tensors {
            t.mapv_inplace(|x| x * factor);
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            *a += b;
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.tensors
            .iter()
            .map(|t| t.iter().map(|x| x * x).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    /// Rescales so the global L2 norm is at most `max_norm`; returns the norm
    /// before clipping.
    pub fn clip_global_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.global_norm();
        if norm > max_norm && norm > 0.0 {
            self.scale(max_norm / norm);
        }
        norm
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

struct LstmNode {
    input: Var,
    w_ih: Var,
    w_hh: Var,
    bias: Var,
    reverse: bool,
    /// Per step (in time order): gate activations i, f, g, o.
    gates: Mat,
    cells: Mat,
}

enum Op {
    Input,
    Param(ParamId),
    MatMul(Var, Var),
    /// `a + b` with `b` a single row broadcast over the rows of `a`.
    AddRow(Var, Var),
    Add(Var, Var),
    Scale(Var, f64),
    ConcatCols(Var, Var),
    BroadcastRows(Var),
    MeanRows(Var),
    SegmentMean(Var, Vec<Range<usize>>),
    Gather(Var, Vec<usize>),
    Softmax(Var),
    Tanh(Var),
    MulConst(Var, Mat),
    Lstm(Box<LstmNode>),
    CrossEntropy {
        logits: Var,
        targets: Vec<usize>,
        weights: Vec<f64>,
        probs: Mat,
    },
}

struct Node {
    value: Option<Mat>,
    op: Op,
}

pub struct Tape<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn softmax_row(row: ArrayView1<f64>) -> Array1<f64> {
    let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let e = row.mapv(|x| (x - max).exp());
    let sum = e.sum();
    e / sum
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Tape {
            params,
            nodes: Vec::with_capacity(64),
        }
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    pub fn value(&self, v: Var) -> &Mat {
        match &self.nodes[v.0].op {
            Op::Param(id) => self.params.get(*id),
            _ => self.nodes[v.0].value.as_ref().expect("node value"),
        }
    }

    fn push(&mut self, value: Mat, op: Op) -> Var {
        self.nodes.push(Node {
            value: Some(value),
            op,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn input(&mut self, value: Mat) -> Var {
        self.push(value, Op::Input)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.nodes.push(Node {
            value: None,
            op: Op::Param(id),
        });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let r = self.value(row);
        assert_eq!(r.nrows(), 1, "add_row expects a single row");
        let v = self.value(a) + &r.row(0);
        self.push(v, Op::AddRow(a, row))
    }

    /// `x · w + b`
    pub fn linear(&mut self, x: Var, w: ParamId, b: ParamId) -> Var {
        let w = self.param(w);
        let b = self.param(b);
        let xw = self.matmul(x, w);
        self.add_row(xw, b)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(v, Op::Add(a, b))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let v = self.value(a) * factor;
        self.push(v, Op::Scale(a, factor))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Var {
        let v = ndarray::concatenate(Axis(1), &[self.value(a).view(), self.value(b).view()])
            .expect("concat_cols: row counts differ");
        self.push(v, Op::ConcatCols(a, b))
    }

    pub fn broadcast_rows(&mut self, row: Var, rows: usize) -> Var {
        let r = self.value(row);
        assert_eq!(r.nrows(), 1, "broadcast_rows expects a single row");
        let v = r
            .broadcast((rows, r.ncols()))
            .expect("broadcast")
            .to_owned();
        self.push(v, Op::BroadcastRows(row))
    }

    pub fn mean_rows(&mut self, a: Var) -> Var {
        let v = self
            .value(a)
            .mean_axis(Axis(0))
            .expect("mean_rows of empty matrix")
            .insert_axis(Axis(0));
        self.push(v, Op::MeanRows(a))
    }

    /// Row `k` of the output is the mean of rows `segments[k]` of `a`.
    pub fn segment_mean(&mut self, a: Var, segments: Vec<Range<usize>>) -> Var {
        let src = self.value(a);
        let mut v = Mat::zeros((segments.len(), src.ncols()));
        for (k, seg) in segments.iter().enumerate() {
            assert!(!seg.is_empty(), "empty segment");
            let mean = src.slice(s![seg.clone(), ..]).mean_axis(Axis(0)).unwrap();
            v.row_mut(k).assign(&mean);
        }
        self.push(v, Op::SegmentMean(a, segments))
    }

    pub fn gather(&mut self, a: Var, rows: Vec<usize>) -> Var {
        let v = self.value(a).select(Axis(0), &rows);
        self.push(v, Op::Gather(a, rows))
    }

    pub fn softmax(&mut self, a: Var) -> Var {
        let src = self.value(a);
        let mut v = Mat::zeros(src.dim());
        for (mut out, row) in v.rows_mut().into_iter().zip(src.rows()) {
            out.assign(&softmax_row(row));
        }
        self.push(v, Op::Softmax(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(f64::tanh);
        self.push(v, Op::Tanh(a))
    }

    /// Inverted dropout: zeroes entries with probability `rate` and scales the
    /// survivors by `1 / (1 - rate)`.
    pub fn dropout<R: Rng>(&mut self, a: Var, rate: f64, rng: &mut R) -> Var {
        if rate <= 0.0 {
            return a;
        }
        let keep = 1.0 - rate;
        let shape = self.value(a).dim();
        let mask = Mat::from_shape_fn(shape, |_| {
            if rng.gen::<f64>() < keep {
                1.0 / keep
            } else {
                0.0
            }
        });
        let v = self.value(a) * &mask;
        self.push(v, Op::MulConst(a, mask))
    }

    /// One LSTM direction over the rows of `input` (gate order i, f, g, o).
    /// With `reverse` the sequence is read last row first; output row `t`
    /// always belongs to input row `t`.
    pub fn lstm(&mut self, input: Var, w_ih: ParamId, w_hh: ParamId, bias: ParamId, reverse: bool) -> Var {
        let w_ih_v = self.param(w_ih);
        let w_hh_v = self.param(w_hh);
        let bias_v = self.param(bias);
        let x = self.value(input);
        let wh = self.params.get(w_hh);
        let hidden = wh.nrows();
        let steps = x.nrows();
        let pre = x.dot(self.params.get(w_ih)) + self.params.get(bias).row(0);

        let mut gates = Mat::zeros((steps, 4 * hidden));
        let mut cells = Mat::zeros((steps, hidden));
        let mut out = Mat::zeros((steps, hidden));
        let mut h = Array1::<f64>::zeros(hidden);
        let mut c = Array1::<f64>::zeros(hidden);
        for k in 0..steps {
            let t = if reverse { steps - 1 - k } else { k };
            let z = &pre.row(t) + &h.dot(wh);
            let mut g_row = gates.row_mut(t);
            for j in 0..hidden {
                let i_g = sigmoid(z[j]);
                let f_g = sigmoid(z[hidden + j]);
                let g_g = z[2 * hidden + j].tanh();
                let o_g = sigmoid(z[3 * hidden + j]);
                g_row[j] = i_g;
                g_row[hidden + j] = f_g;
                g_row[2 * hidden + j] = g_g;
                g_row[3 * hidden + j] = o_g;
                c[j] = f_g * c[j] + i_g * g_g;
                h[j] = o_g * c[j].tanh();
            }
            cells.row_mut(t).assign(&c);
            out.row_mut(t).assign(&h);
        }
        self.push(
            out,
            Op::Lstm(Box::new(LstmNode {
                input,
                w_ih: w_ih_v,
                w_hh: w_hh_v,
                bias: bias_v,
                reverse,
                gates,
                cells,
            })),
        )
    }

    /// Weighted mean cross-entropy of row-wise softmax(`logits`) against
    /// `targets`. Rows with weight 0 are masked; if every row is masked the
    /// loss is 0 and no gradient flows.
    pub fn cross_entropy(&mut self, logits: Var, targets: Vec<usize>, weights: Vec<f64>) -> Var {
        let l = self.value(logits);
        assert_eq!(l.nrows(), targets.len());
        assert_eq!(l.nrows(), weights.len());
        let mut probs = Mat::zeros(l.dim());
        for (mut out, row) in probs.rows_mut().into_iter().zip(l.rows()) {
            out.assign(&softmax_row(row));
        }
        let total: f64 = weights.iter().sum();
        let mut loss = 0.0;
        if total > 0.0 {
            for (t, (&target, &w)) in targets.iter().zip(&weights).enumerate() {
                if w > 0.0 {
                    let row = l.row(t);
                    let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
                    let lse = max + row.mapv(|x| (x - max).exp()).sum().ln();
                    loss += w * (lse - row[target]);
                }
            }
            loss /= total;
        }
        self.push(
            Mat::from_elem((1, 1), loss),
            Op::CrossEntropy {
                logits,
                targets,
                weights,
                probs,
            },
        )
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v)[[0, 0]]
    }

    /// Backpropagates from the scalar node `root`, scaled by `seed`, adding
    /// parameter gradients into `grads`. Frozen parameters receive nothing.
    pub fn backward(&self, root: Var, seed: f64, grads: &mut Gradients) {
        let mut adj: Vec<Option<Mat>> = (0..=root.0).map(|_| None).collect();
        adj[root.0] = Some(Mat::from_elem((1, 1), seed));

        fn acc(adj: &mut [Option<Mat>], v: Var, g: Mat) {
            match &mut adj[v.0] {
                Some(existing) => *existing += &g,
                slot => *slot = Some(g),
            }
        }

        for idx in (0..=root.0).rev() {
            let Some(g) = adj[idx].take() else { continue };
            match &self.nodes[idx].op {
                Op::Input => {}
                Op::Param(id) => {
                    if !self.params.is_frozen(*id) {
                        grads.tensors[id.0] += &g;
                    }
                }
                Op::MatMul(a, b) => {
                    let ga = g.dot(&self.value(*b).t());
                    let gb = self.value(*a).t().dot(&g);
                    acc(&mut adj, *a, ga);
                    acc(&mut adj, *b, gb);
                }
                Op::AddRow(a, row) => {
                    let gr = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    acc(&mut adj, *row, gr);
                    acc(&mut adj, *a, g);
                }
                Op::Add(a, b) => {
                    acc(&mut adj, *b, g.clone());
                    acc(&mut adj, *a, g);
                }
                Op::Scale(a, f) => acc(&mut adj, *a, g * *f),
                Op::ConcatCols(a, b) => {
                    let wa = self.value(*a).ncols();
                    acc(&mut adj, *a, g.slice(s![.., ..wa]).to_owned());
                    acc(&mut adj, *b, g.slice(s![.., wa..]).to_owned());
                }
                Op::BroadcastRows(row) => {
                    acc(&mut adj, *row, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                }
                Op::MeanRows(a) => {
                    let n = self.value(*a).nrows();
                    let row = g.row(0).mapv(|x| x / n as f64);
                    let ga = row.broadcast((n, row.len())).unwrap().to_owned();
                    acc(&mut adj, *a, ga);
                }
                Op::SegmentMean(a, segments) => {
                    let mut ga = Mat::zeros(self.value(*a).dim());
                    for (k, seg) in segments.iter().enumerate() {
                        let share = g.row(k).mapv(|x| x / seg.len() as f64);
                        for r in seg.clone() {
                            ga.row_mut(r).assign(&share);
                        }
                    }
                    acc(&mut adj, *a, ga);
                }
                Op::Gather(a, rows) => {
                    let mut ga = Mat::zeros(self.value(*a).dim());
                    for (k, &r) in rows.iter().enumerate() {
                        let mut dst = ga.row_mut(r);
                        dst += &g.row(k);
                    }
                    acc(&mut adj, *a, ga);
                }
                Op::Softmax(a) => {
                    let y = self.nodes[idx].value.as_ref().unwrap();
                    let mut ga = Mat::zeros(y.dim());
                    for ((mut out, yr), gr) in ga.rows_mut().into_iter().zip(y.rows()).zip(g.rows()) {
                        let dot = yr.dot(&gr);
                        out.assign(&(&yr * &gr.mapv(|x| x - dot)));
                    }
                    acc(&mut adj, *a, ga);
                }
                Op::Tanh(a) => {
                    let y = self.nodes[idx].value.as_ref().unwrap();
                    let ga = &g * &y.mapv(|t| 1.0 - t * t);
                    acc(&mut adj, *a, ga);
                }
                Op::MulConst(a, mask) => acc(&mut adj, *a, g * mask),
                Op::CrossEntropy {
                    logits,
                    targets,
                    weights,
                    probs,
                } => {
                    let total: f64 = weights.iter().sum();
                    if total > 0.0 {
                        let scale = g[[0, 0]] / total;
                        let mut gl = probs.clone();
                        for (t, (&target, &w)) in targets.iter().zip(weights).enumerate() {
                            let mut row = gl.row_mut(t);
                            row[target] -= 1.0;
                            row *= w * scale;
                        }
                        acc(&mut adj, *logits, gl);
                    }
                }
                Op::Lstm(node) => {
                    let (gx, gw_ih, gw_hh, gb) = self.lstm_backward(node, &g);
                    acc(&mut adj, node.input, gx);
                    acc(&mut adj, node.w_ih, gw_ih);
                    acc(&mut adj, node.w_hh, gw_hh);
                    acc(&mut adj, node.bias, gb);
                }
            }
        }
    }

    fn lstm_backward(&self, node: &LstmNode, g_out: &Mat) -> (Mat, Mat, Mat, Mat) {
        let x = self.value(node.input);
        let w_ih = self.value(node.w_ih);
        let w_hh = self.value(node.w_hh);
        let hidden = w_hh.nrows();
        let steps = x.nrows();
        let mut dz = Mat::zeros((steps, 4 * hidden));
        let mut g_w_hh = Mat::zeros(w_hh.dim());
        let mut dh_next = Array1::<f64>::zeros(hidden);
        let mut dc_next = Array1::<f64>::zeros(hidden);
        let zero = Array1::<f64>::zeros(hidden);

        // walk the processing order backwards
        for k in (0..steps).rev() {
            let t = if node.reverse { steps - 1 - k } else { k };
            let prev = if k == 0 {
                None
            } else if node.reverse {
                Some(t + 1)
            } else {
                Some(t - 1)
            };
            let gates = node.gates.row(t);
            let c = node.cells.row(t);
            let c_prev = prev.map(|p| node.cells.row(p)).unwrap_or(zero.view());
            let mut dz_row = dz.row_mut(t);
            for j in 0..hidden {
                let (i_g, f_g, g_g, o_g) = (
                    gates[j],
                    gates[hidden + j],
                    gates[2 * hidden + j],
                    gates[3 * hidden + j],
                );
                let tc = c[j].tanh();
                let dh = g_out[[t, j]] + dh_next[j];
                let d_o = dh * tc;
                let dc = dh * o_g * (1.0 - tc * tc) + dc_next[j];
                let d_i = dc * g_g;
                let d_g = dc * i_g;
                let d_f = dc * c_prev[j];
                dc_next[j] = dc * f_g;
                dz_row[j] = d_i * i_g * (1.0 - i_g);
                dz_row[hidden + j] = d_f * f_g * (1.0 - f_g);
                dz_row[2 * hidden + j] = d_g * (1.0 - g_g * g_g);
                dz_row[3 * hidden + j] = d_o * o_g * (1.0 - o_g);
            }
            let dz_t = dz.row(t);
            if let Some(p) = prev {
                // h_prev = o * tanh(c) of the previous step
                let gp = node.gates.row(p);
                let h_prev: Array1<f64> = (0..hidden)
                    .map(|j| gp[3 * hidden + j] * node.cells[[p, j]].tanh())
                    .collect();
                for a in 0..hidden {
                    let mut row = g_w_hh.row_mut(a);
                    row.scaled_add(h_prev[a], &dz_t);
                }
            }
            dh_next = w_hh.dot(&dz_t);
        }
        let gx = dz.dot(&w_ih.t());
        let g_w_ih = x.t().dot(&dz);
        let gb = dz.sum_axis(Axis(0)).insert_axis(Axis(0));
        (gx, g_w_ih, g_w_hh, gb)
    }
}
