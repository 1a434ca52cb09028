//! Two-layer LSTM encoder with a direct multi-step affine head.
//!
//! Gate blocks in every `4H`-row weight matrix and bias are stacked in the
//! order input, forget, cell, output (`"ifgo"`). Per step:
//!
//! ```text
//! z  = W_ih·x_t + W_hh·h_{t-1} + b
//! i, f, o = σ(z_i), σ(z_f), σ(z_o);   g = tanh(z_g)
//! c_t = f⊙c_{t-1} + i⊙g
//! h_t = o⊙tanh(c_t)
//! ```
//!
//! The second layer reads the first layer's hidden sequence; the head maps the
//! second layer's final hidden state to all [`HORIZON`] outputs at once.
//! Initial hidden and cell states are zero.

use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::{NormStats, WrenchSample, HORIZON, WRENCH_CHANNELS};
use crate::error::{contract, Result};
use crate::numerics::{accumulate_rows, axpy, sigmoid, tanh, Matrix, Rng};

pub const GATE_ORDER: &str = "ifgo";
pub const DEFAULT_HIDDEN: usize = 40;
pub const LAYERS: usize = 2;

/// Weights of one LSTM layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayerParams {
    /// `4H × D_in`
    pub w_ih: Matrix,
    /// `4H × H`
    pub w_hh: Matrix,
    /// `4H`
    pub b: Vec<f64>,
}

impl LstmLayerParams {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        LstmLayerParams {
            w_ih: Matrix::zeros(4 * hidden, input_dim),
            w_hh: Matrix::zeros(4 * hidden, hidden),
            b: vec![0.0; 4 * hidden],
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_hh.cols()
    }

    pub fn input_dim(&self) -> usize {
        self.w_ih.cols()
    }

    fn check(&self, input_dim: usize, hidden: usize, name: &str) -> Result<()> {
        if self.w_ih.shape() != (4 * hidden, input_dim)
            || self.w_hh.shape() != (4 * hidden, hidden)
            || self.b.len() != 4 * hidden
        {
            return Err(contract(alloc::format!(
                "{name}: expected w_ih {}x{input_dim}, w_hh {}x{hidden}, b {}; got {:?}, {:?}, {}",
                4 * hidden,
                4 * hidden,
                4 * hidden,
                self.w_ih.shape(),
                self.w_hh.shape(),
                self.b.len()
            )));
        }
        Ok(())
    }

    fn slices(&self) -> [&[f64]; 3] {
        [self.w_ih.as_slice(), self.w_hh.as_slice(), &self.b]
    }

    fn slices_mut(&mut self) -> [&mut [f64]; 3] {
        [self.w_ih.as_mut_slice(), self.w_hh.as_mut_slice(), &mut self.b]
    }
}

/// Everything needed to turn a raw wrench window into a grip forecast.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub layer1: LstmLayerParams,
    pub layer2: LstmLayerParams,
    /// `HORIZON × H`
    pub head_w: Matrix,
    pub head_b: Vec<f64>,
    pub norm: NormStats,
}

/// Gradient of the loss with respect to every trainable weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layer1: LstmLayerParams,
    pub layer2: LstmLayerParams,
    pub head_w: Matrix,
    pub head_b: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(hidden: usize) -> Self {
        ModelParams {
            layer1: LstmLayerParams::zeros(WRENCH_CHANNELS, hidden),
            layer2: LstmLayerParams::zeros(hidden, hidden),
            head_w: Matrix::zeros(HORIZON, hidden),
            head_b: vec![0.0; HORIZON],
            norm: NormStats::identity(),
        }
    }

    pub fn hidden(&self) -> usize {
        self.layer1.hidden()
    }

    pub fn horizon(&self) -> usize {
        self.head_b.len()
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.hidden();
        if h == 0 {
            return Err(contract("hidden size must be at least 1"));
        }
        self.layer1.check(WRENCH_CHANNELS, h, "layer1")?;
        self.layer2.check(h, h, "layer2")?;
        if self.head_w.shape() != (HORIZON, h) || self.head_b.len() != HORIZON {
            return Err(contract(alloc::format!(
                "head: expected {HORIZON}x{h} and {HORIZON}, got {:?} and {}",
                self.head_w.shape(),
                self.head_b.len()
            )));
        }
        if !self.slices().iter().all(|s| s.iter().all(|v| v.is_finite())) {
            return Err(contract("parameters contain non-finite values"));
        }
        self.norm.validate()
    }

    /// Trainable tensors in a fixed order shared with [`Gradients`].
    pub fn slices(&self) -> [&[f64]; 8] {
        let [a, b, c] = self.layer1.slices();
        let [d, e, f] = self.layer2.slices();
        [a, b, c, d, e, f, self.head_w.as_slice(), &self.head_b]
    }

    pub fn slices_mut(&mut self) -> [&mut [f64]; 8] {
        let [a, b, c] = self.layer1.slices_mut();
        let [d, e, f] = self.layer2.slices_mut();
        [a, b, c, d, e, f, self.head_w.as_mut_slice(), &mut self.head_b]
    }

    pub fn param_count(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }
}

impl Gradients {
    pub fn zeros_like(p: &ModelParams) -> Self {
        let h = p.hidden();
        Gradients {
            layer1: LstmLayerParams::zeros(p.layer1.input_dim(), h),
            layer2: LstmLayerParams::zeros(h, h),
            head_w: Matrix::zeros(p.head_w.rows(), h),
            head_b: vec![0.0; p.head_b.len()],
        }
    }

    pub fn slices(&self) -> [&[f64]; 8] {
        let [a, b, c] = self.layer1.slices();
        let [d, e, f] = self.layer2.slices();
        [a, b, c, d, e, f, self.head_w.as_slice(), &self.head_b]
    }

    pub fn slices_mut(&mut self) -> [&mut [f64]; 8] {
        let [a, b, c] = self.layer1.slices_mut();
        let [d, e, f] = self.layer2.slices_mut();
        [a, b, c, d, e, f, self.head_w.as_mut_slice(), &mut self.head_b]
    }

    pub fn scale(&mut self, s: f64) {
        for t in self.slices_mut() {
            t.iter_mut().for_each(|v| *v *= s);
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (dst, src) in self.slices_mut().into_iter().zip(other.slices()) {
            axpy(1.0, src, dst);
        }
    }

    pub fn l2_norm(&self) -> f64 {
        let sq: f64 = self
            .slices()
            .iter()
            .flat_map(|s| s.iter())
            .map(|v| v * v)
            .sum();
        libm::sqrt(sq)
    }

    /// Shape signature used to check congruence with a parameter set.
    pub fn shapes(&self) -> [usize; 8] {
        self.slices().map(|s| s.len())
    }
}

/// Uniform `(-1/√H, 1/√H)` weights, forget-gate bias `+1`, other biases `0`.
pub fn init_params(seed: u64, hidden: usize) -> Result<ModelParams> {
    if hidden == 0 {
        return Err(contract("hidden size must be at least 1"));
    }
    let mut rng = Rng::new(seed);
    let bound = 1.0 / libm::sqrt(hidden as f64);
    let mut p = ModelParams::zeros(hidden);
    for layer in [&mut p.layer1, &mut p.layer2] {
        for w in [&mut layer.w_ih, &mut layer.w_hh] {
            w.as_mut_slice()
                .iter_mut()
                .for_each(|v| *v = rng.uniform(-bound, bound));
        }
        layer.b[hidden..2 * hidden].iter_mut().for_each(|v| *v = 1.0);
    }
    p.head_w
        .as_mut_slice()
        .iter_mut()
        .for_each(|v| *v = rng.uniform(-bound, bound));
    Ok(p)
}

/// Values kept from one cell step for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct CellCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    /// Activated gates `[i, f, g, o]`, `4H`.
    pub gates: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

/// Gate weights stored input-major (`D_in × 4H` and `H × 4H`) so a gate
/// pre-activation is a run of contiguous row updates.
struct GateKernel {
    w_ih_t: Matrix,
    w_hh_t: Matrix,
}

impl GateKernel {
    fn new(p: &LstmLayerParams) -> Self {
        let t = |m: &Matrix| Matrix::from_fn(m.cols(), m.rows(), |r, c| m.get(c, r));
        GateKernel {
            w_ih_t: t(&p.w_ih),
            w_hh_t: t(&p.w_hh),
        }
    }

    /// `gates = b + W_ih·x + W_hh·h_prev`, then activations in place.
    #[inline]
    fn gates(&self, b: &[f64], x: &[f64], h_prev: &[f64], gates: &mut [f64]) {
        gates.copy_from_slice(b);
        accumulate_rows(gates, x, self.w_ih_t.as_slice());
        accumulate_rows(gates, h_prev, self.w_hh_t.as_slice());
        let h = h_prev.len();
        let (sig_a, rest) = gates.split_at_mut(2 * h);
        let (tanh_g, sig_o) = rest.split_at_mut(h);
        sig_a.iter_mut().chain(sig_o.iter_mut()).for_each(|z| *z = sigmoid(*z));
        tanh_g.iter_mut().for_each(|z| *z = tanh(*z));
    }
}

/// Cell and hidden update from activated gates.
#[inline]
fn update_state(gates: &[f64], c_prev: &[f64], c: &mut [f64], h: &mut [f64], tanh_c: &mut [f64]) {
    let n = c.len();
    let (i, rest) = gates.split_at(n);
    let (f, rest) = rest.split_at(n);
    let (g, o) = rest.split_at(n);
    for k in 0..n {
        c[k] = f[k] * c_prev[k] + i[k] * g[k];
        tanh_c[k] = tanh(c[k]);
        h[k] = o[k] * tanh_c[k];
    }
}

/// One LSTM step. Returns `(h_t, c_t, cache)`.
pub fn cell_forward(
    x_t: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    p: &LstmLayerParams,
) -> Result<(Vec<f64>, Vec<f64>, CellCache)> {
    let hd = p.hidden();
    if x_t.len() != p.input_dim() || h_prev.len() != hd || c_prev.len() != hd {
        return Err(contract("cell_forward: state or input length does not match layer"));
    }
    let mut gates = vec![0.0; 4 * hd];
    GateKernel::new(p).gates(&p.b, x_t, h_prev, &mut gates);
    let (mut c, mut h, mut tanh_c) = (vec![0.0; hd], vec![0.0; hd], vec![0.0; hd]);
    update_state(&gates, c_prev, &mut c, &mut h, &mut tanh_c);
    let cache = CellCache {
        x: x_t.to_vec(),
        h_prev: h_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        gates,
        tanh_c,
    };
    Ok((h, c, cache))
}

/// Per-step state of one layer over a whole sequence. `h` and `c` carry an
/// extra leading row for the zero initial state.
#[derive(Debug, Clone)]
pub struct LayerTrace {
    hidden: usize,
    steps: usize,
    gates: Vec<f64>,
    h: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
}

impl LayerTrace {
    fn run(p: &LstmLayerParams, inputs: &[f64], steps: usize) -> Self {
        let hd = p.hidden();
        let d = p.input_dim();
        let mut tr = LayerTrace {
            hidden: hd,
            steps,
            gates: vec![0.0; steps * 4 * hd],
            h: vec![0.0; (steps + 1) * hd],
            c: vec![0.0; (steps + 1) * hd],
            tanh_c: vec![0.0; steps * hd],
        };
        let kernel = GateKernel::new(p);
        for t in 0..steps {
            let x = &inputs[t * d..(t + 1) * d];
            let gates = &mut tr.gates[t * 4 * hd..(t + 1) * 4 * hd];
            let (h_prev, h_next) = tr.h.split_at_mut((t + 1) * hd);
            kernel.gates(&p.b, x, &h_prev[t * hd..], gates);
            let (c_prev, c_next) = tr.c.split_at_mut((t + 1) * hd);
            update_state(
                gates,
                &c_prev[t * hd..],
                &mut c_next[..hd],
                &mut h_next[..hd],
                &mut tr.tanh_c[t * hd..(t + 1) * hd],
            );
        }
        tr
    }

    /// Hidden outputs for steps `1..=T`, `T × H` row-major.
    pub fn outputs(&self) -> &[f64] {
        &self.h[self.hidden..]
    }

    pub fn final_hidden(&self) -> &[f64] {
        &self.h[self.steps * self.hidden..]
    }

    pub fn final_cell(&self) -> &[f64] {
        &self.c[self.steps * self.hidden..]
    }

    /// Backpropagates `dh_ext` (`T × H`, gradient arriving at each output)
    /// through the layer. Weight gradients are added into `grad`; if `dx` is
    /// given, the gradient w.r.t. the inputs is added there.
    fn backward(
        &self,
        p: &LstmLayerParams,
        inputs: &[f64],
        dh_ext: &[f64],
        grad: &mut LstmLayerParams,
        mut dx: Option<&mut [f64]>,
    ) {
        let hd = self.hidden;
        let g4 = 4 * hd;
        let d = p.input_dim();
        let steps = self.steps;
        let mut dh = vec![0.0; hd];
        let mut dh_rec = vec![0.0; hd];
        let mut dc_next = vec![0.0; hd];
        // gate pre-activation gradients, stored gate-major (4H × T) for the
        // weight update below
        let mut dz_all = vec![0.0; g4 * steps];
        let mut dz = vec![0.0; g4];
        for t in (0..steps).rev() {
            let gates = &self.gates[t * g4..(t + 1) * g4];
            let tanh_c = &self.tanh_c[t * hd..(t + 1) * hd];
            let c_prev = &self.c[t * hd..(t + 1) * hd];
            for k in 0..hd {
                dh[k] = dh_ext[t * hd + k] + dh_rec[k];
            }
            let (dzi, rest) = dz.split_at_mut(hd);
            let (dzf, rest) = rest.split_at_mut(hd);
            let (dzg, dzo) = rest.split_at_mut(hd);
            for k in 0..hd {
                let (i, f, g, o) = (gates[k], gates[hd + k], gates[2 * hd + k], gates[3 * hd + k]);
                let tc = tanh_c[k];
                let dc = dc_next[k] + dh[k] * o * (1.0 - tc * tc);
                dzo[k] = dh[k] * tc * o * (1.0 - o);
                dzi[k] = dc * g * i * (1.0 - i);
                dzf[k] = dc * c_prev[k] * f * (1.0 - f);
                dzg[k] = dc * i * (1.0 - g * g);
                dc_next[k] = dc * f;
            }
            for (r, &v) in dz.iter().enumerate() {
                dz_all[r * steps + t] = v;
            }
            if let Some(dx) = dx.as_deref_mut() {
                accumulate_rows(&mut dx[t * d..(t + 1) * d], &dz, p.w_ih.as_slice());
            }
            dh_rec.iter_mut().for_each(|v| *v = 0.0);
            accumulate_rows(&mut dh_rec, &dz, p.w_hh.as_slice());
        }
        let h_prev_all = &self.h[..steps * hd];
        let x_all = &inputs[..steps * d];
        let w_ih = grad.w_ih.as_mut_slice();
        let w_hh = grad.w_hh.as_mut_slice();
        for r in 0..g4 {
            let dz_r = &dz_all[r * steps..(r + 1) * steps];
            accumulate_rows(&mut w_ih[r * d..(r + 1) * d], dz_r, x_all);
            accumulate_rows(&mut w_hh[r * hd..(r + 1) * hd], dz_r, h_prev_all);
            grad.b[r] += dz_r.iter().sum::<f64>();
        }
    }
}

/// Layer traces from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub layer1: LayerTrace,
    pub layer2: LayerTrace,
}

fn check_input(x: &[f64], p: &ModelParams) -> Result<usize> {
    let d = p.layer1.input_dim();
    if x.is_empty() || x.len() % d != 0 {
        return Err(contract(alloc::format!(
            "input must be a non-empty multiple of {d} values, got {}",
            x.len()
        )));
    }
    Ok(x.len() / d)
}

/// Runs both layers over `x` (`steps × 6`, normalized) and applies the head.
/// Returns the forecast in normalized grip units.
pub fn forward(x: &[f64], p: &ModelParams) -> Result<(Vec<f64>, ForwardCache)> {
    let steps = check_input(x, p)?;
    let layer1 = LayerTrace::run(&p.layer1, x, steps);
    let layer2 = LayerTrace::run(&p.layer2, layer1.outputs(), steps);
    let mut y = vec![0.0; p.head_w.rows()];
    p.head_w.matvec(layer2.final_hidden(), &mut y);
    axpy(1.0, &p.head_b, &mut y);
    Ok((y, ForwardCache { layer1, layer2 }))
}

/// Mean squared error over the horizon.
pub fn mse(y_hat: &[f64], y_true: &[f64]) -> f64 {
    let s: f64 = y_hat
        .iter()
        .zip(y_true)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    s / y_true.len() as f64
}

/// Adds the gradient of one sample's loss into `grads` and returns the loss.
pub fn accumulate_gradients(
    x: &[f64],
    y_true: &[f64],
    p: &ModelParams,
    grads: &mut Gradients,
) -> Result<f64> {
    if y_true.len() != p.horizon() {
        return Err(contract(alloc::format!(
            "target length {} does not match horizon {}",
            y_true.len(),
            p.horizon()
        )));
    }
    let (y_hat, cache) = forward(x, p)?;
    let steps = cache.layer1.steps;
    let hd = p.hidden();
    let n = y_true.len() as f64;
    let dy: Vec<f64> = y_hat
        .iter()
        .zip(y_true)
        .map(|(a, b)| 2.0 * (a - b) / n)
        .collect();

    grads.head_w.outer_acc(&dy, cache.layer2.final_hidden());
    axpy(1.0, &dy, &mut grads.head_b);

    let mut dh2 = vec![0.0; steps * hd];
    p.head_w.matvec_t_acc(&dy, &mut dh2[(steps - 1) * hd..]);
    let mut dh1 = vec![0.0; steps * hd];
    cache.layer2.backward(
        &p.layer2,
        cache.layer1.outputs(),
        &dh2,
        &mut grads.layer2,
        Some(&mut dh1),
    );
    cache.layer1.backward(&p.layer1, x, &dh1, &mut grads.layer1, None);
    Ok(mse(&y_hat, y_true))
}

/// Loss and exact gradient for one `(x, y)` pair via backpropagation through time.
pub fn backward(x: &[f64], y_true: &[f64], p: &ModelParams) -> Result<(f64, Gradients)> {
    let mut grads = Gradients::zeros_like(p);
    let loss = accumulate_gradients(x, y_true, p, &mut grads)?;
    Ok((loss, grads))
}

/// Mean loss and mean gradient over a batch, accumulated in slice order.
pub fn batch_gradients<'a, I>(batch: I, p: &ModelParams) -> Result<(f64, Gradients)>
where
    I: IntoIterator<Item = (&'a [f64], &'a [f64])>,
{
    let mut grads = Gradients::zeros_like(p);
    let mut loss = 0.0;
    let mut n = 0usize;
    for (x, y) in batch {
        loss += accumulate_gradients(x, y, p, &mut grads)?;
        n += 1;
    }
    if n == 0 {
        return Err(contract("empty batch"));
    }
    grads.scale(1.0 / n as f64);
    Ok((loss / n as f64, grads))
}

/// Forecast in normalized units, without keeping the cache.
pub fn forecast(x: &[f64], p: &ModelParams) -> Result<Vec<f64>> {
    forward(x, p).map(|(y, _)| y)
}

/// Raw wrench window in, grip forecast in newtons out.
pub fn predict_grip(x_raw: &[WrenchSample], p: &ModelParams) -> Result<Vec<f64>> {
    if x_raw.is_empty() {
        return Err(contract("predict_grip: empty wrench window"));
    }
    if let Some(i) = x_raw.iter().position(|w| !w.is_finite()) {
        return Err(contract(alloc::format!("predict_grip: non-finite wrench at step {i}")));
    }
    let x = p.norm.normalize_window(x_raw);
    let y = forecast(&x, p)?;
    Ok(y.into_iter().map(|z| p.norm.denormalize_grip(z)).collect())
}
