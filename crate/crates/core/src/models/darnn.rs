//! Dual-stage attention RNN.
//!
//! Encoder, for each step `t` with previous state `(h, s)`:
//!
//! ```text
//! e_k   = ve . tanh(We [h; s] + Ue x^k + be)      k = 1..n, x^k the k-th driver over the window
//! alpha = softmax(e)
//! (h, s) = LSTM_enc(h, s, alpha * x_t)
//! ```
//!
//! Decoder, for each step `t` with previous state `(d, s')` and encoder
//! states `h_1..h_T`:
//!
//! ```text
//! l_i   = vd . tanh(Wd [d; s'] + Ud h_i + bd)
//! beta  = softmax(l),  c_t = sum_i beta_i h_i
//! y~    = wt . [y_t; c_t] + bt
//! (d, s') = LSTM_dec(d, s', y~)
//! ```
//!
//! Output: `wo . [d_T; c_T] + bo`. LSTM gates are ordered `i, f, o, g`.
//! The loss is the batch mean of squared errors on standardized targets;
//! gradients are computed by explicit backpropagation through time and
//! applied with Adam.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DarnnConfig {
    /// Window length `T`.
    pub window: usize,
    /// Number of driving series `n`.
    pub drivers: usize,
    /// Encoder hidden size `m`.
    pub encoder_hidden: usize,
    /// Decoder hidden size `p`.
    pub decoder_hidden: usize,
    pub seed: u64,
}

impl DarnnConfig {
    pub fn new(drivers: usize) -> Self {
        Self {
            window: 7,
            drivers,
            encoder_hidden: 32,
            decoder_hidden: 32,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Seeds mini-batch shuffling.
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 100,
            learning_rate: 1e-3,
            batch_size: 32,
            seed: 0,
        }
    }
}

/// One training or inference example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DarnnSample {
    /// `T` rows of `n` driver values, oldest first.
    pub drivers: Vec<Vec<f64>>,
    /// `T` target-history values, oldest first.
    pub history: Vec<f64>,
    pub label: f64,
}

/// Row-major matrix (vectors are `rows x 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    fn uniform(rows: usize, cols: usize, bound: f64, rng: &mut ChaCha8Rng) -> Self {
        Self {
            rows,
            cols,
            data: (0..rows * cols)
                .map(|_| rng.gen_range(-bound..bound))
                .collect(),
        }
    }

    fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        self.data.chunks(self.cols).map(|row| dot(row, x)).collect()
    }

    /// `self' y`.
    fn matvec_t(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (row, yi) in self.data.chunks(self.cols).zip(y) {
            if *yi != 0.0 {
                out.iter_mut().zip(row).for_each(|(o, w)| *o += w * yi);
            }
        }
        out
    }

    /// `self += a b'`.
    fn add_outer(&mut self, a: &[f64], b: &[f64]) {
        for (row, ai) in self.data.chunks_mut(self.cols).zip(a) {
            if *ai != 0.0 {
                row.iter_mut().zip(b).for_each(|(r, bj)| *r += ai * bj);
            }
        }
    }

    fn add_vec(&mut self, v: &[f64]) {
        self.data.iter_mut().zip(v).for_each(|(d, x)| *d += x);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn softmax(e: &[f64]) -> Vec<f64> {
    let max = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = e.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|v| v / sum).collect()
}

/// `dz = a * (g - a.g)`, the softmax vector-Jacobian product.
fn softmax_back(a: &[f64], g: &[f64]) -> Vec<f64> {
    let s = dot(a, g);
    a.iter().zip(g).map(|(ai, gi)| ai * (gi - s)).collect()
}

/// All trainable tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DarnnParams {
    /// Input attention: `T x 2m`.
    pub we: Tensor,
    /// Input attention: `T x T`.
    pub ue: Tensor,
    pub be: Tensor,
    pub ve: Tensor,
    /// Encoder LSTM: `4m x (m + n)`.
    pub w_enc: Tensor,
    pub b_enc: Tensor,
    /// Temporal attention: `m x 2p`.
    pub wd: Tensor,
    /// Temporal attention: `m x m`.
    pub ud: Tensor,
    pub bd: Tensor,
    pub vd: Tensor,
    /// Decoder input map over `[y; c]`: `(m + 1)`.
    pub wt: Tensor,
    pub bt: Tensor,
    /// Decoder LSTM: `4p x (p + 1)`.
    pub w_dec: Tensor,
    pub b_dec: Tensor,
    /// Output map over `[d; c]`: `(p + m)`.
    pub wo: Tensor,
    pub bo: Tensor,
}

pub const PARAM_NAMES: [&str; 16] = [
    "we", "ue", "be", "ve", "w_enc", "b_enc", "wd", "ud", "bd", "vd", "wt", "bt", "w_dec", "b_dec",
    "wo", "bo",
];

impl DarnnParams {
    fn init(cfg: &DarnnConfig) -> Self {
        let (t, n, m, p) = (
            cfg.window,
            cfg.drivers,
            cfg.encoder_hidden,
            cfg.decoder_hidden,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let r = |fan: usize| 1.0 / (fan as f64).sqrt();
        let mut b_enc = Tensor::zeros(4 * m, 1);
        b_enc.data[m..2 * m].fill(1.0);
        let mut b_dec = Tensor::zeros(4 * p, 1);
        b_dec.data[p..2 * p].fill(1.0);
        Self {
            we: Tensor::uniform(t, 2 * m, r(2 * m), &mut rng),
            ue: Tensor::uniform(t, t, r(t), &mut rng),
            be: Tensor::zeros(t, 1),
            ve: Tensor::uniform(t, 1, r(t), &mut rng),
            w_enc: Tensor::uniform(4 * m, m + n, r(m + n), &mut rng),
            b_enc,
            wd: Tensor::uniform(m, 2 * p, r(2 * p), &mut rng),
            ud: Tensor::uniform(m, m, r(m), &mut rng),
            bd: Tensor::zeros(m, 1),
            vd: Tensor::uniform(m, 1, r(m), &mut rng),
            wt: Tensor::uniform(m + 1, 1, r(m + 1), &mut rng),
            bt: Tensor::zeros(1, 1),
            w_dec: Tensor::uniform(4 * p, p + 1, r(p + 1), &mut rng),
            b_dec,
            wo: Tensor::uniform(p + m, 1, r(p + m), &mut rng),
            bo: Tensor::zeros(1, 1),
        }
    }

    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.tensors_mut().into_iter().for_each(|t| t.data.fill(0.0));
        z
    }

    /// Tensors in [`PARAM_NAMES`] order.
    pub fn tensors(&self) -> [&Tensor; 16] {
        [
            &self.we,
            &self.ue,
            &self.be,
            &self.ve,
            &self.w_enc,
            &self.b_enc,
            &self.wd,
            &self.ud,
            &self.bd,
            &self.vd,
            &self.wt,
            &self.bt,
            &self.w_dec,
            &self.b_dec,
            &self.wo,
            &self.bo,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 16] {
        [
            &mut self.we,
            &mut self.ue,
            &mut self.be,
            &mut self.ve,
            &mut self.w_enc,
            &mut self.b_enc,
            &mut self.wd,
            &mut self.ud,
            &mut self.bd,
            &mut self.vd,
            &mut self.wt,
            &mut self.bt,
            &mut self.w_dec,
            &mut self.b_dec,
            &mut self.wo,
            &mut self.bo,
        ]
    }

    pub fn count(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    fn all_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.data.iter().all(|v| v.is_finite()))
    }
}

/// Affine standardization applied to history values and labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub history_shift: f64,
    pub history_scale: f64,
    pub label_shift: f64,
    pub label_scale: f64,
}

impl Default for Scaling {
    fn default() -> Self {
        Self {
            history_shift: 0.0,
            history_scale: 1.0,
            label_shift: 0.0,
            label_scale: 1.0,
        }
    }
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count().max(1) as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    (mean, if std > 1e-12 { std } else { 1.0 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionRnn {
    pub config: DarnnConfig,
    pub params: DarnnParams,
    pub scaling: Scaling,
}

struct LstmCache {
    input: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    o: Vec<f64>,
    g: Vec<f64>,
    s_prev: Vec<f64>,
    tanh_s: Vec<f64>,
}

fn lstm_forward(
    w: &Tensor,
    b: &Tensor,
    h_prev: &[f64],
    s_prev: &[f64],
    x: &[f64],
) -> (Vec<f64>, Vec<f64>, LstmCache) {
    let hdim = h_prev.len();
    let input: Vec<f64> = h_prev.iter().chain(x).copied().collect();
    let mut z = w.matvec(&input);
    z.iter_mut().zip(&b.data).for_each(|(z, b)| *z += b);
    let i: Vec<f64> = z[..hdim].iter().map(|&v| sigmoid(v)).collect();
    let f: Vec<f64> = z[hdim..2 * hdim].iter().map(|&v| sigmoid(v)).collect();
    let o: Vec<f64> = z[2 * hdim..3 * hdim].iter().map(|&v| sigmoid(v)).collect();
    let g: Vec<f64> = z[3 * hdim..].iter().map(|&v| v.tanh()).collect();
    let s: Vec<f64> = (0..hdim).map(|j| f[j] * s_prev[j] + i[j] * g[j]).collect();
    let tanh_s: Vec<f64> = s.iter().map(|v| v.tanh()).collect();
    let h: Vec<f64> = (0..hdim).map(|j| o[j] * tanh_s[j]).collect();
    let cache = LstmCache {
        input,
        i,
        f,
        o,
        g,
        s_prev: s_prev.to_vec(),
        tanh_s,
    };
    (h, s, cache)
}

/// Returns `(dh_prev, ds_prev, dx)` and accumulates weight gradients.
fn lstm_backward(
    w: &Tensor,
    c: &LstmCache,
    dh: &[f64],
    ds: &[f64],
    dw: &mut Tensor,
    db: &mut Tensor,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let hdim = dh.len();
    let mut dz = vec![0.0; 4 * hdim];
    let mut ds_prev = vec![0.0; hdim];
    for j in 0..hdim {
        let ds_total = ds[j] + dh[j] * c.o[j] * (1.0 - c.tanh_s[j] * c.tanh_s[j]);
        let d_o = dh[j] * c.tanh_s[j];
        let d_i = ds_total * c.g[j];
        let d_g = ds_total * c.i[j];
        let d_f = ds_total * c.s_prev[j];
        ds_prev[j] = ds_total * c.f[j];
        dz[j] = d_i * c.i[j] * (1.0 - c.i[j]);
        dz[hdim + j] = d_f * c.f[j] * (1.0 - c.f[j]);
        dz[2 * hdim + j] = d_o * c.o[j] * (1.0 - c.o[j]);
        dz[3 * hdim + j] = d_g * (1.0 - c.g[j] * c.g[j]);
    }
    dw.add_outer(&dz, &c.input);
    db.add_vec(&dz);
    let mut dinput = w.matvec_t(&dz);
    let dx = dinput.split_off(hdim);
    (dinput, ds_prev, dx)
}

struct EncStep {
    hs: Vec<f64>,
    z: Vec<Vec<f64>>,
    alpha: Vec<f64>,
    lstm: LstmCache,
}

struct DecStep {
    ds: Vec<f64>,
    z: Vec<Vec<f64>>,
    beta: Vec<f64>,
    yc: Vec<f64>,
    lstm: LstmCache,
}

struct Forward {
    output: f64,
    /// Driver columns `x^k` (length `T` each).
    columns: Vec<Vec<f64>>,
    enc_h: Vec<Vec<f64>>,
    enc: Vec<EncStep>,
    dec: Vec<DecStep>,
    final_d: Vec<f64>,
    final_c: Vec<f64>,
}

impl AttentionRnn {
    pub fn new(config: DarnnConfig) -> Result<Self, ModelError> {
        if config.drivers == 0 {
            return Err(ModelError::Config(
                "the attention RNN needs at least one driving series".into(),
            ));
        }
        if config.window == 0 || config.encoder_hidden == 0 || config.decoder_hidden == 0 {
            return Err(ModelError::Config(
                "window and hidden sizes must be positive".into(),
            ));
        }
        Ok(Self {
            params: DarnnParams::init(&config),
            config,
            scaling: Scaling::default(),
        })
    }

    fn check_sample(&self, drivers: &[Vec<f64>], history: &[f64]) -> Result<(), ModelError> {
        let (t, n) = (self.config.window, self.config.drivers);
        if drivers.len() != t || history.len() != t || drivers.iter().any(|r| r.len() != n) {
            return Err(ModelError::Shape(format!(
                "expected {t}x{n} drivers and {t} history values, got {}x{} and {}",
                drivers.len(),
                drivers.first().map_or(0, Vec::len),
                history.len()
            )));
        }
        if drivers
            .iter()
            .flatten()
            .chain(history)
            .any(|v| !v.is_finite())
        {
            return Err(ModelError::NonFinite("model input".into()));
        }
        Ok(())
    }

    fn forward(&self, drivers: &[Vec<f64>], history: &[f64]) -> Forward {
        let p = &self.params;
        let (t_len, n, m, pd) = (
            self.config.window,
            self.config.drivers,
            self.config.encoder_hidden,
            self.config.decoder_hidden,
        );
        let columns: Vec<Vec<f64>> = (0..n)
            .map(|k| drivers.iter().map(|row| row[k]).collect())
            .collect();
        let u: Vec<Vec<f64>> = columns.iter().map(|col| p.ue.matvec(col)).collect();

        let mut h = vec![0.0; m];
        let mut s = vec![0.0; m];
        let mut enc = Vec::with_capacity(t_len);
        let mut enc_h = Vec::with_capacity(t_len);
        for row in drivers {
            let hs: Vec<f64> = h.iter().chain(&s).copied().collect();
            let a = p.we.matvec(&hs);
            let z: Vec<Vec<f64>> = u
                .iter()
                .map(|uk| {
                    (0..t_len)
                        .map(|j| (a[j] + uk[j] + p.be.data[j]).tanh())
                        .collect()
                })
                .collect();
            let e: Vec<f64> = z.iter().map(|zk| dot(&p.ve.data, zk)).collect();
            let alpha = softmax(&e);
            let xt: Vec<f64> = alpha.iter().zip(row).map(|(a, x)| a * x).collect();
            let (h_new, s_new, lstm) = lstm_forward(&p.w_enc, &p.b_enc, &h, &s, &xt);
            enc.push(EncStep { hs, z, alpha, lstm });
            enc_h.push(h_new.clone());
            h = h_new;
            s = s_new;
        }

        let q: Vec<Vec<f64>> = enc_h.iter().map(|hi| p.ud.matvec(hi)).collect();
        let mut d = vec![0.0; pd];
        let mut sd = vec![0.0; pd];
        let mut dec = Vec::with_capacity(t_len);
        let mut c = vec![0.0; m];
        for &y in history {
            let ds: Vec<f64> = d.iter().chain(&sd).copied().collect();
            let b = p.wd.matvec(&ds);
            let z: Vec<Vec<f64>> = q
                .iter()
                .map(|qi| {
                    (0..m)
                        .map(|j| (b[j] + qi[j] + p.bd.data[j]).tanh())
                        .collect()
                })
                .collect();
            let l: Vec<f64> = z.iter().map(|zi| dot(&p.vd.data, zi)).collect();
            let beta = softmax(&l);
            c = vec![0.0; m];
            for (bi, hi) in beta.iter().zip(&enc_h) {
                c.iter_mut().zip(hi).for_each(|(cj, hj)| *cj += bi * hj);
            }
            let yc: Vec<f64> = std::iter::once(y).chain(c.iter().copied()).collect();
            let y_tilde = dot(&p.wt.data, &yc) + p.bt.data[0];
            let (d_new, s_new, lstm) = lstm_forward(&p.w_dec, &p.b_dec, &d, &sd, &[y_tilde]);
            dec.push(DecStep {
                ds,
                z,
                beta,
                yc,
                lstm,
            });
            d = d_new;
            sd = s_new;
        }
        let dc: Vec<f64> = d.iter().chain(&c).copied().collect();
        let output = dot(&p.wo.data, &dc) + p.bo.data[0];
        Forward {
            output,
            columns,
            enc_h,
            enc,
            dec,
            final_d: d,
            final_c: c,
        }
    }

    /// Accumulates `d_output * d(output)/d(params)` into `grad`.
    fn backward(&self, fw: &Forward, d_out: f64, grad: &mut DarnnParams) {
        let p = &self.params;
        let (t_len, m, pd) = (
            self.config.window,
            self.config.encoder_hidden,
            self.config.decoder_hidden,
        );
        let dc_final: Vec<f64> = fw.final_d.iter().chain(&fw.final_c).copied().collect();
        grad.wo
            .data
            .iter_mut()
            .zip(&dc_final)
            .for_each(|(g, v)| *g += d_out * v);
        grad.bo.data[0] += d_out;

        let mut dd: Vec<f64> = p.wo.data[..pd].iter().map(|w| d_out * w).collect();
        let mut dsd = vec![0.0; pd];
        let mut dh_enc = vec![vec![0.0; m]; t_len];
        for t in (0..t_len).rev() {
            let step = &fw.dec[t];
            let (dd_prev, dsd_prev, dx) = lstm_backward(
                &p.w_dec,
                &step.lstm,
                &dd,
                &dsd,
                &mut grad.w_dec,
                &mut grad.b_dec,
            );
            let dy = dx[0];
            grad.wt
                .data
                .iter_mut()
                .zip(&step.yc)
                .for_each(|(g, v)| *g += dy * v);
            grad.bt.data[0] += dy;
            let mut dc: Vec<f64> = p.wt.data[1..].iter().map(|w| dy * w).collect();
            if t == t_len - 1 {
                dc.iter_mut()
                    .zip(&p.wo.data[pd..])
                    .for_each(|(g, w)| *g += d_out * w);
            }
            let mut dbeta = vec![0.0; t_len];
            for i in 0..t_len {
                dbeta[i] = dot(&fw.enc_h[i], &dc);
                let bi = step.beta[i];
                dh_enc[i]
                    .iter_mut()
                    .zip(&dc)
                    .for_each(|(g, v)| *g += bi * v);
            }
            let dl = softmax_back(&step.beta, &dbeta);
            let mut db_vec = vec![0.0; m];
            for i in 0..t_len {
                let zi = &step.z[i];
                grad.vd
                    .data
                    .iter_mut()
                    .zip(zi)
                    .for_each(|(g, z)| *g += dl[i] * z);
                let du: Vec<f64> = (0..m)
                    .map(|j| dl[i] * p.vd.data[j] * (1.0 - zi[j] * zi[j]))
                    .collect();
                db_vec.iter_mut().zip(&du).for_each(|(a, b)| *a += b);
                grad.ud.add_outer(&du, &fw.enc_h[i]);
                let dh = p.ud.matvec_t(&du);
                dh_enc[i].iter_mut().zip(&dh).for_each(|(a, b)| *a += b);
            }
            grad.bd.add_vec(&db_vec);
            grad.wd.add_outer(&db_vec, &step.ds);
            let dds = p.wd.matvec_t(&db_vec);
            dd = dd_prev.iter().zip(&dds[..pd]).map(|(a, b)| a + b).collect();
            dsd = dsd_prev
                .iter()
                .zip(&dds[pd..])
                .map(|(a, b)| a + b)
                .collect();
        }

        let mut dh = vec![0.0; m];
        let mut ds = vec![0.0; m];
        for t in (0..t_len).rev() {
            let step = &fw.enc[t];
            let dh_total: Vec<f64> = dh.iter().zip(&dh_enc[t]).map(|(a, b)| a + b).collect();
            let (dh_prev, ds_prev, dxt) = lstm_backward(
                &p.w_enc,
                &step.lstm,
                &dh_total,
                &ds,
                &mut grad.w_enc,
                &mut grad.b_enc,
            );
            let dalpha: Vec<f64> = dxt
                .iter()
                .zip(&fw.columns)
                .map(|(g, col)| g * col[t])
                .collect();
            let de = softmax_back(&step.alpha, &dalpha);
            let mut da = vec![0.0; t_len];
            for (k, zk) in step.z.iter().enumerate() {
                grad.ve
                    .data
                    .iter_mut()
                    .zip(zk)
                    .for_each(|(g, z)| *g += de[k] * z);
                let dpre: Vec<f64> = (0..t_len)
                    .map(|j| de[k] * p.ve.data[j] * (1.0 - zk[j] * zk[j]))
                    .collect();
                da.iter_mut().zip(&dpre).for_each(|(a, b)| *a += b);
                grad.ue.add_outer(&dpre, &fw.columns[k]);
            }
            grad.be.add_vec(&da);
            grad.we.add_outer(&da, &step.hs);
            let dhs = p.we.matvec_t(&da);
            dh = dh_prev.iter().zip(&dhs[..m]).map(|(a, b)| a + b).collect();
            ds = ds_prev.iter().zip(&dhs[m..]).map(|(a, b)| a + b).collect();
        }
    }

    fn scaled_history(&self, history: &[f64]) -> Vec<f64> {
        history
            .iter()
            .map(|v| (v - self.scaling.history_shift) / self.scaling.history_scale)
            .collect()
    }

    fn scaled_label(&self, label: f64) -> f64 {
        (label - self.scaling.label_shift) / self.scaling.label_scale
    }

    pub fn predict(&self, drivers: &[Vec<f64>], history: &[f64]) -> Result<f64, ModelError> {
        self.check_sample(drivers, history)?;
        let out = self.forward(drivers, &self.scaled_history(history)).output;
        Ok(out * self.scaling.label_scale + self.scaling.label_shift)
    }

    /// Input-attention weights (`T` rows over `n` drivers) and
    /// temporal-attention weights (`T` rows over `T` encoder states).
    pub fn attention(
        &self,
        drivers: &[Vec<f64>],
        history: &[f64],
    ) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>), ModelError> {
        self.check_sample(drivers, history)?;
        let fw = self.forward(drivers, &self.scaled_history(history));
        Ok((
            fw.enc.into_iter().map(|s| s.alpha).collect(),
            fw.dec.into_iter().map(|s| s.beta).collect(),
        ))
    }

    /// Mean squared error on standardized labels.
    pub fn loss(&self, batch: &[DarnnSample]) -> f64 {
        let b = batch.len() as f64;
        batch
            .iter()
            .map(|s| {
                let out = self
                    .forward(&s.drivers, &self.scaled_history(&s.history))
                    .output;
                (out - self.scaled_label(s.label)).powi(2)
            })
            .sum::<f64>()
            / b
    }

    /// [`Self::loss`] and its gradient with respect to every parameter.
    pub fn loss_and_gradient(&self, batch: &[DarnnSample]) -> (f64, DarnnParams) {
        let b = batch.len() as f64;
        let mut grad = self.params.zeros_like();
        let mut loss = 0.0;
        for s in batch {
            let fw = self.forward(&s.drivers, &self.scaled_history(&s.history));
            let err = fw.output - self.scaled_label(s.label);
            loss += err * err / b;
            self.backward(&fw, 2.0 * err / b, &mut grad);
        }
        (loss, grad)
    }

    /// Mean squared error in label units.
    pub fn mse(&self, samples: &[DarnnSample]) -> f64 {
        self.loss(samples) * self.scaling.label_scale.powi(2)
    }
}

struct Adam {
    m: DarnnParams,
    v: DarnnParams,
    step: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(params: &DarnnParams) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
        }
    }

    fn update(&mut self, params: &mut DarnnParams, grad: &DarnnParams, lr: f64) {
        self.step += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.step);
        let c2 = 1.0 - Self::BETA2.powi(self.step);
        for (((p, g), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(grad.tensors())
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut())
        {
            for j in 0..p.data.len() {
                let gj = g.data[j];
                m.data[j] = Self::BETA1 * m.data[j] + (1.0 - Self::BETA1) * gj;
                v.data[j] = Self::BETA2 * v.data[j] + (1.0 - Self::BETA2) * gj * gj;
                p.data[j] -= lr * (m.data[j] / c1) / ((v.data[j] / c2).sqrt() + Self::EPS);
            }
        }
    }
}

/// Trains with Adam on shuffled mini-batches. Standardization statistics
/// for history values and labels are taken from `samples`. Returns the
/// trained model and the training MSE (label units) after each epoch.
pub fn train_darnn(
    mut model: AttentionRnn,
    samples: &[DarnnSample],
    opts: &TrainOptions,
) -> Result<(AttentionRnn, Vec<f64>), ModelError> {
    if samples.is_empty() {
        return Err(ModelError::Shape("no training samples".into()));
    }
    if opts.epochs == 0 || opts.batch_size == 0 || !(opts.learning_rate > 0.0) {
        return Err(ModelError::Config(
            "epochs, batch size and learning rate must be positive".into(),
        ));
    }
    for s in samples {
        model.check_sample(&s.drivers, &s.history)?;
        if !s.label.is_finite() {
            return Err(ModelError::NonFinite("training labels".into()));
        }
    }
    let (hs, hsc) = mean_std(samples.iter().flat_map(|s| s.history.iter().copied()));
    let (ls, lsc) = mean_std(samples.iter().map(|s| s.label));
    model.scaling = Scaling {
        history_shift: hs,
        history_scale: hsc,
        label_shift: ls,
        label_scale: lsc,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut adam = Adam::new(&model.params);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut history = Vec::with_capacity(opts.epochs);
    let mut batch = Vec::with_capacity(opts.batch_size);
    for epoch in 1..=opts.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(opts.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| samples[i].clone()));
            let (loss, grad) = model.loss_and_gradient(&batch);
            if !loss.is_finite() {
                return Err(ModelError::Diverged { epoch, loss });
            }
            adam.update(&mut model.params, &grad, opts.learning_rate);
            if !model.params.all_finite() {
                return Err(ModelError::Diverged {
                    epoch,
                    loss: f64::NAN,
                });
            }
        }
        let mse = model.mse(samples);
        if !mse.is_finite() {
            return Err(ModelError::Diverged { epoch, loss: mse });
        }
        history.push(mse);
    }
    Ok((model, history))
}

/// Largest relative error between the analytic gradient and central
/// finite differences with the given step, over every parameter. The
/// relative error of one entry is `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn gradient_check(model: &AttentionRnn, batch: &[DarnnSample], step: f64) -> f64 {
    let (_, analytic) = model.loss_and_gradient(batch);
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for (ti, tensor) in analytic.tensors().into_iter().enumerate() {
        for j in 0..tensor.data.len() {
            let original = probe.params.tensors()[ti].data[j];
            probe.params.tensors_mut()[ti].data[j] = original + step;
            let plus = probe.loss(batch);
            probe.params.tensors_mut()[ti].data[j] = original - step;
            let minus = probe.loss(batch);
            probe.params.tensors_mut()[ti].data[j] = original;
            let numeric = (plus - minus) / (2.0 * step);
            let a = tensor.data[j];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    worst
}
