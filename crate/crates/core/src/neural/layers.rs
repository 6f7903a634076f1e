//! Layer primitives with reverse-mode gradients. Data flows as
//! `[batch, time, dim]`; vector-shaped activations use `time = 1`. Dense
//! layers apply to the last axis, so the same layer is "time-distributed"
//! when `time > 1`.

use ndarray::{s, Array1, Array2, Array3, Axis};
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Linear,
}

impl Activation {
    fn apply(&self, x: &mut Array2<f64>) {
        if matches!(self, Activation::Tanh) {
            x.mapv_inplace(f64::tanh);
        }
    }

    /// Derivative expressed through the activation output.
    fn grad_from_output(&self, y: &Array2<f64>) -> Array2<f64> {
        match self {
            Activation::Tanh => y.mapv(|v| 1.0 - v * v),
            Activation::Linear => Array2::ones(y.dim()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub act: Activation,
}

/// Gated recurrent unit. Gate weights are concatenated along the output
/// axis in the order `[update (z) | reset (r) | candidate (h)]`:
/// `wx: [d_in, 3*units]`, `wh: [units, 3*units]`, `b: [3*units]`.
///
/// Recurrence (tanh candidate, sigmoid gates):
///   z_t = sigmoid(x_t Wxz + h_{t-1} Whz + bz)
///   r_t = sigmoid(x_t Wxr + h_{t-1} Whr + br)
///   c_t = tanh(x_t Wxh + (r_t * h_{t-1}) Whh + bh)
///   h_t = z_t * h_{t-1} + (1 - z_t) * c_t
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gru {
    pub wx: Array2<f64>,
    pub wh: Array2<f64>,
    pub b: Array1<f64>,
    pub units: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Layer {
    Dense(Dense),
    Gru(Gru),
    Dropout { rate: f64 },
    TakeLast,
    Flatten,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn glorot(rng: &mut ChaCha20Rng, rows: usize, cols: usize) -> Array2<f64> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-limit..limit))
}

impl Dense {
    pub fn glorot_init(d_in: usize, d_out: usize, act: Activation, rng: &mut ChaCha20Rng) -> Self {
        Self { w: glorot(rng, d_in, d_out), b: Array1::zeros(d_out), act }
    }
}

impl Gru {
    pub fn glorot_init(d_in: usize, units: usize, rng: &mut ChaCha20Rng) -> Self {
        Self {
            wx: glorot(rng, d_in, 3 * units),
            wh: glorot(rng, units, 3 * units),
            b: Array1::zeros(3 * units),
            units,
        }
    }
}

impl Layer {
    pub fn out_dim(&self, d_in: usize, t_in: usize) -> (usize, usize) {
        match self {
            Layer::Dense(d) => (d.w.ncols(), t_in),
            Layer::Gru(g) => (g.units, t_in),
            Layer::Dropout { .. } => (d_in, t_in),
            Layer::TakeLast => (d_in, 1),
            Layer::Flatten => (d_in * t_in, 1),
        }
    }

    pub fn n_params(&self) -> usize {
        match self {
            Layer::Dense(d) => d.w.len() + d.b.len(),
            Layer::Gru(g) => g.wx.len() + g.wh.len() + g.b.len(),
            _ => 0,
        }
    }

    /// Same shapes, all parameters zero (gradient accumulator).
    pub fn zeros_like(&self) -> Layer {
        match self {
            Layer::Dense(d) => Layer::Dense(Dense {
                w: Array2::zeros(d.w.dim()),
                b: Array1::zeros(d.b.len()),
                act: d.act,
            }),
            Layer::Gru(g) => Layer::Gru(Gru {
                wx: Array2::zeros(g.wx.dim()),
                wh: Array2::zeros(g.wh.dim()),
                b: Array1::zeros(g.b.len()),
                units: g.units,
            }),
            other => other.clone(),
        }
    }

    pub fn collect_params(&self, out: &mut Vec<f64>) {
        match self {
            Layer::Dense(d) => {
                out.extend(d.w.iter());
                out.extend(d.b.iter());
            }
            Layer::Gru(g) => {
                out.extend(g.wx.iter());
                out.extend(g.wh.iter());
                out.extend(g.b.iter());
            }
            _ => {}
        }
    }

    pub fn set_params(&mut self, src: &[f64], cursor: &mut usize) {
        let mut take = |dst: &mut [f64]| {
            dst.copy_from_slice(&src[*cursor..*cursor + dst.len()]);
            *cursor += dst.len();
        };
        match self {
            Layer::Dense(d) => {
                take(d.w.as_slice_mut().unwrap());
                take(d.b.as_slice_mut().unwrap());
            }
            Layer::Gru(g) => {
                take(g.wx.as_slice_mut().unwrap());
                take(g.wh.as_slice_mut().unwrap());
                take(g.b.as_slice_mut().unwrap());
            }
            _ => {}
        }
    }
}

/// Per-layer forward cache for the backward pass.
pub enum Cache {
    Dense {
        x_flat: Array2<f64>, // [batch*time, d_in]
        y_flat: Array2<f64>, // post-activation
        t_in: usize,
    },
    Gru {
        x: Array3<f64>,
        h: Array3<f64>, // hidden states, h[.., t, ..] = h_t
        z: Array3<f64>,
        r: Array3<f64>,
        c: Array3<f64>, // candidate
    },
    Dropout {
        mask: Option<Array3<f64>>, // None in eval mode (identity)
    },
    TakeLast {
        t_in: usize,
    },
    Flatten {
        t_in: usize,
        d_in: usize,
    },
}

fn to_flat(x: &Array3<f64>) -> Array2<f64> {
    let (b, t, d) = x.dim();
    x.to_shape((b * t, d)).unwrap().to_owned()
}

fn to_seq(x: Array2<f64>, b: usize, t: usize) -> Array3<f64> {
    let d = x.ncols();
    // matmul output is column-major when the contraction axis has length 1
    let x = if x.is_standard_layout() { x } else { x.as_standard_layout().into_owned() };
    x.into_shape_with_order((b, t, d)).unwrap()
}

impl Layer {
    /// Forward pass. `train_rng` enables stochastic layers (dropout); pass
    /// `None` for deterministic inference.
    pub fn forward(
        &self,
        x: &Array3<f64>,
        train_rng: Option<&mut ChaCha20Rng>,
    ) -> (Array3<f64>, Cache) {
        let (b, t, d) = x.dim();
        match self {
            Layer::Dense(dn) => {
                let x_flat = to_flat(x);
                let mut y = x_flat.dot(&dn.w);
                y += &dn.b;
                dn.act.apply(&mut y);
                let out = to_seq(y.clone(), b, t);
                (out, Cache::Dense { x_flat, y_flat: y, t_in: t })
            }
            Layer::Gru(g) => {
                let u = g.units;
                let mut h = Array3::zeros((b, t, u));
                let mut zs = Array3::zeros((b, t, u));
                let mut rs = Array3::zeros((b, t, u));
                let mut cs = Array3::zeros((b, t, u));
                let mut h_prev = Array2::<f64>::zeros((b, u));
                for step in 0..t {
                    let x_t = x.slice(s![.., step, ..]).to_owned();
                    let mut pre = x_t.dot(&g.wx);
                    pre += &g.b;
                    let rec = h_prev.dot(&g.wh.slice(s![.., ..2 * u]));
                    pre.slice_mut(s![.., ..2 * u]).zip_mut_with(&rec, |a, &v| *a += v);
                    let z = pre.slice(s![.., ..u]).mapv(sigmoid);
                    let r = pre.slice(s![.., u..2 * u]).mapv(sigmoid);
                    let rh = &r * &h_prev;
                    let mut c_pre = pre.slice(s![.., 2 * u..]).to_owned();
                    c_pre += &rh.dot(&g.wh.slice(s![.., 2 * u..]));
                    let c = c_pre.mapv(f64::tanh);
                    let h_t = &z * &h_prev + &(1.0 - &z) * &c;
                    h.slice_mut(s![.., step, ..]).assign(&h_t);
                    zs.slice_mut(s![.., step, ..]).assign(&z);
                    rs.slice_mut(s![.., step, ..]).assign(&r);
                    cs.slice_mut(s![.., step, ..]).assign(&c);
                    h_prev = h_t;
                }
                (h.clone(), Cache::Gru { x: x.clone(), h, z: zs, r: rs, c: cs })
            }
            Layer::Dropout { rate } => match train_rng {
                Some(rng) if *rate > 0.0 => {
                    let keep = 1.0 - rate;
                    let mask = Array3::from_shape_fn((b, t, d), |_| {
                        if rng.gen::<f64>() < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    });
                    (x * &mask, Cache::Dropout { mask: Some(mask) })
                }
                _ => (x.clone(), Cache::Dropout { mask: None }),
            },
            Layer::TakeLast => {
                let out = x.slice(s![.., t - 1..t, ..]).to_owned();
                (out, Cache::TakeLast { t_in: t })
            }
            Layer::Flatten => {
                let out = x.to_shape((b, 1, t * d)).unwrap().to_owned();
                (out, Cache::Flatten { t_in: t, d_in: d })
            }
        }
    }

    /// Backward pass: returns the gradient w.r.t. the input and accumulates
    /// parameter gradients into `grad` (a `zeros_like` mirror of `self`).
    pub fn backward(&self, dy: &Array3<f64>, cache: &Cache, grad: &mut Layer) -> Array3<f64> {
        match (self, cache, grad) {
            (Layer::Dense(dn), Cache::Dense { x_flat, y_flat, t_in }, Layer::Dense(gd)) => {
                let (b_t, _) = x_flat.dim();
                let b = b_t / t_in;
                let dy_flat = to_flat(dy);
                let dpre = &dy_flat * &dn.act.grad_from_output(y_flat);
                gd.w += &x_flat.t().dot(&dpre);
                gd.b += &dpre.sum_axis(Axis(0));
                to_seq(dpre.dot(&dn.w.t()), b, *t_in)
            }
            (Layer::Gru(g), Cache::Gru { x, h, z, r, c }, Layer::Gru(gg)) => {
                let (b, t, _) = x.dim();
                let u = g.units;
                let mut dx = Array3::zeros((b, t, x.dim().2));
                let mut dh_next = Array2::<f64>::zeros((b, u));
                for step in (0..t).rev() {
                    let dh = &dy.slice(s![.., step, ..]).to_owned() + &dh_next;
                    let z_t = z.slice(s![.., step, ..]).to_owned();
                    let r_t = r.slice(s![.., step, ..]).to_owned();
                    let c_t = c.slice(s![.., step, ..]).to_owned();
                    let h_prev = if step == 0 {
                        Array2::zeros((b, u))
                    } else {
                        h.slice(s![.., step - 1, ..]).to_owned()
                    };
                    let x_t = x.slice(s![.., step, ..]).to_owned();

                    // h_t = z*h_prev + (1-z)*c
                    let dz = &dh * &(&h_prev - &c_t);
                    let dz_pre = &dz * &(&z_t * &(1.0 - &z_t));
                    let dc = &dh * &(1.0 - &z_t);
                    let dc_pre = &dc * &(1.0 - &(&c_t * &c_t));
                    let mut dh_prev = &dh * &z_t;

                    let wh_h = g.wh.slice(s![.., 2 * u..]);
                    let drh = dc_pre.dot(&wh_h.t());
                    let dr = &drh * &h_prev;
                    let dr_pre = &dr * &(&r_t * &(1.0 - &r_t));
                    dh_prev += &(&drh * &r_t);

                    let wh_z = g.wh.slice(s![.., ..u]);
                    let wh_r = g.wh.slice(s![.., u..2 * u]);
                    dh_prev += &dz_pre.dot(&wh_z.t());
                    dh_prev += &dr_pre.dot(&wh_r.t());

                    // parameter grads
                    let rh = &r_t * &h_prev;
                    gg.wx.slice_mut(s![.., ..u]).add_assign_dot(&x_t, &dz_pre);
                    gg.wx.slice_mut(s![.., u..2 * u]).add_assign_dot(&x_t, &dr_pre);
                    gg.wx.slice_mut(s![.., 2 * u..]).add_assign_dot(&x_t, &dc_pre);
                    gg.wh.slice_mut(s![.., ..u]).add_assign_dot(&h_prev, &dz_pre);
                    gg.wh.slice_mut(s![.., u..2 * u]).add_assign_dot(&h_prev, &dr_pre);
                    gg.wh.slice_mut(s![.., 2 * u..]).add_assign_dot(&rh, &dc_pre);
                    {
                        let mut bslice = gg.b.slice_mut(s![..u]);
                        bslice += &dz_pre.sum_axis(Axis(0));
                    }
                    {
                        let mut bslice = gg.b.slice_mut(s![u..2 * u]);
                        bslice += &dr_pre.sum_axis(Axis(0));
                    }
                    {
                        let mut bslice = gg.b.slice_mut(s![2 * u..]);
                        bslice += &dc_pre.sum_axis(Axis(0));
                    }

                    // input grad
                    let wx = &g.wx;
                    let mut dxt = dz_pre.dot(&wx.slice(s![.., ..u]).t());
                    dxt += &dr_pre.dot(&wx.slice(s![.., u..2 * u]).t());
                    dxt += &dc_pre.dot(&wx.slice(s![.., 2 * u..]).t());
                    dx.slice_mut(s![.., step, ..]).assign(&dxt);

                    dh_next = dh_prev;
                }
                dx
            }
            (Layer::Dropout { .. }, Cache::Dropout { mask }, _) => match mask {
                Some(m) => dy * m,
                None => dy.clone(),
            },
            (Layer::TakeLast, Cache::TakeLast { t_in }, _) => {
                let (b, _, d) = dy.dim();
                let mut dx = Array3::zeros((b, *t_in, d));
                dx.slice_mut(s![.., t_in - 1, ..]).assign(&dy.slice(s![.., 0, ..]));
                dx
            }
            (Layer::Flatten, Cache::Flatten { t_in, d_in }, _) => {
                let b = dy.dim().0;
                dy.to_shape((b, *t_in, *d_in)).unwrap().to_owned()
            }
            _ => unreachable!("layer/cache/grad mismatch"),
        }
    }
}

/// Small helper: `dst += lhs^T . rhs` without allocating the product twice.
trait AddAssignDot {
    fn add_assign_dot(&mut self, lhs: &Array2<f64>, rhs: &Array2<f64>);
}

impl AddAssignDot for ndarray::ArrayViewMut2<'_, f64> {
    fn add_assign_dot(&mut self, lhs: &Array2<f64>, rhs: &Array2<f64>) {
        let prod = lhs.t().dot(rhs);
        *self += &prod;
    }
}
