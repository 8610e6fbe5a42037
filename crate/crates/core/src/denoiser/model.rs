//! The transformer denoiser `v̂ = g(x_t, t)`.
//!
//! Pipeline per sample: sinusoidal embedding of `t` → 2-layer MLP → width
//! `D`, concatenated to every frame of `x_t` → input projection → optional
//! sinusoidal positional encoding → post-LN encoder blocks with full
//! self-attention → output projection back to `D`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tape::{Activation, NodeId, Tape};
use super::tensor::{Mat, Real};
use crate::diffusion::VPredictor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenoiserConfig {
    pub feature_dim: usize,
    pub max_frames: usize,
    pub latent_dim: usize,
    pub num_layers: usize,
    pub num_heads: usize,
    pub ffn_dim: usize,
    pub activation: Activation,
    #[serde(default = "default_true")]
    pub positional_encoding: bool,
    #[serde(default)]
    pub dropout: f64,
}

fn default_true() -> bool {
    true
}

impl DenoiserConfig {
    /// Latent 64, 2 layers, 2 heads, FFN 128.
    pub fn desk(feature_dim: usize, max_frames: usize) -> Self {
        DenoiserConfig {
            feature_dim,
            max_frames,
            latent_dim: 64,
            num_layers: 2,
            num_heads: 2,
            ffn_dim: 128,
            activation: Activation::Gelu,
            positional_encoding: true,
            dropout: 0.0,
        }
    }

    /// Latent 512, 8 layers, 4 heads, FFN 1024.
    pub fn full_scale(feature_dim: usize, max_frames: usize) -> Self {
        DenoiserConfig {
            latent_dim: 512,
            num_layers: 8,
            num_heads: 4,
            ffn_dim: 1024,
            ..Self::desk(feature_dim, max_frames)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("feature_dim", self.feature_dim),
            ("max_frames", self.max_frames),
            ("latent_dim", self.latent_dim),
            ("num_heads", self.num_heads),
            ("ffn_dim", self.ffn_dim),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::invalid(format!("{name} must be at least 1")));
        }
        if !self.latent_dim.is_multiple_of(self.num_heads) {
            return Err(Error::invalid(format!(
                "latent_dim {} not divisible by num_heads {}",
                self.latent_dim, self.num_heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

/// How a tensor is initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    /// `U(−1/√fan_in, 1/√fan_in)`.
    FanIn(usize),
    Zeros,
    Ones,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub init: Init,
}

/// Indices of one encoder block's tensors in the flat parameter list.
#[derive(Debug, Clone, Copy, PartialEq)]
struct BlockIdx {
    wq: usize,
    wk: usize,
    wv: usize,
    wo: usize,
    ln1: usize,
    ff1: usize,
    ff2: usize,
    ln2: usize,
}

#[derive(Default)]
struct Layout {
    specs: Vec<ParamSpec>,
}

impl Layout {
    fn push(&mut self, name: String, rows: usize, cols: usize, init: Init) -> usize {
        self.specs.push(ParamSpec { name, rows, cols, init });
        self.specs.len() - 1
    }

    /// Weight (`out × in`) followed by its bias; returns the weight index.
    fn linear(&mut self, name: &str, out: usize, inp: usize, zero: bool) -> usize {
        let init = if zero { Init::Zeros } else { Init::FanIn(inp) };
        let w = self.push(format!("{name}.weight"), out, inp, init);
        self.push(format!("{name}.bias"), 1, out, init);
        w
    }

    /// Gain followed by shift.
    fn norm(&mut self, name: &str, width: usize) -> usize {
        let g = self.push(format!("{name}.gain"), 1, width, Init::Ones);
        self.push(format!("{name}.shift"), 1, width, Init::Zeros);
        g
    }
}

fn layout(cfg: &DenoiserConfig) -> (Vec<ParamSpec>, Vec<BlockIdx>) {
    let (l, d) = (cfg.latent_dim, cfg.feature_dim);
    let mut lay = Layout::default();
    lay.linear("time.fc1", l, l, false);
    lay.linear("time.fc2", d, l, false);
    lay.linear("input", l, 2 * d, false);
    let blocks = (0..cfg.num_layers)
        .map(|i| {
            let p = format!("block{i}");
            BlockIdx {
                wq: lay.linear(&format!("{p}.attn.q"), l, l, false),
                wk: lay.linear(&format!("{p}.attn.k"), l, l, false),
                wv: lay.linear(&format!("{p}.attn.v"), l, l, false),
                wo: lay.linear(&format!("{p}.attn.out"), l, l, false),
                ln1: lay.norm(&format!("{p}.ln1"), l),
                ff1: lay.linear(&format!("{p}.ffn.fc1"), cfg.ffn_dim, l, false),
                ff2: lay.linear(&format!("{p}.ffn.fc2"), l, cfg.ffn_dim, false),
                ln2: lay.norm(&format!("{p}.ln2"), l),
            }
        })
        .collect();
    lay.linear("output", d, l, true);
    (lay.specs, blocks)
}

/// Sinusoidal features of a scalar position: `[sin(p·ω_i)…, cos(p·ω_i)…]`
/// with `ω_i = 10000^(−i/⌈dim/2⌉)`.
pub fn sinusoidal_embedding(position: f64, dim: usize) -> Vec<f64> {
    let half = dim.div_ceil(2);
    let mut out = vec![0.0; dim];
    for i in 0..half {
        let freq = (-(10000f64.ln()) * i as f64 / half as f64).exp();
        out[i] = (position * freq).sin();
        if half + i < dim {
            out[half + i] = (position * freq).cos();
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Denoiser<F> {
    config: DenoiserConfig,
    specs: Vec<ParamSpec>,
    blocks: Vec<BlockIdx>,
    params: Vec<Mat<F>>,
    /// `max_frames × latent` positional table.
    pe: Mat<F>,
}

impl<F: Real> Denoiser<F> {
    pub fn new<R: Rng + ?Sized>(config: DenoiserConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let (specs, _) = layout(&config);
        let params = specs
            .iter()
            .map(|s| match s.init {
                Init::Zeros => Mat::zeros(s.rows, s.cols),
                Init::Ones => Mat::from_fn(s.rows, s.cols, |_, _| F::one()),
                Init::FanIn(fan_in) => {
                    let bound = 1.0 / (fan_in as f64).sqrt();
                    Mat::from_fn(s.rows, s.cols, |_, _| F::from_f64_lossy(rng.random_range(-bound..bound)))
                }
            })
            .collect();
        Self::from_params(config, params)
    }

    /// Builds a model from explicit tensors in layout order.
    pub fn from_params(config: DenoiserConfig, params: Vec<Mat<F>>) -> Result<Self> {
        config.validate()?;
        let (specs, blocks) = layout(&config);
        if params.len() != specs.len() {
            return Err(Error::shape(format!("{} tensors for a layout of {}", params.len(), specs.len())));
        }
        for (p, s) in params.iter().zip(&specs) {
            if p.shape() != (s.rows, s.cols) {
                return Err(Error::shape(format!("{} is {:?}, expected {:?}", s.name, p.shape(), (s.rows, s.cols))));
            }
            if !p.is_finite() {
                return Err(Error::NonFinite(format!("parameter {}", s.name)));
            }
        }
        let mut pe = Mat::zeros(config.max_frames, config.latent_dim);
        for n in 0..config.max_frames {
            for (c, v) in sinusoidal_embedding(n as f64, config.latent_dim).into_iter().enumerate() {
                pe.data[n * config.latent_dim + c] = F::from_f64_lossy(v);
            }
        }
        Ok(Denoiser { config, specs, blocks, params, pe })
    }

    pub fn config(&self) -> &DenoiserConfig {
        &self.config
    }

    pub fn specs(&self) -> &[ParamSpec] {
        &self.specs
    }

    pub fn params(&self) -> &[Mat<F>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Mat<F>] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Mat::len).sum()
    }

    pub fn cast<G: Real>(&self) -> Denoiser<G> {
        Denoiser::from_params(self.config.clone(), self.params.iter().map(Mat::cast).collect())
            .expect("same layout")
    }

    /// Records the forward pass for `timesteps.len()` samples whose frames
    /// are stacked in `x` (`B·frames × D`). Dropout is active only when an
    /// rng is given.
    pub fn forward_tape<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape<F>,
        x: Mat<F>,
        timesteps: &[usize],
        frames: usize,
        mut dropout_rng: Option<&mut R>,
    ) -> Result<NodeId> {
        let cfg = &self.config;
        let b = timesteps.len();
        if frames == 0 || frames > cfg.max_frames {
            return Err(Error::shape(format!("{frames} frames, model supports 1..={}", cfg.max_frames)));
        }
        if x.shape() != (b * frames, cfg.feature_dim) {
            return Err(Error::shape(format!(
                "input {:?}, expected {:?}",
                x.shape(),
                (b * frames, cfg.feature_dim)
            )));
        }
        let p: Vec<NodeId> = self.params.iter().enumerate().map(|(i, m)| tape.param(i, m)).collect();
        let lin = |tape: &mut Tape<F>, x: NodeId, w: usize| tape.linear(x, p[w], Some(p[w + 1]));

        let mut temb = Mat::zeros(b, cfg.latent_dim);
        for (i, &t) in timesteps.iter().enumerate() {
            for (c, v) in sinusoidal_embedding(t as f64, cfg.latent_dim).into_iter().enumerate() {
                temb.data[i * cfg.latent_dim + c] = F::from_f64_lossy(v);
            }
        }
        let temb = tape.leaf(temb);
        let h = lin(tape, temb, 0);
        let h = tape.activation(h, cfg.activation);
        let h = lin(tape, h, 2);
        let h = tape.repeat_rows(h, frames);
        let xin = tape.leaf(x);
        let h = tape.concat_cols(xin, h);
        let mut h = lin(tape, h, 4);
        if cfg.positional_encoding {
            let pe = Mat::from_vec(frames, cfg.latent_dim, self.pe.data[..frames * cfg.latent_dim].to_vec());
            h = tape.add_segment_const(h, &pe);
        }
        for blk in &self.blocks {
            let q = lin(tape, h, blk.wq);
            let k = lin(tape, h, blk.wk);
            let v = lin(tape, h, blk.wv);
            let a = tape.attention(q, k, v, cfg.num_heads, frames);
            let mut a = lin(tape, a, blk.wo);
            if let Some(r) = dropout_rng.as_deref_mut() {
                a = tape.dropout(a, cfg.dropout, r);
            }
            let h1 = tape.add(h, a);
            let h1 = tape.layer_norm(h1, p[blk.ln1], p[blk.ln1 + 1]);
            let f = lin(tape, h1, blk.ff1);
            let f = tape.activation(f, cfg.activation);
            let mut f = lin(tape, f, blk.ff2);
            if let Some(r) = dropout_rng.as_deref_mut() {
                f = tape.dropout(f, cfg.dropout, r);
            }
            let h2 = tape.add(h1, f);
            h = tape.layer_norm(h2, p[blk.ln2], p[blk.ln2 + 1]);
        }
        let out = self.specs.len() - 2;
        Ok(lin(tape, h, out))
    }

    /// Inference forward pass: returns `v̂` as a `B·frames × D` matrix.
    pub fn forward(&self, x: Mat<F>, timesteps: &[usize], frames: usize) -> Result<Mat<F>> {
        let mut tape = Tape::new(self.params.len());
        let out = self.forward_tape::<rand::rngs::ThreadRng>(&mut tape, x, timesteps, frames, None)?;
        Ok(tape.value(out).clone())
    }
}

impl<F: Real> VPredictor for Denoiser<F> {
    fn feature_dim(&self) -> usize {
        self.config.feature_dim
    }

    fn max_frames(&self) -> usize {
        self.config.max_frames
    }

    fn predict_v(&self, batch: &[Vec<f64>], frames: usize, t: usize) -> Result<Vec<Vec<f64>>> {
        let d = self.config.feature_dim;
        let mut data = Vec::with_capacity(batch.len() * frames * d);
        for s in batch {
            if s.len() != frames * d {
                return Err(Error::shape(format!("sample has {} values, expected {}", s.len(), frames * d)));
            }
            data.extend(s.iter().map(|v| F::from_f64_lossy(*v)));
        }
        let x = Mat::from_vec(batch.len() * frames, d, data);
        let out = self.forward(x, &vec![t; batch.len()], frames)?;
        Ok(out
            .data
            .chunks_exact(frames * d)
            .map(|c| c.iter().map(|v| v.to_f64_lossy()).collect())
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny() -> DenoiserConfig {
        DenoiserConfig {
            feature_dim: 6,
            max_frames: 4,
            latent_dim: 8,
            num_layers: 1,
            num_heads: 1,
            ffn_dim: 16,
            activation: Activation::Gelu,
            positional_encoding: true,
            dropout: 0.0,
        }
    }

    fn randomize(model: &mut Denoiser<f64>, rng: &mut ChaCha8Rng) {
        for p in model.params_mut() {
            for v in p.data.iter_mut() {
                *v = rng.random_range(-0.5..0.5);
            }
        }
    }

    #[test]
    fn zero_output_layer_predicts_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let model = Denoiser::<f64>::new(tiny(), &mut rng).unwrap();
        let x = Mat::from_fn(8, 6, |_, _| rng.random_range(-3.0..3.0));
        let y = model.forward(x, &[5, 17], 4).unwrap();
        assert_eq!(y.shape(), (8, 6));
        assert!(y.data.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn head_count_must_divide_latent() {
        let cfg = DenoiserConfig { num_heads: 3, ..tiny() };
        assert!(cfg.validate().is_err());
        assert!(DenoiserConfig::full_scale(150, 64).validate().is_ok());
    }

    #[test]
    fn bias_gradient_of_sum_is_frame_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = Denoiser::<f64>::new(tiny(), &mut rng).unwrap();
        let mut tape = Tape::new(model.params().len());
        let x = Mat::from_fn(4, 6, |_, _| rng.random_range(-1.0..1.0));
        let out = model.forward_tape::<ChaCha8Rng>(&mut tape, x, &[3], 4, None).unwrap();
        let grads = tape.backward(out, Mat::from_fn(4, 6, |_, _| 1.0)).unwrap();
        let gb = grads.last().unwrap().as_ref().unwrap();
        assert!(gb.data.iter().all(|v| *v == 4.0));
    }

    #[test]
    fn frame_permutation_equivariance_without_positional_encoding() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = DenoiserConfig { positional_encoding: false, ..tiny() };
        let mut model = Denoiser::<f64>::new(cfg, &mut rng).unwrap();
        randomize(&mut model, &mut rng);
        let x = Mat::from_fn(4, 6, |_, _| rng.random_range(-1.0..1.0));
        let perm = [2usize, 0, 3, 1];
        let xp = Mat::from_fn(4, 6, |r, c| x.at(perm[r], c));
        let y = model.forward(x, &[9], 4).unwrap();
        let yp = model.forward(xp, &[9], 4).unwrap();
        for r in 0..4 {
            for c in 0..6 {
                assert!((yp.at(r, c) - y.at(perm[r], c)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn full_model_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut model = Denoiser::<f64>::new(tiny(), &mut rng).unwrap();
        randomize(&mut model, &mut rng);
        let x = Mat::from_fn(8, 6, |_, _| rng.random_range(-1.0..1.0));
        let g = Mat::from_fn(8, 6, |_, _| rng.random_range(-1.0..1.0));
        let ts = [4, 40];
        let mut tape = Tape::new(model.params().len());
        let out = model.forward_tape::<ChaCha8Rng>(&mut tape, x.clone(), &ts, 4, None).unwrap();
        let grads = tape.backward(out, g.clone()).unwrap();
        let f = |m: &Denoiser<f64>| -> f64 {
            let y = m.forward(x.clone(), &ts, 4).unwrap();
            y.data.iter().zip(&g.data).map(|(a, b)| a * b).sum()
        };
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for pi in 0..model.params().len() {
            for e in 0..model.params()[pi].len() {
                let mut plus = model.clone();
                plus.params_mut()[pi].data[e] += h;
                let mut minus = model.clone();
                minus.params_mut()[pi].data[e] -= h;
                let fd = (f(&plus) - f(&minus)) / (2.0 * h);
                let an = grads[pi].as_ref().map_or(0.0, |m| m.data[e]);
                worst = worst.max((fd - an).abs() / fd.abs().max(an.abs()).max(1e-3));
            }
        }
        assert!(worst < 1e-4, "{worst}");
    }
}
