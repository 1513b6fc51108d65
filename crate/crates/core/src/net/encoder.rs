//! Pre-layer-norm transformer encoder with a pooled classification head.
//!
//! ```text
//! x = drop(tok_emb[ids] + pos_emb)
//! per layer:  x = x + drop(Attn(LN1(x)))      masked keys excluded
//!             x = x + drop(W2·gelu(W1·LN2(x)))
//! h = LNf(x[0]);  logits = out(tanh(pool(h)))
//! ```
//!
//! Only the attended prefix (`mask == 1`) is ever read, so padding ids cannot
//! influence the output. Queries of the last layer are computed for position 0
//! alone unless attention maps are requested, since nothing else reaches the
//! head.

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::rng::{derive_seed, Rng};
use crate::tokenizer::EncodedExample;

use super::loss::{cross_entropy_loss, softmax};
use super::params::{LayerParams, Params};
use super::tensor::{dot, matmul, matmul_backward};
use super::{Mode, ModelConfig};

const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

const SITE_EMB: u64 = 0;
const SITE_ATTN: u64 = 1;
const SITE_FF: u64 = 2;

/// Attention weights of one head: `rows` queries × `cols` keys, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMap {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
}

impl AttentionMap {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.cols..(i + 1) * self.cols]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub logits: Vec<f64>,
    /// `[layer][head]`.
    pub attention: Vec<Vec<AttentionMap>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: Label,
    pub p_ai: f64,
}

struct LnCache {
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
}

fn layer_norm(x: &[f64], rows: usize, d: usize, gain: &[f64], bias: &[f64]) -> (Vec<f64>, LnCache) {
    let mut y = vec![0.0; rows * d];
    let mut xhat = vec![0.0; rows * d];
    let mut inv_std = vec![0.0; rows];
    for r in 0..rows {
        let xr = &x[r * d..(r + 1) * d];
        let mean = xr.iter().sum::<f64>() / d as f64;
        let var = xr.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let inv = 1.0 / (var + LN_EPS).sqrt();
        inv_std[r] = inv;
        for j in 0..d {
            let h = (xr[j] - mean) * inv;
            xhat[r * d + j] = h;
            y[r * d + j] = gain[j] * h + bias[j];
        }
    }
    (y, LnCache { xhat, inv_std })
}

/// Accumulates gain/bias gradients and returns `dx`.
fn layer_norm_backward(
    cache: &LnCache,
    rows: usize,
    d: usize,
    gain: &[f64],
    dy: &[f64],
    dgain: &mut [f64],
    dbias: &mut [f64],
) -> Vec<f64> {
    let mut dx = vec![0.0; rows * d];
    let mut dxhat = vec![0.0; d];
    for r in 0..rows {
        let dyr = &dy[r * d..(r + 1) * d];
        let xh = &cache.xhat[r * d..(r + 1) * d];
        for j in 0..d {
            dgain[j] += dyr[j] * xh[j];
            dbias[j] += dyr[j];
            dxhat[j] = dyr[j] * gain[j];
        }
        let mean_d = dxhat.iter().sum::<f64>() / d as f64;
        let mean_dx = dot(&dxhat, xh) / d as f64;
        let inv = cache.inv_std[r];
        for j in 0..d {
            dx[r * d + j] = inv * (dxhat[j] - mean_d - xh[j] * mean_dx);
        }
    }
    dx
}

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + 0.044715 * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}

/// Inverted-dropout scale per element, or `None` when dropout is off.
fn dropout_mask(len: usize, rate: f64, mode: Mode, seed: u64, site: u64, layer: u64) -> Option<Vec<f64>> {
    if mode == Mode::Eval || rate == 0.0 {
        return None;
    }
    let mut rng = Rng::derived(seed, &[site, layer]);
    let keep = 1.0 / (1.0 - rate);
    Some((0..len).map(|_| if rng.bernoulli(rate) { 0.0 } else { keep }).collect())
}

fn apply_mask(x: &mut [f64], mask: &Option<Vec<f64>>) {
    if let Some(m) = mask {
        for (v, s) in x.iter_mut().zip(m) {
            *v *= s;
        }
    }
}

struct LayerCache {
    /// Number of query rows (and output rows) computed in this layer.
    q_rows: usize,
    ln1: LnCache,
    a: Vec<f64>,
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    /// `[head][q_rows][n]`.
    probs: Vec<f64>,
    ctx: Vec<f64>,
    attn_drop: Option<Vec<f64>>,
    ln2: LnCache,
    b: Vec<f64>,
    h_pre: Vec<f64>,
    h_act: Vec<f64>,
    ff_drop: Option<Vec<f64>>,
}

struct Cache {
    ids: Vec<u32>,
    emb_drop: Option<Vec<f64>>,
    layers: Vec<LayerCache>,
    lnf: LnCache,
    h0: Vec<f64>,
    pooled: Vec<f64>,
    logits: Vec<f64>,
}

/// Length of the attended prefix; errors on shape or mask violations.
fn check_example(cfg: &ModelConfig, ids: &[u32], mask: &[u8]) -> Result<usize> {
    if ids.len() != cfg.max_len || mask.len() != cfg.max_len {
        return Err(Error::Shape(format!(
            "expected sequences of length {}, got ids {} and mask {}",
            cfg.max_len,
            ids.len(),
            mask.len()
        )));
    }
    let n = mask.iter().take_while(|&&m| m == 1).count();
    if mask[n..].iter().any(|&m| m != 0) {
        return Err(Error::Shape("mask must be ones on a prefix and zeros after".into()));
    }
    if n == 0 {
        return Err(Error::Shape("mask attends to no positions".into()));
    }
    if let Some(&bad) = ids[..n].iter().find(|&&id| id as usize >= cfg.vocab_size) {
        return Err(Error::TokenRange {
            id: bad,
            vocab_size: cfg.vocab_size,
        });
    }
    Ok(n)
}

#[allow(clippy::too_many_arguments)]
fn layer_forward(
    cfg: &ModelConfig,
    lp: &LayerParams,
    x: &[f64],
    n: usize,
    q_rows: usize,
    mode: Mode,
    seed: u64,
    layer: u64,
) -> (Vec<f64>, LayerCache) {
    let d = cfg.d_model;
    let h = cfg.n_heads;
    let dh = cfg.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();

    let (a, ln1) = layer_norm(x, n, d, &lp.ln1_gain.data, &lp.ln1_bias.data);
    let q = matmul(&a[..q_rows * d], q_rows, d, &lp.wq.data, d, None);
    let k = matmul(&a, n, d, &lp.wk.data, d, None);
    let v = matmul(&a, n, d, &lp.wv.data, d, None);

    let mut probs = vec![0.0; h * q_rows * n];
    let mut ctx = vec![0.0; q_rows * d];
    for head in 0..h {
        let off = head * dh;
        for i in 0..q_rows {
            let qi = &q[i * d + off..i * d + off + dh];
            let row = &mut probs[(head * q_rows + i) * n..(head * q_rows + i + 1) * n];
            let mut max = f64::NEG_INFINITY;
            for (j, s) in row.iter_mut().enumerate() {
                *s = dot(qi, &k[j * d + off..j * d + off + dh]) * scale;
                max = max.max(*s);
            }
            let mut sum = 0.0;
            for s in row.iter_mut() {
                *s = (*s - max).exp();
                sum += *s;
            }
            for s in row.iter_mut() {
                *s /= sum;
            }
            let ci = &mut ctx[i * d + off..i * d + off + dh];
            for (j, &p) in row.iter().enumerate() {
                for (c, &vv) in ci.iter_mut().zip(&v[j * d + off..j * d + off + dh]) {
                    *c += p * vv;
                }
            }
        }
    }
    let mut o = matmul(&ctx, q_rows, d, &lp.wo.data, d, None);
    let attn_drop = dropout_mask(q_rows * d, cfg.dropout_rate, mode, seed, SITE_ATTN, layer);
    apply_mask(&mut o, &attn_drop);
    let mut x_mid: Vec<f64> = x[..q_rows * d].to_vec();
    for (xm, ov) in x_mid.iter_mut().zip(&o) {
        *xm += ov;
    }

    let (b, ln2) = layer_norm(&x_mid, q_rows, d, &lp.ln2_gain.data, &lp.ln2_bias.data);
    let h_pre = matmul(&b, q_rows, d, &lp.ff_w1.data, cfg.d_ff, Some(&lp.ff_b1.data));
    let h_act: Vec<f64> = h_pre.iter().map(|&z| gelu(z)).collect();
    let mut f = matmul(&h_act, q_rows, cfg.d_ff, &lp.ff_w2.data, d, Some(&lp.ff_b2.data));
    let ff_drop = dropout_mask(q_rows * d, cfg.dropout_rate, mode, seed, SITE_FF, layer);
    apply_mask(&mut f, &ff_drop);
    let mut out = x_mid;
    for (xo, fv) in out.iter_mut().zip(&f) {
        *xo += fv;
    }
    (
        out,
        LayerCache {
            q_rows,
            ln1,
            a,
            q,
            k,
            v,
            probs,
            ctx,
            attn_drop,
            ln2,
            b,
            h_pre,
            h_act,
            ff_drop,
        },
    )
}

fn forward_cached(
    params: &Params,
    cfg: &ModelConfig,
    ids: &[u32],
    mask: &[u8],
    mode: Mode,
    seed: u64,
    all_rows: bool,
) -> Result<Cache> {
    let n = check_example(cfg, ids, mask)?;
    let d = cfg.d_model;
    let mut x = vec![0.0; n * d];
    for (i, &id) in ids[..n].iter().enumerate() {
        let te = &params.tok_emb.data[id as usize * d..(id as usize + 1) * d];
        let pe = &params.pos_emb.data[i * d..(i + 1) * d];
        for j in 0..d {
            x[i * d + j] = te[j] + pe[j];
        }
    }
    let emb_drop = dropout_mask(n * d, cfg.dropout_rate, mode, seed, SITE_EMB, 0);
    apply_mask(&mut x, &emb_drop);

    let mut layers = Vec::with_capacity(cfg.n_layers);
    for (l, lp) in params.layers.iter().enumerate() {
        let last = l + 1 == cfg.n_layers;
        let q_rows = if last && !all_rows { 1 } else { n };
        let (next, cache) = layer_forward(cfg, lp, &x, n, q_rows, mode, seed, l as u64);
        x = next;
        layers.push(cache);
    }

    let (h0, lnf) = layer_norm(&x[..d], 1, d, &params.lnf_gain.data, &params.lnf_bias.data);
    let pooled: Vec<f64> = matmul(&h0, 1, d, &params.pool_w.data, d, Some(&params.pool_b.data))
        .into_iter()
        .map(f64::tanh)
        .collect();
    let logits = matmul(&pooled, 1, d, &params.out_w.data, cfg.n_labels, Some(&params.out_b.data));
    Ok(Cache {
        ids: ids[..n].to_vec(),
        emb_drop,
        layers,
        lnf,
        h0,
        pooled,
        logits,
    })
}

/// Runs the encoder on one example. Dropout is active only in
/// [`Mode::Train`], with masks drawn from `seed`.
pub fn forward(
    params: &Params,
    cfg: &ModelConfig,
    ids: &[u32],
    mask: &[u8],
    mode: Mode,
    seed: u64,
) -> Result<ForwardOutput> {
    let cache = forward_cached(params, cfg, ids, mask, mode, seed, true)?;
    let n = cache.ids.len();
    let attention = cache
        .layers
        .iter()
        .map(|lc| {
            (0..cfg.n_heads)
                .map(|head| AttentionMap {
                    rows: lc.q_rows,
                    cols: n,
                    weights: lc.probs[head * lc.q_rows * n..(head + 1) * lc.q_rows * n].to_vec(),
                })
                .collect()
        })
        .collect();
    Ok(ForwardOutput {
        logits: cache.logits,
        attention,
    })
}

/// Logits only; skips the unused query rows of the last layer.
pub(crate) fn logits(params: &Params, cfg: &ModelConfig, ex: &EncodedExample, mode: Mode, seed: u64) -> Result<Vec<f64>> {
    Ok(forward_cached(params, cfg, &ex.ids, &ex.mask, mode, seed, false)?.logits)
}

/// Eval-mode prediction; ties go to [`Label::Human`].
pub fn predict(params: &Params, cfg: &ModelConfig, ex: &EncodedExample) -> Result<Prediction> {
    let z = logits(params, cfg, ex, Mode::Eval, 0)?;
    let p = softmax(&z);
    let label = if z[1] > z[0] { Label::Ai } else { Label::Human };
    Ok(Prediction { label, p_ai: p[1] })
}

#[allow(clippy::too_many_arguments)]
fn layer_backward(
    cfg: &ModelConfig,
    lp: &LayerParams,
    g: &mut LayerParams,
    c: &LayerCache,
    n: usize,
    dx_out: &[f64],
) -> Vec<f64> {
    let d = cfg.d_model;
    let dh = cfg.head_dim();
    let q = c.q_rows;
    let scale = 1.0 / (dh as f64).sqrt();

    // Feed-forward residual.
    let mut dx_mid = dx_out.to_vec();
    let mut df = dx_out.to_vec();
    apply_mask(&mut df, &c.ff_drop);
    let mut dh_act = vec![0.0; q * cfg.d_ff];
    matmul_backward(&c.h_act, q, cfg.d_ff, &lp.ff_w2.data, d, &df, &mut g.ff_w2.data, Some(&mut g.ff_b2.data), Some(&mut dh_act));
    let dh_pre: Vec<f64> = dh_act.iter().zip(&c.h_pre).map(|(&gr, &z)| gr * gelu_grad(z)).collect();
    let mut db = vec![0.0; q * d];
    matmul_backward(&c.b, q, d, &lp.ff_w1.data, cfg.d_ff, &dh_pre, &mut g.ff_w1.data, Some(&mut g.ff_b1.data), Some(&mut db));
    let dln2 = layer_norm_backward(&c.ln2, q, d, &lp.ln2_gain.data, &db, &mut g.ln2_gain.data, &mut g.ln2_bias.data);
    for (a, b) in dx_mid.iter_mut().zip(&dln2) {
        *a += b;
    }

    // Attention residual.
    let mut dx_in = vec![0.0; n * d];
    dx_in[..q * d].copy_from_slice(&dx_mid);
    let mut d_o = dx_mid;
    apply_mask(&mut d_o, &c.attn_drop);
    let mut dctx = vec![0.0; q * d];
    matmul_backward(&c.ctx, q, d, &lp.wo.data, d, &d_o, &mut g.wo.data, None, Some(&mut dctx));

    let mut dq = vec![0.0; q * d];
    let mut dk = vec![0.0; n * d];
    let mut dv = vec![0.0; n * d];
    let mut dp = vec![0.0; n];
    for head in 0..cfg.n_heads {
        let off = head * dh;
        for i in 0..q {
            let p = &c.probs[(head * q + i) * n..(head * q + i + 1) * n];
            let dci = &dctx[i * d + off..i * d + off + dh];
            for j in 0..n {
                let vj = &c.v[j * d + off..j * d + off + dh];
                dp[j] = dot(dci, vj);
                let dvj = &mut dv[j * d + off..j * d + off + dh];
                for (t, dvt) in dvj.iter_mut().enumerate() {
                    *dvt += p[j] * dci[t];
                }
            }
            let inner = dot(p, &dp[..n]);
            let qi = &c.q[i * d + off..i * d + off + dh];
            for j in 0..n {
                let ds = p[j] * (dp[j] - inner) * scale;
                if ds == 0.0 {
                    continue;
                }
                let kj = &c.k[j * d + off..j * d + off + dh];
                let dqi = &mut dq[i * d + off..i * d + off + dh];
                for t in 0..dh {
                    dqi[t] += ds * kj[t];
                }
                let dkj = &mut dk[j * d + off..j * d + off + dh];
                for t in 0..dh {
                    dkj[t] += ds * qi[t];
                }
            }
        }
    }
    let mut da = vec![0.0; n * d];
    matmul_backward(&c.a[..q * d], q, d, &lp.wq.data, d, &dq, &mut g.wq.data, None, Some(&mut da[..q * d]));
    matmul_backward(&c.a, n, d, &lp.wk.data, d, &dk, &mut g.wk.data, None, Some(&mut da));
    matmul_backward(&c.a, n, d, &lp.wv.data, d, &dv, &mut g.wv.data, None, Some(&mut da));
    let dln1 = layer_norm_backward(&c.ln1, n, d, &lp.ln1_gain.data, &da, &mut g.ln1_gain.data, &mut g.ln1_bias.data);
    for (a, b) in dx_in.iter_mut().zip(&dln1) {
        *a += b;
    }
    dx_in
}

/// Loss of one example and its gradient scaled by `weight`, accumulated into `g`.
#[allow(clippy::too_many_arguments)]
fn example_gradient(
    params: &Params,
    cfg: &ModelConfig,
    ex: &EncodedExample,
    label: Label,
    mode: Mode,
    seed: u64,
    weight: f64,
    g: &mut Params,
) -> Result<f64> {
    let cache = forward_cached(params, cfg, &ex.ids, &ex.mask, mode, seed, false)?;
    let d = cfg.d_model;
    let n = cache.ids.len();
    let loss = cross_entropy_loss(&cache.logits, label.index());

    let mut dlogits = softmax(&cache.logits);
    dlogits[label.index()] -= 1.0;
    for v in &mut dlogits {
        *v *= weight;
    }
    let mut dpooled = vec![0.0; d];
    matmul_backward(&cache.pooled, 1, d, &params.out_w.data, cfg.n_labels, &dlogits, &mut g.out_w.data, Some(&mut g.out_b.data), Some(&mut dpooled));
    let dz: Vec<f64> = dpooled.iter().zip(&cache.pooled).map(|(&gp, &p)| gp * (1.0 - p * p)).collect();
    let mut dh0 = vec![0.0; d];
    matmul_backward(&cache.h0, 1, d, &params.pool_w.data, d, &dz, &mut g.pool_w.data, Some(&mut g.pool_b.data), Some(&mut dh0));
    let dx0 = layer_norm_backward(&cache.lnf, 1, d, &params.lnf_gain.data, &dh0, &mut g.lnf_gain.data, &mut g.lnf_bias.data);

    let last_rows = cache.layers.last().map_or(n, |c| c.q_rows);
    let mut dx = vec![0.0; last_rows * d];
    dx[..d].copy_from_slice(&dx0);
    for l in (0..cfg.n_layers).rev() {
        dx = layer_backward(cfg, &params.layers[l], &mut g.layers[l], &cache.layers[l], n, &dx);
    }
    apply_mask(&mut dx, &cache.emb_drop);
    for (i, &id) in cache.ids.iter().enumerate() {
        let dxi = &dx[i * d..(i + 1) * d];
        let te = &mut g.tok_emb.data[id as usize * d..(id as usize + 1) * d];
        for (t, v) in te.iter_mut().zip(dxi) {
            *t += v;
        }
        let pe = &mut g.pos_emb.data[i * d..(i + 1) * d];
        for (t, v) in pe.iter_mut().zip(dxi) {
            *t += v;
        }
    }
    Ok(loss)
}

/// Mean cross-entropy over `batch` and its exact gradient.
///
/// Example `i` uses dropout seed `derive_seed(seed, [i])`, the same seed
/// [`forward`] needs to reproduce its activations. Per-example gradients may be
/// computed concurrently; they are summed in batch order.
pub fn backward(
    params: &Params,
    cfg: &ModelConfig,
    batch: &[EncodedExample],
    mode: Mode,
    seed: u64,
    exec: Exec,
) -> Result<(f64, Params)> {
    if batch.is_empty() {
        return Err(Error::Config("backward needs a non-empty batch".into()));
    }
    let weight = 1.0 / batch.len() as f64;
    let per_example = exec.map_indexed(batch, |i, ex| -> Result<(f64, Params)> {
        let label = ex
            .label
            .ok_or_else(|| Error::Config(format!("batch example {i} has no label")))?;
        let mut g = Params::zeros(cfg);
        let loss = example_gradient(params, cfg, ex, label, mode, derive_seed(seed, &[i as u64]), weight, &mut g)?;
        Ok((loss, g))
    });
    let mut total = Params::zeros(cfg);
    let mut loss_sum = 0.0;
    for r in per_example {
        let (loss, g) = r?;
        loss_sum += loss;
        total.add_scaled(&g, 1.0);
    }
    Ok((loss_sum * weight, total))
}

/// Mean loss over `batch` using the same per-example seeds as [`backward`].
pub fn batch_loss(params: &Params, cfg: &ModelConfig, batch: &[EncodedExample], mode: Mode, seed: u64) -> Result<f64> {
    let mut total = 0.0;
    for (i, ex) in batch.iter().enumerate() {
        let label = ex
            .label
            .ok_or_else(|| Error::Config(format!("batch example {i} has no label")))?;
        let z = logits(params, cfg, ex, mode, derive_seed(seed, &[i as u64]))?;
        total += cross_entropy_loss(&z, label.index());
    }
    Ok(total / batch.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::init_params;
    use crate::tokenizer::{BOS, EOS, PAD};

    fn tiny() -> ModelConfig {
        ModelConfig {
            vocab_size: 300,
            max_len: 8,
            d_model: 8,
            n_heads: 2,
            n_layers: 2,
            d_ff: 12,
            n_labels: 2,
            dropout_rate: 0.2,
        }
    }

    fn example(ids: &[u32], max_len: usize, label: Label) -> EncodedExample {
        let mut full = vec![BOS];
        full.extend_from_slice(ids);
        full.push(EOS);
        let n = full.len();
        full.resize(max_len, PAD);
        let mut mask = vec![1u8; n];
        mask.resize(max_len, 0);
        EncodedExample {
            ids: full,
            mask,
            label: Some(label),
        }
    }

    #[test]
    fn logits_shape_and_finite() {
        let cfg = tiny();
        let p = init_params(&cfg, 1);
        let ex = example(&[10, 20, 30], 8, Label::Ai);
        let out = forward(&p, &cfg, &ex.ids, &ex.mask, Mode::Train, 3).unwrap();
        assert_eq!(out.logits.len(), 2);
        assert!(out.logits.iter().all(|z| z.is_finite()));
        assert_eq!(out.attention.len(), 2);
        assert_eq!(out.attention[0].len(), 2);
    }

    #[test]
    fn attention_rows_are_distributions() {
        let cfg = tiny();
        let p = init_params(&cfg, 2);
        let ex = example(&[5, 6, 7, 8], 8, Label::Human);
        let out = forward(&p, &cfg, &ex.ids, &ex.mask, Mode::Eval, 0).unwrap();
        for layer in &out.attention {
            for map in layer {
                assert_eq!(map.cols, 6);
                for i in 0..map.rows {
                    let row = map.row(i);
                    assert!(row.iter().all(|&w| w >= 0.0));
                    assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn padding_ids_do_not_matter() {
        let cfg = tiny();
        let p = init_params(&cfg, 4);
        let ex = example(&[11, 12], 8, Label::Ai);
        let base = forward(&p, &cfg, &ex.ids, &ex.mask, Mode::Eval, 0).unwrap().logits;
        let mut other = ex.clone();
        for i in 4..8 {
            other.ids[i] = 250 + i as u32;
        }
        let changed = forward(&p, &cfg, &other.ids, &other.mask, Mode::Eval, 0).unwrap().logits;
        assert_eq!(base, changed);
    }

    #[test]
    fn pruned_and_full_forward_agree() {
        let cfg = tiny();
        let p = init_params(&cfg, 5);
        let ex = example(&[1, 2, 3, 4, 5], 8, Label::Ai);
        let full = forward(&p, &cfg, &ex.ids, &ex.mask, Mode::Train, 9).unwrap().logits;
        let pruned = logits(&p, &cfg, &ex, Mode::Train, 9).unwrap();
        assert_eq!(full, pruned);
    }

    #[test]
    fn dropout_only_in_train_mode() {
        let cfg = tiny();
        let p = init_params(&cfg, 6);
        let ex = example(&[40, 41, 42], 8, Label::Ai);
        let e1 = logits(&p, &cfg, &ex, Mode::Eval, 1).unwrap();
        let e2 = logits(&p, &cfg, &ex, Mode::Eval, 2).unwrap();
        assert_eq!(e1, e2);
        let t1 = logits(&p, &cfg, &ex, Mode::Train, 1).unwrap();
        let t1b = logits(&p, &cfg, &ex, Mode::Train, 1).unwrap();
        let t2 = logits(&p, &cfg, &ex, Mode::Train, 2).unwrap();
        assert_eq!(t1, t1b);
        assert_ne!(t1, t2);
    }

    #[test]
    fn rejects_bad_shapes() {
        let cfg = tiny();
        let p = init_params(&cfg, 1);
        let ex = example(&[1], 8, Label::Ai);
        assert!(matches!(forward(&p, &cfg, &ex.ids[..7], &ex.mask, Mode::Eval, 0), Err(Error::Shape(_))));
        let mut holes = ex.mask.clone();
        holes[1] = 0;
        assert!(matches!(forward(&p, &cfg, &ex.ids, &holes, Mode::Eval, 0), Err(Error::Shape(_))));
        let mut big = ex.clone();
        big.ids[1] = 999;
        assert!(matches!(forward(&p, &cfg, &big.ids, &big.mask, Mode::Eval, 0), Err(Error::TokenRange { .. })));
    }

    #[test]
    fn predict_is_consistent() {
        let cfg = tiny();
        let p = init_params(&cfg, 8);
        let ex = example(&[70, 71], 8, Label::Ai);
        let a = predict(&p, &cfg, &ex).unwrap();
        let b = predict(&p, &cfg, &ex).unwrap();
        assert_eq!(a, b);
        let z = logits(&p, &cfg, &ex, Mode::Eval, 0).unwrap();
        let probs = softmax(&z);
        assert!((probs[0] + a.p_ai - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tied_logits_predict_human() {
        let cfg = tiny();
        let mut p = init_params(&cfg, 8);
        p.out_w.data.iter_mut().for_each(|w| *w = 0.0);
        p.out_b.data = vec![3.0, 3.0];
        let ex = example(&[70, 71], 8, Label::Ai);
        let pred = predict(&p, &cfg, &ex).unwrap();
        assert_eq!(pred.label, Label::Human);
        assert_eq!(pred.p_ai, 0.5);
    }

    #[test]
    fn empty_batch_is_error() {
        let cfg = tiny();
        let p = init_params(&cfg, 1);
        assert!(backward(&p, &cfg, &[], Mode::Eval, 0, Exec::Sequential).is_err());
    }

    #[test]
    fn duplicated_batch_has_same_gradient() {
        let cfg = tiny();
        let p = init_params(&cfg, 12);
        let batch = vec![example(&[3, 4, 5], 8, Label::Ai), example(&[9], 8, Label::Human)];
        let doubled: Vec<_> = batch.iter().chain(batch.iter()).cloned().collect();
        let (l1, g1) = backward(&p, &cfg, &batch, Mode::Eval, 0, Exec::Sequential).unwrap();
        let (l2, g2) = backward(&p, &cfg, &doubled, Mode::Eval, 0, Exec::Sequential).unwrap();
        assert!((l1 - l2).abs() < 1e-12);
        for (a, b) in g1.tensors().iter().zip(g2.tensors()) {
            for (x, y) in a.data.iter().zip(&b.data) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn unused_positions_get_zero_gradient() {
        let cfg = tiny();
        let p = init_params(&cfg, 13);
        let batch = vec![example(&[3, 4], 8, Label::Ai), example(&[9], 8, Label::Human)];
        let (_, g) = backward(&p, &cfg, &batch, Mode::Train, 5, Exec::Sequential).unwrap();
        let d = cfg.d_model;
        assert!(g.pos_emb.data[4 * d..].iter().all(|&x| x == 0.0));
        assert!(g.pos_emb.data[..d].iter().any(|&x| x != 0.0));
        // Token 100 never appears.
        assert!(g.tok_emb.data[100 * d..101 * d].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn sequential_and_parallel_gradients_identical() {
        let cfg = tiny();
        let p = init_params(&cfg, 14);
        let batch: Vec<_> = (0..6).map(|i| example(&[i + 10, i + 20], 8, Label::from_index((i % 2) as usize).unwrap())).collect();
        let (la, ga) = backward(&p, &cfg, &batch, Mode::Train, 3, Exec::Sequential).unwrap();
        let (lb, gb) = backward(&p, &cfg, &batch, Mode::Train, 3, Exec::Parallel).unwrap();
        assert_eq!(la, lb);
        assert_eq!(ga, gb);
    }

    #[test]
    fn gradient_matches_finite_difference_with_dropout() {
        // Dropout masks are fixed by the seed, so the loss stays differentiable.
        let cfg = tiny();
        let p = init_params(&cfg, 15);
        let batch = vec![example(&[3, 4, 5, 6], 8, Label::Ai), example(&[7, 8], 8, Label::Human)];
        let (_, g) = backward(&p, &cfg, &batch, Mode::Train, 21, Exec::Sequential).unwrap();
        let h = 1e-5;
        for (ti, idx) in [(2usize, 3usize), (5, 7), (10, 11), (26, 1), (28, 5)] {
            let mut plus = p.clone();
            plus.tensors_mut()[ti].data[idx] += h;
            let mut minus = p.clone();
            minus.tensors_mut()[ti].data[idx] -= h;
            let num = (batch_loss(&plus, &cfg, &batch, Mode::Train, 21).unwrap()
                - batch_loss(&minus, &cfg, &batch, Mode::Train, 21).unwrap())
                / (2.0 * h);
            let ana = g.tensors()[ti].data[idx];
            let rel = (num - ana).abs() / num.abs().max(ana.abs()).max(1e-8);
            assert!(rel < 1e-5, "tensor {ti}[{idx}]: {ana} vs {num}");
        }
    }
}
