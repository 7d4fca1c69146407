use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::RngExt;

use crate::error::{Error, Result};
use crate::seed;

/// Normalization floor for the cosine head.
pub const NORM_EPS: f64 = 1e-12;

/// Fully connected layer, `weight` is `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Affine {
    pub fn input_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.nrows()
    }
}

/// Scaled cosine classifier: `logit_k = scale * <w_k/|w_k|, f/|f|>`.
/// `lambda` is the distribution-weight exponent the expert is trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct CosineHead {
    pub weight: Array2<f64>,
    pub scale: f64,
    pub lambda: f64,
}

/// Shared MLP backbone (ReLU between affine layers, none after the last)
/// feeding `M` cosine expert heads.
#[derive(Debug, Clone)]
pub struct MultiExpertModel {
    backbone: Vec<Affine>,
    heads: Vec<CosineHead>,
    /// Bumped on every parameter mutation so stale caches are caught.
    version: u64,
}

impl PartialEq for MultiExpertModel {
    fn eq(&self, other: &Self) -> bool {
        self.backbone == other.backbone && self.heads == other.heads
    }
}

#[derive(Debug, Clone)]
pub struct ForwardCache {
    version: u64,
    /// Input to each backbone layer, then the feature matrix last.
    activations: Vec<Array2<f64>>,
    feat_norms: Array1<f64>,
    feat_hat: Array2<f64>,
    head_norms: Vec<Array1<f64>>,
    head_hat: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn batch_size(&self) -> usize {
        self.feat_hat.nrows()
    }
}

#[derive(Debug, Clone)]
pub struct ForwardOutput {
    /// One `batch x C` matrix per expert.
    pub logits: Vec<Array2<f64>>,
    pub cache: ForwardCache,
}

/// Parameter gradients, laid out like the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub backbone: Vec<Affine>,
    pub heads: Vec<Array2<f64>>,
}

impl Gradients {
    pub fn zeros_like(model: &MultiExpertModel) -> Self {
        Self {
            backbone: model
                .backbone
                .iter()
                .map(|l| Affine {
                    weight: Array2::zeros(l.weight.raw_dim()),
                    bias: Array1::zeros(l.bias.raw_dim()),
                })
                .collect(),
            heads: model
                .heads
                .iter()
                .map(|h| Array2::zeros(h.weight.raw_dim()))
                .collect(),
        }
    }

    pub fn accumulate(&mut self, other: &Gradients) {
        for (a, b) in self.backbone.iter_mut().zip(&other.backbone) {
            a.weight += &b.weight;
            a.bias += &b.bias;
        }
        for (a, b) in self.heads.iter_mut().zip(&other.heads) {
            *a += b;
        }
    }

    /// Flat views in the canonical order: per layer weight then bias, then heads.
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(2 * self.backbone.len() + self.heads.len());
        for l in &self.backbone {
            out.push(l.weight.as_slice().expect("standard layout"));
            out.push(l.bias.as_slice().expect("standard layout"));
        }
        for h in &self.heads {
            out.push(h.as_slice().expect("standard layout"));
        }
        out
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.slices().concat()
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }
}

fn xavier_uniform(rng: &mut impl rand::Rng, rows: usize, cols: usize) -> Array2<f64> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-bound..bound))
}

impl MultiExpertModel {
    /// Seeded initialization. `hidden` lists the backbone output widths; the
    /// last entry is the feature width. An empty list means the features are
    /// the raw inputs.
    pub fn init(
        input_dim: usize,
        hidden: &[usize],
        num_classes: usize,
        lambdas: &[f64],
        scale: f64,
        seed: u64,
    ) -> Result<Self> {
        if input_dim == 0 || num_classes == 0 || hidden.contains(&0) {
            return Err(Error::invalid("layer widths must be positive"));
        }
        let mut rng = seed::rng(seed);
        let mut backbone = Vec::with_capacity(hidden.len());
        let mut fan_in = input_dim;
        for &width in hidden {
            backbone.push(Affine {
                weight: xavier_uniform(&mut rng, width, fan_in),
                bias: Array1::zeros(width),
            });
            fan_in = width;
        }
        let heads = lambdas
            .iter()
            .map(|&lambda| {
                let mut weight = xavier_uniform(&mut rng, num_classes, fan_in);
                for mut row in weight.rows_mut() {
                    let norm = row.dot(&row).sqrt().max(NORM_EPS);
                    row /= norm;
                }
                CosineHead {
                    weight,
                    scale,
                    lambda,
                }
            })
            .collect();
        Self::from_parts(backbone, heads)
    }

    pub fn from_parts(backbone: Vec<Affine>, heads: Vec<CosineHead>) -> Result<Self> {
        if heads.is_empty() {
            return Err(Error::invalid("model needs at least one expert head"));
        }
        for (i, pair) in backbone.windows(2).enumerate() {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(Error::Dimension(format!(
                    "backbone layer {} outputs {} but layer {} expects {}",
                    i,
                    pair[0].output_dim(),
                    i + 1,
                    pair[1].input_dim()
                )));
            }
        }
        for (i, l) in backbone.iter().enumerate() {
            if l.bias.len() != l.output_dim() {
                return Err(Error::Dimension(format!("layer {i} bias length mismatch")));
            }
        }
        let classes = heads[0].weight.nrows();
        let feat = backbone
            .last()
            .map(Affine::output_dim)
            .unwrap_or_else(|| heads[0].weight.ncols());
        for (mu, h) in heads.iter().enumerate() {
            if h.weight.dim() != (classes, feat) {
                return Err(Error::Dimension(format!(
                    "head {mu} is {:?}, expected ({classes}, {feat})",
                    h.weight.dim()
                )));
            }
            if !h.scale.is_finite() || !h.lambda.is_finite() {
                return Err(Error::invalid(format!("head {mu} has non-finite scale or lambda")));
            }
        }
        let backbone = backbone
            .into_iter()
            .map(|l| Affine {
                weight: l.weight.as_standard_layout().into_owned(),
                bias: l.bias.as_standard_layout().into_owned(),
            })
            .collect();
        let heads = heads
            .into_iter()
            .map(|h| CosineHead {
                weight: h.weight.as_standard_layout().into_owned(),
                ..h
            })
            .collect();
        Ok(Self {
            backbone,
            heads,
            version: 0,
        })
    }

    pub fn backbone(&self) -> &[Affine] {
        &self.backbone
    }

    pub fn heads(&self) -> &[CosineHead] {
        &self.heads
    }

    pub fn num_experts(&self) -> usize {
        self.heads.len()
    }

    pub fn num_classes(&self) -> usize {
        self.heads[0].weight.nrows()
    }

    pub fn feature_dim(&self) -> usize {
        self.heads[0].weight.ncols()
    }

    pub fn input_dim(&self) -> usize {
        self.backbone
            .first()
            .map(Affine::input_dim)
            .unwrap_or_else(|| self.feature_dim())
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.heads.iter().map(|h| h.lambda).collect()
    }

    pub fn param_count(&self) -> usize {
        self.backbone
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum::<usize>()
            + self.heads.iter().map(|h| h.weight.len()).sum::<usize>()
    }

    /// Mutable flat views in the same order as [`Gradients::slices`].
    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.version += 1;
        let mut out = Vec::with_capacity(2 * self.backbone.len() + self.heads.len());
        for l in &mut self.backbone {
            out.push(l.weight.as_slice_mut().expect("standard layout"));
            out.push(l.bias.as_slice_mut().expect("standard layout"));
        }
        for h in &mut self.heads {
            out.push(h.weight.as_slice_mut().expect("standard layout"));
        }
        out
    }

    pub fn param_slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(2 * self.backbone.len() + self.heads.len());
        for l in &self.backbone {
            out.push(l.weight.as_slice().expect("standard layout"));
            out.push(l.bias.as_slice().expect("standard layout"));
        }
        for h in &self.heads {
            out.push(h.weight.as_slice().expect("standard layout"));
        }
        out
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.param_slices().concat()
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Dimension(format!(
                "{} values for {} parameters",
                flat.len(),
                self.param_count()
            )));
        }
        let mut offset = 0;
        for slot in self.param_slices_mut() {
            slot.copy_from_slice(&flat[offset..offset + slot.len()]);
            offset += slot.len();
        }
        Ok(())
    }

    pub fn forward(&self, inputs: ArrayView2<'_, f64>) -> Result<ForwardOutput> {
        if inputs.ncols() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "input has {} features, model expects {}",
                inputs.ncols(),
                self.input_dim()
            )));
        }
        let last = self.backbone.len();
        let mut activations = Vec::with_capacity(last + 1);
        activations.push(inputs.to_owned());
        for (i, layer) in self.backbone.iter().enumerate() {
            let mut z = activations[i].dot(&layer.weight.t());
            z += &layer.bias;
            if i + 1 < last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            activations.push(z);
        }
        let (feat_hat, feat_norms) = normalize_rows(&activations[last]);
        let mut logits = Vec::with_capacity(self.heads.len());
        let mut head_hat = Vec::with_capacity(self.heads.len());
        let mut head_norms = Vec::with_capacity(self.heads.len());
        for head in &self.heads {
            let (w_hat, w_norms) = normalize_rows(&head.weight);
            let mut v = feat_hat.dot(&w_hat.t());
            v *= head.scale;
            logits.push(v);
            head_hat.push(w_hat);
            head_norms.push(w_norms);
        }
        Ok(ForwardOutput {
            logits,
            cache: ForwardCache {
                version: self.version,
                activations,
                feat_norms,
                feat_hat,
                head_norms,
                head_hat,
            },
        })
    }

    /// Per-expert logits without keeping a cache.
    pub fn predict(&self, inputs: ArrayView2<'_, f64>) -> Result<Vec<Array2<f64>>> {
        Ok(self.forward(inputs)?.logits)
    }

    /// Backpropagates per-expert logit gradients. Every head's feature
    /// gradient sums into the shared backbone.
    pub fn backward(&self, cache: &ForwardCache, dlogits: &[Array2<f64>]) -> Result<Gradients> {
        if cache.version != self.version {
            return Err(Error::invalid(
                "forward cache is stale: parameters changed since the forward pass",
            ));
        }
        if dlogits.len() != self.heads.len() {
            return Err(Error::Dimension(format!(
                "{} logit gradients for {} experts",
                dlogits.len(),
                self.heads.len()
            )));
        }
        let batch = cache.batch_size();
        let mut grads = Gradients::zeros_like(self);
        let mut d_feat_hat = Array2::<f64>::zeros(cache.feat_hat.raw_dim());
        for (mu, (head, g)) in self.heads.iter().zip(dlogits).enumerate() {
            if g.dim() != (batch, self.num_classes()) {
                return Err(Error::Dimension(format!(
                    "expert {mu} logit gradient is {:?}, expected ({batch}, {})",
                    g.dim(),
                    self.num_classes()
                )));
            }
            let w_hat = &cache.head_hat[mu];
            d_feat_hat.scaled_add(head.scale, &g.dot(w_hat));
            let d_w_hat = g.t().dot(&cache.feat_hat) * head.scale;
            grads.heads[mu] = normalize_rows_backward(w_hat, &cache.head_norms[mu], &d_w_hat);
        }
        let mut upstream = normalize_rows_backward(&cache.feat_hat, &cache.feat_norms, &d_feat_hat);
        let last = self.backbone.len();
        for i in (0..last).rev() {
            if i + 1 < last {
                Zip::from(&mut upstream)
                    .and(&cache.activations[i + 1])
                    .for_each(|d, &a| {
                        if a <= 0.0 {
                            *d = 0.0;
                        }
                    });
            }
            let input = &cache.activations[i];
            grads.backbone[i].weight = upstream.t().dot(input);
            grads.backbone[i].bias = upstream.sum_axis(Axis(0));
            if i > 0 {
                upstream = upstream.dot(&self.backbone[i].weight);
            }
        }
        Ok(grads)
    }
}

/// Row-wise `x / max(|x|, eps)`; returns normalized rows and the clamped norms.
fn normalize_rows(x: &Array2<f64>) -> (Array2<f64>, Array1<f64>) {
    let norms = x.map_axis(Axis(1), |r| r.dot(&r).sqrt().max(NORM_EPS));
    let hat = x / &norms.view().insert_axis(Axis(1));
    (hat, norms)
}

/// Backward of [`normalize_rows`]: `(g - x_hat (x_hat . g)) / |x|` per row, or
/// `g / eps` where the norm was clamped.
fn normalize_rows_backward(hat: &Array2<f64>, norms: &Array1<f64>, d_hat: &Array2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros(hat.raw_dim());
    for (((mut o, h), g), &n) in out
        .rows_mut()
        .into_iter()
        .zip(hat.rows())
        .zip(d_hat.rows())
        .zip(norms)
    {
        let raw_norm = h.dot(&h).sqrt() * n;
        if raw_norm > NORM_EPS {
            let proj = h.dot(&g);
            Zip::from(&mut o)
                .and(&g)
                .and(&h)
                .for_each(|o, &g, &h| *o = (g - h * proj) / n);
        } else {
            Zip::from(&mut o).and(&g).for_each(|o, &g| *o = g / n);
        }
    }
    out
}
