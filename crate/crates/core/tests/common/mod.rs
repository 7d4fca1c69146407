#![allow(dead_code)]

use mdcs::loss::{DistillConfig, DistributionWeight};
use mdcs::net::{Affine, Gradients, MultiExpertModel};
use ndarray::{concatenate, Array2, Axis};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const H: f64 = 1e-3;
pub const TOL: f64 = 1e-4;
pub const LAYER_GAIN: f64 = 10.0;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, spread: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-spread..spread))
}

/// Small model and batch for gradient checks: 3-d inputs, hidden widths 6
/// and 5, four classes, two experts at cosine scale 4, five instances whose
/// strong view is the weak view plus uniform noise.
pub struct Problem {
    pub model: MultiExpertModel,
    pub weak: Array2<f64>,
    pub strong: Array2<f64>,
    pub labels: Vec<usize>,
    pub weights: Vec<DistributionWeight>,
}

pub fn problem(seed: u64) -> Problem {
    let mut r = rng(seed);
    let model = MultiExpertModel::init(3, &[6, 5], 4, &[-0.5, 2.0], 4.0, seed).unwrap();
    let weak = random_matrix(&mut r, 5, 3, 2.0);
    let strong = &weak + &random_matrix(&mut r, 5, 3, 1.0);
    let labels = (0..5).map(|_| r.random_range(0..4)).collect();
    let counts = [40, 12, 5, 2];
    let weights = DistributionWeight::for_lambdas(&model.lambdas(), &counts).unwrap();
    generic_point(Problem {
        model,
        weak,
        strong,
        labels,
        weights,
    })
}

/// Scales every backbone layer and head by [`LAYER_GAIN`] (biases by the
/// accumulated gain). ReLU layers and the two normalizations make this leave
/// the logits unchanged, while the loss gets flatter per unit step in each
/// parameter, which keeps finite-difference truncation error small.
pub fn rescale(model: &MultiExpertModel) -> MultiExpertModel {
    let mut backbone: Vec<Affine> = model.backbone().to_vec();
    let mut gain = 1.0;
    for layer in backbone.iter_mut() {
        gain *= LAYER_GAIN;
        layer.weight *= LAYER_GAIN;
        layer.bias *= gain;
    }
    let mut heads = model.heads().to_vec();
    for head in heads.iter_mut() {
        head.weight *= LAYER_GAIN;
    }
    MultiExpertModel::from_parts(backbone, heads).unwrap()
}

/// Moves a problem away from the points where the objective is not
/// differentiable, so that central differences measure the gradient rather
/// than a jump. After [`rescale`], each ReLU unit's bias is placed in the
/// middle of the widest interior gap of its pre-activations over both views
/// (keeping a mix of active and inactive rows), and a label is moved off any
/// class involved in a near-tie of an expert's confident-set decision.
pub fn generic_point(mut p: Problem) -> Problem {
    p.model = rescale(&p.model);
    let mut backbone: Vec<Affine> = p.model.backbone().to_vec();
    let mut h = concatenate(Axis(0), &[p.weak.view(), p.strong.view()]).unwrap();
    let relu_layers = backbone.len().saturating_sub(1);
    for layer in backbone.iter_mut().take(relu_layers) {
        let a = h.dot(&layer.weight.t());
        for j in 0..a.ncols() {
            let mut cuts: Vec<f64> = a.column(j).iter().map(|v| -v).collect();
            cuts.sort_by(f64::total_cmp);
            let (lo, hi) = cuts
                .windows(2)
                .map(|w| (w[0], w[1]))
                .max_by(|x, y| (x.1 - x.0).total_cmp(&(y.1 - y.0)))
                .unwrap();
            layer.bias[j] = 0.5 * (lo + hi);
        }
        h = (a + &layer.bias).mapv(|v| v.max(0.0));
    }
    p.model = MultiExpertModel::from_parts(backbone, p.model.heads().to_vec()).unwrap();
    let logits = p.model.predict(p.weak.view()).unwrap();
    let classes = p.weights[0].num_classes();
    for i in 0..p.labels.len() {
        let mut tied = vec![false; classes];
        for (l, dw) in logits.iter().zip(&p.weights) {
            let adj: Vec<f64> = l.row(i).iter().zip(dw.offsets()).map(|(v, w)| v + w).collect();
            let mut order: Vec<usize> = (0..classes).collect();
            order.sort_by(|&x, &y| adj[y].total_cmp(&adj[x]));
            if adj[order[0]] - adj[order[1]] < 0.05 {
                tied[order[0]] = true;
                tied[order[1]] = true;
            }
        }
        if tied[p.labels[i]] {
            p.labels[i] = tied.iter().position(|t| !t).expect("some class is not tied");
        }
    }
    p
}

pub fn objective(p: &Problem, model: &MultiExpertModel, cfg: &DistillConfig) -> (f64, Vec<f64>, Gradients) {
    let (b, g) = mdcs::loss::model_objective(model, p.weak.view(), p.strong.view(), &p.labels, &p.weights, cfg).unwrap();
    let cs = b.experts.iter().map(|e| e.cs).sum::<f64>();
    (b.total, vec![cs], g)
}
