//! Classical head: flattened feature map → bias-free linear layer → softmax
//! cross-entropy, trained with Adam. The same optimizer also drives the
//! quantum rotation angles; it only sees flat parameter/gradient slices.

use crate::error::{Error, Result};
use crate::quanvolution::FeatureMap;
use crate::rng::SplitMix64;

/// Bias-free linear layer `[num_classes × num_features]`, so the parameter
/// count is exactly classes · features.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead {
    num_classes: usize,
    num_features: usize,
    weights: Vec<f64>,
}

impl ClassifierHead {
    /// Weights uniform on `[−a, a]` with `a = 1/√num_features`, drawn from
    /// the given stream.
    pub fn init(num_classes: usize, num_features: usize, rng: &mut SplitMix64) -> Self {
        let a = 1.0 / (num_features as f64).sqrt();
        let weights = (0..num_classes * num_features)
            .map(|_| (rng.next_f64() * 2.0 - 1.0) * a)
            .collect();
        Self {
            num_classes,
            num_features,
            weights,
        }
    }

    pub fn from_weights(num_classes: usize, num_features: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != num_classes * num_features {
            return Err(Error::contract(format!(
                "head needs {} weights, got {}",
                num_classes * num_features,
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::contract("non-finite head weight"));
        }
        Ok(Self {
            num_classes,
            num_features,
            weights,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    /// Row-major `[class][feature]` weight slice.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    /// `logits = W · x` for a flat feature vector.
    pub fn logits(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.num_features {
            return Err(Error::contract(format!(
                "head expects {} features, got {}",
                self.num_features,
                features.len()
            )));
        }
        Ok(self
            .weights
            .chunks_exact(self.num_features)
            .map(|row| row.iter().zip(features).map(|(w, x)| w * x).sum())
            .collect())
    }
}

/// Logits for a feature map, flattened in the map's documented order
/// (channel-major, then row-major over the grid).
pub fn head_forward(fm: &FeatureMap, head: &ClassifierHead) -> Result<Vec<f64>> {
    head.logits(fm.values())
}

/// Gradients through the linear layer for one sample: returns
/// `(dW [C×F], dx [F])` given upstream `dlogits [C]`.
pub fn head_backward(
    head: &ClassifierHead,
    features: &[f64],
    dlogits: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if features.len() != head.num_features() || dlogits.len() != head.num_classes() {
        return Err(Error::contract("head_backward shape mismatch"));
    }
    let mut dweights = vec![0.0; head.weights().len()];
    let mut dfeatures = vec![0.0; features.len()];
    for (c, &dl) in dlogits.iter().enumerate() {
        let row = &head.weights()[c * features.len()..(c + 1) * features.len()];
        let drow = &mut dweights[c * features.len()..(c + 1) * features.len()];
        for f in 0..features.len() {
            drow[f] = dl * features[f];
            dfeatures[f] += dl * row[f];
        }
    }
    Ok((dweights, dfeatures))
}

/// Mean softmax cross-entropy over a batch, with the gradient w.r.t. the
/// logits: `dlogits = (softmax − one-hot) / batch_size`. Stable via
/// max-subtraction.
pub fn cross_entropy(logits: &[Vec<f64>], labels: &[usize]) -> Result<(f64, Vec<Vec<f64>>)> {
    if logits.is_empty() || logits.len() != labels.len() {
        return Err(Error::contract(format!(
            "batch of {} logit rows vs {} labels",
            logits.len(),
            labels.len()
        )));
    }
    let classes = logits[0].len();
    let batch = logits.len() as f64;
    let mut loss = 0.0;
    let mut dlogits = Vec::with_capacity(logits.len());
    for (row, &label) in logits.iter().zip(labels) {
        if row.len() != classes {
            return Err(Error::contract("ragged logit batch"));
        }
        if label >= classes {
            return Err(Error::contract(format!(
                "label {label} out of range for {classes} classes"
            )));
        }
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|l| (l - max).exp()).collect();
        let denom: f64 = exps.iter().sum();
        loss += denom.ln() - (row[label] - max);
        let mut drow: Vec<f64> = exps.iter().map(|e| e / denom / batch).collect();
        drow[label] -= 1.0 / batch;
        dlogits.push(drow);
    }
    Ok((loss / batch, dlogits))
}

/// Adam optimizer state for one flat parameter group.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    steps: u64,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl AdamState {
    /// Zeroed moments with the standard defaults β1=0.9, β2=0.999, ε=1e-8.
    pub fn new(num_params: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            steps: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.steps
    }

    /// One bias-corrected Adam update, in place.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::contract(format!(
                "adam state holds {} params, got {} params / {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        self.steps += 1;
        let bc1 = 1.0 - self.beta1.powi(self.steps as i32);
        let bc2 = 1.0 - self.beta2.powi(self.steps as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_give_zero_logits() {
        let head = ClassifierHead::from_weights(10, 6, vec![0.0; 60]).unwrap();
        assert_eq!(head.logits(&[1.0; 6]).unwrap(), vec![0.0; 10]);
    }

    #[test]
    fn single_weight_picks_one_feature() {
        let mut w = vec![0.0; 20];
        w[2 * 4 + 3] = 1.0; // class 2, feature 3
        let head = ClassifierHead::from_weights(5, 4, w).unwrap();
        let logits = head.logits(&[0.5, -0.25, 0.125, 0.75]).unwrap();
        assert_eq!(logits, vec![0.0, 0.0, 0.75, 0.0, 0.0]);
    }

    #[test]
    fn logits_match_triple_loop_oracle() {
        let mut rng = SplitMix64::new(99);
        let (classes, feats) = (10, 12);
        let head = ClassifierHead::init(classes, feats, &mut rng);
        let x: Vec<f64> = (0..feats).map(|_| rng.next_f64() * 2.0 - 1.0).collect();

        let mut oracle = vec![0.0; classes];
        for c in 0..classes {
            for f in 0..feats {
                oracle[c] += head.weights()[c * feats + f] * x[f];
            }
        }
        let logits = head.logits(&x).unwrap();
        for c in 0..classes {
            assert!((logits[c] - oracle[c]).abs() < 1e-12);
        }
    }

    #[test]
    fn init_scale_matches_feature_count() {
        let mut rng = SplitMix64::new(4);
        let head = ClassifierHead::init(10, 169 * 4, &mut rng);
        assert_eq!(head.weights().len(), 6760);
        let a = 1.0 / (676.0f64).sqrt();
        assert!(head.weights().iter().all(|w| w.abs() <= a));
    }

    #[test]
    fn uniform_logits_cost_ln_ten() {
        let (loss, dlogits) = cross_entropy(&[vec![0.25; 10]], &[3]).unwrap();
        assert!((loss - 10.0f64.ln()).abs() < 1e-12);
        // softmax uniform: gradient 0.1 everywhere except label 0.1-1.
        assert!((dlogits[0][0] - 0.1).abs() < 1e-12);
        assert!((dlogits[0][3] + 0.9).abs() < 1e-12);
    }

    #[test]
    fn confident_correct_logit_costs_nothing() {
        let mut row = vec![0.0; 10];
        row[7] = 50.0;
        let (loss, _) = cross_entropy(&[row], &[7]).unwrap();
        assert!(loss < 1e-9);
    }

    #[test]
    fn cross_entropy_gradient_matches_finite_differences() {
        let mut rng = SplitMix64::new(17);
        let batch: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..10).map(|_| rng.next_f64() * 4.0 - 2.0).collect())
            .collect();
        let labels = [2usize, 9];
        let (_, dlogits) = cross_entropy(&batch, &labels).unwrap();
        let h = 1e-6;
        for s in 0..2 {
            for c in 0..10 {
                let mut plus = batch.clone();
                plus[s][c] += h;
                let mut minus = batch.clone();
                minus[s][c] -= h;
                let fd = (cross_entropy(&plus, &labels).unwrap().0
                    - cross_entropy(&minus, &labels).unwrap().0)
                    / (2.0 * h);
                assert!(
                    (dlogits[s][c] - fd).abs() < 1e-6,
                    "sample {s} class {c}: {} vs {fd}",
                    dlogits[s][c]
                );
            }
        }
    }

    #[test]
    fn label_out_of_range_is_rejected() {
        assert!(cross_entropy(&[vec![0.0; 10]], &[10]).is_err());
        assert!(cross_entropy(&[], &[]).is_err());
    }

    #[test]
    fn head_backward_matches_finite_differences() {
        let mut rng = SplitMix64::new(31);
        let head = ClassifierHead::init(4, 6, &mut rng);
        let x: Vec<f64> = (0..6).map(|_| rng.next_f64() * 2.0 - 1.0).collect();
        let label = 1usize;

        let loss_of = |head: &ClassifierHead, x: &[f64]| {
            cross_entropy(&[head.logits(x).unwrap()], &[label]).unwrap().0
        };
        let (_, dlogits) = cross_entropy(&[head.logits(&x).unwrap()], &[label]).unwrap();
        let (dw, dx) = head_backward(&head, &x, &dlogits[0]).unwrap();

        let h = 1e-6;
        for i in 0..dw.len() {
            let mut plus = head.clone();
            plus.weights_mut()[i] += h;
            let mut minus = head.clone();
            minus.weights_mut()[i] -= h;
            let fd = (loss_of(&plus, &x) - loss_of(&minus, &x)) / (2.0 * h);
            assert!((dw[i] - fd).abs() < 1e-6, "weight {i}");
        }
        for f in 0..x.len() {
            let mut plus = x.clone();
            plus[f] += h;
            let mut minus = x.clone();
            minus[f] -= h;
            let fd = (loss_of(&head, &plus) - loss_of(&head, &minus)) / (2.0 * h);
            assert!((dx[f] - fd).abs() < 1e-6, "feature {f}");
        }
    }

    #[test]
    fn adam_examples() {
        // Zero gradient on zero moments leaves parameters alone.
        let mut st = AdamState::new(3, 0.01);
        let mut params = [0.5, -0.5, 0.0];
        st.step(&mut params, &[0.0; 3]).unwrap();
        assert_eq!(params, [0.5, -0.5, 0.0]);

        // Hand-evaluated first step: m̂ = v̂ = 1, so Δ = −lr/(1+ε).
        let mut st = AdamState::new(1, 0.01);
        let mut p = [0.0];
        st.step(&mut p, &[1.0]).unwrap();
        let expected = -0.01 / (1.0 + 1e-8);
        assert!((p[0] - expected).abs() < 1e-15);

        // Purity given identical state.
        let mut a = AdamState::new(2, 0.01);
        let mut b = a.clone();
        let mut pa = [0.1, 0.2];
        let mut pb = [0.1, 0.2];
        a.step(&mut pa, &[0.3, -0.4]).unwrap();
        b.step(&mut pb, &[0.3, -0.4]).unwrap();
        assert_eq!(pa, pb);
        assert_eq!(a, b);
    }

    #[test]
    fn initial_loss_sits_near_ln_ten() {
        let mut rng = SplitMix64::new(1234);
        let feats = 169 * 4;
        let head = ClassifierHead::init(10, feats, &mut rng);
        let mut total = 0.0;
        let trials = 20;
        for _ in 0..trials {
            let x: Vec<f64> = (0..feats).map(|_| rng.next_f64() * 2.0 - 1.0).collect();
            let (loss, _) = cross_entropy(&[head.logits(&x).unwrap()], &[rng.below(10) as usize])
                .unwrap();
            total += loss;
        }
        assert!((total / trials as f64 - 10.0f64.ln()).abs() < 0.5);
    }
}
