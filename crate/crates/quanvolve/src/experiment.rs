//! The full training protocol: mini-batch loop over pre-encoded patches,
//! analytic head gradients plus parameter-shift angle gradients, Adam
//! updates, per-epoch validation, a final test pass, metrics logging and
//! seed-sweep aggregation.

use std::path::Path;
use std::time::Instant;

use crate::accounting;
use crate::classifier::{cross_entropy, head_backward, AdamState, ClassifierHead};
use crate::data::{EncodedDataset, EDGE, NUM_CLASSES};
use crate::encoders::{EncoderKind, ThresholdConfig};
use crate::error::{Error, Result};
use crate::quanvolution::{
    forward, generate_random_circuit, parameter_shift_grad, FilterSpec, VariationalCircuitSpec,
};
use crate::rng::{derive_seed, SplitMix64, TAG_EPOCH, TAG_WEIGHTS};

/// One experiment cell of the sweep grid. Defaults follow the training
/// protocol: 50 epochs of 100 steps, 50 validation steps, batch size 2,
/// learning rate 0.01.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub encoder: EncoderKind,
    pub filter: FilterSpec,
    pub rotations: usize,
    pub circuit_seed: u64,
    pub trainable: bool,
    pub epochs: usize,
    pub steps_per_epoch: usize,
    pub val_steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub threshold: ThresholdConfig,
    pub dataset_seed: u64,
}

impl ExperimentConfig {
    pub fn new(
        encoder: EncoderKind,
        filter: FilterSpec,
        rotations: usize,
        circuit_seed: u64,
        trainable: bool,
    ) -> Self {
        Self {
            encoder,
            filter,
            rotations,
            circuit_seed,
            trainable,
            epochs: 50,
            steps_per_epoch: 100,
            val_steps: 50,
            batch_size: 2,
            lr: 0.01,
            threshold: ThresholdConfig::default(),
            dataset_seed: 42,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.steps_per_epoch == 0 || self.val_steps == 0 || self.batch_size == 0 {
            return Err(Error::config(
                "steps_per_epoch, val_steps and batch_size must be at least 1",
            ));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::config(format!("bad learning rate {}", self.lr)));
        }
        Ok(())
    }
}

/// Metrics of one completed epoch. `wall_secs` is informational and is
/// excluded from determinism guarantees and the CSV output.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    pub wall_secs: f64,
}

/// Per-epoch rows plus the final test result.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsLog {
    pub epochs: Vec<EpochMetrics>,
    pub test_loss: f64,
    pub test_acc: f64,
}

impl MetricsLog {
    /// CSV with columns `epoch,train_loss,train_acc,val_loss,val_acc` and a
    /// final `test,,,loss,acc` row. Floats use the shortest round-trippable
    /// form, so parsing the text back reproduces the exact values.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,train_acc,val_loss,val_acc\n");
        for row in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                row.epoch, row.train_loss, row.train_acc, row.val_loss, row.val_acc
            ));
        }
        out.push_str(&format!("test,,,{},{}\n", self.test_loss, self.test_acc));
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |line: &str, what: &str| {
            Error::Decode(format!("metrics CSV: {what} in line {line:?}"))
        };
        let mut epochs = Vec::new();
        let mut test: Option<(f64, f64)> = None;
        for line in text.lines().skip(1) {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(bad(line, "expected 5 fields"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(line, "bad float"));
            if fields[0] == "test" {
                test = Some((num(fields[3])?, num(fields[4])?));
            } else {
                epochs.push(EpochMetrics {
                    epoch: fields[0].parse().map_err(|_| bad(line, "bad epoch"))?,
                    train_loss: num(fields[1])?,
                    train_acc: num(fields[2])?,
                    val_loss: num(fields[3])?,
                    val_acc: num(fields[4])?,
                    wall_secs: 0.0,
                });
            }
        }
        let (test_loss, test_acc) =
            test.ok_or_else(|| Error::Decode("metrics CSV has no test row".into()))?;
        Ok(Self {
            epochs,
            test_loss,
            test_acc,
        })
    }
}

/// A trained (or frozen) model: the variational circuit with its current
/// angles plus the classical head.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub encoder: EncoderKind,
    pub filter: FilterSpec,
    pub circuit: VariationalCircuitSpec,
    pub head: ClassifierHead,
    pub patches_per_image: usize,
}

const QMDL_MAGIC: &[u8; 4] = b"QMDL";
const QMDL_VERSION: u8 = 1;

impl TrainedModel {
    /// Binary model file: fixed header, then the f64 LE parameter dump,
    /// angles first, head weights after.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(QMDL_MAGIC);
        bytes.push(QMDL_VERSION);
        bytes.push(self.encoder.code());
        bytes.push(self.filter.n() as u8);
        bytes.push(self.circuit.num_qubits() as u8);
        bytes.push(self.filter.filter_edge() as u8);
        bytes.push(self.filter.stride() as u8);
        bytes.push(u8::from(self.circuit.trainable()));
        bytes.push(self.head.num_classes() as u8);
        bytes.extend_from_slice(&(self.circuit.num_rotations() as u16).to_le_bytes());
        bytes.extend_from_slice(&(self.patches_per_image as u16).to_le_bytes());
        bytes.extend_from_slice(&self.circuit.seed().to_le_bytes());
        for a in self.circuit.angles() {
            bytes.extend_from_slice(&a.to_le_bytes());
        }
        for w in self.head.weights() {
            bytes.extend_from_slice(&w.to_le_bytes());
        }
        Ok(std::fs::write(path, bytes)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        let fail = |msg: &str| Error::CacheFormat(format!("{}: {msg}", path.display()));
        if bytes.len() < 24 || &bytes[0..4] != QMDL_MAGIC {
            return Err(fail("not a QMDL model file"));
        }
        if bytes[4] != QMDL_VERSION {
            return Err(fail("unsupported version"));
        }
        let encoder = EncoderKind::from_code(bytes[5])?;
        let num_qubits = usize::from(bytes[7]);
        let filter = FilterSpec::new(usize::from(bytes[8]), usize::from(bytes[9]))?;
        let trainable = bytes[10] != 0;
        let num_classes = usize::from(bytes[11]);
        let rotations = usize::from(u16::from_le_bytes([bytes[12], bytes[13]]));
        let patches = usize::from(u16::from_le_bytes([bytes[14], bytes[15]]));
        let seed = u64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes"));

        let num_weights = num_classes * num_qubits * patches;
        let expected = 24 + 8 * (rotations + num_weights);
        if bytes.len() != expected {
            return Err(fail(&format!(
                "expected {expected} bytes, found {}",
                bytes.len()
            )));
        }
        let mut floats = bytes[24..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
        let angles: Vec<f64> = floats.by_ref().take(rotations).collect();
        let weights: Vec<f64> = floats.collect();

        let mut circuit = generate_random_circuit(seed, num_qubits, rotations)?;
        circuit.set_angles(angles)?;
        circuit.set_trainable(trainable);
        Ok(Self {
            encoder,
            filter,
            circuit,
            head: ClassifierHead::from_weights(num_classes, num_qubits * patches, weights)?,
            patches_per_image: patches,
        })
    }

    /// Mean loss and accuracy over a full encoded dataset.
    pub fn evaluate(&self, data: &EncodedDataset, batch_size: usize) -> Result<(f64, f64)> {
        check_cache(self.encoder, &self.filter, self.circuit.num_qubits(), data)?;
        let grid = self.filter.output_grid(EDGE, EDGE)?;
        evaluate_indices(
            &self.circuit,
            &self.head,
            data,
            &(0..data.len()).collect::<Vec<_>>(),
            batch_size.max(1),
            grid,
        )
    }
}

/// Argmax with ties broken by the lowest class index.
fn predict(logits: &[f64]) -> usize {
    let mut best = 0;
    for (c, &l) in logits.iter().enumerate().skip(1) {
        if l > logits[best] {
            best = c;
        }
    }
    best
}

fn check_cache(
    encoder: EncoderKind,
    filter: &FilterSpec,
    num_qubits: usize,
    data: &EncodedDataset,
) -> Result<()> {
    if data.encoder() != encoder {
        return Err(Error::CacheMismatch(format!(
            "cache holds {} states, configuration wants {}",
            data.encoder(),
            encoder
        )));
    }
    if data.n() != filter.n() {
        return Err(Error::CacheMismatch(format!(
            "cache encoded with filter edge {}, configuration wants {}",
            1u32 << data.n(),
            filter.filter_edge()
        )));
    }
    let (rows, cols) = filter.output_grid(EDGE, EDGE)?;
    if data.patches_per_image() != rows * cols {
        return Err(Error::CacheMismatch(format!(
            "cache has {} patches per image, filter implies {}",
            data.patches_per_image(),
            rows * cols
        )));
    }
    if data.num_qubits() != num_qubits {
        return Err(Error::CacheMismatch(format!(
            "cache states have {} qubits, configuration wants {num_qubits}",
            data.num_qubits()
        )));
    }
    if data.is_empty() {
        return Err(Error::CacheMismatch("cache holds no images".into()));
    }
    Ok(())
}

/// Logits and flattened features for one image.
fn sample_forward(
    circuit: &VariationalCircuitSpec,
    head: &ClassifierHead,
    data: &EncodedDataset,
    image: usize,
    grid: (usize, usize),
) -> Result<(Vec<f64>, Vec<f64>)> {
    let fm = forward(data.patch_states(image), circuit, grid)?;
    let logits = head.logits(fm.values())?;
    let (_, values) = (fm.channels(), fm.values().to_vec());
    Ok((logits, values))
}

fn evaluate_indices(
    circuit: &VariationalCircuitSpec,
    head: &ClassifierHead,
    data: &EncodedDataset,
    indices: &[usize],
    batch_size: usize,
    grid: (usize, usize),
) -> Result<(f64, f64)> {
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    for chunk in indices.chunks(batch_size) {
        let mut logits = Vec::with_capacity(chunk.len());
        let mut labels = Vec::with_capacity(chunk.len());
        for &i in chunk {
            let (l, _) = sample_forward(circuit, head, data, i, grid)?;
            if predict(&l) == usize::from(data.label(i)) {
                correct += 1;
            }
            logits.push(l);
            labels.push(usize::from(data.label(i)));
        }
        let (mean_loss, _) = cross_entropy(&logits, &labels)?;
        loss_sum += mean_loss * chunk.len() as f64;
    }
    Ok((
        loss_sum / indices.len() as f64,
        correct as f64 / indices.len() as f64,
    ))
}

/// Runs the full protocol against pre-encoded splits and returns the metrics
/// together with the final model. Deterministic given the config's circuit
/// and dataset seeds (wall-clock fields aside). `on_epoch` fires after each
/// completed epoch.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    train: &EncodedDataset,
    val: &EncodedDataset,
    test: &EncodedDataset,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<(MetricsLog, TrainedModel)> {
    cfg.validate()?;
    let n = cfg.filter.n();
    let num_qubits = accounting::qubit_count(cfg.encoder, n)? as usize;
    for data in [train, val, test] {
        check_cache(cfg.encoder, &cfg.filter, num_qubits, data)?;
    }
    let grid = cfg.filter.output_grid(EDGE, EDGE)?;
    let patches = grid.0 * grid.1;
    let num_features = num_qubits * patches;

    let mut circuit = generate_random_circuit(cfg.circuit_seed, num_qubits, cfg.rotations)?;
    circuit.set_trainable(cfg.trainable);
    let mut head = ClassifierHead::init(
        NUM_CLASSES,
        num_features,
        &mut SplitMix64::new(derive_seed(cfg.dataset_seed, TAG_WEIGHTS)),
    );
    let mut adam_head = AdamState::new(head.weights().len(), cfg.lr);
    let mut adam_angles = AdamState::new(circuit.num_rotations(), cfg.lr);

    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut val_cursor = 0usize;
    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        let mut order: Vec<usize> = (0..train.len()).collect();
        SplitMix64::new(derive_seed(cfg.dataset_seed, TAG_EPOCH + epoch as u64))
            .shuffle(&mut order);

        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for step in 0..cfg.steps_per_epoch {
            let batch: Vec<usize> = (0..cfg.batch_size)
                .map(|k| order[(step * cfg.batch_size + k) % order.len()])
                .collect();

            let mut logits = Vec::with_capacity(batch.len());
            let mut features = Vec::with_capacity(batch.len());
            let mut labels = Vec::with_capacity(batch.len());
            for &i in &batch {
                let (l, f) = sample_forward(&circuit, &head, train, i, grid)?;
                if predict(&l) == usize::from(train.label(i)) {
                    correct += 1;
                }
                logits.push(l);
                features.push(f);
                labels.push(usize::from(train.label(i)));
            }
            let (loss, dlogits) = cross_entropy(&logits, &labels)?;
            loss_sum += loss;

            let mut dweights = vec![0.0; head.weights().len()];
            let mut dangles = vec![0.0; circuit.num_rotations()];
            for (s, &i) in batch.iter().enumerate() {
                let (dw, dx) = head_backward(&head, &features[s], &dlogits[s])?;
                for (acc, g) in dweights.iter_mut().zip(&dw) {
                    *acc += g;
                }
                if cfg.trainable && circuit.num_rotations() > 0 {
                    let states = train.patch_states(i);
                    for (cell, state) in states.iter().enumerate() {
                        let upstream: Vec<f64> = (0..num_qubits)
                            .map(|q| dx[q * patches + cell])
                            .collect();
                        let g = parameter_shift_grad(state, &circuit, &upstream)?;
                        for (acc, gj) in dangles.iter_mut().zip(&g) {
                            *acc += gj;
                        }
                    }
                }
            }
            adam_head.step(head.weights_mut(), &dweights)?;
            if cfg.trainable && circuit.num_rotations() > 0 {
                let mut angles = circuit.angles().to_vec();
                adam_angles.step(&mut angles, &dangles)?;
                circuit.set_angles(angles)?;
            }
        }

        // Validation: sequential batches over the fixed order, cursor kept
        // across epochs so successive epochs continue where the last left off.
        let val_indices: Vec<usize> = (0..cfg.val_steps * cfg.batch_size)
            .map(|k| (val_cursor + k) % val.len())
            .collect();
        val_cursor = (val_cursor + cfg.val_steps * cfg.batch_size) % val.len();
        let (val_loss, val_acc) =
            evaluate_indices(&circuit, &head, val, &val_indices, cfg.batch_size, grid)?;

        let row = EpochMetrics {
            epoch: epoch + 1,
            train_loss: loss_sum / cfg.steps_per_epoch as f64,
            train_acc: correct as f64 / (cfg.steps_per_epoch * cfg.batch_size) as f64,
            val_loss,
            val_acc,
            wall_secs: started.elapsed().as_secs_f64(),
        };
        on_epoch(&row);
        epochs.push(row);
    }

    let (test_loss, test_acc) = evaluate_indices(
        &circuit,
        &head,
        test,
        &(0..test.len()).collect::<Vec<_>>(),
        cfg.batch_size,
        grid,
    )?;
    Ok((
        MetricsLog {
            epochs,
            test_loss,
            test_acc,
        },
        TrainedModel {
            encoder: cfg.encoder,
            filter: cfg.filter,
            circuit,
            head,
            patches_per_image: patches,
        },
    ))
}

/// Mean and max of one metric across runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanMax {
    pub mean: f64,
    pub max: f64,
}

fn mean_max(values: &[f64]) -> MeanMax {
    MeanMax {
        mean: values.iter().sum::<f64>() / values.len() as f64,
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Seed-sweep summary: per-run means over the last `k` epochs, then mean and
/// max across runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateSummary {
    pub runs: usize,
    pub train_loss: MeanMax,
    pub train_acc: MeanMax,
    pub val_loss: MeanMax,
    pub val_acc: MeanMax,
    pub test_loss: MeanMax,
    pub test_acc: MeanMax,
}

/// Aggregates a seed sweep: each run contributes its mean train/val metrics
/// over its last `last_k_epochs` epochs and its final test metrics.
pub fn aggregate(logs: &[MetricsLog], last_k_epochs: usize) -> Result<AggregateSummary> {
    if logs.is_empty() {
        return Err(Error::contract("aggregate needs at least one log"));
    }
    if last_k_epochs == 0 {
        return Err(Error::config("last_k_epochs must be at least 1"));
    }
    let mut per_run: [Vec<f64>; 6] = Default::default();
    for log in logs {
        if log.epochs.is_empty() {
            return Err(Error::contract("cannot aggregate a log with no epochs"));
        }
        let tail = &log.epochs[log.epochs.len().saturating_sub(last_k_epochs)..];
        let mean_of = |f: fn(&EpochMetrics) -> f64| {
            tail.iter().map(f).sum::<f64>() / tail.len() as f64
        };
        per_run[0].push(mean_of(|r| r.train_loss));
        per_run[1].push(mean_of(|r| r.train_acc));
        per_run[2].push(mean_of(|r| r.val_loss));
        per_run[3].push(mean_of(|r| r.val_acc));
        per_run[4].push(log.test_loss);
        per_run[5].push(log.test_acc);
    }
    Ok(AggregateSummary {
        runs: logs.len(),
        train_loss: mean_max(&per_run[0]),
        train_acc: mean_max(&per_run[1]),
        val_loss: mean_max(&per_run[2]),
        val_acc: mean_max(&per_run[3]),
        test_loss: mean_max(&per_run[4]),
        test_acc: mean_max(&per_run[5]),
    })
}
