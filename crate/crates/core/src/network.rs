//! The synchronous simulation loop: presentations, clustering, training,
//! neuron labeling and evaluation.
//!
//! Each clock cycle reads the crossbar, integrates every neuron and then
//! selects at most one winner. Learning writes happen only after all reads
//! of the cycle, and only on the winner's row. Every random draw comes from
//! a counter-based stream (see [`crate::rng`]), so results depend only on
//! the seed, the configuration and the data, never on thread count.

use rand::Rng;
use rayon::prelude::*;

use crate::crossbar::{subtract, InputVector, ReadNoise, SubtractionConfig, SynapseArray};
use crate::device::DeviceParams;
use crate::error::{Error, Result};
use crate::learning::{apply_stdp, select_pulses, ActivityTrace, StdpConfig, StdpOutcome};
use crate::neuron::{homeostasis_update, post_fire_reset, select_winner, LifNeuron, NeuronParams};
use crate::rng::{self, Purpose};

pub const DEFAULT_MAX_CYCLES: usize = 50;
pub const MNIST_CLASSES: usize = 10;

/// Noise streams for frozen inference are offset from training cycles.
const INFERENCE_NOISE_SALT: u64 = 0x1f3d_5b79_a2c4_e608;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NetworkParams {
    pub device: DeviceParams,
    pub subtraction: SubtractionConfig,
    pub neuron: NeuronParams,
    pub stdp: StdpConfig,
}

impl NetworkParams {
    pub fn validate(&self) -> Result<()> {
        self.device.validate()?;
        self.subtraction.validate()?;
        self.neuron.validate()?;
        self.stdp.validate()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    array: SynapseArray,
    neurons: Vec<LifNeuron>,
    params: NetworkParams,
    seed: u64,
    cycle: u64,
    trace: ActivityTrace,
}

/// Outcome of presenting one image.
#[derive(Clone, Debug, PartialEq)]
pub struct PresentationResult {
    /// `None` on timeout.
    pub winner: Option<usize>,
    pub cycles_elapsed: usize,
    /// Post-subtraction outputs of the last cycle.
    pub final_outputs: Vec<f64>,
    /// Present only when learning ran.
    pub stdp: Option<StdpOutcome>,
}

impl PresentationResult {
    pub fn switched(&self) -> usize {
        self.stdp.as_ref().map_or(0, StdpOutcome::switched)
    }

    pub fn attempted(&self) -> usize {
        self.stdp.as_ref().map_or(0, StdpOutcome::attempted)
    }
}

impl Network {
    /// All synapses anti-parallel, neurons at rest.
    pub fn new(n_out: usize, n_in: usize, r: usize, params: NetworkParams, seed: u64) -> Result<Self> {
        params.validate()?;
        let array = SynapseArray::new(n_out, n_in, r, params.device)?;
        Ok(Network {
            array,
            neurons: vec![LifNeuron::at_rest(&params.neuron); n_out],
            params,
            seed,
            cycle: 0,
            trace: ActivityTrace::new(n_in),
        })
    }

    /// Every synapse independently parallel with probability 1/2.
    pub fn init_random(n_out: usize, n_in: usize, r: usize, params: NetworkParams, seed: u64) -> Result<Self> {
        let mut net = Network::new(n_out, n_in, r, params, seed)?;
        net.array.randomize(seed);
        Ok(net)
    }

    /// Rebuild from persisted state. Used by the snapshot loader.
    pub(crate) fn from_parts(array: SynapseArray, neurons: Vec<LifNeuron>, params: NetworkParams, seed: u64, cycle: u64) -> Result<Self> {
        params.validate()?;
        if neurons.len() != array.n_out() {
            return Err(Error::argument(format!(
                "{} neurons for {} rows",
                neurons.len(),
                array.n_out()
            )));
        }
        let n_in = array.n_in();
        Ok(Network {
            array,
            neurons,
            params,
            seed,
            cycle,
            trace: ActivityTrace::new(n_in),
        })
    }

    pub fn array(&self) -> &SynapseArray {
        &self.array
    }

    /// Direct access for supervised programming.
    pub fn array_mut(&mut self) -> &mut SynapseArray {
        &mut self.array
    }

    pub fn neurons(&self) -> &[LifNeuron] {
        &self.neurons
    }

    pub fn params(&self) -> &NetworkParams {
        &self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Global clock: number of cycles simulated so far.
    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn n_out(&self) -> usize {
        self.array.n_out()
    }

    pub fn n_in(&self) -> usize {
        self.array.n_in()
    }

    pub fn fire_counts(&self) -> Vec<u64> {
        self.neurons.iter().map(|n| n.fired_count).collect()
    }

    fn check_image(&self, image: &InputVector) -> Result<()> {
        if image.len() != self.n_in() {
            return Err(Error::argument(format!(
                "image length {} != n_in {}",
                image.len(),
                self.n_in()
            )));
        }
        Ok(())
    }

    fn noisy(&self) -> bool {
        self.array.device().read_noise_sigma > 0.0
    }

    /// Post-subtraction dendrite outputs for `image`.
    pub fn outputs(&self, image: &InputVector, noise: Option<ReadNoise>) -> Result<Vec<f64>> {
        let raw = self.array.vmm_raw(image, noise)?;
        Ok(subtract(&raw, image, &self.params.subtraction, self.array.replicas()))
    }

    /// Apply `image` for up to `max_cycles` clock cycles, stopping at the
    /// first fire. On a fire: optional learning on the winner's row, then
    /// all integrations reset and thresholds adapt. On timeout nothing is
    /// reset and thresholds only relax.
    pub fn present(&mut self, image: &InputVector, learn: bool, max_cycles: usize) -> Result<PresentationResult> {
        self.check_image(image)?;
        // Without read noise every cycle reads the same currents.
        let mut steady: Option<Vec<f64>> = None;
        let mut outputs = vec![0.0; self.n_out()];
        for step in 1..=max_cycles {
            self.cycle += 1;
            let cycle = self.cycle;
            self.trace.record(image, cycle)?;
            if self.noisy() {
                outputs = self.outputs(image, Some(ReadNoise { seed: self.seed, cycle }))?;
            } else {
                if steady.is_none() {
                    steady = Some(self.outputs(image, None)?);
                }
                outputs.clone_from(steady.as_ref().unwrap());
            }
            let np = self.params.neuron;
            for (n, &o) in self.neurons.iter_mut().zip(&outputs) {
                n.integrate_step(o, &np);
            }
            if let Some(winner) = select_winner(&self.neurons)? {
                let stdp = if learn {
                    let pulses = select_pulses(&self.trace, cycle, &self.params.stdp);
                    let mut s = rng::stream(self.seed, Purpose::Learn, winner as u64, cycle);
                    Some(apply_stdp(&mut self.array, winner, &pulses, &self.params.stdp, &mut s)?)
                } else {
                    None
                };
                post_fire_reset(&mut self.neurons);
                homeostasis_update(&mut self.neurons, Some(winner), &np)?;
                self.neurons[winner].fired_count += 1;
                return Ok(PresentationResult {
                    winner: Some(winner),
                    cycles_elapsed: step,
                    final_outputs: outputs,
                    stdp,
                });
            }
        }
        homeostasis_update(&mut self.neurons, None, &self.params.neuron)?;
        Ok(PresentationResult {
            winner: None,
            cycles_elapsed: max_cycles,
            final_outputs: outputs,
            stdp: None,
        })
    }

    /// Winner for `image` with learning and homeostasis frozen: integration
    /// starts from zero and thresholds are read, not updated. `index` keys
    /// the read-noise stream so results do not depend on evaluation order.
    pub fn infer(&self, image: &InputVector, index: u64, max_cycles: usize) -> Result<Option<usize>> {
        self.check_image(image)?;
        let np = &self.params.neuron;
        let mut neurons: Vec<LifNeuron> = self
            .neurons
            .iter()
            .map(|n| LifNeuron {
                integration: 0.0,
                ..*n
            })
            .collect();
        let steady = if self.noisy() { None } else { Some(self.outputs(image, None)?) };
        for step in 0..max_cycles {
            let noisy_outputs;
            let outputs = match &steady {
                Some(o) => o,
                None => {
                    let noise = ReadNoise {
                        seed: self.seed ^ INFERENCE_NOISE_SALT,
                        cycle: index.wrapping_mul(max_cycles as u64).wrapping_add(step as u64),
                    };
                    noisy_outputs = self.outputs(image, Some(noise))?;
                    &noisy_outputs
                }
            };
            for (n, &o) in neurons.iter_mut().zip(outputs) {
                n.integrate_step(o, np);
            }
            if let Some(w) = select_winner(&neurons)? {
                return Ok(Some(w));
            }
        }
        Ok(None)
    }

    /// Frozen-inference winners for a batch, in input order.
    pub fn infer_all(&self, images: &[InputVector], max_cycles: usize) -> Result<Vec<Option<usize>>> {
        images
            .par_iter()
            .enumerate()
            .map(|(i, im)| self.infer(im, i as u64, max_cycles))
            .collect()
    }

    /// True when every image is encoded, by effective-weight sign, by some
    /// row. Distinct images then map to distinct rows.
    pub fn encodes_all(&self, images: &[InputVector]) -> Result<bool> {
        let patterns = (0..self.n_out())
            .map(|row| self.array.row_pattern(row, &self.params.subtraction))
            .collect::<Result<Vec<_>>>()?;
        Ok(images.iter().all(|im| patterns.contains(im)))
    }

    /// Present `images` in seeded random order, learning on every fire,
    /// until each image is encoded by its own row or `max_presentations`
    /// is reached.
    pub fn run_clustering(
        &mut self,
        images: &[InputVector],
        order_seed: u64,
        max_presentations: usize,
        max_cycles: usize,
    ) -> Result<ClusteringRun> {
        if images.is_empty() || images.len() > self.n_out() {
            return Err(Error::argument(format!(
                "clustering needs 1..={} images, got {}",
                self.n_out(),
                images.len()
            )));
        }
        for (i, a) in images.iter().enumerate() {
            self.check_image(a)?;
            if images[..i].contains(a) {
                return Err(Error::argument(format!("duplicate clustering image {a}")));
            }
        }
        let mut log = Vec::new();
        if self.encodes_all(images)? {
            return Ok(ClusteringRun {
                converged: true,
                presentations_used: 0,
                log,
            });
        }
        let mut order = rng::stream(order_seed, Purpose::Order, 0, 0);
        for k in 1..=max_presentations {
            let image_index = order.random_range(0..images.len());
            let result = self.present(&images[image_index], true, max_cycles)?;
            log.push(PresentationRecord {
                presentation: k,
                image_index,
                image: images[image_index].clone(),
                result,
                rows_after: (0..self.n_out())
                    .map(|row| self.array.row_pattern(row, &self.params.subtraction))
                    .collect::<Result<_>>()?,
            });
            if self.encodes_all(images)? {
                return Ok(ClusteringRun {
                    converged: true,
                    presentations_used: k,
                    log,
                });
            }
        }
        Ok(ClusteringRun {
            converged: false,
            presentations_used: max_presentations,
            log,
        })
    }

    /// Unsupervised training: one learning presentation per image, for
    /// `opts.epochs` passes. `on_progress` is called after every image.
    pub fn train<F>(&mut self, dataset: &[InputVector], opts: &TrainOptions, mut on_progress: F) -> Result<TrainReport>
    where
        F: FnMut(&Network, &TrainReport) -> Result<()>,
    {
        if dataset.is_empty() {
            return Err(Error::argument("training dataset is empty"));
        }
        let mut report = TrainReport::new(self.n_out());
        for epoch in 0..opts.epochs {
            let order: Vec<usize> = match opts.shuffle_seed {
                Some(s) => rng::permutation(dataset.len(), &mut rng::stream(s, Purpose::Order, epoch as u64, 1)),
                None => (0..dataset.len()).collect(),
            };
            for i in order {
                let res = self.present(&dataset[i], true, opts.max_cycles)?;
                report.record(&res);
                on_progress(self, &report)?;
            }
        }
        Ok(report)
    }

    /// Label each neuron with the class it wins most often under frozen
    /// inference. Ties go to the lower class; neurons that never win stay
    /// unassigned.
    pub fn label_neurons(&self, images: &[InputVector], labels: &[u8], max_cycles: usize) -> Result<NeuronLabels> {
        if images.is_empty() {
            return Err(Error::argument("labeling set is empty"));
        }
        check_labels(images, labels)?;
        let winners = self.infer_all(images, max_cycles)?;
        let mut counts = vec![[0u64; MNIST_CLASSES]; self.n_out()];
        for (w, &l) in winners.iter().zip(labels) {
            if let Some(w) = w {
                counts[*w][l as usize] += 1;
            }
        }
        Ok(NeuronLabels::from_counts(&counts))
    }

    pub fn evaluate(&self, labels: &NeuronLabels, images: &[InputVector], truth: &[u8], max_cycles: usize) -> Result<Evaluation> {
        if images.is_empty() {
            return Err(Error::argument("test set is empty"));
        }
        check_labels(images, truth)?;
        if labels.len() != self.n_out() {
            return Err(Error::argument(format!(
                "{} neuron labels for {} neurons",
                labels.len(),
                self.n_out()
            )));
        }
        let winners = self.infer_all(images, max_cycles)?;
        Ok(Evaluation::from_predictions(
            winners.iter().map(|w| w.and_then(|w| labels.get(w))),
            truth,
        ))
    }
}

fn check_labels(images: &[InputVector], labels: &[u8]) -> Result<()> {
    if images.len() != labels.len() {
        return Err(Error::argument(format!(
            "{} images but {} labels",
            images.len(),
            labels.len()
        )));
    }
    if let Some(bad) = labels.iter().find(|&&l| l as usize >= MNIST_CLASSES) {
        return Err(Error::argument(format!("class label {bad} out of range")));
    }
    Ok(())
}

/// One entry of the clustering log.
#[derive(Clone, Debug, PartialEq)]
pub struct PresentationRecord {
    /// 1-based presentation number.
    pub presentation: usize,
    pub image_index: usize,
    pub image: InputVector,
    pub result: PresentationResult,
    /// Row patterns after learning.
    pub rows_after: Vec<InputVector>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusteringRun {
    pub converged: bool,
    pub presentations_used: usize,
    pub log: Vec<PresentationRecord>,
}

impl ClusteringRun {
    pub fn switched(&self) -> usize {
        self.log.iter().map(|r| r.result.switched()).sum()
    }

    pub fn attempted(&self) -> usize {
        self.log.iter().map(|r| r.result.attempted()).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrainOptions {
    pub epochs: usize,
    pub max_cycles: usize,
    /// Shuffle the dataset each epoch with this seed; dataset order if `None`.
    pub shuffle_seed: Option<u64>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            epochs: 1,
            max_cycles: DEFAULT_MAX_CYCLES,
            shuffle_seed: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrainReport {
    pub presentations: u64,
    pub timeouts: u64,
    /// Fires per neuron during training.
    pub fire_counts: Vec<u64>,
    pub switched: u64,
    pub attempted: u64,
}

impl TrainReport {
    pub fn new(n_out: usize) -> Self {
        TrainReport {
            presentations: 0,
            timeouts: 0,
            fire_counts: vec![0; n_out],
            switched: 0,
            attempted: 0,
        }
    }

    pub fn record(&mut self, res: &PresentationResult) {
        self.presentations += 1;
        match res.winner {
            Some(w) => self.fire_counts[w] += 1,
            None => self.timeouts += 1,
        }
        self.switched += res.switched() as u64;
        self.attempted += res.attempted() as u64;
    }

    /// Shannon entropy (bits) of the distribution of fires over neurons.
    pub fn fire_entropy(&self) -> f64 {
        fire_entropy(&self.fire_counts)
    }
}

pub fn fire_entropy(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total as f64;
            -p * p.log2()
        })
        .sum()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NeuronLabels {
    labels: Vec<Option<u8>>,
}

impl NeuronLabels {
    pub fn new(labels: Vec<Option<u8>>) -> Self {
        NeuronLabels { labels }
    }

    /// Argmax of per-class win counts, lower class on ties, `None` for a
    /// neuron with no wins.
    pub fn from_counts(counts: &[[u64; MNIST_CLASSES]]) -> Self {
        let labels = counts
            .iter()
            .map(|c| {
                let (best, &n) = c
                    .iter()
                    .enumerate()
                    .rev()
                    .max_by_key(|&(_, n)| n)
                    .expect("non-empty class list");
                (n > 0).then_some(best as u8)
            })
            .collect();
        NeuronLabels { labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, neuron: usize) -> Option<u8> {
        self.labels.get(neuron).copied().flatten()
    }

    pub fn as_slice(&self) -> &[Option<u8>] {
        &self.labels
    }

    pub fn assigned(&self) -> usize {
        self.labels.iter().flatten().count()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub correct: u64,
    pub total: u64,
    /// `confusion[true][predicted]`; the last column counts images with no
    /// prediction (timeout or unlabeled winner).
    pub confusion: Vec<Vec<u64>>,
}

impl Evaluation {
    pub fn from_predictions(predicted: impl Iterator<Item = Option<u8>>, truth: &[u8]) -> Self {
        let mut confusion = vec![vec![0u64; MNIST_CLASSES + 1]; MNIST_CLASSES];
        let mut correct = 0;
        for (p, &t) in predicted.zip(truth) {
            let col = p.map_or(MNIST_CLASSES, usize::from);
            confusion[t as usize][col] += 1;
            if p == Some(t) {
                correct += 1;
            }
        }
        let total = truth.len() as u64;
        Evaluation {
            accuracy: correct as f64 / total as f64,
            correct,
            total,
            confusion,
        }
    }
}
