//! End-to-end run: generate, pretrain, fine-tune, evaluate, explain and
//! measure fidelity.

use crate::context::{Corpus, Normalizer};
use crate::error::Result;
use crate::explain::{ExplanationMethod, ImpactReport};
use crate::fidelity::{
    evaluate_fidelity, predict_corpus, FidelityResult, Ranking, DEFAULT_FRACTIONS,
};
use crate::geograph::DEFAULT_RADIUS_KM;
use crate::neuralcore::{
    compute_metrics, finetune, pretrain, Metrics, ModelConfig, ModelWeights, TrainOutcome,
};
use crate::synthdata::{generate_split, Dataset, FieldSpec, ObsCounts};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub field: FieldSpec,
    pub counts: ObsCounts,
    pub train_steps: usize,
    pub test_steps: usize,
    pub radius_km: f64,
    pub model: ModelConfig,
    pub fractions: Vec<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            field: FieldSpec::default(),
            counts: ObsCounts::default(),
            train_steps: 40,
            test_steps: 40,
            radius_km: DEFAULT_RADIUS_KM,
            model: ModelConfig::default(),
            fractions: DEFAULT_FRACTIONS.to_vec(),
        }
    }
}

impl PipelineConfig {
    /// Seed of the random-ranking fidelity baseline.
    pub fn baseline_seed(&self) -> u64 {
        self.model.seed ^ 0x5eed
    }
}

/// Train and test corpora standardized with train statistics.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub normalizer: Normalizer,
    pub train: Corpus,
    pub test: Corpus,
}

pub fn prepare(train: &Dataset, test: &Dataset, radius_km: f64, k: usize) -> Result<Prepared> {
    let normalizer = Normalizer::fit(train)?;
    Ok(Prepared {
        train: Corpus::build(train, &normalizer, radius_km, k)?,
        test: Corpus::build(test, &normalizer, radius_km, k)?,
        normalizer,
    })
}

pub fn generate_and_prepare(config: &PipelineConfig) -> Result<Prepared> {
    let (train, test) = generate_split(
        &config.field,
        &config.counts,
        config.train_steps,
        config.test_steps,
    )?;
    prepare(&train, &test, config.radius_km, config.model.k)
}

/// Metrics of `weights` on a corpus, in standardized units.
pub fn evaluate(weights: &ModelWeights, corpus: &Corpus) -> Result<Metrics> {
    compute_metrics(&predict_corpus(weights, corpus)?, &corpus.labels())
}

#[derive(Debug, Clone)]
pub struct RunOutputs {
    pub pretraining: TrainOutcome,
    pub pretrained: TrainOutcome,
    pub vanilla: TrainOutcome,
    pub pretrained_metrics: Metrics,
    pub vanilla_metrics: Metrics,
    pub impacts: Vec<ImpactReport>,
    /// Three methods at each fraction.
    pub fidelity: Vec<FidelityResult>,
    /// Random ranking at each fraction.
    pub baseline: Vec<FidelityResult>,
}

/// Trains both ablation arms on `prepared` and analyses the pretrained model.
pub fn run_prepared(config: &PipelineConfig, prepared: &Prepared) -> Result<RunOutputs> {
    let pretraining = pretrain(&prepared.train, &config.model)?;
    let pretrained = finetune(&prepared.train, Some(&pretraining.weights), &config.model)?;
    let vanilla = finetune(&prepared.train, None, &config.model)?;
    let pretrained_metrics = evaluate(&pretrained.weights, &prepared.test)?;
    let vanilla_metrics = evaluate(&vanilla.weights, &prepared.test)?;

    let impacts = ExplanationMethod::ALL
        .iter()
        .map(|&m| ImpactReport::compute(m, &pretrained.weights, &prepared.test))
        .collect::<Result<Vec<_>>>()?;
    let rankings: Vec<Ranking> = ExplanationMethod::ALL.map(Ranking::Method).to_vec();
    let fidelity = evaluate_fidelity(
        &pretrained.weights,
        &prepared.test,
        &rankings,
        &config.fractions,
    )?;
    let baseline = evaluate_fidelity(
        &pretrained.weights,
        &prepared.test,
        &[Ranking::Random {
            seed: config.baseline_seed(),
        }],
        &config.fractions,
    )?;

    Ok(RunOutputs {
        pretraining,
        pretrained,
        vanilla,
        pretrained_metrics,
        vanilla_metrics,
        impacts,
        fidelity,
        baseline,
    })
}

pub fn run(config: &PipelineConfig) -> Result<RunOutputs> {
    run_prepared(config, &generate_and_prepare(config)?)
}
