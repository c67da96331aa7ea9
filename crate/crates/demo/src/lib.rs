//! Browser demo: a small region, a model trained on load, and three views
//! (field raster, context subgraph, node scores). The plain Rust API is
//! what the wasm exports wrap, so it also runs natively.

use std::fmt::Write;

use obs_impact::explain::{method_scores, ExplanationMethod};
use obs_impact::geograph::{haversine_km, GeoPoint, Variable};
use obs_impact::neuralcore::{finetune, predict, pretrain, ModelConfig, ModelWeights};
use obs_impact::pipeline::{generate_and_prepare, PipelineConfig, Prepared};
use obs_impact::synthdata::{gen_fields, FieldSpec, ObsCounts, Region};
use wasm_bindgen::prelude::*;

fn demo_config(seed: u64) -> PipelineConfig {
    PipelineConfig {
        field: FieldSpec {
            seed,
            region: Region {
                lat_min: 34.0,
                lat_max: 38.0,
                lon_min: 125.0,
                lon_max: 130.0,
            },
            n_bumps: 6,
            ..FieldSpec::default()
        },
        counts: ObsCounts::uniform(8),
        train_steps: 4,
        test_steps: 3,
        model: ModelConfig {
            d: 12,
            mlp_hidden: vec![12],
            epochs_pretrain: 4,
            epochs_finetune: 8,
            batch_size: 16,
            lr: 5e-3,
            seed,
            ..ModelConfig::default()
        },
        ..PipelineConfig::default()
    }
}

#[wasm_bindgen]
pub struct Demo {
    config: PipelineConfig,
    prepared: Prepared,
    weights: ModelWeights,
}

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

impl Demo {
    pub fn build(seed: u64) -> obs_impact::Result<Self> {
        let config = demo_config(seed);
        let prepared = generate_and_prepare(&config)?;
        let encoder = pretrain(&prepared.train, &config.model)?;
        let weights = finetune(&prepared.train, Some(&encoder.weights), &config.model)?.weights;
        Ok(Self {
            config,
            prepared,
            weights,
        })
    }

    /// Test sample whose center is nearest to (`lat`, `lon`) at test step `step`.
    fn nearest_sample(&self, step: usize, lat: f64, lon: f64) -> Option<usize> {
        let test = &self.prepared.test;
        let target = GeoPoint::new(lat, lon);
        let dist = |i: usize| {
            let s = &test.samples[i];
            let node = test.steps[s.step].graph.node(s.subgraph.center_id)?;
            Some(haversine_km(node.location, target))
        };
        (0..test.samples.len())
            .filter(|&i| test.samples[i].step == step)
            .filter_map(|i| dist(i).map(|d| (d, i)))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, i)| i)
    }

    /// JSON description of the subgraph around a point with per-node scores.
    pub fn explain_json(
        &self,
        step: usize,
        lat: f64,
        lon: f64,
        method: ExplanationMethod,
    ) -> obs_impact::Result<String> {
        let test = &self.prepared.test;
        let Some(index) = self.nearest_sample(step, lat, lon) else {
            return Err(obs_impact::Error::Empty("test step"));
        };
        let sample = &test.samples[index];
        let input = test.input_occluded(index, &[])?;
        let scores = method_scores(method, &self.weights, &input)?;
        let prediction = self
            .prepared
            .normalizer
            .restore_state(&predict(&self.weights, &input)?);
        let truth = self.prepared.normalizer.restore_state(&sample.label);
        let graph = &test.steps[sample.step].graph;

        let mut out = String::from("{\"nodes\":[");
        for (j, id) in sample.subgraph.node_ids.iter().enumerate() {
            let node = graph.node(*id).expect("subgraph node in its step graph");
            if j > 0 {
                out.push(',');
            }
            write!(
                out,
                "{{\"id\":{},\"kind\":\"{}\",\"lat\":{},\"lon\":{},\"hop\":{},\"score\":{}}}",
                id.0,
                node.kind,
                node.location.lat,
                node.location.lon,
                sample.subgraph.hops[j],
                scores[j]
            )
            .unwrap();
        }
        out.push_str("],\"edges\":[");
        let n = sample.subgraph.len();
        let mut first = true;
        for a in 0..n {
            for b in a + 1..n {
                if sample.subgraph.adjacency[[a, b]] == 1 {
                    if !first {
                        out.push(',');
                    }
                    first = false;
                    write!(out, "[{a},{b}]").unwrap();
                }
            }
        }
        let triple = |xs: [f64; 4]| format!("[{},{},{},{}]", xs[0], xs[1], xs[2], xs[3]);
        write!(
            out,
            "],\"method\":\"{method}\",\"time\":{},\"prediction\":{},\"truth\":{}}}",
            test.time_of(sample),
            triple(prediction),
            triple(truth)
        )
        .unwrap();
        Ok(out)
    }
}

#[wasm_bindgen]
impl Demo {
    /// Generates data and trains the model; takes a moment.
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32) -> Result<Demo, JsError> {
        Demo::build(u64::from(seed)).map_err(js_err)
    }

    pub fn lat_min(&self) -> f64 {
        self.config.field.region.lat_min
    }

    pub fn lat_max(&self) -> f64 {
        self.config.field.region.lat_max
    }

    pub fn lon_min(&self) -> f64 {
        self.config.field.region.lon_min
    }

    pub fn lon_max(&self) -> f64 {
        self.config.field.region.lon_max
    }

    pub fn test_steps(&self) -> usize {
        self.prepared.test.steps.len()
    }

    /// Row-major `height x width` raster of U, V, T or Q at test step `step`,
    /// top row northernmost.
    pub fn field(&self, step: usize, variable: usize, width: usize, height: usize) -> Vec<f64> {
        let var = Variable::STATE[variable.min(3)];
        let t = self.prepared.test.steps[step.min(self.test_steps() - 1)].time;
        let fields = gen_fields(&self.config.field, t);
        let r = self.config.field.region;
        let mut out = Vec::with_capacity(width * height);
        for row in 0..height {
            let lat = r.lat_max - r.height() * (row as f64 + 0.5) / height as f64;
            for col in 0..width {
                let lon = r.lon_min + r.width() * (col as f64 + 0.5) / width as f64;
                out.push(fields.value(var, lat, lon));
            }
        }
        out
    }

    /// Context subgraph of the NWP node nearest the point, scored by `method`
    /// (`sa`, `gradcam` or `lrp`), as JSON.
    pub fn explain(
        &self,
        step: usize,
        lat: f64,
        lon: f64,
        method: &str,
    ) -> Result<String, JsError> {
        let method: ExplanationMethod = method.parse().map_err(js_err)?;
        let step = step.min(self.test_steps().saturating_sub(1));
        self.explain_json(step, lat, lon, method).map_err(js_err)
    }
}
