#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;

use ndarray::{array, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use socialburden::data::{Dataset, FeatureSchema, FeatureSpec, SensitiveTable};
use socialburden::models::{Dense, Model, ModelSpec};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn logistic(w: &[f64], b: f64) -> Model {
    let weights = Array2::from_shape_vec((w.len(), 1), w.to_vec()).unwrap();
    Model::from_layers(
        ModelSpec::logistic(),
        vec![Dense {
            weights,
            bias: array![b],
        }],
    )
    .unwrap()
}

pub fn toy_schema() -> FeatureSchema {
    FeatureSchema {
        label: "y".into(),
        features: vec![
            FeatureSpec::numeric("a", 0.0, 1.0),
            FeatureSpec::numeric("b", 0.0, 1.0),
            FeatureSpec::numeric("c", 0.0, 1.0).immutable(),
            FeatureSpec::categorical("grp", ["p", "q"]).sensitive(),
        ],
        ignored: Vec::new(),
    }
}

/// Three features in the unit box; group `q` sits lower on `a`, and the label
/// is a noisy threshold on `a + b` that is lower for `q`.
pub fn toy_dataset(n: usize, seed: u64) -> Dataset {
    let mut r = rng(seed);
    let mut x = Array2::zeros((n, 3));
    let mut y = Vec::with_capacity(n);
    let mut members = Vec::with_capacity(n);
    for i in 0..n {
        let q = r.random::<f64>() < 0.4;
        let a: f64 = r.random::<f64>() * if q { 0.7 } else { 1.0 };
        let b: f64 = r.random();
        let c: f64 = r.random();
        x[[i, 0]] = a;
        x[[i, 1]] = b;
        x[[i, 2]] = c;
        let noise = (r.random::<f64>() - 0.5) * 0.3;
        // q qualifies at a lower score, so a pooled model under-accepts it
        y.push(u8::from(a + b + noise > if q { 0.8 } else { 1.0 }));
        members.push(vec![if q { "q" } else { "p" }.to_string()]);
    }
    let table = SensitiveTable::new(vec!["grp".into()], members).unwrap();
    Dataset::new("toy", x, y, table, Arc::new(toy_schema())).unwrap()
}

/// Write the toy population as raw CSV plus schema, for file-driven runs.
pub fn write_toy_files(
    dir: &Path,
    n: usize,
    seed: u64,
) -> (std::path::PathBuf, std::path::PathBuf) {
    let ds = toy_dataset(n, seed);
    let data = dir.join("toy.csv");
    let schema = dir.join("toy-schema.json");
    let mut text = String::from("a,b,c,grp,y\n");
    let table = ds.sensitive();
    let x = ds.x();
    for i in 0..ds.len() {
        let row = x.row(i);
        text += &format!(
            "{},{},{},{},{}\n",
            row[0],
            row[1],
            row[2],
            table.value(i, 0),
            ds.y()[i]
        );
    }
    std::fs::write(&data, text).unwrap();
    toy_schema().to_json_file(&schema).unwrap();
    (data, schema)
}
