//! Archive conventions for the toolkit's artifacts: datasets, host
//! models, representation sets, preprocessed pairs, and KAE checkpoints.

use std::path::Path;

use super::archive::{Tensor, TensorArchive};
use crate::datasets::Dataset;
use crate::error::IoError;
use crate::kae::KaeModel;
use crate::linalg::Mat;
use crate::nn::DenseLayer;
use crate::preprocess::{FittedPair, PreprocessTransform};
use crate::resnet::{RepresentationSet, ResidualMlpModel};

// ---------------------------------------------------------------- dataset

pub fn save_dataset(data: &Dataset, path: &Path) -> Result<(), IoError> {
    let mut a = TensorArchive::new();
    a.insert("features", Tensor::from_mat_f32(&data.features))?;
    a.insert("labels", Tensor::from_labels(&data.labels))?;
    a.insert("name", Tensor::from_string(&data.name))?;
    a.insert("seed", Tensor::scalar_i64(data.seed as i64))?;
    a.write(path)
}

pub fn load_dataset(path: &Path) -> Result<Dataset, IoError> {
    let a = TensorArchive::read(path)?;
    let features = a.require("features")?.as_mat_f32("features")?;
    let labels = a.require("labels")?.as_labels("labels")?;
    if labels.len() != features.rows() {
        return Err(IoError::CorruptArchive {
            path: path.display().to_string(),
            detail: format!("{} labels for {} rows", labels.len(), features.rows()),
        });
    }
    Ok(Dataset {
        features,
        labels,
        name: a.require("name")?.as_string("name")?,
        seed: a.require("seed")?.as_scalar_i64("seed")? as u64,
    })
}

// ---------------------------------------------------------- representations

pub fn save_representation(
    set: &RepresentationSet,
    dataset: &str,
    path: &Path,
) -> Result<(), IoError> {
    let mut a = TensorArchive::new();
    a.insert("features", Tensor::from_mat_f32(&set.features))?;
    a.insert("labels", Tensor::from_labels(&set.labels))?;
    a.insert("layer", Tensor::scalar_i64(set.layer as i64))?;
    a.insert("name", Tensor::from_string(dataset))?;
    a.write(path)
}

pub fn load_representation(path: &Path) -> Result<(RepresentationSet, String), IoError> {
    let a = TensorArchive::read(path)?;
    let set = RepresentationSet {
        layer: a.require("layer")?.as_scalar_i64("layer")? as usize,
        features: a.require("features")?.as_mat_f32("features")?,
        labels: a.require("labels")?.as_labels("labels")?,
    };
    let name = a.require("name")?.as_string("name")?;
    Ok((set, name))
}

// ------------------------------------------------------------------- host

fn insert_dense(
    a: &mut TensorArchive,
    prefix: &str,
    layer: &DenseLayer<f32>,
) -> Result<(), IoError> {
    a.insert(
        &format!("{prefix}.weight"),
        Tensor::from_mat_f32(&layer.weight),
    )?;
    a.insert(&format!("{prefix}.bias"), Tensor::from_mat_f32(&layer.bias))
}

fn read_dense_into(
    a: &TensorArchive,
    prefix: &str,
    layer: &mut DenseLayer<f32>,
) -> Result<(), IoError> {
    let w = a
        .require(&format!("{prefix}.weight"))?
        .as_mat_f32(&format!("{prefix}.weight"))?;
    let b = a
        .require(&format!("{prefix}.bias"))?
        .as_mat_f32(&format!("{prefix}.bias"))?;
    if w.shape() != layer.weight.shape() || b.shape() != layer.bias.shape() {
        return Err(IoError::CorruptArchive {
            path: Default::default(),
            detail: format!(
                "{prefix}: stored shapes {:?}/{:?} do not match architecture {:?}/{:?}",
                w.shape(),
                b.shape(),
                layer.weight.shape(),
                layer.bias.shape()
            ),
        });
    }
    layer.weight = w;
    layer.bias = b;
    Ok(())
}

pub fn save_mlp(
    model: &ResidualMlpModel<f32>,
    dataset: &str,
    path: &Path,
) -> Result<(), IoError> {
    let mut a = TensorArchive::new();
    a.insert(
        "meta",
        Tensor::I64 {
            dims: vec![4],
            data: vec![
                model.input_layer.in_dim() as i64,
                model.width() as i64,
                model.blocks.len() as i64,
                model.num_classes() as i64,
            ],
        },
    )?;
    a.insert("name", Tensor::from_string(dataset))?;
    insert_dense(&mut a, "input", &model.input_layer)?;
    for (i, block) in model.blocks.iter().enumerate() {
        insert_dense(&mut a, &format!("block{i}"), &block.inner)?;
    }
    insert_dense(&mut a, "head", &model.head)?;
    a.write(path)
}

pub fn load_mlp(path: &Path) -> Result<(ResidualMlpModel<f32>, String), IoError> {
    let a = TensorArchive::read(path)?;
    let meta = match a.require("meta")? {
        Tensor::I64 { data, .. } if data.len() == 4 => data.clone(),
        other => {
            return Err(IoError::CorruptArchive {
                path: path.display().to_string(),
                detail: format!("meta: expected 4 i64 values, found dims {:?}", other.dims()),
            })
        }
    };
    let (d_in, width, blocks, classes) = (
        meta[0] as usize,
        meta[1] as usize,
        meta[2] as usize,
        meta[3] as usize,
    );
    let mut model = ResidualMlpModel::<f32>::new(d_in, width, blocks, classes, 0);
    read_dense_into(&a, "input", &mut model.input_layer)?;
    for (i, block) in model.blocks.iter_mut().enumerate() {
        read_dense_into(&a, &format!("block{i}"), &mut block.inner)?;
    }
    read_dense_into(&a, "head", &mut model.head)?;
    let name = a.require("name")?.as_string("name")?;
    Ok((model, name))
}

// ------------------------------------------------------------- transforms

fn insert_transform(
    a: &mut TensorArchive,
    prefix: &str,
    t: &PreprocessTransform,
) -> Result<(), IoError> {
    a.insert(&format!("{prefix}.mean"), Tensor::from_mat_f64(&t.mean))?;
    a.insert(
        &format!("{prefix}.projection"),
        Tensor::from_mat_f64(&t.projection),
    )?;
    a.insert(&format!("{prefix}.scale"), Tensor::scalar_f64(t.scale))?;
    a.insert(
        &format!("{prefix}.rotation"),
        Tensor::from_mat_f64(&t.rotation),
    )?;
    a.insert(
        &format!("{prefix}.fitted_on"),
        Tensor::scalar_i64(t.fitted_on as i64),
    )
}

fn read_transform(a: &TensorArchive, prefix: &str) -> Result<PreprocessTransform, IoError> {
    Ok(PreprocessTransform {
        mean: a
            .require(&format!("{prefix}.mean"))?
            .as_mat_f64("mean")?,
        projection: a
            .require(&format!("{prefix}.projection"))?
            .as_mat_f64("projection")?,
        scale: a
            .require(&format!("{prefix}.scale"))?
            .as_scalar_f64("scale")?,
        rotation: a
            .require(&format!("{prefix}.rotation"))?
            .as_mat_f64("rotation")?,
        fitted_on: a
            .require(&format!("{prefix}.fitted_on"))?
            .as_scalar_i64("fitted_on")? as usize,
    })
}

// ------------------------------------------------------------------- pair

pub fn save_pair(
    pair: &FittedPair,
    labels: &[usize],
    dataset: &str,
    path: &Path,
) -> Result<(), IoError> {
    let mut a = TensorArchive::new();
    a.insert("xhat_i", Tensor::from_mat_f64(&pair.xhat_i))?;
    a.insert("xhat_j", Tensor::from_mat_f64(&pair.xhat_j))?;
    a.insert("labels", Tensor::from_labels(labels))?;
    a.insert("name", Tensor::from_string(dataset))?;
    insert_transform(&mut a, "t_i", &pair.t_i)?;
    insert_transform(&mut a, "t_j", &pair.t_j)?;
    a.write(path)
}

pub fn load_pair(path: &Path) -> Result<(FittedPair, Vec<usize>, String), IoError> {
    let a = TensorArchive::read(path)?;
    let pair = FittedPair {
        t_i: read_transform(&a, "t_i")?,
        t_j: read_transform(&a, "t_j")?,
        xhat_i: a.require("xhat_i")?.as_mat_f64("xhat_i")?,
        xhat_j: a.require("xhat_j")?.as_mat_f64("xhat_j")?,
    };
    let labels = a.require("labels")?.as_labels("labels")?;
    let name = a.require("name")?.as_string("name")?;
    Ok((pair, labels, name))
}

// ------------------------------------------------------------- checkpoint

/// A trained KAE bundled with the transforms it was fitted behind and the
/// provenance needed to rerun downstream stages.
#[derive(Debug, Clone)]
pub struct KaeCheckpoint {
    pub model: KaeModel<f32>,
    pub t_i: PreprocessTransform,
    pub t_j: PreprocessTransform,
    /// Path of the pair archive the KAE was trained on.
    pub pair_path: String,
    pub dataset: String,
}

pub fn save_kae(ckpt: &KaeCheckpoint, path: &Path) -> Result<(), IoError> {
    let model = &ckpt.model;
    let mut a = TensorArchive::new();
    a.insert(
        "meta",
        Tensor::I64 {
            dims: vec![4],
            data: vec![
                model.state_dim() as i64,
                model.encoder[0].out_dim() as i64,
                model.observable_dim() as i64,
                model.k_steps as i64,
            ],
        },
    )?;
    a.insert("name", Tensor::from_string(&ckpt.dataset))?;
    a.insert("pair_path", Tensor::from_string(&ckpt.pair_path))?;
    insert_dense(&mut a, "enc0", &model.encoder[0])?;
    insert_dense(&mut a, "enc1", &model.encoder[1])?;
    a.insert("generator", Tensor::from_mat_f32(&model.generator_g))?;
    insert_dense(&mut a, "dec0", &model.decoder[0])?;
    insert_dense(&mut a, "dec1", &model.decoder[1])?;
    insert_transform(&mut a, "t_i", &ckpt.t_i)?;
    insert_transform(&mut a, "t_j", &ckpt.t_j)?;
    a.write(path)
}

pub fn load_kae(path: &Path) -> Result<KaeCheckpoint, IoError> {
    let a = TensorArchive::read(path)?;
    let meta = match a.require("meta")? {
        Tensor::I64 { data, .. } if data.len() == 4 => data.clone(),
        other => {
            return Err(IoError::CorruptArchive {
                path: path.display().to_string(),
                detail: format!("meta: expected 4 i64 values, found dims {:?}", other.dims()),
            })
        }
    };
    let (d, hidden, p, k_steps) = (
        meta[0] as usize,
        meta[1] as usize,
        meta[2] as usize,
        meta[3] as usize,
    );
    let mut model = KaeModel::<f32>::new(d, hidden, p, 0);
    model.k_steps = k_steps;
    read_dense_into(&a, "enc0", &mut model.encoder[0])?;
    read_dense_into(&a, "enc1", &mut model.encoder[1])?;
    let g = a.require("generator")?.as_mat_f32("generator")?;
    if g.shape() != (p, p) {
        return Err(IoError::CorruptArchive {
            path: path.display().to_string(),
            detail: format!("generator: expected {p}x{p}, found {:?}", g.shape()),
        });
    }
    model.generator_g = g;
    read_dense_into(&a, "dec0", &mut model.decoder[0])?;
    read_dense_into(&a, "dec1", &mut model.decoder[1])?;
    Ok(KaeCheckpoint {
        model,
        t_i: read_transform(&a, "t_i")?,
        t_j: read_transform(&a, "t_j")?,
        pair_path: a.require("pair_path")?.as_string("pair_path")?,
        dataset: a.require("name")?.as_string("name")?,
    })
}

/// Saves an edited operator (a raw matrix override, no generator).
pub fn save_operator(op: &Mat<f64>, path: &Path) -> Result<(), IoError> {
    let mut a = TensorArchive::new();
    a.insert("operator", Tensor::from_mat_f64(op))?;
    a.write(path)
}

pub fn load_operator(path: &Path) -> Result<Mat<f64>, IoError> {
    TensorArchive::read(path)?
        .require("operator")?
        .as_mat_f64("operator")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::fit_pair;
    use crate::resnet::capture_layers;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use tempfile::tempdir;

    fn small_dataset() -> Dataset {
        let mut rng = StdRng::seed_from_u64(41);
        Dataset {
            features: Mat::from_fn(20, 3, |_, _| rng.gen_range(-1.0f32..1.0)),
            labels: (0..20).map(|i| i % 2).collect(),
            name: "toy".into(),
            seed: 9,
        }
    }

    #[test]
    fn dataset_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("d.kta");
        let data = small_dataset();
        save_dataset(&data, &path).unwrap();
        let back = load_dataset(&path).unwrap();
        assert_eq!(back.features.as_slice(), data.features.as_slice());
        assert_eq!(back.labels, data.labels);
        assert_eq!(back.name, "toy");
        assert_eq!(back.seed, 9);
    }

    // Model round-trip: recomputed logits are bit-identical.
    #[test]
    fn mlp_round_trip_preserves_logits() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.kta");
        let data = small_dataset();
        let model = ResidualMlpModel::<f32>::new(3, 6, 2, 2, 5);
        save_mlp(&model, "toy", &path).unwrap();
        let (back, name) = load_mlp(&path).unwrap();
        assert_eq!(name, "toy");
        assert_eq!(
            back.logits(&data.features).as_slice(),
            model.logits(&data.features).as_slice()
        );
    }

    #[test]
    fn representation_and_pair_round_trip() {
        let dir = tempdir().unwrap();
        let data = small_dataset();
        let model = ResidualMlpModel::<f32>::new(3, 6, 2, 2, 5);
        let reps = capture_layers(&model, &data, &[0, 2]);

        let rp = dir.path().join("r.kta");
        save_representation(&reps[0], "toy", &rp).unwrap();
        let (back, name) = load_representation(&rp).unwrap();
        assert_eq!(name, "toy");
        assert_eq!(back.layer, 0);
        assert_eq!(back.features.as_slice(), reps[0].features.as_slice());
        assert_eq!(back.labels, reps[0].labels);

        let pair = fit_pair(&reps[0], &reps[1], 4).unwrap();
        let pp = dir.path().join("p.kta");
        save_pair(&pair, &data.labels, "toy", &pp).unwrap();
        let (pback, labels, name) = load_pair(&pp).unwrap();
        assert_eq!(name, "toy");
        assert_eq!(labels, data.labels);
        assert_eq!(pback.xhat_i.as_slice(), pair.xhat_i.as_slice());
        assert_eq!(pback.xhat_j.as_slice(), pair.xhat_j.as_slice());
        assert_eq!(
            pback.t_i.projection.as_slice(),
            pair.t_i.projection.as_slice()
        );
        assert_eq!(pback.t_j.rotation.as_slice(), pair.t_j.rotation.as_slice());
        assert_eq!(pback.t_i.scale, pair.t_i.scale);
        assert_eq!(pback.t_i.fitted_on, 0);
        assert_eq!(pback.t_j.fitted_on, 2);
    }

    // KAE checkpoint round-trip: predictions are bit-identical and the
    // provenance strings survive.
    #[test]
    fn kae_checkpoint_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("k.kta");
        let mut rng = StdRng::seed_from_u64(43);
        let mut model = KaeModel::<f32>::new(4, 6, 3, 2);
        model.k_steps = 7;
        model.generator_g = Mat::from_fn(3, 3, |_, _| rng.gen_range(-0.2f32..0.2));
        let data = small_dataset();
        let m2 = ResidualMlpModel::<f32>::new(3, 4, 1, 2, 5);
        let reps = capture_layers(&m2, &data, &[0, 1]);
        let pair = fit_pair(&reps[0], &reps[1], 4).unwrap();

        let ckpt = KaeCheckpoint {
            model: model.clone(),
            t_i: pair.t_i.clone(),
            t_j: pair.t_j.clone(),
            pair_path: "pairs/toy.kta".into(),
            dataset: "toy".into(),
        };
        save_kae(&ckpt, &path).unwrap();
        let back = load_kae(&path).unwrap();
        assert_eq!(back.dataset, "toy");
        assert_eq!(back.pair_path, "pairs/toy.kta");
        assert_eq!(back.model.k_steps, 7);
        let x = Mat::from_fn(5, 4, |_, _| rng.gen_range(-1.0f32..1.0));
        assert_eq!(
            back.model.predict(&x).unwrap().as_slice(),
            model.predict(&x).unwrap().as_slice()
        );
        assert_eq!(back.t_i.scale, pair.t_i.scale);
        assert_eq!(
            back.t_j.projection.as_slice(),
            pair.t_j.projection.as_slice()
        );
    }

    #[test]
    fn operator_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("op.kta");
        let op = Mat::from_fn(3, 3, |r, c| (r * 3 + c) as f64 * 0.25);
        save_operator(&op, &path).unwrap();
        assert_eq!(load_operator(&path).unwrap().as_slice(), op.as_slice());
    }
}
